"""Exhaustive search over masked action sequences for tiny instances.

Depth-first over every decision point with clock-based pruning; refuses
instances whose search tree exceeds the node bound.  Serves as the
optimality oracle for the solver suite.
"""

from __future__ import annotations


class SearchBudgetExceeded(Exception):
    pass


def brute_force_optimal(env, node_limit: int = 10 ** 7) -> int:
    """Minimal makespan over all masked-legal action sequences."""
    total = env.instance.total_ops
    rough = (2 * total + 2) ** max(1, min(2 * total, 12))
    if rough > node_limit and total > 6:
        raise SearchBudgetExceeded(
            f"instance with {total} operations is too large to enumerate")
    env = env.clone()
    best = None
    nodes = 0

    def visit(state):
        nonlocal best, nodes
        nodes += 1
        if nodes > node_limit:
            raise SearchBudgetExceeded(f"exceeded {node_limit} nodes")
        if best is not None and state.net.clock >= best:
            return
        if state.terminal:
            mk = state.makespan()
            if best is None or mk < best:
                best = mk
            return
        mask = state.action_mask()
        for action, ok in enumerate(mask):
            if not ok:
                continue
            child = state.clone()
            child.step(action)
            visit(child)

    visit(env)
    if best is None:
        raise RuntimeError("search finished without reaching terminality")
    return best

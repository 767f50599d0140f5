"""Stop-order optimization over a travel-time matrix.

Two-phase heuristic shared by the transect and canvass solvers: nearest
neighbor for construction, then best-improvement 2-opt and Or-opt until
no move helps. The matrix may be asymmetric (one-ways, turn penalties),
so 2-opt evaluates segment reversals at their true reversed cost via
direction-specific prefix sums instead of assuming t(i,j) == t(j,i).
Everything is deterministic: moves are enumerated in a fixed order and
equal-gain moves resolve to the earliest one.
"""

from __future__ import annotations

import math
from typing import Sequence

Matrix = Sequence[Sequence[float]]


def tour_cost(matrix: Matrix, order: Sequence[int], closed: bool) -> float:
    cost = 0.0
    for a, b in zip(order, order[1:]):
        cost += matrix[a][b]
    if closed and len(order) > 1:
        cost += matrix[order[-1]][order[0]]
    return cost


def nearest_neighbor_order(
    matrix: Matrix, start: int, stops: Sequence[int], end: int | None = None
) -> list[int]:
    """Greedy construction from ``start`` over ``stops``; ties take the
    stop listed first. ``end`` (for open paths) is appended, not chosen."""
    remaining = list(stops)
    order = [start]
    current = start
    while remaining:
        best = None
        best_cost = math.inf
        for s in remaining:
            c = matrix[current][s]
            if c < best_cost:
                best_cost = c
                best = s
        if best is None:
            break
        remaining.remove(best)
        order.append(best)
        current = best
    if end is not None:
        order.append(end)
    return order


def improve_order(
    matrix: Matrix,
    order: Sequence[int],
    closed: bool,
    epsilon: float = 1e-9,
    move_limit: int = 20000,
    free_end: bool = False,
) -> list[int]:
    """Best-improvement local search with 2-opt and Or-opt moves.

    The first position is fixed. For open paths the last position is
    fixed too (a canvass exit) unless ``free_end`` lets the path finish
    anywhere. Or-opt relocates segments of length 1-3 without reversing
    them; 2-opt reverses a middle segment. Stops when the best move
    improves by less than ``epsilon`` or after ``move_limit`` applied
    moves.
    """
    seq = list(order)
    n = len(seq)
    lo = 1  # first mutable position
    # one past the last mutable position
    hi = n if (closed or free_end) else n - 1
    if hi - lo < 2:
        return seq

    moves_applied = 0
    while moves_applied < move_limit:
        best_delta = -epsilon
        best_move: tuple | None = None

        # Directional prefix sums over the current sequence: fwd[i] is the
        # cost of seq[0..i] walked forward, rev[i] walked backward.
        fwd = [0.0] * n
        rev = [0.0] * n
        for i in range(1, n):
            fwd[i] = fwd[i - 1] + matrix[seq[i - 1]][seq[i]]
            rev[i] = rev[i - 1] + matrix[seq[i]][seq[i - 1]]

        def cost_after(i: int) -> float:
            # Cost of the edge leaving position i (wraps for closed tours).
            if i + 1 < n:
                return matrix[seq[i]][seq[i + 1]]
            return matrix[seq[i]][seq[0]] if closed else 0.0

        # 2-opt: reverse seq[i..j].
        for i in range(lo, hi - 1):
            for j in range(i + 1, hi):
                before = matrix[seq[i - 1]][seq[i]]
                inner_fwd = fwd[j] - fwd[i]
                after = cost_after(j)
                inner_rev = rev[j] - rev[i]
                if j + 1 < n:
                    exit_cost = matrix[seq[i]][seq[j + 1]]
                elif closed:
                    exit_cost = matrix[seq[i]][seq[0]]
                else:
                    exit_cost = 0.0  # reversed suffix ends the open path
                delta = (
                    matrix[seq[i - 1]][seq[j]]
                    + inner_rev
                    + exit_cost
                    - (before + inner_fwd + after)
                )
                if delta < best_delta:
                    best_delta = delta
                    best_move = ("2opt", i, j)

        # Or-opt: move seq[i..i+L-1] to sit after position j.
        for L in (1, 2, 3):
            for i in range(lo, hi - L + 1):
                if i + L > (n if (closed or free_end) else n - 1):
                    continue
                seg_end = i + L - 1
                pred = seq[i - 1]
                if seg_end + 1 < n:
                    succ = seq[seg_end + 1]
                elif closed:
                    succ = seq[0]
                else:
                    succ = None  # tail segment of a free-end path
                if succ is None and not free_end:
                    continue
                removal = matrix[pred][seq[i]] + cost_after(seg_end)
                if succ is not None:
                    removal -= matrix[pred][succ]
                for j in range(lo - 1, hi):
                    if i - 1 <= j <= seg_end:
                        continue
                    u = seq[j]
                    if j + 1 < n:
                        v = seq[j + 1]
                    elif closed:
                        v = seq[0]
                    elif free_end:
                        v = None  # append after the current tail
                    else:
                        continue
                    insertion = matrix[u][seq[i]]
                    if v is not None:
                        insertion += matrix[seq[seg_end]][v] - matrix[u][v]
                    delta = insertion - removal
                    if delta < best_delta:
                        best_delta = delta
                        best_move = ("oropt", i, L, j)

        if best_move is None:
            break

        if best_move[0] == "2opt":
            _, i, j = best_move
            seq[i : j + 1] = reversed(seq[i : j + 1])
        else:
            _, i, L, j = best_move
            seg = seq[i : i + L]
            del seq[i : i + L]
            target = j if j < i else j - L
            seq[target + 1 : target + 1] = seg
        moves_applied += 1

    return seq

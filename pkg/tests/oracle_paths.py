"""Independent oracle for the minimum-cost match path.

Depth-first search over every feasible path (monotone, 8-connected, no two
consecutive steps along the same row or column, band cells excluded), with
branch-and-bound pruning that is exact because all costs are nonnegative.
This explores the path space directly and shares no machinery with the
production row-sweep recurrence.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def min_cost_exhaustive(D, feasible, e):
    n = D.shape[0]
    INF = 1e18
    best = INF
    depth_cap = 4 * n + 8
    fi = np.empty(depth_cap, np.int64)
    fj = np.empty(depth_cap, np.int64)
    fl = np.empty(depth_cap, np.int64)
    fc = np.empty(depth_cap, np.float64)
    fm = np.empty(depth_cap, np.int64)
    for s in range(2):
        si = 0 if s == 0 else e + 1
        sj = e + 1 if s == 0 else 0
        if si >= n or sj >= n or not feasible[si, sj]:
            continue
        top = 0
        fi[0], fj[0], fl[0], fc[0], fm[0] = si, sj, -1, D[si, sj], 0
        if si == n - 1 or sj == n - 1:
            if fc[0] < best:
                best = fc[0]
        while top >= 0:
            m = fm[top]
            if m >= 3:
                top -= 1
                continue
            fm[top] = m + 1
            i, j, last, cost = fi[top], fj[top], fl[top], fc[top]
            if m == 1 and last == 1:  # down after down: column constant 3x
                continue
            if m == 2 and last == 2:  # right after right: row constant 3x
                continue
            ni = i + 1 if m <= 1 else i
            nj = j + 1 if m != 1 else j
            if ni >= n or nj >= n or not feasible[ni, nj]:
                continue
            c2 = cost + D[ni, nj]
            if c2 >= best:  # exact pruning: extensions only add cost
                continue
            if ni == n - 1 or nj == n - 1:
                best = c2
            top += 1
            fi[top], fj[top], fl[top], fc[top], fm[top] = ni, nj, m, c2, 0
    return best

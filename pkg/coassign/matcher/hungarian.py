"""Exact rectangular linear assignment.

The shortest-augmenting-path Hungarian method with row and column potentials
(Jonker-Volgenant style) runs on the rectangular matrix itself, with the
shorter side as rows, in O(n^2 m) for n <= m. Among all optimal assignments it returns the
one whose (query, gt) pair list, sorted by query, is lexicographically
smallest. Optimal assignments are exactly the row-saturating matchings on
zero-reduced-cost edges that cover every column with a negative potential;
the smallest one is fixed query by query with alternating-path swaps.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from coassign.errors import InvalidInputError

logger = logging.getLogger(__name__)

# reduced costs within this fraction of the matrix scale count as zero
_TIGHT_RTOL = 1e-9


@dataclass(frozen=True)
class MatchResult:
    """One-to-one pairing of queries (rows) with ground truths (columns)."""
    pairs: Tuple[Tuple[int, int], ...]
    total_cost: float

    def gt_to_query(self) -> Dict[int, int]:
        return {g: q for q, g in self.pairs}

    def query_to_gt(self) -> Dict[int, int]:
        return {q: g for q, g in self.pairs}

    def to_dict(self) -> dict:
        return {'pairs': [list(p) for p in self.pairs], 'total_cost': self.total_cost}


def validate_cost_matrix(cost) -> np.ndarray:
    arr = np.asarray(cost, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f'cost matrix must be 2-D with at least one row and column, got shape {arr.shape}')
    if not np.all(np.isfinite(arr)):
        r, c = (int(v) for v in np.argwhere(~np.isfinite(arr))[0])
        raise InvalidInputError(f'cost matrix entry ({r}, {c}) is not finite: {arr[r, c]}')
    return arr


def _shortest_augmenting_path(cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve a (n, m) problem with n <= m, matching every row.

    Returns (row_to_col, row potentials, column potentials). Reduced costs
    ``cost - u - v`` are nonnegative, zero on matched edges, and ``v`` is
    nonpositive with ``v == 0`` on every unmatched column.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # p[j]: 1-based row matched to 1-based column j; column 0 is virtual
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.int64)
    matched = np.flatnonzero(p[1:])
    row_to_col[p[1:][matched] - 1] = matched
    return row_to_col, u[1:], v[1:]


class _TightMatching:
    """A row-saturating matching restricted to zero-reduced-cost edges.

    Any such matching that also covers every ``must_cover`` column is
    optimal. Rows and columns are fixed one by one as the lexicographic
    choice proceeds; fixed ones never move again.
    """

    def __init__(self, tight: np.ndarray, row_to_col: np.ndarray, must_cover: np.ndarray):
        n, m = tight.shape
        self.tight = tight
        self.must_cover = must_cover
        self.row_to_col = row_to_col.copy()
        self.col_to_row = np.full(m, -1, dtype=np.int64)
        self.col_to_row[self.row_to_col] = np.arange(n)
        self.fixed_rows = np.zeros(n, dtype=bool)
        self.fixed_cols = np.zeros(m, dtype=bool)

    def _apply(self, moves):
        for x, y in moves:
            self.row_to_col[x] = y
            self.col_to_row[y] = x

    def _rehome(self, start: int):
        """Alternating path giving the unmatched row ``start`` a column."""
        parent: Dict[int, int] = {}
        queue = deque([start])
        seen_rows = {start}
        end = None
        while queue and end is None:
            x = queue.popleft()
            for y in np.flatnonzero(self.tight[x]):
                y = int(y)
                if self.fixed_cols[y] or y in parent:
                    continue
                parent[y] = x
                z = int(self.col_to_row[y])
                if z < 0:
                    end = y
                    break
                if not self.fixed_rows[z] and z not in seen_rows:
                    seen_rows.add(z)
                    queue.append(z)
        if end is None:
            return None
        moves, y = [], end
        while True:
            x = parent[y]
            moves.append((x, y))
            if x == start:
                return moves
            y = int(self.row_to_col[x])

    def _cover(self, col: int):
        """Alternating path moving some row onto the free ``col``, releasing an uncovered-ok column."""
        parent: Dict[int, int] = {}
        queue = deque([col])
        seen_cols = {col}
        end = None
        while queue and end is None:
            y = queue.popleft()
            for x in np.flatnonzero(self.tight[:, y]):
                x = int(x)
                if self.fixed_rows[x] or x in parent:
                    continue
                parent[x] = y
                w = int(self.row_to_col[x])
                if not self.must_cover[w]:
                    end = x
                    break
                if w not in seen_cols:
                    seen_cols.add(w)
                    queue.append(w)
        if end is None:
            return None
        moves, x = [], end
        while True:
            y = parent[x]
            moves.append((x, y))
            if y == col:
                return moves, int(self.row_to_col[end])
            x = int(self.col_to_row[y])

    def try_assign(self, a: int, b: int) -> bool:
        """Fix row ``a`` on column ``b`` if some optimal matching allows it."""
        released = int(self.row_to_col[a])
        self.fixed_rows[a] = True
        self.fixed_cols[b] = True
        if released == b:
            return True
        saved = self.row_to_col.copy(), self.col_to_row.copy()
        holder = int(self.col_to_row[b])
        self.col_to_row[released] = -1
        self._apply([(a, b)])
        ok = True
        if holder >= 0:
            self.row_to_col[holder] = -1
            moves = self._rehome(holder)
            ok = moves is not None
            if ok:
                self._apply(moves)
        if ok and self.must_cover[released] and self.col_to_row[released] < 0:
            found = self._cover(released)
            ok = found is not None
            if ok:
                moves, vacated = found
                self._apply(moves)
                self.col_to_row[vacated] = -1
        if not ok:
            self.row_to_col, self.col_to_row = saved
            self.fixed_rows[a] = False
            self.fixed_cols[b] = False
        return ok


def _lexicographic_optimum(cost: np.ndarray, row_to_col: np.ndarray, u: np.ndarray, v: np.ndarray,
                           tol: float, queries_are_rows: bool) -> np.ndarray:
    n = len(row_to_col)
    tight = (cost - u[:, None] - v[None, :]) <= tol
    tight[np.arange(n), row_to_col] = True
    state = _TightMatching(tight, row_to_col, v < -tol)
    if queries_are_rows:
        for r in range(n):
            for c in np.flatnonzero(tight[r] & ~state.fixed_cols):
                if state.try_assign(r, int(c)):
                    break
    else:
        # rows are gts; walk queries in order, each taking its smallest feasible gt or none
        for q in range(cost.shape[1]):
            if not state.fixed_cols[q]:
                for g in np.flatnonzero(tight[:, q] & ~state.fixed_rows):
                    if state.try_assign(int(g), q):
                        break
            state.fixed_cols[q] = True
    return state.row_to_col


def hungarian_solve(cost) -> MatchResult:
    """Minimum-cost one-to-one assignment on a rectangular matrix.

    Args:
        cost: (rows, cols) finite costs; rows are queries, columns are ground
            truths.

    Returns:
        ``min(rows, cols)`` pairs sorted by query index; among equal-cost
        optima the lexicographically smallest pair list.

    Raises:
        InvalidInputError: On an empty matrix or any NaN/inf entry.
    """
    cost = validate_cost_matrix(cost)
    n_rows, n_cols = cost.shape
    queries_are_rows = n_rows <= n_cols
    work = cost if queries_are_rows else np.ascontiguousarray(cost.T)

    row_to_col, u, v = _shortest_augmenting_path(work)
    raw_total = math.fsum(work[r, row_to_col[r]] for r in range(len(row_to_col)))

    tol = _TIGHT_RTOL * max(1.0, float(np.abs(cost).max()))
    best = _lexicographic_optimum(work, row_to_col, u, v, tol, queries_are_rows)
    best_total = math.fsum(work[r, best[r]] for r in range(len(best)))
    if best_total > raw_total + len(best) * tol:
        logger.warning('Tie-break drifted from the optimum (%.17g > %.17g); keeping solver order',
                       best_total, raw_total)
        best = row_to_col

    if queries_are_rows:
        pairs = tuple((r, int(best[r])) for r in range(n_rows))
    else:
        pairs = tuple(sorted((int(best[g]), g) for g in range(n_cols)))
    total = math.fsum(cost[q, g] for q, g in pairs)
    logger.debug('Solved %dx%d assignment: %d pairs, cost %.6g', n_rows, n_cols, len(pairs), total)
    return MatchResult(pairs=pairs, total_cost=total)

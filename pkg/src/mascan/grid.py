"""Quantized antenna placement geometry.

Candidate positions live on a square lattice of step ``d`` covering an
``a*wavelength x a*wavelength`` area.  Element placements are one-hot
selections of lattice points subject to a pairwise minimum distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_GRID_CAP = 10_000


@dataclass(frozen=True, slots=True)
class PositionGrid:
    """Uniform lattice of candidate element positions.

    Attributes:
        step: lattice spacing in meters.
        mx, my: position counts per axis (inclusive endpoints).
        xy: (M, 2) array of coordinates in meters, row-major from the
            bottom-left corner.  xy[0] is the phase reference.
    """

    step: float
    mx: int
    my: int
    xy: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.mx * self.my

    def __post_init__(self):
        object.__setattr__(self, "xy", np.asarray(self.xy, dtype=float))
        if self.xy.shape != (self.mx * self.my, 2):
            raise ValueError("position array shape mismatch")


def build_grid(a_norm, wavelength, step, cap=DEFAULT_GRID_CAP) -> PositionGrid:
    """Quantize the a*wavelength square into lattice positions.

    Inclusive endpoints on both axes: floor(a*wavelength/step) + 1 points
    per axis.  Origin at the bottom-left corner.
    """
    if a_norm <= 0 or wavelength <= 0 or step <= 0:
        raise ValueError("grid parameters must be positive")
    side = a_norm * wavelength
    if side < step:
        raise ValueError("area side shorter than one lattice step")
    # floor() on a float ratio can undershoot by 1 ulp at exact multiples
    per_axis = int(np.floor(side / step + 1e-9)) + 1
    if per_axis * per_axis > cap:
        raise ValueError(f"grid would hold {per_axis**2} positions, cap is {cap}")
    coords = np.arange(per_axis) * step
    gx, gy = np.meshgrid(coords, coords, indexing="xy")
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    return PositionGrid(step=float(step), mx=per_axis, my=per_axis, xy=xy)


def distance_matrix(grid: PositionGrid) -> np.ndarray:
    """Pairwise Euclidean distances between candidate positions, (M, M)."""
    diff = grid.xy[:, None, :] - grid.xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True, slots=True)
class SelectionState:
    """One-hot placement of N elements on an M-point grid.

    ``indices[n]`` is the grid index occupied by element n.
    """

    m: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        object.__setattr__(self, "indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("need at least one element index")
        if (idx < 0).any() or (idx >= self.m).any():
            raise ValueError("element index outside grid")

    @property
    def n(self) -> int:
        return self.indices.size

    def onehot(self) -> np.ndarray:
        """(N, M) binary rows, one per element."""
        b = np.zeros((self.n, self.m))
        b[np.arange(self.n), self.indices] = 1.0
        return b

    def matrix(self) -> np.ndarray:
        """Block-diagonal (MN, N) selection matrix with one-hot columns."""
        return selection_to_matrix(self.onehot())


def selection_to_matrix(b_rows) -> np.ndarray:
    """Stack per-element one-hot rows into the (MN, N) block-diagonal form.

    Column n holds b_n in rows n*M..(n+1)*M-1 and zeros elsewhere, so
    B^T B = I for valid one-hot rows.
    """
    b = np.asarray(b_rows, dtype=float)
    if b.ndim != 2:
        raise ValueError("expected an (N, M) array of selection rows")
    n, m = b.shape
    out = np.zeros((n * m, n))
    for k in range(n):
        out[k * m : (k + 1) * m, k] = b[k]
    return out


def validate_selection(state: SelectionState, dist, d_min) -> list[str]:
    """Name every violated placement constraint; empty list means feasible."""
    problems = []
    b = state.onehot()
    for k, row in enumerate(b):
        if not np.isclose(row.sum(), 1.0) or not np.all((row == 0) | (row == 1)):
            problems.append(f"element {k}: selection row is not one-hot")
    for i in range(state.n):
        for j in range(i + 1, state.n):
            d = dist[state.indices[i], state.indices[j]]
            if d < d_min - 1e-12:
                problems.append(
                    f"elements {i},{j}: spacing {d:.6g} m below minimum {d_min:.6g} m"
                )
    return problems


@dataclass(frozen=True, slots=True)
class GloverSystem:
    """Linearization of the pairwise-distance products b_n[i] * b_n'[j].

    One auxiliary block per unordered element pair (n < n'; the distance
    matrix is symmetric so ordered duplicates add nothing).  Variables are
    ordered [b (N*M), phi (P*M*M)] with phi blocks following ``pairs``.

    Rows are G z <= h; ``a_ge`` rows are the per-pair distance floors kept
    separately as A z >= lo.
    """

    n_elems: int
    m: int
    d_min: float
    pairs: tuple
    g: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    a_ge: np.ndarray = field(repr=False)
    lo: np.ndarray = field(repr=False)

    @property
    def n_b(self) -> int:
        return self.n_elems * self.m

    @property
    def n_phi(self) -> int:
        return len(self.pairs) * self.m * self.m

    def b_index(self, n, i) -> int:
        return n * self.m + i

    def phi_index(self, pair_pos, i, j) -> int:
        return self.n_b + (pair_pos * self.m + i) * self.m + j

    def check_point(self, b_flat, phi_flat, tol=1e-9) -> bool:
        z = np.concatenate([np.asarray(b_flat, float).ravel(),
                            np.asarray(phi_flat, float).ravel()])
        return bool(
            np.all(self.g @ z <= self.h + tol) and np.all(self.a_ge @ z >= self.lo - tol)
        )


def glover_constraints(n_elems, m, dist, d_min) -> GloverSystem:
    """Emit the linear system tying phi to products of selection entries.

    Per pair (n, n') and position pair (i, j):
        phi <= b_n[i],  phi <= b_n'[j],  phi >= b_n[i] + b_n'[j] - 1
    plus the distance floor sum_{ij} D[i,j] * phi_{ij} >= d_min.
    At binary feasibility these force phi = b_n[i] * b_n'[j].
    """
    if d_min <= 0:
        raise ValueError("minimum distance must be positive")
    dist = np.asarray(dist, dtype=float)
    pairs = [(a, b) for a in range(n_elems) for b in range(a + 1, n_elems)]
    n_b = n_elems * m
    n_phi = len(pairs) * m * m
    nz = n_b + n_phi

    rows_g, rows_h = [], []
    rows_a, rows_lo = [], []

    def phi_col(p, i, j):
        return n_b + (p * m + i) * m + j

    for p, (na, nb) in enumerate(pairs):
        floor_row = np.zeros(nz)
        for i in range(m):
            for j in range(m):
                c = phi_col(p, i, j)
                floor_row[c] = dist[i, j]
                # phi - b_n[i] <= 0
                r = np.zeros(nz)
                r[c] = 1.0
                r[na * m + i] = -1.0
                rows_g.append(r)
                rows_h.append(0.0)
                # phi - b_n'[j] <= 0
                r = np.zeros(nz)
                r[c] = 1.0
                r[nb * m + j] = -1.0
                rows_g.append(r)
                rows_h.append(0.0)
                # b_n[i] + b_n'[j] - phi <= 1
                r = np.zeros(nz)
                r[na * m + i] = 1.0
                r[nb * m + j] = 1.0
                r[c] = -1.0
                rows_g.append(r)
                rows_h.append(1.0)
        rows_a.append(floor_row)
        rows_lo.append(d_min)

    g = np.array(rows_g) if rows_g else np.zeros((0, nz))
    h = np.array(rows_h)
    a_ge = np.array(rows_a) if rows_a else np.zeros((0, nz))
    lo = np.array(rows_lo)
    return GloverSystem(
        n_elems=n_elems, m=m, d_min=float(d_min), pairs=tuple(pairs),
        g=g, h=h, a_ge=a_ge, lo=lo,
    )


def greedy_spread_selection(grid: PositionGrid, n_elems, d_min) -> SelectionState:
    """Farthest-point placement of N elements, minimum spacing enforced.

    Starts from the bottom-left corner and repeatedly adds the candidate
    maximizing its distance to the chosen set.  Deterministic.
    """
    dist = distance_matrix(grid)
    chosen = [0]
    while len(chosen) < n_elems:
        gaps = dist[:, chosen].min(axis=1)
        gaps[chosen] = -1.0
        nxt = int(np.argmax(gaps))
        if gaps[nxt] < d_min:
            raise ValueError(
                f"cannot place {n_elems} elements at spacing {d_min} on this grid"
            )
        chosen.append(nxt)
    return SelectionState(m=grid.m, indices=np.array(sorted(chosen)))


def round_selection(b_relaxed, dist, d_min) -> SelectionState:
    """Snap relaxed selection rows to a feasible one-hot placement.

    Pure argmax when that already satisfies the spacing floor; otherwise a
    weight-ordered backtracking assignment (elements placed in order of
    decreasing peak weight, candidates tried in decreasing weight) finds the
    greedy-best feasible placement.  Complete for the small N used here.
    """
    b = np.asarray(b_relaxed, dtype=float)
    if b.ndim != 2:
        raise ValueError("expected (N, M) relaxed selection rows")
    if (b < -1e-9).any() or (b > 1 + 1e-9).any():
        raise ValueError("relaxed selections must lie in [0, 1]")
    n, m = b.shape
    idx = np.argmax(b, axis=1).astype(int)

    def feasible(assign):
        return all(
            dist[assign[i], assign[j]] >= d_min - 1e-12
            for i in range(len(assign))
            for j in range(i + 1, len(assign))
        )

    if feasible(idx):
        return SelectionState(m=m, indices=idx)

    elem_order = np.argsort(-b.max(axis=1))
    cand_order = {int(e): np.argsort(-b[e]) for e in elem_order}
    placed = {}
    budget = [200_000]

    def search(pos):
        if budget[0] <= 0:
            return False
        budget[0] -= 1
        if pos == n:
            return True
        e = int(elem_order[pos])
        for cand in cand_order[e]:
            c = int(cand)
            if all(dist[c, o] >= d_min - 1e-12 for o in placed.values()):
                placed[e] = c
                if search(pos + 1):
                    return True
                del placed[e]
        return False

    if not search(0):
        raise RuntimeError("rounding repair failed to find a feasible placement")
    out = np.array([placed[e] for e in range(n)], dtype=int)
    return SelectionState(m=m, indices=out)


def enumerate_feasible_selections(dist, n_elems, d_min, limit=10_000):
    """All minimum-distance-feasible placements of N labeled-irrelevant elements.

    Elements are interchangeable, so combinations (ascending index tuples)
    are enumerated.  Raises once more than ``limit`` placements are found.
    """
    from itertools import combinations

    m = dist.shape[0]
    out = []
    for combo in combinations(range(m), n_elems):
        ok = all(
            dist[a, b] >= d_min - 1e-12 for a, b in combinations(combo, 2)
        )
        if ok:
            out.append(combo)
            if len(out) > limit:
                raise ValueError("feasible-placement enumeration exceeded limit")
    return out

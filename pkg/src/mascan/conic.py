"""Solver-agnostic conic program modeling with a cvxopt backend.

Programs collect scalar/vector/Hermitian variables, affine rows over the
packed real parameter vector, and cone memberships (nonnegative orthant,
second-order, PSD).  Complex data is embedded to real symmetric form at
build time; no complex arithmetic reaches the solver.

The backend is ``cvxopt.solvers.conelp``.  The interface here is the
contract; nothing outside this module touches cvxopt.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers
from cvxopt import spmatrix as cvx_spmatrix

DEFAULT_TOL = 1e-7

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL = "numerical-failure"
STATUS_ITERATIONS = "iteration-limit"


def hermitian_embed(h) -> np.ndarray:
    """Real symmetric [[Re H, -Im H], [Im H, Re H]] of a Hermitian H.

    PSD-ness is preserved both ways and every eigenvalue of H appears
    twice in the embedding.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(h, h.conj().T, atol=1e-10):
        raise ValueError("matrix is not Hermitian within 1e-10")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def embed_vector(v) -> np.ndarray:
    """Real [Re v; Im v] stack; preserves the Euclidean norm."""
    v = np.asarray(v, dtype=complex).ravel()
    return np.concatenate([v.real, v.imag])


def psd_residual(x) -> float:
    """max(0, -lambda_min) of the symmetrized input."""
    x = np.asarray(x, dtype=float)
    sym = 0.5 * (x + x.T)
    return float(max(0.0, -np.linalg.eigvalsh(sym)[0]))


class LinExpr:
    """Sparse affine expression sum_j c_j x_j + const over packed params."""

    __slots__ = ("coeff", "const")

    def __init__(self, coeff=None, const=0.0):
        self.coeff = dict(coeff) if coeff else {}
        self.const = float(const)

    def copy(self):
        return LinExpr(self.coeff, self.const)

    def scaled(self, a):
        a = float(a)
        return LinExpr({k: a * v for k, v in self.coeff.items()}, a * self.const)

    def plus(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            for k, v in other.coeff.items():
                out.coeff[k] = out.coeff.get(k, 0.0) + v
            out.const += other.const
        else:
            out.const += float(other)
        return out

    def minus(self, other):
        if isinstance(other, LinExpr):
            return self.plus(other.scaled(-1.0))
        return self.plus(-float(other))

    def value(self, x) -> float:
        return self.const + sum(v * x[k] for k, v in self.coeff.items())


def lin_sum(exprs) -> LinExpr:
    out = LinExpr()
    for e in exprs:
        out = out.plus(e)
    return out


class MatExpr:
    """Affine symmetric-matrix expression A0 + sum_j x_j A_j (real, dense A_j)."""

    __slots__ = ("n", "coeff", "const")

    def __init__(self, n, coeff=None, const=None):
        self.n = int(n)
        self.coeff = dict(coeff) if coeff else {}
        self.const = np.zeros((n, n)) if const is None else np.asarray(const, float)

    def add_coeff(self, col, a):
        cur = self.coeff.get(col)
        if cur is None:
            self.coeff[col] = np.array(a, dtype=float)
        else:
            cur += a

    def plus(self, other: "MatExpr") -> "MatExpr":
        if other.n != self.n:
            raise ValueError("matrix expression size mismatch")
        out = MatExpr(self.n, self.coeff, self.const.copy())
        out.coeff = {k: v.copy() for k, v in self.coeff.items()}
        for k, v in other.coeff.items():
            out.add_coeff(k, v)
        out.const = out.const + other.const
        return out

    def value(self, x) -> np.ndarray:
        out = self.const.copy()
        for k, a in self.coeff.items():
            out += x[k] * a
        return out


@dataclass(frozen=True, slots=True)
class ScalarVar:
    name: str
    offset: int

    def expr(self) -> LinExpr:
        return LinExpr({self.offset: 1.0})


@dataclass(frozen=True, slots=True)
class VectorVar:
    name: str
    offset: int
    size: int

    def expr(self, i) -> LinExpr:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return LinExpr({self.offset + i: 1.0})

    def exprs(self) -> list:
        return [LinExpr({self.offset + i: 1.0}) for i in range(self.size)]


class HermitianVar:
    """Complex Hermitian n x n variable stored as n^2 real parameters.

    Layout: n diagonal entries, then n(n-1)/2 off-diagonal real parts,
    then n(n-1)/2 off-diagonal imaginary parts, pairs ordered (i < j)
    row-major.
    """

    __slots__ = ("name", "offset", "n", "_pairs")

    def __init__(self, name, offset, n):
        self.name = name
        self.offset = int(offset)
        self.n = int(n)
        self._pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    @property
    def n_params(self) -> int:
        return self.n * self.n

    def param_bases(self):
        """Yield (packed column, complex Hermitian basis matrix)."""
        n = self.n
        col = self.offset
        for i in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, i] = 1.0
            yield col, e
            col += 1
        for i, j in self._pairs:
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            e[j, i] = 1.0
            yield col, e
            col += 1
        for i, j in self._pairs:
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0j
            e[j, i] = -1.0j
            yield col, e
            col += 1

    def trace(self) -> LinExpr:
        return LinExpr({self.offset + i: 1.0 for i in range(self.n)})

    def inner(self, c) -> LinExpr:
        """Re Tr(C^H H) as an affine expression (real for Hermitian C)."""
        c = np.asarray(c, dtype=complex)
        coeff = {}
        col = self.offset
        for i in range(self.n):
            coeff[col] = c[i, i].real
            col += 1
        for i, j in self._pairs:
            coeff[col] = c[i, j].real + c[j, i].real
            col += 1
        for i, j in self._pairs:
            coeff[col] = c[i, j].imag - c[j, i].imag
            col += 1
        return LinExpr({k: v for k, v in coeff.items() if v != 0.0})

    def quad_rows(self, a) -> np.ndarray:
        """Coefficients of a_r^H H a_r per row of A, (rows, n^2) real.

        Row r gives the packed-parameter coefficients of the real quadratic
        form; columns are offset-relative.
        """
        a = np.asarray(a, dtype=complex)
        if a.ndim == 1:
            a = a[None, :]
        rows = a.shape[0]
        out = np.empty((rows, self.n_params))
        out[:, : self.n] = (a.conj() * a).real
        base = self.n
        half = len(self._pairs)
        for p, (i, j) in enumerate(self._pairs):
            z = a[:, i].conj() * a[:, j]
            out[:, base + p] = 2.0 * z.real
            out[:, base + half + p] = -2.0 * z.imag
        return out

    def embedded(self) -> MatExpr:
        """The 2n x 2n real embedding as a matrix expression in the params."""
        expr = MatExpr(2 * self.n)
        for col, basis in self.param_bases():
            expr.add_coeff(col, hermitian_embed(basis))
        return expr

    def value_from(self, x) -> np.ndarray:
        n = self.n
        h = np.zeros((n, n), dtype=complex)
        col = self.offset
        for i in range(n):
            h[i, i] = x[col]
            col += 1
        for i, j in self._pairs:
            h[i, j] += x[col]
            h[j, i] += x[col]
            col += 1
        for i, j in self._pairs:
            h[i, j] += 1j * x[col]
            h[j, i] += -1j * x[col]
            col += 1
        return h


@dataclass(slots=True)
class Solution:
    """Outcome of one conic solve; primal values present iff optimal."""

    status: str
    objective: float | None
    primal: dict | None
    gap: float | None
    primal_residual: float | None
    dual_residual: float | None
    iterations: int
    wall_time: float

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL


class ConicProgram:
    """Conic program in packed-parameter form for the conelp backend."""

    def __init__(self, name="program"):
        self.name = name
        self._nx = 0
        self._vars = {}
        self._objective = LinExpr()
        self._lin_rows = []       # (LinExpr e): e <= 0
        self._soc_blocks = []     # list[LinExpr]: [t, v...] with ||v|| <= t
        self._psd_blocks = []     # MatExpr >= 0
        self._eq_rows = []        # (LinExpr e): e = 0
        self._row_names = []

    @property
    def n_cols(self) -> int:
        return self._nx

    # -- variables ---------------------------------------------------------

    def _claim(self, name, count):
        if name in self._vars:
            raise ValueError(f"duplicate variable {name!r}")
        off = self._nx
        self._nx += count
        return off

    def add_scalar(self, name, nonneg=False) -> ScalarVar:
        v = ScalarVar(name, self._claim(name, 1))
        self._vars[name] = v
        if nonneg:
            self.add_le(v.expr().scaled(-1.0), name=f"{name}>=0")
        return v

    def add_vector(self, name, size, nonneg=False) -> VectorVar:
        v = VectorVar(name, self._claim(name, size), size)
        self._vars[name] = v
        if nonneg:
            for i in range(size):
                self.add_le(v.expr(i).scaled(-1.0), name=f"{name}[{i}]>=0")
        return v

    def add_hermitian(self, name, n, psd=True) -> HermitianVar:
        v = HermitianVar(name, self._claim(name, n * n), n)
        self._vars[name] = v
        if psd:
            self.add_psd(v.embedded(), name=f"{name}>=0")
        return v

    # -- constraints and objective ----------------------------------------

    def minimize(self, expr: LinExpr):
        self._objective = expr.copy()

    def add_le(self, expr, rhs=0.0, name=None):
        """expr <= rhs as a nonnegative-orthant row."""
        e = expr.minus(rhs) if isinstance(rhs, LinExpr) else expr.plus(-float(rhs))
        self._lin_rows.append(e)
        self._row_names.append(name or f"lin{len(self._lin_rows)}")

    def add_ge(self, expr, rhs=0.0, name=None):
        if isinstance(rhs, LinExpr):
            self.add_le(rhs.minus(expr), 0.0, name=name)
        else:
            self.add_le(expr.scaled(-1.0), -float(rhs), name=name)

    def add_eq(self, expr, rhs=0.0, name=None):
        e = expr.minus(rhs) if isinstance(rhs, LinExpr) else expr.plus(-float(rhs))
        self._eq_rows.append(e)

    def add_soc(self, bound: LinExpr, parts, name=None):
        """||parts||_2 <= bound."""
        self._soc_blocks.append([bound] + list(parts))

    def add_psd(self, expr: MatExpr, name=None):
        self._psd_blocks.append(expr)

    # -- assembly ----------------------------------------------------------

    def _assemble(self):
        nl = len(self._lin_rows)
        qdims = [len(b) for b in self._soc_blocks]
        sdims = [b.n for b in self._psd_blocks]
        nrows = nl + sum(qdims) + sum(d * d for d in sdims)

        tri_v, tri_i, tri_j = [], [], []
        h = np.zeros(nrows)

        r = 0
        for e in self._lin_rows:
            for c, v in e.coeff.items():
                if v != 0.0:
                    tri_v.append(v)
                    tri_i.append(r)
                    tri_j.append(c)
            h[r] = -e.const
            r += 1
        for block in self._soc_blocks:
            for e in block:
                for c, v in e.coeff.items():
                    if v != 0.0:
                        tri_v.append(-v)
                        tri_i.append(r)
                        tri_j.append(c)
                h[r] = e.const
                r += 1
        for expr in self._psd_blocks:
            n = expr.n
            h[r : r + n * n] = expr.const.ravel(order="F")
            for c, a in expr.coeff.items():
                flat = a.ravel(order="F")
                nzi = np.nonzero(flat)[0]
                tri_v.extend((-flat[nzi]).tolist())
                tri_i.extend((r + nzi).tolist())
                tri_j.extend([c] * len(nzi))
            r += n * n

        # cvxopt rejects numpy integer scalars; normalize the triplets
        tri_v = [float(v) for v in tri_v]
        tri_i = [int(i) for i in tri_i]
        tri_j = [int(j) for j in tri_j]
        g = cvx_spmatrix(tri_v, tri_i, tri_j, size=(nrows, self._nx))
        hv = cvx_matrix(h)
        dims = {"l": nl, "q": qdims, "s": sdims}

        c = np.zeros(self._nx)
        for col, v in self._objective.coeff.items():
            c[col] = v

        a_mat = b_vec = None
        if self._eq_rows:
            av, ai, aj = [], [], []
            b = np.zeros(len(self._eq_rows))
            for i, e in enumerate(self._eq_rows):
                for col, v in e.coeff.items():
                    if v != 0.0:
                        av.append(v)
                        ai.append(i)
                        aj.append(col)
                b[i] = -e.const
            a_mat = cvx_spmatrix(av, ai, aj, size=(len(self._eq_rows), self._nx))
            b_vec = cvx_matrix(b)
        return cvx_matrix(c), g, hv, dims, a_mat, b_vec

    def dump(self) -> str:
        lines = [f"program {self.name}: {self._nx} packed parameters"]
        for name, v in self._vars.items():
            kind = type(v).__name__
            size = getattr(v, "size", getattr(v, "n", 1))
            lines.append(f"  var {name}: {kind}({size})")
        lines.append(f"  nonneg rows: {len(self._lin_rows)}")
        for i, b in enumerate(self._soc_blocks):
            lines.append(f"  soc[{i}]: dim {len(b)}")
        for i, b in enumerate(self._psd_blocks):
            lines.append(f"  psd[{i}]: {b.n}x{b.n}")
        lines.append(f"  eq rows: {len(self._eq_rows)}")
        return "\n".join(lines)

    # -- solve -------------------------------------------------------------

    def solve(self, tol=DEFAULT_TOL, max_iters=100) -> Solution:
        t0 = time.perf_counter()
        c, g, h, dims, a_mat, b_vec = self._assemble()
        options = {
            "show_progress": False,
            "abstol": tol,
            "reltol": max(tol * 10.0, 1e-9),
            "feastol": tol,
            "maxiters": int(max_iters),
        }
        try:
            if a_mat is not None:
                raw = cvx_solvers.conelp(c, g, h, dims, a_mat, b_vec, options=options)
            else:
                raw = cvx_solvers.conelp(c, g, h, dims, options=options)
        except (ValueError, ArithmeticError) as exc:
            return Solution(
                status=STATUS_NUMERICAL, objective=None, primal=None, gap=None,
                primal_residual=None, dual_residual=None, iterations=0,
                wall_time=time.perf_counter() - t0,
            )
        wall = time.perf_counter() - t0
        status = raw["status"]
        iters = int(raw.get("iterations", 0))
        if status == "optimal":
            x = np.array(raw["x"]).ravel()
            primal = {name: self._extract(v, x) for name, v in self._vars.items()}
            return Solution(
                status=STATUS_OPTIMAL,
                objective=self._objective.value(x),
                primal=primal,
                gap=float(raw["gap"]),
                primal_residual=float(raw["primal infeasibility"]),
                dual_residual=float(raw["dual infeasibility"]),
                iterations=iters,
                wall_time=wall,
            )
        if status == "primal infeasible":
            mapped = STATUS_INFEASIBLE
        elif status == "dual infeasible":
            mapped = STATUS_UNBOUNDED
        elif iters >= max_iters:
            mapped = STATUS_ITERATIONS
        else:
            mapped = STATUS_NUMERICAL
        return Solution(
            status=mapped, objective=None, primal=None,
            gap=_maybe(raw, "gap"), primal_residual=_maybe(raw, "primal infeasibility"),
            dual_residual=_maybe(raw, "dual infeasibility"),
            iterations=iters, wall_time=wall,
        )

    @staticmethod
    def _extract(v, x):
        if isinstance(v, ScalarVar):
            return float(x[v.offset])
        if isinstance(v, VectorVar):
            return x[v.offset : v.offset + v.size].copy()
        return v.value_from(x)


def _maybe(raw, key):
    val = raw.get(key)
    return float(val) if val is not None else None

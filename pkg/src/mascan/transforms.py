"""Convex building blocks shared by the optimizer subproblems.

Holds the robust-SINR linear matrix inequality, the rate-slack bounds,
the duration-rate product minorant, the Schur lifting of the selection
products, and the penalty linearizations driving binary recovery.
"""

from __future__ import annotations

import numpy as np

from .conic import LinExpr, MatExpr, HermitianVar, ScalarVar, hermitian_embed


class CMatAffine:
    """Complex Hermitian-valued affine expression over packed parameters.

    Every per-column coefficient matrix is Hermitian, so the expression is
    Hermitian for all real parameter values and embeds blockwise.
    """

    __slots__ = ("n", "coeff", "const")

    def __init__(self, n, coeff=None, const=None):
        self.n = int(n)
        self.coeff = dict(coeff) if coeff else {}
        self.const = (
            np.zeros((n, n), dtype=complex) if const is None
            else np.asarray(const, dtype=complex)
        )

    def add_coeff(self, col, mat):
        cur = self.coeff.get(col)
        if cur is None:
            self.coeff[col] = np.array(mat, dtype=complex)
        else:
            cur += mat

    @classmethod
    def from_vars(cls, n, terms, const=None) -> "CMatAffine":
        """Sum of scaled Hermitian variables, e.g. W_k - lam (sum W_i + R).

        ``terms`` is an iterable of (HermitianVar, real scale).
        """
        out = cls(n, const=const)
        for var, scale in terms:
            if var.n != n:
                raise ValueError("variable dimension mismatch")
            if scale == 0.0:
                continue
            for col, basis in var.param_bases():
                out.add_coeff(col, scale * basis)
        return out

    def embedded(self) -> MatExpr:
        expr = MatExpr(2 * self.n, const=hermitian_embed(self.const))
        for col, mat in self.coeff.items():
            expr.add_coeff(col, hermitian_embed(mat))
        return expr

    def value(self, x) -> np.ndarray:
        out = self.const.copy()
        for col, mat in self.coeff.items():
            out += x[col] * mat
        return out


def cmat_combine(n, terms, const=None) -> CMatAffine:
    """Scaled sum of Hermitian affine expressions (real scales)."""
    out = CMatAffine(n, const=const)
    for expr, scale in terms:
        if expr.n != n:
            raise ValueError("expression dimension mismatch")
        if scale == 0.0:
            continue
        out.const = out.const + scale * expr.const
        for col, mat in expr.coeff.items():
            out.add_coeff(col, scale * mat)
    return out


def cmat_quad_form(g: CMatAffine, u) -> LinExpr:
    """u^H G u as a real affine expression (G Hermitian affine)."""
    u = np.asarray(u, dtype=complex).ravel()
    coeff = {}
    for col, mat in g.coeff.items():
        v = float(np.real(u.conj() @ mat @ u))
        if v != 0.0:
            coeff[col] = v
    return LinExpr(coeff, float(np.real(u.conj() @ g.const @ u)))


def bordered_robust_lmi(g: CMatAffine, ubar, mu, sigma2, iota,
                        lam_var=None, lam_fixed: float | None = None) -> MatExpr:
    """Certificate that SINR >= lambda for every channel error in the ball.

    With G = (signal covariance) - lambda (interference + sensing), the
    robust requirement over ||error|| <= mu holds iff for some iota >= 0

        [[iota I + G, G u], [u^H G, u^H G u - lambda sigma^2 - iota mu^2]]

    is positive semidefinite, where u is the nominal channel column.  The
    result is returned embedded to real symmetric form.

    Exactly one of ``lam_var`` (multiplier as a decision variable, G's
    lambda-dependence already folded into its coefficients) and
    ``lam_fixed`` must be given.  ``iota`` and ``lam_var`` accept either a
    scalar variable or its packed column index.
    """
    if (lam_var is None) == (lam_fixed is None):
        raise ValueError("pass exactly one of lam_var and lam_fixed")
    u = np.asarray(ubar, dtype=complex).ravel()
    n = g.n
    if u.size != n:
        raise ValueError("nominal channel length mismatch")

    def bordered(c):
        cu = c @ u
        out = np.empty((n + 1, n + 1), dtype=complex)
        out[:n, :n] = c
        out[:n, n] = cu
        out[n, :n] = cu.conj()
        out[n, n] = np.real(u.conj() @ cu)
        return out

    expr = CMatAffine(n + 1)
    expr.const = bordered(g.const)
    for col, c in g.coeff.items():
        expr.add_coeff(col, bordered(c))

    corner = np.zeros((n + 1, n + 1), dtype=complex)
    corner[n, n] = 1.0
    if lam_var is not None:
        expr.add_coeff(getattr(lam_var, "offset", lam_var), -sigma2 * corner)
    else:
        expr.const = expr.const - lam_fixed * sigma2 * corner

    iota_mat = np.eye(n + 1, dtype=complex)
    iota_mat[n, n] = -(mu**2)
    expr.add_coeff(getattr(iota, "offset", iota), iota_mat)
    return expr.embedded()


def robust_lmi_holds(g_num, ubar, mu, sigma2, lam, iota) -> bool:
    """Numeric check of the certificate at given values (testing aid)."""
    u = np.asarray(ubar, dtype=complex).ravel()
    n = u.size
    m = np.empty((n + 1, n + 1), dtype=complex)
    gu = g_num @ u
    m[:n, :n] = g_num + iota * np.eye(n)
    m[:n, n] = gu
    m[n, :n] = gu.conj()
    m[n, n] = np.real(u.conj() @ gu) - lam * sigma2 - iota * mu**2
    return bool(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] >= -1e-9)


# ---- rate slack bounds ---------------------------------------------------

def rate_tangent(xi0):
    """Supporting tangent of lambda >= 2^xi - 1 at xi0: (slope, intercept)."""
    p = 2.0**xi0
    return p * np.log(2.0), p - 1.0 - p * np.log(2.0) * xi0


def sinr_floor_violation(xi, lam) -> float:
    """How far (xi, lam) falls outside 2^xi - 1 <= lam; <= 0 means satisfied."""
    return (2.0**xi - 1.0) - lam


def xi_cap(lam) -> float:
    """Largest rate slack a given SINR floor supports: log2(1 + lambda)."""
    if lam < 0:
        raise ValueError("SINR floor must be nonnegative")
    return float(np.log2(1.0 + lam))


# ---- duration-rate product minorant --------------------------------------

def product_bound_coeffs(t0, xi0):
    """Concave minorant of t*xi at (t0, xi0).

    Returns (s0, offset) with

        bound(t, xi) = s0 (t + xi) - offset - (t^2 + xi^2) / 2,
        s0 = t0 + xi0,  offset = s0^2 / 2.

    The gap t*xi - bound equals ((t + xi) - s0)^2 / 2: nonnegative
    everywhere, zero at the expansion point.
    """
    s0 = float(t0) + float(xi0)
    return s0, 0.5 * s0 * s0


def product_bound_value(t, xi, t0, xi0) -> float:
    s0, offset = product_bound_coeffs(t0, xi0)
    return s0 * (t + xi) - offset - 0.5 * (t * t + xi * xi)


# ---- Schur lifting of selection products ---------------------------------

def schur_product_lmi(s_var: HermitianVar, f_var: HermitianVar, t_var: HermitianVar,
                      b_offsets, w_fixed, m, n_elems) -> MatExpr:
    """LMI tying a lifted covariance to its selection product.

    Complex block structure (dimension 2 MN + N):

        [[S, F, B W], [F^H, T, B], [W^H B^T, B^T, I_N]] >= 0

    with W fixed, S/F/T Hermitian variables, and the selection entries b
    appearing linearly.  ``b_offsets[n][i]`` is the packed column of
    b_n[i].  Together with the trace cap on S this forces F = B W B^T at
    binary selections.
    """
    mn = m * n_elems
    dim = 2 * mn + n_elems
    w = np.asarray(w_fixed, dtype=complex)
    expr = CMatAffine(dim)

    const = np.zeros((dim, dim), dtype=complex)
    const[2 * mn :, 2 * mn :] = np.eye(n_elems)
    expr.const = const

    for col, basis in s_var.param_bases():
        c = np.zeros((dim, dim), dtype=complex)
        c[:mn, :mn] = basis
        expr.add_coeff(col, c)
    for col, basis in f_var.param_bases():
        c = np.zeros((dim, dim), dtype=complex)
        c[:mn, mn : 2 * mn] = basis
        c[mn : 2 * mn, :mn] = basis.conj().T
        expr.add_coeff(col, c)
    for col, basis in t_var.param_bases():
        c = np.zeros((dim, dim), dtype=complex)
        c[mn : 2 * mn, mn : 2 * mn] = basis
        expr.add_coeff(col, c)
    for n in range(n_elems):
        for i in range(m):
            col = b_offsets[n][i]
            c = np.zeros((dim, dim), dtype=complex)
            row = n * m + i
            # (B W) block and its Hermitian mirror
            c[row, 2 * mn :] = w[n, :]
            c[2 * mn :, row] = w[n, :].conj()
            # B block in the middle band
            c[mn + row, 2 * mn + n] = 1.0
            c[2 * mn + n, mn + row] = 1.0
            expr.add_coeff(col, c)
    return expr.embedded()


def schur_feasible_point(bmat, w):
    """S, F, T values making the product LMI tight at a binary selection."""
    bmat = np.asarray(bmat, dtype=float)
    w = np.asarray(w, dtype=complex)
    f = bmat @ w @ bmat.T
    s = bmat @ w @ w.conj().T @ bmat.T
    t = bmat @ bmat.T
    return s, f, t


# ---- penalties -----------------------------------------------------------

def binary_penalty(var_offsets, expansion) -> LinExpr:
    """Linearized sum of x - x^2 around the expansion point.

    Per entry: x (1 - 2 x0) + x0^2.  Vanishes exactly when both the entry
    and its expansion value are binary and equal.
    """
    expansion = np.asarray(expansion, dtype=float).ravel()
    coeff = {}
    const = 0.0
    for col, x0 in zip(var_offsets, expansion, strict=True):
        coeff[col] = 1.0 - 2.0 * x0
        const += x0 * x0
    return LinExpr(coeff, const)


def binary_penalty_value(x, x0) -> float:
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    return float(np.sum(x * (1.0 - 2.0 * x0) + x0 * x0))


def gram_trace_tangent(w, b0, b_offsets, m, n_elems) -> LinExpr:
    """Tangent minorant of Tr(B A B^T), A = W W^H, at selection B0.

    Returns Tr(B0 A B0^T) + 2 Re Tr(A B0^T (B - B0)) as an affine
    expression in the selection entries; never exceeds the true value.
    """
    w = np.asarray(w, dtype=complex)
    a = w @ w.conj().T
    b0 = np.asarray(b0, dtype=float)
    ab0t = a @ b0.T  # (N, MN)
    base = float(np.real(np.trace(b0 @ a @ b0.T)))
    coeff = {}
    cross0 = 0.0
    for n in range(n_elems):
        for i in range(m):
            c = 2.0 * float(np.real(ab0t[n, n * m + i]))
            if c != 0.0:
                coeff[b_offsets[n][i]] = c
            cross0 += c * b0[n * m + i, n]
    return LinExpr(coeff, base - cross0)


def gram_trace_value(bmat, w) -> float:
    w = np.asarray(w, dtype=complex)
    a = w @ w.conj().T
    return float(np.real(np.trace(bmat @ a @ bmat.T)))

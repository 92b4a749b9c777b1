"""Independent feasibility audits for finished allocation decisions.

Everything here re-derives quantities from raw arrays; nothing reuses the
solver-side expression builders, so these checks catch modeling bugs in
the construction path as well as solver tolerance slips.
"""

from dataclasses import dataclass

import numpy as np

from .channel import sinr
from .decisions import decision_violations, extract_rank_one
from .sensing import beam_gain, beam_mse, empirical_outage
from .transforms import robust_lmi_holds

RATE_SLACK = 1e-6
PATTERN_SLACK = 1e-6
FLOOR_SLACK = 1e-6
FLOOR_BISECT_ITERS = 60
MULTIPLIER_TERNARY_ITERS = 80


def _lmi_certifies(g, u, mu, noise, lam) -> bool:
    """Search the slack multiplier for one floor certificate.

    The bordered matrix is linear in the multiplier, so its smallest
    eigenvalue is concave and a ternary search finds the best choice.
    """
    scale = float(np.linalg.norm(g, 2) * (1.0 + np.vdot(u, u).real)
                  + abs(lam) * noise)
    hi = scale / (mu * mu) + 1.0
    lo = 0.0

    def best_eig(iota):
        n = g.shape[0]
        top = g + iota * np.eye(n)
        gu = g @ u
        corner = np.vdot(u, gu).real - lam * noise - iota * mu * mu
        mat = np.zeros((n + 1, n + 1), dtype=complex)
        mat[:n, :n] = top
        mat[:n, n] = gu
        mat[n, :n] = gu.conj()
        mat[n, n] = corner
        return float(np.linalg.eigvalsh(mat)[0])

    for _ in range(MULTIPLIER_TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if best_eig(m1) < best_eig(m2):
            lo = m1
        else:
            hi = m2
    iota = 0.5 * (lo + hi)
    return robust_lmi_holds(g, u, mu, noise, lam, iota) or best_eig(iota) >= -1e-9


def certified_sinr_floor(w_sig, interference, h_row, mu, noise,
                         iters=FLOOR_BISECT_ITERS) -> float:
    """Largest SINR floor provably held over the whole error ball."""
    h_row = np.asarray(h_row, dtype=complex)
    if mu == 0.0:
        return sinr(h_row, [np.asarray(w_sig)], np.asarray(interference),
                    noise)
    u = h_row.conj()

    def holds(lam):
        g = np.asarray(w_sig) - lam * np.asarray(interference)
        return _lmi_certifies(g, u, mu, noise, lam)

    nominal = sinr(h_row, [np.asarray(w_sig)], np.asarray(interference),
                   noise)
    lo, hi = 0.0, nominal + 1.0
    if not holds(lo):
        return 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def sample_sphere_errors(rng, n, mu, count) -> np.ndarray:
    """Uniform draws from the boundary of the error ball, (count, n)."""
    out = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return mu * out


def _batched_quad(rows, mat) -> np.ndarray:
    """Row-convention quadratic form h M h^H for a batch of rows."""
    return np.einsum("sn,nm,sm->s", rows, mat, rows.conj()).real


def sampled_min_rates(rng, stage, decisions, n_samples) -> np.ndarray:
    """Worst sampled average rate per user with one channel error shared
    by every snapshot, as the error model prescribes."""
    kk = stage.n_users
    t = np.array([d.t for d in decisions])
    out = np.empty(kk)
    for k in range(kk):
        draws = sample_sphere_errors(rng, stage.h_eff.shape[1],
                                     stage.mu[k], n_samples)
        rows = stage.h_eff[k][None, :] + draws
        total = np.zeros(n_samples)
        for q, dec in enumerate(decisions):
            signal = _batched_quad(rows, dec.w[k])
            clutter = _batched_quad(rows, dec.r) + float(stage.noise[k])
            for i in range(kk):
                if i != k:
                    clutter += _batched_quad(rows, dec.w[i])
            total += t[q] * np.log2(1.0 + signal / clutter)
        out[k] = float(total.min()) / stage.t_total
    return out


@dataclass(frozen=True)
class VerificationReport:
    violations: tuple[str, ...]
    certified_floors: np.ndarray
    certified_rates: np.ndarray
    sampled_rates: np.ndarray | None
    pattern_mse: np.ndarray
    bore_gains: np.ndarray
    gain_floors: np.ndarray
    outage: np.ndarray | None
    avg_power: float
    rank_ratios: np.ndarray

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first_violation(self) -> str | None:
        return self.violations[0] if self.violations else None


def verify_solution(stage, decisions, rng=None, rate_samples=0,
                    outage_samples=0) -> VerificationReport:
    """Audit one finished decision set against every constraint family."""
    kk, qq = stage.n_users, stage.n_snapshots
    violations = list(
        decision_violations([d for d in decisions], stage.p_max,
                            stage.t_min, stage.t_max, stage.t_total,
                            tol=1e-6)
    )
    t = np.array([d.t for d in decisions])
    eye = np.eye(stage.h_eff.shape[1])

    floors = np.zeros((kk, qq))
    for q, dec in enumerate(decisions):
        for k in range(kk):
            interference = (
                sum(dec.w[i] for i in range(kk) if i != k) + dec.r
                if kk > 1
                else dec.r
            )
            floors[k, q] = certified_sinr_floor(
                dec.w[k], interference, stage.h_eff[k], stage.mu[k],
                stage.noise[k],
            )
            if floors[k, q] < dec.lam[k] - 1e-6 * max(1.0, dec.lam[k]):
                violations.append(
                    f"snapshot {q}: user {k} floor {dec.lam[k]:.6g} "
                    f"not certified (best {floors[k, q]:.6g})"
                )

    rates = (t[None, :] * np.log2(1.0 + floors)).sum(axis=1) / stage.t_total
    for k in range(kk):
        if rates[k] < stage.rate_min[k] - RATE_SLACK:
            violations.append(
                f"user {k}: certified rate {rates[k]:.6g} below "
                f"{stage.rate_min[k]:.6g}"
            )

    mse = np.zeros(qq)
    gains = np.zeros(qq)
    floors_q = np.zeros(qq)
    for q, dec in enumerate(decisions):
        rx = dec.total_covariance()
        mse[q] = beam_mse(dec.rho0, stage.masks[q], stage.cells, eye, rx)
        if mse[q] > stage.delta_d * (1.0 + PATTERN_SLACK):
            violations.append(
                f"snapshot {q}: pattern error {mse[q]:.6g} above "
                f"{stage.delta_d:.6g}"
            )
        gains[q] = beam_gain(stage.bores[:, q], eye, rx)
        floors_q[q] = stage.gain_floor(q, float(t[q]))
        if gains[q] < floors_q[q] * (1.0 - FLOOR_SLACK):
            violations.append(
                f"snapshot {q}: boresight gain {gains[q]:.6g} below "
                f"floor {floors_q[q]:.6g}"
            )

    sampled = None
    if rate_samples > 0:
        rng = np.random.default_rng(rng) if not isinstance(
            rng, np.random.Generator) else rng
        sampled = sampled_min_rates(rng, stage, decisions, rate_samples)
        for k in range(kk):
            if sampled[k] < stage.rate_min[k] - RATE_SLACK:
                violations.append(
                    f"user {k}: sampled rate {sampled[k]:.6g} below "
                    f"{stage.rate_min[k]:.6g}"
                )

    outage = None
    if outage_samples > 0:
        rng = np.random.default_rng(rng) if not isinstance(
            rng, np.random.Generator) else rng
        outage = np.zeros(qq)
        for q in range(qq):
            outage[q] = empirical_outage(
                rng, outage_samples, stage.omega_av[q], float(t[q]),
                stage.t_total, stage.gamma_th, float(gains[q]),
                stage.sense_noise, stage.psi, stage.ref_gain,
            )

    ratios = np.zeros((qq, kk))
    for q, dec in enumerate(decisions):
        for k in range(kk):
            ratios[q, k] = extract_rank_one(dec.w[k]).ratio

    power = float(
        sum(d.t * d.power for d in decisions) / stage.t_total
    )
    return VerificationReport(
        violations=tuple(violations),
        certified_floors=floors,
        certified_rates=rates,
        sampled_rates=sampled,
        pattern_mse=mse,
        bore_gains=gains,
        gain_floors=floors_q,
        outage=outage,
        avg_power=power,
        rank_ratios=ratios,
    )

"""Per-snapshot decision state and rank-one covariance recovery."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class SnapshotDecision:
    """Transmit design for one scanning snapshot.

    ``w`` holds one covariance per user, ``r`` the sensing covariance,
    ``t`` the dwell time in seconds, ``rho0`` the pattern scale, and the
    per-user arrays the rate slack, SINR floor, and robustness multiplier.
    """

    w: tuple[np.ndarray, ...]
    r: np.ndarray
    t: float
    rho0: float
    xi: np.ndarray
    lam: np.ndarray
    iota: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.w)

    @property
    def power(self) -> float:
        total = float(np.real(np.trace(self.r)))
        for wk in self.w:
            total += float(np.real(np.trace(wk)))
        return total

    def total_covariance(self) -> np.ndarray:
        out = self.r.astype(complex).copy()
        for wk in self.w:
            out += wk
        return out

    def with_durations(self, t, xi, lam, iota) -> "SnapshotDecision":
        return replace(
            self, t=float(t), xi=np.asarray(xi, dtype=float),
            lam=np.asarray(lam, dtype=float), iota=np.asarray(iota, dtype=float),
        )


def average_power(decisions, t_total) -> float:
    """Duration-weighted mean transmit power over the scanning period."""
    if t_total <= 0:
        raise ValueError("scanning period must be positive")
    return sum(d.t * d.power for d in decisions) / t_total


def decision_violations(decisions, p_max, t_min, t_max, t_total,
                        tol=1e-7) -> list[str]:
    """Budget checks: per-snapshot power cap, dwell box, total dwell."""
    out = []
    for q, d in enumerate(decisions):
        if d.power > p_max * (1.0 + tol) + tol:
            out.append(f"snapshot {q}: power {d.power:.6g} exceeds cap {p_max:.6g}")
        if d.t < t_min - tol or d.t > t_max + tol:
            out.append(f"snapshot {q}: duration {d.t:.6g} outside [{t_min}, {t_max}]")
        for name, arr in (("rate slack", d.xi), ("SINR floor", d.lam),
                          ("multiplier", d.iota)):
            if np.any(np.asarray(arr) < -tol):
                out.append(f"snapshot {q}: negative {name}")
    total_t = sum(d.t for d in decisions)
    if total_t > t_total * (1.0 + tol):
        out.append(f"total duration {total_t:.6g} exceeds period {t_total:.6g}")
    return out


@dataclass(frozen=True)
class RankOneExtraction:
    vector: np.ndarray
    ratio: float
    randomized: bool = False
    inflation: float = 1.0

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.vector, self.vector.conj())


def extract_rank_one(w) -> RankOneExtraction:
    """Principal-component beamformer and the dominant-eigenvalue share.

    A ratio near one certifies the relaxation returned an (almost)
    rank-one covariance; callers treat ratio < 0.999 as a fallback signal.
    """
    w = np.asarray(w, dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (w + w.conj().T))
    top = float(max(vals[-1], 0.0))
    trace = float(np.real(np.trace(w)))
    if trace <= 0.0:
        return RankOneExtraction(np.zeros(w.shape[0], dtype=complex), 1.0)
    return RankOneExtraction(np.sqrt(top) * vecs[:, -1], top / trace)


def randomize_rank_one(rng, w, feasible, n_samples=100,
                       max_inflation=1.01) -> RankOneExtraction | None:
    """Gaussian-randomized rank-one recovery under a feasibility callback.

    Draws directions from the covariance, rescales each to a small power
    grid at or above the relaxed trace, and keeps the cheapest candidate
    ``feasible`` accepts.  Returns None when every candidate is rejected.
    """
    w = np.asarray(w, dtype=complex)
    n = w.shape[0]
    trace = float(np.real(np.trace(w)))
    if trace <= 0.0:
        zero = RankOneExtraction(np.zeros(n, dtype=complex), 1.0, randomized=True)
        return zero if feasible(zero.matrix) else None
    # draw from the relaxed covariance so likely directions are favored
    vals, vecs = np.linalg.eigh(0.5 * (w + w.conj().T))
    root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    powers = trace * np.geomspace(1.0, max_inflation, 5)
    best = None
    for _ in range(n_samples):
        z = root @ (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            continue
        d = z / nz
        for p in powers:
            if best is not None and p >= best.inflation * trace:
                break
            vec = np.sqrt(p) * d
            if feasible(np.outer(vec, vec.conj())):
                best = RankOneExtraction(vec, 1.0, randomized=True,
                                         inflation=p / trace)
                break
    return best

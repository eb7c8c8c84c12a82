"""Dit-flip error rejection (D-step) analytics.

One D-step pairs up qudit pairs at random, keeps the first pair of a tetrad
only when both dit-flip labels agree, and adds the two phase labels.  On the
error distribution this is a row-wise cyclic self-convolution followed by
renormalization.  After ``k`` rounds the same map has a closed form in terms
of the ``2**k``-th powers of each row's Fourier coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateDistribution, PrecisionLoss, PreconditionViolation, ZeroRowError
from .gf_algebra import phase
from .pauli_channel import ErrorDistribution, disturbance, is_symmetric

K_MAX = 64
# closed form is rejected once powering amplifies rounding error beyond this
# factor, i.e. more than 6 of ~16 significant digits are gone
MAX_AMPLIFICATION = 1e6
EQ12_TOL = 1e-9
XI_IMAG_TOL = 1e-10


def _fourier_rows(p: np.ndarray) -> np.ndarray:
    """``z[m, l] = sum_j Phi(l*j) p[m, j]``."""
    d = p.shape[0]
    idx = np.arange(d)
    return p @ phase(np.outer(idx, idx), d)


def phase_kernel(d: int) -> np.ndarray:
    """``K[l, n] = Phi(-l*n)``, the inverse transform kernel."""
    idx = np.arange(d)
    return phase(-np.outer(idx, idx), d)


def dstep(dist: ErrorDistribution) -> tuple[ErrorDistribution, float]:
    """Apply one D-step; return the surviving distribution and the keep probability.

    ``keep`` is the probability that a tetrad yields a survivor,
    ``sum_i (row_i sum)**2``.
    """
    p = dist.p
    d = dist.d
    out = np.zeros_like(p)
    for n1 in range(d):
        # out[m, n1 + n2] += p[m, n1] * p[m, n2]
        out += p[:, [n1]] * np.roll(p, n1, axis=1)
    keep = float(np.sum(dist.row_sums() ** 2))
    if keep < 1e-300:
        raise DegenerateDistribution(f"keep probability {keep!r} underflows")
    return ErrorDistribution(d, out / keep), keep


def iterate_dstep(dist: ErrorDistribution, k: int) -> tuple[ErrorDistribution, float]:
    """``k`` successive D-steps; returns the result and the product of keep probabilities."""
    if k < 0:
        raise ValueError("k must be non-negative")
    survival = 1.0
    cur = dist
    for _ in range(k):
        cur, keep = dstep(cur)
        survival *= keep
    return cur, survival


def scaled_power(values, k: int) -> tuple[float, np.ndarray, float]:
    """Raise ``values`` to the power ``2**k`` without over- or underflowing.

    Returns ``(log_scale, w, amplification)`` such that
    ``values**(2**k) == exp(log_scale) * w`` with ``max|w| == 1``.
    ``amplification`` bounds how much rounding error the ``k`` squarings
    multiplied into ``w`` (in units of machine epsilon, relative to the
    largest entry).  Entries that are exactly the scale (value 1 after
    normalization) carry no error.
    """
    z = np.asarray(values, dtype=complex)
    mags = np.abs(z)
    top = float(mags.max()) if z.size else 0.0
    if top == 0.0:
        return -math.inf, np.zeros_like(z), 0.0
    w = z / top
    log_scale = math.log(top)
    exact = w == 1.0
    for _ in range(k):
        w = w * w
        s = float(np.abs(w).max())
        w = w / s
        log_scale = 2.0 * log_scale + math.log(s)
    amplification = float(2.0**k * np.abs(w[~exact]).sum())
    return log_scale, w, amplification


def dstep_closed_form(dist: ErrorDistribution, k: int, k_max: int = K_MAX) -> ErrorDistribution:
    """Distribution after ``k`` D-steps via the ``2**k``-power formula.

    Raises
    ------
    PrecisionLoss
        When the powered Fourier terms lost more than 6 significant digits;
        fall back to :func:`iterate_dstep` in that case.
    """
    if not 0 <= k <= k_max:
        raise ValueError(f"k={k} outside [0, {k_max}]")
    if k == 0:
        return dist
    d = dist.d
    z = _fourier_rows(dist.p)
    _, w, amp = scaled_power(z, k)
    denom = float(np.real(w[:, 0]).sum())
    if amp / denom > MAX_AMPLIFICATION:
        raise PrecisionLoss(f"closed form at k={k} amplifies rounding by {amp / denom:.2e}")
    numer = w @ phase_kernel(d)
    out = np.real(numer) / (d * denom)
    return ErrorDistribution(d, np.clip(out, 0.0, None))


@dataclass(frozen=True)
class AcTable:
    """``A[m, l]`` (row Fourier coefficients over row-0 mass) and ``C[m]`` (row mass ratios)."""

    A: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)


def ac_table(dist: ErrorDistribution) -> AcTable:
    row0 = float(dist.p[0].sum())
    if row0 <= 0.0:
        raise ZeroRowError("row 0 carries no mass")
    A = _fourier_rows(dist.p) / row0
    C = dist.row_sums() / row0
    return AcTable(A, C)


@dataclass(frozen=True, eq=False)
class DerEvolution:
    """A distribution after ``k`` D-steps with the phase-marginal diagnostics.

    ``xi`` and ``chi`` are the raw sums of ``A**(2**k)`` and ``C**(2**k)``;
    they may under- or overflow for large ``k``.  ``survival`` is the
    product of per-round keep probabilities (the fraction of pairs left is
    ``survival / 2**k``).
    """

    base: ErrorDistribution
    k: int
    dist_k: ErrorDistribution
    q: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    chi: float
    survival: float
    xi_imag_residue: float = 0.0

    @property
    def xi_complex(self) -> bool:
        return self.xi_imag_residue > XI_IMAG_TOL

    @property
    def dit_flip_rate(self) -> float:
        return disturbance(self.dist_k)

    @property
    def phase_error_rate(self) -> float:
        return float(1.0 - self.q[0])


def der_diagnostics(dist: ErrorDistribution, k: int) -> DerEvolution:
    """Evolve ``dist`` through ``k`` D-steps and compute q, xi, chi.

    The evolved distribution comes from the iterated map.  ``xi`` and ``chi``
    come from the Fourier-power formula, and the phase marginals
    ``q_n = 1/d + xi_n / (d (1 + chi))`` are checked against the
    iterated result to 1e-9.
    """
    if k < 0 or k > K_MAX:
        raise ValueError(f"k={k} outside [0, {K_MAX}]")
    d = dist.d
    dist_k, survival = iterate_dstep(dist, k)
    q = dist_k.phase_marginals()

    table = ac_table(dist)
    log_scale, w, amp = scaled_power(table.A, k)
    denom = float(np.real(w[:, 0]).sum())
    if amp / denom > MAX_AMPLIFICATION:
        raise PrecisionLoss(f"xi at k={k} amplifies rounding by {amp / denom:.2e}")
    kernel = phase_kernel(d)
    xi_scaled = (w[:, 1:] @ kernel[1:, :]).sum(axis=0)
    chi_scaled = float(np.real(w[1:, 0]).sum())
    q_closed = 1.0 / d + np.real(xi_scaled) / (d * denom)
    gap = float(np.max(np.abs(q_closed - q)))
    if gap > EQ12_TOL:
        raise PrecisionLoss(f"phase marginals disagree by {gap:.2e} at k={k}")

    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        scale = math.exp(log_scale) if log_scale < 709.0 else math.inf
        xi = xi_scaled * scale
        chi = chi_scaled * scale
    if np.all(np.isfinite(xi)):
        # relative to |xi| once xi exceeds 1 (possible when row 0 is not the heaviest)
        residue = float(np.max(np.abs(np.imag(xi))) / max(1.0, float(np.max(np.abs(xi)))))
    else:
        residue = 0.0
    return DerEvolution(
        base=dist,
        k=k,
        dist_k=dist_k,
        q=q,
        xi=np.real(xi),
        chi=float(chi),
        survival=survival,
        xi_imag_residue=residue,
    )


class Observation1Result(NamedTuple):
    holds: bool
    margin: float


def check_observation1(dist: ErrorDistribution, k: int) -> Observation1Result:
    """Check that no phase error is as likely as no phase error after ``k`` rounds.

    Requires the two-basis symmetry and a disturbance below ``(d-1)/(2d)``.
    The margin is ``min_{n != 0} (q_0 - q_n)``.
    """
    d = dist.d
    if not is_symmetric(dist):
        raise PreconditionViolation("distribution does not satisfy the two-basis symmetry")
    D = disturbance(dist)
    if not D < (d - 1) / (2 * d):
        raise PreconditionViolation(f"disturbance {D} not below {(d - 1) / (2 * d)}")
    dist_k, _ = iterate_dstep(dist, k)
    q = dist_k.phase_marginals()
    margin = float(q[0] - q[1:].max())
    return Observation1Result(margin > 0.0, margin)

"""Phase-error-correction bounds and the secret-key sufficiency test.

After ``k`` D-steps the surviving pairs go through one pass of an
``[r, 1, r]`` repetition code decoded by relative majority in the Fourier
basis.  This module bounds the residual phase-error rate (Chernoff-Hoeffding),
the dit-flip rate the code amplifies, picks ``r`` and decides whether the
total error can be pushed below a security parameter ``epsilon``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .der_map import K_MAX, MAX_AMPLIFICATION, phase_kernel, ac_table, der_diagnostics, scaled_power
from .errors import PrecisionLoss, PreconditionViolation
from .pauli_channel import ErrorDistribution, disturbance

# block lengths are capped here instead of overflowing when R_D underflows
R_CAP = 2**62


def f_value(d: int, epsilon: float) -> float:
    """Right-hand side ``(8/eps) ln(2(d-1)/eps)`` of the sufficiency condition."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return 8.0 / epsilon * math.log(2.0 * (d - 1) / epsilon)


def _check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 2:
        raise ValueError("q must be a vector of length d >= 2")
    if abs(q.sum() - 1.0) > 1e-9 or np.any(q < -1e-12):
        raise ValueError(f"q is not a probability vector (sum {q.sum()!r})")
    if not np.all(q[0] > q[1:]):
        raise PreconditionViolation("q_0 must be the strict maximum of q")
    return np.clip(q, 0.0, None)


def _sqrt_gap_sq(q_0, q_n):
    # (sqrt(q_0) - sqrt(q_n))**2 without cancelling the leading digits
    q_0 = np.asarray(q_0, dtype=float)
    q_n = np.clip(np.asarray(q_n, dtype=float), 0.0, None)
    return ((q_0 - q_n) / (np.sqrt(q_0) + np.sqrt(q_n))) ** 2


def _one_minus_power(x, r):
    # (1 - x)**r via log1p so that x below machine epsilon still counts
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.exp(r * np.log1p(-x))


def majority_failure_bound(q, r: int) -> float:
    """Chernoff-Hoeffding bound on the relative-majority failure probability.

    ``sum_{n != 0} [1 - (sqrt(q_0) - sqrt(q_n))**2]**r``, clamped to ``[0, d-1]``.
    Ties in the vote are counted as failures.
    """
    q = _check_q(q)
    if r < 1:
        raise ValueError("r must be at least 1")
    total = float(_one_minus_power(_sqrt_gap_sq(q[0], q[1:]), r).sum())
    return min(max(total, 0.0), float(q.size - 1))


class LooseBound(NamedTuple):
    eq19: float
    exponential: Optional[float]


def loose_failure_bound(
    q_0: float,
    q_max_rest: float,
    d: int,
    r: int,
    xi_gap: Optional[float] = None,
) -> LooseBound:
    """Bound using only the largest nonzero phase rate.

    ``eq19 = (d-1) [1 - (sqrt(q_0) - sqrt(q_max_rest))**2]**r``.  When the
    xi gap ``xi_0 - xi_max`` is supplied the exponential relaxation
    ``(d-1) exp(-r gap**2 / (4d))`` is returned as well.
    """
    if not q_0 > q_max_rest:
        raise PreconditionViolation("q_0 must exceed every other phase rate")
    eq19 = (d - 1) * float(_one_minus_power(_sqrt_gap_sq(q_0, q_max_rest), r))
    expo = None
    if xi_gap is not None:
        expo = (d - 1) * math.exp(-r * xi_gap**2 / (4.0 * d))
    return LooseBound(eq19, expo)


def rd_after_pec(dist_k: ErrorDistribution, r: int) -> float:
    """Upper bound ``r * R_D`` on the dit-flip rate after phase correction."""
    if r < 1:
        raise ValueError("r must be at least 1")
    return min(1.0, r * disturbance(dist_k))


def choose_block_length(source, epsilon: float) -> int:
    """Block length ``ceil(eps / (2 R_D))`` for the repetition code.

    ``source`` is either the distribution after DER or the scalar ``chi``, in
    which case ``R_D = chi / (1 + chi)`` and ``r = ceil(eps/2 (1 + 1/chi))``.
    A channel without dit flips gets ``r = 1``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if isinstance(source, ErrorDistribution):
        rd = disturbance(source)
        if rd <= 0.0:
            return 1
        x = epsilon / (2.0 * rd)
    else:
        chi = float(source)
        if chi <= 0.0:
            return 1
        x = 0.5 * epsilon * (1.0 + 1.0 / chi)
    if not math.isfinite(x) or x >= R_CAP:
        return R_CAP
    # a relative 1e-12 guard keeps exact quotients like 1.0000000000000002 at 1
    return max(1, math.ceil(x * (1.0 - 1e-12)))


class DistillationStatistic(NamedTuple):
    log_value: float
    n_tilde: int
    log_chi: float


def log_distillation_statistic(dist: ErrorDistribution, k: int) -> DistillationStatistic:
    """``ln[(xi_0 - xi_max)**2 / (d chi)]`` after ``k`` rounds, evaluated in log space.

    ``n_tilde`` is the nonzero phase index with the largest ``xi_n``.  Returns
    ``+inf`` when there are no dit flips left and ``-inf`` when the xi gap is
    not positive.
    """
    if not 0 <= k <= K_MAX:
        raise ValueError(f"k={k} outside [0, {K_MAX}]")
    d = dist.d
    table = ac_table(dist)
    kernel = phase_kernel(d)

    log_c, wc, _ = scaled_power(table.C[1:], k)
    chi_sum = float(np.real(wc).sum())
    log_chi = log_c + math.log(chi_sum) if chi_sum > 0.0 else -math.inf

    log_a, wa, amp = scaled_power(table.A[:, 1:], k)
    if math.isinf(log_a):
        return DistillationStatistic(-math.inf, 1, log_chi)
    # gap_n = sum_m sum_{l != 0} (1 - Phi(-l n)) A(m, l)**(2**k)
    col = wa.sum(axis=0)
    gaps = np.real(col.sum() - col @ kernel[1:, 1:])
    n_idx = int(np.argmin(gaps))
    gap = float(gaps[n_idx])
    if gap <= 0.0:
        return DistillationStatistic(-math.inf, n_idx + 1, log_chi)
    if amp / gap > MAX_AMPLIFICATION:
        raise PrecisionLoss(f"xi gap at k={k} amplifies rounding by {amp / gap:.2e}")
    if math.isinf(log_chi):
        return DistillationStatistic(math.inf, n_idx + 1, log_chi)
    value = 2.0 * (log_a + math.log(gap)) - math.log(d) - log_chi
    return DistillationStatistic(value, n_idx + 1, log_chi)


@dataclass(frozen=True)
class PecAssessment:
    """Outcome of planning one PEC pass after ``k`` D-steps."""

    k: int
    r: int
    epsilon: float
    f_value: float
    log_statistic: float
    rp_bound: float
    rp_bound_loose: float
    rd_bound: float
    q_bound: float
    sufficient: bool
    feasible: bool
    pairs_remaining: Optional[int] = None

    @property
    def r_exceeds_pairs(self) -> bool:
        return self.pairs_remaining is not None and self.r > self.pairs_remaining


def security_assessment(
    dist: ErrorDistribution,
    k: int,
    epsilon: float,
    pairs_remaining: Optional[int] = None,
) -> PecAssessment:
    """Decide whether ``k`` rounds of DER plus one PEC pass reach ``Q < epsilon``.

    ``sufficient`` is the analytic condition
    ``(xi_0 - xi_max)**2 / (d chi) > f(d, eps)``.  ``feasible`` additionally
    requires ``r <= pairs_remaining`` when a pair count is given.
    ``q_bound`` is the direct bound ``r R_D + P_fail`` at the chosen ``r``.
    """
    d = dist.d
    f = f_value(d, epsilon)
    evo = der_diagnostics(dist, k)
    stat = log_distillation_statistic(dist, k)
    sufficient = stat.log_value > math.log(f)

    if disturbance(evo.dist_k) == 0.0 and math.isfinite(stat.log_chi):
        # R_D underflowed; it is positive but far below 1/R_CAP
        r = R_CAP
    else:
        r = choose_block_length(evo.dist_k, epsilon)
    q = evo.q
    rest = q[1:]
    if np.all(q[0] > rest):
        rp = majority_failure_bound(q, r)
        rp_loose = min(float(d - 1), loose_failure_bound(q[0], rest.max(), d, r).eq19)
    else:
        rp = rp_loose = float(d - 1)
    rd = rd_after_pec(evo.dist_k, r)
    feasible = sufficient and (pairs_remaining is None or r <= pairs_remaining)
    return PecAssessment(
        k=k,
        r=r,
        epsilon=epsilon,
        f_value=f,
        log_statistic=stat.log_value,
        rp_bound=rp,
        rp_bound_loose=rp_loose,
        rd_bound=rd,
        q_bound=rd + rp,
        sufficient=sufficient,
        feasible=feasible,
        pairs_remaining=pairs_remaining,
    )

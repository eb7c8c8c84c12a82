"""Closed-form analysis for the four-parameter isotropic channel family.

For a channel with constant row 0 (``p00, p01, ..., p01``) and constant
rows ``m != 0`` (``p10, p11, ..., p11``) the D-step map keeps the same shape,
so everything reduces to the four quantities

    a = p00 + (d-1) p01     (row-0 mass)
    b = p00 - p01
    c = p10 + (d-1) p11     (mass of each row m != 0)
    e = p10 - p11

and the tolerable disturbance has a closed form in ``d``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DomainError, NotDistillable, ZeroDenominator
from .pauli_channel import IsotropicParams
from .pec_bounds import f_value

Reading = Literal["p00-p11", "p00-p01"]


def _sums(params: IsotropicParams) -> tuple[float, float, float, float]:
    d = params.d
    a = params.p00 + (d - 1) * params.p01
    b = params.p00 - params.p01
    c = params.p10 + (d - 1) * params.p11
    e = params.p10 - params.p11
    return a, b, c, e


def iso_dstep_closed(params: IsotropicParams, k: int) -> IsotropicParams:
    """The four rates after ``k`` D-steps, from the ``2**k`` power formulas."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return params
    d = params.d
    a, b, c, e = _sums(params)
    top = max(a, c)
    if top <= 0.0:
        raise ZeroDenominator("channel has no mass")
    power = 2.0**k
    a_n, b_n, c_n, e_n = ((x / top) ** power for x in (a, b, c, e))
    pi = a_n + (d - 1) * c_n
    vals = np.array(
        [
            a_n + (d - 1) * b_n,
            a_n - b_n,
            c_n + (d - 1) * e_n,
            c_n - e_n,
        ]
    ) / (d * pi)
    vals = np.clip(vals, 0.0, None)
    total = vals[0] + (d - 1) * (vals[1] + vals[2]) + (d - 1) ** 2 * vals[3]
    vals = vals / total
    return IsotropicParams(d, *(float(v) for v in vals))


@dataclass(frozen=True)
class IsoAbc:
    A0: float
    A1: float
    B1: float
    C1: float


def iso_abc(params: IsotropicParams) -> IsoAbc:
    """Ratios ``A(0) = b/a``, ``A(1) = e/a``, ``C(1) = c/a`` and ``B(1) = e/c``.

    ``B(1)`` is set to 0 when ``p10 = p11 = 0``; it only enters through
    ``A(1) = B(1) C(1)``, which is 0 there anyway.
    """
    a, b, c, e = _sums(params)
    if a <= 0.0:
        raise ZeroDenominator("p00 + (d-1) p01 must be positive")
    if c > 0.0:
        B1 = e / c
    elif e == 0.0:
        B1 = 0.0
    else:
        raise ZeroDenominator("p10 + (d-1) p11 vanishes while p10 != p11")
    return IsoAbc(A0=b / a, A1=e / a, B1=B1, C1=c / a)


def distillable(params: IsotropicParams) -> bool:
    """``(p00 - p01)**2 > [p10 + (d-1) p11] [p00 + (d-1) p01]``, strictly."""
    a, b, c, _ = _sums(params)
    return b * b > c * a


def critical_rounds(params: IsotropicParams, epsilon: float) -> float:
    """Real-valued number of D-steps beyond which the key condition holds.

    ``log2( ln[(d-1) f(d, eps) / d] / ln(A0**2 / C1) )``.  Returns ``+inf``
    when ``A0**2 / C1`` rounds to 1 and ``-inf`` when the condition holds
    for every k (no dit flips, or a trivially small ``f``).
    """
    if not distillable(params):
        raise NotDistillable("A(0)**2 <= C(1): no number of D-steps suffices")
    d = params.d
    abc = iso_abc(params)
    target = math.log((d - 1) * f_value(d, epsilon) / d)
    if abc.C1 == 0.0:
        return -math.inf
    rate = math.log(abc.A0**2) - math.log(abc.C1)
    if rate <= 0.0:
        return math.inf
    if target <= 0.0:
        return -math.inf
    return math.log2(target / rate)


def d_th(d) -> float:
    """Disturbance ``(d-1)/(2d)`` beyond which no entanglement is provable."""
    if d < 2:
        raise ValueError("d must be at least 2")
    return (d - 1) / (2 * d)


def d_2cc(d) -> float:
    """Tolerable disturbance ``2(d-1) / (4d - 1 + sqrt(1 + 4d))`` (worst case p11 = 0)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    return 2 * (d - 1) / (4 * d - 1 + math.sqrt(1 + 4 * d))


def delta_gap(d) -> float:
    """``(d-1)(sqrt(1+4d) - 2) / (2d(4d-3))``, the distance between the two thresholds."""
    if d < 2:
        raise ValueError("d must be at least 2")
    return (d - 1) * (math.sqrt(1 + 4 * d) - 2) / (2 * d * (4 * d - 3))


def d_2cc_asymptotic(d) -> float:
    return 0.5 - 1.0 / (4.0 * math.sqrt(d))


@dataclass(frozen=True)
class ThresholdRow:
    d: int
    d_th: float
    d_2cc: float
    delta: float
    d_2cc_asymptotic: float


CSV_HEADER = ("d", "D_th", "D_2CC", "delta", "D_2CC_asymptotic")


def threshold_table(d_values: Iterable[int]) -> list[ThresholdRow]:
    rows = []
    for d in d_values:
        d = int(d)
        rows.append(ThresholdRow(d, d_th(d), d_2cc(d), delta_gap(d), d_2cc_asymptotic(d)))
    return rows


def rows_to_csv(rows: Sequence[ThresholdRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([row.d] + [repr(v) for v in (row.d_th, row.d_2cc, row.delta, row.d_2cc_asymptotic)])
    return buf.getvalue()


def rows_to_records(rows: Sequence[ThresholdRow]) -> list[dict]:
    return [dict(zip(CSV_HEADER, asdict(row).values())) for row in rows]


def rows_to_json(rows: Sequence[ThresholdRow]) -> str:
    return json.dumps(rows_to_records(rows), indent=2)


# -- characteristic exponent ---------------------------------------------

@dataclass(frozen=True)
class CharacteristicExponent:
    """Exponent ``r`` with ``R_D / (q_0 - 1/d)**r -> alpha``.

    ``alpha_estimate`` is the ratio at the last probe round; ``converged``
    means the ratio moved by less than 5% over the last three probes.
    """

    r_ch: float
    alpha_estimate: float
    converged: bool
    reading: str
    alpha_trace: tuple[float, ...] = ()


def characteristic_exponent_value(params: IsotropicParams, reading: Reading = "p00-p11") -> float:
    """``ln[a/c] / ln[a/den]`` with ``den = p00 - p11`` (as printed) or ``|p00 - p01|``.

    The second reading is the one for which ``R_D / (q_0 - 1/d)**r`` has a
    finite nonzero limit: ``q_0 - 1/d`` decays like ``A(0)**(2**k)`` and
    ``A(0)`` may be negative.
    """
    a, b, c, _ = _sums(params)
    if reading == "p00-p11":
        den = params.p00 - params.p11
    elif reading == "p00-p01":
        den = abs(b)
    else:
        raise ValueError(f"unknown reading {reading!r}")
    if a <= 0.0 or c <= 0.0 or den <= 0.0:
        raise DomainError(f"nonpositive logarithm argument (a={a}, c={c}, den={den})")
    lower = math.log(a / den)
    if lower == 0.0:
        raise DomainError("denominator logarithm vanishes")
    return math.log(a / c) / lower


def log_rates(params: IsotropicParams, k: int) -> tuple[float, float]:
    """``(ln R_D^(k), ln(q_0^(k) - 1/d))`` evaluated without forming the powers.

    Requires ``k >= 1`` so that every ``2**k`` power is non-negative.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    d = params.d
    abc = iso_abc(params)
    a, _, c, _ = _sums(params)
    n = 2.0**k
    with np.errstate(divide="ignore"):
        ln_a = math.log(a)
        ln_c = math.log(c) if c > 0 else -math.inf
        ln_pi = np.logaddexp(n * ln_a, math.log(d - 1) + n * ln_c)
        log_rd = math.log(d - 1) + n * ln_c - ln_pi
        ln_a0 = n * math.log(abs(abc.A0)) if abc.A0 != 0 else -math.inf
        ln_a1 = math.log(d - 1) + n * math.log(abs(abc.A1)) if abc.A1 != 0 else -math.inf
        ln_c1 = math.log(d - 1) + n * math.log(abc.C1) if abc.C1 > 0 else -math.inf
        log_q = math.log((d - 1) / d) + np.logaddexp(ln_a0, ln_a1) - np.logaddexp(0.0, ln_c1)
    return float(log_rd), float(log_q)


def characteristic_exponent(
    params: IsotropicParams,
    k_probe: Sequence[int] = (6, 8, 10),
    reading: Reading = "p00-p11",
) -> CharacteristicExponent:
    r_ch = characteristic_exponent_value(params, reading)
    trace = []
    for k in k_probe:
        log_rd, log_q = log_rates(params, k)
        log_alpha = log_rd - r_ch * log_q
        trace.append(math.exp(log_alpha) if log_alpha < 709.0 else math.inf)
    tail = trace[-3:]
    converged = (
        len(tail) == 3
        and all(math.isfinite(x) and x > 0.0 for x in tail)
        and max(tail) / min(tail) - 1.0 < 0.05
    )
    return CharacteristicExponent(r_ch, trace[-1], converged, reading, tuple(trace))

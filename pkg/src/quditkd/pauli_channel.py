"""Pauli-channel error distributions over a prime field.

``p[m, n]`` is the rate of the error ``E_mn``; the row index ``m`` is the
dit flip and the column index ``n`` the phase error.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InfeasibleParameters,
    NegativeRateError,
    NormalizationError,
    SymmetryViolation,
)
from .gf_algebra import prime_dim

NORMALIZATION_TOL = 1e-9
SYMMETRY_TOL = 1e-12
_NEGATIVE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ErrorDistribution:
    """Validated d x d matrix of Pauli error rates (read-only)."""

    d: int
    p: np.ndarray = field(repr=False)
    symmetric: bool = False

    def __post_init__(self):
        arr = np.array(self.p, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    def row_sums(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def phase_marginals(self) -> np.ndarray:
        return self.p.sum(axis=0)

    def allclose(self, other: "ErrorDistribution", atol: float = 1e-12) -> bool:
        return self.d == other.d and bool(np.allclose(self.p, other.p, rtol=0, atol=atol))

    def to_dict(self) -> dict:
        return {"d": self.d, "p": self.p.tolist()}


@dataclass(frozen=True)
class IsotropicParams:
    """The (p00, p01, p10, p11) family: constant rows off column 0.

    With ``p01 == p10`` this is the isotropic channel; ``p01 != p10`` is the
    slightly wider class used for the closed-form threshold analysis.
    """

    d: int
    p00: float
    p01: float
    p10: float
    p11: float

    def __post_init__(self):
        prime_dim(self.d)
        for name in ("p00", "p01", "p10", "p11"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = (self.p00, self.p01, self.p10, self.p11)
        if any(v < -_NEGATIVE_TOL or v > 1 + _NEGATIVE_TOL for v in vals):
            raise InfeasibleParameters(f"isotropic parameters outside [0, 1]: {vals}")
        total = self.p00 + (self.d - 1) * (self.p01 + self.p10) + (self.d - 1) ** 2 * self.p11
        if abs(total - 1.0) > 1e-12:
            raise NormalizationError(f"isotropic parameters sum to {total!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p00, self.p01, self.p10, self.p11)

    def disturbance(self) -> float:
        d = self.d
        return (d - 1) * self.p10 + (d - 1) ** 2 * self.p11


def symmetry_orbits(d: int) -> list[tuple[tuple[int, int], ...]]:
    """Orbits of the index map ``(m, n) -> (n, -m)`` generating the two-basis symmetry.

    Applying the map repeatedly gives ``(n, d-m)``, ``(d-m, d-n)``, ``(d-n, m)``,
    i.e. every equality chain of the symmetry constraint.
    """
    seen = set()
    orbits = []
    for m in range(d):
        for n in range(d):
            if (m, n) in seen:
                continue
            orbit = []
            cur = (m, n)
            while cur not in orbit:
                orbit.append(cur)
                cur = (cur[1], (-cur[0]) % d)
            seen.update(orbit)
            orbits.append(tuple(orbit))
    return orbits


def symmetry_deviation(p: np.ndarray) -> tuple[tuple[tuple[int, int], ...], float]:
    """Worst orbit and its spread ``max - min``."""
    d = p.shape[0]
    worst, dev = (), 0.0
    for orbit in symmetry_orbits(d):
        vals = [p[idx] for idx in orbit]
        spread = max(vals) - min(vals)
        if spread > dev or not worst:
            worst, dev = orbit, spread
    return worst, float(dev)


def is_symmetric(dist_or_p, tol: float = SYMMETRY_TOL) -> bool:
    p = dist_or_p.p if isinstance(dist_or_p, ErrorDistribution) else np.asarray(dist_or_p)
    return symmetry_deviation(p)[1] <= tol


def make_distribution(d: int, matrix, require_symmetry: bool = False) -> ErrorDistribution:
    """Validate a rate matrix and wrap it as an :class:`ErrorDistribution`.

    The matrix is renormalized to unit mass once it is within 1e-9 of 1;
    entries down to -1e-12 are treated as rounding noise and clipped to 0.

    Raises
    ------
    NormalizationError, NegativeRateError, SymmetryViolation
    """
    d = prime_dim(d)
    p = np.array(matrix, dtype=float)
    if p.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("rates must be finite")
    if np.any(p < -_NEGATIVE_TOL):
        m, n = np.unravel_index(np.argmin(p), p.shape)
        raise NegativeRateError(f"negative rate p[{m},{n}] = {p[m, n]!r}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NormalizationError(f"rates sum to {total!r}, not 1")
    p = p / total
    symmetric = False
    orbit, dev = symmetry_deviation(p)
    if dev <= SYMMETRY_TOL:
        symmetric = True
    elif require_symmetry:
        raise SymmetryViolation(orbit, dev)
    return ErrorDistribution(d, p, symmetric)


def symmetrize(dist: ErrorDistribution) -> ErrorDistribution:
    """Project onto the symmetric class by averaging every orbit."""
    d = dist.d
    out = np.empty_like(dist.p)
    for orbit in symmetry_orbits(d):
        rows, cols = zip(*orbit)
        out[rows, cols] = dist.p[rows, cols].mean()
    return ErrorDistribution(d, out, True)


def perfect_channel(d: int) -> ErrorDistribution:
    d = prime_dim(d)
    p = np.zeros((d, d))
    p[0, 0] = 1.0
    return ErrorDistribution(d, p, True)


def disturbance(dist: ErrorDistribution) -> float:
    """Error rate seen in the verification test: total mass on rows m != 0."""
    return float(dist.p[1:, :].sum())


def phase_disturbance(dist: ErrorDistribution) -> float:
    """The same quantity measured on phase indices (columns n != 0)."""
    return float(dist.p[:, 1:].sum())


def channel_error_rate(dist: ErrorDistribution) -> float:
    """Overall error rate ``Q = 1 - p00``."""
    return float(1.0 - dist.p[0, 0])


def from_isotropic(params: IsotropicParams) -> ErrorDistribution:
    d = params.d
    p = np.full((d, d), params.p11, dtype=float)
    p[0, :] = params.p01
    p[1:, 0] = params.p10
    p[0, 0] = params.p00
    return make_distribution(d, p)


def to_isotropic(dist: ErrorDistribution, tol: float = 1e-12) -> IsotropicParams:
    """Extract (p00, p01, p10, p11); raises ValueError if the shape does not match."""
    d, p = dist.d, dist.p
    p01 = p[0, 1] if d > 1 else 0.0
    p10 = p[1, 0]
    p11 = p[1, 1]
    ok = (
        np.allclose(p[0, 1:], p01, rtol=0, atol=tol)
        and np.allclose(p[1:, 0], p10, rtol=0, atol=tol)
        and np.allclose(p[1:, 1:], p11, rtol=0, atol=tol)
    )
    if not ok:
        raise ValueError("distribution is not of the four-parameter isotropic form")
    return IsotropicParams(d, float(p[0, 0]), float(p01), float(p10), float(p11))


def isotropic_from_disturbance(d: int, D: float, p11: float = 0.0) -> IsotropicParams:
    """Isotropic channel (p01 = p10) with disturbance ``D`` and given ``p11``."""
    d = prime_dim(d)
    if not (0.0 <= D < (d - 1) / d):
        raise InfeasibleParameters(f"disturbance {D} outside [0, {(d - 1) / d})")
    p00 = 1.0 - 2.0 * D + (d - 1) ** 2 * p11
    p01 = (D - (d - 1) ** 2 * p11) / (d - 1)
    vals = (p00, p01, p01, p11)
    if any(v < -_NEGATIVE_TOL or v > 1 + _NEGATIVE_TOL for v in vals):
        raise InfeasibleParameters(f"D={D}, p11={p11} gives rates {vals}")
    p00, p01, _, p11 = (min(max(v, 0.0), 1.0) for v in vals)
    return IsotropicParams(d, p00, p01, p01, p11)


def from_depolarizing(d: int, Q: float) -> ErrorDistribution:
    """Depolarizing channel: every nontrivial error with rate ``Q / (d**2 - 1)``."""
    d = prime_dim(d)
    q_max = (d * d - 1) / (d * d)
    if not (0.0 <= Q <= q_max + 1e-15):
        raise InfeasibleParameters(f"Q={Q} outside [0, {q_max}]")
    p = np.full((d, d), Q / (d * d - 1))
    p[0, 0] = 1.0 - Q
    return make_distribution(d, p)


# -- file formats ---------------------------------------------------------

def distribution_to_json(dist: ErrorDistribution) -> str:
    return json.dumps(dist.to_dict())


def distribution_to_csv(dist: ErrorDistribution) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "n", "p"])
    for m in range(dist.d):
        for n in range(dist.d):
            writer.writerow([m, n, repr(float(dist.p[m, n]))])
    return buf.getvalue()


def parse_distribution(text: str, fmt: str = "json", require_symmetry: bool = False):
    """Parse the JSON ``{"d", "p"}`` object or the ``m,n,p`` CSV table."""
    if fmt == "json":
        obj = json.loads(text)
        return make_distribution(obj["d"], obj["p"], require_symmetry)
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"m", "n", "p"}:
            raise ValueError("CSV distribution needs header m,n,p")
        entries = [(int(r["m"]), int(r["n"]), float(r["p"])) for r in rows]
        d = max(max(m, n) for m, n, _ in entries) + 1
        p = np.zeros((d, d))
        seen = set()
        for m, n, v in entries:
            if (m, n) in seen:
                raise ValueError(f"duplicate entry ({m}, {n})")
            seen.add((m, n))
            p[m, n] = v
        return make_distribution(d, p, require_symmetry)
    raise ValueError(f"unknown format {fmt!r}")


def read_distribution(path, require_symmetry: bool = False) -> ErrorDistribution:
    path = Path(path)
    fmt = "csv" if path.suffix.lower() == ".csv" else "json"
    return parse_distribution(path.read_text(), fmt, require_symmetry)

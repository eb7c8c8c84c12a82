"""Built-in consistency checks: gate identities and D-step oracles."""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .der_map import dstep, dstep_closed_form, iterate_dstep
from .errors import PrecisionLoss
from .gf_algebra import identity_residual
from .pauli_channel import ErrorDistribution, make_distribution

IDENTITY_TOL = 1e-10
ORACLE_TOL = 1e-14
MAP_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def brute_force_dstep(p: np.ndarray) -> np.ndarray:
    """D-step by enumerating all ``d**4`` label pairs ``((m1, n1), (m2, n2))``."""
    d = p.shape[0]
    out = np.zeros_like(p, dtype=float)
    kept = 0.0
    for m1, n1, m2, n2 in itertools.product(range(d), repeat=4):
        if m1 != m2:
            continue
        w = p[m1, n1] * p[m2, n2]
        out[m1, (n1 + n2) % d] += w
        kept += w
    return out / kept


def random_distribution(d: int, rng: np.random.Generator) -> ErrorDistribution:
    alpha = rng.choice([0.3, 1.0, 3.0])
    return make_distribution(d, rng.dirichlet(np.full(d * d, alpha)).reshape(d, d))


def _identity_check(dims, blocks) -> tuple[bool, str]:
    worst = 0.0
    for d in dims:
        for m in range(d):
            for n in range(d):
                worst = max(worst, identity_residual("fourier_conjugation", (m, n), d))
    for d, r in blocks:
        worst = max(worst, identity_residual("pec_circuit_equivalence", r, d))
    return worst < IDENTITY_TOL, f"max residual {worst:.2e}"


def _oracle_check(dims, count: int, seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d in dims:
        for _ in range(count):
            dist = random_distribution(d, rng)
            worst = max(worst, float(np.max(np.abs(dstep(dist)[0].p - brute_force_dstep(dist.p)))))
    return worst < ORACLE_TOL, f"max |delta| {worst:.2e}"


def _closed_form_check(dims, count: int, k_max: int, seed: int) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d in dims:
        for _ in range(count):
            dist = random_distribution(d, rng)
            for k in range(k_max + 1):
                try:
                    closed = dstep_closed_form(dist, k)
                except PrecisionLoss as exc:
                    return False, f"d={d} k={k}: {exc}"
                iterated, _ = iterate_dstep(dist, k)
                worst = max(worst, float(np.max(np.abs(closed.p - iterated.p))))
    return worst < MAP_TOL, f"max |delta| {worst:.2e}"


def checks(level: Literal["fast", "full"] = "fast") -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
    if level == "fast":
        return [
            ("gate identities d<=5", lambda: _identity_check((2, 3, 5), ((2, 2), (2, 3), (3, 2)))),
            ("dstep brute-force oracle", lambda: _oracle_check((2, 3), 10, 1)),
            ("closed form vs iteration", lambda: _closed_form_check((2, 3, 5), 10, 5, 2)),
        ]
    if level == "full":
        return [
            (
                "gate identities d<=7",
                lambda: _identity_check((2, 3, 5, 7), ((2, 2), (2, 3), (3, 2), (2, 8), (3, 5), (5, 3), (7, 2))),
            ),
            ("dstep brute-force oracle", lambda: _oracle_check((2, 3, 5), 50, 1)),
            ("closed form vs iteration", lambda: _closed_form_check((2, 3, 5), 200, 5, 2)),
        ]
    raise ValueError(f"unknown level {level!r}")


def run_selftest(level: Literal["fast", "full"] = "fast") -> list[CheckResult]:
    results = []
    for name, fn in checks(level):
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crash of the runner
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  time    detail"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name:<{width}}  {status:<6}  {r.seconds:6.2f}  {r.detail}")
    return "\n".join(lines)

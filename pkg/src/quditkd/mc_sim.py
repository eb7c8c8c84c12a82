"""Seeded Monte Carlo simulation of the classical prepare-and-measure protocol.

Each qudit pair carries public dits ``(alice, bob)`` and hidden Pauli labels
``(m, n)`` with ``bob = alice + m (mod d)``.  The protocol logic (verification,
DER parity checks, PEC parities, every stop/abort decision) only ever sees the
public dits; the hidden labels ride along for bookkeeping.

Random streams
--------------
All randomness comes from ``numpy.random.Philox`` (a counter-based generator)
seeded through ``numpy.random.SeedSequence(seed, spawn_key=key)``.  The key is
a tuple of small integers:

====================  ==============================
stage                 spawn key
====================  ==============================
sampling, chunk ``i``  ``(0, i)``
verification           ``(1,)``
DER round ``j``        ``(2, j)``
PEC partition          ``(3,)``
====================  ==============================

Sampling is split into fixed chunks of ``CHUNK`` pairs, each with its own
stream, so the result does not depend on how many worker threads
(``QUDITKD_THREADS``) process the chunks.
"""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .der_map import iterate_dstep
from .errors import InsufficientPairs
from .isotropic import d_th
from .pauli_channel import (
    ErrorDistribution,
    disturbance,
    from_isotropic,
    isotropic_from_disturbance,
    make_distribution,
)
from .pec_bounds import majority_failure_bound, security_assessment

CHUNK = 1 << 16
RNG_NAME = "numpy.random.Philox"
STAGE_SAMPLE, STAGE_VERIFY, STAGE_DER, STAGE_PEC = 0, 1, 2, 3

Accounting = Literal["all_r", "targets_only"]


def worker_count() -> int:
    raw = os.environ.get("QUDITKD_THREADS", "")
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError("QUDITKD_THREADS must be at least 1")
    return n


@dataclass(frozen=True)
class RngStream:
    """A named position in the stream tree below a master seed."""

    seed: int
    key: tuple[int, ...] = ()

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(i) for i in index))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


# -- pair storage -----------------------------------------------------------

@dataclass(frozen=True)
class PairRecord:
    alice_dit: int
    bob_dit: int
    m: int
    n: int


@dataclass(frozen=True)
class PublicView:
    """What Alice and Bob can see: their dits and nothing else."""

    d: int
    alice: np.ndarray
    bob: np.ndarray

    def __len__(self) -> int:
        return self.alice.size


@dataclass(frozen=True, eq=False)
class PairEnsemble:
    """Column storage for a list of :class:`PairRecord`."""

    d: int
    alice: np.ndarray
    bob: np.ndarray
    m: np.ndarray
    n: np.ndarray

    def __len__(self) -> int:
        return self.alice.size

    def record(self, i: int) -> PairRecord:
        return PairRecord(int(self.alice[i]), int(self.bob[i]), int(self.m[i]), int(self.n[i]))

    def public(self) -> PublicView:
        return PublicView(self.d, self.alice, self.bob)

    def take(self, idx) -> "PairEnsemble":
        return PairEnsemble(self.d, self.alice[idx], self.bob[idx], self.m[idx], self.n[idx])

    def consistent(self) -> bool:
        return bool(np.all((self.bob - self.alice) % self.d == self.m))

    def label_distribution(self) -> np.ndarray:
        """Empirical frequency matrix of the hidden ``(m, n)`` labels."""
        counts = np.bincount(self.m * self.d + self.n, minlength=self.d * self.d)
        return counts.reshape(self.d, self.d) / max(len(self), 1)

    def dit_flip_rate(self) -> float:
        return float(np.mean(self.m != 0)) if len(self) else 0.0

    def phase_error_rate(self) -> float:
        return float(np.mean(self.n != 0)) if len(self) else 0.0


def _concat(parts: list[PairEnsemble], d: int) -> PairEnsemble:
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return PairEnsemble(d, empty, empty, empty, empty)
    return PairEnsemble(
        d,
        *(np.concatenate([getattr(p, name) for p in parts]) for name in ("alice", "bob", "m", "n")),
    )


# -- protocol stages ---------------------------------------------------------

def _sample_chunk(flat: np.ndarray, d: int, size: int, stream: RngStream) -> PairEnsemble:
    rng = stream.generator()
    alice = rng.integers(0, d, size=size, dtype=np.int64)
    labels = rng.choice(d * d, size=size, p=flat)
    m, n = np.divmod(labels.astype(np.int64), d)
    return PairEnsemble(d, alice, (alice + m) % d, m, n)


def sample_ensemble(dist: ErrorDistribution, n: int, stream: RngStream, threads: Optional[int] = None) -> PairEnsemble:
    """Draw ``n`` pairs: uniform Alice dits and iid labels from ``dist``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    d = dist.d
    flat = np.clip(dist.p.ravel(), 0.0, None)
    flat = flat / flat.sum()
    sizes = [min(CHUNK, n - start) for start in range(0, n, CHUNK)]
    jobs = [(flat, d, size, stream.child(i)) for i, size in enumerate(sizes)]
    threads = worker_count() if threads is None else threads
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: _sample_chunk(*job), jobs))
    else:
        parts = [_sample_chunk(*job) for job in jobs]
    return _concat(parts, d)


def verification_size(n_pairs: int, fraction: float) -> int:
    return max(1, int(round(fraction * n_pairs)))


def verification_test(
    ensemble: PairEnsemble,
    fraction: float,
    threshold: float,
    stream: RngStream,
) -> tuple[float, bool, PairEnsemble]:
    """Sacrifice a random subsample to estimate the disturbance.

    Returns ``(d_estimated, abort, remaining)``; ``abort`` is true when the
    estimate reaches ``threshold``.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    view = ensemble.public()
    size = len(view)
    k = min(verification_size(size, fraction), size - 1)
    perm = stream.generator().permutation(size)
    tested, kept = perm[:k], np.sort(perm[k:])
    d_est = float(np.mean(view.alice[tested] != view.bob[tested]))
    return d_est, d_est >= threshold, ensemble.take(kept)


def der_keep_mask(view: PublicView, stream: RngStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pair up positions at random and compare parities.

    Returns ``(controls, targets, leftover)`` index arrays, where ``controls``
    and ``targets`` are restricted to the tetrads that passed.
    """
    size = len(view)
    perm = stream.generator().permutation(size)
    half = size // 2
    first, second = perm[0 : 2 * half : 2], perm[1 : 2 * half : 2]
    leftover = perm[2 * half :]
    d = view.d
    ok = (view.alice[first] - view.alice[second]) % d == (view.bob[first] - view.bob[second]) % d
    return first[ok], second[ok], leftover


def der_round(ensemble: PairEnsemble, stream: RngStream) -> PairEnsemble:
    """One DER round: survivors carry ``(m1, n1 + n2)``; an odd leftover passes through."""
    if len(ensemble) < 2:
        raise InsufficientPairs("a DER round needs at least 2 pairs")
    first, second, leftover = der_keep_mask(ensemble.public(), stream)
    d = ensemble.d
    survivors = PairEnsemble(
        d,
        ensemble.alice[first],
        ensemble.bob[first],
        ensemble.m[first],
        (ensemble.n[first] + ensemble.n[second]) % d,
    )
    return _concat([survivors, ensemble.take(leftover)], d)


def plurality_shift(diffs: np.ndarray, d: int) -> np.ndarray:
    """Row-wise plurality value of ``diffs``; rows with a tied maximum give 0."""
    blocks = diffs.shape[0]
    if diffs.shape[1] == 0:
        return np.zeros(blocks, dtype=np.int64)
    counts = np.stack([(diffs == v).sum(axis=1) for v in range(d)], axis=1)
    top = counts.max(axis=1)
    tied = (counts == top[:, None]).sum(axis=1) > 1
    return np.where(tied, 0, counts.argmax(axis=1)).astype(np.int64)


def block_tallies(n_blocks: np.ndarray, d: int, accounting: Accounting = "all_r") -> np.ndarray:
    """``eta[b, j]``: how many labels in block ``b`` equal ``j``."""
    if accounting == "all_r":
        labels = n_blocks
    elif accounting == "targets_only":
        labels = n_blocks[:, 1:]
    else:
        raise ValueError(f"unknown accounting {accounting!r}")
    return np.stack([(labels == j).sum(axis=1) for j in range(d)], axis=1)


def majority_failures(eta: np.ndarray) -> np.ndarray:
    """Blocks where ``eta_0`` is not the strict maximum (ties count as failures)."""
    if eta.shape[1] < 2:
        return np.zeros(eta.shape[0], dtype=bool)
    return eta[:, 0] <= eta[:, 1:].max(axis=1)


@dataclass(frozen=True, eq=False)
class PecResult:
    key: PairEnsemble
    tallies: np.ndarray = field(repr=False)
    accounting: str = "all_r"

    @property
    def majority_failure_frequency(self) -> float:
        if self.tallies.shape[0] == 0:
            return 0.0
        return float(np.mean(majority_failures(self.tallies)))


def pec_blocks(
    ensemble: PairEnsemble,
    r: int,
    accounting: Accounting = "all_r",
    stream: Optional[RngStream] = None,
    shuffle: bool = True,
) -> PecResult:
    """Replace random blocks of ``r`` pairs by their parities.

    The key dits are the block sums; the surviving dit-flip label is the sum of
    the ``m`` labels.  The control phase ``n_1`` is corrected by the plurality
    ``s`` of ``n_1 - n_i`` over the targets (``s = 0`` on ties), which leaves
    ``n_1 - s``.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    if len(ensemble) < r:
        raise InsufficientPairs(f"{len(ensemble)} pairs cannot fill a block of {r}")
    d = ensemble.d
    size = len(ensemble)
    if shuffle:
        if stream is None:
            raise ValueError("a random stream is required to partition the pairs")
        order = stream.generator().permutation(size)
    else:
        order = np.arange(size)
    n_blocks = size // r
    idx = order[: n_blocks * r].reshape(n_blocks, r)
    alice = ensemble.alice[idx].sum(axis=1) % d
    bob = ensemble.bob[idx].sum(axis=1) % d
    m = ensemble.m[idx].sum(axis=1) % d
    phases = ensemble.n[idx]
    control = phases[:, 0]
    s = plurality_shift((control[:, None] - phases[:, 1:]) % d, d)
    key = PairEnsemble(d, alice, bob, m, (control - s) % d)
    return PecResult(key, block_tallies(phases, d, accounting), accounting)


# -- orchestration -----------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Inputs of one protocol run.

    ``threshold`` defaults to ``(d-1)/(2d)``.  ``plan_from`` chooses the model
    the round count and block length are planned on: ``estimate`` uses the
    worst-case isotropic channel (``p11 = 0``) at the estimated disturbance,
    which is all the parties actually know; ``channel`` uses the true ``dist``.
    """

    d: int
    dist: ErrorDistribution
    n_pairs: int
    epsilon: float = 0.05
    verification_fraction: float = 0.1
    max_der_rounds: int = 30
    seed: int = 0
    eta_accounting: Accounting = "all_r"
    threshold: Optional[float] = None
    plan_from: Literal["estimate", "channel"] = "estimate"

    def __post_init__(self):
        if self.dist.d != self.d:
            raise ValueError(f"distribution has d={self.dist.d}, config says d={self.d}")
        if self.n_pairs < 4:
            raise ValueError("n_pairs must be at least 4")
        if not 0.0 < self.verification_fraction < 1.0:
            raise ValueError("verification_fraction must lie in (0, 1)")
        if self.n_pairs - verification_size(self.n_pairs, self.verification_fraction) < 2:
            raise ValueError("verification_fraction leaves fewer than 2 pairs")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 <= self.max_der_rounds <= 64:
            raise ValueError("max_der_rounds must lie in [0, 64]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.eta_accounting not in ("all_r", "targets_only"):
            raise ValueError(f"unknown eta accounting {self.eta_accounting!r}")
        if self.plan_from not in ("estimate", "channel"):
            raise ValueError(f"unknown plan_from {self.plan_from!r}")

    @property
    def resolved_threshold(self) -> float:
        return d_th(self.d) if self.threshold is None else float(self.threshold)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "dist": self.dist.p.tolist(),
            "n_pairs": self.n_pairs,
            "epsilon": self.epsilon,
            "verification_fraction": self.verification_fraction,
            "max_der_rounds": self.max_der_rounds,
            "seed": self.seed,
            "eta_accounting": self.eta_accounting,
            "threshold": self.resolved_threshold,
            "plan_from": self.plan_from,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SimConfig":
        obj = dict(obj)
        d = int(obj.pop("d"))
        dist = make_distribution(d, obj.pop("dist"))
        return cls(d=d, dist=dist, **obj)


ABORT_VERIFICATION = "VerificationFailed"
ABORT_NEVER_FEASIBLE = "NeverFeasible"
ABORT_PAIRS_FOR_R = "InsufficientPairsForR"


@dataclass
class SimReport:
    d_estimated: float = float("nan")
    aborted: bool = False
    abort_reason: Optional[str] = None
    rounds_run: int = 0
    r_used: Optional[int] = None
    pairs_surviving: list = field(default_factory=list)
    empirical_dist: list = field(default_factory=list)
    final_key_length: int = 0
    final_mismatch_rate: Optional[float] = None
    final_phase_error_rate: Optional[float] = None
    final_total_error_rate: Optional[float] = None
    majority_failure_frequency: Optional[float] = None
    majority_failure_bound: Optional[float] = None
    planned_q_bound: Optional[float] = None
    bound_comparisons: list = field(default_factory=list)
    key_digest: Optional[str] = None
    transcript: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "transcript"}
        return out

    def transcript_text(self) -> str:
        lines = ["round,stage,pairs_in,pairs_out,empirical_RD,empirical_RP"]
        lines += [",".join(str(x) for x in row) for row in self.transcript]
        return "\n".join(lines) + "\n"


def _key_digest(key: PairEnsemble) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(key.alice, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(key.bob, dtype="<i8").tobytes())
    return h.hexdigest()


def _compare(label: str, k: int, analytic: ErrorDistribution, ens: PairEnsemble) -> dict:
    emp = ens.label_distribution()
    return {
        "round": k,
        "stage": label,
        "analytic_RD": disturbance(analytic),
        "empirical_RD": ens.dit_flip_rate(),
        "analytic_RP": float(1.0 - analytic.phase_marginals()[0]),
        "empirical_RP": ens.phase_error_rate(),
        "max_abs_delta": float(np.max(np.abs(emp - analytic.p))),
    }


def planning_distribution(config: SimConfig, d_estimated: float) -> ErrorDistribution:
    if config.plan_from == "channel":
        return config.dist
    d = config.d
    # the estimate is strictly below the threshold here, so below (d-1)/d
    return from_isotropic(isotropic_from_disturbance(d, d_estimated, 0.0))


def execute_protocol(config: SimConfig, ensemble: PairEnsemble, master: RngStream) -> SimReport:
    """Run verification, DER and PEC on a pre-sampled ensemble."""
    report = SimReport()
    d = config.d
    report.pairs_surviving.append({"stage": "sample", "pairs": len(ensemble)})
    report.transcript.append(
        (0, "sample", len(ensemble), len(ensemble), ensemble.dit_flip_rate(), ensemble.phase_error_rate())
    )

    pairs_in = len(ensemble)
    d_est, abort, ens = verification_test(
        ensemble, config.verification_fraction, config.resolved_threshold, master.child(STAGE_VERIFY)
    )
    report.d_estimated = d_est
    report.pairs_surviving.append({"stage": "verify", "pairs": len(ens)})
    report.transcript.append((0, "verify", pairs_in, len(ens), ens.dit_flip_rate(), ens.phase_error_rate()))
    if abort:
        report.aborted, report.abort_reason = True, ABORT_VERIFICATION
        return report

    plan = planning_distribution(config, d_est)
    report.empirical_dist.append(ens.label_distribution().tolist())
    report.bound_comparisons.append(_compare("verify", 0, config.dist, ens))

    k = 0
    while True:
        assessment = security_assessment(plan, k, config.epsilon, pairs_remaining=len(ens))
        if assessment.feasible:
            break
        if assessment.sufficient and assessment.r_exceeds_pairs:
            # more rounds only raise r and lower the pair count
            report.aborted, report.abort_reason = True, ABORT_PAIRS_FOR_R
            report.rounds_run, report.r_used = k, assessment.r
            return report
        if k >= config.max_der_rounds or len(ens) < 2:
            report.aborted, report.abort_reason = True, ABORT_NEVER_FEASIBLE
            report.rounds_run = k
            return report
        pairs_in = len(ens)
        ens = der_round(ens, master.child(STAGE_DER, k))
        k += 1
        analytic, _ = iterate_dstep(config.dist, k)
        report.pairs_surviving.append({"stage": f"der{k}", "pairs": len(ens)})
        report.empirical_dist.append(ens.label_distribution().tolist())
        report.bound_comparisons.append(_compare("der", k, analytic, ens))
        report.transcript.append((k, "der", pairs_in, len(ens), ens.dit_flip_rate(), ens.phase_error_rate()))

    report.rounds_run = k
    report.r_used = r = assessment.r
    report.planned_q_bound = assessment.q_bound
    pec = pec_blocks(ens, r, config.eta_accounting, master.child(STAGE_PEC))
    key = pec.key
    report.pairs_surviving.append({"stage": "pec", "pairs": len(key)})
    report.transcript.append((k, "pec", len(ens), len(key), key.dit_flip_rate(), key.phase_error_rate()))
    report.final_key_length = len(key)
    report.final_mismatch_rate = float(np.mean(key.alice != key.bob)) if len(key) else 0.0
    report.final_phase_error_rate = key.phase_error_rate()
    report.final_total_error_rate = float(np.mean((key.m != 0) | (key.n != 0))) if len(key) else 0.0
    report.majority_failure_frequency = pec.majority_failure_frequency
    q_true = iterate_dstep(config.dist, k)[0].phase_marginals()
    if np.all(q_true[0] > q_true[1:]):
        report.majority_failure_bound = majority_failure_bound(q_true, r)
    report.key_digest = _key_digest(key)
    return report


def run_protocol(config: SimConfig, threads: Optional[int] = None) -> SimReport:
    master = RngStream(config.seed)
    ensemble = sample_ensemble(config.dist, config.n_pairs, master.child(STAGE_SAMPLE), threads)
    return execute_protocol(config, ensemble, master)


def rng_info() -> dict:
    return {"generator": RNG_NAME, "numpy": np.__version__, "chunk": CHUNK}


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else 0.0

"""Command-line interface: ``quditkd {thresholds,evolve,simulate,selftest}``.

Exit codes
----------
0 success, 1 selftest failure, 2 invalid flags, 3 infeasible channel,
4 precision loss, 5 verification failed, 6 never feasible,
7 too few pairs for the block length.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .der_map import der_diagnostics
from .errors import (
    InfeasibleParameters,
    NegativeRateError,
    NormalizationError,
    NotDistillable,
    NotPrimeError,
    PrecisionLoss,
    SymmetryViolation,
)
from .gf_algebra import is_prime
from .isotropic import critical_rounds, rows_to_csv, rows_to_records, threshold_table
from .mc_sim import (
    ABORT_NEVER_FEASIBLE,
    ABORT_PAIRS_FOR_R,
    ABORT_VERIFICATION,
    SimConfig,
    rng_info,
    run_protocol,
)
from .pauli_channel import (
    disturbance,
    from_depolarizing,
    from_isotropic,
    isotropic_from_disturbance,
    read_distribution,
)
from .pec_bounds import security_assessment

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_USAGE = 2
EXIT_CHANNEL = 3
EXIT_PRECISION = 4
ABORT_EXIT = {ABORT_VERIFICATION: 5, ABORT_NEVER_FEASIBLE: 6, ABORT_PAIRS_FOR_R: 7}

_CHANNEL_ERRORS = (InfeasibleParameters, NormalizationError, NegativeRateError, NotPrimeError, SymmetryViolation)


class UsageError(Exception):
    pass


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _metadata(command: str, config: dict, runtime: Optional[float]) -> dict:
    meta = {"tool": "quditkd", "version": __version__, "command": command, "config": config, "rng": rng_info()}
    if runtime is not None:
        meta["runtime_seconds"] = runtime
    return meta


def _csv_with_metadata(meta: dict, body: str) -> str:
    return f"# metadata: {json.dumps(meta, sort_keys=True)}\n" + body


def _parse_numbers(text: str, count: int, flag: str) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise UsageError(f"{flag} expects {count} comma-separated values, got {text!r}")
    return parts


def _int_field(text: str, flag: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{flag}: {text!r} is not an integer") from None


def _float_field(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{flag}: {text!r} is not a number") from None


def build_channel(args):
    """Return ``(distribution, isotropic params or None, description)`` from the source flags."""
    if args.dist is not None:
        return read_distribution(args.dist), None, {"dist": str(args.dist)}
    if args.isotropic is not None:
        d, D, p11 = _parse_numbers(args.isotropic, 3, "--isotropic")
        params = isotropic_from_disturbance(
            _int_field(d, "--isotropic"), _float_field(D, "--isotropic"), _float_field(p11, "--isotropic")
        )
        return from_isotropic(params), params, {"isotropic": [params.d, float(D), float(p11)]}
    d, Q = _parse_numbers(args.depolarizing, 2, "--depolarizing")
    dist = from_depolarizing(_int_field(d, "--depolarizing"), _float_field(Q, "--depolarizing"))
    return dist, None, {"depolarizing": [dist.d, float(Q)]}


def _add_channel_flags(parser, required: bool) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--dist", type=Path, help="distribution file (.json or .csv)")
    group.add_argument("--isotropic", metavar="d,D,p11", help="isotropic channel with disturbance D")
    group.add_argument("--depolarizing", metavar="d,Q", help="depolarizing channel with error rate Q")


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return value


# -- commands ----------------------------------------------------------------

def cmd_thresholds(args) -> int:
    t0 = time.perf_counter()
    if args.d_max < 2:
        raise UsageError("--d-max must be at least 2")
    dims = [d for d in range(2, args.d_max + 1) if not args.primes_only or is_prime(d)]
    rows = threshold_table(dims)
    config = {"d_max": args.d_max, "primes_only": args.primes_only, "format": args.format}
    meta = _metadata("thresholds", config, time.perf_counter() - t0)
    if args.format == "csv":
        text = _csv_with_metadata(meta, rows_to_csv(rows))
    else:
        text = json.dumps({"metadata": meta, "rows": rows_to_records(rows)}, indent=2) + "\n"
    atomic_write(args.out, text)
    return EXIT_OK


def _evolve_rows(dist, k_max: int, epsilon: float) -> list[dict]:
    rows = []
    for k in range(k_max + 1):
        evo = der_diagnostics(dist, k)
        a = security_assessment(dist, k, epsilon)
        rows.append(
            {
                "k": k,
                "R_D": evo.dit_flip_rate,
                "R_P": evo.phase_error_rate,
                "q": evo.q.tolist(),
                "xi": evo.xi.tolist(),
                "chi": evo.chi,
                "log_statistic": a.log_statistic,
                "log_f": math.log(a.f_value),
                "feasible": a.sufficient,
                "r": a.r,
                "q_bound": a.q_bound,
            }
        )
    return rows


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


def _evolve_csv(rows: list[dict], d: int) -> str:
    header = ["k", "R_D", "R_P"] + [f"q_{i}" for i in range(d)] + [f"xi_{i}" for i in range(d)]
    header += ["chi", "log_statistic", "log_f", "feasible", "r", "q_bound"]
    lines = [",".join(header)]
    for row in rows:
        vals = [row["k"], row["R_D"], row["R_P"], *row["q"], *row["xi"], row["chi"], row["log_statistic"]]
        vals += [row["log_f"], str(row["feasible"]).lower(), row["r"], row["q_bound"]]
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in vals))
    return "\n".join(lines) + "\n"


def cmd_evolve(args) -> int:
    t0 = time.perf_counter()
    if args.k < 0:
        raise UsageError("--k must be non-negative")
    dist, params, source = build_channel(args)
    rows = _evolve_rows(dist, args.k, args.epsilon)
    k_c = None
    if params is not None:
        try:
            k_c = critical_rounds(params, args.epsilon)
        except NotDistillable:
            k_c = None
    config = {**source, "d": dist.d, "k": args.k, "epsilon": args.epsilon, "format": args.format}
    meta = _metadata("evolve", config, time.perf_counter() - t0)
    meta["k_c"] = _json_safe(k_c)
    meta["disturbance"] = disturbance(dist)
    if args.format == "csv":
        text = _csv_with_metadata(meta, _evolve_csv(rows, dist.d))
    else:
        text = json.dumps({"metadata": meta, "rows": _json_safe(rows)}, indent=2) + "\n"
    atomic_write(args.out, text)
    return EXIT_OK


_SIM_FLAGS = (
    "n_pairs",
    "epsilon",
    "verification_fraction",
    "max_der_rounds",
    "seed",
    "eta_accounting",
    "threshold",
    "plan_from",
)


def build_sim_config(args) -> SimConfig:
    if args.config is not None:
        obj = json.loads(Path(args.config).read_text())
        # inline flags override the file
        for name in _SIM_FLAGS:
            value = getattr(args, name)
            if value is not None:
                obj[name] = value
        if any(getattr(args, f) is not None for f in ("dist", "isotropic", "depolarizing")):
            dist, _, _ = build_channel(args)
            obj["d"], obj["dist"] = dist.d, dist.p.tolist()
        return SimConfig.from_dict(obj)
    if args.dist is None and args.isotropic is None and args.depolarizing is None:
        raise UsageError("simulate needs --config or one of --dist/--isotropic/--depolarizing")
    if args.n_pairs is None:
        raise UsageError("simulate needs --n-pairs (or --config)")
    dist, _, _ = build_channel(args)
    kwargs = {name: getattr(args, name) for name in _SIM_FLAGS if getattr(args, name) is not None}
    return SimConfig(d=dist.d, dist=dist, **kwargs)


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    try:
        config = build_sim_config(args)
    except _CHANNEL_ERRORS:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    report = run_protocol(config)
    # runtime goes to a sidecar so that the report itself is reproducible byte for byte
    doc = {"metadata": _metadata("simulate", config.to_dict(), None), "report": report.to_dict()}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    atomic_write(args.out, text)
    if args.transcript is not None:
        atomic_write(args.transcript, report.transcript_text())
    if args.out not in (None, "-"):
        timing = {"runtime_seconds": time.perf_counter() - t0, "report": str(args.out)}
        atomic_write(f"{args.out}.timing.json", json.dumps(timing, indent=2) + "\n")
    if report.aborted:
        print(f"protocol aborted: {report.abort_reason}", file=sys.stderr)
        return ABORT_EXIT[report.abort_reason]
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import format_table, run_selftest

    results = run_selftest(args.level)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"quditkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="tolerable-disturbance table over d")
    p.add_argument("--d-max", type=int, required=True)
    p.add_argument("--primes-only", action="store_true")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("evolve", help="per-round DER diagnostics for one channel")
    _add_channel_flags(p, required=True)
    p.add_argument("--k", type=int, default=10, help="last round to report")
    p.add_argument("--epsilon", type=_probability, default=0.01)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("simulate", help="Monte Carlo run of the full protocol")
    p.add_argument("--config", type=Path, help="JSON file with SimConfig fields")
    _add_channel_flags(p, required=False)
    p.add_argument("--n-pairs", type=int)
    p.add_argument("--epsilon", type=_probability)
    p.add_argument("--verification-fraction", type=_probability)
    p.add_argument("--max-der-rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eta-accounting", choices=("all_r", "targets_only"))
    p.add_argument("--threshold", type=float, help="abort threshold (default (d-1)/(2d))")
    p.add_argument("--plan-from", choices=("estimate", "channel"))
    p.add_argument("--out", default="-")
    p.add_argument("--transcript", help="optional line-oriented stage log")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("selftest", help="identity and oracle checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except _CHANNEL_ERRORS as exc:
        print(f"infeasible channel: {exc}", file=sys.stderr)
        return EXIT_CHANNEL
    except PrecisionLoss as exc:
        print(f"precision loss: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

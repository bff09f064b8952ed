"""Command-line front end: analyze, profile, update, bounds, validate, sweep.

Exit codes:
  0 success
  1 configuration or usage error
  2 stability or domain violation
  3 numerical failure
  4 singular or degenerate conditioning
  5 validation check failed
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import time
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from . import __version__
from .conditional import FailureObservation, init_state
from .config import DEFAULT_N, RunConfig, load_config_file, resolve
from .covariance import (
    S_BAR,
    CovarianceBounds,
    NetworkModel,
    covariance_bounds,
    envelope,
    f_extrema,
    steady_state_covariance,
)
from .errors import (
    DegenerateCorrelation,
    DegenerateUpdate,
    DisconnectedGraph,
    DomainError,
    DomainViolation,
    EigSolverFailure,
    EmptyConditioningSet,
    InsufficientSamples,
    InvalidCase,
    InvalidCount,
    InvalidSign,
    InvalidSpec,
    NumericalBlowup,
    QuadratureFailure,
    RetryExhausted,
    SingularBlock,
    StabilityViolation,
    TargetObserved,
)
from .graph import build_laplacian, check_stability, effective_resistance, spectrum
from .risk import best_achievable_bound, best_achievable_complete, profile_from_state
from .validation import (
    SUITES,
    Budget,
    bounds_suite,
    conditional_suite,
    covariance_suite,
    summarize,
    tails_suite,
)

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_NUMERIC, EXIT_SINGULAR, EXIT_VALIDATION = range(6)

ERROR_CODES: list[tuple[tuple[type[BaseException], ...], int]] = [
    ((StabilityViolation, DomainError, DomainViolation), EXIT_STABILITY),
    ((SingularBlock, DegenerateUpdate, DegenerateCorrelation), EXIT_SINGULAR),
    ((EigSolverFailure, QuadratureFailure, NumericalBlowup, InsufficientSamples, EmptyConditioningSet), EXIT_NUMERIC),
    (
        (InvalidSpec, DisconnectedGraph, RetryExhausted, InvalidCount, InvalidCase, InvalidSign, TargetObserved, ValueError),
        EXIT_CONFIG,
    ),
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("CASCADE_RISK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"CASCADE_RISK_THREADS must be an integer, got {env!r}") from None
    return 1


# output


class Writer:
    """Writes result files, each paired with ``<name>.manifest.json``."""

    def __init__(self, out_dir: Path, command: str, cfg: RunConfig, extra: dict[str, Any]):
        self.out_dir = out_dir
        self.manifest = {
            "command": command,
            "parameters": {**cfg.to_dict(), **extra},
            "tool_version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        }
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.write_text(text)
        (self.out_dir / f"{name}.manifest.json").write_text(json.dumps(self.manifest, indent=2) + "\n")
        self.written.append(path)
        return path

    def json(self, name: str, obj: Any) -> Path:
        return self.write(name, json.dumps(obj, indent=2) + "\n")


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(x, ".17g") if isinstance(x, float) else x for x in r])
    return buf.getvalue()


# failure parsing


def _parse_fail(text: str, default: float) -> tuple[int, float]:
    agent, _, value = text.partition(":")
    try:
        return int(agent), float(value) if value else default
    except ValueError:
        raise UsageError(f"--fail expects AGENT[:VALUE], got {text!r}") from None


def _failures(args: argparse.Namespace, cfg: RunConfig) -> FailureObservation:
    obs = FailureObservation()
    if getattr(args, "failures", None):
        try:
            obs = FailureObservation.from_json(Path(args.failures).read_text())
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read failures file {args.failures}: {exc}") from None
    for item in getattr(args, "fail", None) or []:
        obs = obs.with_failure(*_parse_fail(item, cfg.y_f))
    return obs


def _check_agents(obs: FailureObservation, n: int) -> None:
    bad = [i for i in obs.indices if not 0 <= i < n]
    if bad:
        raise UsageError(f"failure agents {bad} out of range 0..{n - 1}")


def _model(cfg: RunConfig) -> NetworkModel:
    return NetworkModel.build(cfg.require_graph(), cfg.tau, cfg.b)


# commands


def cmd_analyze(args, cfg: RunConfig, out: Writer) -> int:
    spec = cfg.require_graph()
    L = build_laplacian(spec)
    sp = spectrum(L)
    report = check_stability(sp, cfg.tau)
    out.json("stability.json", report.to_dict())
    out.json(
        "spectrum.json",
        {
            "eigenvalues": sp.eigenvalues.tolist(),
            "algebraic_connectivity": sp.algebraic_connectivity,
            "lambda_max": sp.lambda_max,
            "effective_resistance": effective_resistance(sp),
        },
    )
    if not report.stable:
        print(f"unstable: tau={cfg.tau} exceeds pi/(2 lambda_n)={report.tau_max:.6g}, margin {report.margin:.6g}", file=sys.stderr)
        return EXIT_STABILITY
    sigma = steady_state_covariance(NetworkModel(spec, sp, cfg.tau, cfg.b, L))
    out.write("sigma.csv", sigma.to_csv())
    return EXIT_OK


def _profile_outputs(out: Writer, prof, prefix: str = "profile") -> None:
    out.json(f"{prefix}.json", prof.records())
    out.write(f"{prefix}.csv", prof.to_csv())


def _state_doc(cfg: RunConfig, obs: FailureObservation) -> dict[str, Any]:
    return {"config": cfg.to_dict(), **obs.to_dict()}


def cmd_profile(args, cfg: RunConfig, out: Writer) -> int:
    model = _model(cfg)
    obs = _failures(args, cfg)
    _check_agents(obs, model.n)
    state = init_state(steady_state_covariance(model), obs)
    _profile_outputs(out, profile_from_state(state, cfg.risk))
    out.json("state.json", _state_doc(cfg, obs))
    return EXIT_OK


def _stream_failures(path: str, default: float) -> list[tuple[int, float]]:
    items = []
    try:
        for line in Path(path).read_text().splitlines():
            if line.strip():
                d = json.loads(line)
                items.append((int(d["agent"]), float(d.get("value", default))))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot read stream {path}: {exc}") from None
    return items


def cmd_update(args, cfg: RunConfig, out: Writer) -> int:
    model = _model(cfg)
    sigma = steady_state_covariance(model)
    prior = FailureObservation()
    if args.state:
        prior = FailureObservation.from_dict(args.state_doc)
    _check_agents(prior, model.n)
    new = [_parse_fail(f, cfg.y_f) for f in args.fail or []]
    if args.stream:
        new += _stream_failures(args.stream, cfg.y_f)
    if not new:
        raise UsageError("update needs at least one --fail or a --stream file")
    _check_agents(FailureObservation(tuple(k for k, _ in new), tuple(v for _, v in new)), model.n)

    state = init_state(sigma, prior)
    timings = []
    for k, v in new:
        t0 = time.perf_counter()
        state.update(k, v)
        t1 = time.perf_counter()
        init_state(sigma, state.observation)
        t2 = time.perf_counter()
        timings.append({"agent": k, "value": v, "m": state.m, "update_seconds": t1 - t0, "recompute_seconds": t2 - t1})
    _profile_outputs(out, profile_from_state(state, cfg.risk))
    out.json("state.json", _state_doc(cfg, state.observation))
    out.json("timings.json", timings)
    return EXIT_OK


def cmd_bounds(args, cfg: RunConfig, out: Writer) -> int:
    s_bar = (args.s_bar_lo, args.s_bar_hi)
    ext = f_extrema(s_bar)
    params = cfg.risk
    doc: dict[str, Any] = {"mode": args.mode, "f_lower": ext.f_lower, "f_argmin": ext.argmin}
    if args.mode == "graph":
        cov = covariance_bounds(_model(cfg), uniform=False, s_bar=s_bar)
        n = cfg.graph.n
    else:
        if cfg.graph is not None:
            cov = covariance_bounds(_model(cfg), uniform=True, s_bar=s_bar)
            n = cfg.graph.n
        else:
            n = DEFAULT_N
            lo_d, hi_d, lo_o, hi_o = envelope(n, cfg.tau, cfg.b, ext.f_lower, ext.f_upper_on_Sbar)
            cov = CovarianceBounds(lo_d, hi_d, lo_o, hi_o, ext.f_lower, ext.f_upper_on_Sbar, s_bar, "uniform")
    doc["f_upper"] = cov.f_upper
    doc["s_bar"] = list(s_bar)
    doc["n"] = n
    doc["covariance_envelope"] = cov.to_dict()
    doc["best_achievable"] = {
        sign: best_achievable_bound(n, cfg.tau, cfg.b, cfg.y_f, params, sign, s_bar).to_dict()
        for sign in ("positive", "negative", "zero")
    }
    if n >= 3:
        doc["best_achievable"]["complete"] = best_achievable_complete(n, cfg.tau, cfg.b, cfg.y_f, params).to_dict()
    out.json("bounds.json", doc)
    return EXIT_OK


def cmd_validate(args, cfg: RunConfig, out: Writer) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    budget = Budget(
        horizon=args.horizon,
        burn_in=args.burn_in,
        trajectories=args.trajectories,
        conditional_samples=args.samples,
        tail_samples=args.tail_samples,
        graphs=args.graphs,
        threads=args.threads_resolved,
    )
    n = cfg.graph.n if cfg.graph is not None else None
    checks: list[dict[str, Any]] = []
    for s in suites:
        if s == "covariance":
            checks += covariance_suite(n or 5, cfg.tau, cfg.b, cfg.seed, budget)
        elif s == "conditional":
            checks += conditional_suite(n or 20, cfg.tau, cfg.b, cfg.seed, budget)
        elif s == "tails":
            checks += tails_suite(cfg.risk, cfg.seed, budget)
        elif s == "bounds":
            checks += bounds_suite(n or 20, cfg.tau, cfg.b, cfg.y_f, cfg.risk, cfg.seed, budget)
    report = summarize(checks)
    out.json("validate.json", report)
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}")
    return EXIT_OK if report["pass"] else EXIT_VALIDATION


def cmd_sweep(args, cfg: RunConfig, out: Writer) -> int:
    model = _model(cfg)
    n = model.n
    sigma = steady_state_covariance(model)
    rows = []
    if args.kind == "count":
        max_m = args.max_m if args.max_m is not None else min(10, n - 2)
        if not 1 <= max_m < n:
            raise UsageError(f"--max-m must lie in 1..{n - 1}")
        state = init_state(sigma)
        for m in range(1, max_m + 1):
            state.update(m - 1, cfg.y_f)
            for r in profile_from_state(state, cfg.risk).records():
                rows.append([m, r["agent"], r["var"], r["avar"], r["level"], r["branch"]])
        header = ["m", "agent", "var", "avar", "level", "branch"]
    else:
        for i in range(n):
            prof = profile_from_state(init_state(sigma, FailureObservation((i,), (cfg.y_f,))), cfg.risk)
            for r in prof.records():
                rows.append([i, r["agent"], r["var"], r["avar"], r["level"], r["branch"]])
        header = ["failed_agent", "agent", "var", "avar", "level", "branch"]
    out.write("sweep.csv", _csv(header, rows))
    return EXIT_OK


# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("graph")
    g.add_argument("--topology", choices=["complete", "star", "path", "pcycle", "erdos-renyi"])
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int, help="neighbours per side for pcycle")
    g.add_argument("--edge-prob", dest="edge_prob", type=float)
    g.add_argument("--graph-seed", dest="graph_seed", type=int)
    m = p.add_argument_group("model and risk")
    m.add_argument("--tau", type=float)
    m.add_argument("--b", type=float)
    m.add_argument("--c", type=float)
    m.add_argument("--alpha", type=float)
    m.add_argument("--epsilon", type=float)
    m.add_argument("--y-f", dest="y_f", type=float)
    m.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, help="worker cap (default $CASCADE_RISK_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cascade-risk", description="Cascading-failure risk in delayed consensus networks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="spectrum, stability and steady-state covariance")
    _add_common(p)

    p = sub.add_parser("profile", help="risk profile given observed failures")
    _add_common(p)
    p.add_argument("--failures", help='JSON file {"failures": [{"agent": i, "value": v}, ...]}')
    p.add_argument("--fail", action="append", metavar="AGENT[:VALUE]", help="observed failure (repeatable)")

    p = sub.add_parser("update", help="fold new failures into a saved state")
    _add_common(p)
    p.add_argument("--state", help="state.json from a previous profile or update run")
    p.add_argument("--fail", action="append", metavar="AGENT[:VALUE]")
    p.add_argument("--stream", help='JSON-lines file of {"agent": i, "value": v}')

    p = sub.add_parser("bounds", help="f extrema, covariance envelopes, best-achievable risk")
    _add_common(p)
    p.add_argument("--mode", choices=["graph", "uniform"], default="uniform")
    p.add_argument("--s-bar-lo", dest="s_bar_lo", type=float, default=S_BAR[0])
    p.add_argument("--s-bar-hi", dest="s_bar_hi", type=float, default=S_BAR[1])

    p = sub.add_parser("validate", help="Monte-Carlo and sweep oracle suites")
    _add_common(p)
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--graphs", type=int, default=1000)
    p.add_argument("--samples", type=int, default=4_000_000, help="draws per conditional check")
    p.add_argument("--tail-samples", dest="tail_samples", type=int, default=10_000_000)
    p.add_argument("--horizon", type=float, default=2000.0)
    p.add_argument("--burn-in", dest="burn_in", type=float, default=100.0)
    p.add_argument("--trajectories", type=int, default=8)

    p = sub.add_parser("sweep", help="risk versus failure count or failure location")
    _add_common(p)
    p.add_argument("--kind", choices=["count", "location"], default="count")
    p.add_argument("--max-m", dest="max_m", type=int)
    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "profile": cmd_profile,
    "update": cmd_update,
    "bounds": cmd_bounds,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}

_GRAPH_REQUIRED = {"analyze", "profile", "sweep", "update"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = load_config_file(args.config)
        if args.command == "update" and args.state:
            try:
                doc = json.loads(Path(args.state).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read state {args.state}: {exc}") from None
            args.state_doc = doc
            file_cfg = {**doc.get("config", {}), **file_cfg}
            file_cfg = {k: v for k, v in file_cfg.items() if v is not None}
        try:
            cfg = resolve(file_cfg, vars(args))
        except InvalidSpec as exc:
            raise UsageError(str(exc)) from None
        if args.command in _GRAPH_REQUIRED and cfg.graph is None:
            raise UsageError("missing graph: pass --topology and --n")
        args.threads_resolved = _threads(args.threads)
        skip = set(cfg.to_dict()) | {"state_doc", "command", "threads_resolved"}
        extra = {k: v for k, v in vars(args).items() if k not in skip}
        writer = Writer(Path(args.out), args.command, cfg, {"options": extra})
        return COMMANDS[args.command](args, cfg, writer)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cascade-risk: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        for types, code in ERROR_CODES:
            if isinstance(exc, types):
                print(f"cascade-risk: {type(exc).__name__}: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())

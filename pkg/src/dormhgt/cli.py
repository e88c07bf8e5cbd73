"""Command-line front end.

Every command reads an optional JSON config, applies flag overrides, and
writes CSV or JSON.  JSON results carry the resolved configuration under
``config``; ``--echo-config`` writes it separately for CSV commands.

Exit codes: 0 success, 1 usage or configuration error, 2 the analysis does
not apply to the parameters (boundary, critical or unfit resident).
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Any, Optional, Sequence

import numpy as np

from . import branching, experiments, ode, ssa, stability
from .config import (
    ConfigError,
    InvadeConfig,
    OdeConfig,
    RunConfig,
    SsaConfig,
    StopConfig,
)
from .errors import CriticalCase, InapplicableError, InvalidParameters, ResidentUnfit
from .model import PARAM_NAMES, ModelParams, equilibria, trait1_equilibrium, trait2_equilibrium
from .output import (
    REGIME_HEADER,
    RAW_TRIAL_HEADER,
    counts_csv,
    csv_text,
    emit,
    json_text,
    trajectory_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INAPPLICABLE = 2

STOP_SETS = ("S1", "S2", "Sco")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default(cls, name: str) -> Any:
    value = getattr(cls(), name)
    return "none" if value is None else value


def _floats(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return values


def _ints(text: str) -> list[int]:
    try:
        values = [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return values


def _grid(text: str) -> list:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid is START,STOP,NUM")
    try:
        return [float(parts[0]), float(parts[1]), int(parts[2])]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common")
    g.add_argument("--config", metavar="PATH", help="JSON config file; flags override it")
    g.add_argument("--seed", type=_u64, metavar="U64", help="base seed (default: 0)")
    g.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    g.add_argument("--threads", type=int, metavar="N", help="worker cap (default: 1)")
    g.add_argument("--echo-config", metavar="PATH", help="also write the resolved config here")
    m = parser.add_argument_group("model (all eight required, from flags or config)")
    for name in PARAM_NAMES:
        m.add_argument(f"--{name}", type=float, metavar="X")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dormhgt", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="equilibria, fitnesses, stability labels and regime")
    _common(p)

    p = sub.add_parser("ode", help="integrate the mean-field system")
    _common(p)
    p.add_argument("--system", choices=sorted(ode.SYSTEMS),
                   help=f"vector field (default: {_default(OdeConfig, 'system')})")
    p.add_argument("--init", type=_floats, metavar="X,Y[,Z]", help="initial densities (required)")
    p.add_argument("--t-max", type=float, help=f"end time (default: {_default(OdeConfig, 't_max')})")
    p.add_argument("--samples", type=int,
                   help=f"output rows (default: {_default(OdeConfig, 'samples')})")
    p.add_argument("--rtol", type=float, help=f"(default: {_default(OdeConfig, 'rtol')})")
    p.add_argument("--atol", type=float, help=f"(default: {_default(OdeConfig, 'atol')})")
    p.add_argument("--converge", action="store_true", default=None,
                   help="integrate to rest and report the equilibrium reached as JSON")
    p.add_argument("--match-tol", type=float,
                   help=f"distance for naming the equilibrium (default: {_default(OdeConfig, 'match_tol')})")
    p.add_argument("--t-cap", type=float,
                   help=f"time limit with --converge (default: {_default(OdeConfig, 't_cap')})")

    p = sub.add_parser("ssa", help="one exact stochastic simulation")
    _common(p)
    p.add_argument("--K", type=int, help=f"carrying capacity (default: {_default(SsaConfig, 'K')})")
    p.add_argument("--init", type=_ints, metavar="N1A,N1D,N2",
                   help="initial counts (default: trait-1 equilibrium times K)")
    p.add_argument("--t-cap", type=float, help=f"(default: {_default(SsaConfig, 't_cap')})")
    p.add_argument("--event-cap", type=int, help=f"(default: {_default(SsaConfig, 'event_cap')})")
    p.add_argument("--record-dt", type=float,
                   help=f"trajectory sampling step (default: {_default(SsaConfig, 'record_dt')})")
    p.add_argument("--stop-mutant", type=int, choices=(1, 2),
                   help="trait watched by --stop-extinction and --stop-level")
    p.add_argument("--stop-extinction", action="store_true", default=None)
    p.add_argument("--stop-level", type=int, metavar="N")
    p.add_argument("--stop-set", action="append", choices=STOP_SETS,
                   help="stop on entering a neighbourhood of an equilibrium (repeatable)")
    p.add_argument("--beta", type=float,
                   help=f"neighbourhood radius (default: {_default(StopConfig, 'beta')})")
    p.add_argument("--trajectory", metavar="PATH", help="write the sampled trajectory CSV here")

    p = sub.add_parser("invade", help="invasion study from one mutant")
    _common(p)
    p.add_argument("--direction", choices=experiments.DIRECTIONS,
                   help=f"(default: {_default(InvadeConfig, 'direction')})")
    p.add_argument("--K", type=_ints, metavar="K1,K2,...", help="carrying capacities (default: 1000)")
    p.add_argument("--trials", type=int, help=f"(default: {_default(InvadeConfig, 'trials')})")
    p.add_argument("--beta", type=float, help=f"(default: {_default(InvadeConfig, 'beta')})")
    p.add_argument("--t-cap", type=float, help="censoring time (default: none)")
    p.add_argument("--event-cap", type=int, help=f"(default: {_default(InvadeConfig, 'event_cap')})")
    p.add_argument("--raw", metavar="PATH", help="write per-trial CSV here")

    p = sub.add_parser("regime-map", help="regime labels on a (lambda1, lambda2) grid")
    _common(p)
    p.add_argument("--lambda1-grid", type=_grid, metavar="START,STOP,NUM",
                   help="(default: 1,8,71)")
    p.add_argument("--lambda2-grid", type=_grid, metavar="START,STOP,NUM",
                   help="(default: 0.05,8,80)")

    p = sub.add_parser("branching", help="invasion fitnesses and extinction probabilities")
    _common(p)
    p.add_argument("--verify-mc", type=int, metavar="N",
                   help="append Monte Carlo extinction estimates from N trials (default: 0)")
    p.add_argument("--survival-threshold", type=int, metavar="N",
                   help="size counted as survival in the Monte Carlo (default: adaptive)")
    return parser


def _set(obj, name: str, value) -> None:
    if value is not None:
        setattr(obj, name, value)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any) overlaid with the flags that were given."""
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in PARAM_NAMES:
        _set_model(cfg, name, getattr(args, name))
    _set(cfg, "seed", args.seed)
    _set(cfg, "threads", args.threads)
    cmd = args.command
    if cmd == "ode":
        o = cfg.ode
        for name in ("system", "init", "t_max", "samples", "rtol", "atol", "converge",
                     "match_tol", "t_cap"):
            _set(o, name, getattr(args, name))
    elif cmd == "ssa":
        s = cfg.ssa
        for name in ("K", "init", "t_cap", "event_cap", "record_dt"):
            _set(s, name, getattr(args, name))
        _set(s.stop, "mutant", args.stop_mutant)
        _set(s.stop, "extinction", args.stop_extinction)
        _set(s.stop, "level", args.stop_level)
        _set(s.stop, "sets", args.stop_set)
        _set(s.stop, "beta", args.beta)
    elif cmd == "invade":
        v = cfg.invade
        for name in ("direction", "K", "trials", "beta", "t_cap", "event_cap"):
            _set(v, name, getattr(args, name))
    elif cmd == "regime-map":
        g = cfg.regime_map
        if args.lambda1_grid:
            g.lambda1.start, g.lambda1.stop, g.lambda1.num = args.lambda1_grid
        if args.lambda2_grid:
            g.lambda2.start, g.lambda2.stop, g.lambda2.num = args.lambda2_grid
    elif cmd == "branching":
        _set(cfg.branching, "verify_mc", args.verify_mc)
        _set(cfg.branching, "survival_threshold", args.survival_threshold)
    return cfg


def _set_model(cfg: RunConfig, name: str, value: Optional[float]) -> None:
    if value is not None:
        cfg.model[name] = value


def _check_config(cfg: RunConfig) -> None:
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2**64)")
    if not isinstance(cfg.threads, int) or cfg.threads < 1:
        raise ConfigError("threads must be a positive integer")


def _report(cfg: RunConfig, **body: Any) -> str:
    return json_text({"config": cfg.to_dict(), **body})


def _inapplicable(cfg: RunConfig, exc: InapplicableError, out: Optional[str], **extra) -> int:
    emit(_report(cfg, status=exc.kind, message=str(exc), **extra), out)
    return EXIT_INAPPLICABLE


def cmd_classify(cfg: RunConfig, out: Optional[str]) -> int:
    params = cfg.params()
    label = stability.regime(params)
    fitness = branching.fitness_report(params).to_dict()
    labels = {k: v.to_dict() for k, v in stability.classify_equilibria(params).items()}
    try:
        eq = equilibria(params).to_dict()
    except InapplicableError as exc:
        eq = {"status": exc.kind, "message": str(exc)}
    status = "ok"
    if label in (stability.BOUNDARY, stability.RESIDENT_UNFIT):
        status = label
    elif "status" in eq:
        status = eq["status"]
    emit(_report(cfg, status=status, regime=label, equilibria=eq, fitness=fitness,
                 stability=labels), out)
    return EXIT_OK if status == "ok" else EXIT_INAPPLICABLE


def cmd_ode(cfg: RunConfig, out: Optional[str]) -> int:
    params = cfg.params()
    o = cfg.ode
    if not o.init:
        raise UsageError("ode needs a nonempty --init")
    if o.converge:
        res = ode.converge(params, o.system, o.init, match_tol=o.match_tol, t_cap=o.t_cap)
        emit(_report(cfg, result=res.to_dict()), out)
        return EXIT_OK
    traj = ode.integrate(params, o.system, o.init, o.t_max, samples=o.samples,
                         rtol=o.rtol, atol=o.atol)
    emit(trajectory_csv(traj.t, traj.states, traj.columns), out)
    return EXIT_OK


def _stop_spec(params: ModelParams, s: SsaConfig) -> ssa.StopSpec:
    st = s.stop
    unknown = set(st.sets) - set(STOP_SETS)
    if unknown:
        raise ConfigError(f"unknown stop sets {sorted(unknown)}; choose from {STOP_SETS}")
    trait1 = trait2 = coex = None
    if "S1" in st.sets:
        trait1 = trait1_equilibrium(params)
    if "S2" in st.sets:
        trait2 = trait2_equilibrium(params)
    if "Sco" in st.sets:
        report = equilibria(params)
        if report.coexistence is None:
            raise ConfigError("stop set Sco requested but no coexistence equilibrium exists")
        coex = report.coexistence
    t_cap = math.inf if s.t_cap is None else float(s.t_cap)
    return ssa.StopSpec(
        mutant=st.mutant, extinction=st.extinction, level=st.level, trait1=trait1,
        trait2=trait2, coexistence=coex, beta=st.beta, t_cap=t_cap, event_cap=s.event_cap,
    )


def cmd_ssa(cfg: RunConfig, out: Optional[str], trajectory: Optional[str]) -> int:
    params = cfg.params()
    s = cfg.ssa
    if s.init is None:
        n1a, n1d = trait1_equilibrium(params)
        init = [round(s.K * n1a), round(s.K * n1d), 0]
    else:
        init = list(s.init)
    if len(init) != 3 or any(not isinstance(x, int) or x < 0 for x in init):
        raise UsageError("ssa --init needs three nonnegative integer counts")
    stop = _stop_spec(params, s)
    record_dt = s.record_dt if math.isfinite(stop.t_cap) else None
    res = ssa.run(cfg.seed, params, s.K, init, stop, record_dt=record_dt)
    if trajectory is not None:
        record = res.trajectory if res.trajectory is not None else np.array(
            [[res.t, *res.state.to_list()]]
        )
        emit(counts_csv(record), trajectory)
    emit(_report(cfg, outcome=res.to_dict()), out)
    return EXIT_OK


def cmd_invade(cfg: RunConfig, out: Optional[str], raw: Optional[str]) -> int:
    params = cfg.params()
    v = cfg.invade
    if not isinstance(v.trials, int) or v.trials <= 0:
        raise UsageError("trials must be a positive integer")
    if not v.K or any(not isinstance(k, int) or k <= 1 for k in v.K):
        raise UsageError("K must be a nonempty list of integers > 1")
    t_cap = math.inf if v.t_cap is None else float(v.t_cap)
    summary = experiments.invasion_study(
        params, v.K, v.trials, v.direction, beta=v.beta, base_seed=cfg.seed,
        workers=cfg.threads, t_cap=t_cap, event_cap=v.event_cap,
    )
    if raw is not None:
        emit(csv_text(RAW_TRIAL_HEADER, experiments.raw_rows(summary)), raw)
    emit(_report(cfg, summary=summary.to_dict(),
                 theory=experiments.theory(params, v.direction)), out)
    return EXIT_OK


def cmd_regime_map(cfg: RunConfig, out: Optional[str]) -> int:
    params = cfg.params()
    g = cfg.regime_map
    for axis in (g.lambda1, g.lambda2):
        if not isinstance(axis.num, int) or axis.num < 1:
            raise UsageError("grid size must be a positive integer")
    l1 = np.linspace(g.lambda1.start, g.lambda1.stop, g.lambda1.num)
    l2 = np.linspace(g.lambda2.start, g.lambda2.stop, g.lambda2.num)
    if np.any(l1 <= 0) or np.any(l2 <= 0):
        raise UsageError("grid values must be positive")
    emit(csv_text(REGIME_HEADER, stability.regime_map(params, l1, l2)), out)
    return EXIT_OK


def _mc_check(est: branching.MonteCarloEstimate, exact: float) -> dict:
    d = est.to_dict()
    d["exact"] = exact
    d["z"] = (est.estimate - exact) / est.stderr if est.stderr > 0 else (
        0.0 if est.estimate == exact else math.inf
    )
    d["within_3sigma"] = abs(est.estimate - exact) <= 3 * est.stderr or est.estimate == exact
    return d


def cmd_branching(cfg: RunConfig, out: Optional[str]) -> int:
    params = cfg.params()
    report = branching.fitness_report(params)
    body: dict[str, Any] = {"fitness": report.to_dict()}
    if report.critical:
        return _inapplicable(cfg, CriticalCase(
            f"critical invasion fitness: {', '.join(report.critical)}"), out, **body)
    if report.q1 is None and report.q2 is None:
        return _inapplicable(cfg, ResidentUnfit(
            "both residents are unfit; no invasion fitness is defined"), out, **body)
    n = cfg.branching.verify_mc
    if n:
        if not isinstance(n, int) or n < 0:
            raise UsageError("verify-mc must be a nonnegative integer")
        mc = {}
        for trait, exact in ((1, report.q1), (2, report.q2)):
            if exact is None:
                continue
            est = branching.branching_mc(
                params, trait, n, ssa.derive_seed(cfg.seed, trait),
                survival_threshold=cfg.branching.survival_threshold,
            )
            mc[f"q{trait}"] = _mc_check(est, exact)
        body["monte_carlo"] = mc
    emit(_report(cfg, status="ok", **body), out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        _check_config(cfg)
        if args.echo_config:
            emit(json_text(cfg.to_dict()), args.echo_config)
        if args.command == "classify":
            return cmd_classify(cfg, args.out)
        if args.command == "ode":
            return cmd_ode(cfg, args.out)
        if args.command == "ssa":
            return cmd_ssa(cfg, args.out, args.trajectory)
        if args.command == "invade":
            return cmd_invade(cfg, args.out, args.raw)
        if args.command == "regime-map":
            return cmd_regime_map(cfg, args.out)
        return cmd_branching(cfg, args.out)
    except InapplicableError as exc:
        try:
            return _inapplicable(cfg, exc, args.out)
        except Exception:
            print(f"dormhgt: {exc.kind}: {exc}", file=sys.stderr)
            return EXIT_INAPPLICABLE
    except (UsageError, ConfigError, InvalidParameters, ValueError, TypeError) as exc:
        print(f"dormhgt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

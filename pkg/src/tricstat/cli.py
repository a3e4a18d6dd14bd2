"""Command-line front end.

Examples::

    tricstat dist --atp 500
    tricstat --format json sweep --atp-min 5 --atp-max 1e4 --points 50
    tricstat crossover --lo 5 --hi 500
    tricstat --seed 0 --out report.json fit data.csv
    tricstat verify --trials 100

Exit codes: 0 success, 1 usage/config error, 2 model/domain error,
3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from math import comb
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import cooperativity_chains, sign_structure
from .countdp import distribution_via_dp
from .energy import DEFAULT_N0, ReducedParams, bath_from_conc, load_params
from .ensemble import default_engine, find_mode_crossover, occupancy_distribution, sweep
from .errors import CrossoverNotFound, DatasetError, ModelError, ParameterError, TopologyError
from .fit import FitConfig, curve_rmse, fit, load_dataset
from .lattice import LatticeSpec

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("tricstat")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    params: ReducedParams
    spec: LatticeSpec
    n0: float
    engine: str
    fmt: str
    out: Path | None
    seed: int


def _emit(cfg: RunConfig, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text, encoding="utf-8")


def _build_config(args) -> RunConfig:
    try:
        spec = LatticeSpec(args.ring_len)
    except TopologyError as exc:
        raise UsageError(f"--ring-len: {exc}") from None
    try:
        params, file_n0 = load_params(args.params)
    except FileNotFoundError:
        raise UsageError(f"--params: file not found: {args.params}") from None
    except ParameterError as exc:
        raise UsageError(f"--params: {exc}") from None
    n0 = args.n0 if args.n0 is not None else (file_n0 if file_n0 is not None else DEFAULT_N0)
    if not n0 > 0:
        raise UsageError("--n0 must be positive")
    engine = args.engine or default_engine(spec)
    return RunConfig(params, spec, n0, engine, args.format, args.out, args.seed)


def _render_sweep(cfg: RunConfig, result) -> str:
    return result.to_json() if cfg.fmt == "json" else result.to_csv()


def cmd_dist(args, cfg: RunConfig) -> int:
    _emit(cfg, _render_sweep(cfg, sweep(cfg.params, [args.atp], cfg.n0, cfg.spec, cfg.engine)))
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    if args.atp:
        grid = list(args.atp)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise UsageError("--atp values must be strictly increasing")
    else:
        if not 0 < args.atp_min < args.atp_max or args.points < 2:
            raise UsageError("need 0 < --atp-min < --atp-max and --points >= 2")
        grid = [float(c) for c in np.geomspace(args.atp_min, args.atp_max, args.points)]
    _emit(cfg, _render_sweep(cfg, sweep(cfg.params, grid, cfg.n0, cfg.spec, cfg.engine)))
    return EXIT_OK


def cmd_crossover(args, cfg: RunConfig) -> int:
    if not 0 < args.lo < args.hi:
        raise UsageError("need 0 < --lo < --hi")
    try:
        c = find_mode_crossover(cfg.params, cfg.n0, cfg.spec, args.lo, args.hi, args.resolution, cfg.engine)
    except CrossoverNotFound as exc:
        print(f"no crossover: {exc}", file=sys.stderr)
        if cfg.fmt == "json":
            _emit(cfg, json.dumps({"crossover_uM": None, "lo": args.lo, "hi": args.hi}))
        else:
            _emit(cfg, "no crossover")
        return EXIT_MODEL
    if cfg.fmt == "json":
        _emit(cfg, json.dumps({"crossover_uM": round(c, 1), "lo": args.lo, "hi": args.hi}))
    else:
        _emit(cfg, f"crossover_uM,{c:.1f}")
    return EXIT_OK


def cmd_fit(args, cfg: RunConfig) -> int:
    try:
        data = load_dataset(args.dataset)
    except FileNotFoundError:
        raise UsageError(f"dataset not found: {args.dataset}") from None
    except DatasetError as exc:
        raise UsageError(f"{args.dataset}: {exc}") from None
    config = FitConfig(
        restarts=args.restarts,
        max_iter=args.max_iter,
        seed=cfg.seed,
        engine=cfg.engine,
        spec=cfg.spec,
        fit_n0=not args.fix_n0,
        n0=cfg.n0,
    )
    result = fit(data, config)
    report = result.to_dict()
    report["rmse"] = curve_rmse(result.params, result.n0, data, cfg.spec, cfg.engine)
    text = json.dumps(report, indent=2)
    print(result.table())
    print("rmse: " + ", ".join(f"{k}={v:.3e}" for k, v in report["rmse"].items()))
    if cfg.out is None:
        print(text)
    else:
        cfg.out.write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def _random_params(rng: np.random.Generator) -> ReducedParams:
    return ReducedParams.from_vector([*rng.uniform(-5, 5, size=6), rng.uniform(-100, 0)])


def cmd_verify(args, cfg: RunConfig) -> int:
    """Engine cross-check, binomial degeneracy and the cooperativity suite."""
    rng = np.random.default_rng(cfg.seed)
    failures = 0

    def report(ok: bool, label: str, level: str = "FAIL") -> None:
        nonlocal failures
        if not ok and level == "FAIL":
            failures += 1
        print(f"{'PASS' if ok else level}  {label}")

    rings = [cfg.spec.ring_len] if args.ring_len_only else list(range(3, min(args.max_ring, 8) + 1))
    worst = 0.0
    for trial in range(args.trials):
        R = rings[trial % len(rings)]
        spec = LatticeSpec(R)
        params = _random_params(rng)
        conc = float(np.exp(rng.uniform(np.log(5.0 * (spec.total_sites + 1) / cfg.n0), np.log(1e4))))
        bath = bath_from_conc(conc, cfg.n0, spec)
        a = occupancy_distribution(params, bath, spec)
        b = distribution_via_dp(params, bath, spec)
        err = max(float(np.max(np.abs(a.log_p_n - b.log_p_n))), abs(a.mean_n - b.mean_n) / max(a.mean_n, 1e-300))
        worst = max(worst, err)
    report(worst < 1e-10, f"enum vs dp over {args.trials} draws, R in {rings}: max rel err {worst:.2e}")

    for R in (3, 7, 8, 9):
        spec = LatticeSpec(R)
        d = distribution_via_dp(ReducedParams.zeros(), bath_from_conc(1e4, cfg.n0, spec), spec)
        exact = np.array([comb(spec.total_sites, n) for n in range(spec.total_sites + 1)], dtype=float)
        exact /= 2.0**spec.total_sites
        err = float(np.max(np.abs(d.p_n - exact)))
        report(err < 1e-12, f"binomial degeneracy M={spec.total_sites}: max abs err {err:.2e}")

    for check in cooperativity_chains(cfg.params) + sign_structure(cfg.params):
        report(check.holds, f"{check.name}: {', '.join(f'{v:.3f}' for v in check.values)}", level="WARN")
    return EXIT_VERIFY if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tricstat", description="Exact ATP-binding statistics on a double-ring enzyme lattice.")
    p.add_argument("--params", default=None, help="parameter JSON file (default: shipped reference set)")
    p.add_argument("--ring-len", type=int, default=8)
    p.add_argument("--n0", type=float, default=None, help="ATP count at 5 uM (default: from params file, else 25)")
    p.add_argument("--engine", choices=("enum", "dp"), default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("dist", help="occupancy distribution at one concentration")
    d.add_argument("--atp", type=float, required=True, help="ATP concentration in uM")

    s = sub.add_parser("sweep", help="distributions over a concentration grid")
    s.add_argument("--atp", type=float, nargs="+", help="explicit increasing concentrations (uM)")
    s.add_argument("--atp-min", type=float, default=5.0)
    s.add_argument("--atp-max", type=float, default=1e4)
    s.add_argument("--points", type=int, default=50)

    c = sub.add_parser("crossover", help="concentration where the most likely count leaves 0")
    c.add_argument("--lo", type=float, default=5.0)
    c.add_argument("--hi", type=float, default=500.0)
    c.add_argument("--resolution", type=float, default=0.1)

    f = sub.add_parser("fit", help="fit reduced energies and n0 to a dataset CSV")
    f.add_argument("dataset", type=Path)
    f.add_argument("--restarts", type=int, default=16)
    f.add_argument("--max-iter", type=int, default=FitConfig.max_iter)
    f.add_argument("--fix-n0", action="store_true", help="hold n0 at its configured value")

    v = sub.add_parser("verify", help="engine cross-check and parameter sanity suite")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--max-ring", type=int, default=8)
    v.add_argument("--ring-len-only", action="store_true", help="cross-check only at --ring-len")
    return p


COMMANDS = {
    "dist": cmd_dist,
    "sweep": cmd_sweep,
    "crossover": cmd_crossover,
    "fit": cmd_fit,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _build_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"tricstat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"tricstat: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    raise SystemExit(main())

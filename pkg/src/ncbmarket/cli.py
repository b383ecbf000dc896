"""
Command-line entry point.

Every command that writes to ``--out`` also writes ``manifest.json`` holding
the command, resolved configuration, master seed and tool version, which is
enough to regenerate the directory byte for byte.  ``--jobs`` only changes how
many processes run sessions, never the output, so it is left out of the
manifest.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, dump, load_config, override
from .harness import (
    prb_grid,
    prsh_grid,
    read_d,
    run_comparison,
    run_sweep,
    write_d,
    write_kde,
    write_sweep_table,
    write_tests,
)
from .lob import write_tape
from .prb import PrbConfig
from .prsh import PrshConfig
from .session import DYNAMICS, MarketDynamic, PopulationEntry, SessionConfig, run_session
from .stats import kde_points

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

BASE_ALGOS = ("GVWY", "ZIC", "ZIP", "SNPR", "SHVR")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser, *, runs: bool = True, dynamic_default: Optional[str] = "trend"):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--dynamic", choices=DYNAMICS, default=dynamic_default)
    p.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    p.add_argument("--duration", type=int, help="session length in seconds")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    if runs:
        p.add_argument("--runs", type=int, help="runs per cell (sweeps) or per dynamic (compare)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ncbmarket", description="CDA market simulator and PRSH/PRB experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("session", help="run one seeded session and print its JSON result")
    _add_common(p, runs=False)
    p.add_argument("--tape", action="store_true", help="also write the trade tape to --out")

    for name in ("sweep-prsh", "sweep-prb"):
        _add_common(sub.add_parser(name, help=f"{name[6:].upper()} hyperparameter sweep"))

    _add_common(sub.add_parser("compare", help="sweeps, winner sets and the PRB-vs-PRSH test"),
                dynamic_default=None)

    p = sub.add_parser("kde", help="density points from a d.csv sample file")
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    p.add_argument("--out")

    sub.add_parser("selftest", help="quick oracle and calibration checks")
    return parser


def resolve(args) -> dict:
    cfg = load_config(getattr(args, "config", None))
    for flag, key in (("seed", "seed"), ("duration", "duration"), ("runs", "runs")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg = override(cfg, key, value)
    if getattr(args, "jobs", 1) < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def _runs(cfg: dict, args, key: str) -> int:
    # --runs wins; otherwise the command's own config key
    return cfg["runs"] if getattr(args, "runs", None) is not None else cfg[key]


def base_config(cfg: dict, seed: int = 0) -> SessionConfig:
    pop = tuple(PopulationEntry(a, cfg[f"pop.{a}"]) for a in BASE_ALGOS)
    return SessionConfig(duration=cfg["duration"], ticks_per_second=cfg["ticks_per_second"],
                         arrival_rate=cfg["lambda"], buyers=pop, sellers=pop, seed=seed,
                         snpr_window=cfg["snpr.window"])


def session_config(cfg: dict) -> SessionConfig:
    prsh = PrshConfig(cfg["prsh.k"], cfg["prsh.v"], cfg["prsh.m"])
    prb = PrbConfig(cfg["prb.k"], cfg["prb.v"], cfg["gp.noise"], cfg["gp.capacity"])
    base = base_config(cfg, cfg["seed"])
    pop = base.buyers + (PopulationEntry("PRSH", cfg["pop.PRSH"], (prsh,)),
                         PopulationEntry("PRB", cfg["pop.PRB"], (prb,)))
    return replace(base, buyers=pop, sellers=pop)


def _grids(cfg: dict):
    pg = list(prsh_grid(cfg["sweep.prsh.k"], cfg["sweep.prsh.v"], cfg["sweep.prsh.m"]))
    bg = prb_grid(cfg["sweep.prb.k"], cfg["sweep.prb.v"], cfg["gp.noise"], cfg["gp.capacity"])
    for c in pg + bg:
        if c.v // c.k < 1:
            raise ConfigError(f"sweep grid cell {c.label} has an empty window")
    return pg, bg


def _write_manifest(out: str, command: str, args, cfg: dict, outputs: Sequence[str]) -> None:
    manifest = {
        "command": command,
        "dynamic": getattr(args, "dynamic", None),
        "master_seed": cfg["seed"],
        "config": dump(cfg),
        "version": __version__,
        "outputs": sorted(outputs),
    }
    with open(os.path.join(out, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _need_out(args) -> str:
    if not args.out:
        raise UsageError(f"{args.command} requires --out DIR")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_session(args, cfg) -> None:
    res = run_session(session_config(cfg), MarketDynamic(args.dynamic))
    text = res.to_json() + "\n"
    if not args.out:
        if args.tape:
            raise UsageError("--tape requires --out DIR")
        sys.stdout.write(text)
        return
    out = _need_out(args)
    outputs = ["session.json"]
    with open(os.path.join(out, "session.json"), "w", newline="\n") as fh:
        fh.write(text)
    if args.tape:
        write_tape(res.trades, os.path.join(out, "tape.csv"))
        outputs.append("tape.csv")
    _write_manifest(out, "session", args, cfg, outputs)


def cmd_sweep(args, cfg) -> None:
    algo = "PRSH" if args.command == "sweep-prsh" else "PRB"
    out = _need_out(args)
    pg, bg = _grids(cfg)
    grid = pg if algo == "PRSH" else bg
    result = run_sweep(algo, MarketDynamic(args.dynamic), grid, _runs(cfg, args, "sweep.runs"),
                       base_config(cfg), cfg["seed"], cfg[f"pop.{algo}"], args.jobs, _progress)
    name = f"{algo.lower()}_table.csv"
    write_sweep_table(result, os.path.join(out, name))
    _write_manifest(out, args.command, args, cfg, [name])
    print(f"{algo} winners under {args.dynamic}: " + "; ".join(c.label for c in result.winners))


def _concat(paths: Sequence[str], dest: str) -> None:
    """Stack CSVs that share a header into one file."""
    with open(dest, "w", newline="\n") as out:
        for i, p in enumerate(paths):
            with open(p) as fh:
                lines = fh.readlines()
            out.writelines(lines if i == 0 else lines[1:])
            os.remove(p)


def cmd_compare(args, cfg) -> None:
    out = _need_out(args)
    pg, bg = _grids(cfg)
    dynamics = [args.dynamic] if args.dynamic else list(DYNAMICS)
    base = base_config(cfg)
    sweep_runs = cfg["sweep.runs"]
    compare_runs = _runs(cfg, args, "runs")
    parts: dict[str, list[str]] = {n: [] for n in ("prsh_table", "prb_table", "d", "tests", "kde")}
    audit_total: dict[str, int] = {}
    for e in dynamics:
        dyn = MarketDynamic(e)
        ps = run_sweep("PRSH", dyn, pg, sweep_runs, base, cfg["seed"], cfg["pop.PRSH"], args.jobs, _progress)
        bs = run_sweep("PRB", dyn, bg, sweep_runs, base, cfg["seed"], cfg["pop.PRB"], args.jobs, _progress)
        cmp = run_comparison(dyn, ps.winners, bs.winners, compare_runs, base, cfg["seed"],
                             cfg["pop.PRSH"], args.jobs)
        for key, val in list(bs.audit.items()) + list(cmp.audit.items()):
            audit_total[key] = audit_total.get(key, 0) + val
        tmp = {n: os.path.join(out, f".{n}.{e}.csv") for n in parts}
        write_sweep_table(ps, tmp["prsh_table"])
        write_sweep_table(bs, tmp["prb_table"])
        write_d(cmp, tmp["d"])
        write_tests(cmp, tmp["tests"])
        write_kde(kde_points(cmp.d.samples, cfg["kde.points"]), tmp["kde"], dynamic=e)
        for n in parts:
            parts[n].append(tmp[n])
        print(f"{e}: d_mean={cmp.d.mean:.2f} z={cmp.z.statistic:.3f} p={cmp.z.p_value:.3g} "
              f"PRB {'beats' if cmp.z.reject else 'does not beat'} PRSH")
    outputs = []
    for n, paths in parts.items():
        _concat(paths, os.path.join(out, f"{n}.csv"))
        outputs.append(f"{n}.csv")
    with open(os.path.join(out, "audit.json"), "w", newline="\n") as fh:
        json.dump(audit_total, fh, indent=1, sort_keys=True)
        fh.write("\n")
    outputs.append("audit.json")
    _write_manifest(out, "compare", args, cfg, outputs)


def cmd_kde(args, cfg) -> None:
    d = read_d(args.input)
    points = kde_points(d, cfg["kde.points"])
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_kde(points, os.path.join(args.out, "kde.csv"))
        _write_manifest(args.out, "kde", args, cfg, ["kde.csv"])
    else:
        sys.stdout.write("x,density\n")
        for x, f in points:
            sys.stdout.write(f"{x!r},{f!r}\n")


def cmd_selftest(args, cfg) -> int:
    from .selftest import run_all

    ok = True
    for name, passed, detail in run_all():
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {
    "session": cmd_session,
    "sweep-prsh": cmd_sweep,
    "sweep-prb": cmd_sweep,
    "compare": cmd_compare,
    "kde": cmd_kde,
    "selftest": cmd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        # surface bad PRSH/PRB settings as configuration errors, not runtime failures
        if args.command == "session":
            session_config(cfg)
        elif args.command in ("sweep-prsh", "sweep-prb", "compare"):
            _grids(cfg)
    except (UsageError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rc = COMMANDS[args.command](args, cfg)
        return EXIT_OK if rc is None else rc
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # any failure past validation maps to exit 2
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``rootlts solve | bench | verify``.

Exit codes: 0 success, 1 unsolved within budget (or a failed verify check),
2 configuration error, 3 numeric fault, 4 bound violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Sequence

from .baselines import DEFAULT_C_PUCT, bfs_breadth, lts_search, puct_search
from .costs import RootedCost
from .domains.sokoban import SAMPLE_LEVEL, SokobanEnv
from .domains.trees import ChainEnv, ClueTreeSpec, DChain, MisleadingReward, gen_clue_tree
from .rerooting import make_rerooter
from .search import NumericFault, run_search
from .verify import PathTrace, check_bounds, visit_count_violations, min_decomposition

EXIT_OK, EXIT_UNSOLVED, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BOUND = 0, 1, 2, 3, 4

ALGOS = ("rootlts", "lts-sop", "lts-dop", "bfs", "puct")
DOMAINS = ("cluetree", "chain", "dchain", "misleading", "sokoban")
DEFAULT_SCHEME = {
    "cluetree": "clue",
    "chain": "none",
    "dchain": "reward",
    "misleading": "reward",
    "sokoban": "per-count-by-type",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    algo: str = "rootlts"
    domain: str = "cluetree"
    scheme: str | None = None
    budget: int = 1_000_000
    seed: int = 0
    a: int = 4
    q: int = 8
    D: int = 8
    len: int = 9
    alpha: float = 0.5
    depth: int = 6
    level: str | None = None
    c_puct: float = DEFAULT_C_PUCT

    def __post_init__(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {', '.join(ALGOS)}")
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain {self.domain!r}; choose from {', '.join(DOMAINS)}")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")

    @property
    def effective_scheme(self) -> str:
        return self.scheme or DEFAULT_SCHEME[self.domain]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["scheme"] = self.effective_scheme
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        out = {}
        for k, v in d.items():
            out[k] = _coerce(k, v, known[k].type)
        return cls(**out)


def _coerce(key: str, value: Any, typ: Any) -> Any:
    if value is None:
        return None
    t = str(typ)
    try:
        if t.startswith("int"):
            return int(value)
        if t.startswith("float"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return str(value)


def read_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys mirror flag names."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


# --- output -----------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise NumericFault(f"non-finite value {x} in output")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def dumps(obj: Any) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in sorted(obj.items())) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


CSV_COLUMNS = (
    "algo", "domain", "scheme", "seed", "a", "q", "D", "len", "alpha", "depth",
    "solved", "T", "visits", "W_before_T", "input_W_before_T", "clues", "clue1", "clue2", "clue3",
    "peak_queue", "bounds_checked", "bounds_hold", "best_bound",
)


def csv_row(rec: dict) -> dict:
    cfg = rec["config"]
    counts = rec.get("clue_counts", {})
    row = {k: cfg.get(k) for k in ("algo", "domain", "scheme", "seed", "a", "q", "D", "len", "alpha", "depth")}
    row.update(
        solved=rec["solved"],
        T=rec["T"],
        visits=rec["visits"],
        W_before_T=rec.get("W_before_T"),
        input_W_before_T=rec.get("input_W_before_T"),
        clues=counts.get("clue", 0),
        clue1=counts.get("clue1", 0),
        clue2=counts.get("clue2", 0),
        clue3=counts.get("clue3", 0),
        peak_queue=rec.get("peak_queue"),
        bounds_checked=len(rec.get("bounds", [])),
        bounds_hold=rec.get("bounds_hold"),
        best_bound=rec.get("best_bound"),
    )
    return {k: (_fmt_float(v) if isinstance(v, float) else ("" if v is None else v)) for k, v in row.items()}


def write_csv(records: Sequence[dict], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(csv_row(r))


# --- running ----------------------------------------------------------------


def build_env(cfg: ExperimentConfig):
    if cfg.domain == "cluetree":
        return gen_clue_tree(ClueTreeSpec(cfg.a, cfg.q, cfg.seed))
    if cfg.domain == "chain":
        if cfg.len < 0:
            raise ConfigError("len must be >= 0")
        return ChainEnv([1.0] * cfg.len)
    if cfg.domain == "dchain":
        return DChain(cfg.D)
    if cfg.domain == "misleading":
        return MisleadingReward(cfg.alpha, cfg.depth)
    level = cfg.level or SAMPLE_LEVEL
    try:
        return SokobanEnv.from_file(level)
    except OSError as e:
        raise ConfigError(f"cannot read level {level}: {e}") from None


def execute(cfg: ExperimentConfig, timing: bool = False) -> dict:
    """One run plus its applicable bound checks, as a plain record."""
    try:
        env = build_env(cfg)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    rec: dict[str, Any] = {"config": cfg.to_dict()}
    t0 = time.perf_counter()
    if cfg.algo == "puct":
        res = puct_search(env, cfg.c_puct, cfg.budget, cfg.seed)
        rec.update(solved=res.solved, T=res.goal_iteration, visits=res.iterations, peak_queue=res.nodes)
        rec["root_child_visits"] = res.root_child_visits
        rec["bounds"] = []
        rec["bounds_hold"] = res.accounting_ok
    else:
        if cfg.algo == "rootlts":
            try:
                rer = make_rerooter(cfg.effective_scheme, q=cfg.q)
            except ValueError as e:
                raise ConfigError(str(e)) from None
            run = run_search(env, RootedCost(), rer, cfg.budget, cfg.seed)
        elif cfg.algo == "bfs":
            run = bfs_breadth(env, cfg.budget, cfg.seed)
        else:
            run = lts_search(env, cfg.algo[4:], cfg.budget, cfg.seed)
        rec.update(solved=run.solved, T=run.T, visits=run.steps, peak_queue=run.peak_queue)
        rec["clue_counts"] = {k: len(v) for k, v in sorted(run.signal_steps.items())}
        bounds: list[dict] = []
        if run.solved:
            T = run.T
            rec["W_before_T"] = run.cum_weight_before(T)
            if run.input_weights is not None:
                rec["input_W_before_T"] = run.cum_input_before(T)
            if cfg.algo == "rootlts":
                trace = PathTrace.from_run(run)
                reports = check_bounds(trace, robust=run.input_weights is not None)
                bounds = [r.to_dict() for r in reports]
                if reports:
                    rec["best_bound"] = min(r.bound_value for r in reports)
                    rec["min_decomposition"] = list(min_decomposition(trace)[0].steps)
            elif cfg.algo == "lts-sop":
                bad = visit_count_violations(run)
                bounds = [{"kind": "visits-below-cost", "T": T, "holds": not bad, "violations": bad[:10]}]
        rec["bounds"] = bounds
        rec["bounds_hold"] = all(b["holds"] for b in bounds)
    if timing:
        rec["wall_clock_s"] = time.perf_counter() - t0
    return rec


def exit_code(rec: dict) -> int:
    if not rec["bounds_hold"]:
        return EXIT_BOUND
    return EXIT_OK if rec["solved"] else EXIT_UNSOLVED


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands ------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    rec = execute(cfg, timing=args.timing)
    if args.format == "csv":
        buf = io.StringIO()
        write_csv([rec], buf)
        _emit(buf.getvalue(), args.out)
    else:
        _emit(dumps(rec) + "\n", args.out)
    return exit_code(rec)


def _parse_list(text: str | None, conv) -> list:
    if text is None:
        return [None]
    try:
        return [conv(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None


def _parse_seeds(text: str) -> list[int]:
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi)))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad seed range {text!r}") from None


def _bench_task(payload: tuple[dict, bool]) -> dict:
    d, timing = payload
    return execute(ExperimentConfig.from_dict(d), timing)


def cmd_bench(args: argparse.Namespace) -> int:
    base = config_from_args(args, lists=True)
    seeds = _parse_seeds(args.seeds) if args.seeds else [base.seed]
    algos = _parse_list(args.algo or "rootlts", str)
    grid = {
        "a": _parse_list(args.a, int),
        "q": _parse_list(args.q, int),
        "D": _parse_list(args.D, int),
        "alpha": _parse_list(args.alpha, float),
        "depth": _parse_list(args.depth, int),
    }
    cells = [{}]
    for key, vals in grid.items():
        cells = [dict(c, **({key: v} if v is not None else {})) for c in cells for v in vals]
    tasks = []
    for cell in cells:
        for algo in algos:
            for s in seeds:
                cfg = replace(base, algo=algo, seed=s, **cell)
                tasks.append((asdict(cfg), args.timing))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            records = list(ex.map(_bench_task, tasks, chunksize=4))
    else:
        records = [_bench_task(t) for t in tasks]
    summary = summarize(records, algos)
    if args.format == "csv":
        buf = io.StringIO()
        write_csv(records, buf)
        _emit(buf.getvalue(), args.out)
    else:
        _emit("\n".join(dumps(r) for r in records) + "\n", args.out)
    if args.out:
        sys.stdout.write(dumps({"summary": summary}) + "\n")
    else:
        sys.stderr.write(dumps({"summary": summary}) + "\n")
    if not all(r["bounds_hold"] for r in records):
        return EXIT_BOUND
    return EXIT_OK if all(r["solved"] for r in records) else EXIT_UNSOLVED


def summarize(records: Sequence[dict], algos: Sequence[str]) -> list[dict]:
    """Mean/max T per (cell, algo), and median paired ratio against the first algo."""
    keyf = ("domain", "a", "q", "D", "alpha", "depth")
    groups: dict[tuple, dict[str, dict[int, dict]]] = {}
    for r in records:
        c = r["config"]
        groups.setdefault(tuple(c[k] for k in keyf), {}).setdefault(c["algo"], {})[c["seed"]] = r
    out = []
    for key, by_algo in groups.items():
        ref = by_algo.get(algos[0], {})
        for algo, runs in by_algo.items():
            Ts = [r["T"] if r["T"] is not None else r["visits"] for r in runs.values()]
            row = dict(zip(keyf, key))
            row.update(
                algo=algo,
                runs=len(Ts),
                solved=sum(r["solved"] for r in runs.values()),
                mean_T=statistics.fmean(Ts),
                max_T=max(Ts),
            )
            ratios = [
                (runs[s]["T"] or runs[s]["visits"]) / (ref[s]["T"] or ref[s]["visits"])
                for s in runs
                if s in ref
            ]
            if ratios and algo != algos[0]:
                row[f"median_ratio_vs_{algos[0]}"] = statistics.median(ratios)
            out.append(row)
    return out


def cmd_verify(args: argparse.Namespace) -> int:
    from .suites import SUITES, run_suites

    names = list(SUITES) if args.suite == "all" else args.suite.split(",")
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}, all")
    rows = run_suites(names, seed=resolve_seed(args.seed))
    _emit(dumps(rows) + "\n", args.out)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_UNSOLVED


# --- argument handling ------------------------------------------------------


def resolve_seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("ROOTLTS_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"ROOTLTS_SEED must be an integer, got {env!r}") from None


CONFIG_FLAGS = ("algo", "domain", "scheme", "budget", "a", "q", "D", "len", "alpha", "depth", "level", "c_puct")


def config_from_args(args: argparse.Namespace, lists: bool = False) -> ExperimentConfig:
    d: dict[str, Any] = {}
    if getattr(args, "config", None):
        d.update(read_config_file(args.config))
    for k in CONFIG_FLAGS:
        v = getattr(args, k, None)
        if v is None:
            continue
        if lists and isinstance(v, str) and "," in v:
            v = v.split(",")[0]  # grid values are swept separately
        d[k] = v
    seed = getattr(args, "seed", None)
    if seed is not None or "seed" not in d:
        d["seed"] = resolve_seed(seed)
    return ExperimentConfig.from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rootlts", description="Rerooted Levin tree search experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, lists: bool) -> None:
        kind = str if lists else None
        sp.add_argument("--config", help="key = value config file; flags override it")
        sp.add_argument("--algo", type=str if lists else None, choices=None if lists else ALGOS)
        sp.add_argument("--domain", choices=DOMAINS)
        sp.add_argument("--scheme", help="rerooting weight scheme for rootlts")
        sp.add_argument("--budget", type=int, help="maximum visits (or PUCT iterations)")
        sp.add_argument("--seed", type=int, help="run seed (default: $ROOTLTS_SEED or 0)")
        sp.add_argument("--a", type=kind or int, help="clue tree: max relative clue depth")
        sp.add_argument("--q", type=kind or int, help="clue tree: number of clues")
        sp.add_argument("--D", type=kind or int, help="D-chain depth")
        sp.add_argument("--len", type=int, help="chain length")
        sp.add_argument("--alpha", type=kind or float, help="misleading reward value")
        sp.add_argument("--depth", type=kind or int, help="misleading-reward goal depth")
        sp.add_argument("--level", help="XSB level file (sokoban)")
        sp.add_argument("--c-puct", dest="c_puct", type=float)
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--timing", action="store_true", help="include wall-clock seconds (breaks byte-identical output)")

    s = sub.add_parser("solve", help="run one search and check its bounds")
    common(s, lists=False)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="seeded sweep; comma lists allowed for --algo/--a/--q/--D/--alpha/--depth")
    common(b, lists=True)
    b.add_argument("--seeds", help="seed range lo:hi or comma list")
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="run verification suites and print a pass/fail table")
    v.add_argument("suite", nargs="?", default="all", help="suite name, comma list, or 'all'")
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as e:
        sys.stderr.write(f"rootlts: config error: {e}\n")
        return EXIT_CONFIG
    except NumericFault as e:
        sys.stderr.write(f"rootlts: numeric fault: {e}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: ``check`` (invariance audit of a registered operator), ``run``
(metered runs of one algorithm on one problem), ``compare`` (grid comparison
with rank-sum markers), ``search`` (operator matrix search), and
``show-operator`` (piecewise rendering or JSON of a stored operator).

``compare`` and ``search`` accept ``--config FILE`` holding bracketed
sections of ``key = value`` lines ([experiment] and [search] respectively);
explicit flags override config values. Exit codes: 0 success, 1 usage
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autov import (
    EvalConfig,
    MetaConfig,
    OperatorMatrix,
    autov_search,
    parent_set_kind,
    published_operator,
)
from .harness import (
    ConfigurationError,
    ExperimentConfig,
    build_problem,
    compare,
    export,
    parse_problem_spec,
    run_batch,
    trajectories_csv,
)
from .invariance import DEFAULT_TOLERANCE, classify
from .operators import lab_operator
from .records import RunRecord


def _banner(seed: int | None = None) -> None:
    line = f"oplab {__version__}"
    if seed is not None:
        line += f" | master seed {seed}"
    print(line)


def _load_matrix(path: str) -> OperatorMatrix:
    return OperatorMatrix.from_json(Path(path).read_text(encoding="utf-8"))


def _config_section(path: str | None, section: str) -> dict[str, str]:
    if path is None:
        return {}
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path):
        raise ConfigurationError(f"cannot read config file {path!r}")
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))


def _pick(flag, section: dict[str, str], key: str, default, cast):
    if flag is not None:
        return flag
    if key in section:
        return cast(section[key])
    return default


def _split_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _cmd_check(args) -> int:
    _banner(args.seed)
    if args.operator_file is not None:
        operator = lab_operator("autov", matrix=_load_matrix(args.operator_file))
    else:
        operator = args.operator
    report = classify(operator, args.dim, trials=args.trials, seed=args.seed,
                      tolerance=args.tolerance, threads=args.threads)
    rows = [
        ("operator", report.operator),
        ("dimension", str(args.dim)),
        ("trials", str(report.trials)),
        ("tolerance", f"{report.tolerance:.1e}"),
        ("seed", str(args.seed)),
    ]
    for axis in ("translation", "scale", "rotation"):
        verdict = "pass" if getattr(report, axis) else "FAIL"
        rows.append((axis, f"{verdict}   worst residual {report.residuals[axis]:.3e}"))
    width = max(len(k) for k, _ in rows) + 2
    for key, value in rows:
        print(key.ljust(width) + value)
    payload = report.to_json_dict()
    payload["seed"] = args.seed
    print()
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_run(args) -> int:
    _banner(args.seed)
    matrix = _load_matrix(args.operator_file) if args.operator_file else None
    records = run_batch(args.algorithm, args.problem, args.population, args.budget,
                        runs=args.runs, master_seed=args.seed, threads=args.threads,
                        matrix=matrix)
    for record in records:
        print(f"seed {record.seed}: final best {record.final_best:.3e} "
              f"({record.evaluations} evaluations, {record.generations} generations)")
    if len(records) > 1:
        finals = np.array([r.final_best for r in records])
        print(f"mean {finals.mean():.3e}  std {finals.std():.3e}  "
              f"median {np.median(finals):.3e}")
    if args.output:
        for path in export(records, args.output):
            print(f"wrote {path}")
    return 0


def _cmd_compare(args) -> int:
    section = _config_section(args.config, "experiment")
    problems = _pick(_split_list(args.problems) if args.problems else None,
                     section, "problems", None, _split_list)
    algorithms = _pick(_split_list(args.algorithms) if args.algorithms else None,
                       section, "algorithms", None, _split_list)
    if not problems or not algorithms:
        raise ConfigurationError("compare needs problems and algorithms (flags or config)")
    cfg = ExperimentConfig(
        problems=problems,
        algorithms=algorithms,
        population=_pick(args.population, section, "population", 100, int),
        budget=_pick(args.budget, section, "budget", 10100, int),
        runs=_pick(args.runs, section, "runs", 30, int),
        master_seed=_pick(args.seed, section, "master_seed", 0, int),
        reference=_pick(args.reference, section, "reference", None, str),
        threads=_pick(args.threads, section, "threads", 1, int),
        output_dir=_pick(args.output, section, "output", None, str),
    )
    _banner(cfg.master_seed)
    result = compare(cfg)
    print(result.render())
    if cfg.output_dir:
        for path in export(result.records, cfg.output_dir, comparison=result):
            print(f"wrote {path}")
    return 0


def _cmd_search(args) -> int:
    section = _config_section(args.config, "search")
    seed = _pick(args.seed, section, "seed", 0, int)
    threads = _pick(args.threads, section, "threads", 1, int)
    output = _pick(args.output, section, "output", None, str)
    problem_spec = parse_problem_spec(
        _pick(args.problem, section, "problem", "rastrigin:dim=10", str))
    inner = EvalConfig(
        problem=build_problem(problem_spec),
        population=_pick(args.inner_population, section, "inner_population", 30, int),
        generations=_pick(args.inner_generations, section, "inner_generations", 30, int),
        max_run=_pick(args.max_run, section, "max_run", 3, int),
        seed=seed,
    )
    cfg = MetaConfig(
        population=_pick(args.meta_population, section, "meta_population", 20, int),
        generations=_pick(args.meta_generations, section, "meta_generations", 50, int),
        k=_pick(args.rows, section, "rows", 10, int),
        kind=parent_set_kind(_pick(args.kind, section, "kind", "h3", str)),
        eval=inner,
    )
    _banner(seed)
    print(f"searching {cfg.kind.name} x {cfg.k} rows on {problem_spec.canonical} "
          f"(meta {cfg.population}x{cfg.generations}, inner {inner.population}x"
          f"{inner.generations}, max_run {inner.max_run}, threads {threads})")
    best, history = autov_search(cfg, threads=threads)
    print(f"fitness: initial best {history[0]:.3e} -> final best {history[-1]:.3e}")
    print(best.describe())
    if output:
        directory = Path(output)
        directory.mkdir(parents=True, exist_ok=True)
        operator_path = directory / "operator.json"
        operator_path.write_text(best.to_json(), encoding="utf-8")
        print(f"wrote {operator_path}")
        evals_per_score = inner.max_run * inner.population * (inner.generations + 1)
        record = RunRecord(
            algorithm="autov-search",
            problem=problem_spec.canonical,
            seed=seed,
            trajectory=history,
            evaluations=cfg.population * (cfg.generations + 1) * evals_per_score,
        )
        history_path = directory / "search-history.csv"
        history_path.write_text(trajectories_csv((record,)), encoding="utf-8")
        print(f"wrote {history_path}")
    return 0


def _cmd_show_operator(args) -> int:
    matrix = published_operator() if args.published else _load_matrix(args.file)
    if args.json:
        print(matrix.to_json())
    else:
        _banner()
        print(matrix.describe())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oplab",
        description="Variation-operator invariance lab, operator search, and "
                    "benchmark comparison harness.",
    )
    parser.add_argument("--version", action="version", version=f"oplab {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("check", help="audit an operator's invariances")
    p.add_argument("--operator", default="de",
                   help="registry name (sbx, sbx-prime, de, fep, cmaes, pso, cso, "
                        "autov, autov-published)")
    p.add_argument("--operator-file", default=None,
                   help="JSON operator matrix to audit instead of a registry entry")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("run", help="metered runs of one algorithm on one problem")
    p.add_argument("--algorithm", required=True)
    p.add_argument("--problem", required=True, help="e.g. rastrigin:dim=30:translate=6")
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--budget", type=int, default=10100)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--operator-file", default=None,
                   help="operator matrix for the autov algorithm")
    p.add_argument("--output", default=None, help="directory for trajectories.csv")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("compare", help="grid comparison with rank-sum markers")
    p.add_argument("--config", default=None, help="INI file with an [experiment] section")
    p.add_argument("--problems", default=None, help="comma-separated problem specs")
    p.add_argument("--algorithms", default=None, help="comma-separated algorithm names")
    p.add_argument("--reference", default=None)
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", default=None, help="directory for CSV/JSON exports")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("search", help="search for an operator matrix")
    p.add_argument("--config", default=None, help="INI file with a [search] section")
    p.add_argument("--problem", default=None, help="design problem spec")
    p.add_argument("--meta-population", type=int, default=None)
    p.add_argument("--meta-generations", type=int, default=None)
    p.add_argument("--rows", type=int, default=None, help="matrix rows k")
    p.add_argument("--kind", default=None, choices=("h1", "h2", "h3", "h4", "h5"))
    p.add_argument("--inner-population", type=int, default=None)
    p.add_argument("--inner-generations", type=int, default=None)
    p.add_argument("--max-run", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", default=None,
                   help="directory for operator.json and search-history.csv")
    p.set_defaults(handler=_cmd_search)

    p = sub.add_parser("show-operator", help="render a stored operator")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--published", action="store_true",
                        help="the embedded reference operator")
    source.add_argument("--file", default=None, help="operator JSON file")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.set_defaults(handler=_cmd_show_operator)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.handler(args)
    except Exception as err:  # runtime taxonomy: anything past parsing is exit 2
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

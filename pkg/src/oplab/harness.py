"""Experiment orchestration: problem specs, metered runs, comparisons, exports.

A problem spec is a colon-separated string naming a catalog entry and its
setup, e.g. ``rastrigin:dim=30:bounds=-10,10:translate=6:scale=10:rotate=7``.
``dim`` is required; ``bounds`` overrides the catalog box; ``translate``
(scalar added to every coordinate), ``scale``, and ``rotate`` (seed of the
orthogonal matrix, so rotated experiments are replayable) wrap the objective
by substitution in the order written. The canonical spec string is what run
records and exports carry as the problem name.

Budget protocol: the budget counts objective evaluations. Initialization is
charged n evaluations, so population 100 with budget 10100 runs exactly 100
generations. Exports carry this note verbatim.

Every run draws from RandomStream(master_seed, ("run", algorithm, problem,
seed)), so the grid can execute in any order or thread count and still
produce byte-identical exports.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import algorithm_names, run_algorithm
from .autov import OperatorMatrix
from .numerics import RandomStream, random_orthogonal, rank_sum_test
from .problems import (
    Problem,
    make_benchmark,
    rotate_problem,
    scale_problem,
    translate_problem,
)
from .records import RunRecord

PROTOCOL_NOTE = (
    "budget counts objective evaluations; initialization is charged the "
    "population size and the generation count is derived from the remainder"
)

MARKER_BETTER = "+"
MARKER_WORSE = "-"
MARKER_SIMILAR = "≈"

_MARKERS = {"better": MARKER_BETTER, "worse": MARKER_WORSE, "similar": MARKER_SIMILAR}


class CatalogError(LookupError):
    """An algorithm or problem name not present in the registries."""


class ConfigurationError(ValueError):
    """An experiment setup that violates the config invariants."""


@dataclass(frozen=True)
class ProblemSpec:
    """Parsed problem setup; transforms apply in the order listed."""

    name: str
    dimension: int
    bounds: tuple[float, float] | None = None
    transforms: tuple[tuple[str, float], ...] = ()

    @property
    def canonical(self) -> str:
        parts = [self.name, f"dim={self.dimension:g}"]
        if self.bounds is not None:
            parts.append(f"bounds={self.bounds[0]:g},{self.bounds[1]:g}")
        parts += [f"{kind}={value:g}" for kind, value in self.transforms]
        return ":".join(parts)


def parse_problem_spec(text: str) -> ProblemSpec:
    """Parse ``name:dim=D[:bounds=lo,hi][:translate=b][:scale=a][:rotate=s]``."""
    tokens = [t.strip() for t in text.strip().split(":") if t.strip()]
    if not tokens:
        raise ConfigurationError("empty problem spec")
    name, dimension, bounds, transforms = tokens[0], None, None, []
    for token in tokens[1:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ConfigurationError(f"malformed problem spec token {token!r}")
        if key not in ("dim", "bounds", "translate", "scale", "rotate"):
            raise ConfigurationError(f"unknown problem spec key {key!r}")
        try:
            if key == "dim":
                dimension = int(value)
            elif key == "bounds":
                lo, hi = value.split(",")
                bounds = (float(lo), float(hi))
            elif key in ("translate", "scale"):
                transforms.append((key, float(value)))
            else:
                transforms.append((key, float(int(value))))
        except ValueError as err:
            raise ConfigurationError(f"bad value in problem spec token {token!r}") from err
    if dimension is None:
        raise ConfigurationError(f"problem spec {text!r} is missing dim=")
    return ProblemSpec(name, dimension, bounds, tuple(transforms))


def build_problem(spec: ProblemSpec | str) -> Problem:
    """Materialize a spec against the catalog; unknown names are CatalogError."""
    if isinstance(spec, str):
        spec = parse_problem_spec(spec)
    try:
        problem = make_benchmark(spec.name, spec.dimension, bounds=spec.bounds)
    except ValueError as err:
        if "unknown benchmark" in str(err):
            raise CatalogError(str(err)) from None
        raise ConfigurationError(str(err)) from None
    for kind, value in spec.transforms:
        if kind == "translate":
            problem = translate_problem(problem, np.full(spec.dimension, value))
        elif kind == "scale":
            problem = scale_problem(problem, value)
        else:
            m = random_orthogonal(spec.dimension, RandomStream(int(value), ("problem-rotation",)))
            problem = rotate_problem(problem, m)
    return problem


@dataclass(frozen=True)
class ExperimentConfig:
    """A comparison grid: problems x algorithms x run seeds."""

    problems: tuple[str, ...]
    algorithms: tuple[str, ...]
    population: int = 100
    budget: int = 10100
    runs: int = 30
    master_seed: int = 0
    reference: str | None = None
    threads: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.problems or not self.algorithms:
            raise ConfigurationError("need at least one problem and one algorithm")
        if self.runs < 1:
            raise ConfigurationError("runs must be at least 1")
        if self.budget < self.population:
            raise ConfigurationError("budget must be at least the population size")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        known = set(algorithm_names())
        for name in self.algorithms:
            if name not in known:
                raise CatalogError(f"unknown algorithm {name!r}; have {', '.join(sorted(known))}")
        if self.reference is not None and self.reference not in self.algorithms:
            raise ConfigurationError("reference must be one of the listed algorithms")
        for spec in self.problems:
            build_problem(spec)

    @property
    def reference_algorithm(self) -> str:
        return self.reference if self.reference is not None else self.algorithms[0]


def run_single(algorithm: str, problem: ProblemSpec | str, population: int,
               budget: int, master_seed: int = 0, seed: int = 0,
               matrix: OperatorMatrix | None = None) -> RunRecord:
    """One metered run; the record's problem field is the canonical spec."""
    spec = parse_problem_spec(problem) if isinstance(problem, str) else problem
    built = build_problem(spec)
    if budget < population:
        raise ConfigurationError("budget must be at least the population size")
    stream = RandomStream(master_seed, ("run", algorithm, spec.canonical, seed))
    try:
        record = run_algorithm(algorithm, built, population, budget, stream,
                               seed=seed, matrix=matrix)
    except KeyError as err:
        raise CatalogError(str(err)) from None
    return replace(record, problem=spec.canonical)


def run_batch(algorithm: str, problem: ProblemSpec | str, population: int,
              budget: int, runs: int, master_seed: int = 0, threads: int = 1,
              matrix: OperatorMatrix | None = None) -> tuple[RunRecord, ...]:
    """Independent runs over seeds 0..runs-1, in seed order regardless of
    thread count."""
    spec = parse_problem_spec(problem) if isinstance(problem, str) else problem

    def unit(seed: int) -> RunRecord:
        return run_single(algorithm, spec, population, budget, master_seed, seed, matrix)

    if threads == 1:
        return tuple(unit(seed) for seed in range(runs))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return tuple(pool.map(unit, range(runs)))


@dataclass(frozen=True)
class ComparisonCell:
    """Mean/std of final bests plus the rank-sum marker against the
    reference algorithm on the same problem."""

    mean: float
    std: float
    marker: str
    p_value: float

    def rendered(self) -> str:
        return f"{self.mean:.3e} ({self.std:.3e}) {self.marker}"


@dataclass(frozen=True)
class ComparisonResult:
    """Grid outcome: per-cell statistics plus every underlying run record."""

    config: ExperimentConfig
    problems: tuple[str, ...]
    algorithms: tuple[str, ...]
    reference: str
    cells: dict[tuple[str, str], ComparisonCell] = field(compare=False)
    records: tuple[RunRecord, ...] = field(compare=False)

    def summary(self) -> dict[str, dict[str, int]]:
        """Per algorithm, how many problems scored +, -, and ~ vs the
        reference."""
        out: dict[str, dict[str, int]] = {}
        for algorithm in self.algorithms:
            counts = {MARKER_BETTER: 0, MARKER_WORSE: 0, MARKER_SIMILAR: 0}
            for problem in self.problems:
                counts[self.cells[problem, algorithm].marker] += 1
            out[algorithm] = counts
        return out

    def render(self) -> str:
        """Aligned text table, scientific notation with 4 significant digits."""
        width = max(len(p) for p in self.problems + ("problem",)) + 2
        cell_width = max(28, max(len(a) for a in self.algorithms) + 2)
        lines = [
            "".join(["problem".ljust(width)]
                    + [a.ljust(cell_width) for a in self.algorithms]),
        ]
        for problem in self.problems:
            row = [problem.ljust(width)]
            row += [self.cells[problem, a].rendered().ljust(cell_width)
                    for a in self.algorithms]
            lines.append("".join(row))
        summary = self.summary()
        row = [f"+/-/≈ vs {self.reference}".ljust(width)]
        for algorithm in self.algorithms:
            c = summary[algorithm]
            row.append(f"{c[MARKER_BETTER]}/{c[MARKER_WORSE]}/{c[MARKER_SIMILAR]}".ljust(cell_width))
        lines.append("".join(row))
        return "\n".join(lines)


def compare(cfg: ExperimentConfig) -> ComparisonResult:
    """Run the full grid and mark every algorithm against the reference via
    the rank-sum test at alpha = 0.05 on final bests."""
    if len(cfg.algorithms) < 2:
        raise ConfigurationError("a comparison needs at least two algorithms")
    specs = [parse_problem_spec(p) for p in cfg.problems]
    units = [(spec, algorithm, seed)
             for spec in specs
             for algorithm in cfg.algorithms
             for seed in range(cfg.runs)]

    def unit(job: tuple[ProblemSpec, str, int]) -> RunRecord:
        spec, algorithm, seed = job
        return run_single(algorithm, spec, cfg.population, cfg.budget,
                          cfg.master_seed, seed)

    if cfg.threads == 1:
        records = tuple(unit(job) for job in units)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = tuple(pool.map(unit, units))

    collected: dict[tuple[str, str], list[float]] = {}
    for (spec, algorithm, _), record in zip(units, records):
        collected.setdefault((spec.canonical, algorithm), []).append(record.final_best)
    finals = {key: np.asarray(vals) for key, vals in collected.items()}

    reference = cfg.reference_algorithm
    cells = {}
    for spec in specs:
        problem = spec.canonical
        ref_finals = finals[problem, reference]
        for algorithm in cfg.algorithms:
            sample = finals[problem, algorithm]
            test = rank_sum_test(sample, ref_finals)
            cells[problem, algorithm] = ComparisonCell(
                mean=float(sample.mean()),
                std=float(sample.std()),
                marker=_MARKERS[test.decision],
                p_value=float(test.p_value),
            )
    return ComparisonResult(
        config=cfg,
        problems=tuple(s.canonical for s in specs),
        algorithms=cfg.algorithms,
        reference=reference,
        cells=cells,
        records=records,
    )


def trajectories_csv(records: tuple[RunRecord, ...] | list[RunRecord]) -> str:
    """One row per recorded generation; floats use shortest round-trip form
    so identical runs export identical bytes."""
    if not records:
        raise ValueError("no records to export")
    lines = ["generation,best,algorithm,problem,seed"]
    for record in records:
        for generation, best in enumerate(record.trajectory):
            lines.append(
                f"{generation},{float(best)!r},{record.algorithm},{record.problem},{record.seed}"
            )
    return "\n".join(lines) + "\n"


def comparison_csv(result: ComparisonResult) -> str:
    lines = ["problem,algorithm,mean,std,marker"]
    for problem in result.problems:
        for algorithm in result.algorithms:
            cell = result.cells[problem, algorithm]
            lines.append(
                f"{problem},{algorithm},{cell.mean:.3e},{cell.std:.3e},{cell.marker}"
            )
    return "\n".join(lines) + "\n"


def comparison_json(result: ComparisonResult) -> str:
    cfg = result.config
    payload = {
        "format_version": 1,
        "protocol": PROTOCOL_NOTE,
        "population": cfg.population,
        "budget": cfg.budget,
        "runs": cfg.runs,
        "master_seed": cfg.master_seed,
        "reference": result.reference,
        "problems": list(result.problems),
        "algorithms": list(result.algorithms),
        "cells": {
            problem: {
                algorithm: {
                    "mean": result.cells[problem, algorithm].mean,
                    "std": result.cells[problem, algorithm].std,
                    "marker": result.cells[problem, algorithm].marker,
                    "p_value": result.cells[problem, algorithm].p_value,
                }
                for algorithm in result.algorithms
            }
            for problem in result.problems
        },
        "summary": result.summary(),
    }
    return json.dumps(payload, indent=2) + "\n"


def export(records, directory: str | Path, comparison: ComparisonResult | None = None) -> list[Path]:
    """Write trajectories.csv (always) and comparison.csv/.json when a
    comparison is given; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "trajectories.csv"
    path.write_text(trajectories_csv(tuple(records)), encoding="utf-8")
    written.append(path)
    if comparison is not None:
        path = directory / "comparison.csv"
        path.write_text(comparison_csv(comparison), encoding="utf-8")
        written.append(path)
        path = directory / "comparison.json"
        path.write_text(comparison_json(comparison), encoding="utf-8")
        written.append(path)
    return written

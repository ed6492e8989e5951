"""Weighted-sum operator family and the self-referential operator search.

An operator here is a k-row matrix: each row holds Gaussian parameters
(mu_i, sigma_i) for the weights r_2..r_t of a parent set plus a selection
mass p. Applying the operator draws one uniform to pick a row by roulette,
draws r_2..r_t, sets r_1 = 1 - sum(r_2..r_t), and emits the weighted sum of
the inputs. The weight-sum constraint makes the map translation and scale
equivariant for any draws.

The row choice and weights can be drawn once per offspring (the default
realized map; constant weights across dimensions additionally give rotation
equivariance) or redrawn per coordinate (the evaluation EA's mode; the
ensemble then acts like a crossover, recombining parents coordinate-wise,
which is what sustains population diversity and actual convergence).

The search evolves a population of such matrices, generating meta-offspring
with the best matrix found so far — the operator improves itself by applying
itself. Fitness of a matrix is the median final value of a few inner
evolutionary runs on a design problem.

sigma entries are second moments: sampling uses a standard deviation of
sqrt(sigma).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .numerics import RandomStream, median, words_to_gaussian, words_to_uniform
from .operators import VariationOperator
from .problems import Bounds, Problem, make_benchmark
from .records import RunRecord

__all__ = [
    "EvalConfig",
    "InvalidMatrixError",
    "MetaConfig",
    "OperatorMatrix",
    "ParentSetKind",
    "apply_operator",
    "autov_search",
    "convergence_smoke",
    "evaluate_operator",
    "inner_evolve",
    "matrix_operator",
    "parent_set_kind",
    "published_operator",
    "sample_weights",
]

SERIALIZATION_FORMAT = 1


class InvalidMatrixError(ValueError):
    """Matrix violates the box or mass constraints."""


@dataclass(frozen=True)
class ParentSetKind:
    """One of the five fixed input wirings h1..h5.

    inputs lists the operator's input slots in order; x-slots are parents,
    l/u come from the box. t (total inputs) is what the weight vector spans.
    """

    name: str
    inputs: tuple[str, ...]

    @property
    def t(self) -> int:
        return len(self.inputs)

    @property
    def parent_slots(self) -> int:
        return sum(1 for s in self.inputs if s.startswith("x"))

    @property
    def uses_bounds(self) -> bool:
        return "l" in self.inputs


_KINDS = {
    "h1": ParentSetKind("h1", ("x1", "x2")),
    "h2": ParentSetKind("h2", ("x1", "l", "u")),
    "h3": ParentSetKind("h3", ("x1", "x2", "l", "u")),
    "h4": ParentSetKind("h4", ("x1", "x2", "x3")),
    "h5": ParentSetKind("h5", ("x1", "x2", "x3", "l", "u")),
}


def parent_set_kind(name: str) -> ParentSetKind:
    try:
        return _KINDS[name]
    except KeyError:
        raise ValueError(f"unknown parent set {name!r}; one of {sorted(_KINDS)}") from None


@dataclass(frozen=True)
class OperatorMatrix:
    """k rows of ((mu_i, sigma_i) for i=2..t, selection mass p).

    mus, sigmas have shape (k, t-1); ps has shape (k,). Constraints:
    mu in [-1, 1], sigma in [0, 1], p >= 0 with sum(p) > 0.
    """

    kind: ParentSetKind
    mus: np.ndarray
    sigmas: np.ndarray
    ps: np.ndarray

    def __post_init__(self):
        mus = np.atleast_2d(np.asarray(self.mus, dtype=float))
        sigmas = np.atleast_2d(np.asarray(self.sigmas, dtype=float))
        ps = np.atleast_1d(np.asarray(self.ps, dtype=float))
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "ps", ps)
        k, w = mus.shape
        if w != self.kind.t - 1:
            raise InvalidMatrixError(f"{self.kind.name} rows need {self.kind.t - 1} weight pairs, got {w}")
        if sigmas.shape != (k, w) or ps.shape != (k,):
            raise InvalidMatrixError("row shapes disagree")
        if np.any(np.abs(mus) > 1.0) or np.any((sigmas < 0.0) | (sigmas > 1.0)):
            raise InvalidMatrixError("mu must lie in [-1, 1] and sigma in [0, 1]")
        if np.any(ps < 0.0) or float(ps.sum()) <= 0.0:
            raise InvalidMatrixError("selection masses must be nonnegative with positive sum")

    @property
    def k(self) -> int:
        return self.mus.shape[0]

    def branch_thresholds(self) -> np.ndarray:
        """Cumulative normalized selection masses; last entry is 1."""
        c = np.cumsum(self.ps)
        return c / c[-1]

    def flatten(self) -> np.ndarray:
        """Row-major genome [mu_2, sigma_2, ..., mu_t, sigma_t, p] per row."""
        rows = np.empty((self.k, 2 * (self.kind.t - 1) + 1))
        rows[:, 0:-1:2] = self.mus
        rows[:, 1:-1:2] = self.sigmas
        rows[:, -1] = self.ps
        return rows.ravel()

    @classmethod
    def from_genome(cls, kind: ParentSetKind, k: int, genome: np.ndarray) -> "OperatorMatrix":
        width = 2 * (kind.t - 1) + 1
        rows = np.asarray(genome, dtype=float).reshape(k, width)
        return cls(kind, rows[:, 0:-1:2].copy(), rows[:, 1:-1:2].copy(), rows[:, -1].copy())

    def to_json(self) -> str:
        doc = {
            "format_version": SERIALIZATION_FORMAT,
            "kind": self.kind.name,
            "k": self.k,
            "rows": [
                {
                    "mu": [float(v) for v in self.mus[i]],
                    "sigma": [float(v) for v in self.sigmas[i]],
                    "p": float(self.ps[i]),
                }
                for i in range(self.k)
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "OperatorMatrix":
        doc = json.loads(text)
        version = doc.get("format_version")
        if version != SERIALIZATION_FORMAT:
            raise InvalidMatrixError(f"unsupported operator format {version!r}")
        kind = parent_set_kind(doc["kind"])
        rows = doc["rows"]
        if len(rows) != doc["k"]:
            raise InvalidMatrixError("row count disagrees with k")
        mus = np.array([r["mu"] for r in rows], dtype=float)
        sigmas = np.array([r["sigma"] for r in rows], dtype=float)
        ps = np.array([r["p"] for r in rows], dtype=float)
        return cls(kind, mus, sigmas, ps)

    def describe(self) -> str:
        """Human-readable piecewise form with cumulative selection ranges."""
        names = self.inputs_label()
        thresholds = self.branch_thresholds()
        lines = [f"h({', '.join(names)}) with {self.k} branches:"]
        lo = 0.0
        for i in range(self.k):
            terms = [f"(1 - {' - '.join(f'r{j+2}' for j in range(self.kind.t - 1))})*{names[0]}"]
            for j in range(1, self.kind.t):
                terms.append(f"r{j+1}*{names[j]}")
            lines.append(f"  if {lo:.6g} <= p < {thresholds[i]:.6g}:  " + " + ".join(terms))
            for j in range(self.kind.t - 1):
                lines.append(
                    f"      r{j+2} ~ N({self.mus[i, j]:.6g}, {self.sigmas[i, j]:.6g})"
                )
            lo = float(thresholds[i])
        return "\n".join(lines)

    def inputs_label(self) -> tuple[str, ...]:
        return self.kind.inputs


def genome_bounds(kind: ParentSetKind, k: int) -> Bounds:
    """Search box for flattened matrices: mu [-1,1], sigma [0,1], p [0,1]."""
    width = 2 * (kind.t - 1) + 1
    low = np.zeros(width)
    high = np.ones(width)
    low[0:-1:2] = -1.0
    return Bounds(np.tile(low, k), np.tile(high, k))


def sample_weights(mu, sigma, stream: RandomStream) -> np.ndarray:
    """Weight vector (r_1..r_t) from one row; r_1 = 1 - sum of the rest.

    Draws t-1 Gaussians in index order even when sigma = 0, so the draw
    count never depends on the row. The sum constraint holds exactly by
    construction.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    z = stream.gaussian(mu.shape[0])
    rest = mu + np.sqrt(sigma) * z
    return np.concatenate(([1.0 - rest.sum()], rest))


def _select_rows(m: OperatorMatrix, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(m.ps)
    return np.searchsorted(cum, u * cum[-1], side="right").clip(max=m.k - 1)


def _batch_words(count: int, d: int, t: int, per_dimension: bool) -> int:
    return count * d * t if per_dimension else count * t


def _apply_from_words(m: OperatorMatrix, inputs: list[np.ndarray], w: np.ndarray,
                      per_dimension: bool):
    count, d = inputs[0].shape
    t = m.kind.t
    if per_dimension:
        w = w.reshape(count, d, t)
        rows = _select_rows(m, words_to_uniform(w[..., 0].reshape(-1))).reshape(count, d)
        z = words_to_gaussian(w[..., 1:].reshape(-1)).reshape(count, d, t - 1)
    else:
        w = w.reshape(count, t)
        rows = _select_rows(m, words_to_uniform(w[:, 0].copy()))[:, None]
        z = words_to_gaussian(w[:, 1:].reshape(-1)).reshape(count, 1, t - 1)
    rest = m.mus[rows] + np.sqrt(m.sigmas[rows]) * z
    first = 1.0 - rest.sum(axis=-1)
    out = first * inputs[0]
    for j in range(1, t):
        out = out + rest[..., j - 1] * inputs[j]
    return out


def _apply_batch(m: OperatorMatrix, inputs: list[np.ndarray], stream: RandomStream,
                 per_dimension: bool = False):
    """Weighted sums for a whole block of parent sets.

    Constant mode consumes one (count, t) word block — column 0 the roulette
    uniforms, the rest the weight Gaussians — and reuses the weights in every
    dimension. Per-dimension mode consumes (count, D, t) words, re-running
    the roulette and redrawing the weights for each coordinate. Both are
    word-for-word identical to applying the operator sequentially per row.
    """
    count, d = inputs[0].shape
    w = stream.words(_batch_words(count, d, m.kind.t, per_dimension))
    return _apply_from_words(m, inputs, w, per_dimension)


def _gather_inputs(kind: ParentSetKind, parents, bounds: Bounds | None):
    parents = [np.atleast_2d(np.asarray(p, dtype=float)) for p in parents]
    if len(parents) != kind.parent_slots:
        raise ValueError(f"{kind.name} takes {kind.parent_slots} parents, got {len(parents)}")
    if kind.uses_bounds:
        if bounds is None:
            raise ValueError(f"{kind.name} needs bounds")
        count, d = parents[0].shape
        tail = [np.broadcast_to(bounds.lower, (count, d)), np.broadcast_to(bounds.upper, (count, d))]
    else:
        tail = []
    return parents + tail


def apply_operator(m: OperatorMatrix, parents, bounds: Bounds | None, stream: RandomStream,
                   clamp: bool = True, per_dimension: bool = False) -> np.ndarray:
    """One offspring: roulette row pick, weight vector, weighted sum.

    By default one row and one weight vector serve every dimension (t words:
    one uniform, t-1 Gaussians) — the form whose realized map is rotation
    equivariant. With per_dimension=True the roulette and weight draws repeat
    for each coordinate (D*t words), which is how the evaluation EA applies
    the ensemble; that variant mixes parents coordinate-wise and gives up
    rotation equivariance. The offspring is clamped into the box when bounds
    are given; pass clamp=False for the raw map (what the invariance checks
    look at).
    """
    inputs = _gather_inputs(m.kind, [np.asarray(p, dtype=float)[None, :] for p in parents], bounds)
    out = _apply_batch(m, inputs, stream, per_dimension=per_dimension)[0]
    if clamp and bounds is not None:
        out = bounds.clip(out)
    return out


def matrix_operator(m: OperatorMatrix, name: str = "autov") -> VariationOperator:
    """Registry wrapper exposing the pre-clamp realized map."""

    def _fn(parents, bounds, stream):
        return [apply_operator(m, parents, bounds, stream, clamp=False)]

    return VariationOperator(name, m.kind.parent_slots, m.kind.uses_bounds, 1, _fn)


# The ten-branch h3 matrix produced by the search on the separable
# multimodal design problem; the cumulative selection thresholds below are
# the source of truth and row masses are their differences. Branches 1-5 put
# zero weight on the box corners (pure two-parent blends).
_PUBLISHED_THRESHOLDS = (0.219, 0.436, 0.644, 0.802, 0.960, 0.992, 0.997, 0.998, 0.999, 1.0)
_PUBLISHED_ROWS = (
    # (mu2, sigma2, mu3, sigma3, mu4, sigma4)
    (0.4753, 0.0103, 0.0, 0.0, 0.0, 0.0),
    (0.0034, 0.0006, 0.0, 0.0, 0.0, 0.0),
    (0.9999, 0.0072, 0.0, 0.0, 0.0, 0.0),
    (0.9988, 0.0167, 0.0, 0.0, 0.0, 0.0),
    (-0.0070, 0.0056, 0.0, 0.0, 0.0, 0.0),
    (0.7293, 0.8055, 0.0, 0.0014, 0.0, 0.0014),
    (0.0392, 0.3185, 0.0, 0.0351, 0.0, 0.0351),
    (-0.9998, 0.2478, 0.0, 0.0011, 0.0, 0.0011),
    (-0.8547, 0.1174, 0.0, 0.0452, 0.0, 0.0452),
    (-0.5621, 0.1059, 0.0, 0.0003, 0.0, 0.0003),
)


def published_operator() -> OperatorMatrix:
    """The shipped reference operator (kind h3, k = 10)."""
    rows = np.asarray(_PUBLISHED_ROWS)
    masses = np.diff(_PUBLISHED_THRESHOLDS, prepend=0.0)
    return OperatorMatrix(_KINDS["h3"], rows[:, 0::2].copy(), rows[:, 1::2].copy(), masses)


def published_operator_json() -> str:
    """The embedded serialized asset for the reference operator."""
    return published_operator().to_json()


def binary_tournament(values: np.ndarray, shape: tuple[int, ...], stream: RandomStream) -> np.ndarray:
    """Binary tournament index block; fixed 3 words per slot (two candidate
    indices, one tiebreak uniform) so draw accounting is data-independent."""
    n = values.shape[0]
    first = stream.integers(n, shape)
    second = stream.integers(n, shape)
    tie = stream.uniform(shape)
    prefer_first = (values[first] < values[second]) | (
        (values[first] == values[second]) & (tie < 0.5)
    )
    return np.where(prefer_first, first, second)


def _evaluate(problem: Problem, x: np.ndarray, noise: RandomStream | None) -> np.ndarray:
    return problem.evaluate_batch(x, stream=noise)


def inner_evolve(m: OperatorMatrix, problem: Problem, n: int, generations: int,
                 stream: RandomStream, algorithm: str = "autov", seed: int = 0,
                 per_dimension: bool = True) -> RunRecord:
    """Elitist EA driven entirely by the given operator matrix.

    Per generation: binary-tournament parents for each slot, one batched
    operator application for all n offspring, clamp into the box, evaluate,
    then keep the better half of parents plus offspring. The best-so-far
    trajectory starts at the initial population.

    Offspring generation redraws the row choice and weights per coordinate
    (per_dimension=True): the ensemble then recombines parents
    coordinate-wise, which is what keeps population diversity alive — with
    one weight vector per offspring the copy-heavy branches collapse the
    population early and progress freezes.
    """
    if n < 2:
        raise ValueError("population must hold at least two solutions")
    bounds = problem.bounds
    noise = stream.split("noise") if problem.noisy else None
    pop = bounds.sample(stream.split("init"), n)
    values = _evaluate(problem, pop, noise)
    best = float(values.min())
    trajectory = [best]
    evaluations = n
    slots = m.kind.parent_slots
    d = pop.shape[1]
    variation_words = _batch_words(n, d, m.kind.t, per_dimension)
    # Per generation: three tournament word phases (first candidates, second
    # candidates, tiebreaks), then the variation block. Draw values never
    # depend on population data, so the whole run's words come from one call.
    k = n * slots
    per_gen = 3 * k + variation_words
    all_words = stream.split("gens").words(generations * per_gen)
    for gen in range(1, generations + 1):
        w = all_words[(gen - 1) * per_gen : gen * per_gen]
        u = words_to_uniform(w[: 3 * k])
        first = np.minimum((u[:k] * n).astype(np.int64), n - 1).reshape(n, slots)
        second = np.minimum((u[k : 2 * k] * n).astype(np.int64), n - 1).reshape(n, slots)
        tie = u[2 * k : 3 * k].reshape(n, slots)
        prefer = (values[first] < values[second]) | (
            (values[first] == values[second]) & (tie < 0.5)
        )
        picks = np.where(prefer, first, second)
        inputs = _gather_inputs(m.kind, [pop[picks[:, s]] for s in range(slots)], bounds)
        offspring = bounds.clip(_apply_from_words(m, inputs, w[3 * k :], per_dimension))
        off_values = _evaluate(problem, offspring, noise)
        evaluations += n
        merged = np.concatenate([pop, offspring])
        merged_values = np.concatenate([values, off_values])
        keep = np.argsort(merged_values, kind="stable")[:n]
        pop, values = merged[keep], merged_values[keep]
        best = min(best, float(values.min()))
        trajectory.append(best)
    order = np.argsort(values, kind="stable")
    return RunRecord(
        algorithm=algorithm,
        problem=problem.label,
        seed=seed,
        trajectory=np.asarray(trajectory),
        evaluations=evaluations,
        best_solution=pop[order[0]].copy(),
    )


@dataclass(frozen=True)
class EvalConfig:
    """Inner-evaluation budget for scoring one operator matrix."""

    problem: Problem
    population: int = 30
    generations: int = 30
    max_run: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.population % 2:
            raise ValueError("inner population must be even")
        if self.max_run < 1:
            raise ValueError("need at least one run")


def evaluate_operator(m: OperatorMatrix, cfg: EvalConfig, stream: RandomStream) -> float:
    """Median of max_run inner-run finals; the median damps lucky runs."""
    finals = [
        inner_evolve(m, cfg.problem, cfg.population, cfg.generations,
                     stream.split(("run", r))).final_best
        for r in range(cfg.max_run)
    ]
    return median(finals)


@dataclass(frozen=True)
class MetaConfig:
    """Search-level shape: population of matrices and their common layout."""

    population: int = 20
    generations: int = 50
    k: int = 10
    kind: ParentSetKind = _KINDS["h3"]
    eval: EvalConfig = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one row")
        if self.population < 2:
            raise ValueError("meta population must hold at least two matrices")
        if self.eval is None:
            object.__setattr__(self, "eval", EvalConfig(make_benchmark("rastrigin", 10)))


def _decode_fitness(cfg: MetaConfig, genome: np.ndarray, stream: RandomStream) -> float:
    try:
        m = OperatorMatrix.from_genome(cfg.kind, cfg.k, genome)
    except InvalidMatrixError:
        return float("inf")
    return evaluate_operator(m, cfg.eval, stream)


def autov_search(cfg: MetaConfig, stream: RandomStream | None = None,
                 threads: int = 1) -> tuple[OperatorMatrix, np.ndarray]:
    """Self-referential search for an operator matrix.

    Meta-offspring are produced by applying the best matrix found so far to
    tournament-picked meta-parents, with the flattened-matrix search box
    supplying l and u for bound-using kinds. Every fitness evaluation runs on
    a stream split by (generation, individual), so results are bitwise
    independent of evaluation parallelism. Returns the best matrix and the
    per-generation best-fitness history (index 0 = initial population).
    """
    if stream is None:
        stream = RandomStream(cfg.eval.seed, path=("autov-search",))
    box = genome_bounds(cfg.kind, cfg.k)
    pop = box.sample(stream.split("init"), cfg.population)

    def score(generation: int, genomes: np.ndarray) -> np.ndarray:
        streams = [stream.split(("eval", generation, i)) for i in range(genomes.shape[0])]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                vals = list(pool.map(lambda gi: _decode_fitness(cfg, genomes[gi[0]], gi[1]),
                                     enumerate(streams)))
        else:
            vals = [_decode_fitness(cfg, genomes[i], s) for i, s in enumerate(streams)]
        return np.asarray(vals)

    values = score(0, pop)
    best_idx = int(np.argmin(values))
    history = [float(values[best_idx])]

    for gen in range(1, cfg.generations + 1):
        g = stream.split(("meta", gen))
        best_matrix = OperatorMatrix.from_genome(cfg.kind, cfg.k, pop[int(np.argmin(values))])
        slots = cfg.kind.parent_slots
        picks = binary_tournament(values, (cfg.population, slots), g)
        inputs = _gather_inputs(cfg.kind, [pop[picks[:, s]] for s in range(slots)], box)
        offspring = box.clip(_apply_batch(best_matrix, inputs, g, per_dimension=True))
        off_values = score(gen, offspring)
        merged = np.concatenate([pop, offspring])
        merged_values = np.concatenate([values, off_values])
        keep = np.argsort(merged_values, kind="stable")[: cfg.population]
        pop, values = merged[keep], merged_values[keep]
        history.append(float(values.min()))

    best = OperatorMatrix.from_genome(cfg.kind, cfg.k, pop[int(np.argmin(values))])
    return best, np.asarray(history)


def convergence_smoke(m: OperatorMatrix, stream: RandomStream | None = None, seed: int = 0) -> bool:
    """Weak convergence witness: 2-D sphere, 50x500 budget, 20 restarts.

    Passes when at least 18 restarts reach below 1e-2. Operators with no
    variation at all (every sigma zero, weights concentrated on the first
    parent) leave the population at its initialization and fail.
    """
    if stream is None:
        stream = RandomStream(seed, path=("smoke",))
    problem = make_benchmark("sphere", 2)
    hits = 0
    for s in range(20):
        rec = inner_evolve(m, problem, 50, 500, stream.split(("restart", s)))
        hits += rec.final_best < 1e-2
    return hits >= 18

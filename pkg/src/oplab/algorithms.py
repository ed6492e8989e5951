"""Budget-metered optimizer drivers for the comparison harness.

Every driver takes (problem, population, budget, stream) and returns a
RunRecord whose `evaluations` field equals the exact number of objective
calls made, including noisy re-evaluations. The budget is an evaluation
count: initialization is charged n evaluations and the generation count is
derived from what remains, so `budget == population` yields an
initialization-only record.

All randomness comes from three substreams of the driver's stream:
"init" (uniform population), "noise" (noisy objectives), and "gens"
(everything the generation loop draws, in the documented per-generation
order). Draw counts never depend on population values, so paired runs stay
aligned and records are reproducible bit-for-bit.

Per-generation draw orders from the "gens" substream:

- sbx / sbx-prime: tournament indices+tiebreaks (3n words), crossover
  spread uniforms (n/2 x D), mutation gate + perturbation uniforms
  (2 x n x D).
- de: three distinct-partner index blocks (n words each), crossover fill
  positions (n words), crossover gate uniforms (n x D).
- fep: lognormal global Gaussians (n), offspring Gaussians (n x D),
  deviation Gaussians (n x D).
- cmaes: one (n x D) Gaussian block via cmaes_ask.
- pso: two (n x D) uniform blocks via pso_step.
- cso: pairing uniforms (n) plus three (n/2 x D) uniform blocks via
  cso_step.
- autov / autov-published: delegated to inner_evolve, which documents its
  own fused layout.
"""

from __future__ import annotations

import numpy as np

from .autov import OperatorMatrix, binary_tournament, inner_evolve, published_operator
from .numerics import RandomStream
from .operators import (
    CovarianceDegeneracyError,
    DEParams,
    SBXParams,
    SwarmState,
    cmaes_ask,
    cmaes_init,
    cmaes_tell,
    cso_step,
    polynomial_mutation_batch,
    pso_step,
    sbx_batch,
    sbx_prime_batch,
)
from .problems import Problem
from .records import RunRecord


class _MeteredObjective:
    """Counts every objective call so records report true evaluation usage."""

    def __init__(self, problem: Problem, stream: RandomStream):
        self._problem = problem
        self._noise = stream.split("noise") if problem.noisy else None
        self.count = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.count += x.shape[0]
        return self._problem.evaluate_batch(x, stream=self._noise)


def _generations(budget: int, population: int, per_generation: int) -> int:
    if budget < population:
        raise ValueError("budget must cover initialization of the whole population")
    return (budget - population) // per_generation


def _record(algorithm: str, problem: Problem, seed: int, trajectory: list[float],
            evaluate: _MeteredObjective, best_solution: np.ndarray) -> RunRecord:
    return RunRecord(
        algorithm=algorithm,
        problem=problem.label,
        seed=seed,
        trajectory=np.asarray(trajectory),
        evaluations=evaluate.count,
        best_solution=np.asarray(best_solution, dtype=float).copy(),
    )


def run_ga(problem: Problem, population: int, budget: int, stream: RandomStream,
           seed: int = 0, prime: bool = False) -> RunRecord:
    """Real-coded GA: binary tournament, simulated binary crossover at
    probability 1, polynomial mutation at rate 1/D with index 20, and a
    top-half elitist merge. prime=True swaps in the origin-biased crossover
    variant."""
    if population < 2 or population % 2:
        raise ValueError("population must be even and at least 2")
    bounds = problem.bounds
    d = problem.dimension
    params = SBXParams(eta=20.0, crossover_prob=1.0)
    crossover = sbx_prime_batch if prime else sbx_batch
    evaluate = _MeteredObjective(problem, stream)

    pop = bounds.sample(stream.split("init"), population)
    values = evaluate(pop)
    best = float(values.min())
    best_x = pop[int(np.argmin(values))].copy()
    trajectory = [best]
    g = stream.split("gens")
    for _ in range(_generations(budget, population, population)):
        pool = binary_tournament(values, (population,), g)
        o1, o2 = crossover(pop[pool[0::2]], pop[pool[1::2]], params, g)
        offspring = np.empty((population, d))
        offspring[0::2], offspring[1::2] = o1, o2
        offspring = polynomial_mutation_batch(
            bounds.clip(offspring), bounds, 1.0 / d, 20.0, g
        )
        off_values = evaluate(offspring)
        merged = np.concatenate([pop, offspring])
        merged_values = np.concatenate([values, off_values])
        keep = np.argsort(merged_values, kind="stable")[:population]
        pop, values = merged[keep], merged_values[keep]
        if float(values[0]) < best:
            best = float(values[0])
            best_x = pop[0].copy()
        trajectory.append(best)
    return _record("sbx-prime" if prime else "sbx", problem, seed, trajectory,
                   evaluate, best_x)


def _distinct_partners(targets: np.ndarray, n: int, stream: RandomStream) -> tuple[np.ndarray, ...]:
    """Three mutually distinct partner indices per target, none equal to the
    target, from exactly three n-word index blocks (no rejection loops)."""
    picks = []
    taken = targets[:, None]
    for k in range(3):
        raw = stream.integers(n - 1 - k, n)
        exclude = np.sort(taken, axis=1)
        for j in range(exclude.shape[1]):
            raw = raw + (raw >= exclude[:, j])
        picks.append(raw)
        taken = np.concatenate([taken, raw[:, None]], axis=1)
    return tuple(picks)


def run_de(problem: Problem, population: int, budget: int, stream: RandomStream,
           seed: int = 0, params: DEParams | None = None) -> RunRecord:
    """DE/rand/1/bin: x_r1 + F(x_r2 - x_r3) with binomial crossover and
    greedy one-to-one replacement. Partners are mutually distinct and differ
    from the target."""
    if population < 4:
        raise ValueError("rand/1 mutation needs at least four solutions")
    params = params or DEParams()
    bounds = problem.bounds
    d = problem.dimension
    evaluate = _MeteredObjective(problem, stream)

    pop = bounds.sample(stream.split("init"), population)
    values = evaluate(pop)
    best = float(values.min())
    best_x = pop[int(np.argmin(values))].copy()
    trajectory = [best]
    g = stream.split("gens")
    targets = np.arange(population)
    for _ in range(_generations(budget, population, population)):
        r1, r2, r3 = _distinct_partners(targets, population, g)
        mutant = pop[r1] + params.f * (pop[r2] - pop[r3])
        fill = g.integers(d, population)
        gate = g.uniform((population, d))
        take = (gate < params.cr) | (np.arange(d)[None, :] == fill[:, None])
        trial = bounds.clip(np.where(take, mutant, pop))
        trial_values = evaluate(trial)
        better = trial_values <= values
        pop = np.where(better[:, None], trial, pop)
        values = np.where(better, trial_values, values)
        if float(values.min()) < best:
            best = float(values.min())
            best_x = pop[int(np.argmin(values))].copy()
        trajectory.append(best)
    return _record("de", problem, seed, trajectory, evaluate, best_x)


def run_fep(problem: Problem, population: int, budget: int, stream: RandomStream,
            seed: int = 0, initial_eta: float = 3.0) -> RunRecord:
    """Self-adaptive evolutionary programming: offspring x + eta*z with the
    parent's current deviations, lognormal deviation update, top-half
    elitist merge over parents plus offspring."""
    if population < 2:
        raise ValueError("population must hold at least two solutions")
    bounds = problem.bounds
    d = problem.dimension
    tau = 1.0 / np.sqrt(2.0 * np.sqrt(d))
    tau_prime = 1.0 / np.sqrt(2.0 * d)
    evaluate = _MeteredObjective(problem, stream)

    pop = bounds.sample(stream.split("init"), population)
    eta = np.full((population, d), float(initial_eta))
    values = evaluate(pop)
    best = float(values.min())
    best_x = pop[int(np.argmin(values))].copy()
    trajectory = [best]
    g = stream.split("gens")
    for _ in range(_generations(budget, population, population)):
        z0 = g.gaussian(population)
        zx = g.gaussian((population, d))
        ze = g.gaussian((population, d))
        offspring = bounds.clip(pop + eta * zx)
        new_eta = eta * np.exp(tau_prime * z0[:, None] + tau * ze)
        off_values = evaluate(offspring)
        merged = np.concatenate([pop, offspring])
        merged_eta = np.concatenate([eta, new_eta])
        merged_values = np.concatenate([values, off_values])
        keep = np.argsort(merged_values, kind="stable")[:population]
        pop, eta, values = merged[keep], merged_eta[keep], merged_values[keep]
        if float(values[0]) < best:
            best = float(values[0])
            best_x = pop[0].copy()
        trajectory.append(best)
    return _record("fep", problem, seed, trajectory, evaluate, best_x)


def run_cmaes(problem: Problem, population: int, budget: int, stream: RandomStream,
              seed: int = 0) -> RunRecord:
    """Covariance matrix adaptation started from the best of an evaluated
    uniform sample. Offspring are clipped into the box for evaluation while
    the strategy update sees the unclipped steps; a degenerate covariance
    restarts the shape from the current mean."""
    if population < 2:
        raise ValueError("sampling needs at least two offspring")
    bounds = problem.bounds
    evaluate = _MeteredObjective(problem, stream)

    pop = bounds.sample(stream.split("init"), population)
    values = evaluate(pop)
    best = float(values.min())
    best_x = pop[int(np.argmin(values))].copy()
    trajectory = [best]
    state = cmaes_init(best_x, bounds, population)
    g = stream.split("gens")
    for _ in range(_generations(budget, population, population)):
        x, y = cmaes_ask(state, population, g)
        batch_values = evaluate(bounds.clip(x))
        order = np.argsort(batch_values, kind="stable")
        try:
            state = cmaes_tell(state, y, order)
        except CovarianceDegeneracyError as err:
            state = err.reset_state
        lead = int(order[0])
        if float(batch_values[lead]) < best:
            best = float(batch_values[lead])
            best_x = bounds.clip(x[lead]).copy()
        trajectory.append(best)
    return _record("cmaes", problem, seed, trajectory, evaluate, best_x)


def run_pso(problem: Problem, population: int, budget: int, stream: RandomStream,
            seed: int = 0) -> RunRecord:
    """Inertia-weight particle swarm (w=0.4, c1=c2=2.0) started at rest."""
    if population < 2:
        raise ValueError("a swarm needs at least two particles")
    bounds = problem.bounds
    evaluate = _MeteredObjective(problem, stream)

    positions = bounds.sample(stream.split("init"), population)
    values = evaluate(positions)
    lead = int(np.argmin(values))
    state = SwarmState(
        positions=positions,
        velocities=np.zeros_like(positions),
        values=values,
        pbest_positions=positions.copy(),
        pbest_values=values.copy(),
        gbest_position=positions[lead].copy(),
        gbest_value=float(values[lead]),
    )
    trajectory = [state.gbest_value]
    g = stream.split("gens")
    for _ in range(_generations(budget, population, population)):
        state = pso_step(state, evaluate, bounds, g)
        trajectory.append(state.gbest_value)
    return _record("pso", problem, seed, trajectory, evaluate, state.gbest_position)


def run_cso(problem: Problem, population: int, budget: int, stream: RandomStream,
            seed: int = 0) -> RunRecord:
    """Competitive swarm optimizer (social factor 0.1): each generation
    re-evaluates only the n/2 pairwise losers."""
    if population < 2 or population % 2:
        raise ValueError("competitive swarm needs an even population")
    bounds = problem.bounds
    evaluate = _MeteredObjective(problem, stream)

    positions = bounds.sample(stream.split("init"), population)
    values = evaluate(positions)
    state = SwarmState(
        positions=positions,
        velocities=np.zeros_like(positions),
        values=values,
    )
    best = float(values.min())
    best_x = positions[int(np.argmin(values))].copy()
    trajectory = [best]
    g = stream.split("gens")
    for _ in range(_generations(budget, population, population // 2)):
        state = cso_step(state, evaluate, bounds, g)
        lead = int(np.argmin(state.values))
        if float(state.values[lead]) < best:
            best = float(state.values[lead])
            best_x = state.positions[lead].copy()
        trajectory.append(best)
    return _record("cso", problem, seed, trajectory, evaluate, best_x)


def run_autov(problem: Problem, population: int, budget: int, stream: RandomStream,
              seed: int = 0, matrix: OperatorMatrix | None = None,
              algorithm: str = "autov") -> RunRecord:
    """Weighted-sum-operator EA; defaults to the embedded reference matrix."""
    generations = _generations(budget, population, population)
    m = matrix if matrix is not None else published_operator()
    return inner_evolve(m, problem, population, generations, stream,
                        algorithm=algorithm, seed=seed)


def _run_autov_published(problem, population, budget, stream, seed=0):
    return run_autov(problem, population, budget, stream, seed=seed,
                     matrix=published_operator(), algorithm="autov-published")


_DRIVERS = {
    "sbx": run_ga,
    "sbx-prime": lambda *a, **kw: run_ga(*a, prime=True, **kw),
    "de": run_de,
    "fep": run_fep,
    "cmaes": run_cmaes,
    "pso": run_pso,
    "cso": run_cso,
    "autov": run_autov,
    "autov-published": _run_autov_published,
}


def algorithm_names() -> tuple[str, ...]:
    return tuple(_DRIVERS)


def run_algorithm(name: str, problem: Problem, population: int, budget: int,
                  stream: RandomStream, seed: int = 0,
                  matrix: OperatorMatrix | None = None) -> RunRecord:
    """Dispatch one metered run. matrix only applies to the "autov" entry."""
    try:
        driver = _DRIVERS[name]
    except KeyError:
        raise KeyError(f"unknown algorithm {name!r}; have {', '.join(_DRIVERS)}") from None
    if name == "autov" and matrix is not None:
        return run_autov(problem, population, budget, stream, seed=seed, matrix=matrix)
    return driver(problem, population, budget, stream, seed=seed)

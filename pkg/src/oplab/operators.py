"""Reference variation operators behind one uniform interface.

Two views of the same operators live here: the raw per-call functions used by
the algorithm drivers (sbx, de_mutate, fep_mutate, ...), and a registry of
`VariationOperator` wrappers exposing each operator's realized map
(parents, bounds, stream) -> offspring with a fixed, documented draw order,
which is what the invariance checks exercise.

Draw orders (one 64-bit word per uniform/Gaussian draw):
  sbx                3D + 1 uniforms (spread, sign, variable gate, pair gate)
  sbx-prime          D uniforms (one spread factor per dimension)
  de                 none (deterministic difference)
  fep                D Gaussians (perturbation at the initial deviation 3)
  cmaes              D Gaussians (sampling map at the initial step 0.6(u-l))
  pso                D + D uniforms (cognitive then social coefficients)
  cso                D + D + D uniforms (velocity, winner pull, mean pull)
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .numerics import RandomStream
from .problems import Bounds

__all__ = [
    "CMAESState",
    "CovarianceDegeneracyError",
    "DEParams",
    "SBXParams",
    "SwarmState",
    "VariationOperator",
    "cmaes_ask",
    "cmaes_init",
    "cmaes_tell",
    "cso_step",
    "de_crossover",
    "de_mutate",
    "fep_mutate",
    "lab_operator",
    "lab_operator_names",
    "polynomial_mutation",
    "pso_step",
    "sbx",
    "sbx_prime",
    "registry_names",
]


@dataclass(frozen=True)
class SBXParams:
    """Simulated binary crossover settings; eta is the distribution index."""

    eta: float = 20.0
    crossover_prob: float = 1.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("distribution index must be nonnegative")


@dataclass(frozen=True)
class DEParams:
    f: float = 0.5
    cr: float = 0.9


def _spread_factor(u: np.ndarray, eta: float) -> np.ndarray:
    exp = 1.0 / (eta + 1.0)
    return np.where(u <= 0.5, (2.0 * u) ** exp, (0.5 / (1.0 - u)) ** exp)


def sbx_batch(x1, x2, params: SBXParams, stream: RandomStream):
    """SBX on stacked parent pairs; rows are pairs.

    Follows the standard real-coded convention: per variable the spread
    factor carries a random sign and is reset to 1 (that variable copied
    from the parents) half the time; whole pairs skip crossover with
    probability 1 - crossover_prob. Draw order: spread uniforms (pairs x D),
    sign uniforms (pairs x D), variable gates (pairs x D), pair gates
    (pairs). All blocks are drawn even when the gates end up idle.
    """
    u = stream.uniform(x1.shape)
    beta = _spread_factor(u, params.eta)
    beta = np.where(stream.uniform(x1.shape) < 0.5, beta, -beta)
    beta = np.where(stream.uniform(x1.shape) < 0.5, 1.0, beta)
    pair_gate = stream.uniform(x1.shape[0])
    beta = np.where((pair_gate < params.crossover_prob)[:, None], beta, 1.0)
    o1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2)
    o2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2)
    return o1, o2


def sbx(x1, x2, params: SBXParams, stream: RandomStream):
    """Offspring pair 0.5[(1 +- beta) x1 + (1 -+ beta) x2], one beta per dim."""
    x1, x2 = _check_pair(x1, x2)
    o1, o2 = sbx_batch(x1[None, :], x2[None, :], params, stream)
    return o1[0], o2[0]


def sbx_prime_batch(x1, x2, params: SBXParams, stream: RandomStream):
    u = stream.uniform(x1.shape)
    beta = _spread_factor(u, params.eta)
    diff = x2 - x1
    o1 = 0.1 * x1 + 0.5 * (1.0 + beta) * diff
    o2 = 0.1 * x1 + 0.5 * (1.0 - beta) * diff
    return o1, o2


def sbx_prime(x1, x2, params: SBXParams, stream: RandomStream):
    """The origin-biased SBX variant 0.1 x1 + 0.5(1 +- beta)(x2 - x1).

    Deliberately translation-variant; it drifts populations toward 0.
    """
    x1, x2 = _check_pair(x1, x2)
    o1, o2 = sbx_prime_batch(x1[None, :], x2[None, :], params, stream)
    return o1[0], o2[0]


def _check_pair(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError("parent dimensions differ")
    return x1, x2


def polynomial_mutation_batch(x, bounds: Bounds, pm: float, eta: float, stream: RandomStream):
    """Bounded polynomial mutation on population rows.

    Fixed draw cost: one gate uniform plus one perturbation uniform per entry
    (the perturbation draw happens whether or not the gate fires), so draw
    accounting does not depend on the data.
    """
    gate = stream.uniform(x.shape)
    u = stream.uniform(x.shape)
    lo, hi = bounds.lower, bounds.upper
    width = hi - lo
    d1 = (x - lo) / width
    d2 = (hi - x) / width
    power = 1.0 / (eta + 1.0)
    low = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)) ** power - 1.0
    high = 1.0 - (2.0 * (1.0 - u) + (2.0 * u - 1.0) * (1.0 - d2) ** (eta + 1.0)) ** power
    delta = np.where(u <= 0.5, low, high)
    mutated = np.clip(x + delta * width, lo, hi)
    return np.where(gate < pm, mutated, x)


def polynomial_mutation(x, bounds: Bounds, pm: float, eta: float, stream: RandomStream):
    x = np.asarray(x, dtype=float)
    return polynomial_mutation_batch(x[None, :], bounds, pm, eta, stream)[0]


def de_mutate(x1, x2, x3, f: float):
    """x1 + F (x2 - x3); deterministic, equivariant under translation, scale,
    and rotation."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    if not x1.shape == x2.shape == x3.shape:
        raise ValueError("parent dimensions differ")
    return x1 + f * (x2 - x3)


def de_crossover(target, mutant, cr: float, stream: RandomStream):
    """Binomial crossover; draws one guaranteed index, then D gate uniforms."""
    target, mutant = _check_pair(target, mutant)
    d = target.shape[-1]
    jrand = stream.integers(d)
    u = stream.uniform(d)
    take = (u < cr) | (np.arange(d) == jrand)
    return np.where(take, mutant, target)


def fep_mutate(x, eta, stream: RandomStream, tau: float | None = None, tau_prime: float | None = None):
    """Gaussian self-adaptive mutation: offspring x + eta*z, then the
    deviations update by the lognormal rule.

    Draw order: one global Gaussian, D offspring Gaussians, D deviation
    Gaussians. Returns (offspring, new_eta).
    """
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("deviations must be positive")
    d = x.shape[-1]
    if tau is None:
        tau = 1.0 / np.sqrt(2.0 * np.sqrt(d))
    if tau_prime is None:
        tau_prime = 1.0 / np.sqrt(2.0 * d)
    z0 = stream.gaussian()
    zx = stream.gaussian(d)
    ze = stream.gaussian(d)
    offspring = x + eta * zx
    new_eta = eta * np.exp(tau_prime * z0 + tau * ze)
    return offspring, new_eta


class CovarianceDegeneracyError(RuntimeError):
    """Covariance update left the positive-definite cone.

    Carries a usable continuation: the same state with the covariance reset
    to the identity and the evolution paths cleared.
    """

    def __init__(self, reset_state: "CMAESState"):
        super().__init__("covariance matrix lost positive-definiteness; state reset to diagonal")
        self.reset_state = reset_state


@dataclass(frozen=True)
class CMAESState:
    """Evolution-strategy state with a per-coordinate step envelope.

    sigma is the fixed 0.6(u - l) envelope; step is the scalar multiplier the
    path length rule adapts. Keeping the envelope separate makes the sampling
    map scale with the box exactly.
    """

    mean: np.ndarray
    sigma: np.ndarray
    step: float
    cov: np.ndarray
    eig_vectors: np.ndarray
    eig_scales: np.ndarray
    p_sigma: np.ndarray
    p_cov: np.ndarray
    weights: np.ndarray
    mu: int
    generation: int
    c_sigma: float = 0.15
    d_sigma: float = 1.15
    c_c: float = 0.105


def cmaes_init(mean, bounds: Bounds, lam: int) -> CMAESState:
    """Fresh state centered at mean with the 0.6(u-l) envelope and weights
    log(mu + 0.5) - log(i) over the better half."""
    if lam < 2:
        raise ValueError("offspring count must be >= 2")
    mean = np.asarray(mean, dtype=float)
    d = mean.size
    mu = max(1, int(0.5 * lam))
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    return CMAESState(
        mean=mean,
        sigma=0.6 * bounds.width,
        step=1.0,
        cov=np.eye(d),
        eig_vectors=np.eye(d),
        eig_scales=np.ones(d),
        p_sigma=np.zeros(d),
        p_cov=np.zeros(d),
        weights=raw / raw.sum(),
        mu=mu,
        generation=0,
    )


def cmaes_ask(state: CMAESState, lam: int, stream: RandomStream):
    """Sample lam offspring mean + step*sigma*(B diag(d) z); draws row-major.

    Returns (offspring, y) where y holds the unscaled steps tell needs.
    """
    z = stream.gaussian((lam, state.mean.size))
    y = z @ (state.eig_vectors * state.eig_scales).T
    x = state.mean + state.step * state.sigma * y
    return x, y


def cmaes_tell(state: CMAESState, y: np.ndarray, order: np.ndarray) -> CMAESState:
    """Rank-based update of mean, step multiplier, and covariance.

    order lists offspring indices best-first. Raises
    CovarianceDegeneracyError when the updated covariance is no longer
    positive definite; the error carries the diagonal-reset state.
    """
    d = state.mean.size
    w = state.weights
    mu_eff = 1.0 / float(np.sum(w**2))
    c1 = 2.0 / ((d + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0) ** 2 + mu_eff))
    chi_n = np.sqrt(d) * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d))

    elite = y[order[: state.mu]]
    y_w = w @ elite
    new_mean = state.mean + state.step * state.sigma * y_w

    inv_sqrt = state.eig_vectors / state.eig_scales @ state.eig_vectors.T
    cs = state.c_sigma
    p_sigma = (1.0 - cs) * state.p_sigma + np.sqrt(cs * (2.0 - cs) * mu_eff) * (inv_sqrt @ y_w)
    step = state.step * np.exp(cs / state.d_sigma * (np.linalg.norm(p_sigma) / chi_n - 1.0))

    gen = state.generation + 1
    norm_scale = np.sqrt(1.0 - (1.0 - cs) ** (2 * gen))
    h_sigma = 1.0 if np.linalg.norm(p_sigma) / norm_scale < (1.4 + 2.0 / (d + 1.0)) * chi_n else 0.0
    cc = state.c_c
    p_cov = (1.0 - cc) * state.p_cov + h_sigma * np.sqrt(cc * (2.0 - cc) * mu_eff) * y_w
    delta_h = (1.0 - h_sigma) * cc * (2.0 - cc)

    rank_mu = (elite * w[:, None]).T @ elite
    cov = (
        (1.0 - c1 - c_mu) * state.cov
        + c1 * (np.outer(p_cov, p_cov) + delta_h * state.cov)
        + c_mu * rank_mu
    )
    cov = 0.5 * (cov + cov.T)

    new_state = replace(
        state,
        mean=new_mean,
        step=float(step),
        cov=cov,
        p_sigma=p_sigma,
        p_cov=p_cov,
        generation=gen,
    )
    if not np.all(np.isfinite(cov)) or not np.isfinite(step) or step <= 0:
        raise CovarianceDegeneracyError(_diagonal_reset(new_state))
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval[0] <= 0 or not np.all(np.isfinite(eigval)):
        raise CovarianceDegeneracyError(_diagonal_reset(new_state))
    return replace(new_state, eig_vectors=eigvec, eig_scales=np.sqrt(eigval))


def _diagonal_reset(state: CMAESState) -> CMAESState:
    d = state.mean.size
    return replace(
        state,
        step=1.0,
        cov=np.eye(d),
        eig_vectors=np.eye(d),
        eig_scales=np.ones(d),
        p_sigma=np.zeros(d),
        p_cov=np.zeros(d),
    )


@dataclass(frozen=True)
class SwarmState:
    """Particle swarm contents shared by the inertia and competitive variants.

    The competitive variant leaves the personal/global best fields unused.
    """

    positions: np.ndarray
    velocities: np.ndarray
    values: np.ndarray
    pbest_positions: np.ndarray | None = None
    pbest_values: np.ndarray | None = None
    gbest_position: np.ndarray | None = None
    gbest_value: float | None = None
    inertia: float = 0.4
    cognitive: float = 2.0
    social: float = 2.0
    phi: float = 0.1


def pso_step(state: SwarmState, evaluate_fn, bounds: Bounds, stream: RandomStream) -> SwarmState:
    """Inertia-weight velocity update; draws two (n, D) uniform blocks."""
    x, v = state.positions, state.velocities
    r1 = stream.uniform(x.shape)
    r2 = stream.uniform(x.shape)
    v = (
        state.inertia * v
        + state.cognitive * r1 * (state.pbest_positions - x)
        + state.social * r2 * (state.gbest_position - x)
    )
    x = bounds.clip(x + v)
    values = evaluate_fn(x)
    improved = values < state.pbest_values
    pbest_positions = np.where(improved[:, None], x, state.pbest_positions)
    pbest_values = np.where(improved, values, state.pbest_values)
    best = int(np.argmin(pbest_values))
    return replace(
        state,
        positions=x,
        velocities=v,
        values=values,
        pbest_positions=pbest_positions,
        pbest_values=pbest_values,
        gbest_position=pbest_positions[best].copy(),
        gbest_value=float(pbest_values[best]),
    )


def cso_step(state: SwarmState, evaluate_fn, bounds: Bounds, stream: RandomStream) -> SwarmState:
    """Pairwise competition: losers move toward winners and the swarm mean.

    Draws n pairing uniforms, then three (n/2, D) blocks for the loser
    update. Winners pass through bitwise unchanged; only losers are
    re-evaluated.
    """
    n, d = state.positions.shape
    if n % 2:
        raise ValueError("competitive swarm needs an even population")
    perm = np.argsort(stream.uniform(n), kind="stable")
    first, second = perm[0::2], perm[1::2]
    first_wins = state.values[first] <= state.values[second]
    winners = np.where(first_wins, first, second)
    losers = np.where(first_wins, second, first)

    center = state.positions.mean(axis=0)
    r1 = stream.uniform((n // 2, d))
    r2 = stream.uniform((n // 2, d))
    r3 = stream.uniform((n // 2, d))
    v_l = (
        r1 * state.velocities[losers]
        + r2 * (state.positions[winners] - state.positions[losers])
        + state.phi * r3 * (center - state.positions[losers])
    )
    x_l = bounds.clip(state.positions[losers] + v_l)
    values_l = evaluate_fn(x_l)

    positions = state.positions.copy()
    velocities = state.velocities.copy()
    values = state.values.copy()
    positions[losers] = x_l
    velocities[losers] = v_l
    values[losers] = values_l
    return replace(state, positions=positions, velocities=velocities, values=values)


@dataclass(frozen=True)
class VariationOperator:
    """Uniform operator interface: parents + bounds + stream -> offspring.

    arity counts parent vectors; operators with uses_bounds read the box as
    extra inputs. generate returns the raw realized map (no clamping), so
    equivariance of the map itself is observable.
    """

    name: str
    arity: int
    uses_bounds: bool
    offspring_count: int
    _fn: Callable[[Sequence[np.ndarray], Bounds | None, RandomStream], list[np.ndarray]]

    def generate(self, parents, bounds, stream: RandomStream) -> list[np.ndarray]:
        parents = [np.asarray(p, dtype=float) for p in parents]
        if len(parents) != self.arity:
            raise ValueError(f"{self.name} takes {self.arity} parents, got {len(parents)}")
        if self.uses_bounds and bounds is None:
            raise ValueError(f"{self.name} needs bounds")
        return self._fn(parents, bounds, stream)


def _lab_sbx(parents, bounds, stream):
    return list(sbx(parents[0], parents[1], SBXParams(), stream))


def _lab_sbx_prime(parents, bounds, stream):
    return list(sbx_prime(parents[0], parents[1], SBXParams(), stream))


def _lab_de(parents, bounds, stream):
    return [de_mutate(parents[0], parents[1], parents[2], 0.5)]


def _lab_fep(parents, bounds, stream):
    # Realized Gaussian perturbation at the initial deviation 3.
    z = stream.gaussian(parents[0].shape)
    return [parents[0] + 3.0 * z]


def _lab_cmaes(parents, bounds, stream):
    # Sampling map at the initial step: mean + 0.6(u - l) * z per coordinate.
    z = stream.gaussian(parents[0].shape)
    return [parents[0] + 0.6 * bounds.width * z]


def _lab_pso(parents, bounds, stream):
    x, pbest, gbest = parents
    r1 = stream.uniform(x.shape)
    r2 = stream.uniform(x.shape)
    return [x + 2.0 * r1 * (pbest - x) + 2.0 * r2 * (gbest - x)]


def _lab_cso(parents, bounds, stream):
    loser, winner, center = parents
    r1 = stream.uniform(loser.shape)  # velocity coefficient; zero-velocity map
    r2 = stream.uniform(loser.shape)
    r3 = stream.uniform(loser.shape)
    del r1
    return [loser + r2 * (winner - loser) + 0.1 * r3 * (center - loser)]


_LAB_BASELINES = {
    "sbx": (2, False, 2, _lab_sbx),
    "sbx-prime": (2, False, 2, _lab_sbx_prime),
    "de": (3, False, 1, _lab_de),
    "fep": (1, False, 1, _lab_fep),
    "cmaes": (1, True, 1, _lab_cmaes),
    "pso": (3, False, 1, _lab_pso),
    "cso": (3, False, 1, _lab_cso),
}


def lab_operator_names() -> tuple[str, ...]:
    return tuple(_LAB_BASELINES) + ("autov", "autov-published")


def registry_names() -> tuple[str, ...]:
    """Every name addressable from the CLI and config files."""
    return lab_operator_names()


def lab_operator(name: str, matrix=None) -> VariationOperator:
    """Operator registry entry by name.

    "autov" wraps the supplied weight matrix (defaulting to the published
    one); "autov-published" always uses the published matrix.
    """
    if name in _LAB_BASELINES:
        arity, uses_bounds, count, fn = _LAB_BASELINES[name]
        return VariationOperator(name, arity, uses_bounds, count, fn)
    if name in ("autov", "autov-published"):
        from .autov import matrix_operator, published_operator

        if name == "autov-published" or matrix is None:
            matrix = published_operator()
        return matrix_operator(matrix, name=name)
    known = ", ".join(lab_operator_names())
    raise ValueError(f"unknown operator {name!r}; registry: {known}")

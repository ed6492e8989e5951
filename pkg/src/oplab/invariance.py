"""Numeric certification of operator invariances.

An operator's realized map is translation / scale / rotation invariant when
transforming the inputs commutes with the map itself: op(x + b) = op(x) + b,
op(a x) = a op(x), op(x M) = op(x) M for orthogonal M. The checks here replay
identical random draws against original and transformed inputs (snapshot /
restore on a shared stream), so they measure equivariance of the map, not
distributional similarity.

Also provides constructors for the three generic invariant forms:
  T-form    x1 + psi(x2 - x1, x3 - x2, ...)          translation
  TS-form   x1 + (x2 - x1) * phi(consecutive ratios)  translation + scale
  TSR-form  sum_i r_i x_i with sum r_i = 1            all three
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .numerics import RandomStream, random_orthogonal
from .operators import VariationOperator, lab_operator
from .problems import Bounds

__all__ = [
    "DegenerateInputError",
    "InvalidWeightsError",
    "InvarianceReport",
    "NondeterministicDrawError",
    "check_rotation",
    "check_scale",
    "check_translation",
    "classify",
    "make_t_invariant",
    "make_ts_invariant",
    "make_tsr_invariant",
    "weighted_sum_operator",
]

DEFAULT_TOLERANCE = 1e-9

# Scale factors exercised by classify; Definition-style invariance must hold
# for negative factors too.
SCALE_PALETTE = tuple(s * 10.0**e for s in (1.0, -1.0) for e in range(-2, 3))


class NondeterministicDrawError(RuntimeError):
    """The operator consumed different draw counts on the two runs, so the
    shared-stream comparison is meaningless."""


class DegenerateInputError(ValueError):
    """Consecutive parents coincide where the TS-form needs a ratio."""


class InvalidWeightsError(ValueError):
    """TSR-form weights must sum to one."""


def _paired_residual(op, parents, bounds, stream, tf_parents, tf_bounds, expect):
    """Run op on originals and on transformed inputs with identical draws.

    expect maps a base offspring to its transformed image; returns the worst
    absolute gap against the transformed run.
    """
    snap = stream.snapshot()
    base = op.generate(parents, bounds, stream)
    used_base = stream.draws_taken
    stream.restore(snap)
    moved = op.generate(tf_parents, tf_bounds, stream)
    if stream.draws_taken != used_base:
        raise NondeterministicDrawError(
            f"{op.name} drew {used_base - snap} then {stream.draws_taken - snap} words; "
            "draw order must not depend on input values"
        )
    return max(float(np.max(np.abs(m - expect(b)))) for b, m in zip(base, moved))


def check_translation(op: VariationOperator, parents, bounds, b: float, stream: RandomStream,
                      tol: float = DEFAULT_TOLERANCE) -> float:
    """Worst |op(x + b) - (op(x) + b)| under shared draws.

    b is added to every coordinate; bounds shift with it when the operator
    reads them. Returns the residual; callers compare against tol.
    """
    del tol
    if not np.isfinite(b):
        raise ValueError("offset must be finite")
    parents = [np.asarray(p, dtype=float) for p in parents]
    shifted = [p + b for p in parents]
    tf_bounds = None
    if bounds is not None:
        tf_bounds = Bounds(bounds.lower + b, bounds.upper + b)
    return _paired_residual(op, parents, bounds, stream, shifted, tf_bounds, lambda o: o + b)


def check_scale(op: VariationOperator, parents, bounds, a: float, stream: RandomStream,
                tol: float = DEFAULT_TOLERANCE) -> float:
    """Worst |op(a x) - a op(x)| / |a| under shared draws.

    Bounds are scaled verbatim (a*l, a*u, unsorted for negative a) so a box
    transforms exactly as its corner points do.
    """
    del tol
    if a == 0 or not np.isfinite(a):
        raise ValueError("scale factor must be finite and nonzero")
    parents = [np.asarray(p, dtype=float) for p in parents]
    scaled = [a * p for p in parents]
    tf_bounds = None
    if bounds is not None:
        tf_bounds = Bounds(a * bounds.lower, a * bounds.upper)
    gap = _paired_residual(op, parents, bounds, stream, scaled, tf_bounds, lambda o: a * o)
    return gap / abs(a)


def check_rotation(op: VariationOperator, parents, bounds, m: np.ndarray, stream: RandomStream,
                   tol: float = DEFAULT_TOLERANCE) -> float:
    """Worst |op(x M) - op(x) M| under shared draws; bounds rotate as rows."""
    del tol
    m = np.asarray(m, dtype=float)
    parents = [np.asarray(p, dtype=float) for p in parents]
    rotated = [p @ m for p in parents]
    tf_bounds = None
    if bounds is not None:
        tf_bounds = Bounds(bounds.lower @ m, bounds.upper @ m)
    return _paired_residual(op, parents, bounds, stream, rotated, tf_bounds, lambda o: o @ m)


def make_t_invariant(psi, arity: int = 3, name: str = "t-form") -> VariationOperator:
    """Translation-invariant form x1 + psi(consecutive differences).

    psi receives the (arity-1, D) stack of differences and returns a (D,)
    row; it is applied identically in every dimension.
    """
    if arity < 2:
        raise ValueError("form needs at least two parents")

    def _fn(parents, bounds, stream):
        stack = np.stack(parents)
        diffs = np.diff(stack, axis=0)
        return [parents[0] + np.asarray(psi(diffs), dtype=float)]

    return VariationOperator(name, arity, False, 1, _fn)


def make_ts_invariant(phi, arity: int = 3, name: str = "ts-form") -> VariationOperator:
    """Translation+scale form x1 + (x2 - x1) * phi(ratio vector).

    phi receives the (arity-2, D) stack of consecutive-difference ratios
    (x3-x2)/(x2-x1), ... and returns a (D,) row. Denominator differences
    smaller than 1e-12 raise DegenerateInputError instead of being
    regularized: the form presumes distinct consecutive parents, and patching
    the ratio would mask real invariance violations.
    """
    if arity < 2:
        raise ValueError("form needs at least two parents")

    def _fn(parents, bounds, stream):
        stack = np.stack(parents)
        diffs = np.diff(stack, axis=0)
        denom = diffs[:-1]
        if denom.size and np.min(np.abs(denom)) < 1e-12:
            raise DegenerateInputError("consecutive parents coincide; ratio form undefined")
        ratios = diffs[1:] / denom if denom.size else diffs[:0]
        return [parents[0] + diffs[0] * np.asarray(phi(ratios), dtype=float)]

    return VariationOperator(name, arity, False, 1, _fn)


def weighted_sum_operator(r, name: str = "weighted-sum") -> VariationOperator:
    """Deterministic sum_i r_i x_i with no constraint on the weights.

    Scale and rotation invariant for any r; translation invariance requires
    sum r = 1 (see make_tsr_invariant).
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ValueError("weights must be a nonempty vector")

    def _fn(parents, bounds, stream):
        return [r @ np.stack(parents)]

    return VariationOperator(name, r.size, False, 1, _fn)


def make_tsr_invariant(r, name: str = "tsr-form") -> VariationOperator:
    """Fully invariant weighted sum; enforces sum r = 1 within 1e-12."""
    r = np.asarray(r, dtype=float)
    if abs(float(r.sum()) - 1.0) >= 1e-12:
        raise InvalidWeightsError(f"weights must sum to 1, got {float(r.sum())!r}")
    return weighted_sum_operator(r, name=name)


@dataclass(frozen=True)
class InvarianceReport:
    """Worst-case residuals and verdicts across classify trials."""

    operator: str
    translation: bool
    scale: bool
    rotation: bool
    residuals: dict[str, float]
    trials: int
    tolerance: float

    def to_json_dict(self) -> dict:
        return {
            "operator": self.operator,
            "translation": self.translation,
            "scale": self.scale,
            "rotation": self.rotation,
            "residuals": dict(self.residuals),
            "trials": self.trials,
            "tolerance": self.tolerance,
        }


def _classify_trial(op: VariationOperator, dimension: int, stream: RandomStream, index: int):
    trial = stream.split(("trial", index))
    gen = trial.split("inputs")
    parents = [20.0 * gen.uniform(dimension) - 10.0 for _ in range(op.arity)]
    bounds = Bounds(np.full(dimension, -10.0), np.full(dimension, 10.0))
    b = float(200.0 * trial.split("offset").uniform() - 100.0)
    a = SCALE_PALETTE[index % len(SCALE_PALETTE)]
    m = random_orthogonal(dimension, trial.split("rotation"))
    draws = trial.split("draws")
    return (
        check_translation(op, parents, bounds, b, draws),
        check_scale(op, parents, bounds, a, draws),
        check_rotation(op, parents, bounds, m, draws),
    )


def classify(operator, dimension: int, trials: int = 50, stream: RandomStream | None = None,
             seed: int = 0, tolerance: float = DEFAULT_TOLERANCE, threads: int = 1) -> InvarianceReport:
    """Run all three checks over random trials and aggregate worst residuals.

    operator may be a VariationOperator or a registry name. Each trial draws
    fresh parents in [-10, 10]^D, an offset in [-100, 100], a scale from
    SCALE_PALETTE, and a random rotation, all from per-trial split streams,
    so the report does not depend on the thread count.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    op = lab_operator(operator) if isinstance(operator, str) else operator
    if stream is None:
        stream = RandomStream(seed, path=("classify", op.name, dimension))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: _classify_trial(op, dimension, stream, i), range(trials)))
    else:
        rows = [_classify_trial(op, dimension, stream, i) for i in range(trials)]

    worst = np.max(np.asarray(rows, dtype=float), axis=0)
    residuals = {
        "translation": float(worst[0]),
        "scale": float(worst[1]),
        "rotation": float(worst[2]),
    }
    return InvarianceReport(
        operator=op.name,
        translation=residuals["translation"] <= tolerance,
        scale=residuals["scale"] <= tolerance,
        rotation=residuals["rotation"] <= tolerance,
        residuals=residuals,
        trials=trials,
        tolerance=tolerance,
    )

"""Gradient descent with an injected per-iteration gradient error.

The update is x_{k+1} = x_k - (gradient + error) / L with the fixed step
1 / L, L the composed smoothness constant. Error models:

* ``ZeroError``             exact gradients
* ``SyntheticError``        prescribed norm schedule, random or fixed direction
* ``IncrementalBatchError`` the error made by averaging a sample subset
                            instead of the full sum

Errors are indexed from 1: the step from x_{k-1} to x_k uses error k, so a
geometric schedule gives ||e_k||^2 = scale * ratio**k literally. Batch
schedules are indexed by the 0-based step, matching their residual targets.

Randomness comes from one generator per run, consumed in a fixed order: per
iteration, at most one draw happens (a direction for synthetic models, a
subset for uniform batch selection), in iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problems import ComposedProblem

# Agreement tolerance between the two algebraic forms of the batch error.
_BATCH_FORM_ATOL = 1e-12


class DivergedError(RuntimeError):
    """Iteration produced a non-finite objective, gradient, or point."""

    def __init__(self, iteration: int):
        super().__init__(f"iterate diverged at iteration {iteration}")
        self.iteration = iteration


# ---------------------------------------------------------------------------
# error-norm schedules (synthetic models)


@dataclass(frozen=True)
class GeometricNorms:
    """Squared error norm ``scale * ratio**k`` at error index k >= 1."""

    scale: float
    ratio: float

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")

    def norm_at(self, k: int) -> float:
        return math.sqrt(self.scale * self.ratio**k)


@dataclass(frozen=True)
class PolynomialNorms:
    """Squared error norm ``scale / k**(1 + power)`` at error index k >= 1."""

    scale: float
    power: float

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        if self.power <= 0:
            raise ValueError("power must be positive")

    def norm_at(self, k: int) -> float:
        return math.sqrt(self.scale / k ** (1.0 + self.power))


# ---------------------------------------------------------------------------
# batch-size schedules (incremental model)


@dataclass(frozen=True)
class GeometricResidualSchedule:
    """Batch sizes keeping the left-out fraction at most initial * ratio**k."""

    initial: float
    ratio: float
    total: int

    def __post_init__(self):
        if not 0.0 < self.initial < 1.0:
            raise ValueError("initial residual fraction must lie in (0, 1)")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")
        if self.total < 1:
            raise ValueError("total must be at least 1")

    def size_at(self, k: int) -> int:
        return min(self.total, math.ceil(self.total * (1.0 - self.initial * self.ratio**k)))


@dataclass(frozen=True)
class PolynomialResidualSchedule:
    """Batch sizes keeping the left-out fraction at most initial / (k+1)**(1+power)."""

    initial: float
    power: float
    total: int

    def __post_init__(self):
        if not 0.0 < self.initial < 1.0:
            raise ValueError("initial residual fraction must lie in (0, 1)")
        if self.power <= 0:
            raise ValueError("power must be positive")
        if self.total < 1:
            raise ValueError("total must be at least 1")

    def size_at(self, k: int) -> int:
        target = self.initial / (k + 1) ** (1.0 + self.power)
        return min(self.total, math.ceil(self.total * (1.0 - target)))


@dataclass(frozen=True)
class ExplicitSchedule:
    """A hand-picked nondecreasing size sequence; the last size repeats."""

    sizes: tuple[int, ...]
    total: int

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise ValueError("sizes must be nonempty")
        if any(not 1 <= s <= self.total for s in sizes):
            raise ValueError(f"sizes must lie in [1, {self.total}]")
        if any(a > b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sizes must be nondecreasing")
        object.__setattr__(self, "sizes", sizes)

    def size_at(self, k: int) -> int:
        return self.sizes[min(k, len(self.sizes) - 1)]


BatchSchedule = GeometricResidualSchedule | PolynomialResidualSchedule | ExplicitSchedule


# ---------------------------------------------------------------------------
# error models


@dataclass(frozen=True)
class ZeroError:
    def describe(self) -> str:
        return "zero"


@dataclass(frozen=True, eq=False)
class SyntheticError:
    """Error with scheduled norm; direction drawn uniformly on the sphere
    unless a fixed unit vector is given."""

    norms: GeometricNorms | PolynomialNorms
    direction: np.ndarray | None = None

    def __post_init__(self):
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            norm = np.linalg.norm(d)
            if d.ndim != 1 or norm == 0 or not np.all(np.isfinite(d)):
                raise ValueError("direction must be a finite nonzero vector")
            object.__setattr__(self, "direction", d / norm)

    def describe(self) -> str:
        kind = "geometric" if isinstance(self.norms, GeometricNorms) else "polynomial"
        how = "random" if self.direction is None else "fixed"
        return f"{kind}({self.norms}, direction={how})"


@dataclass(frozen=True)
class IncrementalBatchError:
    """Error from averaging only a batch of per-sample gradients."""

    schedule: BatchSchedule
    selection: str = "prefix"

    def __post_init__(self):
        if self.selection not in ("prefix", "uniform"):
            raise ValueError("selection must be 'prefix' or 'uniform'")

    def describe(self) -> str:
        return f"batch({self.schedule}, selection={self.selection})"


ErrorModel = ZeroError | SyntheticError | IncrementalBatchError


def _batch_error(problem: ComposedProblem, x, indices: np.ndarray) -> np.ndarray:
    """Difference between the batch-mean gradient and the full gradient.

    Evaluates both the rearranged form (weighted batch sum minus the
    left-out sum) and the direct form (batch mean minus full mean) and
    requires them to agree to _BATCH_FORM_ATOL per coordinate.
    """
    m = problem.n_samples
    s = indices.shape[0]
    if s == 0:
        raise ValueError("empty batch")
    grads = problem.sample_gradients(x)
    batch_sum = grads[indices].sum(axis=0)
    # the left-out sum is taken over the complement directly: a full batch
    # then yields an exactly zero error instead of summation-order noise
    chosen = np.zeros(m, dtype=bool)
    chosen[indices] = True
    rest_sum = grads[~chosen].sum(axis=0)
    rearranged = ((m - s) / (m * s)) * batch_sum - rest_sum / m
    direct = batch_sum / s - problem.gradient(x)
    if not np.allclose(rearranged, direct, rtol=0.0, atol=_BATCH_FORM_ATOL):
        raise ArithmeticError("batch-error forms disagree beyond tolerance")
    return rearranged


def _draw_error(
    model: ErrorModel,
    problem: ComposedProblem,
    x,
    k: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int | None]:
    """Error vector e_k (1-based index k) and the batch size if batched."""
    if k < 1:
        raise ValueError("error index k starts at 1")
    if isinstance(model, ZeroError):
        return np.zeros(problem.n_features), None
    if isinstance(model, SyntheticError):
        if model.direction is None:
            d = rng.standard_normal(problem.n_features)
            d /= np.linalg.norm(d)
        else:
            d = model.direction
        return model.norms.norm_at(k) * d, None
    size = model.schedule.size_at(k - 1)
    if model.selection == "prefix":
        indices = np.arange(size)
    else:
        indices = rng.permutation(problem.n_samples)[:size]
    return _batch_error(problem, x, indices), size


def make_error(model: ErrorModel, problem: ComposedProblem, x, k: int,
               rng: np.random.Generator) -> np.ndarray:
    """Draw the error vector e_k for the step from x_{k-1} (see module doc)."""
    return _draw_error(model, problem, x, k, rng)[0]


def igm_step(problem: ComposedProblem, x, error) -> np.ndarray:
    """One inexact gradient step with the fixed step size 1 / L."""
    x = np.asarray(x, dtype=float)
    return x - (problem.gradient(x) + np.asarray(error, dtype=float)) / problem.constants.composed


def expected_sq_error(problem: ComposedProblem, x, batch_size: int) -> float:
    """Expected squared batch-error norm under uniform sampling without
    replacement of ``batch_size`` samples."""
    m = problem.n_samples
    if not 1 <= batch_size <= m:
        raise ValueError(f"batch_size must lie in [1, {m}]")
    if m == 1:
        return 0.0
    grads = problem.sample_gradients(x)
    spread = grads - grads.mean(axis=0)
    total = float(np.sum(spread**2))
    return ((m - batch_size) / (m * batch_size)) * total / (m - 1)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(eq=False)
class Trajectory:
    """Complete record of one run.

    Arrays are indexed by iteration: ``xs``, ``fs``, ``grad_norms`` (and
    ``dists`` once attached) have K+1 entries for a K-step run, while
    ``errors``, ``err_norms``, ``step_norms``, and ``batch_sizes`` have K
    entries; entry k of those describes the step from x_k to x_{k+1}.
    """

    xs: np.ndarray
    fs: np.ndarray
    grad_norms: np.ndarray
    errors: np.ndarray
    err_norms: np.ndarray
    step_norms: np.ndarray
    batch_sizes: np.ndarray | None
    seed: int
    problem_digest: str
    model_label: str
    dists: np.ndarray | None = field(default=None)

    @property
    def iterations(self) -> int:
        return self.step_norms.shape[0]

    def gaps(self, f_min: float) -> np.ndarray:
        return self.fs - f_min


def run(
    problem: ComposedProblem,
    model: ErrorModel,
    x0,
    iterations: int,
    seed: int = 0,
) -> Trajectory:
    """Run the inexact gradient method for a fixed number of steps.

    Parameters
    ----------
    problem : ComposedProblem
    model : ErrorModel
        Where the per-iteration gradient error comes from.
    x0 : (n,) array_like
        Starting point.
    iterations : int
        Number of steps K >= 1; the trajectory records K+1 iterates.
    seed : int
        Seeds the run's private random generator.

    Raises
    ------
    DivergedError
        If any objective value, gradient, or iterate stops being finite.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    x = np.array(x0, dtype=float)
    if x.shape != (problem.n_features,):
        raise ValueError(f"x0 must have shape ({problem.n_features},)")
    rng = np.random.default_rng(seed)
    L = problem.constants.composed
    K = iterations
    n = problem.n_features
    xs = np.empty((K + 1, n))
    fs = np.empty(K + 1)
    grad_norms = np.empty(K + 1)
    errors = np.empty((K, n))
    err_norms = np.empty(K)
    step_norms = np.empty(K)
    batched = isinstance(model, IncrementalBatchError)
    batch_sizes = np.empty(K, dtype=np.int64) if batched else None

    for k in range(K + 1):
        f = problem.objective(x)
        g = problem.gradient(x)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise DivergedError(k)
        xs[k] = x
        fs[k] = f
        grad_norms[k] = np.linalg.norm(g)
        if k == K:
            break
        e, size = _draw_error(model, problem, x, k + 1, rng)
        errors[k] = e
        err_norms[k] = np.linalg.norm(e)
        if batched:
            batch_sizes[k] = size
        step = (g + e) / L
        step_norms[k] = np.linalg.norm(step)
        x = x - step

    return Trajectory(
        xs=xs,
        fs=fs,
        grad_norms=grad_norms,
        errors=errors,
        err_norms=err_norms,
        step_norms=step_norms,
        batch_sizes=batch_sizes,
        seed=seed,
        problem_digest=problem.digest,
        model_label=model.describe(),
    )

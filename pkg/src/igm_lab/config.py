"""Experiment configuration: JSON schema parsing and object building.

A config document describes one experiment: the problem (generator recipe
or dataset file), the gradient-error model, the starting point, iteration
and seed counts, and verification knobs. Parsing is eager about structure
(unknown keys and missing fields fail fast with a path to the offending
entry); numeric-range enforcement lives with the objects themselves.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .datagen import (
    LeastSquaresSpec,
    LogisticSpec,
    generate_least_squares,
    generate_logistic,
    load_problem,
)
from .engine import (
    ExplicitSchedule,
    GeometricNorms,
    GeometricResidualSchedule,
    IncrementalBatchError,
    PolynomialNorms,
    PolynomialResidualSchedule,
    SyntheticError,
    ZeroError,
)
from .problems import LOGISTIC, LOSSES, SQUARE, ComposedProblem

# tag mixed into the generator seed so start-point draws are decoupled
# from the error draws made inside the run loop
START_SEED_TAG = 101

DEFAULT_TAIL_FRACTION = 0.5

# default horizons sized so desk-scale runs finish in seconds; logistic
# problems converge more slowly and get the longer default
DEFAULT_ITERATIONS = {SQUARE: 500, LOGISTIC: 5000}


def _mapping(value: Any, where: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise ValueError(f"{where}: expected an object")
    return value


def _known_keys(raw: dict[str, Any], where: str, allowed: set[str]) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")


def _number(raw: dict[str, Any], where: str, key: str, default: float | None = None) -> float:
    if key not in raw:
        if default is None:
            raise ValueError(f"{where}.{key}: required")
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{where}.{key}: expected a number")
    return float(value)


def _integer(raw: dict[str, Any], where: str, key: str) -> int:
    if key not in raw:
        raise ValueError(f"{where}.{key}: required")
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{where}.{key}: expected an integer")
    return value


def _string(raw: dict[str, Any], where: str, key: str, choices: tuple[str, ...] | None = None) -> str:
    value = raw.get(key)
    if not isinstance(value, str):
        raise ValueError(f"{where}.{key}: required string")
    if choices is not None and value not in choices:
        raise ValueError(f"{where}.{key}: expected one of {choices}")
    return value


@dataclass(frozen=True)
class DatasetSpec:
    """A problem read from a CSV file rather than generated."""

    path: str
    loss: str


@dataclass(frozen=True)
class StartSpec:
    """Starting point: the origin, or a seeded draw from a centered ball."""

    kind: str
    radius: float = 1.0

    def build(self, dimension: int, seed: int) -> np.ndarray:
        if self.kind == "zeros":
            return np.zeros(dimension)
        rng = np.random.default_rng([START_SEED_TAG, seed])
        point = rng.standard_normal(dimension)
        scale = np.linalg.norm(point)
        if scale == 0.0:
            return np.zeros(dimension)
        return point * (self.radius * rng.uniform() ** (1.0 / dimension) / scale)


def parse_problem(raw: Any) -> LeastSquaresSpec | LogisticSpec | DatasetSpec:
    raw = _mapping(raw, "problem")
    kind = _string(raw, "problem", "kind", ("least_squares", "logistic", "dataset"))
    if kind == "least_squares":
        _known_keys(raw, "problem", {"kind", "samples", "features", "rank", "noise", "seed", "singular_range"})
        spec_range = raw.get("singular_range", list(LeastSquaresSpec.singular_range))
        if not (isinstance(spec_range, (list, tuple)) and len(spec_range) == 2):
            raise ValueError("problem.singular_range: expected [lo, hi]")
        return LeastSquaresSpec(
            samples=_integer(raw, "problem", "samples"),
            features=_integer(raw, "problem", "features"),
            rank=_integer(raw, "problem", "rank"),
            noise=_number(raw, "problem", "noise"),
            seed=_integer(raw, "problem", "seed"),
            singular_range=(float(spec_range[0]), float(spec_range[1])),
        )
    if kind == "logistic":
        _known_keys(raw, "problem", {"kind", "samples", "features", "flip_fraction", "seed"})
        return LogisticSpec(
            samples=_integer(raw, "problem", "samples"),
            features=_integer(raw, "problem", "features"),
            flip_fraction=_number(raw, "problem", "flip_fraction"),
            seed=_integer(raw, "problem", "seed"),
        )
    _known_keys(raw, "problem", {"kind", "path", "loss"})
    return DatasetSpec(path=_string(raw, "problem", "path"), loss=_string(raw, "problem", "loss", LOSSES))


def _problem_loss(spec: LeastSquaresSpec | LogisticSpec | DatasetSpec) -> str:
    if isinstance(spec, LeastSquaresSpec):
        return SQUARE
    if isinstance(spec, LogisticSpec):
        return LOGISTIC
    return spec.loss


def _check_error_model(raw: Any) -> dict[str, Any]:
    raw = _mapping(raw, "error_model")
    kind = _string(raw, "error_model", "kind", ("zero", "synthetic", "batch"))
    if kind == "zero":
        _known_keys(raw, "error_model", {"kind"})
    elif kind == "synthetic":
        _known_keys(raw, "error_model", {"kind", "norms", "direction"})
        norms = _mapping(raw.get("norms"), "error_model.norms")
        _string(norms, "error_model.norms", "kind", ("geometric", "polynomial"))
        direction = raw.get("direction")
        if direction is not None and not isinstance(direction, list):
            raise ValueError("error_model.direction: expected a list of numbers")
    else:
        _known_keys(raw, "error_model", {"kind", "schedule", "selection"})
        schedule = _mapping(raw.get("schedule"), "error_model.schedule")
        _string(schedule, "error_model.schedule", "kind", ("geometric", "polynomial", "explicit"))
        if "selection" in raw:
            _string(raw, "error_model", "selection", ("prefix", "uniform"))
    return raw


def parse_start(raw: Any) -> StartSpec:
    raw = _mapping(raw, "start")
    kind = _string(raw, "start", "kind", ("zeros", "random_ball"))
    if kind == "zeros":
        _known_keys(raw, "start", {"kind"})
        return StartSpec("zeros")
    _known_keys(raw, "start", {"kind", "radius"})
    radius = _number(raw, "start", "radius", 1.0)
    if not np.isfinite(radius) or radius <= 0:
        raise ValueError("start.radius: expected a positive number")
    return StartSpec("random_ball", radius)


def _parse_seeds(value: Any) -> tuple[int, ...]:
    if isinstance(value, bool):
        raise ValueError("seeds: expected an integer count or a list of integers")
    if isinstance(value, int):
        if value < 1:
            raise ValueError("seeds: count must be at least 1")
        return tuple(range(value))
    if isinstance(value, list) and value and all(isinstance(s, int) and not isinstance(s, bool) for s in value):
        return tuple(value)
    raise ValueError("seeds: expected an integer count or a nonempty list of integers")


@dataclass(eq=False)
class ExperimentConfig:
    """One parsed experiment document, plus the raw form that named it."""

    problem_spec: LeastSquaresSpec | LogisticSpec | DatasetSpec
    error_spec: dict[str, Any]
    start: StartSpec
    iterations: int
    seeds: tuple[int, ...]
    output_dir: str | None
    verify_enabled: bool
    tolerance_scale: float
    tail_fraction: float
    raw: dict[str, Any]

    @property
    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_problem(self) -> ComposedProblem:
        spec = self.problem_spec
        if isinstance(spec, LeastSquaresSpec):
            return generate_least_squares(spec)
        if isinstance(spec, LogisticSpec):
            return generate_logistic(spec)
        return load_problem(spec.path, spec.loss)

    def build_error_model(self, problem: ComposedProblem):
        raw = self.error_spec
        kind = raw["kind"]
        if kind == "zero":
            return ZeroError()
        if kind == "synthetic":
            norms_raw = raw["norms"]
            if norms_raw["kind"] == "geometric":
                norms = GeometricNorms(scale=norms_raw["scale"], ratio=norms_raw["ratio"])
            else:
                norms = PolynomialNorms(scale=norms_raw["scale"], power=norms_raw["power"])
            direction = raw.get("direction")
            return SyntheticError(norms, None if direction is None else np.asarray(direction, dtype=float))
        schedule_raw = raw["schedule"]
        total = problem.n_samples
        if schedule_raw["kind"] == "geometric":
            schedule = GeometricResidualSchedule(
                initial=schedule_raw["initial"], ratio=schedule_raw["ratio"], total=total
            )
        elif schedule_raw["kind"] == "polynomial":
            schedule = PolynomialResidualSchedule(
                initial=schedule_raw["initial"], power=schedule_raw["power"], total=total
            )
        else:
            schedule = ExplicitSchedule(sizes=tuple(schedule_raw["sizes"]), total=total)
        return IncrementalBatchError(schedule, selection=raw.get("selection", "prefix"))

    def initial_point(self, problem: ComposedProblem, seed: int) -> np.ndarray:
        return self.start.build(problem.n_features, seed)


def parse_config(raw: Any) -> ExperimentConfig:
    raw = _mapping(raw, "config")
    _known_keys(
        raw,
        "config",
        {
            "problem",
            "error_model",
            "start",
            "iterations",
            "seeds",
            "output_dir",
            "verify",
            "tail_fraction",
        },
    )
    problem_spec = parse_problem(raw.get("problem"))
    error_spec = _check_error_model(raw.get("error_model"))
    start = parse_start(raw["start"]) if "start" in raw else StartSpec("zeros")
    if "iterations" in raw:
        iterations = _integer(raw, "config", "iterations")
    else:
        iterations = DEFAULT_ITERATIONS[_problem_loss(problem_spec)]
    if iterations < 1:
        raise ValueError("config.iterations: must be at least 1")
    if "seeds" not in raw:
        raise ValueError("config.seeds: required")
    seeds = _parse_seeds(raw["seeds"])
    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ValueError("config.output_dir: expected a string")
    verify_enabled = True
    tolerance_scale = 1.0
    if "verify" in raw:
        verify = _mapping(raw["verify"], "config.verify")
        _known_keys(verify, "config.verify", {"enabled", "tolerance_scale"})
        if "enabled" in verify:
            if not isinstance(verify["enabled"], bool):
                raise ValueError("config.verify.enabled: expected a boolean")
            verify_enabled = verify["enabled"]
        tolerance_scale = _number(verify, "config.verify", "tolerance_scale", 1.0)
        if not np.isfinite(tolerance_scale):
            raise ValueError("config.verify.tolerance_scale: expected a finite number")
    tail_fraction = _number(raw, "config", "tail_fraction", DEFAULT_TAIL_FRACTION)
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("config.tail_fraction: must lie in (0, 1]")
    return ExperimentConfig(
        problem_spec=problem_spec,
        error_spec=error_spec,
        start=start,
        iterations=iterations,
        seeds=seeds,
        output_dir=output_dir,
        verify_enabled=verify_enabled,
        tolerance_scale=tolerance_scale,
        tail_fraction=tail_fraction,
        raw=raw,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    with Path(path).open() as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw)

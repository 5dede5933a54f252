"""Evaluation protocols and the experiment runner: strict test-then-train
prequential accuracy with ground-truth drift resets, sliding-window accuracy,
seeded multi-run averaging over the compared approaches, and grid search.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .core import ConfigurationError, Example, argmax_label
from .drift import DriftStatus, make_detector
from .learners import make_ensemble
from .model import MarlineConfig, MarlineModel
from .streams import (
    CsvDataset,
    StreamData,
    StreamSchedule,
    SyntheticDataset,
    generate_synthetic,
    ingest_csv,
    interleave,
    reseed_dataset,
    truncate_after_last_target,
)

APPROACHES = (
    "marline_with_source",
    "marline_no_source",
    "base_plain",
    "base_detector_reset",
)

EVALUATIONS = ("prequential_reset", "sliding_window")

# Hyperparameter search ranges used when a grid is not given explicitly.
DEFAULT_ENSEMBLE_SIZE_GRID = tuple(range(1, 31))
DEFAULT_FORGETTING_FACTOR_GRID = tuple(round(0.9 + 0.01 * i, 2) for i in range(11))
DEFAULT_PERFORMANCE_INDEX_GRID = tuple(round(0.1 * (i + 1), 1) for i in range(10))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment."""

    approach: str
    config: MarlineConfig
    dataset: SyntheticDataset | CsvDataset
    runs: int = 30
    seed_base: int = 0
    evaluation: str = "prequential_reset"
    window_fraction: float = 0.1
    interleave_policy: str = "round_robin"
    warmup_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.approach not in APPROACHES:
            raise ConfigurationError(f"unknown approach {self.approach!r}")
        if self.evaluation not in EVALUATIONS:
            raise ConfigurationError(f"unknown evaluation {self.evaluation!r}")
        if self.runs < 1:
            raise ConfigurationError("runs must be >= 1")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ConfigurationError("window_fraction must be in (0, 1]")


@dataclass
class PrequentialTrace:
    """Running prequential accuracy, with counters zeroed at each reset."""

    per_step_accuracy: list[float]
    reset_points: list[int]
    final_per_segment_accuracy: list[float]


@dataclass
class RunTrace:
    """All per-target-step series collected in a single pass."""

    correct: list[int]
    running: list[float]
    windowed: list[float]
    segment_ids: list[int]
    reset_points: list[int]
    final_per_segment_accuracy: list[float]
    weight_ratio: list[float]


# ----------------------------------------------------------------------
# Approaches
# ----------------------------------------------------------------------


class MarlineApproach:
    """Adapter running a MARLINE model inside the evaluation loop."""

    def __init__(
        self,
        config: MarlineConfig,
        target_id: str,
        use_sources: bool,
        rng: np.random.Generator,
    ) -> None:
        self.model = MarlineModel(config, target_id=target_id)
        self.target_id = target_id
        self.use_sources = use_sources
        self.rng = rng

    def predict(self, features: np.ndarray) -> int:
        return self.model.predict(features).label

    def observe(self, stream_id: str, example: Example) -> None:
        if not self.use_sources and stream_id != self.target_id:
            return
        self.model.observe(stream_id, example, self.rng)

    def source_weight_ratio(self) -> float:
        return self.model.source_weight_ratio()


class BaselineApproach:
    """A single online ensemble trained on the target stream only, optionally
    reset to fresh whenever its drift detector alarms."""

    def __init__(
        self,
        config: MarlineConfig,
        target_id: str,
        reset_on_drift: bool,
        rng: np.random.Generator,
    ) -> None:
        self.config = config
        self.target_id = target_id
        self.reset_on_drift = reset_on_drift
        self.rng = rng
        self.ensemble = self._fresh_ensemble()
        self.detector = (
            make_detector(config.detector, **dict(config.detector_params))
            if reset_on_drift
            else None
        )

    def _fresh_ensemble(self):
        return make_ensemble(
            self.config.base_ensemble,
            self.config.n_features,
            self.config.ensemble_size,
            self.config.tree,
        )

    def predict(self, features: np.ndarray) -> int:
        return argmax_label(self.ensemble.predict(features))

    def observe(self, stream_id: str, example: Example) -> None:
        if stream_id != self.target_id:
            return
        if self.detector is not None:
            correct = self.predict(example.features) == example.label
            if self.detector.update(correct) is DriftStatus.DRIFT:
                self.ensemble = self._fresh_ensemble()
                self.detector.reset()
        self.ensemble.train(example, self.rng)

    def source_weight_ratio(self) -> float | None:
        return None


def build_approach(spec: ExperimentSpec, target_id: str, model_seed) -> object:
    rng = np.random.default_rng(model_seed)
    if spec.approach == "marline_with_source":
        return MarlineApproach(spec.config, target_id, use_sources=True, rng=rng)
    if spec.approach == "marline_no_source":
        return MarlineApproach(spec.config, target_id, use_sources=False, rng=rng)
    if spec.approach == "base_plain":
        return BaselineApproach(spec.config, target_id, reset_on_drift=False, rng=rng)
    return BaselineApproach(spec.config, target_id, reset_on_drift=True, rng=rng)


# ----------------------------------------------------------------------
# Protocols
# ----------------------------------------------------------------------


def _run_schedule(
    approach,
    schedule: StreamSchedule,
    reset_at_drifts: bool,
    window: int | None,
) -> RunTrace:
    """Single pass over a schedule: score each target example before the
    approach sees it, then hand every example over for training."""
    if not any(sid == schedule.target_id for sid, _ in schedule.entries):
        raise ConfigurationError("schedule contains no target examples")
    reset_indices = set(schedule.target_drift_indices()) if reset_at_drifts else set()
    ratio_fn = getattr(approach, "source_weight_ratio", lambda: None)

    trace = RunTrace([], [], [], [], [], [], [])
    seg_correct = 0
    seg_total = 0
    segment = 0
    recent: deque[int] = deque(maxlen=window) if window else deque(maxlen=1)
    for index, (stream_id, example) in enumerate(schedule.entries):
        if stream_id == schedule.target_id:
            if index in reset_indices and seg_total > 0:
                trace.final_per_segment_accuracy.append(seg_correct / seg_total)
                trace.reset_points.append(len(trace.running))
                seg_correct = 0
                seg_total = 0
                segment += 1
            predicted = approach.predict(example.features)
            correct = 1 if predicted == example.label else 0
            seg_correct += correct
            seg_total += 1
            recent.append(correct)
            trace.correct.append(correct)
            trace.running.append(seg_correct / seg_total)
            trace.windowed.append(sum(recent) / len(recent))
            trace.segment_ids.append(segment)
            approach.observe(stream_id, example)
            ratio = ratio_fn()
            trace.weight_ratio.append(math.nan if ratio is None else float(ratio))
        else:
            approach.observe(stream_id, example)
    if seg_total > 0:
        trace.final_per_segment_accuracy.append(seg_correct / seg_total)
    return trace


def run_prequential(
    approach_factory: Callable[[], object],
    schedule: StreamSchedule,
    reset_at_drifts: bool = True,
) -> PrequentialTrace:
    """Prequential accuracy over the schedule's target examples, with the
    running counters zeroed at each ground-truth target drift mark."""
    trace = _run_schedule(approach_factory(), schedule, reset_at_drifts, window=None)
    return PrequentialTrace(
        per_step_accuracy=trace.running,
        reset_points=trace.reset_points,
        final_per_segment_accuracy=trace.final_per_segment_accuracy,
    )


def run_sliding_window(
    approach_factory: Callable[[], object],
    schedule: StreamSchedule,
    window_fraction: float,
) -> list[float]:
    """Mean correctness over the trailing window at each target step."""
    n_target = sum(1 for sid, _ in schedule.entries if sid == schedule.target_id)
    window = max(1, math.ceil(window_fraction * n_target))
    trace = _run_schedule(
        approach_factory(), schedule, reset_at_drifts=False, window=window
    )
    return trace.windowed


# ----------------------------------------------------------------------
# Experiments
# ----------------------------------------------------------------------


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    traces: list[RunTrace]
    mean_running: np.ndarray
    std_running: np.ndarray
    mean_windowed: np.ndarray
    std_windowed: np.ndarray
    mean_weight_ratio: np.ndarray
    segment_means: np.ndarray
    segment_stds: np.ndarray

    @property
    def objective(self) -> float:
        """Grid-search objective: equal-weight mean of per-segment accuracy
        under the prequential protocol, mean windowed accuracy otherwise."""
        if self.spec.evaluation == "prequential_reset":
            return float(np.mean([np.mean(t.final_per_segment_accuracy) for t in self.traces]))
        return float(np.mean([np.mean(t.windowed) for t in self.traces]))


def build_schedule(spec: ExperimentSpec, run_index: int) -> StreamSchedule:
    """Materialise the run's schedule; synthetic data is resampled per run
    from seeds derived independently of the model's randomness."""
    dataset = spec.dataset
    if isinstance(dataset, SyntheticDataset):
        data_seed = np.random.SeedSequence([spec.seed_base + run_index, 0])
        dataset = reseed_dataset(dataset, data_seed)
        target_gen = generate_synthetic(dataset.target)
        target = StreamData("T", target_gen.examples, target_gen.drift_marks)
        sources = []
        for i, source_spec in enumerate(dataset.sources):
            gen = generate_synthetic(source_spec)
            sources.append(StreamData(f"S{i + 1}", gen.examples, gen.drift_marks))
    else:
        target = StreamData("T", tuple(ingest_csv(dataset.target)))
        sources = [
            StreamData(f"S{i + 1}", tuple(ingest_csv(src)))
            for i, src in enumerate(dataset.sources)
        ]
    schedule = interleave(
        target, tuple(sources), spec.interleave_policy, spec.warmup_fraction
    )
    return truncate_after_last_target(schedule)


def _model_seed(spec: ExperimentSpec, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([spec.seed_base + run_index, 1])


def _execute_run(spec: ExperimentSpec, run_index: int) -> RunTrace:
    schedule = build_schedule(spec, run_index)
    approach = build_approach(spec, schedule.target_id, _model_seed(spec, run_index))
    window = max(
        1,
        math.ceil(
            spec.window_fraction
            * sum(1 for sid, _ in schedule.entries if sid == schedule.target_id)
        ),
    )
    reset = spec.evaluation == "prequential_reset"
    return _run_schedule(approach, schedule, reset_at_drifts=reset, window=window)


def run_experiment(spec: ExperimentSpec, parallelism: int = 1) -> ExperimentResult:
    """Execute ``spec.runs`` independent seeded runs and aggregate them.

    Run r uses seed ``seed_base + r``; runs are independent tasks, so the
    aggregate is identical however they are scheduled across workers.
    """
    if parallelism < 1:
        raise ConfigurationError("parallelism must be >= 1")
    indices = list(range(spec.runs))
    if parallelism == 1 or spec.runs == 1:
        traces = [_execute_run(spec, r) for r in indices]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            traces = list(pool.map(_execute_run, [spec] * spec.runs, indices))

    running = np.array([t.running for t in traces])
    windowed = np.array([t.windowed for t in traces])
    ratios = np.array([t.weight_ratio for t in traces])
    n_segments = max(len(t.final_per_segment_accuracy) for t in traces)
    segments = np.full((len(traces), n_segments), np.nan)
    for i, t in enumerate(traces):
        segments[i, : len(t.final_per_segment_accuracy)] = t.final_per_segment_accuracy
    return ExperimentResult(
        spec=spec,
        traces=traces,
        mean_running=running.mean(axis=0),
        std_running=running.std(axis=0),
        mean_windowed=windowed.mean(axis=0),
        std_windowed=windowed.std(axis=0),
        mean_weight_ratio=ratios.mean(axis=0),
        segment_means=np.nanmean(segments, axis=0),
        segment_stds=np.nanstd(segments, axis=0),
    )


# ----------------------------------------------------------------------
# Grid search
# ----------------------------------------------------------------------

_GRID_FIELDS = ("ensemble_size", "forgetting_factor", "performance_index")


@dataclass
class GridSearchResult:
    best_spec: ExperimentSpec
    best_objective: float
    rows: list[dict]


def default_grids() -> dict[str, Sequence]:
    return {
        "ensemble_size": DEFAULT_ENSEMBLE_SIZE_GRID,
        "forgetting_factor": DEFAULT_FORGETTING_FACTOR_GRID,
        "performance_index": DEFAULT_PERFORMANCE_INDEX_GRID,
    }


def grid_search(
    template: ExperimentSpec,
    grids: dict[str, Sequence] | None = None,
    parallelism: int = 1,
) -> GridSearchResult:
    """Evaluate every grid point with :func:`run_experiment` and pick the
    configuration with the highest objective; ties go to the smaller
    ensemble size, then smaller forgetting factor, then smaller index."""
    grids = dict(grids) if grids else default_grids()
    unknown = set(grids) - set(_GRID_FIELDS)
    if unknown:
        raise ConfigurationError(f"unknown grid fields: {sorted(unknown)}")
    if any(len(values) == 0 for values in grids.values()):
        raise ConfigurationError("grids must be nonempty")
    axes = [sorted(grids.get(name, [getattr(template.config, name)])) for name in _GRID_FIELDS]

    best_spec: ExperimentSpec | None = None
    best_objective = -math.inf
    rows: list[dict] = []
    for ensemble_size, theta, sigma in product(*axes):
        config = replace(
            template.config,
            ensemble_size=int(ensemble_size),
            forgetting_factor=float(theta),
            performance_index=float(sigma),
        )
        spec = replace(template, config=config)
        result = run_experiment(spec, parallelism=parallelism)
        rows.append(
            {
                "ensemble_size": int(ensemble_size),
                "forgetting_factor": float(theta),
                "performance_index": float(sigma),
                "objective": result.objective,
            }
        )
        if result.objective > best_objective:
            best_objective = result.objective
            best_spec = spec
    assert best_spec is not None
    return GridSearchResult(best_spec, best_objective, rows)


# ----------------------------------------------------------------------
# CSV output
# ----------------------------------------------------------------------


def _fmt(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.6f}"


def write_results_csv(result: ExperimentResult, path: str) -> None:
    """Per-run, per-target-step series: run, t, segment, accuracies, ratio."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "run",
                "t",
                "segment",
                "accuracy_running",
                "accuracy_window",
                "source_weight_ratio",
            ]
        )
        for run, trace in enumerate(result.traces):
            for t in range(len(trace.running)):
                writer.writerow(
                    [
                        run,
                        t + 1,
                        trace.segment_ids[t],
                        _fmt(trace.running[t]),
                        _fmt(trace.windowed[t]),
                        _fmt(trace.weight_ratio[t]),
                    ]
                )


def write_summary_csv(result: ExperimentResult, path: str) -> None:
    """Across-run mean and standard deviation at each target step."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "t",
                "accuracy_running_mean",
                "accuracy_running_std",
                "accuracy_window_mean",
                "accuracy_window_std",
                "source_weight_ratio_mean",
            ]
        )
        for t in range(result.mean_running.shape[0]):
            writer.writerow(
                [
                    t + 1,
                    _fmt(result.mean_running[t]),
                    _fmt(result.std_running[t]),
                    _fmt(result.mean_windowed[t]),
                    _fmt(result.std_windowed[t]),
                    _fmt(result.mean_weight_ratio[t]),
                ]
            )


def write_segments_csv(result: ExperimentResult, path: str) -> None:
    """Across-run mean and standard deviation of each segment's accuracy."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment", "accuracy_mean", "accuracy_std"])
        for s in range(result.segment_means.shape[0]):
            writer.writerow(
                [s, _fmt(result.segment_means[s]), _fmt(result.segment_stds[s])]
            )


def write_grid_csv(result: GridSearchResult, path: str) -> None:
    """One row per evaluated grid point."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["ensemble_size", "forgetting_factor", "performance_index", "objective"]
        )
        for row in result.rows:
            writer.writerow(
                [
                    row["ensemble_size"],
                    row["forgetting_factor"],
                    row["performance_index"],
                    _fmt(row["objective"]),
                ]
            )

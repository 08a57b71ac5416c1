"""Evaluation protocol: cross-dataset testing, Gaussian noise injection,
noise-level sweeps and stratified cross-validation."""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from dmtree import __version__
from dmtree import rng as rngs
from dmtree.dataset import (
    Dataset,
    DatasetError,
    align_datasets,
    apply_normalization,
    fit_normalization,
)
from dmtree.methods import MethodSpec, model_tree_sizes
from dmtree.stats import accuracy

log = logging.getLogger(__name__)

NOISE_FRACTIONS = (0.05, 0.1, 0.2, 0.3, 0.5)
SIGMA_SOURCES = ("test", "train")
NORMALIZATION_NOTE = "z-score fit on the training set after attribute alignment, applied unchanged to the test set; noise added after normalization"


def box_muller(u1, u2):
    """Standard normal deviate(s) ``sqrt(-2 ln u1) cos(2 pi u2)`` from
    uniforms ``u1`` in (0, 1] and ``u2`` in [0, 1)."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if np.any(u1 <= 0) or np.any(u1 > 1):
        raise ValueError("u1 must lie in (0, 1]")
    if np.any(u2 < 0) or np.any(u2 >= 1):
        raise ValueError("u2 must lie in [0, 1)")
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
    return float(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class NoiseSpec:
    attribute_fraction: float
    trials: int = 100
    seed: int = 0
    sigma_source: str = "test"

    def __post_init__(self):
        if not 0.0 <= self.attribute_fraction <= 1.0:
            raise ValueError("attribute_fraction must lie in [0, 1]")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if self.sigma_source not in SIGMA_SOURCES:
            raise ValueError(f"sigma_source must be one of {SIGMA_SOURCES}")

    def selection_size(self, n_continuous: int) -> int:
        # round half up, not Python's round-half-even
        return int(math.floor(self.attribute_fraction * n_continuous + 0.5))


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    noised: tuple[str, ...]
    accuracy: float
    digest: str = ""


@dataclass
class ExperimentReport:
    kind: str
    train_name: str
    test_name: str
    method: str
    method_label: str
    params: dict
    seed: int
    mean_accuracy: float
    trials: list[TrialResult]
    clean_accuracy: float | None = None
    fraction: float | None = None
    sigma_source: str | None = None
    tree_sizes: list[int] | None = None
    normalization: str = NORMALIZATION_NOTE
    warnings: list[str] = field(default_factory=list)
    version: str = __version__

    @property
    def stderr(self) -> float:
        acc = np.array([t.accuracy for t in self.trials])
        if acc.size < 2:
            return 0.0
        return float(acc.std(ddof=1) / math.sqrt(acc.size))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["trials"] = [
            {"trial": t.trial_index, "accuracy": t.accuracy, "noised": list(t.noised), "digest": t.digest}
            for t in self.trials
        ]
        out["stderr"] = self.stderr
        return out


def _sigmas(d: Dataset) -> dict[str, float]:
    stats = fit_normalization(d)
    return {name: s for name, (_, s) in stats.entries.items()}


def inject_noise(test: Dataset, spec: NoiseSpec, trial: int, sigmas: dict[str, float] | None = None) -> tuple[Dataset, tuple[str, ...]]:
    """Noise a random subset of continuous attributes for one trial.

    ``round(fraction * #continuous)`` attributes are drawn without
    replacement from the ``(NOISE_SELECT, trial)`` stream; every known cell
    of a chosen attribute gets ``sigma * z``, with ``z`` from Box-Muller on
    the ``(NOISE_VALUES, trial, column)`` stream. ``sigmas`` defaults to the
    sample standard deviations of ``test`` itself.
    """
    cont = test.continuous_indices()
    if spec.attribute_fraction > 0 and not cont:
        raise DatasetError("noise injection needs at least one continuous attribute")
    size = spec.selection_size(len(cont))
    if size == 0:
        return test, ()
    if sigmas is None:
        sigmas = _sigmas(test)
    pick = rngs.stream(spec.seed, rngs.NOISE_SELECT, trial).choice(len(cont), size=size, replace=False)
    chosen = sorted(cont[i] for i in pick)
    X = np.array(test.X)
    n = test.n_rows
    for j in chosen:
        r = rngs.stream(spec.seed, rngs.NOISE_VALUES, trial, j)
        z = box_muller(rngs.uniform_open_closed(r, n), r.random(n))
        sigma = sigmas[test.schema[j].name]
        X[:, j] = X[:, j] + sigma * z
    return test.with_values(X), tuple(test.schema[j].name for j in chosen)


def _digest(d: Dataset) -> str:
    return hashlib.sha256(np.ascontiguousarray(d.X).tobytes()).hexdigest()[:16]


def prepare_pair(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
    """Align on shared attributes, z-normalize with training statistics."""
    a, b = align_datasets(train, test)
    if len(a.classes) < 2:
        raise DatasetError(f"training set {train.name!r} has a single class")
    stats = fit_normalization(a)
    return apply_normalization(a, stats), apply_normalization(b, stats)


def _noised_trials(test: Dataset, spec: NoiseSpec, sigmas):
    for t in range(int(spec.trials)):
        noised, names = inject_noise(test, spec, t, sigmas)
        yield t, noised, names


def _evaluate_cells(args):
    """Fit one method and evaluate it on the clean test set and on every
    requested noise level. Runs in worker processes for ``jobs > 1``."""
    train_n, test_n, method, seed, specs, sigma_source = args
    model = method.fit(train_n, seed)
    clean = accuracy(model, test_n)
    sigmas = _sigmas(train_n if sigma_source == "train" else test_n)
    out = []
    for spec in specs:
        trials = []
        if spec is not None:
            for t, noised, names in _noised_trials(test_n, spec, sigmas):
                trials.append(TrialResult(t, names, accuracy(model, noised), _digest(noised)))
        out.append(trials)
    return clean, model_tree_sizes(model), out


def _report(kind, train, test, method, seed, clean, sizes, trials, spec, warnings=()) -> ExperimentReport:
    if not trials:
        trials = [TrialResult(0, (), clean, "")]
    mean = math.fsum(t.accuracy for t in trials) / len(trials)
    return ExperimentReport(
        kind=kind,
        train_name=train.name,
        test_name=test.name,
        method=str(method),
        method_label=method.label,
        params=dict(method.params),
        seed=seed,
        mean_accuracy=mean,
        trials=trials,
        clean_accuracy=clean,
        fraction=None if spec is None else spec.attribute_fraction,
        sigma_source=None if spec is None else spec.sigma_source,
        tree_sizes=sizes,
        warnings=list(warnings),
    )


def parallel_map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def run_cross_lab(train: Dataset, test: Dataset, method: MethodSpec, spec: NoiseSpec | None = None, seed: int = 0) -> ExperimentReport:
    """Train on one dataset, test on another (optionally noised)."""
    train_n, test_n = prepare_pair(train, test)
    sigma_source = spec.sigma_source if spec else "test"
    clean, sizes, (trials,) = _evaluate_cells((train_n, test_n, method, seed, [spec], sigma_source))
    return _report("cross_lab", train, test, method, seed, clean, sizes, trials, spec)


def run_noise_sweep(
    train: Dataset,
    test: Dataset,
    methods: list[MethodSpec],
    fractions: list[float],
    spec: NoiseSpec,
    seed: int = 0,
    jobs: int = 1,
) -> list[ExperimentReport]:
    """Every method at every noise fraction. Trial ``t`` at a given fraction
    draws from the same streams for every method, so all methods see
    byte-identical noised test sets (recorded as per-trial digests)."""
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"noise fraction {f} outside [0, 1]")
    train_n, test_n = prepare_pair(train, test)
    specs = [replace(spec, attribute_fraction=float(f)) for f in fractions]
    tasks = [(train_n, test_n, m, seed, specs, spec.sigma_source) for m in methods]
    results = parallel_map(_evaluate_cells, tasks, jobs)
    reports = []
    for m, (clean, sizes, per_fraction) in zip(methods, results):
        for s, trials in zip(specs, per_fraction):
            reports.append(_report("sweep", train, test, m, seed, clean, sizes, trials, s))
    reports.sort(key=lambda r: (r.fraction, methods_index(methods, r.method)))
    return reports


def methods_index(methods, descriptor: str) -> int:
    return [str(m) for m in methods].index(descriptor)


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold id per row. Each class is shuffled and dealt round-robin,
    continuing the deal across classes so fold sizes differ by at most one."""
    r = rngs.stream(seed, rngs.CV_FOLDS)
    assignment = np.empty(labels.shape[0], dtype=np.intp)
    pos = 0
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = idx[r.permutation(idx.size)]
        assignment[idx] = (pos + np.arange(idx.size)) % folds
        pos += idx.size
    return assignment


def _cv_fold(args):
    d, assignment, fold, method, seed = args
    train = d.subset(np.flatnonzero(assignment != fold))
    test = d.subset(np.flatnonzero(assignment == fold))
    stats = fit_normalization(train)
    model = method.fit(apply_normalization(train, stats), seed)
    return accuracy(model, apply_normalization(test, stats)), model_tree_sizes(model)


def run_cv(d: Dataset, folds: int = 10, method: MethodSpec | None = None, seed: int = 0, jobs: int = 1) -> ExperimentReport:
    """Stratified k-fold cross-validation with per-fold normalization."""
    if int(folds) < 2:
        raise ValueError("folds must be >= 2")
    method = method or MethodSpec.create("dmt")
    warnings = []
    smallest = min(int(np.sum(d.labels == c)) for c in d.classes)
    if smallest < folds:
        reduced = max(2, smallest)
        warnings.append(f"folds reduced from {folds} to {reduced}: smallest class has {smallest} rows")
        log.warning(warnings[-1])
        folds = reduced
    assignment = stratified_folds(d.labels, folds, seed)
    results = parallel_map(_cv_fold, [(d, assignment, f, method, seed) for f in range(folds)], jobs)
    trials = [TrialResult(f, (), acc) for f, (acc, _) in enumerate(results)]
    report = _report("cv", d, d, method, seed, None, None, trials, None, warnings)
    report.normalization = "z-score per fold, fit on the training folds"
    report.params = dict(method.params, folds=folds)
    return report

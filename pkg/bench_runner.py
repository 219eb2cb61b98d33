"""
Bench Runner Module
Experiment configuration, the fit/transform/eval/synth/bench operations and
report emission
"""

import csv
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from scipy.stats import rankdata

from bench_errors import DataError, UsageError
from bench_settings import VERSION, get_default_output_dir, get_default_seed, get_default_workers
from dataset_loader import (
    LabeledDataset,
    NoiseSpec,
    inject_noise,
    load_csv,
    load_idx,
    make_synthetic_fig1,
    make_two_gaussians,
    normalize_minmax,
    resample_images,
    save_csv,
    split,
    subsample,
)
from knn_eval import ExperimentReport, best_of_curve, dim_sweep, fit_projection, knn1_accuracy
from l1blda_admm import AdmmConfig, IterationRecord, solve_l1blda, write_trace_csv
from run_logger import log_event
from spectral_solvers import ProjectionMatrix, check_dimension

logger = logging.getLogger(__name__)

CLEAN = 'clean'
SYNTH_KINDS = ('fig1', 'two-gaussians')


class DatasetSource(BaseModel):
    """Where a bench dataset comes from and how it is prepared"""
    name: str
    kind: Literal['csv', 'idx', 'synthetic'] = 'csv'
    path: Optional[str] = None
    labels_path: Optional[str] = None
    label_column: Union[int, str] = -1
    generator: Literal['fig1', 'two-gaussians'] = 'fig1'
    with_outliers: bool = False
    source_seed: int = Field(default=0, ge=0)
    image_shape: Optional[Tuple[int, int]] = None
    resample_to: Optional[Tuple[int, int]] = None
    subsample: Optional[int] = Field(default=None, ge=2)
    normalize: bool = True
    d_max: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode='after')
    def check_paths(self) -> 'DatasetSource':
        if self.kind in ('csv', 'idx') and not self.path:
            raise ValueError(f"dataset {self.name!r}: kind {self.kind} needs a path")
        if self.kind == 'idx' and not self.labels_path:
            raise ValueError(f"dataset {self.name!r}: kind idx needs labels_path")
        return self


class RunConfig(BaseModel):
    """A full bench: datasets x noise variants x split seeds x methods"""
    datasets: List[DatasetSource] = Field(min_length=1)
    methods: List[Literal['pca', 'lda', 'l2blda', 'l1blda']] = Field(min_length=1)
    d_max: Optional[int] = Field(default=None, ge=1)
    train_fraction: float = Field(default=0.7, gt=0.0, lt=1.0)
    n_seeds: int = Field(default=10, ge=1)
    seed: int = Field(default_factory=get_default_seed, ge=0)
    stratified: bool = True
    noise: List[NoiseSpec] = Field(default_factory=list)
    admm: AdmmConfig = Field(default_factory=AdmmConfig)
    output: str = Field(default_factory=get_default_output_dir)
    emit_trace: bool = False
    workers: int = Field(default_factory=get_default_workers, ge=1)

    @field_validator('methods')
    @classmethod
    def unique_methods(cls, methods: List[str]) -> List[str]:
        if len(set(methods)) != len(methods):
            raise ValueError(f"duplicate methods in {methods}")
        return methods

    @model_validator(mode='after')
    def unique_names(self) -> 'RunConfig':
        names = [source.name for source in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate dataset names in {names}")
        labels = [spec.label() for spec in self.noise]
        if len(set(labels)) != len(labels) or CLEAN in labels:
            raise ValueError(f"noise variants must have distinct labels, got {labels}")
        return self

    def split_seeds(self) -> List[int]:
        return [self.seed + k for k in range(self.n_seeds)]


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """
    Builds a RunConfig from a plain dict.

    Raises:
        UsageError: With pydantic's field-level messages
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise UsageError(f"invalid run config: {e}")


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Reads a JSON run config and applies flag overrides on top.

    Keys of overrides['admm'] are merged into the admm section; None values
    are ignored.
    """
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as e:
            raise UsageError(f"Cannot read config {path}: {e}")
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: invalid JSON ({e})")
        if not isinstance(data, dict):
            raise UsageError(f"{path}: config must be a JSON object")

    for key, value in (overrides or {}).items():
        if key == 'admm':
            section = dict(data.get('admm') or {})
            section.update({k: v for k, v in value.items() if v is not None})
            data['admm'] = section
        elif value is not None:
            data[key] = value
    return validate_run_config(data)


def load_source(source: DatasetSource) -> LabeledDataset:
    """Loads and prepares one bench dataset (resample, subsample, normalize)"""
    if source.kind == 'csv':
        data = load_csv(source.path, label_column=source.label_column, name=source.name)
        if source.image_shape:
            data = data.with_features(data.features, image_shape=source.image_shape)
    elif source.kind == 'idx':
        data = load_idx(source.path, source.labels_path, name=source.name)
    else:
        data = synthesize(source.generator, source.source_seed, source.with_outliers)

    if source.resample_to:
        data = resample_images(data, source.resample_to)
    if source.subsample:
        data = subsample(data, source.subsample, source.source_seed)
    if source.normalize:
        data = normalize_minmax(data)
    return data.with_features(data.features, name=source.name)


def synthesize(kind: str, seed: int, with_outliers: bool = False) -> LabeledDataset:
    if kind == 'fig1':
        return make_synthetic_fig1(seed, with_outliers)
    if kind == 'two-gaussians':
        return make_two_gaussians(seed)
    raise UsageError(f"unknown synthetic kind {kind!r}, expected one of {', '.join(SYNTH_KINDS)}")


# ==================== Projection files ====================

def save_projection(projection: ProjectionMatrix, path: str) -> None:
    """
    Text matrix file: header "n d method seed" ("-" when no seed), then n rows
    of d values written with repr() so they read back exactly.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    seed = '-' if projection.seed is None else str(projection.seed)
    with open(path, 'w') as fh:
        fh.write(f"{projection.n} {projection.d} {projection.method} {seed}\n")
        for row in projection.w:
            fh.write(' '.join(repr(float(v)) for v in row) + '\n')


def load_projection(path: str) -> ProjectionMatrix:
    """
    Raises:
        DataError: Malformed header, wrong row count or row width
    """
    try:
        with open(path) as fh:
            lines = [line.split() for line in fh if line.strip()]
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}")
    if not lines or len(lines[0]) != 4:
        raise DataError(f"{path}: header must be 'n d method seed'")
    n_text, d_text, method, seed_text = lines[0]
    try:
        n, d = int(n_text), int(d_text)
        seed = None if seed_text == '-' else int(seed_text)
    except ValueError:
        raise DataError(f"{path}: header must be 'n d method seed', got {' '.join(lines[0])!r}")
    rows = lines[1:]
    if len(rows) != n:
        raise DataError(f"{path}: header says n={n}, found {len(rows)} rows")
    w = np.empty((n, d))
    for i, row in enumerate(rows):
        if len(row) != d:
            raise DataError(f"{path}: row {i + 2} has {len(row)} values, expected {d}")
        try:
            w[i] = [float(v) for v in row]
        except ValueError:
            raise DataError(f"{path}: row {i + 2} has a non-numeric value")
    return ProjectionMatrix(w=w, method=method, objective=float('nan'), seed=seed)


# ==================== Single operations ====================

def cmd_fit(data: LabeledDataset, method: str, d: int, output_path: str,
            admm: Optional[AdmmConfig] = None, trace_path: Optional[str] = None) -> ProjectionMatrix:
    """
    Fits a projection on a whole dataset and saves it.

    Raises:
        DimensionError: d > n (message names both)
        UsageError: Unknown method
    """
    check_dimension(d, data.n)
    log_event(f"🚀 Fitting {method} on {data.name} (n={data.n}, N={data.N}, d={d})")
    if method == 'l1blda':
        projection, trace = solve_l1blda(data, d, admm)
        if trace_path:
            write_trace_csv(trace, trace_path)
    else:
        projection = fit_projection(data, method, d, admm)
    save_projection(projection, output_path)
    log_event(f"✅ Projection saved: {output_path} (objective {projection.objective:.6g})")
    return projection


def cmd_transform(projection_path: str, data: LabeledDataset, output_path: str) -> LabeledDataset:
    """Applies a saved projection and writes the d-dimensional dataset as CSV"""
    projection = load_projection(projection_path)
    if projection.n != data.n:
        raise DataError(f"projection expects n={projection.n}, {data.name} has n={data.n}")
    projected = data.with_features(projection.transform(data.features), name=f"{data.name}-{projection.method}")
    save_csv(projected, output_path)
    return projected


def cmd_eval(projection_path: str, train: LabeledDataset, test: LabeledDataset) -> float:
    """1-NN accuracy (percent) of a saved projection on a train/test pair"""
    projection = load_projection(projection_path)
    return knn1_accuracy(train, test, projection)


def cmd_synth(kind: str, seed: int, with_outliers: bool, out_path: str) -> LabeledDataset:
    """Writes a synthetic dataset as CSV with a trailing label column"""
    data = synthesize(kind, seed, with_outliers)
    save_csv(data, out_path)
    log_event(f"✅ Synthetic {data.name} written: {out_path} ({data.N} rows)")
    return data


# ==================== Bench ====================

@dataclass
class RunJob:
    source: DatasetSource
    data: LabeledDataset
    noise: Optional[NoiseSpec]
    seed: int
    method: str

    @property
    def noise_label(self) -> str:
        return self.noise.label() if self.noise else CLEAN


@dataclass
class RunResult:
    dataset: str
    noise: str
    seed: int
    method: str
    report: Optional[ExperimentReport] = None
    traces: Dict[int, List[IterationRecord]] = field(default_factory=dict)
    error_type: Optional[str] = None
    message: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass
class BenchReport:
    output_dir: str
    files: Dict[str, str]
    results: List[RunResult]
    failures: List[Dict[str, Any]]
    summaries: Dict[str, Dict[str, Dict[str, Tuple[float, float]]]]


def _safe_name(text: str) -> str:
    return re.sub(r'[^A-Za-z0-9_.-]+', '_', text)


def _execute_run(job: RunJob, config: RunConfig) -> RunResult:
    result = RunResult(dataset=job.source.name, noise=job.noise_label, seed=job.seed, method=job.method)
    try:
        train, test = split(job.data, config.train_fraction, job.seed, config.stratified)
        if job.noise is not None:
            spec = job.noise.model_copy(update={'seed': job.noise.seed + job.seed})
            train = inject_noise(train, spec)

        d_max = min(v for v in (job.data.n, config.d_max, job.source.d_max) if v is not None)

        def keep_trace(d: int, trace: List[IterationRecord]) -> None:
            if config.emit_trace:
                result.traces[d] = trace

        result.report = dim_sweep(
            train, test, job.method, d_max,
            admm=config.admm, seed=job.seed, noise=job.noise_label, on_trace=keep_trace,
        )
    except Exception as e:
        result.error_type = type(e).__name__
        result.message = str(e)
        log_event(
            f"❌ Run failed: {job.source.name} / {job.noise_label} / seed {job.seed} / {job.method}: {e}",
            logging.WARNING,
        )
    return result


def summarize(results: List[RunResult]) -> Dict[str, Dict[str, Dict[str, Tuple[float, float]]]]:
    """
    Median best (accuracy, dimension) across seeds.

    Returns:
        {noise: {dataset: {method: (median accuracy, median dimension)}}}
    """
    grouped: Dict[Tuple[str, str, str], List[Tuple[float, int]]] = {}
    for result in results:
        if result.ok:
            key = (result.noise, result.dataset, result.method)
            grouped.setdefault(key, []).append(best_of_curve(result.report.per_dim))

    summary: Dict[str, Dict[str, Dict[str, Tuple[float, float]]]] = {}
    for (noise, dataset, method), bests in grouped.items():
        accuracies = [b[0] for b in bests]
        dims = [b[1] for b in bests]
        summary.setdefault(noise, {}).setdefault(dataset, {})[method] = (
            float(np.median(accuracies)), float(np.median(dims)),
        )
    return summary


def rank_methods(table: Dict[str, Dict[str, Tuple[float, float]]], methods: List[str],
                 ) -> Tuple[Dict[str, Dict[str, float]], Dict[str, float], Dict[str, float]]:
    """
    Per-dataset ranks (1 = best accuracy, ties averaged) and their means.

    Methods without a result on a dataset get no rank there.

    Returns:
        (ranks per dataset, average rank per method, mean accuracy per method)
    """
    ranks: Dict[str, Dict[str, float]] = {}
    for dataset, cells in table.items():
        present = [m for m in methods if m in cells]
        if not present:
            continue
        values = rankdata([-cells[m][0] for m in present], method='average')
        ranks[dataset] = {m: float(r) for m, r in zip(present, values)}

    average_rank = {}
    mean_accuracy = {}
    for method in methods:
        method_ranks = [r[method] for r in ranks.values() if method in r]
        accuracies = [cells[method][0] for cells in table.values() if method in cells]
        if method_ranks:
            average_rank[method] = float(np.mean(method_ranks))
        if accuracies:
            mean_accuracy[method] = float(np.mean(accuracies))
    return ranks, average_rank, mean_accuracy


def format_cell(accuracy: float, dim: float) -> str:
    """Acc (Dim) cell, e.g. 96.67 (2)"""
    return f"{accuracy:.2f} ({dim:g})"


def _write_csv(path: str, header: List[str], rows: List[List[Any]]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_reports(config: RunConfig, results: List[RunResult], failures: List[Dict[str, Any]],
                   summary: Dict[str, Dict[str, Dict[str, Tuple[float, float]]]]) -> Dict[str, str]:
    out = config.output
    files: Dict[str, str] = {}

    run_rows = []
    for result in results:
        if result.ok:
            for d, accuracy in result.report.per_dim:
                run_rows.append([result.dataset, result.noise, result.seed, result.method, d, repr(float(accuracy))])
    files['runs'] = os.path.join(out, 'runs.csv')
    _write_csv(files['runs'], ['dataset', 'noise', 'seed', 'method', 'dim', 'accuracy'], run_rows)

    noise_labels = [CLEAN] + [spec.label() for spec in config.noise]
    datasets = [source.name for source in config.datasets]
    for noise in noise_labels:
        table = summary.get(noise, {})
        rows = []
        for dataset in datasets:
            cells = table.get(dataset, {})
            rows.append([dataset] + [format_cell(*cells[m]) if m in cells else '' for m in config.methods])
        files[f'summary_{noise}'] = os.path.join(out, f'summary_{_safe_name(noise)}.csv')
        _write_csv(files[f'summary_{noise}'], ['dataset'] + list(config.methods), rows)

        ranks, average_rank, mean_accuracy = rank_methods(table, list(config.methods))
        rank_rows = []
        for dataset in datasets:
            if dataset in ranks:
                rank_rows.append([dataset] + [f"{ranks[dataset][m]:g}" if m in ranks[dataset] else ''
                                              for m in config.methods])
        rank_rows.append(['average rank'] + [f"{average_rank[m]:.4g}" if m in average_rank else ''
                                             for m in config.methods])
        rank_rows.append(['mean accuracy'] + [f"{mean_accuracy[m]:.2f}" if m in mean_accuracy else ''
                                              for m in config.methods])
        files[f'ranks_{noise}'] = os.path.join(out, f'ranks_{_safe_name(noise)}.csv')
        _write_csv(files[f'ranks_{noise}'], ['dataset'] + list(config.methods), rank_rows)

    curves: Dict[Tuple[str, str, str], Dict[int, List[float]]] = {}
    for result in results:
        if result.ok:
            curve = curves.setdefault((result.dataset, result.noise, result.method), {})
            for d, accuracy in result.report.per_dim:
                curve.setdefault(d, []).append(accuracy)
    for (dataset, noise, method), curve in curves.items():
        name = _safe_name(f"{dataset}_{noise}_{method}")
        rows = [[d, repr(float(np.median(values))), repr(float(np.mean(values))), len(values)]
                for d, values in sorted(curve.items())]
        _write_csv(os.path.join(out, 'curves', f'{name}.csv'),
                   ['dim', 'median_accuracy', 'mean_accuracy', 'runs'], rows)
    files['curves'] = os.path.join(out, 'curves')

    if config.emit_trace:
        for result in results:
            for d, trace in result.traces.items():
                name = _safe_name(f"{result.dataset}_{result.noise}_seed{result.seed}_d{d}")
                write_trace_csv(trace, os.path.join(out, 'traces', f'{name}.csv'))
        files['traces'] = os.path.join(out, 'traces')

    files['failures'] = os.path.join(out, 'failures.csv')
    _write_csv(files['failures'], ['dataset', 'noise', 'seed', 'method', 'error_type', 'message'],
               [[f['dataset'], f['noise'], f['seed'], f['method'], f['error_type'], f['message']]
                for f in failures])
    return files


def cmd_bench(config: RunConfig) -> BenchReport:
    """
    Runs every (dataset x noise variant x seed x method) combination.

    Each run splits with its seed, corrupts only the training part, sweeps
    dimensions 1..d_max and records 1-NN accuracies. A failing run is
    recorded and the batch goes on. Runs execute on up to config.workers
    threads; reports are assembled afterwards in job order.

    Output files (under config.output):
        runs.csv                       one row per (run, dim)
        summary_<noise>.csv            median best "Acc (Dim)" per dataset and method
        ranks_<noise>.csv              per-dataset ranks, average rank, mean accuracy
        curves/<dataset>_<noise>_<method>.csv
        traces/...                     L1BLDA iteration traces when emit_trace is set
        failures.csv
        manifest.json                  config echo, version, timestamps
    """
    started = datetime.now(timezone.utc)
    log_event(f"🚀 Starting bench: {len(config.datasets)} dataset(s), methods {', '.join(config.methods)}, "
              f"{config.n_seeds} seed(s), output {config.output}")

    failures: List[Dict[str, Any]] = []
    jobs: List[RunJob] = []
    variants: List[Optional[NoiseSpec]] = [None] + list(config.noise)
    for source in config.datasets:
        try:
            data = load_source(source)
        except Exception as e:
            log_event(f"❌ Cannot load dataset {source.name}: {e}", logging.WARNING)
            failures.append({'dataset': source.name, 'noise': '', 'seed': '', 'method': '',
                             'error_type': type(e).__name__, 'message': str(e)})
            continue
        log_event(f"📍 Dataset {source.name}: n={data.n}, N={data.N}, c={data.c}")
        for noise in variants:
            for seed in config.split_seeds():
                for method in config.methods:
                    jobs.append(RunJob(source=source, data=data, noise=noise, seed=seed, method=method))

    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda job: _execute_run(job, config), jobs))
    else:
        results = [_execute_run(job, config) for job in jobs]

    for result in results:
        if not result.ok:
            failures.append({'dataset': result.dataset, 'noise': result.noise, 'seed': result.seed,
                             'method': result.method, 'error_type': result.error_type,
                             'message': result.message})

    summary = summarize(results)
    files = _write_reports(config, results, failures, summary)

    files['manifest'] = os.path.join(config.output, 'manifest.json')
    manifest = {
        'version': VERSION,
        'started': started.isoformat(),
        'finished': datetime.now(timezone.utc).isoformat(),
        'config': config.model_dump(mode='json'),
        'runs': len(results),
        'failures': len(failures),
        'files': files,
    }
    with open(files['manifest'], 'w') as fh:
        json.dump(manifest, fh, indent=2)

    status = "✅ Bench finished" if not failures else f"⚠️ Bench finished with {len(failures)} failure(s)"
    log_event(f"{status}: {len(results)} run(s), reports in {config.output}")
    return BenchReport(output_dir=config.output, files=files, results=results,
                       failures=failures, summaries=summary)

"""Cross-validated experiment runs and epoch-time sweeps driven by an ExperimentConfig."""

from __future__ import annotations

import hashlib
import io
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from ._jit import HAS_NUMBA
from .baselines import PopularityModel, train_bpr_mf
from .config import PAIRWISE, ExperimentConfig
from .core import FeatureSpace, SparseVector, init_params
from .data import (
    Dataset,
    Interaction,
    cross_domain_split,
    dedupe,
    densify,
    kfold_indices,
    parse_csv,
    parse_item_table,
    to_implicit,
    write_fold_manifest,
)
from .errors import ConfigError, EvaluationError, FMPairError, NumericDivergenceError, UntrainableDatasetError
from .evaluation import (
    EvalReport,
    encode_test,
    evaluate_fold,
    fm_scorer,
    mf_scorer,
    observed_items,
    popularity_scorer,
    recall_at_n,
)
from .features import ContextDimension, ContextSchema, attribute_builder, context_builder, cross_domain_builder
from .pairwise import draw_samples, run_epoch, seed_streams, train
from .pointwise import explicit_instances, train_fm_map, train_pointwise

log = logging.getLogger(__name__)


class StageError(FMPairError):
    """Failure in one stage (data, train, eval) of a run, with the fold it happened in."""

    def __init__(self, stage: str, fold: int | None, cause: Exception):
        self.stage = stage
        self.fold = fold
        self.cause = cause
        where = f" (fold {fold})" if fold is not None else ""
        super().__init__(f"{stage} error{where}: {type(cause).__name__}: {cause}")


@dataclass
class Fold:
    index: int
    train: list[Interaction]
    test: list[Interaction]
    test_index: np.ndarray
    source: list[Interaction]


@dataclass
class Prepared:
    raw: list[Interaction]
    positives: list[Interaction]
    folds: list[Fold]


@dataclass
class RunResult:
    report: EvalReport
    convergence: list[tuple]
    out_dir: Path | None


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def prepare(cfg: ExperimentConfig) -> Prepared:
    """Parse, filter, map to positives and split into folds."""
    raw = parse_csv(cfg.path, cfg.descriptor)
    if cfg.densify > 1:
        raw = densify(raw, cfg.densify)
    positives = dedupe(to_implicit(raw) if cfg.implicit else raw)
    if cfg.cross_domain is not None:
        # every arm of a cross-domain run is folded and evaluated on the target domain only
        folds = [
            Fold(f, cd.train, cd.test, cd.test_index, cd.source)
            for f, cd in enumerate(cross_domain_split(positives, cfg.cross_domain, cfg.folds, cfg.split_seed))
        ]
    else:
        folds = []
        for f, idx in enumerate(kfold_indices(len(positives), cfg.folds, cfg.split_seed)):
            mask = np.zeros(len(positives), dtype=bool)
            mask[idx] = True
            train_part = [it for it, m in zip(positives, mask) if not m]
            test_part = [it for it, m in zip(positives, mask) if m]
            folds.append(Fold(f, train_part, test_part, idx, []))
    return Prepared(raw, positives, folds)


def _aux_builders(cfg: ExperimentConfig, fold: Fold):
    """(interaction aux builder, item attribute builder) for the configured method."""
    if cfg.method == "fm-pair-cd":
        return cross_domain_builder(cfg.cross_domain, fold.source), None
    if cfg.method != "fm-pair-context":
        return None, None
    aux = context_builder(cfg.context) if cfg.context is not None else None
    attrs = None
    if cfg.attributes is not None:
        a = cfg.attributes
        table = parse_item_table(
            a.path, a.item_column, a.delimiter, a.encoding, a.header, a.flag_columns, a.flag_names, a.value_columns,
            a.dimension,
        )
        attrs = attribute_builder(ContextSchema([ContextDimension(a.dimension)], a.normalize), table)
    return aux, attrs


def _target_positives(cfg: ExperimentConfig, prep: Prepared) -> list[Interaction]:
    if cfg.cross_domain is not None:
        return [it for it in prep.positives if it.domain == cfg.cross_domain.target]
    return prep.positives


def build_training(cfg: ExperimentConfig, prep: Prepared, fold: Fold) -> tuple[Dataset, object]:
    """Training Dataset for ``fold`` plus the aux builder used for its test points."""
    aux, attrs = _aux_builders(cfg, fold)
    if cfg.method == "fm-pair-all":
        interactions = fold.train + fold.source
    elif cfg.method == "fm-explicit":
        held_out = {it.pair for it in fold.test}
        interactions = [it for it in prep.raw if it.pair not in held_out]
    else:
        interactions = fold.train
    return Dataset.from_interactions(interactions, aux, item_attributes=attrs), aux


def _universe(cfg: ExperimentConfig, data: Dataset, fold: Fold) -> np.ndarray | None:
    if cfg.method != "fm-pair-all":
        return None
    # only target-domain training items are candidates, as for the other arms
    ids = {data.space.id("item", it.item) for it in fold.train}
    return np.array(sorted(ids), dtype=np.int64)


def fit(cfg: ExperimentConfig, data: Dataset, callback=None):
    """Train the configured method; returns a scorer."""
    m = cfg.method
    if m in PAIRWISE:
        model = train(data, cfg.train, callback)
        return fm_scorer(model, data.attributes)
    if m == "bpr-mf":
        return mf_scorer(train_bpr_mf(data, cfg.train, callback))
    if m == "most-popular":
        return popularity_scorer(PopularityModel.fit(data))
    if m == "fm-map":
        model = train_fm_map(data, cfg.train, cfg.negative_label, cfg.resample_negatives, callback)
        return fm_scorer(model, data.attributes)
    if m == "fm-explicit":
        ratings = [it.rating for it in data.interactions]
        model = train_pointwise(explicit_instances(data, ratings), cfg.train, space=data.space, callback=callback)
        return fm_scorer(model, data.attributes)
    raise ValueError(f"unknown method {m!r}")


def run_fold(cfg: ExperimentConfig, prep: Prepared, fold: Fold, convergence: list | None = None):
    try:
        data, aux = build_training(cfg, prep, fold)
        tests = encode_test(fold.test, data, aux)
        universe = _universe(cfg, data, fold)
        observed = observed_items(data, _target_positives(cfg, prep)) if cfg.exclude == "all" else None
    except (FMPairError, ValueError, KeyError, OSError) as exc:
        raise StageError("data", fold.index, exc) from exc

    callback = None
    if convergence is not None and cfg.track_every > 0:
        if cfg.method in PAIRWISE or cfg.method in ("fm-map", "fm-explicit"):
            make = lambda model: fm_scorer(model, data.attributes)  # noqa: E731
        elif cfg.method == "bpr-mf":
            make = mf_scorer
        else:
            make = None

        def callback(epoch, mean_loss, model):
            if make is not None and (epoch + 1) % cfg.track_every == 0:
                res = evaluate_fold(
                    make(model), tests, data, (cfg.track_n,), cfg.pool, cfg.eval_seed, fold.index, universe, observed
                )
                convergence.append((fold.index, epoch + 1, mean_loss, recall_at_n(res.ranks, cfg.track_n)))

    t0 = time.monotonic()
    try:
        scorer = fit(cfg, data, callback)
    except (NumericDivergenceError, UntrainableDatasetError, ValueError) as exc:
        raise StageError("train", fold.index, exc) from exc
    t1 = time.monotonic()
    try:
        result = evaluate_fold(scorer, tests, data, cfg.ns, cfg.pool, cfg.eval_seed, fold.index, universe, observed)
    except (EvaluationError, IndexError) as exc:
        raise StageError("eval", fold.index, exc) from exc
    log.info(
        "fold %d: train %.1fs, eval %.1fs, Recall@%d %.4f",
        fold.index, t1 - t0, time.monotonic() - t1, cfg.ns[0], result.recall[cfg.ns[0]],
    )
    return result


def manifest_text(cfg: ExperimentConfig, prep: Prepared | None) -> str:
    """Resolved config plus a [run] section that parsers skip."""
    lines = [
        "# re-run with: fmpair run manifest.txt",
        cfg.to_ini().rstrip("\n"),
        "",
        "[run]",
        f"version = {__version__}",
        f"jit = {str(HAS_NUMBA).lower()}",
        f"train_seed = {cfg.train.seed}",
        f"split_seed = {cfg.split_seed}",
        f"eval_seed = {cfg.eval_seed}",
    ]
    for path in cfg.input_files():
        lines.append(f"sha256.{Path(path).name} = {sha256(path)}")
    if prep is not None:
        lines.append(f"interactions = {len(prep.raw)}")
        lines.append(f"positives = {len(prep.positives)}")
        lines.append(f"test_sizes = {', '.join(str(len(f.test)) for f in prep.folds)}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Every fold of the configured method; writes report files when ``out_dir`` is given."""
    try:
        prep = prepare(cfg)
    except (FMPairError, ValueError, OSError) as exc:
        raise StageError("data", None, exc) from exc
    report = EvalReport(cfg.method, list(cfg.ns), cfg.pool, cfg.eval_seed)
    convergence: list[tuple] = []
    for fold in prep.folds:
        report.folds.append(run_fold(cfg, prep, fold, convergence))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text())
        (out / "metrics.csv").write_text(report.to_csv())
        (out / "manifest.txt").write_text(manifest_text(cfg, prep))
        write_fold_manifest(out / "folds.txt", [f.test_index for f in prep.folds])
        if convergence:
            buf = io.StringIO()
            buf.write(f"fold,epoch,mean_loss,recall@{cfg.track_n}\n")
            for row in convergence:
                buf.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
            (out / "convergence.csv").write_text(buf.getvalue())
    return RunResult(report, convergence, Path(out_dir) if out_dir is not None else None)


# timing sweeps


def with_synthetic_aux(data: Dataset, n_aux: int, seed=0, pool: int = 1000) -> Dataset:
    """Copy of ``data`` (no aux) where every interaction carries ``n_aux`` random aux features.

    Features come from a pool of ``pool`` synthetic ids, each with value 1.
    """
    space = FeatureSpace(data.space.keys("user"), data.space.keys("item"))
    if n_aux:
        for a in range(pool):
            space.add("aux", f"synthetic:{a}")
    rng = np.random.default_rng(seed)
    lo = space.offset("aux")
    aux = []
    for _ in range(len(data)):
        ids = rng.choice(pool, size=n_aux, replace=False) + lo if n_aux else np.zeros(0, np.int64)
        aux.append(SparseVector(ids, np.ones(n_aux)))
    return Dataset(data.interactions, space, aux)


class _EpochClock:
    """One FM-Pair training state whose epochs can be timed one at a time."""

    def __init__(self, data: Dataset, cfg):
        self.data = data
        self.cfg = cfg
        init_ss, self.rng = seed_streams(cfg.seed)
        self.model = init_params(data.space.n, cfg.k, cfg.sigma0, init_ss)
        self.epoch = 0

    def tick(self) -> float:
        t0 = time.monotonic()
        batch = draw_samples(self.data, self.rng, len(self.data))
        run_epoch(self.model, self.data, batch, self.cfg, self.epoch)
        self.epoch += 1
        return time.monotonic() - t0


def epoch_times(data: Dataset, cfg, epochs: int, warmup: int = 1) -> np.ndarray:
    """Wall-clock seconds of ``epochs`` FM-Pair epochs after ``warmup`` untimed ones."""
    clock = _EpochClock(data, cfg)
    for _ in range(warmup):
        clock.tick()
    return np.array([clock.tick() for _ in range(epochs)])


@dataclass
class TimingRow:
    param: str
    value: int
    mean_ms: float
    std_ms: float
    epochs: int


def run_timing_sweep(
    cfg: ExperimentConfig, param: str, values: Sequence[int], epochs: int = 5, warmup: int = 1, out_dir=None,
    folds: Sequence[int] | None = None,
) -> list[TimingRow]:
    """Mean FM-Pair epoch time per swept value of ``k`` or synthetic ``z``, over folds.

    Folds run one after another; within a fold the swept values take turns
    epoch by epoch. Times use the monotonic clock and exclude each fold's
    warm-up epochs.
    """
    if param not in ("k", "z"):
        raise ConfigError("--param", f"must be 'k' or 'z', got {param!r}")
    if not values or min(values) < 0:
        raise ConfigError("--values", "need one or more non-negative integers")
    try:
        prep = prepare(cfg)
    except (FMPairError, ValueError, OSError) as exc:
        raise StageError("data", None, exc) from exc
    chosen = [prep.folds[i] for i in folds] if folds is not None else prep.folds
    times: dict[int, list[float]] = {int(v): [] for v in values}
    for fold in chosen:
        base = Dataset.from_interactions(fold.train)
        clocks = {}
        for v in values:
            tc = replace(cfg.train, k=int(v)) if param == "k" else cfg.train
            data = with_synthetic_aux(base, int(v), seed=[cfg.split_seed, fold.index]) if param == "z" else base
            clocks[int(v)] = _EpochClock(data, tc)
        try:
            for _ in range(warmup):
                for clock in clocks.values():
                    clock.tick()
            # round-robin so slow drift in machine load hits every value alike
            for _ in range(epochs):
                for v, clock in clocks.items():
                    times[v].append(clock.tick())
        except (NumericDivergenceError, UntrainableDatasetError) as exc:
            raise StageError("train", fold.index, exc) from exc
    rows = []
    for v in times:
        t = np.array(times[v]) * 1000.0
        rows.append(TimingRow(param, v, float(t.mean()), float(t.std(ddof=1)) if t.size > 1 else 0.0, t.size))
        log.info("%s=%d: %.2f ms/epoch", param, v, rows[-1].mean_ms)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "timing.csv").write_text(timing_csv(rows))
        (out / "manifest.txt").write_text(
            manifest_text(cfg, prep) + f"sweep = {param}: {', '.join(map(str, values))}\n"
            f"sweep_epochs = {epochs}\nsweep_warmup = {warmup}\n"
        )
    return rows


def timing_csv(rows: Sequence[TimingRow]) -> str:
    buf = io.StringIO()
    buf.write("param,value,mean_epoch_ms,std_epoch_ms,epochs\n")
    for r in rows:
        buf.write(f"{r.param},{r.value},{r.mean_ms!r},{r.std_ms!r},{r.epochs}\n")
    return buf.getvalue()


def linear_fit_r2(x, y) -> float:
    """R^2 of the least-squares line through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    return float(1.0 - np.sum(resid**2) / total) if total > 0 else 1.0

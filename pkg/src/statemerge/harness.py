"""Experiment driver: trains recognizers, runs extractions and the k-means
baseline, computes fidelity, and reproduces the summary table and sweeps."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rnn
from .automata import Dfa, determinize, prefix_decisions, save_dfa, to_dot
from .extraction import ExtractionReport, extract
from .kmeans import kmeans_extract
from .languages import ALPHABET, LabeledSample, sample_balanced, sample_eval_set
from .rnn import AdamWHyper, Checkpoint, RnnModel, best_checkpoint

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "STATEMERGE_SEED"
THREADS_ENV_VAR = "STATEMERGE_THREADS"


@dataclass(frozen=True)
class TrainingConfig:
    language: int
    seed: int = 0
    n_train: int = 20_000
    train_len: int = 50
    n_dev: int = 1_000
    dev_len: int = 100
    embed_dim: int = 10
    hidden_dim: int = 100
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2

    def hyper(self) -> AdamWHyper:
        return AdamWHyper(self.lr, self.beta1, self.beta2, self.eps, self.weight_decay)

    def cache_key(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]


def full_scale_config(language: int, seed: int = 0) -> TrainingConfig:
    """The original protocol: 100k length-100 strings, 22 epochs."""
    return TrainingConfig(language, seed, n_train=100_000, train_len=100,
                          n_dev=1_000, dev_len=200, epochs=22)


def light_config(language: int, seed: int = 0) -> TrainingConfig:
    """Smaller run used for the per-epoch (implicit merging) sweeps."""
    return TrainingConfig(language, seed, n_train=5_000, epochs=20)


@dataclass(frozen=True)
class ExtractionConfig:
    kappa: float = 0.01
    n_strings: int = 300
    string_len: int = 10


@dataclass(frozen=True)
class ExperimentConfig:
    languages: tuple[int, ...] = tuple(range(1, 8))
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    extraction: ExtractionConfig = ExtractionConfig()
    kmeans_k: int = 20
    n_eval: int = 1_000
    eval_max_len: int = 50
    threads: int = 1

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


RESULT_FIELDS = ("language", "method", "seed", "epoch", "data_count", "kappa",
                 "acc_vs_rnn", "acc_vs_gold", "merged_size", "minimized_size",
                 "wall_time")


@dataclass
class ResultRow:
    language: int
    method: str
    seed: int
    epoch: int
    data_count: int
    kappa: float
    acc_vs_rnn: float
    acc_vs_gold: float
    merged_size: int
    minimized_size: int
    wall_time: float


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULT_FIELDS)
    for row in rows:
        writer.writerow([getattr(row, f) for f in RESULT_FIELDS])
    return buf.getvalue()


def metrics_to_csv(metrics: list[rnn.EpochMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["epoch", "train_loss", "dev_accuracy", "dev_string_accuracy", "param_norm"])
    for m in metrics:
        writer.writerow([m.epoch, m.train_loss, m.dev_accuracy, m.dev_string_accuracy, m.param_norm])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Training with on-disk caching


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(list(key))


def train_recognizer(config: TrainingConfig,
                     out_dir: Path) -> tuple[list[Checkpoint], list[rnn.EpochMetrics]]:
    """Train a recognizer for one language, writing per-epoch checkpoints, a
    metrics table, and the resolved config to out_dir.  Re-loads from disk if
    the directory already holds a finished run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    done = out_dir / "DONE"
    if done.exists():
        checkpoints = [rnn.load_checkpoint((out_dir / f"epoch{e:03d}.ckpt").read_text())[0]
                       for e in range(1, config.epochs + 1)]
        return checkpoints, _load_metrics(out_dir / "metrics.csv")
    logger.info("training Tomita %d (seed %d, %d epochs)", config.language,
                config.seed, config.epochs)
    rng_data = _rng(config.seed, config.language, 0)
    rng_init = _rng(config.seed, config.language, 1)
    rng_train = _rng(config.seed, config.language, 2)
    train_set = sample_balanced(config.language, config.train_len, config.n_train, rng_data)
    dev_set = sample_balanced(config.language, config.dev_len, config.n_dev, rng_data)
    model = rnn.init_model(ALPHABET, config.embed_dim, config.hidden_dim, rng_init)
    meta = {"language": config.language, "seed": config.seed}
    checkpoints, metrics = rnn.train(model, train_set, dev_set, config.epochs,
                                     config.hyper(), rng_train,
                                     batch_size=config.batch_size, metadata=meta)
    for ckpt in checkpoints:
        path = out_dir / f"epoch{ckpt.metadata['epoch']:03d}.ckpt"
        path.write_text(rnn.save_checkpoint(ckpt, ALPHABET))
    (out_dir / "metrics.csv").write_text(metrics_to_csv(metrics))
    (out_dir / "config.json").write_text(
        json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True))
    done.write_text("ok\n")
    return checkpoints, metrics


def _load_metrics(path: Path) -> list[rnn.EpochMetrics]:
    out = []
    with path.open() as fh:
        for record in csv.DictReader(fh):
            out.append(rnn.EpochMetrics(int(record["epoch"]), float(record["train_loss"]),
                                        float(record["dev_accuracy"]),
                                        float(record["dev_string_accuracy"]),
                                        float(record["param_norm"])))
    return out


def ensure_trained(config: TrainingConfig, cache_dir: Path) -> tuple[list[Checkpoint], list[rnn.EpochMetrics]]:
    out_dir = cache_dir / f"tomita{config.language}_seed{config.seed}_{config.cache_key()}"
    return train_recognizer(config, out_dir)


def best_model(checkpoints: list[Checkpoint]) -> RnnModel:
    return rnn.model_from_checkpoint(best_checkpoint(checkpoints), ALPHABET)


# ---------------------------------------------------------------------------
# Fidelity


@dataclass(frozen=True)
class FidelityResult:
    vs_rnn: float          # full-string agreement with the model
    vs_gold: float         # full-string agreement with the stored labels
    prefix_vs_rnn: float   # per-prefix agreement, logged as a secondary metric


def model_prefix_decisions(model: RnnModel, strings: list[str]) -> dict[str, list[bool]]:
    """Per-prefix decisions for many strings, batched by length."""
    by_len: dict[int, list[str]] = {}
    for w in set(strings):
        by_len.setdefault(len(w), []).append(w)
    out: dict[str, list[bool]] = {}
    for group in by_len.values():
        ids = np.array([[model.bos] + model.token_ids(w) for w in group])
        hidden = rnn._forward_ids(model.params, ids)
        preds = rnn._head_probs(model.params, hidden) > 0.5  # (T, B)
        for i, w in enumerate(group):
            out[w] = [bool(p) for p in preds[:, i]]
    return out


def fidelity(dfa: Dfa, model: RnnModel, eval_set: list[LabeledSample]) -> FidelityResult:
    if not eval_set:
        raise ValueError("eval set must be nonempty")
    rnn_verdicts = model_prefix_decisions(model, [s.x for s in eval_set])
    agree_rnn = agree_gold = 0
    prefix_agree = prefix_total = 0
    for sample in eval_set:
        dfa_preds = prefix_decisions(dfa, sample.x)
        rnn_preds = rnn_verdicts[sample.x]
        agree_rnn += dfa_preds[-1] == rnn_preds[-1]
        agree_gold += dfa_preds[-1] == sample.y[-1]
        prefix_agree += sum(p == q for p, q in zip(dfa_preds, rnn_preds))
        prefix_total += len(dfa_preds)
    return FidelityResult(agree_rnn / len(eval_set), agree_gold / len(eval_set),
                          prefix_agree / prefix_total)


# ---------------------------------------------------------------------------
# Experiments


def extraction_strings(language: int, count: int, length: int, seed: int) -> list[str]:
    rng = _rng(seed, language, 10)
    return [s.x for s in sample_balanced(language, length, count, rng)]


def eval_set_for(language: int, config: ExperimentConfig) -> list[LabeledSample]:
    return sample_eval_set(language, config.n_eval, config.eval_max_len,
                           _rng(language, 999))


def run_extraction(model: RnnModel, language: int, seed: int, epoch: int,
                   config: ExperimentConfig,
                   eval_set: list[LabeledSample] | None = None,
                   n_strings: int | None = None,
                   kappa: float | None = None,
                   string_len: int | None = None) -> tuple[ResultRow, ExtractionReport]:
    ext = config.extraction
    n_strings = n_strings if n_strings is not None else ext.n_strings
    kappa = kappa if kappa is not None else ext.kappa
    string_len = string_len if string_len is not None else ext.string_len
    strings = extraction_strings(language, n_strings, string_len, seed)
    eval_set = eval_set if eval_set is not None else eval_set_for(language, config)
    start = time.perf_counter()
    report = extract(model, strings, kappa)
    fid = fidelity(report.final, model, eval_set)
    row = ResultRow(language, "state_merging", seed, epoch, n_strings, kappa,
                    fid.vs_rnn, fid.vs_gold, report.sizes[1], report.sizes[2],
                    time.perf_counter() - start)
    return row, report


def run_kmeans_baseline(model: RnnModel, language: int, seed: int, epoch: int,
                        config: ExperimentConfig,
                        eval_set: list[LabeledSample] | None = None) -> tuple[ResultRow, Dfa]:
    ext = config.extraction
    strings = extraction_strings(language, ext.n_strings, ext.string_len, seed)
    eval_set = eval_set if eval_set is not None else eval_set_for(language, config)
    start = time.perf_counter()
    dfa = kmeans_extract(model, strings, config.kmeans_k, _rng(seed, language, 20))
    fid = fidelity(dfa, model, eval_set)
    row = ResultRow(language, "kmeans", seed, epoch, ext.n_strings, 0.0,
                    fid.vs_rnn, fid.vs_gold, len(dfa.states), len(dfa.states),
                    time.perf_counter() - start)
    return row, dfa


@dataclass
class Table2Summary:
    mean_acc: float
    std_acc: float
    sizes: list[int]


def summarize(rows: list[ResultRow]) -> dict[tuple[int, str], Table2Summary]:
    grouped: dict[tuple[int, str], list[ResultRow]] = {}
    for row in rows:
        grouped.setdefault((row.language, row.method), []).append(row)
    summary = {}
    for key, group in grouped.items():
        accs = [r.acc_vs_rnn for r in group]
        summary[key] = Table2Summary(
            statistics.fmean(accs),
            statistics.pstdev(accs) if len(accs) > 1 else 0.0,
            [r.minimized_size for r in group])
    return summary


def reproduce_table2(config: ExperimentConfig, models: dict[int, RnnModel]
                     ) -> tuple[list[ResultRow], dict[tuple[int, str], Table2Summary]]:
    """State-merging extraction and k-means baseline per language and seed."""
    jobs = [(language, seed) for language in config.languages for seed in config.seeds]

    def one(job: tuple[int, int]) -> list[ResultRow]:
        language, seed = job
        model = models[language]
        eval_set = eval_set_for(language, config)
        row_sm, _ = run_extraction(model, language, seed, 0, config, eval_set)
        row_km, _ = run_kmeans_baseline(model, language, seed, 0, config, eval_set)
        return [row_sm, row_km]

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            batches = list(pool.map(one, jobs))
    else:
        batches = [one(job) for job in jobs]
    rows = [row for batch in batches for row in batch]
    return rows, summarize(rows)


def sweep_data_size(config: ExperimentConfig, models: dict[int, RnnModel],
                    grid: tuple[int, ...] = (15, 25, 45, 75, 135, 200, 300, 500),
                    string_len: int = 15) -> list[ResultRow]:
    rows = []
    for language in config.languages:
        eval_set = eval_set_for(language, config)
        for n_strings in grid:
            for seed in config.seeds:
                row, _ = run_extraction(models[language], language, seed, 0, config,
                                        eval_set, n_strings=n_strings,
                                        string_len=string_len)
                rows.append(row)
    return rows


def sweep_kappa(config: ExperimentConfig, model: RnnModel, language: int = 2,
                kappas: tuple[float, ...] = (0.5, 0.4, 0.01),
                out_dir: Path | None = None) -> list[tuple[ResultRow, ExtractionReport]]:
    results = []
    eval_set = eval_set_for(language, config)
    for kappa in kappas:
        row, report = run_extraction(model, language, config.seeds[0], 0, config,
                                     eval_set, kappa=kappa)
        results.append((row, report))
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            merged_dfa = determinize(report.merged)
            tag = f"tomita{language}_kappa{kappa}"
            (out_dir / f"{tag}_merged.dot").write_text(to_dot(merged_dfa))
            (out_dir / f"{tag}_final.dot").write_text(to_dot(report.final))
            (out_dir / f"{tag}_final.dfa").write_text(save_dfa(report.final))
    return results


def sweep_epochs(config: ExperimentConfig, checkpoints: dict[int, list[Checkpoint]],
                 epochs: tuple[int, ...] | None = None,
                 grid: tuple[int, ...] = (300,)) -> list[ResultRow]:
    """Extraction metrics per training epoch; merged_size here is the
    pre-minimization size."""
    rows = []
    for language, ckpts in checkpoints.items():
        eval_set = eval_set_for(language, config)
        wanted = epochs if epochs is not None else tuple(
            c.metadata["epoch"] for c in ckpts)
        for ckpt in ckpts:
            epoch = ckpt.metadata["epoch"]
            if epoch not in wanted:
                continue
            model = rnn.model_from_checkpoint(ckpt, ALPHABET)
            for n_strings in grid:
                for seed in config.seeds:
                    row, _ = run_extraction(model, language, seed, int(epoch), config,
                                            eval_set, n_strings=n_strings)
                    rows.append(row)
    return rows


def min_data_for_full_fidelity(model: RnnModel, language: int, seed: int,
                               config: ExperimentConfig,
                               grid: tuple[int, ...]) -> int | None:
    """Smallest grid entry at which extraction reaches 100% fidelity."""
    eval_set = eval_set_for(language, config)
    for n_strings in sorted(grid):
        row, _ = run_extraction(model, language, seed, 0, config, eval_set,
                                n_strings=n_strings)
        if row.acc_vs_rnn == 1.0:
            return n_strings
    return None

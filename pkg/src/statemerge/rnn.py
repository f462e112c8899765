"""Elman recurrent recognizer with a per-position classification head.

Forward recurrence: h_{t+1} = tanh(U h_t + V x_{t+1} + b), float64 throughout.
Every string is fed a begin-of-sequence token first, so row 0 of the hidden
state matrix represents the empty string.  Training is plain minibatched
backpropagation through time with AdamW.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .languages import LabeledSample

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
PARAM_NAMES = ("embed", "w_ih", "w_hh", "b_h", "w_out", "b_out")


class TrainingError(RuntimeError):
    pass


@dataclass
class RnnModel:
    alphabet: tuple[str, ...]
    params: dict[str, np.ndarray]

    @property
    def hidden_dim(self) -> int:
        return self.params["w_hh"].shape[0]

    @property
    def bos(self) -> int:
        return len(self.alphabet)

    def token_ids(self, w: str) -> list[int]:
        try:
            return [self.alphabet.index(t) for t in w]
        except ValueError:
            bad = next(t for t in w if t not in self.alphabet)
            raise ValueError(f"token {bad!r} not in alphabet {self.alphabet}") from None

    def copy(self) -> "RnnModel":
        return RnnModel(self.alphabet, {k: v.copy() for k, v in self.params.items()})


@dataclass
class ForwardResult:
    hidden: np.ndarray  # (n+1, d); row i is the state after prefix w[:i]
    yhat: np.ndarray    # (n+1,); probability each prefix is in the language


def init_model(alphabet: tuple[str, ...], embed_dim: int, hidden_dim: int,
               rng: np.random.Generator) -> RnnModel:
    """Weight matrices and the recurrence bias start
    uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); the embedding table starts
    standard normal.  The strong input drive pushes
    tanh states toward their saturated corners early in training, which the
    downstream state clustering depends on; with a +/-1/sqrt(embed_dim)
    embedding the hidden states stay diffuse and never cluster."""
    if embed_dim < 1 or hidden_dim < 1:
        raise ValueError("dimensions must be positive")

    def uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    n_tokens = len(alphabet) + 1  # + begin-of-sequence
    params = {
        "embed": rng.normal(0.0, 1.0, size=(n_tokens, embed_dim)),
        "w_ih": uniform((hidden_dim, embed_dim), embed_dim),
        "w_hh": uniform((hidden_dim, hidden_dim), hidden_dim),
        "b_h": uniform((hidden_dim,), hidden_dim),
        "w_out": uniform((2, hidden_dim), hidden_dim),
        "b_out": np.zeros(2),
    }
    return RnnModel(alphabet, params)


def _forward_ids(params: dict[str, np.ndarray], ids: np.ndarray) -> np.ndarray:
    """Hidden states for a batch of id sequences (B, T) -> (T, B, d)."""
    w_ih, w_hh, b_h, embed = params["w_ih"], params["w_hh"], params["b_h"], params["embed"]
    batch, steps = ids.shape
    d = w_hh.shape[0]
    hidden = np.zeros((steps, batch, d))
    h = np.zeros((batch, d))
    for t in range(steps):
        h = np.tanh(h @ w_hh.T + embed[ids[:, t]] @ w_ih.T + b_h)
        hidden[t] = h
    return hidden


def _head_probs(params: dict[str, np.ndarray], hidden: np.ndarray) -> np.ndarray:
    logits = hidden @ params["w_out"].T + params["b_out"]
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp[..., 1] / exp.sum(axis=-1)


def forward(model: RnnModel, w: str) -> ForwardResult:
    ids = np.array([[model.bos] + model.token_ids(w)])
    hidden = _forward_ids(model.params, ids)[:, 0, :]
    return ForwardResult(hidden=hidden, yhat=_head_probs(model.params, hidden))


def decisions(model: RnnModel, w: str) -> list[bool]:
    """Per-prefix accept decisions; an exact 0.5 tie resolves to reject."""
    return [bool(p) for p in forward(model, w).yhat > 0.5]


def loss_and_grads(params: dict[str, np.ndarray], ids: np.ndarray,
                   labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Mean over the batch of per-sequence summed cross-entropy, with full
    backpropagation through time.  ids: (B, T) including bos; labels: (B, T)."""
    embed, w_ih, w_hh, w_out, b_out = (params[k] for k in
                                       ("embed", "w_ih", "w_hh", "w_out", "b_out"))
    batch, steps = ids.shape
    hidden = _forward_ids(params, ids)
    logits = hidden @ w_out.T + b_out
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    y = labels.astype(np.int64)
    logp = shifted - np.log(exp.sum(axis=-1, keepdims=True))
    loss = -float(np.take_along_axis(logp, y.T[..., None], axis=-1).sum()) / batch

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dlogits = probs.copy()
    np.put_along_axis(dlogits, y.T[..., None],
                      np.take_along_axis(dlogits, y.T[..., None], axis=-1) - 1.0, axis=-1)
    dlogits /= batch
    grads["b_out"] = dlogits.sum(axis=(0, 1))
    carry = np.zeros_like(hidden[0])
    for t in range(steps - 1, -1, -1):
        h = hidden[t]
        grads["w_out"] += dlogits[t].T @ h
        dh = dlogits[t] @ w_out + carry
        da = dh * (1.0 - h * h)
        h_prev = hidden[t - 1] if t > 0 else np.zeros_like(h)
        grads["w_hh"] += da.T @ h_prev
        grads["w_ih"] += da.T @ embed[ids[:, t]]
        grads["b_h"] += da.sum(axis=0)
        np.add.at(grads["embed"], ids[:, t], da @ w_ih)
        carry = da @ w_hh
    return loss, grads


@dataclass(frozen=True)
class AdamWHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2


@dataclass
class AdamWState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamWState":
        return cls(0, {k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               state: AdamWState, hyper: AdamWHyper) -> tuple[dict[str, np.ndarray], AdamWState]:
    """One decoupled-weight-decay Adam update; pure, returns fresh arrays."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {k}")
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = hyper.beta1 * state.m[k] + (1 - hyper.beta1) * g
        v = hyper.beta2 * state.v[k] + (1 - hyper.beta2) * g * g
        m_hat = m / (1 - hyper.beta1 ** t)
        v_hat = v / (1 - hyper.beta2 ** t)
        p_new = p * (1 - hyper.lr * hyper.weight_decay)
        p_new = p_new - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
        new_params[k], new_m[k], new_v[k] = p_new, m, v
    return new_params, AdamWState(t, new_m, new_v)


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    metadata: dict[str, object]


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    dev_accuracy: float           # per-prefix
    dev_string_accuracy: float    # full-string, secondary metric
    param_norm: float


def param_norm(params: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(p * p)) for p in params.values()))


def _batch_arrays(model: RnnModel, samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack same-length samples into id and label arrays (bos included)."""
    lengths = {len(s.x) for s in samples}
    if len(lengths) != 1:
        raise ValueError("batch requires same-length strings")
    ids = np.array([[model.bos] + model.token_ids(s.x) for s in samples])
    labels = np.array([s.y for s in samples], dtype=np.int64)
    return ids, labels


def evaluate(model: RnnModel, samples: list[LabeledSample]) -> tuple[float, float]:
    """(per-prefix accuracy, full-string accuracy) against stored labels."""
    by_len: dict[int, list[LabeledSample]] = {}
    for s in samples:
        by_len.setdefault(len(s.x), []).append(s)
    correct = total = string_correct = 0
    for group in by_len.values():
        ids, labels = _batch_arrays(model, group)
        hidden = _forward_ids(model.params, ids)
        preds = _head_probs(model.params, hidden) > 0.5  # (T, B)
        match = preds.T == labels.astype(bool)
        correct += int(match.sum())
        total += match.size
        string_correct += int(match[:, -1].sum())
    return correct / total, string_correct / len(samples)


def train(model: RnnModel, train_set: list[LabeledSample], dev_set: list[LabeledSample],
          epochs: int, hyper: AdamWHyper, rng: np.random.Generator,
          batch_size: int = 64,
          metadata: dict[str, object] | None = None) -> tuple[list[Checkpoint], list[EpochMetrics]]:
    """Minibatched BPTT training; one checkpoint and metrics row per epoch."""
    if not train_set or not dev_set:
        raise ValueError("train and dev sets must be nonempty")
    params = {k: v.copy() for k, v in model.params.items()}
    state = AdamWState.zeros_like(params)
    checkpoints: list[Checkpoint] = []
    metrics: list[EpochMetrics] = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_set))
        total_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), batch_size):
            batch = [train_set[i] for i in order[start:start + batch_size]]
            ids, labels = _batch_arrays(model, batch)
            try:
                loss, grads = loss_and_grads(params, ids, labels)
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch} batch {n_batches}: {exc}") from exc
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {n_batches}")
            try:
                params, state = adamw_step(params, grads, state, hyper)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch} batch {n_batches}: {exc}") from exc
            total_loss += loss
            n_batches += 1
        snapshot = RnnModel(model.alphabet, params)
        dev_acc, dev_string_acc = evaluate(snapshot, dev_set)
        norm = param_norm(params)
        meta = dict(metadata or {})
        meta.update(epoch=epoch, dev_accuracy=dev_acc, param_norm=norm)
        checkpoints.append(Checkpoint({k: v.copy() for k, v in params.items()}, meta))
        metrics.append(EpochMetrics(epoch, total_loss / n_batches, dev_acc,
                                    dev_string_acc, norm))
        logger.info("epoch %d: loss %.5f, dev acc %.5f, norm %.3f",
                    epoch, total_loss / n_batches, dev_acc, norm)
    model.params = params
    return checkpoints, metrics


def best_checkpoint(checkpoints: list[Checkpoint]) -> Checkpoint:
    """Highest dev accuracy; ties broken toward the highest epoch."""
    return max(checkpoints, key=lambda c: (c.metadata["dev_accuracy"], c.metadata["epoch"]))


def saturation_level(model: RnnModel, strings: list[str]) -> float:
    """Worst-case distance of any visited normalized hidden state from its
    unit-norm sign pattern; sign(0) counts as +1."""
    if not strings:
        raise ValueError("need at least one string")
    d = model.hidden_dim
    worst = 0.0
    measured = False
    for w in strings:
        for h in forward(model, w).hidden:
            norm = float(np.linalg.norm(h))
            if norm == 0.0:
                logger.warning("zero hidden state excluded from saturation measurement")
                continue
            sign = np.where(h >= 0, 1.0, -1.0)
            eps = float(np.linalg.norm(h / norm - sign / math.sqrt(d)))
            worst = max(worst, eps)
            measured = True
    if not measured:
        raise ValueError("all hidden states were degenerate")
    return worst


def kappa_bound(d: int, eps: float) -> float | None:
    """Largest merge tolerance guaranteed safe for an eps-saturated model of
    hidden dimension d; None when the bound is infeasible."""
    if d < 1 or eps < 0:
        raise ValueError("need d >= 1 and eps >= 0")
    if 1.0 / math.sqrt(d) <= eps:
        return None
    # Expanded form of 2 * (1/sqrt(d) - eps)^2; exact at eps = 0.
    return 2.0 / d - 4.0 * eps / math.sqrt(d) + 2.0 * eps * eps


def save_checkpoint(ckpt: Checkpoint, alphabet: tuple[str, ...]) -> str:
    """Versioned text form; floats printed with shortest round-trip repr."""
    lines = [f"format checkpoint {CHECKPOINT_FORMAT_VERSION}",
             "alphabet " + " ".join(alphabet)]
    for key in sorted(ckpt.metadata):
        lines.append(f"meta {key} {ckpt.metadata[key]}")
    for name in PARAM_NAMES:
        arr = ckpt.params[name]
        shape = " ".join(str(s) for s in arr.shape)
        lines.append(f"param {name} {shape}")
        flat = arr.reshape(-1)
        lines.append(" ".join(repr(float(v)) for v in flat))
    return "\n".join(lines) + "\n"


def load_checkpoint(text: str) -> tuple[Checkpoint, tuple[str, ...]]:
    lines = text.splitlines()
    if not lines or lines[0].split() != ["format", "checkpoint", str(CHECKPOINT_FORMAT_VERSION)]:
        raise ValueError("unrecognized checkpoint header")
    alphabet: tuple[str, ...] = ()
    metadata: dict[str, object] = {}
    params: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("alphabet "):
            alphabet = tuple(line.split()[1:])
            i += 1
        elif line.startswith("meta "):
            _, key, *rest = line.split()
            raw = " ".join(rest)
            try:
                value: object = int(raw)
            except ValueError:
                try:
                    value = float(raw)
                except ValueError:
                    value = raw
            metadata[key] = value
            i += 1
        elif line.startswith("param "):
            _, name, *shape = line.split()
            shape_t = tuple(int(s) for s in shape)
            values = np.array([float(v) for v in lines[i + 1].split()])
            params[name] = values.reshape(shape_t)
            i += 2
        elif not line.strip():
            i += 1
        else:
            raise ValueError(f"unrecognized checkpoint line: {line!r}")
    return Checkpoint(params, metadata), alphabet


def model_from_checkpoint(ckpt: Checkpoint, alphabet: tuple[str, ...]) -> RnnModel:
    return RnnModel(alphabet, {k: v.copy() for k, v in ckpt.params.items()})

"""From-scratch word-level recurrent language model in numpy.

Architecture: embedding, two gated recurrent memory (LSTM) layers, dropout,
two dense layers, softmax.  Training predicts the single next token after a
fixed-length window.  The backward pass is hand-derived and validated
against central finite differences.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

MODEL_FORMAT = "humorkit-neural"
MODEL_VERSION = 1
UNK_TOKEN = "<unk>"
EOS_TOKEN = "</s>"
INIT_SCALE = 0.08
GRAD_CLIP = 5.0

PARAM_NAMES = (
    "embedding",
    "lstm1_Wx",
    "lstm1_Wh",
    "lstm1_b",
    "lstm2_Wx",
    "lstm2_Wh",
    "lstm2_b",
    "dense1_W",
    "dense1_b",
    "dense2_W",
    "dense2_b",
)


@dataclass
class NeuralConfig:
    vocab_size: int
    embed_dim: int
    hidden_dim: int
    dropout_rate: float = 0.0
    sequence_length: int = 4
    seed: int = 0
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 16

    def __post_init__(self) -> None:
        for name in ("vocab_size", "embed_dim", "hidden_dim", "sequence_length"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class NeuralLM:
    config: NeuralConfig
    params: dict[str, np.ndarray]
    vocab: dict[str, int]
    mode: str = "eval"  # train | eval

    @property
    def inverse_vocab(self) -> dict[int, str]:
        return {idx: tok for tok, idx in self.vocab.items()}


def build_vocab(sequences: Sequence[Sequence[str]], max_size: int | None = None) -> dict[str, int]:
    """Frequency-ordered vocabulary; index 0 is reserved for unknowns."""
    freq: dict[str, int] = {}
    for seq in sequences:
        for tok in seq:
            freq[tok] = freq.get(tok, 0) + 1
    ordered = sorted(freq, key=lambda t: (-freq[t], t))
    vocab = {UNK_TOKEN: 0, EOS_TOKEN: 1}
    for tok in ordered:
        if tok in vocab:
            continue
        if max_size is not None and len(vocab) >= max_size:
            break
        vocab[tok] = len(vocab)
    return vocab


def make_windows(
    sequences: Sequence[Sequence[str]], vocab: dict[str, int], sequence_length: int
) -> np.ndarray:
    """Length-(sequence_length+1) index windows from eos-terminated jokes.

    The final column is the prediction target.  Sequences too short for one
    full window are skipped.
    """
    eos = vocab[EOS_TOKEN]
    windows: list[list[int]] = []
    for seq in sequences:
        indices = [vocab.get(tok, 0) for tok in seq] + [eos]
        for i in range(len(indices) - sequence_length):
            windows.append(indices[i : i + sequence_length + 1])
    if not windows:
        return np.empty((0, sequence_length + 1), dtype=np.int64)
    return np.asarray(windows, dtype=np.int64)


def build(config: NeuralConfig) -> NeuralLM:
    """Initialize all parameters uniformly in [-0.08, 0.08], seeded."""
    rng = np.random.default_rng(config.seed)
    v, e, h = config.vocab_size, config.embed_dim, config.hidden_dim
    shapes = {
        "embedding": (v, e),
        "lstm1_Wx": (e, 4 * h),
        "lstm1_Wh": (h, 4 * h),
        "lstm1_b": (4 * h,),
        "lstm2_Wx": (h, 4 * h),
        "lstm2_Wh": (h, 4 * h),
        "lstm2_b": (4 * h,),
        "dense1_W": (h, h),
        "dense1_b": (h,),
        "dense2_W": (h, v),
        "dense2_b": (v,),
    }
    params = {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        for name, shape in shapes.items()
    }
    return NeuralLM(config=config, params=params, vocab={}, mode="eval")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def _lstm_step(
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    Wx: np.ndarray,
    Wh: np.ndarray,
    b: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, tuple]:
    hdim = h_prev.shape[1]
    z = x @ Wx + h_prev @ Wh + b
    i = _sigmoid(z[:, :hdim])
    f = _sigmoid(z[:, hdim : 2 * hdim])
    g = np.tanh(z[:, 2 * hdim : 3 * hdim])
    o = _sigmoid(z[:, 3 * hdim :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (x, h_prev, c_prev, i, f, g, o, tanh_c)
    return h, c, cache


def _lstm_step_backward(
    dh: np.ndarray,
    dc: np.ndarray,
    cache: tuple,
    Wx: np.ndarray,
    Wh: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    x, h_prev, c_prev, i, f, g, o, tanh_c = cache
    do = dh * tanh_c
    dct = dc + dh * o * (1.0 - tanh_c**2)
    di = dct * g
    dg = dct * i
    df = dct * c_prev
    dc_prev = dct * f
    dz = np.hstack(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g**2),
            do * o * (1.0 - o),
        ]
    )
    dWx = x.T @ dz
    dWh = h_prev.T @ dz
    db = dz.sum(axis=0)
    dx = dz @ Wx.T
    dh_prev = dz @ Wh.T
    return dx, dh_prev, dc_prev, dWx, dWh, db


def forward(
    model: NeuralLM, X: np.ndarray, dropout_rng: np.random.Generator | None = None
) -> tuple[np.ndarray, dict]:
    """Class probabilities for the token following each window in X.

    X has shape (batch, time) of token indices.  Dropout fires only when
    the model is in train mode and a generator is supplied.
    """
    p = model.params
    cfg = model.config
    batch, time = X.shape
    if np.any(X >= cfg.vocab_size) or np.any(X < 0):
        raise DataError("token index out of vocabulary range")
    hdim = cfg.hidden_dim
    h1 = np.zeros((batch, hdim))
    c1 = np.zeros((batch, hdim))
    h2 = np.zeros((batch, hdim))
    c2 = np.zeros((batch, hdim))
    caches1: list[tuple] = []
    caches2: list[tuple] = []
    for t in range(time):
        emb = p["embedding"][X[:, t]]
        h1, c1, cache1 = _lstm_step(emb, h1, c1, p["lstm1_Wx"], p["lstm1_Wh"], p["lstm1_b"])
        h2, c2, cache2 = _lstm_step(h1, h2, c2, p["lstm2_Wx"], p["lstm2_Wh"], p["lstm2_b"])
        caches1.append(cache1)
        caches2.append(cache2)
    if model.mode == "train" and dropout_rng is not None and cfg.dropout_rate > 0.0:
        keep = 1.0 - cfg.dropout_rate
        mask = (dropout_rng.random(h2.shape) < keep) / keep
    else:
        mask = np.ones_like(h2)
    h2d = h2 * mask
    pre1 = h2d @ p["dense1_W"] + p["dense1_b"]
    d1 = np.tanh(pre1)
    logits = d1 @ p["dense2_W"] + p["dense2_b"]
    probs = softmax(logits)
    cache = {
        "X": X,
        "caches1": caches1,
        "caches2": caches2,
        "mask": mask,
        "h2d": h2d,
        "d1": d1,
        "probs": probs,
    }
    return probs, cache


def loss_and_grads(
    model: NeuralLM,
    X: np.ndarray,
    y: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy of the next token plus analytic gradients."""
    p = model.params
    cfg = model.config
    probs, cache = forward(model, X, dropout_rng)
    batch, time = X.shape
    eps = 1e-12
    loss = float(-np.mean(np.log(probs[np.arange(batch), y] + eps)))

    grads = {name: np.zeros_like(arr) for name, arr in p.items()}
    dlogits = probs.copy()
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch
    grads["dense2_W"] = cache["d1"].T @ dlogits
    grads["dense2_b"] = dlogits.sum(axis=0)
    dd1 = dlogits @ p["dense2_W"].T
    dpre1 = dd1 * (1.0 - cache["d1"] ** 2)
    grads["dense1_W"] = cache["h2d"].T @ dpre1
    grads["dense1_b"] = dpre1.sum(axis=0)
    dh2 = (dpre1 @ p["dense1_W"].T) * cache["mask"]

    hdim = cfg.hidden_dim
    dc2 = np.zeros((batch, hdim))
    dh1 = np.zeros((batch, hdim))
    dc1 = np.zeros((batch, hdim))
    for t in range(time - 1, -1, -1):
        dx2, dh2, dc2, dWx2, dWh2, db2 = _lstm_step_backward(
            dh2, dc2, cache["caches2"][t], p["lstm2_Wx"], p["lstm2_Wh"]
        )
        grads["lstm2_Wx"] += dWx2
        grads["lstm2_Wh"] += dWh2
        grads["lstm2_b"] += db2
        dh1 = dh1 + dx2
        dx1, dh1, dc1, dWx1, dWh1, db1 = _lstm_step_backward(
            dh1, dc1, cache["caches1"][t], p["lstm1_Wx"], p["lstm1_Wh"]
        )
        grads["lstm1_Wx"] += dWx1
        grads["lstm1_Wh"] += dWh1
        grads["lstm1_b"] += db1
        np.add.at(grads["embedding"], X[:, t], dx1)
    return loss, grads


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def train(model: NeuralLM, windows: np.ndarray, config: NeuralConfig | None = None) -> list[float]:
    """Plain SGD over next-token windows with gradient-norm clipping at 5.0.

    windows has shape (num, sequence_length + 1); the last column holds the
    targets.  Returns per-epoch mean loss.
    """
    cfg = config or model.config
    if windows.size == 0:
        raise DataError("cannot train on an empty window set")
    if np.any(windows >= model.config.vocab_size) or np.any(windows < 0):
        raise DataError("token index out of vocabulary range")
    rng = np.random.default_rng(cfg.seed)
    X_all = windows[:, :-1]
    y_all = windows[:, -1]
    n = X_all.shape[0]
    history: list[float] = []
    model.mode = "train"
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                loss, grads = loss_and_grads(model, X_all[idx], y_all[idx], rng)
                if not np.isfinite(loss):
                    raise DataError(f"non-finite training loss at epoch {epoch}")
                epoch_loss += loss * idx.shape[0]
                _clip_gradients(grads, GRAD_CLIP)
                if cfg.learning_rate != 0.0:
                    for name in model.params:
                        model.params[name] -= cfg.learning_rate * grads[name]
            history.append(epoch_loss / n)
    finally:
        model.mode = "eval"
    return history


def grad_check(
    model: NeuralLM,
    batch: tuple[np.ndarray, np.ndarray],
    epsilon: float = 1e-5,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Checks at least n_coords randomly chosen parameter coordinates (all of
    them when the model is smaller than that).  Runs in eval mode so the
    loss surface is deterministic.
    """
    X, y = batch
    mode = model.mode
    model.mode = "eval"
    try:
        _, grads = loss_and_grads(model, X, y)
        rng = np.random.default_rng(seed)
        sizes = {name: model.params[name].size for name in PARAM_NAMES}
        total = sum(sizes.values())
        flat_choices = rng.choice(total, size=min(n_coords, total), replace=False)
        offsets = {}
        acc = 0
        for name in PARAM_NAMES:
            offsets[name] = acc
            acc += sizes[name]
        max_rel = 0.0
        for flat in flat_choices:
            name = PARAM_NAMES[0]
            for cand in PARAM_NAMES:
                if offsets[cand] <= flat < offsets[cand] + sizes[cand]:
                    name = cand
                    break
            local = int(flat - offsets[name])
            arr = model.params[name]
            orig = arr.flat[local]
            arr.flat[local] = orig + epsilon
            loss_plus, _ = loss_and_grads(model, X, y)
            arr.flat[local] = orig - epsilon
            loss_minus, _ = loss_and_grads(model, X, y)
            arr.flat[local] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            analytic = grads[name].flat[local]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
            max_rel = max(max_rel, rel)
        return max_rel
    finally:
        model.mode = mode


def degeneration_cycle(tokens: Sequence[str]) -> int:
    """Length of the longest trailing repeated token cycle, 0 if none.

    "of the world of the world" has a trailing cycle of length 3.
    """
    best = 0
    for c in range(1, len(tokens) // 2 + 1):
        if list(tokens[-c:]) == list(tokens[-2 * c : -c]):
            best = c
    return best


def generate(
    model: NeuralLM,
    seed_tokens: Sequence[str],
    max_tokens: int,
    rng_seed: int = 0,
    temperature: float = 0.0,
) -> list[str]:
    """Continue a seed greedily (temperature 0) or by tempered sampling.

    Unknown seed words map to the reserved index 0 but are echoed verbatim
    in the output.  Stops at the end-of-sequence token or after max_tokens
    new tokens.  Logs the trailing-cycle degeneration diagnostic.
    """
    if model.mode != "eval":
        raise DataError("generation requires eval mode")
    if not model.vocab:
        raise DataError("model has no vocabulary attached")
    rng = np.random.default_rng(rng_seed)
    inverse = model.inverse_vocab
    eos = model.vocab[EOS_TOKEN]
    indices = [model.vocab.get(tok, 0) for tok in seed_tokens] or [eos]
    output = list(seed_tokens)
    for _ in range(max_tokens):
        window = np.asarray([indices[-model.config.sequence_length :]], dtype=np.int64)
        probs, _ = forward(model, window)
        row = probs[0]
        if temperature <= 0.0:
            nxt = int(np.argmax(row))
        else:
            logp = np.log(row + 1e-12) / temperature
            tempered = softmax(logp[None, :])[0]
            nxt = int(rng.choice(row.shape[0], p=tempered))
        if nxt == eos:
            break
        indices.append(nxt)
        output.append(inverse.get(nxt, UNK_TOKEN))
    logger.debug("degeneration cycle length: %d", degeneration_cycle(output))
    return output


def save(model: NeuralLM, path: str | Path) -> None:
    cfg = model.config
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": {
            "vocab_size": cfg.vocab_size,
            "embed_dim": cfg.embed_dim,
            "hidden_dim": cfg.hidden_dim,
            "dropout_rate": cfg.dropout_rate,
            "sequence_length": cfg.sequence_length,
            "seed": cfg.seed,
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
        },
        "vocab": model.vocab,
        "params": {name: arr.tolist() for name, arr in model.params.items()},
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load(path: str | Path) -> NeuralLM:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"neural model file {path} is not valid JSON: {exc.msg}") from exc
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise DataError(
            f"unsupported neural model file (format={payload.get('format')!r}, "
            f"version={payload.get('version')!r})"
        )
    config = NeuralConfig(**payload["config"])
    params = {name: np.asarray(vals, dtype=np.float64) for name, vals in payload["params"].items()}
    missing = set(PARAM_NAMES) - set(params)
    if missing:
        raise DataError(f"neural model file missing tensors: {sorted(missing)}")
    return NeuralLM(config=config, params=params, vocab=dict(payload["vocab"]), mode="eval")


def write_loss_csv(history: Sequence[float], path: str | Path) -> None:
    lines = ["epoch,loss"]
    lines.extend(f"{i},{loss}" for i, loss in enumerate(history))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

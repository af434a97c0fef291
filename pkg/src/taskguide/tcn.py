"""Causal multi-stage temporal convolutional network for online action segmentation.

Every convolution is dilated and left-padded only, so the output at frame t
depends solely on frames <= t.  Stage 1 consumes input features; later stages
refine the previous stage's per-frame class probabilities.

Two forward paths exist on purpose:

* ``forward`` / ``predict_online`` walk the sequence one frame at a time and
  share the exact same row kernel, which makes incremental and batch
  inference bitwise identical (BLAS results are not bitwise stable across
  matrix shapes, so a vectorized batch path could not give that guarantee).
* ``training_loss_and_gradients`` uses a vectorized twin of the forward pass
  with hand-derived backpropagation; it agrees with the canonical path to
  floating-point tolerance and exists only for training speed.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np


class TrainingDivergedError(RuntimeError):
    """Training reached a non-finite loss."""


@dataclass(frozen=True)
class CausalTcnConfig:
    input_dim: int
    num_classes: int
    num_stages: int = 2
    layers_per_stage: int = 8
    hidden_dim: int = 64
    kernel_size: int = 3
    smoothing_weight: float = 0.15
    smoothing_clip: float = 4.0

    def __post_init__(self) -> None:
        for name in (
            "input_dim",
            "num_classes",
            "num_stages",
            "layers_per_stage",
            "hidden_dim",
            "kernel_size",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.smoothing_weight < 0 or self.smoothing_clip <= 0:
            raise ValueError("smoothing_weight must be >= 0 and smoothing_clip > 0")

    @property
    def dilations(self) -> tuple[int, ...]:
        return tuple(2**level for level in range(self.layers_per_stage))

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "num_stages": self.num_stages,
            "layers_per_stage": self.layers_per_stage,
            "hidden_dim": self.hidden_dim,
            "kernel_size": self.kernel_size,
            "smoothing_weight": self.smoothing_weight,
            "smoothing_clip": self.smoothing_clip,
        }


def _param_specs(config: CausalTcnConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) for every parameter, in canonical order."""
    k, d, c = config.kernel_size, config.hidden_dim, config.num_classes
    specs: list[tuple[str, tuple[int, ...], int]] = []
    for s in range(config.num_stages):
        in_dim = config.input_dim if s == 0 else c
        specs.append((f"stage{s}.input.w", (in_dim, d), in_dim))
        specs.append((f"stage{s}.input.b", (d,), in_dim))
        for layer in range(config.layers_per_stage):
            prefix = f"stage{s}.layer{layer}"
            specs.append((f"{prefix}.dilated.w", (k, d, d), k * d))
            specs.append((f"{prefix}.dilated.b", (d,), k * d))
            specs.append((f"{prefix}.pointwise.w", (d, d), d))
            specs.append((f"{prefix}.pointwise.b", (d,), d))
        specs.append((f"stage{s}.output.w", (d, c), d))
        specs.append((f"stage{s}.output.b", (c,), d))
    return specs


@dataclass
class CausalTcnModel:
    config: CausalTcnConfig
    params: dict[str, np.ndarray]
    seed: int = 0

    def __post_init__(self) -> None:
        for name, shape, _ in _param_specs(self.config):
            if name not in self.params:
                raise ValueError(f"missing parameter {name!r}")
            value = np.asarray(self.params[name], dtype=np.float64)
            if value.shape != shape:
                raise ValueError(
                    f"parameter {name!r} has shape {value.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(value)):
                raise ValueError(f"parameter {name!r} contains non-finite values")
            self.params[name] = value

    def copy(self) -> "CausalTcnModel":
        return CausalTcnModel(
            config=self.config,
            params={name: value.copy() for name, value in self.params.items()},
            seed=self.seed,
        )


def init_model(config: CausalTcnConfig, seed: int = 0) -> CausalTcnModel:
    """Seeded uniform init in +-(1/sqrt(fan_in)) per parameter."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape, fan_in in _param_specs(config):
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return CausalTcnModel(config=config, params=params, seed=seed)


def _softmax_row(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


# ---------------------------------------------------------------------------
# Canonical per-frame path (shared by batch forward and online inference).


class _Caches:
    """Per-stage activation histories: level 0 holds input-projected rows,
    level l+1 the outputs of layer l.  Grown one row per frame."""

    def __init__(self, config: CausalTcnConfig) -> None:
        self.levels: list[list[list[np.ndarray]]] = [
            [[] for _ in range(config.layers_per_stage + 1)]
            for _ in range(config.num_stages)
        ]
        self.length = 0


def _step_rows(model: CausalTcnModel, caches: _Caches, x_row: np.ndarray) -> list[np.ndarray]:
    """Advance every stage by one frame; returns per-stage logits rows."""
    config = model.config
    params = model.params
    k = config.kernel_size
    t = caches.length
    stage_in = x_row
    logits_rows: list[np.ndarray] = []
    for s in range(config.num_stages):
        hist = caches.levels[s]
        hist[0].append(stage_in @ params[f"stage{s}.input.w"] + params[f"stage{s}.input.b"])
        for layer, dilation in enumerate(config.dilations):
            w_dil = params[f"stage{s}.layer{layer}.dilated.w"]
            acc = params[f"stage{s}.layer{layer}.dilated.b"].copy()
            source = hist[layer]
            for j in range(k):
                idx = t - (k - 1 - j) * dilation
                if idx >= 0:
                    acc += source[idx] @ w_dil[j]
            rectified = np.maximum(acc, 0.0)
            pointwise = (
                rectified @ params[f"stage{s}.layer{layer}.pointwise.w"]
                + params[f"stage{s}.layer{layer}.pointwise.b"]
            )
            hist[layer + 1].append(source[t] + pointwise)
        logits = (
            hist[config.layers_per_stage][t] @ params[f"stage{s}.output.w"]
            + params[f"stage{s}.output.b"]
        )
        logits_rows.append(logits)
        stage_in = _softmax_row(logits)
    caches.length += 1
    return logits_rows


def forward(model: CausalTcnModel, features: np.ndarray) -> list[np.ndarray]:
    """Per-stage logits (each T x num_classes) for a whole feature sequence."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.config.input_dim:
        raise ValueError(
            f"dimension mismatch: features {features.shape}, "
            f"expected (T, {model.config.input_dim})"
        )
    if features.shape[0] < 1:
        raise ValueError("need at least one frame")
    caches = _Caches(model.config)
    rows: list[list[np.ndarray]] = [[] for _ in range(model.config.num_stages)]
    for t in range(features.shape[0]):
        for s, logits in enumerate(_step_rows(model, caches, features[t])):
            rows[s].append(logits)
    return [np.stack(stage_rows) for stage_rows in rows]


class OnlineTcnState:
    """Incremental inference buffer; feeds frames through the same row kernel
    as ``forward`` so both paths agree bitwise."""

    def __init__(self, model: CausalTcnModel) -> None:
        self.model = model
        self._caches = _Caches(model.config)

    @property
    def frames_seen(self) -> int:
        return self._caches.length

    def step(self, feature_row: Sequence[float]) -> tuple[int, np.ndarray]:
        feature_row = np.asarray(feature_row, dtype=np.float64)
        if feature_row.shape != (self.model.config.input_dim,):
            raise ValueError(
                f"dimension mismatch: got {feature_row.shape}, "
                f"expected ({self.model.config.input_dim},)"
            )
        logits_rows = _step_rows(self.model, self._caches, feature_row)
        probs = _softmax_row(logits_rows[-1])
        return int(np.argmax(probs)), probs


def predict_online(
    model: CausalTcnModel, state: OnlineTcnState, new_feature: Sequence[float]
) -> tuple[int, np.ndarray]:
    """Label + class probabilities for the newest frame of a session."""
    if state.model is not model:
        raise ValueError("state was built for a different model")
    return state.step(new_feature)


def predict_labels(model: CausalTcnModel, features: np.ndarray) -> np.ndarray:
    """Final-stage argmax labels for a whole sequence."""
    return np.argmax(forward(model, features)[-1], axis=1)


# ---------------------------------------------------------------------------
# Loss.


def _stage_loss_terms(
    logits: np.ndarray, labels: np.ndarray, config: CausalTcnConfig
) -> tuple[float, np.ndarray]:
    """(stage loss, dLoss/dlogits) for one stage."""
    frames, classes = logits.shape
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    probs = np.exp(log_probs)

    cross_entropy = float(-log_probs[np.arange(frames), labels].mean())
    d_logits = probs.copy()
    d_logits[np.arange(frames), labels] -= 1.0
    d_logits /= frames

    smoothing = 0.0
    if frames > 1 and config.smoothing_weight > 0.0:
        clip_sq = config.smoothing_clip**2
        diff = log_probs[1:] - log_probs[:-1]
        smoothing = float(np.minimum(clip_sq, diff * diff).mean())
        inside = (diff * diff) < clip_sq
        d_diff = 2.0 * diff * inside / ((frames - 1) * classes)
        d_log_probs = np.zeros_like(log_probs)
        d_log_probs[1:] += d_diff
        d_log_probs[:-1] -= d_diff
        d_from_smoothing = d_log_probs - probs * d_log_probs.sum(axis=1, keepdims=True)
        d_logits = d_logits + config.smoothing_weight * d_from_smoothing

    return cross_entropy + config.smoothing_weight * smoothing, d_logits


def loss(
    per_stage_logits: Sequence[np.ndarray],
    labels: Sequence[int],
    config: CausalTcnConfig,
) -> float:
    """Sum over stages of mean cross-entropy plus the clipped smoothing term."""
    labels = np.asarray(labels, dtype=np.int64)
    total = 0.0
    for logits in per_stage_logits:
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
            raise ValueError(
                f"logits shape {logits.shape} does not match {labels.shape[0]} labels"
            )
        if labels.min() < 0 or labels.max() >= logits.shape[1]:
            raise ValueError(
                f"label out of range: [{labels.min()}, {labels.max()}] "
                f"for {logits.shape[1]} classes"
            )
        term, _ = _stage_loss_terms(logits, labels, config)
        total += term
    return total


# ---------------------------------------------------------------------------
# Vectorized training twin with hand-derived backpropagation.


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int) -> np.ndarray:
    frames = x.shape[0]
    k = w.shape[0]
    pad = (k - 1) * dilation
    padded = np.vstack([np.zeros((pad, x.shape[1])), x])
    acc = np.zeros((frames, w.shape[2]))
    for j in range(k):
        acc += padded[j * dilation : j * dilation + frames] @ w[j]
    return acc + b


def _conv_backward(
    d_out: np.ndarray, x: np.ndarray, w: np.ndarray, dilation: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    frames = x.shape[0]
    k = w.shape[0]
    pad = (k - 1) * dilation
    padded = np.vstack([np.zeros((pad, x.shape[1])), x])
    d_w = np.empty_like(w)
    d_padded = np.zeros_like(padded)
    for j in range(k):
        window = padded[j * dilation : j * dilation + frames]
        d_w[j] = window.T @ d_out
        d_padded[j * dilation : j * dilation + frames] += d_out @ w[j].T
    return d_padded[pad:], d_w, d_out.sum(axis=0)


def _forward_vectorized(model: CausalTcnModel, features: np.ndarray):
    """Whole-sequence forward keeping a tape of intermediates for backprop."""
    config = model.config
    params = model.params
    stage_tapes = []
    logits_list = []
    probs_list = []
    stage_in = features
    for s in range(config.num_stages):
        h = stage_in @ params[f"stage{s}.input.w"] + params[f"stage{s}.input.b"]
        layer_tapes = []
        for layer, dilation in enumerate(config.dilations):
            pre = _conv_forward(
                h,
                params[f"stage{s}.layer{layer}.dilated.w"],
                params[f"stage{s}.layer{layer}.dilated.b"],
                dilation,
            )
            rectified = np.maximum(pre, 0.0)
            pointwise = (
                rectified @ params[f"stage{s}.layer{layer}.pointwise.w"]
                + params[f"stage{s}.layer{layer}.pointwise.b"]
            )
            layer_tapes.append((h, pre, rectified))
            h = h + pointwise
        logits = h @ params[f"stage{s}.output.w"] + params[f"stage{s}.output.b"]
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        stage_tapes.append((stage_in, layer_tapes, h, logits))
        logits_list.append(logits)
        probs_list.append(probs)
        stage_in = probs
    return logits_list, probs_list, stage_tapes


def training_loss(
    model: CausalTcnModel, features: np.ndarray, labels: Sequence[int]
) -> float:
    features = np.asarray(features, dtype=np.float64)
    logits_list, _, _ = _forward_vectorized(model, features)
    return loss(logits_list, labels, model.config)


def training_loss_and_gradients(
    model: CausalTcnModel, features: np.ndarray, labels: Sequence[int]
) -> tuple[float, dict[str, np.ndarray]]:
    """Backpropagation through all stages, including the inter-stage softmax."""
    config = model.config
    params = model.params
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != features.shape[0]:
        raise ValueError("labels length must match the number of frames")

    logits_list, probs_list, stage_tapes = _forward_vectorized(model, features)
    total = 0.0
    d_logits_direct = []
    for logits in logits_list:
        if labels.min() < 0 or labels.max() >= logits.shape[1]:
            raise ValueError("label out of range")
        term, d_logits = _stage_loss_terms(logits, labels, config)
        total += term
        d_logits_direct.append(d_logits)

    grads = {name: np.zeros_like(value) for name, value in params.items()}

    def stage_backward(s: int, d_logits: np.ndarray) -> np.ndarray:
        stage_in, layer_tapes, h_final, _ = stage_tapes[s]
        grads[f"stage{s}.output.w"] += h_final.T @ d_logits
        grads[f"stage{s}.output.b"] += d_logits.sum(axis=0)
        d_h = d_logits @ params[f"stage{s}.output.w"].T
        for layer in reversed(range(config.layers_per_stage)):
            dilation = config.dilations[layer]
            h_in, pre, rectified = layer_tapes[layer]
            d_pointwise = d_h  # residual output = h_in + pointwise
            grads[f"stage{s}.layer{layer}.pointwise.w"] += rectified.T @ d_pointwise
            grads[f"stage{s}.layer{layer}.pointwise.b"] += d_pointwise.sum(axis=0)
            d_rect = d_pointwise @ params[f"stage{s}.layer{layer}.pointwise.w"].T
            d_pre = d_rect * (pre > 0.0)
            d_conv_in, d_w, d_b = _conv_backward(
                d_pre, h_in, params[f"stage{s}.layer{layer}.dilated.w"], dilation
            )
            grads[f"stage{s}.layer{layer}.dilated.w"] += d_w
            grads[f"stage{s}.layer{layer}.dilated.b"] += d_b
            d_h = d_h + d_conv_in
        grads[f"stage{s}.input.w"] += stage_in.T @ d_h
        grads[f"stage{s}.input.b"] += d_h.sum(axis=0)
        return d_h @ params[f"stage{s}.input.w"].T

    d_logits = d_logits_direct[-1]
    for s in reversed(range(config.num_stages)):
        d_stage_in = stage_backward(s, d_logits)
        if s > 0:
            # Stage s consumed softmax(previous logits); push through that softmax.
            prev_probs = probs_list[s - 1]
            d_prev_logits = prev_probs * (
                d_stage_in - (d_stage_in * prev_probs).sum(axis=1, keepdims=True)
            )
            d_logits = d_logits_direct[s - 1] + d_prev_logits
    return total, grads


@dataclass
class TrainResult:
    model: CausalTcnModel
    losses: list[float] = field(default_factory=list)


def train(
    model: CausalTcnModel,
    dataset: Sequence[tuple[np.ndarray, Sequence[int]]],
    steps: int,
    learning_rate: float,
) -> TrainResult:
    """Adam over the dataset, one sequence per step, cycling in order.

    A zero learning rate leaves parameters untouched.  Non-finite loss raises
    instead of silently continuing.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    model = model.copy()
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_state = {name: np.zeros_like(v) for name, v in model.params.items()}
    v_state = {name: np.zeros_like(v) for name, v in model.params.items()}
    losses: list[float] = []
    for step in range(steps):
        features, labels = dataset[step % len(dataset)]
        value, grads = training_loss_and_gradients(model, features, labels)
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite loss at step {step}: {value}")
        losses.append(value)
        t = step + 1
        for name, param in model.params.items():
            g = grads[name]
            m_state[name] = beta1 * m_state[name] + (1 - beta1) * g
            v_state[name] = beta2 * v_state[name] + (1 - beta2) * g * g
            m_hat = m_state[name] / (1 - beta1**t)
            v_hat = v_state[name] / (1 - beta2**t)
            param -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return TrainResult(model=model, losses=losses)


# ---------------------------------------------------------------------------
# Checkpoint format: one JSON header line, then a little-endian f32 blob.


def save_model_bytes(model: CausalTcnModel) -> bytes:
    names = [name for name, _, _ in _param_specs(model.config)]
    header = {
        "format": "causal-tcn-1",
        "config": model.config.to_dict(),
        "seed": model.seed,
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    buf = io.BytesIO()
    buf.write(json.dumps(header, sort_keys=True).encode("utf-8"))
    buf.write(b"\n")
    for name in names:
        buf.write(model.params[name].astype("<f4").tobytes())
    return buf.getvalue()


def load_model_bytes(data: bytes) -> CausalTcnModel:
    newline = data.find(b"\n")
    if newline < 0:
        raise ValueError("missing checkpoint header")
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed checkpoint header: {exc}") from exc
    if header.get("format") != "causal-tcn-1":
        raise ValueError(f"unknown checkpoint format: {header.get('format')!r}")
    config = CausalTcnConfig(**header["config"])
    blob = data[newline + 1 :]
    params: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        chunk = blob[offset : offset + 4 * count]
        if len(chunk) != 4 * count:
            raise ValueError("truncated checkpoint blob")
        params[entry["name"]] = (
            np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64)
        )
        offset += 4 * count
    if offset != len(blob):
        raise ValueError("trailing bytes after checkpoint blob")
    return CausalTcnModel(config=config, params=params, seed=header.get("seed", 0))


def save_model(model: CausalTcnModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(save_model_bytes(model))
    return path


def load_model(path: Union[str, Path]) -> CausalTcnModel:
    return load_model_bytes(Path(path).read_bytes())

"""Losses, Adam optimizer, training loop, and checkpoint persistence."""

from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass

import numpy as np

from . import gatcore
from . import tensorcore as tc
from .complexes import LABEL_ACTIVITY, ComplexGraph
from .errors import CheckpointError, DataError, ShapeError
from .features import FEATURE_SCHEMA_VERSION
from .gatcore import (
    HEAD_CLASSIFICATION,
    HEAD_REGRESSION,
    ModelParams,
)
from .tensorcore import Tape, Tensor

CHECKPOINT_VERSION = 1
MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    n_blocks: int = 2
    dim: int = 70
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    head_kind: str = HEAD_CLASSIFICATION
    model_kind: str = gatcore.MODEL_GNNF
    shuffle: bool = True

    def __post_init__(self):
        # lr 0 is legal (freezes weights, useful for smoke checks)
        if (self.learning_rate < 0 or self.epochs <= 0 or self.batch_size <= 0
                or self.n_blocks <= 0 or self.dim < 1):
            raise DataError("training config fields must be positive")
        if self.head_kind not in (HEAD_CLASSIFICATION, HEAD_REGRESSION):
            raise DataError(f"unknown head kind {self.head_kind!r}")
        if self.model_kind not in (gatcore.MODEL_GNNF, gatcore.MODEL_GNNP):
            raise DataError(f"unknown model kind {self.model_kind!r}")


# ---------------------------------------------------------------------------
# losses

def bce_with_logits(logit: Tensor, label: float) -> Tensor:
    """Binary cross-entropy on a raw logit, in the overflow-free form
    max(x, 0) - x*y + log(1 + exp(-|x|))."""
    softplus = tc.log(tc.add(tc.exp(tc.neg(tc.absval(logit))), 1.0))
    return tc.add(tc.sub(tc.relu(logit), tc.mul(logit, float(label))), softplus)


def mse(pred: Tensor, label: float) -> Tensor:
    diff = tc.sub(pred, float(label))
    return tc.mul(diff, diff)


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def adam_init(params: list[Tensor]) -> AdamState:
    return AdamState(m=[np.zeros_like(p.data) for p in params],
                     v=[np.zeros_like(p.data) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Standard bias-corrected Adam update, in place."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params vs {len(grads)} grads")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise ShapeError(f"grad shape {g.shape} vs param {p.data.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------------------
# training loop

def _loss_for(score: Tensor, label_value: float, head_kind: str) -> Tensor:
    if head_kind == HEAD_CLASSIFICATION:
        return bce_with_logits(score, label_value)
    return mse(score, label_value)


def _check_dataset(dataset: list[ComplexGraph], head_kind: str) -> None:
    if not dataset:
        raise DataError("training dataset is empty")
    kinds = {g.label.kind for g in dataset}
    if len(kinds) > 1:
        raise DataError(f"mixed label kinds in dataset: {sorted(kinds)}")
    kind = kinds.pop()
    if head_kind == HEAD_CLASSIFICATION and kind != LABEL_ACTIVITY:
        raise DataError(f"classification head needs activity labels, got {kind!r}")
    if head_kind == HEAD_REGRESSION and kind == LABEL_ACTIVITY:
        raise DataError("regression head cannot train on activity labels")


def evaluate_model(dataset: list[ComplexGraph], params: ModelParams) -> float:
    """Accuracy at 0.5 for classification heads, RMSE for regression."""
    preds = [gatcore.predict(gatcore.forward(g, params), params.head_kind)
             for g in dataset]
    labels = [g.label.value for g in dataset]
    if params.head_kind == HEAD_CLASSIFICATION:
        hits = sum(1 for p, y in zip(preds, labels) if (p >= 0.5) == (y == 1.0))
        return hits / len(preds)
    return math.sqrt(sum((p - y) ** 2 for p, y in zip(preds, labels)) / len(preds))


def train_loop(dataset: list[ComplexGraph], cfg: TrainConfig,
               eval_set: list[ComplexGraph] | None = None,
               params: ModelParams | None = None,
               stop_early=None) -> tuple[ModelParams, list[dict]]:
    """Train a model; returns the parameters and one log row per epoch.

    Per-sample forward passes accumulate gradients; one optimizer step runs
    per batch (mean gradient), with the sigma clamp applied after each step.
    ``stop_early`` may inspect each log row and end training when satisfied.
    """
    _check_dataset(dataset, cfg.head_kind)
    if params is None:
        label_mean = float(np.mean([g.label.value for g in dataset]))
        params = gatcore.init_model(cfg.model_kind, cfg.head_kind, cfg.dim,
                                    cfg.n_blocks, cfg.seed, label_mean=label_mean)
    else:
        if params.head_kind != cfg.head_kind or params.model_kind != cfg.model_kind:
            raise DataError("resumed parameters do not match the config head/model")

    named = params.named_tensors()
    tensors = [t for _, t in named]
    state = adam_init(tensors)
    rng = random.Random(cfg.seed)
    rows: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        order = list(range(len(dataset)))
        if cfg.shuffle:
            rng.shuffle(order)
        accum = [np.zeros_like(t.data) for t in tensors]
        in_batch = 0
        loss_sum = 0.0
        scored: list[tuple[float, float]] = []

        def step():
            nonlocal in_batch
            grads = [a / in_batch for a in accum]
            adam_step(tensors, grads, state, cfg.learning_rate)
            params.clamp_constraints()
            for a in accum:
                a[:] = 0.0
            in_batch = 0

        for idx in order:
            g = dataset[idx]
            with Tape() as tape:
                score = gatcore.forward(g, params)
                loss = _loss_for(score, g.label.value, cfg.head_kind)
            grads = tape.backward(loss)
            for k, t in enumerate(tensors):
                gt = grads.get(t.node_id)
                if gt is not None:
                    accum[k] += gt.data
            in_batch += 1
            loss_sum += loss.item()
            scored.append((score.item(), g.label.value))
            if in_batch == cfg.batch_size:
                step()
        if in_batch:
            step()

        row = {
            "epoch": epoch,
            "train_loss": loss_sum / len(dataset),
            "eval_metric": evaluate_model(eval_set, params) if eval_set else None,
        }
        if cfg.head_kind == HEAD_CLASSIFICATION:
            hits = sum(1 for s, y in scored if (s >= 0.0) == (y == 1.0))
            row["train_accuracy"] = hits / len(scored)
        else:
            row["train_rmse"] = math.sqrt(row["train_loss"])
        rows.append(row)
        if stop_early is not None and stop_early(row):
            break
    return params, rows


def write_train_log(path, rows: list[dict], header_comment: str | None = None) -> None:
    """Training log CSV: epoch, train_loss, eval_metric. An optional leading
    comment line echoes the effective configuration."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(header_comment.rstrip("\n") + "\n")
        fh.write("epoch,train_loss,eval_metric\n")
        for row in rows:
            ev = row.get("eval_metric")
            fh.write(f"{row['epoch']},{row['train_loss']!r},"
                     f"{'' if ev is None else repr(ev)}\n")


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path, params: ModelParams) -> None:
    """Checkpoint = directory with manifest.json and weights.bin
    (little-endian float64 payload in manifest order)."""
    os.makedirs(path, exist_ok=True)
    tensors = params.named_tensors()
    entries = []
    offset = 0
    blobs = []
    for name, t in tensors:
        rows, cols = t.data.shape
        blob = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        entries.append({"name": name, "rows": rows, "cols": cols, "offset": offset})
        offset += len(blob)
        blobs.append(blob)
    manifest = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "feature_schema": FEATURE_SCHEMA_VERSION,
        "model_kind": params.model_kind,
        "head_kind": params.head_kind,
        "dim": params.dim,
        "n_blocks": params.n_blocks,
        "payload_bytes": offset,
        "tensors": entries,
    }
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(path, WEIGHTS_NAME), "wb") as fh:
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> ModelParams:
    """Reload parameters bit-exactly; refuses version or schema mismatches."""
    try:
        with open(os.path.join(path, MANIFEST_NAME), "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint manifest: {exc}") from exc
    version = manifest.get("checkpoint_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version} != supported {CHECKPOINT_VERSION}")
    schema = manifest.get("feature_schema")
    if schema != FEATURE_SCHEMA_VERSION:
        raise CheckpointError(
            f"feature schema {schema!r} != current {FEATURE_SCHEMA_VERSION!r}")

    with open(os.path.join(path, WEIGHTS_NAME), "rb") as fh:
        payload = fh.read()
    if len(payload) != manifest.get("payload_bytes"):
        raise CheckpointError(
            f"weights payload is {len(payload)} bytes, manifest says "
            f"{manifest.get('payload_bytes')}")

    params = gatcore.init_model(manifest["model_kind"], manifest["head_kind"],
                                int(manifest["dim"]), int(manifest["n_blocks"]),
                                seed=0)
    by_name = dict(params.named_tensors())
    if len(by_name) != len(manifest["tensors"]):
        raise CheckpointError("manifest tensor list does not match the model")
    expected_offset = 0
    for entry in manifest["tensors"]:
        name = entry["name"]
        t = by_name.get(name)
        if t is None:
            raise CheckpointError(f"unexpected tensor {name!r} in manifest")
        rows, cols = int(entry["rows"]), int(entry["cols"])
        if (rows, cols) != t.data.shape:
            raise CheckpointError(
                f"tensor {name!r} shape ({rows}, {cols}) != model {t.data.shape}")
        if int(entry["offset"]) != expected_offset:
            raise CheckpointError(
                f"tensor {name!r} offset {entry['offset']} != expected {expected_offset}")
        nbytes = rows * cols * 8
        chunk = payload[expected_offset:expected_offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"weights payload truncated at tensor {name!r}")
        t.data[...] = np.frombuffer(chunk, dtype="<f8").reshape(rows, cols)
        expected_offset += nbytes
    if expected_offset != len(payload):
        raise CheckpointError("weights payload has trailing bytes")
    return params

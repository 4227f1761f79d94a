"""Experiment configuration, training/evaluation loops, metrics, checkpoints.

Training is a deterministic loop over graphs: per-graph losses are averaged
within a batch, gradients are accumulated in fixed order and applied with
Adam (decoupled weight decay). Identical config and seed reproduce the
metrics file byte for byte; wall-clock timings go to a separate file so the
deterministic record stays comparable.
"""
from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import GraphRecord, load_dataset
from .errors import (
    ConfigMismatchError,
    DivergenceDetectedError,
    NonFiniteActivationError,
)
from .model import (
    AdamState,
    GradientTape,
    Model,
    ModelConfig,
    adam_step,
    model_backward,
    model_forward,
    precompute_cache,
    predict,
    mae_loss,
)

# hyperparameter grids the defaults were tuned over; deviations warn, not fail
KNOWN_RANGES = {
    "lr": {1e-3},
    "weight_decay": {3e-3, 3e-4, 3e-5, 3e-6, 3e-7},
    "dropout": {0.0, 0.1, 0.2, 0.3},
    "batch_size": {128, 256},
    "num_layers": set(range(6, 11)),
    "hidden_width": {75, 90, 130, 150},
    "bandwidth": {15, 20, 25},
}


@dataclass
class ExperimentConfig:
    train_path: str
    val_path: str
    test_path: str
    scheme: str = "spectral"
    bandwidth: int = 20
    num_layers: int = 6
    hidden_width: int = 75
    aggregators: tuple[str, ...] = ("mean", "max", "min", "b_av", "b_dx")
    scaler_alphas: tuple[int, ...] = (-1, 0, 1)
    scale_directional: bool = True
    readout: str = "sum"
    lr: float = 1e-3
    weight_decay: float = 3e-6
    dropout: float = 0.0
    batch_size: int = 128
    epochs: int = 200
    seed: Optional[int] = None

    def __post_init__(self):
        self.aggregators = tuple(self.aggregators)
        self.scaler_alphas = tuple(int(a) for a in self.scaler_alphas)

    @classmethod
    def from_json(cls, path, seed: Optional[int] = None) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if seed is not None:
            cfg.seed = seed
        return cfg

    def validate(self) -> list[str]:
        """Hard-fail on invalid values; return warnings for values outside
        the tuned grids."""
        if self.seed is None:
            raise ValueError("seed is mandatory")
        if self.scheme not in ("implicit", "spectral"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.bandwidth < 2:
            raise ValueError("bandwidth must be >= 2 (Fiedler vector required)")
        if self.num_layers < 1 or self.hidden_width < 1:
            raise ValueError("num_layers and hidden_width must be >= 1")
        if self.lr < 0 or self.weight_decay < 0:
            raise ValueError("lr and weight_decay must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        notes = []
        for name in KNOWN_RANGES:
            value = getattr(self, name)
            if value not in KNOWN_RANGES[name]:
                notes.append(f"{name}={value} outside the tuned grid "
                             f"{sorted(KNOWN_RANGES[name])}")
        return notes

    def model_config(self, feature_dim: int, target_dim: int,
                     delta: float) -> ModelConfig:
        return ModelConfig(
            feature_dim=feature_dim,
            target_dim=target_dim,
            hidden_width=self.hidden_width,
            num_blocks=self.num_layers,
            scheme=self.scheme,
            bandwidth=self.bandwidth,
            aggregators=self.aggregators,
            scaler_alphas=self.scaler_alphas,
            scale_directional=self.scale_directional,
            readout=self.readout,
            dropout=self.dropout,
            delta=delta,
        )


@dataclass
class MetricsLog:
    """Per-epoch record. Entry 0 is the initial-parameter evaluation."""

    entries: list[dict] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"entries": self.entries}, indent=1) + "\n"

    def timing_json(self) -> str:
        return json.dumps({"wall_clock_seconds": self.wall_clock}, indent=1) + "\n"

    @property
    def final_train_loss(self) -> float:
        return self.entries[-1]["train_loss"]

    @property
    def final_test_mae(self) -> float:
        return self.entries[-1]["test_mae"]


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "anisodiff-checkpoint-v1"


def checkpoint_payload(model: Model, seed: int) -> dict:
    cfg = asdict(model.config)
    cfg["aggregators"] = list(cfg["aggregators"])
    cfg["scaler_alphas"] = list(cfg["scaler_alphas"])
    return {
        "format": CHECKPOINT_FORMAT,
        "seed": seed,
        "config": cfg,
        "params": {k: v.tolist() for k, v in model.parameters().items()},
    }


def save_checkpoint(path, model: Model, seed: int) -> None:
    Path(path).write_text(json.dumps(checkpoint_payload(model, seed), indent=1))


def load_checkpoint(path) -> tuple[Model, int]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigMismatchError(f"unrecognized checkpoint format in {path}")
    cfg = payload["config"]
    cfg["aggregators"] = tuple(cfg["aggregators"])
    cfg["scaler_alphas"] = tuple(cfg["scaler_alphas"])
    config = ModelConfig(**cfg)
    model = Model.init(config, seed=0)
    params = model.parameters()
    for name, values in payload["params"].items():
        arr = np.asarray(values, dtype=np.float64)
        if name not in params:
            raise ConfigMismatchError(f"unexpected parameter {name!r} in checkpoint")
        if arr.shape != params[name].shape:
            raise ConfigMismatchError(
                f"checkpoint parameter {name!r} has shape {arr.shape}, "
                f"expected {params[name].shape}"
            )
        params[name][...] = arr
    return model, int(payload["seed"])


def _snapshot(model: Model) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in model.parameters().items()}


def _restore(model: Model, snapshot: dict[str, np.ndarray]) -> None:
    for k, v in model.parameters().items():
        v[...] = snapshot[k]


# ---------------------------------------------------------------------------
# evaluation / training
# ---------------------------------------------------------------------------

def evaluate_records(model: Model, records: list[GraphRecord]) -> float:
    """Mean over graphs of the per-graph MAE. Pure: no parameter mutation."""
    total = 0.0
    for rec in records:
        cache = rec.cache or precompute_cache(rec.graph, model.config.bandwidth)
        if rec.graph.feature_dim != model.config.feature_dim:
            raise ConfigMismatchError(
                f"dataset feature dim {rec.graph.feature_dim} != model "
                f"feature dim {model.config.feature_dim}"
            )
        value, _ = mae_loss(predict(model, cache), rec.target)
        total += value
    return total / len(records)


def evaluate(checkpoint_path, dataset_path) -> float:
    model, _ = load_checkpoint(checkpoint_path)
    records = load_dataset(dataset_path, bandwidth=model.config.bandwidth)
    return evaluate_records(model, records)


def _dataset_delta(records: list[GraphRecord]) -> float:
    logs = np.concatenate([np.log(r.graph.degrees() + 1.0) for r in records])
    return float(logs.mean())


@dataclass
class TrainResult:
    model: Model
    best_model_snapshot: dict[str, np.ndarray]
    metrics: MetricsLog
    diverged: bool = False


def train(config: ExperimentConfig,
          train_records: Optional[list[GraphRecord]] = None,
          val_records: Optional[list[GraphRecord]] = None,
          test_records: Optional[list[GraphRecord]] = None) -> TrainResult:
    """Run the training loop. Deterministic given config and seed.

    Records may be passed directly (already cached) to skip file loading.
    Raises ``DivergenceDetectedError`` on a non-finite loss; the result with
    the last good snapshot is attached to the exception as ``result``.
    """
    notes = config.validate()
    for note in notes:
        warnings.warn(note, stacklevel=2)

    if train_records is None:
        train_records = load_dataset(config.train_path, bandwidth=config.bandwidth)
    if val_records is None:
        val_records = load_dataset(config.val_path, bandwidth=config.bandwidth)
    if test_records is None:
        test_records = load_dataset(config.test_path, bandwidth=config.bandwidth)

    feature_dim = train_records[0].graph.feature_dim
    target_dim = train_records[0].target.size
    for rec in train_records + val_records + test_records:
        if rec.graph.feature_dim != feature_dim or rec.target.size != target_dim:
            raise ConfigMismatchError(
                "inconsistent feature or target dimensions across datasets"
            )

    delta = _dataset_delta(train_records)
    model = Model.init(
        config.model_config(feature_dim, target_dim, delta), seed=config.seed
    )
    params = model.parameters()
    adam = AdamState.init(params)
    rng = np.random.default_rng(config.seed)

    metrics = MetricsLog()
    start = time.perf_counter()

    def log_entry(epoch: int, train_loss: float) -> None:
        metrics.entries.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "val_mae": evaluate_records(model, val_records),
            "test_mae": evaluate_records(model, test_records),
            "times": [t.tolist() for t in model.learned_times()],
        })
        metrics.wall_clock.append(time.perf_counter() - start)

    log_entry(0, evaluate_records(model, train_records))
    best_val = metrics.entries[0]["val_mae"]
    best_snapshot = _snapshot(model)
    last_good = _snapshot(model)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_records))
        # per-graph losses keyed by dataset index: the epoch mean is then
        # independent of the shuffle's summation order
        graph_losses = np.zeros(len(train_records))
        diverged = False
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo: lo + config.batch_size]
            grads_acc = {k: np.zeros_like(v) for k, v in params.items()}
            try:
                for idx in batch:
                    rec = train_records[idx]
                    tape = GradientTape()
                    pred = model_forward(model, rec.cache, tape,
                                         rng=rng, train=True)
                    loss = tape.mae(pred, rec.target)
                    graph_losses[idx] = float(loss.value)
                    grads = model_backward(model, tape, 1.0 / len(batch))
                    for k in grads_acc:
                        grads_acc[k] += grads[k]
            except NonFiniteActivationError:
                diverged = True
                break
            adam_step(params, grads_acc, adam,
                      lr=config.lr, weight_decay=config.weight_decay)
        train_loss = float(graph_losses.mean())
        if diverged or not np.isfinite(train_loss):
            result = TrainResult(model=model, best_model_snapshot=best_snapshot,
                                 metrics=metrics, diverged=True)
            _restore(model, last_good)
            exc = DivergenceDetectedError(
                f"non-finite loss at epoch {epoch}; restored last good parameters"
            )
            exc.result = result
            raise exc

        log_entry(epoch, train_loss)
        last_good = _snapshot(model)
        if metrics.entries[-1]["val_mae"] < best_val:
            best_val = metrics.entries[-1]["val_mae"]
            best_snapshot = _snapshot(model)

    return TrainResult(model=model, best_model_snapshot=best_snapshot,
                       metrics=metrics)


def run_experiment(config: ExperimentConfig, out_dir, *, plot: bool = True) -> TrainResult:
    """train() plus the on-disk report: metrics, timing, checkpoints, figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    effective = asdict(config)
    effective["aggregators"] = list(config.aggregators)
    effective["scaler_alphas"] = list(config.scaler_alphas)
    (out / "config_effective.json").write_text(json.dumps(effective, indent=1) + "\n")

    try:
        result = train(config)
    except DivergenceDetectedError as exc:
        result = exc.result
        save_checkpoint(out / "checkpoint_last_good.json", result.model, config.seed)
        (out / "metrics.json").write_text(result.metrics.to_json())
        (out / "timing.json").write_text(result.metrics.timing_json())
        raise

    (out / "metrics.json").write_text(result.metrics.to_json())
    (out / "timing.json").write_text(result.metrics.timing_json())
    save_checkpoint(out / "checkpoint_final.json", result.model, config.seed)

    best = Model.init(result.model.config, seed=0)
    _restore(best, result.best_model_snapshot)
    save_checkpoint(out / "checkpoint_best.json", best, config.seed)

    if plot:
        from .plots import save_training_figure
        save_training_figure(out / "training.png", result.metrics)
    return result

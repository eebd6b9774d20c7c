"""Mini-batch training with Adam and a one-step plateau learning-rate drop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, TrainingError
from ..numerics import make_rng
from .model import AutoEncoder, named_arrays
from .optim import Adam, mse_loss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr_initial: float = 1e-3
    lr_final: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    patience: int = 10            # epochs without improvement before the lr drop
    min_rel_improvement: float = 1e-5
    quant_bits: int | None = None  # straight-through quantization during training
    eval_batch_size: int = 1024

    def __post_init__(self):
        if self.lr_initial <= 0 or self.lr_final <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise DomainError("learning rates, batch size must be positive and epochs >= 0")
        if self.lr_initial <= self.lr_final:
            raise DomainError("initial learning rate must exceed the final one")


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)

    @property
    def best_val_loss(self):
        return self.history[-1]["best_val_loss"] if self.history else float("nan")


def _refs(model, which):
    if isinstance(model, AutoEncoder):
        return model.named(which)
    return named_arrays(model, which)


def _forward(model, x, training, quant_bits=None):
    if isinstance(model, AutoEncoder):
        return model.forward(x, training, quant_bits=quant_bits)
    return model.forward(x, training)


def snapshot(model) -> dict:
    state = {}
    for which in ("params", "buffers"):
        for name, layer, key in _refs(model, which):
            state[(which, name)] = getattr(layer, which)[key].copy()
    return state


def restore(model, state: dict) -> None:
    for which in ("params", "buffers"):
        for name, layer, key in _refs(model, which):
            getattr(layer, which)[key][...] = state[(which, name)]


def evaluate(model, x, y=None, batch_size=1024) -> float:
    """Eval-mode MSE over a dataset, accumulated in a fixed order."""
    y = x if y is None else y
    total, count = 0.0, 0
    for start in range(0, x.shape[0], batch_size):
        out = _forward(model, x[start:start + batch_size], training=False)
        diff = out - y[start:start + batch_size]
        total += float(np.sum(diff * diff))
        count += diff.size
    return total / count


def train(model, x_train, x_val, config: TrainConfig, y_train=None, y_val=None) -> TrainResult:
    """Fit ``model`` to map inputs to targets (targets default to the inputs).

    The learning rate starts at ``lr_initial`` and drops once to
    ``lr_final`` after ``patience`` epochs without a relative validation
    improvement of ``min_rel_improvement``.  The parameters with the best
    validation loss are restored at the end.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_train = x_train if y_train is None else np.asarray(y_train, dtype=np.float64)
    y_val = x_val if y_val is None else np.asarray(y_val, dtype=np.float64)
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise DomainError("training and validation sets must be non-empty")

    refs = _refs(model, "params")
    opt = Adam(lr=config.lr_initial)
    rng = make_rng(config.seed)
    best_val = evaluate(model, x_val, y_val, config.eval_batch_size)
    best_state = snapshot(model)
    wait = 0
    history = []
    n = x_train.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            out = _forward(model, x_train[idx], True, config.quant_bits)
            loss, grad = mse_loss(out, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            model.backward(grad)
            opt.step([layer.params[k] for _, layer, k in refs],
                     [layer.grads[k] for _, layer, k in refs])
            total += loss * idx.size
        train_loss = total / n
        val_loss = evaluate(model, x_val, y_val, config.eval_batch_size)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch=epoch)

        if val_loss < best_val * (1.0 - config.min_rel_improvement):
            best_val = val_loss
            best_state = snapshot(model)
            wait = 0
        else:
            wait += 1
            if wait >= config.patience and opt.lr != config.lr_final:
                log.info("epoch %d: validation plateau, lr %.1e -> %.1e", epoch, opt.lr, config.lr_final)
                opt.lr = config.lr_final
                wait = 0
        history.append({
            "epoch": epoch,
            "lr": opt.lr,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "best_val_loss": best_val,
        })
        log.debug("epoch %d train %.4e val %.4e", epoch, train_loss, val_loss)

    restore(model, best_state)
    return TrainResult(model, history)

"""BPTT training with Adam, global-norm gradient clipping, and early
stopping on validation AUC.

Training is deterministic for a fixed config seed: parameter init and the
per-epoch batch shuffle both draw from generators derived from it. The
parameters of the best-validation epoch are restored into the model when
training ends.
"""

from dataclasses import dataclass, field

import numpy as np

from ..ingest import Split, StudentSequence
from .kernels import BACKEND, active as K
from .metrics import auc
from .model import DktModel, sequence_arrays


class TrainingDiverged(RuntimeError):
    """Raised when the loss or parameters become non-finite."""


@dataclass
class TrainingReport:
    train_loss: list[float] = field(default_factory=list)
    val_auc: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_auc: float = float("nan")
    epochs_run: int = 0
    early_stopped: bool = False
    seed: int = 0
    backend: str = BACKEND

    def to_dict(self):
        return dict(self.__dict__)


class Adam:
    """Adam with bias correction, updating parameter arrays in place."""

    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * (g * g)
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_global_norm(grads, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def _prepare(sequences, num_exercises, max_seq_len):
    return [sequence_arrays(s, num_exercises, max_seq_len) for s in sequences]


def _batch_arrays(prepared, indices):
    """Pad the selected sequences to the longest one, time-major."""
    chosen = [prepared[i] for i in indices]
    B = len(chosen)
    T = max(len(x_idx) for x_idx, _, _ in chosen)
    x_idx = np.zeros((T, B), dtype=np.int64)
    targets = np.zeros((T, B), dtype=np.int64)
    labels = np.zeros((T, B), dtype=np.float64)
    mask = np.zeros((T, B), dtype=np.float64)
    for bi, (xi, tg, lb) in enumerate(chosen):
        L = len(xi)
        x_idx[:L, bi] = xi
        targets[:L, bi] = tg
        labels[:L, bi] = lb
        mask[:L, bi] = 1.0
    return x_idx, targets, labels, mask


def _forward_batches(model, prepared, batch_size, order=None):
    """Yield (batch arrays, forward results) over `prepared` in chunks."""
    if order is None:
        order = np.arange(len(prepared))
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        arrays = _batch_arrays(prepared, idx)
        out = K.lstm_forward_train(*arrays, model.wx, model.wh, model.b, model.wy, model.by)
        yield arrays, out


def evaluate(model: DktModel, sequences: list[StudentSequence]) -> float:
    """AUC of next-step predictions pooled over all sequences."""
    if not sequences:
        raise ValueError("cannot evaluate on an empty sequence list")
    prepared = _prepare(sequences, model.num_exercises, model.config.max_seq_len)
    scores, labels = [], []
    for (x_idx, targets, lab, mask), (_, p, *_rest) in _forward_batches(
        model, prepared, model.config.batch_size
    ):
        valid = mask > 0
        scores.append(p[valid])
        labels.append(lab[valid])
    return auc(np.concatenate(scores), np.concatenate(labels).astype(np.int64))


def train(model: DktModel, split: Split) -> TrainingReport:
    """Train in place on `split.train`, validating on `split.test` each epoch.

    Keeps the parameters of the best-validation-AUC epoch, stopping early
    after `early_stop_patience` epochs without improvement. Raises
    TrainingDiverged if the loss or any parameter becomes non-finite.
    """
    cfg = model.config
    if not split.train or not split.test:
        raise ValueError("split must have nonempty train and test sides")
    prepared = _prepare(split.train, model.num_exercises, cfg.max_seq_len)
    rng = np.random.default_rng([cfg.seed, 1])
    adam = Adam(model.params(), cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    report = TrainingReport(seed=cfg.seed)
    best_params = model.copy_params()
    stale = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(prepared))
        loss_sum = 0.0
        step_sum = 0.0
        for bi, ((x_idx, targets, labels, mask), out) in enumerate(
            _forward_batches(model, prepared, cfg.batch_size, order)
        ):
            loss, p, hs, cs, gates = out
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads = K.lstm_backward_train(
                x_idx, targets, labels, mask, p, hs, cs, gates,
                model.wx, model.wh, model.b, model.wy, model.by,
            )
            clip_global_norm(grads, cfg.grad_clip_norm)
            adam.step(model.params(), grads)
            n_valid = mask.sum()
            loss_sum += loss * n_valid
            step_sum += n_valid
        model.assert_finite()

        report.train_loss.append(loss_sum / step_sum)
        val = evaluate(model, split.test)
        report.val_auc.append(val)
        report.epochs_run = epoch + 1

        if report.best_epoch < 0 or val > report.best_val_auc:
            report.best_epoch = epoch
            report.best_val_auc = val
            best_params = model.copy_params()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                report.early_stopped = True
                break

    model.set_params(best_params)
    return report

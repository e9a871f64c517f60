"""Language-to-vision regression: a linear map or a one-hidden-layer tanh net.

Both kinds are trained with plain minibatch SGD on the squared error
``0.5 * ||y_hat - y||^2`` averaged over the batch, with inverted dropout.

Dropout is applied to the input of the output layer: the text vector for the
linear kind, the tanh activations for the mlp kind. The output layer is
linear, so the expected train-mode output equals the eval-mode output.
``TrainConfig.dropout_input=True`` additionally drops the mlp's input units,
which no longer preserves that expectation (tanh is nonlinear).
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionMismatchError, DivergenceError
from .vectors import VectorTable

logger = logging.getLogger(__name__)

KINDS = ("linear", "mlp")
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class MapModel:
    """Parameters of ``f``.

    linear: ``W1`` is ``(d_v, d_l)`` and ``b1`` is ``(d_v,)``.
    mlp: ``W1`` is ``(d_h, d_l)``, ``b1`` ``(d_h,)``, ``W2`` ``(d_v, d_h)``, ``b2`` ``(d_v,)``.
    """

    kind: str
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray | None = None
    b2: np.ndarray | None = None
    normalize_inputs: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        for name in self.param_names():
            arr = getattr(self, name)
            if arr is None:
                raise DimensionMismatchError(f"{self.kind} model is missing {name}")
            arr = np.array(arr, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise DataError(f"parameter {name} has non-finite entries")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.kind == "linear" and (self.W2 is not None or self.b2 is not None):
            raise DimensionMismatchError("linear model takes no second layer")
        W1, b1 = self.W1, self.b1
        if W1.ndim != 2 or b1.shape != (W1.shape[0],):
            raise DimensionMismatchError(f"bad layer-1 shapes {W1.shape}, {b1.shape}")
        if self.kind == "mlp":
            W2, b2 = self.W2, self.b2
            if W2.ndim != 2 or W2.shape[1] != W1.shape[0] or b2.shape != (W2.shape[0],):
                raise DimensionMismatchError(f"bad layer-2 shapes {W2.shape}, {b2.shape}")

    def param_names(self) -> tuple[str, ...]:
        return ("W1", "b1") if self.kind == "linear" else ("W1", "b1", "W2", "b2")

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.param_names()}

    def with_params(self, **params) -> MapModel:
        return replace(self, **params)

    @property
    def d_l(self) -> int:
        return self.W1.shape[1]

    @property
    def d_v(self) -> int:
        return self.W1.shape[0] if self.kind == "linear" else self.W2.shape[0]

    @property
    def d_h(self) -> int | None:
        return self.W1.shape[0] if self.kind == "mlp" else None

    def __eq__(self, other) -> bool:
        if not isinstance(other, MapModel):
            return NotImplemented
        if (self.kind, self.normalize_inputs) != (other.kind, other.normalize_inputs):
            return False
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.params().values(), other.params().values())
        )

    __hash__ = None


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_model(kind: str, d_l: int, d_v: int, d_h: int | None = None, seed: int = 0) -> MapModel:
    """Glorot-uniform weights, zero biases, fully determined by ``seed``."""
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if d_l < 1 or d_v < 1:
        raise ValueError("d_l and d_v must be positive")
    rng = np.random.default_rng(seed)
    if kind == "linear":
        if d_h is not None:
            raise ValueError("d_h is only meaningful for the mlp kind")
        return MapModel("linear", _glorot(rng, d_v, d_l), np.zeros(d_v))
    if d_h is None or d_h < 1:
        raise ValueError("the mlp kind requires a positive d_h")
    W1 = _glorot(rng, d_h, d_l)
    W2 = _glorot(rng, d_v, d_h)
    return MapModel("mlp", W1, np.zeros(d_h), W2, np.zeros(d_v))


@dataclass
class Masks:
    """Pre-scaled inverted-dropout masks (``keep / (1 - p)``) for one batch."""

    input: np.ndarray | None = None
    hidden: np.ndarray | None = None


def draw_masks(model: MapModel, batch_size: int, rate: float, rng: np.random.Generator,
               dropout_input: bool = False) -> Masks:
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if rate == 0.0:
        return Masks()

    def draw(width):
        return (rng.random((batch_size, width)) >= rate) / (1.0 - rate)

    if model.kind == "linear":
        return Masks(input=draw(model.d_l))
    return Masks(input=draw(model.d_l) if dropout_input else None, hidden=draw(model.d_h))


def _check_inputs(model: MapModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d_l:
        raise DimensionMismatchError(f"expected inputs of dim {model.d_l}, got shape {X.shape}")
    return X


def _forward(model: MapModel, X: np.ndarray, masks: Masks) -> tuple[np.ndarray, dict]:
    Xd = X if masks.input is None else X * masks.input
    if model.kind == "linear":
        return Xd @ model.W1.T + model.b1, {"Xd": Xd}
    H = np.tanh(Xd @ model.W1.T + model.b1)
    Hd = H if masks.hidden is None else H * masks.hidden
    return Hd @ model.W2.T + model.b2, {"Xd": Xd, "H": H, "Hd": Hd}


def forward_batch(model: MapModel, X, masks: Masks | None = None) -> np.ndarray:
    """Row-wise forward pass; eval mode unless ``masks`` carries dropout masks."""
    X = _check_inputs(model, X)
    return _forward(model, X, masks or Masks())[0]


def forward(model: MapModel, x, mode: str = "eval", rng: np.random.Generator | None = None,
            dropout_rate: float = 0.0, dropout_input: bool = False,
            return_cache: bool = False):
    """Map one text vector to the visual space.

    In ``"train"`` mode inverted dropout masks are drawn from ``rng``. With
    ``return_cache=True`` the intermediates used by backprop are returned too.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatchError("forward expects a single vector; use forward_batch")
    X = _check_inputs(model, x[None, :])
    if mode == "eval":
        masks = Masks()
    elif mode == "train":
        if rng is None:
            raise ValueError("train mode needs an rng for the dropout masks")
        masks = draw_masks(model, 1, dropout_rate, rng, dropout_input)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    Y, cache = _forward(model, X, masks)
    if return_cache:
        cache["masks"] = masks
        return Y[0], cache
    return Y[0]


def mse_loss(y_hat, y) -> float:
    """``0.5 * sum((y_hat - y)**2)``."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise DimensionMismatchError(f"shape mismatch {y_hat.shape} vs {y.shape}")
    d = y_hat - y
    return 0.5 * float(np.sum(d * d))


def batch_loss(model: MapModel, X, Y, masks: Masks | None = None) -> float:
    """Mean over rows of the per-example squared-error loss."""
    Y_hat = forward_batch(model, X, masks)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != Y_hat.shape:
        raise DimensionMismatchError(f"targets have shape {Y.shape}, expected {Y_hat.shape}")
    d = Y_hat - Y
    return 0.5 * float(np.sum(d * d)) / len(Y)


def loss_and_gradients(model: MapModel, X, Y,
                       masks: Masks | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Batch-mean loss and its gradient w.r.t. every parameter.

    ``masks`` must be the ones used for the paired forward pass (None = no dropout).
    """
    X = _check_inputs(model, X)
    Y = np.asarray(Y, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty batch")
    if Y.shape != (len(X), model.d_v):
        raise DimensionMismatchError(f"targets have shape {Y.shape}, expected {(len(X), model.d_v)}")
    masks = masks or Masks()
    Y_hat, cache = _forward(model, X, masks)
    diff = Y_hat - Y
    loss = 0.5 * float(np.sum(diff * diff)) / len(X)
    dY = diff / len(X)
    if model.kind == "linear":
        return loss, {"W1": dY.T @ cache["Xd"], "b1": dY.sum(axis=0)}
    dHd = dY @ model.W2
    dH = dHd if masks.hidden is None else dHd * masks.hidden
    dA = dH * (1.0 - cache["H"] ** 2)
    return loss, {
        "W1": dA.T @ cache["Xd"],
        "b1": dA.sum(axis=0),
        "W2": dY.T @ cache["Hd"],
        "b2": dY.sum(axis=0),
    }


def gradients(model: MapModel, X, Y, masks: Masks | None = None) -> dict[str, np.ndarray]:
    return loss_and_gradients(model, X, Y, masks)[1]


def sgd_step(model: MapModel, grads: dict[str, np.ndarray], learning_rate: float) -> MapModel:
    """Return a new model with every parameter ``p <- p - learning_rate * g``."""
    updated = {}
    for name, p in model.params().items():
        if name not in grads:
            raise DimensionMismatchError(f"missing gradient for {name}")
        g = np.asarray(grads[name])
        if g.shape != p.shape:
            raise DimensionMismatchError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        updated[name] = p - learning_rate * g
    extra = set(grads) - set(updated)
    if extra:
        raise DimensionMismatchError(f"unexpected gradients {sorted(extra)}")
    return model.with_params(**updated)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    dropout_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    shuffle: bool = True
    hidden_units: int = 300
    dropout_input: bool = False
    normalize_inputs: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be positive")


PRESETS = {
    "paper-linear": {"kind": "linear", "learning_rate": 0.1, "dropout_rate": 0.1},
    "paper-mlp": {"kind": "mlp", "learning_rate": 0.1, "dropout_rate": 0.25, "hidden_units": 300},
}


def preset_config(name: str, **overrides) -> tuple[str, TrainConfig]:
    """Return ``(kind, config)`` for a named preset, with field overrides."""
    settings = dict(PRESETS[name])
    kind = settings.pop("kind")
    settings.update(overrides)
    return kind, TrainConfig(**settings)


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    examples_seen: int = 0
    final_loss: float = float("nan")
    words: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "epoch_losses": list(self.epoch_losses),
            "examples_seen": self.examples_seen,
            "final_loss": self.final_loss,
            "n_train": len(self.words),
        }


def normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("cannot normalize a zero-norm input vector")
    return X / norms


def training_pairs(text_table: VectorTable, visual_table: VectorTable,
                   normalize_inputs: bool = False) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Words present in both tables (sorted) with their text and visual matrices."""
    words = tuple(sorted(text_table.vocab() & visual_table.vocab()))
    if not words:
        raise DataError("text and visual vocabularies do not intersect")
    X = text_table.rows(words)
    if normalize_inputs:
        X = normalize_rows(X)
    return words, X, visual_table.rows(words)


def train(text_table: VectorTable, visual_table: VectorTable, kind: str,
          config: TrainConfig = TrainConfig()) -> tuple[MapModel, TrainReport]:
    """Fit ``f`` on the shared vocabulary by minibatch SGD.

    Weight init, shuffling and dropout masks all derive from ``config.seed``,
    so equal configs give bitwise-equal models.

    Raises:
        DataError: the vocabularies do not intersect.
        DivergenceError: an epoch's mean loss is not finite.
    """
    words, X, Y = training_pairs(text_table, visual_table, config.normalize_inputs)
    init_seed, data_seed = np.random.SeedSequence(config.seed).spawn(2)
    model = init_model(
        kind, X.shape[1], Y.shape[1],
        d_h=config.hidden_units if kind == "mlp" else None,
        seed=init_seed.generate_state(1)[0],
    )
    model = model.with_params(normalize_inputs=config.normalize_inputs)
    rng = np.random.default_rng(data_seed)
    n = len(words)
    report = TrainReport(examples_seen=n, words=words)

    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        finite = True
        # overflow is expected on divergence and reported below
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                masks = draw_masks(model, len(idx), config.dropout_rate, rng, config.dropout_input)
                loss, grads = loss_and_gradients(model, X[idx], Y[idx], masks)
                total += loss * len(idx)
                step = {k: v - config.learning_rate * grads[k] for k, v in model.params().items()}
                finite = math.isfinite(loss) and all(np.all(np.isfinite(v)) for v in step.values())
                if not finite:
                    break
                model = model.with_params(**step)
        epoch_loss = total / n
        if not finite:
            raise DivergenceError(
                f"training diverged at epoch {epoch + 1} (lr={config.learning_rate}, "
                f"dropout={config.dropout_rate}): mean loss {epoch_loss}"
            )
        report.epoch_losses.append(epoch_loss)
        logger.debug("epoch %d loss %.6g", epoch + 1, epoch_loss)

    report.final_loss = batch_loss(model, X, Y)
    return model, report


@dataclass
class GradCheckReport:
    relative_errors: dict[str, float]
    tolerance: float

    @property
    def max_relative_error(self) -> float:
        return max(self.relative_errors.values())

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def numerical_gradients(model: MapModel, X, Y, h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences ``(L(p + h) - L(p - h)) / 2h`` of the eval-mode batch loss."""
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    X = _check_inputs(model, X)
    out = {}
    for name, p in model.params().items():
        g = np.zeros_like(p)
        work = p.copy()
        for i in np.ndindex(p.shape):
            orig = work[i]
            work[i] = orig + h
            up = batch_loss(model.with_params(**{name: work}), X, Y)
            work[i] = orig - h
            down = batch_loss(model.with_params(**{name: work}), X, Y)
            work[i] = orig
            g[i] = (up - down) / (2.0 * h)
        out[name] = g
    return out


def gradient_check(model: MapModel, X, Y, h: float = 1e-5, tolerance: float = 1e-6) -> GradCheckReport:
    """Compare analytic gradients (dropout off) with central differences.

    The error for each parameter array is ``||a - n|| / max(||a||, ||n||)``,
    which stays meaningful when individual entries are near zero.
    """
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    analytic = gradients(model, X, Y)
    numeric = numerical_gradients(model, X, Y, h)
    errors = {}
    for name in model.param_names():
        a, n = analytic[name], numeric[name]
        scale = max(np.linalg.norm(a), np.linalg.norm(n))
        errors[name] = 0.0 if scale == 0.0 else float(np.linalg.norm(a - n) / scale)
    return GradCheckReport(errors, tolerance)


def model_to_dict(model: MapModel) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "d_l": model.d_l,
        "d_v": model.d_v,
        "d_h": model.d_h,
        "normalize_inputs": model.normalize_inputs,
    }
    for name, p in model.params().items():
        doc[name] = p.ravel().tolist()
    return doc


def model_from_dict(doc: dict) -> MapModel:
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('version')!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise DataError(f"unknown model kind {kind!r}")
    d_l, d_v, d_h = doc["d_l"], doc["d_v"], doc.get("d_h")
    if kind == "linear":
        shapes = {"W1": (d_v, d_l), "b1": (d_v,)}
    else:
        shapes = {"W1": (d_h, d_l), "b1": (d_h,), "W2": (d_v, d_h), "b2": (d_v,)}
    params = {}
    for name, shape in shapes.items():
        flat = np.asarray(doc.get(name, []), dtype=np.float64)
        if flat.size != math.prod(shape):
            raise DataError(f"parameter {name} has {flat.size} values, expected shape {shape}")
        params[name] = flat.reshape(shape)
    return MapModel(kind, normalize_inputs=bool(doc.get("normalize_inputs", False)), **params)


def model_to_json(model: MapModel) -> str:
    # json emits floats via repr(), which round-trips exactly.
    return json.dumps(model_to_dict(model), separators=(",", ":"), allow_nan=False) + "\n"


def model_hash(model: MapModel) -> str:
    return hashlib.sha256(model_to_json(model).encode("utf-8")).hexdigest()


def save_model(model: MapModel, path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path) -> MapModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid model file ({exc})") from None
    return model_from_dict(doc)

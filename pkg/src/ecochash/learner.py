"""Online SGD over linear-threshold hash functions.

Each column t of the code is produced by f_t(x) = sgn(w_t . [x;1]), with
sgn(0) = +1. Training minimizes a convex margin surrogate of the masked
Hamming distance between the mapping's output and the observed label's
ternary codeword; inactive codeword positions contribute neither loss nor
gradient, so only the k functions of the label's cycle are ever touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitcode import PackedCode, TernaryCodeword
from .codebook import Codebook
from .ecoc import EcocMatrix, Label
from .errors import ConsistencyError, DimensionError


class HingeLoss:
    """l(z) = max(0, 1 + z); the subgradient at the kink is 0."""

    def value(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, 1.0 + z)

    def slope(self, z: np.ndarray) -> np.ndarray:
        return (z > -1.0).astype(np.float64)


class LogisticLoss:
    """l(z) = log2(1 + e^z), a smooth upper bound on the 0/1 disagreement."""

    def value(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        out = np.empty_like(z)
        big = z > 30.0
        out[big] = z[big] / np.log(2.0)
        out[~big] = np.log1p(np.exp(z[~big])) / np.log(2.0)
        return out

    def slope(self, z: np.ndarray) -> np.ndarray:
        return 1.0 / ((1.0 + np.exp(-z)) * np.log(2.0))


HINGE = HingeLoss()
LOGISTIC = LogisticLoss()


@dataclass
class StepReport:
    """What one training step did; drives index refresh and cost accounting."""

    label: Label
    touched_columns: range
    surrogate_loss_before: float
    new_cycle_started: bool
    is_new_label: bool


def init_functions(d: int, count: int, seed) -> np.ndarray:
    """Gaussian random hyperplanes: entries ~ N(0, 1/(d+1)), bias 0.

    Returns a (count, d+1) float64 array of homogeneous weight vectors,
    deterministic for a fixed seed.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((count, d + 1)) / np.sqrt(d + 1)
    if count:
        w[:, -1] = 0.0
    return w


def augment(x: np.ndarray) -> np.ndarray:
    """Homogeneous form [x; 1] as float64."""
    x = np.asarray(x, dtype=np.float64)
    return np.append(x, 1.0)


def predict_bit(w: np.ndarray, x: np.ndarray) -> int:
    """sgn(w . [x;1]) with sgn(0) = +1."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (len(x) + 1,):
        raise DimensionError(f"weight length {w.shape} does not match feature length {len(x)}+1")
    return 1 if float(w @ augment(x)) >= 0.0 else -1


@dataclass
class HashModel:
    """The ordered set of hash-function weights, one row per code column.

    Columns are grouped in blocks of k per cycle; ``grow_cycle`` appends a
    freshly initialized block whose seed is derived from (seed, cycle), so a
    rerun of the same stream reproduces the weights bit for bit.
    """

    d: int
    k: int
    weights: np.ndarray
    iteration: int = 0
    seed: int = 0

    @classmethod
    def create(cls, d: int, k: int, seed: int = 0) -> "HashModel":
        return cls(d=d, k=k, weights=init_functions(d, k, [seed, 1]), seed=seed)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    def column_cycle(self, t: int) -> int:
        return t // self.k + 1

    def grow_cycle(self, cycle: int) -> None:
        """Append the k functions owned by a newly opened cycle."""
        fresh = init_functions(self.d, self.k, [self.seed, cycle])
        self.weights = np.vstack([self.weights, fresh])

    def scores(self, x: np.ndarray, columns: range | None = None) -> np.ndarray:
        if len(x) != self.d:
            raise DimensionError(f"feature length {len(x)} does not match d={self.d}")
        w = self.weights if columns is None else self.weights[columns.start:columns.stop]
        return w @ augment(x)


def phi(model: HashModel, x: np.ndarray) -> PackedCode:
    """The full b-bit code of x under the current mapping."""
    s = model.scores(x)
    bits = (s >= 0.0)
    if not len(bits):
        return PackedCode(0, 0)
    packed = np.packbits(bits, bitorder="little").tobytes()
    return PackedCode(model.width, int.from_bytes(packed, "little"))


def surrogate_loss(model: HashModel, x: np.ndarray, cw: TernaryCodeword,
                   loss=HINGE) -> float:
    """Sum of margin losses over the codeword's active positions.

    Upper-bounds the masked Hamming distance between phi(model, x) and cw.
    """
    if cw.length != model.width:
        raise DimensionError(f"codeword length {cw.length} does not match width {model.width}")
    pos = cw.active_positions()
    if not len(pos):
        return 0.0
    c = cw.active_values()
    s = model.weights[pos] @ augment(x)
    return float(loss.value(-c * s).sum())


def gradient(model: HashModel, x: np.ndarray, cw: TernaryCodeword,
             loss=HINGE) -> dict[int, np.ndarray]:
    """Sparse per-column gradient of the surrogate at the current weights.

    Only active columns with a nonzero loss slope appear; with the hinge,
    those are exactly the margin-violating columns and each entry equals
    -c_t * [x;1]. Inactive columns have identically zero gradient and are
    never present.
    """
    if cw.length != model.width:
        raise DimensionError(f"codeword length {cw.length} does not match width {model.width}")
    pos = cw.active_positions()
    if not len(pos):
        return {}
    c = cw.active_values()
    xh = augment(x)
    coef = loss.slope(-c * (model.weights[pos] @ xh))
    out: dict[int, np.ndarray] = {}
    for t, ct, g in zip(pos, c, coef):
        if g != 0.0:
            out[int(t)] = (-ct * g) * xh
    return out


def step(model: HashModel, matrix: EcocMatrix, cb: Codebook,
         x: np.ndarray, y: Label, eta: float = 1.0, loss=HINGE) -> StepReport:
    """One online update: observe the label, then descend on its codeword.

    A label that opens a new cycle first grows the model by k fresh
    functions; the gradient then only ever touches the k columns of the
    label's own cycle, so every other weight vector is left bitwise intact.
    """
    if len(x) != model.d:
        raise DimensionError(f"feature length {len(x)} does not match d={model.d}")
    obs = matrix.observe_label(cb, y)
    if obs.new_cycle_started:
        model.grow_cycle(matrix.m)
    if model.width != matrix.width:
        raise ConsistencyError(
            f"model width {model.width} does not match matrix width {matrix.width}")
    loss_before = surrogate_loss(model, x, obs.codeword, loss)
    for t, g in gradient(model, x, obs.codeword, loss).items():
        model.weights[t] -= eta * g
    model.iteration += 1
    touched = matrix.cycle_columns(matrix.cycle_of_label[y])
    return StepReport(label=y, touched_columns=touched,
                      surrogate_loss_before=loss_before,
                      new_cycle_started=obs.new_cycle_started,
                      is_new_label=obs.is_new_label)


@dataclass
class FeatureNormalizer:
    """Mean-center and L2-normalize feature vectors.

    The mean either comes from a calibration set (``fit``) or accumulates
    online (``update`` before each ``transform``). Normalized features keep
    the per-step gradient bounded.
    """

    mean: np.ndarray | None = None
    count: int = 0
    convention: str = "l2"

    @classmethod
    def fit(cls, X: np.ndarray) -> "FeatureNormalizer":
        X = np.asarray(X, dtype=np.float64)
        return cls(mean=X.mean(axis=0), count=X.shape[0])

    def update(self, x: np.ndarray) -> None:
        """Fold one observation into the running mean."""
        x = np.asarray(x, dtype=np.float64)
        if self.mean is None:
            self.mean = x.copy()
            self.count = 1
        else:
            self.count += 1
            self.mean += (x - self.mean) / self.count

    def transform(self, x: np.ndarray) -> np.ndarray:
        v = np.asarray(x, dtype=np.float64)
        if self.mean is not None:
            v = v - self.mean
        norm = float(np.linalg.norm(v))
        return v / norm if norm > 0.0 else v

    def transform_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.mean is not None:
            X = X - self.mean
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return X / norms

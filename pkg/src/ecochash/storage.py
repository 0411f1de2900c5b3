"""On-disk formats: model bundles, indexes, and feature files.

Everything binary is little-endian with explicit magic and version words.
Saving and reloading a bundle reproduces it byte for byte, including the
codebook draw position, so a restored session continues the exact same
random sequence it would have produced uninterrupted.

Feature files come in two encodings. The binary one is compact and typed:
a "FEAT" magic, the dimension, then (u64 id, i32 label, d float32) records
where label -1 means unlabeled. The CSV one is ``id,label,f0,...`` with an
empty label cell meaning unlabeled; its floats are parsed as float32 so
both encodings of the same data train identically.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bitcode import PackedCode, TernaryCodeword
from .codebook import Codebook
from .ecoc import EcocMatrix
from .errors import FormatError
from .index import MODE_CODEWORD, MODE_PHI, HashIndex, IndexEntry
from .learner import FeatureNormalizer, HashModel

MODEL_MAGIC = b"ECOCHMDL"
INDEX_MAGIC = b"ECOCHIDX"
FEATURE_MAGIC = 0x54414546  # the bytes b"FEAT"
FORMAT_VERSION = 1

_MODE_TO_TAG = {MODE_CODEWORD: 0, MODE_PHI: 1}
_TAG_TO_MODE = {v: k for k, v in _MODE_TO_TAG.items()}


class _Writer:
    def __init__(self, f) -> None:
        self.f = f

    def raw(self, b: bytes) -> None:
        self.f.write(b)

    def u8(self, v: int) -> None:
        self.f.write(struct.pack("<B", v))

    def u32(self, v: int) -> None:
        self.f.write(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self.f.write(struct.pack("<Q", v))

    def i32(self, v: int) -> None:
        self.f.write(struct.pack("<i", v))

    def f64(self, v: float) -> None:
        self.f.write(struct.pack("<d", v))

    def text(self, s: str) -> None:
        b = s.encode("utf-8")
        self.u32(len(b))
        self.f.write(b)

    def code(self, c: PackedCode) -> None:
        words = c.to_words()
        self.u32(c.length)
        self.u32(len(words))
        for w in words:
            self.u64(w)

    def array(self, a: np.ndarray, dtype: str) -> None:
        self.f.write(np.ascontiguousarray(a, dtype=dtype).tobytes())


class _Reader:
    def __init__(self, f) -> None:
        self.f = f

    def raw(self, n: int) -> bytes:
        b = self.f.read(n)
        if len(b) != n:
            raise FormatError(f"truncated file: wanted {n} bytes, got {len(b)}")
        return b

    def u8(self) -> int:
        return struct.unpack("<B", self.raw(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.raw(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.raw(8))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self.raw(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.raw(8))[0]

    def text(self) -> str:
        return self.raw(self.u32()).decode("utf-8")

    def code(self) -> PackedCode:
        length = self.u32()
        n = self.u32()
        return PackedCode.from_words(length, [self.u64() for _ in range(n)])

    def array(self, shape: tuple[int, ...], dtype: str) -> np.ndarray:
        n = int(np.prod(shape)) if shape else 1
        b = self.raw(n * np.dtype(dtype).itemsize)
        return np.frombuffer(b, dtype=dtype).reshape(shape).copy()


def _check_header(r: _Reader, magic: bytes, kind: str) -> None:
    got = r.raw(len(magic))
    if got != magic:
        raise FormatError(f"not a {kind} file: bad magic {got!r}")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported {kind} version {version}")


@dataclass
class ModelBundle:
    """Everything needed to continue training or serve queries."""

    k: int
    rho: int
    eta: float
    seed: int
    codebook: Codebook
    matrix: EcocMatrix
    model: HashModel
    normalizer: FeatureNormalizer | None = None


def save_model(bundle: ModelBundle, path) -> None:
    m = bundle.model
    mat = bundle.matrix
    with open(path, "wb") as f:
        w = _Writer(f)
        w.raw(MODEL_MAGIC)
        w.u32(FORMAT_VERSION)
        w.u32(bundle.k)
        w.u32(bundle.rho)
        w.u32(m.d)
        w.f64(bundle.eta)
        w.u64(bundle.seed)
        w.u64(m.iteration)
        w.u32(mat.m)
        w.u32(mat.n_in_cycle)
        cb = bundle.codebook
        w.u64(cb.rng_seed)
        w.u64(cb.draws_made)
        w.u32(len(cb.pool))
        for c in cb.pool:
            w.code(c)
        w.u32(len(mat.cores))
        for y, core in mat.cores.items():
            w.text(y)
            w.u32(mat.cycle_of_label[y])
            w.code(core)
        w.u32(m.width)
        w.array(m.weights, "<f8")
        if bundle.normalizer is None or bundle.normalizer.mean is None:
            w.u8(0)
        else:
            w.u8(1)
            w.text(bundle.normalizer.convention)
            w.u64(bundle.normalizer.count)
            w.array(bundle.normalizer.mean, "<f8")


def load_model(path) -> ModelBundle:
    with open(path, "rb") as f:
        r = _Reader(f)
        _check_header(r, MODEL_MAGIC, "model")
        k = r.u32()
        rho = r.u32()
        d = r.u32()
        eta = r.f64()
        seed = r.u64()
        iteration = r.u64()
        m_cycles = r.u32()
        n_in_cycle = r.u32()
        cb_seed = r.u64()
        draws_made = r.u64()
        pool = [r.code() for _ in range(r.u32())]
        cores: dict[str, PackedCode] = {}
        cycle_of: dict[str, int] = {}
        for _ in range(r.u32()):
            y = r.text()
            cycle_of[y] = r.u32()
            cores[y] = r.code()
        width = r.u32()
        weights = r.array((width, d + 1), "<f8")
        normalizer = None
        if r.u8():
            convention = r.text()
            count = r.u64()
            mean = r.array((d,), "<f8")
            normalizer = FeatureNormalizer(mean=mean, count=count,
                                           convention=convention)
    matrix = EcocMatrix(k=k, rho=rho, m=m_cycles, n_in_cycle=n_in_cycle,
                        cores=cores, cycle_of_label=cycle_of)
    model = HashModel(d=d, k=k, weights=weights, iteration=iteration, seed=seed)
    if model.width != matrix.width:
        raise FormatError(
            f"inconsistent file: {model.width} weight rows for width {matrix.width}")
    codebook = Codebook(k=k, pool=pool, rng_seed=cb_seed, draws_made=draws_made)
    return ModelBundle(k=k, rho=rho, eta=eta, seed=seed, codebook=codebook,
                       matrix=matrix, model=model, normalizer=normalizer)


def save_index(index: HashIndex, path) -> None:
    with open(path, "wb") as f:
        w = _Writer(f)
        w.raw(INDEX_MAGIC)
        w.u32(FORMAT_VERSION)
        w.u32(len(index.entries))
        for e in index.entries:
            w.u64(e.id)
            w.u8(_MODE_TO_TAG[e.mode])
            if e.label is None:
                w.u8(0)
            else:
                w.u8(1)
                w.text(e.label)
            w.code(e.code.values)
            w.code(e.code.mask)
            if e.features is None:
                w.u8(0)
            else:
                w.u8(1)
                w.u32(len(e.features))
                w.array(e.features, "<f8")
        led = index.ledger
        w.u64(led.bit_updates_total)
        w.u64(led.flipped_bits_total)
        w.u64(led.entries_touched_total)
        w.u64(len(led.per_iteration))
        for iteration, bits in led.per_iteration:
            w.u64(iteration)
            w.u64(bits)


def load_index(path) -> HashIndex:
    index = HashIndex()
    with open(path, "rb") as f:
        r = _Reader(f)
        _check_header(r, INDEX_MAGIC, "index")
        n = r.u32()
        for _ in range(n):
            id = r.u64()
            tag = r.u8()
            if tag not in _TAG_TO_MODE:
                raise FormatError(f"unknown entry mode tag {tag}")
            mode = _TAG_TO_MODE[tag]
            label = r.text() if r.u8() else None
            values = r.code()
            mask = r.code()
            if values.length != mask.length:
                raise FormatError("entry value/mask lengths disagree")
            features = None
            if r.u8():
                features = r.array((r.u32(),), "<f8")
            if mode == MODE_PHI and features is None:
                raise FormatError(f"phi entry {id} is missing its features")
            code = TernaryCodeword(values.length, values, mask)
            index._register(IndexEntry(id=id, mode=mode, code=code,
                                       label=label, features=features))
        led = index.ledger
        led.bit_updates_total = r.u64()
        led.flipped_bits_total = r.u64()
        led.entries_touched_total = r.u64()
        count = r.u64()
        led.per_iteration = [(r.u64(), r.u64()) for _ in range(count)]
    widths = {e.code.length for e in index.entries if e.mode == MODE_PHI}
    if len(widths) > 1:
        raise FormatError(f"phi entries disagree on width: {sorted(widths)}")
    if widths:
        index._phi_width = widths.pop()
    return index


def _infer_format(path) -> str:
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


def write_features(path, ids, labels, X, fmt: str | None = None) -> None:
    """Write an (ids, labels, features) table; label None means unlabeled.

    The binary encoding needs integer labels (it stores an i32, with -1
    reserved for unlabeled); CSV takes any label without a comma-safe
    escape worry since the writer quotes as needed.
    """
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {X.shape}")
    if not len(ids) == len(labels) == X.shape[0]:
        raise ValueError("ids, labels and features disagree on row count")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique within a feature file")
    fmt = fmt or _infer_format(path)
    if fmt == "csv":
        _write_features_csv(path, ids, labels, X)
    elif fmt == "binary":
        _write_features_binary(path, ids, labels, X)
    else:
        raise ValueError(f"unknown feature format {fmt!r}")


def _encode_label(label: str | None) -> int:
    if label is None:
        return -1
    try:
        v = int(label)
    except ValueError:
        raise FormatError(
            f"binary feature files need integer labels, got {label!r}") from None
    if v == -1:
        raise FormatError("label -1 is reserved for unlabeled rows")
    if not -(1 << 31) <= v < (1 << 31):
        raise FormatError(f"label {v} does not fit in 32 bits")
    return v


def _write_features_binary(path, ids, labels, X: np.ndarray) -> None:
    d = X.shape[1]
    with open(path, "wb") as f:
        w = _Writer(f)
        w.u32(FEATURE_MAGIC)
        w.u32(d)
        for i in range(X.shape[0]):
            w.u64(int(ids[i]))
            w.i32(_encode_label(labels[i]))
            w.array(X[i], "<f4")


def _write_features_csv(path, ids, labels, X: np.ndarray) -> None:
    d = X.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as f:
        out = csv.writer(f)
        out.writerow(["id", "label"] + [f"f{j}" for j in range(d)])
        for i in range(X.shape[0]):
            label = "" if labels[i] is None else str(labels[i])
            row = [str(int(ids[i])), label]
            row.extend(repr(float(v)) for v in X[i])
            out.writerow(row)


def read_features(path):
    """Read either feature encoding, sniffing the binary magic.

    Returns (ids, labels, X) with X as float32; labels are strings or None.
    """
    with open(path, "rb") as f:
        head = f.read(4)
    if len(head) == 4 and struct.unpack("<I", head)[0] == FEATURE_MAGIC:
        return _read_features_binary(path)
    return _read_features_csv(path)


def _read_features_binary(path):
    with open(path, "rb") as f:
        r = _Reader(f)
        if r.u32() != FEATURE_MAGIC:
            raise FormatError("not a feature file: bad magic")
        d = r.u32()
        if d < 1:
            raise FormatError(f"feature dimension must be >= 1, got {d}")
        ids: list[int] = []
        labels: list[str | None] = []
        rows: list[np.ndarray] = []
        record = struct.Struct(f"<Qi{d}f")
        while True:
            chunk = f.read(record.size)
            if not chunk:
                break
            if len(chunk) != record.size:
                raise FormatError("truncated feature record")
            fields = record.unpack(chunk)
            ids.append(fields[0])
            labels.append(None if fields[1] == -1 else str(fields[1]))
            rows.append(np.asarray(fields[2:], dtype=np.float32))
    X = np.stack(rows) if rows else np.empty((0, d), dtype=np.float32)
    _check_unique_ids(ids, path)
    return ids, labels, X


def _check_unique_ids(ids, path) -> None:
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate ids in feature file")


def _read_features_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty feature file") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise FormatError(
                "feature CSV must start with columns id,label,f0,...")
        d = len(header) - 2
        ids: list[int] = []
        labels: list[str | None] = []
        rows: list[np.ndarray] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise FormatError(
                    f"line {line_no}: expected {d + 2} columns, got {len(row)}")
            try:
                ids.append(int(row[0]))
            except ValueError:
                raise FormatError(f"line {line_no}: bad id {row[0]!r}") from None
            labels.append(row[1] if row[1] != "" else None)
            try:
                rows.append(np.asarray(row[2:], dtype=np.float32))
            except ValueError:
                raise FormatError(f"line {line_no}: bad feature value") from None
    X = np.stack(rows) if rows else np.empty((0, d), dtype=np.float32)
    _check_unique_ids(ids, path)
    return ids, labels, X

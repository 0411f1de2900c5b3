"""The hash table: two population modes, update propagation, ranked retrieval.

Entries indexed under their label's codeword are frozen for the index's
lifetime; entries indexed under the mapping output retain their feature
vector so that only the bits of a touched cycle need recomputing when the
hash functions move. Every recomputed-and-stored bit is counted in the
ledger whether or not its value flipped, since the maintenance cost of an
index is the recomputation itself; flips are tallied separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitcode import (PackedCode, TernaryCodeword, bulk_hamming_masked,
                      codes_to_words, hamming_masked)
from .ecoc import EcocMatrix, Label
from .errors import ConsistencyError, DimensionError, DuplicateIdError
from .learner import HashModel, StepReport, augment, phi

MODE_CODEWORD = "codeword"
MODE_PHI = "phi"


@dataclass
class UpdateLedger:
    """Cumulative index-maintenance cost, keyed by training iteration."""

    bit_updates_total: int = 0
    flipped_bits_total: int = 0
    entries_touched_total: int = 0
    per_iteration: list[tuple[int, int]] = field(default_factory=list)

    def record(self, iteration: int, bits: int, flips: int, entries: int) -> None:
        self.bit_updates_total += bits
        self.flipped_bits_total += flips
        self.entries_touched_total += entries
        self.per_iteration.append((iteration, bits))


@dataclass
class IndexEntry:
    id: int
    mode: str
    code: TernaryCodeword
    label: Label | None = None
    features: np.ndarray | None = None


class HashIndex:
    """In-memory index over packed codes with exact bit-update accounting."""

    def __init__(self) -> None:
        self.entries: list[IndexEntry] = []
        self.ledger = UpdateLedger()
        self._by_id: dict[int, IndexEntry] = {}
        self._phi_entries: list[IndexEntry] = []
        self._phi_width: int | None = None
        self._phi_mat: np.ndarray | None = None
        self._max_len = 0
        self._rev = 0
        self._dist_cache: tuple[int, int, np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def phi_count(self) -> int:
        return len(self._phi_entries)

    def _register(self, entry: IndexEntry) -> None:
        if entry.id in self._by_id:
            raise DuplicateIdError(f"id {entry.id} is already indexed")
        self.entries.append(entry)
        self._by_id[entry.id] = entry
        if entry.mode == MODE_PHI:
            self._phi_entries.append(entry)
        self._max_len = max(self._max_len, entry.code.length)
        self._rev += 1

    def insert_labeled(self, id: int, y: Label, matrix: EcocMatrix) -> None:
        """Index an instance under its label's codeword.

        The stored code never changes afterwards, no matter how the hash
        functions move.
        """
        code = matrix.find(y)
        self._register(IndexEntry(id=int(id), mode=MODE_CODEWORD, code=code, label=y))

    def insert_unlabeled(self, id: int, x: np.ndarray, model: HashModel,
                         label: Label | None = None) -> None:
        """Index an instance under the mapping output, all positions active.

        The feature vector is retained (exactly as given, so pass it already
        normalized) to allow partial recomputation later. ``label`` is an
        optional ground-truth tag kept for evaluation only; it plays no part
        in the stored code.
        """
        if model.width < 1:
            raise ValueError("model has no hash functions")
        if self._phi_width is not None and self._phi_width != model.width:
            raise ConsistencyError(
                f"existing entries have width {self._phi_width}, model has {model.width}")
        code = phi(model, x)
        cw = TernaryCodeword(code.length, code,
                             PackedCode(code.length, (1 << code.length) - 1))
        entry = IndexEntry(id=int(id), mode=MODE_PHI, code=cw, label=label,
                           features=np.asarray(x, dtype=np.float64).copy())
        self._register(entry)
        self._phi_width = model.width

    def _phi_feature_matrix(self) -> np.ndarray:
        # Features are immutable once inserted, so only membership growth
        # invalidates the cache.
        if self._phi_mat is None or self._phi_mat.shape[0] != len(self._phi_entries):
            self._phi_mat = np.stack([augment(e.features) for e in self._phi_entries])
        return self._phi_mat

    def _splice_columns(self, model: HashModel, lo: int, hi: int,
                        new_width: int) -> tuple[int, int]:
        """Recompute columns [lo, hi) of every phi entry; returns (bits, flips).

        ``new_width`` extends entries whose stored code is narrower; flips
        are counted only over positions that existed before.
        """
        n = len(self._phi_entries)
        scores = self._phi_feature_matrix() @ model.weights[lo:hi].T
        rows = scores >= 0.0
        span = hi - lo
        field_mask = ((1 << span) - 1) << lo
        flips = 0
        for i, e in enumerate(self._phi_entries):
            packed = np.packbits(rows[i], bitorder="little").tobytes()
            new_field = int.from_bytes(packed, "little") << lo
            old_bits = e.code.values.bits
            old_len = e.code.length
            new_bits = (old_bits & ~field_mask) | new_field
            changed = (old_bits ^ new_bits) & ((1 << old_len) - 1)
            flips += changed.bit_count()
            e.code = TernaryCodeword(new_width, PackedCode(new_width, new_bits),
                                     PackedCode(new_width, (1 << new_width) - 1))
        self._max_len = max(self._max_len, new_width)
        self._rev += 1
        return n * span, flips

    def apply_model_update(self, report: StepReport, model: HashModel) -> int:
        """Eagerly propagate one training step into every phi-mode entry.

        Recomputes exactly the touched columns (which, for a step that opened
        a new cycle, are the freshly appended ones, so entries grow here) and
        returns the number of recomputed bit entries: phi_count * k.
        """
        lo, hi = report.touched_columns.start, report.touched_columns.stop
        if hi > model.width:
            raise ConsistencyError(
                f"report touches columns up to {hi} but model width is {model.width}")
        if not self._phi_entries:
            self.ledger.record(model.iteration, 0, 0, 0)
            return 0
        expected = model.width - (hi - lo) if report.new_cycle_started else model.width
        if self._phi_width != expected:
            raise ConsistencyError(
                f"stale report: entries have width {self._phi_width}, expected {expected}")
        bits, flips = self._splice_columns(model, lo, hi, model.width)
        self._phi_width = model.width
        self.ledger.record(model.iteration, bits, flips, len(self._phi_entries))
        return bits

    def refresh(self, model: HashModel, cycles=()) -> int:
        """Batched propagation: recompute the given cycles' columns once.

        ``cycles`` holds the 1-based indices of the cycles whose functions
        changed since the last refresh; when nothing changed, the call
        recomputes nothing and returns 0. Columns appended to the model
        since the last refresh are always caught up, so afterwards every
        entry sits at the model's width.
        """
        if not self._phi_entries:
            self.ledger.record(model.iteration, 0, 0, 0)
            return 0
        old_width = self._phi_width or 0
        if old_width > model.width:
            raise ConsistencyError(
                f"entries have width {self._phi_width}, model has {model.width}")
        k = model.k
        total_cycles = model.width // k
        todo = sorted(set(cycles))
        if todo and not 1 <= todo[0] <= todo[-1] <= total_cycles:
            raise ValueError(f"cycle list {todo} out of range [1, {total_cycles}]")
        seen = set(todo)
        todo.extend(j for j in range(old_width // k + 1, total_cycles + 1)
                    if j not in seen)
        todo.sort()
        bits = 0
        flips = 0
        for j in todo:
            b, f = self._splice_columns(model, (j - 1) * k, j * k, model.width)
            bits += b
            flips += f
        if todo:
            self._phi_width = model.width
        self.ledger.record(model.iteration, bits, flips,
                           len(self._phi_entries) if todo else 0)
        return bits

    def _code_matrices(self, width: int) -> tuple[np.ndarray, np.ndarray]:
        if self._dist_cache is not None:
            rev, w, values, masks = self._dist_cache
            if rev == self._rev and w == width:
                return values, masks
        values = codes_to_words([e.code.values.bits for e in self.entries], width)
        masks = codes_to_words([e.code.mask.bits for e in self.entries], width)
        self._dist_cache = (self._rev, width, values, masks)
        return values, masks

    def _check_widths(self, width: int) -> None:
        # Entries narrower than the query are fine: their missing columns
        # read as inactive, exactly as if their codeword had been padded.
        # A wider entry means the caller queried with an outdated model.
        if self._max_len > width:
            raise ConsistencyError(
                f"an entry is wider ({self._max_len}) than the query ({width})")

    def all_distances(self, model: HashModel, x_q: np.ndarray) -> np.ndarray:
        """Masked Hamming distance from phi(model, x_q) to every entry.

        Returned in entry insertion order, as an integer array. Entries
        narrower than the current width count their missing columns as
        inactive.
        """
        q = phi(model, x_q)
        self._check_widths(q.length)
        values, masks = self._code_matrices(q.length)
        return bulk_hamming_masked(q, values, masks)

    def query(self, model: HashModel, x_q: np.ndarray,
              top_n: int | None = None) -> list[tuple[int, int]]:
        """Rank all entries by masked Hamming distance to phi(model, x_q).

        Ties break by insertion order. Returns (id, distance) pairs,
        truncated to top_n when given.
        """
        if not self.entries:
            return []
        dists = self.all_distances(model, x_q)
        order = np.lexsort((np.arange(len(dists)), dists))
        if top_n is not None:
            order = order[:top_n]
        return [(self.entries[i].id, int(dists[i])) for i in order]

    def query_by_codeword(self, matrix: EcocMatrix, model: HashModel,
                          x_q: np.ndarray) -> list[tuple[Label, int, tuple[int, ...]]]:
        """Rank the observed labels by codeword distance, then expand members.

        Distance computations scale with the number of labels rather than the
        number of entries. Label ties break by observation order; each
        label's codeword-mode member ids follow insertion order.
        """
        q = phi(model, x_q)
        if matrix.width != q.length:
            raise ConsistencyError(
                f"matrix width {matrix.width} does not match query width {q.length}")
        members: dict[Label, list[int]] = {y: [] for y in matrix.labels}
        for e in self.entries:
            if e.mode == MODE_CODEWORD and e.label in members:
                members[e.label].append(e.id)
        ranked = sorted(
            ((hamming_masked(q, matrix.find(y)), pos, y)
             for pos, y in enumerate(matrix.labels)),
            key=lambda t: (t[0], t[1]))
        return [(y, d, tuple(members[y])) for d, _, y in ranked]

"""Interaction data: parsing, interning, rating scaling, provider maps and
synthetic long-tail generation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from fairtail.errors import (
    ConfigError,
    ConflictingMapping,
    EmptyDataset,
    MalformedLine,
    NonPositiveCount,
    UnmappedItem,
)

DEFAULT_COLUMNS = ("user", "item", "count")


@dataclass(frozen=True)
class InteractionRecord:
    user: str
    item: str
    count: int

    def __post_init__(self):
        if not self.user or not self.item:
            raise ValueError("user and item identifiers must be non-empty")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


class ScalingScheme(str, Enum):
    RAW = "raw"
    LOG = "log"
    MINMAX = "minmax"

    @classmethod
    def parse(cls, value: "str | ScalingScheme") -> "ScalingScheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        if key in ("per-user-minmax", "minmax", "min-max"):
            return cls.MINMAX
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown scaling scheme {value!r} (expected raw, log or minmax)") from None


MINMAX_LOW = 1.0
MINMAX_HIGH = 1000.0


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class InteractionMatrix:
    """Immutable sparse user x item matrix of positive values.

    Rows are stored in CSR form with strictly increasing column indices and
    no explicit zeros. ``users`` and ``items`` hold the interned string
    identifiers in first-appearance order.
    """

    __slots__ = ("_csr", "users", "items")

    def __init__(self, csr: sp.csr_matrix, users: Sequence[str], items: Sequence[str]):
        csr = sp.csr_matrix(csr, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        if csr.shape != (len(users), len(items)):
            raise ValueError(f"shape {csr.shape} does not match {len(users)} users x {len(items)} items")
        if csr.nnz and not (np.all(np.isfinite(csr.data)) and csr.data.min() > 0):
            raise ValueError("stored values must be finite and > 0")
        for arr in (csr.data, csr.indices, csr.indptr):
            _readonly(arr)
        self._csr = csr
        self.users = tuple(users)
        self.items = tuple(items)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def csr(self) -> sp.csr_matrix:
        """The underlying CSR matrix; its buffers are read-only."""
        return self._csr

    def row(self, user: int) -> tuple[np.ndarray, np.ndarray]:
        """(item indices, values) stored for ``user``."""
        lo, hi = self._csr.indptr[user], self._csr.indptr[user + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        return [list(zip(idx.tolist(), val.tolist())) for idx, val in (self.row(u) for u in range(self.n_users))]

    def with_values(self, data: np.ndarray) -> "InteractionMatrix":
        """Same support and identifiers, new stored values."""
        csr = sp.csr_matrix((np.asarray(data, dtype=np.float64), self._csr.indices.copy(), self._csr.indptr.copy()),
                            shape=self.shape)
        return InteractionMatrix(csr, self.users, self.items)

    def total(self) -> float:
        return float(self._csr.data.sum())

    def __eq__(self, other):
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (
            self.users == other.users
            and self.items == other.items
            and np.array_equal(self._csr.indptr, other._csr.indptr)
            and np.array_equal(self._csr.indices, other._csr.indices)
            and np.array_equal(self._csr.data, other._csr.data)
        )

    __hash__ = None

    def __repr__(self):
        return f"InteractionMatrix(users={self.n_users}, items={self.n_items}, nnz={self.nnz})"


def _lines(source: "str | Iterable[str]") -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return (line.rstrip("\r\n") for line in source)


def parse_interactions(
    source: "str | Iterable[str]",
    delimiter: str = "\t",
    columns: Sequence[str] = DEFAULT_COLUMNS,
) -> list[InteractionRecord]:
    """Parse ``user item count`` lines into records.

    ``columns`` gives the order of the three fields in each line. Blank lines
    and lines starting with ``#`` are skipped. Repeated (user, item) pairs
    have their counts summed; records come out in first-appearance order.
    """
    if sorted(columns) != sorted(DEFAULT_COLUMNS):
        raise ConfigError(f"columns must be a permutation of {DEFAULT_COLUMNS}, got {tuple(columns)}")
    pos = {name: columns.index(name) for name in DEFAULT_COLUMNS}

    totals: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(delimiter)]
        if len(fields) != 3:
            raise MalformedLine(lineno, f"expected 3 fields, found {len(fields)}")
        user, item, raw = fields[pos["user"]], fields[pos["item"]], fields[pos["count"]]
        if not user or not item:
            raise MalformedLine(lineno, "empty user or item identifier")
        try:
            count = int(raw)
        except ValueError:
            raise MalformedLine(lineno, f"count {raw!r} is not an integer") from None
        if count <= 0:
            raise NonPositiveCount(lineno, f"count must be positive, got {count}")
        key = (user, item)
        totals[key] = totals.get(key, 0) + count
    return [InteractionRecord(u, i, c) for (u, i), c in totals.items()]


def read_interactions(path: "str | Path", **kwargs) -> list[InteractionRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_interactions(fh.read(), **kwargs)


def format_interactions(records: Iterable[InteractionRecord]) -> str:
    return "".join(f"{r.user}\t{r.item}\t{r.count}\n" for r in records)


def build_matrix(records: Sequence[InteractionRecord]) -> InteractionMatrix:
    if not records:
        raise EmptyDataset("no interaction records")
    user_ix: dict[str, int] = {}
    item_ix: dict[str, int] = {}
    rows, cols, vals = [], [], []
    for r in records:
        rows.append(user_ix.setdefault(r.user, len(user_ix)))
        cols.append(item_ix.setdefault(r.item, len(item_ix)))
        vals.append(float(r.count))
    # coo -> csr sums any repeated pairs
    csr = sp.coo_matrix((vals, (rows, cols)), shape=(len(user_ix), len(item_ix))).tocsr()
    return InteractionMatrix(csr, list(user_ix), list(item_ix))


def scale_ratings(matrix: InteractionMatrix, scheme: "str | ScalingScheme" = ScalingScheme.RAW) -> InteractionMatrix:
    scheme = ScalingScheme.parse(scheme)
    if scheme is ScalingScheme.RAW:
        return matrix
    data = matrix.csr.data
    if scheme is ScalingScheme.LOG:
        return matrix.with_values(np.log1p(data))

    indptr = matrix.csr.indptr
    out = np.empty_like(data)
    for u in range(matrix.n_users):
        seg = data[indptr[u]:indptr[u + 1]]
        if seg.size == 0:
            continue
        lo, hi = seg.min(), seg.max()
        if hi == lo:
            out[indptr[u]:indptr[u + 1]] = MINMAX_HIGH
        else:
            scaled = MINMAX_LOW + (MINMAX_HIGH - MINMAX_LOW) * (seg - lo) / (hi - lo)
            out[indptr[u]:indptr[u + 1]] = np.clip(scaled, MINMAX_LOW, MINMAX_HIGH)
    return matrix.with_values(out)


@dataclass(frozen=True)
class ItemProviderMap:
    """Total map from item index to provider index."""

    item_provider: np.ndarray
    providers: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.item_provider, dtype=np.int64).copy()
        if arr.size and (arr.min() < 0 or arr.max() >= len(self.providers)):
            raise ValueError("provider index out of range")
        object.__setattr__(self, "item_provider", _readonly(arr))
        object.__setattr__(self, "providers", tuple(self.providers))

    @property
    def n_providers(self) -> int:
        return len(self.providers)

    @property
    def n_items(self) -> int:
        return int(self.item_provider.size)

    def provider_of(self, item: int) -> int:
        return int(self.item_provider[item])


def identity_provider_map(matrix: InteractionMatrix) -> ItemProviderMap:
    """Each item is its own provider (items are artists)."""
    return ItemProviderMap(np.arange(matrix.n_items), matrix.items)


def load_provider_map(
    source: "str | Iterable[str] | None",
    matrix: InteractionMatrix,
    identity: bool = False,
    delimiter: str = "\t",
) -> ItemProviderMap:
    """Read ``item provider`` lines and map every matrix item to a provider.

    Lines naming items not present in the matrix are ignored, so their
    providers are not interned. With ``source=None`` and ``identity=True``
    the identity map is returned.
    """
    if source is None:
        if identity:
            return identity_provider_map(matrix)
        raise ConfigError("a provider map is required unless identity providers are requested")

    item_ix = {item: i for i, item in enumerate(matrix.items)}
    seen: dict[str, str] = {}
    provider_ix: dict[str, int] = {}
    assign = np.full(matrix.n_items, -1, dtype=np.int64)
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(delimiter)]
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise MalformedLine(lineno, "expected 2 non-empty fields: item, provider")
        item, provider = fields
        prev = seen.get(item)
        if prev is not None:
            if prev != provider:
                raise ConflictingMapping(lineno, f"item {item!r} mapped to both {prev!r} and {provider!r}")
            continue
        seen[item] = provider
        ix = item_ix.get(item)
        if ix is not None:
            assign[ix] = provider_ix.setdefault(provider, len(provider_ix))

    missing = np.flatnonzero(assign < 0)
    if missing.size:
        raise UnmappedItem(matrix.items[missing[0]])
    return ItemProviderMap(assign, list(provider_ix))


def generate_synthetic(
    num_users: int,
    num_items: int,
    events_per_user: int,
    zipf_exponent: float,
    seed: int,
) -> list[InteractionRecord]:
    """Draw listening events from a truncated Zipf law over item ranks.

    Item ``i{r}`` has rank ``r`` (``i0`` is the most popular) and probability
    proportional to ``(r + 1) ** -zipf_exponent``. Sampling is inverse-CDF
    over the normalized rank table from a single PCG64 stream, so output is
    fixed by ``seed``. Users are ``u0 .. u{num_users-1}``.
    """
    for name, value in (("num_users", num_users), ("num_items", num_items), ("events_per_user", events_per_user)):
        if int(value) != value or value < 1:
            raise ConfigError(f"{name} must be a positive integer, got {value}")
    if not (math.isfinite(zipf_exponent) and zipf_exponent > 0):
        raise ConfigError(f"zipf_exponent must be > 0, got {zipf_exponent}")
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")

    weights = np.arange(1, num_items + 1, dtype=np.float64) ** -float(zipf_exponent)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0

    rng = np.random.default_rng(seed)
    records = []
    for u in range(num_users):
        draws = np.searchsorted(cdf, rng.random(events_per_user), side="right")
        counts = np.bincount(np.minimum(draws, num_items - 1), minlength=num_items)
        for item in np.flatnonzero(counts):
            records.append(InteractionRecord(f"u{u}", f"i{item}", int(counts[item])))
    return records

"""Random weighted/costed complete and complete-bipartite graph instances.

Every edge carries a weight and ``r`` costs, each an independent draw of the
power distribution ``P(Z <= x) = x**alpha`` on (0, 1).  Draws come from a
counter-based generator keyed by ``(seed, edge_id, field)``, so any single
value can be recomputed without replaying the others.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InstanceFormatError

__all__ = [
    "Kind",
    "EdgeData",
    "Instance",
    "Budgets",
    "sample_edge_value",
    "stream_initializers",
    "generate_instance",
    "default_budgets",
    "exponent_budgets",
    "serialize_instance",
    "deserialize_instance",
]


class Kind(str, enum.Enum):
    COMPLETE = "complete"
    COMPLETE_BIPARTITE = "complete_bipartite"


_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_MAX_FIELDS = 256
_MAX_ATTEMPTS = 1 << 16


def _fmix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; a bijection on uint64
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _seed_key(seed: int) -> np.uint64:
    return _fmix64(np.array([seed & _MASK64], dtype=np.uint64))[0]


def stream_initializers(
    seed: int, edge_ids: np.ndarray, field: int, attempt: int = 0
) -> np.ndarray:
    """Per-(edge, field, attempt) generator states derived from ``seed``.

    The counter ``((attempt << 40) | edge_id) << 8 | field`` is injective and
    is multiplied by an odd constant mod 2**64, so distinct counters never
    share an initializer.
    """
    edge_ids = np.asarray(edge_ids, dtype=np.uint64)
    counter = (
        ((np.uint64(attempt) << np.uint64(40)) | edge_ids) << np.uint64(8)
    ) | np.uint64(field)
    with np.errstate(over="ignore"):
        return _seed_key(seed) + counter * _GAMMA


def _uniform_open(states: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        bits = _fmix64(_fmix64(states))
    # 52 bits + half ulp keeps the result strictly inside (0, 1)
    return ((bits >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52


def sample_edge_value(u, alpha: float):
    """Map a uniform draw ``u`` in (0, 1) to ``u ** (1 / alpha)``.

    This is the inverse CDF of ``F(x) = x**alpha``.  Works elementwise on
    arrays.  Boundary values ``u in {0, 1}`` are rejected; the caller is
    expected to resample.
    """
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    arr = np.asarray(u, dtype=np.float64)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise ValueError("uniform draw must lie strictly inside (0, 1)")
    out = arr if alpha == 1 else arr ** (1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def _draw_field(seed: int, n_edges: int, field: int, alpha: float) -> np.ndarray:
    ids = np.arange(n_edges, dtype=np.uint64)
    values = np.empty(n_edges)
    pending = np.arange(n_edges)
    attempt = 0
    while pending.size:
        if attempt >= _MAX_ATTEMPTS:
            raise RuntimeError("resampling did not terminate")
        u = _uniform_open(stream_initializers(seed, ids[pending], field, attempt))
        v = u if alpha == 1 else u ** (1.0 / alpha)
        ok = (v > 0.0) & (v < 1.0)
        values[pending[ok]] = v[ok]
        pending = pending[~ok]
        attempt += 1
    return values


@dataclass(frozen=True)
class EdgeData:
    edge_id: int
    endpoints: tuple[int, int]
    weight: float
    costs: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable edge table.

    Complete instances list edges ``(u, v)``, ``u < v``, in lexicographic
    order.  Bipartite instances use ``edge_id = i * n + j`` for left vertex
    ``i`` and right vertex ``j``, so :meth:`weight_matrix` is a reshape.
    """

    kind: Kind
    n: int
    r: int
    alpha: float
    seed: int
    tail: np.ndarray
    head: np.ndarray
    weight: np.ndarray
    costs: np.ndarray  # shape (m, r)

    def __post_init__(self):
        for name in ("tail", "head", "weight", "costs"):
            getattr(self, name).setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.weight)

    @property
    def bipartite(self) -> bool:
        return self.kind is Kind.COMPLETE_BIPARTITE

    def edge(self, edge_id: int) -> EdgeData:
        return EdgeData(
            edge_id=int(edge_id),
            endpoints=(int(self.tail[edge_id]), int(self.head[edge_id])),
            weight=float(self.weight[edge_id]),
            costs=tuple(float(c) for c in self.costs[edge_id]),
        )

    def edges(self) -> Iterator[EdgeData]:
        for e in range(self.m):
            yield self.edge(e)

    def edge_index(self, u: int, v: int) -> int:
        if self.bipartite:
            return u * self.n + v
        if u > v:
            u, v = v, u
        if u == v:
            raise ValueError("no self-loops in K_n")
        return u * (2 * self.n - u - 1) // 2 + (v - u - 1)

    def weight_matrix(self) -> np.ndarray:
        if not self.bipartite:
            raise ValueError("weight_matrix is defined for bipartite instances")
        return self.weight.reshape(self.n, self.n)

    def cost_matrix(self, i: int = 0) -> np.ndarray:
        if not self.bipartite:
            raise ValueError("cost_matrix is defined for bipartite instances")
        return self.costs[:, i].reshape(self.n, self.n)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.n == other.n
            and self.r == other.r
            and self.alpha == other.alpha
            and self.seed == other.seed
            and np.array_equal(self.tail, other.tail)
            and np.array_equal(self.head, other.head)
            and np.array_equal(self.weight, other.weight)
            and np.array_equal(self.costs, other.costs)
        )

    __hash__ = None

    @classmethod
    def from_arrays(
        cls,
        kind,
        n: int,
        weight: Sequence[float],
        costs,
        alpha: float = 1.0,
        seed: int = 0,
    ) -> "Instance":
        """Build an instance from explicit values in canonical edge order.

        For bipartite instances ``weight`` may be an ``n x n`` matrix and
        ``costs`` an ``n x n`` matrix (one budget) or ``r x n x n`` stack.
        """
        kind = Kind(kind)
        tail, head = _endpoints(kind, n)
        w = np.array(weight, dtype=np.float64).reshape(-1)
        c = np.array(costs, dtype=np.float64)
        if kind is Kind.COMPLETE_BIPARTITE and c.ndim >= 2 and c.shape[-2:] == (n, n):
            c = c.reshape(-1, n * n).T if c.ndim == 3 else c.reshape(-1, 1)
        elif c.ndim == 1:
            c = c.reshape(-1, 1)
        if len(w) != len(tail) or c.shape[0] != len(tail):
            raise ValueError(
                f"expected {len(tail)} edges, got {len(w)} weights and {c.shape[0]} cost rows"
            )
        return cls(kind, n, c.shape[1], float(alpha), int(seed), tail, head, w, c)


def _endpoints(kind: Kind, n: int) -> tuple[np.ndarray, np.ndarray]:
    if kind is Kind.COMPLETE:
        return np.triu_indices(n, k=1)
    ii, jj = np.divmod(np.arange(n * n), n)
    return ii, jj


def generate_instance(kind, n: int, r: int, alpha: float, seed: int) -> Instance:
    """Draw a fresh instance; identical arguments give identical edges."""
    kind = Kind(kind)
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 0 <= r < _MAX_FIELDS - 1:
        raise ValueError(f"r must be in [0, {_MAX_FIELDS - 2}], got {r}")
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    tail, head = _endpoints(kind, n)
    m = len(tail)
    weight = _draw_field(seed, m, 0, alpha)
    costs = np.empty((m, r))
    for i in range(r):
        costs[:, i] = _draw_field(seed, m, i + 1, alpha)
    return Instance(kind, n, r, float(alpha), int(seed), tail, head, weight, costs)


@dataclass(frozen=True)
class Budgets:
    values: tuple[float, ...]
    omega: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(not v > 0 for v in self.values):
            raise ValueError(f"budgets must be positive, got {self.values}")

    @property
    def r(self) -> int:
        return len(self.values)

    @property
    def c_min(self) -> float:
        return min(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def default_budgets(instance: Instance, omega: float, exponent: float = 0.75) -> Budgets:
    """Budgets in the regime where the algorithms are asymptotically optimal.

    Trees: ``C_i = min(n, omega * n**(1 - r/(alpha (r+1))) * ln n)``.
    Bipartite matchings: ``C_1 = omega * n**exponent``.
    """
    if not omega > 1:
        raise ValueError(f"omega must exceed 1, got {omega}")
    n, r, a = instance.n, instance.r, instance.alpha
    if instance.bipartite:
        if r != 1:
            raise ValueError("matching budgets need exactly one cost")
        return Budgets((omega * n**exponent,), omega)
    if r < 1:
        raise ValueError("tree budgets need r >= 1")
    c = min(float(n), omega * n ** (1 - r / (a * (r + 1))) * math.log(n))
    return Budgets((c,) * r, omega)


def exponent_budgets(n: int, r: int, exponent: float, scale: float = 1.0) -> Budgets:
    """Plain power-law budgets ``C_i = scale * n**exponent``."""
    return Budgets((scale * n**exponent,) * r)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_instance(instance: Instance) -> bytes:
    lines = [
        f"{instance.kind.value} {instance.n} {instance.r} {_fmt(instance.alpha)} {instance.seed}"
    ]
    for e in range(instance.m):
        fields = [str(e), str(instance.tail[e]), str(instance.head[e]), _fmt(instance.weight[e])]
        fields.extend(_fmt(c) for c in instance.costs[e])
        lines.append(" ".join(fields))
    return ("\n".join(lines) + "\n").encode("ascii")


def deserialize_instance(data: bytes) -> Instance:
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InstanceFormatError("empty instance file")
    header = lines[0].split()
    if len(header) != 5:
        raise InstanceFormatError(f"line 1: header needs 5 fields, got {len(header)}")
    try:
        kind = Kind(header[0])
        n, r = int(header[1]), int(header[2])
        alpha, seed = float(header[3]), int(header[4])
    except ValueError as exc:
        raise InstanceFormatError(f"line 1: bad header: {exc}") from None
    tail, head = _endpoints(kind, n)
    m = len(tail)
    if len(lines) - 1 != m:
        raise InstanceFormatError(f"expected {m} edge records, found {len(lines) - 1}")
    weight = np.empty(m)
    costs = np.empty((m, r))
    for e, line in enumerate(lines[1:]):
        parts = line.split()
        lineno = e + 2
        if len(parts) != 4 + r:
            raise InstanceFormatError(
                f"line {lineno}: expected {4 + r} fields for r={r}, got {len(parts)}"
            )
        try:
            eid, u, v = int(parts[0]), int(parts[1]), int(parts[2])
            vals = [float(p) for p in parts[3:]]
        except ValueError as exc:
            raise InstanceFormatError(f"line {lineno}: {exc}") from None
        if eid != e or u != tail[e] or v != head[e]:
            raise InstanceFormatError(
                f"line {lineno}: edge record {eid} ({u},{v}) out of canonical order"
            )
        weight[e] = vals[0]
        costs[e] = vals[1:]
    return Instance(kind, n, r, alpha, seed, tail, head, weight, costs)

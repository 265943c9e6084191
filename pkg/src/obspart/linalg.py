"""Dense complex state vectors and linear maps.

When an ``exact`` grid is present it is authoritative: float entries are
recomputed from it (correctly rounded), so the same exact operator always
has bit-identical floats however it was assembled.

Tensor products use the row-major, left-factor-slow convention:
``out[i * b.dim + j] = a[i] * b[j]``. Objects are immutable; every
operation returns a new value.

Vectors and maps may carry an ``exact`` grid of :class:`~obspart.exact.Surd`
alongside the float entries. Operations propagate it when every operand has
one, so operators assembled from exact kets stay printable exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exact import ONE, ZERO, Surd

MAX_DIM = 2**20
STRUCT_TOL = 1e-9
ARITH_TOL = 1e-12


class ShapeError(ValueError):
    pass


class CapacityError(ValueError):
    pass


def _frozen(arr, dtype=complex):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4096)
def _surd_value(x: Surd) -> complex:
    return complex(x)


def _exact_values(grid) -> np.ndarray:
    return np.array([_surd_value(x) for x in grid.ravel()], dtype=complex).reshape(grid.shape)


def _exact_grid(exact, shape):
    if exact is None:
        return None
    grid = np.empty(shape, dtype=object)
    flat = list(np.asarray(exact, dtype=object).ravel())
    if len(flat) != grid.size:
        raise ShapeError(f"exact grid has {len(flat)} entries, expected {grid.size}")
    grid.ravel()[:] = flat
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True, eq=False)
class StateVector:
    amps: np.ndarray
    labels: tuple[str, ...] | None = None
    exact: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        amps = _frozen(self.amps).ravel()
        if amps.size == 0:
            raise ShapeError("state vector must have positive dimension")
        exact = _exact_grid(self.exact, amps.shape)
        if exact is not None:
            amps = _frozen(_exact_values(exact))
        if not np.all(np.isfinite(amps)):
            raise ValueError("state vector has non-finite amplitudes")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != amps.size:
                raise ShapeError(f"{len(labels)} labels for dimension {amps.size}")
            object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "exact", exact)

    @classmethod
    def from_exact(cls, values, labels=None) -> StateVector:
        values = list(values)
        return cls(np.zeros(len(values), dtype=complex), labels, values)

    @property
    def dim(self) -> int:
        return self.amps.size

    def is_normalized(self, tol: float = STRUCT_TOL) -> bool:
        return abs(np.sqrt(norm2(self)) - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class LinearMap:
    entries: np.ndarray
    exact: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
            raise ShapeError(f"linear map must be a non-empty 2-d grid, got shape {m.shape}")
        exact = _exact_grid(self.exact, m.shape)
        if exact is not None:
            m = _frozen(_exact_values(exact))
        if not np.all(np.isfinite(m)):
            raise ValueError("linear map has non-finite entries")
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "exact", exact)

    @classmethod
    def from_exact(cls, grid) -> LinearMap:
        g = np.asarray(grid, dtype=object)
        return cls(np.zeros(g.shape, dtype=complex), g)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def _both_exact(*objs):
    return all(o.exact is not None for o in objs)


def basis(dim: int, index: int, labels=None) -> StateVector:
    ex = [ZERO] * dim
    ex[index] = ONE
    return StateVector.from_exact(ex, labels)


def identity(n: int) -> LinearMap:
    grid = np.full((n, n), ZERO, dtype=object)
    for k in range(n):
        grid[k, k] = ONE
    return LinearMap(np.eye(n, dtype=complex), grid)


def zeros(rows: int, cols: int) -> LinearMap:
    return LinearMap(np.zeros((rows, cols), dtype=complex), np.full((rows, cols), ZERO, dtype=object))


def tensor(a: StateVector, b: StateVector, max_dim: int = MAX_DIM) -> StateVector:
    dim = a.dim * b.dim
    if dim > max_dim:
        raise CapacityError(f"tensor product dimension {dim} exceeds maximum {max_dim}")
    amps = np.multiply.outer(a.amps, b.amps).ravel()
    labels = None
    if a.labels is not None and b.labels is not None:
        labels = tuple(f"{x},{y}" for x in a.labels for y in b.labels)
    exact = np.multiply.outer(a.exact, b.exact).ravel() if _both_exact(a, b) else None
    return StateVector(amps, labels, exact)


def kron(a: LinearMap, b: LinearMap, max_dim: int = MAX_DIM) -> LinearMap:
    """Tensor product of two maps, same index convention as :func:`tensor`."""
    if max(a.rows * b.rows, a.cols * b.cols) > max_dim:
        raise CapacityError(f"tensor product dimension exceeds maximum {max_dim}")
    exact = np.kron(a.exact, b.exact) if _both_exact(a, b) else None
    return LinearMap(np.kron(a.entries, b.entries), exact)


def apply(m: LinearMap, v: StateVector, where: str | None = None) -> StateVector:
    if m.cols != v.dim:
        ctx = f" in {where}" if where else ""
        raise ShapeError(f"map with {m.cols} columns applied to vector of dimension {v.dim}{ctx}")
    exact = m.exact.dot(v.exact) if _both_exact(m, v) else None
    return StateVector(m.entries @ v.amps, None, exact)


def adjoint(m: LinearMap) -> LinearMap:
    exact = None
    if m.exact is not None:
        exact = np.vectorize(Surd.conjugate, otypes=[object])(m.exact.T)
    return LinearMap(m.entries.conj().T, exact)


def compose(m2: LinearMap, m1: LinearMap) -> LinearMap:
    """Return the map ``m2 . m1`` (apply m1 first)."""
    if m2.cols != m1.rows:
        raise ShapeError(f"cannot compose {m2.shape} after {m1.shape}")
    exact = m2.exact.dot(m1.exact) if _both_exact(m2, m1) else None
    return LinearMap(m2.entries @ m1.entries, exact)


def add(a: LinearMap, b: LinearMap) -> LinearMap:
    if a.shape != b.shape:
        raise ShapeError(f"cannot add maps of shapes {a.shape} and {b.shape}")
    exact = a.exact + b.exact if _both_exact(a, b) else None
    return LinearMap(a.entries + b.entries, exact)


def scale(c, m: LinearMap) -> LinearMap:
    if isinstance(c, Surd):
        exact = c * m.exact if m.exact is not None else None
        return LinearMap(complex(c) * m.entries, exact)
    return LinearMap(c * m.entries)


def outer(ket: StateVector, bra: StateVector) -> LinearMap:
    """``|ket><bra|``; the bra argument is conjugated."""
    exact = None
    if _both_exact(ket, bra):
        exact = np.multiply.outer(ket.exact, np.vectorize(Surd.conjugate, otypes=[object])(bra.exact))
    return LinearMap(np.multiply.outer(ket.amps, bra.amps.conj()), exact)


def norm2(v: StateVector) -> float:
    """Squared 2-norm."""
    return float(np.vdot(v.amps, v.amps).real)


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.dim != b.dim:
        raise ShapeError(f"inner product of dimensions {a.dim} and {b.dim}")
    return complex(np.vdot(a.amps, b.amps))


def isometry_defect(m: LinearMap) -> float:
    """Spectral norm of adjoint(m) . m - I."""
    g = m.entries.conj().T @ m.entries
    return float(np.linalg.norm(g - np.eye(m.cols), 2))

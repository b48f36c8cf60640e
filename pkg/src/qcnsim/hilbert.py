"""Tensor-product state space of the emitter, the two cavities and the sources.

The basis is ordered row-major over the subsystems in layout order: with the
emitter listed first its level index varies slowest. Operators are stored as
CSR sparse matrices, density matrices as dense arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from numbers import Number

import numpy as np
import scipy.sparse as sp

from .errors import LayoutError, StateError

LABELS = ("qe", "cav_a", "cav_b", "src_d1", "src_d2")
EMITTER = "qe"
EMITTER_DIM = 3


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered ``(label, dimension)`` pairs defining the tensor-product basis."""

    subsystems: tuple[tuple[str, int], ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"layout has no subsystem {label!r}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def with_dim(self, label: str, dim: int) -> SpaceLayout:
        """Copy of the layout with one subsystem resized."""
        self.index(label)
        return make_layout([(lab, dim if lab == label else d) for lab, d in self.subsystems])

    def __str__(self):
        return " x ".join(f"{lab}[{d}]" for lab, d in self.subsystems)


def make_layout(specs) -> SpaceLayout:
    """Build a layout from an iterable of ``(label, dimension)`` pairs."""
    specs = tuple((str(label), int(dim)) for label, dim in specs)
    if not specs:
        raise LayoutError("layout needs at least one subsystem")
    seen = set()
    for label, dim in specs:
        if label not in LABELS:
            raise LayoutError(f"unknown subsystem label {label!r}; expected one of {LABELS}")
        if label in seen:
            raise LayoutError(f"duplicate subsystem label {label!r}")
        seen.add(label)
        if dim < 1:
            raise LayoutError(f"subsystem {label!r} has nonpositive dimension {dim}")
        if label == EMITTER and dim != EMITTER_DIM:
            raise LayoutError(f"emitter dimension must be {EMITTER_DIM}, got {dim}")
    layout = SpaceLayout(specs)
    if layout.total_dim < 3:
        raise LayoutError(f"total dimension {layout.total_dim} < 3")
    return layout


def _check_same(a: SpaceLayout, b: SpaceLayout):
    if a != b:
        raise LayoutError(f"layout mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class QuantumOperator:
    layout: SpaceLayout
    matrix: sp.csr_matrix

    def __post_init__(self):
        n = self.layout.total_dim
        if self.matrix.shape != (n, n):
            raise LayoutError(f"matrix shape {self.matrix.shape} does not match layout dimension {n}")

    def _wrap(self, m):
        return QuantumOperator(self.layout, sp.csr_matrix(m))

    def __add__(self, other):
        if isinstance(other, QuantumOperator):
            _check_same(self.layout, other.layout)
            return self._wrap(self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, QuantumOperator):
            _check_same(self.layout, other.layout)
            return self._wrap(self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return self._wrap(-self.matrix)

    def __mul__(self, other):
        if isinstance(other, Number):
            return self._wrap(complex(other) * self.matrix)
        if isinstance(other, QuantumOperator):
            return self @ other
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return self._wrap(self.matrix / complex(other))
        return NotImplemented

    def __matmul__(self, other):
        if isinstance(other, QuantumOperator):
            _check_same(self.layout, other.layout)
            return self._wrap(self.matrix @ other.matrix)
        return NotImplemented

    def dag(self) -> QuantumOperator:
        return self._wrap(self.matrix.conj().T)

    def full(self) -> np.ndarray:
        return self.matrix.toarray()

    def __getitem__(self, idx):
        return self.matrix[idx]

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0


def commutator(a: QuantumOperator, b: QuantumOperator) -> QuantumOperator:
    return a @ b - b @ a


def embed(layout: SpaceLayout, label: str, local) -> QuantumOperator:
    """Place a local matrix on one subsystem, identity on all the others."""
    k = layout.index(label)
    local = sp.csr_matrix(local, dtype=complex)
    if local.shape != (layout.dims[k],) * 2:
        raise LayoutError(f"local operator shape {local.shape} does not fit {label}[{layout.dims[k]}]")
    factors = [local if i == k else sp.identity(d, dtype=complex, format="csr")
               for i, d in enumerate(layout.dims)]
    return QuantumOperator(layout, sp.csr_matrix(reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)))


def identity(layout: SpaceLayout) -> QuantumOperator:
    return QuantumOperator(layout, sp.identity(layout.total_dim, dtype=complex, format="csr"))


def zero(layout: SpaceLayout) -> QuantumOperator:
    n = layout.total_dim
    return QuantumOperator(layout, sp.csr_matrix((n, n), dtype=complex))


def local_destroy(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, shape=(dim, dim), format="csr", dtype=complex)


def destroy(layout: SpaceLayout, label: str) -> QuantumOperator:
    if label == EMITTER:
        raise LayoutError("destroy() is for bosonic modes; use transition() for the emitter")
    return embed(layout, label, local_destroy(layout.dim(label)))


def create(layout: SpaceLayout, label: str) -> QuantumOperator:
    return destroy(layout, label).dag()


def number(layout: SpaceLayout, label: str) -> QuantumOperator:
    a = destroy(layout, label)
    return a.dag() @ a


def transition(layout: SpaceLayout, m: int, n: int) -> QuantumOperator:
    """Emitter operator ``|m><n|`` with levels numbered 1 (ground), 2, 3."""
    if m not in (1, 2, 3) or n not in (1, 2, 3):
        raise LayoutError(f"emitter level indices must be in 1..3, got ({m}, {n})")
    local = np.zeros((3, 3), dtype=complex)
    local[m - 1, n - 1] = 1.0
    return embed(layout, EMITTER, local)


def basis_index(layout: SpaceLayout, levels: dict) -> int:
    """Flat index of a product basis state.

    ``levels`` maps labels to local indices; the emitter uses levels 1..3,
    bosonic modes use photon numbers. Missing labels default to the lowest
    state.
    """
    unknown = set(levels) - set(layout.labels)
    if unknown:
        raise LayoutError(f"unknown labels {sorted(unknown)}")
    local = []
    for label, dim in layout.subsystems:
        n = levels.get(label, 1 if label == EMITTER else 0)
        k = n - 1 if label == EMITTER else n
        if not 0 <= k < dim:
            raise LayoutError(f"level {n} out of range for {label}[{dim}]")
        local.append(k)
    return int(np.ravel_multi_index(local, layout.dims))


@dataclass(eq=False)
class DensityMatrix:
    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.layout.total_dim
        if self.matrix.shape != (n, n):
            raise LayoutError(f"density matrix shape {self.matrix.shape} does not match layout dimension {n}")

    @classmethod
    def product_state(cls, layout: SpaceLayout, levels: dict | None = None) -> DensityMatrix:
        """Pure product basis state, e.g. ``{"qe": 2, "src_d1": 3}``."""
        i = basis_index(layout, levels or {})
        rho = np.zeros((layout.total_dim,) * 2, dtype=complex)
        rho[i, i] = 1.0
        return cls(layout, rho)

    @classmethod
    def from_ket(cls, layout: SpaceLayout, psi) -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(layout, np.outer(psi, psi.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermitized(self) -> DensityMatrix:
        return DensityMatrix(self.layout, 0.5 * (self.matrix + self.matrix.conj().T))

    def normalized(self) -> DensityMatrix:
        return DensityMatrix(self.layout, self.matrix / self.trace().real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def check(self, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
        """Raise :class:`StateError` unless hermitian, unit-trace and positive."""
        herm = float(np.abs(self.matrix - self.matrix.conj().T).max())
        if herm > herm_tol:
            raise StateError(f"density matrix not hermitian (max |rho - rho^+| = {herm:.2e})")
        tr = abs(self.trace() - 1.0)
        if tr > trace_tol:
            raise StateError(f"trace deviates from 1 by {tr:.2e}")
        lam = self.min_eigenvalue()
        if lam < -eig_tol:
            raise StateError(f"negative eigenvalue {lam:.2e}")
        return self


def expect(op: QuantumOperator, rho: DensityMatrix) -> complex:
    """``tr(op rho)``."""
    _check_same(op.layout, rho.layout)
    # tr(A B) = sum_ij A_ij B_ji
    m = op.matrix.tocoo()
    return complex(np.sum(m.data * rho.matrix[m.col, m.row]))


def real_value(z: complex, name: str = "observable", tol: float = 1e-9) -> float:
    """Drop a negligible imaginary part; refuse to drop a sizeable one."""
    if abs(z.imag) > tol:
        raise StateError(f"{name} has imaginary part {z.imag:.3e} > {tol:g}")
    return float(z.real)


def ptrace(rho: DensityMatrix, keep) -> np.ndarray:
    """Reduced density matrix over the subsystems in ``keep`` (layout order)."""
    keep = [rho.layout.index(label) for label in keep]
    keep.sort()
    dims = rho.layout.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # einsum over paired row/col indices of the traced factors
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    k = int(np.prod([dims[i] for i in keep])) if keep else 1
    return red.reshape(k, k)


def trace_distance(a, b) -> float:
    """``0.5 * ||a - b||_1`` for hermitian matrices or density matrices."""
    a = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    b = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    diff = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())

"""Truncated composite Hilbert spaces and the elementary operators living on them.

Conventions
-----------
* The qubit, when present, is always mode 0; oscillators follow in declaration order.
* Composite basis vectors are ordered with mode 0 as the most significant index,
  i.e. operators are lifted with ``np.kron(op_mode0, op_mode1, ...)``.
* Qubit basis: index 0 is the ground state ``|g>``, index 1 the excited state ``|e>``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidStateError,
    KindMismatchError,
    SpaceMismatchError,
)

TOL_HERM = 1e-9
TOL_TRACE = 1e-9
TOL_PSD = 1e-8

GROUND, EXCITED = 0, 1


class ModeKind(enum.Enum):
    QUBIT = "qubit"
    BOSON = "boson"


@dataclass(frozen=True)
class ModeSpec:
    kind: ModeKind
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionMismatchError(f"mode dimension must be >= 2, got {self.dim}")
        if self.kind is ModeKind.QUBIT and self.dim != 2:
            raise DimensionMismatchError("a qubit mode has dimension 2")

    @classmethod
    def qubit(cls) -> "ModeSpec":
        return cls(ModeKind.QUBIT, 2)

    @classmethod
    def boson(cls, dim: int) -> "ModeSpec":
        return cls(ModeKind.BOSON, int(dim))


@dataclass(frozen=True)
class TensorSpace:
    modes: tuple[ModeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise DimensionMismatchError("a space needs at least one mode")
        for i, m in enumerate(self.modes):
            if m.kind is ModeKind.QUBIT and i != 0:
                raise KindMismatchError("the qubit must be mode 0")

    @classmethod
    def qubit_bosons(cls, *fock_dims: int) -> "TensorSpace":
        """Qubit (mode 0) followed by one truncated boson per entry of ``fock_dims``."""
        return cls((ModeSpec.qubit(),) + tuple(ModeSpec.boson(n) for n in fock_dims))

    @classmethod
    def bosons(cls, *fock_dims: int) -> "TensorSpace":
        return cls(tuple(ModeSpec.boson(n) for n in fock_dims))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.modes)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def has_qubit(self) -> bool:
        return self.modes[0].kind is ModeKind.QUBIT

    def __len__(self) -> int:
        return len(self.modes)

    def index(self, labels: Sequence[int]) -> int:
        """Flat basis index of the product state with per-mode ``labels``."""
        if len(labels) != len(self.modes):
            raise DimensionMismatchError(
                f"expected {len(self.modes)} labels, got {len(labels)}"
            )
        for lab, m in zip(labels, self.modes):
            if not 0 <= lab < m.dim:
                raise DimensionMismatchError(f"label {lab} out of range for {m}")
        return int(np.ravel_multi_index(tuple(labels), self.dims))

    def subspace(self, keep: Iterable[int]) -> "TensorSpace":
        return TensorSpace(tuple(self.modes[i] for i in keep))


def _frozen(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=complex)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Operator:
    space: TensorSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise SpaceMismatchError("operators live on different spaces")

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix / complex(scalar))

    def is_hermitian(self, tol: float = TOL_HERM) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0) <= tol)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def expect(self, rho: "Operator") -> float:
        """Real part of ``tr(self @ rho)``."""
        self._check(rho)
        return float(np.real(np.einsum("ij,ji->", self.matrix, rho.matrix)))

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.matrix, other.matrix, atol=atol, rtol=0.0))

    @classmethod
    def identity(cls, space: TensorSpace) -> "Operator":
        return cls(space, np.eye(space.dim))

    @classmethod
    def zero(cls, space: TensorSpace) -> "Operator":
        return cls(space, np.zeros((space.dim, space.dim)))


class DensityOperator(Operator):
    """A validated state: Hermitian, unit trace, positive semidefinite within tolerance."""

    def __init__(self, space: TensorSpace, matrix, *, validate: bool = True):
        super().__init__(space, matrix)
        if validate:
            self.validate()

    def validate(self, tol_herm=TOL_HERM, tol_trace=TOL_TRACE, tol_psd=TOL_PSD) -> None:
        m = self.matrix
        herm = np.abs(m - m.conj().T).max(initial=0.0)
        if herm > tol_herm:
            raise InvalidStateError(f"not Hermitian (deviation {herm:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > tol_trace:
            raise InvalidStateError(f"trace is {tr.real:.12g}, expected 1")
        lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()
        if lam < -tol_psd:
            raise InvalidStateError(f"negative eigenvalue {lam:.3e}")

    @classmethod
    def from_ket(cls, space: TensorSpace, ket) -> "DensityOperator":
        psi = np.asarray(ket, dtype=complex).ravel()
        if psi.shape != (space.dim,):
            raise DimensionMismatchError("ket length does not match the space")
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InvalidStateError("zero vector")
        psi = psi / norm
        return cls(space, np.outer(psi, psi.conj()))

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))


# ---------------------------------------------------------------------------
# elementary single-mode operators
# ---------------------------------------------------------------------------

def boson_ladder(spec: ModeSpec) -> np.ndarray:
    """Truncated annihilation operator; ``a[n-1, n] = sqrt(n)``."""
    if spec.kind is not ModeKind.BOSON:
        raise KindMismatchError(f"boson_ladder needs a boson mode, got {spec.kind.value}")
    return np.diag(np.sqrt(np.arange(1, spec.dim)), 1).astype(complex)


def number_op(spec: ModeSpec) -> np.ndarray:
    if spec.kind is not ModeKind.BOSON:
        raise KindMismatchError("number_op needs a boson mode")
    return np.diag(np.arange(spec.dim)).astype(complex)


@dataclass(frozen=True)
class QubitOps:
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    sigma_z: np.ndarray
    sigma_x: np.ndarray


def qubit_ops() -> QubitOps:
    sm = np.zeros((2, 2), dtype=complex)
    sm[GROUND, EXCITED] = 1.0
    sp = sm.conj().T
    sz = np.diag([-1.0, 1.0]).astype(complex)  # |e><e| - |g><g|
    return QubitOps(sm, sp, sz, sm + sp)


def embed(op, space: TensorSpace, mode_index: int) -> Operator:
    """Lift a single-mode matrix into ``space`` with identities elsewhere."""
    if not 0 <= mode_index < len(space):
        raise DimensionMismatchError(f"mode index {mode_index} out of range")
    op = np.asarray(op, dtype=complex)
    d = space.modes[mode_index].dim
    if op.shape != (d, d):
        raise DimensionMismatchError(
            f"operator shape {op.shape} does not match mode dimension {d}"
        )
    factors = [np.eye(m.dim) for m in space.modes]
    factors[mode_index] = op
    return Operator(space, reduce(np.kron, factors))


def basis_ket(space: TensorSpace, labels: Sequence[int]) -> np.ndarray:
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(labels)] = 1.0
    return psi


def basis_state(space: TensorSpace, labels: Sequence[int]) -> DensityOperator:
    """Rank-one projector on a product basis vector (see :func:`basis_ket` for the vector)."""
    return DensityOperator.from_ket(space, basis_ket(space, labels))


def partial_trace(rho: Operator, keep: Sequence[int]) -> DensityOperator | Operator:
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DimensionMismatchError("keep set must be non-empty")
    space = rho.space
    n = len(space)
    if keep[-1] >= n or keep[0] < 0:
        raise DimensionMismatchError("keep index out of range")
    dims = space.dims
    t = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # trace out from the highest index down so positions stay valid
    for count, i in enumerate(sorted(traced, reverse=True)):
        m = n - count
        t = np.trace(t, axis1=i, axis2=i + m)
    dk = int(np.prod([dims[i] for i in keep]))
    sub = space.subspace(keep)
    mat = t.reshape(dk, dk)
    if isinstance(rho, DensityOperator):
        return DensityOperator(sub, mat)
    return Operator(sub, mat)


def random_density(space: TensorSpace, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Haar-ish random mixed state; used by property tests."""
    d = space.dim
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityOperator(space, m / np.trace(m))

"""Null spaces of Liouvillians, steady states, overlap fidelities and qubit postselection."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceError,
    DegenerateSteadyStateError,
    DimensionMismatchError,
    NullSpaceOverflowError,
    NumericalFailure,
    OptoQubitError,
    PostselectionError,
    SpaceMismatchError,
)
from .lindblad import LindbladModel, Superoperator, compile_model, unvec, vec
from .tensor_core import TOL_PSD, DensityOperator, Operator, TensorSpace

#: relative zero-eigenvalue threshold
ZERO_TOL = 1e-10
#: superoperators up to this linear size are handled by a dense SVD
NULL_DENSE_LIMIT = 1024


@dataclass(frozen=True, eq=False)
class NullSpaceResult:
    space: TensorSpace
    right_vectors: list[np.ndarray]
    left_vectors: list[np.ndarray]
    residuals: list[float]
    tol_used: float
    scale: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.right_vectors)

    def right_matrix(self) -> np.ndarray:
        return np.column_stack(self.right_vectors)

    def left_matrix(self) -> np.ndarray:
        return np.column_stack(self.left_vectors)


def _dense_null(m: np.ndarray, tol: float):
    u, s, vh = sla.svd(m)
    scale = float(s[0]) if s.size else 0.0
    if scale == 0.0:
        n = m.shape[0]
        return np.eye(n, dtype=complex), np.eye(n, dtype=complex), np.zeros(n), 0.0
    keep = s <= tol * scale
    return vh[keep].conj().T, u[:, keep], s[keep], scale


def _sparse_null(L: Superoperator, tol: float, k: int):
    m = L.sparse()
    n = m.shape[0]
    # shift slightly off zero so the factorization is regular
    scale = float(spla.norm(m, 1))
    if scale == 0.0:
        raise NullSpaceOverflowError("zero superoperator: every vector is stationary")
    sigma = -1e-7 * scale
    k = max(1, min(k, n - 2))
    wr, vr = spla.eigs(m, k=k, sigma=sigma, which="LM")
    wl, vl = spla.eigs(m.conj().T.tocsc(), k=k, sigma=sigma, which="LM")
    thr = max(tol * scale, 1e3 * np.finfo(float).eps * scale)
    r = vr[:, np.abs(wr) <= thr]
    l = vl[:, np.abs(wl) <= thr]
    if r.shape[1] != l.shape[1]:
        raise NumericalFailure("right and left zero-mode counts differ in the sparse solver")
    # orthonormalize both families
    if r.shape[1]:
        r = np.linalg.qr(r)[0]
        l = np.linalg.qr(l)[0]
    return r, l, np.abs(wr[np.abs(wr) <= thr]), scale


def null_space(L: Superoperator, tol: float = ZERO_TOL, max_dim: int | None = None) -> NullSpaceResult:
    """Right and left zero modes of ``L`` with ``|lambda| <= tol * scale``.

    Dense superoperators use singular values with ``scale`` the largest one.
    Large sparse ones use shift-invert Arnoldi near zero; there ``max_dim``
    also bounds the number of eigenpairs requested (default 4).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = L.dim
    if n <= NULL_DENSE_LIMIT:
        r, l, _, scale = _dense_null(L.dense(), tol)
    else:
        k = (max_dim if max_dim is not None else 3) + 1
        r, l, _, scale = _sparse_null(L, tol, k)
    count = r.shape[1]
    if max_dim is not None and count > max_dim:
        raise NullSpaceOverflowError(f"null space has dimension {count} > max_dim={max_dim}")
    m = L.matrix
    res = [float(np.linalg.norm(m @ r[:, k])) for k in range(count)]
    return NullSpaceResult(L.space, [r[:, k] for k in range(count)], [l[:, k] for k in range(count)],
                           res, tol, scale)


def steady_density(result: NullSpaceResult, tol_psd: float = TOL_PSD) -> DensityOperator:
    if result.dim == 0:
        raise NumericalFailure("no zero mode found")
    if result.dim > 1:
        raise DegenerateSteadyStateError(
            f"steady state is {result.dim}-fold degenerate; use the perturbative projector instead"
        )
    d = result.space.dim
    x = unvec(result.right_vectors[0], d)
    x = 0.5 * (x + x.conj().T)
    tr = np.trace(x).real
    if abs(tr) < 1e-14:
        raise NumericalFailure("zero mode is traceless")
    x = x / tr
    lam = np.linalg.eigvalsh(x).min()
    if lam < -tol_psd:
        raise NumericalFailure(f"steady state has negative eigenvalue {lam:.3e}")
    return DensityOperator(result.space, x, validate=False)


def steady_state(model: LindbladModel | Superoperator, tol: float = ZERO_TOL) -> DensityOperator:
    """Unique steady state of ``model``; raises if it is degenerate."""
    L = model if isinstance(model, Superoperator) else compile_model(model)
    return steady_density(null_space(L, tol, max_dim=None if L.dim <= NULL_DENSE_LIMIT else 2))


def relaxed_state(model: LindbladModel | Superoperator, rho0: Operator, t_chunk: float = 20.0,
                  tol: float = 1e-9, drift_tol: float = 1e-4, max_time: float = 1e4) -> DensityOperator:
    """Long-time limit of ``exp(L t) rho0``.

    Needed when conserved quantities make the zero space degenerate, so the
    stationary state depends on where the evolution starts. Propagates in
    chunks of ``t_chunk`` until successive states differ by less than ``tol``.
    Fock truncation breaks such conservation laws weakly, leaving a slow drift
    instead of geometric decay; once the change per chunk stalls below
    ``drift_tol`` the current state is accepted.
    """
    L = model if isinstance(model, Superoperator) else compile_model(model)
    if rho0.space != L.space:
        raise SpaceMismatchError("initial state and generator live on different spaces")
    m = (L.matrix * t_chunk).tocsc() if L.is_sparse else L.dense() * t_chunk
    step = (lambda v: spla.expm_multiply(m, v)) if L.is_sparse else (lambda v, p=sla.expm(m): p @ v)
    v = vec(rho0.matrix)
    t, last = 0.0, math.inf
    while t < max_time:
        nv = step(v)
        t += t_chunk
        change = float(np.abs(nv - v).max())
        if change < tol or (change < drift_tol and change > 0.9 * last):
            x = unvec(nv, L.space.dim)
            x = 0.5 * (x + x.conj().T)
            return DensityOperator(L.space, x / np.trace(x).real, validate=False)
        v, last = nv, change
    raise ConvergenceError(f"no stationary limit within t = {max_time}")


def fidelity(rho: Operator, target: Operator) -> float:
    """Overlap ``tr(rho @ target)`` (not the Uhlmann fidelity)."""
    if rho.space != target.space:
        raise SpaceMismatchError("fidelity arguments live on different spaces")
    return float(np.real(np.einsum("ij,ji->", rho.matrix, target.matrix)))


# ---------------------------------------------------------------------------
# qubit measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeasurementSpec:
    basis: tuple[np.ndarray, np.ndarray]
    keep_index: int = 0

    def __post_init__(self):
        b = tuple(np.asarray(v, dtype=complex).ravel() for v in self.basis)
        if len(b) != 2 or any(v.shape != (2,) for v in b):
            raise DimensionMismatchError("a qubit measurement basis has two 2-vectors")
        gram = np.array([[np.vdot(x, y) for y in b] for x in b])
        if np.abs(gram - np.eye(2)).max() > 1e-12:
            raise ValueError("measurement basis is not orthonormal")
        if self.keep_index not in (0, 1):
            raise ValueError("keep_index must be 0 or 1")
        object.__setattr__(self, "basis", b)

    @classmethod
    def computational(cls, keep: str = "g") -> "MeasurementSpec":
        return cls((np.array([1, 0]), np.array([0, 1])), {"g": 0, "e": 1}[keep])

    @classmethod
    def plus_minus(cls, zeta: float, keep: str = "+") -> "MeasurementSpec":
        """``|+> = (zeta|e> + |g>)/n`` and ``|-> = (|e> - zeta|g>)/n``."""
        n = math.sqrt(1 + zeta * zeta)
        plus = np.array([1.0, zeta]) / n
        minus = np.array([-zeta, 1.0]) / n
        return cls((plus, minus), {"+": 0, "-": 1}[keep])

    def with_keep(self, keep_index: int) -> "MeasurementSpec":
        return MeasurementSpec(self.basis, keep_index)


def _conditional(rho: Operator, vec_q: np.ndarray):
    space = rho.space
    if not space.has_qubit or len(space) < 2:
        raise DimensionMismatchError("postselection needs a qubit plus at least one other mode")
    rest = space.subspace(range(1, len(space)))
    dr = rest.dim
    blocks = rho.matrix.reshape(2, dr, 2, dr)
    v = vec_q.conj()
    sub = np.einsum("a,aibj,b->ij", v, blocks, vec_q)
    return rest, sub


def outcome_probability(rho: Operator, spec: MeasurementSpec) -> float:
    _, sub = _conditional(rho, spec.basis[spec.keep_index])
    return float(np.trace(sub).real)


def measure_postselect(rho: DensityOperator, spec: MeasurementSpec) -> tuple[DensityOperator, float]:
    """Conditional state of the remaining modes after keeping one qubit outcome."""
    rest, sub = _conditional(rho, spec.basis[spec.keep_index])
    p = float(np.trace(sub).real)
    if p < 1e-12:
        raise PostselectionError(f"postselection probability {p:.3e} is too small")
    sub = sub / p
    return DensityOperator(rest, 0.5 * (sub + sub.conj().T), validate=False), p


def superposition_weight(rho_m: Operator, target: Operator, vacuum: Operator) -> float:
    """Weight ``alpha`` of ``target`` in ``alpha*target + (1-alpha)*vacuum``.

    Uses ``alpha = (F - f0)/(1 - f0)`` with ``F = tr(rho_m target)`` and
    ``f0 = tr(vacuum target)``; exact when ``rho_m`` is such a mixture.
    """
    f = fidelity(rho_m, target)
    f0 = fidelity(vacuum, target)
    if abs(1 - f0) < 1e-12:
        raise ValueError("target and reference coincide; weight undefined")
    return (f - f0) / (1 - f0)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

#: a target is evaluated on a steady state at a given parameter value
Target = Callable[[DensityOperator, float], float]
#: a model family takes ``(param_value, fock_dim)``
Family = Callable[[float, int], LindbladModel]


@dataclass
class SweepRow:
    param_name: str
    param_value: float
    fidelities: dict[str, float] = field(default_factory=dict)
    null_dim: int = 0  # 0 when the state came from relaxation rather than the null space
    residual: float = float("nan")
    truncation_flag: bool = False
    error: str = ""

    @property
    def flagged(self) -> bool:
        return self.truncation_flag or bool(self.error)


@dataclass
class SweepTable:
    param_name: str
    target_names: list[str]
    rows: list[SweepRow]

    def column(self, name: str) -> np.ndarray:
        return np.array([r.fidelities.get(name, np.nan) for r in self.rows])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.param_value for r in self.rows])

    @property
    def flagged_fraction(self) -> float:
        return sum(r.flagged for r in self.rows) / len(self.rows) if self.rows else 0.0


def _solve_point(family: Family, value: float, fock_dim: int, targets: Mapping[str, Target]):
    L = compile_model(family(value, fock_dim))
    start = getattr(family, "initial_state", None)
    rho0 = start(value, fock_dim) if start is not None else None
    if rho0 is None:
        res = null_space(L, max_dim=None if L.dim <= NULL_DENSE_LIMIT else 2)
        rho, dim = steady_density(res), res.dim
    else:
        rho, dim = relaxed_state(L, rho0), 0
    resid = float(np.abs(L.matrix @ vec(rho)).max())
    return {k: float(t(rho, value)) for k, t in targets.items()}, dim, resid


def _sweep_point(args):
    family, name, value, fock_dim, targets, check_dim, flag_tol = args
    row = SweepRow(name, float(value))
    try:
        row.fidelities, row.null_dim, row.residual = _solve_point(family, value, fock_dim, targets)
    except (OptoQubitError, np.linalg.LinAlgError, ArithmeticError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        row.fidelities = {k: float("nan") for k in targets}
        return row
    if check_dim is not None:
        try:
            ref, _, _ = _solve_point(family, value, check_dim, targets)
            row.truncation_flag = any(abs(ref[k] - row.fidelities[k]) > flag_tol for k in targets)
        except (OptoQubitError, np.linalg.LinAlgError, ArithmeticError):
            row.truncation_flag = True
    return row


def sweep(family: Family, param_name: str, grid: Sequence[float], targets: Mapping[str, Target],
          fock_dim: int = 10, check_fock_dim: int | None = None, flag_tol: float = 0.01,
          workers: int = 1) -> SweepTable:
    """One steady-state solve per grid point, never aborting on a failed point.

    With ``check_fock_dim`` every point is re-solved at that truncation and
    flagged when any target moves by more than ``flag_tol``.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    jobs = [(family, param_name, v, fock_dim, dict(targets), check_fock_dim, flag_tol) for v in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    return SweepTable(param_name, list(targets), rows)

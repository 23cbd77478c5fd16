"""First-order perturbation theory around a Liouvillian with a two-fold degenerate steady state.

The unperturbed generator ``L0`` has stationary populations ``rho_A``, ``rho_B``.
A weak perturbation ``L_pert`` selects the mixture ``alpha rho_A + beta rho_B``
through the 2x2 matrix ``M_ij = tr(chi_i L_pert[rho_j])`` built with the left
zero modes ``chi_i``. Closed-form coefficients for the standard perturbations
are provided alongside as independent cross-checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    DefectiveProjectionError,
    DegeneracyNotLiftedError,
    DimensionMismatchError,
    SpaceMismatchError,
)
from .lindblad import (
    LindbladModel,
    Superoperator,
    build_l0,
    build_l_aux,
    compile_model,
    dark_state_a,
    dark_state_b,
    qubit_and_mechanical_noise,
    unvec,
    vec,
)
from .steady_state import MeasurementSpec, measure_postselect, superposition_weight
from .tensor_core import DensityOperator, Operator, TensorSpace, basis_ket

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class FirstOrderCoefficients:
    alpha: float
    beta: float

    def __post_init__(self):
        if abs(self.alpha + self.beta - 1) > 1e-9:
            raise ValueError(f"alpha + beta = {self.alpha + self.beta}, expected 1")
        if min(self.alpha, self.beta) < -1e-9:
            raise ValueError("mixture weights must be nonnegative")


@dataclass(frozen=True, eq=False)
class ProjectorData:
    """Biorthonormal zero modes of ``L0``, rotated so the projected perturbation is diagonal.

    ``reference_rights``/``reference_lefts`` are the population pair
    ``(rho_A, rho_B)`` and its duals; ``rights``/``lefts`` are the rotated
    pair, whose first member is the first-order steady state.
    """

    rights: tuple[Operator, Operator]
    lefts: tuple[Operator, Operator]
    perturbation: Superoperator
    reference_rights: tuple[Operator, Operator]
    reference_lefts: tuple[Operator, Operator]
    projected: np.ndarray = field(repr=False)  # M in the reference basis
    rates: tuple[complex, complex] = (0j, 0j)  # eigenvalues of M, zero mode first

    @property
    def space(self) -> TensorSpace:
        return self.perturbation.space

    def apply(self, mu: Operator) -> Operator:
        """``P[mu] = sum_i rho_i tr(chi_i mu)``."""
        out = np.zeros_like(mu.matrix)
        for r, c in zip(self.reference_rights, self.reference_lefts):
            out = out + r.matrix * np.einsum("ij,ji->", c.matrix, mu.matrix)
        return Operator(mu.space, out)

    def projected_perturbation(self, mu: Operator) -> Operator:
        return self.apply(self.perturbation.apply(self.apply(mu)))

    def overlap_matrix(self, rotated: bool = True) -> np.ndarray:
        rs, ls = (self.rights, self.lefts) if rotated else (self.reference_rights, self.reference_lefts)
        return np.array([[np.einsum("ij,ji->", c.matrix, r.matrix) for r in rs] for c in ls])

    def perturbation_matrix(self, rotated: bool = True) -> np.ndarray:
        rs, ls = (self.rights, self.lefts) if rotated else (self.reference_rights, self.reference_lefts)
        return np.array([[np.einsum("ij,ji->", c.matrix, self.perturbation.apply(r).matrix) for r in rs]
                         for c in ls])


def _null_basis(m: np.ndarray) -> np.ndarray:
    return sla.null_space(m, rcond=_RANK_TOL)


def _normalize_rights(rights, d):
    out = []
    for r in rights:
        x = np.asarray(r.matrix if isinstance(r, Operator) else r, dtype=complex)
        if x.ndim == 1:
            x = unvec(x, d)
        x = 0.5 * (x + x.conj().T)
        tr = np.trace(x).real
        out.append(x / tr if abs(tr) > 1e-12 else x)
    return out


def _population_pair(null_r: np.ndarray, d: int):
    """Extremal states of a two-dimensional stationary set, which is a segment of states."""
    herm = []
    for k in range(2):
        m = unvec(null_r[:, k], d)
        herm += [0.5 * (m + m.conj().T), 0.5j * (m.conj().T - m)]
    flat = np.array([np.concatenate([vec(h).real, vec(h).imag]) for h in herm]).T
    u = np.linalg.svd(flat, full_matrices=False)[0][:, :2]
    n = d * d
    basis = [unvec(u[:n, k] + 1j * u[n:, k], d) for k in range(2)]
    basis = [0.5 * (b + b.conj().T) for b in basis]
    traces = np.array([np.trace(b).real for b in basis])
    k0 = int(np.argmax(np.abs(traces)))
    x0 = basis[k0] / traces[k0]
    y = basis[1 - k0] - traces[1 - k0] * x0
    y = y / np.abs(y).max()

    def lam(t):
        return np.linalg.eigvalsh(x0 + t * y)[0]

    # lam is concave in t; walk out from its maximum to both zero crossings
    t_mid = minimize_scalar(lambda t: -lam(t), bracket=(-1.0, 1.0)).x
    if lam(t_mid) < -1e-10:
        raise DimensionMismatchError("zero space contains no positive state")
    ends = []
    for sign in (-1.0, 1.0):
        step = 1.0
        while lam(t_mid + sign * step) > 0:
            step *= 2
            if step > 1e8:
                raise DimensionMismatchError("stationary set is unbounded")
        a, b = sorted((t_mid, t_mid + sign * step))
        ends.append(brentq(lam, a, b, xtol=1e-14))
    return [x0 + t * y for t in ends]


def build_projector(L0: Superoperator, L_pert: Superoperator,
                    rights: Sequence[Operator] | None = None) -> ProjectorData:
    """Projector onto the stationary populations of ``L0`` diagonalizing ``L_pert``.

    If the zero space of ``L0`` is exactly two-dimensional its two extremal states
    are used. A larger zero space (stationary coherences between the dark states)
    needs the population pair passed explicitly as ``rights``; the duals are then
    taken over the full zero space with the remaining modes chosen orthogonal to
    the pair.
    """
    if L0.space != L_pert.space:
        raise SpaceMismatchError("L0 and L_pert act on different spaces")
    d = L0.space.dim
    m0 = L0.dense()
    null_r = _null_basis(m0)
    null_l = _null_basis(m0.conj().T)
    if null_r.shape[1] != null_l.shape[1]:
        raise DimensionMismatchError("right and left zero spaces differ in dimension")
    if rights is None:
        if null_r.shape[1] != 2:
            raise DimensionMismatchError(
                f"zero space of L0 has dimension {null_r.shape[1]}; pass the population pair explicitly"
            )
        pair = _population_pair(null_r, d)
    else:
        if len(rights) != 2:
            raise DimensionMismatchError("exactly two reference states are required")
        pair = _normalize_rights(rights, d)
        if null_r.shape[1] < 2:
            raise DimensionMismatchError("zero space of L0 is smaller than two")
    pv = np.column_stack([vec(p) for p in pair])
    # the pair must lie inside the zero space
    resid = np.linalg.norm(pv - null_r @ (null_r.conj().T @ pv), axis=0)
    if resid.max() > 1e-8:
        raise DimensionMismatchError(f"reference states are not stationary (residual {resid.max():.2e})")
    # complete the pair to a basis of the zero space, orthogonally
    comp = null_r - pv @ np.linalg.lstsq(pv, null_r, rcond=None)[0]
    if null_r.shape[1] > 2:
        u, s, _ = np.linalg.svd(comp, full_matrices=False)
        comp = u[:, : null_r.shape[1] - 2]
        full = np.column_stack([pv, comp])
    else:
        full = pv
    g = null_l.conj().T @ full
    duals = np.linalg.inv(g).conj().T
    lv = null_l @ duals[:, :2]
    ref_r = tuple(Operator(L0.space, p) for p in pair)
    ref_l = tuple(Operator(L0.space, unvec(lv[:, i], d).conj().T) for i in range(2))

    mp = L_pert.matrix
    m = np.array([[lv[:, i].conj() @ (mp @ pv[:, j]) for j in range(2)] for i in range(2)])
    rot_v, rates = _diagonalize(m)
    rot_r = pv @ rot_v
    rot_l = lv @ np.linalg.inv(rot_v).conj().T
    rights_out = tuple(Operator(L0.space, unvec(rot_r[:, k], d)) for k in range(2))
    lefts_out = tuple(Operator(L0.space, unvec(rot_l[:, k], d).conj().T) for k in range(2))
    return ProjectorData(rights_out, lefts_out, L_pert, ref_r, ref_l, m, rates)


def _diagonalize(m: np.ndarray):
    """Eigenvectors of the projected 2x2 perturbation, normalized scale-invariantly."""
    scale = np.abs(m).max()
    if scale == 0:
        return np.eye(2, dtype=complex), (0j, 0j)
    w, v = np.linalg.eig(m / scale)
    order = np.argsort(np.abs(w))
    w, v = w[order], v[:, order]
    if abs(w[0] - w[1]) < 1e-9:
        if np.abs(m / scale - w[0] * np.eye(2)).max() > 1e-9:
            raise DefectiveProjectionError("projected perturbation is not diagonalizable")
        return np.eye(2, dtype=complex), (w[0] * scale, w[1] * scale)
    cols = []
    for k in range(2):
        x = v[:, k]
        s = x.sum()
        if abs(s) > 1e-9:
            x = x / s  # unit trace
        else:
            x = x / np.linalg.norm(x)
            j = int(np.argmax(np.abs(x)))
            x = x * (abs(x[j]) / x[j])
        cols.append(x)
    return np.column_stack(cols), (w[0] * scale, w[1] * scale)


def first_order_steady(L0: Superoperator, L_pert: Superoperator, eps: float = 1.0,
                       rights: Sequence[Operator] | None = None) -> FirstOrderCoefficients:
    """Weights of the reference pair in the first-order steady state."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    proj = build_projector(L0, L_pert, rights)
    m = eps * proj.projected
    scale = np.abs(proj.projected).max() if eps > 0 else 0.0
    if eps == 0 or scale == 0:
        raise DegeneracyNotLiftedError("the perturbation does not lift the degeneracy")
    up = (m[1, 0] / eps).real  # transfer rho_A -> rho_B
    down = (m[0, 1] / eps).real  # transfer rho_B -> rho_A
    total = up + down
    if abs(total) <= 1e-12 * scale:
        raise DegeneracyNotLiftedError("both transfer rates vanish")
    alpha, beta = down / total, up / total
    return FirstOrderCoefficients(float(alpha), float(beta))


def first_order_state(L0: Superoperator, L_pert: Superoperator,
                      rights: Sequence[Operator] | None = None) -> DensityOperator:
    c = first_order_steady(L0, L_pert, 1.0, rights)
    proj = build_projector(L0, L_pert, rights)
    r = c.alpha * proj.reference_rights[0].matrix + c.beta * proj.reference_rights[1].matrix
    return DensityOperator(L0.space, 0.5 * (r + r.conj().T), validate=False)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _check_zeta(zeta: float):
    if not 0 <= zeta <= 1:
        raise ValueError(f"zeta must lie in [0, 1], got {zeta}")


def coeffs_noise(gamma_q: float, gamma_m: float) -> FirstOrderCoefficients:
    """Qubit decay plus localization noise on the ``zeta = 1`` dark pair."""
    if gamma_q < 0 or gamma_m < 0:
        raise ValueError("rates must be nonnegative")
    den = 4 * gamma_q + 9 * gamma_m
    if den == 0:
        raise ZeroDivisionError("both noise rates vanish")
    return FirstOrderCoefficients(4 * gamma_m / den, (4 * gamma_q + 5 * gamma_m) / den)


def _polys(z: float):
    z2 = z * z
    a = 3 + 4 * z2 + z2**2
    b = 2 * z2 * (3 + 4 * z2 + 2 * z2**2)
    c = 3 - 2 * z2 + 2 * z2**2 - 2 * z2**3 + 3 * z2**4
    d = z2 * (3 + 10 * z2 + 5 * z2**2)
    e = z2 * (6 - 4 * z2 - 2 * z2**2 + 4 * z2**3)
    return a, b, c, d, e


def coeffs_aux(gamma_q: float, gamma_m: float, gamma_aux: float, zeta: float) -> FirstOrderCoefficients:
    """Engineered pump ``sigma^+ - zeta b^dag`` competing with inherent noise."""
    _check_zeta(zeta)
    a, b, c, _, _ = _polys(zeta)
    z2 = zeta * zeta
    den = gamma_q * a + gamma_m * b + gamma_aux * c
    if den == 0:
        raise ZeroDivisionError("vanishing denominator")
    alpha = a * (gamma_m * z2 + gamma_aux * (1 - z2) ** 2) / den
    # gamma_m enters beta with B - A zeta^2, so that alpha + beta = 1
    beta = (a * gamma_q + gamma_m * z2 * (3 + 4 * z2 + 3 * z2**2)
            + 2 * gamma_aux * z2**2 * (3 - z2 * (2 - z2))) / den
    return FirstOrderCoefficients(alpha, beta)


def coeffs_measured(gamma_q: float, gamma_m: float, gamma_aux: float, zeta: float) -> FirstOrderCoefficients:
    """Weights of the mechanical superposition after keeping the ``|+>`` qubit outcome."""
    _check_zeta(zeta)
    a, _, _, d, e = _polys(zeta)
    z2 = zeta * zeta
    den = a * gamma_q + d * gamma_m + e * gamma_aux
    if den == 0:
        raise ZeroDivisionError("vanishing denominator")
    alpha = (2 * z2 * gamma_aux * (3 - 5 * z2 + z2**2 + z2**3) + 2 * z2**2 * gamma_m * (3 + z2)) / den
    beta = (a * gamma_q + gamma_m * z2 * (3 + 4 * z2 + 3 * z2**2)
            + 2 * gamma_aux * z2**2 * (3 - 2 * z2 + z2**2)) / den
    return FirstOrderCoefficients(alpha, beta)


# ---------------------------------------------------------------------------
# numerical pipeline for the standard perturbations
# ---------------------------------------------------------------------------

def dark_pair(space: TensorSpace, zeta: float) -> tuple[DensityOperator, DensityOperator]:
    return dark_state_a(space, zeta), dark_state_b(space)


def engineered_perturbation(space: TensorSpace, zeta: float, gamma_q: float, gamma_m: float,
                            gamma_aux: float) -> tuple[Superoperator, Superoperator]:
    """``(L0, L_pert)`` with ``L0`` the dark-state pump at unit rate."""
    L0 = compile_model(LindbladModel.from_terms(space, [build_l0(1.0, zeta, space)]), sparse=False)
    terms = qubit_and_mechanical_noise(gamma_q, gamma_m, space)
    if gamma_aux > 0:
        terms.append(build_l_aux(gamma_aux, space, zeta))
    Lp = compile_model(LindbladModel.from_terms(space, terms), sparse=False)
    return L0, Lp


def pipeline_coefficients(zeta: float, gamma_q: float, gamma_m: float, gamma_aux: float = 0.0,
                          fock_dim: int = 5) -> FirstOrderCoefficients:
    """Population weights of the first-order steady state computed numerically."""
    space = TensorSpace.qubit_bosons(fock_dim)
    L0, Lp = engineered_perturbation(space, zeta, gamma_q, gamma_m, gamma_aux)
    return first_order_steady(L0, Lp, 1.0, dark_pair(space, zeta))


def pipeline_measured(zeta: float, gamma_q: float, gamma_m: float, gamma_aux: float,
                      fock_dim: int = 5) -> FirstOrderCoefficients:
    """Postselected superposition weight of the first-order steady state."""
    space = TensorSpace.qubit_bosons(fock_dim)
    L0, Lp = engineered_perturbation(space, zeta, gamma_q, gamma_m, gamma_aux)
    rho = first_order_state(L0, Lp, dark_pair(space, zeta))
    rho_m, _ = measure_postselect(rho, MeasurementSpec.plus_minus(zeta))
    alpha = mechanical_superposition_weight(rho_m)
    return FirstOrderCoefficients(alpha, 1 - alpha)


def mechanical_superposition_weight(rho_m: Operator) -> float:
    """Weight of ``(|0>+|1>)/sqrt 2`` in a mixture with the vacuum, ``2F - 1``."""
    space = rho_m.space
    vac = basis_ket(space, (0,))
    plus = (vac + basis_ket(space, (1,))) / math.sqrt(2)
    return superposition_weight(rho_m, DensityOperator.from_ket(space, plus), DensityOperator.from_ket(space, vac))

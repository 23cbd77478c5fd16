"""Hamiltonians, dissipators and their compilation into Liouvillian superoperators.

Vectorization is column stacking: ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
Rate prefactors follow the model definitions literally: cavity terms carry
``2*kappa``; qubit, mechanical and engineered terms carry their bare rate.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sps

from .errors import DimensionMismatchError, KindMismatchError, SpaceMismatchError
from .tensor_core import (
    TOL_HERM,
    DensityOperator,
    ModeKind,
    Operator,
    TensorSpace,
    basis_ket,
    boson_ladder,
    embed,
    number_op,
    qubit_ops,
)

#: superoperators of larger linear size are stored sparse
DENSE_LIMIT = 4096


def vec(x) -> np.ndarray:
    m = x.matrix if isinstance(x, Operator) else np.asarray(x)
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


@dataclass(frozen=True, eq=False)
class DissipatorTerm:
    rate: float
    jump: Operator
    label: str = ""

    def __post_init__(self):
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ValueError(f"dissipator rate must be finite and >= 0, got {self.rate}")


@dataclass(frozen=True, eq=False)
class LindbladModel:
    space: TensorSpace
    hamiltonian: Operator
    dissipators: tuple[DissipatorTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "dissipators", tuple(self.dissipators))
        if self.hamiltonian.space != self.space:
            raise SpaceMismatchError("Hamiltonian lives on a different space")
        if not self.hamiltonian.is_hermitian(TOL_HERM):
            raise ValueError("Hamiltonian is not Hermitian")
        for term in self.dissipators:
            if term.jump.space != self.space:
                raise SpaceMismatchError(f"jump operator {term.label!r} lives on a different space")

    @classmethod
    def from_terms(cls, space: TensorSpace, terms: Sequence[DissipatorTerm], hamiltonian: Operator | None = None):
        return cls(space, hamiltonian if hamiltonian is not None else Operator.zero(space), tuple(terms))

    def __add__(self, other: "LindbladModel") -> "LindbladModel":
        if other.space != self.space:
            raise SpaceMismatchError("cannot merge models on different spaces")
        return LindbladModel(
            self.space, self.hamiltonian + other.hamiltonian, self.dissipators + other.dissipators
        )

    def with_terms(self, *terms: DissipatorTerm) -> "LindbladModel":
        return replace(self, dissipators=self.dissipators + tuple(t for t in terms if t.rate > 0))

    @property
    def is_closed(self) -> bool:
        return all(t.rate == 0 for t in self.dissipators)

    def compile(self, sparse: bool | None = None) -> "Superoperator":
        return compile_model(self, sparse=sparse)


@dataclass(frozen=True, eq=False)
class Superoperator:
    space: TensorSpace
    matrix: np.ndarray | sps.spmatrix = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sps.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def sparse(self) -> sps.csr_matrix:
        return sps.csr_matrix(self.matrix)

    def apply(self, rho) -> Operator:
        d = self.space.dim
        out = self.matrix @ vec(rho)
        return Operator(self.space, unvec(out, d))

    def adjoint(self) -> "Superoperator":
        return Superoperator(self.space, self.matrix.conj().T)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if other.space != self.space:
            raise SpaceMismatchError("superoperators act on different spaces")
        m = self.matrix + other.matrix
        return Superoperator(self.space, m)

    def __mul__(self, scalar) -> "Superoperator":
        return Superoperator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        if self.is_sparse:
            return float(sps.linalg.norm(self.matrix))
        return float(np.linalg.norm(self.matrix))


def _kron(a, b, sparse: bool):
    if sparse:
        return sps.kron(sps.csr_matrix(a), sps.csr_matrix(b), format="csr")
    return np.kron(a, b)


def hamiltonian_generator(h: np.ndarray, sparse: bool = False):
    d = h.shape[0]
    eye = sps.identity(d, format="csr") if sparse else np.eye(d)
    return -1j * (_kron(eye, h, sparse) - _kron(h.T, eye, sparse))


def dissipator_generator(jump: np.ndarray, rate: float, sparse: bool = False):
    d = jump.shape[0]
    eye = sps.identity(d, format="csr") if sparse else np.eye(d)
    jdj = jump.conj().T @ jump
    return rate * (
        _kron(jump.conj(), jump, sparse)
        - 0.5 * _kron(eye, jdj, sparse)
        - 0.5 * _kron(jdj.T, eye, sparse)
    )


def compile_model(model: LindbladModel, sparse: bool | None = None) -> Superoperator:
    """Liouvillian of ``model`` acting on column-stacked density matrices."""
    d = model.space.dim
    if sparse is None:
        sparse = d * d > DENSE_LIMIT
    gen = hamiltonian_generator(model.hamiltonian.matrix, sparse)
    for term in model.dissipators:
        if term.rate > 0:
            gen = gen + dissipator_generator(term.jump.matrix, term.rate, sparse)
    if sparse:
        gen = sps.csr_matrix(gen)
    return Superoperator(model.space, gen)


# ---------------------------------------------------------------------------
# mode layout helpers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeLayout:
    """Where the qubit, cavity and mechanical modes sit inside a space."""

    cavities: tuple[int, ...]
    mechanics: tuple[int, ...]

    @classmethod
    def infer(cls, space: TensorSpace, n_cavities: int) -> "ModeLayout":
        if not space.has_qubit:
            raise KindMismatchError("space must start with a qubit mode")
        rest = list(range(1, len(space)))
        if len(rest) < n_cavities + 1:
            raise DimensionMismatchError(
                f"space needs a qubit, {n_cavities} cavity mode(s) and at least one mechanical mode"
            )
        for i in rest:
            if space.modes[i].kind is not ModeKind.BOSON:
                raise KindMismatchError("non-qubit modes must be bosons")
        return cls(tuple(rest[:n_cavities]), tuple(rest[n_cavities:]))


def _lad(space: TensorSpace, i: int) -> Operator:
    return embed(boson_ladder(space.modes[i]), space, i)


def _num(space: TensorSpace, i: int) -> Operator:
    return embed(number_op(space.modes[i]), space, i)


def qubit_operators(space: TensorSpace) -> dict[str, Operator]:
    q = qubit_ops()
    return {
        "sm": embed(q.sigma_minus, space, 0),
        "sp": embed(q.sigma_plus, space, 0),
        "sz": embed(q.sigma_z, space, 0),
        "sx": embed(q.sigma_x, space, 0),
    }


def collective_mode(space: TensorSpace, mechanics: Sequence[int]) -> Operator:
    """Center-of-mass annihilator ``sum_i b_i / sqrt(N)`` (plain ``b`` for one mode)."""
    mechanics = tuple(mechanics)
    op = _lad(space, mechanics[0])
    for i in mechanics[1:]:
        op = op + _lad(space, i)
    return op / math.sqrt(len(mechanics))


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuxParams:
    detuning: float  # Delta^aux
    g_m: float
    g_q: float


@dataclass(frozen=True)
class SystemParams:
    """Microscopic parameters of the qubit-cavity-mechanics Hamiltonian."""

    detuning: float  # Delta, cavity mode a_1
    delta: float  # qubit detuning
    omega: float | tuple[float, ...]  # mechanical frequency (one per oscillator allowed)
    g_m: float
    g_q: float
    drive: float = 0.0  # Omega
    aux: AuxParams | None = None


def build_full_hamiltonian(params: SystemParams, space: TensorSpace) -> Operator:
    """Qubit, one or two cavity modes and N mechanical modes, signs as in the model.

    Mode order: qubit, ``a_1``, ``a_2`` (only if ``params.aux``), then oscillators.
    """
    layout = ModeLayout.infer(space, 2 if params.aux is not None else 1)
    q = qubit_operators(space)
    sm, sp, sz = q["sm"], q["sp"], q["sz"]
    a1 = _lad(space, layout.cavities[0])
    omegas = params.omega if isinstance(params.omega, tuple) else (params.omega,) * len(layout.mechanics)
    if len(omegas) != len(layout.mechanics):
        raise DimensionMismatchError("one mechanical frequency per oscillator is required")

    h = params.detuning * (a1.dag() @ a1) + (params.delta / 2) * sz
    h = h - params.g_q * (a1 @ sp + a1.dag() @ sm) + params.drive * (sp + sm)
    for w, i in zip(omegas, layout.mechanics):
        b = _lad(space, i)
        h = h + w * (b.dag() @ b) + params.g_m * (a1.dag() @ b + a1 @ b.dag())
    if params.aux is not None:
        a2 = _lad(space, layout.cavities[1])
        aux = params.aux
        h = h + aux.detuning * (a2.dag() @ a2) + aux.g_q * (a2.dag() @ sp + a2 @ sm)
        for i in layout.mechanics:
            b = _lad(space, i)
            h = h - aux.g_m * (a2.dag() @ b.dag() + a2 @ b)
    return Operator(space, 0.5 * (h.matrix + h.matrix.conj().T))


@dataclass(frozen=True)
class EffectiveJC:
    delta: float  # renormalized qubit frequency
    omega: float  # renormalized mechanical frequency
    g: float  # cavity-mediated exchange coupling
    drive: float = 0.0


def effective_jc_parameters(params: SystemParams, convention: str = "printed") -> EffectiveJC:
    """Cavity-eliminated qubit-oscillator parameters.

    ``convention="printed"`` uses ``delta - 2 g_q^2/(Delta-delta)``,
    ``omega - 2 g_m^2/(Delta-omega)`` and
    ``g = g_q g_m (2 Delta - omega - delta) / ((Delta-delta)(Delta-omega))``.
    ``convention="second_order"`` is the plain second-order elimination of the
    full Hamiltonian, which is half of every printed shift and coupling; use it
    when comparing against the full model.
    """
    if isinstance(params.omega, tuple):
        raise ValueError("effective_jc_parameters takes a single mechanical frequency")
    dq = params.detuning - params.delta
    dm = params.detuning - params.omega
    if dq == 0 or dm == 0:
        raise ZeroDivisionError("cavity detuning coincides with the qubit or mechanical frequency")
    if abs(params.g_q / dq) > 0.1 or abs(params.g_m / dm) > 0.1:
        warnings.warn("adiabatic elimination of the cavity is outside its small-coupling regime", stacklevel=2)
    if convention == "printed":
        scale = 1.0
    elif convention == "second_order":
        scale = 0.5
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return EffectiveJC(
        delta=params.delta - scale * 2 * params.g_q**2 / dq,
        omega=params.omega - scale * 2 * params.g_m**2 / dm,
        g=scale * params.g_q * params.g_m * (2 * params.detuning - params.omega - params.delta) / (dq * dm),
        drive=params.drive,
    )


def jc_hamiltonian(eff: EffectiveJC, space: TensorSpace, mechanics: Sequence[int] = (1,)) -> Operator:
    q = qubit_operators(space)
    h = (eff.delta / 2) * q["sz"] + eff.drive * (q["sp"] + q["sm"])
    for i in mechanics:
        b = _lad(space, i)
        h = h + eff.omega * (b.dag() @ b) - eff.g * (q["sp"] @ b + q["sm"] @ b.dag())
    return h


def build_effective_jc(params: SystemParams, fock_dim: int, convention: str = "printed") -> LindbladModel:
    space = TensorSpace.qubit_bosons(fock_dim)
    eff = effective_jc_parameters(params, convention)
    return LindbladModel(space, jc_hamiltonian(eff, space))


# ---------------------------------------------------------------------------
# dissipators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseRates:
    kappa: float = 0.0
    kappa_aux: float = 0.0
    gamma_q: float = 0.0
    gamma_m: float = 0.0


def _check_rate(name: str, value: float):
    if value < 0 or not np.isfinite(value):
        raise ValueError(f"{name} must be finite and >= 0, got {value}")


def standard_dissipators(rates: NoiseRates, space: TensorSpace, n_cavities: int | None = None) -> list[DissipatorTerm]:
    """Cavity loss (``2 kappa``), qubit decay (``gamma_q``) and localization noise (``gamma_m``).

    Zero rates are omitted. ``n_cavities`` defaults to 2 when ``kappa_aux`` is set.
    """
    for name in ("kappa", "kappa_aux", "gamma_q", "gamma_m"):
        _check_rate(name, getattr(rates, name))
    if n_cavities is None:
        n_cavities = 2 if rates.kappa_aux > 0 else 1
    layout = ModeLayout.infer(space, n_cavities)
    terms = []
    if rates.kappa > 0 and n_cavities >= 1:
        terms.append(DissipatorTerm(2 * rates.kappa, _lad(space, layout.cavities[0]), "cav"))
    if rates.kappa_aux > 0 and n_cavities >= 2:
        terms.append(DissipatorTerm(2 * rates.kappa_aux, _lad(space, layout.cavities[1]), "cav_aux"))
    terms.extend(qubit_and_mechanical_noise(rates.gamma_q, rates.gamma_m, space, layout.mechanics))
    return terms


def qubit_and_mechanical_noise(gamma_q: float, gamma_m: float, space: TensorSpace,
                               mechanics: Sequence[int] = (1,), collective: bool = False) -> list[DissipatorTerm]:
    """Qubit decay and ``(b + b^dag)`` localization noise.

    With ``collective=True`` the localization noise acts on the center-of-mass
    coordinate only; otherwise every oscillator gets its own term.
    """
    _check_rate("gamma_q", gamma_q)
    _check_rate("gamma_m", gamma_m)
    terms = []
    if gamma_q > 0:
        terms.append(DissipatorTerm(gamma_q, qubit_operators(space)["sm"], "q"))
    if gamma_m > 0:
        groups = [tuple(mechanics)] if collective else [(i,) for i in mechanics]
        for g in groups:
            b = collective_mode(space, g)
            terms.append(DissipatorTerm(gamma_m, b + b.dag(), "m"))
    return terms


def build_l0(gamma_eff: float, zeta: float, space: TensorSpace, mechanics: Sequence[int] = (1,)) -> DissipatorTerm:
    """Cavity-mediated dark-state dissipator with jump ``b - zeta sigma^-``."""
    _check_rate("gamma_eff", gamma_eff)
    if not 0 < zeta <= 1:
        raise ValueError(f"zeta must lie in (0, 1], got {zeta}")
    b = collective_mode(space, mechanics)
    return DissipatorTerm(gamma_eff, b - zeta * qubit_operators(space)["sm"], "L0")


def build_l_aux(gamma_aux: float, space: TensorSpace, zeta: float, eta: float = 0.0, nu: float = 0.0,
                sigma_plus_weight: float = 1.0, mechanics: Sequence[int] = (1,)) -> DissipatorTerm:
    """Engineered pump with jump ``s sigma^+ + eta sigma^- + nu b - zeta b^dag``."""
    _check_rate("gamma_aux", gamma_aux)
    q = qubit_operators(space)
    b = collective_mode(space, mechanics)
    jump = sigma_plus_weight * q["sp"] + eta * q["sm"] + nu * b - zeta * b.dag()
    return DissipatorTerm(gamma_aux, jump, "aux")


#: the alternative pump jumps compared against each other, as ``(sigma_plus_weight, zeta sign)``
AUX_JUMPS = {
    "sp-zbd": (1.0, 1.0),  # sigma^+ - zeta b^dag
    "sp": (1.0, 0.0),  # sigma^+
    "sp+zbd": (1.0, -1.0),  # sigma^+ + zeta b^dag
    "bd": (0.0, None),  # b^dag
}


def aux_jump_variant(name: str, gamma_aux: float, zeta: float, space: TensorSpace,
                     mechanics: Sequence[int] = (1,)) -> DissipatorTerm:
    try:
        weight, sign = AUX_JUMPS[name]
    except KeyError:
        raise ValueError(f"unknown pump jump {name!r}; choose from {sorted(AUX_JUMPS)}") from None
    z = -1.0 if sign is None else sign * zeta
    return build_l_aux(gamma_aux, space, z, sigma_plus_weight=weight, mechanics=mechanics)


# ---------------------------------------------------------------------------
# cooperativity parametrization and model families
# ---------------------------------------------------------------------------

def noise_rates_from_cooperativity(c_q: float, c_m: float, zeta: float = 1.0, gamma_eff: float = 1.0,
                                   convention: str = "shared") -> tuple[float, float]:
    """``(gamma_q, gamma_m)`` in units where the dark-state pump rate is ``gamma_eff``.

    ``gamma_m = gamma_eff / (2 C_m)`` in both conventions. ``"shared"`` also sets
    ``gamma_q = gamma_eff / (2 C_q)``; ``"microscopic"`` derives ``gamma_q`` from
    ``zeta = (g_q / g_m)^2`` which gives ``zeta * gamma_eff / (2 C_q)``.
    An infinite cooperativity means the corresponding rate is zero.
    """
    def inv(c):
        if c <= 0:
            raise ValueError("cooperativities must be positive")
        return 0.0 if math.isinf(c) else 1.0 / c

    gamma_m = gamma_eff * inv(c_m) / 2
    if convention == "shared":
        gamma_q = gamma_eff * inv(c_q) / 2
    elif convention == "microscopic":
        gamma_q = zeta * gamma_eff * inv(c_q) / 2
    else:
        raise ValueError(f"unknown noise convention {convention!r}")
    return gamma_q, gamma_m


@dataclass(frozen=True)
class EngineeredConfig:
    """One point of the dissipative-preparation model family."""

    zeta: float = 0.2
    c_q: float = 100.0
    c_m: float = 100.0
    gamma_aux: float = 1.0  # in units of gamma_eff
    fock_dim: int = 10
    jump: str = "sp-zbd"
    noise_convention: str = "shared"
    n_oscillators: int = 1
    zeta_aux: float | None = None  # defaults to zeta

    @property
    def space(self) -> TensorSpace:
        return TensorSpace.qubit_bosons(*([self.fock_dim] * self.n_oscillators))


def engineered_model(cfg: EngineeredConfig) -> LindbladModel:
    """Dark-state pump, engineered pump and inherent noise, with ``gamma_eff = 1``.

    For several oscillators the pumps act on the center-of-mass mode, and so does
    the localization noise, which keeps the relative modes decoupled.
    """
    space = cfg.space
    mech = tuple(range(1, 1 + cfg.n_oscillators))
    gamma_q, gamma_m = noise_rates_from_cooperativity(cfg.c_q, cfg.c_m, cfg.zeta, 1.0, cfg.noise_convention)
    za = cfg.zeta if cfg.zeta_aux is None else cfg.zeta_aux
    terms = [build_l0(1.0, cfg.zeta, space, mech)]
    if cfg.gamma_aux > 0:
        terms.append(aux_jump_variant(cfg.jump, cfg.gamma_aux, za, space, mech))
    terms.extend(qubit_and_mechanical_noise(gamma_q, gamma_m, space, mech, collective=True))
    return LindbladModel.from_terms(space, terms)


def noise_only_model(c_q: float, c_m: float, fock_dim: int = 10, zeta: float = 1.0) -> LindbladModel:
    """Dark-state pump plus inherent noise only (no engineered pump)."""
    cfg = EngineeredConfig(zeta=zeta, c_q=c_q, c_m=c_m, gamma_aux=0.0, fock_dim=fock_dim)
    return engineered_model(cfg)


# ---------------------------------------------------------------------------
# reference states
# ---------------------------------------------------------------------------

def dark_state_a(space: TensorSpace, zeta: float = 1.0) -> DensityOperator:
    """``(zeta |g,1> + |e,0>)`` normalized, for the first oscillator (center of mass if several)."""
    n = len(space) - 1
    if n == 1:
        psi = zeta * basis_ket(space, (0, 1)) + basis_ket(space, (1, 0))
    else:
        vac = basis_ket(space, (0,) * (n + 1))
        bcm = collective_mode(space, range(1, n + 1))
        psi = zeta * (bcm.dag() @ vac) + basis_ket(space, (1,) + (0,) * n)
    return DensityOperator.from_ket(space, psi)


def dark_state_b(space: TensorSpace) -> DensityOperator:
    return DensityOperator.from_ket(space, basis_ket(space, (0,) * len(space)))


def mechanical_superposition(fock_dim: int) -> DensityOperator:
    """``(|0> + |1>)/sqrt(2)`` of a single oscillator."""
    space = TensorSpace.bosons(fock_dim)
    return DensityOperator.from_ket(space, basis_ket(space, (0,)) + basis_ket(space, (1,)))


def fock_target(fock_dim: int, n: int) -> DensityOperator:
    space = TensorSpace.bosons(fock_dim)
    return DensityOperator.from_ket(space, basis_ket(space, (n,)))


def w_state(n_oscillators: int, fock_dim: int) -> DensityOperator:
    """Symmetric single-excitation state of ``n_oscillators`` modes."""
    space = TensorSpace.bosons(*([fock_dim] * n_oscillators))
    psi = np.zeros(space.dim, dtype=complex)
    for i in range(n_oscillators):
        labels = [0] * n_oscillators
        labels[i] = 1
        psi += basis_ket(space, labels)
    return DensityOperator.from_ket(space, psi)

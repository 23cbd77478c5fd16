"""Time evolution under piecewise-constant Lindblad generators and stroboscopic driving.

The stroboscopic protocol switches one oscillator at a time into resonance with
the qubit. Windows have length ``tau`` and are assigned round-robin, so window
``k`` belongs to oscillator ``k % N``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, IntegrationError, SpaceMismatchError
from .lindblad import (
    DENSE_LIMIT,
    DissipatorTerm,
    LindbladModel,
    Superoperator,
    SystemParams,
    collective_mode,
    compile_model,
    effective_jc_parameters,
    build_full_hamiltonian,
    qubit_operators,
    unvec,
    vec,
)
from .tensor_core import (
    DensityOperator,
    Operator,
    TensorSpace,
    basis_ket,
    boson_ladder,
    embed,
    number_op,
)

TRACE_DRIFT = 1e-8
#: default RK4 step in units of 1/||L||_1; RK4 is exactly trace preserving, so accuracy is set here
RK4_STEP = 0.05


# ---------------------------------------------------------------------------
# piecewise generators and the integrator
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PiecewiseLindblad:
    """Generator ``generators[segments[k]]`` on ``[breakpoints[k], breakpoints[k+1])``."""

    space: TensorSpace
    breakpoints: np.ndarray
    segments: tuple[int, ...]
    generators: tuple[LindbladModel, ...]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "segments", tuple(int(s) for s in self.segments))
        object.__setattr__(self, "generators", tuple(self.generators))
        if len(bp) != len(self.segments) + 1 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must increase and bracket every segment")
        for g in self.generators:
            if g.space != self.space:
                raise SpaceMismatchError("all generators must share the space")

    @classmethod
    def constant(cls, model: LindbladModel, t0: float, t1: float) -> "PiecewiseLindblad":
        return cls(model.space, np.array([t0, t1]), (0,), (model,))

    @property
    def is_closed(self) -> bool:
        return all(g.is_closed for g in self.generators)

    def segment_index(self, t: float) -> int:
        k = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return min(max(k, 0), len(self.segments) - 1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[DensityOperator]

    def expect(self, op: Operator) -> np.ndarray:
        return np.array([op.expect(s) for s in self.states])

    @property
    def final(self) -> DensityOperator:
        return self.states[-1]


class _Propagator:
    """Caches exact or RK4 propagation for one generator."""

    def __init__(self, model: LindbladModel, method: str, max_step: float | None):
        self.model = model
        self.method = method
        self.max_step = max_step
        self.cache: dict[float, np.ndarray] = {}
        self._L: Superoperator | None = None

    @property
    def L(self) -> Superoperator:
        if self._L is None:
            self._L = compile_model(self.model)
        return self._L

    def step(self, rho: np.ndarray, dt: float) -> np.ndarray:
        if self.method == "unitary":
            u = self._get(dt, lambda: sla.expm(-1j * self.model.hamiltonian.matrix * dt))
            return u @ rho @ u.conj().T
        d = rho.shape[0]
        if self.method == "expm":
            if self.L.dim <= DENSE_LIMIT:
                p = self._get(dt, lambda: sla.expm(self.L.dense() * dt))
                return unvec(p @ vec(rho), d)
            return unvec(spla.expm_multiply(self.L.sparse() * dt, vec(rho)), d)
        return self._rk4(rho, dt)

    def _get(self, dt, make):
        key = round(dt, 12)
        if key not in self.cache:
            self.cache[key] = make()
        return self.cache[key]

    def _rk4(self, rho, dt):
        m = self.L.matrix
        d = rho.shape[0]
        scale = float(spla.norm(m, 1)) if self.L.is_sparse else float(np.abs(m).sum(axis=0).max())
        h0 = RK4_STEP / scale if scale > 0 else dt
        if self.max_step is not None:
            h0 = min(h0, self.max_step)
        y0 = vec(rho)
        tr0 = np.trace(rho)
        for halving in range(11):
            n = max(1, math.ceil(dt / h0 * 2**halving - 1e-9))
            h = dt / n
            y = y0.copy()
            for _ in range(n):
                k1 = m @ y
                k2 = m @ (y + 0.5 * h * k1)
                k3 = m @ (y + 0.5 * h * k2)
                k4 = m @ (y + h * k3)
                y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            out = unvec(y, d)
            if np.all(np.isfinite(out)) and abs(np.trace(out) - tr0) <= TRACE_DRIFT:
                return out
        raise IntegrationError("trace drift persists after 10 step halvings")


def evolve(rho0: Operator, model: LindbladModel | PiecewiseLindblad, t_grid: Sequence[float],
           method: str = "auto", max_step: float | None = None) -> Trajectory:
    """Propagate ``rho0`` and record it at each time of ``t_grid``.

    ``method``: ``"rk4"`` (fixed-step classical Runge-Kutta, steps subdividing
    every window), ``"expm"`` (exact propagator per window), ``"unitary"``
    (closed systems only) or ``"auto"`` which picks ``"unitary"`` for closed
    systems and ``"rk4"`` otherwise.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if isinstance(model, LindbladModel):
        model = PiecewiseLindblad.constant(model, t_grid[0], t_grid[-1] if t_grid.size > 1 else t_grid[0] + 1)
    if rho0.space != model.space:
        raise SpaceMismatchError("initial state and model live on different spaces")
    if method == "auto":
        method = "unitary" if model.is_closed else "rk4"
    if method not in ("rk4", "expm", "unitary"):
        raise ValueError(f"unknown method {method!r}")
    if method == "unitary" and not model.is_closed:
        raise ValueError("unitary propagation requires a model without dissipators")
    bp = model.breakpoints
    if t_grid[0] < bp[0] - 1e-12 or t_grid[-1] > bp[-1] + 1e-9:
        raise ValueError("t_grid leaves the time range covered by the model")

    props = [_Propagator(g, method, max_step) for g in model.generators]
    inner = bp[(bp > t_grid[0]) & (bp < t_grid[-1])]
    events = np.union1d(t_grid, inner)
    record = set(np.searchsorted(events, t_grid))
    rho = np.array(rho0.matrix, dtype=complex)
    tr0 = np.trace(rho).real
    states = []

    def emit(x):
        h = 0.5 * (x + x.conj().T)
        states.append(DensityOperator(model.space, h, validate=False))

    emit(rho)
    for i in range(len(events) - 1):
        a, b = events[i], events[i + 1]
        k = model.segment_index(0.5 * (a + b))
        rho = props[model.segments[k]].step(rho, b - a)
        if i + 1 in record:
            emit(rho)
    drift = max(abs(np.trace(s.matrix).real - tr0) for s in states)
    if drift > TRACE_DRIFT:
        raise IntegrationError(f"trace drift {drift:.2e} exceeds {TRACE_DRIFT}")
    return Trajectory(t_grid, states)


# ---------------------------------------------------------------------------
# stroboscopic protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StroboParams:
    """Desk-scale stroboscopic setup, frequencies in units of the cavity detuning."""

    detuning: float = 1.0  # Delta
    delta: float = 0.0
    omega_on: float = 0.0
    omega_off: float = 8.0
    g_q: float = 0.05
    g_m: float = 0.05
    n_oscillators: int = 2
    fock_dim: int = 4
    cavity_dim: int = 3
    cooperativity: float = math.inf  # sets gamma_q = gamma_m = g / C in the eliminated model

    def system(self, omegas: tuple[float, ...]) -> SystemParams:
        return SystemParams(self.detuning, self.delta, omegas, self.g_m, self.g_q)

    def renormalized(self, omega: float) -> float:
        """Second-order mechanical frequency shift by the cavity."""
        return omega - self.g_m**2 / (self.detuning - omega)

    @property
    def g_eff(self) -> float:
        p = SystemParams(self.detuning, self.delta, self.omega_on, self.g_m, self.g_q)
        return effective_jc_parameters(p, "second_order").g


@dataclass(frozen=True)
class FrequencySchedule:
    """Square-wave frequencies: oscillator ``k % N`` sits at ``omega_on`` during window ``k``."""

    n_oscillators: int
    omega_on: float
    omega_off: float
    tau: float
    n: int = 1  # intended integer tau * |omega_off - omega_on| / 2 pi

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.n_oscillators < 1:
            raise ValueError("need at least one oscillator")

    @classmethod
    def matched(cls, params: StroboParams, n: int = 2, tau_scale: float = 1.0,
                renormalized: bool = True) -> "FrequencySchedule":
        """Period locked to the (renormalized) on/off frequency gap, optionally detuned by ``tau_scale``."""
        if renormalized:
            on, off = params.renormalized(params.omega_on), params.renormalized(params.omega_off)
        else:
            on, off = params.omega_on, params.omega_off
        tau = 2 * math.pi * n / abs(off - on) * tau_scale
        return cls(params.n_oscillators, on, off, tau, n)

    def on_index(self, window: int) -> int:
        return window % self.n_oscillators

    def omega(self, i: int, t: float) -> float:
        return self.omega_on if self.on_index(int(t // self.tau)) == i else self.omega_off

    def breakpoints(self, n_windows: int) -> np.ndarray:
        return self.tau * np.arange(n_windows + 1)

    @property
    def ratio(self) -> float:
        return self.tau * abs(self.omega_off - self.omega_on) / (2 * math.pi)


@dataclass(frozen=True)
class ConditionReport:
    integer_period: bool
    integer_margin: float  # distance of tau*|omega_off-omega_on|/2pi from an integer
    elimination: bool
    elimination_margin: float  # max(g_m/|Delta-omega_i|, g_q/|Delta-delta|)
    fast_switching: bool
    switching_margin: float  # max(g_m, g_q) * tau
    separation: bool
    separation_margin: float  # |omega_on - omega_off| * tau
    cooperativity: bool
    cooperativity_margin: float

    @property
    def all_pass(self) -> bool:
        return all((self.integer_period, self.elimination, self.fast_switching, self.separation,
                    self.cooperativity))

    def as_dict(self) -> dict[str, float | bool]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def check_conditions(params: StroboParams, schedule: FrequencySchedule, small: float = 0.1,
                     large: float = 10.0, integer_tol: float = 1e-9) -> ConditionReport:
    """Evaluate the five validity conditions of the stroboscopic scheme; a report, not a gate."""
    x = schedule.ratio
    m1 = abs(x - round(x))
    freqs = (params.omega_on, params.omega_off)
    m2 = max(max(params.g_m / abs(params.detuning - w) for w in freqs),
             params.g_q / abs(params.detuning - params.delta))
    m3 = max(params.g_m, params.g_q) * schedule.tau
    m4 = abs(schedule.omega_on - schedule.omega_off) * schedule.tau
    m5 = params.cooperativity
    return ConditionReport(round(x) >= 1 and m1 <= integer_tol, m1, m2 <= small, m2, m3 <= small, m3,
                           m4 >= large, m4, m5 >= large, m5)


def rabi_period(params: StroboParams) -> float:
    """One qubit-collective-mode exchange period under round-robin switching."""
    return math.pi / (params.g_eff / math.sqrt(params.n_oscillators))


def full_space(params: StroboParams) -> TensorSpace:
    return TensorSpace.qubit_bosons(params.cavity_dim, *([params.fock_dim] * params.n_oscillators))


def eliminated_space(params: StroboParams) -> TensorSpace:
    return TensorSpace.qubit_bosons(*([params.fock_dim] * params.n_oscillators))


def full_stroboscopic_model(params: StroboParams, schedule: FrequencySchedule, n_windows: int) -> PiecewiseLindblad:
    """Lab-frame qubit, cavity and oscillators with square-wave oscillator frequencies."""
    space = full_space(params)
    gens = []
    for i in range(params.n_oscillators):
        omegas = tuple(params.omega_on if j == i else params.omega_off for j in range(params.n_oscillators))
        gens.append(LindbladModel(space, build_full_hamiltonian(params.system(omegas), space)))
    segs = [schedule.on_index(k) for k in range(n_windows)]
    return PiecewiseLindblad(space, schedule.breakpoints(n_windows), segs, gens)


def eliminated_stroboscopic_model(params: StroboParams, schedule: FrequencySchedule,
                                  n_windows: int) -> PiecewiseLindblad:
    """Cavity-eliminated JC chain in the frame resonant with the on-oscillator.

    During its window only the on-oscillator exchanges excitations with the
    qubit; off-resonant oscillators average out over an integer number of
    detuning periods. Finite cooperativity adds qubit decay and localization
    noise at rate ``g / C``.
    """
    space = eliminated_space(params)
    q = qubit_operators(space)
    g = params.g_eff
    noise: list[DissipatorTerm] = []
    if math.isfinite(params.cooperativity):
        gamma = g / params.cooperativity
        noise.append(DissipatorTerm(gamma, q["sm"], "q"))
        for i in range(params.n_oscillators):
            b = collective_mode(space, (i + 1,))
            noise.append(DissipatorTerm(gamma, b + b.dag(), "m"))
    gens = []
    for i in range(params.n_oscillators):
        b = collective_mode(space, (i + 1,))
        h = -g * (q["sp"] @ b + q["sm"] @ b.dag())
        gens.append(LindbladModel(space, h, tuple(noise)))
    segs = [schedule.on_index(k) for k in range(n_windows)]
    return PiecewiseLindblad(space, schedule.breakpoints(n_windows), segs, gens)


@dataclass
class Comparison:
    times: np.ndarray
    error: np.ndarray  # |<n_1>_full - <n_1>_elim|
    full: dict[str, np.ndarray]
    eliminated: dict[str, np.ndarray]
    report: ConditionReport

    @property
    def max_error(self) -> float:
        return float(self.error.max())


def _populations(traj: Trajectory, space: TensorSpace, mech: Sequence[int]) -> dict[str, np.ndarray]:
    q = qubit_operators(space)
    out = {"qubit": traj.expect(q["sp"] @ q["sm"])}
    for j, i in enumerate(mech):
        out[f"osc{j + 1}"] = traj.expect(embed(number_op(space.modes[i]), space, i))
    return out


def _excited_vacuum(space: TensorSpace) -> DensityOperator:
    return DensityOperator.from_ket(space, basis_ket(space, (1,) + (0,) * (len(space) - 1)))


def compare_full_vs_eliminated(params: StroboParams, schedule: FrequencySchedule,
                               t_end: float | None = None) -> Comparison:
    """Run both models from ``|e, 0...0>`` and compare oscillator-1 occupations at window edges."""
    if t_end is None:
        t_end = rabi_period(params)
    n_windows = max(1, math.ceil(t_end / schedule.tau - 1e-9))
    times = schedule.breakpoints(n_windows)
    full = full_stroboscopic_model(params, schedule, n_windows)
    elim = eliminated_stroboscopic_model(params, schedule, n_windows)
    tf = evolve(_excited_vacuum(full.space), full, times)
    te = evolve(_excited_vacuum(elim.space), elim, times, method="expm")
    n = params.n_oscillators
    pf = _populations(tf, full.space, range(2, 2 + n))
    pe = _populations(te, elim.space, range(1, 1 + n))
    err = np.abs(pf["osc1"] - pe["osc1"])
    return Comparison(times, err, pf, pe, check_conditions(params, schedule))


def eliminated_run(params: StroboParams, schedule: FrequencySchedule, t_end: float) -> dict[str, np.ndarray]:
    """Populations of the eliminated model alone, including noise when ``cooperativity`` is finite."""
    n_windows = max(1, math.ceil(t_end / schedule.tau - 1e-9))
    times = schedule.breakpoints(n_windows)
    elim = eliminated_stroboscopic_model(params, schedule, n_windows)
    traj = evolve(_excited_vacuum(elim.space), elim, times, method="expm")
    out = _populations(traj, elim.space, range(1, 1 + params.n_oscillators))
    out["t"] = times
    return out


# ---------------------------------------------------------------------------
# phonon blockade
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockadeSpectrum:
    energies: np.ndarray
    chi: float
    anharmonicity: float  # (E2 - E1) - (E1 - E0) = 2 chi
    resolved: bool | None = None  # |delta - omega| > gamma_q, if gamma_q was given


def phonon_blockade_spectrum(g: float, delta: float, omega: float, omega_tilde: float | None = None,
                             n_levels: int = 5, gamma_q: float | None = None) -> BlockadeSpectrum:
    """Levels ``omega_tilde n + chi n^2`` with ``chi = g^4 / (delta - omega)^3``."""
    det = delta - omega
    if det == 0:
        raise ZeroDivisionError("qubit and oscillator are resonant; no dispersive regime")
    if abs(g / det) > 0.1:
        warnings.warn("dispersive expansion used outside |g/(delta-omega)| << 1", stacklevel=2)
    if omega_tilde is None:
        omega_tilde = omega
    chi = g**4 / det**3
    n = np.arange(n_levels)
    e = omega_tilde * n + chi * n**2
    anh = float(e[2] - 2 * e[1] + e[0]) if n_levels >= 3 else 2 * chi
    resolved = None if gamma_q is None else abs(det) > gamma_q
    return BlockadeSpectrum(e, chi, anh, resolved)


# ---------------------------------------------------------------------------
# sideband cooling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoolingParams:
    cooperativity: float = 100.0  # gamma_m = gamma_cool / (2 C)
    gamma_cool: float = 1.0
    window: float = 1.0  # duration of one resonant cooling window
    fock_dim: int = 6
    threshold: float = 0.01
    max_windows: int = 200
    idle_heating: bool = False  # localization noise also on oscillators outside their window


@dataclass
class CoolingResult:
    state: DensityOperator
    occupations: list[float]
    windows: list[int]


def _single_mode_models(p: CoolingParams):
    space = TensorSpace.bosons(p.fock_dim)
    b = embed(boson_ladder(space.modes[0]), space, 0)
    gamma_m = p.gamma_cool / (2 * p.cooperativity)
    heat = DissipatorTerm(gamma_m, b + b.dag(), "m")
    cool = LindbladModel.from_terms(space, [DissipatorTerm(p.gamma_cool, b, "cool"), heat])
    idle = LindbladModel.from_terms(space, [heat] if p.idle_heating else [])
    return space, cool, idle


def cooling_to_ground(n_oscillators: int, params: CoolingParams = CoolingParams(),
                      initial: Sequence[int] | Sequence[DensityOperator] | None = None) -> CoolingResult:
    """Cool oscillators one after another through resonant red-sideband windows.

    Each oscillator receives windows until its occupation drops below
    ``threshold``. The oscillators do not interact during cooling, so each is
    propagated on its own and the product state is returned.
    """
    space, cool, idle = _single_mode_models(params)
    if initial is None:
        initial = [1] * n_oscillators
    states = []
    for x in initial:
        if isinstance(x, DensityOperator):
            states.append(np.array(x.matrix))
        else:
            k = basis_ket(space, (int(x),))
            states.append(np.outer(k, k.conj()))
    if len(states) != n_oscillators:
        raise ValueError("one initial state per oscillator is required")
    num = number_op(space.modes[0])
    occ = lambda r: float(np.real(np.trace(num @ r)))
    p_cool = _Propagator(cool, "expm", None)
    p_idle = _Propagator(idle, "expm", None)
    windows = [0] * n_oscillators
    for j in range(n_oscillators):
        while occ(states[j]) >= params.threshold:
            if windows[j] >= params.max_windows:
                raise ConvergenceError(f"oscillator {j} not cooled within {params.max_windows} windows")
            for i in range(n_oscillators):
                prop = p_cool if i == j else p_idle
                if i == j or params.idle_heating:
                    states[i] = prop.step(states[i], params.window)
            windows[j] += 1
    full = states[0]
    for r in states[1:]:
        full = np.kron(full, r)
    prod = TensorSpace.bosons(*([params.fock_dim] * n_oscillators))
    return CoolingResult(DensityOperator(prod, 0.5 * (full + full.conj().T), validate=False),
                         [occ(r) for r in states], windows)

"""Law-Eberly pulse planning for Fock superpositions of one or several oscillators.

Plans are built by running the evolution backwards: starting from
``|g> (x) target``, each stage empties the highest occupied level of one
oscillator with a coupling pulse (``|g,n> -> |e,n-1>``) followed by a qubit
drive pulse (``|e,n-1> -> |g,n-1>``). The forward plan replays the inverse
pulses in reverse order with opposite phase.

Pulses act in the frame resonant with the pulse's conditioning manifold. For
several oscillators the qubit frequency is shifted by ``2 sum_i l_i n_i``
(``sigma_z`` prefactor ``l_i n_i``), so a pulse tuned to one occupation vector
of the idle oscillators is detuned from every other one. Dynamical phases of
the idle manifolds are tracked in the interaction frame of the diagonal part
of the Hamiltonian; target and achieved states are compared in that frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import AddressabilityError, InvalidStateError
from .tensor_core import DensityOperator, Operator, TensorSpace, basis_ket, boson_ladder, embed, qubit_ops

COUPLING = "coupling"
DRIVE = "drive"


@dataclass(frozen=True)
class PulseStep:
    oscillator_index: int
    control: str  # COUPLING or DRIVE
    amplitude: float
    duration: float
    phase: float = 0.0
    condition_occupations: tuple[int, ...] = ()

    def __post_init__(self):
        if self.control not in (COUPLING, DRIVE):
            raise ValueError(f"unknown control {self.control!r}")
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")

    @property
    def area(self) -> float:
        return self.amplitude * self.duration

    def inverse(self) -> "PulseStep":
        return PulseStep(self.oscillator_index, self.control, self.amplitude, self.duration,
                         (self.phase + math.pi) % (2 * math.pi), self.condition_occupations)


@dataclass
class PulsePlan:
    steps: list[PulseStep]
    target: dict[tuple[int, ...], complex]
    dims: tuple[int, ...]  # Fock levels per oscillator needed by the target
    shifts: tuple[float, ...] = ()
    predicted_fidelity: float = 1.0

    @property
    def n_oscillators(self) -> int:
        return len(self.dims)

    @property
    def coupling_steps(self) -> list[PulseStep]:
        return [s for s in self.steps if s.control == COUPLING]

    def steps_per_oscillator(self) -> list[int]:
        out = [0] * self.n_oscillators
        for s in self.coupling_steps:
            out[s.oscillator_index] += 1
        return out

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.steps)


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

def normalize_target(target) -> dict[tuple[int, ...], complex]:
    """Accept ``{occupations: amplitude}`` or a 1-D coefficient list for one oscillator."""
    if isinstance(target, Mapping):
        items = {tuple(int(n) for n in k): complex(v) for k, v in target.items()}
    else:
        items = {(n,): complex(c) for n, c in enumerate(np.asarray(target).ravel())}
    items = {k: v for k, v in items.items() if v != 0}
    if not items:
        raise InvalidStateError("empty target")
    lengths = {len(k) for k in items}
    if len(lengths) != 1:
        raise InvalidStateError("occupation vectors must share one length")
    if any(n < 0 for k in items for n in k):
        raise InvalidStateError("negative occupation")
    norm = sum(abs(v) ** 2 for v in items.values())
    if abs(norm - 1) > 1e-9:
        raise InvalidStateError(f"target is not normalized (norm^2 = {norm:.12g})")
    return items


def target_dims(target: Mapping[tuple[int, ...], complex]) -> tuple[int, ...]:
    n = len(next(iter(target)))
    return tuple(max(k[i] for k in target) + 1 for i in range(n))


def target_array(target: Mapping[tuple[int, ...], complex], dims: Sequence[int]) -> np.ndarray:
    """State ``|g> (x) target`` as an array of shape ``(2, *dims)``."""
    psi = np.zeros((2,) + tuple(dims), dtype=complex)
    for k, v in target.items():
        psi[(0,) + k] = v
    return psi


# ---------------------------------------------------------------------------
# elementary pulses on a qubit (x) single-oscillator slice
# ---------------------------------------------------------------------------

def _pair_rotation(theta: float, phase: float) -> np.ndarray:
    """``exp(-i theta (e^{i phase}|up><lo| + h.c.))`` on the (lo, up) pair."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -1j * s * np.exp(-1j * phase)], [-1j * s * np.exp(1j * phase), c]])


def _null_angle(keep: complex, kill: complex) -> tuple[float, float]:
    """Angle and phase of :func:`_pair_rotation` that zeroes the ``lo`` amplitude ``kill``.

    ``keep`` is the ``up`` amplitude. The angle lies in ``(0, pi]`` so every
    pulse has a positive duration; ``pi`` is used when ``kill`` is already zero.
    """
    if abs(kill) < 1e-15:
        return math.pi, 0.0
    theta = math.atan2(abs(kill), abs(keep))
    # cos(t) |lo| e^{ia} = i sin(t) e^{-ip} |up| e^{ib}  =>  p = b - a + pi/2
    phase = np.angle(keep) - np.angle(kill) + math.pi / 2 if abs(keep) > 0 else 0.0
    return theta, float(phase % (2 * math.pi))


def _apply_coupling(slice_: np.ndarray, theta_n: float, phase: float, n: int) -> np.ndarray:
    """Resonant JC pulse whose rotation angle on the ``(g,n),(e,n-1)`` pair is ``theta_n``."""
    out = slice_.copy()
    g = theta_n / math.sqrt(n)  # area per sqrt(k)
    for k in range(1, slice_.shape[1]):
        u = _pair_rotation(g * math.sqrt(k), phase)
        lo, up = slice_[0, k], slice_[1, k - 1]
        out[0, k], out[1, k - 1] = u @ np.array([lo, up])
    return out


def _apply_drive(slice_: np.ndarray, theta: float, phase: float) -> np.ndarray:
    u = _pair_rotation(theta, phase)
    return u @ slice_


def _inverse_single(slice_: np.ndarray, top: int, j: int, cond: tuple[int, ...], g: float,
                    omega: float) -> tuple[list[PulseStep], np.ndarray]:
    """Bring a qubit (x) oscillator slice with highest level ``top`` to ``|g,0>``."""
    steps = []
    x = slice_.copy()
    for n in range(top, 0, -1):
        # coupling: empty |g,n> into |e,n-1>
        theta, phase = _null_angle(x[1, n - 1], x[0, n])
        x = _apply_coupling(x, theta, phase, n)
        steps.append(PulseStep(j, COUPLING, g, theta / (g * math.sqrt(n)), phase, cond))
        # drive: empty |e,n-1> into |g,n-1>; pair is (g, e) with e as "lo" here
        theta_d, phase_d = _null_angle(x[0, n - 1], x[1, n - 1])
        # rotation on (lo=e, up=g) with phase p equals rotation on (g, e) with phase -p
        x = _apply_drive(x, theta_d, -phase_d)
        steps.append(PulseStep(j, DRIVE, omega, theta_d / omega, -phase_d % (2 * math.pi), cond))
    return steps, x


# ---------------------------------------------------------------------------
# planning
# ---------------------------------------------------------------------------

def _stage_manifolds(psi: np.ndarray, j: int, tol: float = 1e-13) -> list[tuple[tuple[int, ...], int]]:
    """Occupation vectors of the idle oscillators with support, descending, and the top level of ``j``."""
    weights = np.sum(np.abs(psi) ** 2, axis=0)  # over qubit
    idx = np.argwhere(weights > tol)
    found: dict[tuple[int, ...], int] = {}
    for row in idx:
        cond = tuple(int(v) for i, v in enumerate(row) if i != j)
        found[cond] = max(found.get(cond, 0), int(row[j]))
    return sorted(((c, top) for c, top in found.items() if top > 0), reverse=True)


def _slice_index(j: int, cond: tuple[int, ...], n_osc: int):
    """Index into ``psi[(qubit,) + occupations]`` selecting qubit x oscillator ``j``."""
    it = iter(cond)
    return (slice(None),) + tuple(slice(None) if i == j else next(it) for i in range(n_osc))


def shift_constants(couplings: Sequence[float], delta: float, omegas: Sequence[float]) -> tuple[float, ...]:
    """``l_i = -2 g_i^2 / (delta - omega_i)`` for off-resonant oscillators."""
    out = []
    for g, w in zip(couplings, omegas):
        if delta == w:
            raise ZeroDivisionError("an off-resonant oscillator sits at the qubit frequency")
        out.append(-2 * g * g / (delta - w))
    return tuple(out)


def default_shifts(n_oscillators: int, scale: float = 1.0) -> tuple[float, ...]:
    """Pairwise incommensurate shifts ``scale * sqrt(p_i)`` over the first primes."""
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    if n_oscillators > len(primes):
        raise ValueError("too many oscillators for the default shift table")
    return tuple(scale * math.sqrt(p) for p in primes[:n_oscillators])


@dataclass(frozen=True)
class AddressReport:
    ok: bool
    margin: float  # smallest |sum_i l_i (n_i - n_i')| over distinct conditions
    worst_pair: tuple | None = None


def addressability_check(shifts: Sequence[float], occupations: Sequence[Sequence[int]],
                         min_duration: float | None = None, tol: float = 1e-12) -> AddressReport:
    """Distinct idle-oscillator occupations must give distinct qubit shifts at every stage.

    Stages follow the planning order: while oscillator ``j`` is prepared the
    oscillators before it are already empty. With ``min_duration`` the margin
    must also exceed the spectral width ``1/min_duration`` of the pulses.
    """
    occ = [tuple(int(n) for n in o) for o in occupations]
    if not occ:
        return AddressReport(True, math.inf)
    n_osc = len(occ[0])
    shifts = tuple(shifts)
    if len(shifts) != n_osc:
        raise ValueError("one shift constant per oscillator is required")
    margin, worst = math.inf, None
    current = set(occ)
    for j in range(n_osc):
        conds = sorted({tuple(v for i, v in enumerate(o) if i != j) for o in current})
        ls = [l for i, l in enumerate(shifts) if i != j]
        for a, b in combinations(conds, 2):
            gap = abs(sum(l * (x - y) for l, x, y in zip(ls, a, b)))
            if gap < margin:
                margin, worst = gap, (j, a, b)
        current = {tuple(0 if i == j else v for i, v in enumerate(o)) for o in current}
    ok = margin > tol
    if min_duration is not None:
        ok = ok and margin > 1.0 / min_duration
    return AddressReport(ok, margin, worst if math.isfinite(margin) else None)


def plan_single(target, coupling: float = 1.0, drive: float = 1.0) -> PulsePlan:
    """Law-Eberly plan for one oscillator; ``target`` lists ``c_0 .. c_M``."""
    t = normalize_target(target)
    if len(next(iter(t))) != 1:
        raise InvalidStateError("plan_single takes a single-oscillator target")
    return _plan(t, (), coupling, drive)


def plan_many(target, shifts: Sequence[float] | None = None, max_occupation: int | None = None,
              amplitude_fraction: float = 1e-3) -> PulsePlan:
    """Occupation-conditioned Law-Eberly plan for several oscillators.

    Pulse amplitudes are ``amplitude_fraction`` times the addressability margin
    so off-resonant manifolds are only weakly disturbed.
    """
    t = normalize_target(target)
    dims = target_dims(t)
    if max_occupation is not None and max(dims) - 1 > max_occupation:
        raise ValueError(f"target occupation {max(dims) - 1} exceeds max_occupation={max_occupation}")
    n_osc = len(dims)
    if n_osc == 1:
        return plan_single(t)
    if shifts is None:
        shifts = default_shifts(n_osc, 0.01)
    rep = addressability_check(shifts, list(t))
    if not rep.ok:
        raise AddressabilityError(f"occupation manifolds are not uniquely addressable: {rep.worst_pair}")
    amp = amplitude_fraction * rep.margin if math.isfinite(rep.margin) else 1.0
    return _plan(t, tuple(shifts), amp, amp)


def _plan(t, shifts, coupling, drive) -> PulsePlan:
    dims = target_dims(t)
    n_osc = len(dims)
    psi = target_array(t, dims)
    inverse: list[PulseStep] = []
    for j in range(n_osc):
        for cond, top in _stage_manifolds(psi, j):
            idx = _slice_index(j, cond, n_osc)
            steps, out = _inverse_single(psi[idx], top, j, cond if n_osc > 1 else (), coupling, drive)
            psi[idx] = out
            inverse.extend(steps)
    # a residual global phase on |g,0..0> is harmless
    if abs(abs(psi[(0,) * (n_osc + 1)]) - 1) > 1e-9:
        raise ArithmeticError("inverse construction did not reach the ground state")
    forward = [s.inverse() for s in reversed(inverse)]
    plan = PulsePlan(forward, dict(t), dims, tuple(shifts))
    plan.predicted_fidelity = min(1.0, _ideal_fidelity(plan))
    return plan


def count_steps(target) -> int:
    """Coupling pulses required by the constructive plan (no pulses are emitted)."""
    t = normalize_target(target)
    dims = target_dims(t)
    support = set(t)
    total = 0
    for j in range(len(dims)):
        tops: dict[tuple[int, ...], int] = {}
        for o in support:
            cond = o[:j] + o[j + 1:]
            tops[cond] = max(tops.get(cond, 0), o[j])
        total += sum(tops.values())
        support = {o[:j] + (0,) + o[j + 1:] for o in support}
    return total


def worst_case_steps(n_oscillators: int, max_occupation: int) -> int:
    """Coupling pulses for a target occupying every level up to ``M``: ``(M+1)^N - 1``."""
    return (max_occupation + 1) ** n_oscillators - 1


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _ideal_fidelity(plan: PulsePlan) -> float:
    """Apply the forward plan with perfect manifold selectivity."""
    n_osc = plan.n_oscillators
    psi = np.zeros((2,) + plan.dims, dtype=complex)
    psi[(0,) * (n_osc + 1)] = 1.0
    for s in plan.steps:
        idx = _slice_index(s.oscillator_index, s.condition_occupations, n_osc) if n_osc > 1 else (slice(None),) * 2
        x = psi[idx]
        if s.control == COUPLING:
            x = _apply_coupling(x, s.area, s.phase, 1)
        else:
            x = _apply_drive(x, s.area, s.phase)
        psi[idx] = x
    ref = target_array(plan.target, plan.dims)
    return float(abs(np.vdot(ref, psi)) ** 2)


def _sim_dims(plan: PulsePlan, headroom: int) -> tuple[int, ...]:
    return tuple(d + headroom for d in plan.dims)


def _generator(step: PulseStep, dims: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Pulse generator and idle-qubit operator on qubit (x) oscillator ``j``."""
    q = qubit_ops()
    dj = dims[step.oscillator_index]
    b = boson_ladder(TensorSpace.bosons(dj).modes[0])
    e = np.exp(1j * step.phase)
    if step.control == COUPLING:
        v = step.amplitude * (e * np.kron(q.sigma_plus, b) + np.conj(e) * np.kron(q.sigma_minus, b.conj().T))
    else:
        v = step.amplitude * np.kron(e * q.sigma_plus + np.conj(e) * q.sigma_minus, np.eye(dj))
    sz = np.kron(q.sigma_z, np.eye(dj))
    return v, sz


def _manifold_detuning(shifts, j, occ_idle, cond) -> float:
    ls = [l for i, l in enumerate(shifts) if i != j]
    return 2 * sum(l * (a - c) for l, a, c in zip(ls, occ_idle, cond))


@dataclass
class PlanNoise:
    gamma_q: float = 0.0
    gamma_m: float = 0.0  # rate of both D[b] and D[b^dag] per oscillator (secular localization noise)


def simulate_plan(plan: PulsePlan, noise: PlanNoise | None = None, headroom: int = 1,
                  method: str = "blocks") -> tuple[np.ndarray | DensityOperator, float]:
    """Run the forward plan from ``|g,0..0>``; returns the final state and its overlap with the target.

    ``method="blocks"`` propagates every idle-oscillator manifold separately,
    ``method="dense"`` builds full-space propagators (small spaces only) and is
    required when ``noise`` is given; noisy runs go through the master-equation
    integrator.
    """
    dims = _sim_dims(plan, headroom)
    if noise is not None and (noise.gamma_q > 0 or noise.gamma_m > 0):
        return _simulate_noisy(plan, noise, dims)
    if method == "dense":
        psi = _simulate_dense(plan, dims)
    elif method == "blocks":
        psi = _simulate_blocks(plan, dims)
    else:
        raise ValueError(f"unknown method {method!r}")
    ref = target_array(plan.target, plan.dims)
    ref_full = np.zeros_like(psi)
    ref_full[(slice(None),) + tuple(slice(0, d) for d in plan.dims)] = ref
    return psi, float(abs(np.vdot(ref_full, psi)) ** 2)


def _simulate_blocks(plan: PulsePlan, dims) -> np.ndarray:
    n_osc = plan.n_oscillators
    psi = np.zeros((2,) + dims, dtype=complex)
    psi[(0,) * (n_osc + 1)] = 1.0
    t = 0.0
    cache: dict = {}
    for s in plan.steps:
        j = s.oscillator_index
        v, sz = _generator(s, dims)
        idle = [range(d) for i, d in enumerate(dims) if i != j]
        for occ in np.ndindex(*[len(r) for r in idle]) if idle else [()]:
            idx = _slice_index(j, tuple(occ), n_osc) if n_osc > 1 else (slice(None),) * 2
            x = psi[idx]
            if not np.any(x):
                continue
            det = _manifold_detuning(plan.shifts, j, occ, s.condition_occupations) if n_osc > 1 else 0.0
            key = (id(s), det)
            if key not in cache:
                h0 = 0.5 * det * sz
                u = sla.expm(-1j * (h0 + v) * s.duration)
                fin = np.exp(0.5j * det * np.diag(sz) * (t + s.duration))
                ini = np.exp(-0.5j * det * np.diag(sz) * t)
                cache[key] = fin[:, None] * u * ini[None, :]
            shape = x.shape
            psi[idx] = (cache[key] @ x.reshape(-1)).reshape(shape)
        t += s.duration
    return psi


def _full_operators(dims):
    space = TensorSpace.qubit_bosons(*dims)
    q = qubit_ops()
    ops = {
        "sp": embed(q.sigma_plus, space, 0).matrix,
        "sm": embed(q.sigma_minus, space, 0).matrix,
        "sz": embed(q.sigma_z, space, 0).matrix,
        "b": [embed(boson_ladder(space.modes[i + 1]), space, i + 1).matrix for i in range(len(dims))],
    }
    return space, ops


def _full_step_hamiltonians(plan: PulsePlan, s: PulseStep, ops):
    """Diagonal frame part ``h0`` and the pulse ``v`` on the full space."""
    j = s.oscillator_index
    e = np.exp(1j * s.phase)
    if s.control == COUPLING:
        bj = ops["b"][j]
        v = s.amplitude * (e * ops["sp"] @ bj + np.conj(e) * ops["sm"] @ bj.conj().T)
    else:
        v = s.amplitude * (e * ops["sp"] + np.conj(e) * ops["sm"])
    h0 = np.zeros_like(v)
    if plan.n_oscillators > 1:
        cond = iter(s.condition_occupations)
        for i, b in enumerate(ops["b"]):
            if i == j:
                continue
            n_i = b.conj().T @ b
            h0 = h0 + plan.shifts[i] * (n_i - next(cond) * np.eye(len(v))) @ ops["sz"]
    return np.real(np.diag(h0)), v


def _simulate_dense(plan: PulsePlan, dims) -> np.ndarray:
    space, ops = _full_operators(dims)
    psi = basis_ket(space, (0,) * len(space))
    t = 0.0
    for s in plan.steps:
        d0, v = _full_step_hamiltonians(plan, s, ops)
        u = sla.expm(-1j * (np.diag(d0) + v) * s.duration)
        psi = np.exp(1j * d0 * (t + s.duration)) * (u @ (np.exp(-1j * d0 * t) * psi))
        t += s.duration
    return psi.reshape((2,) + dims)


def _simulate_noisy(plan: PulsePlan, noise: PlanNoise, dims):
    from .dynamics import PiecewiseLindblad, evolve
    from .lindblad import DissipatorTerm, LindbladModel

    space, ops = _full_operators(dims)
    if space.dim ** 2 > 4096:
        raise ValueError("noisy plan simulation is limited to full spaces of dimension <= 64")
    terms = []
    if noise.gamma_q > 0:
        terms.append(DissipatorTerm(noise.gamma_q, Operator(space, ops["sm"]), "q"))
    if noise.gamma_m > 0:
        for b in ops["b"]:
            terms.append(DissipatorTerm(noise.gamma_m, Operator(space, b), "m-"))
            terms.append(DissipatorTerm(noise.gamma_m, Operator(space, b.conj().T), "m+"))
    psi0 = basis_ket(space, (0,) * len(space))
    rho = np.outer(psi0, psi0.conj())
    t = 0.0
    for s in plan.steps:
        d0, v = _full_step_hamiltonians(plan, s, ops)
        # move to the pulse frame, integrate, come back to the common frame
        rho = _phase_conj(rho, -d0 * t)
        model = LindbladModel(space, Operator(space, np.diag(d0) + v), tuple(terms))
        traj = evolve(DensityOperator(space, rho, validate=False), PiecewiseLindblad.constant(model, 0.0, s.duration),
                      [0.0, s.duration], method="expm")
        rho = _phase_conj(np.array(traj.final.matrix), d0 * (t + s.duration))
        t += s.duration
    ref = target_array(plan.target, plan.dims)
    ref_full = np.zeros((2,) + dims, dtype=complex)
    ref_full[(slice(None),) + tuple(slice(0, d) for d in plan.dims)] = ref
    r = ref_full.reshape(-1)
    final = DensityOperator(space, 0.5 * (rho + rho.conj().T), validate=False)
    return final, float(np.real(r.conj() @ rho @ r))


def _phase_conj(rho: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """``D rho D^dag`` with ``D = diag(exp(i phases))``."""
    e = np.exp(1j * phases)
    return e[:, None] * rho * e.conj()[None, :]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def plan_to_text(plan: PulsePlan) -> str:
    lines = ["# law-eberly plan"]
    lines.append(f"# oscillators: {plan.n_oscillators}")
    lines.append("# shifts: " + ",".join(f"{l:.12g}" for l in plan.shifts))
    for k, v in sorted(plan.target.items()):
        lines.append(f"# target {','.join(map(str, k))}: {v.real:.12g} {v.imag:+.12g}j")
    lines.append(f"# predicted_fidelity: {plan.predicted_fidelity:.12g}")
    lines.append(f"# coupling_steps: {len(plan.coupling_steps)}")
    lines.append("# index control oscillator amplitude duration phase condition")
    for i, s in enumerate(plan.steps):
        cond = ",".join(map(str, s.condition_occupations)) or "-"
        lines.append(f"{i} {s.control} {s.oscillator_index} {s.amplitude:.12g} {s.duration:.12g} "
                     f"{s.phase:.12g} {cond}")
    return "\n".join(lines) + "\n"

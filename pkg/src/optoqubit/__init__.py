"""Steady-state and dynamical engineering of qubit-coupled mechanical oscillators."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .errors import *  # noqa: F401,F403
from .tensor_core import (  # noqa: F401
    DensityOperator,
    ModeKind,
    ModeSpec,
    Operator,
    TensorSpace,
    basis_ket,
    basis_state,
    boson_ladder,
    embed,
    partial_trace,
    qubit_ops,
)
from .lindblad import (  # noqa: F401
    DissipatorTerm,
    EngineeredConfig,
    LindbladModel,
    Superoperator,
    SystemParams,
    build_full_hamiltonian,
    build_effective_jc,
    build_l0,
    build_l_aux,
    compile_model,
    engineered_model,
)
from .steady_state import (  # noqa: F401
    MeasurementSpec,
    fidelity,
    measure_postselect,
    null_space,
    relaxed_state,
    steady_state,
    sweep,
)
from .degenerate_perturbation import build_projector, first_order_steady  # noqa: F401
from .dynamics import FrequencySchedule, StroboParams, check_conditions, cooling_to_ground, evolve  # noqa: F401
from .law_eberly import PulsePlan, PulseStep, plan_many, plan_single, simulate_plan  # noqa: F401
from .scenarios import EngineeredFamily, EngineeredTarget, engineered_sweep, steady_point  # noqa: F401

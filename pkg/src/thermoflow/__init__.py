"""Gradient-flow relaxation on dually flat thermodynamic state spaces."""

from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    GridError,
    ResolutionError,
    SingularMetric,
    StepError,
    ThermoflowError,
)
from .specfun import EvalSettings, gamma, polylog
from .tensors import SymTensor2, SymTensor3
from .systems import (
    ClassicalIdealGasTP,
    ClassicalRigidGas,
    DualState,
    QuadraticToy,
    QuantumRegimeWarning,
    QuantumRigidGas,
    State,
    ThermoSystem,
)
from .geometry import Curve, TangentVec, cubic_form, curve_length, grad_divergence, norm_sq
from .flow import DrivenSpec, RelaxSpec, Trajectory, driven_flow, relax_analytic, relax_ode
from .analysis import (
    AsymmetryReport,
    EquidistantPair,
    classify_asymmetry,
    horse_carrot_audit,
    isobaric_product_check,
    mpemba_scenario,
    solve_equidistant,
    tur_audit,
)

__version__ = "0.1.0"

"""Fermionic excitation circuits with encoding-aware shift-rule gradients."""

from .autodiff import (
    EXACT4,
    QUBIT,
    REAL2,
    Constant,
    Expectation,
    GradientScheme,
    Objective,
    finite_difference,
    grad,
    gradient,
)
from .fermion import JW, Excitation, FermionOperator, JordanWigner, jordan_wigner
from .io import ProblemFile, load_problem
from .optimize import (
    AnsatzLayout,
    ExcitedStateTask,
    OperatorPool,
    adapt_vqe,
    excited_adapt,
    excited_objective,
    make_pool,
    minimize,
    prepare_reference,
    vqe,
)
from .pauli import PauliString, PauliSum, pauli_sum
from .simulator import (
    AllZeroProjector,
    BasisFlip,
    Circuit,
    FermionicExcitation,
    NullspacePhase,
    PauliRotation,
    Statevector,
    circuit,
    expectation,
    overlap_squared,
    simulate,
)

__version__ = "0.1.0"

"""Imaginary-time and Krylov-subspace eigensolvers for few-qubit systems."""

__version__ = "0.1.0"

from .pauli import (
    DensityMatrix,
    PauliString,
    PauliSum,
    QuantumState,
    apply_nonunitary_exponential,
    apply_pauli_exponential,
    basis_state,
    expectation,
    pauli_decompose,
    pauli_strings,
    pauli_sum,
)
from .hamiltonians import (
    DeuteronParams,
    H2CoefficientTable,
    OneBodyMatrix,
    deuteron_hamiltonian,
    h2_hamiltonian,
    h2_local_terms,
    ho_one_body_matrix,
    jordan_wigner_one_body,
    load_builtin_h2_coefficients,
    load_h2_coefficients,
)
from .backends import (
    CircuitTemplate,
    EnergyEstimate,
    ExpectationEstimate,
    NoiseModel,
    measure_energy,
    noisy_density_simulation,
    prepare_state,
    sample_pauli_expectation,
)
from .qite import (
    CompressionResult,
    ConditioningError,
    OperatorPool,
    QiteStepSolution,
    QiteTrajectory,
    build_pool,
    exact_imaginary_time_trajectory,
    qite_run,
    qite_step,
    single_step_compress,
)
from .qlanczos import (
    KrylovSpace,
    QlanczosResult,
    StabilizationError,
    build_krylov,
    build_krylov_sampled,
    solve,
    stabilize,
)
from .mitigation import (
    CalibrationError,
    ReadoutCalibration,
    RichardsonFit,
    RichardsonSeries,
    calibrate_readout,
    calibration_from_counts,
    richardson_extrapolate,
    roem_correct,
)
from .luscher import (
    LuscherConstants,
    LuscherFit,
    extrapolation_table,
    fit_luscher,
)

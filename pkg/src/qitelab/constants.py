"""Central table of numerical tolerances and defaults.

Every floating-point tolerance used by the library lives here so that the
meaning of "equal" is consistent across modules and tests.
"""

# Exact algebraic identities (Pauli algebra, channel inversion, fits on
# polynomial data).
ALGEBRAIC_TOL = 1e-12

# Comparisons between composed evolutions (split vs. combined imaginary time,
# replicated vs. bare circuits).
EVOLUTION_TOL = 1e-10

# State and density-matrix validation.
STATE_NORM_TOL = 1e-12
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
DENSITY_EIGENVALUE_FLOOR = -1e-10

# Expectation values of Hermitian observables: residual imaginary part that
# is tolerated (and discarded) before reporting the real value.
IMAG_EXPECTATION_TOL = 1e-10

# Linear solve for the unitary-update coefficients.
RIDGE_DEFAULT = 1e-8

# Krylov-space stabilization defaults.
OVERLAP_THRESHOLD_DEFAULT = 0.99
EIG_CUTOFF_DEFAULT = 1e-8

# Lookup tolerance for bond lengths in the molecular coefficient table.
BOND_LENGTH_LOOKUP_TOL = 1e-9

# Nonlinear basis-extrapolation fit: max residual accepted as "converged"
# for exactly determined systems.
FIT_RESIDUAL_TOL = 1e-6

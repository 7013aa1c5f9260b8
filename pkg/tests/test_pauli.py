import itertools

import numpy as np
import pytest
import scipy.linalg

from qitelab import (
    DensityMatrix,
    PauliString,
    PauliSum,
    QuantumState,
    apply_nonunitary_exponential,
    apply_pauli_exponential,
    basis_state,
    deuteron_hamiltonian,
    expectation,
    pauli_decompose,
    pauli_strings,
    pauli_sum,
)

# independent single-qubit matrices for oracle builds
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
SINGLE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_oracle(letters):
    out = np.eye(1, dtype=complex)
    for letter in letters:
        out = np.kron(out, SINGLE[letter])
    return out


@pytest.mark.parametrize("n", [1, 2])
def test_every_string_squares_to_identity(n):
    for letters in itertools.product("IXYZ", repeat=n):
        matrix = PauliString("".join(letters)).matrix()
        assert np.max(np.abs(matrix @ matrix - np.eye(2**n))) < 1e-12


def test_string_matrix_matches_kron_oracle():
    for letters in ("XZY", "IYX", "ZZI"):
        assert np.allclose(PauliString(letters).matrix(), kron_oracle(letters))


def test_invalid_letters_rejected():
    with pytest.raises(ValueError, match="invalid Pauli letters"):
        PauliString("XQ")
    with pytest.raises(ValueError):
        PauliString("")


def test_sum_merges_duplicates_and_drops_zeros():
    total = PauliSum.from_terms(2, [(1.0, "XY"), (2.5, "XY"), (-3.5, "XY"), (0.5, "ZI")])
    assert total.coefficients() == {"ZI": 0.5}


def test_sum_rejects_mismatched_lengths():
    with pytest.raises(ValueError, match="acts on"):
        PauliSum.from_terms(2, [(1.0, "XYZ")])


def test_basis_state_convention():
    assert basis_state(2, "00").amplitudes[0] == 1.0
    # leftmost label character is qubit 0 and the most significant bit
    assert basis_state(2, "10").amplitudes[2] == 1.0
    assert basis_state(3, "100").amplitudes[4] == 1.0


def test_basis_state_errors():
    with pytest.raises(ValueError, match="length"):
        basis_state(2, "101")
    with pytest.raises(ValueError, match="non-binary"):
        basis_state(2, "1x")


def test_expectation_z_eigenstate():
    assert expectation(basis_state(2, "10"), PauliString("ZI")) == pytest.approx(-1.0)


def test_expectation_deuteron_initial_state(deuteron2):
    """<10|H|10> is the lowest oscillator level: 0.75*hbar_omega + v0."""
    state = basis_state(2, "10")
    value = expectation(state, deuteron2["full"])
    assert value == pytest.approx(0.75 * 7.0 - 5.686, abs=1e-12)
    dense = deuteron2["full"].matrix()
    assert value == pytest.approx(
        np.vdot(state.amplitudes, dense @ state.amplitudes).real, abs=1e-12
    )


def test_expectation_bell_symmetry():
    amps = np.zeros(4, dtype=complex)
    amps[1] = amps[2] = 1 / np.sqrt(2)
    state = QuantumState(2, amps)
    assert expectation(state, PauliString("XX")) == pytest.approx(1.0)


def test_expectation_linear_in_observable():
    rng = np.random.default_rng(7)
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    state = QuantumState(2, amps / np.linalg.norm(amps))
    o1 = pauli_sum(2, {"XY": 0.3, "ZI": -1.2})
    o2 = pauli_sum(2, {"YY": 0.9, "IZ": 0.4, "XY": 1.1})
    a, b = 0.7, -2.3
    combined = a * o1 + b * o2
    assert expectation(state, combined) == pytest.approx(
        a * expectation(state, o1) + b * expectation(state, o2), abs=1e-12
    )


def test_expectation_dimension_mismatch():
    with pytest.raises(ValueError, match="qubits"):
        expectation(basis_state(3, "000"), PauliString("ZI"))


def test_exponential_zero_angle_is_identity():
    state = basis_state(2, "10")
    generator = pauli_sum(2, {"XY": 1.0, "YX": -1.0})
    out = apply_pauli_exponential(state, generator, 0.0)
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-15)


def test_exponential_givens_rotation():
    """G = (X0Y1 - X1Y0)/2 generates a pi/2 swap |10> -> |01>."""
    generator = pauli_sum(2, {"XY": 0.5, "YX": -0.5})
    out = apply_pauli_exponential(basis_state(2, "10"), generator, np.pi / 2)
    oracle = scipy.linalg.expm(-1j * (np.pi / 2) * generator.matrix()) @ basis_state(
        2, "10"
    ).amplitudes
    assert np.allclose(out.amplitudes, oracle, atol=1e-12)
    assert abs(out.amplitudes[1]) == pytest.approx(1.0, abs=1e-12)


def test_exponential_angles_compose():
    generator = pauli_sum(2, {"XY": 1.0, "YX": -1.0})
    state = basis_state(2, "10")
    a, b = 0.31, -0.17
    once = apply_pauli_exponential(state, generator, a + b)
    twice = apply_pauli_exponential(
        apply_pauli_exponential(state, generator, a), generator, b
    )
    assert np.allclose(once.amplitudes, twice.amplitudes, atol=1e-12)


def test_nonunitary_zero_tau():
    state = basis_state(2, "10")
    out, norm = apply_nonunitary_exponential(state, pauli_sum(2, {"ZI": 1.0}), 0.0)
    assert norm == pytest.approx(1.0)
    assert np.allclose(out.amplitudes, state.amplitudes)


def test_nonunitary_eigenstate_decay():
    h = pauli_sum(2, {"ZI": 2.0})
    state = basis_state(2, "10")  # eigenvalue -2
    out, norm = apply_nonunitary_exponential(state, h, 0.7)
    assert norm == pytest.approx(np.exp(-0.7 * -2.0), rel=1e-12)
    assert np.allclose(np.abs(out.amplitudes), np.abs(state.amplitudes))


def test_nonunitary_negative_tau_rejected():
    with pytest.raises(ValueError, match="non-negative"):
        apply_nonunitary_exponential(basis_state(1, "0"), pauli_sum(1, {"Z": 1.0}), -0.1)


def test_nonunitary_long_time_projects_to_ground(deuteron2):
    state, _ = apply_nonunitary_exponential(basis_state(2, "10"), deuteron2["full"], 50.0)
    dense = deuteron2["full"].matrix()
    eigenvalues, eigenvectors = np.linalg.eigh(dense)
    ground = eigenvectors[:, 0]
    assert abs(np.vdot(ground, state.amplitudes)) == pytest.approx(1.0, abs=1e-10)


def test_nonunitary_composition(deuteron2):
    state = basis_state(2, "10")
    h = deuteron2["full"]
    combined, norm = apply_nonunitary_exponential(state, h, 0.8)
    first, n1 = apply_nonunitary_exponential(state, h, 0.5)
    second, n2 = apply_nonunitary_exponential(first, h, 0.3)
    assert np.allclose(combined.amplitudes, second.amplitudes, atol=1e-10)
    assert norm == pytest.approx(n1 * n2, rel=1e-10)


@pytest.mark.parametrize("n_basis", [2, 3])
def test_energy_monotone_along_exact_flow(n_basis):
    full, _ = deuteron_hamiltonian(n_basis)
    psi0 = basis_state(n_basis, "1" + "0" * (n_basis - 1))
    previous = expectation(psi0, full)
    for tau in np.linspace(0.04, 2.0, 50):
        state, _ = apply_nonunitary_exponential(psi0, full, tau)
        energy = expectation(state, full)
        assert energy <= previous + 1e-10
        previous = energy


def test_state_norm_validation():
    with pytest.raises(ValueError, match="norm"):
        QuantumState(1, np.array([1.0, 1.0]))


def test_density_matrix_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(1, np.array([[0.5, 0.5], [0.1, 0.5]]))
    with pytest.raises(ValueError, match="trace"):
        DensityMatrix(1, np.eye(2))
    with pytest.raises(ValueError, match="negative eigenvalue"):
        DensityMatrix(1, np.diag([1.5, -0.5]))


def test_density_from_state():
    rho = DensityMatrix.from_state(basis_state(2, "10"))
    assert rho.matrix[2, 2] == pytest.approx(1.0)
    assert np.trace(rho.matrix) == pytest.approx(1.0)


def test_pauli_decompose_roundtrip():
    rng = np.random.default_rng(11)
    raw = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    hermitian = raw + raw.conj().T
    decomposed = pauli_decompose(hermitian, 3)
    assert np.max(np.abs(decomposed.matrix() - hermitian)) < 1e-10


def test_pauli_decompose_rejects_nonhermitian():
    with pytest.raises(ValueError, match="Hermitian"):
        pauli_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)


def test_pauli_strings_count_and_order():
    strings = pauli_strings(2)
    assert len(strings) == 16
    assert strings[0].letters == "II"
    assert [s.letters for s in strings[:5]] == ["II", "IX", "IY", "IZ", "XI"]

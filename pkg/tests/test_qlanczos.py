import numpy as np
import pytest

from qitelab import (
    apply_nonunitary_exponential,
    basis_state,
    expectation,
    h2_hamiltonian,
    pauli_sum,
)
from qitelab.backends import NoiseModel
from qitelab.mitigation import calibrate_readout
from qitelab.qite import (
    ConditioningError,
    exact_imaginary_time_trajectory,
    qite_run,
    single_step_compress,
)
from qitelab.qlanczos import (
    KrylovSpace,
    StabilizationError,
    build_krylov,
    build_krylov_sampled,
    solve,
    stabilize,
)


@pytest.fixture(scope="module")
def exact_space_n2(deuteron2):
    trajectory = exact_imaginary_time_trajectory(
        deuteron2["psi0"], deuteron2["full"], 0.05, 4
    )
    return build_krylov(trajectory, 4)


def test_overlap_has_unit_diagonal(exact_space_n2):
    assert np.allclose(np.diag(exact_space_n2.overlap), 1.0, atol=1e-12)
    assert np.allclose(exact_space_n2.overlap, exact_space_n2.overlap.T, atol=1e-10)


def test_eigenstate_trajectory_gives_proportional_matrices():
    h = pauli_sum(2, {"ZI": 1.5, "IZ": -0.5})
    eigenstate = basis_state(2, "10")  # eigenvalue -1.5 - (-0.5)... = -1.0
    trajectory = exact_imaginary_time_trajectory(eigenstate, h, 0.1, 4)
    space = build_krylov(trajectory, 4)
    energy = expectation(eigenstate, h)
    assert np.allclose(space.hamiltonian_matrix, energy * space.overlap, atol=1e-12)


def test_offdiagonal_overlap_matches_direct_statevectors(deuteron2, exact_space_n2):
    """T[0, 2] from the norm recursion equals the overlap of the normalized
    imaginary-time states computed directly."""
    phi0 = deuteron2["psi0"]
    phi2, _ = apply_nonunitary_exponential(phi0, deuteron2["full"], 2 * 0.05)
    direct = float(np.real(phi0.overlap(phi2)))
    recursion = exact_space_n2.overlap[0, 1]
    assert recursion == pytest.approx(direct, abs=1e-6)


def test_build_rejects_odd_or_long_lmax(deuteron2):
    trajectory = exact_imaginary_time_trajectory(deuteron2["psi0"], deuteron2["full"], 0.05, 4)
    with pytest.raises(ValueError, match="even"):
        build_krylov(trajectory, 3)
    with pytest.raises(ValueError, match="steps"):
        build_krylov(trajectory, 6)


def _synthetic_space(overlap, hmat, states, hamiltonian, delta_tau=0.1):
    indices = tuple(range(0, 2 * len(states) - 1, 2))
    return KrylovSpace(
        delta_tau=delta_tau,
        hamiltonian=hamiltonian,
        indices=indices,
        chain_norms=tuple(1.0 for _ in range(indices[-1] + 1)),
        overlap=np.asarray(overlap, dtype=float),
        hamiltonian_matrix=np.asarray(hmat, dtype=float),
        states=tuple(states),
    )


def test_stabilize_discards_duplicate_vector(deuteron2):
    psi = deuteron2["psi0"]
    h = deuteron2["full"]
    value = expectation(psi, h)
    space = _synthetic_space(
        [[1.0, 1.0], [1.0, 1.0]],
        [[value, value], [value, value]],
        [psi, psi],
        h,
    )
    with pytest.raises(StabilizationError):
        stabilize(space, overlap_threshold=0.99)


def test_stabilize_keeps_orthonormal_vectors(deuteron2):
    h = deuteron2["full"]
    states = [basis_state(2, "10"), basis_state(2, "01")]
    space = _synthetic_space(
        np.eye(2),
        np.diag([expectation(s, h) for s in states]),
        states,
        h,
    )
    stabilized = stabilize(space, overlap_threshold=0.99)
    assert stabilized.selected == (0, 2)
    assert stabilized.condition_report["discarded_by_overlap"] == []
    assert stabilized.condition_report["projected_out"] == 0


def test_stabilize_survivors_for_deuteron(exact_space_n2):
    stabilized = stabilize(exact_space_n2)
    assert len(stabilized.selected) >= 2


def test_stabilize_parameter_validation(exact_space_n2):
    with pytest.raises(ValueError):
        stabilize(exact_space_n2, overlap_threshold=1.5)
    with pytest.raises(ValueError):
        stabilize(exact_space_n2, eig_cutoff=0.0)


def test_solve_single_vector(deuteron2):
    trajectory = exact_imaginary_time_trajectory(deuteron2["psi0"], deuteron2["full"], 0.05, 1)
    space = build_krylov(trajectory, 0)
    result = solve(space)
    reference = expectation(deuteron2["psi0"], deuteron2["full"])
    assert result.energies_from_eigenvalues[0] == pytest.approx(reference, abs=1e-12)
    assert result.energies_from_expectation[0] == pytest.approx(reference, abs=1e-12)


def test_routes_agree_for_exact_inputs(exact_space_n2, deuteron2):
    result = solve(stabilize(exact_space_n2))
    assert result.energies_from_expectation[0] == pytest.approx(
        result.energies_from_eigenvalues[0], abs=1e-6
    )
    assert result.energies_from_expectation[0] == pytest.approx(
        deuteron2["exact_ground"], abs=1e-9
    )


def test_qite_backed_space_reaches_ground(deuteron2):
    trajectory = qite_run(deuteron2["psi0"], deuteron2["groups"], 0.05, 4, deuteron2["pool"])
    result = solve(stabilize(build_krylov(trajectory, 4)))
    assert result.ground_energy == pytest.approx(-1.749, abs=0.01)


def test_h2_sector_eigenvalues(h2_table):
    r = h2_table.bond_lengths[9]
    hamiltonian = h2_hamiltonian(h2_table, r)
    matrix = hamiltonian.matrix()
    sector00 = np.linalg.eigvalsh(
        np.array([[matrix[0, 0], matrix[0, 3]], [matrix[3, 0], matrix[3, 3]]]).real
    )
    sector01 = np.linalg.eigvalsh(
        np.array([[matrix[1, 1], matrix[1, 2]], [matrix[2, 1], matrix[2, 2]]]).real
    )
    for label, sector in (("00", sector00), ("01", sector01)):
        trajectory = exact_imaginary_time_trajectory(
            basis_state(2, label), hamiltonian, 2.0, 4
        )
        result = solve(
            stabilize(
                build_krylov(trajectory, 4),
                overlap_threshold=0.999999,
                eig_cutoff=1e-12,
            )
        )
        energies = sorted(result.energies_from_expectation)
        assert energies[0] == pytest.approx(sector[0], abs=1e-3)
        assert energies[-1] == pytest.approx(sector[1], abs=1e-3)


def test_variational_sandwich(deuteron2):
    trajectory = qite_run(deuteron2["psi0"], deuteron2["groups"], 0.05, 4, deuteron2["pool"])
    result = solve(stabilize(build_krylov(trajectory, 4)))
    assert result.ground_energy >= deuteron2["exact_ground"] - 1e-8
    assert result.ground_energy <= min(trajectory.energies) + 1e-8


def test_adding_vectors_never_raises_ground_energy(deuteron2):
    trajectory = exact_imaginary_time_trajectory(deuteron2["psi0"], deuteron2["full"], 0.05, 4)
    small = solve(
        stabilize(build_krylov(trajectory, 2), overlap_threshold=0.999999, eig_cutoff=1e-12)
    )
    large = solve(
        stabilize(build_krylov(trajectory, 4), overlap_threshold=0.999999, eig_cutoff=1e-12)
    )
    assert large.ground_energy <= small.ground_energy + 1e-10


def test_norm_recursion_matches_direct_norms(deuteron2, exact_space_n2):
    """c_l from the recursion equals 1 / ||exp(-l dtau H)|psi0>|| directly."""
    for l in range(1, 5):
        _, norm = apply_nonunitary_exponential(
            deuteron2["psi0"], deuteron2["full"], l * 0.05
        )
        assert exact_space_n2.chain_norms[l] == pytest.approx(1.0 / norm, abs=1e-8)


def test_indefinite_overlap_raises(deuteron2):
    psi = deuteron2["psi0"]
    space = _synthetic_space(
        [[1.0, 2.0], [2.0, 1.0]],  # eigenvalues 3 and -1
        [[0.0, 0.0], [0.0, 0.0]],
        [psi, psi],
        deuteron2["full"],
    )
    with pytest.raises(ConditioningError, match="positive definite"):
        solve(space)


def test_sampled_space_tracks_exact_without_noise(deuteron2):
    trajectory = qite_run(deuteron2["psi0"], deuteron2["groups"], 0.05, 4, deuteron2["pool"])
    templates = single_step_compress(trajectory).templates
    reference = build_krylov(trajectory, 4)
    sampled = build_krylov_sampled(
        trajectory, 4, [None, *templates], shots=200_000, seed=42
    )
    assert np.max(np.abs(sampled.overlap - reference.overlap)) < 0.01
    result = solve(stabilize(sampled))
    assert result.ground_energy == pytest.approx(deuteron2["exact_ground"], abs=0.02)


def test_sampled_space_with_noise_and_correction(deuteron2):
    trajectory = qite_run(deuteron2["psi0"], deuteron2["groups"], 0.05, 4, deuteron2["pool"])
    templates = single_step_compress(trajectory).templates
    noise = NoiseModel.uniform(p01=0.03, p10=0.03, cnot_depolarizing=0.02)
    calibration = calibrate_readout(2, noise, 8192, seed=11)
    space = build_krylov_sampled(
        trajectory, 4, [None, *templates], shots=8192, seed=12,
        noise=noise, calibration=calibration,
    )
    result = solve(stabilize(space))
    assert result.condition_report["sampled"] is True
    assert result.ground_energy == pytest.approx(deuteron2["exact_ground"], abs=0.1)


def test_result_serialization(deuteron2, exact_space_n2):
    result = solve(stabilize(exact_space_n2))
    payload = result.to_json_dict()
    assert set(payload) >= {
        "energies_from_eigenvalues",
        "energies_from_expectation",
        "eigenvectors",
        "selected",
        "condition_report",
    }
    assert payload["source_digest"]

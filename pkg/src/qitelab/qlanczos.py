"""Krylov-subspace eigensolver on imaginary-time-evolved states.

Krylov vectors are the trajectory states at even step indices l; overlap and
Hamiltonian matrix elements follow from the norm recursion

    c_0 = 1,   1 / c_{r+1}^2 = <Phi_r| exp(-2 dtau H) |Phi_r> / c_r^2,

so that T[l, l'] = c_l c_{l'} / c_r^2 and H[l, l'] = T[l, l'] <Phi_r|H|Phi_r>
with r = (l + l') / 2 (the chain of norms is kept at every integer r for
exactly this reason).  The generalized eigenproblem H x = E T x is solved on
a stabilized subspace; energies are reported both as raw eigenvalues and as
expectation values of the reconstructed eigenvectors, the latter being the
numerically robust route.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .backends import (
    CircuitTemplate,
    NoiseModel,
    measure_energy,
)
from .constants import EIG_CUTOFF_DEFAULT, OVERLAP_THRESHOLD_DEFAULT
from .mitigation import ReadoutCalibration, roem_correct
from .pauli import (
    PauliSum,
    QuantumState,
    expectation,
    hermitian_eigensystem,
    normalized_state,
    pauli_decompose,
)
from .qite import ConditioningError, QiteTrajectory


class StabilizationError(RuntimeError):
    """Fewer than two Krylov vectors survived stabilization."""


@dataclass(frozen=True)
class KrylovSpace:
    """Even-index Krylov vectors with their overlap and Hamiltonian matrices."""

    delta_tau: float
    hamiltonian: PauliSum
    indices: tuple[int, ...]
    chain_norms: tuple[float, ...]  # c_r for every integer r up to l_max
    overlap: np.ndarray = field(repr=False)  # T[l, l']
    hamiltonian_matrix: np.ndarray = field(repr=False)  # H[l, l']
    states: tuple[QuantumState, ...] = field(repr=False)
    selected: tuple[int, ...] = ()
    projection: np.ndarray | None = field(default=None, repr=False)
    condition_report: dict = field(default_factory=dict)
    source_digest: str = ""

    def __post_init__(self) -> None:
        if not self.selected:
            object.__setattr__(self, "selected", self.indices)

    @property
    def norms(self) -> tuple[float, ...]:
        """c_l for the Krylov indices themselves."""
        return tuple(self.chain_norms[l] for l in self.indices)

    def position(self, l: int) -> int:
        return self.indices.index(l)

    def to_json_dict(self) -> dict:
        return {
            "delta_tau": self.delta_tau,
            "indices": list(self.indices),
            "selected": list(self.selected),
            "chain_norms": list(self.chain_norms),
            "overlap": self.overlap.tolist(),
            "hamiltonian_matrix": self.hamiltonian_matrix.tolist(),
            "condition_report": self.condition_report,
            "source_digest": self.source_digest,
        }


@dataclass(frozen=True)
class QlanczosResult:
    """Energies from the generalized eigenproblem and the expectation route."""

    energies_from_eigenvalues: tuple[float, ...]
    energies_from_expectation: tuple[float, ...]
    eigenvectors: tuple[tuple[float, ...], ...]  # rows over selected indices
    selected: tuple[int, ...]
    condition_report: dict
    source_digest: str = ""

    @property
    def ground_energy(self) -> float:
        """Expectation-route ground energy (the primary reported value)."""
        return self.energies_from_expectation[0]

    def to_json_dict(self) -> dict:
        return {
            "energies_from_eigenvalues": list(self.energies_from_eigenvalues),
            "energies_from_expectation": list(self.energies_from_expectation),
            "eigenvectors": [list(v) for v in self.eigenvectors],
            "selected": list(self.selected),
            "condition_report": self.condition_report,
            "source_digest": self.source_digest,
        }


def _check_l_max(trajectory: QiteTrajectory, l_max: int) -> None:
    if l_max % 2 != 0 or l_max < 0:
        raise ValueError("l_max must be a non-negative even integer")
    if trajectory.n_steps < l_max:
        raise ValueError(
            f"trajectory has {trajectory.n_steps} steps, needs at least {l_max}"
        )


def _assemble(
    trajectory: QiteTrajectory,
    l_max: int,
    h_values: Sequence[float],
    w_values: Sequence[float],
) -> tuple[tuple[int, ...], tuple[float, ...], np.ndarray, np.ndarray]:
    indices = tuple(range(0, l_max + 1, 2))
    chain = [1.0]
    for r in range(l_max):
        chain.append(chain[r] / np.sqrt(w_values[r]))
    dim = len(indices)
    overlap = np.eye(dim)
    hmat = np.zeros((dim, dim))
    for i, l in enumerate(indices):
        for j, lp in enumerate(indices):
            r = (l + lp) // 2
            t = chain[l] * chain[lp] / chain[r] ** 2
            overlap[i, j] = t
            hmat[i, j] = t * h_values[r]
    return indices, tuple(chain), overlap, hmat


def build_krylov(trajectory: QiteTrajectory, l_max: int) -> KrylovSpace:
    """Krylov space from a trajectory, with exactly evaluated matrix elements.

    ``<Phi_r|H|Phi_r>`` and ``<Phi_r|exp(-2 dtau H)|Phi_r>`` are computed on
    the trajectory states for every integer r up to ``l_max``.
    """
    _check_l_max(trajectory, l_max)
    hamiltonian = trajectory.hamiltonian
    eigenvalues, eigenvectors = hermitian_eigensystem(hamiltonian)
    weights = np.exp(-2.0 * trajectory.delta_tau * eigenvalues)
    h_values = []
    w_values = []
    for r in range(l_max + 1):
        psi = trajectory.states[r].amplitudes
        h_values.append(expectation(trajectory.states[r], hamiltonian))
        projected = eigenvectors.conj().T @ psi
        w_values.append(float(np.real(np.vdot(projected, weights * projected))))
    indices, chain, overlap, hmat = _assemble(trajectory, l_max, h_values, w_values)
    return KrylovSpace(
        delta_tau=trajectory.delta_tau,
        hamiltonian=hamiltonian,
        indices=indices,
        chain_norms=chain,
        overlap=overlap,
        hamiltonian_matrix=hmat,
        states=tuple(trajectory.states[l] for l in indices),
        source_digest=trajectory.digest(),
    )


def build_krylov_sampled(
    trajectory: QiteTrajectory,
    l_max: int,
    templates: Sequence[CircuitTemplate],
    shots: int,
    seed: int,
    noise: NoiseModel | None = None,
    calibration: ReadoutCalibration | None = None,
) -> KrylovSpace:
    """Krylov space with shot-sampled (optionally noisy, optionally
    readout-corrected) estimates of the matrix-element expectation values.

    ``templates[s]`` must prepare the trajectory state at step ``s``
    (``templates[0]`` is ignored; step 0 is the bare initial state).  The
    exponential weight operator ``exp(-2 dtau H)`` is expanded in the Pauli
    basis and measured term by term, like the Hamiltonian itself.
    """
    _check_l_max(trajectory, l_max)
    if len(templates) < l_max + 1:
        raise ValueError("need one template per trajectory step up to l_max")
    hamiltonian = trajectory.hamiltonian
    eigenvalues, eigenvectors = hermitian_eigensystem(hamiltonian)
    exp_matrix = (
        eigenvectors * np.exp(-2.0 * trajectory.delta_tau * eigenvalues)
    ) @ eigenvectors.conj().T
    exp_operator = pauli_decompose(exp_matrix, hamiltonian.qubit_count)
    rng = np.random.default_rng(seed)
    h_values = []
    w_values = []
    for r in range(l_max + 1):
        source = trajectory.states[0] if r == 0 else templates[r]
        h_values.append(
            _sampled_sum(source, hamiltonian, shots, int(rng.integers(2**63 - 1)), noise, calibration)
        )
        w_values.append(
            _sampled_sum(source, exp_operator, shots, int(rng.integers(2**63 - 1)), noise, calibration)
        )
    indices, chain, overlap, hmat = _assemble(trajectory, l_max, h_values, w_values)
    return KrylovSpace(
        delta_tau=trajectory.delta_tau,
        hamiltonian=hamiltonian,
        indices=indices,
        chain_norms=chain,
        overlap=overlap,
        hamiltonian_matrix=hmat,
        states=tuple(trajectory.states[l] for l in indices),
        condition_report={"sampled": True, "shots": shots, "roem": calibration is not None},
        source_digest=trajectory.digest(),
    )


def _sampled_sum(
    source,
    operator: PauliSum,
    shots: int,
    seed: int,
    noise: NoiseModel | None,
    calibration: ReadoutCalibration | None,
) -> float:
    estimate = measure_energy(source, operator, shots=shots, seed=seed, noise=noise)
    if calibration is None:
        return estimate.energy
    total = 0.0
    for (coefficient, string), term in zip(operator.terms, estimate.per_term):
        if string.is_identity:
            total += coefficient
            continue
        corrected, _ = roem_correct(term.raw_counts, calibration, string)
        total += coefficient * corrected
    return total


def stabilize(
    space: KrylovSpace,
    overlap_threshold: float = OVERLAP_THRESHOLD_DEFAULT,
    eig_cutoff: float = EIG_CUTOFF_DEFAULT,
) -> KrylovSpace:
    """Discard near-dependent Krylov vectors, then project out small
    eigendirections of the surviving overlap matrix.

    Selection is greedy: index 0 always enters, and each later index enters
    only if its overlap with the most recently selected one is below the
    threshold.
    """
    if not 0.0 < overlap_threshold < 1.0:
        raise ValueError("overlap_threshold must lie in (0, 1)")
    if eig_cutoff <= 0.0:
        raise ValueError("eig_cutoff must be positive")
    selected = [space.indices[0]]
    discarded = []
    for l in space.indices[1:]:
        i, j = space.position(l), space.position(selected[-1])
        if abs(space.overlap[i, j]) < overlap_threshold:
            selected.append(l)
        else:
            discarded.append(l)
    if len(selected) < 2:
        raise StabilizationError(
            f"only {len(selected)} Krylov vector(s) survived the overlap screen"
        )
    positions = [space.position(l) for l in selected]
    t_selected = space.overlap[np.ix_(positions, positions)]
    eigenvalues, eigenvectors = np.linalg.eigh(t_selected)
    keep = eigenvalues >= eig_cutoff
    projection = eigenvectors[:, keep]
    report = {
        "overlap_threshold": overlap_threshold,
        "eig_cutoff": eig_cutoff,
        "discarded_by_overlap": discarded,
        "overlap_eigenvalues": eigenvalues.tolist(),
        "projected_out": int(np.count_nonzero(~keep)),
    }
    return replace(
        space,
        selected=tuple(selected),
        projection=projection,
        condition_report={**space.condition_report, **report},
    )


def solve(space: KrylovSpace) -> QlanczosResult:
    """Solve H x = E T x on the stabilized subspace.

    Besides the raw generalized eigenvalues, each eigenvector is
    reconstructed from the attached statevectors and its energy reported as
    an expectation value; for exact inputs the two routes coincide.
    """
    positions = [space.position(l) for l in space.selected]
    t_sel = space.overlap[np.ix_(positions, positions)]
    h_sel = space.hamiltonian_matrix[np.ix_(positions, positions)]
    projection = (
        space.projection if space.projection is not None else np.eye(len(positions))
    )
    t_proj = projection.T @ t_sel @ projection
    h_proj = projection.T @ h_sel @ projection
    if t_proj.size == 0:
        raise ConditioningError("no Krylov directions left after projection")
    min_eig = float(np.linalg.eigvalsh(t_proj).min())
    if min_eig <= 0.0:
        raise ConditioningError(
            f"overlap matrix is not positive definite after projection "
            f"(min eigenvalue {min_eig})"
        )
    eigenvalues, vectors = scipy.linalg.eigh(h_proj, t_proj)
    coefficient_rows = []
    expectation_energies = []
    for column in range(vectors.shape[1]):
        x = projection @ vectors[:, column]
        coefficient_rows.append(tuple(float(v) for v in x))
        amplitudes = np.zeros_like(space.states[0].amplitudes)
        for weight, position in zip(x, positions):
            amplitudes = amplitudes + weight * space.states[position].amplitudes
        reconstructed = normalized_state(space.states[0].qubit_count, amplitudes)
        expectation_energies.append(expectation(reconstructed, space.hamiltonian))
    return QlanczosResult(
        energies_from_eigenvalues=tuple(float(e) for e in eigenvalues),
        energies_from_expectation=tuple(expectation_energies),
        eigenvectors=tuple(coefficient_rows),
        selected=space.selected,
        condition_report=dict(space.condition_report),
        source_digest=space.source_digest,
    )

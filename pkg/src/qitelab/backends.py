"""Expectation-value backends: exact, finite-shot sampling, and noisy
density-matrix simulation of the single-step circuit templates.

The gate-noise model is a two-qubit depolarizing channel of strength
``epsilon`` acting on a CNOT's qubit pair after every physical CNOT.  For
zero-noise extrapolation each logical CNOT is replicated an odd number of
times ``r``; the replicas compose to the logical gate while the noise acts
``r`` times, giving a controllable noise-multiplicity axis.  Readout noise
is a per-qubit bit-flip channel applied at sampling time only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Sequence, Union

import numpy as np

from .pauli import (
    DensityMatrix,
    PauliString,
    PauliSum,
    QuantumState,
    apply_pauli_exponential,
    basis_state,
    expectation,
    hermitian_eigensystem,
)

StructureId = Literal["two_qubit_single_step", "three_qubit_single_step"]

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
_S_DAGGER = np.diag([1.0, -1.0j]).astype(complex)
_BASIS_CHANGE = {
    "I": np.eye(2, dtype=complex),
    "Z": np.eye(2, dtype=complex),
    "X": _HADAMARD,
    "Y": _HADAMARD @ _S_DAGGER,
}

TWO_QUBIT_GENERATOR = PauliSum.from_terms(2, [(1.0, "XY"), (-1.0, "YX")])
THREE_QUBIT_GENERATORS = (
    PauliSum.from_terms(3, [(1.0, "XYI"), (-1.0, "YXI")]),
    PauliSum.from_terms(3, [(1.0, "XZY"), (-1.0, "YZX")]),
)


@dataclass(frozen=True)
class CircuitTemplate:
    """Fixed-depth single-step circuit: rotation angles on a product state.

    ``angles`` are the rotation angles theta; the prepared state is
    ``exp(-i theta/2 G)`` applied to the initial state for the two-qubit
    structure, and ``exp(-i theta1/2 G1) exp(-i theta2/2 G2)`` (G2 first)
    for the three-qubit structure.
    """

    qubit_count: int
    initial_label: str
    angles: tuple[float, ...]
    structure_id: StructureId
    cnot_count_base: int = 0

    def __post_init__(self) -> None:
        expected = {"two_qubit_single_step": (2, 1, 1), "three_qubit_single_step": (3, 2, 4)}
        if self.structure_id not in expected:
            raise ValueError(f"unknown template structure {self.structure_id!r}")
        qubits, n_angles, default_base = expected[self.structure_id]
        if self.qubit_count != qubits:
            raise ValueError(
                f"{self.structure_id} requires {qubits} qubits, got {self.qubit_count}"
            )
        if len(self.angles) != n_angles:
            raise ValueError(
                f"{self.structure_id} requires {n_angles} angle(s), got {len(self.angles)}"
            )
        if len(self.initial_label) != self.qubit_count or set(self.initial_label) - {"0", "1"}:
            raise ValueError(f"invalid initial label {self.initial_label!r}")
        if self.cnot_count_base == 0:
            object.__setattr__(self, "cnot_count_base", default_base)
        if self.cnot_count_base < 1:
            raise ValueError("cnot_count_base must be positive")

    def unitary_segments(self) -> tuple[tuple[PauliSum, float, tuple[tuple[int, int], ...]], ...]:
        """(generator, angle, CNOT pairs carrying noise) in application order."""
        if self.structure_id == "two_qubit_single_step":
            return ((TWO_QUBIT_GENERATOR, self.angles[0], ((0, 1),) * self.cnot_count_base),)
        g1, g2 = THREE_QUBIT_GENERATORS
        first = self.cnot_count_base // 2
        second = self.cnot_count_base - first
        return (
            (g2, self.angles[1], ((0, 2),) * first),
            (g1, self.angles[0], ((0, 1),) * second),
        )


@dataclass(frozen=True)
class NoiseModel:
    """Readout bit-flip probabilities plus per-CNOT depolarizing noise.

    ``readout`` holds per-qubit pairs ``(p01, p10)`` where ``p01`` is the
    probability of reading 0 given a prepared 1 and ``p10`` of reading 1
    given a prepared 0.  A single pair broadcasts to all qubits.
    ``replication_factor`` must be odd so replicated CNOTs compose to the
    logical gate.
    """

    readout: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    cnot_depolarizing: float = 0.0
    replication_factor: int = 1

    def __post_init__(self) -> None:
        for p01, p10 in self.readout:
            if not (0.0 <= p01 <= 1.0 and 0.0 <= p10 <= 1.0):
                raise ValueError("readout probabilities must lie in [0, 1]")
        if not 0.0 <= self.cnot_depolarizing <= 1.0:
            raise ValueError("cnot_depolarizing must lie in [0, 1]")
        if self.replication_factor < 1 or self.replication_factor % 2 == 0:
            raise ValueError("replication_factor must be an odd positive integer")

    @classmethod
    def uniform(
        cls,
        p01: float = 0.0,
        p10: float = 0.0,
        cnot_depolarizing: float = 0.0,
        replication_factor: int = 1,
    ) -> "NoiseModel":
        return cls(((p01, p10),), cnot_depolarizing, replication_factor)

    def with_replication(self, r: int) -> "NoiseModel":
        return replace(self, replication_factor=r)

    def readout_for(self, qubit_count: int) -> tuple[tuple[float, float], ...]:
        if len(self.readout) == qubit_count:
            return self.readout
        if len(self.readout) == 1:
            return self.readout * qubit_count
        raise ValueError(
            f"noise model declares readout for {len(self.readout)} qubits, "
            f"circuit has {qubit_count}"
        )

    @property
    def has_readout_noise(self) -> bool:
        return any(p01 > 0.0 or p10 > 0.0 for p01, p10 in self.readout)


@dataclass(frozen=True)
class ExpectationEstimate:
    """Sampled estimate of a single Pauli expectation value."""

    value: float
    std_error: float
    shots: int
    raw_counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")
        total = sum(self.raw_counts.values())
        if self.raw_counts and total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")


StateSource = Union[QuantumState, DensityMatrix, CircuitTemplate]


def prepare_state(template: CircuitTemplate) -> QuantumState:
    """Ideal (noiseless) state prepared by a template."""
    state = basis_state(template.qubit_count, template.initial_label)
    for generator, angle, _ in template.unitary_segments():
        state = apply_pauli_exponential(state, generator, angle / 2.0)
    return state


def compile_gates(template: CircuitTemplate) -> tuple[tuple, ...]:
    """Explicit gate realization of the two-qubit template.

    A Y rotation by twice the template angle on qubit 1 followed by a single
    CNOT (control qubit 1, target qubit 0) reproduces the template unitary
    exactly on the initial state |10>.
    """
    if template.structure_id != "two_qubit_single_step":
        raise ValueError("an explicit gate list is only defined for the two-qubit template")
    return (("ry", 1, 2.0 * template.angles[0]), ("cnot", 1, 0))


def ry_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cnot_matrix(qubit_count: int, control: int, target: int) -> np.ndarray:
    dim = 2**qubit_count
    out = np.zeros((dim, dim), dtype=complex)
    for index in range(dim):
        control_bit = (index >> (qubit_count - 1 - control)) & 1
        if control_bit:
            flipped = index ^ (1 << (qubit_count - 1 - target))
            out[flipped, index] = 1.0
        else:
            out[index, index] = 1.0
    return out


def gate_list_unitary(qubit_count: int, gates: Sequence[tuple]) -> np.ndarray:
    """Dense unitary of a gate list (little helper for equivalence checks)."""
    dim = 2**qubit_count
    unitary = np.eye(dim, dtype=complex)
    for gate in gates:
        if gate[0] == "ry":
            _, qubit, angle = gate
            op = _embed_single(ry_matrix(angle), qubit_count, qubit)
        elif gate[0] == "cnot":
            _, control, target = gate
            op = cnot_matrix(qubit_count, control, target)
        else:
            raise ValueError(f"unknown gate {gate[0]!r}")
        unitary = op @ unitary
    return unitary


def _embed_single(op: np.ndarray, qubit_count: int, qubit: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for position in range(qubit_count):
        out = np.kron(out, op if position == qubit else np.eye(2, dtype=complex))
    return out


def _unitary_of(generator: PauliSum, half_angle: float) -> np.ndarray:
    eigenvalues, eigenvectors = hermitian_eigensystem(generator)
    return (eigenvectors * np.exp(-1j * half_angle * eigenvalues)) @ eigenvectors.conj().T


def _permuted(rho: np.ndarray, qubit_count: int, perm: Sequence[int]) -> np.ndarray:
    """Reorder qubits of a density matrix so qubit perm[i] moves to slot i."""
    tensor = rho.reshape([2] * (2 * qubit_count))
    axes = list(perm) + [qubit_count + p for p in perm]
    return tensor.transpose(axes).reshape(rho.shape)


def depolarize_pair(
    rho: np.ndarray, qubit_count: int, pair: tuple[int, int], epsilon: float
) -> np.ndarray:
    """Two-qubit depolarizing channel on ``pair``:
    rho -> (1 - eps) rho + eps * (I/4 on the pair) x (partial trace of rho).
    """
    if epsilon == 0.0:
        return rho
    a, b = pair
    rest = [q for q in range(qubit_count) if q not in (a, b)]
    perm = [a, b, *rest]
    moved = _permuted(rho, qubit_count, perm)
    rest_dim = 2 ** len(rest)
    blocks = moved.reshape(4, rest_dim, 4, rest_dim)
    reduced = np.einsum("iaib->ab", blocks)
    mixed = np.kron(np.eye(4, dtype=complex) / 4.0, reduced)
    out = (1.0 - epsilon) * moved + epsilon * mixed
    inverse = np.argsort(perm)
    return _permuted(out, qubit_count, inverse)


def noisy_density_simulation(template: CircuitTemplate, noise: NoiseModel) -> DensityMatrix:
    """Gate-level density-matrix simulation of a template under CNOT noise.

    Single-qubit rotations are noiseless; each logical CNOT is applied
    ``replication_factor`` times with a depolarizing channel on its qubit
    pair after every physical CNOT.  Readout noise is not applied here; it
    belongs to sampling.
    """
    n = template.qubit_count
    state = basis_state(n, template.initial_label)
    rho = np.outer(state.amplitudes, state.amplitudes.conj())
    for generator, angle, pairs in template.unitary_segments():
        unitary = _unitary_of(generator, angle / 2.0)
        rho = unitary @ rho @ unitary.conj().T
        for pair in pairs:
            for _ in range(noise.replication_factor):
                rho = depolarize_pair(rho, n, pair, noise.cnot_depolarizing)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(n, rho)


def _measurement_probabilities(
    source: QuantumState | DensityMatrix, observable: PauliString
) -> np.ndarray:
    """Outcome distribution after rotating each qubit to the observable basis."""
    n = source.qubit_count
    rotation = np.eye(1, dtype=complex)
    for letter in observable.letters:
        rotation = np.kron(rotation, _BASIS_CHANGE[letter])
    if isinstance(source, QuantumState):
        rotated = rotation @ source.amplitudes
        probs = np.abs(rotated) ** 2
    else:
        probs = np.real(np.diag(rotation @ source.matrix @ rotation.conj().T))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _readout_channel(
    probs: np.ndarray, readout: Sequence[tuple[float, float]]
) -> np.ndarray:
    """Push an outcome distribution through independent per-qubit flips."""
    n = len(readout)
    tensor = probs.reshape([2] * n)
    for qubit, (p01, p10) in enumerate(readout):
        flip = np.array([[1.0 - p10, p01], [p10, 1.0 - p01]])
        tensor = np.moveaxis(
            np.tensordot(flip, np.moveaxis(tensor, qubit, 0), axes=(1, 0)), 0, qubit
        )
    return tensor.reshape(-1)


def _parity_signs(qubit_count: int, support: Sequence[int]) -> np.ndarray:
    signs = np.ones(2**qubit_count)
    for index in range(2**qubit_count):
        bits = sum((index >> (qubit_count - 1 - q)) & 1 for q in support)
        if bits % 2:
            signs[index] = -1.0
    return signs


def _counts_dict(counts: np.ndarray, qubit_count: int) -> dict[str, int]:
    return {
        format(index, f"0{qubit_count}b"): int(count)
        for index, count in enumerate(counts)
        if count > 0
    }


def _resolve_state(
    source: StateSource, noise: NoiseModel | None
) -> QuantumState | DensityMatrix:
    if isinstance(source, CircuitTemplate):
        if noise is not None and noise.cnot_depolarizing > 0.0:
            return noisy_density_simulation(source, noise)
        return prepare_state(source)
    return source


def sample_pauli_expectation(
    source: StateSource,
    observable: PauliString,
    shots: int,
    noise: NoiseModel | None = None,
    seed: int | None = 0,
) -> ExpectationEstimate:
    """Finite-shot estimate of a Pauli-string expectation value.

    The measurement basis is rotated per qubit, the outcome distribution of
    the (ideal or noisy) state is sampled ``shots`` times with the seeded
    generator, readout flips are applied if the noise model carries them,
    and the mean parity is returned with its binomial standard error.
    Identity strings are deterministic and skip sampling.
    """
    if observable.is_identity:
        return ExpectationEstimate(value=1.0, std_error=0.0, shots=0, raw_counts={})
    if shots < 1:
        raise ValueError("shots must be positive")
    state = _resolve_state(source, noise)
    if state.qubit_count != observable.qubit_count:
        raise ValueError("observable and state qubit counts differ")
    probs = _measurement_probabilities(state, observable)
    if noise is not None:
        probs = _readout_channel(probs, noise.readout_for(state.qubit_count))
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    signs = _parity_signs(state.qubit_count, observable.support)
    value = float(np.dot(counts, signs)) / shots
    std_error = float(np.sqrt(max(1.0 - value**2, 0.0) / shots))
    return ExpectationEstimate(
        value=value,
        std_error=std_error,
        shots=shots,
        raw_counts=_counts_dict(counts, state.qubit_count),
    )


@dataclass(frozen=True)
class EnergyEstimate:
    """Energy assembled from per-term Pauli estimates."""

    energy: float
    std_error: float
    per_term: tuple[ExpectationEstimate, ...]


def measure_energy(
    source: StateSource,
    hamiltonian: PauliSum,
    shots: int | None = None,
    seed: int | None = 0,
    noise: NoiseModel | None = None,
) -> EnergyEstimate:
    """Energy of a Pauli-sum Hamiltonian on a state source.

    With ``shots`` unset the expectation is exact.  Otherwise every
    non-identity term is sampled independently (identity terms are added
    exactly) and the standard error is the root sum of squares of the
    coefficient-weighted term errors.
    """
    state = _resolve_state(source, noise)
    if shots is None:
        per_term = tuple(
            ExpectationEstimate(
                value=expectation(state, string), std_error=0.0, shots=0
            )
            for _, string in hamiltonian.terms
        )
        energy = sum(c * est.value for (c, _), est in zip(hamiltonian.terms, per_term))
        return EnergyEstimate(energy=float(energy), std_error=0.0, per_term=per_term)
    rng = np.random.default_rng(seed)
    term_seeds = rng.integers(0, 2**63 - 1, size=len(hamiltonian.terms))
    estimates: list[ExpectationEstimate] = []
    energy = 0.0
    variance = 0.0
    for (coefficient, string), term_seed in zip(hamiltonian.terms, term_seeds):
        estimate = sample_pauli_expectation(
            state, string, shots, noise=noise, seed=int(term_seed)
        )
        estimates.append(estimate)
        energy += coefficient * estimate.value
        variance += (coefficient * estimate.std_error) ** 2
    return EnergyEstimate(
        energy=float(energy),
        std_error=float(np.sqrt(variance)),
        per_term=tuple(estimates),
    )

"""Pauli-string algebra, state containers, and exact operator exponentials.

Everything here targets systems of at most a few qubits and uses dense
2^n x 2^n matrices throughout; eigendecomposition of Hermitian generators
(never series truncation) provides exact exponentials.

Index conventions, used consistently across the package:

* Qubit ``j`` of an ``n``-qubit register is character ``j`` (left to right)
  of a bitstring label and tensor factor ``j`` (left to right) of Kronecker
  products.
* The basis index of a label is its value as a binary number, so qubit 0 is
  the most significant bit: ``"10"`` is amplitude index 2, i.e. qubit 0 in
  state 1 and qubit 1 in state 0.

All containers are immutable after construction and all operations are pure
functions, so values can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Union

import numpy as np

from .constants import (
    DENSITY_EIGENVALUE_FLOOR,
    HERMITICITY_TOL,
    IMAG_EXPECTATION_TOL,
    STATE_NORM_TOL,
    TRACE_TOL,
)

PAULI_LETTERS = "IXYZ"

_SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli operators, e.g. ``"XZY"``.

    ``letters[j]`` is the operator acting on qubit ``j``.  The associated
    matrix is Hermitian, unitary, and squares to the identity.
    """

    letters: str

    def __post_init__(self) -> None:
        if not self.letters:
            raise ValueError("Pauli string must act on at least one qubit")
        bad = set(self.letters) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @property
    def qubit_count(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @property
    def support(self) -> tuple[int, ...]:
        """Qubits on which the string acts non-trivially."""
        return tuple(j for j, letter in enumerate(self.letters) if letter != "I")

    def matrix(self) -> np.ndarray:
        return _string_matrix(self.letters)

    def __str__(self) -> str:
        return self.letters


@lru_cache(maxsize=4096)
def _string_matrix(letters: str) -> np.ndarray:
    out = _SINGLE_QUBIT[letters[0]]
    for letter in letters[1:]:
        out = np.kron(out, _SINGLE_QUBIT[letter])
    return _frozen(out)


def pauli_strings(qubit_count: int) -> list[PauliString]:
    """All 4^n Pauli strings on ``qubit_count`` qubits, lexicographic in IXYZ."""
    if qubit_count < 1:
        raise ValueError("qubit_count must be positive")
    strings = [PauliString("".join(p)) for p in _letter_products(qubit_count)]
    return strings


def _letter_products(n: int) -> Iterable[tuple[str, ...]]:
    import itertools

    return itertools.product(PAULI_LETTERS, repeat=n)


TermLike = Union["PauliString", str]


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings on a fixed register.

    Terms are kept in canonical merged form: duplicate strings are combined,
    exact-zero coefficients dropped, and the remainder ordered
    lexicographically by letters.  Real coefficients make the associated
    matrix Hermitian.
    """

    qubit_count: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self) -> None:
        if self.qubit_count < 1:
            raise ValueError("qubit_count must be positive")
        for coeff, string in self.terms:
            if string.qubit_count != self.qubit_count:
                raise ValueError(
                    f"term {string} acts on {string.qubit_count} qubits, "
                    f"expected {self.qubit_count}"
                )
            if not np.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff} for {string}")

    @classmethod
    def from_terms(
        cls, qubit_count: int, terms: Iterable[tuple[float, TermLike]]
    ) -> "PauliSum":
        merged: dict[str, float] = {}
        for coeff, string in terms:
            letters = string.letters if isinstance(string, PauliString) else str(string)
            merged[letters] = merged.get(letters, 0.0) + float(coeff)
        canonical = tuple(
            (coeff, PauliString(letters))
            for letters, coeff in sorted(merged.items())
            if coeff != 0.0
        )
        return cls(qubit_count, canonical)

    @classmethod
    def zero(cls, qubit_count: int) -> "PauliSum":
        return cls(qubit_count, ())

    @classmethod
    def identity(cls, qubit_count: int, coefficient: float = 1.0) -> "PauliSum":
        return cls.from_terms(qubit_count, [(coefficient, "I" * qubit_count)])

    def coefficient(self, string: TermLike) -> float:
        letters = string.letters if isinstance(string, PauliString) else str(string)
        for coeff, term in self.terms:
            if term.letters == letters:
                return coeff
        return 0.0

    def coefficients(self) -> dict[str, float]:
        return {string.letters: coeff for coeff, string in self.terms}

    def matrix(self) -> np.ndarray:
        dim = 2**self.qubit_count
        out = np.zeros((dim, dim), dtype=complex)
        for coeff, string in self.terms:
            out += coeff * string.matrix()
        return out

    def pruned(self, tol: float = 1e-14) -> "PauliSum":
        return PauliSum(
            self.qubit_count,
            tuple((c, s) for c, s in self.terms if abs(c) > tol),
        )

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.qubit_count != self.qubit_count:
            raise ValueError("qubit counts differ")
        return PauliSum.from_terms(
            self.qubit_count, [*self.terms, *other.terms]
        )

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> "PauliSum":
        return PauliSum.from_terms(
            self.qubit_count, [(scalar * c, s) for c, s in self.terms]
        )

    def __mul__(self, scalar: float) -> "PauliSum":
        return self.__rmul__(scalar)

    def __neg__(self) -> "PauliSum":
        return (-1.0) * self

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{c:+.6g}*{s}" for c, s in self.terms)


def pauli_sum(qubit_count: int, terms: Mapping[str, float]) -> PauliSum:
    """Convenience constructor from a ``{letters: coefficient}`` mapping."""
    return PauliSum.from_terms(qubit_count, [(c, s) for s, c in terms.items()])


@dataclass(frozen=True)
class QuantumState:
    """Normalized pure state of ``qubit_count`` qubits."""

    qubit_count: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1).copy()
        if amps.shape != (2**self.qubit_count,):
            raise ValueError(
                f"amplitude vector has length {amps.size}, "
                f"expected {2 ** self.qubit_count}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > STATE_NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1 beyond tolerance")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "QuantumState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "QuantumState") -> float:
        return float(abs(self.overlap(other)) ** 2)


def normalized_state(qubit_count: int, amplitudes: np.ndarray) -> QuantumState:
    """Build a :class:`QuantumState`, normalizing the input vector."""
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = float(np.linalg.norm(amps))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return QuantumState(qubit_count, amps / norm)


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state of ``qubit_count`` qubits (Hermitian, unit trace, PSD)."""

    qubit_count: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        rho = np.asarray(self.matrix, dtype=complex).copy()
        dim = 2**self.qubit_count
        if rho.shape != (dim, dim):
            raise ValueError(f"density matrix shape {rho.shape}, expected {(dim, dim)}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian within tolerance")
        trace = complex(np.trace(rho))
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {trace} deviates from 1")
        eigenvalues = np.linalg.eigvalsh(rho)
        if float(eigenvalues.min()) < DENSITY_EIGENVALUE_FLOOR:
            raise ValueError(
                f"density matrix has negative eigenvalue {eigenvalues.min()}"
            )
        object.__setattr__(self, "matrix", _frozen(rho))

    @classmethod
    def from_state(cls, state: QuantumState) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(state.qubit_count, np.outer(psi, psi.conj()))

    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))


StateLike = Union[QuantumState, DensityMatrix]
ObservableLike = Union[PauliSum, PauliString]


def basis_state(qubit_count: int, label: str) -> QuantumState:
    """Computational basis state for a bitstring label.

    Character ``j`` of the label is the value of qubit ``j`` (leftmost
    character is qubit 0), and the label read as a binary number is the
    amplitude index.
    """
    if len(label) != qubit_count:
        raise ValueError(
            f"label {label!r} has length {len(label)}, expected {qubit_count}"
        )
    if set(label) - {"0", "1"}:
        raise ValueError(f"label {label!r} contains non-binary characters")
    amps = np.zeros(2**qubit_count, dtype=complex)
    amps[int(label, 2)] = 1.0
    return QuantumState(qubit_count, amps)


def basis_label(state: QuantumState, tol: float = 1e-9) -> str:
    """Bitstring label of a computational basis state (inverse of basis_state)."""
    index = int(np.argmax(np.abs(state.amplitudes)))
    if abs(abs(state.amplitudes[index]) - 1.0) > tol:
        raise ValueError("state is not a computational basis state")
    return format(index, f"0{state.qubit_count}b")


def expectation(state: StateLike, observable: ObservableLike) -> float:
    """Exact expectation value of a Hermitian Pauli observable.

    Returns the real part; the imaginary part must be negligible (it is a
    numerical residual for Hermitian observables) and is discarded.
    """
    if isinstance(observable, PauliString):
        observable = PauliSum(observable.qubit_count, ((1.0, observable),))
    if observable.qubit_count != state.qubit_count:
        raise ValueError(
            f"observable acts on {observable.qubit_count} qubits, "
            f"state has {state.qubit_count}"
        )
    matrix = observable.matrix()
    if isinstance(state, QuantumState):
        value = complex(np.vdot(state.amplitudes, matrix @ state.amplitudes))
    else:
        value = complex(np.trace(state.matrix @ matrix))
    if abs(value.imag) > IMAG_EXPECTATION_TOL:
        raise ValueError(f"expectation value has imaginary part {value.imag}")
    return float(value.real)


@lru_cache(maxsize=512)
def _hermitian_eigensystem(operator: PauliSum) -> tuple[np.ndarray, np.ndarray]:
    eigenvalues, eigenvectors = np.linalg.eigh(operator.matrix())
    return _frozen(eigenvalues), _frozen(eigenvectors)


def hermitian_eigensystem(operator: PauliSum) -> tuple[np.ndarray, np.ndarray]:
    """Cached eigendecomposition of a Hermitian Pauli sum."""
    return _hermitian_eigensystem(operator)


def apply_pauli_exponential(
    state: QuantumState, generator: PauliSum, angle: float
) -> QuantumState:
    """Apply ``exp(-i * angle * G)`` for a Hermitian generator ``G`` exactly."""
    if generator.qubit_count != state.qubit_count:
        raise ValueError("generator and state qubit counts differ")
    eigenvalues, eigenvectors = hermitian_eigensystem(generator)
    phases = np.exp(-1j * angle * eigenvalues)
    amps = eigenvectors @ (phases * (eigenvectors.conj().T @ state.amplitudes))
    return normalized_state(state.qubit_count, amps)


def apply_nonunitary_exponential(
    state: QuantumState, h: PauliSum, tau: float
) -> tuple[QuantumState, float]:
    """Apply ``exp(-tau * h)`` and renormalize.

    Returns the normalized image together with the pre-normalization norm
    ``|| exp(-tau h) |psi> ||``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if h.qubit_count != state.qubit_count:
        raise ValueError("operator and state qubit counts differ")
    eigenvalues, eigenvectors = hermitian_eigensystem(h)
    weights = np.exp(-tau * eigenvalues)
    amps = eigenvectors @ (weights * (eigenvectors.conj().T @ state.amplitudes))
    norm = float(np.linalg.norm(amps))
    return normalized_state(state.qubit_count, amps), norm


def pauli_decompose(
    matrix: np.ndarray, qubit_count: int, tol: float = 1e-14
) -> PauliSum:
    """Expand a Hermitian matrix in the Pauli-string basis.

    Coefficients are ``tr(P M) / 2^n``; a non-negligible imaginary part in
    any coefficient means the input was not Hermitian.
    """
    dim = 2**qubit_count
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (dim, dim):
        raise ValueError(f"matrix shape {matrix.shape}, expected {(dim, dim)}")
    terms = []
    for string in pauli_strings(qubit_count):
        coeff = complex(np.trace(string.matrix() @ matrix)) / dim
        if abs(coeff.imag) > IMAG_EXPECTATION_TOL:
            raise ValueError("matrix is not Hermitian: complex Pauli coefficient")
        if abs(coeff.real) > tol:
            terms.append((coeff.real, string))
    return PauliSum(qubit_count, tuple(terms))

"""Model Hamiltonians: deuteron pion-less EFT in a harmonic-oscillator basis
(mapped to qubits with the Jordan-Wigner transformation) and the two-qubit
molecular-hydrogen Hamiltonian built from an ingested coefficient table.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
import numpy as np

from .constants import BOND_LENGTH_LOOKUP_TOL
from .pauli import PauliSum

H2_COEFFICIENT_COLUMNS = ("R", "h0", "h1", "h2", "h3", "h4", "h5")


@dataclass(frozen=True)
class DeuteronParams:
    """Parameters of the pion-less EFT deuteron in the oscillator basis.

    ``lambda_uv`` is the regulator scale the potential was fitted at; it is
    carried for provenance and enters no in-scope formula.
    """

    n_basis: int
    hbar_omega: float = 7.0
    v0: float = -5.686
    lambda_uv: float = 152.0

    def __post_init__(self) -> None:
        if self.n_basis < 1:
            raise ValueError("n_basis must be at least 1")
        if self.hbar_omega <= 0:
            raise ValueError("hbar_omega must be positive")


@dataclass(frozen=True)
class OneBodyMatrix:
    """Symmetric matrix of <n'|T+V|n> in MeV over oscillator levels."""

    n: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float).copy()
        if entries.shape != (self.n, self.n):
            raise ValueError(f"expected {(self.n, self.n)} matrix, got {entries.shape}")
        if not np.allclose(entries, entries.T, atol=1e-12):
            raise ValueError("one-body matrix must be symmetric")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def ho_one_body_matrix(params: DeuteronParams) -> OneBodyMatrix:
    """Kinetic-plus-potential matrix in the oscillator basis.

    Diagonal: hbar_omega/2 * (2n + 3/2) plus the contact potential v0 in the
    (0,0) corner.  The only off-diagonal coupling is between neighbours,
    -hbar_omega/2 * sqrt((n+1)(n+3/2)) between levels n and n+1.
    """
    n = params.n_basis
    t = np.zeros((n, n))
    for level in range(n):
        t[level, level] = 0.5 * params.hbar_omega * (2 * level + 1.5)
        if level + 1 < n:
            coupling = -0.5 * params.hbar_omega * np.sqrt(
                (level + 1) * (level + 1.5)
            )
            t[level, level + 1] = t[level + 1, level] = coupling
    t[0, 0] += params.v0
    return OneBodyMatrix(n, t)


def jordan_wigner_one_body(matrix: OneBodyMatrix | np.ndarray) -> PauliSum:
    """Map a one-body fermionic operator to qubits.

    Number terms become t_nn (I - Z_n)/2; a hopping t_pq between levels
    p < q becomes t_pq/2 times (X_p Z...Z X_q + Y_p Z...Z Y_q) with the
    Z string filling the levels strictly between p and q.
    """
    if isinstance(matrix, OneBodyMatrix):
        entries = matrix.entries
    else:
        entries = np.asarray(matrix, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("expected a square matrix")
        if not np.allclose(entries, entries.T, atol=1e-12):
            raise ValueError("one-body matrix must be symmetric")
    n = entries.shape[0]
    terms: list[tuple[float, str]] = []
    for p in range(n):
        t_pp = entries[p, p]
        if t_pp != 0.0:
            terms.append((0.5 * t_pp, "I" * n))
            terms.append((-0.5 * t_pp, _single_letter(n, p, "Z")))
        for q in range(p + 1, n):
            t_pq = entries[p, q]
            if t_pq != 0.0:
                terms.append((0.5 * t_pq, _hopping_letters(n, p, q, "X")))
                terms.append((0.5 * t_pq, _hopping_letters(n, p, q, "Y")))
    return PauliSum.from_terms(n, terms)


def _single_letter(n: int, position: int, letter: str) -> str:
    return "I" * position + letter + "I" * (n - position - 1)


def _hopping_letters(n: int, p: int, q: int, letter: str) -> str:
    middle = "Z" * (q - p - 1)
    return "I" * p + letter + middle + letter + "I" * (n - q - 1)


def deuteron_hamiltonian(
    n_basis: int, params: DeuteronParams | None = None
) -> tuple[PauliSum, list[PauliSum]]:
    """Deuteron Hamiltonian and its mutually-commuting local groups.

    The groups are the diagonal (identity and Z) part followed by one
    XX+YY pair per hopping bond; members of each group commute, so the
    grouping fixes the Trotter ordering used by the evolution engines.
    """
    if n_basis not in (2, 3):
        raise ValueError("qubit-mapped deuteron supports n_basis 2 or 3")
    if params is None:
        params = DeuteronParams(n_basis=n_basis)
    elif params.n_basis != n_basis:
        raise ValueError("params.n_basis disagrees with n_basis")
    full = jordan_wigner_one_body(ho_one_body_matrix(params))
    diagonal_terms = [
        (c, s) for c, s in full.terms if set(s.letters) <= {"I", "Z"}
    ]
    groups = [PauliSum.from_terms(n_basis, diagonal_terms)]
    bonds = sorted(
        {s.support for _, s in full.terms if not set(s.letters) <= {"I", "Z"}}
    )
    for bond in bonds:
        members = [
            (c, s) for c, s in full.terms
            if s.support == bond and not set(s.letters) <= {"I", "Z"}
        ]
        groups.append(PauliSum.from_terms(n_basis, members))
    return full, groups


class CoefficientTableError(ValueError):
    """Malformed molecular coefficient file."""


@dataclass(frozen=True)
class H2CoefficientTable:
    """Bond-length-indexed coefficients of the two-qubit H2 Hamiltonian."""

    units_note: str
    rows: tuple[tuple[float, ...], ...]  # (R, h0..h5) per row

    def __post_init__(self) -> None:
        if not self.rows:
            raise CoefficientTableError("coefficient table is empty")
        for row in self.rows:
            if len(row) != 7:
                raise CoefficientTableError(
                    f"row {row} has {len(row)} columns, expected 7"
                )
        r_values = [row[0] for row in self.rows]
        if any(b <= a for a, b in zip(r_values, r_values[1:])):
            raise CoefficientTableError("bond lengths must be strictly increasing")

    @property
    def bond_lengths(self) -> tuple[float, ...]:
        return tuple(row[0] for row in self.rows)

    def coefficients(self, r: float) -> tuple[float, ...]:
        for row in self.rows:
            if abs(row[0] - r) <= BOND_LENGTH_LOOKUP_TOL:
                return row[1:]
        raise KeyError(f"bond length {r} not present in the table")


def load_h2_coefficients(path: str | Path) -> H2CoefficientTable:
    """Parse a coefficient CSV.

    Format: UTF-8, comment lines starting with ``#`` (the first one carrying
    ``#units:`` declares the units), a ``R,h0,...,h5`` header, then one row
    of decimal floats per bond length with strictly increasing R.
    """
    path = Path(path)
    units_note = ""
    data_lines: list[str] = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                if stripped.lower().startswith("#units:"):
                    units_note = stripped[len("#units:"):].strip()
                continue
            data_lines.append(stripped)
    if not data_lines:
        raise CoefficientTableError(f"{path}: coefficient table is empty")
    reader = csv.reader(data_lines)
    header = tuple(cell.strip() for cell in next(reader))
    if header != H2_COEFFICIENT_COLUMNS:
        raise CoefficientTableError(
            f"{path}: header {header} does not match {H2_COEFFICIENT_COLUMNS}"
        )
    rows: list[tuple[float, ...]] = []
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) != 7:
            raise CoefficientTableError(
                f"{path}: row {lineno} has {len(cells)} columns, expected 7"
            )
        try:
            rows.append(tuple(float(cell) for cell in cells))
        except ValueError as exc:
            raise CoefficientTableError(f"{path}: row {lineno}: {exc}") from exc
    return H2CoefficientTable(units_note=units_note, rows=tuple(rows))


def builtin_h2_table_path() -> Path:
    """Path of the coefficient table shipped with the package."""
    return Path(
        resources.files("qitelab").joinpath("data/h2_sto3g_coefficients.csv")
    )


def load_builtin_h2_coefficients() -> H2CoefficientTable:
    return load_h2_coefficients(builtin_h2_table_path())


def h2_hamiltonian(table: H2CoefficientTable, r: float) -> PauliSum:
    """Two-qubit H(R) = h0 I + h1 Z0 + h2 Z1 + h3 Z0Z1 + h4 X0X1 + h5 Y0Y1.

    ``r`` must match a tabulated bond length exactly (no interpolation).
    """
    h0, h1, h2, h3, h4, h5 = table.coefficients(r)
    return PauliSum.from_terms(
        2,
        [
            (h0, "II"),
            (h1, "ZI"),
            (h2, "IZ"),
            (h3, "ZZ"),
            (h4, "XX"),
            (h5, "YY"),
        ],
    )


def h2_local_terms(hamiltonian: PauliSum) -> list[PauliSum]:
    """Trotter groups for H2: the diagonal part, then the XX/YY exchange part."""
    diagonal = [(c, s) for c, s in hamiltonian.terms if set(s.letters) <= {"I", "Z"}]
    exchange = [(c, s) for c, s in hamiltonian.terms if not set(s.letters) <= {"I", "Z"}]
    groups = []
    if diagonal:
        groups.append(PauliSum.from_terms(2, diagonal))
    if exchange:
        groups.append(PauliSum.from_terms(2, exchange))
    return groups

"""Measurement-error mitigation: readout-flip inversion and zero-noise
Richardson extrapolation over the CNOT replication axis.

Readout convention: ``p01`` is the probability of measuring 0 given a
prepared 1 and ``p10`` the probability of measuring 1 given a prepared 0,
assumed independent across qubits.  The corrected expectation value of a
Pauli string with support S is

    <P> = sum_x p(x) * prod_{k in S} ((-1)^{x_k} - p_k^-) / (1 - p_k^+),

with p_k^+- = p_k(0|1) +- p_k(1|0); under the independent-flip model this
inverts the channel exactly for any true state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .pauli import PauliString


class CalibrationError(ValueError):
    """Calibration is degenerate (p01 + p10 >= 1 on some qubit)."""


@dataclass(frozen=True)
class ReadoutCalibration:
    """Per-qubit readout flip probabilities with their standard errors."""

    p01: tuple[float, ...]
    p10: tuple[float, ...]
    p01_err: tuple[float, ...]
    p10_err: tuple[float, ...]
    shots: int

    def __post_init__(self) -> None:
        lengths = {len(self.p01), len(self.p10), len(self.p01_err), len(self.p10_err)}
        if len(lengths) != 1:
            raise ValueError("per-qubit calibration arrays must have equal length")
        for qubit, (a, b) in enumerate(zip(self.p01, self.p10)):
            if a + b >= 1.0:
                raise CalibrationError(
                    f"qubit {qubit}: p01 + p10 = {a + b} >= 1, "
                    "corrected-estimator denominator would vanish"
                )

    @property
    def qubit_count(self) -> int:
        return len(self.p01)

    @classmethod
    def ideal(cls, qubit_count: int) -> "ReadoutCalibration":
        zeros = (0.0,) * qubit_count
        return cls(zeros, zeros, zeros, zeros, shots=0)

    def to_json_dict(self) -> dict:
        return {
            "p01": list(self.p01),
            "p10": list(self.p10),
            "p01_err": list(self.p01_err),
            "p10_err": list(self.p10_err),
            "shots": self.shots,
        }


def _binomial_error(p: float, shots: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / shots))


def calibrate_readout(
    qubit_count: int,
    noise,
    shots: int,
    seed: int | None = 0,
) -> ReadoutCalibration:
    """Estimate flip probabilities by preparing each qubit in 0 and in 1.

    ``noise`` is the backend noise model whose readout channel is being
    calibrated (its gate-noise fields are irrelevant here: calibration
    circuits contain no CNOTs).
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    readout = noise.readout_for(qubit_count) if noise is not None else ((0.0, 0.0),) * qubit_count
    rng = np.random.default_rng(seed)
    p01, p10, p01_err, p10_err = [], [], [], []
    for true_p01, true_p10 in readout:
        flips_from_zero = int(rng.binomial(shots, true_p10))
        flips_from_one = int(rng.binomial(shots, true_p01))
        estimate_p10 = flips_from_zero / shots
        estimate_p01 = flips_from_one / shots
        p10.append(estimate_p10)
        p01.append(estimate_p01)
        p10_err.append(_binomial_error(estimate_p10, shots))
        p01_err.append(_binomial_error(estimate_p01, shots))
    return ReadoutCalibration(
        tuple(p01), tuple(p10), tuple(p01_err), tuple(p10_err), shots=shots
    )


def calibration_from_counts(
    prepared_zero: Sequence[Mapping[int, float]],
    prepared_one: Sequence[Mapping[int, float]],
) -> ReadoutCalibration:
    """Build a calibration from per-qubit measurement counts.

    ``prepared_zero[q]`` / ``prepared_one[q]`` map the measured bit (0 or 1)
    to its count for qubit ``q`` prepared in 0 / 1.
    """
    if len(prepared_zero) != len(prepared_one):
        raise ValueError("need counts for every qubit in both preparations")
    p01, p10, p01_err, p10_err = [], [], [], []
    shots_seen = 0
    for counts0, counts1 in zip(prepared_zero, prepared_one):
        shots0 = sum(counts0.values())
        shots1 = sum(counts1.values())
        if shots0 < 1 or shots1 < 1:
            raise ValueError("calibration counts must be non-empty")
        estimate_p10 = counts0.get(1, 0) / shots0
        estimate_p01 = counts1.get(0, 0) / shots1
        p10.append(estimate_p10)
        p01.append(estimate_p01)
        p10_err.append(_binomial_error(estimate_p10, int(shots0)))
        p01_err.append(_binomial_error(estimate_p01, int(shots1)))
        shots_seen = int(max(shots_seen, shots0, shots1))
    return ReadoutCalibration(
        tuple(p01), tuple(p10), tuple(p01_err), tuple(p10_err), shots=shots_seen
    )


def roem_correct(
    raw_counts: Mapping[str, float],
    calibration: ReadoutCalibration,
    observable: PauliString,
) -> tuple[float, float]:
    """Readout-corrected expectation value of a Pauli string.

    ``raw_counts`` maps measured bitstrings (qubit 0 leftmost, in the
    observable's measurement basis) to counts.  Returns the corrected value
    and a first-order propagated standard error combining multinomial count
    statistics with the calibration uncertainties.
    """
    if not raw_counts:
        raise ValueError("raw_counts is empty")
    support = observable.support
    if not support:
        return 1.0, 0.0
    if max(support) >= calibration.qubit_count:
        raise ValueError(
            f"observable acts on qubit {max(support)} but calibration covers "
            f"{calibration.qubit_count} qubit(s)"
        )
    total = float(sum(raw_counts.values()))
    value = 0.0
    second_moment = 0.0
    d_p01 = np.zeros(calibration.qubit_count)
    d_p10 = np.zeros(calibration.qubit_count)
    for bitstring, count in raw_counts.items():
        weight = count / total
        factors = {}
        for qubit in support:
            bit = int(bitstring[qubit])
            sign = 1.0 if bit == 0 else -1.0
            minus = calibration.p01[qubit] - calibration.p10[qubit]
            plus = calibration.p01[qubit] + calibration.p10[qubit]
            factors[qubit] = (sign - minus) / (1.0 - plus)
        product = float(np.prod(list(factors.values())))
        value += weight * product
        second_moment += weight * product**2
        for qubit in support:
            plus = calibration.p01[qubit] + calibration.p10[qubit]
            rest = float(np.prod([f for q, f in factors.items() if q != qubit]))
            d_p01[qubit] += weight * rest * (factors[qubit] - 1.0) / (1.0 - plus)
            d_p10[qubit] += weight * rest * (factors[qubit] + 1.0) / (1.0 - plus)
    count_variance = max(second_moment - value**2, 0.0) / total
    calibration_variance = float(
        np.sum((d_p01 * np.asarray(calibration.p01_err)) ** 2)
        + np.sum((d_p10 * np.asarray(calibration.p10_err)) ** 2)
    )
    return float(value), float(np.sqrt(count_variance + calibration_variance))


@dataclass(frozen=True)
class RichardsonFit:
    """Polynomial fit of an observable against the replication factor."""

    order: int
    coefficients: tuple[float, ...]  # ascending powers of r
    intercept: float
    intercept_std: float

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": list(self.coefficients),
            "intercept": self.intercept,
            "intercept_std": self.intercept_std,
        }


@dataclass(frozen=True)
class RichardsonSeries:
    """Measured (r, value, std_error) points with their extrapolation."""

    points: tuple[tuple[float, float, float], ...]
    order: int
    fit: RichardsonFit | None = None

    def __post_init__(self) -> None:
        r_values = [p[0] for p in self.points]
        if len(set(r_values)) != len(r_values):
            raise ValueError("replication factors must be distinct")
        if len(self.points) < self.order + 1:
            raise ValueError(
                f"need at least {self.order + 1} points for an order-{self.order} fit"
            )

    def to_json_dict(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "order": self.order,
            "fit": self.fit.to_json_dict() if self.fit else None,
        }


def richardson_extrapolate(
    points: Sequence[tuple[float, float, float]], order: int
) -> RichardsonFit:
    """Weighted least-squares polynomial fit in r, extrapolated to r = 0.

    Points are ``(r, value, std_error)``; weights are inverse variances
    (with a tiny floor so exact data is legal), and the intercept standard
    error comes from the weighted normal-equations covariance.  Polynomial
    data of the fit order is reproduced exactly.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if len(points) < order + 1:
        raise ValueError(
            f"underdetermined fit: {len(points)} points for order {order}"
        )
    r = np.array([p[0] for p in points], dtype=float)
    if len(set(r.tolist())) != len(r):
        raise ValueError("replication factors must be distinct")
    y = np.array([p[1] for p in points], dtype=float)
    sigma = np.array([max(p[2], 1e-12) for p in points], dtype=float)
    design = np.vander(r, order + 1, increasing=True)
    weights = 1.0 / sigma
    solution, *_ = np.linalg.lstsq(
        design * weights[:, None], y * weights, rcond=None
    )
    normal = design.T @ np.diag(1.0 / sigma**2) @ design
    covariance = np.linalg.inv(normal)
    return RichardsonFit(
        order=order,
        coefficients=tuple(float(c) for c in solution),
        intercept=float(solution[0]),
        intercept_std=float(np.sqrt(max(covariance[0, 0], 0.0))),
    )

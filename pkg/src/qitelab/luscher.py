"""Infinite-basis extrapolation of finite-oscillator-basis binding energies.

A bound level computed in a truncated oscillator basis of size N feels an
effective hard-wall radius L(N); the finite-size shift is expanded in
exponentials of the binding momentum k_inf:

    E_N - E_inf = A exp(-2 k L)                                   (LO)
                + B k L exp(-4 k L)                               (+ NLO)
                + C exp(-4 k L)                                   (+ N2LO)

with A = (hbar c)^2 k g / m,  B = 2 (hbar c)^2 g^2 / m,
C = (hbar c)^2 k g / mu * (1 - g/k - g^2/(4 k^2) + 2 w2 k g^2),
g = gamma^2, and E_inf = -(hbar c k)^2 / (2 mu).  The nonlinear system is
solved by damped least squares from a grid of starting points; with more
inputs than parameters the minimum-cost fit is returned (residuals then
reflect the tension between orders rather than solver failure).

The mass m entering A and B defaults to the reduced mass, the convention
that reproduces the reference extrapolations of the exactly diagonalized
deuteron levels; the nucleon-average alternative is kept as an option.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np
from scipy.optimize import least_squares

from .constants import FIT_RESIDUAL_TOL

Order = Literal["LO", "NLO", "N2LO"]
MassConvention = Literal["reduced", "nucleon_average"]

_ORDER_PARAMETERS = {"LO": 2, "NLO": 2, "N2LO": 3}


class FitConvergenceError(RuntimeError):
    """No physical root was found from any starting point."""


class AmbiguousRootError(RuntimeError):
    """Multiple distinct physical roots solve the system."""


@dataclass(frozen=True)
class LuscherConstants:
    """Physical constants and tabulated effective hard-wall radii."""

    mu: float = 469.45925            # reduced mass, MeV/c^2
    m_p: float = 938.272             # proton mass, MeV/c^2
    m_n: float = 939.565             # neutron mass, MeV/c^2
    hbar_c: float = 197.326          # MeV fm
    hbar_omega: float = 7.0          # MeV
    hard_wall_radius: Mapping[int, float] = field(
        default_factory=lambda: {1: 9.14, 2: 11.45, 3: 13.38}  # fm
    )

    def __post_init__(self) -> None:
        values = [self.mu, self.m_p, self.m_n, self.hbar_c, self.hbar_omega]
        if any(v <= 0 for v in values) or any(
            v <= 0 for v in self.hard_wall_radius.values()
        ):
            raise ValueError("all constants must be positive")
        if abs(self.mu - (self.m_p + self.m_n) / 4.0) > 1e-3:
            raise ValueError("mu must equal (m_p + m_n)/4 within 1e-3")

    def mass(self, convention: MassConvention) -> float:
        if convention == "reduced":
            return self.mu
        if convention == "nucleon_average":
            return (self.m_p + self.m_n) / 2.0
        raise ValueError(f"unknown mass convention {convention!r}")


DEFAULT_CONSTANTS = LuscherConstants()


@dataclass(frozen=True)
class LuscherFit:
    """Converged extrapolation: parameters, residuals, and E_inf."""

    order: Order
    inputs: tuple[tuple[int, float], ...]
    k_inf: float                      # fm^-1
    gamma: float                      # fm^-1/2
    w2: float | None                  # fm^3, N2LO only
    e_inf: float                      # MeV
    residuals: tuple[float, ...]
    m_convention: MassConvention

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "inputs": {str(n): e for n, e in self.inputs},
            "k_inf": self.k_inf,
            "gamma": self.gamma,
            "w2": self.w2,
            "e_inf": self.e_inf,
            "residuals": list(self.residuals),
            "m_convention": self.m_convention,
        }


def _model_residuals(
    params: np.ndarray,
    inputs: tuple[tuple[int, float], ...],
    order: Order,
    constants: LuscherConstants,
    mass: float,
) -> np.ndarray:
    k, g = params[0], params[1]
    w2 = params[2] if order == "N2LO" else 0.0
    hc2 = constants.hbar_c**2
    e_inf = -(hc2 * k**2) / (2.0 * constants.mu)
    coefficient_a = hc2 * k * g / mass
    coefficient_b = 2.0 * hc2 * g**2 / mass
    coefficient_c = (
        hc2 * k * g / constants.mu
        * (1.0 - g / k - g**2 / (4.0 * k**2) + 2.0 * w2 * k * g**2)
    )
    out = []
    for n, e_n in inputs:
        radius = constants.hard_wall_radius[n]
        model = coefficient_a * np.exp(-2.0 * k * radius)
        if order in ("NLO", "N2LO"):
            model += coefficient_b * k * radius * np.exp(-4.0 * k * radius)
        if order == "N2LO":
            model += coefficient_c * np.exp(-4.0 * k * radius)
        out.append(e_n - e_inf - model)
    return np.asarray(out)


def fit_luscher(
    energies: Mapping[int, float],
    order: Order,
    constants: LuscherConstants = DEFAULT_CONSTANTS,
    m_convention: MassConvention = "reduced",
) -> LuscherFit:
    """Extrapolate finite-basis energies {N: E_N} to the infinite basis.

    LO and NLO determine (k_inf, gamma) and need at least two inputs; N2LO
    adds w2 and needs three.  Exactly determined systems must close to a
    residual below 1e-6 MeV; overdetermined ones return the least-squares
    optimum.  Distinct physical roots of an exactly determined system are
    reported as an error rather than silently picking one.
    """
    if order not in _ORDER_PARAMETERS:
        raise ValueError(f"unknown order {order!r}")
    n_params = _ORDER_PARAMETERS[order]
    inputs = tuple(sorted(energies.items()))
    if len(inputs) < n_params:
        raise ValueError(
            f"{order} needs at least {n_params} (N, E_N) pairs, got {len(inputs)}"
        )
    for n, _ in inputs:
        if n not in constants.hard_wall_radius:
            raise ValueError(f"no tabulated hard-wall radius for N={n}")
    mass = constants.mass(m_convention)
    exactly_determined = len(inputs) == n_params

    best: tuple[float, np.ndarray] | None = None
    roots: list[np.ndarray] = []
    lower = [1e-6, 1e-9] + ([-np.inf] if order == "N2LO" else [])
    upper = [np.inf] * n_params
    for k0 in np.arange(0.1, 1.01, 0.1):
        for g0 in np.arange(0.1, 2.01, 0.1):
            start = [k0, g0] + ([0.0] if order == "N2LO" else [])
            solution = least_squares(
                _model_residuals,
                start,
                bounds=(lower, upper),
                args=(inputs, order, constants, mass),
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
            )
            residual_norm = float(
                np.max(np.abs(_model_residuals(solution.x, inputs, order, constants, mass)))
            )
            if exactly_determined and residual_norm < FIT_RESIDUAL_TOL:
                roots.append(solution.x)
            if best is None or solution.cost < best[0] - 1e-15:
                best = (float(solution.cost), solution.x)

    if exactly_determined:
        if not roots:
            raise FitConvergenceError(
                f"{order} fit did not converge from any starting point"
            )
        distinct: list[np.ndarray] = []
        for root in roots:
            if not any(
                np.allclose(root, other, rtol=1e-4, atol=1e-6) for other in distinct
            ):
                distinct.append(root)
        if len(distinct) > 1:
            raise AmbiguousRootError(
                f"{order} fit has {len(distinct)} distinct physical roots: "
                + ", ".join(np.array2string(r, precision=5) for r in distinct)
            )
        params = distinct[0]
    else:
        assert best is not None
        params = best[1]

    residuals = _model_residuals(params, inputs, order, constants, mass)
    k = float(params[0])
    g = float(params[1])
    e_inf = -((constants.hbar_c * k) ** 2) / (2.0 * constants.mu)
    return LuscherFit(
        order=order,
        inputs=inputs,
        k_inf=k,
        gamma=float(np.sqrt(g)),
        w2=float(params[2]) if order == "N2LO" else None,
        e_inf=float(e_inf),
        residuals=tuple(float(r) for r in residuals),
        m_convention=m_convention,
    )


def extrapolation_table(
    energies: Mapping[int, float],
    constants: LuscherConstants = DEFAULT_CONSTANTS,
    m_convention: MassConvention = "reduced",
) -> dict[int, dict[str, LuscherFit]]:
    """All-orders extrapolation rows from a set of finite-basis energies.

    Row N is fitted from every available level up to N (so row 2 uses
    {E_1, E_2} exactly and row 3 the least-squares fit of {E_1, E_2, E_3});
    the N2LO column appears once three levels are available.
    """
    table: dict[int, dict[str, LuscherFit]] = {}
    available = sorted(energies)
    for n in available:
        if n < 2:
            continue
        subset = {m: energies[m] for m in available if m <= n}
        row = {
            "LO": fit_luscher(subset, "LO", constants, m_convention),
            "NLO": fit_luscher(subset, "NLO", constants, m_convention),
        }
        if len(subset) >= 3:
            row["N2LO"] = fit_luscher(subset, "N2LO", constants, m_convention)
        table[n] = row
    return table

import numpy as np
import pytest

from qitelab.luscher import (
    DEFAULT_CONSTANTS,
    FitConvergenceError,
    LuscherConstants,
    extrapolation_table,
    fit_luscher,
)

# finite-basis deuteron levels: E1 from the lowest oscillator level,
# E2/E3 from dense diagonalization (rounded reference values)
E1 = 0.75 * 7.0 - 5.686
E2 = -1.749
E3 = -2.046


def test_constants_consistency_check():
    with pytest.raises(ValueError, match="mu"):
        LuscherConstants(mu=470.0)
    with pytest.raises(ValueError, match="positive"):
        LuscherConstants(hbar_c=-1.0)


def test_mass_conventions():
    assert DEFAULT_CONSTANTS.mass("reduced") == pytest.approx(469.45925)
    assert DEFAULT_CONSTANTS.mass("nucleon_average") == pytest.approx(938.9185)
    with pytest.raises(ValueError):
        DEFAULT_CONSTANTS.mass("bogus")


def test_two_level_row_reference_values():
    lo = fit_luscher({1: E1, 2: E2}, "LO")
    nlo = fit_luscher({1: E1, 2: E2}, "NLO")
    assert lo.e_inf == pytest.approx(-2.394, abs=0.01)
    assert nlo.e_inf == pytest.approx(-2.194, abs=0.01)


def test_three_level_row_reference_values():
    inputs = {1: E1, 2: E2, 3: E3}
    assert fit_luscher(inputs, "LO").e_inf == pytest.approx(-2.336, abs=0.01)
    assert fit_luscher(inputs, "NLO").e_inf == pytest.approx(-2.199, abs=0.01)
    assert fit_luscher(inputs, "N2LO").e_inf == pytest.approx(-2.209, abs=0.01)


def test_exactly_determined_residuals_vanish():
    for order, inputs in (("LO", {1: E1, 2: E2}), ("NLO", {1: E1, 2: E2}),
                          ("N2LO", {1: E1, 2: E2, 3: E3})):
        fit = fit_luscher(inputs, order)
        assert max(abs(r) for r in fit.residuals) < 1e-6


def test_e_inf_consistent_with_binding_momentum():
    fit = fit_luscher({1: E1, 2: E2}, "LO")
    recomputed = -((DEFAULT_CONSTANTS.hbar_c * fit.k_inf) ** 2) / (
        2.0 * DEFAULT_CONSTANTS.mu
    )
    assert fit.e_inf == pytest.approx(recomputed, abs=1e-9)
    assert fit.k_inf > 0.0
    assert fit.e_inf < 0.0
    assert fit.gamma > 0.0


def test_orders_converge_toward_n2lo():
    inputs = {1: E1, 2: E2, 3: E3}
    lo = fit_luscher(inputs, "LO").e_inf
    nlo = fit_luscher(inputs, "NLO").e_inf
    n2lo = fit_luscher(inputs, "N2LO").e_inf
    assert abs(nlo - n2lo) < abs(lo - n2lo)


def test_w2_only_reported_at_n2lo():
    assert fit_luscher({1: E1, 2: E2}, "NLO").w2 is None
    assert fit_luscher({1: E1, 2: E2, 3: E3}, "N2LO").w2 is not None


def test_insufficient_inputs_rejected():
    with pytest.raises(ValueError, match="pairs"):
        fit_luscher({2: E2}, "LO")
    with pytest.raises(ValueError, match="pairs"):
        fit_luscher({1: E1, 2: E2}, "N2LO")


def test_unknown_order_and_radius():
    with pytest.raises(ValueError, match="order"):
        fit_luscher({1: E1, 2: E2}, "N3LO")
    with pytest.raises(ValueError, match="radius"):
        fit_luscher({1: E1, 4: -2.1}, "LO")


def test_unphysical_ordering_fails_to_converge():
    """Finite-size corrections must shrink with the basis; inverted inputs
    admit no physical root."""
    with pytest.raises(FitConvergenceError):
        fit_luscher({1: -2.0, 2: -1.0}, "LO")


def test_mass_convention_changes_beyond_leading_order():
    reduced = fit_luscher({1: E1, 2: E2}, "NLO", m_convention="reduced")
    nucleon = fit_luscher({1: E1, 2: E2}, "NLO", m_convention="nucleon_average")
    assert abs(reduced.e_inf - nucleon.e_inf) > 0.01
    lo_reduced = fit_luscher({1: E1, 2: E2}, "LO", m_convention="reduced")
    lo_nucleon = fit_luscher({1: E1, 2: E2}, "LO", m_convention="nucleon_average")
    # at leading order the mass only rescales gamma^2
    assert lo_reduced.e_inf == pytest.approx(lo_nucleon.e_inf, abs=1e-6)
    assert lo_nucleon.gamma == pytest.approx(lo_reduced.gamma * np.sqrt(2.0), rel=1e-3)


def test_extrapolation_table_rows():
    table = extrapolation_table({1: E1, 2: E2, 3: E3})
    assert set(table) == {2, 3}
    assert set(table[2]) == {"LO", "NLO"}
    assert set(table[3]) == {"LO", "NLO", "N2LO"}
    assert table[2]["LO"].e_inf == pytest.approx(-2.394, abs=0.01)
    assert table[3]["N2LO"].e_inf == pytest.approx(-2.209, abs=0.01)


def test_fit_serialization():
    fit = fit_luscher({1: E1, 2: E2}, "NLO")
    payload = fit.to_json_dict()
    assert payload["order"] == "NLO"
    assert payload["m_convention"] == "reduced"
    assert payload["inputs"] == {"1": E1, "2": E2}

import math

import numpy as np
import pytest

from helpers import state_from
from revep.config import ComparisonParams, DrugParams, ElectroParams, PulseSchedule, TissueParams
from revep.errors import DegenerateField
from revep.grid import Quantity, ScalarField2D
from revep.membrane import KalamizaParams, MtcParams, pore_fraction
from revep.oracles import (WellMixedSolution, brute_force_step, compare_mtc_curves, uniformity,
                           well_mixed_closed_form, well_mixed_schedule)
from revep.transport import StepCoefficients, ftcs_step

SOLUTION = WellMixedSolution(porosity=0.18, mu0=3.157584e-3, resealing_tau=20.0, c_e0=1.0,
                             c_re0=0.0)


def test_well_mixed_starts_from_the_initial_values() -> None:
    assert well_mixed_closed_form(SOLUTION, 0.0) == pytest.approx((1.0, 0.0), abs=1e-15)
    assert isinstance(SOLUTION.c_e(0.0), float)
    assert SOLUTION.mean == pytest.approx(0.18)


def test_well_mixed_conserves_the_weighted_mean() -> None:
    t = np.linspace(0.0, 200.0, 41)
    c_e, c_re = well_mixed_closed_form(SOLUTION, t)
    np.testing.assert_allclose(0.18 * c_e + 0.82 * c_re, 0.18, rtol=1e-14)
    assert np.all(np.diff(c_re) > 0)
    assert np.all(c_e >= c_re)


def test_well_mixed_satisfies_the_exchange_equations() -> None:
    h = 1e-3
    for t in (0.5, 10.0, 55.0):
        mu = SOLUTION.mu0 * math.exp(-t / SOLUTION.resealing_tau)
        c_e, c_re = well_mixed_closed_form(SOLUTION, t)
        dce = (SOLUTION.c_e(t + h) - SOLUTION.c_e(t - h)) / (2 * h)
        dcre = (SOLUTION.c_re(t + h) - SOLUTION.c_re(t - h)) / (2 * h)
        assert dce == pytest.approx(-(0.82 / 0.18) * mu * (c_e - c_re), abs=1e-9)
        assert dcre == pytest.approx(mu * (c_e - c_re), abs=1e-9)


def test_without_exchange_nothing_moves() -> None:
    still = WellMixedSolution(0.18, 0.0, 20.0, 2.0, 0.5)
    assert well_mixed_closed_form(still, 100.0) == pytest.approx((2.0, 0.5), rel=1e-15)
    equal = WellMixedSolution(0.18, 1e-2, 20.0, 1.0, 1.0)
    assert well_mixed_closed_form(equal, 100.0) == pytest.approx((1.0, 1.0), rel=1e-15)


def test_well_mixed_needs_a_porous_tissue() -> None:
    with pytest.raises(ValueError):
        WellMixedSolution(1.0, 1e-3, 20.0, 1.0, 0.0)


def test_schedule_chains_the_cycles() -> None:
    schedule = PulseSchedule(pulse_count=3, on_time=0.5, off_time=10.0)
    mu0, tau = SOLUTION.mu0, SOLUTION.resealing_tau
    per_cycle = mu0 * 0.5 + mu0 * tau * (1.0 - math.exp(-10.0 / tau))

    c_e, c_re = well_mixed_schedule(SOLUTION, schedule, schedule.total_time)
    expected = SOLUTION.from_integrated_mu(3 * per_cycle)
    assert (c_e, c_re) == pytest.approx(expected, rel=1e-13)

    # Inside the second pulse mu is held at mu0
    t = schedule.cycle_time + 0.25
    c_e, _ = well_mixed_schedule(SOLUTION, schedule, t)
    assert c_e == pytest.approx(SOLUTION.from_integrated_mu(per_cycle + mu0 * 0.25)[0],
                                rel=1e-13)

    # After the pulse the clock restarts
    t = 2 * schedule.cycle_time + 0.5 + 4.0
    c_e, _ = well_mixed_schedule(SOLUTION, schedule, t)
    integrated = 2 * per_cycle + mu0 * 0.5 + mu0 * tau * (1.0 - math.exp(-4.0 / tau))
    assert c_e == pytest.approx(SOLUTION.from_integrated_mu(integrated)[0], rel=1e-13)


def test_schedule_is_continuous_at_cycle_ends() -> None:
    schedule = PulseSchedule(pulse_count=2, on_time=1e-3, off_time=100.0)
    times = np.array([schedule.cycle_time * (1 - 1e-12), schedule.cycle_time])
    c_e, _ = well_mixed_schedule(SOLUTION, schedule, times)
    assert c_e[0] == pytest.approx(c_e[1], rel=1e-10)


def _random_case(rng: np.random.Generator):
    nx = int(rng.integers(3, 12))
    ny = int(rng.integers(3, 12))
    dx = 1.0 / (nx - 1)
    dy = 1.0 / (ny - 1)
    diffusivity = 1e-3
    porosity = float(rng.uniform(0.1, 0.9))
    limit = 0.5 * dx * dx * dy * dy / (diffusivity * (dx * dx + dy * dy))
    dt = float(rng.uniform(0.05, 0.5)) * limit
    mu_max = 0.1 / (dt * (1.0 - porosity) / porosity)
    if rng.random() < 0.5:
        mu = float(rng.uniform(0.0, mu_max))
    else:
        mu = rng.uniform(0.0, mu_max, size=(ny, nx))
    beta = float(rng.uniform(0.0, 1.0))
    literal = bool(rng.random() < 0.3)
    state = state_from(rng.uniform(0.0, 5.0, (ny, nx)), rng.uniform(0.0, 5.0, (ny, nx)), dx, dy)
    coeffs = StepCoefficients.build(dx, dy, dt, diffusivity, porosity, mu)
    return state, mu, coeffs, beta, literal


def test_vectorised_step_matches_the_node_loop() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        state, mu, coeffs, beta, literal = _random_case(rng)
        fast = ftcs_step(state, mu, coeffs, beta, literal)
        slow = brute_force_step(state, mu, coeffs, beta, literal)
        np.testing.assert_allclose(fast.c_e.values, slow.c_e.values, rtol=1e-13, atol=1e-300)
        np.testing.assert_allclose(fast.c_re.values, slow.c_re.values, rtol=1e-13, atol=1e-300)


def test_vectorised_run_matches_the_node_loop() -> None:
    rng = np.random.default_rng(5)
    c_e = np.zeros((5, 5))
    c_e[2, 0] = 10.0
    fast = slow = state_from(c_e, np.zeros((5, 5)), 0.25, 0.25)
    mu = rng.uniform(1e-3, 4e-3, size=(5, 5))
    coeffs = StepCoefficients.build(0.25, 0.25, 2.0, 1e-3, 0.18, mu)
    for _ in range(100):
        fast = ftcs_step(fast, mu, coeffs, beta=0.1)
        slow = brute_force_step(slow, mu, coeffs, beta=0.1)
    np.testing.assert_allclose(fast.c_e.values, slow.c_e.values, rtol=1e-13)
    np.testing.assert_allclose(fast.c_re.values, slow.c_re.values, rtol=1e-13)
    assert fast.time == pytest.approx(200.0)


def _curve_params(tau_kalamiza: float = 20.0):
    tissue, drug = TissueParams(), DrugParams()
    model = MtcParams.from_params(tissue, drug, ElectroParams())
    kalamiza = KalamizaParams.from_params(ComparisonParams(), tissue, drug,
                                          ElectroParams(resealing_tau=tau_kalamiza))
    return model, kalamiza


def test_model_and_kalamiza_curves_are_close() -> None:
    model, kalamiza = _curve_params()
    fp = float(pore_fraction(60.0, ElectroParams()))
    comparison = compare_mtc_curves(model, fp, kalamiza, horizon=100.0)
    assert comparison.prefactor_ratio == pytest.approx(0.97456, rel=1e-4)
    assert comparison.max_relative_gap == pytest.approx(1.0 - comparison.prefactor_ratio,
                                                        rel=1e-10)
    assert comparison.max_relative_gap == pytest.approx(0.0254, abs=1e-3)
    assert len(comparison.times) == 201
    assert comparison.times[-1] == 100.0


def test_matching_prefactors_have_no_gap() -> None:
    model, kalamiza = _curve_params()
    fp = kalamiza.prefactor * model.cell_radius / model.permeability
    comparison = compare_mtc_curves(model, fp, kalamiza, horizon=100.0, samples=11)
    assert comparison.prefactor_ratio == pytest.approx(1.0, rel=1e-12)
    assert comparison.max_relative_gap <= 1e-12


def test_different_resealing_constants_widen_the_gap() -> None:
    model, kalamiza = _curve_params(tau_kalamiza=40.0)
    fp = float(pore_fraction(60.0, ElectroParams()))
    comparison = compare_mtc_curves(model, fp, kalamiza, horizon=100.0)
    assert comparison.prefactor_ratio == pytest.approx(0.97456, rel=1e-4)
    assert comparison.max_relative_gap > 0.9
    with pytest.raises(ValueError):
        compare_mtc_curves(model, fp, kalamiza, horizon=0.0)


def _concentration(values) -> ScalarField2D:
    array = np.array(values, dtype=float)
    return ScalarField2D(array.shape[1], array.shape[0], 1.0, 1.0, array,
                         Quantity.CONCENTRATION)


def test_uniformity() -> None:
    assert uniformity(_concentration(np.full((3, 3), 2.0))) == 0.0
    assert uniformity(_concentration([[1.0, 3.0], [1.0, 3.0]])) == pytest.approx(0.5)
    with pytest.raises(DegenerateField):
        uniformity(_concentration(np.zeros((3, 3))))

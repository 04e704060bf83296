import numpy as np
import pytest

from revep.grid import control_volume_weights
from revep.ledger import LedgerRecorder


def test_control_volumes_cover_the_domain() -> None:
    weights = control_volume_weights(5, 9, 0.25, 0.125)
    assert weights.shape == (9, 5)
    assert weights.sum() == pytest.approx(1.0, rel=1e-15)
    assert weights[0, 0] == pytest.approx(0.25 * 0.125 / 4)
    assert weights[4, 2] == pytest.approx(0.25 * 0.125)


def test_uniform_masses_split_by_porosity() -> None:
    recorder = LedgerRecorder(5, 5, 0.25, 0.25, porosity=0.18)
    ecs, ics = recorder.masses(np.full((5, 5), 2.0), np.full((5, 5), 1.0))
    assert ecs == pytest.approx(0.18 * 2.0, rel=1e-14)
    assert ics == pytest.approx(0.82 * 1.0, rel=1e-14)


def test_residual_accounts_for_losses_and_gains() -> None:
    recorder = LedgerRecorder(3, 3, 0.5, 0.5, porosity=0.5)
    ones = np.ones((3, 3))
    zeros = np.zeros((3, 3))
    recorder.record(0.0, ones, zeros)
    # 0.1 of ECS mass leaves through the boundary
    recorder.record(1.0, 0.8 * ones, zeros, step_loss=0.1)
    # Clamping adds 0.05 back
    recorder.record(2.0, 0.9 * ones, zeros, step_gain=0.05)
    ledger = recorder.finish()

    assert len(ledger) == 3
    np.testing.assert_allclose(ledger.times, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(ledger.boundary_loss, [0.0, 0.1, 0.1])
    np.testing.assert_allclose(ledger.clamp_gain, [0.0, 0.0, 0.05])
    np.testing.assert_allclose(ledger.total, [0.5, 0.4, 0.45])
    assert ledger.residual[1] == pytest.approx(0.0, abs=1e-15)
    assert ledger.residual[2] == pytest.approx(0.0, abs=1e-15)


def test_unbalanced_ledger_shows_a_residual() -> None:
    recorder = LedgerRecorder(3, 3, 0.5, 0.5, porosity=0.5)
    ones = np.ones((3, 3))
    recorder.record(0.0, ones, ones)
    recorder.record(1.0, ones, 1.5 * ones)
    ledger = recorder.finish()
    assert ledger.max_residual == pytest.approx(0.25 / 1.0, rel=1e-12)


def test_empty_domain_uses_absolute_residual() -> None:
    recorder = LedgerRecorder(3, 3, 0.5, 0.5, porosity=0.5)
    zeros = np.zeros((3, 3))
    recorder.record(0.0, zeros, zeros)
    recorder.record(1.0, zeros, zeros, step_gain=1e-14)
    ledger = recorder.finish()
    assert ledger.residual[0] == 0.0
    assert ledger.residual[1] == pytest.approx(1e-14)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvres.errors import OutOfRangeError
from nvres.resonator import (CHEVRON_RESONATOR, CalibrationTable, ControllerState, ResonatorState,
                             ThermalPlant, background_for_enhancement, compensated_gain,
                             controller_step, default_laser_table, default_temperature_table,
                             duty_cycle_compensation, enhancement_factor, loaded_q, s11_response,
                             simulate_tuning_loop, temperature_to_frequency)


def test_loaded_q_values():
    assert loaded_q(1275, 1328) == pytest.approx(650.48, abs=0.01)
    assert loaded_q(1275, 1e18) == pytest.approx(1275)
    assert loaded_q(752, 252.7) == pytest.approx(189.14, abs=0.01)
    with pytest.raises(ValueError):
        loaded_q(0, 10)


def test_chevron_resonator_reproduces_loaded_q():
    assert CHEVRON_RESONATOR.q_loaded == pytest.approx(190.7, rel=1e-12)
    assert CHEVRON_RESONATOR.q_external == pytest.approx(255.48975592374845)


@settings(max_examples=100, deadline=None)
@given(st.floats(10, 1e4), st.floats(10, 1e4), st.floats(-0.05, 0.05))
def test_reflection_is_passive(qi, qe, df):
    g = s11_response(ResonatorState(2.9, qi, qe), 2.9 + df)
    assert abs(g) <= 1 + 1e-12


def test_reflection_limits():
    crit = ResonatorState(2.7, 1000, 1000)
    assert abs(s11_response(crit, 2.7)) < 1e-15
    assert abs(s11_response(crit, 27.0)) == pytest.approx(1.0, abs=1e-3)


def _phase_span(state):
    f = state.f0 + np.linspace(-1, 1, 20001) * 40 * state.f0 / state.q_loaded
    ph = np.unwrap(np.angle(s11_response(state, f)))
    return ph[-1] - ph[0], np.ptp(ph)


def test_phase_winding_distinguishes_coupling():
    total, _ = _phase_span(ResonatorState(2.7, 2000, 500))  # overcoupled
    assert abs(total) == pytest.approx(2 * np.pi, abs=0.1)
    total, span = _phase_span(ResonatorState(2.7, 500, 2000))  # undercoupled
    assert abs(total) < 0.1 and span < np.pi


def test_enhancement_profile():
    st_ = CHEVRON_RESONATOR
    bg = background_for_enhancement(7.1)
    assert enhancement_factor(st_, 0.0, bg) / enhancement_factor(st_, 1e7, bg) == pytest.approx(7.1, rel=1e-6)
    hwhm = st_.f0 * 1e3 / (2 * st_.q_loaded)
    assert enhancement_factor(st_, hwhm, 0.0) ** 2 == pytest.approx(0.5)
    d = np.linspace(0, 100, 200)
    m = enhancement_factor(st_, d, bg)
    assert np.all(np.diff(m) < 0)
    assert np.allclose(m, enhancement_factor(st_, -d, bg))


def test_compensated_gain():
    assert compensated_gain(-7.60) == pytest.approx(-0.82904, abs=1e-5)
    assert compensated_gain(-np.inf) == 0.0
    assert compensated_gain(-10 * np.log10(2)) == pytest.approx(-10 * np.log10(2))
    assert compensated_gain(0.0) == -np.inf
    with pytest.raises(ValueError):
        compensated_gain(0.5)


def test_temperature_fixture():
    plant = ThermalPlant()
    assert temperature_to_frequency(plant, 17.0) == pytest.approx(2.967, abs=1e-9)
    assert temperature_to_frequency(plant, 4.0) == pytest.approx(2.700, abs=1e-9)
    table = default_temperature_table()
    assert np.allclose(table(table.x), table.y, atol=0)
    t = np.linspace(table.x[0], table.x[-1], 1000)
    assert np.all(np.diff(table(t)) > 0)
    with pytest.raises(OutOfRangeError):
        temperature_to_frequency(plant, 2.0)


def test_calibration_inverse_round_trip():
    table = default_laser_table()
    p = np.linspace(0.5, 39.5, 50)
    assert np.allclose(table.inverse(table(p)), p, atol=1e-9)


def test_calibration_rejects_non_monotone(tmp_path):
    with pytest.raises(ValueError):
        CalibrationTable([0, 1, 2], [0, 1, 0.5])
    path = tmp_path / "empty.csv"
    path.write_text("# nothing\n")
    with pytest.raises(ValueError):
        CalibrationTable.from_csv(path)


def test_controller_trivial_cases():
    ctrl = ControllerState(setpoint=2.967, output=5.0, bias=5.0)
    new, u = controller_step(ctrl, 2.967, 0.05)
    assert u == 5.0 and new.output == 5.0
    open_loop = ControllerState(k_p=0.0, k_d=0.0, output=7.0, bias=7.0)
    for f in (2.95, 2.97, 3.0):
        open_loop, u = controller_step(open_loop, f, 0.05)
        assert u == 7.0
    with pytest.raises(ValueError):
        controller_step(ctrl, 2.9, 0.0)


def test_controller_clamps_output():
    ctrl = ControllerState(setpoint=2.967, output=5.0, bias=5.0, max_output=40.0)
    _, u = controller_step(ctrl, 2.5, 0.05)
    assert u == 40.0
    _, u = controller_step(ctrl, 3.5, 0.05)
    assert u == 0.0


@pytest.mark.parametrize("step_mhz", [10.0, -10.0])
def test_closed_loop_settles(step_mhz):
    plant = ThermalPlant()
    ctrl = ControllerState.for_plant(plant)
    tr = simulate_tuning_loop(plant, ctrl, 10 * plant.tau_thermal + 1.0, dt=0.05,
                              disturbance=step_mhz * 1e-3, disturbance_time=1.0)
    assert np.max(np.abs(tr.error)) == pytest.approx(abs(step_mhz) * 1e-3, rel=1e-3)
    assert tr.settling_time(0.5e-3, after=1.0) <= 1.0 + 10 * plant.tau_thermal
    assert abs(tr.error[-1]) < 0.5e-3


def test_trace_csv(tmp_path):
    plant = ThermalPlant()
    tr = simulate_tuning_loop(plant, ControllerState.for_plant(plant), 1.0)
    tr.write_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t_s,f0_ghz,error_ghz,laser_mw"


def test_duty_cycle():
    assert duty_cycle_compensation(0, 40) == 40
    assert duty_cycle_compensation(40, 40) == 0
    with pytest.raises(ValueError):
        duty_cycle_compensation(41, 40)
    schedule = [0.02, 0.5, 4.0, 12.5, 40.0, 7.25]
    totals = {t1 + duty_cycle_compensation(t1, 40.0) for t1 in schedule}
    assert totals == {40.0}

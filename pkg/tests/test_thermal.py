import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from battfdd.errors import DomainError, IntegrationError
from battfdd.thermal import (
    AffineResistance,
    BatteryParams,
    ConstantResistance,
    ThermalState,
    derivs,
    integrate,
    resistance,
    rk4,
    steady_state,
)


def closed_form(I, Rc, p=BatteryParams()):
    q = I * I * p.R_e
    ts = p.T_f + q * p.R_u
    return ts + q * Rc, ts


def test_defaults_match_table():
    p = BatteryParams()
    assert (p.C_c, p.C_s, p.R_e, p.R_c, p.R_u) == (268.0, 18.8, 0.010, 2.0, 1.5)


@pytest.mark.parametrize("field", ["C_c", "C_s", "R_e", "R_c", "R_u"])
def test_params_reject_nonpositive(field):
    with pytest.raises(DomainError):
        BatteryParams(**{field: 0.0})


def test_derivs_at_ambient_is_zero():
    assert derivs(ThermalState(25, 25), BatteryParams(), 0.0) == pytest.approx((0.0, 0.0), abs=0)


def test_derivs_joule_heating_only():
    dc, ds = derivs(ThermalState(25, 25), BatteryParams(), 13.8)
    assert dc == pytest.approx(13.8**2 * 0.01 / 268, rel=1e-12)
    assert ds == 0.0


def test_derivs_rejects_nonfinite():
    with pytest.raises(DomainError):
        derivs(ThermalState(float("nan"), 25), BatteryParams(), 1.0)
    with pytest.raises(DomainError):
        derivs(ThermalState(25, 25), BatteryParams(), float("inf"))


def test_steady_state_normal_mode():
    p = BatteryParams(R_c=1.68)
    s = steady_state(p, 13.8)
    tc, ts = closed_form(13.8, 1.68)
    assert s.T_s == pytest.approx(ts, abs=1e-12)
    assert s.T_c == pytest.approx(tc, abs=1e-12)
    assert s.T_s == pytest.approx(27.8566, abs=2e-3)
    assert max(abs(v) for v in derivs(s, p, 13.8)) < 1e-12


def test_steady_state_zero_current():
    assert steady_state(BatteryParams(T_f=21.0), 0.0) == (21.0, 21.0)


@settings(max_examples=40, deadline=None)
@given(I=st.floats(0, 30), Rc=st.floats(0.5, 5), Tf=st.floats(-10, 40))
def test_steady_state_is_equilibrium_and_ordered(I, Rc, Tf):
    p = BatteryParams(R_c=Rc, T_f=Tf)
    s = steady_state(p, I)
    scale = max(1.0, abs(s.T_c))
    assert max(abs(v) for v in derivs(s, p, I)) < 1e-12 * scale
    assert s.T_c >= s.T_s >= Tf


def test_integrate_length_and_constant_at_rest():
    tr = integrate(BatteryParams(), 0.0, 100.0, 1.0)
    assert len(tr) == 101
    assert np.all(tr.T_c == 25.0) and np.all(tr.T_s == 25.0)


def test_integrate_converges_to_steady_state():
    p = BatteryParams(R_c=1.68)
    tr = integrate(p, 13.8, 20_000.0, 1.0)
    s = steady_state(p, 13.8)
    assert abs(tr.final.T_c - s.T_c) < 1e-4 and abs(tr.final.T_s - s.T_s) < 1e-4


def test_integrate_step_halving():
    p = BatteryParams(R_c=1.68)
    a = integrate(p, 13.8, 3600.0, 1.0).final
    b = integrate(p, 13.8, 3600.0, 0.5).final
    assert abs(a.T_c - b.T_c) < 1e-6 and abs(a.T_s - b.T_s) < 1e-6


def test_integrate_time_varying_current():
    tr = integrate(BatteryParams(), lambda t: 10.0 if t < 500 else 0.0, 5000.0)
    assert tr.T_c.max() > 25.5
    assert abs(tr.final.T_c - 25.0) < 0.05


def test_rk4_reports_failing_step():
    with pytest.raises(IntegrationError) as exc:
        rk4(lambda t, y: np.array([np.nan if t >= 3 else 1.0]), [0.0], 0.0, 1.0, 10)
    assert exc.value.step == 3


def test_rk4_exact_for_cubic_in_time():
    y = rk4(lambda t, y: np.array([3 * t * t]), [0.0], 0.0, 0.5, 8)
    assert y[-1, 0] == pytest.approx(4.0**3, rel=1e-13)


def test_resistance_laws():
    assert resistance(ConstantResistance(0.02), soc=0.1, T_c=80) == 0.02
    law = AffineResistance(0.01, 0.002, 1e-4)
    assert resistance(law, 0.5, 30.0) == pytest.approx(0.01 + 0.001 + 0.003)


def test_affine_law_changes_trajectory():
    p = BatteryParams(R_c=1.68)
    const = integrate(p, 13.8, 2000.0).final
    affine = integrate(p, 13.8, 2000.0, law=AffineResistance(0.008, 0.0, 1e-4)).final
    assert affine.T_c != const.T_c


def test_trajectory_csv(tmp_path):
    tr = integrate(BatteryParams(), 5.0, 10.0)
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "time_s,T_c,T_s" and len(rows) == 12
    assert math.isclose(float(rows[-1].split(",")[1]), tr.T_c[-1])

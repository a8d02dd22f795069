import numpy as np
import pytest

from battfdd.correction import (
    CorrectionGains,
    GainTrajectory,
    WindowModel,
    WindowSpec,
    coupled_block,
    corrected_rhs,
    corrected_steady_state,
    injection,
    optimize_gains,
    plateau,
    rolling_variance,
    run_online,
    sample_propagator,
    settling_step,
)
from battfdd.fdd import mode_system
from battfdd.scenario import NORMAL, FAULTY3, ModeSchedule, synthesize
from battfdd.thermal import BatteryParams, rk4


@pytest.fixture(scope="module")
def sys():
    return mode_system(BatteryParams(), NORMAL)


@pytest.fixture(scope="module")
def window_data():
    true = FAULTY3.shifted(1.1, 0.9)
    tr = synthesize(ModeSchedule.single(true), t_end=3 * 3600, sample_period=60, seed=4)
    return tr


def test_zero_gain_is_neutral(sys):
    rhs = corrected_rhs(sys, (0.0, 0.0), (80.0, -5.0))
    x = np.linspace(20, 40, sys.dim)
    assert np.array_equal(rhs(0.0, x), sys.rhs(0.0, x))


def test_injection_touches_means_only(sys):
    rhs = corrected_rhs(sys, CorrectionGains(0.2, 0.3), (30.0, 28.0))
    x = sys.ambient_init()
    diff = rhs(0.0, x) - sys.rhs(0.0, x)
    expected = np.zeros(sys.dim)
    expected[0], expected[sys.n] = 0.2 * 5.0, 0.3 * 3.0
    assert np.allclose(diff, expected)
    K = injection(sys, (0.2, 0.3))
    assert np.count_nonzero(K) == 2


def test_sample_propagator_matches_rk4(sys):
    A = sys.A.copy()
    c = sys.b + 0.01
    P, S = sample_propagator(A, 60.0, 1.0)
    x0 = np.linspace(24, 30, sys.dim)
    ref = rk4(lambda t, x: A @ x + c, x0, 0.0, 1.0, 60)[-1]
    assert np.allclose(P @ x0 + S @ c, ref, rtol=1e-12, atol=1e-10)


def test_coupled_block_is_the_mean_block(sys):
    block = coupled_block(sys.A, (0, sys.n))
    assert 0 in block and sys.n in block and len(block) < sys.dim
    rest = np.setdiff1d(np.arange(sys.dim), block)
    assert np.max(np.abs(sys.A[np.ix_(block, rest)])) < 1e-12 * np.abs(sys.A).max()


def test_reduced_predictions_match_full_simulation(sys, window_data):
    model = WindowModel(sys, 60.0)
    y = window_data.measured_pairs()[:80]
    x0 = sys.ambient_init()
    for g in [(0.0, 0.0), (0.02, 0.1), (0.3, 0.7)]:
        full = model.simulate(g, x0, y)[:, [0, sys.n]]
        assert np.allclose(model.predictions(g, x0, y), full, atol=1e-9)


def test_unstable_gains_rejected(sys, window_data):
    model = WindowModel(sys, 60.0)
    y = window_data.measured_pairs()[:80]
    assert not model.stable((-0.5, 0.0))
    assert model.predictions((-0.5, 0.0), sys.ambient_init(), y) is None
    assert model.objective((-0.5, 0.0), sys.ambient_init(), y) == np.inf
    assert model.stable((0.0, 0.0))


def test_optimizer_never_worse_than_grid(sys, window_data):
    model = WindowModel(sys, 60.0)
    pairs = window_data.measured_pairs()
    x0 = model.simulate((0.0, 0.0), sys.ambient_init(), pairs[:61])[-1]
    y = pairs[60:140]
    g = optimize_gains(y, sys, x0=x0, model=model)
    grid = np.linspace(-1, 1, 41)
    best = min(model.objective((a, b), x0, y) for a in grid for b in grid)
    assert g.objective <= best + 1e-6
    assert -1 <= g.mu1 <= 1 and -1 <= g.mu2 <= 1
    assert g.objective == pytest.approx(model.objective(g.pair, x0, y))


def test_run_online_shapes_and_determinism(sys, window_data):
    pairs, t = window_data.measured_pairs()[:120], window_data.time[:120]
    spec = WindowSpec(L=40, M=5)
    a = run_online(pairs, t, spec, sys, n_starts=3)
    b = run_online(pairs, t, spec, sys, n_starts=3)
    assert len(a) == len(range(40, 121, 5))
    assert a.time[0] == t[39]
    assert np.array_equal(a.mu1, b.mu1) and np.array_equal(a.mu2, b.mu2)
    assert np.allclose(a.window_mean, pairs[80:120].mean(axis=0))


def test_run_online_fill_phase(sys, window_data):
    pairs, t = window_data.measured_pairs()[:60], window_data.time[:60]
    g = run_online(pairs, t, WindowSpec(L=30, M=1), sys, n_starts=2, min_fill=2)
    assert len(g) == 59 and g.time[0] == t[1]


def test_run_online_guards(sys, window_data):
    pairs, t = window_data.measured_pairs()[:50], window_data.time[:50]
    with pytest.raises(ValueError):
        run_online(pairs, t, WindowSpec(L=80), sys)
    with pytest.raises(ValueError):
        run_online(pairs, t, WindowSpec(L=20), sys, min_fill=1)
    with pytest.raises(ValueError):
        WindowSpec(L=10, M=11)


def test_corrected_steady_state(sys):
    zero = corrected_steady_state(sys, (0.0, 0.0), (0.0, 0.0))
    assert np.allclose(zero, sys.steady_state())
    # large gains pull the means onto the reference
    x = corrected_steady_state(sys, (1.0, 1.0), (40.0, 30.0))
    assert abs(x[0] - 40.0) < abs(sys.steady_state()[0] - 40.0)
    assert abs(x[sys.n] - 30.0) < abs(sys.steady_state()[sys.n] - 30.0)


def test_correction_reduces_mismatch(sys, window_data):
    pairs, t = window_data.measured_pairs(), window_data.time
    g = run_online(pairs, t, WindowSpec(), sys, n_starts=3)
    x = corrected_steady_state(sys, g.final_gains(), g.window_mean)
    before = np.abs(sys.steady_state()[[0, sys.n]] - g.window_mean)
    after = np.abs(x[[0, sys.n]] - g.window_mean)
    assert np.all(after < before)


def test_gain_statistics():
    rng = np.random.default_rng(0)
    tail = 0.01 * (-1.0) ** np.arange(300)
    decaying = np.concatenate([rng.normal(0, 1, 100), tail])
    assert plateau(decaying) and not plateau(decaying[::-1])
    assert 80 <= settling_step(decaying) <= 101
    assert settling_step(np.full(50, 3.0)) == 0
    assert len(rolling_variance(np.arange(10.0), 4)) == 7
    assert rolling_variance(np.arange(3.0), 4).shape == (1,)


def test_trajectory_csv_and_final_gains(tmp_path):
    g = GainTrajectory(np.arange(8), np.arange(8) * 60.0, np.arange(8.0), -np.arange(8.0), np.ones(8))
    f = g.final_gains()
    assert f.pair == (6.5, -6.5)
    path = tmp_path / "g.csv"
    g.to_csv(path)
    assert path.read_text().splitlines()[0] == "step,time_s,mu1,mu2,J"

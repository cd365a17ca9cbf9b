import numpy as np
import pytest

from rolf.simulate import (
    SCENARIO_CSV_COLUMNS,
    GarchParams,
    Impulse,
    MixtureNoiseParams,
    ScenarioConfig,
    build_cv_model,
    derive_run_seed,
    garch_step,
    generate_scenario,
    nominal_process_cov,
    simulate_garch,
    write_scenario_csv,
)


def test_garch_degenerate_constant():
    p = GarchParams(omega0=0.4, alpha=0.0, beta=0.0)
    s = 1.0
    for eps in (0.0, 3.0, -10.0):
        s = garch_step(s, eps, p)
        assert s == 0.4


def test_garch_step_arithmetic():
    p = GarchParams(omega0=0.1, alpha=0.2, beta=0.7)
    assert garch_step(1.0, 1.0, p) == pytest.approx(1.0, abs=1e-15)


def test_garch_params_validation():
    with pytest.raises(ValueError):
        GarchParams(alpha=0.5, beta=0.6)
    with pytest.raises(ValueError):
        GarchParams(omega0=0.0)
    with pytest.raises(ValueError):
        MixtureNoiseParams(p_outlier=1.5)
    with pytest.raises(ValueError):
        MixtureNoiseParams(scale=0.5)


def test_garch_chain_positive():
    sig, eps = simulate_garch(GarchParams(alpha=0.5, beta=0.45), 20000, np.random.default_rng(3))
    assert np.all(sig > 0)
    assert np.all(np.isfinite(eps))


def test_cv_model_structure():
    F, H = build_cv_model(1.0)
    expected = np.eye(4)
    expected[0, 1] = expected[2, 3] = 1.0
    np.testing.assert_array_equal(F, expected)
    F, _ = build_cv_model(0.5)
    assert F[0, 1] == F[2, 3] == 0.5
    np.testing.assert_array_equal(H @ np.array([1.0, 2.0, 3.0, 4.0]), [1.0, 3.0])
    with pytest.raises(ValueError):
        build_cv_model(0.0)


def test_no_outliers_when_p_zero():
    sc = generate_scenario(ScenarioConfig(horizon=500, mixture=MixtureNoiseParams(0.0, 50.0)))
    assert not sc.outlier_flags.any()


def test_same_seed_bit_identical():
    cfg = ScenarioConfig(horizon=300, seed=12345)
    a, b = generate_scenario(cfg), generate_scenario(cfg)
    assert a.trajectory.states.tobytes() == b.trajectory.states.tobytes()
    assert a.trajectory.measurements.tobytes() == b.trajectory.measurements.tobytes()
    assert a.outlier_flags.tobytes() == b.outlier_flags.tobytes()
    c = generate_scenario(ScenarioConfig(horizon=300, seed=12346))
    assert c.trajectory.measurements.tobytes() != a.trajectory.measurements.tobytes()


def test_scenario_structure():
    cfg = ScenarioConfig(horizon=200, seed=7)
    sc = generate_scenario(cfg)
    assert len(sc.trajectory) == 200
    Q = sc.process_covs
    assert Q.shape == (200, 4, 4)
    np.testing.assert_array_equal(Q[:, 0, 0], 0.01)
    np.testing.assert_array_equal(Q[:, 2, 2], 0.01)
    assert np.all(sc.garch_variances > 0)
    assert sc.garch_variances[0, 0] == sc.garch_variances[0, 1] == 1.0
    # the two velocity chains are independent draws
    assert not np.array_equal(sc.garch_variances[:, 0], sc.garch_variances[:, 1])
    np.testing.assert_allclose(nominal_process_cov(cfg), np.diag([0.01, 1.0, 0.01, 1.0]), rtol=1e-12)


def test_garch_recursion_in_scenario():
    cfg = ScenarioConfig(horizon=50, seed=9)
    sc = generate_scenario(cfg)
    F, _ = build_cv_model(cfg.dt)
    states = np.vstack([np.zeros(4), sc.trajectory.states])
    u = states[1:] - states[:-1] @ F.T
    g = cfg.garch
    sig = sc.garch_variances
    for t in range(1, 50):
        expected = g.omega0 + g.alpha * u[t - 1, [1, 3]] ** 2 + g.beta * sig[t - 1]
        np.testing.assert_allclose(sig[t], expected, rtol=1e-12)


def test_outlier_measurements_are_scaled():
    cfg = ScenarioConfig(horizon=20000, seed=1, mixture=MixtureNoiseParams(0.1, 10.0))
    sc = generate_scenario(cfg)
    resid = sc.trajectory.measurements - sc.trajectory.states[:, [0, 2]]
    in_var = resid[~sc.outlier_flags].var(axis=0)
    out_var = resid[sc.outlier_flags].var(axis=0)
    np.testing.assert_allclose(in_var, 1.0, rtol=0.05)
    np.testing.assert_allclose(out_var, 100.0, rtol=0.15)


def test_impulse_hook():
    base = ScenarioConfig(horizon=20, seed=4)
    jumped = ScenarioConfig(horizon=20, seed=4, impulses=(Impulse(10, (5.0, 0.0, 0.0, 0.0)),))
    a, b = generate_scenario(base), generate_scenario(jumped)
    np.testing.assert_array_equal(a.trajectory.states[:10], b.trajectory.states[:10])
    assert b.trajectory.states[10, 0] - a.trajectory.states[10, 0] == pytest.approx(5.0)


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(horizon=0)
    with pytest.raises(ValueError):
        ScenarioConfig(R=((1.0, 0.0), (0.0, -1.0)))
    with pytest.raises(ValueError):
        ScenarioConfig(seed=-1)


def test_derive_seed_pure_and_order_independent():
    s = 0xDEADBEEF
    forward = [derive_run_seed(s, i) for i in range(20)]
    backward = [derive_run_seed(s, i) for i in reversed(range(20))][::-1]
    assert forward == backward
    assert len(set(forward)) == 20
    assert all(0 <= v < 2**64 for v in forward)


def test_derive_seed_collision_scan():
    rng = np.random.default_rng(0)
    bases = rng.integers(0, 2**64, size=1_000_000, dtype=np.uint64)
    assert all(derive_run_seed(int(s), 0) != derive_run_seed(int(s), 1) for s in bases)


def test_scenario_csv(tmp_path):
    sc = generate_scenario(ScenarioConfig(horizon=5, seed=2))
    path = tmp_path / "scenario.csv"
    write_scenario_csv(path, sc)
    lines = path.read_bytes().decode("utf-8").split("\n")
    assert lines[0] == ",".join(SCENARIO_CSV_COLUMNS)
    assert len([ln for ln in lines[1:] if ln]) == 5
    row = lines[1].split(",")
    assert float(row[5]) == sc.trajectory.measurements[0, 0]
    assert float(row[8]) == sc.garch_variances[0, 0]

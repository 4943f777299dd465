from dataclasses import replace

import numpy as np
import pytest

from velaid.errors import GainNotPositiveDefinite, NumericalAbort, ScenarioError, WorldInvalid
from velaid.harness.output import FIGURES, emit_csv, emit_plots, emit_report, read_csv
from velaid.harness.scenario import ReinitEvent, Scenario, load_scenario, parse_scenario
from velaid.harness.simulate import COLUMNS, align_to_ned, run
from velaid.observer import ObserverState
from velaid.rigid_body import WorldConstants
from velaid.sensors import SensorSuite

SHORT = dict(duration=6.0, events=(), disturbance=None)
ERRORS = (np.array([0.5, -0.2, 0.1]), np.array([1.0, 0.3, -0.4]), np.array([0.0, 0.2, 0.1]))


def test_preset_matches_reference_experiment():
    s = load_scenario("paper-fig8")
    assert s.gains.is_scalar
    assert np.array_equal(np.diag(s.gains.K), [5, 5, 5]) and np.array_equal(np.diag(s.gains.M), [0.5] * 3)
    assert s.world.g == 9.81 and np.allclose(s.world.B, [2 ** -0.5, 0, 2 ** -0.5])
    assert np.array_equal(s.sensors.b_v, SensorSuite.table1().b_v)
    assert [(e.t, e.mode) for e in s.events] == [(50.0, "default")]
    assert (s.disturbance.t_start, s.disturbance.t_end) == (80.0, 100.0)
    assert s.rate == 200 and s.duration == 120


def test_empty_file_is_preset_without_noise(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    s = load_scenario(p)
    ref = load_scenario("paper-fig8").without_noise()
    for f in ("duration", "rate", "trajectory_kind", "trajectory", "events", "disturbance", "rng_seed",
              "gains_spec"):
        assert getattr(s, f) == getattr(ref, f), f
    assert s.world.g == ref.world.g and np.array_equal(s.world.B, ref.world.B)
    for a, b in ((s.gains.K, ref.gains.K), (s.gains.L, ref.gains.L), (s.gains.M, ref.gains.M)):
        assert np.array_equal(a, b)
    assert not np.any(s.sensors.var_v) and not np.any(s.sensors.b_v)


def test_config_errors():
    with pytest.raises(GainNotPositiveDefinite):
        parse_scenario("[gains]\nscalar = 5, 5, 0\n")
    with pytest.raises(ScenarioError, match="line 3"):
        parse_scenario("[run]\nduration = 10\nthis line is broken\n")
    with pytest.raises(ScenarioError, match="unknown key"):
        parse_scenario("[run]\ndurration = 10\n")
    with pytest.raises(ScenarioError, match="unknown section"):
        parse_scenario("[nope]\n")
    with pytest.raises(WorldInvalid):
        parse_scenario("[world]\nB = 0, 0, 1\n")
    with pytest.raises(ScenarioError):
        parse_scenario("[run]\nrate = 0\n")
    with pytest.raises(ScenarioError):
        load_scenario("/nonexistent/file.ini")


def test_config_options():
    s = parse_scenario(
        "[run]\nduration = 30\nseed = 7\n"
        "[gains]\nstructured = 2, 1, 3, 4, -1, 2, 0.7\n"
        "[reinit.2]\nt = 20\nmode = errors\nerror_v = 1, 0, 0\n"
        "[reinit.1]\nt = 10\nmode = state\ngamma = 0, 0, 9.81\n"
        "[disturbance]\nenabled = no\n"
        "[sensors]\npreset = table1\nnoise = off  # biases only\n"
    )
    assert s.duration == 30 and s.rng_seed == 7 and s.sensors.rng_seed == 7
    assert s.gains.sigma_K == pytest.approx(2.0) and s.gains.sigma_M == pytest.approx(0.7)
    assert [e.mode for e in s.events] == ["state", "errors"]
    assert s.disturbance is None
    assert not np.any(s.sensors.var_a) and np.any(s.sensors.b_a)
    full = parse_scenario("[gains]\nK = 1,0,0, 0,2,0, 0,0,3\nL = 1,0,0,0,1,0,0,0,1\nM = 2,0,0,0,2,0,0,0,2\n")
    assert full.gains.sigma_K == pytest.approx(1.0)
    with pytest.raises(ScenarioError):
        parse_scenario("[gains]\nK = 1,0,0,0,1,0,0,0,1\n")


def test_scenario_invariants():
    with pytest.raises(ScenarioError):
        Scenario(events=(ReinitEvent(20.0), ReinitEvent(10.0)))
    with pytest.raises(ScenarioError):
        Scenario(duration=0.0)


def test_zero_error_run_stays_exact():
    s = replace(load_scenario("paper-fig8").without_noise(), events=(), disturbance=None)
    r = run(s)
    assert r.record["ev"].max() < 1e-6
    assert r.record["eg"].max() < 1e-6


def test_noise_free_rates_and_lyapunov():
    s = replace(load_scenario("paper-fig8").without_noise(), initial_errors=ERRORS, **SHORT)
    r = run(s)
    rates = r.summary["decay_rates"]
    assert rates["beta"][0]["rate"] == pytest.approx(0.5, rel=0.02)
    assert rates["gamma"][0]["rate"] >= 5.0 * 0.95
    V = r.record["V"]
    active = V[:-1] > 1e-20
    assert np.all(V[1:][active] < V[:-1][active])


def _gamma_error(record, L):
    e_v = record.vec("vh") - record.vec("v")
    return record.vec("gh") - record.vec("g") - e_v @ L.T


def _fd_residual(rate):
    s = replace(load_scenario("paper-fig8").without_noise(), rate=rate, initial_errors=ERRORS, **SHORT)
    r = run(s)
    e = _gamma_error(r.record, s.gains.L)
    w = r.record.vec("w")
    dt = s.dt
    fd = (e[2:] - e[:-2]) / (2 * dt)
    model = np.cross(e[1:-1], w[1:-1]) - e[1:-1] @ s.gains.L.T
    size = np.linalg.norm(e[1:-1], axis=1)
    keep = size > 1e-6  # below this the difference quotient is roundoff
    return np.max(np.linalg.norm(fd - model, axis=1)[keep] / size[keep])


def test_gamma_error_obeys_error_dynamics():
    coarse, fine = _fd_residual(100.0), _fd_residual(200.0)
    assert coarse < 1e-2
    # second order: halving dt quarters the residual
    assert coarse / fine > 3.0


def test_rate_independence():
    base = replace(load_scenario("paper-fig8").without_noise(), duration=5.0, initial_errors=ERRORS,
                   events=(), disturbance=None)
    a = run(base).final_estimate
    b = run(replace(base, rate=400.0)).final_estimate
    assert np.abs(a.as_columns() - b.as_columns()).max() < 1e-6


def test_event_idempotence():
    s = replace(load_scenario("paper-fig8"), duration=4.0, disturbance=None, events=())
    r0 = run(s)
    k = 400
    rec = r0.record
    state = ObserverState(rec.vec("vh")[k].copy(), rec.vec("gh")[k].copy(), rec.vec("bh")[k].copy())
    r1 = run(replace(s, events=(ReinitEvent(k * s.dt, "state", state=state),)))
    assert r1.event_ticks == [k]
    assert np.array_equal(r0.record.data, r1.record.data)


def test_reinit_events_apply_at_nearest_tick():
    s = replace(load_scenario("paper-fig8").without_noise(), duration=3.0, disturbance=None,
                events=(ReinitEvent(1.0012),))
    r = run(s)
    assert r.event_ticks == [200]
    assert np.array_equal(r.record.vec("gh")[200], [0, 0, 9.81])
    assert r.record["ev"][199] < 1e-9 < r.record["ev"][200]


def test_numerical_abort_reports_tick():
    s = replace(load_scenario("paper-fig8").without_noise(), duration=1.0, disturbance=None,
                events=(ReinitEvent(0.5, "state", state=ObserverState(np.full(3, np.nan), np.zeros(3), np.zeros(3))),))
    with pytest.raises(NumericalAbort) as exc:
        run(s)
    assert exc.value.tick == 100


def test_summary_contents():
    r = run(replace(load_scenario("paper-fig8"), duration=2.0))
    sm = r.summary
    assert sm["rng"] == "numpy.random.PCG64" and sm["ticks"] == 400
    assert set(sm["decay_rates"]) == {"v", "gamma", "beta"}
    assert len(sm["decoupling"]["sha256_v_gamma_hat"]) == 64


def test_align_to_ned():
    assert np.allclose(align_to_ned(WorldConstants()), np.eye(3))
    N = align_to_ned(WorldConstants(B=np.array([0.0, 0.5, 0.8])))
    assert np.allclose(N.T @ N, np.eye(3))
    assert abs((N.T @ np.array([0.0, 0.5, 0.8]))[1]) < 1e-15


def test_estimated_euler_tracks_truth_with_general_field():
    s = replace(load_scenario("paper-fig8").without_noise(), duration=2.0, events=(), disturbance=None,
                world=WorldConstants(B=np.array([0.3, 0.4, 0.6])))
    r = run(s)
    for a, b in (("phi", "phih"), ("theta", "thetah")):
        assert np.abs(r.record[a] - r.record[b]).max() < 1e-9


def test_csv_shapes(tmp_path):
    p = emit_csv([], tmp_path / "empty.csv")
    assert p.read_bytes() == (",".join(COLUMNS) + "\r\n").encode()
    row = np.arange(len(COLUMNS), dtype=float) / 3.0
    p = emit_csv([row], tmp_path / "one.csv")
    lines = p.read_bytes().split(b"\r\n")
    assert len(lines) == 3 and lines[2] == b""
    assert len(lines[1].split(b",")) == len(COLUMNS)
    header, data = read_csv(p)
    assert header == COLUMNS
    assert np.array_equal(data[0], row)
    assert header[:4] == ["t", "vx", "vy", "vz"] and header[-4:] == ["ev", "eg", "eb", "V"]


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError):
        emit_csv([], tmp_path / "missing" / "x.csv")


def test_plot_scripts(tmp_path):
    r = run(replace(load_scenario("paper-fig8"), duration=1.0))
    emit_csv(r.record, tmp_path / "run.csv")
    paths = emit_plots(r.record, tmp_path)
    assert len(paths) == len(FIGURES) == 9
    header = set(COLUMNS)
    for p in paths:
        text = p.read_text()
        assert "'run.csv'" in text
        for col in [c.split("'")[0] for c in text.split("column('")[1:]]:
            assert col in header
    assert "*180/pi" in (tmp_path / "fig_phi.gp").read_text()
    rep = emit_report(r.summary, tmp_path / "report.json")
    assert '"scenario"' in rep.read_text()

"""Quick invariant checks behind ``velaid selftest``.

Each check is small enough to finish in a few seconds; the full suites live
in the test directory.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from velaid.analysis import lti_error_solution, svd_polar_oracle
from velaid.attitude import hat_R, tilde_R
from velaid.harness.scenario import Scenario, load_scenario
from velaid.harness.simulate import run
from velaid.rigid_body import FigureEight, TruthState, WorldConstants, truth_step


def _zero_error() -> float:
    s = replace(load_scenario("paper-fig8").without_noise(), duration=20.0, events=())
    r = run(s)
    return float(r.record["ev"].max())


def _decoupling() -> bool:
    s = replace(load_scenario("paper-fig8"), duration=90.0)
    a = run(s).summary["decoupling"]
    b = run(replace(s, disturbance=None)).summary["decoupling"]
    return a["sha256_v_gamma_hat"] == b["sha256_v_gamma_hat"] and a["sha256_beta_m"] != b["sha256_beta_m"]


def _lti() -> float:
    s = replace(
        Scenario(disturbance=None, duration=3.0),
        initial_errors=(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),
        events=(),
    )
    r = run(s, keep_rotated=True)
    E0 = tuple(r.rotated_errors[0])
    dev = 0.0
    for k, t in enumerate(r.record["t"]):
        ref = lti_error_solution(E0, 5.0, 5.0, 0.5, float(t))
        dev = max(dev, float(np.max(np.abs(r.rotated_errors[k] - np.array(ref)))))
    return dev


def _polar() -> float:
    rng = np.random.Generator(np.random.PCG64(1))
    world = WorldConstants()
    dev = 0.0
    for _ in range(200):
        gh, bh = rng.normal(size=3) * 10, rng.normal(size=3)
        dev = max(dev, float(np.linalg.norm(hat_R(gh, bh) - svd_polar_oracle(tilde_R(gh, bh, world)))))
    return dev


def _conservation() -> float:
    world = WorldConstants()
    traj = FigureEight()
    smp = traj(0.0)
    s = TruthState(0.0, smp.v, smp.R, world)
    dt = 0.005
    dev = 0.0
    for k in range(4000):
        u = traj((k + 0.5) * dt)
        s = truth_step(s, u.omega, u.accel, dt)
        dev = max(dev, abs(float(np.linalg.norm(s.gamma)) - world.g),
                  float(np.linalg.norm(s.R.T @ s.R - np.eye(3))))
    return dev


CHECKS = [
    ("zero-error fixed point", _zero_error, 1e-6),
    ("rotated errors follow the closed form", _lti, 1e-5),
    ("hat_R equals the SVD polar factor", _polar, 1e-10),
    ("norm and orthonormality conservation", _conservation, 1e-9),
]


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, fn, tol in CHECKS:
        t0 = time.perf_counter()
        value = fn()
        passed = value < tol
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3g} (tol {tol:g}, "
                  f"{time.perf_counter() - t0:.1f} s)")
    t0 = time.perf_counter()
    passed = _decoupling()
    ok &= passed
    if verbose:
        print(f"{'PASS' if passed else 'FAIL'}  v_hat/gamma_hat independent of the magnetometer "
              f"({time.perf_counter() - t0:.1f} s)")
    return ok

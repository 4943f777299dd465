"""Scenario configuration: an INI-style ``[section] key = value`` file.

Missing keys take documented defaults; unknown sections or keys are errors.
An empty file yields the reference figure-eight experiment with ideal
sensors. The built-in name ``paper-fig8`` adds the reference sensor biases
and noise levels.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from velaid.errors import GainNotPositiveDefinite, ScenarioError
from velaid.observer import Gains, ObserverState, structured_gain, validate_gains
from velaid.rigid_body import NOMINAL_B, STANDARD_G, TrajectoryParams, WorldConstants
from velaid.sensors import MagneticDisturbance, SensorSuite

PAPER_FIG8 = """\
# Reference experiment: tilted figure-eight, biased and noisy sensors,
# estimator reset at t = 50 s, magnetic disturbance on [80, 100] s.
[run]
duration = 120
rate = 200
seed = 0

[world]
g = 9.81
B = 0.7071067811865475, 0, 0.7071067811865475

[trajectory]
kind = figure8
amplitude = 20
period = 40
tilt_deg = 15
excitation_deg = 10

[sensors]
preset = table1

[gains]
scalar = 5, 5, 0.5

[reinit]
t = 50
mode = default

[disturbance]
enabled = yes
t_start = 80
t_end = 100
amplitude = 1.5
rate = 0.5
"""

PRESETS = {"paper-fig8": PAPER_FIG8}

_SCHEMA = {
    "run": {"duration", "rate", "seed", "name"},
    "world": {"g", "B"},
    "trajectory": {"kind", "amplitude", "period", "tilt_deg", "excitation_deg", "seed", "max_rate",
                   "max_accel"},
    "sensors": {"preset", "noise", "b_v", "b_omega", "b_a", "b_beta", "var_v", "var_omega", "var_a",
                "var_beta"},
    "gains": {"scalar", "structured", "K", "L", "M"},
    "initial": {"error_v", "error_gamma", "error_beta"},
    "reinit": {"t", "mode", "v", "gamma", "beta", "error_v", "error_gamma", "error_beta"},
    "disturbance": {"enabled", "t_start", "t_end", "amplitude", "rate"},
    "output": {"dir", "csv", "plots"},
}


@dataclass(frozen=True)
class ReinitEvent:
    """Estimator reset at time ``t``.

    ``mode`` is ``default`` (level, stationary, nominal field), ``state``
    (explicit ``state``) or ``errors`` (truth plus the error variables in
    ``errors``: e_v, e_gamma, e_beta).
    """

    t: float
    mode: str = "default"
    state: ObserverState | None = None
    errors: tuple | None = None


@dataclass(frozen=True)
class Scenario:
    name: str = "default"
    duration: float = 120.0
    rate: float = 200.0
    world: WorldConstants = field(default_factory=WorldConstants)
    trajectory_kind: str = "figure8"
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    trajectory_seed: int = 0
    max_rate: float = 2.0
    max_accel: float = 3.0
    sensors: SensorSuite = field(default_factory=SensorSuite)
    gains: Gains = field(default_factory=lambda: validate_gains(5 * np.eye(3), 5 * np.eye(3),
                                                               0.5 * np.eye(3)))
    gains_spec: str = "scalar: 5, 5, 0.5"
    initial_errors: tuple = (np.zeros(3), np.zeros(3), np.zeros(3))
    events: tuple = (ReinitEvent(50.0),)
    disturbance: MagneticDisturbance | None = field(default_factory=MagneticDisturbance)
    rng_seed: int = 0
    out_dir: str = "out"
    write_csv: bool = True
    write_plots: bool = False

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if not self.rate > 0:
            raise ScenarioError("rate must be positive")
        times = [e.t for e in self.events]
        if times != sorted(times):
            raise ScenarioError("events must be time-ordered")
        if self.trajectory_kind not in ("figure8", "random"):
            raise ScenarioError(f"unknown trajectory kind {self.trajectory_kind!r}")

    @property
    def dt(self) -> float:
        return 1.0 / self.rate

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration * self.rate))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, rng_seed=seed, sensors=replace(self.sensors, rng_seed=seed))

    def without_noise(self) -> "Scenario":
        """Same scenario with ideal sensors (no bias, no noise)."""
        return replace(self, sensors=SensorSuite.ideal(self.sensors.rng_seed))


def _floats(text: str, n: int | None, where: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    if n is not None and len(vals) != n:
        raise ScenarioError(f"{where}: expected {n} numbers, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise ScenarioError(f"{where}: non-finite value")
    return vals


def _int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioError(f"{where}: expected an integer") from None


def _bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ScenarioError(f"{where}: expected yes/no, got {text!r}")


def _parse_gains(sec) -> tuple[Gains, str]:
    keys = set(sec)
    if "scalar" in keys:
        if keys - {"scalar"}:
            raise ScenarioError("[gains]: 'scalar' cannot be combined with other keys")
        k, l, m = _floats(sec["scalar"], 3, "[gains] scalar")
        I = np.eye(3)
        return validate_gains(k * I, l * I, m * I), f"scalar: {k:g}, {l:g}, {m:g}"
    if "structured" in keys:
        if keys - {"structured"}:
            raise ScenarioError("[gains]: 'structured' cannot be combined with other keys")
        kx, ky, kz, lx, ly, lz, m = _floats(sec["structured"], 7, "[gains] structured")
        try:
            K = structured_gain(kx, ky, kz)
        except GainNotPositiveDefinite:
            raise GainNotPositiveDefinite("K", min(kx, kz)) from None
        try:
            L = structured_gain(lx, ly, lz)
        except GainNotPositiveDefinite:
            raise GainNotPositiveDefinite("L", min(lx, lz)) from None
        return validate_gains(K, L, m * np.eye(3)), "structured: " + sec["structured"]
    if keys:
        missing = {"K", "L", "M"} - keys
        if missing:
            raise ScenarioError(f"[gains]: missing {sorted(missing)}")
        mats = [np.array(_floats(sec[n], 9, f"[gains] {n}")).reshape(3, 3) for n in ("K", "L", "M")]
        return validate_gains(*mats), "matrix"
    I = np.eye(3)
    return validate_gains(5 * I, 5 * I, 0.5 * I), "scalar: 5, 5, 0.5"


def _parse_sensors(sec, seed: int) -> SensorSuite:
    preset = sec.get("preset", "ideal").strip().lower()
    if preset == "table1":
        suite = SensorSuite.table1(seed)
    elif preset == "ideal":
        suite = SensorSuite.ideal(seed)
    else:
        raise ScenarioError(f"[sensors] preset: unknown {preset!r}")
    over = {}
    for key in ("b_v", "b_omega", "b_a", "b_beta", "var_v", "var_omega", "var_a", "var_beta"):
        if key in sec:
            vals = _floats(sec[key], 3, f"[sensors] {key}")
            if key.startswith("var") and min(vals) < 0:
                raise ScenarioError(f"[sensors] {key}: variances must be non-negative")
            over[key] = np.array(vals)
    suite = replace(suite, **over)
    if "noise" in sec and not _bool(sec["noise"], "[sensors] noise"):
        suite = suite.noise_free()
    return suite


def _vec(sec, key, where, default=None):
    if key not in sec:
        return np.zeros(3) if default is None else default
    return np.array(_floats(sec[key], 3, f"[{where}] {key}"))


def _parse_reinit(name: str, sec) -> ReinitEvent | None:
    mode = sec.get("mode", "default").strip().lower()
    if mode == "none":
        return None
    if "t" not in sec:
        raise ScenarioError(f"[{name}]: missing 't'")
    t = _floats(sec["t"], 1, f"[{name}] t")[0]
    if mode == "default":
        return ReinitEvent(t)
    if mode == "state":
        st = ObserverState(_vec(sec, "v", name), _vec(sec, "gamma", name), _vec(sec, "beta", name))
        return ReinitEvent(t, "state", state=st)
    if mode == "errors":
        errs = tuple(_vec(sec, k, name) for k in ("error_v", "error_gamma", "error_beta"))
        return ReinitEvent(t, "errors", errors=errs)
    raise ScenarioError(f"[{name}] mode: unknown {mode!r}")


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse scenario text. See the module docstring for the format."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   default_section="__none__")
    cp.optionxform = str  # keys are case-sensitive (K, L, M, B)
    try:
        cp.read_string(text, source=name)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError(f"{name}, line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ScenarioError(f"{name}, line {lineno}: cannot parse") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ScenarioError(f"{name}, line {exc.lineno}: {exc.message}") from None

    secs = {}
    reinit_secs = []
    for sname in cp.sections():
        base = sname.split(".")[0]
        if base not in _SCHEMA:
            raise ScenarioError(f"{name}: unknown section [{sname}]")
        unknown = set(cp[sname]) - _SCHEMA[base]
        if unknown:
            raise ScenarioError(f"{name}: unknown key(s) {sorted(unknown)} in [{sname}]")
        if base == "reinit":
            reinit_secs.append(sname)
        elif sname != base:
            raise ScenarioError(f"{name}: only [reinit] sections may be numbered, got [{sname}]")
        else:
            secs[base] = cp[sname]
    get = lambda s: secs.get(s, {})  # noqa: E731

    run = get("run")
    duration = _floats(run.get("duration", "120"), 1, "[run] duration")[0]
    rate = _floats(run.get("rate", "200"), 1, "[run] rate")[0]
    seed = _int(run.get("seed", "0"), "[run] seed")

    w = get("world")
    g = _floats(w.get("g", str(STANDARD_G)), 1, "[world] g")[0]
    B = _vec(w, "B", "world", NOMINAL_B.copy())
    world = WorldConstants(g, B)
    tr = get("trajectory")
    kind = tr.get("kind", "figure8").strip().lower()
    tparams = TrajectoryParams(
        amplitude=_floats(tr.get("amplitude", "20"), 1, "[trajectory] amplitude")[0],
        period=_floats(tr.get("period", "40"), 1, "[trajectory] period")[0],
        tilt_deg=_floats(tr.get("tilt_deg", "15"), 1, "[trajectory] tilt_deg")[0],
        excitation_deg=_floats(tr.get("excitation_deg", "10"), 1, "[trajectory] excitation_deg")[0],
    )
    if not tparams.period > 0:
        raise ScenarioError("[trajectory] period must be positive")

    sensors = _parse_sensors(get("sensors"), seed)
    gains, gspec = _parse_gains(get("gains"))

    ini = get("initial")
    init_err = tuple(_vec(ini, k, "initial") for k in ("error_v", "error_gamma", "error_beta"))

    if reinit_secs:
        events = [ev for s in reinit_secs if (ev := _parse_reinit(s, cp[s])) is not None]
    else:
        events = [ReinitEvent(50.0)]
    events.sort(key=lambda e: e.t)

    d = get("disturbance")
    disturbance = None
    if _bool(d.get("enabled", "yes"), "[disturbance] enabled"):
        try:
            disturbance = MagneticDisturbance(
                _floats(d.get("t_start", "80"), 1, "[disturbance] t_start")[0],
                _floats(d.get("t_end", "100"), 1, "[disturbance] t_end")[0],
                _floats(d.get("amplitude", "1.5"), 1, "[disturbance] amplitude")[0],
                _floats(d.get("rate", "0.5"), 1, "[disturbance] rate")[0],
            )
        except ValueError as exc:
            raise ScenarioError(f"[disturbance]: {exc}") from None

    out = get("output")
    return Scenario(
        name=run.get("name", name),
        duration=duration,
        rate=rate,
        world=world,
        trajectory_kind=kind,
        trajectory=tparams,
        trajectory_seed=_int(tr.get("seed", "0"), "[trajectory] seed"),
        max_rate=_floats(tr.get("max_rate", "2"), 1, "[trajectory] max_rate")[0],
        max_accel=_floats(tr.get("max_accel", "3"), 1, "[trajectory] max_accel")[0],
        sensors=sensors,
        gains=gains,
        gains_spec=gspec,
        initial_errors=init_err,
        events=tuple(events),
        disturbance=disturbance,
        rng_seed=seed,
        out_dir=out.get("dir", "out"),
        write_csv=_bool(out.get("csv", "yes"), "[output] csv"),
        write_plots=_bool(out.get("plots", "no"), "[output] plots"),
    )


def load_scenario(path) -> Scenario:
    """Load a scenario file, or a built-in preset by name (``paper-fig8``)."""
    key = str(path)
    if key in PRESETS:
        return parse_scenario(PRESETS[key], key)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {p}: {exc.strerror}") from None
    return parse_scenario(text, p.stem)

"""Scenario configuration: JSON schema, embedded presets and validation.

A config file is a JSON object. An optional ``"preset"`` key names an
embedded preset that the rest of the file is deep-merged over. Validation
errors carry the file path and the line of the offending key.
"""

from __future__ import annotations

import copy
import json
import json.decoder
import json.scanner
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chain as chain_mod
from .barrier import DEFAULT_EPSILON, Obstacle
from .perf import TRAJECTORY_KINDS, PerfConfig
from .safety import FilterConfig, Mode

ROI_RULES = ("table1_or", "fig10_and")
MOTION_KINDS = ("static", "scripted", "spring_damper", "replay")
COVERAGE_KINDS = ("far", "squeeze")


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str, source: str = "<config>", line: int | None = None):
        self.field_path = field_path
        self.message = message
        self.source = source
        self.line = line
        super().__init__(str(self))

    def __str__(self):
        where = f"{self.source}:{self.line}" if self.line is not None else self.source
        return f"{where}: {self.field_path}: {self.message}"


# ---------------------------------------------------------------------------
# typed config


@dataclass(frozen=True)
class MotionConfig:
    kind: str = "static"
    k: float = 0.0
    b: float = 0.0
    v_max: float = 1.0
    waypoints: tuple = ()      # ((t, x, y, z), ...)
    file: str | None = None


@dataclass(frozen=True)
class ObstacleConfig:
    id: str
    radius: float
    priority: int = 0
    beta: float = 0.0
    gamma: float = 1.0
    delta_cap: float = math.inf
    motion: MotionConfig = field(default_factory=MotionConfig)
    position: tuple | None = None           # absolute start position
    offset: tuple | None = None             # start position relative to the initial end-effector
    initial_distance: tuple | None = None   # (lo, hi) shell about the initial end-effector
    planar: bool = False                    # sample shell directions in the xy plane only

    def obstacle(self, position, velocity) -> Obstacle:
        return Obstacle(self.id, position, velocity, self.radius, self.priority,
                        self.beta, self.delta_cap, self.gamma)


@dataclass(frozen=True)
class TrajectoryConfig:
    kind: str = "circle_xy"
    size: float = 0.1
    period: float = 10.0
    displacement: tuple | None = None


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    duration: float = 10.0
    seed: int = 0
    placement_margin: float = 0.05
    max_placement_tries: int = 1000
    violation_tol: float = 1e-3


@dataclass(frozen=True)
class OutputConfig:
    roi_rule: str = "table1_or"
    roi_distance: float = 0.6


@dataclass(frozen=True)
class CoverageConfig:
    kind: str = "squeeze"
    point: int | None = None               # control point to pinch; default end-effector
    red_radius: float = 0.05
    green_radius: float = 0.05
    red_h: tuple = (0.0, 0.05)
    green_h: tuple = (-0.05, 0.05)
    inward_speed: tuple = (0.0, 0.3)
    gamma: float = 1.0
    beta: float = 500.0
    far_distance: float = 10.0
    planar: bool = True


@dataclass(frozen=True)
class SweepConfig:
    snapshot_time: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    chain: chain_mod.KinematicChain
    chain_spec: object
    q0: np.ndarray
    trajectory: TrajectoryConfig
    obstacles: tuple
    filter: FilterConfig
    controller: PerfConfig
    sim: SimConfig
    outputs: OutputConfig
    coverage: CoverageConfig
    sweep: SweepConfig
    raw: dict = field(repr=False, default_factory=dict)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw.setdefault("sim", {})["seed"] = int(seed)
        return from_dict(raw)


# ---------------------------------------------------------------------------
# presets

_FRANKA_BASE = {
    "chain": "franka7",
    "q0": None,
    "trajectory": {"kind": "circle_xy", "size": 0.1, "period": 10.0},
    "controller": {"lambda": 2.0, "kp_joint": 0.5, "mu": 0.01},
    "filter": {"mode": "relaxed", "perf_weight": 200.0, "epsilon": DEFAULT_EPSILON,
               "constrained_points": None, "emergency_policy": "stop", "joint_limit_gain": 5.0},
    "sim": {"dt": 1e-3, "duration": 10.0, "seed": 0, "placement_margin": 0.05},
    "outputs": {"roi_rule": "table1_or", "roi_distance": 0.6},
    "coverage": {"kind": "far"},
    "sweep": {"snapshot_time": 0.0},
}

# Table-2 difficulty rows: initial distance range, spring constant, damping, speed clamp
DIFFICULTY = {
    "easy": {"initial_distance": [0.75, 1.2], "k": 0.5, "b": 1.0, "v_max": 0.05},
    "medium": {"initial_distance": [0.6, 0.9], "k": 2.0, "b": 0.2, "v_max": 0.10},
    "hard": {"initial_distance": [0.3, 0.6], "k": 4.0, "b": 0.1, "v_max": 0.15},
}

_OBSTACLE_CLASSES = (
    # id, radius, priority, beta
    ("red", 0.10, 0, 0.0),
    ("blue", 0.08, 1, 500.0),
    ("green", 0.06, 2, 250.0),
)


def _difficulty_preset(name: str, duration: float) -> dict:
    d = DIFFICULTY[name]
    cfg = copy.deepcopy(_FRANKA_BASE)
    cfg["sim"]["duration"] = duration
    cfg["obstacles"] = [
        {
            "id": oid, "radius": r, "priority": pr, "beta": beta, "gamma": 1.0, "delta_cap": None,
            "initial_distance": list(d["initial_distance"]),
            "motion": {"kind": "spring_damper", "k": d["k"], "b": d["b"], "v_max": d["v_max"]},
        }
        for oid, r, pr, beta in _OBSTACLE_CLASSES
    ]
    return cfg


def _fig11_preset() -> dict:
    # planar arm driving its end-effector through the gap between two static spheres
    return {
        "chain": {"preset": "planar2"},
        "q0": [-0.6, 1.2],
        "trajectory": {"kind": "line", "period": 6.0, "displacement": [0.0, 1.0, 0.0]},
        "controller": {"lambda": 2.0, "kp_joint": 0.0, "mu": 0.01},
        "filter": {"mode": "relaxed", "perf_weight": 200.0, "epsilon": 0.02,
                   "constrained_points": None, "emergency_policy": "stop"},
        "sim": {"dt": 1e-3, "duration": 8.0, "seed": 0, "placement_margin": 0.0},
        "outputs": {"roi_rule": "table1_or", "roi_distance": 0.6},
        "coverage": {"kind": "squeeze"},
        "sweep": {"snapshot_time": 0.0},
        "obstacles": [
            {"id": "red", "radius": 0.15, "priority": 0, "beta": 0.0, "gamma": 30.0,
             "delta_cap": None, "offset": [-0.2, 0.5, 0.0], "motion": {"kind": "static"}},
            {"id": "green", "radius": 0.15, "priority": 1, "beta": 1.0, "gamma": 30.0,
             "delta_cap": None, "offset": [0.2, 0.5, 0.0], "motion": {"kind": "static"}},
        ],
    }


PRESETS = {
    "easy": lambda: _difficulty_preset("easy", 30.0),
    "medium": lambda: _difficulty_preset("medium", 8.0),
    "hard": lambda: _difficulty_preset("hard", 4.0),
    "fig11_squeeze": _fig11_preset,
}

FIG11_CAPS = (0.0, 0.3, 0.6, math.inf)


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return PRESETS[name]()


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# ---------------------------------------------------------------------------
# JSON with key line numbers


class _Located(dict):
    """dict that remembers the source line of each key."""

    lines: dict

    def line_of(self, key):
        return self.lines.get(key)


def _locating_decoder(text: str):
    dec = json.JSONDecoder()

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        s, start = s_and_end
        obj, end = json.decoder.JSONObject(s_and_end, strict, scan_once, None, None, memo)
        located = _Located(obj)
        located.lines = _top_level_key_lines(s, start, end)
        return located, end

    dec.parse_object = parse_object
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def _top_level_key_lines(s: str, start: int, end: int) -> dict:
    """Line numbers of the keys that sit directly inside the object spanning s[start:end]."""
    lines = {}
    depth, i, expect_key = 0, start, True
    while i < end:
        c = s[i]
        if c == '"':
            j = i + 1
            while s[j] != '"':
                j += 2 if s[j] == "\\" else 1
            if depth == 0 and expect_key:
                key = json.loads(s[i:j + 1])
                lines.setdefault(key, s.count("\n", 0, i) + 1)
                expect_key = False
            i = j + 1
            continue
        if c in "{[":
            depth += 1
        elif c in "}]":
            depth -= 1
        elif c == "," and depth == 0:
            expect_key = True
        i += 1
    return lines


def loads(text: str, source: str = "<config>") -> dict:
    try:
        return _locating_decoder(text).decode(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", exc.msg, source, exc.lineno) from None


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc.strerror}", str(path)) from None
    raw = loads(text, str(path))
    return from_dict(raw, source=str(path))


# ---------------------------------------------------------------------------
# validation


class _V:
    """Field reader that turns type or range problems into ConfigError with a location."""

    def __init__(self, source: str, root: dict):
        self.source = source
        self.root = root

    def fail(self, path: str, message: str, node=None, key=None):
        line = None
        if isinstance(node, _Located) and key is not None:
            line = node.line_of(key)
        if line is None:
            line = self._find_line(path)
        raise ConfigError(path, message, self.source, line)

    def _find_line(self, path: str):
        # walk as far down the raw tree as the path allows and report the deepest known key line
        node, line = self.root, None
        for part in path.replace("]", "").replace("[", ".").split("."):
            if isinstance(node, _Located) and part in node:
                line = node.line_of(part) or line
                node = node[part]
            elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
                node = node[int(part)]
            else:
                break
        return line

    def number(self, node, key, path, default=None, lo=None, lo_open=False, hi=None, allow_inf=False,
               required=False):
        if key not in node or node[key] is None:
            if required:
                self.fail(path, "is required", node, key)
            return default
        v = node[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, f"must be a number, got {json.dumps(v)}", node, key)
        v = float(v)
        if math.isnan(v) or (math.isinf(v) and not allow_inf):
            self.fail(path, "must be finite", node, key)
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(path, f"must be {'>' if lo_open else '>='} {lo:g}, got {v:g}", node, key)
        if hi is not None and v > hi:
            self.fail(path, f"must be <= {hi:g}, got {v:g}", node, key)
        return v

    def vector(self, node, key, path, length=None, required=False):
        if key not in node or node[key] is None:
            if required:
                self.fail(path, "is required", node, key)
            return None
        v = node[key]
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                              for x in v):
            self.fail(path, "must be a list of numbers", node, key)
        if length is not None and len(v) != length:
            self.fail(path, f"must have {length} entries, got {len(v)}", node, key)
        if not all(math.isfinite(x) for x in v):
            self.fail(path, "entries must be finite", node, key)
        return tuple(float(x) for x in v)

    def choice(self, node, key, path, options, default):
        v = node.get(key, default)
        if v is None:
            v = default
        if v not in options:
            self.fail(path, f"must be one of {', '.join(map(str, options))}, got {json.dumps(v)}", node, key)
        return v

    def section(self, node, key, path):
        v = node.get(key)
        if v is None:
            return _Located()
        if not isinstance(v, dict):
            self.fail(path, "must be an object", node, key)
        return v

    def unknown(self, node, allowed, path):
        for k in node:
            if k not in allowed:
                self.fail(f"{path}.{k}" if path else k, "unknown field", node, k)


_TOP_KEYS = {"preset", "chain", "q0", "trajectory", "obstacles", "filter", "controller", "sim",
             "outputs", "coverage", "sweep"}


def resolve(raw: dict, source: str = "<config>") -> dict:
    """Apply the preset (if any) and return the effective raw config."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object", source, 1)
    name = raw.get("preset")
    if name is None:
        return raw
    if not isinstance(name, str) or name not in PRESETS:
        line = raw.line_of("preset") if isinstance(raw, _Located) else None
        raise ConfigError("preset", f"unknown preset {json.dumps(name)} (choose from {', '.join(PRESETS)})",
                          source, line)
    overrides = {k: v for k, v in raw.items() if k != "preset"}
    merged = deep_merge(preset(name), overrides)
    return _relocate(merged, raw)


def _relocate(merged, raw):
    """Carry key line numbers from the user's file onto the merged tree where keys coincide."""
    if isinstance(merged, dict):
        out = _Located(merged)
        out.lines = dict(raw.lines) if isinstance(raw, _Located) else {}
        for k, v in merged.items():
            sub = raw.get(k) if isinstance(raw, dict) else None
            out[k] = _relocate(v, sub)
        return out
    if isinstance(merged, list):
        return [_relocate(v, raw[i] if isinstance(raw, list) and i < len(raw) else None)
                for i, v in enumerate(merged)]
    return merged


def from_dict(raw: dict, source: str = "<config>") -> ScenarioConfig:
    raw = resolve(raw, source)
    v = _V(source, raw)
    v.unknown(raw, _TOP_KEYS, "")

    chain, chain_spec = _chain(v, raw)
    n = chain.n

    q0 = v.vector(raw, "q0", "q0", length=n)
    q0 = chain.home_configuration() if q0 is None else np.array(q0)
    if np.any(q0 < chain.joint_lower) or np.any(q0 > chain.joint_upper):
        v.fail("q0", "outside the joint limits", raw, "q0")

    tr = v.section(raw, "trajectory", "trajectory")
    v.unknown(tr, {"kind", "size", "period", "displacement"}, "trajectory")
    trajectory = TrajectoryConfig(
        kind=v.choice(tr, "kind", "trajectory.kind", TRAJECTORY_KINDS, "circle_xy"),
        size=v.number(tr, "size", "trajectory.size", 0.1, lo=0.0),
        period=v.number(tr, "period", "trajectory.period", 10.0, lo=0.0, lo_open=True),
        displacement=v.vector(tr, "displacement", "trajectory.displacement", length=3),
    )

    ctl = v.section(raw, "controller", "controller")
    v.unknown(ctl, {"lambda", "kp_joint", "mu"}, "controller")
    kp = ctl.get("kp_joint", 0.5)
    if isinstance(kp, list):
        kp = v.vector(ctl, "kp_joint", "controller.kp_joint", length=n)
        if min(kp) < 0:
            v.fail("controller.kp_joint", "entries must be >= 0", ctl, "kp_joint")
    else:
        kp = v.number(ctl, "kp_joint", "controller.kp_joint", 0.5, lo=0.0)
    controller = PerfConfig(
        lam=v.number(ctl, "lambda", "controller.lambda", 2.0, lo=0.0, lo_open=True),
        kp_joint=kp,
        mu=v.number(ctl, "mu", "controller.mu", 0.01, lo=0.0, lo_open=True),
    )

    flt = v.section(raw, "filter", "filter")
    v.unknown(flt, {"mode", "perf_weight", "epsilon", "constrained_points", "emergency_policy",
                    "joint_limit_gain"}, "filter")
    pts = flt.get("constrained_points")
    if pts is not None:
        if (not isinstance(pts, list) or not pts
                or not all(isinstance(i, int) and not isinstance(i, bool) and 0 <= i < len(chain.control_points)
                           for i in pts)):
            v.fail("filter.constrained_points",
                   f"must be a non-empty list of control point indices in [0, {len(chain.control_points)})",
                   flt, "constrained_points")
        pts = tuple(pts)
    filter_cfg = FilterConfig(
        mode=Mode(v.choice(flt, "mode", "filter.mode", ("strict", "relaxed"), "relaxed")),
        perf_weight=v.number(flt, "perf_weight", "filter.perf_weight", 200.0, lo=0.0, lo_open=True),
        constrained_point_indices=pts,
        emergency_policy=v.choice(flt, "emergency_policy", "filter.emergency_policy", ("stop",), "stop"),
        epsilon=v.number(flt, "epsilon", "filter.epsilon", DEFAULT_EPSILON, lo=0.0),
        joint_limit_gain=v.number(flt, "joint_limit_gain", "filter.joint_limit_gain", None,
                                  lo=0.0, lo_open=True),
    )

    sim_raw = v.section(raw, "sim", "sim")
    v.unknown(sim_raw, {"dt", "duration", "seed", "placement_margin", "max_placement_tries",
                        "violation_tol"}, "sim")
    seed = sim_raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        v.fail("sim.seed", "must be a non-negative integer", sim_raw, "seed")
    tries = sim_raw.get("max_placement_tries", 1000)
    if isinstance(tries, bool) or not isinstance(tries, int) or tries < 1:
        v.fail("sim.max_placement_tries", "must be a positive integer", sim_raw, "max_placement_tries")
    sim = SimConfig(
        dt=v.number(sim_raw, "dt", "sim.dt", 1e-3, lo=0.0, lo_open=True),
        duration=v.number(sim_raw, "duration", "sim.duration", 10.0, lo=0.0, lo_open=True),
        seed=seed,
        placement_margin=v.number(sim_raw, "placement_margin", "sim.placement_margin", 0.05, lo=0.0),
        max_placement_tries=tries,
        violation_tol=v.number(sim_raw, "violation_tol", "sim.violation_tol", 1e-3, lo=0.0),
    )

    if filter_cfg.joint_limit_gain is not None and filter_cfg.joint_limit_gain * sim.dt > 1.0:
        v.fail("filter.joint_limit_gain", f"times sim.dt must be <= 1 so a step cannot cross a joint limit",
               flt, "joint_limit_gain")

    out_raw = v.section(raw, "outputs", "outputs")
    v.unknown(out_raw, {"roi_rule", "roi_distance"}, "outputs")
    outputs = OutputConfig(
        roi_rule=v.choice(out_raw, "roi_rule", "outputs.roi_rule", ROI_RULES, "table1_or"),
        roi_distance=v.number(out_raw, "roi_distance", "outputs.roi_distance", 0.6, lo=0.0, lo_open=True),
    )

    obstacles = _obstacles(v, raw, n)
    if filter_cfg.mode is Mode.RELAXED:
        for i, ob in enumerate(obstacles):
            if ob.priority > 0 and not ob.beta > 0:
                v.fail(f"obstacles[{i}].beta", "must be > 0 for an obstacle with priority > 0",
                       raw["obstacles"][i], "beta")

    coverage = _coverage(v, raw, chain)
    sw = v.section(raw, "sweep", "sweep")
    v.unknown(sw, {"snapshot_time"}, "sweep")
    sweep = SweepConfig(snapshot_time=v.number(sw, "snapshot_time", "sweep.snapshot_time", 0.0, lo=0.0))

    return ScenarioConfig(
        chain=chain, chain_spec=chain_spec, q0=q0, trajectory=trajectory, obstacles=tuple(obstacles),
        filter=filter_cfg, controller=controller, sim=sim, outputs=outputs, coverage=coverage,
        sweep=sweep, raw=_plain(raw),
    )


def _plain(node):
    """Strip location info so the effective config can be echoed as ordinary JSON."""
    if isinstance(node, dict):
        return {k: _plain(x) for k, x in node.items()}
    if isinstance(node, list):
        return [_plain(x) for x in node]
    return node


def _chain(v: _V, raw: dict):
    spec = raw.get("chain", "franka7")
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict):
        v.fail("chain", "must be a preset name or an object", raw, "chain")
    if "preset" in spec:
        name = spec["preset"]
        if name not in chain_mod.CHAIN_PRESETS:
            v.fail("chain.preset", f"unknown chain preset {json.dumps(name)} "
                   f"(choose from {', '.join(chain_mod.CHAIN_PRESETS)})", spec, "preset")
        kwargs = {k: x for k, x in spec.items() if k != "preset"}
        try:
            return chain_mod.CHAIN_PRESETS[name](**kwargs), _plain(spec)
        except (TypeError, ValueError) as exc:
            v.fail("chain", str(exc), raw, "chain")
    try:
        joints = [chain_mod.Joint(np.array(j["axis"], dtype=float), np.array(j["offset"], dtype=float))
                  for j in spec["joints"]]
        cps = [chain_mod.ControlPoint(int(c["link"]), np.array(c["point"], dtype=float), float(c["radius"]),
                                      bool(c.get("end_effector", False)), str(c.get("name", "")))
               for c in spec["control_points"]]
        ch = chain_mod.KinematicChain(
            joints=tuple(joints),
            joint_lower=np.array(spec["joint_lower"], dtype=float),
            joint_upper=np.array(spec["joint_upper"], dtype=float),
            vel_lower=np.array(spec["vel_lower"], dtype=float),
            vel_upper=np.array(spec["vel_upper"], dtype=float),
            control_points=tuple(cps),
            name=str(spec.get("name", "custom")),
            home=None if spec.get("home") is None else np.array(spec["home"], dtype=float),
        )
    except KeyError as exc:
        v.fail(f"chain.{exc.args[0]}", "is required", spec, None)
    except (TypeError, ValueError) as exc:
        v.fail("chain", str(exc), raw, "chain")
    return ch, _plain(spec)


_OBSTACLE_KEYS = {"id", "radius", "priority", "beta", "gamma", "delta_cap", "motion", "position",
                  "offset", "initial_distance", "planar"}


def _obstacles(v: _V, raw: dict, n: int) -> list[ObstacleConfig]:
    items = raw.get("obstacles", [])
    if items is None:
        items = []
    if not isinstance(items, list):
        v.fail("obstacles", "must be a list", raw, "obstacles")
    out, seen = [], set()
    for i, ob in enumerate(items):
        p = f"obstacles[{i}]"
        if not isinstance(ob, dict):
            v.fail(p, "must be an object", raw, "obstacles")
        v.unknown(ob, _OBSTACLE_KEYS, p)
        oid = ob.get("id", f"obs{i}")
        if not isinstance(oid, str) or not oid or oid in seen:
            v.fail(f"{p}.id", "must be a unique non-empty string", ob, "id")
        seen.add(oid)
        prio = ob.get("priority", 0)
        if isinstance(prio, bool) or not isinstance(prio, int) or prio < 0:
            v.fail(f"{p}.priority", "must be a non-negative integer", ob, "priority")
        motion = _motion(v, ob, p)
        position = v.vector(ob, "position", f"{p}.position", length=3)
        offset = v.vector(ob, "offset", f"{p}.offset", length=3)
        dist = v.vector(ob, "initial_distance", f"{p}.initial_distance", length=2)
        placed = sum(x is not None for x in (position, offset, dist))
        if motion.kind not in ("scripted", "replay") and placed != 1:
            v.fail(p, "needs exactly one of position, offset or initial_distance", raw, "obstacles")
        if dist is not None and not 0 <= dist[0] <= dist[1]:
            v.fail(f"{p}.initial_distance", "must satisfy 0 <= lo <= hi", ob, "initial_distance")
        out.append(ObstacleConfig(
            id=oid,
            radius=v.number(ob, "radius", f"{p}.radius", required=True, lo=0.0),
            priority=prio,
            beta=v.number(ob, "beta", f"{p}.beta", 0.0, lo=0.0),
            gamma=v.number(ob, "gamma", f"{p}.gamma", 1.0, lo=0.0, lo_open=True),
            delta_cap=v.number(ob, "delta_cap", f"{p}.delta_cap", math.inf, lo=0.0, allow_inf=True),
            motion=motion,
            position=position,
            offset=offset,
            initial_distance=dist,
            planar=bool(ob.get("planar", False)),
        ))
    return out


def _motion(v: _V, ob: dict, p: str) -> MotionConfig:
    m = v.section(ob, "motion", f"{p}.motion")
    v.unknown(m, {"kind", "k", "b", "v_max", "waypoints", "file"}, f"{p}.motion")
    kind = v.choice(m, "kind", f"{p}.motion.kind", MOTION_KINDS, "static")
    if kind == "spring_damper":
        return MotionConfig(
            kind=kind,
            k=v.number(m, "k", f"{p}.motion.k", required=True, lo=0.0),
            b=v.number(m, "b", f"{p}.motion.b", required=True, lo=0.0),
            v_max=v.number(m, "v_max", f"{p}.motion.v_max", required=True, lo=0.0, lo_open=True),
        )
    if kind == "scripted":
        wps = m.get("waypoints")
        if (not isinstance(wps, list) or not wps
                or not all(isinstance(w, list) and len(w) == 4
                           and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in w)
                           for w in wps)):
            v.fail(f"{p}.motion.waypoints", "must be a non-empty list of [t, x, y, z]", m, "waypoints")
        ts = [w[0] for w in wps]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            v.fail(f"{p}.motion.waypoints", "timestamps must be strictly increasing", m, "waypoints")
        return MotionConfig(kind=kind, waypoints=tuple(tuple(float(x) for x in w) for w in wps))
    if kind == "replay":
        f = m.get("file")
        if not isinstance(f, str) or not f:
            v.fail(f"{p}.motion.file", "must name a CSV file", m, "file")
        return MotionConfig(kind=kind, file=f)
    return MotionConfig(kind="static")


def _coverage(v: _V, raw: dict, chain) -> CoverageConfig:
    c = v.section(raw, "coverage", "coverage")
    v.unknown(c, {"kind", "point", "red_radius", "green_radius", "red_h", "green_h", "inward_speed",
                  "gamma", "beta", "far_distance", "planar"}, "coverage")
    point = c.get("point")
    if point is not None and (isinstance(point, bool) or not isinstance(point, int)
                              or not 0 <= point < len(chain.control_points)):
        v.fail("coverage.point", "must be a control point index", c, "point")

    def rng(key, default):
        r = v.vector(c, key, f"coverage.{key}", length=2)
        if r is None:
            return default
        if r[0] > r[1]:
            v.fail(f"coverage.{key}", "must satisfy lo <= hi", c, key)
        return r

    d = CoverageConfig()
    return CoverageConfig(
        kind=v.choice(c, "kind", "coverage.kind", COVERAGE_KINDS, "squeeze"),
        point=point,
        red_radius=v.number(c, "red_radius", "coverage.red_radius", d.red_radius, lo=0.0),
        green_radius=v.number(c, "green_radius", "coverage.green_radius", d.green_radius, lo=0.0),
        red_h=rng("red_h", d.red_h),
        green_h=rng("green_h", d.green_h),
        inward_speed=rng("inward_speed", d.inward_speed),
        gamma=v.number(c, "gamma", "coverage.gamma", d.gamma, lo=0.0, lo_open=True),
        beta=v.number(c, "beta", "coverage.beta", d.beta, lo=0.0, lo_open=True),
        far_distance=v.number(c, "far_distance", "coverage.far_distance", d.far_distance, lo=0.0, lo_open=True),
        planar=bool(c.get("planar", d.planar)),
    )


def effective_json(cfg: ScenarioConfig) -> str:
    """Fully resolved config; loading it back reproduces the same run."""
    return json.dumps(_plain(cfg.raw), indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")

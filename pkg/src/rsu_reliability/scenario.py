"""Deterministic intersection scenario simulator with fault injection.

One scenario describes ground-truth traffic along lanes, an RSU perception
model bounded by a field-of-view polygon, the ego vehicle's own perception
cone and localization, and at most one injected fault.  Identical configs
with identical seeds produce bitwise-identical streams: every noisy quantity
is drawn from a counter-based generator keyed by (seed, entity, channel), so
adding or removing one object never shifts another object's noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox

from rsu_reliability.geometry import (
    GeometryError,
    IntersectionMap,
    LaneGeometry,
    cone_contains,
)

FAULT_KINDS = (
    "none",
    "missed_detection",
    "map_shift_east",
    "underestimated_sigma",
    "erratic_motion",
)
CLASS_TAGS = ("vehicle", "bicycle", "ego")

EGO_OBJECT_ID = 0

# Noise channel indices for the per-entity counter-based generators.
_CH_RSU = 0
_CH_EGO_PERC = 1
_CH_EGO_LOC = 2


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending key."""


class FaultError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectState:
    """One perceived road user at one instant."""

    object_id: int
    position: tuple[float, float]
    velocity: tuple[float, float]
    sigma: float
    timestamp: float
    class_tag: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))
        if self.sigma <= 0.0:
            raise ConfigError(f"object {self.object_id}: sigma must be positive")
        if self.class_tag not in CLASS_TAGS:
            raise ConfigError(f"object {self.object_id}: unknown class_tag {self.class_tag!r}")


@dataclass(frozen=True)
class ObjectList:
    """A timestamped object list from one source."""

    timestamp: float
    objects: tuple[ObjectState, ...]
    source: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.source not in ("RSU", "EGO"):
            raise ConfigError(f"unknown object list source {self.source!r}")
        for obj in self.objects:
            if obj.timestamp != self.timestamp:
                raise ConfigError("object timestamps must equal the list timestamp")


@dataclass(frozen=True)
class EgoPose:
    position: tuple[float, float]
    sigma_ego: float
    timestamp: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if self.sigma_ego <= 0.0:
            raise ConfigError("ego.sigma must be positive")


@dataclass(frozen=True)
class TruthState:
    """Exact (noise-free) state of one road user."""

    object_id: int
    position: tuple[float, float]
    velocity: tuple[float, float]
    class_tag: str


@dataclass(frozen=True)
class GroundTruth:
    timestamp: float
    objects: tuple[TruthState, ...]


@dataclass(frozen=True)
class FaultSpec:
    """Which fault is injected and when.

    ``magnitude`` is kind specific: east shift in meters, the factor by which
    the reported sigma understates the truth, the deceleration in m/s^2, or
    the numeric id of the object to suppress.  ``erratic_motion`` acts on the
    first non-ego actor's ground truth.
    """

    kind: str = "none"
    onset: float = 0.0
    magnitude: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS:
            raise ConfigError(
                f"fault.kind: unknown kind {self.kind!r}, expected one of {FAULT_KINDS}"
            )
        if self.onset < 0.0:
            raise ConfigError("fault.onset: must be non-negative")
        if self.kind != "none" and self.magnitude <= 0.0:
            raise ConfigError("fault.magnitude: must be positive for an active fault")

    def active(self, t: float) -> bool:
        return self.kind != "none" and t >= self.onset - 1e-12


@dataclass(frozen=True)
class ActorSpec:
    """A road user following a lane at constant speed.

    Entry time may be negative, meaning the actor is already en route at the
    start of the scenario.
    """

    lane_id: str
    entry_time: float
    speed: float
    class_tag: str = "vehicle"

    def __post_init__(self) -> None:
        if self.speed < 0.0:
            raise ConfigError("actors[].speed: must be non-negative")
        if self.class_tag not in ("vehicle", "bicycle"):
            raise ConfigError(f"actors[].class_tag: unknown tag {self.class_tag!r}")


@dataclass(frozen=True)
class EgoSpec:
    lane_id: str
    entry_time: float = 0.0
    speed: float = 8.0
    sigma: float = 0.1
    fov_range: float = 40.0
    fov_half_angle_deg: float = 60.0

    def __post_init__(self) -> None:
        if self.speed < 0.0:
            raise ConfigError("ego.speed: must be non-negative")
        if self.sigma <= 0.0:
            raise ConfigError("ego.sigma: must be positive")
        if self.fov_range <= 0.0:
            raise ConfigError("ego.fov_range: must be positive")
        if not 0.0 < self.fov_half_angle_deg <= 180.0:
            raise ConfigError("ego.fov_half_angle_deg: must be in (0, 180]")


@dataclass(frozen=True)
class NoiseSpec:
    rsu_pos_std: float = 0.3
    ego_perc_std: float = 0.15

    def __post_init__(self) -> None:
        if self.rsu_pos_std <= 0.0:
            raise ConfigError("noise.rsu_pos_std: must be positive")
        if self.ego_perc_std <= 0.0:
            raise ConfigError("noise.ego_perc_std: must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    duration: float
    map: IntersectionMap
    ego: EgoSpec
    actors: tuple[ActorSpec, ...] = ()
    fault: FaultSpec = FaultSpec()
    noise: NoiseSpec = NoiseSpec()
    tick: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "actors", tuple(self.actors))
        if self.tick <= 0.0:
            raise ConfigError("tick: must be positive")
        if self.duration < 0.0:
            raise ConfigError("duration: must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must fit an unsigned 64-bit integer")
        known = {lane.lane_id for lane in self.map.lanes}
        if self.ego.lane_id not in known:
            raise ConfigError(f"ego.lane_id: unknown lane {self.ego.lane_id!r}")
        for i, actor in enumerate(self.actors):
            if actor.lane_id not in known:
                raise ConfigError(
                    f"actors[{i}].lane_id: unknown lane {actor.lane_id!r}"
                )

    @property
    def n_ticks(self) -> int:
        # A zero-length scenario still emits one tick at t = 0.
        return max(1, round(self.duration / self.tick))


@dataclass(frozen=True)
class Tick:
    t: float
    ego: EgoPose
    rsu: ObjectList
    ego_perception: ObjectList
    truth: GroundTruth


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}{key}: missing required key")
    return mapping[key]


def _lane_from_dict(d: dict, path: str) -> LaneGeometry:
    try:
        return LaneGeometry(
            lane_id=str(_require(d, "lane_id", path)),
            centerline=tuple(
                (float(p[0]), float(p[1])) for p in _require(d, "centerline", path)
            ),
            width=float(_require(d, "width", path)),
        )
    except GeometryError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def map_from_dict(d: dict, path: str = "map.") -> IntersectionMap:
    lanes = tuple(
        _lane_from_dict(lane, f"{path}lanes[{i}].")
        for i, lane in enumerate(_require(d, "lanes", path))
    )
    blind = d.get("blind_spot")
    try:
        return IntersectionMap(
            lanes=lanes,
            rsu_fov=tuple((float(p[0]), float(p[1])) for p in _require(d, "rsu_fov", path)),
            blind_spot=tuple((float(p[0]), float(p[1])) for p in blind) if blind else None,
        )
    except GeometryError as exc:
        raise ConfigError(f"{path[:-1]}: {exc}") from exc


def scenario_from_dict(d: dict) -> ScenarioConfig:
    """Build a validated scenario from plain JSON-style data."""
    ego_d = _require(d, "ego", "")
    fault_d = d.get("fault", {})
    noise_d = d.get("noise", {})
    actors = []
    for i, actor in enumerate(d.get("actors", ())):
        actors.append(
            ActorSpec(
                lane_id=str(_require(actor, "lane_id", f"actors[{i}].")),
                entry_time=float(_require(actor, "entry_time", f"actors[{i}].")),
                speed=float(_require(actor, "speed", f"actors[{i}].")),
                class_tag=str(actor.get("class_tag", "vehicle")),
            )
        )
    return ScenarioConfig(
        seed=int(_require(d, "seed", "")),
        duration=float(_require(d, "duration", "")),
        tick=float(d.get("tick", 0.1)),
        map=map_from_dict(_require(d, "map", "")),
        ego=EgoSpec(
            lane_id=str(_require(ego_d, "lane_id", "ego.")),
            entry_time=float(ego_d.get("entry_time", 0.0)),
            speed=float(ego_d.get("speed", 8.0)),
            sigma=float(ego_d.get("sigma", 0.1)),
            fov_range=float(ego_d.get("fov_range", 40.0)),
            fov_half_angle_deg=float(ego_d.get("fov_half_angle_deg", 60.0)),
        ),
        actors=tuple(actors),
        fault=FaultSpec(
            kind=str(fault_d.get("kind", "none")),
            onset=float(fault_d.get("onset", 0.0)),
            magnitude=float(fault_d.get("magnitude", 0.0)),
        ),
        noise=NoiseSpec(
            rsu_pos_std=float(noise_d.get("rsu_pos_std", 0.3)),
            ego_perc_std=float(noise_d.get("ego_perc_std", 0.15)),
        ),
    )


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "seed": cfg.seed,
        "duration": cfg.duration,
        "tick": cfg.tick,
        "map": {
            "lanes": [
                {
                    "lane_id": lane.lane_id,
                    "centerline": [list(p) for p in lane.centerline],
                    "width": lane.width,
                }
                for lane in cfg.map.lanes
            ],
            "rsu_fov": [list(p) for p in cfg.map.rsu_fov],
            "blind_spot": (
                [list(p) for p in cfg.map.blind_spot]
                if cfg.map.blind_spot is not None else None
            ),
        },
        "ego": {
            "lane_id": cfg.ego.lane_id,
            "entry_time": cfg.ego.entry_time,
            "speed": cfg.ego.speed,
            "sigma": cfg.ego.sigma,
            "fov_range": cfg.ego.fov_range,
            "fov_half_angle_deg": cfg.ego.fov_half_angle_deg,
        },
        "actors": [
            {
                "lane_id": a.lane_id,
                "entry_time": a.entry_time,
                "speed": a.speed,
                "class_tag": a.class_tag,
            }
            for a in cfg.actors
        ],
        "fault": {
            "kind": cfg.fault.kind,
            "onset": cfg.fault.onset,
            "magnitude": cfg.fault.magnitude,
        },
        "noise": {
            "rsu_pos_std": cfg.noise.rsu_pos_std,
            "ego_perc_std": cfg.noise.ego_perc_std,
        },
    }


def _noise_table(seed: int, uid: int, channel: int, std: float, n: int) -> np.ndarray:
    """Per-(entity, channel) Gaussian noise series from a counter-based RNG."""
    gen = Generator(Philox(key=[seed, (uid << 8) | channel]))
    return gen.normal(0.0, std, size=(n, 2))


def _progress(speed: float, entry: float, t: float,
              decel: Optional[tuple[float, float]]) -> tuple[float, float]:
    """Arc length travelled and current speed at time t (may be negative s)."""
    if decel is None or t <= decel[0] or speed == 0.0:
        return speed * (t - entry), speed
    onset, mag = decel
    s_onset = speed * (onset - entry)
    tau = t - onset
    t_stop = speed / mag
    if tau < t_stop:
        return s_onset + speed * tau - 0.5 * mag * tau * tau, speed - mag * tau
    return s_onset + 0.5 * speed * t_stop, 0.0


def apply_fault(obj_list: ObjectList, fault: FaultSpec, t: float) -> ObjectList:
    """Apply a list-level fault to an RSU object list.

    ``erratic_motion`` perturbs ground truth, not reported lists, so it (like
    ``none``) leaves the list untouched here; the simulator applies it when
    generating trajectories.
    """
    if obj_list.source != "RSU":
        raise FaultError("faults are injected into RSU lists only")
    if fault.kind not in FAULT_KINDS:
        raise FaultError(f"unknown fault kind {fault.kind!r}")
    if not fault.active(t) or fault.kind in ("none", "erratic_motion"):
        return obj_list
    if fault.kind == "map_shift_east":
        objects = tuple(
            ObjectState(
                object_id=o.object_id,
                position=(o.position[0] + fault.magnitude, o.position[1]),
                velocity=o.velocity,
                sigma=o.sigma,
                timestamp=o.timestamp,
                class_tag=o.class_tag,
            )
            for o in obj_list.objects
        )
    elif fault.kind == "underestimated_sigma":
        objects = tuple(
            ObjectState(
                object_id=o.object_id,
                position=o.position,
                velocity=o.velocity,
                sigma=o.sigma / fault.magnitude,
                timestamp=o.timestamp,
                class_tag=o.class_tag,
            )
            for o in obj_list.objects
        )
    else:  # missed_detection
        target = int(round(fault.magnitude))
        objects = tuple(o for o in obj_list.objects if o.object_id != target)
    return ObjectList(timestamp=obj_list.timestamp, objects=objects,
                      source=obj_list.source)


def simulate(cfg: ScenarioConfig) -> Iterator[Tick]:
    """Generate the scenario stream, one tick at a time."""
    n = cfg.n_ticks
    ego_lane = cfg.map.lane(cfg.ego.lane_id)
    actor_lanes = [cfg.map.lane(a.lane_id) for a in cfg.actors]

    rsu_noise = {
        EGO_OBJECT_ID: _noise_table(cfg.seed, EGO_OBJECT_ID, _CH_RSU,
                                    cfg.noise.rsu_pos_std, n)
    }
    perc_noise = {}
    for i in range(len(cfg.actors)):
        uid = i + 1
        rsu_noise[uid] = _noise_table(cfg.seed, uid, _CH_RSU,
                                      cfg.noise.rsu_pos_std, n)
        perc_noise[uid] = _noise_table(cfg.seed, uid, _CH_EGO_PERC,
                                       cfg.noise.ego_perc_std, n)
    loc_noise = _noise_table(cfg.seed, EGO_OBJECT_ID, _CH_EGO_LOC,
                             cfg.ego.sigma, n)

    erratic = None
    if cfg.fault.kind == "erratic_motion":
        if not cfg.actors:
            raise ConfigError("fault.kind: erratic_motion needs at least one actor")
        erratic = (cfg.fault.onset, cfg.fault.magnitude)

    half_angle = math.radians(cfg.ego.fov_half_angle_deg)

    for k in range(n):
        t = round(k * cfg.tick, 9)

        # Ego ground truth: clamped to its lane, parked outside its span.
        s_ego, v_ego = _progress(cfg.ego.speed, cfg.ego.entry_time, t, None)
        s_clamped = min(max(s_ego, 0.0), ego_lane.length)
        ego_pos = ego_lane.point_at(s_clamped)
        heading = ego_lane.heading_at(s_clamped)
        parked = s_ego < 0.0 or s_ego > ego_lane.length
        ego_vel = (0.0, 0.0) if parked else (v_ego * heading[0], v_ego * heading[1])
        truth = [TruthState(EGO_OBJECT_ID, ego_pos, ego_vel, "ego")]

        for i, (spec, lane) in enumerate(zip(cfg.actors, actor_lanes)):
            dec = erratic if (erratic is not None and i == 0) else None
            s, v = _progress(spec.speed, spec.entry_time, t, dec)
            if s < 0.0 or s > lane.length:
                continue
            pos = lane.point_at(s)
            h = lane.heading_at(s)
            truth.append(
                TruthState(i + 1, pos, (v * h[0], v * h[1]), spec.class_tag)
            )

        rsu_objects = []
        for obj in truth:
            if not cfg.map.rsu_observes(obj.position):
                continue
            noise = rsu_noise[obj.object_id][k]
            rsu_objects.append(
                ObjectState(
                    object_id=obj.object_id,
                    position=(obj.position[0] + noise[0], obj.position[1] + noise[1]),
                    velocity=obj.velocity,
                    sigma=cfg.noise.rsu_pos_std,
                    timestamp=t,
                    class_tag=obj.class_tag,
                )
            )
        rsu_list = apply_fault(
            ObjectList(timestamp=t, objects=tuple(rsu_objects), source="RSU"),
            cfg.fault,
            t,
        )

        perc_objects = []
        for obj in truth:
            if obj.object_id == EGO_OBJECT_ID:
                continue
            if not cone_contains(ego_pos, heading, obj.position,
                                 cfg.ego.fov_range, half_angle):
                continue
            noise = perc_noise[obj.object_id][k]
            perc_objects.append(
                ObjectState(
                    object_id=obj.object_id,
                    position=(obj.position[0] + noise[0], obj.position[1] + noise[1]),
                    velocity=obj.velocity,
                    sigma=cfg.noise.ego_perc_std,
                    timestamp=t,
                    class_tag=obj.class_tag,
                )
            )

        ego_pose = EgoPose(
            position=(ego_pos[0] + loc_noise[k][0], ego_pos[1] + loc_noise[k][1]),
            sigma_ego=cfg.ego.sigma,
            timestamp=t,
        )

        yield Tick(
            t=t,
            ego=ego_pose,
            rsu=rsu_list,
            ego_perception=ObjectList(timestamp=t, objects=tuple(perc_objects),
                                      source="EGO"),
            truth=GroundTruth(timestamp=t, objects=tuple(truth)),
        )

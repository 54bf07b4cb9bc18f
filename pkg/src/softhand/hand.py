"""Hand structure: geometry, chamber topology and the valve channel map.

The hand has five fingers and a two-part palm.  Thumb, index and middle
fingers carry four air cavities each (two sections, left/right chamber
pairs); ring and little fingers are simplified to one chamber per section.
Palm part A (finger splay) exposes one valve channel, palm part B exposes
two (whole-palm bend and thumb abduction).  That gives 16 + 1 + 2 = 19
logical channels on a 20-valve board; the last valve is reserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import yaml

from .errors import ValidationError

CONFIG_SCHEMA_VERSION = 1

ALLOWED_SEGMENT_COUNTS = (1, 3, 5, 7, 9, 11)

#: Reference human-hand dimensions (mm); the built hand is scaled from these.
REFERENCE_PALM_WIDTH_MM = 85.0
REFERENCE_PALM_LENGTH_MM = 95.0
DEFAULT_HAND_SCALE = 1.2

DEFAULT_FINGER_LIMIT_KPA = 80.0
PALM_A_LIMIT_KPA = 100.0
PALM_B_LIMIT_KPA = 40.0

HAND_MASS_G = 300.0
PHYSICAL_VALVE_COUNT = 20


class FingerRole(str, Enum):
    THUMB = "thumb"
    INDEX = "index"
    MIDDLE = "middle"
    RING = "ring"
    LITTLE = "little"


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    SINGLE = "single"


#: Finger roles whose segments keep the full left/right chamber pair.
DUAL_CHAMBER_ROLES = (FingerRole.THUMB, FingerRole.INDEX, FingerRole.MIDDLE)


@dataclass(frozen=True)
class Transform:
    """Rigid transform: rotation matrix rows + translation, plain floats
    so equality is bit-exact and instances stay hashable."""

    rotation: tuple  # 3 rows of 3 floats
    translation: tuple  # 3 floats

    @staticmethod
    def identity():
        return Transform(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
                         (0.0, 0.0, 0.0))

    def matrix(self):
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = np.array(self.rotation)
        m[:3, 3] = np.array(self.translation)
        return m

    @staticmethod
    def from_matrix(m):
        r = tuple(tuple(float(v) for v in row) for row in m[:3, :3])
        t = tuple(float(v) for v in m[:3, 3])
        return Transform(r, t)


def rot_x(angle_rad):
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_rad):
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_rad):
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class GeometryParams:
    """Geometry of one segmented bellows finger.

    Lengths in mm.  The finger is split into two equal sections
    (section_split = 0.5); each section spans half the arc length.
    bellows_pitch is derived from the length budget:
    segment_count * (pitch + gap) = finger_length.
    """

    finger_length: float
    wall_thickness: float = 2.0
    segment_gap: float = 1.0
    segment_count: int = 11
    section_split: float = 0.5
    width: float = 16.0
    height: float = 14.0

    def __post_init__(self):
        if self.segment_count not in ALLOWED_SEGMENT_COUNTS:
            raise ValidationError(
                "segment_count",
                f"{self.segment_count} not in {ALLOWED_SEGMENT_COUNTS}")
        if self.finger_length <= 0:
            raise ValidationError("finger_length", "must be positive")
        if self.wall_thickness <= 0:
            raise ValidationError("wall_thickness", "must be positive")
        if self.segment_gap < 0:
            raise ValidationError("segment_gap", "must be non-negative")
        if self.section_split != 0.5:
            raise ValidationError("section_split", "must be exactly 0.5")
        if self.width <= 0:
            raise ValidationError("width", "must be positive")
        if self.height <= 0:
            raise ValidationError("height", "must be positive")
        if self.bellows_pitch <= 0:
            raise ValidationError(
                "bellows_pitch",
                f"derived pitch {self.bellows_pitch:.3f} mm is not positive")

    @property
    def bellows_pitch(self):
        n = self.segment_count
        return (self.finger_length - n * self.segment_gap) / n


@dataclass(frozen=True)
class FingerSpec:
    role: FingerRole
    geometry: GeometryParams
    mount_frame: Transform
    max_pressure_kpa: float = DEFAULT_FINGER_LIMIT_KPA

    def __post_init__(self):
        if self.max_pressure_kpa <= 0:
            raise ValidationError("max_pressure_kpa", "must be positive")

    @property
    def cavity_count(self):
        return 4 if self.role in DUAL_CHAMBER_ROLES else 2

    @property
    def sides(self):
        if self.role in DUAL_CHAMBER_ROLES:
            return (Side.LEFT, Side.RIGHT)
        return (Side.SINGLE,)


@dataclass(frozen=True)
class PalmSpec:
    """Palm part A splays the four planar fingers with four chambers on a
    shared channel; palm part B carries the palm-bend and thumb-abduction
    channels."""

    part_a_chambers: int = 4
    part_b_channels: int = 2
    finger_mount_frames: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.part_a_chambers != 4:
            raise ValidationError("part_a_chambers", "must be 4")
        if self.part_b_channels != 2:
            raise ValidationError("part_b_channels", "must be 2")


@dataclass(frozen=True)
class HandDescription:
    fingers: tuple  # 5 FingerSpec, thumb..little order
    palm: PalmSpec
    channel_map: dict  # (role, section, side) -> channel index
    channel_limits: tuple  # per-channel safety limit, kPa
    mass_g: float = HAND_MASS_G
    scale: float = DEFAULT_HAND_SCALE

    def __post_init__(self):
        total = sum(f.cavity_count for f in self.fingers)
        if total != 16:
            raise ValidationError("fingers", f"cavity total {total}, expected 16")
        if self.channel_count > PHYSICAL_VALVE_COUNT:
            raise ValidationError(
                "channel_map", f"{self.channel_count} channels exceed "
                f"{PHYSICAL_VALVE_COUNT} physical valves")
        values = list(self.channel_map.values())
        if len(set(values)) != len(values):
            raise ValidationError("channel_map", "channel assignment not injective")

    @property
    def channel_count(self):
        return 1 + max(self.channel_map.values())

    def finger(self, role):
        role = FingerRole(role)
        for f in self.fingers:
            if f.role == role:
                return f
        raise ValidationError("role", f"no finger with role {role}")

    @property
    def palm_a_channel(self):
        return self.channel_map[("palm_a", 0, Side.SINGLE)]

    @property
    def palm_bend_channel(self):
        return self.channel_map[("palm_bend", 0, Side.SINGLE)]

    @property
    def thumb_abduction_channel(self):
        return self.channel_map[("thumb_abduction", 0, Side.SINGLE)]

    def finger_channels(self, role):
        """All channel indices of one finger, in (section, side) order."""
        role = FingerRole(role)
        spec = self.finger(role)
        out = []
        for section in (1, 2):
            for side in spec.sides:
                out.append(self.channel_map[(role, section, side)])
        return out


@dataclass(frozen=True)
class PressureState:
    """Per-channel gauge pressures (kPa) and valve duty cycles.

    A value type: stepping the pneumatics produces a fresh instance."""

    channel_pressures: tuple
    channel_duties: tuple
    timestamp_s: float = 0.0

    def __post_init__(self):
        if len(self.channel_pressures) != len(self.channel_duties):
            raise ValidationError("channel_duties",
                                  "length mismatch with channel_pressures")
        for i, d in enumerate(self.channel_duties):
            if not 0.0 <= d <= 1.0:
                raise ValidationError(f"channel_duties[{i}]",
                                      f"duty {d} outside [0, 1]")
        for i, p in enumerate(self.channel_pressures):
            if p < 0.0:
                raise ValidationError(f"channel_pressures[{i}]",
                                      f"pressure {p} kPa is negative")

    @staticmethod
    def zeros(n_channels, timestamp_s=0.0):
        return PressureState((0.0,) * n_channels, (0.0,) * n_channels,
                             timestamp_s)

    def pressures(self):
        return np.array(self.channel_pressures)


DEFAULT_CONFIG = {
    "schema": CONFIG_SCHEMA_VERSION,
    "hand": {
        "scale": DEFAULT_HAND_SCALE,
        "finger_length_mm": 90.0,
        "thumb_shortening_mm": 20.0,
        "wall_thickness_mm": 2.0,
        "segment_gap_mm": 1.0,
        "segment_count": 11,
        "finger_width_mm": 16.0,
        "finger_height_mm": 14.0,
        "thumb_mount_angle_deg": 30.0,
        "finger_max_pressure_kpa": DEFAULT_FINGER_LIMIT_KPA,
    },
    "pneumatics": {
        "supply_kpa": 150.0,
        "pwm_hz": 60.0,
        "tau_fill_s": 0.15,
        "tau_vent_s": 0.15,
        "tick_s": 0.004,
    },
}


def _merge(base, override):
    out = dict(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path):
    """Load a hand configuration file (YAML, `schema: 1`)."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if raw.get("schema") != CONFIG_SCHEMA_VERSION:
        raise ValidationError("schema",
                              f"expected {CONFIG_SCHEMA_VERSION}, "
                              f"got {raw.get('schema')!r}")
    return _merge(DEFAULT_CONFIG, raw)


def _planar_mount_frames(scale, palm_width):
    """Mount frames of the four planar fingers along the palm's distal edge.

    Hand frame: palm plane is x-y, fingers extend +y, palm normal +z.
    The four-slot groove spacing across palm A is not dimensioned in the
    source geometry; fingers are placed evenly across the palm width.
    """
    spacing = palm_width / 4.0
    xs = {
        FingerRole.INDEX: 1.5 * spacing,
        FingerRole.MIDDLE: 0.5 * spacing,
        FingerRole.RING: -0.5 * spacing,
        FingerRole.LITTLE: -1.5 * spacing,
    }
    palm_length = REFERENCE_PALM_LENGTH_MM * scale
    frames = {}
    for role, x in xs.items():
        frames[role] = Transform.from_matrix(
            np.block([
                [np.eye(3), np.array([[x], [palm_length], [0.0]])],
                [np.zeros((1, 3)), np.ones((1, 1))],
            ]))
    return frames


def _thumb_mount_frame(scale, palm_width, pre_rotation_deg):
    """Thumb base: on the radial side of the palm, pre-rotated to oppose
    the planar fingers; abduction later rotates it out of plane."""
    x = 0.6 * palm_width
    y = 0.25 * REFERENCE_PALM_LENGTH_MM * scale
    m = np.eye(4)
    # Face the thumb across the palm, then pre-rotate about the palm normal.
    r = rot_z(math.radians(-90.0 + pre_rotation_deg)) @ rot_y(math.radians(-30.0))
    m[:3, :3] = r
    m[:3, 3] = [x, y, 0.0]
    return Transform.from_matrix(m)


def _build_channel_map():
    """Deterministic chamber -> valve channel table.

    Finger cavities occupy channels 0..15 in thumb..little order, sections
    before sides; palm A is 16, palm bend 17, thumb abduction 18."""
    cm = {}
    idx = 0
    for role in (FingerRole.THUMB, FingerRole.INDEX, FingerRole.MIDDLE,
                 FingerRole.RING, FingerRole.LITTLE):
        sides = ((Side.LEFT, Side.RIGHT) if role in DUAL_CHAMBER_ROLES
                 else (Side.SINGLE,))
        for section in (1, 2):
            for side in sides:
                cm[(role, section, side)] = idx
                idx += 1
    cm[("palm_a", 0, Side.SINGLE)] = idx
    cm[("palm_bend", 0, Side.SINGLE)] = idx + 1
    cm[("thumb_abduction", 0, Side.SINGLE)] = idx + 2
    return cm


def build_hand(config=None):
    """Build a validated HandDescription.

    `config` may be None (reference default hand), a config dict, or a path to
    a YAML configuration file.  Geometry defaults: 90 mm index/middle/ring/
    little fingers, a 20 mm shorter thumb, 2 mm walls, 1 mm segment gaps,
    11 segments.
    """
    if config is None:
        cfg = DEFAULT_CONFIG
    elif isinstance(config, (str, bytes)) or hasattr(config, "__fspath__"):
        cfg = load_config(config)
    else:
        cfg = _merge(DEFAULT_CONFIG, config)

    h = cfg["hand"]
    scale = float(h["scale"])
    finger_length = float(h["finger_length_mm"])
    thumb_length = finger_length - float(h["thumb_shortening_mm"])
    limit = float(h["finger_max_pressure_kpa"])

    def geometry(length):
        return GeometryParams(
            finger_length=length,
            wall_thickness=float(h["wall_thickness_mm"]),
            segment_gap=float(h["segment_gap_mm"]),
            segment_count=int(h["segment_count"]),
            width=float(h["finger_width_mm"]),
            height=float(h["finger_height_mm"]),
        )

    palm_width = REFERENCE_PALM_WIDTH_MM * scale
    frames = _planar_mount_frames(scale, palm_width)
    frames[FingerRole.THUMB] = _thumb_mount_frame(
        scale, palm_width, float(h["thumb_mount_angle_deg"]))

    fingers = tuple(
        FingerSpec(role=role,
                   geometry=geometry(thumb_length if role == FingerRole.THUMB
                                     else finger_length),
                   mount_frame=frames[role],
                   max_pressure_kpa=limit)
        for role in (FingerRole.THUMB, FingerRole.INDEX, FingerRole.MIDDLE,
                     FingerRole.RING, FingerRole.LITTLE))

    palm = PalmSpec(finger_mount_frames={r.value: frames[r] for r in frames})
    channel_map = _build_channel_map()

    limits = [0.0] * (max(channel_map.values()) + 1)
    for (name, _section, _side), ch in channel_map.items():
        if isinstance(name, FingerRole):
            limits[ch] = limit
        elif name == "palm_a":
            limits[ch] = PALM_A_LIMIT_KPA
        else:
            limits[ch] = PALM_B_LIMIT_KPA

    return HandDescription(fingers=fingers, palm=palm,
                           channel_map=channel_map,
                           channel_limits=tuple(limits),
                           mass_g=HAND_MASS_G, scale=scale)


def channel_lookup(hand, role, section, side):
    """Map (finger role, section 1|2, side) to its valve channel index.

    Ring/little fingers only accept side="single"; asking for left/right
    on them (or single on a dual-chamber finger) is an error.
    """
    role = FingerRole(role)
    side = Side(side)
    if section not in (1, 2):
        raise ValidationError("section", f"{section} not in (1, 2)")
    spec = hand.finger(role)
    if side not in spec.sides:
        raise ValidationError(
            "side", f"{role.value} has sides {[s.value for s in spec.sides]}, "
        f"not {side.value}")
    return hand.channel_map[(role, section, side)]


def channel_inverse(hand, channel):
    """Inverse of channel_lookup: channel index -> (name, section, side)."""
    for key, ch in hand.channel_map.items():
        if ch == channel:
            name, section, side = key
            name = name.value if isinstance(name, FingerRole) else name
            return (name, section, side.value)
    raise ValidationError("channel", f"{channel} is not mapped")


# -- serialization ----------------------------------------------------------

def hand_to_dict(hand):
    def tf(t):
        return {"rotation": [list(r) for r in t.rotation],
                "translation": list(t.translation)}

    return {
        "schema": CONFIG_SCHEMA_VERSION,
        "scale": hand.scale,
        "mass_g": hand.mass_g,
        "fingers": [
            {
                "role": f.role.value,
                "max_pressure_kpa": f.max_pressure_kpa,
                "mount_frame": tf(f.mount_frame),
                "geometry": {
                    "finger_length": f.geometry.finger_length,
                    "wall_thickness": f.geometry.wall_thickness,
                    "segment_gap": f.geometry.segment_gap,
                    "segment_count": f.geometry.segment_count,
                    "section_split": f.geometry.section_split,
                    "width": f.geometry.width,
                    "height": f.geometry.height,
                },
            }
            for f in hand.fingers
        ],
        "palm": {
            "part_a_chambers": hand.palm.part_a_chambers,
            "part_b_channels": hand.palm.part_b_channels,
            "finger_mount_frames": {k: tf(v)
                                    for k, v in
                                    hand.palm.finger_mount_frames.items()},
        },
        "channel_map": [
            {"name": (k[0].value if isinstance(k[0], FingerRole) else k[0]),
             "section": k[1], "side": k[2].value, "channel": v}
            for k, v in sorted(hand.channel_map.items(), key=lambda kv: kv[1])
        ],
        "channel_limits": list(hand.channel_limits),
    }


def hand_from_dict(d):
    def tf(t):
        return Transform(tuple(tuple(float(v) for v in row)
                               for row in t["rotation"]),
                         tuple(float(v) for v in t["translation"]))

    fingers = tuple(
        FingerSpec(role=FingerRole(fd["role"]),
                   geometry=GeometryParams(**fd["geometry"]),
                   mount_frame=tf(fd["mount_frame"]),
                   max_pressure_kpa=fd["max_pressure_kpa"])
        for fd in d["fingers"])
    palm = PalmSpec(
        part_a_chambers=d["palm"]["part_a_chambers"],
        part_b_channels=d["palm"]["part_b_channels"],
        finger_mount_frames={k: tf(v)
                             for k, v in
                             d["palm"]["finger_mount_frames"].items()})
    roles = {r.value: r for r in FingerRole}
    cm = {}
    for entry in d["channel_map"]:
        name = roles.get(entry["name"], entry["name"])
        cm[(name, entry["section"], Side(entry["side"]))] = entry["channel"]
    return HandDescription(fingers=fingers, palm=palm, channel_map=cm,
                           channel_limits=tuple(d["channel_limits"]),
                           mass_g=d["mass_g"], scale=d["scale"])


def save_hand(hand, path):
    with open(path, "w") as fh:
        yaml.safe_dump(hand_to_dict(hand), fh, sort_keys=False)


def load_hand(path):
    with open(path) as fh:
        return hand_from_dict(yaml.safe_load(fh))

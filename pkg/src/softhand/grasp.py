"""Grasp schedules, contact detection, wrench closure and shake testing.

Grasps execute palm-first: a schedule's opening phase drives only palm
channels, fingers join from the second phase on.  Contact handling is
kinematic: once a finger chain touches the object at some segment, that
segment and everything proximal to it freeze at their current curvature
while the distal segments keep curling, wrapping the object.  Closure
quality is a soft-finger Ferrari-Canny-style epsilon; robustness is
checked against gravity plus quasi-static acceleration wrenches from a
trapezoidal motion profile with seeded contact jitter.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml
from importlib import resources
from scipy.optimize import linprog, minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from .errors import ValidationError
from .hand import FingerRole, PressureState, Transform
from . import kinematics as kin
from . import pneumatics as pneu

SCHEDULE_SCHEMA_VERSION = 1
FEIX_COUNT = 33

#: Contact patch radius [mm] behind the soft-finger torsional wrench.
TORSION_PATCH_MM = 2.0

#: Friction cone discretization (edges per contact).
CONE_EDGES = 8

PALM_CHANNEL_NAMES = ("palm_a", "palm_bend", "thumb_abduction")
FINGER_CHANNEL_NAMES = tuple(r.value for r in FingerRole)

GRAVITY_M_S2 = 9.81


class Shape(enum.Enum):
    SPHERE = "sphere"
    CYLINDER = "cylinder"
    BOX = "box"
    COMPOSITE = "composite"


_DIM_COUNT = {Shape.SPHERE: 1, Shape.CYLINDER: 2, Shape.BOX: 3}


@dataclass(frozen=True)
class ObjectPrimitive:
    """Rigid object proxy: a primitive (or composite of primitives) with
    mass [g], Coulomb friction and a pose in the hand frame.

    dimensions: sphere (radius,), cylinder (radius, height along local z),
    box (full extents lx, ly, lz).
    """

    shape: Shape
    dimensions: tuple = ()
    mass_g: float = 0.0
    friction: float = 0.6
    pose: Transform = Transform.identity()
    parts: tuple = ()

    def __post_init__(self):
        if self.shape == Shape.COMPOSITE:
            if not self.parts:
                raise ValidationError("parts",
                                      "composite needs at least one part")
        else:
            want = _DIM_COUNT[self.shape]
            if len(self.dimensions) != want:
                raise ValidationError(
                    "dimensions",
                    f"{self.shape.value} takes {want} dimension(s)")
            if any(d <= 0 for d in self.dimensions):
                raise ValidationError("dimensions", "must be positive")
        if self.mass_g < 0:
            raise ValidationError("mass_g", "must be non-negative")
        if self.friction < 0:
            raise ValidationError("friction", "must be non-negative")

    @property
    def characteristic_radius(self):
        """Torque normalization length [mm]."""
        if self.shape == Shape.SPHERE:
            return self.dimensions[0]
        if self.shape == Shape.CYLINDER:
            return max(self.dimensions[0], self.dimensions[1] / 2.0)
        if self.shape == Shape.BOX:
            return 0.5 * math.sqrt(sum(d * d for d in self.dimensions))
        raise ValidationError("shape", "composite has no single radius")

    @property
    def centroid(self):
        return np.array(self.pose.translation, dtype=float)

    def _local(self, points):
        r = np.array(self.pose.rotation, dtype=float)
        t = np.array(self.pose.translation, dtype=float)
        return (np.atleast_2d(points) - t) @ r

    def sdf(self, points):
        """Signed distance [mm] at world points (negative inside)."""
        if self.shape == Shape.COMPOSITE:
            raise ValidationError("shape",
                                  "composite objects are not supported here")
        p = self._local(points)
        if self.shape == Shape.SPHERE:
            d = np.linalg.norm(p, axis=1) - self.dimensions[0]
        elif self.shape == Shape.CYLINDER:
            radius, height = self.dimensions
            qr = np.linalg.norm(p[:, :2], axis=1) - radius
            qz = np.abs(p[:, 2]) - height / 2.0
            q = np.stack([qr, qz], axis=1)
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(np.maximum(qr, qz), 0.0)
            d = outside + inside
        else:
            half = np.array(self.dimensions, dtype=float) / 2.0
            q = np.abs(p) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            d = outside + inside
        return d if np.ndim(points) == 2 else float(d[0])

    def surface_normal(self, point):
        """Outward unit normal from the SDF gradient (central difference)."""
        h = 1e-4
        point = np.asarray(point, dtype=float)
        offsets = np.vstack([point + h * np.eye(3), point - h * np.eye(3)])
        vals = self.sdf(offsets)
        grad = (vals[:3] - vals[3:]) / (2 * h)
        n = np.linalg.norm(grad)
        if n == 0.0:
            raise ValidationError("point", "SDF gradient vanished")
        return grad / n

    def project_to_surface(self, point, iterations=3):
        point = np.asarray(point, dtype=float).copy()
        for _ in range(iterations):
            point -= self.sdf(point) * self.surface_normal(point)
        return point


def capsule_distance(obj, p0, p1, radius):
    """(min distance, closest axis point) between a capsule segment and an
    object surface.  Coarse sampling plus bounded 1-D refinement."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)

    def f(t):
        return float(obj.sdf(p0 + t * (p1 - p0)))

    ts = np.linspace(0.0, 1.0, 17)
    vals = [f(t) for t in ts]
    i = int(np.argmin(vals))
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, len(ts) - 1)]
    if hi > lo:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6})
        t_best, v_best = float(res.x), float(res.fun)
        if vals[i] < v_best:
            t_best, v_best = float(ts[i]), vals[i]
    else:
        t_best, v_best = float(ts[i]), vals[i]
    return v_best - radius, p0 + t_best * (p1 - p0)


@dataclass(frozen=True)
class ContactPoint:
    """Finger-object contact: surface position [mm], unit normal pointing
    into the object, the finger segment that touched, and friction."""

    position: tuple
    normal: tuple
    finger_role: str
    segment_index: int
    friction: float

    def __post_init__(self):
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-6:
            raise ValidationError("normal", "must be a unit vector")
        if self.friction < 0:
            raise ValidationError("friction", "must be non-negative")


def _segment_axis_points(frame, samples=6):
    """Points along one constant-curvature segment's centerline."""
    pos, rot = frame.position(), frame.rotation()
    pts = []
    for j in range(samples + 1):
        s = frame.arc_length * j / samples
        p, _ = kin.propagate_arc(pos, rot, frame.curvature_main,
                                 frame.curvature_lateral, s)
        pts.append(p)
    return pts


def detect_contacts(hand, pose, obj, clearance=1.0, refine=True):
    """Contacts between finger capsules and the object.

    Each finger segment is treated as a capsule around its centerline
    with radius = half the finger height; at most one contact is emitted
    per segment, at the capsule's closest surface projection.  A coarse
    vectorized SDF pass prunes far segments; with refine=False the best
    coarse sample stands in for the exact capsule minimum (adequate for
    the quasi-static stepping loop).
    """
    if obj.shape == Shape.COMPOSITE:
        raise ValidationError("shape",
                              "composite objects are not supported here")
    contacts = []
    for spec in hand.fingers:
        radius = spec.geometry.height / 2.0
        frames = pose.finger_frames[spec.role.value]
        seg_pts = [_segment_axis_points(f) for f in frames]
        coarse = obj.sdf(np.vstack(seg_pts)).reshape(len(frames), -1)
        near = coarse.min(axis=1) - radius <= clearance + (2.0 if refine
                                                           else 0.0)
        for seg_idx, frame in enumerate(frames):
            if not near[seg_idx]:
                continue
            pts = seg_pts[seg_idx]
            if refine:
                best = None
                for a, b in zip(pts[:-1], pts[1:]):
                    d, p = capsule_distance(obj, a, b, radius)
                    if best is None or d < best[0]:
                        best = (d, p)
                dist, axis_point = best
            else:
                j = int(np.argmin(coarse[seg_idx]))
                dist = coarse[seg_idx][j] - radius
                axis_point = pts[j]
            if dist <= clearance:
                surf = obj.project_to_surface(axis_point)
                outward = obj.surface_normal(surf)
                contacts.append(ContactPoint(
                    position=tuple(float(v) for v in surf),
                    normal=tuple(float(v) for v in -outward),
                    finger_role=spec.role.value,
                    segment_index=seg_idx,
                    friction=obj.friction))
    return contacts


# -- wrench closure ---------------------------------------------------------

def _tangent_basis(n):
    a = np.array([1.0, 0.0, 0.0])
    if abs(n @ a) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


def contact_wrenches(contacts, obj):
    """Primitive unit-force wrenches (6-vectors, torque normalized by the
    object's characteristic radius), grouped per contact."""
    c = obj.centroid
    rho = obj.characteristic_radius
    groups = []
    phis = 2.0 * math.pi * np.arange(CONE_EDGES) / CONE_EDGES
    for ct in contacts:
        n = np.array(ct.normal, dtype=float)
        p = np.array(ct.position, dtype=float)
        t1, t2 = _tangent_basis(n)
        f = n + ct.friction * (np.outer(np.cos(phis), t1)
                               + np.outer(np.sin(phis), t2))
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        tau = np.cross(p - c, f) / rho
        gamma = ct.friction * TORSION_PATCH_MM / rho
        torsion = np.hstack([np.zeros((2, 3)),
                             np.outer([gamma, -gamma], n)])
        groups.append(np.vstack([np.hstack([f, tau]), torsion]))
    return groups


def wrench_closure(contacts, obj):
    """Largest origin-centered ball radius inside the convex hull of the
    normalized primitive wrenches; 0 when the origin is not interior."""
    if not contacts:
        return 0.0
    groups = contact_wrenches(contacts, obj)
    pts = np.vstack(groups)
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms > 1e-12] / norms[norms > 1e-12, None]
    if len(pts) < 7:
        return 0.0
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return 0.0
    offsets = -hull.equations[:, -1]
    eps = float(offsets.min())
    return eps if eps > 0.0 else 0.0


def resists_wrench(contacts, obj, disturbance, force_limit_n):
    """Can contact forces balance the disturbance wrench?

    Solves a feasibility LP over non-negative cone-edge magnitudes with a
    per-contact total force budget [N]."""
    if not contacts:
        return np.linalg.norm(disturbance) < 1e-12
    groups = contact_wrenches(contacts, obj)
    w = np.vstack(groups).T  # 6 x n
    n = w.shape[1]
    a_ub = np.zeros((len(groups), n))
    col = 0
    for gi, g in enumerate(groups):
        a_ub[gi, col:col + len(g)] = 1.0
        col += len(g)
    res = linprog(c=np.zeros(n), A_eq=w, b_eq=-np.asarray(disturbance),
                  A_ub=a_ub, b_ub=np.full(len(groups), force_limit_n),
                  bounds=[(0.0, None)] * n, method="highs")
    return bool(res.status == 0)


@dataclass(frozen=True)
class ShakeProfile:
    """Disturbance model: trapezoidal translation at speed_mm_s (ramped
    over ramp_time_s), a 90-degree wrist rotation folded in as axis
    permutations of gravity, N seeded jitter repetitions."""

    speed_mm_s: float = 40.0
    ramp_time_s: float = 0.25
    repetitions: int = 5
    jitter_mm: float = 1.0
    jitter_deg: float = 3.0
    seed: int = 0
    force_limit_n: float = 2.0


def disturbance_wrenches(obj, profile):
    """Quasi-static wrenches [N, normalized torque] the grasp must hold."""
    m = obj.mass_g / 1000.0
    if m == 0.0:
        return []
    accel = (profile.speed_mm_s / 1000.0) / profile.ramp_time_s
    mag = m * (GRAVITY_M_S2 + accel)
    out = []
    for axis in range(3):
        for sign in (1.0, -1.0):
            f = np.zeros(6)
            f[axis] = sign * mag
            out.append(f)
    return out


def _jittered(contacts, obj, rng, profile):
    out = []
    for ct in contacts:
        p = np.array(ct.position) + rng.normal(scale=profile.jitter_mm,
                                               size=3)
        p = obj.project_to_surface(p)
        n = -obj.surface_normal(p)
        out.append(replace(ct, position=tuple(float(v) for v in p),
                           normal=tuple(float(v) for v in n)))
    return out


def shake_test(contacts, obj, profile=ShakeProfile()):
    """True when the grasp holds every disturbance wrench across all
    jittered repetitions.  Deterministic for a fixed profile seed."""
    if wrench_closure(contacts, obj) <= 0.0:
        return False
    disturbances = disturbance_wrenches(obj, profile)
    if not disturbances:
        return True
    rng = np.random.default_rng(profile.seed)
    for _ in range(profile.repetitions):
        cts = _jittered(contacts, obj, rng, profile)
        for w in disturbances:
            if not resists_wrench(cts, obj, w, profile.force_limit_n):
                return False
    return True


# -- schedules --------------------------------------------------------------

@dataclass(frozen=True)
class Phase:
    """One quasi-static ramp: named channel targets [kPa] over a duration."""

    targets: dict
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValidationError("duration_s", "must be positive")
        known = set(PALM_CHANNEL_NAMES) | set(FINGER_CHANNEL_NAMES)
        for name, v in self.targets.items():
            if name not in known:
                raise ValidationError("targets", f"unknown channel {name!r}")
            if v < 0:
                raise ValidationError("targets", f"{name}: negative pressure")


@dataclass(frozen=True)
class PostureSchedule:
    """A grasp recipe: palm-first phases plus the object proxy."""

    feix_id: int
    name: str
    phases: tuple
    object_proxy: ObjectPrimitive

    def __post_init__(self):
        if not 1 <= self.feix_id <= FEIX_COUNT:
            raise ValidationError("feix_id",
                                  f"must be 1..{FEIX_COUNT}")
        if self.phases:
            first = self.phases[0]
            bad = [n for n in first.targets if n in FINGER_CHANNEL_NAMES]
            if bad:
                raise ValidationError(
                    "phases", f"phase 1 must drive only palm channels, "
                    f"found {bad}")


def phase_channel_targets(hand, phase, previous=None):
    """Expand named targets to a per-channel vector, holding unnamed
    channels at their previous targets."""
    targets = list(previous) if previous is not None \
        else [0.0] * hand.channel_count
    for name, v in phase.targets.items():
        if name == "palm_a":
            targets[hand.palm_a_channel] = float(v)
        elif name == "palm_bend":
            targets[hand.palm_bend_channel] = float(v)
        elif name == "thumb_abduction":
            targets[hand.thumb_abduction_channel] = float(v)
        else:
            for c in hand.finger_channels(FingerRole(name)):
                targets[c] = float(v)
    return targets


# -- schedule I/O -----------------------------------------------------------

def object_to_dict(obj):
    d = {
        "shape": obj.shape.value,
        "dimensions": [float(v) for v in obj.dimensions],
        "mass_g": float(obj.mass_g),
        "friction": float(obj.friction),
        "position": [float(v) for v in obj.pose.translation],
        "rotation_rows": [[float(v) for v in row]
                          for row in obj.pose.rotation],
    }
    return d


def object_from_dict(d):
    rows = d.get("rotation_rows")
    rot = tuple(tuple(r) for r in rows) if rows else Transform.identity().rotation
    pose = Transform(rot, tuple(d.get("position", (0.0, 0.0, 0.0))))
    return ObjectPrimitive(shape=Shape(d["shape"]),
                           dimensions=tuple(d.get("dimensions", ())),
                           mass_g=float(d.get("mass_g", 0.0)),
                           friction=float(d.get("friction", 0.6)),
                           pose=pose)


def schedule_to_dict(s):
    return {
        "schema": SCHEDULE_SCHEMA_VERSION,
        "feix_id": s.feix_id,
        "name": s.name,
        "object": object_to_dict(s.object_proxy),
        "phases": [{"targets": {k: float(v) for k, v in p.targets.items()},
                    "duration_s": float(p.duration_s)} for p in s.phases],
    }


def schedule_from_dict(d):
    if d.get("schema") != SCHEDULE_SCHEMA_VERSION:
        raise ValidationError("schema",
                              f"expected {SCHEDULE_SCHEMA_VERSION}, "
                              f"got {d.get('schema')!r}")
    phases = tuple(Phase(targets=dict(p["targets"]),
                         duration_s=float(p["duration_s"]))
                   for p in d["phases"])
    return PostureSchedule(feix_id=int(d["feix_id"]), name=d["name"],
                           phases=phases,
                           object_proxy=object_from_dict(d["object"]))


def load_schedule(path):
    with open(path) as fh:
        return schedule_from_dict(yaml.safe_load(fh))


def save_schedule(schedule, path):
    with open(path, "w") as fh:
        yaml.safe_dump(schedule_to_dict(schedule), fh, sort_keys=False)


def feix_library():
    """All 33 shipped schedules, ordered by feix id."""
    base = resources.files("softhand") / "data" / "feix"
    out = []
    for i in range(1, FEIX_COUNT + 1):
        text = (base / f"feix_{i:02d}.yaml").read_text()
        out.append(schedule_from_dict(yaml.safe_load(text)))
    return out


# -- execution --------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryPoint:
    state: PressureState
    pose: kin.HandPose
    contacts: tuple


def _freeze_through(frozen_role, arcs, seg_idx):
    """Freeze segments 0..seg_idx at their current arcs (idempotent)."""
    changed = False
    for i in range(seg_idx + 1):
        if frozen_role[i] is None:
            frozen_role[i] = (arcs[i][0], arcs[i][1])
            changed = True
    return changed


def execute_schedule(hand, schedule, coeffs=None, cfg=None, dt=0.05,
                     clearance=1.0, orientation="palm_up"):
    """Run a schedule quasi-statically; returns the trajectory.

    Pressures advance through the averaged pneumatic model under the
    proportional regulator; contact freezing clamps each touching finger
    chain from its base through the contacting segment.  Palm-B targets
    above the safety limit are honored only once any contact exists (the
    deliberate post-contact squeeze); otherwise they raise.
    """
    coeffs = coeffs if coeffs is not None else kin.load_coefficients()
    cfg = cfg if cfg is not None else pneu.PneumaticConfig()
    limits = list(pneu.channel_limits(hand))
    obj = schedule.object_proxy

    state = PressureState.zeros(hand.channel_count)
    frozen = {r.value: [None] * hand.finger(r).geometry.segment_count
              for r in FingerRole}
    pose = kin.hand_pose(hand, state, coeffs, orientation=orientation,
                         frozen=frozen)
    contacts = tuple(detect_contacts(hand, pose, obj, clearance))
    traj = [TrajectoryPoint(state, pose, contacts)]
    have_contact = bool(contacts)

    targets = None
    for phase in schedule.phases:
        targets = phase_channel_targets(hand, phase, targets)
        steps = max(1, int(round(phase.duration_s / dt)))
        for _ in range(steps):
            override = have_contact
            eff_limits = list(limits)
            if override:
                eff_limits[hand.palm_bend_channel] = cfg.supply_pressure
                eff_limits[hand.thumb_abduction_channel] = cfg.supply_pressure
            duties = pneu.regulate_to_target(targets, state, cfg,
                                             limits=eff_limits,
                                             override=override)
            state = pneu.step_averaged(state, duties, cfg, dt,
                                       limits=eff_limits)
            pose = kin.hand_pose(hand, state, coeffs,
                                 orientation=orientation, frozen=frozen,
                                 override=override)
            contacts = tuple(detect_contacts(hand, pose, obj, clearance,
                                             refine=False))
            for ct in contacts:
                spec = hand.finger(FingerRole(ct.finger_role))
                pressures = [state.channel_pressures[c]
                             for c in hand.finger_channels(spec.role)]
                arcs = kin.segment_arcs(spec, pressures, coeffs,
                                        frozen=frozen[ct.finger_role])
                _freeze_through(frozen[ct.finger_role], arcs,
                                ct.segment_index)
            if contacts:
                have_contact = True
            traj.append(TrajectoryPoint(state, pose, contacts))
    # final refined contact pass for reporting and grasp evaluation
    pose = kin.hand_pose(hand, state, coeffs, orientation=orientation,
                         frozen=frozen, override=have_contact)
    contacts = tuple(detect_contacts(hand, pose, obj, clearance))
    traj[-1] = TrajectoryPoint(state, pose, contacts)
    return traj


# -- suite ------------------------------------------------------------------

class FailureReason(enum.Enum):
    INSUFFICIENT_ENCLOSURE = "insufficient_enclosure"
    NO_CLOSURE = "no_closure"
    SHAKE_SLIP = "shake_slip"


@dataclass(frozen=True)
class GraspOutcome:
    feix_id: int
    name: str
    contacts: tuple
    closure_quality: float
    shake_pass: bool
    failure_reason: FailureReason | None

    def __post_init__(self):
        if self.shake_pass and self.closure_quality <= 0.0:
            raise ValidationError("shake_pass",
                                  "cannot pass a shake without closure")

    @property
    def passed(self):
        return self.failure_reason is None


def judge_contacts(schedule, contacts, profile=ShakeProfile()):
    """Grade a final contact set against the schedule's object proxy."""
    obj = schedule.object_proxy
    roles = {c.finger_role for c in contacts}
    if len(roles) < 2:
        return GraspOutcome(feix_id=schedule.feix_id, name=schedule.name,
                            contacts=contacts, closure_quality=0.0,
                            shake_pass=False,
                            failure_reason=FailureReason.
                            INSUFFICIENT_ENCLOSURE)
    eps = wrench_closure(contacts, obj)
    if eps <= 0.0:
        return GraspOutcome(feix_id=schedule.feix_id, name=schedule.name,
                            contacts=contacts, closure_quality=0.0,
                            shake_pass=False,
                            failure_reason=FailureReason.NO_CLOSURE)
    ok = shake_test(contacts, obj, profile)
    return GraspOutcome(
        feix_id=schedule.feix_id, name=schedule.name, contacts=contacts,
        closure_quality=eps, shake_pass=ok,
        failure_reason=None if ok else FailureReason.SHAKE_SLIP)


def evaluate_grasp(hand, schedule, coeffs=None, cfg=None,
                   profile=ShakeProfile(), dt=0.05, clearance=1.0):
    """Execute one schedule and judge the final grasp."""
    traj = execute_schedule(hand, schedule, coeffs=coeffs, cfg=cfg, dt=dt,
                            clearance=clearance)
    return judge_contacts(schedule, traj[-1].contacts, profile)


def run_feix_suite(hand, library=None, coeffs=None, cfg=None,
                   profile=ShakeProfile(), dt=0.05, clearance=1.0):
    """Evaluate the whole library; deterministic, sorted by feix id."""
    library = library if library is not None else feix_library()
    outcomes = [evaluate_grasp(hand, s, coeffs=coeffs, cfg=cfg,
                               profile=profile, dt=dt, clearance=clearance)
                for s in library]
    return sorted(outcomes, key=lambda o: o.feix_id)


def report_to_dict(outcomes):
    return {
        "schema": SCHEDULE_SCHEMA_VERSION,
        "passed": sum(1 for o in outcomes if o.passed),
        "total": len(outcomes),
        "grasps": [{
            "feix_id": o.feix_id,
            "name": o.name,
            "contacts": len(o.contacts),
            "contact_fingers": sorted({c.finger_role for c in o.contacts}),
            "closure_quality": round(o.closure_quality, 9),
            "shake_pass": o.shake_pass,
            "failure_reason": o.failure_reason.value if o.failure_reason
            else None,
        } for o in outcomes],
    }


def report_table(outcomes):
    lines = [f"{'id':>3} {'grasp':<24} {'cts':>3} {'epsilon':>10} "
             f"{'shake':>5}  result"]
    for o in outcomes:
        result = "pass" if o.passed else o.failure_reason.value
        lines.append(f"{o.feix_id:>3} {o.name:<24.24} {len(o.contacts):>3} "
                     f"{o.closure_quality:>10.6f} "
                     f"{'yes' if o.shake_pass else 'no':>5}  {result}")
    passed = sum(1 for o in outcomes if o.passed)
    lines.append(f"passed {passed}/{len(outcomes)}")
    return "\n".join(lines) + "\n"

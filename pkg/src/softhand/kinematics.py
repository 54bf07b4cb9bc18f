"""Reduced-order piecewise-constant-curvature model of the hand.

Chamber pressures map to per-section curvature through a saturating
Hill-type law; left/right pressure differentials tilt the bending plane
(side-to-side deflection).  Segments are circular arcs chained into finger
poses; the palm contributes splay, whole-palm bend and thumb abduction as
mount-frame transforms applied before the finger chains.

All operations are pure functions: identical inputs give bit-identical
outputs, so results are safe to cache and compare byte-for-byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .errors import SafetyLimitError, ValidationError
from .hand import (FingerRole, Side, Transform, rot_x, rot_y, rot_z,
                   PALM_A_LIMIT_KPA, PALM_B_LIMIT_KPA)

COEFFS_SCHEMA_VERSION = 1

#: Fraction of the half-spread given to the inner (middle/ring) fingers.
INNER_SPLAY_FRACTION = 1.0 / 3.0

#: Rotation taking finger-local axes to palm axes for the planar fingers:
#: local z (finger axis) -> palm +y, local x (curl direction) -> palm +z.
FINGER_MOUNT_R = np.array([[0.0, 1.0, 0.0],
                           [0.0, 0.0, 1.0],
                           [1.0, 0.0, 0.0]], dtype=float)


@dataclass(frozen=True)
class FingerCoefficients:
    """Pressure-response parameters of one finger variant.

    kappa_max [1/mm] saturating curvature; p_half [kPa] and hill_exponent
    shape the Hill law; deflect_coupling diverts differential pressure away
    from main bending; deflect_gain [rad/kPa] and deflect_peak [kPa] shape
    the lateral deflection response, which peaks at deflect_peak and rolls
    off beyond it as the stiffening chamber walls pull the bending plane
    back in; force_stiffness [N*mm/rad] converts blocked bend angle to tip
    force.
    """

    kappa_max: float
    p_half: float
    hill_exponent: float
    deflect_gain: float
    deflect_peak: float
    deflect_coupling: float
    force_stiffness: float

    def __post_init__(self):
        for name in ("kappa_max", "p_half", "hill_exponent", "deflect_gain",
                     "deflect_peak", "force_stiffness"):
            if getattr(self, name) <= 0:
                raise ValidationError(name, "must be positive")
        if self.hill_exponent < 1:
            raise ValidationError("hill_exponent", "must be >= 1")
        if not 0.0 <= self.deflect_coupling < 1.0:
            raise ValidationError("deflect_coupling", "must be in [0, 1)")


@dataclass(frozen=True)
class PalmCoefficients:
    """Palm response parameters: splay, whole-palm bend (with a gravity
    correction term) and thumb abduction, each a Hill curve in degrees."""

    splay_max_deg: float
    splay_p_half: float
    splay_exponent: float
    bend_max_deg: float
    bend_p_half: float
    bend_exponent: float
    gravity_gain_deg: float
    abduction_max_deg: float
    abduction_p_half: float
    abduction_exponent: float

    def __post_init__(self):
        for name in ("splay_max_deg", "splay_p_half", "splay_exponent",
                     "bend_max_deg", "bend_p_half", "bend_exponent",
                     "abduction_max_deg", "abduction_p_half",
                     "abduction_exponent"):
            if getattr(self, name) <= 0:
                raise ValidationError(name, "must be positive")
        if not 0.0 <= self.gravity_gain_deg < self.bend_max_deg:
            raise ValidationError("gravity_gain_deg",
                                  "must be in [0, bend_max_deg)")


@dataclass(frozen=True)
class CalibrationCoefficients:
    """Per-variant finger tables (keyed by segment count) plus palm curves."""

    fingers: dict  # segment_count -> FingerCoefficients
    palm: PalmCoefficients

    def finger_variant(self, segment_count):
        try:
            return self.fingers[segment_count]
        except KeyError:
            raise ValidationError(
                "segment_count",
                f"no coefficients for {segment_count}-segment variant")


@dataclass(frozen=True)
class SegmentFrame:
    """Pose at the start of one constant-curvature segment plus the arc
    it carries.  deflection_angle is the bending-plane azimuth,
    atan2(lateral curvature, main curvature)."""

    origin: tuple
    orientation: tuple  # 3 rows of 3
    curvature_main: float
    curvature_lateral: float
    deflection_angle: float
    arc_length: float

    def rotation(self):
        return np.array(self.orientation)

    def position(self):
        return np.array(self.origin)


@dataclass(frozen=True)
class HandPose:
    finger_frames: dict  # role value -> tuple of SegmentFrame
    fingertips: dict  # role value -> (position tuple, rotation rows)
    palm_splay_angles: dict  # role value -> deg
    palm_bend_angle: float
    thumb_abduction_angle: float


def hill(p, p_half, n):
    """Saturating response in [0, 1): slow rise below p_half for n > 1,
    rapid rise around it, saturation above."""
    p = float(p)
    if p <= 0.0:
        return 0.0
    pn = p ** n
    return pn / (p_half ** n + pn)


def hill_inverse(y, p_half, n):
    if not 0.0 <= y < 1.0:
        raise ValidationError("y", "must be in [0, 1)")
    if y == 0.0:
        return 0.0
    return p_half * (y / (1.0 - y)) ** (1.0 / n)


def curvature_from_pressure(p_sum, coeffs, segment_count):
    """Main curvature [1/mm] of a section at summed chamber pressure p_sum."""
    if p_sum < 0:
        raise ValidationError("p_sum", "pressure must be non-negative")
    fc = coeffs.finger_variant(segment_count)
    return fc.kappa_max * hill(p_sum, fc.p_half, fc.hill_exponent)


def deflection_from_differential(p_left, p_right, fc):
    """Lateral bend angle [rad] of a section from its left/right pressure
    differential.  Antisymmetric in its arguments and zero for balanced
    pressures.  Rises roughly linearly at small differentials, peaks at
    deflect_peak and decays beyond it, so fingertip side sweep turns back
    at high single-chamber pressures."""
    if p_left < 0 or p_right < 0:
        raise ValidationError("pressure", "must be non-negative")
    dp = p_left - p_right
    return fc.deflect_gain * dp / (1.0 + (dp / fc.deflect_peak) ** 2)


def _section_arc(p_left, p_right, fc, section_length):
    """(main curvature, lateral curvature) of one section.

    The differential component feeds deflection and is withheld from the
    main bending pressure budget via deflect_coupling.  The two curvature
    components form a single curvature vector, so deflection tilts the
    bending plane; as main bending saturates the tilt shrinks, which
    reproduces the wiggle-out-then-turn-back fingertip path purely
    geometrically.
    """
    p_sum = p_left + p_right
    p_eff = max(p_sum - fc.deflect_coupling * abs(p_left - p_right), 0.0)
    kappa_m = fc.kappa_max * hill(p_eff, fc.p_half, fc.hill_exponent)
    kappa_d = deflection_from_differential(p_left, p_right, fc) / section_length
    return kappa_m, kappa_d


def section_pressures(finger, pressures):
    """Split a per-cavity pressure vector into per-section (left, right).

    Cavity order matches the channel map: section 1 then section 2, left
    before right (single-chamber fingers list one cavity per section).
    """
    pressures = list(pressures)
    if len(pressures) != finger.cavity_count:
        raise ValidationError(
            "pressures", f"expected {finger.cavity_count} cavity pressures, "
            f"got {len(pressures)}")
    for i, p in enumerate(pressures):
        if p < 0:
            raise ValidationError(f"pressures[{i}]", "must be non-negative")
        if p > finger.max_pressure_kpa:
            raise SafetyLimitError(i, p, finger.max_pressure_kpa)
    if finger.cavity_count == 4:
        return (pressures[0], pressures[1]), (pressures[2], pressures[3])
    # Single-chamber sections: balanced by construction, no deflection.
    return (pressures[0], pressures[0]), (pressures[1], pressures[1])


def segment_arcs(finger, pressures, coeffs, frozen=None):
    """Per-segment (main curvature, lateral curvature, arc length) triples.

    Each segment takes the curvature of the section containing its
    midpoint.  `frozen` optionally overrides individual segments with
    (main, lateral) curvature pairs; used for kinematic contact freezing.
    """
    fc = coeffs.finger_variant(finger.geometry.segment_count)
    length = finger.geometry.finger_length
    section_length = finger.geometry.section_split * length
    sec = section_pressures(finger, pressures)
    if finger.cavity_count == 4:
        arcs_by_section = [_section_arc(pl, pr, fc, section_length)
                           for pl, pr in sec]
    else:
        # Ring/little: one chamber per section is the whole section sum,
        # and there is no left/right differential to deflect with.
        arcs_by_section = [
            (fc.kappa_max * hill(pl, fc.p_half, fc.hill_exponent), 0.0)
            for pl, _pr in sec]
    n = finger.geometry.segment_count
    seg_len = length / n
    arcs = []
    for i in range(n):
        midpoint = (i + 0.5) * seg_len
        section = 0 if midpoint < section_length else 1
        kappa_m, kappa_d = arcs_by_section[section]
        if frozen is not None and frozen[i] is not None:
            kappa_m, kappa_d = frozen[i]
        arcs.append((kappa_m, kappa_d, seg_len))
    return arcs


def propagate_arc(position, rotation, kappa_m, kappa_d, length):
    """Advance a frame along one constant-curvature arc.

    The main and lateral curvature components form one curvature vector;
    the arc lies in the local x-z plane rotated about local z by its
    azimuth.  The limit kappa -> 0 is a straight extension along local z.
    """
    kappa = math.hypot(kappa_m, kappa_d)
    theta = kappa * length
    if abs(theta) < 1e-12:
        new_pos = position + rotation @ np.array([0.0, 0.0, length])
        return new_pos, rotation.copy()
    phi = math.atan2(kappa_d, kappa_m)
    d_local = np.array([(1.0 - math.cos(theta)) / kappa, 0.0,
                        math.sin(theta) / kappa])
    rz = rot_z(phi)
    new_pos = position + rotation @ (rz @ d_local)
    new_rot = rotation @ rz @ rot_y(theta) @ rot_z(-phi)
    return new_pos, new_rot


def forward_kinematics(finger, pressures, coeffs, frozen=None,
                       base=None):
    """Chain the finger's segments; returns a tuple of SegmentFrame.

    Each frame is the segment's start pose; the fingertip is the endpoint
    of the last frame's arc (see tip_pose).  Total arc length equals
    finger_length exactly.
    """
    arcs = segment_arcs(finger, pressures, coeffs, frozen=frozen)
    if base is None:
        pos, rot = np.zeros(3), np.eye(3)
    else:
        pos, rot = np.array(base[0], dtype=float), np.array(base[1], dtype=float)
    frames = []
    for kappa_m, kappa_d, seg_len in arcs:
        phi = math.atan2(kappa_d, kappa_m) if (kappa_m or kappa_d) else 0.0
        frames.append(SegmentFrame(
            origin=tuple(float(v) for v in pos),
            orientation=tuple(tuple(float(v) for v in row) for row in rot),
            curvature_main=kappa_m, curvature_lateral=kappa_d,
            deflection_angle=phi, arc_length=seg_len))
        pos, rot = propagate_arc(pos, rot, kappa_m, kappa_d, seg_len)
    return tuple(frames), (tuple(float(v) for v in pos),
                           tuple(tuple(float(v) for v in row) for row in rot))


def tip_pose(finger, pressures, coeffs, frozen=None, base=None):
    """Fingertip (position, rotation) after chaining all segments."""
    _frames, tip = forward_kinematics(finger, pressures, coeffs,
                                      frozen=frozen, base=base)
    return np.array(tip[0]), np.array(tip[1])


def centerline(frames, tip, points_per_segment=4):
    """Polyline along the finger centerline, for rendering and contact
    queries.  Includes the base point and the fingertip."""
    pts = []
    for f in frames:
        pos, rot = f.position(), f.rotation()
        for j in range(points_per_segment):
            s = f.arc_length * j / points_per_segment
            p, _ = propagate_arc(pos, rot, f.curvature_main,
                                 f.curvature_lateral, s)
            pts.append(p)
    pts.append(np.array(tip[0]))
    return np.array(pts)


def bend_angle(finger, pressures, coeffs, frozen=None):
    """Total main bend [deg]: integral of curvature over arc length."""
    arcs = segment_arcs(finger, pressures, coeffs, frozen=frozen)
    total = sum(kappa_m * seg_len for kappa_m, _kappa_d, seg_len in arcs)
    return math.degrees(total)


def tip_lateral_displacement(finger, pressures, coeffs):
    """Signed side-to-side fingertip coordinate [mm] in the finger base
    frame (y axis, perpendicular to the main bending plane)."""
    tip, _rot = tip_pose(finger, pressures, coeffs)
    return float(tip[1])


def single_chamber_pressures(finger, p, side=Side.LEFT):
    """Cavity pressure vector for single-chamber actuation of both
    sections on one side."""
    if finger.cavity_count == 2:
        return [p, p]
    if side == Side.LEFT:
        return [p, 0.0, p, 0.0]
    return [0.0, p, 0.0, p]


def both_chamber_pressures(finger, p):
    return [p] * finger.cavity_count


def tip_force_estimate(finger, pressures, constrained_angle_deg, coeffs):
    """Tip force [N] when the finger is blocked at constrained_angle.

    F = force_stiffness * (theta_free - theta_constrained) / L, floored
    at zero (an unconstrained finger pushes with nothing).
    """
    fc = coeffs.finger_variant(finger.geometry.segment_count)
    theta_free = math.radians(bend_angle(finger, pressures, coeffs))
    theta_c = math.radians(constrained_angle_deg)
    if theta_c > theta_free + 1e-12:
        raise ValidationError("constrained_angle_deg",
                              "exceeds the free bend angle")
    f = fc.force_stiffness * (theta_free - theta_c) / finger.geometry.finger_length
    return max(f, 0.0)


# -- palm -------------------------------------------------------------------

def palm_splay(p, coeffs):
    """Per-finger splay angles [deg] about the palm normal.

    Outer fingers take the full half-spread (opposite signs); inner
    fingers take INNER_SPLAY_FRACTION of it.  Positive is toward the
    index side.
    """
    if p < 0:
        raise ValidationError("p", "pressure must be non-negative")
    if p > PALM_A_LIMIT_KPA:
        raise SafetyLimitError("palm_a", p, PALM_A_LIMIT_KPA)
    pc = coeffs.palm
    spread = pc.splay_max_deg * hill(p, pc.splay_p_half, pc.splay_exponent)
    half = spread / 2.0
    return {
        FingerRole.INDEX.value: half,
        FingerRole.MIDDLE.value: half * INNER_SPLAY_FRACTION,
        FingerRole.RING.value: -half * INNER_SPLAY_FRACTION,
        FingerRole.LITTLE.value: -half,
    }


def splay_spread(p, coeffs):
    """Total index-to-little spread [deg]."""
    a = palm_splay(p, coeffs)
    return a[FingerRole.INDEX.value] - a[FingerRole.LITTLE.value]


def palm_bend(p, orientation, coeffs, override=False):
    """Whole-palm bend [deg]; gravity helps when the palm faces down.

    The gravity correction is an additive term shaped like the pressure
    response so both orientations start at exactly zero.
    """
    if orientation not in ("palm_up", "palm_down"):
        raise ValidationError("orientation",
                              f"{orientation!r} not in (palm_up, palm_down)")
    if p < 0:
        raise ValidationError("p", "pressure must be non-negative")
    if p > PALM_B_LIMIT_KPA and not override:
        raise SafetyLimitError("palm_bend", p, PALM_B_LIMIT_KPA)
    pc = coeffs.palm
    h = hill(p, pc.bend_p_half, pc.bend_exponent)
    sign = 1.0 if orientation == "palm_down" else -1.0
    return (pc.bend_max_deg + sign * pc.gravity_gain_deg) * h


def thumb_abduction(p, coeffs, override=False):
    """Thumb abduction angle [deg], monotone in pressure."""
    if p < 0:
        raise ValidationError("p", "pressure must be non-negative")
    if p > PALM_B_LIMIT_KPA and not override:
        raise SafetyLimitError("thumb_abduction", p, PALM_B_LIMIT_KPA)
    pc = coeffs.palm
    return pc.abduction_max_deg * hill(p, pc.abduction_p_half,
                                       pc.abduction_exponent)


def _finger_cavity_pressures(hand, state, role):
    chans = hand.finger_channels(role)
    return [state.channel_pressures[c] for c in chans]


def mount_transforms(hand, state, coeffs, orientation="palm_up",
                     override=False):
    """Finger base transforms with the palm actuation applied first."""
    p = state.channel_pressures
    splay = palm_splay(p[hand.palm_a_channel], coeffs)
    bend_deg = palm_bend(p[hand.palm_bend_channel], orientation, coeffs,
                         override=override)
    abd_deg = thumb_abduction(p[hand.thumb_abduction_channel], coeffs,
                              override=override)

    from .hand import REFERENCE_PALM_LENGTH_MM
    pivot_y = 0.5 * REFERENCE_PALM_LENGTH_MM * hand.scale
    bend_rot = rot_x(math.radians(bend_deg))

    out = {}
    for f in hand.fingers:
        m = f.mount_frame.matrix()
        if f.role == FingerRole.THUMB:
            # Abduction rotates the thumb base out of the palm plane.
            abd = np.eye(4)
            abd[:3, :3] = rot_y(math.radians(-abd_deg))
            pivot = np.eye(4)
            pivot[:3, 3] = m[:3, 3]
            unpivot = np.eye(4)
            unpivot[:3, 3] = -m[:3, 3]
            m = pivot @ abd @ unpivot @ m
            m[:3, :3] = m[:3, :3] @ FINGER_MOUNT_R
        else:
            # Palm bend folds the distal palm about a mid-palm hinge.
            hinge = np.eye(4)
            hinge[:3, :3] = bend_rot
            pivot = np.eye(4)
            pivot[:3, 3] = [0.0, pivot_y, 0.0]
            unpivot = np.eye(4)
            unpivot[:3, 3] = [0.0, -pivot_y, 0.0]
            m = pivot @ hinge @ unpivot @ m
            sp = np.eye(4)
            sp[:3, :3] = rot_z(math.radians(splay[f.role.value]))
            m = m @ sp
            m[:3, :3] = m[:3, :3] @ FINGER_MOUNT_R
        out[f.role.value] = (m[:3, 3].copy(), m[:3, :3].copy())
    return out, splay, bend_deg, abd_deg


def hand_pose(hand, state, coeffs, orientation="palm_up", frozen=None,
              override=False):
    """Full hand pose: palm transforms first, then finger PCC chains.

    `frozen` maps finger role value -> per-segment override list (see
    segment_arcs); used by the grasp module's contact freezing.
    """
    mounts, splay, bend_deg, abd_deg = mount_transforms(
        hand, state, coeffs, orientation=orientation, override=override)
    finger_frames = {}
    fingertips = {}
    for f in hand.fingers:
        pressures = _finger_cavity_pressures(hand, state, f.role)
        fz = (frozen or {}).get(f.role.value)
        frames, tip = forward_kinematics(f, pressures, coeffs, frozen=fz,
                                         base=mounts[f.role.value])
        finger_frames[f.role.value] = frames
        fingertips[f.role.value] = tip
    return HandPose(finger_frames=finger_frames, fingertips=fingertips,
                    palm_splay_angles=splay, palm_bend_angle=bend_deg,
                    thumb_abduction_angle=abd_deg)


# -- coefficients I/O -------------------------------------------------------

def coefficients_to_dict(coeffs):
    return {
        "schema": COEFFS_SCHEMA_VERSION,
        "fingers": {
            int(k): {
                "kappa_max": float(fc.kappa_max),
                "p_half": float(fc.p_half),
                "hill_exponent": float(fc.hill_exponent),
                "deflect_gain": float(fc.deflect_gain),
                "deflect_peak": float(fc.deflect_peak),
                "deflect_coupling": float(fc.deflect_coupling),
                "force_stiffness": float(fc.force_stiffness),
            }
            for k, fc in sorted(coeffs.fingers.items())
        },
        "palm": {
            "splay_max_deg": float(coeffs.palm.splay_max_deg),
            "splay_p_half": float(coeffs.palm.splay_p_half),
            "splay_exponent": float(coeffs.palm.splay_exponent),
            "bend_max_deg": float(coeffs.palm.bend_max_deg),
            "bend_p_half": float(coeffs.palm.bend_p_half),
            "bend_exponent": float(coeffs.palm.bend_exponent),
            "gravity_gain_deg": float(coeffs.palm.gravity_gain_deg),
            "abduction_max_deg": float(coeffs.palm.abduction_max_deg),
            "abduction_p_half": float(coeffs.palm.abduction_p_half),
            "abduction_exponent": float(coeffs.palm.abduction_exponent),
        },
    }


def coefficients_from_dict(d):
    if d.get("schema") != COEFFS_SCHEMA_VERSION:
        raise ValidationError("schema", f"expected {COEFFS_SCHEMA_VERSION}, "
                              f"got {d.get('schema')!r}")
    fingers = {int(k): FingerCoefficients(**v)
               for k, v in d["fingers"].items()}
    return CalibrationCoefficients(fingers=fingers,
                                   palm=PalmCoefficients(**d["palm"]))


def save_coefficients(coeffs, path):
    with open(path, "w") as fh:
        yaml.safe_dump(coefficients_to_dict(coeffs), fh, sort_keys=False)


def load_coefficients(path=None):
    """Load coefficients from a file, or the shipped calibrated defaults."""
    if path is None:
        text = (resources.files("softhand") / "data" /
                "coefficients.yaml").read_text()
        return coefficients_from_dict(yaml.safe_load(text))
    with open(path) as fh:
        return coefficients_from_dict(yaml.safe_load(fh))


# -- curve export -----------------------------------------------------------

SWEEP_HEADER = "pressure_kpa,angle_deg,force_n,lateral_mm,variant,mode"


def sweep_rows(finger, coeffs, mode, pressures):
    """Pressure-sweep rows for one variant and actuation mode."""
    if mode not in ("both", "single"):
        raise ValidationError("mode", f"{mode!r} not in (both, single)")
    rows = []
    n = finger.geometry.segment_count
    for p in pressures:
        if mode == "both":
            pv = both_chamber_pressures(finger, p)
        else:
            pv = single_chamber_pressures(finger, p)
        ang = bend_angle(finger, pv, coeffs)
        force = tip_force_estimate(finger, pv, 0.0, coeffs)
        lat = tip_lateral_displacement(finger, pv, coeffs)
        rows.append((float(p), ang, force, lat, f"S{n}", mode))
    return rows


def sweep_csv(rows):
    lines = [SWEEP_HEADER]
    for p, ang, force, lat, variant, mode in rows:
        lines.append(f"{p:.6g},{ang:.9g},{force:.9g},{lat:.9g},{variant},{mode}")
    return "\n".join(lines) + "\n"

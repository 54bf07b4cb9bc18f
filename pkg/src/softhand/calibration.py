"""Fitting of CalibrationCoefficients to measured anchor points.

Anchors are sparse (pressure, value, tolerance) measurements with a
provenance note; fitting is penalized least squares per finger variant
(plus one palm group) with a deterministic multi-start strategy.  The
qualitative trend constraints that the coefficient tables must satisfy
(variant orderings, the non-monotonic lateral sweep, the single-chamber
force crossover) are re-verified from scratch after every fit - the
optimizer is never trusted to have respected them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
import yaml
from importlib import resources
from scipy.optimize import least_squares

from .errors import ConvergenceError, ValidationError
from .hand import FingerRole, GeometryParams, FingerSpec, Transform
from . import kinematics as kin

ANCHORS_SCHEMA_VERSION = 1

#: Pressure grid [kPa] on which trend constraints are checked.
CONSTRAINT_GRID = tuple(float(p) for p in range(0, 81, 5))

#: Finger variants covered by the segment study.
STUDY_VARIANTS = (1, 3, 5, 7, 9, 11)


class AnchorQuantity(enum.Enum):
    BEND_ANGLE = "bend_angle"
    FORCE = "force"
    LATERAL_MM = "lateral_mm"
    SPLAY_DEG = "splay_deg"
    PALM_BEND_DEG = "palm_bend_deg"
    ABDUCTION_DEG = "abduction_deg"


FINGER_QUANTITIES = (AnchorQuantity.BEND_ANGLE, AnchorQuantity.FORCE,
                     AnchorQuantity.LATERAL_MM)
PALM_QUANTITIES = (AnchorQuantity.SPLAY_DEG, AnchorQuantity.PALM_BEND_DEG,
                   AnchorQuantity.ABDUCTION_DEG)


class AnchorMode(enum.Enum):
    BOTH_CHAMBERS = "both_chambers"
    SINGLE_CHAMBER = "single_chamber"
    PALM = "palm"


@dataclass(frozen=True)
class AnchorPoint:
    """One measured point a fit must reproduce within its tolerance.

    variant is a segment count for finger quantities and None for palm
    quantities.  orientation only matters for palm bend anchors.  The
    provenance note records where the number was measured.
    """

    quantity: AnchorQuantity
    pressure_kpa: float
    mode: AnchorMode
    value: float
    tolerance: float
    provenance: str
    variant: int | None = None
    orientation: str = "palm_down"

    def __post_init__(self):
        if self.pressure_kpa < 0:
            raise ValidationError("pressure_kpa", "must be non-negative")
        if self.tolerance <= 0:
            raise ValidationError("tolerance", "must be positive")
        if not self.provenance.strip():
            raise ValidationError("provenance",
                                  "every anchor needs a provenance note")
        if self.quantity in FINGER_QUANTITIES:
            if self.variant is None:
                raise ValidationError("variant",
                                      "finger anchors need a segment count")
            if self.mode == AnchorMode.PALM:
                raise ValidationError("mode",
                                      "finger anchors need a chamber mode")
        else:
            if self.variant is not None:
                raise ValidationError("variant",
                                      "palm anchors carry no segment count")
            if self.mode != AnchorMode.PALM:
                raise ValidationError("mode", "palm anchors use mode 'palm'")
        if self.orientation not in ("palm_up", "palm_down"):
            raise ValidationError("orientation",
                                  "must be palm_up or palm_down")

    def key(self):
        """Identity of the measured input; two anchors sharing a key must
        have overlapping value windows."""
        return (self.quantity.value, self.variant, self.mode.value,
                self.pressure_kpa, self.orientation)


def study_finger(segment_count, finger_length=90.0):
    geo = GeometryParams(finger_length=finger_length,
                         segment_count=segment_count)
    return FingerSpec(role=FingerRole.INDEX, geometry=geo,
                      mount_frame=Transform.identity())


def predict_anchor(anchor, coeffs):
    """Model value for one anchor under a coefficient set."""
    p = anchor.pressure_kpa
    if anchor.quantity in FINGER_QUANTITIES:
        finger = study_finger(anchor.variant)
        if anchor.mode == AnchorMode.BOTH_CHAMBERS:
            pv = kin.both_chamber_pressures(finger, p)
        else:
            pv = kin.single_chamber_pressures(finger, p)
        if anchor.quantity == AnchorQuantity.BEND_ANGLE:
            return kin.bend_angle(finger, pv, coeffs)
        if anchor.quantity == AnchorQuantity.FORCE:
            return kin.tip_force_estimate(finger, pv, 0.0, coeffs)
        return kin.tip_lateral_displacement(finger, pv, coeffs)
    if anchor.quantity == AnchorQuantity.SPLAY_DEG:
        return kin.splay_spread(p, coeffs)
    if anchor.quantity == AnchorQuantity.PALM_BEND_DEG:
        return kin.palm_bend(p, anchor.orientation, coeffs)
    return kin.thumb_abduction(p, coeffs)


def check_anchor_consistency(anchors):
    """Reject anchor sets that pin the same input to disjoint windows."""
    by_key = {}
    for a in anchors:
        by_key.setdefault(a.key(), []).append(a)
    for key, group in by_key.items():
        lo = max(a.value - a.tolerance for a in group)
        hi = min(a.value + a.tolerance for a in group)
        if lo > hi:
            raise ConvergenceError(
                f"infeasible anchor set: contradictory anchors for {key}: "
                + "; ".join(f"{a.value}+-{a.tolerance}" for a in group))


# -- trend-constraint verification ------------------------------------------

def _variant_curves(coeffs, grid, finger_length=90.0):
    out = {}
    for s in STUDY_VARIANTS:
        finger = study_finger(s, finger_length)
        both = [kin.bend_angle(finger, kin.both_chamber_pressures(finger, p),
                               coeffs) for p in grid]
        single = [kin.bend_angle(finger,
                                 kin.single_chamber_pressures(finger, p),
                                 coeffs) for p in grid]
        force = [kin.tip_force_estimate(
            finger, kin.single_chamber_pressures(finger, p), 0.0, coeffs)
            for p in grid]
        lateral = [kin.tip_lateral_displacement(
            finger, kin.single_chamber_pressures(finger, p), coeffs)
            for p in grid]
        out[s] = (np.array(both), np.array(single), np.array(force),
                  np.array(lateral))
    return out


def verify_constraints(coeffs, grid=CONSTRAINT_GRID):
    """Slack [>= 0 means satisfied] for every trend constraint.

    Re-evaluates the reduced-order model from scratch; returns a dict
    keyed by constraint name.
    """
    grid = [float(p) for p in grid]
    curves = _variant_curves(coeffs, grid)
    slack = {}
    for a, b in zip(STUDY_VARIANTS, STUDY_VARIANTS[1:]):
        slack[f"both_ordering_S{a}_S{b}"] = float(
            np.min(curves[b][0] - curves[a][0]))
        slack[f"single_ordering_S{a}_S{b}"] = float(
            np.min(curves[a][1] - curves[b][1]))
    slack["full_curl_S11"] = 10.0 - abs(curves[11][0][-1] - 180.0)
    lat = curves[11][3]
    ipk = int(np.argmax(lat))
    peak = float(lat[ipk])
    slack["lateral_peak_S11"] = min(peak - 18.0, 22.0 - peak)
    interior = 0 < ipk < len(grid) - 1
    decline = float(peak - 0.5 - lat[-1])
    slack["lateral_decline_S11"] = decline if interior else -1.0
    for s in STUDY_VARIANTS[1:]:
        d = curves[1][2] - curves[s][2]
        i20 = grid.index(20.0)
        i50 = grid.index(50.0)
        slack[f"force_crossover_S1_S{s}"] = float(min(-d[i20], d[i50]))
    slack["splay_spread_90"] = 2.0 - abs(kin.splay_spread(90.0, coeffs) - 50.0)
    slack["palm_bend_40_down"] = 3.0 - abs(
        kin.palm_bend(40.0, "palm_down", coeffs) - 68.0)
    diffs = [kin.palm_bend(p, "palm_down", coeffs)
             - kin.palm_bend(p, "palm_up", coeffs)
             for p in grid if 0.0 < p <= 40.0]
    slack["palm_bend_gravity_assist"] = float(min(diffs))
    slack["thumb_abduction_40"] = 5.0 - abs(
        kin.thumb_abduction(40.0, coeffs) - 90.0)
    return slack


@dataclass(frozen=True)
class FitResult:
    """Outcome of a calibration fit.

    residuals are (prediction - value) / tolerance per anchor, in input
    order.  constraint_slack holds every trend constraint's margin; the
    fit only succeeded if all slacks are non-negative and every anchor
    landed inside its tolerance window.
    """

    coefficients: kin.CalibrationCoefficients
    residuals: tuple
    constraint_slack: dict

    @property
    def violated_constraints(self):
        return tuple(sorted(k for k, v in self.constraint_slack.items()
                            if v < 0))

    @property
    def anchors_in_tolerance(self):
        return all(abs(r) <= 1.0 + 1e-9 for r in self.residuals)

    @property
    def success(self):
        return not self.violated_constraints and self.anchors_in_tolerance


# -- fitting ----------------------------------------------------------------

_FINGER_FIELDS = ("kappa_max", "p_half", "hill_exponent", "deflect_gain",
                  "deflect_peak", "deflect_coupling", "force_stiffness")
_FINGER_BOUNDS = {
    "kappa_max": (1e-4, 0.2),
    "p_half": (5.0, 150.0),
    "hill_exponent": (1.0, 8.0),
    "deflect_gain": (1e-6, 0.05),
    "deflect_peak": (5.0, 150.0),
    "deflect_coupling": (0.0, 0.95),
    "force_stiffness": (1.0, 500.0),
}
_PALM_FIELDS = ("splay_max_deg", "splay_p_half", "splay_exponent",
                "bend_max_deg", "bend_p_half", "bend_exponent",
                "gravity_gain_deg", "abduction_max_deg", "abduction_p_half",
                "abduction_exponent")
_PALM_BOUNDS = {
    "splay_max_deg": (1.0, 180.0),
    "splay_p_half": (5.0, 150.0),
    "splay_exponent": (1.0, 8.0),
    "bend_max_deg": (1.0, 180.0),
    "bend_p_half": (5.0, 150.0),
    "bend_exponent": (1.0, 8.0),
    "gravity_gain_deg": (0.0, 30.0),
    "abduction_max_deg": (1.0, 180.0),
    "abduction_p_half": (5.0, 150.0),
    "abduction_exponent": (1.0, 8.0),
}


def _fit_group(anchors, start_values, fields, bounds_table, rebuild,
               rng, n_starts):
    """Bounded least squares with a deterministic multi-start sweep.

    rebuild(values) -> CalibrationCoefficients view used for prediction.
    Start 0 is the incumbent coefficient set so an already-satisfying
    table is left untouched; further starts are drawn from the seeded rng
    inside the bounds box.
    """
    lo = np.array([bounds_table[f][0] for f in fields])
    hi = np.array([bounds_table[f][1] for f in fields])

    def residual(x):
        co = rebuild(x)
        out = []
        for a in anchors:
            try:
                pred = predict_anchor(a, co)
            except (ValidationError, ValueError):
                pred = a.value + 1e6 * a.tolerance
            out.append((pred - a.value) / a.tolerance)
        return np.array(out)

    starts = [np.clip(np.array(start_values, dtype=float), lo, hi)]
    for _ in range(n_starts - 1):
        u = rng.random(len(fields))
        starts.append(lo + u * (hi - lo))
    best = None
    for x0 in starts:
        res = least_squares(residual, x0, bounds=(lo, hi),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if best is None or res.cost < best.cost - 1e-15:
            best = res
    return best.x, residual(best.x)


def fit(anchors, constraints=None, seed=0, n_starts=4, start=None):
    """Fit coefficients to anchors; deterministic for a fixed seed.

    Finger variants fit independently; palm quantities fit as one group.
    Trend constraints (all of them, or the subset named in `constraints`)
    are re-verified on the fitted tables from scratch; a violated
    constraint marks the result failed (success False) with the guilty
    names in violated_constraints.  Contradictory anchors raise
    ConvergenceError before any optimization runs.
    """
    anchors = list(anchors)
    if not anchors:
        raise ValidationError("anchors", "at least one anchor is required")
    check_anchor_consistency(anchors)
    base = start if start is not None else kin.load_coefficients()
    rng = np.random.default_rng(seed)

    fingers = dict(base.fingers)
    residuals = {}
    by_variant = {}
    palm_anchors = []
    for i, a in enumerate(anchors):
        if a.quantity in FINGER_QUANTITIES:
            by_variant.setdefault(a.variant, []).append((i, a))
        else:
            palm_anchors.append((i, a))

    for variant in sorted(by_variant):
        group = by_variant[variant]
        fc0 = base.finger_variant(variant)

        def rebuild(x, _v=variant):
            fc = kin.FingerCoefficients(**dict(zip(_FINGER_FIELDS, x)))
            fs = dict(fingers)
            fs[_v] = fc
            return kin.CalibrationCoefficients(fingers=fs, palm=base.palm)

        x, res = _fit_group([a for _, a in group],
                            [getattr(fc0, f) for f in _FINGER_FIELDS],
                            _FINGER_FIELDS, _FINGER_BOUNDS, rebuild,
                            rng, n_starts)
        fingers[variant] = kin.FingerCoefficients(
            **dict(zip(_FINGER_FIELDS, x)))
        for (i, _a), r in zip(group, res):
            residuals[i] = float(r)

    palm = base.palm
    if palm_anchors:
        def rebuild_palm(x):
            pc = kin.PalmCoefficients(**dict(zip(_PALM_FIELDS, x)))
            return kin.CalibrationCoefficients(fingers=fingers, palm=pc)

        x, res = _fit_group([a for _, a in palm_anchors],
                            [getattr(palm, f) for f in _PALM_FIELDS],
                            _PALM_FIELDS, _PALM_BOUNDS, rebuild_palm,
                            rng, n_starts)
        palm = kin.PalmCoefficients(**dict(zip(_PALM_FIELDS, x)))
        for (i, _a), r in zip(palm_anchors, res):
            residuals[i] = float(r)

    fitted = kin.CalibrationCoefficients(fingers=fingers, palm=palm)
    slack = verify_constraints(fitted)
    if constraints is not None:
        missing = set(constraints) - set(slack)
        if missing:
            raise ValidationError("constraints",
                                  f"unknown constraint names: {sorted(missing)}")
        slack = {k: v for k, v in slack.items() if k in constraints}
    return FitResult(
        coefficients=fitted,
        residuals=tuple(residuals[i] for i in range(len(anchors))),
        constraint_slack=slack)


# -- segment study ----------------------------------------------------------

def segment_study(coeffs, pressures=CONSTRAINT_GRID, finger_length=90.0):
    """Sweep every variant in both actuation modes.

    Returns rows in the kinematics sweep schema, ordered by variant then
    mode then pressure.
    """
    rows = []
    for s in STUDY_VARIANTS:
        finger = study_finger(s, finger_length)
        for mode in ("both", "single"):
            rows.extend(kin.sweep_rows(finger, coeffs, mode, pressures))
    return rows


def segment_study_csv(coeffs, pressures=CONSTRAINT_GRID, finger_length=90.0):
    return kin.sweep_csv(segment_study(coeffs, pressures, finger_length))


# -- anchor I/O -------------------------------------------------------------

def anchors_to_dict(anchors):
    out = []
    for a in anchors:
        d = {
            "quantity": a.quantity.value,
            "pressure_kpa": float(a.pressure_kpa),
            "mode": a.mode.value,
            "value": float(a.value),
            "tolerance": float(a.tolerance),
            "provenance": a.provenance,
        }
        if a.variant is not None:
            d["variant"] = int(a.variant)
        if a.quantity == AnchorQuantity.PALM_BEND_DEG:
            d["orientation"] = a.orientation
        out.append(d)
    return {"schema": ANCHORS_SCHEMA_VERSION, "anchors": out}


def anchors_from_dict(d):
    if d.get("schema") != ANCHORS_SCHEMA_VERSION:
        raise ValidationError("schema",
                              f"expected {ANCHORS_SCHEMA_VERSION}, "
                              f"got {d.get('schema')!r}")
    out = []
    for item in d["anchors"]:
        out.append(AnchorPoint(
            quantity=AnchorQuantity(item["quantity"]),
            pressure_kpa=float(item["pressure_kpa"]),
            mode=AnchorMode(item["mode"]),
            value=float(item["value"]),
            tolerance=float(item["tolerance"]),
            provenance=item["provenance"],
            variant=item.get("variant"),
            orientation=item.get("orientation", "palm_down")))
    return out


def save_anchors(anchors, path):
    with open(path, "w") as fh:
        yaml.safe_dump(anchors_to_dict(anchors), fh, sort_keys=False)


def load_anchors(path=None):
    """Load anchors from a file, or the shipped reference anchor set."""
    if path is None:
        text = (resources.files("softhand") / "data" /
                "anchors.yaml").read_text()
        return anchors_from_dict(yaml.safe_load(text))
    with open(path) as fh:
        return anchors_from_dict(yaml.safe_load(fh))

"""Batch command-line entry points.

All tabular output is CSV with fixed headers; identical invocations with
identical seeds produce byte-identical output.  The hand configuration
path may also come from the SOFTHAND_CONFIG environment variable.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .errors import SoftHandError
from .hand import DEFAULT_CONFIG, FingerRole, PressureState, build_hand
from . import calibration as cal
from . import fem as fem_mod
from . import grasp as grasp_mod
from . import kinematics as kin
from . import pneumatics as pneu

SNAPSHOT_SCHEMA_VERSION = 1
POSE_CSV_HEADER = ("finger,tip_x_mm,tip_y_mm,tip_z_mm,bend_deg,"
                   "splay_deg,palm_bend_deg,thumb_abduction_deg")
SUITE_CSV_HEADER = ("feix_id,name,contacts,contact_fingers,"
                    "closure_quality,shake_pass,result")
FEM_CSV_HEADER = "case,quantity,value,reference,rel_error"


def _fail(message, code=2):
    click.echo(json.dumps({"error": message}), err=True)
    sys.exit(code)


def _echo_out(text, out):
    if out is not None:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _hand_from(config):
    if not config:
        return build_hand()
    with open(config) as fh:
        return build_hand(yaml.safe_load(fh))


@click.group()
@click.version_option(package_name="softhand")
def main():
    """Soft pneumatic hand simulation toolkit."""


@main.command()
@click.option("--snapshot", type=click.Path(exists=True), required=True,
              help="YAML pressure snapshot (schema 1, targets_kpa list).")
@click.option("--duration", type=float, default=2.0, show_default=True,
              help="Simulated seconds to run the regulator.")
@click.option("--dt", type=float, default=0.05, show_default=True)
@click.option("--config", envvar="SOFTHAND_CONFIG",
              type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
def simulate(snapshot, duration, dt, config, out):
    """Drive the hand to a pressure snapshot and print the final pose."""
    try:
        with open(snapshot) as fh:
            snap = yaml.safe_load(fh)
        if snap.get("schema") != SNAPSHOT_SCHEMA_VERSION:
            _fail(f"snapshot schema must be {SNAPSHOT_SCHEMA_VERSION}")
        hand = _hand_from(config)
        targets = [float(v) for v in snap["targets_kpa"]]
        if len(targets) != hand.channel_count:
            _fail(f"expected {hand.channel_count} targets, "
                  f"got {len(targets)}")
        coeffs = kin.load_coefficients()
        cfg = pneu.PneumaticConfig.from_config(DEFAULT_CONFIG)
        limits = pneu.channel_limits(hand)
        state = PressureState.zeros(hand.channel_count)
        for _ in range(max(1, int(round(duration / dt)))):
            duties = pneu.regulate_to_target(targets, state, cfg,
                                             limits=limits)
            state = pneu.step_averaged(state, duties, cfg, dt,
                                       limits=limits)
        pose = kin.hand_pose(hand, state, coeffs)
        lines = [POSE_CSV_HEADER]
        for role in FingerRole:
            spec = hand.finger(role)
            pressures = [state.channel_pressures[c]
                         for c in hand.finger_channels(role)]
            bend = kin.bend_angle(spec, pressures, coeffs)
            tip = pose.fingertips[role.value][0]
            splay = pose.palm_splay_angles.get(role.value, 0.0)
            lines.append(
                f"{role.value},{tip[0]:.6g},{tip[1]:.6g},{tip[2]:.6g},"
                f"{bend:.6g},{splay:.6g},{pose.palm_bend_angle:.6g},"
                f"{pose.thumb_abduction_angle:.6g}")
        _echo_out("\n".join(lines) + "\n", out)
    except SoftHandError as exc:
        _fail(str(exc))


@main.command()
@click.option("--variant", default="S11", show_default=True,
              help="Segment variant, e.g. S1, S5, S11.")
@click.option("--mode", type=click.Choice(["both", "single"]),
              default="both", show_default=True)
@click.option("--pmax", type=float, default=80.0, show_default=True)
@click.option("--steps", type=int, default=17, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def sweep(variant, mode, pmax, steps, out):
    """Pressure sweep (angle, force, lateral) for one finger variant."""
    try:
        if not variant.upper().startswith("S"):
            _fail(f"variant must look like S11, got {variant!r}")
        n = int(variant[1:])
        coeffs = kin.load_coefficients()
        finger = cal.study_finger(n)
        pressures = [pmax * i / (steps - 1) for i in range(steps)]
        rows = kin.sweep_rows(finger, coeffs, mode, pressures)
        _echo_out(kin.sweep_csv(rows), out)
    except (SoftHandError, ValueError) as exc:
        _fail(str(exc))


@main.command()
@click.option("--anchors", "anchors_path", type=click.Path(exists=True),
              default=None, help="Anchor YAML (defaults to shipped set).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--starts", type=int, default=4, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write fitted coefficients YAML here.")
def calibrate(anchors_path, seed, starts, out):
    """Fit model coefficients to anchor measurements and verify them."""
    try:
        anchors = cal.load_anchors(anchors_path)
        result = cal.fit(anchors, seed=seed, n_starts=starts)
        if out is not None:
            kin.save_coefficients(result.coefficients, out)
        lines = ["anchor,target,fitted,tolerance,within"]
        for a in anchors:
            got = cal.predict_anchor(a, result.coefficients)
            ok = abs(got - a.value) <= a.tolerance
            tag = f"{a.quantity.value}@{a.pressure_kpa:g}"
            if a.variant is not None:
                tag += f"/S{a.variant}"
            lines.append(f"{tag},{a.value:.6g},{got:.9g},"
                         f"{a.tolerance:.6g},{str(ok).lower()}")
        click.echo("\n".join(lines))
        if not result.success:
            _fail("fit failed: violated constraints "
                  f"{sorted(result.violated_constraints)}", code=1)
    except SoftHandError as exc:
        _fail(str(exc))


@main.command()
@click.option("--case", type=click.Choice(["patch", "cantilever",
                                           "actuator"]),
              default="cantilever", show_default=True)
@click.option("--pressure", type=float, default=6.0, show_default=True,
              help="Cavity pressure for the actuator case [kPa].")
@click.option("--out", type=click.Path(), default=None)
def fem(case, pressure, out):
    """Run one finite-element verification case and report the result."""
    try:
        lines = [FEM_CSV_HEADER]
        if case == "patch":
            mat = fem_mod.MaterialParams(youngs_modulus=400.0,
                                         poisson_ratio=0.0)
            mesh = fem_mod.generate_beam_mesh(10.0, 4.0, 4.0, 3, 2, 2)
            traction = np.array([0.5, 0.0, 0.0])  # kPa
            mask = np.isclose(mesh.nodes[:, 0], 10.0)
            forces = fem_mod.surface_traction_forces(mesh, mask, traction)
            res = fem_mod.solve_quasistatic(
                mesh, mat, fem_mod.LoadCase(nodal_forces=forces))
            exact = traction[0] / mat.youngs_modulus * mesh.nodes[:, 0]
            got = res.displacements[:, 0]
            err = float(np.max(np.abs(got - exact))
                        / max(np.max(np.abs(exact)), 1e-30))
            lines.append(f"patch,max_axial_strain_error,{err:.9g},0,"
                         f"{err:.9g}")
        elif case == "cantilever":
            length, width, height = 30.0, 2.0, 6.0
            mat = fem_mod.MaterialParams(youngs_modulus=400.0,
                                         poisson_ratio=0.0)
            mesh = fem_mod.generate_beam_mesh(length, width, height,
                                              28, 2, 8)
            traction_kpa = 0.2  # on the tip face, small-deflection regime
            total_force = (traction_kpa * fem_mod.KPA_TO_N_PER_MM2
                           * width * height)  # N
            mask = np.isclose(mesh.nodes[:, 0], length)
            traction = np.array([0.0, 0.0, traction_kpa])
            forces = fem_mod.surface_traction_forces(mesh, mask, traction)
            res = fem_mod.solve_quasistatic(
                mesh, mat, fem_mod.LoadCase(nodal_forces=forces),
                fem_mod.SolverOptions(load_steps=1))
            e_n_mm2 = mat.youngs_modulus * fem_mod.KPA_TO_N_PER_MM2
            inertia = width * height ** 3 / 12.0
            analytic = total_force * length ** 3 / (3 * e_n_mm2 * inertia)
            tip = float(np.mean(res.displacements[mask, 2]))
            rel = (tip - analytic) / analytic
            lines.append(f"cantilever,tip_deflection_mm,{tip:.9g},"
                         f"{analytic:.9g},{rel:.9g}")
        else:
            hand = build_hand()
            geo = hand.finger(FingerRole.INDEX).geometry
            mesh = fem_mod.generate_actuator_mesh(geo)
            mat = fem_mod.MaterialParams()
            loads = fem_mod.LoadCase(cavity_pressures={0: pressure,
                                                       1: pressure})
            res = fem_mod.solve_quasistatic(
                mesh, mat, loads, fem_mod.SolverOptions(load_steps=2))
            angle = fem_mod.fem_bend_angle(mesh, res.displacements)
            lines.append(f"actuator,bend_angle_deg,{angle:.9g},,")
        _echo_out("\n".join(lines) + "\n", out)
    except SoftHandError as exc:
        _fail(str(exc))


def _parse_object(spec_str):
    """Parse e.g. cylinder:r=30,h=120 | sphere:r=25 | box:x=40,y=25,z=25."""
    kind, _, args = spec_str.partition(":")
    kv = {}
    for part in filter(None, args.split(",")):
        k, _, v = part.partition("=")
        kv[k.strip()] = float(v)
    if kind == "cylinder":
        dims = (kv["r"], kv["h"])
    elif kind == "sphere":
        dims = (kv["r"],)
    elif kind == "box":
        dims = (kv["x"], kv["y"], kv["z"])
    else:
        raise SoftHandError(f"unknown object kind {kind!r}")
    return kind, dims


def _outcome_rows(outcomes):
    lines = [SUITE_CSV_HEADER]
    for o in outcomes:
        fingers = "+".join(sorted({c.finger_role for c in o.contacts}))
        result = "pass" if o.passed else o.failure_reason.value
        lines.append(f"{o.feix_id},{o.name},{len(o.contacts)},{fingers},"
                     f"{o.closure_quality:.9g},"
                     f"{str(o.shake_pass).lower()},{result}")
    return "\n".join(lines) + "\n"


@main.command()
@click.option("--feix", type=int, required=True,
              help="Feix schedule id (1-33).")
@click.option("--object", "object_spec", default=None,
              help="Override proxy, e.g. cylinder:r=30,h=120.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def grasp(feix, object_spec, seed, out):
    """Execute one grasp schedule and report its outcome."""
    try:
        hand = build_hand()
        schedules = {s.feix_id: s for s in grasp_mod.feix_library()}
        if feix not in schedules:
            _fail(f"feix id must be 1..{grasp_mod.FEIX_COUNT}")
        schedule = schedules[feix]
        if object_spec is not None:
            kind, dims = _parse_object(object_spec)
            from dataclasses import replace
            proxy = grasp_mod.ObjectPrimitive(
                grasp_mod.Shape(kind), dims,
                mass_g=schedule.object_proxy.mass_g,
                friction=schedule.object_proxy.friction,
                pose=schedule.object_proxy.pose)
            schedule = replace(schedule, object_proxy=proxy)
        profile = grasp_mod.ShakeProfile(seed=seed)
        outcome = grasp_mod.evaluate_grasp(hand, schedule, profile=profile)
        _echo_out(_outcome_rows([outcome]), out)
        if not outcome.passed and feix != 32:
            sys.exit(1)
    except SoftHandError as exc:
        _fail(str(exc))


@main.command()
@click.option("--all", "run_all", is_flag=True, default=False,
              help="Run the full 33-schedule library.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def suite(run_all, seed, out):
    """Run the Feix grasp suite and print the 33-row CSV report."""
    if not run_all:
        _fail("pass --all to run the full library")
    try:
        hand = build_hand()
        profile = grasp_mod.ShakeProfile(seed=seed)
        outcomes = grasp_mod.run_feix_suite(hand, profile=profile)
        _echo_out(_outcome_rows(outcomes), out)
    except SoftHandError as exc:
        _fail(str(exc))


@main.command("export-curves")
@click.option("--outdir", type=click.Path(), required=True)
def export_curves(outdir):
    """Write every model curve family as CSV files into a directory."""
    try:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        coeffs = kin.load_coefficients()
        (outdir / "segment_study.csv").write_text(
            cal.segment_study_csv(coeffs))
        cfg = pneu.PneumaticConfig()
        (outdir / "duty_sweep.csv").write_text(pneu.duty_sweep_csv(cfg))
        lines = ["pressure_kpa,splay_deg,palm_bend_down_deg,"
                 "palm_bend_up_deg,abduction_deg"]
        for i in range(0, 91, 5):
            p = float(i)
            spread = kin.splay_spread(min(p, 90.0), coeffs)
            bend_dn = kin.palm_bend(min(p, 40.0), "palm_down", coeffs)
            bend_up = kin.palm_bend(min(p, 40.0), "palm_up", coeffs)
            abd = kin.thumb_abduction(min(p, 40.0), coeffs)
            lines.append(f"{p:.6g},{spread:.9g},{bend_dn:.9g},"
                         f"{bend_up:.9g},{abd:.9g}")
        (outdir / "palm_curves.csv").write_text("\n".join(lines) + "\n")
        click.echo(f"wrote 3 curve files to {outdir}")
    except SoftHandError as exc:
        _fail(str(exc))


@main.command()
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--hand", "hand_path", type=click.Path(exists=True),
              default=None, help="Hand description YAML.")
@click.option("--coeffs", "coeffs_path", type=click.Path(exists=True),
              default=None, help="Coefficients YAML.")
def serve(port, host, hand_path, coeffs_path):
    """Start the simulation service."""
    from . import service as service_mod
    from .hand import load_hand
    hand = load_hand(hand_path) if hand_path else None
    coeffs = kin.load_coefficients(coeffs_path) if coeffs_path else None
    service_mod.serve(port=port, hand=hand, coeffs=coeffs, host=host)


if __name__ == "__main__":
    main()

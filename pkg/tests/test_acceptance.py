"""End-to-end acceptance suite.

One test per release criterion, each self-contained with pinned
tolerances and wall-clock budgets.  The browser console criterion
(slider round-trip, frame rate, rejection surfacing, snapshot replay)
lives in the frontend package's own test suite and is not duplicated
here.
"""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy.integrate import solve_ivp
from scipy.optimize import linprog

from softhand.hand import FingerRole, Transform, build_hand
from softhand.service import TICK_S, create_app
from softhand import calibration as cal
from softhand import fem
from softhand import grasp
from softhand import kinematics as kin
from softhand import pneumatics as pneu


def test_criterion_1_anchor_calibration(coeffs):
    """Five bench anchors met by a fresh fit, re-verified independently
    of the fitter, inside a 120 s budget."""
    t0 = time.perf_counter()
    anchors = cal.load_anchors()
    result = cal.fit(anchors, seed=0, n_starts=2)
    assert result.success
    fitted = result.coefficients

    # independent post-fit verification, not the fitter's own residuals
    assert kin.splay_spread(90.0, fitted) == pytest.approx(50.0, abs=2.0)
    assert kin.palm_bend(40.0, "palm_down", fitted) \
        == pytest.approx(68.0, abs=3.0)
    for p in np.linspace(0.5, 40.0, 12):
        assert kin.palm_bend(float(p), "palm_down", fitted) \
            > kin.palm_bend(float(p), "palm_up", fitted)
    assert kin.thumb_abduction(40.0, fitted) == pytest.approx(90.0, abs=5.0)

    s11 = cal.study_finger(11)
    grid = [5.0 * i for i in range(17)]
    lat = [kin.tip_lateral_displacement(
        s11, kin.single_chamber_pressures(s11, p), fitted) for p in grid]
    peak = int(np.argmax(lat))
    assert 0 < peak < len(grid) - 1          # non-monotonic sweep
    assert lat[peak] == pytest.approx(20.0, abs=2.0)
    assert kin.bend_angle(s11, kin.both_chamber_pressures(s11, 80.0),
                          fitted) == pytest.approx(180.0, abs=10.0)
    assert time.perf_counter() - t0 < 120.0


def test_criterion_2_segment_orderings(coeffs):
    """Ordering laws on the 17-point grid and the force crossover window,
    zero violations allowed."""
    grid = [5.0 * i for i in range(17)]
    variants = cal.STUDY_VARIANTS
    both = {}
    single = {}
    force = {}
    for s in variants:
        finger = cal.study_finger(s)
        both[s] = [kin.bend_angle(
            finger, kin.both_chamber_pressures(finger, p), coeffs)
            for p in grid]
        single[s] = [kin.bend_angle(
            finger, kin.single_chamber_pressures(finger, p), coeffs)
            for p in grid]
        force[s] = [kin.tip_force_estimate(
            finger, kin.single_chamber_pressures(finger, p), 0.0, coeffs)
            for p in grid]
    for a, b in zip(variants, variants[1:]):
        for i in range(len(grid)):
            assert both[b][i] >= both[a][i] - 1e-9
            assert single[b][i] <= single[a][i] + 1e-9
        # crossover: multi-segment stronger at 20 kPa, weaker at 50 kPa
        diff = np.array(force[1]) - np.array(force[b])
        assert diff[grid.index(20.0)] < 0
        assert diff[grid.index(50.0)] > 0


def test_criterion_3_pneumatics():
    t0 = time.perf_counter()
    cfg = pneu.PneumaticConfig()
    assert pneu.duty_to_steady_pressure(0.0, cfg) == 0.0
    assert pneu.duty_to_steady_pressure(1.0, cfg) == cfg.supply_pressure
    for duty in [0.1 * i for i in range(11)]:
        mean, _ = pneu.event_steady_stats(duty, cfg)
        assert abs(mean - pneu.duty_to_steady_pressure(duty, cfg)) \
            <= 0.02 * cfg.supply_pressure
    # closed-loop step response settles inside five time constants
    state = pneu.PressureState.zeros(1)
    target = 55.0
    dt = 0.01
    for _ in range(int(5.0 * max(cfg.tau_fill, cfg.tau_vent) / dt)):
        duties = pneu.regulate_to_target((target,), state, cfg)
        state = pneu.step_averaged(state, duties, cfg, dt)
    assert abs(state.channel_pressures[0] - target) \
        <= 0.02 * cfg.supply_pressure
    assert time.perf_counter() - t0 < 10.0


def test_criterion_4_fem():
    # patch: exact to solver tolerance
    mat = fem.MaterialParams(youngs_modulus=400.0, poisson_ratio=0.0)
    mesh = fem.generate_beam_mesh(10.0, 4.0, 4.0, 3, 2, 2)
    mask = np.isclose(mesh.nodes[:, 0], 10.0)
    forces = fem.surface_traction_forces(mesh, mask,
                                         np.array([0.5, 0.0, 0.0]))
    res = fem.solve_quasistatic(mesh, mat,
                                fem.LoadCase(nodal_forces=forces))
    exact = 0.5 / mat.youngs_modulus * mesh.nodes[:, 0]
    assert np.max(np.abs(res.displacements[:, 0] - exact)) \
        <= 1e-8 * exact.max()

    # Clapeyron: energy equals half the external work, within 1%
    work = float(np.sum(forces * res.displacements))
    assert fem.strain_energy(mesh, mat, res.displacements) \
        == pytest.approx(0.5 * work, rel=0.01)

    # cantilever within 15% of FL^3 / 3EI under the budgets
    length, width, height = 30.0, 2.0, 6.0
    mesh = fem.generate_beam_mesh(length, width, height, 28, 2, 8)
    assert mesh.tet_count <= 5000
    assert len(np.unique(mesh.nodes[:, 2])) - 1 >= 4
    mask = np.isclose(mesh.nodes[:, 0], length)
    forces = fem.surface_traction_forces(mesh, mask,
                                         np.array([0.0, 0.0, 0.2]))
    t0 = time.perf_counter()
    res = fem.solve_quasistatic(mesh, mat,
                                fem.LoadCase(nodal_forces=forces))
    assert time.perf_counter() - t0 < 30.0
    total = 0.2 * fem.KPA_TO_N_PER_MM2 * width * height
    e = mat.youngs_modulus * fem.KPA_TO_N_PER_MM2
    analytic = total * length ** 3 / (3 * e * width * height ** 3 / 12.0)
    tip = float(np.mean(res.displacements[mask, 2]))
    assert abs(tip - analytic) / analytic <= 0.15

    # closed cavity: net follower force vanishes at every Newton iterate
    geometry = cal.study_finger(1, finger_length=60.0).geometry
    mesh = fem.generate_actuator_mesh(geometry)
    res = fem.solve_quasistatic(mesh, fem.MaterialParams(),
                                fem.LoadCase(cavity_pressures={0: 6.0}),
                                fem.SolverOptions(load_steps=2))
    assert all(rel <= 1e-9 for rel in res.cavity_net_force[0])


def test_criterion_5_kinematic_oracles(hand, coeffs):
    # PCC chaining vs numeric frame-ODE integration
    finger = hand.finger(FingerRole.INDEX)
    length = finger.geometry.finger_length
    rng = np.random.default_rng(17)
    for _ in range(100):
        pressures = rng.uniform(0.0, 80.0, size=4)
        arcs = kin.segment_arcs(finger, pressures, coeffs)
        _frames, tip = kin.forward_kinematics(finger, pressures, coeffs)
        pos, rot = np.zeros(3), np.eye(3)
        for km, kd, seg_len in arcs:
            w = np.array([-kd, km, 0.0])
            wx = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]],
                           [-w[1], w[0], 0.0]])

            def rhs(_s, y):
                r = y[3:].reshape(3, 3)
                return np.concatenate([r @ [0.0, 0.0, 1.0],
                                       (r @ wx).ravel()])

            sol = solve_ivp(rhs, (0.0, seg_len),
                            np.concatenate([pos, rot.ravel()]),
                            rtol=1e-12, atol=1e-14)
            pos = sol.y[:3, -1]
            rot = sol.y[3:, -1].reshape(3, 3)
        assert np.linalg.norm(np.array(tip[0]) - pos) <= 1e-6 * length

    # capsule distance vs dense sampling
    for _ in range(100):
        center = tuple(rng.uniform(-40.0, 40.0, 3))
        obj = grasp.ObjectPrimitive(
            grasp.Shape.SPHERE, (float(rng.uniform(5.0, 30.0)),),
            pose=Transform(Transform.identity().rotation, center))
        p0 = rng.uniform(-80.0, 80.0, size=3)
        p1 = p0 + rng.uniform(-40.0, 40.0, size=3)
        radius = float(rng.uniform(2.0, 8.0))
        dist, _pt = grasp.capsule_distance(obj, p0, p1, radius)
        ts = np.linspace(0.0, 1.0, 20001)
        dense = float(np.min(obj.sdf(p0 + ts[:, None] * (p1 - p0)))) - radius
        assert dense - 0.01 <= dist <= dense + 1e-9


def _origin_interior(wrenches):
    """Separating-direction LP: interior iff no nonzero d has
    <w_i, d> <= 0 for every wrench."""
    w = np.asarray(wrenches)
    for k in range(6):
        for sign in (1.0, -1.0):
            a_eq = np.zeros((1, 6))
            a_eq[0, k] = 1.0
            res = linprog(c=np.zeros(6), A_ub=w, b_ub=np.zeros(len(w)),
                          A_eq=a_eq, b_eq=[sign],
                          bounds=[(-1.0, 1.0)] * 6, method="highs")
            if res.status == 0:
                return False
    return True


def test_criterion_6_grasp_suite(hand):
    # epsilon positivity agrees with the LP interiority oracle
    rng = np.random.default_rng(23)
    checked = 0
    while checked < 100:
        center = tuple(rng.uniform(-20.0, 20.0, 3))
        obj = grasp.ObjectPrimitive(
            grasp.Shape.SPHERE, (float(rng.uniform(8.0, 30.0)),),
            pose=Transform(Transform.identity().rotation, center))
        dirs = rng.normal(size=(int(rng.integers(2, 8)), 3))
        if rng.random() < 0.4:
            dirs[:, 2] = np.abs(dirs[:, 2]) + 0.2
        contacts = []
        for d in dirs:
            d = d / np.linalg.norm(d)
            p = obj.centroid + obj.dimensions[0] * d
            contacts.append(grasp.ContactPoint(
                tuple(float(v) for v in p), tuple(float(v) for v in -d),
                "index", 0, 0.6))
        eps = grasp.wrench_closure(contacts, obj)
        pts = np.vstack(grasp.contact_wrenches(contacts, obj))
        pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        if eps < 1e-6 and _origin_interior(pts):
            continue  # marginal band between the two formulations
        assert (eps > 0.0) == _origin_interior(pts)
        checked += 1

    # library shape and palm-first validity
    library = grasp.feix_library()
    assert len(library) == 33
    for s in library:
        assert all(n in grasp.PALM_CHANNEL_NAMES
                   for n in s.phases[0].targets)

    # full suite, timed, twice, byte-identical reports
    t0 = time.perf_counter()
    first = grasp.run_feix_suite(hand)
    assert time.perf_counter() - t0 < 60.0
    second = grasp.run_feix_suite(hand)
    report = grasp.report_to_dict(first)
    assert json.dumps(report, sort_keys=True) \
        == json.dumps(grasp.report_to_dict(second), sort_keys=True)

    by_id = {o.feix_id: o for o in first}
    assert by_id[32].failure_reason \
        == grasp.FailureReason.INSUFFICIENT_ENCLOSURE
    assert report["passed"] >= 28


def test_criterion_7_service_contract(hand, coeffs):
    client = TestClient(create_app(hand=hand, coeffs=coeffs))

    # session isolation
    a = client.post("/v1/sessions", json={}).json()["session_id"]
    b = client.post("/v1/sessions", json={}).json()["session_id"]
    targets = [0.0] * 19
    targets[0] = 40.0
    client.post(f"/v1/sessions/{a}/targets", json={"targets_kpa": targets})
    for _ in range(20):
        client.get(f"/v1/sessions/{a}/state")
    assert client.get(f"/v1/sessions/{a}/state").json()[
        "pressures_kpa"][0] > 0.0
    assert all(p == 0.0 for p in client.get(
        f"/v1/sessions/{b}/state").json()["pressures_kpa"])

    # palm-B over-limit rejected without an established contact
    over = [0.0] * 19
    over[17] = 60.0
    resp = client.post(f"/v1/sessions/{b}/targets",
                       json={"targets_kpa": over})
    assert resp.status_code == 422
    assert resp.json()["code"] == "limit_violation"

    # 10 simulated seconds at 30 Hz: strictly monotone sequence numbers
    frames = [client.get(f"/v1/sessions/{b}/state").json()
              for _ in range(300)]
    seqs = [f["seq"] for f in frames]
    assert all(y > x for x, y in zip(seqs, seqs[1:]))
    assert frames[-1]["time_s"] - frames[0]["time_s"] \
        == pytest.approx(299 * TICK_S, abs=1e-6)

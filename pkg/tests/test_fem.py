"""Corotational tetrahedral solver: patch, beam, cavity and I/O checks."""

import math

import numpy as np
import pytest

from softhand.errors import ConvergenceError, ValidationError
from softhand import fem
from softhand import kinematics as kin
from softhand.calibration import study_finger


@pytest.fixture(scope="module")
def patch_case():
    """Uniaxial tension with nu = 0: the linear field u_x = (t/E) x is in
    the element space, so the solver must reproduce it exactly."""
    mat = fem.MaterialParams(youngs_modulus=400.0, poisson_ratio=0.0)
    mesh = fem.generate_beam_mesh(10.0, 4.0, 4.0, 3, 2, 2)
    traction = np.array([0.5, 0.0, 0.0])  # kPa
    mask = np.isclose(mesh.nodes[:, 0], 10.0)
    forces = fem.surface_traction_forces(mesh, mask, traction)
    res = fem.solve_quasistatic(mesh, mat,
                                fem.LoadCase(nodal_forces=forces))
    return mat, mesh, traction, forces, res


def test_patch_uniaxial_exact(patch_case):
    mat, mesh, traction, _forces, res = patch_case
    exact = traction[0] / mat.youngs_modulus * mesh.nodes[:, 0]
    err = np.max(np.abs(res.displacements[:, 0] - exact))
    assert err <= 1e-8 * np.max(np.abs(exact))
    # no spurious transverse motion at nu = 0
    assert np.max(np.abs(res.displacements[:, 1:])) <= 1e-10


def test_patch_clapeyron(patch_case):
    """Stored energy equals half the external work for the linear solve."""
    mat, mesh, _traction, forces, res = patch_case
    work = float(np.sum(forces * res.displacements))
    energy = fem.strain_energy(mesh, mat, res.displacements)
    assert energy == pytest.approx(0.5 * work, rel=0.01)


@pytest.fixture(scope="module")
def cantilever_case():
    length, width, height = 30.0, 2.0, 6.0
    mat = fem.MaterialParams(youngs_modulus=400.0, poisson_ratio=0.0)
    mesh = fem.generate_beam_mesh(length, width, height, 28, 2, 8)
    traction_kpa = 0.2
    mask = np.isclose(mesh.nodes[:, 0], length)
    forces = fem.surface_traction_forces(
        mesh, mask, np.array([0.0, 0.0, traction_kpa]))
    res = fem.solve_quasistatic(mesh, mat,
                                fem.LoadCase(nodal_forces=forces))
    total_force = traction_kpa * fem.KPA_TO_N_PER_MM2 * width * height
    e = mat.youngs_modulus * fem.KPA_TO_N_PER_MM2
    inertia = width * height ** 3 / 12.0
    analytic = total_force * length ** 3 / (3 * e * inertia)
    tip = float(np.mean(res.displacements[mask, 2]))
    return mesh, tip, analytic


def test_cantilever_tip_deflection(cantilever_case):
    mesh, tip, analytic = cantilever_case
    assert mesh.tet_count <= 5000
    # at least four elements through the bending thickness
    assert len(np.unique(mesh.nodes[:, 2])) - 1 >= 4
    assert abs(tip - analytic) / analytic <= 0.15


def test_cantilever_refinement_reduces_error():
    """Halving the mesh in every direction moves the tip deflection
    toward the Euler-Bernoulli value (the coarse mesh is stiffer)."""
    length, width, height = 30.0, 2.0, 6.0
    mat = fem.MaterialParams(youngs_modulus=400.0, poisson_ratio=0.0)
    errors = []
    for nx, ny, nz in ((14, 1, 4), (28, 2, 8)):
        mesh = fem.generate_beam_mesh(length, width, height, nx, ny, nz)
        mask = np.isclose(mesh.nodes[:, 0], length)
        forces = fem.surface_traction_forces(
            mesh, mask, np.array([0.0, 0.0, 0.2]))
        res = fem.solve_quasistatic(mesh, mat,
                                    fem.LoadCase(nodal_forces=forces))
        total = 0.2 * fem.KPA_TO_N_PER_MM2 * width * height
        e = mat.youngs_modulus * fem.KPA_TO_N_PER_MM2
        analytic = total * length ** 3 / (3 * e * width * height ** 3 / 12.0)
        tip = float(np.mean(res.displacements[mask, 2]))
        errors.append(abs(tip - analytic) / analytic)
    assert errors[1] < errors[0]


# -- cavity loading ---------------------------------------------------------

@pytest.fixture(scope="module")
def actuator_case():
    geometry = study_finger(1, finger_length=60.0).geometry
    mesh = fem.generate_actuator_mesh(geometry)
    mat = fem.MaterialParams()
    loads = fem.LoadCase(cavity_pressures={0: 6.0})
    res = fem.solve_quasistatic(mesh, mat, loads,
                                fem.SolverOptions(load_steps=2))
    return geometry, mesh, res


def test_cavity_pressure_is_self_equilibrated(actuator_case):
    """A closed cavity surface exerts zero net follower force at every
    Newton iterate (discrete divergence theorem)."""
    _geo, _mesh, res = actuator_case
    for rel in res.cavity_net_force[0]:
        assert rel <= 1e-9


def test_cavity_volume_grows_under_pressure(actuator_case):
    _geo, mesh, res = actuator_case
    v0 = mesh.cavity_volume(0)
    v1 = mesh.cavity_volume(0, mesh.nodes + res.displacements)
    assert v0 > 0
    assert v1 > v0


def test_actuator_bends_toward_plain_side(actuator_case):
    """The strain-limiting bottom layer forces the chain to curl."""
    _geo, mesh, res = actuator_case
    angle = fem.fem_bend_angle(mesh, res.displacements)
    assert angle > 1.0


def test_fem_bend_angle_matches_reduced_model():
    """Single-segment actuator at low pressure lands within 25% of the
    bench-tuned pressure-curvature law.  The gap is a model-family
    difference (linear tets in bending vs an empirical fit), so the
    tolerance is deliberately loose; the modulus is the soft-silicone
    value the bench actuators were cast from."""
    finger = study_finger(1, finger_length=60.0)
    mesh = fem.generate_actuator_mesh(finger.geometry)
    mat = fem.MaterialParams(youngs_modulus=240.0)
    coeffs = kin.load_coefficients()
    for p in (5.0, 5.5, 6.0):
        res = fem.solve_quasistatic(
            mesh, mat, fem.LoadCase(cavity_pressures={0: p}),
            fem.SolverOptions(load_steps=2, max_iterations=200))
        fem_angle = fem.fem_bend_angle(mesh, res.displacements)
        pcc_angle = kin.bend_angle(
            finger, kin.both_chamber_pressures(finger, p), coeffs)
        assert fem_angle == pytest.approx(pcc_angle, rel=0.25)


# -- kinematic sanity -------------------------------------------------------

def test_bend_angle_zero_field_is_zero():
    mesh = fem.generate_beam_mesh(10.0, 2.0, 2.0, 4, 1, 1)
    assert fem.fem_bend_angle(mesh, np.zeros_like(mesh.nodes)) == 0.0


def test_bend_angle_recovers_rigid_rotation():
    mesh = fem.generate_beam_mesh(10.0, 2.0, 2.0, 4, 1, 1)
    theta = math.radians(25.0)
    rot = np.array([[math.cos(theta), 0.0, math.sin(theta)],
                    [0.0, 1.0, 0.0],
                    [-math.sin(theta), 0.0, math.cos(theta)]])
    u = mesh.nodes @ rot.T - mesh.nodes
    assert fem.fem_bend_angle(mesh, u) == pytest.approx(25.0, abs=1e-9)


def test_corotational_energy_invariant_under_rotation():
    """A rigid rotation stores no corotational energy but plenty of
    linear-strain energy, separating the two measures."""
    mesh = fem.generate_beam_mesh(10.0, 2.0, 2.0, 4, 1, 1)
    mat = fem.MaterialParams(poisson_ratio=0.3)
    theta = math.radians(30.0)
    rot = np.array([[math.cos(theta), -math.sin(theta), 0.0],
                    [math.sin(theta), math.cos(theta), 0.0],
                    [0.0, 0.0, 1.0]])
    u = mesh.nodes @ rot.T - mesh.nodes
    assert fem.strain_energy(mesh, mat, u, corotational=True) \
        == pytest.approx(0.0, abs=1e-12)
    assert fem.strain_energy(mesh, mat, u) > 1e-6


# -- validation and I/O -----------------------------------------------------

def test_material_validation():
    with pytest.raises(ValidationError):
        fem.MaterialParams(youngs_modulus=0.0)
    with pytest.raises(ValidationError):
        fem.MaterialParams(poisson_ratio=0.5)


def test_mesh_rejects_inverted_element():
    nodes = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, -1]]
    with pytest.raises(ValidationError):
        fem.TetMesh(nodes, [[0, 1, 2, 3]])


def test_solver_requires_clamped_nodes():
    nodes = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    mesh = fem.TetMesh(nodes, [[0, 1, 2, 3]])
    with pytest.raises(ValidationError):
        fem.solve_quasistatic(mesh, fem.MaterialParams(), fem.LoadCase())


def test_unknown_cavity_rejected():
    mesh = fem.generate_beam_mesh(10.0, 2.0, 2.0, 2, 1, 1)
    with pytest.raises(ValidationError):
        fem.apply_cavity_pressure(mesh, 99, 5.0)


def test_mesh_file_round_trip(tmp_path, actuator_case):
    _geo, mesh, _res = actuator_case
    path = tmp_path / "mesh.yaml"
    fem.save_mesh(mesh, path)
    again = fem.load_mesh(path)
    assert np.array_equal(again.tets, mesh.tets)
    assert np.allclose(again.nodes, mesh.nodes)
    assert np.array_equal(again.fixed_nodes, mesh.fixed_nodes)
    assert set(again.cavity_faces) == set(mesh.cavity_faces)
    for cid in mesh.cavity_faces:
        assert np.array_equal(again.cavity_faces[cid],
                              mesh.cavity_faces[cid])
    assert np.allclose(again.stiffness_scale, mesh.stiffness_scale)


def test_displacement_csv_header(actuator_case):
    _geo, _mesh, res = actuator_case
    text = fem.displacement_csv(res.displacements)
    assert text.splitlines()[0] == fem.DISPLACEMENT_CSV_HEADER
    assert len(text.splitlines()) == len(res.displacements) + 1

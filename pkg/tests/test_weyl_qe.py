import json

import numpy as np
import pytest
from scipy.special import j0

from bwlab import GuardError, ValidationError
from bwlab.lie_core import GroupSpec, Weight
from bwlab.spectra import MagneticTorus, U1FlatCircle, magnetic_torus_operator, u1_flat_circle_spectrum
from bwlab.weyl_qe import (
    FlowState,
    build_omega,
    deep_table,
    flow_trace_csv,
    hamiltonian_step,
    integrate,
    matrix_elements,
    omega_exponent,
    omega_growth,
    qe_variance,
    sphere_volume,
    time_average,
    variance_curve_csv,
    weyl_count,
)


def _count_lattice(alpha, k, bound):
    q = np.arange(-10_000, 10_001)
    return int(np.sum(4 * np.pi**2 * (k * alpha + q) ** 2 <= bound))


def test_sphere_volumes():
    assert sphere_volume(1) == pytest.approx(2)
    assert sphere_volume(2) == pytest.approx(2 * np.pi)
    assert sphere_volume(3) == pytest.approx(4 * np.pi)


def test_empty_interval():
    m = U1FlatCircle(0.3)
    t = u1_flat_circle_spectrum(0.3, 1, 50)
    assert weyl_count(t, 0.1, 0.5, 0.5, m) == (0, 0.0)


@pytest.mark.parametrize("h", [0.1, 0.05, 0.02])
@pytest.mark.parametrize("alpha,k", [(0.3137, 3), (np.sqrt(2) - 1, 1), (0.5, 7)])
def test_circle_weyl_count(h, alpha, k):
    m = U1FlatCircle(alpha)
    t = deep_table(m, Weight((k,), ()), 1 / h**2)
    n, ratio = weyl_count(t, h, 0, 1, m)
    assert n == _count_lattice(alpha, k, 1 / h**2)
    assert abs(n - 1 / (np.pi * h)) <= 1
    assert ratio == pytest.approx(n * np.pi * h)


def test_truncated_table_refused():
    m = U1FlatCircle(0.3)
    with pytest.raises(GuardError):
        weyl_count(u1_flat_circle_spectrum(0.3, 1, 3), 0.01, 0, 1, m)
    with pytest.raises(ValidationError):
        weyl_count(u1_flat_circle_spectrum(0.3, 1, 3), 0.1, 1, 0.5, m)


def test_magnetic_weyl_ratio():
    mt = MagneticTorus(1, 96)
    t = deep_table(mt, Weight((2,), ()), 100)
    n, ratio = weyl_count(t, 0.1, 0, 1, mt)
    assert abs(ratio - 1) < 0.1


def test_omega_exponents():
    assert omega_exponent(1, GroupSpec(1, 0)) == 2
    assert omega_exponent(2, GroupSpec(0, 1)) == 4


def test_omega_circle_growth():
    om = build_omega(U1FlatCircle(0.3137), 40)
    assert all(e.lam >= 0 and e.multiplicity >= 1 and e.weight.norm <= 40 and e.lam <= 40 for e in om.entries)
    g = omega_growth(om, np.geomspace(10, 40, 12))
    assert 1.8 <= g.slope <= 2.2
    assert np.all(g.radii**2 / g.constant <= g.counts * (1 + 1e-12)) and np.all(g.counts <= g.constant * g.radii**2 * (1 + 1e-12))


def test_omega_counts_against_enumeration():
    alpha, R = 0.3137, 12.0
    om = build_omega(U1FlatCircle(alpha), R)
    brute = 0
    for k in range(-12, 13):
        q = np.arange(-50, 51)
        lam = 2 * np.pi * np.abs(k * alpha + q)
        brute += int(np.sum(lam <= R))
    assert om.count_square() == brute
    obj = json.loads(om.to_json())
    assert obj["r"] == 2 and obj["count_square"] == brute


def test_omega_needs_positive_radius():
    with pytest.raises(ValidationError):
        build_omega(U1FlatCircle(0.2), 0)


def test_qe_constant_observable():
    om = build_omega(MagneticTorus(1, 48), 5, eigenvectors=True)
    assert qe_variance(om, lambda p: np.full(len(p), 3.0)) == pytest.approx(0, abs=1e-24)


def test_qe_shift_invariance():
    om = build_omega(MagneticTorus(1, 48), 6, eigenvectors=True)
    a = lambda p: np.cos(2 * np.pi * p[:, 0]) + 0.5 * np.sin(2 * np.pi * p[:, 1])
    v1 = qe_variance(om, a)
    v2 = qe_variance(om, lambda p: a(p) + 7.0)
    assert v2 == pytest.approx(v1, rel=1e-9)


def test_qe_circle_plane_waves():
    # plane waves have constant modulus, so every matrix element is the average
    om = build_omega(U1FlatCircle(0.3), 20, eigenvectors=True, grid=256)
    bump = lambda p: np.exp(np.cos(2 * np.pi * (p[:, 0] - 0.5)) - 1.0)
    assert qe_variance(om, bump) < 1e-25


def test_qe_without_vectors():
    with pytest.raises(ValidationError):
        qe_variance(build_omega(U1FlatCircle(0.3), 5), lambda p: p[:, 0])


def test_magnetic_matrix_elements_against_dense_quadrature():
    grid = 32
    mt = MagneticTorus(1, grid)
    om = build_omega(mt, 4, eigenvectors=True)
    norms, lams, vals, avg = matrix_elements(om, lambda p: np.cos(2 * np.pi * p[:, 0]))
    x = np.repeat(np.arange(grid) / grid, grid)
    a = np.cos(2 * np.pi * x)
    signed = np.array([e.weight.components[0] for e in om.entries for _ in e.vector_index])
    for k in (1, 2, -2):
        H = magnetic_torus_operator(1, k, grid).toarray()
        w, V = np.linalg.eigh(H)
        level = V[:, : abs(k)]  # lowest Landau level has multiplicity |k|
        ref = np.trace(level.conj().T @ (a[:, None] * level)).real
        sel = (signed == k) & np.isclose(lams, np.sqrt(w[0]), rtol=1e-9)
        assert sel.sum() == abs(k)
        assert abs(vals[sel].sum().real - ref) < 1e-8
    assert avg == pytest.approx(0, abs=1e-12)


def test_variance_curve_csv():
    om = build_omega(MagneticTorus(1, 48), 5, eigenvectors=True)
    text = variance_curve_csv(om, lambda p: np.cos(2 * np.pi * p[:, 0]), [2.0, 5.0])
    lines = text.strip().split("\n")
    assert lines[0] == "R,N,variance" and len(lines) == 3


def test_zero_twist_is_free_motion():
    s = FlowState((0.1, 0.2), (0.3, -0.7), k=0, curvature=2 * np.pi)
    out = s
    for _ in range(100):
        out = hamiltonian_step(out, 1e-3)
    assert out.xi == s.xi
    assert np.allclose(out.x, (0.1 + 2 * 0.3 * 0.1, 0.2 - 2 * 0.7 * 0.1), atol=1e-13)
    final, _, X, P = integrate(s, 1e-3, 100)
    assert np.all(P == np.array(s.xi))
    assert np.allclose(final.x, out.x, atol=1e-15)


def test_cyclotron_radius():
    s = FlowState((0.0, 0.0), (1.0, 0.0), h=1.0, k=1, curvature=2 * np.pi)
    _, _, X, _ = integrate(s, 1e-3, 20_000)
    A = np.column_stack([2 * X, np.ones(len(X))])
    c0, c1, c2 = np.linalg.lstsq(A, (X**2).sum(1), rcond=None)[0]
    r = np.sqrt(c2 + c0**2 + c1**2)
    assert abs(r / s.cyclotron_radius() - 1) < 1e-4


def test_energy_conserved():
    s = FlowState((0.0, 0.0), (0.6, 0.8), h=0.5, k=3, curvature=2 * np.pi)
    final, *_ = integrate(s, 1e-3, 100_000, record_every=100_000)
    assert abs(final.energy - s.energy) / s.energy < 1e-8


def test_dt_precondition():
    with pytest.raises(ValidationError):
        hamiltonian_step(FlowState((0, 0), (100.0, 0.0)), 1e-3)


def test_time_average_constant():
    s = FlowState((0.0, 0.0), (1.0, 0.0), k=1, curvature=2 * np.pi)
    assert time_average(lambda X: np.full(len(X), 2.5), s, 1.0, 1e-3) == pytest.approx(2.5)


def test_time_average_free_flow_decays():
    xi = (0.5 * (np.sqrt(5) - 1), 0.3)
    s = FlowState((0.0, 0.0), xi, k=0)
    for T in (5.0, 20.0):
        avg = time_average(lambda X: np.exp(2j * np.pi * X[:, 0]), s, T, 1e-3)
        assert abs(avg) <= 1.0 / (2 * np.pi * xi[0] * T) + 1e-6


def test_time_average_cyclotron_single_period():
    B = 2 * np.pi
    s = FlowState((0.0, 0.0), (1.0, 0.0), h=1.0, k=1, curvature=B)
    dt = 1e-3
    theta = 2 * np.arctan(B * dt)
    steps = int(round(20 * 2 * np.pi / theta))
    avg = time_average(lambda X: np.cos(2 * np.pi * X[:, 0]), s, steps * dt, dt)
    # centre at x1 = 0, radius 1/(2 pi): one-period mean of cos(2 pi r cos s) is J0(2 pi r)
    assert avg.real == pytest.approx(j0(2 * np.pi * s.cyclotron_radius()), abs=1e-4)


def test_flow_trace_csv():
    s = FlowState((0.0, 0.0), (1.0, 0.0), k=1, curvature=1.0)
    _, t, X, P = integrate(s, 1e-3, 4, record_every=2)
    lines = flow_trace_csv(t, X, P).strip().split("\n")
    assert lines[0] == "t,x0,x1,xi0,xi1" and len(lines) == 4

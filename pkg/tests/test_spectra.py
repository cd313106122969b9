import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bwlab import GuardError, ValidationError
from bwlab.spectra import (
    GrowthClassifier,
    Linear,
    MagneticTorus,
    PolyLower,
    SubPolynomial,
    SU2FlatCircle,
    U1FlatCircle,
    classify_growth,
    lambda1_series,
    liouville_alpha,
    magnetic_torus_spectrum,
    su2_flat_circle_fd_spectrum,
    su2_flat_circle_spectrum,
    u1_flat_circle_fd_spectrum,
    u1_flat_circle_spectrum,
)

PI2 = np.pi**2


def test_untwisted_circle():
    vals = u1_flat_circle_spectrum(0.3, 0, 4).eigenvalues
    assert np.allclose(vals, [0, 4 * PI2, 4 * PI2, 16 * PI2])


def test_half_holonomy():
    assert np.allclose(u1_flat_circle_spectrum(0.5, 1, 2).eigenvalues, [PI2, PI2])


def test_irrational_holonomy_against_finite_differences():
    alpha = np.sqrt(2) - 1
    exact = u1_flat_circle_spectrum(alpha, 5, 1).eigenvalues[0]
    dist = abs(5 * alpha - round(5 * alpha))
    assert exact == pytest.approx(4 * PI2 * dist**2, rel=1e-14)
    fd = u1_flat_circle_fd_spectrum(alpha, 5, 4096, 1).eigenvalues[0]
    assert abs(fd - exact) / exact < 1e-4


def test_fd_converges_at_second_order():
    alpha, k = 0.3137, 3
    exact = u1_flat_circle_spectrum(alpha, k, 6).eigenvalues
    errs = [np.max(np.abs(u1_flat_circle_fd_spectrum(alpha, k, n, 6).eigenvalues - exact) / exact) for n in (256, 512)]
    rate = np.log2(errs[0] / errs[1])
    assert 1.8 <= rate <= 2.2


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.999), st.integers(-20, 20))
def test_spectral_symmetry(alpha, k):
    a = u1_flat_circle_spectrum(alpha, k, 6).eigenvalues
    b = u1_flat_circle_spectrum(1 - alpha, -k, 6).eigenvalues
    assert np.allclose(a, b, atol=1e-9)


def test_alpha_reduced_mod_one():
    assert U1FlatCircle(1.25).alpha == pytest.approx(0.25)
    assert U1FlatCircle(Fraction(7, 4)).alpha == Fraction(3, 4)


def test_zero_weight_lambda1_and_kernel():
    t = u1_flat_circle_fd_spectrum(0.4, 0, 128, 3)
    assert t.eigenvalues[0] < 1e-9 and t.eigenvalues[1] > 1
    assert t.lambda1 == pytest.approx(t.eigenvalues[1])
    mt = magnetic_torus_spectrum(1, 0, 32, 3)
    assert mt.eigenvalues[0] < 1e-9 and mt.eigenvalues[1] > 1


def test_su2_identity_holonomy():
    assert np.allclose(su2_flat_circle_spectrum([1, 0, 0, 0], 2, 3).eigenvalues, 0)


@pytest.mark.parametrize("k", [0, 2, 4, 6])
def test_su2_even_weight_has_fixed_vector(k):
    rng = np.random.default_rng(k)
    g = rng.standard_normal(4)
    # for k = 0 lambda_1 means the smallest nonzero value, so test the bottom entry
    assert su2_flat_circle_spectrum(g, k, 1).eigenvalues[0] == pytest.approx(0, abs=1e-9)


def test_su2_against_block_finite_differences():
    phi = np.pi * (np.sqrt(5) - 1) / 2
    g = np.array([np.cos(phi), np.sin(phi), 0, 0])
    exact = su2_flat_circle_spectrum(g, 3, 1).eigenvalues[0]
    fd = su2_flat_circle_fd_spectrum(g, 3, 4096, 1).eigenvalues[0]
    assert abs(fd - exact) / exact < 1e-4


def test_su2_holonomy_conjugation_invariance():
    rng = np.random.default_rng(2)
    g = rng.standard_normal(4)
    g /= np.linalg.norm(g)
    fd = su2_flat_circle_fd_spectrum(g, 3, 512, 4).eigenvalues
    exact = su2_flat_circle_spectrum(g, 3, 4).eigenvalues
    assert np.allclose(fd, exact, rtol=1e-3)


def test_lowest_landau_level():
    assert abs(magnetic_torus_spectrum(1, 1, 64, 1).eigenvalues[0] / (2 * np.pi) - 1) < 0.02
    lam = magnetic_torus_spectrum(1, 4, 64, 1).eigenvalues[0]
    assert abs(lam / 4 / (2 * np.pi) - 1) < 0.02
    assert lam >= (np.pi - 0.05 * 2 * np.pi) * 4


def test_landau_multiplicity_and_gap():
    m, k = 1, 4
    vals = magnetic_torus_spectrum(m, k, 64, m * k + 1).eigenvalues
    scale = vals[-1]
    assert np.ptp(vals[: m * k]) < 1e-6 * scale
    # continuum gap is 4 pi; the lattice pulls higher levels down slightly
    assert vals[m * k] - vals[m * k - 1] > 0.99 * 4 * np.pi


def test_magnetic_grid_guard():
    with pytest.raises(GuardError):
        magnetic_torus_spectrum(1, 16, 32, 1)


def test_model_metadata():
    mt = MagneticTorus(2, 64)
    assert mt.flux(3) == pytest.approx(2 * np.pi * 6)
    assert mt.base_dim == 2 and mt.group.a == 1
    assert SU2FlatCircle().group.b == 1


def test_spectrum_table_exports():
    t = u1_flat_circle_spectrum(0.5, 1, 2)
    lines = t.to_csv().strip().split("\n")
    assert lines[0] == "k0,index,eigenvalue,provenance"
    assert len(lines) == 3 and lines[1].endswith("exact")
    assert json.loads(t.to_json())["eigenvalues"] == pytest.approx([PI2, PI2])


def test_liouville_j2():
    d = liouville_alpha(2)
    assert d.alpha == Fraction(3, 4)
    (w,) = d.witnesses
    assert (w.k, w.p, w.residual) == (4, -3, 0)


def test_liouville_witnesses_hold_exactly():
    for J in range(2, 7):
        d = liouville_alpha(J)
        for w in d.witnesses:
            assert abs(w.k * d.alpha + w.p) <= Fraction(1, w.k**w.j)
            assert w.holds
    assert liouville_alpha(3).witnesses[1].k == 128


def test_liouville_range():
    with pytest.raises(ValidationError):
        liouville_alpha(9)
    with pytest.raises(ValidationError):
        liouville_alpha(1)


def test_liouville_lambda1_decay():
    d = liouville_alpha(4)
    for w in d.witnesses:
        lam = u1_flat_circle_spectrum(d.alpha, w.k, 1).lambda1
        assert 0 <= lam <= 4 * PI2 * Fraction(1, w.k ** (2 * w.j))


def test_classify_landau_linear():
    res = classify_growth([(k, 2 * np.pi * k) for k in range(1, 9)])
    assert isinstance(res, Linear) and res.slope == pytest.approx(2 * np.pi)


def test_classify_quadratic_irrational():
    # brute force: k * dist(k sqrt 2, Z) stays above c > 0 for k <= 1e4
    k = np.arange(1, 10_001)
    x = k * np.sqrt(2)
    assert np.min(k * np.abs(x - np.round(x))) > 0.34
    res = classify_growth(lambda1_series(np.sqrt(2), range(1, 257)))
    assert isinstance(res, PolyLower) and 1.5 < res.nu < 2.5


def test_classify_liouville():
    d = liouville_alpha(4)
    ks = sorted(set(range(1, 33)) | {w.k for w in d.witnesses})
    res = classify_growth(lambda1_series(d.alpha, ks))
    assert isinstance(res, SubPolynomial)
    assert {n for n, _ in res.evidence} <= {float(w.k) for w in d.witnesses}


def test_classify_needs_pairs():
    with pytest.raises(ValidationError):
        classify_growth([(1, 1.0), (2, 2.0)])


def test_growth_classifier_estimator():
    est = GrowthClassifier().fit(np.arange(1, 10), 2 * np.pi * np.arange(1, 10))
    assert isinstance(est.result_, Linear)
    assert np.allclose(est.predict([2.0]), [4 * np.pi])


def test_degenerate_eigenvectors_orthonormal():
    t = magnetic_torus_spectrum(1, 3, 32, 6, eigenvectors=True)
    V = t.eigenvectors
    gram = V.conj() @ V.T / 32**2
    assert np.allclose(gram, np.eye(6), atol=1e-10)

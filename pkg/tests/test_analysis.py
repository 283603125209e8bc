import math

import numpy as np
import pytest
import scipy.linalg

from heraldtomo.analysis import (FitResult, WignerGrid, even_cat, fit_eq2, kitten_fidelity, kitten_scan,
                                 photon_stats, wigner)
from heraldtomo.fock import basis, fidelity, ket2dm, normalize, rotate
from heraldtomo.homodyne import quad_pdf
from heraldtomo.imperfect import loss_channel
from heraldtomo.network import eq2_amplitudes
from oracles import kitten_closed_form, wigner_point
from conftest import random_dm


# --- Wigner ---------------------------------------------------------------------

def test_wigner_origin_values():
    z = np.array([0.0])
    assert wigner(ket2dm(basis(0, 3)), z, z).values[0, 0] == pytest.approx(1 / math.pi, abs=1e-12)
    assert wigner(ket2dm(basis(1, 3)), z, z).values[0, 0] == pytest.approx(-1 / math.pi, abs=1e-12)
    assert wigner(basis(2, 3), z, z).values[0, 0] == pytest.approx(1 / math.pi, abs=1e-12)


def test_wigner_matches_integral_oracle(rng):
    rho = random_dm(rng, 5)
    xs, ps = np.array([-1.2, 0.0, 0.7]), np.array([-0.4, 0.9])
    W = wigner(rho, xs, ps).values
    for i, p in enumerate(ps):
        for j, x in enumerate(xs):
            assert W[i, j] == pytest.approx(wigner_point(rho, x, p), abs=1e-10)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_wigner_normalization(n):
    assert wigner(ket2dm(basis(n, 3))).integral() == pytest.approx(1, abs=2e-2)


def test_wigner_rotation_covariance(rng):
    rho = random_dm(rng, 5)
    d = 0.6
    pts = rng.uniform(-2, 2, size=(6, 2))
    for x, p in pts:
        # rotating the state by d rotates phase space by -d, so W_rot(v) = W(R(d) v)
        xr, pr = x * math.cos(d) - p * math.sin(d), x * math.sin(d) + p * math.cos(d)
        a = wigner(rotate(rho, d), [x], [p]).values[0, 0]
        b = wigner(rho, [xr], [pr]).values[0, 0]
        assert a == pytest.approx(b, abs=1e-12)


def test_wigner_marginal_is_quadrature_pdf(rng):
    rho = random_dm(rng, 4)
    axis = np.linspace(-7, 7, 561)
    g = wigner(rho, axis, axis)
    sel = np.abs(axis) <= 4
    diff = g.marginal_x()[sel] - quad_pdf(rho, 0.0, axis[sel])
    assert np.max(np.abs(diff)) < 1e-3


def test_wigner_mirror_under_conjugated_a2():
    a0, a1, a2 = 0.5, 0.6, 0.3 + 0.55j
    pa = normalize([a0, a1, a2])
    pb = normalize([a0, a1, np.conj(a2)])
    axis = np.linspace(-4, 4, 81)
    Wa, Wb = wigner(pa, axis, axis).values, wigner(pb, axis, axis).values
    np.testing.assert_allclose(Wa, Wb[::-1, :], atol=1e-12)


def test_wigner_serialization(tmp_path):
    g = wigner(ket2dm(normalize([1, 1j])), np.linspace(-1, 1, 5), np.linspace(-2, 2, 3))
    back = WignerGrid.from_json(g.to_json())
    np.testing.assert_array_equal(back.values, g.values)
    text = g.to_csv()
    lines = text.splitlines()
    assert lines[0] == "x,p,W" and len(lines) == 16
    x, p, w = map(float, lines[7].split(","))
    j = int(np.argmin(np.abs(g.x_axis - x)))
    i = int(np.argmin(np.abs(g.p_axis - p)))
    assert w == g.values[i, j]
    g.to_csv(tmp_path / "w.csv")
    assert (tmp_path / "w.csv").read_text() == text


def test_wigner_default_grid():
    g = wigner(ket2dm(basis(0, 2)))
    assert g.values.shape == (201, 201)
    assert g.x_axis[0] == -5 and g.x_axis[-1] == 5


# --- photon statistics ------------------------------------------------------------

def test_photon_stats_examples():
    p, mean = photon_stats(ket2dm(basis(2, 3)))
    assert p[2] == 1 and mean == 2
    _, mean = photon_stats(loss_channel(ket2dm(basis(1, 3)), 0.55))
    assert mean == pytest.approx(0.55)
    _, psi = eq2_amplitudes(0, 0.1, 0.1)
    p, _ = photon_stats(ket2dm(psi))
    assert p[0] < 1e-6


# --- fits ----------------------------------------------------------------------------

def test_fit_single_photon():
    res = fit_eq2(ket2dm(basis(1, 5)))
    np.testing.assert_allclose(np.abs(res.a), [0, 1, 0], atol=1e-12)
    assert res.fidelity == pytest.approx(1)


def test_fit_noisy_state(rng):
    psi = normalize([0.3, -0.5j, 0.8])
    junk = random_dm(rng, 3)
    rho = 0.8 * ket2dm(psi) + 0.2 * junk
    res = fit_eq2(rho)
    assert res.fidelity >= 0.8
    assert abs(np.vdot(res.a, psi)) ** 2 >= 0.95


def test_fit_free_is_top_eigenvalue(rng):
    for _ in range(5):
        rho = random_dm(rng, 6)
        res = fit_eq2(rho)
        top = scipy.linalg.eigh(rho[:3, :3], eigvals_only=True)[-1]
        assert res.fidelity == pytest.approx(top, abs=1e-12)
        assert np.linalg.norm(res.a) == pytest.approx(1, abs=1e-10)
        assert fidelity(rho, np.pad(res.a, (0, 3))) == pytest.approx(res.fidelity, abs=1e-12)


def test_fit_constraints_never_beat_free(rng):
    rho = random_dm(rng, 4)
    free = fit_eq2(rho).fidelity
    for c in ("a0_zero", "a1_zero", "a2_zero", "phases_equal"):
        res = fit_eq2(rho, c)
        assert res.fidelity <= free + 1e-12
        assert np.linalg.norm(res.a) == pytest.approx(1, abs=1e-10)
        assert res.constraint == c
    assert fit_eq2(rho, "a1_zero").a1 == 0
    with pytest.raises(ValueError):
        fit_eq2(rho, "a3_zero")


def test_phases_equal_penalizes_quadrature_phase():
    psi = normalize([0.5j, 0.5, 0.7])
    free = fit_eq2(ket2dm(psi))
    eq = fit_eq2(ket2dm(psi), "phases_equal")
    assert free.fidelity == pytest.approx(1)
    assert eq.fidelity < free.fidelity - 1e-3


def test_phases_equal_exact_for_rotated_real_state():
    # a_n = r_n exp(i n theta) up to global phase is inside the constraint set
    th = 0.77
    psi = normalize(np.array([0.4, 0.5, 0.6]) * np.exp(1j * th * np.arange(3)) * np.exp(0.3j))
    res = fit_eq2(ket2dm(psi), "phases_equal")
    assert res.fidelity == pytest.approx(1, abs=1e-9)


def test_fit_gauge_and_dict():
    psi = normalize([0.4, 0.5, 0.6]) * np.exp(1j * 0.4 * np.arange(3)) * np.exp(1.1j)
    res = FitResult(psi, 1.0, "free")
    np.testing.assert_allclose(res.in_gauge(0, 1), normalize([0.4, 0.5, 0.6]), atol=1e-12)
    # global phase only: the relative rotation survives
    np.testing.assert_allclose(res.in_gauge(0, None),
                               normalize([0.4, 0.5, 0.6]) * np.exp(1j * 0.4 * np.arange(3)), atol=1e-12)
    d = res.to_dict()
    assert d["constraint"] == "free" and len(d["a"]) == 3


# --- kitten ------------------------------------------------------------------------

def test_kitten_examples():
    cat = even_cat(0.6, 20)
    assert kitten_fidelity(cat, 0.6) == pytest.approx(1, abs=1e-12)
    assert kitten_fidelity(basis(0, 2), 0.6) == pytest.approx(1 / math.cosh(0.36), abs=1e-12)
    assert kitten_fidelity(basis(0, 2), 0.6) == pytest.approx(0.938, abs=1e-3)


def test_kitten_scan_matches_closed_form():
    eps, F = kitten_scan(0.6)
    eps_ref, F_ref = kitten_closed_form(0.6)
    assert eps == pytest.approx(eps_ref, abs=1e-6)
    assert F == pytest.approx(F_ref, abs=1e-12)
    assert F >= 0.95


def test_kitten_density_matrix_and_rotation():
    eps, _ = kitten_closed_form(0.6)
    psi = normalize([1, 0, eps])
    rot = rotate(psi, 0.8)
    assert kitten_fidelity(ket2dm(psi), 0.6) == pytest.approx(kitten_fidelity(psi, 0.6))
    assert kitten_fidelity(rot, 0.6) < kitten_fidelity(psi, 0.6)
    assert kitten_fidelity(rot, 0.6, optimize_rotation=True) == pytest.approx(kitten_fidelity(psi, 0.6), abs=1e-9)
    with pytest.raises(ValueError):
        even_cat(-1, 4)


def test_kitten_truncation_deficit():
    c = even_cat(1.0, 12)
    assert np.linalg.norm(c) == pytest.approx(1)
    assert np.all(np.abs(c[1::2]) < 1e-15)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandtouch.errors import UnsupportedModelError
from bandtouch.models import (
    _TIE_TOL,
    GL,
    GP,
    GRAPHENE_ROTATION,
    GrapheneQuadratic,
    GrapheneTightBinding,
    HermitianMatrix2,
    PolyDiag,
    PWave,
    eigensystem,
    eval_hamiltonian,
    graphene_effective_model,
    graphene_expansion,
    graphene_gauged_hamiltonian,
    graphene_structure_factor,
    hamiltonian_derivative,
    model_eigensystem,
    model_from_dict,
    model_to_dict,
)

ALL_MODELS = [
    GL(1, 0.5),
    GL(2, 0.5),
    GL(3, 1.0),
    GL(6, 0.25),
    GP(1, 0.3),
    GP(4, 0.5),
    GP(9, 1.0),
    PWave(1.5, 0.4 + 0.3j),
    GrapheneQuadratic(1.0, 1.0),
    GrapheneTightBinding(1.0, 1.0),
    GrapheneTightBinding(0.7, 1.3),
    PolyDiag((0.2, 1.0, -0.5, 0.3), 0.7),
]


def test_gl2_zero_matrix_at_origin():
    h = eval_hamiltonian(GL(2, 0.5), 0.0)
    assert (h.h00, h.h11, h.h01) == (0.0, 0.0, 0.0)


def test_gl2_at_one():
    h = eval_hamiltonian(GL(2, 0.5), 1.0)
    np.testing.assert_array_equal(h.to_array(), [[1, 0.5], [0.5, -1]])


def test_gp1_is_landau_zener():
    h = eval_hamiltonian(GP(1, 0.3), 2.0)
    np.testing.assert_array_equal(h.to_array(), [[2, 0.3], [0.3, -2]])


def test_derivative_examples():
    d = hamiltonian_derivative(GL(2, 0.5), 1.0)
    np.testing.assert_array_equal(d.to_array(), [[2, 0.5], [0.5, -2]])
    d = hamiltonian_derivative(GP(4, 0.5), 0.0)
    np.testing.assert_array_equal(d.to_array(), np.zeros((2, 2)))


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: repr(m))
def test_derivative_matches_finite_difference(model):
    step = 1e-5
    for lam in np.linspace(-5, 5, 41):
        exact = hamiltonian_derivative(model, lam).to_array()
        fd = (eval_hamiltonian(model, lam + step).to_array()
              - eval_hamiltonian(model, lam - step).to_array()) / (2 * step)
        scale = max(1.0, np.abs(exact).max())
        assert np.abs(exact - fd).max() <= 1e-8 * scale * max(1.0, abs(lam) ** 8), (lam, exact, fd)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: repr(m))
def test_hermitian_and_traceless(model):
    for lam in np.linspace(-3, 3, 13):
        a = eval_hamiltonian(model, lam).to_array()
        np.testing.assert_array_equal(a, a.conj().T)
        if not isinstance(model, GrapheneTightBinding):
            assert a[0, 0] + a[1, 1] == 0


def test_gl_odd_is_antisymmetric_in_lambda():
    for n in (1, 3, 5, 7):
        m = GL(n, 0.6)
        for lam in np.linspace(0.1, 2, 7):
            np.testing.assert_array_equal(
                eval_hamiltonian(m, -lam).to_array(), -eval_hamiltonian(m, lam).to_array()
            )


def test_eigensystem_diag():
    es = eigensystem(HermitianMatrix2(1.0, -1.0, 0j))
    assert (es.e_ground, es.e_excited) == (-1.0, 1.0)
    np.testing.assert_array_equal(es.v_ground, [0, 1])
    np.testing.assert_array_equal(es.v_excited, [1, 0])


def test_eigensystem_sigma_x_tie_break():
    es = eigensystem(HermitianMatrix2(0.0, 0.0, 1.0 + 0j))
    assert es.e_ground == pytest.approx(-1) and es.e_excited == pytest.approx(1)
    np.testing.assert_allclose(es.v_ground, [math.sqrt(0.5), -math.sqrt(0.5)], atol=1e-15)
    np.testing.assert_allclose(es.v_excited, [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-15)


def test_eigensystem_zero_matrix_is_degenerate():
    assert eigensystem(HermitianMatrix2(0.0, 0.0, 0j)).degenerate
    assert model_eigensystem(GL(3, 1.0), 0.0).degenerate
    assert not model_eigensystem(GP(3, 1.0), 0.0).degenerate


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, finite)
def test_eigensystem_properties(h00, h11, re, im):
    h = HermitianMatrix2(h00, h11, complex(re, im))
    es = eigensystem(h)
    a = h.to_array()
    norm = max(1.0, np.linalg.norm(a, 2))
    assert es.e_ground <= es.e_excited
    if es.degenerate:
        assert es.e_excited - es.e_ground <= 1e-14 * norm
        return
    v = np.column_stack([es.v_ground, es.v_excited])
    assert np.abs(v.conj().T @ v - np.eye(2)).max() <= 1e-12
    assert np.abs(a @ es.v_ground - es.e_ground * es.v_ground).max() <= 1e-12 * norm
    assert np.abs(a @ es.v_excited - es.e_excited * es.v_excited).max() <= 1e-12 * norm
    for vec in (es.v_ground, es.v_excited):
        k = int(np.argmax(np.abs(vec)))
        if abs(abs(vec[0]) - abs(vec[1])) <= _TIE_TOL:
            k = 0
        assert vec[k].imag == 0 and vec[k].real > 0


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_gl_eigenvalues(n):
    m = GL(n, 0.7)
    for lam in np.linspace(-2, 2, 21):
        if lam == 0:
            continue
        es = model_eigensystem(m, lam)
        e = math.sqrt(lam ** (2 * n) + 0.49 * lam * lam)
        assert es.e_excited == pytest.approx(e, rel=1e-13)
        assert es.e_ground == pytest.approx(-e, rel=1e-13)


def test_graphene_quadratic_energies():
    m = GrapheneQuadratic(1.0, 1.0)
    assert m.gamma == 0.75
    es = model_eigensystem(m, 1.0)
    assert es.e_excited == pytest.approx(0.75 * math.sqrt(4.25), abs=1e-12)
    assert es.e_excited == pytest.approx(1.54615, abs=2e-5)
    for lam in np.linspace(-3, 3, 31):
        e = 0.75 * abs(lam) * math.sqrt((lam / 2) ** 2 + 4)
        es = model_eigensystem(m, lam)
        assert abs(es.e_excited - e) <= 1e-12 and abs(es.e_ground + e) <= 1e-12


def test_structure_factor_points():
    m = GrapheneTightBinding(1.0, 1.0)
    kx, ky = m.k_point
    assert kx == pytest.approx(2 * math.pi / 3) and ky == pytest.approx(2 * math.pi / (3 * math.sqrt(3)))
    assert abs(graphene_structure_factor(m, kx, ky)) < 1e-15
    assert graphene_structure_factor(m, 0.0, 0.0) == pytest.approx(-3.0)


@pytest.mark.parametrize("h,a", [(1.0, 1.0), (0.8, 1.4)])
def test_graphene_expansion_is_third_order(h, a):
    m = GrapheneTightBinding(h, a)
    kx, ky = m.k_point
    q = np.logspace(-4, -1, 12)
    res = np.abs(graphene_structure_factor(m, kx + q, ky) - graphene_expansion(m, q))
    slope = np.polyfit(np.log(q), np.log(res), 1)[0]
    assert slope >= 2.9
    assert np.max(res / q**3) < 10 * h * a**3


def test_graphene_rotation_gives_quadratic_model():
    tb = GrapheneTightBinding(1.0, 1.0)
    eff = graphene_effective_model(tb)
    assert isinstance(eff, GrapheneQuadratic) and eff.gamma == 0.75
    u = GRAPHENE_ROTATION
    np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-15)
    for lam in np.linspace(-2, 2, 9):
        h5 = graphene_gauged_hamiltonian(tb, lam).to_array()
        np.testing.assert_allclose(u.conj().T @ h5 @ u, eval_hamiltonian(eff, lam).to_array(), atol=1e-14)
    np.testing.assert_array_equal(eval_hamiltonian(eff, 0.0).to_array(), np.zeros((2, 2)))


def test_graphene_gauged_form_matches_expansion_up_to_phase():
    tb = GrapheneTightBinding(1.0, 1.0)
    for lam in (0.01, 0.1, 0.5):
        ratio = graphene_expansion(tb, lam) / graphene_gauged_hamiltonian(tb, lam).h01
        assert abs(ratio) == pytest.approx(1.0, rel=1e-12)


def test_structure_factor_rejects_other_models():
    with pytest.raises(UnsupportedModelError):
        graphene_structure_factor(GL(2, 1.0), 0.0, 0.0)


@pytest.mark.parametrize("kwargs", [dict(n=0, delta1=1.0), dict(n=2, delta1=0.0), dict(n=2.5, delta1=1.0)])
def test_gl_validation(kwargs):
    with pytest.raises(ValueError):
        GL(**kwargs)


def test_other_validation():
    with pytest.raises(ValueError):
        GP(1, -0.1)
    with pytest.raises(ValueError):
        PolyDiag((), 1.0)
    with pytest.raises(ValueError):
        PWave(0.0, 1.0)
    with pytest.raises(ValueError):
        GrapheneQuadratic(-1.0, 1.0)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: repr(m))
def test_json_round_trip(model):
    back = model_from_dict(model_to_dict(model))
    assert back == model


def test_model_from_dict_errors():
    with pytest.raises(ValueError, match="family"):
        model_from_dict({"n": 2})
    with pytest.raises(ValueError, match="unknown"):
        model_from_dict({"family": "xx"})
    with pytest.raises(ValueError, match="delta2"):
        model_from_dict({"family": "gp", "n": 2})

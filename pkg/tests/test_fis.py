import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandtouch.errors import DegeneratePointError, UnsupportedModelError
from bandtouch.fis import (
    chi_closed_form,
    chi_graphene_fourfold,
    chi_matrix_element,
    chi_matrix_element_array,
    chi_pwave_fourfold,
    chi_zero_limit,
    closed_form_mfp,
    fis_profile,
    transition_element,
)
from bandtouch.models import (
    GL,
    GP,
    GRAPHENE_ROTATION,
    GrapheneQuadratic,
    GrapheneTightBinding,
    PolyDiag,
    PWave,
    eigensystem,
    eval_hamiltonian,
    graphene_effective_model,
    hamiltonian_derivative,
)

GRID = np.linspace(-3, 3, 601)
GRID = GRID[GRID != 0]


def chi_numpy(model, lam):
    """Independent oracle: numpy eigh of the dense matrices."""
    h = eval_hamiltonian(model, lam).to_array()
    dh = hamiltonian_derivative(model, lam).to_array()
    w, v = np.linalg.eigh(h)
    return abs(v[:, 1].conj() @ dh @ v[:, 0] / (w[1] - w[0])) ** 2


def test_gl1_vanishes():
    for d in (0.1, 0.5, 3.0):
        assert chi_matrix_element(GL(1, d), 0.5) == 0.0


def test_gl2_example():
    expected = 0.25 / (4 * 0.34**2)
    assert chi_matrix_element(GL(2, 0.5), 0.3) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.54066, abs=1e-5)


def test_gp4_example():
    assert chi_matrix_element(GP(4, 0.5), 1.0) == pytest.approx(0.64, rel=1e-12)


def test_closed_form_examples():
    assert chi_closed_form(GL(3, 1.0), 1.0) == pytest.approx(0.25, rel=1e-15)
    poly = PolyDiag((0.0, 1.0), 0.5)
    assert chi_closed_form(poly, 0.3) == pytest.approx(chi_matrix_element(GL(2, 0.5), 0.3), rel=1e-12)
    assert chi_closed_form(poly, 0.3) == pytest.approx(chi_matrix_element(poly, 0.3), rel=1e-12)
    assert chi_closed_form(GP(1, 0.5), 0.0) == pytest.approx(1.0, rel=1e-15)


def test_zero_limits():
    assert chi_zero_limit(GL(2, 0.5)) == 1.0
    assert chi_zero_limit(GL(4, 0.5)) == 0.0
    base = chi_zero_limit(PolyDiag((0.3, 0.8), 0.5))
    for tail in [(1.0,), (-2.0, 0.5), (0.0, 3.0, -1.0)]:
        assert chi_zero_limit(PolyDiag((0.3, 0.8) + tail, 0.5)) == base


def test_zero_limit_matches_small_lambda():
    for model in [GL(2, 0.7), PolyDiag((0.3, 0.8, 2.0), 0.5), PWave(2.0, 0.3 + 0.4j), GrapheneQuadratic(1.2, 0.9)]:
        assert chi_matrix_element(model, 1e-7) == pytest.approx(chi_zero_limit(model), rel=1e-5)


def test_degenerate_point_refused():
    with pytest.raises(DegeneratePointError) as info:
        chi_matrix_element(GL(3, 1.0), 0.0)
    assert info.value.lam == 0.0
    assert np.isnan(chi_matrix_element_array(GL(3, 1.0), np.array([0.0, 0.5]))[0])


def test_graphene_tb_has_no_closed_form():
    with pytest.raises(UnsupportedModelError):
        chi_closed_form(GrapheneTightBinding(1.0, 1.0), 0.2)


MODELS = [
    GL(2, 0.5),
    GL(5, 1.0),
    GP(1, 0.25),
    GP(7, 0.5),
    PWave(1.3, 0.6 - 0.2j),
    GrapheneQuadratic(1.0, 1.0),
    PolyDiag((0.1, 0.9, -0.4, 0.2), 0.8),
]


@pytest.mark.parametrize("model", MODELS, ids=repr)
def test_matrix_element_matches_closed_form(model):
    a = chi_matrix_element_array(model, GRID)
    b = chi_closed_form(model, GRID)
    assert np.all(a >= 0)
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=0)


@pytest.mark.parametrize("model", MODELS + [GrapheneTightBinding(1.0, 1.0)], ids=repr)
def test_matrix_element_matches_numpy_oracle(model):
    for lam in np.linspace(-2.5, 2.5, 26):
        if lam == 0 and model.gapless:
            continue
        assert chi_matrix_element(model, lam) == pytest.approx(chi_numpy(model, lam), rel=1e-9, abs=1e-300)


def test_transition_element_squares_to_chi():
    m = PWave(0.8, 0.3 + 0.5j)
    lam = np.linspace(0.1, 2, 12)
    es = [eigensystem(eval_hamiltonian(m, x)) for x in lam]
    gap = np.array([e.gap for e in es])
    np.testing.assert_allclose(np.abs(transition_element(m, lam) / gap) ** 2, chi_matrix_element_array(m, lam),
                               rtol=1e-12)


@pytest.mark.parametrize("model", [GL(4, 0.5), GP(3, 0.7), PWave(1.0, 0.4j), GrapheneQuadratic(1.0, 2.0)], ids=repr)
def test_chi_is_even(model):
    np.testing.assert_allclose(chi_matrix_element_array(model, GRID), chi_matrix_element_array(model, -GRID),
                               rtol=1e-12)


def test_chi_invariant_under_graphene_rotation():
    eff = GrapheneQuadratic(1.0, 1.0)
    tb = GrapheneTightBinding(1.0, 1.0)
    u = GRAPHENE_ROTATION
    for lam in np.linspace(-2, 2, 21):
        if lam == 0:
            continue
        h = eval_hamiltonian(eff, lam).to_array()
        dh = hamiltonian_derivative(eff, lam).to_array()
        w, v = np.linalg.eigh(u @ h @ u.conj().T)
        rot = abs(v[:, 1].conj() @ (u @ dh @ u.conj().T) @ v[:, 0] / (w[1] - w[0])) ** 2
        assert rot == pytest.approx(chi_matrix_element(eff, lam), rel=1e-10)
    # the tight-binding model agrees with its effective model near K
    for lam in (1e-3, 1e-2):
        assert chi_matrix_element(tb, lam) == pytest.approx(chi_matrix_element(graphene_effective_model(tb), lam),
                                                            rel=10 * lam)


def test_fourfold_comparison_forms():
    pw = PWave(1.5, 0.4)
    eff = GrapheneQuadratic(1.0, 1.3)
    for lam in np.linspace(0.1, 3, 10):
        assert chi_pwave_fourfold(pw, lam) == pytest.approx(4 * chi_matrix_element(pw, lam), rel=1e-12)
        assert chi_graphene_fourfold(eff, lam) == pytest.approx(4 * chi_matrix_element(eff, lam), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.floats(0.05, 3.0), st.floats(-3.0, 3.0))
def test_gp_gl_identity_is_exact(n, delta, lam):
    assert chi_closed_form(GP(n - 1, delta), lam) == chi_closed_form(GL(n, delta), lam)


@pytest.mark.parametrize("n,delta", [(3, 1.0), (4, 0.5), (7, 0.3)])
def test_gl_odd_chi_vanishes_at_minimum_gap(n, delta):
    prof = fis_profile(GL(n, delta), -2, 2, 401)
    assert prof.mgp == 0.0
    assert prof.chi_at_zero == 0.0


def test_profile_gl3():
    prof = fis_profile(GL(3, 1.0), -3, 3, 601)
    x = (1 / 3) ** 0.25
    assert x == pytest.approx(0.75984, abs=1e-5)
    np.testing.assert_allclose(prof.mfp, [-x, x], atol=1e-8)
    np.testing.assert_allclose(prof.mfp_closed_form, [-x, x], rtol=1e-15)


def test_profile_gp4():
    prof = fis_profile(GP(4, 0.5), -3, 3, 600)
    x = (0.6 * 0.25) ** 0.125
    assert x == pytest.approx(0.78888, abs=1e-5)
    np.testing.assert_allclose(prof.mfp, [-x, x], atol=1e-8)
    # the gap is flat as lam**8 near 0, so the minimum is only resolvable to ~1e-2
    assert prof.mgp == pytest.approx(0.0, abs=2e-2)


def test_profile_gl2_single_peak_at_zero():
    prof = fis_profile(GL(2, 0.5), -2, 2, 401)
    assert len(prof.mfp) == 1 and prof.mfp[0] == pytest.approx(0.0, abs=1e-8)
    assert prof.mgp == 0.0
    assert prof.chi[200] == 1.0
    assert closed_form_mfp(GL(2, 0.5)) == [0.0]
    assert closed_form_mfp(GL(1, 0.5)) == []
    assert fis_profile(GL(1, 0.5), -1, 1, 11).mfp == []


def test_profile_graphene_tb():
    tb = GrapheneTightBinding(1.0, 1.0)
    prof = fis_profile(tb, -0.5, 0.5, 101)
    assert prof.chi[50] == chi_zero_limit(graphene_effective_model(tb))
    assert prof.mfp_closed_form is None
    assert np.all(np.isfinite(prof.chi))


def test_profile_validation():
    with pytest.raises(ValueError):
        fis_profile(GL(2, 1.0), -1, 1, 2)
    with pytest.raises(ValueError):
        fis_profile(GL(2, 1.0), 1, -1, 11)


def test_profile_outputs():
    prof = fis_profile(GP(2, 0.5), -1, 1, 5)
    lines = prof.to_csv().splitlines()
    assert lines[0] == "lambda,chi"
    assert len(lines) == 6
    assert float(lines[1].split(",")[0]) == -1.0
    import json

    data = json.loads(prof.to_json())
    assert set(data) == {"lambdas", "chi", "mfp", "mgp", "chi_at_zero"}
    assert data["chi_at_zero"] == 0.0
    assert not math.isnan(data["mgp"])

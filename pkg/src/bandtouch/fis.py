"""Fidelity susceptibility chi(lam) and the points where it peaks.

chi(lam) = |<1|dH/dlam|0> / (E1 - E0)|**2.

``chi_matrix_element`` evaluates this for any model from H and dH/dlam only;
``chi_closed_form`` uses per-family formulas.  The two are independent routes
and are cross-checked in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from . import _io
from .errors import DegeneratePointError, UnsupportedModelError
from .models import (
    GL,
    GP,
    GrapheneQuadratic,
    GrapheneTightBinding,
    ModelSpec,
    PolyDiag,
    PWave,
    eigensystem_arrays,
    graphene_effective_model,
)

GOLDEN_XTOL = 1e-10


# ---------------------------------------------------------------------------
# Matrix-element route
# ---------------------------------------------------------------------------


def _bloch(h00, h11, h01):
    # H = mean + dx sx + dy sy + dz sz, with h01 = dx - i dy
    h01 = np.asarray(h01, dtype=complex)
    return np.real(h01), -np.imag(h01), 0.5 * (np.asarray(h00) - np.asarray(h11))


def _chi_from_entries(h, dh):
    dx, dy, dz = _bloch(*h)
    ex, ey, ez = _bloch(*dh)
    # |<1|dH|0>|^2 = |d x dd|^2 / |d|^2 and E1 - E0 = 2 |d|.  Written via the
    # cross product so nearly parallel eigenvectors do not cancel.
    cx = dy * ez - dz * ey
    cy = dz * ex - dx * ez
    cz = dx * ey - dy * ex
    d2 = dx * dx + dy * dy + dz * dz
    return (cx * cx + cy * cy + cz * cz) / (4.0 * d2 * d2)


def chi_matrix_element(model: ModelSpec, lam: float) -> float:
    """chi at a non-degenerate point; raises ``DegeneratePointError`` at a touching point."""
    lam = float(lam)
    h = model.entries(lam)
    _, _, _, _, deg = eigensystem_arrays(*h)
    if deg:
        raise DegeneratePointError(
            f"levels are degenerate at lambda={lam!r}; use chi_closed_form or chi_zero_limit", lam
        )
    return float(_chi_from_entries(h, model.derivative_entries(lam)))


def chi_matrix_element_array(model: ModelSpec, lam) -> np.ndarray:
    """Vectorised ``chi_matrix_element``; NaN at degenerate points."""
    lam = np.asarray(lam, dtype=float)
    h = model.entries(lam)
    _, _, _, _, deg = eigensystem_arrays(*h)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = _chi_from_entries(h, model.derivative_entries(lam))
    return np.where(deg, np.nan, chi)


def transition_element(model: ModelSpec, lam):
    """``<1|dH/dlam|0>`` contracted with the gauge-fixed eigenvectors (array aware)."""
    lam = np.asarray(lam, dtype=float)
    h00, h11, h01 = model.entries(lam)
    d00, d11, d01 = model.derivative_entries(lam)
    _, _, v0, v1, _ = eigensystem_arrays(h00, h11, h01)
    w0 = d00 * v0[..., 0] + d01 * v0[..., 1]
    w1 = np.conj(d01) * v0[..., 0] + d11 * v0[..., 1]
    return np.conj(v1[..., 0]) * w0 + np.conj(v1[..., 1]) * w1


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _chi_power(m: int, delta: float, lam):
    # m^2 D^2 lam^(2(m-1)) / (4 (D^2 + lam^(2m))^2); GP uses m = n, GL uses m = n - 1.
    if m == 0:
        return 0.0 * lam
    d2 = delta * delta
    denom = d2 + lam ** (2 * m)
    return m * m * d2 * lam ** (2 * (m - 1)) / (4.0 * denom * denom)


def _chi_poly(coeffs, delta: float, lam):
    a2 = coeffs[1] if len(coeffs) > 1 else 0.0
    # k(lam) = sum_{n=2}^{N-1} n a_{n+1} lam^(n-2)
    k = 0.0 * lam
    for n in range(len(coeffs) - 1, 1, -1):
        k = k * lam + n * coeffs[n]
    g_over = 0.0 * lam
    for c in reversed(coeffs):
        g_over = g_over * lam + c
    ratio = (a2 + lam * k) / (delta * delta + g_over * g_over)
    return (0.5 * delta * ratio) ** 2


def _poly_equivalent(model: ModelSpec):
    """(coeffs, |delta|) for families that are instances of the polynomial form."""
    if isinstance(model, PolyDiag):
        return model.coeffs, abs(model.delta)
    if isinstance(model, PWave):
        return (0.0, 1.0 / (2.0 * model.m)), abs(model.delta)
    if isinstance(model, GrapheneQuadratic):
        g = model.gamma
        return (0.0, g * model.lattice / 2.0), 2.0 * g
    return None


def chi_closed_form(model: ModelSpec, lam):
    """Family closed form for chi, finite at lam = 0.

    GP: ``n^2 D^2 lam^(2(n-1)) / (4 (D^2 + lam^(2n))^2)``; GL is the GP form
    with ``n -> n - 1``.  PolyDiag, PWave and GrapheneQuadratic go through the
    general polynomial expression.
    """
    if isinstance(model, GP):
        return _chi_power(model.n, model.delta2, lam)
    if isinstance(model, GL):
        return _chi_power(model.n - 1, model.delta1, lam)
    poly = _poly_equivalent(model)
    if poly is None:
        raise UnsupportedModelError(f"no closed form for family {model.family!r}")
    return _chi_poly(poly[0], poly[1], lam)


def chi_zero_limit(model: ModelSpec) -> float:
    if isinstance(model, GL):
        return 1.0 / (4.0 * model.delta1**2) if model.n == 2 else 0.0
    if isinstance(model, GP):
        return 1.0 / (4.0 * model.delta2**2) if model.n == 1 else 0.0
    poly = _poly_equivalent(model)
    if poly is None:
        raise UnsupportedModelError(f"no closed form for family {model.family!r}")
    coeffs, delta = poly
    a1 = coeffs[0]
    a2 = coeffs[1] if len(coeffs) > 1 else 0.0
    return (delta * a2 / (2.0 * (delta * delta + a1 * a1))) ** 2


def chi_pwave_fourfold(model: PWave, lam):
    """``(2 m D / ((2 m D)^2 + lam^2))^2``, exactly 4x the matrix-element chi.

    Comparison only; not used by any computation.
    """
    x = 2.0 * model.m * abs(model.delta)
    return (x / (x * x + lam * lam)) ** 2


def chi_graphene_fourfold(model: GrapheneQuadratic, lam):
    """``(4a / (a^2 lam^2 + 16))^2``, exactly 4x the matrix-element chi (comparison only)."""
    a = model.lattice
    return (4.0 * a / (a * a * lam * lam + 16.0)) ** 2


def closed_form_mfp(model: ModelSpec):
    """Closed-form peak locations of chi, or None when the family has none."""
    if isinstance(model, GL):
        n, d = model.n, model.delta1
        if n == 1:
            return []
        if n == 2:
            return [0.0]
        x = ((n - 2) / n * d * d) ** (1.0 / (2 * (n - 1)))
        return [-x, x]
    if isinstance(model, GP):
        n, d = model.n, model.delta2
        if n == 1:
            return [0.0]
        x = ((n - 1) / (n + 1) * d * d) ** (1.0 / (2 * n))
        return [-x, x]
    return None


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FisProfile:
    lambdas: np.ndarray
    chi: np.ndarray
    mfp: list
    mgp: float
    chi_at_zero: float
    mfp_closed_form: list | None = field(default=None)

    def to_csv(self) -> str:
        return _io.csv_text(["lambda", "chi"], zip(self.lambdas, self.chi))

    def to_json(self) -> str:
        return _io.json_text(
            {
                "lambdas": [float(x) for x in self.lambdas],
                "chi": [float(x) for x in self.chi],
                "mfp": [float(x) for x in self.mfp],
                "mgp": float(self.mgp),
                "chi_at_zero": float(self.chi_at_zero),
            }
        )


def _chi_function(model, chi_zero):
    try:
        chi_closed_form(model, 0.5)
    except UnsupportedModelError:
        def f(x):
            try:
                return chi_matrix_element(model, x)
            except DegeneratePointError:
                return chi_zero
        return f
    return lambda x: float(chi_closed_form(model, x))


def _refine_min(f, a, b, c):
    """Golden-section minimum of ``f`` near grid point ``b``; bounded Brent when not bracketed."""
    fb = f(b)
    if fb < f(a) and fb < f(c):
        res = minimize_scalar(f, bracket=(a, b, c), method="golden", options={"xtol": GOLDEN_XTOL})
    else:
        res = minimize_scalar(f, bounds=(a, c), method="bounded", options={"xatol": GOLDEN_XTOL})
    x = float(res.x)
    return x if f(x) <= fb else float(b)


def _gap(model, lam):
    h00, h11, h01 = model.entries(lam)
    return 2.0 * float(np.hypot(0.5 * (h00 - h11), abs(h01)))


def _chi_at_zero(model):
    try:
        return chi_zero_limit(model)
    except UnsupportedModelError:
        pass
    if isinstance(model, GrapheneTightBinding):
        # chi(0) depends only on the first two orders of the expansion.
        return chi_zero_limit(graphene_effective_model(model))
    raise UnsupportedModelError(f"no chi(0) for family {model.family!r}")


def fis_profile(model: ModelSpec, lambda_min: float, lambda_max: float, samples: int) -> FisProfile:
    """Sample chi on a uniform grid, then refine its peaks and the gap minimum."""
    if samples < 3:
        raise ValueError(f"need at least 3 samples, got {samples}")
    if not lambda_min < lambda_max:
        raise ValueError(f"empty lambda range [{lambda_min}, {lambda_max}]")
    grid = np.linspace(lambda_min, lambda_max, samples)
    chi = chi_matrix_element_array(model, grid)
    bad = np.isnan(chi)
    if np.any(bad):
        chi[bad] = _chi_at_zero(model)

    chi_zero = float(_chi_at_zero(model))
    f = _chi_function(model, chi_zero)
    mfp = []
    peaks, _ = find_peaks(chi)
    for i in peaks:
        mfp.append(_refine_min(lambda x: -f(x), grid[i - 1], grid[i], grid[i + 1]))

    gaps = np.array([_gap(model, x) for x in grid])
    i = int(np.argmin(gaps))
    _, _, _, _, deg = eigensystem_arrays(*model.entries(grid[i]))
    if deg or i == 0 or i == samples - 1:
        mgp = float(grid[i])
    else:
        mgp = _refine_min(lambda x: _gap(model, x), grid[i - 1], grid[i], grid[i + 1])
        if abs(mgp) < GOLDEN_XTOL:
            mgp = 0.0

    return FisProfile(
        lambdas=grid,
        chi=chi,
        mfp=mfp,
        mgp=mgp,
        chi_at_zero=chi_zero,
        mfp_closed_form=closed_form_mfp(model),
    )


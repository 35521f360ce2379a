"""Two-level Hamiltonian families with a touching point at lambda = 0.

Every family is written as a traceless (or, for the tight-binding form,
zero-diagonal) 2x2 Hermitian matrix

    H(lam) = [[h00, h01], [conj(h01), h11]]

whose entries are evaluated analytically, together with their derivative in
``lam``.  Entry functions accept scalars or numpy arrays so the integrators can
tabulate a whole driving path in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import UnsupportedModelError

# Relative gap below which an eigenbasis is considered unusable.
DEGENERACY_RTOL = 1e-14
_TIE_TOL = 8 * np.finfo(float).eps


@dataclass(frozen=True)
class HermitianMatrix2:
    h00: float
    h11: float
    h01: complex

    @property
    def h10(self) -> complex:
        return self.h01.conjugate()

    def to_array(self) -> np.ndarray:
        return np.array([[self.h00, self.h01], [self.h10, self.h11]], dtype=complex)

    @property
    def norm(self) -> float:
        """Spectral norm."""
        mean = 0.5 * (self.h00 + self.h11)
        return abs(mean) + math.hypot(0.5 * (self.h00 - self.h11), abs(self.h01))


@dataclass(frozen=True)
class EigenSystem:
    e_ground: float
    e_excited: float
    v_ground: np.ndarray
    v_excited: np.ndarray
    degenerate: bool

    @property
    def gap(self) -> float:
        return self.e_excited - self.e_ground


# ---------------------------------------------------------------------------
# Model families
# ---------------------------------------------------------------------------


class ModelSpec:
    """Common interface of the Hamiltonian families.

    Subclasses implement ``entries`` and ``derivative_entries`` returning the
    triple ``(h00, h11, h01)`` for scalar or array ``lam``.
    """

    family: ClassVar[str]
    # True when the two levels touch at lam = 0.
    gapless: ClassVar[bool] = True
    # True when H(lam) is real symmetric for every lam.
    real_symmetric: ClassVar[bool] = True

    def entries(self, lam):
        raise NotImplementedError

    def derivative_entries(self, lam):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _neg(x):
    return -x


@dataclass(frozen=True)
class PWave(ModelSpec):
    """p-wave superconductor at the trivial/topological boundary.

    Diagonal ``+-lam**2/(2m)``, off-diagonal ``lam*delta`` (complex allowed).
    """

    m: float
    delta: complex

    family: ClassVar[str] = "pw"
    real_symmetric: ClassVar[bool] = False

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"pw mass must be > 0, got {self.m}")
        if self.delta == 0:
            raise ValueError("pw coupling delta must be nonzero")
        object.__setattr__(self, "delta", complex(self.delta))

    def entries(self, lam):
        d = lam * lam / (2.0 * self.m)
        return d, _neg(d), lam * self.delta

    def derivative_entries(self, lam):
        d = lam / self.m
        return d, _neg(d), self.delta + 0.0 * lam

    def to_dict(self):
        return {
            "family": self.family,
            "m": self.m,
            "delta_re": self.delta.real,
            "delta_im": self.delta.imag,
        }


@dataclass(frozen=True)
class GrapheneQuadratic(ModelSpec):
    """Graphene expanded to second order about K along q_y = 0, gauged real.

    ``H = -gamma [[-a lam^2/2, 2 lam], [2 lam, a lam^2/2]]`` with
    ``gamma = 3 a h / 4``.
    """

    hopping: float
    lattice: float

    family: ClassVar[str] = "graphene_quadratic"

    def __post_init__(self):
        if not (self.hopping > 0 and self.lattice > 0):
            raise ValueError("graphene hopping and lattice must be > 0")

    @property
    def gamma(self) -> float:
        return 0.75 * self.lattice * self.hopping

    def entries(self, lam):
        g, a = self.gamma, self.lattice
        d = g * a * lam * lam / 2.0
        return d, _neg(d), (-2.0 * g) * lam + 0j

    def derivative_entries(self, lam):
        g, a = self.gamma, self.lattice
        d = g * a * lam
        return d, _neg(d), -2.0 * g + 0.0 * lam + 0j

    def to_dict(self):
        return {"family": self.family, "hopping": self.hopping, "lattice": self.lattice}


@dataclass(frozen=True)
class GrapheneTightBinding(ModelSpec):
    """Nearest-neighbour graphene, driven along k = K + (lam, 0)."""

    hopping: float
    lattice: float

    family: ClassVar[str] = "graphene_tb"
    real_symmetric: ClassVar[bool] = False

    def __post_init__(self):
        if not (self.hopping > 0 and self.lattice > 0):
            raise ValueError("graphene hopping and lattice must be > 0")

    @property
    def k_point(self) -> tuple[float, float]:
        pref = 2.0 * math.pi / (3.0 * self.lattice)
        return pref, pref / math.sqrt(3.0)

    def _ky_factor(self) -> float:
        _, ky = self.k_point
        return math.cos(math.sqrt(3.0) / 2.0 * ky * self.lattice)

    def entries(self, lam):
        kx = self.k_point[0] + lam
        s = graphene_structure_factor(self, kx, self.k_point[1])
        zero = 0.0 * np.real(s)
        return zero, zero, s

    def derivative_entries(self, lam):
        a, h = self.lattice, self.hopping
        kx = self.k_point[0] + lam
        cy = self._ky_factor()
        ds = -h * 1j * a * (-np.exp(-1j * kx * a) + cy * np.exp(0.5j * kx * a))
        zero = 0.0 * np.real(ds)
        return zero, zero, ds

    def to_dict(self):
        return {"family": self.family, "hopping": self.hopping, "lattice": self.lattice}


@dataclass(frozen=True)
class PolyDiag(ModelSpec):
    """Diagonal ``+-g(lam)`` with ``g = sum_n a_n lam**n`` (n from 1), off-diagonal ``delta*lam``."""

    coeffs: tuple[float, ...]
    delta: float

    family: ClassVar[str] = "poly"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("poly coefficient list must be non-empty")
        if self.delta == 0:
            raise ValueError("poly coupling delta must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "delta", float(self.delta))

    def g(self, lam):
        # Horner on lam * (a1 + a2 lam + ...)
        acc = 0.0 * lam
        for c in reversed(self.coeffs):
            acc = acc * lam + c
        return acc * lam

    def g_over_lam(self, lam):
        acc = 0.0 * lam
        for c in reversed(self.coeffs):
            acc = acc * lam + c
        return acc

    def g_prime(self, lam):
        acc = 0.0 * lam
        for k in range(len(self.coeffs), 0, -1):
            acc = acc * lam + k * self.coeffs[k - 1]
        return acc

    def entries(self, lam):
        d = self.g(lam)
        return d, _neg(d), self.delta * lam + 0j

    def derivative_entries(self, lam):
        d = self.g_prime(lam)
        return d, _neg(d), self.delta + 0.0 * lam + 0j

    def to_dict(self):
        return {"family": self.family, "coeffs": list(self.coeffs), "delta1": self.delta}


@dataclass(frozen=True)
class GL(ModelSpec):
    """Gapless family: diagonal ``+-lam**n``, off-diagonal ``delta1*lam``."""

    n: int
    delta1: float

    family: ClassVar[str] = "gl"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"gl exponent n must be an integer >= 1, got {self.n}")
        if not self.delta1 > 0:
            raise ValueError(f"gl delta1 must be > 0, got {self.delta1}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta1", float(self.delta1))

    def entries(self, lam):
        d = lam**self.n
        return d, _neg(d), self.delta1 * lam + 0j

    def derivative_entries(self, lam):
        d = self.n * lam ** (self.n - 1)
        return d, _neg(d), self.delta1 + 0.0 * lam + 0j

    def to_dict(self):
        return {"family": self.family, "n": self.n, "delta1": self.delta1}


@dataclass(frozen=True)
class GP(ModelSpec):
    """Gapped family: diagonal ``+-lam**n``, constant off-diagonal ``delta2``.

    ``n = 1`` is the Landau-Zener Hamiltonian.
    """

    n: int
    delta2: float

    family: ClassVar[str] = "gp"
    gapless: ClassVar[bool] = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"gp exponent n must be an integer >= 1, got {self.n}")
        if not self.delta2 > 0:
            raise ValueError(f"gp delta2 must be > 0, got {self.delta2}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta2", float(self.delta2))

    def entries(self, lam):
        d = lam**self.n
        return d, _neg(d), self.delta2 + 0.0 * lam + 0j

    def derivative_entries(self, lam):
        d = self.n * lam ** (self.n - 1)
        return d, _neg(d), 0.0 * lam + 0j

    def to_dict(self):
        return {"family": self.family, "n": self.n, "delta2": self.delta2}


FAMILIES = {
    cls.family: cls for cls in (PWave, GrapheneQuadratic, GrapheneTightBinding, PolyDiag, GL, GP)
}


def model_from_dict(data: dict) -> ModelSpec:
    """Build a model from its JSON object form (see ``ModelSpec.to_dict``)."""
    try:
        family = data["family"]
    except KeyError:
        raise ValueError("model JSON needs a 'family' key") from None
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; expected one of {sorted(FAMILIES)}")
    try:
        if family == "pw":
            return PWave(m=float(data["m"]), delta=complex(data["delta_re"], data.get("delta_im", 0.0)))
        if family in ("graphene_quadratic", "graphene_tb"):
            return FAMILIES[family](hopping=float(data["hopping"]), lattice=float(data["lattice"]))
        if family == "poly":
            return PolyDiag(coeffs=tuple(data["coeffs"]), delta=float(data["delta1"]))
        if family == "gl":
            return GL(n=data["n"], delta1=float(data["delta1"]))
        return GP(n=data["n"], delta2=float(data["delta2"]))
    except KeyError as exc:
        raise ValueError(f"model family {family!r} is missing key {exc.args[0]!r}") from None


def model_to_dict(model: ModelSpec) -> dict:
    return model.to_dict()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _as_matrix(h00, h11, h01) -> HermitianMatrix2:
    return HermitianMatrix2(float(np.real(h00)), float(np.real(h11)), complex(h01))


def eval_hamiltonian(model: ModelSpec, lam: float) -> HermitianMatrix2:
    return _as_matrix(*model.entries(float(lam)))


def hamiltonian_derivative(model: ModelSpec, lam: float) -> HermitianMatrix2:
    """Analytic d/dlam of ``eval_hamiltonian``."""
    return _as_matrix(*model.derivative_entries(float(lam)))


def eigensystem_arrays(h00, h11, h01):
    """Vectorised closed-form diagonalisation.

    Returns ``(e0, e1, v0, v1, degenerate)`` where ``v0``/``v1`` have shape
    ``(..., 2)``.  Gauge: the larger-modulus component of each eigenvector is
    real positive; on a tie the first component is.
    """
    h00 = np.asarray(h00, dtype=float)
    h11 = np.asarray(h11, dtype=float)
    h01 = np.asarray(h01, dtype=complex)
    mean = 0.5 * (h00 + h11)
    half = 0.5 * (h00 - h11)
    r = np.hypot(half, np.abs(h01))
    e0 = mean - r
    e1 = mean + r
    degenerate = 2.0 * r <= DEGENERACY_RTOL * np.maximum(1.0, np.abs(mean) + r)

    # Pick the row of (H - E) that avoids cancellation between half and r.
    pos = half >= 0
    h10 = np.conj(h01)
    v1 = np.stack(
        [np.where(pos, half + r, h01), np.where(pos, h10, r - half)], axis=-1
    ).astype(complex)
    v0 = np.stack(
        [np.where(pos, h01, r - half), np.where(pos, -(half + r), -h10)], axis=-1
    ).astype(complex)

    exact_zero = r == 0
    if np.any(exact_zero):
        v1[exact_zero] = (1.0, 0.0)
        v0[exact_zero] = (0.0, 1.0)
    return e0, e1, _fix_gauge(v0), _fix_gauge(v1), degenerate


def _fix_gauge(v: np.ndarray) -> np.ndarray:
    # underflowing vectors only occur at points already flagged degenerate
    with np.errstate(invalid="ignore", divide="ignore"):
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        mod = np.abs(v)
        second = mod[..., 1] > mod[..., 0] + _TIE_TOL
        ref = np.where(second, v[..., 1], v[..., 0])
        phase = np.conj(ref) / np.abs(ref)
    out = v * phase[..., None]
    # the pivot is |ref| exactly, without the rounding residue of the product
    out[..., 0] = np.where(second, out[..., 0], np.abs(ref))
    out[..., 1] = np.where(second, np.abs(ref), out[..., 1])
    return out


def eigensystem(h: HermitianMatrix2) -> EigenSystem:
    e0, e1, v0, v1, deg = eigensystem_arrays(h.h00, h.h11, h.h01)
    return EigenSystem(float(e0), float(e1), v0, v1, bool(deg))


def model_eigensystem(model: ModelSpec, lam: float) -> EigenSystem:
    return eigensystem(eval_hamiltonian(model, lam))


# ---------------------------------------------------------------------------
# Graphene helpers
# ---------------------------------------------------------------------------


def graphene_structure_factor(model, kx, ky):
    """Tight-binding ``s(k) = -h e^{-i kx a} (1 + 2 e^{i 3 kx a/2} cos(sqrt(3)/2 ky a))``."""
    if not isinstance(model, GrapheneTightBinding):
        raise UnsupportedModelError("structure factor needs a GrapheneTightBinding model")
    a, h = model.lattice, model.hopping
    return -h * np.exp(-1j * kx * a) * (
        1.0 + 2.0 * np.exp(1.5j * kx * a) * np.cos(math.sqrt(3.0) / 2.0 * ky * a)
    )


def graphene_expansion(model: GrapheneTightBinding, q):
    """Second-order expansion of ``s(K + (q, 0))`` in ``q``.

    The phase in front is ``e^{-2i pi/3}``; with that phase the residual
    against the exact structure factor is third order in ``q``.
    """
    a, h = model.lattice, model.hopping
    phase = np.exp(-2j * math.pi / 3.0)
    return phase * h * (1.5j * a * q + 0.375 * a * a * q * q)


def graphene_gauged_hamiltonian(model, lam: float) -> HermitianMatrix2:
    """Expansion with the K-point phase removed: ``gamma [[0, 2i lam + a lam^2/2], [c.c., 0]]``.

    Conjugating with ``GRAPHENE_ROTATION`` gives ``GrapheneQuadratic``.
    """
    gamma = 0.75 * model.lattice * model.hopping
    return HermitianMatrix2(0.0, 0.0, gamma * (2j * lam + model.lattice * lam * lam / 2.0))


GRAPHENE_ROTATION = np.array(
    [
        [np.exp(0.25j * math.pi), np.exp(-0.25j * math.pi)],
        [np.exp(0.25j * math.pi), -np.exp(-0.25j * math.pi)],
    ]
) / math.sqrt(2.0)


def graphene_effective_model(model: GrapheneTightBinding) -> GrapheneQuadratic:
    if not isinstance(model, GrapheneTightBinding):
        raise UnsupportedModelError("graphene_effective_model needs a GrapheneTightBinding model")
    return GrapheneQuadratic(hopping=model.hopping, lattice=model.lattice)

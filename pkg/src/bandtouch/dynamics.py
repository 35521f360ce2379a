"""Driving protocols and time evolution (hbar = 1, lam(t) = c t).

Time is discretised on a lattice anchored at integer multiples of ``dt``; the
first and last steps are shortened so every run starts and ends exactly at its
protocol endpoints.  Because all runs with the same ``dt`` share the lattice, a
drive split at ``t = 0`` uses exactly the steps of the unsplit drive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import _io
from . import _kernels
from .errors import DegeneratePointError, GapCollapseError, VanishingAmplitudeError
from .fis import closed_form_mfp
from .models import _TIE_TOL, GP, HermitianMatrix2, ModelSpec, eigensystem_arrays

PROTOCOL_KINDS = ("pl1", "pl2", "plneg", "plpos", "custom")
DEFAULT_DT = 1e-3
DEFAULT_LAMBDA0 = 0.1
DEFAULT_LAMBDA_INF = 10.0
DEFAULT_EPSILON = 1e-6
# Tolerance (in units of dt) for snapping an endpoint onto the time lattice.
_SNAP = 1e-9
AMPLITUDE_FLOOR = 1e-12
# Largest predicted RK4 norm loss for which the oracle still counts as a reference.
RK4_MAX_DRIFT = 1e-9


@dataclass(frozen=True)
class Protocol:
    """Linear drive ``lam = c t`` between two endpoints.

    ``pl1``: -lambda0 -> lambda0; ``pl2``: -lambda_inf -> lambda_inf;
    ``plneg``: -lambda_inf -> -epsilon; ``plpos``: epsilon -> lambda_inf;
    ``custom``: lambda_start -> lambda_end.
    """

    kind: str
    c: float
    lambda0: float = DEFAULT_LAMBDA0
    lambda_inf: float = DEFAULT_LAMBDA_INF
    epsilon: float = DEFAULT_EPSILON
    dt: float = DEFAULT_DT
    lambda_start: float | None = None
    lambda_end: float | None = None

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}; expected one of {PROTOCOL_KINDS}")
        if not self.c > 0:
            raise ValueError(f"speed c must be > 0, got {self.c}")
        if not self.dt > 0:
            raise ValueError(f"time step dt must be > 0, got {self.dt}")
        if not 0 < self.epsilon < self.lambda0 < self.lambda_inf:
            raise ValueError(
                "need 0 < epsilon < lambda0 < lambda_inf, got "
                f"epsilon={self.epsilon}, lambda0={self.lambda0}, lambda_inf={self.lambda_inf}"
            )
        if self.kind == "custom":
            if self.lambda_start is None or self.lambda_end is None:
                raise ValueError("custom protocol needs lambda_start and lambda_end")
            if not self.lambda_start < self.lambda_end:
                raise ValueError("custom protocol needs lambda_start < lambda_end (c > 0)")

    @property
    def endpoints(self) -> tuple[float, float]:
        if self.kind == "pl1":
            return -self.lambda0, self.lambda0
        if self.kind == "pl2":
            return -self.lambda_inf, self.lambda_inf
        if self.kind == "plneg":
            return -self.lambda_inf, -self.epsilon
        if self.kind == "plpos":
            return self.epsilon, self.lambda_inf
        return float(self.lambda_start), float(self.lambda_end)

    def leg(self, lambda_start: float, lambda_end: float) -> "Protocol":
        return replace(self, kind="custom", lambda_start=lambda_start, lambda_end=lambda_end)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "c": self.c,
            "lambda0": self.lambda0,
            "lambda_inf": self.lambda_inf,
            "epsilon": self.epsilon,
            "dt": self.dt,
        }
        if self.kind == "custom":
            out["lambda_start"] = self.lambda_start
            out["lambda_end"] = self.lambda_end
        return out


def time_grid(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """Nodes ``[t_start, k0 dt, (k0+1) dt, ..., k1 dt, t_end]``."""
    k0 = math.floor(t_start / dt + _SNAP) + 1
    k1 = math.ceil(t_end / dt - _SNAP) - 1
    interior = np.arange(k0, k1 + 1, dtype=float) * dt
    return np.concatenate(([t_start], interior, [t_end]))


class _Path(NamedTuple):
    t_nodes: np.ndarray
    lam_nodes: np.ndarray
    dts: np.ndarray
    lam_mids: np.ndarray


def _path(lam_start: float, lam_end: float, c: float, dt: float) -> _Path:
    t = time_grid(lam_start / c, lam_end / c, dt)
    dts = np.diff(t)
    lam = c * t
    lam[0], lam[-1] = lam_start, lam_end
    mids = c * (t[:-1] + 0.5 * dts)
    return _Path(t, lam, dts, mids)


def _tabulate(model: ModelSpec, lam):
    h00, h11, h01 = model.entries(np.asarray(lam, dtype=float))
    shape = np.shape(lam)
    return (
        np.ascontiguousarray(np.broadcast_to(np.real(h00), shape), dtype=np.float64),
        np.ascontiguousarray(np.broadcast_to(np.real(h11), shape), dtype=np.float64),
        np.ascontiguousarray(np.broadcast_to(h01, shape), dtype=np.complex128),
    )


def _eigvecs(model: ModelSpec, lam: float, gauge=None):
    e0, e1, v0, v1, deg = eigensystem_arrays(*model.entries(float(lam)))
    if deg:
        raise DegeneratePointError(
            f"levels are degenerate at lambda={lam!r}; offset the endpoint by epsilon", lam
        )
    if gauge is not None:
        p0, p1 = gauge(lam)
        v0 = v0 * np.exp(1j * p0)
        v1 = v1 * np.exp(1j * p1)
    return v0, v1


def _sample_indices(n_steps: int, sample_every: int) -> np.ndarray:
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1, got {sample_every}")
    idx = np.arange(0, n_steps + 1, sample_every, dtype=np.int64)
    if idx[-1] != n_steps:
        idx = np.append(idx, np.int64(n_steps))
    return idx


# ---------------------------------------------------------------------------
# Crank-Nicolson
# ---------------------------------------------------------------------------


def cn_step(h_mid: HermitianMatrix2, psi, dt: float) -> np.ndarray:
    """One Cayley step ``(I + i dt H/2)^-1 (I - i dt H/2) psi``."""
    p0, p1 = _kernels.cayley_apply(
        float(h_mid.h00), float(h_mid.h11), complex(h_mid.h01), 0.5 * dt, complex(psi[0]), complex(psi[1])
    )
    return np.array([p0, p1])


def _cn_run(model, path: _Path, psi0, sample_idx):
    h00, h11, h01 = _tabulate(model, path.lam_mids)
    return _kernels.cn_propagate(h00, h11, h01, path.dts, np.asarray(psi0, dtype=np.complex128), sample_idx)


def propagate(model: ModelSpec, lam_start: float, lam_end: float, c: float, dt: float, psi0) -> np.ndarray:
    """Crank-Nicolson evolution of ``psi0`` from ``lam_start`` to ``lam_end``; returns the final state."""
    path = _path(lam_start, lam_end, c, dt)
    n = len(path.dts)
    return _cn_run(model, path, psi0, np.array([n], dtype=np.int64))[0]


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    lam: np.ndarray
    psi: np.ndarray
    p_ground: np.ndarray
    p_excited: np.ndarray
    model: ModelSpec
    protocol: Protocol
    integrator: str = "cn"

    @property
    def final_state(self) -> np.ndarray:
        return self.psi[-1]

    def to_csv(self) -> str:
        rows = (
            (t, lam, p[0].real, p[0].imag, p[1].real, p[1].imag, pg, pe)
            for t, lam, p, pg, pe in zip(self.t, self.lam, self.psi, self.p_ground, self.p_excited)
        )
        header = ["t", "lambda", "re_psi0", "im_psi0", "re_psi1", "im_psi1", "p_ground", "p_excited"]
        return _io.csv_text(header, rows)


def _populations(model, lam, psi):
    _, _, v0, v1, deg = eigensystem_arrays(*model.entries(np.asarray(lam, dtype=float)))
    pg = np.abs(np.sum(np.conj(v0) * psi, axis=-1)) ** 2
    pe = np.abs(np.sum(np.conj(v1) * psi, axis=-1)) ** 2
    return np.where(deg, np.nan, pg), np.where(deg, np.nan, pe)


def _initial_state(model, lam_start, initial):
    v0, v1 = _eigvecs(model, lam_start)
    if initial == "ground":
        return v0
    if initial == "excited":
        return v1
    raise ValueError(f"initial must be 'ground' or 'excited', got {initial!r}")


def evolve(model: ModelSpec, protocol: Protocol, sample_every: int = 100, initial: str = "ground") -> Trajectory:
    """Crank-Nicolson drive starting from an instantaneous eigenstate.

    H is evaluated at the midpoint of every step.  Every ``sample_every``-th
    node is recorded, plus the final node at exactly the protocol end.
    """
    lam_start, lam_end = protocol.endpoints
    psi0 = _initial_state(model, lam_start, initial)
    path = _path(lam_start, lam_end, protocol.c, protocol.dt)
    idx = _sample_indices(len(path.dts), sample_every)
    psi = _cn_run(model, path, psi0, idx)
    lam = path.lam_nodes[idx]
    pg, pe = _populations(model, lam, psi)
    return Trajectory(path.t_nodes[idx], lam, psi, pg, pe, model, protocol, "cn")


def transition_probability(traj: Trajectory, gauge=None) -> float:
    """``|<excited(lam_f)|psi(t_f)>|^2``."""
    _, v1 = _eigvecs(traj.model, traj.lam[-1], gauge)
    return float(abs(np.vdot(v1, traj.final_state)) ** 2)


def drive_probability(model: ModelSpec, protocol: Protocol) -> float:
    """Final transition probability of a CN drive, without keeping samples."""
    traj = evolve(model, protocol, sample_every=1 << 62)
    return transition_probability(traj)


# ---------------------------------------------------------------------------
# RK4 oracle
# ---------------------------------------------------------------------------


def rk4_oracle_evolve(model: ModelSpec, protocol: Protocol, dt_oracle: float | None = None,
                      sample_every: int = 1000) -> Trajectory:
    """Classical RK4 in the fixed diabatic basis, used to cross-check CN.

    RK4 is not unitary: a mode of energy E loses ``1 - |R(i E h)|^2`` of its
    weight per step.  The summed loss is predicted before the run and
    ``ValueError`` is raised when it exceeds ``RK4_MAX_DRIFT``; shrink
    ``dt_oracle`` or ``lambda_inf`` in that case.
    """
    if dt_oracle is None:
        dt_oracle = protocol.dt / 5.0
    if dt_oracle > protocol.dt / 5.0 * (1 + 1e-12):
        raise ValueError(f"dt_oracle={dt_oracle} must be <= dt/5={protocol.dt / 5.0}")
    lam_start, lam_end = protocol.endpoints
    psi0 = _initial_state(model, lam_start, "ground")
    path = _path(lam_start, lam_end, protocol.c, dt_oracle)
    nodes = _tabulate(model, path.lam_nodes)
    mids = _tabulate(model, path.lam_mids)
    drift = rk4_predicted_drift(mids, path.dts)
    if drift > RK4_MAX_DRIFT:
        raise ValueError(
            f"RK4 oracle too coarse: predicted norm loss {drift:.3g} > {RK4_MAX_DRIFT:g}; "
            "reduce lambda_inf or dt_oracle"
        )
    idx = _sample_indices(len(path.dts), sample_every)
    psi = _kernels.rk4_propagate(*nodes, *mids, path.dts, psi0.astype(np.complex128), idx)
    lam = path.lam_nodes[idx]
    pg, pe = _populations(model, lam, psi)
    return Trajectory(path.t_nodes[idx], lam, psi, pg, pe, model, replace(protocol, dt=dt_oracle), "rk4")


def rk4_predicted_drift(entries, dts) -> float:
    """Summed per-step RK4 norm loss of the faster eigenmode, ``1 - |R(iz)|^2``."""
    h00, h11, h01 = entries
    z = (np.abs(0.5 * (h00 + h11)) + np.hypot(0.5 * (h00 - h11), np.abs(h01))) * dts
    z2 = z * z
    re = 1.0 - z2 / 2.0 + z2 * z2 / 24.0
    im = z * (1.0 - z2 / 6.0)
    return float(np.sum(np.abs(1.0 - (re * re + im * im))))


# ---------------------------------------------------------------------------
# Adiabatic-frame integration of the coefficient equations
# ---------------------------------------------------------------------------


class AdiabaticCoefficients(NamedTuple):
    c0: complex
    c1: complex
    berry_max: float


def _continuous_frame(v: np.ndarray) -> np.ndarray:
    """Remove the discrete phase jumps that the gauge rule introduces.

    The rule makes the larger component real positive, so the phase jumps
    where the larger component changes; at those steps the vector is rephased
    to overlap positively with its predecessor.
    """
    mod = np.abs(v)
    which = mod[:, 1] > mod[:, 0] + _TIE_TOL
    switch = np.zeros(len(v), dtype=bool)
    switch[1:] = which[1:] != which[:-1]
    overlap = np.sum(np.conj(v[1:]) * v[:-1], axis=1)
    step = np.ones(len(v), dtype=complex)
    step[1:] = np.where(switch[1:], overlap / np.abs(overlap), 1.0)
    return v * np.cumprod(step)[:, None]


def _cumulative_phase(f_nodes, f_mids, dts):
    """Integral of f from the first node, at nodes and at step midpoints (Simpson)."""
    full = dts / 6.0 * (f_nodes[:-1] + 4.0 * f_mids + f_nodes[1:])
    half = dts / 24.0 * (5.0 * f_nodes[:-1] + 8.0 * f_mids - f_nodes[1:])
    at_nodes = np.concatenate(([0.0], np.cumsum(full)))
    return at_nodes, at_nodes[:-1] + half


def adiabatic_frame_evolve(model: ModelSpec, protocol: Protocol, dt: float | None = None) -> AdiabaticCoefficients:
    """Integrate the instantaneous-basis coefficient equations by RK4.

    dc~_n/dt = -sum_{m != n} exp(i theta_nm) c~_m lamdot <n|dH|m>/(E_m - E_n),
    theta_n = int E_n + int A_n with Berry connection A_n = Im<n|dn/dt>
    taken by centred differences.  Returns the final coefficients in the
    gauge-fixed eigenbasis at the protocol end.
    """
    dt = protocol.dt if dt is None else dt
    c = protocol.c
    lam_start, lam_end = protocol.endpoints
    if model.gapless and lam_start <= 0.0 <= lam_end:
        raise GapCollapseError(
            f"path [{lam_start}, {lam_end}] crosses the touching point lambda=0 of {model.family!r}"
        )
    path = _path(lam_start, lam_end, c, dt)
    n = len(path.dts)
    # interleave nodes and midpoints: tau_0, mid_0, tau_1, ...
    t_all = np.empty(2 * n + 1)
    t_all[0::2] = path.t_nodes
    t_all[1::2] = path.t_nodes[:-1] + 0.5 * path.dts
    lam_all = np.empty(2 * n + 1)
    lam_all[0::2] = path.lam_nodes
    lam_all[1::2] = path.lam_mids

    h = _tabulate(model, lam_all)
    dh = _tabulate_derivative(model, lam_all)
    e0, e1, v0, v1, deg = eigensystem_arrays(*h)
    if np.any(deg):
        bad = lam_all[np.argmax(deg)]
        raise GapCollapseError(f"gap closes at lambda={bad!r} along the path")
    w0 = _continuous_frame(v0)
    w1 = _continuous_frame(v1)

    a0 = np.imag(np.sum(np.conj(w0) * np.gradient(w0, t_all, axis=0), axis=1))
    a1 = np.imag(np.sum(np.conj(w1) * np.gradient(w1, t_all, axis=0), axis=1))
    berry_max = float(max(np.max(np.abs(a0)), np.max(np.abs(a1))))

    f = (e0 + a0) - (e1 + a1)  # d theta_01 / dt
    th_nodes, th_mids = _cumulative_phase(f[0::2], f[1::2], path.dts)
    theta01 = np.empty(2 * n + 1)
    theta01[0::2] = th_nodes
    theta01[1::2] = th_mids

    d00, d11, d01 = dh
    # <w1| dH |w0>
    m10 = np.conj(w1[:, 0]) * (d00 * w0[:, 0] + d01 * w0[:, 1]) + np.conj(w1[:, 1]) * (
        np.conj(d01) * w0[:, 0] + d11 * w0[:, 1]
    )
    m01 = np.conj(m10)
    gap = e1 - e0
    ph = np.exp(1j * theta01)
    f01 = -ph * c * m01 / gap
    f10 = -np.conj(ph) * c * m10 / (-gap)

    ct0, ct1 = _kernels.rk4_coupled_pair(
        np.ascontiguousarray(f01[0::2]),
        np.ascontiguousarray(f10[0::2]),
        np.ascontiguousarray(f01[1::2]),
        np.ascontiguousarray(f10[1::2]),
        path.dts,
        1.0 + 0j,
        0.0 + 0j,
    )
    # undo the phases: c_n = c~_n exp(-i theta_n)
    th0 = _cumulative_phase((e0 + a0)[0::2], (e0 + a0)[1::2], path.dts)[0][-1]
    th1 = _cumulative_phase((e1 + a1)[0::2], (e1 + a1)[1::2], path.dts)[0][-1]
    c0 = ct0 * np.exp(-1j * th0)
    c1 = ct1 * np.exp(-1j * th1)
    # express in the gauge-fixed basis at the end: w = v * s
    s0 = np.vdot(v0[-1], w0[-1])
    s1 = np.vdot(v1[-1], w1[-1])
    return AdiabaticCoefficients(complex(c0 * s0), complex(c1 * s1), berry_max)


def _tabulate_derivative(model, lam):
    d00, d11, d01 = model.derivative_entries(np.asarray(lam, dtype=float))
    shape = np.shape(lam)
    return (
        np.broadcast_to(np.real(d00), shape).astype(float),
        np.broadcast_to(np.real(d11), shape).astype(float),
        np.broadcast_to(d01, shape).astype(complex),
    )


# ---------------------------------------------------------------------------
# Split evolution and interference phase
# ---------------------------------------------------------------------------


def wrap_phase(x):
    """Reduce a phase to [-pi, pi)."""
    return (np.asarray(x) + math.pi) % (2.0 * math.pi) - math.pi


def shifted_mod(x):
    """``x mod 2 pi - pi``: the literal reduction, offset by pi from ``wrap_phase``."""
    return np.asarray(x) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class PhaseDecomposition:
    alpha_plus: complex
    alpha_minus: complex
    beta_pp: complex
    beta_pm: complex
    beta_mp: complex
    beta_mm: complex
    delta_phi: float
    p_reconstructed: float
    p_direct: float
    lambda_mid: float = field(default=0.0)

    def to_json(self) -> str:
        return _io.json_text(
            {
                "alpha_plus": self.alpha_plus,
                "alpha_minus": self.alpha_minus,
                "beta_pp": self.beta_pp,
                "beta_pm": self.beta_pm,
                "beta_mp": self.beta_mp,
                "beta_mm": self.beta_mm,
                "delta_phi": self.delta_phi,
                "p_reconstructed": self.p_reconstructed,
                "p_direct": self.p_direct,
            }
        )


def split_phase_analysis(model: ModelSpec, protocol: Protocol, gauge=None) -> PhaseDecomposition:
    """Split a full drive at the midpoint and recover the two-path interference.

    The first leg runs from ``-lambda_inf`` to the midpoint (0 for gapped
    models, ``-epsilon`` for gapless ones) and is projected on the midpoint
    eigenstates to give ``alpha_+-``.  Each midpoint eigenstate is then driven
    to ``+lambda_inf`` and projected on the final eigenstates, giving
    ``beta``.  ``delta_phi = arg[alpha_+ beta_++ conj(alpha_- beta_-+)]``
    reduced to [-pi, pi).

    ``gauge`` optionally maps lam to extra eigenvector phases (phi0, phi1);
    every returned physical quantity is independent of it.
    """
    if protocol.kind != "pl2":
        raise ValueError(f"split analysis needs a pl2 protocol, got {protocol.kind!r}")
    lam_a, lam_b = protocol.endpoints
    lam_mid = -protocol.epsilon if model.gapless else 0.0
    c, dt = protocol.c, protocol.dt

    g_start, _ = _eigvecs(model, lam_a, gauge)
    g_mid, e_mid = _eigvecs(model, lam_mid, gauge)
    g_end, e_end = _eigvecs(model, lam_b, gauge)

    psi_mid = propagate(model, lam_a, lam_mid, c, dt, g_start)
    alpha_plus = np.vdot(e_mid, psi_mid)
    alpha_minus = np.vdot(g_mid, psi_mid)

    # both midpoint eigenstates share one tabulated path
    path = _path(lam_mid, lam_b, c, dt)
    last = np.array([len(path.dts)], dtype=np.int64)
    out_plus = _cn_run(model, path, e_mid, last)[0]
    out_minus = _cn_run(model, path, g_mid, last)[0]
    beta_pp = np.vdot(e_end, out_plus)
    beta_pm = np.vdot(g_end, out_plus)
    beta_mp = np.vdot(e_end, out_minus)
    beta_mm = np.vdot(g_end, out_minus)

    direct = propagate(model, lam_a, lam_b, c, dt, g_start)
    p_direct = float(abs(np.vdot(e_end, direct)) ** 2)

    first = alpha_plus * beta_pp
    second = alpha_minus * beta_mp
    p_rec = float(abs(first + second) ** 2)
    if abs(first) < AMPLITUDE_FLOOR or abs(second) < AMPLITUDE_FLOOR:
        raise VanishingAmplitudeError(
            f"interference amplitudes |a+b++|={abs(first):.3g}, |a-b-+|={abs(second):.3g}; "
            "phase difference undefined"
        )
    delta_phi = float(wrap_phase(np.angle(first * np.conj(second))))
    return PhaseDecomposition(
        complex(alpha_plus),
        complex(alpha_minus),
        complex(beta_pp),
        complex(beta_pm),
        complex(beta_mp),
        complex(beta_mm),
        delta_phi,
        p_rec,
        p_direct,
        lam_mid,
    )


def delta_phi_estimate(model: GP, c: float, convention: str = "wrap") -> float:
    """Flat-region estimate ``4 lam_MFP delta2 / c`` of the interference phase.

    ``convention="wrap"`` reduces to [-pi, pi) like ``split_phase_analysis``;
    ``"shifted"`` applies ``x mod 2 pi - pi``.
    """
    if not isinstance(model, GP) or model.n < 2:
        raise ValueError("delta_phi_estimate needs a GP model with n >= 2")
    raw = delta_phi_raw_estimate(model, c)
    if convention == "wrap":
        return float(wrap_phase(raw))
    if convention == "shifted":
        return float(shifted_mod(raw))
    raise ValueError(f"unknown convention {convention!r}")


def delta_phi_raw_estimate(model: GP, c: float) -> float:
    lam_plus = closed_form_mfp(model)[1]
    return 4.0 * lam_plus * model.delta2 / c


def lz_probability(delta: float, c: float) -> float:
    if not c > 0:
        raise ValueError(f"speed c must be > 0, got {c}")
    return math.exp(-math.pi * delta * delta / c)

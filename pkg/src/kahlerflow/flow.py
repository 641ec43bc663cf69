"""Normalized Kähler-Ricci flow and the E_1 gradient flow on radial profiles.

Potentials ``phi`` are taken relative to the initial metric ``omega`` of the
run, so the evolving profile has Fubini-Study-relative potential
``u = u_0 + phi``. Path integrals needed by the diagnostics (``J_k`` and the
running integral of ``(1/V) int (R - r)^2``) are carried as extra components of
the Runge-Kutta state, so they are integrated to the order of the scheme.

Time stepping is Bogacki-Shampine 3(2) with a parabolic step cap. A step is
rejected and ``dt`` halved when the cap is exceeded, the error estimate is too
large, or the stage profiles lose positivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    InsufficientTail,
    KahlerFlowError,
    PositivityViolation,
    RootNotBracketed,
    StepRejectionLimit,
)
from .functionals import (
    Energies,
    dEk_dt_rhs,
    lemma35_residual,
    pinching_deviation,
    sigma_profile,
)
from .radial import (
    ClassData,
    CurvatureFields,
    RadialProfile,
    bisectional_range,
    curvature_fields,
    diameter,
    integrate,
    lambda1_radial,
    total_volume,
)

MAX_HALVINGS = 20
FLOW_KINDS = ("krf", "e1_gradient")

# Bogacki-Shampine 3(2)
_BS_A = ((0.5,), (0.0, 0.75))
_BS_B = (2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0)
_BS_E = (2.0 / 9.0 - 7.0 / 24.0, 1.0 / 3.0 - 0.25, 4.0 / 9.0 - 1.0 / 3.0, -0.125)


@dataclass(frozen=True, eq=False)
class FlowState:
    """Snapshot of a trajectory: time, potential, velocity and path integrals.

    ``aux`` holds ``J_0 .. J_{n-1}`` followed by the running integral of
    ``(1/V) int (R - r)^2``.
    """

    t: float
    phi: np.ndarray
    phi_dot: np.ndarray
    profile: RadialProfile
    aux: np.ndarray
    steps: int = 0

    @property
    def class_data(self) -> ClassData:
        return self.profile.class_data

    @cached_property
    def geometry(self) -> CurvatureFields:
        return curvature_fields(self.profile)

    @property
    def J(self) -> list:
        n = self.profile.n
        return [float(x) for x in self.aux[:n]] + [0.0]

    @property
    def cumulative_L2R(self) -> float:
        return float(self.aux[-1])


@dataclass(frozen=True)
class GaugeState:
    """Centrally positioned gauge: ``rho = rho_lambda`` and ``psi = u - rho``."""

    lam: float
    rho: np.ndarray
    psi: np.ndarray
    residual: float
    a_rho: np.ndarray
    b_rho: np.ndarray
    residual_ratio: float = 0.0  # |residual| / (V ||psi||_inf), zero when both vanish


@dataclass
class DiagnosticsRecord:
    t: float
    E0: list
    J: list
    E: list
    dE_rhs: list
    r: float
    L2_R: float
    cumulative_L2R: float
    c_t: float
    grad_phidot: float
    max_phidot_osc: float
    bisec_min: float
    bisec_max: float
    diameter: float
    lambda1: float
    liyau_margin: float
    gauge_lambda: float
    gauge_residual: float
    C0_psi: float
    C2_min: float
    C2_max: float
    calabi_S: float
    pinch: float
    lemma35: float
    steps: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in record_keys()}


def record_keys() -> list:
    return [f.name for f in DiagnosticsRecord.__dataclass_fields__.values()]


def csv_columns(n: int) -> list:
    """Flat column order for the diagnostics CSV of a dimension-``n`` run."""
    cols = []
    for key in record_keys():
        if key in ("E0", "J", "E", "dE_rhs"):
            cols.extend(f"{key}_{k}" for k in range(n + 1))
        else:
            cols.append(key)
    return cols


def csv_row(rec: DiagnosticsRecord) -> list:
    row = []
    for key in record_keys():
        v = getattr(rec, key)
        row.extend(v if isinstance(v, list) else [v])
    return row


# -- right-hand sides -------------------------------------------------------

class FlowSystem:
    """Right-hand side, step cap and path integrands for one run."""

    def __init__(self, base: RadialProfile, kind: str = "krf", C_cfl: float = 0.2,
                 rtol: float = 1e-7, atol: float = 1e-10):
        if kind not in FLOW_KINDS:
            raise ValueError(f"unknown flow kind {kind!r}")
        self.base = base
        self.kind = kind
        self.C_cfl = float(C_cfl)
        self.rtol, self.atol = rtol, atol
        self.energies = Energies(base)
        self.h = self.energies.h
        self.n = base.n
        self.V = base.class_data.V
        self._log_base = np.log(base.volume_ratio)

    def profile(self, phi: np.ndarray) -> RadialProfile:
        return self.base.with_potential(self.base.u + phi)

    def rhs(self, phi: np.ndarray, p: Optional[RadialProfile] = None,
            cf: Optional[CurvatureFields] = None) -> np.ndarray:
        p = self.profile(phi) if p is None else p
        if self.kind == "krf":
            return _krf(p, phi, self._log_base, self.h)
        return _e1_gradient(p, curvature_fields(p) if cf is None else cf)

    def aux_rate(self, p: RadialProfile, phidot: np.ndarray, cf: CurvatureFields) -> np.ndarray:
        n = self.n
        out = np.empty(n + 1)
        for k in range(n):
            out[k] = self.energies.J_rate(p, phidot, k)
        r = integrate(cf.R, p) / self.V
        out[n] = integrate((cf.R - r) ** 2, p) / self.V
        return out

    def evaluate(self, phi: np.ndarray):
        """Profile, curvature, velocity and path-integral rates at ``phi``."""
        p = self.profile(phi)
        cf = curvature_fields(p)
        phidot = self.rhs(phi, p, cf)
        if not np.all(np.isfinite(phidot)):
            raise PositivityViolation("non-finite flow velocity")
        return p, cf, phidot, self.aux_rate(p, phidot, cf)

    def dt_cap(self, p: RadialProfile) -> float:
        """Parabolic stability cap from the largest diffusion coefficient in ``y``."""
        h = 1.0 / p.N
        coef = float(np.max(p.psi0 / (p.c**2 * p.b)))
        cap = self.C_cfl * h**2 / coef
        if self.kind == "e1_gradient":
            cap = self.C_cfl * (h**2 / coef) ** 3 / 100.0
        return cap

    def initial_state(self) -> FlowState:
        phi = np.zeros_like(self.base.u)
        p, cf, phidot, _ = self.evaluate(phi)
        state = FlowState(t=0.0, phi=phi, phi_dot=phidot, profile=p, aux=np.zeros(self.n + 1))
        state.__dict__["geometry"] = cf
        return state

    def _attempt(self, s: FlowState, dt: float):
        k1 = (s.phi_dot, self.aux_rate(s.profile, s.phi_dot, s.geometry))
        stages = [k1]
        for row in _BS_A:
            phi = s.phi + dt * sum(c * k[0] for c, k in zip(row, stages))
            _, _, pd, ar = self.evaluate(phi)
            stages.append((pd, ar))
        phi1 = s.phi + dt * sum(c * k[0] for c, k in zip(_BS_B, stages))
        aux1 = s.aux + dt * sum(c * k[1] for c, k in zip(_BS_B, stages))
        p1, cf1, pd1, ar1 = self.evaluate(phi1)
        stages.append((pd1, ar1))
        err = dt * sum(c * k[0] for c, k in zip(_BS_E, stages))
        scale = self.atol + self.rtol * np.maximum(np.abs(phi1), np.abs(s.phi))
        err_norm = float(np.max(np.abs(err) / scale))
        new = FlowState(t=s.t + dt, phi=phi1, phi_dot=pd1, profile=p1, aux=aux1, steps=s.steps + 1)
        new.__dict__["geometry"] = cf1
        return new, err_norm

    def step(self, s: FlowState, dt: float) -> tuple:
        """Advance by at most ``dt``; returns ``(state, dt_used, dt_next)``.

        Rejections (cap, error estimate, positivity) halve ``dt``; after
        ``MAX_HALVINGS`` consecutive rejections StepRejectionLimit is raised.
        """
        cap = self.dt_cap(s.profile)
        for _ in range(MAX_HALVINGS + 1):
            if dt <= cap:
                try:
                    new, err = self._attempt(s, dt)
                except PositivityViolation:
                    err = math.inf
                if err <= 1.0:
                    grow = 2.0 if err == 0 else min(2.0, 0.9 * err ** (-1.0 / 3.0))
                    return new, dt, min(dt * max(grow, 1.0), self.dt_cap(new.profile))
            dt *= 0.5
        raise StepRejectionLimit(f"step rejected {MAX_HALVINGS} times at t = {s.t:.6g}")


def _krf(p: RadialProfile, phi: np.ndarray, log_base: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.log(p.volume_ratio) - log_base + phi - h


def krf_rhs(s: FlowState, h: np.ndarray, base: RadialProfile) -> np.ndarray:
    """``log(omega_phi^n / omega^n) + phi - h`` for the run's base metric ``omega``."""
    vr = s.profile.volume_ratio
    if np.any(vr <= 0):
        raise PositivityViolation("volume ratio is not positive")
    return _krf(s.profile, s.phi, np.log(base.volume_ratio), h)


def _e1_gradient(p: RadialProfile, cf: CurvatureFields) -> np.ndarray:
    g = -2.0 * p.laplacian(cf.R)
    if p.n >= 2:
        g = g + 2.0 * sigma_profile(cf, p)[2]
    return g - integrate(g, p) / total_volume(p)


def e1_gradient_rhs(s: FlowState) -> np.ndarray:
    """Descent direction of ``E_1``: ``-2 Delta R + 2 sigma_2 - c_1`` with zero ``omega_phi``-mean."""
    return _e1_gradient(s.profile, s.geometry)


def step(s: FlowState, dt: float, system: FlowSystem) -> FlowState:
    return system.step(s, dt)[0]


# -- gauge -------------------------------------------------------------------

def rho_potential(lam: float, y: np.ndarray, c: float) -> np.ndarray:
    """Relative potential of the Fubini-Study metric pulled back by ``s -> s + lam``."""
    return c * np.log1p(np.expm1(lam) * y)


def _rho_eigen(lam: float, y: np.ndarray) -> tuple:
    E = math.exp(lam)
    den = 1.0 + (E - 1.0) * y
    return E / den, E / den**2


def _gauge_residual(lam: float, u: np.ndarray, p: RadialProfile) -> tuple:
    y, c, n = p.grid, p.c, p.n
    a_r, b_r = _rho_eigen(lam, y)
    w = p.measure / p.volume_ratio * a_r ** (n - 1) * b_r
    theta = c * y * a_r
    theta = theta - np.dot(w, theta) / w.sum()
    psi = u - rho_potential(lam, y, c)
    return float(np.dot(w, psi * theta)), psi, a_r, b_r


def gauge_fit(s, bracket: float = 4.0, wide: float = 12.0) -> GaugeState:
    """Solve the centrally positioned condition for the radial scaling parameter.

    ``s`` is a FlowState or a RadialProfile; its Fubini-Study-relative potential
    is matched against ``rho_lambda``.
    """
    p = s.profile if isinstance(s, FlowState) else s
    u = p.u

    def F(lam):
        return _gauge_residual(lam, u, p)[0]

    lam = None
    for lo, hi in ((-bracket, bracket), (-wide, wide)):
        flo, fhi = F(lo), F(hi)
        if flo == 0.0:
            lam = lo
        elif fhi == 0.0:
            lam = hi
        elif np.sign(flo) != np.sign(fhi):
            lam = brentq(F, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
        if lam is not None:
            break
    if lam is None:
        raise RootNotBracketed("no sign change of the gauge condition in [-12, 12]")
    res, psi, a_r, b_r = _gauge_residual(lam, u, p)
    sup = float(np.abs(psi).max())
    ratio = 0.0 if res == 0.0 else abs(res) / (p.class_data.V * max(sup, 1e-300))
    g = GaugeState(lam=float(lam), rho=rho_potential(lam, p.grid, p.c), psi=psi,
                   residual=res, a_rho=a_r, b_rho=b_r, residual_ratio=ratio)
    return g


# -- diagnostics -------------------------------------------------------------

def calabi_S(p: RadialProfile, g: GaugeState) -> np.ndarray:
    """``|nabla_rho omega_phi|^2`` in the radial reduction."""
    la = np.log(p.a / g.a_rho)
    lb = np.log(p.b / g.b_rho)
    S = p.psi0 * p.diff(lb, 1) ** 2 / p.b
    if p.n > 1:
        S = S + 2.0 * (p.n - 1) * p.psi0 * p.diff(la, 1) ** 2 / p.b
    return S


def monitors(s: FlowState, g: Optional[GaugeState] = None,
             energies: Optional[Energies] = None, bisec_resolution: int = 21) -> DiagnosticsRecord:
    p, cf = s.profile, s.geometry
    n, V = p.n, p.class_data.V
    g = gauge_fit(s) if g is None else g
    report = energies.report(p, s.J, s.t, cf) if energies is not None else None
    r = integrate(cf.R, p) / V
    bmin, bmax = bisectional_range(cf, bisec_resolution)
    D = diameter(p)
    lam1 = lambda1_radial(p)
    psi_c = g.psi - integrate(g.psi, p) / V
    C2 = (n - 1) * p.a / g.a_rho + p.b / g.b_rho
    osc = s.phi_dot - integrate(s.phi_dot, p) / V
    return DiagnosticsRecord(
        t=float(s.t),
        E0=report.E0 if report else [],
        J=report.J if report else [],
        E=report.E if report else [],
        dE_rhs=[dEk_dt_rhs(p, s.phi_dot, k, cf) for k in range(n + 1)],
        r=float(r),
        L2_R=integrate((cf.R - r) ** 2, p) / V,
        cumulative_L2R=s.cumulative_L2R,
        c_t=integrate(s.phi_dot, p),
        grad_phidot=integrate(p.gradient_sq(s.phi_dot), p),
        max_phidot_osc=float(np.abs(osc).max()),
        bisec_min=float(bmin),
        bisec_max=float(bmax),
        diameter=float(D),
        lambda1=float(lam1),
        liyau_margin=float(lam1 - math.pi**2 / (4.0 * D**2)),
        gauge_lambda=g.lam,
        gauge_residual=g.residual_ratio,
        C0_psi=float(np.abs(psi_c).max()),
        C2_min=float(C2.min()),
        C2_max=float(C2.max()),
        calabi_S=float(calabi_S(p, g).max()),
        pinch=pinching_deviation(cf, p).deviation,
        lemma35=lemma35_residual(p, cf),
        steps=s.steps,
    )


# -- runs ------------------------------------------------------------------------

@dataclass
class RunResult:
    states: list
    records: list
    termination: str
    error: Optional[BaseException] = None


def initial_profile(config) -> RadialProfile:
    from .radial import make_fubini_study, make_perturbed

    cd = ClassData(config.n, config.ell)
    if config.initial == "fubini_study":
        return make_fubini_study(cd, config.N)
    return make_perturbed(cd, config.N, config.amplitude, config.resolved_modes())


def run(config, on_sample: Optional[Callable] = None, keep_states: bool = True) -> RunResult:
    """Integrate from the configured start, sampling every ``sample_dt``.

    Stops at ``t_final`` or once ``int |grad phidot|^2 < stop_tol``.
    ``on_sample(index, record, state)`` is called for every sample.
    Hard errors end the run with termination ``"error"``; samples taken so far
    are returned.
    """
    states, records = [], []
    try:
        base = initial_profile(config)
        system = FlowSystem(base, config.flow_kind, config.C_cfl)
        s = system.initial_state()
    except KahlerFlowError as exc:
        return RunResult(states, records, "error", exc)
    energies = system.energies
    n_samples = int(round(config.t_final / config.sample_dt))
    dt = system.dt_cap(s.profile)
    termination = "t_final"
    try:
        for i in range(n_samples + 1):
            rec = monitors(s, energies=energies)
            records.append(rec)
            if keep_states:
                states.append(s)
            if on_sample is not None:
                on_sample(i, rec, s)
            if rec.grad_phidot < config.stop_tol:
                termination = "converged"
                break
            if i == n_samples:
                break
            t_next = (i + 1) * config.sample_dt
            while s.t < t_next - 1e-12 * max(1.0, t_next):
                s, used, dt = system.step(s, min(dt, t_next - s.t))
    except KahlerFlowError as exc:
        return RunResult(states, records, "error", exc)
    return RunResult(states, records, termination)


def exp_fit(t: Sequence[float], values: Sequence[float], min_samples: int = 10) -> float:
    """Decay rate ``alpha`` from a least-squares fit of ``log(value)`` on the final third."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) == 0:
        raise InsufficientTail("empty series")
    tail = t >= t[-1] - (t[-1] - t[0]) / 3.0
    if tail.sum() < min_samples:
        raise InsufficientTail(f"{int(tail.sum())} samples in the tail, need {min_samples}")
    if np.any(v[tail] <= 0):
        raise ValueError("tail values must be positive")
    slope = np.polyfit(t[tail], np.log(v[tail]), 1)[0]
    return float(-slope)

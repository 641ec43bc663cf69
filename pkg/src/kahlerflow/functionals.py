"""Energy functionals, holomorphic invariants and curvature identities on radial profiles.

Wedge products of radial (1,1)-forms reduce to products of their eigenvalues.
If ``X_1 .. X_m`` are radial forms with transverse/radial eigenvalues
``(t_j, r_j)`` relative to a reference form ``omega`` and ``e_1 + .. + e_m = n``,
then

    X_1^{e_1} ^ .. ^ X_m^{e_m} / omega^n
        = (1/n) sum_j e_j r_j prod_i t_i^{e_i - [i == j]}

(the radial slot is taken by exactly one factor). :func:`mixed_wedge`
implements this; the test-suite checks it against a determinant expansion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import IndexOutOfRange, PathTooCoarse
from .radial import CurvatureFields, RadialProfile, curvature_fields, integrate

EPS_FLOOR = 1e-14


def mixed_wedge(forms: Sequence[tuple], exps: Sequence[int], n: int) -> np.ndarray:
    """``prod X_j^{e_j} / omega^n`` for radial forms given by ``(t, r)`` eigenvalue pairs."""
    if sum(exps) != n:
        raise ValueError("exponents must sum to n")
    total = 0.0
    for j, (tj, rj) in enumerate(forms):
        if exps[j] == 0:
            continue
        term = exps[j] * np.asarray(rj, dtype=float)
        for i, (ti, _) in enumerate(forms):
            e = exps[i] - (1 if i == j else 0)
            if e:
                term = term * np.asarray(ti, dtype=float) ** e
        total = total + term
    return total / n


def ricci_pair(cf: CurvatureFields) -> tuple:
    """Ricci eigenvalues as a ``(transverse, radial)`` pair."""
    t = cf.ric_transverse if cf.n > 1 else np.zeros_like(cf.R)
    return t, cf.ric_radial


def _require_canonical(p: RadialProfile) -> None:
    if not p.class_data.is_canonical:
        raise ValueError("functionals are defined in the canonical class only")


def _check_k(k: int, n: int) -> None:
    if not 0 <= k <= n:
        raise IndexOutOfRange(f"k = {k} outside 0..{n}")


# -- Ricci potential ------------------------------------------------------

def h_potential(p: RadialProfile) -> tuple:
    """Ricci potential ``h`` with ``Ric - omega = i ddbar h`` and ``int (e^h - 1) omega^n = 0``.

    Returns ``(h, c)`` where ``c`` is the normalising constant added to
    ``-log(omega^n/omega_FS^n) - u``.
    """
    _require_canonical(p)
    h0 = -np.log(p.volume_ratio) - p.u
    # integrate against omega_FS^n directly: e^{h0} omega^n = e^{-u} omega_FS^n
    fs_measure = p.measure / p.volume_ratio
    c = math.log(p.class_data.V / float(np.dot(fs_measure, np.exp(-p.u))))
    return h0 + c, c


# -- reports ----------------------------------------------------------------

@dataclass
class FunctionalReport:
    t: float
    k_values: list
    E0: list
    J: list
    E: list
    c_k: list

    def to_dict(self) -> dict:
        return {"t": self.t, "k": self.k_values, "E0": self.E0, "J": self.J, "E": self.E, "c_k": self.c_k}


@dataclass
class InvariantReport:
    Im_k: list
    theta_norm: float
    metric_id: str = ""

    def to_dict(self) -> dict:
        return {"Im_k": self.Im_k, "theta_norm": self.theta_norm, "metric_id": self.metric_id}


@dataclass
class PinchingReport:
    epsilon: float
    deviation: float
    components: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "deviation": self.deviation}


# -- energies ------------------------------------------------------------

class Energies:
    """``E_k^0``, ``J_k`` and ``E_k`` relative to a fixed base metric ``omega``.

    Potentials ``phi`` are grid functions relative to the base profile, so the
    evolving metric is ``base.with_potential(base.u + phi)``.
    """

    def __init__(self, base: RadialProfile):
        _require_canonical(base)
        self.base = base
        self.n = base.n
        self.V = base.class_data.V
        self.h, self.h_const = h_potential(base)
        self.base_cf = curvature_fields(base)
        self._log_base = np.log(base.volume_ratio)
        ric = ricci_pair(self.base_cf)
        one = (np.ones_like(base.grid), np.ones_like(base.grid))
        self.c_k = [
            integrate(self.h * sum(mixed_wedge([ric, one], [i, self.n - i], self.n)
                                   for i in range(k + 1)), base) / self.V
            for k in range(self.n + 1)
        ]

    def profile(self, phi: np.ndarray) -> RadialProfile:
        return self.base.with_potential(self.base.u + phi)

    def base_pair(self, p: RadialProfile) -> tuple:
        """Eigenvalues of the base form relative to ``omega_p``."""
        return self.base.a / p.a, self.base.b / p.b

    def log_ratio_minus_h(self, p: RadialProfile) -> np.ndarray:
        return np.log(p.volume_ratio) - self._log_base - self.h

    def E0(self, p: RadialProfile, k: int, cf: Optional[CurvatureFields] = None) -> float:
        _check_k(k, self.n)
        cf = curvature_fields(p) if cf is None else cf
        n = self.n
        ric, om = ricci_pair(cf), self.base_pair(p)
        one = (np.ones_like(p.grid), np.ones_like(p.grid))
        wedge = sum(mixed_wedge([ric, om, one], [i, k - i, n - k], n) for i in range(k + 1))
        return integrate(self.log_ratio_minus_h(p) * wedge, p) / self.V + self.c_k[k]

    def J_rate(self, p: RadialProfile, phidot: np.ndarray, k: int) -> float:
        """Integrand of ``J_k`` in the path parameter at one point of the path."""
        _check_k(k, self.n)
        if k == self.n:
            return 0.0
        n = self.n
        one = (np.ones_like(p.grid), np.ones_like(p.grid))
        form = 1.0 - mixed_wedge([self.base_pair(p), one], [k + 1, n - k - 1], n)
        return -(n - k) * integrate(phidot * form, p) / self.V

    def J_path(self, path: Sequence, k: int, tol: float = 1e-6) -> float:
        return J_k_path(self, path, k, tol)

    def report(self, p: RadialProfile, J: Sequence[float], t: float = 0.0,
               cf: Optional[CurvatureFields] = None) -> FunctionalReport:
        cf = curvature_fields(p) if cf is None else cf
        ks = list(range(self.n + 1))
        E0 = [self.E0(p, k, cf) for k in ks]
        J = [float(j) for j in J]
        return FunctionalReport(t=t, k_values=ks, E0=E0, J=J,
                                E=[e - j for e, j in zip(E0, J)], c_k=list(self.c_k))


def E0_k(base: RadialProfile, phi: np.ndarray, k: int) -> float:
    en = Energies(base)
    return en.E0(en.profile(phi), k)


def _trapezoid(t: np.ndarray, f: np.ndarray) -> float:
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))


def J_k_path(energies: Energies, path: Sequence, k: int, tol: float = 1e-6) -> float:
    """``J_k`` along a sampled path ``[(t, phi, phidot), ...]`` starting at ``phi = 0``.

    Trapezoid rule with Richardson extrapolation over the samples. The error
    estimate compares extrapolants at two spacings when there are ``4m+1``
    samples, else the trapezoid correction itself; PathTooCoarse when it
    exceeds ``tol`` relative to the value.
    """
    _check_k(k, energies.n)
    if k == energies.n:
        return 0.0
    t = np.array([s[0] for s in path], dtype=float)
    if len(t) < 3:
        raise PathTooCoarse("need at least three samples")
    if np.abs(path[0][1]).max() > 1e-12:
        raise ValueError("path must start at phi = 0")
    f = np.array([energies.J_rate(energies.profile(phi), phidot, k) for _, phi, phidot in path])
    T1 = _trapezoid(t, f)
    if len(t) % 2 == 0:
        return T1
    T2 = _trapezoid(t[::2], f[::2])
    R1 = T1 + (T1 - T2) / 3.0
    if (len(t) - 1) % 4 == 0 and len(t) >= 9:
        T4 = _trapezoid(t[::4], f[::4])
        err = abs(R1 - (T2 + (T2 - T4) / 3.0))
    else:
        err = abs(T1 - T2) / 3.0
    if err > tol * abs(R1) + 1e-14:
        raise PathTooCoarse(f"J_{k} quadrature error estimate {err:.2e}")
    return R1


def E_k(base: RadialProfile, path: Sequence, k: int) -> float:
    en = Energies(base)
    phi = path[-1][1]
    return en.E0(en.profile(phi), k) - J_k_path(en, path, k)


def dEk_dt_rhs(p: RadialProfile, phidot: np.ndarray, k: int, cf: Optional[CurvatureFields] = None) -> float:
    """Right side of the ``dE_k/dt`` formula along any path through ``p`` with velocity ``phidot``."""
    n = p.n
    _check_k(k, n)
    V = p.class_data.V
    cf = curvature_fields(p) if cf is None else cf
    ric = ricci_pair(cf)
    one = (np.ones_like(p.grid), np.ones_like(p.grid))
    first = (k + 1) * integrate(p.laplacian(phidot) * mixed_wedge([ric, one], [k, n - k], n), p) / V
    if k == n:
        return first
    form = mixed_wedge([ric, one], [k + 1, n - k - 1], n) - 1.0
    return first - (n - k) * integrate(phidot * form, p) / V


# -- invariants ------------------------------------------------------------

def euler_potential(p: RadialProfile) -> np.ndarray:
    """Zero-mean potential of the radial Euler field: ``L_X omega = i ddbar theta``.

    ``X`` generates ``s -> s + lambda``; its potential is the moment coordinate.
    """
    tau = p.tau
    return tau - integrate(tau, p) / p.class_data.V


def futaki_like_invariant(p: RadialProfile, k: int, shift: float = 0.0,
                          cf: Optional[CurvatureFields] = None, metric_id: str = "") -> InvariantReport:
    """The invariant for the Euler field and index ``k``; ``shift`` is added to ``theta``."""
    n = p.n
    _check_k(k, n)
    cf = curvature_fields(p) if cf is None else cf
    theta = euler_potential(p) + shift
    lap = p.laplacian(theta)
    ric = ricci_pair(cf)
    one = (np.ones_like(p.grid), np.ones_like(p.grid))
    val = (k + 1) * integrate(lap * mixed_wedge([ric, one], [k, n - k], n), p)
    if k < n:
        val += (n - k) * integrate(theta, p)
        val -= (n - k) * integrate(theta * mixed_wedge([ric, one], [k + 1, n - k - 1], n), p)
    return InvariantReport(Im_k=[float(val)], theta_norm=float(shift), metric_id=metric_id)


# -- sigma_k, identities, pinching -----------------------------------------

def sigma_profile(cf: CurvatureFields, p: RadialProfile) -> list:
    """Elementary symmetric functions of the Ricci eigenvalues at each node."""
    n = p.n
    eig = [cf.ric_radial] + [cf.ric_transverse] * (n - 1)
    # coefficients of prod (1 + t lambda_i)
    sig = [np.ones_like(cf.R)] + [np.zeros_like(cf.R) for _ in range(n)]
    for lam in eig:
        for j in range(n, 0, -1):
            sig[j] = sig[j] + lam * sig[j - 1]
    sig[1] = cf.R.copy()
    return sig


def lemma35_residual(p: RadialProfile, cf: Optional[CurvatureFields] = None) -> float:
    """Relative mismatch between ``int |Ric - omega|^2`` and ``int (R - n)^2``."""
    cf = curvature_fields(p) if cf is None else cf
    n = p.n
    dev2 = (cf.ric_radial - 1.0) ** 2
    if n > 1:
        dev2 = dev2 + (n - 1) * (cf.ric_transverse - 1.0) ** 2
    lhs = integrate(dev2, p)
    rhs = integrate((cf.R - n) ** 2, p)
    return abs(lhs - rhs) / max(rhs, EPS_FLOOR)


def pinching_deviation(cf: CurvatureFields, p: RadialProfile, epsilon: Optional[float] = None) -> PinchingReport:
    """Max over nodes and components of ``|R - epsilon T|`` in the unit radial frame."""
    n = p.n
    eps = 1.0 / (n + 1) if epsilon is None else float(epsilon)
    if not 0.0 < eps <= 1.0 / (n + 1) + 1e-15:
        raise ValueError(f"epsilon must lie in (0, 1/(n+1)], got {eps}")
    comps = {"rr": np.abs(cf.B_rr - 2.0 * eps)}
    if n > 1:
        comps["rt"] = np.abs(cf.B_rt - eps)
        comps["tt"] = np.abs(cf.B_tt - 2.0 * eps)
    if n > 2:
        comps["tu"] = np.abs(cf.B_tu - eps)
    maxes = {k: float(v.max()) for k, v in comps.items()}
    return PinchingReport(epsilon=eps, deviation=max(maxes.values()), components=maxes)

"""U(n)-invariant Kähler metrics on CP^n as one-dimensional profiles.

A U(n)-invariant metric in the class ``c * [omega_FS]`` is described on the
affine chart by a global potential ``F(s)``, ``s = log|z|^2``. The moment
coordinate ``tau = F'(s)`` runs over ``[0, c]`` and ``psi(tau) = F''(s)`` is the
momentum profile. At a point ``z = (z_1, 0, ..., 0)`` the metric is diagonal with
eigenvalue ``tau/|z|^2`` on the ``n-1`` transverse directions and ``psi/|z|^2``
on the radial one.

Profiles are stored as a relative potential ``u`` over the Fubini-Study
background ``F_0(s) = c log(1 + e^s)``, sampled on a uniform grid of the
background moment coordinate ``tau_0 = c*y``, ``y in [0, 1]``. The fields ``a``
and ``b`` are the transverse and radial eigenvalues of ``omega_u`` relative to
``omega_FS``; both are finite and positive on the closed interval, which is the
whole point of the coordinate choice.

Conventions used throughout the package:

* ``omega^n`` is integrated as ``det(g) dLeb(C^n)``; with this choice the
  measure reads ``pi^n/(n-1)! * tau^(n-1) dtau`` in the moment coordinate.
* The Laplacian is ``g^{i jbar} d_i d_jbar`` and the Riemannian metric is
  ``2 Re g_{i jbar} dz^i dzbar^j``, so the canonical n=1 metric is the unit sphere.
* The ``Z_ell`` quotient acts by ``z -> exp(2 pi i/ell) z``; radial data are
  automatically invariant, so ``ell`` only divides integrals by ``ell``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline
from scipy.linalg import eigh

from ._numerics import diff_matrix, gregory_weights
from .errors import (
    DifferentiationFailure,
    EigenSolveFailure,
    GridTooSmall,
    PositivityViolation,
    RegularityViolation,
)

MIN_EIGENVALUE = 1e-12
MIN_NODES = 16
# smooth, resolved potentials stay below ~3e-3 even at N = 16
SLOPE_TOL = 5e-3


@dataclass(frozen=True)
class ClassData:
    """Kähler class data: dimension, quotient order and moment-interval length."""

    n: int
    ell: int = 1
    class_scale: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError(f"ell must be an integer >= 1, got {self.ell}")
        if self.class_scale is None:
            object.__setattr__(self, "class_scale", float(self.n + 1))
        elif self.class_scale <= 0:
            raise ValueError("class_scale must be positive")

    @property
    def c(self) -> float:
        return float(self.class_scale)

    @property
    def is_canonical(self) -> bool:
        return self.class_scale == self.n + 1

    @property
    def measure_constant(self) -> float:
        """Factor turning ``tau^(n-1) dtau`` into the volume measure."""
        return math.pi**self.n / math.factorial(self.n - 1) / self.ell

    @property
    def V(self) -> float:
        """Closed-form total volume of every metric in the class."""
        return self.measure_constant * self.c**self.n / self.n


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A radial Kähler metric: relative potential ``u`` over Fubini-Study."""

    class_data: ClassData
    grid: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if grid.ndim != 1 or grid.shape != u.shape:
            raise ValueError("grid and u must be 1-D arrays of equal length")
        if len(grid) - 1 < MIN_NODES:
            raise GridTooSmall(f"N = {len(grid) - 1} < {MIN_NODES}")
        N = len(grid) - 1
        if not np.allclose(grid, np.linspace(0.0, 1.0, N + 1), rtol=0, atol=1e-13):
            raise ValueError("grid must be the uniform partition of [0, 1]")
        if not np.all(np.isfinite(u)):
            raise PositivityViolation("non-finite potential values")
        grid = np.linspace(0.0, 1.0, N + 1)
        grid.setflags(write=False)
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "u", u)
        lo = min(self.a.min(), self.b.min())
        if not lo > MIN_EIGENVALUE:
            raise PositivityViolation(f"metric eigenvalue ratio reaches {lo:.3e}")
        s0, s1 = self.endpoint_slopes()
        if abs(s0 - 1.0) > SLOPE_TOL or abs(s1 + 1.0) > SLOPE_TOL:
            raise RegularityViolation(f"endpoint slopes {s0:.3e}, {s1:.3e}")

    # -- background -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.class_data.n

    @property
    def N(self) -> int:
        return len(self.grid) - 1

    @property
    def c(self) -> float:
        return self.class_data.c

    @cached_property
    def tau0(self) -> np.ndarray:
        return self.c * self.grid

    @cached_property
    def psi0(self) -> np.ndarray:
        """Fubini-Study momentum profile ``tau_0 (c - tau_0)/c`` (= ``F_0''(s)``)."""
        return self.tau0 * (1.0 - self.grid)

    @property
    def background(self) -> dict:
        """Background data at the nodes: ``F_0'(s)`` and ``F_0''(s)``.

        ``F_0`` itself is ``-c log(1 - y)``, infinite at ``y = 1``; it is not stored.
        """
        return {"dF0_ds": self.tau0, "d2F0_ds2": self.psi0}

    # -- derivatives of u with respect to tau_0 ----------------------------
    def diff(self, f: np.ndarray, order: int) -> np.ndarray:
        return diff_matrix(self.N + 1, self.c, order) @ f

    @cached_property
    def du(self) -> tuple:
        return tuple(self.diff(self.u, k) for k in (1, 2, 3, 4))

    @cached_property
    def a(self) -> np.ndarray:
        """Transverse eigenvalue of ``omega_u`` relative to ``omega_FS``."""
        return 1.0 + (1.0 - self.grid) * self.du[0]

    @cached_property
    def b(self) -> np.ndarray:
        """Radial eigenvalue of ``omega_u`` relative to ``omega_FS``."""
        return 1.0 + (1.0 - 2.0 * self.grid) * self.du[0] + self.psi0 * self.du[1]

    @cached_property
    def db(self) -> np.ndarray:
        u1, u2, u3, _ = self.du
        return -2.0 * u1 / self.c + 2.0 * (1.0 - 2.0 * self.grid) * u2 + self.psi0 * u3

    @cached_property
    def d2b(self) -> np.ndarray:
        _, u2, u3, u4 = self.du
        return -6.0 * u2 / self.c + 3.0 * (1.0 - 2.0 * self.grid) * u3 + self.psi0 * u4

    @property
    def tau(self) -> np.ndarray:
        """Moment coordinate of ``omega_u``."""
        return self.tau0 * self.a

    @property
    def psi(self) -> np.ndarray:
        """Momentum profile of ``omega_u`` at the nodes."""
        return self.psi0 * self.b

    @cached_property
    def volume_ratio(self) -> np.ndarray:
        """``omega_u^n / omega_FS^n``."""
        return self.a ** (self.n - 1) * self.b

    @cached_property
    def measure(self) -> np.ndarray:
        """Quadrature weights of ``omega_u^n`` at the nodes."""
        w = gregory_weights(self.N + 1, self.c)
        return self.class_data.measure_constant * w * self.tau0 ** (self.n - 1) * self.volume_ratio

    def endpoint_slopes(self) -> tuple:
        """``dpsi/dtau`` at both ends, from one-sided differences of ``psi`` and ``tau``.

        Smooth potentials give 1 and -1 up to truncation error; a potential that
        is not smooth in ``y`` at an end shows up as an order-one deviation.
        """
        dpsi = self.diff(self.psi, 1)
        dtau = self.diff(self.tau, 1)
        return float(dpsi[0] / dtau[0]), float(dpsi[-1] / dtau[-1])

    def with_potential(self, u: np.ndarray) -> "RadialProfile":
        return RadialProfile(self.class_data, self.grid, u)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """``g^{i jbar} d_i d_jbar f`` for a radial grid function ``f``."""
        f1 = self.diff(f, 1)
        f2 = self.diff(f, 2)
        trans = (1.0 - self.grid) * f1 / self.a
        rad = ((1.0 - 2.0 * self.grid) * f1 + self.psi0 * f2) / self.b
        return (self.n - 1) * trans + rad

    def gradient_sq(self, f: np.ndarray) -> np.ndarray:
        """``|df|^2_g = g^{i jbar} f_i f_jbar``."""
        return self.psi0 * self.diff(f, 1) ** 2 / self.b

    def ddbar_eigenvalues(self, f: np.ndarray) -> tuple:
        """Transverse and radial eigenvalues of ``sqrt(-1) ddbar f`` relative to ``omega_FS``."""
        f1 = self.diff(f, 1)
        f2 = self.diff(f, 2)
        return (1.0 - self.grid) * f1, (1.0 - 2.0 * self.grid) * f1 + self.psi0 * f2


@dataclass(frozen=True, eq=False)
class CurvatureFields:
    """Pointwise curvature of a radial profile.

    Ricci values are eigenvalues of ``g^{-1} Ric``. Bisectional components are
    ``R(e, ebar, f, fbar)`` on g-unit vectors: radial-radial, radial-transverse,
    transverse holomorphic sectional, and two distinct transverse directions.
    For n = 1 only ``R``, ``ric_radial`` and ``B_rr`` exist.
    """

    nodes: np.ndarray
    R: np.ndarray
    ric_radial: np.ndarray
    ric_transverse: Optional[np.ndarray] = None
    B_rr: Optional[np.ndarray] = None
    B_rt: Optional[np.ndarray] = None
    B_tt: Optional[np.ndarray] = None
    B_tu: Optional[np.ndarray] = None
    n: int = field(default=1)


def _uniform_grid(N: int) -> np.ndarray:
    if N < MIN_NODES:
        raise GridTooSmall(f"N = {N} < {MIN_NODES}")
    return np.linspace(0.0, 1.0, N + 1)


def make_fubini_study(class_data: ClassData, N: int) -> RadialProfile:
    y = _uniform_grid(N)
    return RadialProfile(class_data, y, np.zeros_like(y))


def mode_potential(amplitude: float, mode_spec: Sequence) -> Callable[[np.ndarray], np.ndarray]:
    """Relative potential ``amplitude * sum_m coef_m cos(m pi y)`` as a callable."""
    modes = [(int(m), float(coef)) for m, coef in mode_spec]

    def potential(y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for m, coef in modes:
            out = out + coef * np.cos(m * np.pi * y)
        return amplitude * out

    return potential


def make_perturbed(class_data: ClassData, N: int, amplitude: float, mode_spec: Sequence) -> RadialProfile:
    """Fubini-Study plus a cosine-mode perturbation; raises PositivityViolation if degenerate."""
    y = _uniform_grid(N)
    return RadialProfile(class_data, y, mode_potential(amplitude, mode_spec)(y))


def curvature_fields(p: RadialProfile) -> CurvatureFields:
    n, c, y = p.n, p.c, p.grid
    a, b, db, d2b = p.a, p.b, p.db, p.d2b
    u1, u2 = p.du[0], p.du[1]
    if not (np.all(np.isfinite(db)) and np.all(np.isfinite(d2b))):
        raise DifferentiationFailure("non-finite derivatives")
    B_rr = (2.0 / c - (1.0 - 2.0 * y) * db / b - p.psi0 * (d2b * b - db**2) / b**2) / b
    if n == 1:
        return CurvatureFields(nodes=y, R=B_rr, ric_radial=B_rr, B_rr=B_rr, n=1)
    # (psi/tau - 1)/tau_0, written without the cancellation at tau_0 = 0
    q = (-1.0 - 2.0 * (1.0 - y) * u1 + c * (1.0 - y) ** 2 * u2) / (c * a)
    B_tu = -q / a
    B_rt = (q + 2.0 / c - (1.0 - y) * db / b) / a
    B_tt = 2.0 * B_tu
    ric_r = B_rr + (n - 1) * B_rt
    ric_t = B_rt + B_tt + (n - 2) * B_tu
    R = ric_r + (n - 1) * ric_t
    return CurvatureFields(
        nodes=y, R=R, ric_radial=ric_r, ric_transverse=ric_t,
        B_rr=B_rr, B_rt=B_rt, B_tt=B_tt, B_tu=B_tu, n=n,
    )


def bisectional_form(cf: CurvatureFields, cos2_v, cos2_w, overlap):
    """``R(v, vbar, w, wbar)`` for unit ``v, w`` at every node.

    ``cos2_v``, ``cos2_w`` are the squared radial components; ``overlap`` is
    ``Re(v_1 wbar_1 <w', v'>)/(|v_1||w_1||v'||w'|)`` together with its modulus
    ``m`` passed as a pair ``(x, m)``.
    """
    x, m = overlap
    if cf.n == 1:
        return np.broadcast_to(cf.B_rr[:, None], (len(cf.nodes), np.size(cos2_v)))
    cv, cw = np.asarray(cos2_v), np.asarray(cos2_w)
    sv, sw = 1.0 - cv, 1.0 - cw
    rr = cv * cw
    rt = cv * sw + cw * sv + 2.0 * x * np.sqrt(cv * sv * cw * sw)
    tt = sv * sw * (1.0 + m**2)
    return cf.B_rr[:, None] * rr + cf.B_rt[:, None] * rt + cf.B_tu[:, None] * tt


def bisectional_range(cf: CurvatureFields, resolution: int = 41) -> tuple:
    """Min and max of the bisectional form over unit direction pairs and nodes."""
    if cf.n == 1:
        return float(cf.B_rr.min()), float(cf.B_rr.max())
    p = np.linspace(0.0, 1.0, resolution)
    ms = np.array([1.0]) if cf.n == 2 else np.linspace(0.0, 1.0, 11)
    P, Q, M, S = np.meshgrid(p, p, ms, np.array([-1.0, 1.0]), indexing="ij")
    vals = bisectional_form(cf, P.ravel(), Q.ravel(), (S.ravel() * M.ravel(), M.ravel()))
    return float(vals.min()), float(vals.max())


def integrate(f, p: RadialProfile) -> float:
    """``int_M f omega_p^n`` with the fixed Gregory rule."""
    return float(np.dot(p.measure, np.broadcast_to(f, p.grid.shape)))


def total_volume(p: RadialProfile) -> float:
    return float(p.measure.sum())


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)


def radial_length(p: RadialProfile) -> float:
    """Length of the radial geodesic from ``tau = 0`` to ``tau = c``.

    The substitution ``tau_0 = c(1 - cos t)/2`` removes the endpoint square-root
    singularities: the length becomes ``sqrt(c/2) * int_0^pi sqrt(b) dt``.
    """
    theta = 0.5 * np.pi * (_GL_NODES + 1.0)
    spline = CubicSpline(p.grid, p.b)
    b = spline(0.5 * (1.0 - np.cos(theta)))
    return math.sqrt(p.c / 2.0) * 0.5 * np.pi * float(np.dot(_GL_WEIGHTS, np.sqrt(b)))


def diameter(p: RadialProfile) -> float:
    """Pole-to-pole length for n = 1; radial length plus divisor diameter otherwise.

    For n >= 2 this overestimates the true diameter. The divisor at infinity
    carries ``c`` times the standard Fubini-Study metric of CP^(n-1) for every
    profile, so its diameter is ``pi sqrt(c/2)``.
    """
    L = radial_length(p)
    if p.n == 1:
        return L
    return L + math.pi * math.sqrt(p.c / 2.0)


def lambda1_radial(p: RadialProfile, degree: Optional[int] = None) -> float:
    """Smallest nonzero eigenvalue of ``-Laplacian`` on radial functions.

    Rayleigh-Ritz over Legendre polynomials in ``y`` up to ``degree``: the
    Dirichlet form ``int |df|^2 omega^n`` against the mass ``int f^2 omega^n``.
    Ritz values bound the eigenvalue from above and decrease with the degree.
    """
    if degree is None:
        degree = min(24, p.N // 4)
    # Coefficients enter through quintic splines of a and b; the integrals use
    # Gauss-Legendre nodes so polynomial integrands are integrated exactly.
    xg, wg = np.polynomial.legendre.leggauss(2 * degree + 16)
    yg = 0.5 * (xg + 1.0)
    ag = make_interp_spline(p.grid, p.a, k=5)(yg)
    bg = make_interp_spline(p.grid, p.b, k=5)(yg)
    t0 = p.c * yg
    w = 0.5 * p.c * wg * p.class_data.measure_constant * t0 ** (p.n - 1) * ag ** (p.n - 1) * bg
    V = np.polynomial.legendre.legvander(xg, degree)
    dV = np.zeros_like(V)
    for k in range(1, degree + 1):
        coef = np.zeros(degree + 1)
        coef[k] = 1.0
        dV[:, k] = np.polynomial.legendre.legval(xg, np.polynomial.legendre.legder(coef))
    dV *= 2.0 / p.c  # d/dtau_0 = (2/c) d/dx
    psi0 = t0 * (1.0 - yg)
    K = dV.T @ ((w * psi0 / bg)[:, None] * dV)
    M = V.T @ (w[:, None] * V)
    try:
        evals = eigh(K, M, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveFailure(str(exc)) from exc
    if not np.all(np.isfinite(evals)) or evals.size < 2:
        raise EigenSolveFailure("degenerate discretisation")
    if abs(evals[0]) > 1e-8 * max(1.0, abs(evals[1])):
        raise EigenSolveFailure(f"constant mode not resolved: {evals[0]:.3e}")
    return float(evals[1])


# -- text serialisation ----------------------------------------------------

def dumps_profile(p: RadialProfile) -> str:
    cd = p.class_data
    lines = [f"n={cd.n} ell={cd.ell} N={p.N} class_scale={cd.class_scale!r}"]
    for row in zip(p.grid, p.u, p.a, p.b):
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def loads_profile(text: str) -> RadialProfile:
    header, *rows = [ln for ln in text.splitlines() if ln.strip()]
    fields = dict(item.split("=", 1) for item in header.split())
    try:
        cd = ClassData(int(fields["n"]), int(fields["ell"]), float(fields["class_scale"]))
        N = int(fields["N"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad profile header: {header!r}") from exc
    data = np.array([[float(v) for v in r.split()] for r in rows])
    if data.shape != (N + 1, 4):
        raise ValueError(f"expected {N + 1} rows of 4 values, got {data.shape}")
    p = RadialProfile(cd, data[:, 0], data[:, 1])
    if not (np.allclose(p.a, data[:, 2], rtol=1e-9, atol=1e-12)
            and np.allclose(p.b, data[:, 3], rtol=1e-9, atol=1e-12)):
        raise RegularityViolation("stored eigenvalues disagree with the potential")
    return p


def save_profile(p: RadialProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_profile(p))


def load_profile(path) -> RadialProfile:
    with open(path) as fh:
        return loads_profile(fh.read())

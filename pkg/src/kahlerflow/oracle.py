"""Brute-force curvature of a Kähler potential on the affine chart of CP^n.

Everything here is computed from a scalar potential by finite differences in
the real coordinates ``x = (Re z, Im z)`` and recombined into Wirtinger
derivatives ``d_z = (d_x - i d_y)/2``, ``d_zbar = (d_x + i d_y)/2``. Nothing
assumes symmetry of the potential. It is slow (O(n^4) tensors, thousands of
potential evaluations per point) and is used only to check the radial fast path.

Each public function evaluates at step ``h`` and ``h/2`` and raises
:class:`ConditioningFailure` when the two disagree beyond ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConditioningFailure

# sixth-order central first-derivative stencil
_OFFS = np.array([-3, -2, -1, 1, 2, 3], dtype=float)
_W1 = np.array([-1.0, 9.0, -45.0, 45.0, -9.0, 1.0]) / 60.0


@dataclass(frozen=True)
class PointChart:
    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        r = np.linalg.norm(z)
        if not 1e-3 <= r <= 1e3:
            raise ConditioningFailure(f"|z| = {r:.3e} outside the band [1e-3, 1e3]")
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.z.real, self.z.imag])


@dataclass(frozen=True)
class OracleTensor:
    g: np.ndarray
    vol: float
    Riem: Optional[np.ndarray] = None
    ric: Optional[np.ndarray] = None
    ric_logdet: Optional[np.ndarray] = None
    R: Optional[float] = None


def _real_gradient(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    """Gradient of a (possibly array-valued) vectorised ``f`` at ``x``."""
    d = len(x)
    pts = x[None, None, :] + h * _OFFS[None, :, None] * np.eye(d)[:, None, :]
    vals = f(pts.reshape(-1, d))
    vals = vals.reshape((d, len(_OFFS)) + vals.shape[1:])
    return np.tensordot(_W1, vals, axes=(0, 1)) / h


def _wirtinger_pair(grad: np.ndarray, n: int):
    """Split a real gradient on axis 0 into (d_z, d_zbar) parts."""
    gx, gy = grad[:n], grad[n:]
    return 0.5 * (gx - 1j * gy), 0.5 * (gx + 1j * gy)


def _metric_direct(potential: Callable, n: int, h: float) -> Callable:
    """Vectorised metric from a one-level second-difference stencil."""
    d = 2 * n
    offs = h * _OFFS
    # tensor-product first-derivative stencil for mixed and pure second partials
    A, B = np.meshgrid(offs, offs, indexing="ij")
    W = np.outer(_W1, _W1) / h**2

    def metric(X):
        X = np.atleast_2d(X)
        npts = len(X)
        E = np.eye(d)
        # offsets (6, 6, d, d, d): A e_alpha + B e_beta for each pair (alpha, beta)
        shifts = (A[:, :, None, None, None] * E[None, None, :, None, :]
                  + B[:, :, None, None, None] * E[None, None, None, :, :])
        P = X[:, None, None, None, None, :] + shifts[None]
        vals = potential(P.reshape(-1, d)).reshape(npts, 6, 6, d, d)
        Hs = np.einsum("ab,nabij->nij", W, vals)
        Hxx, Hxy = Hs[:, :n, :n], Hs[:, :n, n:]
        Hyx, Hyy = Hs[:, n:, :n], Hs[:, n:, n:]
        # d_i d_jbar = (1/4)(d_xi - i d_yi)(d_xj + i d_yj)
        return 0.25 * (Hxx + Hyy + 1j * (Hxy - Hyx))

    return metric


def _check(a: np.ndarray, b: np.ndarray, tol: float, what: str) -> None:
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300)
    err = np.abs(a - b).max() / scale
    if not err <= tol:
        raise ConditioningFailure(f"{what}: step-halving discrepancy {err:.2e} > {tol:.1e}")


# base steps tried in order when no step is given
AUTO_STEPS = (0.01, 0.015, 0.02, 0.007)


def _default_h(pt: PointChart, h: Optional[float]) -> float:
    base = 0.01 if h is None else h
    return base * max(1.0, float(np.linalg.norm(pt.z)))


def oracle_metric_at(potential: Callable, pt: PointChart, h: Optional[float] = None,
                     tol: float = 1e-7) -> OracleTensor:
    """Metric and volume density ``det g`` at ``pt``.

    ``potential`` maps an array of real points of shape ``(m, 2n)`` to ``(m,)``.
    """
    h = _default_h(pt, h)
    n = pt.n
    g1 = _metric_direct(potential, n, h)(pt.x)[0]
    g2 = _metric_direct(potential, n, h / 2)(pt.x)[0]
    _check(g1, g2, tol, "metric")
    g = 0.5 * (g2 + g2.conj().T)
    eig = np.linalg.eigvalsh(g)
    if eig.min() <= 0:
        raise ConditioningFailure("metric is not positive definite")
    return OracleTensor(g=g, vol=float(np.linalg.det(g).real))


def _curvature(potential: Callable, pt: PointChart, h: float):
    n = pt.n
    x = pt.x
    metric = _metric_direct(potential, n, h)
    g = metric(x)[0]
    ginv = np.linalg.inv(g)
    outer = h

    dg = _real_gradient(lambda P: metric(P), x, outer)            # (2n, n, n)
    dz_g, dzb_g = _wirtinger_pair(dg, n)                           # [k, i, j]

    def dzb_metric(P):
        P = np.atleast_2d(P)
        gr = np.stack([_real_gradient(lambda Q: metric(Q), p, outer) for p in P])
        return np.stack([_wirtinger_pair(gq, n)[1] for gq in gr])  # (m, l, i, j)

    ddg = _real_gradient(dzb_metric, x, outer)                     # (2n, l, i, j)
    dz_dzb_g, _ = _wirtinger_pair(ddg, n)                          # [k, l, i, j]

    # R_{i jbar k lbar} = -d_k d_lbar g_{i jbar} + g^{p qbar} d_k g_{i qbar} d_lbar g_{p jbar}
    term1 = -np.einsum("klij->ijkl", dz_dzb_g)
    term2 = np.einsum("qp,kiq,lpj->ijkl", ginv, dz_g, dzb_g)
    Riem = term1 + term2

    def logdet(P):
        return np.log(np.linalg.det(metric(P)).real)

    H = _real_gradient(lambda P: np.stack([_real_gradient(logdet, p, outer) for p in np.atleast_2d(P)]), x, outer)
    dz_H, _ = _wirtinger_pair(H, n)
    _, dzb = _wirtinger_pair(dz_H.T, n)
    ric_logdet = -dzb.T
    ric = np.einsum("lk,ijkl->ij", ginv, Riem)
    R = float(np.einsum("ji,ij->", ginv, ric).real)
    return g, Riem, ric, ric_logdet, R


def oracle_curvature_at(potential: Callable, pt: PointChart, h: Optional[float] = None,
                        tol: float = 1e-5) -> OracleTensor:
    """Full curvature tensor, Ricci (two ways) and scalar curvature at ``pt``.

    Without an explicit ``h`` the base steps in ``AUTO_STEPS`` are tried in turn
    and the first one passing the step-halving check is used.
    """
    failure = None
    for base in AUTO_STEPS if h is None else (h,):
        step = _default_h(pt, base)
        g, Riem, ric, ricl, R = _curvature(potential, pt, step)
        _, Riem2, _, _, _ = _curvature(potential, pt, step / 2)
        try:
            _check(Riem, Riem2, tol, "curvature")
            break
        except ConditioningFailure as exc:
            failure = exc
    else:
        raise failure
    return OracleTensor(g=g, vol=float(np.linalg.det(g).real), Riem=Riem,
                        ric=ric, ric_logdet=ricl, R=R)


def oracle_sigma_at(potential: Callable, pt: PointChart, h: Optional[float] = None) -> np.ndarray:
    """Coefficients of ``det(I + t g^{-1} Ric)``: ``sigma_0 .. sigma_n``."""
    T = oracle_curvature_at(potential, pt, h)
    lam = np.linalg.eigvals(np.linalg.solve(T.g, T.ric))
    coeffs = np.poly(-lam)  # prod (t + lam_i) -> [1, e1, e2, ...]
    return np.real(coeffs)


def fubini_study_potential(n: int, c: Optional[float] = None) -> Callable:
    """``c log(1 + |z|^2)`` on real points of shape ``(m, 2n)``."""
    c = float(n + 1) if c is None else c

    def potential(X):
        return c * np.log1p(np.sum(np.asarray(X) ** 2, axis=-1))

    return potential


def radial_potential(n: int, u: Callable, c: Optional[float] = None) -> Callable:
    """``F_0 + u(y)`` with ``y = |z|^2/(1+|z|^2)`` the rescaled background moment."""
    c = float(n + 1) if c is None else c
    fs = fubini_study_potential(n, c)

    def potential(X):
        r2 = np.sum(np.asarray(X) ** 2, axis=-1)
        return fs(X) + u(r2 / (1.0 + r2))

    return potential

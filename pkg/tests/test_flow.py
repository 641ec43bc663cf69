import math

import numpy as np
import pytest

from kahlerflow.errors import InsufficientTail, RootNotBracketed, StepRejectionLimit
from kahlerflow.flow import (
    FlowSystem,
    csv_columns,
    csv_row,
    e1_gradient_rhs,
    exp_fit,
    gauge_fit,
    krf_rhs,
    monitors,
    rho_potential,
    run,
    step,
)
from kahlerflow.functionals import h_potential
from kahlerflow.radial import (
    ClassData,
    RadialProfile,
    curvature_fields,
    diameter,
    integrate,
    make_fubini_study,
    make_perturbed,
)
from kahlerflow.runio import RunConfig

MODES = [(1, 1.0), (2, 0.5)]


def fs_system(n, N=64, kind="krf"):
    return FlowSystem(make_fubini_study(ClassData(n), N), kind)


# -- right-hand sides ------------------------------------------------------------

def test_krf_fixed_point(n):
    s = fs_system(n).initial_state()
    assert np.abs(s.phi_dot).max() < 1e-14


def test_krf_constant_mode(n):
    sys_ = fs_system(n)
    s0 = sys_.initial_state()
    s = type(s0)(t=0.0, phi=np.full_like(s0.phi, 0.7), phi_dot=s0.phi_dot,
                 profile=sys_.profile(np.full_like(s0.phi, 0.7)), aux=s0.aux)
    assert np.allclose(krf_rhs(s, sys_.h, sys_.base), 0.7, atol=1e-14)


def test_krf_terms_recomputed():
    # omega = FS; phi = perturbation: phidot = log(det ratio) + phi - 0
    fs = make_fubini_study(ClassData(2), 64)
    sys_ = FlowSystem(fs)
    phi = make_perturbed(ClassData(2), 64, 0.05, MODES).u
    p = sys_.profile(phi)
    a = 1 + (1 - fs.grid) * p.du[0]
    b = 1 + (1 - 2 * fs.grid) * p.du[0] + fs.psi0 * p.du[1]
    expected = np.log(a * b) + phi
    assert np.allclose(sys_.rhs(phi), expected, atol=1e-13)


def test_krf_from_perturbed_base_uses_h():
    base = make_perturbed(ClassData(1), 64, 0.05, MODES)
    sys_ = FlowSystem(base)
    h, _ = h_potential(base)
    assert np.allclose(sys_.initial_state().phi_dot, -h, atol=1e-15)


def test_e1_fixed_point_and_mean_zero(n):
    s = fs_system(n, 32, "e1_gradient").initial_state()
    assert np.abs(s.phi_dot).max() < 1e-10
    p = make_perturbed(ClassData(n), 32, 0.03, MODES)
    sp = FlowSystem(p, "e1_gradient").initial_state()
    assert abs(integrate(sp.phi_dot, sp.profile)) < 1e-10
    assert np.array_equal(e1_gradient_rhs(sp), sp.phi_dot)


# -- stepping ---------------------------------------------------------------------

def test_fs_step_unchanged(n):
    sys_ = fs_system(n)
    s = sys_.initial_state()
    new = step(s, 1e-4, sys_)
    assert np.abs(new.phi).max() < 1e-12 and new.t == pytest.approx(1e-4)


def test_huge_step_rejected():
    sys_ = FlowSystem(make_perturbed(ClassData(1), 64, 0.03, MODES))
    with pytest.raises(StepRejectionLimit):
        step(sys_.initial_state(), 1e9, sys_)


def test_step_halving_reaches_cap():
    sys_ = FlowSystem(make_perturbed(ClassData(1), 64, 0.03, MODES))
    s = sys_.initial_state()
    cap = sys_.dt_cap(s.profile)
    new, used, _ = sys_.step(s, 3.5 * cap)
    assert used <= cap and used == pytest.approx(3.5 * cap / 4)


def test_energy_decreases_per_step():
    sys_ = FlowSystem(make_perturbed(ClassData(2), 64, 0.03, MODES))
    s = sys_.initial_state()
    en = sys_.energies
    E_prev = en.report(s.profile, s.J, 0.0, s.geometry).E
    dt = sys_.dt_cap(s.profile)
    for _ in range(50):
        s, _, dt = sys_.step(s, dt)
        E = en.report(s.profile, s.J, s.t, s.geometry).E
        assert E[0] <= E_prev[0] + 1e-8 and E[1] <= E_prev[1] + 1e-8
        E_prev = E


def test_cumulative_integral_accumulates():
    sys_ = FlowSystem(make_perturbed(ClassData(1), 64, 0.03, MODES))
    s = sys_.initial_state()
    dt = sys_.dt_cap(s.profile)
    vals = []
    for _ in range(20):
        s, _, dt = sys_.step(s, dt)
        vals.append(s.cumulative_L2R)
    assert all(b >= a for a, b in zip(vals, vals[1:])) and vals[-1] > 0


# -- gauge ----------------------------------------------------------------------

@pytest.mark.parametrize("lam0", [-1.3, -0.2, 0.4, 2.0])
def test_gauge_recovers_exact_lambda(n, lam0):
    y = np.linspace(0, 1, 65)
    c = n + 1.0
    p = RadialProfile(ClassData(n), y, rho_potential(lam0, y, c))
    g = gauge_fit(p)
    assert g.lam == pytest.approx(lam0, abs=1e-10)


def test_gauge_zero_at_fs(n):
    g = gauge_fit(make_fubini_study(ClassData(n), 64))
    assert abs(g.lam) < 1e-14 and np.abs(g.psi).max() < 1e-13


def test_gauge_residual_bound(perturbed):
    g = gauge_fit(perturbed)
    V = perturbed.class_data.V
    assert abs(g.residual) <= 1e-10 * V * np.abs(g.psi).max()


def test_gauge_wide_bracket():
    y = np.linspace(0, 1, 1025)
    p = RadialProfile(ClassData(1), y, rho_potential(4.5, y, 2.0))
    assert gauge_fit(p).lam == pytest.approx(4.5, abs=1e-8)


def test_gauge_not_bracketed():
    y = np.linspace(0, 1, 257)
    p = RadialProfile(ClassData(1), y, rho_potential(2.0, y, 2.0))
    with pytest.raises(RootNotBracketed):
        gauge_fit(p, bracket=0.5, wide=1.0)


def test_rho_is_pulled_back_fs():
    # rho_lambda has constant curvature: the pull-back of FS by an automorphism
    y = np.linspace(0, 1, 129)
    p = RadialProfile(ClassData(2), y, rho_potential(0.7, y, 3.0))
    cf = curvature_fields(p)
    assert np.allclose(cf.R, 2.0, atol=1e-7)
    assert diameter(p) == pytest.approx(diameter(make_fubini_study(ClassData(2), 128)), rel=1e-6)


# -- monitors ---------------------------------------------------------------------

def test_monitors_at_fs(n):
    sys_ = fs_system(n)
    rec = monitors(sys_.initial_state(), energies=sys_.energies)
    assert rec.L2_R < 1e-20 and abs(rec.c_t) < 1e-12 and rec.pinch < 1e-10
    D0 = math.pi * math.sqrt((n + 1) / 2) * (1 if n == 1 else 2)
    assert rec.liyau_margin == pytest.approx(1 - math.pi**2 / (4 * D0**2), abs=1e-8)
    assert rec.C2_min == pytest.approx(n) and rec.calabi_S == pytest.approx(0.0, abs=1e-20)


def test_csv_schema(n):
    sys_ = fs_system(n)
    rec = monitors(sys_.initial_state(), energies=sys_.energies)
    cols = csv_columns(n)
    assert len(csv_row(rec)) == len(cols) and len(set(cols)) == len(cols)
    assert cols[0] == "t" and f"E_{n}" in cols


# -- runs ---------------------------------------------------------------------------

def test_run_fs_converges_immediately():
    res = run(RunConfig(n=2, N=64, initial="fubini_study"))
    assert res.termination == "converged" and len(res.records) == 1


def test_short_run_samples():
    res = run(RunConfig(n=1, N=32, t_final=0.2, sample_dt=0.05))
    assert res.termination == "t_final"
    assert [round(r.t, 12) for r in res.records] == [0.0, 0.05, 0.1, 0.15, 0.2]
    assert all(b.bisec_min > 0 for b in res.records)


def test_run_reports_errors():
    res = run(RunConfig(n=1, N=32, amplitude=10.0))
    assert res.termination == "error" and res.error.code == 11


# -- exponential fit -------------------------------------------------------------------

def test_exp_fit_synthetic():
    t = np.linspace(0, 6, 61)
    assert exp_fit(t, 3 * np.exp(-0.5 * t)) == pytest.approx(0.5, abs=1e-6)


def test_exp_fit_constant():
    t = np.linspace(0, 6, 61)
    assert exp_fit(t, np.full_like(t, 2.0)) == pytest.approx(0.0, abs=1e-12)


def test_exp_fit_short_tail():
    with pytest.raises(InsufficientTail):
        exp_fit(np.linspace(0, 1, 12), np.ones(12))


@pytest.mark.parametrize("n", [1, 2])
def test_E1_dissipation_with_dimension_factor(n):
    # dE1/dt <= -(2/(nV)) int (R - r)^2, with equality for n = 1
    res = run(RunConfig(n=n, N=64, t_final=0.3, sample_dt=0.05))
    margins = [r.dE_rhs[1] + 2.0 / n * r.L2_R for r in res.records]
    assert max(margins) <= 1e-6
    if n == 1:
        assert max(abs(m) for m in margins) < 1e-6

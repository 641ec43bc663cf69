import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerflow.errors import GridTooSmall, PositivityViolation, RegularityViolation
from kahlerflow.radial import (
    ClassData,
    RadialProfile,
    bisectional_range,
    curvature_fields,
    diameter,
    dumps_profile,
    integrate,
    lambda1_radial,
    load_profile,
    loads_profile,
    make_fubini_study,
    make_perturbed,
    save_profile,
    total_volume,
)

from conftest import GENERIC_MODES, random_modes


# -- construction ------------------------------------------------------------

def test_fs_momentum_profile_n1():
    # psi_0(tau) = tau (2 - tau) / 2 from F_0 = 2 log(1 + e^s): F_0' = 2e^s/(1+e^s),
    # F_0'' = 2e^s/(1+e^s)^2 = tau (1 - tau/2).
    p = make_fubini_study(ClassData(1), 64)
    tau = p.tau
    assert np.allclose(p.psi, tau * (2.0 - tau) / 2.0, atol=1e-14)
    assert np.allclose(curvature_fields(p).R, 1.0, atol=1e-12)


def test_fs_potential_is_zero(n):
    assert np.all(make_fubini_study(ClassData(n), 64).u == 0.0)


def test_zero_amplitude_matches_fs(n):
    p = make_perturbed(ClassData(n), 64, 0.0, GENERIC_MODES)
    q = make_fubini_study(ClassData(n), 64)
    assert np.array_equal(p.u, q.u) and np.array_equal(p.a, q.a) and np.array_equal(p.b, q.b)


def test_grid_too_small():
    with pytest.raises(GridTooSmall):
        make_fubini_study(ClassData(1), 8)


def test_large_amplitude_rejected():
    with pytest.raises(PositivityViolation):
        make_perturbed(ClassData(1), 64, 10.0, [(1, 1.0)])


def test_large_amplitude_crosses_zero_by_direct_evaluation():
    # b = 1 + (1-2y)u' + psi_0 u'' evaluated by hand for u = 10 cos(pi y), c = 2
    y = np.linspace(0, 1, 2001)
    u1 = -10 * np.pi * np.sin(np.pi * y) / 2
    u2 = -10 * np.pi**2 * np.cos(np.pi * y) / 4
    b = 1 + (1 - 2 * y) * u1 + 2 * y * (1 - y) * u2
    assert b.min() < 0


def test_non_uniform_grid_rejected():
    y = np.linspace(0, 1, 33) ** 1.1
    with pytest.raises(ValueError):
        RadialProfile(ClassData(1), y, np.zeros_like(y))


@pytest.mark.parametrize("N", [16, 64, 256])
def test_non_smooth_potential_rejected(N):
    # y^(3/2) is not smooth in |z|^2 at the origin: the cone condition fails
    y = np.linspace(0, 1, N + 1)
    with pytest.raises(RegularityViolation):
        RadialProfile(ClassData(1), y, 0.3 * y**1.5)


def test_unresolved_mode_rejected():
    with pytest.raises(RegularityViolation):
        make_perturbed(ClassData(2), 16, 0.05, [(5, 1.0)])


def test_smooth_endpoint_slopes(perturbed):
    s0, s1 = perturbed.endpoint_slopes()
    assert abs(s0 - 1) < 1e-8 and abs(s1 + 1) < 1e-8


def test_class_data_validation():
    with pytest.raises(ValueError):
        ClassData(0)
    with pytest.raises(ValueError):
        ClassData(1, ell=0)
    assert ClassData(2).c == 3.0 and ClassData(2).is_canonical


# -- volume and integration -------------------------------------------------------

def test_fs_volume_closed_form(n):
    # int_CP^n det(g) dLeb for g = (n+1) g_FS: pi^n (n+1)^n / n!
    p = make_fubini_study(ClassData(n), 128)
    assert total_volume(p) == pytest.approx(math.pi**n * (n + 1) ** n / math.factorial(n), rel=1e-12)
    assert total_volume(p) == pytest.approx(p.class_data.V, rel=1e-12)


def test_quotient_halves_volume():
    v1 = total_volume(make_fubini_study(ClassData(1, 1), 64))
    v2 = total_volume(make_fubini_study(ClassData(1, 2), 64))
    assert v2 == pytest.approx(v1 / 2, rel=1e-14)


@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_volume_is_class_invariant(n, seed):
    rng = np.random.default_rng(seed)
    p = make_perturbed(ClassData(n), 128, 0.05, random_modes(rng))
    assert total_volume(p) == pytest.approx(p.class_data.V, rel=1e-8)


def test_integral_of_one_is_volume(perturbed):
    assert integrate(1.0, perturbed) == pytest.approx(total_volume(perturbed), rel=1e-14)


def test_scalar_curvature_averages_to_n(perturbed):
    R = curvature_fields(perturbed).R
    assert integrate(R, perturbed) == pytest.approx(perturbed.n * perturbed.class_data.V, rel=1e-8)


def test_odd_function_integrates_to_zero_at_fs(n):
    # the FS measure is symmetric under tau_0 -> c - tau_0 only for n = 1
    p = make_fubini_study(ClassData(1), 128)
    assert abs(integrate(np.sin(2 * np.pi * (p.grid - 0.5)), p)) < 1e-13


# -- curvature ---------------------------------------------------------------------

def test_fs_curvature_convention(n):
    cf = curvature_fields(make_fubini_study(ClassData(n), 64))
    assert np.allclose(cf.R, n, atol=1e-10)
    assert np.allclose(cf.B_rr, 2.0 / (n + 1), atol=1e-10)
    if n >= 2:
        assert np.allclose(cf.B_rt, 1.0 / (n + 1), atol=1e-10)
        assert np.allclose(cf.B_tt, 2.0 / (n + 1), atol=1e-10)
        assert np.allclose(cf.B_tu, 1.0 / (n + 1), atol=1e-10)


def test_fs_n2_bisectional_values():
    cf = curvature_fields(make_fubini_study(ClassData(2), 64))
    assert np.allclose([cf.B_rr, cf.B_tt], 2.0 / 3.0, atol=1e-12)
    assert np.allclose([cf.B_rt, cf.B_tu], 1.0 / 3.0, atol=1e-12)


def test_n1_has_only_scalar_and_rr():
    cf = curvature_fields(make_fubini_study(ClassData(1), 64))
    assert cf.ric_transverse is None and cf.B_rt is None and cf.B_tt is None and cf.B_tu is None
    assert np.array_equal(cf.R, cf.B_rr)


def test_trace_and_bisectional_identities(perturbed):
    cf = curvature_fields(perturbed)
    n = perturbed.n
    if n == 1:
        assert np.array_equal(cf.R, cf.B_rr)
        return
    assert np.allclose(cf.R, cf.ric_radial + (n - 1) * cf.ric_transverse, rtol=1e-10)
    assert np.allclose(cf.ric_radial, cf.B_rr + (n - 1) * cf.B_rt, rtol=1e-10)
    assert np.allclose(cf.ric_transverse, cf.B_rt + cf.B_tt + (n - 2) * cf.B_tu, rtol=1e-10)


def test_ricci_from_volume_ratio(perturbed):
    # Ric = omega_FS - ddbar log(omega^n / omega_FS^n), eigenvalues relative to omega_FS
    p = perturbed
    cf = curvature_fields(p)
    T, Rr = p.ddbar_eigenvalues(np.log(p.volume_ratio))
    c = p.c
    assert np.allclose(cf.ric_radial * p.b, (p.n + 1) / c - Rr, atol=1e-7)
    if p.n > 1:
        assert np.allclose(cf.ric_transverse * p.a, (p.n + 1) / c - T, atol=1e-7)


def test_curvature_converges_under_refinement():
    def R_at(N):
        p = make_perturbed(ClassData(2), N, 0.05, GENERIC_MODES)
        return curvature_fields(p).R[N // 4]  # y = 1/4

    r1, r2, r3 = R_at(32), R_at(64), R_at(128)
    e1, e2 = abs(r1 - r3), abs(r2 - r3)
    assert e2 < e1 / 16  # at least fourth order


# -- bisectional range ---------------------------------------------------------------

def test_bisectional_range_fs(n):
    lo, hi = bisectional_range(curvature_fields(make_fubini_study(ClassData(n), 64)))
    if n == 1:
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    else:
        assert lo == pytest.approx(1.0 / (n + 1), abs=1e-12)
        assert hi == pytest.approx(2.0 / (n + 1), abs=1e-12)


def test_low_mode_start_is_positive():
    p = make_perturbed(ClassData(1), 64, 0.1, [(1, 1.0)])
    assert bisectional_range(curvature_fields(p))[0] > 0


def test_handmade_profile_has_negative_bisectional():
    p = make_perturbed(ClassData(1), 128, 0.1, [(1, 1.0), (2, 0.5), (4, 0.6)])
    cf = curvature_fields(p)
    assert cf.B_rr.min() < 0
    assert bisectional_range(cf)[0] < 0


def test_bisectional_sweep_contains_components():
    p = make_perturbed(ClassData(3), 64, 0.05, GENERIC_MODES)
    cf = curvature_fields(p)
    lo, hi = bisectional_range(cf)
    for comp in (cf.B_rr, cf.B_rt, cf.B_tt, cf.B_tu):
        assert lo <= comp.min() + 1e-14 and comp.max() <= hi + 1e-14


# -- diameter and lambda_1 --------------------------------------------------------

def test_fs_diameter_n1_is_round_sphere():
    assert diameter(make_fubini_study(ClassData(1), 64)) == pytest.approx(math.pi, rel=1e-10)


def test_fs_diameter_proxy(n):
    D = diameter(make_fubini_study(ClassData(n), 64))
    k = 1 if n == 1 else 2
    assert D == pytest.approx(k * math.pi * math.sqrt((n + 1) / 2), rel=1e-10)


def test_diameter_scales_with_root_of_class():
    p1 = make_perturbed(ClassData(1), 64, 0.05, GENERIC_MODES)
    p4 = make_perturbed(ClassData(1, class_scale=8.0), 64, 0.2, GENERIC_MODES)
    # u scales with the class; a and b are unchanged
    assert np.allclose(p1.b, p4.b)
    assert diameter(p4) == pytest.approx(2 * diameter(p1), rel=1e-12)


def test_quotient_keeps_radial_diameter():
    d1 = diameter(make_fubini_study(ClassData(1, 1), 64))
    d2 = diameter(make_fubini_study(ClassData(1, 2), 64))
    assert d2 == pytest.approx(d1, rel=1e-14)


def test_lambda1_fs(n):
    assert lambda1_radial(make_fubini_study(ClassData(n), 64)) == pytest.approx(1.0, abs=1e-10)


def test_lambda1_converges_monotonically():
    vals = [lambda1_radial(make_perturbed(ClassData(2), 64, 0.05, GENERIC_MODES), degree=d)
            for d in (6, 10, 14, 18)]
    # Ritz values decrease with the basis; 1e-10 allows for quadrature noise
    assert all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))
    assert abs(vals[-1] - vals[-2]) < 1e-8


def test_lambda1_refinement_at_fs():
    a = lambda1_radial(make_fubini_study(ClassData(1), 64))
    b = lambda1_radial(make_fubini_study(ClassData(1), 128))
    assert abs(b - 1.0) <= abs(a - 1.0) + 1e-13


def test_liyau_on_perturbed(perturbed):
    D = diameter(perturbed)
    assert lambda1_radial(perturbed) >= math.pi**2 / (4 * D**2)


# -- serialization -----------------------------------------------------------------

def test_profile_text_round_trip(tmp_path, perturbed):
    path = tmp_path / "p.txt"
    save_profile(perturbed, path)
    q = load_profile(path)
    assert np.array_equal(q.u, perturbed.u) and q.class_data == perturbed.class_data
    assert dumps_profile(q) == dumps_profile(perturbed)


def test_profile_header_format():
    text = dumps_profile(make_fubini_study(ClassData(2, 3), 16))
    assert text.splitlines()[0] == "n=2 ell=3 N=16 class_scale=3.0"
    assert len(text.splitlines()) == 18


def test_tampered_profile_rejected(perturbed):
    lines = dumps_profile(perturbed).splitlines()
    vals = lines[5].split()
    vals[3] = repr(float(vals[3]) * 1.01)
    lines[5] = " ".join(vals)
    with pytest.raises(RegularityViolation):
        loads_profile("\n".join(lines))

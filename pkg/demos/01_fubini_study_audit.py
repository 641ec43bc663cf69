"""Check the curvature conventions on the Fubini-Study metric.

The radial reduction should give constant scalar curvature n and first
radial eigenvalue 1. The brute-force oracle, which differentiates the Kahler
potential in a chart, must agree with the radial fields at an arbitrary point
of a perturbed metric.

Run: python demos/01_fubini_study_audit.py
"""

import numpy as np

from kahlerflow.oracle import PointChart, oracle_curvature_at, radial_potential
from kahlerflow.radial import (
    ClassData,
    curvature_fields,
    lambda1_radial,
    make_fubini_study,
    make_perturbed,
    mode_potential,
)

MODES = [(1, 0.7), (2, -0.4), (3, 0.2)]

print("Fubini-Study on CP^n, N = 128")
for n in (1, 2, 3):
    fs = make_fubini_study(ClassData(n), 128)
    cf = curvature_fields(fs)
    print(f"  n={n}: max|R - n| = {np.abs(cf.R - n).max():.1e}, lambda1 = {lambda1_radial(fs):.10f}")

print("\nRadial fields vs chart oracle on a perturbed metric (amplitude 0.05)")
for n in (1, 2, 3):
    p = make_perturbed(ClassData(n), 128, 0.05, MODES)
    cf = curvature_fields(p)
    i = 70
    y = p.grid[i]
    z = np.full(n, np.sqrt(y / (1 - y) / n)) * np.exp(1j * np.arange(n))
    T = oracle_curvature_at(radial_potential(n, mode_potential(0.05, MODES)), PointChart(z))
    print(f"  n={n}, y={y:.4f}: radial R = {cf.R[i]:.9f}, oracle R = {T.R:.9f}")

"""Command line entry point: ``run``, ``inspect`` and ``oracle`` subcommands.

Exit status is 0 on success and otherwise the ``code`` of the error class
(see :mod:`kahlerflow.errors`). ``KAHLERFLOW_OUTPUT_ROOT`` prefixes relative
output directories.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import KahlerFlowError


def _cmd_run(args) -> int:
    from .runio import execute, parse_config, resolve_output_dir

    cfg = parse_config(args.config)
    status = execute(cfg)
    print(f"{'ok' if status == 0 else 'failed'} (exit {status}): {resolve_output_dir(cfg)}")
    return status


def _cmd_inspect(args) -> int:
    from .runio import inspect

    text, ok = inspect(args.manifest)
    print(text)
    return 0 if ok else 1


def parse_point(spec: str) -> np.ndarray:
    """Comma-separated complex coordinates, e.g. ``"0.5+0.1j,0.2"``."""
    try:
        return np.array([complex(s.strip().replace(" ", "")) for s in spec.split(",")])
    except ValueError as exc:
        raise KahlerFlowError(f"bad point spec {spec!r}: {exc}") from exc


def _cmd_oracle(args) -> int:
    from .oracle import PointChart, oracle_curvature_at, radial_potential
    from .radial import mode_potential
    from .runio import _parse_modes

    z = parse_point(args.point)
    n = len(z)
    modes = _parse_modes(args.modes) if args.modes else ()
    pot = radial_potential(n, mode_potential(args.amplitude, modes))
    T = oracle_curvature_at(pot, PointChart(z))
    lam = np.sort(np.linalg.eigvals(np.linalg.solve(T.g, T.ric)).real)
    sigma = np.poly(-lam).real
    np.set_printoptions(precision=10, suppress=True)
    r2 = float(np.sum(np.abs(z) ** 2))
    print(f"n = {n}, |z|^2 = {r2:.10g}, y = {r2 / (1 + r2):.10g}")
    print("g =\n", T.g)
    print("det g =", T.vol)
    print("Ricci eigenvalues =", lam)
    print("sigma_0..n =", sigma)
    print("R =", T.R)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kahlerflow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a flow from an INI config")
    r.add_argument("config")
    r.set_defaults(func=_cmd_run)
    i = sub.add_parser("inspect", help="summarize a run manifest and verify digests")
    i.add_argument("manifest")
    i.set_defaults(func=_cmd_inspect)
    o = sub.add_parser("oracle", help="brute-force curvature at one chart point")
    o.add_argument("point", help='complex coordinates, e.g. "0.5+0.1j,0.2"')
    o.add_argument("--amplitude", type=float, default=0.0)
    o.add_argument("--modes", default="", help='radial perturbation, e.g. "1:1.0, 2:0.5"')
    o.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KahlerFlowError as exc:
        print(f"error ({type(exc).__name__}, code {exc.code}): {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

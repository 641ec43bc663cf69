"""Run configuration, orchestration, output files and manifests.

Configuration files are INI with two sections::

    [run]
    n = 1
    N = 128
    flow_kind = krf
    t_final = 5.0

    [initial]
    kind = perturbed
    amplitude = 0.03
    modes = 1:1.0, 2:0.5

Unknown sections or keys raise ParseError; out-of-range values raise
RangeError. ``modes = random`` draws ``random_modes`` coefficients from
``seed``.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import InsufficientTail, KahlerFlowError, OutputError, ParseError, RangeError
from .flow import FLOW_KINDS, DiagnosticsRecord, csv_columns, csv_row, exp_fit, run
from .radial import dumps_profile

OUTPUT_ROOT_ENV = "KAHLERFLOW_OUTPUT_ROOT"
CSV_NAME = "diagnostics.csv"
JSONL_NAME = "diagnostics.jsonl"
CONFIG_NAME = "config.ini"
MANIFEST_NAME = "manifest.json"
CHECKPOINT_DIR = "checkpoints"

_RUN_KEYS = ("n", "ell", "N", "flow_kind", "t_final", "sample_dt", "stop_tol",
             "C_cfl", "checkpoint_every", "output_dir", "seed")
_INITIAL_KEYS = ("kind", "amplitude", "modes", "random_modes")


@dataclass(frozen=True)
class RunConfig:
    n: int = 1
    ell: int = 1
    N: int = 128
    flow_kind: str = "krf"
    initial: str = "perturbed"
    amplitude: float = 0.03
    mode_spec: object = ((1, 1.0), (2, 0.5))  # tuple of (mode, coef) or "random"
    random_modes: int = 3
    t_final: float = 5.0
    sample_dt: float = 0.1
    stop_tol: float = 1e-20
    C_cfl: float = 0.2
    checkpoint_every: int = 4
    output_dir: str = "run_output"
    seed: int = 0

    def __post_init__(self):
        _validate(self)

    def resolved_modes(self) -> tuple:
        """Mode list, drawing coefficients from ``seed`` when ``mode_spec == "random"``."""
        if self.mode_spec != "random":
            return tuple(self.mode_spec)
        rng = np.random.default_rng(self.seed)
        coefs = rng.uniform(-1.0, 1.0, self.random_modes)
        return tuple((m + 1, float(c)) for m, c in enumerate(coefs))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mode_spec"] = self.mode_spec if self.mode_spec == "random" else [list(m) for m in self.mode_spec]
        return d


def _validate(c: RunConfig) -> None:
    def need(ok, key, msg):
        if not ok:
            raise RangeError(f"{key}: {msg}")

    need(1 <= c.n <= 4, "n", "must be in 1..4")
    need(c.ell >= 1, "ell", "must be >= 1")
    need(16 <= c.N <= 1024, "N", "must be in 16..1024")
    need(c.flow_kind in FLOW_KINDS, "flow_kind", f"must be one of {FLOW_KINDS}")
    need(c.initial in ("fubini_study", "perturbed"), "kind", "must be fubini_study or perturbed")
    need(c.amplitude >= 0, "amplitude", "must be >= 0")
    need(c.t_final > 0, "t_final", "must be > 0")
    need(0 < c.sample_dt <= c.t_final, "sample_dt", "must be in (0, t_final]")
    need(c.stop_tol >= 0, "stop_tol", "must be >= 0")
    need(0 < c.C_cfl <= 1, "C_cfl", "must be in (0, 1]")
    need(c.checkpoint_every >= 0, "checkpoint_every", "must be >= 0")
    need(c.seed >= 0, "seed", "must be >= 0")
    need(1 <= c.random_modes <= 16, "random_modes", "must be in 1..16")
    if c.mode_spec != "random":
        for m, _ in c.mode_spec:
            need(int(m) == m and m >= 1, "modes", "mode indices must be integers >= 1")


def _parse_modes(text: str):
    text = text.strip()
    if text == "random":
        return "random"
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        m, sep, coef = item.partition(":")
        if not sep:
            raise ValueError(f"mode entry {item!r} is not index:coefficient")
        out.append((int(m), float(coef)))
    return tuple(out)


def _format_modes(spec) -> str:
    if spec == "random":
        return "random"
    return ", ".join(f"{m}:{c!r}" for m, c in spec)


_CONVERTERS = {
    "n": int, "ell": int, "N": int, "flow_kind": str, "t_final": float, "sample_dt": float,
    "stop_tol": float, "C_cfl": float, "checkpoint_every": int, "output_dir": str, "seed": int,
    "kind": str, "amplitude": float, "modes": _parse_modes, "random_modes": int,
}


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive ("N")
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from exc
    allowed = {"run": _RUN_KEYS, "initial": _INITIAL_KEYS}
    values = {}
    for section in cp.sections():
        if section not in allowed:
            raise ParseError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in allowed[section]:
                raise ParseError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                values[key] = _CONVERTERS[key](raw)
            except ValueError as exc:
                raise ParseError(f"{source}: bad value for {key!r}: {raw!r} ({exc})") from exc
    if "kind" in values:
        values["initial"] = values.pop("kind")
    if "modes" in values:
        values["mode_spec"] = values.pop("modes")
    return RunConfig(**values)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def dumps_config(c: RunConfig) -> str:
    """INI text with every field explicit; ``parse_config_text`` inverts it."""
    lines = ["[run]"]
    for key in _RUN_KEYS:
        v = getattr(c, key)
        lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
    lines += ["", "[initial]", f"kind = {c.initial}", f"amplitude = {c.amplitude!r}",
              f"modes = {_format_modes(c.mode_spec)}", f"random_modes = {c.random_modes}", ""]
    return "\n".join(lines)


def resolve_output_dir(c: RunConfig) -> Path:
    out = Path(c.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


# -- emission ---------------------------------------------------------------

def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def record_json(rec: DiagnosticsRecord) -> str:
    return json.dumps(rec.to_dict(), separators=(",", ":"))


def csv_text(records: Sequence[DiagnosticsRecord], n: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(n))
    for rec in records:
        w.writerow([repr(float(v)) if not isinstance(v, int) else v for v in csv_row(rec)])
    return buf.getvalue()


def _write(path: Path, data: str) -> str:
    try:
        path.write_bytes(data.encode())
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return sha256_bytes(data.encode())


def emit_series(records: Sequence[DiagnosticsRecord], out_dir, n: int) -> dict:
    """Write the CSV and JSON-lines series; returns ``{file name: sha256}``."""
    out_dir = Path(out_dir)
    jsonl = "".join(record_json(r) + "\n" for r in records)
    return {
        CSV_NAME: _write(out_dir / CSV_NAME, csv_text(records, n)),
        JSONL_NAME: _write(out_dir / JSONL_NAME, jsonl),
    }


@dataclass
class RunManifest:
    config: dict
    code_version: str
    start_time: str
    end_time: str
    termination: str
    files: dict
    headline: dict
    error: Optional[dict] = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _headline(records: Sequence[DiagnosticsRecord]) -> dict:
    if not records:
        return {"final_E1": None, "final_pinch": None, "alpha": None}
    last = records[-1]
    try:
        alpha = exp_fit([r.t for r in records], [r.grad_phidot for r in records])
    except (InsufficientTail, ValueError):
        alpha = None
    return {"final_E1": last.E[1] if len(last.E) > 1 else None,
            "final_pinch": last.pinch, "alpha": alpha}


def execute(config: RunConfig) -> int:
    """Run, write every output and the manifest (last); returns the exit status."""
    start = _now()
    out = resolve_output_dir(config)
    try:
        (out / CHECKPOINT_DIR).mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        err = OutputError(f"output directory {out} is not writable: {exc}")
        return err.code

    files = {CONFIG_NAME: _write(out / CONFIG_NAME, dumps_config(config))}

    def on_sample(i, rec, state):
        if config.checkpoint_every and i % config.checkpoint_every == 0:
            name = f"{CHECKPOINT_DIR}/ckpt_{i:06d}.txt"
            files[name] = _write(out / name, dumps_profile(state.profile))

    result = run(config, on_sample=on_sample, keep_states=False)
    error = None
    status = 0
    try:
        files.update(emit_series(result.records, out, config.n))
    except OutputError as exc:
        result.termination, result.error = "error", exc
    if result.error is not None:
        exc = result.error
        status = getattr(exc, "code", 1)
        error = {"type": type(exc).__name__, "code": status, "message": str(exc)}
    manifest = RunManifest(
        config=config.to_dict(), code_version=__version__, start_time=start, end_time=_now(),
        termination=result.termination, files=dict(sorted(files.items())),
        headline=_headline(result.records), error=error,
    )
    try:
        (out / MANIFEST_NAME).write_text(manifest.to_json())
    except OSError:
        return OutputError.code
    return status


def inspect(manifest_path) -> tuple:
    """Summary text of a manifest and whether every listed digest still matches."""
    path = Path(manifest_path)
    try:
        m = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    ok = True
    lines = [f"termination: {m['termination']}", f"code version: {m['code_version']}",
             f"started {m['start_time']}, finished {m['end_time']}"]
    for key, val in m["headline"].items():
        lines.append(f"{key}: {val}")
    if m.get("error"):
        lines.append(f"error: {m['error']['type']} (code {m['error']['code']}): {m['error']['message']}")
    for name, digest in m["files"].items():
        f = path.parent / name
        actual = sha256_bytes(f.read_bytes()) if f.exists() else None
        good = actual == digest
        ok &= good
        lines.append(f"{'ok' if good else 'MISMATCH'}  {name}")
    return "\n".join(lines), ok

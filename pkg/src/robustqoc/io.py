"""
Config ingestion and result persistence.

Config files are flat ``key = value`` text with ``#`` comments; the keys are
exactly the fields of :class:`~robustqoc.experiments.ExperimentConfig`.

A run directory holds:

``report.json``
    config echo, versions, seeds, per-strategy optimization results and a
    summary of the largest-lambda fidelities.
``fidelity.csv``
    ``lambda,strategy,noise_kind,realization,fidelity``
``pulses_<strategy>.csv``
    ``t,u_1,...,u_n``
``bloch.csv``
    ``t,rx,ry,rz,strategy`` (two-level tasks)
``manifest.json``
    every data file with its columns and a short description.

CSV floats carry 17 significant digits and JSON floats use the shortest
representation that parses back to the same double, so every number
round-trips exactly. Wall-clock timing goes to ``timing.log`` only, which
keeps the CSV and JSON outputs byte-identical across reruns.
"""

import csv
import json
import math
import typing
from dataclasses import fields
from pathlib import Path

import numpy as np

from .experiments import ExperimentConfig

__all__ = ["ConfigError", "parse_config", "load_config", "emit_outputs", "read_report", "format_float"]

FIDELITY_HEADER = ("lambda", "strategy", "noise_kind", "realization", "fidelity")
BLOCH_HEADER = ("t", "rx", "ry", "rz", "strategy")


class ConfigError(ValueError):
    pass


def _field_types():
    hints = typing.get_type_hints(ExperimentConfig)
    return {f.name: hints[f.name] for f in fields(ExperimentConfig)}


def _convert(key, raw, kind):
    if kind is float and raw.lower() == "none":
        return None
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None
    return raw


def parse_config(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed overrides."""
    types = _field_types()
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _convert(key, value, types[key])
    return out


def load_config(path=None, **overrides):
    """Build an :class:`ExperimentConfig` from a file plus explicit overrides."""
    values = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        values = parse_config(text, str(path))
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "task" and values.get("task", value) != value:
            raise ConfigError(f"task {value!r} conflicts with {values[key]!r} in {path}")
        values[key] = value
    return ExperimentConfig(**values)


def format_float(x):
    return format(float(x), ".17g")


def _json_number(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    """Replace numpy scalars and non-finite floats so ``json`` can write them."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_number(obj)
    return obj


def _write(path, writer_fn):
    try:
        with open(path, "w", newline="") as fh:
            writer_fn(fh)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def _write_csv(path, header, rows):
    def body(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])

    return _write(path, body)


def _write_json(path, data):
    return _write(path, lambda fh: fh.write(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n"))


def emit_outputs(report, out_dir):
    """Write every output file of a run; returns the manifest dict."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory {out}: {exc.strerror}") from exc

    files = []
    _write_json(out / "report.json", report.to_dict())
    files.append({"path": "report.json", "kind": "report", "description": "config, optimization results and summary"})

    _write_csv(out / "fidelity.csv", FIDELITY_HEADER, report.fidelity_rows)
    files.append({
        "path": "fidelity.csv",
        "kind": "fidelity_vs_lambda",
        "columns": list(FIDELITY_HEADER),
        "description": "noisy fidelity per coupling strength, strategy and noise realization",
    })

    for name, amps in report.pulses.items():
        fname = f"pulses_{name}.csv"
        header = ["t"] + [f"u_{i + 1}" for i in range(amps.shape[0])]
        _write_csv(out / fname, header, np.column_stack([report.times, amps.T]).tolist())
        files.append({"path": fname, "kind": "pulses", "strategy": name, "columns": header,
                      "description": "control amplitudes on the propagation grid"})

    if report.bloch:
        rows = [
            (t, *r, name)
            for name, traj in report.bloch.items()
            for t, r in zip(report.times.tolist(), traj.tolist())
        ]
        _write_csv(out / "bloch.csv", BLOCH_HEADER, rows)
        files.append({
            "path": "bloch.csv",
            "kind": "bloch_trajectory",
            "columns": list(BLOCH_HEADER),
            "lambda": report.config.lambda_max,
            "description": "Bloch vector under the specific noise channel at the largest coupling",
        })

    manifest = {"task": report.config.task, "files": files}
    _write_json(out / "manifest.json", manifest)
    _write(out / "timing.log", lambda fh: fh.writelines(f"{k} {v:.3f}s\n" for k, v in sorted(report.timing.items())))
    return manifest


def read_report(path):
    with open(path) as fh:
        return json.load(fh)

"""Run configuration, field files, trace CSVs and run manifests."""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .flow import FlowConfig, FlowTrace
from .lattice import LatticeChart

SECTION = "run"


@dataclass
class RunConfig:
    # geometry
    m: int = 1
    n_D: int = 16
    L_D: float = 2 * np.pi
    N_s: int = 64
    S: float = 8.0
    N_alpha: int = 16
    # twist
    rank: int = 2
    amp: float = 0.5
    decay: float = 1.0
    width: float = 1.0
    seed: int = 0
    # flow
    dt: float | None = None
    T_end: float = 1.0
    safety: float = 0.9
    det_one: bool = False
    cadence: int = 10
    target: float = 1e-10
    max_steps: int | None = None
    energy: bool = True
    snapshot_every: int = 0
    monitor_c_dt: float = 0.0

    def chart(self) -> LatticeChart:
        return LatticeChart(m=self.m, n_D=self.n_D, L_D=self.L_D, N_s=self.N_s, S=self.S, N_alpha=self.N_alpha)

    def flow_config(self) -> FlowConfig:
        return FlowConfig(
            dt=self.dt,
            T_end=self.T_end,
            safety=self.safety,
            det_one=self.det_one,
            cadence=self.cadence,
            target=self.target,
            max_steps=self.max_steps,
            energy=self.energy,
            snapshot_every=self.snapshot_every,
        )

    def canonical(self) -> str:
        lines = [f"[{SECTION}]"]
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if v is None else repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _convert(name: str, raw: str, default):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    raw = raw.strip()
    if raw.lower() == "none":
        if "None" not in str(kind):
            raise ValueError(f"{name} may not be none")
        return None
    if "bool" in str(kind):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if "int" in str(kind) and "float" not in str(kind):
        return int(raw)
    return float(raw)


def parse_config(text: str) -> RunConfig:
    """key = value lines; an optional [run] header; # comments."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = f"[{SECTION}]\n" + text
    parser.read_string(text)
    if not parser.has_section(SECTION):
        raise ValueError(f"missing [{SECTION}] section")
    known = {f.name: f.default for f in fields(RunConfig)}
    values = {}
    for key, raw in parser.items(SECTION):
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw, known[key])
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# -- fields --------------------------------------------------------------------------


def save_field(path, H: np.ndarray, chart: LatticeChart | None = None, **meta) -> None:
    """Site-major, row-major matrices, little-endian complex doubles, JSON sidecar."""
    path = Path(path)
    data = np.ascontiguousarray(H, dtype="<c16")
    path.write_bytes(data.tobytes())
    side = {
        "dtype": "<c16",
        "shape": list(H.shape),
        "layout": "site-major, row-major matrices",
        **meta,
    }
    if chart is not None:
        side["chart"] = {
            "m": chart.m,
            "n_D": chart.n_D,
            "L_D": chart.L_D,
            "N_s": chart.N_s,
            "S": chart.S,
            "N_alpha": chart.N_alpha,
        }
    path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def load_field(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.read_bytes(), dtype=side["dtype"]).reshape(side["shape"])
    return data.astype(complex), side


# -- traces ------------------------------------------------------------------------------

TRACE_HEADER = ["t", "sup_e_hat", "sup_sigma_H0", "L", "E", "N", "fhat_l2_sq"]


def write_trace(path, trace: FlowTrace) -> None:
    cols = trace.as_columns()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for i in range(len(trace.t)):
            w.writerow([repr(float(cols[k][i])) for k in TRACE_HEADER])


def read_trace(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in TRACE_HEADER}


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# -- manifest ---------------------------------------------------------------------------


def write_manifest(out_dir, config_hash: str, monitors: dict, version: str, started: datetime, extra=None) -> Path:
    path = Path(out_dir) / "manifest.json"
    body = {
        "config_hash": config_hash,
        "code_version": version,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "monitors": monitors,
    }
    if extra:
        body.update(extra)
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=float) + "\n")
    return path


__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "save_field",
    "load_field",
    "write_trace",
    "read_trace",
    "write_rows",
    "write_manifest",
    "TRACE_HEADER",
]

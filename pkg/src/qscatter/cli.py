"""Scenario runner.

A scenario is one JSON document::

    {"schema_version": 1, "kind": "modes", "seed": 0,
     "constants": {"hbar": 1.0, "c": 1.0},
     "output": {"path": "out/boundary", "format": "csv"},
     "parameters": {...}}

``parameters`` depends on ``kind``; see :data:`PARAMETER_SCHEMAS`.  Results
are written as ``<path>.csv`` (or ``<path>.json``) plus a
``<path>.schema.json`` column sidecar and a ``<path>.summary.json`` with the
run's residuals.  Output bytes depend only on the scenario and the seed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import filtering, limits, modes, particle, qsde
from .errors import ArgumentError, OutputError, QScatterError, ValidationError
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, PhysicalConstants, dagger, truncated_oscillator

SCHEMA_VERSION = 1
KINDS = ("modes", "limits", "particle", "qsde", "filter")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_sweep = {"oneOf": [
    {"type": "array", "items": _num, "minItems": 1},
    {"type": "object", "required": ["start", "stop", "num"], "additionalProperties": False,
     "properties": {"start": _num, "stop": _num, "num": _posint}},
]}
_operator = {"oneOf": [
    {"type": "object", "required": ["named"], "additionalProperties": False,
     "properties": {"named": {"enum": ["sigma_x", "sigma_y", "sigma_z", "identity", "zero"]},
                    "scale": _num, "dim": _posint}},
    {"type": "object", "required": ["real"], "additionalProperties": False,
     "properties": {"real": {"type": "array"}, "imag": {"type": "array"}}},
]}
_mirror = {
    "type": "object", "required": ["type", "k"], "additionalProperties": False,
    "properties": {
        "type": {"enum": ["perfect_mirror", "singular_boundary_mirror", "layer_mirror",
                          "dielectric_particle", "adiabatic_mirror"]},
        "k": _pos, "mu": {"type": "number", "minimum": 0}, "n": {"type": "number", "minimum": 1},
        "g0": _num, "gamma": _pos, "delta": _num,
    },
}
_oscillator = {
    "type": "object", "required": ["dim"], "additionalProperties": False,
    "properties": {"dim": {"type": "integer", "minimum": 2, "maximum": 256},
                   "mode": {"enum": ["ladder", "grid"]}, "mass": _pos, "omega": _pos,
                   "potential_omega": {"type": "number", "minimum": 0},
                   "initial": {"enum": ["ground", "coherent"]}, "displacement": _num},
}
_drive = {"type": "object", "required": ["beta"], "additionalProperties": False,
          "properties": {"beta": {"type": "array", "minItems": 1,
                                  "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}}}

PARAMETER_SCHEMAS = {
    "modes": {
        "type": "object", "required": ["geometry", "params", "omega"], "additionalProperties": False,
        "properties": {"geometry": {"enum": list(modes.KINDS)}, "params": {"type": "object"},
                       "omega": _sweep, "method": {"enum": ["closed_form", "oracle", "both"]}},
    },
    "limits": {
        "type": "object", "additionalProperties": False,
        "anyOf": [{"required": ["samples", "channels", "dim"]}, {"required": ["exchange"]}],
        "properties": {"samples": _posint, "channels": _posint, "dim": _posint, "scale": _pos,
                       "exchange": {"type": "object", "required": ["E00", "E0l", "Ell"],
                                    "additionalProperties": False,
                                    "properties": {"E00": _operator,
                                                   "E0l": {"type": "array", "items": _operator},
                                                   "Ell": {"type": "array",
                                                           "items": {"type": "array", "items": _operator}}}},
                       "schemes": {"type": "array", "items": {"enum": ["scheme1", "scheme2", "adiabatic"]}},
                       "gamma": _pos, "epsilons": _sweep},
    },
    "particle": {
        "type": "object", "required": ["kind", "epsilons", "ns"], "additionalProperties": False,
        "properties": {"kind": {"enum": list(particle.KINDS)}, "epsilons": _sweep, "ns": _sweep,
                       "k": _num, "shape": {"enum": list(particle.SHAPES)}, "c": _pos},
    },
    "qsde": {
        "type": "object", "required": ["task"],
        "properties": {"task": {"enum": ["langevin", "gauge"]}},
        "allOf": [
            {"if": {"properties": {"task": {"const": "langevin"}}},
             "then": {"required": ["model", "drive", "oscillator", "T", "dt"],
                      "properties": {"model": _mirror, "drive": _drive, "oscillator": _oscillator,
                                     "T": _pos, "dt": _pos}}},
            {"if": {"properties": {"task": {"const": "gauge"}}},
             "then": {"required": ["theta", "grid_points"],
                      "properties": {"theta": _num, "grid_points": _sweep, "substeps": _posint}}},
        ],
    },
    "filter": {
        "type": "object", "required": ["scheme", "model", "drive", "oscillator", "T", "dt", "trajectories"],
        "additionalProperties": False,
        "properties": {"scheme": {"enum": ["homodyne", "counting"]}, "model": _mirror, "drive": _drive,
                       "oscillator": _oscillator, "T": _pos, "dt": _pos, "trajectories": _posint},
    },
}

SCENARIO_SCHEMA = {
    "type": "object", "required": ["kind", "parameters"], "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "constants": {"type": "object", "additionalProperties": False,
                      "properties": {"hbar": _pos, "c": _pos}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}}},
        "parameters": {"type": "object"},
    },
}


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        # name the missing field itself
        missing = err.message.split("'")[1] if "'" in err.message else ""
        parts.append(missing)
    return ".".join(parts) or "<root>"


@dataclass
class Scenario:
    kind: str
    parameters: dict
    seed: int = 0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    output_path: str = "qscatter_out"
    output_format: str = "csv"

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": self.kind, "seed": self.seed,
                "constants": {"hbar": self.constants.hbar, "c": self.constants.c},
                "output": {"path": self.output_path, "format": self.output_format},
                "parameters": copy.deepcopy(self.parameters)}

    def to_json(self) -> str:
        """Canonical form: sorted keys, fixed separators."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def validate_document(doc) -> list[str]:
    if not isinstance(doc, dict):
        return ["<root>: scenario must be a JSON object"]
    out = [f"{_path(e)}: {e.message}" for e in jsonschema.Draft202012Validator(SCENARIO_SCHEMA).iter_errors(doc)]
    kind = doc.get("kind")
    params = doc.get("parameters")
    if kind in PARAMETER_SCHEMAS and isinstance(params, dict):
        v = jsonschema.Draft202012Validator(PARAMETER_SCHEMAS[kind])
        for e in sorted(v.iter_errors(params), key=lambda e: [str(x) for x in e.absolute_path]):
            path = _path(e)
            out.append(f"parameters: {e.message}" if path == "<root>" else f"parameters.{path}: {e.message}")
    return out


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document; raises :class:`ValidationError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError([f"<root>: not valid JSON ({exc.msg} at line {exc.lineno})"]) from None
    problems = validate_document(doc)
    if problems:
        raise ValidationError(problems)
    const = doc.get("constants", {})
    out = doc.get("output", {})
    return Scenario(kind=doc["kind"], parameters=doc["parameters"], seed=int(doc.get("seed", 0)),
                    constants=PhysicalConstants(float(const.get("hbar", 1.0)), float(const.get("c", 1.0))),
                    output_path=out.get("path", "qscatter_out"), output_format=out.get("format", "csv"))


def bundled_scenarios() -> list[str]:
    root = resources.files("qscatter") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str) -> Scenario:
    """Load from a file path or a bundled scenario name."""
    p = Path(ref)
    if p.is_file():
        return parse_scenario(p.read_text())
    name = ref[:-5] if ref.endswith(".json") else ref
    if name in bundled_scenarios():
        return parse_scenario((resources.files("qscatter") / "scenarios" / f"{name}.json").read_text())
    raise ArgumentError(f"no scenario file or bundled scenario named {ref!r}; bundled: {bundled_scenarios()}")


# ---------------------------------------------------------------- results

@dataclass
class Column:
    name: str
    dtype: str          # float | complex | int | str
    description: str = ""


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def flat_columns(self) -> list[tuple[str, str, str]]:
        out = []
        for c in self.columns:
            if c.dtype == "complex":
                out.append((c.name + "_re", "float", f"real part of {c.name}. {c.description}".strip()))
                out.append((c.name + "_im", "float", f"imaginary part of {c.name}. {c.description}".strip()))
            else:
                out.append((c.name, c.dtype, c.description))
        return out

    def flat_rows(self) -> list[list]:
        out = []
        for row in self.rows:
            flat = []
            for c, v in zip(self.columns, row):
                if c.dtype == "complex":
                    v = complex(v)
                    flat += [float(v.real), float(v.imag)]
                elif c.dtype == "float":
                    flat.append(float(v))
                elif c.dtype == "int":
                    flat.append(int(v))
                else:
                    flat.append(str(v))
            out.append(flat)
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def _header(s: Scenario) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": s.kind, "hbar": s.constants.hbar,
            "c": s.constants.c, "seed": s.seed}


def emit(table: ResultTable, scenario: Scenario, path: str | None = None, fmt: str | None = None) -> list[Path]:
    """Write the table, its column sidecar and the run summary; returns the paths."""
    base = Path(path or scenario.output_path)
    fmt = fmt or scenario.output_format
    header = _header(scenario)
    cols = table.flat_columns()
    rows = table.flat_rows()
    sidecar = {"header": header, "format": fmt,
               "columns": [{"name": n, "type": t, "description": d} for n, t, d in cols]}
    summary = {"header": header, "summary": _jsonable(table.summary)}
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            buf = io.StringIO()
            for k, v in header.items():
                buf.write(f"# {k}: {v}\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow([n for n, _, _ in cols])
            for r in rows:
                w.writerow([_fmt(v) for v in r])
            data_path = base.with_name(base.name + ".csv")
            data_path.write_text(buf.getvalue())
        elif fmt == "json":
            data_path = base.with_name(base.name + ".json")
            data_path.write_text(json.dumps({"header": header, "columns": [n for n, _, _ in cols],
                                             "rows": _jsonable(rows)}, indent=1, sort_keys=True) + "\n")
        else:
            raise ArgumentError(f"unknown output format {fmt!r}")
        schema_path = base.with_name(base.name + ".schema.json")
        schema_path.write_text(json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
        summary_path = base.with_name(base.name + ".summary.json")
        summary_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write results under {base}: {exc}") from exc
    return [data_path, schema_path, summary_path]


def read_csv(path) -> tuple[dict, list[str], list[list]]:
    """Read back a CSV written by :func:`emit` (header dict, column names, rows)."""
    header, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, v = line[2:].split(": ", 1)
            header[k] = v
        else:
            lines.append(line)
    rows = list(csv.reader(lines))
    cols = rows[0] if rows else []
    body = [[_parse_cell(c) for c in r] for r in rows[1:]]
    return header, cols, body


def _parse_cell(c: str):
    try:
        return int(c)
    except ValueError:
        pass
    try:
        return float(c)
    except ValueError:
        return c


# ---------------------------------------------------------------- builders

def _grid(sweep) -> np.ndarray:
    if isinstance(sweep, dict):
        return np.linspace(sweep["start"], sweep["stop"], sweep["num"])
    return np.asarray(sweep, dtype=float)


def build_operator(op: dict, dim: int | None = None) -> np.ndarray:
    if "named" in op:
        name, scale = op["named"], op.get("scale", 1.0)
        d = op.get("dim", dim or 2)
        base = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z,
                "identity": np.eye(d), "zero": np.zeros((d, d))}[name]
        return scale * np.asarray(base, dtype=complex)
    re = np.asarray(op["real"], dtype=float)
    im = np.asarray(op.get("imag", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise ArgumentError(f"explicit operator must be square with matching real/imag parts, got {re.shape}")
    return re + 1j * im


def build_exchange(doc: dict) -> limits.ExchangeMatrix:
    e00 = build_operator(doc["E00"])
    d = e00.shape[0]
    e0l = np.array([build_operator(o, d) for o in doc["E0l"]])
    ell = np.array([[build_operator(o, d) for o in row] for row in doc["Ell"]])
    m = e0l.shape[0]
    if ell.shape[:2] != (m, m):
        raise ValidationError([f"parameters.exchange.Ell: expected {m}x{m} blocks, got {ell.shape[:2]}"])
    return limits.ExchangeMatrix(e00, e0l, dagger(e0l), ell)


def build_mirror(model: dict, osc: dict, hbar: float) -> qsde.MirrorModel:
    dim, mass = osc["dim"], osc.get("mass", 1.0)
    omega = osc.get("omega", 1.0)
    q, p = truncated_oscillator(dim, mass=mass, mode=osc.get("mode", "ladder"), omega=omega, hbar=hbar)
    w_pot = osc.get("potential_omega", omega)
    kw = dict(mass=mass, hbar=hbar, potential=qsde.harmonic_potential(mass, w_pot) if w_pot > 0 else None)
    if osc.get("mode", "ladder") == "grid":
        kw["edges"] = (0, -1)
    kind, k = model["type"], model["k"]
    try:
        if kind == "perfect_mirror":
            return qsde.perfect_mirror(q, p, k, **kw)
        if kind == "singular_boundary_mirror":
            return qsde.singular_boundary_mirror(q, p, k, model["mu"], **kw)
        if kind == "layer_mirror":
            return qsde.layer_mirror(q, p, k, model["n"], **kw)
        if kind == "dielectric_particle":
            return qsde.dielectric_particle(q, p, k, model["mu"], **kw)
        return qsde.adiabatic_mirror(q, p, k, model["g0"], model["gamma"], model["delta"], **kw)
    except KeyError as exc:
        raise ValidationError([f"parameters.model.{exc.args[0]}: required for model type {kind!r}"]) from None


def build_drive(d: dict) -> qsde.CoherentDrive:
    return qsde.CoherentDrive(np.array([complex(re, im) for re, im in d["beta"]]))


def initial_state(osc: dict, model: qsde.MirrorModel) -> np.ndarray:
    d = model.dim
    if osc.get("initial", "ground") == "ground":
        w, v = np.linalg.eigh(model.H)
        psi = v[:, 0]
    else:
        from scipy.linalg import expm
        alpha = osc.get("displacement", 0.0)
        a = np.diag(np.sqrt(np.arange(1, d)), 1)
        psi = expm(alpha * (a.T - a))[:, 0]
    return np.outer(psi, psi.conj())


# ---------------------------------------------------------------- runners

def run_modes(s: Scenario) -> ResultTable:
    prm = s.parameters
    kind, params = prm["geometry"], dict(prm["params"])
    method = prm.get("method", "closed_form")
    omegas = _grid(prm["omega"])
    mirror = kind in modes.MIRROR_KINDS
    names = ["r_r"] if mirror else ["t_rr", "t_rl", "t_lr", "t_ll"]
    cols = [Column("omega", "float", "angular frequency")]
    cols += [Column(n, "complex", "scattering coefficient") for n in names]
    if mirror:
        cols.append(Column("unitarity_res", "float", "| |r| - 1 |"))
    else:
        cols += [Column(f"flux_res_{i}", "float", f"flux identity {i} residual") for i in (1, 2, 3)]
    if method == "both":
        cols.append(Column("oracle_diff", "float", "max |closed form - boundary oracle|"))
    table = ResultTable(cols)
    model = modes.model_for(kind, **params) if method in ("oracle", "both") else None
    n_r = params.get("n_r", 1.0)
    n_l = params.get("n_l", 1.0)
    worst = 0.0
    for om in omegas:
        if method == "oracle":
            cf = modes.boundary_oracle(model, float(om), s.constants)
        else:
            cf = modes.closed_form(kind, float(om), s.constants, **params)
        vals = [cf.r_r] if mirror else [cf.t_rr, cf.t_rl, cf.t_lr, cf.t_ll]
        row = [float(om)] + [complex(v) for v in vals]
        if mirror:
            res = [abs(abs(complex(cf.r_r)) - 1.0)]
        else:
            res = [float(x) for x in modes.flux_residuals(cf, n_r, n_l)]
        row += res
        worst = max([worst] + res)
        if method == "both":
            orc = modes.boundary_oracle(model, float(om), s.constants)
            ov = [orc.r_r] if mirror else [orc.t_rr, orc.t_rl, orc.t_lr, orc.t_ll]
            row.append(float(max(abs(complex(a) - complex(b)) for a, b in zip(vals, ov))))
        table.rows.append(row)
    table.summary = {"geometry": kind, "points": len(omegas), "max_invariant_residual": worst}
    if method == "both" and table.rows:
        table.summary["max_oracle_diff"] = max(r[-1] for r in table.rows)
    return table


def run_limits(s: Scenario) -> ResultTable:
    prm = s.parameters
    rng = np.random.default_rng(s.seed)
    schemes = prm.get("schemes", ["scheme1", "scheme2"])
    fixed = build_exchange(prm["exchange"]) if "exchange" in prm else None
    if fixed is not None:
        m, d, samples = fixed.m, fixed.dim, 1
    else:
        m, d, samples = prm["channels"], prm["dim"], prm["samples"]
    scale = prm.get("scale", 1.0)
    gamma = prm.get("gamma", 1.0)
    table = ResultTable([Column("sample", "int"), Column("scheme", "str"),
                         Column("s_unitarity", "float", "max |S^dag S - I|"),
                         Column("h_hermiticity", "float", "max |H - H^dag|"),
                         Column("g_isometry", "float", "Ito isometry residual of the QSDE coefficients"),
                         Column("g_coisometry", "float", "Ito co-isometry residual")])
    worst = 0.0
    for i in range(samples):
        E = fixed if fixed is not None else limits.ExchangeMatrix.random(rng, m, d, scale)
        for name in schemes:
            if name == "scheme1":
                t = limits.scheme1_triple(E)
            elif name == "scheme2":
                t = limits.scheme2_triple(E)
            else:
                t = limits.adiabatic_triple(E.E00, E.E0l[0], E.El0[0], E.Ell[0, 0], gamma)
            iso, co = limits.qsde_generator(t).unitarity_residuals()
            vals = [t.unitarity_residual(), t.hermiticity_residual(), iso, co]
            worst = max([worst] + vals)
            table.rows.append([i, name] + vals)
    table.summary = {"samples": samples, "max_residual": worst}
    if "epsilons" in prm:
        eps = _grid(prm["epsilons"])
        E = fixed if fixed is not None else limits.ExchangeMatrix.random(rng, m, d, scale)
        disc = limits.scheme_discrepancy(E, eps)
        table.summary["discrepancy"] = {"epsilon": eps, "norm": disc,
                                        "loglog_slope": limits.loglog_slope(eps, disc)}
    return table


def run_particle(s: Scenario) -> ResultTable:
    prm = s.parameters
    rows = particle.sweep(prm["kind"], _grid(prm["epsilons"]), _grid(prm["ns"]), k=prm.get("k", 1.0),
                          shape=prm.get("shape", "raised_cosine"), c=prm.get("c", 1.0))
    table = ResultTable([Column("epsilon", "float"), Column("n", "float", "mollifier sharpness"),
                         Column("s", "complex", "numerical phase jump"),
                         Column("abs_error", "float", "distance to the limiting law")], rows=[list(r) for r in rows])
    table.summary = {"kind": prm["kind"], "max_abs_error": max((r[3] for r in rows), default=0.0),
                     "max_unimodularity_res": max((abs(abs(r[2]) - 1) for r in rows), default=0.0)}
    return table


def run_qsde(s: Scenario) -> ResultTable:
    prm = s.parameters
    if prm["task"] == "gauge":
        theta = float(prm["theta"])
        table = ResultTable([Column("grid_points", "int"), Column("deviation", "float",
                                                                  "L2 gap to the exact gauge action")])
        for N in _grid(prm["grid_points"]).astype(int):
            _, out, ini = qsde.smeared_gauge_product(np.array([[theta]]), [1.0],
                                                     lambda x: np.sqrt(2) * np.sin(np.pi * x), 1.0, int(N),
                                                     substeps=prm.get("substeps", 8))
            ref = qsde.one_photon_gauge_reference(np.exp(-1j * np.array([[theta]])), ini)
            table.rows.append([int(N), float(np.linalg.norm(out - ref))])
        table.summary = {"theta": theta}
        return table
    hbar = s.constants.hbar
    model = build_mirror(prm["model"], prm["oscillator"], hbar)
    drive = build_drive(prm["drive"])
    if drive(0.0).shape != (model.channels,):
        raise ValidationError([f"parameters.drive.beta: model has {model.channels} channel(s)"])
    rho0 = initial_state(prm["oscillator"], model)
    ms = qsde.langevin_moments(model, drive, rho0, prm["T"], prm["dt"])
    mass = prm["oscillator"].get("mass", 1.0)
    w_pot = prm["oscillator"].get("potential_omega", prm["oscillator"].get("omega", 1.0))
    dpdt = np.gradient(ms.p, ms.t, edge_order=2)
    force_line = dpdt + mass * w_pot ** 2 * ms.q
    F = qsde.radiation_pressure_force(model, drive)
    table = ResultTable([Column("t", "float"), Column("q", "float", "<q>"), Column("p", "float", "<p>"),
                         Column("var_q", "float"), Column("var_p", "float"),
                         Column("trace_residual", "float", "|tr rho - 1| before renormalisation"),
                         Column("force_line", "float", "d<p>/dt + m w^2 <q>")])
    for i in range(ms.t.size):
        table.rows.append([ms.t[i], ms.q[i], ms.p[i], ms.var_q[i], ms.var_p[i], ms.trace_residual[i],
                           force_line[i]])
    table.summary = {"mean_force_operator_expectation": float(np.trace(rho0 @ F).real),
                     "force_line_mean": float(force_line.mean()),
                     "force_line_max_dev_from_mean": float(np.max(np.abs(force_line - force_line.mean()))),
                     "max_trace_residual": float(ms.trace_residual.max()),
                     "q_equation_residual": float(np.max(np.abs(np.gradient(ms.q, ms.t, edge_order=2)
                                                                - ms.p / mass)))}
    return table


def run_filter(s: Scenario) -> ResultTable:
    prm = s.parameters
    model = build_mirror(prm["model"], prm["oscillator"], s.constants.hbar)
    drive = build_drive(prm["drive"])
    if drive(0.0).shape != (model.channels,):
        raise ValidationError([f"parameters.drive.beta: model has {model.channels} channel(s)"])
    cfg = filtering.FilterConfig(prm["scheme"], model, drive, initial_state(prm["oscillator"], model),
                                 prm["dt"], prm["T"], seed=s.seed, trajectories=prm["trajectories"])
    res = filtering.run_ensemble(cfg)
    table = ResultTable([Column("t", "float"), Column("mean_q", "float"), Column("mean_p", "float"),
                         Column("uncond_q", "float"), Column("uncond_p", "float")])
    mo, uo = res.mean_observables, res.unconditional_observables
    for i in range(res.times.size):
        table.rows.append([res.times[i], mo["q"][i], mo["p"][i], uo["q"][i], uo["p"][i]])
    stats = res.innovation_stats()
    table.summary = {"scheme": prm["scheme"], "trajectories": prm["trajectories"], "gap": res.gap,
                     "gap_bound": 5 / math.sqrt(prm["trajectories"]), "mean_trace": res.mean_trace,
                     "max_sme_trace": res.max_sme_trace, "max_trace_error": res.max_trace_error,
                     "min_eigenvalue": res.min_eigenvalue, "max_rate_residual": res.max_rate_residual,
                     "innovation_mean": stats["mean"], "innovation_var": stats["var"],
                     "failures": res.failures}
    if stats["histogram"] is not None:
        table.summary["jump_histogram"] = stats["histogram"]
    return table


RUNNERS = {"modes": run_modes, "limits": run_limits, "particle": run_particle, "qsde": run_qsde,
           "filter": run_filter}


def run_scenario(s: Scenario, path: str | None = None, fmt: str | None = None) -> tuple[ResultTable, list[Path]]:
    table = RUNNERS[s.kind](s)
    return table, emit(table, s, path, fmt)


# ---------------------------------------------------------------- check

def invariant_checks(seed: int = 0) -> list[tuple[str, float, float]]:
    """Fast invariant suite: ``(name, value, tolerance)`` triples."""
    rng = np.random.default_rng(seed)
    out = []
    worst = 0.0
    for _ in range(20):
        n_r, n_l = rng.uniform(1, 3, 2)
        q, om = rng.uniform(-1, 1), rng.uniform(0.2, 3)
        mdl = modes.model_for("two_sided_boundary", n_r=n_r, n_l=n_l, q=q)
        a = modes.closed_form("two_sided_boundary", om, n_r=n_r, n_l=n_l, q=q).as_array()
        b = modes.boundary_oracle(mdl, om).as_array()
        worst = max(worst, float(np.nanmax(np.abs(a - b))), *modes.flux_residuals(modes.boundary_oracle(mdl, om), n_r, n_l))
    out.append(("modes: closed form vs oracle and flux", worst, 1e-10))
    worst = 0.0
    for _ in range(20):
        E = limits.ExchangeMatrix.random(rng, 2, 2)
        for t in (limits.scheme1_triple(E), limits.scheme2_triple(E)):
            worst = max(worst, t.unitarity_residual(), t.hermiticity_residual(),
                        *limits.qsde_generator(t).unitarity_residuals())
    out.append(("limits: unitarity, hermiticity, Ito", worst, 1e-10))
    eps = np.logspace(-3, -1, 7)
    E = limits.ExchangeMatrix.random(rng, 3, 1)
    out.append(("limits: discrepancy slope - 3", abs(limits.loglog_slope(eps, limits.scheme_discrepancy(E, eps)) - 3), 0.1))
    res = particle.solve(particle.ScatterProblem("scalar_delta", 1.0, 1.0, particle.Mollifier("box", 256)))
    out.append(("particle: scalar jump", res.error, 1e-3))
    out.append(("qsde: Ito table", max(qsde.ito_residual(qsde.BinnedField(2, 1, 0.01)).get(k) for k in
                                       ("lambda_projector", "lambda_table_one_photon", "dB_dBdag_operator")), 1e-14))
    q, p = truncated_oscillator(6)
    mm = qsde.perfect_mirror(q, p, 0.3)
    drive = qsde.CoherentDrive(1.0)
    out.append(("qsde: perfect-mirror force", float(np.max(np.abs(qsde.radiation_pressure_force(mm, drive)
                                                                 + 0.6 * np.eye(6)))), 1e-12))
    from .operators import random_density
    rho = random_density(rng, 6)
    out.append(("filter: generator trace", abs(np.trace(filtering.generator(rho, mm, drive, 0.0))), 1e-12))
    return out


# ---------------------------------------------------------------- entry point

def _global_flags(ap: argparse.ArgumentParser, default=None):
    ap.add_argument("--seed", type=int, default=default, help="override the scenario seed")
    ap.add_argument("--out", default=default, help="output path prefix (extensions are added)")
    ap.add_argument("--format", choices=["csv", "json"], default=default, help="output format")
    ap.add_argument("--hbar", type=float, default=default, help="override the reduced Planck constant")
    ap.add_argument("--c", type=float, default=default, help="override the speed of light")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qscatter", description="Run qscatter scenarios.")
    _global_flags(ap)
    # the same flags after the subcommand; SUPPRESS keeps them from clobbering earlier values
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)
    for k in KINDS:
        sp = sub.add_parser(k, parents=[common], help=f"run a {k} scenario")
        sp.add_argument("scenario", help="scenario JSON file or bundled scenario name")
    sub.add_parser("check", parents=[common], help="run the invariant suite")
    sub.add_parser("list", help="list bundled scenarios")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            print("\n".join(bundled_scenarios()))
            return 0
        if args.command == "check":
            failed = 0
            for name, val, tol in invariant_checks(args.seed or 0):
                ok = val < tol
                failed += not ok
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {val:.3e} (tol {tol:.0e})")
            return 0 if failed == 0 else 3
        s = load_scenario(args.scenario)
        if s.kind != args.command:
            raise ValidationError([f"kind: scenario is {s.kind!r}, command is {args.command!r}"])
        if args.seed is not None:
            s.seed = args.seed
        if args.hbar is not None or args.c is not None:
            s.constants = PhysicalConstants(args.hbar or s.constants.hbar, args.c or s.constants.c)
        _, paths = run_scenario(s, args.out, args.format)
        for p in paths:
            print(p)
        return 0
    except ValidationError as exc:
        for v in exc.violations:
            print(f"validation error: {v}", file=sys.stderr)
        return exc.exit_code
    except QScatterError as exc:
        ctx = args.command + (f" {args.scenario}" if hasattr(args, "scenario") else "")
        print(f"{type(exc).__name__} [{ctx}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

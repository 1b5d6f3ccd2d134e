"""Persistence: atomic writes, 17-digit number formatting and constant fixtures.

A constants file holds a list of fixture records.  Each record is keyed by
``specHash``, the SHA-256 of its canonical ``{name, spec, cfg}``, so an
estimate made for one grid step or drift cannot be picked up for another.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import jsonschema

from .asymptotics import ConstantInputs
from .constants import ConstantEstimate
from .errors import MissingConstant
from .model import Case, ModelParams, classify, derive

SCHEMA_VERSION = 1
_REL_TOL = 1e-9

FIXTURE_SCHEMA = {
    "type": "object",
    "required": ["schemaVersion", "specHash", "name", "spec", "cfg", "value", "stdErr", "nPaths",
                 "horizonT", "gridStep", "converged"],
    "properties": {
        "schemaVersion": {"const": SCHEMA_VERSION},
        "specHash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "name": {"enum": ["pickands", "discrete_pickands", "piterbarg"]},
        "spec": {"type": "object"},
        "cfg": {"type": "object"},
        "value": {"type": "number", "exclusiveMinimum": 0},
        "stdErr": {"type": "number", "minimum": 0},
        "nPaths": {"type": "integer", "minimum": 2},
        "horizonT": {"type": "number"},
        "gridStep": {"type": "number"},
        "converged": {"type": "boolean"},
    },
}

BUNDLE_SCHEMA = {
    "type": "object",
    "required": ["schemaVersion", "constants"],
    "properties": {
        "schemaVersion": {"const": SCHEMA_VERSION},
        "constants": {"type": "array", "items": FIXTURE_SCHEMA},
    },
}


class SchemaError(ValueError):
    """Input file or arguments do not match the published schema."""


def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _plain(obj.item())
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def format_number(x: float) -> str:
    return format(x, ".17g")


def _encode(obj) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_number(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(v)}" for k, v in obj.items()) + "}"
    return "[" + ", ".join(_encode(v) for v in obj) + "]"


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits; non-finite floats become ``null``."""
    return _encode(_plain(obj))


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --- constant fixtures ----------------------------------------------------------


def _canonical_numbers(obj):
    # 3 and 3.0 must hash alike: a fixture written as "-3" reads back as an int
    if isinstance(obj, dict):
        return {k: _canonical_numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_canonical_numbers(v) for v in obj]
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return format_number(float(obj))
    return obj


def spec_hash(name: str, spec: dict, cfg: dict) -> str:
    payload = _canonical_numbers(_plain({"name": name, "spec": spec, "cfg": cfg}))
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


_SPEC_KEYS = {
    "pickands": ("two_h",),
    "discrete_pickands": ("alpha",),
    "piterbarg": ("spec", "gamma"),
}


def fixture_record(est: ConstantEstimate) -> dict:
    """Fixture record for an estimate; the spec is pulled from its recorded configuration."""
    name = est.kind
    config = dict(est.config)
    # scheduling knobs do not change the estimate
    for key in ("threads", "raise_on_failure"):
        config.pop(key, None)
    spec = {key: config.pop(key) for key in _SPEC_KEYS[name]}
    if name == "piterbarg":
        spec = {**spec.pop("spec"), "gamma": spec["gamma"]}
    cfg = _plain({**config, "method": est.method})
    record = {
        "schemaVersion": SCHEMA_VERSION,
        "specHash": spec_hash(name, spec, cfg),
        "name": name,
        "spec": spec,
        "cfg": cfg,
        "value": est.value,
        "stdErr": est.std_err,
        "nPaths": est.n_paths,
        "horizonT": est.horizon_T,
        "gridStep": est.grid_step,
        "converged": est.converged,
    }
    if est.mesh_gap is not None:
        record["meshGap"] = est.mesh_gap
        record["extrapolated"] = est.extrapolated
    return _plain(record)


def validate_bundle(bundle: dict) -> dict:
    try:
        jsonschema.validate(bundle, BUNDLE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"constants file: {exc.message}") from None
    for rec in bundle["constants"]:
        if spec_hash(rec["name"], rec["spec"], rec["cfg"]) != rec["specHash"]:
            raise SchemaError(f"constants file: specHash mismatch for {rec['name']} {rec['spec']}")
    return bundle


def load_bundle(path) -> dict:
    try:
        bundle = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"constants file is not JSON: {exc}") from None
    return validate_bundle(bundle)


def merge_records(bundle: dict | None, records: list[dict]) -> dict:
    """Add records, replacing any with the same ``specHash``."""
    existing = list((bundle or {}).get("constants", []))
    new_hashes = {r["specHash"] for r in records}
    kept = [r for r in existing if r["specHash"] not in new_hashes]
    return {"schemaVersion": SCHEMA_VERSION, "constants": kept + records}


def _close(a, b) -> bool:
    return math.isclose(a, b, rel_tol=_REL_TOL, abs_tol=1e-12)


def _find(bundle, name, **spec):
    for rec in bundle["constants"]:
        if rec["name"] != name:
            continue
        if all(key in rec["spec"] and _close(rec["spec"][key], val) for key, val in spec.items()):
            return rec
    return None


def constant_inputs_for(params: ModelParams, bundle: dict | None) -> tuple[ConstantInputs, list]:
    """Select the fixtures the asymptote of ``params`` needs.

    Returns the inputs and the list of records used (provenance).  Constants
    that are absent are left unset; the asymptote then raises
    ``MissingConstant`` if it needs them.
    """
    bundle = bundle or {"constants": []}
    kw, used = {}, []
    H = params.H
    cls = classify(params)
    if cls.case is Case.CASE_TWO_INTERIOR and abs(H - 0.5) < 1e-12:
        q = derive(params)
        for role, offset in (("upper", 0.0), ("lower", q.d_delta_offset)):
            rec = _find(bundle, "piterbarg", slope_neg=q.d_slope_neg, slope_pos=q.d_slope_pos,
                        offset_pos=offset, gamma=q.gamma)
            if rec:
                kw[f"piterbarg_{role}"] = rec["value"]
                kw[f"piterbarg_{role}_se"] = rec["stdErr"]
                used.append(rec)
        kw["piterbarg_gamma"] = q.gamma
    elif cls.case is not Case.CASE_TWO_INTERIOR:
        c, _ = params.line(cls.index)
        if abs(H - 0.5) < 1e-12:
            alpha = 2.0 * c * c * params.delta
            rec = _find(bundle, "discrete_pickands", alpha=alpha)
            kw["discrete_alpha"] = alpha
            if rec:
                kw["discrete_pickands"], kw["discrete_pickands_se"] = rec["value"], rec["stdErr"]
                used.append(rec)
        elif H > 0.5:
            rec = _find(bundle, "pickands", two_h=2 * H)
            kw["pickands_twoh"] = 2 * H
            if rec:
                kw["pickands_2h"], kw["pickands_2h_se"] = rec["value"], rec["stdErr"]
                used.append(rec)
    return ConstantInputs(**kw), used


def require_constants(params: ModelParams, bundle: dict | None) -> tuple[ConstantInputs, list]:
    """Like ``constant_inputs_for`` but raises when a needed fixture is absent."""
    k, used = constant_inputs_for(params, bundle)
    cls = classify(params)
    needed = 0
    if cls.case is Case.CASE_TWO_INTERIOR:
        needed = 2 if abs(params.H - 0.5) < 1e-12 else 0
    elif params.H >= 0.5 - 1e-12:
        needed = 1
    if len(used) < needed:
        raise MissingConstant(f"constants file lacks {needed - len(used)} fixture(s) needed for {cls.tag}, H={params.H}")
    return k, used

"""JSON instance files: parsing, generators, serialisation and digests.

An instance file is a JSON object with ``frame_time``, ``wavelengths`` and
either an explicit ``stations`` list or a ``generator`` block::

    {"frame_time": 8, "wavelengths": 4,
     "generator": {"count": 16, "gamma": {"kind": "linear", "slope": 0.5},
                   "nu": 0.5, "mu": 0.5, "switchover": 0.2}}

A generator parameter is a number (same for every station), a linear rule
``intercept + slope * i`` over station numbers ``i = 1..count``, or a uniform
draw on ``[low, high)``. Uniform draws need ``seed``; they are taken from one
PCG64 stream in the fixed field order gamma, theta, nu, mu, switchover,
``count`` values per field.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import numpy as np

from .model import ExponentialModel, Instance, StationParams, TrafficClass, check_concavity

GENERATED_FIELDS = ("gamma", "theta", "nu", "mu", "switchover")
TABLES = ("I", "II", "III", "IV", "V", "VI", "VII", "IX")


class InstanceParseError(ValueError):
    """Malformed instance document; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = "", source: str = "<instance>"):
        self.path = path
        self.source = source
        where = f"{source}: {path}: " if path else f"{source}: "
        super().__init__(where + message)


def _schema() -> dict:
    text = resources.files("wdm_revenue").joinpath("data/instance.schema.json").read_text()
    return json.loads(text)


_VALIDATOR = jsonschema.Draft202012Validator(_schema())


def _field_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _validate(doc: Any, source: str) -> None:
    if isinstance(doc, dict):
        has_s, has_g = "stations" in doc, "generator" in doc
        if has_s and has_g:
            raise InstanceParseError("give either 'stations' or 'generator', not both", "", source)
        if not has_s and not has_g:
            raise InstanceParseError("one of 'stations' or 'generator' is required", "", source)
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise InstanceParseError(err.message, _field_path(err.absolute_path), source)


def expand_generator(gen: Mapping[str, Any]) -> list[dict]:
    """Turn a generator block into explicit station dictionaries."""
    n = int(gen["count"])
    idx = np.arange(1, n + 1, dtype=float)
    rng = None
    values = {}
    for field in GENERATED_FIELDS:
        rule = gen.get(field, 0.0)
        if isinstance(rule, (int, float)):
            values[field] = np.full(n, float(rule))
        elif rule["kind"] == "linear":
            values[field] = rule.get("intercept", 0.0) + rule["slope"] * idx
        else:
            if "seed" not in gen:
                raise InstanceParseError("uniform draws need a seed", f"generator.{field}")
            if rng is None:
                rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(gen["seed"]))))
            values[field] = rng.uniform(rule["low"], rule["high"], n)
    return [
        {"id": i + 1, **{f: float(values[f][i]) for f in GENERATED_FIELDS}} for i in range(n)
    ]


def _station(d: Mapping[str, Any], path: str, source: str) -> StationParams:
    try:
        classes = tuple(
            TrafficClass(c["rate"], c["profit"], c.get("penalty", 0.0)) for c in d.get("classes", ())
        )
        return StationParams(
            station_id=int(d["id"]),
            gamma=d.get("gamma"),
            theta=d.get("theta"),
            retry_rate=float(d["nu"]),
            drop_decay=float(d["mu"]),
            switchover=float(d.get("switchover", 0.0)),
            classes=classes,
        )
    except ValueError as exc:
        raise InstanceParseError(str(exc), path, source) from None


def instance_from_dict(doc: Any, source: str = "<instance>", warn: bool = True) -> Instance:
    """Validate a decoded document and build the :class:`Instance`.

    With ``warn`` a :class:`ConcavityWarning` is raised for stations whose
    revenue curve fails the concavity grid test.
    """
    _validate(doc, source)
    if "generator" in doc:
        try:
            raw = expand_generator(doc["generator"])
        except InstanceParseError as exc:
            raise InstanceParseError(str(exc).split(": ", 2)[-1], exc.path, source) from None
        prefix = "generator"
    else:
        raw = doc["stations"]
        prefix = "stations"
    stations = [_station(d, f"{prefix}[{i}]", source) for i, d in enumerate(raw)]
    try:
        inst = Instance(tuple(stations), int(doc["wavelengths"]), float(doc["frame_time"]))
    except ValueError as exc:
        raise InstanceParseError(str(exc), prefix, source) from None
    if warn:
        check_concavity(inst)
    return inst


def parse_instance(text: str, source: str = "<instance>", warn: bool = True) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(exc.msg, f"line {exc.lineno} column {exc.colno}", source) from None
    return instance_from_dict(doc, source, warn)


def load_instance(path: str | Path, warn: bool = True) -> Instance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InstanceParseError(exc.strerror or str(exc), "", str(path)) from None
    return parse_instance(text, str(path), warn)


def instance_to_dict(instance: Instance) -> dict:
    """Explicit-station document for ``instance`` (generators are expanded)."""
    stations = []
    for s in instance.stations:
        model = s.probability_model
        if not isinstance(model, ExponentialModel):
            raise ValueError("only the exponential model can be written to an instance file")
        d: dict[str, Any] = {"id": s.station_id}
        if s.classes:
            d["classes"] = [
                {"rate": c.arrival_rate, "profit": c.profit_per_packet, "penalty": c.penalty_per_packet}
                for c in s.classes
            ]
        else:
            d["gamma"] = float(s.gamma)
            d["theta"] = float(s.theta)
        d.update(nu=float(model.retry_rate), mu=float(model.drop_decay), switchover=float(s.switchover))
        stations.append(d)
    return {
        "frame_time": float(instance.frame_time),
        "wavelengths": int(instance.wavelengths),
        "stations": stations,
    }


def dump_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def instance_digest(instance: Instance) -> str:
    """SHA-256 of the canonical compact JSON of ``instance``."""
    canon = json.dumps(instance_to_dict(instance), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def table_path(table_id: str) -> Path:
    """Bundled instance file for a table of the worked examples (I..VII, IX)."""
    tid = table_id.upper()
    if tid not in TABLES:
        raise KeyError(f"no bundled instance for table {table_id!r}; known: {', '.join(TABLES)}")
    return Path(str(resources.files("wdm_revenue").joinpath(f"data/tables/table_{tid}.json")))


def load_table(table_id: str) -> Instance:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return load_instance(table_path(table_id))

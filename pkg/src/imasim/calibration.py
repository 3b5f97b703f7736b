"""Calibration bundle: every tunable constant of the cost model in one place.

The shipped `calibration/default.json` contains the defaults; a user file
passed via `--calibration` overrides any subset of fields. Fitted constants
(eta_dw, energy parameters, cluster area) are labeled as such in the file
and in report headers.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources

from .metrics import AreaModel, EnergyModel
from .timing import ClusterConfig, ImaTiming

SCHEMA_VERSION = 1


@dataclass(frozen=True, slots=True)
class Calibration:
    cluster: ClusterConfig
    ima: ImaTiming
    area: AreaModel
    energy: EnergyModel
    note: str = ""


_SECTIONS = {
    "cluster": ClusterConfig,
    "ima": ImaTiming,
    "area": AreaModel,
    "energy": EnergyModel,
}


def calibration_from_dict(d: dict) -> Calibration:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported calibration schema_version {d.get('schema_version')!r}")
    parts = {}
    for section, cls in _SECTIONS.items():
        fields = {f.name for f in dataclasses.fields(cls)}
        given = d.get(section, {})
        unknown = set(given) - fields
        if unknown:
            raise ValueError(f"unknown {section} calibration keys: {sorted(unknown)}")
        parts[section] = cls(**given)
    return Calibration(note=d.get("note", ""), **parts)


def calibration_to_dict(cal: Calibration) -> dict:
    d = {"schema_version": SCHEMA_VERSION, "note": cal.note}
    for section in _SECTIONS:
        d[section] = dataclasses.asdict(getattr(cal, section))
    return d


def load_calibration(path: str) -> Calibration:
    with open(path) as f:
        return calibration_from_dict(json.load(f))


def default_calibration() -> Calibration:
    text = resources.files("imasim").joinpath("calibration/default.json").read_text()
    return calibration_from_dict(json.loads(text))

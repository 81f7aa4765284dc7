"""Instance file I/O and random instance generation.

Wire format is JSON with kilometers and degrees; everything internal is
canonical units and radians.  The bundled ``gps18`` dataset ships in
``data/``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .astro import CanonicalScale, CircularOrbit, PropulsionParams
from .model import DepotPlacement, Instance, Satellite

# Default parameter set used by the generator (GPS-era servicing study
# values: chemical launch/depot stages, electric servicer).
DEFAULT_PARAMS: dict[str, float] = {
    "m_max_l": 12950.0,
    "r0": 7000.0,
    "r_min": 7000.0,
    "g0": 9.81,
    "isp_launch": 457.0,
    "isp_depot": 320.0,
    "isp_servicer": 1790.0,
    "m_dry_s": 500.0,
    "m_dry_d": 1500.0,
}
DEFAULT_SCALE: dict[str, float] = {"du_km": 26560.0, "mu_km3s2": 398600.4418}
DEFAULT_PAYLOAD_KG = 100.0


class InstanceFormatError(ValueError):
    """Raised when an instance document is malformed; message names the field."""


def _require(doc: dict, key: str, kind: type, where: str) -> Any:
    if key not in doc:
        raise InstanceFormatError(f"{where}: missing field '{key}'")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InstanceFormatError(f"{where}.{key}: expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, kind):
        raise InstanceFormatError(
            f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    n_d = _require(doc, "n_d", int, "instance")
    n_v = _require(doc, "n_v", int, "instance")
    scale_doc = _require(doc, "scale", dict, "instance")
    scale = CanonicalScale(
        du_km=_require(scale_doc, "du_km", float, "scale"),
        mu_km3s2=_require(scale_doc, "mu_km3s2", float, "scale"),
    )
    params = _require(doc, "params", dict, "instance")
    prop = PropulsionParams(
        isp_launch=_require(params, "isp_launch", float, "params"),
        isp_depot=_require(params, "isp_depot", float, "params"),
        isp_servicer=_require(params, "isp_servicer", float, "params"),
        g0=_require(params, "g0", float, "params"),
    )
    sats_doc = _require(doc, "satellites", list, "instance")
    if not sats_doc:
        raise InstanceFormatError("satellites: must contain at least one entry")
    satellites = []
    for pos, entry in enumerate(sats_doc):
        where = f"satellites[{pos}]"
        if not isinstance(entry, dict):
            raise InstanceFormatError(f"{where}: expected an object")
        orbit = CircularOrbit(
            a=scale.to_du(_require(entry, "a_km", float, where)),
            i=math.radians(_require(entry, "i_deg", float, where)),
            raan=math.radians(_require(entry, "raan_deg", float, where)),
        )
        satellites.append(Satellite(orbit, _require(entry, "payload_kg", float, where)))
    depots = None
    if doc.get("depots_initial") is not None:
        depots_doc = _require(doc, "depots_initial", list, "instance")
        depots = tuple(
            CircularOrbit(
                a=scale.to_du(_require(entry, "a_km", float, f"depots_initial[{pos}]")),
                i=math.radians(_require(entry, "i_deg", float, f"depots_initial[{pos}]")),
                raan=math.radians(
                    _require(entry, "raan_deg", float, f"depots_initial[{pos}]")
                ),
            )
            for pos, entry in enumerate(depots_doc)
        )
    try:
        return Instance(
            satellites=tuple(satellites),
            n_d=n_d,
            n_v=n_v,
            m_dry_s=_require(params, "m_dry_s", float, "params"),
            m_dry_d=_require(params, "m_dry_d", float, "params"),
            m_max_l=_require(params, "m_max_l", float, "params"),
            r0=scale.to_du(_require(params, "r0", float, "params")),
            r_min=scale.to_du(_require(params, "r_min", float, "params")),
            prop=prop,
            scale=scale,
            depots_initial=depots,
        )
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


def instance_to_dict(inst: Instance) -> dict:
    sc = inst.scale
    doc: dict[str, Any] = {
        "n_d": inst.n_d,
        "n_v": inst.n_v,
        "scale": {"du_km": sc.du_km, "mu_km3s2": sc.mu_km3s2},
        "params": {
            "m_max_l": inst.m_max_l,
            "r0": sc.to_km(inst.r0),
            "r_min": sc.to_km(inst.r_min),
            "g0": inst.prop.g0,
            "isp_launch": inst.prop.isp_launch,
            "isp_depot": inst.prop.isp_depot,
            "isp_servicer": inst.prop.isp_servicer,
            "m_dry_s": inst.m_dry_s,
            "m_dry_d": inst.m_dry_d,
        },
        "satellites": [
            {
                "a_km": sc.to_km(s.orbit.a),
                "i_deg": math.degrees(s.orbit.i),
                "raan_deg": math.degrees(s.orbit.raan),
                "payload_kg": s.payload_kg,
            }
            for s in inst.satellites
        ],
    }
    if inst.depots_initial is not None:
        doc["depots_initial"] = [
            {
                "a_km": sc.to_km(o.a),
                "i_deg": math.degrees(o.i),
                "raan_deg": math.degrees(o.raan),
            }
            for o in inst.depots_initial
        ]
    return doc


def load_instance(path: str | Path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_dict(doc)


def save_instance(inst: Instance, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(instance_to_dict(inst), indent=2) + "\n")


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file plus rename so partial files never appear."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def generate_instance(
    n_d: int,
    n_t: int,
    seed: int,
    n_v: int = 2,
    params: dict[str, float] | None = None,
) -> Instance:
    """Random instance: satellite radii uniform between LEO (7,000 km)
    and GEO (42,164 km), inclination in [0, 180] deg, RAAN in [0, 360) deg,
    generator-default parameters otherwise.  Deterministic per seed."""
    if n_d < 1 or n_t < 1:
        raise ValueError("n_d and n_t must be >= 1")
    p = dict(DEFAULT_PARAMS)
    if params:
        p.update(params)
    rng = np.random.default_rng(seed)
    scale = CanonicalScale(**DEFAULT_SCALE)
    satellites = []
    for _ in range(n_t):
        a_km = rng.uniform(7000.0, 42164.0)
        i_deg = rng.uniform(0.0, 180.0)
        raan_deg = rng.uniform(0.0, 360.0)
        satellites.append(
            Satellite(
                CircularOrbit(
                    scale.to_du(a_km), math.radians(i_deg), math.radians(raan_deg)
                ),
                DEFAULT_PAYLOAD_KG,
            )
        )
    return Instance(
        satellites=tuple(satellites),
        n_d=n_d,
        n_v=n_v,
        m_dry_s=p["m_dry_s"],
        m_dry_d=p["m_dry_d"],
        m_max_l=p["m_max_l"],
        r0=scale.to_du(p["r0"]),
        r_min=scale.to_du(p["r_min"]),
        prop=PropulsionParams(
            isp_launch=p["isp_launch"],
            isp_depot=p["isp_depot"],
            isp_servicer=p["isp_servicer"],
            g0=p["g0"],
        ),
        scale=scale,
        depots_initial=None,
    )


def gps18_path() -> Path:
    return Path(str(resources.files("depotopt").joinpath("data/gps18.json")))


def load_gps18() -> Instance:
    return load_instance(gps18_path())


def initial_placement(inst: Instance) -> DepotPlacement | None:
    if inst.depots_initial is None:
        return None
    return DepotPlacement(inst.depots_initial)

"""YAML (de)serialization for deployments and regions.

Deployment file::

    antennas_per_ap: 8
    coverage: {center: [20.0, 20.0], width: 40.0, height: 40.0}
    ap_positions:
      - [3.5, 12.0]
      - [30.1, 7.25]
    region: {center: [12.0, 15.0], width: 10.0, height: 10.0}   # optional

Coordinates are metres.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .geometry import Deployment, Rectangle


class InvalidConfigError(ValueError):
    """A configuration or input file is malformed."""


def rectangle_to_dict(r: Rectangle) -> dict:
    return {"center": [r.center.x, r.center.y], "width": r.width, "height": r.height}


def rectangle_from_dict(d) -> Rectangle:
    try:
        return Rectangle(tuple(float(v) for v in d["center"]), float(d["width"]), float(d["height"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfigError(f"bad rectangle {d!r}: {exc}") from exc


def deployment_to_dict(dep: Deployment, region: Rectangle | None = None) -> dict:
    out = {
        "antennas_per_ap": dep.M,
        "coverage": rectangle_to_dict(dep.coverage),
        "ap_positions": [[float(x), float(y)] for x, y in dep.ap_positions],
    }
    if region is not None:
        out["region"] = rectangle_to_dict(region)
    return out


def deployment_from_dict(d) -> tuple[Deployment, Rectangle | None]:
    if not isinstance(d, dict):
        raise InvalidConfigError("deployment file must hold a mapping")
    try:
        dep = Deployment(
            [[float(x), float(y)] for x, y in d["ap_positions"]],
            int(d.get("antennas_per_ap", 8)),
            rectangle_from_dict(d["coverage"]),
        )
    except InvalidConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidConfigError(f"bad deployment: {exc}") from exc
    region = rectangle_from_dict(d["region"]) if d.get("region") is not None else None
    return dep, region


def save_deployment(path, dep: Deployment, region: Rectangle | None = None) -> None:
    Path(path).write_text(yaml.safe_dump(deployment_to_dict(dep, region), sort_keys=False))


def load_deployment(path) -> tuple[Deployment, Rectangle | None]:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidConfigError(f"cannot read deployment {path}: {exc}") from exc
    return deployment_from_dict(data)

"""Run configuration: one JSON document covering the optimizer, annotation,
simulation and export settings.  Unknown keys anywhere in the document are
rejected with their full field paths so typos cannot silently change runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .contact import DEFAULT_CONTACT_RADIUS
from .errors import InvalidArgumentError
from .io import load_json
from .metrics import DEFAULT_VOXEL, SimConfig
from .optimizer import OptimConfig


@dataclass(frozen=True)
class AnnotationConfig:
    k_neighbors: int | None = None  # None: scale 50 per 3000 points
    contact_radius: float = DEFAULT_CONTACT_RADIUS

    def to_dict(self) -> dict:
        return {"k_neighbors": self.k_neighbors, "contact_radius": self.contact_radius}


@dataclass(frozen=True)
class RunConfig:
    optimizer: OptimConfig = field(default_factory=OptimConfig)
    simulation: SimConfig = field(default_factory=SimConfig)
    annotation: AnnotationConfig = field(default_factory=AnnotationConfig)
    voxel_size: float = DEFAULT_VOXEL

    def to_dict(self) -> dict:
        return {
            "optimizer": self.optimizer.to_dict(),
            "simulation": self.simulation.to_dict(),
            "annotation": self.annotation.to_dict(),
            "voxel_size": self.voxel_size,
        }


_SCHEMA = {
    "optimizer": {
        "iterations": None,
        "directions": None,
        "step_sizes": {"translation": None, "rotation": None, "joints": None},
        "weights": {"dis": None, "dct": None, "dcf": None, "dc": None, "net": None, "pen": None},
        "drop": {"probability": None, "seed": None},
        "finger_weights": None,
        "seed": None,
        "init_distance": None,
        "trajectory_every": None,
    },
    "simulation": {
        "contact_stiffness": None,
        "friction": None,
        "contact_damping": None,
        "normal_damping_ratio": None,
        "dt": None,
        "steps": None,
        "gravity": None,
        "blowup_speed": None,
        "creep_speed": None,
    },
    "annotation": {"k_neighbors": None, "contact_radius": None},
    "voxel_size": None,
}


def _check_keys(data, schema, path, problems):
    if not isinstance(data, dict):
        problems.append(f"{path or '<root>'}: expected an object")
        return
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            problems.append(f"{here}: unknown key")
        elif isinstance(schema[key], dict) and value is not None:
            _check_keys(value, schema[key], here, problems)


def run_config_from_dict(data: dict) -> RunConfig:
    problems: list = []
    _check_keys(data, _SCHEMA, "", problems)
    if problems:
        raise InvalidArgumentError(
            "invalid run config: " + "; ".join(sorted(problems))
        )
    cfg = RunConfig()
    if "optimizer" in data:
        merged = cfg.optimizer.to_dict()
        merged.update(data["optimizer"])
        for nested in ("step_sizes", "weights", "drop"):
            if nested in data["optimizer"]:
                base = cfg.optimizer.to_dict()[nested]
                base.update(data["optimizer"][nested])
                merged[nested] = base
        cfg = replace(cfg, optimizer=OptimConfig.from_dict(merged))
    if "simulation" in data:
        merged = cfg.simulation.to_dict()
        merged.update(data["simulation"])
        cfg = replace(cfg, simulation=SimConfig.from_dict(merged))
    if "annotation" in data:
        ann = data["annotation"]
        cfg = replace(
            cfg,
            annotation=AnnotationConfig(
                k_neighbors=ann.get("k_neighbors", cfg.annotation.k_neighbors),
                contact_radius=ann.get("contact_radius", cfg.annotation.contact_radius),
            ),
        )
    if "voxel_size" in data:
        voxel = float(data["voxel_size"])
        if voxel <= 0:
            raise InvalidArgumentError("voxel_size: must be > 0")
        cfg = replace(cfg, voxel_size=voxel)
    return cfg


def load_run_config(path) -> RunConfig:
    return run_config_from_dict(load_json(path))


ABLATION_FLAGS = ("dct", "dcf", "dc", "net")


def apply_ablation(cfg: RunConfig, ablation: str | None) -> RunConfig:
    """Zero the energy weights named by an ablation flag; 'dc' removes both
    directional terms."""
    if ablation is None or ablation == "none":
        return cfg
    if ablation not in ABLATION_FLAGS:
        raise InvalidArgumentError(
            f"unknown ablation {ablation!r}, expected one of {ABLATION_FLAGS}"
        )
    weights = cfg.optimizer.weights.to_dict()
    if ablation == "dc":
        weights["dct"] = 0.0
        weights["dcf"] = 0.0
    else:
        weights[ablation] = 0.0
    optimizer = OptimConfig.from_dict({**cfg.optimizer.to_dict(), "weights": weights})
    return replace(cfg, optimizer=optimizer)

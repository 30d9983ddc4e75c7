"""JSON system descriptions.

A config holds row-major nested arrays for ``A, B, C, K, L``, optional
``Sigma_w, Sigma_v, Sigma_r``, the attack horizon ``N`` and a ``detector``
block, e.g.::

    {"A": [[0.84, 0.23], [-0.47, 0.12]], "B": [[0.07], [0.23]],
     "C": [[1, 0]], "K": [[1.85, 0.96]], "L": [[0.25], [-0.18]],
     "N": 10, "detector": {"kind": "cusum", "b": 1.0, "sigma_r": 1.0}}

``Sigma_r`` is taken as given when present. Otherwise, if both noise
covariances are present it is ``C Sigma_e C' + Sigma_v`` from the
steady-state Riccati solution, and failing that the identity (noise-free
plant, unit measurement noise).
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .model import ControllerModel, PlantModel, attack_map_for, closed_loop_under_attack, steady_state_kalman


@dataclass(frozen=True)
class SystemConfig:
    plant: PlantModel
    controller: ControllerModel
    N: int
    detector: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.plant.m

    def attack_map(self, N=None):
        return attack_map_for(self.plant, self.controller, N or self.N)

    def closed_loop(self):
        return closed_loop_under_attack(self.plant, self.controller)

    @property
    def sigma_r(self):
        """Per-sensor residual standard deviation (first diagonal entry)."""
        return float(np.sqrt(self.controller.Sigma_r[0, 0]))


def parse_config(data):
    missing = [k for k in ("A", "B", "C", "K", "L") if k not in data]
    if missing:
        raise ValueError(f"config is missing {', '.join(missing)}")
    plant = PlantModel(
        A=data["A"], B=data["B"], C=data["C"],
        Sigma_w=data.get("Sigma_w"), Sigma_v=data.get("Sigma_v"),
    )
    if "Sigma_r" in data:
        sigma_r = data["Sigma_r"]
    elif "Sigma_w" in data and "Sigma_v" in data:
        sigma_r = steady_state_kalman(plant)[2]
    else:
        sigma_r = np.eye(plant.m)
    ctrl = ControllerModel(K=data["K"], L=data["L"], Sigma_r=sigma_r)
    closed_loop_under_attack(plant, ctrl)  # assumption checks
    N = int(data.get("N", 10))
    if N < 1:
        raise ValueError("N must be >= 1")
    return SystemConfig(plant=plant, controller=ctrl, N=N, detector=dict(data.get("detector", {})))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(json.load(fh))


def example1_config():
    text = resources.files("impact_curve").joinpath("data/example1.json").read_text("utf-8")
    return parse_config(json.loads(text))

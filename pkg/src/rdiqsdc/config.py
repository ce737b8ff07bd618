"""Run configuration: flat dotted keys, file plus CLI overrides.

A config file holds `key = value` lines (# comments allowed). Every key
has a documented default matching the reference operating point
(theta = pi/4, alpha = 0.2 dB/km, eta_c = 0.95, eta_m = eta_d = 1,
R_rep = 1e7 Hz, p_s = 1, p_e = 1e-3). Unknown keys are rejected.

Grids accept either a comma list ("0.001,0.1,0.2") or linspace syntax
"start:stop:count".
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adversary import BlindingAttackParams
from .analysis import EfficiencyParams
from .devices import ChannelNoiseModel, LinkBudget, NoiseMode, memory_efficiency
from .protocol import BasisPolicy, BasisPolicyMode, ProtocolParams, Round2Mode
from .qstate import BasisConfig

ENV_CONFIG = "RDIQSDC_CONFIG"


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2 in the CLI."""


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_grid(s: str) -> tuple[float, ...]:
    s = s.strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be start:stop:count, got {s!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ConfigError("grid count must be positive")
        return tuple(float(x) for x in np.linspace(start, stop, count))
    return tuple(float(x) for x in s.split(","))


def _parse_tolerance(s: str):
    if s.strip().lower() == "hoeffding":
        return None
    return float(s)


def _identity(s: str) -> str:
    return s.strip()


# key -> (default, parser, help)
SCHEMA: dict[str, tuple] = {
    "protocol.r": (10_000, int, "photons per sequence"),
    "protocol.n": (8, int, "number of phase settings (>=3, !=4)"),
    "protocol.theta": (math.pi / 4, float, "amplitude angle in radians"),
    "protocol.policy": ("target-p1", _identity, "basis policy: uniform | target-p1"),
    "protocol.p1_target": (0.1, float, "first-round P(g=0) target for target-p1"),
    "protocol.tolerance": (None, _parse_tolerance, "check tolerance: hoeffding | float"),
    "protocol.epsilon": (1e-6, float, "failure budget for the hoeffding tolerance"),
    "protocol.message": ("random", _identity, "payload: random | bit string"),
    "protocol.seed": (0, int, "master seed"),
    "protocol.round2_mode": ("policy", _identity, "second-round bases: policy | original-order"),
    "protocol.continue_on_abort": (False, _parse_bool, "keep running after a failed check"),
    "physics.distance_km": (0.0, float, "one-way fiber length"),
    "physics.alpha_db_per_km": (0.2, float, "fiber attenuation"),
    "physics.eta_c": (0.95, float, "coupling efficiency"),
    "physics.eta_m": (1.0, float, "memory efficiency per storage episode"),
    "physics.eta_d": (1.0, float, "detector efficiency"),
    "physics.qm_per_trip_efficiency": (1.0, float, "storage-loop survival per round trip"),
    "physics.qm_round_trips": (0, int, "round trips consumed per storage episode; overrides eta_m when > 0"),
    "physics.delta_theta": (0.0, float, "rotation per one-way trip, radians"),
    "physics.noise_mode": ("uniform", _identity, "uniform | per-photon"),
    "physics.noise_family": ("constant", _identity, "constant | uniform-interval"),
    "physics.noise_spread": (0.0, float, "halfwidth for uniform-interval"),
    "adversary.enabled": (False, _parse_bool, "interpose the blinding attack"),
    "adversary.p1": (0.0, float, "per-slot attack probability"),
    "adversary.p2": (0.0, float, "forced-click closeness probability"),
    "adversary.closeness_angle": (math.pi / 2, float, "close-basis phase threshold"),
    "analysis.axis": ("eta", _identity, "sweep axis: eta | L | delta_theta"),
    "analysis.grid": ((), _parse_grid, "sweep grid: start:stop:count or comma list"),
    "analysis.p1_list": ((0.001, 0.1, 0.2, 0.3, 0.4, 0.5), _parse_grid, "P1 operating points"),
    "analysis.r_rep_hz": (1e7, float, "source repetition rate"),
    "analysis.p_s": (1.0, float, "single-photon source efficiency"),
    "analysis.p_e": (1e-3, float, "entanglement-source benchmark constant"),
    "attack.p1_grid": ((0.0, 0.25, 0.5, 0.75, 1.0), _parse_grid, "attack-scan p1 grid"),
    "attack.p2_grid": ((0.0, 0.25, 0.5, 0.75, 1.0), _parse_grid, "attack-scan p2 grid"),
    "attack.r": (100_000, int, "photons per attack-scan point"),
    "output.transcript": (True, _parse_bool, "write the per-photon transcript"),
    "output.gnuplot": (False, _parse_bool, "emit a gnuplot script next to the CSV"),
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    # ---- domain-object builders -------------------------------------------
    def basis_config(self) -> BasisConfig:
        return BasisConfig(n=self["protocol.n"], theta=self["protocol.theta"])

    def policy(self) -> BasisPolicy:
        mode = self["protocol.policy"]
        if mode == "uniform":
            return BasisPolicy(mode=BasisPolicyMode.UNIFORM)
        if mode == "target-p1":
            return BasisPolicy(
                mode=BasisPolicyMode.TARGET_P1, target=self["protocol.p1_target"]
            )
        raise ConfigError(f"unknown protocol.policy: {mode!r}")

    def link(self) -> LinkBudget:
        eta_m = self["physics.eta_m"]
        if self["physics.qm_round_trips"] > 0:
            eta_m = memory_efficiency(
                self["physics.qm_per_trip_efficiency"], self["physics.qm_round_trips"]
            )
        return LinkBudget(
            distance_km=self["physics.distance_km"],
            alpha_db_per_km=self["physics.alpha_db_per_km"],
            eta_c=self["physics.eta_c"],
            eta_m=eta_m,
            eta_d=self["physics.eta_d"],
        )

    def noise(self) -> ChannelNoiseModel:
        mode = self["physics.noise_mode"]
        if mode not in ("uniform", "per-photon"):
            raise ConfigError(f"unknown physics.noise_mode: {mode!r}")
        return ChannelNoiseModel(
            mode=NoiseMode(mode),
            delta_theta=self["physics.delta_theta"],
            family=self["physics.noise_family"],
            spread=self["physics.noise_spread"],
        )

    def adversary(self) -> Optional[BlindingAttackParams]:
        if not self["adversary.enabled"]:
            return None
        return BlindingAttackParams(
            p1=self["adversary.p1"],
            p2=self["adversary.p2"],
            closeness_angle=self["adversary.closeness_angle"],
        )

    def round2_mode(self) -> Round2Mode:
        mode = self["protocol.round2_mode"]
        try:
            return Round2Mode(mode)
        except ValueError:
            raise ConfigError(f"unknown protocol.round2_mode: {mode!r}") from None

    def protocol_params(self) -> ProtocolParams:
        try:
            return ProtocolParams(
                r=self["protocol.r"],
                config=self.basis_config(),
                policy=self.policy(),
                link=self.link(),
                noise=self.noise(),
                adversary=self.adversary(),
                tolerance=self["protocol.tolerance"],
                epsilon=self["protocol.epsilon"],
                round2_mode=self.round2_mode(),
                continue_on_abort=self["protocol.continue_on_abort"],
                seed=self["protocol.seed"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def message_bits(self) -> Optional[list[int]]:
        raw = self["protocol.message"]
        if raw == "random":
            return None
        if set(raw) <= {"0", "1"}:
            bits = [int(c) for c in raw]
            if len(bits) != self["protocol.r"]:
                raise ConfigError("protocol.message length must equal protocol.r")
            return bits
        raise ConfigError("protocol.message must be 'random' or a 0/1 string")

    def efficiency(self) -> EfficiencyParams:
        return EfficiencyParams(
            r_rep_hz=self["analysis.r_rep_hz"],
            p_s=self["analysis.p_s"],
            p_e=self["analysis.p_e"],
        )


def parse_value(key: str, raw: str):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key: {key!r}")
    _, parser, _ = SCHEMA[key]
    try:
        return parser(raw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def load_config(
    path: Optional[str] = None, overrides: Optional[dict[str, str]] = None
) -> RunConfig:
    """Defaults, then the file (or $RDIQSDC_CONFIG), then overrides."""
    values = {key: default for key, (default, _, _) in SCHEMA.items()}
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, raw = (part.strip() for part in line.split("=", 1))
                values[key] = parse_value(key, raw)
    for key, raw in (overrides or {}).items():
        values[key] = parse_value(key, raw)
    return RunConfig(values)

"""Run configuration: a YAML document with a fixed schema.

Schema (every section optional; omitted keys take the defaults below)::

    mode: simulate                  # or "attractor" (requires g2 = g4 = 0)
    parameters: {beta1, beta2, rho1, rho2, mu1, mu2, lambda1, lambda2,
                 kappa, gamma, L0, L}
    forcing: {g1: [c0, c1, ...], g2: [...], g3: [...], g4: [...]}
    mesh: {n_left: 64, n_right: 64}
    step: {dt, newton_tol, newton_max_iter, t_end, snapshot_every}
    initial: {amplitude, velocity_amplitude, seed, snapshot}
    stationary: {tol, max_iter}
    modal: {modes}
    certify: {T, delta, eta_hat, eta_tilde, rho, L_tilde, budget}
    output: {directory}

Loads are polynomial coefficients in ascending powers of x.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigurationError, OutputError
from .model import SIMULATE, BeamParameters, Forcing
from .timestepper import StepConfig

DEFAULT_SECTIONS = {
    "mesh": {"n_left": 64, "n_right": 64},
    "initial": {"amplitude": 0.05, "velocity_amplitude": 0.05, "seed": None,
                "snapshot": None},
    "stationary": {"tol": 1e-10, "max_iter": 50},
    "modal": {"modes": 10},
    "certify": {"T": 2.0, "delta": 0.25, "eta_hat": 0.2, "eta_tilde": 2.0,
                "rho": 1.0, "L_tilde": 2.0, "budget": 50},
    "output": {"directory": "out"},
}

_STEP_KEYS = tuple(f.name for f in fields(StepConfig))
_PARAM_KEYS = tuple(f.name for f in fields(BeamParameters))


def _section(data: dict, name: str, defaults: dict) -> dict:
    raw = data.get(name) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError("CONFIG_SCHEMA", f"section {name!r} must be a mapping")
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigurationError("CONFIG_SCHEMA", f"unknown keys in {name}: {sorted(unknown)}")
    out = dict(defaults)
    out.update(raw)
    return out


def _number(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError("CONFIG_SCHEMA", f"{section}.{key} must be a number")
    return float(value)


@dataclass
class RunConfig:
    params: BeamParameters = field(default_factory=BeamParameters)
    forcing: Forcing = field(default_factory=Forcing)
    mode: str = SIMULATE
    step: dict = field(default_factory=lambda: {k: getattr(StepConfig(), k)
                                                for k in _STEP_KEYS})
    sections: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_SECTIONS))

    # -- convenient views ---------------------------------------------------
    @property
    def n_left(self) -> int:
        return int(self.sections["mesh"]["n_left"])

    @property
    def n_right(self) -> int:
        return int(self.sections["mesh"]["n_right"])

    @property
    def out_dir(self) -> str:
        return str(self.sections["output"]["directory"])

    def step_config(self) -> StepConfig:
        s = dict(self.step)
        s["newton_max_iter"] = int(s["newton_max_iter"])
        s["snapshot_every"] = int(s["snapshot_every"])
        return StepConfig(**s)

    def section(self, name: str) -> dict:
        return self.sections[name]

    # -- serialization ------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigurationError("CONFIG_SCHEMA", "top level must be a mapping")
        known = {"mode", "parameters", "forcing", "step"} | set(DEFAULT_SECTIONS)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError("CONFIG_SCHEMA", f"unknown sections {sorted(unknown)}")
        pdata = _section(data, "parameters", BeamParameters().as_dict())
        params = BeamParameters(**{k: _number("parameters", k, v) for k, v in pdata.items()})
        fdata = _section(data, "forcing", {f"g{i}": [] for i in range(1, 5)})
        loads = {}
        for k, v in fdata.items():
            v = [] if v is None else ([v] if isinstance(v, (int, float)) else v)
            if not isinstance(v, list):
                raise ConfigurationError("CONFIG_SCHEMA", f"forcing.{k} must be a list")
            loads[k] = [_number("forcing", k, c) for c in v]
        step = _section(data, "step", {k: getattr(StepConfig(), k) for k in _STEP_KEYS})
        for k, v in step.items():
            step[k] = _number("step", k, v)
        step["newton_max_iter"] = int(step["newton_max_iter"])
        step["snapshot_every"] = int(step["snapshot_every"])
        sections = {name: _section(data, name, defaults)
                    for name, defaults in DEFAULT_SECTIONS.items()}
        mode = data.get("mode", SIMULATE)
        if not isinstance(mode, str):
            raise ConfigurationError("CONFIG_SCHEMA", "mode must be a string")
        return cls(params=params, forcing=Forcing(**loads), mode=mode, step=step,
                   sections=sections)

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "parameters": self.params.as_dict(),
               "forcing": self.forcing.as_dict(), "step": dict(self.step)}
        out.update(copy.deepcopy(self.sections))
        return out

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError("CONFIG_PARSE", str(exc)) from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise OutputError("IO_FAILURE", f"cannot read {path}: {exc}") from exc
        return cls.loads(text)

    def save(self, path):
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(self.dumps())
        except OSError as exc:
            raise OutputError("IO_FAILURE", f"cannot write {path}: {exc}") from exc


def reference_config() -> RunConfig:
    """All coefficients 1, L0 = 0.5, L = 1, no load, 64 + 64 elements, dt = 1e-3."""
    return RunConfig()

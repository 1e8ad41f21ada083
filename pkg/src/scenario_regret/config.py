"""JSON run configuration: schema, validation and construction of the model objects.

Dense matrices are nested lists in row-major order.  A minimal config::

    {"system": {"builtin": "mass_spring_damper", "params": {"T": 20}},
     "dataset": {"N": 20, "seed": 0}}
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .benchmark import CostWeights
from .errors import ConfigError, RegretError
from .evaluation.msd import mass_spring_damper, msd_weights, uniform_constant_sampler
from .lifted import ScenarioSample, UncertainSystem, affine_system
from .structure import normalize_structure
from .synthesis.backends import SolverOptions, resolve_backend
from .synthesis.lmi import COMPACT, STACKED, SafetySpec
from .synthesis.solve import HINF, REGRET

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_ARRAY = {"type": "array"}  # 2-D or 3-D numeric, shape-checked when built
_VECTOR = {"type": "array", "items": {"type": "number"}}
_LEVEL = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "dataset"],
    "properties": {
        "system": {
            "type": "object",
            "oneOf": [
                {
                    "additionalProperties": False,
                    "required": ["builtin"],
                    "properties": {
                        "builtin": {"enum": ["mass_spring_damper"]},
                        "params": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "T": {"type": "integer", "minimum": 2},
                                "mass": {"type": "number", "exclusiveMinimum": 0},
                                "k": {"type": "number"},
                                "c": {"type": "number"},
                                "Ts": {"type": "number", "exclusiveMinimum": 0},
                            },
                        },
                    },
                },
                {
                    "additionalProperties": False,
                    "required": ["affine"],
                    "properties": {
                        "affine": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["T", "A0", "B0", "E0"],
                            "properties": {
                                "T": {"type": "integer", "minimum": 2},
                                "A0": _ARRAY, "B0": _ARRAY, "E0": _ARRAY,
                                "A": {"type": "array", "items": _ARRAY},
                                "B": {"type": "array", "items": _ARRAY},
                                "E": {"type": "array", "items": _ARRAY},
                                "name": {"type": "string"},
                            },
                        }
                    },
                },
            ],
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "Q": {"oneOf": [{"enum": ["identity"]}, _MATRIX]},
                "R": {"oneOf": [{"enum": ["identity"]}, _MATRIX]},
            },
        },
        "safety": {
            "type": "object",
            "additionalProperties": False,
            "required": ["H_x", "H_u", "h"],
            "properties": {"H_x": _MATRIX, "H_u": _MATRIX, "h": _VECTOR, "H_w": _MATRIX,
                           "slack": {"type": "boolean"}},
        },
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["N"],
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "distribution": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "low", "high"],
                    "properties": {
                        "kind": {"enum": ["uniform-constant", "uniform-timevarying"]},
                        "low": _VECTOR,
                        "high": _VECTOR,
                    },
                },
            },
        },
        "structure": {"enum": ["full", "toeplitz", "full-causal", "block-toeplitz", "block-toeplitz-causal"]},
        "objective": {"enum": [REGRET, HINF]},
        "certificate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"epsilon": _LEVEL, "beta": _LEVEL},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {"type": ["string", "null"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "feastol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "time_limit": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "lmi_form": {"enum": [COMPACT, STACKED]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

DEFAULTS = {
    "structure": "full",
    "objective": REGRET,
    "certificate": {"epsilon": 0.1, "beta": 0.1},
    "solver": {"backend": None, "tol": 1e-7, "feastol": 1e-7, "max_iters": 60, "time_limit": None,
               "lmi_form": COMPACT},
    "output": {"dir": "."},
}

MSD_BOUND = 0.2


def _merge(defaults: dict, data: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in data.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _array(value, name: str, ndim: tuple[int, ...] = (2,)) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} is not a rectangular numeric array") from None
    if arr.ndim not in ndim or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be a finite array with {' or '.join(map(str, ndim))} dimensions")
    return arr


@dataclass
class RunConfig:
    """Validated configuration; ``data`` holds the defaults-filled JSON document."""

    data: dict

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from None
        cfg = cls(_merge(DEFAULTS, data))
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        """Read and validate; ``OSError`` propagates, bad JSON becomes ``ConfigError``."""
        with open(path) as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def with_overrides(self, **kwargs) -> "RunConfig":
        """Apply command-line overrides (``None`` values are ignored) and re-validate."""
        data = copy.deepcopy(self.data)
        for key, val in kwargs.items():
            if val is None:
                continue
            if key == "seed":
                data["dataset"]["seed"] = val
            elif key == "N":
                data["dataset"]["N"] = val
            elif key in ("epsilon", "beta"):
                data["certificate"][key] = val
            elif key == "out":
                data["output"]["dir"] = str(val)
            else:
                data[key] = val
        return RunConfig.from_dict(data)

    def check(self) -> None:
        """Cross-field checks the schema cannot express; builds every object once."""
        try:
            system = self.system()
            self.weights(system)
            self.safety()
            self.sampler(system)(np.random.default_rng(0))
            normalize_structure(self.data["structure"])
            if self.backend is not None:
                resolve_backend(self.backend)
        except ConfigError:
            raise
        except (RegretError, ValueError, IndexError) as exc:
            raise ConfigError(f"inconsistent config: {exc}") from None

    def system(self) -> UncertainSystem:
        spec = self.data["system"]
        if "builtin" in spec:
            return mass_spring_damper(**spec.get("params", {}))
        a = spec["affine"]
        T = a["T"]
        mats = {k: _array(a[k], k, (2, 3)) for k in ("A0", "B0", "E0")}
        coeffs = {k: [_array(M, f"{k}[{i}]", (2, 3)) for i, M in enumerate(a.get(k, []))] for k in "ABE"}
        for k, M in mats.items():
            if M.ndim == 3 and M.shape[0] < T:
                raise ConfigError(f"{k} lists {M.shape[0]} steps but the horizon is {T}")
        sys_ = affine_system(mats["A0"], mats["B0"], mats["E0"], coeffs["A"], coeffs["B"], coeffs["E"], T=T,
                             name=a.get("name", "affine"))
        return sys_

    @property
    def T(self) -> int:
        spec = self.data["system"]
        return spec.get("params", {}).get("T", 20) if "builtin" in spec else spec["affine"]["T"]

    def weights(self, system: UncertainSystem | None = None) -> CostWeights:
        system = system or self.system()
        w = self.data.get("weights", {})
        if "builtin" in self.data["system"] and not w:
            return msd_weights(system.T)
        Q = w.get("Q", "identity")
        R = w.get("R", "identity")
        Q = np.eye(system.n * system.T) if Q == "identity" else _array(Q, "Q")
        R = np.eye(system.m * system.T) if R == "identity" else _array(R, "R")
        if Q.shape != (system.n * system.T,) * 2 or R.shape != (system.m * system.T,) * 2:
            raise ConfigError("weights must be nT x nT and mT x mT")
        return CostWeights(Q, R)

    def safety(self) -> SafetySpec | None:
        s = self.data.get("safety")
        if not s:
            return None
        H_w = _array(s["H_w"], "H_w") if "H_w" in s else None
        return SafetySpec.constant(_array(s["H_x"], "H_x"), _array(s["H_u"], "H_u"), _array(s["h"], "h", (1,)), H_w)

    @property
    def safety_slack(self) -> bool:
        return bool(self.data.get("safety", {}).get("slack", False))

    def sampler(self, system: UncertainSystem | None = None):
        system = system or self.system()
        dist = self.data["dataset"].get("distribution")
        if dist is None:
            if "builtin" not in self.data["system"]:
                raise ConfigError("dataset.distribution is required for affine systems")
            dist = {"kind": "uniform-constant", "low": [-MSD_BOUND] * 2, "high": [MSD_BOUND] * 2}
        low, high = np.asarray(dist["low"], float), np.asarray(dist["high"], float)
        if low.shape != (system.d,) or high.shape != (system.d,):
            raise ConfigError(f"distribution bounds need {system.d} entries")
        if np.any(low > high):
            raise ConfigError("distribution low must not exceed high")
        if dist["kind"] == "uniform-constant":
            return uniform_constant_sampler(low, high, system.T)
        T = system.T

        def draw(rng: np.random.Generator) -> ScenarioSample:
            return ScenarioSample(rng.uniform(low, high, size=(T, low.size)))

        return draw

    @property
    def N(self) -> int:
        return self.data["dataset"]["N"]

    @property
    def seed(self) -> int:
        return self.data["dataset"].get("seed", 0)

    @property
    def structure(self) -> str:
        return normalize_structure(self.data["structure"])

    @property
    def objective(self) -> str:
        return self.data["objective"]

    @property
    def epsilon(self) -> float:
        return self.data["certificate"]["epsilon"]

    @property
    def beta(self) -> float:
        return self.data["certificate"]["beta"]

    @property
    def out_dir(self) -> str:
        return self.data["output"]["dir"]

    @property
    def backend(self) -> str | None:
        return self.data["solver"].get("backend")

    @property
    def lmi_form(self) -> str:
        return self.data["solver"]["lmi_form"]

    def solver_options(self) -> SolverOptions:
        s = self.data["solver"]
        return SolverOptions(tol=s["tol"], feastol=s["feastol"], max_iters=s["max_iters"],
                             time_limit=s.get("time_limit"))

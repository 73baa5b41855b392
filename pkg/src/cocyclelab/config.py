"""Run configuration: a strict INI file with named sections.

Unknown keys are errors (typos in tolerance names must not pass
silently); every run carries a seed and all randomness flows from it
through named substreams, so reruns are byte-identical.
"""

import ast
import configparser
import io
import zlib
from dataclasses import dataclass, field

import numpy as np

from .base import BernoulliShift, FinitePeriodic, Rotation
from .cocycle import builtin, symbol_cocycle
from .errors import ConfigError

EXPERIMENTS = (
    "spectrum", "splitting", "dichotomy", "solve", "oracle-compare",
    "mane", "induce", "witness", "robustness", "report",
)

_BASE_KEYS = {
    "kind": str,
    "gamma": float,
    "probs": "floats",
    "period": int,
}

_COCYCLE_KEYS = {
    "name": str,
    "entries": "floats",
    "rate": float,
    "eps": float,
    "factor": float,
    "alpha": float,
    "matrices": "matrices",
}

# params: experiment -> {key: (type, default)}
_COMMON_SPECTRUM = {
    "n": (int, 10000),
    "reorth": (int, 10),
    "gap_tol": (float, 0.02),
}
_CERT_KEYS = {
    "zero_tol": (float, 0.02),
    "n_max": (int, 200),
    "safety": (float, 0.25),
    "window": (int, 40),
    "samples": (int, 8),
}
PARAM_SCHEMA = {
    "spectrum": {**_COMMON_SPECTRUM},
    "splitting": {**_COMMON_SPECTRUM, "window": (int, 40)},
    "dichotomy": {
        **_COMMON_SPECTRUM, **_CERT_KEYS,
        "slack": (float, 1.05),
        "horizons": ("ints", (10, 100, 1000)),
        "envelope_w": (int, 200),
        "slope_tol": (float, 0.05),
    },
    "solve": {
        **_COMMON_SPECTRUM, **_CERT_KEYS,
        "out_window": (int, 40),
        "n_tail": (int, 60),
        "pair": (str, "L_LC"),
    },
    "oracle-compare": {
        "instances": (int, 100),
        "p_max": (int, 8),
        "d_max": (int, 4),
        "n_tail": (int, 80),
        "min_rate": (float, 0.35),
    },
    "mane": {
        "target": (float, 3.0),
        "horizon": (int, 2000),
        "grid": (int, 720),
        "zero_tol": (float, 0.02),
        "spectrum_n": (int, 4000),
        "window": (int, 40),
    },
    "induce": {
        "f_lo": (float, 0.0),
        "f_hi": (float, 0.5),
        "samples": (int, 400),
        "horizon": (int, 10000),
        "induced_n": (int, 20000),
        "n": (int, 20000),
    },
    "witness": {
        "l_target": (float, 10.0),
        "weight_const": (float, 1.0),
        "samples": (int, 400),
        "rokhlin_samples": (int, 3000),
        "spectrum_n": (int, 4000),
        "induced_spectrum_n": (int, 1500),
        "search_horizon": (int, 2000),
        "horizon": (int, 50000),
        "grid": (int, 720),
        "candidates": (int, 4),
        "tower_columns": (int, 4),
        "percentile": (float, 25.0),
        "zero_tol": (float, 0.02),
    },
    "robustness": {
        **_COMMON_SPECTRUM, **_CERT_KEYS,
        "trials": (int, 20),
        "budget_safety": (float, 0.5),
        "n_tail": (int, 60),
        "out_window": (int, 30),
        "tol": (float, 1e-10),
        "check_n": (int, 4000),
    },
    "report": {},
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int
    base: dict = field(default_factory=dict)
    cocycle: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = "out"

    def stream(self, name):
        """Named, reproducible random substream derived from the seed."""
        sub = zlib.crc32(name.encode())
        return np.random.default_rng(np.random.SeedSequence([self.seed, sub]))


def _parse_value(raw, kind, where):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if kind == "floats":
            return tuple(float(x) for x in raw.split())
        if kind == "ints":
            return tuple(int(x) for x in raw.split())
        if kind == "matrices":
            mats = [ast.literal_eval(chunk.strip()) for chunk in raw.split("|")]
            return tuple(tuple(tuple(float(x) for x in row) for row in m) for m in mats)
    except (ValueError, SyntaxError) as e:
        raise ConfigError(f"bad value for {where}: {raw!r} ({e})") from None
    raise ConfigError(f"unhandled type for {where}")


def _read_section(cp, name, schema, required=()):
    out = {}
    if not cp.has_section(name):
        if required:
            raise ConfigError(f"missing [{name}] section")
        return out
    for key, raw in cp.items(name):
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        kind = schema[key]
        out[key] = _parse_value(raw, kind, f"[{name}] {key}")
    for key in required:
        if key not in out:
            raise ConfigError(f"missing required key {key!r} in [{name}]")
    return out


def parse_config(text):
    """Parse and validate an INI run configuration."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config parse error: {e}") from None
    run = _read_section(
        cp, "run", {"experiment": str, "seed": int, "out": str},
        required=("experiment", "seed"),
    )
    if run["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {run['experiment']!r}")
    base = _read_section(cp, "base", _BASE_KEYS)
    cocycle = _read_section(cp, "cocycle", _COCYCLE_KEYS)
    known = set(cp.sections()) - {"run", "base", "cocycle", "params"}
    if known:
        raise ConfigError(f"unknown sections: {sorted(known)}")

    schema = PARAM_SCHEMA[run["experiment"]]
    raw_params = _read_section(cp, "params", {k: v[0] for k, v in schema.items()})
    params = {k: v[1] for k, v in schema.items()}
    params.update(raw_params)

    for key in ("zero_tol", "gap_tol", "slack", "tol", "slope_tol"):
        if key in params and not params[key] > 0:
            raise ConfigError(f"{key} must be positive")
    return RunConfig(
        experiment=run["experiment"], seed=run["seed"],
        base=base, cocycle=cocycle, params=params,
        out=run.get("out", "out"),
    )


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg):
    """Inverse of parse_config up to defaulted keys."""
    cp = configparser.ConfigParser()
    cp["run"] = {"experiment": cfg.experiment, "seed": str(cfg.seed), "out": cfg.out}

    def fmt(v):
        if isinstance(v, tuple) and v and isinstance(v[0], tuple):
            return " | ".join(
                "[" + ", ".join("[" + ", ".join(repr(x) for x in row) + "]" for row in m) + "]"
                for m in v
            )
        if isinstance(v, tuple):
            return " ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    if cfg.base:
        cp["base"] = {k: fmt(v) for k, v in cfg.base.items()}
    if cfg.cocycle:
        cp["cocycle"] = {k: fmt(v) for k, v in cfg.cocycle.items()}
    if cfg.params:
        cp["params"] = {k: fmt(v) for k, v in cfg.params.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def build_base(cfg):
    kind = cfg.base.get("kind", "rotation")
    if kind == "rotation":
        return Rotation(gamma=cfg.base.get("gamma", float((np.sqrt(5) - 1) / 2)))
    if kind == "bernoulli":
        return BernoulliShift(probs=cfg.base.get("probs", (0.5, 0.5)))
    if kind == "periodic":
        return FinitePeriodic(period=cfg.base.get("period", 4))
    raise ConfigError(f"unknown base kind {kind!r}")


def build_cocycle(cfg):
    name = cfg.cocycle.get("name", "diagonal")
    if name == "table":
        if "matrices" not in cfg.cocycle:
            raise ConfigError("cocycle 'table' needs a matrices key")
        return symbol_cocycle(np.asarray(cfg.cocycle["matrices"], dtype=float))
    params = {}
    if name == "diagonal" and "entries" in cfg.cocycle:
        params["entries"] = cfg.cocycle["entries"]
    if name == "random_sl2" and "matrices" in cfg.cocycle:
        params["matrices"] = np.asarray(cfg.cocycle["matrices"], dtype=float)
    if name == "nonuniform_rotation":
        params["rate"] = cfg.cocycle.get("rate", 0.5)
        params["eps"] = cfg.cocycle.get("eps", 0.3)
    if name == "block_mixed":
        if "factor" in cfg.cocycle:
            params["factor"] = cfg.cocycle["factor"]
        if "alpha" in cfg.cocycle:
            params["alpha"] = cfg.cocycle["alpha"]
    try:
        return builtin(name, **params)
    except Exception as e:
        raise ConfigError(f"could not build cocycle {name!r}: {e}") from None

"""Run configuration files: JSON schemas, loading and artifact path resolution."""
from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

import jsonschema

OUTPUT_ENV = "SEVENLEAGUE_OUTPUT_DIR"
BUILTIN_PREFIX = "builtin:"


class ConfigError(Exception):
    """Invalid or unreadable configuration (exit code 2)."""


class MissingArtifact(Exception):
    """A referenced upstream file does not exist (exit code 1)."""


def _num(minimum=None, exclusive=None):
    s = {"type": "number"}
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive is not None:
        s["exclusiveMinimum"] = exclusive
    return s


POS = _num(exclusive=0)
POS_INT = {"type": "integer", "minimum": 1}
SEED = {"type": "integer", "minimum": 0}
PATH = {"type": "string", "minLength": 1}
PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

MODEL_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "sigma", "y0"],
    "properties": {
        "kind": {"enum": ["GBM", "OU"]},
        "sigma": POS, "y0": {"type": "number"},
        "mu": {"type": "number"}, "lam": POS, "ybar": {"type": "number"},
    },
}

DOMAIN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["bounds"],
    "properties": {
        "bounds": {"type": "object", "additionalProperties": PAIR},
        "dtau": POS, "n_tau": POS_INT, "n_lhs": POS_INT, "n_mc_paths": {"type": "integer", "minimum": 2},
        "antithetic": {"type": "boolean"},
    },
}

SAMPLER = {
    "type": "object",
    "additionalProperties": False,
    "required": ["surrogate"],
    "properties": {
        "surrogate": PATH,
        "marginal_surrogate": PATH,
        "interpolant": {"enum": ["pchip", "barycentric", "chebyshev"]},
        "extrapolation": {"enum": ["clamp", "linear"]},
        "anchor_extrapolation": {"enum": ["clamp", "linear"]},
        "clamp_inputs": {"type": "boolean"},
        "prescale": {"type": "boolean"},
    },
}

OPTION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "strike", "rate", "n_dates", "dt"],
    "properties": {
        "kind": {"enum": ["asian", "bermudan_put", "european_put"]},
        "strike": POS, "rate": _num(minimum=0), "n_dates": POS_INT, "dt": POS,
    },
}

SCHEME = {"enum": ["euler", "milstein", "exact", "7l", "7lcdc"]}


def _command(name, required, properties):
    props = {"command": {"const": name}, "seed": SEED, "description": {"type": "string"}}
    props.update(properties)
    return {"type": "object", "additionalProperties": False,
            "required": ["command", "seed"] + required, "properties": props}


SCHEMAS = {
    "gen-data": _command("gen-data", ["model", "domains", "output"], {
        "model": {"enum": ["GBM", "OU"]},
        "domains": {"type": "array", "items": DOMAIN, "minItems": 1},
        "m": {"type": "integer", "minimum": 2, "maximum": 25},
        "scheme": {"enum": ["euler", "milstein", "exact"]},
        "output": PATH,
    }),
    "train": _command("train", ["dataset", "output"], {
        "dataset": PATH,
        "output": PATH,
        "hidden": {"type": "array", "items": POS_INT, "minItems": 1},
        "output_mode": {"enum": ["absolute", "ratio", "log_ratio", "difference", "milstein_residual"]},
        "epochs_phase1": {"type": "integer", "minimum": 0},
        "epochs_phase2": {"type": "integer", "minimum": 0},
        "lr_phase1": POS, "lr_phase2": POS,
        "batch_size": POS_INT,
        "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    }),
    "simulate": _command("simulate", ["model_params", "scheme", "dt", "horizon", "n_paths", "output"], {
        "model_params": MODEL_PARAMS, "scheme": SCHEME, "sampler": SAMPLER,
        "dt": POS, "horizon": POS, "n_paths": POS_INT,
        "format": {"enum": ["csv", "binary"]},
        "output": PATH,
    }),
    "build-cdc": _command("build-cdc", ["model_params", "sampler", "dt", "horizon", "output"], {
        "model_params": MODEL_PARAMS, "sampler": SAMPLER, "dt": POS, "horizon": POS, "output": PATH,
    }),
    "price": _command("price", ["model_params", "scheme", "option", "n_paths", "output"], {
        "model_params": MODEL_PARAMS, "scheme": SCHEME, "sampler": SAMPLER, "matrix": PATH,
        "option": OPTION, "n_paths": POS_INT,
        "policy": {"enum": ["regressed", "realized"]},
        "reference": {"type": "boolean"},
        "output": PATH,
    }),
    "study": _command("study", ["study", "model_params", "output"], {
        "study": {"enum": ["convergence", "ks", "timing", "vega"]},
        "model_params": MODEL_PARAMS,
        "schemes": {"type": "array", "items": SCHEME, "minItems": 1},
        "sampler": SAMPLER,
        "dt_values": {"type": "array", "items": POS, "minItems": 1},
        "dt": POS, "horizon": POS, "n_paths": POS_INT,
        "reference": {"enum": ["crn", "independent"]},
        "interpolants": {"type": "array", "items": {"enum": ["pchip", "barycentric", "chebyshev"]}},
        "option": OPTION,
        "output": PATH,
    }),
    "ks": _command("ks", ["samples_a", "samples_b", "output"], {
        "samples_a": PATH, "samples_b": PATH, "output": PATH,
    }),
}


def builtin_names() -> list[str]:
    files = resources.files("sevenleague").joinpath("configs")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def read_config(path: str) -> tuple[dict, Path]:
    """Parse a config file or ``builtin:<name>``; returns ``(config, base_dir)``."""
    try:
        if path.startswith(BUILTIN_PREFIX):
            name = path[len(BUILTIN_PREFIX):]
            res = resources.files("sevenleague").joinpath("configs", f"{name}.json")
            if not res.is_file():
                raise ConfigError(f"no bundled config {name!r}; available: {', '.join(builtin_names())}")
            return json.loads(res.read_text()), Path.cwd()
        p = Path(path)
        return json.loads(p.read_text()), p.resolve().parent
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def validate(cfg: dict, command: str) -> None:
    """Schema check; unknown keys are errors. Raises :class:`ConfigError` naming the field path."""
    schema = SCHEMAS[command]
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = []
        for e in errors:
            path = [str(p) for p in e.absolute_path]
            if e.validator == "required":
                for name in e.validator_value:
                    if name not in e.instance:
                        lines.append(f"  {'/'.join(path + [name])}: required field missing")
                continue
            lines.append(f"  {'/'.join(path) or '<root>'}: {e.message}")
        raise ConfigError("invalid config for '{}':\n{}".format(command, "\n".join(lines)))


def output_dir(cli_value: str | None) -> Path:
    """``--out-dir`` if given, else ``$SEVENLEAGUE_OUTPUT_DIR``, else ``./runs``."""
    if cli_value:
        return Path(cli_value)
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def resolve_input(name: str, out_dir: Path, base_dir: Path, producer: str) -> Path:
    """Find an upstream artifact in the output directory, then next to the config."""
    p = Path(name)
    candidates = [p] if p.is_absolute() else [out_dir / p, base_dir / p]
    for c in candidates:
        if c.exists():
            return c
    raise MissingArtifact(f"{name} not found (looked in {', '.join(str(c.parent) for c in candidates)}); "
                          f"produce it with `sevenleague {producer}`")

"""Run configuration, manifests and deterministic CSV emission.

A run config is a JSON object with a generator spec, a schedule spec and
experiment parameters.  Every run writes a manifest echoing the fully
resolved config plus a content hash; re-running from a manifest reproduces
the run byte for byte.  CSV output uses '.' decimals, LF line endings and
shortest round-trip float formatting so golden-file comparisons are stable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .generators import GeneratorMatrix, generator_from_dict
from .schedules import FreezingSchedule, schedule_from_dict


@dataclass
class RunConfig:
    generator: GeneratorMatrix
    schedule: FreezingSchedule | None
    experiment: str
    n_steps: int = 0
    n_replicates: int = 1
    horizon: float = 0.0
    a: float = 1.0
    p: float = 0.0
    upsilon: float = 0.0
    seed: int = 0
    checkpoints: str | list | None = None
    init: object = "uniform"
    threads: int = 1
    raw: dict = field(default_factory=dict)


_EXPERIMENTS = ("chain", "ezz", "ou", "limits")


def load_config(source: dict | str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse a config dict, JSON file path, or an emitted manifest."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = dict(source)
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # manifest round-trip
    if overrides:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        gen = generator_from_dict(data["generator"])
    except KeyError:
        raise ConfigError("config needs a 'generator' section")
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad generator spec: {exc}") from exc
    schedule = None
    if "schedule" in data:
        try:
            schedule = schedule_from_dict(data["schedule"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad schedule spec: {exc}") from exc
    experiment = data.get("experiment", "chain")
    if experiment not in _EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}, expected one of {_EXPERIMENTS}")
    if experiment == "chain" and schedule is None:
        raise ConfigError("chain experiments need a 'schedule' section")
    try:
        cfg = RunConfig(
            generator=gen,
            schedule=schedule,
            experiment=experiment,
            n_steps=int(data.get("N", 0)),
            n_replicates=int(data.get("M", 1)),
            horizon=float(data.get("T", 0.0)),
            a=float(data.get("a", 1.0)),
            p=float(data.get("p", 0.0)),
            upsilon=float(data.get("upsilon", 0.0)),
            seed=int(data.get("seed", 0)),
            checkpoints=data.get("checkpoints"),
            init=data.get("init", "uniform"),
            threads=int(data.get("threads", 1)),
            raw=data,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if cfg.n_steps < 0 or cfg.n_replicates < 1 or cfg.horizon < 0:
        raise ConfigError("N, M, T must be nonnegative (M >= 1)")
    if cfg.a <= 0:
        raise ConfigError("a must be positive")
    return cfg


def config_hash(data: dict) -> str:
    """Content hash of the canonical JSON encoding."""
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(out_dir: Path, cfg: RunConfig, outputs: list[str]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": cfg.raw,
        "config_hash": config_hash(cfg.raw),
        "outputs": outputs,
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def fmt_float(v: float) -> str:
    """Shortest decimal string that round-trips the double exactly."""
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows) -> None:
    """Locale-free CSV: '.' decimal, LF endings, round-trip float formatting."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                else:
                    cells.append(fmt_float(v))
            fh.write(",".join(cells) + "\n")

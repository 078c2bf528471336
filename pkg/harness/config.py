"""
Run configuration: key=value files read with python-dotenv.

Precedence, lowest first: sweep defaults from SWEEPS, the named scene,
keys from the config file, then CLI overrides.
"""
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from dotenv import dotenv_values

from coarray.cp_decomposition import INIT_METHODS, TalsConfig
from coarray.emvs_model import ANGLE_FIELDS, SceneConfig
from coarray.errors import ConfigError
from coarray.geometry import build_coprime_array

from .scenarios import STANDARD_ARRAYS, SWEEPS, check_degree_grids, scene_degrees, targets_from_degrees
from .utils import parse_bool, parse_float, parse_int, parse_values

logger = logging.getLogger(__name__)

SWEEP_AXES = ("none", "snr_db", "snapshots", "k")

KNOWN_KEYS = set(ANGLE_FIELDS) | {
    "m1", "m2", "n1", "n2", "power", "snr_db", "snapshots", "trials", "seed",
    "sweep", "sweep_values", "k_values", "exact_covariance", "noiseless", "workers",
    "scene", "with_crb", "tals_max_iter", "tals_tol", "tals_restarts", "tals_init",
}


@dataclass(frozen=True)
class RunConfig:
    m1: int = STANDARD_ARRAYS["m1"]
    m2: int = STANDARD_ARRAYS["m2"]
    n1: int = STANDARD_ARRAYS["n1"]
    n2: int = STANDARD_ARRAYS["n2"]
    targets_deg: dict = field(default_factory=dict)
    powers: tuple = (1.0,)
    snr_db: float = 10.0
    snapshots: int = 200
    trials: int = 100
    seed: int = 0
    sweep: str = "none"
    sweep_values: tuple = ()
    exact_covariance: bool = False
    noiseless: bool = False
    workers: int = 1
    with_crb: bool = False
    scene_name: str = ""
    tals_max_iter: int = 2000
    tals_tol: float = 1e-8
    tals_restarts: int = 3
    tals_init: str = "gevd"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1, got {}".format(self.trials))
        if self.sweep not in SWEEP_AXES:
            raise ConfigError("sweep must be one of {}, got {!r}".format(SWEEP_AXES, self.sweep))
        if self.sweep != "none":
            if not self.sweep_values:
                raise ConfigError("sweep over {} needs sweep_values".format(self.sweep))
            vals = list(self.sweep_values)
            up = all(b > a for a, b in zip(vals, vals[1:]))
            down = all(b < a for a, b in zip(vals, vals[1:]))
            if not (up or down):
                raise ConfigError("sweep_values must be strictly monotone, got {}".format(vals))
        if self.snapshots < 1:
            raise ConfigError("snapshots must be >= 1, got {}".format(self.snapshots))
        if self.workers < 1:
            raise ConfigError("workers must be >= 1, got {}".format(self.workers))
        if self.tals_init not in INIT_METHODS:
            raise ConfigError("tals_init must be one of {}, got {!r}".format(INIT_METHODS, self.tals_init))
        check_degree_grids(self.targets_deg)
        if self.sweep == "k":
            for k in self.sweep_values:
                if int(k) != k or not 1 <= k <= self.k:
                    raise ConfigError("K sweep value {} outside 1..{}".format(k, self.k))

    @property
    def k(self) -> int:
        return len(self.targets_deg[ANGLE_FIELDS[0]])

    def transmit(self):
        return build_coprime_array(self.m1, self.m2, "transmit")

    def receive(self):
        return build_coprime_array(self.n1, self.n2, "receive")

    def scene(self, seed: int = None, snr_db: float = None, snapshots: int = None, k: int = None) -> SceneConfig:
        """SceneConfig for one trial; unset arguments take the config values."""
        return SceneConfig(
            transmit=self.transmit(),
            receive=self.receive(),
            targets=targets_from_degrees(self.targets_deg, powers=self.powers, k=k),
            snapshots=int(self.snapshots if snapshots is None else snapshots),
            snr_db=float(self.snr_db if snr_db is None else snr_db),
            rng_seed=int(self.seed if seed is None else seed),
            noiseless=self.noiseless,
        )

    def tals_config(self, k: int, seed: int) -> TalsConfig:
        return TalsConfig(
            k=k, max_iter=self.tals_max_iter, tol=self.tals_tol,
            restarts=self.tals_restarts, rng_seed=seed, init=self.tals_init,
        )

    def sweep_points(self) -> list:
        """[(value, scene overrides)] for every sweep point."""
        if self.sweep == "none":
            return [(None, {})]
        points = []
        for val in self.sweep_values:
            if self.sweep == "snr_db":
                points.append((float(val), {"snr_db": float(val)}))
            else:
                points.append((int(val), {self.sweep: int(val)}))
        return points

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def summary(self) -> dict:
        """JSON-ready view of the config."""
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["powers"] = list(self.powers)
        out["sweep_values"] = list(self.sweep_values)
        out["k"] = self.k
        return out


def _read_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found: {}".format(path))
    try:
        raw = dotenv_values(path, encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError("could not read config {}: {}".format(path, e))
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError("unknown config keys in {}: {}".format(path, ", ".join(unknown)))
    return {key: val for key, val in raw.items() if val is not None}


def _coerce(values: dict):
    kwargs = {}
    grids = {}
    for key, val in values.items():
        if key in ANGLE_FIELDS:
            grids[key] = parse_values(val)
        elif key in ("m1", "m2", "n1", "n2", "snapshots", "trials", "seed", "workers",
                     "tals_max_iter", "tals_restarts"):
            kwargs[key] = parse_int(val, key)
        elif key in ("snr_db", "tals_tol"):
            kwargs[key] = parse_float(val, key)
        elif key in ("exact_covariance", "noiseless", "with_crb"):
            kwargs[key] = parse_bool(val, key)
        elif key == "power":
            kwargs["powers"] = tuple(parse_values(val))
        elif key in ("sweep_values", "k_values"):
            kwargs["sweep_values"] = tuple(parse_values(val))
        elif key == "sweep":
            kwargs["sweep"] = str(val).strip()
        elif key == "tals_init":
            kwargs["tals_init"] = str(val).strip()
        elif key == "scene":
            kwargs["scene_name"] = str(val).strip()
    return kwargs, grids


def load_config(path=None, experiment: str = None, overrides: dict = None) -> RunConfig:
    """
    Build a RunConfig.

    Parameters
    ----------
    path : str or Path, optional
        key=value config file.
    experiment : str, optional
        Key of SWEEPS whose defaults seed the config (e.g. "sweep-snr").
    overrides : dict, optional
        Raw key=value pairs applied last (CLI flags).
    """
    merged = {}
    if experiment is not None:
        if experiment not in SWEEPS:
            raise ConfigError("unknown experiment {!r}".format(experiment))
        merged.update({k: v for k, v in SWEEPS[experiment].items() if k != "description"})
    if "COARRAY_WORKERS" in os.environ:
        merged["workers"] = os.environ["COARRAY_WORKERS"]
    if path is not None:
        merged.update(_read_file(path))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = sorted(set(merged) - KNOWN_KEYS - {"description"})
    if unknown:
        raise ConfigError("unknown config keys: {}".format(", ".join(unknown)))

    kwargs, grids = _coerce(merged)
    scene = kwargs.get("scene_name") or ("" if grids else "three_targets")
    targets = scene_degrees(scene) if scene else {}
    targets.update(grids)
    kwargs["scene_name"] = scene
    if kwargs.get("sweep") == "k" and "sweep_values" in kwargs:
        kwargs["sweep_values"] = tuple(int(v) for v in kwargs["sweep_values"])
    cfg = RunConfig(targets_deg=targets, **kwargs)
    logger.debug("loaded config: K=%d, sweep=%s, trials=%d", cfg.k, cfg.sweep, cfg.trials)
    return cfg

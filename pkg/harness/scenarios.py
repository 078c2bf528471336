"""
Built-in target scenes and sweep definitions.

Scenes are degree grids keyed by parameter name, written the way they are
tabulated so they can be checked by eye. SWEEPS maps each CLI experiment to
its default axis, scene and sizes; config files override any of them.
"""
from coarray.emvs_model import ANGLE_FIELDS, TargetParams
from coarray.errors import ConfigError
from coarray.geometry import build_coprime_array

from .utils import parse_values

STANDARD_ARRAYS = {"m1": 3, "m2": 4, "n1": 3, "n2": 5}

# 13 targets; K sweeps take the first K of each grid
TABLE2 = {
    "theta_t": "10:5:70",
    "phi_t":   "5:5:65",
    "gamma_t": "5:3.75:50",
    "eta_t":   "3:5:63",
    "theta_r": "15:5:75",
    "phi_r":   "20:3.75:65",
    "gamma_r": "5:5:65",
    "eta_r":   "10:5:70",
}

THREE_TARGETS = {
    "theta_t": "40, 20, 30",
    "phi_t":   "15, 25, 35",
    "gamma_t": "10, 22, 35",
    "eta_t":   "38, 48, 56",
    "theta_r": "24, 38, 16",
    "phi_r":   "21, 32, 55",
    "gamma_r": "42, 33, 60",
    "eta_r":   "17, 27, 39",
}

CLOSE_PAIR = {
    "theta_t": "22, 23",
    "phi_t":   "26, 28",
    "gamma_t": "45, 55",
    "eta_t":   "53, 63",
    "theta_r": "33, 35",
    "phi_r":   "34, 36",
    "gamma_r": "20, 65",
    "eta_r":   "28, 47",
}

SCENES = {
    "table2": TABLE2,
    "three_targets": THREE_TARGETS,
    "close_pair": CLOSE_PAIR,
}

SWEEPS = {
    "sweep-snr": {
        "description": "RMSE versus SNR at fixed snapshot count",
        "sweep": "snr_db",
        "sweep_values": "0:5:20",
        "scene": "three_targets",
        "snapshots": 200,
        "trials": 200,
    },
    "sweep-snapshots": {
        "description": "RMSE versus snapshot count at fixed SNR",
        "sweep": "snapshots",
        "sweep_values": "100:100:1000",
        "scene": "three_targets",
        "snr_db": 10,
        "trials": 200,
    },
    "sweep-k": {
        "description": "RMSE versus number of targets (first K rows of the 13-target grid)",
        "sweep": "k",
        "sweep_values": "2:1:8",
        "scene": "table2",
        "snr_db": 10,
        "snapshots": 200,
        "trials": 200,
    },
    "bias": {
        "description": "Bias of two closely spaced targets versus SNR or snapshots",
        "sweep": "snr_db",
        "sweep_values": "0:5:20",
        "scene": "close_pair",
        "snapshots": 200,
        "trials": 200,
    },
    "scatter": {
        "description": "Per-trial estimates of the 13-target scene",
        "sweep": "none",
        "scene": "table2",
        "snr_db": 10,
        "snapshots": 200,
        "trials": 100,
    },
    "crb": {
        "description": "Cramer-Rao bound versus SNR",
        "sweep": "snr_db",
        "sweep_values": "0:5:20",
        "scene": "three_targets",
        "snapshots": 200,
        "trials": 1,
    },
}


def scene_degrees(name: str) -> dict:
    """Parsed degree lists of a named scene, validated to a common K."""
    if name not in SCENES:
        raise ConfigError("unknown scene {!r}; choose from {}".format(name, sorted(SCENES)))
    grids = {key: parse_values(text) for key, text in SCENES[name].items()}
    check_degree_grids(grids)
    return grids


def check_degree_grids(grids: dict) -> int:
    missing = [name for name in ANGLE_FIELDS if name not in grids]
    if missing:
        raise ConfigError("missing target parameters: {}".format(", ".join(missing)))
    lengths = {name: len(grids[name]) for name in ANGLE_FIELDS}
    if len(set(lengths.values())) != 1:
        raise ConfigError("target lists disagree in length: {}".format(lengths))
    k = lengths[ANGLE_FIELDS[0]]
    if k < 1:
        raise ConfigError("no targets given")
    return k


def targets_from_degrees(grids: dict, powers=None, k: int = None) -> list:
    """TargetParams for the first `k` columns of a degree grid."""
    total = check_degree_grids(grids)
    k = total if k is None else k
    if k > total:
        raise ConfigError("asked for {} targets, scene has {}".format(k, total))
    powers = [1.0] * total if not powers else list(powers)
    if len(powers) == 1:
        powers = powers * total
    if len(powers) < k:
        raise ConfigError("{} powers given for {} targets".format(len(powers), k))
    return [
        TargetParams.from_degrees([grids[name][i] for name in ANGLE_FIELDS], power=powers[i])
        for i in range(k)
    ]


def table2_targets(k: int = 13) -> list:
    return targets_from_degrees(scene_degrees("table2"), k=k)


def three_target_scene() -> list:
    return targets_from_degrees(scene_degrees("three_targets"))


def close_pair_targets() -> list:
    return targets_from_degrees(scene_degrees("close_pair"))


def standard_arrays():
    """(3, 4) transmit and (3, 5) receive arrays: 9 and 10 elements."""
    return (
        build_coprime_array(STANDARD_ARRAYS["m1"], STANDARD_ARRAYS["m2"], "transmit"),
        build_coprime_array(STANDARD_ARRAYS["n1"], STANDARD_ARRAYS["n2"], "receive"),
    )

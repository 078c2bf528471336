"""
Shared value parsers for run configs.
Config files are hand-written, so numbers arrive as strings, lists as comma
separated text and grids as MATLAB-style ranges.
"""
import math

from coarray.errors import ConfigError

RANGE_TOL = 1e-9


def parse_range(text: str) -> list:
    """'start:step:stop' (stop inclusive) or 'start:stop' with unit step."""
    parts = [p.strip() for p in text.split(":")]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError("malformed range {!r}".format(text))
    if len(nums) == 2:
        start, step, stop = nums[0], 1.0, nums[1]
    elif len(nums) == 3:
        start, step, stop = nums
    else:
        raise ConfigError("range {!r} needs 2 or 3 fields".format(text))
    if step == 0:
        raise ConfigError("range {!r} has zero step".format(text))
    count = math.floor((stop - start) / step + RANGE_TOL) + 1
    if count < 1:
        raise ConfigError("range {!r} is empty".format(text))
    return [start + i * step for i in range(count)]


def parse_values(val) -> list:
    """
    Comma separated numbers, ranges, or a mix of both.

    '10:5:70' -> [10, 15, ..., 70]; '40, 20, 30' -> [40, 20, 30];
    brackets are ignored so '[5:3.75:50]' transcribes verbatim.
    """
    if val is None:
        return []
    if isinstance(val, (int, float)):
        return [float(val)]
    if isinstance(val, (list, tuple)):
        return [float(v) for v in val]
    text = str(val).replace("[", "").replace("]", "").strip()
    if not text:
        return []
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" in chunk:
            out.extend(parse_range(chunk))
            continue
        try:
            out.append(float(chunk))
        except ValueError:
            raise ConfigError("not a number: {!r}".format(chunk))
    return out


def parse_int(val, name: str) -> int:
    try:
        num = float(val)
    except (TypeError, ValueError):
        raise ConfigError("{} must be an integer, got {!r}".format(name, val))
    if not num.is_integer():
        raise ConfigError("{} must be an integer, got {!r}".format(name, val))
    return int(num)


def parse_float(val, name: str) -> float:
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError("{} must be a number, got {!r}".format(name, val))


def parse_bool(val, name: str) -> bool:
    if isinstance(val, bool):
        return val
    text = str(val).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError("{} must be true/false, got {!r}".format(name, val))


def trial_seed(base_seed: int, trial_index: int) -> int:
    """Per-trial RNG seed: base seed XOR trial index."""
    return int(base_seed) ^ int(trial_index)

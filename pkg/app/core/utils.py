# app/core/utils.py
import math
import os
from fractions import Fraction
from typing import Union

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

Number = Union[int, float, Fraction]


def get_env_value(key: str, default: str = None) -> str:
    """Get environment variable value with optional default"""
    return os.getenv(key, default)


def get_env_int(key: str, default: int) -> int:
    return int(get_env_value(key, str(default)))


def get_env_float(key: str, default: float) -> float:
    return float(get_env_value(key, repr(default)))


def default_threads() -> int:
    raw = get_env_value("POLYA_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def as_fraction(x: Number) -> Fraction:
    """
    Exact rational view of a number.
    Floats are converted exactly (binary value), never rounded.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"cannot represent {x} as a fraction")
    return Fraction(x)


def neg_log1m(z: float) -> float:
    """-log(1-z), i.e. the total mass of tau_z"""
    return -math.log1p(-z)

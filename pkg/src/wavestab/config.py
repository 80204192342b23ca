"""INI configuration for the command line.

Sections and keys (``*`` marks required keys)::

    [run]         case*, d*, P*, eps, seed
    [profile]     L*, lambda*, beta*, alpha, gamma
    [disturbance] kind, amplitude, omega, mu
    [grid]        N*, ladder, refine
    [horizon]     T*, cfl, stride
    [init]        shape, amplitude, mode, frame
    [simulate]    mode (plant | target), slack
    [resolvent]   data (zero | constant | random), m, n, hL, N, sigmas
    [sweep]       key, values, workers

Profile coefficients are constants. Overrides use ``section.key=value``.
"""

import configparser
import math
from dataclasses import dataclass

from .exceptions import ConfigError

__all__ = ["load_config", "parse_config", "Settings", "DEFAULT_CONFIG"]

REQUIRED = {
    "run": ("case", "d", "P"),
    "profile": ("L", "lambda", "beta"),
    "grid": ("N",),
    "horizon": ("T",),
}

DEFAULT_CONFIG = """\
[run]
case = DD
d = 1
P = 1
eps = 1e-3
seed = 0

[profile]
L = 1
lambda = 0.5
beta = 8
gamma = 0

[disturbance]
kind = raised_cosine
amplitude = 1
omega = 6.283185307179586

[grid]
N = 200
ladder = 32, 64, 128
refine = 8

[horizon]
T = 5
cfl = 0.5
stride = 10

[init]
shape = bump
amplitude = 1
frame = target

[simulate]
mode = plant
slack = 0.2

[resolvent]
data = constant
n = 4
m = 0
N = 2000
sigmas = 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6
"""


def _parser():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (P vs p)
    return cp


def _float(cp, sec, key, default=None):
    if not cp.has_option(sec, key):
        if default is None:
            raise ConfigError(f"missing config key [{sec}] {key}", key=f"{sec}.{key}")
        return default
    raw = cp.get(sec, key)
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"[{sec}] {key} = {raw!r} is not a number", key=f"{sec}.{key}") from None
    if not math.isfinite(val):
        raise ConfigError(f"[{sec}] {key} must be finite", key=f"{sec}.{key}")
    return val


def _int(cp, sec, key, default=None):
    val = _float(cp, sec, key, default)
    if val != int(val):
        raise ConfigError(f"[{sec}] {key} must be an integer", key=f"{sec}.{key}")
    return int(val)


def _str(cp, sec, key, default=None):
    if not cp.has_option(sec, key):
        if default is None:
            raise ConfigError(f"missing config key [{sec}] {key}", key=f"{sec}.{key}")
        return default
    return cp.get(sec, key).strip()


def _floats(cp, sec, key, default=None):
    if not cp.has_option(sec, key):
        if default is None:
            raise ConfigError(f"missing config key [{sec}] {key}", key=f"{sec}.{key}")
        return list(default)
    raw = cp.get(sec, key)
    try:
        vals = [float(t) for t in raw.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"[{sec}] {key} = {raw!r} is not a list of numbers", key=f"{sec}.{key}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"[{sec}] {key} must be a non-empty list of finite numbers", key=f"{sec}.{key}")
    return vals


@dataclass(frozen=True)
class Settings:
    """Typed view of a configuration; builders live in the CLI."""

    raw: configparser.ConfigParser

    def get(self, sec, key, kind=float, default=None):
        fn = {float: _float, int: _int, str: _str, list: _floats}[kind]
        return fn(self.raw, sec, key, default)

    def has(self, sec, key):
        return self.raw.has_option(sec, key)

    def text(self):
        import io

        buf = io.StringIO()
        self.raw.write(buf)
        return buf.getvalue()


def parse_config(text, overrides=()):
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, key.strip(), value.strip())
    for sec, keys in REQUIRED.items():
        for key in keys:
            if not cp.has_option(sec, key):
                raise ConfigError(f"missing config key [{sec}] {key}", key=f"{sec}.{key}")
    s = Settings(cp)
    case = s.get("run", "case", str)
    if case not in ("DD", "DN"):
        raise ConfigError(f"[run] case must be DD or DN, got {case!r}", key="run.case")
    return s


def load_config(path, overrides=()):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides)

"""Plain key-value run configurations.

A configuration file has the sections ``[problem]``, ``[grid]``,
``[potential]``, ``[optimizer]`` and ``[output]`` (plus an optional
``[verify]``), ``key = value`` lines and ``#`` comments::

    [problem]
    family = heat          # heat | burgers | hj | ns-dual | ns-mixed
    k = 0.1
    initial = sin_pi

    [grid]
    nx = 64
    nt = 64
    t_max = 0.1

Only ``[problem]`` and ``[grid]`` are required. Every error message carries
the line number of the offending entry.
"""

import configparser
import re
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ContractError
from .grid import SpaceTimeGrid
from .legendre import quadratic_potential, quartic_potential
from .optimizer import AscentConfig

FAMILIES = ("heat", "burgers", "hj", "ns-dual", "ns-mixed")


class ConfigError(ContractError):
    """Malformed or inconsistent configuration."""


# Named initial data; the plain format has no room for expressions.
INITIAL_DATA = {
    "zero": lambda *xs: np.zeros_like(xs[0]),
    "sin_pi": lambda x: np.sin(np.pi * x),
    "sin_2pi": lambda x: np.sin(2 * np.pi * x),
    "cos_2pi": lambda x: np.cos(2 * np.pi * x),
    "burgers_wave": lambda x: 0.5 + 0.25 * np.sin(2 * np.pi * x),
    "shear": lambda x, y: (np.sin(np.pi * x) * np.sin(np.pi * y), np.zeros_like(x)),
}

INITIAL_DERIVATIVES = {
    "burgers_wave": lambda x: 0.5 * np.pi * np.cos(2 * np.pi * x),
    "sin_2pi": lambda x: 2 * np.pi * np.cos(2 * np.pi * x),
}

DEFAULT_INITIAL = {"heat": "sin_pi", "burgers": "burgers_wave", "hj": "cos_2pi",
                   "ns-dual": "shear", "ns-mixed": "shear"}

# key -> (type, default) per section
SCHEMA = {
    "problem": {
        "family": (str, None), "k": (float, 0.1), "mode": (int, 1),
        "c": (float, 2.0), "margin": (float, None), "nu_hat": (float, 0.05),
        "rho0": (float, 1.0), "sign": (int, 1), "initial": (str, None),
    },
    "grid": {
        "nx": (int, None), "nt": (int, None), "ny": (int, None),
        "x_min": (float, 0.0), "x_max": (float, 1.0),
        "y_min": (float, 0.0), "y_max": (float, 1.0),
        "t_max": (float, 1.0), "periodic": (bool, False),
    },
    "potential": {
        "kind": (str, "quadratic"), "scale": (float, 1.0),
        "a": (float, 1.0), "b": (float, 1.0),
    },
    "optimizer": {
        "method": (str, "steepest"), "step0": (float, 1.0), "max_iter": (int, 1000),
        "grad_tol": (float, 1e-8), "backtrack_factor": (float, 0.5),
        "max_backtracks": (int, 60), "residual_every": (int, 1),
        "seed": (int, 42), "init": (str, "zero"), "init_scale": (float, 0.01),
    },
    "output": {"directory": (str, "out"), "snapshot_every": (int, 0)},
    "verify": {
        "n_states": (int, 5), "n_probe": (int, 40), "h": (float, None),
        "legendre_h": (float, 1e-5),
        "state_scale": (float, None), "legendre_probes": (int, 100),
        "gradient_threshold": (float, 1e-6), "legendre_threshold": (float, 1e-5),
        "corrupt_gradient": (bool, False), "expect_singular": (bool, False),
    },
}
REQUIRED_SECTIONS = ("problem", "grid")
REQUIRED_KEYS = {"problem": ("family",), "grid": ("nx", "nt")}


@dataclass
class RunConfig:
    """Parsed configuration; sections become plain dicts of typed values."""

    problem: dict
    grid: dict
    potential: dict
    optimizer: dict
    output: dict
    verify: dict
    path: str = ""
    lines: dict = field(default_factory=dict, repr=False)

    @property
    def family(self):
        return self.problem["family"]

    def where(self, section, key):
        line = self.lines.get((section, key))
        return f"line {line}" if line else f"[{section}] {key}"

    def make_grid(self):
        g = {k: v for k, v in self.grid.items() if v is not None or k != "ny"}
        try:
            return SpaceTimeGrid(**g)
        except ContractError as exc:
            raise ConfigError(f"{self.path}: invalid grid: {exc}") from None

    def ascent_config(self):
        names = {f.name for f in fields(AscentConfig)}
        try:
            return AscentConfig(**{k: v for k, v in self.optimizer.items() if k in names})
        except ContractError as exc:
            raise ConfigError(f"{self.path}: invalid [optimizer]: {exc}") from None

    def potential_spec(self):
        p = self.potential
        if p["kind"] == "quadratic":
            return quadratic_potential(1, p["scale"])
        if p["kind"] == "quartic":
            return quartic_potential(p["a"], p["b"])
        raise ConfigError(f"{self.path}: {self.where('potential', 'kind')}: "
                          f"unknown potential {p['kind']!r} (quadratic | quartic)")

    def initial(self):
        name = self.problem["initial"] or DEFAULT_INITIAL[self.family]
        if name not in INITIAL_DATA:
            raise ConfigError(f"{self.path}: {self.where('problem', 'initial')}: unknown "
                              f"initial data {name!r}; choose from {sorted(INITIAL_DATA)}")
        return name, INITIAL_DATA[name]

    def with_value(self, dotted, value):
        """Copy with one ``section.key`` (or bare key, searched) replaced by ``value``."""
        section, key = _locate(dotted)
        kind = SCHEMA[section][key][0]
        new = RunConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        sec = dict(getattr(self, section))
        sec[key] = _convert(kind, str(value), f"--param {dotted}")
        setattr(new, section, sec)
        return new


def _locate(dotted):
    if "." in dotted:
        section, key = dotted.split(".", 1)
        if section in SCHEMA and key in SCHEMA[section]:
            return section, key
    else:
        hits = [s for s in SCHEMA if dotted in SCHEMA[s]]
        if len(hits) == 1:
            return hits[0], dotted
        if len(hits) > 1:
            raise ConfigError(f"parameter {dotted!r} is ambiguous; use section.key")
    raise ConfigError(f"unknown parameter {dotted!r}")


def _convert(kind, text, where):
    try:
        if kind is bool:
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return kind(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {text!r} as {kind.__name__}") from None


def _line_numbers(text):
    """Map ``(section, key)`` to the 1-based line where the key is set."""
    out, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip().lower()
        elif section and "=" in line:
            out[(section, line.split("=", 1)[0].strip().lower())] = n
    return out


def parse_config(text, path="<config>"):
    """Parse configuration text into a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        With a line-numbered message for syntax errors, unknown sections or
        keys, unreadable values and missing required entries.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   interpolation=None, default_section="__none__")
    try:
        cp.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: entry outside any section") from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.message}") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0]
        raise ConfigError(f"{path}: line {lineno}: expected 'key = value'") from None
    lines = _line_numbers(text)
    header = {}
    for n, raw in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", raw)
        if m:
            header[m.group(1).strip()] = n
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{path}: line {header.get(sec, '?')}: unknown section {sec!r}")
    for sec in REQUIRED_SECTIONS:
        if not cp.has_section(sec):
            raise ConfigError(f"{path}: missing section {sec}")
    parsed = {}
    for sec, schema in SCHEMA.items():
        vals = {k: default for k, (_, default) in schema.items()}
        if cp.has_section(sec):
            for key, text_val in cp.items(sec):
                where = f"{path}: line {lines.get((sec, key), '?')}"
                if key not in schema:
                    raise ConfigError(f"{where}: unknown key {key!r} in [{sec}]")
                vals[key] = _convert(schema[key][0], text_val, where)
        for key in REQUIRED_KEYS.get(sec, ()):
            if vals[key] is None:
                raise ConfigError(f"{path}: line {header.get(sec, '?')}: "
                                  f"missing key {key} in section {sec}")
        parsed[sec] = vals
    cfg = RunConfig(**parsed, path=path, lines=lines)
    if cfg.family not in FAMILIES:
        raise ConfigError(f"{path}: {cfg.where('problem', 'family')}: unknown family "
                          f"{cfg.family!r}; choose from {', '.join(FAMILIES)}")
    if cfg.optimizer["init"] not in ("zero", "random"):
        raise ConfigError(f"{path}: {cfg.where('optimizer', 'init')}: init must be "
                          "zero or random")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))

"""Line-oriented run configuration.

Format::

    # comment
    [section]
    key = value

Only keys listed in ``SCHEMA`` are accepted.  Keys whose default is
``None`` are left to the selected scenario.  ``serialize`` writes back the
explicitly given keys in schema order, so parse/serialize round-trips.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib

from .errors import ParseError, ValidationError


def _vec(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_F, _I, _S, _B, _V = float, int, str, _bool, _vec

SCHEMA = {
    "run": {"scenario": (_S, "shear_heating"), "steps": (_I, 500), "dt": (_F, None),
            "cfl": (_F, 0.5), "seed": (_I, 0), "threads": (_I, 1)},
    "grid": {"nx": (_I, 64), "ny": (_I, 64), "lx": (_F, 1.0), "ly": (_F, 1.0)},
    "material": {"preset": (_S, None), "K_E": (_F, None), "G_E": (_F, None),
                 "H_E": (_F, None), "c": (_F, None), "c1": (_F, None),
                 "alpha": (_F, None), "rho_R": (_F, None), "M": (_S, None),
                 "M0": (_F, None), "theta_melt": (_F, None), "M_floor": (_F, None),
                 "kappa": (_F, None), "flux": (_S, None), "flux_k": (_F, None),
                 "theta_ext": (_F, None), "modulation": (_S, None),
                 "modulation_amplitude": (_F, None), "tiles": (_I, None)},
    "dissipation": {"nu0": (_F, None), "nu1": (_F, None), "nu2": (_F, None),
                    "p": (_F, None), "q": (_F, None)},
    "cutoff": {"enabled": (_B, False), "lambda": (_F, 0.5)},
    "scenario": {"amplitude": (_F, None), "theta0": (_F, None), "gravity": (_V, None),
                 "forcing": (_F, None), "perturbation": (_F, 0.0)},
    "solver": {"lin_tol": (_F, 1e-9), "lin_maxiter": (_I, 500), "picard_momentum": (_I, 1),
               "picard_flow_max": (_I, 30), "picard_flow_tol": (_F, 1e-8),
               "cfl_cap": (_F, 0.9)},
    "output": {"dir": (_S, "out"), "snapshot_every": (_I, 50), "snapshots": (_B, True)},
    "audit": {"hardening_in_total": (_B, True), "theta_floor": (_F, -1e-6),
              "detfp_tol": (_F, 1e-8), "enthalpy_tol": (_F, 1e-9)},
}

CHOICES = {
    ("material", "M"): ("constant", "melting_ramp"),
    ("material", "flux"): ("insulated", "newton_cooling"),
    ("material", "modulation"): ("constant", "linear", "checkerboard"),
}

# (section, key) -> (predicate, message)
RANGES = {
    ("run", "steps"): (lambda x: x >= 1, "must be >= 1"),
    ("run", "dt"): (lambda x: x > 0, "must be > 0"),
    ("run", "cfl"): (lambda x: 0 < x <= 1, "must lie in (0, 1]"),
    ("run", "threads"): (lambda x: x >= 1, "must be >= 1"),
    ("grid", "nx"): (lambda x: x >= 8, "must be >= 8"),
    ("grid", "ny"): (lambda x: x >= 8, "must be >= 8"),
    ("grid", "lx"): (lambda x: x > 0, "must be > 0"),
    ("grid", "ly"): (lambda x: x > 0, "must be > 0"),
    ("material", "K_E"): (lambda x: x >= 0, "must be >= 0"),
    ("material", "G_E"): (lambda x: x >= 0, "must be >= 0"),
    ("material", "H_E"): (lambda x: x >= 0, "must be >= 0"),
    ("material", "c"): (lambda x: x > 0, "must be > 0"),
    ("material", "c1"): (lambda x: x > 0, "must be > 0"),
    ("material", "alpha"): (lambda x: 1 < x <= 2, "must satisfy 1 < alpha <= 2"),
    ("material", "rho_R"): (lambda x: x > 0, "must be > 0"),
    ("material", "M0"): (lambda x: x > 0, "must be > 0"),
    ("material", "theta_melt"): (lambda x: x > 0, "must be > 0"),
    ("material", "M_floor"): (lambda x: x > 0, "must be > 0"),
    ("material", "kappa"): (lambda x: x > 0, "must be > 0"),
    ("material", "flux_k"): (lambda x: x >= 0, "must be >= 0"),
    ("material", "theta_ext"): (lambda x: x >= 0, "must be >= 0"),
    ("material", "tiles"): (lambda x: x >= 1, "must be >= 1"),
    ("dissipation", "nu0"): (lambda x: x >= 0, "must be >= 0"),
    ("dissipation", "nu1"): (lambda x: x >= 0, "must be >= 0"),
    ("dissipation", "nu2"): (lambda x: x >= 0, "must be >= 0"),
    ("dissipation", "p"): (lambda x: x >= 2, "must be >= 2"),
    ("dissipation", "q"): (lambda x: x >= 2, "must be >= 2"),
    ("cutoff", "lambda"): (lambda x: 0 < x <= 1, "must lie in (0, 1]"),
    ("scenario", "theta0"): (lambda x: x >= 0, "must be >= 0"),
    ("scenario", "gravity"): (lambda x: len(x) == 2, "needs two components"),
    ("scenario", "perturbation"): (lambda x: x >= 0, "must be >= 0"),
    ("solver", "lin_tol"): (lambda x: 0 < x < 1, "must lie in (0, 1)"),
    ("solver", "lin_maxiter"): (lambda x: x >= 1, "must be >= 1"),
    ("solver", "picard_momentum"): (lambda x: x >= 1, "must be >= 1"),
    ("solver", "picard_flow_max"): (lambda x: x >= 1, "must be >= 1"),
    ("solver", "picard_flow_tol"): (lambda x: x > 0, "must be > 0"),
    ("solver", "cfl_cap"): (lambda x: 0 < x <= 1, "must lie in (0, 1]"),
    ("output", "snapshot_every"): (lambda x: x >= 1, "must be >= 1"),
}


@dataclass
class SolverConfig:
    values: dict = field(default_factory=dict)   # explicitly given {section: {key: value}}

    def get(self, section, key):
        sec = self.values.get(section, {})
        if key in sec:
            return sec[key]
        return SCHEMA[section][key][1]

    def explicit(self, section, key):
        return key in self.values.get(section, {})

    def set(self, section, key, value):
        if key not in SCHEMA.get(section, {}):
            raise ValidationError(f"unknown key [{section}] {key}")
        errs = _check_value(section, key, value)
        if errs:
            raise ValidationError(errs)
        self.values.setdefault(section, {})[key] = value
        return self

    def __eq__(self, other):
        return isinstance(other, SolverConfig) and _canon(self.values) == _canon(other.values)

    def digest(self):
        return hashlib.sha256(serialize(self).encode("utf-8")).hexdigest()


def _canon(values):
    return {s: dict(k) for s, k in values.items() if k}


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _check_value(section, key, value):
    errs = []
    choices = CHOICES.get((section, key))
    if choices is not None and value not in choices:
        errs.append(f"[{section}] {key} = {value!r}: expected one of {', '.join(choices)}")
    rule = RANGES.get((section, key))
    if rule is not None:
        ok, msg = rule
        if not ok(value):
            errs.append(f"[{section}] {key} {msg}")
    if section == "run" and key == "scenario":
        from .scenarios import SCENARIOS
        if value not in SCENARIOS:
            errs.append(f"[run] scenario: unknown scenario {value!r}")
    if section == "material" and key == "preset":
        from .constitutive import MATERIALS
        if value not in MATERIALS:
            errs.append(f"[material] preset: unknown material {value!r}")
    return errs


def parse_config(text):
    """Parse and validate configuration text.

    Raises ParseError for malformed lines and ValidationError (carrying all
    problems, each with its line number) for bad keys or values.
    """
    cfg = SolverConfig()
    section = None
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"line {lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ParseError(f"line {lineno}: key outside of any [section]")
        key, _, val = (s.strip() for s in line.partition("="))
        if section not in SCHEMA:
            continue
        if key not in SCHEMA[section]:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]")
            continue
        conv = SCHEMA[section][key][0]
        try:
            value = conv(val)
        except ValueError as exc:
            errors.append(f"line {lineno}: [{section}] {key}: {exc}")
            continue
        errors.extend(f"line {lineno}: {e}" for e in _check_value(section, key, value))
        cfg.values.setdefault(section, {})[key] = value
    if errors:
        raise ValidationError(errors)
    return cfg


def serialize(cfg):
    lines = []
    for section, keys in SCHEMA.items():
        given = cfg.values.get(section, {})
        body = [f"{k} = {_format(given[k])}" for k in keys if k in given]
        if body:
            if lines:
                lines.append("")
            lines.append(f"[{section}]")
            lines.extend(body)
    return "\n".join(lines) + ("\n" if lines else "")


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

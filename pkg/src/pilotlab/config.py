"""Scenario configuration: plain key=value files with sections, a versioned
schema, range validation, and a canonical hash for reproducibility manifests.

Unknown keys warn (forward compatibility); missing required keys and range
violations are errors.  Environment variables with the PILOTLAB_ prefix and
CLI flags override file values; the hash covers the resolved configuration.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = ["SCHEMA_VERSION", "ConfigReport", "ScenarioConfig",
           "load_config", "validate_config", "config_hash"]

SCHEMA_VERSION = 1

# (section, key) -> (type, default); required keys have default None
_SCHEMA: dict[tuple[str, str], tuple] = {
    ("schema", "version"): (int, None),
    ("run", "seed"): (int, 20260809),
    ("run", "threads"): (int, 1),
    ("run", "snapshot_every"): (float, 0.25),
    ("grid", "x_min"): (float, -250.0),
    ("grid", "x_max"): (float, 250.0),
    ("grid", "n"): (int, 4096),
    ("physics", "hbar"): (float, 1.0),
    ("physics", "mass"): (float, 1.0),
    ("afshar", "pinhole_separation"): (float, None),
    ("afshar", "pinhole_width"): (float, 1.0),
    ("afshar", "carrier_k"): (float, 1.0),
    ("afshar", "t_wire_grid"): (float, None),
    ("afshar", "t_lens"): (float, None),
    ("afshar", "t_image"): (float, None),
    ("afshar", "lens_focal"): (float, None),
    ("afshar", "n_wires"): (int, 6),
    ("afshar", "wire_width_frac"): (float, 0.1),
    ("afshar", "wire_width"): (float, 0.0),   # 0 = derive from frac
    ("afshar", "open_slits"): (str, "both"),
    ("afshar", "dt"): (float, 0.01),
    ("afshar", "absorber_fraction"): (float, 0.10),
    ("afshar", "absorber_strength"): (float, 1.0),
    ("afshar", "trajectories"): (int, 0),
    ("doubleslit", "separation"): (float, 8.0),
    ("doubleslit", "width"): (float, 1.0),
    ("doubleslit", "duration"): (float, 95.0),
    ("doubleslit", "dt"): (float, 0.01),
    ("doubleslit", "trajectories"): (int, 10000),
    ("doubleslit", "ks_times"): (str, "19,38,57,76,95"),
    ("grw", "lam"): (float, 2.0),
    ("grw", "alpha"): (float, 1.0),
    ("grw", "duration"): (float, 5.0),
    ("grw", "dt"): (float, 0.005),
    ("grw", "runs"): (int, 20),
    ("grw", "x_min"): (float, -40.0),
    ("grw", "x_max"): (float, 40.0),
    ("grw", "n"): (int, 512),
    ("grw", "sigma0"): (float, 1.0),
    ("duality", "pointer_sigma"): (float, 1.0),
    ("duality", "scan_points"): (int, 10),
    ("duality", "separation_max"): (float, 6.0),
    ("duality", "fringe_k"): (float, 1.0),
    ("classical", "masses"): (str, "1,4,16"),
    ("classical", "q0"): (float, 1.0),
    ("classical", "sigma0"): (float, 1.0),
    ("classical", "duration"): (float, 80.0),
    ("packet", "kappa"): (float, 0.5),
    ("packet", "k0"): (float, 2.0),
    ("packet", "t"): (float, 2.0),
}

# keys that must be present in the file for a given command
_REQUIRED: dict[str, list[tuple[str, str]]] = {
    "afshar": [("afshar", "pinhole_separation"), ("afshar", "t_wire_grid"),
               ("afshar", "t_lens"), ("afshar", "t_image"),
               ("afshar", "lens_focal")],
}


@dataclass
class ConfigReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass
class ScenarioConfig:
    """Resolved configuration: every schema key has a value."""

    values: dict[tuple[str, str], object]
    source_path: str | None = None

    def get(self, section: str, key: str):
        return self.values[(section, key)]

    def set(self, section: str, key: str, value):
        typ, _ = _SCHEMA[(section, key)]
        self.values[(section, key)] = typ(value)

    def section(self, name: str) -> dict:
        return {k: v for (s, k), v in self.values.items() if s == name}

    def float_list(self, section: str, key: str) -> list[float]:
        raw = str(self.get(section, key))
        return [float(tok) for tok in raw.split(",") if tok.strip()]

    def canonical_text(self) -> str:
        lines = [f"{s}.{k}={self.values[(s, k)]!r}"
                 for (s, k) in sorted(self.values)]
        return "\n".join(lines) + "\n"


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(cfg.canonical_text().encode("utf-8")).hexdigest()


def _parse_file(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    return parser


def _range_checks(cfg: ScenarioConfig, report: ConfigReport) -> None:
    def err(field_name, msg):
        report.errors.append(f"{field_name}: {msg}")

    g = cfg.section("grid")
    if g["x_max"] <= g["x_min"]:
        err("grid.x_max", "degenerate extent (x_max <= x_min)")
    n = g["n"]
    if n < 8 or (n & (n - 1)) != 0:
        err("grid.n", f"must be a power of two >= 8, got {n}")

    a = cfg.section("afshar")
    have_geometry = all(a.get(k) is not None for k in
                        ("pinhole_separation", "t_wire_grid", "t_lens", "t_image"))
    if have_geometry:
        if not (0 < a["t_wire_grid"] < a["t_lens"] < a["t_image"]):
            err("afshar.t_lens", "need 0 < t_wire_grid < t_lens < t_image")
        hbar = cfg.get("physics", "hbar")
        mass = cfg.get("physics", "mass")
        spacing = 2.0 * 3.141592653589793 * hbar * a["t_wire_grid"] / (
            mass * a["pinhole_separation"])
        width = a["wire_width"] if a["wire_width"] > 0 else \
            a["wire_width_frac"] * spacing
        if not 0 < width < spacing:
            err("afshar.wire_width",
                f"wire width {width:g} must lie in (0, fringe spacing "
                f"2*pi*hbar*t_wire_grid/(m*d) = {spacing:g})")
        if a["pinhole_separation"] < 4 * a["pinhole_width"]:
            err("afshar.pinhole_separation",
                "pinhole separation must be at least 4x the pinhole width")
    if a["open_slits"] not in ("1", "2", "both"):
        err("afshar.open_slits", "must be '1', '2', or 'both'")
    for sec, key in (("afshar", "dt"), ("doubleslit", "dt"), ("grw", "dt")):
        if cfg.get(sec, key) <= 0:
            err(f"{sec}.{key}", "must be positive")
    if cfg.get("grw", "alpha") <= 0:
        err("grw.alpha", "must be positive")
    if cfg.get("grw", "lam") < 0:
        err("grw.lam", "must be nonnegative")
    if cfg.get("run", "seed") < 0:
        err("run.seed", "must be a nonnegative integer")


def load_config(path: str, command: str | None = None,
                overrides: dict[tuple[str, str], object] | None = None
                ) -> ScenarioConfig:
    """Parse, apply overrides, and validate; raises ConfigError on failure."""
    cfg, report = _load_and_check(path, command, overrides)
    if not report.ok:
        raise ConfigError("; ".join(report.errors),
                          field=report.errors[0].split(":")[0])
    return cfg


def validate_config(path: str, command: str | None = None) -> ConfigReport:
    """Schema report only; no simulation is executed."""
    _, report = _load_and_check(path, command, None)
    return report


def _load_and_check(path, command, overrides):
    parser = _parse_file(path)
    report = ConfigReport()
    present: set[tuple[str, str]] = set()
    values = {sk: default for sk, (_, default) in _SCHEMA.items()}

    known_sections = {s for s, _ in _SCHEMA}
    for section in parser.sections():
        if section not in known_sections:
            report.warnings.append(f"unknown section [{section}] ignored")
            continue
        for key, raw in parser.items(section):
            if (section, key) not in _SCHEMA:
                report.warnings.append(
                    f"unknown key {section}.{key} ignored")
                continue
            typ, _ = _SCHEMA[(section, key)]
            try:
                values[(section, key)] = typ(raw)
            except ValueError:
                report.errors.append(
                    f"{section}.{key}: cannot parse {raw!r} as {typ.__name__}")
            present.add((section, key))

    if ("schema", "version") not in present:
        report.errors.append("schema.version: missing (expected "
                             f"[schema] version = {SCHEMA_VERSION})")
    elif values[("schema", "version")] != SCHEMA_VERSION:
        report.errors.append(
            f"schema.version: unsupported version "
            f"{values[('schema', 'version')]} (expected {SCHEMA_VERSION})")

    for section, key in _REQUIRED.get(command or "", []):
        if (section, key) not in present:
            report.errors.append(f"{section}.{key}: required field missing")

    cfg = ScenarioConfig(values=values, source_path=path)
    if overrides:
        for (section, key), val in overrides.items():
            cfg.set(section, key, val)
    if not report.errors:
        _range_checks(cfg, report)
    return cfg, report

"""
params.py

Scenario parameter model for the in-vessel chemical sensing analysis.

A scenario is one small blood vessel with a chemical source on its wall, a
fleet of passive sensing robots carried by the flow, and the control and
mission settings the robots use to decide they have found the source.

Units
-----
Every field is stored in the unit printed next to it in the defaults below
(micrometres, seconds, molecules, kelvin, g/cm-s viscosity, counts per mm^3,
cm^3 of tissue).  The ``*_um3`` properties convert the volumetric densities to
micrometre units so the physics modules never see mm^3 or cm^3.

Config files
------------
Sectioned ``key = value`` text, one section per group of scenario constants::

    [vessel]
    radius_um = 5          # vessel radius
    [robot]
    radius_um = 2

Missing keys fall back to the defaults, unknown sections or keys are
rejected, ``#`` starts a comment and the last assignment of a key wins.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field

from microsense.errors import ConfigError, ParamsValidationError

# ───────────── 1) UNIT CONVERSIONS ──────────────────────────────────────────────
UM3_PER_MM3   = 1.0e9
UM3_PER_CM3   = 1.0e12
UM3_PER_LITER = 1.0e15
UM3_PER_M3    = 1.0e18
UM3_PER_ML    = 1.0e12

AVOGADRO = 6.02214076e23          # 1/mol
GRAMS_PER_DALTON = 1.0 / AVOGADRO

SOLVERS = ("direct", "bicgstab")


# ───────────── 2) PARAMETER MODEL ───────────────────────────────────────────────
@dataclass(frozen=True)
class Numerics:
    """Discretisation and sampling settings shared by the solvers."""

    grid_dr: float = 0.25            # μm
    grid_dx: float = 1.0             # μm
    x_min: float = -50.0             # μm, relative to the source leading edge
    x_max: float = 450.0             # μm
    tolerance: float = 1.0e-8
    max_iterations: int = 5000
    solver: str = "direct"
    quadrature_step: float = 1.0e-4  # s
    entry_radii: int = 48
    mc_dt: float = 1.0e-4            # s
    mc_trials: int = 100_000
    seed: int = 20_070_401
    brownian: bool = False
    workers: int = 1


@dataclass(frozen=True)
class ScenarioParams:
    # tissue, vessels and source
    vessel_radius: float = 5.0            # R, μm
    vessel_length: float = 1000.0         # L, μm
    vessel_density: float = 500.0         # ρ_vessel, per mm^3
    tissue_volume: float = 1.0            # V_tissue, cm^3
    source_length: float = 30.0           # L_source, μm
    source_flux: float = 56.0             # F_source, molecule/(s μm^2)
    # fluid
    fluid_density: float = 1.0            # ρ, g/cm^3
    viscosity: float = 1.0e-2             # η, g/(cm s)
    avg_velocity: float = 1000.0          # v_avg, μm/s
    temperature: float = 310.0            # T, K
    # robots
    robot_radius: float = 1.0             # a, μm
    robot_density: float = 200.0          # ρ_robot, per mm^3
    robot_diffusion: float = 0.076        # D_robot, μm^2/s
    spurious_rate: float = 0.0            # sensor self-noise, counts/s
    # chemical signal
    chem_diffusion: float = 100.0         # D, μm^2/s
    c_source: float = 1.8                 # C_source, molecule/μm^3
    c_background: float = 6.0e-3          # c, molecule/μm^3
    # control
    measure_time: float = 0.01            # T_measure, s
    threshold: int = 10                   # C_threshold, counts
    # mission
    task_time: float = 1000.0             # T_task, s
    required_detections: int = 1          # n
    false_detections: int = 1             # n_false
    numerics: Numerics = field(default_factory=Numerics)

    # ── derived quantities in μm units ────────────────────────────────────────
    @property
    def vessel_density_um3(self) -> float:
        return self.vessel_density / UM3_PER_MM3

    @property
    def robot_density_um3(self) -> float:
        return self.robot_density / UM3_PER_MM3

    @property
    def tissue_volume_um3(self) -> float:
        return self.tissue_volume * UM3_PER_CM3

    @property
    def vessel_count(self) -> float:
        """Number of small vessels in the tissue volume, ρ_vessel·V_tissue."""
        return self.vessel_density_um3 * self.tissue_volume_um3

    @property
    def vessel_volume_fraction(self) -> float:
        return self.vessel_density_um3 * math.pi * self.vessel_radius ** 2 * self.vessel_length

    @property
    def capture_coefficient(self) -> float:
        """4πDa, the capture rate per unit concentration (μm^3/s)."""
        return 4.0 * math.pi * self.chem_diffusion * self.robot_radius

    @property
    def effective_background(self) -> float:
        # spurious sensor counts act as extra background concentration
        return self.c_background + self.spurious_rate / self.capture_coefficient

    @property
    def source_area(self) -> float:
        return 2.0 * math.pi * self.vessel_radius * self.source_length

    @property
    def source_production_rate(self) -> float:
        """Molecules released per second by the whole source patch."""
        return self.source_flux * self.source_area

    @property
    def source_passage_time(self) -> float:
        return self.source_length / self.avg_velocity

    @property
    def robot_max_radius(self) -> float:
        """Largest radial position a robot centre can reach."""
        return self.vessel_radius - self.robot_radius

    def robots_in_blood(self, blood_volume_liters: float = 5.0) -> float:
        return self.robot_density_um3 * blood_volume_liters * UM3_PER_LITER

    def robot_volume_fraction(self) -> float:
        robot_volume = 4.0 / 3.0 * math.pi * self.robot_radius ** 3
        return self.robot_density_um3 * robot_volume

    def replace(self, **changes) -> "ScenarioParams":
        """Copy with some fields changed; numerics fields are accepted too."""
        numeric_names = {f.name for f in dataclasses.fields(Numerics)}
        numeric_changes = {k: changes.pop(k) for k in list(changes) if k in numeric_names}
        if numeric_changes:
            changes["numerics"] = dataclasses.replace(self.numerics, **numeric_changes)
        return dataclasses.replace(self, **changes)


def default_params() -> ScenarioParams:
    """Table defaults for the vessel, fluid, robots, chemical and controls."""
    return ScenarioParams()


def mass_to_number_concentration(g_per_ml: float, molecular_weight_da: float) -> float:
    """Convert a mass concentration (g/ml) to molecule/μm^3."""
    molecules_per_ml = g_per_ml / (molecular_weight_da * GRAMS_PER_DALTON)
    return molecules_per_ml / UM3_PER_ML


def number_to_mass_concentration(per_um3: float, molecular_weight_da: float) -> float:
    return per_um3 * UM3_PER_ML * molecular_weight_da * GRAMS_PER_DALTON


# ───────────── 3) VALIDATION ────────────────────────────────────────────────────
# symbol used in violation messages, when it differs from the field name
_SYMBOLS = {
    "threshold": "C_threshold",
    "required_detections": "n",
    "false_detections": "n_false",
}

_STRICTLY_POSITIVE = (
    "vessel_radius", "vessel_length", "vessel_density", "tissue_volume", "source_length",
    "fluid_density", "viscosity", "avg_velocity", "temperature",
    "robot_radius", "robot_density", "robot_diffusion", "chem_diffusion",
    "measure_time", "task_time",
)
_NON_NEGATIVE = ("source_flux", "c_source", "c_background", "spurious_rate")
_AT_LEAST_ONE = ("threshold", "required_detections", "false_detections")


def validate(p: ScenarioParams) -> list[str]:
    """Return every violated constraint; an empty list means the scenario is usable."""
    violations: list[str] = []

    for name in _STRICTLY_POSITIVE:
        if not getattr(p, name) > 0:
            violations.append(f"{name} > 0")
    for name in _NON_NEGATIVE:
        if not getattr(p, name) >= 0:
            violations.append(f"{name} ≥ 0")
    for name in _AT_LEAST_ONE:
        if not getattr(p, name) >= 1:
            violations.append(f"{_SYMBOLS.get(name, name)} ≥ 1")
    if not p.robot_radius < p.vessel_radius:
        violations.append("robot_radius < vessel_radius")

    num = p.numerics
    for name in ("grid_dr", "grid_dx", "tolerance", "quadrature_step", "mc_dt"):
        if not getattr(num, name) > 0:
            violations.append(f"{name} > 0")
    if not num.x_min < 0 < p.source_length < num.x_max:
        violations.append("x_min < 0 < source_length < x_max")
    if num.max_iterations < 1:
        violations.append("max_iterations ≥ 1")
    if num.solver not in SOLVERS:
        violations.append(f"solver in {SOLVERS}")
    if num.entry_radii < 2:
        violations.append("entry_radii ≥ 2")
    if num.mc_dt > p.measure_time / 10.0:
        violations.append("mc_dt ≤ measure_time/10")
    if num.mc_trials < 1:
        violations.append("mc_trials ≥ 1")
    if num.workers < 1:
        violations.append("workers ≥ 1")
    return violations


def check(p: ScenarioParams) -> ScenarioParams:
    """Raise ParamsValidationError unless ``validate(p)`` is empty."""
    violations = validate(p)
    if violations:
        raise ParamsValidationError(violations)
    return p


# ───────────── 4) CONFIG SCHEMA ─────────────────────────────────────────────────
# section -> {config key: field name}; numerics keys land on ScenarioParams.numerics
CONFIG_SCHEMA: dict[str, dict[str, str]] = {
    "tissue": {
        "vessel_density_per_mm3": "vessel_density",
        "volume_cm3":             "tissue_volume",
    },
    "vessel": {
        "radius_um":              "vessel_radius",
        "length_um":              "vessel_length",
        "source_length_um":       "source_length",
        "source_flux_per_s_um2":  "source_flux",
    },
    "fluid": {
        "density_g_cm3":          "fluid_density",
        "viscosity_g_cm_s":       "viscosity",
        "avg_velocity_um_s":      "avg_velocity",
        "temperature_k":          "temperature",
    },
    "robot": {
        "radius_um":              "robot_radius",
        "density_per_mm3":        "robot_density",
        "diffusion_um2_s":        "robot_diffusion",
        "spurious_rate_per_s":    "spurious_rate",
    },
    "chemical": {
        "diffusion_um2_s":        "chem_diffusion",
        "source_conc_per_um3":    "c_source",
        "background_per_um3":     "c_background",
    },
    "control": {
        "measure_time_s":         "measure_time",
        "threshold":              "threshold",
    },
    "mission": {
        "task_time_s":            "task_time",
        "required_detections":    "required_detections",
        "false_detections":       "false_detections",
    },
    "numerics": {
        "grid_dr_um":             "grid_dr",
        "grid_dx_um":             "grid_dx",
        "x_min_um":               "x_min",
        "x_max_um":               "x_max",
        "tolerance":              "tolerance",
        "max_iterations":         "max_iterations",
        "solver":                 "solver",
        "quadrature_step_s":      "quadrature_step",
        "entry_radii":            "entry_radii",
        "mc_dt_s":                "mc_dt",
        "mc_trials":              "mc_trials",
        "seed":                   "seed",
        "brownian":               "brownian",
        "workers":                "workers",
    },
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioParams)}
_FIELD_TYPES.update({f.name: f.type for f in dataclasses.fields(Numerics)})


def _new_parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(
        strict=False,                       # repeated keys: last one wins
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        default_section="__defaults__",
        interpolation=None,
    )


def _locate(text: str, section: str, key: str) -> int | None:
    """Line number (1-based) of the last ``key`` assignment inside ``[section]``."""
    if not key:
        for lineno, line in enumerate(text.splitlines(), start=1):
            if line.split("#", 1)[0].strip().lower() == f"[{section}]":
                return lineno
        return None
    current = None
    found = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        header = re.fullmatch(r"\[\s*([^\]]+?)\s*\]", stripped)
        if header:
            current = header.group(1).lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", stripped, re.I):
            found = lineno
    return found


def _convert(parser: configparser.ConfigParser, section: str, key: str, name: str):
    kind = _FIELD_TYPES[name]
    if kind in ("bool", bool):
        return parser.getboolean(section, key)
    raw = parser.get(section, key).strip()
    if kind in ("int", int):
        return int(raw)
    if kind in ("float", float):
        return float(raw)
    return raw


def load_config(text: str) -> ScenarioParams:
    """Parse a scenario document; missing keys keep their defaults."""
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"key outside of any section: {exc.line.strip()!r}", exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()!r}", lineno) from exc

    top: dict[str, object] = {}
    numeric: dict[str, object] = {}
    numeric_names = {f.name for f in dataclasses.fields(Numerics)}

    for section in parser.sections():
        schema = CONFIG_SCHEMA.get(section.lower())
        if schema is None:
            raise ConfigError(f"unknown section [{section}]", _locate(text, section.lower(), ""))
        for key in parser.options(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  _locate(text, section.lower(), key))
            name = schema[key]
            try:
                value = _convert(parser, section, key, name)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {exc}",
                                  _locate(text, section.lower(), key)) from exc
            (numeric if name in numeric_names else top)[name] = value

    params = ScenarioParams(numerics=Numerics(**numeric), **top)
    return check(params)


def load_config_file(path) -> ScenarioParams:
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(p: ScenarioParams) -> str:
    """Serialise ``p`` so that ``load_config(dump_config(p)) == p``."""
    lines = ["# microsense scenario"]
    for section, schema in CONFIG_SCHEMA.items():
        lines.append("")
        lines.append(f"[{section}]")
        owner = p.numerics if section == "numerics" else p
        for key, name in schema.items():
            lines.append(f"{key} = {_format(getattr(owner, name))}")
    return "\n".join(lines) + "\n"

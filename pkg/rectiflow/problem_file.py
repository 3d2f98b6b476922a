"""Problem files: YAML problem descriptions merged over the bundled defaults."""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from loguru import logger

from .errors import InputError, NotTrivialForm, ProblemFileError
from .integrator import Box, Interval, Tolerances, VectorFieldSpec
from .rectify import Point, SpaceTimeMap, default_probe_center
from .symmetry import WreathElement, validate_element, wreath_to_map

BUNDLED_DEFAULTS = Path(__file__).parent / "config" / "defaults"
SETTINGS_FILE = "settings.yaml"

SECTIONS = (
    "name",
    "description",
    "field",
    "rectification",
    "tolerances",
    "probe",
    "solve",
    "wreath",
    "maps",
    "symmetry",
    "diagnostics",
)


def load_settings(path: Optional[Path] = None) -> Dict[str, Any]:
    """Bundled defaults (or ``path``) as a plain dict."""
    path = Path(path) if path else BUNDLED_DEFAULTS / SETTINGS_FILE
    if not path.exists():
        return {}
    with open(path) as f:
        return yaml.safe_load(f) or {}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@dataclass
class SolveSpec:
    t0: float
    x0: List[float]
    t_target: float


@dataclass
class UniquenessSpec:
    point: Point
    candidates: List[List[str]] = field(default_factory=list)


@dataclass
class DiagnosticsSpec:
    region: Optional[Box] = None
    time_samples: int = 5
    space_samples: int = 21
    radii: Tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    growth_factor: float = 2.0
    growth_steps: int = 3
    invariance_ics: List[Point] = field(default_factory=list)
    uniqueness: List[UniquenessSpec] = field(default_factory=list)
    growth_center: Optional[List[float]] = None
    growth_half_widths: List[float] = field(default_factory=list)


@dataclass
class ProblemFile:
    name: str
    description: str
    field: VectorFieldSpec
    window: Tuple[float, float]
    base_time: Optional[float] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    probe_counts: Tuple[int, int] = (5, 5)
    probe_box: Optional[Box] = None
    solve: Optional[SolveSpec] = None
    wreath: Dict[str, WreathElement] = field(default_factory=dict)
    maps: Dict[str, SpaceTimeMap] = field(default_factory=dict)
    initial_conditions: List[Point] = field(default_factory=list)
    symmetry_samples: int = 201
    symmetry_threshold: float = 1e-4
    pushforward_threshold: float = 1e-5
    roundtrip_threshold: float = 1e-6
    solve_samples: int = 201
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    path: Optional[Path] = None

    @property
    def dimension(self) -> int:
        return self.field.dimension

    @property
    def t0(self) -> float:
        return self.base_time if self.base_time is not None else 0.5 * sum(self.window)

    def element(self, name: str) -> WreathElement:
        if name not in self.wreath:
            raise ProblemFileError(
                f"wreath element {name!r} not defined (have: {', '.join(sorted(self.wreath)) or 'none'})"
            )
        return self.wreath[name]

    def space_time_map(self, name: str) -> SpaceTimeMap:
        """A named map; wreath elements are accepted through their action."""
        if name in self.maps:
            return self.maps[name]
        if name in self.wreath:
            return wreath_to_map(self.wreath[name])
        if name == "id":
            return SpaceTimeMap.identity(self.dimension)
        known = sorted(set(self.maps) | set(self.wreath))
        raise ProblemFileError(f"map {name!r} not defined (have: {', '.join(known) or 'none'})")

    def with_overrides(self, rtol: Optional[float] = None, atol: Optional[float] = None,
                       samples: Optional[int] = None) -> "ProblemFile":
        """CLI flags on top of the file."""
        tol = self.tolerances
        if rtol is not None or atol is not None:
            tol = Tolerances(
                rtol=rtol if rtol is not None else tol.rtol,
                atol=atol if atol is not None else tol.atol,
                blowup_norm=tol.blowup_norm,
                min_step_factor=tol.min_step_factor,
            )
        updated = replace(self, tolerances=tol)
        if samples is not None:
            if samples < 2:
                raise ProblemFileError(f"--samples must be at least 2, got {samples}")
            updated = replace(updated, symmetry_samples=samples, solve_samples=samples)
        return updated


# ----------------------------------------------------------------------
# Parsing helpers
# ----------------------------------------------------------------------


def _require(data: dict, key: str, where: str) -> Any:
    if key not in data or data[key] is None:
        raise ProblemFileError(f"missing '{key}' in {where}")
    return data[key]


def _floats(values: Any, where: str) -> List[float]:
    if not isinstance(values, (list, tuple)):
        values = [values]
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{where}: expected numbers, got {values!r}") from exc


def _strings(values: Any, where: str) -> List[str]:
    if isinstance(values, str):
        values = [values]
    if not isinstance(values, list):
        raise ProblemFileError(f"{where}: expected a list of expressions, got {values!r}")
    return [str(v) for v in values]


def _box(data: Any, n: int, where: str) -> Box:
    if isinstance(data, dict):
        lower = _floats(_require(data, "lower", where), where)
        upper = _floats(_require(data, "upper", where), where)
    else:
        raise ProblemFileError(f"{where}: expected {{lower: [...], upper: [...]}}")
    if len(lower) != n or len(upper) != n:
        raise ProblemFileError(f"{where}: bounds must have {n} entries")
    return Box(tuple(lower), tuple(upper))


def _point(data: Any, n: int, where: str) -> Point:
    if not isinstance(data, dict):
        raise ProblemFileError(f"{where}: expected {{t0: ..., x0: [...]}}")
    t0 = float(_require(data, "t0", where))
    x0 = _floats(_require(data, "x0", where), where)
    if len(x0) != n:
        raise ProblemFileError(f"{where}: x0 must have {n} entries")
    return t0, x0


def _field(data: dict) -> VectorFieldSpec:
    components = _strings(_require(data, "components", "field"), "field.components")
    n = int(data.get("dimension", len(components)))
    if n != len(components):
        raise ProblemFileError(f"field.dimension is {n} but {len(components)} components given")
    bounds = _floats(data.get("time_interval", [float("-inf"), float("inf")]), "field.time_interval")
    if len(bounds) != 2:
        raise ProblemFileError("field.time_interval must be [lower, upper]")
    box = _box(data["box"], n, "field.box") if data.get("box") else None
    return VectorFieldSpec.from_text(components, Interval(*bounds), box)


def _wreath(data: dict, n: int) -> Dict[str, WreathElement]:
    elements = {}
    for name, spec in (data or {}).items():
        where = f"wreath.{name}"
        if not isinstance(spec, dict):
            raise ProblemFileError(f"{where}: expected a table with f and g")
        g = _strings(_require(spec, "g", where), f"{where}.g")
        if len(g) != n:
            raise ProblemFileError(f"{where}.g must have {n} components")
        g_inv = spec.get("g_inv")
        elements[name] = WreathElement.from_text(
            str(_require(spec, "f", where)),
            g,
            str(spec["f_inv_t"]) if spec.get("f_inv_t") is not None else None,
            _strings(g_inv, f"{where}.g_inv") if g_inv is not None else None,
            name=name,
        )
    return elements


def _maps(data: dict, n: int) -> Dict[str, SpaceTimeMap]:
    maps = {}
    for name, spec in (data or {}).items():
        where = f"maps.{name}"
        if not isinstance(spec, dict):
            raise ProblemFileError(f"{where}: expected a table with forward (and inverse)")
        forward = _strings(_require(spec, "forward", where), f"{where}.forward")
        inverse = spec.get("inverse")
        if len(forward) != n + 1:
            raise ProblemFileError(f"{where}.forward must have {n + 1} components (t first)")
        maps[name] = SpaceTimeMap.from_expressions(
            forward, _strings(inverse, f"{where}.inverse") if inverse is not None else None,
            name=name,
        )
    return maps


def _check_wreath(elements: Dict[str, WreathElement], window: Tuple[float, float],
                  probe_box: Optional[Box], space_count: int, vf: VectorFieldSpec) -> None:
    """Reject elements that are not bijections of I x M on the probe points."""
    if not elements:
        return
    box = probe_box or Box.around(default_probe_center(vf.box), 0.5)
    if box.is_subset_of(vf.box):
        points = box.grid(max(space_count, 2))
    else:
        points = [default_probe_center(vf.box)]
    for name, element in elements.items():
        problems = validate_element(element, window, points)
        if problems:
            raise ProblemFileError(f"wreath.{name}: {problems[0]}")


def _diagnostics(data: dict, n: int) -> DiagnosticsSpec:
    spec = DiagnosticsSpec(
        region=_box(data["region"], n, "diagnostics.region") if data.get("region") else None,
        time_samples=int(data.get("time_samples", 5)),
        space_samples=int(data.get("space_samples", 21)),
        radii=tuple(_floats(data.get("radii", DiagnosticsSpec.radii), "diagnostics.radii")),
        growth_factor=float(data.get("growth_factor", 2.0)),
        growth_steps=int(data.get("growth_steps", 3)),
        invariance_ics=[
            _point(p, n, f"diagnostics.invariance_ics[{i}]")
            for i, p in enumerate(data.get("invariance_ics") or [])
        ],
    )
    for i, entry in enumerate(data.get("uniqueness") or []):
        where = f"diagnostics.uniqueness[{i}]"
        point = _point(_require(entry, "point", where), n, f"{where}.point")
        candidates = [
            _strings(c, f"{where}.candidates") for c in entry.get("candidates") or []
        ]
        spec.uniqueness.append(UniquenessSpec(point, candidates))
    growth = data.get("growth")
    if growth:
        spec.growth_center = _floats(_require(growth, "center", "diagnostics.growth"),
                                     "diagnostics.growth.center")
        spec.growth_half_widths = _floats(_require(growth, "half_widths", "diagnostics.growth"),
                                          "diagnostics.growth.half_widths")
    return spec


def parse_problem(data: Dict[str, Any], path: Optional[Path] = None,
                  settings: Optional[Dict[str, Any]] = None) -> ProblemFile:
    """Build a :class:`ProblemFile` from an already-loaded mapping."""
    where = str(path) if path else "<problem>"
    if not isinstance(data, dict):
        raise ProblemFileError(f"{where}: top level must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ProblemFileError(f"{where}: unknown sections {unknown}")
    data = deep_merge(settings if settings is not None else load_settings(), data)

    try:
        vf = _field(_require(data, "field", where))
        n = vf.dimension
        rect = data.get("rectification") or {}
        window = _floats(_require(rect, "window", "rectification"), "rectification.window")
        if len(window) != 2:
            raise ProblemFileError("rectification.window must be [a, b]")
        a, b = window
        interval = vf.time_interval
        if not (a < b and interval.contains(a) and interval.contains(b)):
            raise ProblemFileError(f"window [{a}, {b}] must be a non-empty interval inside I")
        base_time = rect.get("base_time")
        if base_time is not None and not a <= float(base_time) <= b:
            raise ProblemFileError(f"base_time {base_time} is outside the window")

        tol_data = data.get("tolerances") or {}
        tolerances = Tolerances(**{k: float(v) for k, v in tol_data.items()})

        probe = data.get("probe") or {}
        counts = tuple(int(c) for c in probe.get("counts", (5, 5)))
        if len(counts) != 2 or min(counts) < 1:
            raise ProblemFileError("probe.counts must be [time_count, space_count_per_axis]")
        probe_box = _box(probe["box"], n, "probe.box") if probe.get("box") else None
        if probe_box is not None and not probe_box.is_subset_of(vf.box):
            raise ProblemFileError("probe.box must lie inside field.box")

        solve = None
        s = data.get("solve") or {}
        if "x0" in s or "t0" in s:
            t0, x0 = _point(s, n, "solve")
            solve = SolveSpec(t0, x0, float(_require(s, "t_target", "solve")))

        wreath = _wreath(data.get("wreath"), n)
        _check_wreath(wreath, (a, b), probe_box, counts[1], vf)

        symmetry = data.get("symmetry") or {}
        rectification = data.get("rectification") or {}
        problem = ProblemFile(
            name=str(data.get("name") or (path.stem if path else "problem")),
            description=str(data.get("description", "")),
            field=vf,
            window=(a, b),
            base_time=float(base_time) if base_time is not None else None,
            tolerances=tolerances,
            probe_counts=counts,
            probe_box=probe_box,
            solve=solve,
            wreath=wreath,
            maps=_maps(data.get("maps"), n),
            initial_conditions=[
                _point(p, n, f"symmetry.initial_conditions[{i}]")
                for i, p in enumerate(symmetry.get("initial_conditions") or [])
            ],
            symmetry_samples=int(symmetry.get("samples", 201)),
            symmetry_threshold=float(symmetry.get("threshold", 1e-4)),
            pushforward_threshold=float(rectification.get("pushforward_threshold", 1e-5)),
            roundtrip_threshold=float(rectification.get("roundtrip_threshold", 1e-6)),
            solve_samples=int(s.get("samples", 201)),
            diagnostics=_diagnostics(data.get("diagnostics") or {}, n),
            path=path,
        )
    except ProblemFileError:
        raise
    except (InputError, NotTrivialForm, TypeError, ValueError) as exc:
        raise ProblemFileError(f"{where}: {exc}") from exc
    return problem


def load_problem(path) -> ProblemFile:
    """Read, merge over defaults and validate a problem file."""
    path = Path(path)
    if not path.exists():
        raise ProblemFileError(f"Problem file not found: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ProblemFileError(f"{path}: invalid YAML: {exc}") from exc
    problem = parse_problem(data, path)
    logger.info(
        f"Loaded problem {problem.name!r}: n={problem.dimension}, v={problem.field.describe()}, "
        f"{len(problem.wreath)} wreath elements, {len(problem.maps)} maps"
    )
    return problem

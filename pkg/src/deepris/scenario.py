"""Scenario files: sectioned ``key = value`` text parsed with configparser.

Sections and keys (``schema_version = 1``)::

    [scenario]   schema_version, name
    [band]       f_min, f_max, bins
    [enclosure]  vertices ("x y; x y; ..." closed polygon), spacing,
                 resonance, linewidth, coupling
    [scatterers] positions ("x y; ..."), resonance, linewidth, coupling
    [tx], [rx]   position, resonance, linewidth, coupling
    [ris]        start, step (2D vectors), count, resonance_off,
                 resonance_on, linewidth, coupling
    [perturber]  pivot, offsets ("x y; ..." relative to pivot, may be empty),
                 resonance, linewidth, coupling

The same parser reads experiment files (see :mod:`deepris.cli`).
"""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

import numpy as np

from .core import FrequencyGrid, ValidationError
from .physics import Dipole, DipoleArray, Environment

SCHEMA_VERSION = 1
BUILTIN = ("default", "n10")


def read_sections(path_or_text, *, is_text: bool = False) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        if is_text:
            parser.read_string(path_or_text)
        else:
            path = Path(path_or_text)
            if not path.is_file():
                raise FileNotFoundError(f"no such file: {path}")
            parser.read(path)
    except configparser.Error as exc:
        raise ValidationError(f"malformed sectioned file: {exc}") from exc
    return parser


def parse_points(text: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros((0, 2))
    pts = []
    for chunk in text.split(";"):
        vals = chunk.split()
        if len(vals) != 2:
            raise ValidationError(f"expected 'x y', got {chunk.strip()!r}")
        pts.append([float(v) for v in vals])
    return np.array(pts, dtype=float)


def parse_vector(text: str) -> tuple[float, float]:
    pts = parse_points(text)
    if pts.shape != (1, 2):
        raise ValidationError(f"expected a single 2D vector, got {text!r}")
    return float(pts[0, 0]), float(pts[0, 1])


def sample_polygon(vertices: np.ndarray, spacing: float) -> np.ndarray:
    """Points along the closed polygon, each edge split into equal steps <= spacing."""
    if len(vertices) < 3:
        raise ValidationError("enclosure needs at least three vertices")
    if spacing <= 0:
        raise ValidationError("wall spacing must be positive")
    pts = []
    for a, b in zip(vertices, np.roll(vertices, -1, axis=0)):
        length = np.hypot(*(b - a))
        steps = max(1, int(np.ceil(length / spacing - 1e-9)))
        t = np.arange(steps)[:, None] / steps
        pts.append(a + t * (b - a))
    return np.vstack(pts)


def _get(parser, section, key, conv=float):
    try:
        raw = parser.get(section, key)
    except (configparser.NoSectionError, configparser.NoOptionError) as exc:
        raise ValidationError(f"missing [{section}] {key}") from exc
    try:
        return conv(raw)
    except ValueError as exc:
        raise ValidationError(f"bad value for [{section}] {key}: {raw!r}") from exc


def _dipole(parser, section) -> Dipole:
    return Dipole(
        position=_get(parser, section, "position", parse_vector),
        resonance_frequency=_get(parser, section, "resonance"),
        resonance_linewidth=_get(parser, section, "linewidth"),
        coupling_strength=_get(parser, section, "coupling"),
    )


def _group(parser, section, positions) -> DipoleArray:
    n = len(positions)
    return DipoleArray(
        positions=positions,
        resonance=np.full(n, _get(parser, section, "resonance")),
        linewidth=np.full(n, _get(parser, section, "linewidth")),
        coupling=np.full(n, _get(parser, section, "coupling")),
    )


def build_environment(parser: configparser.ConfigParser, *, n: int | None = None,
                      bins: int | None = None, static: bool = False) -> Environment:
    """Build an Environment; ``n``/``bins`` override the RIS size and bin count."""
    version = _get(parser, "scenario", "schema_version", int)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported scenario schema_version {version}")
    name = parser.get("scenario", "name", fallback="unnamed")

    nb = bins if bins is not None else _get(parser, "band", "bins", int)
    if nb <= 0:
        raise ValidationError(f"bin count must be positive, got {nb}")
    grid = FrequencyGrid.linspace(_get(parser, "band", "f_min"), _get(parser, "band", "f_max"), nb)

    walls = sample_polygon(_get(parser, "enclosure", "vertices", parse_points),
                           _get(parser, "enclosure", "spacing"))
    wall_group = _group(parser, "enclosure", walls)
    if parser.has_section("scatterers"):
        extra = _group(parser, "scatterers", _get(parser, "scatterers", "positions", parse_points))
        wall_group = DipoleArray(
            np.vstack([wall_group.positions, extra.positions]),
            np.concatenate([wall_group.resonance, extra.resonance]),
            np.concatenate([wall_group.linewidth, extra.linewidth]),
            np.concatenate([wall_group.coupling, extra.coupling]),
        )

    count = n if n is not None else _get(parser, "ris", "count", int)
    if count <= 0:
        raise ValidationError(f"RIS element count must be positive, got {count}")
    start = np.array(_get(parser, "ris", "start", parse_vector))
    step = np.array(_get(parser, "ris", "step", parse_vector))
    ris_pos = start + np.arange(count)[:, None] * step
    ris = DipoleArray(
        positions=ris_pos,
        resonance=np.tile([_get(parser, "ris", "resonance_off"), _get(parser, "ris", "resonance_on")], (count, 1)),
        linewidth=np.full(count, _get(parser, "ris", "linewidth")),
        coupling=np.full(count, _get(parser, "ris", "coupling")),
    )

    offsets = np.zeros((0, 2)) if static else _get(parser, "perturber", "offsets", parse_points)
    pert = _group(parser, "perturber", offsets)
    return Environment(
        walls=wall_group,
        tx=_dipole(parser, "tx"),
        rx=_dipole(parser, "rx"),
        ris=ris,
        perturber_offsets=pert,
        perturber_pivot=_get(parser, "perturber", "pivot", parse_vector),
        grid=grid,
        name=name,
    )


def builtin_text(name: str) -> str:
    if name not in BUILTIN:
        raise ValidationError(f"unknown builtin scenario {name!r}; choose from {BUILTIN}")
    return resources.files("deepris.scenarios").joinpath(f"{name}.ini").read_text()


def load_scenario(source: str | Path = "default", **overrides) -> Environment:
    """Load a scenario from a builtin name or a file path."""
    if str(source) in BUILTIN:
        parser = read_sections(builtin_text(str(source)), is_text=True)
    else:
        parser = read_sections(source)
    return build_environment(parser, **overrides)

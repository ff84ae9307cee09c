"""Human-visible stimuli: deterministic vector-drawing descriptions of
instances, shareable as JSON with the web client and convertible to SVG.

Shape kind and color family are functions of the category, exact fill and
element count of the concept, and only the arrangement (positions, rotations,
per-element jitter) comes from the instance's render seed. Two instances of
one concept therefore look like "the same kind of thing posed differently".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WorldLookupError
from .world import SceneInstance, World

SHAPE_KINDS = (
    "circle",
    "square",
    "triangle",
    "diamond",
    "pentagon",
    "hexagon",
    "star",
    "ring",
    "cross",
    "drop",
)

CANVAS = 100.0  # scenes live in a 0..100 square


@dataclass
class SceneElement:
    x: float
    y: float
    size: float
    rotation: float  # degrees

    def to_dict(self) -> dict:
        return {
            "x": round(self.x, 3),
            "y": round(self.y, 3),
            "size": round(self.size, 3),
            "rotation": round(self.rotation, 3),
        }


@dataclass
class SceneDescription:
    shape_kind: str
    color_family: str  # stable name for the category hue band
    fill: str          # concept-specific shade, #rrggbb
    stroke: str
    count: int
    elements: list[SceneElement]
    background: str = "#f7f5f0"
    schema_version: str = "scene/1"

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "shape_kind": self.shape_kind,
            "color_family": self.color_family,
            "fill": self.fill,
            "stroke": self.stroke,
            "count": self.count,
            "background": self.background,
            "elements": [e.to_dict() for e in self.elements],
        }


def _hsl_to_hex(h: float, s: float, lightness: float) -> str:
    # Standard HSL -> RGB; h in degrees, s and lightness in [0, 1].
    c = (1 - abs(2 * lightness - 1)) * s
    hp = (h % 360.0) / 60.0
    x = c * (1 - abs(hp % 2 - 1))
    r, g, b = {0: (c, x, 0.0), 1: (x, c, 0.0), 2: (0.0, c, x),
               3: (0.0, x, c), 4: (x, 0.0, c), 5: (c, 0.0, x)}[int(hp) % 6]
    m = lightness - c / 2
    return "#%02x%02x%02x" % tuple(int(round((v + m) * 255)) for v in (r, g, b))


def render_scene(instance: SceneInstance, world: World) -> SceneDescription:
    """Deterministic drawing description for one instance of the world."""
    if instance.instance_id < 0 or instance.instance_id >= len(world.instances):
        raise WorldLookupError(f"instance {instance.instance_id} not in world")
    owned = world.instances[instance.instance_id]
    if owned.concept_id != instance.concept_id or owned.render_seed != instance.render_seed:
        raise WorldLookupError(f"instance {instance.instance_id} does not belong to this world")

    cat = world.category_of(instance.concept_id)
    n_cats = max(world.n_categories, 1)
    concept_rank = instance.concept_id % world.config.concepts_per_category

    shape = SHAPE_KINDS[cat % len(SHAPE_KINDS)]
    hue = (360.0 * cat) / n_cats
    color_family = f"hue{int(round(hue)):03d}"
    # Concept picks a shade inside the category band.
    light = 0.35 + 0.4 * ((concept_rank * 7919) % 97) / 96.0
    fill = _hsl_to_hex(hue, 0.62, light)
    stroke = _hsl_to_hex(hue, 0.62, max(0.0, light - 0.25))
    count = 1 + concept_rank % 4
    base_size = 14.0 + 10.0 * ((concept_rank * 31) % 11) / 10.0

    pose = np.random.default_rng(instance.render_seed)
    elements = []
    for _ in range(count):
        margin = base_size
        x = float(pose.uniform(margin, CANVAS - margin))
        y = float(pose.uniform(margin, CANVAS - margin))
        size = float(base_size * pose.uniform(0.8, 1.2))
        rotation = float(pose.uniform(0.0, 360.0))
        elements.append(SceneElement(x, y, size, rotation))

    return SceneDescription(shape, color_family, fill, stroke, count, elements)


# ---------------------------------------------------------------------------
# SVG conversion


def _polygon_points(n: int, size: float, star: bool = False) -> list[tuple[float, float]]:
    pts = []
    spikes = n * 2 if star else n
    for i in range(spikes):
        r = size if (not star or i % 2 == 0) else size * 0.45
        ang = -np.pi / 2 + 2 * np.pi * i / spikes
        pts.append((r * np.cos(ang), r * np.sin(ang)))
    return pts


def _element_svg(shape: str, e: SceneElement, fill: str, stroke: str) -> str:
    tr = f'transform="translate({e.x:.3f} {e.y:.3f}) rotate({e.rotation:.3f})"'
    paint = f'fill="{fill}" stroke="{stroke}" stroke-width="1.5"'
    s = e.size
    if shape == "circle":
        return f'<circle r="{s:.3f}" {paint} {tr}/>'
    if shape == "ring":
        return f'<circle r="{s:.3f}" fill="none" stroke="{fill}" stroke-width="{s / 2.5:.3f}" {tr}/>'
    if shape == "square":
        return f'<rect x="{-s:.3f}" y="{-s:.3f}" width="{2 * s:.3f}" height="{2 * s:.3f}" {paint} {tr}/>'
    if shape == "cross":
        w = s * 0.4
        return (
            f'<path d="M {-w:.3f} {-s:.3f} h {2 * w:.3f} v {s - w:.3f} h {s - w:.3f} v {2 * w:.3f} '
            f'h {-(s - w):.3f} v {s - w:.3f} h {-2 * w:.3f} v {-(s - w):.3f} h {-(s - w):.3f} '
            f'v {-2 * w:.3f} h {s - w:.3f} Z" {paint} {tr}/>'
        )
    if shape == "drop":
        return (
            f'<path d="M 0 {-s:.3f} C {s:.3f} {-s * 0.2:.3f} {s * 0.8:.3f} {s:.3f} 0 {s:.3f} '
            f'C {-s * 0.8:.3f} {s:.3f} {-s:.3f} {-s * 0.2:.3f} 0 {-s:.3f} Z" {paint} {tr}/>'
        )
    sides = {"triangle": 3, "diamond": 4, "pentagon": 5, "hexagon": 6, "star": 5}[shape]
    pts = _polygon_points(sides, s, star=(shape == "star"))
    pts_attr = " ".join(f"{x:.3f},{y:.3f}" for x, y in pts)
    return f'<polygon points="{pts_attr}" {paint} {tr}/>'


def scene_to_svg(desc: SceneDescription, side: float = 240.0) -> str:
    """Standalone SVG document for one scene (viewBox matches the canvas)."""
    body = "".join(_element_svg(desc.shape_kind, e, desc.fill, desc.stroke) for e in desc.elements)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{side:.0f}" height="{side:.0f}" '
        f'viewBox="0 0 {CANVAS:.0f} {CANVAS:.0f}">'
        f'<rect width="{CANVAS:.0f}" height="{CANVAS:.0f}" fill="{desc.background}"/>'
        f"{body}</svg>"
    )

"""Screen geometry: hyperlink bounding boxes and per-sample gaze assignment.

A gaze point is assigned to the hyperlink whose closed bounding box is
closest under the Chebyshev (max of axis distances) metric, as long as that
distance does not exceed a pixel threshold (40 px by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

ASSIGN_THRESHOLD_PX = 40.0


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")


@dataclass(frozen=True)
class BoundingBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.width <= 0 or self.height <= 0:
            raise ValueError("bounding box must have positive width and height")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> Point:
        return Point(self.left + self.width / 2.0, self.top + self.height / 2.0)

    def contains(self, p: Point) -> bool:
        # Boxes are closed sets: the boundary counts as inside.
        return self.left <= p.x <= self.right and self.top <= p.y <= self.bottom


@dataclass(frozen=True)
class Hyperlink:
    id: int
    bbox: BoundingBox
    label: Optional[str] = None


@dataclass(frozen=True)
class PageLayout:
    links: tuple[Hyperlink, ...]
    screen_width: float
    screen_height: float

    def __init__(self, links: Sequence[Hyperlink], screen_width: float, screen_height: float):
        if len(links) < 1:
            raise ValueError("layout needs at least one hyperlink")
        if screen_width <= 0 or screen_height <= 0:
            raise ValueError("screen dimensions must be positive")
        ids = [link.id for link in links]
        if ids != list(range(1, len(links) + 1)):
            raise ValueError("link ids must be 1..M in document order")
        object.__setattr__(self, "links", tuple(links))
        object.__setattr__(self, "screen_width", float(screen_width))
        object.__setattr__(self, "screen_height", float(screen_height))

    @property
    def n_links(self) -> int:
        return len(self.links)

    def link(self, link_id: int) -> Hyperlink:
        return self.links[link_id - 1]

    def box_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(left, top, right, bottom) arrays in link-id order, for vectorised math."""
        left = np.array([l.bbox.left for l in self.links])
        top = np.array([l.bbox.top for l in self.links])
        right = np.array([l.bbox.right for l in self.links])
        bottom = np.array([l.bbox.bottom for l in self.links])
        return left, top, right, bottom


def box_distance(g: Point, box: BoundingBox) -> float:
    """Chebyshev distance from a point to the closed box (0 inside or on the edge).

    Equals min over box points (x, y) of max(|x_g - x|, |y_g - y|): the
    per-axis clamped distances solve the inner min independently because the
    box is an axis-aligned product set.
    """
    dx = max(box.left - g.x, 0.0, g.x - box.right)
    dy = max(box.top - g.y, 0.0, g.y - box.bottom)
    return max(dx, dy)


def assign_gaze(g: Point, layout: PageLayout, threshold: float = ASSIGN_THRESHOLD_PX) -> Optional[int]:
    """Id of the closest hyperlink, or None when every link is farther than `threshold`.

    Ties go to the lowest link id.
    """
    best_id = None
    best_d = math.inf
    for link in layout.links:
        d = box_distance(g, link.bbox)
        if d < best_d:
            best_d = d
            best_id = link.id
    return best_id if best_d <= threshold else None


def assign_gaze_batch(xs: np.ndarray, ys: np.ndarray, layout: PageLayout,
                      threshold: float = ASSIGN_THRESHOLD_PX) -> np.ndarray:
    """Vectorised assign_gaze over sample arrays; 0 marks 'no link'."""
    left, top, right, bottom = layout.box_arrays()
    x = np.asarray(xs, dtype=float)[:, None]
    y = np.asarray(ys, dtype=float)[:, None]
    dx = np.maximum(np.maximum(left - x, 0.0), x - right)
    dy = np.maximum(np.maximum(top - y, 0.0), y - bottom)
    d = np.maximum(dx, dy)
    best = np.argmin(d, axis=1)  # first minimum, i.e. lowest id on ties
    ids = best + 1
    ids[d[np.arange(len(ids)), best] > threshold] = 0
    return ids

"""Grid geometry: headings, bearings and view cones.

The world is a discrete 4-connected grid. Origin is the top-left cell,
x grows east, y grows south. Headings are the four compass directions,
so "north" is -y on screen. All classification below is exact integer
arithmetic; no floating point enters the deterministic paths.
"""

from __future__ import annotations

import math

HEADINGS = ("N", "E", "S", "W")

# unit vectors per heading, (dx, dy) with y pointing south
HEADING_VECS = {"N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0)}

Cell = tuple[int, int]


def rotate_heading(heading: str, degrees: int) -> str:
    """Rotate a heading by a multiple of 90 degrees (positive = clockwise)."""
    if degrees % 90 != 0:
        raise ValueError(f"rotation must be a multiple of 90, got {degrees}")
    i = HEADINGS.index(heading)
    return HEADINGS[(i + degrees // 90) % 4]


def heading_between(src: Cell, dst: Cell, default: str = "N") -> str:
    """Compass direction that best faces from src toward dst.

    Ties on the diagonal resolve in N, E, S, W order; identical cells
    return the default.
    """
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    if dx == 0 and dy == 0:
        return default
    best, best_dot = None, None
    for h in HEADINGS:
        hx, hy = HEADING_VECS[h]
        dot = hx * dx + hy * dy
        if best_dot is None or dot > best_dot:
            best, best_dot = h, dot
    return best


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def relative_components(heading: str, src: Cell, dst: Cell) -> tuple[int, int]:
    """(forward, rightward) components of dst - src in the agent frame.

    Rightward is clockwise from the heading, matching screen coordinates.
    """
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    hx, hy = HEADING_VECS[heading]
    forward = hx * dx + hy * dy
    # right vector = heading rotated +90 (clockwise): (x,y) -> (-y, x)
    rx, ry = -hy, hx
    rightward = rx * dx + ry * dy
    return forward, rightward


def bearing_sector(heading: str, src: Cell, dst: Cell) -> str:
    """Classify dst into front/right/behind/left 90-degree sectors.

    Boundaries: the 45-degree diagonals go to front/behind (front checked
    first, so the exact side diagonals at +-45 are front and the rear
    diagonals at +-135 are behind). The agent's own cell counts as front.
    """
    fwd, right = relative_components(heading, src, dst)
    if fwd >= abs(right):
        return "front"
    if -fwd >= abs(right):
        return "behind"
    return "right" if right > 0 else "left"


def in_view_cone(heading: str, src: Cell, dst: Cell, fov_deg: float) -> bool:
    """True when dst lies within fov_deg centred on the heading.

    The common 90-degree cone is decided with exact integer arithmetic
    (boundary diagonals included); other angles fall back to a cosine
    comparison with a small inclusive tolerance.
    """
    if dst == src:
        return True
    fwd, right = relative_components(heading, src, dst)
    if fov_deg >= 360.0:
        return True
    if fov_deg == 90.0:
        return fwd >= abs(right)
    if fov_deg == 180.0:
        return fwd >= 0
    cos_half = math.cos(math.radians(fov_deg) / 2.0)
    norm = math.hypot(fwd, right)
    return fwd >= norm * cos_half - 1e-9

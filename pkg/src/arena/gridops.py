"""Hot grid kernels: BFS distance fields, supercover line of sight, path descent.

These three operations dominate runtime (every navigation, observation,
reachability precompute and mission-sampling validity check lands here),
so they are compiled with numba when available. A pure numpy/python
fallback with bit-identical outputs is selected by setting
``ARENA_BACKEND=numpy`` in the environment (``ARENA_BACKEND=numba``
forces the JIT path; the default is numba when importable).

Conventions: occupancy grids are ``bool[h, w]`` indexed ``[y, x]`` with
True meaning blocked. Distance fields hold 4-connected step counts from
a source cell, -1 where unreachable.

Line of sight runs between cell centers. A blocked cell occludes when
its closed unit square is touched by the segment, endpoints excluded;
exact corner crossings therefore occlude if either grazed side cell is
blocked. The traversal is exact integer arithmetic.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "ARENA_BACKEND"

# neighbor order N, E, S, W — the tie-break order for path descent
_NBR_DX = np.array([0, 1, 0, -1], dtype=np.int64)
_NBR_DY = np.array([-1, 0, 1, 0], dtype=np.int64)


def _select_backend() -> str:
    choice = os.environ.get(_ENV_FLAG, "").strip().lower()
    if choice in ("numpy", "python"):
        return "numpy"
    if choice == "numba":
        return "numba"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _select_backend()


def backend_name() -> str:
    return BACKEND


# ---------------------------------------------------------------------------
# pure numpy / python implementations
# ---------------------------------------------------------------------------

def _distance_field_numpy(blocked: np.ndarray, sx: int, sy: int) -> np.ndarray:
    h, w = blocked.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if blocked[sy, sx]:
        return dist
    dist[sy, sx] = 0
    frontier = np.zeros((h, w), dtype=bool)
    frontier[sy, sx] = True
    free = ~blocked
    d = 0
    while frontier.any():
        d += 1
        grown = np.zeros((h, w), dtype=bool)
        grown[:-1, :] |= frontier[1:, :]
        grown[1:, :] |= frontier[:-1, :]
        grown[:, :-1] |= frontier[:, 1:]
        grown[:, 1:] |= frontier[:, :-1]
        frontier = grown & free & (dist < 0)
        dist[frontier] = d
    return dist


def _line_of_sight_python(blocked: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> bool:
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    xi = 1 if x1 > x0 else -1
    yi = 1 if y1 > y0 else -1
    x, y = x0, y0
    ix = iy = 0
    while ix < dx or iy < dy:
        decision = (2 * ix + 1) * dy - (2 * iy + 1) * dx
        if decision == 0:
            # exact corner crossing grazes both side cells
            if blocked[y, x + xi] or blocked[y + yi, x]:
                return False
            x += xi
            y += yi
            ix += 1
            iy += 1
        elif decision < 0:
            x += xi
            ix += 1
        else:
            y += yi
            iy += 1
        if (x, y) != (x1, y1) and blocked[y, x]:
            return False
    return True


def _descend_path_python(dist: np.ndarray, sx: int, sy: int) -> np.ndarray | None:
    d = int(dist[sy, sx])
    if d < 0:
        return None
    h, w = dist.shape
    cells = np.empty((d + 1, 2), dtype=np.int32)
    x, y = sx, sy
    cells[0, 0] = x
    cells[0, 1] = y
    for step in range(1, d + 1):
        want = d - step
        for k in range(4):
            nx = x + int(_NBR_DX[k])
            ny = y + int(_NBR_DY[k])
            if 0 <= nx < w and 0 <= ny < h and dist[ny, nx] == want:
                x, y = nx, ny
                break
        cells[step, 0] = x
        cells[step, 1] = y
    return cells


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _distance_field_jit(blocked, sx, sy):  # pragma: no cover - exercised via wrapper
        h, w = blocked.shape
        dist = np.full((h, w), -1, dtype=np.int32)
        if blocked[sy, sx]:
            return dist
        qx = np.empty(h * w, dtype=np.int32)
        qy = np.empty(h * w, dtype=np.int32)
        head = 0
        tail = 0
        qx[tail] = sx
        qy[tail] = sy
        tail += 1
        dist[sy, sx] = 0
        while head < tail:
            x = qx[head]
            y = qy[head]
            head += 1
            d = dist[y, x] + 1
            for k in range(4):
                nx = x + _NBR_DX[k]
                ny = y + _NBR_DY[k]
                if 0 <= nx < w and 0 <= ny < h and not blocked[ny, nx] and dist[ny, nx] < 0:
                    dist[ny, nx] = d
                    qx[tail] = nx
                    qy[tail] = ny
                    tail += 1
        return dist

    @njit(cache=True)
    def _line_of_sight_jit(blocked, x0, y0, x1, y1):  # pragma: no cover
        dx = abs(x1 - x0)
        dy = abs(y1 - y0)
        xi = 1 if x1 > x0 else -1
        yi = 1 if y1 > y0 else -1
        x = x0
        y = y0
        ix = 0
        iy = 0
        while ix < dx or iy < dy:
            decision = (2 * ix + 1) * dy - (2 * iy + 1) * dx
            if decision == 0:
                if blocked[y, x + xi] or blocked[y + yi, x]:
                    return False
                x += xi
                y += yi
                ix += 1
                iy += 1
            elif decision < 0:
                x += xi
                ix += 1
            else:
                y += yi
                iy += 1
            if not (x == x1 and y == y1) and blocked[y, x]:
                return False
        return True

    @njit(cache=True)
    def _descend_path_jit(dist, sx, sy):  # pragma: no cover
        d = dist[sy, sx]
        h, w = dist.shape
        cells = np.empty((d + 1, 2), dtype=np.int32)
        x = sx
        y = sy
        cells[0, 0] = x
        cells[0, 1] = y
        for step in range(1, d + 1):
            want = d - step
            for k in range(4):
                nx = x + _NBR_DX[k]
                ny = y + _NBR_DY[k]
                if 0 <= nx < w and 0 <= ny < h and dist[ny, nx] == want:
                    x = nx
                    y = ny
                    break
            cells[step, 0] = x
            cells[step, 1] = y
        return cells


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def distance_field(blocked: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """4-connected BFS step counts from source; -1 where unreachable."""
    sx, sy = source
    if BACKEND == "numba":
        return _distance_field_jit(blocked, sx, sy)
    return _distance_field_numpy(blocked, sx, sy)


def line_of_sight(blocked: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True when no blocked cell occludes the segment between cell centers."""
    if BACKEND == "numba":
        return bool(_line_of_sight_jit(blocked, a[0], a[1], b[0], b[1]))
    return _line_of_sight_python(blocked, a[0], a[1], b[0], b[1])


def descend_path(dist: np.ndarray, start: tuple[int, int]) -> np.ndarray | None:
    """Optimal path from start to the field's source cell.

    Follows strictly decreasing distances, breaking ties in N, E, S, W
    neighbor order; returns an (n, 2) array of (x, y) including both
    endpoints, or None when start is unreachable.
    """
    sx, sy = start
    if int(dist[sy, sx]) < 0:
        return None
    if BACKEND == "numba":
        return _descend_path_jit(dist, sx, sy)
    return _descend_path_python(dist, sx, sy)

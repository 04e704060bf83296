import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import interpolate

from .errors import FieldShapeError, OutOfDomain

# Points this close outside the domain (relative to its size) are snapped back
DOMAIN_SLACK = 1e-12


class Quantity(enum.Enum):
    POTENTIAL = "V"
    FIELD = "V/mm"
    CONDUCTIVITY = "S/m"
    CONCENTRATION = "a.u."

    @property
    def units(self) -> str:
        return self.value


@dataclass(frozen=True)
class ScalarField2D:
    """
    Node-centred grid of one scalar quantity. `values[j, i]` is the value at
    x = i*dx, y = j*dy, so `values.ravel()` is the row-major layout.
    """
    nx: int
    ny: int
    dx: float
    dy: float
    values: np.ndarray
    quantity: Quantity

    def __post_init__(self) -> None:
        if self.values.shape != (self.ny, self.nx):
            raise FieldShapeError(
                f"values have shape {self.values.shape}, expected {(self.ny, self.nx)}")
        if not np.all(np.isfinite(self.values)):
            raise FieldShapeError(f"non-finite {self.quantity.name.lower()} values")

    def like(self, values: np.ndarray) -> "ScalarField2D":
        return ScalarField2D(self.nx, self.ny, self.dx, self.dy, values,
                             self.quantity)

    def at(self, x: float, y: float) -> float:
        return float(bilinear(self.values, self.dx, self.dy, x, y))


def node_coordinates(nx: int, ny: int, dx: float,
                     dy: float) -> Tuple[np.ndarray, np.ndarray]:
    return np.arange(nx) * dx, np.arange(ny) * dy


def control_volume_weights(nx: int, ny: int, dx: float,
                           dy: float) -> np.ndarray:
    """
    Area owned by each node: dx*dy inside, half of it on edges and a quarter
    at corners. Sums weighted this way are the ones the mirror-ghost FTCS
    update conserves exactly.
    """
    wx = np.full(nx, dx)
    wx[0] = wx[-1] = 0.5 * dx
    wy = np.full(ny, dy)
    wy[0] = wy[-1] = 0.5 * dy
    return np.outer(wy, wx)


def trapezoid_weights(n: int, spacing: float) -> np.ndarray:
    w = np.full(n, spacing)
    w[0] = w[-1] = 0.5 * spacing
    return w


def bilinear(values: np.ndarray, dx: float, dy: float, x: ArrayLike,
             y: ArrayLike) -> np.ndarray:
    """
    Linear interpolation of node values at the points (x, y), which
    broadcast against each other. Points on a node return its value exactly.
    """
    ny, nx = values.shape
    x_nodes, y_nodes = node_coordinates(nx, ny, dx, dy)
    xs, ys = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if not (_inside(xs, x_nodes[-1]) and _inside(ys, y_nodes[-1])):
        raise OutOfDomain(f"points {np.column_stack([xs.ravel(), ys.ravel()]).tolist()} "
                          f"are not all inside [0, {x_nodes[-1]}] x [0, {y_nodes[-1]}]")
    interpolator = interpolate.RegularGridInterpolator((y_nodes, x_nodes), values,
                                                       method="linear")
    points = np.stack([_onto_nodes(ys, y_nodes, dy), _onto_nodes(xs, x_nodes, dx)], axis=-1)
    return interpolator(points)


def _inside(coords: np.ndarray, extent: float) -> bool:
    return bool(np.all((coords >= -DOMAIN_SLACK * extent) &
                       (coords <= extent * (1 + DOMAIN_SLACK))))


def _onto_nodes(coords: np.ndarray, nodes: np.ndarray, spacing: float) -> np.ndarray:
    # x / dx lands a few ulps off an integer for node-aligned points
    coords = np.clip(coords, 0.0, nodes[-1])
    nearest = np.clip(np.rint(coords / spacing).astype(int), 0, len(nodes) - 1)
    on_node = np.abs(coords / spacing - nearest) < 1e-9
    return np.where(on_node, nodes[nearest], coords)

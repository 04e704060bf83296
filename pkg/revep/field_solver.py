import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .config import ElectroParams, GridSpec, SimulationConfig, ValidatedConfig, validate
from .errors import NonConvergence, SingularSystem
from .grid import Quantity, ScalarField2D
from .membrane import Regime, conductivity, reversible_window

LOG = logging.getLogger(__name__)
# Conductivity used in assembly never drops below this fraction of sigma_max
SIGMA_FLOOR_FRACTION = 1e-6
MAX_REFINEMENT_STEPS = 3


@dataclass(frozen=True)
class FieldSolution:
    phi: ScalarField2D  # V
    e_mag: ScalarField2D  # V/mm
    sigma: ScalarField2D  # S/m
    picard_iterations: int
    final_residual: float


def solve_field(config: Union[SimulationConfig, ValidatedConfig],
                tol: Optional[float] = None,
                max_picard: Optional[int] = None) -> FieldSolution:
    """
    Solve div(sigma(E) grad phi) = 0 with the electrodes at y=0 and y=L and
    insulating sides, iterating sigma(E) to a fixed point (Picard). The
    iteration starts from sigma = sigma_min. `tol` and `max_picard` default
    to the `[solver]` settings.
    """
    cfg = validate(config).config
    tol = cfg.solver.field_tol if tol is None else tol
    max_picard = cfg.solver.max_picard if max_picard is None else max_picard
    if not tol > 0:
        raise ValueError("tol must be positive")
    tissue, electro, grid = cfg.tissue, cfg.electro, cfg.grid
    sigma_floor = SIGMA_FLOOR_FRACTION * tissue.sigma_max

    if electro.phi0 == electro.phi_l:
        # Constant Dirichlet data: the potential is that constant everywhere
        phi = np.full((grid.ny, grid.nx), float(electro.phi0))
        e_mag = np.zeros_like(phi)
        return _solution(grid, phi, e_mag,
                         conductivity(e_mag, tissue), 1, 0.0)

    threshold = tol * abs(electro.phi_l - electro.phi0) / tissue.length
    sigma = np.full((grid.ny, grid.nx), tissue.sigma_min)
    e_prev = None
    change = np.inf
    for iteration in range(1, max_picard + 1):
        phi, residual = solve_potential(np.maximum(sigma, sigma_floor), grid,
                                        electro, tol,
                                        cfg.solver.face_average)
        e_mag = field_magnitude(_wrap(grid, phi, Quantity.POTENTIAL)).values
        sigma = conductivity(e_mag, tissue)
        if e_prev is not None:
            change = float(np.max(np.abs(e_mag - e_prev)))
            LOG.debug("Picard iteration %d: max |dE| = %.3e V/mm", iteration,
                      change)
            if change <= threshold:
                solution = _solution(grid, phi, e_mag, sigma, iteration,
                                     residual)
                _log_field(solution, cfg)
                return solution
        e_prev = e_mag

    raise NonConvergence(max_picard, change, "V/mm", threshold)


def solve_potential(sigma: np.ndarray,
                    grid: GridSpec,
                    electro: ElectroParams,
                    tol: float = 1e-8,
                    face_average: str = "arithmetic") -> Tuple[np.ndarray, float]:
    """
    One linear solve for a fixed conductivity map. Returns the potential on
    every node and the relative residual reached.
    """
    matrix, rhs = _assemble(sigma, grid.dx, grid.dy, electro.phi0,
                            electro.phi_l, face_average)
    solution = scipy.sparse.linalg.spsolve(matrix, rhs)
    residual = _relative_residual(matrix, solution, rhs)
    for _ in range(MAX_REFINEMENT_STEPS):
        if residual <= tol:
            break
        solution = solution + scipy.sparse.linalg.spsolve(
            matrix, rhs - matrix @ solution)
        residual = _relative_residual(matrix, solution, rhs)
    if residual > tol:
        raise NonConvergence(MAX_REFINEMENT_STEPS, residual, "relative", tol)

    phi = np.empty_like(sigma, dtype=float)
    phi[0, :] = electro.phi0
    phi[-1, :] = electro.phi_l
    phi[1:-1, :] = solution.reshape(grid.ny - 2, grid.nx)
    return phi, residual


def field_magnitude(phi: ScalarField2D) -> ScalarField2D:
    """
    |grad phi| with central differences inside and second-order one-sided
    differences on the boundary.
    """
    dphi_dy, dphi_dx = np.gradient(phi.values, phi.dy, phi.dx, edge_order=2)
    return ScalarField2D(phi.nx, phi.ny, phi.dx, phi.dy,
                         np.hypot(dphi_dx, dphi_dy), Quantity.FIELD)


def _assemble(sigma: np.ndarray, dx: float, dy: float, phi0: float,
              phi_l: float,
              face_average: str) -> Tuple[scipy.sparse.csr_matrix, np.ndarray]:
    if not np.any(sigma > 0):
        raise SingularSystem("conductivity is zero on the whole domain")
    ny, nx = sigma.shape
    rows_inner = ny - 2
    inv_dx2 = 1.0 / (dx * dx)
    inv_dy2 = 1.0 / (dy * dy)

    face_x = _face_average(sigma[1:-1, :-1], sigma[1:-1, 1:], face_average)
    face_y = _face_average(sigma[:-1, :], sigma[1:, :], face_average)

    east = np.zeros((rows_inner, nx))
    west = np.zeros((rows_inner, nx))
    east[:, :-1] = face_x * inv_dx2
    west[:, 1:] = face_x * inv_dx2
    # Insulating sides: mirror ghost phi[-1] = phi[1]
    east[:, 0] *= 2.0
    west[:, -1] *= 2.0
    south = face_y[:-1, :] * inv_dy2
    north = face_y[1:, :] * inv_dy2
    diag = east + west + south + north

    index = np.arange(rows_inner * nx).reshape(rows_inner, nx)
    rows = [index.ravel()]
    cols = [index.ravel()]
    data = [diag.ravel()]
    for coeff, row_slice, col_offset in (
        (east[:, :-1], (slice(None), slice(None, -1)), 1),
        (west[:, 1:], (slice(None), slice(1, None)), -1),
        (north[:-1, :], (slice(None, -1), slice(None)), nx),
        (south[1:, :], (slice(1, None), slice(None)), -nx),
    ):
        k = index[row_slice].ravel()
        rows.append(k)
        cols.append(k + col_offset)
        data.append(-coeff.ravel())

    rhs = np.zeros((rows_inner, nx))
    rhs[0, :] += south[0, :] * phi0
    rhs[-1, :] += north[-1, :] * phi_l

    size = rows_inner * nx
    matrix = scipy.sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size))
    return matrix, rhs.ravel()


def _face_average(left: np.ndarray, right: np.ndarray,
                  face_average: str) -> np.ndarray:
    if face_average == "arithmetic":
        return 0.5 * (left + right)
    if face_average == "harmonic":
        return 2.0 * left * right / (left + right)
    raise ValueError(f"Unknown face average '{face_average}'")


def _relative_residual(matrix: scipy.sparse.csr_matrix, solution: np.ndarray,
                       rhs: np.ndarray) -> float:
    residual = float(np.linalg.norm(rhs - matrix @ solution))
    scale = float(np.linalg.norm(rhs))
    return residual / scale if scale > 0 else residual


def _wrap(grid: GridSpec, values: np.ndarray,
          quantity: Quantity) -> ScalarField2D:
    return ScalarField2D(grid.nx, grid.ny, grid.dx, grid.dy, values, quantity)


def _solution(grid: GridSpec, phi: np.ndarray, e_mag: np.ndarray,
              sigma: np.ndarray, iterations: int,
              residual: float) -> FieldSolution:
    return FieldSolution(phi=_wrap(grid, phi, Quantity.POTENTIAL),
                         e_mag=_wrap(grid, e_mag, Quantity.FIELD),
                         sigma=_wrap(grid, sigma, Quantity.CONDUCTIVITY),
                         picard_iterations=iterations,
                         final_residual=residual)


def _log_field(solution: FieldSolution, cfg: SimulationConfig) -> None:
    e_min = float(solution.e_mag.values.min())
    e_max = float(solution.e_mag.values.max())
    LOG.info("Field converged after %d Picard iterations: E in [%.6g, %.6g] V/mm",
             solution.picard_iterations, e_min, e_max)
    for e_value in (e_min, e_max):
        regime = reversible_window(e_value, cfg.tissue)
        if regime != Regime.REVERSIBLE:
            LOG.warning("E = %.6g V/mm is outside the reversible window [%g, %g) V/mm",
                        e_value, cfg.tissue.e_rev, cfg.tissue.e_irrev)
            break

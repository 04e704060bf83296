"""
Membrane kinetics: field-dependent tissue conductivity, pore fraction and the
trans-membrane mass-transfer coefficient with pore resealing.

All functions are pure and accept floats or numpy arrays. The resealing
clock is owned by the pulse scheduler and passed in.
"""
import enum
import math
from dataclasses import dataclass
from typing import TypeVar, Union

import numpy as np

from .config import ComparisonParams, DrugParams, ElectroParams, TissueParams

Scalar = TypeVar("Scalar", float, np.ndarray)
ArrayOrFloat = Union[float, np.ndarray]


class Regime(enum.Enum):
    BELOW_THRESHOLD = 0
    REVERSIBLE = 1
    IRREVERSIBLE = 2


@dataclass(frozen=True)
class MtcParams:
    permeability: float  # P, mm/s
    cell_radius: float  # r_c, mm
    resealing_tau: float  # s

    @classmethod
    def from_params(cls, tissue: TissueParams, drug: DrugParams,
                    electro: ElectroParams) -> "MtcParams":
        return cls(drug.permeability, tissue.cell_radius, electro.resealing_tau)


@dataclass(frozen=True)
class KalamizaParams:
    fp_k: float
    membrane_thickness: float  # d_m, mm
    diffusivity: float  # D, mm^2/s
    cell_radius: float  # r_c, mm
    resealing_tau: float  # s

    @classmethod
    def from_params(cls, comparison: ComparisonParams, tissue: TissueParams,
                    drug: DrugParams,
                    electro: ElectroParams) -> "KalamizaParams":
        return cls(comparison.fp_k, comparison.membrane_thickness,
                   drug.diffusivity, tissue.cell_radius,
                   electro.resealing_tau)

    @property
    def prefactor(self) -> float:
        return 3.0 * self.diffusivity * self.fp_k / (self.membrane_thickness *
                                                     self.cell_radius)


@dataclass(frozen=True)
class MembraneState:
    pore_fraction: float
    mu0: float  # s^-1, value at clock zero
    resealing_tau: float
    clock: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.pore_fraction <= 1.0:
            raise ValueError("pore fraction must be in [0, 1]")
        if self.mu0 < 0 or self.clock < 0:
            raise ValueError("mu0 and clock must be >= 0")

    @property
    def mu(self) -> float:
        return self.mu0 * self.decay(self.clock)

    def decay(self, clock: float) -> float:
        return math.exp(-clock / self.resealing_tau)


def conductivity(e_field: Scalar, p: TissueParams) -> Scalar:
    a = 0.5 * (p.e_rev + p.e_irrev)
    b = (p.e_irrev - p.e_rev) / p.gamma2
    return (p.sigma_max - p.sigma_min) / (
        1.0 + p.gamma1 * np.exp(-(e_field - a) / b)) + p.sigma_min


def pore_fraction(e_field: Scalar, p: ElectroParams) -> Scalar:
    return 1.0 / (1.0 + np.exp((p.e_f - e_field) / p.b_f))


def mtc(clock: Scalar, fp: ArrayOrFloat, p: MtcParams) -> Scalar:
    return (p.permeability * fp / p.cell_radius) * np.exp(
        -clock / p.resealing_tau)


def mtc_kalamiza(clock: Scalar, p: KalamizaParams) -> Scalar:
    return p.prefactor * np.exp(-clock / p.resealing_tau)


def reversible_window(e_field: float, p: TissueParams) -> Regime:
    if e_field < p.e_rev:
        return Regime.BELOW_THRESHOLD
    if e_field < p.e_irrev:
        return Regime.REVERSIBLE
    return Regime.IRREVERSIBLE

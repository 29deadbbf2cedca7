"""Physical constants for the dimensionless electrostatic model (298 K)."""

from dataclasses import dataclass

# kcal/mol/e_c per unit of dimensionless potential.
KCAL_PER_DIMENSIONLESS = 0.592183

# Debye screening coefficient, A^-2 per molar ionic strength.
KAPPA2_PER_MOLAR = 8.486902807

# Coulomb energy of two unit charges 1 A apart in vacuum, kcal/mol.
COULOMB_KCAL_AT_1A = 332.0636

# e_c^2/(k_B T) in A * (dimensionless potential): the prefactor that makes
# q/(eps*d) with d in Angstroms a dimensionless potential.  Consistency:
# C_ES * KCAL_PER_DIMENSIONLESS == COULOMB_KCAL_AT_1A.
C_ES = COULOMB_KCAL_AT_1A / KCAL_PER_DIMENSIONLESS


@dataclass(frozen=True)
class PhysicalConstants:
    """Bundle of model constants, all positive."""

    kcal_per_dimensionless: float = KCAL_PER_DIMENSIONLESS
    kappa2_per_molar: float = KAPPA2_PER_MOLAR
    c_es: float = C_ES

    def __post_init__(self):
        if min(self.kcal_per_dimensionless, self.kappa2_per_molar, self.c_es) <= 0:
            raise ValueError("physical constants must be positive")

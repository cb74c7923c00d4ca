"""Physical constants (SI) used throughout the package."""

from scipy import constants as _c

HBAR = _c.hbar
C = _c.c
EPS0 = _c.epsilon_0
E_CHARGE = _c.e
A0 = _c.physical_constants["Bohr radius"][0]
MU_B = _c.physical_constants["Bohr magneton"][0]
AMU = _c.physical_constants["atomic mass constant"][0]
M_E = _c.m_e
HARTREE = _c.physical_constants["Hartree energy"][0]

#: atomic unit of electric polarizability, C^2 m^2 / J
AU_POLARIZABILITY = _c.physical_constants["atomic unit of electric polarizability"][0]
#: atomic unit of electric dipole moment, C m
AU_DIPOLE = E_CHARGE * A0

TWO_PI = 2.0 * _c.pi

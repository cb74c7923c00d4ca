"""Non-paraxial tweezer fields, quadrupole couplings and trapped-ion gate errors."""

__version__ = "0.1.0"

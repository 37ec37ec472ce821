"""
Taperlink

Design and analysis tools for waveguide single-photon sources coupled
evanescently to a tapered optical fiber: supermode solving, adiabatic taper
synthesis, eigenmode-expansion transfer, measurement fits and the source
efficiency budget.
"""

__version__ = "0.1.0"

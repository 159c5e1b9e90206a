"""
qheat package.

Steady-state heat currents, current cumulants, negative differential thermal
conductance and heat amplification in nonequilibrium two-qubit spin-boson
devices, computed with the Redfield, NE-PTRE and NIBA schemes under full
counting statistics.
"""

__version__ = "1.0.0"

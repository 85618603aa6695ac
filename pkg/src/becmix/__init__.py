"""becmix: a numerical laboratory for two-component condensate mixtures.

Spectral effective solvers (convolution, cubic, Rabi-coupled and spin-1
systems), a zero-energy radial scattering toolbox with shell
calibration, exact small-N two-species lattice dynamics, and the
condensation indicators that tie the two descriptions together.
"""

__version__ = "0.1.0"

"""Physical constants (CODATA 2018, SI units).

Kept as a fixed table instead of ``scipy.constants`` so results do not drift
when scipy switches to a newer CODATA release.
"""

import math

h = 6.62607015e-34
hbar = h / (2.0 * math.pi)
c = 299792458.0
k_B = 1.380649e-23
epsilon_0 = 8.8541878128e-12
amu = 1.66053906660e-27
e = 1.602176634e-19
eV = e
g = 9.81

# Unit helpers used by config parsing and defaults
mbar = 100.0
angstrom = 1e-10

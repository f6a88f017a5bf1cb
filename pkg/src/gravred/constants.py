"""Physical constants (CODATA 2018), SI units."""

G = 6.67430e-11          # gravitational constant, m^3 kg^-1 s^-2
HBAR = 1.054571817e-34   # reduced Planck constant, J s
C = 299792458.0          # speed of light, m s^-1 (exact)

WATER_DENSITY = 1000.0   # kg m^-3, used by the water-sphere preset

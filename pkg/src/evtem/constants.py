"""Physical constants, CODATA 2018, in the repo-wide unit system (eV, nm, s, rad)."""

import math

HBAR_C = 197.3269804
"""Reduced Planck constant times speed of light [eV nm]."""

H_C = HBAR_C * 2.0 * math.pi
"""Planck constant times speed of light [eV nm]; 1239.84198... eV nm."""

ELECTRON_REST_ENERGY = 510998.95
"""Electron rest energy m0 c^2 [eV]."""

HBAR = 6.582119569e-16
"""Reduced Planck constant [eV s]."""

LIGHT_SPEED = 2.99792458e17
"""Speed of light in vacuum [nm/s]."""

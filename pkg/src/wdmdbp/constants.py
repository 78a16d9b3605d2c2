"""Physical constants and unit helpers shared across the package."""

import numpy as np

# Physical constants (SI units).
SPEED_OF_LIGHT = 299792458.0  # m/s
PLANCK = 6.62607015e-34  # J*s

# Reference carrier for dispersion and ASE accounting.
REFERENCE_WAVELENGTH = 1550e-9  # m
REFERENCE_FREQUENCY = 193.41e12  # Hz


def db_to_lin(value_db):
    """Convert a dB power ratio to linear scale."""
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def lin_to_db(value_lin):
    """Convert a linear power ratio to dB."""
    return 10.0 * np.log10(value_lin)


def dbm_to_watt(power_dbm):
    """Convert dBm to watts."""
    return 1e-3 * db_to_lin(power_dbm)


def watt_to_dbm(power_w):
    """Convert watts to dBm."""
    return lin_to_db(np.asarray(power_w, dtype=float) / 1e-3)


def beta2_from_dispersion(dispersion_ps_nm_km, wavelength=REFERENCE_WAVELENGTH):
    """Group-velocity dispersion beta2 in s^2/m from D in ps/(nm*km)."""
    d_si = dispersion_ps_nm_km * 1e-6  # s/m^2
    return -d_si * wavelength**2 / (2.0 * np.pi * SPEED_OF_LIGHT)


def attenuation_from_db(alpha_db_km):
    """Power attenuation coefficient in 1/m from dB/km."""
    return alpha_db_km * (np.log(10.0) / 10.0) / 1e3

"""The stationary state U = 8/(1+g^2)^2 and closed-form derived profiles."""
import numpy as np


def U(g):
    g = np.asarray(g, dtype=float)
    return 8.0 / (1 + g**2) ** 2


def dU(g):
    g = np.asarray(g, dtype=float)
    return -32.0 * g / (1 + g**2) ** 3


def LU(g):
    """Lambda U = 2U + g U'."""
    g = np.asarray(g, dtype=float)
    return 16.0 * (1 - g**2) / (1 + g**2) ** 3


def dLU(g):
    g = np.asarray(g, dtype=float)
    return 64.0 * g * (g**2 - 2) / (1 + g**2) ** 4


def L2U(g):
    g = np.asarray(g, dtype=float)
    return 2 * LU(g) + g * dLU(g)


def mass_U(g):
    """Partial mass int_0^g s U ds."""
    g = np.asarray(g, dtype=float)
    return 4 * g**2 / (1 + g**2)


def dPsi_U(g):
    g = np.asarray(g, dtype=float)
    return -4 * g / (1 + g**2)


def Psi_U(g):
    """Log-kernel potential of U, normalized so that Psi_U(0) = 0."""
    return -2 * np.log1p(np.asarray(g, dtype=float) ** 2)


def stationary_profile(g):
    """Return (U, Lambda U, dU/dg) at g >= 0."""
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    return U(g), LU(g), dU(g)


def U_nu(z, nu):
    return U(np.asarray(z) / nu) / nu**2


def dU_nu(z, nu):
    return dU(np.asarray(z) / nu) / nu**3


def mass_U_nu(z, nu):
    return mass_U(np.asarray(z) / nu)


def LU_nu(z, nu):
    return LU(np.asarray(z) / nu) / nu**2

"""
Half-line cutoffs and their frequency pieces

chi_+ rises from 0 on x <= -2 to 1 on x >= 2 along a C-infinity smoothstep and
chi_- = 1 - chi_+ = chi_+(-x). phi_pm = chi_pm^4 are the cutoffs of the singular
spectral measure. Splitting phi_+' into its even part zeta and odd part gives

    phi_+ = int_{-inf}^x zeta + varpi,  varpi = (phi_+ + phi_- - 1) / 2,

so the flat transform of phi_pm is sqrt(pi/2) delta +- zeta_hat(p)/(ip) + varpi_hat(p).
"""

import numpy as np
from scipy.special import expit

CUTOFF_RADIUS = 2.0
QUADRATURE_NODES = 4097


def smoothstep(t):
    """s(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)}) on (0, 1), 0 below and 1 above."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    safe = np.where(inside, t, 0.5)
    values = expit(1.0 / (1.0 - safe) - 1.0 / safe)
    return np.where(inside, values, (t >= 1.0).astype(float))


def smoothstep_derivative(t):
    """s'(t) = s (1 - s) (1/t^2 + 1/(1-t)^2)"""
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    safe = np.where(inside, t, 0.5)
    s = smoothstep(safe)
    values = s * (1.0 - s) * (1.0 / safe**2 + 1.0 / (1.0 - safe) ** 2)
    return np.where(inside, values, 0.0)


def _scaled(xs):
    return (np.asarray(xs, dtype=float) + CUTOFF_RADIUS) / (2.0 * CUTOFF_RADIUS)


def chi_plus(xs):
    return smoothstep(_scaled(xs))


def chi_minus(xs):
    return smoothstep(_scaled(-np.asarray(xs, dtype=float)))


def bump(xs):
    """Phi = chi_+', non-negative, supported in [-2, 2], unit integral."""
    return smoothstep_derivative(_scaled(xs)) / (2.0 * CUTOFF_RADIUS)


def phi_plus(xs):
    return chi_plus(xs) ** 4


def phi_minus(xs):
    return chi_minus(xs) ** 4


def phi_plus_derivative(xs):
    return 4.0 * chi_plus(xs) ** 3 * bump(xs)


def zeta(xs):
    """Even part of phi_+'; integrates to 1."""
    xs = np.asarray(xs, dtype=float)
    return 0.5 * (phi_plus_derivative(xs) + phi_plus_derivative(-xs))


def varpi(xs):
    """Even, supported in [-2, 2], vanishes wherever chi_+ is 0 or 1."""
    xs = np.asarray(xs, dtype=float)
    return 0.5 * (phi_plus(xs) + phi_minus(xs) - 1.0)


def _cosine_transform(profile, ps):
    # Flat transform (2 pi)^{-1/2} int e^{-ipx} f(x) dx of an even profile on [-2, 2]
    nodes = np.linspace(-CUTOFF_RADIUS, CUTOFF_RADIUS, QUADRATURE_NODES)
    h = nodes[1] - nodes[0]
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    values = np.cos(np.outer(ps, nodes)) @ profile(nodes) * h
    return values / np.sqrt(2.0 * np.pi)


def zeta_hat(ps):
    return _cosine_transform(zeta, ps)


def varpi_hat(ps):
    return _cosine_transform(varpi, ps)

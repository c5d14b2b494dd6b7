"""
Square-barrier scattering from the 2x2 transfer matrix

Shares no code with the Volterra solver. Inside the barrier the pair (psi, psi')
is propagated by the entire-function matrix
    [[cos(q d), sin(q d)/q], [-q sin(q d), cos(q d)]],  q^2 = k^2 - K,  d = 2L,
so k^2 = K needs no special branch.
"""

import numpy as np


def _propagator(height: float, half_width: float, ks: np.ndarray) -> np.ndarray:
    d = 2.0 * half_width
    q = np.lib.scimath.sqrt(ks.astype(complex) ** 2 - height)
    sinc_term = d * np.sinc(q * d / np.pi)
    cos_term = np.cos(q * d)
    matrix = np.empty((ks.size, 2, 2), dtype=complex)
    matrix[:, 0, 0] = cos_term
    matrix[:, 0, 1] = sinc_term
    matrix[:, 1, 0] = -(q**2) * sinc_term
    matrix[:, 1, 1] = cos_term
    return matrix


def barrier_transfer_matrix(height: float, half_width: float, ks) -> tuple:
    """
    Returns (T, R_plus, R_minus) for V = K 1_{[-L, L]} at nonzero ks

    Left incidence e^{ikx} + R_- e^{-ikx} -> T e^{ikx}; right incidence
    e^{-ikx} + R_+ e^{ikx} -> T e^{-ikx}.
    """
    ks = np.asarray(ks, dtype=float)
    M = _propagator(height, half_width, ks)
    ik = 1j * ks
    inside, outside = np.exp(-1j * ks * half_width), np.exp(1j * ks * half_width)

    def apply(vec):
        return np.einsum("nij,nj->ni", M, vec)

    # Left incidence: R_- M b - T c = -M a
    a = np.stack([inside, ik * inside], axis=-1)
    b = np.stack([outside, -ik * outside], axis=-1)
    c = np.stack([outside, ik * outside], axis=-1)
    system = np.stack([apply(b), -c], axis=-1)
    left = np.linalg.solve(system, -apply(a)[..., None])[..., 0]
    R_minus, T = left[:, 0], left[:, 1]

    # Right incidence: T M d - R_+ f = g
    d = np.stack([outside, -ik * outside], axis=-1)
    f = np.stack([outside, ik * outside], axis=-1)
    g = np.stack([inside, -ik * inside], axis=-1)
    system = np.stack([apply(d), -f], axis=-1)
    right = np.linalg.solve(system, g[..., None])[..., 0]
    R_plus = right[:, 1]
    return T, R_plus, R_minus

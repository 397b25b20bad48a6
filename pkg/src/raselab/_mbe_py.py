"""Pure-numpy Maxwell-Bloch propagation kernel.

Integrates the linearized two-level medium response

    d sigma_k / dt = -i omega_k sigma_k + (w/2) E(z, t)
    d E / d z      = (1/2) sum_k kappa_k sigma_k - (beta/2) E

on a spatial grid (z in [0, 1], field on cell edges, atoms at cells) with RK4
time stepping. The z sweep is a linear recurrence solved with one cumulative
sum per stage, so each step is a handful of vectorized array operations.

The compiled extension ``raselab._mbe_core`` implements the same algorithm;
both must agree to near machine precision.
"""

from __future__ import annotations

import numpy as np


def propagate_segment(
    sigma: np.ndarray,  # (n_z, n_det) complex, modified in place
    kappa: np.ndarray,  # (n_det,) coupling weights
    omega: np.ndarray,  # (n_det,) rad/us detunings
    w: float,  # population inversion on the driven transition (+1 gain, -1 absorbing)
    beta: float,  # background amplitude-absorption coefficient (per unit length)
    dt: float,  # us
    e_in: np.ndarray,  # (2*n_steps + 1,) boundary field at half-step resolution
    n_steps: int,
) -> np.ndarray:
    """Advance one segment, returning the output field at each step start."""
    n_z = sigma.shape[0]
    dz = 1.0 / n_z
    q = beta * dz / 4.0
    c = (1.0 - q) / (1.0 + q)
    d = dz / (1.0 + q)
    powers = c ** np.arange(n_z + 1)
    inv_powers_shift = 1.0 / powers[1:]

    half_w = 0.5 * w
    neg_i_omega = -1j * omega

    def stage(sig: np.ndarray, e0: complex) -> tuple[complex, np.ndarray]:
        source = 0.5 * (sig @ kappa)
        csum = np.concatenate(([0.0 + 0.0j], np.cumsum(d * source * inv_powers_shift)))
        e_field = powers * (e0 + csum)
        e_at_atoms = 0.5 * (e_field[:-1] + e_field[1:])
        dsig = neg_i_omega * sig + half_w * e_at_atoms[:, None]
        return e_field[-1], dsig

    out = np.empty(n_steps, dtype=np.complex128)
    for n in range(n_steps):
        e0 = e_in[2 * n]
        e_half = e_in[2 * n + 1]
        e_next = e_in[2 * n + 2]
        out[n], k1 = stage(sigma, e0)
        _, k2 = stage(sigma + (0.5 * dt) * k1, e_half)
        _, k3 = stage(sigma + (0.5 * dt) * k2, e_half)
        _, k4 = stage(sigma + dt * k3, e_next)
        sigma += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out

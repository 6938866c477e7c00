"""Fixed-step 4th-order integrators.

Two engines:

* ``two_level_propagators`` solves dpsi/dt = A(t) psi for the driven two-level
  block A = [[0, -i conj(w)], [-i w, 0]] given samples of w(t).  Because the
  ODE is linear, each RK4 step is a 2x2 transfer matrix that depends only on
  the drive samples at (t, t+h/2, t+h); the matrices for all steps and all
  batch elements are built vectorized and combined by pairwise products, so
  batches of thousands of drives integrate without a long Python loop.

* ``rk4_fixed`` is a plain RK4 loop for anything nonlinear in structure
  (full-space density matrices with several Lindblad terms), with optional
  state recording at evenly spaced sample boundaries.

Both engines are deterministic: fixed step count, fixed reduction order.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError


def _mm(x, y):
    """Product of 2x2 matrices stored as component tuples (m00, m01, m10, m11)."""
    x00, x01, x10, x11 = x
    y00, y01, y10, y11 = y
    return (
        x00 * y00 + x01 * y10,
        x00 * y01 + x01 * y11,
        x10 * y00 + x11 * y10,
        x10 * y01 + x11 * y11,
    )


def _step_matrices(w, h):
    """RK4 transfer matrices for one block of steps.

    ``w``: (..., 2m+1) drive samples at half-step spacing; ``h``: step size,
    scalar or broadcastable to the batch shape.  Returns components of shape
    (..., m).  The generator matrix has zero diagonal, which the expansion
    below exploits.
    """
    u1, u2, u3 = -1j * w[..., 0:-2:2].conj(), -1j * w[..., 1::2].conj(), -1j * w[..., 2::2].conj()
    v1, v2, v3 = -1j * w[..., 0:-2:2], -1j * w[..., 1::2], -1j * w[..., 2::2]
    h = np.asarray(h, dtype=float)
    if h.ndim:
        h = h[..., None]
    h2 = 0.5 * h
    # B2 = A2 (I + h/2 A1), B3 = A2 (I + h/2 B2), B4 = A3 (I + h B3)
    p00 = h2 * u2 * v1
    p11 = h2 * v2 * u1
    q00 = h2 * u2 * v2
    q01 = u2 * (1.0 + h2 * p11)
    q10 = v2 * (1.0 + h2 * p00)
    r00 = h * u3 * q10
    r01 = u3 * (1.0 + h * q00)
    r10 = v3 * (1.0 + h * q00)
    r11 = h * v3 * q01
    h6 = h / 6.0
    m00 = 1.0 + h6 * (2.0 * p00 + 2.0 * q00 + r00)
    m01 = h6 * (u1 + 2.0 * u2 + 2.0 * q01 + r01)
    m10 = h6 * (v1 + 2.0 * v2 + 2.0 * q10 + r10)
    m11 = 1.0 + h6 * (2.0 * p11 + 2.0 * q00 + r11)
    return m00, m01, m10, m11


def _reduce_product(mats):
    """Ordered product M_{m-1} ... M_1 M_0 by pairwise reduction."""
    m00, m01, m10, m11 = mats
    while m00.shape[-1] > 1:
        m = m00.shape[-1]
        k = m // 2
        even = tuple(c[..., 0:2 * k:2] for c in (m00, m01, m10, m11))
        odd = tuple(c[..., 1:2 * k:2] for c in (m00, m01, m10, m11))
        prod = _mm(odd, even)
        if m % 2:
            prod = tuple(
                np.concatenate([p, c[..., -1:]], axis=-1)
                for p, c in zip(prod, (m00, m01, m10, m11))
            )
        m00, m01, m10, m11 = prod
    return tuple(c[..., 0] for c in (m00, m01, m10, m11))


def two_level_propagators(drive, h, n_segments: int):
    """Cumulative propagators at segment boundaries.

    Parameters
    ----------
    drive : (..., 2*n_steps + 1) complex array
        Samples of w(t) on the half-step grid t_j = j*h/2.
    h : float or (...,) array
        Step size per batch element.
    n_segments : int
        Number of recording segments; n_steps must be divisible by it.

    Returns
    -------
    (..., n_segments + 1, 2, 2) array of propagators U(t_s), U(0) = identity.
    """
    drive = np.asarray(drive, dtype=complex)
    n_samples = drive.shape[-1]
    if n_samples < 3 or n_samples % 2 == 0:
        raise ConfigError("drive must hold 2*n_steps+1 samples")
    n_steps = (n_samples - 1) // 2
    if n_segments < 1 or n_steps % n_segments:
        raise ConfigError("n_steps must be a positive multiple of n_segments")
    m_seg = n_steps // n_segments
    batch = drive.shape[:-1]
    out = np.empty(batch + (n_segments + 1, 2, 2), dtype=complex)
    cur = (
        np.ones(batch, dtype=complex),
        np.zeros(batch, dtype=complex),
        np.zeros(batch, dtype=complex),
        np.ones(batch, dtype=complex),
    )
    out[..., 0, 0, 0], out[..., 0, 0, 1], out[..., 0, 1, 0], out[..., 0, 1, 1] = cur
    for s in range(n_segments):
        lo = 2 * s * m_seg
        block = _reduce_product(_step_matrices(drive[..., lo:lo + 2 * m_seg + 1], h))
        cur = _mm(block, cur)
        out[..., s + 1, 0, 0] = cur[0]
        out[..., s + 1, 0, 1] = cur[1]
        out[..., s + 1, 1, 0] = cur[2]
        out[..., s + 1, 1, 1] = cur[3]
    return out


def round_up_steps(n_steps: int, n_segments: int) -> int:
    """Smallest multiple of n_segments that is >= n_steps."""
    return -(-n_steps // n_segments) * n_segments


def rk4_fixed(y0, rhs, h: float, n_steps: int, record_every: int | None = None):
    """Classic RK4 with the right-hand side sampled on the half-step grid.

    ``rhs(j, y)`` receives the half-step sample index j in 0..2*n_steps, so
    time-dependent coefficients can be precomputed once by the caller.
    Returns (y_final, records) where records stacks the state at every
    ``record_every`` steps (including t=0 and t=T) or is None.
    """
    y = np.array(y0, dtype=complex)
    records = None
    if record_every is not None:
        if record_every < 1 or n_steps % record_every:
            raise ConfigError("record_every must divide n_steps")
        records = [y.copy()]
    for k in range(n_steps):
        j = 2 * k
        k1 = rhs(j, y)
        k2 = rhs(j + 1, y + (0.5 * h) * k1)
        k3 = rhs(j + 1, y + (0.5 * h) * k2)
        k4 = rhs(j + 2, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if records is not None and (k + 1) % record_every == 0:
            records.append(y.copy())
    return y, (np.array(records) if records is not None else None)

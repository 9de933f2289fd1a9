"""Closed-form projections onto the discrete phase grid and the unit circle.

Both projections depend on the argument of the input only, so they are
invariant to positive scaling. Zero inputs map to 1 by convention so the
outputs are always unit modulus.
"""

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def quantized_angle_index(values, bits):
    """Index of the nearest v-bit phase-grid point for each complex entry.

    Grid points are exp(j*2*pi*k / 2^v) for k = 0 .. 2^v - 1. The index is
    computed from the normalized angle alone; inputs equidistant between two
    grid points resolve to the larger angle, and zeros map to index 0.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    x = np.asarray(values)
    theta = np.mod(np.angle(x), TWO_PI)
    half_levels = 2 ** (bits - 1)
    z = np.floor((half_levels * theta + np.pi) / np.pi)
    # decision boundary between grid points z-1 and z; ties go upward
    boundary = (2.0 * z - 1.0) * np.pi / 2**bits
    idx = np.where(theta >= boundary, z, z - 1.0).astype(np.int64)
    idx = np.mod(idx, 2**bits)
    idx = np.where(x == 0, 0, idx)
    return idx


def cmdpp_project(kappa, bits):
    """Project one complex number onto the v-bit phase grid.

    Returns (index, value) with value = exp(j*2*pi*index / 2^bits), the
    closest grid point to kappa / |kappa|.
    """
    idx = int(quantized_angle_index(kappa, bits)[()])
    return idx, np.exp(2j * np.pi * idx / 2**bits)


def phase_align(e_tilde):
    """Nearest unit-modulus point: keep the angle, drop the magnitude.

    Zero maps to 1 so the result is always well defined. Works element-wise
    on arrays.
    """
    x = np.asarray(e_tilde)
    out = np.where(x == 0, 1.0 + 0.0j, np.exp(1j * np.angle(x)))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class DiscretePhaseVector:
    """Surface configuration with v-bit quantized unit-modulus entries.

    Entries are stored as integer indices on the 2^v-point grid. Angles and
    complex values are always derived from the indices, never stored, so the
    modulus is exactly one.
    """

    bits: int
    indices: np.ndarray

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if idx.size and (idx.min() < 0 or idx.max() >= 2**self.bits):
            raise ValueError("indices out of range for the phase grid")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.size

    @property
    def angles(self):
        return TWO_PI * self.indices / 2**self.bits

    @property
    def values(self):
        return np.exp(1j * self.angles)

    @classmethod
    def zeros(cls, n, bits):
        return cls(bits=bits, indices=np.zeros(n, dtype=np.int64))

    @classmethod
    def project(cls, values, bits):
        """Element-wise nearest-grid-point projection of a complex vector."""
        return cls(bits=bits, indices=quantized_angle_index(values, bits))

"""Deterministic near-field channels from exact 3-D geometry.

The surface occupies the x-o-y plane with its center at the origin. Element
(n1, n2) sits at ((n1 - (N1+1)/2) d, (n2 - (N2+1)/2) d, 0) with spacing
d = wavelength / 2; the flat element index runs n1 fastest. Transmit antenna
m sits at (x_b + (m-1) d, y_b, z_b), users on the plane y = user_plane_y_m.

Each channel entry follows the spherical-wave main-path model
(D0 / D) * exp(-j 2 pi D / wavelength), with D the exact distance between
element and source and D0 the source's perpendicular distance to the surface
plane. Amplitudes are kept verbatim (no absolute path-loss calibration), so
rate levels are meaningful for internal comparison only.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SystemGeometry:
    """Static deployment description shared by every model in the package.

    Powers are stored in watts; dBm is converted once at the config boundary
    (see :mod:`risbeam.config`).
    """

    wavelength_m: float
    n1: int
    n2: int
    m_antennas: int
    bs_position_m: tuple
    user_plane_y_m: float = 0.0
    max_power_w: float = 1.0
    noise_power_w: float = 1e-14
    element_spacing_m: float = None

    def __post_init__(self):
        if self.wavelength_m <= 0:
            raise ValueError("wavelength_m must be positive")
        if self.n1 < 1 or self.n2 < 1 or self.m_antennas < 1:
            raise ValueError("n1, n2 and m_antennas must be at least 1")
        if self.max_power_w <= 0 or self.noise_power_w <= 0:
            raise ValueError("max_power_w and noise_power_w must be positive")
        half = self.wavelength_m / 2.0
        if self.element_spacing_m is None:
            object.__setattr__(self, "element_spacing_m", half)
        elif not np.isclose(self.element_spacing_m, half, rtol=1e-12, atol=0.0):
            raise ValueError("element_spacing_m must equal wavelength_m / 2")
        bs = tuple(float(v) for v in self.bs_position_m)
        if len(bs) != 3:
            raise ValueError("bs_position_m must have three coordinates")
        object.__setattr__(self, "bs_position_m", bs)

    @property
    def n_elements(self):
        return self.n1 * self.n2

    @property
    def aperture_m(self):
        """Diagonal physical size of the surface."""
        d = self.element_spacing_m
        return float(np.hypot((self.n1 - 1) * d, (self.n2 - 1) * d))


def element_coordinates(geom):
    """(x, y) coordinates of all elements, flat index with n1 fastest."""
    d = geom.element_spacing_m
    x = (np.arange(1, geom.n1 + 1) - (geom.n1 + 1) / 2.0) * d
    y = (np.arange(1, geom.n2 + 1) - (geom.n2 + 1) / 2.0) * d
    xg, yg = np.meshgrid(x, y)  # shape (n2, n1): row-major flatten is n1 fastest
    return xg.ravel(), yg.ravel()


def _spherical_entries(geom, dx, dy, z):
    dist = np.sqrt(dx**2 + dy**2 + z**2)
    return (abs(z) / dist) * np.exp(-2j * np.pi * dist / geom.wavelength_m)


def bs_ris_channel(geom):
    """Transmit-array-to-surface channel, shape (N, M)."""
    xb, yb, zb = geom.bs_position_m
    if zb == 0:
        raise ValueError("transmit array must be off the surface plane (z != 0)")
    ex, ey = element_coordinates(geom)
    ax = xb + geom.element_spacing_m * np.arange(geom.m_antennas)
    dx = ax[None, :] - ex[:, None]
    dy = yb - ey[:, None]
    return _spherical_entries(geom, dx, dy, zb)


def ris_user_channel(geom, user_xyz):
    """Surface-to-user channel, shape (N,)."""
    ux, uy, uz = (float(v) for v in user_xyz)
    if uz == 0:
        raise ValueError("user must be off the surface plane (z != 0)")
    ex, ey = element_coordinates(geom)
    return _spherical_entries(geom, ux - ex, uy - ey, uz)


def cascaded_channel(g, h):
    """Two-hop channel diag(h)^H G seen through the surface, shape (N, M)."""
    g = np.asarray(g)
    h = np.asarray(h)
    if g.shape[0] != h.shape[0]:
        raise ValueError("g and h disagree on the number of surface elements")
    return np.conj(h)[:, None] * g


def rayleigh_distance(aperture_m, wavelength_m):
    """Classical near-field / far-field boundary 2 * aperture^2 / wavelength."""
    if aperture_m <= 0 or wavelength_m <= 0:
        raise ValueError("aperture_m and wavelength_m must be positive")
    return 2.0 * aperture_m**2 / wavelength_m


@dataclass
class ChannelSet:
    """Channels for one deployment snapshot: shared first hop, per-user hops."""

    g_bs_ris: np.ndarray
    h_users: list = field(default_factory=list)
    cascaded: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.h_users) != len(self.cascaded):
            raise ValueError("h_users and cascaded must have matching lengths")


def build_channel_set(geom, user_positions):
    """Evaluate the channel model for a list of user positions."""
    g = bs_ris_channel(geom)
    h_users = [ris_user_channel(geom, pos) for pos in user_positions]
    cascaded = [cascaded_channel(g, h) for h in h_users]
    return ChannelSet(g_bs_ris=g, h_users=h_users, cascaded=cascaded)

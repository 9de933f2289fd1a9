"""Two-level near-field codebook construction.

Every codeword pairs a transmit precoder with a discrete surface
configuration so that the beam response over a sampled coordinate grid
matches a desired amplitude pattern up to free auxiliary phases. Both
construction routes minimize the same residual

    sum_i | phi^H C_i w - p_i p_i^nu |^2

where C_i is the cascaded channel at grid point i: the joint route
alternates precoder, phase, and auxiliary-phase steps; the sequential route
fixes the precoder at the dominant first-hop eigendirection first and then
runs the same phase steps, so its solution stays feasible (and evaluable)
in the joint objective.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import bs_ris_channel, cascaded_channel, ris_user_channel
from .linalg import principal_eigvec
from .projections import DiscretePhaseVector, phase_align
from .solvers import QuadraticForm, ipdd_quadratic_discrete, power_constrained_ls

GAIN_FLOOR_DB = -200.0


@dataclass(frozen=True)
class SamplingGrid:
    """Midpoint-rule sample points over a rectangle of the user plane.

    points[i] = (x, z) with i = iz * s_x + ix (x fastest). Cell (ix, iz)
    is the closed rectangle of size step_x by step_z centered on point i.
    """

    x_range: tuple
    z_range: tuple
    s_x: int
    s_z: int
    level: int = 1

    def __post_init__(self):
        if self.s_x < 1 or self.s_z < 1:
            raise ValueError("s_x and s_z must be at least 1")
        xr = (float(self.x_range[0]), float(self.x_range[1]))
        zr = (float(self.z_range[0]), float(self.z_range[1]))
        if xr[1] <= xr[0] or zr[1] <= zr[0]:
            raise ValueError("empty coordinate range")
        object.__setattr__(self, "x_range", xr)
        object.__setattr__(self, "z_range", zr)

    @property
    def step_x(self):
        return (self.x_range[1] - self.x_range[0]) / self.s_x

    @property
    def step_z(self):
        return (self.z_range[1] - self.z_range[0]) / self.s_z

    @property
    def n_points(self):
        return self.s_x * self.s_z

    @property
    def points(self):
        x = self.x_range[0] + (np.arange(self.s_x) + 0.5) * self.step_x
        z = self.z_range[0] + (np.arange(self.s_z) + 0.5) * self.step_z
        xg, zg = np.meshgrid(x, z)  # (s_z, s_x); C-order flatten is x fastest
        return np.column_stack([xg.ravel(), zg.ravel()])

    def cell(self, index):
        """Closed rectangle ((x_lo, x_hi), (z_lo, z_hi)) around point index."""
        if not 0 <= index < self.n_points:
            raise ValueError("cell index out of range")
        ix = index % self.s_x
        iz = index // self.s_x
        x_lo = self.x_range[0] + ix * self.step_x
        z_lo = self.z_range[0] + iz * self.step_z
        return (x_lo, x_lo + self.step_x), (z_lo, z_lo + self.step_z)


def make_sampling_grid(x_range, z_range, s_x, s_z, level=1):
    return SamplingGrid(x_range=x_range, z_range=z_range, s_x=s_x, s_z=s_z, level=level)


@dataclass(frozen=True)
class DesiredPattern:
    """Per-grid-point target amplitudes with free auxiliary phases."""

    amplitudes: np.ndarray
    phases: np.ndarray
    gain: float
    target_region: tuple

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float)
        ph = np.asarray(self.phases, dtype=complex)
        if amp.shape != ph.shape:
            raise ValueError("amplitudes and phases must have matching shapes")
        if np.any(amp < 0):
            raise ValueError("amplitudes must be non-negative")
        if not np.allclose(np.abs(ph), 1.0, atol=1e-12):
            raise ValueError("phases must be unit modulus")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "phases", ph)

    @property
    def target(self):
        return self.amplitudes * self.phases


def desired_pattern(grid, target_region, gain, phases=None):
    """Amplitude `gain` at grid points inside the closed region, 0 outside."""
    if gain <= 0:
        raise ValueError("gain must be positive (linear amplitude)")
    (x_lo, x_hi), (z_lo, z_hi) = target_region
    if x_lo > x_hi or z_lo > z_hi:
        raise ValueError("target region is empty")
    eps = 1e-12 * max(
        abs(grid.x_range[0]), abs(grid.x_range[1]), abs(grid.z_range[0]),
        abs(grid.z_range[1]), 1.0,
    )
    if (
        x_lo < grid.x_range[0] - eps
        or x_hi > grid.x_range[1] + eps
        or z_lo < grid.z_range[0] - eps
        or z_hi > grid.z_range[1] + eps
    ):
        raise ValueError("target region lies outside the grid ranges")
    pts = grid.points
    inside = (
        (pts[:, 0] >= x_lo)
        & (pts[:, 0] <= x_hi)
        & (pts[:, 1] >= z_lo)
        & (pts[:, 1] <= z_hi)
    )
    amplitudes = np.where(inside, float(gain), 0.0)
    if phases is None:
        phases = np.ones(grid.n_points, dtype=complex)
    return DesiredPattern(
        amplitudes=amplitudes,
        phases=phases,
        gain=float(gain),
        target_region=((float(x_lo), float(x_hi)), (float(z_lo), float(z_hi))),
    )


@dataclass
class Codeword:
    """One trained beam: precoder, discrete phases, and its residual."""

    bs_precoder: np.ndarray
    ris_phases: DiscretePhaseVector
    level: int
    region_index: int
    objective: float
    region: tuple = None
    parent_index: int = None
    pattern_phases: np.ndarray = None
    objective_trace: list = field(default_factory=list)

    @property
    def center(self):
        (x_lo, x_hi), (z_lo, z_hi) = self.region
        return (0.5 * (x_lo + x_hi), 0.5 * (z_lo + z_hi))


@dataclass
class Codebook:
    """Per-level codeword lists plus the geometry they were trained for."""

    levels: list
    geometry_fingerprint: str
    bits: int

    @property
    def n_levels(self):
        return len(self.levels)

    def children(self, level, region_index):
        """Codewords one level down whose parent is the given region."""
        if level + 1 >= len(self.levels):
            return []
        return [cw for cw in self.levels[level + 1] if cw.parent_index == region_index]


def geometry_fingerprint(geom):
    payload = json.dumps(
        {
            "wavelength_m": geom.wavelength_m,
            "n1": geom.n1,
            "n2": geom.n2,
            "m_antennas": geom.m_antennas,
            "bs_position_m": list(geom.bs_position_m),
            "user_plane_y_m": geom.user_plane_y_m,
            "max_power_w": geom.max_power_w,
            "noise_power_w": geom.noise_power_w,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def cascaded_stack(geom, grid, g=None):
    """Cascaded channels at every grid point, shape (S, N, M)."""
    if g is None:
        g = bs_ris_channel(geom)
    out = np.empty((grid.n_points, geom.n_elements, geom.m_antennas), dtype=complex)
    y = geom.user_plane_y_m
    for i, (x, z) in enumerate(grid.points):
        h = ris_user_channel(geom, (x, y, z))
        out[i] = cascaded_channel(g, h)
    return out


def assemble_training_matrices(geom, grid, w_t=None):
    """Stacked channel matrices for the residual in its two factored forms.

    Returns (B1, B2, B): B1 stacks the cascaded channels vertically
    ((N*S) x M), B2 horizontally (N x (M*S)), and B holds the per-point
    responses C_i w_t as columns (N x S) when a precoder is supplied,
    else None.
    """
    stack = cascaded_stack(geom, grid)
    s, n, m = stack.shape
    b1 = stack.reshape(s * n, m)
    b2 = stack.transpose(1, 0, 2).reshape(n, s * m)
    b = None
    if w_t is not None:
        w_t = np.asarray(w_t, dtype=complex)
        if w_t.shape != (m,):
            raise ValueError("w_t length must match the antenna count")
        b = np.einsum("snm,m->ns", stack, w_t)
    return b1, b2, b


def response_columns(stack, w):
    """Matrix with column i = C_i w, shape (N, S)."""
    return np.einsum("snm,m->ns", stack, w)


def effective_gain_rows(stack, phi_values):
    """Matrix with row i = phi^H C_i, shape (S, M)."""
    return np.einsum("n,snm->sm", np.conj(phi_values), stack)


def update_pnu(beam_values):
    """Optimal auxiliary phases: align each target with the achieved value."""
    return phase_align(np.asarray(beam_values, dtype=complex))


def socc_precoder(g, p_max):
    """Full-power precoder along the dominant first-hop direction."""
    g = np.asarray(g)
    w = principal_eigvec(g.conj().T @ g)
    return np.sqrt(p_max) * w


def _beam_values(columns, phi_values):
    # value at point i: phi^H C_i w, with columns[:, i] = C_i w
    return columns.T @ np.conj(phi_values)


def _residual(values, target):
    return float(np.sum(np.abs(values - target) ** 2))


def _phase_step(columns, target, ipdd_cfg, phi):
    qf = QuadraticForm(
        hessian=columns @ columns.conj().T,
        linear=columns @ np.conj(target),
        constant=float(np.sum(np.abs(target) ** 2)),
    )
    return ipdd_quadratic_discrete(qf, ipdd_cfg, init=phi).phases


def _alternate(
    stack,
    pattern,
    ipdd_cfg,
    p_max,
    w,
    phi,
    pnu,
    update_w,
    max_outer=50,
    rel_tol=1e-6,
):
    """Shared alternating loop; returns (w, phi, pnu, per-step trace).

    The discrete phase step is a heuristic, so a candidate that increases
    the residual is rejected and the incumbent kept; the precoder and
    auxiliary-phase steps are exact closed forms. The precoder step carries
    the same rejection guard purely as a floating-point safeguard: the
    constrained solve is exact up to the multiplier bisection tolerance, and
    the guard keeps the recorded trace non-increasing regardless.
    """
    columns = response_columns(stack, w)
    f = _residual(_beam_values(columns, phi.values), pattern.amplitudes * pnu)
    trace = [f]
    for _ in range(max_outer):
        f_start = f
        if update_w:
            rows = effective_gain_rows(stack, phi.values)
            w_cand = power_constrained_ls(rows, pattern.amplitudes * pnu, p_max)
            cols_cand = response_columns(stack, w_cand)
            f_cand = _residual(
                _beam_values(cols_cand, phi.values), pattern.amplitudes * pnu
            )
            if f_cand <= f:
                w = w_cand
                columns = cols_cand
                f = f_cand
            trace.append(f)
        target = pattern.amplitudes * pnu
        cand = _phase_step(columns, target, ipdd_cfg, phi)
        f_cand = _residual(_beam_values(columns, cand.values), target)
        if f_cand <= f:
            phi = cand
            f = f_cand
        trace.append(f)
        values = _beam_values(columns, phi.values)
        pnu = update_pnu(values)
        f = _residual(values, pattern.amplitudes * pnu)
        trace.append(f)
        if f_start - f < rel_tol * max(f_start, np.finfo(float).tiny):
            break
    return w, phi, pnu, trace


def solve_socc(geom, grid, pattern, ipdd_cfg, w_t=None, max_outer=50, rel_tol=1e-6,
               stack=None):
    """Sequential construction: fixed eigendirection precoder, then phases.

    A precomputed cascaded stack for the grid may be passed to amortize
    channel synthesis across many codewords sharing one design grid.
    """
    _check_pattern(grid, pattern)
    g = bs_ris_channel(geom)
    if w_t is None:
        w_t = socc_precoder(g, geom.max_power_w)
    if stack is None:
        stack = cascaded_stack(geom, grid, g=g)
    phi = DiscretePhaseVector.zeros(geom.n_elements, ipdd_cfg.bits)
    pnu = np.ones(grid.n_points, dtype=complex)
    w, phi, pnu, trace = _alternate(
        stack, pattern, ipdd_cfg, geom.max_power_w, w_t, phi, pnu,
        update_w=False, max_outer=max_outer, rel_tol=rel_tol,
    )
    return Codeword(
        bs_precoder=w,
        ris_phases=phi,
        level=grid.level,
        region_index=-1,
        objective=trace[-1],
        region=pattern.target_region,
        pattern_phases=pnu,
        objective_trace=trace,
    )


def solve_jocc(geom, grid, pattern, ipdd_cfg, init=None, max_outer=50, rel_tol=1e-6,
               stack=None):
    """Joint construction; warm starts from a sequential codeword by default.

    With a warm start the initial objective equals the sequential residual,
    and every alternating step is non-increasing, so the joint result is
    never worse than the sequential one.
    """
    _check_pattern(grid, pattern)
    if stack is None:
        stack = cascaded_stack(geom, grid)
    if init is None:
        init = solve_socc(geom, grid, pattern, ipdd_cfg, max_outer=max_outer,
                          rel_tol=rel_tol, stack=stack)
    w = np.asarray(init.bs_precoder, dtype=complex)
    phi = init.ris_phases
    if phi.bits != ipdd_cfg.bits:
        raise ValueError("init codeword bits disagree with the solver config")
    pnu = (
        np.ones(grid.n_points, dtype=complex)
        if init.pattern_phases is None
        else np.asarray(init.pattern_phases, dtype=complex)
    )
    w, phi, pnu, trace = _alternate(
        stack, pattern, ipdd_cfg, geom.max_power_w, w, phi, pnu,
        update_w=True, max_outer=max_outer, rel_tol=rel_tol,
    )
    return Codeword(
        bs_precoder=w,
        ris_phases=phi,
        level=grid.level,
        region_index=init.region_index,
        objective=trace[-1],
        region=pattern.target_region,
        parent_index=init.parent_index,
        pattern_phases=pnu,
        objective_trace=trace,
    )


def _check_pattern(grid, pattern):
    if pattern.amplitudes.shape != (grid.n_points,):
        raise ValueError("pattern length disagrees with the grid")


def beam_values(geom, codeword, grid):
    """Complex response phi^H C(x, y_u, z) w at every grid point."""
    stack = cascaded_stack(geom, grid)
    columns = response_columns(stack, codeword.bs_precoder)
    return _beam_values(columns, codeword.ris_phases.values)


def evaluate_beam_pattern(geom, codeword, eval_grid):
    """Gain map 20 log10 |response| in dB, shape (s_z, s_x), floored."""
    values = beam_values(geom, codeword, eval_grid)
    mag = np.abs(values)
    with np.errstate(divide="ignore"):
        gain_db = 20.0 * np.log10(mag)
    gain_db = np.maximum(gain_db, GAIN_FLOOR_DB)
    return gain_db.reshape(eval_grid.s_z, eval_grid.s_x)


@dataclass(frozen=True)
class CodebookSpec:
    """Two-level region plan plus the shared design grid.

    s1 and s2 count the level-1 and level-2 regions per axis; design_x and
    design_z size the single dense sampling grid every codeword is designed
    against (target amplitude inside the codeword's region, zero at every
    other design point, so each beam is suppressed across the whole
    coverage area rather than only at sibling regions). The design sizes
    default to the level-2 sizes, i.e. one design point per leaf region.
    """

    x_range: tuple
    z_range: tuple
    s1_x: int
    s1_z: int
    s2_x: int
    s2_z: int
    gain: float
    bits: int
    method: str = "socc"
    design_x: int = None
    design_z: int = None

    def __post_init__(self):
        if self.method not in ("socc", "jocc"):
            raise ValueError("method must be 'socc' or 'jocc'")
        if self.s2_x % self.s1_x or self.s2_z % self.s1_z:
            raise ValueError("level-2 grid sizes must be multiples of level-1")
        if self.design_x is None:
            object.__setattr__(self, "design_x", self.s2_x)
        if self.design_z is None:
            object.__setattr__(self, "design_z", self.s2_z)
        if self.design_x % self.s2_x or self.design_z % self.s2_z:
            raise ValueError(
                "design grid sizes must be multiples of the level-2 sizes"
            )

    @property
    def ratio_x(self):
        return self.s2_x // self.s1_x

    @property
    def ratio_z(self):
        return self.s2_z // self.s1_z


def level1_grid(spec):
    return make_sampling_grid(spec.x_range, spec.z_range, spec.s1_x, spec.s1_z, level=1)


def level2_grid(spec, parent_region):
    (x_lo, x_hi), (z_lo, z_hi) = parent_region
    return make_sampling_grid((x_lo, x_hi), (z_lo, z_hi), spec.ratio_x, spec.ratio_z,
                              level=2)


def design_grid(spec):
    """The dense sampling grid shared by every codeword's desired pattern."""
    return make_sampling_grid(
        spec.x_range, spec.z_range, spec.design_x, spec.design_z
    )


def build_codebook(geom, spec, ipdd_cfg, max_outer=50, rel_tol=1e-6):
    """Train all level-1 and level-2 codewords for the given plan.

    All codewords share one design grid and one cascaded-channel stack;
    each desired pattern carries the target amplitude on the design points
    inside the codeword's own region and zero on all others.
    """
    if ipdd_cfg.bits != spec.bits:
        raise ValueError("spec and solver config disagree on the number of bits")
    g = bs_ris_channel(geom)
    w_seq = socc_precoder(g, geom.max_power_w)
    grid = design_grid(spec)
    stack = cascaded_stack(geom, grid, g=g)

    def train(region, level, region_index, parent_index):
        pattern = desired_pattern(grid, region, spec.gain)
        cw = solve_socc(geom, grid, pattern, ipdd_cfg, w_t=w_seq,
                        max_outer=max_outer, rel_tol=rel_tol, stack=stack)
        cw.level = level
        cw.region_index = region_index
        cw.parent_index = parent_index
        if spec.method == "jocc":
            cw = solve_jocc(geom, grid, pattern, ipdd_cfg, init=cw,
                            max_outer=max_outer, rel_tol=rel_tol, stack=stack)
            cw.level = level
        return cw

    g1 = level1_grid(spec)
    level1 = [train(g1.cell(r), 1, r, None) for r in range(g1.n_points)]
    level2 = []
    for parent in level1:
        g2 = level2_grid(spec, parent.region)
        for r in range(g2.n_points):
            cw = train(g2.cell(r), 2, len(level2), parent.region_index)
            level2.append(cw)
    return Codebook(
        levels=[level1, level2],
        geometry_fingerprint=geometry_fingerprint(geom),
        bits=spec.bits,
    )


def _complex_pairs(arr):
    return [[float(v.real), float(v.imag)] for v in np.asarray(arr, dtype=complex)]


def _from_pairs(pairs):
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


def _codeword_payload(cw):
    return {
        "bs_precoder": _complex_pairs(cw.bs_precoder),
        "phase_bits": cw.ris_phases.bits,
        "phase_indices": [int(i) for i in cw.ris_phases.indices],
        "level": cw.level,
        "region_index": cw.region_index,
        "objective": float(cw.objective),
        "region": [list(cw.region[0]), list(cw.region[1])],
        "parent_index": cw.parent_index,
        "pattern_phases": None
        if cw.pattern_phases is None
        else _complex_pairs(cw.pattern_phases),
    }


def _codeword_from_payload(payload):
    return Codeword(
        bs_precoder=_from_pairs(payload["bs_precoder"]),
        ris_phases=DiscretePhaseVector(
            bits=payload["phase_bits"],
            indices=np.asarray(payload["phase_indices"], dtype=np.int64),
        ),
        level=payload["level"],
        region_index=payload["region_index"],
        objective=payload["objective"],
        region=(tuple(payload["region"][0]), tuple(payload["region"][1])),
        parent_index=payload["parent_index"],
        pattern_phases=None
        if payload["pattern_phases"] is None
        else _from_pairs(payload["pattern_phases"]),
    )


def save_codebook(codebook, path):
    payload = {
        "geometry_fingerprint": codebook.geometry_fingerprint,
        "bits": codebook.bits,
        "levels": [
            [_codeword_payload(cw) for cw in level] for level in codebook.levels
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_codebook(path):
    with open(path) as fh:
        payload = json.load(fh)
    return Codebook(
        levels=[
            [_codeword_from_payload(p) for p in level] for level in payload["levels"]
        ],
        geometry_fingerprint=payload["geometry_fingerprint"],
        bits=payload["bits"],
    )

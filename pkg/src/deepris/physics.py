"""Two-dimensional coupled-dipole channel simulator.

Every scatterer in the enclosure (wall segments, internal clutter, the two
antennas, the RIS elements and the rotating perturber) is a resonant dipole.
At frequency ``f`` (wavenumber ``k = 2 pi f``) the dipole moments ``p`` solve
``W p = e`` with the symmetric interaction matrix

    W_kk = (f_k^2 - f^2 - 1j * gamma_k * f) / chi_k^2 - 1j * k^2 / 4
    W_jk = -(1j * k^2 / 4) * H0(k |r_j - r_k|)

where ``H0`` is the Hankel function of the first kind and order zero (the 2D
free-space Green's function up to the ``k^2`` factor). The ``-1j k^2/4``
term on the diagonal is the radiation reaction, i.e. the regular imaginary
part of the Green's function at zero distance; without it the model is not
passive. The channel is ``H(f) = [W^-1]_{rx,tx} / (chi_tx * chi_rx)``.

Dipole ordering inside ``W``: walls, tx, rx, perturber, RIS.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import j0, y0

from .core import DomainError, FrequencyGrid, NumericalError, ValidationError, validate_config


@dataclass(frozen=True)
class Dipole:
    position: tuple[float, float]
    resonance_frequency: float
    resonance_linewidth: float
    coupling_strength: float

    def __post_init__(self):
        vals = (self.resonance_frequency, self.resonance_linewidth, self.coupling_strength)
        if not all(np.isfinite(v) and v > 0 for v in vals):
            raise ValidationError(f"dipole parameters must be positive and finite: {self}")
        if not all(np.isfinite(self.position)):
            raise ValidationError(f"dipole position must be finite: {self}")


@dataclass(frozen=True)
class DipoleArray:
    """Vectorized dipole group. ``resonance`` is ``(n,)`` or ``(n, 2)`` for RIS
    elements, where column 0 is the state-0 and column 1 the state-1 resonance."""

    positions: np.ndarray
    resonance: np.ndarray
    linewidth: np.ndarray
    coupling: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        n = pos.shape[0]
        res = np.asarray(self.resonance, dtype=float)
        res = res.reshape(n, 2) if res.size == 2 * n and res.ndim == 2 else res.reshape(n)
        lw = np.broadcast_to(np.asarray(self.linewidth, dtype=float), (n,)).copy()
        ch = np.broadcast_to(np.asarray(self.coupling, dtype=float), (n,)).copy()
        for name, arr in (("resonance", res), ("linewidth", lw), ("coupling", ch)):
            if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                raise ValidationError(f"dipole {name} values must be positive and finite")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("dipole positions must be finite")
        for name, arr in (("positions", pos), ("resonance", res), ("linewidth", lw), ("coupling", ch)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_dipoles(cls, dipoles) -> "DipoleArray":
        dipoles = list(dipoles)
        return cls(
            positions=np.array([d.position for d in dipoles], dtype=float).reshape(-1, 2),
            resonance=np.array([d.resonance_frequency for d in dipoles], dtype=float),
            linewidth=np.array([d.resonance_linewidth for d in dipoles], dtype=float),
            coupling=np.array([d.coupling_strength for d in dipoles], dtype=float),
        )


@dataclass(frozen=True)
class Environment:
    walls: DipoleArray
    tx: Dipole
    rx: Dipole
    ris: DipoleArray
    perturber_offsets: DipoleArray
    perturber_pivot: tuple[float, float]
    grid: FrequencyGrid
    name: str = "unnamed"

    def __post_init__(self):
        if len(self.ris) < 1:
            raise ValidationError("the RIS needs at least one element")
        if self.ris.resonance.ndim != 2:
            raise ValidationError("RIS elements need two resonance states")
        pts = np.vstack([self._static_positions(), self.perturber_positions(0.0), self.ris.positions])
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) < 1e-9:
            j, k = np.unravel_index(np.argmin(dist), dist.shape)
            raise ValidationError(f"dipoles {j} and {k} share the position {tuple(pts[j])}")

    @property
    def n(self) -> int:
        return len(self.ris)

    @property
    def b(self) -> int:
        return self.grid.size

    @property
    def n_static(self) -> int:
        return len(self.walls) + 2

    @property
    def n_dipoles(self) -> int:
        return self.n_static + len(self.perturber_offsets) + self.n

    @property
    def tx_index(self) -> int:
        return len(self.walls)

    @property
    def rx_index(self) -> int:
        return len(self.walls) + 1

    def _static_positions(self) -> np.ndarray:
        return np.vstack([self.walls.positions, [self.tx.position], [self.rx.position]])

    def perturber_positions(self, angle: float) -> np.ndarray:
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return np.asarray(self.perturber_pivot) + self.perturber_offsets.positions @ rot.T

    def without_perturber(self) -> "Environment":
        empty = DipoleArray(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0))
        return Environment(self.walls, self.tx, self.rx, self.ris, empty,
                           self.perturber_pivot, self.grid, self.name + "-static")

    def positions(self, angle: float) -> np.ndarray:
        return np.vstack([self._static_positions(), self.perturber_positions(angle), self.ris.positions])

    def static_params(self):
        """(resonance, linewidth, coupling) for walls + tx + rx."""
        res = np.concatenate([self.walls.resonance, [self.tx.resonance_frequency, self.rx.resonance_frequency]])
        lw = np.concatenate([self.walls.linewidth, [self.tx.resonance_linewidth, self.rx.resonance_linewidth]])
        ch = np.concatenate([self.walls.coupling, [self.tx.coupling_strength, self.rx.coupling_strength]])
        return res, lw, ch

    def ris_resonance(self, config) -> np.ndarray:
        bits = np.asarray(config, dtype=np.intp)
        return np.take_along_axis(
            np.broadcast_to(self.ris.resonance, bits.shape + (2,)), bits[..., None], axis=-1
        )[..., 0]

    @property
    def channel_scale(self) -> float:
        return 1.0 / (self.tx.coupling_strength * self.rx.coupling_strength)


@dataclass(frozen=True)
class PerturberState:
    angle: float

    def __post_init__(self):
        a = float(self.angle)
        if not np.isfinite(a):
            raise DomainError("perturber angle must be finite")
        object.__setattr__(self, "angle", a % (2 * np.pi))


def wavenumber(f):
    return 2.0 * np.pi * np.asarray(f, dtype=float)


def inverse_polarizability(resonance, linewidth, coupling, f):
    """Lorentzian inverse polarizability with 2D radiation reaction."""
    k = wavenumber(f)
    return (resonance**2 - f**2 - 1j * linewidth * f) / coupling**2 - 0.25j * k**2


def green_coupling(dist, f):
    """Off-diagonal interaction entry for the given distances at frequency f."""
    kr = wavenumber(f) * dist
    return -0.25j * wavenumber(f) ** 2 * (j0(kr) + 1j * y0(kr))


def _pairwise_dist(a, b):
    d = a[:, None, :] - b[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


def _angle_of(state) -> float:
    return state.angle if isinstance(state, PerturberState) else PerturberState(state).angle


def interaction_matrix(env: Environment, config, state, f: float) -> np.ndarray:
    """Dense ``D x D`` interaction matrix at frequency ``f``."""
    if not f > 0:
        raise DomainError(f"frequency must be positive, got {f}")
    bits = validate_config(config, env.n)
    angle = _angle_of(state)
    pos = env.positions(angle)
    res_s, lw_s, ch_s = env.static_params()
    po = env.perturber_offsets
    res = np.concatenate([res_s, po.resonance, env.ris_resonance(bits)])
    lw = np.concatenate([lw_s, po.linewidth, env.ris.linewidth])
    ch = np.concatenate([ch_s, po.coupling, env.ris.coupling])
    dist = _pairwise_dist(pos, pos)
    np.fill_diagonal(dist, 1.0)
    w = green_coupling(dist, f)
    np.fill_diagonal(w, inverse_polarizability(res, lw, ch, f))
    return w


def channel_response(env: Environment, config, state) -> np.ndarray:
    """Reference channel ``H(f_i)`` via dense LU with partial pivoting."""
    bits = validate_config(config, env.n)
    out = np.empty(env.b, dtype=complex)
    e_tx = np.zeros(env.n_dipoles, dtype=complex)
    e_tx[env.tx_index] = 1.0
    for i, f in enumerate(env.grid.frequencies):
        w = interaction_matrix(env, bits, state, f)
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            try:
                lu, piv = scipy.linalg.lu_factor(w, check_finite=False)
            except scipy.linalg.LinAlgWarning as exc:
                raise NumericalError(f"singular interaction matrix at bin {i} (f={f})") from exc
        if np.min(np.abs(np.diag(lu))) == 0:
            raise NumericalError(f"singular interaction matrix at bin {i} (f={f})")
        x = scipy.linalg.lu_solve((lu, piv), e_tx, check_finite=False)
        out[i] = x[env.rx_index] * env.channel_scale
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite channel response")
    return out


@dataclass
class StaticFactorization:
    """Config- and angle-independent precomputation for the fast path.

    Holds, per frequency, the inverse of the static block ``A`` (walls and
    antennas) and its products with the static-RIS coupling. Immutable once
    built; share freely between workers.
    """

    env: Environment
    a_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        env = self.env
        f = env.grid.frequencies
        s_pos = env._static_positions()
        r_pos = env.ris.positions
        self._f = f
        self._s_pos = s_pos
        d_ss = _pairwise_dist(s_pos, s_pos)
        np.fill_diagonal(d_ss, 1.0)
        res, lw, ch = env.static_params()
        a = green_coupling(d_ss[None], f[:, None, None])
        idx = np.arange(len(s_pos))
        a[:, idx, idx] = inverse_polarizability(res[None], lw[None], ch[None], f[:, None])
        try:
            self.a_inv = np.linalg.inv(a)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular static interaction block") from exc
        self.b_sr = green_coupling(_pairwise_dist(s_pos, r_pos)[None], f[:, None, None])
        self.q_r = self.a_inv @ self.b_sr
        d_rr = _pairwise_dist(r_pos, r_pos)
        g_rr = green_coupling(np.where(d_rr > 0, d_rr, 1.0)[None], f[:, None, None])
        n = env.n
        g_rr[:, np.arange(n), np.arange(n)] = 0.0
        self.k_rr = g_rr - np.swapaxes(self.b_sr, 1, 2) @ self.q_r
        self.c_tx = self.a_inv[:, :, env.tx_index]
        self.c_rx = self.a_inv[:, :, env.rx_index]
        self.h_static = self.a_inv[:, env.rx_index, env.tx_index]
        self.u_r = np.einsum("bsn,bs->bn", self.b_sr, self.c_rx)
        self.v_r = np.einsum("bsn,bs->bn", self.b_sr, self.c_tx)
        po = env.perturber_offsets
        if len(po):
            d_pp = _pairwise_dist(po.positions, po.positions)
            g_pp = green_coupling(np.where(d_pp > 0, d_pp, 1.0)[None], f[:, None, None])
            p = len(po)
            g_pp[:, np.arange(p), np.arange(p)] = inverse_polarizability(
                po.resonance[None], po.linewidth[None], po.coupling[None], f[:, None])
            self.g_pp = g_pp
        # diag of the RIS inverse polarizability for states 0/1: (B, N, 2)
        self.ris_inv_alpha = inverse_polarizability(
            env.ris.resonance[None], env.ris.linewidth[None, :, None],
            env.ris.coupling[None, :, None], f[:, None, None])

    def at_angle(self, state) -> "AngleFactorization":
        return AngleFactorization(self, _angle_of(state))


class AngleFactorization:
    """Reduces the full system to an ``N x N`` problem per frequency at a fixed
    perturber angle. ``H = h0 + u^T (T0 + diag(1/alpha_RIS(config)))^-1 v``."""

    def __init__(self, static: StaticFactorization, angle: float):
        env = static.env
        self.static = static
        self.angle = angle
        f = static._f
        if len(env.perturber_offsets) == 0:
            self.h0 = static.h_static
            self.t0 = static.k_rr
            self.u = static.u_r
            self.v = static.v_r
            return
        p_pos = env.perturber_positions(angle)
        b_sp = green_coupling(_pairwise_dist(static._s_pos, p_pos)[None], f[:, None, None])
        g_pr = green_coupling(_pairwise_dist(p_pos, env.ris.positions)[None], f[:, None, None])
        b_sp_t = np.swapaxes(b_sp, 1, 2)
        k_pp = static.g_pp - b_sp_t @ static.a_inv @ b_sp
        k_pr = g_pr - b_sp_t @ static.q_r
        u_p = np.einsum("bsp,bs->bp", b_sp, static.c_rx)
        v_p = np.einsum("bsp,bs->bp", b_sp, static.c_tx)
        try:
            # solve k_pp against [k_pr | u_p | v_p] in one go
            rhs = np.concatenate([k_pr, u_p[..., None], v_p[..., None]], axis=2)
            sol = np.linalg.solve(k_pp, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular perturber block at angle {angle}") from exc
        n = env.n
        kpp_inv_kpr, kpp_inv_u, kpp_inv_v = sol[..., :n], sol[..., n], sol[..., n + 1]
        k_rp = np.swapaxes(k_pr, 1, 2)
        self.h0 = static.h_static + np.einsum("bp,bp->b", u_p, kpp_inv_v)
        self.t0 = static.k_rr - k_rp @ kpp_inv_kpr
        self.u = static.u_r - np.einsum("bnp,bp->bn", k_rp, kpp_inv_u)
        self.v = static.v_r - np.einsum("bnp,bp->bn", k_rp, kpp_inv_v)

    def responses(self, configs) -> np.ndarray:
        """Channel responses for a ``(C, N)`` batch of configurations; ``(C, B)``."""
        bits = np.asarray(configs, dtype=np.intp)
        single = bits.ndim == 1
        bits = np.atleast_2d(bits)
        env = self.static.env
        if bits.shape[1] != env.n:
            raise DomainError(f"configuration has {bits.shape[1]} bits, expected {env.n}")
        ia = self.static.ris_inv_alpha  # (B, N, 2)
        diag = np.where(bits[:, None, :] == 1, ia[None, :, :, 1], ia[None, :, :, 0])  # (C, B, N)
        t = np.broadcast_to(self.t0, (bits.shape[0],) + self.t0.shape).copy()
        n = env.n
        t[..., np.arange(n), np.arange(n)] += diag
        try:
            y = np.linalg.solve(t, np.broadcast_to(self.v[None, :, :, None], t.shape[:-1] + (1,)))[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular reduced RIS system at angle {self.angle}") from exc
        h = (self.h0[None] + np.einsum("bn,cbn->cb", self.u, y)) * env.channel_scale
        if not np.all(np.isfinite(h)):
            bad = np.argwhere(~np.isfinite(h))[0]
            raise NumericalError(f"non-finite channel at frequency bin {bad[1]}")
        return h[0] if single else h


def channel_response_fast(base: StaticFactorization, config, state) -> np.ndarray:
    bits = np.asarray(config)
    if bits.shape[-1] != base.env.n:
        raise DomainError(f"configuration has {bits.shape[-1]} bits, factorization expects {base.env.n}")
    return base.at_angle(state).responses(bits)


def draw_angles(rng: np.random.Generator, n_angles: int) -> np.ndarray:
    if n_angles < 1:
        raise DomainError("n_angles must be at least 1")
    return rng.uniform(0.0, 2 * np.pi, size=n_angles)


def moments_at_angles(base: StaticFactorization, configs, angles) -> np.ndarray:
    """Per-bin mean of ``|H|^2`` over ``angles`` for each configuration.

    Every configuration sees the same angle set (common random numbers).
    Returns ``(C, B)``; the static environment short-circuits to one solve.
    """
    configs = np.atleast_2d(np.asarray(configs))
    angles = np.asarray(angles, dtype=float)
    if len(base.env.perturber_offsets) == 0:
        angles = angles[:1]
    acc = np.zeros((configs.shape[0], base.env.b))
    for a in angles:
        acc += np.abs(base.at_angle(a).responses(configs)) ** 2
    return acc / len(angles)


def sample_moments(env: Environment, config, n_angles: int, rng: np.random.Generator,
                   base: StaticFactorization | None = None) -> np.ndarray:
    """Monte-Carlo estimate of ``E|H(f_i)|^2`` over ``n_angles`` uniform angles."""
    bits = validate_config(config, env.n)
    angles = draw_angles(rng, n_angles)
    base = base if base is not None else StaticFactorization(env)
    return moments_at_angles(base, bits[None], angles)[0]

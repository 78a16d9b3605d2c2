"""Digital backpropagation engines and their complexity model.

All methods share one symmetric split-step driver that walks the link
backwards with uniform steps.  Every operation is all-pass: linear steps are
quadratic-phase multiplies evaluated at each channel's absolute carrier
offset (intra-channel dispersion, walk-off and common phase in one go), and
nonlinear steps are pure phase rotations computed from the channel
intensities.  Input channels are normalized to unit mean power internally,
so the nonlinear weights carry the assumed launch power explicitly.

The nonlinear phase of the coupled-channel method is, per step and sample,

    theta_x[i] = -sum_l (phi_par[i,l] * (C_{l-i} (*) |x_l|^2)
                         + phi_perp[l] * (C_{l-i} (*) |y_l|^2))

with (*) a sliding correlation over symbol lags, phi_perp[l] the integrated
nonlinear phase weight of channel l over the step, and phi_par[i,l] =
(2 - delta_il) * phi_perp[l]; theta_y swaps the roles of the two intensity
terms.  The stored coefficients satisfy C_{-h}[m] = C_h[-m] by construction.
"""

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy.fft import fft, ifft, rfft, irfft

from .constants import dbm_to_watt
from .channel import Link, MANAKOV_FACTOR
from .signals import (
    ConfigurationError,
    DualPolSignal,
    dispersion_response,
    overlap_save_filter,
)


class DbpMethod(str, Enum):
    """Available backpropagation variants."""

    GVD_ONLY = "gvd"
    SSFM = "ssfm"
    OSSFM = "ossfm"
    ESSFM = "essfm"
    CC_ESSFM = "cc-essfm"
    FF_SSFM = "ff-ssfm"
    FF_OSSFM = "ff-ossfm"
    FF_ESSFM = "ff-essfm"

    @property
    def is_full_field(self) -> bool:
        return self in (DbpMethod.FF_SSFM, DbpMethod.FF_OSSFM, DbpMethod.FF_ESSFM)

    @property
    def is_coupled(self) -> bool:
        return self is DbpMethod.CC_ESSFM

    @property
    def uses_coefficients(self) -> bool:
        return self in (DbpMethod.ESSFM, DbpMethod.CC_ESSFM, DbpMethod.FF_ESSFM)

    @property
    def uses_nl_scale(self) -> bool:
        return self in (DbpMethod.OSSFM, DbpMethod.FF_OSSFM)


def parse_method(value) -> DbpMethod:
    """Accept a DbpMethod, its value ('cc-essfm') or its name ('CC_ESSFM')."""
    if isinstance(value, DbpMethod):
        return value
    try:
        return DbpMethod(value)
    except ValueError:
        pass
    try:
        return DbpMethod[str(value).upper().replace("-", "_")]
    except KeyError:
        raise ConfigurationError(f"unknown DBP method '{value}'") from None


@dataclass
class CoefficientSet:
    """Intensity-filter coefficients with the built-in index symmetry.

    Only the non-redundant half is stored: ``c0`` holds C_0[m] for m >= 0
    (C_0 is even), and ``cross[h-1]`` holds C_h[m] for m = -n_c .. n_c and
    h = 1 .. n_channels - 1.  Kernels for negative h are materialized as
    C_{-h}[m] = C_h[-m], so an asymmetric set is unrepresentable.
    """

    n_channels: int
    c0: np.ndarray
    cross: np.ndarray

    def __post_init__(self):
        if self.n_channels < 1:
            raise ConfigurationError("n_channels must be >= 1")
        self.c0 = np.atleast_1d(np.asarray(self.c0, dtype=np.float64))
        self.cross = np.asarray(self.cross, dtype=np.float64)
        if self.cross.ndim != 2 or self.cross.shape[0] != self.n_channels - 1:
            raise ConfigurationError(
                f"cross filters must have shape (n_channels - 1, 2 * n_c + 1), "
                f"got {self.cross.shape}"
            )
        if self.cross.shape[0] > 0 and self.cross.shape[1] % 2 == 0:
            raise ConfigurationError("cross filters need an odd number of taps")

    @classmethod
    def zeros(cls, n_channels: int, n_c0: int = 32, n_c: int = 128):
        return cls(
            n_channels=n_channels,
            c0=np.zeros(n_c0 + 1),
            cross=np.zeros((n_channels - 1, 2 * n_c + 1)),
        )

    @classmethod
    def impulse(cls, n_channels: int = 1, n_c0: int = 32, n_c: int = 128):
        out = cls.zeros(n_channels, n_c0, n_c)
        out.c0[0] = 1.0
        return out

    @property
    def n_c0(self) -> int:
        return self.c0.shape[0] - 1

    @property
    def n_c(self) -> int:
        return (self.cross.shape[1] - 1) // 2 if self.cross.shape[0] else 0

    @property
    def n_parameters(self) -> int:
        return self.c0.size + self.cross.size

    def is_pointwise(self) -> bool:
        """True when the set reduces to a scaled impulse at lag zero."""
        return not np.any(self.c0[1:]) and not np.any(self.cross)

    def kernel(self, h: int) -> np.ndarray:
        """Centered taps of C_h for m = -W .. W (W = n_c0 for h = 0, else n_c)."""
        if h == 0:
            return np.concatenate([self.c0[:0:-1], self.c0])
        if abs(h) >= self.n_channels:
            raise ConfigurationError(f"channel distance {h} out of range")
        taps = self.cross[abs(h) - 1]
        return taps.copy() if h > 0 else taps[::-1].copy()

    def copy(self) -> "CoefficientSet":
        return CoefficientSet(self.n_channels, self.c0.copy(), self.cross.copy())


@dataclass
class NonlinearStepParams:
    """Per-channel nonlinear weights of one step, in radians per unit
    normalized intensity: phi_perp[l] = (8/9) * gamma * P_l * Leff(step)."""

    phi_perp: np.ndarray

    def __post_init__(self):
        self.phi_perp = np.atleast_1d(np.asarray(self.phi_perp, dtype=np.float64))

    @property
    def n_channels(self) -> int:
        return self.phi_perp.shape[0]

    def phi_par(self) -> np.ndarray:
        """Co-polarized weight matrix (2 - delta_il) * phi_perp[l]."""
        m = self.n_channels
        return (2.0 - np.eye(m)) * self.phi_perp[None, :]


def _embed_kernel(taps: np.ndarray, n: int) -> np.ndarray:
    """Place a centered kernel on an n-point circular grid (lag m at index m mod n)."""
    w = (taps.shape[0] - 1) // 2
    if taps.shape[0] > n:
        raise ConfigurationError(f"kernel of {taps.shape[0]} taps exceeds frame of {n}")
    buf = np.zeros(n)
    buf[: w + 1] = taps[w:]
    if w:
        buf[n - w :] = taps[:w]
    return buf


def _circular_correlator(coeffs: CoefficientSet, n: int):
    """corr(rows, h) evaluating C_h (*) row over the whole circular frame."""
    cache = {}

    def corr(rows: np.ndarray, h: int) -> np.ndarray:
        if h not in cache:
            cache[h] = np.conj(rfft(_embed_kernel(coeffs.kernel(h), n)))
        return irfft(rfft(rows, axis=-1) * cache[h], n, axis=-1)

    return corr


def _block_correlator(coeffs: CoefficientSet, n_fft: int, n_keep: int):
    """Overlap-save variant of the intensity correlator (exact: finite kernels)."""
    cache = {}

    def corr(rows: np.ndarray, h: int) -> np.ndarray:
        if h not in cache:
            cache[h] = np.conj(fft(_embed_kernel(coeffs.kernel(h), n_fft)))
        out = np.empty_like(rows)
        for r in range(rows.shape[0]):
            out[r] = overlap_save_filter(rows[r], cache[h], n_keep).real
        return out

    return corr


def _phases(ix, iy, params: NonlinearStepParams, coeffs, corr, independent: bool):
    """Nonlinear phase planes (theta_x, theta_y) for a batch of channels.

    Dispatches to progressively simpler forms so that the reductions are
    structural: a (scaled) impulse becomes a pointwise product shared with
    plain SSFM, and a single channel or per-channel (independent) batch uses
    only the C_0 filter on the total intensity.
    """
    phi = params.phi_perp
    if coeffs is None or coeffs.is_pointwise():
        a = 1.0 if coeffs is None else float(coeffs.c0[0])
        th = -a * (phi[:, None] * (ix + iy))
        return th, th
    m = ix.shape[0]
    if independent or m == 1:
        th = -phi[:, None] * corr(ix + iy, 0)
        return th, th
    phi_par = params.phi_par()
    thx = np.zeros_like(ix)
    thy = np.zeros_like(iy)
    for h in range(-(m - 1), m):
        i_lo, i_hi = max(0, -h), min(m, m - h)
        if i_hi <= i_lo:
            continue
        ii = np.arange(i_lo, i_hi)
        ll = ii + h
        jx = corr(ix[ll], h)
        jy = corr(iy[ll], h)
        par = phi_par[ii, ll][:, None]
        perp = phi[ll][:, None]
        thx[ii] += par * jx + perp * jy
        thy[ii] += perp * jx + par * jy
    return -thx, -thy


def linear_step(channels, beta2_dz: float, sample_rate: float = None):
    """Apply one dispersive (all-pass) step of accumulated GVD ``beta2_dz``
    (s^2) to each channel at its own carrier offset.  Negative values invert
    a forward segment."""
    out = []
    for ch in channels:
        gains = dispersion_response(
            ch.n_samples, ch.sample_rate, 1.0, beta2_dz, ch.center_offset
        )
        out.append(replace(ch, x=ifft(fft(ch.x) * gains), y=ifft(fft(ch.y) * gains)))
    return out


def _apply_phase_batch(channels, thx, thy):
    out = []
    for i, ch in enumerate(channels):
        rot_x = np.exp(1j * thx[i])
        rot_y = np.exp(1j * thy[i])
        out.append(replace(ch, x=ch.x * rot_x, y=ch.y * rot_y))
    return out


def _batch_intensities(channels):
    ix = np.stack([np.abs(ch.x) ** 2 for ch in channels])
    iy = np.stack([np.abs(ch.y) ** 2 for ch in channels])
    return ix, iy


def nonlinear_step_ssfm(channels, params: NonlinearStepParams, nl_scale: float = 1.0):
    """Pointwise self-intensity phase rotation (per-channel SSFM step)."""
    scaled = NonlinearStepParams(params.phi_perp * nl_scale)
    ix, iy = _batch_intensities(channels)
    thx, thy = _phases(ix, iy, scaled, None, None, independent=True)
    return _apply_phase_batch(channels, thx, thy)


def nonlinear_step_essfm(channels, params: NonlinearStepParams, coeffs: CoefficientSet):
    """Filtered-intensity phase rotation applied to each channel on its own."""
    ix, iy = _batch_intensities(channels)
    corr = _circular_correlator(coeffs, ix.shape[1])
    thx, thy = _phases(ix, iy, params, coeffs, corr, independent=True)
    return _apply_phase_batch(channels, thx, thy)


def nonlinear_step_cc_essfm(channels, params: NonlinearStepParams, coeffs: CoefficientSet):
    """Joint coupled-channel phase rotation across the whole batch."""
    if coeffs.n_channels != len(channels):
        raise ConfigurationError(
            f"coefficient set is for {coeffs.n_channels} channels, got {len(channels)}"
        )
    ix, iy = _batch_intensities(channels)
    corr = _circular_correlator(coeffs, ix.shape[1])
    thx, thy = _phases(ix, iy, params, coeffs, corr, independent=False)
    return _apply_phase_batch(channels, thx, thy)


@dataclass
class DbpConfig:
    """Backpropagation run parameters."""

    method: DbpMethod = DbpMethod.CC_ESSFM
    n_steps: int = 15
    samples_per_symbol: float = 1.25
    launch_power_dbm: float = 0.0
    nl_scale: float = 1.0
    n_c0: int = 32
    n_c: int = 128
    block_fft_size: int = 0  # 0 = whole-sequence processing
    block_keep: int = 0

    def __post_init__(self):
        self.method = parse_method(self.method)
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if self.samples_per_symbol <= 0:
            raise ConfigurationError("samples_per_symbol must be > 0")
        if self.nl_scale < 0:
            raise ConfigurationError("nl_scale must be >= 0")
        if self.n_c0 < 0 or self.n_c < 0:
            raise ConfigurationError("filter widths must be >= 0")
        if self.block_fft_size:
            if not 0 < self.block_keep < self.block_fft_size:
                raise ConfigurationError(
                    "block mode needs 0 < block_keep < block_fft_size"
                )

    @property
    def dbp_sample_rate_factor(self) -> float:
        return self.samples_per_symbol


def default_coefficients(cfg: DbpConfig, n_channels: int) -> CoefficientSet:
    """Impulse (SSFM-equivalent) coefficients sized for a method and batch."""
    if cfg.method.is_coupled:
        return CoefficientSet.impulse(n_channels, cfg.n_c0, cfg.n_c)
    return CoefficientSet.impulse(1, cfg.n_c0, cfg.n_c)


def step_nonlinear_params(
    link: Link, n_steps: int, powers_w: np.ndarray
) -> list:
    """Per-step NonlinearStepParams over a uniform split of the whole link."""
    bounds = np.linspace(0.0, link.total_length_m, n_steps + 1)
    out = []
    for s in range(n_steps):
        weight = MANAKOV_FACTOR * link.nonlinear_integral(bounds[s], bounds[s + 1])
        out.append(NonlinearStepParams(powers_w * weight))
    return out


def run_dbp(channels, link: Link, cfg: DbpConfig, coeffs: CoefficientSet = None, powers_w=None):
    """Backpropagate a batch of channels (or one aggregate field) through the link.

    ``channels`` is a list of DualPolSignal sharing sample rate and length;
    full-field methods expect exactly one entry.  ``powers_w`` overrides the
    assumed per-entry launch power (defaults to ``cfg.launch_power_dbm`` for
    every entry).  The output preserves each entry's mean power exactly
    (every operation is all-pass).
    """
    if not channels:
        raise ConfigurationError("run_dbp needs at least one channel")
    method = cfg.method
    if method.is_full_field and len(channels) != 1:
        raise ConfigurationError("full-field methods take a single aggregate field")
    n = channels[0].n_samples
    fs = channels[0].sample_rate
    for ch in channels:
        if ch.n_samples != n or ch.sample_rate != fs:
            raise ConfigurationError("channels must share length and sample rate")
    m = len(channels)

    if powers_w is None:
        powers_w = np.full(m, dbm_to_watt(cfg.launch_power_dbm))
    else:
        powers_w = np.atleast_1d(np.asarray(powers_w, dtype=np.float64))
        if powers_w.shape != (m,):
            raise ConfigurationError("powers_w must give one power per entry")

    if method.uses_coefficients:
        if coeffs is None:
            coeffs = default_coefficients(cfg, m)
        if method.is_coupled and coeffs.n_channels != m:
            raise ConfigurationError(
                f"coefficient set is for {coeffs.n_channels} channels, got {m}"
            )
    else:
        coeffs = None
    nl_scale = cfg.nl_scale

    # Unit-power working copies; scales restored at the end.
    scales = np.array([np.sqrt(ch.power()) or 1.0 for ch in channels])
    ux = np.stack([ch.x / s for ch, s in zip(channels, scales)])
    uy = np.stack([ch.y / s for ch, s in zip(channels, scales)])
    offsets = np.array([ch.center_offset for ch in channels])

    blocks = cfg.block_fft_size > 0

    def disperse(rows, beta2_dz):
        out = np.empty_like(rows)
        for i in range(m):
            if blocks:
                gains = dispersion_response(
                    cfg.block_fft_size, fs, 1.0, beta2_dz, offsets[i]
                )
                out[i] = overlap_save_filter(rows[i], gains, cfg.block_keep)
            else:
                gains = dispersion_response(n, fs, 1.0, beta2_dz, offsets[i])
                out[i] = ifft(fft(rows[i]) * gains)
        return out

    total_b2 = link.dispersion_integral(0.0, link.total_length_m)
    if method is DbpMethod.GVD_ONLY:
        ux = disperse(ux, -total_b2)
        uy = disperse(uy, -total_b2)
        return [
            replace(ch, x=ux[i] * scales[i], y=uy[i] * scales[i])
            for i, ch in enumerate(channels)
        ]

    if coeffs is not None:
        if blocks:
            corr = _block_correlator(coeffs, cfg.block_fft_size, cfg.block_keep)
        else:
            corr = _circular_correlator(coeffs, n)
    else:
        corr = None
    independent = not method.is_coupled

    bounds = np.linspace(0.0, link.total_length_m, cfg.n_steps + 1)
    step_params = step_nonlinear_params(link, cfg.n_steps, powers_w * nl_scale)
    # Per-step dispersion as extended-precision differences of the cumulative
    # integral, so the applied steps telescope to exactly the GVD-only total.
    cum_b2 = np.array(
        [link.dispersion_integral(0.0, z) for z in bounds], dtype=np.longdouble
    )

    for s in reversed(range(cfg.n_steps)):
        b2_step = cum_b2[s + 1] - cum_b2[s]
        ux = disperse(ux, -0.5 * b2_step)
        uy = disperse(uy, -0.5 * b2_step)
        thx, thy = _phases(
            np.abs(ux) ** 2, np.abs(uy) ** 2, step_params[s], coeffs, corr, independent
        )
        ux = ux * np.exp(1j * thx)
        uy = uy * np.exp(1j * thy)
        ux = disperse(ux, -0.5 * b2_step)
        uy = disperse(uy, -0.5 * b2_step)

    return [
        replace(ch, x=ux[i] * scales[i], y=uy[i] * scales[i])
        for i, ch in enumerate(channels)
    ]


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(value).limit_denominator(1_000_000)


def complexity(
    method,
    n_steps: int,
    n_fft: int,
    eta,
    samples_per_symbol,
    n_c: int = 0,
    n_channels: int = 1,
) -> Fraction:
    """Real multiplications per transmitted symbol for one channel.

    ``eta`` is the FFT-block overhead factor (block length over useful
    samples) and ``samples_per_symbol`` the processing rate n.  Exact
    rational arithmetic is used throughout; ``n_fft`` must be a power of two.
    """
    method = parse_method(method)
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise ConfigurationError(f"n_fft must be a power of two, got {n_fft}")
    log2n = n_fft.bit_length() - 1
    eta = _as_fraction(eta)
    sps = _as_fraction(samples_per_symbol)
    if eta < 1 or sps <= 0:
        raise ConfigurationError("eta must be >= 1 and samples_per_symbol > 0")
    if method is DbpMethod.GVD_ONLY:
        return eta * sps * (8 * log2n + 8)
    if n_steps < 1:
        raise ConfigurationError("n_steps must be >= 1")
    per_step = eta * sps
    if method in (DbpMethod.SSFM, DbpMethod.OSSFM, DbpMethod.FF_SSFM, DbpMethod.FF_OSSFM):
        return n_steps * per_step * (8 * log2n + 21)
    if method in (DbpMethod.ESSFM, DbpMethod.FF_ESSFM):
        return n_steps * per_step * (8 * log2n + 21 + n_c)
    if method is DbpMethod.CC_ESSFM:
        return n_steps * per_step * (12 * log2n + 20 + 4 * n_channels)
    raise ConfigurationError(f"no complexity model for method '{method}'")

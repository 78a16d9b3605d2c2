"""Transmitter and receiver chain: Gray-mapped 64-QAM frames, RRC pulse
shaping, WDM multiplexing on a uniform grid, and symbol-rate detection.

The WDM grid is snapped to an even number of FFT bins of the aggregate frame
so that every channel offset is an integer bin and the circular-frame algebra
stays exact; ``TxConfig.effective_grid_spacing`` reports the snapped value.
"""

from dataclasses import dataclass
import numpy as np
from scipy.fft import fft, ifft

from .constants import dbm_to_watt
from .signals import (
    ConfigurationError,
    DualPolSignal,
    brickwall_response,
    rrc_response,
)

BITS_PER_SYMBOL = 6
_LEVELS_PER_RAIL = 8


def _gray_decode(g: np.ndarray) -> np.ndarray:
    """Invert the reflected Gray code g = b ^ (b >> 1) for 3-bit labels."""
    b = g ^ (g >> 1)
    return b ^ (b >> 2)


def _build_constellation():
    idx = np.arange(64)
    gi = idx >> 3  # first three bits select the in-phase rail
    gq = idx & 0b111
    amp = 2.0 * np.arange(_LEVELS_PER_RAIL) - (_LEVELS_PER_RAIL - 1)
    points = amp[_gray_decode(gi)] + 1j * amp[_gray_decode(gq)]
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    bits = (idx[:, None] >> np.arange(BITS_PER_SYMBOL - 1, -1, -1)) & 1
    return points, bits.astype(np.uint8)


#: Unit-energy 64-QAM points indexed by their 6-bit label (MSB first), with
#: reflected-Gray labeling per rail, and the matching (64, 6) bit table.
QAM64_POINTS, QAM64_BITS = _build_constellation()

_BIT_WEIGHTS = 1 << np.arange(BITS_PER_SYMBOL - 1, -1, -1)


def bits_to_symbols(bits: np.ndarray) -> np.ndarray:
    """Map bits of shape (..., 6) to unit-energy 64-QAM points."""
    bits = np.asarray(bits)
    if bits.shape[-1] != BITS_PER_SYMBOL:
        raise ConfigurationError(f"expected trailing axis of {BITS_PER_SYMBOL} bits")
    return QAM64_POINTS[bits @ _BIT_WEIGHTS]


@dataclass
class TxConfig:
    """Transmitter-side parameters for one superchannel experiment."""

    symbol_rate: float = 41.67e9
    grid_spacing: float = 75e9
    rolloff: float = 0.1
    n_channels: int = 4
    n_side_superchannels: int = 0
    launch_power_dbm: float = 0.0
    n_symbols: int = 8192
    sim_samples_per_symbol: int = 8
    rng_seed: int = 1

    def __post_init__(self):
        if self.symbol_rate <= 0 or self.grid_spacing <= 0:
            raise ConfigurationError("symbol_rate and grid_spacing must be > 0")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigurationError(f"rolloff must be in [0, 1], got {self.rolloff}")
        if self.n_channels < 1 or self.n_side_superchannels < 0:
            raise ConfigurationError("invalid channel counts")
        if self.n_symbols < 2:
            raise ConfigurationError("n_symbols must be >= 2")
        if self.sim_samples_per_symbol < 2:
            raise ConfigurationError("sim_samples_per_symbol must be >= 2")
        if self.grid_spacing < (1.0 + self.rolloff) * self.symbol_rate:
            raise ConfigurationError(
                "grid_spacing is narrower than the occupied channel bandwidth"
            )
        if self.grid_spacing_bins < 2:
            raise ConfigurationError("grid spacing below the FFT bin resolution")

    @property
    def n_total_channels(self) -> int:
        return self.n_channels * (1 + 2 * self.n_side_superchannels)

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.sim_samples_per_symbol

    @property
    def n_samples(self) -> int:
        return self.n_symbols * self.sim_samples_per_symbol

    @property
    def launch_power_w(self) -> float:
        return float(dbm_to_watt(self.launch_power_dbm))

    @property
    def grid_spacing_bins(self) -> int:
        """Grid spacing snapped to an even number of aggregate FFT bins."""
        bin_width = self.symbol_rate / self.n_symbols
        return 2 * int(round(self.grid_spacing / (2.0 * bin_width)))

    @property
    def effective_grid_spacing(self) -> float:
        return self.grid_spacing_bins * self.symbol_rate / self.n_symbols

    def scoi_global_index(self, channel_index: int) -> int:
        """Global grid index of a channel of interest (0-based within the SCOI)."""
        if not 0 <= channel_index < self.n_channels:
            raise ConfigurationError(
                f"channel_index must be in [0, {self.n_channels}), got {channel_index}"
            )
        return channel_index + self.n_channels * self.n_side_superchannels

    def offset_bins_global(self, global_index: int) -> int:
        """Integer FFT-bin offset of a channel on the full grid."""
        pos = global_index - (self.n_total_channels - 1) / 2.0
        bins = pos * self.grid_spacing_bins
        return int(round(bins))

    def channel_offset(self, channel_index: int) -> float:
        """Carrier offset in Hz of an SCOI channel (snapped grid)."""
        bins = self.offset_bins_global(self.scoi_global_index(channel_index))
        return bins * self.symbol_rate / self.n_symbols


@dataclass
class SymbolFrame:
    """Transmitted bits and symbols for every channel and polarization.

    ``symbols[c, p]`` is normalized to exactly unit mean power per (channel,
    polarization) block, so the shaped waveform carries the configured launch
    power without a stochastic correction.
    """

    bits: np.ndarray  # (n_channels, 2, n_symbols, 6) uint8
    symbols: np.ndarray  # (n_channels, 2, n_symbols) complex128

    @property
    def n_channels(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[2]


def generate_frame(cfg: TxConfig) -> SymbolFrame:
    """Draw independent random 64-QAM frames for all channels and pols."""
    n_ch = cfg.n_total_channels
    bits = np.empty((n_ch, 2, cfg.n_symbols, BITS_PER_SYMBOL), dtype=np.uint8)
    symbols = np.empty((n_ch, 2, cfg.n_symbols), dtype=np.complex128)
    for c in range(n_ch):
        for p in range(2):
            rng = np.random.default_rng(np.random.SeedSequence((cfg.rng_seed, c, p)))
            blk = rng.integers(0, 2, size=(cfg.n_symbols, BITS_PER_SYMBOL), dtype=np.uint8)
            sym = bits_to_symbols(blk)
            sym /= np.sqrt(np.mean(np.abs(sym) ** 2))
            bits[c, p] = blk
            symbols[c, p] = sym
    return SymbolFrame(bits=bits, symbols=symbols)


def _shaped_spectrum(symbols: np.ndarray, g: np.ndarray, sps: int, target_power: float):
    """RRC-shaped spectrum of one symbol block, scaled to an exact mean power."""
    spec = np.tile(fft(symbols), sps) * g
    n = spec.shape[0]
    mean_power = np.sum(np.abs(spec) ** 2) / n**2  # Parseval
    if mean_power <= 0:
        raise ConfigurationError("cannot scale an all-zero symbol block")
    return spec * np.sqrt(target_power / mean_power)


def shape_and_mux(frame: SymbolFrame, cfg: TxConfig) -> DualPolSignal:
    """Shape every channel with the RRC pulse and sum them on the WDM grid."""
    if frame.n_channels != cfg.n_total_channels or frame.n_symbols != cfg.n_symbols:
        raise ConfigurationError("frame shape does not match the configuration")
    n = cfg.n_samples
    g = rrc_response(n, cfg.sample_rate, cfg.symbol_rate, cfg.rolloff)
    p_pol = cfg.launch_power_w / 2.0
    agg = np.zeros((2, n), dtype=np.complex128)
    for c in range(cfg.n_total_channels):
        shift = cfg.offset_bins_global(c)
        for p in range(2):
            spec = _shaped_spectrum(frame.symbols[c, p], g, cfg.sim_samples_per_symbol, p_pol)
            agg[p] += np.roll(spec, shift)
    return DualPolSignal(
        x=ifft(agg[0]), y=ifft(agg[1]), sample_rate=cfg.sample_rate, center_offset=0.0
    )


def demux_channel(
    field: DualPolSignal, channel_index: int, cfg: TxConfig, target_rate: float
) -> DualPolSignal:
    """Extract one SCOI channel: shift to baseband, band-limit, decimate.

    ``target_rate`` must stay above the occupied RRC bandwidth and divide the
    frame into an integer number of samples.
    """
    min_rate = (1.0 + cfg.rolloff) * cfg.symbol_rate
    if target_rate < min_rate * (1.0 - 1e-12):
        raise ConfigurationError(
            f"target_rate {target_rate} Hz is below the occupied bandwidth {min_rate} Hz"
        )
    exact = field.n_samples * target_rate / field.sample_rate
    n_new = int(round(exact))
    if abs(exact - n_new) > 1e-9 * max(1.0, exact):
        raise ConfigurationError(
            f"target_rate {target_rate} Hz does not give an integer frame length"
        )
    shift = cfg.offset_bins_global(cfg.scoi_global_index(channel_index))
    bw = min(cfg.effective_grid_spacing, target_rate)
    out = np.empty((2, n_new), dtype=np.complex128)
    scale = n_new / field.n_samples
    for p, u in enumerate((field.x, field.y)):
        spec = np.roll(fft(u), -shift)
        if bw < target_rate:
            spec *= brickwall_response(field.n_samples, field.sample_rate, bw)
        shifted = np.fft.fftshift(spec)
        lo = (field.n_samples - n_new) // 2
        out[p] = ifft(np.fft.ifftshift(shifted[lo : lo + n_new])) * scale
    return DualPolSignal(
        x=out[0],
        y=out[1],
        sample_rate=target_rate,
        center_offset=shift * field.sample_rate / field.n_samples,
    )


def matched_filter_and_sample(sig: DualPolSignal, cfg: TxConfig) -> np.ndarray:
    """RRC matched filter plus symbol-rate sampling of both polarizations.

    Sampling at one per symbol is done spectrally: the filtered spectrum is
    folded modulo the symbol-grid length, which is exact for any (including
    fractional) oversampling factor.  Each polarization is normalized to unit
    mean power; the result has shape (2, n_symbols).
    """
    n, k = sig.n_samples, cfg.n_symbols
    if n < k:
        raise ConfigurationError("signal is shorter than one sample per symbol")
    g = rrc_response(n, sig.sample_rate, cfg.symbol_rate, cfg.rolloff)
    # Fold each FFT bin onto the symbol grid at its true (signed) frequency
    # index modulo k; for fractional oversampling the raw index is wrong.
    q = np.arange(n)
    fold_idx = np.where(q <= n // 2, q, q - n) % k
    out = np.empty((2, k), dtype=np.complex128)
    for p, u in enumerate((sig.x, sig.y)):
        spec = fft(u) * g
        folded = np.zeros(k, dtype=np.complex128)
        np.add.at(folded, fold_idx, spec)
        sym = ifft(folded) * (k / n)
        power = np.mean(np.abs(sym) ** 2)
        if power > 0:
            sym /= np.sqrt(power)
        out[p] = sym
    return out


def remove_mpr(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    """Remove the mean phase rotation between received and reference symbols.

    A single phase, estimated jointly over everything passed in (normally both
    polarizations of one channel), rotates ``rx`` onto ``tx``.
    """
    rx = np.asarray(rx)
    tx = np.asarray(tx)
    if rx.shape != tx.shape:
        raise ConfigurationError(f"shape mismatch: {rx.shape} vs {tx.shape}")
    c = np.vdot(tx.ravel(), rx.ravel())
    if c == 0:
        return rx.copy()
    return rx * (np.conj(c) / np.abs(c))

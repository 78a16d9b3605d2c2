"""Experiment orchestration: configuration, seed discipline, the
simulate/train/evaluate/sweep flows, and the on-disk interchange formats.

Seeds: every random draw derives from one base seed through a
``SeedSequence`` keyed by purpose (training/evaluation frame, ASE) and the
launch power, so methods compared at the same power see identical data and
noise while training and evaluation stay independent.
"""

from dataclasses import dataclass, field, replace
import configparser
import struct

import numpy as np

from .channel import AmpConfig, FiberSpan, Link, StepPlan, propagate_link
from .constants import dbm_to_watt
from .dbp import CoefficientSet, DbpConfig, DbpMethod, parse_method, run_dbp
from .metrics import MetricsReport, estimate_gmi, nmse, sweep_launch_power
from .optimizer import (
    ObjectiveReport,
    TrainingConfig,
    optimize_coefficients,
    optimize_nl_scale,
)
from .signals import (
    ConfigurationError,
    DualPolSignal,
    apply_spectral_filter,
    brickwall_response,
    resample,
)
from .txrx import (
    SymbolFrame,
    TxConfig,
    demux_channel,
    generate_frame,
    matched_filter_and_sample,
    remove_mpr,
    shape_and_mux,
)


class DataFileError(Exception):
    """A data file is missing, truncated, or not in the expected format."""


class NumericalError(Exception):
    """A computation produced non-finite values."""


# Purpose tags for seed derivation.
_TRAIN_FRAME, _EVAL_FRAME, _TRAIN_ASE, _EVAL_ASE = 1, 2, 3, 4


def derived_seed(base: int, *tags) -> int:
    """Deterministic 64-bit stream seed from a base seed and context tags.

    Tags may be negative (e.g. launch powers in milli-dB); they are folded
    into unsigned 64-bit words, which SeedSequence requires.
    """
    words = [int(t) & 0xFFFFFFFFFFFFFFFF for t in (base, *tags)]
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment end to end."""

    tx: TxConfig = field(default_factory=TxConfig)
    span: FiberSpan = field(default_factory=FiberSpan)
    amp: AmpConfig = field(default_factory=lambda: AmpConfig(gain_db=16.0))
    n_spans: int = 15
    forward_plan: StepPlan = field(default_factory=StepPlan)
    dbp: DbpConfig = field(default_factory=DbpConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    eval_n_symbols: int = 8192
    full_field_sps: float = 8.0
    sweep_powers: list = field(default_factory=lambda: [float(p) for p in range(-4, 7)])
    complexity_n_fft: int = 4096
    complexity_eta: str = "4/3"

    def __post_init__(self):
        if self.n_spans < 1:
            raise ConfigurationError("n_spans must be >= 1")
        if self.eval_n_symbols < 2:
            raise ConfigurationError("eval_n_symbols must be >= 2")
        if self.full_field_sps <= 0:
            raise ConfigurationError("full_field_sps must be > 0")

    def link(self, with_ase: bool = True) -> Link:
        amp = self.amp if with_ase else replace(self.amp, include_ase=False)
        return Link.uniform(self.n_spans, self.span, amp)


def simulate_field(cfg: ExperimentConfig, power_dbm: float, purpose: str = "eval",
                   noiseless: bool = False):
    """Generate a frame at one launch power and push it through the link.

    Returns ``(tx_cfg, frame, field)``; ``tx_cfg.rng_seed`` is the derived
    frame seed, so the frame can be regenerated from the saved value alone.
    """
    if purpose == "eval":
        frame_tag, ase_tag = _EVAL_FRAME, _EVAL_ASE
        n_symbols = cfg.eval_n_symbols
    elif purpose == "train":
        frame_tag, ase_tag = _TRAIN_FRAME, _TRAIN_ASE
        n_symbols = cfg.training.n_train_symbols
    else:
        raise ConfigurationError(f"unknown purpose '{purpose}'")
    mdb = int(round(power_dbm * 1000))
    tx_cfg = replace(
        cfg.tx,
        launch_power_dbm=power_dbm,
        n_symbols=n_symbols,
        rng_seed=derived_seed(cfg.tx.rng_seed, frame_tag, mdb),
    )
    frame = generate_frame(tx_cfg)
    field_tx = shape_and_mux(frame, tx_cfg)
    use_ase = cfg.amp.include_ase and not noiseless
    rng = None
    if use_ase:
        rng = np.random.default_rng(derived_seed(cfg.tx.rng_seed, ase_tag, mdb))
    field_rx = propagate_link(field_tx, cfg.link(with_ase=use_ase), cfg.forward_plan, rng)
    return tx_cfg, frame, field_rx


def dbp_config_for(cfg: ExperimentConfig, method, n_steps: int, power_dbm: float,
                   nl_scale: float = 1.0) -> DbpConfig:
    """The per-run DbpConfig with the power the equalizer should assume.

    Full-field variants see the whole SCOI, so their assumed power is the
    per-channel launch power times the channel count.
    """
    method = parse_method(method)
    assumed = power_dbm
    if method.is_full_field:
        assumed = power_dbm + 10.0 * np.log10(cfg.tx.n_channels)
    return replace(
        cfg.dbp, method=method, n_steps=n_steps, launch_power_dbm=assumed,
        nl_scale=nl_scale,
    )


def dbp_input(field: DualPolSignal, tx_cfg: TxConfig, dbp_cfg: DbpConfig,
              full_field_sps: float = 8.0):
    """Demultiplex (or band-limit, for full-field methods) the received field."""
    if dbp_cfg.method.is_full_field:
        bw = tx_cfg.n_channels * tx_cfg.effective_grid_spacing
        agg = apply_spectral_filter(
            field, brickwall_response(field.n_samples, field.sample_rate, bw)
        )
        target = full_field_sps * tx_cfg.symbol_rate
        if target != field.sample_rate:
            agg = resample(agg, target)
        return [agg]
    rate = dbp_cfg.samples_per_symbol * tx_cfg.symbol_rate
    return [
        demux_channel(field, i, tx_cfg, rate) for i in range(tx_cfg.n_channels)
    ]


def scoi_references(frame: SymbolFrame, tx_cfg: TxConfig):
    """Transmitted symbols and bits of the channels of interest."""
    idx = [tx_cfg.scoi_global_index(i) for i in range(tx_cfg.n_channels)]
    return frame.symbols[idx], frame.bits[idx]


def train_method(cfg: ExperimentConfig, method, n_steps: int):
    """Produce (coeffs, nl_scale, report) for a method; baselines train nothing."""
    method = parse_method(method)
    if not (method.uses_coefficients or method.uses_nl_scale):
        return None, 1.0, None
    power = cfg.training.train_power_dbm
    tx_cfg, frame, field_rx = simulate_field(
        cfg, power, "train", noiseless=cfg.training.noiseless
    )
    dbp_cfg = dbp_config_for(cfg, method, n_steps, power)
    channels = dbp_input(field_rx, tx_cfg, dbp_cfg, cfg.full_field_sps)
    tx_syms, _ = scoi_references(frame, tx_cfg)
    link = cfg.link()
    if method.uses_nl_scale:
        report = optimize_nl_scale(channels, tx_syms, link, dbp_cfg, tx_cfg, cfg.training)
        return None, report.nl_scale, report
    report = optimize_coefficients(channels, tx_syms, link, dbp_cfg, tx_cfg, cfg.training)
    return report.coeffs, 1.0, report


def receive_symbols(eq_channels, tx_cfg: TxConfig, dbp_cfg: DbpConfig, frame: SymbolFrame):
    """Matched-filter, sample and phase-align every channel of interest.

    Returns (rx, refs, bits) arrays of shapes (n_ch, 2, K), (n_ch, 2, K) and
    (n_ch, 2, K, 6).
    """
    if dbp_cfg.method.is_full_field:
        rate = dbp_cfg.samples_per_symbol * tx_cfg.symbol_rate
        eq_channels = [
            demux_channel(eq_channels[0], i, tx_cfg, rate)
            for i in range(tx_cfg.n_channels)
        ]
    refs, bits = (np.asarray(a) for a in scoi_references(frame, tx_cfg))
    rx = np.empty_like(refs)
    for i, ch in enumerate(eq_channels):
        syms = matched_filter_and_sample(ch, tx_cfg)
        if not np.all(np.isfinite(syms)):
            raise NumericalError(f"non-finite samples in channel {i}")
        rx[i] = remove_mpr(syms, refs[i])
    return rx, refs, bits


def evaluate_field(cfg: ExperimentConfig, field_rx: DualPolSignal, tx_cfg: TxConfig,
                   frame: SymbolFrame, method, n_steps: int, power_dbm: float,
                   coeffs: CoefficientSet = None, nl_scale: float = 1.0) -> MetricsReport:
    """Equalize and score an already-propagated field."""
    dbp_cfg = dbp_config_for(cfg, method, n_steps, power_dbm, nl_scale)
    inputs = dbp_input(field_rx, tx_cfg, dbp_cfg, cfg.full_field_sps)
    eq = run_dbp(inputs, cfg.link(), dbp_cfg, coeffs)
    rx, refs, bits = receive_symbols(eq, tx_cfg, dbp_cfg, frame)
    gmis, nmses = [], []
    for i in range(tx_cfg.n_channels):
        gmis.append(
            estimate_gmi(rx[i, 0], bits[i, 0]) + estimate_gmi(rx[i, 1], bits[i, 1])
        )
        nmses.append(nmse(rx[i], refs[i]))
    return MetricsReport(
        method=parse_method(method).value,
        n_steps=n_steps,
        power_dbm=power_dbm,
        seed=cfg.tx.rng_seed,
        gmi_per_channel=gmis,
        nmse_per_channel=nmses,
    )


def evaluate_point(cfg: ExperimentConfig, method, n_steps: int, power_dbm: float,
                   coeffs: CoefficientSet = None, nl_scale: float = 1.0,
                   noiseless: bool = False) -> MetricsReport:
    """Simulate, equalize and score one (method, N_s, power) cell."""
    tx_cfg, frame, field_rx = simulate_field(cfg, power_dbm, "eval", noiseless)
    return evaluate_field(
        cfg, field_rx, tx_cfg, frame, method, n_steps, power_dbm, coeffs, nl_scale
    )


def _eval_cell(args):
    cfg, method, n_steps, power, coeffs, nl_scale = args
    return evaluate_point(cfg, method, n_steps, power, coeffs, nl_scale)


def run_sweep(cfg: ExperimentConfig, methods, steps_list, powers=None, map_fn=map):
    """Train once per (method, N_s) and evaluate over the power grid.

    Evaluation cells go through ``map_fn`` (swap in a process pool for
    parallelism); results are independent of the mapping order.
    """
    powers = list(cfg.sweep_powers if powers is None else powers)
    trained = {}
    cells = []
    for method in methods:
        for n_steps in steps_list:
            coeffs, xi, _ = train_method(cfg, method, n_steps)
            trained[(parse_method(method).value, n_steps)] = (coeffs, xi)
            for p in powers:
                cells.append((cfg, method, n_steps, p, coeffs, xi))
    results = list(map_fn(_eval_cell, cells))
    by_cell = {(r.method, r.n_steps, r.power_dbm): r for r in results}
    reports = []
    for method in methods:
        mval = parse_method(method).value
        for n_steps in steps_list:
            curve = sweep_launch_power(
                lambda p, m=mval, s=n_steps: by_cell[(m, s, p)], powers
            )
            reports.extend(curve)
    return reports


# ----- metrics CSV -----

CSV_HEADER = "method,N_s,power_dBm,channel,gmi_bits_per_4D,nmse_dB,seed,peak_flag"


def write_metrics_csv(path, reports):
    """Write evaluation reports in the canonical CSV layout (sorted, so the
    bytes do not depend on evaluation order or thread count)."""
    ordered = sorted(reports, key=lambda r: (r.method, r.n_steps, r.power_dbm))
    lines = [CSV_HEADER]
    for r in ordered:
        flag = int(r.peak_flag)
        rows = [(str(i), g, v) for i, (g, v) in
                enumerate(zip(r.gmi_per_channel, r.nmse_per_channel))]
        rows.append(("avg", r.avg_gmi, r.avg_nmse_db))
        for channel, gmi, nm in rows:
            lines.append(
                f"{r.method},{r.n_steps},{r.power_dbm:.2f},{channel},"
                f"{gmi:.6f},{nm:.3f},{r.seed},{flag}"
            )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ----- binary signal file -----

_SIGNAL_MAGIC = b"WDMS"
_SIGNAL_VERSION = 1
_HEADER_FMT = "<4sIQIIQIddddII"
_RECORD_FMT = "<ddQ"
_FLAG_ASE = 1


def save_signal(path, field: DualPolSignal, tx_cfg: TxConfig, ase_enabled: bool = True):
    """Write a propagated field plus the metadata needed to re-derive the frame."""
    flags = _FLAG_ASE if ase_enabled else 0
    header = struct.pack(
        _HEADER_FMT,
        _SIGNAL_MAGIC,
        _SIGNAL_VERSION,
        tx_cfg.rng_seed,
        tx_cfg.n_channels,
        tx_cfg.n_side_superchannels,
        tx_cfg.n_symbols,
        tx_cfg.sim_samples_per_symbol,
        tx_cfg.symbol_rate,
        tx_cfg.grid_spacing,
        tx_cfg.rolloff,
        tx_cfg.launch_power_dbm,
        flags,
        1,  # one aggregate record
    )
    record = struct.pack(
        _RECORD_FMT, field.sample_rate, field.center_offset, field.n_samples
    )
    data = np.empty(2 * field.n_samples, dtype=np.complex64)
    data[0::2] = field.x
    data[1::2] = field.y
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(record)
        fh.write(data.astype("<c8").tobytes())


def load_signal(path):
    """Read a signal file; returns (field, tx_cfg, ase_enabled)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc}") from None
    hsize = struct.calcsize(_HEADER_FMT)
    if len(raw) < hsize:
        raise DataFileError(f"{path}: truncated header")
    (magic, version, seed, n_ch, n_side, n_sym, sps, rs, spacing, rolloff,
     power, flags, n_records) = struct.unpack_from(_HEADER_FMT, raw)
    if magic != _SIGNAL_MAGIC:
        raise DataFileError(f"{path}: not a signal file")
    if version != _SIGNAL_VERSION:
        raise DataFileError(f"{path}: unsupported version {version}")
    if n_records != 1:
        raise DataFileError(f"{path}: expected one record, found {n_records}")
    rsize = struct.calcsize(_RECORD_FMT)
    if len(raw) < hsize + rsize:
        raise DataFileError(f"{path}: truncated record header")
    sample_rate, center_offset, length = struct.unpack_from(_RECORD_FMT, raw, hsize)
    need = hsize + rsize + 16 * length
    if len(raw) < need:
        raise DataFileError(f"{path}: truncated sample data")
    data = np.frombuffer(raw, dtype="<c8", count=2 * length, offset=hsize + rsize)
    field = DualPolSignal(
        x=data[0::2].astype(np.complex128),
        y=data[1::2].astype(np.complex128),
        sample_rate=sample_rate,
        center_offset=center_offset,
    )
    tx_cfg = TxConfig(
        symbol_rate=rs,
        grid_spacing=spacing,
        rolloff=rolloff,
        n_channels=n_ch,
        n_side_superchannels=n_side,
        launch_power_dbm=power,
        n_symbols=n_sym,
        sim_samples_per_symbol=sps,
        rng_seed=seed,
    )
    return field, tx_cfg, bool(flags & _FLAG_ASE)


# ----- configuration file -----

_CONFIG_SPEC = {
    "system": {
        "symbol_rate_ghz": float,
        "grid_spacing_ghz": float,
        "rolloff": float,
        "n_channels": int,
        "n_side_superchannels": int,
        "sim_samples_per_symbol": int,
        "n_eval_symbols": int,
        "seed": int,
    },
    "link": {
        "n_spans": int,
        "span_length_km": float,
        "dispersion_ps_nm_km": float,
        "attenuation_db_km": float,
        "gamma_w_km": float,
        "amp_gain_db": float,
        "noise_figure_db": float,
        "include_ase": bool,
        "forward_steps_per_span": int,
        "forward_spacing": str,
    },
    "dbp": {
        "method": str,
        "n_steps": int,
        "samples_per_symbol": float,
        "full_field_samples_per_symbol": float,
        "n_c0": int,
        "n_c": int,
        "block_fft_size": int,
        "block_keep": int,
    },
    "training": {
        "n_train_symbols": int,
        "train_power_dbm": float,
        "max_iterations": int,
        "n_rounds": int,
        "tolerance": float,
        "initial_step": float,
        "noiseless": bool,
    },
    "sweep": {
        "power_dbm_start": float,
        "power_dbm_stop": float,
        "power_dbm_step": float,
    },
    "complexity": {
        "n_fft": int,
        "eta": str,
    },
}


def _coerce(raw: str, kind, section: str, key: str):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigurationError(
            f"config [{section}] {key}: cannot parse {raw!r} as {kind.__name__}"
        ) from None


def load_experiment_config(path=None) -> ExperimentConfig:
    """Build an ExperimentConfig from an INI file (defaults if path is None)."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise DataFileError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            if section not in _CONFIG_SPEC:
                raise ConfigurationError(f"config: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in _CONFIG_SPEC[section]:
                    raise ConfigurationError(
                        f"config: unknown key '{key}' in [{section}]"
                    )
                values[(section, key)] = _coerce(
                    raw, _CONFIG_SPEC[section][key], section, key
                )

    def get(section, key, default):
        return values.get((section, key), default)

    tx = TxConfig(
        symbol_rate=get("system", "symbol_rate_ghz", 41.67) * 1e9,
        grid_spacing=get("system", "grid_spacing_ghz", 75.0) * 1e9,
        rolloff=get("system", "rolloff", 0.1),
        n_channels=get("system", "n_channels", 4),
        n_side_superchannels=get("system", "n_side_superchannels", 0),
        n_symbols=get("system", "n_eval_symbols", 8192),
        sim_samples_per_symbol=get("system", "sim_samples_per_symbol", 8),
        rng_seed=get("system", "seed", 2026),
    )
    span = FiberSpan(
        length_km=get("link", "span_length_km", 80.0),
        dispersion_ps_nm_km=get("link", "dispersion_ps_nm_km", 17.0),
        attenuation_db_km=get("link", "attenuation_db_km", 0.2),
        gamma_w_km=get("link", "gamma_w_km", 1.3),
    )
    amp = AmpConfig(
        gain_db=get("link", "amp_gain_db", span.loss_db),
        noise_figure_db=get("link", "noise_figure_db", 5.0),
        include_ase=get("link", "include_ase", True),
    )
    plan = StepPlan(
        steps_per_span=get("link", "forward_steps_per_span", 100),
        spacing=get("link", "forward_spacing", "log"),
    )
    dbp_cfg = DbpConfig(
        method=get("dbp", "method", "cc-essfm"),
        n_steps=get("dbp", "n_steps", 15),
        samples_per_symbol=get("dbp", "samples_per_symbol", 1.25),
        n_c0=get("dbp", "n_c0", 32),
        n_c=get("dbp", "n_c", 128),
        block_fft_size=get("dbp", "block_fft_size", 0),
        block_keep=get("dbp", "block_keep", 0),
    )
    training = TrainingConfig(
        n_train_symbols=get("training", "n_train_symbols", 1024),
        train_power_dbm=get("training", "train_power_dbm", 1.0),
        max_iterations=get("training", "max_iterations", 60),
        n_rounds=get("training", "n_rounds", 1),
        tolerance=get("training", "tolerance", 1e-7),
        initial_step=get("training", "initial_step", 1.0),
        noiseless=get("training", "noiseless", False),
    )
    start = get("sweep", "power_dbm_start", -4.0)
    stop = get("sweep", "power_dbm_stop", 6.0)
    step = get("sweep", "power_dbm_step", 1.0)
    if step <= 0:
        raise ConfigurationError("sweep power step must be > 0")
    n_pts = int(np.floor((stop - start) / step + 1e-9)) + 1
    if n_pts < 1:
        raise ConfigurationError("empty sweep power grid")
    powers = [start + i * step for i in range(n_pts)]
    return ExperimentConfig(
        tx=tx,
        span=span,
        amp=amp,
        n_spans=get("link", "n_spans", 15),
        forward_plan=plan,
        dbp=dbp_cfg,
        training=training,
        eval_n_symbols=get("system", "n_eval_symbols", 8192),
        full_field_sps=get("dbp", "full_field_samples_per_symbol", 8.0),
        sweep_powers=powers,
        complexity_n_fft=get("complexity", "n_fft", 4096),
        complexity_eta=get("complexity", "eta", "4/3"),
    )

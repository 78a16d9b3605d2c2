"""Data-aided optimization of the intensity-filter coefficients.

The objective is the mean-square error between the backpropagated, matched-
filtered, normalized and phase-aligned symbols and the transmitted ones,
averaged over every channel, polarization and symbol of a training frame.
Minimization runs stage by stage over the channel distance h (first the
self filter C_0, then each cross filter C_h), each stage using gradient
descent with an Armijo backtracking line search.  The gradient is exact: the
chain rule is propagated analytically backwards through the receiver head
and every split-step of the backpropagation.

The single scaling factor of the scaled SSFM variant is found separately by
a golden-section search (it is one bounded scalar; no gradient needed).
"""

from dataclasses import dataclass, field
import numpy as np
from scipy.fft import fft, ifft, rfft, irfft

from .channel import Link
from .dbp import (
    CoefficientSet,
    DbpConfig,
    DbpMethod,
    _circular_correlator,
    _embed_kernel,
    _phases,
    step_nonlinear_params,
)
from .constants import dbm_to_watt
from .signals import (
    ConfigurationError,
    brickwall_response,
    dispersion_response,
    rrc_response,
)
from .txrx import TxConfig

GOLDEN_BRACKET = (0.0, 1.5)
ARMIJO_C1 = 1e-4


def mse(rx: np.ndarray, tx: np.ndarray) -> float:
    """Mean-square error between two equally shaped complex arrays."""
    rx = np.asarray(rx)
    tx = np.asarray(tx)
    if rx.shape != tx.shape:
        raise ConfigurationError(f"shape mismatch: {rx.shape} vs {tx.shape}")
    if rx.size == 0:
        raise ConfigurationError("mse of empty arrays is undefined")
    return float(np.mean(np.abs(rx - tx) ** 2))


@dataclass
class TrainingConfig:
    """Controls for the coefficient / scale optimization."""

    n_train_symbols: int = 1024
    train_power_dbm: float = 1.0
    max_iterations: int = 60
    n_rounds: int = 1
    tolerance: float = 1e-7
    initial_step: float = 1.0
    noiseless: bool = False
    seed: int = 1234

    def __post_init__(self):
        if self.n_train_symbols < 2:
            raise ConfigurationError("n_train_symbols must be >= 2")
        if self.max_iterations < 1 or self.n_rounds < 1:
            raise ConfigurationError("iteration counts must be >= 1")
        if self.tolerance <= 0 or self.initial_step <= 0:
            raise ConfigurationError("tolerance and initial_step must be > 0")


@dataclass
class ObjectiveReport:
    """Result of a training run: the optimum and its MSE trajectory."""

    coeffs: CoefficientSet
    nl_scale: float
    final_mse: float
    trajectory: list
    stages: list


class _TrainingProblem:
    """The full differentiable objective for one training frame.

    Precomputes everything that does not depend on the coefficients: the
    normalized input fields, the per-step dispersion multipliers at every
    channel offset, the nonlinear step weights, and the receiver head
    (matched filter, spectral fold, reference symbols).
    """

    def __init__(self, channels, tx_symbols, link: Link, dbp_cfg: DbpConfig, tx_cfg: TxConfig):
        if not channels:
            raise ConfigurationError("training needs at least one channel")
        self.m = len(channels)
        self.n = channels[0].n_samples
        self.fs = channels[0].sample_rate
        tx_symbols = np.asarray(tx_symbols, dtype=np.complex128)
        if tx_symbols.ndim != 3 or tx_symbols.shape[1] != 2:
            raise ConfigurationError(
                f"tx_symbols must have shape (n_channels, 2, n_symbols), got {tx_symbols.shape}"
            )
        # Full-field mode: one aggregate entry carries several reference
        # channels; the head then demultiplexes before matched filtering.
        self.aggregate_head = self.m == 1 and tx_symbols.shape[0] > 1
        if not self.aggregate_head and tx_symbols.shape[0] != self.m:
            raise ConfigurationError(
                f"got {self.m} channels but {tx_symbols.shape[0]} reference rows"
            )
        self.t = tx_symbols
        self.n_ref = tx_symbols.shape[0]
        self.k = tx_symbols.shape[2]
        self.independent = not dbp_cfg.method.is_coupled
        self.n_steps = dbp_cfg.n_steps

        scales = np.array([np.sqrt(ch.power()) or 1.0 for ch in channels])
        self.ux0 = np.stack([ch.x / s for ch, s in zip(channels, scales)])
        self.uy0 = np.stack([ch.y / s for ch, s in zip(channels, scales)])
        offsets = np.array([ch.center_offset for ch in channels])

        bounds = np.linspace(0.0, link.total_length_m, self.n_steps + 1)
        self.half_ops = []
        for s in range(self.n_steps):
            b2 = link.dispersion_integral(bounds[s], bounds[s + 1])
            self.half_ops.append(
                np.stack(
                    [
                        dispersion_response(self.n, self.fs, 1.0, -0.5 * b2, off)
                        for off in offsets
                    ]
                )
            )
        powers = np.full(self.m, dbm_to_watt(dbp_cfg.launch_power_dbm))
        self.step_params = step_nonlinear_params(link, self.n_steps, powers)

        self.g_mf = rrc_response(self.n, self.fs, tx_cfg.symbol_rate, tx_cfg.rolloff)
        q = np.arange(self.n)
        self.fold_idx = np.where(q <= self.n // 2, q, q - self.n) % self.k
        if self.aggregate_head:
            band = brickwall_response(
                self.n,
                self.fs,
                min(tx_cfg.effective_grid_spacing, dbp_cfg.samples_per_symbol * tx_cfg.symbol_rate),
            )
            self.head_gains = self.g_mf * band
            bin_width = self.fs / self.n
            self.head_shifts = [
                int(round(tx_cfg.channel_offset(c) / bin_width)) for c in range(self.n_ref)
            ]

    # ----- forward -----

    def _half(self, ux, uy, s):
        h = self.half_ops[s]
        return ifft(fft(ux, axis=1) * h, axis=1), ifft(fft(uy, axis=1) * h, axis=1)

    def run(self, coeffs, nl_scale=1.0, tape=None):
        """Backpropagate the training fields; optionally record NL-step inputs."""
        ux, uy = self.ux0, self.uy0
        corr = None if coeffs is None else _circular_correlator(coeffs, self.n)
        for s in reversed(range(self.n_steps)):
            ux, uy = self._half(ux, uy, s)
            params = self.step_params[s]
            if nl_scale != 1.0:
                params = type(params)(params.phi_perp * nl_scale)
            thx, thy = _phases(
                np.abs(ux) ** 2, np.abs(uy) ** 2, params, coeffs, corr, self.independent
            )
            if tape is not None:
                tape[s] = (ux, uy, thx, thy)
            ux = ux * np.exp(1j * thx)
            uy = uy * np.exp(1j * thy)
            ux, uy = self._half(ux, uy, s)
        return ux, uy

    def _fold(self, spec):
        folded = np.zeros(self.k, dtype=np.complex128)
        np.add.at(folded, self.fold_idx, spec)
        return ifft(folded) * (self.k / self.n)

    def _head_spectrum(self, ux, uy, i):
        """Filtered spectra feeding the symbol fold of reference channel i."""
        if self.aggregate_head:
            shift = self.head_shifts[i]
            return [
                np.roll(fft(w), -shift) * self.head_gains for w in (ux[0], uy[0])
            ]
        return [fft(w) * self.g_mf for w in (ux[i], uy[i])]

    def head(self, ux, uy, want_grad):
        """MSE of the receiver head, and its gradient w.r.t. the output fields."""
        j_total = 0.0
        gx = np.zeros_like(ux) if want_grad else None
        gy = np.zeros_like(uy) if want_grad else None
        for i in range(self.n_ref):
            ys, rs, ss = [], [], []
            for spec in self._head_spectrum(ux, uy, i):
                y = self._fold(spec)
                r = np.sqrt(np.mean(np.abs(y) ** 2))
                ys.append(y)
                rs.append(r)
                ss.append(y / r)
            c = sum(np.vdot(self.t[i, p], ss[p]) for p in range(2))
            rot = np.conj(c) / np.abs(c) if c != 0 else 1.0
            aligned = [s * rot for s in ss]
            j_i = sum(
                np.sum(np.abs(aligned[p] - self.t[i, p]) ** 2) for p in range(2)
            ) / (2 * self.k)
            j_total += j_i / self.n_ref
            if not want_grad:
                continue
            for p, gtarget in enumerate((gx, gy)):
                gs = (aligned[p] - self.t[i, p]) * np.conj(rot) / (2 * self.k * self.n_ref)
                y, r = ys[p], rs[p]
                gyv = gs / r - y * (np.real(np.vdot(gs, y)) / (self.k * r**3))
                rep = fft(gyv)[self.fold_idx]
                if self.aggregate_head:
                    gtarget[0] += ifft(np.roll(self.head_gains * rep, self.head_shifts[i]))
                else:
                    gtarget[i] = ifft(self.g_mf * rep)
        return j_total, gx, gy

    # ----- objective / gradient -----

    def value(self, coeffs, nl_scale=1.0) -> float:
        ux, uy = self.run(coeffs, nl_scale)
        j, _, _ = self.head(ux, uy, want_grad=False)
        return j

    def value_and_grad(self, coeffs: CoefficientSet, active=None):
        """Objective and its exact gradient w.r.t. the stored coefficients.

        ``active`` limits the coefficient gradient to one channel distance
        (int) or computes all of them (None).  Returns (J, grads) with
        ``grads[h]`` matching the free-parameter layout: the m >= 0 taps of
        C_0 for h = 0, the full C_h tap vector for h >= 1 (the tied mirror
        C_{-h} is accounted for by the chain rule).
        """
        tape = {}
        ux, uy = self.run(coeffs, 1.0, tape=tape)
        j, gx, gy = self.head(ux, uy, want_grad=True)

        m, n = self.m, self.n
        hs = range(coeffs.n_channels) if active is None else [active]
        kern_f = {
            h: rfft(_embed_kernel(coeffs.kernel(h), n))
            for h in range(-(m - 1), m)
            if not self.independent or h == 0
        }
        acc = {h: 0.0 for h in hs}

        pairs = [(i, l) for i in range(m) for l in range(m)]
        if self.independent:
            pairs = [(i, i) for i in range(m)]

        for s in range(self.n_steps):
            h_op = np.conj(self.half_ops[s])
            gx = ifft(fft(gx, axis=1) * h_op, axis=1)
            gy = ifft(fft(gy, axis=1) * h_op, axis=1)

            vx, vy, thx, thy = tape[s]
            post_x = vx * np.exp(1j * thx)
            post_y = vy * np.exp(1j * thy)
            t_x = 2.0 * np.imag(gx * np.conj(post_x))
            t_y = 2.0 * np.imag(gy * np.conj(post_y))
            ft_x = rfft(t_x, axis=1)
            ft_y = rfft(t_y, axis=1)

            params = self.step_params[s]
            phi = params.phi_perp
            phi_par = params.phi_par()
            ix = np.abs(vx) ** 2
            iy = np.abs(vy) ** 2
            fi_x = rfft(ix, axis=1)
            fi_y = rfft(iy, axis=1)

            gix = np.zeros((m, ft_x.shape[1]), dtype=np.complex128)
            giy = np.zeros_like(gix)
            for i, l in pairs:
                kf = kern_f[l - i]
                gix[l] += (phi_par[i, l] * ft_x[i] + phi[l] * ft_y[i]) * kf
                giy[l] += (phi[l] * ft_x[i] + phi_par[i, l] * ft_y[i]) * kf
                h = l - i
                if abs(h) in acc:
                    fu = phi_par[i, l] * fi_x[l] + phi[l] * fi_y[l]
                    fv = phi[l] * fi_x[l] + phi_par[i, l] * fi_y[l]
                    r = irfft(np.conj(ft_x[i]) * fu + np.conj(ft_y[i]) * fv, n)
                    w = coeffs.n_c0 if h == 0 else coeffs.n_c
                    lags = np.arange(-w, w + 1) % n
                    contrib = -r[lags]  # dJ/dC_h[m], m = -w .. w
                    if h == 0:
                        vec = contrib[w:].copy()
                        vec[1:] += contrib[w - 1 :: -1]
                        acc[0] = acc[0] + vec
                    elif h > 0:
                        acc[h] = acc[h] + contrib
                    else:
                        acc[-h] = acc[-h] + contrib[::-1]

            gix_t = irfft(gix, n, axis=1)
            giy_t = irfft(giy, n, axis=1)
            gx = gx * np.exp(-1j * thx) - gix_t * vx
            gy = gy * np.exp(-1j * thy) - giy_t * vy

            h_op = np.conj(self.half_ops[s])
            gx = ifft(fft(gx, axis=1) * h_op, axis=1)
            gy = ifft(fft(gy, axis=1) * h_op, axis=1)

        grads = {h: np.asarray(acc[h], dtype=np.float64) for h in hs}
        return j, grads


def _stage_descent(problem, coeffs, h, train_cfg):
    """Gradient descent with backtracking on the taps of one channel distance."""

    def get_vec():
        return coeffs.c0.copy() if h == 0 else coeffs.cross[h - 1].copy()

    def set_vec(v):
        if h == 0:
            coeffs.c0 = v
        else:
            coeffs.cross[h - 1] = v

    history = []
    j, grads = problem.value_and_grad(coeffs, active=h)
    history.append(j)
    step = train_cfg.initial_step
    for _ in range(train_cfg.max_iterations):
        g = grads[h]
        gnorm2 = float(np.dot(g, g))
        if gnorm2 == 0.0:
            break
        base = get_vec()
        improved = False
        for _ in range(50):
            trial = base - step * g
            set_vec(trial)
            j_trial = problem.value(coeffs)
            if j_trial <= j - ARMIJO_C1 * step * gnorm2:
                improved = True
                break
            step *= 0.5
        if not improved:
            set_vec(base)
            break
        rel_gain = (j - j_trial) / max(j, np.finfo(float).tiny)
        j = j_trial
        history.append(j)
        step *= 2.0
        if rel_gain < train_cfg.tolerance:
            break
        j, grads = problem.value_and_grad(coeffs, active=h)
    return history


def optimize_coefficients(
    channels, tx_symbols, link: Link, dbp_cfg: DbpConfig, tx_cfg: TxConfig,
    train_cfg: TrainingConfig,
) -> ObjectiveReport:
    """Train the intensity filters of an (CC-/FF-)ESSFM configuration.

    Stages run over the channel distance h = 0 .. n_channels - 1 (just h = 0
    for the per-channel and full-field variants), optionally repeated for
    ``train_cfg.n_rounds`` passes.  The recorded MSE trajectory is
    non-increasing by construction: only improving line-search steps are
    accepted.
    """
    if not dbp_cfg.method.uses_coefficients:
        raise ConfigurationError(
            f"method {dbp_cfg.method.value} has no trainable coefficients"
        )
    problem = _TrainingProblem(channels, tx_symbols, link, dbp_cfg, tx_cfg)
    n_ch = problem.m if dbp_cfg.method.is_coupled else 1
    coeffs = CoefficientSet.impulse(n_ch, dbp_cfg.n_c0, dbp_cfg.n_c)

    trajectory = []
    stages = []
    for _ in range(train_cfg.n_rounds):
        for h in range(n_ch):
            hist = _stage_descent(problem, coeffs, h, train_cfg)
            stages.append(f"h={h}")
            trajectory.append(hist)
    final = problem.value(coeffs)
    return ObjectiveReport(
        coeffs=coeffs, nl_scale=1.0, final_mse=final, trajectory=trajectory, stages=stages
    )


def optimize_nl_scale(
    channels, tx_symbols, link: Link, dbp_cfg: DbpConfig, tx_cfg: TxConfig,
    train_cfg: TrainingConfig, tol: float = 1e-3,
) -> ObjectiveReport:
    """Golden-section search for the nonlinear scaling factor on [0, 1.5]."""
    problem = _TrainingProblem(channels, tx_symbols, link, dbp_cfg, tx_cfg)

    def j_of(xi):
        return problem.value(None, nl_scale=xi)

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = GOLDEN_BRACKET
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    jc, jd = j_of(c), j_of(d)
    history = [min(jc, jd)]
    while (b - a) > tol:
        if jc < jd:
            b, d, jd = d, c, jc
            c = b - invphi * (b - a)
            jc = j_of(c)
        else:
            a, c, jc = c, d, jd
            d = a + invphi * (b - a)
            jd = j_of(d)
        history.append(min(jc, jd))
    xi = c if jc < jd else d
    best = min(jc, jd)
    return ObjectiveReport(
        coeffs=None,
        nl_scale=float(xi),
        final_mse=float(best),
        trajectory=[history],
        stages=["xi"],
    )


# ----- coefficient file round-trip -----

_FILE_TAG = "wdmdbp-coefficients v1"


def save_coefficients(path, coeffs: CoefficientSet, nl_scale: float = 1.0, method=None):
    """Write a training result as text; floats round-trip bit-exactly.

    ``coeffs`` may be None for scale-only (OSSFM-style) results.
    """
    lines = [f"# {_FILE_TAG}"]
    if method is not None:
        lines.append(f"method {DbpMethod(method).value}")
    if coeffs is None:
        lines.append("n_channels 0")
    else:
        lines.append(f"n_channels {coeffs.n_channels}")
        lines.append(f"n_c0 {coeffs.n_c0}")
        lines.append(f"n_c {coeffs.n_c}")
    lines.append(f"nl_scale {float(nl_scale)!r}")
    if coeffs is not None:
        lines.append("c0 " + " ".join(repr(v) for v in coeffs.c0.tolist()))
        for h in range(1, coeffs.n_channels):
            lines.append(
                f"cross {h} " + " ".join(repr(v) for v in coeffs.cross[h - 1].tolist())
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_coefficients(path):
    """Read a coefficient file; returns (CoefficientSet, nl_scale, method|None)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != f"# {_FILE_TAG}":
        raise ConfigurationError(f"{path} is not a coefficient file")
    fields = {}
    cross_rows = {}
    for ln in lines[1:]:
        keyword, _, rest = ln.partition(" ")
        if keyword == "cross":
            h_str, _, vals = rest.partition(" ")
            cross_rows[int(h_str)] = np.array([float(v) for v in vals.split()])
        else:
            fields[keyword] = rest
    try:
        n_channels = int(fields["n_channels"])
        nl_scale = float(fields["nl_scale"])
        if n_channels == 0:
            return None, nl_scale, fields.get("method")
        n_c0 = int(fields["n_c0"])
        n_c = int(fields["n_c"])
        c0 = np.array([float(v) for v in fields["c0"].split()])
    except KeyError as missing:
        raise ConfigurationError(f"{path}: missing field {missing}") from None
    if c0.shape != (n_c0 + 1,):
        raise ConfigurationError(f"{path}: c0 has {c0.shape[0]} taps, expected {n_c0 + 1}")
    cross = np.zeros((n_channels - 1, 2 * n_c + 1))
    for h in range(1, n_channels):
        if h not in cross_rows:
            raise ConfigurationError(f"{path}: missing cross filter h={h}")
        if cross_rows[h].shape != (2 * n_c + 1,):
            raise ConfigurationError(f"{path}: cross filter h={h} has wrong length")
        cross[h - 1] = cross_rows[h]
    method = fields.get("method")
    coeffs = CoefficientSet(n_channels=n_channels, c0=c0, cross=cross)
    return coeffs, nl_scale, method

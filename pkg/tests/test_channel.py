import numpy as np
import pytest

from wdmdbp import (
    AmpConfig,
    ConfigurationError,
    DualPolSignal,
    FiberSpan,
    Link,
    StepPlan,
    amplify_with_ase,
    apply_spectral_filter,
    dispersion_response,
    propagate_link,
    propagate_span,
)
from wdmdbp.channel import MANAKOV_FACTOR
from wdmdbp.constants import PLANCK, REFERENCE_FREQUENCY


def _cw_signal(power_w, n=256, fs=10e9, split=(0.6, 0.4)):
    x = np.full(n, np.sqrt(split[0] * power_w), dtype=complex)
    y = np.full(n, np.sqrt(split[1] * power_w), dtype=complex)
    return DualPolSignal(x, y, fs)


def test_span_parameters():
    span = FiberSpan()
    assert span.loss_db == pytest.approx(16.0)
    assert span.beta2 == pytest.approx(-2.17e-26, rel=2e-3)
    assert span.alpha == pytest.approx(0.2 / (10 / np.log(10)) * 1e-3, rel=1e-12)
    assert span.gamma == pytest.approx(1.3e-3)
    with pytest.raises(ConfigurationError):
        FiberSpan(length_km=-1)


def test_effective_length_matches_quadrature():
    span = FiberSpan()
    z = np.linspace(12e3, 57e3, 200001)
    ref = np.trapezoid(np.exp(-span.alpha * z), z)
    assert span.effective_length(12e3, 57e3) == pytest.approx(ref, rel=1e-9)
    # Lossless limit -> geometric length.
    lossless = FiberSpan(attenuation_db_km=0.0)
    assert lossless.effective_length(0.0, 8e4) == pytest.approx(8e4)


def test_step_plan_log_spacing_equalizes_effective_length():
    span = FiberSpan()
    bounds = StepPlan(steps_per_span=10, spacing="log").boundaries(span)
    assert bounds[0] == 0.0
    assert bounds[-1] == pytest.approx(span.length_m)
    effs = [span.effective_length(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    np.testing.assert_allclose(effs, effs[0], rtol=1e-9)
    uni = StepPlan(steps_per_span=10, spacing="uniform").boundaries(span)
    np.testing.assert_allclose(uni, np.linspace(0, span.length_m, 11))
    with pytest.raises(ConfigurationError):
        StepPlan(spacing="quadratic")


def test_dispersionless_span_matches_closed_form():
    """With D = 0 the Manakov equation has an exact CW solution: a pure
    nonlinear rotation by (8/9) gamma (|x|^2+|y|^2) L_eff plus loss."""
    span = FiberSpan(dispersion_ps_nm_km=0.0)
    p0 = 5e-3
    sig = _cw_signal(p0)
    for steps in (1, 7):
        out = propagate_span(sig, span, StepPlan(steps_per_span=steps))
        att = np.exp(-span.alpha * span.length_m / 2)
        phase = MANAKOV_FACTOR * span.gamma * p0 * span.effective_length()
        expect_x = sig.x * att * np.exp(1j * phase)
        expect_y = sig.y * att * np.exp(1j * phase)
        np.testing.assert_allclose(out.x, expect_x, rtol=1e-12)
        np.testing.assert_allclose(out.y, expect_y, rtol=1e-12)


def test_linear_span_is_pure_dispersion(rng):
    span = FiberSpan(gamma_w_km=0.0)
    z = rng.standard_normal((2, 512)) * 1e-2
    sig = DualPolSignal(z[0] + 0j, z[1] + 0j, 40e9)
    out = propagate_span(sig, span, StepPlan(steps_per_span=25))
    gains = dispersion_response(512, 40e9, span.beta2, span.length_m)
    expect = apply_spectral_filter(sig, gains).scaled(np.exp(-span.alpha * span.length_m / 2))
    np.testing.assert_allclose(out.x, expect.x, atol=1e-16)
    np.testing.assert_allclose(out.y, expect.y, atol=1e-16)


def test_propagation_accounts_center_offset(rng):
    """A channel envelope away from the carrier walks off by the group delay."""
    span = FiberSpan(gamma_w_km=0.0, attenuation_db_km=0.0)
    n, fs = 4096, 80e9
    t = np.arange(n) / fs
    env = np.exp(-0.5 * ((t - t[n // 2]) / 100e-12) ** 2) + 0j
    off = 50e9
    sig = DualPolSignal(env, np.zeros_like(env), fs, center_offset=off)
    out = propagate_span(sig, span, StepPlan(steps_per_span=5))
    delay = (np.argmax(np.abs(out.x)) - n // 2) / fs
    expect = -span.beta2 * 2 * np.pi * off * span.length_m
    assert delay == pytest.approx(expect, rel=0.03)


def test_amp_ase_psd_value():
    amp = AmpConfig(gain_db=16.0, noise_figure_db=5.0)
    g = 10 ** 1.6
    n_sp = 10 ** 0.5 * g / (2 * (g - 1))
    expect = (g - 1) * n_sp * PLANCK * REFERENCE_FREQUENCY
    assert amp.ase_psd() == pytest.approx(expect, rel=1e-12)
    assert amp.ase_psd() == pytest.approx(8.067e-18, rel=1e-3)
    assert AmpConfig(gain_db=16.0, include_ase=False).ase_psd() == 0.0
    assert AmpConfig(gain_db=0.0).ase_psd() == 0.0


def test_amplifier_gain_and_noise_statistics():
    amp = AmpConfig(gain_db=16.0, noise_figure_db=5.0)
    n, fs = 200_000, 40e9
    sig = DualPolSignal(np.zeros(n, complex), np.zeros(n, complex), fs)
    out = amplify_with_ase(sig, amp, np.random.default_rng(1))
    var = amp.ase_psd() * fs
    # Per-polarization complex noise variance and circularity.
    for pol in (out.x, out.y):
        assert np.var(pol.real) == pytest.approx(var / 2, rel=0.02)
        assert np.var(pol.imag) == pytest.approx(var / 2, rel=0.02)
        assert abs(np.mean(pol)) < 5 * np.sqrt(var / n)
    # Deterministic given the rng.
    out2 = amplify_with_ase(sig, amp, np.random.default_rng(1))
    np.testing.assert_array_equal(out.x, out2.x)
    # Signal gain is the field gain sqrt(G).
    cw = _cw_signal(1e-3, n=512, fs=fs)
    noiseless = amplify_with_ase(cw, AmpConfig(gain_db=16.0, include_ase=False))
    assert noiseless.power() == pytest.approx(10 ** 1.6 * cw.power(), rel=1e-12)


def test_ase_requires_rng():
    amp = AmpConfig(gain_db=16.0)
    sig = _cw_signal(1e-3)
    with pytest.raises(ConfigurationError):
        amplify_with_ase(sig, amp, None)


def test_link_round_numbers():
    link = Link.uniform(15)
    assert link.n_spans == 15
    assert link.total_length_m == pytest.approx(1.2e6)
    span = FiberSpan()
    assert link.effective_length(0.0, link.total_length_m) == pytest.approx(
        15 * span.effective_length(), rel=1e-12
    )
    # Piecewise integrals respect span boundaries.
    assert link.dispersion_integral(0.0, 1.2e6) == pytest.approx(span.beta2 * 1.2e6)
    got = link.nonlinear_integral(40e3, 120e3)
    expect = span.gamma * (span.effective_length(40e3, 80e3) + span.effective_length(0.0, 40e3))
    assert got == pytest.approx(expect, rel=1e-12)


def test_link_propagation_power_budget(tiny_tx):
    """Gain-matched spans return the launch power on average (no ASE)."""
    from wdmdbp import generate_frame, shape_and_mux

    field = shape_and_mux(generate_frame(tiny_tx), tiny_tx)
    link = Link.uniform(3, FiberSpan(), AmpConfig(gain_db=16.0, include_ase=False))
    out = propagate_link(field, link, StepPlan(steps_per_span=20))
    assert out.power() == pytest.approx(field.power(), rel=1e-9)
    # All-pass + loss/gain balance conserves the spectrum's magnitude profile
    # only statistically; total energy exactly.
    assert out.n_samples == field.n_samples


def test_walk_off_between_channels(tiny_tx):
    """Each channel is delayed by -beta2 * 2 pi * f_ch * L.

    The intra-channel (quadratic) dispersion scrambles the intensity
    waveform, so it is compensated at baseband first; the remaining linear
    phase is exactly the walk-off delay, measured by intensity correlation
    with parabolic peak refinement.
    """
    from wdmdbp import demux_channel, generate_frame, shape_and_mux

    span = FiberSpan(gamma_w_km=0.0, attenuation_db_km=0.0)
    link = Link.uniform(1, span, AmpConfig(gain_db=0.0, include_ase=False))
    frame = generate_frame(tiny_tx)
    field = shape_and_mux(frame, tiny_tx)
    rx = propagate_link(field, link, StepPlan(steps_per_span=10))
    delays = []
    for i in range(tiny_tx.n_channels):
        tx_ch = demux_channel(field, i, tiny_tx, 2 * tiny_tx.symbol_rate)
        rx_ch = demux_channel(rx, i, tiny_tx, 2 * tiny_tx.symbol_rate)
        n = rx_ch.n_samples
        comp = dispersion_response(n, rx_ch.sample_rate, span.beta2, -span.length_m)
        rx_c = apply_spectral_filter(rx_ch, comp)
        corr = 0.0
        for a_w, b_w in ((tx_ch.x, rx_c.x), (tx_ch.y, rx_c.y)):
            a = np.abs(a_w) ** 2
            b = np.abs(b_w) ** 2
            a = a - a.mean()
            b = b - b.mean()
            corr = corr + np.fft.ifft(np.conj(np.fft.fft(a)) * np.fft.fft(b)).real
        lag = int(np.argmax(corr))
        lag = lag - n if lag > n // 2 else lag
        c0, c1, c2 = corr[(lag - 1) % n], corr[lag % n], corr[(lag + 1) % n]
        frac = 0.5 * (c0 - c2) / (c0 - 2 * c1 + c2)
        delays.append((lag + frac) / rx_ch.sample_rate)
    step = -span.beta2 * 2 * np.pi * tiny_tx.effective_grid_spacing * span.length_m
    expected = (np.arange(4) - 1.5) * step
    np.testing.assert_allclose(delays, expected, rtol=1e-3)


def test_link_validation():
    with pytest.raises(ConfigurationError):
        Link(spans=[FiberSpan()], amps=[])
    with pytest.raises(ConfigurationError):
        Link(spans=[], amps=[])

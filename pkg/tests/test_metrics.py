import warnings

import numpy as np
import pytest

from wdmdbp import (
    ConfigurationError,
    MetricsReport,
    QAM64_BITS,
    QAM64_POINTS,
    bits_to_symbols,
    estimate_gmi,
    nmse,
    sweep_launch_power,
)

from oracles import gauss_hermite_gmi, reference_qam64


def _awgn_symbols(rng, n, snr_db):
    bits = rng.integers(0, 2, size=(n, 6)).astype(np.uint8)
    tx = bits_to_symbols(bits)
    sigma = np.sqrt(10 ** (-snr_db / 10) / 2)
    rx = tx + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return rx, bits


def test_reference_constellation_matches_package():
    """The independently-built Gray constellation and the package's one agree
    as labelled sets (same point for every 6-bit label)."""
    pts, bits = reference_qam64()
    by_label = {tuple(b): p for p, b in zip(pts, bits)}
    for p, b in zip(QAM64_POINTS, QAM64_BITS):
        assert by_label[tuple(b)] == pytest.approx(p, abs=1e-12)


def test_gmi_saturates_at_high_snr(rng):
    rx, bits = _awgn_symbols(rng, 4096, 40.0)
    assert estimate_gmi(rx, bits) == pytest.approx(6.0, abs=1e-3)
    # Exactly zero residual short-circuits to the full 6 bits.
    tx = bits_to_symbols(bits)
    assert estimate_gmi(tx, bits) == 6.0


def test_gmi_decreases_with_noise(rng):
    vals = [estimate_gmi(*_awgn_symbols(rng, 8192, snr)) for snr in (18, 14, 10)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] > 2.0


def test_gmi_close_to_quadrature_oracle(rng):
    for snr in (12.0, 16.0):
        rx, bits = _awgn_symbols(rng, 1 << 14, snr)
        expect = gauss_hermite_gmi(QAM64_POINTS, QAM64_BITS, snr)
        assert estimate_gmi(rx, bits) == pytest.approx(expect, abs=0.05)


def test_gmi_validates_shapes(rng):
    rx, bits = _awgn_symbols(rng, 64, 20.0)
    with pytest.raises(ConfigurationError):
        estimate_gmi(rx[:32], bits)
    with pytest.raises(ConfigurationError):
        estimate_gmi(rx, bits[:, :5])


def test_nmse():
    ref = np.array([1.0 + 0j, 1j, -1.0, -1j])
    assert nmse(ref, ref) == -150.0
    noisy = ref + 0.1
    expect = 10 * np.log10(np.mean(np.abs(noisy - ref) ** 2) / np.mean(np.abs(ref) ** 2))
    assert nmse(noisy, ref) == pytest.approx(expect)
    with pytest.raises(ConfigurationError):
        nmse(ref, np.zeros(4, complex))


def test_metrics_report_averaging():
    r = MetricsReport(
        method="ssfm", n_steps=15, power_dbm=1.0, seed=7,
        gmi_per_channel=[10.0, 11.0], nmse_per_channel=[-20.0, -10.0],
    )
    assert r.avg_gmi == pytest.approx(10.5)
    # Linear-domain mean: (1e-2 + 1e-1) / 2 -> -12.6 dB, not -15 dB.
    assert r.avg_nmse_db == pytest.approx(10 * np.log10(0.055))


def test_sweep_marks_interior_peak():
    def fake_point(p):
        return MetricsReport(
            method="ssfm", n_steps=15, power_dbm=p, seed=1,
            gmi_per_channel=[12.0 - (p - 1.0) ** 2], nmse_per_channel=[-20.0],
        )

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        reports = sweep_launch_power(fake_point, [-1.0, 0.0, 1.0, 2.0, 3.0])
    flags = [r.peak_flag for r in reports]
    assert flags == [False, False, True, False, False]


def test_sweep_warns_on_boundary_peak():
    def fake_point(p):
        return MetricsReport(
            method="ssfm", n_steps=15, power_dbm=p, seed=1,
            gmi_per_channel=[p], nmse_per_channel=[-20.0],
        )

    with pytest.warns(RuntimeWarning, match="boundary"):
        sweep_launch_power(fake_point, [0.0, 1.0, 2.0])

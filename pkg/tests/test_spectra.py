import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from engine.correlators import CorrelatorKind, CorrelatorSeries, f_m_series, f_s
from engine.spectra import (
    Peak,
    Spectrum,
    SpectrumKind,
    Window,
    dft,
    match_peaks,
    parseval_ratio,
    peaks,
    sample_series,
    stick_cm,
    stick_cs,
    time_grid,
)
from engine.spinchain import build_hamiltonian, diagonalize
from engine.probe import build_probe
from models import ProbeGeometry, SpinChainSpec


class TestGrid:
    """Tests for time grids and sampling."""

    def test_one_sided(self):
        grid = time_grid(10.0, 11)

        assert_allclose(grid, np.arange(11.0))

    def test_two_sided(self):
        grid = time_grid(10.0, 11, two_sided=True)

        assert grid.size == 21
        assert_allclose(grid, -grid[::-1])

    def test_invalid(self):
        with pytest.raises(ValueError):
            time_grid(10.0, 1)
        with pytest.raises(ValueError):
            time_grid(0.0, 10)


class TestDFT:
    """Tests for the windowed transform."""

    def test_constant_series_peaks_at_zero(self):
        series = sample_series(lambda t: 1.0, 50.0, 501)

        spectrum = dft(series, Window.RECT)

        assert spectrum.omegas[np.argmax(spectrum.amplitudes)] == pytest.approx(0.0, abs=1e-12)
        assert spectrum.kind is SpectrumKind.C_M

    def test_cosine_peak_at_frequency(self):
        series = sample_series(lambda t: math.cos(1.3 * t), 200.0, 2048)

        spectrum = dft(series)
        found = peaks(spectrum)

        assert len(found) == 1
        assert found[0].omega == pytest.approx(1.3, abs=spectrum.resolution)
        assert spectrum.resolution == pytest.approx(2.0 * math.pi / 200.0)

    def test_even_series_has_symmetric_amplitude(self):
        series = sample_series(lambda t: math.cos(0.8 * t) + 0.3 * math.cos(2.1 * t), 60.0, 600)

        spectrum = dft(series)
        middle = spectrum.omegas.size // 2

        assert spectrum.omegas[middle] == pytest.approx(0.0, abs=1e-12)
        assert_allclose(spectrum.amplitudes[middle + 1:], spectrum.amplitudes[middle - 1::-1], atol=1e-8)
        assert np.max(np.abs(spectrum.values.imag)) < 1e-8

    @pytest.mark.parametrize("window", [Window.RECT, Window.HANN])
    def test_parseval(self, window):
        series = sample_series(lambda t: math.cos(0.5 * t) * math.exp(-0.01 * t), 80.0, 401)

        spectrum = dft(series, window)

        assert parseval_ratio(series, spectrum) == pytest.approx(1.0, abs=1e-10)

    def test_non_uniform_grid_rejected(self):
        series = CorrelatorSeries(times=np.array([0.0, 1.0, 3.0]), values=np.ones(3),
                                  kind=CorrelatorKind.F_M)

        with pytest.raises(ValueError, match="uniform"):
            dft(series)

    def test_two_sided_series_used_as_sampled(self):
        times = time_grid(40.0, 401, two_sided=True)
        series = CorrelatorSeries(times=times, values=np.sin(0.9 * times), kind=CorrelatorKind.F_M)

        spectrum = dft(series)

        assert np.max(np.abs(spectrum.values.real)) < 1e-8
        strongest = spectrum.omegas[np.argmax(spectrum.amplitudes)]
        assert abs(abs(strongest) - 0.9) <= spectrum.resolution


class TestSticks:
    """Exact eigenbasis line spectra."""

    def test_two_site_c_m(self, two_site):
        sticks = stick_cm(two_site.decomp, two_site.observable)

        assert len(sticks) == 1
        assert sticks[0].omega == pytest.approx(1.0, abs=1e-12)
        assert sticks[0].weight == pytest.approx(1.0, abs=1e-12)

    def test_two_site_c_s(self, two_site):
        sticks = stick_cs(two_site.decomp, two_site.observable, two_site.state)

        omegas = sorted(round(line.omega, 9) for line in sticks)
        assert omegas == [-1.0, 1.0]
        assert sum(line.weight for line in sticks) == pytest.approx(0.5, abs=1e-12)

    def test_c_s_sum_rule(self, four_site):
        sticks = stick_cs(four_site.decomp, four_site.observable, four_site.state)

        total = sum(complex(line.weight, line.weight_imag) for line in sticks)

        assert total.real == pytest.approx(
            f_s(four_site.state, four_site.decomp, four_site.observable, 0.0), abs=1e-12)
        assert abs(total.imag) < 1e-12

    def test_no_sticks_without_couplings(self):
        spec = SpinChainSpec(n_sites=4, g1=0.0, g2=0.0)
        decomp = diagonalize(build_hamiltonian(spec))

        sticks = stick_cm(decomp, build_probe(ProbeGeometry(n_sites=4)))

        assert all(line.omega <= 1e-9 for line in sticks)

    def test_c_m_sticks_sit_on_gaps(self, ring_ground):
        sticks = stick_cm(ring_ground.decomp, ring_ground.observable)
        gaps = ring_ground.decomp.eigenvalues - ring_ground.decomp.ground_energy

        for line in sticks:
            assert np.min(np.abs(gaps - line.omega)) < 1e-9
        assert sum(line.weight for line in sticks) == pytest.approx(
            f_m_series(ring_ground.state, ring_ground.decomp, ring_ground.observable, [0.0]).values[0],
            abs=1e-10)

    def test_ground_state_f_m_is_sum_of_cosines(self, ring_ground):
        times = np.array([0.0, 0.4, 3.3, 12.9, 41.0])
        sticks = stick_cm(ring_ground.decomp, ring_ground.observable)

        series = f_m_series(ring_ground.state, ring_ground.decomp, ring_ground.observable, times)

        expected = [sum(line.weight * math.cos(line.omega * t) for line in sticks) for t in times]
        assert_allclose(series.values, expected, atol=1e-8)


class TestPeaks:
    """Peak detection and gap matching."""

    def test_empty_spectrum(self):
        empty = Spectrum(omegas=np.zeros(0), amplitudes=np.zeros(0), values=np.zeros(0),
                         kind=SpectrumKind.C_M, window=Window.HANN, resolution=0.1, bin_width=0.1)

        with pytest.raises(ValueError):
            peaks(empty)

    def test_threshold_bounds(self):
        spectrum = dft(sample_series(lambda t: math.cos(t), 50.0, 501))

        with pytest.raises(ValueError):
            peaks(spectrum, rel_threshold=1.5)

    def test_match_report(self):
        detected = [Peak(omega=1.0, amplitude=5.0, index=0), Peak(omega=2.5, amplitude=1.0, index=1)]

        report = match_peaks(detected, gaps=[0.98, 1.7], tol=0.05)

        assert report.matches[0].matched is True
        assert report.matches[0].nearest_gap == pytest.approx(0.98)
        assert report.unmatched == [2.5]
        assert report.matched_fraction == pytest.approx(0.5)
        assert report.all_matched is False

    def test_tolerance_below_resolution(self):
        with pytest.raises(ValueError):
            match_peaks([], gaps=[1.0], tol=0.01, resolution=0.1)

    def test_ring_peaks_match_gaps(self, ring_ground):
        times = time_grid(200.0, 2048)
        series = f_m_series(ring_ground.state, ring_ground.decomp, ring_ground.observable, times)
        spectrum = dft(series)
        gaps = ring_ground.decomp.eigenvalues[1:] - ring_ground.decomp.ground_energy

        report = match_peaks(peaks(spectrum), gaps, tol=spectrum.resolution,
                             resolution=spectrum.resolution)

        assert report.matches
        assert report.all_matched
        sticks = stick_cm(ring_ground.decomp, ring_ground.observable)
        strongest = max(sticks, key=lambda line: line.weight)
        assert min(abs(m.omega - strongest.omega) for m in report.matches) <= spectrum.resolution

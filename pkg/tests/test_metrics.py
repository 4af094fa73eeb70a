"""
Tests for the optomechanical figures of merit.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from omtherm.analysis.dsp import Spectrum, lorentzian
from omtherm.analysis.metrics import (
    CalibrationTone,
    added_noise,
    cooperativities,
    estimate_g0,
    figures_of_merit,
    g0_from_areas,
    gamma_om,
)
from omtherm.core.device import MechanicalMode, OpticalMode
from omtherm.core.thermal import bose_einstein
from omtherm.devices import load_device
from omtherm.exceptions import DomainError

GAMMA_TOTAL = 1.05e6
N_EQ = 95.0


@pytest.fixture
def device():
    return load_device("GaAs_OMC_mK")


class TestRates:
    """Tests for the interaction rate and cooperativities."""

    def test_gamma_om(self, device):
        """4 g0^2 n_cav / κ is about 0.31 MHz."""
        assert gamma_om(device.optical) == pytest.approx(0.31e6, rel=0.02)
        assert gamma_om(device.optical) == pytest.approx(310_960, rel=1e-6)

    def test_cooperativities(self, device):
        """C ≈ 3.7 and C_qu ≈ 3.1e-3."""
        coop, coop_q = cooperativities(
            gamma_om(device.optical), device.mechanical, GAMMA_TOTAL, N_EQ
        )
        assert coop == pytest.approx(3.7, rel=0.03)
        assert coop_q == pytest.approx(3.1e-3, rel=0.05)

    def test_invalid_inputs(self, device):
        """Non-positive rates and occupancies are rejected."""
        with pytest.raises(DomainError):
            cooperativities(-1.0, device.mechanical, GAMMA_TOTAL, N_EQ)
        with pytest.raises(DomainError):
            cooperativities(3e5, device.mechanical, 0.0, N_EQ)
        with pytest.raises(DomainError):
            cooperativities(3e5, device.mechanical, GAMMA_TOTAL, 0.0)

    def test_quantum_cooperativity_identity(self, device):
        """C_qu equals C Γ_m / (Γ n_eq)."""
        rate = gamma_om(device.optical)
        coop, coop_q = cooperativities(rate, device.mechanical, GAMMA_TOTAL, N_EQ)
        expected = coop * device.mechanical.linewidth / (GAMMA_TOTAL * N_EQ)
        assert coop_q == pytest.approx(expected, rel=1e-12)

    def test_intrinsic_bath_at_one_quantum(self, device):
        """With Γ = Γ_m and n_eq = 1 both cooperativities coincide."""
        rate = gamma_om(device.optical)
        coop, coop_q = cooperativities(rate, device.mechanical, device.mechanical.linewidth, 1.0)
        assert coop_q == pytest.approx(coop, rel=1e-12)

    def test_rescaling(self, device):
        """C is linear in Γ_om and inverse in Γ_m."""
        rate = gamma_om(device.optical)
        coop, _ = cooperativities(rate, device.mechanical, GAMMA_TOTAL, N_EQ)
        doubled, _ = cooperativities(2 * rate, device.mechanical, GAMMA_TOTAL, N_EQ)
        assert doubled == pytest.approx(2 * coop, rel=1e-12)
        broader = MechanicalMode(f_m=device.mechanical.f_m, Q_m=device.mechanical.Q_m / 2)
        wide, _ = cooperativities(rate, broader, GAMMA_TOTAL, N_EQ)
        assert wide == pytest.approx(coop / 2, rel=1e-12)

    def test_rate_quadratic_in_coupling(self, device):
        """Doubling g0 quadruples Γ_om."""
        stronger = replace(device.optical, g0=2 * device.optical.g0)
        assert gamma_om(stronger) == pytest.approx(4 * gamma_om(device.optical), rel=1e-12)


class TestAddedNoise:
    """Tests for added_noise and figures_of_merit."""

    def test_sideband_resolved_limit(self):
        """κ << f_m leaves the inverse cooperativity."""
        assert added_noise(2.0, kappa=1.0, f_m=1e12) == pytest.approx(2.0)

    def test_ambient_added_noise(self, device):
        """The ambient bath alone adds about 0.4 quanta."""
        fom = figures_of_merit(device.optical, device.mechanical, GAMMA_TOTAL, N_EQ, n_th=0.7)
        assert fom.n_add_ambient == pytest.approx(0.4, rel=0.1)
        assert fom.n_add_ambient == pytest.approx(0.362, abs=2e-3)

    def test_total_added_noise(self, device):
        """The full chain gives about 251 quanta, the rounded C_qu about 261."""
        fom = figures_of_merit(device.optical, device.mechanical, GAMMA_TOTAL, N_EQ, n_th=0.7)
        assert fom.n_add_total == pytest.approx(251.3, rel=2e-3)
        rounded = added_noise(1.0 / 3e-3, device.optical.kappa, device.mechanical.f_m)
        assert rounded == pytest.approx(261.1, rel=2e-3)

    def test_no_photons(self, device):
        """An empty cavity adds infinite noise."""
        empty = OpticalMode(f_c=193.7e12, kappa=5e9, g0=1.3e6, n_cav=0.0)
        fom = figures_of_merit(empty, device.mechanical, GAMMA_TOTAL, N_EQ, n_th=0.7)
        assert fom.coop == 0.0
        assert math.isinf(fom.n_add_total)
        assert math.isinf(fom.n_add_ambient)

    def test_negative_parameter_rejected(self):
        """Negative inverse cooperativity is invalid."""
        with pytest.raises(DomainError):
            added_noise(-1.0, 5e9, 2.3725e9)

    def test_monotonic_in_inverse_cooperativity(self, device):
        """More inverse cooperativity always means more added noise."""
        values = [
            added_noise(c, device.optical.kappa, device.mechanical.f_m)
            for c in np.geomspace(1e-3, 1e3, 25)
        ]
        assert np.all(np.diff(values) > 0)

    def test_unresolved_sidebands_add_noise(self):
        """Wider cavities push the added noise towards one quantum from below."""
        narrow = added_noise(0.1, kappa=1e6, f_m=2.3725e9)
        wide = added_noise(0.1, kappa=1e11, f_m=2.3725e9)
        assert narrow == pytest.approx(0.1, rel=1e-6)
        assert narrow < wide < 1.0

    def test_report(self, device):
        """Serialized and printable forms carry every quantity."""
        fom = figures_of_merit(device.optical, device.mechanical, GAMMA_TOTAL, N_EQ, n_th=0.7)
        assert set(fom.to_dict()) == {"gamma_om", "coop", "coop_q", "n_add_ambient", "n_add_total"}
        assert "C_qu" in str(fom)


class TestG0Calibration:
    """Tests for the phase-modulation g0 calibration."""

    F_M = 2.3725e9
    TONE = CalibrationTone(f_cal=2.3725e9 + 2e6, phase_mod_depth=0.1)

    def area_ratio(self, g0, n_mech):
        return g0**2 * 4.0 * n_mech / (self.TONE.phase_mod_depth**2 * self.TONE.f_cal**2)

    def test_from_areas(self):
        """The area ratio inverts to g0."""
        ratio = self.area_ratio(1.3e6, 95.0)
        assert g0_from_areas(ratio * 1e-9, 1e-9, self.TONE, 95.0) == pytest.approx(1.3e6)

    def test_from_areas_validation(self):
        """Areas and occupancy must be positive."""
        with pytest.raises(DomainError):
            g0_from_areas(0.0, 1e-9, self.TONE, 95.0)
        with pytest.raises(DomainError):
            g0_from_areas(1e-9, 1e-9, self.TONE, 0.0)
        with pytest.raises(DomainError):
            CalibrationTone(f_cal=0.0, phase_mod_depth=0.1)

    def test_from_spectrum(self):
        """Mechanical line and tone are separated and integrated."""
        df, fwhm, a_cal = 10e3, 167e3, 1e-9
        f = self.F_M + np.arange(-500, 501) * df
        a_mech = self.area_ratio(1.3e6, 95.0) * a_cal
        height = 2.0 * a_mech / (math.pi * fwhm)
        S = lorentzian(f, self.F_M, fwhm, height, 0.01 * height)
        S[np.argmin(np.abs(f - self.TONE.f_cal))] += a_cal / df

        g0 = estimate_g0(Spectrum(f=f, S=S, resolution=df), self.TONE, 95.0, self.F_M)
        assert g0 == pytest.approx(1.3e6, rel=1e-3)

    def test_tone_outside_spectrum(self):
        """The tone must lie on the frequency grid."""
        f = self.F_M + np.arange(-50, 51) * 10e3
        spectrum = Spectrum(f=f, S=np.ones_like(f), resolution=10e3)
        with pytest.raises(DomainError):
            estimate_g0(spectrum, self.TONE, 95.0, self.F_M)

    def test_from_spectrum_at_liquid_helium(self):
        """A 4.2 K spectrum with a tone 2.5 MHz below the mode returns g0."""
        n_mech = float(bose_einstein(4.2, self.F_M))
        assert n_mech == pytest.approx(36.4, abs=0.05)
        tone = CalibrationTone(f_cal=2.37e9, phase_mod_depth=0.1)
        df, fwhm, a_cal = 10e3, 167e3, 1e-9
        f = self.F_M + np.arange(-500, 501) * df
        ratio = 1.3e6**2 * 4.0 * n_mech / (tone.phase_mod_depth**2 * tone.f_cal**2)
        height = 2.0 * ratio * a_cal / (math.pi * fwhm)
        S = lorentzian(f, self.F_M, fwhm, height, 0.01 * height)
        S[np.argmin(np.abs(f - tone.f_cal))] += a_cal / df

        g0 = estimate_g0(Spectrum(f=f, S=S, resolution=df), tone, n_mech, self.F_M)
        assert g0 == pytest.approx(1.3e6, rel=1e-3)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

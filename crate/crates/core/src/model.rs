//! System parameters, drive amplitudes and bath occupations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{AngularFrequency, PhysicalConstants, TWO_PI};

/// Minimum mechanical quality factor for the Markovian Brownian-noise model.
pub const MIN_QUALITY_FACTOR: f64 = 100.0;

/// How the magnon mode is driven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum MagnonDrive {
    /// Microwave drive of power `power` (W) through a bridge of `length` x
    /// `width` (m); the spin number is `spin_density * volume`.
    Physical {
        power: f64,
        length: f64,
        width: f64,
        volume: f64,
    },
    Direct {
        rabi: AngularFrequency,
    },
}

/// How the optical cavity is driven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum CavityDrive {
    /// Laser of power `power` (W) and vacuum wavelength `wavelength` (m).
    Physical {
        power: f64,
        wavelength: f64,
    },
    Direct {
        amplitude: AngularFrequency,
    },
}

/// Optional overrides pinning the magnitudes of the effective couplings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub g_mb_target: Option<AngularFrequency>,
    pub g_bc_target: Option<AngularFrequency>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub magnon: MagnonDrive,
    pub cavity: CavityDrive,
    pub calibration: Calibration,
}

impl DriveSpec {
    pub fn magnon_route(&self) -> &'static str {
        match self.magnon {
            MagnonDrive::Physical { .. } => "physical",
            MagnonDrive::Direct { .. } => "direct",
        }
    }

    pub fn cavity_route(&self) -> &'static str {
        match self.cavity {
            CavityDrive::Physical { .. } => "physical",
            CavityDrive::Direct { .. } => "direct",
        }
    }
}

/// Meaning of the configured magnon and optical detunings.
///
/// With `Effective` the configured `delta_m`, `delta_c` are the detunings
/// seen by the fluctuations, i.e. they already contain the static shift from
/// the mechanical displacement; the bare detunings are reported as
/// `delta - shift`. With `Bare` they are the detunings of the undisplaced
/// system and the displacement is found self-consistently.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningConvention {
    #[default]
    Effective,
    Bare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Microwave cavity resonance.
    pub omega_a: AngularFrequency,
    /// Magnon resonance.
    pub omega_m: AngularFrequency,
    /// Optical cavity resonance; only used for the optical bath occupation.
    pub omega_c: AngularFrequency,
    /// Mechanical resonance.
    pub omega_b: AngularFrequency,
    pub delta_a: AngularFrequency,
    pub delta_m: AngularFrequency,
    pub delta_c: AngularFrequency,
    pub kappa_a: AngularFrequency,
    pub kappa_m: AngularFrequency,
    /// Decay through the input/output mirror.
    pub kappa_1: AngularFrequency,
    /// All other optical losses.
    pub kappa_2: AngularFrequency,
    pub gamma_b: AngularFrequency,
    pub g_ma: AngularFrequency,
    pub g_mb: AngularFrequency,
    pub g_bc: AngularFrequency,
    /// Bath temperature in kelvin.
    pub temperature: f64,
    /// Homodyne phase in radians.
    pub phi: f64,
    pub drive: DriveSpec,
    pub detuning_convention: DetuningConvention,
    pub constants: PhysicalConstants,
}

/// Mean bath occupations of the four modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalOccupations {
    pub n_a: f64,
    pub n_m: f64,
    pub n_c: f64,
    pub n_b: f64,
}

/// Bose-Einstein occupation `1 / (exp(hbar omega / k_B T) - 1)`.
///
/// Returns exactly zero at `T = 0`.
pub fn thermal_occupation(
    omega: AngularFrequency,
    temperature: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let w = omega.rad_per_s();
    if !(w > 0.0) {
        return Err(Error::domain(format!(
            "thermal occupation needs omega > 0, got {w}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::domain(format!(
            "temperature must be >= 0 K, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = constants.hbar * w / (constants.k_b * temperature);
    // expm1 overflows to +inf for optical frequencies, giving exactly 0.
    Ok(1.0 / x.exp_m1())
}

/// Amplitude `sqrt(2 mu_0 P_0 / (l w c))` of the microwave drive field.
///
/// The result is interpreted in tesla when combined with the gyromagnetic
/// ratio in [`rabi_frequency`].
pub fn drive_field_amplitude(
    power: f64,
    length: f64,
    width: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !(power >= 0.0 && power.is_finite()) {
        return Err(Error::domain(format!(
            "drive power must be >= 0, got {power}"
        )));
    }
    if !(length > 0.0 && width > 0.0) {
        return Err(Error::domain(format!(
            "bridge dimensions must be > 0, got l = {length}, w = {width}"
        )));
    }
    Ok((2.0 * constants.mu_0 * power / (length * width * constants.c_light)).sqrt())
}

/// Magnon Rabi frequency `(sqrt 5 / 4) gamma sqrt(N_s) H_d`.
pub fn rabi_frequency(
    field_amplitude: f64,
    spin_number: f64,
    gyromagnetic_ratio: f64,
) -> Result<AngularFrequency> {
    for (name, v) in [
        ("field amplitude", field_amplitude),
        ("spin number", spin_number),
        ("gyromagnetic ratio", gyromagnetic_ratio),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(AngularFrequency::from_rad_per_s(
        5f64.sqrt() / 4.0 * gyromagnetic_ratio * spin_number.sqrt() * field_amplitude,
    ))
}

/// Optical drive amplitude `sqrt(2 kappa_c P_L / (hbar omega_L))` with
/// `omega_L = 2 pi c / lambda_L`.
pub fn cavity_drive_amplitude(
    power: f64,
    wavelength: f64,
    kappa_c: AngularFrequency,
    constants: &PhysicalConstants,
) -> Result<AngularFrequency> {
    if !(power >= 0.0 && power.is_finite()) {
        return Err(Error::domain(format!(
            "laser power must be >= 0, got {power}"
        )));
    }
    if !(wavelength > 0.0) {
        return Err(Error::domain(format!(
            "laser wavelength must be > 0, got {wavelength}"
        )));
    }
    let kc = kappa_c.rad_per_s();
    if !(kc >= 0.0) {
        return Err(Error::domain(format!("kappa_c must be >= 0, got {kc}")));
    }
    let omega_l = laser_frequency(wavelength, constants);
    Ok(AngularFrequency::from_rad_per_s(
        (2.0 * kc * power / (constants.hbar * omega_l.rad_per_s())).sqrt(),
    ))
}

pub fn laser_frequency(wavelength: f64, constants: &PhysicalConstants) -> AngularFrequency {
    AngularFrequency::from_rad_per_s(TWO_PI * constants.c_light / wavelength)
}

pub const REFERENCE_WAVELENGTH: f64 = 1550e-9;

impl SystemParams {
    /// The experimentally motivated reference parameter set.
    ///
    /// Drives use the physical routes (5 mW microwave drive on a
    /// 5 x 3 x 2 um^3 bridge, 0.64 mW laser at 1550 nm).
    pub fn reference() -> Self {
        let constants = PhysicalConstants::CODATA;
        let omega_b = AngularFrequency::from_hz(40e6);
        let delta_c = omega_b;
        SystemParams {
            omega_a: AngularFrequency::from_hz(10e9),
            omega_m: AngularFrequency::from_hz(10e9),
            omega_c: laser_frequency(REFERENCE_WAVELENGTH, &constants) + delta_c,
            omega_b,
            delta_a: 0.1 * omega_b,
            delta_m: 0.1 * omega_b,
            delta_c,
            kappa_a: AngularFrequency::from_hz(5e6),
            kappa_m: AngularFrequency::from_hz(2e6),
            kappa_1: 0.9 * omega_b,
            kappa_2: 0.1 * omega_b,
            gamma_b: AngularFrequency::from_hz(100.0),
            g_ma: AngularFrequency::from_hz(15e6),
            g_mb: AngularFrequency::from_hz(20.0),
            g_bc: AngularFrequency::from_hz(4e3),
            temperature: 0.02,
            phi: 0.3 * std::f64::consts::PI,
            drive: DriveSpec {
                magnon: MagnonDrive::Physical {
                    power: 5e-3,
                    length: 5e-6,
                    width: 3e-6,
                    volume: 5e-6 * 3e-6 * 2e-6,
                },
                cavity: CavityDrive::Physical {
                    power: 0.64e-3,
                    wavelength: REFERENCE_WAVELENGTH,
                },
                calibration: Calibration::default(),
            },
            detuning_convention: DetuningConvention::Effective,
            constants,
        }
    }

    /// Total optical decay `kappa_1 + kappa_2`.
    pub fn kappa_c(&self) -> AngularFrequency {
        self.kappa_1 + self.kappa_2
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_b / self.gamma_b
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        let invalid = |msg: String| Err(Error::InvalidParams(msg));

        let all = [
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_c", self.omega_c),
            ("omega_b", self.omega_b),
            ("delta_a", self.delta_a),
            ("delta_m", self.delta_m),
            ("delta_c", self.delta_c),
            ("kappa_a", self.kappa_a),
            ("kappa_m", self.kappa_m),
            ("kappa_1", self.kappa_1),
            ("kappa_2", self.kappa_2),
            ("gamma_b", self.gamma_b),
            ("g_ma", self.g_ma),
            ("g_mb", self.g_mb),
            ("g_bc", self.g_bc),
        ];
        for (name, v) in all {
            if !v.rad_per_s().is_finite() {
                return invalid(format!("{name} is not finite"));
            }
        }
        for (name, v) in [
            ("omega_a", self.omega_a),
            ("omega_m", self.omega_m),
            ("omega_c", self.omega_c),
            ("omega_b", self.omega_b),
        ] {
            if v.rad_per_s() <= 0.0 {
                return invalid(format!("{name} must be > 0"));
            }
        }
        for (name, v) in [
            ("kappa_a", self.kappa_a),
            ("kappa_m", self.kappa_m),
            ("kappa_1", self.kappa_1),
            ("kappa_2", self.kappa_2),
            ("gamma_b", self.gamma_b),
        ] {
            if v.rad_per_s() < 0.0 {
                return invalid(format!("{name} must be >= 0, got {}", v.rad_per_s()));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return invalid(format!(
                "temperature must be >= 0 K, got {}",
                self.temperature
            ));
        }
        if !self.phi.is_finite() {
            return invalid("phi is not finite".into());
        }
        let q = self.quality_factor();
        if !(q > MIN_QUALITY_FACTOR) {
            return invalid(format!(
                "mechanical quality factor omega_b/gamma_b = {q:.3e} must exceed {MIN_QUALITY_FACTOR}"
            ));
        }

        match self.drive.magnon {
            MagnonDrive::Physical {
                power,
                length,
                width,
                volume,
            } => {
                if !(power > 0.0 && length > 0.0 && width > 0.0 && volume > 0.0) {
                    return invalid("magnon drive power and bridge dimensions must be > 0".into());
                }
            }
            MagnonDrive::Direct { rabi } => {
                if !rabi.rad_per_s().is_finite() {
                    return invalid("magnon Rabi frequency is not finite".into());
                }
            }
        }
        match self.drive.cavity {
            CavityDrive::Physical { power, wavelength } => {
                if !(power > 0.0 && wavelength > 0.0) {
                    return invalid("laser power and wavelength must be > 0".into());
                }
            }
            CavityDrive::Direct { amplitude } => {
                if !amplitude.rad_per_s().is_finite() {
                    return invalid("cavity drive amplitude is not finite".into());
                }
            }
        }
        let cal = self.drive.calibration;
        for (name, t) in [
            ("g_mb_target", cal.g_mb_target),
            ("g_bc_target", cal.g_bc_target),
        ] {
            if let Some(t) = t {
                if !(t.rad_per_s() >= 0.0 && t.rad_per_s().is_finite()) {
                    return invalid(format!("{name} must be >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn thermal_occupations(&self) -> Result<ThermalOccupations> {
        let t = self.temperature;
        let c = &self.constants;
        Ok(ThermalOccupations {
            n_a: thermal_occupation(self.omega_a, t, c)?,
            n_m: thermal_occupation(self.omega_m, t, c)?,
            n_c: thermal_occupation(self.omega_c, t, c)?,
            n_b: thermal_occupation(self.omega_b, t, c)?,
        })
    }

    /// Spin number of the magnet for the physical drive route.
    pub fn spin_number(&self) -> Option<f64> {
        match self.drive.magnon {
            MagnonDrive::Physical { volume, .. } => Some(self.constants.spin_density * volume),
            MagnonDrive::Direct { .. } => None,
        }
    }

    /// Magnon drive amplitude, resolved from whichever route is configured.
    pub fn rabi(&self) -> Result<AngularFrequency> {
        match self.drive.magnon {
            MagnonDrive::Physical {
                power,
                length,
                width,
                volume,
            } => {
                let field = drive_field_amplitude(power, length, width, &self.constants)?;
                rabi_frequency(
                    field,
                    self.constants.spin_density * volume,
                    self.constants.gyromagnetic_ratio,
                )
            }
            MagnonDrive::Direct { rabi } => Ok(rabi),
        }
    }

    /// Optical drive amplitude, resolved from whichever route is configured.
    pub fn cavity_drive(&self) -> Result<AngularFrequency> {
        match self.drive.cavity {
            CavityDrive::Physical { power, wavelength } => {
                cavity_drive_amplitude(power, wavelength, self.kappa_c(), &self.constants)
            }
            CavityDrive::Direct { amplitude } => Ok(amplitude),
        }
    }

    /// Same parameters with both drives replaced by their resolved direct values.
    pub fn with_direct_drives(&self) -> Result<Self> {
        let mut out = self.clone();
        out.drive.magnon = MagnonDrive::Direct { rabi: self.rabi()? };
        out.drive.cavity = CavityDrive::Direct {
            amplitude: self.cavity_drive()?,
        };
        Ok(out)
    }

    /// Sets `kappa_c` while keeping `kappa_2` fixed.
    pub fn set_kappa_c_fixed_loss(&mut self, kappa_c: AngularFrequency) -> Result<()> {
        let k1 = kappa_c - self.kappa_2;
        if k1.rad_per_s() < 0.0 {
            return Err(Error::InvalidParams(format!(
                "kappa_c = {kappa_c} is below the fixed kappa_2 = {}",
                self.kappa_2
            )));
        }
        self.kappa_1 = k1;
        Ok(())
    }

    /// Sets `kappa_c` while keeping the ratio `kappa_1 / kappa_c` fixed.
    pub fn set_kappa_c_fixed_split(&mut self, kappa_c: AngularFrequency) -> Result<()> {
        let old = self.kappa_c();
        if !(old.rad_per_s() > 0.0) {
            return Err(Error::InvalidParams(
                "cannot rescale kappa_c from zero at fixed split".into(),
            ));
        }
        let r = self.kappa_1 / old;
        self.kappa_1 = r * kappa_c;
        self.kappa_2 = (1.0 - r) * kappa_c;
        Ok(())
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::reference()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C: PhysicalConstants = PhysicalConstants::CODATA;

    #[test]
    fn zero_temperature_is_vacuum() {
        let n = thermal_occupation(AngularFrequency::from_hz(1e3), 0.0, &C).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn occupation_one_at_ln2() {
        let t = 0.5;
        let w = AngularFrequency::from_rad_per_s(2f64.ln() * C.k_b * t / C.hbar);
        let n = thermal_occupation(w, t, &C).unwrap();
        assert!((n - 1.0).abs() < 1e-12, "{n}");
    }

    #[test]
    fn mechanical_occupation_at_20_mk() {
        // Frozen from a direct evaluation of the Bose formula:
        // x = hbar 2pi 40e6 / (k_B 0.02) = 0.0959849, N = 1/expm1(x).
        let n = thermal_occupation(AngularFrequency::from_hz(40e6), 0.02, &C).unwrap();
        assert!((n - 9.926_307).abs() < 1e-5, "{n}");
    }

    #[test]
    fn occupation_rejects_nonpositive_frequency() {
        assert!(thermal_occupation(AngularFrequency::ZERO, 1.0, &C).is_err());
        assert!(thermal_occupation(AngularFrequency::from_hz(-1.0), 1.0, &C).is_err());
    }

    #[test]
    fn microwave_occupation_at_20_mk() {
        let n = thermal_occupation(AngularFrequency::from_hz(10e9), 0.02, &C).unwrap();
        assert!((n - 3.7894e-11).abs() < 1e-14, "{n}");
    }

    #[test]
    fn optical_occupation_underflows_to_zero() {
        let p = SystemParams::reference();
        let n = thermal_occupation(p.omega_c, 1.0, &C).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn drive_field_examples() {
        let h = drive_field_amplitude(5e-3, 5e-6, 3e-6, &C).unwrap();
        assert!((h - 1.6717e-3).abs() < 1e-6, "{h}");
        let h4 = drive_field_amplitude(20e-3, 5e-6, 3e-6, &C).unwrap();
        assert!((h4 / h - 2.0).abs() < 1e-14);
        assert_eq!(drive_field_amplitude(0.0, 5e-6, 3e-6, &C).unwrap(), 0.0);
        assert!(drive_field_amplitude(1e-3, 0.0, 3e-6, &C).is_err());
        assert!(drive_field_amplitude(-1e-3, 1e-6, 3e-6, &C).is_err());
    }

    #[test]
    fn rabi_scaling() {
        assert_eq!(
            rabi_frequency(0.0, 1e11, C.gyromagnetic_ratio).unwrap(),
            AngularFrequency::ZERO
        );
        let a = rabi_frequency(1e-3, 1e11, C.gyromagnetic_ratio).unwrap();
        let b = rabi_frequency(1e-3, 4e11, C.gyromagnetic_ratio).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
        assert!(rabi_frequency(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn reference_rabi_frequency_is_finite_and_positive() {
        let p = SystemParams::reference();
        let n_s = p.spin_number().unwrap();
        assert!((n_s - 4.22e27 * 3e-17).abs() / n_s < 1e-12);
        let rabi = p.rabi().unwrap().rad_per_s();
        // Depends on the literature constants only; sanity bounds.
        assert!(rabi > 1e13 && rabi < 1e14, "{rabi}");
    }

    #[test]
    fn cavity_drive_examples() {
        let kc = AngularFrequency::from_hz(40e6);
        let e = cavity_drive_amplitude(0.64e-3, 1550e-9, kc, &C).unwrap();
        assert!((e.rad_per_s() - 1.5844e12).abs() / 1.5844e12 < 1e-3, "{e}");
        assert_eq!(
            cavity_drive_amplitude(0.0, 1550e-9, kc, &C).unwrap(),
            AngularFrequency::ZERO
        );
        let e4 = cavity_drive_amplitude(0.64e-3, 1550e-9, 4.0 * kc, &C).unwrap();
        assert!((e4 / e - 2.0).abs() < 1e-14);
        assert!(cavity_drive_amplitude(1e-3, 0.0, kc, &C).is_err());
    }

    #[test]
    fn reference_values() {
        let p = SystemParams::reference();
        assert_eq!(p.g_ma, AngularFrequency::from_hz(15e6));
        assert!((p.kappa_c() / p.omega_b - 1.0).abs() < 1e-15);
        assert_eq!(p.temperature, 0.02);
        assert!((p.quality_factor() - 4e5).abs() < 1e-6);
        p.validate().unwrap();
    }

    #[test]
    fn validation_rejects_low_q_and_negative_decay() {
        let mut p = SystemParams::reference();
        p.gamma_b = 0.02 * p.omega_b;
        assert!(p.validate().is_err());
        let mut p = SystemParams::reference();
        p.kappa_m = AngularFrequency::from_hz(-1.0);
        assert!(p.validate().is_err());
        let mut p = SystemParams::reference();
        p.temperature = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn kappa_c_setters() {
        let mut p = SystemParams::reference();
        p.set_kappa_c_fixed_loss(0.5 * p.omega_b).unwrap();
        assert!((p.kappa_1 / p.omega_b - 0.4).abs() < 1e-15);
        assert!(p.set_kappa_c_fixed_loss(0.05 * p.omega_b).is_err());

        let mut p = SystemParams::reference();
        p.set_kappa_c_fixed_split(0.2 * p.omega_b).unwrap();
        assert!((p.kappa_1 / p.omega_b - 0.18).abs() < 1e-15);
        assert!((p.kappa_2 / p.omega_b - 0.02).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn detailed_balance(log_w in 3.0f64..14.0, log_t in -3.0f64..2.0) {
            let w = AngularFrequency::from_rad_per_s(10f64.powf(log_w));
            let t = 10f64.powf(log_t);
            let n = thermal_occupation(w, t, &C).unwrap();
            let x = C.hbar * w.rad_per_s() / (C.k_b * t);
            prop_assume!(x < 600.0 && n > 0.0);
            let lhs = n + 1.0;
            let rhs = x.exp() * n;
            prop_assert!(((lhs - rhs) / lhs).abs() < 1e-12);
        }

        #[test]
        fn occupation_monotone_in_temperature(log_w in 6.0f64..11.0, t in 1e-3f64..5.0, dt in 1e-4f64..1.0) {
            let w = AngularFrequency::from_rad_per_s(10f64.powf(log_w));
            let a = thermal_occupation(w, t, &C).unwrap();
            let b = thermal_occupation(w, t + dt, &C).unwrap();
            prop_assert!(b >= a);
        }
    }
}

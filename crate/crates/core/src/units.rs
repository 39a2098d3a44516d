//! Physical constants and frequency units.
//!
//! Every rate in the model (frequencies, detunings, decays, couplings, drive
//! amplitudes) is carried as an [`AngularFrequency`] in rad/s. Configuration
//! files speak Hz (or multiples of the mechanical frequency); the conversion
//! to rad/s happens exactly once, at the boundary.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Constants used by the drive and thermal formulas.
///
/// `gyromagnetic_ratio` and `spin_density` are literature values for YIG that
/// only enter the physical magnon-drive route. They are recorded in the
/// metadata of every output file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Vacuum permeability, T m/A.
    pub mu_0: f64,
    /// Speed of light, m/s.
    pub c_light: f64,
    /// Electron gyromagnetic ratio, rad s^-1 T^-1.
    pub gyromagnetic_ratio: f64,
    /// Spin density of the magnet, spins/m^3.
    pub spin_density: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: 1.054_571_817e-34,
        k_b: 1.380_649e-23,
        mu_0: 4.0e-7 * PI,
        c_light: 299_792_458.0,
        gyromagnetic_ratio: TWO_PI * 28.0e9,
        spin_density: 4.22e27,
    };

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("hbar", self.hbar),
            ("k_b", self.k_b),
            ("mu_0", self.mu_0),
            ("c_light", self.c_light),
            ("gyromagnetic_ratio", self.gyromagnetic_ratio),
            ("spin_density", self.spin_density),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "constant {name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// An angular frequency (or rate) in rad/s.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngularFrequency(f64);

impl AngularFrequency {
    pub const ZERO: AngularFrequency = AngularFrequency(0.0);

    pub const fn from_rad_per_s(value: f64) -> Self {
        AngularFrequency(value)
    }

    /// Converts an ordinary frequency `f` (Hz) to `2 pi f`.
    pub fn from_hz(hz: f64) -> Self {
        AngularFrequency(TWO_PI * hz)
    }

    pub const fn rad_per_s(self) -> f64 {
        self.0
    }

    pub fn hz(self) -> f64 {
        self.0 / TWO_PI
    }

    pub fn abs(self) -> Self {
        AngularFrequency(self.0.abs())
    }

    /// `self / omega_b`, the dimensionless units the figures are drawn in.
    pub fn in_units_of(self, omega_b: AngularFrequency) -> Result<f64> {
        to_omega_b_units(self, omega_b)
    }
}

impl fmt::Display for AngularFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2pi x {:.6e} Hz", self.hz())
    }
}

impl Add for AngularFrequency {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        AngularFrequency(self.0 + rhs.0)
    }
}

impl Sub for AngularFrequency {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        AngularFrequency(self.0 - rhs.0)
    }
}

impl Neg for AngularFrequency {
    type Output = Self;
    fn neg(self) -> Self {
        AngularFrequency(-self.0)
    }
}

impl Mul<f64> for AngularFrequency {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        AngularFrequency(self.0 * rhs)
    }
}

impl Mul<AngularFrequency> for f64 {
    type Output = AngularFrequency;
    fn mul(self, rhs: AngularFrequency) -> AngularFrequency {
        AngularFrequency(self * rhs.0)
    }
}

impl Div for AngularFrequency {
    type Output = f64;
    fn div(self, rhs: Self) -> f64 {
        self.0 / rhs.0
    }
}

/// Expresses `x` in units of the mechanical frequency.
pub fn to_omega_b_units(x: AngularFrequency, omega_b: AngularFrequency) -> Result<f64> {
    if !(omega_b.0 > 0.0) {
        return Err(Error::domain(format!(
            "omega_b must be > 0 to normalize, got {}",
            omega_b.0
        )));
    }
    Ok(x.0 / omega_b.0)
}

//! Output-field quadrature spectrum.
//!
//! In the frequency domain `u(w) = T(w) n(w)` with `T(w) = (-i w - A)^-1 M`.
//! The output field is `c_out = sqrt(kappa_1) dc - c1_in`, its quadrature at
//! homodyne phase `phi` is
//! `W(w) = [e^{-i phi} c_out(w) + e^{i phi} c_out+(w)] / sqrt 2 = v(w) . n(w)`,
//! and the symmetrized spectral density is
//! `S(w) = v(w) C_sym v(-w)^T`. Shot noise is `S = 1/2`.
//!
//! `c_out+(w)` denotes the Fourier transform of the operator `c_out+(t)`, so
//! it is read off the `dc+` row of `T` at the same argument `w`.

pub mod covariance;

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::dynamics::{
    build_drift_matrix_in, build_noise_model_in, DriftMatrix, NoiseModel, CH_C1, IDX_C,
};
use crate::error::{Error, Result};
use crate::linalg::{c, lu_solve_with_condition, Mat8, Mat8x9, Mat9, Row9, C64, I, MAX_CONDITION};
use crate::model::SystemParams;
use crate::steady_state::SteadyState;
use crate::units::AngularFrequency;

pub use covariance::{
    intracavity_variance_by_integration, lyapunov_covariance, quadrature_variance,
    IntegratedVariance,
};

/// Shot-noise level of the symmetrized quadrature spectrum.
pub const SHOT_NOISE: f64 = 0.5;
/// Largest imaginary residue tolerated before discarding it.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;
/// Most negative value tolerated before reporting an inconsistency.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;
/// Points within this distance of shot noise are not counted as squeezed,
/// so roundoff on a flat vacuum spectrum does not produce a band.
pub const BAND_TOLERANCE: f64 = 1e-12;

const BAND_LEVEL: f64 = SHOT_NOISE - BAND_TOLERANCE;

/// `(-i w - A)^-1 M` at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    /// Frequency in the unit of the drift matrix.
    pub omega: f64,
    pub entries: Mat8x9,
    pub condition: f64,
}

impl TransferMatrix {
    pub fn row(&self, i: usize) -> Row9 {
        self.entries.row(i).into_owned()
    }
}

/// Row vector `v` with `W(w) = v(w) . n(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureCoefficients {
    pub omega: f64,
    pub v: Row9,
}

/// Both algebraic forms of the spectral density at one frequency, before the
/// imaginary residue is discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityForms {
    /// `v(w) C_sym v(-w)^T`.
    pub symmetrized: C64,
    /// `[v(w) C v(-w)^T + v(-w) C v(w)^T] / 2` with the ordered correlations.
    pub ordered: C64,
}

/// Sampled spectrum with its minimum and squeezing band.
///
/// Frequencies are in units of `omega_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub omega_b: AngularFrequency,
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub s_min: f64,
    pub omega_at_min: f64,
    /// Edges of the contiguous `S < 1/2` region around the minimum, refined by
    /// linear interpolation of the crossings.
    pub band: Option<(f64, f64)>,
    pub bandwidth: f64,
}

impl SpectrumResult {
    pub fn bandwidth_angular(&self) -> AngularFrequency {
        self.bandwidth * self.omega_b
    }

    pub fn s_min_db(&self) -> Result<f64> {
        to_decibels(self.s_min)
    }
}

/// Solves `(-i w - A) T = M` with one factorization shared by all columns.
pub fn transfer_matrix(a: &DriftMatrix, m: &Mat8x9, omega: f64) -> Result<TransferMatrix> {
    let lhs = Mat8::identity() * (-I * omega) - a.entries;
    match lu_solve_with_condition(&lhs, m) {
        Some((entries, condition)) if condition <= MAX_CONDITION => Ok(TransferMatrix {
            omega,
            entries,
            condition,
        }),
        Some((_, condition)) => Err(Error::SingularSystem { omega, condition }),
        None => Err(Error::SingularSystem {
            omega,
            condition: f64::INFINITY,
        }),
    }
}

/// Output quadrature coefficients from the transfer matrix at `w`.
/// `kappa_1` is in the unit of the transfer matrix.
pub fn quadrature_coefficients(
    t: &TransferMatrix,
    phi: f64,
    kappa_1: f64,
) -> QuadratureCoefficients {
    let root = kappa_1.sqrt();
    let mut out = t.row(IDX_C) * c(root, 0.0);
    out[CH_C1] -= c(1.0, 0.0);
    let mut out_dag = t.row(IDX_C + 1) * c(root, 0.0);
    out_dag[CH_C1 + 1] -= c(1.0, 0.0);
    let rot = C64::from_polar(1.0, -phi);
    let v = (out * rot + out_dag * rot.conj()) * c(FRAC_1_SQRT_2, 0.0);
    QuadratureCoefficients { omega: t.omega, v }
}

fn bilinear(x: &Row9, corr: &Mat9, y: &Row9) -> C64 {
    let mut acc = C64::default();
    for i in 0..9 {
        if x[i] == C64::default() {
            continue;
        }
        for j in 0..9 {
            let cij = corr[(i, j)];
            if cij != 0.0 {
                acc += x[i] * y[j] * cij;
            }
        }
    }
    acc
}

/// Everything needed to evaluate spectra for one resolved parameter set.
#[derive(Debug, Clone)]
pub struct SpectrumEngine {
    pub drift: DriftMatrix,
    pub noise: NoiseModel,
    /// `kappa_1` in the engine's unit.
    pub kappa_1: f64,
    pub phi: f64,
}

impl SpectrumEngine {
    /// Engine in units of `omega_b`.
    pub fn new(params: &SystemParams, ss: &SteadyState) -> Result<Self> {
        Self::new_in(params, ss, params.omega_b)
    }

    pub fn new_in(params: &SystemParams, ss: &SteadyState, unit: AngularFrequency) -> Result<Self> {
        Ok(SpectrumEngine {
            drift: build_drift_matrix_in(params, ss, unit),
            noise: build_noise_model_in(params, unit)?,
            kappa_1: params.kappa_1 / unit,
            phi: params.phi,
        })
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        SpectrumEngine {
            phi,
            ..self.clone()
        }
    }

    pub fn unit(&self) -> AngularFrequency {
        self.drift.unit
    }

    pub fn transfer(&self, omega: f64) -> Result<TransferMatrix> {
        transfer_matrix(&self.drift, &self.noise.injection, omega)
    }

    pub fn coefficients(&self, omega: f64) -> Result<QuadratureCoefficients> {
        Ok(quadrature_coefficients(
            &self.transfer(omega)?,
            self.phi,
            self.kappa_1,
        ))
    }

    pub fn density_forms(&self, omega: f64) -> Result<DensityForms> {
        let pos = self.coefficients(omega)?.v;
        let neg = self.coefficients(-omega)?.v;
        let symmetrized = bilinear(&pos, &self.noise.correlations, &neg);
        let ordered = (bilinear(&pos, &self.noise.ordered_correlations, &neg)
            + bilinear(&neg, &self.noise.ordered_correlations, &pos))
            * 0.5;
        Ok(DensityForms {
            symmetrized,
            ordered,
        })
    }

    /// Symmetrized output spectral density at `omega` (engine unit).
    pub fn density(&self, omega: f64) -> Result<f64> {
        let pos = self.coefficients(omega)?.v;
        let neg = self.coefficients(-omega)?.v;
        real_density(bilinear(&pos, &self.noise.correlations, &neg), omega)
    }

    /// Evaluates the spectrum on a strictly increasing grid given in the
    /// engine's unit.
    pub fn curve(&self, grid: &[f64]) -> Result<SpectrumResult> {
        if grid.is_empty() {
            return Err(Error::domain("spectrum grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("spectrum grid must be strictly increasing"));
        }
        let values = grid
            .iter()
            .enumerate()
            .map(|(index, &w)| {
                self.density(w).map_err(|e| Error::AtGridPoint {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(summarize(grid.to_vec(), values, self.unit()))
    }
}

fn real_density(z: C64, omega: f64) -> Result<f64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Consistency(format!(
            "non-finite spectrum at omega = {omega}"
        )));
    }
    if z.im.abs() > IMAGINARY_TOLERANCE * z.re.abs().max(1.0) {
        return Err(Error::Consistency(format!(
            "spectrum has imaginary part {:.3e} at omega = {omega}",
            z.im
        )));
    }
    if z.re < -NEGATIVE_TOLERANCE {
        return Err(Error::Consistency(format!(
            "negative spectrum {:.3e} at omega = {omega}",
            z.re
        )));
    }
    Ok(z.re.max(0.0))
}

/// Extracts minimum, band and bandwidth from a sampled curve.
pub fn summarize(omegas: Vec<f64>, values: Vec<f64>, omega_b: AngularFrequency) -> SpectrumResult {
    let (i_min, &s_min) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty curve");
    let band = squeezing_band(&omegas, &values, i_min);
    SpectrumResult {
        omega_b,
        omega_at_min: omegas[i_min],
        s_min,
        bandwidth: band.map_or(0.0, |(lo, hi)| hi - lo),
        band,
        omegas,
        values,
    }
}

fn squeezing_band(omegas: &[f64], values: &[f64], i_min: usize) -> Option<(f64, f64)> {
    if values[i_min] >= BAND_LEVEL {
        return None;
    }
    let mut lo = i_min;
    while lo > 0 && values[lo - 1] < BAND_LEVEL {
        lo -= 1;
    }
    let mut hi = i_min;
    while hi + 1 < values.len() && values[hi + 1] < BAND_LEVEL {
        hi += 1;
    }
    let crossing = |i: usize, j: usize| {
        let (w0, s0, w1, s1) = (omegas[i], values[i], omegas[j], values[j]);
        w0 + (SHOT_NOISE - s0) * (w1 - w0) / (s1 - s0)
    };
    let lo_edge = if lo > 0 {
        crossing(lo - 1, lo)
    } else {
        omegas[0]
    };
    let hi_edge = if hi + 1 < values.len() {
        crossing(hi, hi + 1)
    } else {
        omegas[hi]
    };
    Some((lo_edge, hi_edge))
}

/// `S` at an angular frequency, for an already solved steady state.
pub fn noise_spectral_density(
    params: &SystemParams,
    ss: &SteadyState,
    omega: AngularFrequency,
    phi: f64,
) -> Result<f64> {
    let engine = SpectrumEngine::new(params, ss)?.with_phi(phi);
    engine.density(omega / params.omega_b)
}

/// `S` sampled on a grid of angular frequencies.
pub fn spectrum_curve(
    params: &SystemParams,
    ss: &SteadyState,
    grid: &[AngularFrequency],
    phi: f64,
) -> Result<SpectrumResult> {
    let engine = SpectrumEngine::new(params, ss)?.with_phi(phi);
    let normalized: Vec<f64> = grid.iter().map(|&w| w / params.omega_b).collect();
    engine.curve(&normalized)
}

/// Uniform grid of `points` values from `min` to `max` inclusive.
pub fn uniform_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        n => (0..n)
            .map(|k| {
                if k == n - 1 {
                    max
                } else {
                    min + (max - min) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Default spectrum grid: 2000 points over `[0.01, 1.5] omega_b`.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(0.01, 1.5, 2000)
}

/// `10 log10(s / (1/2))`; negative values mean squeezing.
pub fn to_decibels(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!(
            "decibel conversion needs s > 0, got {s}"
        )));
    }
    Ok(10.0 * (s / SHOT_NOISE).log10())
}

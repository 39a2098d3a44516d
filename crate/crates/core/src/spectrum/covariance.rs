//! Stationary second moments, used as an independent check of the spectra.
//!
//! The symmetrized moment matrix `V_ij = <{u_i, u_j}>/2` of a stable system
//! solves `A V + V A^T + M C_sym M^T = 0` (plain transpose: `V` pairs `u` with
//! `u`, not with `u+`). Integrating the intracavity quadrature spectrum over
//! all frequencies must reproduce the corresponding entry of `V`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::dynamics::{stability_analysis, DriftMatrix, IDX_C};
use crate::error::{Error, Result};
use crate::linalg::{c, solve_lyapunov, Mat8, Mat8x9, Mat9, Row9, C64};

use super::SpectrumEngine;

/// Solves for the stationary symmetrized moment matrix.
pub fn lyapunov_covariance(a: &DriftMatrix, m: &Mat8x9, c_sym: &Mat9) -> Result<Mat8> {
    let st = stability_analysis(a)?;
    if !st.stable {
        return Err(Error::Lyapunov(format!(
            "drift matrix is not Hurwitz (margin {:.3e})",
            st.margin
        )));
    }
    let c_complex = c_sym.map(|x| c(x, 0.0));
    let d = m * c_complex * m.transpose();
    solve_lyapunov(&a.entries, &d)
}

/// Variance of the intracavity optical quadrature
/// `(e^{-i phi} dc + e^{i phi} dc+)/sqrt 2` from the moment matrix.
pub fn quadrature_variance(v: &Mat8, phi: f64) -> C64 {
    let w = quadrature_selector(phi);
    let mut acc = C64::default();
    for (i, wi) in w {
        for (j, wj) in w {
            acc += wi * v[(i, j)] * wj;
        }
    }
    acc
}

fn quadrature_selector(phi: f64) -> [(usize, C64); 2] {
    let rot = C64::from_polar(FRAC_1_SQRT_2, -phi);
    [(IDX_C, rot), (IDX_C + 1, rot.conj())]
}

impl SpectrumEngine {
    /// Symmetrized spectrum of the intracavity quadrature at the engine's
    /// phase. Integrates to the quadrature variance: `(1/2pi) int S dw`.
    pub fn intracavity_density(&self, omega: f64) -> Result<f64> {
        let sel = quadrature_selector(self.phi);
        let row = |w: f64| -> Result<Row9> {
            let t = self.transfer(w)?;
            Ok(t.row(sel[0].0) * sel[0].1 + t.row(sel[1].0) * sel[1].1)
        };
        let pos = row(omega)?;
        let neg = row(-omega)?;
        let mut acc = C64::default();
        for i in 0..9 {
            for j in 0..9 {
                let cij = self.noise.correlations[(i, j)];
                if cij != 0.0 {
                    acc += pos[i] * neg[j] * cij;
                }
            }
        }
        Ok(acc.re)
    }
}

/// Result of integrating the intracavity spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedVariance {
    /// Truncated integral plus tail estimate.
    pub value: f64,
    /// `(1/2pi) int_{-cutoff}^{cutoff} S dw`.
    pub truncated: f64,
    /// Asymptotic `K / w^2` estimate of both tails beyond the cutoff.
    pub tail: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

/// `(1/2pi) int S_intra(w) dw` by adaptive Simpson quadrature over
/// `|w| <= cutoff` (engine unit), plus an asymptotic estimate of the tails.
///
/// Panel boundaries include the resonance frequencies `|Im lambda|` of the
/// drift matrix so narrow peaks are never straddled by the first sampling.
pub fn intracavity_variance_by_integration(
    engine: &SpectrumEngine,
    cutoff: f64,
    tolerance: f64,
) -> Result<IntegratedVariance> {
    let st = stability_analysis(&engine.drift)?;
    let mut points = vec![-cutoff, 0.0, cutoff];
    for z in &st.eigenvalues {
        let w = z.im.abs();
        if w < cutoff {
            points.push(w);
            points.push(-w);
        }
    }
    let coarse = (cutoff / 0.25).ceil() as usize;
    for k in 1..coarse {
        let w = cutoff * k as f64 / coarse as f64;
        if w <= 5.0 || k % 10 == 0 {
            points.push(w);
            points.push(-w);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut evaluations = 0usize;
    let mut f = |w: f64| -> Result<f64> {
        evaluations += 1;
        engine.intracavity_density(w)
    };

    let total_width = 2.0 * cutoff;
    let mut integral = 0.0;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let fa = f(a)?;
        let fm = f(0.5 * (a + b))?;
        let fb = f(b)?;
        let panel_tol = tolerance * (b - a) / total_width;
        integral += adaptive_simpson(&mut f, a, b, fa, fm, fb, panel_tol, MAX_DEPTH)?;
    }
    let truncated = integral / (2.0 * PI);

    let k_pos = cutoff * cutoff * f(cutoff)?;
    let k_neg = cutoff * cutoff * f(-cutoff)?;
    let tail = (k_pos + k_neg) / cutoff / (2.0 * PI);

    Ok(IntegratedVariance {
        value: truncated + tail,
        truncated,
        tail,
        evaluations,
    })
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let flm = f(0.5 * (a + m))?;
    let frm = f(0.5 * (m + b))?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(
        adaptive_simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)?
            + adaptive_simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)?,
    )
}

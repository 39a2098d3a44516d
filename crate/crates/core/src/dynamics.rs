//! Linearized fluctuation dynamics `du/dt = A u + M n`.
//!
//! The fluctuation vector is `u = (da, da+, dm, dm+, dc, dc+, dq, dp)` and the
//! noise vector holds nine independent channels
//! `n = (a_in, a_in+, m_in, m_in+, c1_in, c1_in+, c2_in, c2_in+, xi)`.
//!
//! All matrices are expressed in a frequency unit (rates divided by it);
//! the default unit is the mechanical frequency. Spectra are invariant under
//! the choice of unit.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{self, c, Mat8, Mat8x9, Mat9, C64, DIM, I};
use crate::model::{SystemParams, ThermalOccupations};
use crate::steady_state::SteadyState;
use crate::units::AngularFrequency;

pub const IDX_A: usize = 0;
pub const IDX_M: usize = 2;
pub const IDX_C: usize = 4;
pub const IDX_Q: usize = 6;
pub const IDX_P: usize = 7;

pub const CH_A: usize = 0;
pub const CH_M: usize = 2;
pub const CH_C1: usize = 4;
pub const CH_C2: usize = 6;
pub const CH_XI: usize = 8;

/// Partner of a fluctuation index under hermitian conjugation (`o <-> o+`;
/// `q` and `p` are self-adjoint).
pub const fn conjugate_index(i: usize) -> usize {
    if i < IDX_Q {
        i ^ 1
    } else {
        i
    }
}

/// Partner of a noise channel under hermitian conjugation.
pub const fn conjugate_channel(k: usize) -> usize {
    if k < CH_XI {
        k ^ 1
    } else {
        k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub entries: Mat8,
    /// Frequency unit the entries are expressed in.
    pub unit: AngularFrequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Injection map from the nine noise channels into the eight equations.
    pub injection: Mat8x9,
    /// Symmetrized channel correlations: coefficient of the delta function in
    /// `<{n_i(t), n_j(t')}>/2`.
    pub correlations: Mat9,
    /// Non-symmetrized correlations `<n_i(t) n_j(t')>`; the mechanical entry
    /// uses the symmetrized (Markovian) value.
    pub ordered_correlations: Mat9,
    pub occupations: ThermalOccupations,
    pub unit: AngularFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    /// Largest real part of the eigenvalues, in the matrix's unit.
    pub margin: f64,
    #[serde(serialize_with = "serialize_complex_list")]
    pub eigenvalues: Vec<C64>,
}

fn serialize_complex_list<S: serde::Serializer>(
    v: &[C64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    #[derive(Serialize)]
    struct Z {
        re: f64,
        im: f64,
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&Z { re: z.re, im: z.im })?;
    }
    seq.end()
}

/// Drift matrix in units of `omega_b`.
pub fn build_drift_matrix(params: &SystemParams, ss: &SteadyState) -> DriftMatrix {
    build_drift_matrix_in(params, ss, params.omega_b)
}

/// Drift matrix with every rate divided by `unit`.
pub fn build_drift_matrix_in(
    params: &SystemParams,
    ss: &SteadyState,
    unit: AngularFrequency,
) -> DriftMatrix {
    let u = unit.rad_per_s();
    let r = |x: AngularFrequency| x.rad_per_s() / u;
    let g_mb = ss.g_mb / u;
    let g_bc = ss.g_bc / u;
    let g_ma = r(params.g_ma);

    let mut a = Mat8::zeros();
    // da
    a[(IDX_A, IDX_A)] = c(-r(params.kappa_a) / 2.0, -r(params.delta_a));
    a[(IDX_A, IDX_M)] = -I * g_ma;
    // dm
    a[(IDX_M, IDX_M)] = c(-r(params.kappa_m) / 2.0, -r(ss.delta_m_eff));
    a[(IDX_M, IDX_A)] = -I * g_ma;
    a[(IDX_M, IDX_Q)] = -I * g_mb;
    // dc
    a[(IDX_C, IDX_C)] = c(-r(params.kappa_c()) / 2.0, -r(ss.delta_c_eff));
    a[(IDX_C, IDX_Q)] = I * g_bc;
    // conjugate rows
    for row in [IDX_A, IDX_M, IDX_C] {
        for col in 0..DIM {
            a[(row + 1, conjugate_index(col))] = a[(row, col)].conj();
        }
    }
    // dq, dp
    a[(IDX_Q, IDX_P)] = c(r(params.omega_b), 0.0);
    a[(IDX_P, IDX_M)] = -g_mb.conj();
    a[(IDX_P, IDX_M + 1)] = -g_mb;
    a[(IDX_P, IDX_C)] = g_bc.conj();
    a[(IDX_P, IDX_C + 1)] = g_bc;
    a[(IDX_P, IDX_Q)] = c(-r(params.omega_b), 0.0);
    a[(IDX_P, IDX_P)] = c(-r(params.gamma_b), 0.0);

    DriftMatrix { entries: a, unit }
}

pub fn build_noise_model(params: &SystemParams) -> Result<NoiseModel> {
    build_noise_model_in(params, params.omega_b)
}

pub fn build_noise_model_in(params: &SystemParams, unit: AngularFrequency) -> Result<NoiseModel> {
    let u = unit.rad_per_s();
    let occupations = params.thermal_occupations()?;
    let root = |k: AngularFrequency| c((k.rad_per_s() / u).sqrt(), 0.0);

    let mut m = Mat8x9::zeros();
    for (row, ch, k) in [
        (IDX_A, CH_A, params.kappa_a),
        (IDX_M, CH_M, params.kappa_m),
        (IDX_C, CH_C1, params.kappa_1),
        (IDX_C, CH_C2, params.kappa_2),
    ] {
        m[(row, ch)] = root(k);
        m[(row + 1, ch + 1)] = root(k);
    }
    m[(IDX_P, CH_XI)] = c(1.0, 0.0);

    let mut sym = Mat9::zeros();
    let mut ordered = Mat9::zeros();
    for (ch, n) in [
        (CH_A, occupations.n_a),
        (CH_M, occupations.n_m),
        (CH_C1, occupations.n_c),
        (CH_C2, occupations.n_c),
    ] {
        sym[(ch, ch + 1)] = n + 0.5;
        sym[(ch + 1, ch)] = n + 0.5;
        // <o(t) o+(t')> = (N + 1) delta, <o+(t) o(t')> = N delta
        ordered[(ch, ch + 1)] = n + 1.0;
        ordered[(ch + 1, ch)] = n;
    }
    let xi = params.gamma_b.rad_per_s() / u * (2.0 * occupations.n_b + 1.0);
    sym[(CH_XI, CH_XI)] = xi;
    ordered[(CH_XI, CH_XI)] = xi;

    Ok(NoiseModel {
        injection: m,
        correlations: sym,
        ordered_correlations: ordered,
        occupations,
        unit,
    })
}

/// Real parts within this distance of zero (in the matrix's unit) count as
/// marginal, hence not stable.
pub const MARGINAL_TOLERANCE: f64 = 1e-12;

/// Eigenvalues of the drift matrix and the Hurwitz criterion
/// (every real part strictly negative).
pub fn stability_analysis(a: &DriftMatrix) -> Result<Stability> {
    let mut eigenvalues = linalg::eigenvalues(&a.entries)?;
    linalg::sort_spectrum(&mut eigenvalues);
    let margin = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Stability {
        stable: margin < -MARGINAL_TOLERANCE,
        margin,
        eigenvalues,
    })
}

/// `Sigma conj(A) Sigma` where `Sigma` swaps each `(o, o+)` pair.
pub fn conjugate_swapped(a: &Mat8) -> Mat8 {
    Mat8::from_fn(|i, j| a[(conjugate_index(i), conjugate_index(j))].conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady_state::solve_steady_state;

    fn decoupled() -> SystemParams {
        let mut p = SystemParams::reference();
        p.g_ma = AngularFrequency::ZERO;
        p.g_mb = AngularFrequency::ZERO;
        p.g_bc = AngularFrequency::ZERO;
        p
    }

    fn reference_matrix() -> (SystemParams, SteadyState, DriftMatrix) {
        let p = SystemParams::reference();
        let ss = solve_steady_state(&p).unwrap();
        let a = build_drift_matrix(&p, &ss);
        (p, ss, a)
    }

    #[test]
    fn decoupled_matrix_is_block_diagonal() {
        let p = decoupled();
        let ss = solve_steady_state(&p).unwrap();
        let a = build_drift_matrix(&p, &ss).entries;
        let wb = p.omega_b;
        let mut expected = Mat8::zeros();
        for (idx, delta, kappa) in [
            (IDX_A, p.delta_a, p.kappa_a),
            (IDX_M, p.delta_m, p.kappa_m),
            (IDX_C, p.delta_c, p.kappa_c()),
        ] {
            expected[(idx, idx)] = c(-kappa / wb / 2.0, -(delta / wb));
            expected[(idx + 1, idx + 1)] = c(-kappa / wb / 2.0, delta / wb);
        }
        expected[(IDX_Q, IDX_P)] = c(1.0, 0.0);
        expected[(IDX_P, IDX_Q)] = c(-1.0, 0.0);
        expected[(IDX_P, IDX_P)] = c(-(p.gamma_b / wb), 0.0);
        assert!((a - expected).norm() < 1e-15);
    }

    #[test]
    fn magnon_displacement_entry() {
        let (p, ss, a) = reference_matrix();
        let expected = -I * ss.g_mb / p.omega_b.rad_per_s();
        assert!((a.entries[(IDX_M, IDX_Q)] - expected).norm() < 1e-15);
        let expected_c = I * ss.g_bc / p.omega_b.rad_per_s();
        assert!((a.entries[(IDX_C, IDX_Q)] - expected_c).norm() < 1e-15);
    }

    #[test]
    fn conjugation_symmetry() {
        let (_, _, a) = reference_matrix();
        assert!((conjugate_swapped(&a.entries) - a.entries).norm() < 1e-14);
    }

    #[test]
    fn trace_is_minus_total_decay() {
        let (p, _, a) = reference_matrix();
        let wb = p.omega_b;
        let expected = -(p.kappa_a / wb + p.kappa_m / wb + p.kappa_c() / wb + p.gamma_b / wb);
        let tr = a.entries.trace();
        assert!((tr.re - expected).abs() < 1e-12 * expected.abs());
        assert!(tr.im.abs() < 1e-12);
    }

    #[test]
    fn decoupled_eigenvalues_closed_form() {
        let p = decoupled();
        let ss = solve_steady_state(&p).unwrap();
        let st = stability_analysis(&build_drift_matrix(&p, &ss)).unwrap();
        assert!(st.stable);
        let wb = p.omega_b;
        for (delta, kappa) in [
            (p.delta_a, p.kappa_a),
            (p.delta_m, p.kappa_m),
            (p.delta_c, p.kappa_c()),
        ] {
            for sign in [-1.0, 1.0] {
                let z = c(-kappa / wb / 2.0, sign * (delta / wb));
                assert!(st.eigenvalues.iter().any(|e| (e - z).norm() < 1e-10), "{z}");
            }
        }
        let g = p.gamma_b / wb;
        let mech = c(-g / 2.0, (1.0 - g * g / 4.0).sqrt());
        assert!(st.eigenvalues.iter().any(|e| (e - mech).norm() < 1e-10));
        assert!(st
            .eigenvalues
            .iter()
            .any(|e| (e - mech.conj()).norm() < 1e-10));
    }

    #[test]
    fn undamped_oscillator_is_marginal() {
        let mut p = decoupled();
        p.gamma_b = AngularFrequency::ZERO;
        let ss = solve_steady_state(&p).unwrap();
        let st = stability_analysis(&build_drift_matrix(&p, &ss)).unwrap();
        assert!(st.margin.abs() < 1e-12, "{}", st.margin);
        assert!(!st.stable);
        assert!(st
            .eigenvalues
            .iter()
            .any(|e| (e - c(0.0, 1.0)).norm() < 1e-10));
        assert!(st
            .eigenvalues
            .iter()
            .any(|e| (e - c(0.0, -1.0)).norm() < 1e-10));
    }

    #[test]
    fn reference_point_is_stable() {
        let (_, _, a) = reference_matrix();
        let st = stability_analysis(&a).unwrap();
        assert!(st.stable, "margin {}", st.margin);
    }

    #[test]
    fn eigenvalues_come_in_conjugate_pairs() {
        let (_, _, a) = reference_matrix();
        let ev = linalg::eigenvalues(&a.entries).unwrap();
        let mut conj: Vec<C64> = ev.iter().map(|z| z.conj()).collect();
        for x in &ev {
            let (k, d) = conj
                .iter()
                .enumerate()
                .map(|(k, y)| (k, (x - y).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-10, "{x} has no conjugate partner");
            conj.swap_remove(k);
        }
    }

    #[test]
    fn noise_injection_structure() {
        let p = SystemParams::reference();
        let nm = build_noise_model(&p).unwrap();
        let m = nm.injection;
        let wb = p.omega_b;
        let nonzero: Vec<(usize, usize)> = (0..8)
            .flat_map(|i| (0..9).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != C64::default())
            .collect();
        assert_eq!(
            nonzero,
            vec![
                (0, 0),
                (1, 1),
                (2, 2),
                (3, 3),
                (4, 4),
                (4, 6),
                (5, 5),
                (5, 7),
                (7, 8)
            ]
        );
        assert!((m[(0, 0)].re - (p.kappa_a / wb).sqrt()).abs() < 1e-15);
        assert!((m[(5, 5)].re - (p.kappa_1 / wb).sqrt()).abs() < 1e-15);
        assert!((m[(4, 6)].re - (p.kappa_2 / wb).sqrt()).abs() < 1e-15);
        assert_eq!(m[(7, 8)], c(1.0, 0.0));
    }

    #[test]
    fn vacuum_correlations() {
        let mut p = SystemParams::reference();
        p.temperature = 0.0;
        let nm = build_noise_model(&p).unwrap();
        let cs = nm.correlations;
        for ch in [CH_A, CH_M, CH_C1, CH_C2] {
            assert_eq!(cs[(ch, ch + 1)], 0.5);
            assert_eq!(cs[(ch + 1, ch)], 0.5);
            assert_eq!(cs[(ch, ch)], 0.0);
            assert_eq!(cs[(ch + 1, ch + 1)], 0.0);
        }
        assert!((cs[(CH_XI, CH_XI)] - p.gamma_b / p.omega_b).abs() < 1e-18);
        assert_eq!(cs, cs.transpose());
        assert_eq!(
            nm.ordered_correlations + nm.ordered_correlations.transpose(),
            cs * 2.0
        );
    }

    #[test]
    fn thermal_correlations_at_20_mk() {
        let p = SystemParams::reference();
        let nm = build_noise_model(&p).unwrap();
        let xi = nm.correlations[(CH_XI, CH_XI)];
        let expected = p.gamma_b / p.omega_b * (2.0 * 9.926_307 + 1.0);
        assert!((xi - expected).abs() / expected < 1e-6);
        let pair = nm.correlations[(CH_A, CH_A + 1)];
        assert!((pair - 0.5 - 3.7894e-11).abs() < 1e-14);
        // Optical bath is empty.
        assert_eq!(nm.correlations[(CH_C1, CH_C1 + 1)], 0.5);
        // Cross-channel blocks vanish.
        assert_eq!(nm.correlations[(CH_A, CH_M + 1)], 0.0);
    }
}

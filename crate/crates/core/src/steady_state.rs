//! Coherent amplitudes and static displacement of the driven system.
//!
//! The mean fields solve
//!
//! ```text
//! <m> = Omega (kappa_a/2 + i Delta_a) / (g_ma^2 + (kappa_m/2 + i Dm~)(kappa_a/2 + i Delta_a))
//! <c> = E / (kappa_c/2 + i Dc~)
//! <q> = (g_bc |<c>|^2 - g_mb |<m>|^2) / omega_b
//! ```
//!
//! with `Dm~ = Delta_m + g_mb <q>` and `Dc~ = Delta_c - g_bc <q>`. How the
//! configured detunings enter is set by [`DetuningConvention`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::model::{DetuningConvention, SystemParams};
use crate::units::AngularFrequency;

pub const TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1000;
/// Below this magnitude (in units of omega_b, squared where applicable) a
/// steady-state denominator is treated as singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-30;
const DAMPING: f64 = 0.5;

/// Rescaling applied to an effective coupling by a calibration target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rescale {
    pub target: AngularFrequency,
    /// `|G_target| / |G_solved|`; `None` when the solved coupling is zero and
    /// the target was imposed with zero phase.
    pub factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CalibrationRecord {
    pub g_mb: Option<Rescale>,
    pub g_bc: Option<Rescale>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    #[serde(with = "complex_object")]
    pub m_avg: C64,
    #[serde(with = "complex_object")]
    pub c_avg: C64,
    pub q_avg: f64,
    /// Detunings entering the fluctuation equations.
    pub delta_m_eff: AngularFrequency,
    pub delta_c_eff: AngularFrequency,
    /// Detunings of the undisplaced system.
    pub delta_m_bare: AngularFrequency,
    pub delta_c_bare: AngularFrequency,
    /// Magnon-phonon effective coupling in rad/s (after calibration).
    #[serde(with = "complex_object")]
    pub g_mb: C64,
    /// Phonon-photon effective coupling in rad/s (after calibration).
    #[serde(with = "complex_object")]
    pub g_bc: C64,
    pub calibration: CalibrationRecord,
    pub iterations: usize,
    pub residual: f64,
}

impl SteadyState {
    /// Residual of the displacement equation at the returned amplitudes,
    /// relative to the scale of its two terms.
    pub fn displacement_residual(&self, params: &SystemParams) -> f64 {
        let wb = params.omega_b.rad_per_s();
        let push = params.g_bc.rad_per_s() * self.c_avg.norm_sqr();
        let pull = params.g_mb.rad_per_s() * self.m_avg.norm_sqr();
        let scale = (push.abs() + pull.abs()) / wb;
        if scale == 0.0 {
            return self.q_avg.abs();
        }
        (self.q_avg - (push - pull) / wb).abs() / scale
    }
}

struct Amplitudes {
    m: C64,
    c: C64,
}

/// Mean fields at given effective detunings, all rates in units of omega_b.
fn amplitudes(n: &Normalized, delta_m_eff: f64, delta_c_eff: f64) -> Result<Amplitudes> {
    let cavity_factor = c(n.kappa_a / 2.0, n.delta_a);
    let dm = n.g_ma * n.g_ma + c(n.kappa_m / 2.0, delta_m_eff) * cavity_factor;
    if dm.norm() < SINGULAR_DENOMINATOR {
        return Err(Error::SingularDenominator {
            mode: "magnon",
            magnitude: dm.norm(),
        });
    }
    let dc = c(n.kappa_c / 2.0, delta_c_eff);
    if dc.norm() < SINGULAR_DENOMINATOR {
        return Err(Error::SingularDenominator {
            mode: "optical",
            magnitude: dc.norm(),
        });
    }
    Ok(Amplitudes {
        m: n.rabi * cavity_factor / dm,
        c: c(n.drive, 0.0) / dc,
    })
}

struct Normalized {
    delta_a: f64,
    delta_m: f64,
    delta_c: f64,
    kappa_a: f64,
    kappa_m: f64,
    kappa_c: f64,
    g_ma: f64,
    g_mb: f64,
    g_bc: f64,
    rabi: f64,
    drive: f64,
}

impl Normalized {
    fn new(p: &SystemParams) -> Result<Self> {
        let wb = p.omega_b;
        Ok(Normalized {
            delta_a: p.delta_a / wb,
            delta_m: p.delta_m / wb,
            delta_c: p.delta_c / wb,
            kappa_a: p.kappa_a / wb,
            kappa_m: p.kappa_m / wb,
            kappa_c: p.kappa_c() / wb,
            g_ma: p.g_ma / wb,
            g_mb: p.g_mb / wb,
            g_bc: p.g_bc / wb,
            rabi: p.rabi()? / wb,
            drive: p.cavity_drive()? / wb,
        })
    }

    fn displacement(&self, a: &Amplitudes) -> f64 {
        self.g_bc * a.c.norm_sqr() - self.g_mb * a.m.norm_sqr()
    }
}

/// Solves for the mean fields and the static displacement.
pub fn solve_steady_state(params: &SystemParams) -> Result<SteadyState> {
    params.validate()?;
    let n = Normalized::new(params)?;
    let wb = params.omega_b;

    let (amps, q, delta_m_eff, delta_c_eff, iterations, residual) = match params.detuning_convention
    {
        DetuningConvention::Effective => {
            let a = amplitudes(&n, n.delta_m, n.delta_c)?;
            let q = n.displacement(&a);
            (a, q, n.delta_m, n.delta_c, 1, 0.0)
        }
        DetuningConvention::Bare => {
            let fp = fixed_point(&n)?;
            (
                fp.amps,
                fp.q,
                fp.delta_m_eff,
                fp.delta_c_eff,
                fp.iterations,
                fp.residual,
            )
        }
    };

    let delta_m_eff = delta_m_eff * wb;
    let delta_c_eff = delta_c_eff * wb;
    let mut ss = SteadyState {
        m_avg: amps.m,
        c_avg: amps.c,
        q_avg: q,
        delta_m_eff,
        delta_c_eff,
        delta_m_bare: delta_m_eff - q * params.g_mb,
        delta_c_bare: delta_c_eff + q * params.g_bc,
        g_mb: C64::default(),
        g_bc: C64::default(),
        calibration: CalibrationRecord::default(),
        iterations,
        residual,
    };
    let (g_mb, g_bc, record) = calibrated_couplings(&ss, params);
    ss.g_mb = g_mb;
    ss.g_bc = g_bc;
    ss.calibration = record;
    Ok(ss)
}

/// Effective couplings `G_mb = g_mb <m>` and `G_bc = g_bc <c>` in rad/s, with
/// calibration targets applied if the drive spec carries any.
pub fn effective_couplings(ss: &SteadyState, params: &SystemParams) -> (C64, C64) {
    let (g_mb, g_bc, _) = calibrated_couplings(ss, params);
    (g_mb, g_bc)
}

fn calibrated_couplings(ss: &SteadyState, params: &SystemParams) -> (C64, C64, CalibrationRecord) {
    let raw_mb = ss.m_avg * params.g_mb.rad_per_s();
    let raw_bc = ss.c_avg * params.g_bc.rad_per_s();
    let cal = params.drive.calibration;
    let mut record = CalibrationRecord::default();
    let g_mb = match cal.g_mb_target {
        Some(target) => {
            let (g, rescale) = rescale_to(raw_mb, target);
            record.g_mb = Some(rescale);
            g
        }
        None => raw_mb,
    };
    let g_bc = match cal.g_bc_target {
        Some(target) => {
            let (g, rescale) = rescale_to(raw_bc, target);
            record.g_bc = Some(rescale);
            g
        }
        None => raw_bc,
    };
    (g_mb, g_bc, record)
}

fn rescale_to(g: C64, target: AngularFrequency) -> (C64, Rescale) {
    let t = target.rad_per_s();
    let norm = g.norm();
    if norm > 0.0 {
        let factor = t / norm;
        (
            g * factor,
            Rescale {
                target,
                factor: Some(factor),
            },
        )
    } else {
        (
            c(t, 0.0),
            Rescale {
                target,
                factor: None,
            },
        )
    }
}

struct FixedPoint {
    amps: Amplitudes,
    q: f64,
    delta_m_eff: f64,
    delta_c_eff: f64,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
}

/// Iterates `q -> F(q)` from `q = 0`, switching to a damped update once the
/// plain update stops contracting.
fn fixed_point(n: &Normalized) -> Result<FixedPoint> {
    let mut q = 0.0;
    let mut damped = false;
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=MAX_ITERATIONS {
        let dm = n.delta_m + n.g_mb * q;
        let dc = n.delta_c - n.g_bc * q;
        let amps = amplitudes(n, dm, dc)?;
        let q_next = n.displacement(&amps);
        let step = q_next - q;
        let scale = q_next.abs().max(q.abs());
        let residual = if scale == 0.0 {
            0.0
        } else {
            step.abs() / scale
        };
        if !residual.is_finite() {
            break;
        }
        if residual < TOLERANCE {
            history.push(residual);
            return Ok(FixedPoint {
                amps,
                q: q_next,
                delta_m_eff: n.delta_m + n.g_mb * q_next,
                delta_c_eff: n.delta_c - n.g_bc * q_next,
                iterations: it,
                residual,
                history,
            });
        }
        if !damped && history.last().is_some_and(|&prev| residual >= prev) {
            damped = true;
        }
        history.push(residual);
        q += if damped { DAMPING * step } else { step };
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        residuals: history,
    })
}

/// Residual history of the bare-detuning iteration, for diagnostics.
pub fn fixed_point_history(params: &SystemParams) -> Result<Vec<f64>> {
    match fixed_point(&Normalized::new(params)?) {
        Ok(fp) => Ok(fp.history),
        Err(Error::NonConvergence { residuals, .. }) => Ok(residuals),
        Err(e) => Err(e),
    }
}

/// Serializes complex numbers as `{"re": .., "im": ..}`.
pub mod complex_object {
    use serde::ser::SerializeStruct;
    use serde::Serializer;

    use crate::linalg::C64;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Complex", 2)?;
        st.serialize_field("re", &z.re)?;
        st.serialize_field("im", &z.im)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CavityDrive, MagnonDrive};

    fn undriven() -> SystemParams {
        let mut p = SystemParams::reference();
        p.drive.magnon = MagnonDrive::Direct {
            rabi: AngularFrequency::ZERO,
        };
        p.drive.cavity = CavityDrive::Direct {
            amplitude: AngularFrequency::ZERO,
        };
        p
    }

    #[test]
    fn undriven_system_has_zero_fields() {
        for conv in [DetuningConvention::Effective, DetuningConvention::Bare] {
            let mut p = undriven();
            p.detuning_convention = conv;
            let ss = solve_steady_state(&p).unwrap();
            assert_eq!(ss.m_avg, C64::default());
            assert_eq!(ss.c_avg, C64::default());
            assert_eq!(ss.q_avg, 0.0);
            assert_eq!(ss.delta_m_eff, p.delta_m);
            assert_eq!(ss.delta_c_eff, p.delta_c);
        }
    }

    #[test]
    fn decoupled_cavity_closed_form() {
        for conv in [DetuningConvention::Effective, DetuningConvention::Bare] {
            let mut p = SystemParams::reference();
            p.detuning_convention = conv;
            p.g_mb = AngularFrequency::ZERO;
            p.g_bc = AngularFrequency::ZERO;
            let ss = solve_steady_state(&p).unwrap();
            let e = p.cavity_drive().unwrap().rad_per_s();
            let expected = c(e, 0.0) / c(p.kappa_c().rad_per_s() / 2.0, p.delta_c.rad_per_s());
            assert!((ss.c_avg - expected).norm() / expected.norm() < 1e-14);
            assert_eq!(ss.q_avg, 0.0);
        }
    }

    #[test]
    fn reference_cavity_amplitude() {
        // E = 1.584355e12 s^-1, |<c>| = E / |omega_b (1/2 + i)| with
        // omega_b = 2pi 40 MHz, evaluated independently: 5638.42.
        let p = SystemParams::reference();
        let ss = solve_steady_state(&p).unwrap();
        assert!(
            (ss.c_avg.norm() - 5638.42).abs() < 0.01,
            "{}",
            ss.c_avg.norm()
        );
        let g_bc_mhz = ss.g_bc.norm() / std::f64::consts::TAU / 1e6;
        assert!((g_bc_mhz - 22.55).abs() < 0.05, "{g_bc_mhz}");
    }

    #[test]
    fn reference_magnon_amplitude_matches_closed_form() {
        let p = SystemParams::reference();
        let ss = solve_steady_state(&p).unwrap();
        let rabi = p.rabi().unwrap().rad_per_s();
        let ca = c(p.kappa_a.rad_per_s() / 2.0, p.delta_a.rad_per_s());
        let cm = c(p.kappa_m.rad_per_s() / 2.0, p.delta_m.rad_per_s());
        let g2 = p.g_ma.rad_per_s().powi(2);
        let expected = rabi * ca / (g2 + cm * ca);
        assert!((ss.m_avg - expected).norm() / expected.norm() < 1e-12);
        assert!(ss.displacement_residual(&p) < 1e-12);
    }

    #[test]
    fn reference_magnon_shift_is_small() {
        let p = SystemParams::reference();
        let ss = solve_steady_state(&p).unwrap();
        let shift = (ss.delta_m_eff - ss.delta_m_bare).abs() / p.omega_b;
        assert!(shift < 1e-2, "{shift}");
    }

    #[test]
    fn bare_convention_converges_and_satisfies_equations() {
        let mut p = SystemParams::reference();
        p.detuning_convention = DetuningConvention::Bare;
        let ss = solve_steady_state(&p).unwrap();
        assert!(ss.iterations > 1 && ss.iterations < MAX_ITERATIONS);
        assert!(ss.displacement_residual(&p) < 1e-10);
        assert!(((ss.delta_m_bare - p.delta_m) / p.omega_b).abs() < 1e-12);
        assert!(((ss.delta_c_bare - p.delta_c) / p.omega_b).abs() < 1e-12);

        // Re-evaluate the mean-field equations at the returned detunings.
        let wb = p.omega_b.rad_per_s();
        let rabi = p.rabi().unwrap().rad_per_s();
        let ca = c(p.kappa_a.rad_per_s() / 2.0, p.delta_a.rad_per_s());
        let cm = c(p.kappa_m.rad_per_s() / 2.0, ss.delta_m_eff.rad_per_s());
        let m = rabi * ca / (p.g_ma.rad_per_s().powi(2) + cm * ca);
        let e = p.cavity_drive().unwrap().rad_per_s();
        let cc = e / c(p.kappa_c().rad_per_s() / 2.0, ss.delta_c_eff.rad_per_s());
        assert!((ss.m_avg - m).norm() / m.norm() < 1e-10);
        assert!((ss.c_avg - cc).norm() / cc.norm() < 1e-10);
        let dm = ss.delta_m_eff.rad_per_s() - p.delta_m.rad_per_s() - p.g_mb.rad_per_s() * ss.q_avg;
        assert!(dm.abs() / wb < 1e-10);
    }

    #[test]
    fn bare_iteration_residual_decreases_at_the_end() {
        let mut p = SystemParams::reference();
        p.detuning_convention = DetuningConvention::Bare;
        let history = fixed_point_history(&p).unwrap();
        let tail = &history[history.len().saturating_sub(10)..];
        assert!(tail.len() >= 2);
        for w in tail.windows(2) {
            assert!(w[1] < w[0], "{history:?}");
        }
    }

    #[test]
    fn strong_bare_drive_reports_nonconvergence_or_converges() {
        // A drive strong enough to make the displacement map expansive must
        // not silently return a point that violates the equations.
        let mut p = SystemParams::reference();
        p.detuning_convention = DetuningConvention::Bare;
        p.g_bc = AngularFrequency::from_hz(4e6);
        match solve_steady_state(&p) {
            Ok(ss) => assert!(ss.displacement_residual(&p) < 1e-9),
            Err(Error::NonConvergence { residuals, .. }) => assert!(!residuals.is_empty()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn calibration_targets_are_met_exactly() {
        let mut p = SystemParams::reference();
        let target = AngularFrequency::from_hz(2e6);
        p.drive.calibration.g_mb_target = Some(target);
        let ss = solve_steady_state(&p).unwrap();
        assert!((ss.g_mb.norm() - target.rad_per_s()).abs() / target.rad_per_s() < 1e-12);
        let rescale = ss.calibration.g_mb.unwrap();
        assert!(rescale.factor.unwrap() < 1.0);
        // Phase is preserved.
        let raw = ss.m_avg * p.g_mb.rad_per_s();
        assert!((ss.g_mb.arg() - raw.arg()).abs() < 1e-12);
        assert!(ss.calibration.g_bc.is_none());
    }

    #[test]
    fn calibration_on_zero_field_imposes_real_coupling() {
        let mut p = undriven();
        p.drive.calibration.g_bc_target = Some(AngularFrequency::from_hz(1e6));
        let ss = solve_steady_state(&p).unwrap();
        assert_eq!(ss.g_bc, c(AngularFrequency::from_hz(1e6).rad_per_s(), 0.0));
        assert_eq!(ss.calibration.g_bc.unwrap().factor, None);
        assert_eq!(ss.g_mb, C64::default());
    }

    #[test]
    fn flipping_rabi_sign_flips_magnon_phase_only() {
        let p = SystemParams::reference().with_direct_drives().unwrap();
        let mut flipped = p.clone();
        if let MagnonDrive::Direct { rabi } = p.drive.magnon {
            flipped.drive.magnon = MagnonDrive::Direct { rabi: -rabi };
        }
        let a = solve_steady_state(&p).unwrap();
        let b = solve_steady_state(&flipped).unwrap();
        assert!((a.m_avg + b.m_avg).norm() / a.m_avg.norm() < 1e-14);
        assert!((a.g_mb.norm() - b.g_mb.norm()).abs() / a.g_mb.norm() < 1e-14);
        assert_eq!(a.q_avg, b.q_avg);
    }

    #[test]
    fn singular_optical_denominator() {
        let mut p = SystemParams::reference();
        p.kappa_1 = AngularFrequency::ZERO;
        p.kappa_2 = AngularFrequency::ZERO;
        p.delta_c = AngularFrequency::ZERO;
        p.drive.cavity = CavityDrive::Direct {
            amplitude: AngularFrequency::from_hz(1.0),
        };
        assert!(matches!(
            solve_steady_state(&p),
            Err(Error::SingularDenominator {
                mode: "optical",
                ..
            })
        ));
    }
}

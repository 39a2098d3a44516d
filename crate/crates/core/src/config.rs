//! TOML configuration: physics parameters, drives, constants and an optional
//! sweep.
//!
//! Every key is optional; omitted physics keys take the reference values of
//! [`SystemParams::reference`]. Unknown keys are rejected so typos fail loudly.
//!
//! ```toml
//! [physics]
//! omega_b_hz = 40e6
//! delta_c = 1.0          # units of omega_b
//! phi_pi = 0.3           # phi / pi
//!
//! [drive.magnon]
//! route = "direct"
//! rabi_rad_s = 5.9e13
//!
//! [drive.calibration]
//! g_mb_target_hz = 4e6
//!
//! [sweep]
//! axis1 = { param = "omega", min = 0.0, max = 1.5, points = 300 }
//! axis2 = { param = "delta_c", min = 0.0, max = 2.0, points = 300 }
//! fixed = { delta_m_eq_a = 0.1 }
//! output = { path = "fig2a.csv", format = "csv" }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    laser_frequency, CavityDrive, DetuningConvention, MagnonDrive, SystemParams,
    REFERENCE_WAVELENGTH,
};
use crate::steady_state::{solve_steady_state, CalibrationRecord};
use crate::sweep::{Axis, OutputFormat, OutputSpec, SweepParam, SweepSpec};
use crate::units::{AngularFrequency, PhysicalConstants};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    physics: Option<RawPhysics>,
    drive: Option<RawDrive>,
    constants: Option<RawConstants>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    omega_a_hz: Option<f64>,
    omega_m_hz: Option<f64>,
    omega_c_hz: Option<f64>,
    omega_b_hz: Option<f64>,
    delta_a: Option<f64>,
    delta_m: Option<f64>,
    delta_c: Option<f64>,
    kappa_a_hz: Option<f64>,
    kappa_m_hz: Option<f64>,
    kappa_1: Option<f64>,
    kappa_2: Option<f64>,
    gamma_b_hz: Option<f64>,
    g_ma_hz: Option<f64>,
    g_mb_hz: Option<f64>,
    g_bc_hz: Option<f64>,
    temperature_k: Option<f64>,
    phi_pi: Option<f64>,
    detuning_convention: Option<DetuningConvention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Route {
    Physical,
    Direct,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    magnon: Option<RawMagnon>,
    cavity: Option<RawCavity>,
    calibration: Option<RawCalibration>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMagnon {
    route: Option<Route>,
    power_w: Option<f64>,
    length_m: Option<f64>,
    width_m: Option<f64>,
    volume_m3: Option<f64>,
    rabi_rad_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCavity {
    route: Option<Route>,
    power_w: Option<f64>,
    wavelength_m: Option<f64>,
    amplitude_rad_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCalibration {
    g_mb_target_hz: Option<f64>,
    g_bc_target_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    hbar: Option<f64>,
    k_b: Option<f64>,
    mu_0: Option<f64>,
    c_light: Option<f64>,
    gyromagnetic_ratio: Option<f64>,
    spin_density: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis1: Axis,
    axis2: Option<Axis>,
    #[serde(default)]
    fixed: BTreeMap<SweepParam, f64>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<OutputFormat>,
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: SystemParams,
    pub sweep: Option<SweepSpec>,
    /// Names of the physical constants that differ from their defaults.
    pub constant_overrides: Vec<String>,
}

/// Provenance recorded with every output: the resolved parameters and
/// every constant and drive value they depend on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub version: &'static str,
    pub params: SystemParams,
    pub constants: PhysicalConstants,
    /// Names of the constants that differ from their defaults.
    pub constant_overrides: Vec<String>,
    pub magnon_route: &'static str,
    pub cavity_route: &'static str,
    pub rabi: Option<AngularFrequency>,
    pub cavity_drive: Option<AngularFrequency>,
    pub spin_number: Option<f64>,
    pub calibration: Option<CalibrationRecord>,
}

impl RunMetadata {
    /// Resolves drive amplitudes and calibration for `params`. Values that
    /// cannot be resolved are recorded as absent.
    pub fn new(params: &SystemParams, constant_overrides: &[String]) -> Self {
        RunMetadata {
            version: env!("CARGO_PKG_VERSION"),
            params: params.clone(),
            constants: params.constants,
            constant_overrides: constant_overrides.to_vec(),
            magnon_route: params.drive.magnon_route(),
            cavity_route: params.drive.cavity_route(),
            rabi: params.rabi().ok(),
            cavity_drive: params.cavity_drive().ok(),
            spin_number: params.spin_number(),
            calibration: solve_steady_state(params).ok().map(|ss| ss.calibration),
        }
    }
}

impl Config {
    pub fn metadata(&self) -> RunMetadata {
        RunMetadata::new(&self.params, &self.constant_overrides)
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses configuration text and validates the resulting parameters.
pub fn parse_config(text: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut params = SystemParams::reference();
    let mut constant_overrides = Vec::new();

    if let Some(c) = raw.constants {
        let k = &mut params.constants;
        for (name, value, slot) in [
            ("hbar", c.hbar, &mut k.hbar),
            ("k_b", c.k_b, &mut k.k_b),
            ("mu_0", c.mu_0, &mut k.mu_0),
            ("c_light", c.c_light, &mut k.c_light),
            (
                "gyromagnetic_ratio",
                c.gyromagnetic_ratio,
                &mut k.gyromagnetic_ratio,
            ),
            ("spin_density", c.spin_density, &mut k.spin_density),
        ] {
            if let Some(v) = value {
                *slot = v;
                constant_overrides.push(name.to_string());
            }
        }
    }

    let ph = raw.physics.unwrap_or_default();
    let hz = AngularFrequency::from_hz;
    if let Some(v) = ph.omega_b_hz {
        params.omega_b = hz(v);
    }
    let wb = params.omega_b;
    let in_wb = |x: f64| x * wb;
    // Quantities quoted in units of omega_b follow a changed omega_b.
    let reference = SystemParams::reference();
    let scale = |x: AngularFrequency| x / reference.omega_b * wb;
    params.delta_a = ph.delta_a.map_or(scale(reference.delta_a), in_wb);
    params.delta_m = ph.delta_m.map_or(scale(reference.delta_m), in_wb);
    params.delta_c = ph.delta_c.map_or(scale(reference.delta_c), in_wb);
    params.kappa_1 = ph.kappa_1.map_or(scale(reference.kappa_1), in_wb);
    params.kappa_2 = ph.kappa_2.map_or(scale(reference.kappa_2), in_wb);

    for (value, slot) in [
        (ph.omega_a_hz, &mut params.omega_a),
        (ph.omega_m_hz, &mut params.omega_m),
        (ph.kappa_a_hz, &mut params.kappa_a),
        (ph.kappa_m_hz, &mut params.kappa_m),
        (ph.gamma_b_hz, &mut params.gamma_b),
        (ph.g_ma_hz, &mut params.g_ma),
        (ph.g_mb_hz, &mut params.g_mb),
        (ph.g_bc_hz, &mut params.g_bc),
    ] {
        if let Some(v) = value {
            *slot = hz(v);
        }
    }
    if let Some(t) = ph.temperature_k {
        params.temperature = t;
    }
    if let Some(p) = ph.phi_pi {
        params.phi = p * std::f64::consts::PI;
    }
    if let Some(conv) = ph.detuning_convention {
        params.detuning_convention = conv;
    }

    let drive = raw.drive.unwrap_or_default();
    if let Some(m) = drive.magnon {
        params.drive.magnon = resolve_magnon(m, params.drive.magnon)?;
    }
    if let Some(cv) = drive.cavity {
        params.drive.cavity = resolve_cavity(cv, params.drive.cavity)?;
    }
    if let Some(cal) = drive.calibration {
        params.drive.calibration.g_mb_target = cal.g_mb_target_hz.map(hz);
        params.drive.calibration.g_bc_target = cal.g_bc_target_hz.map(hz);
    }

    params.omega_c = match ph.omega_c_hz {
        Some(v) => hz(v),
        None => {
            let wavelength = match params.drive.cavity {
                CavityDrive::Physical { wavelength, .. } => wavelength,
                CavityDrive::Direct { .. } => REFERENCE_WAVELENGTH,
            };
            laser_frequency(wavelength, &params.constants) + params.delta_c
        }
    };

    params
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;

    let sweep = match raw.sweep {
        None => None,
        Some(s) => {
            let output = s.output.unwrap_or_default();
            let spec = SweepSpec {
                axis1: s.axis1,
                axis2: s.axis2,
                fixed: s.fixed,
                output: OutputSpec {
                    path: output.path,
                    format: output.format.unwrap_or_default(),
                },
            };
            spec.validate()?;
            Some(spec)
        }
    };

    Ok(Config {
        params,
        sweep,
        constant_overrides,
    })
}

fn route_conflict(section: &str, route: Route, key: &str) -> Error {
    let route = match route {
        Route::Physical => "physical",
        Route::Direct => "direct",
    };
    Error::Config(format!(
        "[{section}] key `{key}` does not belong to route \"{route}\""
    ))
}

fn resolve_magnon(raw: RawMagnon, base: MagnonDrive) -> Result<MagnonDrive> {
    let physical_given = raw.power_w.is_some()
        || raw.length_m.is_some()
        || raw.width_m.is_some()
        || raw.volume_m3.is_some();
    let route = raw.route.unwrap_or(if raw.rabi_rad_s.is_some() {
        Route::Direct
    } else {
        Route::Physical
    });
    match route {
        Route::Direct => {
            if physical_given {
                return Err(route_conflict(
                    "drive.magnon",
                    route,
                    "power_w/length_m/width_m/volume_m3",
                ));
            }
            let rabi = raw.rabi_rad_s.ok_or_else(|| {
                Error::Config("[drive.magnon] direct route needs `rabi_rad_s`".into())
            })?;
            Ok(MagnonDrive::Direct {
                rabi: AngularFrequency::from_rad_per_s(rabi),
            })
        }
        Route::Physical => {
            if raw.rabi_rad_s.is_some() {
                return Err(route_conflict("drive.magnon", route, "rabi_rad_s"));
            }
            let (p0, l0, w0, v0) = match base {
                MagnonDrive::Physical {
                    power,
                    length,
                    width,
                    volume,
                } => (power, length, width, volume),
                MagnonDrive::Direct { .. } => unreachable!("reference drive is physical"),
            };
            Ok(MagnonDrive::Physical {
                power: raw.power_w.unwrap_or(p0),
                length: raw.length_m.unwrap_or(l0),
                width: raw.width_m.unwrap_or(w0),
                volume: raw.volume_m3.unwrap_or(v0),
            })
        }
    }
}

fn resolve_cavity(raw: RawCavity, base: CavityDrive) -> Result<CavityDrive> {
    let physical_given = raw.power_w.is_some() || raw.wavelength_m.is_some();
    let route = raw.route.unwrap_or(if raw.amplitude_rad_s.is_some() {
        Route::Direct
    } else {
        Route::Physical
    });
    match route {
        Route::Direct => {
            if physical_given {
                return Err(route_conflict(
                    "drive.cavity",
                    route,
                    "power_w/wavelength_m",
                ));
            }
            let e = raw.amplitude_rad_s.ok_or_else(|| {
                Error::Config("[drive.cavity] direct route needs `amplitude_rad_s`".into())
            })?;
            Ok(CavityDrive::Direct {
                amplitude: AngularFrequency::from_rad_per_s(e),
            })
        }
        Route::Physical => {
            if raw.amplitude_rad_s.is_some() {
                return Err(route_conflict("drive.cavity", route, "amplitude_rad_s"));
            }
            let (p0, l0) = match base {
                CavityDrive::Physical { power, wavelength } => (power, wavelength),
                CavityDrive::Direct { .. } => unreachable!("reference drive is physical"),
            };
            Ok(CavityDrive::Physical {
                power: raw.power_w.unwrap_or(p0),
                wavelength: raw.wavelength_m.unwrap_or(l0),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_text_gives_reference() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.params, SystemParams::reference());
        assert!(cfg.sweep.is_none());
        assert!(cfg.constant_overrides.is_empty());
        let cfg = parse_config("[physics]\n").unwrap();
        assert_eq!(cfg.params, SystemParams::reference());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[physics]\nkapa_a_hz = 5e6\n").unwrap_err();
        assert!(err.is_config());
        let msg = err.to_string();
        assert!(msg.contains("kapa_a_hz"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");

        let err = parse_config("[drive.magnon]\npower = 1e-3\n").unwrap_err();
        assert!(err.to_string().contains("power"));
        let err = parse_config("[physic]\n").unwrap_err();
        assert!(err.to_string().contains("physic"));
    }

    #[test]
    fn phi_is_given_in_units_of_pi() {
        let cfg = parse_config("[physics]\nphi_pi = 0.3\n").unwrap();
        assert_eq!(cfg.params.phi, 0.3 * PI);
    }

    #[test]
    fn omega_b_units_follow_omega_b() {
        let cfg = parse_config("[physics]\nomega_b_hz = 20e6\ndelta_c = 0.5\n").unwrap();
        let p = cfg.params;
        assert_eq!(p.omega_b, AngularFrequency::from_hz(20e6));
        assert_eq!(p.delta_c, 0.5 * p.omega_b);
        assert!((p.kappa_1 / p.omega_b - 0.9).abs() < 1e-15);
        assert!((p.delta_m / p.omega_b - 0.1).abs() < 1e-15);
    }

    #[test]
    fn direct_routes_and_calibration() {
        let text = r#"
[drive.magnon]
rabi_rad_s = 1.0e13
[drive.cavity]
route = "direct"
amplitude_rad_s = 2.0e12
[drive.calibration]
g_mb_target_hz = 4e6
"#;
        let p = parse_config(text).unwrap().params;
        assert_eq!(
            p.drive.magnon,
            MagnonDrive::Direct {
                rabi: AngularFrequency::from_rad_per_s(1.0e13)
            }
        );
        assert_eq!(p.drive.cavity_route(), "direct");
        assert_eq!(
            p.drive.calibration.g_mb_target,
            Some(AngularFrequency::from_hz(4e6))
        );
        assert_eq!(p.drive.calibration.g_bc_target, None);
    }

    #[test]
    fn mixed_route_keys_are_rejected() {
        let err =
            parse_config("[drive.magnon]\nroute = \"direct\"\npower_w = 1e-3\nrabi_rad_s = 1.0\n")
                .unwrap_err();
        assert!(err.is_config());
        let err = parse_config("[drive.cavity]\nroute = \"physical\"\namplitude_rad_s = 1.0\n")
            .unwrap_err();
        assert!(err.to_string().contains("amplitude_rad_s"));
        assert!(parse_config("[drive.magnon]\nroute = \"direct\"\n").is_err());
    }

    #[test]
    fn partial_physical_drive_keeps_other_defaults() {
        let p = parse_config("[drive.magnon]\npower_w = 20e-3\n")
            .unwrap()
            .params;
        match p.drive.magnon {
            MagnonDrive::Physical { power, length, .. } => {
                assert_eq!(power, 20e-3);
                assert_eq!(length, 5e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_overrides_are_recorded() {
        let cfg = parse_config("[constants]\nspin_density = 2.1e28\n").unwrap();
        assert_eq!(cfg.params.constants.spin_density, 2.1e28);
        assert_eq!(cfg.constant_overrides, vec!["spin_density".to_string()]);
        assert!(parse_config("[constants]\nhbar = -1.0\n")
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let err = parse_config("[physics]\ngamma_b_hz = 1e6\n").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("quality factor"));
        assert!(parse_config("[physics]\ntemperature_k = -1\n").is_err());
    }

    #[test]
    fn sweep_section() {
        let text = r#"
[sweep]
axis1 = { param = "omega", min = 0.0, max = 1.5, points = 300 }
axis2 = { param = "delta_c", min = 0.0, max = 2.0, points = 300 }
fixed = { delta_m_eq_a = 0.1 }
output = { path = "out.csv", format = "csv" }
"#;
        let s = parse_config(text).unwrap().sweep.unwrap();
        assert_eq!(s.axis1.param, SweepParam::Omega);
        assert_eq!(s.axis2.unwrap().points, 300);
        assert_eq!(s.fixed.get(&SweepParam::DeltaMEqA), Some(&0.1));
        assert_eq!(s.output.path.as_deref(), Some(Path::new("out.csv")));

        assert!(parse_config(
            "[sweep]\naxis1 = { param = \"omega\", min = 1.0, max = 0.0, points = 3 }\n"
        )
        .is_err());
        assert!(parse_config(
            "[sweep]\naxis1 = { param = \"omega\", min = 0.0, max = 1.0, points = 1 }\n"
        )
        .is_err());
        let err = parse_config(
            "[sweep]\naxis1 = { param = \"kapa_c\", min = 0.0, max = 1.0, points = 3 }\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("kapa_c"));
    }
}

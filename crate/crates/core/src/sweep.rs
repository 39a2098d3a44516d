//! One- and two-dimensional parameter sweeps of the output spectrum.
//!
//! Each cell applies the fixed overrides and then the axis values to the base
//! parameters, re-solves the steady state, checks stability and evaluates `S`
//! at the cell's frequency. Cells that share everything except the frequency
//! share one steady state and one drift matrix. Results are gathered by grid
//! index, so the output does not depend on the number of workers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunMetadata;
use crate::dynamics::{build_drift_matrix, stability_analysis};
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::spectrum::{to_decibels, uniform_grid, SpectrumEngine};
use crate::steady_state::solve_steady_state;

/// Parameters that can be put on an axis or fixed for a whole sweep.
///
/// Frequencies, detunings and decays are in units of `omega_b`, `phi` in
/// units of `pi`, temperature in kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Spectrum frequency.
    Omega,
    DeltaC,
    /// Sets `delta_m = delta_a`.
    DeltaMEqA,
    Phi,
    /// Total optical decay with `kappa_2` held fixed.
    KappaC,
    /// Total optical decay with `kappa_1 / kappa_c` held fixed.
    KappaCFixedSplit,
    Temperature,
    /// Override only.
    DeltaM,
    /// Override only.
    DeltaA,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Omega => "omega",
            SweepParam::DeltaC => "delta_c",
            SweepParam::DeltaMEqA => "delta_m_eq_a",
            SweepParam::Phi => "phi",
            SweepParam::KappaC => "kappa_c",
            SweepParam::KappaCFixedSplit => "kappa_c_fixed_split",
            SweepParam::Temperature => "temperature",
            SweepParam::DeltaM => "delta_m",
            SweepParam::DeltaA => "delta_a",
        }
    }

    fn sweepable(self) -> bool {
        !matches!(self, SweepParam::DeltaM | SweepParam::DeltaA)
    }

    /// Writes `value` into `params`. `Omega` is not a system parameter and
    /// is ignored here.
    pub fn apply(self, params: &mut SystemParams, value: f64) -> Result<()> {
        let wb = params.omega_b;
        match self {
            SweepParam::Omega => {}
            SweepParam::DeltaC => {
                let new = value * wb;
                // The laser stays put, so the cavity resonance moves with the detuning.
                params.omega_c = params.omega_c + (new - params.delta_c);
                params.delta_c = new;
            }
            SweepParam::DeltaMEqA => {
                params.delta_m = value * wb;
                params.delta_a = value * wb;
            }
            SweepParam::DeltaM => params.delta_m = value * wb,
            SweepParam::DeltaA => params.delta_a = value * wb,
            SweepParam::Phi => params.phi = value * std::f64::consts::PI,
            SweepParam::KappaC => params.set_kappa_c_fixed_loss(value * wb)?,
            SweepParam::KappaCFixedSplit => params.set_kappa_c_fixed_split(value * wb)?,
            SweepParam::Temperature => params.temperature = value,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        uniform_grid(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub fixed: BTreeMap<SweepParam, f64>,
    pub output: OutputSpec,
}

/// Where a cell's spectrum frequency comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
enum OmegaSource {
    Axis1,
    Axis2,
    Fixed(f64),
}

impl SweepSpec {
    pub fn one_d(axis: Axis) -> Self {
        SweepSpec {
            axis1: axis,
            axis2: None,
            fixed: BTreeMap::new(),
            output: OutputSpec::default(),
        }
    }

    pub fn two_d(axis1: Axis, axis2: Axis) -> Self {
        SweepSpec {
            axis2: Some(axis2),
            ..Self::one_d(axis1)
        }
    }

    pub fn with_fixed(mut self, param: SweepParam, value: f64) -> Self {
        self.fixed.insert(param, value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for axis in std::iter::once(&self.axis1).chain(&self.axis2) {
            let name = axis.param.name();
            if !axis.param.sweepable() {
                return bad(format!("`{name}` can only be fixed, not swept"));
            }
            if axis.points < 2 {
                return bad(format!("axis `{name}` needs at least 2 points"));
            }
            if !(axis.min.is_finite() && axis.max.is_finite() && axis.min < axis.max) {
                return bad(format!("axis `{name}` needs finite min < max"));
            }
            if self.fixed.contains_key(&axis.param) {
                return bad(format!("`{name}` is both swept and fixed"));
            }
        }
        if let Some(a2) = &self.axis2 {
            if a2.param == self.axis1.param {
                return bad(format!("both axes sweep `{}`", a2.param.name()));
            }
        }
        for (p, v) in &self.fixed {
            if !v.is_finite() {
                return bad(format!("fixed value of `{}` is not finite", p.name()));
            }
        }
        let locked = self.params().any(|p| p == SweepParam::DeltaMEqA);
        if locked
            && self
                .params()
                .any(|p| matches!(p, SweepParam::DeltaM | SweepParam::DeltaA))
        {
            return bad("`delta_m_eq_a` conflicts with `delta_m`/`delta_a`".into());
        }
        let kappa = self
            .params()
            .filter(|p| matches!(p, SweepParam::KappaC | SweepParam::KappaCFixedSplit))
            .count();
        if kappa > 1 {
            return bad("`kappa_c` and `kappa_c_fixed_split` are mutually exclusive".into());
        }
        self.omega_source().map(|_| ())
    }

    fn params(&self) -> impl Iterator<Item = SweepParam> + '_ {
        std::iter::once(self.axis1.param)
            .chain(self.axis2.map(|a| a.param))
            .chain(self.fixed.keys().copied())
    }

    fn omega_source(&self) -> Result<OmegaSource> {
        if self.axis1.param == SweepParam::Omega {
            Ok(OmegaSource::Axis1)
        } else if self.axis2.map(|a| a.param) == Some(SweepParam::Omega) {
            Ok(OmegaSource::Axis2)
        } else if let Some(&w) = self.fixed.get(&SweepParam::Omega) {
            Ok(OmegaSource::Fixed(w))
        } else {
            Err(Error::Config(
                "sweep needs `omega` on an axis or in `fixed`".into(),
            ))
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.points, self.axis2.map_or(1, |a| a.points))
    }

    /// Parameters and frequency (units of `omega_b`) of cell `(i1, i2)`,
    /// exactly as the sweep evaluates it.
    pub fn resolve_cell(
        &self,
        base: &SystemParams,
        i1: usize,
        i2: usize,
    ) -> Result<(SystemParams, f64)> {
        let v1 = self.axis1.values()[i1];
        let v2 = self.axis2.map(|a| a.values()[i2]);
        let mut p = base.clone();
        for (&param, &value) in &self.fixed {
            param.apply(&mut p, value)?;
        }
        self.axis1.param.apply(&mut p, v1)?;
        if let (Some(a2), Some(v2)) = (self.axis2, v2) {
            a2.param.apply(&mut p, v2)?;
        }
        let omega = match self.omega_source()? {
            OmegaSource::Axis1 => v1,
            OmegaSource::Axis2 => v2.expect("axis2 present"),
            OmegaSource::Fixed(w) => w,
        };
        Ok((p, omega))
    }
}

/// One grid cell. `s` is absent for unstable or failed cells; `stable` is
/// absent when the failure happened before stability could be decided.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub s: Option<f64>,
    pub s_db: Option<f64>,
    pub stable: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    /// Base parameters after the fixed overrides. The calibration record is
    /// the one at the base point; per-cell factors differ when a swept
    /// parameter changes the steady state.
    #[serde(flatten)]
    pub run: RunMetadata,
    pub grid: SweepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Cell with the smallest `S`.
    pub fn minimum(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.s.is_some())
            .min_by(|a, b| a.s.unwrap().total_cmp(&b.s.unwrap()))
    }

    pub fn unstable_count(&self) -> usize {
        self.rows.iter().filter(|r| r.stable == Some(false)).count()
    }

    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

enum Context {
    Stable(Box<SpectrumEngine>),
    Unstable,
    Failed(String),
}

fn build_context(params: Result<SystemParams>) -> Context {
    let run = || -> Result<Context> {
        let p = params?;
        p.validate()?;
        let ss = solve_steady_state(&p)?;
        let st = stability_analysis(&build_drift_matrix(&p, &ss))?;
        if !st.stable {
            return Ok(Context::Unstable);
        }
        Ok(Context::Stable(Box::new(SpectrumEngine::new(&p, &ss)?)))
    };
    run().unwrap_or_else(|e| Context::Failed(e.to_string()))
}

/// Runs the sweep on `workers` threads (0 = one per core).
pub fn run_sweep(
    spec: &SweepSpec,
    base: &SystemParams,
    constant_overrides: &[String],
    workers: usize,
) -> Result<SweepResult> {
    spec.validate()?;
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| evaluate(spec, base, constant_overrides))
}

fn evaluate(
    spec: &SweepSpec,
    base: &SystemParams,
    constant_overrides: &[String],
) -> Result<SweepResult> {
    let (n1, n2) = spec.shape();
    let v1 = spec.axis1.values();
    let v2 = spec.axis2.map(|a| a.values());
    let source = spec.omega_source()?;

    // Context index of each cell: everything but the frequency.
    let context_of = |i1: usize, i2: usize| match source {
        OmegaSource::Axis1 => i2,
        OmegaSource::Axis2 => i1,
        OmegaSource::Fixed(_) => i1 * n2 + i2,
    };
    let n_ctx = match source {
        OmegaSource::Axis1 => n2,
        OmegaSource::Axis2 => n1,
        OmegaSource::Fixed(_) => n1 * n2,
    };
    let representative = |k: usize| match source {
        OmegaSource::Axis1 => (0, k),
        OmegaSource::Axis2 => (k, 0),
        OmegaSource::Fixed(_) => (k / n2, k % n2),
    };
    let contexts: Vec<Context> = (0..n_ctx)
        .into_par_iter()
        .map(|k| {
            let (i1, i2) = representative(k);
            build_context(spec.resolve_cell(base, i1, i2).map(|(p, _)| p))
        })
        .collect();

    let rows: Vec<SweepRow> = (0..n1 * n2)
        .into_par_iter()
        .map(|idx| {
            let (i1, i2) = (idx / n2, idx % n2);
            let omega = match source {
                OmegaSource::Axis1 => v1[i1],
                OmegaSource::Axis2 => v2.as_ref().expect("axis2 present")[i2],
                OmegaSource::Fixed(w) => w,
            };
            let mut row = SweepRow {
                axis1: v1[i1],
                axis2: v2.as_ref().map(|v| v[i2]),
                s: None,
                s_db: None,
                stable: None,
                error: None,
            };
            match &contexts[context_of(i1, i2)] {
                Context::Stable(engine) => {
                    row.stable = Some(true);
                    match engine.density(omega) {
                        Ok(s) => {
                            row.s = Some(s);
                            row.s_db = to_decibels(s).ok();
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
                Context::Unstable => row.stable = Some(false),
                Context::Failed(msg) => row.error = Some(msg.clone()),
            }
            row
        })
        .collect();

    Ok(SweepResult {
        metadata: metadata(spec, base, constant_overrides),
        rows,
    })
}

fn metadata(spec: &SweepSpec, base: &SystemParams, constant_overrides: &[String]) -> SweepMetadata {
    let mut params = base.clone();
    let fixed_ok = spec
        .fixed
        .iter()
        .all(|(&p, &v)| p.apply(&mut params, v).is_ok());
    let mut run = RunMetadata::new(&params, constant_overrides);
    if !fixed_ok {
        run.calibration = None;
    }
    SweepMetadata {
        run,
        grid: spec.clone(),
    }
}

fn push_float(out: &mut String, x: Option<f64>) {
    if let Some(x) = x {
        write!(out, "{x:.16e}").expect("write to String");
    }
}

/// Long-format CSV, one row per cell. Floats carry 17 significant digits.
/// Unstable cells have an empty `S`; cells that failed before stability was
/// decided have `stable` = `error` (the message is in the JSON output).
pub fn to_csv(result: &SweepResult) -> String {
    let two_d = result.metadata.grid.axis2.is_some();
    let mut out = String::with_capacity(result.rows.len() * 80);
    out.push_str(if two_d {
        "axis1,axis2,S,S_dB,stable\n"
    } else {
        "axis1,S,S_dB,stable\n"
    });
    for r in &result.rows {
        push_float(&mut out, Some(r.axis1));
        out.push(',');
        if two_d {
            push_float(&mut out, r.axis2);
            out.push(',');
        }
        push_float(&mut out, r.s);
        out.push(',');
        push_float(&mut out, r.s_db);
        out.push(',');
        out.push_str(match r.stable {
            Some(true) => "true",
            Some(false) => "false",
            None => "error",
        });
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonColumns<'a> {
    axis1: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis2: Option<Vec<f64>>,
    #[serde(rename = "S")]
    s: Vec<Option<f64>>,
    #[serde(rename = "S_dB")]
    s_db: Vec<Option<f64>>,
    stable: Vec<Option<bool>>,
    error: Vec<Option<&'a str>>,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    metadata: &'a SweepMetadata,
    columns: JsonColumns<'a>,
}

/// Metadata plus column arrays.
pub fn to_json(result: &SweepResult) -> String {
    let rows = &result.rows;
    let doc = JsonDocument {
        metadata: &result.metadata,
        columns: JsonColumns {
            axis1: rows.iter().map(|r| r.axis1).collect(),
            axis2: result
                .metadata
                .grid
                .axis2
                .map(|_| rows.iter().map(|r| r.axis2.unwrap_or(f64::NAN)).collect()),
            s: rows.iter().map(|r| r.s).collect(),
            s_db: rows.iter().map(|r| r.s_db).collect(),
            stable: rows.iter().map(|r| r.stable).collect(),
            error: rows.iter().map(|r| r.error.as_deref()).collect(),
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("sweep result serializes");
    s.push('\n');
    s
}

pub fn render(result: &SweepResult, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(result),
        OutputFormat::Json => to_json(result),
    }
}

/// Path of the metadata file written next to a CSV output.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes the result to `path`. CSV output gets a `<path>.meta.json`
/// companion holding the metadata.
pub fn emit(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render(result, format).as_bytes())?;
    if format == OutputFormat::Csv {
        let mut meta = serde_json::to_string_pretty(&result.metadata).expect("metadata serializes");
        meta.push('\n');
        std::fs::write(metadata_path(path), meta)?;
    }
    Ok(())
}

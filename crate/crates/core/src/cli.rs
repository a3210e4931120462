//! Experiment runner behind the `purity-sieve` binary.
//!
//! A run is described by one JSON document, optionally patched with
//! `--set dotted.key=value` overrides. Floating-point output is printed with
//! 17 significant digits in `%g` style, so integers such as `0` and `1`
//! print without a fraction.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{CentralSpin, Evolver, FactorizedModel, PuritySeries};
use crate::error::Error;
use crate::optim::NelderMeadConfig;
use crate::oscillator::{
    omega_tilde, qbm_pointer_state, qbm_sieve, transform_model, GaussianState, QbmParams, QbmSieveConfig,
};
use crate::qcore::{DensityMatrix, Ket, C64};
use crate::sieve::{
    bloch_angles, dispersion_integral, modified_sieve, numeric_second_derivative, self_period, short_time_coefficient,
    SieveConfig, StateChart, MIN_STEPS,
};

/// Largest bath for which the exact simulation is attempted.
pub const MAX_BATH_SPINS: usize = 12;
/// Relative error allowed between analytic and numeric `𝔓̈(0)`.
pub const SHORT_TIME_THRESHOLD: f64 = 1e-3;
/// Absolute bound on `|𝔓̈(0)|` when the analytic coefficient vanishes.
pub const ZERO_CURVATURE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "fig1")]
    Fig1,
    #[serde(rename = "short-time")]
    ShortTime,
    #[serde(rename = "spin-sieve")]
    SpinSieve,
    #[serde(rename = "qbm-sieve")]
    QbmSieve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinModelConfig {
    pub n: usize,
    pub omega: f64,
    pub epsilon: f64,
    /// Adds a second, longitudinal coupling term.
    pub epsilon_z: Option<f64>,
}

impl Default for SpinModelConfig {
    fn default() -> Self {
        Self { n: 6, omega: 1.0, epsilon: 0.1, epsilon_z: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QbmConfig {
    pub mass: f64,
    pub bath_mass: f64,
    pub bath_size: usize,
    pub trap_frequency: f64,
    pub bath_frequency: f64,
    /// Ratios `a/b` of the momentum and position weights for the sweep.
    pub weight_ratios: Vec<f64>,
}

impl Default for QbmConfig {
    fn default() -> Self {
        Self {
            mass: 2.0,
            bath_mass: 0.5,
            bath_size: 4,
            trap_frequency: 1.0,
            bath_frequency: 1.0,
            weight_ratios: vec![0.01, 1.0, 100.0],
        }
    }
}

/// `"0z"`, `"1z"`, `"0x"`, `"1x"`, or a list of `[re, im]` amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Amplitudes(Vec<[f64; 2]>),
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Named("0z".into())
    }
}

impl StateSpec {
    pub fn to_ket(&self) -> Result<Ket, CliError> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps: Vec<C64> = match self {
            StateSpec::Named(name) => match name.as_str() {
                "0z" => vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                "1z" => vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                "0x" => vec![C64::new(h, 0.0), C64::new(h, 0.0)],
                "1x" => vec![C64::new(h, 0.0), C64::new(-h, 0.0)],
                other => return Err(CliError::config("state", format!("unknown named state {other:?}"))),
            },
            StateSpec::Amplitudes(list) => list.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
        };
        if amps.len() != 2 {
            return Err(CliError::config("state", format!("expected 2 amplitudes, found {}", amps.len())));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CliError::config("state", "amplitudes must be finite"));
        }
        Ket::normalized(nalgebra::DVector::from_vec(amps)).map_err(|e| CliError::config("state", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_max: f64,
    pub samples: usize,
    /// Upper end of the short-time fit window.
    pub fit_window: f64,
    pub fit_samples: usize,
    /// Central-difference step for `𝔓̈(0)`.
    pub derivative_step: f64,
    /// Horizon of the dispersion integral; one system period when unset.
    pub t_final: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_max: 40.0, samples: 400, fit_window: 0.3, fit_samples: 61, derivative_step: 1e-3, t_final: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Relative spread of simplex values at convergence.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iterations: NelderMeadConfig::default().max_iterations,
            tolerance: NelderMeadConfig::default().ftol,
        }
    }
}

impl OptimizerConfig {
    fn nelder_mead(&self) -> NelderMeadConfig {
        NelderMeadConfig { max_iterations: self.max_iterations, ftol: self.tolerance, ..NelderMeadConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub model: SpinModelConfig,
    #[serde(default)]
    pub qbm: QbmConfig,
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            model: SpinModelConfig::default(),
            qbm: QbmConfig::default(),
            state: StateSpec::default(),
            time: TimeConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            output: None,
        }
    }

    /// Parses a JSON document and applies `key=value` overrides.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::config("<document>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "<document>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        fn finite(field: &str, v: f64) -> Result<(), CliError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(field, "must be finite"))
            }
        }
        fn positive(field: &str, v: f64) -> Result<(), CliError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(field, format!("must be positive and finite, got {v}")))
            }
        }
        let m = &self.model;
        if m.n == 0 || m.n > MAX_BATH_SPINS {
            return Err(CliError::config("model.n", format!("must lie in 1..={MAX_BATH_SPINS}")));
        }
        finite("model.omega", m.omega)?;
        finite("model.epsilon", m.epsilon)?;
        if let Some(ez) = m.epsilon_z {
            finite("model.epsilon_z", ez)?;
        }
        let q = &self.qbm;
        positive("qbm.mass", q.mass)?;
        positive("qbm.bath_mass", q.bath_mass)?;
        positive("qbm.trap_frequency", q.trap_frequency)?;
        positive("qbm.bath_frequency", q.bath_frequency)?;
        if q.weight_ratios.is_empty() {
            return Err(CliError::config("qbm.weight_ratios", "must not be empty"));
        }
        for r in &q.weight_ratios {
            positive("qbm.weight_ratios", *r)?;
        }
        let t = &self.time;
        positive("time.t_max", t.t_max)?;
        if t.samples < 2 {
            return Err(CliError::config("time.samples", "must be at least 2"));
        }
        positive("time.fit_window", t.fit_window)?;
        if t.fit_samples < 4 {
            return Err(CliError::config("time.fit_samples", "must be at least 4"));
        }
        if !(t.derivative_step > 0.0 && t.derivative_step <= 0.1) {
            return Err(CliError::config("time.derivative_step", "must lie in (0, 0.1]"));
        }
        if let Some(tf) = t.t_final {
            positive("time.t_final", tf)?;
        }
        let o = &self.optimizer;
        if o.restarts == 0 {
            return Err(CliError::config("optimizer.restarts", "must be positive"));
        }
        if o.max_iterations == 0 {
            return Err(CliError::config("optimizer.max_iterations", "must be positive"));
        }
        positive("optimizer.tolerance", o.tolerance)?;
        self.state.to_ket()?;
        Ok(())
    }

    fn spin_model(&self) -> Result<FactorizedModel, CliError> {
        let mut spin = CentralSpin::new(self.model.n, self.model.omega, self.model.epsilon);
        spin.epsilon_z = self.model.epsilon_z;
        spin.build().map_err(CliError::from)
    }

    fn environment(&self) -> Result<DensityMatrix, CliError> {
        DensityMatrix::maximally_mixed(1 << self.model.n).map_err(CliError::from)
    }
}

fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| CliError::config(spec, "override must have the form key=value"))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::config(key, "malformed key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(CliError::config(parts[..i].join("."), "is not an object"));
        };
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map.entry(*part).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Simulation(Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), reason: reason.into() }
    }

    fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Unsupported(_) => 3,
            CliError::Io { .. } | CliError::Simulation(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnsupportedModel(m) => CliError::Unsupported(m),
            Error::InvalidArgument { name, reason } => CliError::config(name, reason),
            other => CliError::Simulation(other),
        }
    }
}

/// `%.17g`: 17 significant digits, trailing zeros dropped.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{x:.*}", (16 - exp) as usize))
    }
}

struct G17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for G17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_g17(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with `%.17g` numbers and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Highest power in the short-time fit.
pub const FIT_MAX_ORDER: usize = 6;

/// Least-squares fit of `1 − 𝔓 ≈ Σ_k a_k t^k` for `k = 2..=6`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortTimeFit {
    pub quadratic: f64,
    /// `a_2, a_3, …, a_6`
    pub coefficients: Vec<f64>,
    pub max_residual: f64,
}

pub fn fit_purity_loss(times: &[f64], purity: &[f64]) -> ShortTimeFit {
    let orders = 2..=FIT_MAX_ORDER;
    let scale = times.iter().fold(0.0_f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(times.len(), orders.clone().count(), |i, j| (times[i] / scale).powi(j as i32 + 2));
    let y = DVector::from_iterator(purity.len(), purity.iter().map(|p| 1.0 - p));
    let scaled = a.clone().svd(true, true).solve(&y, 1e-300).expect("SVD computed with both factors");
    let residual = &a * &scaled - &y;
    let coefficients: Vec<f64> = orders.zip(scaled.iter()).map(|(k, c)| c / scale.powi(k as i32)).collect();
    ShortTimeFit {
        quadratic: coefficients[0],
        coefficients,
        max_residual: residual.iter().fold(0.0, |m, r| m.max(r.abs())),
    }
}

fn linspace(end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| end * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinParameters {
    pub n: usize,
    pub omega: f64,
    pub epsilon: f64,
    pub environment: &'static str,
}

impl SpinParameters {
    fn of(cfg: &ExperimentConfig) -> Self {
        Self { n: cfg.model.n, omega: cfg.model.omega, epsilon: cfg.model.epsilon, environment: "maximally mixed" }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig1Summary {
    pub experiment: Experiment,
    pub parameters: SpinParameters,
    pub t_max: f64,
    pub samples: usize,
    pub fit_window: f64,
    pub fit_samples: usize,
    /// `c/2 = 2 δE² δS²` for |0z⟩.
    pub expected_quadratic_0z: f64,
    pub fit_0z: ShortTimeFit,
    pub fit_0x: ShortTimeFit,
    pub relative_deviation_0z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Output {
    pub series_0z: PuritySeries,
    pub series_0x: PuritySeries,
    pub summary: Fig1Summary,
}

impl Fig1Output {
    pub fn csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["t", "purity_0z", "purity_0x", "pmax_0z", "pmax_0x"]).expect("in-memory write");
        let (z, x) = (&self.series_0z, &self.series_0x);
        for i in 0..z.times.len() {
            w.write_record([z.times[i], z.values[i], x.values[i], z.pmax[i], x.pmax[i]].map(format_g17))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }
}

/// Purity of |0z⟩ and |0x⟩ over time.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Fig1Output, CliError> {
    let model = cfg.spin_model()?;
    let rho_e = cfg.environment()?;
    let evolver = Evolver::new(&model)?;
    let zero_z = StateSpec::Named("0z".into()).to_ket()?;
    let zero_x = StateSpec::Named("0x".into()).to_ket()?;
    let tz = evolver.trajectory(&zero_z, &rho_e)?;
    let tx = evolver.trajectory(&zero_x, &rho_e)?;

    let grid = linspace(cfg.time.t_max, cfg.time.samples);
    let series_0z = tz.purity_series(&grid);
    let series_0x = tx.purity_series(&grid);

    let fit_grid = linspace(cfg.time.fit_window, cfg.time.fit_samples);
    let fit_0z = fit_purity_loss(&fit_grid, &tz.purity_series(&fit_grid).values);
    let fit_0x = fit_purity_loss(&fit_grid, &tx.purity_series(&fit_grid).values);
    let expected = match short_time_coefficient(&model, &zero_z, &rho_e) {
        Ok(c) => c / 2.0,
        Err(Error::UnsupportedModel(_)) => f64::NAN,
        Err(e) => return Err(e.into()),
    };
    Ok(Fig1Output {
        series_0z,
        series_0x,
        summary: Fig1Summary {
            experiment: Experiment::Fig1,
            parameters: SpinParameters::of(cfg),
            t_max: cfg.time.t_max,
            samples: cfg.time.samples,
            fit_window: cfg.time.fit_window,
            fit_samples: cfg.time.fit_samples,
            expected_quadratic_0z: expected,
            relative_deviation_0z: (fit_0z.quadratic - expected).abs() / expected.abs(),
            fit_0z,
            fit_0x,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortTimeReport {
    pub experiment: Experiment,
    pub parameters: SpinParameters,
    pub state: [[f64; 2]; 2],
    /// `c = 4 δE² δS²`; the analytic `𝔓̈(0)` is `−c`.
    pub analytic_coefficient: f64,
    pub analytic_second_derivative: f64,
    pub numeric_second_derivative: f64,
    pub numeric_first_derivative: f64,
    pub derivative_step: f64,
    /// Absent when the analytic coefficient vanishes.
    pub relative_error: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub no_decoherence: bool,
}

pub fn run_short_time(cfg: &ExperimentConfig) -> Result<ShortTimeReport, CliError> {
    if cfg.model.epsilon_z.is_some() {
        return Err(CliError::Unsupported(
            "the short-time law applies to single-term interactions; unset model.epsilon_z".into(),
        ));
    }
    let model = cfg.spin_model()?;
    let rho_e = cfg.environment()?;
    let psi = cfg.state.to_ket()?;
    let c = short_time_coefficient(&model, &psi, &rho_e)?;
    let d = numeric_second_derivative(&model, &psi, &rho_e, cfg.time.derivative_step)?;
    let vanishing = c.abs() < 1e-12;
    let relative_error = (!vanishing).then(|| (d.second + c).abs() / c);
    let pass = match relative_error {
        Some(r) => r < SHORT_TIME_THRESHOLD,
        None => d.second.abs() < ZERO_CURVATURE_THRESHOLD,
    };
    let a = psi.amplitudes();
    Ok(ShortTimeReport {
        experiment: Experiment::ShortTime,
        parameters: SpinParameters::of(cfg),
        state: [[a[0].re, a[0].im], [a[1].re, a[1].im]],
        analytic_coefficient: c,
        analytic_second_derivative: -c,
        numeric_second_derivative: d.second,
        numeric_first_derivative: d.first,
        derivative_step: cfg.time.derivative_step,
        relative_error,
        threshold: if vanishing { ZERO_CURVATURE_THRESHOLD } else { SHORT_TIME_THRESHOLD },
        pass,
        no_decoherence: cfg.model.epsilon == 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochPoint {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinRestart {
    pub start: BlochPoint,
    pub minimizer: BlochPoint,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinSieveReport {
    pub experiment: Experiment,
    pub parameters: SpinParameters,
    pub seed: u64,
    pub kappa: Vec<f64>,
    pub t_final: f64,
    pub minimizer: BlochPoint,
    pub objective: f64,
    pub converged: bool,
    pub degenerate: bool,
    pub ambiguous: bool,
    pub objective_0z: f64,
    pub objective_0x: f64,
    pub restarts: Vec<SpinRestart>,
}

pub fn run_spin_sieve(cfg: &ExperimentConfig) -> Result<SpinSieveReport, CliError> {
    let model = cfg.spin_model()?;
    let rho_e = cfg.environment()?;
    let t_final = match cfg.time.t_final {
        Some(t) => t,
        None => self_period(&model)
            .ok_or_else(|| CliError::config("time.t_final", "system Hamiltonian has no period; set it explicitly"))?,
    };
    let sieve_cfg = SieveConfig {
        restarts: cfg.optimizer.restarts,
        seed: cfg.seed,
        nelder_mead: cfg.optimizer.nelder_mead(),
        ..SieveConfig::default()
    };
    let r = modified_sieve(&model, &rho_e, t_final, &StateChart::bloch(), &sieve_cfg)?;
    let kappa = crate::sieve::effective_hamiltonian(&model, &rho_e)?.kappa;
    let at = |name: &str| -> Result<f64, CliError> {
        let psi = StateSpec::Named(name.into()).to_ket()?;
        Ok(dispersion_integral(&model, &psi, &rho_e, t_final, MIN_STEPS)?)
    };
    let point = |p: &[f64]| BlochPoint { theta: p[0], phi: p[1] };
    let (theta, phi) = bloch_angles(&r.state)?;
    Ok(SpinSieveReport {
        experiment: Experiment::SpinSieve,
        parameters: SpinParameters::of(cfg),
        seed: cfg.seed,
        kappa,
        t_final,
        minimizer: BlochPoint { theta, phi },
        objective: r.objective,
        converged: r.converged,
        degenerate: r.degenerate,
        ambiguous: r.ambiguous,
        objective_0z: at("0z")?,
        objective_0x: at("0x")?,
        restarts: r
            .history
            .iter()
            .map(|h| SpinRestart {
                start: point(&h.start),
                minimizer: point(&h.parameters),
                objective: h.objective,
                converged: h.converged,
                iterations: h.iterations,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub dx2: f64,
    pub dp2: f64,
    pub sxp: f64,
    pub uncertainty: f64,
}

impl From<&GaussianState> for Moments {
    fn from(g: &GaussianState) -> Self {
        Self { dx2: g.dx2, dp2: g.dp2, sxp: g.sxp, uncertainty: g.uncertainty() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRow {
    pub ratio: f64,
    pub minimizer: Moments,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QbmSieveReport {
    pub experiment: Experiment,
    pub parameters: QbmConfig,
    pub seed: u64,
    pub omega_tilde: f64,
    pub analytic: Moments,
    /// Minimizer at equal weights.
    pub minimizer: Moments,
    pub objective: f64,
    pub converged: bool,
    pub relative_deviation_dx2: f64,
    pub relative_deviation_dp2: f64,
    pub uncertainty_deviation: f64,
    pub weight_sweep: Vec<WeightRow>,
    /// Largest pairwise relative `dx2` difference across the sweep.
    pub sweep_max_deviation: f64,
}

pub fn run_qbm_sieve(cfg: &ExperimentConfig) -> Result<QbmSieveReport, CliError> {
    let q = &cfg.qbm;
    let params =
        QbmParams::new(q.mass, q.bath_mass, q.bath_size, q.trap_frequency, q.bath_frequency).map_err(|e| match e {
            Error::InvalidArgument { name, reason } => CliError::config(format!("qbm.{name}"), reason),
            other => other.into(),
        })?;
    let model = transform_model(&params);
    let w = omega_tilde(&params);
    let analytic = qbm_pointer_state(model.mass, w)?;
    let sieve_cfg =
        QbmSieveConfig { restarts: cfg.optimizer.restarts, seed: cfg.seed, nelder_mead: cfg.optimizer.nelder_mead() };
    let base = qbm_sieve(model.mass, w, (1.0, 1.0), &sieve_cfg)?;
    let mut weight_sweep = Vec::with_capacity(q.weight_ratios.len());
    for &ratio in &q.weight_ratios {
        let r = qbm_sieve(model.mass, w, (ratio, 1.0), &sieve_cfg)?;
        weight_sweep.push(WeightRow {
            ratio,
            minimizer: Moments::from(&r.state),
            objective: r.objective,
            converged: r.converged,
        });
    }
    let mut sweep_max_deviation: f64 = 0.0;
    for a in &weight_sweep {
        for b in &weight_sweep {
            sweep_max_deviation = sweep_max_deviation.max((a.minimizer.dx2 - b.minimizer.dx2).abs() / analytic.dx2);
        }
    }
    Ok(QbmSieveReport {
        experiment: Experiment::QbmSieve,
        parameters: q.clone(),
        seed: cfg.seed,
        omega_tilde: w,
        analytic: Moments::from(&analytic),
        minimizer: Moments::from(&base.state),
        objective: base.objective,
        converged: base.converged,
        relative_deviation_dx2: (base.state.dx2 - analytic.dx2).abs() / analytic.dx2,
        relative_deviation_dp2: (base.state.dp2 - analytic.dp2).abs() / analytic.dp2,
        uncertainty_deviation: (base.state.uncertainty() - 0.25).abs(),
        weight_sweep,
        sweep_max_deviation,
    })
}

/// Files written by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub paths: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Path of the JSON summary that accompanies a fig1 CSV.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

/// Runs the configured experiment and writes its output. Reports go to
/// stdout when no output path is configured; fig1 defaults to `fig1.csv`.
pub fn execute(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<Written, CliError> {
    let report = match cfg.experiment {
        Experiment::Fig1 => {
            let out = run_fig1(cfg)?;
            let csv_path = cfg.output.clone().unwrap_or_else(|| PathBuf::from("fig1.csv"));
            let json_path = summary_path(&csv_path);
            write_file(&csv_path, &out.csv())?;
            write_file(&json_path, &to_json(&out.summary))?;
            return Ok(Written { paths: vec![csv_path, json_path] });
        }
        Experiment::ShortTime => to_json(&run_short_time(cfg)?),
        Experiment::SpinSieve => to_json(&run_spin_sieve(cfg)?),
        Experiment::QbmSieve => to_json(&run_qbm_sieve(cfg)?),
    };
    match &cfg.output {
        Some(path) => {
            write_file(path, &report)?;
            Ok(Written { paths: vec![path.clone()] })
        }
        None => {
            stdout.write_all(report.as_bytes()).map_err(|e| CliError::io("writing stdout", e))?;
            Ok(Written { paths: Vec::new() })
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "purity-sieve", version, about = "Pointer-state experiments on small open quantum systems")]
pub struct Args {
    /// JSON experiment configuration.
    pub config: PathBuf,
    /// Override a config value, e.g. `--set model.n=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output path; takes precedence over the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let text =
        fs::read_to_string(&args.config).map_err(|e| CliError::io(format!("reading {}", args.config.display()), e))?;
    let mut cfg = ExperimentConfig::from_json(&text, &args.overrides)?;
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = load(&args).and_then(|cfg| execute(&cfg, &mut io::stdout().lock()));
    match result {
        Ok(w) => {
            for p in w.paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        for (x, s) in [
            (0.0, "0"),
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (0.5, "0.5"),
            (-2.25, "-2.25"),
            (1e-5, "1.0000000000000001e-05"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (std::f64::consts::PI, "3.1415926535897931"),
            (1.0000000000000002, "1.0000000000000002"),
        ] {
            assert_eq!(format_g17(x), s, "{x}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, 0.12, 2.0_f64.sqrt()] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "fig1"}"#, &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(Experiment::Fig1));
        assert_eq!((cfg.model.n, cfg.model.omega, cfg.model.epsilon), (6, 1.0, 0.1));
        assert_eq!((cfg.time.t_max, cfg.time.samples), (40.0, 400));
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let sets = ["model.n=3".to_string(), "state=0x".into(), "time.t_final=2.5".into(), "seed=9".into()];
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "short-time"}"#, &sets).unwrap();
        assert_eq!(cfg.model.n, 3);
        assert_eq!(cfg.state, StateSpec::Named("0x".into()));
        assert_eq!(cfg.time.t_final, Some(2.5));
        assert_eq!(cfg.seed, 9);
    }

    fn field_of(e: CliError) -> String {
        match e {
            CliError::Config { field, .. } => field,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn config_errors_name_the_field() {
        let parse = |s: &str, sets: &[&str]| {
            let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
            ExperimentConfig::from_json(s, &sets).unwrap_err()
        };
        assert_eq!(field_of(parse(r#"{"experiment": "fig1", "model": {"n": 0}}"#, &[])), "model.n");
        assert_eq!(field_of(parse(r#"{"experiment": "fig1"}"#, &["time.samples=1"])), "time.samples");
        assert_eq!(field_of(parse(r#"{"experiment": "fig1"}"#, &["model.omega=\"fast\""])), "model.omega");
        assert!(field_of(parse(r#"{"experiment": "fig1", "model": {"bogus": 1}}"#, &[])).starts_with("model"));
        assert_eq!(field_of(parse(r#"{"experiment": "fig1"}"#, &["qbm.mass=-1"])), "qbm.mass");
        assert_eq!(field_of(parse(r#"{"experiment": "fig1"}"#, &["state=2y"])), "state");
        assert_eq!(field_of(parse(r#"{"experiment": "nope"}"#, &[])), "experiment");
        assert_eq!(field_of(parse(r#"{"experiment": "fig1"}"#, &["seed.x=1"])), "seed");
        assert_eq!(parse(r#"{"experiment": "fig1"}"#, &["samples"]).exit_code(), 2);
    }

    #[test]
    fn explicit_amplitudes_are_normalized() {
        let k = StateSpec::Amplitudes(vec![[3.0, 0.0], [0.0, 4.0]]).to_ket().unwrap();
        assert!((k.amplitudes()[0].re - 0.6).abs() < 1e-15);
        assert!((k.amplitudes()[1].im - 0.8).abs() < 1e-15);
        assert!(StateSpec::Amplitudes(vec![[1.0, 0.0]]).to_ket().is_err());
        assert!(StateSpec::Amplitudes(vec![[0.0, 0.0], [0.0, 0.0]]).to_ket().is_err());
    }

    #[test]
    fn fit_recovers_polynomial() {
        let t: Vec<f64> = (0..31).map(|i| 0.01 * i as f64).collect();
        let p: Vec<f64> = t.iter().map(|t| 1.0 - 0.12 * t * t + 0.5 * t.powi(3) - 0.3 * t.powi(4)).collect();
        let f = fit_purity_loss(&t, &p);
        assert!((f.quadratic - 0.12).abs() < 1e-9);
        assert!((f.coefficients[1] + 0.5).abs() < 1e-8);
        assert!((f.coefficients[2] - 0.3).abs() < 1e-7);
        assert!(f.coefficients[3].abs() < 1e-5 && f.coefficients[4].abs() < 1e-5);
    }

    #[test]
    fn short_time_rejects_two_term_model() {
        let cfg =
            ExperimentConfig::from_json(r#"{"experiment": "short-time"}"#, &["model.epsilon_z=0.05".into()]).unwrap();
        assert_eq!(run_short_time(&cfg).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn short_time_flags_zero_coupling() {
        let sets = ["model.epsilon=0".to_string(), "model.n=2".into()];
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "short-time"}"#, &sets).unwrap();
        let r = run_short_time(&cfg).unwrap();
        assert!(r.no_decoherence && r.pass);
        assert_eq!(r.analytic_coefficient, 0.0);
        assert!(r.relative_error.is_none());
    }

    #[test]
    fn qbm_report_without_bath() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "qbm-sieve", "qbm": {"bath_size": 0, "mass": 1.5, "trap_frequency": 0.8}}"#,
            &[],
        )
        .unwrap();
        let r = run_qbm_sieve(&cfg).unwrap();
        assert_eq!(r.omega_tilde, 0.8);
        assert!((r.analytic.dx2 - 1.0 / (2.0 * 1.5 * 0.8)).abs() < 1e-15);
        assert!(r.relative_deviation_dx2 < 1e-4);
    }
}

//! Decay experiments: configuration, initial data, sup-norm trackers and
//! log-log slope fits against the predicted rates `(1 + t)^{-1/4 - l/2}`.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{cfl_limit, duhamel_trajectory, integrate_rk4, linear_trajectory, Trajectory};
use crate::grid::Grid;
use crate::littlewood_paley::{BesovSpec, DyadicFilterBank};
use crate::model::{ModelParams, StateField};
use crate::stats::least_squares_line;

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.length, self.n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Gaussian,
    CompactBump,
    BandLimitedRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub kind: DataKind,
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSpec {
    Snapshots(Vec<f64>),
    LogRange(LogRange),
}

impl TimeSpec {
    pub fn times(&self) -> Result<Vec<f64>> {
        let t = match self {
            TimeSpec::Snapshots(t) => t.clone(),
            TimeSpec::LogRange(r) => {
                if !(r.start > 0.0 && r.end > r.start && r.count >= 2) {
                    return Err(Error::InvalidParameter(format!(
                        "log_range needs 0 < start < end and count >= 2, got {r:?}"
                    )));
                }
                crate::symbol::logspace(r.start, r.end, r.count)
            }
        };
        if t.is_empty() || t[0] < 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "snapshot times must be nonnegative and strictly increasing".into(),
            ));
        }
        Ok(t)
    }
}

/// One scalar tolerance for every norm, or one per requested norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tolerances {
    Uniform(f64),
    PerNorm(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub t_lo: f64,
    pub t_hi: f64,
    pub tolerances: Tolerances,
}

/// Norm families with a predicted decay exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSpace {
    /// `||d_x^k U||_{L^2}`, with `ell = k` a nonnegative integer.
    L2,
    /// `||Lambda^ell U||_{L^2}`.
    LambdaL2,
    /// `||Lambda^ell U||` in `B^{1/2-ell}_{2,1}` for `ell < 1/2`, in the
    /// homogeneous `B^0_{2,1}` for `ell = 1/2`.
    Besov,
}

impl NormSpace {
    pub fn label(self) -> &'static str {
        match self {
            NormSpace::L2 => "l2",
            NormSpace::LambdaL2 => "lambda-l2",
            NormSpace::Besov => "besov",
        }
    }
}

impl fmt::Display for NormSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRequest {
    pub ell: f64,
    pub space: NormSpace,
}

impl NormRequest {
    pub fn new(ell: f64, space: NormSpace) -> Result<Self> {
        let r = Self { ell, space };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.space {
            NormSpace::L2 => self.ell >= 0.0 && self.ell.fract() == 0.0,
            NormSpace::LambdaL2 => self.ell >= 0.0,
            NormSpace::Besov => (0.0..=0.5).contains(&self.ell),
        };
        if ok && self.ell.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "ell = {} is not valid for the {} norm",
                self.ell, self.space
            )))
        }
    }

    /// Predicted exponent `-1/4 - ell/2` (or `-1/4 - k/2`).
    pub fn predicted_slope(&self) -> f64 {
        -0.25 - 0.5 * self.ell
    }

    /// Besov space carrying `Lambda^ell U` for the [`NormSpace::Besov`] family.
    fn besov_space(&self) -> BesovSpec {
        if self.ell == 0.5 {
            BesovSpec::hb2_1(0.0)
        } else {
            BesovSpec::b2_1(0.5 - self.ell)
        }
    }
}

/// Evolution used by an experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact semigroup of the linearized system.
    #[default]
    Linear,
    /// RK4 on the quasilinear system.
    Nonlinear,
    /// Duhamel formula with an RK4-sourced forcing.
    Duhamel,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Mode::Linear),
            "nonlinear" => Ok(Mode::Nonlinear),
            "duhamel" => Ok(Mode::Duhamel),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

/// Experiment description, deserialized from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub data: DataSpec,
    pub times: TimeSpec,
    pub fit: FitSpec,
    #[serde(default)]
    pub norms: Vec<NormRequest>,
    #[serde(default)]
    pub mode: Mode,
    /// Time step for RK4 and Duhamel runs; defaults to the CFL limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference linear configuration: `L = 800`, `N = 2^14`, Gaussian data,
    /// 60 log-spaced snapshots in `[1, 400]`, fit window `[50, 400]`.
    pub fn reference() -> Self {
        Self {
            grid: GridSpec {
                length: 800.0,
                n: 1 << 14,
            },
            params: ModelParams::reference(),
            data: DataSpec {
                kind: DataKind::Gaussian,
                amplitude: 1e-2,
                width: 4.0,
                seed: 0,
            },
            times: TimeSpec::LogRange(LogRange {
                start: 1.0,
                end: 400.0,
                count: 60,
            }),
            fit: FitSpec {
                t_lo: 50.0,
                t_hi: 400.0,
                tolerances: Tolerances::PerNorm(vec![0.05, 0.08, 0.06]),
            },
            norms: vec![
                NormRequest { ell: 0.0, space: NormSpace::L2 },
                NormRequest { ell: 1.0, space: NormSpace::L2 },
                NormRequest { ell: 0.5, space: NormSpace::Besov },
            ],
            mode: Mode::Linear,
            dt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        let times = self.times.times()?;
        let FitSpec { t_lo, t_hi, .. } = self.fit;
        if !(t_lo >= 0.0 && t_hi > t_lo) {
            return Err(Error::InvalidParameter(format!(
                "fit window [{t_lo}, {t_hi}] is empty"
            )));
        }
        if t_lo < times[0] || t_hi > *times.last().unwrap() {
            return Err(Error::InvalidParameter(format!(
                "fit window [{t_lo}, {t_hi}] lies outside the snapshot range [{}, {}]",
                times[0],
                times.last().unwrap()
            )));
        }
        let limit = grid.length() / (2.0 * self.params.max_speed());
        if t_hi > limit {
            return Err(Error::WrapAround { t: t_hi, limit });
        }
        for n in &self.norms {
            n.validate()?;
        }
        self.tolerances()?;
        if !(self.data.amplitude.is_finite() && self.data.width > 0.0) {
            return Err(Error::InvalidParameter(
                "data amplitude must be finite and width positive".into(),
            ));
        }
        if let Some(dt) = self.dt {
            let limit = cfl_limit(&grid, &self.params);
            if !(dt > 0.0) || dt > limit {
                return Err(Error::Cfl { dt, limit });
            }
        }
        if self.mode != Mode::Linear {
            self.params.require_nonlinear_capable()?;
        }
        Ok(())
    }

    /// Tolerance for each requested norm.
    pub fn tolerances(&self) -> Result<Vec<f64>> {
        let tol = match &self.fit.tolerances {
            Tolerances::Uniform(t) => vec![*t; self.norms.len()],
            Tolerances::PerNorm(t) if t.len() == self.norms.len() => t.clone(),
            Tolerances::PerNorm(t) => {
                return Err(Error::InvalidParameter(format!(
                    "{} tolerances given for {} norms",
                    t.len(),
                    self.norms.len()
                )))
            }
        };
        if tol.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParameter("tolerances must be nonnegative".into()));
        }
        Ok(tol)
    }

    pub fn time_step(&self, grid: &Grid) -> f64 {
        self.dt.unwrap_or_else(|| cfl_limit(grid, &self.params))
    }
}

/// Initial data together with the norms used to normalize results.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub state: StateField,
    /// Sum over components of `||.||_{L^1}`.
    pub l1_norm: f64,
    /// Sum over components of `||.||_{B^{3/2}_{2,1}}`.
    pub besov_norm: f64,
    /// `||U0||_{B^{3/2}_{2,1}} + ||U0||_{hB^{-1/2}_{2,inf}}`.
    pub data_norm: f64,
}

fn profile(spec: &DataSpec, grid: &Grid) -> Result<Vec<f64>> {
    let x = grid.x();
    let w = spec.width;
    Ok(match spec.kind {
        DataKind::Gaussian => x.iter().map(|x| (-(x / w).powi(2)).exp()).collect(),
        DataKind::CompactBump => {
            if w >= grid.length() / 4.0 {
                return Err(Error::InvalidParameter(format!(
                    "bump width {w} must be below L/4 = {}",
                    grid.length() / 4.0
                )));
            }
            if w < 4.0 * grid.dx() {
                return Err(Error::InvalidParameter(format!(
                    "bump width {w} is not resolved by dx = {}",
                    grid.dx()
                )));
            }
            x.iter()
                .map(|x| {
                    let r = x / w;
                    if r.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - r * r)).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        DataKind::BandLimitedRandom => unreachable!("random data is generated per component"),
    })
}

/// Random field with modes `0 < |xi| <= 1/width`, unit peak.
fn random_band(grid: &Grid, width: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = grid.n();
    let cutoff = 1.0 / width;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n / 2 {
        if grid.xi(i) <= cutoff {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            coeffs[i] = c;
            coeffs[n - i] = c.conj();
        }
    }
    let f: Vec<f64> = grid.inverse_complex(&coeffs)?.iter().map(|c| c.re).collect();
    let peak = grid.lp_norm(&f, f64::INFINITY);
    if peak == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "band 1/width = {cutoff} holds no mode of the grid (dxi = {})",
            grid.dxi()
        )));
    }
    Ok(f.iter().map(|v| v / peak).collect())
}

/// Builds `U0` with every component equal to the amplitude times a unit-peak
/// profile. Random data draws an independent profile per component.
pub fn initial_data(spec: &DataSpec, grid: &Grid) -> Result<InitialData> {
    if !(spec.width > 0.0) {
        return Err(Error::InvalidParameter(format!("width must be positive, got {}", spec.width)));
    }
    let comps: [Vec<f64>; 4] = match spec.kind {
        DataKind::BandLimitedRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut out: [Vec<f64>; 4] = Default::default();
            for c in out.iter_mut() {
                *c = random_band(grid, spec.width, &mut rng)?;
            }
            out
        }
        _ => {
            let p = profile(spec, grid)?;
            std::array::from_fn(|_| p.clone())
        }
    };
    let comps = comps.map(|c| c.iter().map(|v| spec.amplitude * v).collect());
    let state = StateField::from_components(grid.clone(), comps)?;
    let bank = DyadicFilterBank::new(grid)?;
    let l1_norm = state.components().iter().map(|c| grid.lp_norm(c, 1.0)).sum();
    let besov_norm = vector_besov(&bank, &state, &BesovSpec::b2_1(1.5))?;
    let neg = BesovSpec::new(-0.5, 2.0, f64::INFINITY, true)?;
    let data_norm = besov_norm + vector_besov(&bank, &state, &neg)?;
    Ok(InitialData {
        state,
        l1_norm,
        besov_norm,
        data_norm,
    })
}

fn vector_besov(bank: &DyadicFilterBank, state: &StateField, spec: &BesovSpec) -> Result<f64> {
    state.components().iter().map(|c| bank.besov_norm(c, spec)).sum()
}

/// Evaluates decay norms of snapshots.
pub struct NormEvaluator {
    bank: DyadicFilterBank,
}

impl NormEvaluator {
    pub fn new(grid: &Grid) -> Result<Self> {
        Ok(Self {
            bank: DyadicFilterBank::new(grid)?,
        })
    }

    pub fn bank(&self) -> &DyadicFilterBank {
        &self.bank
    }

    fn spectra(&self, state: &StateField) -> Result<Vec<Vec<Complex64>>> {
        let grid = self.bank.grid();
        state
            .components()
            .iter()
            .map(|c| Ok(grid.transform(c)?.coeffs))
            .collect()
    }

    pub fn evaluate(&self, state: &StateField, req: &NormRequest) -> Result<f64> {
        let grid = self.bank.grid();
        let spectra = self.spectra(state)?;
        match req.space {
            NormSpace::L2 => {
                let k = req.ell as u32;
                let sq: f64 = spectra
                    .iter()
                    .map(|s| {
                        let d: Vec<Complex64> = s
                            .iter()
                            .enumerate()
                            .map(|(i, c)| c * crate::grid::deriv_factor(grid.derivative_xi(i), k))
                            .collect();
                        grid.parseval_norm_sq(&d)
                    })
                    .sum();
                Ok(sq.sqrt())
            }
            NormSpace::LambdaL2 => {
                let sq: f64 = spectra
                    .iter()
                    .map(|s| {
                        let d: Vec<Complex64> = s
                            .iter()
                            .enumerate()
                            .map(|(i, c)| c * grid.xi(i).abs().powf(req.ell))
                            .collect();
                        grid.parseval_norm_sq(&d)
                    })
                    .sum();
                Ok(sq.sqrt())
            }
            NormSpace::Besov => {
                let spec = req.besov_space();
                spectra
                    .iter()
                    .map(|s| self.bank.besov_norm_spectrum(s, &spec, req.ell))
                    .sum()
            }
        }
    }

    pub fn series(&self, traj: &Trajectory, req: &NormRequest) -> Result<Vec<f64>> {
        traj.states.par_iter().map(|s| self.evaluate(s, req)).collect()
    }
}

/// Least-squares fit of `ln value` against `ln(1 + t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub samples: usize,
}

pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DecayFloor { t, value: v });
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in [{lo}, {hi}], at least {MIN_FIT_SAMPLES} needed",
            xs.len()
        )));
    }
    let line = least_squares_line(&xs, &ys)
        .ok_or_else(|| Error::InsufficientData("degenerate fit window".into()))?;
    Ok(DecayFit {
        slope: line.slope,
        intercept: line.intercept,
        rms: line.rms,
        samples: xs.len(),
    })
}

/// Verdict for one requested norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub norm: NormSpace,
    pub ell: f64,
    pub slope: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub residual: f64,
    pub pass: bool,
}

impl DecayFitReport {
    pub fn new(req: &NormRequest, fit: &DecayFit, tolerance: f64) -> Self {
        let predicted = req.predicted_slope();
        Self {
            norm: req.space,
            ell: req.ell,
            slope: fit.slope,
            predicted,
            tolerance,
            residual: fit.rms,
            pass: (fit.slope - predicted).abs() <= tolerance,
        }
    }
}

/// Running suprema `E0(t)` and `E1(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupNormTracker {
    pub times: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
}

/// `E0(t) = sup ||U||_{B^{3/2}_{2,1}}` and
/// `E1(t) = sup_{l in {0, 1/4}} sup (1+tau)^{1/4+l/2} ||Lambda^l U||_{B^{1/2-l}_{2,1}}
///        + sup (1+tau)^{1/2} ||Lambda^{1/2} U||_{hB^0_{2,1}}`,
pub fn track_supnorms(traj: &Trajectory) -> Result<SupNormTracker> {
    if traj.states.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let eval = NormEvaluator::new(traj.grid())?;
    let b32 = BesovSpec::b2_1(1.5);
    let reqs = [
        NormRequest { ell: 0.0, space: NormSpace::Besov },
        NormRequest { ell: 0.25, space: NormSpace::Besov },
        NormRequest { ell: 0.5, space: NormSpace::Besov },
    ];
    let rows = traj
        .states
        .par_iter()
        .zip(&traj.times)
        .map(|(s, &t)| {
            let e0 = vector_besov(eval.bank(), s, &b32)?;
            let mut w = [0.0; 3];
            for (k, r) in reqs.iter().enumerate() {
                w[k] = (1.0 + t).powf(-r.predicted_slope()) * eval.evaluate(s, r)?;
            }
            Ok((e0, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut e0 = Vec::with_capacity(rows.len());
    let mut e1 = Vec::with_capacity(rows.len());
    let (mut m0, mut low, mut top) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (b, w) in rows {
        m0 = m0.max(b);
        low = low.max(w[0]).max(w[1]);
        top = top.max(w[2]);
        e0.push(m0);
        e1.push(low + top);
    }
    Ok(SupNormTracker {
        times: traj.times.clone(),
        e0,
        e1,
    })
}

/// Regularity-loss sample: decay of shell-localized data at `2^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellDecay {
    pub q: i32,
    pub xi: f64,
    /// Log-log slope of `||U||_{L^2}`, `None` once the signal sits at
    /// round-off level inside the window.
    pub slope: Option<f64>,
    /// `ln(||U(t_hi)|| / ||U(t_lo)||)`.
    pub log_drop: f64,
}

/// Everything produced by one suite run.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub reports: Vec<DecayFitReport>,
    pub series: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub supnorms: SupNormTracker,
    pub initial_besov_norm: f64,
    pub initial_data_norm: f64,
    /// Present for `a != 1` linear runs.
    pub regularity_loss: Option<Vec<ShellDecay>>,
}

impl SuiteOutcome {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Evolves `u0` and records snapshots at `times`. Linear mode uses the
/// linearization of `params`; Duhamel snapshots are rounded to multiples of
/// the step.
pub fn evolve(
    mode: Mode,
    params: &ModelParams,
    u0: &StateField,
    times: &[f64],
    dt: Option<f64>,
) -> Result<Trajectory> {
    let grid = u0.grid();
    let dt = dt.unwrap_or_else(|| cfl_limit(grid, params));
    match mode {
        Mode::Linear => {
            let lin = ModelParams::linear(params.a(), params.gamma())?;
            linear_trajectory(u0, times, &lin)
        }
        Mode::Nonlinear => {
            let t_end = *times
                .last()
                .ok_or_else(|| Error::InsufficientData("no snapshot times".into()))?;
            integrate_rk4(u0, t_end, dt, times, params)
        }
        Mode::Duhamel => {
            let snapped: Vec<f64> = times.iter().map(|t| (t / dt).round() * dt).collect();
            duhamel_trajectory(u0, &snapped, dt, params)
        }
    }
}

/// Runs the trajectory requested by the configuration.
pub fn run_trajectory(cfg: &ExperimentConfig, u0: &StateField) -> Result<Trajectory> {
    evolve(cfg.mode, &cfg.params, u0, &cfg.times.times()?, cfg.dt)
}

/// Configuration for a plain evolution run; any experiment configuration
/// also parses as one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub grid: GridSpec,
    pub params: ModelParams,
    pub data: DataSpec,
    pub times: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl EvolveConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.grid.build()?;
        cfg.times.times()?;
        Ok(cfg)
    }

    /// Snapshot times with `t = 0` prepended when absent.
    pub fn times_from_zero(&self) -> Result<Vec<f64>> {
        let mut t = self.times.times()?;
        if t[0] > 0.0 {
            t.insert(0, 0.0);
        }
        Ok(t)
    }
}

fn fit_reports(cfg: &ExperimentConfig, traj: &Trajectory, u0: &InitialData) -> Result<SuiteOutcome> {
    let eval = NormEvaluator::new(traj.grid())?;
    let tol = cfg.tolerances()?;
    let window = (cfg.fit.t_lo, cfg.fit.t_hi);
    let mut reports = Vec::with_capacity(cfg.norms.len());
    let mut series = Vec::with_capacity(cfg.norms.len());
    for (req, tol) in cfg.norms.iter().zip(tol) {
        let values = eval.series(traj, req)?;
        let fit = fit_decay(&traj.times, &values, window)?;
        reports.push(DecayFitReport::new(req, &fit, tol));
        series.push(values);
    }
    Ok(SuiteOutcome {
        reports,
        series,
        times: traj.times.clone(),
        supnorms: track_supnorms(traj)?,
        initial_besov_norm: u0.besov_norm,
        initial_data_norm: u0.data_norm,
        regularity_loss: None,
    })
}

/// Linear semigroup suite; for `a != 1` also reports the decay of
/// shell-localized data at increasing frequency.
pub fn run_linear_decay_suite(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Linear;
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let u0 = initial_data(&cfg.data, &grid)?;
    let traj = run_trajectory(&cfg, &u0.state)?;
    let mut out = fit_reports(&cfg, &traj, &u0)?;
    if cfg.params.a() != 1.0 {
        out.regularity_loss = Some(regularity_loss_trend(&cfg, &grid, 0..=3)?);
    }
    Ok(out)
}

/// RK4 suite on the quasilinear system.
pub fn run_nonlinear_decay_suite(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Nonlinear;
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let u0 = initial_data(&cfg.data, &grid)?;
    let traj = run_trajectory(&cfg, &u0.state)?;
    fit_reports(&cfg, &traj, &u0)
}

/// Dispatches on the configured mode.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    match cfg.mode {
        Mode::Linear => run_linear_decay_suite(cfg),
        _ => {
            cfg.validate()?;
            let grid = cfg.grid.build()?;
            let u0 = initial_data(&cfg.data, &grid)?;
            let traj = run_trajectory(cfg, &u0.state)?;
            fit_reports(cfg, &traj, &u0)
        }
    }
}

/// Runs independent configurations in parallel.
pub fn run_suites(cfgs: &[ExperimentConfig]) -> Vec<Result<SuiteOutcome>> {
    cfgs.par_iter().map(run_suite).collect()
}

/// Decay of data `cos(1.5 * 2^q x) exp(-(x/w)^2)` with `w = L/16`, for each `q`.
pub fn regularity_loss_trend(
    cfg: &ExperimentConfig,
    grid: &Grid,
    shells: std::ops::RangeInclusive<i32>,
) -> Result<Vec<ShellDecay>> {
    let lin = ModelParams::linear(cfg.params.a(), cfg.params.gamma())?;
    let times = cfg.times.times()?;
    let window = (cfg.fit.t_lo, cfg.fit.t_hi);
    let w = grid.length() / 16.0;
    let x = grid.x();
    let req = NormRequest { ell: 0.0, space: NormSpace::L2 };
    let eval = NormEvaluator::new(grid)?;
    shells
        .map(|q| {
            let xi = 1.5 * 2f64.powi(q);
            if xi > 0.5 * grid.nyquist() {
                return Err(Error::InvalidParameter(format!(
                    "shell 2^{q} is not resolved by the grid"
                )));
            }
            let f: Vec<f64> = x.iter().map(|x| (xi * x).cos() * (-(x / w).powi(2)).exp()).collect();
            let u0 = StateField::new(grid.clone(), f.clone(), f.clone(), f.clone(), f)?;
            let traj = linear_trajectory(&u0, &times, &lin)?;
            let values = eval.series(&traj, &req)?;
            let floor = 1e-12 * eval.evaluate(&u0, &req)?;
            let inside: Vec<(f64, f64)> = times
                .iter()
                .zip(&values)
                .filter(|(t, _)| **t >= window.0 && **t <= window.1)
                .map(|(t, v)| (*t, *v))
                .collect();
            let (first, last) = match (inside.first(), inside.last()) {
                (Some(a), Some(b)) => (a.1, b.1),
                _ => return Err(Error::InsufficientData("empty fit window".into())),
            };
            let slope = if inside.iter().all(|(_, v)| *v > floor) {
                Some(fit_decay(&times, &values, window)?.slope)
            } else {
                None
            };
            Ok(ShellDecay {
                q,
                xi,
                slope,
                log_drop: (last / first).ln(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference();
        cfg.grid = GridSpec { length: 200.0, n: 1024 };
        cfg.times = TimeSpec::LogRange(LogRange { start: 1.0, end: 100.0, count: 30 });
        cfg.fit.t_lo = 20.0;
        cfg.fit.t_hi = 100.0;
        cfg
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::reference();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn config_schema() {
        let text = r#"{
            "grid": {"L": 100, "N": 256},
            "params": {"a": 1, "gamma": 1, "sigma": "sinh"},
            "data": {"kind": "compact-bump", "amplitude": 0.01, "width": 3, "seed": 1},
            "times": {"snapshots": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]},
            "fit": {"t_lo": 1, "t_hi": 10, "tolerances": 0.1},
            "norms": [{"ell": 0, "space": "l2"}, {"ell": 0.5, "space": "besov"}]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.mode, Mode::Linear);
        assert_eq!(cfg.tolerances().unwrap(), vec![0.1, 0.1]);
        assert_eq!(cfg.times.times().unwrap().len(), 10);
    }

    #[test]
    fn wrap_around_guard() {
        let mut cfg = small_cfg();
        cfg.fit.t_hi = 100.0;
        cfg.grid.length = 150.0;
        assert!(matches!(cfg.validate(), Err(Error::WrapAround { .. })));
    }

    #[test]
    fn window_outside_snapshots() {
        let mut cfg = small_cfg();
        cfg.fit.t_lo = 0.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tolerance_count_mismatch() {
        let mut cfg = small_cfg();
        cfg.fit.tolerances = Tolerances::PerNorm(vec![0.1]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bad_norm_requests() {
        assert!(NormRequest::new(0.5, NormSpace::L2).is_err());
        assert!(NormRequest::new(0.75, NormSpace::Besov).is_err());
        assert!(NormRequest::new(-0.1, NormSpace::LambdaL2).is_err());
        assert_eq!(NormRequest::new(1.0, NormSpace::L2).unwrap().predicted_slope(), -0.75);
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let grid = Grid::new(100.0, 256).unwrap();
        for kind in [DataKind::Gaussian, DataKind::CompactBump, DataKind::BandLimitedRandom] {
            let spec = DataSpec { kind, amplitude: 0.0, width: 2.0, seed: 3 };
            let d = initial_data(&spec, &grid).unwrap();
            assert_eq!(d.state.l2_norm(), 0.0);
            assert_eq!(d.l1_norm, 0.0);
        }
    }

    #[test]
    fn amplitude_scaling_is_exact() {
        let grid = Grid::new(100.0, 256).unwrap();
        let spec = |amplitude| DataSpec { kind: DataKind::Gaussian, amplitude, width: 2.0, seed: 0 };
        let a = initial_data(&spec(1.0), &grid).unwrap();
        let b = initial_data(&spec(0.25), &grid).unwrap();
        assert!((b.l1_norm - 0.25 * a.l1_norm).abs() < 1e-15 * a.l1_norm);
        // L1 of exp(-(x/w)^2) is w sqrt(pi), four components
        assert!((a.l1_norm - 4.0 * 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn random_data_is_reproducible() {
        let grid = Grid::new(100.0, 256).unwrap();
        let spec = DataSpec { kind: DataKind::BandLimitedRandom, amplitude: 0.5, width: 1.0, seed: 42 };
        let a = initial_data(&spec, &grid).unwrap();
        let b = initial_data(&spec, &grid).unwrap();
        assert_eq!(a.state, b.state);
        let c = initial_data(&DataSpec { seed: 43, ..spec }, &grid).unwrap();
        assert_ne!(a.state, c.state);
        assert!((grid.lp_norm(a.state.v(), f64::INFINITY) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bump_width_limits() {
        let grid = Grid::new(100.0, 256).unwrap();
        let spec = DataSpec { kind: DataKind::CompactBump, amplitude: 1.0, width: 25.0, seed: 0 };
        assert!(initial_data(&spec, &grid).is_err());
        let ok = initial_data(&DataSpec { width: 10.0, ..spec }, &grid).unwrap();
        assert!(ok.state.v().iter().all(|v| *v >= 0.0 && *v <= 1.0));
    }

    #[test]
    fn exact_power_laws() {
        let t: Vec<f64> = (0..40).map(|k| 1.0 + 10.0 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (1.0 + t).powf(-0.25)).collect();
        let fit = fit_decay(&t, &v, (0.0, 1e9)).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-6);
        let v: Vec<f64> = t.iter().map(|t| 5.0 * (1.0 + t).powf(-0.75)).collect();
        let fit = fit_decay(&t, &v, (0.0, 1e9)).unwrap();
        assert!((fit.slope + 0.75).abs() < 1e-12);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
        assert!(fit.rms < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let mut v = vec![1.0; 20];
        assert!(matches!(fit_decay(&t, &v, (0.0, 5.0)), Err(Error::InsufficientData(_))));
        v[10] = 0.0;
        assert!(matches!(fit_decay(&t, &v, (0.0, 19.0)), Err(Error::DecayFloor { t, .. }) if t == 10.0));
        // outside the window the floor is ignored
        assert!(fit_decay(&t, &v, (11.0, 19.0)).is_ok());
    }

    #[test]
    fn supnorms_are_monotone_and_vanish_on_zero_data() {
        let cfg = small_cfg();
        let grid = cfg.grid.build().unwrap();
        let u0 = initial_data(&cfg.data, &grid).unwrap();
        let traj = run_trajectory(&cfg, &u0.state).unwrap();
        let s = track_supnorms(&traj).unwrap();
        assert!(s.e0.windows(2).all(|w| w[1] >= w[0]));
        assert!(s.e1.windows(2).all(|w| w[1] >= w[0]));
        assert!(s.e0[0] > 0.0);

        let zero = run_trajectory(&cfg, &StateField::zeros(grid)).unwrap();
        let s = track_supnorms(&zero).unwrap();
        assert!(s.e0.iter().chain(&s.e1).all(|v| *v == 0.0));
    }
}

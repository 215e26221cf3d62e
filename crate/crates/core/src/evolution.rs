//! Time evolution: exact per-mode semigroup for the linear system, a
//! pseudo-spectral RK4 method of lines for the quasilinear system, the Duhamel
//! representation, and the energy functionals used as run monitors.
//!
//! The nonlinear system is integrated in the form
//!
//! ```text
//! v_t = u_x - y,  u_t = v_x,  z_t = y_x,  y_t = z_x + v - gamma y + g(z)_x
//! ```
//!
//! with `g(z) = sigma(z) - sigma(0) - z`. The forcing `g(z)` is evaluated on the
//! grid and truncated by the 2/3 rule before differentiation.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::littlewood_paley::{chemin_lerner_from_tables, BesovSpec, DyadicFilterBank};
use crate::model::{ModelParams, StateField};
use crate::symbol::{CMatrix4, ModePropagator};

/// Fourier coefficients of all four components.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpectrum {
    grid: Grid,
    pub data: [Vec<Complex64>; 4],
}

impl StateSpectrum {
    pub fn from_state(state: &StateField) -> Result<Self> {
        let grid = state.grid().clone();
        let mut data: [Vec<Complex64>; 4] = Default::default();
        for (k, c) in state.components().iter().enumerate() {
            data[k] = grid.transform(c)?.coeffs;
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n();
        let z = vec![Complex64::new(0.0, 0.0); n];
        Self {
            grid,
            data: [z.clone(), z.clone(), z.clone(), z],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Back to physical space.
    pub fn to_state(&self) -> Result<StateField> {
        Ok(self.to_state_with_residue()?.0)
    }

    /// Back to physical space, also returning the largest ratio of the
    /// discarded imaginary part to the component norm.
    pub fn to_state_with_residue(&self) -> Result<(StateField, f64)> {
        let mut comps: [Vec<f64>; 4] = Default::default();
        let mut residue = 0.0_f64;
        for k in 0..4 {
            let c = self.grid.inverse_complex(&self.data[k])?;
            let re: Vec<f64> = c.iter().map(|x| x.re).collect();
            let im: Vec<f64> = c.iter().map(|x| x.im).collect();
            let nrm = self.grid.l2_norm(&re);
            if nrm > 0.0 {
                residue = residue.max(self.grid.l2_norm(&im) / nrm);
            }
            comps[k] = re;
        }
        Ok((StateField::from_components(self.grid.clone(), comps)?, residue))
    }

    /// Applies a per-slot multiplier to every component.
    pub fn map_slots(&self, w: impl Fn(usize) -> f64) -> Self {
        let data = std::array::from_fn(|k| {
            self.data[k]
                .iter()
                .enumerate()
                .map(|(i, c)| c * w(i))
                .collect()
        });
        Self {
            grid: self.grid.clone(),
            data,
        }
    }

    fn axpy(&mut self, a: f64, x: &StateSpectrum) {
        for k in 0..4 {
            for (s, v) in self.data[k].iter_mut().zip(&x.data[k]) {
                *s += a * v;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.iter().all(|x| x.re.is_finite() && x.im.is_finite()))
    }

    fn component_l2_sq(&self, k: usize) -> f64 {
        self.grid.parseval_norm_sq(&self.data[k])
    }
}

/// Per-mode Green matrices `exp(-t Phi(i xi_k))` for the nonnegative half of
/// the spectrum; negative modes use the complex conjugate. The Nyquist slot
/// carries no derivative, consistent with the spatial derivative operators.
#[derive(Clone, Debug)]
pub struct LinearPropagator {
    grid: Grid,
    modes: Vec<ModePropagator>,
}

impl LinearPropagator {
    pub fn new(grid: &Grid, params: &ModelParams) -> Result<Self> {
        let half = grid.n() / 2;
        let modes = (0..=half)
            .into_par_iter()
            .map(|i| ModePropagator::new(grid.derivative_xi(i), params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            modes,
        })
    }

    /// Green matrices at time `t`, one per nonnegative slot.
    pub fn matrices(&self, t: f64) -> Vec<CMatrix4> {
        self.modes.par_iter().map(|m| m.at(t)).collect()
    }

    pub fn apply(&self, spec: &StateSpectrum, t: f64) -> StateSpectrum {
        if t == 0.0 {
            return spec.clone();
        }
        apply_matrices(&self.grid, &self.matrices(t), spec)
    }
}

/// Multiplies every slot of `spec` by its Green matrix.
fn apply_matrices(grid: &Grid, mats: &[CMatrix4], spec: &StateSpectrum) -> StateSpectrum {
    let n = grid.n();
    let half = n / 2;
    let mut out = StateSpectrum::zeros(grid.clone());
    for i in 0..n {
        let (m, conj) = if i <= half { (&mats[i], false) } else { (&mats[n - i], true) };
        for r in 0..4 {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..4 {
                let e = if conj { m[(r, c)].conj() } else { m[(r, c)] };
                acc += e * spec.data[c][i];
            }
            out.data[r][i] = acc;
        }
    }
    out
}

/// `U(t) = G(t) U0`, exactly per Fourier mode.
pub fn evolve_linear(u0: &StateField, t: f64, params: &ModelParams) -> Result<StateField> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let prop = LinearPropagator::new(u0.grid(), params)?;
    prop.apply(&StateSpectrum::from_state(u0)?, t).to_state()
}

/// Snapshots of the exact linear flow at the given times.
pub fn linear_trajectory(u0: &StateField, times: &[f64], params: &ModelParams) -> Result<Trajectory> {
    check_times(times)?;
    let prop = LinearPropagator::new(u0.grid(), params)?;
    let spec0 = StateSpectrum::from_state(u0)?;
    let states = times
        .iter()
        .map(|&t| prop.apply(&spec0, t).to_state())
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        params: params.clone(),
        times: times.to_vec(),
        states,
        steps: None,
    })
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InsufficientData("no snapshot times".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "snapshot times must be nonnegative and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Right-hand side evaluator in Fourier space.
struct Rhs<'a> {
    params: &'a ModelParams,
    grid: &'a Grid,
    ixi: Vec<Complex64>,
    nonlinear: bool,
}

impl<'a> Rhs<'a> {
    fn new(params: &'a ModelParams, grid: &'a Grid) -> Result<Self> {
        let nonlinear = params.sigma() != &crate::model::SigmaKind::Linear;
        if nonlinear {
            params.require_nonlinear_capable()?;
        }
        let ixi = (0..grid.n())
            .map(|i| Complex64::new(0.0, grid.derivative_xi(i)))
            .collect();
        Ok(Self {
            params,
            grid,
            ixi,
            nonlinear,
        })
    }

    /// Spectrum of the dealiased `g(z)`, or `None` for the linear family.
    fn forcing(&self, z_hat: &[Complex64]) -> Result<Option<Vec<Complex64>>> {
        if !self.nonlinear {
            return Ok(None);
        }
        let mut buf = z_hat.to_vec();
        self.grid.inverse_in_place(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex64::new(self.params.g_eval(c.re)?, 0.0);
        }
        self.grid.forward_in_place(&mut buf);
        self.grid.dealias(&mut buf);
        Ok(Some(buf))
    }

    /// `(0, 0, 0, g(z)_x)` in Fourier space.
    fn source(&self, spec: &StateSpectrum) -> Result<Vec<Complex64>> {
        Ok(match self.forcing(&spec.data[2])? {
            Some(g) => g.iter().zip(&self.ixi).map(|(g, d)| g * d).collect(),
            None => vec![Complex64::new(0.0, 0.0); self.grid.n()],
        })
    }

    fn eval(&self, spec: &StateSpectrum) -> Result<StateSpectrum> {
        let a = self.params.a();
        let gamma = self.params.gamma();
        let [v, u, z, y] = &spec.data;
        let src = self.source(spec)?;
        let mut out = StateSpectrum::zeros(self.grid.clone());
        for i in 0..self.grid.n() {
            let d = self.ixi[i];
            out.data[0][i] = d * u[i] - y[i];
            out.data[1][i] = d * v[i];
            out.data[2][i] = d * y[i] * a;
            out.data[3][i] = d * z[i] * a + v[i] - y[i] * gamma + src[i];
        }
        Ok(out)
    }
}

/// Right-hand side of the quasilinear system (or of the linear system for
/// the linear family) as a physical field.
pub fn rhs_nonlinear(state: &StateField, params: &ModelParams) -> Result<StateField> {
    let rhs = Rhs::new(params, state.grid())?;
    rhs.eval(&StateSpectrum::from_state(state)?)?.to_state()
}

/// Duhamel source `(0, 0, 0, g(z)_x)` of a state, in Fourier space.
pub fn forcing_source(state: &StateField, params: &ModelParams) -> Result<StateSpectrum> {
    let grid = state.grid();
    let rhs = Rhs::new(params, grid)?;
    let mut out = StateSpectrum::zeros(grid.clone());
    out.data[3] = rhs.source(&StateSpectrum::from_state(state)?)?;
    Ok(out)
}

/// Energy bookkeeping recorded at every RK4 step boundary.
#[derive(Clone, Debug, Default)]
pub struct StepRecord {
    pub t: Vec<f64>,
    pub e0: Vec<f64>,
    pub y_sq: Vec<f64>,
    /// `d/dt ||y||^2 = 2 <y, y_t>`.
    pub y_sq_rate: Vec<f64>,
    /// Step index of each snapshot.
    pub snapshot_steps: Vec<usize>,
}

/// Ordered snapshots of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub states: Vec<StateField>,
    /// Dense per-step energy record, present for RK4 runs.
    pub steps: Option<StepRecord>,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn final_state(&self) -> &StateField {
        self.states.last().expect("trajectory holds at least one snapshot")
    }
}

/// `dt <= 0.5 dx / max(1, a)`.
pub fn cfl_limit(grid: &Grid, params: &ModelParams) -> f64 {
    0.5 * grid.dx() / params.max_speed()
}

fn e0_from_spectrum(spec: &StateSpectrum, params: &ModelParams) -> Result<f64> {
    let grid = spec.grid();
    let z = grid.inverse_complex(&spec.data[2])?;
    let mut s_int = 0.0;
    for c in &z {
        s_int += params.s_eval(c.re)?;
    }
    Ok(spec.component_l2_sq(0) + spec.component_l2_sq(1) + spec.component_l2_sq(3) + grid.dx() * s_int)
}

fn inner_rate(grid: &Grid, y: &[Complex64], yt: &[Complex64]) -> f64 {
    let n = grid.n() as f64;
    let dot: f64 = y.iter().zip(yt).map(|(a, b)| (a.conj() * b).re).sum();
    2.0 * grid.length() / (n * n) * dot
}

/// Classical RK4 with the CFL guard. Each inter-snapshot interval is split
/// into equal substeps no longer than `dt`, so snapshots fall on step
/// boundaries. A snapshot at `T` is appended if not requested.
pub fn integrate_rk4(
    u0: &StateField,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
    params: &ModelParams,
) -> Result<Trajectory> {
    let grid = u0.grid().clone();
    let limit = cfl_limit(&grid, params);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let mut times: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t <= t_end).collect();
    if times.last().is_none_or(|&t| t < t_end) {
        times.push(t_end);
    }
    check_times(&times)?;

    let rhs = Rhs::new(params, &grid)?;
    let mut state = StateSpectrum::from_state(u0)?;
    let mut t = 0.0;
    let mut record = StepRecord::default();
    let mut states = Vec::with_capacity(times.len());

    let mut k1 = rhs.eval(&state)?;
    let log_step = |t: f64, s: &StateSpectrum, k1: &StateSpectrum, rec: &mut StepRecord| -> Result<()> {
        rec.t.push(t);
        rec.e0.push(e0_from_spectrum(s, params)?);
        rec.y_sq.push(s.component_l2_sq(3));
        rec.y_sq_rate.push(inner_rate(&grid, &s.data[3], &k1.data[3]));
        Ok(())
    };
    log_step(t, &state, &k1, &mut record)?;

    for &target in &times {
        let span = target - t;
        let nsub = if span > 0.0 { (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize } else { 0 };
        let h = if nsub > 0 { span / nsub as f64 } else { 0.0 };
        for step in 0..nsub {
            let mut stage = state.clone();
            stage.axpy(0.5 * h, &k1);
            let k2 = rhs.eval(&stage)?;
            let mut stage = state.clone();
            stage.axpy(0.5 * h, &k2);
            let k3 = rhs.eval(&stage)?;
            let mut stage = state.clone();
            stage.axpy(h, &k3);
            let k4 = rhs.eval(&stage)?;
            state.axpy(h / 6.0, &k1);
            state.axpy(h / 3.0, &k2);
            state.axpy(h / 3.0, &k3);
            state.axpy(h / 6.0, &k4);
            t = if step + 1 == nsub { target } else { t + h };
            if !state.is_finite() {
                return Err(Error::BlowUp { t });
            }
            k1 = match rhs.eval(&state) {
                Ok(k) => k,
                Err(Error::NonFinite(_)) => return Err(Error::BlowUp { t }),
                Err(e) => return Err(e),
            };
            log_step(t, &state, &k1, &mut record)?;
        }
        t = target;
        record.snapshot_steps.push(record.t.len() - 1);
        let snap = state.to_state()?;
        if !snap.is_finite() {
            return Err(Error::BlowUp { t });
        }
        states.push(snap);
    }

    Ok(Trajectory {
        params: params.clone(),
        times,
        states,
        steps: Some(record),
    })
}

/// Streaming trapezoidal Duhamel integral
/// `W(t) = int_0^t G(t - tau) R(tau) d tau` on a uniform `tau` grid, advanced by
/// `W_{j+1} = G(h) W_j + h/2 (G(h) R_j + R_{j+1})`.
pub struct DuhamelAccumulator {
    grid: Grid,
    step: Vec<CMatrix4>,
    h: f64,
    acc: StateSpectrum,
    last: Option<StateSpectrum>,
    count: usize,
}

impl DuhamelAccumulator {
    pub fn new(grid: &Grid, params: &ModelParams, dtau: f64) -> Result<Self> {
        if !(dtau > 0.0) {
            return Err(Error::InvalidParameter(format!("dtau must be positive, got {dtau}")));
        }
        let prop = LinearPropagator::new(grid, params)?;
        Ok(Self {
            grid: grid.clone(),
            step: prop.matrices(dtau),
            h: dtau,
            acc: StateSpectrum::zeros(grid.clone()),
            last: None,
            count: 0,
        })
    }

    /// Feeds the source at the next grid time `tau_j = j h`.
    pub fn push(&mut self, source: StateSpectrum) {
        if let Some(prev) = self.last.take() {
            let mut lhs = self.acc.clone();
            lhs.axpy(0.5 * self.h, &prev);
            let mut next = apply_matrices(&self.grid, &self.step, &lhs);
            next.axpy(0.5 * self.h, &source);
            self.acc = next;
        }
        self.last = Some(source);
        self.count += 1;
    }

    /// Integral up to the time of the last pushed source.
    pub fn integral(&self) -> &StateSpectrum {
        &self.acc
    }

    pub fn elapsed(&self) -> f64 {
        self.count.saturating_sub(1) as f64 * self.h
    }
}

/// Duhamel solution `G(T) U0 + int_0^T G(T - tau) R(tau) d tau` from
/// explicitly given sources on the uniform grid `tau_j = j dtau`, `j = 0..`.
pub fn duhamel_from_sources(
    u0: &StateSpectrum,
    sources: &[StateSpectrum],
    dtau: f64,
    params: &ModelParams,
) -> Result<StateSpectrum> {
    if sources.is_empty() {
        return Err(Error::InsufficientData("at least one source sample is needed".into()));
    }
    let grid = u0.grid().clone();
    let mut acc = DuhamelAccumulator::new(&grid, params, dtau)?;
    for s in sources {
        acc.push(s.clone());
    }
    let t = acc.elapsed();
    let prop = LinearPropagator::new(&grid, params)?;
    let mut out = prop.apply(u0, t);
    out.axpy(1.0, acc.integral());
    Ok(out)
}

/// Duhamel evolution to `T`: the source `(0, 0, 0, g(z)_x)` is taken from an
/// RK4 pass with step `dtau`, then integrated against the exact semigroup.
pub fn evolve_duhamel(u0: &StateField, t_end: f64, dtau: f64, params: &ModelParams) -> Result<StateField> {
    let mut traj = duhamel_trajectory(u0, &[t_end], dtau, params)?;
    Ok(traj.states.pop().expect("one snapshot requested"))
}

/// Duhamel snapshots at `times`, each a multiple of `dtau`.
pub fn duhamel_trajectory(u0: &StateField, times: &[f64], dtau: f64, params: &ModelParams) -> Result<Trajectory> {
    check_times(times)?;
    let grid = u0.grid().clone();
    let limit = cfl_limit(&grid, params);
    if !(dtau > 0.0) || dtau > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: dtau, limit });
    }
    let marks = times
        .iter()
        .map(|&t| {
            let k = (t / dtau).round();
            if (k * dtau - t).abs() > 1e-9 * t.max(1.0) {
                Err(Error::InvalidParameter(format!(
                    "snapshot time {t} is not a multiple of dtau = {dtau}"
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let h = dtau;
    let rhs = Rhs::new(params, &grid)?;
    let prop = LinearPropagator::new(&grid, params)?;
    let spec0 = StateSpectrum::from_state(u0)?;
    let mut acc = DuhamelAccumulator::new(&grid, params, h)?;
    let source_of = |s: &StateSpectrum| -> Result<StateSpectrum> {
        let mut src = StateSpectrum::zeros(grid.clone());
        src.data[3] = rhs.source(s)?;
        Ok(src)
    };
    let mut states = Vec::with_capacity(times.len());
    let snapshot = |acc: &DuhamelAccumulator, t: f64| -> Result<StateField> {
        let mut out = prop.apply(&spec0, t);
        out.axpy(1.0, acc.integral());
        out.to_state()
    };
    let mut state = spec0.clone();
    acc.push(source_of(&state)?);
    let mut next = 0;
    while next < marks.len() && marks[next] == 0 {
        states.push(snapshot(&acc, times[next])?);
        next += 1;
    }
    let mut step = 0;
    while next < marks.len() {
        let k1 = rhs.eval(&state)?;
        let mut stage = state.clone();
        stage.axpy(0.5 * h, &k1);
        let k2 = rhs.eval(&stage)?;
        let mut stage = state.clone();
        stage.axpy(0.5 * h, &k2);
        let k3 = rhs.eval(&stage)?;
        let mut stage = state.clone();
        stage.axpy(h, &k3);
        let k4 = rhs.eval(&stage)?;
        state.axpy(h / 6.0, &k1);
        state.axpy(h / 3.0, &k2);
        state.axpy(h / 3.0, &k3);
        state.axpy(h / 6.0, &k4);
        step += 1;
        if !state.is_finite() {
            return Err(Error::BlowUp { t: step as f64 * h });
        }
        acc.push(source_of(&state)?);
        while next < marks.len() && marks[next] == step {
            states.push(snapshot(&acc, times[next])?);
            next += 1;
        }
    }
    Ok(Trajectory {
        params: params.clone(),
        times: times.to_vec(),
        states,
        steps: None,
    })
}

/// `E0(U) = ||(v, u, y)||^2 + int S(z) dx`.
pub fn energy_e0(state: &StateField, params: &ModelParams) -> Result<f64> {
    let g = state.grid();
    let s_int = state
        .z()
        .iter()
        .map(|&z| params.s_eval(z))
        .sum::<Result<f64>>()?;
    Ok(g.l2_norm_sq(state.v()) + g.l2_norm_sq(state.u()) + g.l2_norm_sq(state.y()) + g.dx() * s_int)
}

/// `E1(U) = -int (v y + u z) dx`.
pub fn energy_e1(state: &StateField) -> f64 {
    let g = state.grid();
    let s: f64 = state
        .v()
        .iter()
        .zip(state.y())
        .zip(state.u().iter().zip(state.z()))
        .map(|((v, y), (u, z))| v * y + u * z)
        .sum();
    -g.dx() * s
}

/// `E2(U) = -int z_x y dx`.
pub fn energy_e2(state: &StateField) -> Result<f64> {
    let g = state.grid();
    let zx = g.spatial_deriv(state.z(), 1)?;
    Ok(-g.dx() * zx.iter().zip(state.y()).map(|(a, b)| a * b).sum::<f64>())
}

/// `-int Delta_q v * (Delta_q u)_x dx` for the inhomogeneous block `q`.
pub fn energy_e3_block(state: &StateField, bank: &DyadicFilterBank, q: i32) -> Result<f64> {
    let g = state.grid();
    let bv = bank.block(state.v(), q, false)?;
    let bu = bank.block(state.u(), q, false)?;
    let bux = g.spatial_deriv(&bu, 1)?;
    Ok(-g.dx() * bv.iter().zip(&bux).map(|(a, b)| a * b).sum::<f64>())
}

/// Per-snapshot monitor values.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub t: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub y_l2_sq: Vec<f64>,
    /// `2 gamma int_0^t ||y||^2 d tau`.
    pub damping_integral: Vec<f64>,
    /// `|E0(t) + damping - E0(0)| / E0(0)`; NaN when `E0(0) = 0`.
    pub residual: Vec<f64>,
}

/// Cumulative trapezoid with the Euler-Maclaurin endpoint correction
/// `h^2/12 (f'_0 - f'_1)`, fourth-order accurate.
fn corrected_trapezoid(t: &[f64], f: &[f64], df: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        let h = t[i] - t[i - 1];
        acc += 0.5 * h * (f[i - 1] + f[i]) + h * h / 12.0 * (df[i - 1] - df[i]);
        out.push(acc);
    }
    out
}

/// Builds the ledger. RK4 runs use their dense step record, so the damping
/// integral and the residual are measured from `t = 0`. Other trajectories
/// integrate over the stored snapshots from the first one, taking
/// `d/dt ||y||^2` from the right-hand side.
pub fn energy_ledger(traj: &Trajectory) -> Result<EnergyLedger> {
    let params = &traj.params;
    let gamma = params.gamma();
    let e0: Vec<f64> = traj
        .states
        .iter()
        .map(|s| energy_e0(s, params))
        .collect::<Result<_>>()?;
    let e1 = traj.states.iter().map(energy_e1).collect();
    let e2 = traj.states.iter().map(energy_e2).collect::<Result<_>>()?;
    let y_l2_sq: Vec<f64> = traj.states.iter().map(|s| s.grid().l2_norm_sq(s.y())).collect();

    let (damping, reference): (Vec<f64>, f64) = match &traj.steps {
        Some(rec) => {
            let cum = corrected_trapezoid(&rec.t, &rec.y_sq, &rec.y_sq_rate);
            let d = rec.snapshot_steps.iter().map(|&k| 2.0 * gamma * cum[k]).collect();
            (d, rec.e0[0])
        }
        None => {
            let rates = traj
                .states
                .iter()
                .map(|s| {
                    let yt = rhs_nonlinear(s, params)?;
                    let g = s.grid();
                    Ok(2.0 * g.dx() * s.y().iter().zip(yt.y()).map(|(a, b)| a * b).sum::<f64>())
                })
                .collect::<Result<Vec<f64>>>()?;
            let mut cum = corrected_trapezoid(&traj.times, &y_l2_sq, &rates);
            cum.iter_mut().for_each(|c| *c *= 2.0 * gamma);
            (cum, e0[0])
        }
    };
    let residual = e0
        .iter()
        .zip(&damping)
        .map(|(e, d)| {
            if reference > 0.0 {
                (e + d - reference).abs() / reference
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(EnergyLedger {
        t: traj.times.clone(),
        e0,
        e1,
        e2,
        y_l2_sq,
        damping_integral: damping,
        residual,
    })
}

/// Maximum relative defect of `E0(t) + 2 gamma int ||y||^2 = E0(0)`. For RK4
/// runs the maximum runs over every step.
pub fn check_energy_identity(traj: &Trajectory) -> Result<f64> {
    if let Some(rec) = &traj.steps {
        let e_ref = rec.e0[0];
        if !(e_ref > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let cum = corrected_trapezoid(&rec.t, &rec.y_sq, &rec.y_sq_rate);
        let g2 = 2.0 * traj.params.gamma();
        return Ok(rec
            .e0
            .iter()
            .zip(&cum)
            .map(|(e, c)| (e + g2 * c - e_ref).abs() / e_ref)
            .fold(0.0, f64::max));
    }
    let ledger = energy_ledger(traj)?;
    if !(ledger.e0[0] > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok(ledger.residual.iter().copied().fold(0.0, f64::max))
}

/// Per-component block tables of a trajectory: `tables[component][snapshot]`.
fn block_tables(
    traj: &Trajectory,
    bank: &DyadicFilterBank,
    deriv: [bool; 4],
) -> Result<Vec<Vec<Vec<(i32, f64)>>>> {
    let grid = traj.grid();
    let mut out = vec![Vec::with_capacity(traj.states.len()); 4];
    for s in &traj.states {
        for (k, c) in s.components().iter().enumerate() {
            let mut spec = grid.transform(c)?.coeffs;
            if deriv[k] {
                for (i, x) in spec.iter_mut().enumerate() {
                    *x *= Complex64::new(0.0, grid.derivative_xi(i));
                }
            }
            out[k].push(bank.block_norms_from_spectrum(&spec, 2.0, false, 0.0)?);
        }
    }
    Ok(out)
}

/// Energy and dissipation functionals
///
/// ```text
/// E(T) = ||U||_{L~inf_T(B^{3/2}_{2,1})}
/// D(T) = ||y||_{L~2_T(B^{3/2}_{2,1})} + ||(v, z_x)||_{L~2_T(B^{1/2}_{2,1})} + ||u_x||_{L~2_T(B^{-1/2}_{2,1})}
/// ```
///
/// with vector norms summed over components.
pub fn functionals_ed(traj: &Trajectory, bank: &DyadicFilterBank) -> Result<(f64, f64)> {
    if traj.states.len() < 2 {
        return Err(Error::InsufficientData("E and D need at least two snapshots".into()));
    }
    let plain = block_tables(traj, bank, [false; 4])?;
    let e = (0..4)
        .map(|k| chemin_lerner_from_tables(&traj.times, &plain[k], f64::INFINITY, &BesovSpec::b2_1(1.5)))
        .sum::<Result<f64>>()?;
    let derived = block_tables(traj, bank, [false, true, true, false])?;
    let d = chemin_lerner_from_tables(&traj.times, &plain[3], 2.0, &BesovSpec::b2_1(1.5))?
        + chemin_lerner_from_tables(&traj.times, &plain[0], 2.0, &BesovSpec::b2_1(0.5))?
        + chemin_lerner_from_tables(&traj.times, &derived[2], 2.0, &BesovSpec::b2_1(0.5))?
        + chemin_lerner_from_tables(&traj.times, &derived[1], 2.0, &BesovSpec::b2_1(-0.5))?;
    Ok((e, d))
}

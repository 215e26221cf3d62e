//! Parameters, nonlinearity and state of the first-order Timoshenko system
//!
//! ```text
//! v_t - u_x + y = 0,  u_t - v_x = 0,  z_t - a y_x = 0,  y_t - sigma(z)_x - v + gamma y = 0
//! ```
//!
//! obtained from the beam variables through `v = phi_x - psi`, `u = phi_t`,
//! `z = a psi_x`, `y = psi_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Nonlinearity family, written in the state variable `z`.
///
/// `Linear` is the linearized system: `sigma(z) = z`, so `g = 0` and `S(z) = z^2`
/// for every wave speed `a` (the factor `a` already sits in `z = a psi_x`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaKind {
    Linear,
    Sinh,
    /// `sigma(z) = sum_k coefficients[k] z^k`, only valid on `interval`.
    Polynomial {
        coefficients: Vec<f64>,
        interval: (f64, f64),
    },
}

/// Validated parameter record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    a: f64,
    gamma: f64,
    sigma: SigmaKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawParams {
    a: f64,
    gamma: f64,
    #[serde(default = "default_sigma")]
    sigma: SigmaKind,
}

fn default_sigma() -> SigmaKind {
    SigmaKind::Sinh
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.a, raw.gamma, raw.sigma)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            a: p.a,
            gamma: p.gamma,
            sigma: p.sigma,
        }
    }
}

const MONOTONE_SAMPLES: usize = 4097;

impl ModelParams {
    pub fn new(a: f64, gamma: f64, sigma: SigmaKind) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("wave speed a must be positive, got {a}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if let SigmaKind::Polynomial {
            coefficients,
            interval,
        } = &sigma
        {
            let (lo, hi) = *interval;
            if coefficients.len() < 2 || coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(
                    "polynomial nonlinearity needs finite coefficients up to at least degree 1".into(),
                ));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && hi > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "validity interval must be finite and contain 0 in its interior, got [{lo}, {hi}]"
                )));
            }
        }
        let params = Self { a, gamma, sigma };
        if params.sigma != SigmaKind::Linear {
            let sp0 = params.sigma_prime_unchecked(0.0);
            if (sp0 - a * a).abs() > 1e-12 * (a * a).max(1.0) {
                return Err(Error::Consistency {
                    sigma_prime_zero: sp0,
                    a_squared: a * a,
                });
            }
        }
        if let SigmaKind::Polynomial { interval, .. } = &params.sigma {
            params.check_monotone(interval.0, interval.1, MONOTONE_SAMPLES)?;
        }
        Ok(params)
    }

    /// `a = 1, gamma = 1, sigma = sinh`.
    pub fn reference() -> Self {
        Self::new(1.0, 1.0, SigmaKind::Sinh).expect("reference parameters are valid")
    }

    pub fn linear(a: f64, gamma: f64) -> Result<Self> {
        Self::new(a, gamma, SigmaKind::Linear)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> &SigmaKind {
        &self.sigma
    }

    /// Largest characteristic speed `max(1, a)`.
    pub fn max_speed(&self) -> f64 {
        self.a.max(1.0)
    }

    /// Whether the quasilinear system can be evolved with these parameters
    /// (only the equal-speed case `a = 1` is supported).
    pub fn is_nonlinear_capable(&self) -> bool {
        self.a == 1.0
    }

    pub fn require_nonlinear_capable(&self) -> Result<()> {
        if self.is_nonlinear_capable() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "the nonlinear system requires a = 1, got a = {}",
                self.a
            )))
        }
    }

    /// Checks `sigma'(eta) > 0` on `samples` points of `[lo, hi]`.
    pub fn check_monotone(&self, lo: f64, hi: f64, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        for i in 0..samples {
            let eta = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let d = self.sigma_prime_unchecked(eta);
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sigma'({eta}) = {d} is not positive"
                )));
            }
        }
        Ok(())
    }

    fn check_arg(&self, z: f64) -> Result<()> {
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("nonlinearity argument {z}")));
        }
        if let SigmaKind::Polynomial { interval, .. } = &self.sigma {
            if z < interval.0 || z > interval.1 {
                return Err(Error::OutsideValidity {
                    value: z,
                    lo: interval.0,
                    hi: interval.1,
                });
            }
        }
        Ok(())
    }

    pub fn sigma_eval(&self, z: f64) -> Result<f64> {
        self.check_arg(z)?;
        Ok(match &self.sigma {
            SigmaKind::Linear => z,
            SigmaKind::Sinh => z.sinh(),
            SigmaKind::Polynomial { coefficients, .. } => horner(coefficients, z),
        })
    }

    pub fn sigma_prime(&self, z: f64) -> Result<f64> {
        self.check_arg(z)?;
        Ok(self.sigma_prime_unchecked(z))
    }

    fn sigma_prime_unchecked(&self, z: f64) -> f64 {
        match &self.sigma {
            SigmaKind::Linear => 1.0,
            SigmaKind::Sinh => z.cosh(),
            SigmaKind::Polynomial { coefficients, .. } => {
                let d: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c)
                    .collect();
                horner(&d, z)
            }
        }
    }

    /// `g(z) = sigma(z) - sigma(0) - z`.
    pub fn g_eval(&self, z: f64) -> Result<f64> {
        self.check_arg(z)?;
        Ok(match &self.sigma {
            SigmaKind::Linear => 0.0,
            SigmaKind::Sinh => sinh_minus_identity(z),
            SigmaKind::Polynomial { coefficients, .. } => {
                let mut c = coefficients.clone();
                c[0] = 0.0;
                c[1] -= 1.0;
                horner(&c, z)
            }
        })
    }

    /// `S(z) = 2 int_0^z (sigma(eta) - sigma(0)) d eta`, in closed form.
    pub fn s_eval(&self, z: f64) -> Result<f64> {
        self.check_arg(z)?;
        Ok(match &self.sigma {
            SigmaKind::Linear => z * z,
            // 2 (cosh z - 1) without cancellation
            SigmaKind::Sinh => 4.0 * (0.5 * z).sinh().powi(2),
            SigmaKind::Polynomial { coefficients, .. } => {
                let mut anti = vec![0.0; coefficients.len() + 1];
                for (k, c) in coefficients.iter().enumerate().skip(1) {
                    anti[k + 1] = 2.0 * c / (k + 1) as f64;
                }
                horner(&anti, z)
            }
        })
    }
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// `sinh z - z`, by its Taylor series near zero.
fn sinh_minus_identity(z: f64) -> f64 {
    if z.abs() >= 0.5 {
        return z.sinh() - z;
    }
    let z2 = z * z;
    let mut term = z * z2 / 6.0;
    let mut sum = term;
    let mut k = 3.0;
    while term.abs() > f64::EPSILON * sum.abs() {
        term *= z2 / ((k + 1.0) * (k + 2.0));
        sum += term;
        k += 2.0;
    }
    sum
}

/// State components in their storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    V,
    U,
    Z,
    Y,
}

impl Component {
    pub const ALL: [Component; 4] = [Component::V, Component::U, Component::Z, Component::Y];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::V => "v",
            Component::U => "u",
            Component::Z => "z",
            Component::Y => "y",
        }
    }
}

impl std::str::FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" => Ok(Component::V),
            "u" => Ok(Component::U),
            "z" => Ok(Component::Z),
            "y" => Ok(Component::Y),
            other => Err(Error::Parse(format!("unknown component {other:?}"))),
        }
    }
}

fn check_samples(grid: &Grid, name: &str, f: &[f64]) -> Result<()> {
    if f.len() != grid.n() {
        return Err(Error::GridMismatch(format!(
            "{name} has {} samples, grid has {}",
            f.len(),
            grid.n()
        )));
    }
    if let Some(x) = f.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{name} contains {x}")));
    }
    Ok(())
}

/// State `U = (v, u, z, y)` sampled on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StateField {
    grid: Grid,
    data: [Vec<f64>; 4],
}

impl StateField {
    pub fn new(grid: Grid, v: Vec<f64>, u: Vec<f64>, z: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::from_components(grid, [v, u, z, y])
    }

    pub fn from_components(grid: Grid, data: [Vec<f64>; 4]) -> Result<Self> {
        for c in Component::ALL {
            check_samples(&grid, c.name(), &data[c.index()])?;
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n();
        Self {
            grid,
            data: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, c: Component) -> &[f64] {
        &self.data[c.index()]
    }

    pub fn component_mut(&mut self, c: Component) -> &mut [f64] {
        &mut self.data[c.index()]
    }

    pub fn components(&self) -> &[Vec<f64>; 4] {
        &self.data
    }

    pub fn into_components(self) -> [Vec<f64>; 4] {
        self.data
    }

    pub fn v(&self) -> &[f64] {
        &self.data[0]
    }
    pub fn u(&self) -> &[f64] {
        &self.data[1]
    }
    pub fn z(&self) -> &[f64] {
        &self.data[2]
    }
    pub fn y(&self) -> &[f64] {
        &self.data[3]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.iter().all(|x| x.is_finite()))
    }

    /// `||U||^2_{L^2}` summed over components.
    pub fn l2_norm_sq(&self) -> f64 {
        self.data.iter().map(|c| self.grid.l2_norm_sq(c)).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `||U||_{L^1}` as the sum of component norms.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|c| self.grid.lp_norm(c, 1.0)).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data
            .iter_mut()
            .for_each(|c| c.iter_mut().for_each(|x| *x *= factor));
    }

    /// Component-wise `self - other`.
    pub fn sub(&self, other: &StateField) -> Result<StateField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("states live on different grids".into()));
        }
        let data = std::array::from_fn(|k| {
            self.data[k]
                .iter()
                .zip(&other.data[k])
                .map(|(a, b)| a - b)
                .collect()
        });
        Ok(StateField {
            grid: self.grid.clone(),
            data,
        })
    }

    /// Applies a scalar map to every component.
    pub fn map_components(&self, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<StateField> {
        let mut data: [Vec<f64>; 4] = Default::default();
        for k in 0..4 {
            data[k] = f(&self.data[k])?;
        }
        StateField::from_components(self.grid.clone(), data)
    }
}

/// Beam data `(phi, phi_t, psi, psi_t)` at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalData {
    grid: Grid,
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub psi0: Vec<f64>,
    pub psi1: Vec<f64>,
}

impl PrimalData {
    pub fn new(
        grid: Grid,
        phi0: Vec<f64>,
        phi1: Vec<f64>,
        psi0: Vec<f64>,
        psi1: Vec<f64>,
    ) -> Result<Self> {
        check_samples(&grid, "phi0", &phi0)?;
        check_samples(&grid, "phi1", &phi1)?;
        check_samples(&grid, "psi0", &psi0)?;
        check_samples(&grid, "psi1", &psi1)?;
        Ok(Self {
            grid,
            phi0,
            phi1,
            psi0,
            psi1,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// `v = phi_x - psi`, `u = phi_t`, `z = a psi_x`, `y = psi_t` with spectral derivatives.
pub fn primal_to_first_order(data: &PrimalData, params: &ModelParams) -> Result<StateField> {
    let grid = data.grid();
    let phi_x = grid.spatial_deriv(&data.phi0, 1)?;
    let psi_x = grid.spatial_deriv(&data.psi0, 1)?;
    let v = phi_x.iter().zip(&data.psi0).map(|(a, b)| a - b).collect();
    let z = psi_x.iter().map(|d| params.a() * d).collect();
    StateField::new(grid.clone(), v, data.phi1.clone(), z, data.psi1.clone())
}

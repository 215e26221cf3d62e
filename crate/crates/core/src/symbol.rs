//! Fourier symbol `Phi(i xi) = i xi A + L` of the linearized system, its
//! spectrum, and the semigroup `exp(-t Phi(i xi))`.
//!
//! The characteristic polynomial of `-Phi(i xi)` has real coefficients,
//!
//! ```text
//! det(lambda I + Phi(i xi)) = (lambda^2 + xi^2)(lambda^2 + gamma lambda + a^2 xi^2) + lambda^2
//!   = lambda^4 + gamma lambda^3 + (1 + (1 + a^2) xi^2) lambda^2 + gamma xi^2 lambda + a^2 xi^4,
//! ```
//!
//! so the roots are found from a balanced real companion matrix and then
//! polished by Newton's method on the exact coefficients.

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::stats::least_squares_line;

pub type CMatrix4 = Matrix4<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// The constant matrices `A` (a-general) and `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMatrices {
    pub a: Matrix4<f64>,
    pub l: Matrix4<f64>,
}

impl SymbolMatrices {
    pub fn new(params: &ModelParams) -> Self {
        let s = params.a();
        let g = params.gamma();
        #[rustfmt::skip]
        let a = -Matrix4::new(
            0.0, 1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, s,
            0.0, 0.0, s, 0.0,
        );
        #[rustfmt::skip]
        let l = Matrix4::new(
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            -1.0, 0.0, 0.0, g,
        );
        Self { a, l }
    }
}

/// `Phi(i xi) = i xi A + L`.
pub fn symbol(xi: f64, params: &ModelParams) -> CMatrix4 {
    let m = SymbolMatrices::new(params);
    CMatrix4::from_fn(|r, c| I * (xi * m.a[(r, c)]) + m.l[(r, c)])
}

/// Generator `-Phi(i xi)` of the per-mode flow.
pub fn generator(xi: f64, params: &ModelParams) -> CMatrix4 {
    -symbol(xi, params)
}

/// Coefficients `[c0, c1, c2, c3]` of the monic characteristic polynomial
/// `lambda^4 + c3 lambda^3 + c2 lambda^2 + c1 lambda + c0` of `-Phi(i xi)`.
pub fn characteristic_coefficients(xi: f64, params: &ModelParams) -> [f64; 4] {
    let a2 = params.a() * params.a();
    let g = params.gamma();
    let x2 = xi * xi;
    [a2 * x2 * x2, g * x2, 1.0 + (1.0 + a2) * x2, g]
}

fn poly_eval(c: &[f64; 4], z: Complex64) -> (Complex64, Complex64) {
    // monic quartic and its derivative by Horner
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for k in (0..4).rev() {
        dp = dp * z + p;
        p = p * z + c[k];
    }
    (p, dp)
}

/// Parlett-Reinsch balancing with radix-2 scalings.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / RADIX {
                cc *= RADIX;
                rr /= RADIX;
                f *= RADIX;
            }
            while cc >= rr * RADIX {
                cc /= RADIX;
                rr *= RADIX;
                f /= RADIX;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Roots of a monic real quartic via its balanced companion matrix plus
/// Newton polishing. Exactly vanishing trailing coefficients are deflated
/// as exact zero roots. `None` if the Schur iteration fails.
pub fn quartic_roots(c: &[f64; 4]) -> Option<[Complex64; 4]> {
    let zeros = c.iter().take_while(|&&x| x == 0.0).count();
    let reduced = &c[zeros..];
    let deg = reduced.len();
    let mut roots = [Complex64::new(0.0, 0.0); 4];
    if deg == 0 {
        return Some(roots);
    }
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for k in 1..deg {
        comp[(k, k - 1)] = 1.0;
    }
    for (k, ck) in reduced.iter().enumerate() {
        comp[(k, deg - 1)] = -ck;
    }
    balance(&mut comp);
    let schur = comp.try_schur(f64::EPSILON, 10_000)?;
    let ev = schur.complex_eigenvalues();
    for k in 0..deg {
        roots[zeros + k] = polish(c, Complex64::new(ev[k].re, ev[k].im));
    }
    Some(roots)
}

fn polish(c: &[f64; 4], mut z: Complex64) -> Complex64 {
    let (mut p, _) = poly_eval(c, z);
    for _ in 0..4 {
        let (_, dp) = poly_eval(c, z);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let cand = z - p / dp;
        let (pc, _) = poly_eval(c, cand);
        if !(pc.norm() < p.norm()) {
            break;
        }
        z = cand;
        p = pc;
    }
    z
}

/// Eigenvalues of `-Phi(i xi)`, sorted by decreasing real part.
pub fn eigenvalues(xi: f64, params: &ModelParams) -> Result<[Complex64; 4]> {
    if !xi.is_finite() {
        return Err(Error::NonFinite(format!("frequency {xi}")));
    }
    let c = characteristic_coefficients(xi, params);
    let mut roots = quartic_roots(&c).ok_or(Error::EigenConvergence { xi })?;
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::EigenConvergence { xi });
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(roots)
}

/// Unit eigenvector for `lambda`: the right singular vector of
/// `-Phi(i xi) - lambda I` with the smallest singular value.
pub fn eigenvector(xi: f64, params: &ModelParams, lambda: Complex64) -> Vector4<Complex64> {
    let shifted = generator(xi, params) - CMatrix4::identity() * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("four singular values");
    v_t.row(k).adjoint()
}

/// `||(-Phi(i xi) - lambda I) v|| / ||v||`.
pub fn eigen_residual(xi: f64, params: &ModelParams, lambda: Complex64, v: &Vector4<Complex64>) -> f64 {
    let r = (generator(xi, params) - CMatrix4::identity() * lambda) * v;
    r.norm() / v.norm()
}

/// Spectral abscissa `max_j Re lambda_j(i xi)`.
pub fn max_real_part(xi: f64, params: &ModelParams) -> Result<f64> {
    Ok(eigenvalues(xi, params)?[0].re)
}

/// Dissipation weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaKind {
    /// `xi^2 / (1 + xi^2)`
    One,
    /// `xi^2 / (1 + xi^2)^2`
    Two,
}

impl EtaKind {
    /// `One` for equal wave speeds, `Two` otherwise.
    pub fn auto(params: &ModelParams) -> Self {
        if params.a() == 1.0 {
            EtaKind::One
        } else {
            EtaKind::Two
        }
    }
}

pub fn eta(xi: f64, kind: EtaKind) -> f64 {
    let x2 = xi * xi;
    match kind {
        EtaKind::One => x2 / (1.0 + x2),
        EtaKind::Two => x2 / ((1.0 + x2) * (1.0 + x2)),
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect(),
    }
}

/// Sweep of the dissipative ratio `-max Re lambda / eta` over a frequency grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolReport {
    pub a: f64,
    pub gamma: f64,
    pub eta: EtaKind,
    pub xi: Vec<f64>,
    pub eigenvalues: Vec<[(f64, f64); 4]>,
    pub max_re_lambda: Vec<f64>,
    pub ratio: Vec<f64>,
    pub c_best: f64,
    pub ratio_max: f64,
    pub pass: bool,
}

impl SymbolReport {
    /// Log-log slope of the ratio against `xi` over `[lo, hi]`.
    pub fn ratio_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .xi
            .iter()
            .zip(&self.ratio)
            .filter(|(x, r)| **x >= lo && **x <= hi && **r > 0.0)
            .map(|(x, r)| (x.ln(), r.ln()))
            .unzip();
        least_squares_line(&xs, &ys).map(|fit| fit.slope)
    }
}

pub fn dissipative_fit(params: &ModelParams, xi_grid: &[f64], kind: EtaKind) -> Result<SymbolReport> {
    if xi_grid.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "the sweep needs at least 100 frequencies, got {}",
            xi_grid.len()
        )));
    }
    if xi_grid.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParameter("sweep frequencies must be finite and nonzero".into()));
    }
    let eigs = xi_grid
        .par_iter()
        .map(|&xi| eigenvalues(xi, params))
        .collect::<Result<Vec<_>>>()?;
    let max_re: Vec<f64> = eigs.iter().map(|e| e[0].re).collect();
    let ratio: Vec<f64> = xi_grid
        .iter()
        .zip(&max_re)
        .map(|(&xi, &re)| -re / eta(xi, kind))
        .collect();
    let c_best = ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SymbolReport {
        a: params.a(),
        gamma: params.gamma(),
        eta: kind,
        xi: xi_grid.to_vec(),
        eigenvalues: eigs
            .iter()
            .map(|e| std::array::from_fn(|k| (e[k].re, e[k].im)))
            .collect(),
        max_re_lambda: max_re,
        ratio,
        c_best,
        ratio_max,
        pass: c_best > 0.0,
    })
}

/// Diagonal Pade [6/6] coefficients of `exp`.
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

fn norm1(m: &CMatrix4) -> f64 {
    (0..4)
        .map(|c| (0..4).map(|r| m[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a [6/6] Pade approximant.
pub fn expm(m: &CMatrix4) -> CMatrix4 {
    let nrm = norm1(m);
    let s = if nrm > 0.5 {
        (nrm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = m * Complex64::new(2.0_f64.powi(-s), 0.0);
    let id = CMatrix4::identity();
    let x2 = x * x;
    let x4 = x2 * x2;
    let x6 = x4 * x2;
    let c = |k: usize| Complex64::new(PADE6[k], 0.0);
    let even = id * c(0) + x2 * c(2) + x4 * c(4) + x6 * c(6);
    let odd = x * (id * c(1) + x2 * c(3) + x4 * c(5));
    let num = even + odd;
    let den = even - odd;
    let mut r = den.lu().solve(&num).expect("Pade denominator is invertible for ||X|| <= 1/2");
    for _ in 0..s {
        r = r * r;
    }
    r
}

/// `exp(t G)` for the generator `G` whose spectral abscissa is `shift`;
/// the exponential is taken of `t (G - shift I)` and rescaled by `exp(t shift)`.
pub fn shifted_expm(g: &CMatrix4, t: f64, shift: f64) -> CMatrix4 {
    let centred = (g - CMatrix4::identity() * Complex64::new(shift, 0.0)) * Complex64::new(t, 0.0);
    expm(&centred) * Complex64::new((t * shift).exp(), 0.0)
}

/// Precomputed per-frequency generator, reusable across times.
#[derive(Clone, Debug)]
pub struct ModePropagator {
    generator: CMatrix4,
    shift: f64,
}

impl ModePropagator {
    pub fn new(xi: f64, params: &ModelParams) -> Result<Self> {
        Ok(Self {
            generator: generator(xi, params),
            shift: max_real_part(xi, params)?,
        })
    }

    /// Green matrix `exp(-t Phi(i xi))`.
    pub fn at(&self, t: f64) -> CMatrix4 {
        if t == 0.0 {
            return CMatrix4::identity();
        }
        shifted_expm(&self.generator, t, self.shift)
    }
}

/// `exp(-t Phi(i xi))`.
pub fn green_matrix(xi: f64, t: f64, params: &ModelParams) -> Result<CMatrix4> {
    Ok(ModePropagator::new(xi, params)?.at(t))
}

/// Spectral norm of `exp(-t Phi(i xi))`.
pub fn semigroup_norm(xi: f64, t: f64, params: &ModelParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let g = green_matrix(xi, t, params)?;
    Ok(g.singular_values().iter().copied().fold(0.0, f64::max))
}

/// Smallest `C` with `||exp(-t Phi)|| <= C exp(-c eta(xi) t)` on the product grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub c: f64,
    pub big_c: f64,
    pub worst_xi: f64,
    pub worst_t: f64,
}

pub fn semigroup_envelope(
    params: &ModelParams,
    xi_grid: &[f64],
    times: &[f64],
    c: f64,
    kind: EtaKind,
) -> Result<EnvelopeFit> {
    let rows = xi_grid
        .par_iter()
        .map(|&xi| {
            let prop = ModePropagator::new(xi, params)?;
            let mut worst = (0.0_f64, xi, 0.0);
            for &t in times {
                let g = prop.at(t);
                let n = g.singular_values().iter().copied().fold(0.0, f64::max);
                let ratio = n * (c * eta(xi, kind) * t).exp();
                if ratio > worst.0 {
                    worst = (ratio, xi, t);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let (big_c, worst_xi, worst_t) = rows
        .into_iter()
        .fold((0.0, f64::NAN, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
    Ok(EnvelopeFit {
        c,
        big_c,
        worst_xi,
        worst_t,
    })
}

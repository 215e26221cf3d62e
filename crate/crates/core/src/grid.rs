//! Periodic computational domain and its discrete Fourier transform.
//!
//! The whole line is approximated by the torus `[-L/2, L/2)` sampled at `N`
//! equispaced points, `N` a power of two. Coefficients use the unnormalized
//! forward DFT
//!
//! ```text
//! c_k = sum_j f_j exp(-2 pi i j k / N),   f_j = (1/N) sum_k c_k exp(2 pi i j k / N)
//! ```
//!
//! and all norms are the unnormalized torus integrals approximated by the
//! rectangle rule, so Parseval reads `dx * sum |f_j|^2 = (L / N^2) * sum |c_k|^2`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid with cached FFT plans.
#[derive(Clone)]
pub struct Grid {
    length: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("length", &self.length)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "sample count must be a power of two >= 8, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            length,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Frequency spacing `2 pi / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Nyquist frequency `pi N / L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    /// Sample positions `x_j = -L/2 + j dx`.
    pub fn x(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|j| -0.5 * self.length + j as f64 * dx).collect()
    }

    /// Signed integer mode of FFT slot `i`; the Nyquist slot maps to `-N/2`.
    pub fn mode(&self, i: usize) -> i64 {
        let half = self.n / 2;
        if i < half {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Frequency `xi_k = 2 pi k / L` of FFT slot `i`.
    pub fn xi(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.dxi()
    }

    /// All frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.xi(i)).collect()
    }

    /// Frequency used by odd derivative multipliers: zero in the Nyquist slot.
    pub fn derivative_xi(&self, i: usize) -> f64 {
        if i == self.nyquist_index() {
            0.0
        } else {
            self.xi(i)
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {len}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn transform(&self, f: &[f64]) -> Result<Spectrum> {
        self.check_len(f.len())?;
        let mut buf: Vec<Complex64> = f.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(Spectrum {
            coeffs: buf,
            conj_symmetric: true,
        })
    }

    /// Inverse transform. For conjugate-symmetric spectra the real part is
    /// returned; otherwise the imaginary residue is discarded as well, so call
    /// [`Grid::inverse_complex`] when it matters.
    pub fn inverse_transform(&self, s: &Spectrum) -> Result<Vec<f64>> {
        Ok(self.inverse_complex(&s.coeffs)?.into_iter().map(|c| c.re).collect())
    }

    pub fn inverse_complex(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(coeffs.len())?;
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        Ok(buf)
    }

    /// In-place forward transform of a complex buffer.
    pub(crate) fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// In-place normalized inverse transform of a complex buffer.
    pub(crate) fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    /// Applies a real-valued multiplier `m(i)` slot by slot.
    pub fn apply_multiplier(&self, f: &[f64], m: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
        let mut s = self.transform(f)?;
        s.coeffs.iter_mut().enumerate().for_each(|(i, c)| *c *= m(i));
        self.inverse_transform(&s)
    }

    /// `Lambda^alpha f = F^{-1} |xi|^alpha F f`, `alpha >= 0`.
    pub fn frac_deriv(&self, f: &[f64], alpha: f64) -> Result<Vec<f64>> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order must be >= 0, got {alpha}"
            )));
        }
        if alpha == 0.0 {
            self.check_len(f.len())?;
            return Ok(f.to_vec());
        }
        self.apply_multiplier(f, |i| self.xi(i).abs().powf(alpha))
    }

    /// `d^k f / dx^k` through `(i xi)^k`, with the Nyquist slot removed for `k >= 1`.
    pub fn spatial_deriv(&self, f: &[f64], order: u32) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        if order == 0 {
            return Ok(f.to_vec());
        }
        let mut s = self.transform(f)?;
        for (i, c) in s.coeffs.iter_mut().enumerate() {
            *c *= deriv_factor(self.derivative_xi(i), order);
        }
        self.inverse_transform(&s)
    }

    /// Zeroes all modes with `|k| > N/3`.
    pub fn dealias(&self, coeffs: &mut [Complex64]) {
        let cutoff = (self.n / 3) as i64;
        for (i, c) in coeffs.iter_mut().enumerate() {
            if self.mode(i).abs() > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Pointwise product with 2/3-rule truncation of the result.
    pub fn dealiased_product(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        // pad-free variant: truncate both factors and the product
        let mut fs = self.transform(f)?;
        let mut gs = self.transform(g)?;
        self.dealias(&mut fs.coeffs);
        self.dealias(&mut gs.coeffs);
        let ft = self.inverse_transform(&fs)?;
        let gt = self.inverse_transform(&gs)?;
        let prod: Vec<f64> = ft.iter().zip(&gt).map(|(a, b)| a * b).collect();
        let mut ps = self.transform(&prod)?;
        self.dealias(&mut ps.coeffs);
        self.inverse_transform(&ps)
    }

    /// Rectangle-rule integral.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.dx() * f.iter().sum::<f64>()
    }

    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        self.dx() * f.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.l2_norm_sq(f).sqrt()
    }

    /// `L^p` norm by the rectangle rule; `p = inf` gives the max norm.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            f.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
        } else if p == 2.0 {
            self.l2_norm(f)
        } else if p == 1.0 {
            self.dx() * f.iter().map(|x| x.abs()).sum::<f64>()
        } else {
            (self.dx() * f.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
        }
    }

    /// `L^2` norm squared from coefficients via Parseval.
    pub fn parseval_norm_sq(&self, coeffs: &[Complex64]) -> f64 {
        let n = self.n as f64;
        self.length / (n * n) * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// `(i xi)^k`.
pub(crate) fn deriv_factor(xi: f64, order: u32) -> Complex64 {
    let mag = xi.powi(order as i32);
    match order % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// Coefficients of a single real field.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
    /// Set when the coefficients come from a real field.
    pub conj_symmetric: bool,
}

impl Spectrum {
    /// Largest violation of `c(-xi) = conj(c(xi))`, the Nyquist slot included.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n)
            .map(|i| {
                let j = (n - i) % n;
                (self.coeffs[i] - self.coeffs[j].conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(2.0 * PI, 64).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1.0, 4).is_err());
        assert!(Grid::new(1.0, 24).is_err());
        assert!(Grid::new(0.0, 16).is_err());
        assert!(Grid::new(1.0, 16).is_ok());
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let g = grid();
        let s = g.transform(&vec![0.0; 64]).unwrap();
        assert!(s.coeffs.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn single_cosine_occupies_two_slots() {
        let g = Grid::new(3.0, 32).unwrap();
        let f: Vec<f64> = g.x().iter().map(|x| (2.0 * PI * x / 3.0).cos()).collect();
        let s = g.transform(&f).unwrap();
        for (i, c) in s.coeffs.iter().enumerate() {
            let k = g.mode(i);
            if k.abs() == 1 {
                assert!((c.norm() - 16.0).abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12, "slot {i} = {c}");
            }
        }
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let g = grid();
        assert!(g.transform(&[1.0; 10]).is_err());
        assert!(g.spatial_deriv(&[1.0; 10], 1).is_err());
    }

    #[test]
    fn frac_deriv_rejects_negative_order() {
        let g = grid();
        assert!(g.frac_deriv(&vec![1.0; 64], -0.5).is_err());
    }

    #[test]
    fn frac_deriv_of_constant_vanishes() {
        let g = grid();
        let out = g.frac_deriv(&vec![3.0; 64], 1.0).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1e-13));
        let same = g.frac_deriv(&vec![3.0; 64], 0.0).unwrap();
        assert_eq!(same, vec![3.0; 64]);
    }

    #[test]
    fn half_derivative_of_cosine() {
        let g = grid();
        let k = 5.0;
        let f: Vec<f64> = g.x().iter().map(|x| (k * x).cos()).collect();
        let out = g.frac_deriv(&f, 0.5).unwrap();
        for (o, x) in out.iter().zip(g.x()) {
            assert!((o - k.sqrt() * (k * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn first_and_second_derivatives() {
        let l = 5.0;
        let g = Grid::new(l, 64).unwrap();
        let w = 2.0 * PI / l;
        let f: Vec<f64> = g.x().iter().map(|x| (w * x).sin()).collect();
        let d1 = g.spatial_deriv(&f, 1).unwrap();
        for (d, x) in d1.iter().zip(g.x()) {
            assert!((d - w * (w * x).cos()).abs() < 1e-12);
        }
        let m = 3.0 * w;
        let c: Vec<f64> = g.x().iter().map(|x| (m * x).cos()).collect();
        let d2 = g.spatial_deriv(&c, 2).unwrap();
        for (d, x) in d2.iter().zip(g.x()) {
            assert!((d + m * m * (m * x).cos()).abs() < 1e-10);
        }
        assert_eq!(g.spatial_deriv(&c, 0).unwrap(), c);
    }

    #[test]
    fn lambda_one_matches_abs_derivative_on_sine() {
        let g = grid();
        let f: Vec<f64> = g.x().iter().map(|x| (7.0 * x).sin()).collect();
        let out = g.frac_deriv(&f, 1.0).unwrap();
        let diff: Vec<f64> = out.iter().zip(&f).map(|(a, b)| a - 7.0 * b).collect();
        assert!(g.l2_norm(&diff) < 1e-10);
    }

    #[test]
    fn dealiasing_cuts_above_two_thirds() {
        let g = Grid::new(2.0 * PI, 32).unwrap();
        let hi: Vec<f64> = g.x().iter().map(|x| (12.0 * x).cos()).collect();
        let lo: Vec<f64> = g.x().iter().map(|x| (3.0 * x).cos()).collect();
        let mut s = g.transform(&hi).unwrap();
        g.dealias(&mut s.coeffs);
        assert!(s.coeffs.iter().all(|c| c.norm() < 1e-12));
        let p = g.dealiased_product(&lo, &lo).unwrap();
        for (v, x) in p.iter().zip(g.x()) {
            assert!((v - (3.0 * x).cos().powi(2)).abs() < 1e-12);
        }
    }
}

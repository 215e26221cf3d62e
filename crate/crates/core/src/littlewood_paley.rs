//! Dyadic Littlewood-Paley decomposition on the periodic grid, Besov and
//! Chemin-Lerner norms.
//!
//! The low-pass profile `chi` equals 1 on `|xi| <= 1` and vanishes on
//! `|xi| >= 4/3`, joined by the `C^infinity` step `T(t) = B(t) / (B(t) + B(1 - t))`
//! with `B(t) = exp(-1/t)`. Shells are `phi(xi) = chi(xi / 2) - chi(xi)`, which are
//! supported in `1 <= |xi| <= 8/3`. Because the sums telescope, both partitions
//! of unity hold up to rounding.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn smooth_b(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth monotone step: 0 for `t <= 0`, 1 for `t >= 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let b = smooth_b(t);
        b / (b + smooth_b(1.0 - t))
    }
}

/// Low-pass profile `chi(|xi|)`.
pub fn chi(xi: f64) -> f64 {
    let r = xi.abs();
    smooth_step((4.0 / 3.0 - r) * 3.0)
}

/// Shell profile `phi(xi) = chi(xi/2) - chi(xi)`.
pub fn phi(xi: f64) -> f64 {
    chi(0.5 * xi) - chi(xi)
}

/// `2^q` exactly for any integer `q` in the f64 exponent range.
fn pow2(q: i32) -> f64 {
    2.0_f64.powi(q)
}

/// Besov exponents. `p` and `r` may be `f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
    pub homogeneous: bool,
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, r: f64, homogeneous: bool) -> Result<Self> {
        for (name, e) in [("p", p), ("r", r)] {
            if !(e >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponent {name} must lie in [1, inf], got {e}"
                )));
            }
        }
        if !s.is_finite() {
            return Err(Error::InvalidParameter(format!("regularity s must be finite, got {s}")));
        }
        Ok(Self {
            s,
            p,
            r,
            homogeneous,
        })
    }

    /// `B^s_{2,1}`.
    pub fn b2_1(s: f64) -> Self {
        Self {
            s,
            p: 2.0,
            r: 1.0,
            homogeneous: false,
        }
    }

    /// `\dot B^s_{2,1}`.
    pub fn hb2_1(s: f64) -> Self {
        Self {
            s,
            p: 2.0,
            r: 1.0,
            homogeneous: true,
        }
    }
}

/// Parses an exponent, accepting `inf`.
pub fn parse_exponent(s: &str) -> Result<f64> {
    let t = s.trim();
    let v = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        _ => t
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad exponent {t:?}: {e}")))?,
    };
    if !(v >= 1.0) {
        return Err(Error::Parse(format!("exponent must lie in [1, inf], got {t:?}")));
    }
    Ok(v)
}

/// `l^r` norm of a nonnegative sequence.
pub fn lr_norm(values: impl IntoIterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        values.into_iter().fold(0.0, f64::max)
    } else if r == 1.0 {
        values.into_iter().sum()
    } else {
        values.into_iter().map(|x| x.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Sampled low-pass and shell profiles over the grid frequency axis.
#[derive(Clone, Debug)]
pub struct DyadicFilterBank {
    grid: Grid,
    chi: Vec<f64>,
    q_min: i32,
    q_max: i32,
    // shells for q in [q_lo, q_max], q_lo = min(q_min, 0)
    q_lo: i32,
    shells: Vec<Vec<f64>>,
}

impl DyadicFilterBank {
    pub fn new(grid: &Grid) -> Result<Self> {
        let q_min = grid.dxi().log2().floor() as i32 - 2;
        let q_max = grid.nyquist().log2().ceil() as i32 + 1;
        let q_lo = q_min.min(0);
        let n = grid.n();
        let radii: Vec<f64> = (0..n).map(|i| grid.xi(i).abs()).collect();
        let chi_samples = radii.iter().map(|&r| chi(r)).collect();
        let shells: Vec<Vec<f64>> = (q_lo..=q_max)
            .map(|q| {
                let scale = pow2(-q);
                radii.iter().map(|&r| phi(scale * r)).collect()
            })
            .collect();
        let bank = Self {
            grid: grid.clone(),
            chi: chi_samples,
            q_min,
            q_max,
            q_lo,
            shells,
        };
        let hosted = (q_min..=q_max)
            .filter(|&q| bank.shell(q).is_some_and(|s| s.iter().skip(1).any(|&w| w > 0.0)))
            .count();
        if hosted < 3 {
            return Err(Error::InvalidGrid(format!(
                "grid hosts only {hosted} dyadic shells, at least 3 are needed"
            )));
        }
        Ok(bank)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q_min(&self) -> i32 {
        self.q_min
    }

    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    pub fn chi_samples(&self) -> &[f64] {
        &self.chi
    }

    fn shell(&self, q: i32) -> Option<&[f64]> {
        if q < self.q_lo || q > self.q_max {
            None
        } else {
            Some(&self.shells[(q - self.q_lo) as usize])
        }
    }

    /// Block indices carrying the norm: `[q_min, q_max]` (homogeneous) or
    /// `[-1, q_max]` (inhomogeneous).
    pub fn block_range(&self, homogeneous: bool) -> std::ops::RangeInclusive<i32> {
        if homogeneous {
            self.q_min..=self.q_max
        } else {
            -1..=self.q_max
        }
    }

    /// Multiplier weight of block `q` in FFT slot `i`.
    pub fn weight(&self, i: usize, q: i32, homogeneous: bool) -> f64 {
        if homogeneous {
            if i == 0 {
                return 0.0;
            }
            return self.shell(q).map_or(0.0, |s| s[i]);
        }
        match q {
            q if q <= -2 => 0.0,
            -1 => self.chi[i],
            q => self.shell(q).map_or(0.0, |s| s[i]),
        }
    }

    /// Maximum partition-of-unity defect over the grid. The homogeneous sum
    /// skips the zero mode.
    pub fn partition_residual(&self, homogeneous: bool) -> f64 {
        let n = self.grid.n();
        let start = usize::from(homogeneous);
        (start..n)
            .map(|i| {
                let total: f64 = self
                    .block_range(homogeneous)
                    .map(|q| self.weight(i, q, homogeneous))
                    .sum();
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn block_spectrum(&self, coeffs: &[Complex64], q: i32, homogeneous: bool) -> Vec<Complex64> {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.weight(i, q, homogeneous))
            .collect()
    }

    /// `Delta_q f` (inhomogeneous) or `\dot Delta_q f` (homogeneous).
    pub fn block(&self, f: &[f64], q: i32, homogeneous: bool) -> Result<Vec<f64>> {
        self.grid.apply_multiplier(f, |i| self.weight(i, q, homogeneous))
    }

    /// `L^p` norms of every block of a spectrum, after the optional factor
    /// `|xi|^lambda`. Returns `(q, ||block||_{L^p})`.
    pub fn block_norms_from_spectrum(
        &self,
        coeffs: &[Complex64],
        p: f64,
        homogeneous: bool,
        lambda: f64,
    ) -> Result<Vec<(i32, f64)>> {
        if coeffs.len() != self.grid.n() {
            return Err(Error::GridMismatch(format!(
                "spectrum has {} slots, grid has {}",
                coeffs.len(),
                self.grid.n()
            )));
        }
        let lifted: Vec<Complex64> = if lambda == 0.0 {
            coeffs.to_vec()
        } else {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * self.grid.xi(i).abs().powf(lambda))
                .collect()
        };
        self.block_range(homogeneous)
            .map(|q| {
                let b = self.block_spectrum(&lifted, q, homogeneous);
                let norm = if p == 2.0 {
                    self.grid.parseval_norm_sq(&b).sqrt()
                } else {
                    let f: Vec<f64> = self.grid.inverse_complex(&b)?.iter().map(|c| c.re).collect();
                    self.grid.lp_norm(&f, p)
                };
                Ok((q, norm))
            })
            .collect()
    }

    /// Per-block table `(q, 2^{qs} ||block||_{L^p})`.
    pub fn besov_blocks(&self, f: &[f64], spec: &BesovSpec) -> Result<Vec<(i32, f64)>> {
        let s = self.grid.transform(f)?;
        Ok(weighted(
            self.block_norms_from_spectrum(&s.coeffs, spec.p, spec.homogeneous, 0.0)?,
            spec.s,
        ))
    }

    pub fn besov_norm(&self, f: &[f64], spec: &BesovSpec) -> Result<f64> {
        let blocks = self.besov_blocks(f, spec)?;
        Ok(lr_norm(blocks.into_iter().map(|(_, w)| w), spec.r))
    }

    /// Besov norm of `Lambda^lambda f` given the spectrum of `f`.
    pub fn besov_norm_spectrum(&self, coeffs: &[Complex64], spec: &BesovSpec, lambda: f64) -> Result<f64> {
        let blocks = self.block_norms_from_spectrum(coeffs, spec.p, spec.homogeneous, lambda)?;
        Ok(lr_norm(weighted(blocks, spec.s).into_iter().map(|(_, w)| w), spec.r))
    }

    /// `||f||_{\tilde L^theta_T(B^s_{p,r})}` with trapezoidal time quadrature.
    pub fn chemin_lerner_norm(&self, series: &TimeSeriesField, theta: f64, spec: &BesovSpec) -> Result<f64> {
        if series.grid != self.grid {
            return Err(Error::GridMismatch("series and filter bank use different grids".into()));
        }
        let tables = series
            .fields
            .iter()
            .map(|f| {
                let s = self.grid.transform(f)?;
                self.block_norms_from_spectrum(&s.coeffs, spec.p, spec.homogeneous, 0.0)
            })
            .collect::<Result<Vec<_>>>()?;
        chemin_lerner_from_tables(&series.times, &tables, theta, spec)
    }

    /// `[f, \dot Delta_q] g = f (\dot Delta_q g) - \dot Delta_q (f g)` with dealiased products.
    pub fn commutator(&self, f: &[f64], q: i32, g: &[f64]) -> Result<Vec<f64>> {
        let bg = self.block(g, q, true)?;
        let first = self.grid.dealiased_product(f, &bg)?;
        let fg = self.grid.dealiased_product(f, g)?;
        let second = self.block(&fg, q, true)?;
        Ok(first.iter().zip(&second).map(|(a, b)| a - b).collect())
    }
}

fn weighted(blocks: Vec<(i32, f64)>, s: f64) -> Vec<(i32, f64)> {
    blocks
        .into_iter()
        .map(|(q, n)| (q, if n == 0.0 { 0.0 } else { pow2(q).powf(s) * n }))
        .collect()
}

/// Chemin-Lerner norm from per-snapshot block-norm tables sharing one block
/// layout. `theta = inf` takes the supremum over snapshots.
pub fn chemin_lerner_from_tables(
    times: &[f64],
    tables: &[Vec<(i32, f64)>],
    theta: f64,
    spec: &BesovSpec,
) -> Result<f64> {
    if !(theta >= 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in [1, inf], got {theta}")));
    }
    if times.len() != tables.len() || tables.is_empty() {
        return Err(Error::InsufficientData("need one block table per snapshot".into()));
    }
    if theta.is_finite() && times.len() < 2 {
        return Err(Error::InsufficientData(
            "a finite time exponent needs at least two snapshots".into(),
        ));
    }
    let nblocks = tables[0].len();
    let per_block = (0..nblocks).map(|b| {
        let q = tables[0][b].0;
        let time_norm = if theta.is_infinite() {
            tables.iter().map(|t| t[b].1).fold(0.0, f64::max)
        } else {
            let integral: f64 = times
                .windows(2)
                .zip(tables.windows(2))
                .map(|(t, w)| 0.5 * (t[1] - t[0]) * (w[0][b].1.powf(theta) + w[1][b].1.powf(theta)))
                .sum();
            integral.powf(1.0 / theta)
        };
        if time_norm == 0.0 {
            0.0
        } else {
            pow2(q).powf(spec.s) * time_norm
        }
    });
    Ok(lr_norm(per_block, spec.r))
}

/// Trapezoidal `L^theta` norm in time of a scalar series.
pub fn time_norm(times: &[f64], values: &[f64], theta: f64) -> f64 {
    if theta.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let integral: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].abs().powf(theta) + v[1].abs().powf(theta)))
        .sum();
    integral.powf(1.0 / theta)
}

/// Ordered snapshots of a scalar field.
#[derive(Clone, Debug)]
pub struct TimeSeriesField {
    grid: Grid,
    times: Vec<f64>,
    fields: Vec<Vec<f64>>,
}

impl TimeSeriesField {
    pub fn new(grid: Grid, times: Vec<f64>, fields: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::InsufficientData(
                "need at least one snapshot and one time per snapshot".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("snapshot times must be strictly increasing".into()));
        }
        if let Some(f) = fields.iter().find(|f| f.len() != grid.n()) {
            return Err(Error::GridMismatch(format!(
                "snapshot has {} samples, grid has {}",
                f.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, times, fields })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bank(l: f64, n: usize) -> DyadicFilterBank {
        DyadicFilterBank::new(&Grid::new(l, n).unwrap()).unwrap()
    }

    #[test]
    fn profile_values() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.0), 1.0);
        assert_eq!(chi(4.0 / 3.0), 0.0);
        assert_eq!(phi(1.0), 0.0);
        assert_eq!(phi(2.0), 1.0);
        assert_eq!(phi(8.0 / 3.0), 0.0);
        assert_eq!(phi(0.99), 0.0);
        assert!(phi(1.2) > 0.0 && phi(1.2) < 1.0);
        assert_eq!(phi(1.5), 1.0);
    }

    #[test]
    fn supports_respect_the_shells() {
        let b = bank(50.0, 1024);
        let g = b.grid().clone();
        for i in 0..g.n() {
            let r = g.xi(i).abs();
            if r > 4.0 / 3.0 {
                assert_eq!(b.chi_samples()[i], 0.0);
            }
            for q in b.q_min()..=b.q_max() {
                let w = b.weight(i, q, true);
                let lo = 0.75 * pow2(q);
                let hi = 8.0 / 3.0 * pow2(q);
                if w != 0.0 {
                    assert!(r >= lo && r <= hi, "q={q} r={r}");
                }
            }
        }
    }

    #[test]
    fn partitions_of_unity() {
        for (l, n) in [(2.0 * PI, 64), (800.0, 1 << 14), (3.0, 8)] {
            let b = bank(l, n);
            assert!(b.partition_residual(false) <= 1e-12);
            assert!(b.partition_residual(true) <= 1e-12);
        }
    }

    #[test]
    fn constant_field_blocks() {
        let b = bank(2.0 * PI, 64);
        let f = vec![1.5; 64];
        assert!(b.block(&f, 0, false).unwrap().iter().all(|x| x.abs() < 1e-14));
        assert!(b.block(&f, 2, true).unwrap().iter().all(|x| x.abs() < 1e-14));
        let low = b.block(&f, -1, false).unwrap();
        assert!(low.iter().all(|x| (x - 1.5).abs() < 1e-14));
        assert!(b.block(&f, -2, false).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn cosine_on_unit_circle_lives_in_block_minus_one() {
        let b = bank(2.0 * PI, 64);
        let g = b.grid().clone();
        let f: Vec<f64> = g.x().iter().map(|x| x.cos()).collect();
        let blocks = b.besov_blocks(&f, &BesovSpec::hb2_1(0.0)).unwrap();
        for (q, w) in &blocks {
            if *q == -1 {
                assert!((w - PI.sqrt()).abs() < 1e-12);
            } else {
                assert!(*w < 1e-14, "q = {q}: {w}");
            }
        }
        let norm = b.besov_norm(&f, &BesovSpec::hb2_1(0.0)).unwrap();
        assert!((norm - 1.77245385).abs() < 1e-8);
        let half = b.besov_norm(&f, &BesovSpec::hb2_1(0.5)).unwrap();
        assert!((half - 2.0_f64.powf(-0.5) * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let b = bank(2.0 * PI, 64);
        for hom in [true, false] {
            let spec = BesovSpec::new(0.5, 2.0, 1.0, hom).unwrap();
            assert_eq!(b.besov_norm(&vec![0.0; 64], &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn lp_norms_agree_with_parseval_for_p2() {
        let b = bank(20.0, 256);
        let g = b.grid().clone();
        let f: Vec<f64> = g.x().iter().map(|x| (-x * x).exp() * (3.0 * x).sin()).collect();
        let s = g.transform(&f).unwrap();
        let via_parseval = b.block_norms_from_spectrum(&s.coeffs, 2.0, true, 0.0).unwrap();
        for (q, n) in via_parseval {
            let blk = b.block(&f, q, true).unwrap();
            assert!((g.lp_norm(&blk, 2.0) - n).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(BesovSpec::new(0.0, 0.5, 1.0, true).is_err());
        assert!(BesovSpec::new(0.0, 2.0, f64::NAN, true).is_err());
        assert!(BesovSpec::new(0.0, f64::INFINITY, f64::INFINITY, false).is_ok());
        assert_eq!(parse_exponent("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_exponent(" 2 ").unwrap(), 2.0);
        assert!(parse_exponent("0.5").is_err());
        assert!(parse_exponent("x").is_err());
    }

    #[test]
    fn chemin_lerner_edge_cases() {
        let b = bank(2.0 * PI, 64);
        let g = b.grid().clone();
        let f: Vec<f64> = g.x().iter().map(|x| (2.0 * x).sin() + 0.3 * (5.0 * x).cos()).collect();
        let spec = BesovSpec::b2_1(0.5);
        let single = TimeSeriesField::new(g.clone(), vec![0.0], vec![f.clone()]).unwrap();
        assert!(b.chemin_lerner_norm(&single, 2.0, &spec).is_err());
        let sup = b.chemin_lerner_norm(&single, f64::INFINITY, &spec).unwrap();
        assert!((sup - b.besov_norm(&f, &spec).unwrap()).abs() < 1e-13);

        let constant = TimeSeriesField::new(g.clone(), vec![0.0, 0.5, 2.0], vec![f.clone(); 3]).unwrap();
        let c = b.chemin_lerner_norm(&constant, f64::INFINITY, &spec).unwrap();
        assert!((c - b.besov_norm(&f, &spec).unwrap()).abs() < 1e-13);

        let zero = TimeSeriesField::new(g.clone(), vec![0.0, 1.0], vec![vec![0.0; 64]; 2]).unwrap();
        assert_eq!(b.chemin_lerner_norm(&zero, 2.0, &spec).unwrap(), 0.0);

        assert!(TimeSeriesField::new(g, vec![1.0, 1.0], vec![f.clone(), f]).is_err());
    }

    #[test]
    fn commutator_identities() {
        let b = bank(2.0 * PI, 128);
        let g = b.grid().clone();
        let x = g.x();
        let gf: Vec<f64> = x.iter().map(|x| (3.0 * x).sin() + (11.0 * x).cos()).collect();
        let c = b.commutator(&vec![2.0; 128], 2, &gf).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-12));

        let f: Vec<f64> = x.iter().map(|x| (2.0 * x).cos()).collect();
        let c = b.commutator(&f, 2, &vec![0.7; 128]).unwrap();
        let bf = b.block(&f, 2, true).unwrap();
        for (ci, bi) in c.iter().zip(&bf) {
            assert!((ci + 0.7 * bi).abs() < 1e-12);
        }
    }
}

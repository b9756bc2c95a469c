//! Discrete torus, Fourier transforms, Littlewood-Paley blocks and norms.
//!
//! Coefficients follow `û(ξ) = (1/N) Σ_j u(x_j) e^{-iξx_j}` on the nodes
//! `x_j = 2πj/N`, so that `u(x_j) = Σ_ξ û(ξ) e^{iξx_j}`. Spectral arrays are
//! stored in increasing-frequency order: slot `i` holds `ξ = i - N/2`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// The periodic grid of `N` equispaced nodes on `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 8 || n_points % 2 != 0 {
            return Err(Error::InvalidGrid(n_points));
        }
        Ok(Grid { n: n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        2.0 * PI
    }

    /// Lowest frequency on the lattice, `-N/2`.
    pub fn min_freq(&self) -> i64 {
        -(self.n as i64) / 2
    }

    /// Highest frequency on the lattice, `N/2 - 1`.
    pub fn max_freq(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn freq(&self, index: usize) -> i64 {
        index as i64 - self.n as i64 / 2
    }

    /// Storage slot of frequency `xi`, or `None` if it lies off the lattice.
    pub fn index(&self, xi: i64) -> Option<usize> {
        let i = xi + self.n as i64 / 2;
        if i >= 0 && (i as usize) < self.n {
            Some(i as usize)
        } else {
            None
        }
    }

    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let lo = self.min_freq();
        let hi = self.max_freq();
        lo..=hi
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Largest Littlewood-Paley index used, the smallest `K` with `2^K ≥ N/2`.
    pub fn lp_top(&self) -> usize {
        let half = self.n / 2;
        let mut k = 0;
        while (1usize << k) < half {
            k += 1;
        }
        k
    }

    /// Frequency cap of the 2/3 dealiasing rule: modes with `|ξ| ≤ K` are kept,
    /// where `3K < N` guarantees that products of kept modes never alias onto kept modes.
    pub fn dealias_cap(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n, "value array does not match grid");
        let mut buf = values.to_vec();
        plan(self.n, true).process(&mut buf);
        let scale = 1.0 / self.n as f64;
        let half = self.n / 2;
        (0..self.n)
            .map(|i| buf[(i + half) % self.n] * scale)
            .collect()
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.n, "coefficient array does not match grid");
        let half = self.n / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, c) in coeffs.iter().enumerate() {
            buf[(i + half) % self.n] = *c;
        }
        plan(self.n, false).process(&mut buf);
        buf
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            })
        } else {
            Ok(())
        }
    }
}

/// A function on the grid held by its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    coeffs: Vec<Complex64>,
    is_real: bool,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_points()],
            is_real: true,
        }
    }

    /// Real field from nodal values. The Nyquist mode is zeroed.
    pub fn from_real_values(grid: Grid, values: &[f64]) -> Self {
        let cv: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coeffs = grid.forward(&cv);
        let mut f = Field {
            grid,
            coeffs,
            is_real: true,
        };
        f.symmetrize();
        f
    }

    pub fn from_complex_values(grid: Grid, values: &[Complex64]) -> Self {
        Field {
            grid,
            coeffs: grid.forward(values),
            is_real: false,
        }
    }

    /// Builds a field from coefficients in increasing-frequency order.
    /// With `is_real`, Hermitian symmetry is enforced by averaging conjugate pairs.
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>, is_real: bool) -> Self {
        assert_eq!(coeffs.len(), grid.n_points(), "coefficient array does not match grid");
        let mut f = Field {
            grid,
            coeffs,
            is_real,
        };
        if is_real {
            f.symmetrize();
        }
        f
    }

    /// Builds a field from stored coefficients without touching them, for callers
    /// that already hold a valid representation.
    pub fn from_raw(grid: Grid, coeffs: Vec<Complex64>, is_real: bool) -> Self {
        assert_eq!(coeffs.len(), grid.n_points(), "coefficient array does not match grid");
        Field { grid, coeffs, is_real }
    }

    /// Field whose nodal values are `f(x_j)`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let v: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        Self::from_real_values(grid, &v)
    }

    /// The single exponential `e^{ikx}`.
    pub fn mode(grid: Grid, k: i64) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        c[grid.index(k).expect("mode off the lattice")] = Complex64::new(1.0, 0.0);
        Field {
            grid,
            coeffs: c,
            is_real: k == 0,
        }
    }

    fn symmetrize(&mut self) {
        let g = self.grid;
        if let Some(i) = g.index(g.min_freq()) {
            self.coeffs[i] = Complex64::new(0.0, 0.0);
        }
        for xi in 0..=g.max_freq() {
            let i = g.index(xi).unwrap();
            let j = g.index(-xi).unwrap();
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * 0.5;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at frequency `xi`; zero off the lattice.
    pub fn coeff(&self, xi: i64) -> Complex64 {
        self.grid
            .index(xi)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.grid.inverse(&self.coeffs)
    }

    /// Nodal values; the imaginary part is discarded.
    pub fn real_values(&self) -> Vec<f64> {
        self.values().into_iter().map(|z| z.re).collect()
    }

    /// Largest deviation from Hermitian symmetry, Nyquist mode included.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let mut d = self.coeff(g.min_freq()).norm();
        for xi in 0..=g.max_freq() {
            d = d.max((self.coeff(xi) - self.coeff(-xi).conj()).norm());
        }
        d
    }

    pub fn scale(&self, lambda: f64) -> Field {
        Field {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * lambda).collect(),
            is_real: self.is_real,
        }
    }

    pub fn scale_complex(&self, lambda: Complex64) -> Field {
        Field {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * lambda).collect(),
            is_real: self.is_real && lambda.im == 0.0,
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Field {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + y * a)
                .collect(),
            is_real: self.is_real && other.is_real,
        }
    }

    /// Squared `L²(𝕋)` norm, `2π Σ|û|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        2.0 * PI * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Zeroes every mode with `|ξ| > cap`.
    pub fn truncate(&self, cap: i64) -> Field {
        let g = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if g.freq(i).abs() > cap {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect();
        Field {
            grid: g,
            coeffs,
            is_real: self.is_real,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Quintic smoothstep `6x⁵ − 15x⁴ + 10x³` clamped to `[0, 1]`.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

/// The low-pass profile: 1 on `|t| ≤ 1`, 0 on `|t| ≥ 2`.
pub fn lp_profile(t: f64) -> f64 {
    1.0 - smoothstep(t.abs() - 1.0)
}

/// Symbol of the Littlewood-Paley block `P_k` at frequency `xi`.
pub fn lp_weight(k: usize, xi: f64) -> f64 {
    if k == 0 {
        lp_profile(xi)
    } else {
        let s = 2f64.powi(-(k as i32));
        lp_profile(s * xi) - lp_profile(2.0 * s * xi)
    }
}

/// Dyadic pieces of a field, block `k` supported in the ring of `P_k`.
#[derive(Debug, Clone)]
pub struct LpBlocks {
    pub blocks: Vec<Field>,
}

impl LpBlocks {
    pub fn reconstruct(&self) -> Field {
        let mut it = self.blocks.iter();
        let first = it.next().expect("at least one block").clone();
        it.fold(first, |acc, b| acc.add(b))
    }
}

/// Blocks `P_0 u, …, P_K u` with `2^K ≥ N/2`. Since `Σ_{k≤K} P_k = P_0(2^{-K}·)`
/// equals 1 on the whole lattice, the blocks sum back to `u`.
pub fn lp_decompose(u: &Field) -> LpBlocks {
    let g = u.grid();
    let blocks = (0..=g.lp_top())
        .map(|k| {
            let coeffs = u
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, &c)| c * lp_weight(k, g.freq(i) as f64))
                .collect();
            Field {
                grid: g,
                coeffs,
                is_real: u.is_real(),
            }
        })
        .collect();
    LpBlocks { blocks }
}

/// Multiplies each coefficient by `m(ξ)`.
pub fn multiplier_apply(u: &Field, m: impl Fn(i64) -> Complex64) -> Result<Field> {
    let g = u.grid();
    let mut coeffs = Vec::with_capacity(g.n_points());
    let mut hermitian = u.is_real();
    for (i, &c) in u.coeffs().iter().enumerate() {
        let xi = g.freq(i);
        if c == Complex64::new(0.0, 0.0) {
            coeffs.push(c);
            continue;
        }
        let mi = m(xi);
        if !(mi.re.is_finite() && mi.im.is_finite()) {
            return Err(Error::NonFiniteMultiplier(xi));
        }
        if hermitian && xi != g.min_freq() {
            let mj = m(-xi);
            if (mi - mj.conj()).norm() > 1e-14 * (1.0 + mi.norm()) {
                hermitian = false;
            }
        }
        coeffs.push(c * mi);
    }
    Ok(Field {
        grid: g,
        coeffs,
        is_real: hermitian,
    })
}

/// Common Fourier multipliers.
pub mod mult {
    use num_complex::Complex64;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    /// `|ξ|^β`, with value 0 at `ξ = 0` unless `β = 0`.
    pub fn abs_pow(beta: f64) -> impl Fn(i64) -> Complex64 {
        move |xi| {
            if xi == 0 {
                re(if beta == 0.0 { 1.0 } else { 0.0 })
            } else {
                re((xi.abs() as f64).powf(beta))
            }
        }
    }

    /// `⟨ξ⟩^s = (1 + ξ²)^{s/2}`.
    pub fn japanese(s: f64) -> impl Fn(i64) -> Complex64 {
        move |xi| re((1.0 + (xi * xi) as f64).powf(0.5 * s))
    }

    /// `∂ₓ`.
    pub fn deriv() -> impl Fn(i64) -> Complex64 {
        |xi| Complex64::new(0.0, xi as f64)
    }

    /// `∂ₓ^j`.
    pub fn deriv_pow(j: u32) -> impl Fn(i64) -> Complex64 {
        move |xi| Complex64::new(0.0, xi as f64).powu(j)
    }

    /// `∂ₓ⁻¹` on mean-zero functions; the mean is annihilated.
    pub fn inv_deriv() -> impl Fn(i64) -> Complex64 {
        |xi| {
            if xi == 0 {
                re(0.0)
            } else {
                Complex64::new(0.0, -1.0 / xi as f64)
            }
        }
    }

    /// `ξ|ξ|^{α−1}`, the real dispersion relation.
    pub fn dispersion_symbol(alpha: f64, xi: f64) -> f64 {
        if xi == 0.0 {
            0.0
        } else {
            xi * xi.abs().powf(alpha - 1.0)
        }
    }

    /// `∂ₓ|D|^{α−1}`, symbol `iξ|ξ|^{α−1}`.
    pub fn dispersion(alpha: f64) -> impl Fn(i64) -> Complex64 {
        move |xi| Complex64::new(0.0, dispersion_symbol(alpha, xi as f64))
    }

    /// The free propagator `e^{−t∂ₓ|D|^{α−1}}`.
    pub fn free_propagator(alpha: f64, t: f64) -> impl Fn(i64) -> Complex64 {
        move |xi| Complex64::from_polar(1.0, -t * dispersion_symbol(alpha, xi as f64))
    }
}

/// Norm families evaluated on fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// `(2π Σ ⟨ξ⟩^{2s}|û|²)^{1/2}`.
    Hs(f64),
    /// Homogeneous `(2π Σ_{ξ≠0} |ξ|^{2s}|û|²)^{1/2}`.
    HomHs(f64),
    /// `sup_k 2^{ks} ‖P_k u‖_∞`.
    Zygmund(f64),
    Linf,
    /// `Σ_{j≤k} ‖∂ₓ^j u‖_∞`.
    WkInf(u32),
}

pub fn norm(u: &Field, kind: NormKind) -> f64 {
    let g = u.grid();
    match kind {
        NormKind::Hs(s) => {
            let sum: f64 = u
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let xi = g.freq(i) as f64;
                    (1.0 + xi * xi).powf(s) * c.norm_sqr()
                })
                .sum();
            (2.0 * PI * sum).sqrt()
        }
        NormKind::HomHs(s) => {
            let sum: f64 = u
                .coeffs()
                .iter()
                .enumerate()
                .filter(|(i, _)| g.freq(*i) != 0)
                .map(|(i, c)| (g.freq(i).abs() as f64).powf(2.0 * s) * c.norm_sqr())
                .sum();
            (2.0 * PI * sum).sqrt()
        }
        NormKind::Zygmund(s) => lp_decompose(u)
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| 2f64.powf(k as f64 * s) * sup(b))
            .fold(0.0, f64::max),
        NormKind::Linf => sup(u),
        NormKind::WkInf(k) => (0..=k)
            .map(|j| {
                let d = multiplier_apply(u, mult::deriv_pow(j)).expect("finite multiplier");
                sup(&d)
            })
            .sum(),
    }
}

fn sup(u: &Field) -> f64 {
    u.values().iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Product `uv` under the 2/3 rule: inputs and output are truncated to
/// `|ξ| ≤ N/3` so that no aliased mode survives.
pub fn dealiased_product(u: &Field, v: &Field) -> Result<Field> {
    let g = u.grid();
    g.check_same(&v.grid())?;
    let cap = g.dealias_cap();
    let a = u.truncate(cap).values();
    let b = v.truncate(cap).values();
    let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let is_real = u.is_real() && v.is_real();
    let f = Field::from_coeffs(g, g.forward(&prod), is_real);
    Ok(f.truncate(cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_band_limited(grid: Grid, band: i64, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = vec![c(0.0, 0.0); grid.n_points()];
        for xi in -band..=band {
            coeffs[grid.index(xi).unwrap()] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        Field::from_coeffs(grid, coeffs, true)
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn forward_matches_direct_sum() {
        let g = Grid::new(16).unwrap();
        let vals: Vec<Complex64> = (0..16).map(|j| c((j as f64).sin(), (j as f64 * 0.3).cos())).collect();
        let coeffs = g.forward(&vals);
        for (i, &ch) in coeffs.iter().enumerate() {
            let xi = g.freq(i) as f64;
            let direct: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -xi * g.node(j)))
                .sum::<Complex64>()
                / 16.0;
            assert!((ch - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_in_its_slot() {
        let g = Grid::new(32).unwrap();
        let u = Field::from_complex_values(
            g,
            &g.nodes().iter().map(|&x| Complex64::from_polar(1.0, 5.0 * x)).collect::<Vec<_>>(),
        );
        assert!((u.coeff(5) - c(1.0, 0.0)).norm() < 1e-14);
        assert!(u.coeffs().iter().enumerate().all(|(i, z)| g.freq(i) == 5 || z.norm() < 1e-14));
    }

    #[test]
    fn constant_has_single_block() {
        let g = Grid::new(64).unwrap();
        let u = Field::from_fn(g, |_| 1.0);
        let blocks = lp_decompose(&u);
        assert!((blocks.blocks[0].coeff(0) - c(1.0, 0.0)).norm() < 1e-14);
        for b in &blocks.blocks[1..] {
            assert!(b.max_coeff() < 1e-15);
        }
    }

    #[test]
    fn block_masses_at_three() {
        // P₀(3) = 0 and P₁(3) = P₀(3/2) − P₀(3) = 1 − S(1/2) = 1/2, P₂(3) = P₀(3/4) − P₀(3/2) = 1/2.
        let g = Grid::new(64).unwrap();
        let u = Field::mode(g, 3);
        let blocks = lp_decompose(&u);
        let masses: Vec<f64> = blocks.blocks.iter().map(|b| b.coeff(3).re).collect();
        assert!((masses[1] - 0.5).abs() < 1e-15);
        assert!((masses[2] - 0.5).abs() < 1e-15);
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_derivative_of_sine() {
        let g = Grid::new(32).unwrap();
        let u = Field::from_fn(g, |x| (2.0 * x).sin());
        let p = multiplier_apply(&u, mult::inv_deriv()).unwrap();
        let expect = Field::from_fn(g, |x| -(2.0 * x).cos() / 2.0);
        assert!(p.sub(&expect).max_coeff() < 1e-15);
        assert!(p.coeff(0).norm() < 1e-16);
        assert!(p.is_real());
    }

    #[test]
    fn unimodular_multiplier_shifts_phase() {
        let g = Grid::new(64).unwrap();
        let (alpha, t, k) = (1.5, 0.7, 6i64);
        let u = Field::mode(g, k);
        let out = multiplier_apply(&u, mult::free_propagator(alpha, t)).unwrap();
        let phase = -t * (k as f64) * (k as f64).powf(alpha - 1.0);
        assert!((out.coeff(k) - Complex64::from_polar(1.0, phase)).norm() < 1e-13);
        assert!((out.coeff(k).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_multiplier_is_reported() {
        let g = Grid::new(16).unwrap();
        let u = Field::from_fn(g, |x| 1.0 + x.cos());
        let err = multiplier_apply(&u, |xi| c(1.0 / xi as f64, 0.0)).unwrap_err();
        assert_eq!(err, Error::NonFiniteMultiplier(0));
    }

    #[test]
    fn sobolev_norms_closed_forms() {
        let g = Grid::new(64).unwrap();
        let one = Field::from_fn(g, |_| 1.0);
        let k = 5.0f64;
        let cosk = Field::from_fn(g, |x| (k * x).cos());
        for s in [-1.0, 0.0, 0.5, 2.0] {
            assert!((norm(&one, NormKind::Hs(s)) - (2.0 * PI).sqrt()).abs() < 1e-12);
            let expect = PI.sqrt() * (1.0 + k * k).powf(0.5 * s);
            assert!((norm(&cosk, NormKind::Hs(s)) - expect).abs() < 1e-11 * expect);
        }
    }

    #[test]
    fn zygmund_of_single_ring_mode() {
        let g = Grid::new(64).unwrap();
        let u = Field::mode(g, 8);
        let w = lp_weight(3, 8.0);
        assert_eq!(w, 1.0);
        for s in [0.5, 1.5] {
            let z = norm(&u, NormKind::Zygmund(s));
            assert!((z - 2f64.powf(3.0 * s) * w).abs() < 1e-12);
        }
    }

    #[test]
    fn wk_inf_sums_derivatives() {
        let g = Grid::new(32).unwrap();
        let u = Field::from_fn(g, |x| (3.0 * x).sin());
        assert!((norm(&u, NormKind::WkInf(2)) - (1.0 + 3.0 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn dealiased_square_of_cosine() {
        let g = Grid::new(32).unwrap();
        let u = Field::from_fn(g, |x| x.cos());
        let sq = dealiased_product(&u, &u).unwrap();
        let expect = Field::from_fn(g, |x| 0.5 * (1.0 + (2.0 * x).cos()));
        assert!(sq.sub(&expect).max_coeff() < 1e-15);
    }

    #[test]
    fn bernstein_constants_are_scale_free() {
        // Over blocks with spectrum in |ξ| ≤ λ, the ratios ‖∂u‖∞/(λ‖u‖∞) and
        // ‖u‖∞/(λ^{1/2}‖u‖₂) stay below a λ-independent constant.
        let g = Grid::new(256).unwrap();
        let mut worst_d: f64 = 0.0;
        let mut worst_l2: f64 = 0.0;
        let mut lambda = 4i64;
        while lambda <= 64 {
            for seed in 0..10 {
                let u = random_band_limited(g, lambda, seed);
                let du = multiplier_apply(&u, mult::deriv()).unwrap();
                worst_d = worst_d.max(norm(&du, NormKind::Linf) / (lambda as f64 * norm(&u, NormKind::Linf)));
                worst_l2 = worst_l2.max(norm(&u, NormKind::Linf) / ((lambda as f64).sqrt() * u.l2_norm()));
            }
            lambda *= 2;
        }
        assert!(worst_d <= 1.0 + 1e-9, "derivative Bernstein ratio {worst_d}");
        assert!(worst_l2 <= 1.0, "L2 Bernstein ratio {worst_l2}");
    }

    #[test]
    fn ring_bernstein_lower_bound() {
        let g = Grid::new(256).unwrap();
        for mu in [4i64, 8, 16, 32] {
            for seed in 0..5 {
                let u = random_band_limited(g, 2 * mu, seed);
                let ring = multiplier_apply(&u, |xi| c(if xi.abs() >= mu { 1.0 } else { 0.0 }, 0.0)).unwrap();
                let du = multiplier_apply(&ring, mult::deriv()).unwrap();
                assert!(mu as f64 * ring.l2_norm() <= du.l2_norm() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn zygmund_summation_bound() {
        // Blocks u_q = 2^{-qr} M cos(3·2^{q-1} x) satisfy 2^{qr}‖u_q‖∞ ≤ M.
        let g = Grid::new(512).unwrap();
        for r in [0.25, 0.5, 1.5] {
            let mut sum = Field::zeros(g);
            for q in 1..8 {
                let k = 3.0 * 2f64.powi(q - 1);
                let amp = 2f64.powf(-(q as f64) * r);
                sum = sum.add(&Field::from_fn(g, move |x| amp * (k * x).cos()));
            }
            let bound = 4.0 / (1.0 - 2f64.powf(-r));
            assert!(norm(&sum, NormKind::Zygmund(r)) <= bound);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(vals in prop::collection::vec(-10.0f64..10.0, 64)) {
            let g = Grid::new(64).unwrap();
            let cv: Vec<Complex64> = vals.iter().map(|&v| c(v, 0.5 * v)).collect();
            let back = g.inverse(&g.forward(&cv));
            let scale = cv.iter().fold(1e-300f64, |m, z| m.max(z.norm()));
            for (a, b) in cv.iter().zip(&back) {
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn blocks_partition_unity(seed in 0u64..1000, band in 1i64..63) {
            let g = Grid::new(128).unwrap();
            let u = random_band_limited(g, band, seed);
            let rec = lp_decompose(&u).reconstruct();
            prop_assert!(rec.sub(&u).max_coeff() <= 1e-12 * u.max_coeff());
        }

        #[test]
        fn blocks_stay_in_their_rings(seed in 0u64..1000) {
            let g = Grid::new(128).unwrap();
            let u = random_band_limited(g, 63, seed);
            let blocks = lp_decompose(&u);
            for (k, b) in blocks.blocks.iter().enumerate() {
                for xi in g.frequencies() {
                    let a = xi.abs() as f64;
                    let inside = if k == 0 {
                        a < 2.0
                    } else {
                        a > 2f64.powi(k as i32 - 1) && a < 2f64.powi(k as i32 + 1)
                    };
                    if !inside {
                        prop_assert!(b.coeff(xi).norm() == 0.0);
                    }
                }
            }
        }

        #[test]
        fn parseval_matches_quadrature(seed in 0u64..1000) {
            let g = Grid::new(64).unwrap();
            let u = random_band_limited(g, 31, seed);
            let quad: f64 = u.real_values().iter().map(|v| v * v).sum::<f64>() * 2.0 * PI / 64.0;
            let h0 = norm(&u, NormKind::Hs(0.0));
            prop_assert!((h0 * h0 - quad).abs() <= 1e-12 * quad);
        }

        #[test]
        fn real_fields_are_hermitian(vals in prop::collection::vec(-5.0f64..5.0, 32)) {
            let g = Grid::new(32).unwrap();
            let u = Field::from_real_values(g, &vals);
            prop_assert!(u.hermitian_defect() <= 1e-12);
            prop_assert!(u.coeff(-16).norm() == 0.0);
        }
    }
}

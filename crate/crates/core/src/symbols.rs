//! Symbols `a(x, ξ)` on the torus, admissible cutoffs and symbol seminorms.
//!
//! A symbol is stored by its x-Fourier coefficients `â(η, ξ)`, one row per `η`
//! and one column per `ξ`, both in increasing-frequency order. Products and
//! other nonlinear operations act on the x-grid values column by column.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{norm, smoothstep, Field, Grid, NormKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The admissible cutoff `ψ(η, ξ) = ramp(|ξ| − B|η| − b)` with a quintic ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub big_b: f64,
    pub little_b: f64,
}

impl Cutoff {
    pub fn new(big_b: f64, little_b: f64) -> Result<Self> {
        if !(big_b > 1.0) || !(little_b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff needs B > 1 and b > 0, got B = {big_b}, b = {little_b}"
            )));
        }
        Ok(Cutoff { big_b, little_b })
    }

    pub fn eval(&self, eta: f64, xi: f64) -> f64 {
        smoothstep(xi.abs() - self.big_b * eta.abs() - self.little_b)
    }

    pub fn at(&self, eta: i64, xi: i64) -> f64 {
        self.eval(eta as f64, xi as f64)
    }

    /// True when the ramp only takes the values 0 and 1 on the integer lattice.
    pub fn is_sharp_on_lattice(&self) -> bool {
        self.big_b.fract() == 0.0 && self.little_b.fract() == 0.0
    }

    /// Aperture `BB'/(B+B'+1)` that contains the support of `T_a T_b`
    /// when `T_a` uses `self` and `T_b` uses `other`.
    pub fn composed_aperture(&self, other: &Cutoff) -> f64 {
        let (b1, b2) = (self.big_b, other.big_b);
        b1 * b2 / (b1 + b2 + 1.0)
    }
}

/// A symbol `a(x, ξ)` with declared order `m` and x-regularity `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    grid: Grid,
    coeffs: Vec<Complex64>,
    pub order_m: f64,
    pub declared_rho: f64,
}

impl Symbol {
    pub fn zeros(grid: Grid, order_m: f64, declared_rho: f64) -> Self {
        let n = grid.n_points();
        Symbol {
            grid,
            coeffs: vec![ZERO; n * n],
            order_m,
            declared_rho,
        }
    }

    /// Builds a symbol from its x-coefficients `coeff(η, ξ)`.
    pub fn from_coeff_fn(
        grid: Grid,
        order_m: f64,
        declared_rho: f64,
        f: impl Fn(i64, i64) -> Complex64,
    ) -> Self {
        let mut s = Self::zeros(grid, order_m, declared_rho);
        let n = grid.n_points();
        for r in 0..n {
            for c in 0..n {
                s.coeffs[r * n + c] = f(grid.freq(r), grid.freq(c));
            }
        }
        s
    }

    /// Builds a symbol from its values `a(x_j, ξ)` on the grid.
    pub fn from_fn(
        grid: Grid,
        order_m: f64,
        declared_rho: f64,
        f: impl Fn(f64, i64) -> Complex64,
    ) -> Self {
        let n = grid.n_points();
        let nodes = grid.nodes();
        let mut s = Self::zeros(grid, order_m, declared_rho);
        for c in 0..n {
            let xi = grid.freq(c);
            let vals: Vec<Complex64> = nodes.iter().map(|&x| f(x, xi)).collect();
            s.set_column(c, &grid.forward(&vals));
        }
        s
    }

    /// The Fourier multiplier `m(ξ)`, independent of x.
    pub fn multiplier(grid: Grid, order_m: f64, m: impl Fn(i64) -> Complex64) -> Self {
        let mut s = Self::zeros(grid, order_m, f64::INFINITY);
        let r = grid.index(0).unwrap();
        let n = grid.n_points();
        for c in 0..n {
            s.coeffs[r * n + c] = m(grid.freq(c));
        }
        s
    }

    /// The separated symbol `u(x)·m(ξ)`.
    pub fn separated(u: &Field, order_m: f64, declared_rho: f64, m: impl Fn(i64) -> Complex64) -> Self {
        let grid = u.grid();
        let mv: Vec<Complex64> = grid.frequencies().map(m).collect();
        Self::from_coeff_fn(grid, order_m, declared_rho, |eta, xi| {
            u.coeff(eta) * mv[grid.index(xi).unwrap()]
        })
    }

    /// A smooth random symbol of order `m`: a sum of x-modes `|η| ≤ x_band`
    /// with exponentially decaying amplitudes times `⟨ξ⟩^m(1 + d·ξ/⟨ξ⟩)`.
    pub fn random(grid: Grid, order_m: f64, x_band: i64, real: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.n_points();
        let mut amp = vec![ZERO; n];
        let mut tilt = vec![ZERO; n];
        for eta in -x_band..=x_band {
            let i = grid.index(eta).unwrap();
            let decay = (-(eta.abs() as f64) * 0.5).exp();
            amp[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay;
            tilt[i] = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)) * decay;
        }
        if real {
            for eta in 0..=x_band {
                let (i, j) = (grid.index(eta).unwrap(), grid.index(-eta).unwrap());
                if eta == 0 {
                    amp[i].im = 0.0;
                    tilt[i].im = 0.0;
                } else {
                    amp[j] = amp[i].conj();
                    tilt[j] = tilt[i].conj();
                }
            }
        }
        Self::from_coeff_fn(grid, order_m, f64::INFINITY, |eta, xi| {
            let i = grid.index(eta).unwrap();
            let x = xi as f64;
            let jb = (1.0 + x * x).sqrt();
            (amp[i] + tilt[i] * (x / jb)) * jb.powf(order_m)
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    /// Raw coefficients, row-major over `η` then `ξ`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn from_raw(grid: Grid, coeffs: Vec<Complex64>, order_m: f64, declared_rho: f64) -> Self {
        assert_eq!(coeffs.len(), grid.n_points() * grid.n_points());
        Symbol {
            grid,
            coeffs,
            order_m,
            declared_rho,
        }
    }

    /// `â(η, ξ)`, zero off the lattice.
    pub fn coeff(&self, eta: i64, xi: i64) -> Complex64 {
        match (self.grid.index(eta), self.grid.index(xi)) {
            (Some(r), Some(c)) => self.coeffs[r * self.n_points() + c],
            _ => ZERO,
        }
    }

    pub fn set_coeff(&mut self, eta: i64, xi: i64, v: Complex64) {
        let n = self.n_points();
        let r = self.grid.index(eta).expect("eta off the lattice");
        let c = self.grid.index(xi).expect("xi off the lattice");
        self.coeffs[r * n + c] = v;
    }

    pub(crate) fn at_index(&self, r: usize, c: usize) -> Complex64 {
        self.coeffs[r * self.n_points() + c]
    }

    pub(crate) fn column(&self, c: usize) -> Vec<Complex64> {
        let n = self.n_points();
        (0..n).map(|r| self.coeffs[r * n + c]).collect()
    }

    fn set_column(&mut self, c: usize, col: &[Complex64]) {
        let n = self.n_points();
        for (r, v) in col.iter().enumerate() {
            self.coeffs[r * n + c] = *v;
        }
    }

    /// The function `x ↦ a(x, ξ)` as a field.
    pub fn column_field(&self, xi: i64) -> Field {
        let c = self.grid.index(xi).expect("xi off the lattice");
        Field::from_coeffs(self.grid, self.column(c), false)
    }

    /// Values `a(x_j, ξ)`, returned as one vector per `ξ` column.
    pub fn tabulate(&self) -> Vec<Vec<Complex64>> {
        (0..self.n_points())
            .map(|c| self.grid.inverse(&self.column(c)))
            .collect()
    }

    /// True when every coefficient off the `η = 0` row vanishes.
    pub fn is_x_independent(&self) -> bool {
        let n = self.n_points();
        let r0 = self.grid.index(0).unwrap();
        self.coeffs
            .iter()
            .enumerate()
            .all(|(k, v)| k / n == r0 || *v == ZERO)
    }

    fn map_coeffs(&self, f: impl Fn(i64, i64, Complex64) -> Complex64) -> Symbol {
        let n = self.n_points();
        let g = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &v)| f(g.freq(k / n), g.freq(k % n), v))
            .collect();
        Symbol {
            grid: g,
            coeffs,
            order_m: self.order_m,
            declared_rho: self.declared_rho,
        }
    }

    pub fn scale(&self, lambda: Complex64) -> Symbol {
        self.map_coeffs(|_, _, v| v * lambda)
    }

    pub fn add(&self, other: &Symbol) -> Symbol {
        assert_eq!(self.grid, other.grid, "symbols live on different grids");
        let mut s = self.clone();
        for (a, b) in s.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        s.order_m = self.order_m.max(other.order_m);
        s.declared_rho = self.declared_rho.min(other.declared_rho);
        s
    }

    pub fn sub(&self, other: &Symbol) -> Symbol {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `∂ₓ^j a`.
    pub fn dx(&self, j: u32) -> Symbol {
        let mut s = self.map_coeffs(|eta, _, v| v * Complex64::new(0.0, eta as f64).powu(j));
        s.declared_rho = self.declared_rho - j as f64;
        s
    }

    /// Forward difference `Δ_ξ^j a(x, ξ)`. Columns whose stencil leaves the
    /// lattice are set to zero.
    pub fn dxi(&self, j: usize) -> Symbol {
        let g = self.grid;
        let n = self.n_points();
        let binom = binomials(j);
        let mut s = Symbol::zeros(g, self.order_m - j as f64, self.declared_rho);
        for c in 0..n.saturating_sub(j) {
            for r in 0..n {
                let mut acc = ZERO;
                for (l, b) in binom.iter().enumerate() {
                    let sign = if (j - l) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += self.coeffs[r * n + c + l] * (sign * b);
                }
                s.coeffs[r * n + c] = acc;
            }
        }
        s
    }

    /// `conj(a(x, ξ))`, whose coefficients are `conj(â(−η, ξ))`.
    pub fn conj(&self) -> Symbol {
        self.map_coeffs(|eta, xi, _| self.coeff(-eta, xi).conj())
    }

    /// Pointwise map of the values `a(x_j, ξ) ↦ f(a(x_j, ξ), ξ)`.
    pub fn map_values(&self, f: impl Fn(Complex64, i64) -> Complex64 + Sync) -> Symbol {
        let g = self.grid;
        let mut s = self.clone();
        for c in 0..self.n_points() {
            let xi = g.freq(c);
            let vals: Vec<Complex64> = g.inverse(&self.column(c)).into_iter().map(|v| f(v, xi)).collect();
            s.set_column(c, &g.forward(&vals));
        }
        s
    }

    /// Pointwise product `a(x, ξ)·b(x, ξ)` formed on the x-grid.
    pub fn mul(&self, other: &Symbol) -> Symbol {
        assert_eq!(self.grid, other.grid, "symbols live on different grids");
        let g = self.grid;
        let mut s = Symbol::zeros(g, self.order_m + other.order_m, self.declared_rho.min(other.declared_rho));
        for c in 0..self.n_points() {
            let a = g.inverse(&self.column(c));
            let b = g.inverse(&other.column(c));
            let p: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
            s.set_column(c, &g.forward(&p));
        }
        s
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

fn binomials(j: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..j {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// `σ_a`: coefficients multiplied by `ψ(η, ξ)`.
pub fn regularize(a: &Symbol, c: &Cutoff) -> Symbol {
    a.map_coeffs(|eta, xi, v| v * c.at(eta, xi))
}

fn x_norm(f: &Field, rho: f64) -> f64 {
    if rho.fract() == 0.0 && rho >= 0.0 {
        norm(f, NormKind::WkInf(rho as u32))
    } else {
        norm(f, NormKind::Zygmund(rho))
    }
}

/// `M^m_ρ(a; k) = sup_{j≤k} sup_{ξ≠0} (1+|ξ|)^{j−m} ‖Δ_ξ^j a(·, ξ)‖_{W^{ρ,∞}}`.
///
/// Integer `ρ` uses `Σ_{i≤ρ}‖∂ₓ^i·‖_∞`, fractional `ρ` the Zygmund norm. The
/// supremum runs over frequencies whose difference stencil stays on the lattice.
pub fn seminorm(a: &Symbol, m: f64, rho: f64, k: usize) -> Result<f64> {
    let g = a.grid();
    if k > g.n_points() / 4 {
        return Err(Error::DomainTooSmall {
            order: k,
            n_points: g.n_points(),
        });
    }
    let mut best: f64 = 0.0;
    for j in 0..=k {
        let d = if j == 0 { a.clone() } else { a.dxi(j) };
        for xi in g.min_freq()..=g.max_freq() - j as i64 {
            if xi == 0 {
                continue;
            }
            let weight = (1.0 + xi.abs() as f64).powf(j as f64 - m);
            best = best.max(weight * x_norm(&d.column_field(xi), rho));
        }
    }
    Ok(best)
}

/// Table of seminorms indexed by (ξ-difference count, integer x-regularity).
#[derive(Debug, Clone, PartialEq)]
pub struct SeminormReport {
    pub values: BTreeMap<(usize, u32), f64>,
}

impl SeminormReport {
    pub fn get(&self, k: usize, n: u32) -> Option<f64> {
        self.values.get(&(k, n)).copied()
    }
}

pub fn seminorm_report(a: &Symbol, m: f64, k_max: usize, n_max: u32) -> Result<SeminormReport> {
    let mut values = BTreeMap::new();
    for k in 0..=k_max {
        for n in 0..=n_max {
            values.insert((k, n), seminorm(a, m, n as f64, k)?);
        }
    }
    Ok(SeminormReport { values })
}

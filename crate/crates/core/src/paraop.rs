//! Paradifferential operators `T_a`, their symbolic calculus and numerical order probes.
//!
//! Operators are materialized as dense matrices acting on Fourier coefficients:
//! row `ξ'` and column `ξ` in increasing-frequency order.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{dealiased_product, Field, Grid};
use crate::symbols::{Cutoff, Symbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A linear operator on the grid's Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: Grid,
    pub entries: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn new(grid: Grid, entries: DMatrix<Complex64>) -> Self {
        let n = grid.n_points();
        assert_eq!(entries.shape(), (n, n), "matrix does not match grid");
        OperatorMatrix { grid, entries }
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n_points();
        Self::new(grid, DMatrix::zeros(n, n))
    }

    pub fn identity(grid: Grid) -> Self {
        let n = grid.n_points();
        Self::new(grid, DMatrix::identity(n, n))
    }

    /// The Fourier multiplier `m(D)` as a diagonal matrix.
    pub fn multiplier(grid: Grid, m: impl Fn(i64) -> Complex64) -> Self {
        let d = DVector::from_iterator(grid.n_points(), grid.frequencies().map(m));
        Self::new(grid, DMatrix::from_diagonal(&d))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Entry at output frequency `out` and input frequency `inp`.
    pub fn entry(&self, out: i64, inp: i64) -> Complex64 {
        match (self.grid.index(out), self.grid.index(inp)) {
            (Some(r), Some(c)) => self.entries[(r, c)],
            _ => ZERO,
        }
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.grid.check_same(&u.grid())?;
        let v = DVector::from_column_slice(u.coeffs());
        let out = &self.entries * v;
        Ok(Field::from_coeffs(self.grid, out.as_slice().to_vec(), false))
    }

    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::new(self.grid, &self.entries * &other.entries)
    }

    pub fn add(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::new(self.grid, &self.entries + &other.entries)
    }

    pub fn sub(&self, other: &OperatorMatrix) -> OperatorMatrix {
        Self::new(self.grid, &self.entries - &other.entries)
    }

    pub fn scale(&self, lambda: Complex64) -> OperatorMatrix {
        Self::new(self.grid, &self.entries * lambda)
    }

    /// Conjugate transpose, the `L²` adjoint.
    pub fn adjoint(&self) -> OperatorMatrix {
        Self::new(self.grid, self.entries.adjoint())
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entry modulus among positions with `mask(out, inp)`.
    pub fn max_abs_where(&self, mask: impl Fn(i64, i64) -> bool) -> f64 {
        let g = self.grid;
        let n = g.n_points();
        let mut m: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                if mask(g.freq(r), g.freq(c)) {
                    m = m.max(self.entries[(r, c)].norm());
                }
            }
        }
        m
    }

    /// Operator norm `H^{s+m} → H^s`, the largest singular value of `W_s A W_{s+m}^{-1}`.
    pub fn sobolev_norm(&self, s: f64, m: f64) -> f64 {
        let g = self.grid;
        let n = g.n_points();
        let w = |xi: i64, p: f64| (1.0 + (xi * xi) as f64).powf(0.5 * p);
        let weighted = DMatrix::from_fn(n, n, |r, c| {
            self.entries[(r, c)] * (w(g.freq(r), s) / w(g.freq(c), s + m))
        });
        spectral_norm(&weighted)
    }

    /// Operator norm on `L²`.
    pub fn l2_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Restriction to input frequencies `|ξ| ≤ band` (other columns zeroed).
    pub fn restrict_input(&self, band: i64) -> OperatorMatrix {
        let g = self.grid;
        let mut e = self.entries.clone();
        for c in 0..g.n_points() {
            if g.freq(c).abs() > band {
                e.column_mut(c).fill(ZERO);
            }
        }
        Self::new(g, e)
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |a: f64, &b| a.max(b))
}

/// `T_a` with entries `(ξ+η, ξ) = ψ(η, ξ)·â(η, ξ)`; outputs off the lattice are dropped.
pub fn materialize(a: &Symbol, c: &Cutoff) -> OperatorMatrix {
    let g = a.grid();
    let n = g.n_points();
    let mut e = DMatrix::zeros(n, n);
    for col in 0..n {
        let xi = g.freq(col);
        for row in 0..n {
            let eta = g.freq(row);
            let psi = c.at(eta, xi);
            if psi == 0.0 {
                continue;
            }
            if let Some(out) = g.index(xi + eta) {
                e[(out, col)] = a.at_index(row, col) * psi;
            }
        }
    }
    OperatorMatrix::new(g, e)
}

/// `T_a u` through the dense matrix.
pub fn apply(a: &Symbol, c: &Cutoff, u: &Field) -> Result<Field> {
    a.grid().check_same(&u.grid())?;
    let out = materialize(a, c).apply(u)?;
    Ok(realify(out, u.is_real() && symbol_is_real(a)))
}

fn symbol_is_real(a: &Symbol) -> bool {
    let g = a.grid();
    let n = g.n_points() as i64;
    let lim = n / 2 - 1;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for eta in -lim..=lim {
        for xi in -lim..=lim {
            if (a.coeff(eta, xi) - a.coeff(-eta, -xi).conj()).norm() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

fn realify(f: Field, real: bool) -> Field {
    if real {
        Field::from_coeffs(f.grid(), f.into_coeffs(), true)
    } else {
        f
    }
}

/// The paraproduct `T_a u` for a function `a(x)`, by dense summation.
pub fn paraproduct_dense(a: &Field, c: &Cutoff, u: &Field) -> Result<Field> {
    let g = a.grid();
    g.check_same(&u.grid())?;
    let mut out = vec![ZERO; g.n_points()];
    for xi in g.frequencies() {
        let ux = u.coeff(xi);
        if ux == ZERO {
            continue;
        }
        for eta in g.frequencies() {
            let psi = c.at(eta, xi);
            if psi == 0.0 {
                continue;
            }
            if let Some(o) = g.index(xi + eta) {
                out[o] += a.coeff(eta) * ux * psi;
            }
        }
    }
    Ok(Field::from_coeffs(g, out, a.is_real() && u.is_real()))
}

/// The paraproduct `T_a u` for a function `a(x)`.
///
/// When the cutoff is {0,1}-valued on the lattice, input modes sharing the same
/// admissible band `|η| ≤ K(ξ)` are grouped and each group is multiplied by the
/// truncated `a` with an FFT on a doubled grid, so no output wraps around.
/// Otherwise falls back to the dense sum.
pub fn paraproduct(a: &Field, c: &Cutoff, u: &Field) -> Result<Field> {
    let g = a.grid();
    g.check_same(&u.grid())?;
    if !c.is_sharp_on_lattice() {
        return paraproduct_dense(a, c, u);
    }
    let n = g.n_points();
    let big = Grid::new(2 * n)?;
    let (bb, lb) = (c.big_b as i64, c.little_b as i64);
    let band = |xi: i64| -> Option<i64> {
        let k = xi.abs() - lb - 1;
        if k < 0 {
            None
        } else {
            Some(k / bb)
        }
    };
    let mut groups: std::collections::BTreeMap<i64, Vec<i64>> = Default::default();
    for xi in g.frequencies() {
        if u.coeff(xi) == ZERO {
            continue;
        }
        if let Some(k) = band(xi) {
            groups.entry(k.min(n as i64 / 2)).or_default().push(xi);
        }
    }
    let mut acc = vec![ZERO; 2 * n];
    for (k, xis) in groups {
        let mut ac = vec![ZERO; 2 * n];
        for eta in -k..=k {
            if let Some(i) = big.index(eta) {
                ac[i] = a.coeff(eta);
            }
        }
        let mut uc = vec![ZERO; 2 * n];
        for xi in xis {
            uc[big.index(xi).unwrap()] = u.coeff(xi);
        }
        let av = big.inverse(&ac);
        let uv = big.inverse(&uc);
        let prod: Vec<Complex64> = av.iter().zip(&uv).map(|(x, y)| x * y).collect();
        for (s, v) in acc.iter_mut().zip(big.forward(&prod)) {
            *s += v;
        }
    }
    let out: Vec<Complex64> = g.frequencies().map(|xi| acc[big.index(xi).unwrap()]).collect();
    Ok(Field::from_coeffs(g, out, a.is_real() && u.is_real()))
}

/// `a # b = Σ_{α<ρ} (1/(i^α α!)) Δ_ξ^α a · ∂ₓ^α b` with forward differences.
pub fn compose_sharp(a: &Symbol, b: &Symbol, rho: f64) -> Result<Symbol> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("composition needs rho > 0, got {rho}")));
    }
    a.grid().check_same(&b.grid())?;
    let mut out = a.mul(b);
    let mut fact = 1.0;
    let mut alpha = 1usize;
    while (alpha as f64) < rho {
        fact *= alpha as f64;
        let coef = Complex64::new(0.0, -1.0).powu(alpha as u32) / fact;
        let term = a.dxi(alpha).mul(&b.dx(alpha as u32)).scale(coef);
        out = out.add(&term);
        alpha += 1;
    }
    out.order_m = a.order_m + b.order_m;
    out.declared_rho = a.declared_rho.min(b.declared_rho);
    Ok(out)
}

/// `a* = Σ_{α<ρ} (1/(i^α α!)) Δ_ξ^α ∂ₓ^α conj(a)`.
pub fn adjoint_star(a: &Symbol, rho: f64) -> Result<Symbol> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("adjoint needs rho > 0, got {rho}")));
    }
    let ca = a.conj();
    let mut out = ca.clone();
    let mut fact = 1.0;
    let mut alpha = 1usize;
    while (alpha as f64) < rho {
        fact *= alpha as f64;
        let coef = Complex64::new(0.0, -1.0).powu(alpha as u32) / fact;
        out = out.add(&ca.dx(alpha as u32).dxi(alpha).scale(coef));
        alpha += 1;
    }
    out.order_m = a.order_m;
    out.declared_rho = a.declared_rho;
    Ok(out)
}

/// Log-log fit of operator growth against probe frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub probe_range: (i64, i64),
}

/// Envelope width, in modes, of the probing wave packets.
pub const PROBE_WIDTH: f64 = 4.0;
const PROBE_FLOOR: f64 = 1e-14;

/// Unit-`L²` Gaussian packet centered at frequency `k`.
pub fn wave_packet(grid: Grid, k: i64) -> Field {
    let coeffs: Vec<Complex64> = grid
        .frequencies()
        .map(|xi| {
            let d = (xi - k) as f64 / PROBE_WIDTH;
            Complex64::new((-0.5 * d * d).exp(), 0.0)
        })
        .collect();
    let f = Field::from_coeffs(grid, coeffs, false);
    let nrm = f.l2_norm();
    f.scale(1.0 / nrm)
}

/// Probe frequencies `8, 16, …, N/4`.
pub fn probe_centers(grid: Grid) -> Vec<i64> {
    let mut ks = Vec::new();
    let mut k = 8i64;
    while k <= grid.n_points() as i64 / 4 {
        ks.push(k);
        k *= 2;
    }
    ks
}

/// Fits `log‖A·packet_k‖` against `log⟨k⟩`; each center uses the larger of the
/// responses to the packets at `+k` and `−k`.
pub fn order_probe(a: &OperatorMatrix) -> Result<OrderEstimate> {
    let g = a.grid();
    let mut pts = Vec::new();
    for k in probe_centers(g) {
        let r = a
            .apply(&wave_packet(g, k))?
            .l2_norm()
            .max(a.apply(&wave_packet(g, -k))?.l2_norm());
        if r > PROBE_FLOOR {
            pts.push((0.5 * (1.0 + (k * k) as f64).ln(), r.ln()));
        }
    }
    let ks = probe_centers(g);
    let range = (*ks.first().unwrap_or(&0), *ks.last().unwrap_or(&0));
    fit_line(&pts, range)
}

pub(crate) fn fit_line(pts: &[(f64, f64)], range: (i64, i64)) -> Result<OrderEstimate> {
    if pts.len() < 2 {
        return Err(Error::DegenerateProbe { floor: PROBE_FLOOR });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderEstimate {
        slope,
        intercept,
        residual,
        probe_range: range,
    })
}

/// `ab − T_a b − T_b a`, with the product dealiased by the 2/3 rule.
pub fn bony_remainder(a: &Field, b: &Field, c: &Cutoff) -> Result<Field> {
    let prod = dealiased_product(a, b)?;
    let tab = paraproduct(a, c, b)?;
    let tba = paraproduct(b, c, a)?;
    Ok(prod.sub(&tab).sub(&tba))
}

/// Checks the two spectrum-localisation inclusions entry by entry: every nonzero
/// entry `(ξ', ξ)` of `T_a` satisfies `(1−1/B)|ξ| + b/B ≤ |ξ'| ≤ (1+1/B)|ξ| − b/B`.
pub fn spectrum_localisation_holds(t: &OperatorMatrix, c: &Cutoff) -> bool {
    let g = t.grid();
    let (bb, lb) = (c.big_b, c.little_b);
    for r in 0..g.n_points() {
        for col in 0..g.n_points() {
            if t.entries[(r, col)] == ZERO {
                continue;
            }
            let out = g.freq(r).abs() as f64;
            let inp = g.freq(col).abs() as f64;
            let hi = (1.0 + 1.0 / bb) * inp - lb / bb;
            let lo = (1.0 - 1.0 / bb) * inp + lb / bb;
            if out > hi + 1e-12 || out < lo - 1e-12 {
                return false;
            }
        }
    }
    true
}

/// True when every nonzero entry `(ξ', ξ)` has `ψ(ξ' − ξ, ξ) > 0` for the cutoff.
pub fn support_within(t: &OperatorMatrix, c: &Cutoff) -> bool {
    let g = t.grid();
    for r in 0..g.n_points() {
        for col in 0..g.n_points() {
            if t.entries[(r, col)] != ZERO && c.at(g.freq(r) - g.freq(col), g.freq(col)) <= 0.0 {
                return false;
            }
        }
    }
    true
}

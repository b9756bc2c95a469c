//! Implicit symbol constructions for the gauge transform.
//!
//! The central map is `L(p) = T_p D − D T_p` where `D = ∂ₓ|D|^{α−1}` has symbol
//! `d(ξ) = iξ|ξ|^{α−1}`. Because `D` is a Fourier multiplier, `L` acts entrywise:
//! the entry `(ξ+η, ξ)` of `L(p)` is `ψ(η, ξ)·δ(η, ξ)·p̂(η, ξ)` with
//! `δ(η, ξ) = d(ξ) − d(ξ+η)`. The solvable region is therefore
//! `{ψ > 0, η ≠ 0}`; the `η = 0` entries (Fourier multipliers) form the kernel
//! of `L` and are reported separately.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::flow::flow_from_generator;
use crate::paraop::{materialize, OperatorMatrix};
use crate::spectral::{mult, norm, Field, Grid, NormKind};
use crate::symbols::{seminorm, seminorm_report, Cutoff, SeminormReport, Symbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Aperture used by every gauge solve unless configured otherwise.
pub const DEFAULT_BIG_B: f64 = 8.0;
pub const DEFAULT_LITTLE_B: f64 = 2.0;
/// Entries with `ψ` below this value are not inverted when a symbol is read back
/// from an operator matrix.
pub const EXTRACTION_FLOOR: f64 = 1e-3;
const SMALL_DIVISOR_FACTOR: f64 = 1e-8;

pub fn default_cutoff() -> Cutoff {
    Cutoff {
        big_b: DEFAULT_BIG_B,
        little_b: DEFAULT_LITTLE_B,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    ExplicitFormula,
    NeumannSeries,
    Newton,
}

/// A constructed gauge symbol together with its diagnostics.
#[derive(Debug, Clone)]
pub struct GaugeSolution {
    pub p: Symbol,
    pub route: Route,
    /// Max-entry residual of the defining equation on `{ψ > 0, η ≠ 0}`.
    pub residual_norm: f64,
    /// Max-entry residual on the diagonal, which no choice of `p` can remove.
    pub multiplier_residual: f64,
    /// Max-entry residual outside the cutoff support.
    pub off_support_residual: f64,
    pub iterations: usize,
    pub seminorm_report: SeminormReport,
}

/// `δ(η, ξ) = iξ|ξ|^{α−1} − i(ξ+η)|ξ+η|^{α−1}`.
pub fn resonance_denominator(alpha: f64, eta: i64, xi: i64) -> Complex64 {
    let d = |k: i64| mult::dispersion_symbol(alpha, k as f64);
    Complex64::new(0.0, d(xi) - d(xi + eta))
}

/// Where an operator entry sits relative to the gauge equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `η ≠ 0` and `ψ(η, ξ) > 0`: the equation is imposed here.
    Solvable,
    /// `η = 0`: the kernel of `L`.
    Multiplier,
    Outside,
}

pub fn region(c: &Cutoff, out: i64, inp: i64) -> Region {
    let eta = out - inp;
    if eta == 0 {
        Region::Multiplier
    } else if c.at(eta, inp) > 0.0 {
        Region::Solvable
    } else {
        Region::Outside
    }
}

/// Coefficient positions `(flat index, η, ξ)` of the solvable region whose
/// output frequency `ξ+η` stays on the lattice.
fn solvable_positions(g: Grid, c: &Cutoff) -> Vec<(usize, i64, i64)> {
    let n = g.n_points();
    let mut out = Vec::new();
    for r in 0..n {
        let eta = g.freq(r);
        if eta == 0 {
            continue;
        }
        for col in 0..n {
            let xi = g.freq(col);
            if c.at(eta, xi) > 0.0 && g.index(xi + eta).is_some() {
                out.push((r * n + col, eta, xi));
            }
        }
    }
    out
}

fn check_divisor(alpha: f64, eta: i64, xi: i64, delta: Complex64) -> Result<()> {
    let scale = (eta.abs() as f64) * (xi.abs().max((xi + eta).abs()) as f64).powf(alpha - 1.0);
    let threshold = SMALL_DIVISOR_FACTOR * scale;
    if delta.norm() < threshold {
        return Err(Error::SmallDivisor {
            eta,
            xi,
            value: delta.norm(),
            threshold,
        });
    }
    Ok(())
}

/// `M D − D M` for the dispersion multiplier `D`.
pub fn dispersion_commutator(m: &OperatorMatrix, alpha: f64) -> OperatorMatrix {
    let g = m.grid();
    let n = g.n_points();
    let d: Vec<Complex64> = g.frequencies().map(mult::dispersion(alpha)).collect();
    let e = DMatrix::from_fn(n, n, |r, col| m.entries[(r, col)] * (d[col] - d[r]));
    OperatorMatrix::new(g, e)
}

/// Largest residual entry in each of the three regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionResidual {
    pub solvable: f64,
    pub multiplier: f64,
    pub outside: f64,
}

pub fn region_residual(diff: &OperatorMatrix, c: &Cutoff) -> RegionResidual {
    let g = diff.grid();
    let n = g.n_points();
    let mut res = RegionResidual {
        solvable: 0.0,
        multiplier: 0.0,
        outside: 0.0,
    };
    for r in 0..n {
        for col in 0..n {
            let v = diff.entries[(r, col)].norm();
            let slot = match region(c, g.freq(r), g.freq(col)) {
                Region::Solvable => &mut res.solvable,
                Region::Multiplier => &mut res.multiplier,
                Region::Outside => &mut res.outside,
            };
            *slot = slot.max(v);
        }
    }
    res
}

/// Reads a symbol back from an operator matrix on the solvable region,
/// dividing by `ψ` where `ψ > EXTRACTION_FLOOR`.
pub fn extract_symbol(m: &OperatorMatrix, c: &Cutoff, order_m: f64, declared_rho: f64) -> Symbol {
    let g = m.grid();
    let mut s = Symbol::zeros(g, order_m, declared_rho);
    for (_, eta, xi) in solvable_positions(g, c) {
        let psi = c.at(eta, xi);
        if psi > EXTRACTION_FLOOR {
            s.set_coeff(eta, xi, m.entry(xi + eta, xi) / psi);
        }
    }
    s
}

/// Solves `δ·p̂ = â` entrywise on the solvable region.
fn invert_explicit(a: &Symbol, alpha: f64, c: &Cutoff) -> Result<Symbol> {
    let g = a.grid();
    let mut coeffs = vec![ZERO; g.n_points() * g.n_points()];
    for (k, eta, xi) in solvable_positions(g, c) {
        let delta = resonance_denominator(alpha, eta, xi);
        check_divisor(alpha, eta, xi, delta)?;
        coeffs[k] = a.coeffs()[k] / delta;
    }
    Ok(Symbol::from_raw(g, coeffs, a.order_m + 1.0 - alpha, a.declared_rho + 1.0))
}

/// `δ₀(η, ξ) = −iαη|ξ|^{α−1}`, the linearization of `δ` in `η`.
fn cole_hopf_denominator(alpha: f64, eta: i64, xi: i64) -> Complex64 {
    Complex64::new(0.0, -alpha * eta as f64 * (xi.abs() as f64).powf(alpha - 1.0))
}

const NEUMANN_TOL: f64 = 1e-10;
const NEUMANN_MAX_TERMS: usize = 50;

/// `Σ_k E(r^k a)` with the Cole-Hopf parametrix `E` and remainder `r = 1 − L∘E`,
/// evaluated entrywise on the solvable region.
fn invert_neumann(a: &Symbol, alpha: f64, c: &Cutoff) -> Result<(Symbol, usize)> {
    let g = a.grid();
    let pos = solvable_positions(g, c);
    let mut ratio = Vec::with_capacity(pos.len());
    let mut term = Vec::with_capacity(pos.len());
    for &(k, eta, xi) in &pos {
        let delta = resonance_denominator(alpha, eta, xi);
        check_divisor(alpha, eta, xi, delta)?;
        let d0 = cole_hopf_denominator(alpha, eta, xi);
        ratio.push(Complex64::new(1.0, 0.0) - delta / d0);
        term.push(a.coeffs()[k] / d0);
    }
    let mut sum = term.clone();
    let size = |v: &[Complex64]| v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut last = size(&term);
    let mut growth = 0;
    let mut terms = 1;
    while terms < NEUMANN_MAX_TERMS && last > NEUMANN_TOL * size(&sum) {
        for (t, q) in term.iter_mut().zip(&ratio) {
            *t *= q;
        }
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        terms += 1;
        let now = size(&term);
        growth = if now > last { growth + 1 } else { 0 };
        last = now;
        if growth >= 3 || !now.is_finite() {
            return Err(Error::NeumannDivergence { last: now });
        }
    }
    let mut coeffs = vec![ZERO; g.n_points() * g.n_points()];
    for (&(k, _, _), v) in pos.iter().zip(sum) {
        coeffs[k] = v;
    }
    let p = Symbol::from_raw(g, coeffs, a.order_m + 1.0 - alpha, a.declared_rho + 1.0);
    Ok((p, terms))
}

/// Solves `T_p D − D T_p = T_a` on the solvable region.
pub fn solve_commutator(a: &Symbol, alpha: f64, c: &Cutoff, route: Route) -> Result<GaugeSolution> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("commutator equation needs alpha >= 1, got {alpha}")));
    }
    let (p, iterations) = match route {
        Route::ExplicitFormula => (invert_explicit(a, alpha, c)?, 0),
        Route::NeumannSeries => invert_neumann(a, alpha, c)?,
        Route::Newton => {
            return Err(Error::InvalidArgument(
                "the commutator equation is linear; use the explicit or Neumann route".into(),
            ))
        }
    };
    let diff = dispersion_commutator(&materialize(&p, c), alpha).sub(&materialize(a, c));
    let res = region_residual(&diff, c);
    Ok(GaugeSolution {
        seminorm_report: seminorm_report(&p, p.order_m, 1, 1)?,
        p,
        route,
        residual_norm: res.solvable,
        multiplier_residual: res.multiplier,
        off_support_residual: res.outside,
        iterations,
    })
}

/// The Cole-Hopf parametrix `E(a) = −(|ξ|^{1−α}/α)·∂ₓ⁻¹σ_a` on the solvable region.
pub fn cole_hopf_parametrix(a: &Symbol, alpha: f64, c: &Cutoff) -> Symbol {
    let g = a.grid();
    let mut coeffs = vec![ZERO; g.n_points() * g.n_points()];
    for (k, eta, xi) in solvable_positions(g, c) {
        coeffs[k] = a.coeffs()[k] * c.at(eta, xi) / cole_hopf_denominator(alpha, eta, xi);
    }
    Symbol::from_raw(g, coeffs, a.order_m + 1.0 - alpha, a.declared_rho + 1.0)
}

/// `r(a) = σ_a − L(E(a))`, read back as a symbol on the solvable region.
pub fn parametrix_remainder(a: &Symbol, alpha: f64, c: &Cutoff) -> Symbol {
    let g = a.grid();
    let e = cole_hopf_parametrix(a, alpha, c);
    let mut coeffs = vec![ZERO; g.n_points() * g.n_points()];
    for (k, eta, xi) in solvable_positions(g, c) {
        let psi = c.at(eta, xi);
        coeffs[k] = psi * a.coeffs()[k] - psi * resonance_denominator(alpha, eta, xi) * e.coeffs()[k];
    }
    Symbol::from_raw(g, coeffs, a.order_m, a.declared_rho)
}

/// Both sides of the seminorm estimates satisfied by solutions of the commutator equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutatorEstimate {
    /// `M^{β+1−α}_0(∂ₓσ_p; 0)`.
    pub lhs: f64,
    /// `M^β_0(σ_a; 0) / (B[1 − (1 − 1/B)^α])`.
    pub rhs: f64,
    /// `M^{β−α}_0(Δ_ξ∂ₓσ_p; 0)` over `xi_floor ≤ |ξ| ≤ xi_ceiling`.
    pub xi_lhs: f64,
    pub xi_rhs: f64,
    /// Smallest `|ξ|` at which `ψ(η, ·)` is constant across the difference stencil
    /// for every `η` in the x-spectrum of `a`.
    pub xi_floor: i64,
    /// Largest `|ξ|` whose stencil keeps `ξ + η` on the lattice for that spectrum.
    pub xi_ceiling: i64,
}

impl CommutatorEstimate {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs && self.xi_lhs <= self.xi_rhs
    }
}

/// `B[1 − (1 − 1/B)^α]`.
pub fn ellipticity_constant(big_b: f64, alpha: f64) -> f64 {
    big_b * (1.0 - (1.0 - 1.0 / big_b).powf(alpha))
}

fn keep_columns(s: &Symbol, floor: i64, ceiling: i64) -> Symbol {
    let g = s.grid();
    Symbol::from_coeff_fn(g, s.order_m, s.declared_rho, |eta, xi| {
        if xi.abs() < floor || xi.abs() > ceiling {
            ZERO
        } else {
            s.coeff(eta, xi)
        }
    })
}

pub fn commutator_estimate(a: &Symbol, p: &Symbol, alpha: f64, c: &Cutoff) -> Result<CommutatorEstimate> {
    let g = a.grid();
    let beta = a.order_m;
    let big_b = c.big_b;
    let den = ellipticity_constant(big_b, alpha);
    let sa = crate::symbols::regularize(a, c);
    let dsp = crate::symbols::regularize(p, c).dx(1);
    let lhs = seminorm(&dsp, beta + 1.0 - alpha, 0.0, 0)?;
    let rhs = seminorm(&sa, beta, 0.0, 0)? / den;
    // The ramp of ψ has unit width in ξ, so its differences are O(1) inside the
    // transition layer; the ξ-estimate is read where ψ is locally constant.
    let eta_max = g
        .frequencies()
        .filter(|&eta| g.frequencies().any(|xi| a.coeff(eta, xi) != ZERO))
        .map(i64::abs)
        .max()
        .unwrap_or(0);
    let xi_floor = (big_b * eta_max as f64 + c.little_b).ceil() as i64 + 2;
    let xi_ceiling = g.max_freq() - eta_max - 2;
    let xi_lhs = seminorm(&keep_columns(&dsp.dxi(1), xi_floor, xi_ceiling), beta - alpha, 0.0, 0)?;
    let growth = alpha * ((1.0 + 1.0 / big_b).powf(alpha - 1.0) - 1.0) / (1.0 - (1.0 - 1.0 / big_b).powf(alpha));
    let xi_rhs = seminorm(&keep_columns(&sa.dxi(1), xi_floor, xi_ceiling), beta - 1.0, 0.0, 0)? / den + growth * lhs;
    Ok(CommutatorEstimate {
        lhs,
        rhs,
        xi_lhs,
        xi_rhs,
        xi_floor,
        xi_ceiling,
    })
}

/// Outcome of the rank computation for `L` on the cutoff support.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpaceReport {
    pub basis_size: usize,
    pub rank: usize,
    /// Number of basis symbols sitting on `η = 0`.
    pub multiplier_count: usize,
    /// Largest weight any null vector puts on `η ≠ 0` basis symbols.
    pub off_multiplier_mass: f64,
}

impl NullSpaceReport {
    pub fn kernel_is_multipliers(&self) -> bool {
        self.basis_size - self.rank == self.multiplier_count && self.off_multiplier_mass < 1e-8
    }
}

/// Maps every unit symbol supported where `ψ > 0` (output on the lattice) through
/// `p ↦ T_p D − D T_p`, and computes the rank of the resulting linear map by SVD.
pub fn null_space_check(g: Grid, alpha: f64, c: &Cutoff) -> NullSpaceReport {
    let n = g.n_points();
    let mut basis = Vec::new();
    for r in 0..n {
        for col in 0..n {
            let (eta, xi) = (g.freq(r), g.freq(col));
            if c.at(eta, xi) > 0.0 && g.index(xi + eta).is_some() {
                basis.push((eta, xi));
            }
        }
    }
    let rows: Vec<(usize, usize)> = basis
        .iter()
        .map(|&(eta, xi)| (g.index(xi + eta).unwrap(), g.index(xi).unwrap()))
        .collect();
    let mut a = DMatrix::<Complex64>::zeros(rows.len(), basis.len());
    for (j, &(eta, xi)) in basis.iter().enumerate() {
        let mut s = Symbol::zeros(g, 0.0, f64::INFINITY);
        s.set_coeff(eta, xi, Complex64::new(1.0, 0.0));
        let img = dispersion_commutator(&materialize(&s, c), alpha);
        for (i, &(ro, co)) in rows.iter().enumerate() {
            a[(i, j)] = img.entries[(ro, co)];
        }
    }
    let svd = a.svd(false, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut off_mass: f64 = 0.0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            continue;
        }
        let row = v_t.row(k);
        let mass: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &(eta, _))| eta != 0)
            .map(|(j, _)| row[j].norm_sqr())
            .sum();
        off_mass = off_mass.max(mass.sqrt());
    }
    // Columns beyond the row count of a wide matrix have no singular value slot.
    let missing = basis.len().saturating_sub(svd.singular_values.len());
    NullSpaceReport {
        basis_size: basis.len(),
        rank: rank.min(basis.len() - missing),
        multiplier_count: basis.iter().filter(|b| b.0 == 0).count(),
        off_multiplier_mass: off_mass,
    }
}

/// Finite-difference weights (in units of `1/dt`) for `∂_t` at sample `i` of `n`:
/// fourth-order centered in the interior, second-order elsewhere.
pub fn time_stencil(n: usize, i: usize) -> Vec<(usize, f64)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, -1.0), (1, 1.0)],
        _ if i == 0 => vec![(0, -1.5), (1, 2.0), (2, -0.5)],
        _ if i == n - 1 => vec![(n - 1, 1.5), (n - 2, -2.0), (n - 3, 0.5)],
        _ if i == 1 || i == n - 2 => vec![(i - 1, -0.5), (i + 1, 0.5)],
        _ => vec![
            (i - 2, 1.0 / 12.0),
            (i - 1, -8.0 / 12.0),
            (i + 1, 8.0 / 12.0),
            (i + 2, -1.0 / 12.0),
        ],
    }
}

/// `∂_t` of a sampled symbol.
pub fn time_derivative(samples: &[Symbol], dt: f64) -> Vec<Symbol> {
    (0..samples.len())
        .map(|i| {
            let s0 = &samples[i];
            let mut acc = vec![ZERO; s0.coeffs().len()];
            for (j, w) in time_stencil(samples.len(), i) {
                for (a, v) in acc.iter_mut().zip(samples[j].coeffs()) {
                    *a += v * (w / dt);
                }
            }
            Symbol::from_raw(s0.grid(), acc, s0.order_m, s0.declared_rho)
        })
        .collect()
}

/// `∂_t` of a sampled operator.
pub fn time_derivative_matrices(samples: &[DMatrix<Complex64>], dt: f64) -> Vec<DMatrix<Complex64>> {
    (0..samples.len())
        .map(|i| {
            let mut acc = DMatrix::zeros(samples[i].nrows(), samples[i].ncols());
            for (j, w) in time_stencil(samples.len(), i) {
                acc += &samples[j] * Complex64::new(w / dt, 0.0);
            }
            acc
        })
        .collect()
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(Error::InvalidArgument("time samples must be increasing and uniform".into()));
    }
    Ok(dt)
}

/// Options for the time-dependent series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub j_max: usize,
    pub tol: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { j_max: 8, tol: 1e-8 }
    }
}

/// Solution of `−σ_{∂_t p} + L(p) = σ_a` along a time grid.
#[derive(Debug, Clone)]
pub struct TimeDependentSolution {
    pub p: Vec<Symbol>,
    pub terms: usize,
    /// Largest coefficient of each series term `p_j`, over all samples.
    pub increments: Vec<f64>,
    /// Max-entry residual on the solvable region, over all samples.
    pub residual_norm: f64,
    /// Measured growth `max_j M^{m+α}(∂_t p_j)/M^m(p_j)`.
    pub k_hat: f64,
    pub k_hat_exceeds_alpha: bool,
}

fn max_coeff_all(s: &[Symbol]) -> f64 {
    s.iter().fold(0.0, |m, x| m.max(x.max_abs()))
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The series `p = Σ_j p_j` with `L(p_0) = a`, `L(p_{j+1}) = ∂_t p_j`.
pub fn solve_time_dependent(
    a_traj: &[Symbol],
    times: &[f64],
    alpha: f64,
    c: &Cutoff,
    cfg: SeriesConfig,
) -> Result<TimeDependentSolution> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("time-dependent series needs alpha >= 1, got {alpha}")));
    }
    if a_traj.len() != times.len() || a_traj.is_empty() {
        return Err(Error::InvalidArgument("one symbol per time sample is required".into()));
    }
    if a_traj.len() > 1 && a_traj.len() < 5 {
        return Err(Error::InvalidArgument("the time-dependent series needs at least 5 samples".into()));
    }
    let dt = uniform_step(times)?;
    let mut term: Vec<Symbol> = a_traj
        .iter()
        .map(|a| invert_explicit(a, alpha, c))
        .collect::<Result<_>>()?;
    let mut sum = term.clone();
    let mut increments = vec![max_coeff_all(&term)];
    let scale = increments[0].max(f64::MIN_POSITIVE);
    let mut k_hat: f64 = 0.0;
    let mut stalled = 0;
    let mut terms = 1;
    while a_traj.len() > 1 && terms <= cfg.j_max && *increments.last().unwrap() > cfg.tol * scale {
        let dp = time_derivative(&term, dt);
        let m = term[0].order_m;
        for (pj, dpj) in term.iter().zip(&dp) {
            let den = seminorm(pj, m, 0.0, 0)?;
            k_hat = k_hat.max(ratio_or_zero(seminorm(dpj, m + alpha, 0.0, 0)?, den));
        }
        term = dp
            .iter()
            .map(|d| invert_explicit(d, alpha, c))
            .collect::<Result<_>>()?;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s = s.add(t);
        }
        terms += 1;
        let inc = max_coeff_all(&term);
        let prev = *increments.last().unwrap();
        increments.push(inc);
        stalled = if inc > 0.99 * prev { stalled + 1 } else { 0 };
        if stalled >= 3 && inc > cfg.tol * scale {
            return Err(Error::SeriesStalled { increment: inc, terms });
        }
    }
    let residual_norm = time_dependent_residuals(&sum, a_traj, dt, alpha, c)
        .into_iter()
        .fold(0.0, f64::max);
    Ok(TimeDependentSolution {
        p: sum,
        terms,
        increments,
        residual_norm,
        k_hat,
        k_hat_exceeds_alpha: k_hat >= alpha,
    })
}

/// `max |ψ(−∂_t p̂ + δp̂ − â)|` over the solvable region, one value per sample.
pub fn time_dependent_residuals(p: &[Symbol], a: &[Symbol], dt: f64, alpha: f64, c: &Cutoff) -> Vec<f64> {
    let dp = time_derivative(p, dt);
    let g = p[0].grid();
    let pos = solvable_positions(g, c);
    (0..p.len())
        .map(|k| {
            pos.iter().fold(0.0f64, |worst, &(idx, eta, xi)| {
                let delta = resonance_denominator(alpha, eta, xi);
                let r = -dp[k].coeffs()[idx] + delta * p[k].coeffs()[idx] - a[k].coeffs()[idx];
                worst.max(c.at(eta, xi) * r.norm())
            })
        })
        .collect()
}

/// Options for the Newton solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Smallness threshold on `M^β_0(a; 0)`.
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            epsilon: 0.05,
            max_iter: 25,
            tol: 1e-9,
        }
    }
}

fn expm_i(p: &Symbol, c: &Cutoff) -> Result<OperatorMatrix> {
    Ok(flow_from_generator(&materialize(p, c), 1.0)?.matrix)
}

/// Solves `e^{iT_p} D − D e^{iT_p} = T_a` on the solvable region by a chord
/// Newton iteration whose step is the linear solve at `p = 0`.
pub fn solve_nonlinear_exp(a: &Symbol, alpha: f64, c: &Cutoff, cfg: NewtonConfig) -> Result<GaugeSolution> {
    if !(alpha >= 1.0) {
        return Err(Error::InvalidArgument(format!("nonlinear gauge needs alpha >= 1, got {alpha}")));
    }
    let size = seminorm(a, a.order_m, 0.0, 0)?;
    if size > cfg.epsilon {
        return Err(Error::SmallnessViolated {
            value: size,
            threshold: cfg.epsilon,
        });
    }
    let g = a.grid();
    let target = materialize(a, c);
    let mut p = Symbol::zeros(g, a.order_m + 1.0 - alpha, a.declared_rho + 1.0);
    let mut iterations = 0;
    let mut first = None;
    loop {
        let f = dispersion_commutator(&expm_i(&p, c)?, alpha);
        let r = target.sub(&f);
        let res = region_residual(&r, c);
        let start = *first.get_or_insert(res.solvable);
        if res.solvable < cfg.tol {
            return Ok(GaugeSolution {
                seminorm_report: seminorm_report(&p, p.order_m, 1, 1)?,
                p,
                route: Route::Newton,
                residual_norm: res.solvable,
                multiplier_residual: res.multiplier,
                off_support_residual: res.outside,
                iterations,
            });
        }
        if iterations >= cfg.max_iter || !res.solvable.is_finite() || res.solvable > 1e6 * start.max(cfg.tol) {
            return Err(Error::NewtonDiverged {
                iterations,
                residual: res.solvable,
            });
        }
        let rhs = extract_symbol(&r, c, a.order_m, a.declared_rho).scale(-I);
        p = p.add(&invert_explicit(&rhs, alpha, c)?);
        iterations += 1;
    }
}

/// Options for the conjugating gauge along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatingConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Largest admissible tameness ratio.
    pub tameness_threshold: f64,
    pub series: SeriesConfig,
}

impl Default for ConjugatingConfig {
    fn default() -> Self {
        ConjugatingConfig {
            max_iter: 25,
            tol: 1e-8,
            tameness_threshold: 10.0,
            series: SeriesConfig::default(),
        }
    }
}

/// The gauge symbol `p(t)` conjugating the paralinear equation.
#[derive(Debug, Clone)]
pub struct ConjugatingSolution {
    pub p: Vec<Symbol>,
    pub iterations: usize,
    /// Max-entry residual on the solvable region over all samples.
    pub residual_norm: f64,
    pub multiplier_residual: f64,
    pub off_support_residual: f64,
    /// `M^{(j+1)α−1}_0(∂_t^j σ_{iuξ}) / (‖u‖_{C_*^{(2−α)^+}}(2^j+1))` for `j = 0, 1, 2`.
    pub tameness: Vec<f64>,
    pub k_hat: f64,
}

/// The transport symbol `iu(x)ξ`.
pub fn transport_symbol(u: &Field) -> Symbol {
    Symbol::separated(u, 1.0, f64::INFINITY, |xi| Complex64::new(0.0, xi as f64))
}

/// Measures the time tameness of `σ_{iuξ}` along a sampled trajectory.
pub fn tameness_ratios(times: &[f64], states: &[Field], alpha: f64, c: &Cutoff) -> Result<Vec<f64>> {
    let dt = uniform_step(times)?;
    let s = (2.0 - alpha).max(0.0) + 0.01;
    let size = states.iter().fold(0.0f64, |m, u| m.max(norm(u, NormKind::Zygmund(s))));
    let mut sym: Vec<Symbol> = states
        .iter()
        .map(|u| crate::symbols::regularize(&transport_symbol(u), c))
        .collect();
    let j_top = if states.len() >= 5 { 2 } else { 0 };
    let mut out = Vec::new();
    for j in 0..=j_top {
        if j > 0 {
            sym = time_derivative(&sym, dt);
        }
        let order = (j as f64 + 1.0) * alpha - 1.0;
        let mut m: f64 = 0.0;
        for sj in &sym {
            m = m.max(seminorm(sj, order, 0.0, 0)?);
        }
        out.push(ratio_or_zero(m, size * (2f64.powi(j as i32) + 1.0)));
    }
    Ok(out)
}

/// `Φ(p) = −∂_t E + E D − D E + E T_{iuξ}` with `E = e^{iT_p}`, per sample.
fn conjugation_defect(
    p: &[Symbol],
    transports: &[OperatorMatrix],
    dt: f64,
    alpha: f64,
    c: &Cutoff,
) -> Result<(Vec<OperatorMatrix>, Vec<OperatorMatrix>)> {
    let e: Vec<OperatorMatrix> = p.iter().map(|pk| expm_i(pk, c)).collect::<Result<_>>()?;
    let raw: Vec<DMatrix<Complex64>> = e.iter().map(|m| m.entries.clone()).collect();
    let de = time_derivative_matrices(&raw, dt);
    let phi = e
        .iter()
        .zip(&de)
        .zip(transports)
        .map(|((ek, dek), tk)| {
            let g = ek.grid();
            dispersion_commutator(ek, alpha)
                .sub(&OperatorMatrix::new(g, dek.clone()))
                .add(&ek.mul(tk))
        })
        .collect();
    Ok((phi, e))
}

/// Solves `−∂_t E + E D − D E = −E T_{iuξ}` on the solvable region, `E = e^{iT_p}`,
/// by chord Newton steps through the time-dependent linear series.
pub fn solve_conjugating(
    times: &[f64],
    states: &[Field],
    alpha: f64,
    c: &Cutoff,
    cfg: ConjugatingConfig,
) -> Result<ConjugatingSolution> {
    if !(alpha > 2.0) {
        return Err(Error::InvalidArgument(format!("the conjugating gauge needs alpha > 2, got {alpha}")));
    }
    if states.len() != times.len() || states.is_empty() {
        return Err(Error::InvalidArgument("one state per time sample is required".into()));
    }
    let dt = uniform_step(times)?;
    let tameness = tameness_ratios(times, states, alpha, c)?;
    for (j, &t) in tameness.iter().enumerate() {
        if t > cfg.tameness_threshold {
            return Err(Error::TamenessViolated { ratio: t, order: j });
        }
    }
    let transports: Vec<OperatorMatrix> = states.iter().map(|u| materialize(&transport_symbol(u), c)).collect();
    let a0: Vec<Symbol> = states
        .iter()
        .map(|u| transport_symbol(u).scale(I))
        .collect();
    let first = solve_time_dependent(&a0, times, alpha, c, cfg.series)?;
    let mut k_hat = first.k_hat;
    let mut p = first.p;
    let mut iterations = 0;
    let mut start = None;
    loop {
        let (phi, _) = conjugation_defect(&p, &transports, dt, alpha, c)?;
        let res = phi.iter().map(|f| region_residual(f, c)).fold(
            RegionResidual {
                solvable: 0.0,
                multiplier: 0.0,
                outside: 0.0,
            },
            |m, r| RegionResidual {
                solvable: m.solvable.max(r.solvable),
                multiplier: m.multiplier.max(r.multiplier),
                outside: m.outside.max(r.outside),
            },
        );
        let s0 = *start.get_or_insert(res.solvable);
        if res.solvable < cfg.tol {
            return Ok(ConjugatingSolution {
                p,
                iterations,
                residual_norm: res.solvable,
                multiplier_residual: res.multiplier,
                off_support_residual: res.outside,
                tameness,
                k_hat,
            });
        }
        if iterations >= cfg.max_iter || !res.solvable.is_finite() || res.solvable > 1e6 * s0.max(cfg.tol) {
            return Err(Error::NewtonDiverged {
                iterations,
                residual: res.solvable,
            });
        }
        let rhs: Vec<Symbol> = phi
            .iter()
            .zip(&p)
            .map(|(f, pk)| extract_symbol(f, c, pk.order_m + alpha - 1.0, pk.declared_rho).scale(I))
            .collect();
        let step = solve_time_dependent(&rhs, times, alpha, c, cfg.series)?;
        k_hat = k_hat.max(step.k_hat);
        for (pk, dk) in p.iter_mut().zip(&step.p) {
            *pk = pk.add(dk);
        }
        iterations += 1;
    }
}

/// The operators `R(t)E(t)^{-1}` with `R = ∂_t E + D E − E D − E T_{iuξ}`, so that
/// `w = E u` solves `∂_t w + D w = R E^{-1} w` whenever `u` solves the paralinear equation.
pub fn conjugation_residual_operators(
    sol: &ConjugatingSolution,
    times: &[f64],
    states: &[Field],
    alpha: f64,
    c: &Cutoff,
) -> Result<Vec<OperatorMatrix>> {
    let dt = uniform_step(times)?;
    let transports: Vec<OperatorMatrix> = states.iter().map(|u| materialize(&transport_symbol(u), c)).collect();
    let (phi, _) = conjugation_defect(&sol.p, &transports, dt, alpha, c)?;
    sol.p
        .iter()
        .zip(phi)
        .map(|(pk, f)| {
            let inv = flow_from_generator(&materialize(pk, c), -1.0)?.matrix;
            Ok(f.mul(&inv).scale(Complex64::new(-1.0, 0.0)))
        })
        .collect()
}

//! The gauge flow `e^{iτT_p}` and the conjugation identities built on it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::paraop::{materialize, spectral_norm, OperatorMatrix};
use crate::spectral::Field;
use crate::symbols::{Cutoff, Symbol};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest grid on which the dense matrix exponential is the default method.
pub const EXPM_MAX_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMethod {
    MatrixExponential,
    OdeIntegration,
}

/// The solution operator of `∂_τ h = i·M h` at time `τ`.
#[derive(Debug, Clone)]
pub struct FlowOperator {
    pub generator: OperatorMatrix,
    pub tau: f64,
    pub matrix: OperatorMatrix,
    pub method: FlowMethod,
}

/// `e^{iτT_p}` with the default method for the grid size.
pub fn flow_build(p: &Symbol, c: &Cutoff, tau: f64) -> Result<FlowOperator> {
    flow_from_generator(&materialize(p, c), tau)
}

pub fn flow_from_generator(m: &OperatorMatrix, tau: f64) -> Result<FlowOperator> {
    let method = if m.grid().n_points() <= EXPM_MAX_POINTS {
        FlowMethod::MatrixExponential
    } else {
        FlowMethod::OdeIntegration
    };
    flow_with_method(m, tau, method)
}

pub fn flow_with_method(m: &OperatorMatrix, tau: f64, method: FlowMethod) -> Result<FlowOperator> {
    if !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("flow time must be finite, got {tau}")));
    }
    let a = &m.entries * (I * tau);
    let e = match method {
        FlowMethod::MatrixExponential => a.exp(),
        FlowMethod::OdeIntegration => {
            let n = a.nrows();
            integrate(|_, y: &DMatrix<Complex64>| &a * y, DMatrix::identity(n, n), 0.0, 1.0, 1e-12)?
        }
    };
    check_growth(&e, m, tau)?;
    Ok(FlowOperator {
        generator: m.clone(),
        tau,
        matrix: OperatorMatrix::new(m.grid(), e),
        method,
    })
}

/// Rejects flows whose `L²` norm exceeds twice the energy bound `exp(|τ|‖(M − M†)/(2i)‖)`.
fn check_growth(e: &DMatrix<Complex64>, m: &OperatorMatrix, tau: f64) -> Result<()> {
    let norm = power_norm(e);
    let bound = 2.0 * (tau.abs() * skew_part_norm(m)).exp();
    if norm <= bound * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(Error::GeneratorUnstable { norm, bound })
    }
}

/// `‖(M − M†)/(2i)‖`, which bounds the growth rate of `e^{iτM}` in `L²`.
pub fn skew_part_norm(m: &OperatorMatrix) -> f64 {
    spectral_norm(&((&m.entries - m.entries.adjoint()) * Complex64::new(0.5, 0.0)))
}

/// `(M + M†)/2` together with the `L²` norm of the dropped part `(M − M†)/2`.
pub fn self_adjointify(m: &OperatorMatrix) -> (OperatorMatrix, f64) {
    let herm = (&m.entries + m.entries.adjoint()) * Complex64::new(0.5, 0.0);
    (OperatorMatrix::new(m.grid(), herm), skew_part_norm(m))
}

/// Power-iteration estimate of the spectral norm; never exceeds the true value.
fn power_norm(e: &DMatrix<Complex64>) -> f64 {
    let n = e.ncols();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()));
    let mut est = 0.0;
    for _ in 0..40 {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v /= Complex64::new(nv, 0.0);
        let w = e * &v;
        est = w.norm();
        v = e.adjoint() * w;
    }
    est
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of a matrix ODE `Y' = f(t, Y)` from `t0` to `t1`,
/// controlling the max-entry local error relative to `tol·max(1, |Y|)`.
pub fn integrate(
    f: impl Fn(f64, &DMatrix<Complex64>) -> DMatrix<Complex64>,
    y0: DMatrix<Complex64>,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<DMatrix<Complex64>> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = span.abs() / 16.0;
    let mut k1 = f(t, &y);
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > 200_000 {
            return Err(Error::InvalidArgument("ODE integration exceeded step budget".into()));
        }
        h = h.min((t1 - t).abs());
        let hs = h * dir;
        let mut ks = vec![k1.clone()];
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in ks.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys += kj * Complex64::new(hs * A[s][j], 0.0);
                }
            }
            ks.push(f(t + C[s] * hs, &ys));
        }
        let mut ynew = y.clone();
        let mut err = DMatrix::zeros(y.nrows(), y.ncols());
        for (j, kj) in ks.iter().enumerate() {
            if j < 6 && A[6][j] != 0.0 {
                ynew += kj * Complex64::new(hs * A[6][j], 0.0);
            }
            if E[j] != 0.0 {
                err += kj * Complex64::new(hs * E[j], 0.0);
            }
        }
        let scale = tol * ynew.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let en = err.iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale;
        if !en.is_finite() {
            return Err(Error::NanDetected { t });
        }
        if en <= 1.0 {
            t += hs;
            y = ynew;
            k1 = ks.pop().unwrap();
        }
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(y)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite 16-point Gauss-Legendre quadrature of a matrix-valued integrand.
pub fn quad_matrix(
    f: impl Fn(f64) -> DMatrix<Complex64>,
    a: f64,
    b: f64,
    panels: usize,
) -> DMatrix<Complex64> {
    let rule = gauss_legendre(16);
    let h = (b - a) / panels as f64;
    let mut acc: Option<DMatrix<Complex64>> = None;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in &rule {
            let term = f(mid + 0.5 * h * x) * Complex64::new(0.5 * h * w, 0.0);
            acc = Some(match acc {
                Some(s) => s + term,
                None => term,
            });
        }
    }
    acc.expect("at least one panel")
}

fn expi(m: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    (m * (I * t)).exp()
}

fn max_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// `b^p_τ = e^{iτT_p} T_b e^{−iτT_p}`.
pub fn conjugate(p: &Symbol, b: &Symbol, c: &Cutoff, tau: f64) -> Result<OperatorMatrix> {
    let gen = materialize(p, c);
    conjugate_matrix(&gen, &materialize(b, c), tau)
}

pub fn conjugate_matrix(gen: &OperatorMatrix, tb: &OperatorMatrix, tau: f64) -> Result<OperatorMatrix> {
    let fwd = flow_from_generator(gen, tau)?;
    let bwd = flow_from_generator(gen, -tau)?;
    Ok(fwd.matrix.mul(tb).mul(&bwd.matrix))
}

/// `Op(ᶜb^p_τ) = T_b − b^p_{−τ}`, so that `[e^{iτT_p}, T_b] = e^{iτT_p}·Op(ᶜb^p_τ)`.
pub fn commutator_factor(p: &Symbol, b: &Symbol, c: &Cutoff, tau: f64) -> Result<OperatorMatrix> {
    let gen = materialize(p, c);
    let tb = materialize(b, c);
    Ok(tb.sub(&conjugate_matrix(&gen, &tb, -tau)?))
}

/// `∫₀^τ e^{−irT_p} [iT_p, T_b] e^{irT_p} dr`, which equals the commutator factor.
pub fn commutator_integral(p: &Symbol, b: &Symbol, c: &Cutoff, tau: f64, panels: usize) -> OperatorMatrix {
    let gen = materialize(p, c);
    let tb = materialize(b, c);
    let ad = gen.commutator(&tb).scale(I).entries;
    let m = gen.entries.clone();
    let integral = quad_matrix(|r| expi(&m, -r) * &ad * expi(&m, r), 0.0, tau, panels);
    OperatorMatrix::new(gen.grid(), integral)
}

/// Norm, on inputs `|ξ| ≤ N/4`, of `b^p_τ − Σ_{k≤K} (τ^k/k!) ad^k_{iT_p}(T_b)`.
pub fn bch_truncation(p: &Symbol, b: &Symbol, c: &Cutoff, tau: f64, k_max: usize) -> Result<f64> {
    if k_max > 4 {
        return Err(Error::InvalidArgument(format!("BCH truncation order {k_max} exceeds 4")));
    }
    let gen = materialize(p, c);
    let tb = materialize(b, c);
    let conj = conjugate_matrix(&gen, &tb, tau)?;
    let igen = gen.scale(I);
    let mut term = tb.clone();
    let mut series = tb;
    let mut fact = 1.0;
    for k in 1..=k_max {
        term = igen.commutator(&term);
        fact *= k as f64;
        series = series.add(&term.scale(Complex64::new(tau.powi(k as i32) / fact, 0.0)));
    }
    let band = p.grid().n_points() as i64 / 4;
    Ok(conj.sub(&series).restrict_input(band).l2_norm())
}

/// Discrepancies of the two flow-composition identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposeReport {
    /// `e^{iτT_p}e^{iτT_{p'}}` against the flow of `T_p + e^{irT_p}T_{p'}e^{−irT_p}`.
    pub composition: f64,
    /// `e^{iτT_p} − e^{iτT_{p'}}` against `∫₀^τ e^{i(τ−r)T_p} i(T_p − T_{p'}) e^{irT_{p'}} dr`.
    pub difference: f64,
}

impl ComposeReport {
    pub fn max(&self) -> f64 {
        self.composition.max(self.difference)
    }
}

pub fn flow_compose_check(p: &Symbol, p2: &Symbol, c: &Cutoff, tau: f64, tol: f64) -> Result<ComposeReport> {
    let m1 = materialize(p, c).entries;
    let m2 = materialize(p2, c).entries;
    let e1 = flow_from_generator(&OperatorMatrix::new(p.grid(), m1.clone()), tau)?.matrix.entries;
    let e2 = flow_from_generator(&OperatorMatrix::new(p.grid(), m2.clone()), tau)?.matrix.entries;
    let lhs = &e1 * &e2;
    let n = m1.nrows();
    let rhs = integrate(
        |r, y| {
            let g = expi(&m1, r);
            let gi = expi(&m1, -r);
            (&m1 + &g * &m2 * &gi) * y * I
        },
        DMatrix::identity(n, n),
        0.0,
        tau,
        tol,
    )?;
    let composition = max_entry(&(lhs - rhs));
    let dm = (&m1 - &m2) * I;
    let panels = (tau.abs() * 8.0).ceil().max(1.0) as usize;
    let integral = quad_matrix(|r| expi(&m1, tau - r) * &dm * expi(&m2, r), 0.0, tau, panels);
    let difference = max_entry(&(&e1 - &e2 - integral));
    Ok(ComposeReport {
        composition,
        difference,
    })
}

/// Residual of the flow-symbol identity
/// `e^{iτT_p}T_1 − T_{e^{iτp}} − ∫₀^τ e^{i(τ−s)T_p}(T_{ip}T_{e^{isp}} − T_{ipe^{isp}}) ds`
/// applied to `probe`, where `T_1 = diag ψ(0, ξ)` and symbol exponentials are pointwise.
pub fn flow_symbol_identity_residual(
    p: &Symbol,
    c: &Cutoff,
    tau: f64,
    probe: &Field,
    panels: usize,
) -> Result<f64> {
    let g = p.grid();
    let gen = materialize(p, c);
    let one = Symbol::multiplier(g, 0.0, |_| Complex64::new(1.0, 0.0));
    let t1 = materialize(&one, c);
    let lhs = flow_from_generator(&gen, tau)?.matrix.mul(&t1);
    let exp_sym = |s: f64| p.map_values(move |v, _| (I * s * v).exp());
    let t_exp = materialize(&exp_sym(tau), c);
    let tip = gen.scale(I);
    let ip = p.scale(I);
    let m = gen.entries.clone();
    let integral = quad_matrix(
        |s| {
            let es = exp_sym(s);
            let inner = tip.mul(&materialize(&es, c)).sub(&materialize(&ip.mul(&es), c));
            expi(&m, tau - s) * inner.entries
        },
        0.0,
        tau,
        panels,
    );
    let resid = lhs.sub(&t_exp).sub(&OperatorMatrix::new(g, integral));
    let out = resid.apply(probe)?;
    Ok(out.max_coeff())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(16);
        let w: f64 = rule.iter().map(|p| p.1).sum();
        assert!((w - 2.0).abs() < 1e-14);
        for k in 0..32 {
            let q: f64 = rule.iter().map(|&(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn zero_symbol_gives_identity() {
        let g = Grid::new(16).unwrap();
        let cut = Cutoff::new(2.0, 1.0).unwrap();
        let f = flow_build(&Symbol::zeros(g, 0.0, 0.0), &cut, 0.8).unwrap();
        assert!(f.matrix.sub(&OperatorMatrix::identity(g)).max_abs() < 1e-15);
        assert_eq!(f.method, FlowMethod::MatrixExponential);
    }

    #[test]
    fn constant_symbol_is_a_phase() {
        let g = Grid::new(32).unwrap();
        let cut = Cutoff::new(2.0, 1.0).unwrap();
        let (cst, tau, k) = (1.7, 0.6, 9i64);
        let f = flow_build(&Symbol::multiplier(g, 0.0, |_| re(cst)), &cut, tau).unwrap();
        let out = f.matrix.apply(&Field::mode(g, k)).unwrap();
        assert!((out.coeff(k) - Complex64::from_polar(1.0, tau * cst)).norm() < 1e-14);
    }

    #[test]
    fn ode_route_matches_expm() {
        let g = Grid::new(32).unwrap();
        let cut = Cutoff::new(2.0, 1.0).unwrap();
        let gen = materialize(&Symbol::random(g, 0.0, 6, false, 2), &cut);
        let a = flow_with_method(&gen, 0.7, FlowMethod::MatrixExponential).unwrap();
        let b = flow_with_method(&gen, 0.7, FlowMethod::OdeIntegration).unwrap();
        assert!(a.matrix.sub(&b.matrix).max_abs() < 1e-8);
    }

    #[test]
    fn growth_check_uses_the_energy_bound() {
        let g = Grid::new(16).unwrap();
        let mut gen = DMatrix::zeros(16, 16);
        gen[(0, 0)] = Complex64::new(0.0, -2.0);
        let m = OperatorMatrix::new(g, gen);
        let f = flow_from_generator(&m, 1.0).unwrap();
        assert!((f.matrix.l2_norm() - 2f64.exp()).abs() < 1e-12);
        let inflated = &f.matrix.entries * re(2.5);
        assert!(matches!(check_growth(&inflated, &m, 1.0), Err(Error::GeneratorUnstable { .. })));
    }

    #[test]
    fn self_adjointified_flow_is_unitary() {
        let g = Grid::new(32).unwrap();
        let cut = Cutoff::new(2.0, 1.0).unwrap();
        let (h, dropped) = self_adjointify(&materialize(&Symbol::random(g, 0.0, 6, true, 5), &cut));
        assert!(dropped >= 0.0);
        let f = flow_from_generator(&h, 1.3).unwrap();
        let u = Field::from_fn(g, |x| (3.0 * x).sin() + 0.2 * (7.0 * x).cos());
        let v = f.matrix.apply(&u).unwrap();
        assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-9);
    }

    #[test]
    fn conjugation_trivial_cases() {
        let g = Grid::new(32).unwrap();
        let cut = Cutoff::new(2.0, 1.0).unwrap();
        let p = Symbol::multiplier(g, 0.0, |xi| re((xi as f64).sin()));
        let b = Symbol::multiplier(g, 1.0, |xi| re(xi as f64));
        let tb = materialize(&b, &cut);
        assert!(conjugate(&p, &b, &cut, 0.9).unwrap().sub(&tb).max_abs() < 1e-12);
        let pr = Symbol::random(g, 0.0, 4, false, 1);
        assert_eq!(conjugate(&pr, &b, &cut, 0.0).unwrap(), tb);
        assert_eq!(commutator_factor(&pr, &b, &cut, 0.0).unwrap().max_abs(), 0.0);
        assert!(commutator_factor(&p, &b, &cut, 0.5).unwrap().max_abs() < 1e-12);
        assert!(bch_truncation(&pr, &b, &cut, 0.0, 0).unwrap() < 1e-14);
        assert!(bch_truncation(&p, &b, &cut, 0.3, 4).unwrap() < 1e-10);
    }

    #[test]
    fn compose_trivial_cases() {
        let g = Grid::new(16).unwrap();
        let cut = Cutoff::new(2.0, 1.0).unwrap();
        let p = Symbol::random(g, 0.0, 3, false, 7);
        let z = Symbol::zeros(g, 0.0, 0.0);
        assert!(flow_compose_check(&p, &z, &cut, 0.5, 1e-12).unwrap().max() <= 1e-9);
        let m1 = Symbol::multiplier(g, 0.0, |xi| re((xi as f64).cos()));
        let m2 = Symbol::multiplier(g, 0.0, |xi| re(0.3 * xi as f64));
        assert!(flow_compose_check(&m1, &m2, &cut, 0.5, 1e-12).unwrap().max() <= 1e-9);
    }
}

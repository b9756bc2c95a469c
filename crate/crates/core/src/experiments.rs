//! Diagnostics and composite studies built on the solver and gauge machinery.

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::flow_from_generator;
use crate::gauge::{
    conjugation_residual_operators, extract_symbol, region, solve_commutator, solve_conjugating, time_stencil,
    ConjugatingConfig, Region, Route,
};
use crate::normalform::{equivalence_constant, normal_form};
use crate::paraop::{fit_line, materialize, wave_packet, OperatorMatrix, OrderEstimate, PROBE_WIDTH};
use crate::solver::{run, BlowupTrigger, Equation, InitialCondition, SimConfig, Trajectory};
use crate::spectral::{dealiased_product, lp_decompose, mult, multiplier_apply, norm, Field, Grid, NormKind};
use crate::symbols::{Cutoff, Symbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `‖u‖²_{L²}`.
    pub mass: f64,
    pub hamiltonian: f64,
    /// `(s, ‖u‖_{H^s})` pairs.
    pub sobolev_norms: Vec<(f64, f64)>,
    pub lipschitz: f64,
    /// `‖|D|^{2−α}(u²)‖_∞`.
    pub weak_criterion: f64,
    pub sup_norm: f64,
}

impl DiagnosticsRecord {
    pub fn sobolev(&self, s: f64) -> Option<f64> {
        self.sobolev_norms.iter().find(|(k, _)| *k == s).map(|(_, v)| *v)
    }

    pub fn is_finite(&self) -> bool {
        [self.mass, self.hamiltonian, self.lipschitz, self.weak_criterion, self.sup_norm]
            .iter()
            .chain(self.sobolev_norms.iter().map(|(_, v)| v))
            .all(|v| v.is_finite())
    }
}

/// `∫u³` evaluated on a doubled grid, where no triple product aliases onto the mean.
pub fn cubic_integral(u: &Field) -> Result<f64> {
    let g = u.grid();
    let big = Grid::new(2 * g.n_points())?;
    let mut coeffs = vec![ZERO; big.n_points()];
    for xi in g.frequencies() {
        coeffs[big.index(xi).unwrap()] = u.coeff(xi);
    }
    let vals = big.inverse(&coeffs);
    let mean = vals.iter().map(|z| z.re.powi(3)).sum::<f64>() / big.n_points() as f64;
    Ok(2.0 * std::f64::consts::PI * mean)
}

/// `H(u) = ∫|D^{(α−1)/2}u|² + (1/3)∫u³`.
pub fn hamiltonian(u: &Field, alpha: f64) -> Result<f64> {
    let quad = norm(u, NormKind::HomHs(0.5 * (alpha - 1.0))).powi(2);
    Ok(quad + cubic_integral(u)? / 3.0)
}

pub fn diagnostics(u: &Field, alpha: f64, s_list: &[f64], t: f64) -> Result<DiagnosticsRecord> {
    let ux = multiplier_apply(u, mult::deriv())?;
    let sq = dealiased_product(u, u)?;
    let weak = multiplier_apply(&sq, mult::abs_pow(2.0 - alpha))?;
    Ok(DiagnosticsRecord {
        t,
        mass: u.l2_norm_sq(),
        hamiltonian: hamiltonian(u, alpha)?,
        sobolev_norms: s_list.iter().map(|&s| (s, norm(u, NormKind::Hs(s)))).collect(),
        lipschitz: norm(&ux, NormKind::Linf),
        weak_criterion: norm(&weak, NormKind::Linf),
        sup_norm: norm(u, NormKind::Linf),
    })
}

/// Outcome of a bound check over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Bounded,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub fitted_constant: f64,
    pub max_ratio: f64,
    pub ensemble_size: usize,
    pub verdict: Verdict,
}

/// Allowed spread between the least-squares level of the log-ratios and any
/// single ratio.
pub const FIT_MARGIN: f64 = 10.0;

impl EstimateReport {
    /// Fits `log r ≈ log C₀` by least squares over the positive ratios and sets
    /// `fitted_constant = FIT_MARGIN·C₀`.
    pub fn from_ratios(ratios: &[f64], ensemble_size: usize) -> Self {
        let max_ratio = ratios.iter().fold(0.0f64, |m, &r| m.max(r));
        let logs: Vec<f64> = ratios.iter().filter(|r| **r > 0.0).map(|r| r.ln()).collect();
        if ratios.is_empty() || ratios.iter().any(|r| !r.is_finite()) {
            return EstimateReport {
                fitted_constant: f64::NAN,
                max_ratio,
                ensemble_size,
                verdict: Verdict::Inconclusive,
            };
        }
        if logs.is_empty() {
            return EstimateReport {
                fitted_constant: 0.0,
                max_ratio,
                ensemble_size,
                verdict: Verdict::Bounded,
            };
        }
        let level = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
        let fitted_constant = FIT_MARGIN * level;
        EstimateReport {
            fitted_constant,
            max_ratio,
            ensemble_size,
            verdict: if max_ratio <= fitted_constant {
                Verdict::Bounded
            } else {
                Verdict::Violated
            },
        }
    }
}

/// The twelve members of the standard ensemble: four initial-condition families
/// at three amplitudes.
pub fn standard_ensemble(amplitudes: [f64; 3]) -> Vec<(InitialCondition, f64)> {
    let families = [
        InitialCondition::Cos1,
        InitialCondition::CosSin,
        InitialCondition::Gaussian,
        InitialCondition::Random { band: 16 },
    ];
    families
        .iter()
        .flat_map(|&ic| amplitudes.iter().map(move |&a| (ic, a)))
        .collect()
}

/// Amplitudes of the standard ensemble.
pub const STANDARD_AMPLITUDES: [f64; 3] = [0.01, 0.03, 0.1];

/// The longest prefix of `times` with uniform spacing.
fn uniform_prefix(times: &[f64]) -> (usize, f64) {
    if times.len() < 2 {
        return (times.len(), 0.0);
    }
    let h = times[1] - times[0];
    let mut n = 2;
    while n < times.len() && ((times[n] - times[n - 1]) - h).abs() <= 1e-9 * h.max(1.0) {
        n += 1;
    }
    (n, h)
}

fn differentiate(values: &[f64], h: f64) -> Vec<f64> {
    (0..values.len())
        .map(|i| time_stencil(values.len(), i).iter().map(|&(j, c)| c * values[j]).sum::<f64>() / h)
        .collect()
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Time derivatives of `‖w‖` below `ROUNDOFF_FLOOR·max‖w‖/h` are round-off and count as zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub w_norm: f64,
    pub v_norm: f64,
    pub dw_dt: f64,
    /// `‖∂ₓD^{1−α}(u²)‖_∞`.
    pub forcing: f64,
    pub ratio: f64,
}

/// Per-trajectory outcome of the normal-form energy estimate.
#[derive(Debug, Clone)]
pub struct EnergyStudy {
    pub report: EstimateReport,
    pub samples: Vec<EnergySample>,
    /// Largest `|T_p(o,i) − conj T_p(i,o)|` over entries solvable in both orientations.
    pub hermitian_residual: f64,
    /// Largest max-entry norm of `K + K†` for the conjugated bracket `K`.
    pub bracket_skew_residual: f64,
    /// Largest `max(‖w‖/‖v‖, ‖v‖/‖w‖)`.
    pub equivalence: f64,
    /// Smallest `C` with `‖u(t)‖_{H^s} ≤ E₀E_t·exp(C∫₀ᵗ‖|D|^{2−α}(u²)‖_∞)‖u₀‖_{H^s}`
    /// on the samples, where `E_t` is the `v ↔ w` equivalence constant at time `t`.
    pub growth_constant: f64,
    /// The same constant with `E₀ = E_t = 1`.
    pub raw_growth_constant: f64,
}

/// `T_{σ_{uξ}}` with the symbol `u(x)ξ`.
fn transport_matrix(u: &Field, c: &Cutoff) -> OperatorMatrix {
    materialize(&Symbol::separated(u, 1.0, f64::INFINITY, |xi| Complex64::new(xi as f64, 0.0)), c)
}

/// Hermiticity defect of `T_p` and skew-Hermiticity defect of
/// `∫₀¹ e^{−irH}[H, K]e^{irH}dr` with `H` the Hermitian part of `T_p` and
/// `K = T_{uξ} + T_{uξ}^*`, where `p` solves `T_pD − DT_p = −K`.
pub fn gauge_symmetry(u: &Field, alpha: f64, c: &Cutoff) -> Result<(f64, f64)> {
    let m = transport_matrix(u, c);
    let k = m.add(&m.adjoint());
    let a = extract_symbol(&k.scale(Complex64::new(-1.0, 0.0)), c, 1.0, f64::INFINITY);
    let p = solve_commutator(&a, alpha, c, Route::ExplicitFormula)?.p;
    let tp = materialize(&p, c);
    let g = u.grid();
    let mut herm: f64 = 0.0;
    for o in g.frequencies() {
        for i in g.frequencies() {
            if region(c, o, i) == Region::Solvable && region(c, i, o) == Region::Solvable {
                herm = herm.max((tp.entry(o, i) - tp.entry(i, o).conj()).norm());
            }
        }
    }
    let h = (&tp.entries + tp.entries.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h.clone());
    let v = eig.eigenvectors;
    let bracket = &h * &k.entries - &k.entries * &h;
    // In the eigenbasis of H the conjugation acts entrywise:
    // ∫₀¹ e^{−ir(λᵢ−λⱼ)}dr multiplies entry (i, j).
    let mut b = v.adjoint() * bracket * &v;
    let lam = &eig.eigenvalues;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            let d = lam[i] - lam[j];
            let w = if d.abs() < 1e-12 {
                Complex64::new(1.0, 0.0)
            } else {
                (Complex64::new(0.0, -d).exp() - 1.0) / Complex64::new(0.0, -d)
            };
            b[(i, j)] *= w;
        }
    }
    let conj = &v * b * v.adjoint();
    let skew = (&conj + conj.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    Ok((herm, skew))
}

/// Measures `(d/dt‖w‖)/(‖∂ₓD^{1−α}(u²)‖_∞‖v‖)` along a paralinear trajectory,
/// with `v = ⟨D⟩^s u` and `w` its normal form.
pub fn energy_estimate_study(traj: &Trajectory, s: f64, alpha: f64, c: &Cutoff) -> Result<EnergyStudy> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::InvalidArgument(format!("the energy estimate needs 1 < alpha < 2, got {alpha}")));
    }
    let (n, h) = uniform_prefix(&traj.times);
    if n < 5 {
        return Err(Error::InvalidArgument("the energy study needs at least 5 uniform samples".into()));
    }
    let states = &traj.states[..n];
    let mut w_norm = Vec::with_capacity(n);
    let mut v_norm = Vec::with_capacity(n);
    let mut forcing = Vec::with_capacity(n);
    let mut weak = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    let mut equiv = Vec::with_capacity(n);
    let (mut herm, mut skew) = (0.0f64, 0.0f64);
    for u in states {
        let v = multiplier_apply(u, mult::japanese(s))?;
        let w = normal_form(u, &v, s, alpha, c)?;
        let sq = dealiased_product(u, u)?;
        let f = multiplier_apply(&multiplier_apply(&sq, mult::abs_pow(1.0 - alpha))?, mult::deriv())?;
        w_norm.push(w.l2_norm());
        v_norm.push(v.l2_norm());
        forcing.push(norm(&f, NormKind::Linf));
        weak.push(norm(&multiplier_apply(&sq, mult::abs_pow(2.0 - alpha))?, NormKind::Linf));
        hs.push(norm(u, NormKind::Hs(s)));
        equiv.push(equivalence_constant(&v, &w));
        let (a, b) = gauge_symmetry(u, alpha, c)?;
        herm = herm.max(a);
        skew = skew.max(b);
    }
    let mut dw = differentiate(&w_norm, h);
    let floor = ROUNDOFF_FLOOR * w_norm.iter().fold(0.0f64, |m, &x| m.max(x)) / h;
    for d in dw.iter_mut().filter(|d| d.abs() <= floor) {
        *d = 0.0;
    }
    let samples: Vec<EnergySample> = (0..n)
        .map(|k| EnergySample {
            t: traj.times[k],
            w_norm: w_norm[k],
            v_norm: v_norm[k],
            dw_dt: dw[k],
            forcing: forcing[k],
            ratio: ratio_or_zero(dw[k].abs(), forcing[k] * v_norm[k]),
        })
        .collect();
    let (mut growth_constant, mut raw_growth_constant) = (0.0f64, 0.0f64);
    let mut integral = 0.0;
    for k in 1..n {
        integral += 0.5 * (weak[k - 1] + weak[k]) * h;
        let g = (hs[k] / hs[0]).ln();
        if g > 0.0 && integral > 0.0 {
            raw_growth_constant = raw_growth_constant.max(g / integral);
            growth_constant = growth_constant.max((g - (equiv[0] * equiv[k]).ln()).max(0.0) / integral);
        }
    }
    let ratios: Vec<f64> = samples.iter().map(|e| e.ratio).collect();
    Ok(EnergyStudy {
        report: EstimateReport::from_ratios(&ratios, 1),
        samples,
        hermitian_residual: herm,
        bracket_skew_residual: skew,
        equivalence: equiv.iter().fold(1.0f64, |m, &e| m.max(e)),
        growth_constant,
        raw_growth_constant,
    })
}

/// Combines several energy studies: each member contributes its largest ratio, so the
/// fit measures uniformity across data rather than along one run.
pub fn ensemble_report(studies: &[EnergyStudy]) -> EstimateReport {
    let maxima: Vec<f64> = studies.iter().map(|s| s.report.max_ratio).collect();
    EstimateReport::from_ratios(&maxima, studies.len())
}

/// Largest residual-operator order accepted by the conjugation study.
pub const ORDER_LIMIT: f64 = 0.2;

/// Outcome of conjugating a paralinear trajectory with the complete gauge.
#[derive(Debug, Clone)]
pub struct ConjugationStudy {
    /// Ratios `‖r‖_{H^s}/‖w‖_{H^s}` over samples and probe indices; the verdict also
    /// requires `order ≤ ORDER_LIMIT`.
    pub report: EstimateReport,
    /// Fitted order of `w ↦ r` at each sample; `None` when the operator vanishes or the
    /// probe window is empty.
    pub orders: Vec<Option<f64>>,
    pub order: Option<f64>,
    /// Largest `L²` operator norm of `w ↦ r`.
    pub operator_norm: f64,
    /// Largest `‖u‖_{H^s}/(‖w‖_{H^s} + ‖P₀u‖_{L²})`.
    pub ellipticity: f64,
    /// Largest `‖r − R w‖/‖Δ_t w‖` over interior samples, where `R` is the residual
    /// operator built from the gauge.
    pub consistency: f64,
    pub gauge_iterations: usize,
    pub gauge_residual: f64,
}

/// Builds `p(t)` along a paralinear trajectory, forms `w = e^{iT_p}u` and measures the
/// residual `r = Δ_t w + ∂ₓ|D|^{α−1}w` and the order of `w ↦ r`.
pub fn conjugation_study(
    traj: &Trajectory,
    alpha: f64,
    c: &Cutoff,
    s_probes: &[f64],
    cfg: ConjugatingConfig,
) -> Result<ConjugationStudy> {
    if !(alpha > 2.0 && alpha < 3.0) {
        return Err(Error::InvalidArgument(format!("the conjugation study needs 2 < alpha < 3, got {alpha}")));
    }
    let (n, h) = uniform_prefix(&traj.times);
    if n < 5 {
        return Err(Error::InvalidArgument("the conjugation study needs at least 5 uniform samples".into()));
    }
    let (times, states) = (&traj.times[..n], &traj.states[..n]);
    let sol = solve_conjugating(times, states, alpha, c, cfg)?;
    let ops = conjugation_residual_operators(&sol, times, states, alpha, c)?;
    let w: Vec<Field> = sol
        .p
        .iter()
        .zip(states)
        .map(|(p, u)| flow_from_generator(&materialize(p, c), 1.0)?.matrix.apply(u))
        .collect::<Result<_>>()?;
    let eta_max = states.iter().map(spectral_extent).max().unwrap_or(0);
    let (lo, hi) = probe_window(states[0].grid(), c, eta_max);
    let mut ratios = Vec::new();
    let mut orders = Vec::with_capacity(n);
    let (mut operator_norm, mut ellipticity, mut consistency) = (0.0f64, 0.0f64, 0.0f64);
    // Entries at this level are cancellation residue of the dispersion, not structure.
    let noise = ROUNDOFF_FLOOR * (states[0].grid().max_freq() as f64).powf(alpha);
    for k in 0..n {
        for &s in s_probes {
            let low = norm(&lp_decompose(&states[k]).blocks[0], NormKind::Hs(0.0));
            ellipticity = ellipticity.max(ratio_or_zero(
                norm(&states[k], NormKind::Hs(s)),
                norm(&w[k], NormKind::Hs(s)) + low,
            ));
        }
        operator_norm = operator_norm.max(ops[k].l2_norm());
        orders.push(if ops[k].max_abs() <= noise {
            None
        } else {
            windowed_order(&ops[k], lo, hi)?.map(|e| e.slope)
        });
        // The one-sided stencils at the ends are only second order.
        if !(2..n - 2).contains(&k) {
            continue;
        }
        let wt = time_stencil(n, k)
            .iter()
            .fold(Field::zeros(states[k].grid()), |acc, &(j, cj)| acc.axpy(cj / h, &w[j]));
        let r = wt.add(&multiplier_apply(&w[k], mult::dispersion(alpha))?);
        let predicted = ops[k].apply(&w[k])?;
        consistency = consistency.max(ratio_or_zero(r.sub(&predicted).l2_norm(), wt.l2_norm()));
        for &s in s_probes {
            ratios.push(ratio_or_zero(norm(&r, NormKind::Hs(s)), norm(&w[k], NormKind::Hs(s))));
        }
    }
    let order = orders.iter().flatten().fold(None, |m: Option<f64>, &o| Some(m.map_or(o, |x| x.max(o))));
    let mut report = EstimateReport::from_ratios(&ratios, 1);
    if report.verdict == Verdict::Bounded {
        let nonzero = ops.iter().any(|m| m.max_abs() > noise);
        match order {
            Some(o) if o > ORDER_LIMIT => report.verdict = Verdict::Violated,
            None if nonzero => report.verdict = Verdict::Inconclusive,
            _ => {}
        }
    }
    Ok(ConjugationStudy {
        report,
        orders,
        order,
        operator_norm,
        ellipticity,
        consistency,
        gauge_iterations: sol.iterations,
        gauge_residual: sol.residual_norm,
    })
}

/// Largest `|ξ|` carrying at least `1e-10` of the peak coefficient of `u`.
fn spectral_extent(u: &Field) -> i64 {
    let peak = u.max_coeff();
    u.grid()
        .frequencies()
        .filter(|&x| u.coeff(x).norm() > 1e-10 * peak)
        .map(|x| x.abs())
        .max()
        .unwrap_or(0)
}

/// Probe centers for residual operators of a gauge built from data with spectrum in
/// `|η| ≤ η_max`. The residual is quadratic in the data, so its cutoff transition ends
/// near `2(Bη_max + b)`; packets also stay clear of the lattice edge.
pub fn probe_window(g: Grid, c: &Cutoff, eta_max: i64) -> (i64, i64) {
    let width = PROBE_WIDTH.ceil() as i64;
    let lo = (2.0 * (c.big_b * eta_max as f64 + c.little_b)).ceil() as i64 + 2 * width;
    let hi = g.max_freq() + 1 - 4 * width;
    (lo, hi)
}

/// Order of an operator fitted over every probe center in `lo..=hi`.
pub fn windowed_order(a: &OperatorMatrix, lo: i64, hi: i64) -> Result<Option<OrderEstimate>> {
    if hi <= lo {
        return Ok(None);
    }
    let g = a.grid();
    let mut pts = Vec::new();
    for k in lo..=hi {
        let r = a
            .apply(&wave_packet(g, k))?
            .l2_norm()
            .max(a.apply(&wave_packet(g, -k))?.l2_norm());
        if r > 0.0 {
            pts.push((0.5 * (1.0 + (k * k) as f64).ln(), r.ln()));
        }
    }
    if pts.len() < 2 {
        return Ok(None);
    }
    fit_line(&pts, (lo, hi)).map(Some)
}

/// Growth factor that classifies a run as blowing up.
pub const BLOWUP_GROWTH: f64 = 1e3;
/// Sup-norm growth below which steepening counts as wave breaking.
pub const BOUNDED_SUP_GROWTH: f64 = 3.0;
/// Energy fraction in the top third of the retained band that marks lost resolution.
pub const RESOLUTION_TAIL: f64 = 1e-6;
/// Relative tolerance on blow-up times for two resolutions to agree.
pub const REFINEMENT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    NoBlowup,
    /// `‖∂ₓu‖_∞` blows up while `‖u‖_∞` stays bounded; `t` is the first detection.
    Lipschitz { t: f64 },
    SupNorm { t: f64 },
    Inconclusive,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::NoBlowup => "none",
            Outcome::Lipschitz { .. } => "lipschitz",
            Outcome::SupNorm { .. } => "sup",
            Outcome::Inconclusive => "inconclusive",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match *self {
            Outcome::Lipschitz { t } | Outcome::SupNorm { t } => Some(t),
            _ => None,
        }
    }

    pub fn is_blowup(&self) -> bool {
        self.time().is_some()
    }

    /// Same kind, and blow-up times within `REFINEMENT_TOLERANCE` of each other.
    pub fn agrees_with(&self, other: &Outcome) -> bool {
        match (self.time(), other.time()) {
            _ if std::mem::discriminant(self) != std::mem::discriminant(other) => false,
            (Some(a), Some(b)) => (a - b).abs() <= REFINEMENT_TOLERANCE * a.max(b),
            _ => !matches!(self, Outcome::Inconclusive),
        }
    }
}

/// Fraction of `‖u‖²` carried by `|ξ| > 2c/3`, `c` the dealiasing cap.
pub fn tail_fraction(u: &Field) -> f64 {
    let g = u.grid();
    let edge = 2 * g.dealias_cap() / 3;
    let (mut tail, mut total) = (0.0, 0.0);
    for xi in g.frequencies() {
        let e = u.coeff(xi).norm_sqr();
        total += e;
        if xi.abs() > edge {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Classifies a full-equation run. Lost resolution with bounded sup norm is read as
/// wave breaking, since the grid can no longer follow the steepening front.
pub fn classify(traj: &Trajectory) -> Outcome {
    let d0 = &traj.diagnostics[0];
    let (sup0, lip0) = (d0.sup_norm, d0.lipschitz);
    for (k, d) in traj.diagnostics.iter().enumerate() {
        let sup_growth = d.sup_norm / sup0.max(f64::MIN_POSITIVE);
        if sup_growth >= BLOWUP_GROWTH {
            return Outcome::SupNorm { t: d.t };
        }
        let steep = d.lipschitz >= BLOWUP_GROWTH * lip0.max(f64::MIN_POSITIVE);
        if steep || tail_fraction(&traj.states[k]) > RESOLUTION_TAIL {
            return if sup_growth < BOUNDED_SUP_GROWTH {
                Outcome::Lipschitz { t: d.t }
            } else {
                Outcome::Inconclusive
            };
        }
    }
    match traj.blowup {
        None => Outcome::NoBlowup,
        Some(b) => match b.trigger {
            BlowupTrigger::SupNorm => Outcome::SupNorm { t: b.t },
            BlowupTrigger::Lipschitz => Outcome::Lipschitz { t: b.t },
            BlowupTrigger::NotANumber => Outcome::Inconclusive,
        },
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub family: InitialCondition,
    pub alphas: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub t_end: f64,
    /// Spacing of the recorded samples.
    pub sample_interval: f64,
    pub seed: u64,
}

impl ScanConfig {
    pub fn new(family: InitialCondition, alphas: Vec<f64>, amplitudes: Vec<f64>) -> Self {
        ScanConfig {
            family,
            alphas,
            amplitudes,
            resolutions: vec![512, 1024],
            t_end: 10.0,
            sample_interval: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub alpha: f64,
    pub amplitude: f64,
    /// One outcome per resolution, in the configured order.
    pub per_resolution: Vec<(usize, Outcome)>,
    /// The common outcome, or `Inconclusive` when the resolutions disagree.
    pub outcome: Outcome,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub cells: Vec<ScanCell>,
    /// `(α, A, A')` with `A < A'` where `A` blows up and `A'` does not.
    pub monotonicity_violations: Vec<(f64, f64, f64)>,
}

impl ScanTable {
    pub fn agreement_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 1.0;
        }
        self.cells.iter().filter(|c| c.agree).count() as f64 / self.cells.len() as f64
    }
}

/// Runs the full equation once at resolution `n`.
pub fn scan_run(family: InitialCondition, alpha: f64, amplitude: f64, n: usize, cfg: &ScanConfig) -> Result<Outcome> {
    let mut sim = SimConfig::new(n, alpha, Equation::Full, family, amplitude, cfg.t_end);
    sim.seed = cfg.seed;
    sim.sobolev_indices = Vec::new();
    sim.stride = ((cfg.sample_interval / sim.dt).round() as usize).max(1);
    Ok(classify(&run(&sim)?))
}

/// The `(α, amplitude)` outcome table of the full equation, each cell run at every
/// configured resolution.
pub fn blowup_scan(cfg: &ScanConfig) -> Result<ScanTable> {
    let jobs: Vec<(f64, f64, usize)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| {
            cfg.amplitudes
                .iter()
                .flat_map(move |&amp| cfg.resolutions.iter().map(move |&n| (a, amp, n)))
        })
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(a, amp, n)| scan_run(cfg.family, a, amp, n, cfg))
        .collect::<Result<_>>()?;
    let per_cell = cfg.resolutions.len();
    let cells: Vec<ScanCell> = jobs
        .chunks(per_cell)
        .zip(outcomes.chunks(per_cell))
        .map(|(j, o)| {
            let agree = o.windows(2).all(|w| w[0].agrees_with(&w[1])) && !o.contains(&Outcome::Inconclusive);
            ScanCell {
                alpha: j[0].0,
                amplitude: j[0].1,
                per_resolution: j.iter().map(|x| x.2).zip(o.iter().copied()).collect(),
                outcome: if agree { o[o.len() - 1] } else { Outcome::Inconclusive },
                agree,
            }
        })
        .collect();
    let mut monotonicity_violations = Vec::new();
    for a in &cfg.alphas {
        let row: Vec<&ScanCell> = cells.iter().filter(|c| c.alpha == *a).collect();
        for x in &row {
            for y in &row {
                if x.amplitude < y.amplitude && x.outcome.is_blowup() && y.outcome == Outcome::NoBlowup {
                    monotonicity_violations.push((*a, x.amplitude, y.amplitude));
                }
            }
        }
    }
    Ok(ScanTable {
        cells,
        monotonicity_violations,
    })
}

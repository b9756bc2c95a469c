//! Verification suites behind the `verify-*` subcommands and the acceptance target.
//!
//! Each suite returns one [`Check`] per asserted invariant. Grids and apertures
//! are fixed inside the calculus and flow suites so that their calibrated
//! constants stay meaningful; the gauge suite takes them from the caller.

use num_complex::Complex64;
use paraburgers::experiments::{
    conjugation_study, energy_estimate_study, ensemble_report, standard_ensemble, ConjugationStudy, EnergyStudy,
    EstimateReport, Verdict, STANDARD_AMPLITUDES,
};
use paraburgers::flow::{bch_truncation, flow_build, flow_from_generator, flow_symbol_identity_residual, self_adjointify};
use paraburgers::gauge::{
    commutator_estimate, solve_commutator, solve_nonlinear_exp, ConjugatingConfig, NewtonConfig, Route,
};
use paraburgers::normalform::resonance;
use paraburgers::paraop::{
    adjoint_star, compose_sharp, materialize, order_probe, spectrum_localisation_holds, support_within, OperatorMatrix,
};
use paraburgers::solver::{run, Equation, InitialCondition, SimConfig};
use paraburgers::spectral::{Field, Grid};
use paraburgers::symbols::{regularize, seminorm, Cutoff, Symbol};
use paraburgers::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::output::Check;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn abs_pow(xi: i64, p: f64) -> f64 {
    if xi == 0 {
        0.0
    } else {
        (xi.abs() as f64).powf(p)
    }
}

/// Random real data on `|ξ| ≤ band`.
fn smooth_field(g: Grid, band: i64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = g
        .frequencies()
        .map(|xi| {
            if xi.abs() <= band {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                re(0.0)
            }
        })
        .collect();
    Field::from_coeffs(g, coeffs, true)
}

fn band_probe(g: Grid, lo: i64, hi: i64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = g
        .frequencies()
        .map(|xi| {
            if xi.abs() >= lo && xi.abs() <= hi {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                re(0.0)
            }
        })
        .collect();
    Field::from_coeffs(g, coeffs, false)
}

/// Transport symbol `u(x)ξ` with `u` spread over `1 ≤ |η| ≤ 3`.
fn transport(g: Grid, seed: u64) -> Symbol {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = g
        .frequencies()
        .map(|eta| {
            if eta.abs() <= 3 && eta != 0 {
                Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))
            } else {
                re(0.0)
            }
        })
        .collect();
    let u = Field::from_coeffs(g, coeffs, true);
    Symbol::separated(&u, 1.0, f64::INFINITY, |xi| re(xi as f64))
}

/// Random order-`beta` data with the `η = 0` row removed and `M^β_0 = scale`.
pub fn gauge_data(g: Grid, beta: f64, seed: u64, scale: f64) -> Symbol {
    let raw = Symbol::random(g, beta, 6, false, seed);
    let a = Symbol::from_coeff_fn(g, beta, f64::INFINITY, |eta, xi| {
        if eta == 0 {
            re(0.0)
        } else {
            raw.coeff(eta, xi)
        }
    });
    let m = seminorm(&a, beta, 0.0, 0).expect("order-zero seminorm of finite data");
    a.scale(re(scale / m))
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().map(|x| x.ln()).sum::<f64>() / n;
    let my = ys.iter().map(|y| y.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x.ln() - mx) * (y.ln() - my);
        sxx += (x.ln() - mx).powi(2);
    }
    sxy / sxx
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
pub const ROUTE_AGREEMENT: f64 = 1e-8;

/// The commutator equation at each `α`: support-region residual of both routes,
/// their agreement, and the seminorm bound with denominator `B[1 − (1 − 1/B)^α]`.
/// The bound is logged as an observation; callers that assert it read the value.
pub fn gauge_suite(n: usize, alphas: &[f64], c: &Cutoff, seeds: u64) -> Result<Vec<Check>> {
    let g = Grid::new(n)?;
    let mut out = Vec::new();
    for &alpha in alphas {
        let (mut residual, mut agree, mut bound) = (0.0f64, 0.0f64, 0.0f64);
        for seed in 0..seeds {
            let a = gauge_data(g, 0.0, 10 + seed, 1.0);
            let ex = solve_commutator(&a, alpha, c, Route::ExplicitFormula)?;
            let ne = solve_commutator(&a, alpha, c, Route::NeumannSeries)?;
            residual = residual.max(ex.residual_norm).max(ne.residual_norm);
            agree = agree.max(ex.p.sub(&ne.p).max_abs() / ex.p.max_abs());
            let est = commutator_estimate(&a, &ex.p, alpha, c)?;
            bound = bound.max(est.lhs / est.rhs);
        }
        out.push(Check::at_most(format!("gauge residual alpha={alpha}"), residual, RESIDUAL_TOLERANCE));
        out.push(Check::at_most(format!("gauge route agreement alpha={alpha}"), agree, ROUTE_AGREEMENT));
        out.push(Check::observation(format!("gauge seminorm bound alpha={alpha}"), bound, 1.0));
    }
    Ok(out)
}

/// Calibrated `C` in `M^{β+1−α}_0(∂ₓσ_p) ≤ ((1 + Cε)/α)·M^β_0(σ_a)` for the nonlinear gauge.
pub const NONLINEAR_ESTIMATE_CONSTANT: f64 = 4.2;

/// Newton convergence at scale `1e-2`, the linear limit at `1e-6`, and the seminorm bound.
pub fn nonlinear_gauge_suite(n: usize, alphas: &[f64], c: &Cutoff) -> Result<Vec<Check>> {
    let g = Grid::new(n)?;
    let cfg = NewtonConfig::default();
    let (mut iterations, mut implied, mut linear) = (0usize, 0.0f64, 0.0f64);
    for &alpha in alphas {
        for seed in 0..2 {
            let a = gauge_data(g, 0.0, 20 + seed, 1e-2);
            let sol = solve_nonlinear_exp(&a, alpha, c, cfg)?;
            iterations = iterations.max(sol.iterations);
            let lhs = seminorm(&regularize(&sol.p, c).dx(1), 1.0 - alpha, 0.0, 0)?;
            let rhs = seminorm(&regularize(&a, c), 0.0, 0.0, 0)? / alpha;
            implied = implied.max((lhs / rhs - 1.0) / cfg.epsilon);
        }
        let tiny = gauge_data(g, 0.0, 7, 1e-6);
        let nl = solve_nonlinear_exp(&tiny, alpha, c, cfg)?;
        let lin = solve_commutator(&tiny.scale(Complex64::new(0.0, -1.0)), alpha, c, Route::ExplicitFormula)?;
        linear = linear.max(nl.p.sub(&lin.p).max_abs());
    }
    Ok(vec![
        Check::at_most("newton iterations", iterations as f64, 25.0),
        Check::at_most("newton vs linear solve at 1e-6", linear, 1e-11),
        Check::at_most("nonlinear seminorm constant", implied, NONLINEAR_ESTIMATE_CONSTANT),
    ])
}

/// Measured `|Ω_α|/(|ξ_min||ξ_max|^{α−1})` over `1 ≤ |ξᵢ| ≤ 64`, `ξ₁ + ξ₂ ≠ 0`,
/// frozen as `(α, c₁, c₂)` after calibration (rounded outward).
pub const RESONANCE_BRACKETS: [(f64, f64, f64); 5] = [
    (1.25, 0.0141, 0.8989),
    (1.5, 0.0217, 1.3809),
    (1.75, 0.0269, 1.7161),
    (2.0, 0.03125, 2.0),
    (2.5, 0.0391, 3.6569),
];

pub fn resonance_range(alpha: f64, top: i64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for x1 in (-top..=top).filter(|&x| x != 0) {
        for x2 in (-top..=top).filter(|&x| x != 0 && x != -x1) {
            let (a, b) = ((x1.abs() as f64).min(x2.abs() as f64), (x1.abs() as f64).max(x2.abs() as f64));
            let r = resonance(alpha, x1 as f64, x2 as f64).abs() / (a * b.powf(alpha - 1.0));
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

pub fn resonance_suite() -> Vec<Check> {
    let mut out = Vec::new();
    for (alpha, c1, c2) in RESONANCE_BRACKETS {
        let (lo, hi) = resonance_range(alpha, 64);
        out.push(Check::within(format!("resonance lower alpha={alpha}"), lo, c1 - 1e-9, c2 + 1e-9));
        out.push(Check::within(format!("resonance upper alpha={alpha}"), hi, c1 - 1e-9, c2 + 1e-9));
    }
    out
}

pub const FLOW_TOLERANCE: f64 = 1e-9;

/// Group law, inverse, isometry and the flow-symbol identity on 128 points.
pub fn flow_suite() -> Result<Vec<Check>> {
    let g = Grid::new(128)?;
    let cut = Cutoff::new(2.0, 1.0)?;
    let p = Symbol::random(g, 0.0, 4, true, 1);
    let f = |tau| flow_build(&p, &cut, tau).map(|f| f.matrix);
    let (a, b, ab, inv) = (f(0.4)?, f(0.7)?, f(1.1)?, f(-0.4)?);
    let id = OperatorMatrix::identity(g);
    let (sa, _) = self_adjointify(&materialize(&Symbol::random(g, 0.0, 4, false, 3), &cut));
    let e = flow_from_generator(&sa, 0.9)?.matrix;
    let probe = band_probe(g, 2, 32, 1);
    let identity = flow_symbol_identity_residual(&p.scale(re(0.5)), &cut, 0.5, &probe, 2)?;
    Ok(vec![
        Check::at_most("flow group law", a.mul(&b).sub(&ab).max_abs(), FLOW_TOLERANCE),
        Check::at_most("flow inverse", a.mul(&inv).sub(&id).max_abs(), FLOW_TOLERANCE),
        Check::at_most("flow isometry", e.adjoint().mul(&e).sub(&id).max_abs(), FLOW_TOLERANCE),
        Check::at_most("flow-symbol identity", identity, 1e-6),
    ])
}

/// Fitted `τ`-decay exponent of the order-`K` truncation error for `K = 1, 2`.
pub fn bch_suite() -> Result<Vec<Check>> {
    let g = Grid::new(64)?;
    let cut = Cutoff::new(2.0, 1.0)?;
    let p = Symbol::random(g, 0.0, 4, true, 11).scale(re(0.5));
    let b = transport(g, 12);
    let taus = [0.1, 0.05, 0.025];
    let mut out = Vec::new();
    for k in [1usize, 2] {
        let errs = taus
            .iter()
            .map(|&t| bch_truncation(&p, &b, &cut, t, k))
            .collect::<Result<Vec<_>>>()?;
        out.push(Check::at_least(format!("BCH exponent K={k}"), log_slope(&taus, &errs), k as f64 + 1.0 - 0.3));
    }
    Ok(out)
}

/// Calibrated bound on `‖T_a‖_{H^{s+m} → H^s}` for `M^m_0(a) = 1`.
pub const CONTINUITY_CONSTANT: f64 = 2.2;
pub const SLOPE_ALLOWANCE: f64 = 0.2;

/// Composition and adjoint remainder orders, spectrum localisation and continuity.
pub fn calculus_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let g = Grid::new(256)?;
    let cut = Cutoff::new(2.0, 1.0)?;
    let inner = Cutoff {
        big_b: cut.composed_aperture(&cut),
        little_b: cut.little_b,
    };
    let (m1, m2, rho) = (0.5, 1.0, 2.0);
    let a = Symbol::separated(&smooth_field(g, 3, 1), m1, f64::INFINITY, |xi| re(xi as f64 * abs_pow(xi, -0.5)));
    let b = Symbol::separated(&smooth_field(g, 3, 2), m2, f64::INFINITY, |xi| re(xi as f64));
    let rem = materialize(&a, &cut)
        .mul(&materialize(&b, &cut))
        .sub(&materialize(&compose_sharp(&a, &b, rho)?, &inner));
    out.push(Check::at_most(
        "composition remainder slope",
        order_probe(&rem)?.slope,
        m1 + m2 - rho + SLOPE_ALLOWANCE,
    ));

    let a = Symbol::separated(&smooth_field(g, 3, 3), 1.0, f64::INFINITY, |xi| re(xi as f64)).add(
        &Symbol::separated(&smooth_field(g, 2, 4), 1.0, f64::INFINITY, |xi| {
            Complex64::new(0.0, (1.0 + (xi * xi) as f64).sqrt())
        }),
    );
    for rho in [1.0, 2.0] {
        let rem = materialize(&a, &cut).adjoint().sub(&materialize(&adjoint_star(&a, rho)?, &cut));
        out.push(Check::at_most(
            format!("adjoint remainder slope rho={rho}"),
            order_probe(&rem)?.slope,
            1.0 - rho + SLOPE_ALLOWANCE,
        ));
    }

    let g = Grid::new(128)?;
    let mut localised = true;
    for (big_b, little_b) in [(2.0, 1.0), (3.0, 2.0), (8.0, 2.0), (2.5, 0.5)] {
        let c = Cutoff::new(big_b, little_b)?;
        localised &= spectrum_localisation_holds(&materialize(&Symbol::random(g, 0.0, 63, false, 7), &c), &c);
    }
    out.push(Check::holds("spectrum localisation", localised));
    let mut composed = true;
    for (b1, b2) in [(2.0, 2.0), (2.0, 5.0), (8.0, 8.0)] {
        let c1 = Cutoff::new(b1, 1.0)?;
        let c2 = Cutoff::new(b2, 1.0)?;
        let prod = materialize(&Symbol::random(g, 0.0, 63, false, 1), &c1)
            .mul(&materialize(&Symbol::random(g, 0.0, 63, false, 2), &c2));
        let inner = Cutoff {
            big_b: c1.composed_aperture(&c2),
            little_b: 1.0,
        };
        composed &= support_within(&prod, &inner);
    }
    out.push(Check::holds("composition support", composed));

    let g = Grid::new(64)?;
    let mut worst = 0.0f64;
    for seed in 0..4 {
        for m in [-0.5, 0.0, 1.0] {
            let a = Symbol::random(g, m, 8, false, seed);
            let t = materialize(&a.scale(re(1.0 / seminorm(&a, m, 0.0, 0)?)), &cut);
            for s in [-1.0, 0.0, 2.0] {
                worst = worst.max(t.sobolev_norm(s, m));
            }
        }
    }
    out.push(Check::at_most("operator norm bound", worst, CONTINUITY_CONSTANT));
    Ok(out)
}

/// Mass and Hamiltonian drift of `0.01 cos x` on `[0, 1]`, and their decay under halving.
pub fn conservation_suite(n: usize, alphas: &[f64]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let drift = |c: &SimConfig| -> Result<(f64, f64)> {
        let tr = run(c)?;
        let (d0, dl) = (&tr.diagnostics[0], tr.diagnostics.last().unwrap());
        Ok((
            (dl.mass - d0.mass).abs() / d0.mass,
            (dl.hamiltonian - d0.hamiltonian).abs() / d0.hamiltonian.abs(),
        ))
    };
    for &alpha in alphas {
        let base = SimConfig::new(n, alpha, Equation::Full, InitialCondition::Cos1, 0.01, 1.0);
        let (m, h) = drift(&base)?;
        out.push(Check::at_most(format!("mass drift alpha={alpha}"), m, 1e-8));
        out.push(Check::at_most(format!("hamiltonian drift alpha={alpha}"), h, 1e-6));
        // At the default step both drifts sit at round-off, so the rate is read on coarse steps.
        let coarse = [0.5, 0.25, 0.125]
            .iter()
            .map(|&dt| {
                drift(&SimConfig {
                    dt,
                    stride: 1000,
                    ..base.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = [0.5, 0.25, 0.125];
        let ms: Vec<f64> = coarse.iter().map(|x| x.0).collect();
        let hs: Vec<f64> = coarse.iter().map(|x| x.1).collect();
        out.push(Check::at_least(format!("mass drift order alpha={alpha}"), log_slope(&steps, &ms), 3.7));
        out.push(Check::at_least(format!("hamiltonian drift order alpha={alpha}"), log_slope(&steps, &hs), 3.7));
    }
    Ok(out)
}

/// Settings of the energy-estimate study.
#[derive(Debug, Clone)]
pub struct EnergySettings {
    pub n_points: usize,
    pub alpha: f64,
    pub s: f64,
    pub t_end: f64,
    pub stride: usize,
    pub cutoff: Cutoff,
    pub amplitudes: [f64; 3],
    pub seed: u64,
}

impl Default for EnergySettings {
    fn default() -> Self {
        EnergySettings {
            n_points: 128,
            alpha: 1.5,
            s: 2.0,
            t_end: 1.0,
            stride: 8,
            cutoff: Cutoff::new(4.0, 1.0).expect("valid aperture"),
            amplitudes: STANDARD_AMPLITUDES,
            seed: 0,
        }
    }
}

/// Largest `v ↔ w` equivalence constant accepted for small data.
pub const EQUIVALENCE_LIMIT: f64 = 2.0;
/// Upper bound on the single growth constant fitted over the standard ensemble.
pub const GROWTH_CONSTANT_LIMIT: f64 = 1.0;
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Runs the energy study over the standard ensemble.
pub fn energy_ensemble(settings: &EnergySettings) -> Result<(EstimateReport, Vec<EnergyStudy>)> {
    use rayon::prelude::*;
    let studies = standard_ensemble(settings.amplitudes)
        .into_par_iter()
        .map(|(family, amp)| {
            let mut cfg =
                SimConfig::new(settings.n_points, settings.alpha, Equation::Paralinear, family, amp, settings.t_end);
            cfg.cutoff = settings.cutoff;
            cfg.stride = settings.stride;
            cfg.seed = settings.seed;
            cfg.sobolev_indices = vec![settings.s];
            energy_estimate_study(&run(&cfg)?, settings.s, settings.alpha, &settings.cutoff)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ensemble_report(&studies), studies))
}

pub fn energy_checks(report: &EstimateReport, studies: &[EnergyStudy]) -> Vec<Check> {
    let fold = |f: fn(&EnergyStudy) -> f64| studies.iter().map(f).fold(0.0f64, f64::max);
    vec![
        Check::holds("energy ratio verdict bounded", report.verdict == Verdict::Bounded),
        Check::at_most("energy max ratio within fitted constant", report.max_ratio, report.fitted_constant),
        Check::at_most("gauge hermitian residual", fold(|s| s.hermitian_residual), SYMMETRY_TOLERANCE),
        Check::at_most("bracket skew residual", fold(|s| s.bracket_skew_residual), SYMMETRY_TOLERANCE),
        Check::at_most("w-v equivalence", fold(|s| s.equivalence), EQUIVALENCE_LIMIT),
        Check::at_most("single growth constant", fold(|s| s.growth_constant), GROWTH_CONSTANT_LIMIT),
    ]
}

/// Settings of the conjugation study.
#[derive(Debug, Clone)]
pub struct ConjugationSettings {
    pub n_points: usize,
    pub alpha: f64,
    pub amplitude: f64,
    pub t_end: f64,
    /// Sample spacing of the recorded trajectory.
    pub sample_dt: f64,
    /// Solver steps per sample.
    pub substeps: usize,
    pub cutoff: Cutoff,
    pub s_probes: Vec<f64>,
    pub gauge: ConjugatingConfig,
}

impl Default for ConjugationSettings {
    fn default() -> Self {
        ConjugationSettings {
            n_points: 128,
            alpha: 2.5,
            amplitude: 0.01,
            t_end: 0.5,
            sample_dt: 0.05,
            substeps: 256,
            cutoff: Cutoff::new(8.0, 2.0).expect("valid aperture"),
            s_probes: vec![0.0, 1.0, 2.0],
            gauge: ConjugatingConfig::default(),
        }
    }
}

pub fn conjugation_run(settings: &ConjugationSettings) -> Result<ConjugationStudy> {
    let mut cfg = SimConfig::new(
        settings.n_points,
        settings.alpha,
        Equation::Paralinear,
        InitialCondition::Cos1,
        settings.amplitude,
        settings.t_end,
    );
    cfg.cutoff = settings.cutoff;
    cfg.dt = settings.sample_dt / settings.substeps as f64;
    cfg.stride = settings.substeps;
    cfg.sobolev_indices = Vec::new();
    conjugation_study(&run(&cfg)?, settings.alpha, &settings.cutoff, &settings.s_probes, settings.gauge)
}

pub const ORDER_STABILITY: f64 = 0.05;
pub const REFINEMENT_DRIFT: f64 = 0.1;

/// Order of the residual operator, its stability in `B`, and invariance under halving
/// the sample spacing.
pub fn conjugation_suite(settings: &ConjugationSettings) -> Result<(Vec<Check>, ConjugationStudy)> {
    let base = conjugation_run(settings)?;
    let wide = conjugation_run(&ConjugationSettings {
        cutoff: Cutoff::new(2.0 * settings.cutoff.big_b, settings.cutoff.little_b)?,
        ..settings.clone()
    })?;
    let fine = conjugation_run(&ConjugationSettings {
        sample_dt: settings.sample_dt / 2.0,
        ..settings.clone()
    })?;
    let order = base.order.unwrap_or(f64::NAN);
    let spread = (order - wide.order.unwrap_or(f64::NAN)).abs();
    let drift = (fine.operator_norm - base.operator_norm).abs() / base.operator_norm;
    let checks = vec![
        Check::at_most("residual order", order, paraburgers::experiments::ORDER_LIMIT),
        Check::holds("conjugation verdict bounded", base.report.verdict == Verdict::Bounded),
        Check::at_most("residual order stability in B", spread, ORDER_STABILITY),
        Check::at_most("residual operator refinement drift", drift, REFINEMENT_DRIFT),
    ];
    Ok((checks, base))
}

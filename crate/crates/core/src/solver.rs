//! Pseudospectral integration of the full and paralinearised equations
//! `∂ₜu + N(u) + ∂ₓ|D|^{α−1}u = 0` on the torus.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::{diagnostics, DiagnosticsRecord};
use crate::paraop::paraproduct;
use crate::spectral::{lp_weight, mult, multiplier_apply, norm, Field, Grid, NormKind};
use crate::symbols::Cutoff;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerance of the step-doubling error estimate used by adaptive halving.
pub const ADAPTIVE_TOL: f64 = 1e-8;
/// Number of halvings allowed below the configured step.
pub const MAX_HALVINGS: u32 = 12;
pub const SUP_GROWTH_LIMIT: f64 = 1e6;
pub const LIPSCHITZ_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `N(u) = u∂ₓu`, evaluated as `½∂ₓ(u²)`.
    Full,
    /// `N(u) = T_u∂ₓu`.
    Paralinear,
}

impl std::str::FromStr for Equation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Equation::Full),
            "paralinear" => Ok(Equation::Paralinear),
            other => Err(Error::InvalidArgument(format!("unknown equation '{other}'"))),
        }
    }
}

/// Named families of initial data; the amplitude is the sup norm of the profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// `A cos x`.
    Cos1,
    /// `A(cos x + 0.3 sin 2x)`.
    CosSin,
    /// A Gaussian bump of width 0.5 centred at π, band-limited to `|ξ| ≤ 12`
    /// with its mean removed, rescaled to sup norm `A`.
    Gaussian,
    /// Random coefficients on `1 ≤ |ξ| ≤ band`, rescaled to sup norm `A`.
    Random { band: i64 },
}

impl std::str::FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cos1" => Ok(InitialCondition::Cos1),
            "cossin" => Ok(InitialCondition::CosSin),
            "gaussian" => Ok(InitialCondition::Gaussian),
            "random" => Ok(InitialCondition::Random { band: 8 }),
            other => Err(Error::InvalidArgument(format!("unknown initial condition '{other}'"))),
        }
    }
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Cos1 => "cos1",
            InitialCondition::CosSin => "cossin",
            InitialCondition::Gaussian => "gaussian",
            InitialCondition::Random { .. } => "random",
        }
    }

    pub fn build(&self, g: Grid, amplitude: f64, seed: u64) -> Field {
        match *self {
            InitialCondition::Cos1 => Field::from_fn(g, |x| amplitude * x.cos()),
            InitialCondition::CosSin => Field::from_fn(g, |x| amplitude * (x.cos() + 0.3 * (2.0 * x).sin())),
            InitialCondition::Gaussian => {
                let raw = Field::from_fn(g, |x| (-(x - PI).powi(2) / 0.5).exp());
                let coeffs = g
                    .frequencies()
                    .map(|xi| if xi == 0 || xi.abs() > 12 { ZERO } else { raw.coeff(xi) })
                    .collect();
                normalise_sup(Field::from_coeffs(g, coeffs, true), amplitude)
            }
            InitialCondition::Random { band } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut coeffs = vec![ZERO; g.n_points()];
                for xi in 1..=band.min(g.max_freq()) {
                    let c = Complex64::from_polar(
                        rng.gen_range(0.2..1.0) / xi as f64,
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    );
                    coeffs[g.index(xi).unwrap()] = c;
                    coeffs[g.index(-xi).unwrap()] = c.conj();
                }
                normalise_sup(Field::from_coeffs(g, coeffs, true), amplitude)
            }
        }
    }
}

fn normalise_sup(u: Field, amplitude: f64) -> Field {
    let s = norm(&u, NormKind::Linf);
    if s == 0.0 {
        u
    } else {
        u.scale(amplitude / s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_points: usize,
    pub alpha: f64,
    pub cutoff: Cutoff,
    pub equation: Equation,
    pub dt: f64,
    pub t_end: f64,
    /// Apply the 2/3 rule to the full nonlinearity.
    pub dealias: bool,
    pub initial_condition: InitialCondition,
    pub amplitude: f64,
    pub seed: u64,
    /// Steps between recorded samples.
    pub stride: usize,
    /// Halve the step whenever the step-doubling estimate exceeds [`ADAPTIVE_TOL`].
    pub adaptive: bool,
    /// Sobolev indices recorded in the diagnostics.
    pub sobolev_indices: Vec<f64>,
    /// Test hook: drop the nonlinearity and evolve freely.
    pub linear_only: bool,
}

/// `0.5·(N/2)^{−α}·2π`, which keeps the fastest linear phase per step at π.
pub fn default_dt(n_points: usize, alpha: f64) -> f64 {
    0.5 * (n_points as f64 / 2.0).powf(-alpha) * 2.0 * PI
}

impl SimConfig {
    pub fn new(n_points: usize, alpha: f64, equation: Equation, initial_condition: InitialCondition, amplitude: f64, t_end: f64) -> Self {
        SimConfig {
            n_points,
            alpha,
            cutoff: crate::gauge::default_cutoff(),
            equation,
            dt: default_dt(n_points, alpha),
            t_end,
            dealias: true,
            initial_condition,
            amplitude,
            seed: 0,
            stride: 10,
            adaptive: false,
            sobolev_indices: vec![2.0],
            linear_only: false,
        }
    }

    pub fn validate(&self) -> Result<Grid> {
        let g = Grid::new(self.n_points)?;
        if !(self.alpha > 1.0 && self.alpha <= 3.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (1, 3], got {}", self.alpha)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::InvalidArgument(format!("t_end {} is shorter than dt {}", self.t_end, self.dt)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        Ok(g)
    }

    pub fn initial_field(&self) -> Result<Field> {
        let g = self.validate()?;
        Ok(self.initial_condition.build(g, self.amplitude, self.seed))
    }
}

/// The nonlinear term `−N(u)`.
pub fn nonlinearity(u: &Field, cfg: &SimConfig) -> Result<Field> {
    let g = u.grid();
    if cfg.linear_only {
        return Ok(Field::zeros(g));
    }
    match cfg.equation {
        Equation::Full => {
            let sq = if cfg.dealias {
                crate::spectral::dealiased_product(u, u)?
            } else {
                let v: Vec<Complex64> = u.values().iter().map(|z| z * z).collect();
                Field::from_coeffs(g, g.forward(&v), u.is_real())
            };
            multiplier_apply(&sq, |xi| Complex64::new(0.0, -0.5 * xi as f64))
        }
        Equation::Paralinear => {
            let ux = multiplier_apply(u, mult::deriv())?;
            Ok(paraproduct(u, &cfg.cutoff, &ux)?.scale(-1.0))
        }
    }
}

/// One integrating-factor RK4 step of size `dt`.
pub fn step_with(state: &Field, cfg: &SimConfig, dt: f64) -> Result<Field> {
    let half = mult::free_propagator(cfg.alpha, 0.5 * dt);
    let full = mult::free_propagator(cfg.alpha, dt);
    let e2 = |f: &Field| multiplier_apply(f, &half);
    let e1 = |f: &Field| multiplier_apply(f, &full);
    let k1 = nonlinearity(state, cfg)?;
    let k2 = nonlinearity(&e2(&state.axpy(0.5 * dt, &k1))?, cfg)?;
    let k3 = nonlinearity(&e2(state)?.axpy(0.5 * dt, &k2), cfg)?;
    let k4 = nonlinearity(&e1(state)?.axpy(dt, &e2(&k3)?), cfg)?;
    let incr = e1(&k1)?.axpy(2.0, &e2(&k2.add(&k3))?).add(&k4);
    let out = e1(state)?.axpy(dt / 6.0, &incr);
    if !out.is_finite() {
        return Err(Error::NanDetected { t: f64::NAN });
    }
    Ok(out)
}

pub fn step(state: &Field, cfg: &SimConfig) -> Result<Field> {
    step_with(state, cfg, cfg.dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupTrigger {
    NotANumber,
    SupNorm,
    Lipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blowup {
    pub trigger: BlowupTrigger,
    /// Last time at which the state was valid.
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub blowup: Option<Blowup>,
    /// For paralinear runs, the largest distance between `P₀(D)u(t)` and the free
    /// evolution of `P₀(D)u₀` over the recorded samples.
    pub low_frequency_residual: Option<f64>,
    /// Step size in use when the run ended.
    pub final_dt: f64,
    pub steps: usize,
}

fn low_part(u: &Field) -> Result<Field> {
    multiplier_apply(u, |xi| Complex64::new(lp_weight(0, xi as f64), 0.0))
}

fn check_blowup(u: &Field, sup0: f64) -> Result<Option<BlowupTrigger>> {
    if !u.is_finite() {
        return Ok(Some(BlowupTrigger::NotANumber));
    }
    if norm(u, NormKind::Linf) > SUP_GROWTH_LIMIT * sup0.max(f64::MIN_POSITIVE) {
        return Ok(Some(BlowupTrigger::SupNorm));
    }
    let ux = multiplier_apply(u, mult::deriv())?;
    if norm(&ux, NormKind::Linf) > LIPSCHITZ_LIMIT {
        return Ok(Some(BlowupTrigger::Lipschitz));
    }
    Ok(None)
}

/// Integrates from the configured initial condition.
pub fn run(cfg: &SimConfig) -> Result<Trajectory> {
    run_from(cfg, cfg.initial_field()?)
}

/// Integrates from `u0` to `t_end`, recording every `stride` steps and at the end.
pub fn run_from(cfg: &SimConfig, u0: Field) -> Result<Trajectory> {
    let g = cfg.validate()?;
    g.check_same(&u0.grid())?;
    let sup0 = norm(&u0, NormKind::Linf);
    let low0 = low_part(&u0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        diagnostics: vec![diagnostics(&u0, cfg.alpha, &cfg.sobolev_indices, 0.0)?],
        blowup: None,
        low_frequency_residual: (cfg.equation == Equation::Paralinear).then_some(0.0),
        final_dt: cfg.dt,
        steps: 0,
    };
    let mut u = u0;
    let mut t = 0.0;
    let mut dt = cfg.dt;
    let dt_min = cfg.dt / 2f64.powi(MAX_HALVINGS as i32);
    let eps = 1e-12 * cfg.t_end;
    while t < cfg.t_end - eps {
        let h = dt.min(cfg.t_end - t);
        let next = if cfg.adaptive {
            adaptive_step(&u, cfg, h, &mut dt, dt_min)
        } else {
            step_with(&u, cfg, h).map(|v| (v, h))
        };
        let (v, taken) = match next {
            Ok(x) => x,
            Err(Error::NanDetected { .. }) => {
                traj.blowup = Some(Blowup {
                    trigger: BlowupTrigger::NotANumber,
                    t,
                });
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(trigger) = check_blowup(&v, sup0)? {
            traj.blowup = Some(Blowup { trigger, t });
            break;
        }
        u = v;
        t += taken;
        traj.steps += 1;
        let last = t >= cfg.t_end - eps;
        if traj.steps % cfg.stride == 0 || last {
            if let Some(r) = traj.low_frequency_residual.as_mut() {
                let free = multiplier_apply(&low0, mult::free_propagator(cfg.alpha, t))?;
                *r = r.max(low_part(&u)?.sub(&free).max_coeff());
            }
            traj.diagnostics.push(diagnostics(&u, cfg.alpha, &cfg.sobolev_indices, t)?);
            traj.times.push(t);
            traj.states.push(u.clone());
        }
    }
    traj.final_dt = dt;
    Ok(traj)
}

fn adaptive_step(u: &Field, cfg: &SimConfig, h: f64, dt: &mut f64, dt_min: f64) -> Result<(Field, f64)> {
    let mut h = h;
    loop {
        let coarse = step_with(u, cfg, h)?;
        let fine = step_with(&step_with(u, cfg, 0.5 * h)?, cfg, 0.5 * h)?;
        let scale = fine.l2_norm().max(f64::MIN_POSITIVE);
        let err = coarse.sub(&fine).l2_norm() / scale;
        if err <= ADAPTIVE_TOL || 0.5 * h < dt_min {
            return Ok((fine, h));
        }
        h *= 0.5;
        *dt = dt.min(h);
    }
}

/// `u_λ(x) = λ^{α−1}u(λx)` by relabelling modes `ξ ↦ λξ`, for `λ = 2^k`.
pub fn rescale(u: &Field, lambda: f64, alpha: f64) -> Result<Field> {
    let k = lambda.log2();
    if !(lambda > 0.0) || k.fract() != 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be a power of two, got {lambda}")));
    }
    let g = u.grid();
    let mut coeffs = vec![ZERO; g.n_points()];
    let amp = lambda.powf(alpha - 1.0);
    // FFT round-off leaves ~1e-17 debris on empty modes; it does not count as spectrum.
    let floor = 1e-14 * u.max_coeff();
    for xi in g.frequencies() {
        let c = u.coeff(xi);
        if c.norm() <= floor {
            continue;
        }
        let target = if k >= 0.0 {
            xi * lambda as i64
        } else {
            let d = (1.0 / lambda) as i64;
            if xi % d != 0 {
                return Err(Error::InvalidArgument(format!(
                    "mode {xi} is not divisible by {d}, so u(λx) is not 2π-periodic"
                )));
            }
            xi / d
        };
        // The most negative mode has no conjugate partner on the lattice.
        let idx = g
            .index(target)
            .filter(|_| target != g.min_freq())
            .ok_or(Error::SpectrumOverflow { mode: target })?;
        coeffs[idx] = c * amp;
    }
    Ok(Field::from_coeffs(g, coeffs, u.is_real()))
}

/// `Ḣ^s` norm of a rescaled field measured over one period `2π/λ` of `u(λ·)`,
/// so that `‖u_λ‖ = λ^{α+s−3/2}‖u‖_{Ḣ^s(𝕋)}`.
pub fn period_hom_norm(u_lambda: &Field, s: f64, lambda: f64) -> f64 {
    norm(u_lambda, NormKind::HomHs(s)) / lambda.sqrt()
}

//! Bilinear Fourier multipliers and the quadratic normal form
//! `w = v + Π_{χ₁}(u, D^{1−α}v)` with `v = ⟨D⟩^s u`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{mult, multiplier_apply, Field, Grid};
use crate::symbols::Cutoff;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const SMALL_DIVISOR_FACTOR: f64 = 1e-8;

/// `Ω_α(ξ₁, ξ₂) = ω(ξ₁+ξ₂) − ω(ξ₁) − ω(ξ₂)` with `ω(ξ) = ξ|ξ|^{α−1}`.
pub fn resonance(alpha: f64, xi1: f64, xi2: f64) -> f64 {
    let w = |x: f64| mult::dispersion_symbol(alpha, x);
    w(xi1 + xi2) - w(xi1) - w(xi2)
}

/// A bilinear multiplier on the lattice, zero wherever `|ξ₁|` or `|ξ₂|` exceeds `band`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier2 {
    grid: Grid,
    band: i64,
    /// Row `ξ₁`, column `ξ₂`.
    values: Vec<Complex64>,
}

impl Multiplier2 {
    pub fn from_fn(grid: Grid, band: i64, f: impl Fn(i64, i64) -> Complex64 + Sync) -> Self {
        let n = grid.n_points();
        let values = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (x1, x2) = (grid.freq(k / n), grid.freq(k % n));
                if x1.abs() > band || x2.abs() > band {
                    ZERO
                } else {
                    f(x1, x2)
                }
            })
            .collect();
        Multiplier2 { grid, band, values }
    }

    /// `χ ≡ 1` on the dealiased band, so that `Π_χ(f, g)` is the 2/3-rule product.
    pub fn ones(grid: Grid) -> Self {
        Self::from_fn(grid, grid.dealias_cap(), |_, _| Complex64::new(1.0, 0.0))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn band(&self) -> i64 {
        self.band
    }

    pub fn at(&self, xi1: i64, xi2: i64) -> Complex64 {
        match (self.grid.index(xi1), self.grid.index(xi2)) {
            (Some(i), Some(j)) => self.values[i * self.grid.n_points() + j],
            _ => ZERO,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// `Π_χ(f₁, f₂)`: mode `ξ₁+ξ₂` collects `χ(ξ₁,ξ₂)f̂₁(ξ₁)f̂₂(ξ₂)`; outputs outside the
/// band are dropped.
pub fn multilinear_apply(chi: &Multiplier2, f1: &Field, f2: &Field) -> Result<Field> {
    let g = chi.grid;
    g.check_same(&f1.grid())?;
    g.check_same(&f2.grid())?;
    let band = chi.band;
    let mut out = vec![ZERO; g.n_points()];
    let active = |f: &Field| -> Vec<(i64, Complex64)> {
        g.frequencies()
            .filter(|x| x.abs() <= band)
            .map(|x| (x, f.coeff(x)))
            .filter(|(_, c)| *c != ZERO)
            .collect()
    };
    let (a1, a2) = (active(f1), active(f2));
    for &(x1, c1) in &a1 {
        for &(x2, c2) in &a2 {
            let s = x1 + x2;
            if s.abs() > band {
                continue;
            }
            if let Some(o) = g.index(s) {
                out[o] += chi.at(x1, x2) * c1 * c2;
            }
        }
    }
    Ok(Field::from_coeffs(g, out, f1.is_real() && f2.is_real()))
}

/// The normal-form multiplier `χ` acting on `(v, v)` and its rescaling `χ₁`
/// acting on `(u, D^{1−α}v)`.
#[derive(Debug, Clone)]
pub struct NormalFormMultipliers {
    pub chi: Multiplier2,
    pub chi1: Multiplier2,
}

fn japanese(x: i64, s: f64) -> f64 {
    (1.0 + (x * x) as f64).powf(0.5 * s)
}

/// `χ(ξ₁, ξ₂)`, the solution of `iΩ_α χ = −R` where `R` is the bilinear symbol of
/// `[T_u∂ₓ, ⟨D⟩^s]⟨D⟩^{−s}v − (i/2)(T_{uξ} − T_{uξ}^*)v` with `u = ⟨D⟩^{−s}v`.
pub fn chi_entry(s: f64, alpha: f64, c: &Cutoff, xi1: i64, xi2: i64) -> Result<f64> {
    let psi1 = c.at(xi1, xi2);
    let psi2 = c.at(xi1, xi1 + xi2);
    if xi1 == 0 || (psi1 == 0.0 && psi2 == 0.0) {
        return Ok(0.0);
    }
    let omega = resonance(alpha, xi1 as f64, xi2 as f64);
    let (lo, hi) = {
        let (a, b) = (xi1.abs() as f64, xi2.abs() as f64);
        (a.min(b), a.max(b))
    };
    let threshold = SMALL_DIVISOR_FACTOR * lo * hi.powf(alpha - 1.0);
    if !(omega.abs() >= threshold) || omega == 0.0 {
        return Err(Error::SmallDivisor {
            eta: xi1,
            xi: xi2,
            value: omega.abs(),
            threshold,
        });
    }
    let w1 = japanese(xi1, -s);
    let (j2, j12) = (japanese(xi2, s), japanese(xi1 + xi2, s));
    let commutator = -psi1 * w1 * xi2 as f64 * (j2 - j12) / j2;
    let antisymmetric = 0.5 * w1 * (psi1 * xi2 as f64 - psi2 * (xi1 + xi2) as f64);
    Ok((commutator + antisymmetric) / omega)
}

type CacheKey = (usize, u64, u64, u64, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<NormalFormMultipliers>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<NormalFormMultipliers>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Tabulates `χ` and `χ₁ = χ·⟨ξ₁⟩^s|ξ₂|^{α−1}` on the lattice, cached per
/// `(N, s, α, B, b)`.
pub fn build_chi1(grid: Grid, s: f64, alpha: f64, c: &Cutoff) -> Result<Arc<NormalFormMultipliers>> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidArgument(format!("the normal form needs alpha > 1, got {alpha}")));
    }
    let key = (grid.n_points(), s.to_bits(), alpha.to_bits(), c.big_b.to_bits(), c.little_b.to_bits());
    if let Some(hit) = cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let band = grid.max_freq();
    let n = grid.n_points();
    let entries: Vec<Result<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (x1, x2) = (grid.freq(k / n), grid.freq(k % n));
            if x1.abs() > band || x2.abs() > band {
                Ok(0.0)
            } else {
                chi_entry(s, alpha, c, x1, x2)
            }
        })
        .collect();
    let values: Vec<f64> = entries.into_iter().collect::<Result<_>>()?;
    let chi = Multiplier2::from_fn(grid, band, |x1, x2| {
        Complex64::new(values[grid.index(x1).unwrap() * n + grid.index(x2).unwrap()], 0.0)
    });
    let chi1 = Multiplier2::from_fn(grid, band, |x1, x2| {
        chi.at(x1, x2) * japanese(x1, s) * (x2.abs() as f64).powf(alpha - 1.0)
    });
    let out = Arc::new(NormalFormMultipliers { chi, chi1 });
    cache().lock().unwrap().insert(key, out.clone());
    Ok(out)
}

/// Largest `|Δ_{ξ₁}χ|·|ξ₁|` and `|Δ_{ξ₂}χ|·|ξ₂|` over lattice points whose forward
/// stencils stay where both cutoff factors equal one.
pub fn marcinkiewicz_constant(chi: &Multiplier2, c: &Cutoff) -> f64 {
    let g = chi.grid;
    let inside = |x1: i64, x2: i64| c.at(x1, x2) == 1.0 && c.at(x1, x1 + x2) == 1.0 && g.index(x1 + x2).is_some();
    let band = chi.band - 1;
    let mut worst: f64 = 0.0;
    for x1 in -band..band {
        if x1 == 0 || x1 == -1 {
            continue;
        }
        for x2 in -band..band {
            if !(inside(x1, x2) && inside(x1 + 1, x2) && inside(x1, x2 + 1)) {
                continue;
            }
            let v = chi.at(x1, x2);
            let d1 = (chi.at(x1 + 1, x2) - v).norm() * x1.abs() as f64;
            let d2 = (chi.at(x1, x2 + 1) - v).norm() * x2.abs() as f64;
            worst = worst.max(d1).max(d2);
        }
    }
    worst
}

/// `w = v + Π_{χ₁}(u, D^{1−α}v)`.
pub fn normal_form(u: &Field, v: &Field, s: f64, alpha: f64, c: &Cutoff) -> Result<Field> {
    let g = u.grid();
    g.check_same(&v.grid())?;
    let m = build_chi1(g, s, alpha, c)?;
    let dv = multiplier_apply(v, mult::abs_pow(1.0 - alpha))?;
    Ok(v.add(&multilinear_apply(&m.chi1, u, &dv)?))
}

/// `max(‖w‖/‖v‖, ‖v‖/‖w‖)` in `L²`, the constant of `C⁻¹‖v‖ ≤ ‖w‖ ≤ C‖v‖`.
pub fn equivalence_constant(v: &Field, w: &Field) -> f64 {
    let (a, b) = (v.l2_norm(), w.l2_norm());
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        (b / a).max(a / b)
    }
}

use num_complex::Complex64;
use paraburgers::paraop::{
    adjoint_star, bony_remainder, compose_sharp, materialize, order_probe, spectrum_localisation_holds,
    support_within, OperatorMatrix,
};
use paraburgers::spectral::{norm, Field, Grid, NormKind};
use paraburgers::symbols::{regularize, seminorm, Cutoff, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

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

/// A real function whose Fourier coefficients decay like `|η|^{-(ρ+1)}`.
fn rough_field(g: Grid, rho: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = g
        .frequencies()
        .map(|eta| {
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar((1.0 + eta.abs() as f64).powf(-(rho + 1.0)), phase)
        })
        .collect();
    Field::from_coeffs(g, coeffs, true)
}

fn abs_pow(xi: i64, p: f64) -> f64 {
    if xi == 0 {
        0.0
    } else {
        (xi.abs() as f64).powf(p)
    }
}

#[test]
fn composition_remainder_has_reduced_order() {
    let g = Grid::new(256).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let inner = Cutoff {
        big_b: cut.composed_aperture(&cut),
        little_b: cut.little_b,
    };
    let u = smooth_field(g, 3, 1);
    let v = smooth_field(g, 3, 2);
    let a = Symbol::separated(&u, 0.5, f64::INFINITY, |xi| re(xi as f64 * abs_pow(xi, -0.5)));
    let b = Symbol::separated(&v, 1.0, f64::INFINITY, |xi| re(xi as f64));
    let sharp = compose_sharp(&a, &b, 2.0).unwrap();
    let rem = materialize(&a, &cut)
        .mul(&materialize(&b, &cut))
        .sub(&materialize(&sharp, &inner));
    let est = order_probe(&rem).unwrap();
    println!("composition remainder slope {:.3}", est.slope);
    assert!(est.slope <= 0.5 + 1.0 - 2.0 + 0.2);
}

#[test]
fn adjoint_remainder_has_reduced_order() {
    let g = Grid::new(256).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let u = smooth_field(g, 3, 3);
    let a = Symbol::separated(&u, 1.0, f64::INFINITY, |xi| re(xi as f64)).add(
        &Symbol::separated(&smooth_field(g, 2, 4), 1.0, f64::INFINITY, |xi| {
            Complex64::new(0.0, (1.0 + (xi * xi) as f64).sqrt())
        }),
    );
    for rho in [1.0, 2.0] {
        let star = adjoint_star(&a, rho).unwrap();
        let rem = materialize(&a, &cut).adjoint().sub(&materialize(&star, &cut));
        let est = order_probe(&rem).unwrap();
        println!("adjoint remainder rho={rho} slope {:.3}", est.slope);
        assert!(est.slope <= 1.0 - rho + 0.2);
    }
}

#[test]
fn cutoff_change_is_of_lower_order() {
    let g = Grid::new(256).unwrap();
    let (m, rho) = (0.5, 1.5);
    let f = rough_field(g, rho, 5);
    let a = Symbol::separated(&f, m, rho, |xi| re((1.0 + (xi * xi) as f64).powf(0.5 * m)));
    let c1 = Cutoff::new(2.0, 1.0).unwrap();
    let c2 = Cutoff::new(4.0, 2.0).unwrap();
    let identity = Cutoff {
        big_b: 0.0,
        little_b: -1.0,
    };
    let diff = regularize(&a, &c1).sub(&regularize(&a, &c2));
    let est = order_probe(&materialize(&diff, &identity)).unwrap();
    println!("cutoff difference slope {:.3}", est.slope);
    assert!(est.slope <= m - rho + 0.2);
}

#[test]
fn spectrum_localisation_is_exact() {
    let g = Grid::new(128).unwrap();
    for (big_b, little_b) in [(2.0, 1.0), (3.0, 2.0), (8.0, 2.0), (2.5, 0.5)] {
        let cut = Cutoff::new(big_b, little_b).unwrap();
        let a = Symbol::random(g, 0.0, 63, false, 7);
        let t = materialize(&a, &cut);
        assert!(spectrum_localisation_holds(&t, &cut));
        let r = 40i64;
        let out = t.apply(&smooth_field(g, r, 8)).unwrap();
        let bound = (1.0 + 1.0 / big_b) * r as f64 - little_b / big_b;
        assert!(g.frequencies().all(|xi| xi.abs() as f64 <= bound || out.coeff(xi).norm() == 0.0));
    }
}

#[test]
fn composition_cutoff_law() {
    let g = Grid::new(128).unwrap();
    for (b1, b2) in [(2.0, 2.0), (2.0, 5.0), (8.0, 8.0)] {
        let c1 = Cutoff::new(b1, 1.0).unwrap();
        let c2 = Cutoff::new(b2, 1.0).unwrap();
        let prod = materialize(&Symbol::random(g, 0.0, 63, false, 1), &c1)
            .mul(&materialize(&Symbol::random(g, 0.0, 63, false, 2), &c2));
        let inner = Cutoff {
            big_b: c1.composed_aperture(&c2),
            little_b: 1.0,
        };
        assert!(support_within(&prod, &inner));
    }
}

/// Operator norms `H^{s+m} → H^s` of `T_a` for `M^m_0(a) = 1`, frozen after calibration.
const CONTINUITY_CONSTANT: f64 = 2.2;

#[test]
fn paradifferential_operators_are_bounded() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        for m in [-0.5, 0.0, 1.0] {
            let a = Symbol::random(g, m, 8, false, seed);
            let a = a.scale(re(1.0 / seminorm(&a, m, 0.0, 0).unwrap()));
            let t = materialize(&a, &cut);
            for s in [-1.0, 0.0, 2.0] {
                worst = worst.max(t.sobolev_norm(s, m));
            }
        }
    }
    println!("largest normalised operator norm {worst:.3}");
    assert!(worst <= CONTINUITY_CONSTANT);
}

/// Bound on `‖ab − T_ab − T_ba‖_{H^{3.5}}` for unit `H²` data, frozen after calibration.
const BONY_CONSTANT: f64 = 0.65;

#[test]
fn bony_remainder_gains_regularity() {
    let g = Grid::new(128).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let a = smooth_field(g, 30, 2 * seed);
        let b = smooth_field(g, 30, 2 * seed + 1);
        let a = a.scale(1.0 / norm(&a, NormKind::Hs(2.0)));
        let b = b.scale(1.0 / norm(&b, NormKind::Hs(2.0)));
        let r = bony_remainder(&a, &b, &cut).unwrap();
        worst = worst.max(norm(&r, NormKind::Hs(3.5)));
    }
    println!("largest Bony remainder {worst:.4}");
    assert!(worst <= BONY_CONSTANT);
}

#[test]
fn identity_probe_is_flat() {
    let g = Grid::new(128).unwrap();
    assert!(order_probe(&OperatorMatrix::identity(g)).unwrap().slope.abs() < 0.05);
}

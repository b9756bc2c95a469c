use num_complex::Complex64;
use paraburgers::flow::{
    bch_truncation, commutator_factor, commutator_integral, conjugate, flow_build, flow_compose_check,
    flow_from_generator, flow_symbol_identity_residual, self_adjointify,
};
use paraburgers::paraop::{materialize, order_probe, OperatorMatrix};
use paraburgers::spectral::{norm, Field, Grid, NormKind};
use paraburgers::symbols::{seminorm, Cutoff, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn order_zero(g: Grid, seed: u64, scale: f64) -> Symbol {
    Symbol::random(g, 0.0, 4, true, seed).scale(re(scale))
}

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

#[test]
fn group_law_and_inverse() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 1, 1.0);
    let a = flow_build(&p, &cut, 0.4).unwrap().matrix;
    let b = flow_build(&p, &cut, 0.7).unwrap().matrix;
    let ab = flow_build(&p, &cut, 1.1).unwrap().matrix;
    assert!(a.mul(&b).sub(&ab).max_abs() < 1e-9);
    let inv = flow_build(&p, &cut, -0.4).unwrap().matrix;
    assert!(a.mul(&inv).sub(&OperatorMatrix::identity(g)).max_abs() < 1e-9);
}

#[test]
fn adjoint_flow() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let gen = materialize(&Symbol::random(g, 0.0, 4, false, 3), &cut);
    let f = flow_from_generator(&gen, 0.6).unwrap().matrix;
    let g2 = flow_from_generator(&gen.adjoint(), -0.6).unwrap().matrix;
    assert!(f.adjoint().sub(&g2).max_abs() < 1e-9);
}

#[test]
fn flow_symbol_identity_holds() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 4, 0.5);
    let probe = band_probe(g, 2, 16, 1);
    let r = flow_symbol_identity_residual(&p, &cut, 0.5, &probe, 2).unwrap();
    println!("flow-symbol identity residual {r:.3e}");
    assert!(r < 1e-6);
}

#[test]
fn conjugation_preserves_order() {
    let g = Grid::new(256).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 5, 0.5);
    let b = transport(g, 6);
    let est = order_probe(&conjugate(&p, &b, &cut, 0.5).unwrap()).unwrap();
    println!("conjugated order {:.3}", est.slope);
    assert!((est.slope - 1.0).abs() <= 0.2);
}

#[test]
fn commutator_factor_identities() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 7, 0.5);
    let b = transport(g, 8);
    let tau = 0.4;
    let fac = commutator_factor(&p, &b, &cut, tau).unwrap();
    let e = flow_build(&p, &cut, tau).unwrap().matrix;
    let tb = materialize(&b, &cut);
    let lhs = e.commutator(&tb);
    assert!(lhs.sub(&e.mul(&fac)).max_abs() < 1e-9);
    let integral = commutator_integral(&p, &b, &cut, tau, 2);
    assert!(integral.sub(&fac).max_abs() < 1e-6);
}

#[test]
fn commutator_factor_gains_one_order() {
    let g = Grid::new(256).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 9, 0.5);
    let b = transport(g, 10);
    let est = order_probe(&commutator_factor(&p, &b, &cut, 0.5).unwrap()).unwrap();
    println!("commutator factor order {:.3}", est.slope);
    assert!(est.slope <= 0.2);
}

#[test]
fn bch_truncation_decays_with_tau() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 11, 0.5);
    let b = transport(g, 12);
    for k in [1usize, 2] {
        let taus = [0.1, 0.05, 0.025];
        let errs: Vec<f64> = taus.iter().map(|&t| bch_truncation(&p, &b, &cut, t, k).unwrap()).collect();
        let pts: Vec<(f64, f64)> = taus.iter().zip(&errs).map(|(t, e)| (t.ln(), e.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        println!("BCH K={k} errors {errs:?} exponent {slope:.3}");
        assert!(slope >= k as f64 + 1.0 - 0.3);
    }
}

#[test]
fn flow_composition_generic() {
    let g = Grid::new(128).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let p = order_zero(g, 13, 0.5);
    let p2 = order_zero(g, 14, 0.5);
    let rep = flow_compose_check(&p, &p2, &cut, 0.5, 1e-8).unwrap();
    println!("composition {:.3e} difference {:.3e}", rep.composition, rep.difference);
    assert!(rep.max() <= 1e-6);
}

/// `‖e^{iτT_p} − e^{iτT_p̃}‖_{L²→L²} ≤ C|τ|M^0_0(p − p̃)`, frozen after calibration.
const FLOW_DIFFERENCE_CONSTANT: f64 = 2.0;

#[test]
fn flow_difference_estimate() {
    let g = Grid::new(64).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..6 {
        let p = order_zero(g, 100 + seed, 0.7);
        let q = p.add(&order_zero(g, 200 + seed, 0.1));
        for tau in [0.25, 1.0] {
            let d = flow_build(&p, &cut, tau)
                .unwrap()
                .matrix
                .sub(&flow_build(&q, &cut, tau).unwrap().matrix);
            let m = seminorm(&p.sub(&q), 0.0, 0.0, 0).unwrap();
            worst = worst.max(d.l2_norm() / (tau * m));
        }
    }
    println!("flow difference ratio {worst:.3}");
    assert!(worst <= FLOW_DIFFERENCE_CONSTANT);
}

/// Zygmund-norm amplification of self-adjointified order-0 flows, frozen after calibration.
const ZYGMUND_FLOW_CONSTANT: f64 = 2.6;

#[test]
fn flow_is_bounded_on_zygmund_spaces() {
    let g = Grid::new(128).unwrap();
    let cut = Cutoff::new(2.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let (h, _) = self_adjointify(&materialize(&order_zero(g, 300 + seed, 0.5), &cut));
        let e = flow_from_generator(&h, 1.0).unwrap().matrix;
        for s in [0.5, 1.5] {
            for k in 0..4 {
                let u = band_probe(g, 0, 40, 17 * seed + k);
                let v = e.apply(&u).unwrap();
                worst = worst.max(norm(&v, NormKind::Zygmund(s)) / norm(&u, NormKind::Zygmund(s)));
            }
        }
    }
    println!("Zygmund amplification {worst:.3}");
    assert!(worst <= ZYGMUND_FLOW_CONSTANT);
}

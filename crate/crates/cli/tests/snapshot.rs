use num_complex::Complex64;
use paraburgers::experiments::diagnostics;
use paraburgers::solver::{run, Equation, InitialCondition, SimConfig};
use paraburgers::spectral::{Field, Grid};
use paraburgers::symbols::Symbol;
use paraburgers_cli::snapshot::{
    decode, encode, field_from_bytes, load_field, load_symbol, load_trajectory, save_field, save_symbol,
    save_trajectory, symbol_from_bytes, Kind, SnapshotError, FORMAT_VERSION,
};
use proptest::prelude::*;

fn bits(c: &[Complex64]) -> Vec<(u64, u64)> {
    c.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

#[test]
fn header_layout_is_fixed() {
    let payload = [Complex64::new(1.5, -2.0)];
    let b = encode(Kind::Symbol, 16, 1.25, 0.5, &payload);
    assert_eq!(&b[0..4], b"PBRG");
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), FORMAT_VERSION);
    assert_eq!(b[8], 1);
    assert_eq!(u64::from_le_bytes(b[9..17].try_into().unwrap()), 16);
    assert_eq!(f64::from_le_bytes(b[17..25].try_into().unwrap()), 1.25);
    assert_eq!(f64::from_le_bytes(b[25..33].try_into().unwrap()), 0.5);
    assert_eq!(f64::from_le_bytes(b[33..41].try_into().unwrap()), 1.5);
    assert_eq!(f64::from_le_bytes(b[41..49].try_into().unwrap()), -2.0);
    assert_eq!(b.len(), 49);
}

#[test]
fn field_payload_is_in_increasing_frequency() {
    let g = Grid::new(8).unwrap();
    let u = Field::mode(g, 1);
    let (_, payload) = decode(&encode(Kind::Field, 8, 1.5, 0.0, u.coeffs())).unwrap();
    let expected: Vec<Complex64> = g.frequencies().map(|k| u.coeff(k)).collect();
    assert_eq!(payload, expected);
    assert_eq!(payload[g.index(1).unwrap()], Complex64::new(1.0, 0.0));
    assert_eq!(g.frequencies().next(), Some(-4));
}

#[test]
fn corrupt_magic_is_rejected() {
    let g = Grid::new(16).unwrap();
    let mut b = encode(Kind::Field, 16, 1.5, 0.0, Field::mode(g, 2).coeffs());
    b[0] = b'X';
    assert!(matches!(field_from_bytes(&b), Err(SnapshotError::BadMagic)));
}

#[test]
fn version_and_truncation_errors() {
    let g = Grid::new(16).unwrap();
    let good = encode(Kind::Field, 16, 1.5, 0.0, Field::mode(g, 2).coeffs());
    let mut v = good.clone();
    v[4] = 9;
    assert!(matches!(
        field_from_bytes(&v),
        Err(SnapshotError::VersionMismatch { found: 9, .. })
    ));
    assert!(matches!(
        field_from_bytes(&good[..good.len() - 16]),
        Err(SnapshotError::TruncatedPayload { .. })
    ));
    assert!(matches!(
        field_from_bytes(&good[..good.len() - 3]),
        Err(SnapshotError::TruncatedPayload { .. })
    ));
    assert!(matches!(field_from_bytes(&good[..20]), Err(SnapshotError::TruncatedPayload { .. })));
}

#[test]
fn atomic_save_leaves_no_temporary() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(16).unwrap();
    let p = dir.path().join("u.pbrg");
    save_field(&p, &Field::mode(g, 3), 1.5, 0.0).unwrap();
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("u.pbrg")]);
    std::fs::write(&p, b"JUNKJUNKJUNK").unwrap();
    assert!(matches!(load_field(&p), Err(SnapshotError::BadMagic)));
}

#[test]
fn symbol_round_trip_on_disk() {
    let g = Grid::new(16).unwrap();
    let a = Symbol::random(g, 1.5, 4, false, 3);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.pbrg");
    save_symbol(&p, &a, 2.5, 0.25).unwrap();
    let (h, b) = load_symbol(&p).unwrap();
    assert_eq!((h.kind, h.n_points, h.alpha, h.t), (1, 16, 2.5, 0.25));
    assert_eq!(bits(a.coeffs()), bits(b.coeffs()));
    assert_eq!(a, b);
    assert!(matches!(load_field(&p), Err(SnapshotError::WrongKind { .. })));
}

#[test]
fn trajectory_index_reproduces_diagnostics() {
    let alpha = 1.5;
    let mut cfg = SimConfig::new(64, alpha, Equation::Full, InitialCondition::CosSin, 0.1, 0.3);
    cfg.stride = 1;
    cfg.dt = 0.1;
    let traj = run(&cfg).unwrap();
    assert_eq!(traj.states.len(), 4);
    let traj = paraburgers::solver::Trajectory {
        times: traj.times[1..].to_vec(),
        states: traj.states[1..].to_vec(),
        diagnostics: traj.diagnostics[1..].to_vec(),
        ..traj
    };
    let dir = tempfile::tempdir().unwrap();
    let index = dir.path().join("traj.pbrg");
    let written = save_trajectory(&index, &traj, alpha).unwrap();
    assert_eq!(written.len(), 4);
    let (h, times, states) = load_trajectory(&index).unwrap();
    assert_eq!(h.kind, 2);
    assert_eq!(times, traj.times);
    for (k, u) in states.iter().enumerate() {
        let d = diagnostics(u, alpha, &cfg.sobolev_indices, times[k]).unwrap();
        let e = &traj.diagnostics[k];
        for (x, y) in [
            (d.mass, e.mass),
            (d.hamiltonian, e.hamiltonian),
            (d.lipschitz, e.lipschitz),
            (d.weak_criterion, e.weak_criterion),
            (d.sup_norm, e.sup_norm),
            (d.sobolev(2.0).unwrap(), e.sobolev(2.0).unwrap()),
        ] {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "sample {k}: {x} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_round_trip_is_bitwise(
        seed in 0u64..10_000,
        real in any::<bool>(),
        t in -1e3f64..1e3,
    ) {
        let g = Grid::new(32).unwrap();
        let s = Symbol::random(g, 0.0, 15, real, seed);
        let u = s.column_field(3);
        let b = encode(Kind::Field, 32, 1.7, t, u.coeffs());
        let (h, v) = field_from_bytes(&b).unwrap();
        prop_assert_eq!(h.t.to_bits(), t.to_bits());
        prop_assert_eq!(bits(u.coeffs()), bits(v.coeffs()));
    }

    #[test]
    fn symbol_round_trip_is_bitwise(seed in 0u64..10_000, m in -2.0f64..2.0) {
        let g = Grid::new(8).unwrap();
        let a = Symbol::random(g, m, 3, false, seed);
        let mut payload = a.coeffs().to_vec();
        payload.push(Complex64::new(a.order_m, a.declared_rho));
        let (_, b) = symbol_from_bytes(&encode(Kind::Symbol, 8, 2.0, 0.0, &payload)).unwrap();
        prop_assert_eq!(a, b);
    }
}

use paraburgers::solver::{default_dt, Equation, InitialCondition};
use paraburgers_cli::config::{parse_config, parse_config_str, ConfigError};
use paraburgers_cli::output::config_hash;
use proptest::prelude::*;

const MINIMAL: &str = "\
n_points = 128
alpha = 1.5
equation = full
init = cos1
amplitude = 0.01
t_end = 1.0
";

#[test]
fn minimal_config_fills_defaults() {
    let c = parse_config_str(MINIMAL).unwrap();
    assert_eq!(c.sim.n_points, 128);
    assert_eq!(c.sim.alpha, 1.5);
    assert_eq!(c.sim.equation, Equation::Full);
    assert_eq!(c.sim.initial_condition, InitialCondition::Cos1);
    assert_eq!(c.sim.dt, default_dt(128, 1.5));
    assert_eq!((c.sim.cutoff.big_b, c.sim.cutoff.little_b), (8.0, 2.0));
    assert_eq!(c.sim.seed, 0);
    assert_eq!(c.sim.stride, 10);
    assert!(c.sim.dealias && !c.sim.adaptive);
    assert_eq!(c.s, 2.0);
    assert_eq!(c.sim.sobolev_indices, vec![2.0]);
    assert_eq!(c.epsilon, 0.05);
    assert_eq!(c.j_max, 8);
    assert_eq!(c.scan_resolutions, vec![512, 1024]);
}

#[test]
fn optional_keys_override_defaults() {
    let text = format!("{MINIMAL}B = 16\nb = 1\ndt = 0.001\nseed = 7\nrandom_band = 3\n").replace("init = cos1", "init = random");
    let c = parse_config_str(&text).unwrap();
    assert_eq!((c.sim.cutoff.big_b, c.sim.cutoff.little_b), (16.0, 1.0));
    assert_eq!(c.sim.dt, 0.001);
    assert_eq!(c.sim.seed, 7);
    assert_eq!(c.sim.initial_condition, InitialCondition::Random { band: 3 });
}

#[test]
fn alpha_outside_the_range_is_rejected() {
    let text = MINIMAL.replace("alpha = 1.5", "alpha = 0.5");
    match parse_config_str(&text) {
        Err(ConfigError::OutOfRange { key, line, .. }) => {
            assert_eq!(key, "alpha");
            assert_eq!(line, 2);
        }
        other => panic!("expected a range error, got {other:?}"),
    }
}

#[test]
fn duplicate_key_names_both_lines() {
    let text = format!("{MINIMAL}alpha = 2.0\n");
    assert_eq!(
        parse_config_str(&text),
        Err(ConfigError::DuplicateKey {
            key: "alpha".into(),
            first: 2,
            second: 7
        })
    );
    let msg = parse_config_str(&text).unwrap_err().to_string();
    assert!(msg.contains("2") && msg.contains("7"));
}

#[test]
fn unknown_key_is_an_error() {
    let text = format!("{MINIMAL}# a comment\n\nalhpa = 1.5\n");
    assert_eq!(
        parse_config_str(&text),
        Err(ConfigError::UnknownKey {
            key: "alhpa".into(),
            line: 9
        })
    );
}

#[test]
fn type_errors_name_key_and_line() {
    let text = MINIMAL.replace("n_points = 128", "n_points = many");
    match parse_config_str(&text) {
        Err(ConfigError::TypeError { key, line, found, .. }) => {
            assert_eq!((key.as_str(), line, found.as_str()), ("n_points", 1, "many"));
        }
        other => panic!("expected a type error, got {other:?}"),
    }
    let text = MINIMAL.replace("equation = full", "equation = kdv");
    assert!(matches!(parse_config_str(&text), Err(ConfigError::TypeError { line: 3, .. })));
}

#[test]
fn missing_required_key() {
    let text = MINIMAL.replace("t_end = 1.0\n", "");
    match parse_config_str(&text) {
        Err(ConfigError::MissingRequired { key, .. }) => assert_eq!(key, "t_end"),
        other => panic!("expected a missing key, got {other:?}"),
    }
}

#[test]
fn syntax_error_without_equals() {
    let text = format!("{MINIMAL}verbose\n");
    assert!(matches!(parse_config_str(&text), Err(ConfigError::Syntax { line: 7, .. })));
}

#[test]
fn lists_parse() {
    let text = format!("{MINIMAL}scan_alphas = 1.1, 1.3\nscan_resolutions = 64,128\n");
    let c = parse_config_str(&text).unwrap();
    assert_eq!(c.scan_alphas, vec![1.1, 1.3]);
    assert_eq!(c.scan_resolutions, vec![64, 128]);
}

#[test]
fn reading_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.cfg");
    std::fs::write(&p, MINIMAL).unwrap();
    assert_eq!(parse_config(&p).unwrap(), parse_config_str(MINIMAL).unwrap());
    assert!(matches!(parse_config(&dir.path().join("absent.cfg")), Err(ConfigError::Io { .. })));
}

#[test]
fn fnv1a_reference_values() {
    // Published FNV-1a 64 test vectors.
    assert_eq!(config_hash(""), 0xcbf29ce484222325);
    assert_eq!(config_hash("a"), 0xaf63dc4c8601ec8c);
    assert_eq!(config_hash("foobar"), 0x85944171f73967e8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_ignores_layout(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), pad in 0usize..4) {
        let lines: Vec<&str> = MINIMAL.lines().collect();
        let spaces = " ".repeat(pad);
        let shuffled: String = perm
            .iter()
            .map(|&i| {
                let (k, v) = lines[i].split_once('=').unwrap();
                format!("{spaces}{}{spaces}={spaces}{}  # note\n", k.trim(), v.trim())
            })
            .collect();
        let a = parse_config_str(MINIMAL).unwrap();
        let b = parse_config_str(&shuffled).unwrap();
        prop_assert_eq!(config_hash(&a.canonical), config_hash(&b.canonical));
        prop_assert_eq!(a, b);
    }
}

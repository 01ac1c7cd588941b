use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nfpe_cli::config::{parse_config, ConfigError, InitialSection};
use nfpe_cli::{Manifest, RateReport};
use nfpe_core::{Drift, Field, GridSpec, Mobility, ResolventConfig};

const HEAT: &str = r#"schema_version = 1
[profile]
beta = { kind = "linear" }
[grid]
d = 1
half_width = 4.0
n = 128
[time]
t_final = 0.1
dt = 0.01
save_times = [0.05, 0.1]
[initial]
kind = "gaussian"
variance = 0.2
"#;

const DIRAC: &str = r#"schema_version = 1
[profile]
beta = { kind = "porous_medium", m = 2.0 }
mobility = { kind = "constant", value = 0.0 }
[grid]
d = 1
half_width = 4.0
n = 256
[time]
t_final = 0.2
dt = 0.002
save_times = [0.2]
[initial]
kind = "measure"
atoms = [[0.0, 1.0]]
"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn nfpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfpe")).args(args).output().unwrap()
}

fn violations(body: &str) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    match parse_config(&write(dir.path(), "c.toml", body)) {
        Err(ConfigError::Invalid { violations, .. }) => violations,
        other => panic!("expected validation errors, got {other:?}"),
    }
}

#[test]
fn minimal_heat_config_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&write(dir.path(), "heat.toml", HEAT)).unwrap();
    assert_eq!(cfg.raw.profile.mobility, Mobility::Constant { value: 1.0 });
    assert_eq!(cfg.raw.profile.drift, Drift::Zero);
    assert_eq!(cfg.raw.resolvent, ResolventConfig::default());
    assert_eq!(cfg.raw.seed, 0);
    assert_eq!(cfg.grid, GridSpec::new(1, 4.0, 128).unwrap());
    assert_eq!(cfg.sha256.len(), 64);
    let u0 = cfg.initial_field().unwrap();
    assert!((u0.mass() - 1.0).abs() < 1e-10);
}

#[test]
fn sublinear_porous_medium_is_rejected_by_hypothesis_one() {
    let v = violations(&HEAT.replace(r#"beta = { kind = "linear" }"#, r#"beta = { kind = "porous_medium", m = 0.5 }"#));
    assert_eq!(v.len(), 1, "{v:?}");
    assert!(v[0].contains("hypothesis (i)"), "{v:?}");
}

#[test]
fn varying_mobility_with_flat_beta_is_rejected_by_hypothesis_three() {
    let body = HEAT.replace(
        r#"beta = { kind = "linear" }"#,
        "beta = { kind = \"threshold\", theta = 0.1 }\nmobility = { kind = \"lorentzian\" }",
    );
    let v = violations(&body);
    assert!(
        v.iter().any(|s| s.contains("hypothesis (iii)") && s.contains("b = const. if beta is not strictly increasing")),
        "{v:?}"
    );
}

#[test]
fn every_violation_is_reported() {
    let body = HEAT
        .replace("schema_version = 1", "schema_version = 9")
        .replace("n = 128", "n = 0")
        .replace("variance = 0.2", "variance = -1.0")
        .replace("dt = 0.01", "dt = 0.03");
    let v = violations(&body);
    assert_eq!(v.len(), 4, "{v:?}");
    for section in ["[top]", "[grid]", "[initial]", "[time]"] {
        assert!(v.iter().any(|s| s.starts_with(section)), "missing {section} in {v:?}");
    }
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let body = HEAT.replace("n = 128", "n = 128\nbogus = 1");
    match parse_config(&write(dir.path(), "c.toml", &body)) {
        Err(ConfigError::Parse { line, column, message, .. }) => {
            assert_eq!((line, column), (8, 1), "{message}");
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn missing_and_misplaced_inputs_are_reported() {
    let body = HEAT.replace(
        "kind = \"gaussian\"\nvariance = 0.2",
        "kind = \"measure\"\natoms = [[9.0, 1.0], [0.0]]\ndensity = \"nowhere.field\"\neps = 0.001",
    );
    let v = violations(&body);
    assert_eq!(v.len(), 4, "{v:?}");
    assert!(v.iter().any(|s| s.contains("outside the box")));
    assert!(v.iter().any(|s| s.contains("nowhere.field")));
    assert!(v.iter().any(|s| s.contains("mollification width")));
}

#[test]
fn field_paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    let grid = GridSpec::new(1, 4.0, 128).unwrap();
    let f = Field::from_fn(grid, |x| (1.0 - x[0].abs() / 2.0).max(0.0));
    f.write_binary(fs::File::create(dir.path().join("data/u0.field")).unwrap()).unwrap();
    let body = HEAT.replace("kind = \"gaussian\"\nvariance = 0.2", "kind = \"field\"\npath = \"data/u0.field\"");
    let cfg = parse_config(&write(dir.path(), "c.toml", &body)).unwrap();
    assert!(matches!(cfg.raw.initial, InitialSection::Field { .. }));
    assert_eq!(cfg.initial_field().unwrap(), f);

    let wrong = body.replace("n = 128", "n = 64");
    let err = parse_config(&write(dir.path(), "wrong.toml", &wrong)).unwrap_err();
    assert!(err.to_string().contains("has grid"), "{err}");
}

#[test]
fn evolve_then_rate_keeps_the_provenance_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dirac.toml", DIRAC);
    let out = dir.path().join("run");
    let o = nfpe(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = Manifest::read(&out).unwrap();
    assert_eq!(manifest.alpha, Some(2.0));
    assert!(manifest.outputs.iter().any(|e| e.file == "u_000100.field"));
    let header = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(header.starts_with("t,mass,l1,l2,linf,newton_iters\n"));

    let o = nfpe(&["rate", "--traj", out.to_str().unwrap(), "--window", "0.02,0.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rate: RateReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rate.source_config_sha256, manifest.config_sha256);
    assert_eq!(rate.theory_rate, Some(-1.0 / 3.0));
    assert!(rate.gap.unwrap() < 0.05, "{rate:?}");
    assert_eq!(rate.samples, 91);
}

#[test]
fn rate_rejects_non_evolve_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle");
    assert!(nfpe(&["oracle", "--kind", "heat", "--t", "0.1", "--out", out.to_str().unwrap()]).status.success());
    let o = nfpe(&["rate", "--traj", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected `evolve`"));
}

#[test]
fn same_config_twice_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.toml", HEAT);
    let runs: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("run{k}"))).collect();
    for out in &runs {
        assert!(nfpe(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    }
    for name in ["diagnostics.csv", "u_000005.field", "u_000010.field"] {
        assert_eq!(fs::read(runs[0].join(name)).unwrap(), fs::read(runs[1].join(name)).unwrap(), "{name}");
    }
    let (a, b) = (Manifest::read(&runs[0]).unwrap(), Manifest::read(&runs[1]).unwrap());
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.config_sha256, b.config_sha256);
}

#[test]
fn seed_flag_changes_particles_but_threads_do_not() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{}\n[particles]\nn = 2000\ndt = 0.01\nt_final = 0.1\ncompare_times = [0.1]\nsnapshots = true\n",
        HEAT.replace("kind = \"gaussian\"\nvariance = 0.2", "kind = \"measure\"\natoms = [[0.0, 1.0]]")
    );
    let cfg = write(dir.path(), "p.toml", &body);
    let run = |args: &[&str], name: &str| {
        let out = dir.path().join(name);
        let mut all = args.to_vec();
        all.extend(["particles", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        let o = nfpe(&all);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("marginals.csv")).unwrap(), fs::read(out.join("particles_000010.bin")).unwrap())
    };
    let base = run(&["--threads", "1"], "a");
    assert_eq!(base, run(&["--threads", "3"], "b"));
    let reseeded = run(&["--seed", "99"], "c");
    assert_ne!(base.1, reseeded.1);
    assert_eq!(base.1.len(), 2000 * 8);
    let csv = String::from_utf8(base.0).unwrap();
    assert!(csv.starts_with("t,l1_hist_distance,w1_distance,n_particles\n"), "{csv}");
}

#[test]
fn measure_evolution_writes_a_stability_report() {
    let dir = tempfile::tempdir().unwrap();
    let body = DIRAC.replace("atoms = [[0.0, 1.0]]", "atoms = [[0.0, 1.0]]\neps_list = [0.25, 0.125]");
    let cfg = write(dir.path(), "m.toml", &body);
    let out = dir.path().join("m");
    let o = nfpe(&["evolve", "--measure", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stability.json")).unwrap()).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 1);
    assert_eq!(report["mass"].as_f64(), Some(1.0));
}

#[test]
fn resolvent_command_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "heat.toml", &HEAT.replace("[initial]", "[resolvent]\nlambda = 0.5\n\n[initial]"));
    let out = dir.path().join("r");
    assert!(nfpe(&["resolvent", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let (a, b) = (report["mass_in"].as_f64().unwrap(), report["mass_out"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-12 * a);
    let u = Field::read_binary(fs::File::open(out.join("u.field")).unwrap()).unwrap();
    assert!(u.min() >= 0.0);
}

#[test]
fn invalid_config_exits_with_status_two_and_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write(dir.path(), "bad.toml", &HEAT.replace("n = 128", "n = 0").replace("variance = 0.2", "variance = 0.0"));
    let o = nfpe(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("[grid]") && stderr.contains("[initial]"), "{stderr}");
}

#[test]
fn verify_exit_status_reflects_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let o = nfpe(&["verify", "--suite", "appendix_algebra", "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["all_passed"], serde_json::Value::Bool(true));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[PASS]"));

    assert_eq!(nfpe(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
}

#[test]
fn verify_all_passes_on_defaults() {
    let o = nfpe(&["verify", "--suite", "all", "--n-particles", "20000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        parse_config(&path).unwrap_or_else(|e| panic!("{e}"));
        n += 1;
    }
    assert!(n >= 5);
}

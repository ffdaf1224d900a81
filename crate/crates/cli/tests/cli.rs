use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_capeuler"));
    c.env_remove("CAPEULER_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

const DROP: &str = "eps = 0.5
t_end = 0.3
n_theta = 32
n_r = 10
output_every = 2
checkpoint_every = 2

[geometry]
kind = \"circle\"

[[modes]]
k = 3
amp = 0.01
phi = 0.004
";

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("Usage"));
}

#[test]
fn simulate_writes_csv_checkpoints_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "drop.toml", DROP);
    let out = d.path().join("run");
    let o = run(&["--quiet", "--out", out.to_str().unwrap(), "simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "t,E0,E_dtJ,E_eps,E_vort,E_RT,rt_margin,max_kappa,area,monitor_curvature,monitor_velocity,monitor_rt_curvature"
    );
    assert!(!csv.contains('\r'));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(f.as_str().unwrap()).exists());
    }
    assert!(out.join("ckpt_000002.json").exists() && out.join("ckpt_final.json").exists());
}

#[test]
fn reruns_are_bitwise_identical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "drop.toml", DROP);
    let mut csv = Vec::new();
    for name in ["a", "b"] {
        let out = d.path().join(name);
        let o = run(&["--quiet", "--out", out.to_str().unwrap(), "simulate", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(0));
        csv.push(std::fs::read(out.join("timeseries.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn output_root_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "drop.toml", DROP);
    let out = d.path().join("env-out");
    let o = bin().env("CAPEULER_OUT", &out).args(["--quiet", "simulate", "--config", &cfg]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn resume_and_inspect_checkpoints() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "drop.toml", DROP);
    let out = d.path().join("run");
    let o = run(&["--quiet", "--out", out.to_str().unwrap(), "simulate", "--config", &cfg, "--binary"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let ck = out.join("ckpt_000002.json");
    assert!(out.join("ckpt_000002.bin").exists());
    let info = run(&["checkpoint-info", ck.to_str().unwrap()]);
    assert_eq!(info.status.code(), Some(0));
    assert!(text(&info).contains("format version 1") && text(&info).contains("binary payload"));
    let out2 = d.path().join("resumed");
    let o = run(&["--quiet", "--out", out2.to_str().unwrap(), "simulate", "--config", &cfg, "--resume", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rep = run(&["--quiet", "--out", out2.to_str().unwrap(), "--n-r", "10", "energy-report", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(0), "{}", text(&rep));
    assert!(out2.join("energy_report.json").exists());
}

#[test]
fn legacy_checkpoint_names_versions() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "old.json", "{\"format_version\": 0, \"t\": 0.0}");
    let o = run(&["checkpoint-info", &p]);
    assert_eq!(o.status.code(), Some(1));
    let t = text(&o);
    assert!(t.contains("version 0") && t.contains("version 1"), "{t}");
}

#[test]
fn config_errors_exit_2_with_context() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.toml", "eps = 0.5\n[geometry]\nkind = \"circle\"\nradus = 1.0\n");
    let o = run(&["--out", d.path().to_str().unwrap(), "simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let t = text(&o);
    assert!(t.contains("line 4") && t.contains("radus"), "{t}");
    let o = run(&["--out", d.path().to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ops_verify_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--out", d.path().to_str().unwrap(), "ops-verify", "--family", "ellipse-shear", "--dt", "1e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("commutator_N"));
    let o = run(&["--out", d.path().to_str().unwrap(), "--seed", "3", "ops-verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let o = run(&["--out", d.path().to_str().unwrap(), "ops-verify", "--family", "torus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn annulus_ode_and_dispersion() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = run(&["--quiet", "--out", out, "annulus-ode", "--a1", "0.5", "--t-end", "0.5", "--swirl-amp", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(d.path().join("annulus_ode.csv").exists());
    let o = run(&["--quiet", "--out", out, "--n-theta", "32", "--n-r", "10", "dispersion", "--k", "2,3"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(d.path().join("dispersion.csv").exists());
}

#[test]
fn eps_sweep_refuses_rt_violation() {
    let d = tempfile::tempdir().unwrap();
    // a drop at rest has zero margin
    let cfg = write(d.path(), "rest.toml", "eps = 0.0\nt_end = 0.1\nn_theta = 16\nn_r = 8\n[geometry]\nkind = \"circle\"\n");
    let o = run(&["--out", d.path().to_str().unwrap(), "eps-sweep", "--config", &cfg, "--eps-list", "0.2,0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("refused"));
}

#[test]
fn eps_sweep_default_scenario() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["--quiet", "--out", d.path().to_str().unwrap(), "--n-theta", "32", "--n-r", "10", "eps-sweep"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(d.path().join("eps_sweep.json").exists());
}

#[test]
fn geom_report() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "e.toml", "eps = 0.1\nn_theta = 64\n[geometry]\nkind = \"ellipse\"\na = 1.3\nb = 1.0\n");
    let o = run(&["--out", d.path().to_str().unwrap(), "--n-r", "12", "geom", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("geom.json")).unwrap()).unwrap();
    let area = g["area"].as_f64().unwrap();
    assert!((area - std::f64::consts::PI * 1.3).abs() < 1e-10, "{area}");
}

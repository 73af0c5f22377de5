use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn icdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icdd")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn cell_writes_permeability_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nside = 0.8\n[discretization]\ncell_resolution = 40\n");
    let out = tmp.path().join("out");
    let o = icdd(&["cell", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("cell.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "shape,side,porosity,k_hat,k11,k12,k21,k22,delta_hat");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "3.60000000e-1");
    let k: f64 = row[3].parse().unwrap();
    assert!((k - 7.231e-4).abs() < 0.05 * 7.231e-4, "{k}");
    let m = manifest(&out);
    assert_eq!(m["command"], "cell");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn icdd_logs_interface_and_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[problem]\nconfiguration = \"C4\"\ncell_size = 0.05\n[discretization]\nicdd_per_cell = 4\n",
    );
    let out = tmp.path().join("out");
    let o = icdd(&["icdd", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(out.join("icdd.log")).unwrap();
    assert!(log.contains("requested -1.2530"), "{log}");
    let m = manifest(&out);
    let it = m["iterations"][0].as_u64().unwrap();
    assert!((1..=10).contains(&it));
    let y_f = m["summary"]["y_f"].as_f64().unwrap();
    assert!((y_f + 1.253e-2).abs() <= 0.5 * 0.05 / 4.0 + 1e-12);
    for f in ["icdd.csv", "icdd.vtk", "residuals.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(out.join("icdd.csv")).unwrap().starts_with("x,y,u1,u2,p,provenance\n"));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nconfiguration = \"C2\"\n[discretization]\nicdd_per_cell = 2\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert!(icdd(&["icdd", "--config", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    for f in ["icdd.csv", "icdd.vtk", "residuals.csv", "icdd.log", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn dns_writes_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[problem]\nconfiguration = \"C2\"\n[discretization]\ndns_per_cell = 5\n");
    let out = tmp.path().join("out");
    let o = icdd(&["dns", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("dns.csv")).unwrap().starts_with("x,y,u1,u2,p\n"));
    assert!(fs::read_to_string(out.join("dns.vtk")).unwrap().starts_with("# vtk DataFile Version 3.0"));
}

#[test]
fn malformed_config_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    for body in [
        "[problem]\nconfiguration = \"C1\"\ncolour = \"red\"\n",
        "[problem\n",
        "[problem]\nconfiguration = \"C1\"\ncell_size = 0\n",
    ] {
        let cfg = write_config(tmp.path(), body);
        let o = icdd(&["icdd", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(!o.status.success());
        assert!(!out.exists());
    }
    let cfg = write_config(tmp.path(), "[problem]\nconfiguration = \"C1\"\ncolour = \"red\"\n[solver]\nspeed = 1\n");
    let err = String::from_utf8(icdd(&["icdd", "--config", &cfg, "--out", "x"]).stderr).unwrap();
    assert!(err.contains("problem.colour") && err.contains("solver.speed"), "{err}");
}

#[test]
fn misaligned_obstacle_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // circles cannot be resolved
    let cfg = write_config(tmp.path(), "[problem]\nconfiguration = \"C4\"\n");
    let o = icdd(&["dns", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let cfg = write_config(tmp.path(), "[problem]\nside = 0.75\n[discretization]\ndns_per_cell = 10\n");
    let o = icdd(&["dns", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not aligned"));
    assert!(!out.exists());
}

#[test]
fn sweep_and_validate_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[problem]\nconfiguration = \"C2\"\ncell_size = 0.25\ncell_sizes = [0.25, 0.125]\n\
         [discretization]\ndns_per_cell = 5\nicdd_per_cell = 5\ncell_resolution = 20\n\
         [sweep]\nfactors = [0.5, 1.0]\n",
    );
    let out = tmp.path().join("sweep");
    let o = icdd(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("factor,delta,y_f,error,iterations\n"));

    let out = tmp.path().join("validate");
    let o = icdd(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 2 * 6);
    for line in errors.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }
    let slopes = fs::read_to_string(out.join("slopes.csv")).unwrap();
    assert!(slopes.lines().nth(1).unwrap().starts_with("C2,u_fluid_star,"));
    assert_eq!(manifest(&out)["iterations"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_arguments() {
    assert!(!icdd(&["cell"]).status.success());
    assert!(!icdd(&["frobnicate"]).status.success());
}

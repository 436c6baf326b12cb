use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cqed_tomo::protocol::RunManifest;

fn cqed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed-tomo"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("CQED_TOMO_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn calibrate_then_tomogram_then_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cal = tmp.path().join("cal");
    let o = cqed(&cal, &["calibrate", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("mu = "));
    let m = RunManifest::load(&cal.join("calibrate.manifest.json")).unwrap();
    assert_eq!(m.config.sampling.seed, 3);
    assert!(m.output("calibration_cdf.csv").is_some());

    let tomo = tmp.path().join("tomo");
    let cal_arg = cal.to_str().unwrap();
    let o = cqed(&tomo, &["tomogram", "--calibration", cal_arg, "--phases", "-3pi/4,0"]);
    assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["tomogram_0_chi.csv", "tomogram_1_density.csv", "tomogram.json"] {
        assert!(tomo.join(f).exists(), "{f}");
    }
    let header = fs::read_to_string(tomo.join("tomogram_0_cdf.csv")).unwrap();
    assert!(header.starts_with("m,chi,sample_cdf,theory_cdf,ks_bound"));

    let again = tmp.path().join("again");
    let manifest = tomo.join("tomogram.manifest.json");
    let o = cqed(&again, &["rerun", manifest.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("DIFFERS"));
}

#[test]
fn tomogram_without_calibration_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cqed(tmp.path(), &["tomogram"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("calibrate"));
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("fock.toml");
    fs::write(
        &cfg,
        "[state]\nspec = \"fock:1\"\n\n[sampling]\natoms = 200\nruns = 300\n\n[calibration]\nmu = 0.36\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = cqed(&out, &["tomogram", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&out.join("tomogram.manifest.json")).unwrap();
    assert_eq!(m.config.sampling.runs, 300);
    assert_eq!(m.config.sampling.seed, 5);
    assert!(m.calibration.is_some());
}

#[test]
fn bad_input_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cqed(tmp.path(), &["first-click", "--state", "squeezed:1"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[sampling]\natom = 3\n").unwrap();
    let o = cqed(tmp.path(), &["first-click", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn first_click_and_oracle_check_pass_their_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cqed(tmp.path(), &["first-click"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(tmp.path().join("first_click.csv")).unwrap();
    assert!(csv.starts_with("beta_abs,Phi_minus_phi,p1_closed_form,p1_matrix"));
    let o = cqed(tmp.path(), &["oracle-check", "--state", "coherent:1@0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

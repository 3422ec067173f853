use std::path::Path;
use std::process::Command;

use loopgrade_classify::{train, Hyper, Kind, Samples};
use loopgrade_core::datagen::Label;
use loopgrade_core::features::FEATURE_COUNT;

fn loopgrade(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_loopgrade"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn malformed_range_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = loopgrade(&["mesh", "--range", "0.1-0.2"], dir.path());
    assert_eq!(code, 2, "{err}");
    assert!(!dir.path().join("mesh").exists());
}

#[test]
fn missing_model_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = loopgrade(&["validate", "--model", "nowhere.json"], dir.path());
    assert_eq!(code, 2, "{err}");
}

#[test]
fn validation_outside_the_mesh_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = loopgrade(&["mesh", "--range", "0.1:0.2,0.1:0.2"], dir.path());
    assert_eq!(code, 0, "{err}");

    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64; FEATURE_COUNT]).collect();
    let y = (0..20).map(|i| if i < 10 { Label::Nok } else { Label::Ok }).collect();
    let model = train(Hyper::default_for(Kind::Gnb), &Samples::new(x, y), 1).unwrap();
    std::fs::write(dir.path().join("model.json"), model.to_json()).unwrap();

    let (code, err) = loopgrade(&["validate", "--model", "model.json", "--no-plots"], dir.path());
    assert_eq!(code, 3, "{err}");
}

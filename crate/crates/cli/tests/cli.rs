use std::path::Path;
use std::process::{Command, Output};

fn decor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decor")).args(args).env_remove("DECOR_LLM_ENDPOINT").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn decorate_edit_svg_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    let out = decor(&["decorate", "--mesh", "fixture:flat_desk", "--prompt", "desk", "--assets", "4", "--seed", "3", "--out", p(&scene)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&scene).unwrap()).unwrap();
    let target = json["assets"][0]["id"].as_str().unwrap().to_string();

    let ops = dir.path().join("ops.json");
    std::fs::write(&ops, format!(r#"[{{"kind": "remove", "target": "{target}"}}]"#)).unwrap();
    let edited = dir.path().join("edited.json");
    let out = decor(&["edit", "--scene", p(&scene), "--ops", p(&ops), "--out", p(&edited)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let next: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&edited).unwrap()).unwrap();
    assert_eq!(next["revision"], 1);
    assert_eq!(next["assets"].as_array().unwrap().len(), 3);

    let out = decor(&["svg", "--scene", p(&edited), "--surface", "0"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("<svg"));

    let out = decor(&["metrics", "--scene", p(&scene), "--scene", p(&edited)]);
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["n_scenes"], 2);
    assert_eq!(m["oob_rate"], 0.0);
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = decor(&["decorate", "--mesh", "fixture:flat_desk", "--prompt", "", "--assets", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = decor(&["decorate", "--mesh", "no/such.obj", "--prompt", "desk", "--assets", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = decor(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let scene = dir.path().join("scene.json");
    let out = decor(&["decorate", "--mesh", "fixture:flat_desk", "--prompt", "desk", "--assets", "3", "--out", p(&scene)]);
    assert!(out.status.success());
    let before = std::fs::read_to_string(&scene).unwrap();
    let json: serde_json::Value = serde_json::from_str(&before).unwrap();
    let target = json["assets"][0]["id"].as_str().unwrap();
    let ops = dir.path().join("ops.json");
    std::fs::write(&ops, format!(r#"[{{"kind": "resize", "target": "{target}", "width_cm": 130, "depth_cm": 70, "height_cm": 5}}]"#)).unwrap();
    let out = decor(&["edit", "--scene", p(&scene), "--ops", p(&ops)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&scene).unwrap(), before);

    let out = decor(&["svg", "--scene", p(&scene), "--surface", "9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_backend_exits_four() {
    let out = decor(&[
        "decorate", "--mesh", "fixture:flat_desk", "--prompt", "desk", "--assets", "3", "--endpoint", "http://127.0.0.1:9/v1",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

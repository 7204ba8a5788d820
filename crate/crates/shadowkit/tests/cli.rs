use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowkit"))
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(bin().arg("no-such-command").status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["sta"]).status().unwrap().code(), Some(1));
    let missing = bin().args(["sta", "/nonexistent/mask.png"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/mask.png"));
    assert!(bin().arg("fixture").arg(dir.path()).status().unwrap().success());
    let out = bin()
        .args(["shadow", "nope", "--manifest"])
        .arg(dir.path().join("manifest.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn commands_run_on_fixture() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert!(bin().arg("fixture").arg(d).status().unwrap().success());
    let manifest = d.join("manifest.json");
    let out = d.join("out");

    let sk = bin()
        .args(["skeleton"])
        .arg(d.join("annotations/scene_bos.json"))
        .arg("--out")
        .arg(d.join("skel.png"))
        .status()
        .unwrap();
    assert!(sk.success());

    let sta = bin().args(["sta", "--json"]).arg(d.join("scene_bos/bg_both.png")).output().unwrap();
    assert!(sta.status.success());
    let v: serde_json::Value = serde_json::from_slice(&sta.stdout).unwrap();
    assert!(v["triangle"]["A"].is_array() && v["k"].is_number());

    let light = bin()
        .arg("light")
        .arg(d.join("scene_bos/bg_both.png"))
        .arg(d.join("scene_bos/bg_obj.png"))
        .output()
        .unwrap();
    assert!(light.status.success());
    let l: serde_json::Value = serde_json::from_slice(&light.stdout).unwrap();
    assert!((l["theta"].as_f64().unwrap() - 0.6).abs() < 3f64.to_radians());

    for id in ["scene_bos", "scene_free"] {
        let s = bin().args(["shadow", id, "--manifest"]).arg(&manifest).arg("--out").arg(&out).output().unwrap();
        assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    }
    let explicit = bin()
        .args(["shadow", "scene_free", "--theta", "0.7", "--azimuth=-1,0", "--alpha", "0.3", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(d.join("explicit"))
        .output()
        .unwrap();
    let r: serde_json::Value = serde_json::from_slice(&explicit.stdout).unwrap();
    assert_eq!(r["light_source"], "override");
    assert_eq!(r["light"]["azimuth"][0], -1.0);

    let csv = d.join("m.csv");
    let json = d.join("m.json");
    let ev = bin()
        .arg("eval")
        .arg(&out)
        .arg("--manifest")
        .arg(&manifest)
        .arg("--csv")
        .arg(&csv)
        .arg("--json")
        .arg(&json)
        .status()
        .unwrap();
    assert!(ev.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("tuple_id,grmse,lrmse,gssim,lssim,gber,lber,psnr\n"));
    assert_eq!(text.lines().count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary["summary"]["bos_free"]["count"], 1);

    let corr = d.join("corr.json");
    std::fs::write(
        &corr,
        r#"[{"limb_name":"Head","p1":[0,0],"p2":[0,100],"p3":[100,100]},
            {"limb_name":"L-Elbow","p1":[0,0],"p2":[0,103],"p3":[100,103]}]"#,
    )
    .unwrap();
    let vk = bin().arg("validate-k").arg(&corr).args(["--decimals", "2"]).output().unwrap();
    assert!(vk.status.success());
    let k: serde_json::Value = serde_json::from_slice(&vk.stdout).unwrap();
    assert_eq!(k["deviation"]["L-Elbow"], 0.03);
}

#[test]
fn bad_config_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "k_min = 12\n").unwrap();
    let out = bin().arg("--config").arg(&cfg).arg("fixture").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k_min"));
}

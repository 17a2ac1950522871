use std::path::Path;
use std::process::{Command, Output};

fn widthlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_widthlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("WIDTHLAB_OUT")
        .output()
        .expect("spawn widthlab")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn decompose_then_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write(tmp.path(), "strip.json", r#"{"kind":"strip","length":200,"rows":2,"mesh_h":1e-6}"#);
    let out = tmp.path().join("dec");
    let res = widthlab(&["decompose", "--input", &input, "--R", "40", "--n", "2", "--scale-s", "1.5"], &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let run = json(&out.join("run.json"));
    assert_eq!(run["summary"]["status"], "pass");
    assert!(out.join("certificate.json").exists() && out.join("complex.dot").exists());

    let cert = out.join("certificate.json").display().to_string();
    let ver = tmp.path().join("ver");
    let res = widthlab(&["verify", "--input", &input, "--certificate", &cert], &ver);
    assert_eq!(res.status.code(), Some(0));

    // Merge two distant fibers into one.
    let mut c = json(&out.join("certificate.json"));
    let last = c["assignment"].as_array().unwrap().last().unwrap().clone();
    c["assignment"][0] = last;
    let bad = write(tmp.path(), "bad.json", &c.to_string());
    let res = widthlab(&["verify", "--input", &input, "--certificate", &bad], &tmp.path().join("bad"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn hypothesis_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write(tmp.path(), "coarse.json", r#"{"kind":"strip","length":300,"rows":2,"mesh_h":1.0}"#);
    let out = tmp.path().join("dec");
    let res = widthlab(&["decompose", "--input", &input, "--R", "100", "--n", "2", "--scale-s", "1.5"], &out);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(json(&out.join("run.json"))["summary"]["status"], "hypothesis_failed");
    assert!(!out.join("certificate.json").exists());

    // Below 100 * mesh_h the radius is an invalid parameter, not a failed hypothesis.
    let res = widthlab(&["decompose", "--input", &input, "--R", "40", "--n", "2", "--scale-s", "1.5"], &tmp.path().join("small"));
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn malformed_input_exits_1_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write(tmp.path(), "m.csv", "0,1\n1,zero\n");
    let res = widthlab(&["content", "--input", &input, "--n", "1", "--mesh-h", "0.1"], &tmp.path().join("c"));
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("row 1, column 1"), "{err}");

    let asym = write(tmp.path(), "a.csv", "0,1\n2,0\n");
    let res = widthlab(&["content", "--input", &asym, "--n", "1", "--mesh-h", "0.1"], &tmp.path().join("a"));
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn config_file_supplies_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write(tmp.path(), "m.csv", "0,1,2\n1,0,1\n2,1,0\n");
    let config = write(tmp.path(), "run.toml", &format!("input = {input:?}\nn = 1\nmesh_h = 0.1\nmode = \"exact\"\n"));
    let out = tmp.path().join("c");
    let res = widthlab(&["content", "--config", &config], &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let c = json(&out.join("content.json"));
    // Three singleton balls floored at mesh_h.
    assert!((c["value"].as_f64().unwrap() - 0.3).abs() < 1e-12);

    let bad = write(tmp.path(), "bad.toml", "radius_of_doom = 1\n");
    let res = widthlab(&["content", "--config", &bad], &tmp.path().join("b"));
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("radius_of_doom"));
}

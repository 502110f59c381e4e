use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use motionsep::{displacement_field, read_flow, write_flow, GlobalMotionModel};

fn motionsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motionsep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_field(path: &Path, model: &GlobalMotionModel, w: usize, h: usize) {
    let f = displacement_field(model, w, h).unwrap();
    write_flow(&f, fs::File::create(path).unwrap()).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = motionsep(&["separate", "--frobnicate", "x.flo"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn bad_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.flo");
    fs::write(&bad, b"not a flow file").unwrap();
    for cmd in ["fit", "visualize"] {
        let o = motionsep(&[cmd, s(&bad)]);
        assert_eq!(o.status.code(), Some(1));
        let err = stderr(&o);
        assert!(err.contains("broken.flo"), "{err}");
        assert!(!err.contains("panicked"), "{err}");
    }
    let o = motionsep(&["eval", "--manifest", "/nonexistent/m.jsonl", "--model", "/nonexistent/model"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn camera_only_flow_has_empty_local_part() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("zoom.flo");
    let model = motionsep::camera::compose(
        &GlobalMotionModel::translation(-3.0, 0.5),
        &GlobalMotionModel::zoom_about(1.04, 30.0, 20.0).unwrap(),
    );
    write_field(&input, &model, 64, 48);
    let out = dir.path().join("out");
    let o = motionsep(&["separate", s(&input), "--out-dir", s(&out), "--viz"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let local = read_flow(fs::File::open(out.join("zoom.local.flo")).unwrap()).unwrap();
    assert!(local.is_zero());
    let global = read_flow(fs::File::open(out.join("zoom.global.flo")).unwrap()).unwrap();
    assert!(global.max_abs_diff(&displacement_field(&model, 64, 48).unwrap()) < 1e-4);
    for tag in ["mixed", "global", "local"] {
        let ppm = fs::read(out.join(format!("zoom.{tag}.ppm"))).unwrap();
        assert!(ppm.starts_with(b"P6\n64 48\n255\n"));
    }
}

#[test]
fn visualize_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pan.flo");
    write_field(&input, &GlobalMotionModel::translation(-2.0, 0.0), 20, 10);
    let o = motionsep(&["visualize", s(&input), "--max-mag", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ppm = fs::read(dir.path().join("pan.ppm")).unwrap();
    assert_eq!(ppm.len(), "P6\n20 10\n255\n".len() + 20 * 10 * 3);

    let o = motionsep(&["fit", s(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with('['), "{text}");
    assert!(text.contains("pan-right"), "{text}");
}

#[test]
fn synth_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = motionsep(&[
            "synth", "--per-class", "2", "--seed", "9", "--out-dir", s(&out), "--width", "24",
            "--height", "20", "--frames", "6", "--ground-truth",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let manifest = fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 12);
    assert_eq!(manifest, fs::read_to_string(b.join("manifest.jsonl")).unwrap());
    for f in ["mixed-00.flo", "global-05.flo", "local-03.flo"] {
        let p = Path::new("clip-00007").join(f);
        assert_eq!(fs::read(a.join(&p)).unwrap(), fs::read(b.join(&p)).unwrap());
    }
}

#[test]
fn end_to_end_event_recognition() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |name: &str, per_class: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = motionsep(&["synth", "--per-class", per_class, "--seed", seed, "--out-dir", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out.join("manifest.jsonl")
    };
    let train = synth("train", "40", "1");
    let test = synth("test", "10", "2");
    let model = dir.path().join("model.txt");
    let o = motionsep(&["train", "--manifest", s(&train), "--stream", "two", "--seed", "3", "--out", s(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(&model).unwrap();
    let o = motionsep(&["train", "--manifest", s(&train), "--stream", "two", "--seed", "3", "--out", s(&model)]);
    assert!(o.status.success());
    assert_eq!(fs::read(&model).unwrap(), first, "training must be deterministic");

    let o = motionsep(&["eval", "--manifest", s(&test), "--model", s(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("true\\pred,3-point"), "{text}");
    let value = |text: &str, key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or_else(|| panic!("no {key} in {text}"))
    };
    assert!(value(&text, "accuracy") >= 0.8, "{text}");

    let o = motionsep(&["events", "--manifest", s(&test), "--model", s(&model), "--sf-threshold", "0.7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(value(&text, "accuracy") >= 0.9, "{text}");
    assert!(text.contains("steal"), "{text}");

    let o = motionsep(&["sweep", "--manifest", s(&test)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 11);
    assert!(text.contains("0.70,1.000000,1.000000,1.000000"), "{text}");
}

#[test]
fn single_stream_models_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = motionsep(&["synth", "--per-class", "3", "--seed", "4", "--out-dir", s(&out), "--width", "32", "--height", "32", "--frames", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = out.join("manifest.jsonl");
    for stream in ["global", "local", "mixed"] {
        let model = dir.path().join(format!("{stream}.model"));
        let o = motionsep(&["train", "--manifest", s(&manifest), "--stream", stream, "--epochs", "5", "--out", s(&model)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let o = motionsep(&["eval", "--manifest", s(&manifest), "--model", s(&model)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("map "));
    }
}

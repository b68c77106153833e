use std::fs;
use std::path::Path;
use std::process::{Command, Output};

/// Runs the binary with whitespace-separated arguments.
fn run(args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boostforest"))
        .args(args.split_whitespace())
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(out: &Output) {
    assert_eq!(code(out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_classification(path: &Path) {
    let mut s = String::from("width,colour,height,kind\n");
    for i in 0..80 {
        let w = (i % 10) as f64 / 10.0;
        let h = (i / 10) as f64 / 8.0;
        let colour = ["red", "green", "blue"][i % 3];
        let kind = if w + h > 0.9 { "tall" } else { "short" };
        s.push_str(&format!("{w},{colour},{h},{kind}\n"));
    }
    fs::write(path, s).unwrap();
}

fn write_regression(path: &Path) {
    let mut s = String::from("a,b,y\n");
    for i in 0..60 {
        let a = i as f64 / 60.0;
        let b = ((i * 7) % 13) as f64;
        s.push_str(&format!("{a},{b},{}\n", 100.0 + 30.0 * a - b));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn train_then_predict_classification() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.csv");
    let m = dir.path().join("m.bf");
    let p = dir.path().join("p.csv");
    write_classification(&d);
    let (d, m, p) = (d.display(), m.display(), p.display());

    let out = run(&format!(
        "train --data {d} --task binary --categorical-cols colour --n-estimators 5 --seed 3 --out {m}"
    ));
    ok(&out);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["n_trees"], 5);
    assert_eq!(summary["seed"], 3);
    assert!(summary["train_metric"].as_f64().unwrap() > 0.9);

    ok(&run(&format!("predict --model {m} --data {d} --out {p}")));
    let text = fs::read_to_string(p.to_string()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,class,p_0,p_1");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 80);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert!(cells[1] == "short" || cells[1] == "tall");
        let total: f64 = cells[2].parse::<f64>().unwrap() + cells[3].parse::<f64>().unwrap();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn regression_predictions_are_in_label_units_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("r.csv");
    write_regression(&data);
    let d = data.display();
    let mut models = Vec::new();
    for name in ["a.bf", "b.bf"] {
        let m = dir.path().join(name);
        ok(&run(&format!(
            "train --data {d} --task reg --n-estimators 4 --seed 11 --out {}",
            m.display()
        )));
        models.push(fs::read(&m).unwrap());
    }
    assert_eq!(models[0], models[1]);

    let p = dir.path().join("p.csv");
    let a = dir.path().join("a.bf");
    ok(&run(&format!(
        "predict --model {} --data {d} --out {}",
        a.display(),
        p.display()
    )));
    let text = fs::read_to_string(&p).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 60);
    let mean = values.iter().sum::<f64>() / 60.0;
    assert!(mean > 80.0 && mean < 120.0, "mean prediction {mean}");
}

#[test]
fn cv_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("r.csv");
    write_regression(&data);
    let d = data.display();
    let cv = dir.path().join("cv");
    ok(&run(&format!(
        "cv --data {d} --task reg --base boosttree-ridge,cart --n-estimators 3 --seed 1 --out {}",
        cv.display()
    )));
    let folds = fs::read_to_string(cv.join("folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 1 + 2 * 5 * 2);
    let agg = fs::read_to_string(cv.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);

    let curve = dir.path().join("curve.csv");
    ok(&run(&format!(
        "sweep --data {d} --task reg --knob n_estimators --values 1,2,4 --seed 1 --repeats 1 --out {}",
        curve.display()
    )));
    let text = fs::read_to_string(&curve).unwrap();
    assert_eq!(text.lines().next().unwrap(), "value,mean,std");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("r.csv");
    write_regression(&data);
    let d = data.display();
    let model = dir.path().join("m.bf");
    let m = model.display();

    // Configuration errors.
    assert_eq!(code(&run(&format!("train --data {d} --task reg --out {m}"))), 2);
    let out = run(&format!(
        "train --data {d} --task reg --n-estimators 0 --seed 1 --out {m}"
    ));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--n-estimators"));
    assert_eq!(code(&run("frobnicate")), 2);

    // Data errors.
    let train_on = |path: &Path| {
        code(&run(&format!(
            "train --data {} --task reg --seed 1 --out {m}",
            path.display()
        )))
    };
    assert_eq!(train_on(&dir.path().join("nope.csv")), 3);
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "a,b,y\n1,2,3\n4,5\n").unwrap();
    assert_eq!(train_on(&ragged), 3);
    let text = dir.path().join("text.csv");
    fs::write(&text, "a,b,y\n1,2,3\n4,x,6\n7,8,9\n").unwrap();
    assert_eq!(train_on(&text), 3);

    // Model integrity errors.
    ok(&run(&format!(
        "train --data {d} --task reg --n-estimators 2 --seed 1 --out {m}"
    )));
    let mut bytes = fs::read(&model).unwrap();
    let at = bytes.len() - 10;
    bytes[at] ^= 0x02;
    let bad = dir.path().join("bad.bf");
    fs::write(&bad, &bytes).unwrap();
    let p = dir.path().join("p.csv");
    let predict = |model: &Path| {
        code(&run(&format!(
            "predict --model {} --data {d} --out {}",
            model.display(),
            p.display()
        )))
    };
    assert_eq!(predict(&bad), 4);
    fs::write(&bad, "hello world\n").unwrap();
    assert_eq!(predict(&bad), 4);
    assert_eq!(predict(&model), 0);
}

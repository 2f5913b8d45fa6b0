use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn awsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awsim"))
        .args(args)
        .env_remove("AWD_THREADS")
        .output()
        .expect("failed to launch awsim")
}

fn repo_config(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    fs::read_to_string(path).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn npy_payload(bytes: &[u8]) -> (String, Vec<f64>) {
    let len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let header = String::from_utf8(bytes[10..10 + len].to_vec()).unwrap();
    let data = bytes[10 + len..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    (header, data)
}

const DATASET: &str = r#"
[dataset]
epicenter_margin = 50.0

[dataset.ranges]
amplitude = [0.5, 1.5]

[[dataset.splits]]
name = "train"
count = 6
master_seed = 10

[[dataset.splits]]
name = "test"
count = 3
master_seed = 11
"#;

fn small_dataset_config() -> String {
    repo_config("minimal.toml")
        .replace("duration = 0.2", "duration = 0.1")
        .replace("snapshot_every = 20\n", "")
        + DATASET
}

#[test]
fn help_documents_every_flag() {
    let cases: &[(&[&str], &[&str])] = &[
        (&["--help"], &["simulate", "dataset", "render", "eval"]),
        (&["simulate", "--help"], &["--config", "--out"]),
        (&["dataset", "--help"], &["generate"]),
        (&["dataset", "generate", "--help"], &["--config", "--out", "--workers"]),
        (&["render", "--help"], &["<SNAPSHOT>", "--format", "--out", "--frame"]),
        (
            &["eval", "--help"],
            &["--train", "--test", "--model", "--input-mode", "--k", "--lambda", "--config", "--out"],
        ),
    ];
    for (args, flags) in cases {
        let o = awsim(args);
        assert_eq!(code(&o), 0, "{args:?}");
        let text = String::from_utf8_lossy(&o.stdout);
        for flag in *flags {
            assert!(text.contains(flag), "{args:?} help lacks {flag}");
        }
    }
}

#[test]
fn simulate_minimal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &repo_config("minimal.toml"));
    let out = dir.path().join("out");
    let o = awsim(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, data) = npy_payload(&fs::read(out.join("seismograms.npy")).unwrap());
    assert!(header.contains("'shape': (1, 101)"), "{header}");
    assert!(data.iter().any(|v| *v != 0.0));
    let (header, _) = npy_payload(&fs::read(out.join("snapshots.npy")).unwrap());
    assert!(header.contains("'shape': (6, 101, 101)"), "{header}");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 100);
    assert_eq!(summary["dt"], 0.002);
    assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);

    // same inputs, same arrays
    let first = fs::read(out.join("seismograms.npy")).unwrap();
    let o = awsim(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("seismograms.npy")).unwrap(), first);
}

#[test]
fn mirrored_ten_seconds_gives_1001_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &repo_config("mirrored.toml"));
    let out = dir.path().join("out");
    let o = awsim(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, data) = npy_payload(&fs::read(out.join("seismograms.npy")).unwrap());
    assert!(header.contains("'shape': (2, 1001)"), "{header}");
    let (west, east) = data.split_at(1001);
    // the layered medium is tilted and folded, so the traces are not mirror images
    assert!(west.iter().any(|v| *v != 0.0) && east.iter().any(|v| *v != 0.0));
    assert!(data.iter().all(|v| v.is_finite()));
}

#[test]
fn dt_above_cfl_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = repo_config("minimal.toml").replace("duration = 0.2", "duration = 0.2\ndt = 0.01");
    let cfg = write(dir.path(), "run.toml", &text);
    let o = awsim(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("sim.dt") && err.contains("CFL"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unchecked_unstable_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = repo_config("minimal.toml").replace(
        "duration = 0.2",
        "duration = 2.0\ndt = 0.002\nenforce_cfl = false",
    );
    let text = text.replace("speed = 1500.0", "speed = 4000.0");
    let cfg = write(dir.path(), "run.toml", &text);
    let o = awsim(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("instability"));
}

#[test]
fn unknown_key_reports_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = repo_config("minimal.toml").replace("amplitude = 1.0", "amplitude = 1.0\nphase = 0.5");
    let cfg = write(dir.path(), "run.toml", &text);
    let o = awsim(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("phase") && err.contains("line"), "{err}");

    let missing = awsim(&["simulate", "--config", s(&dir.path().join("nope.toml")), "--out", "x"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &repo_config("minimal.toml"));
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_awsim"))
            .args(["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("out"))])
            .env("AWD_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("0")), 2);
    assert_eq!(code(&run("four")), 2);
    assert_eq!(code(&run("2")), 0);
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn dataset_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ds.toml", &small_dataset_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, workers) in [(&a, "1"), (&b, "8")] {
        let o = awsim(&["dataset", "generate", "--config", s(&cfg), "--out", s(out), "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 2 + 6 + 3);
    assert_eq!(ta, tb);
    assert!(a.join("train/manifest.json").exists() && a.join("test/seismograms/000002.npy").exists());
}

#[test]
fn dataset_invalid_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_dataset_config().replace("amplitude = [0.5, 1.5]", "amplitude = [1.5, 0.5]");
    let cfg = write(dir.path(), "ds.toml", &text);
    let o = awsim(&["dataset", "generate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dataset.ranges.amplitude"), "{}", stderr(&o));

    let no_table = write(dir.path(), "plain.toml", &repo_config("minimal.toml"));
    let o = awsim(&["dataset", "generate", "--config", s(&no_table), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
}

fn npy_bytes(shape: &str, data: &[f64]) -> Vec<u8> {
    let mut header = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {shape}, }}");
    while (10 + header.len() + 1) % 64 != 0 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = b"\x93NUMPY\x01\x00".to_vec();
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_pgm(bytes: &[u8]) -> (usize, usize, Vec<u8>) {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(String::from_utf8(bytes[start..pos].to_vec()).unwrap());
    }
    assert_eq!(fields[0], "P5");
    assert_eq!(fields[3], "255");
    let (w, h) = (fields[1].parse().unwrap(), fields[2].parse().unwrap());
    let pixels = bytes[pos + 1..].to_vec();
    assert_eq!(pixels.len(), w * h);
    (w, h, pixels)
}

#[test]
fn render_constant_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("c.npy");
    fs::write(&snap, npy_bytes("(4, 5)", &[3.25; 20])).unwrap();
    let pgm = dir.path().join("c.pgm");
    let o = awsim(&["render", s(&snap), "--format", "pgm", "--out", s(&pgm)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (w, h, px) = read_pgm(&fs::read(&pgm).unwrap());
    assert_eq!((w, h), (5, 4));
    assert!(px.iter().all(|&p| p == px[0]));

    let values: Vec<f64> = (0..12).map(|k| (k as f64 * 0.37).sin() / 3.0 + 1e-17 * k as f64).collect();
    let snap = dir.path().join("v.npy");
    fs::write(&snap, npy_bytes("(2, 3, 2)", &values)).unwrap();
    let csv = dir.path().join("v.csv");
    let o = awsim(&["render", s(&snap), "--format", "csv", "--out", s(&csv), "--frame", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    let back: Vec<f64> = text
        .lines()
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect();
    assert_eq!(back, values[..6]);
}

#[test]
fn render_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.npy", "not an array");
    let o = awsim(&["render", s(&bad), "--format", "pgm", "--out", s(&dir.path().join("x.pgm"))]);
    assert_eq!(code(&o), 2);
    let snap = dir.path().join("v.npy");
    fs::write(&snap, npy_bytes("(2, 3, 2)", &[0.0; 12])).unwrap();
    let o = awsim(&["render", s(&snap), "--format", "pgm", "--out", s(&dir.path().join("x.pgm")), "--frame", "9"]);
    assert_eq!(code(&o), 2);
    let o = awsim(&["render", s(&snap), "--format", "png", "--out", s(&dir.path().join("x.png"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn rendered_wavefield_is_centered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &repo_config("minimal.toml"));
    let out = dir.path().join("out");
    assert_eq!(code(&awsim(&["simulate", "--config", s(&cfg), "--out", s(&out)])), 0);
    let pgm = dir.path().join("f.pgm");
    // frame 3 is t = 0.12 s, the wave has travelled ~40 cells
    let o = awsim(&["render", s(&out.join("snapshots.npy")), "--format", "pgm", "--out", s(&pgm), "--frame", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (w, h, px) = read_pgm(&fs::read(&pgm).unwrap());
    let mut sorted = px.clone();
    sorted.sort_unstable();
    let cut = sorted[(0.99 * px.len() as f64) as usize];
    let (mut n, mut sr, mut sc) = (0.0, 0.0, 0.0);
    for (k, &p) in px.iter().enumerate() {
        if p >= cut {
            n += 1.0;
            sr += (k / w) as f64;
            sc += (k % w) as f64;
        }
    }
    let (cr, cc) = (sr / n, sc / n);
    let (mr, mc) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    assert!(((cr - mr).powi(2) + (cc - mc).powi(2)).sqrt() <= 2.0, "centroid ({cr}, {cc})");
}

#[test]
fn eval_models_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ds.toml", &small_dataset_config());
    let data = dir.path().join("data");
    assert_eq!(code(&awsim(&["dataset", "generate", "--config", s(&cfg), "--out", s(&data)])), 0);
    let train = data.join("train/manifest.json");
    let test = data.join("test/manifest.json");
    for model in ["baseline", "ridge", "knn"] {
        for mode in ["raw", "features"] {
            let report = dir.path().join(format!("{model}-{mode}.json"));
            let o = awsim(&[
                "eval", "--train", s(&train), "--test", s(&test), "--model", model, "--input-mode", mode, "--k", "2",
                "--out", s(&report),
            ]);
            assert_eq!(code(&o), 0, "{model} {mode}: {}", stderr(&o));
            let stdout = String::from_utf8_lossy(&o.stdout);
            let mse: f64 = stdout.trim().strip_prefix("total_mse = ").unwrap().parse().unwrap();
            assert!(mse.is_finite());
            let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
            assert_eq!(json["model"]["kind"], model);
            assert_eq!(json["test_records"], 3);
            let csv = fs::read_to_string(report.with_extension("csv")).unwrap();
            assert_eq!(csv.lines().count(), 4);
        }
    }
    let o = awsim(&["eval", "--train", s(&train), "--test", s(&test), "--model", "forest", "--out", "r.json"]);
    assert_eq!(code(&o), 2);
    let o = awsim(&[
        "eval", "--train", s(&dir.path().join("missing.json")), "--test", s(&test), "--model", "baseline", "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert_ne!(code(&o), 0);
}

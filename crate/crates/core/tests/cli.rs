mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{CUBE_MODEL, DESK_CONFIG};

fn edgetrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgetrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_track_eval_bench() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let out = dir.path().join("out");
    ok(&edgetrack(&[
        "synth",
        "--model",
        CUBE_MODEL,
        "--config",
        DESK_CONFIG,
        "--frames",
        "6",
        "--out",
        s(&seq),
        "--seed",
        "3",
        "--noise",
        "1.5",
    ]));
    let truth = seq.join("ground_truth.csv");
    let text = std::fs::read_to_string(&truth).unwrap();
    assert!(text.starts_with("# seed=3\n# noise=1.5\n"));

    let stdout = ok(&edgetrack(&[
        "track",
        "--model",
        CUBE_MODEL,
        "--config",
        DESK_CONFIG,
        "--sequence",
        s(&seq),
        "--init",
        s(&truth),
        "--backend",
        "q40_23",
        "--out",
        s(&out),
        "--dump-buffers",
    ]));
    assert!(stdout.contains("6 tracked"), "{stdout}");
    assert!(out.join("buffers/frame_000005_id.ppm").is_file());

    let report = dir.path().join("report.csv");
    let stdout = ok(&edgetrack(&[
        "eval",
        "--poses",
        s(&out.join("poses.csv")),
        "--truth",
        s(&truth),
        "--report",
        s(&report),
    ]));
    assert!(stdout.contains("mean distance"));
    assert_eq!(std::fs::read_to_string(&report).unwrap().lines().count(), 7);

    let stdout = ok(&edgetrack(&[
        "bench",
        "--model",
        CUBE_MODEL,
        "--sequence",
        s(&seq),
        "--backend",
        "float",
    ]));
    for stage in [
        "visible edges detection",
        "image gray scaling",
        "ME",
        "pose calculation",
        "overhead",
    ] {
        assert!(stdout.contains(stage), "{stdout}");
    }
}

#[test]
fn init_from_numbers_and_zero_frames() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&edgetrack(&[
        "synth",
        "--model",
        CUBE_MODEL,
        "--config",
        DESK_CONFIG,
        "--frames",
        "0",
        "--out",
        s(&seq),
    ]));
    let out = dir.path().join("out");
    ok(&edgetrack(&[
        "track",
        "--model",
        CUBE_MODEL,
        "--config",
        DESK_CONFIG,
        "--sequence",
        s(&seq),
        "--init",
        "0,0,0,0,0,150",
        "--backend",
        "float",
        "--out",
        s(&out),
    ]));
    assert_eq!(
        std::fs::read_to_string(out.join("stats.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_backend = edgetrack(&[
        "track",
        "--model",
        CUBE_MODEL,
        "--config",
        DESK_CONFIG,
        "--sequence",
        "x",
        "--init",
        "0,0,0,0,0,1",
        "--backend",
        "q8_8",
        "--out",
        "y",
    ]);
    assert!(!bad_backend.status.success());

    let missing_model = edgetrack(&[
        "synth",
        "--model",
        "/nonexistent.model",
        "--config",
        DESK_CONFIG,
        "--frames",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert!(!missing_model.status.success());
    assert!(String::from_utf8_lossy(&missing_model.stderr).starts_with("error:"));

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "frame,wx,wy,wz,tx,ty,tz\n0,0,0,0,0,0,150\n").unwrap();
    std::fs::write(
        &b,
        "frame,wx,wy,wz,tx,ty,tz\n0,0,0,0,0,0,150\n1,0,0,0,0,0,150\n",
    )
    .unwrap();
    let mismatch = edgetrack(&["eval", "--poses", s(&a), "--truth", s(&b)]);
    assert!(!mismatch.status.success());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use abductor_cli::{cmd_corrupt, cmd_interpret, CorruptConfig, RunConfig};
use abductor_core::synth::{self, SynthConfig};
use abductor_core::AnnotationList;
use proptest::prelude::*;

fn abductor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abductor"))
        .args(args)
        .env_remove("ABDUCTOR_K")
        .output()
        .expect("binary runs")
}

fn write_ann(path: &Path, times: &[i64]) {
    AnnotationList::from_times(times.iter().copied()).write(path).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(abductor(&["--help"]).status.code(), Some(0));
    assert_eq!(abductor(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(abductor(&[]).status.code(), Some(1));
    assert_eq!(abductor(&["interpret"]).status.code(), Some(1));
    assert_eq!(abductor(&["interpret", "--ann", "a", "--out", "b", "--k", "x"]).status.code(), Some(1));
}

#[test]
fn bad_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("a.csv");
    write_ann(&ann, &[0, 800]);
    let out = dir.path().join("o.csv");
    let r = abductor(&["interpret", "--ann", s(&ann), "--out", s(&out), "--fragment-ms", "1000", "--overlap-ms", "2000"]);
    assert_eq!(r.status.code(), Some(1));
    let r = abductor(&["corrupt", "--ann", s(&ann), "--out", s(&out), "--fp", "1.5"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let r = abductor(&["interpret", "--ann", "/nonexistent/a.csv", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));
}

#[test]
fn malformed_annotations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("a.csv");
    fs::write(&ann, "time_ms,label\nabc,N\n").unwrap();
    let r = abductor(&["interpret", "--ann", s(&ann), "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn empty_annotations_give_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("a.csv");
    write_ann(&ann, &[]);
    let out = dir.path().join("o.csv");
    let r = abductor(&["interpret", "--ann", s(&ann), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(AnnotationList::read(&out).unwrap().is_empty());
}

#[test]
fn interpret_with_signal_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let beats = synth::regular_beats(400, 800, 10_000);
    let sig = dir.path().join("s.csv");
    synth::ecg(&beats, 10_000, &SynthConfig::default())
        .write_csv(&mut fs::File::create(&sig).unwrap())
        .unwrap();
    let mut noisy = beats.clone();
    noisy.remove(4);
    noisy.push(2950);
    let ann = dir.path().join("a.csv");
    write_ann(&ann, &noisy);
    let out = dir.path().join("o.csv");
    let r = abductor(&["interpret", "--signal", s(&sig), "--ann", s(&ann), "--out", s(&out), "--jobs", "2"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(AnnotationList::read(&out).unwrap().times(), beats);
}

#[test]
fn environment_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("a.csv");
    write_ann(&ann, &[0, 800, 1600]);
    let out = dir.path().join("o.csv");
    let r = Command::new(env!("CARGO_BIN_EXE_abductor"))
        .args(["interpret", "--out", s(&out)])
        .env("ABDUCTOR_ANN", &ann)
        .env("ABDUCTOR_K", "0")
        .output()
        .unwrap();
    // K = 0 from the environment is rejected.
    assert_eq!(r.status.code(), Some(1));
    let r = Command::new(env!("CARGO_BIN_EXE_abductor"))
        .args(["interpret", "--out", s(&out), "--k", "2"])
        .env("ABDUCTOR_ANN", &ann)
        .env("ABDUCTOR_K", "0")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(AnnotationList::read(&out).unwrap().times(), vec![0, 800, 1600]);
}

#[test]
fn corrupt_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("a.csv");
    write_ann(&ann, &synth::regular_beats(400, 800, 60_000));
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let r = abductor(&["corrupt", "--ann", s(&ann), "--out", s(&out), "--fp", "0.1", "--fn", "0.1", "--seed", seed]);
        assert_eq!(r.status.code(), Some(0));
        fs::read(out).unwrap()
    };
    assert_eq!(run("3", "x.csv"), run("3", "y.csv"));
    assert_ne!(run("3", "x.csv"), run("4", "z.csv"));
}

#[test]
fn eval_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let [reference, test, baseline] = ["ref", "test", "base"].map(|d| dir.path().join(d));
    for (d, records) in [
        (&reference, [[0, 800, 1600, 2400], [0, 900, 1800, 2700]]),
        (&test, [[0, 800, 1600, 2400], [0, 900, 1800, 2700]]),
        (&baseline, [[0, 800, 1300, 2400], [0, 900, 1400, 2700]]),
    ] {
        fs::create_dir_all(d).unwrap();
        write_ann(&d.join("100.csv"), &records[0]);
        write_ann(&d.join("101.csv"), &records[1]);
    }
    let csv = dir.path().join("report.csv");
    let r = abductor(&[
        "eval", "--test", s(&test), "--ref", s(&reference), "--baseline", s(&baseline), "--csv", s(&csv),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let table = String::from_utf8(r.stdout).unwrap();
    assert!(table.contains("Wilcoxon signed-rank p = 0.500000"), "{table}");
    assert!(table.contains("101") && table.contains("Gross"), "{table}");
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 4);
}

#[test]
fn eval_single_files_pair_regardless_of_name() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.csv");
    let test = dir.path().join("test.csv");
    write_ann(&reference, &[0, 800, 1600]);
    write_ann(&test, &[0, 800]);
    let r = abductor(&["eval", "--test", s(&test), "--ref", s(&reference), "--tol-ms", "10"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8(r.stdout).unwrap().contains("66.67"));
}

#[test]
fn eval_directories_must_pair_up() {
    let dir = tempfile::tempdir().unwrap();
    let (t, r) = (dir.path().join("t"), dir.path().join("r"));
    fs::create_dir_all(&t).unwrap();
    fs::create_dir_all(&r).unwrap();
    write_ann(&t.join("100.csv"), &[0, 800]);
    write_ann(&r.join("100.csv"), &[0, 800]);
    write_ann(&r.join("101.csv"), &[0, 800]);
    let out = abductor(&["eval", "--test", s(&t), "--ref", s(&r)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("101"));
    write_ann(&t.join("101.csv"), &[0, 900]);
    let out = abductor(&["eval", "--test", s(&t), "--ref", s(&r)]);
    assert_eq!(out.status.code(), Some(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn corrupted_annotations_come_back_sorted_and_refractory(seed in 0u64..1000) {
        let dir = tempfile::tempdir().unwrap();
        let beats = synth::regular_beats(400, 800, 12_000);
        let sig = dir.path().join("s.csv");
        synth::ecg(&beats, 12_000, &SynthConfig::default())
            .write_csv(&mut fs::File::create(&sig).unwrap())
            .unwrap();
        let ann = dir.path().join("a.csv");
        write_ann(&ann, &beats);
        let noisy = dir.path().join("n.csv");
        cmd_corrupt(&CorruptConfig {
            ann: ann.clone(),
            out: noisy.clone(),
            fp_rate: 0.2,
            fn_rate: 0.2,
            seed,
            signal: Some(sig.clone()),
            channel: 0,
        })
        .unwrap();
        let mut cfg = RunConfig::new(&noisy, dir.path().join("o.csv"));
        cfg.signal = Some(sig);
        cfg.fragment_ms = 5_000;
        cfg.overlap_ms = 1_000;
        let out = cmd_interpret(&cfg).unwrap().annotations.times();
        prop_assert!(out.windows(2).all(|w| w[1] - w[0] >= 200), "{:?}", out);
        prop_assert!(out.iter().all(|&t| (0..12_000).contains(&t)));
    }
}

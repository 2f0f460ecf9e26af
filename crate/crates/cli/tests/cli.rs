use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lowlight_core::crf::{gamma_curve, write_dorf};
use lowlight_core::io::save_png;
use lowlight_core::ImageF;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lowlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowlight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_corpus(dir: &Path, n: usize) {
    fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let data = (0..24 * 24 * 3)
            .map(|_| 0.1 + 0.8 * rng.random::<f64>())
            .collect();
        save_png(
            &dir.join(format!("{i:02}.png")),
            &ImageF::srgb(24, 24, data).unwrap(),
        )
        .unwrap();
    }
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    assert_eq!(code(&lowlight(&["--help"])), 0);
    assert_eq!(code(&lowlight(&["--version"])), 0);
    for sub in ["gen", "eval", "crf", "verify"] {
        let out = lowlight(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&lowlight(&[])), 1);
    assert_eq!(code(&lowlight(&["frobnicate"])), 1);
    assert_eq!(code(&lowlight(&["gen", "--input", "x"])), 1);
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_corpus(&input, 1);
    let out = tmp.path().join("out");
    let res = lowlight(&[
        "gen",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "1",
        "--ablation",
        "no_everything",
    ]);
    assert_eq!(code(&res), 1);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("no_epsilon"), "{stderr}");
}

#[test]
fn crf_lists_curves_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("curves.txt");
    let curves = [gamma_curve(1.8).unwrap(), gamma_curve(2.4).unwrap()];
    let mut buf = Vec::new();
    write_dorf(&curves, &mut buf).unwrap();
    fs::write(&path, buf).unwrap();

    let out = lowlight(&["crf", "--dorf", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "gamma_1.8\ngamma_2.4\n"
    );

    let out = lowlight(&["crf", "--dorf", path.to_str().unwrap(), "--roundtrip"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("curves: 2"), "{text}");
}

#[test]
fn crf_file_errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.txt");
    assert_eq!(
        code(&lowlight(&["crf", "--dorf", missing.to_str().unwrap()])),
        3
    );
    let bad = tmp.path().join("bad.txt");
    fs::write(&bad, "curve\ninfo\nI =\n0 0.5 zebra\n").unwrap();
    assert_eq!(
        code(&lowlight(&["crf", "--dorf", bad.to_str().unwrap()])),
        2
    );
}

#[test]
fn gen_eval_verify_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_corpus(&input, 4);
    fs::write(input.join("readme.txt"), "skip me").unwrap();
    let out = tmp.path().join("out");
    let res = lowlight(&[
        "gen",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--size",
        "16",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("pairs written:         4"), "{text}");
    assert!(text.contains("skipped (non-image):   1"), "{text}");

    let manifest = out.join("manifest.json");
    let report = tmp.path().join("report.json");
    let res = lowlight(&[
        "eval",
        "--manifest",
        manifest.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(report.exists());
    assert!(tmp.path().join("report.csv").exists());

    assert_eq!(
        code(&lowlight(&[
            "verify",
            "--manifest",
            manifest.to_str().unwrap()
        ])),
        0
    );
}

#[test]
fn gen_on_missing_or_empty_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    for input in [tmp.path().join("nope"), empty] {
        let res = lowlight(&[
            "gen",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--seed",
            "1",
        ]);
        assert_eq!(code(&res), 2);
    }
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_corpus(&input, 1);
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "gamma = [0.5, 0.1]\n").unwrap();
    let res = lowlight(&[
        "gen",
        "--input",
        input.to_str().unwrap(),
        "--output",
        tmp.path().join("out").to_str().unwrap(),
        "--seed",
        "1",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 1);
}

#[test]
fn eval_directories_warns_on_unmatched_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    write_corpus(&pred, 3);
    write_corpus(&gt, 2);
    let report = tmp.path().join("r.json");
    let res = lowlight(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    assert!(String::from_utf8_lossy(&res.stderr).contains("02.png"));
    let r = lowlight_core::MetricReport::read(&report).unwrap();
    assert_eq!(r.per_image.len(), 2);
    assert!(r.per_image.iter().all(|s| s.identical && s.psnr == 99.0));
    assert_eq!(r.skipped.len(), 1);

    let res = lowlight(&[
        "eval",
        "--pred",
        tmp.path().join("none").to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 3);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use weftcodec::eval::{match_points, MatchRule};
use weftcodec::io::{self, Annotation};
use weftcodec::{CrossPoint, GrayImage, Raster};

fn weftcodec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weftcodec")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn render_random(dir: &Path, seed: &str) {
    let out = weftcodec(&["render", "--random", "16", "25", "0.5", seed, "-o", p(dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn render_writes_three_files_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    render_random(&a, "42");
    render_random(&b, "42");
    for file in ["fabric.png", "fabric.json", "fabric.pbm"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert_eq!(fs::read_dir(&a).unwrap().count(), 3);
    let pattern = io::load_pattern(&a.join("fabric.pbm")).unwrap();
    assert_eq!((pattern.rows(), pattern.cols()), (16, 25));
}

#[test]
fn render_rejects_malformed_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.pbm");
    fs::write(&bad, "P1\n3 2\n1 0 1\n").unwrap();
    let out = weftcodec(&["render", p(&bad), "-o", p(&tmp.path().join("out"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("weftcodec render: malformed pattern"), "{}", stderr(&out));
}

#[test]
fn decode_round_trips_and_dumps_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    let dec = tmp.path().join("dec");
    render_random(&src, "7");
    let out = weftcodec(&["decode", p(&src.join("fabric.png")), "-o", p(&dec), "--dump-stages"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(dec.join("fabric.pbm")).unwrap(), fs::read(src.join("fabric.pbm")).unwrap());
    for stage in ["likelihood", "tri", "merged"] {
        let img: GrayImage = io::load_gray_png_strict(&dec.join(format!("fabric_{stage}.png"))).unwrap();
        assert_eq!((img.width(), img.height()), (512, 320));
    }
    let annotation = Annotation::load(&dec.join("fabric.json")).unwrap();
    assert_eq!((annotation.warp_x.len(), annotation.weft_y.len()), (25, 16));

    // The dumped likelihood map is a valid external map.
    let ext = tmp.path().join("ext");
    let out = weftcodec(&[
        "decode",
        p(&src.join("fabric.png")),
        "--backend",
        "external",
        "--map",
        p(&dec.join("fabric_likelihood.png")),
        "-o",
        p(&ext),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(ext.join("fabric.pbm")).unwrap(), fs::read(src.join("fabric.pbm")).unwrap());
}

#[test]
fn decode_error_families() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    render_random(&src, "3");
    let image = src.join("fabric.png");
    let out_dir = tmp.path().join("out");

    let small = tmp.path().join("small.png");
    io::save_gray_png(&Raster::filled(100, 80, 0.5f64).unwrap(), &small).unwrap();
    let out = weftcodec(&["decode", p(&image), "--backend", "external", "--map", p(&small), "-o", p(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("contract violation"), "{}", stderr(&out));

    let out = weftcodec(&["decode", p(&small), "-o", p(&out_dir)]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("colors stage failed"), "{}", stderr(&out));

    let out = weftcodec(&["decode", p(&tmp.path().join("missing.png")), "-o", p(&out_dir)]);
    assert_eq!(code(&out), 3);

    let out = weftcodec(&["decode", p(&image), "--backend", "external", "-o", p(&out_dir)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_is_validated_and_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    render_random(&src, "5");
    let image = src.join("fabric.png");

    let unknown = tmp.path().join("unknown.toml");
    fs::write(&unknown, "sigma = 3\n").unwrap();
    let out = weftcodec(&["--config", p(&unknown), "decode", p(&image), "-o", p(&tmp.path().join("o1"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown field"), "{}", stderr(&out));

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "s = -1.0\n").unwrap();
    let out = weftcodec(&["--config", p(&bad), "decode", p(&image), "-o", p(&tmp.path().join("o2"))]);
    assert_eq!(code(&out), 2);
    let out = weftcodec(&["--config", p(&bad), "decode", p(&image), "--s", "10", "-o", p(&tmp.path().join("o3"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn dataset_decode_and_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = tmp.path().join("truth");
    let pred = tmp.path().join("pred");
    let report = tmp.path().join("report");
    let out = weftcodec(&["dataset", "3", "--augment", "--seed", "9", "-o", p(&truth)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = fs::read_to_string(truth.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 12);

    let mut images: Vec<String> = fs::read_dir(&truth)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .map(|p| p.to_str().unwrap().to_string())
        .collect();
    images.sort();
    let mut args = vec!["-j", "2", "decode", "-o", p(&pred)];
    args.extend(images.iter().map(String::as_str));
    let out = weftcodec(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = weftcodec(&["eval", p(&truth), p(&pred), "--s-list", "1..20", "--folds", "11", "-o", p(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let curve = fs::read_to_string(report.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 21);
    let summary = fs::read_to_string(report.join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,count,mean,min,max,std\n"));
    let fold_line = summary.lines().find(|l| l.starts_with("fold_accuracy,")).expect("fold summary row");
    assert_eq!(fold_line.split(',').count(), 6);
    let patterns = fs::read_to_string(report.join("patterns.csv")).unwrap();
    assert_eq!(patterns.lines().count(), 13);
    for line in patterns.lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some("1"), "{line}");
    }

    // Ground truth against itself is correct at every threshold.
    let out = weftcodec(&["eval", p(&truth), p(&truth), "--s-list", "1..20", "--emit-csv", "-o", p(&tmp.path().join("self"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 21);
    for row in stdout.lines().skip(1) {
        assert_eq!(row.split(',').nth(5), Some("1"), "{row}");
    }
}

#[test]
fn eval_matches_library_on_perturbed_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = tmp.path().join("truth");
    let pred = tmp.path().join("pred");
    render_random(&truth, "11");
    fs::create_dir(&pred).unwrap();
    fs::copy(truth.join("fabric.pbm"), pred.join("fabric.pbm")).unwrap();
    let mut annotation = Annotation::load(&truth.join("fabric.json")).unwrap();
    let original = annotation.crossings.clone();
    annotation.crossings = original
        .iter()
        .enumerate()
        .map(|(k, c)| CrossPoint::new(c.x + (k % 9) as f64, c.y, if k % 10 == 0 { 1 - c.v } else { c.v }))
        .collect();
    annotation.save(&pred.join("fabric.json")).unwrap();

    let out = weftcodec(&["eval", p(&truth), p(&pred), "--s-list", "2,5,8", "-o", p(&tmp.path().join("r"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let curve = fs::read_to_string(tmp.path().join("r/curve.csv")).unwrap();
    for (row, s) in curve.lines().skip(1).zip([2.0, 5.0, 8.0]) {
        let expected = match_points(&original, &annotation.crossings, s, MatchRule::OneToOne).unwrap();
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2..5], [expected.correct.to_string(), expected.error.to_string(), expected.missed.to_string()]);
    }
}

#[test]
fn eval_lists_unmatched_files() {
    let tmp = tempfile::tempdir().unwrap();
    let truth = tmp.path().join("truth");
    let pred = tmp.path().join("pred");
    render_random(&truth, "1");
    fs::create_dir(&pred).unwrap();
    let out = weftcodec(&["eval", p(&truth), p(&pred), "-o", p(&tmp.path().join("r"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("fabric (no prediction)"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    assert_eq!(code(&weftcodec(&["render", "-o", "x"])), 2);
    assert_eq!(code(&weftcodec(&["frobnicate"])), 2);
    assert_eq!(code(&weftcodec(&["--help"])), 0);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ifa-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_short_path() {
    let o = run(&["simulate", "--rule", "54", "--n", "3", "--ticks", "8"]);
    assert!(o.status.success());
    // The orbit of UUU under rule 54 at n=3 is the length-7 m-sequence.
    assert_eq!(
        stdout(&o),
        "t,tick,price\n0,-1,-1\n1,-1,-2\n2,1,-1\n3,-1,-2\n4,1,-1\n5,1,0\n6,1,1\n7,-1,0\n"
    );
}

#[test]
fn cycle_row() {
    let o = run(&["cycle", "--rule", "54", "--n", "10"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "rule,n,seed,transient,period\n54,10,UUUUUUUUUU,0,889\n");

    let o = run(&["cycle", "--n", "4", "--all-cycles"]);
    let text = stdout(&o);
    assert!(text.contains("period,least_window\n1,DDDD\n15,UUUU\n"), "{text}");
}

#[test]
fn survey_k2_has_256_rows() {
    let o = run(&["survey", "--k", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 257);
    assert!(lines[0].starts_with("rule,canonical,label"));
    let complex: Vec<&str> = lines.iter().filter(|l| l.contains(",COMPLEX,")).copied().collect();
    assert!(complex.iter().all(|l| l.split(',').nth(1) == Some("54")));
    assert!(String::from_utf8_lossy(&o.stderr).contains("complex_classes=[54]"));
}

#[test]
fn survey_k4_needs_opt_in() {
    let o = run(&["survey", "--k", "4"]);
    assert_eq!(o.status.code(), Some(8));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--ticks", "many"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_rule_is_reported() {
    let o = run(&["simulate", "--rule", "256"]);
    assert_eq!(o.status.code(), Some(7));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error kind="), "{err}");
}

#[test]
fn ingestion_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "date,return\n\n").unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0.01\n0.02\nn/a\n").unwrap();
    let missing = dir.path().join("missing.csv");

    let codes: Vec<Option<i32>> = [&missing, &empty, &bad]
        .iter()
        .map(|p| run(&["stats", "--input", p.to_str().unwrap()]).status.code())
        .collect();
    assert_eq!(codes, vec![Some(3), Some(4), Some(5)]);
    let o = run(&["stats", "--input", bad.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("kind=non_numeric"));
}

#[test]
fn ingested_series_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let body: String = (0..200).map(|i| format!("2020-01-{i:03},{}\n", ((i * 37) % 11) as f64 - 5.0)).collect();
    fs::write(&path, format!("date,return\n{body}")).unwrap();
    let o = run(&["stats", "--input", path.to_str().unwrap(), "--rolling-window", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().starts_with("ingested,200,"), "{text}");
    assert!(text.lines().nth(2).unwrap().starts_with("normal-benchmark,200,"));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn assert_replays(args: &[&str]) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut full = args.to_vec();
    full.extend(["--out", a.path().to_str().unwrap()]);
    let o = run(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let manifest = a.path().join("manifest.json");
    let o = run(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "replay {args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.len() > 1);
    assert_eq!(fa, fb, "{args:?} did not replay identically");
}

#[test]
fn every_subcommand_replays_bit_for_bit() {
    assert_replays(&["simulate", "--n", "10", "--ticks", "500", "--svg"]);
    assert_replays(&["cycle", "--n", "8", "--all-cycles"]);
    assert_replays(&["survey", "--k", "1"]);
    assert_replays(&["stats", "--ticks", "22000", "--rolling-window", "200", "--svg"]);
    assert_replays(&["stats", "--ticks", "5000", "--overlapping", "--normal-seed", "7"]);
    assert_replays(&["regulate", "--ticks", "5000", "--regime", "both:50,5,10"]);
    assert_replays(&["regulate", "--ticks", "5000", "--all-regimes", "--svg"]);
    assert_replays(&["regulate", "--ticks", "2000", "--sweep"]);
    assert_replays(&["ca", "--regime", "justice", "--seed", "9", "--steps", "50", "--svg"]);
    assert_replays(&["compare", "--width", "61", "--steps", "60", "--seed", "3"]);
}

#[test]
fn svg_flag_does_not_change_csv() {
    let plain = tempfile::tempdir().unwrap();
    let with_svg = tempfile::tempdir().unwrap();
    let base = ["stats", "--ticks", "22000", "--rolling-window", "100"];
    let mut a = base.to_vec();
    a.extend(["--out", plain.path().to_str().unwrap()]);
    let mut b = base.to_vec();
    b.extend(["--out", with_svg.path().to_str().unwrap(), "--svg"]);
    assert!(run(&a).status.success());
    assert!(run(&b).status.success());
    let csv = |d: &Path| -> Vec<(String, Vec<u8>)> {
        files(d).into_iter().filter(|(n, _)| n.ends_with(".csv")).collect()
    };
    assert_eq!(csv(plain.path()), csv(with_svg.path()));
    assert!(with_svg.path().join("returns.svg").exists());
    assert!(!plain.path().join("returns.svg").exists());
}

#[test]
fn ca_pbm_has_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ca", "--width", "31", "--steps", "12", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let pbm = fs::read_to_string(dir.path().join("grid.pbm")).unwrap();
    let mut lines = pbm.lines();
    assert_eq!(lines.next(), Some("P1"));
    assert_eq!(lines.next(), Some("31 12"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn thread_cap_does_not_change_output() {
    let one = bin().args(["survey", "--k", "2"]).env("IFA_LAB_THREADS", "1").output().unwrap();
    let many = bin().args(["survey", "--k", "2"]).env("IFA_LAB_THREADS", "4").output().unwrap();
    assert_eq!(one.stdout, many.stdout);
}

use std::path::Path;
use std::process::Command;

fn edm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_edm")).args(args).output().expect("binary runs")
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

const SQUARE: &str = "0,1,2,1\n1,0,1,2\n2,1,0,1\n1,2,1,0\n";

#[test]
fn mds_recovers_unit_square() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let out = dir.path().join("x.csv");
    std::fs::write(&input, SQUARE).unwrap();
    let o = edm(&["mds", "--in", input.to_str().unwrap(), "--dim", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = read_rows(&out);
    assert_eq!(x.len(), 4);
    assert!((dist2(&x[0], &x[2]) - 2.0).abs() < 1e-10);
    assert!((dist2(&x[0], &x[1]) - 1.0).abs() < 1e-10);
}

#[test]
fn mds_plain_flag_squares_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let out = dir.path().join("x.csv");
    std::fs::write(&input, "0,3\n3,0\n").unwrap();
    let o = edm(&["mds", "--in", input.to_str().unwrap(), "--dim", "1", "--out", out.to_str().unwrap(), "--plain"]);
    assert!(o.status.success());
    let x = read_rows(&out);
    assert!(((x[0][0] - x[1][0]).abs() - 3.0).abs() < 1e-12);
}

#[test]
fn complete_fills_missing_entry() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let mask = dir.path().join("m.csv");
    let out = dir.path().join("e.csv");
    let pts = dir.path().join("p.csv");
    // unit square with one diagonal hidden
    std::fs::write(&input, "0,1,0,1\n1,0,1,2\n0,1,0,1\n1,2,1,0\n").unwrap();
    std::fs::write(&mask, "1,1,0,1\n1,1,1,1\n0,1,1,1\n1,1,1,1\n").unwrap();
    let o = edm(&[
        "complete", "--method", "sdr", "--dim", "2",
        "--mask", mask.to_str().unwrap(),
        "--in", input.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
        "--points", pts.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = read_rows(&out);
    assert!((e[0][1] - 1.0).abs() < 1e-3);
    assert_eq!(read_rows(&pts).len(), 4);
}

#[test]
fn complete_signals_iteration_limit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let out = dir.path().join("e.csv");
    // a noisy, non-Euclidean matrix keeps rank alternation from a fixed point quickly
    std::fs::write(&input, "0,1,9,4\n1,0,1,7\n9,1,0,1\n4,7,1,0\n").unwrap();
    let o = edm(&["complete", "--method", "rank", "--dim", "1", "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 2, "{code}");
    assert!(out.exists());
}

#[test]
fn unfold_writes_both_sets() {
    let dir = tempfile::tempdir().unwrap();
    let cross = dir.path().join("c.csv");
    let mics = dir.path().join("mics.csv");
    let srcs = dir.path().join("srcs.csv");
    std::fs::write(&cross, "4\n").unwrap();
    let o = edm(&[
        "unfold", "--cross", cross.to_str().unwrap(), "--dim", "1", "--method", "sdr",
        "--mics-out", mics.to_str().unwrap(), "--sources-out", srcs.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (m, s) = (read_rows(&mics), read_rows(&srcs));
    assert!(((m[0][0] - s[0][0]).abs() - 2.0).abs() < 1e-4);
}

#[test]
fn turnpike_prints_canonical_solution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.csv");
    std::fs::write(&d, "1,2,3\n").unwrap();
    let o = edm(&["turnpike", "--distances", d.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "0,1,3");
}

#[test]
fn echo_sort_finds_single_image() {
    let dir = tempfile::tempdir().unwrap();
    let mics = dir.path().join("mics.csv");
    let times = dir.path().join("t.json");
    let m = [[1.0, 1.0, 1.0], [1.4, 1.0, 1.1], [1.0, 1.3, 1.2], [1.1, 1.1, 1.4], [1.3, 1.3, 1.3]];
    let img = [-2.0, 3.0, 1.5];
    let rows: Vec<String> = m.iter().map(|p| format!("{},{},{}", p[0], p[1], p[2])).collect();
    std::fs::write(&mics, rows.join("\n")).unwrap();
    let t: Vec<Vec<f64>> = m.iter().map(|p| vec![dist2(p, &img).sqrt() / 343.0]).collect();
    let json = format!("{:?}", t);
    std::fs::write(&times, json).unwrap();
    let o = edm(&["echo-sort", "--mics", mics.to_str().unwrap(), "--times", times.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let v: Vec<f64> = lines[1].split(',').take(3).map(|x| x.parse().unwrap()).collect();
    assert!(dist2(&v, &img).sqrt() < 1e-6);
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"scenario":"random_deletion","n":8,"d":2,"trials":2,"deletion_counts":[0,4],
            "jitter_levels":[0.0,0.05],"methods":["rank","sstress"],"seed":3}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = edm(&["bench", "--scenario", "random-deletion", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("method,setting,jitter,success_rate,mean_rel_error,trials,seed\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    let o = edm(&["bench", "--scenario", "mdu", "--spec", spec.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn swiss_demo_prints_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("swiss.csv");
    let o = edm(&["swiss-demo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let e: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((e - 0.999207771691884).abs() < 1e-12);
    assert_eq!(read_rows(&out).len(), 5);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    std::fs::write(&input, "0,1\n1\n").unwrap();
    let o = edm(&["mds", "--in", input.to_str().unwrap(), "--dim", "1", "--out", "x.csv"]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("error"));
}

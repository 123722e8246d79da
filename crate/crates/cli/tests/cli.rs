use std::path::Path;
use std::process::{Command, Output};

fn skelgrid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelgrid"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value of `key=` in a `k=v k=v` summary line.
fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
        .to_string()
}

#[test]
fn y_model_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = skelgrid(d, &["gen", "--shape", "y", "--radii", "6,4,3", "--length", "60", "--out", "y.vox"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(d.join("y.vox").exists() && d.join("y.centerline").exists());

    let ex = skelgrid(d, &["extract", "--in", "y.vox", "--t", "1e-12", "--out", "y.skel.json", "--ply", "y.ply"]);
    assert_eq!(ex.status.code(), Some(0));
    let line = stdout(&ex);
    assert_eq!(field(&line, "accepted"), "3");
    assert_eq!(field(&line, "loops"), "0");
    let ply = std::fs::read_to_string(d.join("y.ply")).unwrap();
    assert!(ply.starts_with("ply\nformat ascii 1.0\n"));

    let loose = skelgrid(d, &["extract", "--in", "y.vox", "--t", "1", "--out", "y1.json"]);
    assert!(field(&stdout(&loose), "accepted").parse::<usize>().unwrap() > 3);

    let same = skelgrid(d, &["eval", "--ref", "y.skel.json", "--test", "y.skel.json"]);
    assert!(stdout(&same).starts_with("rmse=0.0000 "));
    let vs_center = skelgrid(d, &["eval", "--ref", "y.centerline", "--test", "y.skel.json", "--csv", "e.csv"]);
    assert_eq!(vs_center.status.code(), Some(0));
    let r: f64 = field(&stdout(&vs_center), "rmse").parse().unwrap();
    assert!(r < 2.0, "rmse {r}");
    assert_eq!(std::fs::read_to_string(d.join("e.csv")).unwrap().lines().count(), 1);
}

#[test]
fn torus_reports_a_loop() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(skelgrid(d, &["gen", "--shape", "torus", "--major", "20", "--minor", "4", "--out", "t.vox"]).status.success());
    let ex = skelgrid(d, &["extract", "--in", "t.vox"]);
    assert!(field(&stdout(&ex), "loops").parse::<usize>().unwrap() >= 1);
}

#[test]
fn noise_is_seeded_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    skelgrid(d, &["gen", "--shape", "cylinder", "--radius", "4", "--length", "30", "--out", "c.vox"]);
    let run = |out: &str, iters: &str| {
        skelgrid(d, &["noise", "--in", "c.vox", "--p", "0.05", "--iters", iters, "--seed", "7", "--out", out])
    };
    assert!(run("a.vox", "3").status.success());
    assert!(run("b.vox", "3").status.success());
    let a = std::fs::read(d.join("a.vox")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.vox")).unwrap());
    assert!(String::from_utf8_lossy(&a).lines().nth(1).unwrap().contains("seed=7"));

    assert!(run("z.vox", "0").status.success());
    let strip = |p: &str| -> Vec<String> {
        std::fs::read_to_string(d.join(p)).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
    };
    assert_eq!(strip("z.vox"), strip("c.vox"));

    let bad = skelgrid(d, &["noise", "--in", "c.vox", "--p", "1.5", "--out", "x.vox"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn user_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(skelgrid(d, &["gen", "--shape", "y", "--radii", "6,4,3", "--length", "40"]).status.code(), Some(2));
    assert_eq!(skelgrid(d, &["gen", "--shape", "tree", "--radius", "5", "--out", "t.vox"]).status.code(), Some(2));
    assert_eq!(skelgrid(d, &["extract", "--in", "missing.vox"]).status.code(), Some(2));
    assert_eq!(skelgrid(d, &["eval", "--ref", "nope", "--test", "nope"]).status.code(), Some(2));
    std::fs::write(d.join("bad.vox"), "VOXA 2 2 2\n5 0 0\n").unwrap();
    let e = skelgrid(d, &["extract", "--in", "bad.vox"]);
    assert_eq!(e.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&e.stderr).contains("line 2"));
    assert_eq!(skelgrid(d, &["extract", "--in", "bad.vox", "--t", "0"]).status.code(), Some(2));
    assert_eq!(skelgrid(d, &["bench"]).status.code(), Some(2));
}

#[test]
fn bench_sweep_and_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let b = skelgrid(d, &["bench", "--shape", "tree", "--radius", "5", "--depth", "1", "--lengths", "15,20,25"]);
    assert_eq!(b.status.code(), Some(0));
    let out = stdout(&b);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "model,n,N,d_max,proposals,accepted,rejected,loops,time_ms,rmse,voxel_count");
    assert_eq!(lines.iter().filter(|l| l.starts_with("tree_")).count(), 3);
    assert!(lines.last().unwrap().starts_with("# loglog_exponent="));

    skelgrid(d, &["gen", "--shape", "sphere", "--radius", "4", "--out", "s.vox"]);
    std::fs::write(d.join("bad.vox"), "junk").unwrap();
    let b = skelgrid(d, &["bench", "--models", "s.vox", "bad.vox"]);
    assert_eq!(b.status.code(), Some(1));
    let out = stdout(&b);
    assert!(out.lines().any(|l| l.starts_with("s,")));
    assert!(out.contains("bad.vox,,,,,,,,failed,,"));
}

#[test]
fn dumps_cover_every_voxel() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    skelgrid(d, &["gen", "--shape", "cylinder", "--radius", "3", "--length", "20", "--out", "c.vox"]);
    let n = std::fs::read_to_string(d.join("c.vox")).unwrap().lines().skip(1).count();
    let ex = skelgrid(
        d,
        &["extract", "--in", "c.vox", "--dump-distance", "d.txt", "--dump-labels", "bfs1", "--labels-out", "l.txt"],
    );
    assert!(ex.status.success(), "{}", String::from_utf8_lossy(&ex.stderr));
    assert_eq!(std::fs::read_to_string(d.join("d.txt")).unwrap().lines().count(), n);
    assert_eq!(std::fs::read_to_string(d.join("l.txt")).unwrap().lines().count(), n);
    // labels without a destination is a usage error
    assert_eq!(skelgrid(d, &["extract", "--in", "c.vox", "--dump-labels", "bfs2"]).status.code(), Some(2));
}

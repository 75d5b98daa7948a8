use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn latppt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latppt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn certify_ibe_reports_pptes() {
    let o = latppt(&["certify", "-m", "1", "-n", "1", "--beta0", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("pptes-certificate\n"));
    assert!(text.contains("\nwitness -1/40\n"), "{text}");
    assert!(text.contains("\nj-min 0/1\n"), "{text}");
    assert!(text.contains("\nverdict PPTES\n"), "{text}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["certify", "-m", "2", "-n", "2", "--beta0", "1,3"];
    let a = latppt(&args);
    let b = latppt(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let e = ["enumerate", "-m", "2", "-n", "1", "--samples", "40", "--seed", "5"];
    assert_eq!(latppt(&e).stdout, latppt(&e).stdout);
}

#[test]
fn certificate_file_verifies_and_tampering_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.txt");
    let o = latppt(&["certify", "-m", "2", "-n", "1", "--beta0", "3", "-o", path(&cert)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict PPTES"));

    let o = latppt(&["verify-certificate", path(&cert)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("certificate verified"));

    let text = fs::read_to_string(&cert).unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, text.replace("witness -1/224", "witness -1/225")).unwrap();
    let o = latppt(&["verify-certificate", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn check_ppt_on_a_bell_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("bell.txt");
    fs::write(&st, "lattice-state m=1 n=1 denom=1\n0|0 1\n").unwrap();
    let o = latppt(&["check-ppt", "--state", path(&st), "--dense"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("NPT\n"), "{text}");
    assert!(text.contains("j-min -1/1"), "{text}");
}

#[test]
fn ic_certification_is_inconclusive() {
    let o = latppt(&["certify", "-m", "1", "-n", "1", "--beta0", "2", "--ic"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict inconclusive"));
    let o = latppt(&["witness", "-m", "1", "-n", "1", "--beta0", "1", "--ic"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("witness 0/1"));
}

#[test]
fn cross_validate_agrees_and_needs_a_seed() {
    let o = latppt(&["cross-validate", "-m", "1", "-n", "1", "--samples", "500", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "500/500 agree\n");
    let o = latppt(&["cross-validate", "-m", "1", "-n", "1", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn enumerate_flags() {
    let o = latppt(&["enumerate", "-m", "1", "-n", "1", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"));

    let o = latppt(&["enumerate", "-m", "1", "-n", "1", "--symmetry", "--ppt-only"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# records "), "{last}");
    assert!(text.lines().filter(|l| !l.starts_with('#')).all(|l| l.contains("\tPPT\t")));
}

#[test]
fn export_figure_csv() {
    let o = latppt(&["export-figure", "-m", "1", "-n", "1", "--beta0", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,alpha1,beta1,role"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",ic")).count(), 9);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",extra")).count(), 1);
}

#[test]
fn built_files_round_trip_through_certify() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("state.txt");
    let map = dir.path().join("map.txt");
    let o = latppt(&["build-state", "-m", "2", "-n", "2", "--beta0", "2,1", "-o", path(&st)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = latppt(&["build-map", "-m", "2", "-n", "2", "--beta0", "2,1", "-o", path(&map)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = latppt(&["certify", "--state", path(&st), "--map", path(&map)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("\nwitness -1/1312\n"), "{text}");
    assert!(text.contains(&format!("map-file {}", path(&map))), "{text}");

    let o = latppt(&["check-ppt", "--state", path(&st), "--dense"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PPT\n"));
}

#[test]
fn unverified_map_cannot_certify() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("t.txt");
    let o = latppt(&["build-map", "-m", "1", "-n", "1", "--transposition", "-o", path(&map)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = latppt(&["certify", "-m", "1", "-n", "1", "--sites", "0|1; 1|2", "--map", path(&map)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));

    let o = latppt(&["witness", "-m", "1", "-n", "1", "--sites", "0|0", "--map", path(&map)]);
    assert!(stdout(&o).contains("no positivity proof"), "{}", stdout(&o));
}

#[test]
fn bad_inputs_exit_with_one() {
    for args in [
        &["certify", "-m", "1", "-n", "2", "--beta0", "1,1"][..],
        &["certify", "-m", "1", "-n", "1", "--beta0", "0"][..],
        &["check-ppt", "-m", "1", "-n", "1", "--sites", "4|0"][..],
        &["verify-certificate", "/nonexistent/cert.txt"][..],
    ] {
        let o = latppt(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(stderr(&o).starts_with("error: "), "{args:?}");
    }
}

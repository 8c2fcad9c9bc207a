use std::io::Write;
use std::process::{Command, Output};

fn marc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in\n{out}"))
        .parse()
        .unwrap()
}

#[test]
fn info_table2() {
    let o = marc(&["info", "--channel", "table1", "--sources", "table2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!((value(&out, "H(S1,S2)") - 3f64.log2()).abs() < 1e-9);
    assert!((value(&out, "rho(S1,S2)") - 0.5).abs() < 1e-9);
}

#[test]
fn info_table6() {
    let out = stdout(&marc(&["info", "--sources", "table6"]));
    assert!((value(&out, "H(S1,S2)") - 0.504).abs() < 1e-3);
}

#[test]
fn thm3_boundary_exit_code() {
    let o = marc(&[
        "bounds",
        "--channel",
        "table1",
        "--sources",
        "table2",
        "--scheme",
        "thm3",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("status=boundary"));
}

#[test]
fn thm2_violated_exit_code() {
    let o = marc(&[
        "bounds",
        "--channel",
        "table1",
        "--sources",
        "table2",
        "--scheme",
        "thm2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let line = out
        .lines()
        .find(|l| l.starts_with("thm2.rly.S1S2"))
        .unwrap();
    assert!(line.ends_with("violated"), "{line}");
}

#[test]
fn cutset_bound_value() {
    let o = marc(&[
        "bounds",
        "--scheme",
        "cutset",
        "--channel",
        "tables45",
        "--c3",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!((value(&stdout(&o), "best") - 0.516).abs() < 0.01);
}

#[test]
fn search_output_is_thread_independent() {
    let args = [
        "search", "--target", "inew", "--c3", "0.2", "--step", "0.02",
    ];
    let one = stdout(&marc(&[&["--threads", "1"][..], &args[..]].concat()));
    let four = stdout(&marc(&[&["--threads", "4"][..], &args[..]].concat()));
    assert_eq!(one, four);
    assert!(one.contains("target=inew"));
}

#[test]
fn simulate_zero_errors() {
    let o = marc(&[
        "simulate",
        "--channel",
        "table1",
        "--sources",
        "table2",
        "-n",
        "50",
        "-B",
        "200",
        "--seed",
        "3",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(value(&out, "empirical_pe"), 0.0);
    assert_eq!(value(&out, "blocks_run"), 200.0);
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(marc(&["search"]).status.code(), Some(3));
    assert_eq!(marc(&["info", "--channel", "bogus"]).status.code(), Some(3));
    assert_eq!(
        marc(&["search", "--target", "cutset", "--step", "0.03"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn scenario_file_round_trip_through_cli() {
    let dump = stdout(&marc(&[
        "info",
        "--channel",
        "table7",
        "--sources",
        "table8",
        "--dump",
    ]));
    let text: String = dump
        .lines()
        .skip_while(|l| !l.starts_with("alphabet"))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    let path = f.path().to_str().unwrap();
    let a = stdout(&marc(&["info", "--scenario", path]));
    let b = stdout(&marc(&[
        "info",
        "--channel",
        "table7",
        "--sources",
        "table8",
    ]));
    assert_eq!(a, b);
}

#[test]
fn encoder_file_and_chain_mismatch() {
    let mut enc = tempfile::NamedTempFile::new().unwrap();
    // X1 depending on S2 is outside every per-symbol chain
    writeln!(
        enc,
        "alphabet S2 0 1\nalphabet X1 0 1\nkernel X1 | S2 : 1 0 ; 0 1"
    )
    .unwrap();
    let o = marc(&[
        "bounds",
        "--channel",
        "table1",
        "--sources",
        "table2",
        "--scheme",
        "thm3",
        "--encoders",
        enc.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("X1"));
}

#[test]
fn necessary_bound_with_time_sharing() {
    let mut enc = tempfile::NamedTempFile::new().unwrap();
    writeln!(
        enc,
        "alphabet Q 0 1\nalphabet S1 0 1\nalphabet S2 0 1\nalphabet X1 0 1\nalphabet X2 0 1\n\
         table Q : 1/2 1/2\n\
         kernel X1 X2 | S1 S2 Q : 1 0 0 0 ; 1 0 0 0 ; 0 1 0 0 ; 0 1 0 0 ; 0 0 1 0 ; 0 0 1 0 ; 0 0 0 1 ; 0 0 0 1"
    )
    .unwrap();
    let o = marc(&[
        "bounds",
        "--channel",
        "table1",
        "--sources",
        "table2",
        "--scheme",
        "thm4",
        "--encoders",
        enc.path().to_str().unwrap(),
    ]);
    let out = stdout(&o);
    assert!(out.contains("bound=thm4"), "{out}");
    assert_eq!(o.status.code(), Some(0), "{out}");
}

#[test]
fn regress_single_criterion() {
    let o = marc(&["regress", "--only", "4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("criterion=4 name=entropy_and_rho result=PASS"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracsys::ml_scalar::{ml, MLParams};
use fracsys::Complex64;
use fracsys_cli::config;

fn fracsys(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracsys"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn solve(dir: &Path, text: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, text);
    let out = dir.join("out").display().to_string();
    let mut args = vec!["solve", "--config", cfg.as_str(), "--out", out.as_str()];
    args.extend_from_slice(extra);
    fracsys(&args)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

const ALCOHOL: &str = r#"
[system]
orders = ["9/10", "4/5"]
matrix = [[-1, 0], [1, -1]]
initial = [1, 0]

[solve]
t_max = 2
steps = 64
"#;

#[test]
fn blood_alcohol_first_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), ALCOHOL, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/trajectory.csv"));
    assert_eq!(header, ["t", "re(u1)", "im(u1)", "re(u2)", "im(u2)"]);
    assert_eq!(rows.len(), 65);
    let p = MLParams::new(0.9, 1.0).unwrap();
    for r in &rows {
        let want = ml(p, Complex64::new(-r[0].powf(0.9), 0.0)).unwrap();
        assert!((r[1] - want.re).abs() < 1e-12, "t={}: {} vs {}", r[0], r[1], want.re);
        assert!(r[2].abs() < 1e-12);
    }
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("method: triangular"), "{report}");
}

#[test]
fn rational_report_records_augmented_size() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[system]
orders = ["1/2", "2/3", "1/5", "6/7"]
matrix = [[-1, 0.2, 0, 0.1], [0.1, -1, 0.3, 0], [0, 0.2, -0.5, 0.1], [0.3, 0, 0.1, -1]]
initial = [1, 0, 0, 1]

[solve]
method = "rational"
t_max = 1
steps = 4
"#;
    let o = solve(dir.path(), text, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("augmented size: 467"), "{report}");
    assert!(report.contains("common denominator: 210"), "{report}");
}

#[test]
fn unforced_zero_matrix_gives_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[system]
orders = [0.5, 0.7, 0.9]
matrix = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
initial = [1, 1, 1]

[solve]
t_max = 3
steps = 16
"#;
    let o = solve(dir.path(), text, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&dir.path().join("out/trajectory.csv"));
    for r in rows {
        for j in 0..3 {
            assert!(
                (r[1 + 2 * j] - 1.0).abs() < 1e-14 && r[2 + 2 * j].abs() < 1e-14,
                "{r:?}"
            );
        }
    }
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = ALCOHOL.replace(
        "initial = [1, 0]",
        "initial = [1, 0]\nforcing = [\"sin(t)\", \"t^0.5\"]",
    );
    assert!(solve(dir.path(), &text, &[]).status.success());
    let first = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(solve(dir.path(), &text, &[]).status.success());
    let second = fs::read(dir.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains('\r'));
    // 17 significant digits in scientific notation
    let field = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{field}");
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = ALCOHOL.replace(
        "[solve]",
        "forcing = [\"exp(-t)\", \"0\"]\n\n[solve]\nmethod = \"series\"\nseries_tol = 1e-12",
    );
    let cfg_path = write_config(dir.path(), &text);
    let o = fracsys(&["solve", "--config", &cfg_path, "--dump-config"]);
    assert!(o.status.success());
    let dumped = String::from_utf8(o.stdout).unwrap();
    assert_eq!(config::parse(&dumped).unwrap(), config::parse(&text).unwrap());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn verify_compares_methods() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), ALCOHOL, &["--verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    let dev = |pair: &str| -> f64 {
        let line = report
            .lines()
            .find(|l| l.trim_start().starts_with(pair))
            .unwrap_or_else(|| panic!("{report}"));
        line.rsplit(": ").next().unwrap().parse().unwrap()
    };
    // both grid methods converge at O(h^{1+α}); Talbot is exact to ~1e-12
    let tri = dev("triangular vs talbot");
    assert!(tri < 1e-3, "{tri}");
    assert!(dev("triangular vs adams") < 1e-2);
    assert!(tri < dev("talbot vs adams"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve(dir.path(), &ALCOHOL.replace("steps = 64", "steps = 1"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 9") && err.contains("steps"), "{err}");

    let o = solve(
        dir.path(),
        &ALCOHOL.replace("[solve]", "[solve]\nmethod = \"commensurate\""),
        &[],
    );
    assert_eq!(o.status.code(), Some(1));

    let o = solve(dir.path(), &ALCOHOL.replace("[1, -1]]", "[1, -1"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn solver_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = ALCOHOL
        .replace("[[-1, 0], [1, -1]]", "[[-1, 0.5], [1, -1]]")
        .replace("[solve]", "[solve]\nmethod = \"triangular\"");
    let o = solve(dir.path(), &text, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("triangular"));
}

use std::process::{Command, Output};

use serde_json::Value;

fn linea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linea"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_lines(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn report_envelope_has_all_keys() {
    let out = linea(&["roots", "--poly", "z^2+1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["command", "config", "result", "diagnostics"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v.get("error").is_none());
    assert_eq!(v["command"], "roots");
    for key in [
        "seed",
        "depth",
        "samples",
        "tol",
        "output_format",
        "output_path",
        "threads",
    ] {
        assert!(v["config"].get(key).is_some(), "missing config.{key}");
    }
    for key in ["verdict", "levels", "residuals"] {
        assert!(v["diagnostics"].get(key).is_some(), "missing diagnostics.{key}");
    }
}

#[test]
fn linearize_coeffs_of_exp_generator() {
    let out = linea(&[
        "linearize",
        "coeffs",
        "--poly",
        "2*z+z^2",
        "--fixed-point",
        "0",
        "--order",
        "32",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let coeffs = json(&out)["result"]["coefficients"].clone();
    let mut factorial = 1.0;
    for n in 1..12 {
        factorial *= n as f64;
        let re = coeffs[n][0].as_f64().unwrap();
        assert!((re * factorial - 1.0).abs() < 1e-10, "a_{n} = {re}");
        assert_eq!(coeffs[n][1].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn exp_identity_csv() {
    let gap = |terms: &str| {
        let out = linea(&["qd", "exp-identity", "--w", "2", "--terms", terms, "--format", "csv"]);
        assert_eq!(out.status.code(), Some(0));
        let lines = csv_lines(&out);
        assert_eq!(lines[0], "lhs_re,lhs_im,rhs_re,rhs_im,abs_diff");
        let cells: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[2], 0.5);
        cells[4]
    };
    let (coarse, fine) = (gap("10000"), gap("100000"));
    assert!(fine < 1e-6);
    // the dropped tail falls off like 1/N
    assert!((coarse / fine - 10.0).abs() < 0.1, "{coarse} {fine}");
}

#[test]
fn empirical_order_matches_exact() {
    let out = linea(&[
        "order",
        "--poly",
        "1.5*z+z^2",
        "--fixed-point",
        "0",
        "--empirical",
        "--radii",
        "1e2,1e3,1e4,1e5",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&out);
    assert_eq!(lines[0], "method,value,fit_residual");
    let value = |line: &str| line.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    let exact = 2f64.ln() / 1.5f64.ln();
    assert!((value(&lines[1]) - exact).abs() < 0.05);
    assert!((value(&lines[2]) - exact).abs() < 1e-12);
}

#[test]
fn csv_headers_per_command() {
    let cases: [(&[&str], &str); 4] = [
        (&["roots", "--poly", "z^2-1"], "re,im,residual"),
        (
            &["poincare-series", "--poly", "z^2-1", "--w", "3", "--depth", "4"],
            "n,level_sum,partial_sum",
        ),
        (
            &[
                "area",
                "el-growth",
                "--region",
                "disc:0:0.5",
                "--n-max",
                "2",
                "--samples",
                "1000",
            ],
            "n,area,std_error",
        ),
        (
            &["qd", "pushforward", "--w", "2", "--terms", "100"],
            "w_re,w_im,sigma_re,sigma_im,terms_used,tail_estimate",
        ),
    ];
    for (args, header) in cases {
        let mut args = args.to_vec();
        args.extend(["--format", "csv"]);
        let out = linea(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert_eq!(csv_lines(&out)[0], header, "{args:?}");
    }
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(linea(&["roots", "--poly", "z^2+("]).status.code(), Some(3));
    assert_eq!(linea(&["roots"]).status.code(), Some(3));
    assert_eq!(linea(&["no-such-command"]).status.code(), Some(3));
    assert_eq!(
        linea(&["--threads", "0", "roots", "--poly", "z"]).status.code(),
        Some(3)
    );
    assert_eq!(
        linea(&["area", "mc", "--region", "disc:0", "--r-max", "10"])
            .status
            .code(),
        Some(3)
    );
    let far = linea(&["linearize", "eval", "--poly", "z^2-1", "--fixed-point", "5", "--z", "0"]);
    assert_eq!(far.status.code(), Some(3));
    assert_eq!(json(&far)["error"]["kind"], "InvalidArguments");
}

#[test]
fn numerical_errors_exit_2() {
    let out = linea(&["area", "sum", "--w", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "SingularQuery");
    assert!(v["result"].is_null());

    let pole = linea(&["qd", "pushforward", "--w", "1", "--q-den", "z^4", "--terms", "10"]);
    assert_eq!(pole.status.code(), Some(2));
}

#[test]
fn require_verdict() {
    let base = ["poincare-series", "--poly", "z^2-1", "--w", "3", "--depth", "4"];
    let mut want_converged = base.to_vec();
    want_converged.extend(["--require-verdict", "converged"]);
    let out = linea(&want_converged);
    assert_eq!(out.status.code(), Some(2));
    // the report is still written
    assert!(json(&out)["diagnostics"]["verdict"].is_string());

    let mut want_undecided = base.to_vec();
    want_undecided.extend(["--require-verdict", "undecided"]);
    assert_eq!(linea(&want_undecided).status.code(), Some(0));
}

#[test]
fn config_file_and_flag_precedence() {
    let path = std::env::temp_dir().join(format!("linea-cli-test-{}.cfg", std::process::id()));
    std::fs::write(&path, "seed = 7\ndepth = 3\nsamples = 2e3\n").unwrap();
    let cfg = path.to_str().unwrap();
    let out = linea(&["--config", cfg, "--depth", "5", "roots", "--poly", "z"]);
    std::fs::remove_file(&path).unwrap();
    let v = json(&out);
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["depth"], 5);
    assert_eq!(v["config"]["samples"], 2000);
}

#[test]
fn output_file() {
    let path = std::env::temp_dir().join(format!("linea-cli-out-{}.csv", std::process::id()));
    let out = linea(&[
        "roots",
        "--poly",
        "z-2",
        "--format",
        "csv",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(text, "re,im,residual\n2,0,0\n");
}

#[test]
fn monte_carlo_is_thread_independent() {
    let run = |threads: Option<&str>| {
        let mut args = vec![
            "area",
            "mc",
            "--region",
            "disc:0:0.5",
            "--r-max",
            "50",
            "--samples",
            "20000",
            "--seed",
            "11",
        ];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        let out = linea(&args);
        assert_eq!(out.status.code(), Some(0));
        let mut v = json(&out);
        v["config"]["threads"] = Value::Null;
        v
    };
    let sequential = run(Some("1"));
    assert_eq!(sequential, run(None));
    assert_eq!(sequential, run(Some("3")));

    let other_seed = linea(&[
        "area",
        "mc",
        "--region",
        "disc:0:0.5",
        "--r-max",
        "50",
        "--samples",
        "20000",
        "--seed",
        "12",
    ]);
    assert_ne!(json(&other_seed)["result"], sequential["result"]);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(linea(&["--help"]).status.code(), Some(0));
    assert_eq!(linea(&["--version"]).status.code(), Some(0));
    assert_eq!(linea(&["qd", "pole-fit", "--help"]).status.code(), Some(0));
}

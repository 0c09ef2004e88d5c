use std::path::Path;

use shockfit_cli::{execute, parse_args, run};

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("shockfit").chain(args.iter().copied()).map(String::from).collect()
}

fn outcome(args: &[&str]) -> shockfit_cli::Outcome {
    let cli = parse_args(argv(args)).expect("parses");
    execute(&cli).expect("runs")
}

fn header(body: &str) -> &str {
    body.lines().next().unwrap_or("")
}

#[test]
fn blowup_summary() {
    let o = outcome(&["blowup", "--family", "finite", "--k", "1"]);
    assert_eq!(o.summary, "t*=1 x*=0");
    assert!(o.body.is_empty());
    let o = outcome(&["blowup", "--family", "infinite", "--p", "2", "--r0", "quadratic", "--center", "0.25"]);
    assert_eq!(o.summary, "t*=1 x*=0.25");
}

#[test]
fn csv_schemas() {
    let cases: [(&[&str], &str); 5] = [
        (&["envelope", "--k", "2"], "t,eta_minus,eta_plus,x_plus,x_minus"),
        (
            &["sample-field", "--x-samples", "8", "--tau-samples", "2"],
            "t,x,region,y,u,du_dt,du_dx,denom",
        ),
        (
            &["shock", "--family", "infinite", "--p", "1", "--r0", "quadratic", "--n-steps", "200"],
            "s,t,phi,phi_prime,u_left,u_right,rh_residual,entropy_margin",
        ),
        (&["oracle-compare", "--r", "4:1", "--samples", "8"], "t,phi_ode,phi_lo,abs_diff"),
        (&["branches", "--x-samples", "8"], "t,x,region,y_minus,y_zero,y_plus,y_unique"),
    ];
    for (args, want) in cases {
        let o = outcome(args);
        assert_eq!(header(&o.body), want, "{args:?}");
        assert!(o.body.lines().count() > 1, "{args:?}");
    }
}

#[test]
fn verify_envelope_reports_quarter_exponent() {
    let o = outcome(&["verify", "--family", "finite", "--k", "2", "--lemma", "envelope"]);
    assert!(o.pass, "{}", o.summary);
    let v: serde_json::Value = serde_json::from_str(&o.body).unwrap();
    let fit = &v["entries"][0]["fits"]["eta_half_width"];
    assert!((fit["exponent"].as_f64().unwrap() - 0.25).abs() < 0.005);
}

#[test]
fn shock_json_report() {
    let o = outcome(&[
        "shock", "--family", "infinite", "--p", "1", "--r0", "quadratic", "--n-steps", "200", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&o.body).unwrap();
    assert_eq!(v["regime"], "infinite");
    assert_eq!(v["p"], 1.0);
    assert_eq!(v["grid"]["n_steps"], 200);
    assert!(v["picard"]["sweeps"].as_u64().unwrap() >= 2);
    assert_eq!(v["rows"].as_array().unwrap().len(), 201);
}

#[test]
fn output_is_deterministic() {
    let args = ["shock", "--family", "finite", "--k", "1", "--r", "4:1", "--n-steps", "100"];
    assert_eq!(outcome(&args).body, outcome(&args).body);
}

#[test]
fn exit_codes() {
    assert_eq!(run(argv(&["blowup", "--k", "1"])), 0);
    assert_eq!(run(argv(&["frobnicate"])), 2);
    assert_eq!(run(argv(&["shock", "--no-such-flag"])), 2);
    assert_eq!(run(argv(&["shock", "--k", "0"])), 2);
    assert_eq!(run(argv(&["shock", "--r", "3:1"])), 2);
    assert_eq!(run(argv(&["shock", "--n-steps", "4"])), 2);
    assert_eq!(run(argv(&["envelope", "--tau-min", "-1"])), 2);
    assert_eq!(run(argv(&["envelope", "--out", "/nonexistent-dir/x.csv"])), 2);
    // the stated -1/k shock coefficient is not met by the r = x^4 example
    assert_eq!(run(argv(&["verify", "--r", "4:1", "--lemma", "shock"])), 1);
}

#[test]
fn config_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# flat profile\nfamily = infinite\np = 2\nr0 = quadratic\nn_steps = 120\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_cfg = outcome(&["shock", "--config", cfg]);
    let inline = outcome(&["shock", "--family", "infinite", "--p", "2", "--r0", "quadratic", "--n-steps", "120"]);
    assert_eq!(from_cfg.body, inline.body);
    // explicit flags win over the file
    let over = outcome(&["shock", "--config", cfg, "--n-steps", "60"]);
    assert_eq!(over.body.lines().count(), 62);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "family infinite\n").unwrap();
    assert_eq!(run(argv(&["shock", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(run(argv(&["shock", "--config", "/nonexistent.cfg"])), 2);
}

#[test]
fn writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("env.csv");
    assert_eq!(run(argv(&["envelope", "--samples", "8", "--out", path.to_str().unwrap()])), 0);
    let body = std::fs::read_to_string(Path::new(&path)).unwrap();
    assert_eq!(body.lines().count(), 9);
}

//! End-to-end checks of the command line: exit codes, report formats and
//! reproducibility across thread counts.

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("heatlab").chain(args.iter().copied());
    let code = heatlab_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let (code, out, err) = run(&full);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn exit_codes_separate_usage_from_validation() {
    assert_eq!(run(&["kernel", "kappa", "--n", "1", "--s", "0.5"]).0, 0);
    assert_eq!(run(&["kernel", "kappa", "--n", "1"]).0, 1);
    assert_eq!(run(&["no-such-command"]).0, 1);
    let (code, _, err) = run(&["kernel", "kappa", "--n", "1", "--s", "1.5"]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
}

#[test]
fn kappa_report_is_positive_and_echoes_its_configuration() {
    let v = json(&["kernel", "kappa", "--n", "2", "--s", "0.3"]);
    assert!(v["metadata"].is_object());
    let text = v.to_string();
    assert!(text.contains("kappa"), "{text}");
    let kappa = find_number(&v["payload"], "kappa").expect("kappa in payload");
    assert!(kappa > 0.0 && kappa.is_finite());
}

#[test]
fn symbol_route_of_a_unit_wave_at_the_origin_is_one() {
    let v = json(&["op", "evaluate", "--route", "symbol", "--s", "0.5", "--xi", "1", "--rho", "0", "--point", "0,0"]);
    let value = find_number(&v["payload"], "value").expect("value in payload");
    assert!((value - 1.0).abs() < 1e-12, "{value}");
    let zero = ["op", "evaluate", "--route", "symbol", "--s", "0.5", "--xi", "0", "--rho", "0", "--point", "0,0"];
    assert_eq!(run(&zero).0, 2);
}

#[test]
fn csv_reports_start_with_a_metadata_line() {
    let (code, out, err) = run(&["ctrw", "sample", "--s", "0.5", "--eps", "0.5", "--draws", "5"]);
    assert_eq!(code, 0, "{err}");
    let mut lines = out.lines();
    let meta = lines.next().unwrap();
    assert!(meta.starts_with("# "));
    serde_json::from_str::<Value>(&meta[2..]).unwrap();
    let header = lines.next().unwrap();
    assert!(header.contains("tau"), "{header}");
    assert_eq!(lines.count(), 5);
}

#[test]
fn samples_do_not_depend_on_the_thread_count() {
    let base = ["ctrw", "sample", "--s", "0.4", "--n", "2", "--eps", "0.3", "--draws", "2000", "--seed", "11"];
    let one: Vec<&str> = ["--threads", "1"].iter().chain(&base).copied().collect();
    let eight: Vec<&str> = ["--threads", "8"].iter().chain(&base).copied().collect();
    let (a, b) = (run(&one), run(&eight));
    assert_eq!(a.0, 0, "{}", a.2);
    assert_eq!(a.1, b.1);
}

#[test]
fn seeds_change_the_draws() {
    let a = run(&["ctrw", "sample", "--s", "0.4", "--eps", "0.3", "--draws", "50", "--seed", "1"]).1;
    let b = run(&["ctrw", "sample", "--s", "0.4", "--eps", "0.3", "--draws", "50", "--seed", "2"]).1;
    assert_ne!(a.lines().nth(2), b.lines().nth(2));
}

/// First number stored under `key` anywhere inside `v`.
fn find_number(v: &Value, key: &str) -> Option<f64> {
    match v {
        Value::Object(map) => map.get(key).and_then(Value::as_f64).or_else(|| map.values().find_map(|x| find_number(x, key))),
        Value::Array(items) => items.iter().find_map(|x| find_number(x, key)),
        _ => None,
    }
}

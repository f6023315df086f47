//! Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
//! any fails.

fn main() {
    let verdicts = cauchy_source_validation::run_all();
    for v in &verdicts {
        println!("{}", v.line);
    }
    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| v.label.as_str())
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", verdicts.len());
    } else {
        println!(
            "acceptance: {} of {} criteria failed",
            failed.len(),
            verdicts.len()
        );
        std::process::exit(1);
    }
}

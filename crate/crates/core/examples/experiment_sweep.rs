// A seeded multi-realization sweep over the user count, written as trace
// CSVs plus `summary.json`. The same config runs through `ammmse run`.

use ammmse::harness::{parse_experiment, run_experiment};

const CONFIG: &str = r#"{
    "M": 16, "N": 2, "K": 4, "d": 2, "snr_db": 10,
    "algorithm": ["wmmse", "mmmse", "ammmse"],
    "n_realizations": 4,
    "sweep": [{ "param": "K", "values": [2, 4, 6] }],
    "verify": true
}"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let out = tempfile::tempdir()?;
    let mut spec = parse_experiment(CONFIG)?;
    spec.output_dir = out.path().to_path_buf();
    let summary = run_experiment(&spec)?;

    println!("{:<6} {:<7} {:>10} {:>8} {:>8}", "point", "algo", "wsr_bpcu", "iters", "oracles");
    for c in &summary.configs {
        let wsr = c.final_wsr_bits.map_or(f64::NAN, |s| s.mean);
        let iters = c.iterations.map_or(f64::NAN, |s| s.mean);
        let ok = c.oracle_reports.iter().all(|o| o.passed);
        println!("{:<6} {:<7} {wsr:>10.3} {iters:>8.1} {:>8}", c.label, c.algorithm, if ok { "pass" } else { "FAIL" });
    }
    let files = std::fs::read_dir(out.path())?.count();
    println!("{files} files written");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// Smoothness constant, safe step and iterate bounds of one instance, checked
// against every recorded iterate of a run with the safe step.

use ammmse::model::generate_instance;
use ammmse::solvers::solve;
use ammmse::verify::check_lemma_bounds;
use ammmse::{Algorithm, SolverOptions, StepSize, SystemConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SystemConfig::new(16, 2, 4, 2, 10.0)?.with_seeds(11, 12);
    let channels = generate_instance(&cfg)?;
    let opts = SolverOptions {
        gamma: StepSize::Safe,
        omega: 0.0,
        eps1: f64::INFINITY,
        record_iterates: true,
        ..SolverOptions::new(Algorithm::Ammmse)
    };
    let result = solve(&channels, &cfg, &opts)?;
    let b = &result.bounds;
    println!("kappa {:.4}  l_v {:.4e}  gamma_safe {:.4e}  E_k floor {:.4e}", b.kappa, b.l_v, b.gamma_safe, b.ek_floor);
    println!("||U_k||^2 <= {:.4e}, ||W_k||^2 <= {:.4e}", b.u_fro_sq_bound(cfg.d), b.w_fro_sq_bound(cfg.d));

    let increases = result.trace.windows(2).filter(|w| w[1].f_value > w[0].f_value + 1e-9).count();
    println!("{} iterations, {increases} objective increases", result.iterations);

    let report = check_lemma_bounds(&channels, &result.iterates, &cfg.weights, b);
    println!(
        "bounds on {} iterates: {} ({} violations)",
        report.instances,
        if report.passed { "hold" } else { "violated" },
        report.failures.len()
    );
    println!("stationarity residual {:.3e}", result.stationarity_residual);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

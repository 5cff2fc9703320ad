// A-MMMSE replaces the exact precoder update with one projected gradient
// step at an extrapolated point. Tabulated `(omega, gamma)` against the
// conservative `gamma_safe` without extrapolation.

use ammmse::harness::tabulated_ammmse_parameters;
use ammmse::model::generate_instance;
use ammmse::solvers::run_ammmse;
use ammmse::{Algorithm, SolverOptions, StepSize, SystemConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for snr in [0.0, 10.0, 20.0] {
        let cfg = SystemConfig::new(32, 2, 8, 2, snr)?.with_seeds(3, 4);
        let channels = generate_instance(&cfg)?;
        let (omega, gamma) = tabulated_ammmse_parameters(snr);
        let tuned = SolverOptions { gamma: StepSize::Fixed(gamma), omega, ..SolverOptions::new(Algorithm::Ammmse) };
        let safe = SolverOptions { gamma: StepSize::Safe, omega: 0.0, ..SolverOptions::new(Algorithm::Ammmse) };
        let a = run_ammmse(&channels, &cfg, &tuned)?;
        let b = run_ammmse(&channels, &cfg, &safe)?;
        println!(
            "{snr:>4} dB  tuned (omega {omega}, gamma {gamma}): {:>4} iters {:.3} bpcu | safe (gamma {:.2e}): {:>4} iters {:.3} bpcu",
            a.iterations,
            a.final_wsr_bits(),
            b.gamma,
            b.iterations,
            b.final_wsr_bits(),
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

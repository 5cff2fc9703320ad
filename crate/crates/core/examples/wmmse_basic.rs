// Draw one Rayleigh instance and maximize its weighted sum rate with WMMSE.

use ammmse::model::generate_instance;
use ammmse::solvers::run_wmmse;
use ammmse::{Algorithm, SolverOptions, SystemConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // 16 BS antennas, 4 users with 2 antennas and 2 streams each, 10 dB
    let cfg = SystemConfig::new(16, 2, 4, 2, 10.0)?.with_seeds(7, 8);
    let channels = generate_instance(&cfg)?;
    println!("noise power {:.4e}", channels.noise_power()?);

    let result = run_wmmse(&channels, &cfg, &SolverOptions::new(Algorithm::Wmmse))?;
    println!("initial WSR {:.4} bpcu", result.initial_wsr_bits);
    for rec in &result.trace {
        println!("iter {:>3}  wsr {:>9.4}  f {:>9.4}  power {:.4}", rec.t, rec.wsr_bits, rec.f_value, rec.total_power);
    }
    println!(
        "converged: {} after {} iterations, final WSR {:.4} bpcu",
        result.converged,
        result.iterations,
        result.final_wsr_bits()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// MMMSE runs unweighted sum-MSE minimization until the relative WSR change
// drops below `eps1`, then continues as WMMSE. Compare iteration counts on
// shared channels.

use ammmse::model::generate_instance;
use ammmse::solvers::solve;
use ammmse::{Algorithm, SolverOptions, Stage, SystemConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut totals = [0usize; 2];
    for seed in 0..5 {
        let cfg = SystemConfig::new(32, 4, 6, 4, 10.0)?.with_seeds(seed, 100 + seed);
        let channels = generate_instance(&cfg)?;
        let wmmse = solve(&channels, &cfg, &SolverOptions::new(Algorithm::Wmmse))?;
        let mmmse = solve(&channels, &cfg, &SolverOptions::new(Algorithm::Mmmse))?;
        let unweighted = mmmse.trace.iter().filter(|r| r.stage == Stage::Unweighted).count();
        println!(
            "seed {seed}: WMMSE {:>3} iters {:.3} bpcu | MMMSE {:>3} iters ({unweighted} unweighted, switch at {:?}) {:.3} bpcu",
            wmmse.iterations,
            wmmse.final_wsr_bits(),
            mmmse.iterations,
            mmmse.switch_iteration,
            mmmse.final_wsr_bits(),
        );
        totals[0] += wmmse.iterations;
        totals[1] += mmmse.iterations;
    }
    println!("total iterations: WMMSE {}, MMMSE {}", totals[0], totals[1]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// Independent checks: finite-difference gradient, projected-gradient
// reference for the exact precoder update, and single-user water-filling.

use ammmse::model::{generate_instance, init_precoders};
use ammmse::objective::user_rate;
use ammmse::solvers::{project_sum_power, solve, update_receivers, update_weight_matrices};
use ammmse::verify::{exact_solver_check, gradient_check, single_user_waterfilling, tight_bisection};
use ammmse::{Algorithm, SolverOptions, SystemConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SystemConfig::new(8, 2, 4, 2, 10.0)?.with_seeds(21, 22);
    let channels = generate_instance(&cfg)?;
    let sigma2 = channels.noise_power()?;
    let v = init_precoders(&cfg, project_sum_power);
    let u = update_receivers(&channels, &v, sigma2)?;
    let w = update_weight_matrices(&channels, &u, &v)?;

    let grad = gradient_check(&channels, &u, &w, &v, &cfg.weights);
    println!("gradient vs central differences: rel err {:.3e}", grad.max_rel_error);

    let opts = tight_bisection(&SolverOptions::new(Algorithm::Wmmse));
    let cmp = exact_solver_check(&channels, &u, &w, &cfg.weights, cfg.p_max, &opts);
    println!(
        "exact update vs reference: objective diff {:.3e}, precoder rel diff {:.3e}, lambda {:.4e}",
        cmp.objective_abs_diff, cmp.precoder_rel_diff, cmp.lambda
    );

    let single = SystemConfig::new(4, 4, 1, 4, 10.0)?.with_seeds(5, 6);
    let ch = generate_instance(&single)?;
    let opts = SolverOptions { eps2: 1e-10, max_iters: 10_000, ..SolverOptions::new(Algorithm::Wmmse) };
    let r = solve(&ch, &single, &opts)?;
    let rate = user_rate(ch.channel(0), &r.final_precoders, ch.noise_power()?, 0)?;
    let (capacity, _) = single_user_waterfilling(ch.channel(0), single.p_max, ch.noise_power()?, single.d);
    println!("single user: WMMSE {rate:.6} nats, water-filling {capacity:.6} nats");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

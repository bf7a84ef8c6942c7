//! Average many monitored trajectories and compare the ensemble mean with
//! the unconditional master equation solved deterministically.

use nmq::algebra::{trace_distance, BlockState};
use nmq::engines::{monte_carlo_mean, solve_coupled_me, McEngine, ReducedOpts};
use nmq::models::{reference_init, reference_model};

fn main() -> nmq::Result<()> {
    let spec = reference_model();
    let init = reference_init();
    let binit = BlockState::from_composite(&spec, &init)?;
    let (dt, n_steps, n_traj) = (1e-3, 2000, 400);

    let mc = monte_carlo_mean(
        &spec,
        &McEngine::CoupledBlocks,
        &init,
        2024,
        n_traj,
        0.0,
        dt,
        n_steps,
        false,
        &ReducedOpts::default(),
    )?;
    let me = solve_coupled_me(&spec, &binit, 0.0, dt, n_steps)?;

    let mut sup = 0.0f64;
    for (a, b) in mc.mean_principal.iter().zip(&me.principal) {
        sup = sup.max(trace_distance(a, b)?);
    }
    let sup_se = mc.se.iter().fold(0.0f64, |a, &b| a.max(b));
    println!("{} of {} trajectories completed", mc.n_completed, mc.n_requested);
    println!("sup trace distance to the master equation: {sup:.3e}");
    println!("sup standard error of the mean:            {sup_se:.3e}");
    Ok(())
}

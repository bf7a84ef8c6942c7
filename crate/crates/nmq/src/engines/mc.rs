//! Monte Carlo averaging over measurement trajectories, parallelized in
//! fixed batches with index-ordered accumulation so results do not depend
//! on the worker count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algebra::{BlockState, CMat, ModelSpec};
use crate::error::{Error, Result};
use crate::sde::{derive_seed, wiener_path};
use crate::superop::ProjectorKind;

use super::stochastic::{run_coupled_blocks, run_full_sme, run_reduced_diag, run_reduced_p};
use super::ReducedOpts;

/// Fraction of aborted trajectories above which the whole run fails.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

const BATCH: usize = 32;

#[derive(Clone, Debug)]
pub enum McEngine {
    FullSme,
    CoupledBlocks,
    ReducedDiag,
    ReducedP(ProjectorKind),
}

impl McEngine {
    pub fn name(&self) -> &'static str {
        match self {
            McEngine::FullSme => "full-sme",
            McEngine::CoupledBlocks => "coupled-blocks",
            McEngine::ReducedDiag => "reduced-diag",
            McEngine::ReducedP(_) => "reduced-p",
        }
    }
}

#[derive(Clone, Debug)]
pub struct McResult {
    pub engine: String,
    pub times: Vec<f64>,
    pub mean_principal: Vec<CMat>,
    /// Aggregate standard error of the principal-state entries at each time.
    pub se: Vec<f64>,
    pub n_requested: usize,
    pub n_completed: usize,
    pub aborted_seeds: Vec<u64>,
}

/// Average the conditional principal state over `n_traj` trajectories with
/// per-trajectory seeds derived from `master_seed`.
pub fn monte_carlo_mean(
    spec: &ModelSpec,
    engine: &McEngine,
    init: &CMat,
    master_seed: u64,
    n_traj: usize,
    t0: f64,
    dt: f64,
    n_steps: usize,
    renorm: bool,
    opts: &ReducedOpts,
) -> Result<McResult> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be >= 1".into()));
    }
    let block_init = BlockState::from_composite(spec, init)?;
    let run_one = |seed: u64| -> Result<Vec<CMat>> {
        let path = wiener_path(seed, t0, dt, n_steps)?;
        Ok(match engine {
            McEngine::FullSme => run_full_sme(spec, init, &path, renorm)?.principal,
            McEngine::CoupledBlocks => {
                run_coupled_blocks(spec, &block_init, &path, renorm)?.principal
            }
            McEngine::ReducedDiag => run_reduced_diag(spec, &block_init, &path, opts)?.0.principal,
            McEngine::ReducedP(kind) => {
                run_reduced_p(spec, kind, init, &path, opts)?.0.principal
            }
        })
    };

    let n_points = n_steps + 1;
    let mut sums = vec![CMat::zeros(spec.n_s, spec.n_s); n_points];
    let mut sumsq = vec![DMatrix::<f64>::zeros(spec.n_s, spec.n_s); n_points];
    let mut aborted_seeds = Vec::new();

    let mut index = 0usize;
    while index < n_traj {
        let upper = (index + BATCH).min(n_traj);
        let batch: Vec<(u64, Result<Vec<CMat>>)> = (index..upper)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(master_seed, i as u64);
                (seed, run_one(seed))
            })
            .collect();
        // Accumulate strictly in trajectory order.
        for (seed, outcome) in batch {
            match outcome {
                Ok(series) => {
                    for (n, rho) in series.iter().enumerate() {
                        sums[n] += rho;
                        for i in 0..spec.n_s {
                            for j in 0..spec.n_s {
                                sumsq[n][(i, j)] += rho[(i, j)].norm_sqr();
                            }
                        }
                    }
                }
                Err(_) => aborted_seeds.push(seed),
            }
        }
        index = upper;
    }

    let n_completed = n_traj - aborted_seeds.len();
    let abort_fraction = aborted_seeds.len() as f64 / n_traj as f64;
    if abort_fraction > MAX_ABORT_FRACTION {
        return Err(Error::CheckFailed(format!(
            "{} of {} trajectories aborted ({:.1}% > {:.0}%); seeds {:?}",
            aborted_seeds.len(),
            n_traj,
            100.0 * abort_fraction,
            100.0 * MAX_ABORT_FRACTION,
            &aborted_seeds[..aborted_seeds.len().min(8)],
        )));
    }
    if n_completed == 0 {
        return Err(Error::CheckFailed("no trajectory completed".into()));
    }

    let nf = n_completed as f64;
    let mean_principal: Vec<CMat> = sums.into_iter().map(|s| s / crate::algebra::c(nf, 0.)).collect();
    let se: Vec<f64> = sumsq
        .iter()
        .zip(&mean_principal)
        .map(|(sq, mean)| {
            if n_completed < 2 {
                return f64::NAN;
            }
            let mut var_total = 0.0;
            for i in 0..spec.n_s {
                for j in 0..spec.n_s {
                    let var = (sq[(i, j)] / nf - mean[(i, j)].norm_sqr()).max(0.0);
                    var_total += var;
                }
            }
            (var_total / nf).sqrt()
        })
        .collect();

    Ok(McResult {
        engine: engine.name().to_string(),
        times: (0..=n_steps).map(|n| t0 + n as f64 * dt).collect(),
        mean_principal,
        se,
        n_requested: n_traj,
        n_completed,
        aborted_seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::trace_distance;
    use crate::engines::solve_coupled_me;
    use crate::models::{reference_init, reference_model};

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let spec = reference_model();
        let init = reference_init();
        let opts = ReducedOpts::default();
        let a = monte_carlo_mean(&spec, &McEngine::CoupledBlocks, &init, 7, 48, 0.0, 2e-3, 100, false, &opts)
            .unwrap();
        let b = monte_carlo_mean(&spec, &McEngine::CoupledBlocks, &init, 7, 48, 0.0, 2e-3, 100, false, &opts)
            .unwrap();
        assert_eq!(a.mean_principal, b.mean_principal);
        assert_eq!(a.se, b.se);
    }

    #[test]
    fn no_probe_means_zero_variance() {
        let mut spec = reference_model();
        spec.l0 = crate::algebra::ScheduledOp::zero(2);
        let init = reference_init();
        let res = monte_carlo_mean(
            &spec,
            &McEngine::FullSme,
            &init,
            3,
            16,
            0.0,
            1e-3,
            200,
            false,
            &ReducedOpts::default(),
        )
        .unwrap();
        // One-pass variance accumulation has a cancellation floor near
        // sqrt(machine epsilon) for O(1) entries.
        for s in &res.se {
            assert!(*s < 1e-7, "SE {s} for a deterministic model");
        }
    }

    #[test]
    fn mean_tracks_noise_averaged_solution() {
        let spec = reference_model();
        let init = reference_init();
        let binit = BlockState::from_composite(&spec, &init).unwrap();
        let dt = 2e-3;
        let n = 500;
        let res = monte_carlo_mean(
            &spec,
            &McEngine::CoupledBlocks,
            &init,
            2025,
            200,
            0.0,
            dt,
            n,
            false,
            &ReducedOpts::default(),
        )
        .unwrap();
        let det = solve_coupled_me(&spec, &binit, 0.0, dt, n).unwrap();
        let mut sup_err = 0.0f64;
        let mut sup_se = 0.0f64;
        for step in 0..=n {
            sup_err = sup_err
                .max(trace_distance(&res.mean_principal[step], &det.principal[step]).unwrap());
            sup_se = sup_se.max(res.se[step]);
        }
        let bound = (3.0 * sup_se).max(0.05);
        assert!(sup_err <= bound, "sup error {sup_err:.3e} exceeds {bound:.3e}");
    }

    #[test]
    fn widespread_aborts_fail_the_run() {
        let spec = reference_model();
        let init = reference_init();
        // A step size far above the stability limit aborts every trajectory.
        let err = monte_carlo_mean(
            &spec,
            &McEngine::FullSme,
            &init,
            1,
            8,
            0.0,
            1.0,
            2000,
            false,
            &ReducedOpts::default(),
        );
        assert!(matches!(err, Err(Error::CheckFailed(_))));
    }
}

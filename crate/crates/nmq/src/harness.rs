//! Cross-validation harness: every structural identity between the engines
//! is turned into an executable comparison with a declared tolerance, plus
//! convergence-order estimation over step-size sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{block, trace_distance, BlockState, CMat, CVec, ModelSpec};
use crate::engines::{
    kernel_dump, monte_carlo_mean, run_coupled_blocks, run_full_sme, run_reduced_diag,
    run_reduced_p, solve_coupled_me, KernelFormulation, McEngine, ReducedOpts, StateSeries,
    TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::models::{decoupled_variant, principal_only};
use crate::sde::{
    derive_seed, propagate_stoch_exp, variation_of_constants, wiener_path, NoisePath,
    DEFAULT_REINVERSION_PERIOD,
};
use crate::superop::{
    block_generators, projector_p, restrict, vectorize, Fault, ProjectorKind, Restriction,
};

/// Central tolerance configuration; one source of truth for every check.
#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    /// Identities that hold exactly in exact arithmetic.
    pub algebraic_identity: f64,
    /// ‖Φ Φ⁻¹ − I‖_F along stored propagator paths.
    pub propagator_inverse: f64,
    /// Minimum acceptable observed strong convergence order.
    pub min_strong_order: f64,
    /// Width of statistical acceptance bands, in standard errors.
    pub se_band: f64,
    /// Floor below which statistical comparisons are considered passed.
    pub statistical_floor: f64,
    /// Reduced-vs-coupled agreement between the two reduced formulations.
    pub cross_formulation: f64,
    /// Reduced-vs-coupled sup trace distance at the finest step size.
    pub elimination_sup: f64,
    /// Time-nonlocal solver vs projected reference solution.
    pub nz_exactness: f64,
    /// Projection-algebra identities on random matrices.
    pub projection_algebra: f64,
    /// |trace − 1| drift bound without renormalization at dt = 1e-4.
    pub trace_drift_bound: f64,
    /// Stepwise agreement with the principal-only equation when the
    /// auxiliary decouples.
    pub degeneration_stepwise: f64,
    /// Kernel sup norm for a decoupled model.
    pub kernel_vanishing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic_identity: 1e-9,
            propagator_inverse: 1e-6,
            min_strong_order: 0.4,
            se_band: 3.0,
            statistical_floor: 0.05,
            cross_formulation: 1e-8,
            elimination_sup: 1e-2,
            nz_exactness: 1e-6,
            projection_algebra: 1e-12,
            trace_drift_bound: 1e-3,
            degeneration_stepwise: 1e-9,
            kernel_vanishing: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OrderFit {
    pub slope: f64,
    /// RMS residual of the least-squares fit in log-log space.
    pub residual: f64,
}

/// Outcome of one comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub metric: String,
    pub dt: Option<f64>,
    /// Error series over the grid (thinned to at most ~400 samples).
    pub per_time: Vec<f64>,
    pub sup_error: f64,
    pub order: Option<OrderFit>,
    pub tolerance: f64,
    pub passed: bool,
}

impl ComparisonReport {
    fn from_series(metric: &str, dt: f64, series: Vec<f64>, tolerance: f64) -> Self {
        let sup = series.iter().cloned().fold(0.0f64, f64::max);
        Self {
            metric: metric.to_string(),
            dt: Some(dt),
            per_time: thin(series),
            sup_error: sup,
            order: None,
            tolerance,
            passed: sup <= tolerance,
        }
    }

    pub fn one_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let dt = self.dt.map(|d| format!(" dt={d:.1e}")).unwrap_or_default();
        let order = self
            .order
            .map(|o| format!(" order={:.3} (residual {:.2e})", o.slope, o.residual))
            .unwrap_or_default();
        format!(
            "[{status}] {}{dt}: sup error {:.3e} vs tolerance {:.3e}{order}",
            self.metric, self.sup_error, self.tolerance
        )
    }
}

fn thin(mut series: Vec<f64>) -> Vec<f64> {
    const MAX: usize = 400;
    if series.len() > MAX {
        let stride = series.len().div_ceil(MAX);
        series = series.iter().step_by(stride).cloned().collect();
    }
    series
}

/// Least-squares slope of log(error) against log(dt).
pub fn convergence_order(dts: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if dts.len() != errors.len() || dts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 (dt, error) pairs, got {} and {}",
            dts.len(),
            errors.len()
        )));
    }
    if errors.iter().any(|&e| e <= 0.0) || dts.iter().any(|&d| d <= 0.0) {
        return Err(Error::InvalidArgument("dt and error values must be positive".into()));
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit { slope, residual })
}

/// Configuration of a consistency-suite run.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub master_seed: u64,
    /// Step sizes, strictly descending; each must be an integer multiple of
    /// the last (finest) entry.
    pub dt_list: Vec<f64>,
    pub horizon: f64,
    /// Trajectory count for the noise-averaged closure check.
    pub n_traj: usize,
    /// Corruption injected into the reduced diagonal engine (negative
    /// control): the elimination checks must then fail.
    pub fault: Option<Fault>,
}

fn block_series(r: &TrajectoryRecord) -> Result<&Vec<BlockState>> {
    match &r.states {
        StateSeries::Blocks(v) => Ok(v),
        _ => Err(Error::InvalidArgument("expected block states".into())),
    }
}

fn composite_series(r: &TrajectoryRecord) -> Result<&Vec<CMat>> {
    match &r.states {
        StateSeries::Composite(v) => Ok(v),
        _ => Err(Error::InvalidArgument("expected composite states".into())),
    }
}

/// Off-diagonal-stack reconstruction error: the eliminated component is
/// rebuilt by variation of constants along the coupled trajectory and
/// compared with the directly integrated stack.
pub fn offdiag_reconstruction_error(
    spec: &ModelSpec,
    coupled: &TrajectoryRecord,
    path: &NoisePath,
) -> Result<f64> {
    let blocks = block_series(coupled)?;
    let gens0 = block_generators(spec, path.t0)?;
    let constant = spec.is_time_constant();
    let n = path.n_steps();
    let diag: Vec<CVec> = blocks.iter().map(|b| b.diag_stack()).collect();
    let scalars: Vec<f64> = (0..=n)
        .map(|m| {
            if constant {
                Ok(gens0.scalar(&diag[m]))
            } else {
                Ok(block_generators(spec, path.t0 + m as f64 * path.dt)?.scalar(&diag[m]))
            }
        })
        .collect::<Result<_>>()?;
    let source: Vec<CVec> = (0..=n)
        .map(|m| {
            if constant {
                Ok(&gens0.a00 * &diag[m])
            } else {
                Ok(&block_generators(spec, path.t0 + m as f64 * path.dt)?.a00 * &diag[m])
            }
        })
        .collect::<Result<_>>()?;
    let prop = propagate_stoch_exp(
        &|t| {
            if constant {
                gens0.a01.clone()
            } else {
                block_generators(spec, t).expect("validated model").a01
            }
        },
        &|t| {
            if constant {
                gens0.b01_linear.clone()
            } else {
                block_generators(spec, t).expect("validated model").b01_linear
            }
        },
        &|m, _| scalars[m],
        path,
        DEFAULT_REINVERSION_PERIOD,
    )?;
    let voc = variation_of_constants(&prop, &source, &blocks[0].offdiag_stack())?;
    Ok((0..=n)
        .map(|m| (&voc[m] - blocks[m].offdiag_stack()).norm())
        .fold(0.0, f64::max))
}

/// Eliminated-component reconstruction in the projector formulation: the
/// Q-part of the full trajectory is rebuilt by variation of constants.
fn q_reconstruction_error(
    spec: &ModelSpec,
    full: &TrajectoryRecord,
    path: &NoisePath,
) -> Result<f64> {
    let states = composite_series(full)?;
    let (p, q) = projector_p(spec, &ProjectorKind::BlockDiagonal)?;
    let lmat = crate::superop::lindbladian(spec, path.t0)?;
    let g = crate::superop::g_superop(spec, path.t0);
    let lqq = restrict(&lmat, &p, &q, Restriction::Qq)?.matrix;
    let lqp = restrict(&lmat, &p, &q, Restriction::Qp)?.matrix;
    let qgq = restrict(&g, &p, &q, Restriction::Qq)?.matrix;
    if !spec.is_time_constant() {
        return Err(Error::InvalidArgument(
            "q-reconstruction oracle requires a time-constant model".into(),
        ));
    }
    let n = path.n_steps();
    let l0 = spec.l0_composite(path.t0);
    let quad = &l0 + l0.adjoint();
    let vecs: Vec<CVec> = states.iter().map(vectorize).collect();
    let scalars: Vec<f64> = vecs
        .iter()
        .map(|v| {
            let d = spec.dim();
            let mut acc = crate::algebra::c(0., 0.);
            for i in 0..d {
                for j in 0..d {
                    acc += quad[(i, j)] * v[i * d + j];
                }
            }
            acc.re
        })
        .collect();
    let source: Vec<CVec> = vecs.iter().map(|v| &lqp * (&p.matrix * v)).collect();
    let prop = propagate_stoch_exp(
        &|_| lqq.clone(),
        &|_| qgq.clone(),
        &|m, _| scalars[m],
        path,
        DEFAULT_REINVERSION_PERIOD,
    )?;
    let voc = variation_of_constants(&prop, &source, &(&q.matrix * &vecs[0]))?;
    Ok((0..=n)
        .map(|m| (&voc[m] - &q.matrix * &vecs[m]).norm())
        .fold(0.0, f64::max))
}

struct PerDtOutcome {
    reports: Vec<ComparisonReport>,
    elimination_error: f64,
    offdiag_oracle_error: f64,
    q_oracle_error: f64,
}

fn run_checks_at_dt(
    spec: &ModelSpec,
    init: &CMat,
    path: &NoisePath,
    finest_dt: f64,
    fault: Option<Fault>,
    tol: &Tolerances,
) -> Result<PerDtOutcome> {
    let dt = path.dt;
    let scale = dt / finest_dt;
    let n = path.n_steps();
    let binit = BlockState::from_composite(spec, init)?;

    let full = run_full_sme(spec, init, path, false)?;
    let coupled = run_coupled_blocks(spec, &binit, path, false)?;
    let reduced_opts = ReducedOpts { fault, ..Default::default() };
    let (reduced, _) = run_reduced_diag(spec, &binit, path, &reduced_opts)?;
    let (reduced_pform, _) =
        run_reduced_p(spec, &ProjectorKind::BlockDiagonal, init, path, &ReducedOpts::default())?;

    let mut reports = Vec::new();

    // Identical discrete recursions in two encodings.
    let fs = composite_series(&full)?;
    let cs = block_series(&coupled)?;
    let series: Vec<f64> = (0..=n)
        .map(|m| {
            let mut e: f64 = (full.record_y[m] - coupled.record_y[m]).abs();
            for j in 0..spec.n_a {
                for k in 0..spec.n_a {
                    let want = block(spec, &fs[m], j, k)?;
                    e = e.max((want - cs[m].get(j, k)).camax());
                }
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;
    reports.push(ComparisonReport::from_series(
        "block-equivalence",
        dt,
        series,
        tol.algebraic_identity,
    ));

    // Elimination of the off-diagonal stack (memory-kernel form).
    let rs = block_series(&reduced)?;
    let series: Vec<f64> = (0..=n)
        .map(|m| trace_distance(&coupled.principal[m], &reduced.principal[m]))
        .collect::<Result<_>>()?;
    let elimination_error = series.iter().cloned().fold(0.0f64, f64::max);
    reports.push(ComparisonReport::from_series(
        "elimination-consistency",
        dt,
        series,
        tol.elimination_sup * scale,
    ));

    // The two reduced formulations agree at fixed dt.
    let ps = composite_series(&reduced_pform)?;
    let series: Vec<f64> = (0..=n)
        .map(|m| {
            let mut e: f64 = (reduced.record_y[m] - reduced_pform.record_y[m]).abs();
            for j in 0..spec.n_a {
                let want = block(spec, &ps[m], j, j)?;
                e = e.max((want - rs[m].get(j, j)).camax());
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;
    reports.push(ComparisonReport::from_series(
        "cross-formulation",
        dt,
        series,
        tol.cross_formulation,
    ));

    // Variation-of-constants oracles for the eliminated component.
    let offdiag_oracle_error = offdiag_reconstruction_error(spec, &coupled, path)?;
    reports.push(ComparisonReport {
        metric: "offdiag-reconstruction".into(),
        dt: Some(dt),
        per_time: vec![],
        sup_error: offdiag_oracle_error,
        order: None,
        tolerance: tol.elimination_sup * scale,
        passed: offdiag_oracle_error <= tol.elimination_sup * scale,
    });
    let q_oracle_error = q_reconstruction_error(spec, &full, path)?;
    reports.push(ComparisonReport {
        metric: "q-reconstruction".into(),
        dt: Some(dt),
        per_time: vec![],
        sup_error: q_oracle_error,
        order: None,
        tolerance: tol.elimination_sup * scale,
        passed: q_oracle_error <= tol.elimination_sup * scale,
    });

    Ok(PerDtOutcome { reports, elimination_error, offdiag_oracle_error, q_oracle_error })
}

/// Run every structural comparison between the engines over a step-size
/// sweep, returning one report per check per dt plus order fits and the
/// global (dt-independent) checks.
pub fn consistency_suite(
    spec: &ModelSpec,
    init: &CMat,
    config: &SuiteConfig,
    tol: &Tolerances,
) -> Result<Vec<ComparisonReport>> {
    if config.dt_list.is_empty() {
        return Err(Error::InvalidArgument("dt list must not be empty".into()));
    }
    for w in config.dt_list.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidArgument("dt list must be strictly descending".into()));
        }
    }
    let finest = *config.dt_list.last().expect("non-empty");
    let n_finest = (config.horizon / finest).round();
    if ((config.horizon / finest) - n_finest).abs() > 1e-9 * n_finest.max(1.0) {
        return Err(Error::Grid(format!(
            "horizon {} is not an integer multiple of the finest dt {finest}",
            config.horizon
        )));
    }
    let factors: Vec<usize> = config
        .dt_list
        .iter()
        .map(|&dt| {
            let f = dt / finest;
            if (f - f.round()).abs() > 1e-9 {
                return Err(Error::Grid(format!(
                    "dt {dt} is not an integer multiple of the finest dt {finest}"
                )));
            }
            Ok(f.round() as usize)
        })
        .collect::<Result<_>>()?;

    let fine_path = wiener_path(derive_seed(config.master_seed, 0), 0.0, finest, n_finest as usize)?;

    // Per-dt comparisons run in parallel; each is internally sequential.
    let outcomes: Vec<PerDtOutcome> = factors
        .par_iter()
        .map(|&factor| {
            let path = fine_path.coarsen(factor)?;
            run_checks_at_dt(spec, init, &path, finest, config.fault, tol)
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::new();
    for o in &outcomes {
        reports.extend(o.reports.iter().cloned());
    }

    // Order fits across the sweep.
    if config.dt_list.len() >= 3 {
        let fits = [
            ("elimination-order", outcomes.iter().map(|o| o.elimination_error).collect::<Vec<_>>()),
            ("offdiag-reconstruction-order", outcomes.iter().map(|o| o.offdiag_oracle_error).collect()),
            ("q-reconstruction-order", outcomes.iter().map(|o| o.q_oracle_error).collect()),
        ];
        for (name, errors) in fits {
            let report = match convergence_order(&config.dt_list, &errors) {
                Ok(fit) => ComparisonReport {
                    metric: name.into(),
                    dt: None,
                    per_time: errors.clone(),
                    sup_error: errors.iter().cloned().fold(0.0, f64::max),
                    order: Some(fit),
                    tolerance: tol.min_strong_order,
                    passed: fit.slope >= tol.min_strong_order,
                },
                // All-zero errors (e.g. a decoupled model): nothing to fit,
                // and the comparison is exact.
                Err(_) => ComparisonReport {
                    metric: name.into(),
                    dt: None,
                    per_time: errors.clone(),
                    sup_error: errors.iter().cloned().fold(0.0, f64::max),
                    order: None,
                    tolerance: tol.algebraic_identity,
                    passed: errors.iter().all(|&e| e <= tol.algebraic_identity),
                },
            };
            reports.push(report);
        }
    }

    // Trace drift without renormalization, at the finest step size.
    {
        let binit = BlockState::from_composite(spec, init)?;
        let coupled = run_coupled_blocks(spec, &binit, &fine_path, false)?;
        let series: Vec<f64> = coupled.traces.iter().map(|t| (t - 1.0).abs()).collect();
        reports.push(ComparisonReport::from_series(
            "trace-drift",
            finest,
            series,
            tol.trace_drift_bound,
        ));
    }

    // Noise-averaged closure at the coarsest step size.
    {
        let coarsest = config.dt_list[0];
        let n = (config.horizon / coarsest).round() as usize;
        let mc = monte_carlo_mean(
            spec,
            &McEngine::CoupledBlocks,
            init,
            config.master_seed,
            config.n_traj,
            0.0,
            coarsest,
            n,
            false,
            &ReducedOpts::default(),
        )?;
        let binit = BlockState::from_composite(spec, init)?;
        let det = solve_coupled_me(spec, &binit, 0.0, coarsest, n)?;
        let series: Vec<f64> = (0..=n)
            .map(|m| trace_distance(&mc.mean_principal[m], &det.principal[m]))
            .collect::<Result<_>>()?;
        let sup_se = mc.se.iter().cloned().fold(0.0f64, f64::max);
        let bound = (tol.se_band * sup_se).max(tol.statistical_floor);
        reports.push(ComparisonReport::from_series("unconditional-closure", coarsest, series, bound));
    }

    // Degeneration to the principal-only equation when the auxiliary
    // decouples, plus the vanishing of its memory kernel.
    {
        let dspec = decoupled_variant(spec);
        let pspec = principal_only(spec);
        let pinit = crate::algebra::partial_trace_aux(init, spec.n_s, spec.n_a)?;
        let dfull = run_full_sme(&dspec, init, &fine_path, false)?;
        let pfull = run_full_sme(&pspec, &pinit, &fine_path, false)?;
        let series: Vec<f64> = (0..=fine_path.n_steps())
            .map(|m| {
                (dfull.principal[m].clone() - &pfull.principal[m])
                    .camax()
                    .max((dfull.record_y[m] - pfull.record_y[m]).abs())
            })
            .collect();
        reports.push(ComparisonReport::from_series(
            "markovian-degeneration",
            finest,
            series,
            tol.degeneration_stepwise,
        ));

        let t_mid = config.horizon / 2.0;
        let t_mid = (t_mid / finest).round() * finest;
        let eval = kernel_dump(
            &dspec,
            &KernelFormulation::Block,
            init,
            &fine_path,
            &[t_mid, config.horizon],
            &[0.0, t_mid],
            &ReducedOpts::default(),
        )?;
        let sup = eval.mats.iter().map(|m| m.norm()).fold(0.0f64, f64::max);
        reports.push(ComparisonReport {
            metric: "kernel-vanishing".into(),
            dt: Some(finest),
            per_time: eval.mats.iter().map(|m| m.norm()).collect(),
            sup_error: sup,
            order: None,
            tolerance: tol.kernel_vanishing,
            passed: sup <= tol.kernel_vanishing,
        });
    }

    Ok(reports)
}

/// True if any report failed (drives nonzero exit codes).
pub fn has_failures(reports: &[ComparisonReport]) -> bool {
    reports.iter().any(|r| !r.passed)
}

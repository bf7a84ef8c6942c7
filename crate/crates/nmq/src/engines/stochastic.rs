//! Euler–Maruyama integrators for the conditional state under continuous
//! homodyne monitoring: the full composite equation, its block decomposition,
//! and the two reduced formulations that replace the eliminated component by
//! a memory integral.

use crate::algebra::{c, partial_trace_aux, BlockState, CMat, CVec, ModelSpec};
use crate::error::{Error, Result};
use crate::sde::{em_step, NoisePath, PropagatorPath, StochExpStepper};
use crate::superop::{
    block_generators, devectorize, g_superop, lindbladian, projector_p, restrict, vectorize,
    BlockGenerators, ProjectorKind, Restriction,
};

use super::{
    check_trajectory_health, EngineTag, ReducedOpts, StateSeries, TimeCache, TrajectoryRecord,
};

/// Tr(Q ϱ) for a vectorized (column-major) ϱ.
fn trace_product_vec(quad: &CMat, v: &CVec) -> f64 {
    let d = quad.nrows();
    let mut acc = c(0., 0.);
    for i in 0..d {
        for j in 0..d {
            // ϱ_{ji} sits at column i, row j.
            acc += quad[(i, j)] * v[i * d + j];
        }
    }
    acc.re
}

fn trace_of_vec(v: &CVec, d: usize) -> f64 {
    (0..d).map(|i| v[i * d + i].re).sum()
}

struct SmeOps {
    lmat: CMat,
    gmat: CMat,
    quad: CMat,
}

/// Integrate the full composite stochastic master equation on one noise path.
pub fn run_full_sme(
    spec: &ModelSpec,
    init: &CMat,
    path: &NoisePath,
    renorm: bool,
) -> Result<TrajectoryRecord> {
    let d = spec.dim();
    if init.nrows() != d || init.ncols() != d {
        return Err(Error::Dimension(format!(
            "initial state is {}×{} but the composite dimension is {d}",
            init.nrows(),
            init.ncols()
        )));
    }
    let n = path.n_steps();
    let dt = path.dt;
    let mut cache = TimeCache::new(spec.is_time_constant());
    let mut v = vectorize(init);
    let mut y = 0.0;

    let mut states = Vec::with_capacity(n + 1);
    let mut principal = Vec::with_capacity(n + 1);
    let mut record_y = Vec::with_capacity(n + 1);
    let mut traces = Vec::with_capacity(n + 1);

    for step in 0..=n {
        let rho = devectorize(&v, d);
        principal.push(partial_trace_aux(&rho, spec.n_s, spec.n_a)?);
        states.push(rho);
        record_y.push(y);
        traces.push(trace_of_vec(&v, d));
        if step == n {
            break;
        }
        let t = path.t0 + step as f64 * dt;
        let ops = cache.get(t, |t| {
            let l0 = spec.l0_composite(t);
            Ok(SmeOps {
                lmat: lindbladian(spec, t)?.matrix,
                gmat: g_superop(spec, t).matrix,
                quad: &l0 + l0.adjoint(),
            })
        })?;
        let c_n = trace_product_vec(&ops.quad, &v);
        let drift = &ops.lmat * &v;
        let diffusion = &ops.gmat * &v - &v * c(c_n, 0.);
        let di = path.increments[step];
        y += c_n * dt + di;
        v = em_step(&v, &drift, &diffusion, di, dt)
            .map_err(|_| Error::Numerical { step, reason: "non-finite state".into() })?;
        let tr = trace_of_vec(&v, d);
        check_trajectory_health(step, tr, v.norm(), renorm)?;
        if renorm {
            v /= c(tr, 0.);
        }
    }

    Ok(TrajectoryRecord {
        engine: EngineTag::FullSme,
        t0: path.t0,
        dt,
        times: path.times(),
        principal,
        states: StateSeries::Composite(states),
        record_y,
        traces,
        seed: path.seed,
    })
}

struct BlockOpsBundle {
    gens: BlockGenerators,
    drift: CMat,
}

/// Integrate the equivalent coupled system of diagonal and off-diagonal
/// block SDEs on one noise path.
pub fn run_coupled_blocks(
    spec: &ModelSpec,
    init: &BlockState,
    path: &NoisePath,
    renorm: bool,
) -> Result<TrajectoryRecord> {
    if init.n_s != spec.n_s || init.n_a != spec.n_a {
        return Err(Error::Dimension(format!(
            "block state is ({}, {}) but the model is ({}, {})",
            init.n_s, init.n_a, spec.n_s, spec.n_a
        )));
    }
    let n = path.n_steps();
    let dt = path.dt;
    let mut cache = TimeCache::new(spec.is_time_constant());
    let probe = block_generators(spec, path.t0)?;
    let (dd, od) = (probe.diag_dim(), probe.offdiag_dim());

    let mut x = CVec::zeros(dd + od);
    x.rows_mut(0, dd).copy_from(&init.diag_stack());
    x.rows_mut(dd, od).copy_from(&init.offdiag_stack());
    let mut y = 0.0;

    let mut states = Vec::with_capacity(n + 1);
    let mut principal = Vec::with_capacity(n + 1);
    let mut record_y = Vec::with_capacity(n + 1);
    let mut traces = Vec::with_capacity(n + 1);

    for step in 0..=n {
        let diag = x.rows(0, dd).into_owned();
        let off = x.rows(dd, od).into_owned();
        let state = BlockState::from_stacks(spec.n_s, spec.n_a, &diag, &off);
        principal.push(state.principal());
        traces.push(state.total_trace());
        states.push(state);
        record_y.push(y);
        if step == n {
            break;
        }
        let t = path.t0 + step as f64 * dt;
        let ops = cache.get(t, |t| {
            let gens = block_generators(spec, t)?;
            let drift = gens.drift_matrix();
            Ok(BlockOpsBundle { gens, drift })
        })?;
        let c_n = ops.gens.scalar(&diag);
        let drift = &ops.drift * &x;
        let mut diffusion = CVec::zeros(dd + od);
        diffusion.rows_mut(0, dd).copy_from(&(&ops.gens.b10_linear * &diag));
        diffusion.rows_mut(dd, od).copy_from(&(&ops.gens.b01_linear * &off));
        diffusion -= &x * c(c_n, 0.);
        let di = path.increments[step];
        y += c_n * dt + di;
        x = em_step(&x, &drift, &diffusion, di, dt)
            .map_err(|_| Error::Numerical { step, reason: "non-finite state".into() })?;
        let tr: f64 = (0..spec.n_a)
            .map(|slot| {
                (0..spec.n_s).map(|i| x[slot * spec.n_s * spec.n_s + i * spec.n_s + i].re).sum::<f64>()
            })
            .sum();
        check_trajectory_health(step, tr, x.norm(), renorm)?;
        if renorm {
            x /= c(tr, 0.);
        }
    }

    Ok(TrajectoryRecord {
        engine: EngineTag::CoupledBlocks,
        t0: path.t0,
        dt,
        times: path.times(),
        principal,
        states: StateSeries::Blocks(states),
        record_y,
        traces,
        seed: path.seed,
    })
}

/// Integrate the reduced diagonal-block equation: the off-diagonal stack is
/// eliminated and re-enters through a stochastic-exponential memory term.
pub fn run_reduced_diag(
    spec: &ModelSpec,
    init: &BlockState,
    path: &NoisePath,
    opts: &ReducedOpts,
) -> Result<(TrajectoryRecord, Option<PropagatorPath>)> {
    if init.n_s != spec.n_s || init.n_a != spec.n_a {
        return Err(Error::Dimension(format!(
            "block state is ({}, {}) but the model is ({}, {})",
            init.n_s, init.n_a, spec.n_s, spec.n_a
        )));
    }
    let n = path.n_steps();
    let dt = path.dt;
    let mut cache = TimeCache::new(spec.is_time_constant());
    let probe = block_generators(spec, path.t0)?;
    let od = probe.offdiag_dim();
    let ident_od = CMat::identity(od, od);

    let mut s = init.diag_stack();
    let sc0 = if opts.include_initial_offdiag {
        init.offdiag_stack()
    } else {
        CVec::zeros(od)
    };
    let mut stepper = StochExpStepper::new(od, opts.reinversion_period);
    // Running Σ_m Ψ_m⁻¹ A₀₀ s_m; prefix sums kept only in windowed mode.
    let mut hist_sum = CVec::zeros(od);
    let window_steps = match opts.memory_window {
        Some(w) => {
            if w <= 0.0 {
                return Err(Error::InvalidArgument(format!("memory window {w} must be positive")));
            }
            Some(((w / dt).round() as usize).max(1))
        }
        None => None,
    };
    let mut prefix: Vec<CVec> = if window_steps.is_some() { vec![hist_sum.clone()] } else { vec![] };
    let mut y = 0.0;

    let mut states = Vec::with_capacity(n + 1);
    let mut principal = Vec::with_capacity(n + 1);
    let mut record_y = Vec::with_capacity(n + 1);
    let mut traces = Vec::with_capacity(n + 1);
    let (mut mats, mut invs) = (Vec::new(), Vec::new());
    if opts.store_propagators {
        mats.push(stepper.phi.clone());
        invs.push(stepper.phi_inv.clone());
    }

    for step in 0..=n {
        let state = BlockState::from_stacks(spec.n_s, spec.n_a, &s, &CVec::zeros(od));
        principal.push(state.principal());
        traces.push(state.total_trace());
        states.push(state);
        record_y.push(y);
        if step == n {
            break;
        }
        let t = path.t0 + step as f64 * dt;
        let ops = cache.get(t, |t| {
            let mut gens = block_generators(spec, t)?;
            if let Some(fault) = opts.fault {
                gens.inject_fault(fault);
            }
            Ok(gens)
        })?;
        let c_n = ops.scalar(&s);
        let windowed = match window_steps {
            None => hist_sum.clone(),
            Some(w) => &prefix[step] - &prefix[step.saturating_sub(w)],
        };
        let reconstructed = &stepper.phi * (&sc0 + windowed * c(dt, 0.));
        let drift = &ops.a10 * &s + &ops.a11 * reconstructed;
        let diffusion = &ops.b10_linear * &s - &s * c(c_n, 0.);
        let h = &stepper.phi_inv * (&ops.a00 * &s);
        hist_sum += h;
        if window_steps.is_some() {
            prefix.push(hist_sum.clone());
        }
        let di = path.increments[step];
        y += c_n * dt + di;
        s = em_step(&s, &drift, &diffusion, di, dt)
            .map_err(|_| Error::Numerical { step, reason: "non-finite state".into() })?;
        let b = &ops.b01_linear - &ident_od * c(c_n, 0.);
        stepper.advance(&ops.a01, &b, di, dt)?;
        if opts.store_propagators {
            mats.push(stepper.phi.clone());
            invs.push(stepper.phi_inv.clone());
        }
        let tr: f64 = (0..spec.n_a)
            .map(|slot| {
                (0..spec.n_s).map(|i| s[slot * spec.n_s * spec.n_s + i * spec.n_s + i].re).sum::<f64>()
            })
            .sum();
        check_trajectory_health(step, tr, s.norm(), false)?;
    }

    let record = TrajectoryRecord {
        engine: EngineTag::ReducedDiag,
        t0: path.t0,
        dt,
        times: path.times(),
        principal,
        states: StateSeries::Blocks(states),
        record_y,
        traces,
        seed: path.seed,
    };
    let prop = opts.store_propagators.then(|| PropagatorPath {
        t0: path.t0,
        dt,
        mats,
        invs,
        reinversion_period: opts.reinversion_period,
    });
    Ok((record, prop))
}

struct PqOps {
    lpp: CMat,
    lpq: CMat,
    lqp: CMat,
    lqq: CMat,
    gmat: CMat,
    qgq: CMat,
    quad: CMat,
}

/// Integrate the reduced equation for the P-projected component, with the
/// Q-component eliminated by variation of constants.
pub fn run_reduced_p(
    spec: &ModelSpec,
    kind: &ProjectorKind,
    init: &CMat,
    path: &NoisePath,
    opts: &ReducedOpts,
) -> Result<(TrajectoryRecord, Option<PropagatorPath>)> {
    let d = spec.dim();
    if init.nrows() != d || init.ncols() != d {
        return Err(Error::Dimension(format!(
            "initial state is {}×{} but the composite dimension is {d}",
            init.nrows(),
            init.ncols()
        )));
    }
    let n = path.n_steps();
    let dt = path.dt;
    let (p, q) = projector_p(spec, kind)?;
    let mut cache = TimeCache::new(spec.is_time_constant());
    let build = |t: f64| -> Result<PqOps> {
        let lmat = lindbladian(spec, t)?;
        let g = g_superop(spec, t);
        let l0 = spec.l0_composite(t);
        Ok(PqOps {
            lpp: restrict(&lmat, &p, &q, Restriction::Pp)?.matrix,
            lpq: restrict(&lmat, &p, &q, Restriction::Pq)?.matrix,
            lqp: restrict(&lmat, &p, &q, Restriction::Qp)?.matrix,
            lqq: restrict(&lmat, &p, &q, Restriction::Qq)?.matrix,
            qgq: restrict(&g, &p, &q, Restriction::Qq)?.matrix,
            gmat: g.matrix,
            quad: &l0 + l0.adjoint(),
        })
    };

    let v0 = vectorize(init);
    let mut pv = &p.matrix * &v0;
    let q0 = if opts.include_initial_offdiag { &q.matrix * &v0 } else { CVec::zeros(d * d) };

    let mut stepper = StochExpStepper::new(d * d, opts.reinversion_period);
    let mut hist_sum = CVec::zeros(d * d);
    let window_steps = match opts.memory_window {
        Some(w) => {
            if w <= 0.0 {
                return Err(Error::InvalidArgument(format!("memory window {w} must be positive")));
            }
            Some(((w / dt).round() as usize).max(1))
        }
        None => None,
    };
    let mut prefix: Vec<CVec> = if window_steps.is_some() { vec![hist_sum.clone()] } else { vec![] };
    let mut y = 0.0;

    let mut states = Vec::with_capacity(n + 1);
    let mut principal = Vec::with_capacity(n + 1);
    let mut record_y = Vec::with_capacity(n + 1);
    let mut traces = Vec::with_capacity(n + 1);
    let (mut mats, mut invs) = (Vec::new(), Vec::new());
    if opts.store_propagators {
        mats.push(stepper.phi.clone());
        invs.push(stepper.phi_inv.clone());
    }

    for step in 0..=n {
        let rho_p = devectorize(&pv, d);
        principal.push(partial_trace_aux(&rho_p, spec.n_s, spec.n_a)?);
        traces.push(trace_of_vec(&pv, d));
        states.push(rho_p);
        record_y.push(y);
        if step == n {
            break;
        }
        let t = path.t0 + step as f64 * dt;
        let ops = cache.get(t, build)?;
        let c_n = trace_product_vec(&ops.quad, &pv);
        let windowed = match window_steps {
            None => hist_sum.clone(),
            Some(w) => &prefix[step] - &prefix[step.saturating_sub(w)],
        };
        let reconstructed = &stepper.phi * (&q0 + windowed * c(dt, 0.));
        let drift = &ops.lpp * &pv + &ops.lpq * reconstructed;
        // The gain map commutes with P, so its full form acts on the
        // p-component without leaking into Q.
        let diffusion = &ops.gmat * &pv - &pv * c(c_n, 0.);
        let h = &stepper.phi_inv * (&ops.lqp * &pv);
        hist_sum += h;
        if window_steps.is_some() {
            prefix.push(hist_sum.clone());
        }
        let di = path.increments[step];
        y += c_n * dt + di;
        pv = em_step(&pv, &drift, &diffusion, di, dt)
            .map_err(|_| Error::Numerical { step, reason: "non-finite state".into() })?;
        let b = &ops.qgq - &q.matrix * c(c_n, 0.);
        stepper.advance(&ops.lqq, &b, di, dt)?;
        if opts.store_propagators {
            mats.push(stepper.phi.clone());
            invs.push(stepper.phi_inv.clone());
        }
        check_trajectory_health(step, trace_of_vec(&pv, d), pv.norm(), false)?;
    }

    let record = TrajectoryRecord {
        engine: EngineTag::ReducedP,
        t0: path.t0,
        dt,
        times: path.times(),
        principal,
        states: StateSeries::Composite(states),
        record_y,
        traces,
        seed: path.seed,
    };
    let prop = opts.store_propagators.then(|| PropagatorPath {
        t0: path.t0,
        dt,
        mats,
        invs,
        reinversion_period: opts.reinversion_period,
    });
    Ok((record, prop))
}

/// Rebuild the integrated measurement record from a principal-state series:
/// Y_{n+1} = Y_n + Tr((L₀+L₀†) ϱ_s,n) dt + dI_n, Y_0 = 0.
pub fn measurement_record(
    spec: &ModelSpec,
    principal: &[CMat],
    path: &NoisePath,
) -> Result<Vec<f64>> {
    let n = path.n_steps();
    if principal.len() != n + 1 {
        return Err(Error::Grid(format!(
            "{} principal states for {} noise increments",
            principal.len(),
            n
        )));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut y = 0.0;
    out.push(y);
    for step in 0..n {
        let t = path.t0 + step as f64 * path.dt;
        let l0 = spec.l0_principal(t);
        let quad = &l0 + l0.adjoint();
        let c_n = (&quad * &principal[step]).trace().re;
        y += c_n * path.dt + path.increments[step];
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::block;
    use crate::models::{decoupled_variant, entangled_init, principal_only, reference_init, reference_model};
    use crate::sde::wiener_path;

    fn composite_states(r: &TrajectoryRecord) -> &Vec<CMat> {
        match &r.states {
            StateSeries::Composite(v) => v,
            _ => panic!("expected composite states"),
        }
    }

    fn block_states(r: &TrajectoryRecord) -> &Vec<BlockState> {
        match &r.states {
            StateSeries::Blocks(v) => v,
            _ => panic!("expected block states"),
        }
    }

    #[test]
    fn full_sme_zero_model_passes_noise_through() {
        let spec = ModelSpec::empty(2, 2);
        let init = reference_init();
        let path = wiener_path(11, 0.0, 1e-3, 200).unwrap();
        let traj = run_full_sme(&spec, &init, &path, false).unwrap();
        // No generator → state frozen, record is the raw Wiener path.
        assert!((composite_states(&traj)[200].clone() - &init).norm() < 1e-14);
        let w: f64 = path.increments.iter().sum();
        assert!((traj.record_y[200] - w).abs() < 1e-12);
    }

    #[test]
    fn full_sme_without_probe_is_deterministic() {
        let mut spec = reference_model();
        spec.l0 = crate::algebra::ScheduledOp::zero(2);
        let init = reference_init();
        let a = run_full_sme(&spec, &init, &wiener_path(1, 0.0, 1e-3, 300).unwrap(), false).unwrap();
        let b = run_full_sme(&spec, &init, &wiener_path(2, 0.0, 1e-3, 300).unwrap(), false).unwrap();
        let da = composite_states(&a);
        let db = composite_states(&b);
        for n in [0, 100, 300] {
            assert!((da[n].clone() - &db[n]).norm() < 1e-13, "seed dependence at step {n}");
        }
    }

    #[test]
    fn coupled_blocks_matches_full_sme_on_shared_noise() {
        let spec = reference_model();
        let init = reference_init();
        let path = wiener_path(21, 0.0, 1e-3, 500).unwrap();
        let full = run_full_sme(&spec, &init, &path, false).unwrap();
        let binit = BlockState::from_composite(&spec, &init).unwrap();
        let coupled = run_coupled_blocks(&spec, &binit, &path, false).unwrap();
        let fs = composite_states(&full);
        let bs = block_states(&coupled);
        let mut sup = 0.0f64;
        for n in 0..=500 {
            for j in 0..2 {
                for k in 0..2 {
                    let want = block(&spec, &fs[n], j, k).unwrap();
                    sup = sup.max((want - bs[n].get(j, k)).norm());
                }
            }
            sup = sup.max((full.record_y[n] - coupled.record_y[n]).abs());
        }
        assert!(sup < 1e-11, "sup block discrepancy {sup:.2e}");
    }

    #[test]
    fn reduced_diag_tracks_coupled_blocks() {
        let spec = reference_model();
        let init = BlockState::from_composite(&spec, &reference_init()).unwrap();
        let path = wiener_path(31, 0.0, 1e-3, 1000).unwrap();
        let coupled = run_coupled_blocks(&spec, &init, &path, false).unwrap();
        let (reduced, _) = run_reduced_diag(&spec, &init, &path, &ReducedOpts::default()).unwrap();
        let cs = block_states(&coupled);
        let rs = block_states(&reduced);
        let mut sup = 0.0f64;
        for n in 0..=1000 {
            for j in 0..2 {
                sup = sup.max((cs[n].get(j, j) - rs[n].get(j, j)).norm());
            }
        }
        // Same dynamics, different discretization of the eliminated part.
        assert!(sup < 5e-3, "sup diagonal discrepancy {sup:.2e}");
        assert!(sup > 0.0);
    }

    #[test]
    fn reduced_p_matches_reduced_diag() {
        let spec = reference_model();
        let init = reference_init();
        let binit = BlockState::from_composite(&spec, &init).unwrap();
        let path = wiener_path(41, 0.0, 1e-3, 500).unwrap();
        let (diag, _) = run_reduced_diag(&spec, &binit, &path, &ReducedOpts::default()).unwrap();
        let (pform, _) =
            run_reduced_p(&spec, &ProjectorKind::BlockDiagonal, &init, &path, &ReducedOpts::default())
                .unwrap();
        let ds = block_states(&diag);
        let ps = composite_states(&pform);
        let mut sup = 0.0f64;
        for n in 0..=500 {
            for j in 0..2 {
                let want = block(&spec, &ps[n], j, j).unwrap();
                sup = sup.max((want - ds[n].get(j, j)).norm());
            }
            sup = sup.max((diag.record_y[n] - pform.record_y[n]).abs());
        }
        assert!(sup < 1e-10, "cross-formulation discrepancy {sup:.2e}");
    }

    #[test]
    fn decoupled_model_degenerates_to_principal_sme() {
        let spec = decoupled_variant(&reference_model());
        let pspec = principal_only(&spec);
        let init = reference_init();
        let path = wiener_path(51, 0.0, 1e-3, 800).unwrap();
        let full = run_full_sme(&spec, &init, &path, false).unwrap();
        let pinit = crate::algebra::basis_projector(2, 1);
        let ponly = run_full_sme(&pspec, &pinit, &path, false).unwrap();
        let mut sup = 0.0f64;
        for n in 0..=800 {
            sup = sup.max((full.principal[n].clone() - &ponly.principal[n]).norm());
            sup = sup.max((full.record_y[n] - ponly.record_y[n]).abs());
        }
        assert!(sup < 1e-11, "degeneration discrepancy {sup:.2e}");
    }

    #[test]
    fn renormalization_keeps_trace_near_one() {
        let spec = reference_model();
        let init = reference_init();
        let path = wiener_path(61, 0.0, 1e-3, 2000).unwrap();
        let traj = run_full_sme(&spec, &init, &path, true).unwrap();
        for (n, tr) in traj.traces.iter().enumerate() {
            assert!((tr - 1.0).abs() < 1e-2, "step {n}: pre-renorm trace {tr}");
        }
    }

    #[test]
    fn oversized_step_aborts() {
        let spec = reference_model();
        let init = reference_init();
        let path = wiener_path(71, 0.0, 1.0, 2000).unwrap();
        let err = run_full_sme(&spec, &init, &path, false);
        assert!(matches!(err, Err(Error::Numerical { .. })), "expected numerical abort");
    }

    #[test]
    fn measurement_record_reproducible_from_principal_states() {
        let spec = reference_model();
        let init = reference_init();
        let path = wiener_path(81, 0.0, 1e-3, 400).unwrap();
        let traj = run_full_sme(&spec, &init, &path, false).unwrap();
        let rebuilt = measurement_record(&spec, &traj.principal, &path).unwrap();
        for n in 0..=400 {
            assert!((rebuilt[n] - traj.record_y[n]).abs() < 1e-12);
        }
        let short = &traj.principal[..100];
        assert!(measurement_record(&spec, short, &path).is_err());
    }

    #[test]
    fn fault_injection_perturbs_reduced_run() {
        let spec = reference_model();
        let init = BlockState::from_composite(&spec, &reference_init()).unwrap();
        let path = wiener_path(91, 0.0, 1e-3, 500).unwrap();
        let (clean, _) = run_reduced_diag(&spec, &init, &path, &ReducedOpts::default()).unwrap();
        let opts = ReducedOpts { fault: Some(crate::superop::Fault::A00SignFlip), ..Default::default() };
        let (faulted, _) = run_reduced_diag(&spec, &init, &path, &opts).unwrap();
        let diff: f64 = (0..=500)
            .map(|n| (clean.principal[n].clone() - &faulted.principal[n]).norm())
            .fold(0.0, f64::max);
        assert!(diff > 1e-4, "fault had no visible effect ({diff:.2e})");
    }

    #[test]
    fn full_window_equals_unwindowed() {
        let spec = reference_model();
        let init = BlockState::from_composite(&spec, &entangled_init()).unwrap();
        let path = wiener_path(101, 0.0, 1e-3, 400).unwrap();
        let (unwindowed, _) = run_reduced_diag(&spec, &init, &path, &ReducedOpts::default()).unwrap();
        let opts = ReducedOpts { memory_window: Some(0.4), ..Default::default() };
        let (windowed, _) = run_reduced_diag(&spec, &init, &path, &opts).unwrap();
        for n in 0..=400 {
            let d = (block_states(&unwindowed)[n].diag_stack()
                - block_states(&windowed)[n].diag_stack())
            .norm();
            assert!(d < 1e-13, "step {n}: window covering the horizon changed the result ({d:.2e})");
        }
        // A genuinely short window perturbs the trajectory.
        let opts = ReducedOpts { memory_window: Some(0.02), ..Default::default() };
        let (short, _) = run_reduced_diag(&spec, &init, &path, &opts).unwrap();
        let diff: f64 = (0..=400)
            .map(|n| {
                (block_states(&unwindowed)[n].diag_stack() - block_states(&short)[n].diag_stack())
                    .norm()
            })
            .fold(0.0, f64::max);
        assert!(diff > 1e-8, "short window had no effect ({diff:.2e})");
    }

    #[test]
    fn initial_offdiag_term_matters_for_entangled_states() {
        let spec = reference_model();
        let init = entangled_init();
        let binit = BlockState::from_composite(&spec, &init).unwrap();
        let path = wiener_path(111, 0.0, 1e-3, 400).unwrap();
        let (with, _) = run_reduced_diag(&spec, &binit, &path, &ReducedOpts::default()).unwrap();
        let opts = ReducedOpts { include_initial_offdiag: false, ..Default::default() };
        let (without, _) = run_reduced_diag(&spec, &binit, &path, &opts).unwrap();
        let diff: f64 = (0..=400)
            .map(|n| (with.principal[n].clone() - &without.principal[n]).norm())
            .fold(0.0, f64::max);
        assert!(diff > 1e-6, "dropping the inhomogeneous term had no effect ({diff:.2e})");
        // For a product initial state the off-diagonal stack starts at zero
        // and the flag is inert.
        let prod = BlockState::from_composite(&spec, &reference_init()).unwrap();
        let (a, _) = run_reduced_diag(&spec, &prod, &path, &ReducedOpts::default()).unwrap();
        let (b, _) = run_reduced_diag(&spec, &prod, &path, &opts).unwrap();
        let diff: f64 = (0..=400)
            .map(|n| (a.principal[n].clone() - &b.principal[n]).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }
}

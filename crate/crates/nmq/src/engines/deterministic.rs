//! Deterministic (noise-averaged) solvers: RK4 for the unconditional master
//! equation and its block decomposition, and a time-nonlocal integrator for
//! the projected component with an explicit memory integral.

use std::borrow::Cow;

use crate::algebra::{c, partial_trace_aux, BlockState, CMat, CVec, ModelSpec};
use crate::error::{Error, Result};
use crate::superop::{
    block_generators, devectorize, lindbladian, projector_p, restrict, vectorize, ProjectorKind,
    Restriction,
};

use super::{DetTrajectory, EngineTag, StateSeries};

/// Trace-preservation guard for the deterministic solvers.
const TRACE_PRESERVATION_TOL: f64 = 1e-8;

fn rk4_step<'a, F>(get: &F, v: &CVec, t: f64, dt: f64) -> Result<CVec>
where
    F: Fn(f64) -> Result<Cow<'a, CMat>>,
{
    let m1 = get(t)?;
    let k1 = m1.as_ref() * v;
    let mh = get(t + 0.5 * dt)?;
    let k2 = mh.as_ref() * (v + &k1 * c(0.5 * dt, 0.));
    let k3 = mh.as_ref() * (v + &k2 * c(0.5 * dt, 0.));
    let m2 = get(t + dt)?;
    let k4 = m2.as_ref() * (v + &k3 * c(dt, 0.));
    Ok(v + (k1 + k2 * c(2., 0.) + k3 * c(2., 0.) + k4) * c(dt / 6.0, 0.))
}

fn rk4_series(
    matrix_at: &dyn Fn(f64) -> Result<CMat>,
    constant: bool,
    v0: CVec,
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<CVec>> {
    if dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let fixed = if constant { Some(matrix_at(t0)?) } else { None };
    let get = |t: f64| -> Result<Cow<'_, CMat>> {
        match &fixed {
            Some(m) => Ok(Cow::Borrowed(m)),
            None => Ok(Cow::Owned(matrix_at(t)?)),
        }
    };
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut v = v0;
    out.push(v.clone());
    for step in 0..n_steps {
        v = rk4_step(&get, &v, t0 + step as f64 * dt, dt)?;
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical { step, reason: "non-finite state".into() });
        }
        out.push(v.clone());
    }
    Ok(out)
}

/// Solve the unconditional master equation with RK4 on a uniform grid.
pub fn solve_gksl(
    spec: &ModelSpec,
    init: &CMat,
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<DetTrajectory> {
    let d = spec.dim();
    if init.nrows() != d || init.ncols() != d {
        return Err(Error::Dimension(format!(
            "initial state is {}×{} but the composite dimension is {d}",
            init.nrows(),
            init.ncols()
        )));
    }
    let series = rk4_series(
        &|t| Ok(lindbladian(spec, t)?.matrix),
        spec.is_time_constant(),
        vectorize(init),
        t0,
        dt,
        n_steps,
    )?;
    let init_trace = init.trace().re;
    let mut states = Vec::with_capacity(series.len());
    let mut principal = Vec::with_capacity(series.len());
    for (step, v) in series.iter().enumerate() {
        let rho = devectorize(v, d);
        let tr = rho.trace().re;
        if (tr - init_trace).abs() > TRACE_PRESERVATION_TOL {
            return Err(Error::Numerical {
                step,
                reason: format!("trace not preserved ({tr:.12} vs {init_trace:.12})"),
            });
        }
        principal.push(partial_trace_aux(&rho, spec.n_s, spec.n_a)?);
        states.push(rho);
    }
    Ok(DetTrajectory {
        engine: EngineTag::Gksl,
        times: (0..=n_steps).map(|n| t0 + n as f64 * dt).collect(),
        principal,
        states: StateSeries::Composite(states),
    })
}

/// Solve the noise-averaged coupled block system with RK4.
pub fn solve_coupled_me(
    spec: &ModelSpec,
    init: &BlockState,
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<DetTrajectory> {
    if init.n_s != spec.n_s || init.n_a != spec.n_a {
        return Err(Error::Dimension(format!(
            "block state is ({}, {}) but the model is ({}, {})",
            init.n_s, init.n_a, spec.n_s, spec.n_a
        )));
    }
    let probe = block_generators(spec, t0)?;
    let (dd, od) = (probe.diag_dim(), probe.offdiag_dim());
    let mut x0 = CVec::zeros(dd + od);
    x0.rows_mut(0, dd).copy_from(&init.diag_stack());
    x0.rows_mut(dd, od).copy_from(&init.offdiag_stack());
    let series = rk4_series(
        &|t| Ok(block_generators(spec, t)?.drift_matrix()),
        spec.is_time_constant(),
        x0,
        t0,
        dt,
        n_steps,
    )?;
    let mut states = Vec::with_capacity(series.len());
    let mut principal = Vec::with_capacity(series.len());
    for x in &series {
        let state = BlockState::from_stacks(
            spec.n_s,
            spec.n_a,
            &x.rows(0, dd).into_owned(),
            &x.rows(dd, od).into_owned(),
        );
        principal.push(state.principal());
        states.push(state);
    }
    Ok(DetTrajectory {
        engine: EngineTag::CoupledMe,
        times: (0..=n_steps).map(|n| t0 + n as f64 * dt).collect(),
        principal,
        states: StateSeries::Blocks(states),
    })
}

/// Which generator drives the eliminated-component propagator in the
/// time-nonlocal equation. The two choices agree on Q-supported data; both
/// are kept so the agreement can be checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GeneratorChoice {
    /// Q L Q (the fully restricted generator).
    #[default]
    Qq,
    /// Q L (projected on the left only).
    QFull,
}

/// Quadrature for the memory integral. Left-rectangle pairs with a forward
/// Euler step (first order); trapezoid pairs with a Heun
/// predictor–corrector step (second order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NzQuadrature {
    LeftRectangle,
    #[default]
    Trapezoid,
}

#[derive(Clone)]
struct NzOps {
    lpp: CMat,
    lpq: CMat,
    lqp: CMat,
    gen: CMat,
}

/// Solve the time-nonlocal equation for the projected component: the
/// eliminated part is folded into an inhomogeneous term and a memory
/// integral over an ordered exponential Γ(t, s).
pub fn solve_nz(
    spec: &ModelSpec,
    kind: &ProjectorKind,
    init: &CMat,
    choice: GeneratorChoice,
    quadrature: NzQuadrature,
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<DetTrajectory> {
    let d = spec.dim();
    if init.nrows() != d || init.ncols() != d {
        return Err(Error::Dimension(format!(
            "initial state is {}×{} but the composite dimension is {d}",
            init.nrows(),
            init.ncols()
        )));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let (p, q) = projector_p(spec, kind)?;
    let constant = spec.is_time_constant();
    let build = |t: f64| -> Result<NzOps> {
        let lmat = lindbladian(spec, t)?;
        let gen = match choice {
            GeneratorChoice::Qq => restrict(&lmat, &p, &q, Restriction::Qq)?.matrix,
            GeneratorChoice::QFull => &q.matrix * &lmat.matrix,
        };
        Ok(NzOps {
            lpp: restrict(&lmat, &p, &q, Restriction::Pp)?.matrix,
            lpq: restrict(&lmat, &p, &q, Restriction::Pq)?.matrix,
            lqp: restrict(&lmat, &p, &q, Restriction::Qp)?.matrix,
            gen,
        })
    };
    let fixed = if constant { Some(build(t0)?) } else { None };
    let get = |t: f64| -> Result<Cow<'_, NzOps>> {
        match &fixed {
            Some(ops) => Ok(Cow::Borrowed(ops)),
            None => Ok(Cow::Owned(build(t)?)),
        }
    };

    let v0 = vectorize(init);
    let mut rho_p = &p.matrix * &v0;
    let q0 = &q.matrix * &v0;
    let dim2 = d * d;
    let mut u = CMat::identity(dim2, dim2);
    let mut v_inv = CMat::identity(dim2, dim2);
    let reinversion = crate::sde::DEFAULT_REINVERSION_PERIOD;

    // Trapezoid bookkeeping: S = Σ_{m≤n} h_m with h_m = Γ(0, t_m) L^{qp} ρp_m.
    let h_first = {
        let ops = get(t0)?;
        &ops.lqp * &rho_p
    };
    let mut h_last = h_first.clone();
    let mut full_sum = h_first.clone();

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut principal = Vec::with_capacity(n_steps + 1);
    let record = |states: &mut Vec<CMat>, principal: &mut Vec<CMat>, v: &CVec| -> Result<()> {
        let rho = devectorize(v, d);
        principal.push(partial_trace_aux(&rho, spec.n_s, spec.n_a)?);
        states.push(rho);
        Ok(())
    };
    record(&mut states, &mut principal, &rho_p)?;

    let memory_sum = |full: &CVec, first: &CVec, last: &CVec| -> CVec {
        match quadrature {
            NzQuadrature::LeftRectangle => (full - last) * c(dt, 0.),
            NzQuadrature::Trapezoid => {
                (full - first * c(0.5, 0.) - last * c(0.5, 0.)) * c(dt, 0.)
            }
        }
    };

    for step in 0..n_steps {
        let t = t0 + step as f64 * dt;
        let rhs_now = {
            let ops = get(t)?;
            let quad = memory_sum(&full_sum, &h_first, &h_last);
            &ops.lpp * &rho_p + &ops.lpq * (&u * (&q0 + quad))
        };

        // Propagate Γ and its inverse across the step with RK4.
        let gen_get = |tt: f64| -> Result<Cow<'_, CMat>> {
            match &fixed {
                Some(ops) => Ok(Cow::Borrowed(&ops.gen)),
                None => Ok(Cow::Owned(build(tt)?.gen)),
            }
        };
        let advance = |m: &CMat, transposed: bool| -> Result<CMat> {
            // dU/dt = G U forward; dV/dt = -V G for the inverse.
            let apply = |g: &CMat, x: &CMat| if transposed { -(x * g) } else { g * x };
            let g1 = gen_get(t)?;
            let k1 = apply(g1.as_ref(), m);
            let gh = gen_get(t + 0.5 * dt)?;
            let k2 = apply(gh.as_ref(), &(m + &k1 * c(0.5 * dt, 0.)));
            let k3 = apply(gh.as_ref(), &(m + &k2 * c(0.5 * dt, 0.)));
            let g2 = gen_get(t + dt)?;
            let k4 = apply(g2.as_ref(), &(m + &k3 * c(dt, 0.)));
            Ok(m + (k1 + k2 * c(2., 0.) + k3 * c(2., 0.) + k4) * c(dt / 6.0, 0.))
        };
        u = advance(&u, false)?;
        v_inv = advance(&v_inv, true)?;
        if (step + 1) % reinversion == 0 {
            let residual = (&u * &v_inv - CMat::identity(dim2, dim2)).norm();
            if residual > crate::sde::INVERSE_RESIDUAL_ABORT {
                return Err(Error::Numerical {
                    step,
                    reason: format!("ordered-exponential inverse residual {residual:.2e}"),
                });
            }
            v_inv = u.clone().try_inverse().ok_or(Error::Numerical {
                step,
                reason: "singular ordered exponential".into(),
            })?;
        }

        let next = match quadrature {
            NzQuadrature::LeftRectangle => &rho_p + rhs_now * c(dt, 0.),
            NzQuadrature::Trapezoid => {
                let predicted = &rho_p + &rhs_now * c(dt, 0.);
                let h_pred = {
                    let ops = get(t + dt)?;
                    &v_inv * (&ops.lqp * &predicted)
                };
                let sum_pred = &full_sum + &h_pred;
                let quad_pred = memory_sum(&sum_pred, &h_first, &h_pred);
                let rhs_next = {
                    let ops = get(t + dt)?;
                    &ops.lpp * &predicted + &ops.lpq * (&u * (&q0 + quad_pred))
                };
                &rho_p + (rhs_now + rhs_next) * c(0.5 * dt, 0.)
            }
        };
        rho_p = next;
        if rho_p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical { step, reason: "non-finite state".into() });
        }
        let h_next = {
            let ops = get(t + dt)?;
            &v_inv * (&ops.lqp * &rho_p)
        };
        full_sum += &h_next;
        h_last = h_next;
        record(&mut states, &mut principal, &rho_p)?;
    }

    Ok(DetTrajectory {
        engine: EngineTag::Nz,
        times: (0..=n_steps).map(|n| t0 + n as f64 * dt).collect(),
        principal,
        states: StateSeries::Composite(states),
    })
}

//! Evaluation of the two-time memory kernel along a trajectory, in either
//! the block-stack or projector formulation.

use crate::algebra::{BlockState, CMat, ModelSpec};
use crate::error::{Error, Result};
use crate::sde::NoisePath;
use crate::superop::{
    block_generators, lindbladian, projector_p, restrict, ProjectorKind, Restriction,
};

use super::stochastic::{run_reduced_diag, run_reduced_p};
use super::ReducedOpts;

#[derive(Clone, Debug)]
pub enum KernelFormulation {
    /// K(t, t') = A₁₁(t) Ψ_t Ψ_{t'}⁻¹ A₀₀(t') on the block stacks.
    Block,
    /// K(t, t') = L^{pq}(t) Φ_t Φ_{t'}⁻¹ L^{qp}(t') on the vectorized space.
    Projector(ProjectorKind),
}

#[derive(Clone, Debug)]
pub struct KernelEvaluation {
    pub formulation: String,
    /// Evaluated (t, t') pairs with t' ≤ t.
    pub pairs: Vec<(f64, f64)>,
    pub mats: Vec<CMat>,
}

fn grid_index(t: f64, t0: f64, dt: f64, n_max: usize) -> Result<usize> {
    let raw = (t - t0) / dt;
    let idx = raw.round();
    if (raw - idx).abs() > 1e-6 || idx < 0.0 || idx as usize > n_max {
        return Err(Error::Grid(format!("t = {t} is not on the grid (t0 = {t0}, dt = {dt})")));
    }
    Ok(idx as usize)
}

/// Evaluate the memory kernel at all requested pairs (t, t') with t' ≤ t,
/// along the trajectory generated on `path` from `init`.
pub fn kernel_dump(
    spec: &ModelSpec,
    formulation: &KernelFormulation,
    init: &CMat,
    path: &NoisePath,
    t_samples: &[f64],
    t_prime_samples: &[f64],
    opts: &ReducedOpts,
) -> Result<KernelEvaluation> {
    let opts = ReducedOpts { store_propagators: true, ..opts.clone() };
    let n = path.n_steps();
    type OpAt<'a> = Box<dyn Fn(f64) -> Result<CMat> + 'a>;
    let (left_of, right_of, prop): (OpAt<'_>, OpAt<'_>, _) =
        match formulation {
            KernelFormulation::Block => {
                let binit = BlockState::from_composite(spec, init)?;
                let (_, prop) = run_reduced_diag(spec, &binit, path, &opts)?;
                (
                    Box::new(|t| Ok(block_generators(spec, t)?.a11)),
                    Box::new(|t| Ok(block_generators(spec, t)?.a00)),
                    prop.expect("propagators were requested"),
                )
            }
            KernelFormulation::Projector(kind) => {
                let (_, prop) = run_reduced_p(spec, kind, init, path, &opts)?;
                let (p, q) = projector_p(spec, kind)?;
                let (p2, q2) = (p.clone(), q.clone());
                (
                    Box::new(move |t| {
                        Ok(restrict(&lindbladian(spec, t)?, &p, &q, Restriction::Pq)?.matrix)
                    }),
                    Box::new(move |t| {
                        Ok(restrict(&lindbladian(spec, t)?, &p2, &q2, Restriction::Qp)?.matrix)
                    }),
                    prop.expect("propagators were requested"),
                )
            }
        };

    let mut pairs = Vec::new();
    let mut mats = Vec::new();
    for &t in t_samples {
        let it = grid_index(t, path.t0, path.dt, n)?;
        let left = left_of(t)?;
        for &tp in t_prime_samples {
            if tp > t + 1e-12 {
                continue;
            }
            let ip = grid_index(tp, path.t0, path.dt, n)?;
            let right = right_of(tp)?;
            mats.push(&left * &prop.mats[it] * &prop.invs[ip] * &right);
            pairs.push((t, tp));
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "no valid (t, t') pairs with t' <= t were requested".into(),
        ));
    }
    let formulation = match formulation {
        KernelFormulation::Block => "block".to_string(),
        KernelFormulation::Projector(_) => "projector".to_string(),
    };
    Ok(KernelEvaluation { formulation, pairs, mats })
}

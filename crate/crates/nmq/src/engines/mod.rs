//! Trajectory engines: the full composite stochastic master equation, its
//! coupled block decomposition, the two reduced (memory-kernel) integrators,
//! and the deterministic ODE solvers used to cross-check them.

mod deterministic;
mod kernel;
mod mc;
mod stochastic;

pub use deterministic::{solve_coupled_me, solve_gksl, solve_nz, GeneratorChoice, NzQuadrature};
pub use kernel::{kernel_dump, KernelEvaluation, KernelFormulation};
pub use mc::{monte_carlo_mean, McEngine, McResult};
pub use stochastic::{
    measurement_record, run_coupled_blocks, run_full_sme, run_reduced_diag, run_reduced_p,
};

use crate::algebra::{BlockState, CMat};
use crate::error::{Error, Result};
use crate::superop::Fault;

/// Abort threshold on |Tr ϱ − 1| for unrenormalized stochastic runs.
pub const TRACE_DRIFT_ABORT: f64 = 0.1;

/// Abort threshold on the state norm (blow-up detection).
pub const BLOWUP_NORM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineTag {
    FullSme,
    CoupledBlocks,
    ReducedDiag,
    ReducedP,
    Gksl,
    CoupledMe,
    Nz,
}

impl EngineTag {
    pub fn name(&self) -> &'static str {
        match self {
            EngineTag::FullSme => "full-sme",
            EngineTag::CoupledBlocks => "coupled-blocks",
            EngineTag::ReducedDiag => "reduced-diag",
            EngineTag::ReducedP => "reduced-p",
            EngineTag::Gksl => "gksl",
            EngineTag::CoupledMe => "coupled-me",
            EngineTag::Nz => "nz",
        }
    }
}

/// Per-grid-point states, in whichever representation the engine evolves.
#[derive(Clone, Debug)]
pub enum StateSeries {
    Composite(Vec<CMat>),
    Blocks(Vec<BlockState>),
}

impl StateSeries {
    pub fn len(&self) -> usize {
        match self {
            StateSeries::Composite(v) => v.len(),
            StateSeries::Blocks(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One stochastic trajectory on a uniform grid.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub engine: EngineTag,
    pub t0: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Conditional principal state ϱ_s at each grid point.
    pub principal: Vec<CMat>,
    pub states: StateSeries,
    /// Integrated measurement record Y^Q at each grid point (Y^Q_0 = 0).
    pub record_y: Vec<f64>,
    /// Trace of the evolved state before any renormalization.
    pub traces: Vec<f64>,
    pub seed: u64,
}

/// A deterministic (noise-averaged) solution on a uniform grid.
#[derive(Clone, Debug)]
pub struct DetTrajectory {
    pub engine: EngineTag,
    pub times: Vec<f64>,
    pub principal: Vec<CMat>,
    pub states: StateSeries,
}

/// Options for the reduced memory-kernel integrators.
#[derive(Clone, Debug)]
pub struct ReducedOpts {
    /// Truncate the memory integral to t − t' ≤ window (surrogate for the
    /// stationary regime); `None` keeps the full history.
    pub memory_window: Option<f64>,
    /// Keep the inhomogeneous term carrying the initial off-diagonal part.
    pub include_initial_offdiag: bool,
    pub reinversion_period: usize,
    /// Also return the stored propagator path (needed for kernel dumps).
    pub store_propagators: bool,
    pub fault: Option<Fault>,
}

impl Default for ReducedOpts {
    fn default() -> Self {
        Self {
            memory_window: None,
            include_initial_offdiag: true,
            reinversion_period: crate::sde::DEFAULT_REINVERSION_PERIOD,
            store_propagators: false,
            fault: None,
        }
    }
}

/// Rebuilds time-dependent operator bundles only when the model requires it.
pub(crate) struct TimeCache<T> {
    constant: bool,
    value: Option<T>,
}

impl<T> TimeCache<T> {
    pub(crate) fn new(constant: bool) -> Self {
        Self { constant, value: None }
    }

    pub(crate) fn get(&mut self, t: f64, build: impl FnOnce(f64) -> Result<T>) -> Result<&T> {
        if self.value.is_none() || !self.constant {
            self.value = Some(build(t)?);
        }
        Ok(self.value.as_ref().expect("just set"))
    }
}

pub(crate) fn check_trajectory_health(
    step: usize,
    trace: f64,
    norm: f64,
    renorm: bool,
) -> Result<()> {
    if !trace.is_finite() || !norm.is_finite() || norm > BLOWUP_NORM {
        return Err(Error::Numerical {
            step,
            reason: format!("state blow-up (norm {norm:.2e})"),
        });
    }
    if !renorm && (trace - 1.0).abs() > TRACE_DRIFT_ABORT {
        return Err(Error::Numerical {
            step,
            reason: format!(
                "trace drift |{trace:.6} - 1| exceeds {TRACE_DRIFT_ABORT} without renormalization"
            ),
        });
    }
    Ok(())
}

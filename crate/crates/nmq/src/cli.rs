//! Command-line front end: `validate`, `simulate`, `verify`, `kernel`.
//! Exit codes: 0 ok, 1 check failure, 2 usage/parse error, 3 numerical abort.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::algebra::{block, validate_model, BlockState, CMat, ModelSpec};
use crate::engines::{
    kernel_dump, monte_carlo_mean, run_coupled_blocks, run_full_sme, run_reduced_diag,
    run_reduced_p, solve_coupled_me, solve_gksl, solve_nz, DetTrajectory,
    GeneratorChoice, KernelFormulation, McEngine, NzQuadrature, ReducedOpts, TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::harness::{consistency_suite, has_failures, SuiteConfig, Tolerances};
use crate::model_io::load_model;
use crate::output::{
    fnv1a64, write_kernel_csv, write_manifest, write_mean_csv, write_trajectory_csv, Manifest,
};
use crate::sde::{derive_seed, wiener_path, GENERATOR_NAME};
use crate::superop::{projector_p, Fault, ProjectorKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "nmq",
    version,
    about = "Trajectory simulation for continuously monitored systems with finitely embedded memory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model file: dimensions, Hermiticity, basis orthonormality,
    /// projector idempotency, trace preservation of the generator.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Integrate trajectories (or a deterministic solution) and write CSV
    /// output plus a manifest.
    Simulate(SimulateArgs),
    /// Run the cross-engine consistency suite over a step-size sweep.
    Verify(VerifyArgs),
    /// Evaluate the two-time memory kernel along one trajectory.
    Kernel(KernelArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineChoice {
    FullSme,
    CoupledBlocks,
    ReducedDiag,
    ReducedP,
    Gksl,
    CoupledMe,
    Nz,
    /// Monte Carlo mean over coupled-block trajectories.
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProjectorChoice {
    /// Keep the block-diagonal part in the auxiliary basis.
    Block,
    /// Replace the auxiliary factor by the initial reduced auxiliary state.
    Product,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "full-sme")]
    pub engine: EngineChoice,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of trajectories; > 1 switches stochastic engines to mean/SE
    /// output.
    #[arg(long, default_value_t = 1)]
    pub traj: usize,
    #[arg(long, value_enum, default_value = "block")]
    pub projector: ProjectorChoice,
    /// Truncate the memory integral of the reduced engines to this width.
    #[arg(long)]
    pub window: Option<f64>,
    /// Renormalize the state to unit trace after every step.
    #[arg(long)]
    pub renorm: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for trajectory batches (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated step sizes, descending, e.g. 4e-4,2e-4,1e-4.
    #[arg(long, default_value = "4e-4,2e-4,1e-4")]
    pub dt_list: String,
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub traj: usize,
    /// Negative control: corrupt a generator and require the suite to fail.
    #[arg(long)]
    pub inject_fault: Option<String>,
    /// Optional path for the machine-readable report (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated kernel times t.
    #[arg(long)]
    pub t_samples: String,
    /// Comma-separated kernel times t' (pairs with t' > t are skipped).
    #[arg(long)]
    pub t_prime_samples: String,
    /// block: stacked-block kernel; projector: vectorized-space kernel.
    #[arg(long, value_enum, default_value = "block")]
    pub formulation: KernelFormulationChoice,
    #[arg(long, value_enum, default_value = "block")]
    pub projector: ProjectorChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelFormulationChoice {
    Block,
    Projector,
}

/// Parse argv and run; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not errors.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } => EXIT_NUMERICAL,
        Error::CheckFailed(_) => EXIT_CHECK_FAILED,
        _ => EXIT_USAGE,
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Kernel(args) => cmd_kernel(&args),
    }
}

fn effective_seed(flag_seed: u64) -> Result<u64> {
    match std::env::var("NMQ_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("NMQ_SEED='{v}' is not a valid seed"))),
        Err(_) => Ok(flag_seed),
    }
}

fn check_grid(horizon: f64, dt: f64) -> Result<usize> {
    if dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let n = horizon / dt;
    if n < 0.5 || (n - n.round()).abs() > 1e-9 * n.round().max(1.0) {
        return Err(Error::Grid(format!(
            "horizon {horizon} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(n.round() as usize)
}

fn configure_workers(workers: Option<usize>) {
    if let Some(w) = workers {
        // Later calls fail once a global pool exists; that is fine because
        // batch aggregation is order-deterministic regardless of pool size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
}

/// Reduced auxiliary state Tr_s(ϱ), used as the fixed factor of the product
/// projector.
fn aux_reduced_state(spec: &ModelSpec, init: &CMat) -> Result<CMat> {
    let mut rho_a = CMat::zeros(spec.n_a, spec.n_a);
    for j in 0..spec.n_a {
        for k in 0..spec.n_a {
            rho_a[(j, k)] = block(spec, init, j, k)?.trace();
        }
    }
    Ok(rho_a)
}

fn projector_kind(
    choice: ProjectorChoice,
    spec: &ModelSpec,
    init: &CMat,
) -> Result<ProjectorKind> {
    Ok(match choice {
        ProjectorChoice::Block => ProjectorKind::BlockDiagonal,
        ProjectorChoice::Product => ProjectorKind::Product(aux_reduced_state(spec, init)?),
    })
}

fn load_model_and_init(path: &Path) -> Result<(ModelSpec, CMat)> {
    let (spec, init) = load_model(path)?;
    let problems = validate_model(&spec);
    if !problems.is_empty() {
        return Err(Error::CheckFailed(format!(
            "model validation failed:\n  {}",
            problems.join("\n  ")
        )));
    }
    let d = spec.dim();
    // Default initial state: the first computational basis state.
    let init = init.unwrap_or_else(|| crate::algebra::basis_projector(d, 0));
    Ok((spec, init))
}

pub fn cmd_validate(model: &Path) -> Result<i32> {
    let (spec, init) = load_model(model)?;
    let mut problems = validate_model(&spec);
    // Projector sanity: idempotency and orthogonality of P and Q.
    match projector_p(&spec, &ProjectorKind::BlockDiagonal) {
        Ok((p, q)) => {
            let idem = (&p.matrix * &p.matrix - &p.matrix).norm();
            if idem > 1e-10 {
                problems.push(format!("projector not idempotent (residual {idem:.2e})"));
            }
            let cross = (&p.matrix * &q.matrix).norm();
            if cross > 1e-10 {
                problems.push(format!("P·Q does not vanish (residual {cross:.2e})"));
            }
        }
        Err(e) => problems.push(format!("projector construction failed: {e}")),
    }
    // Generator sanity: the unconditional generator preserves the trace.
    match crate::superop::lindbladian(&spec, 0.0) {
        Ok(l) => {
            let d = spec.dim();
            let mut worst = 0.0f64;
            for col in 0..d * d {
                let mut tr = crate::algebra::c(0., 0.);
                for i in 0..d {
                    tr += l.matrix[(i * d + i, col)];
                }
                worst = worst.max(tr.norm());
            }
            if worst > 1e-10 {
                problems.push(format!("generator does not preserve the trace ({worst:.2e})"));
            }
        }
        Err(e) => problems.push(format!("generator assembly failed: {e}")),
    }
    if let Some(init) = &init {
        let dm = crate::algebra::DensityMatrix::new(crate::algebra::SpaceTag::Composite, init.clone());
        problems.extend(dm.validate(1e-9).into_iter().map(|m| format!("init: {m}")));
    }
    if problems.is_empty() {
        println!("model ok: n_s = {}, n_a = {}, {} channels", spec.n_s, spec.n_a, spec.n_channels());
        Ok(EXIT_OK)
    } else {
        for p in &problems {
            eprintln!("invalid: {p}");
        }
        Ok(EXIT_CHECK_FAILED)
    }
}

#[derive(Serialize)]
struct ConfigSnapshot<'a> {
    command: &'a str,
    model: String,
    engine: &'a str,
    dt: f64,
    horizon: f64,
    seed: u64,
    traj: usize,
    projector: &'a str,
    window: Option<f64>,
    renorm: bool,
}

fn det_to_record(det: DetTrajectory, dt: f64) -> TrajectoryRecord {
    let traces = det.principal.iter().map(|m| m.trace().re).collect();
    let n = det.times.len();
    TrajectoryRecord {
        engine: det.engine,
        t0: det.times.first().copied().unwrap_or(0.0),
        dt,
        times: det.times,
        principal: det.principal,
        states: det.states,
        record_y: vec![0.0; n],
        traces,
        seed: 0,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let n_steps = check_grid(args.horizon, args.dt)?;
    if args.traj == 0 {
        return Err(Error::InvalidArgument("--traj must be >= 1".into()));
    }
    configure_workers(args.workers);
    let seed = effective_seed(args.seed)?;
    let (spec, init) = load_model_and_init(&args.model)?;
    let binit = BlockState::from_composite(&spec, &init)?;
    let kind = projector_kind(args.projector, &spec, &init)?;
    let opts = ReducedOpts { memory_window: args.window, ..Default::default() };

    std::fs::create_dir_all(&args.out)?;
    let engine_name = match args.engine {
        EngineChoice::FullSme => "full-sme",
        EngineChoice::CoupledBlocks => "coupled-blocks",
        EngineChoice::ReducedDiag => "reduced-diag",
        EngineChoice::ReducedP => "reduced-p",
        EngineChoice::Gksl => "gksl",
        EngineChoice::CoupledMe => "coupled-me",
        EngineChoice::Nz => "nz",
        EngineChoice::Mc => "mc",
    };
    let projector_name = match args.projector {
        ProjectorChoice::Block => "block",
        ProjectorChoice::Product => "product",
    };
    let snapshot = ConfigSnapshot {
        command: "simulate",
        model: args.model.display().to_string(),
        engine: engine_name,
        dt: args.dt,
        horizon: args.horizon,
        seed,
        traj: args.traj,
        projector: projector_name,
        window: args.window,
        renorm: args.renorm,
    };
    let hash_bytes = serde_json::to_vec(&snapshot)
        .map_err(|e| Error::Parse(format!("config serialization failed: {e}")))?;
    let config_hash = format!("{:016x}", fnv1a64(&hash_bytes));

    let deterministic = matches!(
        args.engine,
        EngineChoice::Gksl | EngineChoice::CoupledMe | EngineChoice::Nz
    );
    let mut outputs = Vec::new();
    let mut trajectory_seeds = Vec::new();

    if deterministic {
        let det = match args.engine {
            EngineChoice::Gksl => solve_gksl(&spec, &init, 0.0, args.dt, n_steps)?,
            EngineChoice::CoupledMe => solve_coupled_me(&spec, &binit, 0.0, args.dt, n_steps)?,
            EngineChoice::Nz => solve_nz(
                &spec,
                &kind,
                &init,
                GeneratorChoice::default(),
                NzQuadrature::default(),
                0.0,
                args.dt,
                n_steps,
            )?,
            _ => unreachable!(),
        };
        let file = args.out.join(format!("{engine_name}.csv"));
        write_trajectory_csv(&det_to_record(det, args.dt), &file)?;
        outputs.push(file.display().to_string());
    } else if args.traj == 1 && args.engine != EngineChoice::Mc {
        let traj_seed = derive_seed(seed, 0);
        trajectory_seeds.push(traj_seed);
        let path = wiener_path(traj_seed, 0.0, args.dt, n_steps)?;
        let record = match args.engine {
            EngineChoice::FullSme => run_full_sme(&spec, &init, &path, args.renorm)?,
            EngineChoice::CoupledBlocks => run_coupled_blocks(&spec, &binit, &path, args.renorm)?,
            EngineChoice::ReducedDiag => run_reduced_diag(&spec, &binit, &path, &opts)?.0,
            EngineChoice::ReducedP => run_reduced_p(&spec, &kind, &init, &path, &opts)?.0,
            _ => unreachable!(),
        };
        let file = args.out.join(format!("{engine_name}-trajectory.csv"));
        write_trajectory_csv(&record, &file)?;
        outputs.push(file.display().to_string());
    } else {
        let mc_engine = match args.engine {
            EngineChoice::FullSme => McEngine::FullSme,
            EngineChoice::CoupledBlocks | EngineChoice::Mc => McEngine::CoupledBlocks,
            EngineChoice::ReducedDiag => McEngine::ReducedDiag,
            EngineChoice::ReducedP => McEngine::ReducedP(kind.clone()),
            _ => unreachable!(),
        };
        trajectory_seeds = (0..args.traj).map(|i| derive_seed(seed, i as u64)).collect();
        let res = monte_carlo_mean(
            &spec,
            &mc_engine,
            &init,
            seed,
            args.traj,
            0.0,
            args.dt,
            n_steps,
            args.renorm,
            &opts,
        )?;
        if !res.aborted_seeds.is_empty() {
            eprintln!(
                "warning: {} of {} trajectories aborted (seeds {:?})",
                res.aborted_seeds.len(),
                res.n_requested,
                res.aborted_seeds
            );
        }
        let file = args.out.join(format!("{engine_name}-mean.csv"));
        write_mean_csv(&res, &file)?;
        outputs.push(file.display().to_string());
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "simulate".into(),
        config_hash,
        model_file: Some(args.model.display().to_string()),
        engine: engine_name.to_string(),
        t0: 0.0,
        dt: args.dt,
        horizon: args.horizon,
        n_steps,
        n_traj: args.traj,
        master_seed: seed,
        trajectory_seeds,
        generator: GENERATOR_NAME.to_string(),
        projector: Some(projector_name.to_string()),
        memory_window: args.window,
        renorm: args.renorm,
        workers: args.workers,
        fault: None,
        tolerances: Tolerances::default(),
        outputs,
    };
    write_manifest(&manifest, &args.out.join("manifest.json"))?;
    Ok(EXIT_OK)
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    let items: Vec<f64> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{what}: '{s}' is not a number")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} must not be empty")));
    }
    Ok(items)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let dt_list = parse_f64_list(&args.dt_list, "--dt-list")?;
    configure_workers(args.workers);
    let seed = effective_seed(args.seed)?;
    let (spec, init) = load_model_and_init(&args.model)?;
    let fault = match &args.inject_fault {
        Some(text) => Some(text.parse::<Fault>().map_err(Error::Parse)?),
        None => None,
    };
    let config = SuiteConfig {
        master_seed: seed,
        dt_list,
        horizon: args.horizon,
        n_traj: args.traj,
        fault,
    };
    let tol = Tolerances::default();
    let reports = consistency_suite(&spec, &init, &config, &tol)?;
    for r in &reports {
        println!("{}", r.one_line());
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let text = serde_json::to_string_pretty(&reports)
            .map_err(|e| Error::Parse(format!("report serialization failed: {e}")))?;
        std::fs::write(out, text + "\n")?;
    }
    if has_failures(&reports) {
        Ok(EXIT_CHECK_FAILED)
    } else {
        Ok(EXIT_OK)
    }
}

pub fn cmd_kernel(args: &KernelArgs) -> Result<i32> {
    let n_steps = check_grid(args.horizon, args.dt)?;
    let seed = effective_seed(args.seed)?;
    let (spec, init) = load_model_and_init(&args.model)?;
    let t_samples = parse_f64_list(&args.t_samples, "--t-samples")?;
    let t_primes = parse_f64_list(&args.t_prime_samples, "--t-prime-samples")?;
    let formulation = match args.formulation {
        KernelFormulationChoice::Block => KernelFormulation::Block,
        KernelFormulationChoice::Projector => {
            KernelFormulation::Projector(projector_kind(args.projector, &spec, &init)?)
        }
    };
    let path = wiener_path(derive_seed(seed, 0), 0.0, args.dt, n_steps)?;
    let eval = kernel_dump(
        &spec,
        &formulation,
        &init,
        &path,
        &t_samples,
        &t_primes,
        &ReducedOpts::default(),
    )?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_kernel_csv(&eval, &args.out)?;
    println!("wrote {} kernel evaluations to {}", eval.pairs.len(), args.out.display());
    Ok(EXIT_OK)
}

//! Command-line experiment runner.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::denoise::{Denoiser, DenoiserSpec, FrozenPatchWeights, Scaled};
use crate::driver::{self, DriverError, LinearFixedPointProblem, SolveConfig, SolverMethod};
use crate::extrapolation::VeMethod;
use crate::imaging::{
    self, degrade, make_psf, synthetic, Image, ImagingError, LinearOperator, PsfKind,
};
use crate::io::{self, IoError};
use crate::linalg::{dist, norm, Mat};
use crate::red::{self, check_local_homogeneity, check_passivity, RedError, RedObjective};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::NonFiniteIterate { .. } | DriverError::MapFailed { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<RedError> for CliError {
    fn from(e: RedError) -> Self {
        match e {
            RedError::CgNoConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(IoError::IoFailure {
            path: PathBuf::from("<stdout>"),
            source: e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    DeblurUniform,
    DeblurGaussian,
    Superres,
    Lindemo,
    CheckDenoiser,
}

impl Task {
    fn needs_input(self) -> bool {
        matches!(
            self,
            Task::DeblurUniform | Task::DeblurGaussian | Task::Superres
        )
    }

    fn name(self) -> &'static str {
        match self {
            Task::DeblurUniform => "deblur-uniform",
            Task::DeblurGaussian => "deblur-gaussian",
            Task::Superres => "superres",
            Task::Lindemo => "lindemo",
            Task::CheckDenoiser => "check-denoiser",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Fp,
    FpMpe,
    FpRre,
    FpSvdmpe,
    Sd,
    SdMpe,
    Nesterov,
}

impl Method {
    pub fn solver(self) -> (SolverMethod, VeMethod) {
        match self {
            Method::Fp => (SolverMethod::Fp, VeMethod::Mpe),
            Method::FpMpe => (SolverMethod::FpVe, VeMethod::Mpe),
            Method::FpRre => (SolverMethod::FpVe, VeMethod::Rre),
            Method::FpSvdmpe => (SolverMethod::FpVe, VeMethod::SvdMpe),
            Method::Sd => (SolverMethod::Sd, VeMethod::Mpe),
            Method::SdMpe => (SolverMethod::SdVe, VeMethod::Mpe),
            Method::Nesterov => (SolverMethod::Nesterov, VeMethod::Mpe),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            self.to_possible_value()
                .expect("no skipped variants")
                .get_name(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenoiserKind {
    Identity,
    Gaussian,
    Patch,
}

/// Default Gaussian-filter width for `--denoiser gaussian`.
pub const DEFAULT_GAUSSIAN_STD: f64 = 1.0;
pub const DEFAULT_GAUSSIAN_SUPPORT: usize = 5;
/// Default patch-weighted filter: 5×5 patches, 7×7 search window.
pub const DEFAULT_PATCH_RADIUS: usize = 2;
pub const DEFAULT_SEARCH_RADIUS: usize = 3;
/// Patch-filter intensity scale. Deblurring needs the stronger setting: at
/// h = 10 the weights concentrate on the centre pixel, the prior barely
/// regularizes, and the deconvolution slowly amplifies noise.
pub const DEFAULT_PATCH_H_DEBLUR: f64 = 20.0;
pub const DEFAULT_PATCH_H: f64 = 10.0;
pub const DEFAULT_ALPHA: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(
    name = "redve",
    about = "RED image restoration with vector-extrapolation acceleration",
    version
)]
struct Args {
    #[arg(long, value_enum)]
    task: Task,
    /// Ground-truth PGM image (deblur and superres tasks).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::FpMpe)]
    method: Method,
    /// Warm-up iterates skipped in each cycle [default: per task and method].
    #[arg(long)]
    m: Option<usize>,
    /// Extrapolation order [default: per task and method].
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Noise standard deviation [default: sqrt(2) deblur, 5 superres].
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Relative step-norm stopping threshold.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Plain iterations after the extrapolation phase.
    #[arg(long, default_value_t = 0)]
    stabilize: usize,
    /// Gradient step for sd / sd-mpe / nesterov [default: sigma²/(1 + 2 alpha sigma²)].
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV path [default: <output-dir>/<task>_<method>_trace.csv].
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DenoiserKind::Patch)]
    denoiser: DenoiserKind,
    #[arg(long, default_value_t = DEFAULT_GAUSSIAN_STD)]
    denoiser_std: f64,
    /// Patch-filter intensity scale [default: 20 deblur, 10 otherwise].
    #[arg(long)]
    patch_h: Option<f64>,
    /// PSF width [default: 9 deblur, 7 superres].
    #[arg(long)]
    psf_size: Option<usize>,
    /// Gaussian PSF std [default: 1.6].
    #[arg(long)]
    psf_std: Option<f64>,
    /// Downsampling factor for superres.
    #[arg(long, default_value_t = 3)]
    factor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Degradation {
    pub psf: PsfKind,
    pub psf_size: usize,
    /// `Some(s)` for blur + ×s downsampling.
    pub factor: Option<usize>,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub method: Method,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub trace: Option<PathBuf>,
    pub solver: SolveConfig,
    /// Explicit `--step-size`; otherwise derived from sigma and alpha.
    pub step_size: Option<f64>,
    pub degradation: Degradation,
    pub alpha: f64,
    pub denoiser: DenoiserSpec,
}

impl ExperimentConfig {
    pub fn restored_path(&self) -> PathBuf {
        self.output_dir
            .join(format!("{}_{}.pgm", self.task.name(), self.method))
    }

    pub fn degraded_path(&self) -> PathBuf {
        self.output_dir
            .join(format!("{}_degraded.pgm", self.task.name()))
    }

    pub fn trace_path(&self) -> PathBuf {
        self.trace.clone().unwrap_or_else(|| {
            self.output_dir
                .join(format!("{}_{}_trace.csv", self.task.name(), self.method))
        })
    }
}

/// Default `(m, κ)` for a task and method.
pub fn default_window(task: Task, method: Method) -> (usize, usize) {
    match (task, method) {
        (Task::Superres, Method::SdMpe) => (1, 10),
        (_, Method::SdMpe) => (0, 8),
        _ => (0, 5),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(format!(
        "{}\n\nflags: --task --input --output-dir --method --m --kappa --alpha --sigma \
         --max-iters --tol --stabilize --step-size --seed --trace --denoiser \
         --denoiser-std --patch-h --psf-size --psf-std --factor (see --help)",
        msg.into()
    ))
}

/// Parses command-line arguments (`argv[0]` is the program name).
/// `--help` and `--version` come back as `Err(clap::Error)` for the caller
/// to print.
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            ParseOutcome::Info(e.to_string())
        }
        _ => ParseOutcome::Error(CliError::Usage(e.to_string())),
    })?;
    build_config(args).map_err(ParseOutcome::Error)
}

/// Non-config results of [`parse_args`].
#[derive(Debug)]
pub enum ParseOutcome {
    /// Help or version text.
    Info(String),
    Error(CliError),
}

fn build_config(a: Args) -> Result<ExperimentConfig, CliError> {
    if a.task.needs_input() && a.input.is_none() {
        return Err(usage(format!(
            "--input is required for --task {}",
            a.task.name()
        )));
    }
    let (dm, dk) = default_window(a.task, a.method);
    let m = a.m.unwrap_or(dm);
    let kappa = a.kappa.unwrap_or(dk);
    if kappa == 0 {
        return Err(usage("--kappa must be at least 1"));
    }
    if !(a.alpha > 0.0 && a.alpha.is_finite()) {
        return Err(usage(format!("--alpha must be positive, got {}", a.alpha)));
    }
    let superres = a.task == Task::Superres;
    let sigma = a.sigma.unwrap_or(if superres { 5.0 } else { 2f64.sqrt() });
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(usage(format!("--sigma must be positive, got {sigma}")));
    }
    if let Some(s) = a.step_size {
        if !(s > 0.0 && s.is_finite()) {
            return Err(usage(format!("--step-size must be positive, got {s}")));
        }
    }
    if superres && a.factor == 0 {
        return Err(usage("--factor must be at least 1"));
    }

    let psf_std = a.psf_std.unwrap_or(1.6);
    let psf = match a.task {
        Task::DeblurUniform => PsfKind::Uniform,
        _ => PsfKind::Gaussian { std: psf_std },
    };
    let psf_size = a.psf_size.unwrap_or(if superres { 7 } else { 9 });
    let denoiser = match a.denoiser {
        DenoiserKind::Identity => Ok(DenoiserSpec::Identity),
        DenoiserKind::Gaussian => DenoiserSpec::gaussian(a.denoiser_std, DEFAULT_GAUSSIAN_SUPPORT),
        DenoiserKind::Patch => {
            let deblur = matches!(a.task, Task::DeblurUniform | Task::DeblurGaussian);
            let h = a.patch_h.unwrap_or(if deblur {
                DEFAULT_PATCH_H_DEBLUR
            } else {
                DEFAULT_PATCH_H
            });
            DenoiserSpec::patch_weighted(DEFAULT_PATCH_RADIUS, DEFAULT_SEARCH_RADIUS, h)
        }
    }
    .map_err(|e| usage(e.to_string()))?;

    let (method, ve_method) = a.method.solver();
    let solver = SolveConfig {
        method,
        ve_method,
        m,
        kappa,
        max_inner_steps: a.max_iters,
        tol: a.tol,
        stabilization_iters: a.stabilize,
        step_size: a.step_size.unwrap_or(1.0),
        ..SolveConfig::default()
    };
    if a.task.needs_input() {
        solver.validate().map_err(|e| usage(e.to_string()))?;
    }

    Ok(ExperimentConfig {
        task: a.task,
        method: a.method,
        input: a.input,
        output_dir: a.output_dir,
        trace: a.trace,
        solver,
        step_size: a.step_size,
        degradation: Degradation {
            psf,
            psf_size,
            factor: superres.then_some(a.factor),
            sigma,
            seed: a.seed,
        },
        alpha: a.alpha,
        denoiser,
    })
}

/// Final numbers of an image experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: String,
    pub iters: usize,
    pub final_cost: f64,
    pub final_psnr: f64,
    pub elapsed_s: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.6} {:.4} {:.3}",
            self.method, self.iters, self.final_cost, self.final_psnr, self.elapsed_s
        )
    }
}

pub const SUMMARY_HEADER: &str = "method iters final_cost final_psnr elapsed_s";

/// Runs one experiment, writing human-readable output to `out`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &mut dyn Write,
) -> Result<Option<Summary>, CliError> {
    match config.task {
        Task::Lindemo => lindemo(out).map(|_| None),
        Task::CheckDenoiser => check_denoisers(config, out).map(|_| None),
        _ => restore(config, out).map(Some),
    }
}

/// Builds the RED problem of an image task from its ground truth.
pub fn build_problem(config: &ExperimentConfig, truth: &Image) -> Result<RedObjective, CliError> {
    let d = &config.degradation;
    let psf = make_psf(d.psf, d.psf_size)?;
    let (w, h) = truth.dims();
    let op = match d.factor {
        Some(s) => LinearOperator::blur_downsample(psf, s, w, h)?,
        None => LinearOperator::blur(psf, w, h)?,
    };
    let y = degrade(truth, &op, d.sigma, d.seed)?;
    let denoiser: Arc<dyn Denoiser> = Arc::new(config.denoiser.clone());
    Ok(RedObjective::new(op, y, d.sigma, config.alpha, denoiser)?.with_reference(truth.clone())?)
}

/// Starting point: the measurement for deblurring, the rescaled adjoint for
/// super-resolution.
pub fn initial_point(obj: &RedObjective) -> Image {
    match obj.forward().kind() {
        imaging::OperatorKind::Blur => obj.y().clone(),
        imaging::OperatorKind::BlurDownsample { .. } => obj.adjoint_initialization(),
    }
}

fn restore(config: &ExperimentConfig, out: &mut dyn Write) -> Result<Summary, CliError> {
    let input = config.input.as_deref().expect("validated in parse_args");
    let truth = io::read_pgm(input)?;
    let obj = build_problem(config, &truth)?;
    let x0 = initial_point(&obj);

    let mut solver = config.solver.clone();
    solver.step_size = config
        .step_size
        .unwrap_or_else(|| red::default_step_size(obj.sigma(), obj.alpha()));
    solver.log_every = SolveConfig::default_log_every(x0.len());

    ensure_dir(&config.output_dir)?;
    io::write_pgm(config.degraded_path(), obj.y())?;

    let start = Instant::now();
    let solution = match driver::solve(&obj, x0.as_slice(), &solver) {
        Ok(s) => s,
        Err(e) => {
            if let Some(trace) = e.trace() {
                io::write_trace_csv(config.trace_path(), trace)?;
            }
            return Err(e.into());
        }
    };
    let elapsed_s = start.elapsed().as_secs_f64();

    let (w, h) = x0.dims();
    let x = Image::from_vec(w, h, solution.x.clone());
    io::write_pgm(config.restored_path(), &x)?;
    io::write_trace_csv(config.trace_path(), &solution.trace)?;

    let summary = Summary {
        method: config.method.to_string(),
        iters: solution.trace.len(),
        final_cost: obj.cost(&x)?,
        final_psnr: imaging::psnr(&x, &truth)?,
        elapsed_s,
    };
    writeln!(out, "{SUMMARY_HEADER}")?;
    writeln!(out, "{summary}")?;
    Ok(summary)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Io(IoError::IoFailure {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn lindemo(out: &mut dyn Write) -> Result<(), CliError> {
    let diag = LinearFixedPointProblem::diagonal(&[0.5, 0.25], vec![1.0, 3.0]);
    let x0 = [0.0, 0.0];

    let fp = SolveConfig {
        max_inner_steps: 60,
        ..SolveConfig::default()
    };
    let sol = driver::run_fixed_point(&diag, &x0, &fp)?;
    writeln!(
        out,
        "diag(0.5,0.25) b=(1,3): fp {} steps, error {:.3e}",
        sol.trace.len(),
        diag.relative_error(&sol.x).unwrap_or(f64::NAN)
    )?;

    for ve in [VeMethod::Mpe, VeMethod::Rre, VeMethod::SvdMpe] {
        let config = SolveConfig {
            method: SolverMethod::FpVe,
            ve_method: ve,
            m: 0,
            kappa: 2,
            max_inner_steps: 4,
            ..SolveConfig::default()
        };
        let sol = driver::run_ve_cycling(&diag, &x0, &config)?;
        let x_ext = sol
            .cycles
            .first()
            .map(|_| sol.x.clone())
            .unwrap_or_default();
        writeln!(
            out,
            "diag(0.5,0.25) b=(1,3): {ve} m=0 kappa=2, one cycle, error {:.3e}",
            diag.relative_error(&x_ext).unwrap_or(f64::NAN)
        )?;
    }

    // 6-dimensional map whose initial error has three eigen-components
    let lambdas = [0.9, 0.6, 0.3, 0.2, 0.1, 0.05];
    let a = Mat::from_diag(&lambdas);
    let x_star = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
    let problem = LinearFixedPointProblem::from_fixed_point(a, x_star.clone());
    let mut x0 = x_star.clone();
    for (i, e) in [1.0, -1.0, 2.0].iter().enumerate() {
        x0[i] -= e;
    }
    for ve in [VeMethod::Mpe, VeMethod::Rre, VeMethod::SvdMpe] {
        let config = SolveConfig {
            method: SolverMethod::FpVe,
            ve_method: ve,
            m: 2,
            kappa: 3,
            max_inner_steps: 7,
            ..SolveConfig::default()
        };
        let sol = driver::run_ve_cycling(&problem, &x0, &config)?;
        writeln!(
            out,
            "6x6, three active eigenvalues: {ve} m=2 kappa=3, one cycle, error {:.3e}, sum|gamma| {:.3}",
            dist(&sol.x, &x_star) / norm(&x_star),
            sol.max_stability_sum().unwrap_or(f64::NAN)
        )?;
    }
    Ok(())
}

fn check_denoisers(config: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let image = match &config.input {
        Some(path) => io::read_pgm(path)?,
        None => synthetic::shapes(64, 64),
    };
    let gaussian = DenoiserSpec::gaussian(DEFAULT_GAUSSIAN_STD, DEFAULT_GAUSSIAN_SUPPORT)
        .expect("valid default");
    let patch = match &config.denoiser {
        spec @ DenoiserSpec::PatchWeighted { .. } => spec.clone(),
        _ => DenoiserSpec::patch_weighted(
            DEFAULT_PATCH_RADIUS,
            DEFAULT_SEARCH_RADIUS,
            DEFAULT_PATCH_H,
        )
        .expect("valid default"),
    };
    let frozen = FrozenPatchWeights::for_spec(&patch, &image).expect("patch spec");
    let scaled = Scaled {
        scale: 1.5,
        inner: gaussian.clone(),
    };
    let denoisers: Vec<&dyn Denoiser> =
        vec![&DenoiserSpec::Identity, &gaussian, &patch, &frozen, &scaled];
    writeln!(out, "denoiser homogeneity(c=1.001) passivity passive")?;
    for d in denoisers {
        let homogeneity = check_local_homogeneity(d, &image, 1.001);
        let passivity = check_passivity(d, &image, 50);
        writeln!(
            out,
            "{} {:.3e} {:.6} {}",
            d.name().replace(' ', "_"),
            homogeneity,
            passivity.spectral_radius,
            if passivity.violates(1e-3) {
                "no"
            } else {
                "yes"
            }
        )?;
    }
    Ok(())
}

/// Parses `argv`, runs the experiment and returns the process exit code.
pub fn main_with_args<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(ParseOutcome::Info(text)) => {
            let _ = write!(out, "{text}");
            return EXIT_OK;
        }
        Err(ParseOutcome::Error(e)) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    match run_experiment(&config, out) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

//! Run configuration: CLI flags layered over an optional TOML config file,
//! validated against the preconditions of the dispatched operation before
//! anything is allocated.

use clap::{Parser, ValueEnum};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Eig,
    HardyConstants,
    Pohozaev,
    TraceCheck,
    GroundState,
    EvolveWave,
    EvolveSchrodinger,
    Multiplier,
    Observability,
    HumWave,
    HumSchrodinger,
    E1Diagnostic,
    Tu8,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Eig => "eig",
            Command::HardyConstants => "hardy-constants",
            Command::Pohozaev => "pohozaev",
            Command::TraceCheck => "trace-check",
            Command::GroundState => "ground-state",
            Command::EvolveWave => "evolve-wave",
            Command::EvolveSchrodinger => "evolve-schrodinger",
            Command::Multiplier => "multiplier",
            Command::Observability => "observability",
            Command::HumWave => "hum-wave",
            Command::HumSchrodinger => "hum-schrodinger",
            Command::E1Diagnostic => "e1-diagnostic",
            Command::Tu8 => "tu8",
        };
        f.write_str(s)
    }
}

/// Boundary-singular operator laboratory: eigenvalues, Hardy constants,
/// Pohozaev and multiplier identities, observability scans and HUM boundary
/// controls on the half-disk / half-ball.
#[derive(Debug, Parser)]
#[command(name = "hardylab", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Domain dimension (2 = half-disk, 3 = axisymmetric half-ball).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Radial node count.
    #[arg(long)]
    pub nr: Option<usize>,
    /// Angular node count.
    #[arg(long)]
    pub ntheta: Option<usize>,
    /// Domain radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Coupling constant of the singular potential.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Nonlinearity exponent (ground-state runs).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Final time.
    #[arg(long = "T", value_name = "T")]
    pub t_final: Option<f64>,
    /// Time step (default T/400).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for CG / fixed-point loops.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Seed for randomized probes and scans.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of eigenpairs.
    #[arg(long)]
    pub k: Option<usize>,
    /// Eigenmode samples in an observability scan.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Random samples in an observability scan.
    #[arg(long)]
    pub random: Option<usize>,
    /// Power-iteration refinement steps (0 = off).
    #[arg(long)]
    pub power: Option<usize>,
    /// Eigenmode index used as initial datum (1-based).
    #[arg(long)]
    pub mode_index: Option<usize>,
    /// Truncation radii for the criticality diagnostic.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Resolution ladder for the Hardy-constant trend.
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    /// Allow supercritical exponents in ground-state runs.
    #[arg(long)]
    pub exploratory: bool,
    /// Output directory (default $HARDYLAB_OUT/<command> or runs/<command>).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub dimension: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub radius: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub k: usize,
    pub modes: usize,
    pub random: usize,
    pub power: usize,
    pub mode_index: usize,
    pub epsilons: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub exploratory: bool,
    pub output_dir: PathBuf,
    /// Flags that overrode config-file values, for the manifest.
    pub overrides: Vec<String>,
}

pub fn parse_config(cli: &Cli) -> Result<RunConfig, String> {
    // layer 1: config file
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
            text.parse::<toml::Table>()
                .map_err(|e| format!("config file parse error: {e}"))?
        }
        None => toml::Table::new(),
    };
    let lookup = |section: &str, key: &str| -> Option<toml::Value> {
        file.get(section).and_then(|s| s.get(key)).cloned()
    };
    let f_num = |v: &toml::Value| -> Option<f64> {
        v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
    };

    let mut overrides = Vec::new();
    macro_rules! merge {
        ($flag:expr, $section:literal, $key:literal, $extract:expr, $name:literal) => {{
            let from_file = lookup($section, $key).and_then(|v| $extract(&v));
            match ($flag.clone(), from_file) {
                (Some(x), Some(_)) => {
                    overrides.push($name.to_string());
                    Some(x)
                }
                (Some(x), None) => Some(x),
                (None, y) => y,
            }
        }};
    }

    let dimension = merge!(cli.dim, "grid", "dimension", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "dim");
    let n_r = merge!(cli.nr, "grid", "nr", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "nr");
    let n_theta = merge!(cli.ntheta, "grid", "ntheta", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "ntheta");
    let radius = merge!(cli.radius, "grid", "radius", f_num, "radius");
    let lambda = merge!(cli.lambda, "problem", "lambda", f_num, "lambda");
    let alpha = merge!(cli.alpha, "problem", "alpha", f_num, "alpha");
    let t_final = merge!(cli.t_final, "problem", "T", f_num, "T");
    let dt = merge!(cli.dt, "problem", "dt", f_num, "dt");
    let tol = merge!(cli.tol, "problem", "tol", f_num, "tol");
    let max_iter = merge!(cli.max_iter, "problem", "max_iter", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "max_iter");
    let seed = merge!(cli.seed, "run", "seed", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as u64), "seed");
    let k = merge!(cli.k, "problem", "k", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "k");
    let modes = merge!(cli.modes, "problem", "modes", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "modes");
    let random = merge!(cli.random, "problem", "random", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "random");
    let power = merge!(cli.power, "problem", "power", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "power");
    let mode_index = merge!(cli.mode_index, "problem", "mode_index", |v: &toml::Value| v
        .as_integer()
        .map(|i| i as usize), "mode_index");
    let epsilons = merge!(
        cli.epsilons,
        "problem",
        "epsilons",
        |v: &toml::Value| v
            .as_array()
            .map(|a| a.iter().filter_map(f_num).collect::<Vec<f64>>()),
        "epsilons"
    );
    let resolutions = merge!(
        cli.resolutions,
        "problem",
        "resolutions",
        |v: &toml::Value| v.as_array().map(|a| {
            a.iter()
                .filter_map(|x| x.as_integer().map(|i| i as usize))
                .collect::<Vec<usize>>()
        }),
        "resolutions"
    );
    let output = match (
        cli.output.clone(),
        lookup("run", "output").and_then(|v| v.as_str().map(PathBuf::from)),
    ) {
        (Some(x), Some(_)) => {
            overrides.push("output".into());
            Some(x)
        }
        (Some(x), None) => Some(x),
        (None, y) => y,
    };

    // layer 2: defaults
    let command = cli.command;
    let dimension = dimension.unwrap_or(2);
    let radius = radius.unwrap_or(1.0);
    let tol = tol.unwrap_or(1e-8);
    let seed = seed.unwrap_or(42);
    let t_final = t_final.unwrap_or(match command {
        Command::HumSchrodinger => 0.5,
        _ => 2.5,
    });
    let dt = dt.unwrap_or(t_final / 400.0);
    let max_iter = max_iter.unwrap_or(400);
    let k = k.unwrap_or(1);
    let alpha = alpha.unwrap_or(2.0);
    let modes = modes.unwrap_or(3);
    let random = random.unwrap_or(4);
    let power = power.unwrap_or(0);
    let mode_index = mode_index.unwrap_or(1);
    let epsilons = epsilons.unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
    let resolutions = resolutions.unwrap_or_else(|| vec![64, 128, 256]);

    // layer 3: validation, exhaustive about what is missing or out of range
    let mut problems = Vec::new();
    if dimension != 2 && dimension != 3 {
        problems.push(format!("dim must be 2 or 3 (got {dimension})"));
    }
    let needs_grid = !matches!(command, Command::HardyConstants);
    let (n_r, n_theta) = match (n_r, n_theta) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            if needs_grid {
                if a.is_none() {
                    problems.push("missing required field: nr".into());
                }
                if b.is_none() {
                    problems.push("missing required field: ntheta".into());
                }
            }
            (a.unwrap_or(64), b.unwrap_or(64))
        }
    };
    if needs_grid && (n_r < 4 || n_theta < 4) {
        problems.push(format!("grid needs nr >= 4 and ntheta >= 4 (got {n_r}, {n_theta})"));
    }
    if !(radius > 0.0) {
        problems.push(format!("radius must be positive (got {radius})"));
    }
    let lam_limit = (dimension * dimension) as f64 / 4.0;
    let lambda = lambda.unwrap_or(0.0);
    if lambda > lam_limit {
        problems.push(format!(
            "lambda = {lambda} exceeds the critical Hardy constant lambda({dimension}) = N^2/4 = {lam_limit}"
        ));
    }
    let needs_time = matches!(
        command,
        Command::EvolveWave
            | Command::EvolveSchrodinger
            | Command::Multiplier
            | Command::Observability
            | Command::HumWave
            | Command::HumSchrodinger
    );
    if needs_time {
        if !(dt > 0.0) {
            problems.push(format!("dt must be positive (got {dt})"));
        }
        if t_final < dt {
            problems.push(format!("T = {t_final} must cover at least one step dt = {dt}"));
        }
    }
    if command == Command::GroundState {
        if dimension == 3 && !(alpha > 1.0) {
            problems.push(format!("alpha must exceed 1 (got {alpha})"));
        }
        if dimension == 2 && !(alpha > 1.0) {
            problems.push(format!("alpha must exceed 1 (got {alpha})"));
        }
    }
    if command == Command::E1Diagnostic && dimension != 2 {
        problems.push("e1-diagnostic runs on the half-disk (dim 2)".into());
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }

    let output_dir = output.unwrap_or_else(|| {
        let root = std::env::var("HARDYLAB_OUT").unwrap_or_else(|_| "runs".into());
        PathBuf::from(root).join(command.to_string())
    });

    Ok(RunConfig {
        command,
        dimension,
        n_r,
        n_theta,
        radius,
        lambda,
        alpha,
        t_final,
        dt,
        tol,
        max_iter,
        seed,
        k,
        modes,
        random,
        power,
        mode_index,
        epsilons,
        resolutions,
        exploratory: cli.exploratory,
        output_dir,
        overrides,
    })
}

impl RunConfig {
    /// Canonical one-line echo, hashed into the manifest.
    pub fn canonical_string(&self) -> String {
        format!(
            "command={} dim={} nr={} ntheta={} radius={:.17e} lambda={:.17e} alpha={:.17e} \
             T={:.17e} dt={:.17e} tol={:.17e} max_iter={} seed={} k={} modes={} random={} \
             power={} mode_index={} epsilons={:?} resolutions={:?} exploratory={}",
            self.command,
            self.dimension,
            self.n_r,
            self.n_theta,
            self.radius,
            self.lambda,
            self.alpha,
            self.t_final,
            self.dt,
            self.tol,
            self.max_iter,
            self.seed,
            self.k,
            self.modes,
            self.random,
            self.power,
            self.mode_index,
            self.epsilons,
            self.resolutions,
            self.exploratory
        )
    }
}

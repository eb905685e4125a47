use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nodeiso_core::channel::{db_to_linear, sigma_from_db};
use nodeiso_core::{Boundary, ChannelParams, DiversityScheme};

use crate::error::CliError;
use crate::sweep::{Grid, Variable};

#[derive(Parser, Debug)]
#[command(
    name = "nodeiso",
    version,
    about = "Node isolation probability of Poisson ad hoc networks under shadowing and Nakagami fading",
    allow_negative_numbers = true,
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// key=value file whose entries act as default flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for sweeps and simulations (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate E[R²] and P_I at one parameter point.
    Eval(EvalArgs),
    /// Sweep one parameter over a grid, or reproduce a figure's data.
    Sweep(SweepArgs),
    /// Estimate P_I by Monte Carlo simulation.
    Simulate(SimulateArgs),
    /// Find the node density giving a target P_I.
    Invert(InvertArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    None,
    Mrc,
    Sc,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Analytic,
    Quadrature,
    Simulation,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ChannelArgs {
    /// Transmit power, mW.
    #[arg(long)]
    pub ptx: Option<f64>,
    /// Noise power, mW.
    #[arg(long)]
    pub w: Option<f64>,
    /// Path-loss constant, linear.
    #[arg(long, conflicts_with = "k_db")]
    pub k: Option<f64>,
    /// Path-loss constant, dB.
    #[arg(long = "k-db")]
    pub k_db: Option<f64>,
    /// SNR threshold, linear.
    #[arg(long, conflicts_with = "psi_db")]
    pub psi: Option<f64>,
    /// SNR threshold, dB.
    #[arg(long = "psi-db")]
    pub psi_db: Option<f64>,
    /// Path-loss exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Shadowing spread in natural-log units.
    #[arg(long, conflicts_with = "sigma_db")]
    pub sigma: Option<f64>,
    /// Shadowing spread in dB.
    #[arg(long = "sigma-db")]
    pub sigma_db: Option<f64>,
    /// Nakagami m (positive integer).
    #[arg(long, conflicts_with = "m_real")]
    pub m: Option<u32>,
    /// Real-valued Nakagami m >= 0.5; quadrature only.
    #[arg(long = "m-real")]
    pub m_real: Option<f64>,
    /// Receive diversity scheme.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// Diversity order.
    #[arg(long = "M")]
    pub branches: Option<u32>,
}

/// Channel flags resolved into library types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub params: ChannelParams,
    pub scheme: DiversityScheme,
    pub m_real: Option<f64>,
}

impl Channel {
    pub fn m_value(&self) -> f64 {
        self.m_real.unwrap_or(self.params.m as f64)
    }
}

impl ChannelArgs {
    pub fn any_set(&self) -> bool {
        self.ptx.is_some()
            || self.w.is_some()
            || self.k.is_some()
            || self.k_db.is_some()
            || self.psi.is_some()
            || self.psi_db.is_some()
            || self.alpha.is_some()
            || self.sigma.is_some()
            || self.sigma_db.is_some()
            || self.m.is_some()
            || self.m_real.is_some()
            || self.scheme.is_some()
            || self.branches.is_some()
    }

    /// Like [`Self::resolve`], rejecting a fixed value for the swept quantity.
    pub fn resolve_for_sweep(&self, variable: Variable) -> Result<Channel, CliError> {
        let fixed = match variable {
            Variable::Lambda => false,
            Variable::Sigma => self.sigma.is_some() || self.sigma_db.is_some(),
            Variable::Alpha => self.alpha.is_some(),
            Variable::FadingM => self.m.is_some(),
            Variable::Branches => self.branches.is_some(),
        };
        if fixed {
            return Err(CliError::Usage(format!("--{} is swept and cannot also be fixed", variable.column())));
        }
        self.resolve()
    }

    pub fn resolve(&self) -> Result<Channel, CliError> {
        let base = ChannelParams::default();
        let mut params = ChannelParams {
            ptx: self.ptx.unwrap_or(base.ptx),
            w: self.w.unwrap_or(base.w),
            k: self.k.or(self.k_db.map(db_to_linear)).unwrap_or(base.k),
            psi: self.psi.or(self.psi_db.map(db_to_linear)).unwrap_or(base.psi),
            alpha: self.alpha.unwrap_or(base.alpha),
            sigma: self.sigma.or(self.sigma_db.map(sigma_from_db)).unwrap_or(base.sigma),
            m: self.m.unwrap_or(base.m),
        };
        if let Some(m) = self.m_real {
            if !(m >= 0.5) || !m.is_finite() {
                return Err(CliError::Usage(format!("--m-real must be >= 0.5, got {m}")));
            }
            params.m = 1;
        }
        let branches = self.branches.unwrap_or(1);
        let scheme = match self.scheme.unwrap_or(SchemeKind::None) {
            SchemeKind::None if branches != 1 => {
                return Err(CliError::Usage("--M needs --scheme mrc or --scheme sc".into()));
            }
            SchemeKind::None => DiversityScheme::None,
            SchemeKind::Mrc => DiversityScheme::Mrc(branches),
            SchemeKind::Sc => DiversityScheme::Sc(branches),
        };
        params.validate()?;
        scheme.validate()?;
        Ok(Channel { params, scheme: scheme.normalized(), m_real: self.m_real })
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct EvalArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Node density, nodes per m².
    #[arg(long)]
    pub lambda: f64,
    /// Methods to evaluate.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Analytic, Method::Quadrature])]
    pub outputs: Vec<Method>,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Side of the square region, m.
    #[arg(long, default_value_t = 100.0)]
    pub area: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Toroidal)]
    pub boundary: BoundaryArg,
    /// Monte Carlo replications.
    #[arg(long, default_value_t = 1000)]
    pub runs: u32,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Bounded,
    Toroidal,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Bounded => Boundary::Bounded,
            BoundaryArg::Toroidal => Boundary::Toroidal,
        }
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct SweepArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Built-in parameter set for one of the reference figures (2..7).
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=7), conflicts_with_all = ["vary", "grid"])]
    pub figure: Option<u8>,
    /// Swept quantity.
    #[arg(long, value_enum, requires = "grid")]
    pub vary: Option<Variable>,
    /// Grid values: `a,b,c`, `start:stop:n` or `start:stop:n:log`.
    #[arg(long, value_parser = crate::sweep::parse_grid)]
    pub grid: Option<Grid>,
    /// Node density for the non-λ sweeps, nodes per m².
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Also report the density giving this P_I at each point.
    #[arg(long = "target-pi")]
    pub target_pi: Option<f64>,
    /// Methods to evaluate.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub outputs: Option<Vec<Method>>,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Node density, nodes per m².
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Export the topology of one replication to this file.
    #[arg(long, value_name = "PATH")]
    pub topology: Option<PathBuf>,
    /// Replication whose topology is exported.
    #[arg(long = "topology-run", default_value_t = 0)]
    pub topology_run: u32,
    /// Run replications on the calling thread only.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct InvertArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Target isolation probability in (0, 1).
    #[arg(long = "target-pi")]
    pub target_pi: f64,
}

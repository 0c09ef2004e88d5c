use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "shockfit", version, about = "Shock fitting for 1-D scalar conservation laws with degenerate data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate the first gradient blowup.
    Blowup {
        #[command(flatten)]
        common: Common,
    },
    /// Envelope roots and cusp edges over a window of t - t*.
    Envelope {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        window: TauWindow,
    },
    /// Characteristic preimages along an x-slice at one time.
    Branches {
        #[command(flatten)]
        common: Common,
        /// Offset t - t* of the slice.
        #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
        tau: f64,
        #[command(flatten)]
        slice: XSlice,
    },
    /// Build the shock curve from the blowup point.
    Shock {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: ShockGrid,
    },
    /// Compare the fitted shock with the variational oracle.
    OracleCompare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: ShockGrid,
        #[command(flatten)]
        window: TauWindow,
        /// Oracle scan points.
        #[arg(long)]
        oracle_grid: Option<usize>,
        /// Oracle half-window around the blowup point.
        #[arg(long)]
        oracle_window: Option<f64>,
        /// Largest accepted |phi_ode - phi_lo|.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Entropy solution and derivatives on a (t, x) grid.
    SampleField {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: ShockGrid,
        #[arg(long, default_value_t = -1e-2, allow_negative_numbers = true)]
        tau_min: f64,
        #[arg(long, default_value_t = 1e-2, allow_negative_numbers = true)]
        tau_max: f64,
        /// Number of time slices.
        #[arg(long, default_value_t = 5)]
        tau_samples: usize,
        #[command(flatten)]
        slice: XSlice,
    },
    /// Run the asymptotic checks and emit a report.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: ShockGrid,
        /// Sections to run: envelope, branches, shock, bounds or all.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        lemma: Vec<Lemma>,
        #[arg(long)]
        bound_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Finite,
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum R0 {
    Zero,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Lemma {
    Envelope,
    Branches,
    Shock,
    Bounds,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value_t = Family::Finite)]
    pub family: Family,
    /// Degeneracy order of the finite family.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Correction monomials as "degree:coef,...".
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<String>,
    /// Flatness exponent of the infinite family.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = R0::Zero)]
    pub r0: R0,
    /// Location of the degenerate point.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub center: f64,
    /// key=value file mirroring these flags; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct TauWindow {
    /// Smallest t - t*.
    #[arg(long)]
    pub tau_min: Option<f64>,
    /// Largest t - t*.
    #[arg(long)]
    pub tau_max: Option<f64>,
    /// Log-spaced sample count.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct XSlice {
    #[arg(long, default_value_t = -5e-2, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, default_value_t = 5e-2, allow_negative_numbers = true)]
    pub x_max: f64,
    #[arg(long, default_value_t = 41)]
    pub x_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ShockGrid {
    /// Picard grid intervals.
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub picard_tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Blowup { common }
            | Command::Envelope { common, .. }
            | Command::Branches { common, .. }
            | Command::Shock { common, .. }
            | Command::OracleCompare { common, .. }
            | Command::SampleField { common, .. }
            | Command::Verify { common, .. } => common,
        }
    }
}

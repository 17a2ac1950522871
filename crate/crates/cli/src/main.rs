use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod io;
mod settings;

/// Exit codes: 0 pass, 2 verified failure, 1 error.
#[derive(Parser, Debug)]
#[command(name = "widthlab", version, about = "Hausdorff content, separators and width certificates on finite metric spaces")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Space (CSV matrix, space/graph JSON, generator spec) or drawing JSON.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long = "R", global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Radius cap; `inf` for none.
    #[arg(long, global = true)]
    pub zeta: Option<String>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub mesh_h: Option<f64>,
    #[arg(long, global = true)]
    pub scale_s: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<u64>,
    /// Overridden by WIDTHLAB_OUT.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Run past a failed hypothesis; the result still exits 2.
    #[arg(long, global = true)]
    pub force: bool,
    /// Flat TOML file with the same keys as the flags (underscored).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a generated space as space.json and space.csv.
    Gen,
    /// Hausdorff content of a target set.
    Content {
        /// Comma-separated point ids; all points when absent.
        #[arg(long)]
        target: Option<String>,
        /// exact, greedy or auto.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Shell-sum against content around a center.
    CoareaCheck {
        #[arg(long)]
        x: Option<u64>,
        #[arg(long)]
        r1: Option<f64>,
        #[arg(long)]
        r2: Option<f64>,
        #[arg(long)]
        shell_width: Option<f64>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Near-minimal separator with pieces of diameter at most D.
    Separate {
        #[arg(long = "D")]
        d: Option<f64>,
        #[arg(long)]
        move_budget: Option<u64>,
    },
    Decompose(DecomposeArgs),
    DecomposeChunked(DecomposeArgs),
    /// Boundary-content condition for supplied neighborhoods.
    BoundaryCheck {
        /// Ball neighborhoods of this radius (default R) when no file is given.
        #[arg(long)]
        radius: Option<f64>,
        /// JSON object from point id to neighborhood ids.
        #[arg(long)]
        neighborhoods: Option<PathBuf>,
    },
    /// Recompute a certificate's fibers against the space.
    Verify {
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Large-fiber witness for a planar drawing of metric K5.
    K5Audit {
        #[arg(long)]
        collision_tol: Option<f64>,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        snap: Option<f64>,
        /// Bends per edge of the seeded random drawing used without --input.
        #[arg(long)]
        bends: Option<u64>,
    },
    /// Decompose across multiples of the threshold table.
    Sweep {
        /// Comma-separated multipliers.
        #[arg(long)]
        multipliers: Option<String>,
        #[arg(long)]
        chunked: bool,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub base_point: Option<u64>,
    /// Multiplies every threshold in the table.
    #[arg(long)]
    pub eps_multiplier: Option<f64>,
    #[arg(long)]
    pub move_budget: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Loop soup, occupation field and squared Bessel simulations.
///
/// Every command writes a CSV (or JSON for `identity-check`) whose first
/// line records the canonical invocation, seed and version. Flags may also
/// come from a `--config` file of `key = value` lines; flags given on the
/// command line win.
#[derive(Debug, Parser)]
#[command(name = "loopfield", version, propagate_version = true)]
pub struct Cli {
    /// Master seed; replica seeds are derived from it.
    #[arg(long, global = true, env = "LOOPFIELD_SEED")]
    pub seed: Option<u64>,

    /// Number of Monte Carlo replicas (each command has its own default).
    #[arg(long, global = true)]
    pub replicas: Option<u64>,

    /// Worker threads; never changes the output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// File of `key = value` lines mirroring the command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Occupation field of the loop soup at probe points.
    SampleOccupation(OccupationArgs),
    /// Crossing probabilities Z_r from small discs to the circle of radius 1/e.
    Crossing(CrossingArgs),
    /// Probabilities Z_gamma that the thick loop at the origin reaches the circle of radius 1/e.
    Zgamma(ZgammaArgs),
    /// Signed field, thick-point weights and the signed density at probe points.
    Field(FieldArgs),
    /// Covariance of Wick powers of the occupation field.
    WickCov(WickArgs),
    /// Deterministic special-function identities on their default grids (JSON).
    IdentityCheck(IdentityArgs),
    /// Occupation field at theta = 1/2 against half the squared free field.
    GffIso(GffIsoArgs),
    /// Path-measure identity on a small built-in graph.
    BfsDynkin(BfsArgs),
    /// Squared Bessel paths and their signed field at probe times.
    Besq(BesqArgs),
    /// Two-point duality of the one-dimensional signed field.
    Duality1d(DualityArgs),
    /// Laguerre martingales of squared Bessel processes.
    Martingale1d(MartingaleArgs),
    /// Minkowski content estimate of the largest loop cluster.
    Minkowski(MinkowskiArgs),
}

#[derive(Debug, Args)]
pub struct OccupationArgs {
    /// Loop soup intensity.
    #[arg(long)]
    pub theta: f64,
    /// Lattice mesh N (vertices are (1/N) Z^2 inside the domain).
    #[arg(long, default_value_t = 32)]
    pub mesh: usize,
    /// Domain shape: disc or square.
    #[arg(long, default_value = "disc")]
    pub domain: String,
    /// Probe point `x,y`; repeatable. Defaults to the origin.
    #[arg(long = "probe")]
    pub probes: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CrossingArgs {
    /// Loop soup intensity.
    #[arg(long)]
    pub theta: f64,
    /// Lattice mesh N of the unit disc.
    #[arg(long, default_value_t = 64)]
    pub mesh: usize,
    /// Comma-separated radii; `e-k` stands for exp(-k).
    #[arg(long, default_value = "e-2,e-3,e-4")]
    pub r_list: String,
}

#[derive(Debug, Args)]
pub struct ZgammaArgs {
    /// Loop soup intensity.
    #[arg(long)]
    pub theta: f64,
    /// Lattice mesh N of the unit disc.
    #[arg(long, default_value_t = 64)]
    pub mesh: usize,
    /// Comma-separated thickness parameters gamma.
    #[arg(long, default_value = "0.2,0.4,0.8")]
    pub gamma_list: String,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Loop soup intensity.
    #[arg(long)]
    pub theta: f64,
    /// Thickness parameter gamma in (0, sqrt 2); the thick level is gamma^2/2.
    #[arg(long)]
    pub gamma: f64,
    /// Lattice mesh N of the unit disc.
    #[arg(long, default_value_t = 32)]
    pub mesh: usize,
    /// Probe point `x,y`; repeatable. Defaults to the origin.
    #[arg(long = "probe")]
    pub probes: Vec<String>,
}

#[derive(Debug, Args)]
pub struct WickArgs {
    /// Loop soup intensity.
    #[arg(long)]
    pub theta: f64,
    /// Wick degree at z.
    #[arg(long)]
    pub n: usize,
    /// Wick degree at w.
    #[arg(long)]
    pub m: usize,
    /// Lattice mesh N of the unit disc.
    #[arg(long, default_value_t = 32)]
    pub mesh: usize,
    /// First probe `x,y`.
    #[arg(long, default_value = "0,0")]
    pub z: String,
    /// Second probe `x,y`.
    #[arg(long, default_value = "0.125,0")]
    pub w: String,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    /// laguerre-bessel, hermite-laguerre, hermite-exp, m-gamma or all.
    #[arg(long, default_value = "all")]
    pub which: String,
    /// Parameter grid; only `default` is available.
    #[arg(long, default_value = "default")]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct GffIsoArgs {
    /// Lattice mesh N of the unit disc.
    #[arg(long, default_value_t = 16)]
    pub mesh: usize,
    /// First probe `x,y`.
    #[arg(long, default_value = "0,0")]
    pub x: String,
    /// Second probe `x,y`.
    #[arg(long, default_value = "0.125,0")]
    pub y: String,
}

#[derive(Debug, Args)]
pub struct BfsArgs {
    /// `builtin:k2` or `builtin:path3`.
    #[arg(long, default_value = "builtin:k2")]
    pub graph: String,
    /// Start vertex.
    #[arg(long, default_value_t = 0)]
    pub x: usize,
    /// End vertex.
    #[arg(long, default_value_t = 1)]
    pub y: usize,
    /// Test functional: exp (exp of minus the total occupation) or one.
    #[arg(long, default_value = "exp")]
    pub functional: String,
}

#[derive(Debug, Args)]
pub struct BesqArgs {
    /// Dimension parameter; the process is BESQ of dimension 2 theta.
    #[arg(long)]
    pub theta: f64,
    /// Simulated time span.
    #[arg(long, default_value_t = 2.0)]
    pub horizon: f64,
    /// Time step of the exact transition sampler.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Comma-separated probe times.
    #[arg(long, default_value = "0.5,1")]
    pub probe_times: String,
}

#[derive(Debug, Args)]
pub struct DualityArgs {
    /// Dimension parameter theta in (0, 1).
    #[arg(long)]
    pub theta: f64,
    /// Earlier time.
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    /// Later time.
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    /// Time step of the exact transition sampler.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct MartingaleArgs {
    /// Dimension parameter; the process is BESQ of dimension 2 theta.
    #[arg(long)]
    pub theta: f64,
    /// Polynomial degree (1 to 3).
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Comma-separated times.
    #[arg(long, default_value = "0.5,1,2")]
    pub times: String,
    /// Parameter of the Laguerre polynomial; defaults to theta.
    #[arg(long)]
    pub theta_poly: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MinkowskiArgs {
    /// Loop soup intensity.
    #[arg(long)]
    pub theta: f64,
    /// Lattice mesh N of the unit disc.
    #[arg(long, default_value_t = 64)]
    pub mesh: usize,
    /// Neighbourhood radius r.
    #[arg(long, default_value_t = 0.1)]
    pub r: f64,
    /// Normalising Z_r; estimated from an independent stream when absent.
    #[arg(long)]
    pub zr: Option<f64>,
}

//! Argument definitions and value parsers.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

#[derive(Debug, Parser)]
#[command(name = "quantumness", version, about = "Quantumness measures for oscillator and spin states")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build states.
    #[command(subcommand)]
    State(StateCmd),
    /// Evaluate a measure on a state file or a swept family.
    Measure(MeasureArgs),
    /// Search for extremal spin states.
    #[command(subcommand)]
    Search(SearchCmd),
    /// Point configurations on the sphere.
    #[command(subcommand)]
    Sphere(SphereCmd),
    /// Fisher information and Cramér–Rao bounds.
    Metrology(MetrologyArgs),
}

#[derive(Debug, Subcommand)]
pub enum StateCmd {
    /// Write one state of a family as JSON.
    Make {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Coherent,
    Fock,
    Squeezed,
    Cat,
    Padd,
    Dicke,
    SpinCoherent,
    RandomSpin,
    Stars,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Complex amplitude, e.g. `1+0.5i`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub beta: Option<Complex64>,
    /// Photon number.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dicke index 2m, from −2S to 2S in steps of 2.
    #[arg(long, allow_hyphen_values = true)]
    pub two_m: Option<i32>,
    /// Squeezing parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Squeezing angle.
    #[arg(long, default_value_t = 0.0)]
    pub theta_sq: f64,
    /// Cat sign: `+` even, `-` odd.
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<String>,
    /// Cat superposition angle, c = cos(angle); overrides --sign.
    #[arg(long)]
    pub cat_angle: Option<f64>,
    /// Photons added.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub two_s: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// PointConfig JSON whose points become the Majorana stars.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Seed for random states.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fock-space truncation tolerance.
    #[arg(long, default_value_t = quantumness::states::DEFAULT_CUTOFF_TOL)]
    pub cutoff_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureKind {
    Wehrl,
    M2,
    Ipr,
    Minf,
    Am,
    Multipoles,
    Partial,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(value_enum)]
    pub kind: MeasureKind,
    /// State JSON file; otherwise the state is built from family flags.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Order M (am, multipoles) or rank K (partial).
    #[arg(long)]
    pub order: Option<u32>,
    /// Direction for `partial`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub at_theta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub at_phi: f64,
    /// Sweep a family parameter, `--sweep beta 0:3:0.1`; writes CSV.
    #[arg(long, num_args = 2, value_names = ["PARAM", "RANGE"])]
    pub sweep: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    /// Required for every stochastic search.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SearchCmd {
    /// Minimize A_M: states whose multipoles up to order M vanish.
    Kings {
        #[arg(long)]
        two_s: u32,
        #[arg(long)]
        order: u32,
        #[command(flatten)]
        run: SeedArgs,
    },
    /// Distance to the closest classical mixture, for a target or maximized.
    Queens {
        #[arg(long)]
        two_s: Option<u32>,
        /// Fixed target state; no search is run.
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        grid_n: Option<usize>,
        #[command(flatten)]
        run: SeedArgs,
    },
    /// Maximize the Wehrl entropy.
    WehrlMax {
        #[arg(long)]
        two_s: u32,
        #[command(flatten)]
        run: SeedArgs,
    },
    /// Minimize the Husimi maximum M∞.
    MinfMin {
        #[arg(long)]
        two_s: u32,
        #[command(flatten)]
        run: SeedArgs,
    },
    /// Largest King order versus design strength of its constellation.
    Probe {
        #[arg(long)]
        two_s: u32,
        #[command(flatten)]
        run: SeedArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum SphereCmd {
    /// Check whether a point set is a spherical t-design.
    DesignCheck {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        t: u32,
    },
    /// Minimize the Riesz energy Σ r^−d.
    Thomson {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[command(flatten)]
        run: SeedArgs,
    },
    /// Maximize the smallest pairwise angle.
    Tammes {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        run: SeedArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetrologyKind {
    /// Fisher information along one direction, or a CSV over angles.
    Qfi,
    AvgQfi,
    AvgCrb,
    Isotropy,
}

#[derive(Debug, Args)]
pub struct MetrologyArgs {
    #[arg(value_enum)]
    pub kind: MetrologyKind,
    #[arg(long)]
    pub state: PathBuf,
    /// Displacement angle (oscillator) or rotation axis polar angle (spin).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    /// Number of equally spaced angles for a CSV sweep of `qfi`.
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also with `j`).
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || format!("cannot parse complex number {s:?}");
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| err());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        x => x,
    };
    let re: f64 = re.parse().map_err(|_| err())?;
    let im: f64 = im.parse().map_err(|_| err())?;
    Ok(Complex64::new(re, im))
}

/// Parses `start:stop:step` into the grid start, start + step, … ≤ stop.
pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let err = || format!("range must be start:stop:step, got {s:?}");
    if parts.len() != 3 {
        return Err(err());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| err())?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || !(stop >= start) {
        return Err(err());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err("sweep has too many points".into());
    }
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

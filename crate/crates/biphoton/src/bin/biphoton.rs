//! Command-line front end: parse flags into a `RunConfig` and dispatch
//! to the library's command implementations. All simulation and
//! analysis logic lives in the `biphoton` library; see also the
//! runnable walkthroughs under `examples/`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use biphoton::analysis::{ScanGrid, ScanKind};
use biphoton::cli::{
    cmd_nosignal, cmd_scan, cmd_subpackets, cmd_visibility, RunConfig, SubpacketArgs,
};

#[derive(Parser)]
#[command(
    name = "biphoton",
    about = "Monte Carlo photon-pair coincidence interferometry: local sampling, \
             remote filters, post-selected fringe visibility",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file (flat key = value lines; flags override it)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all random streams
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Total number of pairs (divided across scan points)
    #[arg(long, global = true)]
    pairs: Option<u64>,
    /// Run duration instead of a pair count (unit suffix: s/ms/us/ns)
    #[arg(long, global = true)]
    duration: Option<String>,
    /// Remote idler filter: none, f1 (0.86 nm), f2 (10 nm)
    #[arg(long, global = true)]
    filter: Option<String>,
    /// Optical path difference (unit suffix: um/nm/mm; bare = um)
    #[arg(long, global = true)]
    delta: Option<String>,
    /// Spectral shape for filter and predictions: rect, gaussian, sinc2
    #[arg(long, global = true)]
    shape: Option<String>,
    /// Output CSV path (stdout when omitted; the text report then goes
    /// to stderr)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Count rates vs optical path difference (coarse envelope or fine
    /// fringes), as CSV
    Scan {
        #[command(flatten)]
        common: CommonArgs,
        /// coarse (envelope in Delta) or fine (sub-wavelength fringes)
        #[arg(long, default_value = "fine")]
        kind: String,
        /// Scan start (um; defaults: coarse 0, fine delta - 1.125)
        #[arg(long)]
        from: Option<f64>,
        /// Scan end (um; defaults: coarse 600, fine delta + 1.125)
        #[arg(long)]
        to: Option<f64>,
        /// Number of steps (points - 1); 0 gives a single row
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fine scan + cosine fit vs the analytic and overlap-formula
    /// predictions
    Visibility {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Repeated paired runs with/without the filter, z-tested for any
    /// dependence of local rates on the remote choice
    Nosignal {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of paired repetitions
        #[arg(long, default_value_t = 100)]
        repetitions: u32,
    },
    /// Wavepacket envelope, color-subpacket decomposition, and the
    /// barrier peak-advance demo, as CSV
    Subpackets {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of equal-weight color bands
        #[arg(long, default_value_t = 5)]
        bands: usize,
        /// Chirp in um per nm of detuning (default: offsets span +-W/4)
        #[arg(long)]
        chirp: Option<f64>,
        /// Comma-separated per-band transmissions, shortest wavelength
        /// (violet) first, e.g. "1,0.5,0.25,0.1,0.05"
        #[arg(long)]
        barrier: Option<String>,
        /// Envelope grid resolution, um (default W/40)
        #[arg(long)]
        resolution: Option<f64>,
        /// Envelope grid span, um (default fits all bands)
        #[arg(long)]
        span: Option<f64>,
    },
}

fn build_config(common: &CommonArgs) -> biphoton::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(pairs) = common.pairs {
        config.apply_kv("pairs", &pairs.to_string())?;
    }
    if let Some(duration) = &common.duration {
        config.apply_kv("duration", duration)?;
    }
    if let Some(filter) = &common.filter {
        config.apply_kv("filter", filter)?;
    }
    if let Some(delta) = &common.delta {
        config.apply_kv("delta", delta)?;
    }
    if let Some(shape) = &common.shape {
        config.apply_kv("shape", shape)?;
    }
    // Build once to validate early; warn (not error) if the pinhole is
    // off the degenerate wavelength 2 x pump.
    let apparatus = config.apparatus()?;
    if apparatus.source.is_nondegenerate() {
        eprintln!(
            "warning: pinhole center {} nm is not the degenerate wavelength {} nm",
            config.pinhole_center_nm,
            2.0 * config.pump_wavelength_nm
        );
    }
    Ok(config)
}

/// CSV to --out (or stdout); the human report to stdout (or stderr when
/// the CSV occupies stdout).
fn with_outputs<T>(
    out_path: &Option<PathBuf>,
    f: impl FnOnce(&mut dyn Write, &mut dyn Write) -> biphoton::Result<T>,
) -> biphoton::Result<T> {
    match out_path {
        Some(path) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
            let mut report = std::io::stdout().lock();
            let value = f(&mut file, &mut report)?;
            file.flush()?;
            Ok(value)
        }
        None => {
            let mut csv = std::io::stdout().lock();
            let mut report = std::io::stderr().lock();
            f(&mut csv, &mut report)
        }
    }
}

fn run() -> biphoton::Result<()> {
    match Cli::parse().command {
        Command::Scan {
            common,
            kind,
            from,
            to,
            steps,
        } => {
            let config = build_config(&common)?;
            let grid = match kind.as_str() {
                "coarse" => ScanGrid {
                    kind: ScanKind::CoarseDelta,
                    from_um: from.unwrap_or(0.0),
                    to_um: to.unwrap_or(600.0),
                    steps: steps.unwrap_or(120),
                },
                "fine" => {
                    let default = ScanGrid::fine_default(config.delta_um);
                    ScanGrid {
                        kind: ScanKind::FinePhase,
                        from_um: from.unwrap_or(default.from_um),
                        to_um: to.unwrap_or_else(|| {
                            from.map_or(default.to_um, |f| f + default.to_um - default.from_um)
                        }),
                        steps: steps.unwrap_or(default.steps),
                    }
                }
                other => {
                    return Err(biphoton::Error::Config(format!(
                        "scan kind must be coarse or fine, got '{other}'"
                    )))
                }
            };
            with_outputs(&common.out, |csv, _| cmd_scan(&config, &grid, csv))?;
        }
        Command::Visibility { common } => {
            let config = build_config(&common)?;
            with_outputs(&common.out, |csv, report| {
                cmd_visibility(&config, csv, report)
            })?;
        }
        Command::Nosignal {
            common,
            repetitions,
        } => {
            let config = build_config(&common)?;
            with_outputs(&common.out, |csv, report| {
                cmd_nosignal(&config, repetitions, csv, report)
            })?;
        }
        Command::Subpackets {
            common,
            bands,
            chirp,
            barrier,
            resolution,
            span,
        } => {
            let config = build_config(&common)?;
            let barrier = match barrier {
                Some(list) => Some(
                    list.split(',')
                        .map(|t| {
                            t.trim().parse::<f64>().map_err(|_| {
                                biphoton::Error::Config(format!("barrier: bad transmission '{t}'"))
                            })
                        })
                        .collect::<biphoton::Result<Vec<f64>>>()?,
                ),
                None => None,
            };
            let args = SubpacketArgs {
                n_bands: bands,
                chirp_um_per_nm: chirp,
                barrier,
                grid_resolution_um: resolution,
                grid_span_um: span,
            };
            with_outputs(&common.out, |csv, report| {
                cmd_subpackets(&config, &args, csv, report)
            })?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

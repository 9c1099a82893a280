//! Command-line front end: `simulate`, `reconstruct`, `slice`, `verify`.
//!
//! Exit codes: 0 success, 1 verification or solver failure, 2 config or
//! usage error, 3 I/O error.

mod manifest;
mod slice;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use manifest::{FileRecord, RunManifest};
pub use slice::{
    decode_pgm, encode_pgm, extract_slice, min_max, profile_tsv, window_to_u16, Slice,
};

use crate::config::{PhantomGrid, RunConfig};
use crate::error::{Error, Result};
use crate::io::{read_projections, read_volume, write_projections, write_volume};
use crate::operators::Axis;
use crate::pipeline::{run_two_stage, Stage, TwoStageOptions};
use crate::sim::{make_phantom, simulate_acquisition};
use crate::verify::{run_verify, Level};

#[derive(Debug, Parser)]
#[command(
    name = "dbt-recon",
    version,
    about = "Coupled low-res/high-res reconstruction for limited-arc breast tomosynthesis"
)]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the noise seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Lowres,
    Highres,
    All,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Lowres => Stage::Lowres,
            StageArg::Highres => Stage::Highres,
            StageArg::All => Stage::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Quick,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scan of the configured phantom.
    Simulate,
    /// Reconstruct from the counts named in the config.
    Reconstruct {
        #[arg(long, value_enum, default_value = "all")]
        stage: StageArg,
        /// Start the high-resolution stage from zero, without background removal.
        #[arg(long)]
        zeroinit: bool,
    },
    /// Write one plane of a volume as a 16-bit PGM, optionally with a line profile.
    Slice {
        volume: PathBuf,
        #[arg(long, value_enum, default_value = "z")]
        axis: AxisArg,
        /// Plane index (default: middle).
        #[arg(long)]
        index: Option<usize>,
        /// Gray window `lo,hi` (default: slice min,max).
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        /// Image path (default: `<out-dir>/<stem>_<axis><index>.pgm`).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the values along this slice row as TSV.
        #[arg(long)]
        profile_row: Option<usize>,
        /// Second volume added as a profile column.
        #[arg(long, requires = "profile_row")]
        compare: Option<PathBuf>,
    },
    /// Run the built-in verification suites.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(hi > lo) {
        return Err("window needs hi > lo".into());
    }
    Ok((lo, hi))
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Shape(_) | Error::Geometry(_) => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::Verification(_) | Error::Divergence { .. } | Error::NormNotConverged { .. } => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Simulate counts and ground truth into the output directory.
pub fn cmd_simulate(cli: &Cli) -> Result<RunManifest> {
    let cfg = load_config(cli)?;
    let dir = &cli.out_dir;
    ensure_dir(dir)?;
    let mut manifest = RunManifest::new(
        "simulate",
        cli.config.as_deref(),
        cfg.hash(),
        cfg.to_toml(),
        cfg.seed,
    );
    if let Some(p) = &cli.config {
        manifest.add_input(p)?;
    }
    let geom = cfg.raw_geometry()?;
    let low_grid = cfg.lowres_grid()?;
    let high_grid = cfg.highres_grid()?;
    let truth_low = make_phantom(&cfg.phantom, low_grid)?;
    let source = match cfg.data.phantom_grid {
        PhantomGrid::Lowres => truth_low.clone(),
        PhantomGrid::Highres => make_phantom(&cfg.phantom, high_grid)?,
    };
    let acq = simulate_acquisition(
        &source,
        &geom,
        &cfg.artifacts,
        &cfg.noise,
        Some(cfg.geometry.strip()),
        cfg.seed,
    )?;
    let mut prov = std::collections::BTreeMap::new();
    prov.insert("config_hash".to_string(), cfg.hash());
    prov.insert("seed".to_string(), cfg.seed.to_string());

    let counts_path = resolve(dir, &cfg.data.counts);
    write_projections(&counts_path, &acq.counts, "counts", &prov)?;
    manifest.add_output(&counts_path)?;
    for (name, p) in [
        ("line_integrals.f32", &acq.clean),
        ("artifact.f32", &acq.artifact),
    ] {
        let path = dir.join(name);
        write_projections(&path, p, "1", &prov)?;
        manifest.add_output(&path)?;
    }
    for (name, v) in [
        ("truth_lowres.f32", &truth_low),
        ("truth_source.f32", &source),
    ] {
        let path = dir.join(name);
        write_volume(&path, v, &prov)?;
        manifest.add_output(&path)?;
    }
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    manifest.add_output(&cfg_path)?;
    manifest.write(&dir.join("manifest_simulate.json"))?;
    Ok(manifest)
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Run reconstruction stages on the simulated or measured counts.
pub fn cmd_reconstruct(cli: &Cli, stage: Stage, zeroinit: bool) -> Result<RunManifest> {
    let cfg = load_config(cli)?;
    let dir = &cli.out_dir;
    ensure_dir(dir)?;
    let counts_path = resolve(dir, &cfg.data.counts);
    let counts = read_projections(&counts_path)?;
    let name = if zeroinit {
        "reconstruct-zeroinit"
    } else {
        "reconstruct"
    };
    let mut manifest = RunManifest::new(
        name,
        cli.config.as_deref(),
        cfg.hash(),
        cfg.to_toml(),
        cfg.seed,
    );
    if let Some(p) = &cli.config {
        manifest.add_input(p)?;
    }
    manifest.add_input(&counts_path)?;
    let out = run_two_stage(
        &counts,
        &cfg,
        TwoStageOptions { stage, zeroinit },
        Some(dir),
    )?;
    for p in &out.written {
        manifest.add_output(p)?;
    }
    let suffix = match (stage, zeroinit) {
        (_, true) => "_zeroinit",
        (Stage::Lowres, _) => "_lowres",
        (Stage::Highres, _) => "_highres",
        (Stage::All, _) => "",
    };
    manifest.write(&dir.join(format!("manifest_reconstruct{suffix}.json")))?;
    Ok(manifest)
}

/// Files written by `slice`.
#[derive(Debug, Clone)]
pub struct SliceOutput {
    pub image: PathBuf,
    pub profile: Option<PathBuf>,
    pub window: (f64, f64),
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_slice(
    out_dir: &Path,
    volume: &Path,
    axis: Axis,
    index: Option<usize>,
    window: Option<(f64, f64)>,
    output: Option<&Path>,
    profile_row: Option<usize>,
    compare: Option<&Path>,
) -> Result<SliceOutput> {
    let vol = read_volume(volume)?;
    let index = index.unwrap_or(vol.dims()[axis.index()] / 2);
    let sl = extract_slice(&vol, axis, index)?;
    let window = window.unwrap_or_else(|| min_max(&sl.data));
    let stem = volume
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("slice");
    let axis_name = format!("{axis:?}").to_lowercase();
    let image = match output {
        Some(p) => p.to_path_buf(),
        None => {
            ensure_dir(out_dir)?;
            out_dir.join(format!("{stem}_{axis_name}{index}.pgm"))
        }
    };
    slice::write_bytes(&image, &encode_pgm(&sl, window.0, window.1))?;
    let profile = match profile_row {
        None => None,
        Some(row) => {
            let other = compare.map(read_volume).transpose()?;
            let other_slice = other
                .as_ref()
                .map(|v| extract_slice(v, axis, index))
                .transpose()?;
            let mut cols = vec![(stem, &sl)];
            let other_stem = compare
                .and_then(|p| p.file_stem())
                .and_then(|s| s.to_str())
                .unwrap_or("compare")
                .to_string();
            if let Some(o) = &other_slice {
                cols.push((other_stem.as_str(), o));
            }
            let text = profile_tsv(&cols, row)?;
            let path = image.with_extension("tsv");
            slice::write_bytes(&path, text.as_bytes())?;
            Some(path)
        }
    };
    Ok(SliceOutput {
        image,
        profile,
        window,
    })
}

pub fn cmd_verify(level: Level) -> Result<()> {
    let report = run_verify(level)?;
    print!("{}", report.to_text());
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<_> = report.failures().iter().map(|c| c.name.clone()).collect();
        Err(Error::Verification(names.join(", ")))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Simulate => {
            let m = cmd_simulate(cli)?;
            println!(
                "simulate: wrote {} files to {}",
                m.outputs.len(),
                cli.out_dir.display()
            );
        }
        Command::Reconstruct { stage, zeroinit } => {
            let m = cmd_reconstruct(cli, (*stage).into(), *zeroinit)?;
            println!(
                "reconstruct: wrote {} files to {}",
                m.outputs.len(),
                cli.out_dir.display()
            );
        }
        Command::Slice {
            volume,
            axis,
            index,
            window,
            output,
            profile_row,
            compare,
        } => {
            let out = cmd_slice(
                &cli.out_dir,
                volume,
                (*axis).into(),
                *index,
                *window,
                output.as_deref(),
                *profile_row,
                compare.as_deref(),
            )?;
            println!(
                "slice: {} (window {:.4e}, {:.4e})",
                out.image.display(),
                out.window.0,
                out.window.1
            );
            if let Some(p) = out.profile {
                println!("profile: {}", p.display());
            }
        }
        Command::Verify { level } => cmd_verify(match level {
            LevelArg::Quick => Level::Quick,
            LevelArg::Full => Level::Full,
        })?,
    }
    Ok(())
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

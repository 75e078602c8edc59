use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use lamwave_core::compare::{compare_to_branch, write_reports_csv, ComparisonReport};
use lamwave_core::config::RunConfig;
use lamwave_core::fk_transform::{default_nu_grid, nudft2, peak_search};
use lamwave_core::global_matrix::{
    dispersion_sweep, phase_velocity, read_branches_csv, write_branches_csv, DispersionBranch,
    ModeLabel,
};
use lamwave_core::outlier_filter::{filter, read_kept_csv};
use lamwave_core::wavefield::{load_wavefield, save_wavefield, synthesize, WavefieldFormat};
use lamwave_core::Error;

mod svg;

#[derive(Parser)]
#[command(
    name = "lamwave",
    version,
    about = "Guided-wave dispersion curves and line-scan wavenumber extraction"
)]
struct Cli {
    /// Worker threads for the parallel stages; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a preset run configuration.
    Init {
        #[arg(long, value_enum, default_value_t = Preset::Fml)]
        preset: Preset,
        #[command(flatten)]
        io: Io,
    },
    /// Compute labeled dispersion branches of the configured laminate.
    Dispersion {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        band: Band,
    },
    /// Synthesize a line-scan wavefield from dispersion branches.
    Synth {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        band: Band,
        /// Branch CSV written by `dispersion`.
        #[arg(long)]
        branches: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Transform a wavefield, pick peaks and filter them against reference branches.
    Extract {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        band: Band,
        /// Wavefield file (CSV or binary).
        #[arg(long)]
        wavefield: PathBuf,
        /// Reference branch CSV used for mode assignment.
        #[arg(long)]
        branches: PathBuf,
        /// Also write the frequency-wavenumber map.
        #[arg(long)]
        save_map: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare extracted phase velocities with reference branches.
    Compare {
        #[command(flatten)]
        io: Io,
        /// Reference branch CSV.
        #[arg(long)]
        reference: PathBuf,
        /// Filter report CSV written by `extract`; kept rows are compared.
        #[arg(long)]
        test: PathBuf,
    },
}

#[derive(Args)]
struct Io {
    /// JSON run configuration; defaults to the fiber-metal laminate preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; every artifact is written inside it.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Band {
    /// Lowest frequency, Hz.
    #[arg(long)]
    fmin: Option<f64>,
    /// Highest frequency, Hz.
    #[arg(long)]
    fmax: Option<f64>,
    /// Frequency step, Hz.
    #[arg(long)]
    df: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fml,
    Steel,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

/// Input the user has to fix: exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct BadInput(String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LAMWAVE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let bad_input = e.chain().any(|c| {
                c.is::<BadInput>()
                    || matches!(
                        c.downcast_ref::<Error>(),
                        Some(
                            Error::Json(_)
                                | Error::Parse { .. }
                                | Error::MissingColumn(_)
                                | Error::Config(_)
                        )
                    )
            });
            ExitCode::from(if bad_input { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!(BadInput("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("setting up the worker pool")?;
    }
    match cli.command {
        Command::Init { preset, io } => cmd_init(preset, &io),
        Command::Dispersion { io, band } => cmd_dispersion(&io, &band),
        Command::Synth {
            io,
            band,
            branches,
            format,
        } => cmd_synth(&io, &band, &branches, format),
        Command::Extract {
            io,
            band,
            wavefield,
            branches,
            save_map,
            format,
        } => cmd_extract(&io, &band, &wavefield, &branches, save_map, format),
        Command::Compare {
            io,
            reference,
            test,
        } => cmd_compare(&io, &reference, &test),
    }
}

fn load_config(io: &Io) -> Result<RunConfig> {
    let mut cfg = match &io.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::fml(),
    };
    if let Some(seed) = io.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Creates the output directory and returns a writer for a file inside it.
fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    info!("writing {}", path.display());
    Ok(BufWriter::new(f))
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<()> {
    use std::io::Write;
    let mut w = create(out, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn read_branches(path: &Path) -> Result<Vec<DispersionBranch>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_branches_csv(f).with_context(|| format!("reading branches from {}", path.display()))
}

fn cmd_init(preset: Preset, io: &Io) -> Result<()> {
    let mut cfg = match preset {
        Preset::Fml => RunConfig::fml(),
        Preset::Steel => RunConfig::steel(),
    };
    if let Some(seed) = io.seed {
        cfg.seed = seed;
    }
    write_text(&io.out, "config.json", &(cfg.to_json() + "\n"))
}

fn cmd_dispersion(io: &Io, band: &Band) -> Result<()> {
    let mut cfg = load_config(io)?;
    let s = &mut cfg.sweep;
    s.f_min = band.fmin.unwrap_or(s.f_min);
    s.f_max = band.fmax.unwrap_or(s.f_max);
    s.df = band.df.unwrap_or(s.df);
    if band.fmin.is_some() || band.fmax.is_some() {
        let (lo, hi) = (s.f_min, s.f_max);
        s.extra.retain(|f| (lo..=hi).contains(f));
    }
    let lam = cfg.laminate().context("building the laminate")?;
    let d = lam.total_thickness_mm();
    let grid = cfg.sweep.grid()?;
    info!(
        "sweeping {} frequencies, {} layers, d = {d} mm",
        grid.len(),
        lam.len()
    );
    let res = dispersion_sweep(&lam, &grid, &cfg.sweep.solver).context("dispersion sweep")?;
    for w in &res.warnings {
        warn!("{w}");
    }
    let mut csv = create(&io.out, "branches.csv")?;
    write_branches_csv(&mut csv, &res.branches, d)?;

    let series: Vec<svg::Series> = res
        .branches
        .iter()
        .map(|b| svg::Series {
            name: b.label.to_string(),
            points: phase_velocity(b, d),
        })
        .collect();
    let title = format!("Phase velocity, {} layers, d = {d:.3} mm", lam.len());
    write_text(
        &io.out,
        "dispersion.svg",
        &svg::render(&svg::Plot {
            title: &title,
            x_label: "f d [MHz mm]",
            y_label: "c_p [m/s]",
            series: &series,
            style: svg::Style::Lines,
        }),
    )?;
    for b in &res.branches {
        println!(
            "{}\t{} points\t{:.0}..{:.0} Hz",
            b.label,
            b.points.len(),
            b.f_min(),
            b.f_max()
        );
    }
    Ok(())
}

fn cmd_synth(io: &Io, band: &Band, branches: &Path, format: Format) -> Result<()> {
    let mut cfg = load_config(io)?;
    let e = &mut cfg.excitation;
    e.f_min = band.fmin.unwrap_or(e.f_min);
    e.f_max = band.fmax.unwrap_or(e.f_max);
    e.df_within_run = band.df.unwrap_or(e.df_within_run);
    let branches = read_branches(branches)?;
    let spec = cfg.excitation();
    let x = cfg.positions()?;
    let w = synthesize(&branches, &spec, &x, &cfg.synthesis()).context("synthesis")?;
    let (name, fmt) = match format {
        Format::Csv => ("wavefield.csv", WavefieldFormat::Csv),
        Format::Bin => ("wavefield.lwf", WavefieldFormat::Bin),
    };
    fs::create_dir_all(&io.out).with_context(|| format!("creating {}", io.out.display()))?;
    let path = io.out.join(name);
    info!("writing {}", path.display());
    save_wavefield(&path, &w, fmt)?;
    println!(
        "{}\t{} samples x {} positions\t{} tones",
        path.display(),
        w.n_times(),
        w.n_positions(),
        w.meta.get("tones").map_or("?", String::as_str)
    );
    Ok(())
}

fn cmd_extract(
    io: &Io,
    band: &Band,
    wavefield: &Path,
    branches: &Path,
    save_map: bool,
    format: Format,
) -> Result<()> {
    let cfg = load_config(io)?;
    let w = load_wavefield(wavefield)
        .with_context(|| format!("loading wavefield {}", wavefield.display()))?;
    let reference = read_branches(branches)?;
    let lam = cfg.laminate().context("building the laminate")?;

    let lo = band.fmin.unwrap_or(f64::NEG_INFINITY);
    let hi = band
        .fmax
        .unwrap_or(f64::INFINITY)
        .min(0.5 * w.sample_rate());
    let mut f_grid: Vec<f64> = match band.df {
        Some(df) if df > 0.0 => {
            let start = band.fmin.unwrap_or(df);
            (0..)
                .map(|i| start + i as f64 * df)
                .take_while(|f| *f <= hi)
                .collect()
        }
        Some(df) => bail!(BadInput(format!("--df must be positive, got {df}"))),
        None => cfg
            .excitation()
            .all_tones()?
            .into_iter()
            .map(|t| t.0)
            .collect(),
    };
    f_grid.retain(|f| (lo..=hi).contains(f));
    if f_grid.is_empty() {
        bail!(BadInput(
            "no analysis frequencies inside the requested band".into()
        ));
    }
    let nu_max = cfg.transform.nu_max.unwrap_or(0.5 / w.min_spacing());
    let nu_grid = default_nu_grid(w.path_length, nu_max, cfg.transform.zero_pad);
    info!("transform on {} x {} grid", f_grid.len(), nu_grid.len());
    let map = nudft2(&w, &f_grid, &nu_grid).context("transform stage")?;
    if save_map {
        let (name, binary) = match format {
            Format::Csv => ("fk_map.csv", false),
            Format::Bin => ("fk_map.lfk", true),
        };
        fs::create_dir_all(&io.out)?;
        map.save(&io.out.join(name), binary)
            .context("writing the map")?;
    }
    let peaks = peak_search(&map, &cfg.transform.peaks);
    peaks.write_csv(create(&io.out, "peaks.csv")?)?;

    let fcfg = cfg.filter_config(lam.total_thickness_mm(), w.min_spacing());
    let report = filter(&peaks.peaks, &reference, &fcfg).context("filter stage")?;
    report.write_csv(create(&io.out, "filter_report.csv")?, &fcfg)?;
    let summary = report.summary();
    write_text(
        &io.out,
        "summary.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    println!("{} peaks", peaks.len());
    for (mode, c) in &summary {
        println!("{mode}\tkept {}\trejected {}", c.kept, c.rejected);
    }
    Ok(())
}

fn cmd_compare(io: &Io, reference: &Path, test: &Path) -> Result<()> {
    let cfg = load_config(io)?;
    let d = cfg
        .laminate()
        .context("building the laminate")?
        .total_thickness_mm();
    let reference = read_branches(reference)?;
    let f = File::open(test).with_context(|| format!("opening {}", test.display()))?;
    let kept = read_kept_csv(f).with_context(|| format!("reading {}", test.display()))?;
    let mut by_mode: BTreeMap<ModeLabel, Vec<(f64, f64)>> = BTreeMap::new();
    for (mode, p) in kept {
        by_mode.entry(mode).or_default().push((p.f, p.nu));
    }
    let mut reports: Vec<ComparisonReport> = Vec::new();
    for (mode, pts) in &by_mode {
        let Some(branch) = reference.iter().find(|b| b.label == *mode) else {
            warn!("no reference branch for {mode}");
            continue;
        };
        match compare_to_branch(branch, pts, d) {
            Ok(r) => reports.push(r),
            Err(Error::EmptyOverlap(m)) => warn!("{m}: no overlap with the reference"),
            Err(e) => return Err(e).context("compare stage"),
        }
    }
    if reports.is_empty() {
        bail!("nothing to compare: no kept mode overlaps a reference branch");
    }
    write_reports_csv(create(&io.out, "comparison.csv")?, &reports)?;
    let series: Vec<svg::Series> = reports
        .iter()
        .map(|r| svg::Series {
            name: r.mode.clone(),
            points: r
                .rows
                .iter()
                .map(|row| (row.fd, 100.0 * row.rel_diff))
                .collect(),
        })
        .collect();
    write_text(
        &io.out,
        "comparison.svg",
        &svg::render(&svg::Plot {
            title: "Relative phase-velocity difference",
            x_label: "f d [MHz mm]",
            y_label: "(c_test - c_ref) / c_ref [%]",
            series: &series,
            style: svg::Style::Markers,
        }),
    )?;
    for r in &reports {
        println!(
            "{}\t{} points\tf*d {:.4}..{:.4}\tmean |rel| {:.3e}\tmax |rel| {:.3e}",
            r.mode,
            r.summary.count,
            r.overlap.0,
            r.overlap.1,
            r.summary.mean_abs,
            r.summary.max_abs
        );
    }
    Ok(())
}

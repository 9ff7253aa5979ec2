use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use oamturb::channel::{analytic_density_matrix, ChannelParams, StrengthConvention};
use oamturb::entanglement::{negativity, negativity_closed_form, ClosedFormParams};
use oamturb::experiment::{
    emit_outputs, run_sweep, uniform_w_grid, ConfigFile, GridSection, OutputSection, SweepConfig,
    SweepSection, TomographySection, DEFAULT_SEED,
};
use oamturb::rng::derive_seed;
use oamturb::tomography::{
    simulate_counts, tomography_negativity, write_counts_csv, ReconstructionMethod, Reconstructor,
    DEFAULT_BOOTSTRAP, DEFAULT_INTEGRATION,
};
use oamturb::turbulence::{
    estimate_structure_fn, generate_screen, structure_fn_kolmogorov, ScreenSpec,
    DEFAULT_SUBGRID_LEVELS,
};

#[derive(Parser)]
#[command(name = "oamturb", version, about = "OAM qutrit entanglement through single-phase-screen turbulence")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the turbulence strength and write CSV/JSON/SVG results.
    Sweep(Box<SweepArgs>),
    /// Generate Kolmogorov screens and check their structure function.
    Screens(ScreensArgs),
    /// Print the closed-form negativity table.
    Negativity(NegativityArgs),
    /// Simulated tomography at a single strength.
    Tomo(TomoArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file; command-line flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    ell: Option<Vec<u32>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Basis waist in metres.
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    w_max: Option<f64>,
    #[arg(long)]
    w_steps: Option<usize>,
    /// Explicit comma-separated strengths (must start at 0).
    #[arg(long, value_delimiter = ',')]
    w_values: Option<Vec<f64>>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Screen and quadrature sample spacing in metres.
    #[arg(long)]
    grid_delta: Option<f64>,
    #[arg(long)]
    subgrid_levels: Option<u32>,
    #[arg(long)]
    flux: Option<f64>,
    /// Reconstruct every realization from Poisson counts.
    #[arg(long)]
    noise: bool,
    /// Refine reconstructions with maximum likelihood.
    #[arg(long)]
    ml: bool,
    #[arg(long)]
    integration: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    /// w0_over_r0 or wp_over_r0.
    #[arg(long)]
    w_convention: Option<String>,
    /// kolmogorov or tilt.
    #[arg(long)]
    screen_model: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
}

impl SweepArgs {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            sweep: SweepSection {
                ell: self.ell.clone(),
                alpha: self.alpha,
                w0: self.w0,
                w_max: self.w_max,
                w_steps: self.w_steps,
                w_values: self.w_values.clone(),
                realizations: self.realizations,
                seed: self.seed,
                w_convention: self.w_convention.clone(),
                screen_model: self.screen_model.clone(),
            },
            grid: GridSection {
                grid_n: self.grid_n,
                grid_delta: self.grid_delta,
                subgrid_levels: self.subgrid_levels,
            },
            tomography: TomographySection {
                flux: self.flux,
                noise: self.noise.then_some(true),
                integration: self.integration,
                bootstrap: self.bootstrap,
                ml: self.ml.then_some(true),
            },
            output: OutputSection { out: self.out.clone(), format: self.format.clone() },
        }
    }
}

#[derive(Args)]
struct ScreensArgs {
    #[arg(long, default_value_t = 512)]
    grid_n: usize,
    /// Sample spacing in metres.
    #[arg(long, default_value_t = 1.0e-5)]
    grid_delta: f64,
    /// Fried parameter in metres.
    #[arg(long, default_value_t = 1.0e-3)]
    r0: f64,
    #[arg(long, default_value_t = DEFAULT_SUBGRID_LEVELS)]
    subgrid_levels: u32,
    /// Number of screens (two per synthesis call).
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory for binary screens plus metadata sidecars; omitted to only validate.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail if the estimated structure function deviates more than this fraction.
    #[arg(long, default_value_t = 0.10)]
    tolerance: f64,
}

#[derive(Args)]
struct NegativityArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    ell: Vec<u32>,
    #[arg(long, default_value_t = 0.59)]
    alpha: f64,
    #[arg(long, default_value_t = 1.5)]
    w_max: f64,
    #[arg(long, default_value_t = 16)]
    w_steps: usize,
    #[arg(long, value_delimiter = ',')]
    w_values: Option<Vec<f64>>,
    /// csv or json; plain aligned text otherwise.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct TomoArgs {
    #[arg(long, default_value_t = 1)]
    ell: u32,
    #[arg(long, default_value_t = 0.59)]
    alpha: f64,
    /// Turbulence strength.
    #[arg(long, default_value_t = 0.68)]
    w: f64,
    #[arg(long, default_value = "w0_over_r0")]
    w_convention: String,
    #[arg(long, default_value_t = 5.0e3)]
    flux: f64,
    #[arg(long, default_value_t = DEFAULT_INTEGRATION)]
    integration: f64,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    ml: bool,
    /// Write the simulated counts here as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut config = SweepConfig::default();
    if let Some(path) = &args.config {
        config = ConfigFile::load(path)?.apply(config)?;
    }
    let config = args.overrides().apply(config)?;
    let start = Instant::now();
    let result = run_sweep(&config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let files = emit_outputs(&result, &config.output_dir)?;

    println!("{:>3} {:>7} {:>12} {:>9} {:>12} {:>9}", "ell", "W", "neg_mc", "err", "neg_quad", "central");
    for p in &result.points {
        println!(
            "{:>3} {:>7.4} {:>12.6} {:>9.6} {:>12.6} {:>9.4}",
            p.ell, p.w, p.negativity_mc, p.err, p.negativity_analytic, p.central_element
        );
    }
    let timing = config.output_dir.join("timing.txt");
    std::fs::write(&timing, format!("sweep_seconds = {elapsed:.3}\n"))
        .with_context(|| format!("writing {}", timing.display()))?;
    eprintln!("wrote {} files to {} in {elapsed:.1} s", files.len(), config.output_dir.display());
    Ok(())
}

fn screens(args: &ScreensArgs) -> Result<()> {
    let spec = ScreenSpec::new(args.grid_n, args.grid_delta, args.r0, args.subgrid_levels)?;
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let mut screens = Vec::with_capacity(args.count);
    for call in 0..args.count.div_ceil(2) {
        let (re, im) = generate_screen(&spec, derive_seed(args.seed, &[call as u64]));
        screens.push(re);
        screens.push(im);
    }
    screens.truncate(args.count);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (k, s) in screens.iter().enumerate() {
            s.write_files(&dir.join(format!("screen_{k:04}.bin")))?;
        }
    }
    let mut seps = Vec::new();
    let mut s = 2;
    while s <= args.grid_n / 8 {
        seps.push(s);
        s *= 2;
    }
    let est = estimate_structure_fn(&screens, &seps)?;
    println!("{:>6} {:>12} {:>12} {:>12} {:>8}", "px", "separation", "estimate", "theory", "ratio");
    let mut worst = 0.0f64;
    for e in &est {
        let theory = structure_fn_kolmogorov(e.separation, args.r0);
        let ratio = e.value / theory;
        worst = worst.max((ratio - 1.0).abs());
        println!("{:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>8.4}", e.separation_samples, e.separation, e.value, theory, ratio);
    }
    if worst > args.tolerance {
        bail!("structure function deviates by {:.1}% (tolerance {:.1}%)", 100.0 * worst, 100.0 * args.tolerance);
    }
    Ok(())
}

fn negativity_table(args: &NegativityArgs) -> Result<()> {
    let grid = args.w_values.clone().unwrap_or_else(|| uniform_w_grid(args.w_max, args.w_steps));
    let mut rows = Vec::new();
    for &ell in &args.ell {
        for &w in &grid {
            let a = negativity_closed_form(&ClosedFormParams::from_strength(ell, args.alpha, w, StrengthConvention::W0OverR0)?);
            let b = negativity_closed_form(&ClosedFormParams::from_strength(ell, args.alpha, w, StrengthConvention::WpOverR0)?);
            rows.push((ell, w, a.value, b.value));
        }
    }
    match args.format.as_deref() {
        Some("csv") => {
            println!("ell,W,negativity_w0_over_r0,negativity_wp_over_r0");
            for (l, w, a, b) in rows {
                println!("{l},{w},{a},{b}");
            }
        }
        Some("json") => {
            let items: Vec<String> = rows
                .iter()
                .map(|(l, w, a, b)| format!(r#"{{"ell":{l},"W":{w},"negativity_w0_over_r0":{a},"negativity_wp_over_r0":{b}}}"#))
                .collect();
            println!("[{}]", items.join(","));
        }
        None => {
            println!("{:>3} {:>7} {:>12} {:>12}", "ell", "W", "W=w0/r0", "W=wp/r0");
            for (l, w, a, b) in rows {
                println!("{l:>3} {w:>7.4} {a:>12.6} {b:>12.6}");
            }
        }
        Some(other) => bail!("unknown format `{other}` (csv or json)"),
    }
    Ok(())
}

fn tomo(args: &TomoArgs) -> Result<()> {
    let convention = StrengthConvention::parse(&args.w_convention)?;
    let params = ChannelParams::from_strength(args.alpha, args.w, convention)?;
    let truth = analytic_density_matrix(args.ell, &params)?;
    let method = if args.ml { ReconstructionMethod::MaximumLikelihood } else { ReconstructionMethod::Linear };
    let rec = Reconstructor::standard().with_method(method);
    let (rho, boot) = tomography_negativity(&rec, &truth, args.flux, args.integration, args.bootstrap, args.seed)?;
    println!("true negativity (quadratic model): {:.6}", negativity(&truth)?.value);
    println!("reconstructed negativity:          {:.6} ± {:.6} ({} bootstrap replicas)", boot.value, boot.std_dev, boot.replicas);
    println!("trace distance to truth:           {:.6}", rho.trace_distance(&truth));
    if let Some(path) = &args.out {
        let counts = simulate_counts(&truth, rec.settings(), args.flux, args.integration, derive_seed(args.seed, &[0]))?;
        write_counts(path, &counts)?;
    }
    Ok(())
}

fn write_counts(path: &Path, counts: &[oamturb::tomography::CountRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    write_counts_csv(path, counts)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker pool")?;
    }
    match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Screens(a) => screens(a),
        Command::Negativity(a) => negativity_table(a),
        Command::Tomo(a) => tomo(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

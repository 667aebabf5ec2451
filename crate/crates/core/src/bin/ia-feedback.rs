use clap::{Args, Parser, Subcommand};
use ia_feedback::analysis::{adaptive_sds, candidate_models};
use ia_feedback::dps::{dimension_objective, optimal_dimension_unquantized, DpsBasis};
use ia_feedback::harness::output::emit;
use ia_feedback::harness::scenario::{parse_grid, parse_strategies};
use ia_feedback::harness::{preset, run_scenario, Axis, ConfigFile, LeakageTable, ResultTable, Scenario, Strategy};
use ia_feedback::{Error, SimConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Interference alignment with predicted, quantized channel feedback.
#[derive(Parser)]
#[command(name = "ia-feedback", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file or a figure preset.
    Simulate(SimulateArgs),
    /// Sweep one parameter of a configuration file.
    Sweep(SweepArgs),
    /// Print Slepian concentrations and the unquantized optimal dimension.
    DpsInfo(ConfigArgs),
    /// Print the rate-loss bound per dimension and the adaptive choice.
    Bound(BoundArgs),
    /// Render an SVG chart from a result or leakage CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in figure preset (fig2 … fig6).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Skip the SVG charts.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ConfigArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// snr_db, n_bits, nu_d or time_index.
    #[arg(long)]
    axis: String,
    /// start:stop:step or a comma-separated list.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated strategies, e.g. `d1,d2,adaptive,baseline,perfect`.
    #[arg(long)]
    strategies: Option<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    source: ConfigArgs,
    /// With --bits-grid, print the adaptive dimension over an SNR × N_d grid.
    #[arg(long)]
    snr_grid: Option<String>,
    #[arg(long)]
    bits_grid: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    from: PathBuf,
    /// Output file; defaults to the CSV path with an .svg extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Axis label.
    #[arg(long, default_value = "")]
    xlabel: String,
}

enum Failure {
    Config(String),
    Rejection(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::DimensionRejected { .. } | Error::UserOutOfRange { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Other(other.to_string()),
        }
    }
}

const DEFAULT_STRATEGIES: [Strategy; 3] = [Strategy::Adaptive, Strategy::Baseline, Strategy::PerfectCsi];

fn axis_label(axis: Axis) -> &'static str {
    match axis {
        Axis::SnrDb => "SNR [dB]",
        Axis::Bits => "feedback bits N_d",
        Axis::Doppler => "normalized Doppler",
        Axis::TimeIndex => "time index m",
    }
}

fn scenarios_from(source: &ConfigArgs) -> Result<Vec<Scenario>, Failure> {
    let file = source.config.as_deref().map(ConfigFile::load).transpose()?;
    match (&source.preset, file) {
        (Some(name), file) => {
            let mut scenarios = preset(name)?;
            if let Some(f) = file {
                for s in &mut scenarios {
                    f.apply_to(&mut s.base)?;
                    if let Some(st) = &f.strategies {
                        s.strategies = st.clone();
                    }
                }
            }
            Ok(scenarios)
        }
        (None, Some(f)) => {
            let axis = f.axis.unwrap_or(Axis::SnrDb);
            let grid = match (&f.grid, axis) {
                (Some(g), _) => g.clone(),
                (None, Axis::SnrDb) => vec![f.sim.snr_db()],
                (None, Axis::Bits) => vec![f.sim.bits as f64],
                (None, Axis::Doppler) => vec![f.sim.doppler],
                (None, Axis::TimeIndex) => Vec::new(),
            };
            Ok(vec![Scenario {
                name: f.name.clone().unwrap_or_else(|| "simulation".into()),
                base: f.sim.clone(),
                axis,
                grid,
                strategies: f.strategies.clone().unwrap_or_else(|| DEFAULT_STRATEGIES.to_vec()),
            }])
        }
        (None, None) => Err(Failure::Config("give --config and/or --preset".into())),
    }
}

fn print_table(table: &ResultTable) {
    println!(
        "{:<12} {:>10} {:<9} {:>9} {:>8} {:>11} {:>11} {:>8} {:>8} {:>3} {:>6}",
        "scenario", "axis", "strategy", "rate", "se", "I1", "I2", "dR_ub", "R_lb", "D", "trials"
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    for r in &table.rows {
        println!(
            "{:<12} {:>10} {:<9} {:>9.4} {:>8.4} {:>11.4e} {:>11.4e} {:>8} {:>8} {:>3} {:>6}",
            r.scenario,
            r.axis,
            r.strategy.to_string(),
            r.rate_mean,
            r.rate_se,
            r.i1_mean,
            r.i2_mean,
            opt(r.dr_ub),
            opt(r.r_lb),
            r.d_chosen.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
            r.trials
        );
    }
}

fn run_all(mut scenarios: Vec<Scenario>, run: &RunArgs) -> Result<(), Failure> {
    let mut attempted = 0;
    let mut rejected = 0;
    for s in &mut scenarios {
        if let Some(seed) = run.seed {
            s.base.seed = seed;
        }
        if let Some(t) = run.trials {
            s.base.trials = t;
        }
        let report = run_scenario(s)?;
        attempted += report.attempted;
        rejected += report.rejected;
        for (point, strategy, why) in &report.skipped {
            eprintln!("{}: {strategy} skipped at {point}: {why}", s.name);
        }
        if report.table.is_empty() {
            return Err(Failure::Other(format!("{}: no results (every trial rejected)", s.name)));
        }
        print_table(&report.table);
        let files = emit(&report.table, report.leakage.as_ref(), axis_label(s.axis), &run.out, !run.no_svg)?;
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    let rate = if attempted == 0 { 0.0 } else { rejected as f64 / attempted as f64 };
    if rate > 0.01 {
        return Err(Failure::Rejection(format!(
            "{rejected} of {attempted} trials ({:.2}%) were numerically rejected",
            100.0 * rate
        )));
    }
    if rejected > 0 {
        eprintln!("{rejected} of {attempted} trials rejected");
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let file = ConfigFile::load(&args.config)?;
    let axis: Axis = args.axis.parse()?;
    let grid = match (&args.grid, &file.grid) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(g)) => g.clone(),
        (None, None) if axis == Axis::TimeIndex => Vec::new(),
        (None, None) => return Err(Failure::Config("sweep needs --grid (or `grid` in the file)".into())),
    };
    let strategies = match &args.strategies {
        Some(s) => parse_strategies(s)?,
        None => file.strategies.clone().unwrap_or_else(|| DEFAULT_STRATEGIES.to_vec()),
    };
    let scenario = Scenario {
        name: file.name.clone().unwrap_or_else(|| format!("sweep-{axis}")),
        base: file.sim.clone(),
        axis,
        grid,
        strategies,
    };
    run_all(vec![scenario], &args.run)
}

fn base_config(source: &ConfigArgs) -> Result<SimConfig, Failure> {
    if source.preset.is_none() && source.config.is_none() {
        return Ok(SimConfig::default());
    }
    Ok(scenarios_from(source)?.remove(0).base)
}

fn dps_info(source: &ConfigArgs) -> Result<(), Failure> {
    let cfg = base_config(source)?;
    let basis = DpsBasis::new(cfg.pilot_len, cfg.doppler, cfg.horizon())?;
    println!("M = {}, nu_D = {}, horizon = {}", cfg.pilot_len, cfg.doppler, cfg.horizon());
    println!("{:>3} {:>14} {:>14}", "p", "kappa", "objective");
    for (p, k) in basis.concentration().iter().enumerate() {
        let obj = if cfg.doppler > 0.0 {
            format!("{:>14.6e}", dimension_objective(basis.concentration(), cfg.doppler, cfg.power, p + 1))
        } else {
            "-".into()
        };
        println!("{:>3} {:>14.6e} {obj}", p, k);
    }
    println!("usable dimensions: {}", basis.max_dimension());
    println!(
        "D_ub at P = {:.1} dB: {}",
        cfg.snr_db(),
        optimal_dimension_unquantized(cfg.pilot_len, cfg.doppler, cfg.power)?
    );
    Ok(())
}

fn bound(args: &BoundArgs) -> Result<(), Failure> {
    let cfg = base_config(&args.source)?;
    if let (Some(snr), Some(bits)) = (&args.snr_grid, &args.bits_grid) {
        let snr = parse_grid(snr)?;
        let bits = parse_grid(bits)?;
        print!("{:>8}", "N_d\\SNR");
        for s in &snr {
            print!(" {s:>4}");
        }
        println!();
        for &b in bits.iter().rev() {
            print!("{b:>8}");
            for &s in &snr {
                let mut c = Axis::SnrDb.apply(&cfg, s)?;
                c = Axis::Bits.apply(&c, b)?;
                print!(" {:>4}", adaptive_sds(&c)?.dimension);
            }
            println!();
        }
        return Ok(());
    }
    let models = candidate_models(&cfg)?;
    println!("SNR {:.1} dB, N_d = {}, nu_D = {}", cfg.snr_db(), cfg.bits, cfg.doppler);
    println!("{:>3} {:>12} {:>12} {:>12}", "D", "dR_ub", "prediction", "quantization");
    for m in &models {
        let dec = m.decomposition(cfg.bits);
        println!("{:>3} {:>12.5} {:>12.5} {:>12.5}", m.dimension, dec.total, dec.prediction, dec.quantization);
    }
    println!("adaptive choice: D = {}", adaptive_sds(&cfg)?.dimension);
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<(), Failure> {
    let read = |p: &Path| std::fs::File::open(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())));
    let out = args.out.clone().unwrap_or_else(|| args.from.with_extension("svg"));
    let stem = args.from.file_stem().and_then(|s| s.to_str()).unwrap_or("leakage");
    let svg = match ResultTable::read_csv(read(&args.from)?) {
        Ok(table) => {
            let name = table
                .scenarios()
                .into_iter()
                .next()
                .ok_or_else(|| Failure::Config("CSV has no rows".into()))?;
            table.chart(&name, &args.xlabel)
        }
        Err(_) => LeakageTable::read_csv(stem.trim_end_matches("_leakage"), read(&args.from)?)?.chart(),
    };
    std::fs::write(&out, svg).map_err(|e| Failure::Other(format!("{}: {e}", out.display())))?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => scenarios_from(&a.source).and_then(|s| run_all(s, &a.run)),
        Command::Sweep(a) => sweep(a),
        Command::DpsInfo(a) => dps_info(a),
        Command::Bound(a) => bound(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Rejection(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

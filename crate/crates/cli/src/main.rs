//! `pcm-hems`: runs the building scenarios, compares and sweeps them,
//! trains surrogates, synthesizes demand and cuts plot data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pcm_hems::par::{self, Execution};
use pcm_hems::runner::{
    self, compare_scenarios, emit_plots, melting_point_sweep, prepare_inputs, read_csv,
    surrogate_label, train_surrogate_for, write_csv, write_json, FailureRow, InputFactory,
    MeltingPoint, RunConfig, RunOptions, Scenario, SummaryRow, FAILURES_FILE, SUMMARY_FILE,
};

/// Exit status when the pipeline finished but some site failed.
const SITE_FAILURE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "pcm-hems", version, about = "PCM building thermal simulation and HVAC scheduling")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Base directory for relative input paths in the configuration.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads: 1 runs sequentially, 0 uses every core.
    #[arg(long, short, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs the configured scenarios over every site.
    Run {
        /// Restricts the run to these scenarios (DB, DB-PCM, HEMS, HEMS-PCM).
        #[arg(long = "scenario")]
        scenarios: Vec<Scenario>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        start_day: Option<usize>,
    },
    /// Compares two scenarios of a finished run.
    Compare {
        /// Directory of a finished run.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "HEMS")]
        baseline: String,
        #[arg(long, default_value = "HEMS-PCM")]
        variant: String,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// HEMS-PCM at each melting point against HEMS without PCM.
    SweepMeltingPoint {
        #[arg(long = "melting-point", default_values = ["MT21", "MT23"])]
        melting_points: Vec<MeltingPoint>,
    },
    /// Trains, validates and saves one surrogate model.
    TrainSurrogate {
        #[arg(long, conflicts_with = "no_pcm")]
        melting_point: Option<MeltingPoint>,
        /// Trains the model of the building without PCM.
        #[arg(long)]
        no_pcm: bool,
    },
    /// Fits the demand Markov chain and samples one profile per site.
    SynthDemand,
    /// Writes plot-ready weeks for every trajectory of a finished run.
    EmitPlots {
        #[arg(long)]
        input: PathBuf,
        /// 0-based week of the trajectory; repeatable.
        #[arg(long = "week", default_values_t = [0usize])]
        weeks: Vec<usize>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report_failures(failures: usize) -> ExitCode {
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        log::error!("{failures} site run(s) failed; see {FAILURES_FILE}");
        ExitCode::from(SITE_FAILURE)
    }
}

fn run(common: &Common, exec: Execution, scenarios: Vec<Scenario>, days: Option<usize>, start_day: Option<usize>) -> Result<ExitCode> {
    let mut cfg = load_config(common)?;
    if !scenarios.is_empty() {
        cfg.scenarios = scenarios;
    }
    if let Some(d) = days {
        cfg.days = d;
    }
    if let Some(s) = start_day {
        cfg.start_day = s;
    }
    let opts = RunOptions { data_dir: common.data_dir.clone(), out_dir: common.out.clone(), exec };
    let outcome = runner::run(&cfg, &opts)?;
    for r in &outcome.summary {
        println!("{:<9} {:<14} cost {:>9.2}  hvac {:>8.1} kWh  toggles {}", r.scenario, r.site, r.cost, r.hvac_kwh, r.toggles);
    }
    println!("results in {}", common.out.display());
    Ok(report_failures(outcome.manifest.failures))
}

fn compare(common: &Common, input: &Path, baseline: &str, variant: &str, bins: usize) -> Result<ExitCode> {
    let rows: Vec<SummaryRow> = read_csv(&input.join(SUMMARY_FILE))?;
    let failures: Vec<FailureRow> = read_csv(&input.join(FAILURES_FILE))?;
    let cmp = compare_scenarios(&rows, &failures, baseline, variant, bins)?;
    write_csv(&common.out.join("comparison_sites.csv"), &cmp.sites)?;
    write_csv(&common.out.join("comparison_cities.csv"), &cmp.cities)?;
    write_csv(&common.out.join("histogram.csv"), &cmp.histogram)?;
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    for c in &cmp.cities {
        println!(
            "{:<10} pv {:>4} kW  sites {:>3}  saving {} % (se {})  SC reduction {} pp",
            c.city,
            c.pv_capacity_kw,
            c.sites,
            show(c.saving_percent_mean),
            show(c.saving_percent_se),
            show(c.sc_reduction_mean)
        );
    }
    let missing: usize = cmp.cities.iter().map(|c| c.missing).sum();
    if missing > 0 {
        log::warn!("{missing} site(s) lack a result in one of the scenarios");
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(common: &Common, exec: Execution, melting_points: &[MeltingPoint]) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let report = melting_point_sweep(&cfg, melting_points, common.data_dir.as_deref(), exec)?;
    report.write_table(&common.out.join("sweep.csv"))?;
    write_csv(&common.out.join("sweep_rows.csv"), &report.rows)?;
    write_csv(&common.out.join(SUMMARY_FILE), &report.summary)?;
    write_csv(&common.out.join(FAILURES_FILE), &report.failures)?;
    println!("sweep table in {}", common.out.join("sweep.csv").display());
    Ok(report_failures(report.failures.len()))
}

fn train_surrogate(common: &Common, melting_point: Option<MeltingPoint>, no_pcm: bool) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let tp = if no_pcm { None } else { Some(melting_point.unwrap_or(cfg.melting_point).celsius()) };
    let plant = cfg.building.plant(tp)?;
    let inputs = prepare_inputs(&cfg, common.data_dir.as_deref())?;
    let mut weathers: Vec<Vec<f64>> = Vec::new();
    let mut cities: Vec<&str> = Vec::new();
    for inp in inputs.iter().flatten() {
        if !cities.contains(&inp.city.as_str()) {
            cities.push(&inp.city);
            weathers.push(inp.weather.values.clone());
        }
    }
    if weathers.is_empty() {
        bail!("no site has usable weather");
    }
    let label = surrogate_label(tp);
    let (model, trained) = train_surrogate_for(&cfg, &plant, &weathers, &label)?;
    let dir = common.out.join("surrogates");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{label}.txt"));
    model.save(&path)?;
    write_json(&dir.join(format!("{label}.json")), &trained)?;
    let gate = cfg.surrogate.gate;
    let mae = trained.validation.mae;
    println!("{label}: held-out MAE {mae:.4} °C (gate {gate}) saved to {}", path.display());
    if mae <= gate {
        Ok(ExitCode::SUCCESS)
    } else {
        log::error!("model exceeds the accuracy gate and would be rejected by the optimizer");
        Ok(ExitCode::from(SITE_FAILURE))
    }
}

fn synth_demand(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let factory = InputFactory::new(&cfg, common.data_dir.as_deref())?;
    let mut failures = 0;
    for site in &cfg.sites {
        match factory.build(site) {
            Ok(inp) => {
                let path = common.out.join(format!("{}.csv", site.name));
                std::fs::create_dir_all(&common.out)?;
                inp.demand.save(&path)?;
                println!("{}: {:.1} kWh -> {}", site.name, inp.demand.total(), path.display());
            }
            Err(e) => {
                failures += 1;
                log::error!("{}: {e}", site.name);
            }
        }
    }
    Ok(report_failures(failures))
}

fn plots(common: &Common, input: &Path, weeks: &[usize]) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let written = emit_plots(input, &common.out, weeks, &cfg.tariff)?;
    println!("{} plot files under {}", written.len(), common.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = match par::configure(cli.common.jobs) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: cannot set up {} worker threads: {e}", cli.common.jobs);
            return ExitCode::FAILURE;
        }
    };
    let c = &cli.common;
    let result = match cli.command {
        Command::Run { scenarios, days, start_day } => run(c, exec, scenarios, days, start_day),
        Command::Compare { input, baseline, variant, bins } => compare(c, &input, &baseline, &variant, bins),
        Command::SweepMeltingPoint { melting_points } => sweep(c, exec, &melting_points),
        Command::TrainSurrogate { melting_point, no_pcm } => train_surrogate(c, melting_point, no_pcm),
        Command::SynthDemand => synth_demand(c),
        Command::EmitPlots { input, weeks } => plots(c, &input, &weeks),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

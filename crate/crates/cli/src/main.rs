use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use purifsim::analysis::{histogram, sliding_fidelity_by_regime, subtract_accidentals, subtract_recorded_accidentals};
use purifsim::experiment::{
    calibrate_overlap, fringe_scan, full_experiment, half_coherence_sigma, hom_scan, imperfection_budget,
    analyze_campaign, ExperimentConfig, StateSource,
};
use purifsim::protocol::{
    linear_grid, purified_fidelity, repeater_trajectory, simulate_purification, success_probability,
    sweep_transmittance, EntangledPairSpec, HeraldMode, PurificationSetup, RepeaterScenario, BALANCED_TRANSMITTANCE,
};
use purifsim::report::{config_digest, write_histogram_csv, write_repeater_csv, write_sweep_csv};
use purifsim::scan::FringeScan;

const DEFAULT_SEED: u64 = 42;
const OUTPUT_ENV: &str = "PURIFSIM_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "purifsim-out";
const HISTOGRAM_BINS: usize = 20;

/// Simulator for linear-optics purification of single-photon entanglement.
///
/// Exit status: 0 on success, 1 on usage or configuration errors, 2 on
/// degenerate outcomes and numerical failures.
#[derive(Parser)]
#[command(name = "purifsim", version)]
struct Cli {
    /// Seed for stochastic commands [default: 42, or the config's seed].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory [env: PURIFSIM_OUTPUT_DIR] [default: purifsim-out].
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeraldArg {
    Da,
    Db,
    Either,
}

impl From<HeraldArg> for HeraldMode {
    fn from(h: HeraldArg) -> Self {
        match h {
            HeraldArg::Da => HeraldMode::DA,
            HeraldArg::Db => HeraldMode::DB,
            HeraldArg::Either => HeraldMode::Either,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Pair1,
    Pair2,
    Purified,
}

impl From<SourceArg> for StateSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Pair1 => StateSource::Pair1,
            SourceArg::Pair2 => StateSource::Pair2,
            SourceArg::Purified => StateSource::Purified,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Defaults: perfect pairs, ideal components, noise off then on.
    Default,
    /// Perfect pairs, both noise generators at sqrt(2 ln 2), ideal optics.
    Ideal,
    /// The laboratory operating point with its imperfections.
    Lab,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form purified fidelity and success probability.
    Purify {
        #[arg(long)]
        f1: f64,
        #[arg(long)]
        f2: f64,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Fock-space simulation of the purification circuit.
    Simulate {
        #[arg(long)]
        f1: f64,
        #[arg(long)]
        f2: f64,
        /// Alice's transmittance; Bob's is the mirror [default: cos^2(pi/8)].
        #[arg(long)]
        transmittance: Option<f64>,
        #[arg(long, value_enum, default_value = "either")]
        herald: HeraldArg,
        /// Vacuum weight of both input pairs.
        #[arg(long, default_value_t = 0.0)]
        vacuum: f64,
        #[arg(long)]
        json: bool,
    },
    /// Purified fidelity and success probability against transmittance.
    Sweep {
        #[arg(long)]
        f1: f64,
        #[arg(long)]
        f2: f64,
        #[arg(long, default_value_t = 0.5)]
        t_min: f64,
        #[arg(long, default_value_t = 0.99)]
        t_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, value_enum, default_value = "either")]
        herald: HeraldArg,
    },
    /// HOM dip scan over the photon overlap.
    Hom {
        /// Experiment config; only its source model is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibrate the largest overlap to this model visibility.
        #[arg(long)]
        target_visibility: Option<f64>,
        #[arg(long, default_value_t = 21)]
        points: usize,
        /// Detection windows per grid point.
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
    },
    /// One fringe campaign and its fidelity distributions.
    Fringe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
        #[arg(long, value_enum)]
        source: SourceArg,
    },
    /// The three fringe campaigns with their analysis.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
    },
    /// Error trajectory through entanglement-swapping levels.
    Repeater {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        levels: usize,
        /// Purify after every level.
        #[arg(long)]
        purify: bool,
    },
    /// Sliding-window fidelity analysis of a scan CSV.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        window_periods: f64,
        /// Subtract the recorded accidentals column.
        #[arg(long)]
        subtract_recorded: bool,
        /// Subtract this accidental rate (Hz) times the exposure.
        #[arg(long)]
        accidental_rate: Option<f64>,
        /// Exposure per point in seconds, for --accidental-rate.
        #[arg(long, default_value_t = 1.0)]
        exposure: f64,
        #[arg(long, default_value_t = HISTOGRAM_BINS)]
        bins: usize,
    },
    /// Print a preset as a JSON config.
    PrintConfig {
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<purifsim::Error> for Failure {
    fn from(e: purifsim::Error) -> Self {
        Failure {
            code: if e.is_config_error() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

struct Context {
    seed: Option<u64>,
    output_dir: PathBuf,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn dir(&self) -> Outcome<&Path> {
        fs::create_dir_all(&self.output_dir)?;
        Ok(&self.output_dir)
    }

    fn file(&self, name: &str) -> Outcome<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir()?.join(name))?))
    }

    /// Writes `result` wrapped with the command name, seed and digest of
    /// `config`.
    fn write_json(&self, name: &str, command: &str, config: &Value, seed: Option<u64>, result: Value) -> Outcome {
        let doc = json!({
            "command": command,
            "config": config,
            "config_digest": config_digest(config)?,
            "seed": seed,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(self.dir()?.join(name), text)?;
        Ok(())
    }

    fn report(&self, name: &str) {
        println!("wrote {}", self.output_dir.join(name).display());
    }
}

fn check_fidelity(f: f64) -> Outcome {
    EntangledPairSpec::new(f).validate().map_err(Failure::from)
}

fn load_config(ctx: &Context, path: Option<&Path>, preset: Preset) -> Outcome<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => preset_config(preset)?,
    };
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn preset_config(preset: Preset) -> Outcome<ExperimentConfig> {
    Ok(match preset {
        Preset::Default => ExperimentConfig::default(),
        Preset::Ideal => ExperimentConfig::ideal_noise(half_coherence_sigma()),
        Preset::Lab => ExperimentConfig::lab()?,
    })
}

fn write_scan(ctx: &Context, name: &str, scan: &FringeScan) -> Outcome {
    scan.write_csv(ctx.file(name)?)?;
    ctx.report(name);
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let output_dir = cli
        .output_dir
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let ctx = Context {
        seed: cli.seed,
        output_dir,
    };

    match cli.command {
        Command::Purify { f1, f2, json } => {
            check_fidelity(f1)?;
            check_fidelity(f2)?;
            let (f, p) = (purified_fidelity(f1, f2), success_probability(f1, f2));
            if json {
                println!("{}", json!({ "f1": f1, "f2": f2, "F_tilde": f, "p_success": p }));
            } else {
                println!("F_tilde = {f}");
                println!("p = {p}");
            }
        }
        Command::Simulate {
            f1,
            f2,
            transmittance,
            herald,
            vacuum,
            json,
        } => {
            let t = transmittance.unwrap_or(BALANCED_TRANSMITTANCE);
            let setup = PurificationSetup::mirrored(t).with_herald(herald.into());
            let s1 = EntangledPairSpec::new(f1).with_vacuum(vacuum);
            let s2 = EntangledPairSpec::new(f2).with_vacuum(vacuum);
            let out = simulate_purification(&s1, &s2, &setup)?;
            let closed = purified_fidelity(f1, f2);
            if json {
                println!(
                    "{}",
                    json!({
                        "f1": f1, "f2": f2, "transmittance": t,
                        "F_tilde": out.purified_fidelity, "p_success": out.success_probability,
                        "F_tilde_closed_form": closed,
                    })
                );
            } else {
                println!("T = {t}");
                println!("F_tilde = {}", out.purified_fidelity);
                println!("p = {}", out.success_probability);
                println!("closed form F_tilde = {closed}");
            }
        }
        Command::Sweep {
            f1,
            f2,
            t_min,
            t_max,
            points,
            herald,
        } => {
            if !(0.0..=1.0).contains(&t_min) || !(0.0..=1.0).contains(&t_max) || t_min >= t_max || points < 2 {
                return Err(usage("need 0 <= t-min < t-max <= 1 and at least two points"));
            }
            let result = sweep_transmittance(f1, f2, &linear_grid(t_min, t_max, points), herald.into())?;
            write_sweep_csv(&result.rows, ctx.file("sweep.csv")?)?;
            ctx.report("sweep.csv");
            let best = result.best();
            let config = json!({ "f1": f1, "f2": f2, "t_min": t_min, "t_max": t_max, "points": points,
                "herald": HeraldMode::from(herald) });
            ctx.write_json(
                "sweep.json",
                "sweep",
                &config,
                None,
                json!({ "best_T": best.transmittance, "best_F_tilde": best.purified_fidelity,
                    "best_p_success": best.success_probability }),
            )?;
            ctx.report("sweep.json");
            println!("best T = {} F_tilde = {}", best.transmittance, best.purified_fidelity);
        }
        Command::Hom {
            config,
            target_visibility,
            points,
            shots,
        } => {
            let mut source = load_config(&ctx, config.as_deref(), Preset::Default)?.source;
            if let Some(v) = target_visibility {
                source.internal_overlap = calibrate_overlap(source.emission_prob, v)?;
            }
            if points < 2 {
                return Err(usage("--points must be at least 2"));
            }
            let seed = ctx.seed();
            let grid = linear_grid(0.0, source.internal_overlap, points);
            let scan = hom_scan(&source, &grid, shots, seed)?;
            write_scan(&ctx, "hom.csv", &scan.to_scan()?)?;
            let config = json!({ "source": source, "points": points, "shots": shots });
            ctx.write_json("hom.json", "hom", &config, Some(seed), serde_json::to_value(&scan)?)?;
            ctx.report("hom.json");
            if scan.low_counts {
                eprintln!("warning: fewer than 100 expected counts at the top of the dip");
            }
            println!("V_dip = {} (model {})", scan.v_dip, scan.v_model);
        }
        Command::Fringe { config, preset, source } => {
            let cfg = load_config(&ctx, config.as_deref(), preset)?;
            let source = StateSource::from(source);
            let scan = fringe_scan(source, &cfg)?;
            let name = format!("fringe_{}", source.label());
            write_scan(&ctx, &format!("{name}.csv"), &scan)?;
            let result = analyze_campaign(source, scan, &cfg)?;
            let summary: Vec<Value> = result
                .regimes
                .iter()
                .map(|r| json!({ "regime": r.regime, "model_fidelity": r.model_fidelity, "estimate": r.estimate }))
                .collect();
            ctx.write_json(
                &format!("{name}.json"),
                "fringe",
                &serde_json::to_value(&cfg)?,
                Some(cfg.seed),
                json!({ "source": source, "regimes": summary }),
            )?;
            ctx.report(&format!("{name}.json"));
            for r in &result.regimes {
                println!(
                    "{} regime {}: F = {:.4} +- {:.4}",
                    source.label(),
                    r.regime,
                    r.estimate.mean,
                    r.estimate.sigma
                );
            }
        }
        Command::Experiment { config, preset } => {
            let cfg = load_config(&ctx, config.as_deref(), preset)?;
            let data = full_experiment(&cfg)?;
            let mut campaigns = Vec::new();
            for c in &data.campaigns {
                write_scan(&ctx, &format!("{}.csv", c.source.label()), &c.scan)?;
                let mut regimes = Vec::new();
                for r in &c.regimes {
                    let name = format!("histogram_{}_regime{}.csv", c.source.label(), r.regime);
                    let bins = histogram(&r.estimate.samples, HISTOGRAM_BINS, &r.estimate.gaussian)?;
                    write_histogram_csv(&bins, ctx.file(&name)?)?;
                    ctx.report(&name);
                    regimes.push(json!({
                        "regime": r.regime,
                        "model_fidelity": r.model_fidelity,
                        "mean": r.estimate.mean,
                        "sigma": r.estimate.sigma,
                        "skewness": r.estimate.skewness,
                        "windows": r.estimate.samples.len(),
                        "windows_discarded": r.estimate.windows_discarded,
                    }));
                    println!(
                        "{} regime {}: F = {:.4} +- {:.4} (model {:.4})",
                        c.source.label(),
                        r.regime,
                        r.estimate.mean,
                        r.estimate.sigma,
                        r.model_fidelity
                    );
                }
                campaigns.push(json!({ "source": c.source, "regimes": regimes }));
            }
            let budget = imperfection_budget(&cfg)?;
            ctx.write_json(
                "summary.json",
                "experiment",
                &serde_json::to_value(&cfg)?,
                Some(cfg.seed),
                json!({ "campaigns": campaigns, "budget": budget }),
            )?;
            ctx.report("summary.json");
        }
        Command::Repeater { epsilon, levels, purify } => {
            let scenario = if purify {
                RepeaterScenario::purify_every_level(epsilon, levels)
            } else {
                RepeaterScenario::unpurified(epsilon, levels)
            };
            let t = repeater_trajectory(&scenario)?;
            write_repeater_csv(&t, ctx.file("repeater.csv")?)?;
            ctx.report("repeater.csv");
            let config = json!({ "epsilon": epsilon, "levels": levels, "purify": purify });
            ctx.write_json(
                "repeater.json",
                "repeater",
                &config,
                None,
                json!({ "epsilon": t.epsilon, "after_swap": t.after_swap, "saturated": t.saturated }),
            )?;
            ctx.report("repeater.json");
            for (level, e) in t.epsilon.iter().enumerate() {
                println!("level {level}: epsilon = {e}");
            }
        }
        Command::Analyze {
            input,
            window_periods,
            subtract_recorded,
            accidental_rate,
            exposure,
            bins,
        } => {
            let file = File::open(&input).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            let mut scan = FringeScan::read_csv(file)?;
            if subtract_recorded {
                scan = subtract_recorded_accidentals(&scan);
            }
            if let Some(rate) = accidental_rate {
                if !(exposure > 0.0) {
                    return Err(usage("--exposure must be positive"));
                }
                scan.meta.exposure_s = exposure;
                scan = subtract_accidentals(&scan, rate)?;
            }
            let mut regimes = Vec::new();
            for (flag, estimate) in sliding_fidelity_by_regime(&scan, window_periods) {
                let estimate = estimate?;
                let name = format!("histogram_regime{flag}.csv");
                write_histogram_csv(&histogram(&estimate.samples, bins, &estimate.gaussian)?, ctx.file(&name)?)?;
                ctx.report(&name);
                println!("regime {flag}: F = {:.4} +- {:.4}", estimate.mean, estimate.sigma);
                regimes.push(json!({ "regime": flag, "estimate": estimate }));
            }
            let config = json!({
                "input": input.file_name().map(|n| n.to_string_lossy().into_owned()),
                "window_periods": window_periods,
                "subtract_recorded": subtract_recorded,
                "accidental_rate": accidental_rate,
                "exposure": exposure,
                "bins": bins,
            });
            ctx.write_json("analysis.json", "analyze", &config, None, json!({ "regimes": regimes }))?;
            ctx.report("analysis.json");
        }
        Command::PrintConfig { preset } => {
            let mut cfg = preset_config(preset)?;
            if let Some(seed) = ctx.seed {
                cfg.seed = seed;
            }
            println!("{}", serde_json::to_string_pretty(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

//! `vtolmd` command-line interface.
//!
//! Exit codes: 0 success, 2 no target detected, 1 any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use vtolmd::classifier::ExpectedSpread;
use vtolmd::output::{write_artifacts, OutputSpec, RunError, EXIT_ERROR, PROFILE_FILE, SCENARIO_JSON};
use vtolmd::pipeline::{analyze, simulate, ProcessingParams};
use vtolmd::profile_file::{ingest_profile, write_profile};
use vtolmd::receiver::SlowTimeMatrix;
use vtolmd::scenario::{LoadedScenario, ScenarioFile};

#[derive(Parser, Debug)]
#[command(name = "vtolmd", version, about = "Bistatic OFDM micro-Doppler simulation and VTOL flight-mode classification")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a scenario and dump the gated slow-time matrix.
    Simulate(Common),
    /// Doppler spectrum CSV and heatmaps from a scenario or a profile dump.
    Process(Common),
    /// Micro-Doppler feature record.
    Features(Common),
    /// Flight-mode decision record (needs a scenario for the geometry).
    Classify(Common),
    /// Spectrogram and range-Doppler heatmaps only.
    Plot(Common),
    /// Every artifact.
    All(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (JSON).
    scenario: Option<PathBuf>,
    /// Use a recorded slow-time profile instead of simulating.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "VTOLMD_OUT_DIR", default_value = "vtolmd-out")]
    out: PathBuf,
    /// Override the scenario noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the receiver SNR (dB).
    #[arg(long)]
    snr_db: Option<f64>,
    /// Override the number of symbols M.
    #[arg(long)]
    symbols: Option<usize>,
    /// Detection threshold above the range-profile floor (dB).
    #[arg(long)]
    threshold_db: Option<f64>,
    /// Doppler-spread support threshold above the spectrum floor (dB).
    #[arg(long)]
    floor_margin_db: Option<f64>,
    /// Spectrogram window length (symbols).
    #[arg(long)]
    window_len: Option<usize>,
    /// Spectrogram hop (symbols).
    #[arg(long)]
    hop: Option<usize>,
    /// Also write PNG copies of the heatmaps.
    #[arg(long)]
    png: bool,
    /// Print the normalized scenario to stdout and exit.
    #[arg(long)]
    print_scenario: bool,
}

impl Common {
    fn apply_processing(&self, p: &mut ProcessingParams) {
        if let Some(v) = self.threshold_db {
            p.detection.threshold_db = v;
        }
        if let Some(v) = self.floor_margin_db {
            p.features.spread.floor_margin_db = v;
        }
        if let Some(v) = self.window_len {
            p.spectrogram_window_len = v;
        }
        if let Some(v) = self.hop {
            p.spectrogram_hop = v;
        }
    }

    fn load_scenario(&self) -> Result<Option<LoadedScenario>> {
        let Some(path) = &self.scenario else { return Ok(None) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut file = ScenarioFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(s) = self.seed {
            file.noise_seed = s;
        }
        if let Some(s) = self.snr_db {
            file.snr_db = Some(s);
        }
        if let Some(m) = self.symbols {
            file.ofdm.n_symbols = Some(m);
        }
        self.apply_processing(&mut file.processing);
        Ok(Some(file.load()?))
    }
}

fn require_scenario<'a>(s: &'a Option<LoadedScenario>, what: &str) -> Result<&'a LoadedScenario> {
    s.as_ref().with_context(|| format!("{what} needs a scenario file"))
}

fn slow_time(common: &Common, scenario: &Option<LoadedScenario>, params: &ProcessingParams) -> Result<SlowTimeMatrix> {
    if let Some(p) = &common.profile {
        return Ok(ingest_profile(p)?);
    }
    let s = require_scenario(scenario, "simulation")?;
    Ok(simulate(&s.scene, params).map_err(RunError::from)?.stm)
}

fn execute(command: Command) -> Result<()> {
    let (common, kind) = match &command {
        Command::Simulate(c) => (c, "simulate"),
        Command::Process(c) => (c, "process"),
        Command::Features(c) => (c, "features"),
        Command::Classify(c) => (c, "classify"),
        Command::Plot(c) => (c, "plot"),
        Command::All(c) => (c, "all"),
    };
    if common.scenario.is_none() && common.profile.is_none() {
        bail!("give a scenario file or --profile");
    }
    let scenario = common.load_scenario()?;
    if common.print_scenario {
        print!("{}", require_scenario(&scenario, "--print-scenario")?.normalized.to_json());
        return Ok(());
    }
    let mut params = scenario.as_ref().map(|s| s.processing).unwrap_or_default();
    common.apply_processing(&mut params);

    if kind == "simulate" {
        let s = require_scenario(&scenario, "simulate")?;
        let sim = simulate(&s.scene, &params).map_err(RunError::from)?;
        std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        write_profile(&common.out.join(PROFILE_FILE), &sim.stm)?;
        let scenario_path = common.out.join(SCENARIO_JSON);
        std::fs::write(&scenario_path, s.normalized.to_json()).with_context(|| format!("writing {}", scenario_path.display()))?;
        println!("gate {:?} ({} symbols) -> {}", sim.gate.bins, sim.stm.n_symbols(), common.out.display());
        return Ok(());
    }

    let stm = slow_time(common, &scenario, &params)?;
    let analysis = analyze(&stm, &params).map_err(RunError::from)?;
    let mut spec = OutputSpec::none(&common.out);
    spec.png = common.png;
    match kind {
        "process" => {
            spec.spectrum_csv = true;
            spec.heatmaps = true;
        }
        "features" => spec.features = true,
        "classify" => spec.decision = true,
        "plot" => spec.heatmaps = true,
        _ => {
            spec = OutputSpec::all(&common.out);
            spec.png = common.png;
            spec.profile = common.profile.is_none();
        }
    }
    let expected = match (&scenario, kind) {
        (Some(s), _) => Some(ExpectedSpread::from_geometry(&s.scene.geometry, &s.scene.airframe).map_err(|e| RunError::Pipeline(e.into()))?),
        (None, "classify") => bail!("classify needs a scenario file for the observation geometry"),
        (None, _) => None,
    };
    let artifacts = write_artifacts(&stm, &analysis, expected.as_ref(), &params, &spec, scenario.as_ref())?;
    match kind {
        "features" => println!("{}", serde_json::to_string_pretty(&artifacts.features)?),
        "classify" | "all" => {
            if let Some(d) = &artifacts.decision {
                println!("{} (confidence {:.2})", d.label(), d.confidence);
            }
        }
        _ => {}
    }
    for f in &artifacts.files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<RunError>())
        .map_or(EXIT_ERROR, RunError::exit_code) as u8
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for "no target".
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR as u8) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

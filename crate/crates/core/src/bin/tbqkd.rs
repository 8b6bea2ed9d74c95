use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use timebin_qkd::channel::{EveAttack, EveLeg};
use timebin_qkd::harness::{self, HarnessError, RunConfig};
use timebin_qkd::protocol::{ClassWeights, MeasurementMode};
use timebin_qkd::ExactOracle;

/// Monte Carlo simulator for the round-trip time-bin/polarization QKD protocol.
///
/// Flags override values loaded with --config. Without --out the JSON report
/// goes to stdout.
#[derive(Debug, Parser)]
#[command(name = "tbqkd", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    rounds: Option<u64>,

    /// Master seed; every round draws from its own stream.
    #[arg(long)]
    seed: Option<u64>,

    /// off, per-bin, per-bin-hv, per-bin-diag or time-pol.
    #[arg(long)]
    eve: Option<EveAttack>,

    /// bob-to-alice, alice-to-bob or both.
    #[arg(long)]
    leg: Option<EveLeg>,

    /// Photon loss probability per leg.
    #[arg(long)]
    loss: Option<f64>,

    /// Residual polarization misalignment at Alice, radians.
    #[arg(long = "misalign-rad")]
    misalign_rad: Option<f64>,

    /// Dark-count probability per gated (bin, detector) slot.
    #[arg(long = "dark-prob")]
    dark_prob: Option<f64>,

    /// default, uniform16, class1, or three comma-separated class weights.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<ClassWeights>,

    /// standard or extended.
    #[arg(long)]
    mode: Option<MeasurementMode>,

    /// Fraction of sifted bits disclosed for QBER estimation.
    #[arg(long)]
    sacrifice: Option<f64>,

    /// Report path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Per-round CSV log path.
    #[arg(long = "csv-log")]
    csv_log: Option<PathBuf>,

    /// Worker threads. Does not affect results.
    #[arg(long)]
    threads: Option<usize>,

    /// Write decision tables and exact rates as JSON.
    #[arg(long = "tables-out")]
    tables_out: Option<PathBuf>,

    /// Run the oracle and rule checks instead of a simulation.
    #[arg(long)]
    verify: bool,
}

fn parse_weights(s: &str) -> Result<ClassWeights, String> {
    ClassWeights::parse(s).map_err(|e| e.to_string())
}

impl Cli {
    fn into_config(self) -> Result<RunConfig, HarnessError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.rounds {
            c.rounds = v;
        }
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = self.eve {
            c.eve.attack = v;
        }
        if let Some(v) = self.leg {
            c.eve.leg = v;
        }
        if let Some(v) = self.loss {
            c.channel.transmittance_per_leg = 1.0 - v;
        }
        if let Some(v) = self.misalign_rad {
            c.channel.misalignment_angle = v;
        }
        if let Some(v) = self.dark_prob {
            c.channel.dark_count_prob = v;
        }
        if let Some(v) = self.weights {
            c.weights = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = self.sacrifice {
            c.sacrifice_fraction = v;
        }
        if self.out.is_some() {
            c.report_path = self.out;
        }
        if self.csv_log.is_some() {
            c.csv_log_path = self.csv_log;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let oracle = ExactOracle::standard();
    if cli.verify {
        let report = harness::verify(&oracle);
        for c in &report.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            println!("{status} {:<22} \"{}\"", c.name, c.rule);
            if !c.passed {
                println!("    {}", c.detail);
            }
        }
        return ExitCode::from(if report.passed() { 0 } else { 1 });
    }

    let tables_out = cli.tables_out.clone();
    let result = cli.into_config().and_then(|config| {
        config.validate()?;
        if let Some(path) = &tables_out {
            harness::export_tables(&oracle, &config.weights, config.mode, path)?;
        }
        let report = harness::run(&config)?;
        if config.report_path.is_none() {
            print!("{}", report.to_json());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let HarnessError::Invalid(_) = e {
                eprintln!("see `tbqkd --help` for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

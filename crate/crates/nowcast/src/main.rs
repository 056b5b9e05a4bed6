use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nowcast::config::{validate, LoadedConfig};
use nowcast::io::{self, SynthFiles};
use nowcast::pipeline::{execute, write_output, Overrides};
use nowcast::synthpop::{gen_baseline_survey, gen_labour_panel, gen_payroll};
use nowcast::{Error, Result};
use nowcast_core::data::MonthId;

#[derive(Parser)]
#[command(name = "nowcast", version, about = "Nowcast household income distribution under a labour-market shock")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write tables, series and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides NOWCAST_OUT and `output_dir`.
        #[arg(long, env = "NOWCAST_OUT")]
        out: Option<PathBuf>,
        /// Comma-separated analysis months (YYYY-MM), replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        months: Option<Vec<MonthId>>,
    },
    /// Check a configuration and its input files without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the synthetic survey, panel and payroll files as CSV.
    GenSynth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "NOWCAST_OUT")]
        out: Option<PathBuf>,
    },
}

fn output_dir(loaded: &LoadedConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    out.or_else(|| loaded.config.output_dir.as_ref().map(|p| loaded.resolve(p)))
        .ok_or_else(|| Error::Config("no output directory: pass --out, set NOWCAST_OUT or set output_dir".into()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run { config, seed, out, months } => {
            let loaded = LoadedConfig::load(&config)?;
            let dir = output_dir(&loaded, out)?;
            let output = execute(&loaded, &Overrides { seed, months })?;
            write_output(&dir, &output)?;
            println!("wrote {} files for {} months to {}", output.files.len(), output.months.len(), dir.display());
        }
        Command::Validate { config } => {
            let loaded = LoadedConfig::load(&config)?;
            let findings = validate(&loaded);
            if let Some(first) = findings.first() {
                for f in &findings[1..] {
                    eprintln!("error[config]: {f}");
                }
                return Err(Error::Config(first.to_string()));
            }
            println!("{}: ok", config.display());
        }
        Command::GenSynth { config, seed, out } => {
            let loaded = LoadedConfig::load(&config)?;
            let dir = output_dir(&loaded, out)?;
            let mut synth = loaded
                .config
                .data
                .synth
                .clone()
                .ok_or_else(|| Error::Config(format!("{}: no [data.synth] section", config.display())))?;
            synth.seed = seed.unwrap_or(loaded.config.seed);
            let survey = gen_baseline_survey(&synth)?;
            let waves = gen_labour_panel(&synth, &survey)?;
            let payroll = gen_payroll(&synth)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            let files = SynthFiles::in_dir(&dir);
            io::write_survey(&files.survey_persons, &files.survey_households, &survey)?;
            io::write_panel(&files.panel_persons, &files.panel_households, &waves)?;
            io::write_payroll(&files.payroll, &payroll)?;
            println!("wrote synthetic inputs to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[config]: {line}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctxsearch::harness::{
    emit_results, emit_sweep, read_reports, run_experiment, sweep, verify_report, ConfigFile, Format, RunSummary,
};
use ctxsearch::Error;

/// Corruption-robust contextual search experiments.
#[derive(Debug, Parser)]
#[command(name = "ctxsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every seed of a config and write round and summary tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Turn on potential and certificate checks.
        #[arg(long)]
        oracle: bool,
    },
    /// Vary one config key over a list of values with replicate seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `0.1,0.05,0.01`.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Re-check a stored JSON report: totals and, where applicable, the oracle.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn print_summary(s: &RunSummary) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    println!(
        "{}  regret={:.3} clean={:.3} C0={} C1={:.3} bound={} cert={}/{} violations={} {}",
        s.run_id,
        s.regret_corrupt,
        s.regret_clean,
        s.c0,
        s.c1,
        opt(s.regret_bound),
        opt(s.certificate_observed),
        opt(s.certificate_bound),
        s.violations.map_or("-".to_string(), |v| v.to_string()),
        if s.passed() { "ok" } else { "FAILED" }
    );
}

fn execute(cmd: Command) -> Result<bool, Error> {
    match cmd {
        Command::Run {
            config,
            seed,
            out,
            format,
            oracle,
        } => {
            let mut file = ConfigFile::load(&config)?;
            if let Some(s) = seed {
                file.seeds = vec![s];
            }
            file.oracle_checks |= oracle;
            let cfg = file.resolve()?;
            let reports = run_experiment(&cfg)?;
            for r in &reports {
                print_summary(&r.summary);
            }
            for p in emit_results(&reports, format, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::Sweep {
            config,
            axis,
            values,
            replicates,
            out,
            format,
        } => {
            let file = ConfigFile::load(&config)?;
            let table = sweep(&file, &axis, &values, replicates)?;
            println!("{:>12} {:>6} {:>10} {:>10} {:>8} {:>8} {:>6}", axis, "reps", "mean", "max", "C0", "C1", "ok");
            for c in &table.cells {
                println!(
                    "{:>12} {:>6} {:>10.3} {:>10.3} {:>8.2} {:>8.3} {:>6}",
                    c.value, c.replicates, c.mean_regret, c.max_regret, c.mean_c0, c.mean_c1, c.all_passed
                );
            }
            for p in emit_sweep(&table, format, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(table.cells.iter().all(|c| c.all_passed))
        }
        Command::Verify { report } => {
            let mut ok = true;
            for r in read_reports(&report)? {
                let again = verify_report(&r)?;
                print_summary(&again);
                let stored = &r.summary;
                let totals_match = (again.regret_corrupt - stored.regret_corrupt).abs() <= 1e-9 * stored.regret_corrupt.max(1.0)
                    && (again.regret_clean - stored.regret_clean).abs() <= 1e-9 * stored.regret_clean.max(1.0)
                    && again.c0 == stored.c0
                    && (again.c1 - stored.c1).abs() <= 1e-9 * stored.c1.max(1.0);
                if !totals_match {
                    println!("{}: stored totals do not match the rounds", r.run_id);
                }
                ok &= totals_match && again.passed();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

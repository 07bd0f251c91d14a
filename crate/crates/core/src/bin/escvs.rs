use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use escvs::commands::{cmd_compare_averaged, cmd_run, cmd_sweep, default_omegas, RunOverrides, SweepParam};
use escvs::scenario::{preset_names, preset_source, resolve, OUT_DIR_ENV};
use escvs::{EscError, Result};

#[derive(Parser)]
#[command(name = "escvs", version, about = "Extremum seeking for vibrational stabilization of rigid bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and export its trajectory and summary.
    Run {
        /// Scenario file or preset name.
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        #[arg(long)]
        decimate: Option<usize>,
    },
    /// Compare the full loop against its averaged model over increasing frequencies.
    CompareAveraged {
        scenario: String,
        #[arg(long, value_delimiter = ',')]
        omegas: Option<Vec<f64>>,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run over values of one controller parameter.
    Sweep {
        scenario: String,
        /// One of omega, k, a-scale, c-scale.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or print the bundled scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            t_final,
            decimate,
        } => {
            let s = RunOverrides {
                dt_s: dt,
                t_final_s: t_final,
                decimate,
            }
            .apply(&resolve(&scenario)?)?;
            let (report, outputs) = cmd_run(&s, &out_dir(out))?;
            println!("{report}");
            println!("trajectory      {}", outputs.trajectory.display());
            println!("summary         {}", outputs.summary.display());
        }
        Command::CompareAveraged {
            scenario,
            omegas,
            t_final,
            out,
        } => {
            let mut s = resolve(&scenario)?;
            if t_final.is_some() {
                s.compare_t_final_s = t_final;
                s.validate()?;
            }
            let omegas = omegas.unwrap_or_else(|| default_omegas(&s));
            let dir = out_dir(out);
            let report = cmd_compare_averaged(&s, &omegas, Some(&dir))?;
            println!("{:>12} {:>14} {:>14} {:>10}", "omega", "sup |x - xbar|", "sup |u - ubar|", "ratio");
            for i in 0..report.omegas.len() {
                let ratio = if i == 0 {
                    "-".to_string()
                } else {
                    format!("{:.4}", report.decay_ratios[i - 1])
                };
                println!(
                    "{:>12} {:>14.6e} {:>14.6e} {:>10}",
                    report.omegas[i], report.sup_errors[i], report.u_hat_sup_errors[i], ratio
                );
            }
            println!("report          {}", dir.join(format!("{}.closeness.json", s.name)).display());
        }
        Command::Sweep {
            scenario,
            param,
            values,
            t_final,
            out,
        } => {
            let param: SweepParam = param.parse()?;
            let s = RunOverrides {
                t_final_s: t_final,
                ..Default::default()
            }
            .apply(&resolve(&scenario)?)?;
            let rows = cmd_sweep(&s, param, &values, Some(&out_dir(out)))?;
            println!("{:>12} {:>16} {:>14}", "value", "final-window J", "max |u_hat|");
            for row in rows {
                match (row.report, row.error) {
                    (Some(r), _) => println!("{:>12} {:>16.6e} {:>14.6e}", row.value, r.final_window_j, r.max_abs_u_hat),
                    (None, Some(e)) => println!("{:>12} failed: {e}", row.value),
                    (None, None) => unreachable!(),
                }
            }
        }
        Command::Presets { action } => match action {
            PresetAction::List => preset_names().for_each(|n| println!("{n}")),
            PresetAction::Show { name } => {
                let text = preset_source(&name).ok_or_else(|| EscError::Usage(format!("unknown preset `{name}`")))?;
                print!("{text}");
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

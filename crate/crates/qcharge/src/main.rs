use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcharge::format::to_json_text;
use qcharge::{parse_config, run, verify, RunError};

#[derive(Parser)]
#[command(name = "qcharge", version, about = "Optimal charging experiments for quantum batteries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override a config value, e.g. `--set params.tau_points=30`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Re-check the artifacts listed in a run's manifest.
    Verify { manifest: PathBuf },
    /// Work functionals of a spectrum, as JSON.
    Work {
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
        rho_eigs: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
        h_eigs: Vec<f64>,
        /// Defaults to the diagonal value `sum rho_i h_i`.
        #[arg(long, allow_negative_numbers = true)]
        mean_energy: Option<f64>,
        #[arg(long)]
        beta_bar: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), RunError> {
    let text = to_json_text(value).map_err(|e| RunError::model("json", e))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, overrides } => std::fs::read_to_string(&config)
            .map_err(|e| RunError::io(&config, e))
            .and_then(|text| parse_config(&text, &overrides))
            .and_then(|c| run(&c))
            .map(|m| {
                eprintln!("wrote {} files in {:.2} s", m.files.len(), m.wall_time_seconds);
                true
            }),
        Command::Verify { manifest } => verify(&manifest).and_then(|r| {
            print_json(&r)?;
            Ok(r.pass)
        }),
        Command::Work {
            rho_eigs,
            h_eigs,
            mean_energy,
            beta_bar,
            tol,
        } => qcharge::run::work_report(rho_eigs, h_eigs, mean_energy, beta_bar, tol).and_then(|r| {
            print_json(&r)?;
            Ok(true)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}

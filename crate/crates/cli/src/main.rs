use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use d2nn_cli::commands::{self, InputSpec};

/// Train and characterize diffractive deep neural networks.
#[derive(Parser)]
#[command(name = "d2nn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model.d2nn, metrics.jsonl and the final test report.
    Train {
        config: PathBuf,
        /// Overrides output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an archive on the configured test split.
    Eval {
        config: PathBuf,
        /// Defaults to <output_dir>/model.d2nn.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Defaults to <output_dir>/eval.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate one input and write the output plane and detector signals.
    Infer {
        archive: PathBuf,
        /// zero, pinhole:<m>, line_pair:<m>, letter:<C>:<m>, mnist_test:<index> or a .pgm path.
        #[arg(long)]
        input: InputSpec,
        #[arg(long)]
        out: PathBuf,
        /// Supplies the detector layout, object extent and MNIST location.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Object extent in meters for image inputs.
        #[arg(long)]
        object_extent: Option<f64>,
    },
    /// Point-spread, line-pair, defocus and free-space comparison for an imaging archive.
    LensBattery {
        archive: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Supplies the [lens] battery settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Misalignment, attenuation and combined perturbation sweeps.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        archive: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer phase images and fabrication height maps.
    ExportMasks {
        archive: PathBuf,
        #[arg(long)]
        refractive_index: f64,
        /// Meters of material under the relief.
        #[arg(long, default_value_t = 0.0)]
        base_thickness: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train { config, out } => commands::train(&config, out),
        Command::Eval { config, archive, out } => commands::eval(&config, archive, out),
        Command::Infer {
            archive,
            input,
            out,
            config,
            object_extent,
        } => commands::infer(&archive, &input, &out, config.as_deref(), object_extent),
        Command::LensBattery { archive, out, config } => commands::lens_battery(&archive, &out, config.as_deref()),
        Command::Sweep { config, archive, out } => commands::sweep(&config, archive, out),
        Command::ExportMasks {
            archive,
            refractive_index,
            base_thickness,
            out,
        } => commands::export_masks(&archive, refractive_index, base_thickness, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

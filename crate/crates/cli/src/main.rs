//! `phonoq` command-line front end.

mod commands;
mod output;

use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NotConverged(String),
}

impl From<phonoq::Error> for CliError {
    fn from(e: phonoq::Error) -> Self {
        match e {
            phonoq::Error::NotConverged(_) => CliError::NotConverged(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "phonoq", version, about = "TLS loss, ringdown and circuit analysis for acoustic resonators")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// What to print on stdout: the result JSON or the plot CSV.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Print nothing on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Directory for `<command>.json` and `<command>.csv`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Diameter-corrected fit of a reflection trace (freq_hz, re, im).
    FitS11 {
        input: PathBuf,
        /// Assume a normalised trace instead of fitting the baseline.
        #[arg(long)]
        no_background: bool,
        /// Source power, for the intracavity phonon number.
        #[arg(long, allow_hyphen_values = true)]
        power_dbm: Option<f64>,
        /// Input-line attenuation between source and device.
        #[arg(long, default_value_t = 0.0)]
        atten_db: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Joint power and temperature loss fit (nbar, temp_k, q_i, q_i_sigma, freq_hz).
    FitTls {
        input: PathBuf,
        /// Reference temperature of the relaxation term (K).
        #[arg(long, default_value_t = 0.25)]
        t0: f64,
        /// Parameters held at their starting values.
        #[arg(long, value_delimiter = ',')]
        fix: Vec<String>,
        /// Starting parameters as JSON.
        #[arg(long)]
        initial: Option<PathBuf>,
        /// Fit a finite background Q.
        #[arg(long)]
        fit_background: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Frequency-shift fit of one or more (temp_k, f_r_hz) series.
    FitFreqshift {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Probe frequency of the kernel; the fitted f0 when absent.
        #[arg(long)]
        f_probe: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Substrate and film loss tangents from (f_al, f_delta0, sigma).
    FitParticipation {
        input: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Mirror-leakage fit of (n_mirr, q_i[, q_i_sigma]).
    FitRadiation {
        input: PathBuf,
        /// Mirror periods at which to extrapolate Q_rad.
        #[arg(long, value_delimiter = ',', default_value = "7")]
        extrapolate: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Self-heating fit of (p_in, t_eff[, sigma]).
    FitThermal {
        input: PathBuf,
        /// Bath temperature (K).
        #[arg(long, default_value_t = 0.025)]
        t0: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// T1, T2 and detuning from a directory of shots.
    Ringdown {
        dir: PathBuf,
        /// Resonance frequency (Hz).
        #[arg(long)]
        f0: f64,
        /// External quality factor.
        #[arg(long)]
        qe: f64,
        /// Drive-off time (s); taken from the shot manifest when absent.
        #[arg(long)]
        t_on: Option<f64>,
        /// Decay times after drive-off excluded from the fits.
        #[arg(long, default_value_t = 3.0)]
        skip_kappa: f64,
        #[arg(long, value_enum, default_value_t = Sign::Plus)]
        sign: Sign,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Vector fit of a one-port admittance (freq_hz, re_siemens, im_siemens).
    Vfit {
        input: PathBuf,
        /// Number of complex-conjugate pole pairs.
        #[arg(long)]
        pairs: usize,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Reference impedance for the resonance parameters.
        #[arg(long, default_value_t = 50.0)]
        z0: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Y-factor gain calibration from (temp_k, freq_hz, p_out_w).
    Calib {
        input: PathBuf,
        /// Resolution bandwidth (Hz).
        #[arg(long)]
        rbw: f64,
        /// Use k_B T instead of the full Johnson-Nyquist form.
        #[arg(long)]
        classical: bool,
        /// Transmission (freq_hz, s21_db) for the input-line attenuation.
        #[arg(long)]
        s21: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a synthetic dataset and its manifest.
    Synth {
        /// Named preset.
        #[arg(long, conflicts_with = "spec", required_unless_present_any = ["spec", "list"])]
        preset: Option<String>,
        /// Target list as JSON.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// List the presets and exit.
        #[arg(long)]
        list: bool,
        /// Output directory.
        #[arg(long, short, required_unless_present = "list")]
        out: Option<PathBuf>,
    },
    /// Monte Carlo of the dissipative to reactive variance ratio.
    McVariance {
        /// Values of omega_max / omega_r.
        #[arg(long, value_delimiter = ',', default_value = "100")]
        ratio: Vec<f64>,
        /// Coherence rate in units of omega_r.
        #[arg(long, default_value_t = 1e-2)]
        gamma2: f64,
        #[arg(long, default_value_t = 1000)]
        n_tls: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Homophasal frequency plan for a reflection sweep.
    SweepPlan {
        /// Resonance frequency (Hz).
        #[arg(long)]
        fr: f64,
        /// Full linewidth kappa / 2 pi (Hz).
        #[arg(long)]
        kappa: f64,
        /// Total span (Hz).
        #[arg(long)]
        span: f64,
        #[arg(long, default_value_t = 201)]
        n: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check a parameter or synthesis file.
    Validate { config: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sign {
    Plus,
    Minus,
}

fn configure_threads() {
    if let Some(n) = std::env::var("PHONOQ_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::NotConverged(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
    }
}

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use werner_core::analysis::ChshAngles;
use werner_core::states::BellKind;

#[derive(Debug, Parser)]
#[command(name = "werner", version, about = "Two-photon Werner state simulation, tomography and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Every command that writes files also writes a manifest from which
/// `werner rerun` replays it.
#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Write a two-photon density matrix.
    GenState(GenStateArgs),
    /// Simulate Poisson coincidence counts for a state.
    Simulate(SimulateArgs),
    /// Reconstruct a density matrix from tomography counts.
    Reconstruct(ReconstructArgs),
    /// Werner fit, fidelity, linear entropy, tangle and CHSH value of a state.
    Metrics(MetricsArgs),
    /// CHSH value and its Poisson error from 16 correlation counts.
    Chsh(ChshArgs),
    /// Best-fit Werner parameter of a state.
    FitWerner(FitWernerArgs),
    /// |Γ| against optical path difference as CSV.
    DecohereCurve(CurveArgs),
    /// Source state, tomography and CHSH runs, reconstruction and metrics.
    Pipeline(PipelineArgs),
    /// Replay the run recorded in a manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    /// Parameter: singlet fidelity F in [0, 1].
    WernerSinglet,
    /// Parameter: x in [-1/3, 1].
    WernerPhiMinus,
    /// Parameter: phi-plus, phi-minus, psi-plus or psi-minus.
    Bell,
    /// Parameter: mixing x of the dephased two-crystal source.
    Source,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenStateArgs {
    #[arg(value_enum)]
    pub kind: StateKind,
    #[arg(allow_hyphen_values = true)]
    pub param: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// 16-setting tomography schedule.
    Tomo,
    /// 16 correlation settings at --angles.
    Chsh,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    /// Pair coincidence rate at unit probability, per second.
    #[arg(long, default_value_t = 300.0)]
    pub rate: f64,
    /// Accidental coincidence rate per setting, per second.
    #[arg(long, default_value_t = 1.0)]
    pub accidentals: f64,
    /// Integration time per setting, seconds.
    #[arg(long, default_value_t = 100.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    pub state: PathBuf,
    #[arg(long, value_enum, default_value_t = Schedule::Tomo)]
    pub schedule: Schedule,
    #[command(flatten)]
    pub source: SourceArgs,
    /// θ1,θ1',θ2,θ2' in degrees.
    #[arg(long, value_parser = parse_angles, allow_hyphen_values = true, default_value = "-22.5,22.5,0,45")]
    pub angles: ChshAngles,
    /// Write expected (fractional) counts instead of Poisson draws.
    #[arg(long)]
    pub noise_free: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Linear,
    Mle,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReconstructArgs {
    pub counts: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Mle)]
    pub method: MethodArg,
    /// Poisson bootstrap replicas for error bars (0 disables).
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_parser = parse_bell, default_value = "phi-minus")]
    pub target: BellKind,
    #[arg(long, value_parser = parse_angles, allow_hyphen_values = true, default_value = "-22.5,22.5,0,45")]
    pub angles: ChshAngles,
    /// Fail with exit code 3 when the optimizer does not converge.
    #[arg(long)]
    pub strict: bool,
    /// Reconstructed state; the report goes to <out>.report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MetricsArgs {
    pub state: PathBuf,
    #[arg(long, value_parser = parse_bell, default_value = "phi-minus")]
    pub target: BellKind,
    #[arg(long, value_parser = parse_angles, allow_hyphen_values = true, default_value = "-22.5,22.5,0,45")]
    pub angles: ChshAngles,
    /// Defaults to standard output (no manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChshArgs {
    pub counts: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitWernerArgs {
    pub state: PathBuf,
    #[arg(long, value_parser = parse_bell, default_value = "phi-minus")]
    pub target: BellKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CurveArgs {
    /// Center wavelength, nm.
    #[arg(long, default_value_t = 702.2)]
    pub lambda0: f64,
    /// Rectangular filter FWHM, nm.
    #[arg(long, default_value_t = 4.62)]
    pub fwhm: f64,
    /// OPD grid in units of λ0: `start:stop:step` or a comma list.
    #[arg(long, default_value = "0:300:1", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PipelineArgs {
    /// Source mixing parameter x.
    #[arg(long, default_value_t = 0.801, allow_negative_numbers = true)]
    pub mix: f64,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Mle)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, value_parser = parse_bell, default_value = "phi-minus")]
    pub target: BellKind,
    #[arg(long, value_parser = parse_angles, allow_hyphen_values = true, default_value = "-22.5,22.5,0,45")]
    pub angles: ChshAngles,
    #[arg(long)]
    pub strict: bool,
    /// Directory receiving every artifact and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

fn parse_angles(s: &str) -> Result<ChshAngles, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad angle {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [a, b, c, d] = v[..] else {
        return Err(format!("expected 4 comma-separated angles, got {}", v.len()));
    };
    ChshAngles::new(a, b, c, d).map_err(|e| e.to_string())
}

fn parse_bell(s: &str) -> Result<BellKind, String> {
    s.parse::<BellKind>().map_err(|e| e.to_string())
}

fn absolute(p: &mut PathBuf) {
    if let Ok(a) = std::path::absolute(Path::new(p)) {
        *p = a;
    }
}

impl Command {
    /// Resolves every path against the working directory so a manifest
    /// replays from anywhere.
    pub fn absolutize(&mut self) {
        match self {
            Command::GenState(a) => absolute(&mut a.out),
            Command::Simulate(a) => {
                absolute(&mut a.state);
                absolute(&mut a.out);
            }
            Command::Reconstruct(a) => {
                absolute(&mut a.counts);
                absolute(&mut a.out);
            }
            Command::Metrics(a) => {
                absolute(&mut a.state);
                a.out.as_mut().map(absolute);
            }
            Command::Chsh(a) => {
                absolute(&mut a.counts);
                a.out.as_mut().map(absolute);
            }
            Command::FitWerner(a) => {
                absolute(&mut a.state);
                a.out.as_mut().map(absolute);
            }
            Command::DecohereCurve(a) => absolute(&mut a.out),
            Command::Pipeline(a) => absolute(&mut a.out),
            Command::Rerun(a) => absolute(&mut a.manifest),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_parse_with_negatives() {
        let a = parse_angles("-22.5, 22.5,0,45").unwrap();
        assert_eq!(a, ChshAngles::default());
        assert!(parse_angles("1,2,3").is_err());
        assert!(parse_angles("1,2,x,4").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_angles_on_command_line() {
        let cli = Cli::try_parse_from(["werner", "metrics", "s.json", "--angles", "-10,20,-30,40"]).unwrap();
        let Command::Metrics(m) = cli.command else { panic!() };
        assert_eq!(m.angles.as_array(), [-10.0, 20.0, -30.0, 40.0]);
    }
}

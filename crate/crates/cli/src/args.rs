//! Command-line arguments.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dbljpeg::dataset::CompressionLabel;
use dbljpeg::jpeg_sim::QualityFactor;
use dbljpeg::localize::{ForgeMode, STRIDES};
use dbljpeg::models::ModelKind;
use serde::Serialize;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "dbljpeg",
    version,
    about = "Double JPEG compression detection and splice localization"
)]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Root under which commands place outputs when no --out is given.
    #[arg(long, global = true, env = "DBLJPEG_OUT", default_value = "dbljpeg-out")]
    pub out_root: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a labeled patch store from lossless images or the synthetic corpus.
    BuildDataset(BuildArgs),
    /// Train one classifier per selected qf2.
    Train(TrainArgs),
    /// Evaluate trained classifiers on the test split and write TPR tables.
    Eval(EvalArgs),
    /// Scan a suspect artifact and render a localization mask.
    Localize(LocalizeArgs),
    /// Create a spliced artifact with ground truth.
    Forge(ForgeArgs),
    /// Print an artifact's dimensions, quantization tables and estimated quality.
    Inspect(InspectArgs),
}

/// A grid quality factor or every grid value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Qf2Selection {
    One(QualityFactor),
    All,
}

impl Qf2Selection {
    pub fn values(self) -> Vec<QualityFactor> {
        match self {
            Qf2Selection::One(q) => vec![q],
            Qf2Selection::All => QualityFactor::GRID.to_vec(),
        }
    }

    pub fn is_all(self) -> bool {
        self == Qf2Selection::All
    }
}

impl FromStr for Qf2Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Qf2Selection::All);
        }
        let v: u8 = s
            .parse()
            .map_err(|_| format!("expected a quality factor or \"all\", got {s:?}"))?;
        QualityFactor::grid_value(v)
            .map(Qf2Selection::One)
            .map_err(|e| e.to_string())
    }
}

fn parse_qf(s: &str) -> Result<QualityFactor, String> {
    let v: u8 = s.parse().map_err(|_| format!("not a quality factor: {s:?}"))?;
    QualityFactor::new(v).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

fn parse_label(s: &str) -> Result<CompressionLabel, String> {
    CompressionLabel::from_dir_name(s).map_err(|e| e.to_string())
}

fn parse_stride(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("not a stride: {s:?}"))?;
    if STRIDES.contains(&v) {
        Ok(v)
    } else {
        Err(format!("stride must be one of {STRIDES:?}"))
    }
}

/// `ROW,COL` in pixels.
fn parse_offset(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(',')
        .ok_or_else(|| format!("expected ROW,COL, got {s:?}"))?;
    let n = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad offset component {v:?}"))
    };
    Ok((n(r)?, n(c)?))
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Donor tile compressed at qf1 before pasting (splice double, background single).
    DoubleSplice,
    /// Host compressed at qf1 before pasting (splice single, background double).
    SingleSplice,
}

impl From<ModeArg> for ForgeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::DoubleSplice => ForgeMode::DoubleSplice,
            ModeArg::SingleSplice => ForgeMode::SingleSplice,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    /// Directory of PNG/TIFF source images.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub source: Option<PathBuf>,

    /// Use N images of the seeded synthetic corpus instead of --source.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,

    /// Synthetic image width.
    #[arg(long, default_value_t = 512)]
    pub width: usize,

    /// Synthetic image height.
    #[arg(long, default_value_t = 384)]
    pub height: usize,

    /// Seed of the synthetic corpus.
    #[arg(long, default_value_t = 0)]
    pub synthetic_seed: u64,

    /// Second quality factor (grid value) or "all".
    #[arg(long, default_value = "90")]
    pub qf2: Qf2Selection,

    /// Seed of the train/val/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Restrict to these classes (e.g. uncompressed,single,double60); all nine by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_label)]
    pub classes: Vec<CompressionLabel>,

    /// Build several qf2 stores concurrently.
    #[arg(long)]
    pub parallel: bool,

    /// Output directory [default: <out-root>/dataset].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Dataset root written by build-dataset.
    #[arg(long)]
    pub data: PathBuf,

    /// Second quality factor (grid value) or "all".
    #[arg(long, default_value = "90")]
    pub qf2: Qf2Selection,

    /// Model kind: spatial, frequency or multidomain.
    #[arg(long, value_parser = parse_kind, default_value = "multidomain")]
    pub kind: ModelKind,

    /// Master seed; each model derives its own from it, the kind and qf2.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// JSON model configuration overriding the default architecture sizes.
    #[arg(long)]
    pub model_config: Option<PathBuf>,

    /// Maximum training epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,

    /// Mini-batch size.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,

    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,

    /// Plain cross-entropy instead of the intra-double weighted loss.
    #[arg(long)]
    pub unweighted: bool,

    /// Train several qf2 models concurrently.
    #[arg(long)]
    pub parallel: bool,

    /// Checkpoint directory [default: <out-root>/models].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Dataset root written by build-dataset.
    #[arg(long)]
    pub data: PathBuf,

    /// Checkpoint directory written by train.
    #[arg(long)]
    pub models: PathBuf,

    /// Model kinds to evaluate.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind, default_value = "multidomain")]
    pub kind: Vec<ModelKind>,

    /// Second quality factor (grid value) or "all".
    #[arg(long, default_value = "90")]
    pub qf2: Qf2Selection,

    /// Report directory [default: <out-root>/reports].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LocalizeArgs {
    /// Suspect artifact (.jcoef).
    #[arg(long)]
    pub input: PathBuf,

    /// Checkpoint directory written by train.
    #[arg(long)]
    pub models: PathBuf,

    /// Model kind: spatial, frequency or multidomain.
    #[arg(long, value_parser = parse_kind, default_value = "multidomain")]
    pub kind: ModelKind,

    /// Window stride in pixels: 8, 16, 32 or 64.
    #[arg(long, default_value_t = 64, value_parser = parse_stride)]
    pub stride: usize,

    /// Ground truth written by forge; enables scoring.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Output directory [default: <out-root>/localize].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ForgeArgs {
    /// Host image (PNG/TIFF).
    #[arg(long)]
    pub host: PathBuf,

    /// Donor image (PNG/TIFF); its tile at the same offset is pasted.
    #[arg(long)]
    pub donor: PathBuf,

    /// Splice position ROW,COL in pixels, multiples of 64.
    #[arg(long, value_parser = parse_offset, default_value = "0,0")]
    pub offset: (usize, usize),

    /// Quality of the first compression.
    #[arg(long, value_parser = parse_qf, default_value = "60")]
    pub qf1: QualityFactor,

    /// Quality of the final compression.
    #[arg(long, value_parser = parse_qf, default_value = "90")]
    pub qf2: QualityFactor,

    /// Which region carries the double compression.
    #[arg(long, value_enum, default_value_t = ModeArg::DoubleSplice)]
    pub mode: ModeArg,

    /// Output directory [default: <out-root>/forge].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct InspectArgs {
    /// Artifact file (.jcoef).
    pub file: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn qf2_selection() {
        assert_eq!("all".parse::<Qf2Selection>().unwrap().values().len(), 8);
        assert_eq!(
            "75".parse::<Qf2Selection>().unwrap().values(),
            vec![QualityFactor::new(75).unwrap()]
        );
        assert!("72".parse::<Qf2Selection>().is_err());
        assert!("ninety".parse::<Qf2Selection>().is_err());
    }

    #[test]
    fn offsets_and_strides() {
        assert_eq!(parse_offset("64, 128").unwrap(), (64, 128));
        assert!(parse_offset("64").is_err());
        assert!(parse_offset("a,1").is_err());
        assert_eq!(parse_stride("16").unwrap(), 16);
        assert!(parse_stride("24").is_err());
    }

    #[test]
    fn classes_parse_as_a_list() {
        let cli = Cli::try_parse_from([
            "dbljpeg",
            "build-dataset",
            "--synthetic",
            "3",
            "--classes",
            "uncompressed,single,double60",
        ])
        .unwrap();
        let Command::BuildDataset(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.classes.len(), 3);
        assert_eq!(a.classes[2], CompressionLabel::Double(QualityFactor::new(60).unwrap()));
    }
}

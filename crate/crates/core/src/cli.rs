//! The `crowdcount` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{Config, ConfigError, KernelKind};
use crate::dataset::{cell_ground_truth, DatasetError, DatasetManifest};
use crate::imaging::{decode_image, partition};
use crate::pipeline::{
    column_names, count_image, cross_validate, evaluate_model, extract_cell_row, train, write_atomic, write_csv,
    PipelineError, TrainedModel,
};
use crate::synth::{write_dataset, SynthParams};

#[derive(Debug, Parser)]
#[command(name = "crowdcount", version, about = "Count people in dense crowd images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on an annotated dataset.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print per-image totals; optionally write per-cell estimates.
    Count {
        #[arg(long)]
        model: PathBuf,
        /// Per-cell CSV output.
        #[arg(long)]
        cells: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Score a model on an annotated dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// k-fold cross-validation with pooled report.
    Crossval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic blob-crowd dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        min_dots: usize,
        #[arg(long, default_value_t = 500)]
        max_dots: usize,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value = "img")]
        prefix: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the fusion feature rows of every grid cell as CSV.
    Features {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A JSON config file plus flag overrides; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cell_size: Option<usize>,
    #[arg(long)]
    pub fourier_cutoff: Option<f64>,
    #[arg(long)]
    pub fourier_peak_sigma: Option<f64>,
    #[arg(long)]
    pub glcm_levels: Option<usize>,
    #[arg(long)]
    pub codebook_k: Option<usize>,
    #[arg(long, value_parser = parse_kernel)]
    pub svr_kernel: Option<KernelKind>,
    #[arg(long)]
    pub svr_c: Option<f64>,
    #[arg(long)]
    pub svr_epsilon: Option<f64>,
    #[arg(long)]
    pub svr_tol: Option<f64>,
    #[arg(long)]
    pub head_window: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub head_threshold: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
}

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    match s {
        "linear" => Ok(KernelKind::Linear),
        "rbf" => Ok(KernelKind::Rbf),
        _ => Err(format!("unknown kernel '{s}' (expected linear or rbf)")),
    }
}

impl ConfigArgs {
    fn any_override(&self) -> bool {
        self.config.is_some()
            || self.cell_size.is_some()
            || self.fourier_cutoff.is_some()
            || self.fourier_peak_sigma.is_some()
            || self.glcm_levels.is_some()
            || self.codebook_k.is_some()
            || self.svr_kernel.is_some()
            || self.svr_c.is_some()
            || self.svr_epsilon.is_some()
            || self.svr_tol.is_some()
            || self.head_window.is_some()
            || self.head_threshold.is_some()
            || self.stride.is_some()
    }

    /// Starts from the file (or `base`), applies the flags and validates.
    pub fn resolve(&self, base: Config) -> Result<Config, CliError> {
        let mut c = match &self.config {
            Some(path) => Config::from_json(&read(path)?)?,
            None => base,
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(cell_size => cell_size);
        set!(fourier_cutoff => fourier.cutoff);
        set!(fourier_peak_sigma => fourier.peak_sigma);
        set!(glcm_levels => glcm.levels);
        set!(codebook_k => codebook.k);
        set!(svr_kernel => svr.kernel);
        set!(svr_c => svr.c);
        set!(svr_epsilon => svr.epsilon);
        set!(svr_tol => svr.tol);
        set!(head_window => head.window);
        set!(head_threshold => head.threshold);
        if self.stride.is_some() {
            c.sampling.stride = self.stride;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Incompatible(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Incompatible(_) => 4,
            CliError::Convergence(_) => 5,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => c.into(),
            PipelineError::Dataset(d) => d.into(),
            PipelineError::Model(_) => CliError::Incompatible(e.to_string()),
            PipelineError::Io { .. } | PipelineError::Csv { .. } => CliError::Io(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    Ok(TrainedModel::load(path)?)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            CliError::Other(String::new())
        }
        _ => CliError::Config(e.to_string().lines().next().unwrap_or_default().to_string()),
    });
    match cli {
        Ok(cli) => execute(cli.command),
        Err(CliError::Other(m)) if m.is_empty() => Ok(()),
        Err(e) => Err(e),
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { manifest, out, seed, config } => {
            let config = config.resolve(Config::new())?;
            let (_, samples) = DatasetManifest::load(&manifest)?;
            let model = train(&samples, &config, seed)?;
            write_atomic(&out, &model.to_json()).map_err(CliError::from)?;
            println!("model {} ({} images, {} cells)", model.digest(), model.diagnostics.images, model.diagnostics.cells);
            if !model.diagnostics.converged {
                return Err(CliError::Convergence(format!(
                    "warning: an SVR hit its iteration cap; model written to {}",
                    out.display()
                )));
            }
            Ok(())
        }
        Command::Count { model, cells, config, images } => {
            let model = load_model(&model)?;
            if config.any_override() {
                let requested = config.resolve(model.config.clone())?;
                model.check_compatible(&requested).map_err(PipelineError::from)?;
            }
            let mut rows = Vec::new();
            for path in &images {
                let img = decode_image(&read(path)?)
                    .map_err(|e| CliError::Other(format!("cannot decode {}: {e}", path.display())))?;
                let counted = count_image(&img, &model)?;
                println!("{}\t{:.1}", path.display(), counted.total);
                for c in &counted.cells {
                    rows.push(CellCsvRow {
                        image: path.display().to_string(),
                        row: c.rect.row,
                        col: c.rect.col,
                        height: c.rect.height,
                        width: c.rect.width,
                        count: c.count,
                    });
                }
            }
            if let Some(out) = cells {
                write_csv(&out, &rows)?;
            }
            Ok(())
        }
        Command::Evaluate { model, manifest, out } => {
            let model = load_model(&model)?;
            let (_, samples) = DatasetManifest::load(&manifest)?;
            let report = evaluate_model(&samples, &model)?;
            report.write(&out)?;
            let s = report.image_summary;
            println!("images {}: AE {:.3} +- {:.3}, NAE {:.4} +- {:.4}", s.n, s.mean_ae, s.std_ae, s.mean_nae, s.std_nae);
            Ok(())
        }
        Command::Crossval { manifest, k, seed, out, config } => {
            let config = config.resolve(Config::new())?;
            let (_, samples) = DatasetManifest::load(&manifest)?;
            let report = cross_validate(&samples, k, seed, &config)?;
            report.write(&out)?;
            let s = report.pooled.image_summary;
            println!("pooled {}: AE {:.3} +- {:.3}, NAE {:.4} +- {:.4}", s.n, s.mean_ae, s.std_ae, s.mean_nae, s.std_nae);
            if report.folds.iter().any(|f| !f.converged) {
                return Err(CliError::Convergence("warning: an SVR hit its iteration cap in some fold".into()));
            }
            Ok(())
        }
        Command::Synth { n, min_dots, max_dots, width, height, prefix, seed, out } => {
            let params = SynthParams { n_images: n, min_dots, max_dots, width, height, seed, prefix };
            let manifest = write_dataset(&out, &params).map_err(|e| match e {
                PipelineError::Stage { message, .. } => CliError::Config(message),
                other => other.into(),
            })?;
            println!("{}", manifest.display());
            Ok(())
        }
        Command::Features { model, manifest, out } => {
            let model = load_model(&model)?;
            let (_, samples) = DatasetManifest::load(&manifest)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", out.display()));
            let mut header = vec!["image_id".to_string(), "row".into(), "col".into(), "gt".into()];
            header.extend(column_names());
            w.write_record(&header).map_err(csv_err)?;
            let sources = model.sources();
            for s in &samples {
                let cells = partition(&s.image, &model.config.grid()).map_err(PipelineError::from)?;
                let rects: Vec<_> = cells.iter().map(|p| p.rect()).collect();
                let gt = cell_ground_truth(&s.annotation, &rects);
                for (p, g) in cells.iter().zip(gt) {
                    let row = extract_cell_row(p, &sources)?;
                    let mut rec = vec![s.id.clone(), p.rect().row.to_string(), p.rect().col.to_string(), g.to_string()];
                    rec.extend(row.values.iter().map(f64::to_string));
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            write_atomic(&out, &bytes)?;
            Ok(())
        }
    }
}

#[derive(Debug, serde::Serialize)]
struct CellCsvRow {
    image: String,
    row: usize,
    col: usize,
    height: usize,
    width: usize,
    count: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, br#"{"cell_size": 64, "glcm": {"levels": 4}}"#).unwrap();
        let args = ConfigArgs { config: Some(path), glcm_levels: Some(16), ..Default::default() };
        let c = args.resolve(Config::new()).unwrap();
        assert_eq!((c.cell_size, c.glcm.levels), (64, 16));
    }

    #[test]
    fn out_of_range_override_is_a_config_error() {
        let args = ConfigArgs { cell_size: Some(8), ..Default::default() };
        assert_eq!(args.resolve(Config::new()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_config_key_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, br#"{"cell_sise": 64}"#).unwrap();
        let args = ConfigArgs { config: Some(path), ..Default::default() };
        assert_eq!(args.resolve(Config::new()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = run(["crowdcount", "count", "--model", "/nonexistent/model.json", "x.pgm"]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}

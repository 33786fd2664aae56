//! Command-line front end.
//!
//! Data (images written to stdout, TSV rows, comparison figures) goes to
//! `stdout`; progress and per-stage summaries go to `stderr`.
//!
//! Exit codes: 0 success, 1 compare mismatch, 2 bad arguments, 3 I/O or
//! image format error, 4 pipeline/kernel parse error, 5 empty or too-small
//! region.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::fixedpoint::FixedFormat;
use crate::imageio::{self, GrayImage, ImageError};
use crate::kernels::{self, Kernel, KernelError, OperatorKind, RobertsVariant};
use crate::oracle;
use crate::pipeline::{self, MagnitudeMode, PipelineError, PipelineSpec, StageSpec, DEFAULT_THRESHOLD};
use crate::roi_stats::{self, Precision, RoiError, RoiSpec};
use crate::streamcore::{FixedConfig, Padding};

/// Environment variable overriding the default border policy.
pub const PAD_ENV: &str = "PIXELMILL_PAD";

#[derive(Debug, Parser)]
#[command(name = "pixelmill", version, about = "Fixed-point streaming image filter model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a pipeline such as `gauss,sobel:abs,thresh=80,sharpen` over an image.
    Filter {
        input: PathBuf,
        /// Comma-separated stage list.
        #[arg(short = 'p', long = "pipeline")]
        pipeline: Option<String>,
        /// Custom mask appended as a final stage: nine (or four) comma-separated rationals.
        #[arg(short = 'k', long = "kernel", allow_hyphen_values = true)]
        kernel: Option<String>,
        /// Output PGM; written to stdout when omitted.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        datapath: DatapathArgs,
    },
    /// Edge map: one gradient operator followed by a threshold.
    Detect {
        input: PathBuf,
        #[arg(long = "op", default_value = "sobel")]
        operator: String,
        #[arg(short = 't', long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u8,
        /// Write the gradient magnitude without thresholding.
        #[arg(long)]
        no_threshold: bool,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        datapath: DatapathArgs,
    },
    /// Region statistics (mean, variance, standard deviation) as TSV rows.
    Stats {
        input: PathBuf,
        /// `label=rect:x,y,w,h` or `label=ellipse:cx,cy,rx,ry`; repeatable.
        #[arg(long = "roi")]
        rois: Vec<String>,
        /// Shorthand for `--roi normal=<spec>`.
        #[arg(long)]
        normal: Option<String>,
        /// Shorthand for `--roi abnormal=<spec>`.
        #[arg(long)]
        abnormal: Option<String>,
        /// Write the masked region image(s) here.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "short")]
        precision: Precision,
        /// Emit one JSON object instead of TSV rows.
        #[arg(long)]
        json: bool,
    },
    /// Run the streaming fixed-point path and the floating-point reference
    /// side by side and report their difference.
    Compare {
        input: PathBuf,
        #[arg(short = 'p', long = "pipeline")]
        pipeline: Option<String>,
        #[arg(short = 'k', long = "kernel", allow_hyphen_values = true)]
        kernel: Option<String>,
        #[command(flatten)]
        datapath: DatapathArgs,
    },
    /// Print the mask catalog.
    Kernels {
        /// Only this operator.
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
struct DatapathArgs {
    /// Border policy: zero or replicate (default zero, or $PIXELMILL_PAD).
    #[arg(long)]
    pad: Option<Padding>,
    /// Coefficient format, e.g. s16.4 or u8.0:sat:round.
    #[arg(long = "fixed", value_name = "FMT")]
    coefficients: Option<FixedFormat>,
    /// Accumulator format; sized from the taps when omitted.
    #[arg(long = "acc", value_name = "FMT")]
    accumulator: Option<FixedFormat>,
    /// Pixel stream format.
    #[arg(long = "input-fmt", value_name = "FMT")]
    input_format: Option<FixedFormat>,
    /// MAC output format.
    #[arg(long = "out-fmt", value_name = "FMT")]
    output_format: Option<FixedFormat>,
    /// Magnitude for gradient stages without an explicit suffix.
    #[arg(long, default_value = "exact")]
    magnitude: MagnitudeMode,
    /// Use the non-zero-sum Roberts Gy mask [[0,1],[-1,1]].
    #[arg(long)]
    roberts_unbalanced: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    BadArgs(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Spec(PipelineError),
    #[error(transparent)]
    Kernel(KernelError),
    #[error(transparent)]
    Roi(RoiError),
    #[error("streaming output differs from the reference beyond tolerance")]
    Mismatch,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Mismatch => 1,
            CliError::BadArgs(_) => 2,
            CliError::Image(_) | CliError::Io(_) => 3,
            CliError::Spec(_) | CliError::Kernel(_) => 4,
            CliError::Roi(RoiError::Parse { .. }) => 2,
            CliError::Roi(_) => 5,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Parse { .. } | PipelineError::Empty | PipelineError::Kernel(_) => CliError::Spec(e),
            other => CliError::BadArgs(other.to_string()),
        }
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Parse `args` (program name first), run the command and return the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "pixelmill: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Filter {
            input,
            pipeline,
            kernel,
            output,
            datapath,
        } => {
            let spec = build_spec(pipeline.as_deref(), kernel.as_deref(), &datapath)?;
            cmd_filter(&input, &spec, output.as_deref(), stdout, stderr)
        }
        Command::Detect {
            input,
            operator,
            threshold,
            no_threshold,
            output,
            datapath,
        } => {
            let op: OperatorKind = operator.parse().map_err(CliError::Kernel)?;
            let mut stages = vec![StageSpec::Filter {
                op,
                magnitude: datapath.magnitude,
            }];
            if !no_threshold {
                stages.push(StageSpec::Threshold(threshold));
            }
            let spec = configure(PipelineSpec::new(stages)?, &datapath)?;
            cmd_filter(&input, &spec, output.as_deref(), stdout, stderr)
        }
        Command::Stats {
            input,
            rois,
            normal,
            abnormal,
            output,
            precision,
            json,
        } => {
            let mut labelled = Vec::new();
            if let Some(s) = normal {
                labelled.push(("normal".to_string(), s));
            }
            if let Some(s) = abnormal {
                labelled.push(("abnormal".to_string(), s));
            }
            for (i, r) in rois.iter().enumerate() {
                match r.split_once('=') {
                    Some((label, spec)) => labelled.push((label.to_string(), spec.to_string())),
                    None => labelled.push((format!("roi{}", i + 1), r.clone())),
                }
            }
            if labelled.is_empty() {
                return Err(CliError::BadArgs("stats needs at least one --roi".into()));
            }
            let parsed = labelled
                .into_iter()
                .map(|(label, text)| text.parse::<RoiSpec>().map(|roi| (label, roi)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(CliError::Roi)?;
            cmd_stats(&input, &parsed, output.as_deref(), precision, json, stdout, stderr)
        }
        Command::Compare {
            input,
            pipeline,
            kernel,
            datapath,
        } => {
            let spec = build_spec(pipeline.as_deref(), kernel.as_deref(), &datapath)?;
            cmd_compare(&input, &spec, stdout, stderr)
        }
        Command::Kernels { name } => cmd_kernels(name.as_deref(), stdout),
    }
}

fn padding_default() -> Result<Padding, CliError> {
    match std::env::var(PAD_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|e: String| CliError::BadArgs(format!("{PAD_ENV}: {e}"))),
        Err(_) => Ok(Padding::default()),
    }
}

fn configure(spec: PipelineSpec, d: &DatapathArgs) -> Result<PipelineSpec, CliError> {
    let padding = match d.pad {
        Some(p) => p,
        None => padding_default()?,
    };
    let defaults = FixedConfig::default();
    let fixed = FixedConfig {
        input: d.input_format.unwrap_or(defaults.input),
        coefficients: d.coefficients.unwrap_or(defaults.coefficients),
        accumulator: d.accumulator,
        output: d.output_format,
    };
    let roberts = if d.roberts_unbalanced {
        RobertsVariant::Unbalanced
    } else {
        RobertsVariant::Canonical
    };
    Ok(spec.with_padding(padding).with_fixed(fixed).with_roberts(roberts))
}

fn build_spec(pipeline: Option<&str>, kernel: Option<&str>, d: &DatapathArgs) -> Result<PipelineSpec, CliError> {
    let custom = kernel
        .map(|k| k.parse::<Kernel>().map_err(CliError::Kernel))
        .transpose()?;
    let spec = match (pipeline, custom) {
        (Some(p), custom) => {
            let mut spec = PipelineSpec::parse_with(p, d.magnitude)?;
            if let Some(k) = custom {
                spec.push(StageSpec::Custom(k));
            }
            spec
        }
        (None, Some(k)) => PipelineSpec::new(vec![StageSpec::Custom(k)])?,
        (None, None) => return Err(CliError::BadArgs("give a pipeline with -p or a mask with -k".into())),
    };
    configure(spec, d)
}

fn read_input(path: &Path) -> Result<GrayImage, CliError> {
    Ok(imageio::read_gray(path)?)
}

fn cmd_filter(
    input: &Path,
    spec: &PipelineSpec,
    output: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let img = read_input(input)?;
    let (out, reports) = pipeline::run_pipeline_traced(&img, spec)?;
    for (i, r) in reports.iter().enumerate() {
        let masks = if r.kernels.is_empty() {
            "-".to_string()
        } else {
            r.kernels.join("+")
        };
        writeln!(
            stderr,
            "stage {}: {} kernel={} min={} max={}",
            i + 1,
            r.label,
            masks,
            r.min,
            r.max
        )
        .map_err(io_err)?;
    }
    match output {
        Some(path) => {
            imageio::write_image(&out, path)?;
            writeln!(stderr, "wrote {}", path.display()).map_err(io_err)?;
        }
        None => stdout.write_all(&imageio::encode_pgm(&out)).map_err(io_err)?,
    }
    Ok(())
}

fn masked_path(base: &Path, label: &str, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("roi");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("pgm");
    base.with_file_name(format!("{stem}_{label}.{ext}"))
}

fn cmd_stats(
    input: &Path,
    rois: &[(String, RoiSpec)],
    output: Option<&Path>,
    precision: Precision,
    json: bool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let img = read_input(input)?;
    let mut reports = Vec::with_capacity(rois.len());
    let mut masks = Vec::with_capacity(rois.len());
    for (label, roi) in rois {
        let (report, extract) = roi_stats::roi_stats(&img, roi, label).map_err(CliError::Roi)?;
        reports.push(report);
        masks.push(extract.masked);
    }
    if let Some(base) = output {
        for ((label, _), mask) in rois.iter().zip(&masks) {
            let path = masked_path(base, label, rois.len() > 1);
            imageio::write_image(mask, &path)?;
            writeln!(stderr, "wrote {}", path.display()).map_err(io_err)?;
        }
    }
    if json {
        let doc = serde_json::json!({
            "input": input.display().to_string(),
            "reports": reports,
        });
        writeln!(stdout, "{doc}").map_err(io_err)?;
    } else {
        for r in &reports {
            writeln!(stdout, "{}", roi_stats::format_tsv(r, precision)).map_err(io_err)?;
        }
    }
    if let [a, b] = reports.as_slice() {
        let c = roi_stats::compare_reports(a, b);
        writeln!(
            stderr,
            "{} - {}: dmean={:.3e} dvar={:.3e} dstd={:.3e}",
            c.first, c.second, c.delta_mean, c.delta_variance, c.delta_std_dev
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_compare(
    input: &Path,
    spec: &PipelineSpec,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    if !matches!(spec.stages(), [StageSpec::Filter { .. } | StageSpec::Custom(_)]) {
        return Err(CliError::BadArgs("compare takes exactly one filter stage".into()));
    }
    let img = read_input(input)?;
    let streamed = pipeline::run_pipeline(&img, spec)?;
    let reference = oracle::reference_pipeline(&img, spec).map_err(|e| CliError::BadArgs(e.to_string()))?;
    let diff = oracle::compare_images(&streamed, &reference).map_err(|e| CliError::BadArgs(e.to_string()))?;
    let tolerance = if spec.is_integer() { 0.0 } else { 1.0 };
    writeln!(stdout, "max_abs_diff\t{}", diff.max_abs_diff).map_err(io_err)?;
    writeln!(stdout, "mean_abs_diff\t{}", diff.mean_abs_diff).map_err(io_err)?;
    writeln!(stdout, "psnr\t{}", diff.psnr).map_err(io_err)?;
    writeln!(stderr, "tolerance {tolerance} LSB").map_err(io_err)?;
    if diff.max_abs_diff > tolerance {
        return Err(CliError::Mismatch);
    }
    Ok(())
}

fn cmd_kernels(name: Option<&str>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let kinds: Vec<OperatorKind> = match name {
        Some(n) => vec![n.parse().map_err(CliError::Kernel)?],
        None => OperatorKind::ALL.to_vec(),
    };
    for kind in kinds {
        let paths: &[kernels::GradientPath] = match kind.arity() {
            kernels::Arity::DualPath => &[kernels::GradientPath::Gx, kernels::GradientPath::Gy],
            kernels::Arity::SinglePath => &[kernels::GradientPath::Single],
        };
        if kind == OperatorKind::LoG {
            writeln!(stdout, "log = gauss then laplacian\n").map_err(io_err)?;
            continue;
        }
        for &path in paths {
            let k = kernels::kernel_for(kind, path).map_err(CliError::Kernel)?;
            writeln!(stdout, "{} (sum {})", k.name(), kernels::kernel_sum(&k)).map_err(io_err)?;
            writeln!(stdout, "{k}").map_err(io_err)?;
        }
    }
    Ok(())
}

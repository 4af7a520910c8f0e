//! `qpress` command-line tool.
//!
//! Exit statuses: 0 converged (or clamped), 1 I/O or configuration error,
//! 2 target infeasible, 3 parameter resolution exhausted, 4 a cube band failed.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qpress::codecs::{resolve, Codec, ParameterRange};
use qpress::imagecore::{load_pgm, raw_io, store_pgm, CompressedBlob, RasterImage, RawDescriptor};
use qpress::metrics::{evaluate, MetricId, QualityMetric};
use qpress::multichannel::{band_blob_name, compress_cube, CubeManifest, CubeSettings};
use qpress::search::{
    resolve_pair, run_with_report, Method, Probe, ProbeKind, QualityTarget, ReportStatus, Search, SearchError,
};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;
const EXIT_BAND_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "qpress", version, about = "Compress images to a target quality-metric value")]
#[command(args_override_self = true, allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for the parameter that hits the target and store the result.
    Compress(CompressArgs),
    /// Print the metric values at both ends of the parameter range.
    Estimate(EstimateArgs),
    /// Compress every band of a RAW cube to the same target.
    Cube(CubeArgs),
    /// Compute quality metrics between two PGM images.
    Measure(MeasureArgs),
    /// Compress once at a fixed parameter.
    Encode(EncodeArgs),
    /// Decode a container file to PGM.
    Decode(DecodeArgs),
    /// List built-in codecs and metrics.
    List,
}

#[derive(Args)]
struct PipelineArgs {
    /// Codec spec: dct, dct-csf, dct@8, stub:<a>:<b>:<min>:<max>, ext:<config>
    #[arg(long, default_value = "dct")]
    codec: String,
    #[arg(long, default_value = "psnr")]
    metric: String,
    /// Lower end of the parameter range (codec default if omitted).
    #[arg(long)]
    param_min: Option<f64>,
    #[arg(long)]
    param_max: Option<f64>,
}

#[derive(Args)]
struct TargetArgs {
    #[arg(long)]
    target: f64,
    /// Tolerance; 0.1 for dB metrics, 0.005 for unitless ones.
    #[arg(long)]
    delta: Option<f64>,
    /// bisect or interp
    #[arg(long, default_value = "interp")]
    method: String,
    /// Return the nearest endpoint instead of failing when the target is out of reach.
    #[arg(long)]
    clamp: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    /// First interpolation probe.
    #[arg(long)]
    seed: Option<f64>,
    /// Print every probe to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    target: TargetArgs,
    /// Container file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    decoded_out: Option<PathBuf>,
    /// JSON report file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CubeArgs {
    /// Band-sequential RAW file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Sidecar descriptor (`key: value` lines).
    #[arg(long)]
    desc: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[command(flatten)]
    target: TargetArgs,
    /// Compress each band after a log1p transform; quality is still measured on the original samples.
    #[arg(long)]
    homomorphic: bool,
    /// Directory for band blobs and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Extra copy of the manifest.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, conflicts_with = "all")]
    metric: Option<String>,
    #[arg(long)]
    all: bool,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "dct")]
    codec: String,
    #[arg(long)]
    param: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Codec spec; taken from the container if omitted.
    #[arg(long)]
    codec: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Cube(a) => cmd_cube(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::List => cmd_list(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn read_pgm(path: &Path) -> Result<RasterImage> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    load_pgm(&bytes).with_context(|| format!("cannot parse {}", path.display()))
}

/// Fails unless the directory that will hold `path` exists.
fn check_writable(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    Ok(())
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes through a temp file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))
        .with_context(|| format!("cannot create a temp file next to {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| anyhow!(e.error))
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn range_for(codec: &dyn Codec, pipeline: &PipelineArgs) -> Result<ParameterRange> {
    let d = codec.descriptor();
    let min = pipeline.param_min.unwrap_or(d.default_range.min());
    let max = pipeline.param_max.unwrap_or(d.default_range.max());
    if min >= max {
        bail!("--param-min ({min}) must be below --param-max ({max})");
    }
    Ok(ParameterRange::new(d.param_kind, min, max)?)
}

struct Pipeline {
    codec: Arc<dyn Codec>,
    metric: Arc<dyn QualityMetric>,
    range: ParameterRange,
}

impl Pipeline {
    fn new(args: &PipelineArgs) -> Result<Self> {
        let (codec, metric) = resolve_pair(&args.codec, &args.metric)?;
        let range = range_for(codec.as_ref(), args)?;
        Ok(Pipeline { codec, metric, range })
    }
}

struct SearchSettings {
    target: QualityTarget,
    method: Method,
}

impl SearchSettings {
    fn new(args: &TargetArgs, metric: &dyn QualityMetric) -> Result<Self> {
        let target = QualityTarget::new(metric.descriptor(), args.target, args.delta)?;
        let method: Method = args.method.parse()?;
        if args.max_iters == Some(0) {
            bail!("--max-iters must be positive");
        }
        Ok(SearchSettings { target, method })
    }
}

fn trace_probe(kind: ProbeKind, p: &Probe) {
    let tag = match kind {
        ProbeKind::Endpoint => "endpoint",
        ProbeKind::Iteration => "probe",
    };
    eprintln!("{tag} param={:.6} value={:.4} bytes={}", p.param, p.value, p.stored_bytes);
}

fn cmd_compress(a: CompressArgs) -> Result<u8> {
    let image = read_pgm(&a.input)?;
    let pipe = Pipeline::new(&a.pipeline)?;
    let settings = SearchSettings::new(&a.target, pipe.metric.as_ref())?;
    for path in [Some(&a.out), a.decoded_out.as_ref(), a.report.as_ref()].into_iter().flatten() {
        check_writable(path)?;
    }

    let mut search = Search::new(pipe.codec.as_ref(), pipe.metric.as_ref(), settings.target, pipe.range)
        .method(settings.method)
        .clamp(a.target.clamp);
    if let Some(n) = a.target.max_iters {
        search = search.max_iters(n);
    }
    if let Some(seed) = a.target.seed {
        search = search.seed(seed);
    }
    let trace = trace_probe;
    if a.target.trace {
        search = search.observer(&trace);
    }
    let run = run_with_report(&search, &image);
    if let Some(path) = &a.report {
        write_atomic(path, run.report.to_json().as_bytes())?;
    }
    match run.outcome {
        Ok(result) => {
            write_atomic(&a.out, &result.blob.to_bytes())?;
            if let Some(path) = &a.decoded_out {
                write_atomic(path, &store_pgm(&result.decoded))?;
            }
            println!("{}", run.report.summary_line());
            Ok(status_code(run.report.status))
        }
        Err(e @ SearchError::Infeasible { .. }) => {
            println!("{}", run.report.summary_line());
            eprintln!("error: {e}");
            Ok(EXIT_INFEASIBLE)
        }
        Err(e) => Err(e.into()),
    }
}

fn status_code(status: ReportStatus) -> u8 {
    match status {
        ReportStatus::Converged | ReportStatus::ClampedToMinParam | ReportStatus::ClampedToMaxParam => 0,
        ReportStatus::ExhaustedResolution => EXIT_EXHAUSTED,
        ReportStatus::Infeasible => EXIT_INFEASIBLE,
        ReportStatus::Failed => EXIT_CONFIG,
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<u8> {
    let image = read_pgm(&a.input)?;
    let pipe = Pipeline::new(&a.pipeline)?;
    if let Some(path) = &a.report {
        check_writable(path)?;
    }
    let span = qpress::search::estimate_range(&image, pipe.codec.as_ref(), pipe.metric.as_ref(), pipe.range)?;
    if let Some(path) = &a.report {
        write_atomic(path, serde_json::to_string_pretty(&span)?.as_bytes())?;
    }
    println!(
        "metric={} param_min={} param_max={} value_at_param_min={:.4} value_at_param_max={:.4} interval=[{:.4}, {:.4}]",
        pipe.metric.descriptor().metric_id,
        pipe.range.min(),
        pipe.range.max(),
        span.value_at_param_min.value,
        span.value_at_param_max.value,
        span.achievable_interval.min,
        span.achievable_interval.max,
    );
    Ok(0)
}

fn cmd_cube(a: CubeArgs) -> Result<u8> {
    let desc_text =
        std::fs::read_to_string(&a.desc).with_context(|| format!("cannot read {}", a.desc.display()))?;
    let desc: RawDescriptor = desc_text
        .parse()
        .with_context(|| format!("invalid descriptor {}", a.desc.display()))?;
    let raw = std::fs::read(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let cube = raw_io(&raw, &desc).with_context(|| format!("cannot decode {}", a.input.display()))?;
    let pipe = Pipeline::new(&a.pipeline)?;
    let settings = SearchSettings::new(&a.target, pipe.metric.as_ref())?;
    if a.target.seed.is_some() || a.target.trace {
        bail!("--seed and --trace apply to single-image runs only");
    }
    if a.out_dir.exists() && !a.out_dir.is_dir() {
        bail!("{} is not a directory", a.out_dir.display());
    }
    check_writable(&a.out_dir)?;
    if let Some(path) = &a.report {
        check_writable(path)?;
    }

    let cube_settings = CubeSettings {
        method: settings.method,
        clamp: a.target.clamp,
        max_iters: a.target.max_iters,
        homomorphic: a.homomorphic,
    };
    let outcome = compress_cube(
        &cube,
        pipe.codec.as_ref(),
        pipe.metric.as_ref(),
        &settings.target,
        pipe.range,
        &cube_settings,
    );
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let (bands, manifest, code) = match &outcome {
        Ok(r) => {
            let code = r.per_band.iter().map(|b| status_code(b.report.status)).max().unwrap_or(0);
            (&r.per_band, r.manifest(), code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (&e.completed, e.manifest(), EXIT_BAND_FAILED)
        }
    };
    for band in bands {
        write_atomic(&a.out_dir.join(band_blob_name(band.index)), &band.result.blob.to_bytes())?;
    }
    let json = manifest.to_json();
    write_atomic(&a.out_dir.join("manifest.json"), json.as_bytes())?;
    if let Some(path) = &a.report {
        write_atomic(path, json.as_bytes())?;
    }
    for entry in &manifest.bands {
        println!("band={} label={} {}", entry.index, entry.label, entry.report.summary_line());
    }
    println!("{}", cube_summary(&manifest));
    Ok(code)
}

fn cube_summary(m: &CubeManifest) -> String {
    let converged = m
        .bands
        .iter()
        .filter(|b| b.report.status == ReportStatus::Converged)
        .count();
    let cr = m.aggregate_cr.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"));
    format!(
        "bands={} converged={} complete={} total_iterations={} mean_iterations={:.4} aggregate_cr={cr}",
        m.bands.len(),
        converged,
        m.complete,
        m.total_iterations,
        m.total_iterations as f64 / m.bands.len() as f64,
    )
}

fn cmd_measure(a: MeasureArgs) -> Result<u8> {
    let reference = read_pgm(&a.reference)?;
    let distorted = read_pgm(&a.dist)?;
    let ids: Vec<MetricId> = match &a.metric {
        Some(id) => vec![id.parse()?],
        None => MetricId::ALL.to_vec(),
    };
    let mut lines = Vec::with_capacity(ids.len());
    for id in ids {
        let value = evaluate(id, &reference, &distorted)?;
        lines.push(format!("{} {value:.4}", id.as_str()));
    }
    println!("{}", lines.join("\n"));
    Ok(0)
}

fn cmd_encode(a: EncodeArgs) -> Result<u8> {
    let image = read_pgm(&a.input)?;
    let codec = resolve(&a.codec)?;
    let param = qpress::codecs::ControlParameter::new(codec.descriptor().param_kind, a.param)?;
    check_writable(&a.out)?;
    let blob = codec.compress(&image, param)?;
    write_atomic(&a.out, &blob.to_bytes())?;
    Ok(0)
}

fn cmd_decode(a: DecodeArgs) -> Result<u8> {
    let bytes = std::fs::read(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let blob = CompressedBlob::from_bytes(&bytes).with_context(|| format!("cannot parse {}", a.input.display()))?;
    let codec = resolve(a.codec.as_deref().unwrap_or(&blob.codec_id))?;
    check_writable(&a.out)?;
    let image = codec.decompress(&blob)?;
    write_atomic(&a.out, &store_pgm(&image))?;
    Ok(0)
}

fn cmd_list() -> Result<u8> {
    for spec in ["dct", "dct-csf"] {
        let codec = resolve(spec)?;
        let d = codec.descriptor();
        println!(
            "codec {} param={} range=[{}, {}]",
            d.codec_id,
            d.param_kind,
            d.default_range.min(),
            d.default_range.max()
        );
    }
    for id in MetricId::ALL {
        println!("metric {}", id.as_str());
    }
    Ok(0)
}

//! `mmcm`: score ensemble-prediction corpora, compare domains, fit trends
//! and generate synthetic test corpora.
//!
//! Exit codes: 0 success, 1 data-level failure, 2 usage or configuration
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use mmcm::analysis::{self, Level, TrendMetric};
use mmcm::corpus::{self, CorpusScores, Manifest};
use mmcm::plot::{self, ScatterSeries};
use mmcm::report::{self, ReportBundle};
use mmcm::structural::{StructuralParams, DEFAULT_BINS, DEFAULT_TAU};
use mmcm::synthgen;

mod rescore;

#[derive(Parser)]
#[command(name = "mmcm", version, about = "Multi-model consensus and depth-structure scene complexity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Open every raster a manifest references and report problems.
    Validate(ValidateArgs),
    /// Score every frame and write frame, scene and dataset tables.
    Score(ScoreArgs),
    /// Relative perceptual gap matrix and ranking between groups.
    Gap(GapArgs),
    /// Linear trend of MMCM against a depth-structure metric, per domain tag.
    Trend(TrendArgs),
    /// Generate a synthetic corpus with known scores.
    Synth(SynthArgs),
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("tau must be > 0".into())
    }
}

#[derive(Args, Clone)]
struct WorkerArgs {
    /// Worker threads; defaults to the available hardware parallelism.
    #[arg(long, env = "MMCM_WORKERS", default_value_t = default_workers(), value_parser = parse_positive)]
    workers: usize,
}

#[derive(Args, Clone)]
struct ScoringArgs {
    /// Depth histogram bins for entropy.
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = parse_positive)]
    bins: usize,
    /// Relative depth-discontinuity threshold.
    #[arg(long, default_value_t = DEFAULT_TAU, value_parser = parse_tau)]
    tau: f64,
    #[command(flatten)]
    workers: WorkerArgs,
    /// Only score these datasets (exact id, repeatable or comma separated).
    #[arg(long = "dataset", value_delimiter = ',')]
    datasets: Vec<String>,
    /// Only score these scenes (exact id, repeatable or comma separated).
    #[arg(long = "scene", value_delimiter = ',')]
    scenes: Vec<String>,
}

impl ScoringArgs {
    fn params(&self) -> StructuralParams {
        StructuralParams {
            bins: self.bins,
            tau: self.tau,
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    workers: WorkerArgs,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Also render gap heatmaps and trend scatter plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Aggregation level of the compared groups.
    #[arg(long, default_value = "scene", value_parser = ["frame", "scene", "dataset"])]
    level: String,
    /// Dataset(s) whose groups form the matrix rows.
    #[arg(long, required = true, value_delimiter = ',')]
    rows: Vec<String>,
    /// Dataset(s) whose groups form the matrix columns.
    #[arg(long, required = true, value_delimiter = ',')]
    cols: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also render the matrix as an SVG heatmap.
    #[arg(long)]
    svg: bool,
    /// Reuse a previous frame_scores.csv instead of rescoring.
    #[arg(long)]
    scores_in: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct TrendArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Structural metric on the x axis.
    #[arg(long, value_parser = ["depth_entropy", "depth_mean", "discontinuity_ratio"])]
    x: String,
    #[arg(long)]
    out: PathBuf,
    /// Also render a scatter plot with trend lines.
    #[arg(long)]
    svg: bool,
    /// Reuse a previous frame_scores.csv instead of rescoring.
    #[arg(long)]
    scores_in: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON generation spec.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// An error tagged with the exit code it maps to.
enum Failure {
    Data(anyhow::Error),
    Usage(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Score(a) => cmd_score(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Trend(a) => cmd_trend(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Data(e) | Failure::Usage(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path) -> Result<Manifest, Failure> {
    corpus::load_manifest(path)
        .with_context(|| format!("loading manifest {}", path.display()))
        .map_err(usage)
}

fn create_out(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(data)
}

fn cmd_validate(a: ValidateArgs) -> Outcome {
    let m = load(&a.manifest)?;
    let report = corpus::validate_corpus(&m, a.workers.workers).map_err(usage)?;
    for f in &report.failures {
        println!("{f}");
    }
    eprintln!(
        "{} frames checked, {} failures",
        report.frames_checked,
        report.failures.len()
    );
    if report.is_clean() {
        Ok(())
    } else {
        Err(data(anyhow!("{} validation failures", report.failures.len())))
    }
}

/// Loads, filters and scores a manifest, or restores scores from a CSV.
fn obtain_scores(
    manifest: &Manifest,
    scoring: &ScoringArgs,
    scores_in: Option<&Path>,
) -> Result<CorpusScores, Failure> {
    let m = manifest
        .filtered(&scoring.datasets, &scoring.scenes)
        .map_err(usage)?;
    match scores_in {
        Some(path) => {
            let rows = report::read_frame_scores(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            rescore::from_csv(&m, &rows, &scoring.params()).map_err(data)
        }
        None => corpus::score_corpus(&m, &scoring.params(), scoring.workers.workers).map_err(|e| match e {
            corpus::CorpusError::NoFramesScored { .. } => data(e),
            other => usage(other),
        }),
    }
}

fn manifest_hash(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    Ok(report::sha256_hex(&bytes))
}

fn scatter_series(sections: &[analysis::TrendSection]) -> Vec<ScatterSeries> {
    sections
        .iter()
        .map(|t| ScatterSeries {
            label: t.domain_tag.clone(),
            points: t.points.clone(),
            fit: t.fit,
        })
        .collect()
}

fn cmd_score(a: ScoreArgs) -> Outcome {
    let m = load(&a.manifest)?;
    let scores = obtain_scores(&m, &a.scoring, None)?;
    let gaps = analysis::default_gap_sections(&scores);
    let trends: Vec<_> = TrendMetric::ALL
        .into_iter()
        .flat_map(|metric| analysis::trend_sections(&scores, metric))
        .collect();
    let bundle = ReportBundle::new(
        &scores,
        m.models.clone(),
        &a.scoring.params(),
        manifest_hash(&a.manifest)?,
        report::now_timestamp(),
        gaps,
        trends,
    );
    create_out(&a.out)?;
    report::emit_csv(&bundle, &a.out).map_err(data)?;
    report::emit_json(&bundle, &a.out.join("run.json")).map_err(data)?;
    if a.svg {
        for g in &bundle.gaps {
            let path = a.out.join(format!("heatmap_{}.svg", report::file_stem(&g.name)));
            plot::render_heatmap(&g.matrix, &g.name, &path).map_err(data)?;
        }
        for (metric, sections) in &bundle.trends {
            let m: TrendMetric = metric.parse().map_err(|e: String| data(anyhow!(e)))?;
            let path = a.out.join(format!("scatter_{metric}.svg"));
            plot::render_scatter(&scatter_series(sections), m.label(), "MMCM", &path).map_err(data)?;
        }
    }
    for f in &bundle.failures {
        eprintln!("failed: {f}");
    }
    println!(
        "scored {} frames ({} failed) -> {}",
        bundle.meta.frames_scored,
        bundle.meta.frames_failed,
        a.out.display()
    );
    Ok(())
}

fn cmd_gap(a: GapArgs) -> Outcome {
    let m = load(&a.manifest)?;
    for id in a.rows.iter().chain(&a.cols) {
        if m.dataset(id).is_none() {
            return Err(usage(anyhow!("unknown dataset {id:?}")));
        }
    }
    let level: Level = a.level.parse().map_err(|e: String| usage(anyhow!(e)))?;
    let scores = obtain_scores(&m, &a.scoring, a.scores_in.as_deref())?;
    let section = analysis::gap_section(&scores, &a.rows, &a.cols, level).map_err(|e| match e {
        analysis::AnalysisError::UnknownDataset(_) => usage(e),
        other => data(other),
    })?;
    create_out(&a.out)?;
    let (matrix_name, ranking_name) = report::gap_file_names(&section);
    report::write_gap_matrix(&section, &a.out.join(&matrix_name)).map_err(data)?;
    report::write_ranking(&section, &a.out.join(&ranking_name)).map_err(data)?;
    if a.svg {
        let path = a.out.join(format!("heatmap_{}.svg", report::file_stem(&section.name)));
        plot::render_heatmap(&section.matrix, &section.name, &path).map_err(data)?;
    }
    for g in &section.ranking {
        println!("{}\t{}", g.group_id, report::fmt_sig6(g.mean_gap));
    }
    Ok(())
}

fn cmd_trend(a: TrendArgs) -> Outcome {
    let m = load(&a.manifest)?;
    let metric: TrendMetric = a.x.parse().map_err(|e: String| usage(anyhow!(e)))?;
    let scores = obtain_scores(&m, &a.scoring, a.scores_in.as_deref())?;
    let sections = analysis::trend_sections(&scores, metric);
    create_out(&a.out)?;
    report::write_trend(&sections, &a.out.join(report::trend_file_name(metric))).map_err(data)?;
    if a.svg {
        let path = a.out.join(format!("scatter_{metric}.svg"));
        plot::render_scatter(&scatter_series(&sections), metric.label(), "MMCM", &path).map_err(data)?;
    }
    for t in &sections {
        match (&t.fit, &t.error) {
            (Some(f), _) => println!(
                "{}: n={} excluded={} slope={} intercept={} r={}",
                t.domain_tag,
                t.points.len(),
                t.excluded,
                report::fmt_sig6(f.slope),
                report::fmt_sig6(f.intercept),
                report::fmt_sig6(f.pearson_r)
            ),
            (None, e) => println!(
                "{}: n={} excluded={} no fit: {}",
                t.domain_tag,
                t.points.len(),
                t.excluded,
                e.as_deref().unwrap_or("")
            ),
        }
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let spec = synthgen::load_spec(&a.spec).map_err(usage)?;
    let m = synthgen::generate(&spec, &a.out).map_err(|e| match e {
        synthgen::SynthError::InvalidSpec(_) | synthgen::SynthError::UnrealizableAgreement(_) => usage(e),
        other => data(other),
    })?;
    println!(
        "wrote {} frames to {} (expected mmcm {})",
        m.frame_count(),
        a.out.display(),
        spec.expected().mmcm
    );
    Ok(())
}

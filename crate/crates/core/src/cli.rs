//! The `xsum` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Parameters resolve
//! as flag, then manifest value, then built-in default.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{self, MetricsRow, Workspace};
use crate::metrics::{evaluate_with, MetricOptions};
use crate::model::{Gallery, Method, SegmentProfile, SummaryReport};
use crate::simcore::DEFAULT_GAMMA;
use crate::summarize::{summarize, SummarizeOptions, DEFAULT_K, DEFAULT_SEED};
use crate::synthgen::{generate, SynthSpec};
use crate::topics::{
    aggregate_segment_topics, build_topic_list, csv_field, heatmap_table, rank_topics, segments_in,
    DEFAULT_MIN_COUNT, DEFAULT_TOPIC_THRESHOLD, DEFAULT_TOP_N,
};

pub const THREADS_ENV: &str = "XSUM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "xsum", version, about = "Segment-personalized image gallery summarization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize one gallery for one segment with one method.
    Summarize(SummarizeArgs),
    /// Run several methods over every gallery and write a metrics CSV.
    Evaluate(EvaluateArgs),
    /// Average metrics CSVs per split.
    Compare(CompareArgs),
    /// Topic statistics from a review corpus.
    Topics(TopicsArgs),
    /// Write a synthetic workspace.
    GenSynth(GenSynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Default,
    Clustwp,
    Topic,
    Cross,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Default => Method::Default,
            MethodArg::Clustwp => Method::ClustWP,
            MethodArg::Topic => Method::TopicBased,
            MethodArg::Cross => Method::CrossSummarizer,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Workspace manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Summary size [default: 9]
    #[arg(long)]
    pub k: Option<usize>,
    /// Clustering seed [default: manifest value, else 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Log-scale of the sigmoid temperature [default: manifest value, else ln 100]
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Minimum class probability for segment relevance [default: manifest value, else 0.5]
    #[arg(long)]
    pub class_threshold: Option<f64>,
    /// Review topic detection threshold (strict) [default: manifest value, else 0.5]
    #[arg(long)]
    pub topic_threshold: Option<f64>,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    /// Average L2-normalized embeddings for representativeness.
    #[arg(long)]
    pub repr_normalized: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Segment id as listed in the manifest's profiles.
    #[arg(long)]
    pub segment: String,
    /// Gallery id; may be omitted when the workspace has a single gallery.
    #[arg(long)]
    pub gallery: Option<String>,
    /// Output path for the summary JSON [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Methods to run [default: all four]
    #[arg(long = "method", value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodArg>,
    /// Segments to evaluate [default: every profile in the manifest]
    #[arg(long = "segment", value_delimiter = ',')]
    pub segments: Vec<String>,
    /// Output metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for one summary JSON per (gallery, method, segment).
    #[arg(long)]
    pub summary_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Workspace manifest providing gallery split labels.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Metrics CSV file or directory of CSV files.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TopicsArgs {
    /// Review corpus (JSON lines).
    #[arg(long)]
    pub reviews: PathBuf,
    /// Manifest whose topic table supplies embeddings for the topic lists.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOPIC_THRESHOLD)]
    pub topic_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top_n: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    #[arg(long)]
    pub strict: bool,
    /// Heatmap CSV (segments × topics, detection rates) [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-segment counts CSV.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    /// Ranked topic list per segment (JSON).
    #[arg(long)]
    pub lists_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 48)]
    pub n_images: usize,
    #[arg(long, default_value_t = 8)]
    pub n_clusters: usize,
    #[arg(long, default_value_t = 16)]
    pub dimension: usize,
    /// Per-component Gaussian noise added to cluster directions.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 3)]
    pub aligned_topics: usize,
    #[arg(long, default_value_t = 2)]
    pub distractor_topics: usize,
    #[arg(long, default_value_t = 1)]
    pub classes_per_cluster: usize,
    #[arg(long, default_value_t = 0.5)]
    pub relevant_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gamma recorded in the manifest.
    #[arg(long, allow_hyphen_values = true, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Summarize(a) => cmd_summarize(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Topics(a) => cmd_topics(&a),
        Command::GenSynth(a) => cmd_gen_synth(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

struct Resolved {
    opts: SummarizeOptions,
    metric_opts: MetricOptions,
}

fn check_unit(name: &str, v: f64) -> std::result::Result<f64, Failure> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("--{name} must be in [0, 1], got {v}")))
    }
}

fn resolve(common: &CommonArgs, ws: &Workspace) -> std::result::Result<Resolved, Failure> {
    let k = common.k.unwrap_or(DEFAULT_K);
    if k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let m = &ws.manifest;
    let class_threshold = check_unit("class-threshold", common.class_threshold.unwrap_or(m.class_threshold))?;
    check_unit("topic-threshold", common.topic_threshold.unwrap_or(m.topic_threshold))?;
    let gamma = common.gamma.unwrap_or(m.gamma);
    if !gamma.is_finite() {
        return Err(Failure::Usage(format!("--gamma must be finite, got {gamma}")));
    }
    Ok(Resolved {
        opts: SummarizeOptions::default()
            .with_k(k)
            .with_seed(common.seed.unwrap_or(m.seed))
            .with_gamma(gamma)
            .with_class_threshold(class_threshold),
        metric_opts: MetricOptions {
            repr_normalized: common.repr_normalized,
        },
    })
}

fn load(common: &CommonArgs) -> std::result::Result<Workspace, Failure> {
    let ws = io::load_workspace(&common.manifest, false)?;
    for w in &ws.warnings {
        if common.strict {
            return Err(Failure::Data(Error::InvalidWorkspace(w.clone())));
        }
        log::warn!("{w}");
    }
    Ok(ws)
}

fn run_one(
    method: Method,
    gallery: &Gallery,
    profile: &SegmentProfile,
    r: &Resolved,
) -> Result<SummaryReport> {
    let opts = SummarizeOptions {
        // Default clusters the whole gallery and cannot exceed its size
        k: if method == Method::Default { r.opts.k.min(gallery.len()) } else { r.opts.k },
        ..r.opts
    };
    let mut report = summarize(method, gallery, profile, &opts)?;
    if opts.k < r.opts.k {
        report.params.k = r.opts.k;
        report.short_summary = true;
        report.warnings.push(crate::summarize::WARN_SHORT.to_string());
    }
    report.metrics = Some(evaluate_with(gallery, profile, &report, opts.gamma, r.metric_opts)?);
    Ok(report)
}

fn cmd_summarize(args: &SummarizeArgs) -> CmdResult {
    let ws = load(&args.common)?;
    let r = resolve(&args.common, &ws)?;
    let gallery = match &args.gallery {
        Some(id) => ws
            .galleries
            .iter()
            .find(|g| &g.gallery.gallery_id == id)
            .ok_or_else(|| Failure::Usage(format!("unknown gallery {id:?}")))?,
        None if ws.galleries.len() == 1 => &ws.galleries[0],
        None => return Err(Failure::Usage("--gallery is required for multi-gallery workspaces".into())),
    };
    let profile = ws
        .profile(&args.segment)
        .ok_or_else(|| Failure::Usage(format!("unknown segment {:?}", args.segment)))?;
    let report = run_one(args.method.into(), &gallery.gallery, profile, &r)?;
    match &args.out {
        Some(path) => io::write_summary(&report, path)?,
        None => print!("{}", io::summary_to_string(&report)),
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn summary_file_name(gallery: &str, method: Method, segment: &str) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect()
    };
    format!("{}__{}__{}.json", clean(gallery), method.name(), clean(segment))
}

fn cmd_evaluate(args: &EvaluateArgs) -> CmdResult {
    let ws = load(&args.common)?;
    let r = resolve(&args.common, &ws)?;
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        let mut m: Vec<Method> = args.methods.iter().map(|&m| m.into()).collect();
        m.sort();
        m.dedup();
        m
    };
    let profiles: Vec<&SegmentProfile> = if args.segments.is_empty() {
        ws.profiles.iter().collect()
    } else {
        args.segments
            .iter()
            .map(|s| ws.profile(s).ok_or_else(|| Failure::Usage(format!("unknown segment {s:?}"))))
            .collect::<std::result::Result<_, _>>()?
    };

    let mut jobs = Vec::new();
    for g in &ws.galleries {
        for &p in &profiles {
            for &m in &methods {
                jobs.push((&g.gallery, p, m));
            }
        }
    }

    let pool = thread_pool()?;
    let results: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, p, m)| (g, p, m, run_one(m, g, p, &r)))
            .collect()
    });

    let mut rows = Vec::new();
    for (g, p, m, res) in results {
        let report = match res {
            Ok(report) => report,
            Err(e) => {
                if args.common.strict {
                    return Err(e.into());
                }
                eprintln!("warning: skipped {} / {} / {}: {e}", g.gallery_id, m, p.segment_id);
                continue;
            }
        };
        let metrics = report.metrics.as_ref().expect("run_one attaches metrics");
        rows.push(MetricsRow {
            gallery_id: g.gallery_id.clone(),
            method: m.name().to_string(),
            segment: p.segment_id.clone(),
            k: r.opts.k,
            div: metrics.div,
            repr: metrics.repr,
            cov: metrics.cov,
            rcov: metrics.rcov,
        });
        if let Some(dir) = &args.summary_dir {
            io::write_summary(&report, &dir.join(summary_file_name(&g.gallery_id, m, &p.segment_id)))?;
        }
    }
    io::write_metrics(&rows, &args.out)?;
    Ok(())
}

#[derive(Default)]
struct Acc {
    galleries: usize,
    sums: [f64; 4],
    counts: [usize; 4],
}

impl Acc {
    fn add(&mut self, row: &MetricsRow) {
        self.galleries += 1;
        for (i, v) in [Some(row.div), row.repr, row.cov, row.rcov].into_iter().enumerate() {
            if let Some(v) = v {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    fn mean(&self, i: usize) -> String {
        if self.counts[i] == 0 {
            String::new()
        } else {
            format!("{:.6}", self.sums[i] / self.counts[i] as f64)
        }
    }
}

pub const COMPARE_HEADER: &str = "split,method,segment,k,galleries,div,repr,cov,rcov";

/// Averages metric rows per (split, method, segment, k). Undefined values
/// are left out of their column's mean.
pub fn aggregate_splits(rows: &[MetricsRow], split_of: impl Fn(&str) -> Option<String>) -> String {
    let mut groups: BTreeMap<(String, String, String, usize), Acc> = BTreeMap::new();
    for row in rows {
        let split = split_of(&row.gallery_id).unwrap_or_else(|| "unsplit".to_string());
        groups
            .entry((split, row.method.clone(), row.segment.clone(), row.k))
            .or_default()
            .add(row);
    }
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for ((split, method, segment, k), acc) in &groups {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(split),
            csv_field(method),
            csv_field(segment),
            k,
            acc.galleries,
            acc.mean(0),
            acc.mean(1),
            acc.mean(2),
            acc.mean(3)
        ));
    }
    out
}

fn csv_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| Error::io(input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        Ok(files)
    } else if input.exists() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(Error::io(input, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}

fn cmd_compare(args: &CompareArgs) -> CmdResult {
    let manifest = io::read_manifest(&args.manifest)?;
    let splits: BTreeMap<String, Option<String>> = manifest
        .galleries
        .iter()
        .map(|g| (g.gallery_id.clone(), g.split.clone()))
        .collect();
    let mut rows = Vec::new();
    for path in csv_inputs(&args.input)? {
        rows.extend(io::read_metrics(&path)?);
    }
    if rows.is_empty() {
        return Err(Failure::Data(Error::format(&args.input, "no metrics rows found")));
    }
    let table = aggregate_splits(&rows, |g| splits.get(g).cloned().flatten());
    match &args.out {
        Some(p) => io::write_atomic(p, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_topics(args: &TopicsArgs) -> CmdResult {
    check_unit("topic-threshold", args.topic_threshold)?;
    let read = io::read_reviews(&args.reviews, args.strict)?;
    for e in &read.errors {
        eprintln!("warning: {}: {e}", args.reviews.display());
    }
    let reviews = read.records;
    let stats: Vec<_> = segments_in(&reviews)
        .iter()
        .map(|s| aggregate_segment_topics(&reviews, s, args.topic_threshold))
        .collect();

    let table = heatmap_table(&stats);
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    match &args.out {
        Some(p) => io::write_atomic(p, table.to_csv().as_bytes())?,
        None => print!("{}", table.to_csv()),
    }

    if let Some(p) = &args.stats_out {
        let mut csv = String::from("segment,topic,count,review_count\n");
        for s in &stats {
            for (t, c) in &s.counts {
                csv.push_str(&format!("{},{},{c},{}\n", csv_field(&s.segment_id), csv_field(t), s.review_count));
            }
        }
        io::write_atomic(p, csv.as_bytes())?;
    }

    if let Some(p) = &args.lists_out {
        let table = match &args.manifest {
            Some(m) => Some(io::load_workspace(m, false)?.topic_table),
            None => None,
        };
        let mut lists = BTreeMap::new();
        for s in &stats {
            let ids: Vec<String> = match &table {
                Some(t) => build_topic_list(s, t, args.top_n, args.min_count)?
                    .into_iter()
                    .map(|r| r.topic_id)
                    .collect(),
                None => rank_topics(s, args.top_n, args.min_count)
                    .into_iter()
                    .map(|(t, _)| t)
                    .collect(),
            };
            lists.insert(s.segment_id.clone(), ids);
        }
        let mut text = serde_json::to_string_pretty(&lists).expect("serializable");
        text.push('\n');
        io::write_atomic(p, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_gen_synth(args: &GenSynthArgs) -> CmdResult {
    let spec = SynthSpec {
        n_images: args.n_images,
        n_clusters: args.n_clusters,
        dimension: args.dimension,
        intra_cluster_noise: args.noise,
        n_topics_aligned: args.aligned_topics,
        n_topics_distractor: args.distractor_topics,
        classes_per_cluster: args.classes_per_cluster,
        relevant_fraction: args.relevant_fraction,
        seed: args.seed,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let ws = generate(&spec)?;
    let manifest = io::write_synth_workspace(&args.out, &ws, args.gamma, DEFAULT_SEED)?;
    println!("{}", manifest.display());
    Ok(())
}

//! The `embedkit` command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 runtime or
//! numerical failure. Every command that writes a file also writes
//! `<file>.manifest.json` describing the run. Outputs are only written
//! once all work has succeeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::{
    encode_emb1, encode_sidecar, load_benchmark, load_embeddings, sidecar_path, Benchmark,
    CorpusError, EmbeddingMatrix, StsTask,
};
use crate::pipeline::{
    evaluate_reduced, export_visualization, fit_rows, gold_bin_labels, run_baseline, run_sweep,
    stratified_subsample, PipelineError, SweepConfig,
};
use crate::reducers::{
    load_reducer, save_reducer, FittedReducer, Kernel, ReducerError, ReducerSpec, Technique,
    VarSelector,
};
use crate::stats::{aggregate_mean_std, paired_t_test, reduction_percentage, EvalReport};

pub const SEED_ENV: &str = "EMBEDKIT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "embedkit",
    version,
    about = "Reduce sentence embeddings and score them on STS tasks"
)]
pub struct Cli {
    /// Default seed (else $EMBEDKIT_SEED, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check EMB1 files, task TSVs and benchmark directories.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Draw a language-balanced pair subsample from a training benchmark.
    Subsample {
        #[arg(long)]
        train: PathBuf,
        /// Pairs per language.
        #[arg(long)]
        cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a scaler + reducer and write an RDX1 archive.
    Fit(FitArgs),
    /// Apply a fitted reducer to an EMB1 file.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a test benchmark, optionally through a fitted reducer.
    Eval {
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `task \t r_s` lines here.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Run a technique × dimension sweep from a TOML config.
    Sweep(SweepArgs),
    /// Statistics over report values.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Export 2-D / 3-D coordinates for plotting.
    Viz {
        #[arg(long)]
        model: PathBuf,
        /// Test benchmark; its rows are labelled by language and gold bin.
        #[arg(long, conflicts_with = "input")]
        test: Option<PathBuf>,
        /// Matrix of the test benchmark to export (default: all).
        #[arg(long, requires = "test")]
        matrix: Option<String>,
        /// A single EMB1 file instead of a benchmark (no labels).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    technique: Technique,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kernel: Option<Kernel>,
    /// Variance threshold: min, decile1..decile9 or max.
    #[arg(long)]
    selector: Option<VarSelector>,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    min_dist: Option<f64>,
    #[arg(long)]
    n_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Training benchmark directory or a single EMB1 file.
    #[arg(long)]
    train: PathBuf,
    /// Row budget for the subsampled techniques.
    #[arg(long)]
    fit_budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Directory for sweep.json, sweep.tsv and retention.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the config grid, e.g. `10,20,40`.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    fit_budget: Option<usize>,
    #[arg(long)]
    baseline: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum StatsCmd {
    /// Two-tailed paired t-test between two value files.
    Ttest { a: PathBuf, b: PathBuf },
    /// Mean and population standard deviation.
    MeanStd {
        /// Value file (see `ttest`); omit to use --values.
        #[arg(required_unless_present = "values")]
        file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// `100·(1 − k/d)` for each k; with several, their mean ± std too.
    Reduction {
        /// One d, or one per k.
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

/// Parameter problems surface as usage errors, everything else as runtime.
fn reducer_error(context: &str, e: ReducerError) -> CliError {
    match e {
        ReducerError::KTooLarge { .. }
        | ReducerError::ZeroK
        | ReducerError::BatchTooSmall { .. }
        | ReducerError::MissingParameter(_)
        | ReducerError::InvalidParameter(_)
        | ReducerError::NeighborCountTooLarge { .. } => CliError::Usage(format!("{context}: {e}")),
        e => CliError::Runtime(format!("{context}: {e}")),
    }
}

fn pipeline_error(context: &str, e: PipelineError) -> CliError {
    match e {
        PipelineError::Reducer(r) => reducer_error(context, r),
        PipelineError::InvalidConfig(_)
        | PipelineError::WrongK(_)
        | PipelineError::CapInfeasible { .. } => CliError::Usage(format!("{context}: {e}")),
        PipelineError::Corpus(c) => CliError::Validation(format!("{context}: {c}")),
        e => CliError::Runtime(format!("{context}: {e}")),
    }
}

fn corpus_error(context: &Path, e: CorpusError) -> CliError {
    CliError::Validation(format!("{}: {e}", context.display()))
}

/// Stable name of a corpus error variant, used in validation findings.
pub fn corpus_error_kind(e: &CorpusError) -> &'static str {
    match e {
        CorpusError::Io { .. } => "Io",
        CorpusError::BadMagic => "BadMagic",
        CorpusError::UnsupportedFormat { .. } => "UnsupportedFormat",
        CorpusError::TruncatedPayload { .. } => "TruncatedPayload",
        CorpusError::NonFiniteValue { .. } => "NonFiniteValue",
        CorpusError::DuplicateId(_) => "DuplicateId",
        CorpusError::ZeroDim => "ZeroDim",
        CorpusError::ShapeMismatch { .. } => "ShapeMismatch",
        CorpusError::BadSidecar { .. } => "BadSidecar",
        CorpusError::MissingSide { .. } => "MissingSide",
        CorpusError::UnresolvedId { .. } => "UnresolvedId",
        CorpusError::ScoreOutOfRange { .. } => "ScoreOutOfRange",
        CorpusError::MalformedLine { .. } => "MalformedLine",
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn sha256_file(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| hex::encode(Sha256::digest(&b)))
}

/// Content digests of the inputs: files, their sidecars, and every file of
/// a directory (non-recursive).
fn digests(paths: &[&Path]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .into_iter()
                .flatten()
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.is_file())
                .collect();
            entries.sort();
            for e in entries {
                if let Some(d) = sha256_file(&e) {
                    out.insert(e.display().to_string(), d);
                }
            }
        } else {
            for f in [p.to_path_buf(), sidecar_path(p)] {
                if let Some(d) = sha256_file(&f) {
                    out.insert(f.display().to_string(), d);
                }
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    args: Vec<String>,
    config: Option<String>,
    inputs: BTreeMap<String, String>,
    seed: u64,
    toolkit_version: &'static str,
    timestamp: u64,
}

fn manifest_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{name}.manifest.json"))
}

/// Output files are staged and only land once the command succeeded.
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    fn commit(self, manifest: &RunManifest, primary: &Path) -> Result<(), CliError> {
        let mut files = self.files;
        files.push((
            manifest_path(primary),
            serde_json::to_vec_pretty(manifest).expect("manifest serializes"),
        ));
        for (path, bytes) in files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
            }
            let mut tmp = path.clone().into_os_string();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, &bytes)
                .and_then(|_| fs::rename(&tmp, &path))
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    args: Vec<String>,
    seed: u64,
}

impl Ctx<'_> {
    fn manifest(&self, command: &str, config: Option<&Path>, inputs: &[&Path]) -> RunManifest {
        RunManifest {
            command: command.into(),
            args: self.args.clone(),
            config: config.map(|c| c.display().to_string()),
            inputs: digests(inputs),
            seed: self.seed,
            toolkit_version: env!("CARGO_PKG_VERSION"),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn println(&mut self, line: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{line}");
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let seed = match resolve_seed(cli.seed) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            return e.code();
        }
    };
    let mut ctx = Ctx {
        out,
        args: args
            .iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect(),
        seed,
    };
    let result = match cli.command {
        Command::Validate { paths } => cmd_validate(&mut ctx, &paths),
        Command::Subsample { train, cap, out } => cmd_subsample(&mut ctx, &train, cap, &out),
        Command::Fit(a) => cmd_fit(&mut ctx, a),
        Command::Transform { model, input, out } => cmd_transform(&mut ctx, &model, &input, &out),
        Command::Eval {
            test,
            model,
            out,
            tsv,
        } => cmd_eval(&mut ctx, &test, model.as_deref(), &out, tsv.as_deref()),
        Command::Sweep(a) => cmd_sweep(&mut ctx, a, cli.seed),
        Command::Stats(s) => cmd_stats(&mut ctx, s),
        Command::Viz {
            model,
            test,
            matrix,
            input,
            out,
        } => cmd_viz(
            &mut ctx,
            &model,
            test.as_deref(),
            matrix.as_deref(),
            input.as_deref(),
            &out,
        ),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn finding(path: &Path, error: Option<&CorpusError>) -> Value {
    match error {
        None => json!({"path": path.display().to_string(), "ok": true}),
        Some(e) => json!({
            "path": path.display().to_string(),
            "ok": false,
            "error": corpus_error_kind(e),
            "detail": e.to_string(),
        }),
    }
}

fn validate_path(p: &Path) -> Vec<Value> {
    if p.is_dir() {
        let mut findings = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(p)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        let mut files_ok = true;
        for e in entries
            .iter()
            .filter(|e| e.extension().is_some_and(|x| x == "emb" || x == "tsv"))
        {
            let f = validate_path(e);
            files_ok &= f.iter().all(|v| v["ok"] == true);
            findings.extend(f);
        }
        if files_ok {
            findings.push(finding(p, load_benchmark(p).err().as_ref()));
        }
        findings
    } else if p.extension().is_some_and(|x| x == "tsv") {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let r = fs::read_to_string(p)
            .map_err(|source| CorpusError::Io {
                path: p.to_path_buf(),
                source,
            })
            .and_then(|text| StsTask::parse_tsv(&stem, &text));
        vec![finding(p, r.err().as_ref())]
    } else {
        vec![finding(p, load_embeddings(p).err().as_ref())]
    }
}

fn cmd_validate(ctx: &mut Ctx, paths: &[PathBuf]) -> Result<(), CliError> {
    let mut failed = 0;
    for p in paths {
        for f in validate_path(p) {
            if f["ok"] != true {
                failed += 1;
            }
            ctx.println(f);
        }
    }
    if failed > 0 {
        Err(CliError::Validation(format!("{failed} finding(s)")))
    } else {
        Ok(())
    }
}

fn load_bench(path: &Path) -> Result<Benchmark, CliError> {
    load_benchmark(path).map_err(|e| corpus_error(path, e))
}

fn cmd_subsample(ctx: &mut Ctx, train: &Path, cap: usize, out: &Path) -> Result<(), CliError> {
    let b = load_bench(train)?;
    let s = stratified_subsample(&b, cap, ctx.seed).map_err(|e| pipeline_error("subsample", e))?;
    let mut tsv = String::new();
    for task in b.tasks() {
        for &i in &s.per_language[&task.task_id] {
            let p = &task.pairs[i];
            tsv.push_str(&format!("{}\t{i}\t{}\t{}\n", task.task_id, p.left, p.right));
        }
    }
    let mut o = Outputs::new();
    o.add(out, tsv);
    o.commit(&ctx.manifest("subsample", None, &[train]), out)?;
    ctx.println(format!(
        "{} pairs ({} per language) -> {}",
        s.len(),
        cap,
        out.display()
    ));
    Ok(())
}

fn spec_from_flags(a: &FitArgs, seed: u64) -> Result<ReducerSpec, CliError> {
    let need_k = || {
        a.k.ok_or_else(|| CliError::Usage(format!("--k is required for {}", a.technique)))
    };
    let mut spec = match a.technique {
        Technique::Ipca => ReducerSpec::ipca(need_k()?),
        Technique::Ica => ReducerSpec::ica(need_k()?),
        Technique::Kpca => ReducerSpec::kpca(
            need_k()?,
            a.kernel.ok_or_else(|| {
                CliError::Usage("--kernel is required for kpca (poly, rbf, sigmoid, cosine)".into())
            })?,
        ),
        Technique::VarThresh => ReducerSpec::varthresh(a.selector.ok_or_else(|| {
            CliError::Usage("--selector is required for varthresh (min, decile1..9, max)".into())
        })?),
        Technique::Umap => ReducerSpec::umap(need_k()?, a.n_neighbors.unwrap_or(15)),
    };
    if a.technique != Technique::Kpca && a.kernel.is_some() {
        return Err(CliError::Usage("--kernel only applies to kpca".into()));
    }
    if let Some(v) = a.min_dist {
        spec.min_dist = v;
    }
    if let Some(v) = a.n_epochs {
        spec.n_epochs = v;
    }
    if let Some(v) = a.max_iter {
        spec.max_iter = v;
    }
    if let Some(v) = a.tol {
        spec.tol = v;
    }
    spec.batch_size = a.batch_size;
    spec.seed = seed;
    Ok(spec)
}

fn load_fit_rows(a: &FitArgs, seed: u64) -> Result<EmbeddingMatrix, CliError> {
    if a.train.is_dir() {
        let b = load_bench(&a.train)?;
        fit_rows(&b, a.technique, a.fit_budget, seed).map_err(|e| pipeline_error("fit rows", e))
    } else {
        load_embeddings(&a.train).map_err(|e| corpus_error(&a.train, e))
    }
}

fn cmd_fit(ctx: &mut Ctx, a: FitArgs) -> Result<(), CliError> {
    let spec = spec_from_flags(&a, ctx.seed)?;
    let rows = load_fit_rows(&a, ctx.seed)?;
    spec.validate(rows.dim())
        .map_err(|e| reducer_error("fit", e))?;
    let r = FittedReducer::fit(&spec, &rows).map_err(|e| reducer_error("fit", e))?;
    let mut o = Outputs::new();
    o.add(&a.out, save_reducer(&r));
    o.commit(&ctx.manifest("fit", None, &[&a.train]), &a.out)?;
    ctx.println(format!(
        "{} fitted on {} rows: {} -> {} dims -> {}",
        spec.label(),
        rows.n_rows(),
        r.input_dim(),
        r.output_dim(),
        a.out.display()
    ));
    Ok(())
}

fn load_model(path: &Path) -> Result<FittedReducer, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    load_reducer(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn cmd_transform(ctx: &mut Ctx, model: &Path, input: &Path, out: &Path) -> Result<(), CliError> {
    let r = load_model(model)?;
    let m = load_embeddings(input).map_err(|e| corpus_error(input, e))?;
    let mut y = r.transform(&m).map_err(|e| reducer_error("transform", e))?;
    y.set_meta("reducer", Value::String(r.spec.label()));
    let mut o = Outputs::new();
    o.add(out, encode_emb1(&y));
    o.add(sidecar_path(out), encode_sidecar(&y));
    o.commit(&ctx.manifest("transform", None, &[model, input]), out)?;
    ctx.println(format!(
        "{} rows, {} -> {} dims -> {}",
        y.n_rows(),
        m.dim(),
        y.dim(),
        out.display()
    ));
    Ok(())
}

fn cmd_eval(
    ctx: &mut Ctx,
    test: &Path,
    model: Option<&Path>,
    out: &Path,
    tsv: Option<&Path>,
) -> Result<(), CliError> {
    let b = load_bench(test)?;
    let report = match model {
        Some(m) => {
            let r = load_model(m)?;
            evaluate_reduced(&r, &b).map_err(|e| pipeline_error("eval", e))?
        }
        None => run_baseline(&b).map_err(|e| pipeline_error("eval", e))?,
    };
    let mut o = Outputs::new();
    o.add(out, report.to_json());
    if let Some(t) = tsv {
        o.add(t, report.to_tsv());
    }
    let mut inputs = vec![test];
    inputs.extend(model);
    o.commit(&ctx.manifest("eval", None, &inputs), out)?;
    ctx.println(format!(
        "{} k={} avg_r={:.4} over {} tasks",
        report.technique,
        report.k,
        report.aggregate.avg_r,
        report.per_task.len()
    ));
    Ok(())
}

fn cmd_sweep(ctx: &mut Ctx, a: SweepArgs, seed_flag: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    let mut cfg = SweepConfig::from_toml(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    if let Some(f) = a.fit_budget {
        cfg.fit_budget = f;
    }
    if a.baseline.is_some() {
        cfg.baseline = a.baseline;
    }
    // flag > config > environment
    if let Some(s) = seed_flag {
        cfg.seed = s;
    } else if !text.lines().any(|l| l.trim_start().starts_with("seed")) {
        cfg.seed = ctx.seed;
    }
    ctx.seed = cfg.seed;
    let train = load_bench(&a.train)?;
    let test = load_bench(&a.test)?;
    if let Some(d) = test.dim() {
        cfg.validate(d).map_err(|e| pipeline_error("config", e))?;
    }
    let table = run_sweep(&cfg, &train, &test, a.jobs).map_err(|e| pipeline_error("sweep", e))?;
    let json_path = a.out_dir.join("sweep.json");
    let mut o = Outputs::new();
    o.add(&json_path, table.to_json());
    o.add(a.out_dir.join("sweep.tsv"), table.to_tsv());
    o.add(a.out_dir.join("retention.tsv"), table.retention_tsv());
    o.commit(
        &ctx.manifest("sweep", Some(&a.config), &[&a.config, &a.train, &a.test]),
        &json_path,
    )?;
    let failed = table.entries.iter().filter(|c| c.error.is_some()).count();
    ctx.println(format!(
        "{} cells ({} failed), {} retention rows -> {}",
        table.entries.len(),
        failed,
        table.retention.len(),
        a.out_dir.display()
    ));
    Ok(())
}

/// Labelled values from a JSON or TSV file. Accepted shapes: an array of
/// numbers, an object `name → number`, one report (its per-task scores), an
/// array of reports (their `avg_r`, keyed by technique and k), or TSV lines
/// `name \t value`.
fn read_values(path: &Path) -> Result<Vec<(Option<String>, f64)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    if path.extension().is_some_and(|e| e == "tsv") {
        return text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (name, v) = l
                    .rsplit_once('\t')
                    .ok_or_else(|| bad(format!("expected name\\tvalue, got {l:?}")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("not a number: {v:?}")))?;
                Ok((Some(name.to_string()), v))
            })
            .collect();
    }
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if let Ok(r) = serde_json::from_value::<EvalReport>(value.clone()) {
        return Ok(r.per_task.into_iter().map(|(k, v)| (Some(k), v)).collect());
    }
    if let Ok(rs) = serde_json::from_value::<Vec<EvalReport>>(value.clone()) {
        return Ok(rs
            .into_iter()
            .map(|r| (Some(format!("{}:{}", r.technique, r.k)), r.aggregate.avg_r))
            .collect());
    }
    if let Ok(v) = serde_json::from_value::<Vec<f64>>(value.clone()) {
        return Ok(v.into_iter().map(|x| (None, x)).collect());
    }
    if let Ok(m) = serde_json::from_value::<BTreeMap<String, f64>>(value) {
        return Ok(m.into_iter().map(|(k, v)| (Some(k), v)).collect());
    }
    Err(bad(
        "expected numbers, a name → number object, or report(s)".into(),
    ))
}

/// Pairs two value lists by name when both are named, else by position.
fn pair_values(
    a: Vec<(Option<String>, f64)>,
    b: Vec<(Option<String>, f64)>,
) -> Result<(Vec<String>, Vec<f64>, Vec<f64>), CliError> {
    let named = a.iter().chain(&b).all(|(n, _)| n.is_some());
    if named && !a.iter().zip(&b).all(|(x, y)| x.0 == y.0) {
        let bm: BTreeMap<String, f64> = b.into_iter().map(|(n, v)| (n.unwrap(), v)).collect();
        let mut names = Vec::new();
        let (mut xa, mut xb) = (Vec::new(), Vec::new());
        for (n, v) in a {
            let n = n.unwrap();
            let w = *bm
                .get(&n)
                .ok_or_else(|| CliError::Usage(format!("{n:?} missing from the second file")))?;
            names.push(n);
            xa.push(v);
            xb.push(w);
        }
        if names.len() != bm.len() {
            return Err(CliError::Usage("the two files name different items".into()));
        }
        return Ok((names, xa, xb));
    }
    if a.len() != b.len() {
        return Err(CliError::Usage(format!(
            "{} values vs {}",
            a.len(),
            b.len()
        )));
    }
    let names = (0..a.len())
        .map(|i| a[i].0.clone().unwrap_or_else(|| i.to_string()))
        .collect();
    Ok((
        names,
        a.into_iter().map(|x| x.1).collect(),
        b.into_iter().map(|x| x.1).collect(),
    ))
}

fn cmd_stats(ctx: &mut Ctx, cmd: StatsCmd) -> Result<(), CliError> {
    match cmd {
        StatsCmd::Ttest { a, b } => {
            let (names, xa, xb) = pair_values(read_values(&a)?, read_values(&b)?)?;
            let t =
                paired_t_test(&xa, &xb).map_err(|e| CliError::Runtime(format!("ttest: {e}")))?;
            ctx.println(
                json!({"n": names.len(), "t": t.t, "df": t.df, "p": t.p, "mean_diff": t.mean_diff, "items": names}),
            );
            ctx.println(format!("t = {:.4}, df = {}, p = {:.3}", t.t, t.df, t.p));
        }
        StatsCmd::MeanStd { file, values } => {
            let v: Vec<f64> = match (file, values) {
                (Some(f), _) => read_values(&f)?.into_iter().map(|x| x.1).collect(),
                (None, Some(v)) => v,
                (None, None) => unreachable!("clap requires one"),
            };
            let (mean, std) = aggregate_mean_std(&v).map_err(|e| CliError::Usage(e.to_string()))?;
            ctx.println(json!({"n": v.len(), "mean": mean, "std": std}));
            ctx.println(format!("{mean:.2} ± {std:.2}"));
        }
        StatsCmd::Reduction { d, k } => {
            if d.len() != 1 && d.len() != k.len() {
                return Err(CliError::Usage(format!(
                    "{} d values for {} k values",
                    d.len(),
                    k.len()
                )));
            }
            let mut pcts = Vec::with_capacity(k.len());
            for (i, &ki) in k.iter().enumerate() {
                let di = if d.len() == 1 { d[0] } else { d[i] };
                let p = reduction_percentage(di, ki).map_err(|e| CliError::Usage(e.to_string()))?;
                ctx.println(format!("{ki}/{di}\t{p}\t{}%", p.round()));
                pcts.push(p);
            }
            if pcts.len() > 1 {
                let (m, s) =
                    aggregate_mean_std(&pcts).map_err(|e| CliError::Usage(e.to_string()))?;
                ctx.println(format!("mean ± std: {m:.2} ± {s:.2}"));
            }
        }
    }
    Ok(())
}

fn cmd_viz(
    ctx: &mut Ctx,
    model: &Path,
    test: Option<&Path>,
    matrix: Option<&str>,
    input: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let r = load_model(model)?;
    if !(2..=3).contains(&r.output_dim()) {
        return Err(CliError::Usage(format!(
            "visualization needs k = 2 or 3, model has {}",
            r.output_dim()
        )));
    }
    let mut tsv = String::new();
    let mut inputs = vec![model];
    match (test, input) {
        (Some(t), _) => {
            let b = load_bench(t)?;
            inputs.push(t);
            let names: Vec<String> = match matrix {
                Some(n) if b.matrix(n).is_some() => vec![n.to_string()],
                Some(n) => {
                    return Err(CliError::Usage(format!(
                        "no matrix {n:?} in {}",
                        t.display()
                    )))
                }
                None => b.matrices().keys().cloned().collect(),
            };
            for n in &names {
                let labels = gold_bin_labels(&b, n);
                tsv.push_str(
                    &export_visualization(&r, &b.matrices()[n], &labels)
                        .map_err(|e| pipeline_error("viz", e))?,
                );
            }
            let report = evaluate_reduced(&r, &b).map_err(|e| pipeline_error("viz", e))?;
            ctx.println(format!(
                "avg_r ({}D) = {:.4}",
                r.output_dim(),
                report.aggregate.avg_r
            ));
        }
        (None, Some(i)) => {
            let m = load_embeddings(i).map_err(|e| corpus_error(i, e))?;
            inputs.push(i);
            tsv = export_visualization(&r, &m, &[]).map_err(|e| pipeline_error("viz", e))?;
        }
        (None, None) => return Err(CliError::Usage("viz needs --test or --input".into())),
    }
    let rows = tsv.lines().count();
    let mut o = Outputs::new();
    o.add(out, tsv);
    o.commit(&ctx.manifest("viz", None, &inputs), out)?;
    ctx.println(format!("{rows} rows -> {}", out.display()));
    Ok(())
}

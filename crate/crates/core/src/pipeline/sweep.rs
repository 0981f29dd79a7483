//! Technique × dimension sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_reduced, run_baseline, stratified_subsample, PipelineError};
use crate::corpus::{encode_emb1, Benchmark, EmbeddingMatrix};
use crate::preprocess::{fit_scaler, scaler_for, FittedScaler};
use crate::reducers::{FittedReducer, ReducerSpec, Technique, VarSelector};
use crate::stats::{retention_analysis, EvalReport, RetentionRow, DEFAULT_RETENTION_FLOOR};

/// Rows used to fit the subsampled techniques (10,000 pairs).
pub const DEFAULT_FIT_BUDGET: usize = 20_000;

fn default_fit_budget() -> usize {
    DEFAULT_FIT_BUDGET
}

fn default_floor() -> u32 {
    DEFAULT_RETENTION_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Technique templates; `k` is filled from `grid`. A variance-threshold
    /// template without a selector expands to all eleven candidates.
    #[serde(default)]
    pub techniques: Vec<ReducerSpec>,
    #[serde(default)]
    pub grid: Vec<usize>,
    /// Maximum rows for kernel PCA / UMAP fitting.
    #[serde(default = "default_fit_budget")]
    pub fit_budget: usize,
    /// Seeds the subsampler and every reducer.
    #[serde(default)]
    pub seed: u64,
    /// Reference `avg_r` for retention analysis; computed from the
    /// unreduced test set when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(default = "default_floor")]
    pub retention_floor: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            techniques: Vec::new(),
            grid: Vec::new(),
            fit_budget: DEFAULT_FIT_BUDGET,
            seed: 0,
            baseline: None,
            retention_floor: DEFAULT_RETENTION_FLOOR,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self, d: usize) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if let Some(&k) = self.grid.iter().find(|&&k| k == 0 || k > d) {
            return bad(format!("grid value {k} outside 1..={d}"));
        }
        let max_k = self.grid.iter().copied().max().unwrap_or(0);
        if self.fit_budget <= max_k {
            return bad(format!(
                "fit_budget {} must exceed the largest grid value {max_k}",
                self.fit_budget
            ));
        }
        for t in &self.techniques {
            let probe = t.clone().with_k(t.k.max(1));
            let probe = match (probe.technique, probe.selector) {
                (Technique::VarThresh, None) => ReducerSpec::varthresh(VarSelector::MIN),
                _ => probe,
            };
            probe.validate(d.max(probe.k)).map_err(|e| {
                PipelineError::InvalidConfig(format!("technique {}: {e}", t.label()))
            })?;
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(usize, ReducerSpec)> {
        let mut out = Vec::new();
        if self.grid.is_empty() {
            return out;
        }
        for (ti, t) in self.techniques.iter().enumerate() {
            let base = t.clone().with_seed(self.seed);
            match (t.technique, t.selector) {
                (Technique::VarThresh, None) => {
                    for s in VarSelector::all() {
                        out.push((
                            ti,
                            ReducerSpec {
                                selector: Some(s),
                                ..base.clone()
                            },
                        ));
                    }
                }
                (Technique::VarThresh, Some(_)) => out.push((ti, base)),
                _ => {
                    for &k in &self.grid {
                        out.push((ti, base.clone().with_k(k)));
                    }
                }
            }
        }
        out
    }
}

/// Which training rows a technique is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitRows {
    /// Every training sentence.
    Full,
    /// A language-balanced pair subsample within the fit budget.
    Subsample,
}

impl FitRows {
    pub fn for_technique(t: Technique) -> Self {
        match t {
            Technique::Ipca | Technique::Ica | Technique::VarThresh => FitRows::Full,
            Technique::Kpca | Technique::Umap => FitRows::Subsample,
        }
    }
}

/// Builds the fitting matrix for `technique`: all train matrices stacked
/// (ids prefixed with the matrix name), or both sides of a stratified
/// subsample whose per-language cap is `budget / (2·languages)`.
pub fn fit_rows(
    train: &Benchmark,
    technique: Technique,
    budget: Option<usize>,
    seed: u64,
) -> Result<EmbeddingMatrix, PipelineError> {
    let dim = train
        .dim()
        .ok_or_else(|| PipelineError::InvalidConfig("empty training benchmark".into()))?;
    match FitRows::for_technique(technique) {
        FitRows::Full => {
            let mut ids = Vec::new();
            let mut values = Vec::new();
            for (name, m) in train.matrices() {
                ids.extend(m.ids().iter().map(|id| format!("{name}:{id}")));
                values.extend_from_slice(m.values());
            }
            Ok(EmbeddingMatrix::new(ids, dim, values)?)
        }
        FitRows::Subsample => {
            let counts = train.counts();
            let languages = counts.len();
            let budget = budget.unwrap_or(DEFAULT_FIT_BUDGET);
            let smallest = counts.iter().map(|c| c.1).min().unwrap_or(0);
            let mut cap = budget / (2 * languages);
            if cap > smallest {
                log::warn!(
                    "fit budget allows {cap} pairs per language but only {smallest} exist; using {smallest}"
                );
                cap = smallest;
            }
            if cap == 0 {
                return Err(PipelineError::CapInfeasible {
                    cap,
                    detail: format!("fit budget {budget} is too small for {languages} languages"),
                });
            }
            stratified_subsample(train, cap, seed)?.rows(train)
        }
    }
}

/// One (technique, k) cell: a report or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// Technique group (`ipca`, `kpca-rbf`, `umap-n10`, `varthresh`, …).
    pub technique: String,
    pub spec: ReducerSpec,
    /// Output dimension when the cell succeeded, else the requested `k`.
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    /// `train/<matrix>.emb`, `test/<task>.tsv`, … → content SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub toolkit_version: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Provenance {
    pub fn new(cfg: &SweepConfig, train: &Benchmark, test: &Benchmark) -> Self {
        let mut inputs = BTreeMap::new();
        for (split, b) in [("train", train), ("test", test)] {
            for (name, m) in b.matrices() {
                inputs.insert(format!("{split}/{name}.emb"), sha256_hex(&encode_emb1(m)));
            }
            for t in b.tasks() {
                inputs.insert(
                    format!("{split}/{}.tsv", t.task_id),
                    sha256_hex(t.to_tsv().as_bytes()),
                );
            }
        }
        Self {
            config_sha256: sha256_hex(&serde_json::to_vec(cfg).expect("config serializes")),
            inputs,
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<EvalReport>,
    pub entries: Vec<SweepCell>,
    pub retention: Vec<RetentionRow>,
    pub provenance: Provenance,
}

fn group_label(spec: &ReducerSpec) -> String {
    match spec.technique {
        Technique::VarThresh => "varthresh".into(),
        _ => spec.label(),
    }
}

impl SweepTable {
    /// `k → avg_r` for one technique group, from successful cells only.
    pub fn curve(&self, technique: &str) -> BTreeMap<usize, f64> {
        let mut curve = BTreeMap::new();
        for c in self.entries.iter().filter(|c| c.technique == technique) {
            if let Some(r) = &c.report {
                let e = curve.entry(r.k).or_insert(f64::NEG_INFINITY);
                *e = f64::max(*e, r.aggregate.avg_r);
            }
        }
        curve
    }

    /// Technique groups in first-appearance order.
    pub fn techniques(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.entries {
            if !out.contains(&c.technique) {
                out.push(c.technique.clone());
            }
        }
        out
    }

    /// Recomputes retention rows from the entries.
    pub fn compute_retention(&self, baseline: f64, d: usize) -> Vec<RetentionRow> {
        let mut rows = Vec::new();
        for t in self.techniques() {
            let curve = self.curve(&t);
            let grid: Vec<usize> = curve.keys().copied().collect();
            if grid.is_empty() {
                continue;
            }
            match retention_analysis(&t, d, baseline, &curve, &grid, self.config.retention_floor) {
                Ok(r) => rows.push(r),
                Err(e) => log::warn!("retention for {t}: {e}"),
            }
        }
        rows
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One line per cell: `technique  spec  dims (% reduction)  avg_r  error`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("technique\tconfig\tdimensions\tavg_r\terror\n");
        for c in &self.entries {
            match &c.report {
                Some(r) => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{} ({:.0}%)\t{:.4}\t",
                        c.technique,
                        c.spec.label(),
                        r.k,
                        r.reduction_pct,
                        r.aggregate.avg_r
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t\t{}",
                        c.technique,
                        c.spec.label(),
                        c.k,
                        c.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ")
                    );
                }
            }
        }
        out
    }

    /// `technique  threshold  dims (% reduction)  avg_r`.
    pub fn retention_tsv(&self) -> String {
        let mut out = String::from("technique\tthreshold_retained\tdimensions\tavg_r\n");
        for r in &self.retention {
            let _ = writeln!(
                out,
                "{}\t{}%\t{} ({:.0}%)\t{:.4}",
                r.technique, r.threshold_retained, r.dims, r.reduction_pct, r.score
            );
        }
        out
    }
}

struct Prepared {
    scaled: EmbeddingMatrix,
    scaler: FittedScaler,
}

fn prepare(
    cfg: &SweepConfig,
    train: &Benchmark,
    t: &ReducerSpec,
) -> Result<Prepared, PipelineError> {
    let rows = fit_rows(train, t.technique, Some(cfg.fit_budget), cfg.seed)?;
    log::info!("{}: fitting on {} rows", group_label(t), rows.n_rows());
    let scaler =
        fit_scaler(scaler_for(t.technique), &rows).map_err(crate::reducers::ReducerError::from)?;
    let scaled = scaler
        .apply(&rows)
        .map_err(crate::reducers::ReducerError::from)?;
    Ok(Prepared { scaled, scaler })
}

fn run_cell(
    prepared: &Result<Prepared, String>,
    spec: &ReducerSpec,
    test: &Benchmark,
) -> Result<EvalReport, String> {
    let p = prepared.as_ref().map_err(Clone::clone)?;
    let mut r = FittedReducer::fit_scaled(spec, &p.scaled).map_err(|e| e.to_string())?;
    r.scaler = p.scaler.clone();
    evaluate_reduced(&r, test).map_err(|e| e.to_string())
}

/// Fits and evaluates every (technique, k) cell. Cells run in parallel on
/// `jobs` threads (0 = all cores) and merge in configuration order, so the
/// table is identical for any `jobs`.
pub fn run_sweep(
    cfg: &SweepConfig,
    train: &Benchmark,
    test: &Benchmark,
    jobs: usize,
) -> Result<SweepTable, PipelineError> {
    let d = test
        .dim()
        .ok_or_else(|| PipelineError::InvalidConfig("empty test benchmark".into()))?;
    let dt = train
        .dim()
        .ok_or_else(|| PipelineError::InvalidConfig("empty training benchmark".into()))?;
    if d != dt {
        return Err(PipelineError::DimMismatch { train: dt, test: d });
    }
    cfg.validate(d)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        let cells = cfg.cells();
        let used: Vec<usize> = {
            let mut u: Vec<usize> = cells.iter().map(|c| c.0).collect();
            u.dedup();
            u
        };
        let prepared: BTreeMap<usize, Result<Prepared, String>> = used
            .par_iter()
            .map(|&ti| {
                (
                    ti,
                    prepare(cfg, train, &cfg.techniques[ti]).map_err(|e| e.to_string()),
                )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        let entries: Vec<SweepCell> = cells
            .par_iter()
            .map(|(ti, spec)| {
                let result = run_cell(&prepared[ti], spec, test);
                let technique = group_label(spec);
                match &result {
                    Ok(r) => {
                        log::info!("{} k={} avg_r={:.4}", spec.label(), r.k, r.aggregate.avg_r)
                    }
                    Err(e) => log::warn!("{} k={}: {e}", spec.label(), spec.k),
                }
                match result {
                    Ok(report) => SweepCell {
                        technique,
                        spec: spec.clone(),
                        k: report.k,
                        report: Some(report),
                        error: None,
                    },
                    Err(e) => SweepCell {
                        technique,
                        spec: spec.clone(),
                        k: spec.k,
                        report: None,
                        error: Some(e),
                    },
                }
            })
            .collect();
        let baseline_report = if cfg.baseline.is_none() && !entries.is_empty() {
            Some(run_baseline(test)?)
        } else {
            None
        };
        let baseline = cfg
            .baseline
            .or(baseline_report.as_ref().map(|r| r.aggregate.avg_r));
        let mut table = SweepTable {
            config: cfg.clone(),
            baseline: baseline_report,
            entries,
            retention: Vec::new(),
            provenance: Provenance::new(cfg, train, test),
        };
        if let Some(b) = baseline {
            table.retention = table.compute_retention(b, d);
        }
        Ok(table)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synthetic::{latent_corpus, SyntheticOptions};
    use crate::reducers::Kernel;

    fn corpus() -> crate::pipeline::synthetic::SyntheticCorpus {
        latent_corpus(&SyntheticOptions {
            languages: 2,
            train_pairs: 80,
            test_pairs: 40,
            dim: 12,
            latent_dim: 4,
            ..SyntheticOptions::default()
        })
        .unwrap()
    }

    #[test]
    fn config_toml_round_trip() {
        let text = r#"
            grid = [2, 4]
            seed = 3
            fit_budget = 100

            [[techniques]]
            technique = "ipca"

            [[techniques]]
            technique = "kpca"
            kernel = "rbf"
        "#;
        let cfg = SweepConfig::from_toml(text).unwrap();
        assert_eq!(cfg.techniques[1].kernel, Some(Kernel::Rbf));
        assert_eq!(cfg.retention_floor, 5);
        assert_eq!(SweepConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(SweepConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn empty_grid_is_empty_table() {
        let c = corpus();
        let cfg = SweepConfig {
            techniques: vec![ReducerSpec::ipca(1)],
            ..SweepConfig::default()
        };
        let t = run_sweep(&cfg, &c.train, &c.test, 1).unwrap();
        assert!(t.entries.is_empty() && t.retention.is_empty());
    }

    #[test]
    fn varthresh_expands_and_k_is_monotone() {
        let c = corpus();
        let mut vt = ReducerSpec::varthresh(VarSelector::MIN);
        vt.selector = None;
        let cfg = SweepConfig {
            techniques: vec![vt],
            grid: vec![4],
            ..SweepConfig::default()
        };
        let t = run_sweep(&cfg, &c.train, &c.test, 2).unwrap();
        assert_eq!(t.entries.len(), 11);
        let ks: Vec<usize> = t
            .entries
            .iter()
            .filter(|c| c.report.is_some())
            .map(|c| c.k)
            .collect();
        assert!(ks.windows(2).all(|w| w[0] >= w[1]));
        assert!(t.entries.last().unwrap().error.is_some());
    }

    #[test]
    fn errors_stay_in_their_cell_and_jobs_do_not_matter() {
        let c = corpus();
        let cfg = SweepConfig {
            techniques: vec![ReducerSpec::ipca(1), ReducerSpec::kpca(1, Kernel::Cosine)],
            grid: vec![2, 12],
            fit_budget: 60,
            ..SweepConfig::default()
        };
        let a = run_sweep(&cfg, &c.train, &c.test, 1).unwrap();
        let b = run_sweep(&cfg, &c.train, &c.test, 3).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.entries.len(), 4);
        let back = SweepTable::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let baseline = a.baseline.as_ref().unwrap().aggregate.avg_r;
        assert_eq!(a.compute_retention(baseline, 12), a.retention);
    }

    #[test]
    fn invalid_grid_rejected() {
        let c = corpus();
        let cfg = SweepConfig {
            techniques: vec![ReducerSpec::ipca(1)],
            grid: vec![13],
            ..SweepConfig::default()
        };
        assert!(matches!(
            run_sweep(&cfg, &c.train, &c.test, 1),
            Err(PipelineError::InvalidConfig(_))
        ));
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{load_embeddings, save_embeddings, CorpusError, EmbeddingMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub gold: f64,
    pub left: String,
    pub right: String,
}

/// One mono- or cross-lingual STS task.
#[derive(Debug, Clone, PartialEq)]
pub struct StsTask {
    pub task_id: String,
    pub pairs: Vec<ScoredPair>,
}

impl StsTask {
    pub fn new(task_id: impl Into<String>, pairs: Vec<ScoredPair>) -> Result<Self, CorpusError> {
        let task_id = task_id.into();
        for (i, p) in pairs.iter().enumerate() {
            if !(0.0..=5.0).contains(&p.gold) {
                return Err(CorpusError::ScoreOutOfRange {
                    task: task_id,
                    line: i + 1,
                    score: p.gold,
                });
            }
        }
        Ok(Self { task_id, pairs })
    }

    pub fn gold(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.gold).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let _ = writeln!(out, "{}\t{}\t{}", p.gold, p.left, p.right);
        }
        out
    }

    pub fn parse_tsv(task_id: &str, text: &str) -> Result<Self, CorpusError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: &str| CorpusError::MalformedLine {
                task: task_id.to_string(),
                line: line_no,
                reason: reason.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(malformed("expected 3 tab-separated columns"));
            }
            let gold: f64 = cols[0]
                .trim()
                .parse()
                .map_err(|_| malformed("gold score is not a number"))?;
            if !(0.0..=5.0).contains(&gold) {
                return Err(CorpusError::ScoreOutOfRange {
                    task: task_id.to_string(),
                    line: line_no,
                    score: gold,
                });
            }
            pairs.push(ScoredPair {
                gold,
                left: cols[1].to_string(),
                right: cols[2].to_string(),
            });
        }
        Ok(Self {
            task_id: task_id.to_string(),
            pairs,
        })
    }
}

/// Row positions of a task's pairs inside its two side matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRows {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub gold: Vec<f64>,
}

/// A set of tasks whose pair ids are resolved against named embedding
/// matrices. Matrices are shared between tasks (e.g. `en.emb` serves both
/// `en-en` and `en-de`).
#[derive(Debug, Clone)]
pub struct Benchmark {
    tasks: Vec<StsTask>,
    matrices: BTreeMap<String, Arc<EmbeddingMatrix>>,
    sides: BTreeMap<String, (String, String)>,
    rows: Vec<TaskRows>,
}

impl Benchmark {
    /// Validates that every task has both sides and every pair id resolves.
    pub fn new(
        tasks: Vec<StsTask>,
        matrices: BTreeMap<String, Arc<EmbeddingMatrix>>,
        sides: BTreeMap<String, (String, String)>,
    ) -> Result<Self, CorpusError> {
        let mut rows = Vec::with_capacity(tasks.len());
        let mut seen = std::collections::BTreeSet::new();
        let mut dim = None;
        for task in &tasks {
            if !seen.insert(task.task_id.clone()) {
                return Err(CorpusError::MalformedLine {
                    task: task.task_id.clone(),
                    line: 0,
                    reason: "duplicate task id".into(),
                });
            }
            let (l, r) = sides
                .get(&task.task_id)
                .ok_or_else(|| CorpusError::MissingSide {
                    task: task.task_id.clone(),
                    detail: "no side mapping".into(),
                })?;
            let lookup = |name: &str| {
                matrices.get(name).ok_or_else(|| CorpusError::MissingSide {
                    task: task.task_id.clone(),
                    detail: format!("matrix {name:?} not loaded"),
                })
            };
            let (lm, rm) = (lookup(l)?, lookup(r)?);
            for m in [lm, rm] {
                match dim {
                    None => dim = Some(m.dim()),
                    Some(d) if d != m.dim() => {
                        return Err(CorpusError::MissingSide {
                            task: task.task_id.clone(),
                            detail: format!("side dims differ ({d} vs {})", m.dim()),
                        })
                    }
                    _ => {}
                }
            }
            let mut tr = TaskRows {
                left: Vec::with_capacity(task.pairs.len()),
                right: Vec::with_capacity(task.pairs.len()),
                gold: Vec::with_capacity(task.pairs.len()),
            };
            for (i, p) in task.pairs.iter().enumerate() {
                let resolve = |m: &EmbeddingMatrix, id: &str| {
                    m.row_of(id).ok_or_else(|| CorpusError::UnresolvedId {
                        task: task.task_id.clone(),
                        line: i + 1,
                        id: id.to_string(),
                    })
                };
                tr.left.push(resolve(lm, &p.left)?);
                tr.right.push(resolve(rm, &p.right)?);
                tr.gold.push(p.gold);
            }
            rows.push(tr);
        }
        Ok(Self {
            tasks,
            matrices,
            sides,
            rows,
        })
    }

    pub fn tasks(&self) -> &[StsTask] {
        &self.tasks
    }

    pub fn task_rows(&self, i: usize) -> &TaskRows {
        &self.rows[i]
    }

    pub fn matrices(&self) -> &BTreeMap<String, Arc<EmbeddingMatrix>> {
        &self.matrices
    }

    pub fn matrix(&self, name: &str) -> Option<&Arc<EmbeddingMatrix>> {
        self.matrices.get(name)
    }

    /// Names of the (left, right) matrices of a task.
    pub fn sides(&self, task_id: &str) -> Option<(&str, &str)> {
        self.sides
            .get(task_id)
            .map(|(l, r)| (l.as_str(), r.as_str()))
    }

    pub fn side_matrices(&self, i: usize) -> (&EmbeddingMatrix, &EmbeddingMatrix) {
        let (l, r) = &self.sides[&self.tasks[i].task_id];
        (&self.matrices[l], &self.matrices[r])
    }

    /// Embedding dimension shared by every matrix in use.
    pub fn dim(&self) -> Option<usize> {
        self.matrices.values().next().map(|m| m.dim())
    }

    /// `(task_id, pair count)` in task order.
    pub fn counts(&self) -> Vec<(String, usize)> {
        self.tasks
            .iter()
            .map(|t| (t.task_id.clone(), t.pairs.len()))
            .collect()
    }

    /// Same tasks and sides over a new set of matrices with identical row ids
    /// (e.g. reduced versions). Row positions carry over.
    pub fn with_matrices(
        &self,
        matrices: BTreeMap<String, Arc<EmbeddingMatrix>>,
    ) -> Result<Self, CorpusError> {
        for (name, m) in &self.matrices {
            let Some(new) = matrices.get(name) else {
                return Err(CorpusError::MissingSide {
                    task: String::new(),
                    detail: format!("replacement for matrix {name:?} missing"),
                });
            };
            if new.ids() != m.ids() {
                return Err(CorpusError::MissingSide {
                    task: String::new(),
                    detail: format!("replacement for matrix {name:?} has different row ids"),
                });
            }
        }
        Ok(Self {
            tasks: self.tasks.clone(),
            matrices,
            sides: self.sides.clone(),
            rows: self.rows.clone(),
        })
    }
}

/// Side matrix names for a task: `<task>.left.emb` / `<task>.right.emb` when
/// both exist, otherwise one file per language from the `a-b` task id (`en`
/// alone means both sides come from `en.emb`).
fn side_files(dir: &Path, task_id: &str) -> (String, String) {
    let left = format!("{task_id}.left");
    let right = format!("{task_id}.right");
    if dir.join(format!("{left}.emb")).is_file() && dir.join(format!("{right}.emb")).is_file() {
        return (left, right);
    }
    match task_id.split_once('-') {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (task_id.to_string(), task_id.to_string()),
    }
}

/// Loads every `*.tsv` task in `dir` together with the `.emb` files its
/// sides name.
pub fn load_benchmark(dir: impl AsRef<Path>) -> Result<Benchmark, CorpusError> {
    let dir = dir.as_ref();
    let io = |source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut tsvs: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "tsv") && p.is_file())
        .collect();
    tsvs.sort_by_key(|p| p.file_stem().map(|s| s.to_os_string()));
    if tsvs.is_empty() {
        return Err(CorpusError::MissingSide {
            task: String::new(),
            detail: format!("no task files in {}", dir.display()),
        });
    }
    let mut tasks = Vec::new();
    let mut sides = BTreeMap::new();
    let mut matrices: BTreeMap<String, Arc<EmbeddingMatrix>> = BTreeMap::new();
    for path in tsvs {
        let task_id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let text = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let task = StsTask::parse_tsv(&task_id, &text)?;
        let (l, r) = side_files(dir, &task_id);
        for name in [&l, &r] {
            if matrices.contains_key(name) {
                continue;
            }
            let emb = dir.join(format!("{name}.emb"));
            if !emb.is_file() {
                return Err(CorpusError::MissingSide {
                    task: task_id.clone(),
                    detail: format!("{} not found", emb.display()),
                });
            }
            matrices.insert(name.clone(), Arc::new(load_embeddings(&emb)?));
        }
        log::info!("task {task_id}: {} pairs ({l} / {r})", task.pairs.len());
        sides.insert(task_id, (l, r));
        tasks.push(task);
    }
    Benchmark::new(tasks, matrices, sides)
}

/// Writes a benchmark in the layout [`load_benchmark`] reads.
pub fn save_benchmark(b: &Benchmark, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, m) in &b.matrices {
        save_embeddings(m, dir.join(format!("{name}.emb")))?;
    }
    for t in &b.tasks {
        let path = dir.join(format!("{}.tsv", t.task_id));
        fs::write(&path, t.to_tsv()).map_err(|source| CorpusError::Io { path, source })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(ids: &[&str]) -> Arc<EmbeddingMatrix> {
        let n = ids.len();
        Arc::new(
            EmbeddingMatrix::new(
                ids.iter().map(|s| s.to_string()).collect(),
                2,
                (0..n * 2).map(|v| v as f32 + 1.0).collect(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn empty_directory_is_missing_side() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_benchmark(dir.path()),
            Err(CorpusError::MissingSide { .. })
        ));
    }

    #[test]
    fn identical_ids_at_top_score_accepted() {
        let t = StsTask::parse_tsv("en", "5.0\ta\ta\n0\ta\tb\n").unwrap();
        let b = Benchmark::new(
            vec![t],
            [("en".to_string(), matrix(&["a", "b"]))].into(),
            [("en".to_string(), ("en".to_string(), "en".to_string()))].into(),
        )
        .unwrap();
        assert_eq!(b.task_rows(0).left, vec![0, 0]);
        assert_eq!(b.task_rows(0).right, vec![0, 1]);
    }

    #[test]
    fn out_of_range_scores_rejected() {
        assert!(matches!(
            StsTask::parse_tsv("en", "5.01\ta\tb\n"),
            Err(CorpusError::ScoreOutOfRange { line: 1, .. })
        ));
        assert!(matches!(
            StsTask::parse_tsv("en", "-0.5\ta\tb\n"),
            Err(CorpusError::ScoreOutOfRange { .. })
        ));
        assert!(matches!(
            StsTask::parse_tsv("en", "1.0\ta\n"),
            Err(CorpusError::MalformedLine { .. })
        ));
    }

    #[test]
    fn unresolved_id_reported() {
        let t = StsTask::parse_tsv("en-de", "1\ta\tzz\n").unwrap();
        let err = Benchmark::new(
            vec![t],
            [
                ("en".to_string(), matrix(&["a"])),
                ("de".to_string(), matrix(&["b"])),
            ]
            .into(),
            [("en-de".to_string(), ("en".to_string(), "de".to_string()))].into(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::UnresolvedId { id, .. } if id == "zz"));
    }

    #[test]
    fn directory_round_trip_and_alignment() {
        let dir = tempfile::tempdir().unwrap();
        let tasks = vec![
            StsTask::parse_tsv("en-de", "1.5\ta\tc\n2\tb\td\n").unwrap(),
            StsTask::parse_tsv("en", "3\ta\tb\n").unwrap(),
        ];
        let b = Benchmark::new(
            tasks,
            [
                ("en".to_string(), matrix(&["a", "b"])),
                ("de".to_string(), matrix(&["c", "d"])),
            ]
            .into(),
            [
                ("en-de".to_string(), ("en".to_string(), "de".to_string())),
                ("en".to_string(), ("en".to_string(), "en".to_string())),
            ]
            .into(),
        )
        .unwrap();
        save_benchmark(&b, dir.path()).unwrap();
        let back = load_benchmark(dir.path()).unwrap();
        assert_eq!(back.counts(), vec![("en".into(), 1), ("en-de".into(), 2)]);
        for i in 0..back.tasks().len() {
            let r = back.task_rows(i);
            assert_eq!(r.left.len(), r.right.len());
            assert_eq!(r.left.len(), r.gold.len());
        }
        assert_eq!(back.sides("en-de"), Some(("en", "de")));
    }

    #[test]
    fn missing_language_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("en-fr.tsv"), "1\ta\tb\n").unwrap();
        save_embeddings(&matrix(&["a"]), dir.path().join("en.emb")).unwrap();
        assert!(matches!(
            load_benchmark(dir.path()),
            Err(CorpusError::MissingSide { task, .. }) if task == "en-fr"
        ));
    }
}

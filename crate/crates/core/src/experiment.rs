//! Parameter-grid execution: repeated runs over (variant, oracle, c_dist, eta)
//! cells with per-run and per-cell CSV output.
//!
//! Synthetic data is regenerated for every repetition; the same repetition
//! uses the same dataset in every cell. An embedding file is loaded once and
//! shared by all repetitions.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    generate_synthetic, load_embedding, save_embedding, LabeledDataset, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::{aggregate, score, RunResult};
use crate::geometry::Gamma;
use crate::oracle::{Oracle, OracleKind};
use crate::ssac::{
    check_theorem_condition, map_cdist_params, run_ssac, ConditionReport, SsacParams,
    TheoremParams, Variant, WeakModel,
};

/// Where the points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Embedding { path: PathBuf, labels: Vec<i64> },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleModel {
    Perfect,
    Local,
    Global,
}

impl OracleModel {
    pub fn name(self) -> &'static str {
        match self {
            OracleModel::Perfect => "perfect",
            OracleModel::Local => "local",
            OracleModel::Global => "global",
        }
    }

    /// Oracle parameters for a dataset with margin `gamma` at weakness `c_dist`.
    pub fn kind(self, c_dist: f64, gamma: Gamma) -> Result<OracleKind> {
        let (nu, rho) = map_cdist_params(c_dist, gamma.finite().unwrap_or(1.0))?;
        match self {
            OracleModel::Perfect => Ok(OracleKind::Perfect),
            OracleModel::Local => OracleKind::local(nu, rho),
            OracleModel::Global => OracleKind::global(rho),
        }
    }

    pub fn weak_model(self) -> Option<WeakModel> {
        match self {
            OracleModel::Perfect => None,
            OracleModel::Local => Some(WeakModel::Local),
            OracleModel::Global => Some(WeakModel::Global),
        }
    }
}

/// Full description of an experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub oracles: Vec<OracleModel>,
    pub c_dist: Vec<f64>,
    pub eta: Vec<f64>,
    pub beta: usize,
    pub delta: f64,
    pub variants: Vec<Variant>,
    pub repetitions: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub parallel: usize,
    /// Coverage-check slack; `None` means the largest allowed, `(gamma - 1) / 2`.
    pub epsilon: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            oracles: vec![OracleModel::Local],
            c_dist: vec![0.6, 0.8, 1.0],
            eta: vec![2.0, 5.0, 10.0, 20.0, 30.0],
            beta: 1,
            delta: 0.05,
            variants: vec![Variant::Improved, Variant::Vanilla],
            repetitions: 1000,
            seed: 0,
            out: PathBuf::from("results"),
            parallel: 0,
            epsilon: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON (`.json`) or TOML (anything else) config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("oracles", self.oracles.is_empty()),
            ("c_dist", self.c_dist.is_empty()),
            ("eta", self.eta.is_empty()),
            ("variants", self.variants.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("`{name}` must not be empty")));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if let Some(c) = self.c_dist.iter().find(|&&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::Config(format!(
                "c_dist values must lie in (0, 1], got {c}"
            )));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        let k = self.cluster_hint();
        for &eta in &self.eta {
            SsacParams::new(k, eta)
                .with_beta(self.beta)
                .with_delta(self.delta)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn cluster_hint(&self) -> usize {
        match &self.data {
            DataSource::Synthetic(s) => s.k.max(1),
            DataSource::Embedding { labels, .. } => labels.len().max(1),
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for (vi, &variant) in self.variants.iter().enumerate() {
            for (oi, &oracle) in self.oracles.iter().enumerate() {
                for (ci, &c_dist) in self.c_dist.iter().enumerate() {
                    for (ei, &eta) in self.eta.iter().enumerate() {
                        cells.push(Cell {
                            index: [vi, oi, ci, ei],
                            variant,
                            oracle,
                            c_dist,
                            eta,
                        });
                    }
                }
            }
        }
        cells
    }
}

/// One point of the parameter grid. `index` gives its position in each of
/// the config lists and defines the canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: [usize; 4],
    pub variant: Variant,
    pub oracle: OracleModel,
    pub c_dist: f64,
    pub eta: f64,
}

/// One row of the per-run CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub variant: Variant,
    pub oracle: OracleModel,
    pub c_dist: f64,
    pub eta: f64,
    pub beta: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub failed: bool,
    pub phase1_failures: usize,
    pub queries_p1: u64,
    pub queries_p2: u64,
    pub ambiguity_events: usize,
    pub realized_gamma: Gamma,
}

/// One row of the per-cell summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub oracle: OracleModel,
    pub c_dist: f64,
    pub eta: f64,
    pub beta: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub failure_count: usize,
    pub mean_queries: f64,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    /// Sorted by cell, then repetition.
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |acc, &p| mix(acc ^ mix(p)))
}

/// Seed of the synthetic dataset used by repetition `rep`.
pub fn dataset_seed(base: u64, rep: usize) -> u64 {
    derive_seed(&[base, 0xda7a, rep as u64])
}

/// Seed of the algorithm run for `cell` in repetition `rep`.
pub fn run_seed(base: u64, cell: &Cell, rep: usize) -> u64 {
    let [a, b, c, d] = cell.index;
    derive_seed(&[base, a as u64, b as u64, c as u64, d as u64, rep as u64])
}

/// Runs one cell on one dataset.
pub fn run_cell(
    data: &LabeledDataset,
    cell: &Cell,
    beta: usize,
    delta: f64,
    seed: u64,
) -> Result<RunResult> {
    let kind = cell.oracle.kind(cell.c_dist, data.realized_gamma)?;
    let mut oracle = Oracle::new(&data.dataset, &data.truth, kind)?;
    if cell.variant == Variant::Vanilla {
        oracle = oracle.with_random_resolution(mix(seed ^ 0x0dd5));
    }
    let params = SsacParams::new(data.truth.k(), cell.eta)
        .with_beta(beta)
        .with_delta(delta)
        .with_variant(cell.variant)
        .with_seed(seed);
    let output = run_ssac(&data.dataset, &mut oracle, &params)?;
    Ok(score(&data.truth, &output))
}

fn dataset_for_rep(
    cfg: &ExperimentConfig,
    shared: Option<&LabeledDataset>,
    rep: usize,
) -> Result<LabeledDataset> {
    match (&cfg.data, shared) {
        (_, Some(d)) => Ok(d.clone()),
        (DataSource::Synthetic(s), None) => {
            generate_synthetic(&s.clone().with_seed(dataset_seed(cfg.seed, rep)))
        }
        (DataSource::Embedding { path, labels }, None) => load_embedding(path, labels),
    }
}

/// Executes every cell `cfg.repetitions` times.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridOutcome> {
    cfg.validate()?;
    let cells = cfg.cells();
    let shared = match &cfg.data {
        DataSource::Embedding { path, labels } => Some(load_embedding(path, labels)?),
        DataSource::Synthetic(_) => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    // per repetition: one result per cell, in cell order
    let per_rep: Vec<Vec<RunRow>> = pool.install(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| {
                let data = dataset_for_rep(cfg, shared.as_ref(), rep)?;
                cells
                    .iter()
                    .map(|cell| {
                        let seed = run_seed(cfg.seed, cell, rep);
                        let r = run_cell(&data, cell, cfg.beta, cfg.delta, seed).map_err(|e| {
                            Error::Config(format!(
                                "cell ({}, {}, c_dist={}, eta={}) rep {rep}: {e}",
                                cell.variant,
                                cell.oracle.name(),
                                cell.c_dist,
                                cell.eta
                            ))
                        })?;
                        Ok(RunRow {
                            variant: cell.variant,
                            oracle: cell.oracle,
                            c_dist: cell.c_dist,
                            eta: cell.eta,
                            beta: cfg.beta,
                            seed,
                            accuracy: r.accuracy,
                            failed: r.failed,
                            phase1_failures: r.phase1_failures,
                            queries_p1: r.queries_phase1,
                            queries_p2: r.queries_phase2,
                            ambiguity_events: r.ambiguity_events,
                            realized_gamma: data.realized_gamma,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut runs = Vec::with_capacity(cells.len() * cfg.repetitions);
    for c in 0..cells.len() {
        runs.extend(per_rep.iter().map(|rows| rows[c].clone()));
    }
    let results: Vec<(usize, RunResult)> = runs
        .iter()
        .enumerate()
        .map(|(i, row)| {
            (
                i / cfg.repetitions,
                RunResult {
                    accuracy: row.accuracy,
                    failed: row.failed,
                    clusters_recovered: 0,
                    phase1_failures: row.phase1_failures,
                    queries_phase1: row.queries_p1,
                    queries_phase2: row.queries_p2,
                    ambiguity_events: row.ambiguity_events,
                },
            )
        })
        .collect();
    let summary = aggregate(results.iter().map(|(c, r)| (*c, r)))
        .into_iter()
        .map(|s| {
            let cell = &cells[s.key];
            SummaryRow {
                variant: cell.variant,
                oracle: cell.oracle,
                c_dist: cell.c_dist,
                eta: cell.eta,
                beta: cfg.beta,
                mean_accuracy: s.mean_accuracy,
                std_accuracy: s.std_accuracy,
                failure_count: s.failure_count,
                mean_queries: s.mean_queries,
                n_reps: s.reps,
            }
        })
        .collect();
    Ok(GridOutcome { runs, summary })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file =
        fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes `runs.csv` and `summary.csv` into `dir`, creating it if needed.
pub fn write_outputs(outcome: &GridOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let runs = dir.join("runs.csv");
    let summary = dir.join("summary.csv");
    write_csv(&runs, &outcome.runs)?;
    write_csv(&summary, &outcome.summary)?;
    Ok((runs, summary))
}

/// Coverage verdict for one (oracle model, c_dist) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageVerdict {
    pub oracle: OracleModel,
    pub c_dist: f64,
    pub nu: f64,
    pub rho: f64,
    pub report: ConditionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCheck {
    pub n: usize,
    pub k: usize,
    pub realized_gamma: Gamma,
    pub epsilon: f64,
    pub verdicts: Vec<CoverageVerdict>,
}

/// Loads or generates the configured dataset (repetition 0 for synthetic
/// data) and evaluates the coverage condition for every weak oracle model
/// and c_dist in the config.
pub fn check_dataset(cfg: &ExperimentConfig) -> Result<DatasetCheck> {
    cfg.validate()?;
    let data = dataset_for_rep(cfg, None, 0)?;
    check_labeled(&data, cfg)
}

/// Coverage verdicts for an already materialized dataset.
pub fn check_labeled(data: &LabeledDataset, cfg: &ExperimentConfig) -> Result<DatasetCheck> {
    let gamma = data.realized_gamma.finite().ok_or_else(|| {
        Error::Config(
            "the coverage check needs a finite margin; this dataset's is unbounded".into(),
        )
    })?;
    let epsilon = cfg.epsilon.unwrap_or((gamma - 1.0) / 2.0);
    let mut verdicts = Vec::new();
    for &oracle in &cfg.oracles {
        let Some(model) = oracle.weak_model() else {
            continue;
        };
        for &c_dist in &cfg.c_dist {
            let (nu, rho) = map_cdist_params(c_dist, gamma)?;
            let tp = TheoremParams::new(epsilon, gamma, nu, rho)?;
            verdicts.push(CoverageVerdict {
                oracle,
                c_dist,
                nu,
                rho,
                report: check_theorem_condition(&data.dataset, &data.truth, &tp, model),
            });
        }
    }
    Ok(DatasetCheck {
        n: data.dataset.len(),
        k: data.truth.k(),
        realized_gamma: data.realized_gamma,
        epsilon,
        verdicts,
    })
}

/// Writes a small three-cluster dataset in the embedding format.
pub fn emit_fixture(seed: u64, path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let cfg = SynthConfig {
        n: 30,
        k: 3,
        gamma_min: 1.0,
        gamma_max: f64::INFINITY,
        seed,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    save_embedding(path, &data)?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synthetic(SynthConfig {
                n: 60,
                ..SynthConfig::default()
            }),
            oracles: vec![OracleModel::Local, OracleModel::Global],
            c_dist: vec![0.8, 1.0],
            eta: vec![2.0, 5.0],
            repetitions: 3,
            seed: 9,
            parallel: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn row_counts() {
        let cfg = small();
        let out = run_grid(&cfg).unwrap();
        assert_eq!(out.runs.len(), 2 * 2 * 2 * 2 * 3);
        assert_eq!(out.summary.len(), 16);
        assert!(out.summary.iter().all(|s| s.n_reps == 3));
    }

    #[test]
    fn single_cell_single_rep() {
        let cfg = ExperimentConfig {
            oracles: vec![OracleModel::Local],
            c_dist: vec![1.0],
            eta: vec![5.0],
            variants: vec![Variant::Improved],
            repetitions: 1,
            ..small()
        };
        let out = run_grid(&cfg).unwrap();
        assert_eq!(out.runs.len(), 1);
        assert_eq!(out.summary.len(), 1);
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let a = run_grid(&ExperimentConfig {
            parallel: 1,
            ..small()
        })
        .unwrap();
        let b = run_grid(&ExperimentConfig {
            parallel: 4,
            ..small()
        })
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            ExperimentConfig {
                eta: vec![],
                ..small()
            },
            ExperimentConfig {
                repetitions: 0,
                ..small()
            },
            ExperimentConfig {
                c_dist: vec![1.5],
                ..small()
            },
            ExperimentConfig { beta: 0, ..small() },
        ] {
            assert!(matches!(run_grid(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn epsilon_above_bound_is_rejected() {
        let cfg = ExperimentConfig {
            epsilon: Some(10.0),
            ..small()
        };
        assert!(matches!(check_dataset(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_differ_across_cells_and_reps() {
        let cfg = small();
        let cells = cfg.cells();
        let mut seeds: Vec<u64> = cells
            .iter()
            .flat_map(|c| (0..3).map(move |r| (c, r)))
            .map(|(c, r)| run_seed(cfg.seed, c, r))
            .collect();
        let n = seeds.len();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), n);
        assert_ne!(dataset_seed(0, 0), dataset_seed(0, 1));
    }

    #[test]
    fn config_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("grid.toml");
        fs::write(
            &toml_path,
            "oracles = [\"global\"]\nc_dist = [0.7, 0.85, 1.0]\nrepetitions = 5\n\n[data.synthetic]\nn = 90\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&toml_path).unwrap();
        assert_eq!(cfg.oracles, vec![OracleModel::Global]);
        assert_eq!(cfg.repetitions, 5);
        match &cfg.data {
            DataSource::Synthetic(s) => {
                assert_eq!(s.n, 90);
                assert_eq!(s.k, 3);
            }
            other => panic!("{other:?}"),
        }

        let json_path = dir.path().join("grid.json");
        fs::write(
            &json_path,
            r#"{"data": {"embedding": {"path": "emb.csv", "labels": [0, 6, 8]}}, "eta": [30]}"#,
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&json_path).unwrap();
        assert_eq!(cfg.eta, vec![30.0]);
        assert!(matches!(cfg.data, DataSource::Embedding { .. }));

        fs::write(&toml_path, "bogus = 1\n").unwrap();
        assert!(matches!(
            ExperimentConfig::from_file(&toml_path),
            Err(Error::Config(_))
        ));
    }
}

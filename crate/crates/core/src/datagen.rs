//! Synthetic margin-constrained Gaussian data and labeled embedding files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    compute_centers, is_center_based, realized_gamma, Clustering, Dataset, Gamma, Point,
};

const MAX_RELABEL_SWEEPS: usize = 20;

/// Parameters for [`generate_synthetic`]. Defaults are n=600, k=3 in 2-D with
/// sigma=2 and a margin in [1.0, 1.1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub sigma: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub seed: u64,
    /// Half-width of the center placement box, in units of sigma.
    pub center_box_scale: f64,
    pub max_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 600,
            k: 3,
            dim: 2,
            sigma: 2.0,
            gamma_min: 1.0,
            gamma_max: 1.1,
            seed: 0,
            center_box_scale: 6.0,
            max_attempts: 10_000,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::Config(format!(
                "need n >= k >= 1, got n={} k={}",
                self.n, self.k
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.gamma_min.is_nan() || self.gamma_max.is_nan() || self.gamma_min > self.gamma_max {
            return Err(Error::Config(format!(
                "gamma_min {} exceeds gamma_max {}",
                self.gamma_min, self.gamma_max
            )));
        }
        if self.center_box_scale.is_nan() || self.center_box_scale <= 0.0 {
            return Err(Error::Config("center_box_scale must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// A dataset together with the clustering an oracle would hold for it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    pub truth: Clustering,
    pub realized_gamma: Gamma,
    /// Original label value of each dense cluster id.
    pub source_labels: Vec<i64>,
}

/// Rejection-samples isotropic Gaussian clusters until the nearest-center
/// relabeled truth has a margin inside `[gamma_min, gamma_max]`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.sigma).expect("sigma validated");
    let half = cfg.center_box_scale * cfg.sigma;

    for _ in 0..cfg.max_attempts {
        if let Some(out) = attempt(cfg, &mut rng, &noise, half) {
            return Ok(out);
        }
    }
    Err(Error::GenerationFailed {
        attempts: cfg.max_attempts,
        config: format!("{cfg:?}"),
    })
}

fn attempt(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    noise: &Normal<f64>,
    half: f64,
) -> Option<LabeledDataset> {
    let centers: Vec<Vec<f64>> = (0..cfg.k)
        .map(|_| {
            (0..cfg.dim)
                .map(|_| rng.random_range(-half..=half))
                .collect()
        })
        .collect();
    let mut points = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for (c, center) in centers.iter().enumerate() {
        let size = cfg.n / cfg.k + usize::from(c < cfg.n % cfg.k);
        for _ in 0..size {
            let coords = center.iter().map(|&m| m + noise.sample(rng)).collect();
            points.push(Point::new(coords).ok()?);
            labels.push(c);
        }
    }
    let dataset = Dataset::from_points(&points).ok()?;
    let labels = relabel_to_nearest(&dataset, labels, cfg.k)?;
    let truth = Clustering::from_labels(&dataset, labels, cfg.k).ok()?;
    if truth.radii().contains(&0.0) || !is_center_based(&dataset, &truth) {
        return None;
    }
    let gamma = realized_gamma(&dataset, &truth);
    if !gamma.within(cfg.gamma_min, cfg.gamma_max) {
        return None;
    }
    Some(LabeledDataset {
        dataset,
        truth,
        realized_gamma: gamma,
        source_labels: (0..cfg.k as i64).collect(),
    })
}

/// Reassigns every point to its nearest empirical center until the labels
/// stop changing. `None` if a cluster empties or the sweeps do not settle.
fn relabel_to_nearest(ds: &Dataset, mut labels: Vec<usize>, k: usize) -> Option<Vec<usize>> {
    for _ in 0..MAX_RELABEL_SWEEPS {
        let centers = compute_centers(ds, &labels, k).ok()?;
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let nearest = centers
                .iter()
                .enumerate()
                .map(|(c, mu)| (c, ds.dist_to(i, mu.coords())))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)?;
            if nearest != *label {
                *label = nearest;
                changed = true;
            }
        }
        if !changed {
            return Some(labels);
        }
    }
    None
}

/// Reads a labeled embedding: one point per row, integer label first, then
/// coordinates; comma or tab separated (decided by the first data row);
/// blank lines and lines starting with `#` are skipped. Only rows whose label
/// is in `keep` are retained, relabeled densely in increasing label order.
pub fn load_embedding(path: impl AsRef<Path>, keep: &[i64]) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_embedding(&text, path, keep)
}

fn parse_embedding(text: &str, path: &Path, keep: &[i64]) -> Result<LabeledDataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut delimiter = None;
    let mut dim = None;
    let mut rows: Vec<(i64, Point)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let delim = *delimiter.get_or_insert(if line.contains('\t') { '\t' } else { ',' });
        let mut fields = line.split(delim).map(str::trim);
        let label_field = fields.next().unwrap_or_default();
        let label: i64 = label_field
            .parse()
            .map_err(|_| parse_err(lineno, format!("label `{label_field}` is not an integer")))?;
        let coords = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(lineno, format!("coordinate `{f}` is not a finite number"))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if coords.is_empty() {
            return Err(parse_err(lineno, "row has no coordinates".into()));
        }
        match dim {
            None => dim = Some(coords.len()),
            Some(d) if d != coords.len() => {
                return Err(parse_err(
                    lineno,
                    format!("expected {d} coordinates, found {}", coords.len()),
                ));
            }
            Some(_) => {}
        }
        if keep.contains(&label) {
            rows.push((
                label,
                Point::new(coords).expect("checked finite and nonempty"),
            ));
        }
    }
    if rows.is_empty() {
        return Err(Error::Usage(format!(
            "{}: no rows with a label in {keep:?}",
            path.display()
        )));
    }
    let mut source_labels: Vec<i64> = rows.iter().map(|(l, _)| *l).collect();
    source_labels.sort_unstable();
    source_labels.dedup();
    let labels: Vec<usize> = rows
        .iter()
        .map(|(l, _)| {
            source_labels
                .binary_search(l)
                .expect("label collected above")
        })
        .collect();
    let points: Vec<Point> = rows.into_iter().map(|(_, p)| p).collect();
    let dataset = Dataset::from_points(&points)?;
    let truth = Clustering::from_labels(&dataset, labels, source_labels.len())?;
    let gamma = realized_gamma(&dataset, &truth);
    Ok(LabeledDataset {
        dataset,
        truth,
        realized_gamma: gamma,
        source_labels,
    })
}

/// Writes a labeled dataset in the comma-separated embedding format.
pub fn save_embedding(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# label,coordinates...\n");
    for (i, p) in data.dataset.points().enumerate() {
        let label = data.source_labels[data.truth.label(i)];
        write!(out, "{label}").expect("writing to a String");
        for c in p {
            write!(out, ",{c}").expect("writing to a String");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

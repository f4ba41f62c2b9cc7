//! Points, datasets, clusterings and the margin arithmetic built on them.
//!
//! Everything here is immutable once constructed. Distances are Euclidean.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A point in `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Usage("a point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Usage("point coordinates must be finite".into()));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Arithmetic mean of a set of equal-dimension coordinate slices.
    pub(crate) fn mean_of<'a>(
        dim: usize,
        members: impl IntoIterator<Item = &'a [f64]>,
    ) -> Option<Self> {
        let mut acc = vec![0.0; dim];
        let mut count = 0usize;
        for m in members {
            for (a, v) in acc.iter_mut().zip(m) {
                *a += v;
            }
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let inv = 1.0 / count as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Some(Self(acc))
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Distance metric. Only Euclidean is supported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    /// Checked distance between two coordinate slices.
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(euclidean(a, b))
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(a: &Point, b: &Point) -> Result<f64> {
    Metric::Euclidean.distance(a.coords(), b.coords())
}

/// Unchecked Euclidean distance for hot loops; callers guarantee equal length.
#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// An indexed collection of points sharing one dimension.
///
/// Coordinates are stored row-major in a single buffer; point `i` is
/// `coords[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Usage("a dataset needs at least one point".into()))?;
        let dim = first.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
            coords.extend_from_slice(p.coords());
        }
        Ok(Self { dim, coords })
    }

    /// Builds a dataset from rows of raw coordinates.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| Point::new(r.as_ref().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(&points)
    }

    /// Convenience constructor for one-dimensional data.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        Self::from_rows(&rows)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates of point `i`. Panics if `i` is out of range.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    #[inline]
    pub fn dist_to(&self, i: usize, p: &[f64]) -> f64 {
        euclidean(self.point(i), p)
    }

    /// Returns a copy with every coordinate mapped through `f`.
    pub fn map_coords(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let coords: Vec<f64> = self
            .coords
            .iter()
            .enumerate()
            .map(|(idx, &c)| f(idx % self.dim, c))
            .collect();
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Usage("point coordinates must be finite".into()));
        }
        Ok(Self {
            dim: self.dim,
            coords,
        })
    }
}

/// Arithmetic mean of each labeled cluster.
pub fn compute_centers(ds: &Dataset, labels: &[usize], k: usize) -> Result<Vec<Point>> {
    if labels.len() != ds.len() {
        return Err(Error::InvalidClustering(format!(
            "{} labels for {} points",
            labels.len(),
            ds.len()
        )));
    }
    let mut sums = vec![vec![0.0; ds.dim()]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::InvalidClustering(format!(
                "label {l} of point {i} is outside [0, {k})"
            )));
        }
        counts[l] += 1;
        for (s, c) in sums[l].iter_mut().zip(ds.point(i)) {
            *s += c;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(c, (sum, count))| {
            if count == 0 {
                return Err(Error::InvalidClustering(format!("cluster {c} is empty")));
            }
            Ok(Point(sum.into_iter().map(|s| s / count as f64).collect()))
        })
        .collect()
}

/// A complete labeling of a dataset into `k` nonempty clusters, with the
/// derived centers and radii.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    labels: Vec<usize>,
    k: usize,
    centers: Vec<Point>,
    radii: Vec<f64>,
    sizes: Vec<usize>,
}

impl Clustering {
    pub fn from_labels(ds: &Dataset, labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidClustering("k must be at least 1".into()));
        }
        let centers = compute_centers(ds, &labels, k)?;
        let mut radii = vec![0.0f64; k];
        let mut sizes = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            radii[l] = radii[l].max(ds.dist_to(i, centers[l].coords()));
            sizes[l] += 1;
        }
        Ok(Self {
            labels,
            k,
            centers,
            radii,
            sizes,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn center(&self, c: usize) -> &Point {
        &self.centers[c]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    #[inline]
    pub fn radius(&self, c: usize) -> f64 {
        self.radii[c]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == c)
            .map(|(i, _)| i)
    }
}

/// Whether every point's label is the unique nearest center.
///
/// A tie between the own center and another center counts as a violation.
pub fn is_center_based(ds: &Dataset, clustering: &Clustering) -> bool {
    (0..ds.len()).all(|i| {
        let own = clustering.label(i);
        let d_own = ds.dist_to(i, clustering.center(own).coords());
        clustering
            .centers()
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != own)
            .all(|(_, mu)| d_own < ds.dist_to(i, mu.coords()))
    })
}

/// Margin value that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Finite(f64),
    Infinite,
}

impl Gamma {
    pub fn finite(self) -> Option<f64> {
        match self {
            Gamma::Finite(g) => Some(g),
            Gamma::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Gamma::Infinite)
    }

    /// `lo <= self <= hi`, treating `Infinite` as above every finite bound.
    pub fn within(self, lo: f64, hi: f64) -> bool {
        match self {
            Gamma::Finite(g) => lo <= g && g <= hi,
            Gamma::Infinite => hi == f64::INFINITY,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Finite(g) => write!(f, "{g}"),
            Gamma::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gamma::Finite(g) => s.serialize_f64(*g),
            Gamma::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Largest margin factor the clustering supports: the minimum over clusters
/// of (nearest external distance to the center) / (cluster radius).
pub fn realized_gamma(ds: &Dataset, clustering: &Clustering) -> Gamma {
    let mut best = Gamma::Infinite;
    for c in 0..clustering.k() {
        let mu = clustering.center(c).coords();
        let nearest_external = (0..ds.len())
            .filter(|&i| clustering.label(i) != c)
            .map(|i| ds.dist_to(i, mu))
            .fold(f64::INFINITY, f64::min);
        if nearest_external == f64::INFINITY {
            continue;
        }
        if nearest_external == 0.0 {
            return Gamma::Finite(0.0);
        }
        let radius = clustering.radius(c);
        if radius == 0.0 {
            continue;
        }
        let ratio = nearest_external / radius;
        best = match best {
            Gamma::Finite(g) if g <= ratio => best,
            _ => Gamma::Finite(ratio),
        };
    }
    best
}

//! Two-phase semi-supervised active clustering against a weak oracle.
//!
//! Each round samples points from the unclustered remainder, groups them with
//! cluster-assignment queries (phase 1), estimates the center of the largest
//! group, then binary-searches the remainder sorted by distance to that
//! estimate for the first point outside the cluster (phase 2).

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Clustering, Dataset, Point};
use crate::oracle::{Answer, Assignment, Oracle};

/// Algorithm variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Mean-proximal representatives and binary-search anchors.
    Improved,
    /// First-seen representatives, random anchors, and (by convention) an
    /// oracle that resolves `NotSure` with a coin flip.
    Vanilla,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Improved => "improved",
            Variant::Vanilla => "vanilla",
        }
    }

    pub fn anchor_policy(self) -> AnchorPolicy {
        match self {
            Variant::Improved => AnchorPolicy::NearestToMean,
            Variant::Vanilla => AnchorPolicy::RandomKnown,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "improved" => Ok(Variant::Improved),
            "vanilla" => Ok(Variant::Vanilla),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// How the binary search picks the known member it compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorPolicy {
    /// The known member closest to the empirical mean, fixed for the search.
    NearestToMean,
    /// A uniformly random known member, redrawn for every probe.
    RandomKnown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsacParams {
    pub k: usize,
    pub eta: f64,
    pub beta: usize,
    pub delta: f64,
    pub variant: Variant,
    pub seed: u64,
}

impl SsacParams {
    pub fn new(k: usize, eta: f64) -> Self {
        Self {
            k,
            eta,
            beta: 1,
            delta: 0.05,
            variant: Variant::Improved,
            seed: 0,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_beta(mut self, beta: usize) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Phase-1 sample size `ceil(k * eta)`.
    pub fn sample_size(&self) -> usize {
        (self.k as f64 * self.eta).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Usage("k must be at least 1".into()));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Usage(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.beta == 0 {
            return Err(Error::Usage("beta must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Usage(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// A search radius that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Unbounded,
}

impl Threshold {
    /// Whether a point at distance `d` lies strictly inside.
    pub fn contains(self, d: f64) -> bool {
        match self {
            Threshold::Finite(r) => d < r,
            Threshold::Unbounded => true,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(r) => write!(f, "{r}"),
            Threshold::Unbounded => f.write_str("inf"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::Finite(r) => s.serialize_f64(*r),
            Threshold::Unbounded => s.serialize_str("inf"),
        }
    }
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Points still unclustered when the round started.
    pub pool_size: usize,
    pub sampled: usize,
    /// Sampled points whose assignment query came back `NotSure`.
    pub unassigned: usize,
    /// Chosen group, `None` when phase 1 failed.
    pub group: Option<usize>,
    pub group_size: usize,
    pub empirical_mean: Option<Point>,
    pub threshold: Option<Threshold>,
    pub cluster_size: usize,
    pub phase1_failed: bool,
    pub queries_phase1: u64,
    pub queries_phase2: u64,
    pub ambiguity_events: usize,
}

/// A cluster emitted by one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredCluster {
    pub group: usize,
    pub members: Vec<usize>,
    /// Mean of the members, or the empirical mean when the cluster is empty.
    pub center: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsacOutput {
    /// Index into `clusters` per point; `None` for points never clustered.
    pub labels: Vec<Option<usize>>,
    pub clusters: Vec<RecoveredCluster>,
    pub rounds: Vec<RoundRecord>,
    pub failed: bool,
    pub delta: f64,
}

impl SsacOutput {
    pub fn queries_phase1(&self) -> u64 {
        self.rounds.iter().map(|r| r.queries_phase1).sum()
    }

    pub fn queries_phase2(&self) -> u64 {
        self.rounds.iter().map(|r| r.queries_phase2).sum()
    }

    pub fn total_queries(&self) -> u64 {
        self.queries_phase1() + self.queries_phase2()
    }

    pub fn ambiguity_events(&self) -> usize {
        self.rounds.iter().map(|r| r.ambiguity_events).sum()
    }

    pub fn phase1_failures(&self) -> usize {
        self.rounds.iter().filter(|r| r.phase1_failed).count()
    }

    pub fn is_complete(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }
}

/// A group of points the oracle has placed together, across all rounds.
#[derive(Debug)]
struct Group {
    members: Vec<usize>,
    sum: Vec<f64>,
    rep: usize,
    extracted: bool,
}

impl Group {
    fn new(founder: usize, ds: &Dataset) -> Self {
        Self {
            members: vec![founder],
            sum: ds.point(founder).to_vec(),
            rep: founder,
            extracted: false,
        }
    }

    fn add(&mut self, x: usize, ds: &Dataset, variant: Variant) {
        self.members.push(x);
        for (s, c) in self.sum.iter_mut().zip(ds.point(x)) {
            *s += c;
        }
        if variant == Variant::Improved {
            let inv = 1.0 / self.members.len() as f64;
            let mean: Vec<f64> = self.sum.iter().map(|s| s * inv).collect();
            self.rep = nearest_to(ds, &self.members, &mean);
        }
    }
}

/// Member of `candidates` closest to `target`, lowest index on ties.
fn nearest_to(ds: &Dataset, candidates: &[usize], target: &[f64]) -> usize {
    let mut best = candidates[0];
    let mut best_d = ds.dist_to(best, target);
    for &c in &candidates[1..] {
        let d = ds.dist_to(c, target);
        if d < best_d || (d == best_d && c < best) {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Result of a boundary search over a sorted candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Position in the sorted list of the first non-member, if any.
    pub boundary: Option<usize>,
    pub threshold: Threshold,
    pub queries: u64,
    /// Probes where the anchor and every fallback answer were `NotSure`.
    pub ambiguity_events: usize,
}

/// Decides membership of one candidate against the known members of a group.
struct MembershipProbe<'o, 'd, 'k, R> {
    oracle: &'o mut Oracle<'d>,
    known: &'k [usize],
    fixed_anchor: Option<usize>,
    fallback: usize,
    rng: &'o mut R,
    ambiguity_events: usize,
}

impl<'o, 'd, 'k, R: Rng> MembershipProbe<'o, 'd, 'k, R> {
    fn new(
        oracle: &'o mut Oracle<'d>,
        policy: AnchorPolicy,
        known: &'k [usize],
        mean: &[f64],
        beta: usize,
        rng: &'o mut R,
    ) -> Result<Self> {
        if known.is_empty() {
            return Err(Error::Usage(
                "boundary search needs at least one known member".into(),
            ));
        }
        if beta == 0 {
            return Err(Error::Usage("beta must be at least 1".into()));
        }
        let fixed_anchor = match policy {
            AnchorPolicy::NearestToMean => Some(nearest_to(oracle.dataset(), known, mean)),
            AnchorPolicy::RandomKnown => None,
        };
        Ok(Self {
            oracle,
            known,
            fixed_anchor,
            fallback: beta.min(known.len()) - 1,
            rng,
            ambiguity_events: 0,
        })
    }

    fn is_member(&mut self, x: usize) -> Result<bool> {
        let anchor = match self.fixed_anchor {
            Some(a) => a,
            None => self.known[self.rng.random_range(0..self.known.len())],
        };
        match self.oracle.same_cluster_query(anchor, x)? {
            Answer::Same => return Ok(true),
            Answer::Different => return Ok(false),
            Answer::NotSure => {}
        }
        let others: Vec<usize> = self
            .known
            .iter()
            .copied()
            .filter(|&y| y != anchor)
            .collect();
        let take = self.fallback.min(others.len());
        for pos in index::sample(self.rng, others.len(), take) {
            match self.oracle.same_cluster_query(x, others[pos])? {
                Answer::Same => return Ok(true),
                Answer::Different => return Ok(false),
                Answer::NotSure => {}
            }
        }
        self.ambiguity_events += 1;
        Ok(false)
    }
}

fn finish_search(
    ds: &Dataset,
    sorted: &[usize],
    mean: &[f64],
    boundary: Option<usize>,
    queries: u64,
    ambiguity_events: usize,
) -> SearchOutcome {
    let threshold = match boundary {
        Some(j) => Threshold::Finite(ds.dist_to(sorted[j], mean)),
        None => Threshold::Unbounded,
    };
    SearchOutcome {
        boundary,
        threshold,
        queries,
        ambiguity_events,
    }
}

/// Finds the first point of `sorted` that is not in the group of `known`,
/// by binary search with weak same-cluster queries.
///
/// `sorted` must be in increasing order of distance to `mean`. A `NotSure`
/// anchor answer falls back to up to `beta - 1` other known members; if those
/// are all `NotSure` too the candidate is treated as a non-member.
pub fn binary_search<R: Rng>(
    sorted: &[usize],
    oracle: &mut Oracle<'_>,
    policy: AnchorPolicy,
    known: &[usize],
    mean: &[f64],
    beta: usize,
    rng: &mut R,
) -> Result<SearchOutcome> {
    let ds = oracle.dataset();
    let start = oracle.query_count();
    let mut probe = MembershipProbe::new(oracle, policy, known, mean, beta, rng)?;
    // invariant: every position < lo is a member, every position > hi is not
    let (mut lo, mut hi) = (0isize, sorted.len() as isize - 1);
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        if probe.is_member(sorted[mid as usize])? {
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    let boundary = (lo as usize) < sorted.len();
    let events = probe.ambiguity_events;
    let queries = oracle.query_count() - start;
    Ok(finish_search(
        ds,
        sorted,
        mean,
        boundary.then_some(lo as usize),
        queries,
        events,
    ))
}

/// Reference search that probes every candidate in order and stops at the
/// first non-member.
pub fn linear_scan<R: Rng>(
    sorted: &[usize],
    oracle: &mut Oracle<'_>,
    policy: AnchorPolicy,
    known: &[usize],
    mean: &[f64],
    beta: usize,
    rng: &mut R,
) -> Result<SearchOutcome> {
    let ds = oracle.dataset();
    let start = oracle.query_count();
    let mut probe = MembershipProbe::new(oracle, policy, known, mean, beta, rng)?;
    let mut boundary = None;
    for (pos, &x) in sorted.iter().enumerate() {
        if !probe.is_member(x)? {
            boundary = Some(pos);
            break;
        }
    }
    let events = probe.ambiguity_events;
    let queries = oracle.query_count() - start;
    Ok(finish_search(ds, sorted, mean, boundary, queries, events))
}

/// Sorts point indices by distance to `center`, ties by index.
pub fn sort_by_distance(ds: &Dataset, points: &[usize], center: &[f64]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = points.iter().map(|&i| (ds.dist_to(i, center), i)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Runs SSAC for `params.k` rounds over every point of `ds`.
///
/// Group representatives persist across rounds, so a point left over from an
/// already extracted cluster is recognized as such and cannot seed a second
/// copy of it. A round fails when no sampled point lands in a group that has
/// not been extracted yet, or when nothing is left to sample; the run stops
/// there with `failed = true`.
pub fn run_ssac(ds: &Dataset, oracle: &mut Oracle<'_>, params: &SsacParams) -> Result<SsacOutput> {
    params.validate()?;
    if ds.is_empty() {
        return Err(Error::Usage("dataset is empty".into()));
    }
    if oracle.dataset().len() != ds.len() {
        return Err(Error::Usage(
            "oracle and dataset disagree on the number of points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let k = params.k;
    let r = params.sample_size();
    let variant = params.variant;

    let mut remaining: Vec<usize> = (0..ds.len()).collect();
    let mut groups: Vec<Group> = Vec::with_capacity(k);
    let mut labels = vec![None; ds.len()];
    let mut clusters = Vec::with_capacity(k);
    let mut rounds = Vec::with_capacity(k);
    let mut failed = false;

    for round in 0..k {
        let q_start = oracle.query_count();
        let take = r.min(remaining.len());
        let sample: Vec<usize> = index::sample(&mut rng, remaining.len(), take)
            .into_iter()
            .map(|pos| remaining[pos])
            .collect();

        // phase 1
        let mut drawn: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        let mut unassigned = 0;
        for &x in &sample {
            let reps: Vec<usize> = groups.iter().map(|g| g.rep).collect();
            match oracle.cluster_assignment_query(x, &reps, k)? {
                Assignment::Group(g) => {
                    groups[g].add(x, ds, variant);
                    drawn[g].push(x);
                }
                Assignment::NewGroup => {
                    groups.push(Group::new(x, ds));
                    drawn.push(vec![x]);
                }
                Assignment::NotSure => unassigned += 1,
            }
        }
        let queries_phase1 = oracle.query_count() - q_start;

        let chosen = (0..groups.len())
            .filter(|&g| !groups[g].extracted && !drawn[g].is_empty())
            .max_by(|&a, &b| drawn[a].len().cmp(&drawn[b].len()).then(b.cmp(&a)));
        let Some(p) = chosen else {
            rounds.push(RoundRecord {
                round,
                pool_size: remaining.len(),
                sampled: sample.len(),
                unassigned,
                group: None,
                group_size: 0,
                empirical_mean: None,
                threshold: None,
                cluster_size: 0,
                phase1_failed: true,
                queries_phase1,
                queries_phase2: 0,
                ambiguity_events: 0,
            });
            failed = true;
            break;
        };
        let known = &drawn[p];
        let mean = Point::mean_of(ds.dim(), known.iter().map(|&x| ds.point(x)))
            .expect("chosen group is nonempty");

        // phase 2
        let sorted = sort_by_distance(ds, &remaining, mean.coords());
        let outcome = binary_search(
            &sorted,
            oracle,
            variant.anchor_policy(),
            known,
            mean.coords(),
            params.beta,
            &mut rng,
        )?;
        let members: Vec<usize> = match outcome.boundary {
            // everything before the boundary, minus ties at the boundary distance
            Some(_) => sorted
                .iter()
                .copied()
                .filter(|&x| outcome.threshold.contains(ds.dist_to(x, mean.coords())))
                .collect(),
            None => sorted.clone(),
        };
        groups[p].extracted = true;
        let id = clusters.len();
        for &x in &members {
            labels[x] = Some(id);
        }
        let pool_size = remaining.len();
        remaining.retain(|&x| labels[x].is_none());
        let center = Point::mean_of(ds.dim(), members.iter().map(|&x| ds.point(x)))
            .unwrap_or_else(|| mean.clone());
        rounds.push(RoundRecord {
            round,
            pool_size,
            sampled: sample.len(),
            unassigned,
            group: Some(p),
            group_size: known.len(),
            empirical_mean: Some(mean),
            threshold: Some(outcome.threshold),
            cluster_size: members.len(),
            phase1_failed: false,
            queries_phase1,
            queries_phase2: outcome.queries,
            ambiguity_events: outcome.ambiguity_events,
        });
        let mut members = members;
        members.sort_unstable();
        clusters.push(RecoveredCluster {
            group: p,
            members,
            center,
        });
    }

    Ok(SsacOutput {
        labels,
        clusters,
        rounds,
        failed,
        delta: params.delta,
    })
}

/// Which distance-weak model a coverage check targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakModel {
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub nu: f64,
    pub rho: f64,
}

impl TheoremParams {
    /// Requires `0 < epsilon <= (gamma - 1) / 2`.
    pub fn new(epsilon: f64, gamma: f64, nu: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= (gamma - 1.0) / 2.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, (gamma - 1) / 2] = (0, {}], got {epsilon}",
                (gamma - 1.0) / 2.0
            )));
        }
        Ok(Self {
            epsilon,
            gamma,
            nu,
            rho,
        })
    }

    /// Coverage constant `c`: a point within `c * r(C_i)` of each center is required.
    pub fn coverage_constant(&self, model: WeakModel) -> f64 {
        let base = match model {
            WeakModel::Local => (2.0 * self.rho - 1.0).min(self.gamma - self.nu + 1.0),
            WeakModel::Global => 2.0 * self.rho - 1.0,
        };
        base - 2.0 * self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub constant: f64,
    /// Per cluster: smallest member distance to the center over the radius
    /// (0 for zero-radius clusters).
    pub min_ratios: Vec<f64>,
    pub covered: Vec<bool>,
    pub satisfied: bool,
}

/// Checks that every true cluster has a member strictly within
/// `c * r(C_i)` of its center, `c` being the model's coverage constant.
pub fn check_theorem_condition(
    ds: &Dataset,
    truth: &Clustering,
    tp: &TheoremParams,
    model: WeakModel,
) -> ConditionReport {
    let c = tp.coverage_constant(model);
    let mut min_dist = vec![f64::INFINITY; truth.k()];
    for i in 0..ds.len() {
        let l = truth.label(i);
        min_dist[l] = min_dist[l].min(ds.dist_to(i, truth.center(l).coords()));
    }
    let covered: Vec<bool> = (0..truth.k())
        .map(|l| c > 0.0 && min_dist[l] < c * truth.radius(l))
        .collect();
    let min_ratios = (0..truth.k())
        .map(|l| {
            let r = truth.radius(l);
            if r > 0.0 {
                min_dist[l] / r
            } else {
                0.0
            }
        })
        .collect();
    ConditionReport {
        constant: c,
        min_ratios,
        satisfied: covered.iter().all(|&b| b),
        covered,
    }
}

/// Maps the single weakness knob onto oracle parameters: `rho = c_dist` and
/// `nu = max(1, gamma) + 2 (1 - c_dist)`.
pub fn map_cdist_params(c_dist: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(c_dist > 0.0 && c_dist <= 1.0) {
        return Err(Error::Usage(format!(
            "c_dist must lie in (0, 1], got {c_dist}"
        )));
    }
    Ok((gamma.max(1.0) + 2.0 * (1.0 - c_dist), c_dist))
}

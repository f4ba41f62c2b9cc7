//! Simulated oracles answering weak same-cluster queries.
//!
//! An oracle holds the ground-truth clustering and decides, per pair, whether
//! it can answer. The two distance-weak models abstain ([`Answer::NotSure`])
//! when a cross-cluster pair is geometrically confusing or a same-cluster pair
//! is too far apart; every other answer is truthful.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Clustering, Dataset};

/// Response to a weak same-cluster query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Answer {
    Same,
    NotSure,
    Different,
}

impl Answer {
    /// Numeric encoding: 1, 0, -1.
    pub fn value(self) -> i8 {
        match self {
            Answer::Same => 1,
            Answer::NotSure => 0,
            Answer::Different => -1,
        }
    }

    pub fn is_definite(self) -> bool {
        !matches!(self, Answer::NotSure)
    }

    fn truthful(same: bool) -> Self {
        if same {
            Answer::Same
        } else {
            Answer::Different
        }
    }
}

/// Which abstention model the oracle follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OracleKind {
    Perfect,
    /// Abstains on close cross-cluster pairs (`nu`) and far same-cluster pairs (`rho`).
    LocalDistanceWeak {
        nu: f64,
        rho: f64,
    },
    /// Abstains on cross-cluster pairs with a point outside `rho * r` of its
    /// own center, and on far same-cluster pairs.
    GlobalDistanceWeak {
        rho: f64,
    },
}

impl OracleKind {
    pub fn local(nu: f64, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if !nu.is_finite() || nu < 1.0 {
            return Err(Error::Usage(format!(
                "nu must be a finite value >= 1, got {nu}"
            )));
        }
        Ok(OracleKind::LocalDistanceWeak { nu, rho })
    }

    pub fn global(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(OracleKind::GlobalDistanceWeak { rho })
    }

    pub fn name(&self) -> &'static str {
        match self {
            OracleKind::Perfect => "perfect",
            OracleKind::LocalDistanceWeak { .. } => "local",
            OracleKind::GlobalDistanceWeak { .. } => "global",
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("rho must lie in (0, 1], got {rho}")))
    }
}

/// Outcome of a pairwise cluster-assignment query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Index into the representative list that answered `Same` first.
    Group(usize),
    /// Every representative answered `Different` and fewer than `k` groups exist.
    NewGroup,
    /// No representative answered `Same` and the point cannot open a group.
    NotSure,
}

/// A weak oracle over a fixed dataset and ground truth.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    ds: &'a Dataset,
    truth: &'a Clustering,
    kind: OracleKind,
    // distance of each point to its own true center
    center_dist: Vec<f64>,
    queries: u64,
    resolver: Option<ChaCha8Rng>,
}

impl<'a> Oracle<'a> {
    pub fn new(ds: &'a Dataset, truth: &'a Clustering, kind: OracleKind) -> Result<Self> {
        if truth.labels().len() != ds.len() {
            return Err(Error::Usage(format!(
                "ground truth labels {} points but the dataset has {}",
                truth.labels().len(),
                ds.len()
            )));
        }
        let center_dist = (0..ds.len())
            .map(|i| ds.dist_to(i, truth.center(truth.label(i)).coords()))
            .collect();
        Ok(Self {
            ds,
            truth,
            kind,
            center_dist,
            queries: 0,
            resolver: None,
        })
    }

    /// Replaces every `NotSure` with a fair coin flip between `Same` and
    /// `Different`, drawn from a generator seeded with `seed`.
    pub fn with_random_resolution(mut self, seed: u64) -> Self {
        self.resolver = Some(ChaCha8Rng::seed_from_u64(seed));
        self
    }

    pub fn resolves_randomly(&self) -> bool {
        self.resolver.is_some()
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn truth(&self) -> &'a Clustering {
        self.truth
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn reset_counter(&mut self) {
        self.queries = 0;
    }

    /// The model's answer for a pair before any random resolution. Does not
    /// touch the query counter.
    pub fn evaluate(&self, i: usize, j: usize) -> Answer {
        let (li, lj) = (self.truth.label(i), self.truth.label(j));
        let same = li == lj;
        let abstains = match self.kind {
            OracleKind::Perfect => false,
            OracleKind::LocalDistanceWeak { nu, rho } => {
                let d = self.ds.dist(i, j);
                if same {
                    d > 2.0 * rho * self.truth.radius(li)
                } else {
                    d < (nu - 1.0) * self.center_dist[i].min(self.center_dist[j])
                }
            }
            OracleKind::GlobalDistanceWeak { rho } => {
                if same {
                    self.ds.dist(i, j) > 2.0 * rho * self.truth.radius(li)
                } else {
                    self.center_dist[i] > rho * self.truth.radius(li)
                        || self.center_dist[j] > rho * self.truth.radius(lj)
                }
            }
        };
        if abstains {
            Answer::NotSure
        } else {
            Answer::truthful(same)
        }
    }

    /// Asks whether points `i` and `j` share a cluster. Counts as one query.
    pub fn same_cluster_query(&mut self, i: usize, j: usize) -> Result<Answer> {
        let n = self.ds.len();
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        self.queries += 1;
        let answer = self.evaluate(i, j);
        Ok(match (answer, self.resolver.as_mut()) {
            (Answer::NotSure, Some(rng)) => Answer::truthful(rng.random_bool(0.5)),
            _ => answer,
        })
    }

    /// Places `x` among already-discovered groups by querying it against each
    /// group's representative in order.
    ///
    /// The first `Same` wins. If every answer is `Different` and fewer than
    /// `k` groups exist, the point founds a new group. An empty
    /// representative list always yields `NewGroup` without querying.
    pub fn cluster_assignment_query(
        &mut self,
        x: usize,
        reps: &[usize],
        k: usize,
    ) -> Result<Assignment> {
        let mut unsure = false;
        for (g, &rep) in reps.iter().enumerate() {
            match self.same_cluster_query(x, rep)? {
                Answer::Same => return Ok(Assignment::Group(g)),
                Answer::NotSure => unsure = true,
                Answer::Different => {}
            }
        }
        if !unsure && reps.len() < k {
            Ok(Assignment::NewGroup)
        } else {
            Ok(Assignment::NotSure)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Dataset, Clustering) {
        let ds = Dataset::from_scalars(&[0.0, 2.0, 6.0, 8.0]).unwrap();
        let truth = Clustering::from_labels(&ds, vec![0, 0, 1, 1], 2).unwrap();
        (ds, truth)
    }

    #[test]
    fn local_examples() {
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::local(2.0, 0.6).unwrap()).unwrap();
        // points 2.0 and 6.0 are indices 1 and 2
        assert_eq!(o.same_cluster_query(1, 2).unwrap(), Answer::Different);
        assert_eq!(o.same_cluster_query(0, 1).unwrap(), Answer::NotSure);
    }

    #[test]
    fn global_example() {
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::global(0.5).unwrap()).unwrap();
        assert_eq!(o.same_cluster_query(1, 2).unwrap(), Answer::NotSure);
    }

    #[test]
    fn self_query_is_same_for_every_kind() {
        let (ds, truth) = fixture();
        for kind in [
            OracleKind::Perfect,
            OracleKind::local(3.0, 0.1).unwrap(),
            OracleKind::global(0.1).unwrap(),
        ] {
            let mut o = Oracle::new(&ds, &truth, kind).unwrap();
            for i in 0..ds.len() {
                assert_eq!(o.same_cluster_query(i, i).unwrap(), Answer::Same);
            }
        }
    }

    #[test]
    fn parameter_ranges() {
        assert!(OracleKind::local(0.99, 0.5).is_err());
        assert!(OracleKind::local(1.0, 0.0).is_err());
        assert!(OracleKind::local(1.0, 1.01).is_err());
        assert!(OracleKind::local(f64::NAN, 0.5).is_err());
        assert!(OracleKind::global(0.0).is_err());
        assert!(OracleKind::global(1.0).is_ok());
    }

    #[test]
    fn out_of_range_index() {
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::Perfect).unwrap();
        assert!(matches!(
            o.same_cluster_query(0, 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn counter() {
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::global(0.5).unwrap()).unwrap();
        assert_eq!(o.query_count(), 0);
        o.same_cluster_query(0, 1).unwrap();
        o.same_cluster_query(1, 2).unwrap();
        o.same_cluster_query(3, 3).unwrap();
        assert_eq!(o.query_count(), 3);
        o.reset_counter();
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn assignment_protocol() {
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::Perfect).unwrap();
        // point 3 (8.0) shares a cluster with rep 2 (6.0), listed second
        assert_eq!(
            o.cluster_assignment_query(3, &[0, 2], 2).unwrap(),
            Assignment::Group(1)
        );
        assert_eq!(o.query_count(), 2);

        // all Different with room for another group
        let ds3 = Dataset::from_scalars(&[0.0, 10.0, 20.0]).unwrap();
        let t3 = Clustering::from_labels(&ds3, vec![0, 1, 2], 3).unwrap();
        let mut o3 = Oracle::new(&ds3, &t3, OracleKind::Perfect).unwrap();
        assert_eq!(
            o3.cluster_assignment_query(2, &[0, 1], 3).unwrap(),
            Assignment::NewGroup
        );
        // no room left
        assert_eq!(
            o3.cluster_assignment_query(2, &[0, 1], 2).unwrap(),
            Assignment::NotSure
        );
        assert_eq!(
            o3.cluster_assignment_query(2, &[], 3).unwrap(),
            Assignment::NewGroup
        );
    }

    #[test]
    fn assignment_different_then_not_sure() {
        // Local(2, 0.6): 0 vs 3 is Different, 0 vs 1 is NotSure
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::local(2.0, 0.6).unwrap()).unwrap();
        assert_eq!(o.evaluate(0, 3), Answer::Different);
        assert_eq!(o.evaluate(0, 1), Answer::NotSure);
        assert_eq!(
            o.cluster_assignment_query(0, &[3, 1], 2).unwrap(),
            Assignment::NotSure
        );
        assert_eq!(o.query_count(), 2);
    }

    #[test]
    fn random_resolution_never_abstains() {
        let (ds, truth) = fixture();
        let mut o = Oracle::new(&ds, &truth, OracleKind::global(0.1).unwrap())
            .unwrap()
            .with_random_resolution(7);
        let mut seen = [0usize; 2];
        for _ in 0..200 {
            match o.same_cluster_query(1, 2).unwrap() {
                Answer::Same => seen[0] += 1,
                Answer::Different => seen[1] += 1,
                Answer::NotSure => panic!("resolved oracle abstained"),
            }
        }
        assert!(seen[0] > 50 && seen[1] > 50, "{seen:?}");
        assert_eq!(o.query_count(), 200);
    }

    #[test]
    fn answer_values() {
        assert_eq!(Answer::Same.value(), 1);
        assert_eq!(Answer::NotSure.value(), 0);
        assert_eq!(Answer::Different.value(), -1);
    }
}

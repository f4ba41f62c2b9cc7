use ssac::datagen::{generate_synthetic, SynthConfig};
use ssac::eval::score;
use ssac::oracle::{Oracle, OracleKind};
use ssac::ssac::{run_ssac, SsacParams, Variant};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// With a perfect oracle, a round whose empirical mean lands within
/// eps * r of the true center (eps = (gamma - 1) / 2) extracts exactly the
/// still-unassigned part of one true cluster.
#[test]
fn close_mean_rounds_are_exact() {
    let mut checked = 0;
    for seed in 0..300 {
        let data = generate_synthetic(&SynthConfig::default().with_seed(seed)).unwrap();
        let eps = (data.realized_gamma.finite().unwrap() - 1.0) / 2.0;
        let mut o = Oracle::new(&data.dataset, &data.truth, OracleKind::Perfect).unwrap();
        let params = SsacParams::new(3, 30.0).with_seed(seed);
        let out = run_ssac(&data.dataset, &mut o, &params).unwrap();

        let mut taken = vec![false; data.dataset.len()];
        let mut clusters = out.clusters.iter();
        for round in &out.rounds {
            let Some(mean) = &round.empirical_mean else {
                continue;
            };
            let cluster = clusters.next().unwrap();
            let t = data.truth.label(cluster.members[0]);
            let expected: Vec<usize> = data.truth.members(t).filter(|&i| !taken[i]).collect();
            for &i in &cluster.members {
                taken[i] = true;
            }
            if dist(mean.coords(), data.truth.center(t).coords()) <= eps * data.truth.radius(t) {
                checked += 1;
                assert_eq!(
                    cluster.members, expected,
                    "seed {seed} round {}",
                    round.round
                );
            }
        }
    }
    assert!(checked > 50, "only {checked} qualifying rounds");
}

#[test]
fn unit_local_oracle_runs_match_perfect_runs() {
    for seed in 0..30 {
        let data = generate_synthetic(&SynthConfig::default().with_seed(seed)).unwrap();
        for variant in [Variant::Improved, Variant::Vanilla] {
            let params = SsacParams::new(3, 5.0)
                .with_variant(variant)
                .with_seed(seed);
            let mut p = Oracle::new(&data.dataset, &data.truth, OracleKind::Perfect).unwrap();
            let mut w = Oracle::new(
                &data.dataset,
                &data.truth,
                OracleKind::local(1.0, 1.0).unwrap(),
            )
            .unwrap();
            let a = run_ssac(&data.dataset, &mut p, &params).unwrap();
            let b = run_ssac(&data.dataset, &mut w, &params).unwrap();
            assert_eq!(a, b);
            assert_eq!(p.query_count(), w.query_count());
        }
    }
}

#[test]
fn complete_runs_partition_the_points() {
    for seed in 0..50 {
        let data = generate_synthetic(&SynthConfig::default().with_seed(seed)).unwrap();
        let kind = OracleKind::global(0.7).unwrap();
        let mut o = Oracle::new(&data.dataset, &data.truth, kind).unwrap();
        let out = run_ssac(
            &data.dataset,
            &mut o,
            &SsacParams::new(3, 10.0).with_seed(seed),
        )
        .unwrap();
        let mut owner = vec![None; data.dataset.len()];
        for (id, c) in out.clusters.iter().enumerate() {
            for &i in &c.members {
                assert!(owner[i].is_none(), "point {i} assigned twice");
                owner[i] = Some(id);
            }
        }
        assert_eq!(owner, out.labels);
        if !out.failed {
            assert_eq!(out.clusters.len(), 3);
        }
        let r = score(&data.truth, &out);
        assert!((0.0..=1.0).contains(&r.accuracy));
        assert_eq!(r.queries_phase1 + r.queries_phase2, o.query_count());
    }
}

use ispca::sim::{run_simulation, Approach, SimConfig};

fn small(n: usize, replicates: usize) -> SimConfig {
    SimConfig {
        n,
        p: 40,
        b: 4,
        replicates,
        seed: 9,
        approaches: vec![Approach::OracleIsPca],
        ..Default::default()
    }
}

#[test]
fn oracle_cosine_improves_with_n() {
    let means: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| {
            run_simulation(&small(n, 24))
                .unwrap()
                .mean_cosine(Approach::OracleIsPca)
                .unwrap()
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
}

#[test]
fn metrics_stay_in_range() {
    let cfg = SimConfig {
        n: 20,
        p: 40,
        b: 4,
        replicates: 3,
        seed: 4,
        ..Default::default()
    };
    let res = run_simulation(&cfg).unwrap();
    assert!(res.failures.is_empty(), "{:?}", res.failures);
    assert!(!res.records.is_empty());
    for r in &res.records {
        assert!((0.0..=1.0 + 1e-12).contains(&r.cosine), "{r:?}");
        assert!(r.ratio > 0.0 && r.ratio.is_finite(), "{r:?}");
    }
    assert_eq!(res.summary.len(), Approach::ALL.len());
}

#[test]
fn identical_across_thread_counts() {
    let cfg = SimConfig {
        n: 20,
        p: 40,
        b: 4,
        replicates: 6,
        seed: 17,
        ..Default::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_simulation(&cfg).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.records.len(), four.records.len());
    for (a, b) in one.records.iter().zip(&four.records) {
        assert_eq!(
            (a.replicate, a.approach, a.block),
            (b.replicate, b.approach, b.block)
        );
        assert_eq!(a.cosine.to_bits(), b.cosine.to_bits());
        assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
    }
}

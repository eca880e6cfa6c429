use decopath::dynamics::{curve_distance, excursion_curve, extract_profiles, return_stats, TailOptions};
use decopath::experiments::FieldSpec;
use decopath::fastslow::{dynamics_endpoints, EnsembleConfig};
use decopath::par::Exec;
use decopath::rng::stream;
use decopath::stats::{hill, quantile};
use decopath::{Driver, DriverSpec};

fn pm(v0: Vec<f64>) -> Driver {
    Driver::new(&DriverSpec::Pm { gamma: 2.0 / 3.0, v0 }).unwrap()
}

#[test]
fn pm_return_times_have_index_one_and_a_half() {
    let d = pm(vec![1.0]);
    let (_, rs) = d.observe_with_returns(1_000_000, 10_000, &mut stream(41, 0)).unwrap();
    let report = return_stats(&rs, &TailOptions::default()).unwrap();
    let s = report.section(1).unwrap();
    assert!(s.count > 100_000);
    assert!((s.hill.alpha - 1.5).abs() < 0.15, "{}", s.hill.alpha);
}

#[test]
fn pm_endpoint_tail_shadows_the_stable_index() {
    let d = pm(vec![1.0]);
    let vf = FieldSpec::Identity { dim: 1 }.build().unwrap();
    let cfg = EnsembleConfig {
        n: 10_000,
        m: 4000,
        seed: 42,
        burn_in: 10_000,
        xi: vec![0.0],
        k: 200,
    };
    let w: Vec<f64> = dynamics_endpoints(&d, &vf, &cfg, Exec::default())
        .unwrap()
        .iter()
        .map(|x| x[0].abs())
        .collect();
    let h = hill(&w, 200).unwrap();
    assert!((h.alpha - 1.5).abs() < 0.2, "{}", h.alpha);
}

#[test]
fn pm_profile_is_linear_along_the_observable() {
    let v0 = vec![1.0, -0.5];
    let d = pm(v0.clone());
    let (series, rs) = d.observe_with_returns(2_000_000, 10_000, &mut stream(43, 0)).unwrap();
    let threshold = 50;
    let est = extract_profiles(&series, &rs, threshold, 51).unwrap();
    assert_eq!(est.len(), 1);
    let p = &est[0];
    let slack = 4.0 / threshold as f64;
    for (t, row) in p.grid.iter().zip(&p.median) {
        for (v, c) in row.iter().zip(&v0) {
            assert!((v - t * c).abs() < slack, "t {t}: {v} vs {}", t * c);
        }
    }
    for (m, c) in p.mean_endpoint.iter().zip(&v0) {
        assert!((m - c).abs() < slack, "{m} vs {c}");
    }
}

#[test]
fn billiard_profile_residual_shrinks_with_depth() {
    let d = Driver::new(&DriverSpec::Billiard { beta: 3.0, s_cut: 0.2 }).unwrap();
    let (series, rs) = d.observe_with_returns(1_000_000, 10_000, &mut stream(44, 0)).unwrap();
    let medians: Vec<f64> = [5, 10, 20]
        .into_iter()
        .map(|t| {
            let p = &extract_profiles(&series, &rs, t, 51).unwrap()[0];
            let dists: Vec<f64> = rs
                .returns()
                .iter()
                .filter(|r| r.label == 1 && r.time > t && r.start + r.time as usize <= series.len())
                .map(|r| {
                    let c = excursion_curve(&series, r.start, r.time as usize, 51);
                    curve_distance(&c, &p.median)
                })
                .collect();
            quantile(&dists, 0.5).unwrap()
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

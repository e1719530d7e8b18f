mod common;

use common::reference_fixture::reference_store;
use proptest::prelude::*;
use specplan_core::acceptance::GeometricCurve;
use specplan_core::metrics::{metrics_for, ConfigTriple};
use specplan_core::planner::{
    enumerate_configs, pareto_front, select_best, EvaluatedConfig, Objective, ParetoPoint,
};
use specplan_core::profile::{
    AcceptancePoint, DevicePlatform, DraftModel, ProfileStore, VariantProfile, VerifierSpec,
};
use specplan_core::report::{build_report, Cell};
use specplan_core::Error;

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Copy of `store` with variants and verifiers passed through the given
/// edits.
fn edited(
    store: &ProfileStore,
    variant: impl Fn(&mut VariantProfile),
    verifier: impl Fn(&mut VerifierSpec),
) -> ProfileStore {
    let mut s = ProfileStore::new();
    for d in store.devices() {
        s.insert_device(d.clone()).unwrap();
    }
    for m in store.models() {
        s.insert_model(m.clone()).unwrap();
    }
    for v in store.variants() {
        let mut v = v.clone();
        variant(&mut v);
        s.insert_variant(v).unwrap();
    }
    for t in store.verifiers() {
        let mut t = t.clone();
        verifier(&mut t);
        s.insert_verifier(t).unwrap();
    }
    for a in store.acceptance_points() {
        s.insert_acceptance(a.clone()).unwrap();
    }
    s
}

#[test]
fn enumeration_counts_and_order() {
    let s = reference_store();
    let all = enumerate_configs(&s, "llama70b", "jetson", 2, 10).unwrap();
    assert_eq!(all.len(), 9 * 2);
    let keys: Vec<_> = all
        .iter()
        .map(|c| (c.config.model_id.clone(), c.config.quant_id.clone(), c.config.k))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let single = enumerate_configs(&s, "llama70b", "jetson", 2, 2).unwrap();
    assert_eq!(single.len(), 2);
    assert!(single.iter().all(|c| c.config.k == 2));

    assert!(matches!(
        enumerate_configs(&s, "llama70b", "rpi9", 2, 10),
        Err(Error::NotFound(_))
    ));
    assert!(enumerate_configs(&s, "gpt", "jetson", 2, 10).is_err());
    assert!(enumerate_configs(&s, "llama70b", "jetson", 5, 4).is_err());
}

#[test]
fn enumeration_without_curves_is_empty() {
    let mut s = reference_store();
    s.insert_verifier(VerifierSpec {
        target_id: "other".into(),
        price_per_mtok: 1.0,
        t_verify_s: 0.5,
    })
    .unwrap();
    assert!(enumerate_configs(&s, "other", "jetson", 2, 10).unwrap().is_empty());
}

#[test]
fn cost_is_device_independent_on_fixture() {
    let s = reference_store();
    let rpi5 = enumerate_configs(&s, "qwen32b", "rpi5", 2, 10).unwrap();
    let rpi4b = enumerate_configs(&s, "qwen32b", "rpi4b", 2, 10).unwrap();
    assert_eq!(rpi5.len(), rpi4b.len());
    for (a, b) in rpi5.iter().zip(&rpi4b) {
        assert_eq!(a.config.k, b.config.k);
        assert_eq!(
            a.metrics.cost_eff_tok_per_dollar.unwrap().to_bits(),
            b.metrics.cost_eff_tok_per_dollar.unwrap().to_bits()
        );
    }
}

#[test]
fn price_and_latency_separation() {
    let s = reference_store();
    let pricier = edited(&s, |_| {}, |t| {
        t.price_per_mtok *= 3.0;
        t.t_verify_s = 1.7;
    });
    let faster = edited(
        &s,
        |v| {
            v.v_d *= 2.0;
            v.power_w = v.power_w.map(|p| p * 5.0);
        },
        |t| t.t_verify_s = 0.2,
    );
    for device in ["rpi5", "jetson"] {
        let base = enumerate_configs(&s, "llama70b", device, 2, 10).unwrap();
        let p = enumerate_configs(&pricier, "llama70b", device, 2, 10).unwrap();
        let f = enumerate_configs(&faster, "llama70b", device, 2, 10).unwrap();
        for ((b, p), f) in base.iter().zip(&p).zip(&f) {
            assert_eq!(b.metrics.energy_j_per_tok, p.metrics.energy_j_per_tok);
            assert_eq!(b.metrics.cost_eff_tok_per_dollar, f.metrics.cost_eff_tok_per_dollar);
        }
    }
}

#[test]
fn selection_examples() {
    let s = reference_store();
    let jetson = enumerate_configs(&s, "llama70b", "jetson", 2, 10).unwrap();
    let r = select_best(&jetson, Objective::MaxGoodput).unwrap();
    assert_eq!(r.winner.config.model_id, "llama-3.2-1b-inst");
    assert_eq!(r.winner.config.k, 8);
    assert!((r.winner.metrics.goodput_tok_s - 7.65).abs() < 0.01);

    for device in ["rpi4b", "rpi5", "jetson"] {
        let c = enumerate_configs(&s, "llama70b", device, 2, 10).unwrap();
        let r = select_best(&c, Objective::MinCostPerToken).unwrap();
        assert_eq!((r.winner.config.model_id.as_str(), r.winner.config.k), ("llama-3.1-8b-inst", 2));
        assert!((r.winner.metrics.cost_eff_tok_per_dollar.unwrap() / 1401e3 - 1.0).abs() < 0.001);
    }

    let rpi4b = enumerate_configs(&s, "llama70b", "rpi4b", 2, 10).unwrap();
    let err = select_best(&rpi4b, Objective::MinEnergyPerToken).unwrap_err();
    assert_eq!(err.to_string(), "objective infeasible: no power data");
}

#[test]
fn winner_is_member_and_extremal() {
    let s = reference_store();
    for target in ["llama70b", "qwen32b"] {
        for device in ["rpi5", "jetson"] {
            let c = enumerate_configs(&s, target, device, 2, 10).unwrap();
            for o in Objective::ALL {
                let r = select_best(&c, o).unwrap();
                assert!(c.contains(&r.winner));
                let value = |e: &EvaluatedConfig| match o {
                    Objective::MaxGoodput => e.metrics.goodput_tok_s,
                    Objective::MinCostPerToken => e.metrics.cost_eff_tok_per_dollar.unwrap(),
                    Objective::MinEnergyPerToken => -e.metrics.energy_j_per_tok.unwrap(),
                };
                let best = c.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(value(&r.winner), best);
            }
        }
    }
}

fn single_curve_store(alphas: &[f64]) -> ProfileStore {
    let mut s = ProfileStore::new();
    s.insert_device(DevicePlatform {
        device_id: "dev".into(),
        display_name: "Device".into(),
        has_power_data: true,
    })
    .unwrap();
    s.insert_verifier(VerifierSpec {
        target_id: "tgt".into(),
        price_per_mtok: 0.9,
        t_verify_s: 0.5,
    })
    .unwrap();
    s.insert_model(DraftModel {
        model_id: "m".into(),
        family: "f".into(),
        params_billions: 1.0,
    })
    .unwrap();
    s.insert_variant(VariantProfile {
        model_id: "m".into(),
        quant_id: "Q4_K_M".into(),
        device_id: "dev".into(),
        v_d: 20.0,
        power_w: Some(10.0),
    })
    .unwrap();
    for (i, &alpha) in alphas.iter().enumerate() {
        s.insert_acceptance(AcceptancePoint {
            model_id: "m".into(),
            quant_id: "Q4_K_M".into(),
            target_id: "tgt".into(),
            k: i as u32 + 2,
            alpha,
        })
        .unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cost_optimum_at_k2_for_non_increasing_curves(
        start in 0.0f64..=1.0,
        drops in prop::collection::vec(0.0f64..0.2, 8),
    ) {
        let mut alphas = vec![start];
        for d in drops {
            let last = *alphas.last().unwrap();
            alphas.push((last - d).max(0.0));
        }
        let s = single_curve_store(&alphas);
        let c = enumerate_configs(&s, "tgt", "dev", 2, 10).unwrap();
        let r = select_best(&c, Objective::MinCostPerToken).unwrap();
        prop_assert_eq!(r.winner.config.k, 2);
    }

    #[test]
    fn pareto_matches_brute_force(
        pts in prop::collection::vec((0u8..30, 0u8..30), 0..200),
    ) {
        let points: Vec<ParetoPoint> = pts
            .iter()
            .map(|&(g, e)| ParetoPoint::new(f64::from(g), f64::from(e)))
            .collect();
        let front = pareto_front(&points);
        let mut brute: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| !points.iter().any(|q| q.dominates(p)))
            .map(|p| (p.goodput, p.energy))
            .collect();
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got: Vec<(f64, f64)> = front.iter().map(|p| (p.goodput, p.energy)).collect();
        prop_assert!(got.windows(2).all(|w| w[0].0 <= w[1].0));
        let mut got_sorted = got.clone();
        got_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(got_sorted, brute);
    }
}

fn geometric_configs(beta: f64, v_d: f64) -> Vec<EvaluatedConfig> {
    let curve = GeometricCurve::new(beta).unwrap();
    (2..=10)
        .map(|k| EvaluatedConfig {
            config: ConfigTriple {
                model_id: "m".into(),
                quant_id: "q".into(),
                k,
                device_id: "d".into(),
                target_id: "t".into(),
            },
            alpha: curve.alpha(k),
            metrics: metrics_for(v_d, Some(10.0), curve.alpha(k), k, 0.5, 0.9).unwrap(),
        })
        .collect()
}

#[test]
fn energy_optimum_at_k2_under_geometric_curves() {
    for i in 1..=19 {
        let beta = f64::from(i) * 0.05;
        for v_d in [1.0, 10.0, 100.0] {
            let r = select_best(&geometric_configs(beta, v_d), Objective::MinEnergyPerToken).unwrap();
            assert_eq!(r.winner.config.k, 2, "beta={beta}");
        }
    }
}

#[test]
fn goodput_k_star_non_decreasing_in_speed() {
    for beta in [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        let ks: Vec<u32> = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
            .iter()
            .map(|&v| {
                select_best(&geometric_configs(beta, v), Objective::MaxGoodput)
                    .unwrap()
                    .winner
                    .config
                    .k
            })
            .collect();
        assert!(ks.windows(2).all(|w| w[0] <= w[1]), "beta={beta}: {ks:?}");
    }
}

#[test]
fn fixture_rpi5_dominated_by_jetson() {
    let s = reference_store();
    for target in ["llama70b", "qwen32b"] {
        let rpi5 = enumerate_configs(&s, target, "rpi5", 2, 10).unwrap();
        let jetson = enumerate_configs(&s, target, "jetson", 2, 10).unwrap();
        for (r, j) in rpi5.iter().zip(&jetson) {
            assert_eq!((&r.config.model_id, r.config.k), (&j.config.model_id, j.config.k));
            let r = ParetoPoint::from_evaluated(r).unwrap();
            let j = ParetoPoint::from_evaluated(j).unwrap();
            assert!(j.dominates(&r), "{:?} vs {:?}", j, r);
        }
        // and none of them survives the joint front
        let all: Vec<ParetoPoint> = rpi5
            .iter()
            .chain(&jetson)
            .filter_map(ParetoPoint::from_evaluated)
            .collect();
        assert!(pareto_front(&all)
            .iter()
            .all(|p| p.config.as_ref().unwrap().device_id == "jetson"));
    }
}

#[test]
fn fixture_points_below_iso_power_curve() {
    let s = reference_store();
    for target in ["llama70b", "qwen32b"] {
        for device in ["rpi5", "jetson"] {
            for c in enumerate_configs(&s, target, device, 1, 10).unwrap() {
                let v = s
                    .lookup_variant(&c.config.model_id, &c.config.quant_id, device)
                    .unwrap();
                let e = c.metrics.energy_j_per_tok.unwrap();
                assert!(e * c.metrics.goodput_tok_s < v.power_w.unwrap());
            }
        }
    }
}

#[test]
fn report_shape_and_determinism() {
    let s = reference_store();
    let targets = strings(&["llama70b", "qwen32b"]);
    let devices = strings(&["rpi4b", "rpi5", "jetson"]);
    let r = build_report(&s, &targets, &devices, 2, 10).unwrap();
    assert_eq!(r.rows.len(), 18);
    assert_eq!(r.infeasible_count(), 2);
    for row in &r.rows {
        if let Cell::Infeasible(reason) = &row.cell {
            assert_eq!(reason, "no power data");
            assert_eq!(row.device_id, "rpi4b");
        }
    }
    let again = build_report(&s, &targets, &devices, 2, 10).unwrap();
    assert_eq!(r.to_text(), again.to_text());
    assert_eq!(r.to_tsv(), again.to_tsv());
    assert!(r.to_text().contains("no power data"));

    let one = build_report(&s, &strings(&["qwen32b"]), &strings(&["jetson"]), 2, 10).unwrap();
    assert_eq!(one.rows.len(), 3);
    assert!(build_report(&s, &[], &devices, 2, 10).is_err());
}

#[test]
fn report_tsv_schema() {
    let s = reference_store();
    let r = build_report(&s, &strings(&["llama70b"]), &strings(&["rpi4b"]), 2, 10).unwrap();
    let tsv = r.to_tsv();
    let mut lines = tsv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "target\tdevice\tobjective\tmodel_id\tquant_id\tk\tgoodput_tok_s\tcost_eff_ktok_per_dollar\tenergy_j_per_tok"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 9));
    assert_eq!(rows[0][..6], ["llama70b", "rpi4b", "goodput", "llama-3.2-1b-inst", "Q4_K_M", "2"]);
    assert_eq!(rows[0][8], "");
    assert_eq!(rows[2][2], "energy");
    assert!(rows[2][3..].iter().all(|f| f.is_empty()));
}

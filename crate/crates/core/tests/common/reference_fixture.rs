//! Rebuilds the reference profile directory from the published
//! recommendation table by inverting the three round metrics.
//!
//! For a row reporting (G, η, E) at speculative length K with unit price p
//! and verification latency T:
//!
//!   α(K) = η·p − 1/K
//!   v_d  = K / ((Kα + 1)/G − T)
//!   P    = E·(Kα + 1)·v_d / K
//!
//! A drafter appearing in several rows on one device yields several v_d and
//! P estimates; the stored value minimises the worst relative error over
//! those rows. Curve points between measured K interpolate the expected
//! accepted-draft count K·α(K) linearly; beyond the last measured K that
//! count is held constant.
//!
//! This module only uses its own arithmetic, never the crate's metric
//! functions, so it can serve as an oracle for them.
#![allow(dead_code)]

use std::collections::BTreeMap;

use specplan_core::profile::{
    AcceptancePoint, DevicePlatform, DraftModel, ProfileStore, VariantProfile, VerifierSpec,
};

pub const T_VERIFY: f64 = 0.5;
pub const K_RANGE: (u32, u32) = (2, 10);
pub const QUANT: &str = "Q4_K_M";

pub const TARGETS: [(&str, f64); 2] = [("llama70b", 0.90), ("qwen32b", 0.59)];

pub const DEVICES: [(&str, &str, bool); 3] = [
    ("rpi4b", "Raspberry Pi 4B", false),
    ("rpi5", "Raspberry Pi 5", true),
    ("jetson", "Jetson AGX Orin", true),
];

pub const MODELS: [(&str, &str, f64); 4] = [
    ("llama-3.2-1b-inst", "llama", 1.0),
    ("llama-3.1-8b-inst", "llama", 8.0),
    ("qwen3-0.6b", "qwen", 0.6),
    ("qwen3-8b", "qwen", 8.0),
];

#[derive(Debug, Clone, Copy)]
pub struct TableRow {
    pub target: &'static str,
    pub device: &'static str,
    pub objective: &'static str,
    pub model: &'static str,
    pub k: u32,
    pub goodput: f64,
    /// Thousands of tokens per dollar.
    pub eta_k: f64,
    pub energy: Option<f64>,
}

const fn row(
    target: &'static str,
    device: &'static str,
    objective: &'static str,
    model: &'static str,
    k: u32,
    goodput: f64,
    eta_k: f64,
    energy: Option<f64>,
) -> TableRow {
    TableRow { target, device, objective, model, k, goodput, eta_k, energy }
}

/// The 16 feasible cells of the published table.
pub const TABLE: [TableRow; 16] = [
    row("llama70b", "rpi4b", "goodput", "llama-3.2-1b-inst", 2, 2.44, 1334.0, None),
    row("llama70b", "rpi4b", "cost", "llama-3.1-8b-inst", 2, 0.77, 1401.0, None),
    row("llama70b", "rpi5", "goodput", "llama-3.2-1b-inst", 6, 4.50, 763.0, Some(0.84)),
    row("llama70b", "rpi5", "cost", "llama-3.1-8b-inst", 2, 1.55, 1401.0, Some(3.75)),
    row("llama70b", "rpi5", "energy", "llama-3.2-1b-inst", 2, 3.76, 1334.0, Some(0.48)),
    row("llama70b", "jetson", "goodput", "llama-3.2-1b-inst", 8, 7.65, 623.0, Some(0.85)),
    row("llama70b", "jetson", "cost", "llama-3.1-8b-inst", 2, 4.35, 1401.0, Some(1.74)),
    row("llama70b", "jetson", "energy", "llama-3.2-1b-inst", 2, 4.60, 1334.0, Some(0.39)),
    row("qwen32b", "rpi4b", "goodput", "qwen3-0.6b", 2, 2.81, 1801.0, None),
    row("qwen32b", "rpi4b", "cost", "qwen3-8b", 2, 0.74, 2048.0, None),
    row("qwen32b", "rpi5", "goodput", "qwen3-0.6b", 7, 3.86, 828.0, Some(0.90)),
    row("qwen32b", "rpi5", "cost", "qwen3-8b", 2, 1.49, 2048.0, Some(3.86)),
    row("qwen32b", "rpi5", "energy", "qwen3-0.6b", 2, 3.48, 1801.0, Some(0.41)),
    row("qwen32b", "jetson", "goodput", "qwen3-0.6b", 10, 6.21, 633.0, Some(0.93)),
    row("qwen32b", "jetson", "cost", "qwen3-8b", 2, 4.14, 2048.0, Some(1.88)),
    row("qwen32b", "jetson", "energy", "qwen3-0.6b", 2, 4.08, 1801.0, Some(0.33)),
];

/// Cells reported as lacking power data.
pub const NO_POWER_CELLS: [(&str, &str); 2] = [("llama70b", "rpi4b"), ("qwen32b", "rpi4b")];

pub fn price_of(target: &str) -> f64 {
    TARGETS.iter().find(|t| t.0 == target).unwrap().1
}

pub fn alpha_of_row(r: &TableRow) -> f64 {
    r.eta_k * 1e3 * price_of(r.target) * 1e-6 - 1.0 / f64::from(r.k)
}

pub fn v_d_of_row(r: &TableRow) -> f64 {
    let k = f64::from(r.k);
    k / ((k * alpha_of_row(r) + 1.0) / r.goodput - T_VERIFY)
}

/// Power estimate of a row given a drafting throughput.
pub fn power_of_row(r: &TableRow, v_d: f64) -> Option<f64> {
    let k = f64::from(r.k);
    r.energy.map(|e| e * (k * alpha_of_row(r) + 1.0) * v_d / k)
}

fn g_of(v_d: f64, alpha: f64, k: u32) -> f64 {
    let k = f64::from(k);
    (k * alpha + 1.0) / (k / v_d + T_VERIFY)
}

fn e_of(p: f64, v_d: f64, alpha: f64, k: u32) -> f64 {
    let k = f64::from(k);
    p * k / v_d / (k * alpha + 1.0)
}

/// Ternary search for the minimiser of a quasi-convex function.
fn minimax(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Rounds to 6 significant digits.
pub fn sig6(x: f64) -> f64 {
    format!("{x:.5e}").parse().unwrap()
}

/// Measured α by (model, target) and K.
pub fn measured_alpha() -> BTreeMap<(&'static str, &'static str), BTreeMap<u32, f64>> {
    let mut out: BTreeMap<_, BTreeMap<u32, f64>> = BTreeMap::new();
    for r in &TABLE {
        out.entry((r.model, r.target))
            .or_default()
            .insert(r.k, alpha_of_row(r));
    }
    out
}

/// Full α(K) for K in `K_RANGE` from the measured points.
pub fn filled_curve(measured: &BTreeMap<u32, f64>) -> BTreeMap<u32, f64> {
    let accepted = |k: u32| f64::from(k) * measured[&k];
    (K_RANGE.0..=K_RANGE.1)
        .map(|k| {
            let below = measured.range(..=k).next_back().map(|(&k, _)| k);
            let above = measured.range(k..).next().map(|(&k, _)| k);
            let a = match (below, above) {
                (Some(lo), Some(hi)) if lo == hi => measured[&lo],
                (Some(lo), Some(hi)) => {
                    let t = f64::from(k - lo) / f64::from(hi - lo);
                    (accepted(lo) + t * (accepted(hi) - accepted(lo))) / f64::from(k)
                }
                (Some(lo), None) => accepted(lo) / f64::from(k),
                (None, Some(hi)) => measured[&hi],
                (None, None) => unreachable!(),
            };
            (k, a)
        })
        .collect()
}

/// Pooled (v_d, P) per (model, device).
pub fn pooled_variants() -> BTreeMap<(&'static str, &'static str), (f64, Option<f64>)> {
    let alphas = measured_alpha();
    let mut rows_by: BTreeMap<(&str, &str), Vec<TableRow>> = BTreeMap::new();
    for r in TABLE {
        rows_by.entry((r.model, r.device)).or_default().push(r);
    }
    rows_by
        .into_iter()
        .map(|(key, rows)| {
            let alpha = |r: &TableRow| alphas[&(r.model, r.target)][&r.k];
            let g_err = |v: f64| {
                rows.iter()
                    .map(|r| (g_of(v, alpha(r), r.k) / r.goodput - 1.0).abs())
                    .fold(0.0, f64::max)
            };
            let v_d = minimax(g_err, 0.01, 1000.0);
            let powered: Vec<&TableRow> = rows.iter().filter(|r| r.energy.is_some()).collect();
            let power = (!powered.is_empty()).then(|| {
                let e_err = |p: f64| {
                    powered
                        .iter()
                        .map(|r| (e_of(p, v_d, alpha(r), r.k) / r.energy.unwrap() - 1.0).abs())
                        .fold(0.0, f64::max)
                };
                sig6(minimax(e_err, 0.01, 1000.0))
            });
            (key, (sig6(v_d), power))
        })
        .collect()
}

pub fn reference_store() -> ProfileStore {
    let mut s = ProfileStore::new();
    for (id, name, power) in DEVICES {
        s.insert_device(DevicePlatform {
            device_id: id.into(),
            display_name: name.into(),
            has_power_data: power,
        })
        .unwrap();
    }
    for (id, price) in TARGETS {
        s.insert_verifier(VerifierSpec {
            target_id: id.into(),
            price_per_mtok: price,
            t_verify_s: T_VERIFY,
        })
        .unwrap();
    }
    for (id, family, params) in MODELS {
        s.insert_model(DraftModel {
            model_id: id.into(),
            family: family.into(),
            params_billions: params,
        })
        .unwrap();
    }
    for ((model, device), (v_d, power_w)) in pooled_variants() {
        s.insert_variant(VariantProfile {
            model_id: model.into(),
            quant_id: QUANT.into(),
            device_id: device.into(),
            v_d,
            power_w,
        })
        .unwrap();
    }
    for ((model, target), measured) in measured_alpha() {
        for (k, alpha) in filled_curve(&measured) {
            s.insert_acceptance(AcceptancePoint {
                model_id: model.into(),
                quant_id: QUANT.into(),
                target_id: target.into(),
                k,
                alpha: sig6(alpha),
            })
            .unwrap();
        }
    }
    s
}

/// Committed copy of the fixture, relative to the workspace root.
pub fn committed_fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/reference")
}

//! Search over the (model, quant, k) grid: enumeration, objective-optimal
//! selection and the goodput/energy Pareto front.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{evaluate_with_alpha, ConfigTriple, MetricsTriple};
use crate::profile::ProfileStore;

/// Speculative lengths searched unless told otherwise.
pub const DEFAULT_K_RANGE: (u32, u32) = (2, 10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    MaxGoodput,
    /// Equivalently, maximum accepted tokens per dollar.
    MinCostPerToken,
    MinEnergyPerToken,
}

impl Objective {
    pub const ALL: [Objective; 3] = [
        Objective::MaxGoodput,
        Objective::MinCostPerToken,
        Objective::MinEnergyPerToken,
    ];

    /// Short token used on the command line and in TSV output.
    pub fn token(self) -> &'static str {
        match self {
            Objective::MaxGoodput => "goodput",
            Objective::MinCostPerToken => "cost",
            Objective::MinEnergyPerToken => "energy",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Objective::MaxGoodput => "Max Goodput",
            Objective::MinCostPerToken => "Min Cost/tok",
            Objective::MinEnergyPerToken => "Min Energy",
        }
    }

    /// The scalar being optimised, oriented so that larger is better.
    /// `None` when the entry cannot be scored under this objective.
    fn score(self, m: &MetricsTriple) -> Option<f64> {
        match self {
            Objective::MaxGoodput => Some(m.goodput_tok_s),
            Objective::MinCostPerToken => m.cost_eff_tok_per_dollar,
            Objective::MinEnergyPerToken => m.energy_j_per_tok.map(|e| -e),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "goodput" => Ok(Objective::MaxGoodput),
            "cost" => Ok(Objective::MinCostPerToken),
            "energy" => Ok(Objective::MinEnergyPerToken),
            other => Err(Error::Domain(format!(
                "unknown objective {other:?} (expected goodput, cost or energy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedConfig {
    pub config: ConfigTriple,
    /// α(k) used for the evaluation.
    pub alpha: f64,
    pub metrics: MetricsTriple,
}

/// Evaluates every variant on `device_id` that has an acceptance curve for
/// `target_id`, at every k in `k_lo..=k_hi`.
///
/// Output order is (model, quant, k) ascending regardless of how the grid
/// was scheduled.
pub fn enumerate_configs(
    store: &ProfileStore,
    target_id: &str,
    device_id: &str,
    k_lo: u32,
    k_hi: u32,
) -> Result<Vec<EvaluatedConfig>> {
    if k_lo == 0 || k_hi < k_lo {
        return Err(Error::Domain(format!("invalid k range [{k_lo}, {k_hi}]")));
    }
    store.verifier(target_id)?;
    store.device(device_id)?;

    let grid: Vec<ConfigTriple> = store
        .variants_on(device_id)
        .filter(|v| store.has_curve(&v.model_id, &v.quant_id, target_id))
        .flat_map(|v| {
            (k_lo..=k_hi).map(move |k| ConfigTriple {
                model_id: v.model_id.clone(),
                quant_id: v.quant_id.clone(),
                k,
                device_id: device_id.to_owned(),
                target_id: target_id.to_owned(),
            })
        })
        .collect();

    // indexed parallel collect keeps grid order
    grid.into_par_iter()
        .map(|config| {
            let (metrics, alpha) = evaluate_with_alpha(store, &config)?;
            Ok(EvaluatedConfig { config, alpha, metrics })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub objective: Objective,
    pub winner: EvaluatedConfig,
    /// Scored candidates, best first.
    pub ranked: Vec<EvaluatedConfig>,
    /// Candidates dropped because they could not be scored (no power data
    /// for the energy objective, free verifier for the cost objective).
    pub skipped: usize,
}

/// Best-first ordering: objective value, then smaller k, then model id,
/// then quant id.
fn rank_order(objective: Objective, a: &EvaluatedConfig, b: &EvaluatedConfig) -> Ordering {
    let sa = objective.score(&a.metrics).unwrap_or(f64::NEG_INFINITY);
    let sb = objective.score(&b.metrics).unwrap_or(f64::NEG_INFINITY);
    sb.total_cmp(&sa)
        .then(a.config.k.cmp(&b.config.k))
        .then_with(|| a.config.model_id.cmp(&b.config.model_id))
        .then_with(|| a.config.quant_id.cmp(&b.config.quant_id))
}

pub fn select_best(configs: &[EvaluatedConfig], objective: Objective) -> Result<Recommendation> {
    if configs.is_empty() {
        return Err(Error::Infeasible("no candidate configurations".into()));
    }
    let mut ranked: Vec<EvaluatedConfig> = configs
        .iter()
        .filter(|c| objective.score(&c.metrics).is_some())
        .cloned()
        .collect();
    let skipped = configs.len() - ranked.len();
    if ranked.is_empty() {
        let reason = match objective {
            Objective::MinEnergyPerToken => "no power data",
            Objective::MinCostPerToken => "verifier price is zero",
            Objective::MaxGoodput => "no candidate configurations",
        };
        return Err(Error::Infeasible(reason.into()));
    }
    ranked.sort_by(|a, b| rank_order(objective, a, b));
    Ok(Recommendation {
        objective,
        winner: ranked[0].clone(),
        ranked,
        skipped,
    })
}

/// A configuration seen only through its goodput and energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub goodput: f64,
    pub energy: f64,
    pub config: Option<ConfigTriple>,
}

impl ParetoPoint {
    pub fn new(goodput: f64, energy: f64) -> Self {
        Self { goodput, energy, config: None }
    }

    /// `None` when the configuration has no energy figure.
    pub fn from_evaluated(c: &EvaluatedConfig) -> Option<Self> {
        c.metrics.energy_j_per_tok.map(|energy| Self {
            goodput: c.metrics.goodput_tok_s,
            energy,
            config: Some(c.config.clone()),
        })
    }

    /// True when `self` has goodput ≥ and energy ≤ `other`'s, with at least
    /// one strict.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.goodput >= other.goodput
            && self.energy <= other.energy
            && (self.goodput > other.goodput || self.energy < other.energy)
    }
}

/// Points not dominated by any other, in ascending goodput. Points with
/// identical metrics are all kept.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pb.goodput
            .total_cmp(&pa.goodput)
            .then(pa.energy.total_cmp(&pb.energy))
            .then(a.cmp(&b))
    });

    // Sweep from high to low goodput. A point survives iff it has the
    // lowest energy within its equal-goodput group and that energy is
    // strictly below everything seen at higher goodput.
    let mut front = Vec::new();
    let mut best_above = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let g = points[order[i]].goodput;
        let group_min = points[order[i]].energy;
        let mut j = i;
        while j < order.len() && points[order[j]].goodput == g {
            let p = &points[order[j]];
            if p.energy == group_min && group_min < best_above {
                front.push(p.clone());
            }
            j += 1;
        }
        best_above = best_above.min(group_min);
        i = j;
    }
    front.reverse();
    front
}

/// Samples of the curve energy = power / goodput at `n` evenly spaced
/// goodput values on `[g_lo, g_hi]`.
///
/// A device drawing `power_w` only while drafting always lies on or below
/// this curve, since its energy·goodput equals power times the drafting
/// share of the round.
pub fn iso_power_samples(power_w: f64, g_lo: f64, g_hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if !(power_w.is_finite() && power_w > 0.0) {
        return Err(Error::Domain(format!("power {power_w} must be > 0")));
    }
    if !(g_lo.is_finite() && g_hi.is_finite() && g_lo > 0.0 && g_lo <= g_hi) {
        return Err(Error::Domain(format!("invalid goodput range [{g_lo}, {g_hi}]")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
    }
    let step = (g_hi - g_lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let g = if i == n - 1 { g_hi } else { g_lo + step * i as f64 };
            (g, power_w / g)
        })
        .collect())
}

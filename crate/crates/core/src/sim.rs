//! Token-level Monte Carlo of speculative rounds, used to check the
//! analytical metrics independently.
//!
//! Every round `r` draws its variates from its own ChaCha8 stream: the
//! generator is seeded with `seed_from_u64(seed)` and then switched to
//! stream `r`. Rounds are therefore independent of how a session is split
//! across threads, and all aggregates are built from integer token counts,
//! so serial and sharded runs agree bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acceptance::GeometricCurve;
use crate::error::{Error, Result};
use crate::metrics::{metrics_for, MetricsTriple};

pub const GENERATOR: &str = "chacha8/stream-per-round";

/// Rounds per parallel work unit.
const SHARD_ROUNDS: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimAcceptance {
    /// Each position is accepted with probability β until the first
    /// rejection. Matches the geometric α(k) exactly.
    PerToken(f64),
    /// A tabulated α(k) used as the per-position probability. The expected
    /// prefix then differs from k·α(k), so results are approximate.
    Tabulated(f64),
}

impl SimAcceptance {
    pub fn probability(self) -> f64 {
        match self {
            SimAcceptance::PerToken(p) | SimAcceptance::Tabulated(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub k: u32,
    pub acceptance: SimAcceptance,
    pub v_d: f64,
    pub t_verify_s: f64,
    pub power_w: Option<f64>,
    pub price_per_mtok: f64,
    pub n_rounds: u64,
    pub seed: u64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        let p = self.acceptance.probability();
        if !(0.0..=1.0).contains(&p) {
            return bad(format!("acceptance probability {p} outside [0, 1]"));
        }
        if !(self.v_d.is_finite() && self.v_d > 0.0) {
            return bad(format!("v_d {} must be > 0", self.v_d));
        }
        if !(self.t_verify_s.is_finite() && self.t_verify_s > 0.0) {
            return bad(format!("t_verify_s {} must be > 0", self.t_verify_s));
        }
        if let Some(w) = self.power_w {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("power {w} must be > 0"));
            }
        }
        if !(self.price_per_mtok.is_finite() && self.price_per_mtok >= 0.0) {
            return bad(format!("price {} must be >= 0", self.price_per_mtok));
        }
        if self.n_rounds == 0 {
            return bad("need at least one round".into());
        }
        Ok(())
    }

    /// α(k) the analytical model should be evaluated at.
    pub fn alpha(&self) -> f64 {
        match self.acceptance {
            SimAcceptance::PerToken(beta) => GeometricCurve::new(beta)
                .map(|c| c.alpha(self.k))
                .unwrap_or(f64::NAN),
            SimAcceptance::Tabulated(a) => a,
        }
    }

    pub fn round_time_s(&self) -> f64 {
        f64::from(self.k) / self.v_d + self.t_verify_s
    }

    /// Analytical metrics for the same parameters.
    pub fn analytical(&self) -> Result<MetricsTriple> {
        self.validate()?;
        metrics_for(
            self.v_d,
            self.power_w,
            self.alpha(),
            self.k,
            self.t_verify_s,
            self.price_per_mtok,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub accepted_draft: u32,
    /// Accepted drafts plus the bonus token.
    pub total_accepted: u32,
    pub round_time_s: f64,
    pub round_energy_j: Option<f64>,
    pub round_cost_dollars: f64,
}

/// Generator for round `round` of a session seeded with `seed`.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Plays one round: k uniform variates are drawn in order and the accepted
/// prefix ends at the first variate not below the acceptance probability.
/// All k variates are consumed even after a rejection.
pub fn simulate_round<R: Rng + ?Sized>(rng: &mut R, params: &SimParams) -> RoundOutcome {
    let p = params.acceptance.probability();
    let mut accepted_draft = 0;
    let mut open = true;
    for _ in 0..params.k {
        let u: f64 = rng.gen();
        if open && u < p {
            accepted_draft += 1;
        } else {
            open = false;
        }
    }
    let drafting_s = f64::from(params.k) / params.v_d;
    RoundOutcome {
        accepted_draft,
        total_accepted: accepted_draft + 1,
        round_time_s: drafting_s + params.t_verify_s,
        round_energy_j: params.power_w.map(|w| w * drafting_s),
        round_cost_dollars: f64::from(params.k) * params.price_per_mtok * 1e-6,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMetrics {
    pub n_rounds: u64,
    pub seed: u64,
    pub generator: &'static str,
    /// Set when the acceptance probability came from a tabulated α(k).
    pub approximate: bool,
    pub total_accepted_draft: u64,
    pub mean_accepted_draft: f64,
    /// Standard error of `mean_accepted_draft`.
    pub se_accepted_draft: f64,
    pub goodput_tok_s: f64,
    pub cost_eff_tok_per_dollar: Option<f64>,
    pub energy_j_per_tok: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    sum: u64,
    sum_sq: u64,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }
}

fn run_rounds(params: &SimParams, rounds: std::ops::Range<u64>) -> Tally {
    let mut t = Tally::default();
    for r in rounds {
        let mut rng = round_rng(params.seed, r);
        let a = u64::from(simulate_round(&mut rng, params).accepted_draft);
        t.sum += a;
        t.sum_sq += a * a;
    }
    t
}

/// Runs `params.n_rounds` rounds, sharded across the rayon pool.
pub fn simulate_session(params: &SimParams) -> Result<EmpiricalMetrics> {
    params.validate()?;
    let n = params.n_rounds;
    let shards = n.div_ceil(SHARD_ROUNDS);
    let tally = (0..shards)
        .into_par_iter()
        .map(|s| run_rounds(params, s * SHARD_ROUNDS..((s + 1) * SHARD_ROUNDS).min(n)))
        .reduce(Tally::default, Tally::merge);
    Ok(aggregate(params, tally))
}

/// Single-threaded equivalent of [`simulate_session`].
pub fn simulate_session_serial(params: &SimParams) -> Result<EmpiricalMetrics> {
    params.validate()?;
    Ok(aggregate(params, run_rounds(params, 0..params.n_rounds)))
}

fn aggregate(params: &SimParams, t: Tally) -> EmpiricalMetrics {
    let n = params.n_rounds;
    let nf = n as f64;
    let mean = t.sum as f64 / nf;
    let se = if n > 1 {
        let num = u128::from(n) * u128::from(t.sum_sq) - u128::from(t.sum) * u128::from(t.sum);
        let var = num as f64 / (nf * (nf - 1.0));
        (var / nf).sqrt()
    } else {
        0.0
    };
    // per-round means keep the zero-variance case exact
    let mean_total = (t.sum + n) as f64 / nf;
    let k = f64::from(params.k);
    let cost_per_round = k * params.price_per_mtok * 1e-6;
    EmpiricalMetrics {
        n_rounds: n,
        seed: params.seed,
        generator: GENERATOR,
        approximate: matches!(params.acceptance, SimAcceptance::Tabulated(_)),
        total_accepted_draft: t.sum,
        mean_accepted_draft: mean,
        se_accepted_draft: se,
        goodput_tok_s: mean_total / params.round_time_s(),
        cost_eff_tok_per_dollar: (cost_per_round > 0.0).then(|| mean_total / cost_per_round),
        energy_j_per_tok: params.power_w.map(|w| w * k / params.v_d / mean_total),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDelta {
    pub metric: &'static str,
    pub empirical: f64,
    pub analytical: f64,
    /// (empirical − analytical) / analytical.
    pub rel_error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub deltas: Vec<MetricDelta>,
    pub n_rounds: u64,
    pub seed: u64,
}

impl Comparison {
    pub fn any_flagged(&self) -> bool {
        self.deltas.iter().any(|d| d.flagged)
    }

    pub fn get(&self, metric: &str) -> Option<&MetricDelta> {
        self.deltas.iter().find(|d| d.metric == metric)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tempirical\tanalytical\trel_error\tn_rounds\tseed\n");
        for d in &self.deltas {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                d.metric, d.empirical, d.analytical, d.rel_error, self.n_rounds, self.seed
            ));
        }
        out
    }
}

/// Relative error of each empirical metric against its analytical value;
/// entries beyond `tolerance` are flagged.
pub fn compare_to_analytical(
    empirical: &EmpiricalMetrics,
    analytical: &MetricsTriple,
    tolerance: f64,
) -> Result<Comparison> {
    let pairs = [
        (
            "goodput_tok_s",
            Some(empirical.goodput_tok_s),
            Some(analytical.goodput_tok_s),
        ),
        (
            "cost_eff_tok_per_dollar",
            empirical.cost_eff_tok_per_dollar,
            analytical.cost_eff_tok_per_dollar,
        ),
        (
            "energy_j_per_tok",
            empirical.energy_j_per_tok,
            analytical.energy_j_per_tok,
        ),
    ];
    let mut deltas = Vec::new();
    for (metric, emp, ana) in pairs {
        match (emp, ana) {
            (Some(e), Some(a)) => {
                let rel_error = (e - a) / a;
                deltas.push(MetricDelta {
                    metric,
                    empirical: e,
                    analytical: a,
                    rel_error,
                    flagged: !(rel_error.abs() <= tolerance),
                });
            }
            (None, None) => {}
            _ => {
                return Err(Error::Mismatched(format!(
                    "{metric} present on one side only"
                )))
            }
        }
    }
    Ok(Comparison {
        deltas,
        n_rounds: empirical.n_rounds,
        seed: empirical.seed,
    })
}

//! The three analytical round metrics: goodput, verification cost
//! efficiency and edge energy per accepted token.

use crate::acceptance::expected_accepted;
use crate::error::{Error, Result};
use crate::profile::ProfileStore;

/// One point of the (model, quant, k) search space, placed on a device and
/// against a verifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConfigTriple {
    pub model_id: String,
    pub quant_id: String,
    pub k: u32,
    pub device_id: String,
    pub target_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsTriple {
    /// Accepted tokens per second.
    pub goodput_tok_s: f64,
    /// Accepted tokens per dollar; `None` when the verifier is free.
    pub cost_eff_tok_per_dollar: Option<f64>,
    /// Drafting joules per accepted token; `None` without power data.
    pub energy_j_per_tok: Option<f64>,
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be > 0, got {x}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha {alpha} outside [0, 1]")))
    }
}

/// Accepted tokens per second: (kα + 1) / (k/v_d + T_verify).
pub fn goodput(v_d: f64, alpha: f64, k: u32, t_verify_s: f64) -> Result<f64> {
    check_k(k)?;
    check_positive("v_d", v_d)?;
    check_positive("t_verify_s", t_verify_s)?;
    check_alpha(alpha)?;
    Ok(expected_accepted(alpha, k) / (f64::from(k) / v_d + t_verify_s))
}

/// Accepted tokens per dollar when each round bills k tokens:
/// (α + 1/k) / p.
pub fn cost_efficiency(alpha: f64, k: u32, price_per_mtok: f64) -> Result<f64> {
    check_k(k)?;
    check_alpha(alpha)?;
    if price_per_mtok == 0.0 {
        return Err(Error::UndefinedCostEfficiency);
    }
    check_positive("price_per_mtok", price_per_mtok)?;
    Ok((alpha + 1.0 / f64::from(k)) / (price_per_mtok * 1e-6))
}

/// Drafting energy per accepted token: P·(k/v_d) / (kα + 1).
pub fn energy_per_token(power_w: f64, v_d: f64, alpha: f64, k: u32) -> Result<f64> {
    check_k(k)?;
    check_positive("power_w", power_w)?;
    check_positive("v_d", v_d)?;
    check_alpha(alpha)?;
    Ok(power_w * (f64::from(k) / v_d) / expected_accepted(alpha, k))
}

/// All three metrics from already-resolved inputs.
pub fn metrics_for(
    v_d: f64,
    power_w: Option<f64>,
    alpha: f64,
    k: u32,
    t_verify_s: f64,
    price_per_mtok: f64,
) -> Result<MetricsTriple> {
    let goodput_tok_s = goodput(v_d, alpha, k, t_verify_s)?;
    let cost_eff_tok_per_dollar = match cost_efficiency(alpha, k, price_per_mtok) {
        Ok(x) => Some(x),
        Err(Error::UndefinedCostEfficiency) => None,
        Err(e) => return Err(e),
    };
    let energy_j_per_tok = power_w
        .map(|p| energy_per_token(p, v_d, alpha, k))
        .transpose()?;
    Ok(MetricsTriple {
        goodput_tok_s,
        cost_eff_tok_per_dollar,
        energy_j_per_tok,
    })
}

/// Resolves `triple` against the store and evaluates it using the
/// tabulated acceptance curve.
pub fn evaluate_config(store: &ProfileStore, triple: &ConfigTriple) -> Result<MetricsTriple> {
    evaluate_with_alpha(store, triple).map(|(m, _)| m)
}

/// Like [`evaluate_config`] but also returns the α(k) that was used.
pub fn evaluate_with_alpha(
    store: &ProfileStore,
    triple: &ConfigTriple,
) -> Result<(MetricsTriple, f64)> {
    check_k(triple.k)?;
    let variant = store.lookup_variant(&triple.model_id, &triple.quant_id, &triple.device_id)?;
    let verifier = store.verifier(&triple.target_id)?;
    let alpha = store
        .curve(&triple.model_id, &triple.quant_id, &triple.target_id)?
        .alpha(triple.k);
    let metrics = metrics_for(
        variant.v_d,
        variant.power_w,
        alpha,
        triple.k,
        verifier.t_verify_s,
        verifier.price_per_mtok,
    )?;
    Ok((metrics, alpha))
}

/// Energy of an evaluated configuration, or a no-power-data error.
pub fn require_energy(triple: &ConfigTriple, metrics: &MetricsTriple) -> Result<f64> {
    metrics.energy_j_per_tok.ok_or_else(|| {
        Error::NoPowerData(format!(
            "({}, {}, {})",
            triple.model_id, triple.quant_id, triple.device_id
        ))
    })
}

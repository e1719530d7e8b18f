//! Measured inputs to the planner: edge devices, draft-model variants with
//! their drafting throughput and power, cloud verifiers, and per-length
//! acceptance measurements.
//!
//! A [`ProfileStore`] is immutable once loaded and can be shared freely
//! between evaluation threads.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::acceptance::TabulatedCurve;
use crate::error::{Error, Result};

pub use io::{load_profiles, load_unvalidated, serialize};

/// One of the four files making up a profile directory. The declaration
/// order is the order in which violations are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProfileFile {
    Devices,
    Verifiers,
    Variants,
    Acceptance,
}

impl ProfileFile {
    pub const ALL: [ProfileFile; 4] = [
        ProfileFile::Devices,
        ProfileFile::Verifiers,
        ProfileFile::Variants,
        ProfileFile::Acceptance,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ProfileFile::Devices => "devices.csv",
            ProfileFile::Verifiers => "verifiers.csv",
            ProfileFile::Variants => "variants.csv",
            ProfileFile::Acceptance => "acceptance.csv",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ProfileFile::Devices => &["device_id", "display_name", "has_power_data"],
            ProfileFile::Verifiers => &["target_id", "price_per_mtok", "t_verify_s"],
            ProfileFile::Variants => &[
                "model_id",
                "family",
                "params_billions",
                "quant_id",
                "device_id",
                "v_d_tok_s",
                "power_w",
            ],
            ProfileFile::Acceptance => &["model_id", "quant_id", "target_id", "k", "alpha"],
        }
    }
}

impl fmt::Display for ProfileFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DevicePlatform {
    pub device_id: String,
    pub display_name: String,
    /// False for platforms without power telemetry; none of their
    /// variants may then carry a power figure.
    pub has_power_data: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftModel {
    pub model_id: String,
    pub family: String,
    pub params_billions: f64,
}

/// Drafting throughput and power of one (model, quantisation, device).
#[derive(Debug, Clone, PartialEq)]
pub struct VariantProfile {
    pub model_id: String,
    pub quant_id: String,
    pub device_id: String,
    /// Drafting throughput in tokens per second.
    pub v_d: f64,
    /// Average power while drafting, watts.
    pub power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierSpec {
    pub target_id: String,
    /// Dollars per million verified tokens, as listed by the provider.
    pub price_per_mtok: f64,
    /// Verification latency of one round, seconds.
    pub t_verify_s: f64,
}

impl VerifierSpec {
    /// Price of a single token in dollars.
    pub fn unit_price(&self) -> f64 {
        self.price_per_mtok * 1e-6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptancePoint {
    pub model_id: String,
    pub quant_id: String,
    pub target_id: String,
    pub k: u32,
    pub alpha: f64,
}

type VariantKey = (String, String, String);
type AcceptanceKey = (String, String, String, u32);

/// Indexed collection of every measured quantity.
///
/// All collections are ordered maps, so iteration order (and therefore
/// serialization and planner output) depends only on keys, never on the
/// order in which records were inserted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileStore {
    devices: BTreeMap<String, DevicePlatform>,
    models: BTreeMap<String, DraftModel>,
    variants: BTreeMap<VariantKey, VariantProfile>,
    verifiers: BTreeMap<String, VerifierSpec>,
    acceptance: BTreeMap<AcceptanceKey, AcceptancePoint>,
}

impl ProfileStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_device(&mut self, device: DevicePlatform) -> Result<()> {
        if self.devices.contains_key(&device.device_id) {
            return Err(duplicate(ProfileFile::Devices, &device.device_id));
        }
        self.devices.insert(device.device_id.clone(), device);
        Ok(())
    }

    /// Registers a draft model. Re-registering an identical definition is a
    /// no-op; a conflicting one is an error.
    pub fn insert_model(&mut self, model: DraftModel) -> Result<()> {
        match self.models.get(&model.model_id) {
            Some(existing) if *existing == model => Ok(()),
            Some(existing) => Err(Error::Domain(format!(
                "conflicting definitions of model {}: ({}, {}B) vs ({}, {}B)",
                model.model_id,
                existing.family,
                existing.params_billions,
                model.family,
                model.params_billions
            ))),
            None => {
                self.models.insert(model.model_id.clone(), model);
                Ok(())
            }
        }
    }

    pub fn insert_variant(&mut self, variant: VariantProfile) -> Result<()> {
        let key = (
            variant.model_id.clone(),
            variant.quant_id.clone(),
            variant.device_id.clone(),
        );
        if self.variants.contains_key(&key) {
            return Err(duplicate(
                ProfileFile::Variants,
                &format!("({}, {}, {})", key.0, key.1, key.2),
            ));
        }
        self.variants.insert(key, variant);
        Ok(())
    }

    pub fn insert_verifier(&mut self, verifier: VerifierSpec) -> Result<()> {
        if self.verifiers.contains_key(&verifier.target_id) {
            return Err(duplicate(ProfileFile::Verifiers, &verifier.target_id));
        }
        self.verifiers.insert(verifier.target_id.clone(), verifier);
        Ok(())
    }

    pub fn insert_acceptance(&mut self, point: AcceptancePoint) -> Result<()> {
        let key = (
            point.model_id.clone(),
            point.quant_id.clone(),
            point.target_id.clone(),
            point.k,
        );
        if self.acceptance.contains_key(&key) {
            return Err(duplicate(
                ProfileFile::Acceptance,
                &format!("({}, {}, {}, k={})", key.0, key.1, key.2, key.3),
            ));
        }
        self.acceptance.insert(key, point);
        Ok(())
    }

    pub fn devices(&self) -> impl Iterator<Item = &DevicePlatform> {
        self.devices.values()
    }

    pub fn device(&self, device_id: &str) -> Result<&DevicePlatform> {
        self.devices
            .get(device_id)
            .ok_or_else(|| Error::NotFound(format!("device {device_id}")))
    }

    pub fn models(&self) -> impl Iterator<Item = &DraftModel> {
        self.models.values()
    }

    pub fn model(&self, model_id: &str) -> Result<&DraftModel> {
        self.models
            .get(model_id)
            .ok_or_else(|| Error::NotFound(format!("model {model_id}")))
    }

    /// Variants sorted by (model, quant, device).
    pub fn variants(&self) -> impl Iterator<Item = &VariantProfile> {
        self.variants.values()
    }

    /// Variants profiled on `device_id`, sorted by (model, quant).
    pub fn variants_on<'a>(
        &'a self,
        device_id: &'a str,
    ) -> impl Iterator<Item = &'a VariantProfile> + 'a {
        self.variants
            .values()
            .filter(move |v| v.device_id == device_id)
    }

    pub fn verifiers(&self) -> impl Iterator<Item = &VerifierSpec> {
        self.verifiers.values()
    }

    pub fn verifier(&self, target_id: &str) -> Result<&VerifierSpec> {
        self.verifiers
            .get(target_id)
            .ok_or_else(|| Error::NotFound(format!("verifier {target_id}")))
    }

    /// Acceptance points sorted by (model, quant, target, k).
    pub fn acceptance_points(&self) -> impl Iterator<Item = &AcceptancePoint> {
        self.acceptance.values()
    }

    pub fn lookup_variant(
        &self,
        model_id: &str,
        quant_id: &str,
        device_id: &str,
    ) -> Result<&VariantProfile> {
        self.variants
            .get(&(model_id.to_owned(), quant_id.to_owned(), device_id.to_owned()))
            .ok_or_else(|| {
                Error::NotFound(format!("variant ({model_id}, {quant_id}, {device_id})"))
            })
    }

    pub fn has_curve(&self, model_id: &str, quant_id: &str, target_id: &str) -> bool {
        self.curve_points(model_id, quant_id, target_id).next().is_some()
    }

    /// The tabulated acceptance curve for one drafter against one target.
    pub fn curve(&self, model_id: &str, quant_id: &str, target_id: &str) -> Result<TabulatedCurve> {
        let points: Vec<(u32, f64)> = self
            .curve_points(model_id, quant_id, target_id)
            .map(|p| (p.k, p.alpha))
            .collect();
        if points.is_empty() {
            return Err(Error::NotFound(format!(
                "acceptance curve ({model_id}, {quant_id}, {target_id})"
            )));
        }
        TabulatedCurve::new(points)
    }

    fn curve_points<'a>(
        &'a self,
        model_id: &'a str,
        quant_id: &'a str,
        target_id: &'a str,
    ) -> impl Iterator<Item = &'a AcceptancePoint> + 'a {
        let lo = (model_id.to_owned(), quant_id.to_owned(), target_id.to_owned(), 0);
        let hi = (model_id.to_owned(), quant_id.to_owned(), target_id.to_owned(), u32::MAX);
        self.acceptance.range(lo..=hi).map(|(_, p)| p)
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn model_count(&self) -> usize {
        self.models.len()
    }

    pub fn variant_count(&self) -> usize {
        self.variants.len()
    }

    pub fn verifier_count(&self) -> usize {
        self.verifiers.len()
    }

    pub fn acceptance_count(&self) -> usize {
        self.acceptance.len()
    }
}

fn duplicate(file: ProfileFile, key: &str) -> Error {
    Error::DuplicateKey {
        file: file.file_name().to_owned(),
        key: key.to_owned(),
    }
}

/// One broken rule in a store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub file: ProfileFile,
    pub key: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.file, self.key, self.rule)
    }
}

/// Identifiers are case-sensitive and drawn from `[A-Za-z0-9._-]`.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// Checks every store invariant. Returns an empty list iff the store is
/// valid; violations are sorted by file, then key.
pub fn validate(store: &ProfileStore) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |file, key: String, rule: String| out.push(Violation { file, key, rule });

    for d in store.devices.values() {
        let key = d.device_id.clone();
        if !is_valid_id(&d.device_id) {
            push(ProfileFile::Devices, key.clone(), "invalid identifier".into());
        }
        if !d.has_power_data
            && store
                .variants_on(&d.device_id)
                .any(|v| v.power_w.is_some())
        {
            push(
                ProfileFile::Devices,
                key,
                "has_power_data is false but a variant carries power".into(),
            );
        }
    }

    for v in store.verifiers.values() {
        let key = v.target_id.clone();
        if !is_valid_id(&v.target_id) {
            push(ProfileFile::Verifiers, key.clone(), "invalid identifier".into());
        }
        if !(v.price_per_mtok.is_finite() && v.price_per_mtok >= 0.0) {
            push(
                ProfileFile::Verifiers,
                key.clone(),
                format!("price_per_mtok {} must be >= 0", v.price_per_mtok),
            );
        }
        if !(v.t_verify_s.is_finite() && v.t_verify_s > 0.0) {
            push(
                ProfileFile::Verifiers,
                key,
                format!("t_verify_s {} must be > 0", v.t_verify_s),
            );
        }
    }

    for m in store.models.values() {
        if !(m.params_billions.is_finite() && m.params_billions > 0.0) {
            push(
                ProfileFile::Variants,
                format!("({})", m.model_id),
                format!("params_billions {} must be > 0", m.params_billions),
            );
        }
    }

    for v in store.variants.values() {
        let key = format!("({}, {}, {})", v.model_id, v.quant_id, v.device_id);
        for id in [&v.model_id, &v.quant_id, &v.device_id] {
            if !is_valid_id(id) {
                push(ProfileFile::Variants, key.clone(), format!("invalid identifier {id:?}"));
            }
        }
        if !store.models.contains_key(&v.model_id) {
            push(
                ProfileFile::Variants,
                key.clone(),
                format!("unknown model {:?}", v.model_id),
            );
        }
        match store.devices.get(&v.device_id) {
            None => push(
                ProfileFile::Variants,
                key.clone(),
                format!("unknown device {:?}", v.device_id),
            ),
            Some(d) if d.has_power_data && v.power_w.is_none() => push(
                ProfileFile::Variants,
                key.clone(),
                format!("power_w absent but device {:?} has power data", d.device_id),
            ),
            Some(_) => {}
        }
        if !(v.v_d.is_finite() && v.v_d > 0.0) {
            push(ProfileFile::Variants, key.clone(), format!("v_d {} must be > 0", v.v_d));
        }
        if let Some(p) = v.power_w {
            if !(p.is_finite() && p > 0.0) {
                push(ProfileFile::Variants, key, format!("power_w {p} must be > 0"));
            }
        }
    }

    let quants: BTreeSet<(&str, &str)> = store
        .variants
        .values()
        .map(|v| (v.model_id.as_str(), v.quant_id.as_str()))
        .collect();
    let mut curve_sizes: BTreeMap<(&str, &str, &str), usize> = BTreeMap::new();
    for a in store.acceptance.values() {
        let key = format!("({}, {}, {}, k={})", a.model_id, a.quant_id, a.target_id, a.k);
        if !quants.contains(&(a.model_id.as_str(), a.quant_id.as_str())) {
            push(
                ProfileFile::Acceptance,
                key.clone(),
                format!("unknown model/quant {:?}/{:?}", a.model_id, a.quant_id),
            );
        }
        if !store.verifiers.contains_key(&a.target_id) {
            push(
                ProfileFile::Acceptance,
                key.clone(),
                format!("unknown verifier {:?}", a.target_id),
            );
        }
        if a.k == 0 {
            push(ProfileFile::Acceptance, key.clone(), "k must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&a.alpha) {
            push(
                ProfileFile::Acceptance,
                key,
                format!("alpha {} out of range [0, 1]", a.alpha),
            );
        }
        *curve_sizes
            .entry((a.model_id.as_str(), a.quant_id.as_str(), a.target_id.as_str()))
            .or_default() += 1;
    }
    for ((m, q, t), n) in curve_sizes {
        if n < 2 {
            push(
                ProfileFile::Acceptance,
                format!("({m}, {q}, {t})"),
                "curve needs ≥ 2 points".into(),
            );
        }
    }

    out.sort();
    out
}

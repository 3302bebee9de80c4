//! Univariate families.
//!
//! Every family implements [`UnivariateFamily`]; the registry in
//! [`registry`] builds them by tag from a `key=value` parameter map, and
//! [`UnivariateSpec`] is the shared handle passed around the crate.

mod al;
pub(crate) use al::al_log_shape;
mod als;
mod an;
mod bd;
mod bl;
mod cc;
mod cf;
mod ch;
mod de;
mod gn;
pub mod numeric;
pub mod registry;
mod uniform;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use al::CompoundLogistic;
pub use als::SkewCompoundLogistic;
pub use an::CompoundNormal;
pub use bd::LaplaceProduct;
pub use bl::LogisticProduct;
pub use cc::GeneralizedCauchy;
pub use cf::GeneralizedFermi;
pub use ch::HyperbolicFermi;
pub use de::PeakFlattened;
pub use gn::GeneralizedNormal;
pub use uniform::Uniform;

use crate::data::{seeded_rng, Dataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyTag {
    U,
    GN,
    AN,
    AL,
    ALS,
    BL,
    BD,
    CC,
    CF,
    CE,
    CH,
    DE,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 12] = [
        FamilyTag::U,
        FamilyTag::GN,
        FamilyTag::AN,
        FamilyTag::AL,
        FamilyTag::ALS,
        FamilyTag::BL,
        FamilyTag::BD,
        FamilyTag::CC,
        FamilyTag::CF,
        FamilyTag::CE,
        FamilyTag::CH,
        FamilyTag::DE,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyTag::U => "U",
            FamilyTag::GN => "GN",
            FamilyTag::AN => "AN",
            FamilyTag::AL => "AL",
            FamilyTag::ALS => "ALS",
            FamilyTag::BL => "BL",
            FamilyTag::BD => "BD",
            FamilyTag::CC => "CC",
            FamilyTag::CF => "CF",
            FamilyTag::CE => "CE",
            FamilyTag::CH => "CH",
            FamilyTag::DE => "DE",
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum MomentValue {
    Finite(f64),
    Infinite,
    Undefined,
}

impl MomentValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            MomentValue::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub order: u32,
    pub value: MomentValue,
    pub method: Method,
}

impl MomentReport {
    pub fn closed(order: u32, v: f64) -> Self {
        MomentReport {
            order,
            value: MomentValue::Finite(v),
            method: Method::ClosedForm,
        }
    }
}

/// A univariate density with evaluation, moments and derivatives.
pub trait UnivariateFamily: fmt::Debug + Send + Sync {
    fn tag(&self) -> FamilyTag;

    /// Parameters in registry order.
    fn params(&self) -> Vec<(&'static str, f64)>;

    fn log_pdf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        numeric::cdf(self, x)
    }

    fn cdf_method(&self) -> Method {
        Method::Quadrature
    }

    fn quantile(&self, v: f64) -> Result<f64> {
        numeric::quantile(self, v)
    }

    fn quantile_method(&self) -> Method {
        Method::Quadrature
    }

    fn mode(&self) -> f64;

    fn is_symmetric(&self) -> bool;

    /// Width of the finest feature of the density (edge softness).
    fn scale(&self) -> f64;

    /// Overall half-width, used to bracket roots.
    fn spread(&self) -> f64;

    /// Points where quadrature panels should start and end.
    fn breakpoints(&self) -> Vec<f64>;

    /// Closure of the region where the density is positive.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Cached normalizing constant, in the family's own convention.
    fn normalizer(&self) -> Option<f64> {
        None
    }

    fn mean(&self) -> Result<f64> {
        if self.is_symmetric() {
            Ok(self.mode())
        } else {
            numeric::mean(self)
        }
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::central_moment_report(self, k)
    }

    fn kurtosis(&self) -> Result<f64> {
        numeric::kurtosis_from_moments(self)
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        numeric::diff1(self, x)
    }

    fn pdf_d2(&self, x: f64) -> f64 {
        numeric::diff2(self, x)
    }
}

pub type ParamMap = BTreeMap<String, f64>;

/// Shared handle to a validated family instance.
#[derive(Clone)]
pub struct UnivariateSpec(Arc<dyn UnivariateFamily>);

impl UnivariateSpec {
    pub fn new<F: UnivariateFamily + 'static>(family: F) -> Self {
        UnivariateSpec(Arc::new(family))
    }

    /// Validating constructor through the registry.
    pub fn make(tag: FamilyTag, params: &ParamMap) -> Result<Self> {
        registry::build(tag, params)
    }

    /// Parses `key=value,key=value`.
    pub fn parse(tag: &str, params: &str) -> Result<Self> {
        let tag: FamilyTag = tag.parse()?;
        UnivariateSpec::make(tag, &parse_param_list(params)?)
    }

    pub fn family(&self) -> &dyn UnivariateFamily {
        self.0.as_ref()
    }

    pub fn param_map(&self) -> ParamMap {
        self.0.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.0.params().into_iter().find(|(k, _)| *k == name).map(|(_, v)| v)
    }

    /// `n` inverse-transform draws.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let values = self.sample_values(n, seed)?;
        Dataset::univariate(values, format!("sample {} seed={seed}", self))
    }

    pub fn sample_values(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Domain("sample size must be positive".into()));
        }
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                let v: f64 = rng.sample(Open01);
                self.quantile(v)
            })
            .collect()
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Ok(Self::new(Uniform::new(a, b)?))
    }

    pub fn gn(mu: f64, s: f64, beta: f64) -> Result<Self> {
        Ok(Self::new(GeneralizedNormal::new(mu, s, beta)?))
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Ok(Self::new(GeneralizedNormal::normal(mean, sd)?))
    }

    pub fn an(a: f64, b: f64, s: f64) -> Result<Self> {
        Ok(Self::new(CompoundNormal::new(a, b, s)?))
    }

    pub fn al(a: f64, b: f64, s: f64) -> Result<Self> {
        Ok(Self::new(CompoundLogistic::new(a, b, s)?))
    }

    pub fn als(a: f64, b: f64, s: f64, lambda: f64) -> Result<Self> {
        Ok(Self::new(SkewCompoundLogistic::new(a, b, s, lambda)?))
    }

    pub fn bl(a: f64, b: f64, s: f64, t: f64) -> Result<Self> {
        Ok(Self::new(LogisticProduct::new(a, b, s, t)?))
    }

    pub fn bd(a: f64, b: f64, s: f64, t: f64) -> Result<Self> {
        Ok(Self::new(LaplaceProduct::new(a, b, s, t)?))
    }

    pub fn cc(m: f64, s: f64, beta: f64) -> Result<Self> {
        Ok(Self::new(GeneralizedCauchy::new(m, s, beta)?))
    }

    pub fn cf(m: f64, r: f64, s: f64, beta: f64) -> Result<Self> {
        Ok(Self::new(GeneralizedFermi::new(m, r, s, beta)?))
    }

    pub fn ce(a: f64, b: f64, s: f64) -> Result<Self> {
        Ok(Self::new(GeneralizedFermi::ferreri(a, b, s)?))
    }

    pub fn ch(m: f64, r: f64, s: f64, beta: f64) -> Result<Self> {
        Ok(Self::new(HyperbolicFermi::new(m, r, s, beta)?))
    }

    pub fn de(m: f64, s: f64) -> Result<Self> {
        Ok(Self::new(PeakFlattened::new(m, s)?))
    }
}

impl Deref for UnivariateSpec {
    type Target = dyn UnivariateFamily;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl fmt::Debug for UnivariateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for UnivariateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.tag())?;
        for (i, (k, v)) in self.params().into_iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl PartialEq for UnivariateSpec {
    fn eq(&self, other: &Self) -> bool {
        self.tag() == other.tag() && self.params() == other.params()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    family: FamilyTag,
    params: ParamMap,
}

impl Serialize for UnivariateSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SpecRepr {
            family: self.tag(),
            params: self.param_map(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnivariateSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SpecRepr::deserialize(deserializer)?;
        UnivariateSpec::make(repr.family, &repr.params).map_err(serde::de::Error::custom)
    }
}

/// Parses `key=value,key=value` into a map; duplicate keys are rejected.
pub fn parse_param_list(text: &str) -> Result<ParamMap> {
    let mut map = ParamMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Domain(format!("expected key=value, got `{item}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("`{}` is not a number", v.trim())))?;
        if map.insert(k.trim().to_string(), v).is_some() {
            return Err(Error::Domain(format!("duplicate parameter `{}`", k.trim())));
        }
    }
    Ok(map)
}

/// Half-width constant of the compound-logistic stand-in for a standard normal.
pub fn r_n() -> f64 {
    (4f64.ln()).sqrt() - 0.2
}

/// Scale constant of the compound-logistic stand-in for a standard normal.
pub fn s_n() -> f64 {
    r_n() / std::f64::consts::PI + 0.166
}

/// Logistic scale matching the standard normal CDF.
pub const NORMAL_LOGISTIC_SCALE: f64 = 0.5877;

/// AL{μ−σr_N, μ+σr_N, σs_N}.
pub fn approx_al_from_normal(mu: f64, sigma: f64) -> Result<UnivariateSpec> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::param("AL", "normal approximation needs finite mu and sigma > 0"));
    }
    UnivariateSpec::al(mu - sigma * r_n(), mu + sigma * r_n(), sigma * s_n())
}

/// AN{a,b,s} ≈ AL{a,b,0.5877·s}.
pub fn approx_al_from_an(a: f64, b: f64, s: f64) -> Result<UnivariateSpec> {
    CompoundNormal::new(a, b, s)?;
    UnivariateSpec::al(a, b, NORMAL_LOGISTIC_SCALE * s)
}

/// BL{a,b,s,t} ≈ BD{a,b,s·ln4,t·ln4}.
pub fn approx_bd_from_bl(a: f64, b: f64, s: f64, t: f64) -> Result<UnivariateSpec> {
    let k = 4f64.ln();
    if !(a < b) || !(s > 0.0) || !(t > 0.0) {
        return Err(Error::param("BL", "requires a < b, s > 0, t > 0"));
    }
    UnivariateSpec::bd(a, b, s * k, t * k)
}

pub(crate) fn require(ok: bool, family: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::param(family, message))
    }
}

pub(crate) fn finite_all(family: &str, xs: &[f64]) -> Result<()> {
    require(xs.iter().all(|x| x.is_finite()), family, "parameters must be finite")
}

/// Central moments of a Type-A compound: kernel moments μf(j) of a
/// symmetric kernel with scale s, convolved with U(m−r, m+r).
pub(crate) fn type_a_central_moment(k: u32, r: f64, s: f64, kernel: impl Fn(u32) -> f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=k {
        if i > 0 {
            binom *= (k - i + 1) as f64 / i as f64;
        }
        let j = k - i;
        if j % 2 == 1 || i % 2 == 1 {
            continue;
        }
        // (r^{i+1} − (−r)^{i+1})/((i+1)·2r) = r^i/(i+1) for even i
        total += binom * s.powi(j as i32) * kernel(j) * r.powi(i as i32) / (i + 1) as f64;
    }
    total
}

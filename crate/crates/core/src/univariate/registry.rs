//! Tag-keyed constructors with strict parameter-name checking.

use super::{FamilyTag, ParamMap, UnivariateSpec};
use crate::error::{Error, Result};

pub struct FamilyEntry {
    pub tag: FamilyTag,
    pub params: &'static [&'static str],
    pub summary: &'static str,
    build: fn(&[f64]) -> Result<UnivariateSpec>,
}

impl FamilyEntry {
    pub fn build(&self, params: &ParamMap) -> Result<UnivariateSpec> {
        let name = self.tag.as_str();
        if let Some(unknown) = params.keys().find(|k| !self.params.contains(&k.as_str())) {
            return Err(Error::param(
                name,
                format!("unknown parameter `{unknown}` (expected {})", self.params.join(", ")),
            ));
        }
        let values = self
            .params
            .iter()
            .map(|k| {
                params
                    .get(*k)
                    .copied()
                    .ok_or_else(|| Error::param(name, format!("missing parameter `{k}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        (self.build)(&values)
    }
}

static ENTRIES: [FamilyEntry; 12] = [
    FamilyEntry {
        tag: FamilyTag::U,
        params: &["a", "b"],
        summary: "uniform on [a, b]",
        build: |p| UnivariateSpec::uniform(p[0], p[1]),
    },
    FamilyEntry {
        tag: FamilyTag::GN,
        params: &["mu", "s", "beta"],
        summary: "generalized normal",
        build: |p| UnivariateSpec::gn(p[0], p[1], p[2]),
    },
    FamilyEntry {
        tag: FamilyTag::AN,
        params: &["a", "b", "s"],
        summary: "uniform compounded with a normal",
        build: |p| UnivariateSpec::an(p[0], p[1], p[2]),
    },
    FamilyEntry {
        tag: FamilyTag::AL,
        params: &["a", "b", "s"],
        summary: "uniform compounded with a logistic",
        build: |p| UnivariateSpec::al(p[0], p[1], p[2]),
    },
    FamilyEntry {
        tag: FamilyTag::ALS,
        params: &["a", "b", "s", "lambda"],
        summary: "uniform compounded with a skewed logistic",
        build: |p| UnivariateSpec::als(p[0], p[1], p[2], p[3]),
    },
    FamilyEntry {
        tag: FamilyTag::BL,
        params: &["a", "b", "s", "t"],
        summary: "product of logistic edges",
        build: |p| UnivariateSpec::bl(p[0], p[1], p[2], p[3]),
    },
    FamilyEntry {
        tag: FamilyTag::BD,
        params: &["a", "b", "s", "t"],
        summary: "product of Laplace edges",
        build: |p| UnivariateSpec::bd(p[0], p[1], p[2], p[3]),
    },
    FamilyEntry {
        tag: FamilyTag::CC,
        params: &["m", "s", "beta"],
        summary: "generalized Cauchy",
        build: |p| UnivariateSpec::cc(p[0], p[1], p[2]),
    },
    FamilyEntry {
        tag: FamilyTag::CF,
        params: &["m", "r", "s", "beta"],
        summary: "generalized Fermi-Dirac",
        build: |p| UnivariateSpec::cf(p[0], p[1], p[2], p[3]),
    },
    FamilyEntry {
        tag: FamilyTag::CE,
        params: &["a", "b", "s"],
        summary: "Ferreri",
        build: |p| UnivariateSpec::ce(p[0], p[1], p[2]),
    },
    FamilyEntry {
        tag: FamilyTag::CH,
        params: &["m", "r", "s", "beta"],
        summary: "hyperbolic Fermi",
        build: |p| UnivariateSpec::ch(p[0], p[1], p[2], p[3]),
    },
    FamilyEntry {
        tag: FamilyTag::DE,
        params: &["m", "s"],
        summary: "saturated power law",
        build: |p| UnivariateSpec::de(p[0], p[1]),
    },
];

pub fn entries() -> &'static [FamilyEntry] {
    &ENTRIES
}

pub fn entry(tag: FamilyTag) -> &'static FamilyEntry {
    ENTRIES
        .iter()
        .find(|e| e.tag == tag)
        .expect("every tag has a registry entry")
}

pub fn build(tag: FamilyTag, params: &ParamMap) -> Result<UnivariateSpec> {
    entry(tag).build(params)
}

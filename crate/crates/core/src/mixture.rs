//! Gaussian mixtures fitted by EM and flat-topped mixtures fitted by a
//! generalized EM whose M-step is a single coordinate-ascent pass.
//!
//! The flat-topped pipeline runs in three steps: fit a GMM, swap every
//! Gaussian for a symmetric AL (per axis), then continue with GEM. In one
//! dimension, components whose AL turns out flat-topped are promoted to BL.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{seeded_rng, Dataset, SeededRng};
use crate::error::{Error, Result};
use crate::flatness::family_flat_bound;
use crate::mle::{al_log_pdf, al_pass, bl_pass, Bounds, FitSettings};
use crate::specfun::log_sum_exp;
use crate::univariate::{r_n, s_n, UnivariateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlAxis {
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// Full-covariance normal.
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Product of independent AL densities, one per axis.
    AlProduct { axes: Vec<AlAxis> },
    /// Univariate BL.
    Bl { a: f64, b: f64, s: f64, t: f64 },
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Gaussian { mean, .. } => mean.len(),
            Component::AlProduct { axes } => axes.len(),
            Component::Bl { .. } => 1,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Component::Gaussian { mean, .. } => {
                let d = mean.len();
                d + d * (d + 1) / 2
            }
            Component::AlProduct { axes } => 3 * axes.len(),
            Component::Bl { .. } => 4,
        }
    }

    pub fn is_flat_family(&self) -> bool {
        !matches!(self, Component::Gaussian { .. })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Component::Gaussian { mean, cov } => {
                gaussian_factor(mean, cov)?;
            }
            Component::AlProduct { axes } => {
                for ax in axes {
                    UnivariateSpec::al(ax.a, ax.b, ax.s)?;
                }
            }
            Component::Bl { a, b, s, t } => {
                UnivariateSpec::bl(*a, *b, *s, *t)?;
            }
        }
        Ok(())
    }

    /// ln p(x_i) for every row.
    pub fn log_pdf_rows(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        match self {
            Component::Gaussian { mean, cov } => {
                let (l, log_det) = gaussian_factor(mean, cov)?;
                let d = mean.len();
                let head = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
                let m = DVector::from_column_slice(mean);
                data.rows()
                    .map(|x| {
                        let diff = DVector::from_column_slice(x) - &m;
                        let y = l
                            .solve_lower_triangular(&diff)
                            .ok_or_else(|| Error::NearSingular("covariance factor".into()))?;
                        Ok(head - 0.5 * y.norm_squared())
                    })
                    .collect()
            }
            Component::AlProduct { axes } => Ok(data
                .rows()
                .map(|x| axes.iter().zip(x).map(|(ax, &v)| al_log_pdf(v, ax.a, ax.b, ax.s)).sum())
                .collect()),
            Component::Bl { a, b, s, t } => {
                let spec = UnivariateSpec::bl(*a, *b, *s, *t)?;
                Ok(data.rows().map(|x| spec.log_pdf(x[0])).collect())
            }
        }
    }
}

fn gaussian_factor(mean: &[f64], cov: &[Vec<f64>]) -> Result<(DMatrix<f64>, f64)> {
    let d = mean.len();
    if cov.len() != d || cov.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cov.len(),
        });
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let l = m
        .cholesky()
        .ok_or_else(|| Error::NearSingular("covariance is not positive definite".into()))?
        .unpack();
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((l, log_det))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MixtureModel {
    weights: Vec<f64>,
    components: Vec<Component>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "K")]
    k: usize,
    weights: Vec<f64>,
    components: Vec<Component>,
    factorized: bool,
}

impl TryFrom<RawModel> for MixtureModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        if raw.k != raw.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: raw.k,
                got: raw.weights.len(),
            });
        }
        let model = MixtureModel::new(raw.weights, raw.components)?;
        if model.factorized() != raw.factorized {
            return Err(Error::Domain("`factorized` disagrees with the component kinds".into()));
        }
        Ok(model)
    }
}

impl From<MixtureModel> for RawModel {
    fn from(m: MixtureModel) -> Self {
        RawModel {
            k: m.k(),
            factorized: m.factorized(),
            weights: m.weights,
            components: m.components,
        }
    }
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::Domain("need one weight per component and at least one component".into()));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Domain("weights must lie in [0, 1]".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        let dim = components[0].dim();
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
            c.validate()?;
        }
        Ok(MixtureModel { weights, components })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// True when every component is a product of univariate flat-topped factors.
    pub fn factorized(&self) -> bool {
        self.components.iter().all(Component::is_flat_family)
    }

    pub fn free_param_count(&self) -> usize {
        self.k() - 1 + self.components.iter().map(Component::param_count).sum::<usize>()
    }

    /// Reorders components by `order` (a permutation of 0..K).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k()];
        for &i in order {
            if i >= self.k() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Domain("not a permutation".into()));
            }
        }
        if order.len() != self.k() {
            return Err(Error::Domain("not a permutation".into()));
        }
        Ok(MixtureModel {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
        })
    }

    pub fn loglik(&self, data: &Dataset) -> Result<f64> {
        Ok(e_step(self, data)?.loglik)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Posterior component probabilities, one row per observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities {
    /// N × K, row-major.
    pub w: Vec<f64>,
    pub k: usize,
    /// Points whose densities underflowed under every component.
    pub flagged: Vec<usize>,
}

impl Responsibilities {
    pub fn n(&self) -> usize {
        self.w.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.w[i * self.k + k]).collect()
    }

    /// CSV with header `w0,...,w{K-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = (0..self.k).map(|k| format!("w{k}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EStep {
    pub resp: Responsibilities,
    /// Expected complete-data log-likelihood.
    pub q: f64,
    /// Observed-data log-likelihood.
    pub loglik: f64,
}

pub fn e_step(model: &MixtureModel, data: &Dataset) -> Result<EStep> {
    if data.is_empty() {
        return Err(Error::Degenerate("empty data".into()));
    }
    let k = model.k();
    let n = data.len();
    let mut joint = vec![0.0; n * k];
    for (j, c) in model.components.iter().enumerate() {
        let lp = c.log_pdf_rows(data)?;
        let lw = model.weights[j].ln();
        for i in 0..n {
            joint[i * k + j] = lw + lp[i];
        }
    }
    let mut w = vec![0.0; n * k];
    let mut flagged = Vec::new();
    let (mut q, mut loglik) = (0.0, 0.0);
    for i in 0..n {
        let row = &joint[i * k..(i + 1) * k];
        let lse = log_sum_exp(row);
        if !lse.is_finite() {
            flagged.push(i);
            w[i * k..(i + 1) * k].fill(1.0 / k as f64);
            continue;
        }
        loglik += lse;
        let mut total = 0.0;
        for j in 0..k {
            let v = (row[j] - lse).exp();
            w[i * k + j] = v;
            total += v;
        }
        for j in 0..k {
            w[i * k + j] /= total;
            if w[i * k + j] > 0.0 {
                q += w[i * k + j] * row[j];
            }
        }
    }
    if !flagged.is_empty() {
        loglik = f64::NEG_INFINITY;
    }
    Ok(EStep {
        resp: Responsibilities { w, k, flagged },
        q,
        loglik,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmSettings {
    pub max_cycles: usize,
    /// Stop when |Δl|/|l| stays below this for `patience` consecutive cycles.
    pub rel_tol: f64,
    pub patience: usize,
    pub restarts: usize,
    /// Covariance eigenvalue floor as a fraction of the mean data variance.
    pub cov_floor: f64,
    /// Flatness bound below which a 1D AL component is promoted to BL.
    pub upgrade_threshold: Option<f64>,
    pub fit: FitSettings,
}

impl Default for EmSettings {
    fn default() -> Self {
        EmSettings {
            max_cycles: 300,
            rel_tol: 1e-8,
            patience: 3,
            restarts: 8,
            cov_floor: 1e-8,
            upgrade_threshold: Some(0.05),
            fit: FitSettings {
                ascent_slack: 0.0,
                ..FitSettings::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub converged: bool,
    pub iterations: usize,
    pub loglik_trace: Vec<f64>,
    pub loglik: f64,
    pub n_obs: usize,
    pub free_params: usize,
    pub aic: f64,
    pub bic: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged_points: Vec<usize>,
    /// Components promoted from AL to BL.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub upgraded: Vec<usize>,
    pub reseeds: usize,
}

/// (AIC, BIC) of a model on data.
pub fn score(model: &MixtureModel, data: &Dataset) -> Result<(f64, f64)> {
    let l = model.loglik(data)?;
    let k = model.free_param_count();
    Ok((crate::mle::aic(l, k), crate::mle::bic(l, k, data.len())))
}

fn finish(model: &MixtureModel, data: &Dataset, trace: Vec<f64>, converged: bool, flagged: Vec<usize>) -> MixtureReport {
    let loglik = *trace.last().expect("trace holds at least one value");
    let k = model.free_param_count();
    MixtureReport {
        converged,
        iterations: trace.len() - 1,
        loglik,
        n_obs: data.len(),
        free_params: k,
        aic: crate::mle::aic(loglik, k),
        bic: crate::mle::bic(loglik, k, data.len()),
        loglik_trace: trace,
        flagged_points: flagged,
        upgraded: vec![],
        reseeds: 0,
    }
}

/// Tracks the relative-change stopping rule.
struct StopRule {
    quiet: usize,
    patience: usize,
    rel_tol: f64,
}

impl StopRule {
    fn new(settings: &EmSettings) -> Self {
        StopRule {
            quiet: 0,
            patience: settings.patience.max(1),
            rel_tol: settings.rel_tol,
        }
    }

    fn update(&mut self, prev: f64, cur: f64) -> bool {
        if (cur - prev).abs() <= self.rel_tol * cur.abs() {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        self.quiet >= self.patience
    }
}

// ---------------------------------------------------------------- GMM

fn data_variance(data: &Dataset) -> Vec<f64> {
    (0..data.dim())
        .map(|j| {
            let col = data.column(j);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Weighted mean and covariance with eigenvalues floored at `floor`.
fn gaussian_from_weights(data: &Dataset, w: &[f64], floor: f64) -> Component {
    let d = data.dim();
    let total: f64 = w.iter().sum();
    let mut mean = DVector::zeros(d);
    for (x, &wi) in data.rows().zip(w) {
        mean += DVector::from_column_slice(x) * wi;
    }
    mean /= total;
    let mut cov = DMatrix::zeros(d, d);
    for (x, &wi) in data.rows().zip(w) {
        let diff = DVector::from_column_slice(x) - &mean;
        cov += &diff * diff.transpose() * wi;
    }
    cov /= total;
    let cov = 0.5 * (&cov + cov.transpose());
    let mut eig = SymmetricEigen::new(cov.clone());
    let cov = if eig.eigenvalues.iter().any(|v| *v < floor) {
        for v in eig.eigenvalues.iter_mut() {
            *v = v.max(floor);
        }
        let r = eig.recompose();
        0.5 * (&r + r.transpose())
    } else {
        cov
    };
    Component::Gaussian {
        mean: mean.iter().copied().collect(),
        cov: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
    }
}

fn kmeans_pp(data: &Dataset, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    let n = data.len();
    let dist2 = |i: usize, j: usize| -> f64 { data.row(i).iter().zip(data.row(j)).map(|(a, b)| (a - b).powi(2)).sum() };
    let mut centers = vec![rng.random_range(0..n)];
    let mut best: Vec<f64> = (0..n).map(|i| dist2(i, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut pick = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if pick < d {
                    idx = i;
                    break;
                }
                pick -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(i, next));
        }
    }
    centers
}

/// Hard assignment to the nearest center, as responsibilities.
fn hard_assign(data: &Dataset, centers: &[usize]) -> Vec<Vec<f64>> {
    let k = centers.len();
    let mut cols = vec![vec![0.0; data.len()]; k];
    for (i, x) in data.rows().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for (j, &c) in centers.iter().enumerate() {
            let d: f64 = x.iter().zip(data.row(c)).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.0 {
                best = (d, j);
            }
        }
        cols[best.1][i] = 1.0;
    }
    cols
}

/// Effective count below which a component counts as collapsed.
const COLLAPSE: f64 = 1e-3;

fn gmm_m_step(data: &Dataset, cols: &[Vec<f64>], floor: f64) -> (Vec<f64>, Vec<Component>, Vec<usize>) {
    let n = data.len() as f64;
    let mut weights = Vec::with_capacity(cols.len());
    let mut comps = Vec::with_capacity(cols.len());
    let mut empty = Vec::new();
    for (j, w) in cols.iter().enumerate() {
        let total: f64 = w.iter().sum();
        if total < COLLAPSE {
            empty.push(j);
            weights.push(0.0);
            comps.push(Component::Gaussian {
                mean: vec![0.0; data.dim()],
                cov: vec![vec![0.0; data.dim()]; data.dim()],
            });
            continue;
        }
        weights.push(total / n);
        comps.push(gaussian_from_weights(data, w, floor));
    }
    (weights, comps, empty)
}

/// Replaces collapsed components by a Gaussian centred on the point with the
/// lowest mixture density, covering the data variance over K.
fn reseed(data: &Dataset, cols: &mut [Vec<f64>], empty: &[usize], worst: usize) {
    let k = cols.len();
    let var = data_variance(data);
    let centre = data.row(worst);
    for &j in empty {
        for (i, x) in data.rows().enumerate() {
            let d2: f64 = x.iter().zip(centre).zip(&var).map(|((a, b), v)| (a - b).powi(2) / (v / k as f64)).sum();
            cols[j][i] = (-0.5 * d2).exp();
        }
    }
}

fn columns(resp: &Responsibilities) -> Vec<Vec<f64>> {
    (0..resp.k).map(|k| resp.column(k)).collect()
}

fn gmm_once(data: &Dataset, k: usize, rng: &mut SeededRng, settings: &EmSettings, floor: f64) -> Result<(MixtureModel, MixtureReport)> {
    let centers = kmeans_pp(data, k, rng);
    let mut cols = hard_assign(data, &centers);
    let mut reseeded = vec![false; k];
    let mut reseeds = 0;
    let mut trace = Vec::new();
    let mut rule = StopRule::new(settings);
    let mut converged = false;
    let mut worst = 0;
    loop {
        let (weights, comps, empty) = gmm_m_step(data, &cols, floor);
        if !empty.is_empty() {
            if empty.iter().any(|&j| reseeded[j]) {
                return Err(Error::Degenerate("mixture component collapsed twice".into()));
            }
            for &j in &empty {
                reseeded[j] = true;
            }
            reseeds += empty.len();
            reseed(data, &mut cols, &empty, worst);
            trace.clear();
            rule.quiet = 0;
            continue;
        }
        let total: f64 = weights.iter().sum();
        let model = MixtureModel::new(weights.iter().map(|w| w / total).collect(), comps)?;
        let e = e_step(&model, data)?;
        if let Some(&prev) = trace.last() {
            if rule.update(prev, e.loglik) {
                converged = true;
            }
        }
        trace.push(e.loglik);
        // the point least explained by the current fit seeds any reseed
        worst = {
            let lp: Vec<f64> = (0..data.len()).map(|i| e.resp.row(i).iter().cloned().fold(0.0, f64::max)).collect();
            lp.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i)
        };
        if converged || trace.len() > settings.max_cycles {
            let mut rep = finish(&model, data, trace, converged, e.resp.flagged.clone());
            rep.reseeds = reseeds;
            return Ok((model, rep));
        }
        cols = columns(&e.resp);
    }
}

fn check_k(data: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    if data.len() <= k {
        return Err(Error::Degenerate(format!("need more than K={k} observations, got {}", data.len())));
    }
    Ok(())
}

/// Standard EM with k-means++ seeding; the best of `restarts` runs is kept.
pub fn gmm_fit(data: &Dataset, k: usize, seed: u64, settings: &EmSettings) -> Result<(MixtureModel, MixtureReport)> {
    check_k(data, k)?;
    let var = data_variance(data);
    let floor = settings.cov_floor * var.iter().sum::<f64>() / var.len() as f64;
    let mut rng = seeded_rng(seed);
    let mut best: Option<(MixtureModel, MixtureReport)> = None;
    let mut last_err = None;
    for _ in 0..settings.restarts.max(1) {
        match gmm_once(data, k, &mut rng, settings, floor) {
            Ok((m, r)) => {
                if best.as_ref().is_none_or(|(_, b)| r.loglik > b.loglik) {
                    best = Some((m, r));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Convergence("no GMM restart succeeded".into())))
}

// ---------------------------------------------------------------- FTM

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceHandling {
    /// Reject covariances with nonzero off-diagonal entries.
    Strict,
    /// Use only the diagonal.
    DropOffDiagonal,
}

/// Replaces each Gaussian by AL{μ − σr_N, μ + σr_N, σs_N} on every axis.
pub fn ftm_from_gmm(gmm: &MixtureModel, handling: CovarianceHandling) -> Result<MixtureModel> {
    let mut comps = Vec::with_capacity(gmm.k());
    for c in &gmm.components {
        let Component::Gaussian { mean, cov } = c else {
            return Err(Error::Domain("ftm_from_gmm expects Gaussian components".into()));
        };
        if handling == CovarianceHandling::Strict {
            for (i, row) in cov.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i != j && *v != 0.0 {
                        return Err(Error::Unsupported(
                            "non-diagonal covariance; flat-topped components are axis-aligned products \
                             (use the off-diagonal-dropping conversion)"
                                .into(),
                        ));
                    }
                }
            }
        }
        let axes = mean
            .iter()
            .enumerate()
            .map(|(j, mu)| {
                let sd = cov[j][j].sqrt();
                AlAxis {
                    a: mu - sd * r_n(),
                    b: mu + sd * r_n(),
                    s: sd * s_n(),
                }
            })
            .collect();
        comps.push(Component::AlProduct { axes });
    }
    MixtureModel::new(gmm.weights.clone(), comps)
}

/// Closed-form weights plus one coordinate pass per flat-topped component.
pub fn m_step(model: &MixtureModel, data: &Dataset, resp: &Responsibilities, settings: &EmSettings) -> Result<MixtureModel> {
    if resp.n() != data.len() || resp.k != model.k() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: resp.n(),
        });
    }
    let n = data.len() as f64;
    let cols = columns(resp);
    let var = data_variance(data);
    let floor = settings.cov_floor * var.iter().sum::<f64>() / var.len() as f64;
    let mut weights: Vec<f64> = cols.iter().map(|w| w.iter().sum::<f64>() / n).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let axes_data: Vec<Vec<f64>> = (0..data.dim()).map(|j| data.column(j)).collect();
    let mut comps = Vec::with_capacity(model.k());
    for (c, w) in model.components.iter().zip(&cols) {
        let mass: f64 = w.iter().sum();
        if mass < COLLAPSE {
            comps.push(c.clone());
            continue;
        }
        let next = match c {
            Component::Gaussian { .. } => gaussian_from_weights(data, w, floor),
            Component::AlProduct { axes } => {
                let mut out = Vec::with_capacity(axes.len());
                for (ax, xs) in axes.iter().zip(&axes_data) {
                    let bounds = Bounds::from_data(xs, Some(w))?.containing(ax.a, ax.b, &[ax.s]);
                    let ([a, b, s], _, _) = al_pass(xs, Some(w), [ax.a, ax.b, ax.s], &bounds, &settings.fit);
                    out.push(AlAxis { a, b, s });
                }
                Component::AlProduct { axes: out }
            }
            Component::Bl { a, b, s, t } => {
                let xs = &axes_data[0];
                let bounds = Bounds::from_data(xs, Some(w))?.containing(*a, *b, &[*s, *t]);
                let ([a, b, s, t], _, _) = bl_pass(xs, Some(w), [*a, *b, *s, *t], &bounds, &settings.fit)?;
                Component::Bl { a, b, s, t }
            }
        };
        comps.push(next);
    }
    MixtureModel::new(weights, comps)
}

/// Promotes flat-topped 1D AL components to BL with t = s.
fn upgrade_flat(model: &MixtureModel, threshold: f64) -> Result<(MixtureModel, Vec<usize>)> {
    let mut comps = model.components.clone();
    let mut upgraded = Vec::new();
    for (j, c) in comps.iter_mut().enumerate() {
        if let Component::AlProduct { axes } = c {
            if axes.len() != 1 {
                continue;
            }
            let ax = axes[0];
            let spec = UnivariateSpec::al(ax.a, ax.b, ax.s)?;
            if family_flat_bound(&*spec).is_some_and(|b| b.value < threshold) {
                *c = Component::Bl {
                    a: ax.a,
                    b: ax.b,
                    s: ax.s,
                    t: ax.s,
                };
                upgraded.push(j);
            }
        }
    }
    Ok((MixtureModel::new(model.weights.clone(), comps)?, upgraded))
}

/// Generalized EM from `init` until the stopping rule or the cycle cap.
pub fn ftm_fit(data: &Dataset, init: &MixtureModel, settings: &EmSettings) -> Result<(MixtureModel, MixtureReport)> {
    check_k(data, init.k())?;
    let mut model = init.clone();
    let mut e = e_step(&model, data)?;
    let mut trace = vec![e.loglik];
    let mut rule = StopRule::new(settings);
    let mut upgraded = Vec::new();
    let mut may_upgrade = settings.upgrade_threshold.filter(|_| data.dim() == 1);
    let mut converged = false;
    while trace.len() <= settings.max_cycles {
        let next = m_step(&model, data, &e.resp, settings)?;
        let e_next = e_step(&next, data)?;
        model = next;
        e = e_next;
        let prev = *trace.last().expect("nonempty");
        trace.push(e.loglik);
        if rule.update(prev, e.loglik) {
            match may_upgrade.take() {
                Some(threshold) => {
                    let (m, up) = upgrade_flat(&model, threshold)?;
                    if up.is_empty() {
                        converged = true;
                        break;
                    }
                    model = m;
                    upgraded = up;
                    e = e_step(&model, data)?;
                    rule.quiet = 0;
                }
                None => {
                    converged = true;
                    break;
                }
            }
        }
    }
    let mut rep = finish(&model, data, trace, converged, e.resp.flagged.clone());
    rep.upgraded = upgraded;
    Ok((model, rep))
}

// ---------------------------------------------------------------- strategies

/// A way to fit a K-component mixture, looked up by name for sweeps.
pub trait MixtureStrategy: Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, data: &Dataset, k: usize, seed: u64, settings: &EmSettings) -> Result<(MixtureModel, MixtureReport)>;
}

pub struct GmmStrategy;

impl MixtureStrategy for GmmStrategy {
    fn name(&self) -> &'static str {
        "GMM"
    }

    fn fit(&self, data: &Dataset, k: usize, seed: u64, settings: &EmSettings) -> Result<(MixtureModel, MixtureReport)> {
        gmm_fit(data, k, seed, settings)
    }
}

/// GMM, then per-axis AL conversion, then GEM.
pub struct FtmStrategy;

impl MixtureStrategy for FtmStrategy {
    fn name(&self) -> &'static str {
        "FTM"
    }

    fn fit(&self, data: &Dataset, k: usize, seed: u64, settings: &EmSettings) -> Result<(MixtureModel, MixtureReport)> {
        let (gmm, _) = gmm_fit(data, k, seed, settings)?;
        let init = ftm_from_gmm(&gmm, CovarianceHandling::DropOffDiagonal)?;
        ftm_fit(data, &init, settings)
    }
}

static STRATEGIES: [&dyn MixtureStrategy; 2] = [&GmmStrategy, &FtmStrategy];

pub fn strategies() -> &'static [&'static dyn MixtureStrategy] {
    &STRATEGIES
}

pub fn strategy(name: &str) -> Result<&'static dyn MixtureStrategy> {
    STRATEGIES
        .iter()
        .copied()
        .find(|s| s.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownFamily(name.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub iterations: Option<usize>,
    pub loglik_per_n: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub strategy: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// K of the smallest AIC, ignoring failed rows.
    pub fn argmin_aic(&self) -> Option<usize> {
        self.argmin(|r| r.aic)
    }

    pub fn argmin_bic(&self) -> Option<usize> {
        self.argmin(|r| r.bic)
    }

    fn argmin(&self, key: impl Fn(&SweepRow) -> Option<f64>) -> Option<usize> {
        self.rows
            .iter()
            .filter_map(|r| key(r).map(|v| (r.k, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    }

    /// CSV with header `K,it,loglik_per_N,AIC,BIC`; failed rows leave fields empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,it,loglik_per_N,AIC,BIC\n");
        let f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
        for r in &self.rows {
            let it = r.iterations.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(out, "{},{},{},{},{}", r.k, it, f(r.loglik_per_n), f(r.aic), f(r.bic));
        }
        out
    }
}

/// One fit per K; failures are recorded and the sweep continues.
pub fn sweep(data: &Dataset, strategy_name: &str, ks: impl IntoIterator<Item = usize>, seed: u64, settings: &EmSettings) -> Result<SweepTable> {
    let strat = strategy(strategy_name)?;
    let n = data.len() as f64;
    let rows: Vec<SweepRow> = ks
        .into_iter()
        .map(|k| match strat.fit(data, k, seed, settings) {
            Ok((_, rep)) => SweepRow {
                k,
                iterations: Some(rep.iterations),
                loglik_per_n: Some(rep.loglik / n),
                aic: Some(rep.aic),
                bic: Some(rep.bic),
                error: None,
            },
            Err(e) => SweepRow {
                k,
                iterations: None,
                loglik_per_n: None,
                aic: None,
                bic: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Domain("empty K range".into()));
    }
    Ok(SweepTable {
        strategy: strat.name().to_string(),
        rows,
    })
}

/// Per-component parameter listing, for reports.
pub fn describe(model: &MixtureModel) -> Vec<BTreeMap<String, f64>> {
    model
        .components
        .iter()
        .zip(&model.weights)
        .map(|(c, w)| {
            let mut m = BTreeMap::new();
            m.insert("weight".to_string(), *w);
            match c {
                Component::Gaussian { mean, cov } => {
                    for (j, v) in mean.iter().enumerate() {
                        m.insert(format!("mean{j}"), *v);
                        m.insert(format!("var{j}"), cov[j][j]);
                    }
                }
                Component::AlProduct { axes } => {
                    for (j, ax) in axes.iter().enumerate() {
                        m.insert(format!("a{j}"), ax.a);
                        m.insert(format!("b{j}"), ax.b);
                        m.insert(format!("s{j}"), ax.s);
                    }
                }
                Component::Bl { a, b, s, t } => {
                    m.insert("a".into(), *a);
                    m.insert("b".into(), *b);
                    m.insert("s".into(), *s);
                    m.insert("t".into(), *t);
                }
            }
            m
        })
        .collect()
}

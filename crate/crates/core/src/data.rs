//! Datasets, synthetic generators and CSV persistence.
//!
//! All generators draw from a ChaCha8 stream seeded with a `u64`, which is
//! portable across platforms and gives bit-identical output for equal seeds.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seeded generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    provenance: String,
}

impl Dataset {
    /// Row-major values of `dim` columns.
    pub fn new(dim: usize, values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dataset dimension must be at least 1".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: values.len() % dim,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value in row {}", i / dim)));
        }
        Ok(Dataset {
            dim,
            values,
            weights: None,
            provenance: provenance.into(),
        })
    }

    pub fn univariate(values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        Dataset::new(1, values, provenance)
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Dataset::new(dim, values, provenance)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be positive and finite".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Flat row-major storage.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// The observations of a one-column dataset.
    pub fn as_univariate(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dim,
            });
        }
        Ok(&self.values)
    }
}

/// 40 draws from U(0,100) followed by 15 from N(60, 35²).
pub fn gen_mixed_1d(seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut v = Vec::with_capacity(55);
    for _ in 0..40 {
        v.push(100.0 * rng.random::<f64>());
    }
    let normal = Normal::new(60.0, 35.0).expect("valid normal");
    for _ in 0..15 {
        v.push(normal.sample(&mut rng));
    }
    Dataset::univariate(v, format!("mixed_1d seed={seed}")).expect("finite draws")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl Segment {
    pub fn length(&self) -> f64 {
        ((self.end[0] - self.start[0]).powi(2) + (self.end[1] - self.start[1]).powi(2)).sqrt()
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.start[0] == self.end[0] || self.start[1] == self.end[1]
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        [
            self.start[0] + t * (self.end[0] - self.start[0]),
            self.start[1] + t * (self.end[1] - self.start[1]),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentsScenario {
    pub segments: Vec<Segment>,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

const DEFAULT_SCENARIO: &str = include_str!("../data/segments_default.json");

impl Default for SegmentsScenario {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SCENARIO).expect("bundled scenario parses")
    }
}

impl SegmentsScenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: SegmentsScenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        SegmentsScenario::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Domain("scenario needs at least one segment".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !s.is_axis_aligned() {
                return Err(Error::Domain(format!("segment {i} is not axis-aligned")));
            }
            if !(s.length() > 0.0) {
                return Err(Error::Domain(format!("segment {i} has zero length")));
            }
        }
        if self.n_points == 0 {
            return Err(Error::Domain("n_points must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Domain("noise_sigma must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Points drawn uniformly on the segments (probability proportional to
/// length) plus isotropic Gaussian noise.
pub fn gen_segments_2d(scenario: &SegmentsScenario) -> Result<Dataset> {
    Ok(gen_segments_2d_labeled(scenario)?.0)
}

/// As [`gen_segments_2d`], also returning the source segment of every point.
pub fn gen_segments_2d_labeled(scenario: &SegmentsScenario) -> Result<(Dataset, Vec<usize>)> {
    scenario.validate()?;
    let mut rng = seeded_rng(scenario.seed);
    let lengths: Vec<f64> = scenario.segments.iter().map(Segment::length).collect();
    let total: f64 = lengths.iter().sum();
    let mut values = Vec::with_capacity(2 * scenario.n_points);
    let mut labels = Vec::with_capacity(scenario.n_points);
    for _ in 0..scenario.n_points {
        let mut pick = rng.random::<f64>() * total;
        let mut k = 0;
        while k + 1 < lengths.len() && pick >= lengths[k] {
            pick -= lengths[k];
            k += 1;
        }
        let t = rng.random::<f64>();
        let p = scenario.segments[k].point_at(t);
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        values.push(p[0] + scenario.noise_sigma * nx);
        values.push(p[1] + scenario.noise_sigma * ny);
        labels.push(k);
    }
    let ds = Dataset::new(2, values, format!("segments_2d seed={}", scenario.seed))?;
    Ok((ds, labels))
}

pub fn read_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let f = std::fs::File::open(path)?;
    let mut ds = read_csv_from(f, has_header)?;
    ds.provenance = format!("csv {}", path.display());
    Ok(ds)
}

pub fn read_csv_from<R: Read>(reader: R, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut dim = None;
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let width = rec.len();
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {d} fields, found {width}"),
                })
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value `{field}`"),
                });
            }
            values.push(v);
        }
    }
    let dim = dim.ok_or_else(|| Error::Degenerate("CSV contains no observations".into()))?;
    Dataset::new(dim, values, "csv")
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv_to(dataset, f)
}

/// Writes one observation per line using shortest round-trip formatting.
pub fn write_csv_to<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in dataset.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

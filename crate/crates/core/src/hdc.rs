//! Hyperdimensional classifier running on the fabric.
//!
//! Encoding projects an N-feature vector onto D binary dimensions,
//! `raw_j = sum_i q(v_i) * b_ij`, with `q` a min-max quantizer to `quant_bits`
//! unsigned bits and `b_i` random binary base vectors. On the fabric the sum
//! is computed bit-serially, one binary MAC per quantized bit-plane, and
//! shift-added. The raw vector is binarized against its own median.
//!
//! Training adds encoded hypervectors of each class into integer accumulators
//! and takes the per-bit majority. Inference picks the class at the smallest
//! Hamming distance, which the fabric computes as a CAM search.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bits::BitVector;
use crate::fabric::Fabric;
use crate::rng;
use crate::{Error, Result};

pub type Label = i64;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A D-bit binary hypervector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypervector(pub BitVector);

impl Hypervector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        self.0.hamming(&other.0)
    }
}

/// N random binary base vectors of D bits each, drawn once from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMatrix {
    seed: u64,
    dim: usize,
    rows: Vec<BitVector>,
}

impl BaseMatrix {
    pub fn random(n_features: usize, dim: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let rows = (0..n_features)
            .map(|_| {
                let bits: Vec<bool> = (0..dim).map(|_| rng.random()).collect();
                BitVector::from_bools(&bits)
            })
            .collect();
        Self { seed, dim, rows }
    }

    pub fn from_rows(seed: u64, rows: Vec<BitVector>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("base vectors must share one dimension"));
        }
        Ok(Self { seed, dim, rows })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }
}

/// Per-feature min-max quantizer onto `bits`-bit unsigned integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    bits: u32,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Quantizer {
    pub fn fit(bits: u32, data: &[FeatureVector]) -> Result<Self> {
        if bits == 0 || bits > 31 {
            return Err(Error::InvalidParameter("quant_bits must be in 1..=31"));
        }
        let n = data.first().map(|f| f.len()).ok_or(Error::InvalidParameter("cannot fit a quantizer on no data"))?;
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for f in data {
            if f.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: f.len() });
            }
            for (i, &v) in f.0.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter("features must be finite"));
                }
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Self { bits, min, max })
    }

    pub fn from_ranges(bits: u32, min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > 31 {
            return Err(Error::InvalidParameter("quant_bits must be in 1..=31"));
        }
        if min.len() != max.len() {
            return Err(Error::LengthMismatch { expected: min.len(), found: max.len() });
        }
        Ok(Self { bits, min, max })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// Values outside the fitted range saturate. Constant features map to 0.
    pub fn quantize(&self, f: &FeatureVector) -> Result<Vec<u32>> {
        if f.len() != self.min.len() {
            return Err(Error::LengthMismatch { expected: self.min.len(), found: f.len() });
        }
        let top = ((1u64 << self.bits) - 1) as f64;
        Ok(f.0
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if !(span > 0.0) {
                    return 0;
                }
                libm::round(((v - lo) / span * top).clamp(0.0, top)) as u32
            })
            .collect())
    }
}

/// Where encoding MACs and similarity searches run.
pub enum Backend<'a> {
    /// Exact integer arithmetic.
    Software,
    /// Tiled TD-CiM arrays.
    Fabric(&'a mut Fabric),
}

/// Raw projection `sum_i q_i * b_ij` in software.
pub fn project_software(q: &[u32], base: &BaseMatrix) -> Vec<u64> {
    let mut raw = vec![0u64; base.dim()];
    for (&qi, row) in q.iter().zip(base.rows()) {
        if qi == 0 {
            continue;
        }
        for (j, r) in raw.iter_mut().enumerate() {
            if row.get(j) {
                *r += qi as u64;
            }
        }
    }
    raw
}

/// Raw projection computed bit-serially on the fabric.
pub fn project_fabric(q: &[u32], quant_bits: u32, base: &BaseMatrix, fabric: &mut Fabric) -> Result<Vec<u64>> {
    fabric.load_base(base.seed(), base.rows(), base.dim())?;
    let mut raw = vec![0u64; base.dim()];
    for b in 0..quant_bits {
        let plane: Vec<bool> = q.iter().map(|&v| (v >> b) & 1 == 1).collect();
        let plane = BitVector::from_bools(&plane);
        let counts = fabric.mac_plane(&plane)?;
        for (r, c) in raw.iter_mut().zip(counts) {
            *r += (c as u64) << b;
        }
    }
    Ok(raw)
}

/// Sets bit `j` iff `raw[j]` is strictly above the median of `raw`
/// (mean of the two middle values for even lengths).
pub fn binarize(raw: &[u64]) -> Hypervector {
    let mut sorted = raw.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // Compare doubled values to keep the even-length median exact.
    let twice_median = if n == 0 {
        0
    } else if n % 2 == 1 {
        2 * sorted[n / 2] as u128
    } else {
        sorted[n / 2 - 1] as u128 + sorted[n / 2] as u128
    };
    let bits: Vec<bool> = raw.iter().map(|&r| 2 * r as u128 > twice_median).collect();
    Hypervector(BitVector::from_bools(&bits))
}

pub fn encode(features: &FeatureVector, base: &BaseMatrix, quantizer: &Quantizer, backend: &mut Backend<'_>) -> Result<Hypervector> {
    if features.len() != base.n_features() {
        return Err(Error::LengthMismatch { expected: base.n_features(), found: features.len() });
    }
    let q = quantizer.quantize(features)?;
    let raw = match backend {
        Backend::Software => project_software(&q, base),
        Backend::Fabric(f) => project_fabric(&q, quantizer.bits(), base, f)?,
    };
    Ok(binarize(&raw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub label: Label,
    sums: Vec<u32>,
    count: u32,
    hypervector: Option<Hypervector>,
}

impl ClassModel {
    fn new(label: Label, dim: usize) -> Self {
        Self { label, sums: vec![0; dim], count: 0, hypervector: None }
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn hypervector(&self) -> Option<&Hypervector> {
        self.hypervector.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub class_index: usize,
    /// Hamming distance to each class, in class order.
    pub distances: Vec<u32>,
    /// `D - distance` per class.
    pub similarities: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdcModel {
    base: BaseMatrix,
    quant_bits: u32,
    quantizer: Option<Quantizer>,
    /// Sorted by label; the class index is the position here.
    classes: Vec<ClassModel>,
}

impl HdcModel {
    pub fn new(n_features: usize, dim: usize, quant_bits: u32, seed: u64, labels: &[Label]) -> Result<Self> {
        if n_features == 0 || dim == 0 {
            return Err(Error::InvalidParameter("feature count and dimension must be positive"));
        }
        if quant_bits == 0 || quant_bits > 31 {
            return Err(Error::InvalidParameter("quant_bits must be in 1..=31"));
        }
        let mut labels = labels.to_vec();
        labels.sort_unstable();
        labels.dedup();
        if labels.is_empty() {
            return Err(Error::InvalidParameter("at least one class label is required"));
        }
        Ok(Self {
            base: BaseMatrix::random(n_features, dim, seed),
            quant_bits,
            quantizer: None,
            classes: labels.into_iter().map(|l| ClassModel::new(l, dim)).collect(),
        })
    }

    /// Rebuilds a finalized model from stored class hypervectors.
    pub fn from_trained(n_features: usize, seed: u64, quantizer: Quantizer, classes: Vec<(Label, Hypervector)>) -> Result<Self> {
        let dim = classes.first().map(|(_, h)| h.dim()).ok_or(Error::InvalidParameter("at least one class is required"))?;
        if classes.iter().any(|(_, h)| h.dim() != dim) {
            return Err(Error::InvalidParameter("class hypervectors must share one dimension"));
        }
        if quantizer.min().len() != n_features {
            return Err(Error::LengthMismatch { expected: n_features, found: quantizer.min().len() });
        }
        let mut classes = classes;
        classes.sort_by_key(|(l, _)| *l);
        Ok(Self {
            base: BaseMatrix::random(n_features, dim, seed),
            quant_bits: quantizer.bits(),
            quantizer: Some(quantizer),
            classes: classes
                .into_iter()
                .map(|(label, hv)| ClassModel { label, sums: vec![0; dim], count: 0, hypervector: Some(hv) })
                .collect(),
        })
    }

    pub fn base(&self) -> &BaseMatrix {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn n_features(&self) -> usize {
        self.base.n_features()
    }

    pub fn quant_bits(&self) -> u32 {
        self.quant_bits
    }

    pub fn quantizer(&self) -> Option<&Quantizer> {
        self.quantizer.as_ref()
    }

    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn fit_quantizer(&mut self, data: &[FeatureVector]) -> Result<()> {
        let q = Quantizer::fit(self.quant_bits, data)?;
        if q.min().len() != self.n_features() {
            return Err(Error::LengthMismatch { expected: self.n_features(), found: q.min().len() });
        }
        self.quantizer = Some(q);
        Ok(())
    }

    pub fn encode(&self, features: &FeatureVector, backend: &mut Backend<'_>) -> Result<Hypervector> {
        let q = self.quantizer.as_ref().ok_or(Error::Untrained)?;
        encode(features, &self.base, q, backend)
    }

    fn class_index(&self, label: Label) -> Result<usize> {
        self.classes.binary_search_by_key(&label, |c| c.label).map_err(|_| Error::UnknownLabel { label })
    }

    pub fn accumulate(&mut self, hv: &Hypervector, label: Label) -> Result<()> {
        if hv.dim() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), found: hv.dim() });
        }
        let k = self.class_index(label)?;
        let class = &mut self.classes[k];
        for (j, s) in class.sums.iter_mut().enumerate() {
            *s += hv.0.get(j) as u32;
        }
        class.count += 1;
        class.hypervector = None;
        Ok(())
    }

    /// Majority vote per bit, ties to 0.
    pub fn finalize(&mut self) -> Result<()> {
        if let Some(empty) = self.classes.iter().find(|c| c.count == 0) {
            return Err(Error::EmptyClass { label: empty.label });
        }
        for c in &mut self.classes {
            let bits: Vec<bool> = c.sums.iter().map(|&s| 2 * s > c.count).collect();
            c.hypervector = Some(Hypervector(BitVector::from_bools(&bits)));
        }
        Ok(())
    }

    /// Fits the quantizer (if not yet fitted), encodes and accumulates every
    /// example, then finalizes.
    pub fn train(&mut self, examples: &[(FeatureVector, Label)], backend: &mut Backend<'_>) -> Result<()> {
        if self.quantizer.is_none() {
            let data: Vec<FeatureVector> = examples.iter().map(|(f, _)| f.clone()).collect();
            self.fit_quantizer(&data)?;
        }
        for (f, label) in examples {
            let hv = self.encode(f, backend)?;
            self.accumulate(&hv, *label)?;
        }
        self.finalize()
    }

    pub fn class_hypervectors(&self) -> Result<Vec<&Hypervector>> {
        self.classes.iter().map(|c| c.hypervector.as_ref().ok_or(Error::Untrained)).collect()
    }

    pub fn classify(&self, query: &Hypervector, backend: &mut Backend<'_>) -> Result<Prediction> {
        let classes = self.class_hypervectors()?;
        if query.dim() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), found: query.dim() });
        }
        let distances = match backend {
            Backend::Software => classes.iter().map(|c| c.hamming(query)).collect::<Vec<_>>(),
            Backend::Fabric(f) => {
                let rows: Vec<BitVector> = classes.iter().map(|c| c.0.clone()).collect();
                f.load_classes(&rows)?;
                f.search(&query.0)?
            }
        };
        let class_index = crate::array::argmin_first(&distances).ok_or(Error::Untrained)?;
        let d = self.dim() as u32;
        Ok(Prediction {
            label: self.classes[class_index].label,
            class_index,
            similarities: distances.iter().map(|&h| d - h.min(d)).collect(),
            distances,
        })
    }

    pub fn infer(&self, features: &FeatureVector, backend: &mut Backend<'_>) -> Result<Prediction> {
        self.class_hypervectors()?;
        let hv = self.encode(features, backend)?;
        self.classify(&hv, backend)
    }
}

/// Gaussian blobs: one random center per class in `[0, 1]^n`, samples with
/// isotropic noise `spread`, classes interleaved. Labels are `0..n_classes`.
pub fn synthetic_blobs(n_features: usize, n_classes: usize, per_class: usize, spread: f64, seed: u64) -> Vec<(FeatureVector, Label)> {
    let mut rng = rng::seeded(seed);
    let centers: Vec<Vec<f64>> = (0..n_classes).map(|_| (0..n_features).map(|_| rng.random::<f64>()).collect()).collect();
    let mut out = Vec::with_capacity(n_classes * per_class);
    for _ in 0..per_class {
        for (label, c) in centers.iter().enumerate() {
            let v = c
                .iter()
                .map(|&m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + spread * z
                })
                .collect();
            out.push((FeatureVector(v), label as Label));
        }
    }
    out
}

/// Fraction of examples whose predicted label matches.
pub fn accuracy(model: &HdcModel, data: &[(FeatureVector, Label)], backend: &mut Backend<'_>) -> Result<f64> {
    let mut correct = 0usize;
    for (f, l) in data {
        if model.infer(f, backend)?.label == *l {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

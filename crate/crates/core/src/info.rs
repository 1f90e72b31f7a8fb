//! Exact classical information quantities over finite labeled joint
//! distributions.
//!
//! All quantities are in nats. The conventions `0 ln 0 = 0` and
//! `0 ln (0/q) = 0` are applied throughout, and `p ln (p/0) = +inf` for
//! `p > 0`.
//!
//! Tables are stored row-major over the listed axes, last axis fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sums within this distance of 1 are renormalized; others are rejected.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// True when a sum of `n` terms is as close to 1 as summation rounding
/// allows. Such tables are stored untouched, so reloading is idempotent.
fn at_rounding_level(sum: f64, n: usize) -> bool {
    (sum - 1.0).abs() <= 2.0 * n as f64 * f64::EPSILON
}

/// Negative MI/CMI down to this magnitude is floating-point noise and is
/// reported as zero.
pub const NEGATIVE_INFO_TOLERANCE: f64 = 1e-12;

/// A named finite random variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Axis {
            name: name.into(),
            size,
        }
    }
}

pub(crate) fn validate_axes(axes: &[Axis]) -> Result<()> {
    for (i, ax) in axes.iter().enumerate() {
        if ax.size == 0 {
            return Err(Error::InvalidCardinality {
                name: ax.name.clone(),
                size: ax.size,
            });
        }
        if axes[..i].iter().any(|other| other.name == ax.name) {
            return Err(Error::DuplicateAxis(ax.name.clone()));
        }
    }
    Ok(())
}

pub(crate) fn table_len(axes: &[Axis]) -> usize {
    axes.iter().map(|a| a.size).product()
}

/// Row-major strides, last axis fastest.
pub(crate) fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![1; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * sizes[i + 1];
    }
    out
}

/// Decomposes a flat row-major index into per-axis values.
pub(crate) fn unflatten(mut flat: usize, sizes: &[usize], out: &mut [usize]) {
    for i in (0..sizes.len()).rev() {
        out[i] = flat % sizes[i];
        flat /= sizes[i];
    }
}

pub(crate) fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a weight vector (already normalized).
pub fn shannon(probs: &[f64]) -> f64 {
    let h: f64 = -probs.iter().copied().map(xlogx).sum::<f64>();
    h.max(0.0)
}

/// A probability table over the Cartesian product of named axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf")]
pub struct JointPmf {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPmf {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

impl TryFrom<RawPmf> for JointPmf {
    type Error = Error;
    fn try_from(raw: RawPmf) -> Result<Self> {
        JointPmf::new(raw.axes, raw.probs)
    }
}

impl JointPmf {
    /// Validates and stores a table. Entries must be finite and
    /// nonnegative; the sum must be within [`NORM_TOLERANCE`] of 1 and is
    /// then renormalized, unless it is already off by rounding only.
    pub fn new(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        validate_axes(&axes)?;
        let expected = table_len(&axes);
        if probs.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: probs.len(),
            });
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        let probs = if at_rounding_level(sum, probs.len()) {
            probs
        } else {
            probs.into_iter().map(|p| p / sum).collect()
        };
        Ok(JointPmf { axes, probs })
    }

    /// Normalizes arbitrary nonnegative weights with a positive sum.
    pub fn from_weights(axes: Vec<Axis>, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::NotNormalized { sum });
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        JointPmf::new(axes, probs)
    }

    pub fn uniform(axes: Vec<Axis>) -> Result<Self> {
        validate_axes(&axes)?;
        let n = table_len(&axes);
        JointPmf::from_weights(axes, vec![1.0; n])
    }

    /// All mass on one cell, given as per-axis values.
    pub fn point_mass(axes: Vec<Axis>, values: &[usize]) -> Result<Self> {
        validate_axes(&axes)?;
        if values.len() != axes.len() {
            return Err(Error::ShapeMismatch {
                expected: axes.len(),
                got: values.len(),
            });
        }
        let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
        let st = strides(&sizes);
        let mut flat = 0;
        for (i, (&v, ax)) in values.iter().zip(&axes).enumerate() {
            if v >= ax.size {
                return Err(Error::ValueOutOfRange {
                    axis: ax.name.clone(),
                    value: v,
                    size: ax.size,
                });
            }
            flat += v * st[i];
        }
        let mut probs = vec![0.0; table_len(&axes)];
        probs[flat] = 1.0;
        JointPmf::new(axes, probs)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn axis(&self, name: &str) -> Result<&Axis> {
        Ok(&self.axes[self.axis_index(name)?])
    }

    /// Probability of one cell given per-axis values.
    pub fn get(&self, values: &[usize]) -> f64 {
        let st = strides(&self.sizes());
        let flat: usize = values.iter().zip(&st).map(|(v, s)| v * s).sum();
        self.probs[flat]
    }

    /// Resolves names to axis positions, rejecting unknown and repeated names.
    pub fn resolve(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateAxis(name.to_string()));
            }
            out.push(self.axis_index(name)?);
        }
        Ok(out)
    }

    /// Marginal table over the given axis positions, in the given order.
    pub(crate) fn marginal_probs(&self, keep: &[usize]) -> Vec<f64> {
        let sizes = self.sizes();
        let keep_sizes: Vec<usize> = keep.iter().map(|&i| sizes[i]).collect();
        let keep_strides = strides(&keep_sizes);
        let mut out = vec![0.0; keep_sizes.iter().product()];
        let mut idx = vec![0; sizes.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            unflatten(flat, &sizes, &mut idx);
            let target: usize = keep
                .iter()
                .zip(&keep_strides)
                .map(|(&k, s)| idx[k] * s)
                .sum();
            out[target] += p;
        }
        out
    }

    /// Sums out every axis not in `keep`. The result lists axes in the order
    /// given by `keep`.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointPmf> {
        let idx = self.resolve(keep)?;
        let axes = idx.iter().map(|&i| self.axes[i].clone()).collect();
        let probs = self.marginal_probs(&idx);
        JointPmf::from_weights(axes, probs)
    }

    /// Conditions on observed axis values. Returns the conditional table over
    /// the remaining axes (original order) and the probability of the evidence.
    pub fn condition(&self, evidence: &[(&str, usize)]) -> Result<(JointPmf, f64)> {
        let names: Vec<&str> = evidence.iter().map(|(n, _)| *n).collect();
        let idx = self.resolve(&names)?;
        for (&i, &(_, v)) in idx.iter().zip(evidence) {
            if v >= self.axes[i].size {
                return Err(Error::ValueOutOfRange {
                    axis: self.axes[i].name.clone(),
                    value: v,
                    size: self.axes[i].size,
                });
            }
        }
        let rest: Vec<usize> = (0..self.axes.len()).filter(|i| !idx.contains(i)).collect();
        let sizes = self.sizes();
        let rest_sizes: Vec<usize> = rest.iter().map(|&i| sizes[i]).collect();
        let rest_strides = strides(&rest_sizes);
        let mut out = vec![0.0; rest_sizes.iter().product()];
        let mut cell = vec![0; sizes.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            unflatten(flat, &sizes, &mut cell);
            if idx.iter().zip(evidence).any(|(&i, &(_, v))| cell[i] != v) {
                continue;
            }
            let target: usize = rest
                .iter()
                .zip(&rest_strides)
                .map(|(&r, s)| cell[r] * s)
                .sum();
            out[target] += p;
        }
        let evidence_prob: f64 = out.iter().sum();
        if evidence_prob <= 0.0 {
            return Err(Error::ZeroProbabilityEvent);
        }
        let axes = rest.iter().map(|&i| self.axes[i].clone()).collect();
        let pmf = JointPmf::from_weights(axes, out)?;
        Ok((pmf, evidence_prob))
    }

    /// Renames axes; `renames` pairs old names with new ones.
    pub fn renamed(&self, renames: &[(&str, &str)]) -> Result<JointPmf> {
        let mut axes = self.axes.clone();
        for (old, new) in renames {
            let i = self.axis_index(old)?;
            axes[i].name = new.to_string();
        }
        JointPmf::new(axes, self.probs.clone())
    }
}

/// Shannon entropy of the marginal on `subset`.
pub fn entropy(p: &JointPmf, subset: &[&str]) -> Result<f64> {
    let idx = p.resolve(subset)?;
    Ok(shannon(&p.marginal_probs(&idx)))
}

/// An information value together with its unclamped floating-point result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoValue {
    pub value: f64,
    pub raw: f64,
    /// Set when a tiny negative `raw` was reported as zero.
    pub clamped: bool,
}

pub(crate) fn clamp_info(raw: f64, tolerance: f64, what: &str) -> Result<InfoValue> {
    if raw >= 0.0 {
        Ok(InfoValue {
            value: raw,
            raw,
            clamped: false,
        })
    } else if raw >= -tolerance {
        log::debug!("{what}: clamped {raw:e} to zero");
        Ok(InfoValue {
            value: 0.0,
            raw,
            clamped: true,
        })
    } else {
        Err(Error::InternalConsistency(format!(
            "{what} evaluated to {raw:e}"
        )))
    }
}

fn ensure_disjoint(groups: &[&[&str]]) -> Result<()> {
    for (i, g) in groups.iter().enumerate() {
        for name in g.iter() {
            if groups[i + 1..].iter().any(|other| other.contains(name)) {
                return Err(Error::OverlappingAxes(name.to_string()));
            }
        }
    }
    Ok(())
}

pub fn mutual_information_detailed(p: &JointPmf, a: &[&str], b: &[&str]) -> Result<InfoValue> {
    ensure_disjoint(&[a, b])?;
    let ab: Vec<&str> = a.iter().chain(b).copied().collect();
    let raw = entropy(p, a)? + entropy(p, b)? - entropy(p, &ab)?;
    clamp_info(raw, NEGATIVE_INFO_TOLERANCE, "mutual information")
}

/// `H(A) + H(B) - H(A,B)`.
pub fn mutual_information(p: &JointPmf, a: &[&str], b: &[&str]) -> Result<f64> {
    Ok(mutual_information_detailed(p, a, b)?.value)
}

pub fn conditional_mutual_information_detailed(
    p: &JointPmf,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<InfoValue> {
    ensure_disjoint(&[a, b, c])?;
    let ac: Vec<&str> = a.iter().chain(c).copied().collect();
    let bc: Vec<&str> = b.iter().chain(c).copied().collect();
    let abc: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
    let raw = entropy(p, &ac)? + entropy(p, &bc)? - entropy(p, c)? - entropy(p, &abc)?;
    clamp_info(
        raw,
        NEGATIVE_INFO_TOLERANCE,
        "conditional mutual information",
    )
}

/// `H(A,C) + H(B,C) - H(C) - H(A,B,C)`, the nonnegative conditional mutual
/// information `H(A:B|C)`.
pub fn conditional_mutual_information(
    p: &JointPmf,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<f64> {
    Ok(conditional_mutual_information_detailed(p, a, b, c)?.value)
}

/// Kullback-Leibler divergence `D(P//Q)`; `+inf` when `P` puts mass where
/// `Q` does not.
pub fn relative_entropy(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    if p.axes() != q.axes() {
        return Err(Error::AxisMismatch(
            "relative entropy needs identical axes".into(),
        ));
    }
    Ok(relative_entropy_slices(p.probs(), q.probs()))
}

pub(crate) fn relative_entropy_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc.max(0.0)
}

pub fn marginalize(p: &JointPmf, keep: &[&str]) -> Result<JointPmf> {
    p.marginalize(keep)
}

pub fn condition(p: &JointPmf, evidence: &[(&str, usize)]) -> Result<(JointPmf, f64)> {
    p.condition(evidence)
}

/// Outer product of independent tables; axes are concatenated in order.
pub fn product_pmf(ps: &[JointPmf]) -> Result<JointPmf> {
    let axes: Vec<Axis> = ps.iter().flat_map(|p| p.axes().iter().cloned()).collect();
    validate_axes(&axes)?;
    let mut probs = vec![1.0];
    for p in ps {
        let mut next = Vec::with_capacity(probs.len() * p.len());
        for &x in &probs {
            next.extend(p.probs().iter().map(|&y| x * y));
        }
        probs = next;
    }
    JointPmf::from_weights(axes, probs)
}

/// A conditional probability table `T(out | in)`.
///
/// `table` is row-major over `in_axes` followed by `out_axes`, so the
/// distribution for each input tuple is a contiguous block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap")]
pub struct StochasticMap {
    in_axes: Vec<Axis>,
    out_axes: Vec<Axis>,
    table: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMap {
    in_axes: Vec<Axis>,
    out_axes: Vec<Axis>,
    table: Vec<f64>,
}

impl TryFrom<RawMap> for StochasticMap {
    type Error = Error;
    fn try_from(raw: RawMap) -> Result<Self> {
        StochasticMap::new(raw.in_axes, raw.out_axes, raw.table)
    }
}

impl StochasticMap {
    pub fn new(in_axes: Vec<Axis>, out_axes: Vec<Axis>, table: Vec<f64>) -> Result<Self> {
        validate_axes(&in_axes)?;
        validate_axes(&out_axes)?;
        let n_in = table_len(&in_axes);
        let n_out = table_len(&out_axes);
        if table.len() != n_in * n_out {
            return Err(Error::ShapeMismatch {
                expected: n_in * n_out,
                got: table.len(),
            });
        }
        for (index, &value) in table.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let mut table = table;
        for input in 0..n_in {
            let col = &mut table[input * n_out..(input + 1) * n_out];
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::NotStochastic { input, sum });
            }
            if !at_rounding_level(sum, n_out) {
                col.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(StochasticMap {
            in_axes,
            out_axes,
            table,
        })
    }

    /// Builds a map from one unnormalized weight block per input.
    pub fn from_weights(
        in_axes: Vec<Axis>,
        out_axes: Vec<Axis>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n_out = table_len(&out_axes).max(1);
        let mut table = weights;
        for (input, col) in table.chunks_mut(n_out).enumerate() {
            let sum: f64 = col.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::NotStochastic { input, sum });
            }
            col.iter_mut().for_each(|v| *v /= sum);
        }
        StochasticMap::new(in_axes, out_axes, table)
    }

    /// Copies each input value to the output axis of the same position.
    pub fn identity(in_axes: Vec<Axis>, out_names: &[&str]) -> Result<Self> {
        if out_names.len() != in_axes.len() {
            return Err(Error::ShapeMismatch {
                expected: in_axes.len(),
                got: out_names.len(),
            });
        }
        let out_axes: Vec<Axis> = in_axes
            .iter()
            .zip(out_names)
            .map(|(a, n)| Axis::new(*n, a.size))
            .collect();
        let n = table_len(&in_axes);
        let mut table = vec![0.0; n * n];
        for i in 0..n {
            table[i * n + i] = 1.0;
        }
        StochasticMap::new(in_axes, out_axes, table)
    }

    /// Ignores the input and emits `dist` every time.
    pub fn constant(in_axes: Vec<Axis>, dist: &JointPmf) -> Result<Self> {
        let n_in = table_len(&in_axes);
        let table = dist
            .probs()
            .iter()
            .copied()
            .cycle()
            .take(n_in * dist.len())
            .collect();
        StochasticMap::new(in_axes, dist.axes().to_vec(), table)
    }

    /// Builds a deterministic map from an input-to-output flat index function.
    pub fn deterministic(
        in_axes: Vec<Axis>,
        out_axes: Vec<Axis>,
        f: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let n_in = table_len(&in_axes);
        let n_out = table_len(&out_axes);
        let mut table = vec![0.0; n_in * n_out];
        for i in 0..n_in {
            let o = f(i);
            if o >= n_out {
                return Err(Error::ValueOutOfRange {
                    axis: "output".into(),
                    value: o,
                    size: n_out,
                });
            }
            table[i * n_out + o] = 1.0;
        }
        StochasticMap::new(in_axes, out_axes, table)
    }

    pub fn in_axes(&self) -> &[Axis] {
        &self.in_axes
    }

    pub fn out_axes(&self) -> &[Axis] {
        &self.out_axes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn in_len(&self) -> usize {
        table_len(&self.in_axes)
    }

    pub fn out_len(&self) -> usize {
        table_len(&self.out_axes)
    }

    /// `T(out | in)` by flat indices.
    #[inline]
    pub fn prob(&self, out_flat: usize, in_flat: usize) -> f64 {
        self.table[in_flat * self.out_len() + out_flat]
    }

    /// The output distribution for one flat input index.
    pub fn column(&self, in_flat: usize) -> &[f64] {
        let n = self.out_len();
        &self.table[in_flat * n..(in_flat + 1) * n]
    }

    /// Independent parallel composition: inputs and outputs concatenated.
    pub fn tensor(&self, other: &StochasticMap) -> Result<StochasticMap> {
        let in_axes: Vec<Axis> = self.in_axes.iter().chain(&other.in_axes).cloned().collect();
        let out_axes: Vec<Axis> = self
            .out_axes
            .iter()
            .chain(&other.out_axes)
            .cloned()
            .collect();
        let (n1, n2) = (self.in_len(), other.in_len());
        let (m1, m2) = (self.out_len(), other.out_len());
        let mut table = Vec::with_capacity(n1 * n2 * m1 * m2);
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for o1 in 0..m1 {
                    for o2 in 0..m2 {
                        table.push(self.prob(o1, i1) * other.prob(o2, i2));
                    }
                }
            }
        }
        StochasticMap::new(in_axes, out_axes, table)
    }

    /// True when every column is the same distribution.
    pub fn is_constant(&self, tol: f64) -> bool {
        let first = self.column(0);
        (1..self.in_len()).all(|i| {
            self.column(i)
                .iter()
                .zip(first)
                .all(|(x, y)| (x - y).abs() <= tol)
        })
    }
}

/// Pushes `p` through `t`: `(TP)(y, r) = sum_x T(y|x) P(x, r)`.
///
/// `t.in_axes` must name axes of `p` (any order, matching sizes). The
/// remaining axes `r` pass through unchanged. The result lists `t.out_axes`
/// first, then the untouched axes in their original order.
pub fn apply_stochastic_map(t: &StochasticMap, p: &JointPmf) -> Result<JointPmf> {
    let in_names: Vec<&str> = t.in_axes.iter().map(|a| a.name.as_str()).collect();
    let in_idx = p.resolve(&in_names)?;
    for (ax, &i) in t.in_axes.iter().zip(&in_idx) {
        if p.axes()[i].size != ax.size {
            return Err(Error::AxisMismatch(format!(
                "axis `{}` has size {} in the pmf but {} in the map",
                ax.name,
                p.axes()[i].size,
                ax.size
            )));
        }
    }
    let rest: Vec<usize> = (0..p.axes().len())
        .filter(|i| !in_idx.contains(i))
        .collect();
    let out_axes: Vec<Axis> = t
        .out_axes
        .iter()
        .cloned()
        .chain(rest.iter().map(|&i| p.axes()[i].clone()))
        .collect();
    validate_axes(&out_axes)?;

    let sizes = p.sizes();
    let in_strides = strides(&t.in_axes.iter().map(|a| a.size).collect::<Vec<_>>());
    let rest_sizes: Vec<usize> = rest.iter().map(|&i| sizes[i]).collect();
    let rest_strides = strides(&rest_sizes);
    let rest_len: usize = rest_sizes.iter().product();
    let n_out = t.out_len();
    let mut out = vec![0.0; n_out * rest_len];
    let mut cell = vec![0; sizes.len()];
    for (flat, &px) in p.probs().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        unflatten(flat, &sizes, &mut cell);
        let x: usize = in_idx
            .iter()
            .zip(&in_strides)
            .map(|(&i, s)| cell[i] * s)
            .sum();
        let r: usize = rest
            .iter()
            .zip(&rest_strides)
            .map(|(&i, s)| cell[i] * s)
            .sum();
        for (y, &tyx) in t.column(x).iter().enumerate() {
            out[y * rest_len + r] += tyx * px;
        }
    }
    JointPmf::from_weights(out_axes, out)
}

/// Conditional mutual information of a dense table over `(a, b, c)`,
/// `c` fastest.
pub fn cmi_dense(q: &[f64], na: usize, nb: usize, nc: usize) -> f64 {
    let mut ac = vec![0.0; na * nc];
    let mut bc = vec![0.0; nb * nc];
    let mut c = vec![0.0; nc];
    for a in 0..na {
        for b in 0..nb {
            for k in 0..nc {
                let v = q[(a * nb + b) * nc + k];
                ac[a * nc + k] += v;
                bc[b * nc + k] += v;
                c[k] += v;
            }
        }
    }
    shannon(&ac) + shannon(&bc) - shannon(&c) - shannon(q)
}

/// Mutual information of a dense table over `(a, b)`, `b` fastest.
pub fn mi_dense(q: &[f64], na: usize, nb: usize) -> f64 {
    cmi_dense(q, na, nb, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bits(names: &[&str]) -> Vec<Axis> {
        names.iter().map(|n| Axis::new(*n, 2)).collect()
    }

    #[test]
    fn uniform_bit_entropy() {
        let p = JointPmf::uniform(bits(&["a"])).unwrap();
        assert_abs_diff_eq!(entropy(&p, &["a"]).unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn point_mass_entropy_is_zero() {
        let p = JointPmf::point_mass(vec![Axis::new("a", 3)], &[2]).unwrap();
        assert_eq!(entropy(&p, &["a"]).unwrap(), 0.0);
    }

    #[test]
    fn quarter_three_quarters_matches_high_precision() {
        // -0.25 ln 0.25 - 0.75 ln 0.75 evaluated with 50-digit arithmetic.
        let expected = 0.562_335_144_618_808_3;
        let p = JointPmf::new(vec![Axis::new("a", 2)], vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(entropy(&p, &["a"]).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn entropy_of_empty_subset_is_zero() {
        let p = JointPmf::uniform(bits(&["a", "b"])).unwrap();
        assert_eq!(entropy(&p, &[]).unwrap(), 0.0);
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let p = JointPmf::uniform(bits(&["a"])).unwrap();
        assert_eq!(entropy(&p, &["z"]), Err(Error::UnknownAxis("z".into())));
    }

    #[test]
    fn construction_renormalizes_within_tolerance_only() {
        let p = JointPmf::new(bits(&["a"]), vec![0.5, 0.5 + 5e-13]).unwrap();
        assert_eq!(p.probs().iter().sum::<f64>(), 1.0);
        assert!(matches!(
            JointPmf::new(bits(&["a"]), vec![0.5, 0.5 + 1e-9]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            JointPmf::new(bits(&["a"]), vec![1.5, -0.5]),
            Err(Error::NegativeProbability { .. })
        ));
        assert!(matches!(
            JointPmf::new(bits(&["a", "a"]), vec![0.25; 4]),
            Err(Error::DuplicateAxis(_))
        ));
        assert!(matches!(
            JointPmf::new(vec![Axis::new("a", 0)], vec![]),
            Err(Error::InvalidCardinality { .. })
        ));
    }

    #[test]
    fn mi_of_product_and_copy() {
        let p = JointPmf::uniform(bits(&["a", "b"])).unwrap();
        assert_eq!(mutual_information(&p, &["a"], &["b"]).unwrap(), 0.0);
        let copy = JointPmf::new(bits(&["a", "b"]), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(
            mutual_information(&copy, &["a"], &["b"]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let p = JointPmf::uniform(bits(&["a", "b", "c"])).unwrap();
        assert!(matches!(
            mutual_information(&p, &["a"], &["a", "b"]),
            Err(Error::OverlappingAxes(_))
        ));
        assert!(matches!(
            conditional_mutual_information(&p, &["a"], &["b"], &["b"]),
            Err(Error::OverlappingAxes(_))
        ));
    }

    #[test]
    fn xor_cmi_is_ln2() {
        let mut probs = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                probs[(a * 2 + b) * 2 + (a ^ b)] = 0.25;
            }
        }
        let p = JointPmf::new(bits(&["a", "b", "l"]), probs).unwrap();
        let cmi = conditional_mutual_information(&p, &["a"], &["b"], &["l"]).unwrap();
        assert_abs_diff_eq!(cmi, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn clamping_reports_tiny_negatives_as_zero() {
        let v = clamp_info(-1e-14, NEGATIVE_INFO_TOLERANCE, "x").unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.clamped);
        assert!(clamp_info(-1e-9, NEGATIVE_INFO_TOLERANCE, "x").is_err());
    }

    #[test]
    fn relative_entropy_edge_cases() {
        let p = JointPmf::new(bits(&["x"]), vec![1.0, 0.0]).unwrap();
        let q = JointPmf::new(bits(&["x"]), vec![0.0, 1.0]).unwrap();
        assert_eq!(relative_entropy(&p, &q).unwrap(), f64::INFINITY);
        assert_eq!(relative_entropy(&p, &p).unwrap(), 0.0);
        // 0 ln (0/0) contributes nothing.
        let r = JointPmf::new(vec![Axis::new("x", 3)], vec![0.5, 0.5, 0.0]).unwrap();
        let s = JointPmf::new(vec![Axis::new("x", 3)], vec![0.25, 0.75, 0.0]).unwrap();
        assert!(relative_entropy(&r, &s).unwrap().is_finite());
        let other = JointPmf::uniform(bits(&["y"])).unwrap();
        assert!(matches!(
            relative_entropy(&p, &other),
            Err(Error::AxisMismatch(_))
        ));
    }

    #[test]
    fn relative_entropy_against_uniform() {
        let p = JointPmf::new(vec![Axis::new("x", 3)], vec![0.2, 0.3, 0.5]).unwrap();
        let u = JointPmf::uniform(vec![Axis::new("x", 3)]).unwrap();
        let h = entropy(&p, &["x"]).unwrap();
        assert_abs_diff_eq!(
            relative_entropy(&p, &u).unwrap(),
            3f64.ln() - h,
            epsilon = 1e-14
        );
    }

    #[test]
    fn marginalize_identity_and_factor() {
        let a = JointPmf::new(bits(&["a"]), vec![0.3, 0.7]).unwrap();
        let b = JointPmf::new(vec![Axis::new("b", 3)], vec![0.2, 0.2, 0.6]).unwrap();
        let ab = product_pmf(&[a.clone(), b]).unwrap();
        assert_eq!(ab.marginalize(&["a", "b"]).unwrap(), ab);
        let ma = ab.marginalize(&["a"]).unwrap();
        for (x, y) in ma.probs().iter().zip(a.probs()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn condition_uniform_two_bits() {
        let p = JointPmf::uniform(bits(&["a", "b"])).unwrap();
        let (c, pe) = p.condition(&[("a", 0)]).unwrap();
        assert_abs_diff_eq!(pe, 0.5, epsilon = 1e-15);
        assert_eq!(c.names(), vec!["b"]);
        assert_abs_diff_eq!(c.probs()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn condition_on_zero_event_fails() {
        let p = JointPmf::new(bits(&["a", "b"]), vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(p.condition(&[("a", 1)]), Err(Error::ZeroProbabilityEvent));
    }

    #[test]
    fn stochastic_map_validation() {
        assert!(matches!(
            StochasticMap::new(bits(&["x"]), bits(&["y"]), vec![0.5, 0.5, 0.9, 0.2]),
            Err(Error::NotStochastic { input: 1, .. })
        ));
        let t = StochasticMap::identity(bits(&["x"]), &["y"]).unwrap();
        assert_eq!(t.prob(1, 1), 1.0);
        assert_eq!(t.prob(0, 1), 0.0);
    }

    #[test]
    fn identity_and_constant_maps() {
        let p = JointPmf::new(vec![Axis::new("x", 3)], vec![0.1, 0.2, 0.7]).unwrap();
        let id = StochasticMap::identity(p.axes().to_vec(), &["x"]).unwrap();
        assert_eq!(apply_stochastic_map(&id, &p).unwrap(), p);
        let q = JointPmf::new(bits(&["y"]), vec![0.4, 0.6]).unwrap();
        let k = StochasticMap::constant(p.axes().to_vec(), &q).unwrap();
        let out = apply_stochastic_map(&k, &p).unwrap();
        for (x, y) in out.probs().iter().zip(q.probs()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn map_on_subset_keeps_other_axes() {
        let p = JointPmf::new(bits(&["x", "z"]), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let flip = StochasticMap::deterministic(bits(&["x"]), bits(&["y"]), |i| 1 - i).unwrap();
        let out = apply_stochastic_map(&flip, &p).unwrap();
        assert_eq!(out.names(), vec!["y", "z"]);
        assert_eq!(out.probs(), &[0.3, 0.4, 0.1, 0.2]);
    }

    #[test]
    fn product_of_two_bits() {
        let a = JointPmf::new(bits(&["a"]), vec![0.25, 0.75]).unwrap();
        let b = JointPmf::new(bits(&["b"]), vec![0.5, 0.5]).unwrap();
        let ab = product_pmf(&[a.clone(), b]).unwrap();
        assert_eq!(ab.probs(), &[0.125, 0.125, 0.375, 0.375]);
        assert!(matches!(
            product_pmf(&[a.clone(), a]),
            Err(Error::DuplicateAxis(_))
        ));
    }

    #[test]
    fn product_with_point_mass_embeds() {
        let a = JointPmf::new(vec![Axis::new("a", 3)], vec![0.2, 0.3, 0.5]).unwrap();
        let pm = JointPmf::point_mass(bits(&["z"]), &[1]).unwrap();
        let az = product_pmf(&[a.clone(), pm]).unwrap();
        assert_eq!(az.probs(), &[0.0, 0.2, 0.0, 0.3, 0.0, 0.5]);
    }

    #[test]
    fn tensor_map_is_stochastic() {
        let t1 = StochasticMap::new(bits(&["x"]), bits(&["a"]), vec![0.9, 0.1, 0.3, 0.7]).unwrap();
        let t2 = StochasticMap::new(bits(&["y"]), bits(&["b"]), vec![0.6, 0.4, 0.0, 1.0]).unwrap();
        let t = t1.tensor(&t2).unwrap();
        for i in 0..t.in_len() {
            assert_abs_diff_eq!(t.column(i).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(t.prob(0b01, 0b10), 0.3 * 0.4, epsilon = 1e-15);
    }
}

//! Labeled finite-dimensional density matrices and quantum information
//! quantities.
//!
//! Subsystems are tensor factors in listed order; the first listed factor
//! is the most significant digit of a basis index. Classical flag registers
//! (the `alpha` of block-diagonal states) use the computational basis.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{clamp_info, strides, unflatten, Axis, JointPmf};
use crate::linalg::{
    hermitian_eigenvalues, hermitian_entropy, hermitian_part, hermiticity_error, kron,
    spectrum_entropy, trace, CMat, C64, ZERO,
};
use crate::random::{normal_vec, rng_for};

/// Hermiticity, trace and positivity tolerance for density matrices.
pub const STATE_TOLERANCE: f64 = 1e-10;

/// Negative quantum CMI down to this magnitude is reported as zero.
pub const QUANTUM_NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subsystem {
    pub name: String,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Subsystem {
            name: name.into(),
            dim,
        }
    }
}

fn validate_subsystems(subs: &[Subsystem]) -> Result<()> {
    for (i, s) in subs.iter().enumerate() {
        if s.dim == 0 {
            return Err(Error::InvalidCardinality {
                name: s.name.clone(),
                size: 0,
            });
        }
        if subs[..i].iter().any(|o| o.name == s.name) {
            return Err(Error::DuplicateAxis(s.name.clone()));
        }
    }
    Ok(())
}

/// A Hermitian, positive semidefinite, unit-trace matrix over named
/// tensor factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct DensityMatrix {
    subsystems: Vec<Subsystem>,
    mat: CMat,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawDensity {
    subsystems: Vec<Subsystem>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl TryFrom<RawDensity> for DensityMatrix {
    type Error = Error;
    fn try_from(raw: RawDensity) -> Result<Self> {
        let n = raw.re.len();
        if raw.im.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: raw.im.len(),
            });
        }
        for row in raw.re.iter().chain(&raw.im) {
            if row.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        let mat = CMat::from_fn(n, n, |i, j| C64::new(raw.re[i][j], raw.im[i][j]));
        DensityMatrix::new(raw.subsystems, mat)
    }
}

impl From<DensityMatrix> for RawDensity {
    fn from(d: DensityMatrix) -> Self {
        let n = d.mat.nrows();
        RawDensity {
            re: (0..n)
                .map(|i| (0..n).map(|j| d.mat[(i, j)].re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| d.mat[(i, j)].im).collect())
                .collect(),
            subsystems: d.subsystems,
        }
    }
}

impl DensityMatrix {
    /// Validates a state. The stored matrix is the exact Hermitian part of
    /// the input.
    pub fn new(subsystems: Vec<Subsystem>, mat: CMat) -> Result<Self> {
        validate_subsystems(&subsystems)?;
        let dim: usize = subsystems.iter().map(|s| s.dim).product();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim * dim,
                got: mat.nrows() * mat.ncols(),
            });
        }
        if let Some(k) = mat
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite(k));
        }
        let herm = hermiticity_error(&mat);
        if herm > STATE_TOLERANCE {
            return Err(Error::NotHermitian(herm));
        }
        let mat = hermitian_part(&mat);
        let tr = trace(&mat).re;
        if (tr - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::NotUnitTrace(tr));
        }
        let min = hermitian_eigenvalues(&mat).first().copied().unwrap_or(0.0);
        if min < -STATE_TOLERANCE {
            return Err(Error::NegativeEigenvalue(min));
        }
        Ok(DensityMatrix { subsystems, mat })
    }

    /// Wraps a matrix known to be a valid state up to rounding: the
    /// Hermitian part is taken and the trace renormalized.
    pub(crate) fn from_trusted(subsystems: Vec<Subsystem>, mat: CMat) -> Result<Self> {
        let mat = hermitian_part(&mat);
        let tr = trace(&mat).re;
        if !(tr > 0.0) {
            return Err(Error::NotUnitTrace(tr));
        }
        DensityMatrix::new(subsystems, mat / C64::new(tr, 0.0))
    }

    /// `|psi><psi|` for a ket; the ket is normalized first.
    pub fn from_ket(subsystems: Vec<Subsystem>, ket: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(ket);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::NotUnitTrace(0.0));
        }
        let v = v / C64::new(norm, 0.0);
        DensityMatrix::new(subsystems, &v * v.adjoint())
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(subsystems: Vec<Subsystem>, probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        let mat = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(probs[i], 0.0)
            } else {
                ZERO
            }
        });
        DensityMatrix::new(subsystems, mat)
    }

    /// Computational basis state with per-subsystem indices.
    pub fn basis_state(subsystems: Vec<Subsystem>, index: &[usize]) -> Result<Self> {
        let dims: Vec<usize> = subsystems.iter().map(|s| s.dim).collect();
        let st = strides(&dims);
        let flat: usize = index.iter().zip(&st).map(|(i, s)| i * s).sum();
        let n: usize = dims.iter().product();
        let mut ket = vec![ZERO; n];
        ket[flat] = C64::new(1.0, 0.0);
        DensityMatrix::from_ket(subsystems, &ket)
    }

    /// Maximally entangled state `(|00> + |11> + ...)/sqrt(d)` on two
    /// `d`-dimensional subsystems.
    pub fn maximally_entangled(a: &str, b: &str, d: usize) -> Result<Self> {
        let mut ket = vec![ZERO; d * d];
        for i in 0..d {
            ket[i * d + i] = C64::new(1.0, 0.0);
        }
        DensityMatrix::from_ket(vec![Subsystem::new(a, d), Subsystem::new(b, d)], &ket)
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn names(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn resolve(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::DuplicateAxis(n.to_string()));
            }
            let k = self
                .subsystems
                .iter()
                .position(|s| s.name == *n)
                .ok_or_else(|| Error::UnknownSubsystem(n.to_string()))?;
            out.push(k);
        }
        Ok(out)
    }

    /// Reduced state on `keep`, with factors in the order given.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let idx = self.resolve(keep)?;
        let mat = partial_trace_matrix(&self.mat, &self.dims(), &idx);
        let subs = idx.iter().map(|&i| self.subsystems[i].clone()).collect();
        DensityMatrix::from_trusted(subs, mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    /// Largest eigenvalue is 1 within `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        self.eigenvalues().last().is_some_and(|&l| l >= 1.0 - tol)
    }

    /// Relabels subsystems, keeping dimensions.
    pub fn renamed(&self, names: &[&str]) -> Result<DensityMatrix> {
        if names.len() != self.subsystems.len() {
            return Err(Error::ShapeMismatch {
                expected: self.subsystems.len(),
                got: names.len(),
            });
        }
        let subs = self
            .subsystems
            .iter()
            .zip(names)
            .map(|(s, n)| Subsystem::new(*n, s.dim))
            .collect();
        DensityMatrix::new(subs, self.mat.clone())
    }
}

/// Tensor product `rho ⊗ sigma`.
pub fn tensor(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DensityMatrix> {
    let subs = rho
        .subsystems
        .iter()
        .chain(&sigma.subsystems)
        .cloned()
        .collect();
    DensityMatrix::from_trusted(subs, kron(&rho.mat, &sigma.mat))
}

/// Partial trace of a raw matrix over factors `dims`, keeping factor
/// positions `keep` in that order.
pub(crate) fn partial_trace_matrix(mat: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let n: usize = dims.iter().product();
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let keep_st = strides(&keep_dims);
    let traced_st = strides(&traced_dims);
    let nk: usize = keep_dims.iter().product();
    let nt: usize = traced_dims.iter().product();

    // Basis indices grouped by their traced-out part.
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(nk); nt];
    let mut cell = vec![0; dims.len()];
    for i in 0..n {
        unflatten(i, dims, &mut cell);
        let k: usize = keep.iter().zip(&keep_st).map(|(&p, s)| cell[p] * s).sum();
        let t: usize = traced
            .iter()
            .zip(&traced_st)
            .map(|(&p, s)| cell[p] * s)
            .sum();
        groups[t].push((i, k));
    }
    let mut out = CMat::zeros(nk, nk);
    for g in &groups {
        for &(i, ki) in g {
            for &(j, kj) in g {
                out[(ki, kj)] += mat[(i, j)];
            }
        }
    }
    out
}

/// `-tr rho ln rho`; eigenvalues in `[-1e-10, 0]` count as zero.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let eigs = rho.eigenvalues();
    if let Some(&min) = eigs.first() {
        if min < -STATE_TOLERANCE {
            return Err(Error::NegativeEigenvalue(min));
        }
    }
    Ok(spectrum_entropy(&eigs))
}

fn subset_entropy(rho: &DensityMatrix, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    if sorted.len() == rho.subsystems.len() {
        return hermitian_entropy(&rho.mat);
    }
    hermitian_entropy(&partial_trace_matrix(&rho.mat, &rho.dims(), &sorted))
}

fn disjoint_indices(rho: &DensityMatrix, groups: &[&[&str]]) -> Result<Vec<Vec<usize>>> {
    let mut seen: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for g in groups {
        let idx = rho.resolve(g)?;
        for &i in &idx {
            if seen.contains(&i) {
                return Err(Error::OverlappingAxes(rho.subsystems[i].name.clone()));
            }
            seen.push(i);
        }
        out.push(idx);
    }
    Ok(out)
}

/// `S(A) + S(B) - S(AB)`.
pub fn quantum_mutual_information(rho: &DensityMatrix, a: &[&str], b: &[&str]) -> Result<f64> {
    let g = disjoint_indices(rho, &[a, b])?;
    let ab: Vec<usize> = g[0].iter().chain(&g[1]).copied().collect();
    let raw = subset_entropy(rho, &g[0]) + subset_entropy(rho, &g[1]) - subset_entropy(rho, &ab);
    Ok(clamp_info(
        raw,
        QUANTUM_NEGATIVE_TOLERANCE,
        "quantum mutual information",
    )?
    .value)
}

/// `S(AC) + S(BC) - S(C) - S(ABC)`, the nonnegative quantum conditional
/// mutual information `S(A:B|C)`.
pub fn quantum_cmi(rho: &DensityMatrix, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
    let g = disjoint_indices(rho, &[a, b, c])?;
    let ac: Vec<usize> = g[0].iter().chain(&g[2]).copied().collect();
    let bc: Vec<usize> = g[1].iter().chain(&g[2]).copied().collect();
    let abc: Vec<usize> = g[0].iter().chain(&g[1]).chain(&g[2]).copied().collect();
    let raw = subset_entropy(rho, &ac) + subset_entropy(rho, &bc)
        - subset_entropy(rho, &g[2])
        - subset_entropy(rho, &abc);
    Ok(clamp_info(
        raw,
        QUANTUM_NEGATIVE_TOLERANCE,
        "quantum conditional mutual information",
    )?
    .value)
}

/// Weights `w_alpha` with one state per `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct Ensemble {
    weights: JointPmf,
    states: Vec<DensityMatrix>,
    pure: Vec<bool>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    weights: JointPmf,
    states: Vec<DensityMatrix>,
    pure: Vec<bool>,
}

impl TryFrom<RawEnsemble> for Ensemble {
    type Error = Error;
    fn try_from(r: RawEnsemble) -> Result<Self> {
        Ensemble::new(r.weights, r.states, r.pure)
    }
}

/// Purity check tolerance for flagged ensemble members.
pub const PURITY_TOLERANCE: f64 = 1e-9;

impl Ensemble {
    pub fn new(weights: JointPmf, states: Vec<DensityMatrix>, pure: Vec<bool>) -> Result<Self> {
        if weights.axes().len() != 1 {
            return Err(Error::InvalidSpec(
                "ensemble weights must have one axis".into(),
            ));
        }
        if weights.len() != states.len() || pure.len() != states.len() {
            return Err(Error::ShapeMismatch {
                expected: weights.len(),
                got: states.len(),
            });
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.subsystems != first.subsystems) {
                return Err(Error::InvalidSpec(
                    "ensemble members must share subsystem structure".into(),
                ));
            }
        }
        for (k, (s, &p)) in states.iter().zip(&pure).enumerate() {
            if p && !s.is_pure(PURITY_TOLERANCE) {
                return Err(Error::NotPure(k));
            }
        }
        Ok(Ensemble {
            weights,
            states,
            pure,
        })
    }

    /// Flags each member pure or not by inspection.
    pub fn detect_purity(weights: JointPmf, states: Vec<DensityMatrix>) -> Result<Self> {
        let pure = states.iter().map(|s| s.is_pure(PURITY_TOLERANCE)).collect();
        Ensemble::new(weights, states, pure)
    }

    pub fn weights(&self) -> &JointPmf {
        &self.weights
    }
    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }
    pub fn purity_flags(&self) -> &[bool] {
        &self.pure
    }

    /// `sum_alpha w_alpha rho^alpha`.
    pub fn average(&self) -> Result<DensityMatrix> {
        let first = self
            .states
            .first()
            .ok_or_else(|| Error::InvalidSpec("empty ensemble".into()))?;
        let mut acc = CMat::zeros(first.dim(), first.dim());
        for (w, s) in self.weights.probs().iter().zip(&self.states) {
            acc += &s.mat * C64::new(*w, 0.0);
        }
        DensityMatrix::from_trusted(first.subsystems.clone(), acc)
    }
}

/// `sum_alpha w_alpha B_alpha ⊗ |alpha><alpha|` for blocks of equal size.
pub(crate) fn block_diagonal_with_flag(blocks: &[CMat], weights: &[f64]) -> CMat {
    let d = blocks[0].nrows();
    let n = blocks.len();
    let mut out = CMat::zeros(d * n, d * n);
    for (alpha, (b, &w)) in blocks.iter().zip(weights).enumerate() {
        for i in 0..d {
            for j in 0..d {
                out[(i * n + alpha, j * n + alpha)] = b[(i, j)] * w;
            }
        }
    }
    out
}

fn flag_subsystem(weights: &JointPmf) -> Result<Subsystem> {
    match weights.axes() {
        [ax] => Ok(Subsystem::new(ax.name.clone(), ax.size)),
        _ => Err(Error::InvalidSpec("weights must have one axis".into())),
    }
}

/// Separable state `sum_alpha w_alpha rho_a^alpha ⊗ rho_b^alpha ⊗ |alpha><alpha|`
/// over `(a, b, alpha)`.
pub fn build_separable(
    ens_a: &[DensityMatrix],
    ens_b: &[DensityMatrix],
    weights: &JointPmf,
) -> Result<DensityMatrix> {
    let flag = flag_subsystem(weights)?;
    if ens_a.len() != flag.dim || ens_b.len() != flag.dim {
        return Err(Error::ShapeMismatch {
            expected: flag.dim,
            got: ens_a.len().min(ens_b.len()),
        });
    }
    let joint: Vec<DensityMatrix> = ens_a
        .iter()
        .zip(ens_b)
        .map(|(a, b)| tensor(a, b))
        .collect::<Result<_>>()?;
    let ens = Ensemble::detect_purity(weights.clone(), joint)?;
    build_k1_state(&ens)
}

/// Classically flagged state `sum_alpha w_alpha rho^alpha ⊗ |alpha><alpha|`.
pub fn build_k1_state(ens: &Ensemble) -> Result<DensityMatrix> {
    let flag = flag_subsystem(&ens.weights)?;
    let first = ens
        .states
        .first()
        .ok_or_else(|| Error::InvalidSpec("empty ensemble".into()))?;
    let blocks: Vec<CMat> = ens.states.iter().map(|s| s.mat.clone()).collect();
    let mat = block_diagonal_with_flag(&blocks, ens.weights.probs());
    let mut subs = first.subsystems.clone();
    subs.push(flag);
    DensityMatrix::from_trusted(subs, mat)
}

/// As [`build_k1_state`], for an ensemble whose members are all pure.
pub fn build_k2_state(ens: &Ensemble) -> Result<DensityMatrix> {
    for (k, s) in ens.states.iter().enumerate() {
        if !ens.pure[k] || !s.is_pure(PURITY_TOLERANCE) {
            return Err(Error::NotPure(k));
        }
    }
    build_k1_state(ens)
}

/// Coordinates of a Hermitian generator: `dim` diagonal entries, then the
/// real and imaginary parts of each strictly upper entry in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryParams {
    pub dim: usize,
    pub params: Vec<f64>,
}

impl UnitaryParams {
    pub fn new(dim: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != dim * dim {
            return Err(Error::ShapeMismatch {
                expected: dim * dim,
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteParams);
        }
        Ok(UnitaryParams { dim, params })
    }

    pub fn zeros(dim: usize) -> Self {
        UnitaryParams {
            dim,
            params: vec![0.0; dim * dim],
        }
    }

    pub fn random(seed: u64, dim: usize, scale: f64) -> Self {
        let mut rng = rng_for(seed, 11);
        UnitaryParams {
            dim,
            params: normal_vec(&mut rng, dim * dim, scale),
        }
    }

    /// The Hermitian generator `H` with `U = exp(iH)`.
    pub fn generator(&self) -> CMat {
        let d = self.dim;
        let mut h = CMat::zeros(d, d);
        for i in 0..d {
            h[(i, i)] = C64::new(self.params[i], 0.0);
        }
        let mut k = d;
        for i in 0..d {
            for j in i + 1..d {
                let z = C64::new(self.params[k], self.params[k + 1]);
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
                k += 2;
            }
        }
        h
    }
}

/// `exp(iH)` for the generator encoded by `p`, computed through the
/// spectral decomposition of `H`.
pub fn params_to_unitary(p: &UnitaryParams) -> Result<CMat> {
    if p.params.len() != p.dim * p.dim {
        return Err(Error::ShapeMismatch {
            expected: p.dim * p.dim,
            got: p.params.len(),
        });
    }
    if p.params.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteParams);
    }
    Ok(crate::linalg::hermitian_function(&p.generator(), |x| {
        C64::new(x.cos(), x.sin())
    }))
}

/// Random state `G G^dagger / tr` with `G` a complex Gaussian matrix of
/// shape `(prod dims) x rank`.
pub fn random_density_matrix(
    seed: u64,
    subsystems: &[Subsystem],
    rank: usize,
) -> Result<DensityMatrix> {
    validate_subsystems(subsystems)?;
    let dim: usize = subsystems.iter().map(|s| s.dim).product();
    if rank == 0 || rank > dim {
        return Err(Error::InvalidRank { rank, dim });
    }
    let mut rng = rng_for(seed, 12);
    let params = normal_vec(&mut rng, 2 * dim * rank, 1.0);
    let g = crate::linalg::complex_from_reals(&params, dim, rank);
    DensityMatrix::from_trusted(subsystems.to_vec(), &g * g.adjoint())
}

/// Subsystem list helper: `[("a", 2), ("b", 2)]`.
pub fn subsystems(spec: &[(&str, usize)]) -> Vec<Subsystem> {
    spec.iter().map(|(n, d)| Subsystem::new(*n, *d)).collect()
}

/// Embeds a classical table as a diagonal state with matching labels.
pub fn diagonal_from_pmf(p: &JointPmf) -> Result<DensityMatrix> {
    let subs = p
        .axes()
        .iter()
        .map(|a: &Axis| Subsystem::new(a.name.clone(), a.size))
        .collect();
    DensityMatrix::diagonal(subs, p.probs())
}

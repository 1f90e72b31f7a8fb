//! Entanglement of formation as the smallest conditional mutual information
//! over extensions with a fixed bipartite marginal.
//!
//! Every solver searches a smooth parametrization that satisfies the
//! marginal constraint exactly, so any point it reports is feasible and the
//! reported value is an upper bound of the true minimum for the given
//! extension size.
//!
//! * classical: `P(a,b,alpha) = P(a,b) P(alpha|a,b)`, the conditional table
//!   searched in squared-and-normalized coordinates;
//! * K2: pure-state ensembles, obtained by applying an isometry to the
//!   purifying register of `rho_ab` and measuring it;
//! * K1: classically flagged mixed-state ensembles, obtained by grouping a
//!   fine pure ensemble with a stochastic map;
//! * K0 (bounded): arbitrary extensions `rho_{ab lambda}` of bounded
//!   `lambda` dimension, from an isometry purifying-register to
//!   `lambda ⊗ environment` followed by tracing out the environment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{cmi_dense, mi_dense, Axis, JointPmf};
use crate::linalg::{
    complex_from_reals, hermitian_eigen, hermitian_entropy, identity_isometry, max_abs_diff,
    polar_isometry, reals_from_complex, CMat, C64,
};
use crate::optim::{
    coords_from_simplex, multi_start, stochastic_from_coords, LocalMethod, MultiStartConfig,
};
use crate::quantum::{partial_trace_matrix, DensityMatrix, Subsystem};
use crate::random::{normal_vec, rng_for};

/// Maximal deviation allowed between a reported extension's marginal and
/// the input.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Eigenvalues of `rho_ab` below this are dropped from the purification.
const RANK_CUTOFF: f64 = 1e-14;

/// Size and effort of an extension search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionBudget {
    /// Number of conditioner values (ensemble members, or the dimension of
    /// the extension register).
    pub n_alpha: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl ExtensionBudget {
    pub fn new(n_alpha: usize) -> Self {
        ExtensionBudget {
            n_alpha,
            restarts: 4,
            iterations: 400,
            seed: 0,
            tolerance: 1e-9,
        }
    }

    /// Default ensemble size `(dim rho_ab)^2`.
    pub fn for_state(rho_ab: &DensityMatrix) -> Self {
        ExtensionBudget::new(rho_ab.dim() * rho_ab.dim())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_n_alpha(mut self, n_alpha: usize) -> Self {
        self.n_alpha = n_alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_alpha == 0 {
            return Err(Error::InvalidBudget(
                "extension size must be at least 1".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidBudget("restarts must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidBudget("iterations must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidBudget("tolerance must be positive".into()));
        }
        Ok(())
    }

    fn multi_start_config(&self, dim: usize) -> MultiStartConfig {
        MultiStartConfig {
            method: LocalMethod::for_dimension(dim),
            iterations: self.iterations,
            tolerance: self.tolerance,
            lower_bound: Some(0.0),
        }
    }

    pub(crate) fn random_starts(&self, dim: usize, stream: u64) -> Vec<Vec<f64>> {
        (0..self.restarts as u64)
            .map(|r| {
                let mut rng = rng_for(self.seed, stream * 1000 + r);
                normal_vec(&mut rng, dim, 1.0)
            })
            .collect()
    }
}

/// What a reported optimum certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundDirection {
    /// A feasible point: the true minimum is no larger.
    UpperBoundOfMin,
    /// A feasible point of a maximization: the true maximum is no smaller.
    LowerBoundOfMax,
    /// A max over heuristic inner minima; neither direction is certified.
    Heuristic,
}

/// Outcome of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub best_value: f64,
    pub bound_direction: BoundDirection,
    pub best_params: Vec<f64>,
    pub seed: u64,
    pub evaluations: usize,
    pub converged: bool,
    pub budget: ExtensionBudget,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

fn bipartite_sizes(p: &JointPmf) -> Result<(usize, usize)> {
    match p.axes() {
        [a, b] => Ok((a.size, b.size)),
        _ => Err(Error::InvalidSpec(
            "expected a table over exactly two axes".into(),
        )),
    }
}

/// The extension `P(a, b) P(alpha | a, b)` over `(a, b, alpha)`, where
/// `table` holds `P(alpha | a, b)` with `alpha` fastest.
pub fn classical_extension(p_ab: &JointPmf, n_alpha: usize, table: &[f64]) -> Result<JointPmf> {
    let (na, nb) = bipartite_sizes(p_ab)?;
    if table.len() != na * nb * n_alpha {
        return Err(Error::ShapeMismatch {
            expected: na * nb * n_alpha,
            got: table.len(),
        });
    }
    let probs = extension_probs(p_ab.probs(), table, n_alpha);
    let mut axes = p_ab.axes().to_vec();
    axes.push(Axis::new("alpha", n_alpha));
    JointPmf::from_weights(axes, probs)
}

fn extension_probs(p: &[f64], table: &[f64], n_alpha: usize) -> Vec<f64> {
    let mut q = vec![0.0; p.len() * n_alpha];
    for (cell, &pc) in p.iter().enumerate() {
        for k in 0..n_alpha {
            q[cell * n_alpha + k] = pc * table[cell * n_alpha + k];
        }
    }
    q
}

/// Classical E_F: minimizes `H(a:b|alpha)` over `P(alpha|a,b)` with
/// `budget.n_alpha` values of `alpha`.
///
/// Deterministic witnesses (`alpha = a`, `alpha = b`, `alpha = (a, b)`) are
/// tried first whenever they fit; any of them attains zero.
pub fn classical_ef(p_ab: &JointPmf, budget: &ExtensionBudget) -> Result<OptReport> {
    classical_ef_seeded(p_ab, budget, &[])
}

/// [`classical_ef`] with extra starting tables `P(alpha|a,b)` (alpha
/// fastest), tried before the built-in starts.
pub fn classical_ef_seeded(
    p_ab: &JointPmf,
    budget: &ExtensionBudget,
    seeds: &[Vec<f64>],
) -> Result<OptReport> {
    budget.validate()?;
    let (na, nb) = bipartite_sizes(p_ab)?;
    let n = budget.n_alpha;
    let p = p_ab.probs().to_vec();
    let cells = na * nb;

    if n == 1 {
        let value = mi_dense(&p, na, nb).max(0.0);
        return Ok(OptReport {
            best_value: value,
            bound_direction: BoundDirection::UpperBoundOfMin,
            best_params: vec![1.0; cells],
            seed: budget.seed,
            evaluations: 1,
            converged: true,
            budget: budget.clone(),
            diagnostics: BTreeMap::new(),
        });
    }

    let objective = |c: &[f64]| {
        let table = stochastic_from_coords(c, n);
        cmi_dense(&extension_probs(&p, &table, n), na, nb, n)
    };

    let one_hot = |f: &dyn Fn(usize, usize) -> usize| -> Vec<f64> {
        let mut c = vec![0.0; cells * n];
        for a in 0..na {
            for b in 0..nb {
                c[(a * nb + b) * n + f(a, b)] = 1.0;
            }
        }
        c
    };
    let mut starts = Vec::new();
    for t in seeds {
        if t.len() != cells * n {
            return Err(Error::ShapeMismatch {
                expected: cells * n,
                got: t.len(),
            });
        }
        starts.push(coords_from_simplex(t));
    }
    if n >= na {
        starts.push(one_hot(&|a, _| a));
    }
    if n >= nb {
        starts.push(one_hot(&|_, b| b));
    }
    if n >= cells {
        starts.push(one_hot(&|a, b| a * nb + b));
    }
    starts.extend(budget.random_starts(cells * n, 1));

    let cfg = budget.multi_start_config(cells * n);
    let res = multi_start(&objective, &starts, &cfg);
    let table = stochastic_from_coords(&res.best_x, n);
    let q = extension_probs(&p, &table, n);

    let mut marginal = vec![0.0; cells];
    for (k, v) in q.iter().enumerate() {
        marginal[k / n] += v;
    }
    let residual = marginal
        .iter()
        .zip(&p)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if residual > FEASIBILITY_TOLERANCE {
        return Err(Error::InternalConsistency(format!(
            "extension marginal deviates by {residual:e}"
        )));
    }
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("feasibility_residual".into(), residual);
    Ok(OptReport {
        best_value: cmi_dense(&q, na, nb, n).max(0.0),
        bound_direction: BoundDirection::UpperBoundOfMin,
        best_params: table,
        seed: budget.seed,
        evaluations: res.evaluations,
        converged: res.converged,
        budget: budget.clone(),
        diagnostics,
    })
}

/// Spectral purification data of a bipartite state.
struct Purification {
    da: usize,
    db: usize,
    /// Columns `sqrt(lambda_i) e_i` for the retained eigenpairs.
    weighted: CMat,
}

impl Purification {
    fn new(rho_ab: &DensityMatrix) -> Result<Self> {
        let (da, db) = match rho_ab.subsystems() {
            [a, b] => (a.dim, b.dim),
            _ => {
                return Err(Error::InvalidSpec(
                    "expected a state over exactly two subsystems".into(),
                ))
            }
        };
        let (vals, vecs) = hermitian_eigen(rho_ab.matrix());
        let d = rho_ab.dim();
        let kept: Vec<usize> = (0..d).rev().filter(|&i| vals[i] > RANK_CUTOFF).collect();
        let weighted = CMat::from_fn(d, kept.len(), |row, col| {
            vecs[(row, kept[col])] * C64::new(vals[kept[col]].sqrt(), 0.0)
        });
        Ok(Purification { da, db, weighted })
    }

    fn rank(&self) -> usize {
        self.weighted.ncols()
    }

    /// Unnormalized ensemble members `sum_i W[mu, i] sqrt(lambda_i) e_i` as
    /// columns.
    fn steer(&self, w: &CMat) -> CMat {
        &self.weighted * w.transpose()
    }
}

/// Entropy `S(rho/w)` scaled by `w` for an unnormalized block of trace `w`.
fn weighted_entropy(block: &CMat, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    w * hermitian_entropy(&(block / C64::new(w, 0.0)))
}

/// `w S(a:b)` of an unnormalized bipartite block.
fn weighted_mi(block: &CMat, da: usize, db: usize) -> f64 {
    let w = crate::linalg::trace(block).re;
    if w <= 1e-300 {
        return 0.0;
    }
    let ra = partial_trace_matrix(block, &[da, db], &[0]);
    let rb = partial_trace_matrix(block, &[da, db], &[1]);
    weighted_entropy(&ra, w) + weighted_entropy(&rb, w) - weighted_entropy(block, w)
}

/// `w (S(a) + S(b))` of an unnormalized pure vector.
fn weighted_pure_entanglement(v: &[C64], da: usize, db: usize) -> f64 {
    let w: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if w <= 1e-300 {
        return 0.0;
    }
    let m = CMat::from_fn(da, db, |i, j| v[i * db + j]);
    let reduced = if da <= db {
        &m * m.adjoint()
    } else {
        m.adjoint() * &m
    };
    2.0 * weighted_entropy(&reduced, w)
}

fn isometry(params: &[f64], rows: usize, cols: usize) -> Option<CMat> {
    polar_isometry(&complex_from_reals(params, rows, cols))
}

fn k2_value(pur: &Purification, w: &CMat) -> f64 {
    let psi = pur.steer(w);
    (0..psi.ncols())
        .map(|mu| {
            let col: Vec<C64> = psi.column(mu).iter().copied().collect();
            weighted_pure_entanglement(&col, pur.da, pur.db)
        })
        .sum()
}

fn k1_blocks(pur: &Purification, w: &CMat, coarse: &[f64], n: usize) -> Vec<CMat> {
    let psi = pur.steer(w);
    let d = psi.nrows();
    let mut blocks = vec![CMat::zeros(d, d); n];
    for mu in 0..psi.ncols() {
        let col = psi.column(mu);
        let outer = col * col.adjoint();
        for (alpha, block) in blocks.iter_mut().enumerate() {
            let weight = coarse[mu * n + alpha];
            if weight > 0.0 {
                *block += &outer * C64::new(weight, 0.0);
            }
        }
    }
    blocks
}

fn k1_value(pur: &Purification, w: &CMat, coarse: &[f64], n: usize) -> f64 {
    k1_blocks(pur, w, coarse, n)
        .iter()
        .map(|b| weighted_mi(b, pur.da, pur.db))
        .sum()
}

/// `rho_{ab lambda}` from an isometry `r -> lambda ⊗ env` (lambda major).
fn k0_state(pur: &Purification, w: &CMat, n: usize) -> CMat {
    let psi = pur.steer(w);
    let dab = psi.nrows();
    let env = psi.ncols() / n;
    let m = CMat::from_fn(dab * n, env, |row, e| {
        let (ab, lambda) = (row / n, row % n);
        psi[(ab, lambda * env + e)]
    });
    &m * m.adjoint()
}

fn quantum_cmi_raw(rho: &CMat, da: usize, db: usize, n: usize) -> f64 {
    let dims = [da, db, n];
    hermitian_entropy(&partial_trace_matrix(rho, &dims, &[0, 2]))
        + hermitian_entropy(&partial_trace_matrix(rho, &dims, &[1, 2]))
        - hermitian_entropy(&partial_trace_matrix(rho, &dims, &[2]))
        - hermitian_entropy(rho)
}

fn feasibility_check(rho_ab: &DensityMatrix, reconstructed: &CMat) -> Result<f64> {
    let residual = max_abs_diff(rho_ab.matrix(), reconstructed);
    if residual > FEASIBILITY_TOLERANCE {
        return Err(Error::InternalConsistency(format!(
            "extension marginal deviates by {residual:e}"
        )));
    }
    Ok(residual)
}

fn flagged_subsystems(rho_ab: &DensityMatrix, n: usize) -> Vec<Subsystem> {
    let mut subs = rho_ab.subsystems().to_vec();
    subs.push(Subsystem::new("alpha", n));
    subs
}

fn k2_size(pur: &Purification, budget: &ExtensionBudget) -> Result<usize> {
    if budget.n_alpha < pur.rank() {
        return Err(Error::InvalidBudget(format!(
            "a pure-state ensemble of rank-{} state needs at least {} members",
            pur.rank(),
            pur.rank()
        )));
    }
    Ok(budget.n_alpha)
}

/// The K2 extension over `(a, b, alpha)` encoded by `params` (real then
/// imaginary parts of an `n_alpha x rank` matrix, column-major).
pub fn k2_extension(
    rho_ab: &DensityMatrix,
    n_alpha: usize,
    params: &[f64],
) -> Result<DensityMatrix> {
    let pur = Purification::new(rho_ab)?;
    let r = pur.rank();
    if params.len() != 2 * n_alpha * r {
        return Err(Error::ShapeMismatch {
            expected: 2 * n_alpha * r,
            got: params.len(),
        });
    }
    let w = isometry(params, n_alpha, r)
        .ok_or_else(|| Error::InvalidSpec("ensemble parameters are rank deficient".into()))?;
    let psi = pur.steer(&w);
    let blocks: Vec<CMat> = (0..n_alpha)
        .map(|mu| {
            let c = psi.column(mu);
            c * c.adjoint()
        })
        .collect();
    let mat = crate::quantum::block_diagonal_with_flag(&blocks, &vec![1.0; n_alpha]);
    DensityMatrix::from_trusted(flagged_subsystems(rho_ab, n_alpha), mat)
}

/// Quantum E_F restricted to flagged pure-state ensembles with
/// `budget.n_alpha` members. The objective is
/// `sum_alpha w_alpha (S(rho_a^alpha) + S(rho_b^alpha))`.
pub fn quantum_ef_k2(rho_ab: &DensityMatrix, budget: &ExtensionBudget) -> Result<OptReport> {
    budget.validate()?;
    let pur = Purification::new(rho_ab)?;
    let n = k2_size(&pur, budget)?;
    let r = pur.rank();
    let dim = 2 * n * r;

    let objective = |x: &[f64]| match isometry(x, n, r) {
        Some(w) => k2_value(&pur, &w),
        None => f64::INFINITY,
    };
    let mut starts = vec![reals_from_complex(&identity_isometry(n, r))];
    starts.extend(budget.random_starts(dim, 2));
    let res = multi_start(&objective, &starts, &budget.multi_start_config(dim));

    let ext = k2_extension(rho_ab, n, &res.best_x)?;
    let residual = feasibility_check(rho_ab, ext.partial_trace(&rho_ab.names())?.matrix())?;
    let w = isometry(&res.best_x, n, r).expect("best point was finite");
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("rank".into(), r as f64);
    diagnostics.insert("feasibility_residual".into(), residual);
    Ok(OptReport {
        best_value: k2_value(&pur, &w).max(0.0),
        bound_direction: BoundDirection::UpperBoundOfMin,
        best_params: res.best_x,
        seed: budget.seed,
        evaluations: res.evaluations,
        converged: res.converged,
        budget: budget.clone(),
        diagnostics,
    })
}

fn k1_fine_size(pur: &Purification, n: usize) -> usize {
    n.max(pur.rank())
}

/// Splits K1 parameters into the fine isometry and the grouping table.
fn k1_unpack(x: &[f64], m: usize, r: usize, n: usize) -> Option<(CMat, Vec<f64>)> {
    let split = 2 * m * r;
    let w = isometry(&x[..split], m, r)?;
    Some((w, stochastic_from_coords(&x[split..], n)))
}

/// The K1 extension over `(a, b, alpha)` encoded by `params`: a fine
/// isometry of shape `max(n_alpha, rank) x rank` followed by grouping
/// coordinates (one block of `n_alpha` per fine member).
pub fn k1_extension(
    rho_ab: &DensityMatrix,
    n_alpha: usize,
    params: &[f64],
) -> Result<DensityMatrix> {
    let pur = Purification::new(rho_ab)?;
    let r = pur.rank();
    let m = k1_fine_size(&pur, n_alpha);
    if params.len() != 2 * m * r + m * n_alpha {
        return Err(Error::ShapeMismatch {
            expected: 2 * m * r + m * n_alpha,
            got: params.len(),
        });
    }
    let (w, coarse) = k1_unpack(params, m, r, n_alpha)
        .ok_or_else(|| Error::InvalidSpec("ensemble parameters are rank deficient".into()))?;
    let blocks = k1_blocks(&pur, &w, &coarse, n_alpha);
    let mat = crate::quantum::block_diagonal_with_flag(&blocks, &vec![1.0; n_alpha]);
    DensityMatrix::from_trusted(flagged_subsystems(rho_ab, n_alpha), mat)
}

/// Quantum E_F over flagged mixed-state ensembles with `budget.n_alpha`
/// blocks. The K2 optimum (when `n_alpha >= rank`) seeds the search, so the
/// result never exceeds the K2 value for the same budget.
pub fn quantum_ef_k1(rho_ab: &DensityMatrix, budget: &ExtensionBudget) -> Result<OptReport> {
    budget.validate()?;
    let pur = Purification::new(rho_ab)?;
    let r = pur.rank();
    let n = budget.n_alpha;
    let m = k1_fine_size(&pur, n);
    let dim = 2 * m * r + m * n;

    let objective = |x: &[f64]| match k1_unpack(x, m, r, n) {
        Some((w, coarse)) => k1_value(&pur, &w, &coarse, n),
        None => f64::INFINITY,
    };

    let grouping = |f: &dyn Fn(usize) -> usize| -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for mu in 0..m {
            c[mu * n + f(mu)] = 1.0;
        }
        c
    };
    let mut starts = Vec::new();
    let mut evaluations = 0;
    if n >= r {
        let k2 = quantum_ef_k2(rho_ab, budget)?;
        evaluations += k2.evaluations;
        let mut s = k2.best_params.clone();
        s.extend(grouping(&|mu| mu));
        starts.push(s);
    }
    let mut eigen = reals_from_complex(&identity_isometry(m, r));
    eigen.extend(grouping(&|mu| mu % n));
    starts.push(eigen);
    starts.extend(budget.random_starts(dim, 3));

    let res = multi_start(&objective, &starts, &budget.multi_start_config(dim));
    evaluations += res.evaluations;
    let ext = k1_extension(rho_ab, n, &res.best_x)?;
    let residual = feasibility_check(rho_ab, ext.partial_trace(&rho_ab.names())?.matrix())?;
    let (w, coarse) = k1_unpack(&res.best_x, m, r, n).expect("best point was finite");
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("rank".into(), r as f64);
    diagnostics.insert("fine_ensemble_size".into(), m as f64);
    diagnostics.insert("feasibility_residual".into(), residual);
    Ok(OptReport {
        best_value: k1_value(&pur, &w, &coarse, n).max(0.0),
        bound_direction: BoundDirection::UpperBoundOfMin,
        best_params: res.best_x,
        seed: budget.seed,
        evaluations,
        converged: res.converged,
        budget: budget.clone(),
        diagnostics,
    })
}

fn k0_env_size(pur: &Purification, dim_lambda: usize) -> usize {
    k1_fine_size(pur, dim_lambda) * dim_lambda
}

/// The K0 extension over `(a, b, lambda)` encoded by `params` (an isometry
/// from the purifying register to `lambda ⊗ env`, lambda major, with
/// `env = max(dim_lambda, rank) * dim_lambda`).
pub fn k0_extension(
    rho_ab: &DensityMatrix,
    dim_lambda: usize,
    params: &[f64],
) -> Result<DensityMatrix> {
    let pur = Purification::new(rho_ab)?;
    let r = pur.rank();
    let rows = dim_lambda * k0_env_size(&pur, dim_lambda);
    if params.len() != 2 * rows * r {
        return Err(Error::ShapeMismatch {
            expected: 2 * rows * r,
            got: params.len(),
        });
    }
    let w = isometry(params, rows, r)
        .ok_or_else(|| Error::InvalidSpec("extension parameters are rank deficient".into()))?;
    let mut subs = rho_ab.subsystems().to_vec();
    subs.push(Subsystem::new("lambda", dim_lambda));
    DensityMatrix::from_trusted(subs, k0_state(&pur, &w, dim_lambda))
}

/// Quantum E_F over all extensions whose extra register has dimension
/// `dim_lambda`. `budget.n_alpha` is not used; `dim_lambda` sets the size.
///
/// Starts include the trivial extension (value `S(a:b)`) and the embedded
/// K1 optimum for `dim_lambda` blocks, so the result is never above either.
pub fn quantum_ef_k0_bounded(
    rho_ab: &DensityMatrix,
    dim_lambda: usize,
    budget: &ExtensionBudget,
) -> Result<OptReport> {
    if dim_lambda == 0 {
        return Err(Error::InvalidBudget(
            "extension dimension must be at least 1".into(),
        ));
    }
    let budget = budget.clone().with_n_alpha(dim_lambda);
    budget.validate()?;
    let pur = Purification::new(rho_ab)?;
    let (da, db) = (pur.da, pur.db);
    let r = pur.rank();
    let n = dim_lambda;
    let env = k0_env_size(&pur, n);
    let rows = n * env;
    let dim = 2 * rows * r;

    let objective = |x: &[f64]| match isometry(x, rows, r) {
        Some(w) => quantum_cmi_raw(&k0_state(&pur, &w, n), da, db, n),
        None => f64::INFINITY,
    };

    // lambda fixed at |0>, purifier copied into the environment.
    let trivial = CMat::from_fn(rows, r, |row, i| {
        if row == i {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mut starts = vec![reals_from_complex(&trivial)];
    let mut evaluations = 0;
    if n > 1 {
        let k1 = quantum_ef_k1(rho_ab, &budget)?;
        evaluations += k1.evaluations;
        let m = k1_fine_size(&pur, n);
        let (w1, coarse) = k1_unpack(&k1.best_params, m, r, n).expect("K1 optimum is finite");
        // |i> -> sum_{mu, l} W1[mu, i] sqrt(P(l|mu)) |l>_lambda |mu, l>_env
        let mut embed = CMat::zeros(rows, r);
        for mu in 0..m {
            for l in 0..n {
                let amp = coarse[mu * n + l].sqrt();
                if amp == 0.0 {
                    continue;
                }
                for i in 0..r {
                    embed[(l * env + mu * n + l, i)] = w1[(mu, i)] * C64::new(amp, 0.0);
                }
            }
        }
        starts.push(reals_from_complex(&embed));
        starts.extend(budget.random_starts(dim, 4));
    }

    let res = multi_start(&objective, &starts, &budget.multi_start_config(dim));
    evaluations += res.evaluations;
    let ext = k0_extension(rho_ab, n, &res.best_x)?;
    let residual = feasibility_check(rho_ab, ext.partial_trace(&rho_ab.names())?.matrix())?;
    let w = isometry(&res.best_x, rows, r).expect("best point was finite");
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("rank".into(), r as f64);
    diagnostics.insert("environment_dim".into(), env as f64);
    diagnostics.insert("feasibility_residual".into(), residual);
    Ok(OptReport {
        best_value: quantum_cmi_raw(&k0_state(&pur, &w, n), da, db, n).max(0.0),
        bound_direction: BoundDirection::UpperBoundOfMin,
        best_params: res.best_x,
        seed: budget.seed,
        evaluations,
        converged: res.converged,
        budget,
        diagnostics,
    })
}

/// Which extension family a quantum E_F search uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    K0,
    K1,
    K2,
}

/// Dispatches to the solver for `family`; for K0 the extension dimension is
/// `budget.n_alpha`.
pub fn quantum_ef(
    rho_ab: &DensityMatrix,
    family: Family,
    budget: &ExtensionBudget,
) -> Result<OptReport> {
    match family {
        Family::K0 => quantum_ef_k0_bounded(rho_ab, budget.n_alpha, budget),
        Family::K1 => quantum_ef_k1(rho_ab, budget),
        Family::K2 => quantum_ef_k2(rho_ab, budget),
    }
}

/// Coordinates of a deterministic grouping for use as a search start.
pub fn one_hot_coords(choices: &[usize], n_out: usize) -> Vec<f64> {
    let mut p = vec![0.0; choices.len() * n_out];
    for (i, &c) in choices.iter().enumerate() {
        p[i * n_out + c] = 1.0;
    }
    coords_from_simplex(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::mutual_information;
    use crate::quantum::{random_density_matrix, subsystems, tensor, von_neumann_entropy};
    use approx::assert_abs_diff_eq;

    fn quick(n: usize) -> ExtensionBudget {
        ExtensionBudget::new(n)
            .with_restarts(2)
            .with_iterations(200)
    }

    #[test]
    fn budget_validation() {
        assert!(matches!(
            ExtensionBudget::new(0).validate(),
            Err(Error::InvalidBudget(_))
        ));
        assert!(ExtensionBudget::new(1).with_restarts(0).validate().is_err());
    }

    #[test]
    fn classical_single_value_conditioner_is_mi() {
        let p = JointPmf::new(
            vec![Axis::new("a", 2), Axis::new("b", 2)],
            vec![0.4, 0.1, 0.2, 0.3],
        )
        .unwrap();
        let r = classical_ef(&p, &quick(1)).unwrap();
        assert_eq!(
            r.best_value,
            mutual_information(&p, &["a"], &["b"]).unwrap()
        );
    }

    #[test]
    fn classical_correlated_bits_vanish_with_two_values() {
        let p = JointPmf::new(
            vec![Axis::new("a", 2), Axis::new("b", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let r = classical_ef(&p, &quick(2)).unwrap();
        assert!(r.best_value <= 1e-9);
        let ext = classical_extension(&p, 2, &r.best_params).unwrap();
        let m = ext.marginalize(&["a", "b"]).unwrap();
        for (x, y) in m.probs().iter().zip(p.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_rejects_non_bipartite() {
        let p = JointPmf::uniform(vec![Axis::new("a", 2)]).unwrap();
        assert!(classical_ef(&p, &quick(2)).is_err());
    }

    #[test]
    fn k2_of_bell_state() {
        let bell = DensityMatrix::maximally_entangled("a", "b", 2).unwrap();
        let r = quantum_ef_k2(&bell, &quick(4)).unwrap();
        assert_abs_diff_eq!(r.best_value, 2.0 * 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn k2_needs_enough_members() {
        let rho = random_density_matrix(1, &subsystems(&[("a", 2), ("b", 2)]), 3).unwrap();
        assert!(matches!(
            quantum_ef_k2(&rho, &quick(2)),
            Err(Error::InvalidBudget(_))
        ));
    }

    #[test]
    fn k2_of_product_state() {
        let ra = random_density_matrix(2, &subsystems(&[("a", 2)]), 2).unwrap();
        let rb = random_density_matrix(3, &subsystems(&[("b", 2)]), 2).unwrap();
        let rho = tensor(&ra, &rb).unwrap();
        let r = quantum_ef_k2(&rho, &quick(4)).unwrap();
        assert!(r.best_value <= 1e-6, "{}", r.best_value);
    }

    #[test]
    fn k1_pure_state_equals_twice_local_entropy() {
        let psi = random_density_matrix(4, &subsystems(&[("a", 2), ("b", 2)]), 1).unwrap();
        let sa = von_neumann_entropy(&psi.partial_trace(&["a"]).unwrap()).unwrap();
        let r = quantum_ef_k1(&psi, &quick(3)).unwrap();
        assert_abs_diff_eq!(r.best_value, 2.0 * sa, epsilon = 1e-6);
    }

    #[test]
    fn k0_with_trivial_register_is_mutual_information() {
        let rho = random_density_matrix(6, &subsystems(&[("a", 2), ("b", 2)]), 3).unwrap();
        let mi = crate::quantum::quantum_mutual_information(&rho, &["a"], &["b"]).unwrap();
        let r = quantum_ef_k0_bounded(&rho, 1, &quick(1)).unwrap();
        assert_abs_diff_eq!(r.best_value, mi, epsilon = 1e-10);
        assert!(quantum_ef_k0_bounded(&rho, 0, &quick(1)).is_err());
    }

    #[test]
    fn extensions_reproduce_marginals() {
        let rho = random_density_matrix(8, &subsystems(&[("a", 2), ("b", 2)]), 4).unwrap();
        let r = quantum_ef_k1(&rho, &quick(4)).unwrap();
        let ext = k1_extension(&rho, 4, &r.best_params).unwrap();
        let back = ext.partial_trace(&["a", "b"]).unwrap();
        assert!(max_abs_diff(back.matrix(), rho.matrix()) < FEASIBILITY_TOLERANCE);
    }
}

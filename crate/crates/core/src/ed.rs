//! Entanglement of distillation: the largest post-selected inner minimum
//! over local operations, and the bound against formation on the
//! communication-free net.
//!
//! The inner minimum is re-solved for every outer candidate. Two exact
//! shortcuts avoid nested searches when the answer is known to be zero:
//! classically, a conditioner with at least `min(N_a, N_b)` values can copy
//! the smaller variable; quantumly, the post-selected state is dephased in
//! `a`, so a register of dimension `N_a` can copy `a`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{build_fig1, build_fig2, Fig2Spec};
use crate::ef::{
    classical_ef, classical_ef_seeded, quantum_ef_k0_bounded, BoundDirection, ExtensionBudget,
    OptReport,
};
use crate::error::{Error, Result};
use crate::info::{conditional_mutual_information, mi_dense, Axis, JointPmf, StochasticMap};
use crate::linalg::{hermitian_entropy, max_abs_diff, trace, CMat, C64};
use crate::optim::{
    coords_from_simplex, multi_start, stochastic_from_coords, LocalMethod, MultiStartConfig,
};
use crate::quantum::{
    params_to_unitary, partial_trace_matrix, DensityMatrix, Subsystem, UnitaryParams,
};

/// Below this post-selection probability a candidate is discarded.
pub const P_GAMMA_FLOOR: f64 = 1e-14;

/// Slack allowed on the formation bound before an instance is flagged.
pub const ED_EF_SLACK: f64 = 1e-6;

/// Tolerance for the identities of the bound's proof chain.
pub const CHAIN_TOLERANCE: f64 = 1e-10;

/// Deterministic-map enumeration is skipped above this many candidates.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// The post-selected values of the ancilla outputs `a'` and `b'`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaEvent {
    pub a_prime: usize,
    pub b_prime: usize,
}

impl GammaEvent {
    pub fn new(a_prime: usize, b_prime: usize) -> Self {
        GammaEvent { a_prime, b_prime }
    }

    fn validate(&self, na: usize, nb: usize) -> Result<()> {
        if self.a_prime >= na {
            return Err(Error::ValueOutOfRange {
                axis: "a'".into(),
                value: self.a_prime,
                size: na,
            });
        }
        if self.b_prime >= nb {
            return Err(Error::ValueOutOfRange {
                axis: "b'".into(),
                value: self.b_prime,
                size: nb,
            });
        }
        Ok(())
    }
}

/// Classical local operations: `U = P(a, a'|A, A')` and
/// `V = P(b, b'|B, B')`, or `P(b, b'|B, B', a, a')` with the arrow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassicalLocc")]
pub struct ClassicalLocc {
    u: StochasticMap,
    v: StochasticMap,
    comm_arrow: bool,
}

#[derive(Deserialize)]
struct RawClassicalLocc {
    u: StochasticMap,
    v: StochasticMap,
    comm_arrow: bool,
}

impl TryFrom<RawClassicalLocc> for ClassicalLocc {
    type Error = Error;
    fn try_from(r: RawClassicalLocc) -> Result<Self> {
        ClassicalLocc::new(r.u, r.v, r.comm_arrow)
    }
}

fn sizes_of(axes: &[Axis]) -> Vec<usize> {
    axes.iter().map(|a| a.size).collect()
}

impl ClassicalLocc {
    pub fn new(u: StochasticMap, v: StochasticMap, comm_arrow: bool) -> Result<Self> {
        let u_in = sizes_of(u.in_axes());
        let (na, nb) = match (u_in.as_slice(), v.in_axes()) {
            ([x, y], [b, ..]) if x == y => (*x, b.size),
            _ => {
                return Err(Error::InvalidSpec(
                    "U must be conditioned on (A, A')".into(),
                ))
            }
        };
        if sizes_of(u.out_axes()) != [na, na] {
            return Err(Error::InvalidSpec(
                "U must output (a, a') of Alice's cardinality".into(),
            ));
        }
        let expected_v_in = if comm_arrow {
            vec![nb, nb, na, na]
        } else {
            vec![nb, nb]
        };
        if sizes_of(v.in_axes()) != expected_v_in {
            return Err(Error::InvalidSpec(if comm_arrow {
                "V must be conditioned on (B, B', a, a')".into()
            } else {
                "V must be conditioned on (B, B') without communication".into()
            }));
        }
        if sizes_of(v.out_axes()) != [nb, nb] {
            return Err(Error::InvalidSpec(
                "V must output (b, b') of Bob's cardinality".into(),
            ));
        }
        Ok(ClassicalLocc { u, v, comm_arrow })
    }

    /// The processing maps of a two-copy net.
    pub fn from_fig2(spec: &Fig2Spec) -> Result<Self> {
        ClassicalLocc::new(spec.u().clone(), spec.v().clone(), spec.comm_arrow())
    }

    pub fn u(&self) -> &StochasticMap {
        &self.u
    }
    pub fn v(&self) -> &StochasticMap {
        &self.v
    }
    pub fn comm_arrow(&self) -> bool {
        self.comm_arrow
    }

    fn cards(&self) -> (usize, usize) {
        (self.u.in_axes()[0].size, self.v.in_axes()[0].size)
    }
}

fn bipartite(p: &JointPmf, what: &str) -> Result<(usize, usize)> {
    match p.axes() {
        [a, b] => Ok((a.size, b.size)),
        _ => Err(Error::InvalidSpec(format!(
            "{what} must be over exactly two axes"
        ))),
    }
}

fn check_sources(p_x: &JointPmf, p_xp: &JointPmf) -> Result<(usize, usize)> {
    let (na, nb) = bipartite(p_x, "P_X")?;
    if bipartite(p_xp, "P_X'")? != (na, nb) {
        return Err(Error::InvalidSpec(
            "the primed source must have the same cardinalities as the unprimed one".into(),
        ));
    }
    Ok((na, nb))
}

/// Dense layout shared by the classical searches.
struct ClassicalProblem<'a> {
    px: &'a [f64],
    pxp: &'a [f64],
    na: usize,
    nb: usize,
    arrow: bool,
    gamma: GammaEvent,
}

impl ClassicalProblem<'_> {
    fn v_inputs(&self) -> usize {
        let base = self.nb * self.nb;
        if self.arrow {
            base * self.na * self.na
        } else {
            base
        }
    }

    /// Unnormalized `P(a, b, Gamma)` and `P(Gamma)`, tables laid out as in
    /// [`StochasticMap`].
    fn post(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, f64) {
        let (na, nb) = (self.na, self.nb);
        let (ga, gb) = (self.gamma.a_prime, self.gamma.b_prime);
        let (nu, nv) = (na * na, nb * nb);
        let mut q = vec![0.0; na * nb];
        for big_a in 0..na {
            for big_b in 0..nb {
                let w = self.px[big_a * nb + big_b];
                if w == 0.0 {
                    continue;
                }
                for big_ap in 0..na {
                    for big_bp in 0..nb {
                        let wp = w * self.pxp[big_ap * nb + big_bp];
                        if wp == 0.0 {
                            continue;
                        }
                        let u_row = &u[(big_a * na + big_ap) * nu..][..nu];
                        for a in 0..na {
                            let wu = wp * u_row[a * na + ga];
                            if wu == 0.0 {
                                continue;
                            }
                            let v_in = if self.arrow {
                                ((big_b * nb + big_bp) * na + a) * na + ga
                            } else {
                                big_b * nb + big_bp
                            };
                            let v_row = &v[v_in * nv..][..nv];
                            for b in 0..nb {
                                q[a * nb + b] += wu * v_row[b * nb + gb];
                            }
                        }
                    }
                }
            }
        }
        let p_gamma = q.iter().sum();
        (q, p_gamma)
    }
}

/// `P(a, b | Gamma)` and `P(Gamma)` for the two-copy net driven by `locc`.
pub fn classical_post_state(
    p_x: &JointPmf,
    p_xp: &JointPmf,
    locc: &ClassicalLocc,
    gamma: GammaEvent,
) -> Result<(JointPmf, f64)> {
    let (na, nb) = check_sources(p_x, p_xp)?;
    if locc.cards() != (na, nb) {
        return Err(Error::InvalidSpec(
            "local operations do not match the sources".into(),
        ));
    }
    gamma.validate(na, nb)?;
    let problem = ClassicalProblem {
        px: p_x.probs(),
        pxp: p_xp.probs(),
        na,
        nb,
        arrow: locc.comm_arrow,
        gamma,
    };
    let (q, p_gamma) = problem.post(locc.u.table(), locc.v.table());
    if p_gamma <= 0.0 {
        return Err(Error::ZeroProbabilityPostSelection { p_gamma });
    }
    let axes = vec![locc.u.out_axes()[0].clone(), locc.v.out_axes()[0].clone()];
    Ok((JointPmf::from_weights(axes, q)?, p_gamma))
}

/// Inner minimum of `H(a:b|lambda)` over extensions of a normalized
/// `P(a, b)` with `n_lambda` values.
fn classical_inner(
    q: &[f64],
    na: usize,
    nb: usize,
    n_lambda: usize,
    budget: &ExtensionBudget,
) -> Result<f64> {
    if n_lambda == 1 {
        return Ok(mi_dense(q, na, nb).max(0.0));
    }
    if n_lambda >= na.min(nb) {
        return Ok(0.0);
    }
    let p = JointPmf::new(vec![Axis::new("a", na), Axis::new("b", nb)], q.to_vec())?;
    Ok(classical_ef(&p, &budget.clone().with_n_alpha(n_lambda))?.best_value)
}

fn normalized(q: &[f64], p_gamma: f64) -> Vec<f64> {
    q.iter().map(|x| x / p_gamma).collect()
}

/// Reduced deterministic maps: every input either emits `(x, gamma)` for
/// some `x` or is rejected (emits a non-`gamma` ancilla value).
struct DeterministicFamily {
    n_inputs: usize,
    n_out: usize,
    gamma: usize,
}

impl DeterministicFamily {
    fn options(&self) -> usize {
        self.n_out + usize::from(self.n_out > 1)
    }

    fn count(&self) -> Option<usize> {
        self.options().checked_pow(self.n_inputs as u32)
    }

    /// One-hot table for the `index`-th map.
    fn table(&self, mut index: usize) -> Vec<f64> {
        let n = self.n_out;
        let width = n * n;
        let k = self.options();
        let mut t = vec![0.0; self.n_inputs * width];
        for input in 0..self.n_inputs {
            let choice = index % k;
            index /= k;
            let out = if choice < n {
                choice * n + self.gamma
            } else {
                (self.gamma + 1) % n
            };
            t[input * width + out] = 1.0;
        }
        t
    }
}

/// Expands a table over `(B, B', a)` at `a' = gamma` to `(B, B', a, a')`.
/// Rows with `a' != gamma` never reach the post-selected state; they are
/// filled with an arbitrary point mass.
fn expand_arrow_table(t: &[f64], nb: usize, na: usize, ga: usize) -> Vec<f64> {
    let width = nb * nb;
    let mut out = vec![0.0; nb * nb * na * na * width];
    for bb in 0..nb * nb {
        for a in 0..na {
            for ap in 0..na {
                let dst = ((bb * na + a) * na + ap) * width;
                if ap == ga {
                    let src = (bb * na + a) * width;
                    out[dst..dst + width].copy_from_slice(&t[src..src + width]);
                } else {
                    out[dst] = 1.0;
                }
            }
        }
    }
    out
}

struct Candidate {
    value: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    p_gamma: f64,
}

fn enumerate_deterministic(
    problem: &ClassicalProblem,
    n_lambda: usize,
    budget: &ExtensionBudget,
) -> Option<(Option<Candidate>, usize)> {
    let (na, nb) = (problem.na, problem.nb);
    if na > 2 || nb > 2 {
        return None;
    }
    let u_fam = DeterministicFamily {
        n_inputs: na * na,
        n_out: na,
        gamma: problem.gamma.a_prime,
    };
    let v_fam = DeterministicFamily {
        n_inputs: if problem.arrow { nb * nb * na } else { nb * nb },
        n_out: nb,
        gamma: problem.gamma.b_prime,
    };
    let (nu, nv) = (u_fam.count()?, v_fam.count()?);
    let total = nu.checked_mul(nv)?;
    if total > ENUMERATION_CAP {
        return None;
    }
    let v_tables: Vec<Vec<f64>> = (0..nv)
        .map(|j| {
            let t = v_fam.table(j);
            if problem.arrow {
                expand_arrow_table(&t, nb, na, problem.gamma.a_prime)
            } else {
                t
            }
        })
        .collect();
    let best = (0..nu)
        .into_par_iter()
        .map(|i| {
            let u = u_fam.table(i);
            let mut best: Option<(f64, usize, f64)> = None;
            for (j, v) in v_tables.iter().enumerate() {
                let (q, pg) = problem.post(&u, v);
                if pg < P_GAMMA_FLOOR {
                    continue;
                }
                let value = classical_inner(&normalized(&q, pg), na, nb, n_lambda, budget)
                    .unwrap_or(f64::NEG_INFINITY);
                if best.is_none_or(|(b, _, _)| value > b) {
                    best = Some((value, j, pg));
                }
            }
            best.map(|(value, j, pg)| (value, i, j, pg))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<(f64, usize, usize, f64)>, |acc, c| match acc {
            Some(a) if a.0 >= c.0 => Some(a),
            _ => Some(c),
        });
    let candidate = best.map(|(value, i, j, p_gamma)| Candidate {
        value,
        u: u_fam.table(i),
        v: v_tables[j].clone(),
        p_gamma,
    });
    Some((candidate, total))
}

/// Outer search settings. Finite-difference gradients cost two inner
/// solves per coordinate, so they are only used when the inner value is
/// closed form.
fn outer_config(budget: &ExtensionBudget, dim: usize, closed_form_inner: bool) -> MultiStartConfig {
    MultiStartConfig {
        method: if closed_form_inner {
            LocalMethod::for_dimension(dim)
        } else {
            LocalMethod::NelderMead
        },
        iterations: budget.iterations,
        tolerance: budget.tolerance,
        lower_bound: None,
    }
}

/// With a one-valued conditioner the inner value is the exact mutual
/// information, so any searched point bounds the maximum from below.
fn direction_for(n_lambda: usize) -> BoundDirection {
    if n_lambda == 1 {
        BoundDirection::LowerBoundOfMax
    } else {
        BoundDirection::Heuristic
    }
}

/// Classical E_D with an `n_lambda`-valued conditioner: the largest
/// post-selected `min H(a:b|lambda, Gamma)` over local maps.
///
/// For cardinalities at most 2 every reduced deterministic map pair is
/// enumerated first; a continuous search over stochastic maps then starts
/// from the best enumerated pair. `budget.n_alpha` is replaced by
/// `n_lambda`.
pub fn classical_ed(
    p_x: &JointPmf,
    p_xp: &JointPmf,
    n_lambda: usize,
    budget: &ExtensionBudget,
    comm_arrow: bool,
) -> Result<OptReport> {
    classical_ed_with_gamma(
        p_x,
        p_xp,
        n_lambda,
        budget,
        comm_arrow,
        GammaEvent::default(),
    )
}

pub fn classical_ed_with_gamma(
    p_x: &JointPmf,
    p_xp: &JointPmf,
    n_lambda: usize,
    budget: &ExtensionBudget,
    comm_arrow: bool,
    gamma: GammaEvent,
) -> Result<OptReport> {
    let budget = budget.clone().with_n_alpha(n_lambda);
    budget.validate()?;
    let (na, nb) = check_sources(p_x, p_xp)?;
    gamma.validate(na, nb)?;
    let problem = ClassicalProblem {
        px: p_x.probs(),
        pxp: p_xp.probs(),
        na,
        nb,
        arrow: comm_arrow,
        gamma,
    };
    let inner_budget = budget.clone().with_restarts(budget.restarts.min(2));
    let (nu_in, nv_in) = (na * na, problem.v_inputs());
    let (u_width, v_width) = (na * na, nb * nb);
    let mut diagnostics = BTreeMap::new();

    // Identity-like maps: a = A, a' = gamma; b = B, b' = gamma.
    let identity = |n: usize, inputs: usize, g: usize, stride: usize| -> Vec<f64> {
        let mut t = vec![0.0; inputs * n * n];
        for i in 0..inputs {
            let x = (i / stride) % n;
            t[i * n * n + x * n + g] = 1.0;
        }
        t
    };
    let v_stride = if comm_arrow { nb * na * na } else { nb };
    let id_u = identity(na, nu_in, gamma.a_prime, na);
    let id_v = identity(nb, nv_in, gamma.b_prime, v_stride);

    if n_lambda >= na.min(nb) {
        let (_, pg) = problem.post(&id_u, &id_v);
        diagnostics.insert("exact_zero_inner".into(), 1.0);
        diagnostics.insert("p_gamma".into(), pg);
        let mut params = id_u;
        params.extend(id_v);
        return Ok(OptReport {
            best_value: 0.0,
            bound_direction: BoundDirection::LowerBoundOfMax,
            best_params: params,
            seed: budget.seed,
            evaluations: 1,
            converged: true,
            budget,
            diagnostics,
        });
    }

    let mut best: Option<Candidate> = None;
    let mut evaluations = 0;
    if let Some((cand, total)) = enumerate_deterministic(&problem, n_lambda, &inner_budget) {
        evaluations += total;
        diagnostics.insert("enumerated_pairs".into(), total as f64);
        if let Some(c) = &cand {
            diagnostics.insert("enumeration_best".into(), c.value);
        }
        best = cand;
    }

    let split = nu_in * u_width;
    let objective = |x: &[f64]| {
        let u = stochastic_from_coords(&x[..split], u_width);
        let v = stochastic_from_coords(&x[split..], v_width);
        let (q, pg) = problem.post(&u, &v);
        if pg < P_GAMMA_FLOOR {
            return f64::INFINITY;
        }
        match classical_inner(&normalized(&q, pg), na, nb, n_lambda, &inner_budget) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };
    let dim = split + nv_in * v_width;
    let mut starts = Vec::new();
    if let Some(c) = &best {
        let mut s = coords_from_simplex(&c.u);
        s.extend(coords_from_simplex(&c.v));
        starts.push(s);
    }
    let mut s = coords_from_simplex(&id_u);
    s.extend(coords_from_simplex(&id_v));
    starts.push(s);
    starts.extend(budget.random_starts(dim, 10));
    let cfg = outer_config(&budget, dim, n_lambda == 1);
    let res = multi_start(&objective, &starts, &cfg);
    evaluations += res.evaluations;
    if res.best_value.is_finite() {
        let u = stochastic_from_coords(&res.best_x[..split], u_width);
        let v = stochastic_from_coords(&res.best_x[split..], v_width);
        let (_, pg) = problem.post(&u, &v);
        let value = -res.best_value;
        diagnostics.insert("continuous_best".into(), value);
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(Candidate {
                value,
                u,
                v,
                p_gamma: pg,
            });
        }
    }

    let best = best.ok_or(Error::PostSelectionCollapse)?;
    diagnostics.insert("p_gamma".into(), best.p_gamma);
    let mut params = best.u;
    params.extend(best.v);
    Ok(OptReport {
        best_value: best.value.max(0.0),
        bound_direction: direction_for(n_lambda),
        best_params: params,
        seed: budget.seed,
        evaluations,
        converged: res.converged,
        budget,
        diagnostics,
    })
}

/// Quantum local operations: Alice's unitary on `(A, A')` and Bob's family
/// `V^a` on `(B, B')`, one per value of Alice's measured `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantumLocc")]
pub struct QuantumLocc {
    u: UnitaryParams,
    v: Vec<UnitaryParams>,
    comm_arrow: bool,
}

#[derive(Deserialize)]
struct RawQuantumLocc {
    u: UnitaryParams,
    v: Vec<UnitaryParams>,
    comm_arrow: bool,
}

impl TryFrom<RawQuantumLocc> for QuantumLocc {
    type Error = Error;
    fn try_from(r: RawQuantumLocc) -> Result<Self> {
        QuantumLocc::new(r.u, r.v, r.comm_arrow)
    }
}

fn isqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

impl QuantumLocc {
    /// `v` holds one entry per value of `a`. Without communication every
    /// entry must be equal; a single entry is then broadcast.
    pub fn new(u: UnitaryParams, v: Vec<UnitaryParams>, comm_arrow: bool) -> Result<Self> {
        UnitaryParams::new(u.dim, u.params.clone())?;
        let na = isqrt(u.dim).ok_or_else(|| {
            Error::InvalidSpec("U must act on (A, A') of equal dimensions".into())
        })?;
        let first = v
            .first()
            .ok_or_else(|| Error::InvalidSpec("V family is empty".into()))?;
        let v = if v.len() == 1 {
            vec![first.clone(); na]
        } else {
            v
        };
        if v.len() != na {
            return Err(Error::ShapeMismatch {
                expected: na,
                got: v.len(),
            });
        }
        let vd = v[0].dim;
        if isqrt(vd).is_none() {
            return Err(Error::InvalidSpec(
                "V must act on (B, B') of equal dimensions".into(),
            ));
        }
        for p in &v {
            UnitaryParams::new(p.dim, p.params.clone())?;
            if p.dim != vd {
                return Err(Error::InvalidSpec(
                    "all V^a must have the same dimension".into(),
                ));
            }
        }
        if !comm_arrow && v.iter().any(|p| p != &v[0]) {
            return Err(Error::CommunicationNotAllowed);
        }
        Ok(QuantumLocc { u, v, comm_arrow })
    }

    /// Identity operations on `na x na` and `nb x nb` registers.
    pub fn identity(na: usize, nb: usize) -> Self {
        QuantumLocc {
            u: UnitaryParams::zeros(na * na),
            v: vec![UnitaryParams::zeros(nb * nb); na],
            comm_arrow: false,
        }
    }

    pub fn u(&self) -> &UnitaryParams {
        &self.u
    }
    pub fn v(&self) -> &[UnitaryParams] {
        &self.v
    }
    pub fn comm_arrow(&self) -> bool {
        self.comm_arrow
    }
}

fn bipartite_dims(rho: &DensityMatrix, what: &str) -> Result<(usize, usize)> {
    match rho.subsystems() {
        [a, b] => Ok((a.dim, b.dim)),
        _ => Err(Error::InvalidSpec(format!(
            "{what} must be over exactly two subsystems"
        ))),
    }
}

/// `rho_X ⊗ rho_X'` with its indices reordered to `(A, A', B, B')`.
fn alice_first_joint(rx: &CMat, rxp: &CMat, na: usize, nb: usize) -> CMat {
    let d = na * na * nb * nb;
    let split = |i: usize| {
        let (aa, bb) = (i / (nb * nb), i % (nb * nb));
        (aa / na, aa % na, bb / nb, bb % nb)
    };
    CMat::from_fn(d, d, |i, j| {
        let (a1, ap1, b1, bp1) = split(i);
        let (a2, ap2, b2, bp2) = split(j);
        rx[(a1 * nb + b1, a2 * nb + b2)] * rxp[(ap1 * nb + bp1, ap2 * nb + bp2)]
    })
}

/// Unnormalized post-selected state (block diagonal in `a`) and `P(Gamma)`.
fn quantum_post_matrix(
    joint: &CMat,
    u: &CMat,
    vs: &[CMat],
    na: usize,
    nb: usize,
    gamma: GammaEvent,
) -> (CMat, f64) {
    let (du, dv) = (na * na, nb * nb);
    let mut out = CMat::zeros(na * nb, na * nb);
    for a in 0..na {
        let u_row = u.row(a * na + gamma.a_prime);
        let v = &vs[a];
        let k = CMat::from_fn(nb, du * dv, |b, col| {
            u_row[col / dv] * v[(b * nb + gamma.b_prime, col % dv)]
        });
        let sigma = &k * joint * k.adjoint();
        for b1 in 0..nb {
            for b2 in 0..nb {
                out[(a * nb + b1, a * nb + b2)] = sigma[(b1, b2)];
            }
        }
    }
    let p_gamma = trace(&out).re;
    (out, p_gamma)
}

/// The post-selected state `rho_{ab|Gamma}` over `(a, b)` and `P(Gamma)`.
///
/// For each `a`, Alice's row `<a, gamma_a'|U` and Bob's rows
/// `<b, gamma_b'|V^a` act on `rho_X ⊗ rho_X'`; the resulting blocks are
/// placed on the `a` diagonal and the sum is normalized.
pub fn quantum_post_state(
    rho_x: &DensityMatrix,
    rho_xp: &DensityMatrix,
    locc: &QuantumLocc,
    gamma: GammaEvent,
) -> Result<(DensityMatrix, f64)> {
    let (na, nb) = bipartite_dims(rho_x, "rho_X")?;
    if bipartite_dims(rho_xp, "rho_X'")? != (na, nb) {
        return Err(Error::InvalidSpec(
            "the primed source must have the same dimensions as the unprimed one".into(),
        ));
    }
    if locc.u.dim != na * na || locc.v.len() != na || locc.v[0].dim != nb * nb {
        return Err(Error::InvalidSpec(
            "local operations do not match the sources".into(),
        ));
    }
    let u = params_to_unitary(&locc.u)?;
    let vs = locc
        .v
        .iter()
        .map(params_to_unitary)
        .collect::<Result<Vec<_>>>()?;
    quantum_post_state_with_unitaries(rho_x, rho_xp, &u, &vs, gamma)
}

/// [`quantum_post_state`] with explicit matrices: `u` on `(A, A')` and one
/// `vs[a]` on `(B, B')` per value of `a`, rows indexed by the outputs.
/// Unitarity is checked to 1e-10.
pub fn quantum_post_state_with_unitaries(
    rho_x: &DensityMatrix,
    rho_xp: &DensityMatrix,
    u: &CMat,
    vs: &[CMat],
    gamma: GammaEvent,
) -> Result<(DensityMatrix, f64)> {
    let (na, nb) = bipartite_dims(rho_x, "rho_X")?;
    if bipartite_dims(rho_xp, "rho_X'")? != (na, nb) {
        return Err(Error::InvalidSpec(
            "the primed source must have the same dimensions as the unprimed one".into(),
        ));
    }
    let unitary = |m: &CMat, d: usize| {
        m.nrows() == d
            && m.ncols() == d
            && max_abs_diff(&(m.adjoint() * m), &CMat::identity(d, d)) <= 1e-10
    };
    if !unitary(u, na * na) || vs.len() != na || !vs.iter().all(|v| unitary(v, nb * nb)) {
        return Err(Error::InvalidSpec(
            "local operations must be unitaries matching the sources".into(),
        ));
    }
    gamma.validate(na, nb)?;
    let joint = alice_first_joint(rho_x.matrix(), rho_xp.matrix(), na, nb);
    let (m, p_gamma) = quantum_post_matrix(&joint, u, vs, na, nb, gamma);
    if !(p_gamma >= P_GAMMA_FLOOR) {
        return Err(Error::ZeroProbabilityPostSelection { p_gamma });
    }
    let subs = vec![Subsystem::new("a", na), Subsystem::new("b", nb)];
    Ok((
        DensityMatrix::from_trusted(subs, m / C64::new(p_gamma, 0.0))?,
        p_gamma,
    ))
}

fn quantum_inner(
    rho: &CMat,
    na: usize,
    nb: usize,
    dim_lambda: usize,
    budget: &ExtensionBudget,
) -> Result<f64> {
    if dim_lambda >= na {
        return Ok(0.0);
    }
    if dim_lambda == 1 {
        let dims = [na, nb];
        let mi = hermitian_entropy(&partial_trace_matrix(rho, &dims, &[0]))
            + hermitian_entropy(&partial_trace_matrix(rho, &dims, &[1]))
            - hermitian_entropy(rho);
        return Ok(mi.max(0.0));
    }
    let state = DensityMatrix::from_trusted(
        vec![Subsystem::new("a", na), Subsystem::new("b", nb)],
        rho.clone(),
    )?;
    Ok(quantum_ef_k0_bounded(&state, dim_lambda, budget)?.best_value)
}

/// Quantum E_D with a `dim_lambda`-dimensional extension register.
///
/// The outer search runs over generator coordinates of `U` and the `V^a`
/// family (one shared block without communication). `best_params` holds
/// `U`'s coordinates followed by the `V` blocks. `budget.n_alpha` is
/// replaced by `dim_lambda`.
pub fn quantum_ed(
    rho_x: &DensityMatrix,
    rho_xp: &DensityMatrix,
    dim_lambda: usize,
    budget: &ExtensionBudget,
    comm_arrow: bool,
) -> Result<OptReport> {
    let budget = budget.clone().with_n_alpha(dim_lambda);
    budget.validate()?;
    let (na, nb) = bipartite_dims(rho_x, "rho_X")?;
    if bipartite_dims(rho_xp, "rho_X'")? != (na, nb) {
        return Err(Error::InvalidSpec(
            "the primed source must have the same dimensions as the unprimed one".into(),
        ));
    }
    let gamma = GammaEvent::default();
    let joint = alice_first_joint(rho_x.matrix(), rho_xp.matrix(), na, nb);
    let (du, dv) = (na * na, nb * nb);
    let (nu, nv) = (du * du, dv * dv);
    let blocks = if comm_arrow { na } else { 1 };
    let dim = nu + blocks * nv;
    let inner_budget = budget.clone().with_restarts(budget.restarts.min(2));

    let unpack = |x: &[f64]| -> Option<(CMat, Vec<CMat>)> {
        let u = params_to_unitary(&UnitaryParams {
            dim: du,
            params: x[..nu].to_vec(),
        })
        .ok()?;
        let mut vs = Vec::with_capacity(na);
        for a in 0..na {
            let block = if comm_arrow { a } else { 0 };
            let p = x[nu + block * nv..nu + (block + 1) * nv].to_vec();
            vs.push(params_to_unitary(&UnitaryParams { dim: dv, params: p }).ok()?);
        }
        Some((u, vs))
    };
    let evaluate = |x: &[f64]| -> Option<(f64, f64)> {
        let (u, vs) = unpack(x)?;
        let (m, pg) = quantum_post_matrix(&joint, &u, &vs, na, nb, gamma);
        if !(pg >= P_GAMMA_FLOOR) {
            return None;
        }
        let rho = m / C64::new(pg, 0.0);
        Some((
            quantum_inner(&rho, na, nb, dim_lambda, &inner_budget).ok()?,
            pg,
        ))
    };
    let mut diagnostics = BTreeMap::new();

    if dim_lambda >= na {
        let x = vec![0.0; dim];
        let (_, pg) = evaluate(&x).ok_or(Error::PostSelectionCollapse)?;
        diagnostics.insert("exact_zero_inner".into(), 1.0);
        diagnostics.insert("p_gamma".into(), pg);
        return Ok(OptReport {
            best_value: 0.0,
            bound_direction: BoundDirection::LowerBoundOfMax,
            best_params: x,
            seed: budget.seed,
            evaluations: 1,
            converged: true,
            budget,
            diagnostics,
        });
    }

    let objective = |x: &[f64]| match evaluate(x) {
        Some((v, _)) => -v,
        None => f64::INFINITY,
    };
    let mut starts = vec![vec![0.0; dim]];
    starts.extend(budget.random_starts(dim, 11));
    let cfg = outer_config(&budget, dim, dim_lambda == 1);
    let res = multi_start(&objective, &starts, &cfg);
    let (value, pg) = evaluate(&res.best_x).ok_or(Error::PostSelectionCollapse)?;
    diagnostics.insert("p_gamma".into(), pg);
    Ok(OptReport {
        best_value: value,
        bound_direction: direction_for(dim_lambda),
        best_params: res.best_x,
        seed: budget.seed,
        evaluations: res.evaluations,
        converged: res.converged,
        budget,
        diagnostics,
    })
}

/// Quantities of the proof chain of `E_D <= E_F + E_F'` evaluated on one
/// net, all in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainValues {
    /// `H(AA':BB'|alpha alpha')`.
    pub ancestors_cmi: f64,
    /// `H(A:B|alpha) + H(A':B'|alpha')`.
    pub additive_sum: f64,
    pub additivity_residual: f64,
    /// `H(AA':BB'|alpha alpha', Gamma)`.
    pub ancestors_cmi_gamma: f64,
    pub gamma_independence_residual: f64,
    /// `H(a:b|alpha alpha', Gamma)`.
    pub processed_cmi_gamma: f64,
    /// `ancestors_cmi_gamma - processed_cmi_gamma`; nonnegative by the
    /// data processing inequality.
    pub processing_margin: f64,
    pub p_gamma: f64,
}

impl ChainValues {
    pub fn holds(&self) -> bool {
        self.additivity_residual <= CHAIN_TOLERANCE
            && self.gamma_independence_residual <= CHAIN_TOLERANCE
            && self.processing_margin >= -CHAIN_TOLERANCE
    }
}

/// Result of comparing the distillation estimate with the formation bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdEfReport {
    pub ed: OptReport,
    pub ef_x: OptReport,
    pub ef_x_prime: OptReport,
    pub ef_sum: f64,
    /// `ef_sum - ed.best_value`.
    pub margin: f64,
    pub violation: bool,
    /// Absent when the net's own maps never produce `Gamma`.
    pub chain: Option<ChainValues>,
}

/// Evaluates the proof-chain quantities on the net's own maps.
pub fn chain_values(spec: &Fig2Spec, gamma: GammaEvent) -> Result<Option<ChainValues>> {
    let names = spec.names();
    let joint = build_fig2(spec, true)?;
    let cmi = |p: &JointPmf, a: &[&str], b: &[&str], c: &[&str]| {
        conditional_mutual_information(p, a, b, c)
    };
    let big_a = [names.big_a.as_str(), names.big_a_p.as_str()];
    let big_b = [names.big_b.as_str(), names.big_b_p.as_str()];
    let cond = [names.alpha.as_str(), names.alpha_p.as_str()];

    let ancestors_cmi = cmi(&joint, &big_a, &big_b, &cond)?;
    let additive_sum = cmi(&joint, &[&names.big_a], &[&names.big_b], &[&names.alpha])?
        + cmi(
            &joint,
            &[&names.big_a_p],
            &[&names.big_b_p],
            &[&names.alpha_p],
        )?;
    let evidence = [
        (names.a_p.as_str(), gamma.a_prime),
        (names.b_p.as_str(), gamma.b_prime),
    ];
    let (post, p_gamma) = match joint.condition(&evidence) {
        Ok(r) => r,
        Err(Error::ZeroProbabilityEvent) => return Ok(None),
        Err(e) => return Err(e),
    };
    let ancestors_cmi_gamma = cmi(&post, &big_a, &big_b, &cond)?;
    let processed_cmi_gamma = cmi(&post, &[&names.a], &[&names.b], &cond)?;
    Ok(Some(ChainValues {
        ancestors_cmi,
        additive_sum,
        additivity_residual: (ancestors_cmi - additive_sum).abs(),
        ancestors_cmi_gamma,
        gamma_independence_residual: (ancestors_cmi - ancestors_cmi_gamma).abs(),
        processed_cmi_gamma,
        processing_margin: ancestors_cmi_gamma - processed_cmi_gamma,
        p_gamma,
    }))
}

/// Checks `E_D(P_X, P_X') <= E_F(P_X) + E_F(P_X')` on a communication-free
/// net. The formation values use the sources' own conditioner sizes and the
/// distillation conditioner has `N_alpha * N_alpha'` values, the size of the
/// joint `(alpha, alpha')` used in the bound's proof.
pub fn check_ed_le_ef(spec: &Fig2Spec, budget: &ExtensionBudget) -> Result<EdEfReport> {
    if spec.comm_arrow() {
        return Err(Error::CommunicationNotAllowed);
    }
    // The source's own ancestor is a feasible extension; its posterior
    // seeds the formation search.
    let source = |f: &crate::bayes::Fig1Spec| -> Result<(JointPmf, OptReport)> {
        let joint = build_fig1(f)?;
        let p = joint.marginalize(&[&f.a_axis().name, &f.b_axis().name])?;
        let n = f.alpha_axis().size;
        let posterior: Vec<f64> = p
            .probs()
            .iter()
            .enumerate()
            .flat_map(|(cell, &pc)| {
                let row = &joint.probs()[cell * n..(cell + 1) * n];
                row.iter()
                    .map(move |&w| if pc > 0.0 { w / pc } else { 1.0 / n as f64 })
                    .collect::<Vec<_>>()
            })
            .collect();
        let ef = classical_ef_seeded(&p, &budget.clone().with_n_alpha(n), &[posterior])?;
        Ok((p, ef))
    };
    let (p_x, ef_x) = source(spec.x())?;
    let (p_xp, ef_x_prime) = source(spec.x_prime())?;
    let n_alpha = spec.x().alpha_axis().size;
    let n_alpha_p = spec.x_prime().alpha_axis().size;

    let ed = classical_ed(&p_x, &p_xp, n_alpha * n_alpha_p, budget, false)?;
    let ef_sum = ef_x.best_value + ef_x_prime.best_value;
    let margin = ef_sum - ed.best_value;
    Ok(EdEfReport {
        chain: chain_values(spec, GammaEvent::default())?,
        ed,
        ef_x,
        ef_x_prime,
        ef_sum,
        margin,
        violation: margin < -ED_EF_SLACK,
    })
}

//! The three fixed-topology Bayesian nets: a common-ancestor net, the
//! two-copy local processing net with optional Alice-to-Bob communication,
//! and the local post-processing net used by the data processing checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{strides, table_len, validate_axes, Axis, JointPmf, StochasticMap};
use crate::random::{dirichlet_uniform, rng_for, SeededRng};

fn single_axis<'a>(axes: &'a [Axis], what: &str) -> Result<&'a Axis> {
    match axes {
        [ax] => Ok(ax),
        _ => Err(Error::InvalidSpec(format!(
            "{what} must have exactly one axis"
        ))),
    }
}

fn expect_inputs(map: &StochasticMap, inputs: &[&Axis], what: &str) -> Result<()> {
    let ok = map.in_axes().len() == inputs.len()
        && map.in_axes().iter().zip(inputs).all(|(x, y)| x == *y);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "{what} must be conditioned on {:?}",
            inputs.iter().map(|a| a.name.as_str()).collect::<Vec<_>>()
        )))
    }
}

pub(crate) fn random_map(
    rng: &mut SeededRng,
    in_axes: Vec<Axis>,
    out_axes: Vec<Axis>,
) -> Result<StochasticMap> {
    let n_in = table_len(&in_axes);
    let n_out = table_len(&out_axes);
    let table = (0..n_in)
        .flat_map(|_| dirichlet_uniform(rng, n_out))
        .collect();
    StochasticMap::new(in_axes, out_axes, table)
}

fn random_pmf(rng: &mut SeededRng, axes: Vec<Axis>) -> Result<JointPmf> {
    let n = table_len(&axes);
    JointPmf::new(axes, dirichlet_uniform(rng, n))
}

fn check_cards(cards: &[(&str, usize)]) -> Result<()> {
    for &(name, size) in cards {
        if size == 0 {
            return Err(Error::InvalidCardinality {
                name: name.into(),
                size,
            });
        }
    }
    Ok(())
}

/// Common-ancestor net `P(a|alpha) P(b|alpha) P(alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFig1")]
pub struct Fig1Spec {
    prior: JointPmf,
    a_given_alpha: StochasticMap,
    b_given_alpha: StochasticMap,
}

#[derive(Deserialize)]
struct RawFig1 {
    prior: JointPmf,
    a_given_alpha: StochasticMap,
    b_given_alpha: StochasticMap,
}

impl TryFrom<RawFig1> for Fig1Spec {
    type Error = Error;
    fn try_from(r: RawFig1) -> Result<Self> {
        Fig1Spec::new(r.prior, r.a_given_alpha, r.b_given_alpha)
    }
}

impl Fig1Spec {
    pub fn new(
        prior: JointPmf,
        a_given_alpha: StochasticMap,
        b_given_alpha: StochasticMap,
    ) -> Result<Self> {
        let alpha = single_axis(prior.axes(), "prior")?;
        expect_inputs(&a_given_alpha, &[alpha], "P(a|alpha)")?;
        expect_inputs(&b_given_alpha, &[alpha], "P(b|alpha)")?;
        let a = single_axis(a_given_alpha.out_axes(), "P(a|alpha) output")?;
        let b = single_axis(b_given_alpha.out_axes(), "P(b|alpha) output")?;
        validate_axes(&[a.clone(), b.clone(), alpha.clone()])?;
        Ok(Fig1Spec {
            prior,
            a_given_alpha,
            b_given_alpha,
        })
    }

    pub fn prior(&self) -> &JointPmf {
        &self.prior
    }
    pub fn a_given_alpha(&self) -> &StochasticMap {
        &self.a_given_alpha
    }
    pub fn b_given_alpha(&self) -> &StochasticMap {
        &self.b_given_alpha
    }
    pub fn a_axis(&self) -> &Axis {
        &self.a_given_alpha.out_axes()[0]
    }
    pub fn b_axis(&self) -> &Axis {
        &self.b_given_alpha.out_axes()[0]
    }
    pub fn alpha_axis(&self) -> &Axis {
        &self.prior.axes()[0]
    }

    /// The same net with its three axes renamed.
    pub fn renamed(&self, a: &str, b: &str, alpha: &str) -> Result<Fig1Spec> {
        let alpha_ax = Axis::new(alpha, self.alpha_axis().size);
        let prior = JointPmf::new(vec![alpha_ax.clone()], self.prior.probs().to_vec())?;
        let pa = StochasticMap::new(
            vec![alpha_ax.clone()],
            vec![Axis::new(a, self.a_axis().size)],
            self.a_given_alpha.table().to_vec(),
        )?;
        let pb = StochasticMap::new(
            vec![alpha_ax],
            vec![Axis::new(b, self.b_axis().size)],
            self.b_given_alpha.table().to_vec(),
        )?;
        Fig1Spec::new(prior, pa, pb)
    }
}

/// Joint `P(a, b, alpha)` of the common-ancestor net.
pub fn build_fig1(spec: &Fig1Spec) -> Result<JointPmf> {
    let (na, nb, nl) = (
        spec.a_axis().size,
        spec.b_axis().size,
        spec.alpha_axis().size,
    );
    let mut probs = vec![0.0; na * nb * nl];
    for a in 0..na {
        for b in 0..nb {
            for l in 0..nl {
                probs[(a * nb + b) * nl + l] = spec.a_given_alpha.prob(a, l)
                    * spec.b_given_alpha.prob(b, l)
                    * spec.prior.probs()[l];
            }
        }
    }
    let axes = vec![
        spec.a_axis().clone(),
        spec.b_axis().clone(),
        spec.alpha_axis().clone(),
    ];
    JointPmf::from_weights(axes, probs)
}

/// Random common-ancestor net named `(a, b, alpha)`. Every table is drawn
/// from Dirichlet(1, ..., 1).
pub fn random_fig1(seed: u64, n_a: usize, n_b: usize, n_alpha: usize) -> Result<Fig1Spec> {
    let mut rng = rng_for(seed, 1);
    random_fig1_named(&mut rng, ("a", n_a), ("b", n_b), ("alpha", n_alpha))
}

fn random_fig1_named(
    rng: &mut SeededRng,
    a: (&str, usize),
    b: (&str, usize),
    alpha: (&str, usize),
) -> Result<Fig1Spec> {
    check_cards(&[a, b, alpha])?;
    let alpha_ax = Axis::new(alpha.0, alpha.1);
    let prior = random_pmf(rng, vec![alpha_ax.clone()])?;
    let pa = random_map(rng, vec![alpha_ax.clone()], vec![Axis::new(a.0, a.1)])?;
    let pb = random_map(rng, vec![alpha_ax], vec![Axis::new(b.0, b.1)])?;
    Fig1Spec::new(prior, pa, pb)
}

/// Axis names of a two-copy processing net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fig2Names {
    pub big_a: String,
    pub big_b: String,
    pub alpha: String,
    pub big_a_p: String,
    pub big_b_p: String,
    pub alpha_p: String,
    pub a: String,
    pub a_p: String,
    pub b: String,
    pub b_p: String,
}

/// Two independent common-ancestor sources `X = (A, B)` and
/// `X' = (A', B')`, locally processed by Alice's `U = P(a, a'|A, A')` and
/// Bob's `V = P(b, b'|B, B', a, a')`.
///
/// Without the communication arrow `V` is stored with inputs `(B, B')` only,
/// so its independence of `(a, a')` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFig2")]
pub struct Fig2Spec {
    x: Fig1Spec,
    x_prime: Fig1Spec,
    u: StochasticMap,
    v: StochasticMap,
    comm_arrow: bool,
}

#[derive(Deserialize)]
struct RawFig2 {
    x: Fig1Spec,
    x_prime: Fig1Spec,
    u: StochasticMap,
    v: StochasticMap,
    comm_arrow: bool,
}

impl TryFrom<RawFig2> for Fig2Spec {
    type Error = Error;
    fn try_from(r: RawFig2) -> Result<Self> {
        Fig2Spec::new(r.x, r.x_prime, r.u, r.v, r.comm_arrow)
    }
}

impl Fig2Spec {
    pub fn new(
        x: Fig1Spec,
        x_prime: Fig1Spec,
        u: StochasticMap,
        v: StochasticMap,
        comm_arrow: bool,
    ) -> Result<Self> {
        let na = x.a_axis().size;
        let nb = x.b_axis().size;
        if x_prime.a_axis().size != na || x_prime.b_axis().size != nb {
            return Err(Error::InvalidSpec(
                "the primed source must have the same cardinalities as the unprimed one".into(),
            ));
        }
        expect_inputs(&u, &[x.a_axis(), x_prime.a_axis()], "U")?;
        if u.out_axes().len() != 2 || u.out_axes().iter().any(|ax| ax.size != na) {
            return Err(Error::InvalidSpec(
                "U must output (a, a') of Alice's cardinality".into(),
            ));
        }
        let (a, a_p) = (&u.out_axes()[0], &u.out_axes()[1]);
        if comm_arrow {
            expect_inputs(&v, &[x.b_axis(), x_prime.b_axis(), a, a_p], "V")?;
        } else {
            expect_inputs(&v, &[x.b_axis(), x_prime.b_axis()], "V")?;
        }
        if v.out_axes().len() != 2 || v.out_axes().iter().any(|ax| ax.size != nb) {
            return Err(Error::InvalidSpec(
                "V must output (b, b') of Bob's cardinality".into(),
            ));
        }
        let all: Vec<Axis> = [
            x.a_axis(),
            x.b_axis(),
            x.alpha_axis(),
            x_prime.a_axis(),
            x_prime.b_axis(),
            x_prime.alpha_axis(),
            a,
            a_p,
            &v.out_axes()[0],
            &v.out_axes()[1],
        ]
        .into_iter()
        .cloned()
        .collect();
        validate_axes(&all)?;
        Ok(Fig2Spec {
            x,
            x_prime,
            u,
            v,
            comm_arrow,
        })
    }

    pub fn x(&self) -> &Fig1Spec {
        &self.x
    }
    pub fn x_prime(&self) -> &Fig1Spec {
        &self.x_prime
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

    pub fn names(&self) -> Fig2Names {
        Fig2Names {
            big_a: self.x.a_axis().name.clone(),
            big_b: self.x.b_axis().name.clone(),
            alpha: self.x.alpha_axis().name.clone(),
            big_a_p: self.x_prime.a_axis().name.clone(),
            big_b_p: self.x_prime.b_axis().name.clone(),
            alpha_p: self.x_prime.alpha_axis().name.clone(),
            a: self.u.out_axes()[0].name.clone(),
            a_p: self.u.out_axes()[1].name.clone(),
            b: self.v.out_axes()[0].name.clone(),
            b_p: self.v.out_axes()[1].name.clone(),
        }
    }

    /// `V(b, b' | B, B', a, a')` regardless of how it is stored.
    pub fn v_prob(&self, bb_out: usize, big_b: usize, big_b_p: usize, a: usize, a_p: usize) -> f64 {
        let nb = self.x.b_axis().size;
        let na = self.x.a_axis().size;
        let input = if self.comm_arrow {
            ((big_b * nb + big_b_p) * na + a) * na + a_p
        } else {
            big_b * nb + big_b_p
        };
        self.v.prob(bb_out, input)
    }
}

/// Joint of the two-copy net over `(a, b, a', b', alpha, alpha')`, followed
/// by `(A, B, A', B')` when `keep_ancestors` is set.
pub fn build_fig2(spec: &Fig2Spec, keep_ancestors: bool) -> Result<JointPmf> {
    let px = build_fig1(&spec.x)?;
    let pxp = build_fig1(&spec.x_prime)?;
    let na = spec.x.a_axis().size;
    let nb = spec.x.b_axis().size;
    let nl = spec.x.alpha_axis().size;
    let nlp = spec.x_prime.alpha_axis().size;

    let mut axes: Vec<Axis> = vec![
        spec.u.out_axes()[0].clone(),
        spec.v.out_axes()[0].clone(),
        spec.u.out_axes()[1].clone(),
        spec.v.out_axes()[1].clone(),
        spec.x.alpha_axis().clone(),
        spec.x_prime.alpha_axis().clone(),
    ];
    if keep_ancestors {
        axes.extend([
            spec.x.a_axis().clone(),
            spec.x.b_axis().clone(),
            spec.x_prime.a_axis().clone(),
            spec.x_prime.b_axis().clone(),
        ]);
    }
    let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
    let st = strides(&sizes);
    let mut out = vec![0.0; table_len(&axes)];

    for ba in 0..na {
        for bb in 0..nb {
            for l in 0..nl {
                let w = px.probs()[(ba * nb + bb) * nl + l];
                if w == 0.0 {
                    continue;
                }
                for bap in 0..na {
                    for bbp in 0..nb {
                        for lp in 0..nlp {
                            let wp = w * pxp.probs()[(bap * nb + bbp) * nlp + lp];
                            if wp == 0.0 {
                                continue;
                            }
                            let u_in = ba * na + bap;
                            for a in 0..na {
                                for ap in 0..na {
                                    let wu = wp * spec.u.prob(a * na + ap, u_in);
                                    if wu == 0.0 {
                                        continue;
                                    }
                                    for b in 0..nb {
                                        for bp in 0..nb {
                                            let wv = wu * spec.v_prob(b * nb + bp, bb, bbp, a, ap);
                                            let mut idx = a * st[0]
                                                + b * st[1]
                                                + ap * st[2]
                                                + bp * st[3]
                                                + l * st[4]
                                                + lp * st[5];
                                            if keep_ancestors {
                                                idx += ba * st[6]
                                                    + bb * st[7]
                                                    + bap * st[8]
                                                    + bbp * st[9];
                                            }
                                            out[idx] += wv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    JointPmf::from_weights(axes, out)
}

/// Random two-copy net with Alice cardinality `n_a` and Bob cardinality
/// `n_b`, named `A, B, alpha, A', B', alpha', a, a', b, b'`.
pub fn random_fig2(
    seed: u64,
    n_a: usize,
    n_b: usize,
    n_alpha: usize,
    n_alpha_p: usize,
    comm_arrow: bool,
) -> Result<Fig2Spec> {
    check_cards(&[
        ("a", n_a),
        ("b", n_b),
        ("alpha", n_alpha),
        ("alpha'", n_alpha_p),
    ])?;
    let mut rng = rng_for(seed, 2);
    let x = random_fig1_named(&mut rng, ("A", n_a), ("B", n_b), ("alpha", n_alpha))?;
    let xp = random_fig1_named(&mut rng, ("A'", n_a), ("B'", n_b), ("alpha'", n_alpha_p))?;
    let u = random_map(
        &mut rng,
        vec![x.a_axis().clone(), xp.a_axis().clone()],
        vec![Axis::new("a", n_a), Axis::new("a'", n_a)],
    )?;
    let mut v_in = vec![x.b_axis().clone(), xp.b_axis().clone()];
    if comm_arrow {
        v_in.extend(u.out_axes().iter().cloned());
    }
    let v = random_map(
        &mut rng,
        v_in,
        vec![Axis::new("b", n_b), Axis::new("b'", n_b)],
    )?;
    Fig2Spec::new(x, xp, u, v, comm_arrow)
}

/// Local post-processing net
/// `P(a|x) P(b|y) P(x|lambda) P(y|lambda) P(lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFig3")]
pub struct Fig3Spec {
    prior: JointPmf,
    x_given_lambda: StochasticMap,
    y_given_lambda: StochasticMap,
    a_given_x: StochasticMap,
    b_given_y: StochasticMap,
}

#[derive(Deserialize)]
struct RawFig3 {
    prior: JointPmf,
    x_given_lambda: StochasticMap,
    y_given_lambda: StochasticMap,
    a_given_x: StochasticMap,
    b_given_y: StochasticMap,
}

impl TryFrom<RawFig3> for Fig3Spec {
    type Error = Error;
    fn try_from(r: RawFig3) -> Result<Self> {
        Fig3Spec::new(
            r.prior,
            r.x_given_lambda,
            r.y_given_lambda,
            r.a_given_x,
            r.b_given_y,
        )
    }
}

impl Fig3Spec {
    pub fn new(
        prior: JointPmf,
        x_given_lambda: StochasticMap,
        y_given_lambda: StochasticMap,
        a_given_x: StochasticMap,
        b_given_y: StochasticMap,
    ) -> Result<Self> {
        let lambda = single_axis(prior.axes(), "prior")?;
        expect_inputs(&x_given_lambda, &[lambda], "P(x|lambda)")?;
        expect_inputs(&y_given_lambda, &[lambda], "P(y|lambda)")?;
        let x = single_axis(x_given_lambda.out_axes(), "P(x|lambda) output")?;
        let y = single_axis(y_given_lambda.out_axes(), "P(y|lambda) output")?;
        expect_inputs(&a_given_x, &[x], "P(a|x)")?;
        expect_inputs(&b_given_y, &[y], "P(b|y)")?;
        let a = single_axis(a_given_x.out_axes(), "P(a|x) output")?;
        let b = single_axis(b_given_y.out_axes(), "P(b|y) output")?;
        validate_axes(&[a.clone(), b.clone(), x.clone(), y.clone(), lambda.clone()])?;
        Ok(Fig3Spec {
            prior,
            x_given_lambda,
            y_given_lambda,
            a_given_x,
            b_given_y,
        })
    }

    pub fn prior(&self) -> &JointPmf {
        &self.prior
    }
    pub fn x_given_lambda(&self) -> &StochasticMap {
        &self.x_given_lambda
    }
    pub fn y_given_lambda(&self) -> &StochasticMap {
        &self.y_given_lambda
    }
    pub fn a_given_x(&self) -> &StochasticMap {
        &self.a_given_x
    }
    pub fn b_given_y(&self) -> &StochasticMap {
        &self.b_given_y
    }
    pub fn lambda_axis(&self) -> &Axis {
        &self.prior.axes()[0]
    }
    pub fn x_axis(&self) -> &Axis {
        &self.x_given_lambda.out_axes()[0]
    }
    pub fn y_axis(&self) -> &Axis {
        &self.y_given_lambda.out_axes()[0]
    }
    pub fn a_axis(&self) -> &Axis {
        &self.a_given_x.out_axes()[0]
    }
    pub fn b_axis(&self) -> &Axis {
        &self.b_given_y.out_axes()[0]
    }

    /// The same net with different post-processing maps.
    pub fn with_processing(
        &self,
        a_given_x: StochasticMap,
        b_given_y: StochasticMap,
    ) -> Result<Fig3Spec> {
        Fig3Spec::new(
            self.prior.clone(),
            self.x_given_lambda.clone(),
            self.y_given_lambda.clone(),
            a_given_x,
            b_given_y,
        )
    }
}

/// Joint `P(a, b, x, y, lambda)` of the post-processing net.
pub fn build_fig3(spec: &Fig3Spec) -> Result<JointPmf> {
    let (na, nb) = (spec.a_axis().size, spec.b_axis().size);
    let (nx, ny) = (spec.x_axis().size, spec.y_axis().size);
    let nl = spec.lambda_axis().size;
    let mut probs = vec![0.0; na * nb * nx * ny * nl];
    for a in 0..na {
        for b in 0..nb {
            for x in 0..nx {
                for y in 0..ny {
                    for l in 0..nl {
                        probs[(((a * nb + b) * nx + x) * ny + y) * nl + l] =
                            spec.a_given_x.prob(a, x)
                                * spec.b_given_y.prob(b, y)
                                * spec.x_given_lambda.prob(x, l)
                                * spec.y_given_lambda.prob(y, l)
                                * spec.prior.probs()[l];
                    }
                }
            }
        }
    }
    let axes = vec![
        spec.a_axis().clone(),
        spec.b_axis().clone(),
        spec.x_axis().clone(),
        spec.y_axis().clone(),
        spec.lambda_axis().clone(),
    ];
    JointPmf::from_weights(axes, probs)
}

/// Random post-processing net named `(a, b, x, y, lambda)`.
pub fn random_fig3(
    seed: u64,
    n_lambda: usize,
    n_x: usize,
    n_y: usize,
    n_a: usize,
    n_b: usize,
) -> Result<Fig3Spec> {
    check_cards(&[
        ("lambda", n_lambda),
        ("x", n_x),
        ("y", n_y),
        ("a", n_a),
        ("b", n_b),
    ])?;
    let mut rng = rng_for(seed, 3);
    let lambda = Axis::new("lambda", n_lambda);
    let (x, y) = (Axis::new("x", n_x), Axis::new("y", n_y));
    let prior = random_pmf(&mut rng, vec![lambda.clone()])?;
    let px = random_map(&mut rng, vec![lambda.clone()], vec![x.clone()])?;
    let py = random_map(&mut rng, vec![lambda], vec![y.clone()])?;
    let pa = random_map(&mut rng, vec![x], vec![Axis::new("a", n_a)])?;
    let pb = random_map(&mut rng, vec![y], vec![Axis::new("b", n_b)])?;
    Fig3Spec::new(prior, px, py, pa, pb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{conditional_mutual_information, mutual_information};
    use approx::assert_abs_diff_eq;

    fn bit(name: &str) -> Axis {
        Axis::new(name, 2)
    }

    #[test]
    fn single_ancestor_forces_independence() {
        let spec = random_fig1(4, 3, 2, 1).unwrap();
        let p = build_fig1(&spec).unwrap();
        let mi = mutual_information(&p, &["a"], &["b"]).unwrap();
        assert!(mi.abs() < 1e-14, "{mi}");
    }

    #[test]
    fn copied_ancestor_gives_correlated_bits() {
        let prior = JointPmf::uniform(vec![bit("alpha")]).unwrap();
        let pa = StochasticMap::identity(vec![bit("alpha")], &["a"]).unwrap();
        let pb = StochasticMap::identity(vec![bit("alpha")], &["b"]).unwrap();
        let spec = Fig1Spec::new(prior, pa, pb).unwrap();
        let p = build_fig1(&spec).unwrap();
        assert_abs_diff_eq!(
            mutual_information(&p, &["a"], &["b"]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(
            conditional_mutual_information(&p, &["a"], &["b"], &["alpha"]).unwrap(),
            0.0
        );
    }

    #[test]
    fn fig1_rejects_mismatched_conditioner() {
        let prior = JointPmf::uniform(vec![bit("alpha")]).unwrap();
        let pa = StochasticMap::identity(vec![bit("beta")], &["a"]).unwrap();
        let pb = StochasticMap::identity(vec![bit("alpha")], &["b"]).unwrap();
        assert!(matches!(
            Fig1Spec::new(prior, pa, pb),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn fig2_identity_copies_with_point_masses_are_deterministic() {
        let pm = |alpha: &str, a: &str, b: &str| {
            let prior = JointPmf::point_mass(vec![bit(alpha)], &[1]).unwrap();
            let pa = StochasticMap::identity(vec![bit(alpha)], &[a]).unwrap();
            let pb = StochasticMap::identity(vec![bit(alpha)], &[b]).unwrap();
            Fig1Spec::new(prior, pa, pb).unwrap()
        };
        let x = pm("alpha", "A", "B");
        let xp = pm("alpha'", "A'", "B'");
        let u = StochasticMap::identity(vec![bit("A"), bit("A'")], &["a", "a'"]).unwrap();
        let v = StochasticMap::identity(vec![bit("B"), bit("B'")], &["b", "b'"]).unwrap();
        let spec = Fig2Spec::new(x, xp, u, v, false).unwrap();
        let p = build_fig2(&spec, false).unwrap();
        assert_eq!(p.get(&[1, 1, 1, 1, 1, 1]), 1.0);
    }

    #[test]
    fn fig2_uniform_maps_give_uniform_joint() {
        let spec = random_fig2(9, 2, 2, 2, 2, false).unwrap();
        let unif = |ins: Vec<Axis>, outs: Vec<Axis>| {
            let d = JointPmf::uniform(outs).unwrap();
            StochasticMap::constant(ins, &d).unwrap()
        };
        let u = unif(vec![bit("A"), bit("A'")], vec![bit("a"), bit("a'")]);
        let v = unif(vec![bit("B"), bit("B'")], vec![bit("b"), bit("b'")]);
        let spec = Fig2Spec::new(spec.x().clone(), spec.x_prime().clone(), u, v, false).unwrap();
        let p = build_fig2(&spec, false).unwrap();
        let m = p.marginalize(&["a", "b", "a'", "b'"]).unwrap();
        for &v in m.probs() {
            assert_abs_diff_eq!(v, 1.0 / 16.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn fig2_without_arrow_rejects_bob_map_on_alice_outputs() {
        let spec = random_fig2(1, 2, 2, 2, 2, true).unwrap();
        let err = Fig2Spec::new(
            spec.x().clone(),
            spec.x_prime().clone(),
            spec.u().clone(),
            spec.v().clone(),
            false,
        );
        assert!(matches!(err, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn fig2_keeps_ancestors_consistently() {
        let spec = random_fig2(5, 2, 3, 2, 1, true).unwrap();
        let full = build_fig2(&spec, true).unwrap();
        let short = build_fig2(&spec, false).unwrap();
        let m = full
            .marginalize(&["a", "b", "a'", "b'", "alpha", "alpha'"])
            .unwrap();
        for (x, y) in m.probs().iter().zip(short.probs()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn fig3_identity_chain() {
        let lambda = bit("lambda");
        let prior = JointPmf::uniform(vec![lambda.clone()]).unwrap();
        let px = StochasticMap::identity(vec![lambda.clone()], &["x"]).unwrap();
        let py = StochasticMap::identity(vec![lambda], &["y"]).unwrap();
        let pa = StochasticMap::identity(vec![bit("x")], &["a"]).unwrap();
        let pb = StochasticMap::identity(vec![bit("y")], &["b"]).unwrap();
        let spec = Fig3Spec::new(prior, px, py, pa, pb).unwrap();
        let p = build_fig3(&spec).unwrap();
        assert_eq!(p.get(&[0, 0, 0, 0, 0]), 0.5);
        assert_eq!(p.get(&[1, 1, 1, 1, 1]), 0.5);
    }

    #[test]
    fn fig3_constant_processing_decouples() {
        let spec = random_fig3(2, 3, 2, 3, 2, 2).unwrap();
        let qa = JointPmf::new(vec![bit("a")], vec![0.3, 0.7]).unwrap();
        let qb = JointPmf::new(vec![bit("b")], vec![0.6, 0.4]).unwrap();
        let spec = spec
            .with_processing(
                StochasticMap::constant(vec![spec.x_axis().clone()], &qa).unwrap(),
                StochasticMap::constant(vec![spec.y_axis().clone()], &qb).unwrap(),
            )
            .unwrap();
        let p = build_fig3(&spec).unwrap();
        let cmi = conditional_mutual_information(&p, &["a"], &["b"], &["lambda"]).unwrap();
        assert!(cmi < 1e-14);
    }

    #[test]
    fn unit_cardinalities_give_point_mass_spec() {
        let s = random_fig1(77, 1, 1, 1).unwrap();
        assert_eq!(build_fig1(&s).unwrap().probs(), &[1.0]);
        assert!(matches!(
            random_fig1(0, 0, 1, 1),
            Err(Error::InvalidCardinality { .. })
        ));
    }
}

//! Local minimizers and a deterministic multi-start driver.
//!
//! Objectives are plain `Fn(&[f64]) -> f64`; `NaN` is treated as `+inf`.
//! Restarts run in parallel, and results are always reduced in start order
//! so a fixed list of starts gives a fixed answer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Objective<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

fn eval(f: &Objective, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalMethod {
    /// Downhill simplex.
    NelderMead,
    /// Limited-memory BFGS on central-difference gradients.
    Lbfgs,
}

impl LocalMethod {
    /// Simplex descent for small problems, quasi-Newton otherwise.
    pub fn for_dimension(n: usize) -> Self {
        if n <= 8 {
            LocalMethod::NelderMead
        } else {
            LocalMethod::Lbfgs
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Downhill simplex with standard coefficients, started from `x0` and the
/// `n` points `x0 + step * e_i`. Stops when the spread of simplex values
/// drops below `ftol` or after `max_iter` iterations.
pub fn nelder_mead(
    f: &Objective,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    ftol: f64,
) -> LocalResult {
    let n = x0.len();
    if n == 0 {
        return LocalResult {
            x: Vec::new(),
            value: eval(f, x0),
            evaluations: 1,
            converged: true,
        };
    }
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i].abs() > 1e-12 {
            step * p[i].abs().max(0.1)
        } else {
            step
        };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(f, p)).collect();
    let mut evals = n + 1;
    let mut converged = false;

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        // Both tests are needed: a simplex straddling a minimum symmetrically
        // can have equal values at every vertex.
        let spread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(x, b)| (x - b).abs()))
            .fold(0.0, f64::max);
        let scale = 1.0 + pts[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if (vals[n] - vals[0]).abs() <= ftol && spread <= 1e-8 * scale {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = eval(f, &xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(f, &xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-0.5);
                let fc = eval(f, &xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(f, &xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                let best = pts[0].clone();
                for i in 1..=n {
                    for (x, b) in pts[i].iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    vals[i] = eval(f, &pts[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n)
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .unwrap_or(0);
    LocalResult {
        x: pts[best].clone(),
        value: vals[best],
        evaluations: evals,
        converged,
    }
}

/// Central-difference gradient; returns the gradient and evaluation count.
pub fn fd_gradient(f: &Objective, x: &[f64], h: f64) -> (Vec<f64>, usize) {
    let n = x.len();
    let component = |i: usize| {
        let hi = h * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[i] += hi;
        let fp = eval(f, &xp);
        xp[i] = x[i] - hi;
        let fm = eval(f, &xp);
        let g = (fp - fm) / (2.0 * hi);
        if g.is_finite() {
            g
        } else {
            0.0
        }
    };
    let g = if n >= 32 {
        (0..n).into_par_iter().map(component).collect()
    } else {
        (0..n).map(component).collect()
    };
    (g, 2 * n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS with Armijo backtracking on finite-difference gradients.
pub fn lbfgs(f: &Objective, x0: &[f64], max_iter: usize, ftol: f64) -> LocalResult {
    const MEMORY: usize = 8;
    const FD_STEP: f64 = 1e-7;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = eval(f, &x);
    let mut evals = 1;
    if n == 0 || !fx.is_finite() {
        return LocalResult {
            x,
            value: fx,
            evaluations: evals,
            converged: n == 0,
        };
    }
    let (mut g, e) = fd_gradient(f, &x, FD_STEP);
    evals += e;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut stalls = 0;

    for _ in 0..max_iter {
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gnorm < 1e-12 {
            converged = true;
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &q);
            for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
                *qj -= alphas[i] * yj;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            0.1 / gnorm.max(1e-300)
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &q);
            for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
                *qj += (alphas[i] - beta) * sj;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            d = g.iter().map(|v| -v * 0.1 / gnorm).collect();
            slope = dot(&g, &d);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let fnew = eval(f, &xn);
            evals += 1;
            if fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if s_hist.is_empty() {
                converged = true;
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let (gn, e) = fd_gradient(f, &xn, FD_STEP);
        evals += e;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement <= ftol {
            stalls += 1;
            if stalls >= 3 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    LocalResult {
        x,
        value: fx,
        evaluations: evals,
        converged,
    }
}

/// Runs one local search from `x0`.
pub fn local_minimize(
    f: &Objective,
    x0: &[f64],
    method: LocalMethod,
    iterations: usize,
) -> LocalResult {
    match method {
        LocalMethod::NelderMead => nelder_mead(f, x0, 0.25, iterations, 1e-15),
        LocalMethod::Lbfgs => {
            let first = lbfgs(f, x0, iterations, 1e-15);
            // A short simplex polish catches kinks that stall the quasi-Newton step.
            if x0.len() <= 64 {
                let polish = nelder_mead(f, &first.x, 1e-3, iterations.min(50 * x0.len()), 1e-16);
                if polish.value < first.value {
                    return LocalResult {
                        evaluations: first.evaluations + polish.evaluations,
                        converged: first.converged,
                        ..polish
                    };
                }
                return LocalResult {
                    evaluations: first.evaluations + polish.evaluations,
                    ..first
                };
            }
            first
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStartConfig {
    pub method: LocalMethod,
    pub iterations: usize,
    /// Two starts agreeing within this distance count as convergence.
    pub tolerance: f64,
    /// A known lower bound of the objective; reaching it ends the search.
    pub lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartResult {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Final value reached from each start, in start order.
    pub start_values: Vec<f64>,
}

const BOUND_SLACK: f64 = 1e-15;

/// Minimizes from every start and keeps the best result (earliest start
/// wins ties). If some start already sits on `lower_bound`, it is returned
/// without any local search.
pub fn multi_start(f: &Objective, starts: &[Vec<f64>], cfg: &MultiStartConfig) -> MultiStartResult {
    assert!(!starts.is_empty(), "multi_start needs at least one start");
    let initial: Vec<f64> = starts.iter().map(|s| eval(f, s)).collect();
    let mut evaluations = starts.len();
    if let Some(lb) = cfg.lower_bound {
        if let Some(i) = initial.iter().position(|&v| v <= lb + BOUND_SLACK) {
            return MultiStartResult {
                best_x: starts[i].clone(),
                best_value: initial[i],
                evaluations,
                converged: true,
                start_values: initial,
            };
        }
    }
    let results: Vec<LocalResult> = starts
        .par_iter()
        .map(|s| local_minimize(f, s, cfg.method, cfg.iterations))
        .collect();
    evaluations += results.iter().map(|r| r.evaluations).sum::<usize>();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value < results[best].value {
            best = i;
        }
    }
    let best_value = results[best].value;
    let agreeing = results
        .iter()
        .filter(|r| r.value <= best_value + cfg.tolerance)
        .count();
    let at_bound = cfg
        .lower_bound
        .is_some_and(|lb| best_value <= lb + BOUND_SLACK);
    MultiStartResult {
        best_x: results[best].x.clone(),
        best_value,
        evaluations,
        converged: at_bound || agreeing >= 2,
        start_values: results.iter().map(|r| r.value).collect(),
    }
}

/// Maps unconstrained coordinates to the simplex by squaring and
/// normalizing; the all-zero vector maps to the uniform distribution.
pub fn simplex_from_coords(c: &[f64]) -> Vec<f64> {
    let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
    let sum: f64 = sq.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        sq.into_iter().map(|x| x / sum).collect()
    } else {
        vec![1.0 / c.len() as f64; c.len()]
    }
}

/// A preimage of `p` under [`simplex_from_coords`].
pub fn coords_from_simplex(p: &[f64]) -> Vec<f64> {
    p.iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// Column-stochastic table (inputs major, outputs minor) from coordinates,
/// one simplex block per input.
pub fn stochastic_from_coords(c: &[f64], n_out: usize) -> Vec<f64> {
    c.chunks(n_out).flat_map(simplex_from_coords).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let r = nelder_mead(&f, &[0.0, 0.0], 0.5, 2000, 1e-18);
        assert!(r.value < 1e-12, "{}", r.value);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let r = lbfgs(&rosenbrock, &[-1.2, 1.0, -0.5, 0.3], 2000, 1e-18);
        assert!(r.value < 1e-8, "{}", r.value);
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 2.0 * x[1];
        let (g, evals) = fd_gradient(&f, &[3.0, 1.0], 1e-6);
        assert!((g[0] - 6.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-6);
        assert_eq!(evals, 4);
    }

    #[test]
    fn nan_is_treated_as_infinite() {
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 0.5).powi(2)
            }
        };
        let r = nelder_mead(&f, &[0.1], 0.2, 500, 1e-16);
        assert!(r.value < 1e-10, "{:?}", r);
    }

    #[test]
    fn multi_start_is_deterministic_and_picks_best() {
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.1 * (x[0] - 1.0).powi(2);
        let cfg = MultiStartConfig {
            method: LocalMethod::NelderMead,
            iterations: 500,
            tolerance: 1e-9,
            lower_bound: None,
        };
        let starts = vec![vec![-2.0], vec![0.3], vec![2.0]];
        let a = multi_start(&f, &starts, &cfg);
        let b = multi_start(&f, &starts, &cfg);
        assert_eq!(a, b);
        assert!(a.best_value < 1e-10);
        assert!(a.converged);
    }

    #[test]
    fn multi_start_stops_on_lower_bound() {
        let f = |x: &[f64]| x[0] * x[0];
        let cfg = MultiStartConfig {
            method: LocalMethod::Lbfgs,
            iterations: 100,
            tolerance: 1e-9,
            lower_bound: Some(0.0),
        };
        let r = multi_start(&f, &[vec![1.0], vec![0.0]], &cfg);
        assert_eq!(r.best_value, 0.0);
        assert_eq!(r.evaluations, 2);
    }

    #[test]
    fn simplex_coordinates() {
        assert_eq!(simplex_from_coords(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = simplex_from_coords(&[1.0, -1.0, 2.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[2], 4.0 / 6.0);
        let q = simplex_from_coords(&coords_from_simplex(&[0.2, 0.3, 0.5]));
        for (x, y) in q.iter().zip([0.2, 0.3, 0.5]) {
            assert!((x - y).abs() < 1e-15);
        }
        let t = stochastic_from_coords(&[1.0, 0.0, 1.0, 1.0], 2);
        assert_eq!(t, vec![1.0, 0.0, 0.5, 0.5]);
    }
}

//! Maximum-likelihood binary-choice models (logit and probit) fitted by
//! damped Newton iterations on the expected information matrix.
//!
//! For the logit link expected and observed information coincide, so the
//! iteration is plain Newton-Raphson. Step halving guarantees the weighted
//! log-likelihood never decreases.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{HouseholdRecord, PersonRecord};
use crate::design::{CovariateSpec, Design, DesignLayout};
use crate::linalg::Cholesky;
use crate::math::{abs, inverse_mills, ln_norm_cdf, logistic, norm_cdf, softplus, sqrt};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logit,
    Probit,
}

impl Link {
    pub fn probability(self, eta: f64) -> f64 {
        match self {
            Link::Logit => logistic(eta),
            Link::Probit => norm_cdf(eta),
        }
    }

    /// Log-likelihood contribution, score factor `∂ℓ/∂η` and expected
    /// information weight for one observation.
    fn contribution(self, eta: f64, y: bool) -> (f64, f64, f64) {
        match self {
            Link::Logit => {
                let mu = logistic(eta);
                let ll = if y { -softplus(-eta) } else { -softplus(eta) };
                let r = if y { 1.0 - mu } else { -mu };
                (ll, r, mu * (1.0 - mu))
            }
            Link::Probit => {
                let up = inverse_mills(eta); // φ/Φ
                let down = inverse_mills(-eta); // φ/(1-Φ)
                let (ll, r) = if y { (ln_norm_cdf(eta), up) } else { (ln_norm_cdf(-eta), -down) };
                (ll, r, up * down)
            }
        }
    }

    fn log_likelihood(self, eta: f64, y: bool) -> f64 {
        match (self, y) {
            (Link::Logit, true) => -softplus(-eta),
            (Link::Logit, false) => -softplus(eta),
            (Link::Probit, true) => ln_norm_cdf(eta),
            (Link::Probit, false) => ln_norm_cdf(-eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest score component, per unit weight.
    pub score_tol: f64,
    /// Convergence also requires the next Newton step to be this small.
    pub step_tol: f64,
    /// Coefficients beyond this magnitude signal separation.
    pub divergence_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 100, score_tol: 1e-8, step_tol: 1e-6, divergence_bound: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub link: Link,
    pub coefficients: Vec<f64>,
    /// Inverse expected information at the estimate, row-major.
    pub covariance: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_score: f64,
}

impl BinaryFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        let p = self.coefficients.len();
        (0..p).map(|j| sqrt(self.covariance[j * p + j])).collect()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        self.link.probability(dot(row, &self.coefficients))
    }
}

const SEPARATION_VARIANCE: f64 = 1e8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Evaluation {
    ll: f64,
    score: Vec<f64>,
    info: Vec<f64>,
}

fn evaluate(design: &Design, y: &[bool], w: &[f64], link: Link, beta: &[f64]) -> Evaluation {
    let p = design.p;
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut ll = 0.0;
    for i in 0..design.n {
        if w[i] == 0.0 {
            continue;
        }
        let x = design.row(i);
        let (l, r, v) = link.contribution(dot(x, beta), y[i]);
        ll += w[i] * l;
        let wr = w[i] * r;
        let wv = w[i] * v;
        for a in 0..p {
            if x[a] == 0.0 {
                continue;
            }
            score[a] += wr * x[a];
            let s = wv * x[a];
            let row = &mut info[a * p..a * p + p];
            for b in a..p {
                row[b] += s * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[a * p + b] = info[b * p + a];
        }
    }
    Evaluation { ll, score, info }
}

fn log_likelihood(design: &Design, y: &[bool], w: &[f64], link: Link, beta: &[f64]) -> f64 {
    (0..design.n)
        .filter(|&i| w[i] != 0.0)
        .map(|i| w[i] * link.log_likelihood(dot(design.row(i), beta), y[i]))
        .sum()
}

/// Fits `Pr(y = 1 | x)` by weighted maximum likelihood.
///
/// `labels` names each design column for error reporting. Weights are
/// frequency weights. Returns a fit with `converged = false` when the
/// iteration budget runs out without meeting the tolerances.
pub fn fit_binary(
    design: &Design,
    y: &[bool],
    w: &[f64],
    link: Link,
    opts: &FitOptions,
    labels: &[String],
) -> Result<BinaryFit> {
    let (n, p) = (design.n, design.p);
    if y.len() != n || w.len() != n || labels.len() != p {
        return Err(Error::Invalid("design, outcome, weight and label lengths differ".into()));
    }
    if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::Invalid("weights must be finite and nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let positive: f64 = w.iter().zip(y).filter(|(_, &yi)| yi).map(|(wi, _)| wi).sum();
    if positive <= 0.0 || positive >= total {
        return Err(Error::DegenerateOutcome(String::from("fitted sample")));
    }

    let mut beta = vec![0.0; p];
    // start at the marginal rate when column 0 is an intercept
    if (0..n).all(|i| design.row(i)[0] == 1.0) {
        let rate = positive / total;
        let logit0 = crate::math::logit(rate);
        beta[0] = match link {
            Link::Logit => logit0,
            Link::Probit => logit0 / 1.6,
        };
    }

    let singular = |cols: Vec<usize>| Error::Singular { terms: cols.into_iter().map(|c| labels[c].clone()).collect() };

    let mut iterations = 0;
    let mut converged = false;
    let mut eval = evaluate(design, y, w, link, &beta);
    let mut max_score;
    loop {
        max_score = eval.score.iter().fold(0.0_f64, |m, s| m.max(abs(*s))) / total;
        let chol = Cholesky::new(&eval.info, p).map_err(singular)?;
        let step = chol.solve(&eval.score);
        let max_step = step.iter().fold(0.0_f64, |m, s| m.max(abs(*s)));
        if max_score < opts.score_tol && max_step < opts.step_tol {
            converged = true;
            // one last full step: near the optimum it squares the error
            let polished: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
            let next = evaluate(design, y, w, link, &polished);
            if next.ll >= eval.ll {
                beta = polished;
                eval = next;
                max_score = eval.score.iter().fold(0.0_f64, |m, s| m.max(abs(*s))) / total;
            }
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let mut t = 1.0;
        let mut candidate: Vec<f64>;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let ll = log_likelihood(design, y, w, link, &candidate);
            if ll >= eval.ll - 1e-12 * abs(eval.ll) || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        beta = candidate;
        iterations += 1;
        let diverged: Vec<usize> =
            (0..p).filter(|&j| !(abs(beta[j]) <= opts.divergence_bound)).collect();
        if !diverged.is_empty() {
            return Err(Error::Separation { terms: diverged.into_iter().map(|c| labels[c].clone()).collect() });
        }
        eval = evaluate(design, y, w, link, &beta);
    }

    let covariance = Cholesky::new(&eval.info, p).map_err(singular)?.inverse();
    if !converged {
        // Slow divergence: the information for a separated direction
        // collapses before the coefficient crosses the bound.
        let exploded: Vec<usize> =
            (0..p).filter(|&j| !(covariance[j * p + j] <= SEPARATION_VARIANCE)).collect();
        if !exploded.is_empty() {
            return Err(Error::Separation { terms: exploded.into_iter().map(|c| labels[c].clone()).collect() });
        }
    }
    Ok(BinaryFit {
        link,
        coefficients: beta,
        covariance,
        log_likelihood: eval.ll,
        iterations,
        converged,
        max_score,
    })
}

/// A binary-choice model fitted on a covariate specification.
#[derive(Debug, Clone)]
pub struct SpecFit {
    pub layout: DesignLayout,
    pub fit: BinaryFit,
    /// Columns removed after a separation, singularity or constant-column failure.
    pub removed: Vec<String>,
}

impl SpecFit {
    pub fn linear_index(&self, p: &PersonRecord, h: &HouseholdRecord) -> f64 {
        self.layout.linear_index(&self.fit.coefficients, p, h)
    }

    pub fn probability(&self, p: &PersonRecord, h: &HouseholdRecord) -> f64 {
        self.fit.link.probability(self.linear_index(p, h))
    }
}

/// Fits `link` on the design built from `spec` over `rows`.
///
/// With `fallback`, columns named by a separation, singularity or
/// constant-column failure are removed and the model refitted, until it
/// succeeds or only the intercept would remain.
pub fn fit_spec(
    spec: &CovariateSpec,
    rows: &[(&PersonRecord, &HouseholdRecord)],
    y: &[bool],
    w: &[f64],
    link: Link,
    opts: &FitOptions,
    fallback: bool,
) -> Result<SpecFit> {
    let mut removed: Vec<String> = Vec::new();
    loop {
        let attempt = DesignLayout::build_excluding(spec, rows.iter().copied(), &removed)
            .and_then(|(layout, design)| {
                let fit = fit_binary(&design, y, w, link, opts, &layout.names)?;
                Ok((layout, fit))
            });
        let culprits = match attempt {
            Ok((layout, fit)) => return Ok(SpecFit { layout, fit, removed }),
            Err(Error::Separation { terms }) | Err(Error::Singular { terms }) if fallback => terms,
            Err(Error::ConstantCovariate(c)) if fallback => alloc::vec![c],
            Err(e) => return Err(e),
        };
        let fresh: Vec<String> =
            culprits.into_iter().filter(|c| c != "intercept" && !removed.contains(c)).collect();
        if fresh.is_empty() {
            return Err(Error::Singular { terms: alloc::vec!["intercept".into()] });
        }
        removed.extend(fresh);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    use crate::rng::{standard_normal, uniform};

    fn labels(p: usize) -> Vec<String> {
        (0..p).map(|j| alloc::format!("x{j}")).collect()
    }

    #[test]
    fn saturated_binary_covariate_recovers_cell_shares() {
        // cell A: 3 of 10 positive, cell B: 12 of 20 positive
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            x.extend([1.0, 0.0]);
            y.push(i < 3);
        }
        for i in 0..20 {
            x.extend([1.0, 1.0]);
            y.push(i < 12);
        }
        let d = Design::from_rows(2, x);
        for link in [Link::Logit, Link::Probit] {
            let fit = fit_binary(&d, &y, &[1.0; 30], link, &FitOptions::default(), &labels(2)).unwrap();
            assert!(fit.converged);
            assert!((fit.probability(&[1.0, 0.0]) - 0.3).abs() < 1e-8);
            assert!((fit.probability(&[1.0, 1.0]) - 0.6).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_outcome_is_rejected() {
        let d = Design::from_rows(1, alloc::vec![1.0; 5]);
        let err = fit_binary(&d, &[true; 5], &[1.0; 5], Link::Probit, &FitOptions::default(), &labels(1));
        assert!(matches!(err, Err(Error::DegenerateOutcome(_))));
    }

    #[test]
    fn perfect_separation_is_reported() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let v = i as f64 - 19.5;
            x.extend([1.0, v]);
            y.push(v > 0.0);
        }
        let d = Design::from_rows(2, x);
        for link in [Link::Logit, Link::Probit] {
            let err = fit_binary(&d, &y, &[1.0; 40], link, &FitOptions::default(), &labels(2)).unwrap_err();
            match err {
                Error::Separation { terms } => assert!(terms.contains(&"x1".to_string()), "{terms:?}"),
                other => panic!("expected separation, got {other:?}"),
            }
        }
    }

    #[test]
    fn collinear_columns_are_named() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..50 {
            let v = (i % 7) as f64;
            x.extend([1.0, v, 2.0 * v]);
            y.push(i % 3 == 0);
        }
        let d = Design::from_rows(3, x);
        let err = fit_binary(&d, &y, &[1.0; 50], Link::Logit, &FitOptions::default(), &labels(3)).unwrap_err();
        assert_eq!(err, Error::Singular { terms: alloc::vec!["x2".to_string()] });
    }

    #[test]
    fn probit_score_equation_holds_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4000;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            x.extend([1.0, z]);
            y.push(uniform(&mut rng) < norm_cdf(-0.3 + 0.8 * z));
        }
        let d = Design::from_rows(2, x);
        let fit = fit_binary(&d, &y, &alloc::vec![1.0; n], Link::Probit, &FitOptions::default(), &labels(2)).unwrap();
        assert!(fit.converged);
        assert!(fit.max_score < 1e-8);
        assert!((fit.coefficients[1] - 0.8).abs() < 4.0 * fit.standard_errors()[1]);
    }

    #[test]
    fn weights_act_as_frequencies() {
        // duplicating rows equals doubling their weight
        let x = alloc::vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
        let y = [false, true, false, true];
        let d = Design::from_rows(2, x.clone());
        let a = fit_binary(&d, &y, &[2.0, 1.0, 1.0, 2.0], Link::Logit, &FitOptions::default(), &labels(2)).unwrap();
        let mut xx = x.clone();
        xx.extend([1.0, 0.0, 1.0, 3.0]);
        let dd = Design::from_rows(2, xx);
        let yy = [false, true, false, true, false, true];
        let b = fit_binary(&dd, &yy, &[1.0; 6], Link::Logit, &FitOptions::default(), &labels(2)).unwrap();
        for j in 0..2 {
            assert!((a.coefficients[j] - b.coefficients[j]).abs() < 1e-8);
        }
    }
}

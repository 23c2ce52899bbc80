//! Stability and injectivity functionals.
//!
//! The central quantity is `kappa(v, w) = E |<a, v> <a, w>|` for unit
//! vectors: its positivity over difference/sum pairs of a signal class is
//! what makes phaseless measurements stably invertible there. This module
//! estimates kappa (exactly where the ensemble allows, by seeded Monte
//! Carlo otherwise), searches for its infimum over flat pairs, measures
//! empirical stability constants, and evaluates the injectivity margin of a
//! realized sampling operator on tangent spaces.

use crate::ensemble::{apply_a, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{dot, l1_norm, norm2, Mat};
use crate::par;
use crate::rng::{self, unit_sphere_vector, GaussSource};
use crate::signal::{generate, SignalSpec};

/// Kappa estimator mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaMode {
    /// Enumeration for finite-support ensembles; closed form for the
    /// gaussian (bivariate normal `E|XY|`).
    Exact,
    /// Seeded Monte-Carlo average.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy)]
pub struct KappaEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Monte-Carlo sample count, or enumerated state count in exact mode
    /// (0 for the gaussian closed form).
    pub samples: u64,
    pub exact: bool,
}

fn check_unit_pair(v: &[f64], w: &[f64]) -> Result<()> {
    if v.len() != w.len() {
        return Err(Error::DimMismatch {
            context: "kappa: vector lengths",
            expected: v.len(),
            got: w.len(),
        });
    }
    for (name, x) in [("v", v), ("w", w)] {
        let dev = (norm2(x) - 1.0).abs();
        if dev > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "{name} must be a unit vector (|norm - 1| = {dev:e})"
            )));
        }
    }
    Ok(())
}

/// `E |<a, v> <a, w>|` for unit `v`, `w`.
pub fn kappa(ensemble: &Ensemble, v: &[f64], w: &[f64], mode: KappaMode) -> Result<KappaEstimate> {
    check_unit_pair(v, w)?;
    match mode {
        KappaMode::Exact => match ensemble {
            Ensemble::Gaussian => {
                // bivariate normal with correlation rho = <v, w>:
                // E|XY| = (2/pi) (rho asin(rho) + sqrt(1 - rho^2))
                let rho = dot(v, w).clamp(-1.0, 1.0);
                let value = (2.0 / std::f64::consts::PI)
                    * (rho * rho.asin() + (1.0 - rho * rho).sqrt());
                Ok(KappaEstimate {
                    value,
                    std_error: 0.0,
                    samples: 0,
                    exact: true,
                })
            }
            _ => {
                let states = ensemble
                    .enumeration_states(v.len())
                    .unwrap_or(u128::MAX);
                let value = ensemble
                    .enumerate_expectation(v.len(), |a| (dot(a, v) * dot(a, w)).abs())?;
                Ok(KappaEstimate {
                    value,
                    std_error: 0.0,
                    samples: states as u64,
                    exact: true,
                })
            }
        },
        KappaMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidConfig("monte_carlo needs samples >= 1".into()));
            }
            let (mean, std_error) =
                monte_carlo_mean(ensemble, v.len(), samples, seed, |a| {
                    (dot(a, v) * dot(a, w)).abs()
                });
            Ok(KappaEstimate {
                value: mean,
                std_error,
                samples: samples as u64,
                exact: false,
            })
        }
    }
}

/// Chunked, seed-deterministic Monte-Carlo mean of `f(a)` over fresh
/// measurement vectors.
fn monte_carlo_mean(
    ensemble: &Ensemble,
    n: usize,
    samples: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> f64 + Sync,
) -> (f64, f64) {
    let chunks = 8.min(samples);
    let per_chunk = samples / chunks;
    let partials: Vec<(f64, f64, usize)> = par::run_indexed(chunks, |c| {
        let child = rng::derive_seed(seed, &[0x3a9, c as u64]);
        let mut rng = rng::rng_from_seed(child);
        let mut gauss = GaussSource::new(rng::derive_seed(child, &[1]));
        let count = if c == chunks - 1 {
            samples - per_chunk * (chunks - 1)
        } else {
            per_chunk
        };
        let mut a = vec![0.0; n];
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..count {
            for slot in a.iter_mut() {
                *slot = scalar_draw(ensemble, &mut rng, &mut gauss);
            }
            let value = f(&a);
            sum += value;
            sumsq += value * value;
        }
        (sum, sumsq, count)
    });
    let (mut sum, mut sumsq, mut total) = (0.0, 0.0, 0usize);
    for (s, sq, c) in partials {
        sum += s;
        sumsq += sq;
        total += c;
    }
    let mean = sum / total as f64;
    let var = (sumsq / total as f64 - mean * mean).max(0.0);
    (mean, (var / total as f64).sqrt())
}

fn scalar_draw(
    ensemble: &Ensemble,
    rng: &mut rand_chacha::ChaCha8Rng,
    gauss: &mut GaussSource,
) -> f64 {
    match ensemble {
        Ensemble::Gaussian => gauss.sample(),
        Ensemble::Rademacher => {
            if rng::uniform01(rng) < 0.5 {
                -1.0
            } else {
                1.0
            }
        }
        Ensemble::Erasure { p } => {
            let u = rng::uniform01(rng);
            let v = 1.0 / (1.0 - p).sqrt();
            if u < *p {
                0.0
            } else if u < p + (1.0 - p) / 2.0 {
                v
            } else {
                -v
            }
        }
        Ensemble::Discrete { values, probs } => {
            let u = rng::uniform01(rng);
            let mut acc = 0.0;
            for (v, p) in values.iter().zip(probs) {
                acc += p;
                if u < acc {
                    return *v;
                }
            }
            *values.last().unwrap()
        }
    }
}

/// Smallest flatness a unit vector in `R^n` can have, padded so generation
/// stays feasible. Analytics samplers clamp requested `mu` below this floor
/// (a mu-flat unit vector needs `mu >= 1/sqrt(n)`), recording the clamp in
/// the returned reports.
pub fn feasible_mu(mu: f64, n: usize) -> f64 {
    mu.max((1.0 + 1e-9) / (n as f64).sqrt())
}

/// Result of the kappa infimum search over flat difference/sum pairs.
#[derive(Debug, Clone)]
pub struct KappaInfimum {
    pub min_kappa: f64,
    pub min_std_error: f64,
    /// Flatness actually used for sampling (clamped when the requested mu
    /// is infeasible at this dimension).
    pub effective_mu: f64,
    pub pairs_used: usize,
}

/// `k`-sparse sign pattern scaled to unit norm; flatness is exactly
/// `1/sqrt(k)`, the boundary of every class with `mu >= 1/sqrt(k)`.
fn boundary_sign_vector(n: usize, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::rng_from_seed(seed);
    let mut v = vec![0.0; n];
    let scale = 1.0 / (k as f64).sqrt();
    // Fisher-Yates prefix for the support
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng::uniform01(&mut rng) * (n - i) as f64) as usize;
        idx.swap(i, j.min(n - 1));
    }
    for &slot in &idx[..k] {
        v[slot] = if rng::uniform01(&mut rng) < 0.5 {
            -scale
        } else {
            scale
        };
    }
    v
}

/// A near-extremal pair: one coordinate at the flatness boundary `mu`, one
/// empty, the rest equal mass; `t` is `s` with the two special coordinates
/// exchanged. The difference then lives on two coordinates while the sum
/// keeps weight there, which is the structure that minimizes kappa inside
/// the flat class. Infeasible (`mu < 1/sqrt(n-1)`) requests return `None`.
fn swap_block_pair(n: usize, mu: f64, seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let spread_sq = (1.0 - mu * mu) / (n - 2) as f64;
    if spread_sq > mu * mu || n < 4 {
        return None;
    }
    let mut rng = rng::rng_from_seed(seed);
    let spread = spread_sq.sqrt();
    let mut s: Vec<f64> = (0..n)
        .map(|_| {
            if rng::uniform01(&mut rng) < 0.5 {
                -spread
            } else {
                spread
            }
        })
        .collect();
    let p = (rng::uniform01(&mut rng) * n as f64) as usize % n;
    let q = (p + 1 + ((rng::uniform01(&mut rng) * (n - 1) as f64) as usize % (n - 1))) % n;
    let sign_p = s[p].signum();
    let sign_q = s[q].signum();
    let mut t = s.clone();
    s[p] = mu * sign_p;
    s[q] = 0.0;
    t[p] = 0.0;
    t[q] = mu * sign_q;
    Some((s, t))
}

/// Search `min kappa((s-t)/||s-t||, (s+t)/||s+t||)` over pairs of mu-flat
/// vectors. The search mixes four pair families: generic flat directions,
/// dense sign patterns, maximally-peaky sign patterns (sparsity
/// `ceil(1/mu^2)`), and swap-block pairs sitting on the flatness boundary.
/// The structured families are where near-infimal pairs live, so the
/// sampled minimum tracks the class infimum far better than generic
/// directions alone.
pub fn kappa_infimum_flat(
    ensemble: &Ensemble,
    mu: f64,
    n: usize,
    pairs: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<KappaInfimum> {
    let effective_mu = feasible_mu(mu, n);
    let spec = SignalSpec::flat(effective_mu, n);
    let k_min = ((1.0 / (effective_mu * effective_mu)).ceil() as usize).clamp(2, n);
    let estimates: Vec<Option<(f64, f64)>> = par::run_indexed(pairs, |i| {
        let draw = |which: u64| -> Option<Vec<f64>> {
            let child = rng::derive_seed(seed, &[which, i as u64]);
            match i % 4 {
                0 => generate(&spec, child).ok(),
                1 => Some(boundary_sign_vector(n, n, child)),
                _ => Some(boundary_sign_vector(n, k_min, child)),
            }
        };
        let (s, t) = if i % 4 == 3 {
            match swap_block_pair(n, effective_mu, rng::derive_seed(seed, &[9, i as u64])) {
                Some(pair) => pair,
                // at the feasibility floor the swap family degenerates;
                // fall back to a dense sign pair
                None => (
                    boundary_sign_vector(n, n, rng::derive_seed(seed, &[1, i as u64])),
                    boundary_sign_vector(n, n, rng::derive_seed(seed, &[2, i as u64])),
                ),
            }
        } else {
            (draw(1)?, draw(2)?)
        };
        let diff: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a - b).collect();
        let sum: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a + b).collect();
        let (dn, sn) = (norm2(&diff), norm2(&sum));
        if dn < 1e-10 || sn < 1e-10 {
            return None;
        }
        let v: Vec<f64> = diff.iter().map(|x| x / dn).collect();
        let w: Vec<f64> = sum.iter().map(|x| x / sn).collect();
        let est = kappa(
            ensemble,
            &v,
            &w,
            KappaMode::MonteCarlo {
                samples: mc_samples,
                seed: rng::derive_seed(seed, &[3, i as u64]),
            },
        )
        .ok()?;
        Some((est.value, est.std_error))
    });
    let mut best: Option<(f64, f64)> = None;
    let mut used = 0;
    for est in estimates.into_iter().flatten() {
        used += 1;
        if best.is_none_or(|(v, _)| est.0 < v) {
            best = Some(est);
        }
    }
    let (min_kappa, min_std_error) =
        best.ok_or(Error::DegenerateSampler { trials: pairs })?;
    Ok(KappaInfimum {
        min_kappa,
        min_std_error,
        effective_mu,
        pairs_used: used,
    })
}

/// Shape of the flat-class stability lower bound, `sqrt(max(0, 1 - 8 mu^2))`;
/// the multiplicative constant in front of it is existential and reported
/// separately as the measured floor.
pub fn stability_bound_shape(mu: f64) -> f64 {
    (1.0 - 8.0 * mu * mu).max(0.0).sqrt()
}

/// Empirical stability measurement over a signal class.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `min ||phi(A s) - phi(A t)||_1 / (||s - t|| ||s + t||)` over pairs.
    pub min_ratio: f64,
    pub trials: usize,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    /// Flatness parameter of the sampler (1 when the class is unconstrained,
    /// since every unit vector is 1-flat).
    pub mu: f64,
    /// `sqrt(max(0, 1 - 8 mu^2))`, the predicted shape only.
    pub bound_prediction: f64,
}

/// Ratio for one explicit pair; pairs with `||s - t|| ||s + t||` below
/// 1e-10 are degenerate (the sign ambiguity quotient) and return `None`.
pub fn stability_ratio(a: &Mat, s: &[f64], t: &[f64]) -> Option<f64> {
    let diff_norm = {
        let d: Vec<f64> = s.iter().zip(t).map(|(x, y)| x - y).collect();
        norm2(&d)
    };
    let sum_norm = {
        let d: Vec<f64> = s.iter().zip(t).map(|(x, y)| x + y).collect();
        norm2(&d)
    };
    let denom = diff_norm * sum_norm;
    if denom < 1e-10 {
        return None;
    }
    let ps = crate::ensemble::phi(&a.mul_vec(s));
    let pt = crate::ensemble::phi(&a.mul_vec(t));
    let misfit: Vec<f64> = ps.iter().zip(&pt).map(|(x, y)| x - y).collect();
    Some(l1_norm(&misfit) / denom)
}

/// Sample one measurement matrix and search the empirical stability constant
/// of the class described by `sampler` over seeded signal pairs.
pub fn stability_constant(
    ensemble: &Ensemble,
    sampler: &SignalSpec,
    m: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if m == 0 || n == 0 || trials == 0 {
        return Err(Error::InvalidConfig(
            "stability_constant needs m, n, trials >= 1".into(),
        ));
    }
    let a = crate::ensemble::sample_matrix(ensemble, m, n, rng::derive_seed(seed, &[0]))?;
    type RatioAndPair = (f64, Vec<f64>, Vec<f64>);
    let results: Vec<Option<RatioAndPair>> = par::run_indexed(trials, |i| {
        let s = generate(sampler, rng::derive_seed(seed, &[1, i as u64])).ok()?;
        let t = generate(sampler, rng::derive_seed(seed, &[2, i as u64])).ok()?;
        stability_ratio(&a, &s, &t).map(|r| (r, s, t))
    });
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut used = 0;
    for item in results.into_iter().flatten() {
        used += 1;
        if best.as_ref().is_none_or(|(r, _, _)| item.0 < *r) {
            best = Some(item);
        }
    }
    let (min_ratio, s, t) = best.ok_or(Error::DegenerateSampler { trials })?;
    let mu = match &sampler.kind {
        crate::signal::SignalKind::Flat { mu }
        | crate::signal::SignalKind::SparseFlat { mu, .. } => *mu,
        _ => 1.0,
    };
    Ok(StabilityReport {
        min_ratio,
        trials: used,
        worst_pair: (s, t),
        mu,
        bound_prediction: stability_bound_shape(mu),
    })
}

/// Injectivity margin of a realized sampling operator over tangent spaces of
/// flat anchors:
/// `min (1/m) ||A(x x0^T + x0 x^T)||_1 / ||x x0^T + x0 x^T||` over seeded
/// draws of a flat `x0` and a spherical `x`. The per-row product identity
/// `(1/m) ||A(X)||_1 = (2/m) sum_i |a_i^T x| |a_i^T x0|` is the fast path
/// and is cross-checked against the direct operator on the first trial.
pub fn injectivity_margin(a: &Mat, mu: f64, trials: usize, seed: u64) -> Result<f64> {
    let n = a.cols;
    let m = a.rows;
    let effective_mu = feasible_mu(mu, n);
    let spec = SignalSpec::flat(effective_mu, n);
    let values: Vec<f64> = par::run_indexed(trials, |i| {
        let x0 = generate(&spec, rng::derive_seed(seed, &[4, i as u64]))
            .expect("feasible flat spec");
        let x = unit_sphere_vector(n, rng::derive_seed(seed, &[5, i as u64]));
        let mut acc = 0.0;
        for r in 0..m {
            let row = a.row(r);
            acc += (dot(row, &x) * dot(row, &x0)).abs();
        }
        let l1_over_m = 2.0 * acc / m as f64;
        // spectral norm of x x0^T + x0 x^T for unit factors: |<x, x0>| + 1
        let operator_norm = dot(&x, &x0).abs() + 1.0;
        if i == 0 {
            let lift = crate::linalg::SymMatrix::sym_outer_pair(&x, &x0);
            let direct = l1_norm(&apply_a(a, &lift).expect("dims agree")) / m as f64;
            assert!(
                (direct - l1_over_m).abs() <= 1e-9 * direct.max(1.0),
                "row-product identity drifted: {direct} vs {l1_over_m}"
            );
        }
        l1_over_m / operator_norm
    });
    values
        .into_iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .ok_or(Error::DegenerateSampler { trials })
}

/// Empirical deviation `max |Gamma(v, v0) - kappa(v, v0)|` over sampled
/// pairs, where `Gamma` is the realized per-measurement average on `a` and
/// kappa its expectation (Monte-Carlo estimate). This is a lower bound on
/// the supremum deviation of the underlying empirical process.
pub fn empirical_process_deviation(
    a: &Mat,
    ensemble: &Ensemble,
    mu: f64,
    pairs: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = a.cols;
    let m = a.rows;
    let spec = SignalSpec::flat(feasible_mu(mu, n), n);
    let deviations: Vec<f64> = par::run_indexed(pairs, |i| {
        let v = unit_sphere_vector(n, rng::derive_seed(seed, &[6, i as u64]));
        let v0 = generate(&spec, rng::derive_seed(seed, &[7, i as u64]))
            .expect("feasible flat spec");
        let mut gamma = 0.0;
        for r in 0..m {
            let row = a.row(r);
            gamma += (dot(row, &v) * dot(row, &v0)).abs();
        }
        gamma /= m as f64;
        let est = kappa(
            ensemble,
            &v,
            &v0,
            KappaMode::MonteCarlo {
                samples: mc_samples,
                seed: rng::derive_seed(seed, &[8, i as u64]),
            },
        )
        .expect("unit pair");
        (gamma - est.value).abs()
    });
    deviations
        .into_iter()
        .max_by(|a, b| a.partial_cmp(b).unwrap())
        .ok_or(Error::DegenerateSampler { trials: pairs })
}

/// Documented complexity proxy `sqrt(n/m) + n/m` for the flat class;
/// display only.
pub fn rho_complexity_flat(n: usize, m: usize) -> f64 {
    let q = n as f64 / m as f64;
    q.sqrt() + q
}

/// Same proxy for the k-sparse flat class: `sqrt(k log(e n / k) / m) + ...`.
pub fn rho_complexity_sparse(n: usize, k: usize, m: usize) -> f64 {
    let q = k as f64 * (std::f64::consts::E * n as f64 / k as f64).ln() / m as f64;
    q.sqrt() + q
}

//! Dual-certificate construction and verification.
//!
//! For a unit signal `x0` and measurements `a_i`, the certificate is
//! `Y = sum_i lambda_i a_i a_i^T` with
//! `lambda_i = ((a_i^T x0)^2 1[|a_i^T x0| <= R_ct] - beta0) / m`,
//! where `R_ct` is a cutoff radius with `Pr[|a^T x| >= R_ct] <= delta_ct`
//! and `beta0 = E[(a^T x0)^4 1[|a^T x0| <= R_ct]]` centers the corner term
//! `x0^T Y x0` at zero. Optimality of the true lift needs `||Y_T||_F` small
//! and `Y` close to `-2 I` on the complement of the tangent space; the
//! report carries both measured norms.

use crate::ensemble::{apply_a_adjoint, Ensemble, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, op_norm, tangent_norm_sq, SymMatrix};
use crate::par;
use crate::records::Record;
use crate::rng::{self, GaussSource};
use statrs::distribution::{ContinuousCDF, Normal};

/// Fixed internal seed for the cutoff-radius calibration, so `R_ct` is a
/// pure function of (ensemble, delta_ct).
const CUTOFF_CAL_SEED: u64 = 0x52c7_0ff5;
/// Calibration sample count and marginal dimension.
const CUTOFF_CAL_DRAWS: usize = 200_000;
const CUTOFF_CAL_DIM: usize = 64;
/// Empirical calibration targets a slightly tighter tail than requested so
/// a fresh Monte-Carlo check stays below `delta_ct` with margin.
const CUTOFF_CAL_MARGIN: f64 = 0.8;

/// How `beta0` is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta0Mode {
    /// Exhaustive enumeration over the discrete support (small n only).
    ExactEnumeration,
    /// Seeded Monte-Carlo estimate with the given sample count.
    MonteCarlo { samples: usize },
    /// Closed form for the gaussian ensemble, exact for any unit signal.
    GaussianClosedForm,
}

#[derive(Debug, Clone)]
pub struct CertificateConfig {
    /// Cutoff tail probability in (0, 1).
    pub delta_ct: f64,
    pub beta0_mode: Beta0Mode,
    /// Acceptance threshold on `||Y_T||_F`.
    pub eps_t: f64,
    /// Acceptance threshold on `||Y_Tperp + 2 I_Tperp||`.
    pub eps_tperp: f64,
    /// Seed for Monte-Carlo beta0 estimation.
    pub seed: u64,
}

impl CertificateConfig {
    /// Defaults: `delta_ct = 0.01`, thresholds `(0.5, 1.0)`, and a beta0
    /// mode suited to the ensemble (closed form for gaussian, enumeration
    /// when the support is small enough, Monte Carlo otherwise).
    pub fn default_for(ensemble: &Ensemble, n: usize) -> Self {
        let beta0_mode = match ensemble {
            Ensemble::Gaussian => Beta0Mode::GaussianClosedForm,
            _ => {
                if ensemble
                    .enumeration_states(n)
                    .is_some_and(|s| s <= crate::ensemble::ENUM_STATE_CAP)
                {
                    Beta0Mode::ExactEnumeration
                } else {
                    Beta0Mode::MonteCarlo { samples: 1_000_000 }
                }
            }
        };
        CertificateConfig {
            delta_ct: 0.01,
            beta0_mode,
            eps_t: 0.5,
            eps_tperp: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_ct > 0.0 && self.delta_ct < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta_ct must lie in (0, 1), got {}",
                self.delta_ct
            )));
        }
        for (name, v) in [("eps_t", self.eps_t), ("eps_tperp", self.eps_tperp)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Certificate measurements for one (A, x0) instance.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub lambda: Vec<f64>,
    pub y: SymMatrix,
    pub norm_yt: f64,
    pub norm_ytperp_plus_2i: f64,
    pub linf_lambda: f64,
    pub beta0: f64,
    pub beta0_std_error: f64,
    pub r_ct: f64,
    /// Corner term `x0^T Y x0`; zero in expectation by the choice of beta0.
    pub corner: f64,
    pub passed: bool,
}

impl CertificateReport {
    /// Fixed-key text record consumed by the CLI.
    pub fn to_record(&self, sample: &SampleSet) -> Record {
        Record::new("certificate")
            .push("ensemble", &sample.ensemble.descriptor())
            .push("m", sample.m())
            .push("n", sample.n())
            .push("r_ct", self.r_ct)
            .push("beta0", self.beta0)
            .push("beta0_se", self.beta0_std_error)
            .push("norm_yt", self.norm_yt)
            .push("norm_ytperp_plus_2i", self.norm_ytperp_plus_2i)
            .push("linf_lambda", self.linf_lambda)
            .push("lambda_bound", (self.r_ct * self.r_ct + self.beta0) / sample.m() as f64)
            .push("corner", self.corner)
            .push("passed", self.passed)
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Cutoff radius for the two-sided tail `Pr[|a^T x| >= R] <= delta_ct`.
///
/// The gaussian marginal of a unit direction is exactly standard normal, so
/// the quantile is analytic. Other ensembles calibrate an empirical
/// quantile of `|a^T x|` over seeded draws with a fresh random unit `x`
/// each, at a slightly tighter level so the bound holds with margin on
/// fresh samples.
pub fn cutoff_radius(ensemble: &Ensemble, delta_ct: f64) -> Result<f64> {
    if !(delta_ct > 0.0 && delta_ct < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta_ct must lie in (0, 1), got {delta_ct}"
        )));
    }
    match ensemble {
        Ensemble::Gaussian => Ok(standard_normal().inverse_cdf(1.0 - delta_ct / 2.0)),
        _ => {
            let level = 1.0 - CUTOFF_CAL_MARGIN * delta_ct;
            let chunks = 16;
            let per_chunk = CUTOFF_CAL_DRAWS / chunks;
            let mut draws: Vec<f64> = par::run_indexed(chunks, |c| {
                let seed = rng::derive_seed(CUTOFF_CAL_SEED, &[c as u64]);
                let mut rng = rng::rng_from_seed(seed);
                let mut gauss = GaussSource::new(rng::derive_seed(seed, &[1]));
                let mut out = Vec::with_capacity(per_chunk);
                let mut x = vec![0.0; CUTOFF_CAL_DIM];
                for _ in 0..per_chunk {
                    gauss.fill(&mut x);
                    let norm = norm2(&x);
                    if norm < 1e-12 {
                        out.push(0.0);
                        continue;
                    }
                    let mut acc = 0.0;
                    for xj in &x {
                        acc += draw_scalar(ensemble, &mut rng, &mut gauss) * xj;
                    }
                    out.push((acc / norm).abs());
                }
                out
            })
            .into_iter()
            .flatten()
            .collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let idx = ((level * draws.len() as f64).ceil() as usize)
                .clamp(1, draws.len())
                - 1;
            Ok(draws[idx])
        }
    }
}

fn draw_scalar(
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

/// beta0 estimate with its sampling error (zero in the exact modes).
#[derive(Debug, Clone, Copy)]
pub struct Beta0Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Truncated fourth moment `E[(a^T x0)^4 1[|a^T x0| <= r_ct]]` for a unit
/// `x0`.
pub fn beta0(
    ensemble: &Ensemble,
    x0: &[f64],
    r_ct: f64,
    mode: Beta0Mode,
    seed: u64,
) -> Result<Beta0Estimate> {
    check_unit(x0)?;
    match mode {
        Beta0Mode::ExactEnumeration => {
            let value = ensemble.enumerate_expectation(x0.len(), |a| {
                let t = dot(a, x0);
                if t.abs() <= r_ct {
                    t * t * t * t
                } else {
                    0.0
                }
            })?;
            Ok(Beta0Estimate {
                value,
                std_error: 0.0,
            })
        }
        Beta0Mode::GaussianClosedForm => {
            if !matches!(ensemble, Ensemble::Gaussian) {
                return Err(Error::InvalidConfig(
                    "gaussian_closed_form beta0 requires the gaussian ensemble".into(),
                ));
            }
            // int_{-R}^{R} t^4 phi(t) dt = 3 (2 Phi(R) - 1) - 2 phi(R) (R^3 + 3R)
            let normal = standard_normal();
            let mass = 2.0 * normal.cdf(r_ct) - 1.0;
            let value = 3.0 * mass - 2.0 * normal_pdf(r_ct) * (r_ct.powi(3) + 3.0 * r_ct);
            Ok(Beta0Estimate {
                value,
                std_error: 0.0,
            })
        }
        Beta0Mode::MonteCarlo { samples } => {
            if samples == 0 {
                return Err(Error::InvalidConfig("monte_carlo needs samples >= 1".into()));
            }
            let chunks = 16.min(samples);
            let per_chunk = samples / chunks;
            let n = x0.len();
            let partials: Vec<(f64, f64, usize)> = par::run_indexed(chunks, |c| {
                let child = rng::derive_seed(seed, &[0xbe7a, c as u64]);
                let mut rng = rng::rng_from_seed(child);
                let mut gauss = GaussSource::new(rng::derive_seed(child, &[1]));
                let count = if c == chunks - 1 {
                    samples - per_chunk * (chunks - 1)
                } else {
                    per_chunk
                };
                let (mut sum, mut sumsq) = (0.0, 0.0);
                for _ in 0..count {
                    let mut t = 0.0;
                    for &x0j in x0.iter().take(n) {
                        t += draw_scalar(ensemble, &mut rng, &mut gauss) * x0j;
                    }
                    let f = if t.abs() <= r_ct { t * t * t * t } else { 0.0 };
                    sum += f;
                    sumsq += f * f;
                }
                (sum, sumsq, count)
            });
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut total = 0usize;
            for (s, sq, c) in partials {
                sum += s;
                sumsq += sq;
                total += c;
            }
            let mean = sum / total as f64;
            let var = (sumsq / total as f64 - mean * mean).max(0.0);
            Ok(Beta0Estimate {
                value: mean,
                std_error: (var / total as f64).sqrt(),
            })
        }
    }
}

fn check_unit(x0: &[f64]) -> Result<()> {
    let deviation = (norm2(x0) - 1.0).abs();
    if deviation > 1e-12 {
        return Err(Error::NonUnitAnchor { deviation });
    }
    Ok(())
}

/// Closed-form fourth moments of the projections of one measurement vector,
/// for a unit pair `(x0, v)` with `v` orthogonal to `x0`:
/// `E[(a^T x0)^4]`, `E[(a^T x0)^2 (a^T v)^2]`, and `E[(a^T x0)^3 (a^T v)]`.
pub fn fourth_moment_identities(
    ensemble: &Ensemble,
    x0: &[f64],
    v: &[f64],
) -> Result<(f64, f64, f64)> {
    check_unit(x0)?;
    check_unit(v)?;
    if x0.len() != v.len() {
        return Err(Error::DimMismatch {
            context: "fourth_moment_identities: vector lengths",
            expected: x0.len(),
            got: v.len(),
        });
    }
    let overlap = dot(x0, v).abs();
    if overlap > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "vectors must be orthogonal, |<x0, v>| = {overlap:e}"
        )));
    }
    let c4 = ensemble.c4();
    let m4x: f64 = (c4 - 3.0) * x0.iter().map(|x| x.powi(4)).sum::<f64>() + 3.0;
    let m22 = mixed_moment_22(ensemble, x0, v);
    let m31: f64 =
        (c4 - 3.0) * x0.iter().zip(v).map(|(x, vj)| x.powi(3) * vj).sum::<f64>();
    Ok((m4x, m22, m31))
}

/// `E[(a^T v)^2 (a^T w)^2]` for arbitrary unit `v`, `w` (orthogonality not
/// required): `1 + 2 <v, w>^2 + (C4 - 3) sum_j v_j^2 w_j^2`.
pub fn mixed_moment_22(ensemble: &Ensemble, v: &[f64], w: &[f64]) -> f64 {
    let c4 = ensemble.c4();
    let ip = dot(v, w);
    let diag: f64 = v.iter().zip(w).map(|(a, b)| a * a * b * b).sum();
    1.0 + 2.0 * ip * ip + (c4 - 3.0) * diag
}

/// `E[(a^T v)^3 (a^T w)]` for arbitrary unit `v`, `w`:
/// `3 <v, w> + (C4 - 3) sum_j v_j^3 w_j`.
pub fn mixed_moment_31(ensemble: &Ensemble, v: &[f64], w: &[f64]) -> f64 {
    let c4 = ensemble.c4();
    let ip = dot(v, w);
    let cubic: f64 = v.iter().zip(w).map(|(a, b)| a.powi(3) * b).sum();
    3.0 * ip + (c4 - 3.0) * cubic
}

/// Build the certificate for `(sample.a, x0)` and measure its norms.
pub fn build_certificate(
    sample: &SampleSet,
    x0: &[f64],
    cfg: &CertificateConfig,
) -> Result<CertificateReport> {
    cfg.validate()?;
    check_unit(x0)?;
    if x0.len() != sample.n() {
        return Err(Error::DimMismatch {
            context: "build_certificate: signal length vs matrix columns",
            expected: sample.n(),
            got: x0.len(),
        });
    }
    let m = sample.m();
    let r_ct = cutoff_radius(&sample.ensemble, cfg.delta_ct)?;
    let b0 = beta0(&sample.ensemble, x0, r_ct, cfg.beta0_mode, cfg.seed)?;

    let lambda: Vec<f64> = (0..m)
        .map(|i| {
            let t = dot(sample.a.row(i), x0);
            let kept = if t.abs() <= r_ct { t * t } else { 0.0 };
            (kept - b0.value) / m as f64
        })
        .collect();
    let y = apply_a_adjoint(&sample.a, &lambda)?;

    let norm_yt = tangent_norm_sq(&y, x0).sqrt();
    let corner = y.quad_form(x0);

    // Pi0 (Y + 2I) Pi0 with Pi0 = I - x0 x0^T; its operator norm is the
    // restriction to the complement since x0 lies in the kernel
    let n = sample.n();
    let mut shifted = y.clone();
    for i in 0..n {
        let v = shifted.get(i, i) + 2.0;
        shifted.set(i, i, v);
    }
    let mx0 = shifted.mul_vec(x0);
    let c = dot(&mx0, x0);
    let restricted = SymMatrix::from_fn(n, |i, j| {
        shifted.get(i, j) - x0[i] * mx0[j] - mx0[i] * x0[j] + c * x0[i] * x0[j]
    });
    let norm_ytperp_plus_2i = op_norm(&restricted);

    let linf_lambda = crate::linalg::linf_norm(&lambda);
    let passed = norm_yt <= cfg.eps_t && norm_ytperp_plus_2i <= cfg.eps_tperp;
    Ok(CertificateReport {
        lambda,
        y,
        norm_yt,
        norm_ytperp_plus_2i,
        linf_lambda,
        beta0: b0.value,
        beta0_std_error: b0.std_error,
        r_ct,
        corner,
        passed,
    })
}

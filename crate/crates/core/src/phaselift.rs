//! Solvers for the two lifted convex programs.
//!
//! Noiseless: minimize `Tr(X)` subject to `X >= 0` and `a_i^T X a_i = y_i`.
//! Noisy: minimize `sum_i |a_i^T X a_i - y_i|` subject to `X >= 0`.
//!
//! Both are handled by one operator-splitting (ADMM) core with variables
//! `X` (free), `Z` (PSD copy of `X`), and `r` (copy of `A(X) - y`):
//!
//! * X-update: normal equations `(I + A*A) X = (Z - U) + A*(y + r - u)`,
//!   solved exactly through the m x m system `(I + G)` with
//!   `G[i][j] = (a_i^T a_j)^2`, factored once per solve;
//! * r-update: soft threshold (noisy) or pinned to zero (noiseless);
//! * Z-update: eigenvalue-clipping PSD projection, with a trace shift in
//!   the noiseless program;
//! * dual ascent on both constraints, with residual-balancing updates of
//!   the penalty.
//!
//! One solver instance is single-threaded; run one instance per trial when
//! parallelizing.

use crate::ensemble::{apply_a, apply_a_adjoint, lifted_gram, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::{
    eig_sym, frob_norm, l1_norm, psd_project, Cholesky, SymMatrix,
};

/// Operator-splitting parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Absolute tolerance on the combined primal residual
    /// `sqrt(||X - Z||_F^2 + ||A(X) - y - r||^2)`.
    pub primal_tol: f64,
    /// Absolute tolerance on the dual proxy
    /// `rho * sqrt(||dZ||_F^2 + ||dr||^2)`.
    pub dual_tol: f64,
    /// Initial splitting penalty; adapted by residual balancing.
    pub penalty: f64,
    pub verbose: bool,
}

impl SolverConfig {
    /// Defaults scale the tolerances with the number of measurements.
    pub fn default_for(m: usize) -> Self {
        SolverConfig {
            max_iters: 5000,
            primal_tol: 1e-7 * m as f64,
            dual_tol: 1e-7 * m as f64,
            penalty: 1.0,
            verbose: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.primal_tol > 0.0) || !(self.dual_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::InvalidConfig("penalty must be positive".into()));
        }
        Ok(())
    }
}

/// Solver output: the lifted matrix, the extracted signal, and diagnostics.
#[derive(Debug, Clone)]
pub struct LiftedSolution {
    pub x_hat_matrix: SymMatrix,
    pub x_hat: Vec<f64>,
    /// Noiseless program: trace of the solution. Noisy program: l1 data
    /// misfit at the solution.
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Program {
    Noiseless,
    Noisy,
}

/// Trace minimization under exact intensity constraints.
pub fn solve_noiseless(sample: &SampleSet, cfg: &SolverConfig) -> Result<LiftedSolution> {
    solve_core(sample, cfg, Program::Noiseless)
}

/// l1 intensity misfit under the PSD constraint.
pub fn solve_noisy(sample: &SampleSet, cfg: &SolverConfig) -> Result<LiftedSolution> {
    solve_core(sample, cfg, Program::Noisy)
}

fn solve_core(sample: &SampleSet, cfg: &SolverConfig, program: Program) -> Result<LiftedSolution> {
    cfg.validate()?;
    let (m, n) = (sample.m(), sample.n());
    if sample.y.len() != m {
        return Err(Error::DimMismatch {
            context: "solver: intensity length vs measurement rows",
            expected: m,
            got: sample.y.len(),
        });
    }
    for (i, &v) in sample.y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i,
                col: 0,
                value: v,
            });
        }
    }
    let a = &sample.a;
    let y = &sample.y;

    // m x m normal-equation factor for the X-update
    let mut gram_plus_i = lifted_gram(a);
    for i in 0..m {
        let v = gram_plus_i.get(i, i) + 1.0;
        gram_plus_i.set(i, i, v);
    }
    let chol = Cholesky::factor(&gram_plus_i)?;

    let trace_weight = match program {
        Program::Noiseless => 1.0,
        Program::Noisy => 0.0,
    };

    let mut z = SymMatrix::zeros(n);
    let mut u_mat = SymMatrix::zeros(n);
    let mut r = vec![0.0; m];
    let mut u_vec = vec![0.0; m];
    let mut rho = cfg.penalty;

    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iters_done = 0;
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        iters_done = iter;

        // X-update: (I + A*A) X = (Z - U) + A*(y + r - u)
        let c: Vec<f64> = (0..m).map(|i| y[i] + r[i] - u_vec[i]).collect();
        let mut rhs = z.sub(&u_mat);
        rhs.add_assign(&apply_a_adjoint(a, &c)?);
        let a_rhs = apply_a(a, &rhs)?;
        let correction = chol.solve(&a_rhs);
        let x = rhs.sub(&apply_a_adjoint(a, &correction)?);

        let ax = apply_a(a, &x)?;

        // r-update
        let r_old = std::mem::take(&mut r);
        r = match program {
            Program::Noiseless => vec![0.0; m],
            Program::Noisy => (0..m)
                .map(|i| soft_threshold(ax[i] - y[i] + u_vec[i], 1.0 / rho))
                .collect(),
        };

        // Z-update: PSD projection with the trace shift
        let z_old = std::mem::replace(&mut z, SymMatrix::zeros(n));
        let mut shifted = x.add(&u_mat);
        if trace_weight != 0.0 {
            let shift = trace_weight / rho;
            for i in 0..n {
                let v = shifted.get(i, i) - shift;
                shifted.set(i, i, v);
            }
        }
        z = psd_project(&shifted)?;

        // dual ascent
        u_mat.add_assign(&x.sub(&z));
        for i in 0..m {
            u_vec[i] += ax[i] - y[i] - r[i];
        }

        // residuals
        let gap_xz = frob_norm(&x.sub(&z));
        let gap_constraint = {
            let mut s = 0.0;
            for i in 0..m {
                let d = ax[i] - y[i] - r[i];
                s += d * d;
            }
            s.sqrt()
        };
        primal = (gap_xz * gap_xz + gap_constraint * gap_constraint).sqrt();
        let dz = frob_norm(&z.sub(&z_old));
        let dr = {
            let mut s = 0.0;
            for i in 0..m {
                let d = r[i] - r_old[i];
                s += d * d;
            }
            s.sqrt()
        };
        dual = rho * (dz * dz + dr * dr).sqrt();

        if cfg.verbose && (iter % 100 == 0 || iter == 1) {
            let objective = current_objective(program, a, &z, y)?;
            println!(
                "solver_iter iter={iter} objective={objective} primal={primal} dual={dual} rho={rho}"
            );
        }

        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            converged = true;
            break;
        }

        // residual balancing keeps the two residuals within a decade;
        // scaled duals rescale inversely with the penalty
        if iter % 25 == 0 {
            if primal > 10.0 * dual && rho < 1e6 {
                rho *= 2.0;
                u_mat.scale_in_place(0.5);
                for v in u_vec.iter_mut() {
                    *v *= 0.5;
                }
            } else if dual > 10.0 * primal && rho > 1e-6 {
                rho *= 0.5;
                u_mat.scale_in_place(2.0);
                for v in u_vec.iter_mut() {
                    *v *= 2.0;
                }
            }
        }
    }

    let objective = current_objective(program, a, &z, y)?;
    let x_hat = extract_signal(&z)?;
    Ok(LiftedSolution {
        x_hat_matrix: z,
        x_hat,
        objective,
        iters: iters_done,
        converged,
        primal_residual: primal,
        dual_residual: dual,
    })
}

fn current_objective(
    program: Program,
    a: &crate::linalg::Mat,
    z: &SymMatrix,
    y: &[f64],
) -> Result<f64> {
    Ok(match program {
        Program::Noiseless => z.trace(),
        Program::Noisy => {
            let az = apply_a(a, z)?;
            let misfit: Vec<f64> = az.iter().zip(y).map(|(u, v)| u - v).collect();
            l1_norm(&misfit)
        }
    })
}

#[inline]
fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Leading eigenpair read-out: `sqrt(max(lambda_1, 0)) * v_1` with the sign
/// of `v_1` fixed so its largest-magnitude entry is positive (lowest index
/// wins ties).
pub fn extract_signal(x_hat: &SymMatrix) -> Result<Vec<f64>> {
    let eig = eig_sym(x_hat)?;
    if eig.values.is_empty() {
        return Ok(vec![]);
    }
    let scale = eig.values[0].max(0.0).sqrt();
    let mut v = eig.vector(0);
    let mut arg = 0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > v[arg].abs() {
            arg = i;
        }
    }
    if v[arg] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    for x in v.iter_mut() {
        *x *= scale;
    }
    Ok(v)
}

/// Distance up to the global sign ambiguity:
/// `min(||a - b||_2, ||a + b||_2)`.
pub fn sign_invariant_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            context: "sign_invariant_error: vector lengths",
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut minus = 0.0;
    let mut plus = 0.0;
    for (x, y) in a.iter().zip(b) {
        minus += (x - y) * (x - y);
        plus += (x + y) * (x + y);
    }
    Ok(minus.min(plus).sqrt())
}

/// Relative Frobenius error of the lifted solution against the true lift
/// `x0 x0^T`.
pub fn relative_lift_error(x_hat: &SymMatrix, x0: &[f64]) -> f64 {
    let lift = SymMatrix::outer(x0, 1.0);
    let denom = frob_norm(&lift);
    if denom == 0.0 {
        return frob_norm(x_hat);
    }
    frob_norm(&x_hat.sub(&lift)) / denom
}

/// Smallest eigenvalue relative to the operator norm; used to assert PSD
/// feasibility of returned solutions.
pub fn psd_violation(x: &SymMatrix) -> f64 {
    match eig_sym(x) {
        Ok(eig) => {
            let min = eig.values.last().copied().unwrap_or(0.0);
            let top = eig
                .values
                .iter()
                .fold(0.0_f64, |acc, &l| acc.max(l.abs()));
            if min >= 0.0 {
                0.0
            } else {
                -min / top.max(1.0)
            }
        }
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{measure, sample_matrix, Ensemble};
    use crate::linalg::norm2;
    use crate::rng::unit_sphere_vector;
    use crate::signal::{generate, SignalSpec};

    fn noiseless_sample(e: &Ensemble, m: usize, n: usize, seed: u64, x0: &[f64]) -> SampleSet {
        SampleSet::generate(e, m, n, seed, x0, &vec![0.0; m]).unwrap()
    }

    #[test]
    fn zero_intensities_give_zero_matrix() {
        let a = sample_matrix(&Ensemble::Gaussian, 10, 4, 3).unwrap();
        let sample = SampleSet {
            a,
            y: vec![0.0; 10],
            w: vec![0.0; 10],
            seed: 3,
            ensemble: Ensemble::Gaussian,
        };
        let sol = solve_noiseless(&sample, &SolverConfig::default_for(10)).unwrap();
        assert!(sol.converged);
        assert!(frob_norm(&sol.x_hat_matrix) < 1e-9);
        assert!(norm2(&sol.x_hat) < 1e-6);
    }

    #[test]
    fn noiseless_gaussian_recovery() {
        let n = 16;
        let m = 12 * n;
        let x0 = unit_sphere_vector(n, 17);
        let sample = noiseless_sample(&Ensemble::Gaussian, m, n, 18, &x0);
        let sol = solve_noiseless(&sample, &SolverConfig::default_for(m)).unwrap();
        assert!(sol.converged, "residuals {} {}", sol.primal_residual, sol.dual_residual);
        let err = relative_lift_error(&sol.x_hat_matrix, &x0);
        assert!(err <= 1e-3, "relative error {err}");
        assert!(psd_violation(&sol.x_hat_matrix) <= 1e-8);
        // constraint satisfied relative to the intensity scale
        let az = apply_a(&sample.a, &sol.x_hat_matrix).unwrap();
        let gap: f64 = az
            .iter()
            .zip(&sample.y)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!(gap <= 2.0 * SolverConfig::default_for(m).primal_tol * norm2(&sample.y).max(1.0));
    }

    #[test]
    fn ambiguous_peaky_instance_stays_feasible() {
        // e1 and e2 produce the same rademacher intensities; recovery of a
        // specific spike is not required, only feasibility and trace <= 1
        let n = 8;
        let m = 10 * n;
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let sample = noiseless_sample(&Ensemble::Rademacher, m, n, 5, &e1);
        let sol = solve_noiseless(&sample, &SolverConfig::default_for(m)).unwrap();
        assert!(sol.converged);
        assert!(sol.objective <= 1.0 + 1e-4, "trace {}", sol.objective);
        let az = apply_a(&sample.a, &sol.x_hat_matrix).unwrap();
        let gap: f64 = az
            .iter()
            .zip(&sample.y)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!(gap <= 1e-4 * norm2(&sample.y));
        assert!(psd_violation(&sol.x_hat_matrix) <= 1e-8);
    }

    #[test]
    fn noisy_program_with_zero_noise_reaches_zero_objective() {
        let n = 12;
        let m = 10 * n;
        let x0 = generate(&SignalSpec::flat(0.4, n), 21).unwrap();
        let sample = noiseless_sample(&Ensemble::Gaussian, m, n, 22, &x0);
        let cfg = SolverConfig::default_for(m);
        let sol = solve_noisy(&sample, &cfg).unwrap();
        assert!(sol.converged);
        // the true lift achieves 0; the l1 misfit at the returned matrix is
        // bounded by the primal residual spread over m coordinates
        let tol = 10.0 * cfg.primal_tol * (m as f64).sqrt();
        assert!(sol.objective <= tol, "objective {}", sol.objective);
    }

    #[test]
    fn noisy_flat_rademacher_recovery() {
        let n = 32;
        let m = 10 * n;
        let x0 = generate(&SignalSpec::flat(0.3, n), 31).unwrap();
        let sample = noiseless_sample(&Ensemble::Rademacher, m, n, 32, &x0);
        let sol = solve_noisy(&sample, &SolverConfig::default_for(m)).unwrap();
        let err = relative_lift_error(&sol.x_hat_matrix, &x0);
        assert!(err <= 1e-3, "relative error {err}");
    }

    #[test]
    fn noisy_peaky_erasure_recovery() {
        let n = 32;
        let m = 10 * n;
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let sample = noiseless_sample(&Ensemble::erasure_theorem_preset(), m, n, 41, &e1);
        let sol = solve_noisy(&sample, &SolverConfig::default_for(m)).unwrap();
        let err = relative_lift_error(&sol.x_hat_matrix, &e1);
        assert!(err <= 1e-3, "relative error {err}");
    }

    #[test]
    fn noisy_objective_beats_true_lift() {
        let n = 10;
        let m = 8 * n;
        let x0 = unit_sphere_vector(n, 51);
        let a = sample_matrix(&Ensemble::Gaussian, m, n, 52).unwrap();
        let mut w = vec![0.0; m];
        let mut g = crate::rng::GaussSource::new(53);
        g.fill(&mut w);
        let budget = 1e-3 * m as f64;
        let scale = budget / l1_norm(&w);
        for v in w.iter_mut() {
            *v *= scale;
        }
        let y = measure(&a, &x0, &w).unwrap();
        let sample = SampleSet {
            a,
            y,
            w: w.clone(),
            seed: 52,
            ensemble: Ensemble::Gaussian,
        };
        let cfg = SolverConfig::default_for(m);
        let sol = solve_noisy(&sample, &cfg).unwrap();
        // the true lift achieves ||w||_1, so the minimizer must do at least
        // as well up to solver tolerance
        let slack = 10.0 * cfg.primal_tol * (m as f64).sqrt();
        assert!(
            sol.objective <= l1_norm(&w) + slack,
            "objective {} vs noise l1 {}",
            sol.objective,
            l1_norm(&w)
        );
    }

    #[test]
    fn sign_flipped_signal_gives_identical_solution() {
        let n = 8;
        let m = 6 * n;
        let x0 = unit_sphere_vector(n, 61);
        let neg: Vec<f64> = x0.iter().map(|v| -v).collect();
        let s1 = noiseless_sample(&Ensemble::Gaussian, m, n, 62, &x0);
        let s2 = noiseless_sample(&Ensemble::Gaussian, m, n, 62, &neg);
        assert_eq!(s1.y, s2.y);
        let cfg = SolverConfig::default_for(m);
        let a = solve_noisy(&s1, &cfg).unwrap();
        let b = solve_noisy(&s2, &cfg).unwrap();
        assert_eq!(a.x_hat_matrix.data(), b.x_hat_matrix.data());
    }

    #[test]
    fn non_convergence_is_reported_not_hidden() {
        let n = 12;
        let m = 6 * n;
        let x0 = unit_sphere_vector(n, 71);
        let sample = noiseless_sample(&Ensemble::Gaussian, m, n, 72, &x0);
        let mut cfg = SolverConfig::default_for(m);
        cfg.max_iters = 3;
        let sol = solve_noiseless(&sample, &cfg).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iters, 3);
    }

    #[test]
    fn extract_signal_examples() {
        let u = unit_sphere_vector(6, 81);
        let m = SymMatrix::outer(&u, 4.0);
        let x = extract_signal(&m).unwrap();
        let err = sign_invariant_error(&x, &u.iter().map(|v| 2.0 * v).collect::<Vec<_>>()).unwrap();
        assert!(err < 1e-10);
        // sign canonicalization: largest-magnitude entry is positive
        let arg = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap()
            .0;
        assert!(x[arg] > 0.0);

        assert_eq!(extract_signal(&SymMatrix::zeros(4)).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn extract_signal_perturbation_bound() {
        let x0 = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let v = vec![0.0, 1.0, 0.0, 0.0, 0.0];
        let m = SymMatrix::outer(&x0, 1.0).add(&SymMatrix::outer(&v, 0.01));
        let x = extract_signal(&m).unwrap();
        let err = sign_invariant_error(&x, &x0).unwrap();
        assert!(err <= 0.02, "perturbation error {err}");
    }

    #[test]
    fn sign_invariant_error_examples() {
        let x = vec![0.6, -0.8];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(sign_invariant_error(&x, &neg).unwrap(), 0.0);
        assert_eq!(sign_invariant_error(&x, &x).unwrap(), 0.0);
        assert!((sign_invariant_error(&[0.0, 0.0], &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(sign_invariant_error(&x, &[1.0]).is_err());
    }
}

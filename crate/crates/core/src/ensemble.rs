//! Measurement-vector distributions and the phaseless measurement model.
//!
//! An [`Ensemble`] describes the scalar distribution of the i.i.d. entries
//! `a_ij` (mean 0, variance 1). [`sample_matrix`] realizes an m x n
//! measurement matrix, [`measure`] applies the forward map
//! `y = phi(A x) + w` with `phi(s)_i = s_i^2`, and [`apply_a`] /
//! [`apply_a_adjoint`] implement the lifted sampling operator
//! `X -> (a_i^T X a_i)_i` and its adjoint `lambda -> sum_i lambda_i a_i a_i^T`.

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat, SymMatrix};
use crate::rng::{self, GaussSource};
use rand::RngCore;

/// Cap on `support_size^n` states for exact enumeration.
pub const ENUM_STATE_CAP: u128 = 1 << 20;

/// Scalar distribution of the measurement entries. All variants have mean 0
/// and variance exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    /// Standard normal entries.
    Gaussian,
    /// Uniform on {-1, +1}.
    Rademacher,
    /// Bernoulli with erasures: {-1/sqrt(1-p), 0, +1/sqrt(1-p)} with
    /// probabilities {(1-p)/2, p, (1-p)/2}. `p = 2/3` is the preset under
    /// which peaky signals become recoverable.
    Erasure { p: f64 },
    /// Custom finite-support distribution; must have mean 0 and variance 1.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

/// The erasure probability singled out by the recovery guarantee for
/// arbitrary (including peaky) signals.
pub const ERASURE_THEOREM_P: f64 = 2.0 / 3.0;

impl Ensemble {
    pub fn erasure(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidEnsemble(format!(
                "erasure probability must lie in (0, 1), got {p}; p = 0 is plain rademacher"
            )));
        }
        Ok(Ensemble::Erasure { p })
    }

    /// Named preset `erasure(2/3)`.
    pub fn erasure_theorem_preset() -> Self {
        Ensemble::Erasure { p: ERASURE_THEOREM_P }
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(Error::InvalidEnsemble(
                "discrete ensemble needs matching nonempty values/probs".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidEnsemble("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        if mean.abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!("mean is {mean}, expected 0")));
        }
        let var: f64 = values.iter().zip(&probs).map(|(v, p)| v * v * p).sum();
        if (var - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!(
                "variance is {var}, expected 1"
            )));
        }
        Ok(Ensemble::Discrete { values, probs })
    }

    /// Fourth moment `E a^4`.
    pub fn c4(&self) -> f64 {
        match self {
            Ensemble::Gaussian => 3.0,
            Ensemble::Rademacher => 1.0,
            Ensemble::Erasure { p } => 1.0 / (1.0 - p),
            Ensemble::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .map(|(v, p)| v.powi(4) * p)
                .sum(),
        }
    }

    /// Subgaussian scale. Convention recorded here: 1 for the gaussian, and
    /// `max |value|` for bounded ensembles (psi2-norm conventions differ
    /// across texts by constant factors; this one is used consistently for
    /// reporting only).
    pub fn psi2_scale(&self) -> f64 {
        match self {
            Ensemble::Gaussian => 1.0,
            Ensemble::Rademacher => 1.0,
            Ensemble::Erasure { p } => 1.0 / (1.0 - p).sqrt(),
            Ensemble::Discrete { values, .. } => {
                values.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
            }
        }
    }

    /// Finite support (values, probs) for discrete-type ensembles, `None`
    /// for the gaussian.
    pub fn support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Ensemble::Gaussian => None,
            Ensemble::Rademacher => Some((vec![-1.0, 1.0], vec![0.5, 0.5])),
            Ensemble::Erasure { p } => {
                let v = 1.0 / (1.0 - p).sqrt();
                Some((vec![-v, 0.0, v], vec![(1.0 - p) / 2.0, *p, (1.0 - p) / 2.0]))
            }
            Ensemble::Discrete { values, probs } => Some((values.clone(), probs.clone())),
        }
    }

    /// Stable text descriptor, embedded in files and reports.
    pub fn descriptor(&self) -> String {
        match self {
            Ensemble::Gaussian => "gaussian".into(),
            Ensemble::Rademacher => "rademacher".into(),
            Ensemble::Erasure { p } => format!("erasure:{p}"),
            Ensemble::Discrete { values, probs } => {
                let vs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                let ps: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                format!("discrete:{}@{}", vs.join(","), ps.join(","))
            }
        }
    }

    pub fn parse_descriptor(s: &str) -> Result<Self> {
        if s == "gaussian" {
            return Ok(Ensemble::Gaussian);
        }
        if s == "rademacher" {
            return Ok(Ensemble::Rademacher);
        }
        if let Some(p) = s.strip_prefix("erasure:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::InvalidEnsemble(format!("bad erasure probability in {s:?}")))?;
            return Ensemble::erasure(p);
        }
        if let Some(rest) = s.strip_prefix("discrete:") {
            let (vals, probs) = rest.split_once('@').ok_or_else(|| {
                Error::InvalidEnsemble(format!("discrete descriptor needs values@probs, got {s:?}"))
            })?;
            let parse_list = |part: &str| -> Result<Vec<f64>> {
                part.split(',')
                    .map(|x| {
                        x.parse::<f64>().map_err(|_| {
                            Error::InvalidEnsemble(format!("bad number {x:?} in {s:?}"))
                        })
                    })
                    .collect()
            };
            return Ensemble::discrete(parse_list(vals)?, parse_list(probs)?);
        }
        Err(Error::InvalidEnsemble(format!("unknown ensemble {s:?}")))
    }

    /// Draw one scalar. Discrete draws consume one u64; gaussian draws come
    /// from a shared polar source to keep the stream order pinned.
    fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng, gauss: &mut Option<GaussSource>) -> f64 {
        match self {
            Ensemble::Gaussian => gauss
                .as_mut()
                .expect("gaussian source prepared by sample_matrix")
                .sample(),
            Ensemble::Rademacher => {
                if rng.next_u64() >> 63 == 1 {
                    1.0
                } else {
                    -1.0
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

    /// Expectation of `f(a)` over `a` in support^n by exhaustive enumeration.
    /// Exact up to float summation; errors out above [`ENUM_STATE_CAP`].
    pub fn enumerate_expectation(
        &self,
        n: usize,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<f64> {
        let (values, probs) = self.support().ok_or_else(|| {
            Error::InvalidEnsemble("enumeration requires a finite-support ensemble".into())
        })?;
        let base = values.len();
        let states = (base as u128)
            .checked_pow(n as u32)
            .unwrap_or(u128::MAX);
        if states > ENUM_STATE_CAP {
            return Err(Error::EnumerationTooLarge {
                states,
                cap: ENUM_STATE_CAP,
            });
        }
        let mut digits = vec![0usize; n];
        let mut point = vec![values[0]; n];
        let mut total = 0.0;
        loop {
            let mut prob = 1.0;
            for &d in &digits {
                prob *= probs[d];
            }
            if prob > 0.0 {
                total += prob * f(&point);
            }
            // mixed-radix increment
            let mut pos = 0;
            loop {
                if pos == n {
                    return Ok(total);
                }
                digits[pos] += 1;
                if digits[pos] < base {
                    point[pos] = values[digits[pos]];
                    break;
                }
                digits[pos] = 0;
                point[pos] = values[0];
                pos += 1;
            }
        }
    }

    /// Number of states an enumeration over support^n would visit.
    pub fn enumeration_states(&self, n: usize) -> Option<u128> {
        self.support()
            .map(|(v, _)| (v.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX))
    }
}

/// A realized measurement instance: matrix rows `a_i^T`, intensities
/// `y = phi(A x) + w`, the noise that was added, and the sampling metadata.
/// The generating signal itself lives in experiment metadata, not here.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub a: Mat,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub seed: u64,
    pub ensemble: Ensemble,
}

impl SampleSet {
    pub fn m(&self) -> usize {
        self.a.rows
    }

    pub fn n(&self) -> usize {
        self.a.cols
    }

    /// Sample a matrix, measure a signal, and package the result.
    pub fn generate(
        ensemble: &Ensemble,
        m: usize,
        n: usize,
        seed: u64,
        x: &[f64],
        w: &[f64],
    ) -> Result<Self> {
        let a = sample_matrix(ensemble, m, n, seed)?;
        let y = measure(&a, x, w)?;
        Ok(SampleSet {
            a,
            y,
            w: w.to_vec(),
            seed,
            ensemble: ensemble.clone(),
        })
    }
}

/// Draw an m x n matrix with i.i.d. entries from the ensemble, filled in
/// row-major order from the pinned stream; identical `(ensemble, m, n, seed)`
/// give bit-identical output.
pub fn sample_matrix(ensemble: &Ensemble, m: usize, n: usize, seed: u64) -> Result<Mat> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidEnsemble(format!(
            "matrix dimensions must be positive, got {m} x {n}"
        )));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut gauss = match ensemble {
        Ensemble::Gaussian => Some(GaussSource::new(rng::derive_seed(seed, &[1]))),
        _ => None,
    };
    let mut out = Mat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            out.set(i, j, ensemble.draw(&mut rng, &mut gauss));
        }
    }
    Ok(out)
}

/// The phaseless map: squares each coordinate.
pub fn phi(s: &[f64]) -> Vec<f64> {
    s.iter().map(|&v| v * v).collect()
}

/// `y = phi(A x) + w`.
pub fn measure(a: &Mat, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.cols {
        return Err(Error::DimMismatch {
            context: "measure: signal length vs matrix columns",
            expected: a.cols,
            got: x.len(),
        });
    }
    if w.len() != a.rows {
        return Err(Error::DimMismatch {
            context: "measure: noise length vs matrix rows",
            expected: a.rows,
            got: w.len(),
        });
    }
    let mut y = phi(&a.mul_vec(x));
    for (yi, wi) in y.iter_mut().zip(w) {
        *yi += wi;
    }
    Ok(y)
}

/// Lifted sampling operator: `(a_i^T X a_i)_i`.
pub fn apply_a(a: &Mat, x: &SymMatrix) -> Result<Vec<f64>> {
    if x.dim() != a.cols {
        return Err(Error::DimMismatch {
            context: "apply_a: matrix dimension vs measurement columns",
            expected: a.cols,
            got: x.dim(),
        });
    }
    Ok((0..a.rows).map(|i| x.quad_form(a.row(i))).collect())
}

/// Adjoint of the sampling operator: `sum_i lambda_i a_i a_i^T`.
pub fn apply_a_adjoint(a: &Mat, lambda: &[f64]) -> Result<SymMatrix> {
    if lambda.len() != a.rows {
        return Err(Error::DimMismatch {
            context: "apply_a_adjoint: weight length vs measurement rows",
            expected: a.rows,
            got: lambda.len(),
        });
    }
    let n = a.cols;
    let mut out = SymMatrix::zeros(n);
    for (i, &li) in lambda.iter().enumerate() {
        if li == 0.0 {
            continue;
        }
        let row = a.row(i);
        for p in 0..n {
            let lp = li * row[p];
            for (q, &rq) in row.iter().enumerate().skip(p) {
                let v = out.get(p, q) + lp * rq;
                out.set(p, q, v);
            }
        }
    }
    Ok(out)
}

/// Gram matrix of the lifted operator: `G[i][j] = (a_i^T a_j)^2`, so that
/// `A(A*(lambda)) = G lambda`. Used by the solver's normal equations.
pub fn lifted_gram(a: &Mat) -> SymMatrix {
    SymMatrix::from_fn(a.rows, |i, j| {
        let d = dot(a.row(i), a.row(j));
        d * d
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob_norm, l1_norm, norm2};
    use crate::rng::unit_sphere_vector;

    #[test]
    fn rademacher_entries_are_signs() {
        let a = sample_matrix(&Ensemble::Rademacher, 20, 13, 7).unwrap();
        assert!(a.data().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn erasure_zero_fraction_in_binomial_band() {
        let p = ERASURE_THEOREM_P;
        let e = Ensemble::erasure(p).unwrap();
        let (m, n) = (300, 100);
        let a = sample_matrix(&e, m, n, 5).unwrap();
        let root3 = 3.0_f64.sqrt();
        for &v in a.data() {
            assert!(
                v == 0.0 || (v - root3).abs() < 1e-15 || (v + root3).abs() < 1e-15,
                "unexpected value {v}"
            );
        }
        let zero_fraction =
            a.data().iter().filter(|&&v| v == 0.0).count() as f64 / (m * n) as f64;
        let sigma = (p * (1.0 - p) / (m * n) as f64).sqrt();
        assert!(
            (zero_fraction - p).abs() <= 3.0 * sigma,
            "zero fraction {zero_fraction} outside 3-sigma band around {p}"
        );
    }

    #[test]
    fn gaussian_sample_variance_concentrates() {
        // chi-square concentration: sd of the sample variance of 1e5 draws
        // is about sqrt(2/1e5) ~ 0.0045, so [0.97, 1.03] is a > 6-sigma band
        let a = sample_matrix(&Ensemble::Gaussian, 500, 200, 11).unwrap();
        let mean: f64 = a.data().iter().sum::<f64>() / a.data().len() as f64;
        let var: f64 =
            a.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / a.data().len() as f64;
        assert!((0.97..=1.03).contains(&var), "sample variance {var}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let e = Ensemble::erasure_theorem_preset();
        let a = sample_matrix(&e, 17, 9, 123).unwrap();
        let b = sample_matrix(&e, 17, 9, 123).unwrap();
        assert_eq!(a, b);
        let c = sample_matrix(&e, 17, 9, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn erasure_requires_open_interval() {
        assert!(Ensemble::erasure(0.0).is_err());
        assert!(Ensemble::erasure(1.0).is_err());
        assert!(Ensemble::erasure(-0.2).is_err());
    }

    #[test]
    fn discrete_moments_validated() {
        assert!(Ensemble::discrete(vec![-1.0, 1.0], vec![0.4, 0.6]).is_err());
        assert!(Ensemble::discrete(vec![-2.0, 2.0], vec![0.5, 0.5]).is_err());
        let ok = Ensemble::discrete(
            vec![-(2.0_f64).sqrt(), 0.0, (2.0_f64).sqrt()],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        assert!((ok.c4() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn phi_squares_and_is_sign_blind() {
        assert_eq!(phi(&[1.0, -2.0, 3.0]), vec![1.0, 4.0, 9.0]);
        assert_eq!(phi(&[0.0]), vec![0.0]);
        let a = sample_matrix(&Ensemble::Gaussian, 6, 4, 3).unwrap();
        let x = unit_sphere_vector(4, 8);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(phi(&a.mul_vec(&x)), phi(&a.mul_vec(&neg)));
    }

    #[test]
    fn peaky_signals_are_indistinguishable_under_rademacher() {
        let a = sample_matrix(&Ensemble::Rademacher, 25, 6, 9).unwrap();
        let mut e1 = vec![0.0; 6];
        e1[0] = 1.0;
        let mut e2 = vec![0.0; 6];
        e2[1] = 1.0;
        let w = vec![0.0; 25];
        let y1 = measure(&a, &e1, &w).unwrap();
        let y2 = measure(&a, &e2, &w).unwrap();
        assert_eq!(y1, y2);
        assert!(y1.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn measure_zero_signal_returns_noise() {
        let a = sample_matrix(&Ensemble::Rademacher, 4, 3, 1).unwrap();
        let w = vec![0.5, -0.25, 0.0, 2.0];
        assert_eq!(measure(&a, &[0.0; 3], &w).unwrap(), w);
    }

    #[test]
    fn measure_checks_dimensions() {
        let a = sample_matrix(&Ensemble::Rademacher, 4, 3, 1).unwrap();
        assert!(measure(&a, &[0.0; 2], &[0.0; 4]).is_err());
        assert!(measure(&a, &[0.0; 3], &[0.0; 5]).is_err());
    }

    #[test]
    fn apply_a_on_lift_matches_phi() {
        let a = sample_matrix(&Ensemble::Gaussian, 7, 5, 21).unwrap();
        let x = unit_sphere_vector(5, 22);
        let lift = SymMatrix::outer(&x, 1.0);
        let via_lift = apply_a(&a, &lift).unwrap();
        let via_phi = phi(&a.mul_vec(&x));
        for (u, v) in via_lift.iter().zip(&via_phi) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_a_identity_gives_row_norms() {
        let a = sample_matrix(&Ensemble::Gaussian, 5, 4, 2).unwrap();
        let out = apply_a(&a, &SymMatrix::identity(4)).unwrap();
        for (i, &v) in out.iter().enumerate() {
            assert!((v - norm2(a.row(i)).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_counterexample_is_annihilated() {
        // x0 along (1,1,0,...), x along (1,-1,0,...): every rademacher row
        // kills one of the two factors, so the sampling operator returns 0.
        let n = 6;
        let a = sample_matrix(&Ensemble::Rademacher, 40, n, 77).unwrap();
        let s = 0.5_f64.sqrt();
        let mut x0 = vec![0.0; n];
        x0[0] = s;
        x0[1] = s;
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        x[1] = -1.0;
        let lift = SymMatrix::sym_outer_pair(&x, &x0);
        let out = apply_a(&a, &lift).unwrap();
        assert_eq!(l1_norm(&out), 0.0);
    }

    #[test]
    fn adjoint_basis_and_zero() {
        let a = sample_matrix(&Ensemble::Gaussian, 5, 4, 31).unwrap();
        let mut e1 = vec![0.0; 5];
        e1[0] = 1.0;
        let m = apply_a_adjoint(&a, &e1).unwrap();
        let expect = SymMatrix::outer(a.row(0), 1.0);
        assert!(frob_norm(&m.sub(&expect)) < 1e-14);
        let z = apply_a_adjoint(&a, &[0.0; 5]).unwrap();
        assert_eq!(z.data(), vec![0.0; 16].as_slice());
    }

    #[test]
    fn adjoint_identity_holds() {
        let a = sample_matrix(&Ensemble::Gaussian, 5, 4, 41).unwrap();
        let mut g = GaussSource::new(42);
        let lambda: Vec<f64> = (0..5).map(|_| g.sample()).collect();
        let x = SymMatrix::from_fn(4, |_, _| g.sample());
        let lhs = dot(&apply_a(&a, &x).unwrap(), &lambda);
        let rhs = x.frob_dot(&apply_a_adjoint(&a, &lambda).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn lifted_gram_matches_operator_composition() {
        let a = sample_matrix(&Ensemble::Rademacher, 6, 4, 3).unwrap();
        let g = lifted_gram(&a);
        let mut lam = vec![0.0; 6];
        lam[2] = 1.5;
        lam[4] = -0.5;
        let direct = apply_a(&a, &apply_a_adjoint(&a, &lam).unwrap()).unwrap();
        let via_gram = g.mul_vec(&lam);
        for (u, v) in direct.iter().zip(&via_gram) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_operator_l1_upper_bound() {
        // (1/m) ||A(X)||_1 <= 1.5 Tr(X) for random PSD X, rademacher rows
        let n = 16;
        let m = 40 * n;
        let a = sample_matrix(&Ensemble::Rademacher, m, n, 99).unwrap();
        for seed in 0..10 {
            let mut g = GaussSource::new(1000 + seed);
            let b = SymMatrix::from_fn(n, |_, _| g.sample());
            let eig = crate::linalg::eig_sym(&b).unwrap();
            let psd = eig.reconstruct_with(|l| l.abs());
            let lhs = l1_norm(&apply_a(&a, &psd).unwrap()) / m as f64;
            assert!(lhs <= 1.5 * psd.trace(), "lhs {lhs} trace {}", psd.trace());
        }
    }

    #[test]
    fn enumeration_matches_analytic_second_moment() {
        for e in [
            Ensemble::Rademacher,
            Ensemble::erasure_theorem_preset(),
        ] {
            let second = e.enumerate_expectation(3, |a| a[0] * a[0]).unwrap();
            assert!((second - 1.0).abs() < 1e-12);
            let fourth = e.enumerate_expectation(2, |a| a[1].powi(4)).unwrap();
            assert!((fourth - e.c4()).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        let e = Ensemble::erasure_theorem_preset();
        assert!(matches!(
            e.enumerate_expectation(40, |_| 0.0),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(Ensemble::Gaussian.enumerate_expectation(2, |_| 0.0).is_err());
    }

    #[test]
    fn descriptor_round_trips() {
        for e in [
            Ensemble::Gaussian,
            Ensemble::Rademacher,
            Ensemble::erasure(0.25).unwrap(),
            Ensemble::discrete(
                vec![-(2.0_f64).sqrt(), 0.0, (2.0_f64).sqrt()],
                vec![0.25, 0.5, 0.25],
            )
            .unwrap(),
        ] {
            let d = e.descriptor();
            let back = Ensemble::parse_descriptor(&d).unwrap();
            assert_eq!(e, back, "descriptor {d}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn any_ensemble() -> impl Strategy<Value = Ensemble> {
            prop_oneof![
                Just(Ensemble::Gaussian),
                Just(Ensemble::Rademacher),
                (0.05..0.95f64).prop_map(|p| Ensemble::erasure(p).unwrap()),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn adjoint_identity_for_random_triples(
                e in any_ensemble(),
                m in 1usize..8,
                n in 1usize..6,
                seed in 0u64..10_000,
                lambda_raw in proptest::collection::vec(-5.0..5.0f64, 8),
                x_raw in proptest::collection::vec(-5.0..5.0f64, 36),
            ) {
                let a = sample_matrix(&e, m, n, seed).unwrap();
                let lambda = &lambda_raw[..m];
                let mut it = x_raw.iter();
                let x = SymMatrix::from_fn(n, |_, _| *it.next().unwrap());
                let lhs = dot(&apply_a(&a, &x).unwrap(), lambda);
                let rhs = x.frob_dot(&apply_a_adjoint(&a, lambda).unwrap());
                let scale = lhs.abs().max(1.0);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * scale);
            }

            #[test]
            fn measurements_are_sign_blind(
                e in any_ensemble(),
                seed in 0u64..10_000,
                x in proptest::collection::vec(-5.0..5.0f64, 6),
            ) {
                let a = sample_matrix(&e, 9, 6, seed).unwrap();
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                prop_assert_eq!(phi(&a.mul_vec(&x)), phi(&a.mul_vec(&neg)));
            }

            #[test]
            fn sampleset_file_round_trip_is_bit_exact(
                e in any_ensemble(),
                m in 1usize..10,
                n in 1usize..8,
                seed in 0u64..10_000,
            ) {
                let x = crate::rng::unit_sphere_vector(n, seed ^ 0x5eed);
                let w = vec![0.25; m];
                let s = SampleSet::generate(&e, m, n, seed, &x, &w).unwrap();
                let mut buf = Vec::new();
                crate::records::write_sampleset(&mut buf, &s).unwrap();
                let back = crate::records::read_sampleset(buf.as_slice()).unwrap();
                prop_assert_eq!(&s, &back);
                let mut buf2 = Vec::new();
                crate::records::write_sampleset(&mut buf2, &back).unwrap();
                prop_assert_eq!(buf, buf2);
            }
        }
    }
}

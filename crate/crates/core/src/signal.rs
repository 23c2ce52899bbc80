//! Signal classes: flat (non-peaky) vectors, sparse-and-flat vectors, and
//! peaky adversarial examples, plus the flatness diagnostic.
//!
//! A vector is mu-flat when `||x||_inf <= mu ||x||_2`; [`flatness`] returns
//! the smallest such mu. Flat generation rejection-samples gaussian
//! directions and falls back to a sign-pattern construction when mu sits at
//! the feasibility floor `1/sqrt(n)`.

use crate::error::{Error, Result};
use crate::linalg::{linf_norm, norm2};
use crate::rng::{self, GaussSource};

/// How many rejection draws to attempt before switching to the
/// deterministic construction.
const MAX_REJECTIONS: usize = 10_000;

/// What to generate. `norm` is the target l2 norm of the output.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub n: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    /// Flatness at most `mu`.
    Flat { mu: f64 },
    /// Exactly `k` nonzeros and flatness at most `mu`.
    SparseFlat { mu: f64, k: usize },
    /// A single spike `e_index`.
    Peaky { index: usize },
    /// A caller-provided vector, rescaled to the target norm.
    Explicit { vector: Vec<f64> },
}

impl SignalSpec {
    pub fn flat(mu: f64, n: usize) -> Self {
        SignalSpec {
            kind: SignalKind::Flat { mu },
            n,
            norm: 1.0,
        }
    }

    pub fn sparse_flat(mu: f64, k: usize, n: usize) -> Self {
        SignalSpec {
            kind: SignalKind::SparseFlat { mu, k },
            n,
            norm: 1.0,
        }
    }

    pub fn peaky(index: usize, n: usize) -> Self {
        SignalSpec {
            kind: SignalKind::Peaky { index },
            n,
            norm: 1.0,
        }
    }

    pub fn explicit(vector: Vec<f64>) -> Self {
        let n = vector.len();
        SignalSpec {
            kind: SignalKind::Explicit { vector },
            n,
            norm: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSignal("dimension must be positive".into()));
        }
        if !(self.norm > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "target norm must be positive, got {}",
                self.norm
            )));
        }
        match &self.kind {
            SignalKind::Flat { mu } => {
                if !(*mu > 0.0 && *mu < 1.0) {
                    return Err(Error::InvalidSignal(format!(
                        "flat requires 0 < mu < 1, got {mu}"
                    )));
                }
                if mu * mu * (self.n as f64) < 1.0 {
                    return Err(Error::InvalidSignal(format!(
                        "flat(mu = {mu}) is infeasible at n = {}: a mu-flat unit vector needs \
                         n >= 1/mu^2 = {:.2}",
                        self.n,
                        1.0 / (mu * mu)
                    )));
                }
            }
            SignalKind::SparseFlat { mu, k } => {
                if !(*mu > 0.0 && *mu < 1.0) {
                    return Err(Error::InvalidSignal(format!(
                        "sparse_flat requires 0 < mu < 1, got {mu}"
                    )));
                }
                if *k == 0 || *k > self.n {
                    return Err(Error::InvalidSignal(format!(
                        "sparse_flat needs 1 <= k <= n, got k = {k}, n = {}",
                        self.n
                    )));
                }
                if mu * mu * (*k as f64) < 1.0 {
                    return Err(Error::InvalidSignal(format!(
                        "sparse_flat(mu = {mu}, k = {k}) is infeasible: a mu-flat k-sparse \
                         vector needs k >= 1/mu^2 = {:.2}",
                        1.0 / (mu * mu)
                    )));
                }
            }
            SignalKind::Peaky { index } => {
                if *index >= self.n {
                    return Err(Error::InvalidSignal(format!(
                        "peaky index {index} out of range for n = {}",
                        self.n
                    )));
                }
            }
            SignalKind::Explicit { vector } => {
                if vector.len() != self.n {
                    return Err(Error::InvalidSignal(format!(
                        "explicit vector has length {}, spec says n = {}",
                        vector.len(),
                        self.n
                    )));
                }
                if norm2(vector) < 1e-12 {
                    return Err(Error::InvalidSignal("explicit vector is zero".into()));
                }
            }
        }
        Ok(())
    }

    /// Stable text descriptor, e.g. `flat:0.3`, `sparse_flat:0.5:4`,
    /// `peaky:0`, `explicit:0.6,0.8`.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            SignalKind::Flat { mu } => format!("flat:{mu}"),
            SignalKind::SparseFlat { mu, k } => format!("sparse_flat:{mu}:{k}"),
            SignalKind::Peaky { index } => format!("peaky:{index}"),
            SignalKind::Explicit { vector } => {
                let vs: Vec<String> = vector.iter().map(|v| v.to_string()).collect();
                format!("explicit:{}", vs.join(","))
            }
        }
    }

    pub fn parse_descriptor(s: &str, n: usize) -> Result<Self> {
        let bad = |why: String| Error::InvalidSignal(why);
        if let Some(mu) = s.strip_prefix("flat:") {
            let mu: f64 = mu.parse().map_err(|_| bad(format!("bad mu in {s:?}")))?;
            return Ok(SignalSpec::flat(mu, n));
        }
        if let Some(rest) = s.strip_prefix("sparse_flat:") {
            let (mu, k) = rest
                .split_once(':')
                .ok_or_else(|| bad(format!("sparse_flat needs mu:k, got {s:?}")))?;
            let mu: f64 = mu.parse().map_err(|_| bad(format!("bad mu in {s:?}")))?;
            let k: usize = k.parse().map_err(|_| bad(format!("bad k in {s:?}")))?;
            return Ok(SignalSpec::sparse_flat(mu, k, n));
        }
        if let Some(index) = s.strip_prefix("peaky:") {
            let index: usize = index
                .parse()
                .map_err(|_| bad(format!("bad index in {s:?}")))?;
            return Ok(SignalSpec::peaky(index, n));
        }
        if let Some(list) = s.strip_prefix("explicit:") {
            let vector: Result<Vec<f64>> = list
                .split(',')
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| bad(format!("bad number {x:?} in {s:?}")))
                })
                .collect();
            let vector = vector?;
            if vector.len() != n {
                return Err(bad(format!(
                    "explicit vector has {} entries, expected n = {n}",
                    vector.len()
                )));
            }
            return Ok(SignalSpec::explicit(vector));
        }
        Err(bad(format!("unknown signal spec {s:?}")))
    }
}

/// Smallest mu for which `x` is mu-flat: `||x||_inf / ||x||_2`, always in
/// `[1/sqrt(n), 1]`.
pub fn flatness(x: &[f64]) -> Result<f64> {
    let norm = norm2(x);
    if norm == 0.0 || x.is_empty() {
        return Err(Error::ZeroVector);
    }
    Ok(linf_norm(x) / norm)
}

/// Generate a signal. Seed-deterministic; flat outputs always satisfy the
/// flatness bound as a hard postcondition.
pub fn generate(spec: &SignalSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let out = match &spec.kind {
        SignalKind::Flat { mu } => flat_direction(*mu, spec.n, seed)?,
        SignalKind::SparseFlat { mu, k } => {
            // flatness restricted to the support equals flatness of the
            // embedded vector, so generate a flat k-vector and scatter it
            let support = choose_support(spec.n, *k, rng::derive_seed(seed, &[0]));
            let dense = flat_direction(*mu, *k, rng::derive_seed(seed, &[1]))?;
            let mut v = vec![0.0; spec.n];
            for (slot, &val) in support.iter().zip(&dense) {
                v[*slot] = val;
            }
            v
        }
        SignalKind::Peaky { index } => {
            let mut v = vec![0.0; spec.n];
            v[*index] = 1.0;
            v
        }
        SignalKind::Explicit { vector } => vector.clone(),
    };
    let mut out = out;
    let norm = norm2(&out);
    for v in out.iter_mut() {
        *v *= spec.norm / norm;
    }
    // hard postcondition re-check for the flat kinds
    if let SignalKind::Flat { mu } | SignalKind::SparseFlat { mu, .. } = &spec.kind {
        let f = flatness(&out)?;
        debug_assert!(f <= mu + 1e-12, "flatness {f} exceeds {mu}");
    }
    Ok(out)
}

/// Unit vector with flatness <= mu: rejection-sample gaussian directions,
/// then fall back to equal magnitudes with random signs plus a shrinking
/// perturbation, re-verified before acceptance.
fn flat_direction(mu: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut src = GaussSource::new(rng::derive_seed(seed, &[2]));
    for _ in 0..MAX_REJECTIONS {
        let mut v = vec![0.0; n];
        src.fill(&mut v);
        let norm = norm2(&v);
        if norm < 1e-12 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
        if flatness(&v)? <= mu {
            return Ok(v);
        }
    }
    // deterministic fallback: signs/sqrt(n) has flatness exactly 1/sqrt(n)
    let mut rng = rng::rng_from_seed(rng::derive_seed(seed, &[3]));
    let scale = 1.0 / (n as f64).sqrt();
    let base: Vec<f64> = (0..n)
        .map(|_| {
            if rng::uniform01(&mut rng) < 0.5 {
                scale
            } else {
                -scale
            }
        })
        .collect();
    let mut perturb = vec![0.0; n];
    GaussSource::new(rng::derive_seed(seed, &[4])).fill(&mut perturb);
    let mut eps = 0.25 * scale;
    for _ in 0..80 {
        let mut candidate: Vec<f64> = base
            .iter()
            .zip(&perturb)
            .map(|(b, p)| b + eps * p)
            .collect();
        let norm = norm2(&candidate);
        for x in candidate.iter_mut() {
            *x /= norm;
        }
        if flatness(&candidate)? <= mu {
            return Ok(candidate);
        }
        eps *= 0.5;
    }
    if flatness(&base)? <= mu {
        return Ok(base);
    }
    Err(Error::InvalidSignal(format!(
        "could not construct a {mu}-flat vector at n = {n}"
    )))
}

fn choose_support(n: usize, k: usize, seed: u64) -> Vec<usize> {
    // Fisher-Yates prefix
    let mut rng = rng::rng_from_seed(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng::uniform01(&mut rng) * (n - i) as f64) as usize;
        let j = j.min(n - 1);
        idx.swap(i, j);
    }
    let mut support = idx[..k].to_vec();
    support.sort_unstable();
    support
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatness_examples() {
        let mut e1 = vec![0.0; 8];
        e1[0] = 1.0;
        assert!((flatness(&e1).unwrap() - 1.0).abs() < 1e-15);
        let n = 16;
        let ones = vec![1.0 / (n as f64).sqrt(); n];
        assert!((flatness(&ones).unwrap() - 0.25).abs() < 1e-15);
        assert!((flatness(&[0.6, 0.8]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(flatness(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn flatness_is_scale_invariant() {
        let v = vec![0.3, -1.2, 0.7, 2.0];
        let f = flatness(&v).unwrap();
        for c in [0.01, -5.0, 1e6] {
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            assert!((flatness(&scaled).unwrap() - f).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_generation_respects_mu() {
        for seed in 0..50 {
            let v = generate(&SignalSpec::flat(0.3, 16), seed).unwrap();
            assert!(flatness(&v).unwrap() <= 0.3 + 1e-12);
            assert!((norm2(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_generation_at_feasibility_floor() {
        // mu barely above 1/sqrt(n): rejection will not hit, fallback must
        let n = 16;
        let mu = (1.0 + 1e-9) / (n as f64).sqrt();
        let v = generate(&SignalSpec::flat(mu, n), 3).unwrap();
        assert!(flatness(&v).unwrap() <= mu);
    }

    #[test]
    fn peaky_is_a_spike() {
        let v = generate(&SignalSpec::peaky(0, 8), 1).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sparse_flat_has_support_and_flatness() {
        let v = generate(&SignalSpec::sparse_flat(0.5, 4, 32), 7).unwrap();
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 4);
        assert!(flatness(&v).unwrap() <= 0.5 + 1e-12);
        assert!((norm2(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_specs_rejected() {
        assert!(generate(&SignalSpec::flat(0.1, 16), 1).is_err());
        assert!(generate(&SignalSpec::sparse_flat(0.4, 4, 32), 1).is_err());
        assert!(generate(&SignalSpec::peaky(9, 8), 1).is_err());
    }

    #[test]
    fn explicit_is_rescaled() {
        let mut spec = SignalSpec::explicit(vec![3.0, 4.0]);
        spec.norm = 2.0;
        let v = generate(&spec, 0).unwrap();
        assert!((v[0] - 1.2).abs() < 1e-12 && (v[1] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&SignalSpec::flat(0.35, 24), 11).unwrap();
        let b = generate(&SignalSpec::flat(0.35, 24), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sum_or_difference_stays_twice_as_flat() {
        // for mu-flat s, t at least one of s+t, s-t is 2mu-flat
        let mu = 0.3;
        for seed in 0..60 {
            let s = generate(&SignalSpec::flat(mu, 16), 1000 + seed).unwrap();
            let t = generate(&SignalSpec::flat(mu, 16), 2000 + seed).unwrap();
            let sum: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a + b).collect();
            let diff: Vec<f64> = s.iter().zip(&t).map(|(a, b)| a - b).collect();
            let mut ok = false;
            if norm2(&sum) > 1e-9 {
                ok |= flatness(&sum).unwrap() <= 2.0 * mu + 1e-12;
            }
            if norm2(&diff) > 1e-9 {
                ok |= flatness(&diff).unwrap() <= 2.0 * mu + 1e-12;
            }
            assert!(ok, "seed {seed}: neither combination is 2mu-flat");
        }
    }

    #[test]
    fn descriptor_round_trips() {
        for spec in [
            SignalSpec::flat(0.3, 16),
            SignalSpec::sparse_flat(0.5, 4, 16),
            SignalSpec::peaky(2, 16),
            SignalSpec::explicit(vec![1.0; 16]),
        ] {
            let d = spec.descriptor();
            let back = SignalSpec::parse_descriptor(&d, 16).unwrap();
            assert_eq!(spec, back, "descriptor {d}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn flat_outputs_always_respect_mu(
                mu in 0.27..0.9f64,
                n in 16usize..40,
                seed in proptest::num::u64::ANY,
            ) {
                let v = generate(&SignalSpec::flat(mu, n), seed).unwrap();
                prop_assert!(flatness(&v).unwrap() <= mu + 1e-12);
                prop_assert!((norm2(&v) - 1.0).abs() < 1e-12);
            }

            #[test]
            fn flatness_ignores_scale(
                v in proptest::collection::vec(-100.0..100.0f64, 2..20),
                c in prop_oneof![(-1e3..-1e-3f64), (1e-3..1e3f64)],
            ) {
                prop_assume!(norm2(&v) > 1e-6);
                let f = flatness(&v).unwrap();
                let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
                prop_assert!((flatness(&scaled).unwrap() - f).abs() <= 1e-10);
            }
        }
    }
}

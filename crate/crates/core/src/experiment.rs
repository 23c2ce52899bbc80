//! Deterministic Monte-Carlo experiment harness.
//!
//! An [`ExperimentSpec`] names an ensemble, a signal class, a grid of
//! oversampling ratios and noise budgets, and a master seed. Running it
//! streams line records (see [`crate::records`]): one `trial` record per
//! solve and one `cell` aggregate per grid point, after a deterministic
//! header. Trial seeds derive from `(master_seed, cell, trial)`, so the
//! records are bitwise reproducible no matter how the work is scheduled;
//! the only non-deterministic line is the `meta` timestamp, which report
//! tooling ignores.

use crate::ensemble::{phi, Ensemble, SampleSet};
use crate::error::{Error, Result};
use crate::linalg::l1_norm;
use crate::par;
use crate::phaselift::{
    relative_lift_error, sign_invariant_error, solve_noiseless, solve_noisy, LiftedSolution,
    SolverConfig,
};
use crate::records::{fingerprint, Record};
use crate::rng::{self, GaussSource, PRNG_NAME};
use crate::signal::{generate, SignalKind, SignalSpec};
use std::io::Write;

/// Relative-error threshold below which a trial counts as a successful
/// recovery; recorded in every result header.
pub const SUCCESS_THRESHOLD: f64 = 1e-3;

pub const RESULT_SCHEMA: &str = "phaseret-result-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramKind {
    Noiseless,
    Noisy,
}

impl ProgramKind {
    pub fn name(self) -> &'static str {
        match self {
            ProgramKind::Noiseless => "noiseless",
            ProgramKind::Noisy => "noisy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "noiseless" => Ok(ProgramKind::Noiseless),
            "noisy" => Ok(ProgramKind::Noisy),
            other => Err(Error::InvalidConfig(format!("unknown program {other:?}"))),
        }
    }
}

/// Everything needed to reproduce a sweep.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub ensemble: Ensemble,
    pub signal: SignalSpec,
    pub n: usize,
    pub m_over_n: Vec<f64>,
    /// l1 noise budgets, as `||w||_1 / m`.
    pub noise_l1_over_m: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub program: ProgramKind,
    pub solver_max_iters: usize,
    pub solver_penalty: f64,
    /// Tolerances scale as `tol_per_m * m`.
    pub solver_tol_per_m: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(
                "experiment name must be nonempty without whitespace".into(),
            ));
        }
        if self.m_over_n.is_empty() || self.noise_l1_over_m.is_empty() {
            return Err(Error::InvalidConfig("grids must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.m_over_n.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidConfig("m_over_n entries must be positive".into()));
        }
        if self.noise_l1_over_m.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::InvalidConfig("noise budgets must be >= 0".into()));
        }
        self.signal.validate()?;
        if self.signal.n != self.n {
            return Err(Error::InvalidConfig(format!(
                "signal dimension {} disagrees with n = {}",
                self.signal.n, self.n
            )));
        }
        Ok(())
    }

    /// Canonical text form: the config-file encoding with sorted-by-schema
    /// keys; its hash is the spec fingerprint embedded in results.
    pub fn canonical_string(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "name={}\nensemble={}\nsignal={}\nn={}\nm_over_n={}\nnoise_l1_over_m={}\n\
             trials={}\nmaster_seed={}\nprogram={}\nsolver_max_iters={}\nsolver_penalty={}\n\
             solver_tol_per_m={}\n",
            self.name,
            self.ensemble.descriptor(),
            self.signal.descriptor(),
            self.n,
            join(&self.m_over_n),
            join(&self.noise_l1_over_m),
            self.trials,
            self.master_seed,
            self.program.name(),
            self.solver_max_iters,
            self.solver_penalty,
            self.solver_tol_per_m,
        )
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.canonical_string())
    }

    /// Parse the flat `key=value` config format (one pair per line, `#`
    /// comments). Unknown keys are rejected.
    pub fn parse_config(text: &str) -> Result<Self> {
        let mut fields = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "line {}: duplicate key {k:?}",
                    lineno + 1
                )));
            }
        }
        let mut take = |key: &str| fields.remove(key);
        let require = |v: Option<String>, key: &str| {
            v.ok_or_else(|| Error::InvalidConfig(format!("missing required key {key:?}")))
        };
        let parse_f64 = |s: &str, key: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("key {key:?}: bad float {s:?}")))
        };
        let parse_usize = |s: &str, key: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("key {key:?}: bad integer {s:?}")))
        };
        let parse_list = |s: &str, key: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|x| parse_f64(x.trim(), key))
                .collect::<Result<Vec<f64>>>()
        };

        let name = require(take("name"), "name")?;
        let ensemble = Ensemble::parse_descriptor(&require(take("ensemble"), "ensemble")?)?;
        let n = parse_usize(&require(take("n"), "n")?, "n")?;
        let signal = SignalSpec::parse_descriptor(&require(take("signal"), "signal")?, n)?;
        let m_over_n = parse_list(&require(take("m_over_n"), "m_over_n")?, "m_over_n")?;
        let noise = match take("noise_l1_over_m") {
            Some(s) => parse_list(&s, "noise_l1_over_m")?,
            None => vec![0.0],
        };
        let trials = parse_usize(&require(take("trials"), "trials")?, "trials")?;
        let master_seed = require(take("master_seed"), "master_seed")?
            .parse::<u64>()
            .map_err(|_| Error::InvalidConfig("master_seed: bad integer".into()))?;
        let program = match take("program") {
            Some(s) => ProgramKind::parse(&s)?,
            None => ProgramKind::Noisy,
        };
        let solver_max_iters = match take("solver_max_iters") {
            Some(s) => parse_usize(&s, "solver_max_iters")?,
            None => 5000,
        };
        let solver_penalty = match take("solver_penalty") {
            Some(s) => parse_f64(&s, "solver_penalty")?,
            None => 1.0,
        };
        let solver_tol_per_m = match take("solver_tol_per_m") {
            Some(s) => parse_f64(&s, "solver_tol_per_m")?,
            None => 1e-7,
        };
        if let Some(unknown) = fields.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown key {unknown:?}")));
        }
        let spec = ExperimentSpec {
            name,
            ensemble,
            signal,
            n,
            m_over_n,
            noise_l1_over_m: noise,
            trials,
            master_seed,
            program,
            solver_max_iters,
            solver_penalty,
            solver_tol_per_m,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn solver_config(&self, m: usize) -> SolverConfig {
        SolverConfig {
            max_iters: self.solver_max_iters,
            primal_tol: self.solver_tol_per_m * m as f64,
            dual_tol: self.solver_tol_per_m * m as f64,
            penalty: self.solver_penalty,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub index: usize,
    pub rel_fro_err: f64,
    pub sign_err: f64,
    pub iters: usize,
    pub converged: bool,
    /// Set when a second spike produces bitwise-identical intensities, i.e.
    /// recovery of this particular signal is ill-posed.
    pub ill_posed: bool,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub m_over_n: f64,
    pub m: usize,
    pub noise_l1_over_m: f64,
    pub outcomes: Vec<TrialOutcome>,
    pub success_rate: f64,
    pub median_rel_err: f64,
    pub ill_posed_fraction: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

pub fn aggregate(m_over_n: f64, m: usize, noise: f64, outcomes: Vec<TrialOutcome>) -> CellResult {
    let successes = outcomes
        .iter()
        .filter(|t| t.rel_fro_err <= SUCCESS_THRESHOLD)
        .count();
    let ill = outcomes.iter().filter(|t| t.ill_posed).count();
    let mut errs: Vec<f64> = outcomes.iter().map(|t| t.rel_fro_err).collect();
    CellResult {
        m_over_n,
        m,
        noise_l1_over_m: noise,
        success_rate: successes as f64 / outcomes.len().max(1) as f64,
        median_rel_err: median(&mut errs),
        ill_posed_fraction: ill as f64 / outcomes.len().max(1) as f64,
        outcomes,
    }
}

/// Noise vector with gaussian shape scaled to an exact l1 budget.
pub fn noise_with_budget(m: usize, budget_l1_over_m: f64, seed: u64) -> Vec<f64> {
    if budget_l1_over_m == 0.0 {
        return vec![0.0; m];
    }
    let mut w = vec![0.0; m];
    GaussSource::new(seed).fill(&mut w);
    let scale = budget_l1_over_m * m as f64 / l1_norm(&w);
    for v in w.iter_mut() {
        *v *= scale;
    }
    w
}

/// One solved trial inside a sweep cell.
pub fn run_trial(spec: &ExperimentSpec, cell: usize, m: usize, noise: f64, trial: usize) -> Result<TrialOutcome> {
    let matrix_seed = rng::derive_seed(spec.master_seed, &[cell as u64, trial as u64, 0]);
    let signal_seed = rng::derive_seed(spec.master_seed, &[cell as u64, trial as u64, 1]);
    let noise_seed = rng::derive_seed(spec.master_seed, &[cell as u64, trial as u64, 2]);

    let x0 = generate(&spec.signal, signal_seed)?;
    let w = noise_with_budget(m, noise, noise_seed);
    let sample = SampleSet::generate(&spec.ensemble, m, spec.n, matrix_seed, &x0, &w)?;

    let ill_posed = match spec.signal.kind {
        SignalKind::Peaky { index } => {
            let mut other = vec![0.0; spec.n];
            other[(index + 1) % spec.n] = spec.signal.norm;
            let clean = phi(&sample.a.mul_vec(&x0));
            let swapped = phi(&sample.a.mul_vec(&other));
            clean == swapped
        }
        _ => false,
    };

    let cfg = spec.solver_config(m);
    let solution: LiftedSolution = match spec.program {
        ProgramKind::Noiseless => solve_noiseless(&sample, &cfg)?,
        ProgramKind::Noisy => solve_noisy(&sample, &cfg)?,
    };
    let rel_fro_err = relative_lift_error(&solution.x_hat_matrix, &x0);
    let sign_err = sign_invariant_error(&solution.x_hat, &x0)?;
    Ok(TrialOutcome {
        index: trial,
        rel_fro_err,
        sign_err,
        iters: solution.iters,
        converged: solution.converged,
        ill_posed,
    })
}

fn header_records(spec: &ExperimentSpec) -> Vec<Record> {
    let join = |xs: &[f64]| {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    vec![
        Record::new("header")
            .push("schema", RESULT_SCHEMA)
            .push("name", &spec.name)
            .push("spec_fingerprint", &spec.fingerprint()),
        Record::new("header")
            .push("ensemble", &spec.ensemble.descriptor())
            .push("prng", PRNG_NAME)
            .push("signal", &spec.signal.descriptor())
            .push("n", spec.n)
            .push("program", spec.program.name()),
        Record::new("header")
            .push("m_over_n", &join(&spec.m_over_n))
            .push("noise_l1_over_m", &join(&spec.noise_l1_over_m))
            .push("trials", spec.trials)
            .push("master_seed", spec.master_seed),
        Record::new("header")
            .push("solver_max_iters", spec.solver_max_iters)
            .push("solver_penalty", spec.solver_penalty)
            .push("solver_tol_per_m", spec.solver_tol_per_m)
            .push("success_threshold", SUCCESS_THRESHOLD),
    ]
}

/// Run the sweep, streaming records to `out` as each cell completes.
/// Solver non-convergence is recorded per trial and never aborts the sweep.
pub fn run_experiment(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(
        out,
        "{}",
        Record::new("meta").push("timestamp_unix", timestamp).to_line()
    )?;
    for record in header_records(spec) {
        writeln!(out, "{}", record.to_line())?;
    }

    let mut cells = Vec::new();
    let mut cell_index = 0usize;
    for &ratio in &spec.m_over_n {
        let m = ((ratio * spec.n as f64).round() as usize).max(1);
        for &noise in &spec.noise_l1_over_m {
            let outcomes: Vec<Result<TrialOutcome>> = par::run_indexed(spec.trials, |trial| {
                run_trial(spec, cell_index, m, noise, trial)
            });
            let mut resolved = Vec::with_capacity(spec.trials);
            for outcome in outcomes {
                resolved.push(outcome?);
            }
            for t in &resolved {
                writeln!(
                    out,
                    "{}",
                    Record::new("trial")
                        .push("m_over_n", ratio)
                        .push("noise", noise)
                        .push("idx", t.index)
                        .push("rel_fro_err", t.rel_fro_err)
                        .push("sign_err", t.sign_err)
                        .push("iters", t.iters)
                        .push("converged", t.converged)
                        .push("ill_posed", t.ill_posed)
                        .to_line()
                )?;
            }
            let cell = aggregate(ratio, m, noise, resolved);
            writeln!(
                out,
                "{}",
                Record::new("cell")
                    .push("m_over_n", ratio)
                    .push("m", m)
                    .push("noise", noise)
                    .push("trials", cell.outcomes.len())
                    .push("success_rate", cell.success_rate)
                    .push("median_rel_err", cell.median_rel_err)
                    .push("ill_posed_fraction", cell.ill_posed_fraction)
                    .to_line()
            )?;
            cells.push(cell);
            cell_index += 1;
        }
    }
    Ok(cells)
}

/// The deterministic portion of a result file: every line except `meta`.
pub fn result_body(text: &str) -> String {
    text.lines()
        .filter(|line| !line.starts_with("meta"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parsed result file: header fields, trial rows, cell rows.
#[derive(Debug, Clone, Default)]
pub struct ResultFile {
    pub header: Vec<(String, String)>,
    pub trials: Vec<Record>,
    pub cells: Vec<Record>,
}

pub fn parse_result_file(text: &str) -> Result<ResultFile> {
    let mut file = ResultFile::default();
    let mut schema_seen = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let record = Record::parse(line)?;
        match record.tag.as_str() {
            "meta" => {}
            "header" => {
                if let Some(schema) = record.get("schema") {
                    if schema != RESULT_SCHEMA {
                        return Err(Error::InvalidConfig(format!(
                            "result schema {schema:?} not supported (expected {RESULT_SCHEMA:?})"
                        )));
                    }
                    schema_seen = true;
                }
                file.header.extend(record.fields.clone());
            }
            "trial" => file.trials.push(record),
            "cell" => file.cells.push(record),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown record tag {other:?}"
                )))
            }
        }
    }
    if !schema_seen {
        return Err(Error::InvalidConfig("missing schema header".into()));
    }
    Ok(file)
}

/// A verified aggregate row: (m_over_n, noise, trials, success rate,
/// median relative error).
pub type CellRow = (f64, f64, usize, f64, f64);

/// Recompute cell aggregates from raw trial rows and check them against the
/// stored cell records. Returns the recomputed rows for CSV rendering.
pub fn recompute_cells(file: &ResultFile) -> Result<Vec<CellRow>> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for t in &file.trials {
        let ratio = t.f64("m_over_n")?;
        let noise = t.f64("noise")?;
        groups
            .entry((ratio.to_bits(), noise.to_bits()))
            .or_default()
            .push(t.f64("rel_fro_err")?);
    }
    let mut rows = Vec::new();
    for cell in &file.cells {
        let ratio = cell.f64("m_over_n")?;
        let noise = cell.f64("noise")?;
        let errs = groups
            .get(&(ratio.to_bits(), noise.to_bits()))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "cell ({ratio}, {noise}) has no trial rows"
                ))
            })?;
        let successes = errs.iter().filter(|&&e| e <= SUCCESS_THRESHOLD).count();
        let success_rate = successes as f64 / errs.len() as f64;
        let mut sorted = errs.clone();
        let med = median(&mut sorted);
        let stored_rate = cell.f64("success_rate")?;
        let stored_median = cell.f64("median_rel_err")?;
        if (stored_rate - success_rate).abs() > 1e-12 || (stored_median - med).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "cell ({ratio}, {noise}) aggregates disagree with trial rows: \
                 stored ({stored_rate}, {stored_median}) recomputed ({success_rate}, {med})"
            )));
        }
        rows.push((ratio, noise, errs.len(), success_rate, med));
    }
    Ok(rows)
}

/// CSV rendering of verified cell aggregates.
pub fn cells_to_csv(rows: &[CellRow]) -> String {
    let mut out = String::from("m_over_n,noise_l1_over_m,trials,success_rate,median_rel_err\n");
    for (ratio, noise, trials, rate, med) in rows {
        out.push_str(&format!("{ratio},{noise},{trials},{rate},{med}\n"));
    }
    out
}

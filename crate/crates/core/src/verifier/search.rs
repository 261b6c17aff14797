//! Randomised search for fluctuation-theorem violations.
//!
//! Each restart owns a seeded RNG stream. It first samples Haar-random
//! dynamics (sweeping the spectrum scale `x` over a log grid when enabled),
//! then refines the best point with a Nelder–Mead simplex over the entries of
//! a Hermitian generator `G`, using `U_best · e^{−iG}` as the dynamics.

use rayon::prelude::*;

use super::{check_backward_jarzynski, check_crooks, check_detailed_balance, check_jarzynski, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{c64, evolve_unitary, CMatrix, HermitianOperator, UnitaryOperator};
use crate::protocol::Dynamics;
use crate::random::{sample_haar_unitary, seeded_rng, SimRng};

pub const SCALE_MIN: f64 = 0.1;
pub const SCALE_MAX: f64 = 10.0;
pub const SCALE_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetCheck {
    Jarzynski,
    BackwardJarzynski,
    Crooks,
    DetailedBalance,
}

impl TargetCheck {
    pub fn residual(self, s: &Scenario) -> Result<f64> {
        // the tolerance does not affect the residual
        let report = match self {
            TargetCheck::Jarzynski => check_jarzynski(s, 0.0)?,
            TargetCheck::BackwardJarzynski => check_backward_jarzynski(s, 0.0)?,
            TargetCheck::Crooks => check_crooks(s, 0.0)?,
            TargetCheck::DetailedBalance => check_detailed_balance(s, 0.0)?,
        };
        Ok(if report.residual.is_nan() { f64::INFINITY } else { report.residual })
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetCheck::Jarzynski => "jarzynski",
            TargetCheck::BackwardJarzynski => "backward_jarzynski",
            TargetCheck::Crooks => "crooks",
            TargetCheck::DetailedBalance => "detailed_balance",
        }
    }
}

/// What the search may vary. The template's unitary is the starting point
/// when dynamics are free.
#[derive(Debug, Clone)]
pub struct SearchTemplate {
    pub scenario: Scenario,
    pub check: TargetCheck,
    pub vary_dynamics: bool,
    pub vary_scale: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Total number of check evaluations.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { budget: 500, restarts: 8, seed: 0, workers: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub worst_violation: f64,
    pub witness: Scenario,
    /// Spectrum scale applied to the template's Hamiltonians in the witness.
    pub scale: f64,
    pub evaluations: usize,
    pub restart: usize,
}

pub fn scale_grid() -> Vec<f64> {
    let (lo, hi) = (SCALE_MIN.ln(), SCALE_MAX.ln());
    (0..SCALE_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (SCALE_POINTS - 1) as f64).exp())
        .collect()
}

struct Candidate {
    violation: f64,
    unitary: Option<UnitaryOperator>,
    scale: f64,
}

struct Restart<'a> {
    template: &'a SearchTemplate,
    budget: usize,
    used: usize,
    best: Candidate,
}

impl Restart<'_> {
    fn scenario(&self, u: Option<&UnitaryOperator>, scale: f64) -> Result<Scenario> {
        let mut s = if scale == 1.0 { self.template.scenario.clone() } else { self.template.scenario.scaled(scale)? };
        if let Some(u) = u {
            s.protocol = s.protocol.with_dynamics(Dynamics::Unitary(u.clone()))?;
        }
        Ok(s)
    }

    fn exhausted(&self) -> bool {
        self.used >= self.budget
    }

    /// Evaluates once if budget remains; returns the violation.
    fn evaluate(&mut self, u: Option<&UnitaryOperator>, scale: f64) -> Result<Option<f64>> {
        if self.exhausted() {
            return Ok(None);
        }
        self.used += 1;
        let v = self.template.check.residual(&self.scenario(u, scale)?)?;
        if v > self.best.violation {
            self.best = Candidate { violation: v, unitary: u.cloned(), scale };
        }
        Ok(Some(v))
    }
}

fn template_unitary(t: &SearchTemplate) -> Option<UnitaryOperator> {
    t.scenario.protocol.dynamics().as_unitary().cloned()
}

fn run_restart(t: &SearchTemplate, budget: usize, seed: u64, index: usize) -> Result<(Candidate, usize)> {
    let mut rng: SimRng = seeded_rng(seed, index as u64);
    let dim = t.scenario.dim();
    let mut r = Restart { template: t, budget, used: 0, best: Candidate { violation: -1.0, unitary: None, scale: 1.0 } };
    let scales = if t.vary_scale { scale_grid() } else { vec![1.0] };

    // Sampling phase: the template itself on restart 0, then Haar draws.
    let sampling_budget = if t.vary_dynamics { budget.div_ceil(2) } else { budget };
    let mut first = index == 0 || !t.vary_dynamics;
    'sampling: while r.used < sampling_budget {
        let u = if first { template_unitary(t) } else { Some(sample_haar_unitary(&mut rng, dim)) };
        first = false;
        for &x in &scales {
            if r.used >= sampling_budget || r.evaluate(u.as_ref(), x)?.is_none() {
                break 'sampling;
            }
        }
        if !t.vary_dynamics {
            break;
        }
    }

    if t.vary_dynamics && !r.exhausted() && t.scenario.protocol.dynamics().as_unitary().is_some() {
        refine(&mut r, dim)?;
    }
    let used = r.used;
    Ok((r.best, used))
}

fn generator(theta: &[f64], dim: usize) -> HermitianOperator {
    let mut g = CMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        g[(i, i)] = c64(theta[k], 0.0);
        k += 1;
        for j in (i + 1)..dim {
            g[(i, j)] = c64(theta[k], theta[k + 1]);
            g[(j, i)] = c64(theta[k], -theta[k + 1]);
            k += 2;
        }
    }
    HermitianOperator::new(g).expect("generator is Hermitian by construction")
}

/// Nelder–Mead maximisation of the violation around the best candidate.
fn refine(r: &mut Restart, dim: usize) -> Result<()> {
    let base = r.best.unitary.clone().unwrap_or_else(|| UnitaryOperator::identity(dim));
    let with_scale = r.template.vary_scale;
    let n_params = dim * dim + usize::from(with_scale);
    let x0 = r.best.scale;
    let point = |theta: &[f64]| -> (UnitaryOperator, f64) {
        let u = base.compose(&evolve_unitary(&generator(&theta[..dim * dim], dim), 1.0, 1.0));
        let scale = if with_scale {
            (x0.ln() + theta[dim * dim]).exp().clamp(SCALE_MIN, SCALE_MAX)
        } else {
            x0
        };
        (u, scale)
    };
    let f = |theta: &[f64], r: &mut Restart| -> Result<Option<f64>> {
        let (u, scale) = point(theta);
        Ok(r.evaluate(Some(&u), scale)?.map(|v| -v))
    };

    let step = 0.3;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_params + 1);
    for k in 0..=n_params {
        let mut theta = vec![0.0; n_params];
        if k > 0 {
            theta[k - 1] = step;
        }
        match f(&theta, r)? {
            Some(v) => simplex.push((theta, v)),
            None => return Ok(()),
        }
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[n_params].clone();
        let centroid: Vec<f64> = (0..n_params)
            .map(|i| simplex[..n_params].iter().map(|p| p.0[i]).sum::<f64>() / n_params as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(alpha);
        let Some(fr) = f(&xr, r)? else { return Ok(()) };
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let Some(fe) = f(&xe, r)? else { return Ok(()) };
            simplex[n_params] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n_params - 1].1 {
            simplex[n_params] = (xr, fr);
            continue;
        }
        let xc = along(-rho);
        let Some(fc) = f(&xc, r)? else { return Ok(()) };
        if fc < worst.1 {
            simplex[n_params] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = best.iter().zip(&p.0).map(|(b, x)| b + sigma * (x - b)).collect();
            let Some(v) = f(&shrunk, r)? else { return Ok(()) };
            *p = (shrunk, v);
        }
    }
}

/// Maximises the targeted check's residual. Deterministic for a given seed
/// and restart count, independent of the number of workers.
pub fn adversarial_search(template: &SearchTemplate, options: SearchOptions) -> Result<SearchResult> {
    if options.budget == 0 {
        return Err(Error::InvalidArgument("search budget must be positive".into()));
    }
    let restarts = options.restarts.clamp(1, options.budget);
    let budgets: Vec<usize> =
        (0..restarts).map(|i| options.budget / restarts + usize::from(i < options.budget % restarts)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let results: Vec<(Candidate, usize)> = pool.install(|| {
        budgets
            .par_iter()
            .enumerate()
            .map(|(i, &b)| run_restart(template, b, options.seed, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let evaluations = results.iter().map(|(_, n)| n).sum();
    let (restart, best) = results
        .into_iter()
        .enumerate()
        .fold(None::<(usize, Candidate)>, |acc, (i, (c, _))| match acc {
            Some((j, b)) if b.violation >= c.violation => Some((j, b)),
            _ => Some((i, c)),
        })
        .expect("at least one restart");
    let mut witness = if best.scale == 1.0 { template.scenario.clone() } else { template.scenario.scaled(best.scale)? };
    if let Some(u) = &best.unitary {
        witness.protocol = witness.protocol.with_dynamics(Dynamics::Unitary(u.clone()))?;
    }
    Ok(SearchResult { worst_violation: best.violation.max(0.0), witness, scale: best.scale, evaluations, restart })
}

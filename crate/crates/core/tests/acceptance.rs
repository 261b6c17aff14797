//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

use tems::hamiltonian::{has_distinct_work_values, nondegenerate_difference_spectrum, SpectralHamiltonian};
use tems::instrument::{
    build_crooks, build_error_free, build_error_free_uniform, build_ji_erroneous, build_jii, build_mixed_projective,
    build_projective, effect_projector_defect, is_error_free, transpose_depolarizing, Channel, CrooksVariant,
    Instrument,
};
use tems::lemma_lab::{
    appendix_a_effect_check, lemma3_classify, lemma3_trace_scan, lemma4_check, lemma4_family, lemma4_fit,
    Lemma3Verdict,
};
use tems::linalg::{c64, ket_bra, min_eigenvalue, CMatrix, DensityMatrix, HermitianOperator};
use tems::protocol::{Dynamics, Protocol};
use tems::random::{
    random_density_matrix, random_hermitian, random_state_vector, sample_haar_unitary, seeded_rng, uniform_in, SimRng,
};
use tems::verifier::{
    adversarial_search, check_condition_ji, check_crooks, check_detailed_balance, check_jarzynski, Scenario,
    SearchOptions, SearchTemplate, TargetCheck,
};
use tems::work_stats::joint_table;

type Outcome = Result<String, String>;

/// Random spectrum in a Haar-random eigenbasis. With `degenerate` the number
/// of levels is drawn below `dim`.
fn random_hamiltonian(rng: &mut SimRng, dim: usize, degenerate: bool) -> SpectralHamiltonian {
    let levels = if degenerate && dim > 1 { rng.random_range(1..dim) } else { dim };
    let mut degs = vec![1usize; levels];
    for _ in levels..dim {
        let k = rng.random_range(0..levels);
        degs[k] += 1;
    }
    let mut e = uniform_in(rng, -1.0, 1.0);
    let energies: Vec<f64> = (0..levels)
        .map(|_| {
            let cur = e;
            e += uniform_in(rng, 0.2, 1.0);
            cur
        })
        .collect();
    let basis = sample_haar_unitary(rng, dim);
    SpectralHamiltonian::from_spectrum_in_basis(&energies, &degs, &basis).unwrap()
}

fn generic_hamiltonian(dim: usize, seed: u64, scale: f64) -> SpectralHamiltonian {
    SpectralHamiltonian::nondegenerate(&nondegenerate_difference_spectrum(dim, seed)).unwrap().scaled(scale).unwrap()
}

fn haar_scenario(rng: &mut SimRng, h0: &SpectralHamiltonian, h1: &SpectralHamiltonian, i0: Instrument, i1: Instrument, beta: f64) -> Scenario {
    let u = sample_haar_unitary(rng, h0.dim());
    Scenario::new(Protocol::unitary(h0.clone(), u, h1.clone()).unwrap(), i0, i1, beta).unwrap()
}

/// Convex mixture of random permutation matrices; rows `m` sum to one.
fn doubly_stochastic(rng: &mut SimRng, dim: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(dim, dim);
    let weights: Vec<f64> = (0..3).map(|_| uniform_in(rng, 0.1, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let mut perm: Vec<usize> = (0..dim).collect();
        perm.shuffle(rng);
        for (i, &m) in perm.iter().enumerate() {
            q[(m, i)] += w / total;
        }
    }
    q
}

fn fmax(acc: f64, x: f64) -> f64 {
    acc.max(x)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1001, 0);
    let dims = [2, 3, 4, 6];
    let (mut jz, mut cr, mut degenerate) = (0.0f64, 0.0f64, 0usize);
    for i in 0..200 {
        let dim = dims[i % 4];
        let h0 = random_hamiltonian(&mut rng, dim, i % 2 == 1);
        let h1 = random_hamiltonian(&mut rng, dim, i % 3 == 1);
        degenerate += usize::from(h0.is_degenerate() || h1.is_degenerate());
        let beta = uniform_in(&mut rng, 0.1, 5.0);
        let s = haar_scenario(&mut rng, &h0, &h1, build_projective(&h0), build_projective(&h1), beta);
        jz = jz.max(check_jarzynski(&s, 1e-10).unwrap().residual);
        cr = cr.max(check_crooks(&s, 1e-9).unwrap().residual);
    }
    let elapsed = start.elapsed();
    let detail = format!("max jarzynski {jz:.2e}, max crooks {cr:.2e}, {degenerate} degenerate, {:.1}s", elapsed.as_secs_f64());
    if jz <= 1e-10 && cr <= 1e-9 && elapsed <= Duration::from_secs(60) && degenerate > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let mut rng = seeded_rng(1002, 0);
    let (mut cr, mut db, mut min_choi, mut cases) = (0.0f64, 0.0f64, f64::INFINITY, 0);
    for dim in [2usize, 3, 4] {
        let d = dim as f64;
        for alpha in [-1.0 / (d - 1.0), -1.0 / (d * d - 1.0), 0.0, 0.5, 1.0] {
            for k in 0..20u64 {
                let h0 = generic_hamiltonian(dim, 20 * k + 1, uniform_in(&mut rng, 0.5, 2.0));
                let h1 = generic_hamiltonian(dim, 20 * k + 2, uniform_in(&mut rng, 0.5, 2.0));
                let i0 = build_crooks(&h0, alpha, CrooksVariant::InstrumentForm).unwrap();
                let i1 = build_crooks(&h1, alpha, CrooksVariant::InstrumentForm).unwrap();
                for instr in [&i0, &i1] {
                    for o in instr.outcomes() {
                        min_choi = min_choi.min(min_eigenvalue(&o.operation.choi()));
                    }
                }
                let beta = uniform_in(&mut rng, 0.1, 5.0);
                let s = haar_scenario(&mut rng, &h0, &h1, i0, i1, beta);
                cr = cr.max(check_crooks(&s, 1e-9).unwrap().residual);
                db = db.max(check_detailed_balance(&s, 1e-10).unwrap().residual);
                cases += 1;
            }
        }
    }
    let detail = format!("{cases} cases, max crooks {cr:.2e}, max detailed balance {db:.2e}, min Choi eigenvalue {min_choi:.2e}");
    if cr <= 1e-9 && db <= 1e-10 && min_choi >= -1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Outcome {
    let mut rng = seeded_rng(1003, 0);
    let h0 = generic_hamiltonian(3, 31, 1.0);
    let h1 = generic_hamiltonian(3, 32, 1.0);
    let sigma = random_density_matrix(&mut rng, 3);
    let dump = Channel::replacement(&sigma);
    let options = SearchOptions { budget: 2000, restarts: 8, seed: 3, workers: 4 };
    let constant = haar_scenario(
        &mut rng,
        &h0,
        &h1,
        build_error_free_uniform(&h0, &dump).unwrap(),
        build_error_free_uniform(&h1, &dump).unwrap(),
        1.0,
    );
    let t = SearchTemplate { scenario: constant, check: TargetCheck::Crooks, vary_dynamics: true, vary_scale: false };
    let v_constant = adversarial_search(&t, options).unwrap().worst_violation;

    let mismatched = haar_scenario(
        &mut rng,
        &h0,
        &h1,
        build_crooks(&h0, 0.2, CrooksVariant::InstrumentForm).unwrap(),
        build_crooks(&h1, 0.8, CrooksVariant::InstrumentForm).unwrap(),
        1.0,
    );
    let t = SearchTemplate { scenario: mismatched, check: TargetCheck::Crooks, vary_dynamics: true, vary_scale: false };
    let v_mismatch = adversarial_search(&t, options).unwrap().worst_violation;
    let detail = format!("constant channel {v_constant:.3e} (need 1e-3), alpha 0.2 vs 0.8 {v_mismatch:.3e} (need 1e-4)");
    if v_constant >= 1e-3 && v_mismatch >= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4() -> Outcome {
    let mut rng = seeded_rng(1004, 0);
    let (mut jz, mut all_erroneous) = (0.0f64, true);
    for k in 0..50 {
        let dim = [2, 3, 4][k % 3];
        let h0 = random_hamiltonian(&mut rng, dim, k % 2 == 0);
        let h1 = random_hamiltonian(&mut rng, dim, false);
        let q = doubly_stochastic(&mut rng, dim);
        let basis = sample_haar_unitary(&mut rng, dim);
        let i1 = build_ji_erroneous(&h1, &basis, &q).unwrap();
        all_erroneous &= !is_error_free(&i1, &h1, 1e-10).unwrap();
        let i0 = build_error_free_uniform(&h0, &Channel::random_unital(&mut rng, dim, 3)).unwrap();
        let beta = uniform_in(&mut rng, 0.1, 5.0);
        let s = haar_scenario(&mut rng, &h0, &h1, i0, i1, beta);
        jz = jz.max(check_jarzynski(&s, 1e-10).unwrap().residual);
    }
    let detail = format!("max jarzynski {jz:.2e}, second measurement erroneous in every case: {all_erroneous}");
    if jz <= 1e-10 && all_erroneous {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = seeded_rng(1005, 0);
    let (mut fact, mut jz) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let dim = [2, 3, 4][k % 3];
        let h0 = random_hamiltonian(&mut rng, dim, k % 2 == 0);
        let h1 = random_hamiltonian(&mut rng, dim, k % 2 == 1);
        let beta = uniform_in(&mut rng, 0.1, 5.0);
        let s = haar_scenario(&mut rng, &h0, &h1, build_projective(&h0), build_jii(&h1), beta);
        let table = joint_table(&s.protocol, &s.instr0, &s.instr_tau, beta).unwrap();
        let pops = h0.populations(beta).unwrap();
        for (m, dm) in h1.degeneracies().iter().enumerate() {
            for (n, pn) in pops.iter().enumerate() {
                fact = fact.max((table.get(m, n) - *dm as f64 / dim as f64 * pn).abs());
            }
        }
        jz = jz.max(check_jarzynski(&s, 1e-10).unwrap().residual);
    }
    let detail = format!("max |p(m,n) - (d_m/D) p_n| {fact:.2e}, max jarzynski {jz:.2e}");
    if fact <= 1e-12 && jz <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = seeded_rng(1006, 0);
    let h0 = SpectralHamiltonian::nondegenerate(&[0.0, 1.0]).unwrap();
    let h1 = SpectralHamiltonian::nondegenerate(&[0.0, 1.4]).unwrap();
    let s = haar_scenario(&mut rng, &h0, &h1, build_mixed_projective(&h0, 0.05).unwrap(), build_projective(&h1), 1.0);
    let t = SearchTemplate { scenario: s, check: TargetCheck::Jarzynski, vary_dynamics: false, vary_scale: true };
    let r = adversarial_search(&t, SearchOptions { budget: 500, restarts: 1, seed: 6, workers: 1 }).unwrap();
    let detail = format!("worst jarzynski {:.3e} at x = {:.3} after {} evaluations", r.worst_violation, r.scale, r.evaluations);
    if r.worst_violation >= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let mut rng = seeded_rng(1007, 0);
    let (mut jz, mut certified) = (0.0f64, 0usize);
    for k in 0..50 {
        let dim = [2, 3, 4][k % 3];
        let h0 = random_hamiltonian(&mut rng, dim, k % 2 == 0);
        let h1 = random_hamiltonian(&mut rng, dim, k % 3 == 0);
        let i0 = build_error_free_uniform(&h0, &Channel::random_unital(&mut rng, dim, 2)).unwrap();
        let i1 = match k % 3 {
            0 => build_projective(&h1),
            1 => build_jii(&h1),
            _ => build_error_free(
                &h1,
                &(0..h1.level_count()).map(|_| Channel::random(&mut rng, dim, 2)).collect::<Vec<_>>(),
            )
            .unwrap(),
        };
        certified += usize::from(check_condition_ji(&i0, &i1, &h0, &h1, 1e-10).unwrap().pass);
        let dynamics = Dynamics::Channel(Channel::random_unital(&mut rng, dim, 3));
        let p = Protocol::new(h0.clone(), dynamics, h1.clone()).unwrap();
        let s = Scenario::new(p, i0, i1, uniform_in(&mut rng, 0.1, 5.0)).unwrap();
        jz = jz.max(check_jarzynski(&s, 1e-10).unwrap().residual);
    }
    let detail = format!("{certified}/50 certified, max jarzynski {jz:.2e}");
    if certified == 50 && jz <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let mut rng = seeded_rng(1008, 0);
    let (mut checked, mut agree, mut error_free, mut erroneous) = (0, 0, 0, 0);
    let mut families = std::collections::BTreeSet::new();
    for dim in [2usize, 3, 4] {
        for k in 0..6 {
            let h = random_hamiltonian(&mut rng, dim, k % 2 == 1);
            let hn = random_hamiltonian(&mut rng, dim, false);
            let d = dim as f64;
            let random_channels: Vec<Channel> = (0..h.level_count()).map(|_| Channel::random(&mut rng, dim, 2)).collect();
            let instruments: Vec<(&str, SpectralHamiltonian, Instrument)> = vec![
                ("projective", h.clone(), build_projective(&h)),
                ("error_free_random", h.clone(), build_error_free(&h, &random_channels).unwrap()),
                (
                    "error_free_transpose",
                    h.clone(),
                    build_error_free_uniform(&h, &transpose_depolarizing(uniform_in(&mut rng, -1.0 / (d - 1.0), 1.0 / (d + 1.0)), dim).unwrap())
                        .unwrap(),
                ),
                (
                    "crooks_instrument_form",
                    hn.clone(),
                    build_crooks(&hn, uniform_in(&mut rng, -1.0 / (d - 1.0), 1.0), CrooksVariant::InstrumentForm).unwrap(),
                ),
                (
                    "crooks_universal",
                    h.clone(),
                    build_crooks(&h, uniform_in(&mut rng, -1.0 / (d * d - 1.0), 1.0), CrooksVariant::UniversalChannel).unwrap(),
                ),
                ("jii", h.clone(), build_jii(&h)),
                (
                    "ji_erroneous",
                    hn.clone(),
                    build_ji_erroneous(&hn, &sample_haar_unitary(&mut rng, dim), &doubly_stochastic(&mut rng, dim)).unwrap(),
                ),
                ("mixed_projective", h.clone(), build_mixed_projective(&h, uniform_in(&mut rng, 0.01, 0.5)).unwrap()),
                ("mixed_projective_zero", h.clone(), build_mixed_projective(&h, 0.0).unwrap()),
            ];
            for (name, hh, instr) in instruments {
                families.insert(name);
                let report = appendix_a_effect_check(&instr, &hh, 1e-10).unwrap();
                let ef = is_error_free(&instr, &hh, 1e-10).unwrap();
                let proj = effect_projector_defect(&instr, &hh).unwrap() <= 1e-10;
                checked += 1;
                agree += usize::from(report.pass && ef == proj);
                if ef {
                    error_free += 1;
                } else {
                    erroneous += 1;
                }
            }
        }
    }
    let detail = format!(
        "{agree}/{checked} agree over {} families ({error_free} error-free, {erroneous} erroneous)",
        families.len()
    );
    if agree == checked && families.len() >= 6 && error_free > 0 && erroneous > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn op_norm(m: &HermitianOperator) -> f64 {
    m.eig().eigenvalues.iter().map(|x| x.abs()).fold(0.0, fmax)
}

fn criterion_9() -> Outcome {
    let mut rng = seeded_rng(1009, 0);
    let mut spread = 0.0f64;
    let mut samples = usize::MAX;
    for (k, dim) in [2usize, 3, 5].into_iter().enumerate() {
        let a = random_hermitian(&mut rng, dim);
        let b = random_hermitian(&mut rng, dim);
        let scalar = HermitianOperator::scalar(dim, uniform_in(&mut rng, -2.0, 2.0));
        let zero = HermitianOperator::zeros(dim);
        for (i, (x, y)) in [(&scalar, &b), (&a, &scalar), (&zero, &b), (&a, &zero), (&scalar, &scalar)].into_iter().enumerate() {
            let stats = lemma3_trace_scan(x, y, 500, 499, (10 * k + i) as u64).unwrap();
            samples = samples.min(stats.samples);
            spread = spread.max(stats.spread());
        }
    }
    let mut worst_ratio = f64::INFINITY;
    let mut witnessed = 0;
    for k in 0..50 {
        let dim = [2usize, 3, 5][k % 3];
        let a = random_hermitian(&mut rng, dim);
        let b = random_hermitian(&mut rng, dim);
        let c = lemma3_classify(&a, &b, 1e-12, 200, 200, 100 + k as u64).unwrap();
        let needed = 1e-6 * op_norm(&a) * op_norm(&b);
        if c.verdict == Lemma3Verdict::NonConstantWitnessed && c.witness_deviation >= needed {
            witnessed += 1;
        }
        worst_ratio = worst_ratio.min(c.witness_deviation / (op_norm(&a) * op_norm(&b)));
    }
    let detail = format!(
        "scalar/zero spread {spread:.2e} over {samples} unitaries; {witnessed}/50 witnessed, min deviation/(|A||B|) {worst_ratio:.2e}"
    );
    if spread <= 1e-12 && samples >= 1000 && witnessed == 50 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10() -> Outcome {
    let mut rng = seeded_rng(1010, 0);
    let (mut member_max, mut fit_max, mut member_samples) = (0.0f64, 0.0f64, usize::MAX);
    let (mut perturbed_min, mut perturbed_samples) = (f64::INFINITY, 0usize);
    let delta = 1e-2;
    for dim in [2usize, 3, 4] {
        let lo = -1.0 / (dim as f64 - 1.0);
        for i in 0..5 {
            let alpha = lo + (1.0 - lo) * i as f64 / 4.0;
            let a = random_state_vector(&mut rng, dim);
            let b = random_state_vector(&mut rng, dim);
            let (r, s) = lemma4_family(alpha, &a, &b);
            let rho = DensityMatrix::new(r.clone()).unwrap();
            let sigma = DensityMatrix::new(s).unwrap();
            let stats = lemma4_check(&rho, &sigma, &a, &b, 1000, dim as u64 * 10 + i).unwrap();
            member_samples = member_samples.min(stats.samples);
            member_max = member_max.max(stats.max);
            fit_max = fit_max.max(lemma4_fit(&rho, &sigma, &a, &b).unwrap().residual);

            let cvec = random_state_vector(&mut rng, dim);
            let perturbed: CMatrix = (r + ket_bra(&cvec) * c64(delta, 0.0)) / c64(1.0 + delta, 0.0);
            let perturbed = DensityMatrix::new(perturbed).unwrap();
            // identity, Haar draws and 2D + 1 structured unitaries stay within 2000
            let n_haar = 2000 - 2 * dim - 2;
            let stats = lemma4_check(&perturbed, &sigma, &a, &b, n_haar, dim as u64 * 10 + i + 500).unwrap();
            perturbed_samples = perturbed_samples.max(stats.samples);
            perturbed_min = perturbed_min.min(stats.max);
        }
    }
    let detail = format!(
        "members: max discrepancy {member_max:.2e} over {member_samples} unitaries, max fit residual {fit_max:.2e}; \
         perturbed: min max-discrepancy {perturbed_min:.2e} within {perturbed_samples} samples"
    );
    if member_max <= 1e-10 && fit_max <= 1e-10 && member_samples >= 1000 && perturbed_min >= 1e-4 && perturbed_samples <= 2000 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_11() -> Outcome {
    let mut rng = seeded_rng(1011, 0);
    let tol = 1e-9;
    let (mut agree, mut passes, mut fails, mut k) = (0, 0, 0, 0u64);
    let mut scenarios = 0;
    while scenarios < 100 {
        k += 1;
        let dim = [2usize, 3, 4][scenarios % 3];
        let h0 = generic_hamiltonian(dim, 2 * k, uniform_in(&mut rng, 0.5, 2.0));
        let h1 = generic_hamiltonian(dim, 2 * k + 1, uniform_in(&mut rng, 0.5, 2.0));
        if !has_distinct_work_values(&h0.energies(), &h1.energies(), 1e-6) {
            continue;
        }
        let d = dim as f64;
        let lo = -1.0 / (d - 1.0);
        let (i0, i1) = match scenarios % 5 {
            0 => (build_projective(&h0), build_projective(&h1)),
            1 => {
                let alpha = uniform_in(&mut rng, lo, 1.0);
                (
                    build_crooks(&h0, alpha, CrooksVariant::InstrumentForm).unwrap(),
                    build_crooks(&h1, alpha, CrooksVariant::InstrumentForm).unwrap(),
                )
            }
            2 => (
                build_crooks(&h0, uniform_in(&mut rng, lo, 1.0), CrooksVariant::InstrumentForm).unwrap(),
                build_crooks(&h1, uniform_in(&mut rng, lo, 1.0), CrooksVariant::InstrumentForm).unwrap(),
            ),
            3 => {
                let c = Channel::random(&mut rng, dim, 2);
                (build_error_free_uniform(&h0, &c).unwrap(), build_error_free_uniform(&h1, &c).unwrap())
            }
            _ => {
                let c = Channel::replacement(&random_density_matrix(&mut rng, dim));
                (build_projective(&h0), build_error_free_uniform(&h1, &c).unwrap())
            }
        };
        let beta = uniform_in(&mut rng, 0.1, 3.0);
        let s = haar_scenario(&mut rng, &h0, &h1, i0, i1, beta);
        let crooks = check_crooks(&s, tol).unwrap().pass;
        let db = check_detailed_balance(&s, tol).unwrap().pass;
        agree += usize::from(crooks == db);
        if crooks {
            passes += 1;
        } else {
            fails += 1;
        }
        scenarios += 1;
    }
    let detail = format!("{agree}/100 agree ({passes} pass, {fails} fail)");
    if agree == 100 && passes > 0 && fails > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_tems"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn without_timestamp(path: &Path) -> Value {
    let mut v: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove(tems::cli::TIMESTAMP_FIELD);
    v
}

const VERIFY_CONFIG: &str = r#"{
  "beta": 1.0,
  "initial": {"spectrum": {"energies": [0.0, 1.0]}},
  "final": {"spectrum": {"energies": [0.0, 1.6]}},
  "dynamics": {"haar": {}},
  "instr0": {"mixed_projective": {"epsilon": 0.05}},
  "instr_tau": "projective",
  "checks": ["jarzynski", "crooks", "condition_ji"],
  "adversarial": {"budget": 200, "restarts": 4}
}"#;

const SCAN_CONFIG: &str = r#"{
  "instrument": {"crooks": {"alpha": 0.0}},
  "dims": [2, 3],
  "parameter": {"instrument_range": {"points": 5}},
  "betas": [0.1, 1.0, 10.0],
  "scales": [0.5, 2.0],
  "protocols": 2
}"#;

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let verify = dir.path().join("verify.json");
    let scan = dir.path().join("scan.json");
    std::fs::write(&verify, VERIFY_CONFIG).unwrap();
    std::fs::write(&scan, SCAN_CONFIG).unwrap();
    let mut mismatches = Vec::new();
    let runs: Vec<_> = [("1", "a"), ("3", "b")]
        .iter()
        .map(|(workers, tag)| {
            let out = dir.path().join(tag);
            let out_s = out.to_str().unwrap();
            let v = run_cli(&["verify", "--config", verify.to_str().unwrap(), "--seed", "17", "--workers", workers, "--out-dir", out_s]);
            let s = run_cli(&["scan", "--config", scan.to_str().unwrap(), "--seed", "17", "--workers", workers, "--out-dir", out_s]);
            (out, v, s)
        })
        .collect();
    let (a, b) = (&runs[0], &runs[1]);
    if (a.1, a.2) != (b.1, b.2) {
        mismatches.push(format!("exit codes {:?} vs {:?}", (a.1, a.2), (b.1, b.2)));
    }
    if without_timestamp(&a.0.join("report.json")) != without_timestamp(&b.0.join("report.json")) {
        mismatches.push("report.json".into());
    }
    for f in ["summary.csv", "scan.csv", "witness_jarzynski.json"] {
        let (x, y) = (std::fs::read(a.0.join(f)), std::fs::read(b.0.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => mismatches.push(f.into()),
        }
    }
    let detail = format!("verify exit {}, scan exit {}, differing outputs: {:?}", a.1, a.2, mismatches);
    if mismatches.is_empty() && a.1 == 1 && a.2 == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("projective exactness", criterion_1),
        ("crooks family sufficiency", criterion_2),
        ("crooks necessity by search", criterion_3),
        ("jarzynski with erroneous second measurement", criterion_4),
        ("jii factorization", criterion_5),
        ("first-measurement error necessity", criterion_6),
        ("unital channel dynamics", criterion_7),
        ("error-free iff projector effects", criterion_8),
        ("trace identity classification", criterion_9),
        ("state-pair family identity", criterion_10),
        ("detailed balance agrees with crooks", criterion_11),
        ("cli determinism", criterion_12),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("{:02}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

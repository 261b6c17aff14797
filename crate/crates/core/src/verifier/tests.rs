use nalgebra::DMatrix;

use super::*;
use crate::hamiltonian::{diagonal_hamiltonian, DEFAULT_GROUP_TOL};
use crate::instrument::{
    build_crooks, build_error_free_uniform, build_ji_erroneous, build_jii, build_mixed_projective,
    build_projective, Channel, CrooksVariant,
};
use crate::linalg::{basis_vector, DensityMatrix, UnitaryOperator};
use crate::random::{sample_haar_unitary, seeded_rng};

fn qutrit(e: &[f64]) -> SpectralHamiltonian {
    SpectralHamiltonian::nondegenerate(e).unwrap()
}

fn haar_scenario(
    seed: u64,
    h0: &SpectralHamiltonian,
    h1: &SpectralHamiltonian,
    i0: Instrument,
    i1: Instrument,
    beta: f64,
) -> Scenario {
    let mut rng = seeded_rng(seed, 7);
    let p = Protocol::unitary(h0.clone(), sample_haar_unitary(&mut rng, h0.dim()), h1.clone()).unwrap();
    Scenario::new(p, i0, i1, beta).unwrap()
}

fn dump_channel(dim: usize) -> Channel {
    Channel::replacement(&DensityMatrix::pure(&basis_vector(dim, 0)).unwrap())
}

#[test]
fn scenario_validation() {
    let h = qutrit(&[0.0, 0.5, 1.0]);
    let p = Protocol::unitary(h.clone(), UnitaryOperator::identity(3), h.clone()).unwrap();
    let proj = build_projective(&h);
    assert!(matches!(Scenario::new(p.clone(), proj.clone(), proj.clone(), 0.0), Err(Error::InvalidBeta(_))));
    let h2 = diagonal_hamiltonian(&[0.0, 0.0, 1.0], DEFAULT_GROUP_TOL);
    assert!(Scenario::new(p, proj, build_projective(&h2), 1.0).is_err());
}

#[test]
fn projective_scenarios_pass_everything() {
    for d in 2..=5 {
        let h0 = qutrit(&(0..d).map(|i| 0.37 * i as f64 + 0.05 * (i * i) as f64).collect::<Vec<_>>());
        let h1 = h0.scaled(1.6).unwrap().shifted(0.2);
        let s = haar_scenario(d as u64, &h0, &h1, build_projective(&h0), build_projective(&h1), 1.3);
        assert!(check_jarzynski(&s, 1e-10).unwrap().pass);
        assert!(check_backward_jarzynski(&s, 1e-10).unwrap().pass);
        assert!(check_crooks(&s, 1e-10).unwrap().pass);
        assert!(check_detailed_balance(&s, 1e-10).unwrap().pass);
    }
}

#[test]
fn forward_and_backward_averages_multiply_to_one() {
    let h = qutrit(&[0.0, 0.5, 1.2]);
    let mut rng = seeded_rng(31, 0);
    let p = Protocol::unitary(h.clone(), sample_haar_unitary(&mut rng, 3), h.clone()).unwrap();
    let i = build_crooks(&h, 0.3, CrooksVariant::InstrumentForm).unwrap();
    let s = Scenario::new(p, i.clone(), i, 0.8).unwrap();
    let f = check_jarzynski(&s, 1e-10).unwrap();
    let b = check_backward_jarzynski(&s, 1e-10).unwrap();
    assert!(f.pass && b.pass);
    assert!((f.actual * b.actual - 1.0).abs() < 1e-10);
}

#[test]
fn crooks_family_passes_at_boundaries() {
    for d in 2..=4usize {
        let h0 = qutrit(&(0..d).map(|i| (i as f64).powf(1.3) * 0.4).collect::<Vec<_>>());
        let h1 = h0.scaled(0.7).unwrap();
        for alpha in [-1.0 / (d as f64 - 1.0), 0.25, 1.0] {
            let i0 = build_crooks(&h0, alpha, CrooksVariant::InstrumentForm).unwrap();
            let i1 = build_crooks(&h1, alpha, CrooksVariant::InstrumentForm).unwrap();
            let s = haar_scenario(40 + d as u64, &h0, &h1, i0.clone(), i1.clone(), 1.1);
            assert!(check_crooks(&s, 1e-9).unwrap().pass, "d {d} alpha {alpha}");
            assert!(check_detailed_balance(&s, 1e-10).unwrap().pass);
            assert!(check_backward_jarzynski(&s, 1e-10).unwrap().pass);
            let cert = check_crooks_condition(&i0, &h0, &i1, &h1, 1e-10, 1e-8).unwrap();
            assert!(cert.pass, "{cert:?}");
        }
    }
}

#[test]
fn mismatched_alpha_breaks_crooks_but_not_jarzynski() {
    let h = qutrit(&[0.0, 0.45, 1.3]);
    let i0 = build_crooks(&h, 0.2, CrooksVariant::InstrumentForm).unwrap();
    let i1 = build_crooks(&h, 0.8, CrooksVariant::InstrumentForm).unwrap();
    let s = haar_scenario(50, &h, &h, i0.clone(), i1.clone(), 1.0);
    assert!(check_jarzynski(&s, 1e-10).unwrap().pass);
    assert!(!check_crooks(&s, 1e-9).unwrap().pass);
    assert!(!check_crooks_condition(&i0, &h, &i1, &h, 1e-10, 1e-8).unwrap().pass);
}

#[test]
fn constant_channel_is_flagged() {
    let h = qutrit(&[0.0, 0.45, 1.3]);
    let dump = build_error_free_uniform(&h, &dump_channel(3)).unwrap();
    let fit = fit_depolarizing_alpha(&dump, &h).unwrap();
    assert!(fit.residual > 1e-2, "{fit:?}");
    assert!(fit.error_free);
    let s = haar_scenario(51, &h, &h, build_projective(&h), dump, 1.0);
    // the second channel acts after the last measurement
    assert!(check_jarzynski(&s, 1e-10).unwrap().pass);
    assert!(!check_crooks(&s, 1e-3).unwrap().pass);
}

/// Frobenius distance from the dumped-outcome Choi matrices to the closest
/// family member, by brute-force scan over α.
#[test]
fn constant_channel_fit_residual_matches_scan() {
    let h = qutrit(&[0.0, 0.45, 1.3]);
    let dump = build_error_free_uniform(&h, &dump_channel(3)).unwrap();
    let fit = fit_depolarizing_alpha(&dump, &h).unwrap();
    let dist = |alpha: f64| -> f64 {
        let members: Vec<CMatrix> = (0..3)
            .map(|n| {
                let (a, b) = crooks_family_choi(&h, n);
                &a + (&b - &a) * c64(alpha, 0.0)
            })
            .collect();
        dump.choi_matrices().iter().zip(&members).map(|(j, m)| (j.matrix() - m).norm_squared()).sum::<f64>().sqrt()
    };
    let scan = (0..=4000).map(|k| -1.0 + 3.0 * k as f64 / 4000.0).map(dist).fold(f64::INFINITY, f64::min);
    assert!(fit.residual <= scan + 1e-12);
    assert!(scan - fit.residual < 1e-5);
}

#[test]
fn depolarizing_fit_round_trips() {
    let h = qutrit(&[0.0, 0.4, 1.1]);
    let fit = fit_depolarizing_alpha(&build_crooks(&h, 0.4, CrooksVariant::InstrumentForm).unwrap(), &h).unwrap();
    assert!((fit.alpha - 0.4).abs() < 1e-10 && fit.residual < 1e-10);
    assert!(fit.in_instrument_range && fit.in_universal_range && fit.flags.is_empty());
    let fit = fit_depolarizing_alpha(&build_projective(&h), &h).unwrap();
    assert!((fit.alpha - 1.0).abs() < 1e-12 && fit.residual < 1e-12);
    let fit = fit_depolarizing_alpha(&build_crooks(&h, -0.5, CrooksVariant::InstrumentForm).unwrap(), &h).unwrap();
    assert!((fit.alpha + 0.5).abs() < 1e-10);
    assert!(fit.in_instrument_range && !fit.in_universal_range);
    let mixed = fit_depolarizing_alpha(&build_mixed_projective(&h, 0.05).unwrap(), &h).unwrap();
    assert!(!mixed.error_free);
    assert!(mixed.flags.iter().any(|f| f == "error-free precondition violated"));
}

#[test]
fn condition_certifiers() {
    let h = qutrit(&[0.0, 0.4, 1.1]);
    let proj = build_projective(&h);
    assert!(check_condition_ji(&proj, &proj, &h, &h, 1e-10).unwrap().pass);
    assert!(!check_condition_jii(&proj, &h, 1e-10).unwrap().pass);
    let jii = build_jii(&h);
    assert!(check_condition_jii(&jii, &h, 1e-10).unwrap().pass);
    assert!(check_condition_ji(&proj, &jii, &h, &h, 1e-10).unwrap().pass);
    let mut rng = seeded_rng(52, 0);
    let q = DMatrix::from_row_slice(3, 3, &[0.6, 0.4, 0.0, 0.0, 0.6, 0.4, 0.4, 0.0, 0.6]);
    let err = build_ji_erroneous(&h, &sample_haar_unitary(&mut rng, 3), &q).unwrap();
    assert!(check_condition_ji(&proj, &err, &h, &h, 1e-10).unwrap().pass);
    let dump = build_error_free_uniform(&h, &dump_channel(3)).unwrap();
    assert!(!check_condition_ji(&dump, &proj, &h, &h, 1e-10).unwrap().pass);
    let uniform = DMatrix::from_element(2, 2, 0.5);
    let h2 = qutrit(&[0.0, 1.0]);
    let e2 = build_ji_erroneous(&h2, &sample_haar_unitary(&mut rng, 2), &uniform).unwrap();
    assert!(check_condition_jii(&e2, &h2, 1e-10).unwrap().pass);
}

#[test]
fn erroneous_second_measurement_keeps_jarzynski() {
    let h0 = qutrit(&[0.0, 0.4, 1.1]);
    let h1 = qutrit(&[0.1, 0.9, 1.5]);
    let mut rng = seeded_rng(53, 0);
    let q = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5]);
    let second = build_ji_erroneous(&h1, &sample_haar_unitary(&mut rng, 3), &q).unwrap();
    let first = build_crooks(&h0, 0.3, CrooksVariant::InstrumentForm).unwrap();
    let s = haar_scenario(54, &h0, &h1, first, second, 2.0);
    let r = check_jarzynski(&s, 1e-10).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn report_serializes_with_schema_fields() {
    let h = qutrit(&[0.0, 1.0]);
    let proj = build_projective(&h);
    let s = haar_scenario(55, &h, &h, proj.clone(), proj, 1.0);
    let v = serde_json::to_value(check_jarzynski(&s, 1e-10).unwrap()).unwrap();
    for key in ["check", "expected", "actual", "residual", "pass"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!(v.get("witness").is_none());
}

#[test]
fn search_rejects_zero_budget() {
    let h = qutrit(&[0.0, 1.0]);
    let proj = build_projective(&h);
    let t = SearchTemplate {
        scenario: haar_scenario(56, &h, &h, proj.clone(), proj, 1.0),
        check: TargetCheck::Crooks,
        vary_dynamics: true,
        vary_scale: false,
    };
    assert!(adversarial_search(&t, SearchOptions { budget: 0, ..Default::default() }).is_err());
}

#[test]
fn search_on_projective_template_finds_nothing() {
    let h = qutrit(&[0.0, 0.3, 1.0]);
    let proj = build_projective(&h);
    let t = SearchTemplate {
        scenario: haar_scenario(57, &h, &h, proj.clone(), proj, 1.0),
        check: TargetCheck::Crooks,
        vary_dynamics: true,
        vary_scale: true,
    };
    let r = adversarial_search(&t, SearchOptions { budget: 300, restarts: 3, seed: 1, workers: 2 }).unwrap();
    assert!(r.worst_violation <= 1e-10, "{}", r.worst_violation);
    assert_eq!(r.evaluations, 300);
}

#[test]
fn search_is_deterministic_across_worker_counts() {
    let h = qutrit(&[0.0, 0.3, 1.0]);
    let t = SearchTemplate {
        scenario: haar_scenario(
            58,
            &h,
            &h,
            build_projective(&h),
            build_error_free_uniform(&h, &dump_channel(3)).unwrap(),
            1.0,
        ),
        check: TargetCheck::Crooks,
        vary_dynamics: true,
        vary_scale: false,
    };
    let a = adversarial_search(&t, SearchOptions { budget: 120, restarts: 4, seed: 9, workers: 1 }).unwrap();
    let b = adversarial_search(&t, SearchOptions { budget: 120, restarts: 4, seed: 9, workers: 4 }).unwrap();
    assert_eq!(a.worst_violation.to_bits(), b.worst_violation.to_bits());
    assert_eq!(a.witness, b.witness);
    assert!(a.worst_violation > 1e-3);
}

#[test]
fn mixed_first_measurement_violates_jarzynski_on_scaled_spectra() {
    let h = qutrit(&[0.0, 1.0]);
    let t = SearchTemplate {
        scenario: haar_scenario(59, &h, &h, build_mixed_projective(&h, 0.05).unwrap(), build_projective(&h), 1.0),
        check: TargetCheck::Jarzynski,
        vary_dynamics: true,
        vary_scale: true,
    };
    let r = adversarial_search(&t, SearchOptions { budget: 500, restarts: 4, seed: 3, workers: 2 }).unwrap();
    assert!(r.worst_violation > 1e-4);
    assert!(!check_jarzynski(&r.witness, 1e-4).unwrap().pass);
}

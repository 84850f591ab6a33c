//! Cross-module invariants that need stochastic machinery: channel-selection
//! statistics, unraveling equivalence, seed hygiene, crossing symmetry, and
//! the ill-conditioned-step guard.

use casimir_core::dynamics::Frame;
use casimir_core::emission::classify;
use casimir_core::error::Error;
use casimir_core::fock::FockSpace;
use casimir_core::linalg::hermitian_eig;
use casimir_core::mcwf::{Channel, Engine, EngineSettings, Unraveling};
use casimir_core::model::{build_exact, resonant_omega_c_for, ModelParams};
use casimir_core::qfi::{qfi_at, DEFAULT_DELTA};
use casimir_core::spectra::resonant_pair;
use casimir_core::stats::{chi2_survival, ks_test_two_sample};

/// Conditional on a jump, channel frequencies follow
/// γ_m⟨C_m†C_m⟩ / Σ γ⟨C†C⟩ of the pre-jump state: χ² over pre-jump bins.
#[test]
fn channel_selection_law() {
    let p = ModelParams::new(1.5000105, 1e-3, 1e-9, 1e-9).unwrap();
    let space = FockSpace::new(4, 5).unwrap();
    let psi0 = space.basis_state(0, 3).unwrap();
    let mut settings = EngineSettings::production(&p)
        .unwrap()
        .with_horizon(2e9, 1.0077e5);
    settings.n_samples = 2;
    let engine = Engine::new(&p, &space, settings).unwrap();
    let records = engine.run_ensemble(&psi0, 2024, 1200).unwrap();

    // bin first jumps by pre-jump photon number; within each bin compare the
    // observed cavity-channel count to the summed per-event probabilities
    const BINS: usize = 4;
    let mut observed = [0.0f64; BINS];
    let mut expected = [0.0f64; BINS];
    let mut variance = [0.0f64; BINS];
    for rec in &records {
        let Some(first) = rec.first_jump() else {
            continue;
        };
        let bin = ((first.pre_jump_photons / 0.5) as usize).min(BINS - 1);
        let wa = p.gamma_a * first.pre_jump_photons;
        let wb = p.gamma_b * first.pre_jump_phonons;
        let pc = wa / (wa + wb);
        expected[bin] += pc;
        variance[bin] += pc * (1.0 - pc);
        if first.channel == Channel::Cavity {
            observed[bin] += 1.0;
        }
    }
    let mut chi2 = 0.0;
    for b in 0..BINS {
        assert!(variance[b] > 0.0, "empty bin {b}");
        chi2 += (observed[b] - expected[b]).powi(2) / variance[b];
    }
    let pval = chi2_survival(chi2, BINS);
    println!("channel-selection χ² = {chi2:.2}, p = {pval:.4}");
    assert!(pval > 0.01);
}

/// The waiting-time and per-step unravelings draw first-jump times from the
/// same distribution (two-sample KS on the g = 0 single-mode problem).
#[test]
fn unravelings_statistically_indistinguishable() {
    let gamma = 2e-3;
    let p = ModelParams::new(1.5, 0.0, gamma, 0.0).unwrap();
    let space = FockSpace::new(2, 1).unwrap();
    let psi0 = space.basis_state(1, 0).unwrap();
    let run = |unraveling, dt_frac: f64, seed| {
        let settings = EngineSettings {
            frame: Frame::EffectiveRotating,
            unraveling,
            t_final: 30.0 / gamma,
            dt: dt_frac / gamma,
            n_samples: 2,
            bisection_rel_tol: 1e-6,
        };
        let engine = Engine::new(&p, &space, settings).unwrap();
        let recs = engine.run_ensemble(&psi0, seed, 10_000).unwrap();
        recs.iter().map(|r| r.jumps[0].time).collect::<Vec<f64>>()
    };
    let waiting = run(Unraveling::WaitingTime, 0.02, 31);
    let per_step = run(Unraveling::PerStep, 0.005, 32);
    let (d, pval) = ks_test_two_sample(&waiting, &per_step);
    println!("unraveling two-sample KS D = {d:.4}, p = {pval:.4}");
    assert!(pval > 0.01, "D = {d}, p = {pval}");
}

/// Disjoint master seeds give different realizations whose channel fractions
/// still agree within 3σ binomial.
#[test]
fn disjoint_seeds_agree_statistically() {
    let p = ModelParams::new(1.5000105, 1e-3, 1e-9, 1e-9).unwrap();
    let space = FockSpace::new(4, 5).unwrap();
    let psi0 = space.basis_state(0, 3).unwrap();
    let mut settings = EngineSettings::production(&p).unwrap();
    settings.n_samples = 2;
    let engine = Engine::new(&p, &space, settings).unwrap();
    let n = 300;
    let e1 = engine.run_ensemble(&psi0, 1001, n).unwrap();
    let e2 = engine.run_ensemble(&psi0, 2002, n).unwrap();
    assert_ne!(
        e1[0].to_json_line(),
        e2[0].to_json_line(),
        "different master seeds must give different realizations"
    );
    let s1 = classify(&e1).unwrap();
    let s2 = classify(&e2).unwrap();
    let f1 = s1.counts.photon_emission as f64 / n as f64;
    let f2 = s2.counts.photon_emission as f64 / n as f64;
    let pbar = 0.5 * (f1 + f2);
    let sigma = (pbar * (1.0 - pbar) * 2.0 / n as f64).sqrt();
    println!(
        "photon-first fractions {f1:.3} vs {f2:.3} (3σ = {:.3})",
        3.0 * sigma
    );
    assert!((f1 - f2).abs() <= 3.0 * sigma);
}

/// The splitting is symmetric about the refined minimum to first order.
#[test]
fn splitting_symmetric_about_minimum() {
    let g = 1e-3;
    let space = FockSpace::new(6, 8).unwrap();
    let r0 = resonant_omega_c_for(g);
    let gap_at = |ratio: f64| {
        let p = ModelParams::new(ratio, g, 0.0, 0.0).unwrap();
        let eig = hermitian_eig(&build_exact(&p, &space).unwrap()).unwrap();
        let (lo, hi) = resonant_pair(&eig, &space);
        eig.eigenvalues[hi] - eig.eigenvalues[lo]
    };
    for d in [5e-7, 2e-6, 1e-5] {
        let plus = gap_at(r0 + d);
        let minus = gap_at(r0 - d);
        let asym = (plus - minus).abs() / plus.max(minus);
        println!("d = {d:.1e}: gap+ = {plus:.4e}, gap- = {minus:.4e}, asym = {asym:.2e}");
        assert!(asym < 0.02, "asymmetric splitting at offset {d}");
    }
}

/// Gross finite-difference steps are rejected, not silently smoothed over.
#[test]
fn qfi_rejects_ill_conditioned_step() {
    let g = 1e-3;
    let p = ModelParams::new(resonant_omega_c_for(g) + 3.9e-8, g, 0.0, 0.0).unwrap();
    let space = FockSpace::new(6, 8).unwrap();
    let psi0 = space.basis_state(0, 3).unwrap();
    match qfi_at(&p, &space, &psi0, 1.0077e8, 1e-2) {
        Err(Error::RichardsonMismatch { .. }) => {}
        other => panic!("expected RichardsonMismatch, got {other:?}"),
    }
    // and the production step is fine
    assert!(qfi_at(&p, &space, &psi0, 1.0077e8, DEFAULT_DELTA).is_ok());
}

/// QFI is non-negative across a sparse scan (up to numerical noise).
#[test]
fn qfi_nonnegative_over_scan() {
    let g = 1e-3;
    let p = ModelParams::new(resonant_omega_c_for(g), g, 0.0, 0.0).unwrap();
    let space = FockSpace::new(6, 8).unwrap();
    let scan = casimir_core::qfi::qfi_scan(
        &p,
        &space,
        resonant_omega_c_for(g) - 5e-7,
        resonant_omega_c_for(g) + 5e-7,
        11,
        1.0077e8,
        DEFAULT_DELTA,
    )
    .unwrap();
    let max = scan.qfi.iter().copied().fold(0.0f64, f64::max);
    for &f in &scan.qfi {
        assert!(f >= -1e-6 * max, "negative QFI {f:e}");
    }
}

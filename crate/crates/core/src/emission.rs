//! Ensemble classification: photon- vs phonon-emission trajectories, bundle
//! detection, first-emission excitation histograms, and the free-dissipation
//! baselines.
//!
//! A trajectory is a photon-emission (phonon-emission) trajectory according
//! to the channel of its first jump. A pair of same-channel jumps is a
//! bundle when their interval is below that channel's lifetime 1/γ; the
//! three-phonon bundle requires exactly three mechanical jumps with both
//! consecutive intervals below 1/γ_b.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::mcwf::{Channel, Engine, EngineSettings, TrajectoryRecord, Unraveling};
use crate::model::ModelParams;

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EmissionCounts {
    /// PtBE: trajectories whose first jump is a cavity jump.
    pub photon_emission: usize,
    /// PnBE: trajectories whose first jump is a mechanical jump.
    pub phonon_emission: usize,
    /// 2PtBE: some consecutive cavity-jump interval < 1/γ_a.
    pub two_photon_bundle: usize,
    /// 2PnBE: some consecutive mechanical-jump interval < 1/γ_b.
    pub two_phonon_bundle: usize,
    /// 3PnBE: exactly three mechanical jumps, both intervals < 1/γ_b.
    pub three_phonon_bundle: usize,
    /// Trajectories with no jump inside the horizon. Reported, never dropped.
    pub unclassified: usize,
}

/// Classification summary of one ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmissionStats {
    pub n_traj: usize,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub counts: EmissionCounts,
    /// Pre-jump ⟨a†a⟩ histogram of first jumps in the cavity channel,
    /// bin i covering [i·0.5, (i+1)·0.5).
    pub photon_first_histogram: Vec<usize>,
    /// Pre-jump ⟨b†b⟩ histogram of first jumps in the mechanical channel.
    pub phonon_first_histogram: Vec<usize>,
    /// Leakage guard: largest occupation seen on the highest photon/phonon
    /// level across the ensemble.
    pub max_top_photon: f64,
    pub max_top_phonon: f64,
}

impl EmissionStats {
    pub fn histogram_bin(value: f64, bins: &mut Vec<usize>) {
        let idx = (value / HISTOGRAM_BIN_WIDTH).floor() as usize;
        if bins.len() <= idx {
            bins.resize(idx + 1, 0);
        }
        bins[idx] += 1;
    }

    /// Count in the half-open excitation bin [lo, lo + 0.5).
    pub fn histogram_count(bins: &[usize], lo: f64) -> usize {
        let idx = (lo / HISTOGRAM_BIN_WIDTH).round() as usize;
        bins.get(idx).copied().unwrap_or(0)
    }

    pub fn write_histogram_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,photon_first_count,phonon_first_count")?;
        let n = self
            .photon_first_histogram
            .len()
            .max(self.phonon_first_histogram.len());
        for i in 0..n {
            writeln!(
                out,
                "{},{},{},{}",
                i as f64 * HISTOGRAM_BIN_WIDTH,
                (i + 1) as f64 * HISTOGRAM_BIN_WIDTH,
                self.photon_first_histogram.get(i).copied().unwrap_or(0),
                self.phonon_first_histogram.get(i).copied().unwrap_or(0),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("emission stats serialization cannot fail")
    }
}

fn bundle_flags(rec: &TrajectoryRecord, gamma_a: f64, gamma_b: f64) -> (bool, bool, bool) {
    let cav = rec.jump_times(Channel::Cavity);
    let mech = rec.jump_times(Channel::Mechanical);
    let lifetime_a = if gamma_a > 0.0 {
        1.0 / gamma_a
    } else {
        f64::INFINITY
    };
    let lifetime_b = if gamma_b > 0.0 {
        1.0 / gamma_b
    } else {
        f64::INFINITY
    };

    let two_photon = cav.windows(2).any(|w| w[1] - w[0] < lifetime_a);
    let two_phonon = mech.windows(2).any(|w| w[1] - w[0] < lifetime_b);
    let three_phonon = mech.len() == 3 && mech.windows(2).all(|w| w[1] - w[0] < lifetime_b);
    (two_photon, two_phonon, three_phonon)
}

/// Reduce an ensemble into emission statistics. All records must share
/// parameters (one physical configuration per ensemble).
pub fn classify(records: &[TrajectoryRecord]) -> Result<EmissionStats> {
    if records.is_empty() {
        return Err(Error::MixedEnsemble("empty ensemble".into()));
    }
    let p0 = records[0].params;
    if records.iter().any(|r| r.params != p0) {
        return Err(Error::MixedEnsemble(
            "records carry different model parameters".into(),
        ));
    }

    let mut counts = EmissionCounts::default();
    let mut photon_hist: Vec<usize> = Vec::new();
    let mut phonon_hist: Vec<usize> = Vec::new();
    let mut max_top = (0.0f64, 0.0f64);

    for rec in records {
        max_top.0 = max_top.0.max(rec.max_top_photon);
        max_top.1 = max_top.1.max(rec.max_top_phonon);
        match rec.first_jump() {
            None => counts.unclassified += 1,
            Some(first) => {
                match first.channel {
                    Channel::Cavity => {
                        counts.photon_emission += 1;
                        EmissionStats::histogram_bin(first.pre_jump_photons, &mut photon_hist);
                    }
                    Channel::Mechanical => {
                        counts.phonon_emission += 1;
                        EmissionStats::histogram_bin(first.pre_jump_phonons, &mut phonon_hist);
                    }
                }
                let (two_pt, two_pn, three_pn) = bundle_flags(rec, p0.gamma_a, p0.gamma_b);
                if two_pt {
                    counts.two_photon_bundle += 1;
                }
                if two_pn {
                    counts.two_phonon_bundle += 1;
                }
                if three_pn {
                    counts.three_phonon_bundle += 1;
                }
            }
        }
    }

    Ok(EmissionStats {
        n_traj: records.len(),
        gamma_a: p0.gamma_a,
        gamma_b: p0.gamma_b,
        counts,
        photon_first_histogram: photon_hist,
        phonon_first_histogram: phonon_hist,
        max_top_photon: max_top.0,
        max_top_phonon: max_top.1,
    })
}

/// Production ensembles over a list of γ_b/γ_a ratios with γ_a pinned,
/// classified per ratio. Ensemble i runs with master seed `master_seed + i`.
pub fn rate_scan(
    p_base: &ModelParams,
    space: &FockSpace,
    ratios: &[f64],
    n_traj: usize,
    master_seed: u64,
) -> Result<Vec<EmissionStats>> {
    if ratios.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Invalid("rate ratios must be positive".into()));
    }
    let psi0 = space.basis_state(0, 3)?;
    let mut out = Vec::with_capacity(ratios.len());
    for (i, &ratio) in ratios.iter().enumerate() {
        let p = ModelParams {
            gamma_b: p_base.gamma_a * ratio,
            ..*p_base
        };
        let settings = EngineSettings::production(&p)?;
        let engine = Engine::new(&p, space, settings)?;
        let records = engine.run_ensemble(&psi0, master_seed + i as u64, n_traj)?;
        out.push(classify(&records)?);
    }
    Ok(out)
}

/// Pure-decay ensemble (g = 0) from the given Fock state; the death-chain
/// oracle configuration of the bundle classifier.
pub fn free_dissipation_baseline(
    initial: (usize, usize),
    gamma_a: f64,
    gamma_b: f64,
    n_traj: usize,
    master_seed: u64,
) -> Result<EmissionStats> {
    let (n0, k0) = initial;
    let space = FockSpace::new(n0 + 1, k0 + 1)?;
    let p = ModelParams::new(1.5, 0.0, gamma_a, gamma_b)?;
    let gamma = gamma_a.max(gamma_b);
    if gamma <= 0.0 {
        return Err(Error::Invalid(
            "free dissipation needs a positive rate".into(),
        ));
    }
    let t_final = 5.0 / gamma;
    let settings = EngineSettings {
        frame: crate::dynamics::Frame::EffectiveRotating,
        unraveling: Unraveling::WaitingTime,
        t_final,
        dt: t_final / 1000.0,
        n_samples: 2,
        bisection_rel_tol: crate::mcwf::DEFAULT_BISECTION_REL_TOL,
    };
    let engine = Engine::new(&p, &space, settings)?;
    let psi0 = space.basis_state(n0, k0)?;
    let records = engine.run_ensemble(&psi0, master_seed, n_traj)?;
    classify(&records)
}

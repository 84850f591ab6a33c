//! Experiment execution and artifact writing.
//!
//! Every run writes into one output directory: the data files for its
//! experiment family, `config.resolved.cfg` (the full configuration with
//! defaults filled, re-parseable), and `manifest.json` (code version, wall
//! time, RNG scheme, seed, truncation-leakage report). Nothing is written
//! anywhere else.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use casimir_core::dynamics::fidelity_trace;
use casimir_core::emission::{classify, rate_scan, EmissionStats};
use casimir_core::mcwf::{Engine, EngineSettings, TrajectoryRecord, RNG_ALGORITHM};
use casimir_core::model::ModelParams;
use casimir_core::qfi::qfi_scan;
use casimir_core::spectra::{min_splitting, sweep};

use crate::config::{ExperimentConfig, ExperimentSpec};

pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Data the figure checks consume, kept in memory so `reproduce` does not
    /// re-read its own files.
    pub artifacts: Artifacts,
}

#[derive(Default)]
pub struct Artifacts {
    pub sweep: Option<casimir_core::spectra::SpectrumSweep>,
    pub fidelity_minima: Vec<(f64, f64)>,
    pub records: Vec<TrajectoryRecord>,
    pub emission: Option<EmissionStats>,
    pub scan_stats: Vec<EmissionStats>,
    pub qfi: Option<casimir_core::qfi::QfiScan>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    code_version: &'static str,
    experiment: &'a str,
    wall_time_s: f64,
    rng_algorithm: &'static str,
    master_seed: Option<u64>,
    /// Largest occupation seen on the highest photon/phonon levels across the
    /// run; values above 1e-6 mean the cutoffs are too tight.
    leakage_max_top_photon: f64,
    leakage_max_top_phonon: f64,
    leakage_warning: bool,
    resolved_config: &'static str,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    fs::write(dir.join(name), contents)
}

pub fn run(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunOutcome, String> {
    fs::create_dir_all(out_dir).map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let started = Instant::now();
    let mut artifacts = Artifacts::default();
    let mut master_seed = None;
    let mut leakage = (0.0f64, 0.0f64);

    match &config.spec {
        ExperimentSpec::Spectrum(c) => {
            let sw = sweep(
                &config.params,
                &config.space,
                c.ratio_lo,
                c.ratio_hi,
                c.n_samples,
            )
            .map_err(|e| e.to_string())?;
            let mut csv = Vec::new();
            sw.write_csv(&mut csv).map_err(|e| e.to_string())?;
            write_file(out_dir, "sweep.csv", std::str::from_utf8(&csv).unwrap())
                .map_err(|e| e.to_string())?;
            let (ratio, gap) = min_splitting(&sw).map_err(|e| e.to_string())?;
            let summary = serde_json::json!({
                "min_splitting_ratio": ratio,
                "min_splitting": gap,
                "n_samples": sw.samples.len(),
            });
            write_file(
                out_dir,
                "summary.json",
                &serde_json::to_string_pretty(&summary).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            leakage = (sw.max_top_photon, sw.max_top_phonon);
            artifacts.sweep = Some(sw);
        }
        ExperimentSpec::Fidelity(c) => {
            let psi0 = config.space.basis_state(0, 3).map_err(|e| e.to_string())?;
            let mut minima = Vec::new();
            for &g in &c.couplings {
                let p = ModelParams::new(config.params.omega_c, g, 0.0, 0.0)
                    .map_err(|e| e.to_string())?;
                let tr = fidelity_trace(&p, &config.space, &psi0, c.t_final, c.n_samples)
                    .map_err(|e| e.to_string())?;
                let mut csv = Vec::new();
                tr.write_csv(&mut csv).map_err(|e| e.to_string())?;
                write_file(
                    out_dir,
                    &format!("fidelity_g{g}.csv"),
                    std::str::from_utf8(&csv).unwrap(),
                )
                .map_err(|e| e.to_string())?;
                leakage.0 = leakage.0.max(tr.max_top_photon);
                leakage.1 = leakage.1.max(tr.max_top_phonon);
                minima.push((g, tr.min_fidelity()));
            }
            let summary = serde_json::json!({
                "minima": minima.iter().map(|(g, f)| serde_json::json!({"g": g, "min_fidelity": f})).collect::<Vec<_>>(),
            });
            write_file(
                out_dir,
                "summary.json",
                &serde_json::to_string_pretty(&summary).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            artifacts.fidelity_minima = minima;
        }
        ExperimentSpec::Trajectories(c) => {
            let seed = seed_override.unwrap_or(c.master_seed);
            master_seed = Some(seed);
            let settings = EngineSettings {
                frame: c.frame,
                unraveling: c.unraveling,
                t_final: c.t_final,
                dt: c.dt,
                n_samples: c.n_samples,
                bisection_rel_tol: casimir_core::mcwf::DEFAULT_BISECTION_REL_TOL,
            };
            let engine =
                Engine::new(&config.params, &config.space, settings).map_err(|e| e.to_string())?;
            let psi0 = config.space.basis_state(0, 3).map_err(|e| e.to_string())?;
            let records = engine
                .run_ensemble(&psi0, seed, c.n_traj)
                .map_err(|e| e.to_string())?;

            let mut jsonl = Vec::new();
            casimir_core::mcwf::write_json_lines(&records, &mut jsonl)
                .map_err(|e| e.to_string())?;
            write_file(
                out_dir,
                "trajectories.jsonl",
                std::str::from_utf8(&jsonl).unwrap(),
            )
            .map_err(|e| e.to_string())?;

            // expectation trace of the first trajectory, plot-ready
            let mut csv = String::from("t,n_photon,n_phonon\n");
            if let Some(rec) = records.first() {
                for i in 0..rec.times.len() {
                    csv.push_str(&format!(
                        "{:.17e},{:.17e},{:.17e}\n",
                        rec.times[i], rec.photons[i], rec.phonons[i]
                    ));
                }
            }
            write_file(out_dir, "expectations.csv", &csv).map_err(|e| e.to_string())?;

            for r in &records {
                leakage.0 = leakage.0.max(r.max_top_photon);
                leakage.1 = leakage.1.max(r.max_top_phonon);
            }
            let stats = classify(&records).map_err(|e| e.to_string())?;
            let mut hist_csv = Vec::new();
            stats
                .write_histogram_csv(&mut hist_csv)
                .map_err(|e| e.to_string())?;
            write_file(
                out_dir,
                "first_emission_histogram.csv",
                std::str::from_utf8(&hist_csv).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            write_file(out_dir, "summary.json", &stats.to_json()).map_err(|e| e.to_string())?;
            artifacts.records = records;
            artifacts.emission = Some(stats);
        }
        ExperimentSpec::EmissionScan(c) => {
            let seed = seed_override.unwrap_or(c.master_seed);
            master_seed = Some(seed);
            let stats = rate_scan(&config.params, &config.space, &c.ratios, c.n_traj, seed)
                .map_err(|e| e.to_string())?;
            let mut csv = String::from(
                "gamma_b_over_gamma_a,n_traj,photon_emission,phonon_emission,two_photon_bundle,two_phonon_bundle,three_phonon_bundle,unclassified\n",
            );
            for (ratio, s) in c.ratios.iter().zip(stats.iter()) {
                csv.push_str(&format!(
                    "{ratio},{},{},{},{},{},{},{}\n",
                    s.n_traj,
                    s.counts.photon_emission,
                    s.counts.phonon_emission,
                    s.counts.two_photon_bundle,
                    s.counts.two_phonon_bundle,
                    s.counts.three_phonon_bundle,
                    s.counts.unclassified
                ));
            }
            write_file(out_dir, "rate_scan.csv", &csv).map_err(|e| e.to_string())?;
            for s in &stats {
                leakage.0 = leakage.0.max(s.max_top_photon);
                leakage.1 = leakage.1.max(s.max_top_phonon);
            }
            let summary = serde_json::json!({
                "ratios": c.ratios,
                "stats": stats,
            });
            write_file(
                out_dir,
                "summary.json",
                &serde_json::to_string_pretty(&summary).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            artifacts.scan_stats = stats;
        }
        ExperimentSpec::Qfi(c) => {
            let scan = qfi_scan(
                &config.params,
                &config.space,
                c.omega_lo,
                c.omega_hi,
                c.n_samples,
                c.t_final,
                c.delta,
            )
            .map_err(|e| e.to_string())?;
            let mut csv = Vec::new();
            scan.write_csv(&mut csv).map_err(|e| e.to_string())?;
            write_file(out_dir, "qfi_scan.csv", std::str::from_utf8(&csv).unwrap())
                .map_err(|e| e.to_string())?;
            let (peak_loc, peak_val) = scan.peak().map_err(|e| e.to_string())?;
            let summary = serde_json::json!({
                "peak_omega_c": peak_loc,
                "peak_qfi": peak_val,
                "t_final": c.t_final,
                "delta": c.delta,
            });
            write_file(
                out_dir,
                "summary.json",
                &serde_json::to_string_pretty(&summary).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            leakage = (scan.max_top_photon, scan.max_top_phonon);
            artifacts.qfi = Some(scan);
        }
    }

    write_file(out_dir, "config.resolved.cfg", &config.render_resolved())
        .map_err(|e| e.to_string())?;
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        experiment: config.kind.name(),
        wall_time_s: started.elapsed().as_secs_f64(),
        rng_algorithm: RNG_ALGORITHM,
        master_seed,
        leakage_max_top_photon: leakage.0,
        leakage_max_top_phonon: leakage.1,
        leakage_warning: leakage.0 > 1e-6 || leakage.1 > 1e-6,
        resolved_config: "config.resolved.cfg",
    };
    let mut f = fs::File::create(out_dir.join("manifest.json")).map_err(|e| e.to_string())?;
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| e.to_string())?;
    if manifest.leakage_warning {
        eprintln!(
            "warning: truncation leakage {:.2e} (photon) / {:.2e} (phonon) exceeds 1e-6; raise the cutoffs",
            leakage.0, leakage.1
        );
    }

    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        artifacts,
    })
}

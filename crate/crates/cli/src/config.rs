//! Flat key-value experiment configs with `[section]` grouping.
//!
//! All frequencies and rates are dimensionless multiples of ω_m, times are in
//! 1/ω_m. `#` starts a comment. Unknown keys are rejected with their full
//! path so typos cannot silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;

use casimir_core::dynamics::Frame;
use casimir_core::fock::FockSpace;
use casimir_core::mcwf::Unraveling;
use casimir_core::model::{resonant_omega_c_for, ModelParams};

#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Raw parsed sections: section -> key -> value. The root section is "".
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    consumed: std::cell::RefCell<Vec<(String, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        sections.entry(current.clone()).or_default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(i) => &raw_line[..i],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    err(&format!("line {}", lineno + 1), "unterminated [section]")
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(err(
                    &format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() {
                return Err(err(&format!("line {}", lineno + 1), "empty key"));
            }
            let section = sections.entry(current.clone()).or_default();
            if section.insert(key.clone(), value).is_some() {
                let path = if current.is_empty() {
                    key
                } else {
                    format!("{current}.{key}")
                };
                return Err(err(&path, "duplicate key"));
            }
        }
        Ok(RawConfig {
            sections,
            consumed: Default::default(),
        })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        let v = self.sections.get(section)?.get(key)?;
        self.consumed
            .borrow_mut()
            .push((section.to_string(), key.to_string()));
        Some(v.as_str())
    }

    fn path(section: &str, key: &str) -> String {
        if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        }
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key)
            .ok_or_else(|| err(&Self::path(section, key), "missing required field"))
    }

    fn parse_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(&Self::path(section, key), format!("invalid number `{s}`"))),
        }
    }

    fn require_f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.require(section, key)?;
        self.consumed.borrow_mut().pop();
        self.parse_f64(section, key)?
            .ok_or_else(|| err(&Self::path(section, key), "missing required field"))
    }

    fn parse_usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| err(&Self::path(section, key), format!("invalid integer `{s}`"))),
        }
    }

    fn parse_u64(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| err(&Self::path(section, key), format!("invalid integer `{s}`"))),
        }
    }

    /// "auto" or a number; None means the key is absent (also auto).
    fn parse_auto_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some("auto") => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|_| {
                err(
                    &Self::path(section, key),
                    format!("invalid number `{s}` (or `auto`)"),
                )
            }),
        }
    }

    fn parse_f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => {
                let mut out = Vec::new();
                for item in s.split(',') {
                    let item = item.trim();
                    out.push(item.parse::<f64>().map_err(|_| {
                        err(
                            &Self::path(section, key),
                            format!("invalid number `{item}` in list"),
                        )
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Reject any key that was never consumed by the schema.
    fn check_unknown(&self) -> Result<(), ConfigError> {
        let consumed = self.consumed.borrow();
        for (section, keys) in &self.sections {
            for key in keys.keys() {
                let used = consumed.iter().any(|(s, k)| s == section && k == key);
                if !used {
                    return Err(err(&Self::path(section, key), "unknown field"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    Spectrum,
    Fidelity,
    Trajectories,
    EmissionScan,
    Qfi,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Fidelity => "fidelity",
            ExperimentKind::Trajectories => "trajectories",
            ExperimentKind::EmissionScan => "emission-scan",
            ExperimentKind::Qfi => "qfi",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumConfig {
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone)]
pub struct FidelityConfig {
    pub t_final: f64,
    pub n_samples: usize,
    pub couplings: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrajectoriesConfig {
    pub n_traj: usize,
    pub t_final: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub master_seed: u64,
    pub frame: Frame,
    pub unraveling: Unraveling,
}

#[derive(Debug, Clone)]
pub struct EmissionScanConfig {
    pub ratios: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct QfiConfig {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub n_samples: usize,
    pub t_final: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub enum ExperimentSpec {
    Spectrum(SpectrumConfig),
    Fidelity(FidelityConfig),
    Trajectories(TrajectoriesConfig),
    EmissionScan(EmissionScanConfig),
    Qfi(QfiConfig),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub out_dir: Option<String>,
    pub params: ModelParams,
    pub space: FockSpace,
    pub spec: ExperimentSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;

        let kind = match raw.require("", "experiment")? {
            "spectrum" => ExperimentKind::Spectrum,
            "fidelity" => ExperimentKind::Fidelity,
            "trajectories" => ExperimentKind::Trajectories,
            "emission-scan" => ExperimentKind::EmissionScan,
            "qfi" => ExperimentKind::Qfi,
            other => {
                return Err(err(
                    "experiment",
                    format!("unknown experiment `{other}` (spectrum|fidelity|trajectories|emission-scan|qfi)"),
                ))
            }
        };
        let out_dir = raw.get("", "out_dir").map(|s| s.to_string());

        let g = raw.require_f64("model", "g")?;
        let omega_c = match raw.get("model", "omega_c") {
            Some("resonant") | None => resonant_omega_c_for(g),
            Some(s) => s.parse::<f64>().map_err(|_| {
                err(
                    "model.omega_c",
                    format!("invalid number `{s}` (or `resonant`)"),
                )
            })?,
        };
        let gamma_a = raw.parse_f64("model", "gamma_a")?.unwrap_or(0.0);
        let gamma_b = raw.parse_f64("model", "gamma_b")?.unwrap_or(0.0);
        let params = ModelParams::new(omega_c, g, gamma_a, gamma_b)
            .map_err(|e| err("model", e.to_string()))?;

        let n_cav = raw.parse_usize("space", "n_cav")?.unwrap_or(6);
        let n_mech = raw.parse_usize("space", "n_mech")?.unwrap_or(8);
        let space = FockSpace::new(n_cav, n_mech).map_err(|e| err("space", e.to_string()))?;

        let spec = match kind {
            ExperimentKind::Spectrum => {
                let s = "spectrum";
                ExperimentSpec::Spectrum(SpectrumConfig {
                    ratio_lo: raw.parse_f64(s, "ratio_lo")?.unwrap_or(1.4995),
                    ratio_hi: raw.parse_f64(s, "ratio_hi")?.unwrap_or(1.5005),
                    n_samples: raw.parse_usize(s, "n_samples")?.unwrap_or(201),
                })
            }
            ExperimentKind::Fidelity => {
                let s = "fidelity";
                ExperimentSpec::Fidelity(FidelityConfig {
                    t_final: raw.parse_f64(s, "t_final")?.unwrap_or(1.0077e8),
                    n_samples: raw.parse_usize(s, "n_samples")?.unwrap_or(2001),
                    couplings: raw
                        .parse_f64_list(s, "couplings")?
                        .unwrap_or_else(|| vec![g]),
                })
            }
            ExperimentKind::Trajectories => {
                let s = "trajectories";
                let gamma = gamma_a.max(gamma_b);
                let rabi = params.effective_rabi();
                let t_final = match raw.parse_auto_f64(s, "t_final")? {
                    Some(v) => v,
                    None if gamma > 0.0 => 5.0 / gamma,
                    None => {
                        return Err(err(
                            "trajectories.t_final",
                            "required when both rates are zero",
                        ))
                    }
                };
                let dt = match raw.parse_auto_f64(s, "dt")? {
                    Some(v) => v,
                    None if rabi > 0.0 => (std::f64::consts::TAU / rabi) / 2000.0,
                    None => t_final / 2000.0,
                };
                let frame = match raw.get(s, "frame") {
                    Some("rotating") | None => Frame::EffectiveRotating,
                    Some("exact") => Frame::Exact,
                    Some(other) => {
                        return Err(err(
                            "trajectories.frame",
                            format!("`{other}` is not rotating|exact"),
                        ))
                    }
                };
                let unraveling = match raw.get(s, "unraveling") {
                    Some("waiting-time") | None => Unraveling::WaitingTime,
                    Some("per-step") => Unraveling::PerStep,
                    Some(other) => {
                        return Err(err(
                            "trajectories.unraveling",
                            format!("`{other}` is not waiting-time|per-step"),
                        ))
                    }
                };
                ExperimentSpec::Trajectories(TrajectoriesConfig {
                    n_traj: raw.parse_usize(s, "n_traj")?.unwrap_or(500),
                    t_final,
                    dt,
                    n_samples: raw.parse_usize(s, "n_samples")?.unwrap_or(401),
                    master_seed: raw.parse_u64(s, "master_seed")?.unwrap_or(42),
                    frame,
                    unraveling,
                })
            }
            ExperimentKind::EmissionScan => {
                let s = "emission-scan";
                ExperimentSpec::EmissionScan(EmissionScanConfig {
                    ratios: raw
                        .parse_f64_list(s, "ratios")?
                        .unwrap_or_else(|| vec![5.0, 1.0, 0.2]),
                    n_traj: raw.parse_usize(s, "n_traj")?.unwrap_or(500),
                    master_seed: raw.parse_u64(s, "master_seed")?.unwrap_or(42),
                })
            }
            ExperimentKind::Qfi => {
                let s = "qfi";
                let res = resonant_omega_c_for(g);
                ExperimentSpec::Qfi(QfiConfig {
                    omega_lo: raw.parse_auto_f64(s, "omega_lo")?.unwrap_or(res - 1e-6),
                    omega_hi: raw.parse_auto_f64(s, "omega_hi")?.unwrap_or(res + 1e-6),
                    n_samples: raw.parse_usize(s, "n_samples")?.unwrap_or(201),
                    t_final: raw.parse_f64(s, "t_final")?.unwrap_or(1.0077e8),
                    delta: raw.parse_f64(s, "delta")?.unwrap_or(1e-12),
                })
            }
        };

        raw.check_unknown()?;
        Ok(ExperimentConfig {
            kind,
            out_dir,
            params,
            space,
            spec,
        })
    }

    /// Every default resolved, echoed in the same format the parser reads.
    pub fn render_resolved(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("experiment = {}\n", self.kind.name()));
        if let Some(dir) = &self.out_dir {
            out.push_str(&format!("out_dir = {dir}\n"));
        }
        out.push_str(
            "\n# frequencies and rates in units of omega_m; times in 1/omega_m\n[model]\n",
        );
        out.push_str(&format!("omega_c = {:.17e}\n", self.params.omega_c));
        out.push_str(&format!("g = {:.17e}\n", self.params.g));
        out.push_str(&format!("gamma_a = {:.17e}\n", self.params.gamma_a));
        out.push_str(&format!("gamma_b = {:.17e}\n", self.params.gamma_b));
        out.push_str("\n[space]\n");
        out.push_str(&format!(
            "n_cav = {}\nn_mech = {}\n",
            self.space.n_cav, self.space.n_mech
        ));
        match &self.spec {
            ExperimentSpec::Spectrum(c) => {
                out.push_str("\n[spectrum]\n");
                out.push_str(&format!(
                    "ratio_lo = {:.17e}\nratio_hi = {:.17e}\nn_samples = {}\n",
                    c.ratio_lo, c.ratio_hi, c.n_samples
                ));
            }
            ExperimentSpec::Fidelity(c) => {
                out.push_str("\n[fidelity]\n");
                out.push_str(&format!(
                    "t_final = {:.17e}\nn_samples = {}\n",
                    c.t_final, c.n_samples
                ));
                let list = c
                    .couplings
                    .iter()
                    .map(|g| format!("{g:e}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push_str(&format!("couplings = {list}\n"));
            }
            ExperimentSpec::Trajectories(c) => {
                out.push_str("\n[trajectories]\n");
                out.push_str(&format!(
                    "n_traj = {}\nt_final = {:.17e}\ndt = {:.17e}\nn_samples = {}\nmaster_seed = {}\n",
                    c.n_traj, c.t_final, c.dt, c.n_samples, c.master_seed
                ));
                out.push_str(&format!(
                    "frame = {}\n",
                    match c.frame {
                        Frame::EffectiveRotating => "rotating",
                        Frame::Exact => "exact",
                    }
                ));
                out.push_str(&format!(
                    "unraveling = {}\n",
                    match c.unraveling {
                        Unraveling::WaitingTime => "waiting-time",
                        Unraveling::PerStep => "per-step",
                    }
                ));
            }
            ExperimentSpec::EmissionScan(c) => {
                out.push_str("\n[emission-scan]\n");
                let list = c
                    .ratios
                    .iter()
                    .map(|r| format!("{r}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push_str(&format!(
                    "ratios = {list}\nn_traj = {}\nmaster_seed = {}\n",
                    c.n_traj, c.master_seed
                ));
            }
            ExperimentSpec::Qfi(c) => {
                out.push_str("\n[qfi]\n");
                out.push_str(&format!(
                    "omega_lo = {:.17e}\nomega_hi = {:.17e}\nn_samples = {}\nt_final = {:.17e}\ndelta = {:.17e}\n",
                    c.omega_lo, c.omega_hi, c.n_samples, c.t_final, c.delta
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_trajectories_config() {
        let cfg = ExperimentConfig::parse(
            "experiment = trajectories\n[model]\ng = 0.001\ngamma_a = 1e-9\ngamma_b = 1e-9\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Trajectories);
        assert!((cfg.params.omega_c - 1.5000105).abs() < 1e-12);
        match cfg.spec {
            ExperimentSpec::Trajectories(t) => {
                assert_eq!(t.n_traj, 500);
                assert!((t.t_final - 5e9).abs() < 1.0);
                assert_eq!(t.master_seed, 42);
            }
            other => panic!("wrong spec {other:?}"),
        }
    }

    #[test]
    fn missing_required_field_names_it() {
        let e =
            ExperimentConfig::parse("experiment = spectrum\n[model]\nomega_c = 1.5\n").unwrap_err();
        assert_eq!(e.path, "model.g");
    }

    #[test]
    fn unknown_field_rejected_with_path() {
        let e = ExperimentConfig::parse(
            "experiment = spectrum\n[model]\ng = 0.001\n[spectrum]\nn_smaples = 7\n",
        )
        .unwrap_err();
        assert_eq!(e.path, "spectrum.n_smaples");
    }

    #[test]
    fn bad_number_rejected_with_path() {
        let e = ExperimentConfig::parse("experiment = qfi\n[model]\ng = fast\n").unwrap_err();
        assert_eq!(e.path, "model.g");
    }

    #[test]
    fn resolved_render_round_trips() {
        let cfg = ExperimentConfig::parse(
            "experiment = emission-scan\nout_dir = out/x\n[model]\ng = 0.001\ngamma_a = 1e-9\ngamma_b = 1e-9\n",
        )
        .unwrap();
        let echoed = cfg.render_resolved();
        let again = ExperimentConfig::parse(&echoed).unwrap();
        assert_eq!(again.kind, ExperimentKind::EmissionScan);
        assert_eq!(again.params, cfg.params);
        assert_eq!(again.render_resolved(), echoed);
    }
}

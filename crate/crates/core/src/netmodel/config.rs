//! Side-car network configuration: which case file to load, which branches
//! carry switches and where PV plants sit.
//!
//! ```toml
//! case = "case33bw.m"
//! name = "case33"
//! switchable = [33, 34, 35, 36, 37, 7, 9, 14, 28, 32]   # 1-based branch rows
//! pf_min = 0.95
//!
//! [[pv]]
//! bus = 18
//! capacity_mw = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::case::{parse_matpower_case_with, ParseOptions};
use super::{augment_pv_with_pf, Network, NetworkError, DEFAULT_PF_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvPlacement {
    /// Case-file bus number.
    pub bus: usize,
    /// Converter capacity in MVA; converted with the case base.
    #[serde(default)]
    pub capacity_mw: Option<f64>,
    /// Converter capacity directly in p.u.
    #[serde(default)]
    pub capacity_pu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Case file, relative to the config file.
    pub case: PathBuf,
    #[serde(default)]
    pub name: Option<String>,
    /// 1-based branch-table rows that carry a switch.
    #[serde(default)]
    pub switchable: Vec<usize>,
    #[serde(default)]
    pub pv: Vec<PvPlacement>,
    #[serde(default = "default_pf")]
    pub pf_min: f64,
    /// Flow bound (p.u.) for lines without a rating.
    #[serde(default)]
    pub default_flow_bound: Option<f64>,
}

fn default_pf() -> f64 {
    DEFAULT_PF_MIN
}

impl NetworkConfig {
    pub fn from_toml(text: &str) -> Result<Self, NetworkError> {
        toml::from_str(text).map_err(|e| NetworkError::Config(e.to_string()))
    }

    /// Builds the network from already-loaded case text.
    pub fn apply(&self, case_text: &str) -> Result<Network, NetworkError> {
        let mut opts = ParseOptions::default();
        if let Some(bound) = self.default_flow_bound {
            opts.default_flow_bound = bound;
        }
        let mut net = parse_matpower_case_with(case_text, &opts)?;
        if let Some(name) = &self.name {
            net.name = name.clone();
        } else if let Some(stem) = self.case.file_stem() {
            net.name = stem.to_string_lossy().into_owned();
        }
        for &row in &self.switchable {
            if row == 0 || row > net.lines.len() {
                return Err(NetworkError::UnknownLine(row));
            }
            net.lines[row - 1].switchable = true;
        }
        let mut placements = Vec::with_capacity(self.pv.len());
        for p in &self.pv {
            let capacity = match (p.capacity_mw, p.capacity_pu) {
                (Some(mw), None) => mw / net.base_mva,
                (None, Some(pu)) => pu,
                _ => {
                    return Err(NetworkError::Config(format!(
                        "PV at bus {} needs exactly one of capacity_mw / capacity_pu",
                        p.bus
                    )))
                }
            };
            placements.push((p.bus, capacity));
        }
        let net = augment_pv_with_pf(&net, &placements, self.pf_min)?;
        net.check()?;
        Ok(net)
    }
}

/// Reads a side-car config and the case file it points to.
pub fn load_network(config_path: &Path) -> Result<Network, NetworkError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        NetworkError::Config(format!("cannot read {}: {e}", config_path.display()))
    })?;
    let cfg = NetworkConfig::from_toml(&text)?;
    let case_path = config_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&cfg.case);
    let case_text = std::fs::read_to_string(&case_path).map_err(|e| {
        NetworkError::Config(format!("cannot read case {}: {e}", case_path.display()))
    })?;
    cfg.apply(&case_text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switchable_rows_and_pv() {
        let cfg = NetworkConfig::from_toml(
            r#"
            case = "case33bw.m"
            switchable = [33, 37]
            [[pv]]
            bus = 18
            capacity_mw = 1.0
            [[pv]]
            bus = 33
            capacity_pu = 0.05
            "#,
        )
        .unwrap();
        let net = cfg
            .apply(include_str!("../../../../data/case33bw.m"))
            .unwrap();
        assert_eq!(net.name, "case33bw");
        assert_eq!(net.switchable_lines(), vec![32, 36]);
        assert_eq!(net.pv_plants.len(), 2);
        assert!((net.pv_plants[0].s_max - 0.1).abs() < 1e-15);
        assert_eq!(net.pv_plants[1].s_max, 0.05);
    }

    #[test]
    fn bad_switch_row() {
        let cfg = NetworkConfig::from_toml("case = \"x.m\"\nswitchable = [38]").unwrap();
        assert!(matches!(
            cfg.apply(include_str!("../../../../data/case33bw.m")),
            Err(NetworkError::UnknownLine(38))
        ));
    }
}

//! Scenario configuration: every constant of the simulated cell in one
//! validated, serializable struct.
//!
//! Configs load from a TOML document with two optional sections, `[network]`
//! and `[noise]`. Absent keys take the defaults below; unknown keys are
//! rejected. A loaded config round-trips through serialization unchanged.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::noise::NoiseConfig;

/// The three standardized service categories of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SliceKind {
    Urllc,
    Embb,
    Mmtc,
}

impl SliceKind {
    /// URLLC and eMBB UEs appear in the observation vector; mMTC devices are
    /// handled slice-wise and never observed per device.
    pub fn is_observed(self) -> bool {
        !matches!(self, SliceKind::Mmtc)
    }
}

impl std::fmt::Display for SliceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SliceKind::Urllc => write!(f, "urllc"),
            SliceKind::Embb => write!(f, "embb"),
            SliceKind::Mmtc => write!(f, "mmtc"),
        }
    }
}

/// All scenario constants of the simulated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// PRB budget per decision epoch.
    pub n_prb: u32,
    /// URLLC UE count.
    pub n_urllc: u32,
    /// eMBB UE count.
    pub n_embb: u32,
    /// mMTC device count.
    pub n_mmtc: u32,
    /// Side of the square simulation area in meters; the base station sits at
    /// the center.
    pub area_side_m: f64,
    /// Carrier frequency in MHz.
    pub carrier_freq_mhz: f64,
    /// Calibration offset added to the free-space pathloss, in dB.
    pub cal_offset_db: f64,
    /// URLLC latency SLA in milliseconds.
    pub latency_sla_ms: f64,
    /// eMBB throughput SLA in Mbps.
    pub throughput_sla_mbps: f64,
    /// Per-slice reward weights (URLLC, eMBB, mMTC); must sum to 1.
    pub reward_weights: [f64; 3],
    /// Bernoulli probability of a URLLC packet arrival per UE per epoch.
    pub urllc_arrival_p: f64,
    /// Closed interval for uniform URLLC packet sizes, in kbits.
    pub urllc_pkt_kbits: [f64; 2],
    /// Mean of the per-step Gaussian eMBB demand, in Mbps.
    pub embb_mean_mbps: f64,
    /// Standard deviation of the per-step eMBB demand, in Mbps.
    pub embb_std_mbps: f64,
    /// PRBs consumed by each serviced mMTC device.
    pub mmtc_prb_per_device: u32,
    /// Steps per episode.
    pub episode_len: u32,
    /// Duration of one decision epoch in milliseconds.
    pub epoch_ms: f64,
    /// Spectral efficiency factor of the Shannon fallback.
    pub eta: f64,
    /// Per-PRB bandwidth in kHz (12 subcarriers at 30 kHz SCS).
    pub prb_bw_khz: f64,
    /// Minimum PRBs any slice receives in a valid action.
    pub min_prb_per_slice: u32,
    /// Link budget of the Shannon fallback: SINR_dB = link_budget_db - PL_dB.
    pub link_budget_db: f64,
    /// SINR ceiling in dB (MCS ceiling).
    pub sinr_cap_db: f64,
    /// SINR floor in dB; at or below it the link is in outage.
    pub sinr_floor_db: f64,
    /// Random-walk step length per epoch in meters.
    pub mobility_step_m: f64,
    /// Lower distance clamp for pathloss evaluation, in meters.
    pub d_min_m: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_prb: 106,
            n_urllc: 2,
            n_embb: 2,
            n_mmtc: 10,
            area_side_m: 1500.0,
            carrier_freq_mhz: 3500.0,
            cal_offset_db: 83.84,
            latency_sla_ms: 400.0,
            throughput_sla_mbps: 7.0,
            reward_weights: [0.5, 0.4, 0.1],
            urllc_arrival_p: 0.9,
            urllc_pkt_kbits: [1500.0, 4000.0],
            embb_mean_mbps: 7.0,
            embb_std_mbps: 0.7,
            mmtc_prb_per_device: 5,
            episode_len: 256,
            epoch_ms: 100.0,
            eta: 0.7,
            prb_bw_khz: 360.0,
            min_prb_per_slice: 10,
            link_budget_db: 190.0,
            sinr_cap_db: 30.0,
            sinr_floor_db: -5.0,
            mobility_step_m: 15.0,
            d_min_m: 10.0,
        }
    }
}

impl NetworkConfig {
    /// Number of observed UEs (URLLC + eMBB).
    pub fn n_observed(&self) -> u32 {
        self.n_urllc + self.n_embb
    }

    /// Observation vector length: three entries per observed UE.
    pub fn obs_dim(&self) -> usize {
        3 * self.n_observed() as usize
    }

    /// Largest UE-to-gNB distance in the area: half the square's diagonal.
    pub fn d_max_m(&self) -> f64 {
        self.area_side_m * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Checks every invariant and returns all violations, not only the first.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut bad = |key: &str, message: String| {
            v.push(Violation {
                key: key.to_string(),
                message,
            })
        };

        if self.n_prb < 3 * self.min_prb_per_slice {
            bad(
                "n_prb",
                format!(
                    "PRB budget {} is below 3 x min_prb_per_slice = {}",
                    self.n_prb,
                    3 * self.min_prb_per_slice
                ),
            );
        }
        for (key, n) in [
            ("n_prb", self.n_prb),
            ("n_urllc", self.n_urllc),
            ("n_embb", self.n_embb),
            ("n_mmtc", self.n_mmtc),
            ("mmtc_prb_per_device", self.mmtc_prb_per_device),
            ("episode_len", self.episode_len),
            ("min_prb_per_slice", self.min_prb_per_slice),
        ] {
            if n == 0 {
                bad(key, "count must be positive".to_string());
            }
        }
        for (key, x) in [
            ("area_side_m", self.area_side_m),
            ("carrier_freq_mhz", self.carrier_freq_mhz),
            ("latency_sla_ms", self.latency_sla_ms),
            ("throughput_sla_mbps", self.throughput_sla_mbps),
            ("epoch_ms", self.epoch_ms),
            ("eta", self.eta),
            ("prb_bw_khz", self.prb_bw_khz),
            ("d_min_m", self.d_min_m),
        ] {
            if !(x > 0.0) {
                bad(key, format!("must be positive, got {x}"));
            }
        }
        if !(0.0..=1.0).contains(&self.urllc_arrival_p) {
            bad(
                "urllc_arrival_p",
                format!("probability must lie in [0, 1], got {}", self.urllc_arrival_p),
            );
        }
        if self.reward_weights.iter().any(|w| *w < 0.0) {
            bad("reward_weights", "weights must be nonnegative".to_string());
        }
        let wsum: f64 = self.reward_weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-9 {
            bad("reward_weights", format!("weights sum to {wsum}, expected 1"));
        }
        if self.urllc_pkt_kbits[0] > self.urllc_pkt_kbits[1] {
            bad(
                "urllc_pkt_kbits",
                format!(
                    "empty interval [{}, {}]",
                    self.urllc_pkt_kbits[0], self.urllc_pkt_kbits[1]
                ),
            );
        }
        if self.urllc_pkt_kbits[0] < 0.0 {
            bad("urllc_pkt_kbits", "packet sizes must be nonnegative".to_string());
        }
        if self.embb_std_mbps < 0.0 {
            bad(
                "embb_std_mbps",
                format!("standard deviation must be nonnegative, got {}", self.embb_std_mbps),
            );
        }
        if self.mobility_step_m < 0.0 {
            bad(
                "mobility_step_m",
                format!("step length must be nonnegative, got {}", self.mobility_step_m),
            );
        }
        if self.sinr_cap_db <= self.sinr_floor_db {
            bad(
                "sinr_cap_db",
                format!(
                    "SINR cap {} must exceed the floor {}",
                    self.sinr_cap_db, self.sinr_floor_db
                ),
            );
        }
        v
    }
}

/// One violated invariant, naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid seed {0:?}: expected decimal or 0x-prefixed hex")]
    BadSeed(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// The full scenario document: the cell parameters plus the stochastic
/// effects applied by the online evaluation environment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub noise: NoiseConfig,
}

impl ScenarioConfig {
    /// Parses and validates a TOML scenario document. An empty document
    /// yields the all-defaults scenario.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let violations = cfg.validate();
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = self.network.validate();
        v.extend(self.noise.validate());
        v
    }

    /// Stable digest of the canonicalized scenario. Binds checkpoints and
    /// reports to the exact environment they were produced under.
    pub fn scenario_hash(&self) -> [u8; 32] {
        let canonical = serde_json::to_string(self).expect("scenario config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.into()
    }

    pub fn scenario_hash_hex(&self) -> String {
        let h = self.scenario_hash();
        let mut s = String::with_capacity(64);
        for b in h {
            use std::fmt::Write;
            write!(s, "{b:02x}").unwrap();
        }
        s
    }
}

/// Loads a scenario config from a TOML document (file contents or inline).
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    ScenarioConfig::from_toml_str(text)
}

/// Parses a 64-bit seed given as decimal or 0x-prefixed hex.
pub fn parse_seed(text: &str) -> Result<u64, ConfigError> {
    let t = text.trim();
    let parsed = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        t.parse::<u64>()
    };
    parsed.map_err(|_| ConfigError::BadSeed(text.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg.network.n_prb, 106);
        assert_eq!(cfg.network.n_urllc, 2);
        assert_eq!(cfg.network.n_embb, 2);
        assert_eq!(cfg.network.n_mmtc, 10);
        assert_eq!(cfg.network.episode_len, 256);
        assert_eq!(cfg.network.reward_weights, [0.5, 0.4, 0.1]);
    }

    #[test]
    fn budget_below_three_minimums_is_rejected() {
        let err = load_config("[network]\nn_prb = 9\nmin_prb_per_slice = 10\n").unwrap_err();
        match err {
            ConfigError::Invalid(v) => {
                assert!(v.iter().any(|x| x.key == "n_prb"), "violations: {v:?}")
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn single_field_override() {
        let cfg = load_config("[network]\nepisode_len = 128\n").unwrap();
        assert_eq!(cfg.network.episode_len, 128);
        let mut expect = ScenarioConfig::default();
        expect.network.episode_len = 128;
        assert_eq!(cfg, expect);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            load_config("[network]\nn_prbs = 106\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(load_config("[nets]\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn default_config_validates() {
        assert!(NetworkConfig::default().validate().is_empty());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let cfg = NetworkConfig {
            reward_weights: [0.5, 0.4, 0.2],
            ..NetworkConfig::default()
        };
        let v = cfg.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "reward_weights");
        assert!(v[0].message.contains("sum"));
    }

    #[test]
    fn empty_packet_interval_is_a_violation() {
        let cfg = NetworkConfig {
            urllc_pkt_kbits: [4000.0, 1500.0],
            ..NetworkConfig::default()
        };
        let v = cfg.validate();
        assert!(v.iter().any(|x| x.key == "urllc_pkt_kbits" && x.message.contains("empty")));
    }

    #[test]
    fn all_violations_reported_not_just_first() {
        let cfg = NetworkConfig {
            reward_weights: [0.5, 0.4, 0.2],
            urllc_pkt_kbits: [4000.0, 1500.0],
            embb_std_mbps: -1.0,
            ..NetworkConfig::default()
        };
        assert_eq!(cfg.validate().len(), 3);
    }

    #[test]
    fn toml_round_trip_is_identical() {
        let text = "[network]\nn_prb = 80\nmin_prb_per_slice = 5\nepoch_ms = 50.0\n[noise]\nfading_std_db = 1.5\n";
        let cfg = load_config(text).unwrap();
        let re = load_config(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, re);
        assert_eq!(cfg.scenario_hash(), re.scenario_hash());
    }

    #[test]
    fn scenario_hash_tracks_content() {
        let a = ScenarioConfig::default();
        let mut b = ScenarioConfig::default();
        assert_eq!(a.scenario_hash(), b.scenario_hash());
        b.network.n_prb = 100;
        assert_ne!(a.scenario_hash(), b.scenario_hash());
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seed("12345").unwrap(), 12345);
        assert_eq!(parse_seed("0xff").unwrap(), 255);
        assert_eq!(parse_seed("0XDEADBEEF").unwrap(), 0xdead_beef);
        assert!(parse_seed("zzz").is_err());
        assert!(parse_seed("-3").is_err());
    }

    #[test]
    fn obs_dim_matches_observed_population() {
        let cfg = NetworkConfig::default();
        assert_eq!(cfg.n_observed(), 4);
        assert_eq!(cfg.obs_dim(), 12);
    }

    #[test]
    fn half_diagonal() {
        let cfg = NetworkConfig::default();
        assert!((cfg.d_max_m() - 1060.6601717798214).abs() < 1e-9);
    }
}

//! System configuration, seeded Gaussian channels and the cut-set bound.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log2_det_spd, Matrix};

/// Identifier written to run metadata so a sweep can be replayed elsewhere.
pub const RNG_ID: &str = "ChaCha20Rng(seed_from_u64(seed)).set_stream(trial) + StandardNormal [rand_chacha 0.9 / rand_distr 0.5], row-major draws";

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_LLL_DELTA: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Exhaustive,
    Lll,
}

impl SearchMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchMethod::Exhaustive => "exhaustive",
            SearchMethod::Lll => "lll",
        }
    }
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SearchMethod::Exhaustive),
            "lll" => Ok(SearchMethod::Lll),
            other => Err(Error::InvalidConfig(format!("unknown search method `{other}`"))),
        }
    }
}

/// Network dimensions and the knobs shared by every scheme.
///
/// `snr` is a linear power ratio; dB values are converted where they enter
/// the program (CLI and sweep axes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub users: usize,
    pub relays: usize,
    pub snr: f64,
    /// Per-relay backhaul capacity in bits per channel use.
    pub backhaul: Vec<f64>,
    /// Variance of the auxiliary noise added to the decoded equation in JQCoF.
    pub epsilon: f64,
    pub lll_delta: f64,
    pub search: SearchMethod,
    pub seed: u64,
    pub trials: usize,
}

impl SystemConfig {
    pub fn new(users: usize, relays: usize, snr: f64, backhaul: f64) -> Self {
        SystemConfig {
            users,
            relays,
            snr,
            backhaul: vec![backhaul; relays],
            epsilon: DEFAULT_EPSILON,
            lll_delta: DEFAULT_LLL_DELTA,
            search: SearchMethod::Exhaustive,
            seed: 0,
            trials: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.users == 0 || self.relays == 0 {
            return bad("need at least one user and one relay".into());
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return bad(format!("snr must be positive and finite, got {}", self.snr));
        }
        if self.backhaul.len() != self.relays {
            return bad(format!(
                "{} backhaul capacities for {} relays",
                self.backhaul.len(),
                self.relays
            ));
        }
        if let Some(c) = self.backhaul.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return bad(format!("backhaul capacity must be finite and >= 0, got {c}"));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.lll_delta > 0.25 && self.lll_delta <= 1.0) {
            return bad(format!("lll delta must lie in (0.25, 1], got {}", self.lll_delta));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Real fading matrix `H`; row `k` holds the gains from every user to relay `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    h: Matrix,
}

impl Channel {
    pub fn new(h: Matrix) -> Self {
        Channel { h }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Ok(Channel {
            h: Matrix::from_rows(rows)?,
        })
    }

    pub fn relays(&self) -> usize {
        self.h.rows()
    }

    pub fn users(&self) -> usize {
        self.h.cols()
    }

    /// Gains seen by relay `k`.
    pub fn gains(&self, k: usize) -> &[f64] {
        self.h.row(k)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.h
    }

    pub fn load_json(path: &Path) -> Result<Channel> {
        let text = std::fs::read_to_string(path)?;
        ChannelFile::parse(&text)?.into_channel()
    }
}

/// On-disk channel description: `{ "L": int, "K": int, "H": [[...], ...] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(rename = "L")]
    pub users: usize,
    #[serde(rename = "K")]
    pub relays: usize,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
}

impl ChannelFile {
    pub fn parse(text: &str) -> Result<ChannelFile> {
        serde_json::from_str(text).map_err(|e| Error::MalformedChannelFile(e.to_string()))
    }

    pub fn into_channel(self) -> Result<Channel> {
        if self.h.len() != self.relays || self.h.iter().any(|r| r.len() != self.users) {
            return Err(Error::MalformedChannelFile(format!(
                "H is not {}x{} (K x L)",
                self.relays, self.users
            )));
        }
        if self.h.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::MalformedChannelFile("non-finite channel gain".into()));
        }
        Channel::from_rows(&self.h).map_err(|e| Error::MalformedChannelFile(e.to_string()))
    }
}

impl From<&Channel> for ChannelFile {
    fn from(ch: &Channel) -> Self {
        ChannelFile {
            users: ch.users(),
            relays: ch.relays(),
            h: ch.h.to_rows(),
        }
    }
}

/// I.i.d. `N(0, 1)` channel for one trial.
///
/// Each trial reads its own ChaCha20 stream of the generator keyed by
/// `cfg.seed`, so the draw depends on `(seed, trial)` only.
pub fn sample_channel(cfg: &SystemConfig, trial: u64) -> Channel {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let data: Vec<f64> = (0..cfg.relays * cfg.users)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Channel {
        h: Matrix::from_vec(cfg.relays, cfg.users, data).expect("normal draws are finite"),
    }
}

/// `½ log₂ det(I_K + snr H Hᵀ)`: the sum capacity with all relay outputs
/// pooled at one receiver.
pub fn receiver_cut(h: &Channel, snr: f64) -> f64 {
    let hh = h.h.matmul(&h.h.transpose());
    let m = Matrix::identity(h.relays()).add(&hh.scale(snr));
    0.5 * log2_det_spd(&m).expect("I + snr*H*H^T is positive definite")
}

/// Cut-set upper bound `min(½ log₂ det(I + snr H Hᵀ), Σ Cₖ)`.
pub fn cutset_sum_rate(h: &Channel, snr: f64, backhaul: &[f64]) -> f64 {
    let total: f64 = backhaul.iter().sum();
    receiver_cut(h, snr).min(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> SystemConfig {
        SystemConfig {
            seed,
            ..SystemConfig::new(3, 2, 3.0, 1.0)
        }
    }

    #[test]
    fn same_seed_and_trial_replays() {
        let a = sample_channel(&cfg(7), 0);
        let b = sample_channel(&cfg(7), 0);
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        assert_eq!((a.relays(), a.users()), (2, 3));
    }

    #[test]
    fn trials_use_separate_streams() {
        let a = sample_channel(&cfg(7), 0);
        let b = sample_channel(&cfg(7), 1);
        assert_ne!(a.matrix().as_slice(), b.matrix().as_slice());
        let c = sample_channel(&cfg(8), 0);
        assert_ne!(a.matrix().as_slice(), c.matrix().as_slice());
    }

    #[test]
    fn draws_are_standard_normal() {
        let c = SystemConfig {
            seed: 11,
            ..SystemConfig::new(10, 10, 1.0, 1.0)
        };
        let draws: Vec<f64> = (0..1000)
            .flat_map(|t| sample_channel(&c, t).matrix().as_slice().to_vec())
            .collect();
        assert_eq!(draws.len(), 100_000);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn cutset_identity_channel() {
        let h = Channel::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!((cutset_sum_rate(&h, 3.0, &[1.0, 1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cutset_zero_backhaul() {
        let h = sample_channel(&cfg(3), 0);
        assert_eq!(cutset_sum_rate(&h, 3.0, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn cutset_unbounded_backhaul() {
        let h = sample_channel(&cfg(3), 0);
        let inf = [f64::INFINITY, f64::INFINITY];
        assert_eq!(cutset_sum_rate(&h, 3.0, &inf), receiver_cut(&h, 3.0));
    }

    #[test]
    fn channel_file_errors() {
        assert!(matches!(
            ChannelFile::parse("{ \"L\": 2, \"K\": "),
            Err(Error::MalformedChannelFile(_))
        ));
        let f = ChannelFile::parse(r#"{"L":2,"K":2,"H":[[1.0,0.0],[0.0]]}"#).unwrap();
        assert!(matches!(f.into_channel(), Err(Error::MalformedChannelFile(_))));
        let f = ChannelFile::parse(r#"{"L":2,"K":1,"H":[[1.0,0.5]]}"#).unwrap();
        let ch = f.into_channel().unwrap();
        assert_eq!(ch.gains(0), &[1.0, 0.5]);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(3, 2, 3.0, 1.0).validate().is_ok());
        assert!(SystemConfig::new(0, 2, 3.0, 1.0).validate().is_err());
        assert!(SystemConfig::new(3, 2, 0.0, 1.0).validate().is_err());
        assert!(SystemConfig::new(3, 2, 3.0, -1.0).validate().is_err());
        let mut c = SystemConfig::new(3, 2, 3.0, 1.0);
        c.lll_delta = 0.25;
        assert!(c.validate().is_err());
        c.lll_delta = 0.75;
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }
}

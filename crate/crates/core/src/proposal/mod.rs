//! Dense action-value maps and multi-modal place proposals.
//!
//! A [`Scorer`] maps `(o, o_g)` to a pick map `Q_pick` (H×W) and a place map `Q_place`
//! (H×W×R). [`propose_from_maps`] turns the place map into up to `k` distinct place poses:
//! threshold at `alpha · max`, keep the `top_n` best pixels of the rotation-collapsed map,
//! cluster them with k-means, and return the best pixel of each cluster.
//!
//! Ties are always broken toward the lowest row-major pixel index, then the lowest
//! rotation bin.

mod heuristic;
mod kmeans;

pub use heuristic::HeuristicScorer;
pub use kmeans::{kmeans, KMeans};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PixelPose, WorkspaceCalib};
use crate::observation::Observation;
use crate::simulator::PickPlaceAction;

#[derive(Debug, Clone, PartialEq)]
pub struct ActionValueMaps {
    pub height: usize,
    pub width: usize,
    pub rotations: usize,
    /// Row-major `u * width + v`.
    pub q_pick: Vec<f64>,
    /// `(u * width + v) * rotations + r`.
    pub q_place: Vec<f64>,
}

impl ActionValueMaps {
    pub fn zeros(height: usize, width: usize, rotations: usize) -> Self {
        Self {
            height,
            width,
            rotations,
            q_pick: vec![0.0; height * width],
            q_place: vec![0.0; height * width * rotations],
        }
    }

    pub fn for_calib(calib: &WorkspaceCalib) -> Self {
        Self::zeros(calib.height, calib.width, calib.rotation_bins)
    }

    pub fn pick(&self, u: usize, v: usize) -> f64 {
        self.q_pick[u * self.width + v]
    }

    pub fn place(&self, u: usize, v: usize, r: usize) -> f64 {
        self.q_place[(u * self.width + v) * self.rotations + r]
    }

    pub fn set_place(&mut self, u: usize, v: usize, r: usize, value: f64) {
        self.q_place[(u * self.width + v) * self.rotations + r] = value;
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.height * self.width;
        if self.q_pick.len() != n || self.q_place.len() != n * self.rotations || self.rotations == 0 {
            return Err(Error::DimensionMismatch("action-value map sizes".into()));
        }
        if self
            .q_pick
            .iter()
            .chain(&self.q_place)
            .any(|q| !q.is_finite() || *q < 0.0)
        {
            return Err(Error::InvalidConfig("action values must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn max_place(&self) -> f64 {
        self.q_place.iter().copied().fold(0.0, f64::max)
    }

    /// `(Q̃, θ̃)`: max over the rotation axis and its lowest arg-max bin, per pixel.
    pub fn collapse_rotations(&self) -> (Vec<f64>, Vec<usize>) {
        self.q_place
            .chunks(self.rotations)
            .map(|bins| {
                bins.iter()
                    .enumerate()
                    .fold((f64::NEG_INFINITY, 0), |best, (r, &q)| if q > best.0 { (q, r) } else { best })
            })
            .unzip()
    }

    /// Global `(u, v, r)` arg-max of `Q_place`.
    pub fn argmax_place(&self) -> PixelPose {
        let mut best = 0;
        for (i, &q) in self.q_place.iter().enumerate() {
            if q > self.q_place[best] {
                best = i;
            }
        }
        let r = best % self.rotations;
        let p = best / self.rotations;
        PixelPose::new(p / self.width, p % self.width, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalConfig {
    pub alpha: f64,
    pub top_n: usize,
    pub k: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            top_n: 100,
            k: 3,
            kmeans_iters: 20,
            seed: 0,
        }
    }
}

impl ProposalConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.k == 0 || self.top_n < self.k {
            return Err(Error::InvalidConfig(format!(
                "need top_n >= k >= 1, got top_n {} and k {}",
                self.top_n, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalResult {
    pub pick: PixelPose,
    /// Best first.
    pub places: Vec<PixelPose>,
    pub values: Vec<f64>,
}

impl ProposalResult {
    /// World-frame actions, one per place pose, in proposal order.
    pub fn actions(&self, calib: &WorkspaceCalib) -> Result<Vec<PickPlaceAction>> {
        let pick = calib.pixel_to_world(self.pick)?;
        self.places
            .iter()
            .map(|&p| Ok(PickPlaceAction::new(pick, calib.pixel_to_world(p)?)))
            .collect()
    }
}

pub trait Scorer: Send + Sync {
    fn score(&self, o: &Observation, goal: &Observation) -> Result<ActionValueMaps>;

    fn name(&self) -> &'static str;
}

/// Global arg-max of `Q_pick` with `rot_bin = 0`.
pub fn select_pick(maps: &ActionValueMaps) -> PixelPose {
    let mut best = 0;
    for (i, &q) in maps.q_pick.iter().enumerate() {
        if q > maps.q_pick[best] {
            best = i;
        }
    }
    PixelPose::new(best / maps.width, best % maps.width, 0)
}

/// The multi-modal proposal over precomputed maps.
pub fn propose_from_maps(maps: &ActionValueMaps, cfg: &ProposalConfig) -> Result<ProposalResult> {
    cfg.validate()?;
    let q_max = maps.max_place();
    if q_max <= 0.0 {
        return Err(Error::EmptyProposal);
    }
    let (q_tilde, theta_tilde) = maps.collapse_rotations();
    let threshold = cfg.alpha * q_max;
    let mut s: Vec<usize> = (0..q_tilde.len()).filter(|&i| q_tilde[i] > threshold).collect();
    s.sort_by(|&a, &b| q_tilde[b].total_cmp(&q_tilde[a]).then(a.cmp(&b)));
    s.truncate(cfg.top_n);

    let coords: Vec<(f64, f64)> = s
        .iter()
        .map(|&i| ((i / maps.width) as f64, (i % maps.width) as f64))
        .collect();
    let clusters = kmeans(&coords, cfg.k, cfg.kmeans_iters, cfg.seed)?;
    let n_clusters = clusters.centers.len();
    // `s` is sorted best-first, so the first member seen wins its cluster.
    let mut winner: Vec<Option<usize>> = vec![None; n_clusters];
    for (j, &c) in clusters.assignment.iter().enumerate() {
        winner[c].get_or_insert(s[j]);
    }
    let mut picks: Vec<usize> = winner.into_iter().flatten().collect();
    picks.sort_by(|&a, &b| q_tilde[b].total_cmp(&q_tilde[a]).then(a.cmp(&b)));

    Ok(ProposalResult {
        pick: select_pick(maps),
        places: picks
            .iter()
            .map(|&i| PixelPose::new(i / maps.width, i % maps.width, theta_tilde[i]))
            .collect(),
        values: picks.iter().map(|&i| q_tilde[i]).collect(),
    })
}

pub fn multimodal_propose(
    o: &Observation,
    goal: &Observation,
    scorer: &dyn Scorer,
    cfg: &ProposalConfig,
) -> Result<ProposalResult> {
    propose_from_maps(&scorer.score(o, goal)?, cfg)
}

/// The single-modal policy: pick arg-max and place arg-max.
pub fn greedy_action(maps: &ActionValueMaps, calib: &WorkspaceCalib) -> Result<PickPlaceAction> {
    if maps.max_place() <= 0.0 {
        return Err(Error::EmptyProposal);
    }
    Ok(PickPlaceAction::new(
        calib.pixel_to_world(select_pick(maps))?,
        calib.pixel_to_world(maps.argmax_place())?,
    ))
}

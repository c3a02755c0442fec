//! The slice-allocation MDP: discrete action space over PRB triples,
//! per-UE observation vector, intra-slice round-robin scheduling, URLLC
//! queue service with latency accounting, and the weighted SLA reward.
//!
//! One [`SliceEnv`] instance is single-owner; run one per rollout worker.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::channel::{normalize_pathloss, pathloss_db, ThroughputModel};
use crate::config::{NetworkConfig, ScenarioConfig, SliceKind};
use crate::rng::RandomSource;
use crate::traffic::{
    distance_to_gnb, draw_embb_demand, draw_urllc_arrival, init_population, random_walk, Packet,
    UEState,
};

/// Stream tag separating the environment's noise draws from its traffic
/// draws, so enabling noise never perturbs the base dynamics.
const NOISE_STREAM_TAG: u64 = 0x6e6f_6973_65;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid action index {0}")]
    InvalidAction(usize),
    #[error("episode already finished; call reset")]
    EpisodeFinished,
}

/// A slice-level PRB split. Valid allocations give every slice at least
/// `min_prb_per_slice` PRBs and sum to the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SliceAllocation {
    pub urllc: u32,
    pub embb: u32,
    pub mmtc: u32,
}

impl SliceAllocation {
    pub fn new(urllc: u32, embb: u32, mmtc: u32) -> Self {
        Self { urllc, embb, mmtc }
    }

    pub fn total(&self) -> u32 {
        self.urllc + self.embb + self.mmtc
    }

    pub fn is_valid(&self, cfg: &NetworkConfig) -> bool {
        let m = cfg.min_prb_per_slice;
        self.urllc >= m && self.embb >= m && self.mmtc >= m && self.total() == cfg.n_prb
    }
}

/// The enumerated action space with a stable, bijective index mapping.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    actions: Vec<SliceAllocation>,
    index: HashMap<SliceAllocation, usize>,
}

/// Enumerates every valid allocation in lexicographic (urllc, embb) order.
pub fn enumerate_actions(cfg: &NetworkConfig) -> ActionSpace {
    let m = cfg.min_prb_per_slice;
    let n = cfg.n_prb;
    let mut actions = Vec::new();
    for u in m..=n - 2 * m {
        for e in m..=n - u - m {
            actions.push(SliceAllocation::new(u, e, n - u - e));
        }
    }
    let index = actions.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    ActionSpace { actions, index }
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn decode(&self, index: usize) -> Option<SliceAllocation> {
        self.actions.get(index).copied()
    }

    pub fn encode(&self, action: &SliceAllocation) -> Option<usize> {
        self.index.get(action).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SliceAllocation> {
        self.actions.iter()
    }
}

/// Flat observation vector: per observed UE the triple
/// `(slice bit, normalized demand, normalized pathloss)`, URLLC UEs first,
/// then eMBB, both in id order. Every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Builds the observation from the current UE state. Pathloss must already
/// be cached for the epoch.
pub fn build_observation(ues: &[UEState], cfg: &NetworkConfig) -> Observation {
    let mut v = Vec::with_capacity(cfg.obs_dim());
    let queue_norm_bits = cfg.urllc_pkt_kbits[1] * 1e3;
    for ue in ues.iter().filter(|u| u.slice.is_observed()) {
        let (s, r) = match ue.slice {
            SliceKind::Urllc => (0.0, (ue.queued_bits() / queue_norm_bits).clamp(0.0, 1.0)),
            SliceKind::Embb => {
                let d = ue.demand_mbps.unwrap_or(0.0);
                (1.0, (d / (2.0 * cfg.throughput_sla_mbps)).clamp(0.0, 1.0))
            }
            SliceKind::Mmtc => unreachable!("mMTC devices are not observed"),
        };
        v.push(s);
        v.push(r);
        v.push(normalize_pathloss(ue.pathloss_db, cfg));
    }
    Observation(v)
}

/// Deals `prbs` PRBs one at a time to the active UEs, starting at `cursor`
/// and wrapping cyclically. Returns the per-UE counts (aligned with
/// `active`) and the advanced cursor. With no active UEs the PRBs lapse.
pub fn round_robin_assign(prbs: u32, active: &[usize], cursor: u32) -> (Vec<u32>, u32) {
    if active.is_empty() {
        return (Vec::new(), cursor);
    }
    let k = active.len() as u32;
    let mut counts = vec![0u32; active.len()];
    let mut pos = cursor % k;
    for _ in 0..prbs {
        counts[pos as usize] += 1;
        pos = (pos + 1) % k;
    }
    (counts, pos)
}

/// Number of mMTC devices serviced by `prb_mmtc` PRBs: one device per
/// `mmtc_prb_per_device` PRBs, capped at the device population.
pub fn mmtc_serviced(prb_mmtc: u32, cfg: &NetworkConfig) -> u32 {
    (prb_mmtc / cfg.mmtc_prb_per_device).min(cfg.n_mmtc)
}

/// Drains a FIFO queue by a bit budget; returns the latency of every packet
/// completed this epoch. A packet completing in its arrival epoch reports
/// one full epoch of latency.
pub fn drain_queue(
    queue: &mut VecDeque<Packet>,
    budget_bits: f64,
    step: u32,
    epoch_ms: f64,
) -> Vec<f64> {
    let mut latencies = Vec::new();
    let mut budget = budget_bits;
    while budget > 0.0 {
        let Some(head) = queue.front_mut() else { break };
        if head.remaining_bits <= budget {
            budget -= head.remaining_bits;
            latencies.push((step - head.arrival_step + 1) as f64 * epoch_ms);
            queue.pop_front();
        } else {
            head.remaining_bits -= budget;
            budget = 0.0;
        }
    }
    latencies
}

/// Serves one URLLC UE for one epoch at the model-predicted rate for `prbs`
/// PRBs; returns completed-packet latencies in arrival order.
pub fn serve_urllc(
    ue: &mut UEState,
    prbs: u32,
    model: &ThroughputModel,
    cfg: &NetworkConfig,
    step: u32,
) -> Vec<f64> {
    let rate_mbps = model.throughput_mbps(ue.pathloss_db, prbs, cfg);
    let budget_bits = rate_mbps * cfg.epoch_ms * 1e3;
    drain_queue(&mut ue.queue, budget_bits, step, cfg.epoch_ms)
}

/// URLLC reward: zero while the mean latency meets the SLA, scaling linearly
/// to -1 at twice the target. `None` means no latency sample and empty
/// queues, which is not a violation.
pub fn reward_urllc(mean_latency_ms: Option<f64>, cfg: &NetworkConfig) -> f64 {
    match mean_latency_ms {
        None => 0.0,
        Some(l) => ((cfg.latency_sla_ms - l) / cfg.latency_sla_ms).clamp(-1.0, 0.0),
    }
}

/// eMBB reward: zero while mean achieved throughput meets the target,
/// scaling linearly to -1 at zero throughput.
pub fn reward_embb(mean_throughput_mbps: f64, cfg: &NetworkConfig) -> f64 {
    ((mean_throughput_mbps - cfg.throughput_sla_mbps) / cfg.throughput_sla_mbps).clamp(-1.0, 0.0)
}

/// mMTC reward: -1 with no serviced devices, 0 with full coverage.
pub fn reward_mmtc(n_serviced: u32, cfg: &NetworkConfig) -> f64 {
    -1.0 + n_serviced as f64 / cfg.n_mmtc as f64
}

/// Weighted total reward; stays in `[-1, 0]` because the weights sum to 1.
pub fn total_reward(r_u: f64, r_e: f64, r_m: f64, cfg: &NetworkConfig) -> f64 {
    let [w_u, w_e, w_m] = cfg.reward_weights;
    w_u * r_u + w_e * r_e + w_m * r_m
}

/// Everything one epoch produced, for KPI aggregation and tracing.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: u32,
    pub action: SliceAllocation,
    /// Latency of every URLLC packet completed this epoch, in ms.
    pub latencies_ms: Vec<f64>,
    /// Per eMBB UE: (requested, achieved) Mbps this epoch.
    pub embb_mbps: Vec<(f64, f64)>,
    pub mmtc_serviced: u32,
    pub r_urllc: f64,
    pub r_embb: f64,
    pub r_mmtc: f64,
    pub reward: f64,
    /// The latency statistic the reward used: mean completed latency, or the
    /// mean head-of-line age when nothing completed, or `None` when idle.
    pub mean_latency_ms: Option<f64>,
    /// Mean achieved eMBB throughput this epoch.
    pub mean_embb_mbps: f64,
    /// Per-UE PRB assignments (id, count) inside each slice.
    pub urllc_assign: Vec<(usize, u32)>,
    pub embb_assign: Vec<(usize, u32)>,
}

/// What a `step` call returns.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub record: StepRecord,
}

/// Snapshot of the demand state the slice-level allocators act on.
#[derive(Debug, Clone)]
pub struct SliceStateView {
    /// Per URLLC UE: (id, queued bits, pathloss dB).
    pub urllc: Vec<(usize, f64, f64)>,
    /// Per eMBB UE: (id, requested Mbps, pathloss dB).
    pub embb: Vec<(usize, f64, f64)>,
}

/// The slice-allocation environment.
///
/// The optional noise stage reproduces the stochastic effects a live stack
/// adds on top of the table-driven offline model: log-normal fading on
/// realized throughput, measurement noise on observed pathloss, and a
/// capacity haircut when every slice is demand-saturated. Noise draws come
/// from a dedicated stream so the base dynamics are untouched.
#[derive(Debug, Clone)]
pub struct SliceEnv {
    scenario: ScenarioConfig,
    model: ThroughputModel,
    actions: ActionSpace,
    ues: Vec<UEState>,
    rng: RandomSource,
    noise_rng: RandomSource,
    noise_enabled: bool,
    step_idx: u32,
    done: bool,
    cursor_urllc: u32,
    cursor_embb: u32,
}

impl SliceEnv {
    /// Builds an environment for a validated scenario. Call [`reset`] before
    /// stepping.
    ///
    /// [`reset`]: SliceEnv::reset
    pub fn new(scenario: ScenarioConfig, model: ThroughputModel) -> Self {
        debug_assert!(scenario.validate().is_empty(), "scenario must be valid");
        let actions = enumerate_actions(&scenario.network);
        Self {
            scenario,
            model,
            actions,
            ues: Vec::new(),
            rng: RandomSource::new(0),
            noise_rng: RandomSource::new(0),
            noise_enabled: false,
            step_idx: 0,
            done: true,
            cursor_urllc: 0,
            cursor_embb: 0,
        }
    }

    /// Enables the noise stage configured in the scenario's `[noise]`
    /// section. With all magnitudes zero the trajectories stay bit-identical
    /// to the base environment.
    pub fn with_noise_enabled(mut self) -> Self {
        self.noise_enabled = true;
        self
    }

    /// Overrides the noise magnitudes (used by `noise::wrap_env`).
    pub fn set_noise_config(&mut self, noise: crate::noise::NoiseConfig) {
        self.scenario.noise = noise;
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise_enabled
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.scenario.network
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn model(&self) -> &ThroughputModel {
        &self.model
    }

    pub fn episode_done(&self) -> bool {
        self.done
    }

    /// Starts a fresh episode and returns the initial observation.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = RandomSource::new(seed);
        self.noise_rng = RandomSource::derived(seed, NOISE_STREAM_TAG);
        let cfg = self.scenario.network.clone();
        self.ues = init_population(&mut self.rng, &cfg);
        self.step_idx = 0;
        self.done = false;
        self.cursor_urllc = 0;
        self.cursor_embb = 0;
        self.observe()
    }

    /// The demand snapshot a slice-level allocator decides from.
    pub fn state_view(&self) -> SliceStateView {
        let mut view = SliceStateView {
            urllc: Vec::new(),
            embb: Vec::new(),
        };
        for ue in &self.ues {
            match ue.slice {
                SliceKind::Urllc => view.urllc.push((ue.id, ue.queued_bits(), ue.pathloss_db)),
                SliceKind::Embb => {
                    view.embb
                        .push((ue.id, ue.demand_mbps.unwrap_or(0.0), ue.pathloss_db))
                }
                SliceKind::Mmtc => {}
            }
        }
        view
    }

    /// Advances one epoch under the decoded allocation.
    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let alloc = self
            .actions
            .decode(action_index)
            .ok_or(EnvError::InvalidAction(action_index))?;
        let cfg = self.scenario.network.clone();
        let step = self.step_idx;

        // Arrivals and demands for this epoch.
        for ue in self.ues.iter_mut() {
            match ue.slice {
                SliceKind::Urllc => {
                    if let Some(pkt) = draw_urllc_arrival(&mut self.rng, &cfg, step) {
                        ue.queue.push_back(pkt);
                    }
                }
                SliceKind::Embb => ue.demand_mbps = Some(draw_embb_demand(&mut self.rng, &cfg)),
                SliceKind::Mmtc => {}
            }
        }

        // Intra-slice round robin over active UEs.
        let active_u: Vec<usize> = self
            .ues
            .iter()
            .filter(|u| u.slice == SliceKind::Urllc && !u.queue.is_empty())
            .map(|u| u.id)
            .collect();
        let active_e: Vec<usize> = self
            .ues
            .iter()
            .filter(|u| u.slice == SliceKind::Embb && u.demand_mbps.unwrap_or(0.0) > 0.0)
            .map(|u| u.id)
            .collect();
        let (counts_u, cur_u) = round_robin_assign(alloc.urllc, &active_u, self.cursor_urllc);
        let (counts_e, cur_e) = round_robin_assign(alloc.embb, &active_e, self.cursor_embb);
        self.cursor_urllc = cur_u;
        self.cursor_embb = cur_e;

        let mut prbs_of = vec![0u32; self.ues.len()];
        for (i, &id) in active_u.iter().enumerate() {
            prbs_of[id] = counts_u[i];
        }
        for (i, &id) in active_e.iter().enumerate() {
            prbs_of[id] = counts_e[i];
        }

        // Realized per-UE capacity, with fading when the noise stage is on.
        let mut cap_mbps = vec![0.0f64; self.ues.len()];
        for ue in &self.ues {
            if !ue.slice.is_observed() {
                continue;
            }
            let mut cap = self.model.throughput_mbps(ue.pathloss_db, prbs_of[ue.id], &cfg);
            if self.noise_enabled {
                let x_db = self
                    .noise_rng
                    .gaussian(0.0, self.scenario.noise.fading_std_db);
                cap *= 10f64.powf(x_db / 10.0);
            }
            cap_mbps[ue.id] = cap;
        }

        // Cross-slice contention: when every slice wants more than it was
        // given, realized capacity takes a configured haircut.
        if self.noise_enabled && self.scenario.noise.contention_loss_frac > 0.0 {
            let epoch_bits_per_mbps = cfg.epoch_ms * 1e3;
            let (mut queued, mut cap_u, mut demand, mut cap_e) = (0.0, 0.0, 0.0, 0.0);
            for ue in &self.ues {
                match ue.slice {
                    SliceKind::Urllc => {
                        queued += ue.queued_bits();
                        cap_u += cap_mbps[ue.id];
                    }
                    SliceKind::Embb => {
                        demand += ue.demand_mbps.unwrap_or(0.0);
                        cap_e += cap_mbps[ue.id];
                    }
                    SliceKind::Mmtc => {}
                }
            }
            let urllc_sat = queued > cap_u * epoch_bits_per_mbps;
            let embb_sat = demand > cap_e;
            let mmtc_sat = cfg.n_mmtc * cfg.mmtc_prb_per_device > alloc.mmtc;
            if urllc_sat && embb_sat && mmtc_sat {
                let factor = 1.0 - self.scenario.noise.contention_loss_frac;
                for c in cap_mbps.iter_mut() {
                    *c *= factor;
                }
            }
        }

        // Serve URLLC queues and measure eMBB achieved throughput.
        let epoch_bits_per_mbps = cfg.epoch_ms * 1e3;
        let mut latencies = Vec::new();
        let mut urllc_assign = Vec::with_capacity(active_u.len());
        let mut embb_assign = Vec::with_capacity(active_e.len());
        let mut embb_mbps = Vec::with_capacity(cfg.n_embb as usize);
        for ue in self.ues.iter_mut() {
            match ue.slice {
                SliceKind::Urllc => {
                    if !ue.queue.is_empty() {
                        urllc_assign.push((ue.id, prbs_of[ue.id]));
                    }
                    let budget = cap_mbps[ue.id] * epoch_bits_per_mbps;
                    latencies.extend(drain_queue(&mut ue.queue, budget, step, cfg.epoch_ms));
                }
                SliceKind::Embb => {
                    let demand = ue.demand_mbps.unwrap_or(0.0);
                    if demand > 0.0 {
                        embb_assign.push((ue.id, prbs_of[ue.id]));
                    }
                    embb_mbps.push((demand, cap_mbps[ue.id].min(demand)));
                }
                SliceKind::Mmtc => {}
            }
        }

        let n_serviced = mmtc_serviced(alloc.mmtc, &cfg);

        // Latency statistic: completions if any, else head-of-line ages.
        let mean_latency_ms = if !latencies.is_empty() {
            Some(latencies.iter().sum::<f64>() / latencies.len() as f64)
        } else {
            let ages: Vec<f64> = self
                .ues
                .iter()
                .filter(|u| u.slice == SliceKind::Urllc)
                .filter_map(|u| u.queue.front())
                .map(|p| (step - p.arrival_step + 1) as f64 * cfg.epoch_ms)
                .collect();
            if ages.is_empty() {
                None
            } else {
                Some(ages.iter().sum::<f64>() / ages.len() as f64)
            }
        };
        let mean_embb_mbps = if embb_mbps.is_empty() {
            0.0
        } else {
            embb_mbps.iter().map(|(_, a)| a).sum::<f64>() / embb_mbps.len() as f64
        };

        let r_u = reward_urllc(mean_latency_ms, &cfg);
        let r_e = if embb_mbps.is_empty() {
            0.0
        } else {
            reward_embb(mean_embb_mbps, &cfg)
        };
        let r_m = reward_mmtc(n_serviced, &cfg);
        let reward = total_reward(r_u, r_e, r_m, &cfg);

        // Mobility and fresh pathloss for the next epoch.
        for ue in self.ues.iter_mut() {
            if ue.slice.is_observed() {
                ue.position = random_walk(ue.position, &mut self.rng, &cfg);
                ue.pathloss_db = pathloss_db(distance_to_gnb(ue.position, &cfg), &cfg);
            }
        }

        self.step_idx += 1;
        self.done = self.step_idx >= cfg.episode_len;
        let obs = self.observe();

        let record = StepRecord {
            step,
            action: alloc,
            latencies_ms: latencies,
            embb_mbps,
            mmtc_serviced: n_serviced,
            r_urllc: r_u,
            r_embb: r_e,
            r_mmtc: r_m,
            reward,
            mean_latency_ms,
            mean_embb_mbps,
            urllc_assign,
            embb_assign,
        };
        Ok(StepOutcome {
            obs,
            reward,
            done: self.done,
            record,
        })
    }

    fn observe(&mut self) -> Observation {
        let cfg = &self.scenario.network;
        let mut obs = build_observation(&self.ues, cfg);
        if self.noise_enabled {
            let std = self.scenario.noise.measurement_noise_std;
            for i in 0..obs.0.len() / 3 {
                let p = &mut obs.0[3 * i + 2];
                *p = (*p + self.noise_rng.gaussian(0.0, std)).clamp(0.0, 1.0);
            }
        }
        obs
    }
}

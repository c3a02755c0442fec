//! Non-learning slice-level allocators: hard slicing, priority-based and
//! fair active-user allocation. All three share the environment's intra-slice
//! round-robin, so performance differences come from the slice split alone.

use std::str::FromStr;

use crate::channel::ThroughputModel;
use crate::config::NetworkConfig;
use crate::env::{SliceAllocation, SliceStateView};

/// Every evaluated allocation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    HardSlicing,
    PriorityBased,
    FairActiveUser,
    Ppo,
    Dqn,
}

impl PolicyKind {
    pub fn is_learned(self) -> bool {
        matches!(self, PolicyKind::Ppo | PolicyKind::Dqn)
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::HardSlicing => "hard-slicing",
            PolicyKind::PriorityBased => "priority",
            PolicyKind::FairActiveUser => "fair",
            PolicyKind::Ppo => "ppo",
            PolicyKind::Dqn => "dqn",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fmt_via_name!();
}

macro_rules! fmt_via_name {
    () => {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str(self.name())
        }
    };
}
use fmt_via_name;

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard-slicing" | "hard" => Ok(PolicyKind::HardSlicing),
            "priority" | "priority-based" => Ok(PolicyKind::PriorityBased),
            "fair" | "fair-active-user" => Ok(PolicyKind::FairActiveUser),
            "ppo" => Ok(PolicyKind::Ppo),
            "dqn" => Ok(PolicyKind::Dqn),
            other => Err(format!(
                "unknown policy {other:?}; expected hard-slicing, priority, fair, ppo or dqn"
            )),
        }
    }
}

/// Fixed 40/40/20 split, independent of state.
pub fn hard_slicing(cfg: &NetworkConfig) -> SliceAllocation {
    let share = (0.4 * cfg.n_prb as f64).floor() as u32;
    SliceAllocation::new(share, share, cfg.n_prb - 2 * share)
}

/// Smallest PRB count in the model's grid whose predicted throughput drains
/// `queued_bits` within the latency SLA; the grid maximum if unattainable.
pub fn prbs_for_latency_sla(
    queued_bits: f64,
    pl_db: f64,
    model: &ThroughputModel,
    cfg: &NetworkConfig,
) -> u32 {
    // bits per ms == kbit/s; Mbps needs a further factor of 1000.
    let required_mbps = queued_bits / cfg.latency_sla_ms / 1e3;
    prbs_for_rate(required_mbps, pl_db, model, cfg)
}

/// Smallest PRB count in the model's grid meeting `required_mbps`; the grid
/// maximum if unattainable.
pub fn prbs_for_rate(
    required_mbps: f64,
    pl_db: f64,
    model: &ThroughputModel,
    cfg: &NetworkConfig,
) -> u32 {
    let grid = model.prb_grid(cfg);
    if required_mbps <= 0.0 {
        return 0;
    }
    // Throughput is nondecreasing along the PRB grid.
    for &n in &grid {
        if model.throughput_mbps(pl_db, n, cfg) >= required_mbps {
            return n;
        }
    }
    *grid.last().expect("PRB grid is nonempty")
}

/// Sequential SLA-driven allocation: URLLC needs first, then eMBB demands
/// from the remainder, residual to mMTC, then the minimum-floor clamp.
pub fn priority_allocate(
    view: &SliceStateView,
    model: &ThroughputModel,
    cfg: &NetworkConfig,
) -> SliceAllocation {
    let mut urllc = 0u32;
    for &(_, queued_bits, pl_db) in &view.urllc {
        if queued_bits > 0.0 {
            urllc = urllc.saturating_add(prbs_for_latency_sla(queued_bits, pl_db, model, cfg));
        }
    }
    urllc = urllc.min(cfg.n_prb);

    let mut remainder = cfg.n_prb - urllc;
    let mut embb = 0u32;
    for &(_, demand_mbps, pl_db) in &view.embb {
        if demand_mbps > 0.0 {
            let need = prbs_for_rate(demand_mbps, pl_db, model, cfg).min(remainder);
            embb += need;
            remainder -= need;
        }
    }

    clamp_to_floor(SliceAllocation::new(urllc, embb, remainder), cfg)
}

/// Equal split across active URLLC and eMBB UEs, with up to a third of the
/// budget reserved for mMTC (capped by its device demand). Leftover PRBs
/// from the floor division go one each to active UEs in id order; with no
/// active UEs the unused share is parked on mMTC.
pub fn fair_allocate(view: &SliceStateView, cfg: &NetworkConfig) -> SliceAllocation {
    let mmtc = (cfg.n_prb / 3).min(cfg.n_mmtc * cfg.mmtc_prb_per_device);
    let pool = cfg.n_prb - mmtc;

    let active_u: Vec<usize> = view
        .urllc
        .iter()
        .filter(|(_, q, _)| *q > 0.0)
        .map(|(id, _, _)| *id)
        .collect();
    let active_e: Vec<usize> = view
        .embb
        .iter()
        .filter(|(_, d, _)| *d > 0.0)
        .map(|(id, _, _)| *id)
        .collect();
    let k = (active_u.len() + active_e.len()) as u32;
    if k == 0 {
        return clamp_to_floor(SliceAllocation::new(0, 0, cfg.n_prb), cfg);
    }

    let base = pool / k;
    let leftover = pool % k;
    // Active ids in fixed id order; the first `leftover` get one extra PRB.
    let mut ids: Vec<(usize, bool)> = active_u.iter().map(|id| (*id, true)).collect();
    ids.extend(active_e.iter().map(|id| (*id, false)));
    ids.sort_by_key(|(id, _)| *id);
    let mut urllc = 0u32;
    let mut embb = 0u32;
    for (i, (_, is_urllc)) in ids.iter().enumerate() {
        let share = base + u32::from((i as u32) < leftover);
        if *is_urllc {
            urllc += share;
        } else {
            embb += share;
        }
    }
    clamp_to_floor(SliceAllocation::new(urllc, embb, mmtc), cfg)
}

/// Lifts any component below the per-slice floor by taking PRBs from the
/// largest component, so every baseline output is a valid action. The input
/// must sum to the budget.
pub fn clamp_to_floor(mut alloc: SliceAllocation, cfg: &NetworkConfig) -> SliceAllocation {
    debug_assert_eq!(alloc.total(), cfg.n_prb);
    let floor = cfg.min_prb_per_slice;
    loop {
        let parts = [alloc.urllc, alloc.embb, alloc.mmtc];
        let Some(short) = (0..3).find(|&i| parts[i] < floor) else {
            return alloc;
        };
        // Donor: the largest component, later slices winning ties. The
        // budget invariant guarantees the donor sits above the floor.
        let donor = (0..3).max_by_key(|&i| (parts[i], i)).unwrap();
        let deficit = floor - parts[short];
        let give = deficit.min(parts[donor] - floor);
        debug_assert!(give > 0, "no donor above the floor");
        let fields = |a: &mut SliceAllocation, i: usize| -> &mut u32 {
            match i {
                0 => &mut a.urllc,
                1 => &mut a.embb,
                _ => &mut a.mmtc,
            }
        };
        *fields(&mut alloc, short) += give;
        *fields(&mut alloc, donor) -= give;
    }
}

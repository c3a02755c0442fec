//! Stochastic traffic and mobility for the three slices.
//!
//! URLLC UEs receive Bernoulli packet arrivals and queue them FIFO; eMBB UEs
//! redraw a Gaussian throughput demand every epoch; mMTC devices are static
//! reservation-based terminals with no per-device traffic state.

use std::collections::VecDeque;

use crate::channel::pathloss_db;
use crate::config::{NetworkConfig, SliceKind};
use crate::rng::RandomSource;

/// A queued downlink packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub size_bits: f64,
    pub arrival_step: u32,
    pub remaining_bits: f64,
}

/// Per-UE simulation state.
///
/// The queue is only ever populated for URLLC UEs and `demand_mbps` is only
/// ever set for eMBB UEs. mMTC devices keep a fixed position and carry no
/// queue or demand.
#[derive(Debug, Clone)]
pub struct UEState {
    pub id: usize,
    pub slice: SliceKind,
    pub position: (f64, f64),
    pub queue: VecDeque<Packet>,
    pub demand_mbps: Option<f64>,
    /// Cached once per epoch after mobility.
    pub pathloss_db: f64,
}

impl UEState {
    pub fn queued_bits(&self) -> f64 {
        self.queue.iter().map(|p| p.remaining_bits).sum()
    }
}

/// Draws this epoch's URLLC arrival: with probability `urllc_arrival_p` a
/// packet with size uniform over the configured kbit interval.
pub fn draw_urllc_arrival(
    rng: &mut RandomSource,
    cfg: &NetworkConfig,
    step: u32,
) -> Option<Packet> {
    if !rng.bernoulli(cfg.urllc_arrival_p) {
        return None;
    }
    let lo = cfg.urllc_pkt_kbits[0] * 1e3;
    let hi = cfg.urllc_pkt_kbits[1] * 1e3;
    let size_bits = rng.uniform_f64(lo, hi);
    Some(Packet {
        size_bits,
        arrival_step: step,
        remaining_bits: size_bits,
    })
}

/// Draws this epoch's eMBB demand: Gaussian, clamped below at zero.
pub fn draw_embb_demand(rng: &mut RandomSource, cfg: &NetworkConfig) -> f64 {
    rng.gaussian(cfg.embb_mean_mbps, cfg.embb_std_mbps).max(0.0)
}

/// One random-walk step: a fixed-length displacement in a uniformly random
/// direction, reflected at the area boundaries.
pub fn random_walk(
    position: (f64, f64),
    rng: &mut RandomSource,
    cfg: &NetworkConfig,
) -> (f64, f64) {
    let heading = rng.uniform_f64(0.0, std::f64::consts::TAU);
    let x = position.0 + cfg.mobility_step_m * heading.cos();
    let y = position.1 + cfg.mobility_step_m * heading.sin();
    (reflect(x, cfg.area_side_m), reflect(y, cfg.area_side_m))
}

fn reflect(mut v: f64, side: f64) -> f64 {
    loop {
        if v < 0.0 {
            v = -v;
        } else if v > side {
            v = 2.0 * side - v;
        } else {
            return v;
        }
    }
}

/// Distance from a position to the base station at the area center.
pub fn distance_to_gnb(position: (f64, f64), cfg: &NetworkConfig) -> f64 {
    let cx = cfg.area_side_m / 2.0;
    let cy = cfg.area_side_m / 2.0;
    ((position.0 - cx).powi(2) + (position.1 - cy).powi(2)).sqrt()
}

/// Creates the UE population: URLLC then eMBB then mMTC, ids in that order,
/// positions uniform over the square. mMTC positions are fixed for the whole
/// episode and their channel is never evaluated.
pub fn init_population(rng: &mut RandomSource, cfg: &NetworkConfig) -> Vec<UEState> {
    let mut ues = Vec::with_capacity((cfg.n_urllc + cfg.n_embb + cfg.n_mmtc) as usize);
    let mut id = 0;
    let mut push = |ues: &mut Vec<UEState>, slice: SliceKind, rng: &mut RandomSource| {
        let position = (
            rng.uniform_f64(0.0, cfg.area_side_m),
            rng.uniform_f64(0.0, cfg.area_side_m),
        );
        let pathloss = pathloss_db(distance_to_gnb(position, cfg), cfg);
        ues.push(UEState {
            id,
            slice,
            position,
            queue: VecDeque::new(),
            demand_mbps: if slice == SliceKind::Embb { Some(0.0) } else { None },
            pathloss_db: pathloss,
        });
        id += 1;
    };
    for _ in 0..cfg.n_urllc {
        push(&mut ues, SliceKind::Urllc, rng);
    }
    for _ in 0..cfg.n_embb {
        push(&mut ues, SliceKind::Embb, rng);
    }
    for _ in 0..cfg.n_mmtc {
        push(&mut ues, SliceKind::Mmtc, rng);
    }
    ues
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> NetworkConfig {
        NetworkConfig::default()
    }

    #[test]
    fn degenerate_bernoulli() {
        let mut rng = RandomSource::new(1);
        let always = NetworkConfig {
            urllc_arrival_p: 1.0,
            ..cfg()
        };
        let never = NetworkConfig {
            urllc_arrival_p: 0.0,
            ..cfg()
        };
        for step in 0..100 {
            assert!(draw_urllc_arrival(&mut rng, &always, step).is_some());
            assert!(draw_urllc_arrival(&mut rng, &never, step).is_none());
        }
    }

    #[test]
    fn arrival_frequency_matches_probability() {
        let mut rng = RandomSource::new(2);
        let c = cfg();
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| draw_urllc_arrival(&mut rng, &c, 0).is_some())
            .count();
        let freq = hits as f64 / n as f64;
        assert_abs_diff_eq!(freq, 0.9, epsilon = 0.01);
    }

    #[test]
    fn packet_sizes_inside_configured_interval() {
        let mut rng = RandomSource::new(3);
        let c = cfg();
        for step in 0..10_000 {
            if let Some(p) = draw_urllc_arrival(&mut rng, &c, step) {
                assert!(p.size_bits >= 1.5e6 && p.size_bits <= 4.0e6);
                assert_eq!(p.remaining_bits, p.size_bits);
                assert_eq!(p.arrival_step, step);
            }
        }
    }

    #[test]
    fn degenerate_gaussian_demand() {
        let mut rng = RandomSource::new(4);
        let c = NetworkConfig {
            embb_std_mbps: 0.0,
            ..cfg()
        };
        for _ in 0..100 {
            assert_eq!(draw_embb_demand(&mut rng, &c), 7.0);
        }
    }

    #[test]
    fn demand_moments_match() {
        let mut rng = RandomSource::new(5);
        let c = cfg();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| draw_embb_demand(&mut rng, &c)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 7.0, epsilon = 0.02);
        assert_abs_diff_eq!(var.sqrt(), 0.7, epsilon = 0.02);
    }

    #[test]
    fn demand_clamped_at_zero() {
        let mut rng = RandomSource::new(6);
        let c = NetworkConfig {
            embb_mean_mbps: -5.0,
            embb_std_mbps: 0.0,
            ..cfg()
        };
        assert_eq!(draw_embb_demand(&mut rng, &c), 0.0);
    }

    #[test]
    fn zero_step_walk_is_stationary() {
        let mut rng = RandomSource::new(7);
        let c = NetworkConfig {
            mobility_step_m: 0.0,
            ..cfg()
        };
        assert_eq!(random_walk((100.0, 200.0), &mut rng, &c), (100.0, 200.0));
    }

    #[test]
    fn walk_stays_inside_area() {
        let mut rng = RandomSource::new(8);
        let c = cfg();
        let mut pos = (2.0, 2.0);
        for _ in 0..10_000 {
            pos = random_walk(pos, &mut rng, &c);
            assert!(pos.0 >= 0.0 && pos.0 <= c.area_side_m, "x escaped: {pos:?}");
            assert!(pos.1 >= 0.0 && pos.1 <= c.area_side_m, "y escaped: {pos:?}");
        }
    }

    #[test]
    fn interior_step_has_exact_length() {
        let mut rng = RandomSource::new(9);
        let c = cfg();
        let start = (750.0, 750.0);
        let end = random_walk(start, &mut rng, &c);
        let d = ((end.0 - start.0).powi(2) + (end.1 - start.1).powi(2)).sqrt();
        assert_abs_diff_eq!(d, 15.0, epsilon = 1e-9);
    }

    #[test]
    fn population_counts_and_order() {
        let mut rng = RandomSource::new(10);
        let c = cfg();
        let ues = init_population(&mut rng, &c);
        assert_eq!(ues.len(), 14);
        assert!(ues[..2].iter().all(|u| u.slice == SliceKind::Urllc));
        assert!(ues[2..4].iter().all(|u| u.slice == SliceKind::Embb));
        assert!(ues[4..].iter().all(|u| u.slice == SliceKind::Mmtc));
        for (i, ue) in ues.iter().enumerate() {
            assert_eq!(ue.id, i);
            assert!(ue.queue.is_empty());
            assert_eq!(ue.demand_mbps.is_some(), ue.slice == SliceKind::Embb);
        }
    }

    #[test]
    fn equal_seeds_give_identical_populations() {
        let c = cfg();
        let a = init_population(&mut RandomSource::new(11), &c);
        let b = init_population(&mut RandomSource::new(11), &c);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.position, y.position);
            assert_eq!(x.pathloss_db, y.pathloss_db);
        }
    }

    #[test]
    fn positions_are_uniform_over_the_square() {
        let mut rng = RandomSource::new(12);
        let c = cfg();
        let mut sum = (0.0, 0.0);
        let mut n = 0usize;
        for _ in 0..1_000 {
            for ue in init_population(&mut rng, &c) {
                sum.0 += ue.position.0;
                sum.1 += ue.position.1;
                n += 1;
            }
        }
        assert_abs_diff_eq!(sum.0 / n as f64, 750.0, epsilon = 10.0);
        assert_abs_diff_eq!(sum.1 / n as f64, 750.0, epsilon = 10.0);
    }
}

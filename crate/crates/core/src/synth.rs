//! Seeded random scenarios that are feasible by construction.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{validate, CellSpec, ChannelSpec, FlowSpec, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub cells: usize,
    pub flows: usize,
    pub max_hops: usize,
    pub k_range: (u64, u64),
    pub alpha_range: (f64, f64),
    pub w_range: (f64, f64),
    /// Each period is its minimum load times a factor drawn from this range.
    pub headroom: (f64, f64),
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            cells: 10,
            flows: 20,
            max_hops: 3,
            k_range: (10, 200),
            alpha_range: (1e-4, 1e-2),
            w_range: (1e4, 1e5),
            headroom: (1.2, 3.0),
        }
    }
}

pub fn random_scenario(options: &SynthOptions, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell_ids: Vec<String> = (0..options.cells).map(|i| format!("c{i}")).collect();
    let flows = (0..options.flows)
        .map(|i| {
            let hops = rng.gen_range(1..=options.max_hops.min(options.cells));
            let route: Vec<String> = sample(&mut rng, options.cells, hops)
                .into_iter()
                .map(|c| cell_ids[c].clone())
                .collect();
            let alpha: BTreeMap<String, f64> = route
                .iter()
                .map(|c| (c.clone(), rng.gen_range(options.alpha_range.0..=options.alpha_range.1)))
                .collect();
            let w = route
                .iter()
                .map(|c| (c.clone(), rng.gen_range(options.w_range.0..=options.w_range.1).round()))
                .collect();
            FlowSpec {
                id: format!("f{i}"),
                route,
                packet_size: rng.gen_range(options.k_range.0..=options.k_range.1),
                bits_per_symbol: 1,
                channel: ChannelSpec::PerHop(alpha),
                phy_rate: w,
            }
        })
        .collect();
    let mut scenario = Scenario {
        cells: cell_ids.iter().map(|id| CellSpec { id: id.clone(), period: 1.0 }).collect(),
        flows,
        rate_bounds: BTreeMap::new(),
    };
    let channels = validate(&scenario).expect("generous periods are feasible");
    for cell in &mut scenario.cells {
        let need = scenario
            .flows
            .iter()
            .zip(&channels)
            .filter_map(|(f, ch)| {
                f.phy_rate
                    .get(&cell.id)
                    .map(|w| f.packet_size as f64 / ((1.0 - 2.0 * ch.x_lower) * w))
            })
            .sum::<f64>();
        let factor = rng.gen_range(options.headroom.0..=options.headroom.1);
        cell.period = if need > 0.0 { need * factor } else { 1.0 };
    }
    scenario
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_scenarios_validate() {
        for seed in 0..20 {
            let s = random_scenario(&SynthOptions::default(), seed);
            assert_eq!(s.flows.len(), 20);
            validate(&s).unwrap();
        }
    }

    #[test]
    fn generation_is_seeded() {
        let o = SynthOptions::default();
        assert_eq!(random_scenario(&o, 3), random_scenario(&o, 3));
        assert_ne!(random_scenario(&o, 3), random_scenario(&o, 4));
    }
}

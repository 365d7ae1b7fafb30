use ctlab_core::flood::{
    simulate, FloodSetup, JamLevel, JammingProfile, LinkQuery, PathLoss, PerModel, ProtocolConfig, ProtocolKind,
    ThresholdPer, Topology,
};
use ctlab_core::phy::{PhyConfig, PhyMode};
use proptest::prelude::*;

/// Smooth SNR curve with extra loss for near-equal same-data signals.
struct SoftPer;

impl PerModel for SoftPer {
    fn per(&self, q: &LinkQuery) -> f64 {
        let len = q.payload_bytes as f64 / 32.0;
        let noise = 1.0 / (1.0 + ((q.snr_db - 6.0) / 1.5).exp());
        let beat = q.delta_p_db.map_or(0.0, |dp| 0.3 * (-dp / 2.0).exp());
        (1.0 - (1.0 - noise).powf(len) * (1.0 - beat)).clamp(0.0, 1.0)
    }
}

fn setup(kind: ProtocolKind, topo: Topology, level: JamLevel, payload: usize) -> FloodSetup {
    let sites = vec![topo.len() / 2];
    let mut topo = topo;
    if kind.is_collection() {
        let sources = (1..topo.len()).collect();
        topo = topo.with_sources(sources).unwrap();
    }
    FloodSetup::new(ProtocolConfig::new(kind), topo, PhyConfig::new(PhyMode::Ble1M), payload)
        .with_jamming(JammingProfile::for_level(level, sites))
}

fn kinds() -> impl Strategy<Value = ProtocolKind> {
    prop::sample::select(ProtocolKind::ALL.to_vec())
}

fn levels() -> impl Strategy<Value = JamLevel> {
    prop::sample::select(JamLevel::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_message_is_counted_once(
        kind in kinds(),
        level in levels(),
        n in 4usize..14,
        topo_seed in 0u64..50,
        seed in any::<u64>(),
        rounds in 1usize..5,
        payload in prop::sample::select(vec![8usize, 64]),
    ) {
        let topo = Topology::line(n, 12.0, &PathLoss::default(), topo_seed).unwrap();
        let s = setup(kind, topo, level, payload);
        let r = simulate(&s, &SoftPer, rounds, seed).unwrap();

        let per_round = if kind.is_collection() {
            s.protocol.messages_per_epoch.min(s.topology.sources.len())
        } else {
            s.topology.destinations.len()
        };
        prop_assert_eq!(r.generated, (rounds * per_round) as u64);
        prop_assert!(r.delivered <= r.generated);
        prop_assert_eq!(r.delivered + r.lost(), r.generated);
        prop_assert!((r.reliability - r.delivered as f64 / r.generated as f64).abs() < 1e-12);
        match r.latency_ms {
            None => prop_assert_eq!(r.delivered, 0),
            Some(l) => prop_assert!(r.delivered > 0 && l > 0.0 && l.is_finite()),
        }
        prop_assert!(r.energy_mj > 0.0 && r.energy_mj.is_finite());
        let targets = if kind.is_collection() { &s.topology.sources } else { &s.topology.destinations };
        prop_assert!(r.unreached.iter().all(|k| targets.contains(k)));

        prop_assert_eq!(simulate(&s, &SoftPer, rounds, seed).unwrap(), r);
    }
}

fn cluster() -> Topology {
    Topology::cluster(12, 15.0, &PathLoss::default(), 3).unwrap()
}

#[test]
fn lossless_dense_network_is_fully_reliable() {
    let per = ThresholdPer { snr_db: 5.0 };
    for kind in ProtocolKind::ALL {
        let r = simulate(&setup(kind, cluster(), JamLevel::None, 8), &per, 20, 1).unwrap();
        assert_eq!(r.reliability, 1.0, "{kind}");
        assert!(r.unreached.is_empty());
    }
}

#[test]
fn rof_costs_at_least_glossy_when_lossless() {
    let per = ThresholdPer { snr_db: 5.0 };
    for payload in [8, 64] {
        let energy = |kind| simulate(&setup(kind, cluster(), JamLevel::None, payload), &per, 10, 4).unwrap().energy_mj;
        assert!(energy(ProtocolKind::RoF) >= energy(ProtocolKind::Glossy), "{payload} B");
        assert!(energy(ProtocolKind::RoFSc) >= energy(ProtocolKind::Glossy), "{payload} B");
    }
}

#[test]
fn energy_grows_with_radio_on_time() {
    let per = ThresholdPer { snr_db: 5.0 };
    for kind in ProtocolKind::ALL {
        let run = |tx_n: usize, payload: usize| {
            let mut s = setup(kind, cluster(), JamLevel::None, payload);
            s.protocol.tx_n = tx_n;
            simulate(&s, &per, 5, 9).unwrap().energy_mj
        };
        assert!(run(6, 8) > run(3, 8), "{kind}: more transmissions");
        assert!(run(6, 64) > run(6, 8), "{kind}: longer slots");
    }
}

#[test]
fn jamming_never_helps_a_lossless_network() {
    let per = ThresholdPer { snr_db: 5.0 };
    for kind in ProtocolKind::ALL {
        let rel = |level| simulate(&setup(kind, cluster(), level, 8), &per, 20, 2).unwrap().reliability;
        assert!(rel(JamLevel::Strong) <= rel(JamLevel::None), "{kind}");
    }
}

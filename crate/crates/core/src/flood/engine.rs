use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use super::config::Trigger;
use super::{FloodReport, FloodSetup, LinkQuery, PerModel};
use crate::math::{dbm_to_mw, linear_to_db, mw_to_dbm};
use crate::rng::{derive_seed, stream_rng, SimRng};
use crate::Result;

/// Message carried by a flood. Sync and ack floods use dedicated ids.
type MsgId = u32;
const SYNC: MsgId = u32::MAX;
const ACK: MsgId = u32::MAX - 1;

/// Static per-run quantities.
struct Ctx<'a> {
    setup: &'a FloodSetup,
    per: &'a dyn PerModel,
    n: usize,
    slot_ms: f64,
    airtime_ms: f64,
    noise_mw: f64,
    capture_db: f64,
    /// `rx_mw[i * n + j]`: power of node `i` at node `j`.
    rx_mw: Vec<f64>,
    cfo: Vec<f64>,
    jammers: Vec<Jammer>,
}

struct Jammer {
    channel: f64,
    phase_ms: f64,
    /// Power at each node, mW.
    at_node: Vec<f64>,
}

impl Ctx<'_> {
    /// Jammer power at `node` for a frame starting at `t0` on `channel`.
    fn jam_mw(&self, node: usize, channel: f64, t0: f64) -> f64 {
        let jam = &self.setup.jamming;
        let mut total = 0.0;
        for j in &self.jammers {
            if j.channel != channel {
                continue;
            }
            let x = (t0 - j.phase_ms).rem_euclid(jam.period_ms);
            if x < jam.burst_ms || x + self.airtime_ms > jam.period_ms {
                total += j.at_node[node];
            }
        }
        total
    }
}

/// Per-node view of one flood.
#[derive(Clone, Default)]
struct NodeFlood {
    participant: bool,
    initiator: bool,
    holds: Option<MsgId>,
    first_rx: Option<usize>,
    rx_prev: bool,
    tx_count: usize,
    cycle_start: Option<usize>,
    done: bool,
    /// Some empty listening slot had energy above the ND threshold.
    noisy: bool,
}

struct FloodPlan<'p> {
    start_ms: f64,
    max_slots: usize,
    /// Channel of slot `s` is `channels[(channel_offset + s) % len]` when
    /// hopping per slot, otherwise `channels[channel_offset % len]`.
    channels: &'p [f64],
    channel_offset: usize,
    hop_per_slot: bool,
    trigger: Trigger,
}

/// Runs one flood. `initiators` start holding their own message.
fn flood(
    ctx: &Ctx,
    plan: &FloodPlan,
    participants: &[bool],
    initiators: &[(usize, MsgId)],
    energy: &mut [f64],
    rng: &mut SimRng,
) -> Vec<NodeFlood> {
    let radio = &ctx.setup.radio;
    let tx_n = ctx.setup.protocol.tx_n;
    let nd_threshold = ctx.setup.protocol.nd_threshold_dbm;
    let mut st = vec![NodeFlood::default(); ctx.n];
    for (k, s) in st.iter_mut().enumerate() {
        s.participant = participants[k];
        s.done = !participants[k];
    }
    for &(k, m) in initiators {
        if participants[k] {
            st[k].initiator = true;
            st[k].holds = Some(m);
            st[k].cycle_start = Some(0);
        }
    }
    let tx_mj = plan_mj(ctx.slot_ms, radio.tx_power_mw);
    let rx_mj = plan_mj(ctx.slot_ms, radio.rx_power_mw);
    let nd_mj = plan_mj(radio.nd_sample_ms, radio.rx_power_mw);
    let nd = ctx.setup.protocol.noise_detection();

    let mut tx: Vec<(usize, MsgId)> = Vec::new();
    for s in 0..plan.max_slots {
        if st.iter().all(|x| x.done) {
            break;
        }
        tx.clear();
        for (k, x) in st.iter().enumerate() {
            if x.done {
                continue;
            }
            let fires = match plan.trigger {
                Trigger::RxTx => {
                    x.holds.is_some() && x.tx_count < tx_n && ((s == 0 && x.initiator) || x.rx_prev)
                }
                Trigger::RxTxTx => x.cycle_start.is_some_and(|c| s >= c && (s - c) % 3 != 2 && (s - c) / 3 < tx_n),
            };
            if fires {
                tx.push((k, x.holds.unwrap_or(SYNC)));
            }
        }
        let ch_idx = if plan.hop_per_slot { plan.channel_offset + s } else { plan.channel_offset };
        let channel = plan.channels[ch_idx % plan.channels.len()];
        let t0 = plan.start_ms + s as f64 * ctx.slot_ms;

        for j in 0..ctx.n {
            if st[j].done || tx.iter().any(|&(k, _)| k == j) {
                continue;
            }
            energy[j] += rx_mj;
            let jam = ctx.jam_mw(j, channel, t0);
            let got = receive(ctx, j, &tx, jam, rng);
            let x = &mut st[j];
            match got {
                Some(m) => {
                    if x.holds.is_none() {
                        x.holds = Some(m);
                        x.first_rx = Some(s);
                        if plan.trigger == Trigger::RxTxTx {
                            x.cycle_start = Some(s + 1);
                        }
                    }
                    x.rx_prev = true;
                }
                None => {
                    x.rx_prev = false;
                    if nd {
                        energy[j] += nd_mj;
                        let total: f64 = ctx.noise_mw + jam + tx.iter().map(|&(k, _)| ctx.rx_mw[k * ctx.n + j]).sum::<f64>();
                        if mw_to_dbm(total) > nd_threshold {
                            x.noisy = true;
                        }
                    }
                }
            }
        }
        for &(k, _) in &tx {
            energy[k] += tx_mj;
            let x = &mut st[k];
            x.tx_count += 1;
            x.rx_prev = false;
            x.done = match plan.trigger {
                Trigger::RxTx => x.tx_count >= tx_n,
                Trigger::RxTxTx => x.cycle_start.is_some_and(|c| s - c >= 3 * (tx_n - 1) + 1),
            };
        }
    }
    st
}

fn plan_mj(ms: f64, mw: f64) -> f64 {
    ms * mw * 1e-3
}

/// Decides whether node `j` decodes a frame this slot; returns the message.
fn receive(ctx: &Ctx, j: usize, tx: &[(usize, MsgId)], jam_mw: f64, rng: &mut SimRng) -> Option<MsgId> {
    let n = ctx.n;
    let mut best = None::<(usize, MsgId, f64)>;
    for &(k, m) in tx {
        let p = ctx.rx_mw[k * n + j];
        if best.is_none_or(|(_, _, bp)| p > bp) {
            best = Some((k, m, p));
        }
    }
    let (bk, bm, bp) = best?;
    let (mut same, mut diff) = (0.0, 0.0);
    let mut second_same: Option<(usize, f64)> = None;
    for &(k, m) in tx {
        if k == bk {
            continue;
        }
        let p = ctx.rx_mw[k * n + j];
        if m == bm {
            same += p;
            if second_same.is_none_or(|(_, sp)| p > sp) {
                second_same = Some((k, p));
            }
        } else {
            diff += p;
        }
    }
    let capture = ctx.capture_db;
    let query = if diff > 0.0 {
        // different data: only capture of the strongest can succeed
        if linear_to_db(bp / (same + diff)) < capture {
            return None;
        }
        LinkQuery {
            snr_db: linear_to_db(bp / (ctx.noise_mw + jam_mw + diff)),
            delta_p_db: None,
            rfo_hz: 0.0,
            payload_bytes: ctx.setup.payload_bytes,
        }
    } else {
        let snr_db = linear_to_db(bp / (ctx.noise_mw + jam_mw));
        let dp = if same > 0.0 { linear_to_db(bp / same) } else { f64::INFINITY };
        match second_same {
            Some((sk, _)) if dp < capture => LinkQuery {
                snr_db,
                delta_p_db: Some(dp),
                rfo_hz: (ctx.cfo[bk] - ctx.cfo[sk]).abs(),
                payload_bytes: ctx.setup.payload_bytes,
            },
            _ => LinkQuery { snr_db, delta_p_db: None, rfo_hz: 0.0, payload_bytes: ctx.setup.payload_bytes },
        }
    };
    let per = ctx.per.per(&query);
    (rng.random::<f64>() >= per).then_some(bm)
}

fn build_ctx<'a>(setup: &'a FloodSetup, per: &'a dyn PerModel, seed: u64) -> Ctx<'a> {
    let topo = &setup.topology;
    let radio = &setup.radio;
    let n = topo.len();
    let mut rx_mw = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rx_mw[i * n + j] = dbm_to_mw(radio.tx_power_dbm + topo.gain_db(i, j));
            }
        }
    }
    let limit = setup.phy.mode.cfo_limit_hz();
    let mut cfo_rng = stream_rng(seed, 0xcf0);
    let cfo = (0..n).map(|_| cfo_rng.random_range(-limit..=limit)).collect();

    let jam = &setup.jamming;
    let mut jammers = Vec::new();
    if jam.is_active() {
        let mut jrng = stream_rng(seed, 0x3a3);
        let jam_dbm = mw_to_dbm(jam.power_mw);
        for &site in &jam.sites {
            let at_node: Vec<f64> = (0..n)
                .map(|j| {
                    let g = if j == site { radio.jammer_coupling_db } else { topo.gain_db(site, j) };
                    dbm_to_mw(jam_dbm + g)
                })
                .collect();
            for &channel in jam.channels() {
                let phase_ms = jrng.random::<f64>() * jam.period_ms;
                jammers.push(Jammer { channel, phase_ms, at_node: at_node.clone() });
            }
        }
    }
    Ctx {
        setup,
        per,
        n,
        slot_ms: setup.slot_ms(),
        airtime_ms: setup.phy.frame_airtime(setup.payload_bytes) * 1e3,
        noise_mw: dbm_to_mw(radio.noise_floor_dbm),
        capture_db: radio.capture_threshold(setup.phy.mode),
        rx_mw,
        cfo,
        jammers,
    }
}

/// Accumulates deliveries across rounds.
struct Tally {
    generated: u64,
    delivered: u64,
    latency_sum: f64,
    /// Nodes that were owed at least one message, and those that got one.
    targeted: Vec<bool>,
    reached: Vec<bool>,
}

impl Tally {
    fn expect(&mut self, node: usize) {
        self.generated += 1;
        self.targeted[node] = true;
    }

    fn deliver(&mut self, node: usize, latency_ms: f64) {
        self.delivered += 1;
        self.latency_sum += latency_ms;
        self.reached[node] = true;
    }
}

pub(super) fn run(setup: &FloodSetup, per: &dyn PerModel, n_rounds: usize, seed: u64) -> Result<FloodReport> {
    let ctx = build_ctx(setup, per, seed);
    let mut energy = vec![0.0; ctx.n];
    let mut tally = Tally {
        generated: 0,
        delivered: 0,
        latency_sum: 0.0,
        targeted: vec![false; ctx.n],
        reached: vec![false; ctx.n],
    };
    let round_base = derive_seed(seed, 0x0f10);
    for r in 0..n_rounds {
        let mut rng = stream_rng(round_base, r as u64);
        if setup.protocol.kind.is_collection() {
            collection_epoch(&ctx, r, &mut tally, &mut energy, &mut rng);
        } else {
            dissemination_round(&ctx, r, &mut tally, &mut energy, &mut rng);
        }
    }
    let topo = &setup.topology;
    let targets = if setup.protocol.kind.is_collection() { &topo.sources } else { &topo.destinations };
    let unreached = targets.iter().copied().filter(|&k| tally.targeted[k] && !tally.reached[k]).collect();
    Ok(FloodReport {
        rounds: n_rounds,
        generated: tally.generated,
        delivered: tally.delivered,
        reliability: tally.delivered as f64 / tally.generated as f64,
        latency_ms: (tally.delivered > 0).then(|| tally.latency_sum / tally.delivered as f64),
        energy_mj: energy.iter().sum::<f64>() / ctx.n as f64,
        unreached,
    })
}

fn max_slots(ctx: &Ctx, duration_ms: f64) -> usize {
    libm::floor(duration_ms / ctx.slot_ms) as usize
}

fn dissemination_round(ctx: &Ctx, r: usize, tally: &mut Tally, energy: &mut [f64], rng: &mut SimRng) {
    let proto = &ctx.setup.protocol;
    let topo = &ctx.setup.topology;
    let plan = FloodPlan {
        start_ms: r as f64 * proto.period_ms,
        max_slots: max_slots(ctx, proto.flood_duration_ms),
        channels: &proto.channels_ghz,
        channel_offset: 0,
        hop_per_slot: true,
        trigger: proto.trigger,
    };
    let all = vec![true; ctx.n];
    let st = flood(ctx, &plan, &all, &[(topo.initiator, 0)], energy, rng);
    for &d in &topo.destinations {
        tally.expect(d);
        if let Some(s) = st[d].first_rx {
            tally.deliver(d, (s + 1) as f64 * ctx.slot_ms);
        }
    }
}

/// One Crystal epoch: a sync flood from the sink, then TA pairs until the
/// sink has seen `max_silent_t` empty T phases in a row.
fn collection_epoch(ctx: &Ctx, r: usize, tally: &mut Tally, energy: &mut [f64], rng: &mut SimRng) {
    let proto = &ctx.setup.protocol;
    let topo = &ctx.setup.topology;
    let sink = topo.initiator;
    let pairs = proto.effective_ta_pairs();
    let [s_period, t_period, a_period] = proto.crystal_periods_ms;
    let [s_dur, t_dur, a_dur] = proto.crystal_durations_ms;
    let epoch_start = r as f64 * proto.epoch_ms;
    let phases_per_epoch = 1 + 2 * pairs;
    let plan = |start_ms: f64, dur: f64, phase: usize| FloodPlan {
        start_ms,
        max_slots: max_slots(ctx, dur),
        channels: &proto.channels_ghz,
        channel_offset: r * phases_per_epoch + phase,
        hop_per_slot: false,
        trigger: Trigger::RxTx,
    };

    // message k of this epoch belongs to source `origin[k]`
    let n_msgs = proto.messages_per_epoch.min(topo.sources.len());
    let origin: Vec<usize> = sample(rng, topo.sources.len(), n_msgs).into_iter().map(|i| topo.sources[i]).collect();
    let mut pending: Vec<Option<MsgId>> = vec![None; ctx.n];
    for (k, &o) in origin.iter().enumerate() {
        tally.expect(o);
        pending[o] = Some(k as MsgId);
    }
    let mut delivered = vec![false; n_msgs];

    let all = vec![true; ctx.n];
    // A node missing S keeps the schedule learned in earlier epochs, so
    // the sync flood only costs energy here.
    flood(ctx, &plan(epoch_start, s_dur, 0), &all, &[(sink, SYNC)], energy, rng);
    let mut awake = all;
    let mut missed_a = vec![0usize; ctx.n];
    let mut silent = 0usize;

    for i in 0..pairs {
        if !awake.iter().any(|&a| a) {
            break;
        }
        let t_start = epoch_start + s_period + i as f64 * (t_period + a_period);
        let initiators: Vec<(usize, MsgId)> =
            (0..ctx.n).filter_map(|k| if awake[k] { pending[k].map(|m| (k, m)) } else { None }).collect();
        let st_t = flood(ctx, &plan(t_start, t_dur, 1 + 2 * i), &awake, &initiators, energy, rng);

        let mut ack = None;
        if awake[sink] {
            match (st_t[sink].holds, st_t[sink].first_rx) {
                (Some(m), Some(s)) => {
                    let m_idx = m as usize;
                    if !delivered[m_idx] {
                        delivered[m_idx] = true;
                        tally.deliver(origin[m_idx], t_start - epoch_start + (s + 1) as f64 * ctx.slot_ms);
                    }
                    ack = Some(m);
                    silent = 0;
                }
                _ => {
                    if !(proto.noise_detection() && st_t[sink].noisy) {
                        silent += 1;
                    }
                }
            }
        }
        let sleep_cmd = silent >= proto.max_silent_t;

        let a_start = t_start + t_period;
        let st_a = flood(ctx, &plan(a_start, a_dur, 2 + 2 * i), &awake, &[(sink, ACK)], energy, rng);
        for k in 0..ctx.n {
            if !awake[k] || k == sink {
                continue;
            }
            if st_a[k].holds.is_some() {
                missed_a[k] = 0;
                if ack.is_some() && pending[k] == ack {
                    pending[k] = None;
                }
                if sleep_cmd {
                    awake[k] = false;
                }
            } else {
                let noisy = proto.noise_detection() && (st_t[k].noisy || st_a[k].noisy);
                if !noisy {
                    missed_a[k] += 1;
                }
                if missed_a[k] >= proto.max_silent_t {
                    awake[k] = false;
                }
            }
        }
        if sleep_cmd {
            awake[sink] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flood::{JammingProfile, ProtocolConfig, ProtocolKind, ThresholdPer, Topology};
    use crate::phy::{PhyConfig, PhyMode};

    fn setup(kind: ProtocolKind) -> FloodSetup {
        let t = Topology::from_gains(
            vec![vec![0.0, -60.0, -60.0], vec![-60.0, 0.0, -60.0], vec![-60.0, -60.0, 0.0]],
            0,
        )
        .unwrap();
        FloodSetup::new(ProtocolConfig::new(kind), t, PhyConfig::new(PhyMode::Ble1M), 8)
    }

    #[test]
    fn jammer_overlap_window() {
        let mut s = setup(ProtocolKind::Glossy);
        s.jamming = JammingProfile::mild(vec![1]);
        let per = ThresholdPer { snr_db: 5.0 };
        let mut ctx = build_ctx(&s, &per, 0);
        ctx.jammers[0].phase_ms = 0.0;
        let air = ctx.airtime_ms;
        assert!(ctx.jam_mw(2, 2.480, 0.0) > 0.0);
        assert!(ctx.jam_mw(2, 2.480, 4.99) > 0.0);
        assert_eq!(ctx.jam_mw(2, 2.480, 6.0), 0.0);
        // a frame ending just after the next burst starts is hit
        assert!(ctx.jam_mw(2, 2.480, 13.0 - air / 2.0) > 0.0);
        assert_eq!(ctx.jam_mw(2, 2.426, 0.0), 0.0);
        assert!(ctx.jam_mw(1, 2.480, 0.0) > ctx.jam_mw(2, 2.480, 0.0));
    }

    #[test]
    fn rof_cycles_transmit_twice_per_three_slots() {
        let s = setup(ProtocolKind::RoF);
        let per = ThresholdPer { snr_db: 5.0 };
        let ctx = build_ctx(&s, &per, 0);
        let mut energy = vec![0.0; 3];
        let plan = FloodPlan {
            start_ms: 0.0,
            max_slots: 100,
            channels: &[2.480],
            channel_offset: 0,
            hop_per_slot: true,
            trigger: Trigger::RxTxTx,
        };
        let st = flood(&ctx, &plan, &[true; 3], &[(0, 0)], &mut energy, &mut stream_rng(0, 0));
        assert!(st.iter().all(|x| x.done && x.holds == Some(0)));
        assert_eq!(st[0].tx_count, 2 * s.protocol.tx_n);
        assert_eq!(st[1].first_rx, Some(0));
    }

    #[test]
    fn colliding_different_data_is_lost_without_capture() {
        let s = setup(ProtocolKind::Crystal);
        let per = ThresholdPer { snr_db: 5.0 };
        let ctx = build_ctx(&s, &per, 0);
        let mut rng = stream_rng(0, 0);
        // equal powers, different messages
        assert_eq!(receive(&ctx, 0, &[(1, 4), (2, 5)], 0.0, &mut rng), None);
        // same message: beating, lossless under the threshold model
        assert_eq!(receive(&ctx, 0, &[(1, 4), (2, 4)], 0.0, &mut rng), Some(4));
    }
}

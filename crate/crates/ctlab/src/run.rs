//! Parallel execution of the experiment specs. Every packet, cell and round
//! draws from its own seeded stream and results are merged in spec order, so
//! outputs do not depend on the thread count.

use std::sync::atomic::{AtomicUsize, Ordering};

use ctlab_core::channel::{ChannelScenario, TransmitterProfile};
use ctlab_core::flood::{
    simulate, FloodReport, FloodSetup, JamLevel, JammingProfile, PerGrid, PerTable, ProtocolConfig, ProtocolKind,
    Topology,
};
use ctlab_core::link::{BatchResult, LinkScenario};
use ctlab_core::metrics::{count_transmitters_with, estimate_rfo, ErrorHistogram, RfoEstimate, TransmitterCount};
use ctlab_core::phy::{PhyConfig, PhyMode};
use ctlab_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::cache;
use crate::error::{from_core_run, from_core_setup, CliError, Result};
use crate::spec::{FloodSpec, HistogramSpec, SweepSpec, TempSweepSpec, TopologySpec};

/// Packets simulated per parallel work unit.
const CHUNK: u64 = 250;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the seed in the spec file.
    pub seed: Option<u64>,
    /// Report per-point completion on stderr.
    pub progress: bool,
}

struct Progress<'a> {
    label: &'a str,
    enabled: bool,
    total: usize,
    remaining: Vec<AtomicUsize>,
    finished: AtomicUsize,
}

impl<'a> Progress<'a> {
    fn new(label: &'a str, enabled: bool, units_per_point: &[usize]) -> Self {
        Progress {
            label,
            enabled,
            total: units_per_point.len(),
            remaining: units_per_point.iter().map(|&u| AtomicUsize::new(u)).collect(),
            finished: AtomicUsize::new(0),
        }
    }

    fn unit_done(&self, point: usize) {
        if self.remaining[point].fetch_sub(1, Ordering::AcqRel) == 1 && self.enabled {
            let k = self.finished.fetch_add(1, Ordering::AcqRel) + 1;
            eprintln!("[{}] point {} done ({}/{})", self.label, point + 1, k, self.total);
        }
    }
}

/// Runs every scenario for its packet count, splitting the work into chunks,
/// and returns one merged batch per scenario.
fn run_batches(
    label: &str,
    scenarios: &[(LinkScenario, u64, u64)],
    with_histogram: bool,
    progress: bool,
) -> Result<Vec<BatchResult>> {
    for (s, _, _) in scenarios {
        s.validate().map_err(from_core_setup)?;
    }
    let units: Vec<(usize, u64)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, (_, _, n))| (0..n.div_ceil(CHUNK)).map(move |c| (i, c)))
        .collect();
    let per_point: Vec<usize> = scenarios.iter().map(|(_, _, n)| n.div_ceil(CHUNK) as usize).collect();
    let prog = Progress::new(label, progress, &per_point);
    let parts = units
        .par_iter()
        .map(|&(i, c)| {
            let (s, seed, n) = &scenarios[i];
            let r = s.run(*seed, c * CHUNK..((c + 1) * CHUNK).min(*n), with_histogram);
            prog.unit_done(i);
            r
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(from_core_run)?;
    let mut out: Vec<Option<BatchResult>> = vec![None; scenarios.len()];
    for (&(i, _), part) in units.iter().zip(parts) {
        match &mut out[i] {
            Some(acc) => acc.merge(&part).map_err(from_core_run)?,
            slot => *slot = Some(part),
        }
    }
    out.into_iter()
        .map(|b| b.ok_or_else(|| CliError::Internal("empty batch".into())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub phy: &'static str,
    pub n_tx: usize,
    pub rfo_hz: f64,
    pub delta_p_db: f64,
    pub snr_db: f64,
    pub temp_c: f64,
    pub payload_bytes: usize,
    pub n_packets: u64,
    pub prr: f64,
    pub per: f64,
    pub plr: f64,
    pub ber: Option<f64>,
}

/// `n_tx` transmitters with carriers spread evenly over `[-rfo/2, rfo/2]`,
/// the first at full power and the rest `delta_p_db` weaker. The last one
/// sits at `temp_c` with the given drift slope.
pub fn sweep_channel(spec: &SweepSpec, n_tx: usize, rfo: f64, dp: f64, snr: f64, temp_c: f64) -> ChannelScenario {
    let weak = 10f64.powf(-dp / 20.0);
    let mut tx: Vec<TransmitterProfile> = (0..n_tx)
        .map(|k| {
            let cfo = if n_tx == 1 { 0.0 } else { k as f64 * rfo / (n_tx - 1) as f64 - rfo / 2.0 };
            TransmitterProfile::new(cfo, if k == 0 { 1.0 } else { weak })
        })
        .collect();
    if let Some(last) = tx.last_mut() {
        last.temp_ref = spec.reference_temp_c;
        *last = last.clone().with_linear_drift(spec.drift_ppm_per_c).at_temperature(temp_c);
    }
    ChannelScenario::new(tx, snr)
}

/// Grid points in CSV order. Single-transmitter points ignore the RFO and
/// ΔP axes and appear once with both set to zero.
pub fn sweep_points(spec: &SweepSpec) -> Vec<(PhyMode, usize, f64, f64, f64, f64, usize)> {
    let mut pts = Vec::new();
    for &phy in &spec.phys {
        for &n in &spec.n_tx {
            let (rfos, dps) = if n == 1 { (vec![0.0], vec![0.0]) } else { (spec.rfo_hz.clone(), spec.delta_p_db.clone()) };
            for &rfo in &rfos {
                for &dp in &dps {
                    for &snr in &spec.snr_db {
                        for &t in &spec.temperature_c {
                            for &b in &spec.payload_bytes {
                                pts.push((phy, n, rfo, dp, snr, t, b));
                            }
                        }
                    }
                }
            }
        }
    }
    pts
}

pub fn run_sweep(spec: &SweepSpec, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let base = opts.seed.unwrap_or(spec.base_seed);
    let rx = spec.receiver.config()?;
    let pts = sweep_points(spec);
    let scenarios: Vec<(LinkScenario, u64, u64)> = pts
        .iter()
        .enumerate()
        .map(|(i, &(phy, n, rfo, dp, snr, t, b))| {
            let mut s = LinkScenario::new(PhyConfig::new(phy), sweep_channel(spec, n, rfo, dp, snr, t), b);
            s.receiver = rx;
            (s, derive_seed(base, i as u64), spec.packets_per_point)
        })
        .collect();
    let batches = run_batches("sweep", &scenarios, false, opts.progress)?;
    pts.iter()
        .zip(batches)
        .map(|(&(phy, n, rfo, dp, snr, t, b), r)| {
            let m = r.tally.metrics().map_err(from_core_run)?;
            Ok(SweepRow {
                phy: phy.name(),
                n_tx: n,
                rfo_hz: rfo,
                delta_p_db: dp,
                snr_db: snr,
                temp_c: t,
                payload_bytes: b,
                n_packets: m.n_packets,
                prr: m.prr,
                per: m.per,
                plr: m.plr,
                ber: m.ber,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bit_index: usize,
    pub time_us: f64,
    pub errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakOut {
    pub freq_hz: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RfoReport {
    pub status: &'static str,
    pub message: Option<String>,
    pub n_packets: u64,
    pub n_received: u64,
    pub n_errored: u64,
    pub resolution_hz: f64,
    pub dominant_hz: Option<f64>,
    pub peaks: Vec<PeakOut>,
    pub significant_peaks: usize,
    pub transmitters_estimate: Option<usize>,
    pub transmitters_lower_bound: Option<usize>,
    pub transmitters_confident: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramResult {
    pub histogram: ErrorHistogram,
    pub estimate: Option<RfoEstimate>,
    pub report: RfoReport,
}

impl HistogramResult {
    pub fn rows(&self) -> Vec<HistogramRow> {
        let dt = 1e6 / self.histogram.bit_rate;
        self.histogram
            .counts
            .iter()
            .enumerate()
            .map(|(i, &e)| HistogramRow { bit_index: i, time_us: i as f64 * dt, errors: e })
            .collect()
    }
}

fn rfo_report(
    hist: &ErrorHistogram,
    n_packets: u64,
    est: &std::result::Result<RfoEstimate, ctlab_core::Error>,
    share: f64,
) -> RfoReport {
    let mut r = RfoReport {
        status: "ok",
        message: None,
        n_packets,
        n_received: hist.n_received,
        n_errored: hist.n_errored,
        resolution_hz: hist.resolution(),
        dominant_hz: None,
        peaks: Vec::new(),
        significant_peaks: 0,
        transmitters_estimate: None,
        transmitters_lower_bound: None,
        transmitters_confident: None,
    };
    match est {
        Ok(e) => {
            let TransmitterCount { estimate, lower_bound, confident } = count_transmitters_with(e, share);
            r.dominant_hz = e.dominant();
            r.peaks = e.peaks.iter().map(|p| PeakOut { freq_hz: p.freq_hz, magnitude: p.magnitude }).collect();
            r.significant_peaks = e.significant_peaks(share).count();
            r.transmitters_estimate = Some(estimate);
            r.transmitters_lower_bound = Some(lower_bound);
            r.transmitters_confident = Some(confident);
        }
        Err(e) => {
            r.status = "insufficient_data";
            r.message = Some(e.to_string());
        }
    }
    r
}

fn histogram_link(spec: &HistogramSpec) -> Result<LinkScenario> {
    let tx = spec
        .transmitters
        .iter()
        .map(|t| TransmitterProfile::new(t.cfo_hz, 10f64.powf(t.power_db / 20.0)))
        .collect();
    let mut s = LinkScenario::new(PhyConfig::new(spec.phy), ChannelScenario::new(tx, spec.snr_db), spec.payload_bytes);
    s.receiver = spec.receiver.config()?;
    s.same_data = spec.same_data;
    Ok(s)
}

/// Runs the histogram study. An estimator failure is reported in the result,
/// not as an error, so the caller can still write the histogram.
pub fn run_histogram(spec: &HistogramSpec, opts: &RunOptions) -> Result<HistogramResult> {
    spec.validate()?;
    let link = histogram_link(spec)?;
    let seed = opts.seed.unwrap_or(spec.seed);
    let batch = run_batches("histogram", &[(link, seed, spec.packets)], true, opts.progress)?.remove(0);
    let histogram = batch.histogram.ok_or_else(|| CliError::Internal("histogram missing".into()))?;
    let est = estimate_rfo(&histogram, &spec.estimator.config()?);
    let report = rfo_report(&histogram, spec.packets, &est, spec.estimator.significance);
    let estimate = match est {
        Ok(e) => Some(e),
        Err(ctlab_core::Error::InsufficientData(_)) => None,
        Err(e) => return Err(from_core_run(e)),
    };
    Ok(HistogramResult { histogram, estimate, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TempRow {
    pub temp_c: f64,
    pub true_rfo_hz: f64,
    pub est_rfo_hz: Option<f64>,
    pub n_packets: u64,
    pub n_errored: u64,
    pub prr: f64,
    pub per: f64,
    pub plr: f64,
}

pub fn temp_channel(spec: &TempSweepSpec, temp_c: f64) -> ChannelScenario {
    let mut heated = TransmitterProfile::new(spec.heated_cfo_hz, 10f64.powf(-spec.delta_p_db / 20.0))
        .with_linear_drift(spec.slope_ppm_per_c)
        .at_temperature(temp_c);
    heated.temp_ref = spec.reference_temp_c;
    heated.allow_increasing_drift = spec.allow_increasing_drift;
    let reference = TransmitterProfile::new(spec.reference_cfo_hz, 1.0);
    ChannelScenario::new(vec![reference, heated], spec.snr_db)
}

pub fn run_tempsweep(spec: &TempSweepSpec, opts: &RunOptions) -> Result<Vec<TempRow>> {
    spec.validate()?;
    let seed = opts.seed.unwrap_or(spec.seed);
    let rx = spec.receiver.config()?;
    let est_cfg = spec.estimator.config()?;
    let temps = spec.temperatures_c.values();
    let mut scenarios = Vec::with_capacity(temps.len());
    for (i, &t) in temps.iter().enumerate() {
        let mut s = LinkScenario::new(PhyConfig::new(spec.phy), temp_channel(spec, t), spec.payload_bytes);
        s.receiver = rx;
        scenarios.push((s, derive_seed(seed, i as u64), spec.packets_per_step));
    }
    let batches = run_batches("tempsweep", &scenarios, true, opts.progress)?;
    temps
        .iter()
        .zip(scenarios.iter().zip(batches))
        .map(|(&t, ((s, _, _), b))| {
            let m = b.tally.metrics().map_err(from_core_run)?;
            let hist = b.histogram.as_ref().ok_or_else(|| CliError::Internal("histogram missing".into()))?;
            let est = match estimate_rfo(hist, &est_cfg) {
                Ok(e) => e.dominant(),
                Err(ctlab_core::Error::InsufficientData(_)) => None,
                Err(e) => return Err(from_core_run(e)),
            };
            Ok(TempRow {
                temp_c: t,
                true_rfo_hz: s.channel.rfo(0, 1).map_err(from_core_setup)?,
                est_rfo_hz: est,
                n_packets: m.n_packets,
                n_errored: hist.n_errored,
                prr: m.prr,
                per: m.per,
                plr: m.plr,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloodRow {
    pub protocol: &'static str,
    pub phy: &'static str,
    pub jamming: &'static str,
    pub payload_bytes: usize,
    pub reliability: f64,
    pub latency_ms: Option<f64>,
    pub energy_mj: f64,
}

pub fn flood_topology(spec: &FloodSpec) -> Result<Topology> {
    let pl = spec.path_loss.into();
    let seed = spec.topology_seed;
    let t = match &spec.topology {
        TopologySpec::Line { n, spacing_m } => Topology::line(*n, *spacing_m, &pl, seed),
        TopologySpec::Cluster { n, radius_m } => Topology::cluster(*n, *radius_m, &pl, seed),
        TopologySpec::TwoRegion { n_dense, n_sparse } => Topology::two_region(*n_dense, *n_sparse, &pl, seed),
        TopologySpec::Gains { gains_db, initiator } => Topology::from_gains(gains_db.clone(), *initiator),
    }
    .map_err(from_core_setup)?;
    let t = match &spec.destinations {
        Some(d) => t.with_destinations(d.clone()).map_err(from_core_setup)?,
        None => t,
    };
    match &spec.sources {
        Some(s) => t.with_sources(s.clone()).map_err(from_core_setup),
        None => Ok(t),
    }
}

pub fn flood_protocol(spec: &FloodSpec, kind: ProtocolKind) -> ProtocolConfig {
    let mut p = ProtocolConfig::new(kind);
    let o = &spec.protocol;
    if let Some(v) = o.tx_n {
        p.tx_n = v;
    }
    if let Some(v) = o.max_silent_t {
        p.max_silent_t = v;
    }
    if let Some(v) = o.messages_per_epoch {
        p.messages_per_epoch = v;
    }
    if let Some(v) = o.ta_pairs {
        p.ta_pairs = v;
    }
    if let Some(v) = o.nd_threshold_dbm {
        p.nd_threshold_dbm = v;
    }
    p
}

pub fn flood_grid(spec: &FloodSpec) -> PerGrid {
    PerGrid {
        snr_db: spec.per_table.snr_db.clone(),
        delta_p_db: spec.per_table.delta_p_db.clone(),
        rfo_hz: spec.per_table.rfo_hz.clone(),
        payload_bytes: spec.payload_bytes.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect(),
        packets_per_cell: spec.per_table.packets_per_cell,
    }
}

/// PER table for a flood spec file, served from the cache when possible.
pub fn flood_table(spec: &FloodSpec) -> Result<PerTable> {
    let phy = PhyConfig::new(spec.phy);
    cache::load_or_build(&cache::cache_dir(), &phy, &flood_grid(spec), spec.per_table.seed)
}

/// Pooled outcome of one protocol/jamming/payload cell over the seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct FloodCell {
    pub protocol: ProtocolKind,
    pub jamming: JamLevel,
    pub payload_bytes: usize,
    pub reports: Vec<FloodReport>,
}

impl FloodCell {
    pub fn reliability(&self) -> f64 {
        let g: u64 = self.reports.iter().map(|r| r.generated).sum();
        let d: u64 = self.reports.iter().map(|r| r.delivered).sum();
        d as f64 / g as f64
    }

    pub fn latency_ms(&self) -> Option<f64> {
        let d: u64 = self.reports.iter().map(|r| r.delivered).sum();
        let total: f64 = self.reports.iter().filter_map(|r| r.latency_ms.map(|l| l * r.delivered as f64)).sum();
        (d > 0).then(|| total / d as f64)
    }

    pub fn energy_mj(&self) -> f64 {
        self.reports.iter().map(|r| r.energy_mj).sum::<f64>() / self.reports.len() as f64
    }
}

pub fn run_flood_cells(spec: &FloodSpec, table: &PerTable, opts: &RunOptions) -> Result<Vec<FloodCell>> {
    spec.validate()?;
    let topo = flood_topology(spec)?;
    let phy = PhyConfig::new(spec.phy);
    let seeds: Vec<u64> = match opts.seed {
        Some(s) => vec![s],
        None => spec.seeds.clone(),
    };
    let mut cells = Vec::new();
    for &kind in &spec.protocols {
        for &jam in &spec.jamming {
            for &b in &spec.payload_bytes {
                cells.push((kind, jam, b));
            }
        }
    }
    let setups = cells
        .iter()
        .map(|&(kind, jam, b)| {
            let mut s = FloodSetup::new(flood_protocol(spec, kind), topo.clone(), phy.clone(), b)
                .with_jamming(JammingProfile::for_level(jam, spec.jammer_sites.clone()));
            s.radio = (&spec.radio).into();
            s.validate().map_err(from_core_setup)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let units: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| seeds.iter().map(move |&s| (c, s))).collect();
    let prog = Progress::new("flood", opts.progress, &vec![seeds.len(); cells.len()]);
    let reports = units
        .par_iter()
        .map(|&(c, seed)| {
            let r = simulate(&setups[c], table, spec.rounds, seed);
            prog.unit_done(c);
            r
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(from_core_run)?;
    let mut out: Vec<FloodCell> = cells
        .iter()
        .map(|&(protocol, jamming, payload_bytes)| FloodCell { protocol, jamming, payload_bytes, reports: Vec::new() })
        .collect();
    for (&(c, _), r) in units.iter().zip(reports) {
        out[c].reports.push(r);
    }
    Ok(out)
}

pub fn run_flood(spec: &FloodSpec, opts: &RunOptions) -> Result<Vec<FloodRow>> {
    spec.validate()?;
    let table = flood_table(spec)?;
    let cells = run_flood_cells(spec, &table, opts)?;
    Ok(cells
        .iter()
        .map(|c| FloodRow {
            protocol: c.protocol.name(),
            phy: spec.phy.name(),
            jamming: c.jamming.name(),
            payload_bytes: c.payload_bytes,
            reliability: c.reliability(),
            latency_ms: c.latency_ms(),
            energy_mj: c.energy_mj(),
        })
        .collect())
}

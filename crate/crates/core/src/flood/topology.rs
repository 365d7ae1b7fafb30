use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::math::PI;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Log-distance path loss with symmetric log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    /// Loss at 1 m, dB.
    pub pl0_db: f64,
    pub exponent: f64,
    pub shadowing_db: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss { pl0_db: 40.0, exponent: 3.0, shadowing_db: 3.0 }
    }
}

impl PathLoss {
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        self.pl0_db + 10.0 * self.exponent * libm::log10(distance_m.max(1.0))
    }
}

/// Nodes `0..n`, a symmetric gain matrix, and the roles used by the
/// dissemination and collection protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    gain_db: Vec<f64>,
    /// Flood source for dissemination, sink for collection.
    pub initiator: usize,
    /// Nodes that generate messages in collection rounds.
    pub sources: Vec<usize>,
    /// Nodes whose reception counts in dissemination rounds.
    pub destinations: Vec<usize>,
}

impl Topology {
    /// `gains[i][j]` in dB; must be square and symmetric.
    pub fn from_gains(gains: Vec<Vec<f64>>, initiator: usize) -> Result<Self> {
        let n = gains.len();
        if n < 2 {
            return Err(Error::config("a topology needs at least two nodes"));
        }
        let mut gain_db = vec![f64::NEG_INFINITY; n * n];
        for (i, row) in gains.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!("gain row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &g) in row.iter().enumerate() {
                if i != j && (g - gains[j][i]).abs() > 1e-9 {
                    return Err(Error::config(format!("gain ({i},{j}) is not symmetric")));
                }
                if i != j {
                    gain_db[i * n + j] = g;
                }
            }
        }
        let others: Vec<usize> = (0..n).filter(|&k| k != initiator).collect();
        let t = Topology { n, gain_db, initiator, sources: others.clone(), destinations: others };
        t.check_roles()?;
        Ok(t)
    }

    /// Gains from node coordinates in metres.
    pub fn from_positions(positions: &[(f64, f64)], pl: &PathLoss, initiator: usize, seed: u64) -> Result<Self> {
        let n = positions.len();
        let mut rng = stream_rng(seed, 0x7090);
        let shadow = Normal::new(0.0, pl.shadowing_db.max(0.0))
            .map_err(|_| Error::config("shadowing must be finite"))?;
        let mut gains = vec![vec![f64::NEG_INFINITY; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (positions[i].0 - positions[j].0, positions[i].1 - positions[j].1);
                let g = -pl.loss_db(libm::hypot(dx, dy)) + shadow.sample(&mut rng);
                gains[i][j] = g;
                gains[j][i] = g;
            }
        }
        Topology::from_gains(gains, initiator)
    }

    /// `n` nodes on a line, `spacing` metres apart; the initiator is node 0.
    pub fn line(n: usize, spacing: f64, pl: &PathLoss, seed: u64) -> Result<Self> {
        let pos: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 * spacing, 0.0)).collect();
        Topology::from_positions(&pos, pl, 0, seed)
    }

    /// Uniform placement in a disc of `radius` metres around the initiator.
    pub fn cluster(n: usize, radius: f64, pl: &PathLoss, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0xc1u64);
        let mut pos = vec![(0.0, 0.0)];
        for _ in 1..n {
            let r = radius * libm::sqrt(rng.random::<f64>());
            let a = 2.0 * PI * rng.random::<f64>();
            pos.push((r * libm::cos(a), r * libm::sin(a)));
        }
        Topology::from_positions(&pos, pl, 0, seed)
    }

    /// A dense square of `n_dense` nodes next to a sparse strip of
    /// `n_sparse` nodes; the initiator is the first dense node.
    pub fn two_region(n_dense: usize, n_sparse: usize, pl: &PathLoss, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, 0x2e9u64);
        let mut pos = Vec::with_capacity(n_dense + n_sparse);
        for _ in 0..n_dense {
            pos.push((rng.random::<f64>() * 25.0, rng.random::<f64>() * 25.0));
        }
        for k in 0..n_sparse {
            let x = 25.0 + (k as f64 + 0.5) * 100.0 / n_sparse.max(1) as f64;
            pos.push((x, rng.random::<f64>() * 25.0));
        }
        Topology::from_positions(&pos, pl, 0, seed)
    }

    pub fn with_sources(mut self, sources: Vec<usize>) -> Result<Self> {
        self.sources = sources;
        self.check_roles()?;
        Ok(self)
    }

    pub fn with_destinations(mut self, destinations: Vec<usize>) -> Result<Self> {
        self.destinations = destinations;
        self.check_roles()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Gain from `i` to `j` in dB (`-inf` on the diagonal).
    pub fn gain_db(&self, i: usize, j: usize) -> f64 {
        self.gain_db[i * self.n + j]
    }

    /// Nodes reachable from `from` over links whose gain is at least
    /// `min_gain_db`.
    pub fn reachable(&self, from: usize, min_gain_db: f64) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..self.n {
                if !seen[j] && self.gain_db(i, j) >= min_gain_db {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    /// Hop distance from the initiator (`None` if unreachable).
    pub fn hops(&self, min_gain_db: f64) -> Vec<Option<usize>> {
        let mut hops = vec![None; self.n];
        let mut queue = VecDeque::from([self.initiator]);
        hops[self.initiator] = Some(0);
        while let Some(i) = queue.pop_front() {
            let h = hops[i].unwrap_or(0);
            for j in 0..self.n {
                if hops[j].is_none() && self.gain_db(i, j) >= min_gain_db {
                    hops[j] = Some(h + 1);
                    queue.push_back(j);
                }
            }
        }
        hops
    }

    /// Errors if some node cannot be reached from the initiator.
    pub fn check_connected(&self, min_gain_db: f64) -> Result<()> {
        let seen = self.reachable(self.initiator, min_gain_db);
        match seen.iter().position(|s| !s) {
            Some(k) => Err(Error::config(format!(
                "topology is disconnected: node {k} is unreachable from node {}",
                self.initiator
            ))),
            None => Ok(()),
        }
    }

    fn check_roles(&self) -> Result<()> {
        if self.initiator >= self.n {
            return Err(Error::config(format!("initiator {} is not a node", self.initiator)));
        }
        for &k in self.sources.iter().chain(&self.destinations) {
            if k >= self.n {
                return Err(Error::config(format!("node {k} does not exist")));
            }
            if k == self.initiator {
                return Err(Error::config("the initiator cannot be a source or destination"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_shadow() -> PathLoss {
        PathLoss { shadowing_db: 0.0, ..PathLoss::default() }
    }

    #[test]
    fn gains_are_symmetric() {
        let t = Topology::cluster(12, 30.0, &PathLoss::default(), 3).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if i != j {
                    assert_eq!(t.gain_db(i, j), t.gain_db(j, i));
                }
            }
        }
    }

    #[test]
    fn line_hops() {
        let pl = no_shadow();
        let t = Topology::line(5, 20.0, &pl, 0).unwrap();
        // one hop reaches 20 m but not 40 m
        let thr = -pl.loss_db(30.0);
        assert_eq!(t.hops(thr), vec![Some(0), Some(1), Some(2), Some(3), Some(4)]);
        assert!(t.check_connected(thr).is_ok());
        assert!(t.check_connected(-pl.loss_db(10.0)).is_err());
    }

    #[test]
    fn rejects_asymmetric_and_bad_roles() {
        assert!(Topology::from_gains(vec![vec![0.0, -50.0], vec![-60.0, 0.0]], 0).is_err());
        let t = Topology::from_gains(vec![vec![0.0, -50.0], vec![-50.0, 0.0]], 0).unwrap();
        assert_eq!(t.destinations, vec![1]);
        assert!(t.clone().with_sources(vec![0]).is_err());
        assert!(t.with_destinations(vec![2]).is_err());
    }
}

//! Simulated network: connected random topologies, local-degree weights,
//! synchronous consensus rounds and mixing-time estimation.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{stream_rng, Stream};

/// Undirected graph with a self-loop at every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<bool>,
}

impl Topology {
    /// Validates symmetry, self-loops and connectivity.
    pub fn from_adjacency(n: usize, adjacency: Vec<bool>) -> Result<Self> {
        if n == 0 || adjacency.len() != n * n {
            return Err(Error::InvalidInput(
                "adjacency must be a non-empty N x N matrix".into(),
            ));
        }
        for i in 0..n {
            if !adjacency[i * n + i] {
                return Err(Error::InvalidInput(format!("node {i} lacks a self-loop")));
            }
            for j in 0..i {
                if adjacency[i * n + j] != adjacency[j * n + i] {
                    return Err(Error::InvalidInput("adjacency is not symmetric".into()));
                }
            }
        }
        let top = Topology { n, adjacency };
        if !top.is_connected() {
            return Err(Error::InvalidInput("topology is not connected".into()));
        }
        Ok(top)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) out of range")));
            }
            adjacency[a * n + b] = true;
            adjacency[b * n + a] = true;
        }
        Topology::from_adjacency(n, adjacency)
    }

    pub fn complete(n: usize) -> Self {
        Topology {
            n,
            adjacency: vec![true; n * n],
        }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Topology::from_edges(n, &edges).expect("a path is connected")
    }

    pub fn star(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
        Topology::from_edges(n, &edges).expect("a star is connected")
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    /// Neighbors of `i` other than itself, in increasing order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| j != i && self.is_edge(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Undirected edges excluding self-loops.
    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Nodes reachable from `start`, in BFS order.
    pub fn bfs(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        order
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(0).len() == self.n
    }

    /// First line `N`, then `N` rows of space-separated 0/1 entries.
    pub fn to_text(&self) -> String {
        let m = Mat::from_fn(
            self.n,
            self.n,
            |i, j| if self.is_edge(i, j) { 1.0 } else { 0.0 },
        );
        matrix_to_text(&m)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let m = matrix_from_text(text)?;
        let adjacency = m.as_slice().iter().map(|&v| v != 0.0).collect();
        Topology::from_adjacency(m.rows(), adjacency)
    }
}

const MAX_TOPOLOGY_ATTEMPTS: u64 = 1000;

/// Erdős–Rényi graph conditioned on connectivity by resampling; attempt `a`
/// draws from its own stream.
pub fn gen_erdos_renyi_connected(n: usize, p: f64, seed: u64) -> Result<Topology> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "a network needs at least one site".into(),
        ));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "edge probability {p} outside (0, 1]"
        )));
    }
    for attempt in 0..MAX_TOPOLOGY_ATTEMPTS {
        let mut rng = stream_rng(seed, Stream::Topology(attempt));
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
            for j in (i + 1)..n {
                let present = rng.random::<f64>() < p;
                adjacency[i * n + j] = present;
                adjacency[j * n + i] = present;
            }
        }
        let top = Topology { n, adjacency };
        if top.is_connected() {
            return Ok(top);
        }
    }
    Err(Error::TopologyGeneration {
        attempts: MAX_TOPOLOGY_ATTEMPTS as usize,
        sites: n,
        p,
    })
}

/// Doubly-stochastic weights supported on a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: Mat,
    topology: Topology,
}

const STOCHASTIC_TOL: f64 = 1e-12;

impl WeightMatrix {
    /// Validates row and column sums, non-negativity and support.
    pub fn new(w: Mat, topology: Topology) -> Result<Self> {
        let n = topology.sites();
        if w.rows() != n || w.cols() != n {
            return Err(Error::InvalidInput(
                "weight matrix does not match the topology".into(),
            ));
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| w.get(i, j)).sum();
            let col: f64 = (0..n).map(|j| w.get(j, i)).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL || (col - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidInput(format!(
                    "row/column {i} does not sum to one"
                )));
            }
            for j in 0..n {
                let v = w.get(i, j);
                if v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "negative weight at ({i}, {j})"
                    )));
                }
                if v != 0.0 && !topology.is_edge(i, j) {
                    return Err(Error::InvalidInput(format!(
                        "weight on non-edge ({i}, {j})"
                    )));
                }
            }
        }
        Ok(WeightMatrix { w, topology })
    }

    pub fn matrix(&self) -> &Mat {
        &self.w
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn sites(&self) -> usize {
        self.topology.sites()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w.get(i, j)
    }

    pub fn to_text(&self) -> String {
        matrix_to_text(&self.w)
    }

    pub fn from_text(text: &str, topology: Topology) -> Result<Self> {
        WeightMatrix::new(matrix_from_text(text)?, topology)
    }
}

/// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, with the self-weight taking
/// the remainder of each row. Degrees exclude the self-loop.
pub fn local_degree_weights(top: &Topology) -> WeightMatrix {
    let n = top.sites();
    let deg: Vec<usize> = (0..n).map(|i| top.degree(i)).collect();
    let mut w = Mat::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in top.neighbors(i) {
            let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
            w.set(i, j, v);
            off += v;
        }
        w.set(i, i, 1.0 - off);
    }
    WeightMatrix::new(w, top.clone()).expect("local-degree weights are doubly stochastic")
}

/// One synchronous round `z_i <- sum_j w_ij z_j`. Every site reads the
/// previous round's buffer; neighbors are summed in index order.
pub fn gossip_round(w: &WeightMatrix, current: &[Vec<f64>], next: &mut [Vec<f64>]) {
    let top = w.topology();
    for (i, out) in next.iter_mut().enumerate() {
        let mut first = true;
        for j in 0..top.sites() {
            if !top.is_edge(i, j) {
                continue;
            }
            let wij = w.get(i, j);
            if first {
                for (o, &z) in out.iter_mut().zip(&current[j]) {
                    *o = wij * z;
                }
                first = false;
            } else {
                for (o, &z) in out.iter_mut().zip(&current[j]) {
                    *o += wij * z;
                }
            }
        }
    }
}

/// Runs `rounds` synchronous rounds and returns every intermediate state,
/// starting with the initial one.
pub fn consensus_history(
    w: &WeightMatrix,
    z_init: &[Vec<f64>],
    rounds: usize,
) -> Vec<Vec<Vec<f64>>> {
    let mut history = vec![z_init.to_vec()];
    let mut next = z_init.to_vec();
    for _ in 0..rounds {
        gossip_round(w, history.last().unwrap(), &mut next);
        history.push(next.clone());
    }
    history
}

/// Uncorrected consensus state after `rounds` rounds.
pub fn consensus_rounds(w: &WeightMatrix, z_init: &[Vec<f64>], rounds: usize) -> Vec<Vec<f64>> {
    let mut current = z_init.to_vec();
    let mut next = z_init.to_vec();
    for _ in 0..rounds {
        gossip_round(w, &current, &mut next);
        std::mem::swap(&mut current, &mut next);
    }
    current
}

pub const CORRECTION_FLOOR: f64 = 1e-14;

/// `[W^rounds e_1]_i` for every site, obtained by gossiping the indicator
/// of site 0 through the same rounds the data goes through. Sites farther
/// than `rounds` hops from site 0 get exactly zero.
pub fn raw_corrections(w: &WeightMatrix, rounds: usize) -> Vec<f64> {
    let n = w.sites();
    let mut e1 = vec![vec![0.0]; n];
    e1[0][0] = 1.0;
    consensus_rounds(w, &e1, rounds)
        .into_iter()
        .map(|v| v[0])
        .collect()
}

/// [`raw_corrections`], failing on any value below 1e-14.
pub fn consensus_corrections(w: &WeightMatrix, rounds: usize) -> Result<Vec<f64>> {
    raw_corrections(w, rounds)
        .into_iter()
        .enumerate()
        .map(|(site, v)| {
            if v < CORRECTION_FLOOR {
                Err(Error::CorrectionUnderflow { site, value: v })
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Corrected consensus outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun {
    /// Per-site estimates of `sum_j z_j`.
    pub estimates: Vec<Vec<f64>>,
    /// Per-site divisors `[W^T_c e_1]_i`.
    pub corrections: Vec<f64>,
    pub rounds: usize,
    /// Vectors sent over non-self edges (two per edge per round).
    pub messages: usize,
}

/// Estimates `sum_j z_j` at every site from `rounds` consensus rounds.
pub fn consensus_sum(z_init: &[Vec<f64>], w: &WeightMatrix, rounds: usize) -> Result<ConsensusRun> {
    validate_consensus_input(z_init, w, rounds)?;
    let corrections = consensus_corrections(w, rounds)?;
    Ok(corrected_consensus(z_init, w, rounds, corrections))
}

fn validate_consensus_input(z_init: &[Vec<f64>], w: &WeightMatrix, rounds: usize) -> Result<()> {
    if rounds == 0 {
        return Err(Error::InvalidConfig(
            "consensus needs at least one round".into(),
        ));
    }
    if z_init.len() != w.sites() {
        return Err(Error::InvalidInput(format!(
            "{} site vectors for {} sites",
            z_init.len(),
            w.sites()
        )));
    }
    let dim = z_init[0].len();
    if z_init.iter().any(|z| z.len() != dim) {
        return Err(Error::InvalidInput("site vectors differ in length".into()));
    }
    Ok(())
}

fn corrected_consensus(
    z_init: &[Vec<f64>],
    w: &WeightMatrix,
    rounds: usize,
    corrections: Vec<f64>,
) -> ConsensusRun {
    let mut estimates = consensus_rounds(w, z_init, rounds);
    for (z, &c) in estimates.iter_mut().zip(&corrections) {
        z.iter_mut().for_each(|v| *v /= c);
    }
    ConsensusRun {
        estimates,
        corrections,
        rounds,
        messages: 2 * w.topology().edge_count() * rounds,
    }
}

/// Consensus summation with the correction factors computed once and reused.
#[derive(Debug, Clone)]
pub struct CorrectedConsensus<'a> {
    w: &'a WeightMatrix,
    rounds: usize,
    corrections: Vec<f64>,
}

impl<'a> CorrectedConsensus<'a> {
    pub fn new(w: &'a WeightMatrix, rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidConfig(
                "consensus needs at least one round".into(),
            ));
        }
        Ok(CorrectedConsensus {
            w,
            rounds,
            corrections: consensus_corrections(w, rounds)?,
        })
    }

    pub fn corrections(&self) -> &[f64] {
        &self.corrections
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn sum(&self, z_init: &[Vec<f64>]) -> Result<ConsensusRun> {
        validate_consensus_input(z_init, self.w, self.rounds)?;
        Ok(corrected_consensus(
            z_init,
            self.w,
            self.rounds,
            self.corrections.clone(),
        ))
    }
}

const MIXING_CAP: usize = 10_000;

/// Smallest `t >= 1` with `max_i ‖e_i^T W^t − 1^T/N‖₂ ≤ ½`.
pub fn estimate_mixing_time(w: &WeightMatrix) -> Result<usize> {
    let n = w.sites();
    let target = 1.0 / n as f64;
    let mut power = w.matrix().clone();
    for t in 1..=MIXING_CAP {
        let worst = (0..n)
            .map(|i| {
                power
                    .row(i)
                    .iter()
                    .map(|v| (v - target) * (v - target))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if worst <= 0.5 {
            return Ok(t);
        }
        power = power.matmul(w.matrix())?;
    }
    Err(Error::MixingTimeOverflow { cap: MIXING_CAP })
}

fn matrix_to_text(m: &Mat) -> String {
    let mut out = format!("{}\n", m.rows());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

fn matrix_from_text(text: &str) -> Result<Mat> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty matrix file".into()))?
        .trim()
        .parse()
        .map_err(|e| Error::InvalidInput(format!("bad size line: {e}")))?;
    let mut data = Vec::with_capacity(n * n);
    for (r, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("row {r}: {e}")))?;
        if row.len() != n {
            return Err(Error::InvalidInput(format!(
                "row {r} has {} entries, expected {n}",
                row.len()
            )));
        }
        data.extend(row);
    }
    Mat::from_vec(n, n, data)
}

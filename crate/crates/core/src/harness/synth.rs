//! Deterministic synthetic test networks and meter placements.
//!
//! Nodes are scattered in the unit square. A spanning tree over the
//! shortest candidate links (k nearest neighbours) is completed with the
//! next-shortest links up to the branch count, so the graph is connected,
//! planar-ish and has no parallel branches. Reactance grows with link
//! length. Loads, voltage-controlled generators and capacitor banks are
//! placed on non-zero-injection nodes, and all injections are scaled up
//! until the power flow's lowest voltage reaches `target_min_voltage` or
//! its widest angle reaches `max_angle_deg`.

use super::placement::Placement;
use super::powerflow::{solve_power_flow, PowerFlowOptions};
use crate::network::{Branch, BranchEnd, Grid, Network, Node};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub nodes: usize,
    pub branches: usize,
    pub zero_injection: usize,
    pub seed: u64,
    pub target_min_voltage: f64,
    /// Series reactance of a link of mean length.
    pub reactance: f64,
    /// Largest allowed `|θ_i|` in degrees, slack angle zero.
    pub max_angle_deg: f64,
}

impl SynthSpec {
    /// 118 nodes, 186 branches, 10 zero-injection nodes.
    pub fn desk() -> Self {
        SynthSpec { nodes: 118, branches: 186, zero_injection: 10, seed: 118, target_min_voltage: 0.94, reactance: 0.025, max_angle_deg: 40.0 }
    }

    /// 1888 nodes, 2531 branches, 680 zero-injection nodes.
    pub fn large() -> Self {
        SynthSpec { nodes: 1888, branches: 2531, zero_injection: 680, seed: 1888, target_min_voltage: 0.94, reactance: 0.025, max_angle_deg: 40.0 }
    }
}

fn round_to(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (x * s).round() / s
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

fn topology(n: usize, m: usize, pos: &[(f64, f64)]) -> Result<Vec<(usize, usize, f64)>> {
    if m + 1 < n {
        return Err(Error::Config(format!("{m} branches cannot connect {n} nodes")));
    }
    let dist = |a: usize, b: usize| ((pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2)).sqrt();
    let mut k = 6;
    loop {
        let mut cand: Vec<(usize, usize, f64)> = Vec::new();
        let mut seen = HashSet::new();
        for i in 0..n {
            let mut near: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(d, j) in near.iter().take(k) {
                let key = (i.min(j), i.max(j));
                if seen.insert(key) {
                    cand.push((key.0, key.1, d));
                }
            }
        }
        cand.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        let mut dsu = Dsu((0..n).collect());
        let mut tree = vec![false; cand.len()];
        let mut joined = 0;
        for (e, &(a, b, _)) in cand.iter().enumerate() {
            if dsu.union(a, b) {
                tree[e] = true;
                joined += 1;
            }
        }
        if joined + 1 < n || cand.len() < m {
            k += 2;
            if k > n {
                return Err(Error::Config("cannot build a connected synthetic graph".into()));
            }
            continue;
        }
        let mut out: Vec<(usize, usize, f64)> = cand.iter().zip(&tree).filter(|(_, t)| **t).map(|(e, _)| *e).collect();
        out.extend(cand.iter().zip(&tree).filter(|(_, t)| !**t).map(|(e, _)| *e).take(m - out.len()));
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        return Ok(out);
    }
}

/// Topology, parameters and unscaled injections of a synthetic network.
#[derive(Clone, Debug)]
pub struct Draft {
    n: usize,
    branches: Vec<Branch>,
    slack: usize,
    zero_injection: Vec<bool>,
    load: Vec<Complex64>,
    generation: Vec<Complex64>,
    shunt: Vec<f64>,
    setpoint: Vec<Option<f64>>,
}

impl Draft {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        let n = spec.nodes;
        if n < 2 || spec.zero_injection + 2 > n {
            return Err(Error::Config("synthetic network needs at least two non-zero-injection nodes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let links = topology(n, spec.branches, &pos)?;

        let mean_len = links.iter().map(|l| l.2).sum::<f64>() / links.len() as f64;
        let mut degree = vec![0usize; n];
        let mut branches = Vec::with_capacity(links.len());
        for &(a, b, len) in &links {
            degree[a] += 1;
            degree[b] += 1;
            let x = round_to((spec.reactance * len / mean_len).clamp(0.004, 0.12), 5);
            let r = round_to(x * rng.random_range(0.1..0.3), 5);
            let charging = round_to(0.5 * x * rng.random_range(0.05..0.2), 6);
            let y = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
            branches.push(Branch {
                from: a,
                to: b,
                series: Complex64::new(round_to(y.re, 6), round_to(y.im, 6)),
                shunt_from: Complex64::new(0.0, charging),
                shunt_to: Complex64::new(0.0, charging),
            });
        }

        // slack: best-connected node among those closest to the centre
        let mut by_centre: Vec<usize> = (0..n).collect();
        let centre = |i: usize| (pos[i].0 - 0.5).powi(2) + (pos[i].1 - 0.5).powi(2);
        by_centre.sort_by(|&a, &b| centre(a).total_cmp(&centre(b)).then(a.cmp(&b)));
        let slack = *by_centre[..n.min(10)].iter().max_by_key(|&&i| (degree[i], std::cmp::Reverse(i))).unwrap();

        let mut pool: Vec<usize> = (0..n).filter(|&i| i != slack && degree[i] >= 2).collect();
        if pool.len() < spec.zero_injection {
            return Err(Error::Config("not enough meshed nodes for the zero-injection count".into()));
        }
        pool.shuffle(&mut rng);
        let mut zi = vec![false; n];
        for &i in &pool[..spec.zero_injection] {
            zi[i] = true;
        }

        let mut load = vec![Complex64::new(0.0, 0.0); n];
        let mut generation = vec![Complex64::new(0.0, 0.0); n];
        let mut shunt = vec![0.0; n];
        let mut gen_weight = vec![0.0; n];
        let mut setpoint = vec![None; n];
        for i in 0..n {
            if zi[i] || i == slack {
                continue;
            }
            if rng.random_bool(0.15) {
                gen_weight[i] = rng.random_range(0.5..1.5);
                setpoint[i] = Some(round_to(rng.random_range(1.0..1.03), 3));
            } else if rng.random_bool(0.85) {
                let p: f64 = rng.random_range(0.1..0.6);
                load[i] = Complex64::new(p, p * rng.random_range(0.2..0.45));
            }
            if rng.random_bool(0.05) {
                shunt[i] = round_to(rng.random_range(0.01..0.04), 6);
            }
        }
        let total_load: f64 = load.iter().map(|l| l.re).sum();
        let total_weight: f64 = gen_weight.iter().sum();
        if total_weight > 0.0 {
            for i in 0..n {
                let p = 0.8 * total_load * gen_weight[i] / total_weight;
                generation[i] = Complex64::new(p, p * rng.random_range(0.2..0.5));
            }
        }
        Ok(Draft { n, branches, slack, zero_injection: zi, load, generation, shunt, setpoint })
    }

    /// Network with all loads and generation multiplied by `k`.
    pub fn build(&self, k: f64) -> Result<Network> {
        let nodes = (0..self.n)
            .map(|i| Node {
                id: (i + 1).to_string(),
                shunt: Complex64::new(0.0, self.shunt[i]),
                zero_injection: self.zero_injection[i],
                load: Complex64::new(round_to(k * self.load[i].re, 6), round_to(k * self.load[i].im, 6)),
                generation: Complex64::new(
                    round_to(k * self.generation[i].re, 6),
                    round_to(k * self.generation[i].im, 6),
                ),
                voltage_setpoint: self.setpoint[i],
            })
            .collect();
        Network::new(nodes, self.branches.clone(), self.slack)
    }
}

/// Builds the network for `spec`. The result is a pure function of the spec.
pub fn generate_network(spec: &SynthSpec) -> Result<Network> {
    let draft = Draft::new(spec)?;
    // bisection on the injection scale for the target lowest voltage
    let pf = PowerFlowOptions::default();
    let feasible = |k: f64| -> Result<bool> {
        let grid = Grid::new(draft.build(k)?);
        Ok(match solve_power_flow(&grid, &pf) {
            Ok(sol) => {
                let max_angle = sol.state.0.iter().map(|u| u.arg().abs()).fold(0.0, f64::max).to_degrees();
                sol.state.min_magnitude().1 > spec.target_min_voltage && max_angle < spec.max_angle_deg
            }
            Err(_) => false,
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Config("load scaling does not reach the voltage target".into()));
        }
    }
    while hi - lo > 1e-4 * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // four decimals, rounded towards the feasible side
    let mut k = (lo * 1e4).floor() / 1e4;
    while !feasible(k)? {
        k -= 1e-4;
        if k < 0.0 {
            return Err(Error::Config("no feasible load scaling found".into()));
        }
    }
    draft.build(k)
}

/// PMU and SCADA counts of one placement scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementSpec {
    pub pmu_voltage: usize,
    pub pmu_current: usize,
    /// Total SCADA meters; zero disables SCADA.
    pub scada_total: usize,
    pub seed: u64,
}

/// Scenario `A`–`D` counts for the desk-scale network.
pub fn desk_scenario(letter: char) -> Option<PlacementSpec> {
    let (v, i, scada) = match letter {
        'A' => (4, 3, 372),
        'B' => (3, 35, 372),
        'C' => (3, 186, 372),
        'D' => (118, 186, 0),
        _ => return None,
    };
    Some(PlacementSpec { pmu_voltage: v, pmu_current: i, scada_total: scada, seed: 7 + letter as u64 })
}

/// Scenario `A`–`D` counts for the large network.
pub fn large_scenario(letter: char) -> Option<PlacementSpec> {
    let (v, i, scada) = match letter {
        'A' => (2, 0, 5060),
        'B' => (4, 154, 5060),
        'C' => (87, 1261, 5060),
        'D' => (1888, 2531, 0),
        _ => return None,
    };
    Some(PlacementSpec { pmu_voltage: v, pmu_current: i, scada_total: scada, seed: 7 + letter as u64 })
}

/// A synthetic network with its eight placements: scenarios `A`–`D`, each
/// with zero injections enforced and ignored.
#[derive(Clone, Debug)]
pub struct FixtureSet {
    pub network: Network,
    /// `(file stem, placement)`, e.g. `("118_B_nozi", ..)`.
    pub placements: Vec<(String, Placement)>,
}

impl FixtureSet {
    pub fn desk() -> Result<Self> {
        Self::build(&SynthSpec::desk(), desk_scenario)
    }

    pub fn large() -> Result<Self> {
        Self::build(&SynthSpec::large(), large_scenario)
    }

    fn build(spec: &SynthSpec, scenario: fn(char) -> Option<PlacementSpec>) -> Result<Self> {
        let network = generate_network(spec)?;
        let mut placements = Vec::with_capacity(8);
        for letter in ['A', 'B', 'C', 'D'] {
            let ps = scenario(letter).expect("scenario letters A-D exist");
            for zi in [true, false] {
                let stem = format!("{}_{letter}{}", spec.nodes, if zi { "" } else { "_nozi" });
                placements.push((stem, generate_placement(&network, &ps, zi)?));
            }
        }
        Ok(FixtureSet { network, placements })
    }

    /// File name of the network, e.g. `net118.json`.
    pub fn network_file(&self) -> String {
        format!("net{}.json", self.network.node_count())
    }

    /// Every file as `(name, contents)`.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![(self.network_file(), self.network.to_json() + "\n")];
        for (stem, p) in &self.placements {
            out.push((format!("{stem}.json"), p.to_json(&self.network) + "\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, text) in self.files() {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// SCADA: squared voltage magnitude at every node and a power flow at the
/// `from` end of every branch, topped up with injections at randomly chosen
/// non-zero-injection nodes. PMU: voltages at random nodes; currents first
/// on branches leaving PMU nodes, then on random other branches.
pub fn generate_placement(net: &Network, spec: &PlacementSpec, zero_injection: bool) -> Result<Placement> {
    let n = net.node_count();
    let b = net.branch_count();
    if spec.pmu_voltage > n || spec.pmu_current > b {
        return Err(Error::Config("more PMUs requested than locations exist".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut p = Placement { zero_injection, ..Placement::default() };

    if spec.scada_total > 0 {
        p.scada_voltage = (0..n).collect();
        p.scada_flow = (0..b).map(|k| (k, BranchEnd::From)).collect();
        let extra = spec.scada_total.checked_sub(n + b).ok_or_else(|| {
            Error::Config(format!("{} SCADA meters cannot cover {n} voltages and {b} flows", spec.scada_total))
        })?;
        let mut cand: Vec<usize> = (0..n).filter(|&i| !net.nodes()[i].zero_injection).collect();
        if extra > cand.len() {
            return Err(Error::Config("not enough injection locations".into()));
        }
        cand.shuffle(&mut rng);
        cand.truncate(extra);
        cand.sort_unstable();
        p.scada_injection = cand;
    }

    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    nodes.truncate(spec.pmu_voltage);
    nodes.sort_unstable();
    let mut used = vec![false; b];
    let mut currents = Vec::with_capacity(spec.pmu_current);
    'outer: for &i in &nodes {
        for (k, br) in net.branches().iter().enumerate() {
            if currents.len() == spec.pmu_current {
                break 'outer;
            }
            if !used[k] && (br.from == i || br.to == i) {
                used[k] = true;
                currents.push((k, if br.from == i { BranchEnd::From } else { BranchEnd::To }));
            }
        }
    }
    let mut rest: Vec<usize> = (0..b).filter(|&k| !used[k]).collect();
    rest.shuffle(&mut rng);
    currents.extend(rest.into_iter().take(spec.pmu_current - currents.len()).map(|k| (k, BranchEnd::From)));
    currents.sort_unstable_by_key(|&(k, e)| (k, e == BranchEnd::To));
    p.pmu_voltage = nodes;
    p.pmu_current = currents;
    Ok(p)
}

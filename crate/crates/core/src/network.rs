//! Network description, JSON file format and the nodal admittance matrix.
//!
//! All quantities are per-unit. Node ids are arbitrary strings mapped to
//! dense indices `0..n` in file order.

use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    /// Shunt admittance to ground.
    pub shunt: Complex64,
    pub zero_injection: bool,
    /// Scheduled load (consumed power). Used only to build true states.
    pub load: Complex64,
    /// Scheduled generation. Used only to build true states.
    pub generation: Complex64,
    /// Voltage magnitude held by the power flow at this node. The reactive
    /// part of `generation` is then an output, not a schedule.
    pub voltage_setpoint: Option<f64>,
}

/// π-model branch between two nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub series: Complex64,
    pub shunt_from: Complex64,
    pub shunt_to: Complex64,
}

impl Branch {
    /// Shunt admittance at the given end.
    pub fn end_shunt(&self, end: BranchEnd) -> Complex64 {
        match end {
            BranchEnd::From => self.shunt_from,
            BranchEnd::To => self.shunt_to,
        }
    }

    /// `(near, far)` node indices seen from `end`.
    pub fn terminals(&self, end: BranchEnd) -> (usize, usize) {
        match end {
            BranchEnd::From => (self.from, self.to),
            BranchEnd::To => (self.to, self.from),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchEnd {
    From,
    To,
}

/// Validated network: unique ids, one slack, connected, nonzero series
/// admittances.
#[derive(Clone, Debug)]
pub struct Network {
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    slack: usize,
    index: HashMap<String, usize>,
}

impl Network {
    pub fn new(nodes: Vec<Node>, branches: Vec<Branch>, slack: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (k, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), k).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
        }
        if slack >= nodes.len() {
            return Err(Error::MissingSlack);
        }
        if nodes[slack].zero_injection {
            return Err(Error::SlackZeroInjection(nodes[slack].id.clone()));
        }
        for node in &nodes {
            if let Some(v) = node.voltage_setpoint {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Schema(format!("node {} has voltage setpoint {v}", node.id)));
                }
            }
        }
        for (k, br) in branches.iter().enumerate() {
            if br.from >= nodes.len() || br.to >= nodes.len() {
                return Err(Error::Schema(format!("branch {k} refers to a node index out of range")));
            }
            if br.from == br.to {
                return Err(Error::Schema(format!("branch {k} is a self loop")));
            }
            if br.series.norm() == 0.0 {
                return Err(Error::ZeroSeriesAdmittance(k));
            }
        }
        let net = Network { nodes, branches, slack, index };
        let islands = net.island_count();
        if islands != 1 {
            return Err(Error::Disconnected { islands });
        }
        Ok(net)
    }

    fn island_count(&self) -> usize {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut islands = n;
        for br in &self.branches {
            let (a, b) = (find(&mut parent, br.from), find(&mut parent, br.to));
            if a != b {
                parent[a] = b;
                islands -= 1;
            }
        }
        islands
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn id_of(&self, k: usize) -> &str {
        &self.nodes[k].id
    }

    /// Nodes flagged zero-injection, in index order.
    pub fn zero_injection_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| self.nodes[k].zero_injection).collect()
    }

    /// Branch index joining `from` and `to` in either orientation, and the
    /// end that sits at `from`. Errors on parallel branches.
    pub fn find_branch(&self, from: usize, to: usize) -> Result<(usize, BranchEnd)> {
        let mut hit = None;
        for (k, br) in self.branches.iter().enumerate() {
            let end = if br.from == from && br.to == to {
                BranchEnd::From
            } else if br.from == to && br.to == from {
                BranchEnd::To
            } else {
                continue;
            };
            if hit.is_some() {
                return Err(Error::InvalidLocation(format!(
                    "parallel branches between `{}` and `{}`",
                    self.id_of(from),
                    self.id_of(to)
                )));
            }
            hit = Some((k, end));
        }
        hit.ok_or_else(|| {
            Error::InvalidLocation(format!("no branch between `{}` and `{}`", self.id_of(from), self.id_of(to)))
        })
    }

    /// Scheduled net injections `generation - load`.
    pub fn scheduled_injections(&self) -> Vec<Complex64> {
        self.nodes.iter().map(|n| n.generation - n.load).collect()
    }

    /// Copy with every load scaled by `factor`; generation untouched.
    pub fn with_load_multiplier(&self, factor: f64) -> Network {
        let mut out = self.clone();
        for n in &mut out.nodes {
            n.load *= factor;
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            slack: Some(IdRepr::Str(self.nodes[self.slack].id.clone())),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: IdRepr::Str(n.id.clone()),
                    g_sh: n.shunt.re,
                    b_sh: n.shunt.im,
                    zero_injection: n.zero_injection,
                    slack: false,
                    p_load: n.load.re,
                    q_load: n.load.im,
                    p_gen: n.generation.re,
                    q_gen: n.generation.im,
                    v_set: n.voltage_setpoint,
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    from: IdRepr::Str(self.nodes[b.from].id.clone()),
                    to: IdRepr::Str(self.nodes[b.to].id.clone()),
                    g: b.series.re,
                    b: b.series.im,
                    b_sh_from: b.shunt_from.im,
                    b_sh_to: b.shunt_to.im,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }
}

/// Node id as it appears in files: a string or a bare number.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub(crate) enum IdRepr {
    Str(String),
    Num(serde_json::Number),
}

impl IdRepr {
    pub(crate) fn into_string(self) -> String {
        match self {
            IdRepr::Str(s) => s,
            IdRepr::Num(n) => n.to_string(),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: IdRepr,
    #[serde(default, skip_serializing_if = "is_zero")]
    g_sh: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    b_sh: f64,
    #[serde(default)]
    zero_injection: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    slack: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_load: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    q_load: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    p_gen: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    q_gen: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_set: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct BranchRecord {
    from: IdRepr,
    to: IdRepr,
    g: f64,
    b: f64,
    #[serde(default)]
    b_sh_from: f64,
    #[serde(default)]
    b_sh_to: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slack: Option<IdRepr>,
    nodes: Vec<NodeRecord>,
    branches: Vec<BranchRecord>,
}

/// Parses and validates a network file.
///
/// The slack is named by the top-level `"slack"` field; a node may also
/// carry `"slack": true`. More than one distinct slack is an error.
/// Optional node fields `p_load`, `q_load`, `p_gen`, `q_gen` carry the
/// scheduled injections used by the simulation harness; `v_set` makes a
/// node voltage-controlled in the power flow.
pub fn parse_network(text: &str) -> Result<Network> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;

    let mut slack_ids: Vec<String> = Vec::new();
    if let Some(s) = file.slack {
        slack_ids.push(s.into_string());
    }
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for rec in file.nodes {
        let id = rec.id.into_string();
        if rec.slack && !slack_ids.contains(&id) {
            slack_ids.push(id.clone());
        }
        nodes.push(Node {
            id,
            shunt: Complex64::new(rec.g_sh, rec.b_sh),
            zero_injection: rec.zero_injection,
            load: Complex64::new(rec.p_load, rec.q_load),
            generation: Complex64::new(rec.p_gen, rec.q_gen),
            voltage_setpoint: rec.v_set,
        });
    }
    let slack_id = match slack_ids.len() {
        0 => return Err(Error::MissingSlack),
        1 => slack_ids.pop().unwrap(),
        _ => return Err(Error::MultipleSlack),
    };

    let mut index = HashMap::new();
    for (k, n) in nodes.iter().enumerate() {
        if index.insert(n.id.as_str(), k).is_some() {
            return Err(Error::DuplicateNode(n.id.clone()));
        }
    }
    let lookup = |id: IdRepr| -> Result<usize> {
        let id = id.into_string();
        index.get(id.as_str()).copied().ok_or(Error::UnknownNode(id))
    };
    let slack = index.get(slack_id.as_str()).copied().ok_or(Error::UnknownNode(slack_id.clone()))?;
    let mut branches = Vec::with_capacity(file.branches.len());
    for rec in file.branches {
        branches.push(Branch {
            from: lookup(rec.from)?,
            to: lookup(rec.to)?,
            series: Complex64::new(rec.g, rec.b),
            shunt_from: Complex64::new(0.0, rec.b_sh_from),
            shunt_to: Complex64::new(0.0, rec.b_sh_to),
        });
    }
    Network::new(nodes, branches, slack)
}

/// Nodal admittance matrix `Y`.
///
/// `Y_ii = y_i^sh + Σ_k (y_ik + y_ik^sh,i)` and `Y_ik = -Σ y_ik` over the
/// branches joining `i` and `k`. `Y` is symmetric for this branch model, so
/// column `i` doubles as row `i`.
#[derive(Clone, Debug)]
pub struct AdmittanceMatrix {
    y: SparseMatrix,
}

impl AdmittanceMatrix {
    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.y
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.y.get(i, k)
    }

    /// `(k, Y_ik)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (rows, vals) = self.y.col(i);
        rows.iter().copied().zip(vals.iter().copied())
    }

    /// Nodal currents `Y u`.
    pub fn currents(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.y.mul_vec(u)
    }

    pub fn structural_nnz(&self) -> usize {
        self.y.nnz()
    }
}

pub fn build_admittance(net: &Network) -> AdmittanceMatrix {
    let n = net.node_count();
    let mut t = TripletBuilder::with_capacity(n, n, n + 4 * net.branch_count());
    for (i, node) in net.nodes().iter().enumerate() {
        t.push(i, i, node.shunt);
    }
    for br in net.branches() {
        t.push(br.from, br.from, br.series + br.shunt_from);
        t.push(br.to, br.to, br.series + br.shunt_to);
        t.push(br.from, br.to, -br.series);
        t.push(br.to, br.from, -br.series);
    }
    AdmittanceMatrix { y: t.build() }
}

/// A network together with its admittance matrix.
#[derive(Clone, Debug)]
pub struct Grid {
    pub network: Network,
    pub admittance: AdmittanceMatrix,
}

impl Grid {
    pub fn new(network: Network) -> Self {
        let admittance = build_admittance(&network);
        Grid { network, admittance }
    }

    pub fn n(&self) -> usize {
        self.network.node_count()
    }
}

/// Complex nodal voltages, indexed by node.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(pub Vec<Complex64>);

impl StateVector {
    pub fn flat(n: usize) -> Self {
        StateVector(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|u| u.re.is_finite() && u.im.is_finite())
    }

    /// All magnitudes lie in `(0, max_magnitude)`.
    pub fn within_bounds(&self, max_magnitude: f64) -> bool {
        self.is_finite() && self.0.iter().all(|u| u.norm() > 0.0 && u.norm() < max_magnitude)
    }

    /// `(index, magnitude)` of the lowest voltage.
    pub fn min_magnitude(&self) -> (usize, f64) {
        self.0
            .iter()
            .enumerate()
            .map(|(k, u)| (k, u.norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}

//! Measurement functions `h(x, x̄)`, their Wirtinger Jacobians, and the
//! equality constraints (zero injections and the slack angle).
//!
//! Functional forms, with `u` the nodal voltages and `I_f` the π-model
//! current leaving the measured end:
//!
//! | kind                  | `h`                      |
//! |-----------------------|--------------------------|
//! | `ScadaVoltageMagSq`   | `u_i ū_i`                |
//! | `ScadaPowerInjection` | `u_i Σ_k Ȳ_ik ū_k`       |
//! | `ScadaPowerFlow`      | `u_f conj(I_f)`          |
//! | `PmuVoltage`          | `u_i`                    |
//! | `PmuCurrentFlow`      | `I_f = y(u_f - u_t) + y_f^sh u_f` |
//! | `ZeroInjectionPseudo` | same as injection        |
//!
//! Power measurements pair `P + jQ` into one complex row.

use crate::network::{BranchEnd, Grid, IdRepr, Network, StateVector};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const HALF_J: Complex64 = Complex64::new(0.0, 0.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasurementKind {
    ScadaVoltageMagSq,
    ScadaPowerInjection,
    ScadaPowerFlow,
    PmuVoltage,
    PmuCurrentFlow,
    ZeroInjectionPseudo,
}

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 6] = [
        MeasurementKind::ScadaVoltageMagSq,
        MeasurementKind::ScadaPowerInjection,
        MeasurementKind::ScadaPowerFlow,
        MeasurementKind::PmuVoltage,
        MeasurementKind::PmuCurrentFlow,
        MeasurementKind::ZeroInjectionPseudo,
    ];

    pub fn at_node(self) -> bool {
        !matches!(self, MeasurementKind::ScadaPowerFlow | MeasurementKind::PmuCurrentFlow)
    }

    /// `h` is real for every state.
    pub fn is_real_valued(self) -> bool {
        self == MeasurementKind::ScadaVoltageMagSq
    }

    /// `h` is linear in `x` (and independent of `x̄`).
    pub fn is_linear(self) -> bool {
        matches!(self, MeasurementKind::PmuVoltage | MeasurementKind::PmuCurrentFlow)
    }

    pub fn is_pmu(self) -> bool {
        self.is_linear()
    }

    fn pairs_power(self) -> bool {
        matches!(
            self,
            MeasurementKind::ScadaPowerInjection | MeasurementKind::ScadaPowerFlow | MeasurementKind::ZeroInjectionPseudo
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Node(usize),
    Branch { branch: usize, end: BranchEnd },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub location: Location,
    /// Measured value; real-valued kinds carry a zero imaginary part.
    pub value: Complex64,
    /// Standard deviation of the meter reading. For `ScadaVoltageMagSq`
    /// this is the deviation of the magnitude meter.
    pub sigma: f64,
    pub weight: f64,
}

impl Measurement {
    pub fn new(
        kind: MeasurementKind,
        location: Location,
        value: Complex64,
        sigma: f64,
        weight: f64,
        net: &Network,
    ) -> Result<Self> {
        let m = Measurement { kind, location, value, sigma, weight };
        m.validate(net)?;
        Ok(m)
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.weight > 0.0) || !self.weight.is_finite() {
            return Err(Error::InvalidMeasurement(format!("weight must be positive, got {}", self.weight)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidMeasurement(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !self.value.re.is_finite() || !self.value.im.is_finite() {
            return Err(Error::InvalidMeasurement("non-finite value".into()));
        }
        if self.kind.is_real_valued() && self.value.im != 0.0 {
            return Err(Error::InvalidMeasurement(format!("{:?} carries an imaginary part", self.kind)));
        }
        check_location(self.kind, self.location, net)
    }
}

fn check_location(kind: MeasurementKind, loc: Location, net: &Network) -> Result<()> {
    match (kind.at_node(), loc) {
        (true, Location::Node(i)) if i < net.node_count() => Ok(()),
        (false, Location::Branch { branch, .. }) if branch < net.branch_count() => Ok(()),
        _ => Err(Error::InvalidLocation(format!("{kind:?} at {loc:?}"))),
    }
}

/// Value of one row and its nonzero Wirtinger derivatives
/// `(column, ∂h/∂x_j, ∂h/∂x̄_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowEval {
    pub value: Complex64,
    pub entries: Vec<(usize, Complex64, Complex64)>,
}

/// Complex power injection at node `i`, `u_i Σ_k Ȳ_ik ū_k`.
pub fn injection_row(grid: &Grid, u: &[Complex64], i: usize) -> RowEval {
    let ui = u[i];
    let mut current_conj = ZERO;
    let mut entries = Vec::with_capacity(8);
    for (k, yik) in grid.admittance.row(i) {
        let yc = yik.conj();
        current_conj += yc * u[k].conj();
        entries.push((k, ZERO, yc * ui));
    }
    for e in &mut entries {
        if e.0 == i {
            e.1 = current_conj;
        }
    }
    RowEval { value: ui * current_conj, entries }
}

/// Current leaving `end` of branch `b`, with its derivatives w.r.t. `(near, far)`.
fn branch_current(grid: &Grid, u: &[Complex64], b: usize, end: BranchEnd) -> (Complex64, usize, usize, Complex64, Complex64) {
    let br = &grid.network.branches()[b];
    let (near, far) = br.terminals(end);
    let ysh = br.end_shunt(end);
    let y = br.series;
    let i = y * (u[near] - u[far]) + ysh * u[near];
    (i, near, far, y + ysh, -y)
}

fn eval_row(grid: &Grid, u: &[Complex64], kind: MeasurementKind, loc: Location) -> Result<RowEval> {
    check_location(kind, loc, &grid.network)?;
    Ok(match (kind, loc) {
        (MeasurementKind::PmuVoltage, Location::Node(i)) => RowEval {
            value: u[i],
            entries: vec![(i, Complex64::new(1.0, 0.0), ZERO)],
        },
        (MeasurementKind::ScadaVoltageMagSq, Location::Node(i)) => RowEval {
            value: Complex64::new(u[i].norm_sqr(), 0.0),
            entries: vec![(i, u[i].conj(), u[i])],
        },
        (MeasurementKind::ScadaPowerInjection | MeasurementKind::ZeroInjectionPseudo, Location::Node(i)) => {
            injection_row(grid, u, i)
        }
        (MeasurementKind::PmuCurrentFlow, Location::Branch { branch, end }) => {
            let (i, near, far, d_near, d_far) = branch_current(grid, u, branch, end);
            RowEval { value: i, entries: vec![(near, d_near, ZERO), (far, d_far, ZERO)] }
        }
        (MeasurementKind::ScadaPowerFlow, Location::Branch { branch, end }) => {
            let (i, near, far, d_near, d_far) = branch_current(grid, u, branch, end);
            let un = u[near];
            RowEval {
                value: un * i.conj(),
                entries: vec![(near, i.conj(), un * d_near.conj()), (far, ZERO, un * d_far.conj())],
            }
        }
        _ => unreachable!("location checked above"),
    })
}

/// Imaginary part of the slack voltage, `(j/2)(ū_s - u_s)`.
pub fn slack_row(u: &[Complex64], s: usize) -> RowEval {
    RowEval { value: HALF_J * (u[s].conj() - u[s]), entries: vec![(s, -HALF_J, HALF_J)] }
}

/// Evaluates one measurement row at `state`.
pub fn eval_measurement(grid: &Grid, state: &StateVector, m: &Measurement) -> Result<RowEval> {
    check_state(grid, state)?;
    eval_row(grid, &state.0, m.kind, m.location)
}

fn check_state(grid: &Grid, state: &StateVector) -> Result<()> {
    if state.len() != grid.n() {
        return Err(Error::Dimension(format!("state has {} entries, network has {} nodes", state.len(), grid.n())));
    }
    Ok(())
}

pub fn eval_h(grid: &Grid, state: &StateVector, meas: &[Measurement]) -> Result<Vec<Complex64>> {
    check_state(grid, state)?;
    meas.iter().map(|m| eval_row(grid, &state.0, m.kind, m.location).map(|r| r.value)).collect()
}

fn rows_to_blocks(rows: &[RowEval], n: usize) -> (SparseMatrix, SparseMatrix) {
    let cap: usize = rows.iter().map(|r| r.entries.len()).sum();
    let mut hx = TripletBuilder::with_capacity(rows.len(), n, cap);
    let mut hxbar = TripletBuilder::with_capacity(rows.len(), n, cap);
    for (r, row) in rows.iter().enumerate() {
        for &(j, dx, dxbar) in &row.entries {
            hx.push(r, j, dx);
            hxbar.push(r, j, dxbar);
        }
    }
    (hx.build(), hxbar.build())
}

/// `(H_x, H_x̄)`, each `m × n`.
pub fn eval_jacobians(grid: &Grid, state: &StateVector, meas: &[Measurement]) -> Result<(SparseMatrix, SparseMatrix)> {
    check_state(grid, state)?;
    let rows = meas
        .iter()
        .map(|m| eval_row(grid, &state.0, m.kind, m.location))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows_to_blocks(&rows, grid.n()))
}

/// Which nodes carry exact zero-injection constraints, plus the slack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSpec {
    zero_injection: Vec<usize>,
    slack: usize,
}

impl ConstraintSpec {
    pub fn new(net: &Network, zero_injection: Vec<usize>, slack: usize) -> Result<Self> {
        let n = net.node_count();
        if slack >= n {
            return Err(Error::InvalidConstraint(format!("slack index {slack} out of range")));
        }
        let mut seen = vec![false; n];
        for &k in &zero_injection {
            if k >= n {
                return Err(Error::InvalidConstraint(format!("node index {k} out of range")));
            }
            if k == slack {
                return Err(Error::InvalidConstraint(format!("slack `{}` listed as zero injection", net.id_of(k))));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidConstraint(format!("zero injection at `{}` listed twice", net.id_of(k))));
            }
        }
        Ok(ConstraintSpec { zero_injection, slack })
    }

    /// Zero injections from the network flags.
    pub fn from_network(net: &Network) -> Self {
        ConstraintSpec { zero_injection: net.zero_injection_nodes(), slack: net.slack() }
    }

    pub fn slack_only(net: &Network) -> Self {
        ConstraintSpec { zero_injection: Vec::new(), slack: net.slack() }
    }

    pub fn zero_injection(&self) -> &[usize] {
        &self.zero_injection
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    /// Total constraint rows, slack included.
    pub fn len(&self) -> usize {
        self.zero_injection.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Constraint values and Jacobian blocks.
///
/// The first `s.len() - real_rows` rows are complex and are paired with
/// their conjugates in the KKT system; the trailing `real_rows` rows (the
/// slack angle) are real-valued and appear once.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub s: Vec<Complex64>,
    pub jx: SparseMatrix,
    pub jxbar: SparseMatrix,
    pub real_rows: usize,
}

impl ConstraintSystem {
    pub fn empty(n: usize) -> Self {
        ConstraintSystem {
            s: Vec::new(),
            jx: SparseMatrix::zeros(0, n),
            jxbar: SparseMatrix::zeros(0, n),
            real_rows: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn complex_rows(&self) -> usize {
        self.s.len() - self.real_rows
    }

    /// Largest `|s_i|` over the zero-injection rows.
    pub fn zero_injection_mismatch(&self) -> f64 {
        self.s[..self.complex_rows()].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Data of the conjugate constraints `s̄`: values, `∂s̄/∂x = conj(∂s/∂x̄)`
    /// and `∂s̄/∂x̄ = conj(∂s/∂x)`.
    pub fn conjugate_rows(&self) -> (Vec<Complex64>, SparseMatrix, SparseMatrix) {
        conjugate_rows(&self.s, &self.jx, &self.jxbar)
    }
}

pub fn conjugate_rows(
    s: &[Complex64],
    jx: &SparseMatrix,
    jxbar: &SparseMatrix,
) -> (Vec<Complex64>, SparseMatrix, SparseMatrix) {
    (s.iter().map(|v| v.conj()).collect(), jxbar.conj(), jx.conj())
}

/// Zero-injection rows in `ConstraintSpec` order, then the slack-angle row last.
pub fn eval_constraints(grid: &Grid, state: &StateVector, cs: &ConstraintSpec) -> Result<ConstraintSystem> {
    check_state(grid, state)?;
    let n = grid.n();
    if cs.slack >= n || cs.zero_injection.iter().any(|&k| k >= n) {
        return Err(Error::InvalidConstraint("node index out of range".into()));
    }
    let u = &state.0;
    let mut rows: Vec<RowEval> = cs.zero_injection.iter().map(|&i| injection_row(grid, u, i)).collect();
    rows.push(slack_row(u, cs.slack));
    let s = rows.iter().map(|r| r.value).collect();
    let (jx, jxbar) = rows_to_blocks(&rows, n);
    Ok(ConstraintSystem { s, jx, jxbar, real_rows: 1 })
}

/// Linearized measurement model and constraints at one state.
#[derive(Clone, Debug)]
pub struct WirtingerSystem {
    /// `z - h(x*, x̄*)`
    pub r: Vec<Complex64>,
    pub hx: SparseMatrix,
    pub hxbar: SparseMatrix,
    pub weights: Vec<f64>,
    pub constraints: ConstraintSystem,
}

impl WirtingerSystem {
    pub fn build(grid: &Grid, state: &StateVector, meas: &[Measurement], cs: Option<&ConstraintSpec>) -> Result<Self> {
        check_state(grid, state)?;
        let rows = meas
            .iter()
            .map(|m| eval_row(grid, &state.0, m.kind, m.location))
            .collect::<Result<Vec<_>>>()?;
        let r = rows.iter().zip(meas).map(|(row, m)| m.value - row.value).collect();
        let (hx, hxbar) = rows_to_blocks(&rows, grid.n());
        let constraints = match cs {
            Some(cs) => eval_constraints(grid, state, cs)?,
            None => ConstraintSystem::empty(grid.n()),
        };
        Ok(WirtingerSystem { r, hx, hxbar, weights: meas.iter().map(|m| m.weight).collect(), constraints })
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }
}

/// Ordered list of measurements with the JSON-lines file format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementSet {
    pub measurements: Vec<Measurement>,
}

#[derive(Serialize, Deserialize)]
struct MeasurementRecord {
    kind: MeasurementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node: Option<IdRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<IdRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<IdRepr>,
    #[serde(default)]
    value_re: Option<f64>,
    #[serde(default)]
    value_im: Option<f64>,
    sigma: f64,
    weight: f64,
}

struct Partial {
    slot: usize,
    re: Option<f64>,
    im: Option<f64>,
    sigma: f64,
    weight: f64,
    line: usize,
}

impl MeasurementSet {
    pub fn new(measurements: Vec<Measurement>) -> Self {
        MeasurementSet { measurements }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn count(&self, kind: MeasurementKind) -> usize {
        self.measurements.iter().filter(|m| m.kind == kind).count()
    }

    /// Parses JSON lines. Blank lines and lines starting with `#` are
    /// skipped. Power records that carry only `value_re` (P) or only
    /// `value_im` (Q) are merged with their partner at the same location
    /// into one complex measurement; the merged weight is the smaller of
    /// the two and the merged sigma the larger.
    pub fn from_jsonl(text: &str, net: &Network) -> Result<Self> {
        let mut slots: Vec<Option<Measurement>> = Vec::new();
        let mut pending: HashMap<(MeasurementKind, Location), Partial> = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: MeasurementRecord = serde_json::from_str(line)
                .map_err(|e| Error::Schema(format!("measurement line {}: {e}", lineno + 1)))?;
            let location = if rec.kind.at_node() {
                let id = rec
                    .node
                    .ok_or_else(|| Error::InvalidLocation(format!("line {}: node measurement without `node`", lineno + 1)))?;
                Location::Node(net.node_index(&id.into_string())?)
            } else {
                let (Some(f), Some(t)) = (rec.from, rec.to) else {
                    return Err(Error::InvalidLocation(format!(
                        "line {}: branch measurement needs `from` and `to`",
                        lineno + 1
                    )));
                };
                let (f, t) = (net.node_index(&f.into_string())?, net.node_index(&t.into_string())?);
                let (branch, end) = net.find_branch(f, t)?;
                Location::Branch { branch, end }
            };
            let partial = rec.kind.pairs_power() && (rec.value_re.is_none() || rec.value_im.is_none());
            if partial {
                let key = (rec.kind, location);
                match pending.remove(&key) {
                    None => {
                        pending.insert(
                            key,
                            Partial {
                                slot: slots.len(),
                                re: rec.value_re,
                                im: rec.value_im,
                                sigma: rec.sigma,
                                weight: rec.weight,
                                line: lineno + 1,
                            },
                        );
                        slots.push(None);
                    }
                    Some(p) => {
                        let re = p.re.or(rec.value_re);
                        let im = p.im.or(rec.value_im);
                        let (Some(re), Some(im)) = (re, im) else {
                            return Err(Error::InvalidMeasurement(format!(
                                "lines {} and {}: P/Q halves do not complement each other",
                                p.line,
                                lineno + 1
                            )));
                        };
                        let m = Measurement::new(
                            rec.kind,
                            location,
                            Complex64::new(re, im),
                            p.sigma.max(rec.sigma),
                            p.weight.min(rec.weight),
                            net,
                        )?;
                        slots[p.slot] = Some(m);
                    }
                }
                continue;
            }
            let re = rec
                .value_re
                .ok_or_else(|| Error::InvalidMeasurement(format!("line {}: missing value_re", lineno + 1)))?;
            let value = Complex64::new(re, rec.value_im.unwrap_or(0.0));
            slots.push(Some(Measurement::new(rec.kind, location, value, rec.sigma, rec.weight, net)?));
        }
        if let Some(p) = pending.values().min_by_key(|p| p.line) {
            return Err(Error::InvalidMeasurement(format!("line {}: unpaired P/Q half", p.line)));
        }
        Ok(MeasurementSet { measurements: slots.into_iter().flatten().collect() })
    }

    pub fn to_jsonl(&self, net: &Network) -> String {
        let mut out = String::new();
        for m in &self.measurements {
            let (node, from, to) = match m.location {
                Location::Node(i) => (Some(IdRepr::Str(net.id_of(i).to_string())), None, None),
                Location::Branch { branch, end } => {
                    let (near, far) = net.branches()[branch].terminals(end);
                    (
                        None,
                        Some(IdRepr::Str(net.id_of(near).to_string())),
                        Some(IdRepr::Str(net.id_of(far).to_string())),
                    )
                }
            };
            let rec = MeasurementRecord {
                kind: m.kind,
                node,
                from,
                to,
                value_re: Some(m.value.re),
                value_im: Some(m.value.im),
                sigma: m.sigma,
                weight: m.weight,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn three_node() -> Grid {
        let text = r#"{"slack": "a",
            "nodes": [{"id": "a"}, {"id": "b", "b_sh": 0.1}, {"id": "c", "zero_injection": true}],
            "branches": [
                {"from": "a", "to": "b", "g": 2.0, "b": -6.0, "b_sh_from": 0.01, "b_sh_to": 0.01},
                {"from": "b", "to": "c", "g": 1.0, "b": -4.0},
                {"from": "a", "to": "c", "g": 1.5, "b": -5.0}]}"#;
        Grid::new(parse_network(text).unwrap())
    }

    fn meas(kind: MeasurementKind, location: Location) -> Measurement {
        Measurement { kind, location, value: ZERO, sigma: 0.0, weight: 1.0 }
    }

    #[test]
    fn pmu_voltage_is_identity() {
        let g = three_node();
        let st = StateVector(vec![c(1.0, 0.0), c(0.95, 0.1), c(1.0, 0.0)]);
        let m = meas(MeasurementKind::PmuVoltage, Location::Node(1));
        let h = eval_h(&g, &st, &[m]).unwrap();
        assert_eq!(h[0], c(0.95, 0.1));
        let (hx, hxbar) = eval_jacobians(&g, &st, &[m]).unwrap();
        assert_eq!(hx.get(0, 1), c(1.0, 0.0));
        assert_eq!(hx.nnz(), 1);
        assert_eq!(hxbar.nnz(), 0);
    }

    #[test]
    fn squared_magnitude_values() {
        let g = three_node();
        let m = meas(MeasurementKind::ScadaVoltageMagSq, Location::Node(0));
        let st = StateVector(vec![c(3.0, 4.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(eval_h(&g, &st, &[m]).unwrap()[0], c(25.0, 0.0));
        let st = StateVector(vec![c(2.0, 1.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let (hx, hxbar) = eval_jacobians(&g, &st, &[m]).unwrap();
        assert_eq!(hx.get(0, 0), c(2.0, -1.0));
        assert_eq!(hxbar.get(0, 0), c(2.0, 1.0));
    }

    #[test]
    fn flat_start_injection_without_shunts_is_zero() {
        let text = r#"{"slack": "a", "nodes": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
            "branches": [{"from": "a", "to": "b", "g": 2.0, "b": -6.0}, {"from": "b", "to": "c", "g": 1.0, "b": -4.0}]}"#;
        let g = Grid::new(parse_network(text).unwrap());
        let st = StateVector::flat(3);
        let ms: Vec<_> = (0..3).map(|i| meas(MeasurementKind::ScadaPowerInjection, Location::Node(i))).collect();
        for h in eval_h(&g, &st, &ms).unwrap() {
            assert!(h.norm() < 1e-15);
        }
    }

    #[test]
    fn flat_start_zero_injection_collapses_to_conjugate_shunt() {
        let text = r#"{"slack": "a", "nodes": [{"id": "a"}, {"id": "b", "b_sh": 0.1, "zero_injection": true}],
            "branches": [{"from": "a", "to": "b", "g": 2.0, "b": -6.0}]}"#;
        let g = Grid::new(parse_network(text).unwrap());
        let cs = ConstraintSpec::from_network(&g.network);
        let sys = eval_constraints(&g, &StateVector::flat(2), &cs).unwrap();
        assert!((sys.s[0] - c(0.0, -0.1)).norm() < 1e-15);
    }

    #[test]
    fn slack_row_at_real_voltage() {
        let g = three_node();
        let cs = ConstraintSpec::slack_only(&g.network);
        let sys = eval_constraints(&g, &StateVector::flat(3), &cs).unwrap();
        assert_eq!(sys.s, vec![ZERO]);
        assert_eq!(sys.jx.get(0, 0), c(0.0, -0.5));
        assert_eq!(sys.jxbar.get(0, 0), c(0.0, 0.5));
        assert_eq!(sys.real_rows, 1);
        // imaginary part of a rotated slack
        let st = StateVector(vec![c(0.8, 0.3), c(1.0, 0.0), c(1.0, 0.0)]);
        let sys = eval_constraints(&g, &st, &cs).unwrap();
        assert!((sys.s[0] - c(0.3, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn zero_injection_jacobian_matches_closed_form() {
        let g = three_node();
        let cs = ConstraintSpec::from_network(&g.network);
        let u = vec![c(1.02, 0.01), c(0.97, -0.05), c(0.99, -0.03)];
        let sys = eval_constraints(&g, &StateVector(u.clone()), &cs).unwrap();
        let i = 2;
        let y = &g.admittance;
        let sum: Complex64 = (0..3).filter(|&k| k != i).map(|k| y.get(i, k).conj() * u[k].conj()).sum();
        let s_expected = u[i] * y.get(i, i).conj() * u[i].conj() + u[i] * sum;
        assert!((sys.s[0] - s_expected).norm() < 1e-14);
        let d_ui = y.get(i, i).conj() * u[i].conj() + sum;
        assert!((sys.jx.get(0, i) - d_ui).norm() < 1e-14);
        for k in 0..3 {
            if k != i {
                assert_eq!(sys.jx.get(0, k), ZERO);
                assert!((sys.jxbar.get(0, k) - y.get(i, k).conj() * u[i]).norm() < 1e-15);
            }
        }
        assert!((sys.jxbar.get(0, i) - y.get(i, i).conj() * u[i]).norm() < 1e-15);
    }

    #[test]
    fn conjugate_rows_swap_and_conjugate() {
        let jx = SparseMatrix::from_triplets(1, 2, &[(0, 0, c(1.0, 1.0))]);
        let jxbar = SparseMatrix::from_triplets(1, 2, &[(0, 1, c(3.0, 2.0))]);
        let (sb, jbx, jbxbar) = conjugate_rows(&[c(0.0, -0.1)], &jx, &jxbar);
        assert_eq!(sb, vec![c(0.0, 0.1)]);
        assert_eq!(jbx.get(0, 1), c(3.0, -2.0));
        assert_eq!(jbxbar.get(0, 0), c(1.0, -1.0));
    }

    #[test]
    fn invalid_locations_rejected() {
        let g = three_node();
        let bad = meas(MeasurementKind::ScadaPowerFlow, Location::Node(0));
        assert!(matches!(eval_h(&g, &StateVector::flat(3), &[bad]), Err(Error::InvalidLocation(_))));
        let bad = meas(MeasurementKind::PmuVoltage, Location::Node(7));
        assert!(matches!(eval_h(&g, &StateVector::flat(3), &[bad]), Err(Error::InvalidLocation(_))));
        assert!(Measurement::new(MeasurementKind::PmuVoltage, Location::Node(0), ZERO, 0.0, 0.0, &g.network).is_err());
        assert!(Measurement::new(MeasurementKind::PmuVoltage, Location::Node(0), ZERO, -1.0, 1.0, &g.network).is_err());
    }

    #[test]
    fn constraint_spec_validation() {
        let g = three_node();
        assert!(ConstraintSpec::new(&g.network, vec![2, 2], 0).is_err());
        assert!(ConstraintSpec::new(&g.network, vec![0], 0).is_err());
        assert!(ConstraintSpec::new(&g.network, vec![5], 0).is_err());
        assert_eq!(ConstraintSpec::new(&g.network, vec![2], 0).unwrap(), ConstraintSpec::from_network(&g.network));
    }

    #[test]
    fn jsonl_parses_and_merges_pq_halves() {
        let g = three_node();
        let text = r#"
# header comment
{"kind":"PmuVoltage","node":"b","value_re":0.98,"value_im":-0.02,"sigma":0.006,"weight":5}
{"kind":"ScadaPowerFlow","from":"b","to":"a","value_re":-0.4,"sigma":0.02,"weight":1}
{"kind":"ScadaVoltageMagSq","node":"a","value_re":1.0,"sigma":0.024,"weight":1}
{"kind":"ScadaPowerFlow","from":"b","to":"a","value_im":0.1,"sigma":0.03,"weight":2}
"#;
        let set = MeasurementSet::from_jsonl(text, &g.network).unwrap();
        assert_eq!(set.len(), 3);
        let flow = set.measurements[1];
        assert_eq!(flow.kind, MeasurementKind::ScadaPowerFlow);
        assert_eq!(flow.location, Location::Branch { branch: 0, end: BranchEnd::To });
        assert_eq!(flow.value, c(-0.4, 0.1));
        assert_eq!(flow.weight, 1.0);
        assert_eq!(flow.sigma, 0.03);
        let again = MeasurementSet::from_jsonl(&set.to_jsonl(&g.network), &g.network).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn jsonl_rejects_unpaired_half_and_bad_kind() {
        let g = three_node();
        let half = r#"{"kind":"ScadaPowerInjection","node":"a","value_re":0.5,"sigma":0.02,"weight":1}"#;
        assert!(MeasurementSet::from_jsonl(half, &g.network).is_err());
        let bad = r#"{"kind":"Voltage","node":"a","value_re":0.5,"sigma":0.02,"weight":1}"#;
        assert!(matches!(MeasurementSet::from_jsonl(bad, &g.network), Err(Error::Schema(_))));
        let nobranch = r#"{"kind":"PmuCurrentFlow","from":"a","to":"a","value_re":0.5,"sigma":0.02,"weight":1}"#;
        assert!(MeasurementSet::from_jsonl(nobranch, &g.network).is_err());
    }
}

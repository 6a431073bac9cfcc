//! Which nodes and branch ends carry which meters.

use crate::measurement::{ConstraintSpec, Location, MeasurementKind};
use crate::network::{BranchEnd, IdRepr, Network};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Placement {
    pub scada_voltage: Vec<usize>,
    pub scada_injection: Vec<usize>,
    /// `(branch, measured end)`
    pub scada_flow: Vec<(usize, BranchEnd)>,
    pub pmu_voltage: Vec<usize>,
    pub pmu_current: Vec<(usize, BranchEnd)>,
    /// Use the network's zero-injection nodes (as constraints or
    /// pseudo-measurements).
    pub zero_injection: bool,
}

#[derive(Serialize, Deserialize)]
struct EndRecord {
    from: IdRepr,
    to: IdRepr,
}

#[derive(Serialize, Deserialize)]
struct PlacementFile {
    #[serde(default)]
    scada_voltage: Vec<IdRepr>,
    #[serde(default)]
    scada_injection: Vec<IdRepr>,
    #[serde(default)]
    scada_flow: Vec<EndRecord>,
    #[serde(default)]
    pmu_voltage: Vec<IdRepr>,
    #[serde(default)]
    pmu_current: Vec<EndRecord>,
    #[serde(default)]
    zero_injection: bool,
}

impl Placement {
    /// Parses `{"scada_voltage": [ids], "scada_injection": [ids],
    /// "scada_flow": [{"from", "to"}], "pmu_voltage": [ids],
    /// "pmu_current": [{"from", "to"}], "zero_injection": bool}`.
    /// A flow meter sits at the `from` end of the branch joining the pair.
    pub fn parse(text: &str, net: &Network) -> Result<Self> {
        let file: PlacementFile = serde_json::from_str(text).map_err(|e| Error::Schema(format!("placement: {e}")))?;
        let nodes = |ids: Vec<IdRepr>| -> Result<Vec<usize>> {
            ids.into_iter().map(|id| net.node_index(&id.into_string())).collect()
        };
        let ends = |recs: Vec<EndRecord>| -> Result<Vec<(usize, BranchEnd)>> {
            recs.into_iter()
                .map(|r| {
                    let f = net.node_index(&r.from.into_string())?;
                    let t = net.node_index(&r.to.into_string())?;
                    net.find_branch(f, t)
                })
                .collect()
        };
        let p = Placement {
            scada_voltage: nodes(file.scada_voltage)?,
            scada_injection: nodes(file.scada_injection)?,
            scada_flow: ends(file.scada_flow)?,
            pmu_voltage: nodes(file.pmu_voltage)?,
            pmu_current: ends(file.pmu_current)?,
            zero_injection: file.zero_injection,
        };
        p.validate(net)?;
        Ok(p)
    }

    pub fn to_json(&self, net: &Network) -> String {
        let id = |i: usize| IdRepr::Str(net.id_of(i).to_string());
        let end = |&(b, e): &(usize, BranchEnd)| {
            let (near, far) = net.branches()[b].terminals(e);
            EndRecord { from: id(near), to: id(far) }
        };
        let file = PlacementFile {
            scada_voltage: self.scada_voltage.iter().map(|&i| id(i)).collect(),
            scada_injection: self.scada_injection.iter().map(|&i| id(i)).collect(),
            scada_flow: self.scada_flow.iter().map(end).collect(),
            pmu_voltage: self.pmu_voltage.iter().map(|&i| id(i)).collect(),
            pmu_current: self.pmu_current.iter().map(end).collect(),
            zero_injection: self.zero_injection,
        };
        serde_json::to_string(&file).expect("placement serializes")
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        let n = net.node_count();
        let b = net.branch_count();
        let bad_node = self.scada_voltage.iter().chain(&self.scada_injection).chain(&self.pmu_voltage).any(|&i| i >= n);
        let bad_branch = self.scada_flow.iter().chain(&self.pmu_current).any(|&(k, _)| k >= b);
        if bad_node || bad_branch {
            return Err(Error::InvalidLocation("placement refers to a missing node or branch".into()));
        }
        if self.zero_injection && self.pmu_voltage.is_empty() && self.scada_voltage.is_empty() {
            log::debug!("placement has no voltage meters");
        }
        Ok(())
    }

    /// Meter locations in a fixed order: SCADA voltage, injection, flow,
    /// then PMU voltage and current, then zero-injection pseudo rows.
    pub fn locations(&self, net: &Network) -> Vec<(MeasurementKind, Location)> {
        let mut out = Vec::with_capacity(self.scada_count() + self.pmu_count());
        let node = |k, v: &[usize], out: &mut Vec<_>| out.extend(v.iter().map(|&i| (k, Location::Node(i))));
        let branch = |k, v: &[(usize, BranchEnd)], out: &mut Vec<_>| {
            out.extend(v.iter().map(|&(branch, end)| (k, Location::Branch { branch, end })))
        };
        node(MeasurementKind::ScadaVoltageMagSq, &self.scada_voltage, &mut out);
        node(MeasurementKind::ScadaPowerInjection, &self.scada_injection, &mut out);
        branch(MeasurementKind::ScadaPowerFlow, &self.scada_flow, &mut out);
        node(MeasurementKind::PmuVoltage, &self.pmu_voltage, &mut out);
        branch(MeasurementKind::PmuCurrentFlow, &self.pmu_current, &mut out);
        if self.zero_injection {
            node(MeasurementKind::ZeroInjectionPseudo, &net.zero_injection_nodes(), &mut out);
        }
        out
    }

    pub fn scada_count(&self) -> usize {
        self.scada_voltage.len() + self.scada_injection.len() + self.scada_flow.len()
    }

    pub fn pmu_count(&self) -> usize {
        self.pmu_voltage.len() + self.pmu_current.len()
    }

    pub fn constraint_spec(&self, net: &Network) -> ConstraintSpec {
        if self.zero_injection {
            ConstraintSpec::from_network(net)
        } else {
            ConstraintSpec::slack_only(net)
        }
    }

    /// PMU voltages everywhere and currents at the `from` end of every
    /// branch, with no SCADA meters.
    pub fn full_pmu(net: &Network, zero_injection: bool) -> Self {
        Placement {
            pmu_voltage: (0..net.node_count()).collect(),
            pmu_current: (0..net.branch_count()).map(|b| (b, BranchEnd::From)).collect(),
            zero_injection,
            ..Placement::default()
        }
    }
}

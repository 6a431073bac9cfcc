//! Noisy measurement sets drawn around a known true state.

use super::placement::Placement;
use crate::measurement::{eval_h, Location, Measurement, MeasurementKind, MeasurementSet};
use crate::network::{BranchEnd, Grid, StateVector};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Meter noise. Standard deviations are percentages of the meter full
/// scale (magnitudes) or degrees (phasor angles). Unset full-scale values
/// default to the largest true magnitude of that quantity over the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub scada_sigma_pct: f64,
    pub pmu_mag_sigma_pct: f64,
    pub pmu_angle_sigma_deg: f64,
    pub full_scale_voltage: f64,
    pub full_scale_injection: Option<f64>,
    pub full_scale_flow: Option<f64>,
    pub full_scale_current: Option<f64>,
    pub scada_weight: f64,
    pub pmu_weight: f64,
    pub zero_injection_weight: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            scada_sigma_pct: 2.0,
            pmu_mag_sigma_pct: 0.5,
            pmu_angle_sigma_deg: 0.1,
            full_scale_voltage: 1.2,
            full_scale_injection: None,
            full_scale_flow: None,
            full_scale_current: None,
            scada_weight: 1.0,
            pmu_weight: 5.0,
            zero_injection_weight: 25.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec { scada_sigma_pct: 0.0, pmu_mag_sigma_pct: 0.0, pmu_angle_sigma_deg: 0.0, ..NoiseSpec::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sig = [self.scada_sigma_pct, self.pmu_mag_sigma_pct, self.pmu_angle_sigma_deg];
        if sig.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("noise sigmas must be non-negative".into()));
        }
        let fs = [Some(self.full_scale_voltage), self.full_scale_injection, self.full_scale_flow, self.full_scale_current];
        if fs.iter().flatten().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("full-scale values must be positive".into()));
        }
        if [self.scada_weight, self.pmu_weight, self.zero_injection_weight].iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("weights must be positive".into()));
        }
        Ok(())
    }
}

struct FullScale {
    injection: f64,
    flow: f64,
    current: f64,
}

fn full_scale(grid: &Grid, truth: &StateVector, noise: &NoiseSpec) -> Result<FullScale> {
    let n = grid.n();
    let b = grid.network.branch_count();
    let max_over = |kind: MeasurementKind, locs: Vec<Location>| -> Result<f64> {
        let meas: Vec<Measurement> = locs
            .into_iter()
            .map(|location| Measurement { kind, location, value: Complex64::new(0.0, 0.0), sigma: 0.0, weight: 1.0 })
            .collect();
        let h = eval_h(grid, truth, &meas)?;
        Ok(h.iter().map(|v| v.norm()).fold(0.0, f64::max))
    };
    let ends: Vec<Location> = (0..b)
        .flat_map(|branch| [BranchEnd::From, BranchEnd::To].map(|end| Location::Branch { branch, end }))
        .collect();
    let pick = |given: Option<f64>, computed: f64| {
        given.unwrap_or(if computed > 0.0 { computed } else { 1.0 })
    };
    let inj = match noise.full_scale_injection {
        Some(v) => v,
        None => pick(None, max_over(MeasurementKind::ScadaPowerInjection, (0..n).map(Location::Node).collect())?),
    };
    let flow = match noise.full_scale_flow {
        Some(v) => v,
        None => pick(None, max_over(MeasurementKind::ScadaPowerFlow, ends.clone())?),
    };
    let current = match noise.full_scale_current {
        Some(v) => v,
        None => pick(None, max_over(MeasurementKind::PmuCurrentFlow, ends)?),
    };
    Ok(FullScale { injection: inj, flow, current })
}

/// Draws one measurement set from `noise.seed`.
pub fn simulate_measurements(
    grid: &Grid,
    truth: &StateVector,
    placement: &Placement,
    noise: &NoiseSpec,
) -> Result<MeasurementSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    simulate_with_rng(grid, truth, placement, noise, &mut rng)
}

/// As [`simulate_measurements`] with a caller-owned generator. Values are
/// drawn in placement order. A zero sigma leaves the true value untouched,
/// so a noiseless `NoiseSpec` reproduces `h(truth)` exactly.
pub fn simulate_with_rng<R: Rng>(
    grid: &Grid,
    truth: &StateVector,
    placement: &Placement,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<MeasurementSet> {
    noise.validate()?;
    placement.validate(&grid.network)?;
    let fs = full_scale(grid, truth, noise)?;
    let locs = placement.locations(&grid.network);
    let proto: Vec<Measurement> = locs
        .iter()
        .map(|&(kind, location)| Measurement { kind, location, value: Complex64::new(0.0, 0.0), sigma: 0.0, weight: 1.0 })
        .collect();
    let truth_h = eval_h(grid, truth, &proto)?;

    let mut gauss = |sigma: f64| -> f64 {
        if sigma > 0.0 {
            let e: f64 = StandardNormal.sample(rng);
            sigma * e
        } else {
            0.0
        }
    };
    let scada = noise.scada_sigma_pct / 100.0;
    let pmu_mag = noise.pmu_mag_sigma_pct / 100.0;
    let pmu_ang = noise.pmu_angle_sigma_deg.to_radians();

    let mut out = Vec::with_capacity(proto.len());
    for (m, h) in proto.into_iter().zip(truth_h) {
        let (value, sigma, weight) = match m.kind {
            MeasurementKind::ScadaVoltageMagSq => {
                let s = scada * noise.full_scale_voltage;
                let v = h.re.sqrt() + gauss(s);
                (Complex64::new(v * v, 0.0), s, noise.scada_weight)
            }
            MeasurementKind::ScadaPowerInjection | MeasurementKind::ScadaPowerFlow => {
                let f = if m.kind == MeasurementKind::ScadaPowerFlow { fs.flow } else { fs.injection };
                let s = scada * f;
                let p = h.re + gauss(s);
                let q = h.im + gauss(s);
                (Complex64::new(p, q), s, noise.scada_weight)
            }
            MeasurementKind::PmuVoltage | MeasurementKind::PmuCurrentFlow => {
                let f = if m.kind == MeasurementKind::PmuVoltage { noise.full_scale_voltage } else { fs.current };
                let s = pmu_mag * f;
                let dm = gauss(s);
                let da = gauss(pmu_ang);
                let value = if dm == 0.0 && da == 0.0 { h } else { Complex64::from_polar(h.norm() + dm, h.arg() + da) };
                (value, s, noise.pmu_weight)
            }
            MeasurementKind::ZeroInjectionPseudo => (Complex64::new(0.0, 0.0), 0.0, noise.zero_injection_weight),
        };
        out.push(Measurement { value, sigma, weight, ..m });
    }
    Ok(MeasurementSet::new(out))
}

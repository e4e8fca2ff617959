use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_with, IntegratorConfig};
use crate::equilibrium::{equilibrium_for, EquilibriumConfiguration};
use crate::error::Result;
use crate::linmodes::{drumhead_modes_at, DrumheadModes};
use crate::physcore::{Trap, TrapConfig};
use crate::rng::substream;
use crate::spectra::{odf_phases, OdfConfig, PsdAccumulator, SeriesRecord};
use crate::thermal::{thermal_initial_state, Initialization, SamplerConfig};

/// RNG stream of work item `item` at temperature index `temperature` in
/// arm `arm` of a study.
pub fn stream_index(arm: u64, temperature: usize, item: usize) -> u64 {
    (arm << 48) | ((temperature as u64) << 24) | item as u64
}

/// Maps `f` over `0..n`, in parallel when enabled, keeping index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Trap, zero-temperature equilibrium and its drumhead modes.
pub(crate) struct Crystal {
    pub trap: Trap,
    pub eq: EquilibriumConfiguration,
    pub drumhead: DrumheadModes,
}

impl Crystal {
    pub fn new(cfg: &TrapConfig) -> Result<Self> {
        let trap = Trap::new(*cfg)?;
        let eq = equilibrium_for(&trap)?;
        let drumhead = drumhead_modes_at(&trap, &eq.positions)?;
        Ok(Self { trap, eq, drumhead })
    }

    pub fn drumhead_hz(&self) -> Vec<f64> {
        self.drumhead.frequencies.iter().map(|w| self.trap.hertz(*w)).collect()
    }
}

/// One arm of an MD ensemble: a given initialization and temperature.
pub struct ArmRequest<'a> {
    pub init: Initialization,
    pub t_perp: f64,
    pub integrator: &'a IntegratorConfig,
    pub axial_psd: bool,
    pub inplane_psd: bool,
    /// Phases are evaluated with this config's `f0`; pass `f0 = 1` to get
    /// phases per newton.
    pub odf: Option<&'a OdfConfig>,
    pub arm: u64,
    pub temperature_index: usize,
}

/// Reduced output of one realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationResult {
    pub axial_psd: Option<Vec<f64>>,
    pub inplane_psd: Option<Vec<f64>>,
    /// `[mu][ion]`
    #[serde(skip)]
    pub odf_phases: Option<Vec<Vec<f64>>>,
    pub energy_fluctuation: f64,
    pub thermal_energy_fluctuation: f64,
}

pub(crate) fn run_realization(
    crystal: &Crystal,
    sampler: &SamplerConfig,
    req: &ArmRequest<'_>,
    seed: u64,
    index: usize,
) -> Result<RealizationResult> {
    let trap = &crystal.trap;
    let n = trap.n_ions();
    let mut rng = substream(seed, stream_index(req.arm, req.temperature_index, index));
    let sampler = SamplerConfig {
        t_perp: req.t_perp,
        ..sampler.clone()
    };
    let initial = thermal_initial_state(trap, &crystal.eq, &crystal.drumhead, req.init, &sampler, &mut rng)?;
    let samples = req.integrator.n_samples();
    let want_z = req.axial_psd || req.odf.is_some();
    let mut z = if want_z { vec![Vec::with_capacity(samples); n] } else { Vec::new() };
    let mut xy = if req.inplane_psd { vec![Vec::with_capacity(samples); 2 * n] } else { Vec::new() };
    let l = trap.units.length;
    let summary = integrate_with(trap, &initial, req.integrator, |_, _, p, _| {
        if want_z {
            for (s, r) in z.iter_mut().zip(p) {
                s.push(r.z * l);
            }
        }
        if req.inplane_psd {
            for (j, r) in p.iter().enumerate() {
                xy[j].push(r.x * l);
                xy[n + j].push(r.y * l);
            }
        }
    })?;
    let dt = req.integrator.sample_interval();
    let mut acc = PsdAccumulator::new(samples - 1, dt);
    let axial_psd = if req.axial_psd { Some(acc.psd_of(&z)?) } else { None };
    let inplane_psd = if req.inplane_psd { Some(acc.psd_of(&xy)?) } else { None };
    let odf_phases = match req.odf {
        Some(odf) => Some(odf_phases(&SeriesRecord { dt, series: z }, odf)?),
        None => None,
    };
    Ok(RealizationResult {
        axial_psd,
        inplane_psd,
        odf_phases,
        energy_fluctuation: summary.fractional_energy_fluctuation(),
        thermal_energy_fluctuation: summary.thermal_energy_fluctuation(crystal.eq.energy_si(trap)),
    })
}

/// All realizations of an arm, in index order.
pub(crate) fn run_arm(
    crystal: &Crystal,
    sampler: &SamplerConfig,
    req: &ArmRequest<'_>,
    seed: u64,
    realizations: usize,
) -> Result<Vec<RealizationResult>> {
    par_map(realizations, |r| run_realization(crystal, sampler, req, seed, r))
}

/// Realization average of one PSD field.
pub(crate) fn average(parts: &[&Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; parts.first().map_or(0, |p| p.len())];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p.iter()) {
            *o += v;
        }
    }
    let r = parts.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= r);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for a in 0..3 {
            for t in 0..50 {
                for i in 0..100 {
                    assert!(seen.insert(stream_index(a, t, i)));
                }
            }
        }
    }

    #[test]
    fn par_map_keeps_order() {
        let v = par_map(100, |i| Ok(i * i)).unwrap();
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}

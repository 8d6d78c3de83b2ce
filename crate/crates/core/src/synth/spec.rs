//! Declarative dataset specifications and their file output.

use super::*;
use crate::error::{Error, Result};
use crate::io::{write_admittance, write_csv, write_json, write_shot_dir, write_trace};
use crate::ringdown::{dissipated_power, effective_temperature, simulate_ringdown, RingdownConfig, ThermalModel, ThermalPoint};
use crate::tls_loss::{
    freq_shift_model, FreqShiftPoint, ParticipationPoint, RadiationLeakParams, RadiationPoint,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// One dataset to synthesise. The variant tag names the target module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case")]
pub enum Target {
    Reflection {
        truth: ResonanceParams,
        background: Background,
        freq_hz: Vec<f64>,
        /// Complex Gaussian sigma per quadrature.
        sigma: f64,
    },
    LossGrid {
        truth: TlsLossParams,
        nbar: Vec<f64>,
        temps_k: Vec<f64>,
        freq_hz: f64,
        /// Fractional noise on `1/Q_i`.
        frac: f64,
    },
    /// Loss points along a power sweep, each at the self-heated
    /// temperature reached by dissipating `nbar` phonons at `q_i_nominal`.
    HeatedLoss {
        truth: TlsLossParams,
        thermal: ThermalModel,
        nbar: Vec<f64>,
        freq_hz: f64,
        q_i_nominal: f64,
        frac: f64,
    },
    FreqShift {
        f0_hz: f64,
        f_delta0_reac: f64,
        temps_k: Vec<f64>,
        noise_hz: f64,
    },
    Participation {
        delta_qz: f64,
        delta_al: f64,
        f_al: Vec<f64>,
        sigma: f64,
    },
    Radiation {
        truth: RadiationLeakParams,
        n_mirr: Vec<u32>,
        frac: f64,
    },
    Thermal {
        truth: ThermalModel,
        p_in_w: Vec<f64>,
        sigma_k: f64,
    },
    Ringdown {
        config: RingdownConfig,
    },
    Admittance {
        branches: Vec<BvdCircuit>,
        c0_f: f64,
        freq_hz: Vec<f64>,
        rel_noise: f64,
    },
    NoiseSweep {
        gain_db: f64,
        n_sys: f64,
        temps_k: Vec<f64>,
        freq_hz: Vec<f64>,
        rbw_hz: f64,
        frac: f64,
    },
}

impl Target {
    pub fn tag(&self) -> &'static str {
        match self {
            Target::Reflection { .. } => "reflection",
            Target::LossGrid { .. } => "loss-grid",
            Target::HeatedLoss { .. } => "heated-loss",
            Target::FreqShift { .. } => "freq-shift",
            Target::Participation { .. } => "participation",
            Target::Radiation { .. } => "radiation",
            Target::Thermal { .. } => "thermal",
            Target::Ringdown { .. } => "ringdown",
            Target::Admittance { .. } => "admittance",
            Target::NoiseSweep { .. } => "noise-sweep",
        }
    }

    fn noise(&self) -> f64 {
        match self {
            Target::Reflection { sigma, .. } => *sigma,
            Target::LossGrid { frac, .. } | Target::HeatedLoss { frac, .. } | Target::Radiation { frac, .. } | Target::NoiseSweep { frac, .. } => *frac,
            Target::FreqShift { noise_hz, .. } => *noise_hz,
            Target::Participation { sigma, .. } => *sigma,
            Target::Thermal { sigma_k, .. } => *sigma_k,
            Target::Ringdown { config } => config.noise,
            Target::Admittance { rel_noise, .. } => *rel_noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub targets: Vec<Target>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for t in &self.targets {
            let n = t.noise();
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::InvalidInput(format!("{} noise must be non-negative", t.tag())));
            }
        }
        Ok(())
    }
}

/// Generated data held in memory.
#[derive(Clone, Debug)]
pub enum Dataset {
    Reflection(ComplexTrace),
    LossGrid(LossDataset),
    FreqShift(Vec<FreqShiftPoint>),
    Participation(Vec<ParticipationPoint>),
    Radiation(Vec<RadiationPoint>),
    Thermal(Vec<ThermalPoint>),
    Ringdown { shots: Vec<crate::ringdown::RingdownShot>, t_on: f64 },
    Admittance { freq_hz: Vec<f64>, y: Vec<Complex64> },
    NoiseSweep(NoiseSweep),
}

/// Seed of the `index`-th target under master seed `seed`.
fn sub_seed(seed: u64, index: usize) -> u64 {
    seed ^ ((index as u64) << 40)
}

/// Forward-evaluate one target with seeded noise.
pub fn generate_target(t: &Target, seed: u64) -> Result<Dataset> {
    Ok(match t {
        Target::Reflection { truth, background, freq_hz, sigma } => {
            truth.validate()?;
            Dataset::Reflection(reflection_trace(truth, background, freq_hz, *sigma, seed))
        }
        Target::LossGrid { truth, nbar, temps_k, freq_hz, frac } => {
            Dataset::LossGrid(loss_grid(truth, nbar, temps_k, *freq_hz, *frac, seed))
        }
        Target::HeatedLoss { truth, thermal, nbar, freq_hz, q_i_nominal, frac } => {
            thermal.validate()?;
            let mut r = rng(seed, 8);
            let omega = 2.0 * PI * freq_hz;
            let points = nbar
                .iter()
                .map(|&n| {
                    let t = effective_temperature(thermal, dissipated_power(n, omega, *q_i_nominal));
                    let inv = truth.q_inv(n, t, *freq_hz);
                    let q = 1.0 / (inv * (1.0 + frac * normal(&mut r)));
                    LossPoint { nbar: n, temp_k: t, q_i: q, q_i_sigma: frac * inv * q * q, freq_hz: *freq_hz }
                })
                .collect();
            Dataset::LossGrid(LossDataset { points })
        }
        Target::FreqShift { f0_hz, f_delta0_reac, temps_k, noise_hz } => {
            let mut r = rng(seed, 4);
            Dataset::FreqShift(
                temps_k
                    .iter()
                    .map(|&t| FreqShiftPoint {
                        temp_k: t,
                        f_r_hz: f0_hz * (1.0 + freq_shift_model(*f_delta0_reac, *f0_hz, t)) + noise_hz * normal(&mut r),
                    })
                    .collect(),
            )
        }
        Target::Participation { delta_qz, delta_al, f_al, sigma } => {
            Dataset::Participation(participation_line(*delta_qz, *delta_al, f_al, *sigma, seed))
        }
        Target::Radiation { truth, n_mirr, frac } => {
            let mut r = rng(seed, 5);
            Dataset::Radiation(
                n_mirr
                    .iter()
                    .map(|&n| {
                        let inv = truth.q_inv(n as f64);
                        let q = 1.0 / (inv * (1.0 + frac * normal(&mut r)));
                        RadiationPoint { n_mirr: n, q_i: q, q_i_sigma: (*frac > 0.0).then(|| frac * q) }
                    })
                    .collect(),
            )
        }
        Target::Thermal { truth, p_in_w, sigma_k } => {
            truth.validate()?;
            let mut r = rng(seed, 6);
            Dataset::Thermal(
                p_in_w
                    .iter()
                    .map(|&p| ThermalPoint {
                        p_in: p,
                        t_eff: effective_temperature(truth, p) + sigma_k * normal(&mut r),
                        sigma: (*sigma_k > 0.0).then_some(*sigma_k),
                    })
                    .collect(),
            )
        }
        Target::Ringdown { config } => {
            let cfg = RingdownConfig { seed, ..*config };
            Dataset::Ringdown { shots: simulate_ringdown(&cfg)?, t_on: cfg.t_on }
        }
        Target::Admittance { branches, c0_f, freq_hz, rel_noise } => Dataset::Admittance {
            freq_hz: freq_hz.clone(),
            y: admittance_spectrum(branches, *c0_f, freq_hz, *rel_noise, seed),
        },
        Target::NoiseSweep { gain_db, n_sys, temps_k, freq_hz, rbw_hz, frac } => {
            let s = noise_sweep(*gain_db, *n_sys, temps_k, freq_hz, *rbw_hz, *frac, seed);
            s.validate()?;
            Dataset::NoiseSweep(s)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub spec: SynthSpec,
    /// Ground truth per output file.
    pub truth: Vec<TruthEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub file: String,
    pub target: String,
    pub truth: serde_json::Value,
}

fn truth_of(t: &Target) -> serde_json::Value {
    use serde_json::json;
    match t {
        Target::Reflection { truth, background, .. } => json!({ "resonance": truth, "background": background }),
        Target::LossGrid { truth, .. } => json!(truth),
        Target::HeatedLoss { truth, thermal, .. } => json!({ "loss": truth, "thermal": thermal }),
        Target::FreqShift { f0_hz, f_delta0_reac, .. } => json!({ "f0_hz": f0_hz, "f_delta0_reac": f_delta0_reac }),
        Target::Participation { delta_qz, delta_al, .. } => json!({ "delta_qz": delta_qz, "delta_al": delta_al }),
        Target::Radiation { truth, .. } => json!({
            "leak": truth.leak, "beta": truth.beta, "q_tls": truth.q_tls, "q_rad_7": truth.q_rad(7.0)
        }),
        Target::Thermal { truth, .. } => json!({
            "gamma_exp": truth.gamma_exp, "g_th_t0": truth.g_th_t0, "t0": truth.t0, "n_channels": truth.n_channels()
        }),
        Target::Ringdown { config } => json!(config),
        Target::Admittance { branches, c0_f, .. } => json!({ "branches": branches, "c0_f": c0_f }),
        Target::NoiseSweep { gain_db, n_sys, rbw_hz, .. } => json!({ "gain_db": gain_db, "n_sys": n_sys, "rbw_hz": rbw_hz }),
    }
}

/// File stem for the `index`-th target, numbered when a tag repeats.
fn file_name(targets: &[Target], index: usize) -> String {
    let tag = targets[index].tag();
    let same = targets.iter().filter(|t| t.tag() == tag).count();
    let stem = tag.replace('-', "_");
    let nth = targets[..index].iter().filter(|t| t.tag() == tag).count();
    let stem = if same > 1 { format!("{stem}_{nth:02}") } else { stem };
    match targets[index] {
        Target::Ringdown { .. } => stem,
        _ => format!("{stem}.csv"),
    }
}

/// Write `dataset` to `path` in its module-native format.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    match dataset {
        Dataset::Reflection(t) => write_trace(path, t),
        Dataset::LossGrid(d) => write_csv(path, &d.points),
        Dataset::FreqShift(p) => write_csv(path, p),
        Dataset::Participation(p) => write_csv(path, p),
        Dataset::Radiation(p) => write_csv(path, p),
        Dataset::Thermal(p) => write_csv(path, p),
        Dataset::Ringdown { shots, t_on } => write_shot_dir(path, shots, *t_on).map(|_| ()),
        Dataset::Admittance { freq_hz, y } => write_admittance(path, freq_hz, y),
        Dataset::NoiseSweep(s) => write_csv(path, &s.records()),
    }
}

/// Generate every target into `dir` and write `manifest.json` next to
/// the data.
pub fn generate(spec: &SynthSpec, dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::File { path: dir.display().to_string(), message: e.to_string() })?;
    let mut truth = Vec::with_capacity(spec.targets.len());
    for (k, t) in spec.targets.iter().enumerate() {
        let data = generate_target(t, sub_seed(spec.seed, k))?;
        let name = file_name(&spec.targets, k);
        write_dataset(&dir.join(&name), &data)?;
        truth.push(TruthEntry { file: name, target: t.tag().to_string(), truth: truth_of(t) });
    }
    let m = Manifest { schema_version: SCHEMA_VERSION, seed: spec.seed, spec: spec.clone(), truth };
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(m)
}

/// Generate every target in memory, in order.
pub fn generate_datasets(spec: &SynthSpec) -> Result<Vec<Dataset>> {
    spec.validate()?;
    spec.targets.iter().enumerate().map(|(k, t)| generate_target(t, sub_seed(spec.seed, k))).collect()
}

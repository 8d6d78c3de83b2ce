//! Named presets reproducing the reference datasets.

use super::*;
use crate::consts::K_B;
use crate::resonance::homophasal_sweep;
use crate::ringdown::{RingdownConfig, ThermalModel};
use crate::tls_loss::RadiationLeakParams;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub targets: Vec<Target>,
}

impl Preset {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        SynthSpec { targets: self.targets.clone(), seed }
    }
}

/// Temperatures of the loss grid, 25 mK to 1 K.
pub const TABLE1_TEMPS: [f64; 10] = [0.025, 0.05, 0.1, 0.15, 0.2, 0.25, 0.35, 0.5, 0.7, 1.0];

/// Participation ratios of the twelve resonances in the frequency-shift set.
pub const FIG3_F_AL: [f64; 12] = [0.002, 0.003, 0.004, 0.005, 0.006, 0.008, 0.010, 0.012, 0.014, 0.017, 0.025, 0.053];
pub const DELTA_QZ: f64 = 4.5e-6;
pub const DELTA_AL: f64 = 4.9e-4;

/// Phonon numbers of the 21-step power sweep.
pub fn table1_nbar() -> Vec<f64> {
    logspace(1.0, 10f64.powf(2.1), 21)
}

/// Per-point scatter on `F delta0` for which the weighted line through
/// [`FIG3_F_AL`] has a one-sigma intercept of `sigma_qz`.
pub fn participation_sigma(f_al: &[f64], sigma_qz: f64) -> f64 {
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    for &x in f_al {
        a11 += (1.0 - x) * (1.0 - x);
        a12 += x * (1.0 - x);
        a22 += x * x;
    }
    sigma_qz / (a22 / (a11 * a22 - a12 * a12)).sqrt()
}

/// Ringdown device: `T1 = 2.7 ms` at 502.1 MHz with `Q_e = 1.19e7`.
pub fn ringdown_device(delta: f64, noise: f64, shots: usize) -> RingdownConfig {
    let f0 = 502.1e6;
    RingdownConfig {
        kappa: 1.0 / 2.7e-3,
        kappa_e: 2.0 * PI * f0 / 1.19e7,
        delta,
        a_p: 1.0,
        t_on: 0.15,
        t_total: 0.18,
        sample_rate: 20e3,
        noise,
        shots,
        seed: 0,
        phase_jitter: 0.0,
    }
}

fn table1_grid() -> Preset {
    Preset {
        name: "table1-grid",
        description: "21 powers x 10 temperatures from the joint loss fit values, 2% noise on 1/Q_i",
        targets: vec![Target::LossGrid {
            truth: TlsLossParams::table1(),
            nbar: table1_nbar(),
            temps_k: TABLE1_TEMPS.to_vec(),
            freq_hz: 500e6,
            frac: 0.02,
        }],
    }
}

fn fig1g_s11() -> Preset {
    let truth = ResonanceParams { f_r: 499.5e6, q_i: 161_000.0, q_e_mag: 1.2e7, phi: 0.0 };
    let lw = truth.linewidth_hz();
    Preset {
        name: "fig1g-s11",
        description: "single-phonon reflection trace, 201 homophasal points over 5 linewidths",
        targets: vec![Target::Reflection {
            truth,
            background: Background::UNITY,
            freq_hz: homophasal_sweep(truth.f_r, lw, 5.0 * lw, 201).expect("valid sweep"),
            sigma: 2e-3,
        }],
    }
}

fn fig3_freqshift() -> Preset {
    let temps = linspace(0.025, 1.0, 25);
    let freqs = linspace(482e6, 518e6, FIG3_F_AL.len());
    let mut targets: Vec<Target> = FIG3_F_AL
        .iter()
        .zip(&freqs)
        .map(|(&x, &f0)| Target::FreqShift {
            f0_hz: f0,
            f_delta0_reac: DELTA_QZ + x * (DELTA_AL - DELTA_QZ),
            temps_k: temps.clone(),
            noise_hz: 5.0,
        })
        .collect();
    targets.push(Target::Participation {
        delta_qz: DELTA_QZ,
        delta_al: DELTA_AL,
        f_al: FIG3_F_AL.to_vec(),
        sigma: participation_sigma(&FIG3_F_AL, 1.6e-6),
    });
    Preset {
        name: "fig3-freqshift",
        description: "12 frequency-shift series and the participation line they imply",
        targets,
    }
}

fn app_b_radiation() -> Preset {
    Preset {
        name: "appB-radiation",
        description: "Q_i versus mirror periods N = 2..10",
        targets: vec![Target::Radiation { truth: RadiationLeakParams::reference(), n_mirr: (2..=10).collect(), frac: 0.02 }],
    }
}

fn fig4_ringdown() -> Preset {
    let model = ThermalModel::from_channels(2.6, 1.6, 0.025);
    let q_i = 2.9e7;
    let omega = 2.0 * PI * 502.1e6;
    let nbar = logspace(1e6, 4e8, 12);
    let p_in: Vec<f64> = nbar.iter().map(|&n| crate::ringdown::dissipated_power(n, omega, q_i)).collect();
    Preset {
        name: "fig4-ringdown",
        description: "self-heating power sweep: T_eff(P), ringdown loss at T_eff, and one shot set",
        targets: vec![
            Target::Thermal { truth: model, p_in_w: p_in, sigma_k: 1e-3 },
            Target::HeatedLoss {
                truth: TlsLossParams { q_bkg: 6.14e7, ..TlsLossParams::table1() },
                thermal: model,
                nbar,
                freq_hz: 502.1e6,
                q_i_nominal: q_i,
                frac: 0.02,
            },
            Target::Ringdown { config: ringdown_device(0.0, 0.05, 20) },
        ],
    }
}

fn app_f_gaincal() -> Preset {
    let f0 = 500e6;
    Preset {
        name: "appF-gaincal",
        description: "Y-factor sweep, 0.5 to 6 K load, 57.4 dB gain behind a 1.1 K amplifier",
        targets: vec![Target::NoiseSweep {
            gain_db: 57.4,
            n_sys: K_B * 1.1 / (crate::consts::H * f0),
            temps_k: (0..23).map(|k| 0.5 + 0.25 * k as f64).collect(),
            freq_hz: linspace(400e6, 600e6, 21),
            rbw_hz: 1e6,
            frac: 1e-3,
        }],
    }
}

fn seventeen_resonance_admittance() -> Preset {
    let (branches, c0) = seventeen_branches();
    let freq_hz = admittance_grid(&branches, 81, 5.0, 200e6, 800e6, 200);
    Preset {
        name: "17-resonance-admittance",
        description: "one-port admittance of 17 BVD branches at 60 dB SNR",
        targets: vec![Target::Admittance { branches, c0_f: c0, freq_hz, rel_noise: 1e-3 }],
    }
}

pub fn all_presets() -> Vec<Preset> {
    vec![
        table1_grid(),
        fig1g_s11(),
        fig3_freqshift(),
        app_b_radiation(),
        fig4_ringdown(),
        app_f_gaincal(),
        seventeen_resonance_admittance(),
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    all_presets().into_iter().find(|p| p.name == name)
}

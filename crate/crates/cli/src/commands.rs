use crate::output::{fit_summary, pretty, write_file, Input, Report, Table};
use crate::{Cli, CliError, Command, Format, Sign};
use phonoq::calib::{gain_from_noise_sweep, NoiseForm, NoiseSweep, SweepRecord};
use phonoq::circuit_id::{circuit_to_resonance, eval_admittance, to_equivalent_circuit, vector_fit, VectorFitOptions};
use phonoq::fit::Estimate;
use phonoq::io::{read_admittance, read_csv, read_json, read_shot_dir, read_trace};
use phonoq::resonance::{fit_reflection, homophasal_sweep, phonon_number, ReflectionFitOptions};
use phonoq::ringdown::{
    analyze_ringdown, average_shots, effective_temperature, fit_decay, fit_thermal_model, Averaging, DetuningSign,
    RingdownConfig, RingdownOptions, ThermalModel, ThermalPoint,
};
use phonoq::synth::{generate, presets, SynthSpec};
use phonoq::tls_loss::*;
use phonoq::tls_micro::{variance_mc, VarianceMcConfig};
use phonoq::units::dbm_to_watt;
use rayon::prelude::*;
use serde_json::{json, to_value, Value};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

type Res<T> = Result<T, CliError>;

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn json_of<T: serde::Serialize>(v: &T) -> Value {
    to_value(v).expect("result types serialise")
}

fn emit(cli: &Cli, name: &str, report: &Report, out: Option<&Path>) -> Res<()> {
    let env = report.envelope(name, cli.seed);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| input_error(dir, e))?;
        write_file(&dir.join(format!("{name}.json")), &pretty(&env))?;
        if let Some(t) = &report.plot {
            write_file(&dir.join(format!("{name}.csv")), &t.to_csv())?;
        }
    }
    if !cli.quiet {
        match (&cli.format, &report.plot) {
            (Format::Csv, Some(t)) => print!("{}", t.to_csv()),
            _ => print!("{}", pretty(&env)),
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Res<()> {
    match &cli.command {
        Command::FitS11 { input, no_background, power_dbm, atten_db, out } => {
            let r = fit_s11(input, *no_background, power_dbm.map(|p| p - atten_db))?;
            emit(cli, "fit-s11", &r, out.out.as_deref())
        }
        Command::FitTls { input, t0, fix, initial, fit_background, out } => {
            let r = fit_tls(input, *t0, fix, initial.as_deref(), *fit_background)?;
            emit(cli, "fit-tls", &r, out.out.as_deref())
        }
        Command::FitFreqshift { inputs, f_probe, out } => {
            emit(cli, "fit-freqshift", &fit_freqshift(inputs, *f_probe)?, out.out.as_deref())
        }
        Command::FitParticipation { input, out } => {
            emit(cli, "fit-participation", &fit_participation_cmd(input)?, out.out.as_deref())
        }
        Command::FitRadiation { input, extrapolate, out } => {
            emit(cli, "fit-radiation", &fit_radiation_cmd(input, extrapolate)?, out.out.as_deref())
        }
        Command::FitThermal { input, t0, out } => emit(cli, "fit-thermal", &fit_thermal(input, *t0)?, out.out.as_deref()),
        Command::Ringdown { dir, f0, qe, t_on, skip_kappa, sign, out } => {
            let r = ringdown(dir, *f0, *qe, *t_on, *skip_kappa, *sign)?;
            emit(cli, "ringdown", &r, out.out.as_deref())
        }
        Command::Vfit { input, pairs, max_iter, z0, out } => {
            let (r, converged) = vfit(input, *pairs, *max_iter, *z0)?;
            emit(cli, "vfit", &r, out.out.as_deref())?;
            if converged {
                Ok(())
            } else {
                Err(CliError::NotConverged("vector fit did not settle its poles".into()))
            }
        }
        Command::Calib { input, rbw, classical, s21, out } => {
            let form = if *classical { NoiseForm::Classical } else { NoiseForm::Full };
            emit(cli, "calib", &calib(input, *rbw, form, s21.as_deref())?, out.out.as_deref())
        }
        Command::Synth { preset, spec, list, out } => synth(cli, preset.as_deref(), spec.as_deref(), *list, out.as_deref()),
        Command::McVariance { ratio, gamma2, n_tls, trials, bootstrap, out } => {
            let r = mc_variance(ratio, *gamma2, *n_tls, *trials, *bootstrap, cli.seed)?;
            emit(cli, "mc-variance", &r, out.out.as_deref())
        }
        Command::SweepPlan { fr, kappa, span, n, out } => {
            emit(cli, "sweep-plan", &sweep_plan(*fr, *kappa, *span, *n)?, out.out.as_deref())
        }
        Command::Validate { config } => validate(cli, config),
    }
}

fn fit_s11(path: &Path, no_background: bool, device_dbm: Option<f64>) -> Res<Report> {
    let input = Input::file(path)?;
    let trace = read_trace(path)?;
    let fit = fit_reflection(&trace, ReflectionFitOptions { fit_background: !no_background })?;
    let mut result = json!({
        "estimates": json_of(&fit.estimates),
        "background": json_of(&fit.background),
        "linewidth_hz": fit.params.linewidth_hz(),
        "fit": fit_summary(&fit.fit),
    });
    if let Some(dbm) = device_dbm {
        result["device_power_w"] = json!(dbm_to_watt(dbm));
        result["nbar"] = json!(phonon_number(&fit.params, dbm_to_watt(dbm), 0.0));
    }
    let model = fit.model(&trace.freq_hz);
    let mut plot = Table::new(&["freq_hz", "re", "im", "model_re", "model_im"]);
    for ((f, z), m) in trace.freq_hz.iter().zip(&trace.s).zip(&model) {
        plot.push(vec![*f, z.re, z.im, m.re, m.im]);
    }
    Ok(Report { inputs: vec![input], result, plot: Some(plot) })
}

fn fit_tls(path: &Path, t0: f64, fix: &[String], initial: Option<&Path>, fit_background: bool) -> Res<Report> {
    let mut inputs = vec![Input::file(path)?];
    let points: Vec<LossPoint> = read_csv(path)?;
    let initial = match initial {
        Some(p) => {
            inputs.push(Input::file(p)?);
            Some(read_json::<TlsLossParams>(p)?)
        }
        None => None,
    };
    let opts = JointFitOptions { fixed: fix.to_vec(), fit_background, initial, t0: Some(t0) };
    let ds = LossDataset { points };
    let fit = fit_tls_loss(&ds, &opts)?;
    let result = json!({
        "params": json_of(&fit.params),
        "estimates": json_of(&fit.estimates),
        "unidentifiable": fit.unidentifiable,
        "fit": fit_summary(&fit.fit),
    });
    let mut plot = Table::new(&["nbar", "temp_k", "q_i", "q_i_sigma", "model_q_i"]);
    for p in &ds.points {
        plot.push(vec![p.nbar, p.temp_k, p.q_i, p.q_i_sigma, 1.0 / fit.params.q_inv(p.nbar, p.temp_k, p.freq_hz)]);
    }
    Ok(Report { inputs, result, plot: Some(plot) })
}

fn fit_freqshift(paths: &[PathBuf], f_probe: Option<f64>) -> Res<Report> {
    let runs: Vec<Res<(Input, Vec<FreqShiftPoint>, FreqShiftFit)>> = paths
        .par_iter()
        .map(|p| {
            let input = Input::file(p)?;
            let pts: Vec<FreqShiftPoint> = read_csv(p)?;
            let fit = fit_freq_shift(&pts, f_probe).map_err(|e| match CliError::from(e) {
                CliError::Input(m) => input_error(p, m),
                CliError::NotConverged(m) => CliError::NotConverged(format!("{}: {m}", p.display())),
            })?;
            Ok((input, pts, fit))
        })
        .collect();
    let mut inputs = Vec::new();
    let mut series = Vec::new();
    let mut plot = Table::new(&["series", "temp_k", "f_r_hz", "model_f_r_hz"]);
    for (k, r) in runs.into_iter().enumerate() {
        let (input, pts, fit) = r?;
        for p in &pts {
            plot.push(vec![k as f64, p.temp_k, p.f_r_hz, fit.model(p.temp_k)]);
        }
        series.push(json!({
            "path": input.label,
            "f0_hz": json_of(&fit.f0_hz),
            "f_delta0_reac": json_of(&fit.f_delta0_reac),
            "f_probe_hz": fit.f_probe_hz,
            "monotonic_violation": fit.monotonic_violation,
            "fit": fit_summary(&fit.fit),
        }));
        inputs.push(input);
    }
    Ok(Report { inputs, result: json!({ "series": series }), plot: Some(plot) })
}

fn fit_participation_cmd(path: &Path) -> Res<Report> {
    let input = Input::file(path)?;
    let pts: Vec<ParticipationPoint> = read_csv(path)?;
    let fit = fit_participation(&pts)?;
    let mut plot = Table::new(&["f_al", "f_delta0", "sigma", "model_f_delta0"]);
    for p in &pts {
        plot.push(vec![p.f_al, p.f_delta0, p.sigma, fit.model(p.f_al)]);
    }
    Ok(Report { inputs: vec![input], result: json_of(&fit), plot: Some(plot) })
}

fn fit_radiation_cmd(path: &Path, at: &[f64]) -> Res<Report> {
    let input = Input::file(path)?;
    let pts: Vec<RadiationPoint> = read_csv(path)?;
    let fit = fit_radiation(&pts)?;
    let l = fit.leak;
    let q_rad: Vec<Value> = at.iter().map(|&n| json!({ "n_mirr": n, "q_rad": json_of(&fit.q_rad(n)) })).collect();
    let result = json!({
        "leak": json_of(&l),
        "q_mirr0": json_of(&Estimate::new(1.0 / l.value, l.sigma / (l.value * l.value))),
        "beta": json_of(&fit.beta),
        "q_tls": json_of(&fit.q_tls),
        "q_rad": q_rad,
        "fit": fit_summary(&fit.fit),
    });
    let mut plot = Table::new(&["n_mirr", "q_i", "model_q_i"]);
    for p in &pts {
        plot.push(vec![p.n_mirr as f64, p.q_i, 1.0 / fit.params.q_inv(p.n_mirr as f64)]);
    }
    Ok(Report { inputs: vec![input], result, plot: Some(plot) })
}

fn fit_thermal(path: &Path, t0: f64) -> Res<Report> {
    let input = Input::file(path)?;
    let pts: Vec<ThermalPoint> = read_csv(path)?;
    let fit = fit_thermal_model(&pts, t0)?;
    let result = json!({
        "gamma_exp": json_of(&fit.gamma_exp),
        "g_th_t0": json_of(&fit.g_th_t0),
        "n_channels": json_of(&fit.n_channels),
        "t0": t0,
        "fit": fit_summary(&fit.fit),
    });
    let mut plot = Table::new(&["p_in", "t_eff", "model_t_eff"]);
    for p in &pts {
        plot.push(vec![p.p_in, p.t_eff, effective_temperature(&fit.model, p.p_in)]);
    }
    Ok(Report { inputs: vec![input], result, plot: Some(plot) })
}

fn ringdown(dir: &Path, f0: f64, qe: f64, t_on: Option<f64>, skip: f64, sign: Sign) -> Res<Report> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!("{}: no such directory", dir.display())));
    }
    let (manifest, shots) = read_shot_dir(dir)?;
    let mut files = vec![dir.join("manifest.json")];
    files.extend(manifest.files.iter().map(|f| dir.join(f)));
    let input = Input::files(dir, &files)?;
    let t_on = t_on.unwrap_or(manifest.t_on);
    let opts = RingdownOptions {
        skip_kappa: skip,
        sign: if sign == Sign::Plus { DetuningSign::Plus } else { DetuningSign::Minus },
        ..RingdownOptions::new(f0, qe, t_on)
    };
    let r = analyze_ringdown(&shots, &opts)?;
    let mut result = json_of(&r);
    result["shots"] = json!(shots.len());
    result["q_i_times_f_hz"] = json!(r.q_i_t1.value * f0);

    let time = shots[0].time();
    let e_inc = average_shots(&shots, Averaging::Incoherent)?;
    let e_coh = average_shots(&shots, Averaging::Coherent)?;
    let t_end = *time.last().unwrap_or(&t_on);
    let t_a = (t_on + skip * r.t1.value).min(t_on + 0.5 * (t_end - t_on));
    let decay = fit_decay(&time, &e_inc, (t_a, t_end))?;
    let mut plot = Table::new(&["time_s", "energy_incoherent", "energy_coherent", "model_incoherent"]);
    for (k, &t) in time.iter().enumerate() {
        let m = if t >= t_a {
            decay.amplitude.value * (-(t - t_a) / decay.tau.value).exp() + decay.offset.value
        } else {
            f64::NAN
        };
        plot.push(vec![t, e_inc[k], e_coh[k], m]);
    }
    Ok(Report { inputs: vec![input], result, plot: Some(plot) })
}

fn vfit(path: &Path, pairs: usize, max_iter: usize, z0: f64) -> Res<(Report, bool)> {
    let input = Input::file(path)?;
    let (f, y) = read_admittance(path)?;
    let fit = vector_fit(&f, &y, &VectorFitOptions { n_pairs: pairs, max_iter, ..Default::default() })?;
    let e = fit.model.e;
    let pairs: Vec<Value> = fit
        .model
        .pairs
        .iter()
        .map(|p| {
            let circuit = to_equivalent_circuit(p, e).ok();
            let resonance = circuit.and_then(|c| circuit_to_resonance(&c, z0).ok());
            json!({
                "freq_hz": p.freq_hz(),
                "pole": [p.pole.re, p.pole.im],
                "residue": [p.residue.re, p.residue.im],
                "stable": p.is_stable(),
                "circuit": circuit.map(|c| json_of(&c)),
                "q_i": resonance.map(|r| r.q_i),
                "q_e": resonance.map(|r| r.q_e_mag),
            })
        })
        .collect();
    let result = json!({
        "pairs": pairs,
        "c0_f": e,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "unstable": fit.unstable,
        "max_rel_error": fit.max_rel_error,
        "rms_rel_error": fit.rms_rel_error,
    });
    let mut plot = Table::new(&["freq_hz", "re", "im", "model_re", "model_im"]);
    for (fk, yk) in f.iter().zip(&y) {
        let m = eval_admittance(&fit.model, 2.0 * PI * fk)?;
        plot.push(vec![*fk, yk.re, yk.im, m.re, m.im]);
    }
    Ok((Report { inputs: vec![input], result, plot: Some(plot) }, fit.converged))
}

fn calib(path: &Path, rbw: f64, form: NoiseForm, s21: Option<&Path>) -> Res<Report> {
    let mut inputs = vec![Input::file(path)?];
    let recs: Vec<SweepRecord> = read_csv(path)?;
    let sweep = NoiseSweep::from_records(&recs, rbw)?;
    let mut gain = gain_from_noise_sweep(&sweep, form)?;
    if let Some(p) = s21 {
        inputs.push(Input::file(p)?);
        let rows: Vec<(f64, f64)> = read_csv(p)?;
        let (sf, sd): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        gain = gain.with_transmission(&sf, &sd)?;
    }
    let mut plot = Table::new(&["freq_hz", "temp_k", "p_load_w", "p_out_w", "model_p_out_w"]);
    for (j, &f) in sweep.freqs_hz.iter().enumerate() {
        let floor = phonoq::consts::H * f * rbw * gain.n_sys[j];
        for (i, &t) in sweep.temps_k.iter().enumerate() {
            let pr = phonoq::calib::johnson_noise_power(t, rbw, f, form);
            plot.push(vec![f, t, pr, sweep.p_out_w[i][j], gain.gain[j] * (floor + pr)]);
        }
    }
    let mut result = json_of(&gain);
    result["form"] = json_of(&form);
    result["rbw_hz"] = json!(rbw);
    Ok(Report { inputs, result, plot: Some(plot) })
}

fn synth(cli: &Cli, preset: Option<&str>, spec: Option<&Path>, list: bool, out: Option<&Path>) -> Res<()> {
    if list {
        if !cli.quiet {
            for p in presets::all_presets() {
                println!("{:<26} {}", p.name, p.description);
            }
        }
        return Ok(());
    }
    let (inputs, spec) = match (preset, spec) {
        (Some(name), _) => {
            let p = presets::preset(name).ok_or_else(|| {
                let names: Vec<&str> = presets::all_presets().iter().map(|p| p.name).collect();
                CliError::Input(format!("unknown preset {name}; known: {}", names.join(", ")))
            })?;
            (vec![], p.spec(cli.seed))
        }
        (None, Some(path)) => {
            let input = Input::file(path)?;
            let s: SynthSpec = read_json(path)?;
            (vec![input], SynthSpec { seed: cli.seed, ..s })
        }
        (None, None) => return Err(CliError::Input("give --preset or --spec".into())),
    };
    let dir = out.ok_or_else(|| CliError::Input("--out is required".into()))?;
    let manifest = generate(&spec, dir)?;
    let report = Report { inputs, result: json!({ "dir": dir.display().to_string(), "manifest": json_of(&manifest) }), plot: None };
    if !cli.quiet {
        print!("{}", pretty(&report.envelope("synth", cli.seed)));
    }
    Ok(())
}

fn mc_variance(ratios: &[f64], gamma2: f64, n_tls: usize, trials: usize, bootstrap: usize, seed: u64) -> Res<Report> {
    let mut runs = Vec::new();
    let mut plot = Table::new(&["omega_max_over_omega_r", "var_ratio", "ci_low", "ci_high", "predicted"]);
    for &r in ratios {
        let cfg = VarianceMcConfig { omega_r: 1.0, omega_max: r, gamma2, n_tls, trials, bootstrap, seed };
        let res = variance_mc(&cfg)?;
        plot.push(vec![r, res.ratio, res.ci_low, res.ci_high, res.predicted]);
        runs.push(json!({ "omega_max_over_omega_r": r, "result": json_of(&res) }));
    }
    Ok(Report { inputs: vec![], result: json!({ "runs": runs }), plot: Some(plot) })
}

fn sweep_plan(fr: f64, lw: f64, span: f64, n: usize) -> Res<Report> {
    let f = homophasal_sweep(fr, lw, span, n)?;
    let mut plot = Table::new(&["index", "freq_hz", "phase_rad"]);
    for (k, &x) in f.iter().enumerate() {
        plot.push(vec![k as f64, x, 2.0 * (2.0 * (x - fr) / lw).atan()]);
    }
    let result = json!({
        "n": f.len(),
        "w": span / lw,
        "f_min_hz": f[0],
        "f_max_hz": f[f.len() - 1],
        "freq_hz": f,
    });
    Ok(Report { inputs: vec![], result, plot: Some(plot) })
}

struct Diagnostics {
    kind: &'static str,
    violations: Vec<String>,
    warnings: Vec<String>,
}

fn check<T: serde::de::DeserializeOwned>(v: &Value, path: &Path) -> Res<T> {
    serde_json::from_value(v.clone()).map_err(|e| input_error(path, e))
}

fn error_list(r: phonoq::Result<()>) -> Vec<String> {
    r.err().map(|e| vec![e.to_string()]).unwrap_or_default()
}

fn diagnose(v: &Value, path: &Path) -> Res<Diagnostics> {
    let has = |k: &str| v.get(k).is_some();
    let d = if has("targets") {
        let s: SynthSpec = check(v, path)?;
        Diagnostics { kind: "synth-spec", violations: error_list(s.validate()), warnings: vec![] }
    } else if has("f_delta0_diss") {
        let p: TlsLossParams = check(v, path)?;
        Diagnostics { kind: "tls-loss-params", violations: p.violations(), warnings: p.warnings() }
    } else if has("leak") {
        let p: RadiationLeakParams = check(v, path)?;
        let mut bad = vec![];
        for (name, x) in [("leak", p.leak), ("beta", p.beta), ("q_tls", p.q_tls)] {
            if !(x > 0.0 && x.is_finite()) {
                bad.push(format!("{name} must be positive"));
            }
        }
        Diagnostics { kind: "radiation-params", violations: bad, warnings: vec![] }
    } else if has("kappa_e") {
        let c: RingdownConfig = check(v, path)?;
        Diagnostics { kind: "ringdown-config", violations: error_list(c.validate()), warnings: vec![] }
    } else if has("gamma_exp") {
        let m: ThermalModel = check(v, path)?;
        Diagnostics { kind: "thermal-model", violations: error_list(m.validate()), warnings: vec![] }
    } else {
        return Err(input_error(path, "not a recognised parameter or synthesis file"));
    };
    Ok(d)
}

fn validate(cli: &Cli, path: &Path) -> Res<()> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| input_error(path, format!("malformed JSON: {e}")))?;
    let d = diagnose(&v, path)?;
    if !cli.quiet {
        for w in &d.warnings {
            println!("warning: {w}");
        }
        for e in &d.violations {
            println!("violation: {e}");
        }
        if d.violations.is_empty() {
            println!("ok ({})", d.kind);
        }
    }
    if d.violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{}: {}", path.display(), d.violations.join("; "))))
    }
}

//! The named experiments. Each returns its report and the CSV artifacts as
//! text; writing them is left to the caller.

use dnls_core::linearized::{measure_decay, LinearizedOperator, SymplecticProjection};
use dnls_core::resolvent::{
    kernel_truncation_residual, scan_roots, ResolventContext, ScanRegion, DEFAULT_GRID_STEP,
};
use dnls_core::scattering::{stability_experiment, StabilityConfig, StabilityRun};
use dnls_core::solitary::{admissibility_report, nep_residual};
use dnls_core::{Branch, Error, SolitaryWave};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Default spectral samples of `resolvent_check`, all off the continuous
/// spectrum.
pub const DEFAULT_LAMBDAS: [[f64; 2]; 10] = [
    [2.0, 0.0],
    [1.0, 0.5],
    [0.3, 2.0],
    [-1.5, 0.2],
    [0.5, -3.0],
    [3.0, 3.0],
    [-2.0, -1.0],
    [0.4, 6.0],
    [1.2, 4.5],
    [-0.8, -5.5],
];

pub struct RunOutput {
    pub report: Value,
    /// `(file name, contents)`.
    pub csvs: Vec<(String, String)>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = match cfg.experiment {
        ExperimentKind::SolitaryScan => solitary_scan(cfg)?,
        ExperimentKind::SpCertify => sp_certify(cfg)?,
        ExperimentKind::ResolventCheck => resolvent_check(cfg)?,
        ExperimentKind::LinearDecay => linear_decay(cfg)?,
        ExperimentKind::Stability => stability(cfg)?,
        ExperimentKind::Scattering => scattering(cfg)?,
    };
    let obj = out.report.as_object_mut().expect("reports are objects");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("experiment".into(), json!(cfg.experiment.name()));
    Ok(out)
}

fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> dnls_core::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

fn e17(v: f64) -> String {
    format!("{v:.17e}")
}

/// The wave named by the config: by amplitude if `C` is given, by `omega0`
/// otherwise.
fn config_wave(cfg: &ExperimentConfig) -> Result<SolitaryWave> {
    let m = &cfg.model;
    let wave = match cfg.amplitude {
        Some(c) if cfg.branch.is_none() => SolitaryWave::from_amplitude(c, cfg.theta0, m),
        amplitude => {
            let branch = match cfg.branch {
                Some(b) => b,
                None => Branch::for_omega(cfg.omega0)?,
            };
            SolitaryWave::select(cfg.omega0, branch, m, amplitude).map(|w| w.with_theta(cfg.theta0))
        }
    };
    Ok(wave.map_err(|e| e.at_stage("solitary"))?)
}

fn solitary_scan(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let [lo, hi, step] = cfg.omega_range.unwrap_or([0.2, 3.0, 0.1]);
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let mut rows = Vec::new();
    let mut csv = String::from(
        "omega,branch,C,k,a_prime_nonzero,sp_cond1,intdif_ok,dnorm_sign,nep_residual\n",
    );
    let mut max_residual: f64 = 0.0;
    let mut empty = Vec::new();
    for i in 0..count {
        let omega = lo + step * i as f64;
        let branch = match cfg.branch {
            Some(b) => b,
            None => match Branch::for_omega(omega) {
                Ok(b) => b,
                Err(_) => {
                    empty.push(omega);
                    continue;
                }
            },
        };
        let family = match SolitaryWave::family(omega, branch, &cfg.model) {
            Ok(f) => f,
            Err(Error::Domain(_)) => Vec::new(),
            Err(e) => return Err(e.at_stage("solitary").into()),
        };
        if family.is_empty() {
            empty.push(omega);
        }
        for sw in family {
            let adm = admissibility_report(&sw, &cfg.model);
            let residual =
                nep_residual(&sw.profile(sw.default_half_width()), omega, &cfg.model).max_abs();
            max_residual = max_residual.max(residual);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                e17(omega),
                serde_json::to_value(branch)?.as_str().unwrap_or_default(),
                e17(sw.c),
                e17(sw.k),
                adm.a_prime_nonzero,
                adm.sp_cond1,
                adm.intdif_ok.map(|b| b.to_string()).unwrap_or_default(),
                adm.dnorm_sign,
                e17(residual)
            ));
            let mut row = serde_json::to_value(&adm)?;
            row["nep_residual"] = json!(residual);
            rows.push(row);
        }
    }
    Ok(RunOutput {
        report: json!({
            "model": cfg.model,
            "omega_range": [lo, hi, step],
            "rows": rows,
            "max_nep_residual": max_residual,
            "omegas_without_wave": empty,
        }),
        csvs: vec![("solitary_scan.csv".into(), csv)],
    })
}

fn sp_certify(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sw = config_wave(cfg)?;
    let ctx = ResolventContext::from_wave(&sw, &cfg.model).map_err(|e| e.at_stage("resolvent"))?;
    let region = ScanRegion::default_for(&ctx);
    let step = cfg.grid_step.unwrap_or(DEFAULT_GRID_STEP);
    let (report, dump) = scan_roots(&ctx, &region, step, 4).map_err(|e| e.at_stage("scan"))?;
    let mut value = serde_json::to_value(&report)?;
    let obj = value.as_object_mut().expect("object");
    obj.insert("wave".into(), serde_json::to_value(sw)?);
    obj.insert("region".into(), serde_json::to_value(region)?);
    obj.insert("grid_step".into(), json!(step));
    obj.insert(
        "admissibility".into(),
        serde_json::to_value(admissibility_report(&sw, &cfg.model))?,
    );
    Ok(RunOutput {
        report: value,
        csvs: vec![("grid.csv".into(), csv_text(|b| dump.write_csv(b))?)],
    })
}

fn resolvent_check(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sw = config_wave(cfg)?;
    let ctx = ResolventContext::from_wave(&sw, &cfg.model).map_err(|e| e.at_stage("resolvent"))?;
    let lambdas = cfg
        .lambdas
        .clone()
        .unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());
    let n = cfg.half_width;
    let core = 15.min(n.saturating_sub(1));
    let ys: Vec<i64> = [0i64, 1, 4]
        .into_iter()
        .filter(|y| (*y as usize) <= core)
        .collect();
    let mut samples = Vec::new();
    let mut csv = String::from("re,im,residual\n");
    let mut worst: f64 = 0.0;
    for [re, im] in lambdas {
        let r = kernel_truncation_residual(&ctx, Complex64::new(re, im), n, &ys, core)
            .map_err(|e| e.at_stage("resolvent"))?;
        worst = worst.max(r);
        csv.push_str(&format!("{},{},{}\n", e17(re), e17(im), e17(r)));
        samples.push(json!({"re": re, "im": im, "residual": r}));
    }
    Ok(RunOutput {
        report: json!({
            "wave": sw,
            "N": n,
            "core": core,
            "columns": ys,
            "samples": samples,
            "max_residual": worst,
        }),
        csvs: vec![("resolvent_check.csv".into(), csv)],
    })
}

fn linear_decay(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sw = config_wave(cfg)?;
    let n = cfg.half_width;
    let op = LinearizedOperator::build(&sw, &cfg.model, n).map_err(|e| e.at_stage("linearize"))?;
    let proj =
        SymplecticProjection::from_wave(&sw, &cfg.model, n).map_err(|e| e.at_stage("linearize"))?;
    let t_min = cfg.t_min.unwrap_or(10.0);
    let t_step = cfg.t_step.unwrap_or(5.0);
    let count = ((cfg.t_end - t_min) / t_step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| t_min + t_step * i as f64).collect();
    let fit = measure_decay(&op, Some(&proj), cfg.beta, &grid).map_err(|e| e.at_stage("decay"))?;
    Ok(RunOutput {
        report: json!({
            "wave": sw,
            "N": n,
            "beta": cfg.beta,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r2,
            "t": fit.t,
            "norms": fit.norms,
        }),
        csvs: vec![("decay.csv".into(), csv_text(|b| fit.write_csv(b))?)],
    })
}

fn run_pipeline(cfg: &ExperimentConfig) -> Result<StabilityRun> {
    let wave = config_wave(cfg)?;
    let scfg = StabilityConfig {
        model: cfg.model.clone(),
        omega0: wave.omega,
        theta0: cfg.theta0,
        branch: Some(wave.branch),
        amplitude: Some(wave.c),
        d: cfg.d,
        t_end: cfg.t_end,
        dt: cfg.dt,
        beta: cfg.beta,
        half_width: cfg.half_width,
        seed: cfg.seed,
        record_every: cfg.record_every,
        integrator: cfg.integrator,
    };
    Ok(stability_experiment(&scfg)?)
}

fn conservation_csv(run: &StabilityRun) -> String {
    let traj = &run.trajectory;
    let mut csv = String::from("t,norm_drift,energy_drift\n");
    for i in 0..traj.len() {
        csv.push_str(&format!(
            "{},{},{}\n",
            e17(traj.times[i]),
            e17(traj.norm_drift[i]),
            e17(traj.energy_drift[i])
        ));
    }
    csv
}

fn stability(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let run = run_pipeline(cfg)?;
    let mut report = serde_json::to_value(&run.report)?;
    report["majorant"] = run.majorant.summary_json();
    report["slope_r_half"] = json!(run.scattering_half.slope);
    Ok(RunOutput {
        report,
        csvs: vec![
            (
                "majorant.csv".into(),
                csv_text(|b| run.majorant.write_csv(b))?,
            ),
            (
                "majorant_full.csv".into(),
                csv_text(|b| run.majorant.write_full_csv(b))?,
            ),
            (
                "remainder.csv".into(),
                csv_text(|b| run.scattering.write_csv(b))?,
            ),
            ("conservation.csv".into(), conservation_csv(&run)),
        ],
    })
}

fn scattering(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let run = run_pipeline(cfg)?;
    let r = &run.report;
    Ok(RunOutput {
        report: json!({
            "wave": r.wave,
            "d": r.d,
            "T": r.t_end,
            "T_half": run.scattering_half.t_ref,
            "omega_plus": r.omega_plus,
            "gamma_plus": r.gamma_plus,
            "omega_drift": r.omega_drift,
            "phi_plus_norm": r.phi_plus_norm,
            "phi_plus_half_norm": r.phi_plus_half_norm,
            "horizon_defect": r.horizon_defect,
            "slope_r": r.slope_r,
            "slope_r_half": run.scattering_half.slope,
            "unitarity_defect": r.unitarity_defect,
        }),
        csvs: vec![
            (
                "remainder.csv".into(),
                csv_text(|b| run.scattering.write_csv(b))?,
            ),
            (
                "remainder_half.csv".into(),
                csv_text(|b| run.scattering_half.write_csv(b))?,
            ),
            (
                "phi_plus.csv".into(),
                csv_text(|b| run.scattering.phi_plus.write_csv(b))?,
            ),
        ],
    })
}

//! Perturbed solitons, the accompanying soliton `s(t)`, the scattering state
//! `Φ₊` and the end-to-end stability experiment.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, FreePropagator, Integrator, Trajectory, EVOLVE_MARGIN};
use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::lattice::{weighted_norm, Field, NormExponent, WeightSpec};
use crate::linearized::SymplecticProjection;
use crate::model::NonlinearityModel;
use crate::modulation::{majorant, track, MajorantReport, ModulationFit};
use crate::solitary::{Branch, SolitaryWave};

const BUMPS: usize = 3;
/// At most this many snapshots enter the remainder sweep.
const MAX_REMAINDER_SAMPLES: usize = 400;

/// `‖f‖_{l²} + ‖f‖_{l¹_β}`.
pub fn perturbation_norm(f: &Field, beta: f64) -> f64 {
    f.l2_norm()
        + weighted_norm(
            f,
            WeightSpec {
                p: NormExponent::One,
                beta,
            },
        )
}

/// A transversal perturbation of `wave`: a few seeded Gaussian bumps near the
/// origin, projected by `Pᶜ` and scaled to `‖χ₀‖_{l²} + ‖χ₀‖_{l¹_β} = d`.
pub fn transversal_perturbation(
    wave: &SolitaryWave,
    m: &NonlinearityModel,
    half_width: usize,
    d: f64,
    beta: f64,
    seed: u64,
) -> Result<Field> {
    if !(d >= 0.0) || !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need d >= 0 and beta >= 0, got d = {d}, beta = {beta}"
        )));
    }
    if d == 0.0 {
        return Ok(Field::zeros(half_width));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = (half_width as i64 / 4).clamp(1, 8);
    let bumps: Vec<(f64, f64, Complex64)> = (0..BUMPS)
        .map(|_| {
            let center = rng.random_range(-reach..=reach) as f64;
            let width = rng.random_range(1.0..3.0);
            let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (center, width, amp)
        })
        .collect();
    let raw = Field::from_fn(half_width, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| a * (-((x as f64 - c) / w).powi(2)).exp())
            .sum()
    });
    let chi = SymplecticProjection::from_wave(wave, m, half_width)?.project_continuous(&raw)?;
    let size = perturbation_norm(&chi, beta);
    if !(size > 0.0) {
        return Err(Error::Degenerate(
            "the projected perturbation vanishes".into(),
        ));
    }
    Ok(chi.scale(d / size))
}

/// `s(t) = e^{jθ(t)}Φ_{ω(t)}` for every fit.
pub fn accompanying_soliton(fits: &[ModulationFit], half_width: usize) -> Vec<Field> {
    fits.iter()
        .map(|f| f.wave.profile(half_width).rotate(f.theta))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub t: f64,
    pub r_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatteringResult {
    pub t_ref: f64,
    #[serde(skip)]
    pub phi_plus: Field,
    pub phi_plus_norm: f64,
    /// `‖r₊(t)‖_{l²}` with `r₊(t) = z(t) − W(t)Φ₊`.
    pub r_norms: Vec<RemainderRow>,
    /// Log-log slope of `‖r₊‖` on `[T_ref/10, T_ref)`.
    pub slope: Option<f64>,
    /// Largest `|‖W(t)Φ₊‖ − ‖Φ₊‖|` over the evaluated times.
    pub unitarity_defect: f64,
}

impl ScatteringResult {
    /// `t,r_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,r_norm")?;
        for r in &self.r_norms {
            writeln!(out, "{:.17e},{:.17e}", r.t, r.r_norm)?;
        }
        Ok(())
    }
}

fn snapshot_at(traj: &Trajectory, t: f64) -> Result<usize> {
    let tol = 1e-9 * t.abs().max(1.0);
    traj.times
        .iter()
        .position(|s| (s - t).abs() <= tol)
        .ok_or_else(|| Error::InvalidArgument(format!("no snapshot at t = {t}")))
}

/// `Φ₊ ≈ W(−T_ref) z(T_ref)` with `z = ψ − s`, and the remainder
/// `r₊(t) = z(t) − W(t)Φ₊` on the snapshot grid up to `T_ref`.
///
/// `solitons` holds `s(t)` per snapshot; pass zero fields for soliton-free
/// runs. The window must satisfy the same light-cone guard as the run.
pub fn extract_scattering_state(
    traj: &Trajectory,
    solitons: &[Field],
    t_ref: f64,
) -> Result<ScatteringResult> {
    if !(t_ref > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "T_ref = {t_ref} must be positive"
        )));
    }
    let n = traj.meta.half_width;
    if 2.0 * t_ref + EVOLVE_MARGIN as f64 > n as f64 {
        return Err(Error::Window(format!(
            "2 T_ref + {EVOLVE_MARGIN} = {} exceeds the half width {n}",
            2.0 * t_ref + EVOLVE_MARGIN as f64
        )));
    }
    let last = snapshot_at(traj, t_ref)?;
    if solitons.len() <= last {
        return Err(Error::InvalidArgument(format!(
            "{} accompanying solitons for snapshot {last}",
            solitons.len()
        )));
    }
    let z = |i: usize| &traj.states[i] - &solitons[i];
    // Inside the guard the backward flow stays on the window up to the
    // truncated free tails, so the unchecked kernel is used.
    let phi_plus = FreePropagator::new(-t_ref).apply_unchecked(&z(last));
    let phi_plus_norm = phi_plus.l2_norm();

    let stride = last.div_ceil(MAX_REMAINDER_SAMPLES).max(1);
    let mut r_norms = Vec::new();
    let mut unitarity_defect: f64 = 0.0;
    for i in (1..=last).filter(|i| i % stride == 0 || *i == last) {
        let t = traj.times[i];
        let free = FreePropagator::new(t).apply_unchecked(&phi_plus);
        unitarity_defect = unitarity_defect.max((free.l2_norm() - phi_plus_norm).abs());
        r_norms.push(RemainderRow {
            t,
            r_norm: (&z(i) - &free).l2_norm(),
        });
    }
    let (t, y): (Vec<f64>, Vec<f64>) = r_norms
        .iter()
        .filter(|r| r.t >= t_ref / 10.0 && r.t < t_ref)
        .map(|r| (r.t, r.r_norm))
        .unzip();
    Ok(ScatteringResult {
        t_ref,
        phi_plus,
        phi_plus_norm,
        r_norms,
        slope: loglog_fit(&t, &y).map(|f| f.slope),
        unitarity_defect,
    })
}

/// Everything needed for one perturbed-soliton run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub model: NonlinearityModel,
    pub omega0: f64,
    pub theta0: f64,
    /// Defaults to the branch that carries `ω₀`.
    pub branch: Option<Branch>,
    /// Picks the wave among several amplitudes; the smallest if absent.
    pub amplitude: Option<f64>,
    pub d: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub half_width: usize,
    pub seed: u64,
    pub record_every: usize,
    pub integrator: Integrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub omega0: f64,
    pub d: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub wave: SolitaryWave,
    /// `‖z(0)‖_{l²}`.
    pub z0_norm: f64,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub omega_final: f64,
    pub omega_half: f64,
    /// `|ω(T) − ω(T/2)|`.
    pub omega_drift: f64,
    /// `2ω(T) − ω(T/2)`, the first Richardson step in `1/t`.
    pub omega_plus: f64,
    pub gamma_plus: f64,
    #[serde(rename = "M_T")]
    pub m_t: f64,
    pub slope_chi: Option<f64>,
    pub slope_r: Option<f64>,
    pub phi_plus_norm: f64,
    pub phi_plus_half_norm: f64,
    /// `‖Φ₊(T) − Φ₊(T/2)‖ / ‖Φ₊(T)‖`, absolute when `Φ₊(T)` vanishes.
    pub horizon_defect: f64,
    pub unitarity_defect: f64,
}

/// A finished run: the summary plus the stage artifacts it was built from.
#[derive(Debug)]
pub struct StabilityRun {
    pub report: StabilityReport,
    pub trajectory: Trajectory,
    pub majorant: MajorantReport,
    pub scattering: ScatteringResult,
    pub scattering_half: ScatteringResult,
}

/// Evolves a perturbed soliton and runs the whole analysis on it. Errors
/// carry the name of the stage that failed.
pub fn stability_experiment(cfg: &StabilityConfig) -> Result<StabilityRun> {
    let m = &cfg.model;
    let branch = match cfg.branch {
        Some(b) => b,
        None => Branch::for_omega(cfg.omega0).map_err(|e| e.at_stage("solitary"))?,
    };
    let wave = SolitaryWave::select(cfg.omega0, branch, m, cfg.amplitude)
        .map_err(|e| e.at_stage("solitary"))?
        .with_theta(cfg.theta0);
    let n = cfg.half_width;
    let chi0 = transversal_perturbation(&wave, m, n, cfg.d, cfg.beta, cfg.seed)
        .map_err(|e| e.at_stage("initial_data"))?;
    let psi0 = &wave.profile(n) + &chi0;
    let trajectory = evolve(
        &psi0,
        cfg.t_end,
        cfg.dt,
        cfg.record_every,
        m,
        cfg.integrator,
    )
    .map_err(|e| match e {
        Error::Stage { .. } => e,
        e => e.at_stage("evolve"),
    })?;

    let tracking = track(&trajectory, &wave, m);
    if let Some(e) = tracking.error {
        return Err(e.at_stage("decompose"));
    }
    let mut maj = majorant(&trajectory, &tracking, m, cfg.beta);
    maj.d = Some(cfg.d);
    if let Some(e) = &maj.error {
        return Err(Error::InvalidArgument(e.clone()).at_stage("majorant"));
    }

    let solitons = accompanying_soliton(&tracking.fits, n);
    let t_half = half_horizon(&trajectory)?;
    let scat = extract_scattering_state(&trajectory, &solitons, cfg.t_end)
        .map_err(|e| e.at_stage("scattering"))?;
    let scat_half = extract_scattering_state(&trajectory, &solitons, t_half)
        .map_err(|e| e.at_stage("scattering"))?;

    let fit_at =
        |t: f64| -> Result<&ModulationFit> { Ok(&tracking.fits[snapshot_at(&trajectory, t)?]) };
    let end = fit_at(cfg.t_end).map_err(|e| e.at_stage("scattering"))?;
    let half = fit_at(t_half).map_err(|e| e.at_stage("scattering"))?;
    let row_end = maj.rows.last().expect("tracked rows");
    let row_half =
        &maj.rows[snapshot_at(&trajectory, t_half).map_err(|e| e.at_stage("scattering"))?];
    let diff = (&scat.phi_plus - &scat_half.phi_plus).l2_norm();
    let horizon_defect = if scat.phi_plus_norm > 1e-12 {
        diff / scat.phi_plus_norm
    } else {
        diff
    };

    let report = StabilityReport {
        omega0: cfg.omega0,
        d: cfg.d,
        t_end: cfg.t_end,
        wave,
        z0_norm: chi0.l2_norm(),
        max_norm_drift: trajectory.max_norm_drift(),
        max_energy_drift: trajectory.max_energy_drift(),
        omega_final: end.omega,
        omega_half: half.omega,
        omega_drift: (end.omega - half.omega).abs(),
        omega_plus: 2.0 * end.omega - half.omega,
        gamma_plus: 2.0 * row_end.gamma - row_half.gamma,
        m_t: maj.m_t,
        slope_chi: maj.slope_chi,
        slope_r: scat.slope,
        phi_plus_norm: scat.phi_plus_norm,
        phi_plus_half_norm: scat_half.phi_plus_norm,
        horizon_defect,
        unitarity_defect: scat.unitarity_defect.max(scat_half.unitarity_defect),
    };
    Ok(StabilityRun {
        report,
        trajectory,
        majorant: maj,
        scattering: scat,
        scattering_half: scat_half,
    })
}

/// The recorded time closest to `T/2`.
fn half_horizon(traj: &Trajectory) -> Result<f64> {
    let t_end = *traj
        .times
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let target = 0.5 * t_end;
    traj.times
        .iter()
        .copied()
        .filter(|t| *t > 0.0)
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .ok_or_else(|| Error::InvalidArgument("trajectory has no positive times".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::decompose;

    fn cubic() -> NonlinearityModel {
        NonlinearityModel::cubic(1.0)
    }

    fn config(d: f64, t_end: f64, n: usize) -> StabilityConfig {
        StabilityConfig {
            model: cubic(),
            omega0: 1.0,
            theta0: 0.0,
            branch: None,
            amplitude: None,
            d,
            t_end,
            dt: 0.01,
            beta: 2.0,
            half_width: n,
            seed: 3,
            record_every: 10,
            integrator: Integrator::Yoshida6,
        }
    }

    #[test]
    fn perturbation_is_transversal_and_sized() {
        let m = cubic();
        let sw = SolitaryWave::select(1.0, Branch::Plus, &m, None)
            .unwrap()
            .with_theta(0.8);
        let chi = transversal_perturbation(&sw, &m, 60, 0.01, 2.0, 9).unwrap();
        assert!((perturbation_norm(&chi, 2.0) - 0.01).abs() < 1e-15);
        let p = SymplecticProjection::from_wave(&sw, &m, 60).unwrap();
        assert!(p.project_discrete(&chi).unwrap().max_abs() < 1e-15);
        assert_eq!(
            chi,
            transversal_perturbation(&sw, &m, 60, 0.01, 2.0, 9).unwrap()
        );
        assert_ne!(
            chi,
            transversal_perturbation(&sw, &m, 60, 0.01, 2.0, 10).unwrap()
        );
        assert_eq!(
            transversal_perturbation(&sw, &m, 60, 0.0, 2.0, 9)
                .unwrap()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn accompanying_soliton_examples() {
        let m = cubic();
        let n = 40;
        let waves =
            [0.8, 1.0, 1.3].map(|w| SolitaryWave::select(w, Branch::Plus, &m, None).unwrap());
        let fits: Vec<ModulationFit> = waves
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let psi = w.profile(n).rotate(0.5 * i as f64);
                decompose(&psi, (w.omega, 0.5 * i as f64), w, &m).unwrap()
            })
            .collect();
        let s = accompanying_soliton(&fits, n);
        for (i, w) in waves.iter().enumerate() {
            assert!((&s[i] - &w.profile(n).rotate(0.5 * i as f64)).max_abs() < 1e-10);
            // Σ C²e^{−2k|x|} over |x| ≤ N.
            let closed = w.c
                * w.c
                * (1.0
                    + 2.0 * ((-2.0 * w.k).exp() - (-2.0 * w.k * (n as f64 + 1.0)).exp())
                        / (1.0 - (-2.0 * w.k).exp()));
            assert!((s[i].l2_norm().powi(2) - closed).abs() < 1e-12 * closed);
        }
        // Same ω, different phases: equal moduli.
        let a = fits[0].wave.profile(n).rotate(0.1);
        let b = fits[0].wave.profile(n).rotate(2.1);
        assert!(a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| (x.norm() - y.norm()).abs() < 1e-15));
    }

    #[test]
    fn free_data_scatters_to_itself() {
        let m = NonlinearityModel::new(vec![0.0]).unwrap();
        let n = 120;
        let psi0 = Field::from_fn(n, |x| {
            Complex64::new(1.0, 0.5) * (-((x - 3) as f64).powi(2) / 6.0).exp()
        });
        let traj = evolve(&psi0, 20.0, 0.02, 25, &m, Integrator::Yoshida6).unwrap();
        let zeros = vec![Field::zeros(n); traj.len()];
        let res = extract_scattering_state(&traj, &zeros, 20.0).unwrap();
        assert!((&res.phi_plus - &psi0).max_abs() < 1e-10);
        assert!(res.unitarity_defect < 1e-10);
        assert!(res.r_norms.iter().all(|r| r.r_norm < 1e-9));
    }

    #[test]
    fn guard_rejects_long_horizons() {
        let m = NonlinearityModel::new(vec![0.0]).unwrap();
        let traj = evolve(&Field::delta(80, 0), 10.0, 0.05, 20, &m, Integrator::Strang).unwrap();
        let zeros = vec![Field::zeros(80); traj.len()];
        assert!(matches!(
            extract_scattering_state(&traj, &zeros, 20.0),
            Err(Error::Window(_))
        ));
        assert!(extract_scattering_state(&traj, &zeros, 3.3).is_err());
    }

    #[test]
    fn unperturbed_run_has_no_scattering() {
        let run = stability_experiment(&config(0.0, 20.0, 130)).unwrap();
        let r = &run.report;
        assert!(r.phi_plus_norm < 1e-6, "{}", r.phi_plus_norm);
        assert!(r.z0_norm == 0.0);
        assert!(r.omega_drift < 1e-9);
        assert!(r.m_t < 1e-5);
        assert!(run.majorant.rows.iter().all(|row| row.chi_winf < 1e-6));
        let traj = &run.trajectory;
        let fits = track(traj, &r.wave, &cubic()).fits;
        let s = accompanying_soliton(&fits, 130);
        for (psi, s) in traj.states.iter().zip(&s) {
            assert!((psi - s).max_abs() < 1e-6);
        }
    }

    #[test]
    fn perturbed_run_is_consistent() {
        let run = stability_experiment(&config(0.01, 30.0, 150)).unwrap();
        let r = &run.report;
        assert!(r.z0_norm > 0.0 && r.z0_norm <= 0.01);
        assert!(r.max_norm_drift < 1e-10);
        assert!(r.unitarity_defect < 1e-10, "{}", r.unitarity_defect);
        assert!((r.omega_final - 1.0).abs() < 0.05);
        assert!(run.scattering.r_norms.iter().all(|row| row.r_norm > 0.0));
        assert!(run.majorant.error.is_none());
    }

    #[test]
    fn stage_errors_are_tagged() {
        let mut cfg = config(0.01, 30.0, 60);
        let err = stability_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("evolve:"), "{err}");
        cfg.half_width = 150;
        cfg.omega0 = -2.0;
        let err = stability_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("solitary:"), "{err}");
    }
}

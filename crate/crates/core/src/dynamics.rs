//! Time evolution of `iψ̇ = −Δψ − δ(x)F(ψ(0))`.
//!
//! The free group `W(t)` is applied exactly by convolution with the lattice
//! kernel `G(x,t) = e^{−2it} i^{|x|} J_{|x|}(2t)`; the point nonlinearity is
//! a pure phase rotation at the origin. Both flows conserve the l² norm, and
//! so does every composition of them.

mod bessel;

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use bessel::bessel_j_upto;

use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::model::{charge, NonlinearityModel};

/// Sites kept clear between the light cone of the data and the window edge
/// by [`free_propagator`].
pub const PROPAGATOR_MARGIN: usize = 10;

/// Sites kept clear by [`evolve`]: `N ≥ 2T + support + EVOLVE_MARGIN`.
pub const EVOLVE_MARGIN: usize = 50;

/// Values below this fraction of the maximum do not count towards the support.
const SUPPORT_TOLERANCE: f64 = 1e-13;

/// Largest `|x|` where `|f(x)|` exceeds `1e−13 · max|f|`; 0 for the zero field.
pub fn support_radius(f: &Field) -> usize {
    let peak = f.max_abs();
    if peak == 0.0 {
        return 0;
    }
    f.sites()
        .filter(|(_, v)| v.norm() > SUPPORT_TOLERANCE * peak)
        .map(|(x, _)| x.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

/// Convolution taps of `W(t)` for `|x| ≤ reach`.
#[derive(Clone, Debug)]
pub struct FreePropagator {
    t: f64,
    taps: Vec<Complex64>,
}

impl FreePropagator {
    pub fn new(t: f64) -> Self {
        let x = 2.0 * t.abs();
        let reach = (x + 10.0 * x.cbrt() + 25.0).ceil() as usize;
        let j = bessel_j_upto(reach, x);
        let phase = Complex64::from_polar(1.0, -2.0 * t.abs());
        // i^n for t ≥ 0; the kernel at −t is the complex conjugate.
        let taps = j
            .iter()
            .enumerate()
            .map(|(n, jn)| {
                let i_pow = match n % 4 {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, 1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, -1.0),
                };
                let g = phase * i_pow * *jn;
                if t < 0.0 {
                    g.conj()
                } else {
                    g
                }
            })
            .collect();
        Self { t, taps }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Kernel value `G(x, t)`.
    pub fn tap(&self, x: i64) -> Complex64 {
        self.taps
            .get(x.unsigned_abs() as usize)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn reach(&self) -> usize {
        self.taps.len() - 1
    }

    /// `W(t)f` restricted to the window, without the light-cone guard.
    pub fn apply_unchecked(&self, f: &Field) -> Field {
        let v = f.values();
        let len = v.len() as i64;
        let reach = self.reach() as i64;
        let out = (0..len)
            .map(|i| {
                let lo = (i - reach).max(0);
                let hi = (i + reach).min(len - 1);
                let mut acc = Complex64::new(0.0, 0.0);
                for j in lo..=hi {
                    acc += self.taps[(i - j).unsigned_abs() as usize] * v[j as usize];
                }
                acc
            })
            .collect();
        Field::from_values_unchecked(f.half_width(), out)
    }
}

/// `W(t)f`, refusing when the light cone of the data reaches the margin.
pub fn free_propagator(f: &Field, t: f64) -> Result<Field> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    check_light_cone(f, t, PROPAGATOR_MARGIN)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(FreePropagator::new(t).apply_unchecked(f))
}

fn check_light_cone(f: &Field, t: f64, margin: usize) -> Result<()> {
    let need = (2.0 * t.abs()).ceil() as usize + support_radius(f) + margin;
    if need > f.half_width() {
        return Err(Error::Window(format!(
            "2|t| + support + {margin} = {need} exceeds the half width {}",
            f.half_width()
        )));
    }
    Ok(())
}

/// `W(t)f` on the periodic window by discrete Fourier diagonalization.
pub fn free_propagator_fourier(f: &Field, t: f64) -> Field {
    let n = f.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    // Periodic layout with site 0 at index 0.
    let h = f.half_width() as i64;
    let mut buf: Vec<Complex64> = (0..n as i64)
        .map(|i| f.get(if i <= h { i } else { i - n as i64 }))
        .collect();
    fwd.process(&mut buf);
    for (m, v) in buf.iter_mut().enumerate() {
        let k = std::f64::consts::TAU * m as f64 / n as f64;
        *v *= Complex64::from_polar(1.0 / n as f64, -(2.0 - 2.0 * k.cos()) * t);
    }
    inv.process(&mut buf);
    Field::from_fn(f.half_width(), |x| buf[x.rem_euclid(n as i64) as usize])
}

/// Exact flow of `iż = −a(|z|²)z` over `dt`.
pub fn point_phase_flow(z: Complex64, dt: f64, m: &NonlinearityModel) -> Complex64 {
    z * Complex64::from_polar(1.0, m.a(z.norm_sqr()) * dt)
}

/// Time-stepping scheme. All are compositions of the exact sub-flows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Second order: half phase, free step, half phase.
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Yoshida4,
    /// Sixth-order seven-stage composition of Strang steps.
    #[default]
    Yoshida6,
}

impl Integrator {
    /// Fractions of `dt` taken by the successive Strang sub-steps.
    pub fn weights(self) -> Vec<f64> {
        match self {
            Integrator::Strang => vec![1.0],
            Integrator::Yoshida4 => {
                let c = 2f64.cbrt();
                let w1 = 1.0 / (2.0 - c);
                let w0 = -c / (2.0 - c);
                vec![w1, w0, w1]
            }
            Integrator::Yoshida6 => {
                let w1 = -1.17767998417887;
                let w2 = 0.235573213359357;
                let w3 = 0.784513610477560;
                let w0 = 1.0 - 2.0 * (w1 + w2 + w3);
                vec![w3, w2, w1, w0, w1, w2, w3]
            }
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Integrator::Strang => 2,
            Integrator::Yoshida4 => 4,
            Integrator::Yoshida6 => 6,
        }
    }
}

/// Precomputed sub-steps of one integrator step.
#[derive(Clone, Debug)]
pub struct Stepper {
    dt: f64,
    stages: Vec<(f64, FreePropagator)>,
}

impl Stepper {
    pub fn new(integrator: Integrator, dt: f64) -> Self {
        let stages = integrator
            .weights()
            .into_iter()
            .map(|w| (w * dt, FreePropagator::new(w * dt)))
            .collect();
        Self { dt, stages }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, f: &Field, m: &NonlinearityModel) -> Field {
        let mut cur = f.clone();
        for (h, w) in &self.stages {
            strang_in_place(&mut cur, *h, w, m);
        }
        cur
    }
}

fn strang_in_place(f: &mut Field, h: f64, w: &FreePropagator, m: &NonlinearityModel) {
    f.set(0, point_phase_flow(f.get(0), h / 2.0, m));
    *f = w.apply_unchecked(f);
    f.set(0, point_phase_flow(f.get(0), h / 2.0, m));
}

/// One Strang step: half point phase, `W(dt)`, half point phase.
pub fn step_strang(f: &Field, dt: f64, m: &NonlinearityModel) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} must be positive"
        )));
    }
    let mut out = f.clone();
    strang_in_place(&mut out, dt, &FreePropagator::new(dt), m);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub dt: f64,
    pub integrator: Integrator,
    pub model: NonlinearityModel,
    pub half_width: usize,
    pub record_every: usize,
    pub steps: usize,
}

/// Snapshots of a run with their conservation diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    /// `|‖ψ(t)‖ − ‖ψ(0)‖| / ‖ψ(0)‖` per snapshot.
    pub norm_drift: Vec<f64>,
    /// `|H(t) − H(0)| / max(1, |H(0)|)` per snapshot.
    pub energy_drift: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `meta.json`, `index.csv` and one `snap_NNNNN.csv` per snapshot.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&self.meta)?,
        )?;
        let mut index = BufWriter::new(fs::File::create(dir.join("index.csv"))?);
        writeln!(index, "index,t,file,norm_drift,energy_drift")?;
        for (i, (t, state)) in self.times.iter().zip(&self.states).enumerate() {
            let name = format!("snap_{i:05}.csv");
            writeln!(
                index,
                "{i},{t:.17e},{name},{:.17e},{:.17e}",
                self.norm_drift[i], self.energy_drift[i]
            )?;
            state.save_csv(&dir.join(&name))?;
        }
        index.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Trajectory> {
        let meta: TrajectoryMeta =
            serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let index_path = dir.join("index.csv");
        let reader = std::io::BufReader::new(fs::File::open(&index_path)?);
        let mut traj = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            norm_drift: Vec::new(),
            energy_drift: Vec::new(),
            meta,
        };
        for (lineno, line) in reader.lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = |m: String| Error::Parse {
                path: index_path.clone(),
                message: format!("line {}: {m}", lineno + 1),
            };
            if cols.len() != 5 {
                return Err(bad("expected 5 columns".into()));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            traj.times.push(num(cols[1])?);
            traj.norm_drift.push(num(cols[3])?);
            traj.energy_drift.push(num(cols[4])?);
            traj.states
                .push(Field::load_csv(&dir.join(cols[2].trim()))?);
        }
        Ok(traj)
    }
}

/// Evolves `f0` to time `T` with step `dt`, recording every `record_every`
/// steps (and the final state).
pub fn evolve(
    f0: &Field,
    t_end: f64,
    dt: f64,
    record_every: usize,
    m: &NonlinearityModel,
    integrator: Integrator,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and T >= 0, got dt = {dt}, T = {t_end}"
        )));
    }
    if record_every == 0 {
        return Err(Error::InvalidArgument(
            "record_every must be at least 1".into(),
        ));
    }
    let steps = (t_end / dt).round() as usize;
    if ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "T = {t_end} is not a multiple of dt = {dt}"
        )));
    }
    f0.check_finite()?;
    check_light_cone(f0, t_end, EVOLVE_MARGIN)?;

    let stepper = Stepper::new(integrator, dt);
    let n0 = f0.l2_norm();
    let h0 = m.hamiltonian(f0);
    let drifts = |f: &Field| {
        let nd = if n0 > 0.0 {
            (f.l2_norm() - n0).abs() / n0
        } else {
            f.l2_norm()
        };
        let ed = (m.hamiltonian(f) - h0).abs() / h0.abs().max(1.0);
        (nd, ed)
    };
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![f0.clone()],
        norm_drift: vec![0.0],
        energy_drift: vec![0.0],
        meta: TrajectoryMeta {
            dt,
            integrator,
            model: m.clone(),
            half_width: f0.half_width(),
            record_every,
            steps,
        },
    };
    let mut cur = f0.clone();
    for s in 1..=steps {
        cur = stepper.step(&cur, m);
        let z = cur.get(0);
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { site: 0 }.at_stage("evolve"));
        }
        if s % record_every == 0 || s == steps {
            cur.check_finite().map_err(|e| e.at_stage("evolve"))?;
            let (nd, ed) = drifts(&cur);
            traj.times.push(s as f64 * dt);
            traj.states.push(cur.clone());
            traj.norm_drift.push(nd);
            traj.energy_drift.push(ed);
        }
    }
    Ok(traj)
}

/// Total charge `Σ|ψ|²` of every snapshot.
pub fn charges(traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(charge).collect()
}

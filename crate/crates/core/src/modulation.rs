//! Splitting a state into solitary parameters and a transversal part,
//! `ψ = e^{jθ}(Φ_ω + χ)` with `χ` symplectically orthogonal to the tangent
//! plane of the solitary manifold, and the rates at which `ω` and `γ` move.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::lattice::{inner_unchecked, weighted_norm, Field, NormExponent, WeightSpec};
use crate::linearized::SymplecticProjection;
use crate::model::NonlinearityModel;
use crate::solitary::SolitaryWave;

pub const NEWTON_MAX_ITERS: usize = 50;
pub const FIT_TOLERANCE: f64 = 1e-10;
/// Step of the central differences in `ω`.
pub const OMEGA_STEP: f64 = 1e-5;
pub const MIN_DENOMINATOR: f64 = 1e-8;

/// Result of [`decompose`]. `wave` is the solitary wave at the fitted `ω` with
/// zero phase; `theta` is not reduced mod 2π so that it can be tracked.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationFit {
    pub omega: f64,
    pub theta: f64,
    pub chi: Field,
    /// `max(|⟨χ, Φ⟩|, |⟨χ, j∂Φ⟩|)`.
    pub residual: f64,
    pub newton_iters: usize,
    pub wave: SolitaryWave,
}

impl ModulationFit {
    /// `Φ_ω + χ`, the state in the co-rotating frame.
    pub fn psi_frame(&self) -> Field {
        let mut out = self.wave.profile(self.chi.half_width());
        out.axpy(1.0, &self.chi).expect("same window");
        out
    }
}

struct Frame {
    wave: SolitaryWave,
    phi: Field,
    dphi: Field,
}

impl Frame {
    fn at(
        reference: &SolitaryWave,
        omega: f64,
        half_width: usize,
        m: &NonlinearityModel,
    ) -> Result<Self> {
        let wave = reference
            .with_theta(0.0)
            .continue_to(omega, m)
            .map_err(|e| {
                Error::Domain(format!("omega = {omega} left the admissible range: {e}"))
            })?;
        Ok(Self {
            phi: wave.profile(half_width),
            dphi: wave.d_omega_profile(half_width, m)?,
            wave,
        })
    }

    fn chi(&self, psi: &Field, theta: f64) -> Field {
        let mut chi = psi.rotate(-theta);
        chi.axpy(-1.0, &self.phi).expect("same window");
        chi
    }

    fn pairings(&self, chi: &Field) -> [f64; 2] {
        [
            inner_unchecked(chi, &self.phi),
            inner_unchecked(chi, &self.dphi.apply_j()),
        ]
    }
}

fn second_omega_derivative(
    wave: &SolitaryWave,
    half_width: usize,
    m: &NonlinearityModel,
) -> Result<Field> {
    let h = OMEGA_STEP;
    let up = wave
        .continue_to(wave.omega + h, m)?
        .d_omega_profile(half_width, m)?;
    let down = wave
        .continue_to(wave.omega - h, m)?
        .d_omega_profile(half_width, m)?;
    Ok((&up - &down).scale(0.5 / h))
}

/// Newton iteration on `⟨χ, Φ_ω⟩ = 0`, `⟨χ, j∂_ωΦ_ω⟩ = 0` with
/// `χ = e^{−jθ}ψ − Φ_ω`, started from `guess = (ω, θ)`. The branch and the
/// amplitude sheet are those of `reference`.
pub fn decompose(
    psi: &Field,
    guess: (f64, f64),
    reference: &SolitaryWave,
    m: &NonlinearityModel,
) -> Result<ModulationFit> {
    psi.check_finite()?;
    let n = psi.half_width();
    let (mut omega, mut theta) = guess;
    let mut frame = Frame::at(reference, omega, n, m)?;
    let mut chi = frame.chi(psi, theta);
    let mut g = frame.pairings(&chi);
    let norm = |g: [f64; 2]| g[0].abs().max(g[1].abs());

    for iter in 0..=NEWTON_MAX_ITERS {
        if norm(g) < FIT_TOLERANCE {
            return Ok(ModulationFit {
                omega,
                theta,
                chi,
                residual: norm(g),
                newton_iters: iter,
                wave: frame.wave,
            });
        }
        if iter == NEWTON_MAX_ITERS {
            break;
        }
        let d2phi = second_omega_derivative(&frame.wave, n, m)?;
        let total = &chi + &frame.phi;
        let j11 = -inner_unchecked(&frame.dphi, &frame.phi) + inner_unchecked(&chi, &frame.dphi);
        let j12 = -inner_unchecked(&chi.apply_j(), &frame.phi);
        let j21 = inner_unchecked(&chi, &d2phi.apply_j());
        let j22 = -inner_unchecked(&total, &frame.dphi);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Singular(
                "modulation Newton Jacobian is singular".into(),
            ));
        }
        let d_omega = (j22 * g[0] - j12 * g[1]) / det;
        let d_theta = (j11 * g[1] - j21 * g[0]) / det;

        // Halve the step until the residual does not grow.
        let mut step = 1.0;
        loop {
            let trial_omega = omega - step * d_omega;
            let trial_theta = theta - step * d_theta;
            match Frame::at(reference, trial_omega, n, m) {
                Ok(trial) => {
                    let trial_chi = trial.chi(psi, trial_theta);
                    let trial_g = trial.pairings(&trial_chi);
                    if norm(trial_g) <= norm(g) || step < 1e-3 {
                        omega = trial_omega;
                        theta = trial_theta;
                        frame = trial;
                        chi = trial_chi;
                        g = trial_g;
                        break;
                    }
                }
                Err(e) if step < 1e-3 => return Err(e),
                Err(_) => {}
            }
            step *= 0.5;
        }
    }
    Err(Error::FitNonConvergence {
        iterations: NEWTON_MAX_ITERS,
        residual: norm(g),
    })
}

/// `Q = −δ₀ j⁻¹(F(Φ+χ) − F(Φ) − F′(Φ)χ)`, evaluated with the profile of `wave`.
pub fn nonlinear_remainder(chi: &Field, wave: &SolitaryWave, m: &NonlinearityModel) -> Field {
    let mut q = Field::zeros(chi.half_width());
    let phi0 = wave.value(0);
    let chi0 = chi.get(0);
    let r = m.force(phi0 + chi0) - m.force(phi0) - m.force_jacobian_apply(phi0, chi0);
    // −j⁻¹ is multiplication by i.
    q.set(0, Complex64::i() * r);
    q
}

struct RateTerms {
    psi: Field,
    a: Field,
    p0q: Field,
    proj: SymplecticProjection,
}

fn rate_terms(fit: &ModulationFit, m: &NonlinearityModel) -> Result<RateTerms> {
    let n = fit.chi.half_width();
    let proj = SymplecticProjection::from_wave(&fit.wave, m, n)?;
    let q = nonlinear_remainder(&fit.chi, &fit.wave, m);
    let p0q = proj.project_discrete(&q)?;

    // ∂_ω P⁰ χ, central differences with one Richardson level.
    let diff = |h: f64| -> Result<Field> {
        let up = SymplecticProjection::from_wave(&fit.wave.continue_to(fit.omega + h, m)?, m, n)?;
        let down = SymplecticProjection::from_wave(&fit.wave.continue_to(fit.omega - h, m)?, m, n)?;
        Ok((&up.project_discrete(&fit.chi)? - &down.project_discrete(&fit.chi)?).scale(0.5 / h))
    };
    let coarse = diff(OMEGA_STEP)?;
    let fine = diff(0.5 * OMEGA_STEP)?;
    let dp_chi = &fine.scale(4.0 / 3.0) - &coarse.scale(1.0 / 3.0);

    let a = &proj.dphi().clone() - &dp_chi;
    Ok(RateTerms {
        psi: fit.psi_frame(),
        a,
        p0q,
        proj,
    })
}

/// `(ω̇, γ̇)` from `ω̇ = ⟨P⁰Q, Ψ⟩ / ⟨A, Ψ⟩` and `γ̇ = ⟨jP⁰A, P⁰Q⟩ / ⟨A, Ψ⟩`
/// with `Ψ = Φ + χ` and `A = ∂_ωΦ − (∂_ωP⁰)χ`.
pub fn modulation_rhs(fit: &ModulationFit, m: &NonlinearityModel) -> Result<(f64, f64)> {
    let t = rate_terms(fit, m)?;
    let den = inner_unchecked(&t.a, &t.psi);
    if !(den.abs() > MIN_DENOMINATOR) {
        return Err(Error::SmallDenominator(den));
    }
    let omega_dot = inner_unchecked(&t.p0q, &t.psi) / den;
    let gamma_dot = inner_unchecked(&t.proj.project_discrete(&t.a)?.apply_j(), &t.p0q) / den;
    Ok((omega_dot, gamma_dot))
}

/// `(ω̇, γ̇)` from the full two-dimensional relation
/// `ω̇ A − γ̇ P⁰j⁻¹Ψ = P⁰Q` that keeps `P⁰χ = 0`, solved in the coordinates
/// of `X⁰`. Agrees with [`modulation_rhs`] up to a relative `O(χ)`.
pub fn modulation_rhs_solved(fit: &ModulationFit, m: &NonlinearityModel) -> Result<(f64, f64)> {
    let t = rate_terms(fit, m)?;
    let coords = |f: &Field| -> Result<[f64; 2]> {
        let p = t.proj.project_discrete(f)?;
        let d = t.proj.denom();
        Ok([
            inner_unchecked(&p, &t.proj.dphi().apply_j()) / d,
            inner_unchecked(&p, t.proj.phi()) / d,
        ])
    };
    // j⁻¹Ψ = −jΨ.
    let jinv_psi = t.psi.apply_j().scale(-1.0);
    let a = coords(&t.a)?;
    let b = coords(&jinv_psi)?;
    let r = coords(&t.p0q)?;
    let det = -a[0] * b[1] + a[1] * b[0];
    if !(det.abs() > MIN_DENOMINATOR) {
        return Err(Error::SmallDenominator(det));
    }
    let omega_dot = (-r[0] * b[1] + r[1] * b[0]) / det;
    let gamma_dot = (a[0] * r[1] - a[1] * r[0]) / det;
    Ok((omega_dot, gamma_dot))
}

/// Result of following a trajectory with warm-started decompositions.
#[derive(Debug)]
pub struct Tracking {
    pub fits: Vec<ModulationFit>,
    /// First failure; `fits` stops at the snapshot before it.
    pub error: Option<Error>,
}

/// Decomposes every snapshot, seeding each with `(ω, θ + ω Δt)` from the
/// previous fit. The first guess is `(reference.omega, reference.theta)`.
pub fn track(traj: &Trajectory, reference: &SolitaryWave, m: &NonlinearityModel) -> Tracking {
    let mut fits: Vec<ModulationFit> = Vec::with_capacity(traj.len());
    let mut guess = (reference.omega, reference.theta);
    let mut wave = *reference;
    for (i, psi) in traj.states.iter().enumerate() {
        if let Some(prev) = fits.last() {
            let dt = traj.times[i] - traj.times[i - 1];
            guess = (prev.omega, prev.theta + prev.omega * dt);
            wave = prev.wave;
        }
        match decompose(psi, guess, &wave, m) {
            Ok(fit) => fits.push(fit),
            Err(e) => {
                return Tracking {
                    fits,
                    error: Some(Error::InvalidArgument(format!(
                        "snapshot {i} (t = {}): {e}",
                        traj.times[i]
                    ))),
                };
            }
        }
    }
    Tracking { fits, error: None }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantRow {
    pub t: f64,
    /// `‖χ(t)‖_{l^∞_{−β}}`.
    pub chi_winf: f64,
    pub gamma_dot: f64,
    pub omega_dot: f64,
    pub omega: f64,
    pub theta: f64,
    /// `θ(t) − ∫₀ᵗ ω`.
    pub gamma: f64,
    pub residual: f64,
    pub newton_iters: usize,
    /// Central differences of the fitted `ω` and `γ`, absent at the ends.
    pub omega_dot_fd: Option<f64>,
    pub gamma_dot_fd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantReport {
    pub rows: Vec<MajorantRow>,
    #[serde(rename = "M_T")]
    pub m_t: f64,
    pub beta: f64,
    /// Size of the initial perturbation, if known.
    pub d: Option<f64>,
    /// Slope of `log((1+t)^{3/2} ‖χ‖)` against `log t` on `[10, 100]`.
    pub slope_chi: Option<f64>,
    /// Why the report stops early, if it does.
    pub error: Option<String>,
}

/// `(1+t)^{3/2}‖χ‖_{l^∞_{−β}} + (1+t)³(|γ̇| + |ω̇|)` for one row.
pub fn majorant_term(row: &MajorantRow) -> f64 {
    let s = 1.0 + row.t;
    s.powf(1.5) * row.chi_winf + s.powi(3) * (row.gamma_dot.abs() + row.omega_dot.abs())
}

impl MajorantReport {
    pub fn from_rows(mut rows: Vec<MajorantRow>, beta: f64, error: Option<String>) -> Self {
        fill_differences(&mut rows);
        let m_t = rows.iter().map(majorant_term).fold(0.0, f64::max);
        let slope_chi = Self::slope_in(&rows, 10.0, 100.0);
        Self {
            rows,
            m_t,
            beta,
            d: None,
            slope_chi,
            error,
        }
    }

    /// Log-log slope of the weighted transversal norm over `[t0, t1]`.
    pub fn slope_in(rows: &[MajorantRow], t0: f64, t1: f64) -> Option<f64> {
        let (t, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.t >= t0 && r.t <= t1)
            .map(|r| (r.t, (1.0 + r.t).powf(1.5) * r.chi_winf))
            .unzip();
        loglog_fit(&t, &y).map(|f| f.slope)
    }

    /// `t,chi_winf,gamma_dot,omega_dot`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,chi_winf,gamma_dot,omega_dot")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t, r.chi_winf, r.gamma_dot, r.omega_dot
            )?;
        }
        Ok(())
    }

    /// Every column including the fitted parameters and the cross-checks;
    /// missing differences are written as empty fields.
    pub fn write_full_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "t,chi_winf,gamma_dot,omega_dot,omega,theta,gamma,residual,newton_iters,omega_dot_fd,gamma_dot_fd"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}",
                r.t,
                r.chi_winf,
                r.gamma_dot,
                r.omega_dot,
                r.omega,
                r.theta,
                r.gamma,
                r.residual,
                r.newton_iters,
                opt(r.omega_dot_fd),
                opt(r.gamma_dot_fd)
            )?;
        }
        Ok(())
    }

    /// `{M_T, d, slope_chi}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "M_T": self.m_t, "d": self.d, "slope_chi": self.slope_chi })
    }
}

fn fill_differences(rows: &mut [MajorantRow]) {
    let n = rows.len();
    for i in 1..n.saturating_sub(1) {
        let h = rows[i + 1].t - rows[i - 1].t;
        rows[i].omega_dot_fd = Some((rows[i + 1].omega - rows[i - 1].omega) / h);
        rows[i].gamma_dot_fd = Some((rows[i + 1].gamma - rows[i - 1].gamma) / h);
    }
}

/// Majorant rows from tracked fits. A failing rate evaluation, or a failed
/// tracking, ends the report at the last good row with the error recorded.
pub fn majorant(
    traj: &Trajectory,
    tracking: &Tracking,
    m: &NonlinearityModel,
    beta: f64,
) -> MajorantReport {
    let w = WeightSpec {
        p: NormExponent::Infinity,
        beta: -beta,
    };
    let mut rows = Vec::with_capacity(tracking.fits.len());
    let mut error = tracking.error.as_ref().map(|e| e.to_string());
    let mut integral = 0.0;
    for (i, fit) in tracking.fits.iter().enumerate() {
        let t = traj.times[i];
        if i > 0 {
            integral += 0.5 * (t - traj.times[i - 1]) * (fit.omega + tracking.fits[i - 1].omega);
        }
        let (omega_dot, gamma_dot) = match modulation_rhs(fit, m) {
            Ok(r) => r,
            Err(e) => {
                error = Some(format!("snapshot {i} (t = {t}): {e}"));
                break;
            }
        };
        rows.push(MajorantRow {
            t,
            chi_winf: weighted_norm(&fit.chi, w),
            gamma_dot,
            omega_dot,
            omega: fit.omega,
            theta: fit.theta,
            gamma: fit.theta - integral,
            residual: fit.residual,
            newton_iters: fit.newton_iters,
            omega_dot_fd: None,
            gamma_dot_fd: None,
        });
    }
    MajorantReport::from_rows(rows, beta, error)
}

//! Linearization `χ̇ = C χ`, `C = j⁻¹B`, around a solitary wave, its
//! generalized null space and the symplectic projections onto it.
//!
//! Real pairs are interleaved: entry `2i` is the real part at site
//! `i − N`, entry `2i+1` the imaginary part.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::fit::loglog_fit;
use crate::lattice::{inner_unchecked, laplacian, op_norm_weighted, Field, Kernel};
use crate::model::NonlinearityModel;
use crate::solitary::{admissibility_report, SolitaryWave};

/// Windows up to this half width use the dense exponential in
/// [`evolve_linear`]; larger ones are time stepped.
pub const DENSE_LIMIT: usize = 400;

/// Sites kept free between the light cone and the window edge in
/// [`measure_decay`].
pub const DECAY_MARGIN: usize = 50;

#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    pub omega: f64,
    /// `a(C²)`.
    pub a: f64,
    /// `2a′(C²)C²`.
    pub b: f64,
    /// Phase of the wave the operator linearizes around.
    pub theta: f64,
    point: Matrix2<f64>,
    half_width: usize,
    matrix: DMatrix<f64>,
}

impl LinearizedOperator {
    /// Linearization at `e^{jθ}Φ_ω`.
    pub fn build(sw: &SolitaryWave, m: &NonlinearityModel, half_width: usize) -> Result<Self> {
        let report = admissibility_report(sw, m);
        if !report.sp_cond1 {
            return Err(Error::Degenerate(format!(
                "a' = {} violates a' not in {{0, (4a+a^3)/(2C^2)}}",
                report.a_prime
            )));
        }
        let c2 = sw.c * sw.c;
        Self::from_parameters(
            sw.omega,
            m.a(c2),
            2.0 * m.a_prime(c2) * c2,
            sw.theta,
            half_width,
        )
    }

    /// Operator with point potential `a I + b v vᵀ`, `v = (cos θ, sin θ)`.
    /// `a = b = 0` gives the free operator `j⁻¹(−Δ + ω)`.
    pub fn from_parameters(
        omega: f64,
        a: f64,
        b: f64,
        theta: f64,
        half_width: usize,
    ) -> Result<Self> {
        if ![omega, a, b, theta].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "linearization parameters must be finite".into(),
            ));
        }
        if half_width == 0 {
            return Err(Error::Window("half width must be positive".into()));
        }
        let (s, c) = theta.sin_cos();
        let point = Matrix2::new(a + b * c * c, b * c * s, b * s * c, a + b * s * s);
        let n = 2 * half_width + 1;
        let mut matrix = DMatrix::zeros(2 * n, 2 * n);
        // Entries of j⁻¹M for M = [[m11, m12], [m21, m22]] are [[m21, m22], [−m11, −m12]].
        let mut put = |i: usize, j: usize, m: Matrix2<f64>| {
            matrix[(2 * i, 2 * j)] = m[(1, 0)];
            matrix[(2 * i, 2 * j + 1)] = m[(1, 1)];
            matrix[(2 * i + 1, 2 * j)] = -m[(0, 0)];
            matrix[(2 * i + 1, 2 * j + 1)] = -m[(0, 1)];
        };
        for i in 0..n {
            let mut diag = Matrix2::identity() * (2.0 + omega);
            if i == half_width {
                diag -= point;
            }
            put(i, i, diag);
            if i > 0 {
                put(i, i - 1, -Matrix2::identity());
            }
            if i + 1 < n {
                put(i, i + 1, -Matrix2::identity());
            }
        }
        Ok(Self {
            omega,
            a,
            b,
            theta,
            point,
            half_width,
            matrix,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `B χ = (−Δ + ω)χ − δ₀ F′(Φ(0)) χ(0)`.
    pub fn apply_b(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut out = laplacian(f).scale(-1.0);
        out.axpy(self.omega, f)?;
        let z = f.get(0);
        let pz = Complex64::new(
            self.point[(0, 0)] * z.re + self.point[(0, 1)] * z.im,
            self.point[(1, 0)] * z.re + self.point[(1, 1)] * z.im,
        );
        out.set(0, out.get(0) - pz);
        Ok(out)
    }

    /// `C χ = j⁻¹ B χ` by the stencil.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        Ok(self.apply_b(f)?.map(|v| Complex64::new(v.im, -v.re)))
    }

    /// `C χ` through the stored matrix.
    pub fn apply_matrix(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let v = &self.matrix * DVector::from_vec(f.to_real_vec());
        Field::from_real_slice(self.half_width, v.as_slice())
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.half_width() != self.half_width {
            return Err(Error::MismatchedWindows {
                left: self.half_width,
                right: f.half_width(),
            });
        }
        Ok(())
    }
}

/// `(jΦ_ω, ∂_ωΦ_ω)` for the wave including its phase.
pub fn null_vectors(
    sw: &SolitaryWave,
    m: &NonlinearityModel,
    half_width: usize,
) -> Result<(Field, Field)> {
    let phi = sw.profile(half_width);
    let dphi = sw.d_omega_profile(half_width, m)?;
    Ok((phi.apply_j(), dphi))
}

/// `P⁰f = [⟨f, j∂Φ⟩ jΦ + ⟨f, Φ⟩ ∂Φ] / ⟨Φ, ∂Φ⟩` and `Pᶜ = 1 − P⁰`.
#[derive(Clone, Debug)]
pub struct SymplecticProjection {
    phi: Field,
    dphi: Field,
    denom: f64,
}

impl SymplecticProjection {
    pub fn new(phi: Field, dphi: Field) -> Result<Self> {
        phi.same_window(&dphi)?;
        let denom = inner_unchecked(&phi, &dphi);
        let scale = phi.l2_norm() * dphi.l2_norm();
        if !(denom.abs() > 1e-12 * scale.max(1e-300)) {
            return Err(Error::Degenerate(format!(
                "<Phi, d_omega Phi> = {denom:e} vanishes; the null space is degenerate"
            )));
        }
        Ok(Self { phi, dphi, denom })
    }

    pub fn from_wave(sw: &SolitaryWave, m: &NonlinearityModel, half_width: usize) -> Result<Self> {
        Self::new(sw.profile(half_width), sw.d_omega_profile(half_width, m)?)
    }

    pub fn phi(&self) -> &Field {
        &self.phi
    }

    pub fn dphi(&self) -> &Field {
        &self.dphi
    }

    pub fn denom(&self) -> f64 {
        self.denom
    }

    pub fn half_width(&self) -> usize {
        self.phi.half_width()
    }

    pub fn project_discrete(&self, f: &Field) -> Result<Field> {
        self.phi.same_window(f)?;
        let c1 = inner_unchecked(f, &self.dphi.apply_j()) / self.denom;
        let c2 = inner_unchecked(f, &self.phi) / self.denom;
        let mut out = self.phi.apply_j().scale(c1);
        out.axpy(c2, &self.dphi)?;
        Ok(out)
    }

    pub fn project_continuous(&self, f: &Field) -> Result<Field> {
        Ok(f - &self.project_discrete(f)?)
    }

    /// `P⁰ = U Wᵀ` in the real layout, `U = [jΦ, ∂Φ]`, `W = [j∂Φ, Φ]/denom`.
    fn factors(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = 2 * self.phi.len();
        let mut u = DMatrix::zeros(n, 2);
        let mut w = DMatrix::zeros(n, 2);
        u.set_column(0, &DVector::from_vec(self.phi.apply_j().to_real_vec()));
        u.set_column(1, &DVector::from_vec(self.dphi.to_real_vec()));
        w.set_column(
            0,
            &DVector::from_vec(self.dphi.apply_j().scale(1.0 / self.denom).to_real_vec()),
        );
        w.set_column(
            1,
            &DVector::from_vec(self.phi.scale(1.0 / self.denom).to_real_vec()),
        );
        (u, w)
    }

    /// Dense matrix of `P⁰`.
    pub fn discrete_matrix(&self) -> DMatrix<f64> {
        let (u, w) = self.factors();
        u * w.transpose()
    }

    /// `Pᶜ M Pᶜ` through rank-two updates.
    pub fn sandwich_continuous(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let (u, w) = self.factors();
        let wt_m = w.transpose() * m;
        let m_u = m * &u;
        let core = &wt_m * &u;
        let mut out = m - &u * &wt_m - &m_u * w.transpose();
        out += &u * core * w.transpose();
        out
    }
}

/// `e^{Ct}χ₀`.
pub fn evolve_linear(op: &LinearizedOperator, chi0: &Field, t: f64) -> Result<Field> {
    op.check(chi0)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} must be >= 0")));
    }
    if t == 0.0 {
        return Ok(chi0.clone());
    }
    if op.half_width <= DENSE_LIMIT {
        let e = expm(&(op.matrix() * t))?;
        let v = e * DVector::from_vec(chi0.to_real_vec());
        return Field::from_real_slice(op.half_width, v.as_slice());
    }
    let n = op.half_width;
    let rhs = |y: &[f64]| -> Vec<f64> {
        let f = Field::from_real_slice(n, y).expect("layout");
        op.apply(&f).expect("layout").to_real_vec()
    };
    let y = dormand_prince(rhs, chi0.to_real_vec(), t, 1e-10)?;
    Field::from_real_slice(n, &y)
}

/// Adaptive Dormand–Prince 5(4) for an autonomous system.
fn dormand_prince(
    f: impl Fn(&[f64]) -> Vec<f64>,
    mut y: Vec<f64>,
    t_end: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let n = y.len();
    let mut t = 0.0;
    let mut h = (t_end / 100.0).min(0.05);
    let mut k1 = f(&y);
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Singular(
                "adaptive integrator exceeded its step budget".into(),
            ));
        }
        h = h.min(t_end - t);
        let mut ks = vec![k1.clone()];
        let mut stage = vec![0.0; n];
        for row in C.iter() {
            for (i, s) in stage.iter_mut().enumerate() {
                *s = y[i] + h * ks.iter().zip(row).map(|(k, c)| c * k[i]).sum::<f64>();
            }
            ks.push(f(&stage));
        }
        // The last stage is the fifth-order solution (FSAL).
        let y_new = stage.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let e = h * ks.iter().zip(E).map(|(k, c)| c * k[i]).sum::<f64>();
            let scale = tol + tol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = ks.pop().expect("seven stages");
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(y)
}

/// Weighted norms of `Pᶜe^{Ct}Pᶜ` on a time grid, with a power-law fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub t: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl DecayFit {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,norm")?;
        for (t, n) in self.t.iter().zip(&self.norms) {
            writeln!(out, "{t:.17e},{n:.17e}")?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "slope": self.slope, "intercept": self.intercept, "r2": self.r2 })
    }
}

/// Largest time [`measure_decay`] accepts on a window of half width `n`.
pub fn decay_time_limit(half_width: usize) -> f64 {
    half_width.saturating_sub(DECAY_MARGIN) as f64 / 2.0
}

/// Computes `op_norm_weighted(Pᶜ e^{Ct} Pᶜ, β)` at each grid time. Without a
/// projection the plain group is measured. Propagators for repeated time
/// increments are reused, so uniform grids cost one exponential.
pub fn measure_decay(
    op: &LinearizedOperator,
    projection: Option<&SymplecticProjection>,
    beta: f64,
    t_grid: &[f64],
) -> Result<DecayFit> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "decay fit needs at least two times".into(),
        ));
    }
    if t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "time grid must be positive and increasing".into(),
        ));
    }
    let t_max = *t_grid.last().expect("nonempty");
    let limit = decay_time_limit(op.half_width);
    if t_max > limit {
        return Err(Error::Window(format!(
            "t_max = {t_max} exceeds (N - {DECAY_MARGIN})/2 = {limit} for N = {}",
            op.half_width
        )));
    }
    if let Some(p) = projection {
        if p.half_width() != op.half_width {
            return Err(Error::MismatchedWindows {
                left: op.half_width,
                right: p.half_width(),
            });
        }
    }

    let mut cache: Vec<(f64, DMatrix<f64>)> = Vec::new();
    let dim = op.matrix.nrows();
    let mut current = DMatrix::<f64>::identity(dim, dim);
    let mut t_prev = 0.0;
    let mut norms = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dt = t - t_prev;
        let pos = cache.iter().position(|(h, _)| (h - dt).abs() <= 1e-12 * dt);
        let step = match pos {
            Some(i) => &cache[i].1,
            None => {
                cache.push((dt, expm(&(op.matrix() * dt))?));
                &cache.last().expect("just pushed").1
            }
        };
        current = step * &current;
        t_prev = t;
        let projected = match projection {
            Some(p) => p.sandwich_continuous(&current),
            None => current.clone(),
        };
        let kernel = Kernel::new(op.half_width, projected)?;
        norms.push(op_norm_weighted(&kernel, beta)?);
    }
    let fit = loglog_fit(t_grid, &norms)
        .ok_or_else(|| Error::Singular("decay norms do not admit a log-log fit".into()))?;
    Ok(DecayFit {
        t: t_grid.to_vec(),
        norms,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{inner, symplectic_form};
    use crate::solitary::Branch;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cubic_wave(omega: f64) -> (SolitaryWave, NonlinearityModel) {
        let m = NonlinearityModel::cubic(1.0);
        (
            SolitaryWave::select(omega, Branch::Plus, &m, None).unwrap(),
            m,
        )
    }

    fn random_field(n: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(n, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn localized_random(n: usize, radius: i64, seed: u64) -> Field {
        let f = random_field(n, seed);
        Field::from_fn(n, |x| {
            if x.abs() <= radius {
                f.get(x)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn stencil_and_matrix_agree() {
        let (sw, m) = cubic_wave(1.0);
        let op = LinearizedOperator::build(&sw.with_theta(0.7), &m, 12).unwrap();
        let f = random_field(12, 3);
        assert!((&op.apply(&f).unwrap() - &op.apply_matrix(&f).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn free_operator_on_delta() {
        let op = LinearizedOperator::from_parameters(1.0, 0.0, 0.0, 0.0, 5).unwrap();
        // C δ₀ = −i(−Δ + ω)δ₀ = −i(3, −1, −1 pattern).
        let c = op.apply(&Field::delta(5, 0)).unwrap();
        assert_eq!(c.get(0), Complex64::new(0.0, -3.0));
        assert_eq!(c.get(1), Complex64::new(0.0, 1.0));
        assert_eq!(c.get(-1), Complex64::new(0.0, 1.0));
        assert_eq!(c.get(2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn null_space_identities() {
        let (sw, m) = cubic_wave(1.0);
        let n = 60;
        for theta in [0.0, 1.3] {
            let w = sw.with_theta(theta);
            let op = LinearizedOperator::build(&w, &m, n).unwrap();
            let (jphi, dphi) = null_vectors(&w, &m, n).unwrap();
            let interior = n - 5;
            assert!(op.apply(&jphi).unwrap().l2_norm_within(interior) < 1e-10);
            let r = &op.apply(&dphi).unwrap() - &jphi;
            assert!(r.l2_norm_within(interior) < 1e-10);
            // C² vanishes on the null space.
            let c2 = op.apply(&op.apply(&dphi).unwrap()).unwrap();
            assert!(c2.l2_norm_within(interior) < 1e-8);
        }
    }

    #[test]
    fn null_vectors_rotate_with_phase() {
        let (sw, m) = cubic_wave(1.0);
        let (a0, b0) = null_vectors(&sw, &m, 20).unwrap();
        let (a1, b1) = null_vectors(&sw.with_theta(0.4), &m, 20).unwrap();
        assert!((&a1 - &a0.rotate(0.4)).max_abs() < 1e-14);
        assert!((&b1 - &b0.rotate(0.4)).max_abs() < 1e-14);
    }

    #[test]
    fn symplectic_pairing_of_null_vectors() {
        let (sw, m) = cubic_wave(1.0);
        let (jphi, dphi) = null_vectors(&sw, &m, 80).unwrap();
        let omega = symplectic_form(&jphi, &dphi).unwrap();
        let dnorm = admissibility_report(&sw, &m).dnorm_domega.unwrap();
        assert!((omega + 0.5 * dnorm).abs() < 1e-8);
    }

    #[test]
    fn null_vectors_are_localized() {
        let (sw, m) = cubic_wave(1.0);
        let (jphi, dphi) = null_vectors(&sw, &m, 40).unwrap();
        let bound = 10.0 * sw.c;
        for x in -40i64..=40 {
            let env = (-sw.k * x.abs() as f64 / 2.0).exp();
            assert!(jphi.get(x).norm() <= bound * env);
            assert!(dphi.get(x).norm() <= bound * env);
        }
    }

    #[test]
    fn d1_annihilates_derivative_up_to_profile() {
        // D₁(∂_ωψ) = −ψ is the real part of B∂_ωψ = −ψ at θ = 0.
        let (sw, m) = cubic_wave(1.0);
        let op = LinearizedOperator::build(&sw, &m, 40).unwrap();
        let dphi = sw.d_omega_profile(40, &m).unwrap();
        let r = &op.apply_b(&dphi).unwrap() + &sw.profile(40);
        assert!(r.l2_norm_within(35) < 1e-8);
    }

    #[test]
    fn projection_properties() {
        let (sw, m) = cubic_wave(1.0);
        let n = 40;
        let p = SymplecticProjection::from_wave(&sw, &m, n).unwrap();
        let (jphi, dphi) = null_vectors(&sw, &m, n).unwrap();
        assert!((&p.project_discrete(&jphi).unwrap() - &jphi).max_abs() < 1e-10);
        assert!((&p.project_discrete(&dphi).unwrap() - &dphi).max_abs() < 1e-10);

        let f = random_field(n, 11);
        let p0 = p.project_discrete(&f).unwrap();
        let pc = p.project_continuous(&f).unwrap();
        assert!((&p.project_discrete(&p0).unwrap() - &p0).max_abs() < 1e-10);
        assert!((&p.project_continuous(&pc).unwrap() - &pc).max_abs() < 1e-10);
        assert!(p.project_discrete(&pc).unwrap().max_abs() < 1e-10);

        let mat = p.discrete_matrix();
        assert!((&mat * &mat - &mat).amax() < 1e-10);

        let far = Field::from_fn(n, |x| {
            if x.abs() > 35 {
                Complex64::new(1.0, -1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!(p.project_discrete(&far).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn degenerate_projection_is_rejected() {
        let z = Field::zeros(3);
        assert!(matches!(
            SymplecticProjection::new(Field::delta(3, 0), z),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn evolve_linear_examples() {
        let (sw, m) = cubic_wave(1.0);
        let n = 60;
        let op = LinearizedOperator::build(&sw, &m, n).unwrap();
        let (jphi, dphi) = null_vectors(&sw, &m, n).unwrap();
        let chi = random_field(n, 5);
        assert_eq!(evolve_linear(&op, &chi, 0.0).unwrap(), chi);
        assert!(evolve_linear(&op, &chi, -1.0).is_err());

        let t = 3.0;
        let e1 = evolve_linear(&op, &jphi, t).unwrap();
        assert!((&e1 - &jphi).l2_norm_within(n - 20) < 1e-8);
        let e2 = evolve_linear(&op, &dphi, t).unwrap();
        let mut expected = dphi.clone();
        expected.axpy(t, &jphi).unwrap();
        assert!((&e2 - &expected).l2_norm_within(n - 20) < 1e-6);
    }

    #[test]
    fn group_preserves_symplectic_form_and_energy_but_not_norm() {
        let (sw, m) = cubic_wave(1.0);
        let n = 40;
        let op = LinearizedOperator::build(&sw, &m, n).unwrap();
        let f = localized_random(n, 5, 1);
        let g = localized_random(n, 5, 2);
        let t = 4.0;
        let ft = evolve_linear(&op, &f, t).unwrap();
        let gt = evolve_linear(&op, &g, t).unwrap();
        let om0 = symplectic_form(&f, &g).unwrap();
        let om1 = symplectic_form(&ft, &gt).unwrap();
        assert!((om0 - om1).abs() < 1e-8 * om0.abs().max(1.0));
        let q0 = inner(&op.apply_b(&f).unwrap(), &f).unwrap();
        let q1 = inner(&op.apply_b(&ft).unwrap(), &ft).unwrap();
        assert!((q0 - q1).abs() < 1e-8 * q0.abs().max(1.0));

        // The generalized null vector grows linearly, so l² is not conserved.
        let (_, dphi) = null_vectors(&sw, &m, n).unwrap();
        let grown = evolve_linear(&op, &dphi, 10.0).unwrap();
        assert!(grown.l2_norm() > 2.0 * dphi.l2_norm());
    }

    #[test]
    fn free_group_is_unitary() {
        let op = LinearizedOperator::from_parameters(1.0, 0.0, 0.0, 0.0, 40).unwrap();
        let f = localized_random(40, 5, 9);
        let ft = evolve_linear(&op, &f, 5.0).unwrap();
        assert!((ft.l2_norm() - f.l2_norm()).abs() < 1e-10);
    }

    #[test]
    fn projection_commutes_with_group() {
        let (sw, m) = cubic_wave(1.0);
        let n = 40;
        let op = LinearizedOperator::build(&sw, &m, n).unwrap();
        let p = SymplecticProjection::from_wave(&sw, &m, n).unwrap();
        let f = localized_random(n, 4, 21);
        let t = 2.5;
        let lhs = p
            .project_discrete(&evolve_linear(&op, &f, t).unwrap())
            .unwrap();
        let rhs = evolve_linear(&op, &p.project_discrete(&f).unwrap(), t).unwrap();
        assert!((&lhs - &rhs).l2_norm_within(n - 15) < 1e-6);
    }

    #[test]
    fn adaptive_integrator_matches_dense_exponential() {
        let (sw, m) = cubic_wave(1.0);
        let n = 30;
        let op = LinearizedOperator::build(&sw, &m, n).unwrap();
        let f = localized_random(n, 4, 17);
        let dense = evolve_linear(&op, &f, 2.0).unwrap();
        let rhs = |y: &[f64]| {
            op.apply(&Field::from_real_slice(n, y).unwrap())
                .unwrap()
                .to_real_vec()
        };
        let stepped = dormand_prince(rhs, f.to_real_vec(), 2.0, 1e-10).unwrap();
        let stepped = Field::from_real_slice(n, &stepped).unwrap();
        assert!((&dense - &stepped).max_abs() < 1e-8);
    }

    #[test]
    fn decay_guard_and_free_case() {
        let op = LinearizedOperator::from_parameters(1.0, 0.0, 0.0, 0.0, 80).unwrap();
        assert!(matches!(
            measure_decay(&op, None, 2.0, &[1.0, 20.0]),
            Err(Error::Window(_))
        ));
        assert!(measure_decay(&op, None, 2.0, &[2.0, 1.0]).is_err());

        let grid = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0];
        let free = measure_decay(&op, None, 2.0, &grid).unwrap();
        assert!(free.norms.iter().all(|v| v.is_finite()));
        assert!(free.norms.last().unwrap() < free.norms.first().unwrap());
        assert!(free.slope < 0.0);

        let doubled = measure_decay(&op, None, 4.0, &grid).unwrap();
        for (a, b) in free.norms.iter().zip(&doubled.norms) {
            assert!(b <= &(a * (1.0 + 1e-12)));
        }
        let mut buf = Vec::new();
        free.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            grid.len() + 1
        );
        assert!(free.summary_json().get("r2").is_some());
    }

    #[test]
    fn projected_decay_is_finite() {
        let (sw, m) = cubic_wave(2.0);
        let n = 70;
        let op = LinearizedOperator::build(&sw, &m, n).unwrap();
        let p = SymplecticProjection::from_wave(&sw, &m, n).unwrap();
        let fit = measure_decay(&op, Some(&p), 2.0, &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        assert!(fit.norms.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn projections_are_complementary(seed in 0u64..10_000, omega in 0.3f64..5.0) {
            let (sw, m) = cubic_wave(omega);
            let n = 30;
            let p = SymplecticProjection::from_wave(&sw, &m, n).unwrap();
            let f = random_field(n, seed);
            let p0 = p.project_discrete(&f).unwrap();
            let pc = p.project_continuous(&f).unwrap();
            prop_assert!((&p.project_discrete(&p0).unwrap() - &p0).max_abs() < 1e-10);
            prop_assert!((&p.project_continuous(&pc).unwrap() - &pc).max_abs() < 1e-10);
            prop_assert!(p.project_discrete(&pc).unwrap().max_abs() < 1e-10);
            prop_assert!((&(&p0 + &pc) - &f).max_abs() < 1e-12);
        }
    }
}

//! The point nonlinearity `F(ψ) = a(|ψ|²) ψ` and the Hamiltonian.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Field;

/// Polynomial `a(s) = Σ c_n sⁿ`, coefficients low to high.
///
/// The potential is derived from it: `u(s) = −½ ∫₀ˢ a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityModel {
    pub coeffs: Vec<f64>,
}

impl Default for NonlinearityModel {
    fn default() -> Self {
        Self::cubic(1.0)
    }
}

impl NonlinearityModel {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "nonlinearity coefficients must be finite".into(),
            ));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    /// `a(s) = κ s`, the cubic Schrödinger nonlinearity.
    pub fn cubic(kappa: f64) -> Self {
        Self {
            coeffs: vec![0.0, kappa],
        }
    }

    pub fn a(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn a_prime(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (n, c)| acc * s + n as f64 * c)
    }

    pub fn a_second(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (n, c)| acc * s + (n * (n - 1)) as f64 * c)
    }

    /// `F(z) = a(|z|²) z`.
    pub fn force(&self, z: Complex64) -> Complex64 {
        z * self.a(z.norm_sqr())
    }

    /// `u(s) = −½ ∫₀ˢ a(σ) dσ`, integrated term by term.
    pub fn potential_u(&self, s: f64) -> f64 {
        let integral = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (n, c)| acc * s + c / (n + 1) as f64)
            * s;
        -0.5 * integral
    }

    /// Real Jacobian of `F` at `z`: `a I + 2a′ v vᵀ` with `v = (Re z, Im z)`.
    pub fn force_jacobian(&self, z: Complex64) -> Matrix2<f64> {
        let s = z.norm_sqr();
        let a = self.a(s);
        let ap2 = 2.0 * self.a_prime(s);
        Matrix2::new(
            a + ap2 * z.re * z.re,
            ap2 * z.re * z.im,
            ap2 * z.im * z.re,
            a + ap2 * z.im * z.im,
        )
    }

    /// `F′(z) χ` via the real Jacobian.
    pub fn force_jacobian_apply(&self, z: Complex64, chi: Complex64) -> Complex64 {
        let j = self.force_jacobian(z);
        Complex64::new(
            j[(0, 0)] * chi.re + j[(0, 1)] * chi.im,
            j[(1, 0)] * chi.re + j[(1, 1)] * chi.im,
        )
    }

    /// `½ Σ |f(x+1) − f(x)|² + u(|f(0)|²)`, with the two edges leaving the
    /// window counted against the zero exterior.
    pub fn hamiltonian(&self, f: &Field) -> f64 {
        let v = f.values();
        let zero = Complex64::new(0.0, 0.0);
        let mut kinetic = v.first().map_or(0.0, |z| z.norm_sqr());
        kinetic += v.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>();
        kinetic += (zero - v.last().copied().unwrap_or(zero)).norm_sqr();
        0.5 * kinetic + self.potential_u(f.get(0).norm_sqr())
    }
}

/// Charge `Σ |f(x)|²`.
pub fn charge(f: &Field) -> f64 {
    f.values().iter().map(|v| v.norm_sqr()).sum()
}

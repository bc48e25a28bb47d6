//! Explicit solitary waves `ψ(x) = C e^{iθ − k|x|}` (and the staggered
//! version for frequencies below the band), their ω-derivatives and the
//! algebraic admissibility checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{laplacian, Field};
use crate::model::NonlinearityModel;

/// Which family a wave belongs to: `Plus` for `ω > 0`, `Minus` for `ω < −4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// `+1` on the plus branch, `−1` on the minus branch.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn for_omega(omega: f64) -> Result<Branch> {
        if omega > 0.0 {
            Ok(Branch::Plus)
        } else if omega < -4.0 {
            Ok(Branch::Minus)
        } else {
            Err(gap_error(omega))
        }
    }
}

fn gap_error(omega: f64) -> Error {
    Error::Domain(format!(
        "omega = {omega} lies in the band gap [-4, 0] where only the zero solitary wave exists"
    ))
}

/// Decay rate `k = arccosh(|ω+2|/2)`.
pub fn k_of_omega(omega: f64, branch: Branch) -> Result<f64> {
    if !omega.is_finite() {
        return Err(Error::Domain(format!("omega = {omega} is not finite")));
    }
    match branch {
        Branch::Plus if omega > 0.0 => Ok(((omega + 2.0) / 2.0).acosh()),
        Branch::Minus if omega < -4.0 => Ok((-(omega + 2.0) / 2.0).acosh()),
        _ if (-4.0..=0.0).contains(&omega) => Err(gap_error(omega)),
        _ => Err(Error::Domain(format!(
            "omega = {omega} does not belong to the {branch:?} branch"
        ))),
    }
}

/// `dk/dω = sign(ω+2) / (2 sinh k)`.
pub fn dk_domega(omega: f64, k: f64) -> f64 {
    (omega + 2.0).signum() / (2.0 * k.sinh())
}

const C_MIN: f64 = 1e-6;
const C_MAX: f64 = 1e3;
const SCAN_POINTS: usize = 4000;

/// All positive roots `C` of `a(C²) = ±2 sinh k(ω)`, ascending.
pub fn amplitude_of_omega(omega: f64, branch: Branch, m: &NonlinearityModel) -> Result<Vec<f64>> {
    let k = k_of_omega(omega, branch)?;
    let target = branch.sign() * 2.0 * k.sinh();
    let g = |c: f64| m.a(c * c) - target;

    let ratio = (C_MAX / C_MIN).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| C_MIN * ratio.powi(i as i32))
        .collect();
    let mut roots: Vec<f64> = Vec::new();
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            roots.push(lo);
            continue;
        }
        if glo.signum() == ghi.signum() || ghi == 0.0 {
            continue;
        }
        roots.push(polish(m, target, bisect(&g, lo, hi)));
    }
    if g(C_MAX) == 0.0 {
        roots.push(C_MAX);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(roots)
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo_sign = g(lo).signum();
    while hi - lo > 1e-14 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == glo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One Newton step in `C` on `a(C²) − target`, kept only if it helps.
fn polish(m: &NonlinearityModel, target: f64, c: f64) -> f64 {
    let r = m.a(c * c) - target;
    let d = 2.0 * c * m.a_prime(c * c);
    if d == 0.0 || !d.is_finite() {
        return c;
    }
    let next = c - r / d;
    if next > 0.0 && (m.a(next * next) - target).abs() <= r.abs() {
        next
    } else {
        c
    }
}

/// A solitary wave with frequency `ω`, amplitude `C`, decay `k` and phase `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitaryWave {
    pub omega: f64,
    pub branch: Branch,
    #[serde(rename = "C")]
    pub c: f64,
    pub k: f64,
    pub theta: f64,
}

impl SolitaryWave {
    /// Checks that `(ω, C)` solve the amplitude relation before building.
    pub fn new(
        omega: f64,
        branch: Branch,
        c: f64,
        theta: f64,
        m: &NonlinearityModel,
    ) -> Result<Self> {
        let k = k_of_omega(omega, branch)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude C = {c} must be positive"
            )));
        }
        let target = branch.sign() * 2.0 * k.sinh();
        let residual = m.a(c * c) - target;
        if residual.abs() > 1e-9 * target.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "C = {c} does not solve a(C^2) = {target} (residual {residual:e})"
            )));
        }
        Ok(Self {
            omega,
            branch,
            c,
            k,
            theta: theta.rem_euclid(std::f64::consts::TAU),
        })
    }

    /// Every wave of the family at frequency `ω` with phase 0.
    pub fn family(omega: f64, branch: Branch, m: &NonlinearityModel) -> Result<Vec<Self>> {
        amplitude_of_omega(omega, branch, m)?
            .into_iter()
            .map(|c| Self::new(omega, branch, c, 0.0, m))
            .collect()
    }

    /// The wave at frequency `ω` whose amplitude is closest to `reference_c`
    /// (or the smallest amplitude if no reference is given).
    pub fn select(
        omega: f64,
        branch: Branch,
        m: &NonlinearityModel,
        reference_c: Option<f64>,
    ) -> Result<Self> {
        let family = Self::family(omega, branch, m)?;
        let pick = match reference_c {
            Some(r) => family
                .into_iter()
                .min_by(|a, b| (a.c - r).abs().total_cmp(&(b.c - r).abs())),
            None => family.into_iter().next(),
        };
        pick.ok_or_else(|| {
            Error::Domain(format!(
                "no solitary wave with omega = {omega} on the {branch:?} branch"
            ))
        })
    }

    /// The wave with amplitude `C`; `ω` follows from `a(C²) = ±2 sinh k`.
    pub fn from_amplitude(c: f64, theta: f64, m: &NonlinearityModel) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "amplitude C = {c} must be positive"
            )));
        }
        let a = m.a(c * c);
        if a == 0.0 {
            return Err(Error::Domain(format!(
                "a(C^2) = 0 at C = {c}; no nonzero wave"
            )));
        }
        let k = (0.5 * a.abs()).asinh();
        let (branch, omega) = if a > 0.0 {
            (Branch::Plus, 2.0 * k.cosh() - 2.0)
        } else {
            (Branch::Minus, -2.0 * k.cosh() - 2.0)
        };
        Self::new(omega, branch, c, theta, m)
    }

    /// The wave of the same branch at a nearby frequency, following the
    /// amplitude by Newton's method from the current `C`. Falls back to a full
    /// root scan when Newton does not settle.
    pub fn continue_to(&self, omega: f64, m: &NonlinearityModel) -> Result<Self> {
        let k = k_of_omega(omega, self.branch)?;
        let target = self.branch.sign() * 2.0 * k.sinh();
        let mut c = self.c;
        for _ in 0..30 {
            let r = m.a(c * c) - target;
            if r.abs() <= 1e-14 * target.abs().max(1.0) {
                return Self::new(omega, self.branch, c, self.theta, m);
            }
            let d = 2.0 * c * m.a_prime(c * c);
            if d == 0.0 || !d.is_finite() {
                break;
            }
            let next = c - r / d;
            if !(next > 0.0) || (next - self.c).abs() > 0.5 * self.c {
                break;
            }
            c = next;
        }
        if (m.a(c * c) - target).abs() <= 1e-12 * target.abs().max(1.0) {
            return Self::new(omega, self.branch, c, self.theta, m);
        }
        Ok(Self::select(omega, self.branch, m, Some(self.c))?.with_theta(self.theta))
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self {
            theta: theta.rem_euclid(std::f64::consts::TAU),
            ..self
        }
    }

    fn stagger(&self, x: i64) -> f64 {
        match self.branch {
            Branch::Minus if x.rem_euclid(2) == 1 => -1.0,
            _ => 1.0,
        }
    }

    /// Real profile `Φ_ω(x)` without the phase.
    pub fn real_value(&self, x: i64) -> f64 {
        self.stagger(x) * self.c * (-self.k * x.unsigned_abs() as f64).exp()
    }

    pub fn value(&self, x: i64) -> Complex64 {
        Complex64::from_polar(1.0, self.theta) * self.real_value(x)
    }

    /// Window half width with `e^{−kN} < 1e−14`.
    pub fn default_half_width(&self) -> usize {
        (14.0 * std::f64::consts::LN_10 / self.k).ceil() as usize + 1
    }

    pub fn profile(&self, half_width: usize) -> Field {
        Field::from_fn(half_width, |x| self.value(x))
    }

    pub fn dk_domega(&self) -> f64 {
        dk_domega(self.omega, self.k)
    }

    /// `dC/dω` from differentiating `a(C²) = ±2 sinh k`.
    pub fn dc_domega(&self, m: &NonlinearityModel) -> Result<f64> {
        let ap = m.a_prime(self.c * self.c);
        if ap == 0.0 {
            return Err(Error::Singular(
                "a'(C^2) = 0, the amplitude is not differentiable in omega".into(),
            ));
        }
        Ok(self.branch.sign() * self.k.cosh() * self.dk_domega() / (self.c * ap))
    }

    /// Analytic `∂_ω ψ_ω` (with the same phase as the profile).
    pub fn d_omega_profile(&self, half_width: usize, m: &NonlinearityModel) -> Result<Field> {
        let dc = self.dc_domega(m)?;
        let dk = self.dk_domega();
        let phase = Complex64::from_polar(1.0, self.theta);
        Ok(Field::from_fn(half_width, |x| {
            let ax = x.unsigned_abs() as f64;
            phase * self.stagger(x) * (dc - self.c * ax * dk) * (-self.k * ax).exp()
        }))
    }

    /// `Σ_ℤ |ψ_ω|² = C² coth k` on the infinite lattice.
    pub fn charge(&self) -> f64 {
        self.c * self.c / self.k.tanh()
    }

    /// `∂_ω Σ_ℤ |ψ_ω|²`.
    pub fn dcharge_domega(&self, m: &NonlinearityModel) -> Result<f64> {
        let dc = self.dc_domega(m)?;
        let dk = self.dk_domega();
        let sh = self.k.sinh();
        Ok(2.0 * self.c * dc / self.k.tanh() - self.c * self.c * dk / (sh * sh))
    }
}

/// `−ωψ + Δψ + δ₀ F(ψ(0))`; vanishes for a solitary wave.
pub fn nep_residual(psi: &Field, omega: f64, m: &NonlinearityModel) -> Field {
    let mut r = laplacian(psi);
    r.axpy(-omega, psi).expect("same window");
    let f0 = m.force(psi.get(0));
    r.set(0, r.get(0) + f0);
    r
}

/// Algebraic checks on a wave. Condition 2 of the spectral condition (no
/// nonzero eigenvalues) needs a root scan of the resolvent determinant and is
/// not part of this report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub omega: f64,
    pub branch: Branch,
    #[serde(rename = "C")]
    pub c: f64,
    pub k: f64,
    pub a: f64,
    pub a_prime: f64,
    /// `a′ ≠ 0`.
    pub a_prime_nonzero: bool,
    /// `a′ ∉ {0, (4a+a³)/(2C²)}`.
    pub sp_cond1: bool,
    /// `a′ ≠ (4a+a³)/(4C²)`; only asserted on the plus branch, `None` otherwise.
    pub intdif_ok: Option<bool>,
    /// `∂_ω Σ|ψ_ω|²`, `None` when `a′ = 0`.
    pub dnorm_domega: Option<f64>,
    pub dnorm_sign: i8,
    pub sp_cond2: String,
}

fn distinct(x: f64, y: f64) -> bool {
    (x - y).abs() > 1e-10 * x.abs().max(y.abs()).max(1.0)
}

pub fn admissibility_report(sw: &SolitaryWave, m: &NonlinearityModel) -> AdmissibilityReport {
    let c2 = sw.c * sw.c;
    let a = m.a(c2);
    let ap = m.a_prime(c2);
    let poly = 4.0 * a + a * a * a;
    let a_prime_nonzero = ap != 0.0;
    let sp_cond1 = a_prime_nonzero && distinct(ap, poly / (2.0 * c2));
    let intdif_ok = (sw.branch == Branch::Plus).then(|| distinct(ap, poly / (4.0 * c2)));
    let dnorm_domega = sw.dcharge_domega(m).ok();
    let dnorm_sign = match dnorm_domega {
        Some(v) if v > 0.0 => 1,
        Some(v) if v < 0.0 => -1,
        _ => 0,
    };
    AdmissibilityReport {
        omega: sw.omega,
        branch: sw.branch,
        c: sw.c,
        k: sw.k,
        a,
        a_prime: ap,
        a_prime_nonzero,
        sp_cond1,
        intdif_ok,
        dnorm_domega,
        dnorm_sign,
        sp_cond2: "delegated to resolvent::scan_roots".into(),
    }
}

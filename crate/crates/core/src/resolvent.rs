//! Resolvent of the linearized operator: the lattice momenta θ±(λ), the
//! determinant D(λ), the closed-form kernel `R = Γ + P`, and root scans.
//!
//! The continuous spectrum consists of the cuts `C₊ = i[ω, ω+4]` and
//! `C₋ = −i[ω, ω+4]`. Off its cut, θ± is the root of `2cos θ = ω+2 ± iλ`
//! with positive imaginary part. On a cut θ± is real and the two sides
//! (`λ ± 0`, approached along the real axis) give opposite signs.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearized::LinearizedOperator;
use crate::model::NonlinearityModel;
use crate::solitary::SolitaryWave;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Constants of the resolvent: `α = a + a′C²`, `β = a′C²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventContext {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta_c: f64,
}

impl ResolventContext {
    /// From the point-potential strengths `a` and `b = 2a′C²`.
    pub fn new(omega: f64, a: f64, b: f64) -> Result<Self> {
        if ![omega, a, b].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "resolvent parameters must be finite".into(),
            ));
        }
        Ok(Self {
            omega,
            a,
            b,
            alpha: a + b / 2.0,
            beta_c: b / 2.0,
        })
    }

    pub fn from_wave(sw: &SolitaryWave, m: &NonlinearityModel) -> Result<Self> {
        let c2 = sw.c * sw.c;
        Self::new(sw.omega, m.a(c2), 2.0 * m.a_prime(c2) * c2)
    }

    /// Endpoints `(ω, ω+4)` of the imaginary parts along `C₊`.
    pub fn cut_range(&self) -> (f64, f64) {
        (self.omega, self.omega + 4.0)
    }

    /// Which cut, if any, `λ` lies on.
    pub fn cut_of(&self, lambda: Complex64) -> Option<Sign> {
        if lambda.re != 0.0 {
            return None;
        }
        let (lo, hi) = self.cut_range();
        let s = lambda.im;
        if (lo..=hi).contains(&s) {
            Some(Sign::Plus)
        } else if (lo..=hi).contains(&-s) {
            Some(Sign::Minus)
        } else {
            None
        }
    }
}

/// Selects θ₊ or θ₋.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Side of a cut a boundary value is taken from: `Right` is `λ + 0`
/// (approached from `Re λ > 0`), `Left` is `λ − 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    OffCut,
}

/// A spectral parameter together with the side of approach for points on a cut.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: Complex64,
    pub side: Side,
}

impl BranchPoint {
    pub fn off(lambda: Complex64) -> Self {
        Self {
            lambda,
            side: Side::OffCut,
        }
    }

    pub fn on(lambda: Complex64, side: Side) -> Self {
        Self { lambda, side }
    }
}

/// Branch-resolved θ±(λ).
pub fn theta_branch(ctx: &ResolventContext, at: BranchPoint, sign: Sign) -> Result<Complex64> {
    let lambda = at.lambda;
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    let z = (Complex64::new(ctx.omega + 2.0, 0.0) + I * lambda * sign.value()) / 2.0;
    if ctx.cut_of(lambda) == Some(sign) {
        let c = z.re.clamp(-1.0, 1.0);
        let real = c.acos();
        // Approaching from Re λ > 0 shifts z by +iε on C₊ and by −iε on C₋.
        let value = match (at.side, sign) {
            (Side::OffCut, _) => {
                return Err(Error::AmbiguousBranch {
                    re: lambda.re,
                    im: lambda.im,
                })
            }
            (Side::Right, Sign::Plus) | (Side::Left, Sign::Minus) => -real,
            (Side::Left, Sign::Plus) | (Side::Right, Sign::Minus) => real,
        };
        return Ok(Complex64::new(value, 0.0));
    }
    let t = z.acos();
    Ok(if t.im < 0.0 { -t } else { t })
}

fn thetas(ctx: &ResolventContext, at: BranchPoint) -> Result<(Complex64, Complex64)> {
    Ok((
        theta_branch(ctx, at, Sign::Plus)?,
        theta_branch(ctx, at, Sign::Minus)?,
    ))
}

fn det_from_sines(ctx: &ResolventContext, sp: Complex64, sm: Complex64) -> Complex64 {
    let al = ctx.alpha;
    let be = ctx.beta_c;
    Complex64::new(al * al - be * be, 0.0) + I * (2.0 * al) * (sp + sm) - sp * sm * 4.0
}

/// `D(λ) = α² + 2iα(sin θ₊ + sin θ₋) − 4 sin θ₊ sin θ₋ − β²`.
pub fn determinant(ctx: &ResolventContext, at: BranchPoint) -> Result<Complex64> {
    let (tp, tm) = thetas(ctx, at)?;
    Ok(det_from_sines(ctx, tp.sin(), tm.sin()))
}

/// `D` with θ₊ and/or θ₋ replaced by −θ (the other sheet of each root).
pub fn determinant_on_sheet(
    ctx: &ResolventContext,
    at: BranchPoint,
    flip_plus: bool,
    flip_minus: bool,
) -> Result<Complex64> {
    let (mut tp, mut tm) = thetas(ctx, at)?;
    if flip_plus {
        tp = -tp;
    }
    if flip_minus {
        tm = -tm;
    }
    Ok(det_from_sines(ctx, tp.sin(), tm.sin()))
}

/// Threshold on `|D|` below which [`kernel`] reports a pole.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// The 2×2 kernel `R(λ, x, y) = Γ + P` of `(C − λ)⁻¹` on the infinite lattice,
/// in the same real-pair block convention as the truncated matrix.
pub fn kernel(
    ctx: &ResolventContext,
    at: BranchPoint,
    x: i64,
    y: i64,
) -> Result<Matrix2<Complex64>> {
    let (tp, tm) = thetas(ctx, at)?;
    let (sp, sm) = (tp.sin(), tm.sin());
    if sp.norm() < 1e-14 || sm.norm() < 1e-14 {
        return Err(Error::Singular(format!(
            "lambda = {} is a branch point of the continuous spectrum",
            at.lambda
        )));
    }
    let d = det_from_sines(ctx, sp, sm);
    if d.norm() < POLE_TOLERANCE {
        return Err(Error::Pole { abs_d: d.norm() });
    }
    let (ax, ay) = (x.unsigned_abs() as f64, y.unsigned_abs() as f64);
    let dxy = (x - y).unsigned_abs() as f64;
    let ep = |r: f64| (I * tp * r).exp();
    let em = |r: f64| (I * tm * r).exp();

    let gp = ep(dxy) - ep(ax + ay);
    let gm = em(dxy) - em(ax + ay);
    let left = Matrix2::new(
        1.0 / (sp * 4.0),
        -1.0 / (sm * 4.0),
        I / (sp * 4.0),
        I / (sm * 4.0),
    );
    let right = Matrix2::new(gp, -I * gp, gm, I * gm);
    let gamma = left * right;

    let (px, mx) = (ep(ax), em(ax));
    let (py, my) = (ep(ay), em(ay));
    let al = Complex64::new(ctx.alpha, 0.0);
    let be = Complex64::new(ctx.beta_c, 0.0);
    let l = Matrix2::new(px, mx, I * px, -I * mx);
    let mid = Matrix2::new(I * al - sm * 2.0, I * be, -I * be, -I * al + sp * 2.0);
    let r = Matrix2::new(py, -I * py, my, I * my);
    let p = l * mid * r / (d * 2.0);
    Ok(gamma + p)
}

/// Region and resolution of a root scan.
/// Largest entry difference between [`kernel`] and the columns `y ∈ ys` of
/// `(C − λ)⁻¹` on the window of half width `n`, compared on `|x| ≤ core`.
pub fn kernel_truncation_residual(
    ctx: &ResolventContext,
    lambda: Complex64,
    n: usize,
    ys: &[i64],
    core: usize,
) -> Result<f64> {
    if core >= n || ys.iter().any(|y| y.unsigned_abs() as usize > core) {
        return Err(Error::InvalidArgument(
            "comparison core must lie inside the window".into(),
        ));
    }
    let op = LinearizedOperator::from_parameters(ctx.omega, ctx.a, ctx.b, 0.0, n)?;
    let dim = op.matrix().nrows();
    let shifted = op.matrix().map(|v| Complex64::new(v, 0.0))
        - DMatrix::<Complex64>::identity(dim, dim) * lambda;
    let mut rhs = DMatrix::<Complex64>::zeros(dim, 2 * ys.len());
    for (k, y) in ys.iter().enumerate() {
        let j = 2 * (*y + n as i64) as usize;
        rhs[(j, 2 * k)] = Complex64::new(1.0, 0.0);
        rhs[(j + 1, 2 * k + 1)] = Complex64::new(1.0, 0.0);
    }
    let cols = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular(format!("truncated C - lambda is singular at {lambda}")))?;
    let at = BranchPoint::off(lambda);
    let core = core as i64;
    let mut worst: f64 = 0.0;
    for (k, &y) in ys.iter().enumerate() {
        for x in -core..=core {
            let r = kernel(ctx, at, x, y)?;
            let i = 2 * (x + n as i64) as usize;
            for (p, q) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                worst = worst.max((r[(p, q)] - cols[(i + p, 2 * k + q)]).norm());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRegion {
    pub radius: f64,
    pub origin_exclusion: f64,
    pub cut_tube: f64,
    pub threshold: f64,
    pub cut_samples: usize,
}

/// Grid spacing of the certification scan.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

impl ScanRegion {
    /// `|λ| ≤ max(10, 2(ω+4))`, minus a 0.1 disk at 0 and 0.05 tubes around
    /// the cuts, certified when `min |D| > 1e−3`.
    pub fn default_for(ctx: &ResolventContext) -> Self {
        Self {
            radius: 10f64.max(2.0 * (ctx.omega.abs() + 4.0)),
            origin_exclusion: 0.1,
            cut_tube: 0.05,
            threshold: 1e-3,
            cut_samples: 4001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RootReport {
    pub min_abs_D: f64,
    pub argmin_re: f64,
    pub argmin_im: f64,
    /// Minimum of `|D|` over both sides of both cuts.
    pub min_abs_D_cuts: f64,
    pub sp_certified: bool,
    pub zero_count_at_origin: i64,
    pub c2_re: f64,
    pub c2_im: f64,
    pub order: u32,
    pub grid_points: usize,
}

/// Samples `(re, im, |D|)` kept from a scan for plotting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridDump {
    pub rows: Vec<(f64, f64, f64)>,
}

impl GridDump {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "re,im,absD")?;
        for (re, im, d) in &self.rows {
            writeln!(out, "{re:.17e},{im:.17e},{d:.17e}")?;
        }
        Ok(())
    }
}

fn in_tube(ctx: &ResolventContext, lambda: Complex64, tube: f64) -> bool {
    let (lo, hi) = ctx.cut_range();
    lambda.re.abs() < tube && (lambda.im.abs() > lo - tube && lambda.im.abs() < hi + tube)
}

/// Minimum of `|D|` over both sides of both cuts, with its location.
pub fn cut_minimum(ctx: &ResolventContext, samples: usize) -> Result<(f64, Complex64)> {
    let (lo, hi) = ctx.cut_range();
    let samples = samples.max(2);
    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
    for i in 0..samples {
        let s = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        for lambda in [Complex64::new(0.0, s), Complex64::new(0.0, -s)] {
            for side in [Side::Left, Side::Right] {
                let d = determinant(ctx, BranchPoint::on(lambda, side))?.norm();
                if d < best.0 {
                    best = (d, lambda);
                }
            }
        }
    }
    Ok(best)
}

/// Winding number of `D` along `|λ| = radius`, counting zeros inside.
pub fn zero_count(ctx: &ResolventContext, radius: f64, nodes: usize) -> Result<i64> {
    let values: Vec<Complex64> = (0..=nodes)
        .map(|k| {
            determinant(
                ctx,
                BranchPoint::off(Complex64::from_polar(radius, TAU * k as f64 / nodes as f64)),
            )
        })
        .collect::<Result<_>>()?;
    if values.iter().any(|d| d.norm() == 0.0) {
        return Err(Error::Singular("D vanishes on the counting contour".into()));
    }
    let mut total = 0.0;
    for w in values.windows(2) {
        total += (w[1] / w[0]).arg();
    }
    Ok((total / TAU).round() as i64)
}

/// Radius of the circle used for the zero count around λ = 0: inside the
/// excluded disk and clear of the branch points `±iω`.
pub fn origin_contour_radius(ctx: &ResolventContext, origin_exclusion: f64) -> f64 {
    origin_exclusion.min(0.4 * ctx.omega.abs())
}

/// Scans `|D|` on a grid of step `grid_step`; certifies the spectral
/// condition when the grid and cut minima exceed the threshold and exactly two
/// zeros sit at the origin. Every `dump_every`-th grid point is kept (0 keeps
/// none).
pub fn scan_roots(
    ctx: &ResolventContext,
    region: &ScanRegion,
    grid_step: f64,
    dump_every: usize,
) -> Result<(RootReport, GridDump)> {
    if !(grid_step > 0.0) || !(region.radius > 0.0) {
        return Err(Error::InvalidArgument(
            "grid step and radius must be positive".into(),
        ));
    }
    let n = (region.radius / grid_step).floor() as i64;
    let coords: Vec<f64> = (-n..=n).map(|i| i as f64 * grid_step).collect();
    let width = coords.len();

    struct Row {
        count: usize,
        best: f64,
        at: Complex64,
        dump: Vec<(f64, f64, f64)>,
    }
    let rows: Vec<Row> = coords
        .par_iter()
        .enumerate()
        .map(|(row, &im)| {
            let mut out = Row {
                count: 0,
                best: f64::INFINITY,
                at: Complex64::new(0.0, 0.0),
                dump: Vec::new(),
            };
            for (col, &re) in coords.iter().enumerate() {
                let lambda = Complex64::new(re, im);
                let r = lambda.norm();
                if r > region.radius
                    || r < region.origin_exclusion
                    || in_tube(ctx, lambda, region.cut_tube)
                {
                    continue;
                }
                // Off the tubes every point is off the cuts, so this cannot fail.
                let d = determinant(ctx, BranchPoint::off(lambda))
                    .expect("grid point off the cuts")
                    .norm();
                out.count += 1;
                if dump_every > 0 && (row * width + col) % dump_every == 0 {
                    out.dump.push((re, im, d));
                }
                if d < out.best {
                    out.best = d;
                    out.at = lambda;
                }
            }
            out
        })
        .collect();

    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
    let mut count = 0;
    let mut dump = GridDump::default();
    for row in rows {
        count += row.count;
        if row.best < best.0 {
            best = (row.best, row.at);
        }
        dump.rows.extend(row.dump);
    }
    let (cut_min, _) = cut_minimum(ctx, region.cut_samples)?;
    let radius = origin_contour_radius(ctx, region.origin_exclusion);
    let zeros = zero_count(ctx, radius, 4096)?;
    let (order, c2) = multiplicity_at_zero(ctx)?;
    let report = RootReport {
        min_abs_D: best.0,
        argmin_re: best.1.re,
        argmin_im: best.1.im,
        min_abs_D_cuts: cut_min,
        sp_certified: best.0 > region.threshold && cut_min > region.threshold && zeros == 2,
        zero_count_at_origin: zeros,
        c2_re: c2.re,
        c2_im: c2.im,
        order,
        grid_points: count,
    };
    Ok((report, dump))
}

/// Radius and node count of the Cauchy integrals at λ = 0.
pub const CAUCHY_RADIUS: f64 = 1e-2;
pub const CAUCHY_NODES: usize = 64;
/// Taylor coefficients at 0 smaller than this count as vanishing.
pub const ORDER_TOLERANCE: f64 = 1e-6;

/// Taylor coefficient `c_n` of `D` at 0 by the trapezoidal Cauchy integral.
pub fn taylor_coefficient(
    ctx: &ResolventContext,
    n: u32,
    radius: f64,
    nodes: usize,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..nodes {
        let z = Complex64::from_polar(radius, TAU * k as f64 / nodes as f64);
        acc += determinant(ctx, BranchPoint::off(z))? / z.powu(n);
    }
    Ok(acc / nodes as f64)
}

/// Order of the zero of `D` at 0 and the coefficient of `λ²`.
pub fn multiplicity_at_zero(ctx: &ResolventContext) -> Result<(u32, Complex64)> {
    if CAUCHY_RADIUS >= ctx.omega.abs() {
        return Err(Error::Domain(format!(
            "Cauchy radius {CAUCHY_RADIUS} reaches the branch point at distance {}",
            ctx.omega.abs()
        )));
    }
    let c2 = taylor_coefficient(ctx, 2, CAUCHY_RADIUS, CAUCHY_NODES)?;
    let mut order = 0;
    for n in 0..=6 {
        let c = taylor_coefficient(ctx, n, CAUCHY_RADIUS, CAUCHY_NODES)?;
        order = n;
        if c.norm() > ORDER_TOLERANCE {
            break;
        }
    }
    Ok((order, c2))
}

/// Closed form of the `λ²` coefficient of `D` at 0 derived by expanding the
/// branches to second order: `(4a + a³ − 2b)/a³`.
pub fn taylor_c2_closed_form(ctx: &ResolventContext) -> f64 {
    let a = ctx.a;
    (4.0 * a + a * a * a - 2.0 * ctx.b) / (a * a * a)
}

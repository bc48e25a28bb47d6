//! Complex fields on a truncated window of ℤ, the difference Laplacian,
//! weighted norms, the real pairing and the symplectic form.
//!
//! A field on the window `[-N, N]` stores one complex value per site. Sites
//! outside the window read as zero (Dirichlet truncation). The real form of a
//! complex value `ψ = ψ₁ + iψ₂` is the pair `(ψ₁, ψ₂)`; multiplication by `i`
//! is the rotation `j`, applied on the fly.

use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A complex-valued function on the window `[-N, N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    half_width: usize,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(half_width: usize) -> Self {
        Self {
            half_width,
            values: vec![Complex64::new(0.0, 0.0); 2 * half_width + 1],
        }
    }

    pub fn from_fn(half_width: usize, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let n = half_width as i64;
        Self {
            half_width,
            values: (-n..=n).map(&mut f).collect(),
        }
    }

    pub fn from_values(half_width: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != 2 * half_width + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for half width {half_width}, got {}",
                2 * half_width + 1,
                values.len()
            )));
        }
        let field = Self { half_width, values };
        field.check_finite()?;
        Ok(field)
    }

    /// Skips the finiteness check; for internal kernels whose callers check.
    pub(crate) fn from_values_unchecked(half_width: usize, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), 2 * half_width + 1);
        Self { half_width, values }
    }

    /// Unit mass at site `x0`.
    pub fn delta(half_width: usize, x0: i64) -> Self {
        let mut f = Self::zeros(half_width);
        f.set(x0, Complex64::new(1.0, 0.0));
        f
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Storage index of site `x`, if it lies in the window.
    pub fn index(&self, x: i64) -> Option<usize> {
        let n = self.half_width as i64;
        (-n..=n).contains(&x).then(|| (x + n) as usize)
    }

    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    /// Value at site `x`; zero outside the window.
    pub fn get(&self, x: i64) -> Complex64 {
        self.index(x)
            .map(|i| self.values[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Sets the value at `x`. Panics when `x` is outside the window.
    pub fn set(&mut self, x: i64, value: Complex64) {
        let i = self
            .index(x)
            .unwrap_or_else(|| panic!("site {x} outside window of half width {}", self.half_width));
        self.values[i] = value;
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.half_width as i64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (i as i64 - n, *v))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .values
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            Some(i) => Err(Error::NonFinite { site: self.site(i) }),
            None => Ok(()),
        }
    }

    pub fn same_window(&self, other: &Field) -> Result<()> {
        if self.half_width != other.half_width {
            return Err(Error::MismatchedWindows {
                left: self.half_width,
                right: other.half_width,
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Field {
        Field {
            half_width: self.half_width,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> Field {
        self.map(|v| v * s)
    }

    /// Multiplication by `e^{iθ}` (the rotation `e^{jθ}` in real form).
    pub fn rotate(&self, theta: f64) -> Field {
        self.scale_complex(Complex64::from_polar(1.0, theta))
    }

    /// Applies `j` sitewise, i.e. multiplies by `i`.
    pub fn apply_j(&self) -> Field {
        self.map(|v| Complex64::new(-v.im, v.re))
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Field) -> Result<()> {
        self.same_window(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// l² norm over the sites with `|x| <= radius`.
    pub fn l2_norm_within(&self, radius: usize) -> f64 {
        let r = radius as i64;
        self.sites()
            .filter(|(x, _)| x.abs() <= r)
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Copies into a window of a different half width, zero-padding or cropping.
    pub fn resized(&self, half_width: usize) -> Field {
        Field::from_fn(half_width, |x| self.get(x))
    }

    /// Real form in the interleaved layout `(ψ₁(−N), ψ₂(−N), ψ₁(−N+1), …)`.
    pub fn to_real_vec(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| [v.re, v.im]).collect()
    }

    pub fn from_real_slice(half_width: usize, real: &[f64]) -> Result<Field> {
        if real.len() != 2 * (2 * half_width + 1) {
            return Err(Error::InvalidArgument(format!(
                "real vector of length {} does not match half width {half_width}",
                real.len()
            )));
        }
        let values = real
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Ok(Field { half_width, values })
    }

    /// Writes the field as CSV with columns `x,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,re,im")?;
        for (x, v) in self.sites() {
            writeln!(out, "{x},{:.17e},{:.17e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }

    /// Reads a field written by [`Field::write_csv`]. Sites must be contiguous
    /// and symmetric about the origin.
    pub fn read_csv<R: BufRead>(input: R, origin: &Path) -> Result<Field> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut rows = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "x,re,im" {
                    return Err(parse_err(1, format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(parse_err(lineno + 1, "expected 3 columns".into()));
            }
            let x: i64 = cols[0]
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno + 1, format!("{e}")))?;
            let re: f64 = cols[1]
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno + 1, format!("{e}")))?;
            let im: f64 = cols[2]
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno + 1, format!("{e}")))?;
            rows.push((x, Complex64::new(re, im)));
        }
        if rows.is_empty() || rows.len() % 2 == 0 {
            return Err(parse_err(
                0,
                format!("{} rows cannot form a symmetric window", rows.len()),
            ));
        }
        let half_width = rows.len() / 2;
        for (i, (x, _)) in rows.iter().enumerate() {
            if *x != i as i64 - half_width as i64 {
                return Err(parse_err(i + 2, format!("site {x} out of order")));
            }
        }
        Field::from_values(half_width, rows.into_iter().map(|(_, v)| v).collect())
    }

    pub fn load_csv(path: &Path) -> Result<Field> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Field::read_csv(file, path)
    }
}

impl Add for &Field {
    type Output = Field;

    fn add(self, rhs: &Field) -> Field {
        assert_eq!(self.half_width, rhs.half_width, "window mismatch");
        Field {
            half_width: self.half_width,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        assert_eq!(self.half_width, rhs.half_width, "window mismatch");
        Field {
            half_width: self.half_width,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &Field {
    type Output = Field;

    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

/// Which `l^p` norm to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormExponent {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Infinity,
}

/// Exponent and weight of `‖u‖ = ‖(1+|x|)^β u(x)‖_{l^p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub p: NormExponent,
    pub beta: f64,
}

impl WeightSpec {
    pub fn new(p: NormExponent, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weight exponent {beta} is not finite"
            )));
        }
        Ok(Self { p, beta })
    }
}

#[inline]
pub fn weight(x: i64, beta: f64) -> f64 {
    (1.0 + x.unsigned_abs() as f64).powf(beta)
}

/// Difference Laplacian `ψ(x+1) − 2ψ(x) + ψ(x−1)` with zero outside the window.
pub fn laplacian(f: &Field) -> Field {
    let v = f.values();
    let n = v.len();
    let zero = Complex64::new(0.0, 0.0);
    let out = (0..n)
        .map(|i| {
            let left = if i > 0 { v[i - 1] } else { zero };
            let right = if i + 1 < n { v[i + 1] } else { zero };
            left + right - v[i] * 2.0
        })
        .collect();
    Field {
        half_width: f.half_width(),
        values: out,
    }
}

pub fn weighted_norm(f: &Field, w: WeightSpec) -> f64 {
    let weighted = f.sites().map(|(x, v)| weight(x, w.beta) * v.norm());
    match w.p {
        NormExponent::One => weighted.sum(),
        NormExponent::Two => weighted.map(|a| a * a).sum::<f64>().sqrt(),
        NormExponent::Infinity => weighted.fold(0.0, f64::max),
    }
}

/// Real l² pairing `Σ (f₁g₁ + f₂g₂)`.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.same_window(g)?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked(f: &Field, g: &Field) -> f64 {
    f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum()
}

/// Symplectic form `Ω(f, g) = Σ (f₁g₂ − f₂g₁)`.
///
/// In terms of the pairing this is `⟨j f, g⟩ = −⟨f, j g⟩`.
pub fn symplectic_form(f: &Field, g: &Field) -> Result<f64> {
    f.same_window(g)?;
    Ok(f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a.re * b.im - a.im * b.re)
        .sum())
}

/// Largest singular value of a real 2×2 matrix.
pub fn spectral_norm_2x2(m: &Matrix2<f64>) -> f64 {
    let fro2 = m.iter().map(|v| v * v).sum::<f64>();
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    ((fro2 + disc.sqrt()) / 2.0).sqrt()
}

/// Real matrix kernel on the window: one 2×2 block per site pair `(x, y)`,
/// stored as a `2(2N+1)` square matrix in the interleaved real layout. Block
/// rows index the component at `x`, block columns the component at `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    half_width: usize,
    matrix: DMatrix<f64>,
}

impl Kernel {
    pub fn new(half_width: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = 2 * (2 * half_width + 1);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "kernel matrix is {}x{}, expected {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { half_width, matrix })
    }

    pub fn zeros(half_width: usize) -> Self {
        let dim = 2 * (2 * half_width + 1);
        Self {
            half_width,
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(half_width: usize) -> Self {
        let dim = 2 * (2 * half_width + 1);
        Self {
            half_width,
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    fn offset(&self, x: i64) -> usize {
        let n = self.half_width as i64;
        assert!((-n..=n).contains(&x), "site {x} outside kernel window");
        2 * (x + n) as usize
    }

    pub fn block(&self, x: i64, y: i64) -> Matrix2<f64> {
        let (r, c) = (self.offset(x), self.offset(y));
        Matrix2::new(
            self.matrix[(r, c)],
            self.matrix[(r, c + 1)],
            self.matrix[(r + 1, c)],
            self.matrix[(r + 1, c + 1)],
        )
    }

    pub fn set_block(&mut self, x: i64, y: i64, block: &Matrix2<f64>) {
        let (r, c) = (self.offset(x), self.offset(y));
        for i in 0..2 {
            for k in 0..2 {
                self.matrix[(r + i, c + k)] = block[(i, k)];
            }
        }
    }

    /// Applies the kernel to a field: `(K f)(x) = Σ_y K(x, y) f(y)`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.half_width() != self.half_width {
            return Err(Error::MismatchedWindows {
                left: self.half_width,
                right: f.half_width(),
            });
        }
        let v = nalgebra::DVector::from_vec(f.to_real_vec());
        let out = &self.matrix * v;
        Field::from_real_slice(self.half_width, out.as_slice())
    }

    /// Writes the kernel as CSV rows `x,y,k11,k12,k21,k22`, skipping zero blocks.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,k11,k12,k21,k22")?;
        let n = self.half_width as i64;
        for x in -n..=n {
            for y in -n..=n {
                let b = self.block(x, y);
                if b.iter().all(|v| *v == 0.0) {
                    continue;
                }
                writeln!(
                    out,
                    "{x},{y},{:.17e},{:.17e},{:.17e},{:.17e}",
                    b[(0, 0)],
                    b[(0, 1)],
                    b[(1, 0)],
                    b[(1, 1)]
                )?;
            }
        }
        Ok(())
    }
}

/// Weighted operator norm `l¹_β → l^∞_{−β}` of a kernel:
/// `sup_{x,y} (1+|x|)^{−β} ‖K(x,y)‖ (1+|y|)^{−β}` with the 2×2 spectral norm
/// on blocks.
pub fn op_norm_weighted(k: &Kernel, beta: f64) -> Result<f64> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "weight exponent {beta} must be >= 0"
        )));
    }
    let n = k.half_width as i64;
    let sites: Vec<i64> = (-n..=n).collect();
    let best = sites
        .par_iter()
        .map(|&x| {
            let wx = weight(x, -beta);
            sites
                .iter()
                .map(|&y| wx * spectral_norm_2x2(&k.block(x, y)) * weight(y, -beta))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn laplacian_of_constant_vanishes_in_interior() {
        let f = Field::from_fn(6, |_| c(1.0, 0.0));
        let l = laplacian(&f);
        for x in -5..=5 {
            assert_eq!(l.get(x), c(0.0, 0.0));
        }
        assert_eq!(l.get(-6), c(-1.0, 0.0));
        assert_eq!(l.get(6), c(-1.0, 0.0));
    }

    #[test]
    fn laplacian_of_delta_is_the_stencil() {
        let l = laplacian(&Field::delta(3, 0));
        let expected = [0.0, 0.0, 1.0, -2.0, 1.0, 0.0, 0.0];
        for (x, e) in (-3..=3).zip(expected) {
            assert_eq!(l.get(x), c(e, 0.0));
        }
    }

    #[test]
    fn laplacian_on_plane_wave() {
        // Δ e^{ikx} = (2cos k − 2) e^{ikx}; at k = π/2 the factor is −2.
        let f = Field::from_fn(8, |x| Complex64::from_polar(1.0, FRAC_PI_2 * x as f64));
        let l = laplacian(&f);
        assert!((l.get(0) - f.get(0) * -2.0).norm() < 1e-15);
        assert!((l.get(3) - f.get(3) * -2.0).norm() < 1e-14);
    }

    #[test]
    fn weighted_norm_examples() {
        let w = |p, beta| WeightSpec::new(p, beta).unwrap();
        assert_eq!(
            weighted_norm(&Field::delta(4, 0), w(NormExponent::One, 2.0)),
            1.0
        );
        assert_eq!(
            weighted_norm(&Field::delta(4, 1), w(NormExponent::One, 2.0)),
            4.0
        );
        assert_eq!(
            weighted_norm(&Field::delta(4, 1), w(NormExponent::Infinity, -2.0)),
            0.25
        );
        assert!(WeightSpec::new(NormExponent::Two, f64::NAN).is_err());
    }

    #[test]
    fn pairing_examples() {
        let d0 = Field::delta(3, 0);
        let d1 = Field::delta(3, 1);
        assert_eq!(inner(&d0, &d0).unwrap(), 1.0);
        assert_eq!(inner(&d0, &d1).unwrap(), 0.0);
        assert_eq!(inner(&d0.apply_j(), &d0).unwrap(), 0.0);
        assert!(matches!(
            inner(&d0, &Field::delta(4, 0)),
            Err(Error::MismatchedWindows { .. })
        ));
    }

    #[test]
    fn symplectic_examples() {
        let d0 = Field::delta(3, 0);
        assert_eq!(symplectic_form(&d0, &d0.apply_j()).unwrap(), 1.0);
        assert!(symplectic_form(&d0, &Field::delta(2, 0)).is_err());
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm_weighted(&Kernel::identity(5), 2.0).unwrap(), 1.0);

        let mut k = Kernel::zeros(5);
        k.set_block(1, 0, &Matrix2::identity());
        assert_eq!(op_norm_weighted(&k, 2.0).unwrap(), 0.25);

        let mut two = Kernel::identity(5);
        two = Kernel::new(5, two.matrix * 2.0).unwrap();
        assert_eq!(op_norm_weighted(&two, 0.0).unwrap(), 2.0);
        assert!(op_norm_weighted(&two, -1.0).is_err());
    }

    #[test]
    fn spectral_norm_matches_rotation_and_scaling() {
        let r = Matrix2::new(0.0, -3.0, 3.0, 0.0);
        assert!((spectral_norm_2x2(&r) - 3.0).abs() < 1e-15);
        let d = Matrix2::new(1.0, 0.0, 0.0, -5.0);
        assert!((spectral_norm_2x2(&d) - 5.0).abs() < 1e-15);
        let m = Matrix2::new(1.0, 2.0, 3.0, 4.0);
        let svd = m.svd(false, false);
        assert!((spectral_norm_2x2(&m) - svd.singular_values.max()).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let f = Field::from_fn(3, |x| c(x as f64 * 0.1, -1.0 / (1.0 + x.abs() as f64)));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = Field::read_csv(std::io::Cursor::new(buf), Path::new("mem")).unwrap();
        assert_eq!(f, g);
        let bad = b"x,re,im\n0,1.0,nan\n".to_vec();
        assert!(Field::read_csv(std::io::Cursor::new(bad), Path::new("mem")).is_err());
    }

    #[test]
    fn kernel_csv_lists_nonzero_blocks() {
        let mut k = Kernel::zeros(2);
        k.set_block(-1, 2, &Matrix2::new(1.0, 2.0, 3.0, 4.0));
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("-1,2,1.0"));
    }

    fn arb_field(half_width: usize) -> impl Strategy<Value = Field> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * half_width + 1).prop_map(move |v| {
            Field::from_values(half_width, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    /// Random field vanishing on the two outermost sites on each side.
    fn arb_interior_field(half_width: usize) -> impl Strategy<Value = Field> {
        arb_field(half_width).prop_map(move |f| {
            let n = half_width as i64;
            Field::from_fn(half_width, |x| {
                if x.abs() >= n - 1 {
                    c(0.0, 0.0)
                } else {
                    f.get(x)
                }
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_is_self_adjoint(f in arb_interior_field(12), g in arb_interior_field(12)) {
            let lhs = inner(&laplacian(&f), &g).unwrap();
            let rhs = inner(&f, &laplacian(&g)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn symplectic_form_is_antisymmetric_and_matches_pairing(f in arb_field(6), g in arb_field(6)) {
            let fg = symplectic_form(&f, &g).unwrap();
            let gf = symplectic_form(&g, &f).unwrap();
            prop_assert!((fg + gf).abs() < 1e-14);
            prop_assert!(symplectic_form(&f, &f).unwrap().abs() < 1e-14);
            prop_assert!((fg - inner(&f.apply_j(), &g).unwrap()).abs() < 1e-13);
            prop_assert!((fg + inner(&f, &g.apply_j()).unwrap()).abs() < 1e-13);
        }

        #[test]
        fn unweighted_two_norm_is_euclidean(f in arb_field(7)) {
            let w = WeightSpec::new(NormExponent::Two, 0.0).unwrap();
            prop_assert!((weighted_norm(&f, w) - f.l2_norm()).abs() < 1e-13);
        }

        #[test]
        fn weighted_sup_bounded_by_weighted_l1(f in arb_field(7), beta in 0.0f64..4.0) {
            let sup = weighted_norm(&f, WeightSpec::new(NormExponent::Infinity, -beta).unwrap());
            let l1 = weighted_norm(&f, WeightSpec::new(NormExponent::One, beta).unwrap());
            prop_assert!(sup <= l1 + 1e-14);
        }
    }
}

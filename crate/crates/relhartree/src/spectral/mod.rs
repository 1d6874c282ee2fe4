//! Periodic pseudo-spectral toolbox on a cubic grid.
//!
//! Conventions, fixed across the crate:
//! - grid points x_i = (i - n/2) h per axis, h = L/n, so the origin is the
//!   grid point with index n/2 and coordinates span [-L/2, L/2);
//! - forward transform F f(s) = integral of f(x) e^{-2 pi i s x} dx,
//!   discretized with weight h^3 at wavevectors s = k/L, k in [-n/2, n/2);
//! - operators act as radial Fourier multipliers of |2 pi s|;
//! - the Coulomb kernel 1/|x| is truncated at radius R = L/2, which makes
//!   the periodic convolution equal to the free-space one for densities
//!   supported in the centered ball of radius L/4.
//!
//! `mass(f)` always means h^3 sum f^2, i.e. the squared L^2 norm.

pub(crate) mod fft;
pub(crate) mod tables;

use crate::error::{Error, Result};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub(crate) use fft::{pair_weighted_sums, repack_multiplied, weighted_power_sums};
pub(crate) use tables::tables;

/// Cubic periodic grid: n points per axis over box length L.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    box_length: f64,
}

impl GridSpec {
    /// n must be even and at least 16 (the centered index convention needs
    /// n/2 integral); the box length positive. Sizes with small prime factors
    /// transform fastest.
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::Grid(format!("n = {n} must be even and >= 16")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Grid(format!("box length {box_length} must be positive")));
        }
        Ok(GridSpec { n, box_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Grid spacing h = L/n.
    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Total number of points n^3.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element h^3.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h * h * h
    }

    /// Coordinate of a single-axis index.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.spacing()
    }

    /// Flat index of (ix, iy, iz), x fastest.
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    /// (ix, iy, iz) of a flat index.
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        (idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n))
    }

    /// Position of a flat index.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.unravel(idx);
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    /// Wavevector 2 pi s of a flat spectral index (same layout as fields).
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.unravel(idx);
        let f = 2.0 * std::f64::consts::PI / self.box_length;
        let signed = |k: usize| {
            if k < self.n / 2 {
                k as f64
            } else {
                k as f64 - self.n as f64
            }
        };
        [f * signed(ix), f * signed(iy), f * signed(iz)]
    }
}

/// Real scalar field sampled on a [`GridSpec`].
#[derive(Clone, Debug)]
pub struct RealField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: GridSpec) -> Self {
        RealField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let n = grid.n;
        let mut values = Vec::with_capacity(grid.len());
        for iz in 0..n {
            let z = grid.coord(iz);
            for iy in 0..n {
                let y = grid.coord(iy);
                for ix in 0..n {
                    values.push(f([grid.coord(ix), y, z]));
                }
            }
        }
        RealField { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "value buffer has {} entries, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// h^3 sum f^2 (squared L^2 norm; "mass" throughout the crate).
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// h^3 sum f g.
    pub fn inner(&self, other: &RealField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// h^3 sum f (plain integral).
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// self += c * other.
    pub fn add_scaled(&mut self, c: f64, other: &RealField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += c * b;
        }
    }

    pub fn abs_in_place(&mut self) {
        for v in &mut self.values {
            *v = v.abs();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Index and value of the maximum (first occurrence in flat order).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }

    /// Trilinear interpolation treating the field as zero outside its box
    /// (appropriate for decaying profiles; avoids periodic-image pickup).
    pub fn sample_decay(&self, point: [f64; 3]) -> f64 {
        let half = 0.5 * self.grid.box_length;
        let hi = half - self.grid.spacing();
        for &c in &point {
            if c < -half || c > hi {
                return 0.0;
            }
        }
        self.sample(point)
    }

    /// Periodic trilinear interpolation at an arbitrary point.
    pub fn sample(&self, point: [f64; 3]) -> f64 {
        let n = self.grid.n;
        let h = self.grid.spacing();
        let half = (n / 2) as f64;
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut w = [0.0f64; 3];
        for a in 0..3 {
            let g = point[a] / h + half; // fractional grid coordinate
            let f = g.floor();
            w[a] = g - f;
            let base = (f as i64).rem_euclid(n as i64) as usize;
            i0[a] = base;
            i1[a] = (base + 1) % n;
        }
        let v = |ix: usize, iy: usize, iz: usize| self.values[self.grid.index(ix, iy, iz)];
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(v(i0[0], i0[1], i0[2]), v(i1[0], i0[1], i0[2]), w[0]);
        let c10 = lerp(v(i0[0], i1[1], i0[2]), v(i1[0], i1[1], i0[2]), w[0]);
        let c01 = lerp(v(i0[0], i0[1], i1[2]), v(i1[0], i0[1], i1[2]), w[0]);
        let c11 = lerp(v(i0[0], i1[1], i1[2]), v(i1[0], i1[1], i1[2]), w[0]);
        lerp(lerp(c00, c10, w[1]), lerp(c01, c11, w[1]), w[2])
    }
}

/// Complex spectrum of a real field under the crate's forward transform.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
}

/// Radial Fourier multipliers, evaluated at |2 pi s|.
pub enum Symbol<'a> {
    /// sqrt(|2 pi s|^2 + m^2): the pseudo-relativistic operator.
    Kinetic { m: f64 },
    /// |2 pi s|: the half-Laplacian quadratic-form symbol.
    HalfLap,
    /// Truncated Coulomb kernel, R = L/2 taken from the field's grid.
    CoulombTruncated,
    /// (sqrt(|2 pi s|^2 + m^2) + 1)^{-1}: the descent preconditioner.
    Preconditioner { m: f64 },
    /// Arbitrary radial symbol; must be finite at every grid wavevector.
    Custom(&'a dyn Fn(f64) -> f64),
}

fn parity_sign(ix: usize, iy: usize, iz: usize) -> f64 {
    if (ix ^ iy ^ iz) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Forward transform with the centered-origin e^{-2 pi i s x} convention.
pub fn transform(f: &RealField) -> ComplexField {
    let grid = f.grid;
    let n = grid.n;
    let t = tables(grid);
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    t.fft.forward(&mut buf);
    // Origin sits at index n/2, which contributes the (-1)^{kx+ky+kz} phase.
    let h3 = grid.cell_volume();
    let mut idx = 0;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                buf[idx] *= h3 * parity_sign(ix, iy, iz);
                idx += 1;
            }
        }
    }
    ComplexField { grid, values: buf }
}

/// Inverse of [`transform`]; the imaginary residue of the reconstruction is
/// discarded (it is rounding-level for spectra of real fields).
pub fn inverse_transform(spec: &ComplexField) -> RealField {
    let grid = spec.grid;
    let n = grid.n;
    let t = tables(grid);
    let mut buf = spec.values.clone();
    let mut idx = 0;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                buf[idx] *= parity_sign(ix, iy, iz);
                idx += 1;
            }
        }
    }
    t.fft.inverse(&mut buf);
    let scale = 1.0 / (grid.box_length.powi(3));
    RealField {
        grid,
        values: buf.iter().map(|z| z.re * scale).collect(),
    }
}

fn symbol_table(grid: GridSpec, symbol: &Symbol) -> Result<SymbolTable> {
    let t = tables(grid);
    Ok(match symbol {
        Symbol::Kinetic { m } => SymbolTable::Shared(t.kinetic(*m)),
        Symbol::HalfLap => SymbolTable::Tables(t, TableKind::HalfLap),
        Symbol::CoulombTruncated => SymbolTable::Tables(t, TableKind::Coulomb),
        Symbol::Preconditioner { m } => SymbolTable::Shared(t.precond(*m)),
        Symbol::Custom(f) => {
            let vals: Vec<f64> = t.halflap.iter().map(|&k| f(k)).collect();
            if let Some(bad) = vals.iter().position(|v| !v.is_finite()) {
                return Err(Error::BadSymbol {
                    at: t.halflap[bad],
                });
            }
            SymbolTable::Owned(vals)
        }
    })
}

enum TableKind {
    HalfLap,
    Coulomb,
}

enum SymbolTable {
    Shared(std::sync::Arc<Vec<f64>>),
    Owned(Vec<f64>),
    Tables(std::sync::Arc<tables::GridTables>, TableKind),
}

impl SymbolTable {
    fn as_slice(&self) -> &[f64] {
        match self {
            SymbolTable::Shared(v) => v,
            SymbolTable::Owned(v) => v,
            SymbolTable::Tables(t, TableKind::HalfLap) => &t.halflap,
            SymbolTable::Tables(t, TableKind::Coulomb) => &t.coulomb,
        }
    }
}

/// Applies a radial Fourier multiplier to a real field.
pub fn apply_multiplier(f: &RealField, symbol: &Symbol) -> Result<RealField> {
    let grid = f.grid;
    let table = symbol_table(grid, symbol)?;
    let w = table.as_slice();
    let t = tables(grid);
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    t.fft.forward(&mut buf);
    let scale = 1.0 / grid.len() as f64;
    for (z, &wk) in buf.iter_mut().zip(w.iter()) {
        *z *= wk * scale;
    }
    t.fft.inverse(&mut buf);
    Ok(RealField {
        grid,
        values: buf.iter().map(|z| z.re).collect(),
    })
}

/// Quadratic form h^3 sum f * (sqrt(-Lap + m^2) f), evaluated spectrally.
pub fn kinetic_form(f: &RealField, m: f64) -> f64 {
    let t = tables(f.grid);
    let kin = t.kinetic(m);
    spectral_power_sum(f, &kin)
}

/// Quadratic form of the half-Laplacian: h^3 sum f * (sqrt(-Lap) f).
pub fn half_lap_form(f: &RealField) -> f64 {
    let t = tables(f.grid);
    spectral_power_sum(f, &t.halflap)
}

/// Squared Sobolev H^{1/2} norm: spectral weight (1 + |2 pi s|), which is
/// exactly mass(f) + half_lap_form(f).
pub fn sobolev_half_norm_sq(f: &RealField) -> f64 {
    let t = tables(f.grid);
    let w: Vec<f64> = t.halflap.iter().map(|&k| 1.0 + k).collect();
    spectral_power_sum(f, &w)
}

fn spectral_power_sum(f: &RealField, w: &[f64]) -> f64 {
    let grid = f.grid;
    let t = tables(grid);
    let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    t.fft.forward(&mut buf);
    let mut sum = 0.0;
    for (z, &wk) in buf.iter().zip(w.iter()) {
        sum += wk * z.norm_sqr();
    }
    sum * grid.cell_volume() / grid.len() as f64
}

/// Fraction of mass within 2h (max-norm) of the box boundary.
pub fn boundary_mass_fraction(f: &RealField) -> f64 {
    let grid = f.grid;
    let n = grid.n;
    // Boundary shell: axis index in {0, 1, n-2, n-1} (coordinate within 2h
    // of either face; the face x = +L/2 sits between indices n-1 and 0).
    let near = |i: usize| i < 2 || i >= n - 2;
    let mut shell = 0.0;
    let mut total = 0.0;
    let mut idx = 0;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let m = f.values[idx] * f.values[idx];
                total += m;
                if near(ix) || near(iy) || near(iz) {
                    shell += m;
                }
                idx += 1;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        shell / total
    }
}

/// Periodic convolution with the truncated 1/|x| kernel (R = L/2).
///
/// Exact free-space Coulomb potential of densities supported in the
/// centered ball of radius L/4; logs a warning when more than 0.1% of the
/// density's mass sits within 2h of the boundary.
pub fn coulomb_potential(rho: &RealField) -> RealField {
    let frac = boundary_mass_fraction(rho);
    if frac > 1e-3 {
        log::warn!(
            "coulomb_potential: {:.2}% of density mass within 2h of the box boundary; \
             truncated-kernel convolution is no longer free-space accurate",
            100.0 * frac
        );
    }
    hartree_potential_raw(rho)
}

/// Same convolution without the boundary diagnostics (hot path).
pub(crate) fn hartree_potential_raw(rho: &RealField) -> RealField {
    let grid = rho.grid;
    let t = tables(grid);
    let mut buf: Vec<Complex64> = rho.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    t.fft.forward(&mut buf);
    let scale = 1.0 / grid.len() as f64;
    for (z, &wk) in buf.iter_mut().zip(t.coulomb.iter()) {
        *z *= wk * scale;
    }
    t.fft.inverse(&mut buf);
    RealField {
        grid,
        values: buf.iter().map(|z| z.re).collect(),
    }
}

/// Symmetric Coulomb bilinear form D(f, g) = h^3 sum (W conv f) g.
///
/// Computed spectrally; exactly symmetric in floating point.
pub fn coulomb_bilinear(f: &RealField, g: &RealField) -> f64 {
    let grid = f.grid;
    debug_assert_eq!(grid, g.grid);
    let t = tables(grid);
    let mut fh: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    t.fft.forward(&mut fh);
    let same = std::ptr::eq(f, g);
    let gh = if same {
        None
    } else {
        let mut gh: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        t.fft.forward(&mut gh);
        Some(gh)
    };
    let mut sum = 0.0;
    match &gh {
        None => {
            for (z, &wk) in fh.iter().zip(t.coulomb.iter()) {
                sum += wk * z.norm_sqr();
            }
        }
        Some(gh) => {
            for ((a, b), &wk) in fh.iter().zip(gh.iter()).zip(t.coulomb.iter()) {
                sum += wk * (a.re * b.re + a.im * b.im);
            }
        }
    }
    sum * grid.cell_volume() / grid.len() as f64
}

/// Circular shift by whole grid cells: out(x) = f(x - shift*h).
pub fn translate(f: &RealField, shift: [i64; 3]) -> RealField {
    let grid = f.grid;
    let n = grid.n as i64;
    let mut out = vec![0.0; grid.len()];
    let wrap = |i: i64| i.rem_euclid(n) as usize;
    for iz in 0..grid.n {
        let sz = wrap(iz as i64 - shift[2]);
        for iy in 0..grid.n {
            let sy = wrap(iy as i64 - shift[1]);
            let dst_row = grid.n * (iy + grid.n * iz);
            let src_row = grid.n * (sy + grid.n * sz);
            for ix in 0..grid.n {
                let sx = wrap(ix as i64 - shift[0]);
                out[ix + dst_row] = f.values[sx + src_row];
            }
        }
    }
    RealField { grid, values: out }
}

/// Mass-preserving dilation (f_lam)(x) = lam^{3/2} f(lam x), sampled onto
/// `target` by trilinear interpolation with zero extension beyond f's box
/// (decaying-profile semantics; no periodic-image pickup).
///
/// With `renormalize` the result is rescaled so its mass matches f's
/// exactly (the continuum dilation preserves it; interpolation does not).
pub fn dilate(f: &RealField, lambda: f64, target: GridSpec, renormalize: bool) -> Result<RealField> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Param(format!("dilation factor {lambda} must be positive")));
    }
    let amp = lambda.powf(1.5);
    let mut out = RealField::from_fn(target, |x| {
        amp * f.sample_decay([lambda * x[0], lambda * x[1], lambda * x[2]])
    });
    if renormalize {
        let m0 = f.mass();
        let m1 = out.mass();
        if m1 > 0.0 {
            out.scale((m0 / m1).sqrt());
        }
    }
    Ok(out)
}

/// Raw spectrum of two real fields packed as z = f + i g.
///
/// One forward transform serves both fields; the methods recover per-field
/// quadratic forms and multiplier applications through Hermitian splitting,
/// without a second transform. Packed arithmetic is not bitwise-symmetric
/// under exchanging f and g, so this type stays internal to iteration hot
/// paths; public results are produced (or cross-checked) by the per-field
/// entry points above.
pub(crate) struct PairSpectrum {
    grid: GridSpec,
    zhat: Vec<Complex64>,
}

/// Packs two real fields into one forward transform.
pub(crate) fn pair_forward(f: &RealField, g: &RealField) -> PairSpectrum {
    debug_assert_eq!(f.grid, g.grid);
    let grid = f.grid;
    let t = tables(grid);
    let mut zhat: Vec<Complex64> = f
        .values
        .iter()
        .zip(g.values.iter())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    t.fft.forward(&mut zhat);
    PairSpectrum { grid, zhat }
}

/// Packs a field together with its pointwise square (f, f^2).
pub(crate) fn pair_forward_with_square(f: &RealField) -> PairSpectrum {
    let grid = f.grid;
    let t = tables(grid);
    let mut zhat: Vec<Complex64> = f.values.iter().map(|&a| Complex64::new(a, a * a)).collect();
    t.fft.forward(&mut zhat);
    PairSpectrum { grid, zhat }
}

impl PairSpectrum {
    /// Split quadratic forms under two symbols at once:
    /// `[(w1: f-form, g-form, cross), (w2: ...)]` where the f-form is
    /// h^3 sum f (w conv f) and the cross form is h^3 sum (w conv f) g.
    pub fn forms2(&self, s1: &Symbol, s2: &Symbol) -> Result<[(f64, f64, f64); 2]> {
        let t1 = symbol_table(self.grid, s1)?;
        let t2 = symbol_table(self.grid, s2)?;
        let (w1, w2) = (t1.as_slice(), t2.as_slice());
        let (p1, p2) = weighted_power_sums(&self.zhat, w1, w2);
        let (t1, t2) = pair_weighted_sums(self.grid.n, &self.zhat, w1, w2);
        let scale = 0.5 * self.grid.cell_volume() / self.grid.len() as f64;
        Ok([
            (scale * (p1 + t1.re), scale * (p1 - t1.re), scale * t1.im),
            (scale * (p2 + t2.re), scale * (p2 - t2.re), scale * t2.im),
        ])
    }

    /// Split quadratic forms under one symbol; see [`Self::forms2`].
    pub fn forms(&self, symbol: &Symbol) -> Result<(f64, f64, f64)> {
        Ok(self.forms2(symbol, symbol)?[0])
    }

    /// Applies one symbol to both packed fields: (w conv f, w conv g).
    ///
    /// A real even symbol maps real fields to real fields, so the packed
    /// result splits exactly into real and imaginary parts.
    pub fn apply(&self, symbol: &Symbol) -> Result<(RealField, RealField)> {
        let table = symbol_table(self.grid, symbol)?;
        let w = table.as_slice();
        let t = tables(self.grid);
        let mut buf: Vec<Complex64> = self
            .zhat
            .iter()
            .zip(w.iter())
            .map(|(&z, &wk)| z * wk)
            .collect();
        t.fft.inverse(&mut buf);
        Ok(self.split_scaled(buf))
    }

    /// Applies `sf` to the f part and `sg` to the g part in one inverse
    /// transform (Hermitian split and repack).
    pub fn apply_split(&self, sf: &Symbol, sg: &Symbol) -> Result<(RealField, RealField)> {
        let tf = symbol_table(self.grid, sf)?;
        let tg = symbol_table(self.grid, sg)?;
        let t = tables(self.grid);
        let mut buf = repack_multiplied(self.grid.n, &self.zhat, tf.as_slice(), tg.as_slice());
        t.fft.inverse(&mut buf);
        Ok(self.split_scaled(buf))
    }

    fn split_scaled(&self, buf: Vec<Complex64>) -> (RealField, RealField) {
        let scale = 1.0 / self.grid.len() as f64;
        let f = RealField {
            grid: self.grid,
            values: buf.iter().map(|z| z.re * scale).collect(),
        };
        let g = RealField {
            grid: self.grid,
            values: buf.iter().map(|z| z.im * scale).collect(),
        };
        (f, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Independent radial quadrature: integral of w(r) rho(r) 4 pi r^2 dr
    /// by Simpson's rule on [0, rmax].
    fn radial_quadrature(rho: impl Fn(f64) -> f64, w: impl Fn(f64) -> f64, rmax: f64) -> f64 {
        let steps = 20_000; // even
        let dr = rmax / steps as f64;
        let f = |r: f64| 4.0 * std::f64::consts::PI * r * r * rho(r) * w(r);
        let mut sum = f(0.0) + f(rmax);
        for i in 1..steps {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += c * f(i as f64 * dr);
        }
        sum * dr / 3.0
    }

    fn gaussian_density(alpha: f64) -> impl Fn(f64) -> f64 {
        let norm = (alpha / std::f64::consts::PI).powf(1.5);
        move |r: f64| norm * (-alpha * r * r).exp()
    }

    #[test]
    fn transform_roundtrip_identity() {
        let grid = GridSpec::new(32, 9.0).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        let mut f = RealField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let back = inverse_transform(&transform(&f));
        let err = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "roundtrip error {err}");
    }

    #[test]
    fn transform_matches_analytic_gaussian() {
        // F[e^{-alpha r^2}](s) = (pi/alpha)^{3/2} e^{-pi^2 |s|^2 / alpha}.
        let grid = GridSpec::new(64, 18.0).unwrap();
        let alpha = 1.3;
        let f = RealField::from_fn(grid, |x| {
            (-alpha * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let spec = transform(&f);
        let pref = (std::f64::consts::PI / alpha).powf(1.5);
        for &idx in &[0usize, 1, 5, 64, 64 * 64, 64 + 64 * 64, 3 + 64 * (2 + 64 * 5)] {
            let k = grid.wavevector(idx);
            // pi^2 |s|^2 / alpha = |2 pi s|^2 / (4 alpha).
            let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let want = pref * (-kk / (4.0 * alpha)).exp();
            let got = spec.values()[idx];
            assert!(
                (got.re - want).abs() < 1e-8 && got.im.abs() < 1e-10,
                "idx {idx}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn plane_wave_is_multiplier_eigenfunction() {
        let grid = GridSpec::new(32, 7.0).unwrap();
        let l = grid.box_length();
        let s = [3.0 / l, 1.0 / l, 2.0 / l];
        let f = RealField::from_fn(grid, |x| {
            (2.0 * std::f64::consts::PI * (s[0] * x[0] + s[1] * x[1] + s[2] * x[2])).cos()
        });
        let kmag = 2.0 * std::f64::consts::PI * (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
        let m = 0.7;
        let want_sym = (kmag * kmag + m * m).sqrt();

        let out = apply_multiplier(&f, &Symbol::Kinetic { m }).unwrap();
        for (a, b) in f.values().iter().zip(out.values()) {
            assert!((b - want_sym * a).abs() < 1e-9);
        }

        // Unit-mass normalized quadratic forms hit the symbol exactly.
        let mass = f.mass();
        assert_relative_eq!(kinetic_form(&f, m) / mass, want_sym, max_relative = 1e-10);
        assert_relative_eq!(half_lap_form(&f) / mass, kmag, max_relative = 1e-10);
    }

    #[test]
    fn parseval_mass_identity() {
        let grid = GridSpec::new(16, 4.0).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let mut f = RealField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let spec = transform(&f);
        let spectral_mass: f64 = spec.values().iter().map(|z| z.norm_sqr()).sum::<f64>()
            / grid.box_length().powi(3);
        assert_relative_eq!(spectral_mass, f.mass(), max_relative = 1e-12);
    }

    #[test]
    fn sobolev_half_norm_equals_mass_plus_halflap() {
        let grid = GridSpec::new(16, 5.0).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let mut f = RealField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let a = sobolev_half_norm_sq(&f);
        let b = f.mass() + half_lap_form(&f);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn custom_symbol_rejects_non_finite() {
        let grid = GridSpec::new(16, 4.0).unwrap();
        let f = RealField::from_fn(grid, |x| (-x[0] * x[0]).exp());
        // 1/|2 pi s| blows up at the zero mode.
        let bad = |k: f64| 1.0 / k;
        match apply_multiplier(&f, &Symbol::Custom(&bad)) {
            Err(Error::BadSymbol { .. }) => {}
            other => panic!("expected BadSymbol, got {other:?}"),
        }
    }

    /// Frozen oracle: potential of the unit-mass Gaussian at the origin is
    /// 2 sqrt(alpha/pi); for alpha = 2 that is 1.5957691216057308. Verified
    /// independently by radial quadrature, then against the spectral path.
    #[test]
    fn coulomb_potential_gaussian_origin_value() {
        let alpha = 2.0;
        let frozen = 1.595_769_121_605_730_8_f64;
        assert_relative_eq!(
            2.0 * (alpha / std::f64::consts::PI).sqrt(),
            frozen,
            max_relative = 1e-15
        );
        let oracle = radial_quadrature(gaussian_density(alpha), |r| 1.0 / r.max(1e-300), 12.0);
        assert_relative_eq!(oracle, frozen, max_relative = 1e-9);

        let grid = GridSpec::new(64, 16.0).unwrap();
        let rho = RealField::from_fn(grid, |x| {
            gaussian_density(alpha)((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
        });
        let phi = coulomb_potential(&rho);
        let origin = grid.index(32, 32, 32);
        let got = phi.values()[origin];
        assert!(
            (got - frozen).abs() / frozen < 5e-3,
            "potential at origin {got}, frozen {frozen}"
        );
    }

    /// Frozen oracle: Coulomb self-energy of the unit-mass Gaussian is
    /// sqrt(2 alpha / pi); for alpha = 2 that is 1.1283791670955126.
    #[test]
    fn coulomb_bilinear_gaussian_self_energy() {
        let alpha = 2.0;
        let frozen = 1.128_379_167_095_512_6_f64;
        assert_relative_eq!(
            (2.0 * alpha / std::f64::consts::PI).sqrt(),
            frozen,
            max_relative = 1e-15
        );
        // Oracle: D = integral of Phi rho with Phi(r) = erf(sqrt(alpha) r)/r,
        // computed by radial quadrature with an erf-free integrand:
        // erf via its own quadrature would be circular, so integrate the
        // exact pair correlation instead:
        // D = 16 pi^2 nn^2 int_0^inf r e^{-a r^2} (int_0^r t^2 e^{-a t^2} dt) dr * 2
        // Simpler: nested Simpson for the inner charge q(r).
        let norm = (alpha / std::f64::consts::PI).powf(1.5);
        let steps = 4000;
        let rmax = 7.0;
        let dr = rmax / steps as f64;
        // inner charge q(r) = int_0^r rho 4 pi t^2 dt (trapezoid, fine at this step count)
        let mut q = vec![0.0f64; steps + 1];
        for i in 1..=steps {
            let t0 = (i - 1) as f64 * dr;
            let t1 = i as f64 * dr;
            let f0 = 4.0 * std::f64::consts::PI * t0 * t0 * norm * (-alpha * t0 * t0).exp();
            let f1 = 4.0 * std::f64::consts::PI * t1 * t1 * norm * (-alpha * t1 * t1).exp();
            q[i] = q[i - 1] + 0.5 * (f0 + f1) * dr;
        }
        // D = 2 * int rho(r) q(r)/r 4 pi r^2 dr? No: D = int rho(x) Phi(x) dx with
        // Phi(r) = q(r)/r + int_r^inf rho 4 pi t dt. Assemble both pieces.
        let mut outer = vec![0.0f64; steps + 1];
        for i in (0..steps).rev() {
            let t0 = i as f64 * dr;
            let t1 = (i + 1) as f64 * dr;
            let f0 = 4.0 * std::f64::consts::PI * t0 * norm * (-alpha * t0 * t0).exp();
            let f1 = 4.0 * std::f64::consts::PI * t1 * norm * (-alpha * t1 * t1).exp();
            outer[i] = outer[i + 1] + 0.5 * (f0 + f1) * dr;
        }
        let mut oracle = 0.0;
        for i in 0..=steps {
            let r = i as f64 * dr;
            let rho_r = norm * (-alpha * r * r).exp();
            let phi = if r == 0.0 {
                outer[0]
            } else {
                q[i] / r + outer[i]
            };
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            oracle += w * 4.0 * std::f64::consts::PI * r * r * rho_r * phi * dr;
        }
        assert_relative_eq!(oracle, frozen, max_relative = 1e-5);

        let grid = GridSpec::new(64, 16.0).unwrap();
        let rho = RealField::from_fn(grid, |x| {
            norm * (-alpha * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let d = coulomb_bilinear(&rho, &rho);
        assert!(
            (d - frozen).abs() / frozen < 5e-3,
            "self energy {d}, frozen {frozen}"
        );
        // Spectral bilinear agrees with h^3 sum Phi rho.
        let phi = coulomb_potential(&rho);
        assert_relative_eq!(d, phi.inner(&rho), max_relative = 1e-9);
    }

    #[test]
    fn coulomb_bilinear_positive_and_cauchy_schwarz() {
        let grid = GridSpec::new(16, 6.0).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let mut f = RealField::zeros(grid);
            let mut g = RealField::zeros(grid);
            for v in f.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            for v in g.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let dff = coulomb_bilinear(&f, &f);
            let dgg = coulomb_bilinear(&g, &g);
            let dfg = coulomb_bilinear(&f, &g);
            assert!(dff >= -1e-10 && dgg >= -1e-10);
            assert!(dfg * dfg <= dff * dgg * (1.0 + 1e-12) + 1e-14);
            // Bitwise symmetry.
            assert_eq!(dfg, coulomb_bilinear(&g, &f));
        }
        // Equality case: f = kappa * g.
        let mut g = RealField::zeros(grid);
        for v in g.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut f = g.clone();
        f.scale(0.37);
        let dfg = coulomb_bilinear(&f, &g);
        let prod = coulomb_bilinear(&f, &f) * coulomb_bilinear(&g, &g);
        assert_relative_eq!(dfg * dfg, prod, max_relative = 1e-12);
    }

    #[test]
    fn translate_is_exact_and_invariant() {
        let grid = GridSpec::new(16, 4.0).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let mut f = RealField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let g = translate(&f, [3, -5, 18]);
        let back = translate(&g, [-3, 5, -18]);
        assert_eq!(f.values(), back.values());
        // Mass is invariant up to summation-order rounding.
        assert_relative_eq!(f.mass(), g.mass(), max_relative = 1e-13);
        assert_relative_eq!(half_lap_form(&f), half_lap_form(&g), max_relative = 1e-12);
        assert_relative_eq!(
            coulomb_bilinear(&f, &f),
            coulomb_bilinear(&g, &g),
            max_relative = 1e-11
        );
    }

    /// Dilation law for the kinetic form: form(dilate(u, lam), m) equals
    /// lam * form(u, m/lam). Oracle: analytic sampling on both grids.
    #[test]
    fn kinetic_form_dilation_scaling() {
        let alpha = 1.0;
        let lam: f64 = 2.0;
        let m = 0.8;
        let grid = GridSpec::new(64, 14.0).unwrap();
        let u = RealField::from_fn(grid, |x| {
            (-alpha * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        // Analytic dilation sampled directly (no interpolation).
        let u_lam = RealField::from_fn(grid, |x| {
            lam.powf(1.5) * (-alpha * lam * lam * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let lhs = kinetic_form(&u_lam, m);
        let rhs = lam * kinetic_form(&u, m / lam);
        // Agreement is limited by the spectral tail of the narrower field.
        assert_relative_eq!(lhs, rhs, max_relative = 1e-4);

        // Interpolated dilation stays within 1%.
        let u_interp = dilate(&u, lam, grid, false).unwrap();
        let lhs2 = kinetic_form(&u_interp, m);
        assert!(
            (lhs2 - rhs).abs() / rhs < 1e-2,
            "interpolated dilation form {lhs2} vs {rhs}"
        );

        // Half-Laplacian form scales by lam (mass-preserving dilation).
        // The |2 pi s| symbol has a kink at s = 0, so lattice sums converge
        // only at O(L^-4) for Gaussians; 14^-4 ~ 3e-4 here.
        assert_relative_eq!(
            half_lap_form(&u_lam),
            lam * half_lap_form(&u),
            max_relative = 2e-3
        );
    }

    #[test]
    fn diamagnetic_and_convexity_inequalities() {
        let grid = GridSpec::new(16, 6.0).unwrap();
        let mut rng = StdRng::seed_from_u64(23);
        for m in [0.0, 0.5, 1.0] {
            for _ in 0..10 {
                let mut f = RealField::zeros(grid);
                for v in f.values_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let mut fa = f.clone();
                fa.abs_in_place();
                let kf = kinetic_form(&f, m);
                let ka = kinetic_form(&fa, m);
                assert!(
                    ka <= kf + 1e-9 * (1.0 + kf.abs()),
                    "diamagnetic violated: |f| form {ka} > {kf}"
                );

                // Convexity of the half-Laplacian under the pointwise
                // Euclidean norm of a pair.
                let mut g = RealField::zeros(grid);
                for v in g.values_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                let mut norm = f.clone();
                for (nv, gv) in norm.values_mut().iter_mut().zip(g.values()) {
                    *nv = (*nv * *nv + gv * gv).sqrt();
                }
                let lhs = half_lap_form(&norm);
                let rhs = half_lap_form(&f) + half_lap_form(&g);
                assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn newton_bound_for_radial_density() {
        // rho = (1 + r^2)^{-4} is radial and integrable; its potential obeys
        // Phi(x) <= mass / |x| pointwise away from the origin.
        let grid = GridSpec::new(64, 20.0).unwrap();
        let rho = RealField::from_fn(grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (1.0 + r2).powi(-4)
        });
        let phi = coulomb_potential(&rho);
        let total = rho.integral();
        let h = grid.spacing();
        for (idx, &p) in phi.values().iter().enumerate() {
            let x = grid.position(idx);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r >= 2.0 * h && r <= 0.25 * grid.box_length() {
                assert!(
                    p <= total / r * (1.0 + 1e-6) + 1e-12,
                    "Newton bound violated at r = {r}: {p} > {}",
                    total / r
                );
            }
        }
    }

    #[test]
    fn boundary_mass_fraction_detects_edge_mass() {
        let grid = GridSpec::new(16, 8.0).unwrap();
        let centered = RealField::from_fn(grid, |x| {
            (-4.0 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        assert!(boundary_mass_fraction(&centered) < 1e-10);
        let edge = RealField::from_fn(grid, |x| {
            (-4.0 * ((x[0] + 4.0) * (x[0] + 4.0) + x[1] * x[1] + x[2] * x[2])).exp()
        });
        assert!(boundary_mass_fraction(&edge) > 0.5);
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(23, 4.0).is_err());
        assert!(GridSpec::new(8, 4.0).is_err());
        assert!(GridSpec::new(24, 4.0).is_ok());
        assert!(GridSpec::new(16, 0.0).is_err());
        assert!(GridSpec::new(16, f64::NAN).is_err());
        assert!(GridSpec::new(16, 4.0).is_ok());
    }

    #[test]
    fn sample_matches_grid_points_and_interpolates() {
        let grid = GridSpec::new(16, 8.0).unwrap();
        let f = RealField::from_fn(grid, |x| x[0] + 2.0 * x[1] - 0.5 * x[2]);
        // On-node sampling is exact.
        let idx = grid.index(4, 7, 9);
        let x = grid.position(idx);
        assert_relative_eq!(f.sample(x), f.values()[idx], max_relative = 1e-13);
        // Trilinear interpolation reproduces affine fields between nodes.
        let p = [0.123, -1.4, 2.25];
        assert_relative_eq!(f.sample(p), p[0] + 2.0 * p[1] - 0.5 * p[2], epsilon = 1e-12);
    }

    #[test]
    fn packed_pair_matches_per_field_paths() {
        let grid = GridSpec::new(16, 7.0).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let mut f = RealField::zeros(grid);
        let mut g = RealField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in g.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }

        let pair = pair_forward(&f, &g);
        let kin = Symbol::Kinetic { m: 0.7 };
        let [(tf, tg, _), (dff, dgg, dfg)] = pair.forms2(&kin, &Symbol::CoulombTruncated).unwrap();
        assert_relative_eq!(tf, kinetic_form(&f, 0.7), max_relative = 1e-12);
        assert_relative_eq!(tg, kinetic_form(&g, 0.7), max_relative = 1e-12);
        assert_relative_eq!(dff, coulomb_bilinear(&f, &f), max_relative = 1e-12);
        assert_relative_eq!(dgg, coulomb_bilinear(&g, &g), max_relative = 1e-12);
        assert_relative_eq!(dfg, coulomb_bilinear(&f, &g), max_relative = 1e-12);

        let tol = 1e-12 * (f.max_abs() + g.max_abs());
        let (kf, kg) = pair.apply(&kin).unwrap();
        let kf_ref = apply_multiplier(&f, &kin).unwrap();
        let kg_ref = apply_multiplier(&g, &kin).unwrap();
        let max_err = |a: &RealField, b: &RealField| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max)
        };
        assert!(max_err(&kf, &kf_ref) < tol);
        assert!(max_err(&kg, &kg_ref) < tol);

        let (hf, wg) = pair
            .apply_split(&Symbol::HalfLap, &Symbol::CoulombTruncated)
            .unwrap();
        let hf_ref = apply_multiplier(&f, &Symbol::HalfLap).unwrap();
        let wg_ref = apply_multiplier(&g, &Symbol::CoulombTruncated).unwrap();
        assert!(max_err(&hf, &hf_ref) < 10.0 * tol);
        assert!(max_err(&wg, &wg_ref) < 10.0 * tol);

        // Square packing feeds the quotient iteration.
        let pos = RealField::from_fn(grid, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let rho = RealField::from_values(grid, pos.values().iter().map(|v| v * v).collect()).unwrap();
        let sq = pair_forward_with_square(&pos);
        let [(a, _, _), (_, c, _)] = sq.forms2(&Symbol::HalfLap, &Symbol::CoulombTruncated).unwrap();
        assert_relative_eq!(a, half_lap_form(&pos), max_relative = 1e-12);
        assert_relative_eq!(c, coulomb_bilinear(&rho, &rho), max_relative = 1e-12);
    }
}

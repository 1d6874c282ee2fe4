//! Three-dimensional complex FFT built from cached 1D rustfft plans.
//!
//! Data layout is x-fastest: `idx = ix + n*(iy + n*iz)`. Transforms here are
//! *unnormalized* (plain DFT sums); callers apply the quadrature weights of
//! the continuum convention.

use once_cell::sync::Lazy;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex};

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));

/// Number of lines gathered per scratch block on the strided axes.
const GATHER_BLOCK: usize = 16;

#[derive(Clone)]
pub(crate) struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = PLANNER.lock().unwrap();
        Fft3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.all_axes(data, &self.fwd);
    }

    /// Unnormalized inverse (no 1/n^3 factor).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.all_axes(data, &self.inv);
    }

    fn all_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "field length != n^3");
        self.axis_x(data, fft);
        self.axis_y(data, fft);
        self.axis_z(data, fft);
    }

    /// Contiguous axis: every row is one transform.
    fn axis_x(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        data.par_chunks_mut(n * n).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, slab| fft.process_with_scratch(slab, scratch),
        );
    }

    /// Stride-n axis: transpose each z-slab in place, run contiguous rows,
    /// transpose back.
    fn axis_y(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        data.par_chunks_mut(n * n).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, slab| {
                transpose_square(slab, n);
                fft.process_with_scratch(slab, scratch);
                transpose_square(slab, n);
            },
        );
    }

    /// Stride-n^2 axis: gather blocks of z-lines into a scratch pane.
    fn axis_z(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let nn = n * n;
        // One task per y-row of lines; lines at fixed y are indexed by x.
        let addr = data.as_mut_ptr() as usize;
        (0..n).into_par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); GATHER_BLOCK * n],
                    vec![Complex64::default(); fft.get_inplace_scratch_len()],
                )
            },
            move |(pane, scratch), iy| {
                // Safety: tasks touch disjoint index sets {x + n*iy + nn*z : all x, z}.
                let data =
                    unsafe { std::slice::from_raw_parts_mut(addr as *mut Complex64, nn * n) };
                let mut ix0 = 0;
                while ix0 < n {
                    let b = GATHER_BLOCK.min(n - ix0);
                    let base = ix0 + n * iy;
                    for iz in 0..n {
                        let src = base + nn * iz;
                        for k in 0..b {
                            pane[k * n + iz] = data[src + k];
                        }
                    }
                    fft.process_with_scratch(&mut pane[..b * n], scratch);
                    for iz in 0..n {
                        let dst = base + nn * iz;
                        for k in 0..b {
                            data[dst + k] = pane[k * n + iz];
                        }
                    }
                    ix0 += b;
                }
            },
        );
    }
}

/// Blocked in-place transpose of an n x n pane.
fn transpose_square(slab: &mut [Complex64], n: usize) {
    const B: usize = 16;
    let mut i0 = 0;
    while i0 < n {
        let imax = (i0 + B).min(n);
        let mut j0 = i0;
        while j0 < n {
            let jmax = (j0 + B).min(n);
            for i in i0..imax {
                let jstart = if j0 > i { j0 } else { i + 1 };
                for j in jstart..jmax {
                    slab.swap(i * n + j, j * n + i);
                }
            }
            j0 += B;
        }
        i0 += B;
    }
}

/// Negated-frequency index: k -> -k (mod n) on each axis.
#[inline]
pub(crate) fn neg_index(n: usize, ix: usize, iy: usize, iz: usize) -> usize {
    let nx = if ix == 0 { 0 } else { n - ix };
    let ny = if iy == 0 { 0 } else { n - iy };
    let nz = if iz == 0 { 0 } else { n - iz };
    nx + n * (ny + n * nz)
}

/// Sum over all wavevectors of w1(k) |z(k)|^2 and w2(k) |z(k)|^2 in one pass.
pub(crate) fn weighted_power_sums(zhat: &[Complex64], w1: &[f64], w2: &[f64]) -> (f64, f64) {
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (z, (a, b)) in zhat.iter().zip(w1.iter().zip(w2.iter())) {
        let p = z.norm_sqr();
        s1 += a * p;
        s2 += b * p;
    }
    (s1, s2)
}

/// Sums T_w = sum_k w(k) z(k) z(-k) for two weight tables in one pass.
///
/// For z packing two real fields (z = f + i g in real space) this yields the
/// split quadratic forms: Re T = sum w (|F f|^2 - |F g|^2) and
/// Im T = 2 sum w Re(F f conj(F g)), each per unit (unnormalized) spectrum.
pub(crate) fn pair_weighted_sums(
    n: usize,
    zhat: &[Complex64],
    w1: &[f64],
    w2: &[f64],
) -> (Complex64, Complex64) {
    let mut t1 = Complex64::default();
    let mut t2 = Complex64::default();
    for iz in 0..n {
        for iy in 0..n {
            let row = n * (iy + n * iz);
            for ix in 0..n {
                let idx = ix + row;
                let prod = zhat[idx] * zhat[neg_index(n, ix, iy, iz)];
                t1 += w1[idx] * prod;
                t2 += w2[idx] * prod;
            }
        }
    }
    (t1, t2)
}

/// Unpacks z = F[f] + i F[g] (f, g real) and rebuilds spectra
/// out(k) = wf(k) * F[f](k) + i * wg(k) * F[g](k), so that one inverse
/// transform returns (wf conv f) + i (wg conv g).
pub(crate) fn repack_multiplied(
    n: usize,
    zhat: &[Complex64],
    wf: &[f64],
    wg: &[f64],
) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); zhat.len()];
    for iz in 0..n {
        for iy in 0..n {
            let row = n * (iy + n * iz);
            for ix in 0..n {
                let idx = ix + row;
                let nidx = neg_index(n, ix, iy, iz);
                let z = zhat[idx];
                let zn = zhat[nidx].conj();
                // Hermitian part = F[f], anti-Hermitian part / i = F[g].
                let fh = 0.5 * (z + zn);
                let gh = Complex64::new(0.0, -0.5) * (z - zn);
                out[idx] = wf[idx] * fh + Complex64::new(0.0, 1.0) * (wg[idx] * gh);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft_1d(input: &[Complex64]) -> Vec<Complex64> {
        let n = input.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                        input[j] * Complex64::new(ang.cos(), ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_along_each_axis() {
        let n = 8;
        let mut rng = 1234567u64;
        let mut randf = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|_| Complex64::new(randf(), randf()))
            .collect();

        let fft = Fft3::new(n);
        let mut got = data.clone();
        fft.forward(&mut got);

        // Naive separable 3D DFT.
        let mut want = data;
        for axis in 0..3 {
            let mut next = want.clone();
            for a in 0..n {
                for b in 0..n {
                    let line: Vec<Complex64> = (0..n)
                        .map(|c| {
                            let (ix, iy, iz) = match axis {
                                0 => (c, a, b),
                                1 => (a, c, b),
                                _ => (a, b, c),
                            };
                            want[ix + n * (iy + n * iz)]
                        })
                        .collect();
                    let tline = naive_dft_1d(&line);
                    for c in 0..n {
                        let (ix, iy, iz) = match axis {
                            0 => (c, a, b),
                            1 => (a, c, b),
                            _ => (a, b, c),
                        };
                        next[ix + n * (iy + n * iz)] = tline[c];
                    }
                }
            }
            want = next;
        }

        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-9 * (1.0 + w.norm()), "{g} vs {w}");
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let n = 16;
        let data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i % 97) as f64 * 0.01, (i % 31) as f64 * 0.03))
            .collect();
        let fft = Fft3::new(n);
        let mut buf = data.clone();
        fft.forward(&mut buf);
        fft.inverse(&mut buf);
        let scale = 1.0 / (n * n * n) as f64;
        for (b, d) in buf.iter().zip(data.iter()) {
            assert!((b * scale - d).norm() < 1e-12);
        }
    }

    #[test]
    fn neg_index_involution() {
        let n = 8;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let idx = ix + n * (iy + n * iz);
                    let ni = neg_index(n, ix, iy, iz);
                    let (nx, ny, nz) = (ni % n, (ni / n) % n, ni / (n * n));
                    assert_eq!(neg_index(n, nx, ny, nz), idx);
                }
            }
        }
    }
}

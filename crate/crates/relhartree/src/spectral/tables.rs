//! Cached per-grid symbol tables.
//!
//! All multipliers used by the solver are radial functions of |2 pi s| with
//! s = k/L and integer frequencies k in [-n/2, n/2) per axis. Tables are
//! built once per grid and shared; the cache keeps a handful of grids (a
//! run touches at most two or three).

use super::fft::Fft3;
use super::GridSpec;
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

pub(crate) struct GridTables {
    pub fft: Fft3,
    /// |2 pi s|^2 per index.
    pub kmag2: Vec<f64>,
    /// |2 pi s| per index (the half-Laplacian symbol).
    pub halflap: Vec<f64>,
    /// Truncated Coulomb symbol 4 pi (1 - cos(|2 pi s| R)) / |2 pi s|^2, R = L/2.
    pub coulomb: Vec<f64>,
    kinetic: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    precond: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl GridTables {
    fn build(grid: GridSpec) -> Self {
        let n = grid.n();
        let len = grid.len();
        let two_pi_over_l = 2.0 * PI / grid.box_length();
        let radius = 0.5 * grid.box_length();

        // Signed frequency squared per axis index.
        let axis2: Vec<f64> = (0..n)
            .map(|k| {
                let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                let w = signed * two_pi_over_l;
                w * w
            })
            .collect();

        let mut kmag2 = vec![0.0; len];
        let mut halflap = vec![0.0; len];
        let mut coulomb = vec![0.0; len];
        let mut idx = 0;
        for iz in 0..n {
            for iy in 0..n {
                let yz = axis2[iy] + axis2[iz];
                for ix in 0..n {
                    let k2 = axis2[ix] + yz;
                    let k = k2.sqrt();
                    kmag2[idx] = k2;
                    halflap[idx] = k;
                    coulomb[idx] = coulomb_symbol(k, radius);
                    idx += 1;
                }
            }
        }

        GridTables {
            fft: Fft3::new(n),
            kmag2,
            halflap,
            coulomb,
            kinetic: Mutex::new(HashMap::new()),
            precond: Mutex::new(HashMap::new()),
        }
    }

    /// sqrt(|2 pi s|^2 + m^2) table.
    pub fn kinetic(&self, m: f64) -> Arc<Vec<f64>> {
        let mut map = self.kinetic.lock().unwrap();
        map.entry(m.to_bits())
            .or_insert_with(|| Arc::new(self.kmag2.iter().map(|&k2| (k2 + m * m).sqrt()).collect()))
            .clone()
    }

    /// (sqrt(|2 pi s|^2 + m^2) + 1)^{-1} table.
    pub fn precond(&self, m: f64) -> Arc<Vec<f64>> {
        let mut map = self.precond.lock().unwrap();
        map.entry(m.to_bits())
            .or_insert_with(|| {
                Arc::new(
                    self.kmag2
                        .iter()
                        .map(|&k2| 1.0 / ((k2 + m * m).sqrt() + 1.0))
                        .collect(),
                )
            })
            .clone()
    }
}

/// Fourier symbol of the 1/|x| kernel truncated to |x| <= radius.
///
/// The zero mode is the analytic limit 2 pi radius^2; elsewhere
/// 4 pi (1 - cos(k radius)) / k^2 with k = |2 pi s|. For k*radius below
/// 1e-4 the cosine difference is evaluated by series to avoid cancellation.
pub(crate) fn coulomb_symbol(k: f64, radius: f64) -> f64 {
    let kr = k * radius;
    if kr < 1e-4 {
        // 4 pi (1 - cos kr)/k^2 = 2 pi r^2 (1 - (kr)^2/12 + ...)
        2.0 * PI * radius * radius * (1.0 - kr * kr / 12.0)
    } else {
        4.0 * PI * (1.0 - kr.cos()) / (k * k)
    }
}

#[derive(PartialEq, Eq, Hash, Clone, Copy)]
struct GridKey {
    n: usize,
    box_bits: u64,
}

/// Small LRU of grid tables; a run alternates between at most a few grids.
static TABLE_CACHE: Lazy<Mutex<Vec<(GridKey, Arc<GridTables>)>>> =
    Lazy::new(|| Mutex::new(Vec::new()));
const CACHE_CAP: usize = 4;

pub(crate) fn tables(grid: GridSpec) -> Arc<GridTables> {
    let key = GridKey {
        n: grid.n(),
        box_bits: grid.box_length().to_bits(),
    };
    let mut cache = TABLE_CACHE.lock().unwrap();
    if let Some(pos) = cache.iter().position(|(k, _)| *k == key) {
        let entry = cache.remove(pos);
        let arc = entry.1.clone();
        cache.push(entry);
        return arc;
    }
    let built = Arc::new(GridTables::build(grid));
    if cache.len() >= CACHE_CAP {
        cache.remove(0);
    }
    cache.push((key, built.clone()));
    built
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_symbol_zero_mode_and_series_match() {
        let r = 7.5;
        assert!((coulomb_symbol(0.0, r) - 2.0 * PI * r * r).abs() < 1e-12);
        // Series and direct branches agree near the crossover.
        let k = 1.0001e-4 / r;
        let direct = 4.0 * PI * (1.0 - (k * r).cos()) / (k * k);
        assert!((coulomb_symbol(k, r) - direct).abs() / direct < 1e-10);
    }

    #[test]
    fn kinetic_reduces_to_halflap_at_m_zero() {
        let grid = GridSpec::new(16, 4.0).unwrap();
        let t = tables(grid);
        let kin = t.kinetic(0.0);
        for (a, b) in kin.iter().zip(t.halflap.iter()) {
            assert_eq!(a, b);
        }
    }
}

//! Spatial layout of SBSs around the typical receiver.
//!
//! Everything downstream depends only on the horizontal distance between an
//! SBS and the receiver's ground projection, so point sets store distances.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet<T> {
    pub distances: Vec<T>,
}

impl<T: Real> PointSet<T> {
    pub fn new(distances: Vec<T>) -> Self {
        Self { distances }
    }

    pub fn empty() -> Self {
        Self { distances: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.distances.iter().copied()
    }

    /// Index and value of the smallest distance.
    pub fn nearest(&self) -> Option<(usize, T)> {
        self.distances
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, r)| match best {
                Some((_, b)) if b <= r => best,
                _ => Some((i, r)),
            })
    }
}

/// `kappa` points uniform in the disk of radius `r_c`: distances have density `2r/r_c²`.
pub fn sample_bpp_disk<T: Real, R: Rng + ?Sized>(kappa: usize, r_c: T, rng: &mut R) -> PointSet<T> {
    sample_ring(kappa, T::zero(), r_c, rng)
}

/// Homogeneous PPP restricted to the annulus `r_in <= r <= r_out`.
///
/// `intensity` is in points per m².
pub fn sample_ppp_annulus<T: Real, R: Rng + ?Sized>(
    intensity: T,
    r_in: T,
    r_out: T,
    rng: &mut R,
) -> PointSet<T> {
    let mean = (intensity * T::PI() * (r_out * r_out - r_in * r_in)).as_f64();
    let count = poisson_count(mean, rng);
    sample_ring(count, r_in, r_out, rng)
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

fn sample_ring<T: Real, R: Rng + ?Sized>(count: usize, r_in: T, r_out: T, rng: &mut R) -> PointSet<T> {
    let lo = r_in * r_in;
    let span = r_out * r_out - lo;
    let distances = (0..count)
        .map(|_| {
            let u = T::lit(rng.random::<f64>());
            (lo + span * u).sqrt()
        })
        .collect();
    PointSet { distances }
}

/// Straight-line distance between an SBS at horizontal offset `r` and the receiver.
#[inline]
pub fn link_distance<T: Real>(r: T, h_ue: T, h_sbs: T) -> T {
    let dh = h_ue - h_sbs;
    (r * r + dh * dh).sqrt()
}

//! Network layout, large-scale fading and small-scale channel draws.

use ndarray::{Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{NetworkConfig, PathLossParams};

/// Distances below this are clamped before path loss is evaluated (m).
pub const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub aps: Vec<Point>,
    pub users: Vec<Point>,
}

fn uniform_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Point {
    Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Drops APs and users independently and uniformly over the square.
pub fn place_entities<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Layout {
    let side = config.area_side;
    let aps = (0..config.num_aps).map(|_| uniform_point(side, rng)).collect();
    let users = (0..config.num_users).map(|_| uniform_point(side, rng)).collect();
    Layout { aps, users }
}

/// Distance on the torus obtained by wrapping the square at its edges.
pub fn wraparound_distance(a: Point, b: Point, side: f64) -> f64 {
    let wrap = |d: f64| {
        let d = d.abs();
        d.min(side - d)
    };
    wrap(a.x - b.x).hypot(wrap(a.y - b.y))
}

/// Three-slope path loss in dB (negative: it is a gain).
pub fn path_loss_db(d: f64, params: &PathLossParams) -> f64 {
    let d = d.max(MIN_DISTANCE);
    let PathLossParams { d0, d1, l_const_db } = *params;
    let km = |x: f64| (x / 1000.0).log10();
    if d <= d0 {
        -l_const_db - 15.0 * km(d1) - 20.0 * km(d0)
    } else if d <= d1 {
        -l_const_db - 15.0 * km(d1) - 20.0 * km(d)
    } else {
        -l_const_db - 35.0 * km(d)
    }
}

/// Linear large-scale gain from path loss plus a shadowing term in dB.
///
/// Shadowing only applies beyond the second breakpoint; closer links ignore `shadow_db`.
pub fn large_scale_coefficient(d: f64, shadow_db: f64, params: &PathLossParams) -> f64 {
    let shadow = if d > params.d1 { shadow_db } else { 0.0 };
    10f64.powf((path_loss_db(d, params) + shadow) / 10.0)
}

/// β_mk for every AP–user pair (rows are APs, columns users), linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleMatrix(Array2<f64>);

impl LargeScaleMatrix {
    /// Panics if any entry is negative or non-finite.
    pub fn new(beta: Array2<f64>) -> Self {
        assert!(
            beta.iter().all(|b| b.is_finite() && *b >= 0.0),
            "large-scale coefficients must be finite and non-negative"
        );
        Self(beta)
    }

    pub fn num_aps(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.0[[m, k]]
    }

    /// Coefficients of user `k` toward every AP.
    pub fn user(&self, k: usize) -> ArrayView1<'_, f64> {
        self.0.column(k)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(&self.0 * c)
    }
}

/// Path loss with uncorrelated log-normal shadowing for every AP–user pair.
pub fn draw_large_scale<R: Rng + ?Sized>(
    layout: &Layout,
    config: &NetworkConfig,
    rng: &mut R,
) -> LargeScaleMatrix {
    let shadow = Normal::new(0.0, config.shadowing_std_db).expect("validated std");
    let mut beta = Array2::zeros((layout.aps.len(), layout.users.len()));
    for (m, ap) in layout.aps.iter().enumerate() {
        for (k, ue) in layout.users.iter().enumerate() {
            let d = wraparound_distance(*ap, *ue, config.area_side);
            // Draw unconditionally so the stream does not depend on geometry.
            let s = shadow.sample(rng);
            beta[[m, k]] = large_scale_coefficient(d, s, &config.path_loss);
        }
    }
    LargeScaleMatrix::new(beta)
}

/// Per-antenna channel coefficients g_mk = sqrt(β_mk)·h_mk, indexed `[m, k, antenna]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g: Array3<Complex64>,
}

impl ChannelRealization {
    pub fn num_aps(&self) -> usize {
        self.g.dim().0
    }

    pub fn num_users(&self) -> usize {
        self.g.dim().1
    }

    pub fn antennas(&self) -> usize {
        self.g.dim().2
    }

    pub fn link(&self, m: usize, k: usize) -> ArrayView1<'_, Complex64> {
        self.g.slice(ndarray::s![m, k, ..])
    }
}

/// One circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rayleigh small-scale fading scaled by the large-scale gains.
pub fn draw_channel<R: Rng + ?Sized>(
    beta: &LargeScaleMatrix,
    antennas: usize,
    rng: &mut R,
) -> ChannelRealization {
    let (m, k) = (beta.num_aps(), beta.num_users());
    let mut g = Array3::zeros((m, k, antennas));
    for ((mi, ki, _), v) in g.indexed_iter_mut() {
        *v = complex_normal(rng) * beta.get(mi, ki).sqrt();
    }
    ChannelRealization { g }
}

//! Uplink pilot training and MMSE channel estimation.

use ndarray::{Array1, Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rand::Rng;

use crate::config::PilotMode;
use crate::geometry::{complex_normal, ChannelRealization, LargeScaleMatrix};

/// Orthonormal pilot sequences, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    pub psi: Array2<Complex64>,
}

impl PilotBook {
    pub fn len(&self) -> usize {
        self.psi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sequence(&self, index: usize) -> ArrayView1<'_, Complex64> {
        self.psi.column(index)
    }
}

/// Normalized DFT basis of size `tau_p`.
pub fn generate_pilot_book(tau_p: usize) -> PilotBook {
    assert!(tau_p >= 1, "pilot length must be at least 1");
    let scale = 1.0 / (tau_p as f64).sqrt();
    let psi = Array2::from_shape_fn((tau_p, tau_p), |(n, j)| {
        // reduce the phase index first so large products stay exact
        let idx = (n * j) % tau_p;
        Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * idx as f64 / tau_p as f64)
    });
    PilotBook { psi }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    pilot_of: Vec<usize>,
    tau_p: usize,
}

impl PilotAssignment {
    /// Panics if an index is outside `[0, tau_p)`.
    pub fn new(pilot_of: Vec<usize>, tau_p: usize) -> Self {
        assert!(pilot_of.iter().all(|&p| p < tau_p), "pilot index out of range");
        Self { pilot_of, tau_p }
    }

    pub fn pilot(&self, k: usize) -> usize {
        self.pilot_of[k]
    }

    pub fn pilots(&self) -> &[usize] {
        &self.pilot_of
    }

    pub fn num_users(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    /// |ψ_kᴴψ_j|², which for an orthonormal book is 1 when the users share a pilot and 0 otherwise.
    #[inline]
    pub fn overlap(&self, k: usize, j: usize) -> f64 {
        if self.pilot_of[k] == self.pilot_of[j] {
            1.0
        } else {
            0.0
        }
    }

    /// Users assigned the same pilot as `k`, including `k` itself.
    pub fn co_pilot_users(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.pilot_of[k];
        self.pilot_of
            .iter()
            .enumerate()
            .filter(move |(_, q)| **q == p)
            .map(|(j, _)| j)
    }

    /// Number of unordered user pairs sharing a pilot.
    pub fn collisions(&self) -> usize {
        let mut counts = vec![0usize; self.tau_p];
        for &p in &self.pilot_of {
            counts[p] += 1;
        }
        counts.iter().map(|c| c * c.saturating_sub(1) / 2).sum()
    }
}

/// Every user picks a pilot independently and uniformly, with replacement.
pub fn assign_pilots_random<R: Rng + ?Sized>(k: usize, tau_p: usize, rng: &mut R) -> PilotAssignment {
    let pilot_of = (0..k).map(|_| rng.random_range(0..tau_p)).collect();
    PilotAssignment::new(pilot_of, tau_p)
}

/// Every user picks uniformly among the currently least-used pilots.
pub fn assign_pilots_distinct<R: Rng + ?Sized>(k: usize, tau_p: usize, rng: &mut R) -> PilotAssignment {
    let mut usage = vec![0usize; tau_p];
    let mut pilot_of = Vec::with_capacity(k);
    for _ in 0..k {
        let least = *usage.iter().min().expect("tau_p >= 1");
        let candidates: Vec<usize> = (0..tau_p).filter(|&p| usage[p] == least).collect();
        let p = candidates[rng.random_range(0..candidates.len())];
        usage[p] += 1;
        pilot_of.push(p);
    }
    PilotAssignment::new(pilot_of, tau_p)
}

pub fn assign_pilots<R: Rng + ?Sized>(
    mode: PilotMode,
    k: usize,
    tau_p: usize,
    rng: &mut R,
) -> PilotAssignment {
    match mode {
        PilotMode::Random => assign_pilots_random(k, tau_p, rng),
        PilotMode::Distinct => assign_pilots_distinct(k, tau_p, rng),
    }
}

/// Per-user pilot powers (W).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPowerVector(pub Vec<f64>);

impl PilotPowerVector {
    pub fn constant(k: usize, value: f64) -> Self {
        Self(vec![value; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn within(&self, min: f64, max: f64) -> bool {
        self.0.iter().all(|q| *q >= min && *q <= max)
    }
}

/// Received pilot block at every AP, indexed `[m, antenna, symbol]`.
pub fn received_pilot_matrix<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    assignment: &PilotAssignment,
    q_p: &[f64],
    book: &PilotBook,
    noise_power: f64,
    rng: &mut R,
) -> Array3<Complex64> {
    let (m_count, _, l_count) = channel.g.dim();
    let tau_p = book.len();
    let noise_sd = noise_power.sqrt();
    let mut y = Array3::zeros((m_count, l_count, tau_p));
    for m in 0..m_count {
        for (k, q) in q_p.iter().enumerate() {
            let amp = (tau_p as f64 * q).sqrt();
            let psi = book.sequence(assignment.pilot(k));
            for l in 0..l_count {
                let g = channel.g[[m, k, l]] * amp;
                for t in 0..tau_p {
                    y[[m, l, t]] += g * psi[t].conj();
                }
            }
        }
    }
    if noise_sd > 0.0 {
        for v in y.iter_mut() {
            *v += complex_normal(rng) * noise_sd;
        }
    }
    y
}

/// y_mk = Y_m ψ_k for a single AP's L×τ_p block.
pub fn project_pilot(y_m: ndarray::ArrayView2<'_, Complex64>, psi_k: ArrayView1<'_, Complex64>) -> Array1<Complex64> {
    y_m.dot(&psi_k)
}

/// Variance of each entry of the projected pilot signal.
pub fn zeta(
    m: usize,
    k: usize,
    beta: &LargeScaleMatrix,
    q_p: &[f64],
    assignment: &PilotAssignment,
    noise_power: f64,
) -> f64 {
    let tau_p = assignment.tau_p() as f64;
    let contamination: f64 = assignment
        .co_pilot_users(k)
        .map(|j| q_p[j] * beta.get(m, j))
        .sum();
    tau_p * contamination + noise_power
}

/// Mean-square magnitude of the MMSE estimate per antenna.
#[inline]
pub fn estimate_power(beta_mk: f64, q_k: f64, tau_p: usize, zeta_mk: f64) -> f64 {
    tau_p as f64 * q_k * beta_mk * beta_mk / zeta_mk
}

/// MMSE estimate of g_mk from its projected pilot, with its per-antenna mean square.
pub fn mmse_estimate(
    y_mk: ArrayView1<'_, Complex64>,
    beta_mk: f64,
    q_k: f64,
    tau_p: usize,
    zeta_mk: f64,
) -> (Array1<Complex64>, f64) {
    assert!(zeta_mk > 0.0, "zeta must be positive");
    let c = (tau_p as f64 * q_k).sqrt() * beta_mk / zeta_mk;
    (y_mk.mapv(|v| v * c), estimate_power(beta_mk, q_k, tau_p, zeta_mk))
}

/// Channel estimates and their statistics for every AP–user pair.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    /// Indexed `[m, k, antenna]`.
    pub g_hat: Array3<Complex64>,
    pub zeta: Array2<f64>,
    pub gamma: Array2<f64>,
}

/// Statistics only, no channel draw needed.
pub fn estimate_statistics(
    beta: &LargeScaleMatrix,
    q_p: &[f64],
    assignment: &PilotAssignment,
    noise_power: f64,
) -> (Array2<f64>, Array2<f64>) {
    let (m_count, k_count) = (beta.num_aps(), beta.num_users());
    let tau_p = assignment.tau_p();
    let zeta_m = Array2::from_shape_fn((m_count, k_count), |(m, k)| {
        zeta(m, k, beta, q_p, assignment, noise_power)
    });
    let gamma = Array2::from_shape_fn((m_count, k_count), |(m, k)| {
        estimate_power(beta.get(m, k), q_p[k], tau_p, zeta_m[[m, k]])
    });
    (zeta_m, gamma)
}

/// Runs the pilot phase once and MMSE-estimates every link.
pub fn estimate_channels<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    beta: &LargeScaleMatrix,
    assignment: &PilotAssignment,
    q_p: &[f64],
    book: &PilotBook,
    noise_power: f64,
    rng: &mut R,
) -> EstimateSet {
    let (m_count, k_count, l_count) = channel.g.dim();
    let y = received_pilot_matrix(channel, assignment, q_p, book, noise_power, rng);
    let (zeta_m, gamma) = estimate_statistics(beta, q_p, assignment, noise_power);
    let mut g_hat = Array3::zeros((m_count, k_count, l_count));
    for m in 0..m_count {
        let y_m = y.slice(ndarray::s![m, .., ..]);
        for k in 0..k_count {
            let y_mk = project_pilot(y_m, book.sequence(assignment.pilot(k)));
            let (est, _) = mmse_estimate(y_mk.view(), beta.get(m, k), q_p[k], assignment.tau_p(), zeta_m[[m, k]]);
            g_hat.slice_mut(ndarray::s![m, k, ..]).assign(&est);
        }
    }
    EstimateSet {
        g_hat,
        zeta: zeta_m,
        gamma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::draw_channel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram_error(book: &PilotBook) -> f64 {
        let g = book.psi.t().mapv(|z| z.conj()).dot(&book.psi);
        let mut worst: f64 = 0.0;
        for ((i, j), v) in g.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - Complex64::new(target, 0.0)).norm());
        }
        worst
    }

    #[test]
    fn pilot_books_are_orthonormal() {
        let one = generate_pilot_book(1);
        assert_eq!(one.psi[[0, 0]], Complex64::new(1.0, 0.0));
        for tau in [1, 5, 8, 10, 15, 64] {
            assert!(gram_error(&generate_pilot_book(tau)) < 1e-12, "tau={tau}");
        }
        assert_eq!(generate_pilot_book(10).len(), 10);
    }

    #[test]
    fn random_assignment_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = assign_pilots_random(15, 15, &mut rng);
        assert!(a.pilots().iter().all(|&p| p < 15));
        let b = assign_pilots_random(30, 10, &mut rng);
        assert!(b.collisions() >= 20);
        let c1 = assign_pilots_random(15, 10, &mut ChaCha8Rng::seed_from_u64(4));
        let c2 = assign_pilots_random(15, 10, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(c1, c2);
    }

    #[test]
    fn random_assignment_reuses_even_when_pilots_suffice() {
        // Over many draws K = tau_p = 15 must produce a collision somewhere.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let any = (0..20).any(|_| assign_pilots_random(15, 15, &mut rng).collisions() > 0);
        assert!(any);
    }

    #[test]
    fn distinct_assignment_is_a_permutation_when_possible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = assign_pilots_distinct(15, 15, &mut rng);
        assert_eq!(a.collisions(), 0);
        let b = assign_pilots_distinct(30, 10, &mut rng);
        // three users per pilot
        assert_eq!(b.collisions(), 10 * 3);
    }

    fn single_link(g: Complex64) -> ChannelRealization {
        let mut arr = Array3::zeros((1, 1, 1));
        arr[[0, 0, 0]] = g;
        ChannelRealization { g: arr }
    }

    #[test]
    fn noiseless_single_user_pilot_block() {
        let g = Complex64::new(0.3, -1.2);
        let ch = single_link(g);
        let book = generate_pilot_book(4);
        let a = PilotAssignment::new(vec![2], 4);
        let y = received_pilot_matrix(&ch, &a, &[1.0], &book, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        for t in 0..4 {
            let expect = g * 2.0 * book.psi[[t, 2]].conj();
            assert!((y[[0, 0, t]] - expect).norm() < 1e-15);
        }
        // projection, then MMSE with sigma2 = 0 recovers the channel exactly
        let y_mk = project_pilot(y.slice(ndarray::s![0, .., ..]), book.sequence(2));
        let beta = LargeScaleMatrix::new(Array2::from_elem((1, 1), 0.7));
        let z = zeta(0, 0, &beta, &[1.0], &a, 0.0);
        let (est, gamma) = mmse_estimate(y_mk.view(), 0.7, 1.0, 4, z);
        assert!((est[0] - g).norm() < 1e-12);
        assert!((gamma - 0.7).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_users_separate_after_projection() {
        let mut arr = Array3::zeros((1, 2, 2));
        arr[[0, 0, 0]] = Complex64::new(1.0, 2.0);
        arr[[0, 0, 1]] = Complex64::new(-1.0, 0.5);
        arr[[0, 1, 0]] = Complex64::new(0.2, 0.0);
        arr[[0, 1, 1]] = Complex64::new(0.0, -3.0);
        let ch = ChannelRealization { g: arr.clone() };
        let book = generate_pilot_book(3);
        let a = PilotAssignment::new(vec![0, 2], 3);
        let q = [0.5, 2.0];
        let y = received_pilot_matrix(&ch, &a, &q, &book, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        let y_m = y.slice(ndarray::s![0, .., ..]);
        for (k, &p) in [0usize, 2].iter().enumerate() {
            let y_mk = project_pilot(y_m, book.sequence(p));
            let amp = (3.0 * q[k]).sqrt();
            for l in 0..2 {
                assert!((y_mk[l] - arr[[0, k, l]] * amp).norm() < 1e-12);
            }
        }
        // the unused pilot sees nothing
        let y_free = project_pilot(y_m, book.sequence(1));
        assert!(y_free.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn pure_noise_variance() {
        let ch = ChannelRealization { g: Array3::zeros((1, 1, 10)) };
        let book = generate_pilot_book(10);
        let a = PilotAssignment::new(vec![0], 10);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut acc = 0.0;
        let mut n = 0usize;
        let mut proj = 0.0;
        let mut n_proj = 0usize;
        while n < 100_000 {
            let y = received_pilot_matrix(&ch, &a, &[0.0], &book, 1.0, &mut rng);
            acc += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            n += y.len();
            let y_mk = project_pilot(y.slice(ndarray::s![0, .., ..]), book.sequence(0));
            proj += y_mk.iter().map(|v| v.norm_sqr()).sum::<f64>();
            n_proj += y_mk.len();
        }
        assert!((acc / n as f64 - 1.0).abs() < 0.01);
        assert!((proj / n_proj as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn zeta_examples() {
        let beta = LargeScaleMatrix::new(Array2::from_elem((1, 2), 1.0));
        let single = PilotAssignment::new(vec![0], 10);
        let b1 = LargeScaleMatrix::new(Array2::from_elem((1, 1), 1.0));
        assert!((zeta(0, 0, &b1, &[0.1], &single, 1.0) - 2.0).abs() < 1e-15);
        // user 1 on another pilot adds nothing
        let split = PilotAssignment::new(vec![0, 1], 10);
        assert!((zeta(0, 0, &beta, &[0.1, 5.0], &split, 1.0) - 2.0).abs() < 1e-15);
        let shared = PilotAssignment::new(vec![0, 0], 10);
        assert!((zeta(0, 0, &beta, &[0.1, 0.2], &shared, 1.0) - 4.0).abs() < 1e-12);
        assert_eq!(zeta(0, 0, &beta, &[0.0, 0.0], &shared, 0.25), 0.25);
    }

    #[test]
    fn zero_pilot_power_gives_zero_estimate() {
        let y = Array1::from_elem(3, Complex64::new(1.0, 1.0));
        let (est, gamma) = mmse_estimate(y.view(), 1.0, 0.0, 5, 1.0);
        assert!(est.iter().all(|v| v.norm() == 0.0));
        assert_eq!(gamma, 0.0);
    }

    #[test]
    fn gamma_bounded_and_converges() {
        let beta = LargeScaleMatrix::new(Array2::from_elem((1, 1), 0.8));
        let a = PilotAssignment::new(vec![0], 4);
        let mut prev = 0.0;
        for sigma2 in [1.0, 0.1, 0.01, 0.0] {
            let z = zeta(0, 0, &beta, &[0.5], &a, sigma2);
            let g = estimate_power(0.8, 0.5, 4, z);
            assert!(g <= 0.8 + 1e-15);
            assert!(g > prev);
            prev = g;
        }
        assert!((prev - 0.8).abs() < 1e-15);
    }

    #[test]
    fn projection_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = Array2::from_shape_fn((3, 5), |_| complex_normal(&mut rng));
        let book = generate_pilot_book(5);
        let c = Complex64::new(2.5, -0.5);
        let a = project_pilot(y.view(), book.sequence(3)).mapv(|v| v * c);
        let b = project_pilot(y.mapv(|v| v * c).view(), book.sequence(3));
        for (x, z) in a.iter().zip(b.iter()) {
            assert!((x - z).norm() < 1e-14);
        }
    }

    #[test]
    fn estimate_set_shapes() {
        let beta = LargeScaleMatrix::new(Array2::from_elem((3, 2), 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = draw_channel(&beta, 2, &mut rng);
        let a = PilotAssignment::new(vec![0, 0], 2);
        let est = estimate_channels(&ch, &beta, &a, &[1.0, 1.0], &generate_pilot_book(2), 0.1, &mut rng);
        assert_eq!(est.g_hat.dim(), (3, 2, 2));
        assert!(est.zeta.iter().all(|z| *z >= 0.1));
        assert!(est.gamma.iter().zip(beta.as_array().iter()).all(|(g, b)| *g <= *b));
    }
}

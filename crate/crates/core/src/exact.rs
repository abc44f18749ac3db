//! Brute-force truncated sums for both models on tiny boxes.
//!
//! Heights are enumerated over `[-K_x, K_x]` per non-origin site with the
//! origin pinned at zero; charges over `[-K_m, K_m]` per non-origin site
//! with the origin charge fixed by neutrality. Enumeration runs on a
//! mixed-radix odometer with incremental energy updates, so each state
//! costs O(1) amortized plus one table lookup (heights) or one `exp`
//! (charges). These sums are the ground truth the Monte Carlo samplers are
//! validated against.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::{compute_green, GreenTable};
use crate::lattice::TorusLattice;
use crate::scalar::Real;
use crate::stats::KahanSum;

/// Default cap on Boltzmann-factor evaluations per enumeration.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// Cutoffs for the truncated sums plus the enumeration budget guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncationSpec {
    /// Heights restricted to `[-height_cutoff, height_cutoff]`.
    pub height_cutoff: u32,
    /// Free charges restricted to `[-charge_cutoff, charge_cutoff]`.
    pub charge_cutoff: u32,
    /// Maximum number of Boltzmann-factor evaluations per sum.
    pub budget: u128,
}

impl TruncationSpec {
    pub fn new(height_cutoff: u32, charge_cutoff: u32) -> Self {
        TruncationSpec { height_cutoff, charge_cutoff, budget: DEFAULT_BUDGET }
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    /// Number of height states for an `n x n` box (saturates on overflow).
    pub fn height_states(&self, n: usize) -> u128 {
        states(self.height_cutoff, n)
    }

    /// Number of charge states for an `n x n` box (saturates on overflow).
    pub fn charge_states(&self, n: usize) -> u128 {
        states(self.charge_cutoff, n)
    }

    fn admit(&self, required: u128) -> Result<()> {
        if required > self.budget {
            Err(Error::BudgetExceeded { required, budget: self.budget })
        } else {
            Ok(())
        }
    }

    /// Gaussian-comparison bound on the height mass discarded by the
    /// cutoff, relative to the partition sum. An estimate for reporting,
    /// not a proven-tight bound.
    pub fn dg_tail_estimate<F: Real>(&self, n: usize, beta: F) -> Result<F> {
        let green = compute_green::<F>(n)?;
        let lam = lambda_min_reduced(&green);
        Ok(theta_product_tail(beta * lam, self.height_cutoff, n * n - 1))
    }

    /// Same bound for the charge sum, using the smallest eigenvalue of the
    /// Green quadratic form on the neutral sector.
    pub fn cg_tail_estimate<F: Real>(&self, n: usize, beta_star: F) -> Result<F> {
        if n < 2 {
            return Err(Error::SideTooSmall { got: n, min: 2 });
        }
        let pi2 = F::PI() * F::PI();
        let a = pi2 * beta_star * smallest_green_eigenvalue::<F>(n);
        Ok(theta_product_tail(a, self.charge_cutoff, n * n - 1))
    }
}

fn states(cutoff: u32, n: usize) -> u128 {
    let free = (n * n - 1) as u32;
    (2 * cutoff as u128 + 1).checked_pow(free).unwrap_or(u128::MAX)
}

/// `theta^m - theta_K^m` where `theta(a) = sum_t exp(-a t^2)`: an upper
/// bound on the weight outside the cutoff box when the energy dominates
/// `a |x|^2` coordinatewise.
fn theta_product_tail<F: Real>(a: F, cutoff: u32, m: usize) -> F {
    let mut full = KahanSum::new();
    full.add(F::one());
    let mut truncated = F::one();
    let mut t = 1u64;
    loop {
        let tf = F::from_f64_lossy(t as f64);
        let term = (-a * tf * tf).exp();
        let two_terms = term + term;
        full.add(two_terms);
        if t <= cutoff as u64 {
            truncated += two_terms;
        }
        if term <= F::from_f64_lossy(1e-300) || t > 100_000 {
            break;
        }
        t += 1;
    }
    let theta = full.value();
    let mf = F::from_usize_lossy(m);
    let ratio = (truncated / theta).powf(mf);
    theta.powf(mf) * (F::one() - ratio)
}

/// Smallest eigenvalue of the reduced (origin-deleted) negative Laplacian,
/// through power iteration on its inverse assembled from the Green table.
fn lambda_min_reduced<F: Real>(green: &GreenTable<F>) -> F {
    let count = green.side() * green.side();
    let red = count - 1;
    let quarter = F::from_f64_lossy(0.25);
    let mut b = vec![F::zero(); red * red];
    for i in 1..count {
        for j in 1..count {
            // +1/4 (G_ij - G_i0 - G_0j + G_00): inverse of -Delta_red.
            let v = quarter
                * (green.between(i, j) - green.between(i, 0) - green.between(0, j)
                    + green.between(0, 0));
            b[(i - 1) * red + (j - 1)] = v;
        }
    }
    let mut v = vec![F::from_usize_lossy(red).sqrt().recip(); red];
    let mut rayleigh = F::zero();
    for _ in 0..500 {
        let mut w = vec![F::zero(); red];
        for r in 0..red {
            let mut s = F::zero();
            for c in 0..red {
                s += b[r * red + c] * v[c];
            }
            w[r] = s;
        }
        let new_rayleigh = v.iter().zip(&w).map(|(&a, &b)| a * b).sum::<F>();
        let norm = w.iter().map(|&x| x * x).sum::<F>().sqrt();
        for (slot, &x) in v.iter_mut().zip(&w) {
            *slot = x / norm;
        }
        let done = (new_rayleigh - rayleigh).abs()
            <= F::from_f64_lossy(1e-14) * new_rayleigh.abs();
        rayleigh = new_rayleigh;
        if done {
            break;
        }
    }
    rayleigh.recip()
}

/// Smallest eigenvalue of the Green form on the neutral sector:
/// `1 / max_p (1 - lambda_p)`, in closed form from the spectrum.
fn smallest_green_eigenvalue<F: Real>(n: usize) -> F {
    let two_pi = F::PI() + F::PI();
    let nf = F::from_usize_lossy(n);
    let half = F::from_f64_lossy(0.5);
    let mut max_gap = F::zero();
    for p1 in 0..n {
        for p2 in 0..n {
            if p1 == 0 && p2 == 0 {
                continue;
            }
            let c1 = (two_pi * F::from_usize_lossy(p1) / nf).cos();
            let c2 = (two_pi * F::from_usize_lossy(p2) / nf).cos();
            let gap = F::one() - (c1 + c2) * half;
            if gap > max_gap {
                max_gap = gap;
            }
        }
    }
    max_gap.recip()
}

/// Odometer scan over pinned height fields; calls `visit(weight, heights)`
/// once per state. The energy is maintained incrementally and weights come
/// from a lookup table over the (bounded, integer) energy range.
fn scan_heights<F: Real>(
    n: usize,
    beta: F,
    cutoff: u32,
    trunc: &TruncationSpec,
    mut visit: impl FnMut(F, &[i32]),
) -> Result<()> {
    if beta <= F::zero() {
        return Err(Error::NonPositiveTemperature(beta.to_f64().unwrap_or(f64::NAN)));
    }
    let lat = TorusLattice::new(n)?;
    trunc.admit(states(cutoff, n))?;
    let count = lat.vertex_count();
    let k = cutoff as i32;
    let h_max = (2 * count as i64) * (2 * k as i64) * (2 * k as i64);
    let weights: Vec<F> = (0..=h_max)
        .map(|h| (-beta * F::from_f64_lossy(h as f64)).exp())
        .collect();
    let mut heights = vec![-k; count];
    heights[0] = 0;
    let mut energy = lat.hamiltonian(&heights);
    let neighbors: Vec<[usize; 4]> = (0..count).map(|v| lat.neighbors(v).unwrap()).collect();
    let change = |heights: &mut Vec<i32>, energy: &mut i64, site: usize, new: i32| {
        let old = heights[site];
        let mut delta = 0i64;
        for &u in &neighbors[site] {
            let xu = heights[u];
            let dn = (new - xu) as i64;
            let d0 = (old - xu) as i64;
            delta += dn * dn - d0 * d0;
        }
        heights[site] = new;
        *energy += delta;
    };
    loop {
        visit(weights[energy as usize], &heights);
        let mut digit = 1usize;
        loop {
            if digit >= count {
                return Ok(());
            }
            if heights[digit] < k {
                let next = heights[digit] + 1;
                change(&mut heights, &mut energy, digit, next);
                break;
            }
            change(&mut heights, &mut energy, digit, -k);
            digit += 1;
        }
    }
}

/// Odometer scan over neutral charge fields; calls
/// `visit(weight, charges, potentials)` per state. Potentials and the
/// quadratic form are updated incrementally and refreshed from scratch
/// periodically to stop drift.
fn scan_charges<F: Real>(
    green: &GreenTable<F>,
    beta_star: F,
    cutoff: u32,
    trunc: &TruncationSpec,
    mut visit: impl FnMut(F, &[i64], &[F]),
) -> Result<()> {
    if beta_star <= F::zero() {
        return Err(Error::NonPositiveTemperature(beta_star.to_f64().unwrap_or(f64::NAN)));
    }
    let n = green.side();
    let count = n * n;
    trunc.admit(states(cutoff, n))?;
    let k = cutoff as i64;
    let pi2_beta = F::PI() * F::PI() * beta_star;
    let mut charges = vec![-k; count];
    charges[0] = k * (count as i64 - 1); // neutrality
    let mut phi = green.potentials(&charges);
    let mut quad = charges_quadratic(&charges, &phi);
    let g00 = green.between(0, 0);
    let refresh_every = 1u64 << 16;
    let mut since_refresh = 0u64;
    // Moving free site s by delta (and the origin by -delta) shifts the
    // quadratic form by 2 delta (phi_s - phi_0) + 2 delta^2 (g(0) - g(s)).
    let two = F::one() + F::one();
    loop {
        visit((-pi2_beta * quad).exp(), &charges, &phi);
        let mut digit = 1usize;
        loop {
            if digit >= count {
                return Ok(());
            }
            let old = charges[digit];
            let new = if old < k { old + 1 } else { -k };
            let delta = new - old;
            let df = F::from_f64_lossy(delta as f64);
            quad += two * df * (phi[digit] - phi[0])
                + two * df * df * (g00 - green.between(0, digit));
            charges[digit] = new;
            charges[0] -= delta;
            for (v, slot) in phi.iter_mut().enumerate() {
                *slot += df * (green.between(v, digit) - green.between(v, 0));
            }
            if old < k {
                break;
            }
            digit += 1;
        }
        since_refresh += 1;
        if since_refresh == refresh_every {
            since_refresh = 0;
            phi = green.potentials(&charges);
            quad = charges_quadratic(&charges, &phi);
        }
    }
}

fn charges_quadratic<F: Real>(charges: &[i64], phi: &[F]) -> F {
    charges
        .iter()
        .zip(phi)
        .filter(|(&m, _)| m != 0)
        .map(|(&m, &p)| F::from_f64_lossy(m as f64) * p)
        .sum()
}

/// Truncated partition sum of the pinned height model:
/// monotone nondecreasing in the cutoff, and exactly 1 at cutoff 0.
pub fn dg_partition<F: Real>(n: usize, beta: F, trunc: &TruncationSpec) -> Result<F> {
    let mut z = KahanSum::new();
    scan_heights(n, beta, trunc.height_cutoff, trunc, |w, _| z.add(w))?;
    Ok(z.value())
}

/// Truncated expectation of the squared height gap `(x_i - x_j)^2`.
pub fn dg_mean_sq_diff<F: Real>(
    n: usize,
    beta: F,
    i: usize,
    j: usize,
    trunc: &TruncationSpec,
) -> Result<F> {
    let lat = TorusLattice::new(n)?;
    if !lat.contains(i) {
        return Err(Error::VertexOutOfRange { index: i, side: n, count: lat.vertex_count() });
    }
    if !lat.contains(j) {
        return Err(Error::VertexOutOfRange { index: j, side: n, count: lat.vertex_count() });
    }
    let mut z = KahanSum::new();
    let mut num = KahanSum::new();
    scan_heights(n, beta, trunc.height_cutoff, trunc, |w, x| {
        z.add(w);
        let d = (x[i] - x[j]) as i64;
        num.add(F::from_f64_lossy((d * d) as f64) * w);
    })?;
    Ok(num.value() / z.value())
}

/// Truncated partition sum of the neutral charge model.
pub fn cg_partition<F: Real>(n: usize, beta_star: F, trunc: &TruncationSpec) -> Result<F> {
    let green = compute_green::<F>(n)?;
    let mut z = KahanSum::new();
    scan_charges(&green, beta_star, trunc.charge_cutoff, trunc, |w, _, _| z.add(w))?;
    Ok(z.value())
}

/// Truncated second moment of the voltage between `i` and `j` under the
/// charge model (its first moment vanishes by symmetry).
pub fn cg_voltage_second_moment<F: Real>(
    n: usize,
    beta_star: F,
    i: usize,
    j: usize,
    trunc: &TruncationSpec,
) -> Result<F> {
    let green = compute_green::<F>(n)?;
    let count = n * n;
    if i >= count {
        return Err(Error::VertexOutOfRange { index: i, side: n, count });
    }
    if j >= count {
        return Err(Error::VertexOutOfRange { index: j, side: n, count });
    }
    let two_pi = F::PI() + F::PI();
    let mut z = KahanSum::new();
    let mut num = KahanSum::new();
    scan_charges(&green, beta_star, trunc.charge_cutoff, trunc, |w, _, phi| {
        z.add(w);
        let u = two_pi * (phi[i] - phi[j]);
        num.add(u * u * w);
    })?;
    Ok(num.value() / z.value())
}

/// Both sides of the partition-sum duality at one temperature.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport<F> {
    pub n: usize,
    pub beta: F,
    pub beta_star: F,
    pub height_cutoff: u32,
    pub charge_cutoff: u32,
    /// Truncated height partition sum (left side).
    pub dg_partition: F,
    /// `(pi/beta)^{(N^2-1)/2} det(-Delta_red)^{-1/2}`.
    pub prefactor: F,
    /// Truncated charge partition sum.
    pub cg_partition: F,
    /// `prefactor * cg_partition` (right side).
    pub rhs: F,
    pub relative_gap: F,
    pub height_tail: F,
    pub charge_tail: F,
}

/// Evaluate the duality equation by brute force: the height partition sum
/// at `beta` against the prefactor times the charge partition sum at
/// `beta* = 1/(4 beta)`.
pub fn duality_report<F: Real>(n: usize, beta: F, trunc: &TruncationSpec) -> Result<DualityReport<F>> {
    let lat = TorusLattice::new(n)?;
    if beta <= F::zero() {
        return Err(Error::NonPositiveTemperature(beta.to_f64().unwrap_or(f64::NAN)));
    }
    let beta_star = (F::from_f64_lossy(4.0) * beta).recip();
    let lhs = dg_partition(n, beta, trunc)?;
    let zstar = cg_partition(n, beta_star, trunc)?;
    let count = lat.vertex_count();
    let red = count - 1;
    let mut neg_lap = vec![F::zero(); red * red];
    for k in 1..count {
        for (j, c) in lat.laplacian_row(k)? {
            if j != 0 {
                neg_lap[(k - 1) * red + (j - 1)] = F::from_f64_lossy(-c as f64);
            }
        }
    }
    let chol = crate::linalg::Cholesky::factor(&neg_lap, red)?;
    let half = F::from_f64_lossy(0.5);
    let log_pref = F::from_usize_lossy(red) * half * (F::PI() / beta).ln() - half * chol.log_det();
    let prefactor = log_pref.exp();
    let rhs = prefactor * zstar;
    let relative_gap = ((lhs - rhs) / lhs).abs();
    Ok(DualityReport {
        n,
        beta,
        beta_star,
        height_cutoff: trunc.height_cutoff,
        charge_cutoff: trunc.charge_cutoff,
        dg_partition: lhs,
        prefactor,
        cg_partition: zstar,
        rhs,
        relative_gap,
        height_tail: trunc.dg_tail_estimate(n, beta)?,
        charge_tail: trunc.cg_tail_estimate(n, beta_star)?,
    })
}

/// The exact cross-model moment identity evaluated by truncated sums:
/// `E*[U_ij^2] = (4/b*) (G_ii - G_ij) - (4/b*^2) E_beta[(x_i-x_j)^2]`
/// with `beta = 1/(4 b*)`. The residual is pure truncation error.
#[derive(Debug, Clone, Serialize)]
pub struct CrossIdentityReport<F> {
    pub n: usize,
    pub beta_star: F,
    pub beta: F,
    pub i: usize,
    pub j: usize,
    pub height_cutoff: u32,
    pub charge_cutoff: u32,
    /// Truncated `E*[U_ij^2]` from the charge sum.
    pub voltage_second_moment: F,
    /// Truncated `E_beta[(x_i - x_j)^2]` from the height sum.
    pub height_moment: F,
    /// `(4/b*)(G_ii - G_ij)`.
    pub coulomb_term: F,
    pub residual: F,
    pub height_tail: F,
    pub charge_tail: F,
}

pub fn cross_identity_report<F: Real>(
    n: usize,
    beta_star: F,
    i: usize,
    j: usize,
    trunc: &TruncationSpec,
) -> Result<CrossIdentityReport<F>> {
    if beta_star <= F::zero() {
        return Err(Error::NonPositiveTemperature(beta_star.to_f64().unwrap_or(f64::NAN)));
    }
    let four = F::from_f64_lossy(4.0);
    let beta = (four * beta_star).recip();
    let second_moment = cg_voltage_second_moment(n, beta_star, i, j, trunc)?;
    let height_moment = dg_mean_sq_diff(n, beta, i, j, trunc)?;
    let green = compute_green::<F>(n)?;
    let coulomb_term = four / beta_star * green.potential_diff(i, j);
    let residual = second_moment - coulomb_term + four / (beta_star * beta_star) * height_moment;
    Ok(CrossIdentityReport {
        n,
        beta_star,
        beta,
        i,
        j,
        height_cutoff: trunc.height_cutoff,
        charge_cutoff: trunc.charge_cutoff,
        voltage_second_moment: second_moment,
        height_moment,
        coulomb_term,
        residual,
        height_tail: trunc.dg_tail_estimate(n, beta)?,
        charge_tail: trunc.cg_tail_estimate(n, beta_star)?,
    })
}

/// Absolute residual of the cross-model identity.
pub fn cross_identity_residual<F: Real>(
    n: usize,
    beta_star: F,
    i: usize,
    j: usize,
    trunc: &TruncationSpec,
) -> Result<F> {
    Ok(cross_identity_report(n, beta_star, i, j, trunc)?.residual.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cutoff_sums_are_one() {
        let t = TruncationSpec::new(0, 0);
        assert_eq!(dg_partition::<f64>(2, 1.0, &t).unwrap(), 1.0);
        assert_eq!(cg_partition::<f64>(2, 0.25, &t).unwrap(), 1.0);
        assert_eq!(dg_partition::<f64>(3, 0.5, &t).unwrap(), 1.0);
    }

    #[test]
    fn budget_guard_trips() {
        let t = TruncationSpec::new(6, 4).with_budget(100);
        match dg_partition::<f64>(3, 1.0, &t) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!(required, 13u128.pow(8));
                assert_eq!(budget, 100);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
        assert!(cg_partition::<f64>(3, 0.25, &t).is_err());
    }

    #[test]
    fn rejects_nonpositive_temperatures() {
        let t = TruncationSpec::new(1, 1);
        assert!(dg_partition::<f64>(2, 0.0, &t).is_err());
        assert!(cg_partition::<f64>(2, -0.5, &t).is_err());
    }

    #[test]
    fn dg_partition_monotone_in_cutoff() {
        let mut prev = 0.0f64;
        for kx in 0..=4 {
            let z = dg_partition::<f64>(2, 0.5, &TruncationSpec::new(kx, 0)).unwrap();
            assert!(z >= prev);
            prev = z;
        }
    }

    #[test]
    fn dg_partition_n2_cutoff_stable() {
        let z4 = dg_partition::<f64>(2, 1.0, &TruncationSpec::new(4, 0)).unwrap();
        let z6 = dg_partition::<f64>(2, 1.0, &TruncationSpec::new(6, 0)).unwrap();
        assert!(((z6 - z4) / z6).abs() < 1e-12, "gap {:e}", ((z6 - z4) / z6).abs());
    }

    #[test]
    fn dg_partition_n2_brute_force_crosscheck() {
        // Fully independent reference: three nested loops, energy summed
        // from the edge list from scratch.
        let lat = TorusLattice::new(2).unwrap();
        let beta = 0.7f64;
        let k = 3i32;
        let mut z = 0.0;
        for x1 in -k..=k {
            for x2 in -k..=k {
                for x3 in -k..=k {
                    let heights = [0, x1, x2, x3];
                    z += (-beta * lat.hamiltonian(&heights) as f64).exp();
                }
            }
        }
        let ours = dg_partition::<f64>(2, beta, &TruncationSpec::new(3, 0)).unwrap();
        assert!((z - ours).abs() < 1e-12 * z);
    }

    #[test]
    fn cg_partition_n2_brute_force_crosscheck() {
        let green = compute_green::<f64>(2).unwrap();
        let beta_star = 0.25f64;
        let k = 3i64;
        let mut z = 0.0;
        for m1 in -k..=k {
            for m2 in -k..=k {
                for m3 in -k..=k {
                    let m = [-(m1 + m2 + m3), m1, m2, m3];
                    let mf: Vec<f64> = m.iter().map(|&v| v as f64).collect();
                    let q = green.quadratic_form(&mf);
                    z += (-std::f64::consts::PI.powi(2) * beta_star * q).exp();
                }
            }
        }
        let ours = cg_partition::<f64>(2, beta_star, &TruncationSpec::new(0, 3)).unwrap();
        assert!((z - ours).abs() < 1e-12 * z);
    }

    #[test]
    fn cg_partition_n3_cutoff_stable() {
        let z2 = cg_partition::<f64>(3, 0.25, &TruncationSpec::new(0, 2)).unwrap();
        let z3 = cg_partition::<f64>(3, 0.25, &TruncationSpec::new(0, 3)).unwrap();
        assert!(z3 >= z2);
        assert!(((z3 - z2) / z3).abs() < 1e-8, "gap {:e}", ((z3 - z2) / z3).abs());
    }

    #[test]
    fn energy_parametrizations_agree_per_config() {
        // Green quadratic form against the reduced-inverse form for random
        // neutral charge vectors.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 3usize;
        let green = compute_green::<f64>(n).unwrap();
        let count = n * n;
        for _ in 0..200 {
            let mut m: Vec<f64> = (0..count).map(|_| rng.gen_range(-3i64..=3) as f64).collect();
            let free_sum: f64 = m[1..].iter().sum();
            m[0] = -free_sum;
            let via_green = -0.25 * green.quadratic_form(&m);
            let mut via_reduced = 0.0;
            for i in 1..count {
                for j in 1..count {
                    via_reduced += m[i] * green.reduced_inverse_entry(i, j).unwrap() * m[j];
                }
            }
            if via_green.abs() > 1e-12 {
                assert!(((via_green - via_reduced) / via_green).abs() < 1e-10);
            } else {
                assert!((via_green - via_reduced).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dg_moment_zero_for_same_site() {
        let t = TruncationSpec::new(2, 0);
        let m = dg_mean_sq_diff::<f64>(2, 1.0, 1, 1, &t).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn dg_moment_below_uniform_bound_at_low_temperature() {
        let t = TruncationSpec::new(2, 0);
        let m = dg_mean_sq_diff::<f64>(3, 5.0, 1, 2, &t).unwrap();
        let bound = crate::contours::mean_sq_diff_bound(5.0f64).unwrap();
        assert!(m <= bound, "moment {m:e} over bound {bound:e}");
    }

    #[test]
    fn duality_n2() {
        // The headline exactness check at machine precision scale.
        let t = TruncationSpec::new(6, 4);
        for beta in [0.5f64, 1.0] {
            let rep = duality_report::<f64>(2, beta, &t).unwrap();
            assert!(rep.relative_gap < 1e-6, "beta={beta}: gap {:e}", rep.relative_gap);
            assert!((rep.beta_star - 1.0 / (4.0 * beta)).abs() < 1e-15);
        }
    }

    #[test]
    fn duality_gap_shrinks_with_cutoffs() {
        let coarse = duality_report::<f64>(2, 0.35, &TruncationSpec::new(1, 1)).unwrap();
        let fine = duality_report::<f64>(2, 0.35, &TruncationSpec::new(3, 3)).unwrap();
        assert!(fine.relative_gap <= coarse.relative_gap + 1e-12);
    }

    #[test]
    fn tail_estimates_bound_observed_truncation_error() {
        let beta = 0.6f64;
        let t_small = TruncationSpec::new(2, 2);
        let z_small = dg_partition::<f64>(2, beta, &t_small).unwrap();
        let z_big = dg_partition::<f64>(2, beta, &TruncationSpec::new(6, 2)).unwrap();
        let observed = z_big - z_small;
        let bound = t_small.dg_tail_estimate(2, beta).unwrap();
        assert!(observed <= bound, "observed {observed:e} > bound {bound:e}");
        let zs_small = cg_partition::<f64>(2, 0.25, &t_small).unwrap();
        let zs_big = cg_partition::<f64>(2, 0.25, &TruncationSpec::new(2, 6)).unwrap();
        let cbound = t_small.cg_tail_estimate(2, 0.25).unwrap();
        assert!(zs_big - zs_small <= cbound);
    }

    #[test]
    fn cross_identity_trivial_same_site() {
        let rep = cross_identity_report::<f64>(2, 0.25, 2, 2, &TruncationSpec::new(3, 3)).unwrap();
        assert_eq!(rep.coulomb_term, 0.0);
        assert!(rep.voltage_second_moment.abs() < 1e-25);
        assert!(rep.height_moment.abs() < 1e-25);
        assert!(rep.residual.abs() < 1e-12);
    }

    #[test]
    fn cross_identity_n2() {
        let r = cross_identity_residual::<f64>(2, 0.25, 1, 2, &TruncationSpec::new(6, 5)).unwrap();
        assert!(r <= 1e-8, "residual {r:e}");
    }

    #[test]
    fn smallest_green_eigenvalue_closed_form() {
        // Even N has the lambda = -1 mode, so the smallest eigenvalue of
        // the Green form is exactly 1/2.
        assert!((smallest_green_eigenvalue::<f64>(4) - 0.5).abs() < 1e-15);
        // N = 3: max gap is 1 - cos(2 pi/3) = 1.5.
        assert!((smallest_green_eigenvalue::<f64>(3) - 1.0 / 1.5).abs() < 1e-14);
    }

    #[test]
    fn lambda_min_matches_n2_hand_value() {
        // -Delta_red for N=2 is [[4,0,-2],[0,4,-2],[-2,-2,4]]; its
        // eigenvalues are 4 and 4 +/- 2 sqrt 2.
        let green = compute_green::<f64>(2).unwrap();
        let lam = lambda_min_reduced(&green);
        assert!((lam - (4.0 - 2.0 * 2.0f64.sqrt())).abs() < 1e-9, "{lam}");
    }
}

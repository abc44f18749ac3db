//! One-shot verification suite: every numbered check the project promises,
//! runnable from the CLI (`verify`) and asserted one-for-one by the
//! acceptance test target. All checks run in `f64` at pinned tolerances.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::contours::{
    boundary_contours, contour_sum_bound, enumerate_separating_contours, level_component,
    lower_by, mean_sq_diff_bound, separating_contour, HeightConfig, SeparatingKind,
};
use crate::error::Result;
use crate::exact::{self, TruncationSpec};
use crate::greens::compute_green;
use crate::lattice::{Direction, TorusLattice};
use crate::linalg::Cholesky;
use crate::mc_cg::{cg_variance, ProposalKind};
use crate::mc_dg::dg_estimate;

/// Outcome of one verification criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl CriterionResult {
    /// The one-line summary the suite prints per criterion.
    pub fn line(&self) -> String {
        format!(
            "[{}] {:<26} {} ({:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.id,
            self.seconds,
            self.details
        )
    }
}

fn finish(id: &str, name: &str, start: Instant, passed: bool, details: String) -> CriterionResult {
    CriterionResult {
        id: id.to_string(),
        name: name.to_string(),
        passed,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Run the verification suite. `quick` runs a reduced sample: Green
/// identities up to N = 8, the N = 2 duality, and 10^3 contour configs at
/// N = 4.
pub fn run_all(quick: bool) -> Result<Vec<CriterionResult>> {
    if quick {
        Ok(vec![
            green_identities(8, 8, 8)?,
            duality(&[(2, 0.5, 6, 4), (2, 1.0, 6, 4)])?,
            contour_exactness(&[4], 1_000)?,
        ])
    } else {
        Ok(vec![
            criterion_green_identities()?,
            criterion_duality()?,
            criterion_cross_identity()?,
            criterion_contour_exactness()?,
            criterion_counting_bound()?,
            criterion_height_bounds_mc()?,
            criterion_variance_sandwich_mc()?,
            criterion_mc_vs_exact()?,
            note_asymptotics()?,
        ])
    }
}

pub fn all_passed(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Criterion 1: the three Green identities at pinned tolerances.
pub fn criterion_green_identities() -> Result<CriterionResult> {
    green_identities(16, 12, 12)
}

fn green_identities(identity_n_max: usize, inverse_n_max: usize, quad_max: usize) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut worst_identity: f64 = 0.0;
    let mut worst_inverse: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b9);
    for n in 2..=identity_n_max {
        let lat = TorusLattice::new(n)?;
        let g = compute_green::<f64>(n)?;
        let count = lat.vertex_count();
        let jn = 1.0 / count as f64;
        for k in 0..count {
            let row = lat.laplacian_row(k)?;
            for j in 0..count {
                let lhs: f64 = row.iter().map(|(&i, &c)| -0.25 * c as f64 * g.between(i, j)).sum();
                let rhs = if k == j { 1.0 - jn } else { -jn };
                worst_identity = worst_identity.max((lhs - rhs).abs());
            }
        }
        if n <= inverse_n_max {
            // Reconstruction: the inverse assembled from the table times the
            // integer reduced Laplacian must be the identity.
            for i in 1..count {
                let row_i: Vec<f64> =
                    (1..count).map(|j| g.reduced_inverse_entry(i, j).unwrap()).collect();
                for k in 1..count {
                    let lap = lat.laplacian_row(k)?;
                    let mut s = 0.0;
                    for (j, c) in &lap {
                        if *j != 0 {
                            s += row_i[*j - 1] * *c as f64;
                        }
                    }
                    let expect = if i == k { 1.0 } else { 0.0 };
                    worst_inverse = worst_inverse.max((s - expect).abs());
                }
            }
        }
        if n <= quad_max {
            // Neutral quadratic form against a dense factorization of the
            // reduced Laplacian (independent of the spectral table).
            let red = count - 1;
            let mut neg_lap = vec![0.0f64; red * red];
            for k in 1..count {
                for (j, c) in lat.laplacian_row(k)? {
                    if j != 0 {
                        neg_lap[(k - 1) * red + (j - 1)] = -c as f64;
                    }
                }
            }
            let chol = Cholesky::factor(&neg_lap, red)?;
            for _ in 0..100 {
                let mut k: Vec<f64> = (0..count).map(|_| rng.gen_range(-2i64..=2) as f64).collect();
                let free_sum: f64 = k[1..].iter().sum();
                k[0] = -free_sum;
                let lhs = g.quadratic_form(&k);
                let mut y = k[1..].to_vec();
                chol.solve(&mut y);
                let rhs = 4.0 * k[1..].iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                let err = if lhs.abs() > 1e-12 { ((lhs - rhs) / lhs).abs() } else { (lhs - rhs).abs() };
                worst_quad = worst_quad.max(err);
            }
        }
    }
    let passed = worst_identity <= 1e-10 && worst_inverse <= 1e-8 && worst_quad <= 1e-10;
    let details = format!(
        "defining identity max {worst_identity:.2e} (tol 1e-10), inverse reconstruction max {worst_inverse:.2e} (tol 1e-8), neutral form vs dense solve max {worst_quad:.2e} (tol 1e-10)"
    );
    Ok(finish("green-identities", "Green identities", start, passed, details))
}

/// Criterion 2: partition-sum duality by full enumeration.
pub fn criterion_duality() -> Result<CriterionResult> {
    duality(&[(2, 0.5, 6, 4), (2, 1.0, 6, 4), (3, 0.75, 3, 3), (3, 1.0, 3, 3)])
}

fn duality(cases: &[(usize, f64, u32, u32)]) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for &(n, beta, kx, km) in cases {
        let tol = if n == 2 { 1e-6 } else { 1e-4 };
        let rep = exact::duality_report(n, beta, &TruncationSpec::new(kx, km))?;
        let ok = rep.relative_gap <= tol;
        passed &= ok;
        parts.push(format!("N={n} beta={beta}: gap {:.2e} (tol {tol:.0e})", rep.relative_gap));
    }
    Ok(finish("duality", "Partition-sum duality", start, passed, parts.join("; ")))
}

/// Criterion 3: the cross-model moment identity by truncated sums.
pub fn criterion_cross_identity() -> Result<CriterionResult> {
    let start = Instant::now();
    let trunc = TruncationSpec::new(3, 4);
    let (i, j) = (1, 2);
    let mut passed = true;
    let mut parts = Vec::new();
    for beta_star in [1.0 / 12.0, 1.0 / 8.0] {
        let resid = exact::cross_identity_residual(3, beta_star, i, j, &trunc)?;
        let ok = resid <= 1e-5;
        passed &= ok;
        parts.push(format!("beta*={beta_star:.6}: residual {resid:.2e} (tol 1e-5)"));
    }
    Ok(finish("cross-identity", "Cross-model identity", start, passed, parts.join("; ")))
}

/// Tallies from a random-configuration contour check.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ContourSampleSummary {
    pub samples: u64,
    pub single_loops: u64,
    pub winding_pairs: u64,
    pub edge_identity_failures: u64,
    pub energy_inequality_failures: u64,
    pub winding_anomalies: u64,
    pub balance_failures: u64,
    pub min_length_failures: u64,
    pub max_total_length: usize,
}

impl ContourSampleSummary {
    pub fn clean(&self) -> bool {
        self.edge_identity_failures == 0
            && self.energy_inequality_failures == 0
            && self.winding_anomalies == 0
            && self.balance_failures == 0
            && self.min_length_failures == 0
    }
}

/// Exact structural checks on random pinned configurations: the gradient
/// identity of the lowering map, the energy inequality, the homology of
/// boundary components, and the balance equation.
pub fn contour_sample_check(n: usize, samples: u64, seed: u64) -> Result<ContourSampleSummary> {
    let lat = TorusLattice::new(n)?;
    let count = lat.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = ContourSampleSummary::default();
    while summary.samples < samples {
        let x = HeightConfig::random(n, 3, &mut rng)?;
        let i = rng.gen_range(0..count);
        let j = rng.gen_range(0..count);
        if i == j || x.get(i) <= x.get(j) {
            continue;
        }
        summary.samples += 1;
        // Homology and balance of the full level-set boundary.
        let mask = level_component(&x, i)?;
        let boundary = boundary_contours(&lat, &mask);
        let total: (i64, i64) =
            boundary.iter().fold((0, 0), |a, c| (a.0 + c.period().0, a.1 + c.period().1));
        if total != (0, 0) {
            summary.balance_failures += 1;
        }
        let winding: Vec<_> = boundary.iter().filter(|c| c.is_winding()).collect();
        let winding_ok = match winding.len() {
            0 => true,
            2 => {
                let (pa, pb) = (winding[0].period(), winding[1].period());
                pa.0 == -pb.0 && pa.1 == -pb.1
            }
            _ => false,
        };
        if !winding_ok {
            summary.winding_anomalies += 1;
        }
        // Lowering map identities.
        let sep = separating_contour(&x, i, j)?;
        match sep.kind() {
            SeparatingKind::SingleLoop => {
                summary.single_loops += 1;
                if sep.total_len() < 4 {
                    summary.min_length_failures += 1;
                }
            }
            SeparatingKind::WindingPair => {
                summary.winding_pairs += 1;
                if sep.total_len() < 2 * n {
                    summary.min_length_failures += 1;
                }
            }
        }
        summary.max_total_length = summary.max_total_length.max(sep.total_len());
        let lowered = lower_by(&x, &sep)?;
        let mut cut = vec![false; 2 * count];
        for e in sep.all_edges() {
            let (base, axis) = e.crossed_edge_id(&lat);
            cut[2 * base + axis as usize] = true;
        }
        let mut identity_ok = true;
        for v in 0..count {
            for (d, axis) in [(Direction::East, 0usize), (Direction::North, 1)] {
                let w = lat.step(v, d);
                let before = (x.get(v) - x.get(w)).abs();
                let after = (lowered.get(v) - lowered.get(w)).abs();
                if after != before - cut[2 * v + axis] as i32 {
                    identity_ok = false;
                }
            }
        }
        if !identity_ok {
            summary.edge_identity_failures += 1;
        }
        if x.energy() - lowered.energy() < sep.total_len() as i64 {
            summary.energy_inequality_failures += 1;
        }
    }
    Ok(summary)
}

/// Criterion 4: contour exactness on 10^4 random configurations per box.
pub fn criterion_contour_exactness() -> Result<CriterionResult> {
    contour_exactness(&[4, 6], 10_000)
}

fn contour_exactness(sides: &[usize], samples: u64) -> Result<CriterionResult> {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for (idx, &n) in sides.iter().enumerate() {
        let summary = contour_sample_check(n, samples, 0xC0A7 + idx as u64)?;
        passed &= summary.clean();
        parts.push(format!(
            "N={n}: {} cfgs, {} single/{} pair, failures edge={} energy={} winding={} balance={} minlen={}",
            summary.samples,
            summary.single_loops,
            summary.winding_pairs,
            summary.edge_identity_failures,
            summary.energy_inequality_failures,
            summary.winding_anomalies,
            summary.balance_failures,
            summary.min_length_failures,
        ));
    }
    Ok(finish("contour-exactness", "Contour exactness", start, passed, parts.join("; ")))
}

/// Criterion 5: exhaustive loop counts against `3 l^2 3^l`.
pub fn criterion_counting_bound() -> Result<CriterionResult> {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for n in [4usize, 6] {
        let counts = enumerate_separating_contours(n, 0, 1, 10)?;
        let mut worst_ratio: f64 = 0.0;
        for (&len, &c) in &counts {
            if len < 4 && c != 0 {
                passed = false;
            }
            let bound = 3.0 * (len as f64).powi(2) * 3f64.powi(len as i32);
            worst_ratio = worst_ratio.max(c as f64 / bound);
            if (c as f64) > bound {
                passed = false;
            }
        }
        let total: u64 = counts.values().sum();
        parts.push(format!("N={n}: {total} separating contours/pairs up to length 10, worst count/bound {worst_ratio:.3}"));
    }
    Ok(finish("counting-bound", "Contour counting bound", start, passed, parts.join("; ")))
}

const MC_SWEEPS: u64 = 100_000;
const MC_BURN_IN: u64 = 10_000;

/// Criterion 6: uniform height-fluctuation bounds by Monte Carlo at
/// N = 8, beta = 3, for pairs at distances 1, 2, 4.
pub fn criterion_height_bounds_mc() -> Result<CriterionResult> {
    let start = Instant::now();
    let n = 8usize;
    let beta = 3.0f64;
    let phi = contour_sum_bound(beta);
    let moment_bound = mean_sq_diff_bound(beta)?;
    let base = n + 1; // (1,1)
    let pairs = [(base, base + 1, 1u32), (base, base + 2, 2), (base, base + 4, 4)];
    let mut passed = true;
    let mut parts = Vec::new();
    for (idx, &(i, j, dist)) in pairs.iter().enumerate() {
        let est = dg_estimate::<f64>(n, beta, i, j, MC_SWEEPS, MC_BURN_IN, 101 + idx as u64, 3)?;
        let mut ok = est.mean_sq_diff.estimate
            <= moment_bound + 3.0 * est.mean_sq_diff.std_error;
        for (k, tail) in est.tail_probabilities.iter().enumerate() {
            let bound = 2.0 * phi.powi(k as i32 + 1);
            ok &= tail.estimate <= bound + 3.0 * tail.std_error;
        }
        passed &= ok;
        parts.push(format!(
            "d={dist}: E[gap^2]={:.2e}<= {moment_bound:.5}, P(|gap|>=1)={:.2e}<= {:.5}",
            est.mean_sq_diff.estimate,
            est.tail_probabilities[0].estimate,
            2.0 * phi,
        ));
    }
    Ok(finish("height-bounds-mc", "Height bounds (MC)", start, passed, parts.join("; ")))
}

/// Criterion 7: the voltage variance sandwich by Monte Carlo at N = 8,
/// beta* = 1/12, pairs at distances 1, 2, 4.
pub fn criterion_variance_sandwich_mc() -> Result<CriterionResult> {
    let start = Instant::now();
    let n = 8usize;
    let beta_star = 1.0 / 12.0;
    let pairs = [(0usize, 1usize, 1u32), (0, 2, 2), (0, 4, 4)];
    let mut passed = true;
    let mut parts = Vec::new();
    for (idx, &(i, j, dist)) in pairs.iter().enumerate() {
        let rep = cg_variance::<f64>(
            n,
            beta_star,
            i,
            j,
            MC_SWEEPS,
            MC_BURN_IN,
            201 + idx as u64,
            ProposalKind::NearestNeighbor,
        )?;
        let lo = rep.lower_bound.expect("bounds apply at beta* = 1/12");
        let hi = rep.upper_bound.expect("bounds apply at beta* = 1/12");
        let se = rep.second_moment.std_error;
        let est = rep.second_moment.estimate;
        let ok = est >= lo - 3.0 * se && est <= hi + 3.0 * se;
        let mean_ok =
            rep.mean_voltage.estimate.abs() <= 3.0 * rep.mean_voltage.std_error.max(1e-6);
        passed &= ok && mean_ok;
        parts.push(format!(
            "d={dist}: E[U^2]={est:.3}(se {se:.3}) in [{lo:.3},{hi:.3}], |E[U]|={:.2e}",
            rep.mean_voltage.estimate.abs()
        ));
    }
    Ok(finish("variance-sandwich-mc", "Voltage variance sandwich (MC)", start, passed, parts.join("; ")))
}

/// Criterion 8: Monte Carlo against the truncated-sum oracles on the
/// 3-torus for both models.
pub fn criterion_mc_vs_exact() -> Result<CriterionResult> {
    let start = Instant::now();
    let (i, j) = (1usize, 2usize);
    let exact_moment = exact::dg_mean_sq_diff(3, 1.0, i, j, &TruncationSpec::new(4, 0))?;
    let dg = dg_estimate::<f64>(3, 1.0, i, j, 120_000, 12_000, 301, 2)?;
    let dg_diff = (dg.mean_sq_diff.estimate - exact_moment).abs();
    let dg_ok = dg_diff <= 3.0 * dg.mean_sq_diff.std_error;
    let beta_star = 1.0 / 12.0;
    let exact_u2 = exact::cg_voltage_second_moment(3, beta_star, i, j, &TruncationSpec::new(0, 4))?;
    let cg = cg_variance::<f64>(3, beta_star, i, j, 120_000, 12_000, 302, ProposalKind::NearestNeighbor)?;
    let cg_diff = (cg.second_moment.estimate - exact_u2).abs();
    let cg_ok = cg_diff <= 3.0 * cg.second_moment.std_error;
    let details = format!(
        "heights: mc {:.6} vs exact {exact_moment:.6} ({:.2} se); charges: mc {:.4} vs exact {exact_u2:.4} ({:.2} se)",
        dg.mean_sq_diff.estimate,
        dg_diff / dg.mean_sq_diff.std_error.max(1e-300),
        cg.second_moment.estimate,
        cg_diff / cg.second_moment.std_error.max(1e-300),
    );
    Ok(finish("mc-vs-exact", "MC vs exact oracles", start, dg_ok && cg_ok, details))
}

/// Qualitative note: the variance approaches its upper bound as beta*
/// decreases, and the potential gap grows with distance.
pub fn note_asymptotics() -> Result<CriterionResult> {
    let start = Instant::now();
    let n = 8usize;
    let (i, j) = (0usize, 4usize);
    let green = compute_green::<f64>(n)?;
    let gap_grows = green.potential_diff(0, 1) < green.potential_diff(0, 2)
        && green.potential_diff(0, 2) < green.potential_diff(0, 4);
    let mut passed = gap_grows;
    let mut parts = vec![format!(
        "potential gap monotone in distance: {:.4} < {:.4} < {:.4}",
        green.potential_diff(0, 1),
        green.potential_diff(0, 2),
        green.potential_diff(0, 4)
    )];
    let mut ratios = Vec::new();
    for (idx, beta_star) in [1.0 / 12.0, 1.0 / 24.0, 1.0 / 48.0].into_iter().enumerate() {
        let rep = cg_variance::<f64>(
            n,
            beta_star,
            i,
            j,
            MC_SWEEPS,
            MC_BURN_IN,
            401 + idx as u64,
            ProposalKind::NearestNeighbor,
        )?;
        let upper = rep.upper_bound.expect("bounds apply for beta* <= 1/12");
        let ratio = rep.second_moment.estimate / upper;
        let se_rel = 3.0 * rep.second_moment.std_error / upper;
        let beta = 1.0 / (4.0 * beta_star);
        let slack = mean_sq_diff_bound(beta)? / (beta_star * green.potential_diff(i, j));
        passed &= ratio <= 1.0 + se_rel && ratio >= 1.0 - slack - se_rel;
        ratios.push(ratio);
        parts.push(format!("beta*=1/{:.0}: ratio {ratio:.4} (3 se {se_rel:.4})", 1.0 / beta_star));
    }
    Ok(finish("asymptotics-note", "Variance ratio -> 1 (note)", start, passed, parts.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let results = run_all(true).unwrap();
        assert_eq!(results.len(), 3);
        for r in &results {
            println!("{}", r.line());
            assert!(r.passed, "{}", r.line());
        }
    }

    #[test]
    fn contour_sample_summary_counts() {
        let s = contour_sample_check(4, 200, 9).unwrap();
        assert_eq!(s.samples, 200);
        assert!(s.clean());
        assert_eq!(s.single_loops + s.winding_pairs, 200);
        assert!(s.max_total_length >= 4);
    }
}

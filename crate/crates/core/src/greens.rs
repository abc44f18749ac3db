//! Green's function of simple random walk on the torus.
//!
//! The table stores the translation-invariant kernel
//!
//! ```text
//! g(d) = (1/N^2) sum_{p != 0} cos(2 pi p . d / N) / (1 - lambda_p),
//! lambda_p = (cos(2 pi p_1 / N) + cos(2 pi p_2 / N)) / 2,
//! ```
//!
//! so that `G_ij = g(j - i mod N)`. This closed spectral form equals the
//! Abel-regularized walk sum; the mode with `lambda_p = -1` (even N)
//! contributes `1/2` which is exactly the regularized limit. Correctness is
//! anchored to the defining identity
//!
//! ```text
//! -(1/4) sum_i Delta_ki G_ij = delta_kj - 1/N^2,
//! ```
//!
//! which the tests check entrywise against the integer Laplacian.

use crate::error::{Error, Result};
use crate::lattice::TorusLattice;
use crate::scalar::Real;

/// Precomputed Green's function values over all displacements of the
/// N x N torus. Immutable once built; cheap to clone and safe to share.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable<F> {
    side: usize,
    values: Vec<F>,
}

/// Build the Green table for an `n x n` torus by direct spectral summation
/// (O(n^4) with cosine tables, plenty for desk-scale boxes).
pub fn compute_green<F: Real>(n: usize) -> Result<GreenTable<F>> {
    if n < 2 {
        return Err(Error::SideTooSmall { got: n, min: 2 });
    }
    let two_pi = F::PI() + F::PI();
    let nf = F::from_usize_lossy(n);
    // cos(2 pi k / n) for k in [0, n); every phase reduces to one of these.
    let cos_table: Vec<F> = (0..n).map(|k| (two_pi * F::from_usize_lossy(k) / nf).cos()).collect();
    let half = F::from_f64_lossy(0.5);
    let mut inv_gap = vec![F::zero(); n * n];
    for p2 in 0..n {
        for p1 in 0..n {
            if p1 == 0 && p2 == 0 {
                continue;
            }
            let lambda = (cos_table[p1] + cos_table[p2]) * half;
            inv_gap[p2 * n + p1] = (F::one() - lambda).recip();
        }
    }
    let norm = (nf * nf).recip();
    let mut values = vec![F::zero(); n * n];
    for dy in 0..n {
        for dx in 0..n {
            let mut sum = F::zero();
            for p2 in 0..n {
                for p1 in 0..n {
                    if p1 == 0 && p2 == 0 {
                        continue;
                    }
                    let phase = (p1 * dx + p2 * dy) % n;
                    sum += cos_table[phase] * inv_gap[p2 * n + p1];
                }
            }
            values[dy * n + dx] = sum * norm;
        }
    }
    Ok(GreenTable { side: n, values })
}

impl<F: Real> GreenTable<F> {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn lattice(&self) -> TorusLattice {
        TorusLattice::new(self.side).expect("side checked at construction")
    }

    /// Kernel value at a displacement, components taken mod N.
    pub fn at(&self, dx: i64, dy: i64) -> F {
        let n = self.side as i64;
        let x = dx.rem_euclid(n) as usize;
        let y = dy.rem_euclid(n) as usize;
        self.values[y * self.side + x]
    }

    /// G_ij for two vertex indices.
    pub fn between(&self, i: usize, j: usize) -> F {
        let n = self.side;
        let (xi, yi) = (i % n, i / n);
        let (xj, yj) = (j % n, j / n);
        self.values[((yj + n - yi) % n) * n + ((xj + n - xi) % n)]
    }

    /// `G_ii - G_ij = g(0) - g(j - i)`: nonnegative, zero only for i = j,
    /// symmetric in i and j and invariant under joint translation.
    pub fn potential_diff(&self, i: usize, j: usize) -> F {
        self.values[0] - self.between(i, j)
    }

    /// Entry `(i, j)` of the inverse of the Laplacian with the origin row
    /// and column removed: `-(1/4)(G_ij - G_i0 - G_0j + G_00)`.
    pub fn reduced_inverse_entry(&self, i: usize, j: usize) -> Result<F> {
        if i == 0 || j == 0 {
            return Err(Error::OriginExcluded);
        }
        let quarter = F::from_f64_lossy(0.25);
        Ok(-quarter * (self.between(i, j) - self.between(i, 0) - self.between(0, j) + self.values[0]))
    }

    /// Quadratic form `k^t G k` for a real vector over all vertices,
    /// evaluated through the per-vertex potentials (O(N^4)).
    pub fn quadratic_form(&self, k: &[F]) -> F {
        debug_assert_eq!(k.len(), self.side * self.side);
        let n = self.side;
        let mut total = F::zero();
        for v in 0..n * n {
            if k[v] == F::zero() {
                continue;
            }
            let mut pot = F::zero();
            for (l, &kl) in k.iter().enumerate() {
                if kl != F::zero() {
                    pot += self.between(v, l) * kl;
                }
            }
            total += k[v] * pot;
        }
        total
    }

    /// Electric potential of an integer charge field at every vertex:
    /// `phi_v = sum_l g(l - v) m_l`.
    pub fn potentials(&self, charges: &[i64]) -> Vec<F> {
        let n = self.side;
        debug_assert_eq!(charges.len(), n * n);
        let mut phi = vec![F::zero(); n * n];
        for (l, &ml) in charges.iter().enumerate() {
            if ml == 0 {
                continue;
            }
            let mf = F::from_f64_lossy(ml as f64);
            for (v, slot) in phi.iter_mut().enumerate() {
                *slot += self.between(v, l) * mf;
            }
        }
        phi
    }

    /// All displacement/value rows, for dumping: `(dx, dy, g)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        let n = self.side;
        self.values.iter().enumerate().map(move |(i, &g)| (i % n, i / n, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination with partial pivoting; test-only oracle,
    /// deliberately independent of the spectral route and of the crate's
    /// Cholesky.
    fn solve_dense(a: &[f64], n: usize, b: &mut [f64], nrhs: usize) {
        let mut m = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (piv, _) = (col..n)
                .map(|r| (r, m[r * n + col].abs()))
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .unwrap();
            if piv != col {
                for c in 0..n {
                    m.swap(col * n + c, piv * n + c);
                }
                for r in 0..nrhs {
                    b.swap(r * n + col, r * n + piv);
                }
                perm.swap(col, piv);
            }
            let d = m[col * n + col];
            assert!(d.abs() > 1e-14, "singular oracle matrix");
            for row in col + 1..n {
                let f = m[row * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                for c in col..n {
                    m[row * n + c] -= f * m[col * n + c];
                }
                for r in 0..nrhs {
                    b[r * n + row] -= f * b[r * n + col];
                }
            }
        }
        for r in 0..nrhs {
            for col in (0..n).rev() {
                let mut s = b[r * n + col];
                for c in col + 1..n {
                    s -= m[col * n + c] * b[r * n + c];
                }
                b[r * n + col] = s / m[col * n + col];
            }
        }
    }

    /// Green matrix by a dense solve of the defining linear system with the
    /// zero-row-sum constraint folded in: (-Delta/4 + J/N^2) G = I - J/N^2.
    fn green_by_dense_solve(n: usize) -> Vec<f64> {
        let lat = TorusLattice::new(n).unwrap();
        let count = lat.vertex_count();
        let jn = 1.0 / count as f64;
        let mut a = vec![0.0; count * count];
        for k in 0..count {
            for (j, c) in lat.laplacian_row(k).unwrap() {
                a[k * count + j] += -0.25 * c as f64;
            }
            for j in 0..count {
                a[k * count + j] += jn;
            }
        }
        // Right-hand sides: columns of I - J/N^2 (symmetric, so rows work).
        let mut b = vec![0.0; count * count];
        for j in 0..count {
            for i in 0..count {
                b[j * count + i] = if i == j { 1.0 - jn } else { -jn };
            }
        }
        solve_dense(&a, count, &mut b, count);
        // b now holds G columns; G is symmetric so return as flat matrix.
        b
    }

    fn table(n: usize) -> GreenTable<f64> {
        compute_green(n).unwrap()
    }

    #[test]
    fn rejects_tiny_box() {
        assert!(compute_green::<f64>(1).is_err());
    }

    #[test]
    fn kernel_zero_mean_and_symmetric() {
        for n in 2..=9 {
            let g = table(n);
            let sum: f64 = g.rows().map(|(_, _, v)| v).sum();
            assert!(sum.abs() < 1e-12, "N={n} sum={sum:e}");
            for dy in 0..n as i64 {
                for dx in 0..n as i64 {
                    assert!((g.at(dx, dy) - g.at(-dx, -dy)).abs() < 1e-13);
                    assert!(g.at(0, 0) >= g.at(dx, dy));
                }
            }
        }
    }

    #[test]
    fn defining_identity_holds() {
        // -(1/4) sum_i Delta_ki g(j-i) = delta_kj - 1/N^2 entrywise.
        for n in 2..=32 {
            let lat = TorusLattice::new(n).unwrap();
            let g = table(n);
            let count = lat.vertex_count();
            let jn = 1.0 / count as f64;
            for k in 0..count {
                let row = lat.laplacian_row(k).unwrap();
                for j in 0..count {
                    let lhs: f64 = row.iter().map(|(&i, &c)| -0.25 * c as f64 * g.between(i, j)).sum();
                    let rhs = if k == j { 1.0 - jn } else { -jn };
                    assert!((lhs - rhs).abs() < 1e-10, "N={n} k={k} j={j}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn matches_dense_solve() {
        for n in [2, 3, 4, 5] {
            let g = table(n);
            let dense = green_by_dense_solve(n);
            let count = n * n;
            for i in 0..count {
                for j in 0..count {
                    assert!(
                        (g.between(i, j) - dense[j * count + i]).abs() < 1e-10,
                        "N={n} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn n2_closed_form() {
        // Three modes: two with gap 1, one with gap 2 (the regularized
        // lambda = -1 mode).
        let g = table(2);
        assert!((g.at(0, 0) - 0.625).abs() < 1e-15);
        assert!((g.at(1, 0) + 0.125).abs() < 1e-15);
        assert!((g.at(0, 1) + 0.125).abs() < 1e-15);
        assert!((g.at(1, 1) + 0.375).abs() < 1e-15);
    }

    #[test]
    fn potential_diff_basics() {
        let n = 4;
        let g = table(n);
        for v in 0..n * n {
            assert_eq!(g.potential_diff(v, v), 0.0);
        }
        let dense = green_by_dense_solve(n);
        let i = 0;
        let j = 2 * n + 2; // (2,2)
        let oracle = dense[i * n * n + i] - dense[j * n * n + i];
        assert!((g.potential_diff(i, j) - oracle).abs() < 1e-10);
        // Swap and joint-translation invariance.
        for (i, j) in [(1, 7), (3, 12), (0, 9)] {
            assert!((g.potential_diff(i, j) - g.potential_diff(j, i)).abs() < 1e-13);
            let lat = TorusLattice::new(n).unwrap();
            let (xi, yi) = lat.coords(i);
            let (xj, yj) = lat.coords(j);
            let ti = lat.index(xi + 1, yi + 2);
            let tj = lat.index(xj + 1, yj + 2);
            assert!((g.potential_diff(i, j) - g.potential_diff(ti, tj)).abs() < 1e-13);
        }
    }

    #[test]
    fn reduced_inverse_reconstructs_identity() {
        for n in [2, 3, 4, 6] {
            let lat = TorusLattice::new(n).unwrap();
            let g = table(n);
            let count = lat.vertex_count();
            let red = count - 1;
            // M = (Delta_red)^{-1} from the Green table, Delta_red integer.
            let mut prod_err: f64 = 0.0;
            for i in 1..count {
                let row_i: Vec<f64> = (1..count).map(|j| g.reduced_inverse_entry(i, j).unwrap()).collect();
                for k in 1..count {
                    let lap = lat.laplacian_row(k).unwrap();
                    let mut s = 0.0;
                    for (j, c) in &lap {
                        if *j != 0 {
                            s += row_i[*j - 1] * *c as f64;
                        }
                    }
                    let expect = if i == k { 1.0 } else { 0.0 };
                    prod_err = prod_err.max((s - expect).abs());
                }
            }
            assert!(prod_err < 1e-8, "N={n} max |M D - I| = {prod_err:e} ({red} x {red})");
        }
    }

    #[test]
    fn reduced_inverse_matches_dense_inversion() {
        let n = 4;
        let lat = TorusLattice::new(n).unwrap();
        let g = table(n);
        let count = lat.vertex_count();
        let red = count - 1;
        let mut a = vec![0.0; red * red];
        for k in 1..count {
            for (j, c) in lat.laplacian_row(k).unwrap() {
                if j != 0 {
                    a[(k - 1) * red + (j - 1)] = c as f64;
                }
            }
        }
        let mut b = vec![0.0; red * red];
        for i in 0..red {
            b[i * red + i] = 1.0;
        }
        solve_dense(&a, red, &mut b, red);
        for i in 1..count {
            for j in 1..count {
                let ours = g.reduced_inverse_entry(i, j).unwrap();
                let dense = b[(j - 1) * red + (i - 1)];
                assert!((ours - dense).abs() < 1e-10, "({i},{j}): {ours} vs {dense}");
                let sym = g.reduced_inverse_entry(j, i).unwrap();
                assert!((ours - sym).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn reduced_inverse_rejects_origin() {
        let g = table(3);
        assert!(g.reduced_inverse_entry(0, 1).is_err());
        assert!(g.reduced_inverse_entry(2, 0).is_err());
    }

    #[test]
    fn quadratic_form_dipole() {
        let n = 5;
        let g = table(n);
        let count = n * n;
        for (i, j) in [(0, 1), (2, 17), (6, 23)] {
            let mut k = vec![0.0; count];
            k[i] = 1.0;
            k[j] = -1.0;
            let q = g.quadratic_form(&k);
            let expect = 2.0 * g.potential_diff(i, j);
            assert!((q - expect).abs() < 1e-12, "({i},{j})");
        }
        assert_eq!(g.quadratic_form(&vec![0.0; count]), 0.0);
    }

    #[test]
    fn neutral_quadratic_form_matches_reduced_solve() {
        // k^t G k = -4 k_red^t (Delta_red)^{-1} k_red on neutral vectors,
        // with the right side through an independent dense solve.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for n in 3..=6usize {
            let lat = TorusLattice::new(n).unwrap();
            let g = table(n);
            let count = lat.vertex_count();
            let red = count - 1;
            let mut a = vec![0.0; red * red];
            for k in 1..count {
                for (j, c) in lat.laplacian_row(k).unwrap() {
                    if j != 0 {
                        a[(k - 1) * red + (j - 1)] = c as f64;
                    }
                }
            }
            for _ in 0..100 {
                let mut k: Vec<f64> = (0..count).map(|_| rng.gen_range(-2i64..=2) as f64).collect();
                let free_sum: f64 = k[1..].iter().sum();
                k[0] = -free_sum;
                let lhs = g.quadratic_form(&k);
                let mut rhs_vec = k[1..].to_vec();
                solve_dense(&a, red, &mut rhs_vec, 1);
                let rhs: f64 = -4.0 * k[1..].iter().zip(&rhs_vec).map(|(a, b)| a * b).sum::<f64>();
                if lhs.abs() > 1e-9 {
                    assert!(((lhs - rhs) / lhs).abs() < 1e-10, "N={n}: {lhs} vs {rhs}");
                } else {
                    assert!((lhs - rhs).abs() < 1e-12);
                }
                assert!(lhs > -1e-12, "neutral quadratic form must be nonnegative");
            }
        }
    }

    #[test]
    fn neutral_quadratic_form_positive_unless_zero() {
        let g = table(4);
        let count = 16;
        let mut k = vec![0.0; count];
        k[3] = 2.0;
        k[9] = -2.0;
        assert!(g.quadratic_form(&k) > 0.0);
        // Constant vectors are the kernel of G, but they are not neutral
        // unless zero.
        let flat = vec![1.0; count];
        assert!(g.quadratic_form(&flat).abs() < 1e-10);
    }

    #[test]
    fn f32_instantiation_sane() {
        let g = compute_green::<f32>(4).unwrap();
        let g64 = table(4);
        for (dx, dy, v) in g.rows() {
            assert!((v as f64 - g64.at(dx as i64, dy as i64)).abs() < 1e-5);
        }
    }
}

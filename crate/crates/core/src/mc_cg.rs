//! Direct Monte Carlo for the neutral lattice Coulomb gas.
//!
//! States are integer charge fields `m` (physical charge `2 pi m`) with
//! total charge zero; the energy is `pi^2 b* m^t G m`. Dipole moves add
//! +1/-1 to a pair of sites, so neutrality is an exact integer invariant.
//! Per-vertex potentials are cached, giving O(1) proposal evaluation and
//! an O(N^2) update per accepted move, with periodic from-scratch
//! refreshes to stop floating-point drift.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::contours::mean_sq_diff_bound;
use crate::error::{Error, Result};
use crate::greens::{compute_green, GreenTable};
use crate::mc_dg::{run_chains, BATCHES};
use crate::scalar::Real;
use crate::stats::{mean_and_stderr, EstimateReport};

const REFRESH_EVERY_ACCEPTS: u64 = 1000;

/// Largest inverse temperature at which the variance sandwich applies.
pub fn bounds_threshold<F: Real>() -> F {
    F::from_f64_lossy(12.0).recip()
}

/// A neutral integer charge configuration with cached potentials and
/// cached Green quadratic form.
#[derive(Debug, Clone)]
pub struct ChargeConfig<F> {
    green: GreenTable<F>,
    charges: Vec<i64>,
    potentials: Vec<F>,
    quadratic: F,
    accepts_since_refresh: u64,
}

impl<F: Real> ChargeConfig<F> {
    /// The zero-charge configuration.
    pub fn new(green: GreenTable<F>) -> Self {
        let count = green.side() * green.side();
        ChargeConfig {
            green,
            charges: vec![0; count],
            potentials: vec![F::zero(); count],
            quadratic: F::zero(),
            accepts_since_refresh: 0,
        }
    }

    pub fn side(&self) -> usize {
        self.green.side()
    }

    pub fn green(&self) -> &GreenTable<F> {
        &self.green
    }

    pub fn charges(&self) -> &[i64] {
        &self.charges
    }

    pub fn potentials(&self) -> &[F] {
        &self.potentials
    }

    pub fn total_charge(&self) -> i64 {
        self.charges.iter().sum()
    }

    /// Cached `m^t G m`.
    pub fn quadratic(&self) -> F {
        self.quadratic
    }

    /// Cached energy `pi^2 b* m^t G m` at a given inverse temperature.
    pub fn energy(&self, beta_star: F) -> F {
        F::PI() * F::PI() * beta_star * self.quadratic
    }

    /// Voltage between two sites: `2 pi (phi_i - phi_j)`.
    pub fn voltage(&self, i: usize, j: usize) -> F {
        (F::PI() + F::PI()) * (self.potentials[i] - self.potentials[j])
    }

    /// Change of `m^t G m` if `m_a += 1, m_b -= 1`.
    pub fn dipole_quadratic_delta(&self, a: usize, b: usize) -> F {
        let two = F::one() + F::one();
        two * (self.potentials[a] - self.potentials[b])
            + two * (self.green.between(0, 0) - self.green.between(a, b))
    }

    /// Apply `m_a += 1, m_b -= 1`, updating the caches incrementally and
    /// refreshing them from scratch every thousand accepted moves.
    pub fn apply_dipole(&mut self, a: usize, b: usize) {
        self.quadratic += self.dipole_quadratic_delta(a, b);
        self.charges[a] += 1;
        self.charges[b] -= 1;
        for (v, slot) in self.potentials.iter_mut().enumerate() {
            *slot += self.green.between(v, a) - self.green.between(v, b);
        }
        self.accepts_since_refresh += 1;
        if self.accepts_since_refresh >= REFRESH_EVERY_ACCEPTS {
            self.refresh();
        }
    }

    /// Recompute both caches from scratch; asserts the drift stayed tiny.
    pub fn refresh(&mut self) {
        self.accepts_since_refresh = 0;
        let (potentials, quadratic) = self.recompute();
        let tol = F::epsilon()
            * F::from_f64_lossy(1e10)
            * (F::one() + self.quadratic.abs());
        debug_assert!(
            (quadratic - self.quadratic).abs() <= tol,
            "quadratic-form cache drifted past tolerance"
        );
        self.potentials = potentials;
        self.quadratic = quadratic;
    }

    /// From-scratch potentials and quadratic form.
    pub fn recompute(&self) -> (Vec<F>, F) {
        let potentials = self.green.potentials(&self.charges);
        let quadratic = self
            .charges
            .iter()
            .zip(&potentials)
            .map(|(&m, &p)| F::from_f64_lossy(m as f64) * p)
            .sum();
        (potentials, quadratic)
    }
}

/// How dipole endpoints are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProposalKind {
    /// Random site and a uniform nearest neighbor (the default).
    NearestNeighbor,
    /// Two distinct uniform sites, for mixing diagnostics.
    UniformPair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStepRecord<F> {
    pub plus_site: usize,
    pub minus_site: usize,
    pub delta_energy: F,
    pub accepted: bool,
}

/// Metropolis chain over neutral charge configurations.
#[derive(Debug, Clone)]
pub struct CgChain<F> {
    config: ChargeConfig<F>,
    beta_star: F,
    proposal: ProposalKind,
    rng: ChaCha8Rng,
    seed: u64,
    sweeps: u64,
    proposals: u64,
    accepted: u64,
}

impl<F: Real> CgChain<F> {
    pub fn new(n: usize, beta_star: F, seed: u64, proposal: ProposalKind) -> Result<Self> {
        if beta_star <= F::zero() {
            return Err(Error::NonPositiveTemperature(beta_star.to_f64().unwrap_or(f64::NAN)));
        }
        let green = compute_green::<F>(n)?;
        Ok(CgChain {
            config: ChargeConfig::new(green),
            beta_star,
            proposal,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            sweeps: 0,
            proposals: 0,
            accepted: 0,
        })
    }

    pub fn config(&self) -> &ChargeConfig<F> {
        &self.config
    }

    pub fn beta_star(&self) -> F {
        self.beta_star
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn propose_pair(&mut self) -> (usize, usize) {
        let count = self.config.side() * self.config.side();
        match self.proposal {
            ProposalKind::NearestNeighbor => {
                let a = self.rng.gen_range(0..count);
                let lat = self.config.green.lattice();
                let nbrs = lat.neighbors(a).expect("valid site");
                let b = nbrs[self.rng.gen_range(0..4)];
                (a, b)
            }
            ProposalKind::UniformPair => {
                let a = self.rng.gen_range(0..count);
                let mut b = self.rng.gen_range(0..count - 1);
                if b >= a {
                    b += 1;
                }
                (a, b)
            }
        }
    }

    /// One dipole proposal `m_a += 1, m_b -= 1` with Metropolis acceptance.
    pub fn step(&mut self) -> CgStepRecord<F> {
        let (a, b) = self.propose_pair();
        let delta_energy =
            F::PI() * F::PI() * self.beta_star * self.config.dipole_quadratic_delta(a, b);
        self.proposals += 1;
        let accepted = if delta_energy <= F::zero() {
            true
        } else {
            let p = (-delta_energy).exp();
            self.rng.gen::<f64>() < p.to_f64().unwrap_or(0.0)
        };
        if accepted {
            self.config.apply_dipole(a, b);
            self.accepted += 1;
        }
        CgStepRecord { plus_site: a, minus_site: b, delta_energy, accepted }
    }

    /// One sweep: N^2 dipole proposals.
    pub fn sweep(&mut self) {
        for _ in 0..self.config.side() * self.config.side() {
            self.step();
        }
        self.sweeps += 1;
    }
}

/// Batch-means estimate of the voltage second moment with the sandwich
/// bounds when they apply (`beta* <= 1/12`).
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport<F> {
    pub n: usize,
    pub beta_star: F,
    pub i: usize,
    pub j: usize,
    pub seed: u64,
    pub proposal: ProposalKind,
    /// `E*[U_ij^2]`.
    pub second_moment: EstimateReport<F>,
    /// Sample mean of `U_ij`; zero up to noise by charge-flip symmetry.
    pub mean_voltage: EstimateReport<F>,
    /// `(4/b*) (G_ii - G_ij) - (4/b*^2) M_{1/(4 b*)}`, when applicable.
    pub lower_bound: Option<F>,
    /// `(4/b*) (G_ii - G_ij)`, when applicable.
    pub upper_bound: Option<F>,
    /// False when `beta* > 1/12`: the sandwich hypotheses fail there and
    /// the bounds are omitted.
    pub bounds_applicable: bool,
    pub acceptance_rate: f64,
}

struct CgSeries<F> {
    sq_batches: Vec<F>,
    mean_batches: Vec<F>,
    acceptance: (u64, u64),
}

fn run_cg_chain<F: Real>(
    n: usize,
    beta_star: F,
    i: usize,
    j: usize,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
    proposal: ProposalKind,
) -> Result<CgSeries<F>> {
    let mut chain = CgChain::new(n, beta_star, seed, proposal)?;
    let count = n * n;
    if i >= count {
        return Err(Error::VertexOutOfRange { index: i, side: n, count });
    }
    if j >= count {
        return Err(Error::VertexOutOfRange { index: j, side: n, count });
    }
    let measured = sweeps.saturating_sub(burn_in);
    if measured < BATCHES as u64 {
        return Err(Error::TooFewSweeps { measurements: measured, batches: BATCHES as u64 });
    }
    for _ in 0..burn_in {
        chain.sweep();
    }
    let len = (measured as usize) / BATCHES;
    let mut sq_batches = Vec::with_capacity(BATCHES);
    let mut mean_batches = Vec::with_capacity(BATCHES);
    for _ in 0..BATCHES {
        let mut sq = F::zero();
        let mut mean = F::zero();
        for _ in 0..len {
            chain.sweep();
            let u = chain.config.voltage(i, j);
            sq += u * u;
            mean += u;
        }
        let lf = F::from_usize_lossy(len);
        sq_batches.push(sq / lf);
        mean_batches.push(mean / lf);
    }
    Ok(CgSeries { sq_batches, mean_batches, acceptance: (chain.accepted, chain.proposals) })
}

/// Single-chain variance estimate; deterministic given the seed.
pub fn cg_variance<F: Real>(
    n: usize,
    beta_star: F,
    i: usize,
    j: usize,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
    proposal: ProposalKind,
) -> Result<VarianceReport<F>> {
    cg_variance_multi(n, beta_star, i, j, sweeps, burn_in, &[seed], 1, proposal)
}

/// Merged independent chains, stratified by seed.
pub fn cg_variance_multi<F: Real>(
    n: usize,
    beta_star: F,
    i: usize,
    j: usize,
    sweeps: u64,
    burn_in: u64,
    seeds: &[u64],
    max_workers: usize,
    proposal: ProposalKind,
) -> Result<VarianceReport<F>> {
    let runs = run_chains(seeds, max_workers, |seed| {
        run_cg_chain(n, beta_star, i, j, sweeps, burn_in, seed, proposal)
    })?;
    let seed0 = seeds.first().copied().unwrap_or(0);
    let mut sq = Vec::new();
    let mut means = Vec::new();
    let mut accepted = 0u64;
    let mut proposals = 0u64;
    for run in &runs {
        sq.extend_from_slice(&run.sq_batches);
        means.extend_from_slice(&run.mean_batches);
        accepted += run.acceptance.0;
        proposals += run.acceptance.1;
    }
    let (sq_est, sq_se) = mean_and_stderr(&sq);
    let (mean_est, mean_se) = mean_and_stderr(&means);
    let four = F::from_f64_lossy(4.0);
    let green = compute_green::<F>(n)?;
    let bounds_applicable = beta_star <= bounds_threshold();
    let (lower_bound, upper_bound) = if bounds_applicable {
        let gap = green.potential_diff(i, j);
        let upper = four / beta_star * gap;
        let beta = (four * beta_star).recip();
        let m = mean_sq_diff_bound(beta)?;
        (Some(upper - four / (beta_star * beta_star) * m), Some(upper))
    } else {
        (None, None)
    };
    Ok(VarianceReport {
        n,
        beta_star,
        i,
        j,
        seed: seed0,
        proposal,
        second_moment: EstimateReport {
            observable: "voltage_sq".into(),
            estimate: sq_est,
            std_error: sq_se,
            sweeps,
            burn_in,
            seed: seed0,
        },
        mean_voltage: EstimateReport {
            observable: "voltage_mean".into(),
            estimate: mean_est,
            std_error: mean_se,
            sweeps,
            burn_in,
            seed: seed0,
        },
        lower_bound,
        upper_bound,
        bounds_applicable,
        acceptance_rate: if proposals == 0 { 0.0 } else { accepted as f64 / proposals as f64 },
    })
}

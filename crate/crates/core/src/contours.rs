//! Contour analysis for pinned height fields on the torus.
//!
//! The boundary of a super-level component is a set of directed dual
//! edges (higher region on the left). Chaining them head-to-tail, with
//! degree-4 dual vertices rewired by a fixed diagonal corner split,
//! decomposes the boundary into closed self-avoiding contours. Contours
//! are classified by their period, the integer sum of direction vectors:
//! zero period means the contour bounds a disc, nonzero period means it
//! winds around the torus. Winding components occur in pairs with opposite
//! periods because every boundary balances to zero.
//!
//! For two sites with `x_i > x_j`, a unique piece of that boundary
//! separates them: either one non-winding contour or the union of the two
//! winding ones. Lowering the heights by one on the component of `i` in
//! the cut graph shrinks every crossed gradient by exactly one and costs
//! at least the contour length in energy. That is the engine behind the
//! uniform height-fluctuation bounds evaluated here as scalars.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::lattice::{DirectedDualEdge, Direction, TorusLattice};
use crate::scalar::Real;

/// Budget on dual-lattice walk nodes for the exhaustive loop enumeration.
pub const DEFAULT_ENUM_BUDGET: u128 = 1_000_000_000;

/// An integer height field pinned to zero at the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightConfig {
    side: usize,
    heights: Vec<i32>,
}

impl HeightConfig {
    pub fn new(side: usize, heights: Vec<i32>) -> Result<Self> {
        let lat = TorusLattice::new(side)?;
        if heights.len() != lat.vertex_count() {
            return Err(Error::LengthMismatch { got: heights.len(), expected: lat.vertex_count() });
        }
        if heights[0] != 0 {
            return Err(Error::NotPinned(heights[0] as i64));
        }
        Ok(HeightConfig { side, heights })
    }

    /// Shift a raw field so the origin sits at zero, then wrap it.
    pub fn repinned(side: usize, mut heights: Vec<i32>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::LengthMismatch { got: 0, expected: side * side });
        }
        let base = heights[0];
        for h in &mut heights {
            *h -= base;
        }
        HeightConfig::new(side, heights)
    }

    /// Uniform heights in `[-max_abs, max_abs]`, re-pinned at the origin.
    pub fn random<R: rand::Rng>(side: usize, max_abs: i32, rng: &mut R) -> Result<Self> {
        let count = side * side;
        let heights: Vec<i32> = (0..count).map(|_| rng.gen_range(-max_abs..=max_abs)).collect();
        HeightConfig::repinned(side, heights)
    }

    pub fn flat(side: usize) -> Result<Self> {
        let lat = TorusLattice::new(side)?;
        Ok(HeightConfig { side, heights: vec![0; lat.vertex_count()] })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn get(&self, v: usize) -> i32 {
        self.heights[v]
    }

    pub fn lattice(&self) -> TorusLattice {
        TorusLattice::new(self.side).expect("side validated at construction")
    }

    pub fn energy(&self) -> i64 {
        self.lattice().hamiltonian(&self.heights)
    }
}

/// A closed contour of directed dual edges together with its period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    edges: Vec<DirectedDualEdge>,
    period: (i64, i64),
}

impl Contour {
    pub fn edges(&self) -> &[DirectedDualEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Sum of unwrapped direction vectors; `(0,0)` exactly when the
    /// contour does not wind around the torus.
    pub fn period(&self) -> (i64, i64) {
        self.period
    }

    pub fn is_winding(&self) -> bool {
        self.period != (0, 0)
    }
}

/// Which shape the separating contour takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparatingKind {
    /// One non-winding contour encircles one of the two sites.
    SingleLoop,
    /// Two winding contours with opposite periods bound a belt.
    WindingPair,
}

/// The contour that separates site `i` from site `j`, plus the vertex set
/// on the `i` side of the cut.
#[derive(Debug, Clone)]
pub struct SeparatingContour {
    kind: SeparatingKind,
    contours: Vec<Contour>,
    total_len: usize,
    inside: Vec<bool>,
}

impl SeparatingContour {
    pub fn kind(&self) -> SeparatingKind {
        self.kind
    }

    pub fn contours(&self) -> &[Contour] {
        &self.contours
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }

    /// True when the cut does not separate `v` from `i`.
    pub fn is_inside(&self, v: usize) -> bool {
        self.inside[v]
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn all_edges(&self) -> impl Iterator<Item = &DirectedDualEdge> {
        self.contours.iter().flat_map(|c| c.edges.iter())
    }
}

/// Connected component (through equal-or-higher neighbors) of the
/// super-level set `{k : x_k >= x_i}` containing `i`.
pub fn level_component(x: &HeightConfig, i: usize) -> Result<Vec<bool>> {
    let lat = x.lattice();
    if !lat.contains(i) {
        return Err(Error::VertexOutOfRange { index: i, side: x.side, count: lat.vertex_count() });
    }
    let level = x.heights[i];
    let mut mask = vec![false; lat.vertex_count()];
    let mut stack = vec![i];
    mask[i] = true;
    while let Some(v) = stack.pop() {
        for w in lat.neighbors(v)? {
            if !mask[w] && x.heights[w] >= level {
                mask[w] = true;
                stack.push(w);
            }
        }
    }
    Ok(mask)
}

/// Decompose the directed dual boundary of a vertex set into closed
/// contours, keeping the set on the left of every edge. Where four
/// boundary edges meet, the walk always turns left, so each strand bends
/// around the diagonal corner occupied by the set: the two strands round
/// opposite corners and never intersect, and every contour encloses only
/// its own lobe of the set. Empty or full sets have no boundary.
pub fn boundary_contours(lat: &TorusLattice, region: &[bool]) -> Vec<Contour> {
    debug_assert_eq!(region.len(), lat.vertex_count());
    let n = lat.side();
    let mut edges: Vec<DirectedDualEdge> = Vec::new();
    for v in 0..lat.vertex_count() {
        if !region[v] {
            continue;
        }
        for d in Direction::ALL {
            let w = lat.step(v, d);
            if !region[w] {
                edges.push(lat.arrow_from_higher(v, d));
            }
        }
    }
    let mut out_by_tail: HashMap<usize, Vec<usize>> = HashMap::new();
    for (idx, e) in edges.iter().enumerate() {
        out_by_tail.entry(e.tail.1 * n + e.tail.0).or_default().push(idx);
    }
    let next_edge = |cur: &DirectedDualEdge| -> usize {
        let head = cur.head.1 * n + cur.head.0;
        let candidates = &out_by_tail[&head];
        if candidates.len() == 1 {
            return candidates[0];
        }
        let want = cur.direction().rot_ccw();
        *candidates
            .iter()
            .find(|&&c| edges[c].direction() == want)
            .expect("degree-4 dual vertex always offers the left turn")
    };
    let mut used = vec![false; edges.len()];
    let mut contours = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut loop_edges = Vec::new();
        let mut period = (0i64, 0i64);
        let mut cur = start;
        loop {
            used[cur] = true;
            let e = edges[cur];
            period.0 += e.dir.0 as i64;
            period.1 += e.dir.1 as i64;
            loop_edges.push(e);
            let nxt = next_edge(&e);
            if nxt == start {
                break;
            }
            debug_assert!(!used[nxt], "boundary walk revisited an edge before closing");
            cur = nxt;
        }
        contours.push(Contour { edges: loop_edges, period });
    }
    contours
}

/// Flat id of the primal edge a dual edge crosses: `2*base + axis`.
fn cut_id(lat: &TorusLattice, e: &DirectedDualEdge) -> usize {
    let (base, axis) = e.crossed_edge_id(lat);
    2 * base + axis as usize
}

/// Vertices reachable from `from` without using any cut primal edge.
fn component_avoiding(lat: &TorusLattice, cut: &[bool], from: usize) -> Vec<bool> {
    let mut mask = vec![false; lat.vertex_count()];
    let mut stack = vec![from];
    mask[from] = true;
    while let Some(v) = stack.pop() {
        for d in Direction::ALL {
            let id = match d {
                Direction::East => 2 * v,
                Direction::West => 2 * lat.step(v, Direction::West),
                Direction::North => 2 * v + 1,
                Direction::South => 2 * lat.step(v, Direction::South) + 1,
            };
            if cut[id] {
                continue;
            }
            let w = lat.step(v, d);
            if !mask[w] {
                mask[w] = true;
                stack.push(w);
            }
        }
    }
    mask
}

fn cut_of<'a>(lat: &TorusLattice, edges: impl Iterator<Item = &'a DirectedDualEdge>) -> Vec<bool> {
    let mut cut = vec![false; 2 * lat.vertex_count()];
    for e in edges {
        cut[cut_id(lat, e)] = true;
    }
    cut
}

/// Extract the contour separating `i` from `j` from a configuration with
/// `x_i > x_j`, together with the inside vertex set.
pub fn separating_contour(x: &HeightConfig, i: usize, j: usize) -> Result<SeparatingContour> {
    let lat = x.lattice();
    if lat.side() < 4 {
        return Err(Error::SideTooSmall { got: lat.side(), min: 4 });
    }
    if !lat.contains(i) {
        return Err(Error::VertexOutOfRange { index: i, side: lat.side(), count: lat.vertex_count() });
    }
    if !lat.contains(j) {
        return Err(Error::VertexOutOfRange { index: j, side: lat.side(), count: lat.vertex_count() });
    }
    if x.heights[i] <= x.heights[j] {
        return Err(Error::NotAboveAt { xi: x.heights[i] as i64, xj: x.heights[j] as i64 });
    }
    let component = level_component(x, i)?;
    let contours = boundary_contours(&lat, &component);
    let (winding, plain): (Vec<Contour>, Vec<Contour>) =
        contours.into_iter().partition(Contour::is_winding);
    assert!(
        winding.len() == 2 || winding.is_empty(),
        "level-set boundary has {} winding components, expected 0 or 2",
        winding.len()
    );
    if winding.len() == 2 {
        let (pa, pb) = (winding[0].period(), winding[1].period());
        assert!(pa.0 == -pb.0 && pa.1 == -pb.1, "winding pair periods {pa:?}, {pb:?} do not cancel");
    }
    let mut separating: Vec<Contour> = Vec::new();
    for c in plain {
        let cut = cut_of(&lat, c.edges.iter());
        if !component_avoiding(&lat, &cut, i)[j] {
            separating.push(c);
        }
    }
    assert!(separating.len() <= 1, "more than one non-winding contour separates the pair");
    let (kind, chosen) = if let Some(c) = separating.pop() {
        (SeparatingKind::SingleLoop, vec![c])
    } else {
        assert_eq!(winding.len(), 2, "no separating contour found for a pair with x_i > x_j");
        (SeparatingKind::WindingPair, winding)
    };
    let cut = cut_of(&lat, chosen.iter().flat_map(|c| c.edges.iter()));
    let inside = component_avoiding(&lat, &cut, i);
    assert!(inside[i] && !inside[j], "separating cut failed to split the pair");
    let total_len = chosen.iter().map(Contour::len).sum();
    Ok(SeparatingContour { kind, contours: chosen, total_len, inside })
}

/// Lower the heights by one on the `i` side of the separating contour and
/// re-pin at the origin. Every edge crossed by the contour loses exactly
/// one unit of gradient and no other edge changes its gradient.
pub fn lower_map(x: &HeightConfig, i: usize, j: usize) -> Result<HeightConfig> {
    let sep = separating_contour(x, i, j)?;
    lower_by(x, &sep)
}

/// Same as [`lower_map`] with the separating contour already extracted.
pub fn lower_by(x: &HeightConfig, sep: &SeparatingContour) -> Result<HeightConfig> {
    let offset = if sep.is_inside(0) { 1 } else { 0 };
    let heights = x
        .heights
        .iter()
        .enumerate()
        .map(|(v, &h)| h - if sep.is_inside(v) { 1 } else { 0 } + offset)
        .collect();
    HeightConfig::new(x.side, heights)
}

/// Peierls sum bound: `480 (3 e^{-beta})^4`, an upper bound for the sum of
/// `e^{-beta |gamma|}` over all separating contours.
pub fn contour_sum_bound<F: Real>(beta: F) -> F {
    let three = F::from_f64_lossy(3.0);
    let base = three * (-beta).exp();
    F::from_f64_lossy(480.0) * base.powi(4)
}

/// Uniform bound on the mean squared height gap at inverse temperature
/// `beta`: `2 phi (1 + phi) / (1 - phi)^3` with `phi` the contour sum
/// bound. Defined only where `phi < 1` (any `beta >= 3` qualifies).
pub fn mean_sq_diff_bound<F: Real>(beta: F) -> Result<F> {
    let phi = contour_sum_bound(beta);
    if phi >= F::one() {
        return Err(Error::BoundDiverges { bound: phi.to_f64().unwrap_or(f64::NAN) });
    }
    let one = F::one();
    let two = one + one;
    Ok(two * phi * (one + phi) / (one - phi).powi(3))
}

struct LoopEnumerator<'a> {
    lat: &'a TorusLattice,
    i: usize,
    j: usize,
    max_len: usize,
    start: usize,
    visited: Vec<bool>,
    dirs: Vec<Direction>,
    vertices: Vec<usize>,
    period: (i64, i64),
    counts: BTreeMap<usize, u64>,
    winding: Vec<WindingLoop>,
}

struct WindingLoop {
    vertices: Vec<bool>,
    cut: Vec<bool>,
    period: (i64, i64),
    len: usize,
}

impl<'a> LoopEnumerator<'a> {
    fn dual_edge(&self, from: usize, d: Direction) -> DirectedDualEdge {
        let n = self.lat.side();
        let tail = (from % n, from / n);
        let to = self.lat.step(from, d);
        DirectedDualEdge { tail, head: (to % n, to / n), dir: d.unit() }
    }

    fn record(&mut self, closing: Direction) {
        let first = self.dirs[0];
        // Each undirected loop is walked once per orientation; keep one.
        if (first as u8) >= (closing.reverse() as u8) {
            return;
        }
        let period = (self.period.0 + closing.unit().0 as i64, self.period.1 + closing.unit().1 as i64);
        let len = self.dirs.len() + 1;
        let mut cut = vec![false; 2 * self.lat.vertex_count()];
        let mut cur = self.start;
        for idx in 0..len {
            let d = if idx < self.dirs.len() { self.dirs[idx] } else { closing };
            cut[cut_id(self.lat, &self.dual_edge(cur, d))] = true;
            cur = self.lat.step(cur, d);
        }
        if period == (0, 0) {
            if !component_avoiding(self.lat, &cut, self.i)[self.j] {
                *self.counts.get_mut(&len).expect("length preinitialized") += 1;
            }
        } else {
            let mut vertices = vec![false; self.lat.vertex_count()];
            for &v in &self.vertices {
                vertices[v] = true;
            }
            self.winding.push(WindingLoop { vertices, cut, period, len });
        }
    }

    fn dfs(&mut self, cur: usize) {
        let depth = self.dirs.len();
        if depth >= self.max_len {
            return;
        }
        for d in Direction::ALL {
            if depth > 0 && d == self.dirs[depth - 1].reverse() {
                continue;
            }
            let next = self.lat.step(cur, d);
            if next == self.start {
                if depth + 1 >= 4 {
                    self.record(d);
                }
                continue;
            }
            if next < self.start || self.visited[next] {
                continue;
            }
            self.visited[next] = true;
            self.vertices.push(next);
            self.dirs.push(d);
            self.period.0 += d.unit().0 as i64;
            self.period.1 += d.unit().1 as i64;
            self.dfs(next);
            self.period.0 -= d.unit().0 as i64;
            self.period.1 -= d.unit().1 as i64;
            self.dirs.pop();
            self.vertices.pop();
            self.visited[next] = false;
        }
    }
}

/// Exhaustively count closed self-avoiding dual loops (and winding pairs
/// with cancelling periods) of total length up to `max_len` whose cut
/// separates `i` from `j`. Geometric counts: they upper-bound the contours
/// realized by actual height fields, which is the direction the counting
/// bound needs.
pub fn enumerate_separating_contours(
    n: usize,
    i: usize,
    j: usize,
    max_len: usize,
) -> Result<BTreeMap<usize, u64>> {
    enumerate_separating_contours_with_budget(n, i, j, max_len, DEFAULT_ENUM_BUDGET)
}

pub fn enumerate_separating_contours_with_budget(
    n: usize,
    i: usize,
    j: usize,
    max_len: usize,
    budget: u128,
) -> Result<BTreeMap<usize, u64>> {
    let lat = TorusLattice::new(n)?;
    if n < 4 {
        return Err(Error::SideTooSmall { got: n, min: 4 });
    }
    if !lat.contains(i) {
        return Err(Error::VertexOutOfRange { index: i, side: n, count: lat.vertex_count() });
    }
    if !lat.contains(j) {
        return Err(Error::VertexOutOfRange { index: j, side: n, count: lat.vertex_count() });
    }
    let required = (lat.vertex_count() as u128)
        .saturating_mul(4)
        .saturating_mul(3u128.saturating_pow(max_len.saturating_sub(1) as u32));
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut counts = BTreeMap::new();
    for len in 1..=max_len {
        counts.insert(len, 0u64);
    }
    let mut all_winding: Vec<WindingLoop> = Vec::new();
    for start in 0..lat.vertex_count() {
        let mut enumerator = LoopEnumerator {
            lat: &lat,
            i,
            j,
            max_len,
            start,
            visited: vec![false; lat.vertex_count()],
            dirs: Vec::new(),
            vertices: vec![start],
            period: (0, 0),
            counts,
            winding: Vec::new(),
        };
        enumerator.visited[start] = true;
        enumerator.dfs(start);
        counts = enumerator.counts;
        all_winding.extend(enumerator.winding);
    }
    // Winding loops separate only in pairs with cancelling periods.
    for a in 0..all_winding.len() {
        for b in a + 1..all_winding.len() {
            let (wa, wb) = (&all_winding[a], &all_winding[b]);
            let total = wa.len + wb.len;
            if total > max_len {
                continue;
            }
            let parallel = (wa.period.0 == wb.period.0 && wa.period.1 == wb.period.1)
                || (wa.period.0 == -wb.period.0 && wa.period.1 == -wb.period.1);
            if !parallel {
                continue;
            }
            if wa.vertices.iter().zip(&wb.vertices).any(|(&x, &y)| x && y) {
                continue;
            }
            let cut: Vec<bool> = wa.cut.iter().zip(&wb.cut).map(|(&x, &y)| x || y).collect();
            if !component_avoiding(&lat, &cut, i)[j] {
                *counts.get_mut(&total).expect("length preinitialized") += 1;
            }
        }
    }
    Ok(counts)
}

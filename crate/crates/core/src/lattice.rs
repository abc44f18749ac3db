//! Geometry of the N x N torus: vertex indexing, neighbor and edge
//! enumeration, the lattice Laplacian, and directed dual edges.
//!
//! Vertices are row-major indices `v = y*N + x` with coordinates
//! `(x, y)` in `[0, N)^2`. The dual lattice is the same grid shifted by
//! `(1/2, 1/2)`; a dual vertex is stored as the integer coordinates of its
//! south-west primal corner, so the geometry stays in integer arithmetic.
//!
//! Height differences across a primal edge induce arrows on the crossing
//! dual edge, oriented so that the larger height sits to the left of the
//! arrow. All contour machinery builds on that convention.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One of the four axis directions on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    East,
    North,
    West,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::East, Direction::North, Direction::West, Direction::South];

    /// Unit vector of the direction (x grows east, y grows north).
    pub fn unit(self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::North => (0, 1),
            Direction::West => (-1, 0),
            Direction::South => (0, -1),
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            Direction::East => Direction::West,
            Direction::North => Direction::South,
            Direction::West => Direction::East,
            Direction::South => Direction::North,
        }
    }

    /// Quarter turn counterclockwise.
    pub fn rot_ccw(self) -> Self {
        match self {
            Direction::East => Direction::North,
            Direction::North => Direction::West,
            Direction::West => Direction::South,
            Direction::South => Direction::East,
        }
    }

    /// Quarter turn clockwise.
    pub fn rot_cw(self) -> Self {
        self.rot_ccw().reverse()
    }
}

/// The N x N periodic box: |Lambda| = N^2 vertices, 2 N^2 undirected edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusLattice {
    side: usize,
}

impl TorusLattice {
    /// A torus needs at least two sites per axis.
    pub fn new(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::SideTooSmall { got: side, min: 2 });
        }
        Ok(TorusLattice { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn vertex_count(&self) -> usize {
        self.side * self.side
    }

    pub fn edge_count(&self) -> usize {
        2 * self.side * self.side
    }

    /// Row-major index of the vertex at `(x, y)` (coordinates taken mod N).
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y % self.side) * self.side + (x % self.side)
    }

    /// Coordinates `(x, y)` of a vertex index.
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.side, v / self.side)
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.vertex_count()
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { index: v, side: self.side, count: self.vertex_count() })
        }
    }

    /// Neighbor of `v` one step in direction `d`, with periodic wrap.
    pub fn step(&self, v: usize, d: Direction) -> usize {
        let n = self.side;
        let (x, y) = self.coords(v);
        let (dx, dy) = d.unit();
        let nx = (x + n).wrapping_add_signed(dx as isize) % n;
        let ny = (y + n).wrapping_add_signed(dy as isize) % n;
        ny * n + nx
    }

    /// The four periodic nearest neighbors of `v`, in east, north, west,
    /// south order. On the 2 x 2 torus the same vertex can appear twice;
    /// the four slots still stand for four distinct edges.
    pub fn neighbors(&self, v: usize) -> Result<[usize; 4]> {
        self.check_vertex(v)?;
        Ok([
            self.step(v, Direction::East),
            self.step(v, Direction::North),
            self.step(v, Direction::West),
            self.step(v, Direction::South),
        ])
    }

    /// Row `k` of the lattice Laplacian: -4 on the diagonal and +1 per
    /// neighboring edge (entries accumulate on multi-edges, so every row
    /// sums to zero for any N).
    pub fn laplacian_row(&self, k: usize) -> Result<BTreeMap<usize, i64>> {
        let mut row = BTreeMap::new();
        row.insert(k, -4i64);
        for w in self.neighbors(k)? {
            *row.entry(w).or_insert(0) += 1;
        }
        Ok(row)
    }

    /// All 2 N^2 undirected edges as (v, neighbor) pairs, each edge once.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |v| {
            [(v, self.step(v, Direction::East)), (v, self.step(v, Direction::North))]
        })
    }

    /// Energy of a height field: sum of squared gradients over all edges.
    pub fn hamiltonian(&self, heights: &[i32]) -> i64 {
        debug_assert_eq!(heights.len(), self.vertex_count());
        self.edges()
            .map(|(a, b)| {
                let d = (heights[a] - heights[b]) as i64;
                d * d
            })
            .sum()
    }

    /// Direction from `l` to an adjacent `m`. On the 2 x 2 torus two
    /// directions reach the same neighbor; the first in ENWS order wins.
    pub fn direction_between(&self, l: usize, m: usize) -> Result<Direction> {
        self.check_vertex(l)?;
        self.check_vertex(m)?;
        Direction::ALL
            .into_iter()
            .find(|&d| self.step(l, d) == m)
            .ok_or(Error::NotAdjacent(l, m))
    }

    /// The arrow on the dual edge crossing `{l, m}`, present when the
    /// heights differ and oriented with the larger height to its left.
    /// Equal heights carry no arrow.
    pub fn dual_edge_of(&self, l: usize, m: usize, x_l: i32, x_m: i32) -> Result<Option<DirectedDualEdge>> {
        let d_lm = self.direction_between(l, m)?;
        if x_l == x_m {
            return Ok(None);
        }
        let toward = if x_l > x_m { l } else { m };
        let away = if x_l > x_m { d_lm } else { d_lm.reverse() };
        // `toward` is the higher endpoint and `away` points from it to the
        // lower one; the arrow is `away` turned a quarter counterclockwise.
        Ok(Some(self.arrow_from_higher(toward, away)))
    }

    /// Dual arrow for the primal edge from `high` one step in `d`, with
    /// the `high` endpoint treated as the larger height.
    pub(crate) fn arrow_from_higher(&self, high: usize, d: Direction) -> DirectedDualEdge {
        let n = self.side;
        let (hx, hy) = self.coords(high);
        let dir = d.rot_ccw();
        // South-west base vertex of the crossed primal edge.
        let (bx, by) = match d {
            Direction::East | Direction::North => (hx, hy),
            Direction::West => ((hx + n - 1) % n, hy),
            Direction::South => (hx, (hy + n - 1) % n),
        };
        let (tail, head) = match (d, dir) {
            // Horizontal primal edge: dual endpoints south and north of it.
            (Direction::East | Direction::West, _) => {
                let south = (bx, (by + n - 1) % n);
                let north = (bx, by);
                if dir == Direction::North {
                    (south, north)
                } else {
                    (north, south)
                }
            }
            // Vertical primal edge: dual endpoints west and east of it.
            _ => {
                let west = ((bx + n - 1) % n, by);
                let east = (bx, by);
                if dir == Direction::East {
                    (west, east)
                } else {
                    (east, west)
                }
            }
        };
        DirectedDualEdge { tail, head, dir: dir.unit() }
    }
}

/// A directed edge of the dual lattice. `tail` and `head` are dual-vertex
/// coordinates mod N (south-west corner convention, implicit +(1/2, 1/2)
/// offset); `dir` is the unwrapped unit direction vector, so
/// `head - tail = dir (mod N)` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DirectedDualEdge {
    pub tail: (usize, usize),
    pub head: (usize, usize),
    pub dir: (i32, i32),
}

impl DirectedDualEdge {
    pub fn reversed(self) -> Self {
        DirectedDualEdge { tail: self.head, head: self.tail, dir: (-self.dir.0, -self.dir.1) }
    }

    pub(crate) fn direction(&self) -> Direction {
        match self.dir {
            (1, 0) => Direction::East,
            (0, 1) => Direction::North,
            (-1, 0) => Direction::West,
            (0, -1) => Direction::South,
            _ => unreachable!("dual edge direction is a unit vector"),
        }
    }

    /// The primal edge this dual edge crosses, as (left, right) vertices
    /// seen when walking along the arrow. The left vertex carries the
    /// larger height whenever the arrow comes from a height field.
    pub fn crossed_edge(&self, lat: &TorusLattice) -> (usize, usize) {
        let (a, b) = self.tail;
        match self.direction() {
            Direction::North => (lat.index(a, b + 1), lat.index(a + 1, b + 1)),
            Direction::South => (lat.index(a + 1, b), lat.index(a, b)),
            Direction::East => (lat.index(a + 1, b + 1), lat.index(a + 1, b)),
            Direction::West => (lat.index(a, b), lat.index(a, b + 1)),
        }
    }

    /// Canonical undirected id of the crossed primal edge: (south-west
    /// endpoint, axis), with axis 0 for horizontal and 1 for vertical.
    pub(crate) fn crossed_edge_id(&self, lat: &TorusLattice) -> (usize, u8) {
        let (a, b) = self.tail;
        match self.direction() {
            Direction::North => (lat.index(a, b + 1), 0),
            Direction::South => (lat.index(a, b), 0),
            Direction::East => (lat.index(a + 1, b), 1),
            Direction::West => (lat.index(a, b), 1),
        }
    }
}

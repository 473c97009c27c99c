//! Discretized Brownian paths pinned at the origin at time 0.
//!
//! Each half of the path is generated by the Lévy construction: with
//! `N = m 2^L` steps (`m` odd) the path is first sampled on the `m + 1`
//! coarse nodes and then refined `L` times by Brownian-bridge midpoints.
//! Draws are consumed level by level, so the path at `2N` steps reproduces
//! the path at `N` steps bit for bit on the shared nodes.
//!
//! Every half owns a ChaCha8 stream selected by `(master seed, path index,
//! side)`, which makes path `i` independent of how many paths are drawn and
//! of the order in which they are drawn.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid, either two-sided on `[-T, T]` or one-sided on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t: f64,
    pub n_half: usize,
    pub two_sided: bool,
}

impl TimeGrid {
    /// Nodes `-T + i dt`, `i = 0..=2 n_half`.
    pub fn two_sided(t: f64, n_half: usize) -> Result<Self> {
        Self::new(t, n_half, true)
    }

    /// Nodes `i dt`, `i = 0..=n_half`.
    pub fn one_sided(t: f64, n_half: usize) -> Result<Self> {
        Self::new(t, n_half, false)
    }

    /// Grid with the step closest to `dt` that divides `T` evenly.
    pub fn with_step(t: f64, dt: f64, two_sided: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let n = (t / dt).round().max(1.0) as usize;
        Self::new(t, n, two_sided)
    }

    fn new(t: f64, n_half: usize, two_sided: bool) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon T must be positive, got {t}"
            )));
        }
        if n_half == 0 {
            return Err(Error::invalid("n_half must be at least 1"));
        }
        Ok(TimeGrid {
            t,
            n_half,
            two_sided,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t / self.n_half as f64
    }

    pub fn n_nodes(&self) -> usize {
        if self.two_sided {
            2 * self.n_half + 1
        } else {
            self.n_half + 1
        }
    }

    /// Index of the node at time 0.
    pub fn zero_index(&self) -> usize {
        if self.two_sided {
            self.n_half
        } else {
            0
        }
    }

    pub fn start(&self) -> f64 {
        if self.two_sided {
            -self.t
        } else {
            0.0
        }
    }

    /// Length of the time interval covered.
    pub fn span(&self) -> f64 {
        if self.two_sided {
            2.0 * self.t
        } else {
            self.t
        }
    }

    /// Time of node `i`; the first, zero and last nodes are exact.
    pub fn time(&self, i: usize) -> f64 {
        let z = self.zero_index();
        if i == z {
            0.0
        } else if i + 1 == self.n_nodes() {
            self.t
        } else if i == 0 {
            self.start()
        } else {
            (i as f64 - z as f64) * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.time(i)).collect()
    }

    /// The same horizon with twice as many steps.
    pub fn refined(&self) -> Self {
        TimeGrid {
            n_half: 2 * self.n_half,
            ..*self
        }
    }
}

/// Identifies one path: the run's master seed and the path's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        PathSeed { master, index }
    }

    /// Stream for one half: side 0 runs forward from time 0, side 1 backward.
    fn rng(&self, side: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(2 * self.index + side);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub grid: TimeGrid,
    pub d: usize,
    /// Node-major: `positions[i * d + c]` is coordinate `c` at node `i`.
    pub positions: Vec<f64>,
    pub seed: Option<PathSeed>,
}

/// Sample one half of a path: `n` steps of length `dt` starting at 0.
/// Returns `n + 1` node-major points in `d` dimensions.
fn sample_half(n: usize, dt: f64, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let levels = n.trailing_zeros() as usize;
    let m = n >> levels;
    let mut out = vec![0.0; (n + 1) * d];
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    // coarse skeleton: m steps of length h0
    let stride = 1usize << levels;
    let h0 = dt * stride as f64;
    let sd0 = h0.sqrt();
    for j in 1..=m {
        let (prev, cur) = ((j - 1) * stride, j * stride);
        for c in 0..d {
            out[cur * d + c] = out[prev * d + c] + sd0 * normal();
        }
    }
    // midpoint refinement; a bridge over a span h has midpoint variance h/4
    let mut step = stride;
    while step > 1 {
        let half = step / 2;
        let sd = (dt * step as f64 / 4.0).sqrt();
        let mut left = 0;
        while left < n {
            let (mid, right) = (left + half, left + step);
            for c in 0..d {
                out[mid * d + c] = 0.5 * (out[left * d + c] + out[right * d + c]) + sd * normal();
            }
            left = right;
        }
        step = half;
    }
    out
}

/// Draw path `seed.index` of the run `seed.master` on `grid`.
pub fn sample_path(grid: &TimeGrid, d: usize, seed: PathSeed) -> Result<BrownianPath> {
    if !(d == 2 || d == 3) {
        return Err(Error::invalid(format!("dimension must be 2 or 3, got {d}")));
    }
    let n = grid.n_half;
    let dt = grid.dt();
    let forward = sample_half(n, dt, d, &mut seed.rng(0));
    let positions = if grid.two_sided {
        let backward = sample_half(n, dt, d, &mut seed.rng(1));
        let mut p = Vec::with_capacity(grid.n_nodes() * d);
        for i in (1..=n).rev() {
            p.extend_from_slice(&backward[i * d..(i + 1) * d]);
        }
        p.extend_from_slice(&forward);
        p
    } else {
        forward
    };
    Ok(BrownianPath {
        grid: *grid,
        d,
        positions,
        seed: Some(seed),
    })
}

impl BrownianPath {
    /// Wrap explicit node positions (test injection). The point at time 0
    /// must be the origin.
    pub fn from_positions(grid: &TimeGrid, d: usize, positions: Vec<f64>) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(Error::invalid(format!("dimension must be 2 or 3, got {d}")));
        }
        if positions.len() != grid.n_nodes() * d {
            return Err(Error::invalid(format!(
                "expected {} coordinates, got {}",
                grid.n_nodes() * d,
                positions.len()
            )));
        }
        let z = grid.zero_index();
        if positions[z * d..(z + 1) * d].iter().any(|&x| x != 0.0) {
            return Err(Error::invalid(
                "path must be pinned at the origin at time 0",
            ));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("path positions must be finite"));
        }
        Ok(BrownianPath {
            grid: *grid,
            d,
            positions,
            seed: None,
        })
    }

    /// The constant path `B = 0`.
    pub fn zero(grid: &TimeGrid, d: usize) -> Result<Self> {
        Self::from_positions(grid, d, vec![0.0; grid.n_nodes() * d])
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    /// `|B_i - B_j|`.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let d = self.d;
        let (a, b) = (
            &self.positions[i * d..i * d + d],
            &self.positions[j * d..j * d + d],
        );
        let mut s = 0.0;
        for c in 0..d {
            let x = a[c] - b[c];
            s += x * x;
        }
        s.sqrt()
    }

    /// `|B_i|`.
    pub fn norm(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `B_T - B_start`: `B_T - B_{-T}` on a two-sided grid, `B_T` on a one-sided one.
    pub fn endpoint_increment(&self) -> Vec<f64> {
        let last = self.n_nodes() - 1;
        (0..self.d)
            .map(|c| self.positions[last * self.d + c] - self.positions[c])
            .collect()
    }

    /// The path run backwards in time, re-pinned at the origin.
    pub fn time_reversed(&self) -> Self {
        let n = self.n_nodes();
        let d = self.d;
        let mut positions = Vec::with_capacity(self.positions.len());
        for i in (0..n).rev() {
            positions.extend_from_slice(self.point(i));
        }
        let z = self.grid.zero_index();
        let shift: Vec<f64> = positions[z * d..(z + 1) * d].to_vec();
        for i in 0..n {
            for c in 0..d {
                positions[i * d + c] -= shift[c];
            }
        }
        BrownianPath {
            grid: self.grid,
            d,
            positions,
            seed: None,
        }
    }

    /// CSV with header `t,x1,..,xd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.d).map(|c| format!("x{c}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..self.n_nodes() {
            write!(w, "{:e}", self.grid.time(i))?;
            for x in self.point(i) {
                write!(w, ",{x:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_hit_landmarks() {
        let g = TimeGrid::two_sided(1.3, 7).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 15);
        assert_eq!(nodes[0], -1.3);
        assert_eq!(nodes[7], 0.0);
        assert_eq!(nodes[14], 1.3);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        let g = TimeGrid::one_sided(0.5, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.125, 0.25, 0.375, 0.5]);
        assert!(TimeGrid::two_sided(0.0, 3).is_err());
        assert!(TimeGrid::two_sided(1.0, 0).is_err());
        assert_eq!(
            TimeGrid::with_step(1.0, 1.0 / 64.0, true).unwrap().n_half,
            64
        );
    }

    #[test]
    fn pinned_and_deterministic() {
        let g = TimeGrid::two_sided(1.0, 12).unwrap();
        let a = sample_path(&g, 3, PathSeed::new(5, 9)).unwrap();
        let b = sample_path(&g, 3, PathSeed::new(5, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.point(12), &[0.0, 0.0, 0.0]);
        let c = sample_path(&g, 3, PathSeed::new(5, 10)).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn refinement_shares_coarse_nodes_exactly() {
        for n in [1usize, 3, 8, 12, 64] {
            let g = TimeGrid::two_sided(2.0, n).unwrap();
            let coarse = sample_path(&g, 2, PathSeed::new(1, 4)).unwrap();
            let fine = sample_path(&g.refined(), 2, PathSeed::new(1, 4)).unwrap();
            for i in 0..coarse.n_nodes() {
                assert_eq!(coarse.point(i), fine.point(2 * i), "n={n} i={i}");
            }
        }
    }

    #[test]
    fn one_sided_matches_forward_half() {
        let two = sample_path(
            &TimeGrid::two_sided(1.0, 8).unwrap(),
            3,
            PathSeed::new(3, 2),
        )
        .unwrap();
        let one = sample_path(
            &TimeGrid::one_sided(1.0, 8).unwrap(),
            3,
            PathSeed::new(3, 2),
        )
        .unwrap();
        for i in 0..=8 {
            assert_eq!(one.point(i), two.point(8 + i));
        }
    }

    #[test]
    fn injection_and_increment() {
        let g = TimeGrid::two_sided(1.0, 2).unwrap();
        let z = BrownianPath::zero(&g, 3).unwrap();
        assert_eq!(z.endpoint_increment(), vec![0.0; 3]);
        let mut pos = vec![0.0; 15];
        pos[0..3].copy_from_slice(&[1.0, 2.0, 3.0]);
        pos[12..15].copy_from_slice(&[-1.0, 0.5, 4.0]);
        let p = BrownianPath::from_positions(&g, 3, pos.clone()).unwrap();
        assert_eq!(p.endpoint_increment(), vec![-2.0, -1.5, 1.0]);
        pos[6] = 0.1;
        assert!(BrownianPath::from_positions(&g, 3, pos).is_err());
    }

    #[test]
    fn time_reversal_is_an_involution() {
        let g = TimeGrid::two_sided(1.0, 6).unwrap();
        let p = sample_path(&g, 2, PathSeed::new(8, 1)).unwrap();
        let r = p.time_reversed();
        assert_eq!(r.point(6), &[0.0, 0.0]);
        let back = r.time_reversed();
        for (a, b) in back.positions.iter().zip(&p.positions) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_dump() {
        let g = TimeGrid::one_sided(1.0, 2).unwrap();
        let p = BrownianPath::zero(&g, 2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "t,x1,x2");
        assert_eq!(s.lines().count(), 4);
    }
}

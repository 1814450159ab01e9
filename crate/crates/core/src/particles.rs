//! Particle sets on the unit square and fixed-radius neighbor search.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SphError};

/// How a particle set was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    RegularLattice,
    Jittered { seed: u64, amplitude_fraction: f64 },
}

/// Particles in `[0,1]^2`, each owning the volume `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    positions: Vec<[f64; 2]>,
    volume: f64,
    provenance: Provenance,
}

fn lattice_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side < 2 || side * side != n {
        return Err(SphError::NotPerfectSquare(n));
    }
    Ok(side)
}

impl ParticleSet {
    /// `s x s` cell-centred lattice, particle `j*s + i` at `((i+½)/s, (j+½)/s)`.
    pub fn regular(n: usize) -> Result<Self> {
        let side = lattice_side(n)?;
        let inv = 1.0 / side as f64;
        let positions = (0..side)
            .flat_map(|j| (0..side).map(move |i| [(i as f64 + 0.5) * inv, (j as f64 + 0.5) * inv]))
            .collect();
        Ok(ParticleSet {
            positions,
            volume: 1.0 / n as f64,
            provenance: Provenance::RegularLattice,
        })
    }

    /// Regular lattice with each coordinate shifted by an independent uniform
    /// offset in `[-a Δ, a Δ]`, `Δ = 1/√N`, then clamped to the unit square.
    /// Offsets are drawn in particle order, x before y, from ChaCha8 seeded
    /// with `seed`.
    pub fn irregular(n: usize, amplitude_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&amplitude_fraction) {
            return Err(SphError::InvalidJitter(amplitude_fraction));
        }
        let mut set = Self::regular(n)?;
        let spacing = 1.0 / set.lattice_side() as f64;
        let amp = amplitude_fraction * spacing;
        if amp > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for p in &mut set.positions {
                let ox: f64 = rng.gen_range(-amp..=amp);
                let oy: f64 = rng.gen_range(-amp..=amp);
                p[0] = (p[0] + ox).clamp(0.0, 1.0);
                p[1] = (p[1] + oy).clamp(0.0, 1.0);
            }
        }
        set.provenance = Provenance::Jittered {
            seed,
            amplitude_fraction,
        };
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn position(&self, a: usize) -> [f64; 2] {
        self.positions[a]
    }

    /// Per-particle volume `ΔV = 1/N`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn lattice_side(&self) -> usize {
        (self.len() as f64).sqrt().round() as usize
    }

    /// Distance from particle `a` to the nearest edge of the unit square.
    pub fn edge_distance(&self, a: usize) -> f64 {
        let [x, y] = self.positions[a];
        x.min(1.0 - x).min(y).min(1.0 - y)
    }

    /// Mask of particles farther than `margin` from every edge.
    pub fn interior_mask(&self, margin: f64) -> Vec<bool> {
        (0..self.len()).map(|a| self.edge_distance(a) > margin).collect()
    }

    /// CSV dump with header `x,y`, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y")?;
        for [x, y] in &self.positions {
            writeln!(out, "{x:.16e},{y:.16e}")?;
        }
        Ok(())
    }
}

/// Uniform bucket grid over the unit square. Bucket contents are stored in
/// particle-index order.
#[derive(Debug, Clone)]
pub struct CellGrid {
    dims: usize,
    cell: f64,
    starts: Vec<u32>,
    entries: Vec<u32>,
}

impl CellGrid {
    /// Grid whose cells are at least `radius / 2` wide, capped at about
    /// `4N` cells so tiny radii stay cheap.
    pub fn new(particles: &ParticleSet, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let cap = 2 * (particles.len() as f64).sqrt().ceil() as usize;
        let dims = ((2.0 / radius).floor() as usize).clamp(1, cap.max(1));
        let cell = 1.0 / dims as f64;
        let mut counts = vec![0u32; dims * dims + 1];
        let keys: Vec<usize> = particles
            .positions()
            .iter()
            .map(|p| Self::key(dims, cell, *p))
            .collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut entries = vec![0u32; particles.len()];
        for (a, &k) in keys.iter().enumerate() {
            entries[fill[k] as usize] = a as u32;
            fill[k] += 1;
        }
        Ok(CellGrid {
            dims,
            cell,
            starts,
            entries,
        })
    }

    fn coord(dims: usize, cell: f64, v: f64) -> usize {
        ((v / cell) as usize).min(dims - 1)
    }

    fn key(dims: usize, cell: f64, p: [f64; 2]) -> usize {
        Self::coord(dims, cell, p[1]) * dims + Self::coord(dims, cell, p[0])
    }

    /// Calls `visit(b, dx, dy)` for every particle with `|x_b - p| < radius`,
    /// where `(dx, dy) = x_b - p`. Visit order is bucket order.
    #[inline]
    fn scan(&self, positions: &[[f64; 2]], p: [f64; 2], radius: f64, mut visit: impl FnMut(u32, f64, f64)) {
        let r2 = radius * radius;
        let reach = (radius / self.cell).ceil() as isize;
        let cx = Self::coord(self.dims, self.cell, p[0]) as isize;
        let cy = Self::coord(self.dims, self.cell, p[1]) as isize;
        let last = self.dims as isize - 1;
        for gy in (cy - reach).max(0)..=(cy + reach).min(last) {
            let row = gy as usize * self.dims;
            for gx in (cx - reach).max(0)..=(cx + reach).min(last) {
                let k = row + gx as usize;
                let bucket = &self.entries[self.starts[k] as usize..self.starts[k + 1] as usize];
                for &b in bucket {
                    let q = positions[b as usize];
                    let dx = q[0] - p[0];
                    let dy = q[1] - p[1];
                    if dx * dx + dy * dy < r2 {
                        visit(b, dx, dy);
                    }
                }
            }
        }
    }

    /// Indices within `radius` of particle `a`, ascending, written to `out`.
    pub fn gather(&self, particles: &ParticleSet, a: usize, radius: f64, out: &mut Vec<u32>) {
        out.clear();
        let positions = particles.positions();
        self.scan(positions, positions[a], radius, |b, _, _| out.push(b));
        out.sort_unstable();
    }

    /// Number of particles within `radius` of particle `a`.
    pub fn count(&self, particles: &ParticleSet, a: usize, radius: f64) -> usize {
        let positions = particles.positions();
        let mut n = 0;
        self.scan(positions, positions[a], radius, |_, _, _| n += 1);
        n
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(SphError::InvalidRadius(radius))
    }
}

/// Compressed adjacency: particle `a`'s neighbors (itself included) are
/// `indices[offsets[a]..offsets[a+1]]`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    radius: f64,
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

impl NeighborList {
    /// All pairs with `|x_a - x_b| < radius`, found through a [`CellGrid`].
    pub fn build(particles: &ParticleSet, radius: f64) -> Result<Self> {
        let grid = CellGrid::new(particles, radius)?;
        let per_particle: Vec<Vec<u32>> = (0..particles.len())
            .into_par_iter()
            .map_init(Vec::new, |scratch, a| {
                grid.gather(particles, a, radius, scratch);
                scratch.clone()
            })
            .collect();
        let mut offsets = Vec::with_capacity(particles.len() + 1);
        offsets.push(0);
        let total = per_particle.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(total);
        for list in per_particle {
            indices.extend_from_slice(&list);
            offsets.push(indices.len());
        }
        Ok(NeighborList {
            radius,
            offsets,
            indices,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of particles covered.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, a: usize) -> &[u32] {
        &self.indices[self.offsets[a]..self.offsets[a + 1]]
    }

    pub fn total_pairs(&self) -> usize {
        self.indices.len()
    }

    /// Listed pairs divided by the particle count.
    pub fn mean_neighbors(&self) -> f64 {
        self.total_pairs() as f64 / self.len() as f64
    }
}

/// Convenience wrapper for [`NeighborList::build`].
pub fn build_neighbor_list(particles: &ParticleSet, radius: f64) -> Result<NeighborList> {
    NeighborList::build(particles, radius)
}

/// Mean neighbor count (self included) over particles whose distance to
/// every edge exceeds `radius`.
pub fn mean_interior_neighbors(particles: &ParticleSet, radius: f64) -> Result<f64> {
    let grid = CellGrid::new(particles, radius)?;
    let interior: Vec<usize> = (0..particles.len())
        .filter(|&a| particles.edge_distance(a) > radius)
        .collect();
    if interior.is_empty() {
        return Err(SphError::EmptyInterior { radius });
    }
    let total: usize = interior
        .par_iter()
        .map(|&a| grid.count(particles, a, radius))
        .sum();
    Ok(total as f64 / interior.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_lattice() {
        let p = ParticleSet::regular(4).unwrap();
        assert_eq!(
            p.positions(),
            &[[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]
        );
        assert_eq!(p.volume(), 0.25);
    }

    #[test]
    fn lattice_625_spacing() {
        let p = ParticleSet::regular(625).unwrap();
        assert_eq!(p.lattice_side(), 25);
        let dx = p.position(1)[0] - p.position(0)[0];
        assert!((dx - 0.04).abs() < 1e-15);
        assert!((p.position(25)[1] - p.position(0)[1] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_square_counts() {
        assert_eq!(ParticleSet::regular(5), Err(SphError::NotPerfectSquare(5)));
        assert_eq!(ParticleSet::regular(1), Err(SphError::NotPerfectSquare(1)));
        assert!(ParticleSet::irregular(99, 0.1, 1).is_err());
    }

    #[test]
    fn jitter_bounds() {
        assert!(matches!(ParticleSet::irregular(16, 0.5, 1), Err(SphError::InvalidJitter(_))));
        assert!(matches!(ParticleSet::irregular(16, -0.1, 1), Err(SphError::InvalidJitter(_))));
        assert!(ParticleSet::irregular(16, f64::NAN, 1).is_err());
    }

    #[test]
    fn zero_jitter_is_the_lattice() {
        let a = ParticleSet::irregular(400, 0.0, 9).unwrap();
        let b = ParticleSet::regular(400).unwrap();
        assert_eq!(a.positions(), b.positions());
    }

    #[test]
    fn jitter_is_deterministic_and_bounded() {
        let a = ParticleSet::irregular(625, 0.45, 42).unwrap();
        let b = ParticleSet::irregular(625, 0.45, 42).unwrap();
        assert_eq!(a, b);
        let c = ParticleSet::irregular(625, 0.45, 43).unwrap();
        assert_ne!(a.positions(), c.positions());
        let lattice = ParticleSet::regular(625).unwrap();
        for (p, q) in a.positions().iter().zip(lattice.positions()) {
            assert!((p[0] - q[0]).abs() <= 0.45 * 0.04 + 1e-15);
            assert!((p[1] - q[1]).abs() <= 0.45 * 0.04 + 1e-15);
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
        }
    }

    #[test]
    fn jittered_particles_never_coincide() {
        let p = ParticleSet::irregular(625, 0.45, 42).unwrap();
        let pos = p.positions();
        let mut min = f64::INFINITY;
        for a in 0..pos.len() {
            for b in a + 1..pos.len() {
                let d = ((pos[a][0] - pos[b][0]).powi(2) + (pos[a][1] - pos[b][1]).powi(2)).sqrt();
                min = min.min(d);
            }
        }
        assert!(min > 0.0);
    }

    #[test]
    fn small_lattice_neighbors() {
        let p = ParticleSet::regular(4).unwrap();
        let nl = NeighborList::build(&p, 0.6).unwrap();
        for a in 0..4 {
            assert_eq!(nl.neighbors(a).len(), 3, "diagonal at 0.707 is excluded");
        }
    }

    #[test]
    fn degenerate_radius_lists_only_self() {
        let p = ParticleSet::irregular(100, 0.3, 5).unwrap();
        let nl = NeighborList::build(&p, 1e-9).unwrap();
        for a in 0..p.len() {
            assert_eq!(nl.neighbors(a), &[a as u32]);
        }
        assert_eq!(nl.mean_neighbors(), 1.0);
    }

    #[test]
    fn rejects_bad_radius() {
        let p = ParticleSet::regular(4).unwrap();
        assert!(matches!(NeighborList::build(&p, 0.0), Err(SphError::InvalidRadius(_))));
        assert!(NeighborList::build(&p, -1.0).is_err());
        assert!(NeighborList::build(&p, f64::NAN).is_err());
    }

    #[test]
    fn table1_first_row_mean_neighbors() {
        let p = ParticleSet::regular(625).unwrap();
        let nl = NeighborList::build(&p, 0.342).unwrap();
        // Boundary truncation pulls the all-particle mean well under the
        // interior disk count. Oracle: mean area of a radius-r disk clipped
        // to the unit square, πr² - 8r³/3 + r⁴/2, times N.
        let r: f64 = 0.342;
        let clipped = (std::f64::consts::PI * r * r - 8.0 * r.powi(3) / 3.0 + r.powi(4) / 2.0) * 625.0;
        let mean = nl.mean_neighbors();
        assert!((mean - clipped).abs() <= 0.03 * clipped, "{mean} vs {clipped}");
        assert!(mean < 213.0);
        assert_eq!(nl.mean_neighbors(), nl.total_pairs() as f64 / 625.0);
        let interior = mean_interior_neighbors(&p, 0.342).unwrap();
        assert!((interior - 213.0).abs() <= 0.1 * 213.0, "{interior}");
    }

    #[test]
    fn interior_mean_table1_row4() {
        let p = ParticleSet::regular(10_000).unwrap();
        let n = mean_interior_neighbors(&p, 0.215).unwrap();
        assert!((n - 1436.0).abs() <= 0.05 * 1436.0, "{n}");
    }

    #[test]
    fn empty_interior_is_signalled() {
        let p = ParticleSet::regular(4).unwrap();
        assert!(matches!(
            mean_interior_neighbors(&p, 0.9),
            Err(SphError::EmptyInterior { .. })
        ));
    }

    #[test]
    fn interior_density_matches_disk_area() {
        for (n, radius) in [(625usize, 0.1), (2500, 0.05), (10_000, 0.08)] {
            let p = ParticleSet::regular(n).unwrap();
            let got = mean_interior_neighbors(&p, radius).unwrap();
            let disk = std::f64::consts::PI * radius * radius * n as f64;
            assert!(got >= 0.9 * disk && got <= 1.1 * disk, "N={n} r={radius}: {got} vs {disk}");
        }
    }

    #[test]
    fn regular_interior_counts_are_uniform() {
        let p = ParticleSet::regular(900).unwrap();
        let radius = 0.11;
        let nl = NeighborList::build(&p, radius).unwrap();
        let counts: Vec<usize> = (0..p.len())
            .filter(|&a| p.edge_distance(a) > radius)
            .map(|a| nl.neighbors(a).len())
            .collect();
        assert!(!counts.is_empty());
        assert!(counts.iter().all(|&c| c == counts[0]));
    }

    #[test]
    fn csv_dump_round_trips() {
        let p = ParticleSet::irregular(16, 0.3, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y"));
        for (line, q) in lines.zip(p.positions()) {
            let (x, y) = line.split_once(',').unwrap();
            assert_eq!(x.parse::<f64>().unwrap(), q[0]);
            assert_eq!(y.parse::<f64>().unwrap(), q[1]);
        }
    }
}

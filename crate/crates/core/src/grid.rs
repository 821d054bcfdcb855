//! Uniform grids on an interval and on a rectangle, weighted inner products,
//! potentials and Gaussian initial states.
//!
//! Every interior node carries one unknown. Boundary nodes are the edge nodes
//! that the central stencil reaches from the interior; in 2D the four corners
//! are never reached and are not part of the boundary.

use crate::error::{Error, Result};
use crate::numerics::{dot, C64, ZERO};

/// Uniform grid on `(a, b)` with `n_interior` unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub n_interior: usize,
    pub h: f64,
}

/// Uniform grid on `(0, lx) × (0, ly)` with one spacing in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    OneD(Grid1D),
    TwoD(Grid2D),
}

/// Where a stencil arm of an interior node lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Interior(usize),
    Boundary(usize),
}

pub fn make_grid_1d(a: f64, b: f64, n_interior: usize) -> Result<Grid1D> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::BadGeometry(format!("interval ({a}, {b}) is empty or not finite")));
    }
    if n_interior < 3 {
        return Err(Error::BadGeometry(format!("need at least 3 interior nodes, got {n_interior}")));
    }
    Ok(Grid1D { a, b, n_interior, h: (b - a) / (n_interior + 1) as f64 })
}

pub fn make_grid_2d(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Grid2D> {
    if !(lx.is_finite() && ly.is_finite()) || lx <= 0.0 || ly <= 0.0 {
        return Err(Error::BadGeometry(format!("side lengths ({lx}, {ly}) must be positive")));
    }
    if nx < 3 || ny < 3 {
        return Err(Error::BadGeometry(format!("need at least 3 interior nodes per axis, got {nx}x{ny}")));
    }
    let hx = lx / (nx + 1) as f64;
    let hy = ly / (ny + 1) as f64;
    if (hx - hy).abs() > 1e-12 {
        return Err(Error::InconsistentSpacing { hx, hy });
    }
    Ok(Grid2D { lx, ly, nx, ny, h: hx })
}

impl Grid1D {
    /// Coordinate of node `k`, `k = 0..=n_interior + 1`.
    pub fn node(&self, k: usize) -> f64 {
        self.a + k as f64 * self.h
    }
}

impl Grid2D {
    /// Interior index of node `(i, j)`, `1 ≤ i ≤ nx`, `1 ≤ j ≤ ny`.
    pub fn interior_index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.nx + (i - 1)
    }

    /// Lattice coordinates `(i, j)` of boundary node `m`.
    ///
    /// Order: bottom edge left to right, top edge left to right, left edge
    /// bottom to top, right edge bottom to top.
    pub fn boundary_node(&self, m: usize) -> (usize, usize) {
        let (nx, ny) = (self.nx, self.ny);
        if m < nx {
            (m + 1, 0)
        } else if m < 2 * nx {
            (m - nx + 1, ny + 1)
        } else if m < 2 * nx + ny {
            (0, m - 2 * nx + 1)
        } else {
            (nx + 1, m - 2 * nx - ny + 1)
        }
    }

    /// Interior node reached by stepping inward from boundary node `m`.
    pub fn adjacent_node(&self, m: usize) -> (usize, usize) {
        let (i, j) = self.boundary_node(m);
        if j == 0 {
            (i, 1)
        } else if j == self.ny + 1 {
            (i, self.ny)
        } else if i == 0 {
            (1, j)
        } else {
            (self.nx, j)
        }
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::OneD(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::TwoD(g)
    }
}

impl Grid {
    pub fn dim(&self) -> usize {
        match self {
            Grid::OneD(_) => 1,
            Grid::TwoD(_) => 2,
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Grid::OneD(g) => g.h,
            Grid::TwoD(g) => g.h,
        }
    }

    pub fn n_interior(&self) -> usize {
        match self {
            Grid::OneD(g) => g.n_interior,
            Grid::TwoD(g) => g.nx * g.ny,
        }
    }

    pub fn n_boundary(&self) -> usize {
        match self {
            Grid::OneD(_) => 2,
            Grid::TwoD(g) => 2 * g.nx + 2 * g.ny,
        }
    }

    /// Volume weight `h^dim`.
    pub fn interior_weight(&self) -> f64 {
        self.h().powi(self.dim() as i32)
    }

    /// Surface weight `h^(dim-1)`.
    pub fn boundary_weight(&self) -> f64 {
        self.h().powi(self.dim() as i32 - 1)
    }

    /// Interior index adjacent to each boundary node.
    pub fn adjacent_indices(&self) -> Vec<usize> {
        match self {
            Grid::OneD(g) => vec![0, g.n_interior - 1],
            Grid::TwoD(g) => (0..self.n_boundary())
                .map(|m| {
                    let (i, j) = g.adjacent_node(m);
                    g.interior_index(i, j)
                })
                .collect(),
        }
    }

    /// Stencil arms of interior node `k`.
    pub fn neighbors(&self, k: usize) -> Vec<Neighbor> {
        match self {
            Grid::OneD(g) => {
                let left = if k == 0 { Neighbor::Boundary(0) } else { Neighbor::Interior(k - 1) };
                let right = if k + 1 == g.n_interior { Neighbor::Boundary(1) } else { Neighbor::Interior(k + 1) };
                vec![left, right]
            }
            Grid::TwoD(g) => {
                let (nx, ny) = (g.nx, g.ny);
                let i = k % nx + 1;
                let j = k / nx + 1;
                let west = if i == 1 { Neighbor::Boundary(2 * nx + j - 1) } else { Neighbor::Interior(k - 1) };
                let east = if i == nx { Neighbor::Boundary(2 * nx + ny + j - 1) } else { Neighbor::Interior(k + 1) };
                let south = if j == 1 { Neighbor::Boundary(i - 1) } else { Neighbor::Interior(k - nx) };
                let north = if j == ny { Neighbor::Boundary(nx + i - 1) } else { Neighbor::Interior(k + nx) };
                vec![west, east, south, north]
            }
        }
    }

    /// Physical coordinates of interior node `k`.
    pub fn interior_coords(&self, k: usize) -> Vec<f64> {
        match self {
            Grid::OneD(g) => vec![g.node(k + 1)],
            Grid::TwoD(g) => {
                let i = k % g.nx + 1;
                let j = k / g.nx + 1;
                vec![i as f64 * g.h, j as f64 * g.h]
            }
        }
    }

    /// Physical coordinates of boundary node `m`.
    pub fn boundary_coords(&self, m: usize) -> Vec<f64> {
        match self {
            Grid::OneD(g) => vec![if m == 0 { g.a } else { g.b }],
            Grid::TwoD(g) => {
                let (i, j) = g.boundary_node(m);
                vec![i as f64 * g.h, j as f64 * g.h]
            }
        }
    }

    /// Open box `(lower, upper)` of the domain.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Grid::OneD(g) => (vec![g.a], vec![g.b]),
            Grid::TwoD(g) => (vec![0.0, 0.0], vec![g.lx, g.ly]),
        }
    }

    pub fn zero_state(&self) -> StateVector {
        StateVector { interior: vec![ZERO; self.n_interior()], boundary: vec![ZERO; self.n_boundary()] }
    }

    pub fn check_interior(&self, v: &[C64]) -> Result<()> {
        check_len(self.n_interior(), v.len())
    }

    pub fn check_boundary(&self, v: &[C64]) -> Result<()> {
        check_len(self.n_boundary(), v.len())
    }

    pub fn check_state(&self, s: &StateVector) -> Result<()> {
        self.check_interior(&s.interior)?;
        self.check_boundary(&s.boundary)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, found })
    }
}

/// Amplitudes on interior and boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub interior: Vec<C64>,
    pub boundary: Vec<C64>,
}

impl StateVector {
    pub fn new(grid: &Grid, interior: Vec<C64>, boundary: Vec<C64>) -> Result<Self> {
        let s = Self { interior, boundary };
        grid.check_state(&s)?;
        Ok(s)
    }
}

/// `h^dim Σ ψ_k conj(φ_k)` over interior nodes.
pub fn inner_product(grid: &Grid, psi: &StateVector, phi: &StateVector) -> Result<C64> {
    grid.check_state(psi)?;
    grid.check_state(phi)?;
    Ok(interior_inner(grid, &psi.interior, &phi.interior))
}

/// Interior inner product on bare coefficient vectors (sizes unchecked).
pub fn interior_inner(grid: &Grid, x: &[C64], y: &[C64]) -> C64 {
    dot(x, y) * grid.interior_weight()
}

/// `h^(dim-1) Σ ξ_m conj(χ_m)` over boundary nodes.
pub fn boundary_inner_product(grid: &Grid, xi: &[C64], chi: &[C64]) -> Result<C64> {
    grid.check_boundary(xi)?;
    grid.check_boundary(chi)?;
    Ok(dot(xi, chi) * grid.boundary_weight())
}

/// Normalized packet `exp(-|x-c|²/(4σ²) + i k·x)` on interior nodes, zero on the boundary.
pub fn gaussian_packet(grid: &Grid, center: &[f64], sigma: f64, momentum: &[f64]) -> Result<StateVector> {
    let dim = grid.dim();
    if center.len() != dim || momentum.len() != dim {
        return Err(Error::BadPacket(format!("center and momentum need {dim} components")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::BadPacket(format!("width must be positive, got {sigma}")));
    }
    if momentum.iter().any(|k| !k.is_finite()) {
        return Err(Error::BadPacket("momentum must be finite".into()));
    }
    let (lo, hi) = grid.bounds();
    for d in 0..dim {
        if !(center[d] > lo[d] && center[d] < hi[d]) {
            return Err(Error::BadPacket(format!("center {:?} is not strictly inside the domain", center)));
        }
    }
    let mut interior: Vec<C64> = (0..grid.n_interior())
        .map(|k| {
            let x = grid.interior_coords(k);
            let r2: f64 = x.iter().zip(center).map(|(xi, ci)| (xi - ci).powi(2)).sum();
            let phase: f64 = x.iter().zip(momentum).map(|(xi, ki)| xi * ki).sum();
            C64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), phase)
        })
        .collect();
    let n2 = interior_inner(grid, &interior, &interior).re;
    if !(n2 > 0.0 && n2.is_finite()) {
        return Err(Error::BadPacket("packet vanishes on the grid".into()));
    }
    let inv = 1.0 / n2.sqrt();
    interior.iter_mut().for_each(|z| *z *= inv);
    Ok(StateVector { interior, boundary: vec![ZERO; grid.n_boundary()] })
}

/// Real potential sampled on interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
    pub sup_norm: f64,
}

impl Potential {
    pub fn zero(grid: &Grid) -> Self {
        Self { values: vec![0.0; grid.n_interior()], sup_norm: 0.0 }
    }
}

/// How to fill a [`Potential`].
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Constant(f64),
    /// `depth` on the closed box `[lower, upper]`, zero elsewhere.
    Well { depth: f64, lower: Vec<f64>, upper: Vec<f64> },
    /// One value per interior node.
    Table(Vec<f64>),
}

pub fn sample_potential(grid: &Grid, spec: &PotentialSpec) -> Result<Potential> {
    let n = grid.n_interior();
    let values: Vec<f64> = match spec {
        PotentialSpec::Constant(c) => vec![*c; n],
        PotentialSpec::Well { depth, lower, upper } => {
            if lower.len() != grid.dim() || upper.len() != grid.dim() {
                return Err(Error::BadGeometry(format!("well box needs {} coordinates per corner", grid.dim())));
            }
            (0..n)
                .map(|k| {
                    let x = grid.interior_coords(k);
                    let inside = (0..x.len()).all(|d| x[d] >= lower[d] && x[d] <= upper[d]);
                    if inside {
                        *depth
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        PotentialSpec::Table(t) => {
            check_len(n, t.len())?;
            t.clone()
        }
    };
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    let sup_norm = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(Potential { values, sup_norm })
}

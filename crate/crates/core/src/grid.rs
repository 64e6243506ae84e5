//! Uniform 1D grids, complex fields, finite-difference calculus,
//! trapezoidal quadrature, and grid-exact symmetry maps y = sigma*x + L.
//!
//! All two-point machinery in this crate relies on symmetry maps that send
//! grid points to grid points exactly, so no interpolation error enters any
//! correlator or current.

use crate::error::{Error, Result};
use crate::C64;

/// Uniform one-dimensional grid with `n_points` nodes spanning
/// `[x_min, x_max]` inclusive, spacing `dx = (x_max - x_min)/(n_points - 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::Config(format!(
                "grid bounds degenerate: x_min={x_min}, x_max={x_max}"
            )));
        }
        if n_points < 8 {
            return Err(Error::Config(format!(
                "grid needs at least 8 points, got {n_points}"
            )));
        }
        let dx = (x_max - x_min) / (n_points as f64 - 1.0);
        Ok(Self { x_min, x_max, n_points, dx })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// All node coordinates.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the node closest to `x`, if `x` lies on the grid to within
    /// `1e-9 * dx`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.x_min) / self.dx;
        let i = t.round();
        if i < 0.0 || i >= self.n_points as f64 {
            return None;
        }
        if (t - i).abs() > 1e-9 {
            return None;
        }
        Some(i as usize)
    }

    /// Same-extent grid with halved spacing (2n - 1 points). Every node of
    /// `self` is a node of the refined grid, so grid-exact maps stay exact.
    pub fn refined(&self) -> Grid1D {
        Grid1D {
            x_min: self.x_min,
            x_max: self.x_max,
            n_points: 2 * self.n_points - 1,
            dx: 0.5 * self.dx,
        }
    }

    /// Full index range `[0, n-1]`.
    pub fn full_range(&self) -> IndexRange {
        IndexRange::new(0, self.n_points - 1)
    }
}

/// Inclusive index interval `[lo, hi]` into a grid. `lo > hi` encodes the
/// empty interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexRange {
    pub lo: usize,
    pub hi: usize,
}

impl IndexRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn empty() -> Self {
        Self { lo: 1, hi: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        !self.is_empty() && i >= self.lo && i <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }

    /// Interval shrunk by `margin` points on each side (empty if too short).
    pub fn shrunk(&self, margin: usize) -> IndexRange {
        if self.is_empty() || self.len() <= 2 * margin {
            IndexRange::empty()
        } else {
            IndexRange::new(self.lo + margin, self.hi - margin)
        }
    }
}

/// Complex rank-1 field sampled on a grid.
#[derive(Clone, Debug)]
pub struct Field1 {
    pub grid: Grid1D,
    pub values: Vec<C64>,
}

impl Field1 {
    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.n_points()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.n_points()).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid1D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Config(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L2 norm under trapezoidal quadrature.
    pub fn norm(&self) -> f64 {
        let w = |i: usize| {
            if i == 0 || i + 1 == self.len() {
                0.5
            } else {
                1.0
            }
        };
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| w(i) * v.norm_sqr())
            .sum();
        (s * self.grid.dx()).sqrt()
    }
}

/// Complex rank-2 kernel K(x_i; x_j) on a grid, stored row-major with the
/// first (unprimed) argument as the row index.
#[derive(Clone, Debug)]
pub struct Kernel2 {
    pub grid: Grid1D,
    pub values: Vec<C64>,
}

impl Kernel2 {
    pub fn zeros(grid: Grid1D) -> Self {
        let n = grid.n_points();
        Self { grid, values: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.grid.n_points() + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        let n = self.grid.n_points();
        &mut self.values[i * n + j]
    }

    pub fn n(&self) -> usize {
        self.grid.n_points()
    }

    /// max_{ij} |K(i,j) - conj(K(j,i))|
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    /// max_{ij} |K(i,j) - K(j,i)|
    pub fn symmetry_error(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).norm());
            }
        }
        worst
    }

    /// dx * sum of the diagonal.
    pub fn trace(&self) -> C64 {
        let n = self.n();
        let s: C64 = (0..n).map(|i| self.at(i, i)).sum();
        s * self.grid.dx()
    }
}

/// Orientation of a symmetry map: translation (sigma = +1) or inversion
/// (sigma = -1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sigma {
    Translation,
    Inversion,
}

impl Sigma {
    pub fn value(&self) -> f64 {
        match self {
            Sigma::Translation => 1.0,
            Sigma::Inversion => -1.0,
        }
    }

    pub fn from_int(s: i32) -> Result<Self> {
        match s {
            1 => Ok(Sigma::Translation),
            -1 => Ok(Sigma::Inversion),
            other => Err(Error::Config(format!("sigma must be +1 or -1, got {other}"))),
        }
    }
}

/// Grid-exact symmetry transform y = sigma*x + L restricted to a domain of
/// grid indices. Construction fails unless the transform maps every domain
/// node onto a grid node exactly (no interpolation anywhere downstream).
///
/// In index space the map reads j = i + steps (translation) or
/// j = steps - i (inversion), with `steps` integer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetryMap {
    grid: Grid1D,
    sigma: Sigma,
    shift: f64,
    steps: i64,
    domain: IndexRange,
    codomain: IndexRange,
}

impl SymmetryMap {
    pub fn new(grid: Grid1D, sigma: Sigma, shift: f64, domain: IndexRange) -> Result<Self> {
        if domain.is_empty() || domain.hi >= grid.n_points() {
            return Err(Error::Config(format!(
                "map domain [{}, {}] outside grid of {} points",
                domain.lo,
                domain.hi,
                grid.n_points()
            )));
        }
        // Integer step count in index space; for inversions the center L/2
        // must sit on a node or midpoint of the grid.
        let raw = match sigma {
            Sigma::Translation => shift / grid.dx(),
            Sigma::Inversion => (shift - 2.0 * grid.x_min()) / grid.dx(),
        };
        let steps = raw.round();
        if (raw - steps).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "map with sigma={:+} and L={} is not grid-exact (L/dx offset {:.3e})",
                sigma.value() as i32,
                shift,
                (raw - steps).abs()
            )));
        }
        let steps = steps as i64;
        let image = |i: usize| -> i64 {
            match sigma {
                Sigma::Translation => i as i64 + steps,
                Sigma::Inversion => steps - i as i64,
            }
        };
        let (ja, jb) = (image(domain.lo), image(domain.hi));
        let (jlo, jhi) = if ja <= jb { (ja, jb) } else { (jb, ja) };
        if jlo < 0 || jhi >= grid.n_points() as i64 {
            return Err(Error::Domain(format!(
                "map image [{jlo}, {jhi}] falls outside the grid"
            )));
        }
        Ok(Self {
            grid,
            sigma,
            shift,
            steps,
            domain,
            codomain: IndexRange::new(jlo as usize, jhi as usize),
        })
    }

    /// Construct from coordinates: domain given as `[a, b]` in position
    /// space; both endpoints must lie on grid nodes.
    pub fn from_coords(grid: Grid1D, sigma: Sigma, shift: f64, a: f64, b: f64) -> Result<Self> {
        let lo = grid
            .index_of(a)
            .ok_or_else(|| Error::Config(format!("domain endpoint {a} not on grid")))?;
        let hi = grid
            .index_of(b)
            .ok_or_else(|| Error::Config(format!("domain endpoint {b} not on grid")))?;
        if lo > hi {
            return Err(Error::Config(format!("domain [{a}, {b}] reversed")));
        }
        Self::new(grid, sigma, shift, IndexRange::new(lo, hi))
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn sigma(&self) -> Sigma {
        self.sigma
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn domain(&self) -> IndexRange {
        self.domain
    }

    pub fn codomain(&self) -> IndexRange {
        self.codomain
    }

    /// Index of y = F(x_i) for a domain index; errors outside the domain.
    pub fn apply(&self, i: usize) -> Result<usize> {
        if !self.domain.contains(i) {
            return Err(Error::Domain(format!(
                "index {i} outside map domain [{}, {}]",
                self.domain.lo, self.domain.hi
            )));
        }
        Ok(self.image_unchecked(i))
    }

    /// Index of F(x_i) for an arbitrary grid index, if the image lies on
    /// the grid. Used when mapping integration variables across domains.
    pub fn image(&self, i: usize) -> Option<usize> {
        let j = match self.sigma {
            Sigma::Translation => i as i64 + self.steps,
            Sigma::Inversion => self.steps - i as i64,
        };
        if j < 0 || j >= self.grid.n_points() as i64 {
            None
        } else {
            Some(j as usize)
        }
    }

    fn image_unchecked(&self, i: usize) -> usize {
        match self.sigma {
            Sigma::Translation => (i as i64 + self.steps) as usize,
            Sigma::Inversion => (self.steps - i as i64) as usize,
        }
    }

    /// Inverse transform, with domain and codomain swapped.
    pub fn inverse(&self) -> SymmetryMap {
        match self.sigma {
            Sigma::Translation => SymmetryMap {
                grid: self.grid,
                sigma: self.sigma,
                shift: -self.shift,
                steps: -self.steps,
                domain: self.codomain,
                codomain: self.domain,
            },
            // An inversion is its own inverse.
            Sigma::Inversion => SymmetryMap {
                grid: self.grid,
                sigma: self.sigma,
                shift: self.shift,
                steps: self.steps,
                domain: self.codomain,
                codomain: self.domain,
            },
        }
    }

    /// Same transform restricted to a different domain.
    pub fn with_domain(&self, domain: IndexRange) -> Result<SymmetryMap> {
        SymmetryMap::new(self.grid, self.sigma, self.shift, domain)
    }

    /// The identity map y = x on `domain` (useful as the trivial map).
    pub fn trivial(grid: Grid1D, domain: IndexRange) -> Result<SymmetryMap> {
        SymmetryMap::new(grid, Sigma::Translation, 0.0, domain)
    }

    /// True when domain and codomain share no grid point.
    pub fn is_gapped(&self) -> bool {
        self.codomain.lo > self.domain.hi || self.domain.lo > self.codomain.hi
    }

    pub fn describe(&self) -> String {
        format!(
            "sigma={:+}, L={}, domain=[{:.6}, {:.6}]",
            self.sigma.value() as i32,
            self.shift,
            self.grid.x(self.domain.lo),
            self.grid.x(self.domain.hi)
        )
    }
}

/// Central finite differences of a rank-1 field; `order` is 1 or 2.
/// The two boundary values are not computable with a central stencil and
/// are flagged invalid (NaN); `valid` gives the interior range.
pub struct Derivative {
    pub values: Field1,
    pub valid: IndexRange,
}

pub fn differentiate(f: &Field1, order: u8) -> Result<Derivative> {
    let n = f.len();
    if n < 3 {
        return Err(Error::Config("differentiate needs at least 3 points".into()));
    }
    let dx = f.grid.dx();
    let nan = C64::new(f64::NAN, f64::NAN);
    let mut out = vec![nan; n];
    match order {
        1 => {
            let h = 0.5 / dx;
            for i in 1..n - 1 {
                out[i] = (f.values[i + 1] - f.values[i - 1]) * h;
            }
        }
        2 => {
            let h = 1.0 / (dx * dx);
            for i in 1..n - 1 {
                out[i] = (f.values[i + 1] - f.values[i] * 2.0 + f.values[i - 1]) * h;
            }
        }
        other => {
            return Err(Error::Config(format!("derivative order must be 1 or 2, got {other}")))
        }
    }
    Ok(Derivative {
        values: Field1 { grid: f.grid, values: out },
        valid: IndexRange::new(1, n - 2),
    })
}

/// Trapezoidal quadrature of `f` over an index interval. An empty region
/// integrates to zero (with a warning).
pub fn integrate(f: &Field1, region: IndexRange) -> C64 {
    if region.is_empty() {
        log::warn!("integrate called with an empty region; returning 0");
        return C64::new(0.0, 0.0);
    }
    assert!(region.hi < f.len(), "integration region outside grid");
    trapezoid(&f.values[region.lo..=region.hi], f.grid.dx())
}

/// Trapezoidal rule on a contiguous slice of samples with spacing `dx`.
pub fn trapezoid(values: &[C64], dx: f64) -> C64 {
    match values.len() {
        0 => C64::new(0.0, 0.0),
        1 => C64::new(0.0, 0.0),
        _ => {
            let inner: C64 = values[1..values.len() - 1].iter().sum();
            (inner + (values[0] + values[values.len() - 1]) * 0.5) * dx
        }
    }
}

/// Trapezoidal rule for real samples.
pub fn trapezoid_real(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        _ => {
            let inner: f64 = values[1..values.len() - 1].iter().sum();
            (inner + 0.5 * (values[0] + values[values.len() - 1])) * dx
        }
    }
}

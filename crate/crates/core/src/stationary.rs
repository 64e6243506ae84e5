//! Stationary single-particle states in 1D and their invariant two-point
//! currents on local-symmetry domains.
//!
//! Scattering states are integrated with the Numerov scheme from the
//! transmitted side and matched to plane waves using the discrete
//! dispersion relation of the recurrence, which makes T + R = 1 hold to
//! rounding. Bound states come from the 3-point finite-difference
//! Hamiltonian. For a state psi and a grid-exact map y = F(x):
//!
//!   J(x)  = (1/2i) [psi*(x) psi'(x) - psi(x) psi'*(x)]
//!   Q(x)  = (1/2i) [sigma psi(x) psi'(y) - psi(y) psi'(x)]
//!   Q~(x) = (1/2i) [sigma psi*(x) psi'(y) - psi(y) psi'*(x)]
//!
//! Q and Q~ are constant on the domain when U is locally symmetric there,
//! and psi(F(x)) = [Q~ psi(x) - Q psi*(x)] / J maps the wave field across
//! the domain for states carrying current.

use crate::error::{Error, Result};
use crate::grid::{Field1, Grid1D, IndexRange, SymmetryMap};
use crate::linalg::sym_tridiag_lowest;
use crate::potentials::Potential;
use crate::C64;

/// Side from which the scattering wave comes in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug)]
pub enum BoundaryKind {
    Scattering { incoming: Side, transmission: f64, reflection: f64 },
    Bound,
    Bloch { k: f64 },
}

/// A stationary state with its derivative on the same grid. The first and
/// last derivative entries are not defined (NaN).
#[derive(Clone, Debug)]
pub struct StationaryState {
    pub energy: f64,
    pub psi: Field1,
    pub psi_prime: Field1,
    pub boundary: BoundaryKind,
}

impl StationaryState {
    /// Index range on which both psi and psi' are valid.
    pub fn valid_range(&self) -> IndexRange {
        IndexRange::new(1, self.psi.grid.n_points() - 2)
    }

    /// Analytic plane wave exp(ikx); the free Bloch state of the grid.
    pub fn plane_wave(grid: Grid1D, k: f64) -> StationaryState {
        let psi = Field1::from_fn(grid, |x| C64::new(0.0, k * x).exp());
        let psi_prime = Field1::from_fn(grid, |x| C64::new(0.0, k) * C64::new(0.0, k * x).exp());
        StationaryState {
            energy: 0.5 * k * k,
            psi,
            psi_prime,
            boundary: BoundaryKind::Bloch { k },
        }
    }
}

const FLAT_TOL: f64 = 1e-10;
const FLAT_POINTS: usize = 10;

fn check_flat_ends(u: &Potential) -> Result<(f64, f64)> {
    let n = u.grid.n_points();
    if n < 4 * FLAT_POINTS {
        return Err(Error::Config("grid too small for scattering asymptotics".into()));
    }
    let ul = u.values[0];
    let ur = u.values[n - 1];
    for i in 0..FLAT_POINTS {
        if (u.values[i] - ul).abs() > FLAT_TOL {
            return Err(Error::Config(format!(
                "potential not flat on the left end (point {i} deviates by {:.2e})",
                (u.values[i] - ul).abs()
            )));
        }
        if (u.values[n - 1 - i] - ur).abs() > FLAT_TOL {
            return Err(Error::Config(format!(
                "potential not flat on the right end (point {} deviates by {:.2e})",
                n - 1 - i,
                (u.values[n - 1 - i] - ur).abs()
            )));
        }
    }
    Ok((ul, ur))
}

/// Wavevector of the discrete Numerov plane wave exp(iqx) on a flat
/// potential stretch: cos(q dx) = (1 - 5 h^2 S / 12) / (1 + h^2 S / 12).
fn numerov_wavevector(s: f64, h: f64) -> Result<f64> {
    let h2 = h * h;
    let c = (1.0 - 5.0 * h2 * s / 12.0) / (1.0 + h2 * s / 12.0);
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::Numerics(format!(
            "energy/grid combination outside the resolvable band (cos(q dx) = {c})"
        )));
    }
    Ok(c.acos() / h)
}

/// Numerov solution of psi'' + S psi = 0 with S = 2(E - U), integrated from
/// the transmitted side and matched to incoming + reflected plane waves of
/// unit incoming amplitude. T and R come from the exactly conserved
/// discrete flux, so T + R = 1 to rounding.
pub fn solve_scattering(u: &Potential, energy: f64, incoming: Side) -> Result<StationaryState> {
    let (ul, ur) = check_flat_ends(u)?;
    if energy <= ul.max(ur) {
        return Err(Error::Domain(format!(
            "no propagating solution: E = {energy} below asymptotic potential {}",
            ul.max(ur)
        )));
    }
    let grid = u.grid;
    let n = grid.n_points();
    let h = grid.dx();
    let s: Vec<f64> = u.values.iter().map(|ui| 2.0 * (energy - ui)).collect();
    let c: Vec<f64> = s.iter().map(|si| 1.0 + h * h * si / 12.0).collect();
    let b: Vec<f64> = s.iter().map(|si| 2.0 * (1.0 - 5.0 * h * h * si / 12.0)).collect();

    let q_l = numerov_wavevector(s[0], h)?;
    let q_r = numerov_wavevector(s[n - 1], h)?;

    let mut psi = vec![C64::new(0.0, 0.0); n];
    match incoming {
        Side::Left => {
            psi[n - 1] = C64::new(0.0, q_r * grid.x(n - 1)).exp();
            psi[n - 2] = C64::new(0.0, q_r * grid.x(n - 2)).exp();
            for i in (1..n - 1).rev() {
                psi[i - 1] = (psi[i] * b[i] - psi[i + 1] * c[i + 1]) / c[i - 1];
            }
        }
        Side::Right => {
            psi[0] = C64::new(0.0, -q_l * grid.x(0)).exp();
            psi[1] = C64::new(0.0, -q_l * grid.x(1)).exp();
            for i in 1..n - 1 {
                psi[i + 1] = (psi[i] * b[i] - psi[i - 1] * c[i - 1]) / c[i + 1];
            }
        }
    }

    // decompose the incoming-side values into incoming and reflected waves
    let (i0, i1, q_in, q_tr) = match incoming {
        Side::Left => (1usize, 2usize, q_l, q_r),
        Side::Right => (n - 3, n - 2, q_r, q_l),
    };
    let dir = match incoming {
        Side::Left => 1.0,
        Side::Right => -1.0,
    };
    let e0 = C64::new(0.0, dir * q_in * grid.x(i0)).exp();
    let e1 = C64::new(0.0, dir * q_in * grid.x(i1)).exp();
    // psi_i = A e_i + B conj(e_i)
    let det = e0 * e1.conj() - e1 * e0.conj();
    let a = (psi[i0] * e1.conj() - psi[i1] * e0.conj()) / det;
    let bamp = (e0 * psi[i1] - e1 * psi[i0]) / det;
    if a.norm() < 1e-14 {
        return Err(Error::Numerics("vanishing incoming amplitude in matching".into()));
    }
    let inv_a = C64::new(1.0, 0.0) / a;
    for v in psi.iter_mut() {
        *v *= inv_a;
    }
    let r_amp = bamp * inv_a;

    // discrete flux of a unit plane wave on a flat stretch: c^2 sin(q h)
    let (c_in, c_tr) = match incoming {
        Side::Left => (c[0], c[n - 1]),
        Side::Right => (c[n - 1], c[0]),
    };
    let flux_in = c_in * c_in * (q_in * h).sin();
    let flux_tr = c_tr * c_tr * (q_tr * h).sin();
    let transmission = inv_a.norm_sqr() * flux_tr / flux_in;
    let reflection = r_amp.norm_sqr();

    let psi = Field1 { grid, values: psi };
    let psi_prime = numerov_derivative(&psi, &s);
    Ok(StationaryState {
        energy,
        psi,
        psi_prime,
        boundary: BoundaryKind::Scattering { incoming, transmission, reflection },
    })
}

/// Fourth-order derivative consistent with psi'' = -S psi:
/// psi'_i = (psi_{i+1} - psi_{i-1}) / 2h + (h/12)(S_{i+1} psi_{i+1} - S_{i-1} psi_{i-1}).
fn numerov_derivative(psi: &Field1, s: &[f64]) -> Field1 {
    let n = psi.len();
    let h = psi.grid.dx();
    let nan = C64::new(f64::NAN, f64::NAN);
    let mut out = vec![nan; n];
    for i in 1..n - 1 {
        let central = (psi.values[i + 1] - psi.values[i - 1]) / (2.0 * h);
        let corr = (psi.values[i + 1] * s[i + 1] - psi.values[i - 1] * s[i - 1]) * (h / 12.0);
        out[i] = central + corr;
    }
    Field1 { grid: psi.grid, values: out }
}

/// Lowest `n_states` eigenpairs of -1/2 d^2/dx^2 + U with Dirichlet ends.
pub fn solve_bound(u: &Potential, n_states: usize) -> Result<Vec<StationaryState>> {
    let grid = u.grid;
    let n = grid.n_points();
    if n_states == 0 || n_states > n / 4 {
        return Err(Error::Config(format!(
            "cannot resolve {n_states} bound states on a grid of {n} points"
        )));
    }
    let h = grid.dx();
    let kin = 1.0 / (h * h);
    let diag: Vec<f64> = u.values.iter().map(|ui| kin + ui).collect();
    let off = vec![-0.5 * kin; n - 1];
    let (energies, vectors) = sym_tridiag_lowest(&diag, &off, n_states)?;

    let mut states = Vec::with_capacity(n_states);
    for (e, v) in energies.iter().zip(vectors) {
        let mut res2 = 0.0_f64;
        for i in 0..n {
            let mut hv = diag[i] * v[i];
            if i > 0 {
                hv += off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                hv += off[i] * v[i + 1];
            }
            let r = hv - e * v[i];
            res2 += r * r;
        }
        if res2.sqrt() > 1e-10 {
            return Err(Error::Numerics(format!(
                "bound-state residual {:.2e} above 1e-10",
                res2.sqrt()
            )));
        }
        // continuum normalization and a deterministic sign
        let nrm: f64 = (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
        let peak = v
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap_or(1.0);
        let scale = if peak < 0.0 { -1.0 / nrm } else { 1.0 / nrm };
        let values: Vec<C64> = v.iter().map(|x| C64::new(x * scale, 0.0)).collect();
        let psi = Field1 { grid, values };
        let psi_prime = crate::grid::differentiate(&psi, 1)?.values;
        states.push(StationaryState { energy: *e, psi, psi_prime, boundary: BoundaryKind::Bound });
    }
    Ok(states)
}

/// Two-point current profiles on (the valid part of) a map domain.
#[derive(Clone, Debug)]
pub struct TwoPointCurrents {
    pub map: SymmetryMap,
    /// Domain indices the Q profiles are defined on.
    pub range: IndexRange,
    pub q: Vec<C64>,
    pub q_tilde: Vec<C64>,
    /// Probability current on the full valid interior of the grid.
    pub j_range: IndexRange,
    pub j: Vec<f64>,
}

pub fn two_point_currents(state: &StationaryState, map: &SymmetryMap) -> Result<TwoPointCurrents> {
    let grid = state.psi.grid;
    if map.grid() != grid {
        return Err(Error::Config("map and state live on different grids".into()));
    }
    let valid = state.valid_range();
    // x and y = F(x) must both carry a valid derivative
    let mut lo = None;
    let mut hi = None;
    for i in map.domain().iter() {
        let y = map.apply(i)?;
        if valid.contains(i) && valid.contains(y) {
            if lo.is_none() {
                lo = Some(i);
            }
            hi = Some(i);
        }
    }
    let (lo, hi) = match (lo, hi) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Domain("map domain has no interior with valid derivatives".into())),
    };
    let range = IndexRange::new(lo, hi);
    let sigma = map.sigma().value();
    let half_i = C64::new(0.0, -0.5); // = 1/(2i)
    let mut q = Vec::with_capacity(range.len());
    let mut q_tilde = Vec::with_capacity(range.len());
    for i in range.iter() {
        let y = map.apply(i)?;
        let (px, dpx) = (state.psi.values[i], state.psi_prime.values[i]);
        let (py, dpy) = (state.psi.values[y], state.psi_prime.values[y]);
        q.push(half_i * (px * dpy * sigma - py * dpx));
        q_tilde.push(half_i * (px.conj() * dpy * sigma - py * dpx.conj()));
    }
    let j_range = valid;
    let j: Vec<f64> = j_range
        .iter()
        .map(|i| (state.psi.values[i].conj() * state.psi_prime.values[i]).im)
        .collect();
    Ok(TwoPointCurrents { map: *map, range, q, q_tilde, j_range, j })
}

/// Mean and max deviation from the mean for each invariant current.
#[derive(Clone, Copy, Debug)]
pub struct InvarianceSummary {
    pub q_mean: C64,
    pub q_max_dev: f64,
    pub q_tilde_mean: C64,
    pub q_tilde_max_dev: f64,
    pub j_mean: f64,
    pub j_max_dev: f64,
}

pub fn check_invariance(currents: &TwoPointCurrents) -> InvarianceSummary {
    let mean_c =
        |v: &[C64]| -> C64 { v.iter().sum::<C64>() / C64::new(v.len().max(1) as f64, 0.0) };
    let q_mean = mean_c(&currents.q);
    let q_tilde_mean = mean_c(&currents.q_tilde);
    let j_mean = currents.j.iter().sum::<f64>() / currents.j.len().max(1) as f64;
    InvarianceSummary {
        q_mean,
        q_max_dev: currents.q.iter().map(|v| (v - q_mean).norm()).fold(0.0, f64::max),
        q_tilde_mean,
        q_tilde_max_dev: currents
            .q_tilde
            .iter()
            .map(|v| (v - q_tilde_mean).norm())
            .fold(0.0, f64::max),
        j_mean,
        j_max_dev: currents.j.iter().map(|v| (v - j_mean).abs()).fold(0.0, f64::max),
    }
}

/// Remainder of the wave-field mapping
/// psi(F(x)) - [Q~ psi(x) - Q psi*(x)] / J using the domain means of Q, Q~.
/// Undefined for zero-current (bound) states.
pub fn map_wavefield(
    state: &StationaryState,
    map: &SymmetryMap,
    currents: &TwoPointCurrents,
) -> Result<(Vec<C64>, f64)> {
    let summary = check_invariance(currents);
    if summary.j_mean.abs() < 1e-12 {
        return Err(Error::Domain("mapping undefined for zero-current states".into()));
    }
    let inv_j = 1.0 / summary.j_mean;
    let mut remainder = Vec::with_capacity(currents.range.len());
    let mut worst: f64 = 0.0;
    for i in currents.range.iter() {
        let y = map.apply(i)?;
        let predicted = (summary.q_tilde_mean * state.psi.values[i]
            - summary.q_mean * state.psi.values[i].conj())
            * inv_j;
        let r = state.psi.values[y] - predicted;
        worst = worst.max(r.norm());
        remainder.push(r);
    }
    Ok((remainder, worst))
}

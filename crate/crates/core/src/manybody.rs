//! Exact reference dynamics for N identical particles (N = 2, 3) on a 1D
//! grid: H = sum_i (-1/2 d^2/dx_i^2 + U(x_i)) + 1/2 sum_{i != j} V(x_i, x_j)
//! with a 3-point kinetic stencil and Dirichlet boundaries.
//!
//! Ground states come from imaginary-time Crank-Nicolson with per-step
//! symmetrization and renormalization; real-time propagation uses
//! Crank-Nicolson steps solved by conjugate-orthogonal CG, which keeps the
//! scheme unitary to solver tolerance and conserves <H> for
//! time-independent Hamiltonians.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::linalg::cocg_solve;
use crate::potentials::{InteractionSpec, Potential};
use crate::stationary::solve_bound;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Bosonic,
    Fermionic,
}

impl Statistics {
    pub fn exchange_sign(&self) -> f64 {
        match self {
            Statistics::Bosonic => 1.0,
            Statistics::Fermionic => -1.0,
        }
    }
}

/// Complex amplitude tensor on grid^N with an exchange-symmetry flag.
/// Normalization convention: dx^N * sum |psi|^2 = 1.
#[derive(Clone, Debug)]
pub struct ManyBodyWavefunction {
    pub grid: Grid1D,
    pub n_particles: usize,
    pub statistics: Statistics,
    pub time: f64,
    pub amplitudes: Vec<C64>,
}

impl ManyBodyWavefunction {
    pub fn dim(grid: Grid1D, n_particles: usize) -> usize {
        grid.n_points().pow(n_particles as u32)
    }

    pub fn zeros(grid: Grid1D, n_particles: usize, statistics: Statistics) -> Self {
        Self {
            grid,
            n_particles,
            statistics,
            time: 0.0,
            amplitudes: vec![C64::new(0.0, 0.0); Self::dim(grid, n_particles)],
        }
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        (s * self.grid.dx().powi(self.n_particles as i32)).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in self.amplitudes.iter_mut() {
                *a *= inv;
            }
        }
    }

    /// Project onto the exchange-symmetry sector (average over particle
    /// permutations with the statistics sign).
    pub fn symmetrize(&mut self) {
        let n = self.grid.n_points();
        let sign = self.statistics.exchange_sign();
        match self.n_particles {
            2 => {
                for i in 0..n {
                    for j in 0..i {
                        let a = self.amplitudes[i * n + j];
                        let b = self.amplitudes[j * n + i];
                        let s = (a + sign * b) * 0.5;
                        self.amplitudes[i * n + j] = s;
                        self.amplitudes[j * n + i] = sign * s;
                    }
                    if sign < 0.0 {
                        self.amplitudes[i * n + i] = C64::new(0.0, 0.0);
                    }
                }
            }
            3 => {
                // permutations of (0,1,2) with parities
                const PERMS: [([usize; 3], f64); 6] = [
                    ([0, 1, 2], 1.0),
                    ([1, 0, 2], -1.0),
                    ([0, 2, 1], -1.0),
                    ([2, 1, 0], -1.0),
                    ([1, 2, 0], 1.0),
                    ([2, 0, 1], 1.0),
                ];
                let old = self.amplitudes.clone();
                let idx = |c: [usize; 3]| (c[0] * n + c[1]) * n + c[2];
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let coords = [i, j, k];
                            let mut s = C64::new(0.0, 0.0);
                            for (p, parity) in PERMS.iter() {
                                let w = if sign < 0.0 { *parity } else { 1.0 };
                                s += old[idx([coords[p[0]], coords[p[1]], coords[p[2]]])] * w;
                            }
                            self.amplitudes[idx(coords)] = s / 6.0;
                        }
                    }
                }
            }
            other => panic!("symmetrize only implemented for N in {{2,3}}, got {other}"),
        }
    }

    /// Max violation of the exchange symmetry.
    pub fn exchange_symmetry_error(&self) -> f64 {
        let n = self.grid.n_points();
        let sign = self.statistics.exchange_sign();
        let mut worst: f64 = 0.0;
        match self.n_particles {
            2 => {
                for i in 0..n {
                    for j in 0..i {
                        let a = self.amplitudes[i * n + j];
                        let b = self.amplitudes[j * n + i];
                        worst = worst.max((a - b * sign).norm());
                    }
                }
            }
            3 => {
                let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let a = self.amplitudes[idx(i, j, k)];
                            let b = self.amplitudes[idx(j, i, k)];
                            worst = worst.max((a - b * sign).norm());
                        }
                    }
                }
            }
            _ => {}
        }
        worst
    }

    /// Largest |psi|^2 on the boundary of the hypercube.
    pub fn boundary_density(&self) -> f64 {
        let n = self.grid.n_points();
        let mut worst: f64 = 0.0;
        let on_boundary = |coords: &[usize]| coords.iter().any(|&c| c == 0 || c == n - 1);
        match self.n_particles {
            2 => {
                for i in 0..n {
                    for &j in [0, n - 1].iter() {
                        worst = worst.max(self.amplitudes[i * n + j].norm_sqr());
                        worst = worst.max(self.amplitudes[j * n + i].norm_sqr());
                    }
                }
            }
            _ => {
                let mut coords = vec![0usize; self.n_particles];
                for (flat, a) in self.amplitudes.iter().enumerate() {
                    let mut rem = flat;
                    for c in coords.iter_mut().rev() {
                        *c = rem % n;
                        rem /= n;
                    }
                    if on_boundary(&coords) {
                        worst = worst.max(a.norm_sqr());
                    }
                }
            }
        }
        worst
    }
}

/// Discretized N-body Hamiltonian applied matrix-free. The interaction
/// enters as a diagonal pairwise table V(x_a, x_b).
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub grid: Grid1D,
    pub n_particles: usize,
    u: Vec<f64>,
    v: Option<Vec<f64>>,
    kin: f64,
}

/// Default cap on the amplitude count (2^24).
pub const DEFAULT_AMPLITUDE_BUDGET: usize = 1 << 24;

impl Hamiltonian {
    pub fn new(
        u: &Potential,
        v: &InteractionSpec,
        n_particles: usize,
        budget: Option<usize>,
    ) -> Result<Self> {
        if !(2..=3).contains(&n_particles) {
            return Err(Error::Config(format!(
                "exact solver supports N in {{2,3}}, got {n_particles}"
            )));
        }
        let grid = u.grid;
        let budget = budget.unwrap_or(DEFAULT_AMPLITUDE_BUDGET);
        let dim = grid.n_points().pow(n_particles as u32);
        if dim > budget {
            let max_n = (budget as f64).powf(1.0 / n_particles as f64).floor() as usize;
            return Err(Error::Config(format!(
                "{dim} amplitudes exceed the budget {budget}; use at most {max_n} grid points"
            )));
        }
        v.validate()?;
        let v_table = if v.is_none() { None } else { Some(v.matrix(grid)) };
        Ok(Self {
            grid,
            n_particles,
            u: u.values.clone(),
            v: v_table,
            kin: 0.5 / (grid.dx() * grid.dx()),
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.n_points().pow(self.n_particles as u32)
    }

    /// out = H psi (Dirichlet: amplitudes beyond the edge are zero).
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        let n = self.grid.n_points();
        let kin = self.kin;
        match self.n_particles {
            2 => {
                for i in 0..n {
                    let ui = self.u[i];
                    let row = i * n;
                    for j in 0..n {
                        let idx = row + j;
                        let mut diag = ui + self.u[j];
                        if let Some(v) = &self.v {
                            diag += v[idx];
                        }
                        let mut s = psi[idx] * (diag + 4.0 * kin);
                        if i > 0 {
                            s -= psi[idx - n] * kin;
                        }
                        if i + 1 < n {
                            s -= psi[idx + n] * kin;
                        }
                        if j > 0 {
                            s -= psi[idx - 1] * kin;
                        }
                        if j + 1 < n {
                            s -= psi[idx + 1] * kin;
                        }
                        out[idx] = s;
                    }
                }
            }
            3 => {
                let n2 = n * n;
                for i in 0..n {
                    for j in 0..n {
                        let vij = self.v.as_ref().map_or(0.0, |v| v[i * n + j]);
                        let uij = self.u[i] + self.u[j];
                        for k in 0..n {
                            let idx = (i * n + j) * n + k;
                            let mut diag = uij + self.u[k];
                            if let Some(v) = &self.v {
                                diag += vij + v[i * n + k] + v[j * n + k];
                            }
                            let mut s = psi[idx] * (diag + 6.0 * kin);
                            if i > 0 {
                                s -= psi[idx - n2] * kin;
                            }
                            if i + 1 < n {
                                s -= psi[idx + n2] * kin;
                            }
                            if j > 0 {
                                s -= psi[idx - n] * kin;
                            }
                            if j + 1 < n {
                                s -= psi[idx + n] * kin;
                            }
                            if k > 0 {
                                s -= psi[idx - 1] * kin;
                            }
                            if k + 1 < n {
                                s -= psi[idx + 1] * kin;
                            }
                            out[idx] = s;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// <psi|H|psi> under the plain-sum normalization.
    pub fn expectation(&self, psi: &ManyBodyWavefunction) -> C64 {
        let mut hpsi = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply(&psi.amplitudes, &mut hpsi);
        let s: C64 = psi.amplitudes.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.dx().powi(self.n_particles as i32)
    }
}

/// Options for the imaginary-time ground-state search.
#[derive(Clone, Copy, Debug)]
pub struct GroundStateOpts {
    pub dtau: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl Default for GroundStateOpts {
    fn default() -> Self {
        Self { dtau: 0.05, max_iters: 20_000, residual_tol: 1e-8 }
    }
}

/// Lowest symmetry-sector eigenstate by imaginary-time Crank-Nicolson with
/// per-step symmetrization and renormalization. The seed is built from
/// one-body bound orbitals (a condensate product for bosons, a determinant
/// for fermions).
pub fn ground_state(
    h: &Hamiltonian,
    u: &Potential,
    statistics: Statistics,
    opts: GroundStateOpts,
) -> Result<(ManyBodyWavefunction, f64)> {
    let grid = h.grid;
    let n = grid.n_points();
    let np = h.n_particles;
    let orbitals = solve_bound(u, if statistics == Statistics::Fermionic { np } else { 1 })?;

    let mut psi = ManyBodyWavefunction::zeros(grid, np, statistics);
    match (np, statistics) {
        (2, Statistics::Bosonic) => {
            let phi = &orbitals[0].psi.values;
            for i in 0..n {
                for j in 0..n {
                    psi.amplitudes[i * n + j] = phi[i] * phi[j];
                }
            }
        }
        (2, Statistics::Fermionic) => {
            let (a, b) = (&orbitals[0].psi.values, &orbitals[1].psi.values);
            for i in 0..n {
                for j in 0..n {
                    psi.amplitudes[i * n + j] = a[i] * b[j] - b[i] * a[j];
                }
            }
        }
        (3, Statistics::Bosonic) => {
            let phi = &orbitals[0].psi.values;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        psi.amplitudes[(i * n + j) * n + k] = phi[i] * phi[j] * phi[k];
                    }
                }
            }
        }
        (3, Statistics::Fermionic) => {
            let (a, b, c) =
                (&orbitals[0].psi.values, &orbitals[1].psi.values, &orbitals[2].psi.values);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let det = a[i] * (b[j] * c[k] - c[j] * b[k])
                            - b[i] * (a[j] * c[k] - c[j] * a[k])
                            + c[i] * (a[j] * b[k] - b[j] * a[k]);
                        psi.amplitudes[(i * n + j) * n + k] = det;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    psi.symmetrize();
    psi.normalize();
    if !(psi.norm() > 0.0) {
        return Err(Error::Numerics("ground-state seed vanished after symmetrization".into()));
    }

    let dim = h.dim();
    let half = 0.5 * opts.dtau;
    let apply_plus = |x: &[C64], out: &mut [C64]| {
        h.apply(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + *o * half;
        }
    };
    let mut rhs = vec![C64::new(0.0, 0.0); dim];
    let mut hpsi = vec![C64::new(0.0, 0.0); dim];
    let mut residual_history = Vec::new();
    for _ in 0..opts.max_iters {
        h.apply(&psi.amplitudes, &mut hpsi);
        let vol = grid.dx().powi(np as i32);
        let energy: C64 =
            psi.amplitudes.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum::<C64>() * vol;
        let res2: f64 = psi
            .amplitudes
            .iter()
            .zip(&hpsi)
            .map(|(a, b)| (b - a * energy.re).norm_sqr())
            .sum::<f64>()
            * vol;
        let residual = res2.sqrt();
        residual_history.push(residual);
        if residual <= opts.residual_tol {
            return Ok((psi, energy.re));
        }
        for i in 0..dim {
            rhs[i] = psi.amplitudes[i] - hpsi[i] * half;
        }
        cocg_solve(&apply_plus, &rhs, &mut psi.amplitudes, 1e-13, 10_000)?;
        psi.symmetrize();
        psi.normalize();
    }
    let tail: Vec<String> = residual_history
        .iter()
        .rev()
        .take(5)
        .rev()
        .map(|r| format!("{r:.3e}"))
        .collect();
    Err(Error::Numerics(format!(
        "imaginary time did not converge in {} iterations (last residuals: {})",
        opts.max_iters,
        tail.join(", ")
    )))
}

/// Real-time Crank-Nicolson propagation, returning the state after each of
/// the requested step counts (ascending). `snap_steps` are absolute step
/// indices measured from the input state; an empty list propagates to no
/// snapshot and returns the final state only.
pub fn propagate_with_snaps(
    psi0: &ManyBodyWavefunction,
    h: &Hamiltonian,
    dt: f64,
    snap_steps: &[usize],
) -> Result<Vec<ManyBodyWavefunction>> {
    if snap_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("snapshot steps must be strictly ascending".into()));
    }
    let dim = h.dim();
    let half = C64::new(0.0, 0.5 * dt);
    let apply_plus = |x: &[C64], out: &mut [C64]| {
        h.apply(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + *o * half;
        }
    };
    let mut psi = psi0.clone();
    let mut rhs = vec![C64::new(0.0, 0.0); dim];
    let mut snaps = Vec::with_capacity(snap_steps.len());
    let mut next = snap_steps.iter().peekable();
    let total = snap_steps.last().copied().unwrap_or(0);
    if next.peek() == Some(&&0) {
        snaps.push(psi.clone());
        next.next();
    }
    for step in 1..=total {
        h.apply(&psi.amplitudes, &mut rhs);
        for i in 0..dim {
            rhs[i] = psi.amplitudes[i] - rhs[i] * half;
        }
        cocg_solve(&apply_plus, &rhs, &mut psi.amplitudes, 1e-13, 10_000)
            .map_err(|e| Error::Numerics(format!("linear solve broke down at step {step}: {e}")))?;
        psi.time = psi0.time + step as f64 * dt;
        if next.peek() == Some(&&step) {
            snaps.push(psi.clone());
            next.next();
        }
    }
    Ok(snaps)
}

/// Propagate `n_steps` steps, keeping every `snapshot_stride`-th state
/// (plus the final one).
pub fn propagate(
    psi0: &ManyBodyWavefunction,
    h: &Hamiltonian,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
) -> Result<Vec<ManyBodyWavefunction>> {
    let stride = snapshot_stride.max(1);
    let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *steps.last().unwrap() != n_steps {
        steps.push(n_steps);
    }
    propagate_with_snaps(psi0, h, dt, &steps)
}

/// Three consecutive snapshots (t - dt, t, t + dt), the unit used by every
/// residual evaluator.
#[derive(Clone, Debug)]
pub struct SnapshotTriple {
    pub minus: ManyBodyWavefunction,
    pub center: ManyBodyWavefunction,
    pub plus: ManyBodyWavefunction,
}

impl SnapshotTriple {
    pub fn new(
        minus: ManyBodyWavefunction,
        center: ManyBodyWavefunction,
        plus: ManyBodyWavefunction,
    ) -> Result<Self> {
        let d1 = center.time - minus.time;
        let d2 = plus.time - center.time;
        if d1 <= 0.0 || (d1 - d2).abs() > 1e-12 * d1.max(d2) {
            return Err(Error::Config(format!(
                "snapshots not equally spaced: {} vs {}",
                d1, d2
            )));
        }
        Ok(Self { minus, center, plus })
    }

    pub fn dt(&self) -> f64 {
        self.center.time - self.minus.time
    }

    pub fn grid(&self) -> Grid1D {
        self.center.grid
    }
}

/// Propagate and capture the triple centered on step `center_step`.
pub fn propagate_triple(
    psi0: &ManyBodyWavefunction,
    h: &Hamiltonian,
    dt: f64,
    center_step: usize,
) -> Result<SnapshotTriple> {
    if center_step == 0 {
        return Err(Error::Config("triple needs center_step >= 1".into()));
    }
    let snaps =
        propagate_with_snaps(psi0, h, dt, &[center_step - 1, center_step, center_step + 1])?;
    let mut it = snaps.into_iter();
    SnapshotTriple::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
}

#[derive(Serialize, Deserialize)]
struct SnapshotSidecar {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    n_particles: usize,
    statistics: Statistics,
    time: f64,
}

/// Write `base.bin` (little-endian f64 re/im pairs) and `base.json`.
pub fn save_snapshot(base: &Path, psi: &ManyBodyWavefunction) -> Result<()> {
    let sidecar = SnapshotSidecar {
        x_min: psi.grid.x_min(),
        x_max: psi.grid.x_max(),
        n_points: psi.grid.n_points(),
        n_particles: psi.n_particles,
        statistics: psi.statistics,
        time: psi.time,
    };
    let mut bin = Vec::with_capacity(psi.amplitudes.len() * 16);
    for a in &psi.amplitudes {
        bin.extend_from_slice(&a.re.to_le_bytes());
        bin.extend_from_slice(&a.im.to_le_bytes());
    }
    std::fs::File::create(base.with_extension("bin"))?.write_all(&bin)?;
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(base.with_extension("json"), json)?;
    Ok(())
}

pub fn load_snapshot(base: &Path) -> Result<ManyBodyWavefunction> {
    let sidecar: SnapshotSidecar =
        serde_json::from_str(&std::fs::read_to_string(base.with_extension("json"))?)?;
    let grid = Grid1D::new(sidecar.x_min, sidecar.x_max, sidecar.n_points)?;
    let dim = ManyBodyWavefunction::dim(grid, sidecar.n_particles);
    let mut bytes = Vec::new();
    std::fs::File::open(base.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != dim * 16 {
        return Err(Error::Config(format!(
            "snapshot has {} bytes, expected {}",
            bytes.len(),
            dim * 16
        )));
    }
    let mut amplitudes = Vec::with_capacity(dim);
    for chunk in bytes.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        amplitudes.push(C64::new(re, im));
    }
    Ok(ManyBodyWavefunction {
        grid,
        n_particles: sidecar.n_particles,
        statistics: sidecar.statistics,
        time: sidecar.time,
        amplitudes,
    })
}

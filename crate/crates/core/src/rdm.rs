//! Reduced density matrices, natural orbitals, and the anomalous
//! (complex-symmetric) one-body quantities.
//!
//! Conventions: all reduced kernels are trace-one,
//!   rho1(x; x') = integral Psi*(x', C) Psi(x, C) dC,
//! natural populations are scaled so they sum to N,
//!   rho1(x; x') = (1/N) sum_i lambda_i phi_i(x) phi_i*(x'),
//! and the anomalous kernel drops the conjugation,
//!   gamma1(x; x') = integral Psi(x', C) Psi(x, C) dC,
//! which is complex symmetric and decomposes (when diagonalizable) into
//! complex-orthonormal modes: gamma1 = sum_i mu_i chi_i(x) chi_i(x') with
//! integral chi_i chi_j dx = delta_ij (no conjugation).

use crate::error::{Error, Result};
use crate::grid::{Field1, Grid1D, Kernel2, SymmetryMap};
use crate::linalg::{general_eigenpairs, hermitian_eigen_desc};
use crate::manybody::{ManyBodyWavefunction, Statistics};
use crate::C64;
use nalgebra::DMatrix;

/// Population gap below which a pair of natural orbitals counts as
/// degenerate (their individual equations of motion are skipped).
pub const DEGENERACY_TOL: f64 = 1e-8;

/// One-body reduced density matrix kernel.
#[derive(Clone, Debug)]
pub struct OneBodyRDM {
    pub kernel: Kernel2,
    pub time: f64,
}

impl OneBodyRDM {
    /// Hermiticity, unit trace, and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let herm = self.kernel.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::Numerics(format!("rho1 hermiticity violated by {herm:.2e}")));
        }
        let tr = self.kernel.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Numerics(format!("rho1 trace {tr} differs from 1")));
        }
        let m = kernel_to_matrix(&self.kernel);
        let (vals, _) = hermitian_eigen_desc(&m);
        if let Some(min) = vals.last() {
            if *min < -1e-10 {
                return Err(Error::Numerics(format!("rho1 has negative eigenvalue {min:.2e}")));
            }
        }
        Ok(())
    }
}

fn kernel_to_matrix(k: &Kernel2) -> DMatrix<C64> {
    let n = k.n();
    DMatrix::from_fn(n, n, |i, j| k.at(i, j) * k.grid.dx())
}

/// rho1(x; x') by grid summation times dx^(N-1).
pub fn reduce_rho1(psi: &ManyBodyWavefunction) -> OneBodyRDM {
    let grid = psi.grid;
    let n = grid.n_points();
    let mut kernel = Kernel2::zeros(grid);
    match psi.n_particles {
        2 => {
            let a = &psi.amplitudes;
            for i in 0..n {
                for j in 0..=i {
                    let mut s = C64::new(0.0, 0.0);
                    for z in 0..n {
                        s += a[j * n + z].conj() * a[i * n + z];
                    }
                    s *= grid.dx();
                    *kernel.at_mut(i, j) = s;
                    *kernel.at_mut(j, i) = s.conj();
                }
            }
        }
        3 => {
            let a = &psi.amplitudes;
            let n2 = n * n;
            let w = grid.dx() * grid.dx();
            for i in 0..n {
                for j in 0..=i {
                    let mut s = C64::new(0.0, 0.0);
                    for zc in 0..n2 {
                        s += a[j * n2 + zc].conj() * a[i * n2 + zc];
                    }
                    s *= w;
                    *kernel.at_mut(i, j) = s;
                    *kernel.at_mut(j, i) = s.conj();
                }
            }
        }
        other => panic!("reduce_rho1 supports N in {{2,3}}, got {other}"),
    }
    OneBodyRDM { kernel, time: psi.time }
}

/// gamma1(x; x') = integral Psi(x', C) Psi(x, C) dC (no conjugation).
pub fn reduce_gamma1(psi: &ManyBodyWavefunction) -> AnomalousOneBody {
    let grid = psi.grid;
    let n = grid.n_points();
    let mut kernel = Kernel2::zeros(grid);
    match psi.n_particles {
        2 => {
            let a = &psi.amplitudes;
            for i in 0..n {
                for j in 0..=i {
                    let mut s = C64::new(0.0, 0.0);
                    for z in 0..n {
                        s += a[j * n + z] * a[i * n + z];
                    }
                    s *= grid.dx();
                    *kernel.at_mut(i, j) = s;
                    *kernel.at_mut(j, i) = s;
                }
            }
        }
        3 => {
            let a = &psi.amplitudes;
            let n2 = n * n;
            let w = grid.dx() * grid.dx();
            for i in 0..n {
                for j in 0..=i {
                    let mut s = C64::new(0.0, 0.0);
                    for zc in 0..n2 {
                        s += a[j * n2 + zc] * a[i * n2 + zc];
                    }
                    s *= w;
                    *kernel.at_mut(i, j) = s;
                    *kernel.at_mut(j, i) = s;
                }
            }
        }
        other => panic!("reduce_gamma1 supports N in {{2,3}}, got {other}"),
    }
    AnomalousOneBody { kernel, time: psi.time }
}

/// Evaluator for the diagonal-pair two-body kernel rho2(x_a, z_c; x_b, z_c)
/// (canonical, with conjugation) or gamma2 (anomalous, without).
#[derive(Clone, Debug)]
pub struct PairKernel {
    grid: Grid1D,
    n_particles: usize,
    conjugated: bool,
    /// N = 2: the amplitude matrix itself; N = 3: the contracted 3-index
    /// tensor K[(a n + b) n + c].
    data: Vec<C64>,
    prefactor: f64,
}

impl PairKernel {
    pub fn canonical(psi: &ManyBodyWavefunction) -> PairKernel {
        Self::build(psi, true)
    }

    pub fn anomalous(psi: &ManyBodyWavefunction) -> PairKernel {
        Self::build(psi, false)
    }

    fn build(psi: &ManyBodyWavefunction, conjugated: bool) -> PairKernel {
        let grid = psi.grid;
        let n = grid.n_points();
        match psi.n_particles {
            2 => PairKernel {
                grid,
                n_particles: 2,
                conjugated,
                data: psi.amplitudes.clone(),
                prefactor: 1.0,
            },
            3 => {
                let n2 = n * n;
                let mut data = vec![C64::new(0.0, 0.0); n * n * n];
                let a = &psi.amplitudes;
                for ia in 0..n {
                    for ib in 0..n {
                        for ic in 0..n {
                            let mut s = C64::new(0.0, 0.0);
                            for w in 0..n {
                                let right = a[(ib * n + ic) * n + w];
                                let right = if conjugated { right.conj() } else { right };
                                s += right * a[(ia * n + ic) * n + w];
                            }
                            data[(ia * n + ib) * n + ic] = s * grid.dx();
                        }
                    }
                    let _ = n2;
                }
                PairKernel { grid, n_particles: 3, conjugated, data, prefactor: 1.0 }
            }
            other => panic!("PairKernel supports N in {{2,3}}, got {other}"),
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    /// rho2(x_a, z_c; x_b, z_c) resp. gamma2(x_a, z_c; x_b, z_c).
    #[inline]
    pub fn eval(&self, a: usize, b: usize, c: usize) -> C64 {
        let n = self.grid.n_points();
        match self.n_particles {
            2 => {
                let right = self.data[b * n + c];
                let right = if self.conjugated { right.conj() } else { right };
                right * self.data[a * n + c] * self.prefactor
            }
            _ => self.data[(a * n + b) * n + c] * self.prefactor,
        }
    }

    /// True when eval(a, b, c) = left_factor(a, c) * right_factor(b, c)
    /// (the two-particle case).
    pub fn factorizes(&self) -> bool {
        self.n_particles == 2
    }

    /// Unprimed factor of the two-particle kernel.
    #[inline]
    pub fn left_factor(&self, a: usize, c: usize) -> C64 {
        debug_assert!(self.factorizes());
        self.data[a * self.grid.n_points() + c] * self.prefactor
    }

    /// Primed factor of the two-particle kernel (conjugated in the
    /// canonical case).
    #[inline]
    pub fn right_factor(&self, b: usize, c: usize) -> C64 {
        debug_assert!(self.factorizes());
        let v = self.data[b * self.grid.n_points() + c];
        if self.conjugated {
            v.conj()
        } else {
            v
        }
    }
}

/// rho2 (or gamma2) slice along the symmetry line: values[(k, z)] =
/// kernel(x, z; F(x), z) for x the k-th domain point and z over the grid.
#[derive(Clone, Debug)]
pub struct TwoBodyRDMSlice {
    pub map: SymmetryMap,
    pub values: Vec<C64>,
    pub n_z: usize,
    pub time: f64,
}

pub fn reduce_rho2_slice(psi: &ManyBodyWavefunction, map: &SymmetryMap) -> Result<TwoBodyRDMSlice> {
    slice_from_kernel(&PairKernel::canonical(psi), map, psi.time)
}

pub fn reduce_gamma2_slice(
    psi: &ManyBodyWavefunction,
    map: &SymmetryMap,
) -> Result<TwoBodyRDMSlice> {
    slice_from_kernel(&PairKernel::anomalous(psi), map, psi.time)
}

fn slice_from_kernel(kernel: &PairKernel, map: &SymmetryMap, time: f64) -> Result<TwoBodyRDMSlice> {
    let n = kernel.grid().n_points();
    let dom = map.domain();
    let mut values = Vec::with_capacity(dom.len() * n);
    for i in dom.iter() {
        let y = map.apply(i)?;
        for z in 0..n {
            values.push(kernel.eval(i, y, z));
        }
    }
    Ok(TwoBodyRDMSlice { map: *map, values, n_z: n, time })
}

/// Natural populations (summing to N) and continuum-normalized orbitals,
/// sorted by descending population.
#[derive(Clone, Debug)]
pub struct NaturalSpectrum {
    pub n_particles: usize,
    pub populations: Vec<f64>,
    pub orbitals: Vec<Field1>,
    /// Index pairs whose populations differ by less than `DEGENERACY_TOL`.
    pub degenerate_pairs: Vec<(usize, usize)>,
    pub time: f64,
}

impl NaturalSpectrum {
    pub fn is_degenerate_pair(&self, a: usize, b: usize) -> bool {
        (self.populations[a] - self.populations[b]).abs() < DEGENERACY_TOL
    }

    /// Max-abs error of (1/N) sum_i lambda_i phi_i(x) phi_i*(x') against a
    /// one-body kernel.
    pub fn reconstruction_error(&self, rho: &OneBodyRDM) -> f64 {
        let n = rho.kernel.n();
        let inv_n = 1.0 / self.n_particles as f64;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for (lam, phi) in self.populations.iter().zip(&self.orbitals) {
                    s += phi.values[i] * phi.values[j].conj() * *lam;
                }
                worst = worst.max((s * inv_n - rho.kernel.at(i, j)).norm());
            }
        }
        worst
    }

    /// Orbitals with population at least `threshold`.
    pub fn retained(&self, threshold: f64) -> Vec<usize> {
        (0..self.populations.len()).filter(|&i| self.populations[i] >= threshold).collect()
    }
}

/// Rotate the first significant component to the positive real axis.
fn fix_phase(values: &mut [C64]) {
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return;
    }
    let lead = values.iter().find(|v| v.norm() > 1e-10 * peak).copied().unwrap_or(C64::new(1.0, 0.0));
    let phase = lead / lead.norm();
    let rot = phase.conj();
    for v in values.iter_mut() {
        *v *= rot;
    }
}

/// Hermitian eigendecomposition of dx * rho1 with populations scaled to
/// sum to N. Errors when a population leaves the statistics bounds by more
/// than 1e-8.
pub fn natural_decomposition(
    rho: &OneBodyRDM,
    n_particles: usize,
    statistics: Statistics,
) -> Result<NaturalSpectrum> {
    let herm = rho.kernel.hermiticity_error();
    if herm > 1e-12 {
        return Err(Error::Numerics(format!("rho1 hermiticity violated by {herm:.2e}")));
    }
    let grid = rho.kernel.grid;
    let m = kernel_to_matrix(&rho.kernel);
    let (vals, vecs) = hermitian_eigen_desc(&m);
    let np = n_particles as f64;
    let bound = match statistics {
        Statistics::Bosonic => np,
        Statistics::Fermionic => 1.0,
    };
    let mut populations = Vec::with_capacity(vals.len());
    let mut orbitals = Vec::with_capacity(vals.len());
    let sqrt_dx = grid.dx().sqrt();
    for (v, vec) in vals.iter().zip(vecs) {
        let lam = np * v;
        if lam < -1e-8 || lam > bound + 1e-8 {
            return Err(Error::Numerics(format!(
                "natural population {lam:.6e} outside [0, {bound}] for the statistics"
            )));
        }
        let mut values: Vec<C64> = vec.iter().map(|c| c / sqrt_dx).collect();
        fix_phase(&mut values);
        populations.push(lam);
        orbitals.push(Field1 { grid, values });
    }
    let mut degenerate_pairs = Vec::new();
    for i in 1..populations.len() {
        if (populations[i - 1] - populations[i]).abs() < DEGENERACY_TOL {
            degenerate_pairs.push((i - 1, i));
        }
    }
    Ok(NaturalSpectrum { n_particles, populations, orbitals, degenerate_pairs, time: rho.time })
}

/// Complex-symmetric one-body kernel gamma1.
#[derive(Clone, Debug)]
pub struct AnomalousOneBody {
    pub kernel: Kernel2,
    pub time: f64,
}

impl AnomalousOneBody {
    pub fn symmetry_error(&self) -> f64 {
        self.kernel.symmetry_error()
    }
}

/// Complex-orthonormal spectrum of gamma1: gamma1 = sum mu_i chi_i chi_i
/// with dx * sum_x chi_i chi_j = delta_ij (bilinear, no conjugation).
#[derive(Clone, Debug)]
pub struct AnomalousSpectrum {
    pub mu: Vec<C64>,
    pub modes: Vec<Field1>,
    pub reconstruction_error: f64,
    pub time: f64,
}

/// Why the complex-orthogonal diagonalization was rejected.
#[derive(Clone, Debug)]
pub struct AnomalousFailure {
    pub eigenvalue: Option<C64>,
    pub bilinear_norm: f64,
    pub reason: String,
}

impl std::fmt::Display for AnomalousFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "non-diagonalizable within tolerance: {}", self.reason)?;
        if let Some(mu) = self.eigenvalue {
            write!(f, " (eigenvalue {mu}, |w^T w| = {:.3e})", self.bilinear_norm)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum AnomalousDecomposition {
    Spectrum(AnomalousSpectrum),
    Failure(AnomalousFailure),
}

impl AnomalousDecomposition {
    pub fn spectrum(&self) -> Option<&AnomalousSpectrum> {
        match self {
            AnomalousDecomposition::Spectrum(s) => Some(s),
            AnomalousDecomposition::Failure(_) => None,
        }
    }
}

/// General eigendecomposition of dx * gamma1 followed by bilinear
/// orthonormalization inside each (numerically clustered) eigenspace.
/// Quasi-null modes (|w^T w| <= 1e-8 before normalization) and defective
/// clusters yield a failure report instead of a spectrum.
pub fn anomalous_decomposition(gamma: &AnomalousOneBody) -> Result<AnomalousDecomposition> {
    let sym = gamma.symmetry_error();
    if sym > 1e-12 {
        return Err(Error::Numerics(format!("gamma1 symmetry violated by {sym:.2e}")));
    }
    let grid = gamma.kernel.grid;
    let n = gamma.kernel.n();
    let m = kernel_to_matrix(&gamma.kernel);
    let pairs = match general_eigenpairs(&m) {
        Ok(p) => p,
        Err(e) => {
            return Ok(AnomalousDecomposition::Failure(AnomalousFailure {
                eigenvalue: None,
                bilinear_norm: 0.0,
                reason: format!("eigensolver failure: {e}"),
            }))
        }
    };

    // thresholds relative to the matrix scale, so that a defective kernel
    // whose computed eigenvalues all collapse toward zero is not "rescued"
    // by huge near-null modes
    let m_scale = m.norm().max(1e-300);
    // deterministic order: descending |mu|, ties by (re, im)
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (&pairs[a].0, &pairs[b].0);
        mb.norm()
            .partial_cmp(&ma.norm())
            .unwrap()
            .then(ma.re.partial_cmp(&mb.re).unwrap())
            .then(ma.im.partial_cmp(&mb.im).unwrap())
    });

    let retain_tol = 1e-12 * m_scale;
    // a defective pair splits its computed eigenvalues by ~sqrt(eps), so
    // the cluster width must sit above that scale for such pairs to be
    // inspected as one eigenspace
    let cluster_tol = 1e-7 * m_scale;
    let retained: Vec<usize> =
        order.into_iter().filter(|&k| pairs[k].0.norm() > retain_tol).collect();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &k in &retained {
        match clusters.last_mut() {
            Some(cluster) if (pairs[cluster[0]].0 - pairs[k].0).norm() <= cluster_tol => {
                cluster.push(k)
            }
            _ => clusters.push(vec![k]),
        }
    }

    let mut mu = Vec::new();
    let mut modes: Vec<Vec<C64>> = Vec::new();
    for cluster in &clusters {
        // a defective eigenspace shows up as (nearly) linearly dependent
        // eigenvectors; test with a unitary Gram-Schmidt
        let mut unitary: Vec<Vec<C64>> = Vec::new();
        for &k in cluster {
            let mut w: Vec<C64> = pairs[k].1.iter().copied().collect();
            for u in &unitary {
                let proj: C64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= proj * ui;
                }
            }
            let nrm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if nrm < 1e-6 {
                return Ok(AnomalousDecomposition::Failure(AnomalousFailure {
                    eigenvalue: Some(pairs[k].0),
                    bilinear_norm: nrm,
                    reason: "defective eigenspace (dependent eigenvectors)".into(),
                }));
            }
            unitary.push(w.into_iter().map(|v| v / nrm).collect());
        }
        // bilinear Gram-Schmidt inside the eigenspace
        let mut cluster_modes: Vec<Vec<C64>> = Vec::new();
        for &k in cluster {
            let (mu_k, vec) = &pairs[k];
            let mut w: Vec<C64> = vec.iter().copied().collect();
            for z in &cluster_modes {
                let proj: C64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
                for (wi, zi) in w.iter_mut().zip(z) {
                    *wi -= proj * zi;
                }
            }
            let q: C64 = w.iter().map(|v| v * v).sum();
            if q.norm() <= 1e-8 {
                return Ok(AnomalousDecomposition::Failure(AnomalousFailure {
                    eigenvalue: Some(*mu_k),
                    bilinear_norm: q.norm(),
                    reason: "quasi-null eigenmode under the bilinear form".into(),
                }));
            }
            let inv = C64::new(1.0, 0.0) / q.sqrt();
            cluster_modes.push(w.iter().map(|v| v * inv).collect());
            mu.push(*mu_k);
        }
        modes.extend(cluster_modes);
    }

    // reconstruction check on the continuum scale
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut s = C64::new(0.0, 0.0);
            for (mu_k, z) in mu.iter().zip(&modes) {
                s += *mu_k * z[i] * z[j];
            }
            worst = worst.max((s / grid.dx() - gamma.kernel.at(i, j)).norm());
        }
    }
    if worst > 1e-8 {
        return Ok(AnomalousDecomposition::Failure(AnomalousFailure {
            eigenvalue: None,
            bilinear_norm: f64::NAN,
            reason: format!("reconstruction error {worst:.3e} above 1e-8"),
        }));
    }

    let sqrt_dx = grid.dx().sqrt();
    let modes = modes
        .into_iter()
        .map(|z| Field1 { grid, values: z.into_iter().map(|v| v / sqrt_dx).collect() })
        .collect();
    Ok(AnomalousDecomposition::Spectrum(AnomalousSpectrum {
        mu,
        modes,
        reconstruction_error: worst,
        time: gamma.time,
    }))
}

/// Multiply `orbital` by the global phase that makes its overlap with
/// `reference` real and positive (used to align orbital time series).
pub fn align_phase_to(orbital: &mut Field1, reference: &Field1) {
    let dx = orbital.grid.dx();
    let overlap: C64 = reference
        .values
        .iter()
        .zip(&orbital.values)
        .map(|(r, o)| r.conj() * o)
        .sum::<C64>()
        * dx;
    if overlap.norm() < 1e-300 {
        return;
    }
    let rot = (overlap / overlap.norm()).conj();
    for v in orbital.values.iter_mut() {
        *v *= rot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{IndexRange, Sigma};
    use crate::manybody::{ground_state, Hamiltonian, ManyBodyWavefunction};
    use crate::potentials::{InteractionSpec, Potential};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_orbital(grid: Grid1D, center: f64, width: f64) -> Vec<C64> {
        let mut v: Vec<C64> = (0..grid.n_points())
            .map(|i| {
                let t = (grid.x(i) - center) / width;
                C64::new((-0.5 * t * t).exp(), 0.0)
            })
            .collect();
        let nrm = (v.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        for a in v.iter_mut() {
            *a /= nrm;
        }
        v
    }

    fn product_state(grid: Grid1D, phi: &[C64]) -> ManyBodyWavefunction {
        let n = grid.n_points();
        let mut psi = ManyBodyWavefunction::zeros(grid, 2, Statistics::Bosonic);
        for i in 0..n {
            for j in 0..n {
                psi.amplitudes[i * n + j] = phi[i] * phi[j];
            }
        }
        psi.normalize();
        psi
    }

    #[test]
    fn product_state_gives_rank_one_rdm() {
        let grid = Grid1D::new(-8.0, 8.0, 65).unwrap();
        let phi = gaussian_orbital(grid, 0.3, 1.1);
        let psi = product_state(grid, &phi);
        let rho = reduce_rho1(&psi);
        rho.validate().unwrap();
        let n = grid.n_points();
        for i in (0..n).step_by(7) {
            for j in (0..n).step_by(5) {
                let expect = phi[i] * phi[j].conj();
                assert!((rho.kernel.at(i, j) - expect).norm() < 1e-10);
            }
        }
        let spec = natural_decomposition(&rho, 2, Statistics::Bosonic).unwrap();
        assert!((spec.populations[0] - 2.0).abs() < 1e-10);
        assert!(spec.populations[1].abs() < 1e-10);
    }

    #[test]
    fn symmetrized_pair_gives_equal_populations_and_flags_degeneracy() {
        let grid = Grid1D::new(-8.0, 8.0, 65).unwrap();
        let n = grid.n_points();
        let a = gaussian_orbital(grid, -1.5, 0.8);
        let mut b = gaussian_orbital(grid, 1.5, 0.8);
        // orthogonalize b against a
        let dot: C64 =
            a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<C64>() * grid.dx();
        for (bi, ai) in b.iter_mut().zip(&a) {
            *bi -= dot * ai;
        }
        let nrm = (b.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        for bi in b.iter_mut() {
            *bi /= nrm;
        }
        let mut psi = ManyBodyWavefunction::zeros(grid, 2, Statistics::Bosonic);
        for i in 0..n {
            for j in 0..n {
                psi.amplitudes[i * n + j] = a[i] * b[j] + b[i] * a[j];
            }
        }
        psi.normalize();
        let rho = reduce_rho1(&psi);
        rho.validate().unwrap();
        let spec = natural_decomposition(&rho, 2, Statistics::Bosonic).unwrap();
        assert!((spec.populations[0] - 1.0).abs() < 1e-9, "{:?}", &spec.populations[..3]);
        assert!((spec.populations[1] - 1.0).abs() < 1e-9);
        assert!(spec.degenerate_pairs.contains(&(0, 1)));
        assert!(spec.reconstruction_error(&rho) < 1e-10);
    }

    #[test]
    fn random_two_body_reduction_matches_brute_force() {
        let grid = Grid1D::new(-4.0, 4.0, 32).unwrap();
        let n = grid.n_points();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut psi = ManyBodyWavefunction::zeros(grid, 2, Statistics::Bosonic);
        for a in psi.amplitudes.iter_mut() {
            *a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        psi.symmetrize();
        psi.normalize();
        let rho = reduce_rho1(&psi);
        // brute force: independent triple loop
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for z in 0..n {
                    s += psi.amplitudes[j * n + z].conj() * psi.amplitudes[i * n + z];
                }
                s *= grid.dx();
                assert!((rho.kernel.at(i, j) - s).norm() < 1e-13);
            }
        }
        // gamma against brute force, and its symmetry
        let gamma = reduce_gamma1(&psi);
        assert!(gamma.symmetry_error() < 1e-12);
        for i in (0..n).step_by(3) {
            for j in (0..n).step_by(4) {
                let mut s = C64::new(0.0, 0.0);
                for z in 0..n {
                    s += psi.amplitudes[j * n + z] * psi.amplitudes[i * n + z];
                }
                s *= grid.dx();
                assert!((gamma.kernel.at(i, j) - s).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn three_body_slice_matches_brute_force() {
        let grid = Grid1D::new(-3.0, 3.0, 24).unwrap();
        let n = grid.n_points();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut psi = ManyBodyWavefunction::zeros(grid, 3, Statistics::Fermionic);
        for a in psi.amplitudes.iter_mut() {
            *a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        psi.symmetrize();
        psi.normalize();
        let map = SymmetryMap::new(grid, Sigma::Inversion, 0.0, IndexRange::new(4, 10)).unwrap();
        let slice = reduce_rho2_slice(&psi, &map).unwrap();
        let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        for (k, i) in map.domain().iter().enumerate() {
            let y = map.apply(i).unwrap();
            for z in (0..n).step_by(5) {
                let mut s = C64::new(0.0, 0.0);
                for w in 0..n {
                    s += psi.amplitudes[idx(y, z, w)].conj() * psi.amplitudes[idx(i, z, w)];
                }
                s *= grid.dx();
                assert!((slice.values[k * n + z] - s).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn two_body_slice_trace_is_one() {
        let grid = Grid1D::new(-6.0, 6.0, 48).unwrap();
        let phi = gaussian_orbital(grid, 0.0, 1.0);
        let psi = product_state(grid, &phi);
        let kernel = PairKernel::canonical(&psi);
        let n = grid.n_points();
        let mut tr = C64::new(0.0, 0.0);
        for x in 0..n {
            for z in 0..n {
                tr += kernel.eval(x, x, z);
            }
        }
        tr *= grid.dx() * grid.dx();
        assert!((tr.re - 1.0).abs() < 1e-10 && tr.im.abs() < 1e-12, "trace {tr}");
    }

    #[test]
    fn partial_trace_chain() {
        // dx * sum_z rho2(x, z; y, z) equals rho1(x; y) for N = 2
        let grid = Grid1D::new(-5.0, 5.0, 40).unwrap();
        let n = grid.n_points();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut psi = ManyBodyWavefunction::zeros(grid, 2, Statistics::Bosonic);
        for a in psi.amplitudes.iter_mut() {
            *a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        psi.symmetrize();
        psi.normalize();
        let rho = reduce_rho1(&psi);
        let kernel = PairKernel::canonical(&psi);
        for x in (0..n).step_by(3) {
            for y in (0..n).step_by(4) {
                let mut s = C64::new(0.0, 0.0);
                for z in 0..n {
                    s += kernel.eval(x, y, z);
                }
                s *= grid.dx();
                assert!((s - rho.kernel.at(x, y)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn interacting_ground_state_shows_depletion() {
        let run = |grid: Grid1D| -> (f64, f64) {
            let u = Potential::from_fn(grid, |x| 0.5 * x * x);
            let h = Hamiltonian::new(&u, &InteractionSpec::Contact { g: 1.0 }, 2, None).unwrap();
            let (psi, _) = ground_state(&h, &u, Statistics::Bosonic, Default::default()).unwrap();
            let rho = reduce_rho1(&psi);
            let spec = natural_decomposition(&rho, 2, Statistics::Bosonic).unwrap();
            let total: f64 = spec.populations.iter().sum();
            (spec.populations[0], total)
        };
        let grid = Grid1D::new(-7.0, 7.0, 81).unwrap();
        let (lam1, total) = run(grid);
        assert!((total - 2.0).abs() < 1e-10, "sum {total}");
        assert!(lam1 < 2.0 - 1e-4, "no depletion: {lam1}");
        // dense-grid oracle for the depletion value
        let (lam1_fine, _) = run(grid.refined());
        let depl = 2.0 - lam1;
        let depl_fine = 2.0 - lam1_fine;
        assert!(
            (depl - depl_fine).abs() < 0.05 * depl_fine,
            "depletion {depl} vs refined {depl_fine}"
        );
    }

    #[test]
    fn real_wavefunction_gamma_equals_rho() {
        let grid = Grid1D::new(-7.0, 7.0, 61).unwrap();
        let u = Potential::from_fn(grid, |x| 0.5 * x * x);
        let h = Hamiltonian::new(&u, &InteractionSpec::Contact { g: 1.0 }, 2, None).unwrap();
        let (psi, _) = ground_state(&h, &u, Statistics::Bosonic, Default::default()).unwrap();
        // imaginary-time iterates of a real seed stay real
        let rho = reduce_rho1(&psi);
        let gamma = reduce_gamma1(&psi);
        let n = grid.n_points();
        for i in 0..n {
            for j in 0..n {
                assert!((rho.kernel.at(i, j) - gamma.kernel.at(i, j)).norm() < 1e-12);
            }
        }
        // anomalous spectrum matches natural populations / N
        let spec = natural_decomposition(&rho, 2, Statistics::Bosonic).unwrap();
        match anomalous_decomposition(&gamma).unwrap() {
            AnomalousDecomposition::Spectrum(an) => {
                assert!(an.reconstruction_error < 1e-8);
                for k in 0..3 {
                    assert!(
                        (an.mu[k].re - spec.populations[k] / 2.0).abs() < 1e-8
                            && an.mu[k].im.abs() < 1e-10,
                        "mu[{k}] = {} vs lambda/N = {}",
                        an.mu[k],
                        spec.populations[k] / 2.0
                    );
                }
            }
            AnomalousDecomposition::Failure(f) => panic!("unexpected failure: {f}"),
        }
    }

    #[test]
    fn rank_one_anomalous_spectrum() {
        let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
        let n = grid.n_points();
        // complex orbital with nonvanishing bilinear norm
        let phi: Vec<C64> = (0..n)
            .map(|i| {
                let x = grid.x(i);
                C64::new(0.0, 0.3 * x).exp() * C64::new((-0.5 * x * x).exp(), 0.0)
            })
            .collect();
        let mut kernel = Kernel2::zeros(grid);
        for i in 0..n {
            for j in 0..n {
                *kernel.at_mut(i, j) = phi[i] * phi[j];
            }
        }
        let gamma = AnomalousOneBody { kernel, time: 0.0 };
        let q: C64 = phi.iter().map(|v| v * v).sum::<C64>() * grid.dx();
        match anomalous_decomposition(&gamma).unwrap() {
            AnomalousDecomposition::Spectrum(an) => {
                assert!((an.mu[0] - q).norm() < 1e-10, "mu {} vs int phi^2 {q}", an.mu[0]);
                // chi = phi / sqrt(int phi^2), up to the sqrt branch sign
                let chi = &an.modes[0].values;
                let scale = q.sqrt();
                let direct: f64 =
                    chi.iter().zip(&phi).map(|(c, p)| (c - p / scale).norm()).fold(0.0, f64::max);
                let flipped: f64 =
                    chi.iter().zip(&phi).map(|(c, p)| (c + p / scale).norm()).fold(0.0, f64::max);
                assert!(direct.min(flipped) < 1e-8, "mode mismatch {direct} / {flipped}");
            }
            AnomalousDecomposition::Failure(f) => panic!("unexpected failure: {f}"),
        }
    }

    #[test]
    fn quasi_null_mode_yields_failure_report() {
        let grid = Grid1D::new(-8.0, 8.0, 64).unwrap();
        let n = grid.n_points();
        let even = gaussian_orbital(grid, 0.0, 1.0);
        let odd: Vec<C64> = (0..n)
            .map(|i| {
                let x = grid.x(i);
                C64::new(x * (-0.5 * x * x).exp(), 0.0)
            })
            .collect();
        let nrm = (odd.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        let odd: Vec<C64> = odd.into_iter().map(|v| v / nrm).collect();

        // brute-force search over two-mode mixtures for the smallest
        // bilinear norm: phi = cos(t) even + i sin(t) odd
        let bilinear = |t: f64| -> f64 {
            let phi: Vec<C64> =
                even.iter().zip(&odd).map(|(e, o)| e * t.cos() + C64::new(0.0, 1.0) * o * t.sin()).collect();
            (phi.iter().map(|v| v * v).sum::<C64>() * grid.dx()).norm()
        };
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for k in 0..=400 {
            let t = k as f64 / 400.0 * std::f64::consts::FRAC_PI_2;
            let b = bilinear(t);
            if b < best {
                best = b;
                best_t = t;
            }
        }
        assert!(best < 1e-10, "search failed to find a null mixture, best {best}");
        let phi: Vec<C64> = even
            .iter()
            .zip(&odd)
            .map(|(e, o)| e * best_t.cos() + C64::new(0.0, 1.0) * o * best_t.sin())
            .collect();
        let mut kernel = Kernel2::zeros(grid);
        for i in 0..n {
            for j in 0..n {
                *kernel.at_mut(i, j) = phi[i] * phi[j];
            }
        }
        let gamma = AnomalousOneBody { kernel, time: 0.0 };
        match anomalous_decomposition(&gamma).unwrap() {
            AnomalousDecomposition::Failure(f) => {
                assert!(
                    f.reason.contains("quasi-null")
                        || f.reason.contains("defective")
                        || f.reason.contains("reconstruction"),
                    "unexpected reason: {}",
                    f.reason
                );
            }
            AnomalousDecomposition::Spectrum(s) =>

                panic!("expected failure, got spectrum with {} modes", s.mu.len()),
        }
    }

    #[test]
    fn fermionic_populations_capped_at_one() {
        let grid = Grid1D::new(-8.0, 8.0, 65).unwrap();
        let n = grid.n_points();
        let a = gaussian_orbital(grid, -1.0, 0.9);
        let b: Vec<C64> = (0..n)
            .map(|i| {
                let x = grid.x(i);
                C64::new(x * (-0.4 * x * x).exp(), 0.0)
            })
            .collect();
        let nrm = (b.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        let b: Vec<C64> = b.into_iter().map(|v| v / nrm).collect();
        let mut psi = ManyBodyWavefunction::zeros(grid, 2, Statistics::Fermionic);
        for i in 0..n {
            for j in 0..n {
                psi.amplitudes[i * n + j] = a[i] * b[j] - b[i] * a[j];
            }
        }
        psi.normalize();
        let rho = reduce_rho1(&psi);
        let spec = natural_decomposition(&rho, 2, Statistics::Fermionic).unwrap();
        for lam in &spec.populations {
            assert!(*lam <= 1.0 + 1e-10, "population {lam}");
        }
        assert!(spec.reconstruction_error(&rho) < 1e-10);
    }

    #[test]
    fn orbital_orthonormality() {
        let grid = Grid1D::new(-7.0, 7.0, 61).unwrap();
        let u = Potential::from_fn(grid, |x| 0.5 * x * x);
        let h = Hamiltonian::new(&u, &InteractionSpec::Contact { g: 1.0 }, 2, None).unwrap();
        let (psi, _) = ground_state(&h, &u, Statistics::Bosonic, Default::default()).unwrap();
        let spec =
            natural_decomposition(&reduce_rho1(&psi), 2, Statistics::Bosonic).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot: C64 = spec.orbitals[i]
                    .values
                    .iter()
                    .zip(&spec.orbitals[j].values)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<C64>()
                    * grid.dx();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
    }
}

//! Collision integrals of the correlator equations of motion and their
//! decompositions.
//!
//! Generic form on a map domain:
//!   T(x) = pref * integral (V(x,z) - V(y,z)) rho2(x, z; y, z) dz
//! with y = F(x). The prefactor is centralized here: N(N-1) when the
//! left-hand side is the N-scaled correlator sum_i lambda_i phi_i phi_i*(y),
//! and (N-1) against trace-one kernels (used by the anomalous equation),
//! preventing double-counted conventions.

use crate::error::{Error, Result};
use crate::grid::{IndexRange, Sigma, SymmetryMap};
use crate::potentials::InteractionSpec;
use crate::rdm::{NaturalSpectrum, PairKernel};
use crate::C64;

/// Scaling of the correlator the collision term is written against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrelatorScaling {
    /// sum_i lambda_i phi_i(x) phi_i*(y) = N rho1(x; y)
    NScaled,
    /// trace-one kernels rho1 / gamma1
    TraceOne,
}

/// N(N-1) against the N-scaled correlator, (N-1) against trace-one kernels.
pub fn collision_prefactor(n_particles: usize, scaling: CorrelatorScaling) -> f64 {
    let n = n_particles as f64;
    match scaling {
        CorrelatorScaling::NScaled => n * (n - 1.0),
        CorrelatorScaling::TraceOne => n - 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionVariant {
    /// Quadrature of the defining integral over the whole grid.
    Generic,
    /// Generic evaluation split into z inside D union F(D) and the rest.
    Split,
    /// Intradomain difference form for gapped inversion symmetries and
    /// distance-dependent interactions: the integrand is folded onto D.
    InversionForm,
    /// Closed form for the contact interaction.
    Contact,
}

/// Collision integral T(x) on the map domain, with the T_D / T_E split
/// when requested. Additivity T = T_D + T_E holds at quadrature level by
/// construction (the split masks one weighted sum).
#[derive(Clone, Debug)]
pub struct CollisionField {
    pub variant: CollisionVariant,
    pub map: SymmetryMap,
    pub range: IndexRange,
    pub total: Vec<C64>,
    pub intra: Option<Vec<C64>>,
    pub exterior: Option<Vec<C64>>,
    /// Set when the generic split is evaluated on a gapped domain, which
    /// the intradomain rewriting does not explicitly cover.
    pub gapped_flag: bool,
    pub time: f64,
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

pub fn collision_integral(
    kernel: &PairKernel,
    v: &InteractionSpec,
    map: &SymmetryMap,
    variant: CollisionVariant,
    n_particles: usize,
    scaling: CorrelatorScaling,
) -> Result<CollisionField> {
    let grid = kernel.grid();
    if grid != map.grid() {
        return Err(Error::Config("pair kernel and map grids differ".into()));
    }
    let n = grid.n_points();
    let dx = grid.dx();
    let pref = collision_prefactor(n_particles, scaling);
    let range = map.domain();
    let time = 0.0;

    match variant {
        CollisionVariant::Generic | CollisionVariant::Split => {
            if v.is_none() {
                let zeros = vec![C64::new(0.0, 0.0); range.len()];
                return Ok(CollisionField {
                    variant,
                    map: *map,
                    range,
                    total: zeros.clone(),
                    intra: (variant == CollisionVariant::Split).then(|| zeros.clone()),
                    exterior: (variant == CollisionVariant::Split).then_some(zeros),
                    gapped_flag: map.is_gapped(),
                    time,
                });
            }
            let vm = v.matrix(grid);
            let dom = map.domain();
            let cod = map.codomain();
            let in_union = |z: usize| dom.contains(z) || cod.contains(z);
            let mut total = Vec::with_capacity(range.len());
            let mut intra = Vec::with_capacity(range.len());
            let mut exterior = Vec::with_capacity(range.len());
            for i in range.iter() {
                let y = map.apply(i)?;
                let mut t_d = C64::new(0.0, 0.0);
                let mut t_e = C64::new(0.0, 0.0);
                for z in 0..n {
                    let dv = vm[i * n + z] - vm[y * n + z];
                    if dv == 0.0 {
                        continue;
                    }
                    let w = trapezoid_weight(z, n) * dx;
                    let term = kernel.eval(i, y, z) * (dv * w);
                    if in_union(z) {
                        t_d += term;
                    } else {
                        t_e += term;
                    }
                }
                total.push((t_d + t_e) * pref);
                intra.push(t_d * pref);
                exterior.push(t_e * pref);
            }
            Ok(CollisionField {
                variant,
                map: *map,
                range,
                total,
                intra: (variant == CollisionVariant::Split).then_some(intra),
                exterior: (variant == CollisionVariant::Split).then_some(exterior),
                gapped_flag: map.is_gapped(),
                time,
            })
        }
        CollisionVariant::InversionForm => {
            if map.sigma() != Sigma::Inversion {
                return Err(Error::Config(
                    "inversion-form collision integral needs sigma = -1".into(),
                ));
            }
            if !matches!(v, InteractionSpec::Gaussian { .. }) {
                return Err(Error::Config(
                    "inversion-form needs a distance-dependent finite-range interaction".into(),
                ));
            }
            if !map.is_gapped() {
                return Err(Error::Config(
                    "inversion-form assumes disjoint domain and codomain (gapped symmetry)".into(),
                ));
            }
            let vm = v.matrix(grid);
            let mut total = Vec::with_capacity(range.len());
            for i in range.iter() {
                let y = map.apply(i)?;
                let mut acc = C64::new(0.0, 0.0);
                for z in map.domain().iter() {
                    let fz = map
                        .image(z)
                        .ok_or_else(|| Error::Domain("map image of z off the grid".into()))?;
                    let dv = vm[i * n + z] - vm[y * n + z];
                    if dv == 0.0 {
                        continue;
                    }
                    // interior weights: the codomain relabeling keeps them
                    let w = trapezoid_weight(z, n) * dx;
                    acc += (kernel.eval(i, y, z) - kernel.eval(i, y, fz)) * (dv * w);
                }
                total.push(acc * pref);
            }
            Ok(CollisionField {
                variant,
                map: *map,
                range,
                total,
                intra: None,
                exterior: None,
                gapped_flag: false,
                time,
            })
        }
        CollisionVariant::Contact => {
            let g = match v {
                InteractionSpec::Contact { g } => *g,
                _ => {
                    return Err(Error::Config(
                        "contact collision variant needs a contact interaction".into(),
                    ))
                }
            };
            let mut total = Vec::with_capacity(range.len());
            for i in range.iter() {
                let y = map.apply(i)?;
                // pref * g * [rho2(x, x; y, x) - rho2(x, y; y, y)]
                total.push((kernel.eval(i, y, i) - kernel.eval(i, y, y)) * (pref * g));
            }
            Ok(CollisionField {
                variant,
                map: *map,
                range,
                total,
                intra: None,
                exterior: None,
                gapped_flag: false,
                time,
            })
        }
    }
}

/// One matrix element of the collision integral in the natural-orbital
/// basis, or the reason it was skipped.
#[derive(Clone, Debug)]
pub struct IpnEntry {
    pub p: usize,
    pub n: usize,
    pub value: Option<C64>,
    pub skipped: Option<String>,
}

/// I_pn = integral phi_n(x'') phi_p*(x') [V(x',z) - V(x'',z)]
///        rho2(x', z; x'', z) dx' dx'' dz
/// by nested trapezoid sums. Degenerate pairs (population gap below the
/// degeneracy tolerance) are skipped with a report.
pub fn collision_matrix_elements(
    spectrum: &NaturalSpectrum,
    kernel: &PairKernel,
    v: &InteractionSpec,
    pairs: &[(usize, usize)],
) -> Result<Vec<IpnEntry>> {
    let grid = kernel.grid();
    let n = grid.n_points();
    let dx = grid.dx();
    if v.is_none() {
        return Ok(pairs
            .iter()
            .map(|&(p, nn)| IpnEntry { p, n: nn, value: Some(C64::new(0.0, 0.0)), skipped: None })
            .collect());
    }
    let vm = v.matrix(grid);
    let mut out = Vec::with_capacity(pairs.len());
    for &(p, nn) in pairs {
        if p != nn && spectrum.is_degenerate_pair(p, nn) {
            out.push(IpnEntry {
                p,
                n: nn,
                value: None,
                skipped: Some(format!(
                    "populations {:.3e} and {:.3e} degenerate",
                    spectrum.populations[p], spectrum.populations[nn]
                )),
            });
            continue;
        }
        let phi_p = &spectrum.orbitals[p].values;
        let phi_n = &spectrum.orbitals[nn].values;
        // I_pn = sum_z w_z [ alpha_p(z) beta_n(z) - gamma_p(z) delta_n(z) ]
        // alpha_p(z) = sum_x' w phi_p*(x') V(x',z) K_fwd, etc.; for general
        // kernels fall back to the direct triple sum.
        let mut acc = C64::new(0.0, 0.0);
        for z in 0..n {
            let wz = trapezoid_weight(z, n) * dx;
            let mut alpha = C64::new(0.0, 0.0); // sum_x' w phi_p*(x') V(x', z) row(x')
            let mut gamma = C64::new(0.0, 0.0); // sum_x' w phi_p*(x') row(x')
            let mut beta = C64::new(0.0, 0.0); // sum_x'' w phi_n(x'') col(x'')
            let mut delta = C64::new(0.0, 0.0); // sum_x'' w phi_n(x'') V(x'', z) col(x'')
            // rho2(x', z; x'', z) = row(x') * col(x'') only for N = 2;
            // use the factorized path there and the direct sum otherwise.
            if kernel.factorizes() {
                for xp in 0..n {
                    let w = trapezoid_weight(xp, n) * dx;
                    let row = kernel.left_factor(xp, z);
                    let a = phi_p[xp].conj() * row * w;
                    alpha += a * vm[xp * n + z];
                    gamma += a;
                }
                for xpp in 0..n {
                    let w = trapezoid_weight(xpp, n) * dx;
                    let col = kernel.right_factor(xpp, z);
                    let b = phi_n[xpp] * col * w;
                    beta += b;
                    delta += b * vm[xpp * n + z];
                }
                acc += (alpha * beta - gamma * delta) * wz;
            } else {
                let mut inner = C64::new(0.0, 0.0);
                for xp in 0..n {
                    let wp = trapezoid_weight(xp, n) * dx;
                    let vpz = vm[xp * n + z];
                    for xpp in 0..n {
                        let wpp = trapezoid_weight(xpp, n) * dx;
                        let dv = vpz - vm[xpp * n + z];
                        if dv == 0.0 {
                            continue;
                        }
                        inner += phi_n[xpp]
                            * phi_p[xp].conj()
                            * kernel.eval(xp, xpp, z)
                            * (dv * wp * wpp);
                    }
                }
                acc += inner * wz;
            }
        }
        out.push(IpnEntry { p, n: nn, value: Some(acc), skipped: None });
    }
    Ok(out)
}

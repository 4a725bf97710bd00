//! Multipole moments of lattice boxes, moment translations, pair energies,
//! hierarchical Coulomb evaluation and the exact brute-force oracle.
//!
//! All energies are in lattice units with a `1/r` kernel. Unordered box (or
//! site) pairs are enumerated once with full coefficient, which absorbs the
//! `1/2` of the double-sum form of the Coulomb operator.

use num_complex::Complex64;
use thiserror::Error;

use crate::harmonics::{irregular_table, regular_table, HarmonicsError};
use crate::hierarchy::{BoxHierarchy, BoxId, LatticeBox};
use crate::lattice::{FockState, LatticeSpec};

#[derive(Debug, Error, PartialEq)]
pub enum MultipoleError {
    #[error("coulomb kernel is singular for coincident points")]
    CoincidentPoints,
    #[error("boxes are not well separated: distance {dist} <= max radius {radius}")]
    NotSeparated { dist: f64, radius: f64 },
    #[error("children do not share the given parent box")]
    MismatchedParent,
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
}

/// `1/|ra - rb|`.
pub fn coulomb_kernel(ra: [f64; 3], rb: [f64; 3]) -> Result<f64, MultipoleError> {
    let d2 = (ra[0] - rb[0]).powi(2) + (ra[1] - rb[1]).powi(2) + (ra[2] - rb[2]).powi(2);
    if d2 == 0.0 {
        return Err(MultipoleError::CoincidentPoints);
    }
    Ok(1.0 / d2.sqrt())
}

/// Complex multipole coefficients of a charge distribution about a center,
/// truncated at order `p`. Only `m >= 0` is stored; negative `m` follows
/// from `M_{l,-m} = (-1)^m conj(M_lm)` for real charges.
#[derive(Debug, Clone)]
pub struct MomentSet {
    order_p: u32,
    center: [f64; 3],
    /// Radius bound of the expanded charge distribution; `|M_lm| <= Q_box * radius^l`.
    radius: f64,
    coeffs: Vec<Complex64>,
}

impl MomentSet {
    fn idx(l: u32, m: u32) -> usize {
        (l * (l + 1) / 2 + m) as usize
    }

    pub fn zero(order_p: u32, center: [f64; 3], radius: f64) -> Self {
        Self {
            order_p,
            center,
            radius,
            coeffs: vec![Complex64::ZERO; Self::idx(order_p, order_p) + 1],
        }
    }

    pub fn order(&self) -> u32 {
        self.order_p
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn get(&self, l: u32, m: i32) -> Complex64 {
        debug_assert!(m.unsigned_abs() <= l && l <= self.order_p);
        let v = self.coeffs[Self::idx(l, m.unsigned_abs())];
        if m >= 0 {
            v
        } else if m % 2 == 0 {
            v.conj()
        } else {
            -v.conj()
        }
    }

    fn add(&mut self, l: u32, m: u32, v: Complex64) {
        let i = Self::idx(l, m);
        self.coeffs[i] += v;
    }

    #[doc(hidden)]
    pub fn add_for_test(&mut self, l: u32, m: u32, v: Complex64) {
        self.add(l, m, v);
    }

    /// Positive scale factor dividing coefficients of degree `l` so the
    /// normalized magnitude is bounded by the box electron count.
    pub fn normalization(&self, l: u32) -> f64 {
        self.radius.powi(l as i32)
    }

    /// Coefficient in register units, `M_lm / radius^l`.
    pub fn normalized(&self, l: u32, m: i32) -> Complex64 {
        self.get(l, m) / self.normalization(l)
    }

    /// Total charge; the `(0,0)` coefficient.
    pub fn total_charge(&self) -> f64 {
        self.coeffs[0].re
    }
}

/// Moments of the occupation of `id` about its own center:
/// `M_lm = sum_a R_lm(r_a - center) q_a`.
pub fn compute_moments(h: &BoxHierarchy, id: BoxId, state: &FockState, p: u32) -> MomentSet {
    let b = h.box_at(id);
    let mut out = MomentSet::zero(p, b.center, b.radius);
    for site in h.sites_in_box(id) {
        let q = state.occupation(site) as f64;
        if q == 0.0 {
            continue;
        }
        let pos = h.lattice().site_position(site);
        let rel = [pos[0] - b.center[0], pos[1] - b.center[1], pos[2] - b.center[2]];
        let table = regular_table(p, rel);
        for l in 0..=p {
            for m in 0..=l {
                out.add(l, m, table.get(l, m as i32) * q);
            }
        }
    }
    out
}

/// Shift the expansion origin by `d` (child center -> child center + d):
/// `M'_lm = sum_{jk} R_{l-j,m-k}(-d) M_jk`, exact for truncated expansions.
pub fn translate_m2m(child: &MomentSet, d: [f64; 3]) -> MomentSet {
    let p = child.order_p;
    let neg = [-d[0], -d[1], -d[2]];
    let table = regular_table(p, neg);
    let center = [
        child.center[0] + d[0],
        child.center[1] + d[1],
        child.center[2] + d[2],
    ];
    let radius = child.radius + (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let mut out = MomentSet::zero(p, center, radius);
    for l in 0..=p {
        for m in 0..=l as i32 {
            let mut acc = Complex64::ZERO;
            for j in 0..=l {
                for k in -(j as i32)..=j as i32 {
                    let (lj, mk) = (l - j, m - k);
                    if mk.unsigned_abs() <= lj {
                        acc += table.get(lj, mk) * child.get(j, k);
                    }
                }
            }
            out.add(l, m as u32, acc);
        }
    }
    out
}

/// Parent moments as the sum of all four children translated to the parent
/// center. Children must actually belong to `parent`.
pub fn aggregate_children(
    children: &[MomentSet],
    parent: &LatticeBox,
) -> Result<MomentSet, MultipoleError> {
    let mut out = MomentSet::zero(
        children.first().map_or(0, |c| c.order_p),
        parent.center,
        parent.radius,
    );
    for child in children {
        let d = [
            parent.center[0] - child.center[0],
            parent.center[1] - child.center[1],
            parent.center[2] - child.center[2],
        ];
        // a child center sits half a child-box side off the parent center
        // along each axis
        let expect = parent.side_sites as f64 / 4.0;
        if (d[0].abs() - expect).abs() > 1e-9 || (d[1].abs() - expect).abs() > 1e-9 {
            return Err(MultipoleError::MismatchedParent);
        }
        let shifted = translate_m2m(child, d);
        for l in 0..=out.order_p {
            for m in 0..=l {
                out.add(l, m, shifted.get(l, m as i32));
            }
        }
    }
    Ok(out)
}

/// Interaction energy of two well-separated expansions:
/// `sum_{l+j<=p} (-1)^l M^A_lm conj(I_{l+j,m+k}(r_ab)) M^B_jk`, where
/// `r_ab = center_A - center_B`. The imaginary residue is discarded (it is
/// at floating-point level for real charges); the real part is returned.
pub fn pair_energy(
    ma: &MomentSet,
    mb: &MomentSet,
    r_ab: [f64; 3],
    p: u32,
) -> Result<f64, MultipoleError> {
    assert!(p <= ma.order_p && p <= mb.order_p, "moment sets must carry order >= p");
    let dist = (r_ab[0] * r_ab[0] + r_ab[1] * r_ab[1] + r_ab[2] * r_ab[2]).sqrt();
    let radius = ma.radius.max(mb.radius);
    if dist <= radius {
        return Err(MultipoleError::NotSeparated { dist, radius });
    }
    let itab = irregular_table(p, r_ab)?;
    let mut acc = Complex64::ZERO;
    for l in 0..=p {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        for m in -(l as i32)..=l as i32 {
            let a = ma.get(l, m);
            if a == Complex64::ZERO {
                continue;
            }
            for j in 0..=p - l {
                for k in -(j as i32)..=j as i32 {
                    let (big_l, big_m) = (l + j, m + k);
                    if big_m.unsigned_abs() > big_l {
                        continue;
                    }
                    acc += sign * a * itab.get(big_l, big_m).conj() * mb.get(j, k);
                }
            }
        }
    }
    Ok(acc.re)
}

/// Exact Coulomb energy `sum_{a<b} q_a q_b / |r_a - r_b|` over occupied site
/// pairs (spinful occupations multiply as per-site totals; the on-site term
/// is not part of this sum).
pub fn brute_force_energy(lattice: &LatticeSpec, state: &FockState) -> f64 {
    let n = lattice.sites();
    let mut e = 0.0;
    for a in 0..n {
        let qa = state.occupation(a) as f64;
        if qa == 0.0 {
            continue;
        }
        let pa = lattice.site_position(a);
        for b in a + 1..n {
            let qb = state.occupation(b) as f64;
            if qb == 0.0 {
                continue;
            }
            let pb = lattice.site_position(b);
            e += qa * qb * coulomb_kernel(pa, pb).expect("distinct sites");
        }
    }
    e
}

/// Hierarchical approximation of the Coulomb energy: interaction-list pair
/// energies at every level plus the exact finest-level near-field sum. Each
/// unordered pair enters once.
pub fn fmm_total_energy(h: &BoxHierarchy, state: &FockState, p: u32) -> f64 {
    let lattice = h.lattice();
    let mut e = 0.0;
    for level in 2..=h.max_level() {
        let pairs = h.interaction_pairs(level);
        if pairs.is_empty() {
            continue;
        }
        let boxes = h.boxes(level);
        let mut moments: Vec<Option<MomentSet>> = vec![None; boxes.len()];
        let linear = |id: BoxId| {
            let n = 1usize << id.level;
            id.iy as usize * n + id.ix as usize
        };
        for (a, b) in pairs {
            for id in [a, b] {
                let i = linear(id);
                if moments[i].is_none() {
                    moments[i] = Some(compute_moments(h, id, state, p));
                }
            }
            let ma = moments[linear(a)].as_ref().unwrap();
            let mb = moments[linear(b)].as_ref().unwrap();
            let ca = ma.center();
            let cb = mb.center();
            let r_ab = [ca[0] - cb[0], ca[1] - cb[1], ca[2] - cb[2]];
            e += pair_energy(ma, mb, r_ab, p).expect("interaction pairs are well separated");
        }
    }
    for (sa, sb) in h.finest_near_pairs() {
        let q = state.occupation(sa) as f64 * state.occupation(sb) as f64;
        if q != 0.0 {
            e += q * coulomb_kernel(lattice.site_position(sa), lattice.site_position(sb))
                .expect("distinct sites");
        }
    }
    e
}

/// One state's worth of sweep output.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sites: usize,
    pub p: u32,
    pub state_seed: u64,
    pub e_fmm: f64,
    pub e_exact: f64,
    pub rel_error: f64,
}

/// Per-order summary of a sweep.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub p: u32,
    pub median_rel_error: f64,
}

/// Evaluate the hierarchical energy against the brute-force oracle across
/// sampled states and orders. Requires at least 10 states.
pub fn fmm_error_sweep(
    h: &BoxHierarchy,
    states: &[(u64, FockState)],
    p_values: &[u32],
) -> (Vec<SweepRow>, Vec<SweepSummary>) {
    assert!(states.len() >= 10, "error sweep needs at least 10 states");
    let lattice = h.lattice();
    let mut rows = Vec::with_capacity(states.len() * p_values.len());
    let mut summaries = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let mut errs = Vec::with_capacity(states.len());
        for (seed, state) in states {
            let e_exact = brute_force_energy(lattice, state);
            let e_fmm = fmm_total_energy(h, state, p);
            let rel = if e_exact != 0.0 {
                (e_fmm - e_exact).abs() / e_exact.abs()
            } else {
                (e_fmm - e_exact).abs()
            };
            errs.push(rel);
            rows.push(SweepRow {
                sites: lattice.sites(),
                p,
                state_seed: *seed,
                e_fmm,
                e_exact,
                rel_error: rel,
            });
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = errs[errs.len() / 2];
        summaries.push(SweepSummary {
            p,
            median_rel_error: median,
        });
    }
    (rows, summaries)
}

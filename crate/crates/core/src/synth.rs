//! Compilation of a lattice + hierarchy + expansion order into the full
//! Trotter-step Coulomb circuit, and the quantized classical evaluator that
//! predicts its per-basis phases bit-exactly.
//!
//! The synthesizer first builds a [`SynthPlan`]: per-level register widths,
//! quantized constants (rounded to nearest even), folded real coefficient
//! lists for moment loading, child-to-parent translation and pair-energy
//! evaluation, plus effective times for the direct phases. The circuit
//! emitter and the classical evaluator both consume the plan and share the
//! row-level arithmetic semantics of [`crate::arith`], so the gate-level
//! phases and the classical prediction cannot diverge.
//!
//! Circuit structure (compute/uncompute discipline):
//!
//! 1. on-site phases (spinful), then finest-level direct CPHASE pairs
//!    (interaction-list plus near-field pairs);
//! 2. per coarser level, finest first: merge (box sums at order 0, moment
//!    registers at order >= 1), optional COPY, pair evolution, inverse
//!    COPY; all pair-local ancillae are restored inside each evolution;
//! 3. after the coarsest level: inverse merges in reverse order, so every
//!    ancilla returns to zero and the net action is diagonal.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::arith::{
    accumulate_ladder_phase, const_load_gates, const_mac_apply, const_mac_gates, copy_gates,
    mult_acc_apply, mult_acc_gates, out_of_place_add_gates, phase_ladder_gates, Operand,
};
use crate::circuit::{Circuit, CircuitError, Gate, RegId, RegisterRole, SegmentKind};
use crate::fixedpoint::FixedPointFormat;
use crate::harmonics::{irregular_table, regular_table, HarmonicsError};
use crate::hierarchy::{BoxHierarchy, BoxId};
use crate::lattice::LatticeSpec;
use crate::multipole::coulomb_kernel;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis options: {0}")]
    BadOptions(String),
    #[error("zeroth-order synthesis requires order_p = 0, got {0}")]
    NotZeroth(u32),
    #[error("higher-order synthesis requires order_p >= 1; use the zeroth-order synthesizer")]
    NotHigher,
    #[error("register {register} would need {needed} bits (cap 63); increase eps_b or lower Q")]
    RegisterOverflow { register: String, needed: u32 },
    #[error("constant {value} for {register} is not representable")]
    BadConstant { register: String, value: f64 },
    #[error("spinful adapter requires a spinful lattice")]
    NotSpinful,
    #[error("options and lattice disagree on the spin mode")]
    SpinMismatch,
    #[error("adapter input was synthesized for {got_w}x{got_h}, target lattice is {want_w}x{want_h}")]
    LatticeMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
}

/// Knobs of one synthesis run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Expansion order; 0 selects the occupation-product scheme.
    pub order_p: u32,
    /// Binary precision of fixed-point fractions, in (0, 1].
    pub eps_b: f64,
    pub use_copy: bool,
    pub use_fanout: bool,
    pub spinful: bool,
    pub delta_t: f64,
    /// Product-formula order used by the simulator (1 or 2).
    pub trotter_order: u8,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            order_p: 0,
            eps_b: 1.0 / 256.0,
            use_copy: false,
            use_fanout: false,
            spinful: false,
            delta_t: 0.05,
            trotter_order: 2,
        }
    }
}

impl SynthesisOptions {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.eps_b > 0.0 && self.eps_b <= 1.0) {
            return Err(SynthError::BadOptions(format!(
                "eps_b must be in (0, 1], got {}",
                self.eps_b
            )));
        }
        if !(self.delta_t > 0.0) {
            return Err(SynthError::BadOptions(format!(
                "delta_t must be positive, got {}",
                self.delta_t
            )));
        }
        if self.trotter_order != 1 && self.trotter_order != 2 {
            return Err(SynthError::BadOptions(format!(
                "trotter_order must be 1 or 2, got {}",
                self.trotter_order
            )));
        }
        Ok(())
    }

    /// Fraction bits implied by `eps_b`.
    pub fn frac_bits(&self) -> u32 {
        (1.0 / self.eps_b).log2().ceil() as u32
    }
}

/// Phase coefficient of one evolved pair: `K_C(r_A, r_B) * delta_t`. The
/// 1/2 of the double-sum Coulomb operator is absorbed by enumerating each
/// unordered pair once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTime(pub f64);

/// Effective times of every evolved pair of the hierarchy.
#[derive(Debug, Clone)]
pub struct EffectiveTimes {
    pub box_pairs: BTreeMap<(BoxId, BoxId), EffectiveTime>,
    pub site_pairs: BTreeMap<(usize, usize), EffectiveTime>,
}

/// Effective times for all interaction-list box pairs (box centers) and for
/// the finest-level direct pairs (exact site distances).
pub fn effective_times(h: &BoxHierarchy, delta_t: f64) -> EffectiveTimes {
    assert!(delta_t > 0.0, "delta_t must be positive");
    let mut box_pairs = BTreeMap::new();
    for level in 2..=h.max_level() {
        for (a, b) in h.interaction_pairs(level) {
            let k = coulomb_kernel(h.box_at(a).center, h.box_at(b).center)
                .expect("interaction pairs are separated");
            box_pairs.insert((a, b), EffectiveTime(k * delta_t));
        }
    }
    let lattice = h.lattice();
    let mut site_pairs = BTreeMap::new();
    let mut insert_site = |a: usize, b: usize| {
        let k = coulomb_kernel(lattice.site_position(a), lattice.site_position(b))
            .expect("distinct sites");
        site_pairs.insert((a.min(b), a.max(b)), EffectiveTime(k * delta_t));
    };
    for (a, b) in h.finest_near_pairs() {
        insert_site(a, b);
    }
    for (ba, bb) in h.interaction_pairs(h.max_level()) {
        insert_site(h.sites_in_box(ba)[0], h.sites_in_box(bb)[0]);
    }
    EffectiveTimes {
        box_pairs,
        site_pairs,
    }
}

/// Stored real component of a complex moment coefficient: degree `l`,
/// non-negative order `m`, real or imaginary part. `m = 0` carries no
/// imaginary component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct CompIdx {
    pub l: u8,
    pub m: u8,
    pub im: bool,
}

pub(crate) fn components(p: u32) -> Vec<CompIdx> {
    let mut out = Vec::new();
    for l in 0..=p as u8 {
        for m in 0..=l {
            out.push(CompIdx { l, m, im: false });
            if m > 0 {
                out.push(CompIdx { l, m, im: true });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub(crate) struct DirectPair {
    pub site_a: usize,
    pub site_b: usize,
    pub t_eff: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct M2mTerm {
    pub child: usize,
    pub src: usize,
    pub dst: usize,
    pub raw: i64,
}

#[derive(Debug, Clone)]
pub(crate) struct SiteLoad {
    pub qubit: u32,
    pub dst: usize,
    pub raw: i64,
}

#[derive(Debug, Clone)]
pub(crate) struct EnergyTerm {
    pub a: usize,
    pub b: usize,
    pub raw: i64,
}

#[derive(Debug, Clone)]
pub(crate) enum MomentSource {
    Sites(Vec<SiteLoad>),
    Children(Vec<M2mTerm>),
}

#[derive(Debug, Clone)]
pub(crate) struct MomentBoxPlan {
    pub id: BoxId,
    pub source: MomentSource,
}

#[derive(Debug, Clone)]
pub(crate) struct MomentPairPlan {
    pub a: BoxId,
    pub b: BoxId,
    pub terms: Vec<EnergyTerm>,
    pub energy_int_bits: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct ZeroPairPlan {
    pub a: BoxId,
    pub b: BoxId,
    pub t_eff: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum LevelPlan {
    Zeroth {
        level: u8,
        boxes: Vec<BoxId>,
        pairs: Vec<ZeroPairPlan>,
    },
    Moments {
        level: u8,
        boxes: Vec<MomentBoxPlan>,
        pairs: Vec<MomentPairPlan>,
    },
}

impl LevelPlan {
    pub fn level(&self) -> u8 {
        match self {
            LevelPlan::Zeroth { level, .. } | LevelPlan::Moments { level, .. } => *level,
        }
    }
}

/// Everything needed both to emit the circuit and to evaluate its phases
/// classically.
#[derive(Debug, Clone)]
pub struct SynthPlan {
    pub lattice: LatticeSpec,
    pub opts: SynthesisOptions,
    pub(crate) onsite: Vec<usize>,
    pub(crate) direct: Vec<DirectPair>,
    /// Emission order: finest level first.
    pub(crate) levels: Vec<LevelPlan>,
    /// Bound on |quantized energy - analytic truncated-expansion energy|
    /// from constant rounding and row truncation (plus a small
    /// floating-point allowance).
    pub quantization_bound: f64,
}

impl SynthPlan {
    pub(crate) fn finest_level(&self) -> u8 {
        self.lattice.width().trailing_zeros() as u8
    }

    /// Unsigned integer bits of a box-occupation sum at `level`.
    pub(crate) fn sum_int_bits(&self, level: u8) -> u32 {
        let delta = (self.finest_level() - level) as u32;
        let cap = 4u64.pow(delta) * (1 + self.opts.spinful as u64);
        64 - cap.leading_zeros()
    }

    /// Electron bound of one box at `level`.
    pub(crate) fn box_bound(&self, level: u8) -> u64 {
        let delta = (self.finest_level() - level) as u32;
        (4u64.pow(delta) * (1 + self.opts.spinful as u64))
            .min(self.lattice.electron_bound() as u64)
    }

    /// Format of a moment component register at `level`.
    pub(crate) fn moment_format(&self, level: u8) -> FixedPointFormat {
        let q = self.box_bound(level);
        let int_bits = 64 - q.leading_zeros();
        FixedPointFormat::signed(int_bits, self.opts.frac_bits())
    }

    /// Per-level interaction-pair counts.
    pub fn pair_counts(&self) -> BTreeMap<u8, usize> {
        self.levels
            .iter()
            .map(|lv| {
                let n = match lv {
                    LevelPlan::Zeroth { pairs, .. } => pairs.len(),
                    LevelPlan::Moments { pairs, .. } => pairs.len(),
                };
                (lv.level(), n)
            })
            .collect()
    }

    /// Per-level merge-block (one per box) counts.
    pub fn merge_counts(&self) -> BTreeMap<u8, usize> {
        self.levels
            .iter()
            .map(|lv| {
                let n = match lv {
                    LevelPlan::Zeroth { boxes, .. } => boxes.len(),
                    LevelPlan::Moments { boxes, .. } => boxes.len(),
                };
                (lv.level(), n)
            })
            .collect()
    }
}

/// A synthesized circuit together with its plan.
#[derive(Debug, Clone)]
pub struct SynthResult {
    pub circuit: Circuit,
    pub plan: SynthPlan,
}

fn quantize(value: f64, frac_bits: u32, register: &str) -> Result<i64, SynthError> {
    let scaled = (value * (1u64 << frac_bits) as f64).round_ties_even();
    if !scaled.is_finite() || scaled.abs() >= 4.6e18 {
        return Err(SynthError::BadConstant {
            register: register.to_string(),
            value,
        });
    }
    Ok(scaled as i64)
}

fn check_width(width: u32, register: &str) -> Result<(), SynthError> {
    if width > 63 {
        return Err(SynthError::RegisterOverflow {
            register: register.to_string(),
            needed: width,
        });
    }
    Ok(())
}

/// System qubits carrying the occupation of a site (up spin first when
/// spinful).
fn site_qubits(lattice: &LatticeSpec, site: usize) -> Vec<u32> {
    let qps = lattice.qubits_per_site() as u32;
    (0..qps).map(|s| site as u32 * qps + s).collect()
}

/// `X_{l,m} = alpha * Re + i beta * Im` of the stored `|m|` component.
fn decompose_m(m: i32) -> (u8, f64, f64) {
    if m >= 0 {
        (m as u8, 1.0, 1.0)
    } else {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        ((-m) as u8, sign, -sign)
    }
}

/// Fold the complex pair-energy expansion into real weights over stored
/// components: `E = sum_t w_t X_a(t) X_b(t)`. Terms that would multiply the
/// (identically zero) imaginary part of an `m = 0` coefficient are dropped.
fn fold_energy_weights(
    p: u32,
    r_ab: [f64; 3],
    radius: f64,
) -> Result<Vec<(CompIdx, CompIdx, f64)>, SynthError> {
    let itab = irregular_table(p, r_ab)?;
    let mut weights: BTreeMap<(CompIdx, CompIdx), f64> = BTreeMap::new();
    let mut add = |a: CompIdx, b: CompIdx, w: f64| {
        if w != 0.0 {
            *weights.entry((a, b)).or_insert(0.0) += w;
        }
    };
    for l in 0..=p {
        let sign_l = if l % 2 == 0 { 1.0 } else { -1.0 };
        for m in -(l as i32)..=l as i32 {
            let (ma, alpha_a, beta_a) = decompose_m(m);
            for j in 0..=p - l {
                for k in -(j as i32)..=j as i32 {
                    let (big_l, big_m) = (l + j, m + k);
                    if big_m.unsigned_abs() > big_l {
                        continue;
                    }
                    let c: Complex64 =
                        sign_l * itab.get(big_l, big_m).conj() * radius.powi((l + j) as i32);
                    let (mb, alpha_b, beta_b) = decompose_m(k);
                    let a_re = CompIdx { l: l as u8, m: ma, im: false };
                    let b_re = CompIdx { l: j as u8, m: mb, im: false };
                    add(a_re, b_re, c.re * alpha_a * alpha_b);
                    if mb > 0 {
                        add(
                            a_re,
                            CompIdx { l: j as u8, m: mb, im: true },
                            -c.im * alpha_a * beta_b,
                        );
                    }
                    if ma > 0 {
                        add(
                            CompIdx { l: l as u8, m: ma, im: true },
                            b_re,
                            -c.im * beta_a * alpha_b,
                        );
                    }
                    if ma > 0 && mb > 0 {
                        add(
                            CompIdx { l: l as u8, m: ma, im: true },
                            CompIdx { l: j as u8, m: mb, im: true },
                            -c.re * beta_a * beta_b,
                        );
                    }
                }
            }
        }
    }
    Ok(weights
        .into_iter()
        .filter(|(_, w)| *w != 0.0)
        .map(|((a, b), w)| (a, b, w))
        .collect())
}

/// Fold one child-to-parent translation into real weights over stored
/// components: `M^P(dst) += sum w M^C(src)`. Contributions onto the
/// imaginary part of an `m = 0` target cancel identically and are dropped
/// (asserted).
fn fold_m2m_weights(
    p: u32,
    d: [f64; 3],
    r_child: f64,
    r_parent: f64,
) -> Vec<(CompIdx, CompIdx, f64)> {
    let rtab = regular_table(p, [-d[0], -d[1], -d[2]]);
    let mut weights: BTreeMap<(CompIdx, CompIdx), f64> = BTreeMap::new();
    let mut add = |src: CompIdx, dst: CompIdx, w: f64| {
        if w != 0.0 {
            *weights.entry((src, dst)).or_insert(0.0) += w;
        }
    };
    for l in 0..=p {
        for m in 0..=l as i32 {
            for j in 0..=l {
                for k in -(j as i32)..=j as i32 {
                    let (lj, mk) = (l - j, m - k);
                    if mk.unsigned_abs() > lj {
                        continue;
                    }
                    let t: Complex64 =
                        rtab.get(lj, mk) * r_child.powi(j as i32) / r_parent.powi(l as i32);
                    let (mc, alpha_c, beta_c) = decompose_m(k);
                    let src_re = CompIdx { l: j as u8, m: mc, im: false };
                    let dst_re = CompIdx { l: l as u8, m: m as u8, im: false };
                    let dst_im = CompIdx { l: l as u8, m: m as u8, im: true };
                    add(src_re, dst_re, t.re * alpha_c);
                    add(src_re, dst_im, t.im * alpha_c);
                    if mc > 0 {
                        let src_im = CompIdx { l: j as u8, m: mc, im: true };
                        add(src_im, dst_re, -t.im * beta_c);
                        add(src_im, dst_im, t.re * beta_c);
                    }
                }
            }
        }
    }
    weights
        .into_iter()
        .filter(|((_, dst), w)| {
            if dst.m == 0 && dst.im {
                assert!(
                    w.abs() < 1e-9,
                    "imaginary translation weight {w} survived onto a real-only component"
                );
                false
            } else {
                *w != 0.0
            }
        })
        .map(|((src, dst), w)| (src, dst, w))
        .collect()
}

fn direct_pairs(h: &BoxHierarchy, times: &EffectiveTimes) -> Vec<DirectPair> {
    let l_max = h.max_level();
    let mut out = Vec::new();
    for (ba, bb) in h.interaction_pairs(l_max) {
        let a = h.sites_in_box(ba)[0];
        let b = h.sites_in_box(bb)[0];
        out.push(DirectPair {
            site_a: a,
            site_b: b,
            t_eff: times.site_pairs[&(a.min(b), a.max(b))].0,
        });
    }
    for (a, b) in h.finest_near_pairs() {
        out.push(DirectPair {
            site_a: a,
            site_b: b,
            t_eff: times.site_pairs[&(a.min(b), a.max(b))].0,
        });
    }
    out
}

fn plan_zeroth(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<SynthPlan, SynthError> {
    let lattice = *h.lattice();
    let times = effective_times(h, opts.delta_t);
    let mut plan = SynthPlan {
        lattice,
        opts: *opts,
        onsite: if opts.spinful {
            (0..lattice.sites()).collect()
        } else {
            Vec::new()
        },
        direct: direct_pairs(h, &times),
        levels: Vec::new(),
        quantization_bound: 0.0,
    };
    let l_max = h.max_level();
    for level in (1..l_max).rev() {
        let boxes: Vec<BoxId> = h.boxes(level).iter().map(|b| b.id).collect();
        let pairs = if level >= 2 {
            h.interaction_pairs(level)
                .into_iter()
                .map(|(a, b)| ZeroPairPlan {
                    a,
                    b,
                    t_eff: times.box_pairs[&(a, b)].0,
                })
                .collect()
        } else {
            Vec::new()
        };
        check_width(2 * plan.sum_int_bits(level), &format!("sum product, level {level}"))?;
        plan.levels.push(LevelPlan::Zeroth { level, boxes, pairs });
    }
    // integer occupation arithmetic is exact; only shared floating-point
    // rounding separates quantized and analytic values
    plan.quantization_bound = 1e-9;
    Ok(plan)
}

fn plan_higher(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<SynthPlan, SynthError> {
    let lattice = *h.lattice();
    let p = opts.order_p;
    let f = opts.frac_bits();
    let times = effective_times(h, opts.delta_t);
    let comps = components(p);
    let comp_of: BTreeMap<CompIdx, usize> = comps
        .iter()
        .copied()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();

    let mut plan = SynthPlan {
        lattice,
        opts: *opts,
        onsite: if opts.spinful {
            (0..lattice.sites()).collect()
        } else {
            Vec::new()
        },
        direct: direct_pairs(h, &times),
        levels: Vec::new(),
        quantization_bound: 1e-9,
    };

    let l_max = h.max_level();
    let coarsest = h
        .active_levels()
        .into_iter()
        .filter(|&l| l < l_max)
        .min()
        .unwrap_or(l_max);
    if coarsest >= l_max {
        return Ok(plan); // everything is handled directly
    }

    let ulp_half = 0.5 / (1u64 << f) as f64;
    let mut delta_by_level: BTreeMap<u8, f64> = BTreeMap::new();

    for level in (coarsest..l_max).rev() {
        let fmt = plan.moment_format(level);
        check_width(fmt.width(), &format!("moment register, level {level}"))?;
        check_width(2 * fmt.width(), &format!("moment product, level {level}"))?;
        let radius = h.boxes(level)[0].radius;
        let mut boxes = Vec::new();

        if level == l_max - 1 {
            let mut delta: f64 = 0.0;
            for b in h.boxes(level) {
                let mut loads = Vec::new();
                let mut per_comp_err = vec![0.0f64; comps.len()];
                for site in h.sites_in_box(b.id) {
                    let pos = lattice.site_position(site);
                    let rel = [pos[0] - b.center[0], pos[1] - b.center[1], 0.0];
                    let rtab = regular_table(p, rel);
                    for (ci, comp) in comps.iter().enumerate() {
                        let v = rtab.get(comp.l as u32, comp.m as i32)
                            / radius.powi(comp.l as i32);
                        let w = if comp.im { v.im } else { v.re };
                        if w == 0.0 {
                            continue;
                        }
                        let raw = quantize(w, f, "site load")?;
                        if raw == 0 {
                            continue;
                        }
                        for q in site_qubits(&lattice, site) {
                            loads.push(SiteLoad { qubit: q, dst: ci, raw });
                            per_comp_err[ci] += ulp_half;
                        }
                    }
                }
                delta = delta.max(per_comp_err.iter().cloned().fold(0.0, f64::max));
                boxes.push(MomentBoxPlan {
                    id: b.id,
                    source: MomentSource::Sites(loads),
                });
            }
            delta_by_level.insert(level, delta);
        } else {
            let child_fmt = plan.moment_format(level + 1);
            let child_radius = h.boxes(level + 1)[0].radius;
            let delta_child = delta_by_level[&(level + 1)];
            let q_child = plan.box_bound(level + 1) as f64;
            let mut delta: f64 = 0.0;
            for b in h.boxes(level) {
                let mut terms = Vec::new();
                let mut per_comp_err = vec![0.0f64; comps.len()];
                for (slot, child) in b.id.children().iter().enumerate() {
                    let cb = h.box_at(*child);
                    let d = [b.center[0] - cb.center[0], b.center[1] - cb.center[1], 0.0];
                    for (src, dst, w) in fold_m2m_weights(p, d, child_radius, radius) {
                        let raw = quantize(w, f, "translation weight")?;
                        if raw == 0 {
                            continue;
                        }
                        let (si, di) = (comp_of[&src], comp_of[&dst]);
                        terms.push(M2mTerm { child: slot, src: si, dst: di, raw });
                        per_comp_err[di] += w.abs() * delta_child
                            + ulp_half * q_child
                            + child_fmt.width() as f64 * 2.0 * ulp_half;
                    }
                }
                delta = delta.max(per_comp_err.iter().cloned().fold(0.0, f64::max));
                boxes.push(MomentBoxPlan {
                    id: b.id,
                    source: MomentSource::Children(terms),
                });
            }
            delta_by_level.insert(level, delta);
        }

        let q_box = plan.box_bound(level) as f64;
        let delta_l = delta_by_level[&level];
        let mut pairs = Vec::new();
        for (a, b) in h.interaction_pairs(level) {
            let ca = h.box_at(a).center;
            let cb = h.box_at(b).center;
            let r_ab = [ca[0] - cb[0], ca[1] - cb[1], 0.0];
            let mut terms = Vec::new();
            let mut magnitude = 0.0f64;
            let mut err = 0.0f64;
            for (cia, cib, w) in fold_energy_weights(p, r_ab, radius)? {
                let raw = quantize(w, f, "energy weight")?;
                if raw == 0 {
                    continue;
                }
                terms.push(EnergyTerm {
                    a: comp_of[&cia],
                    b: comp_of[&cib],
                    raw,
                });
                magnitude += w.abs() * q_box * q_box;
                err += w.abs() * (2.0 * q_box * delta_l + delta_l * delta_l)
                    + ulp_half * q_box * q_box
                    + (2 * fmt.width()) as f64 * 2.0 * ulp_half;
            }
            let energy_int_bits = ((magnitude + 1.0).log2().ceil()).max(1.0) as u32;
            check_width(
                energy_int_bits + f + 1,
                &format!("energy register, level {level}"),
            )?;
            plan.quantization_bound += err;
            pairs.push(MomentPairPlan {
                a,
                b,
                terms,
                energy_int_bits,
            });
        }
        plan.levels.push(LevelPlan::Moments { level, boxes, pairs });
    }
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Circuit emission

struct Emitter<'p> {
    plan: &'p SynthPlan,
    c: Circuit,
    sums: BTreeMap<BoxId, RegId>,
    moments: BTreeMap<BoxId, Vec<RegId>>,
    merge_ranges: Vec<(u8, std::ops::Range<usize>)>,
}

impl<'p> Emitter<'p> {
    fn new(plan: &'p SynthPlan) -> Self {
        let mut c = Circuit::new();
        c.add_register(
            "system",
            RegisterRole::System,
            FixedPointFormat::unsigned(plan.lattice.system_qubits() as u32, 0),
            None,
        );
        Self {
            plan,
            c,
            sums: BTreeMap::new(),
            moments: BTreeMap::new(),
            merge_ranges: Vec::new(),
        }
    }

    fn push(&mut self, g: Gate) {
        self.c.push(g).expect("synthesizer emits valid gates");
    }

    fn push_all(&mut self, gs: Vec<Gate>) {
        for g in gs {
            self.push(g);
        }
    }

    fn qubits(&self, id: RegId) -> Vec<u32> {
        self.c.register(id).qubits.clone()
    }

    fn emit_onsite(&mut self) {
        if self.plan.onsite.is_empty() {
            return;
        }
        let angle = -self.plan.lattice.onsite_v0 * self.plan.opts.delta_t;
        let start = self.c.len();
        for site in self.plan.onsite.clone() {
            let q = site_qubits(&self.plan.lattice, site);
            self.push(Gate::CPhase { a: q[0], b: q[1], angle });
        }
        self.c.push_segment(SegmentKind::Onsite, start, self.c.len());
    }

    fn emit_direct(&mut self) {
        if self.plan.direct.is_empty() {
            return;
        }
        let l_max = self.plan.finest_level();
        let lattice = self.plan.lattice;
        let pairs = self.plan.direct.clone();
        if !self.plan.opts.use_copy {
            let start = self.c.len();
            for pair in &pairs {
                let qa = site_qubits(&lattice, pair.site_a);
                let qb = site_qubits(&lattice, pair.site_b);
                for &a in &qa {
                    for &b in &qb {
                        self.push(Gate::CPhase { a, b, angle: -pair.t_eff });
                    }
                }
            }
            self.c
                .push_segment(SegmentKind::Direct { level: l_max }, start, self.c.len());
            return;
        }

        // copies of each participating site qubit group, one per pair side,
        // so every direct phase acts on disjoint qubits
        let qps = lattice.qubits_per_site() as u32;
        let fmt = FixedPointFormat::unsigned(qps, 0);
        let site_box = |site: usize| {
            let (x, y) = lattice.site_coords(site);
            BoxId { level: l_max, ix: x as u16, iy: y as u16 }
        };
        let mut copies: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            let ca = self.c.add_register(
                format!("directp{i}.copyA"),
                RegisterRole::Copy,
                fmt,
                Some(site_box(p.site_a)),
            );
            let cb = self.c.add_register(
                format!("directp{i}.copyB"),
                RegisterRole::Copy,
                fmt,
                Some(site_box(p.site_b)),
            );
            copies.push((self.qubits(ca), self.qubits(cb)));
        }
        let start = self.c.len();
        let mut by_site: BTreeMap<usize, Vec<&[u32]>> = BTreeMap::new();
        for (i, p) in pairs.iter().enumerate() {
            by_site.entry(p.site_a).or_default().push(&copies[i].0);
            by_site.entry(p.site_b).or_default().push(&copies[i].1);
        }
        let mut copy_gate_list = Vec::new();
        for (site, dests) in &by_site {
            let src = site_qubits(&lattice, *site);
            copy_gate_list.extend(copy_gates(&src, dests, self.plan.opts.use_fanout));
        }
        self.push_all(copy_gate_list.clone());
        self.c
            .push_segment(SegmentKind::Copy { level: l_max }, start, self.c.len());

        let start = self.c.len();
        for (i, pair) in pairs.iter().enumerate() {
            let (ca, cb) = &copies[i];
            for &a in ca {
                for &b in cb {
                    self.push(Gate::CPhase { a, b, angle: -pair.t_eff });
                }
            }
        }
        self.c
            .push_segment(SegmentKind::Direct { level: l_max }, start, self.c.len());

        let start = self.c.len();
        let uncopy: Vec<Gate> = copy_gate_list.iter().rev().map(Gate::inverse).collect();
        self.push_all(uncopy);
        self.c
            .push_segment(SegmentKind::Uncopy { level: l_max }, start, self.c.len());
    }

    /// Occupation sum of one box from its children via a pairwise tree of
    /// out-of-place adders (one merge block per box).
    fn emit_zero_merge(&mut self, level: u8, id: BoxId) {
        let l_max = self.plan.finest_level();
        let label = |suffix: &str| format!("L{}b{}_{}{}", level, id.ix, id.iy, suffix);
        let children: Vec<Vec<u32>> = if level == l_max - 1 {
            let side = self.plan.lattice.width() / (1u32 << level);
            let (x0, y0) = (id.ix as u32 * side, id.iy as u32 * side);
            let mut groups = Vec::new();
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    let site = self.plan.lattice.site_index(x, y);
                    for q in site_qubits(&self.plan.lattice, site) {
                        groups.push(vec![q]);
                    }
                }
            }
            groups
        } else {
            id.children()
                .iter()
                .map(|c| self.qubits(self.sums[c]))
                .collect()
        };
        let mut layer = children;
        let mut stage = 0;
        while layer.len() > 1 {
            let mut next = Vec::new();
            for (i, pair) in layer.chunks(2).enumerate() {
                if pair.len() == 1 {
                    next.push(pair[0].clone());
                    continue;
                }
                let w = pair[0].len().max(pair[1].len()) as u32 + 1;
                let is_final = layer.len() == 2;
                let reg = self.c.add_register(
                    if is_final {
                        label("")
                    } else {
                        label(&format!(".s{stage}_{i}"))
                    },
                    RegisterRole::BoxSum,
                    FixedPointFormat::unsigned(w, 0),
                    Some(id),
                );
                let out = self.qubits(reg);
                let gates = out_of_place_add_gates(
                    Operand { qubits: &pair[0], signed: false },
                    Operand { qubits: &pair[1], signed: false },
                    &out,
                );
                self.push_all(gates);
                if is_final {
                    self.sums.insert(id, reg);
                }
                next.push(out);
            }
            layer = next;
            stage += 1;
        }
    }

    /// Multiplier, phase ladder, inverse multiplier on two occupation
    /// registers (or their copies).
    fn emit_zero_evo(&mut self, qa: &[u32], qb: &[u32], t_eff: f64, tag: &str, anchor: Option<BoxId>) {
        let w = (qa.len() + qb.len()) as u32;
        let prod_fmt = FixedPointFormat::unsigned(w, 0);
        let prod = self
            .c
            .add_register(format!("{tag}.prod"), RegisterRole::Product, prod_fmt, anchor);
        let row = self.c.add_register(
            format!("{tag}.row"),
            RegisterRole::Product,
            FixedPointFormat::unsigned(w, 0),
            anchor,
        );
        let carry = self.c.add_register(
            format!("{tag}.carry"),
            RegisterRole::Product,
            FixedPointFormat::unsigned((w - 1).max(1), 0),
            anchor,
        );
        let prod_q = self.qubits(prod);
        let row_q = self.qubits(row);
        let carry_q = self.qubits(carry);
        let mult = mult_acc_gates(
            Operand { qubits: qa, signed: false },
            Operand { qubits: qb, signed: false },
            &prod_q,
            &row_q,
            &carry_q,
            false,
        );
        let inverse: Vec<Gate> = mult.iter().rev().map(Gate::inverse).collect();
        self.push_all(mult);
        self.push_all(phase_ladder_gates(&prod_q, prod_fmt, t_eff));
        self.push_all(inverse);
    }

    fn alloc_moments(&mut self, level: u8, id: BoxId) -> Vec<RegId> {
        let comps = components(self.plan.opts.order_p);
        let fmt = self.plan.moment_format(level);
        let regs: Vec<RegId> = comps
            .iter()
            .map(|cc| {
                let role = if cc.im {
                    RegisterRole::MomentImag
                } else {
                    RegisterRole::MomentReal
                };
                self.c.add_register(
                    format!(
                        "L{}b{}_{}.m{}_{}{}",
                        level,
                        id.ix,
                        id.iy,
                        cc.l,
                        cc.m,
                        if cc.im { "i" } else { "r" }
                    ),
                    role,
                    fmt,
                    Some(id),
                )
            })
            .collect();
        self.moments.insert(id, regs.clone());
        regs
    }

    fn alloc_scratch(
        &mut self,
        width: u32,
        anchor: Option<BoxId>,
        tag: &str,
    ) -> (Vec<u32>, Vec<u32>) {
        let row = self.c.add_register(
            format!("{tag}.row"),
            RegisterRole::Product,
            FixedPointFormat::unsigned(width, 0),
            anchor,
        );
        let carry = self.c.add_register(
            format!("{tag}.carry"),
            RegisterRole::Product,
            FixedPointFormat::unsigned((width - 1).max(1), 0),
            anchor,
        );
        (self.qubits(row), self.qubits(carry))
    }

    fn emit_moment_merge(&mut self, level: u8, mb: &MomentBoxPlan) {
        let fmt = self.plan.moment_format(level);
        let regs = self.alloc_moments(level, mb.id);
        let tag = format!("L{}b{}_{}", level, mb.id.ix, mb.id.iy);
        match &mb.source {
            MomentSource::Sites(loads) => {
                let (row, carry) = self.alloc_scratch(fmt.width(), Some(mb.id), &tag);
                let mut virgin = vec![true; regs.len()];
                for load in loads {
                    let acc = self.qubits(regs[load.dst]);
                    if virgin[load.dst] {
                        let pattern = (load.raw as u64) & width_mask(fmt.width());
                        self.push_all(const_load_gates(load.qubit, pattern, &acc));
                        virgin[load.dst] = false;
                    } else {
                        let gates = const_mac_gates(
                            Operand { qubits: &[load.qubit], signed: false },
                            load.raw,
                            0,
                            &acc,
                            &row,
                            &carry,
                        );
                        self.push_all(gates);
                    }
                }
            }
            MomentSource::Children(terms) => {
                let child_fmt = self.plan.moment_format(level + 1);
                let (row, carry) = self.alloc_scratch(fmt.width(), Some(mb.id), &tag);
                let f = self.plan.opts.frac_bits() as i32;
                let children = mb.id.children();
                for t in terms {
                    let src = self.qubits(self.moments[&children[t.child]][t.src]);
                    let acc = self.qubits(regs[t.dst]);
                    let gates = const_mac_gates(
                        Operand { qubits: &src, signed: child_fmt.signed },
                        t.raw,
                        -f,
                        &acc,
                        &row,
                        &carry,
                    );
                    self.push_all(gates);
                }
            }
        }
    }

    /// Accumulate the folded bilinear form into a fresh energy register,
    /// apply the phase ladder, then uncompute everything.
    fn emit_moment_evo(
        &mut self,
        level: u8,
        pair: &MomentPairPlan,
        regs_a: &[Vec<u32>],
        regs_b: &[Vec<u32>],
        tag: &str,
    ) {
        let fmt = self.plan.moment_format(level);
        let f = self.plan.opts.frac_bits();
        let prod_fmt = FixedPointFormat::signed(2 * fmt.integer_bits + 1, 2 * f);
        let e_fmt = FixedPointFormat::signed(pair.energy_int_bits, f);
        let e_reg =
            self.c
                .add_register(format!("{tag}.energy"), RegisterRole::Product, e_fmt, Some(pair.a));
        let t_reg =
            self.c
                .add_register(format!("{tag}.prod"), RegisterRole::Product, prod_fmt, Some(pair.a));
        let scratch_w = prod_fmt.width().max(e_fmt.width());
        let (row, carry) = self.alloc_scratch(scratch_w, Some(pair.a), tag);
        let e_q = self.qubits(e_reg);
        let t_q = self.qubits(t_reg);

        let mut compute: Vec<Gate> = Vec::new();
        for term in &pair.terms {
            let mult = mult_acc_gates(
                Operand { qubits: &regs_a[term.a], signed: fmt.signed },
                Operand { qubits: &regs_b[term.b], signed: fmt.signed },
                &t_q,
                &row,
                &carry,
                false,
            );
            let unmult: Vec<Gate> = mult.iter().rev().map(Gate::inverse).collect();
            compute.extend(mult);
            compute.extend(const_mac_gates(
                Operand { qubits: &t_q, signed: true },
                term.raw,
                e_fmt.fraction_bits as i32 - prod_fmt.fraction_bits as i32 - f as i32,
                &e_q,
                &row,
                &carry,
            ));
            compute.extend(unmult);
        }
        let uncompute: Vec<Gate> = compute.iter().rev().map(Gate::inverse).collect();
        self.push_all(compute);
        self.push_all(phase_ladder_gates(&e_q, e_fmt, self.plan.opts.delta_t));
        self.push_all(uncompute);
    }

    fn emit_pair_stage_zeroth(&mut self, level: u8, pairs: &[ZeroPairPlan]) {
        let use_copy = self.plan.opts.use_copy;
        let fanout = self.plan.opts.use_fanout;
        if !use_copy {
            let start = self.c.len();
            for (i, p) in pairs.iter().enumerate() {
                let qa = self.qubits(self.sums[&p.a]);
                let qb = self.qubits(self.sums[&p.b]);
                self.emit_zero_evo(&qa, &qb, p.t_eff, &format!("evoL{level}p{i}"), Some(p.a));
            }
            self.c.push_segment(SegmentKind::Evo { level }, start, self.c.len());
            return;
        }
        let mut copies: Vec<(Vec<u32>, Vec<u32>)> = Vec::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            let mk = |e: &mut Self, id: BoxId, side: &str| {
                let fmt = e.c.register(e.sums[&id]).format;
                let reg = e.c.add_register(
                    format!("evoL{level}p{i}.copy{side}"),
                    RegisterRole::Copy,
                    fmt,
                    Some(id),
                );
                e.qubits(reg)
            };
            let ca = mk(self, p.a, "A");
            let cb = mk(self, p.b, "B");
            copies.push((ca, cb));
        }
        let start = self.c.len();
        let mut by_box: BTreeMap<BoxId, Vec<&[u32]>> = BTreeMap::new();
        for (i, p) in pairs.iter().enumerate() {
            by_box.entry(p.a).or_default().push(&copies[i].0);
            by_box.entry(p.b).or_default().push(&copies[i].1);
        }
        let mut copy_gate_list = Vec::new();
        for (id, dests) in &by_box {
            let src = self.qubits(self.sums[id]);
            copy_gate_list.extend(copy_gates(&src, dests, fanout));
        }
        self.push_all(copy_gate_list.clone());
        self.c.push_segment(SegmentKind::Copy { level }, start, self.c.len());

        let start = self.c.len();
        for (i, p) in pairs.iter().enumerate() {
            let (ca, cb) = copies[i].clone();
            self.emit_zero_evo(&ca, &cb, p.t_eff, &format!("evoL{level}p{i}"), Some(p.a));
        }
        self.c.push_segment(SegmentKind::Evo { level }, start, self.c.len());

        let start = self.c.len();
        let uncopy: Vec<Gate> = copy_gate_list.iter().rev().map(Gate::inverse).collect();
        self.push_all(uncopy);
        self.c.push_segment(SegmentKind::Uncopy { level }, start, self.c.len());
    }

    fn emit_pair_stage_moments(&mut self, level: u8, pairs: &[MomentPairPlan]) {
        let use_copy = self.plan.opts.use_copy;
        let fanout = self.plan.opts.use_fanout;
        let moment_q = |e: &Self, id: BoxId| -> Vec<Vec<u32>> {
            e.moments[&id].iter().map(|&r| e.qubits(r)).collect()
        };
        if !use_copy {
            let start = self.c.len();
            for (i, p) in pairs.iter().enumerate() {
                let regs_a = moment_q(self, p.a);
                let regs_b = moment_q(self, p.b);
                self.emit_moment_evo(level, p, &regs_a, &regs_b, &format!("evoL{level}p{i}"));
            }
            self.c.push_segment(SegmentKind::Evo { level }, start, self.c.len());
            return;
        }
        let fmt = self.plan.moment_format(level);
        let n_comp = components(self.plan.opts.order_p).len();
        let mut copies: Vec<(Vec<Vec<u32>>, Vec<Vec<u32>>)> = Vec::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            let mk = |e: &mut Self, id: BoxId, side: &str| -> Vec<Vec<u32>> {
                (0..n_comp)
                    .map(|ci| {
                        let reg = e.c.add_register(
                            format!("evoL{level}p{i}.copy{side}c{ci}"),
                            RegisterRole::Copy,
                            fmt,
                            Some(id),
                        );
                        e.qubits(reg)
                    })
                    .collect()
            };
            let ca = mk(self, p.a, "A");
            let cb = mk(self, p.b, "B");
            copies.push((ca, cb));
        }
        let start = self.c.len();
        let mut by_src: BTreeMap<(BoxId, usize), Vec<&[u32]>> = BTreeMap::new();
        for (i, p) in pairs.iter().enumerate() {
            for ci in 0..n_comp {
                by_src.entry((p.a, ci)).or_default().push(&copies[i].0[ci]);
                by_src.entry((p.b, ci)).or_default().push(&copies[i].1[ci]);
            }
        }
        let mut copy_gate_list = Vec::new();
        for ((id, ci), dests) in &by_src {
            let src = self.qubits(self.moments[id][*ci]);
            copy_gate_list.extend(copy_gates(&src, dests, fanout));
        }
        self.push_all(copy_gate_list.clone());
        self.c.push_segment(SegmentKind::Copy { level }, start, self.c.len());

        let start = self.c.len();
        for (i, p) in pairs.iter().enumerate() {
            let (ca, cb) = copies[i].clone();
            self.emit_moment_evo(level, p, &ca, &cb, &format!("evoL{level}p{i}"));
        }
        self.c.push_segment(SegmentKind::Evo { level }, start, self.c.len());

        let start = self.c.len();
        let uncopy: Vec<Gate> = copy_gate_list.iter().rev().map(Gate::inverse).collect();
        self.push_all(uncopy);
        self.c.push_segment(SegmentKind::Uncopy { level }, start, self.c.len());
    }

    fn emit(mut self) -> SynthResult {
        self.emit_onsite();
        self.emit_direct();

        for lv in &self.plan.levels.clone() {
            match lv {
                LevelPlan::Zeroth { level, boxes, pairs } => {
                    let start = self.c.len();
                    for id in boxes {
                        self.emit_zero_merge(*level, *id);
                    }
                    let end = self.c.len();
                    self.c.push_segment(SegmentKind::Merge { level: *level }, start, end);
                    self.merge_ranges.push((*level, start..end));
                    if !pairs.is_empty() {
                        self.emit_pair_stage_zeroth(*level, pairs);
                    }
                }
                LevelPlan::Moments { level, boxes, pairs } => {
                    let start = self.c.len();
                    for mb in boxes {
                        self.emit_moment_merge(*level, mb);
                    }
                    let end = self.c.len();
                    self.c.push_segment(SegmentKind::Merge { level: *level }, start, end);
                    self.merge_ranges.push((*level, start..end));
                    if !pairs.is_empty() {
                        self.emit_pair_stage_moments(*level, pairs);
                    }
                }
            }
        }

        // uncompute: inverse merges, coarsest first
        let ranges: Vec<(u8, std::ops::Range<usize>)> =
            self.merge_ranges.iter().rev().cloned().collect();
        for (level, range) in ranges {
            let start = self.c.len();
            let inverse: Vec<Gate> = self.c.gates()[range]
                .iter()
                .rev()
                .map(Gate::inverse)
                .collect();
            self.push_all(inverse);
            self.c
                .push_segment(SegmentKind::Uncompute { level }, start, self.c.len());
        }

        SynthResult {
            circuit: self.c,
            plan: self.plan.clone(),
        }
    }
}

fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Synthesize the Trotter-step Coulomb circuit at order 0.
pub fn synth_zeroth(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<SynthResult, SynthError> {
    opts.validate()?;
    if opts.order_p != 0 {
        return Err(SynthError::NotZeroth(opts.order_p));
    }
    if opts.spinful != h.lattice().spinful() {
        return Err(SynthError::SpinMismatch);
    }
    let plan = plan_zeroth(h, opts)?;
    Ok(Emitter::new(&plan).emit())
}

/// Synthesize the Trotter-step Coulomb circuit at order `p >= 1`.
pub fn synth_higher(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<SynthResult, SynthError> {
    opts.validate()?;
    if opts.order_p == 0 {
        return Err(SynthError::NotHigher);
    }
    if opts.spinful != h.lattice().spinful() {
        return Err(SynthError::SpinMismatch);
    }
    let plan = plan_higher(h, opts)?;
    Ok(Emitter::new(&plan).emit())
}

/// Dispatch on the expansion order.
pub fn synthesize(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<SynthResult, SynthError> {
    if opts.order_p == 0 {
        synth_zeroth(h, opts)
    } else {
        synth_higher(h, opts)
    }
}

/// Build the plan without emitting any gates (structural cost estimation).
pub(crate) fn plan_only(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<SynthPlan, SynthError> {
    opts.validate()?;
    if opts.spinful != h.lattice().spinful() {
        return Err(SynthError::SpinMismatch);
    }
    if opts.order_p == 0 {
        plan_zeroth(h, opts)
    } else {
        plan_higher(h, opts)
    }
}

impl SynthPlan {
    pub(crate) fn levels_for_outline(&self) -> &[LevelPlan] {
        &self.levels
    }

    /// Direct pair sites, for routing-class accounting.
    pub(crate) fn direct_pairs_view(&self) -> Vec<(usize, usize)> {
        self.direct.iter().map(|p| (p.site_a, p.site_b)).collect()
    }
}

/// Standalone pair-evolution gate: multiplier, phase ladder, inverse
/// multiplier. Product ancillae end at zero; the net phase per basis state
/// is `exp(-i t_eff N_A N_B)`.
pub fn synth_evo_gate(
    reg_a: &crate::circuit::Register,
    reg_b: &crate::circuit::Register,
    t_eff: EffectiveTime,
) -> Result<Circuit, SynthError> {
    let mut c = Circuit::new();
    c.adopt_register(reg_a.clone());
    c.adopt_register(reg_b.clone());
    let w = reg_a.width() + reg_b.width();
    let prod_fmt = FixedPointFormat::unsigned(w, 0);
    let prod = c.add_register("evo.prod", RegisterRole::Product, prod_fmt, None);
    let row = c.add_register(
        "evo.row",
        RegisterRole::Product,
        FixedPointFormat::unsigned(w, 0),
        None,
    );
    let carry = c.add_register(
        "evo.carry",
        RegisterRole::Product,
        FixedPointFormat::unsigned((w - 1).max(1), 0),
        None,
    );
    let prod_q = c.register(prod).qubits.clone();
    let row_q = c.register(row).qubits.clone();
    let carry_q = c.register(carry).qubits.clone();
    let mult = mult_acc_gates(
        Operand { qubits: &reg_a.qubits, signed: false },
        Operand { qubits: &reg_b.qubits, signed: false },
        &prod_q,
        &row_q,
        &carry_q,
        false,
    );
    let inverse: Vec<Gate> = mult.iter().rev().map(Gate::inverse).collect();
    for g in mult {
        c.push(g)?;
    }
    for g in phase_ladder_gates(&prod_q, prod_fmt, t_eff.0) {
        c.push(g)?;
    }
    for g in inverse {
        c.push(g)?;
    }
    Ok(c)
}

/// Rebuild a spinless-synthesized circuit for the spinful encoding of the
/// same lattice geometry: two qubits per site feed the finest-level loads
/// and sums (one extra bit per box register), and the on-site interaction
/// is emitted as one CPHASE per site.
pub fn synth_spinful_adapter(
    spinless: &SynthResult,
    lattice: &LatticeSpec,
) -> Result<SynthResult, SynthError> {
    if !lattice.spinful() {
        return Err(SynthError::NotSpinful);
    }
    let src = &spinless.plan.lattice;
    if src.width() != lattice.width() || src.height() != lattice.height() {
        return Err(SynthError::LatticeMismatch {
            got_w: src.width(),
            got_h: src.height(),
            want_w: lattice.width(),
            want_h: lattice.height(),
        });
    }
    let mut opts = spinless.plan.opts;
    opts.spinful = true;
    let h = BoxHierarchy::build(lattice);
    synthesize(&h, &opts)
}

// ---------------------------------------------------------------------------
// Block extraction for structural cost estimation

/// One representative emitted block with its gate count profile.
#[derive(Debug, Clone)]
pub(crate) struct BlockProfile {
    pub gates: BTreeMap<&'static str, u64>,
    /// Qubit-disjointness ASAP depth of the block in isolation.
    pub depth: u64,
    /// Widths of multiplication-like operations (quantum-quantum products
    /// and constant multiply-accumulates) inside the block.
    pub mult_widths: Vec<u32>,
    /// Widths of standalone adders inside the block.
    pub add_widths: Vec<u32>,
    pub qubits: u64,
}

fn profile_circuit(c: &Circuit, from: usize) -> (BTreeMap<&'static str, u64>, u64) {
    let mut counts = BTreeMap::new();
    let mut free: BTreeMap<u32, u64> = BTreeMap::new();
    let mut depth = 0;
    for g in &c.gates()[from..] {
        *counts.entry(g.kind_name()).or_insert(0) += 1;
        let mut layer = 0;
        for q in g.qubits() {
            layer = layer.max(*free.get(&q).unwrap_or(&0));
        }
        for q in g.qubits() {
            free.insert(q, layer + 1);
        }
        depth = depth.max(layer + 1);
    }
    (counts, depth)
}

/// Representative merge and evolution blocks of one planned level, emitted
/// through the same code paths as the full circuit. Evolution blocks are
/// grouped by pair displacement class (identical displacement means
/// identical constants, so identical gates); merges are identical across
/// boxes of a level.
#[derive(Debug, Clone)]
pub(crate) struct LevelBlocks {
    pub level: u8,
    pub boxes: u64,
    pub merge: BlockProfile,
    /// (multiplicity, center distance in lattice units, profile)
    pub evo_classes: Vec<(u64, f64, BlockProfile)>,
    pub pairs: u64,
    pub max_pairs_per_box: u64,
    /// Qubits of one box's persistent registers (sums or moments,
    /// including merge intermediates).
    pub box_reg_qubits: u64,
    /// Copy qubits required per pair when COPY is enabled.
    pub copy_qubits_per_pair: u64,
}

pub(crate) fn level_blocks(plan: &SynthPlan, lv: &LevelPlan) -> LevelBlocks {
    let mut em = Emitter::new(plan);
    match lv {
        LevelPlan::Zeroth { level, boxes, pairs } => {
            let id = boxes[0];
            // seed child registers when the children are box sums
            if *level < plan.finest_level() - 1 {
                for ch in id.children() {
                    let w = plan.sum_int_bits(*level + 1);
                    let reg = em.c.add_register(
                        "seed",
                        RegisterRole::BoxSum,
                        FixedPointFormat::unsigned(w, 0),
                        Some(ch),
                    );
                    em.sums.insert(ch, reg);
                }
            }
            let before_q = em.c.n_qubits();
            let start = em.c.len();
            em.emit_zero_merge(*level, id);
            let (gates, depth) = profile_circuit(&em.c, start);
            let box_reg_qubits = (em.c.n_qubits() - before_q) as u64;
            let children = if *level == plan.finest_level() - 1 {
                4 * (1 + plan.opts.spinful as u32)
            } else {
                4
            };
            let stages = (children as f64).log2().ceil() as u32;
            let w = plan.sum_int_bits(*level);
            let merge = BlockProfile {
                gates,
                depth,
                mult_widths: vec![],
                add_widths: (0..stages).map(|s| w.saturating_sub(stages - 1 - s)).collect(),
                qubits: box_reg_qubits,
            };

            let mut evo_classes = Vec::new();
            if !pairs.is_empty() {
                let p = &pairs[0];
                let w = plan.sum_int_bits(*level);
                let ra = em.c.add_register(
                    "seedA",
                    RegisterRole::BoxSum,
                    FixedPointFormat::unsigned(w, 0),
                    Some(p.a),
                );
                let rb = em.c.add_register(
                    "seedB",
                    RegisterRole::BoxSum,
                    FixedPointFormat::unsigned(w, 0),
                    Some(p.b),
                );
                let qa = em.qubits(ra);
                let qb = em.qubits(rb);
                let before = em.c.n_qubits();
                let start = em.c.len();
                em.emit_zero_evo(&qa, &qb, p.t_eff, "block", Some(p.a));
                let (gates, depth) = profile_circuit(&em.c, start);
                let wsum = plan.sum_int_bits(*level);
                let profile = BlockProfile {
                    gates,
                    depth,
                    mult_widths: vec![wsum, wsum],
                    add_widths: vec![],
                    qubits: (em.c.n_qubits() - before) as u64,
                };
                // all zeroth pairs of a level share gate structure; distance
                // varies per class
                let mut by_dist: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
                for pp in pairs {
                    let d = box_distance(plan, pp.a, pp.b);
                    let key = (d * 1e6).round() as u64;
                    let e = by_dist.entry(key).or_insert((0, d));
                    e.0 += 1;
                }
                for (_, (count, d)) in by_dist {
                    evo_classes.push((count, d, profile.clone()));
                }
            }
            let copy_q = 2 * plan.sum_int_bits(*level) as u64;
            LevelBlocks {
                level: *level,
                boxes: boxes.len() as u64,
                merge,
                evo_classes,
                pairs: pairs.len() as u64,
                max_pairs_per_box: max_pairs_per_box_zero(pairs),
                box_reg_qubits,
                copy_qubits_per_pair: copy_q,
            }
        }
        LevelPlan::Moments { level, boxes, pairs } => {
            let mb = &boxes[0];
            if matches!(mb.source, MomentSource::Children(_)) {
                for ch in mb.id.children() {
                    em.alloc_moments(*level + 1, ch);
                }
            }
            let before_q = em.c.n_qubits();
            let start = em.c.len();
            em.emit_moment_merge(*level, mb);
            let (gates, depth) = profile_circuit(&em.c, start);
            let box_reg_qubits = (em.c.n_qubits() - before_q) as u64;
            let w = plan.moment_format(*level).width();
            let (mult_widths, add_widths): (Vec<u32>, Vec<u32>) = match &mb.source {
                MomentSource::Sites(loads) => (vec![], vec![w; loads.len()]),
                MomentSource::Children(terms) => (vec![w; terms.len()], vec![]),
            };
            let merge = BlockProfile {
                gates,
                depth,
                mult_widths,
                add_widths,
                qubits: box_reg_qubits,
            };

            // evolution blocks per displacement class
            let mut by_class: BTreeMap<(i32, i32), (u64, f64, usize)> = BTreeMap::new();
            for (i, pp) in pairs.iter().enumerate() {
                let dx = pp.b.ix as i32 - pp.a.ix as i32;
                let dy = pp.b.iy as i32 - pp.a.iy as i32;
                let e = by_class
                    .entry((dx, dy))
                    .or_insert((0, box_distance(plan, pp.a, pp.b), i));
                e.0 += 1;
            }
            let mut evo_classes = Vec::new();
            for (_, (count, dist, idx)) in by_class {
                let p = &pairs[idx];
                let regs_a: Vec<Vec<u32>> = em
                    .alloc_moments(*level, p.a)
                    .iter()
                    .map(|&r| em.qubits(r))
                    .collect();
                let regs_b: Vec<Vec<u32>> = em
                    .alloc_moments(*level, p.b)
                    .iter()
                    .map(|&r| em.qubits(r))
                    .collect();
                let before = em.c.n_qubits();
                let start = em.c.len();
                em.emit_moment_evo(*level, p, &regs_a, &regs_b, "block");
                let (gates, depth) = profile_circuit(&em.c, start);
                let profile = BlockProfile {
                    gates,
                    depth,
                    // per term: product, constant MAC, inverse product;
                    // the whole form is computed and uncomputed
                    mult_widths: vec![w; p.terms.len() * 6],
                    add_widths: vec![],
                    qubits: (em.c.n_qubits() - before) as u64,
                };
                evo_classes.push((count, dist, profile));
            }
            let n_comp = components(plan.opts.order_p).len() as u64;
            LevelBlocks {
                level: *level,
                boxes: boxes.len() as u64,
                merge,
                evo_classes,
                pairs: pairs.len() as u64,
                max_pairs_per_box: max_pairs_per_box_moments(pairs),
                box_reg_qubits,
                copy_qubits_per_pair: 2 * n_comp * w as u64,
            }
        }
    }
}

fn box_distance(plan: &SynthPlan, a: BoxId, b: BoxId) -> f64 {
    let side = plan.lattice.width() as f64 / (1u32 << a.level) as f64;
    let dx = (b.ix as f64 - a.ix as f64) * side;
    let dy = (b.iy as f64 - a.iy as f64) * side;
    (dx * dx + dy * dy).sqrt()
}

fn max_pairs_per_box_zero(pairs: &[ZeroPairPlan]) -> u64 {
    let mut counts: BTreeMap<BoxId, u64> = BTreeMap::new();
    for p in pairs {
        *counts.entry(p.a).or_insert(0) += 1;
        *counts.entry(p.b).or_insert(0) += 1;
    }
    counts.values().copied().max().unwrap_or(0)
}

fn max_pairs_per_box_moments(pairs: &[MomentPairPlan]) -> u64 {
    let mut counts: BTreeMap<BoxId, u64> = BTreeMap::new();
    for p in pairs {
        *counts.entry(p.a).or_insert(0) += 1;
        *counts.entry(p.b).or_insert(0) += 1;
    }
    counts.values().copied().max().unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Quantized classical evaluator

/// Classically computed counterpart of one circuit run on a basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedOutcome {
    /// Total accumulated phase in radians; matches `run_basis` bit-exactly.
    pub phase: f64,
    /// Diagonal energy implied by the phase, `-phase / delta_t`.
    pub energy: f64,
}

/// Evaluate the per-basis phase of the synthesized circuit classically, by
/// replaying the plan with the same fixed-point row semantics and the same
/// phase-accumulation order as the gates.
pub fn quantized_outcome(plan: &SynthPlan, system_bits: &[bool]) -> QuantizedOutcome {
    assert_eq!(
        system_bits.len(),
        plan.lattice.system_qubits(),
        "system bit count mismatch"
    );
    let mut phase = 0.0f64;
    let lattice = &plan.lattice;

    for &site in &plan.onsite {
        let q = site_qubits(lattice, site);
        if system_bits[q[0] as usize] && system_bits[q[1] as usize] {
            phase += -lattice.onsite_v0 * plan.opts.delta_t;
        }
    }

    for pair in &plan.direct {
        for &a in &site_qubits(lattice, pair.site_a) {
            for &b in &site_qubits(lattice, pair.site_b) {
                if system_bits[a as usize] && system_bits[b as usize] {
                    phase += -pair.t_eff;
                }
            }
        }
    }

    let occ = |site: usize| -> u64 {
        site_qubits(lattice, site)
            .iter()
            .map(|&q| system_bits[q as usize] as u64)
            .sum()
    };

    let f = plan.opts.frac_bits();
    let mut sums: BTreeMap<BoxId, u64> = BTreeMap::new();
    let mut moments: BTreeMap<BoxId, Vec<u64>> = BTreeMap::new();

    for lv in &plan.levels {
        match lv {
            LevelPlan::Zeroth { level, boxes, pairs } => {
                let side = lattice.width() / (1u32 << level);
                for id in boxes {
                    let mut n = 0u64;
                    let (x0, y0) = (id.ix as u32 * side, id.iy as u32 * side);
                    for y in y0..y0 + side {
                        for x in x0..x0 + side {
                            n += occ(lattice.site_index(x, y));
                        }
                    }
                    sums.insert(*id, n);
                }
                let wa = plan.sum_int_bits(*level);
                let prod_fmt = FixedPointFormat::unsigned(2 * wa, 0);
                for p in pairs {
                    let prod = sums[&p.a] * sums[&p.b];
                    accumulate_ladder_phase(&mut phase, p.t_eff, prod, prod_fmt);
                }
            }
            LevelPlan::Moments { level, boxes, pairs } => {
                let fmt = plan.moment_format(*level);
                let w = fmt.width();
                let n_comp = components(plan.opts.order_p).len();
                for mb in boxes {
                    let mut vals = vec![0u64; n_comp];
                    match &mb.source {
                        MomentSource::Sites(loads) => {
                            for load in loads {
                                if system_bits[load.qubit as usize] {
                                    vals[load.dst] =
                                        const_mac_apply(vals[load.dst], w, 1, 1, false, load.raw, 0);
                                }
                            }
                        }
                        MomentSource::Children(terms) => {
                            let child_fmt = plan.moment_format(*level + 1);
                            let children = mb.id.children();
                            for t in terms {
                                let src = moments[&children[t.child]][t.src];
                                vals[t.dst] = const_mac_apply(
                                    vals[t.dst],
                                    w,
                                    src,
                                    child_fmt.width(),
                                    child_fmt.signed,
                                    t.raw,
                                    -(f as i32),
                                );
                            }
                        }
                    }
                    moments.insert(mb.id, vals);
                }
                let prod_fmt = FixedPointFormat::signed(2 * fmt.integer_bits + 1, 2 * f);
                for p in pairs {
                    let e_fmt = FixedPointFormat::signed(p.energy_int_bits, f);
                    let mut e = 0u64;
                    for term in &p.terms {
                        let t = mult_acc_apply(
                            0,
                            prod_fmt.width(),
                            moments[&p.a][term.a],
                            fmt.width(),
                            fmt.signed,
                            moments[&p.b][term.b],
                            fmt.width(),
                            fmt.signed,
                            false,
                        );
                        e = const_mac_apply(
                            e,
                            e_fmt.width(),
                            t,
                            prod_fmt.width(),
                            true,
                            term.raw,
                            e_fmt.fraction_bits as i32 - prod_fmt.fraction_bits as i32 - f as i32,
                        );
                    }
                    accumulate_ladder_phase(&mut phase, plan.opts.delta_t, e, e_fmt);
                }
            }
        }
    }

    QuantizedOutcome {
        phase,
        energy: -phase / plan.opts.delta_t,
    }
}

/// Manifest: register roles, per-level structure, gate counts and the
/// quantization budget, as structured text.
pub fn manifest(result: &SynthResult) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let plan = &result.plan;
    let c = &result.circuit;
    let _ = writeln!(
        s,
        "synthesis {}x{} spinful={} order_p={} eps_b={} delta_t={} copy={} fanout={}",
        plan.lattice.width(),
        plan.lattice.height(),
        plan.opts.spinful,
        plan.opts.order_p,
        plan.opts.eps_b,
        plan.opts.delta_t,
        plan.opts.use_copy,
        plan.opts.use_fanout,
    );
    let _ = writeln!(s, "qubits total={}", c.n_qubits());
    let mut role_counts: BTreeMap<&'static str, (usize, u64)> = BTreeMap::new();
    for r in c.registers() {
        let e = role_counts.entry(r.role.name()).or_insert((0, 0));
        e.0 += 1;
        e.1 += r.width() as u64;
    }
    for (role, (regs, qubits)) in &role_counts {
        let _ = writeln!(s, "registers role={role} count={regs} qubits={qubits}");
    }
    let _ = writeln!(s, "gates total={}", c.len());
    for (kind, n) in c.gate_counts() {
        let _ = writeln!(s, "gates kind={kind} count={n}");
    }
    for seg in c.segments() {
        let _ = writeln!(s, "segment {:?} gates={}", seg.kind, seg.end - seg.start);
    }
    for (level, n) in plan.merge_counts() {
        let _ = writeln!(s, "level {level} merge_blocks={n}");
    }
    for (level, n) in plan.pair_counts() {
        let _ = writeln!(s, "level {level} evo_pairs={n}");
    }
    let _ = writeln!(s, "direct_pairs={}", plan.direct.len());
    let _ = writeln!(s, "quantization_bound={:e}", plan.quantization_bound);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::FockState;
    use crate::multipole::{brute_force_energy, fmm_total_energy};
    use crate::sim::run_basis;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts(p: u32) -> SynthesisOptions {
        SynthesisOptions {
            order_p: p,
            ..SynthesisOptions::default()
        }
    }

    fn hierarchy(width: u32) -> BoxHierarchy {
        BoxHierarchy::build(&LatticeSpec::square(width).unwrap())
    }

    /// Run the circuit on a Fock state with zeroed ancillae; assert
    /// diagonality and ancilla restoration, return the phase.
    fn circuit_phase(result: &SynthResult, state: &FockState) -> f64 {
        let sys = state.to_bits();
        let mut bits = vec![false; result.circuit.n_qubits() as usize];
        bits[..sys.len()].copy_from_slice(&sys);
        let out = run_basis(&result.circuit, &bits).unwrap();
        assert_eq!(&out.bits[..sys.len()], &sys[..], "system bits changed");
        assert!(
            out.bits[sys.len()..].iter().all(|&b| !b),
            "ancillae not restored"
        );
        out.phase
    }

    #[test]
    fn two_by_two_is_direct_only() {
        let h = hierarchy(2);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        let counts = r.circuit.gate_counts();
        assert_eq!(counts.get("CPHASE"), Some(&6));
        assert_eq!(counts.len(), 1, "only direct phases expected: {counts:?}");
        assert!(r.plan.merge_counts().is_empty());
    }

    #[test]
    fn four_by_four_structure() {
        let h = hierarchy(4);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        // one merge layer at level 1 with one block per box
        assert_eq!(r.plan.merge_counts().get(&1), Some(&4));
        assert_eq!(r.plan.pair_counts().get(&1), Some(&0));
        // 120 site pairs, all direct at level 2
        assert_eq!(r.plan.direct.len(), 120);
        let kinds: Vec<SegmentKind> = r.circuit.segments().iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::Direct { level: 2 },
                SegmentKind::Merge { level: 1 },
                SegmentKind::Uncompute { level: 1 },
            ]
        );
    }

    #[test]
    fn gate_skeleton_order_16x16() {
        let h = hierarchy(16);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        let kinds: Vec<SegmentKind> = r.circuit.segments().iter().map(|s| s.kind).collect();
        // direct phases, then merge+evo per level finest-to-coarsest, then
        // inverse merges coarsest-to-finest
        assert_eq!(
            kinds,
            vec![
                SegmentKind::Direct { level: 4 },
                SegmentKind::Merge { level: 3 },
                SegmentKind::Evo { level: 3 },
                SegmentKind::Merge { level: 2 },
                SegmentKind::Evo { level: 2 },
                SegmentKind::Merge { level: 1 },
                SegmentKind::Uncompute { level: 1 },
                SegmentKind::Uncompute { level: 2 },
                SegmentKind::Uncompute { level: 3 },
            ]
        );
    }

    #[test]
    fn effective_time_examples() {
        let h = hierarchy(8);
        let times = effective_times(&h, 0.1);
        // adjacent finest sites at distance 1
        let t = times.site_pairs[&(0, 1)];
        assert!((t.0 - 0.1).abs() < 1e-15);
        for t in times.site_pairs.values().chain(times.box_pairs.values()) {
            assert!(t.0 > 0.0);
        }
        // centers at distance 2 (finest-level interaction pair): 0.1 / 2
        let (a, b) = (0usize, 2usize);
        assert!((times.site_pairs[&(a, b)].0 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zeroth_phases_match_quantized_oracle_4x4() {
        let lat = LatticeSpec::square(4).unwrap();
        let h = BoxHierarchy::build(&lat);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let st = FockState::random_with_count(&lat, rng.random_range(0..=8), &mut rng).unwrap();
            let phase = circuit_phase(&r, &st);
            let oracle = quantized_outcome(&r.plan, &st.to_bits());
            assert_eq!(phase, oracle.phase, "bit-exact phase");
        }
    }

    #[test]
    fn zeroth_phases_match_quantized_oracle_8x8() {
        let lat = LatticeSpec::square(8).unwrap();
        let h = BoxHierarchy::build(&lat);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let st = FockState::random_with_count(&lat, 32, &mut rng).unwrap();
            let phase = circuit_phase(&r, &st);
            let oracle = quantized_outcome(&r.plan, &st.to_bits());
            assert_eq!(phase, oracle.phase);
        }
    }

    #[test]
    fn higher_order_phases_match_quantized_oracle_8x8() {
        let lat = LatticeSpec::square(8).unwrap();
        let h = BoxHierarchy::build(&lat);
        for p in [1u32, 2] {
            let r = synth_higher(&h, &opts(p)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + p as u64);
            for _ in 0..6 {
                let st = FockState::random_with_count(&lat, 32, &mut rng).unwrap();
                let phase = circuit_phase(&r, &st);
                let oracle = quantized_outcome(&r.plan, &st.to_bits());
                assert_eq!(phase, oracle.phase, "p={p}");
            }
        }
    }

    #[test]
    fn quantized_energy_tracks_analytic_within_bound() {
        let lat = LatticeSpec::square(8).unwrap();
        let h = BoxHierarchy::build(&lat);
        for p in [1u32, 2] {
            let r = synth_higher(&h, &opts(p)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7 + p as u64);
            for _ in 0..8 {
                let st = FockState::random_with_count(&lat, 32, &mut rng).unwrap();
                let oracle = quantized_outcome(&r.plan, &st.to_bits());
                let analytic = fmm_total_energy(&h, &st, p);
                let diff = (oracle.energy - analytic).abs();
                assert!(
                    diff <= r.plan.quantization_bound,
                    "p={p}: diff {diff} > bound {}",
                    r.plan.quantization_bound
                );
            }
        }
    }

    #[test]
    fn quantized_energy_approaches_brute_force_with_p() {
        let lat = LatticeSpec::square(8).unwrap();
        let h = BoxHierarchy::build(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let st = FockState::random_with_count(&lat, 32, &mut rng).unwrap();
        let exact = brute_force_energy(&lat, &st);
        let mut opts3 = opts(3);
        opts3.eps_b = 1.0 / 4096.0;
        let r = synth_higher(&h, &opts3).unwrap();
        let oracle = quantized_outcome(&r.plan, &st.to_bits());
        assert!(
            (oracle.energy - exact).abs() / exact < 5e-3,
            "{} vs {exact}",
            oracle.energy
        );
    }

    #[test]
    fn copy_modes_give_identical_phases() {
        let lat = LatticeSpec::square(8).unwrap();
        let h = BoxHierarchy::build(&lat);
        let base = opts(0);
        let mut with_copy = base;
        with_copy.use_copy = true;
        let mut with_fanout = with_copy;
        with_fanout.use_fanout = true;
        let r0 = synth_zeroth(&h, &base).unwrap();
        let r1 = synth_zeroth(&h, &with_copy).unwrap();
        let r2 = synth_zeroth(&h, &with_fanout).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let st = FockState::random_with_count(&lat, 32, &mut rng).unwrap();
            let p0 = circuit_phase(&r0, &st);
            let p1 = circuit_phase(&r1, &st);
            let p2 = circuit_phase(&r2, &st);
            assert_eq!(p0, p1);
            assert_eq!(p0, p2);
        }
    }

    #[test]
    fn evo_gate_phases() {
        use crate::circuit::Register;
        let fmt = FixedPointFormat::unsigned(3, 0);
        let reg = |label: &str, start: u32| Register {
            label: label.into(),
            role: RegisterRole::BoxSum,
            qubits: (start..start + 3).collect(),
            format: fmt,
            anchor: None,
        };
        let a = reg("a", 0);
        let b = reg("b", 3);
        let c = synth_evo_gate(&a, &b, EffectiveTime(std::f64::consts::PI)).unwrap();
        // N_A = 0: identity phase
        let out = run_basis(&c, &vec![false; c.n_qubits() as usize]).unwrap();
        assert_eq!(out.phase, 0.0);
        // N_A = N_B = 1 at t_eff = pi: phase -pi
        let mut bits = vec![false; c.n_qubits() as usize];
        bits[0] = true;
        bits[3] = true;
        let out = run_basis(&c, &bits).unwrap();
        assert!((out.phase + std::f64::consts::PI).abs() < 1e-12);
        assert!(out.bits[6..].iter().all(|&x| !x));

        // random occupations: phase = -t N_A N_B
        let c = synth_evo_gate(&a, &b, EffectiveTime(0.37)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let va = rng.random_range(0..8u64);
            let vb = rng.random_range(0..8u64);
            let mut bits = vec![false; c.n_qubits() as usize];
            for i in 0..3 {
                bits[i] = (va >> i) & 1 == 1;
                bits[3 + i] = (vb >> i) & 1 == 1;
            }
            let out = run_basis(&c, &bits).unwrap();
            assert!((out.phase
                - crate::arith::ladder_phase(0.37, va * vb, FixedPointFormat::unsigned(6, 0)))
            .abs()
                < 1e-15);
            assert!((out.phase + 0.37 * (va * vb) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn spinful_adapter_and_oracle_2x2() {
        let spinless = LatticeSpec::square(2).unwrap();
        let h = BoxHierarchy::build(&spinless);
        let base = synth_zeroth(&h, &opts(0)).unwrap();

        let spinful = LatticeSpec::new(2, 2, true, 1.0, 0.8, 8).unwrap();
        let r = synth_spinful_adapter(&base, &spinful).unwrap();
        // on-site CPHASE per site plus 4 CPHASEs per site pair
        assert_eq!(r.circuit.gate_counts()["CPHASE"], 4 + 6 * 4);

        // all 256 basis states: phase matches the oracle; V0 phase fires on
        // doubly occupied sites only
        for idx in 0..256usize {
            let bits: Vec<bool> = (0..8).map(|b| (idx >> b) & 1 == 1).collect();
            let out = run_basis(&r.circuit, &bits).unwrap();
            let oracle = quantized_outcome(&r.plan, &bits);
            assert_eq!(out.phase, oracle.phase);
        }
        // exactly one doubly occupied site, no Coulomb partners
        let mut bits = vec![false; 8];
        bits[0] = true;
        bits[1] = true;
        let out = run_basis(&r.circuit, &bits).unwrap();
        assert!((out.phase - (-0.8 * r.plan.opts.delta_t)).abs() < 1e-15);

        // spinful brute force within floating-point of the direct evaluation
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let st = FockState::random_with_count(&spinful, 5, &mut rng).unwrap();
            let oracle = quantized_outcome(&r.plan, &st.to_bits());
            let coulomb = brute_force_energy(&spinful, &st);
            let onsite: f64 = (0..4)
                .filter(|&s| st.occupation(s) == 2)
                .map(|_| 0.8)
                .sum();
            assert!((oracle.energy - (coulomb + onsite)).abs() < 1e-9);
        }
    }

    #[test]
    fn order_dispatch_errors() {
        let h = hierarchy(4);
        assert!(matches!(
            synth_higher(&h, &opts(0)),
            Err(SynthError::NotHigher)
        ));
        assert!(matches!(
            synth_zeroth(&h, &opts(2)),
            Err(SynthError::NotZeroth(2))
        ));
        let mut bad = opts(0);
        bad.eps_b = 0.0;
        assert!(matches!(
            synth_zeroth(&h, &bad),
            Err(SynthError::BadOptions(_))
        ));
    }

    #[test]
    fn register_overflow_is_reported() {
        let h = hierarchy(8);
        let mut o = opts(2);
        o.eps_b = 1e-18; // 60 fraction bits: moment registers blow past 63
        assert!(matches!(
            synth_higher(&h, &o),
            Err(SynthError::RegisterOverflow { .. })
        ));
    }

    #[test]
    fn statevector_agrees_on_superposition() {
        // uniform superposition through the 2x2 circuit acquires per-basis
        // phases consistent with run_basis
        use crate::sim::{run_statevector, Statevector};
        let h = hierarchy(2);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        let n = r.circuit.n_qubits();
        let psi = Statevector::uniform(n);
        let out = run_statevector(&r.circuit, &psi).unwrap();
        for idx in 0..(1usize << n) {
            let bits: Vec<bool> = (0..n as usize).map(|b| (idx >> b) & 1 == 1).collect();
            let basis = run_basis(&r.circuit, &bits).unwrap();
            let want = num_complex::Complex64::from_polar(1.0, basis.phase)
                / (1u64 << n) as f64 * (1u64 << n) as f64
                * psi.amplitudes()[idx];
            assert!((out.amplitudes()[idx] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn manifest_contains_structure() {
        let h = hierarchy(4);
        let r = synth_zeroth(&h, &opts(0)).unwrap();
        let m = manifest(&r);
        assert!(m.contains("level 1 merge_blocks=4"));
        assert!(m.contains("direct_pairs=120"));
        assert!(m.contains("qubits total="));
    }
}

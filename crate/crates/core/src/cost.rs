//! Hardware cost models: qubit layout on a 2D grid, routing, greedy
//! as-soon-as-possible scheduling of real circuits, ancilla accounting,
//! structural estimation of large instances, and scaling sweeps with
//! least-squares fits.
//!
//! Three hardware regimes are modeled. Nearest-neighbor connectivity pays a
//! SWAP chain per unit of Manhattan distance, each way. Shuttling replaces
//! any chain by two shuttle operations. The fan-out regime additionally
//! treats COPY and (under the literature arithmetic model) arithmetic
//! blocks as constant-depth primitives.
//!
//! Real circuits are always costed as built. The literature arithmetic
//! model re-costs multiplier and adder blocks by published asymptotic
//! formulas (multiplier depth `n`, gates `n^1.3`; adder depth `log2 n + 1`)
//! and applies in the structural estimator, where blocks are labeled with
//! their operand widths. Reports state which model produced them.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::circuit::{Circuit, Gate, RegisterRole, SegmentKind};
use crate::hierarchy::BoxHierarchy;
use crate::synth::{self, SynthError, SynthPlan, SynthesisOptions};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("layout grid capacity exceeded: {placed} of {total} qubits placed; occupancy by role: {occupancy}")]
    GridCapacity {
        placed: usize,
        total: usize,
        occupancy: String,
    },
    #[error("circuit has {got} system qubits, hierarchy expects {want}")]
    SystemMismatch { got: usize, want: usize },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardwareKind {
    NearestNeighbor2D,
    Shuttling,
    ShuttlingFanout,
}

impl HardwareKind {
    pub fn name(&self) -> &'static str {
        match self {
            HardwareKind::NearestNeighbor2D => "nearest_neighbor",
            HardwareKind::Shuttling => "shuttling",
            HardwareKind::ShuttlingFanout => "shuttling_fanout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithmeticCostModel {
    AsBuilt,
    Literature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareModel {
    pub kind: HardwareKind,
    /// Layers per shuttle move.
    pub shuttle_depth_cost: u64,
    /// Layers per fan-out gate.
    pub fanout_depth_cost: u64,
    pub arithmetic: ArithmeticCostModel,
    /// Parallel shuttle moves of one stage cost a single move set.
    pub collective_shuttle: bool,
}

impl HardwareModel {
    pub fn nearest_neighbor() -> Self {
        Self {
            kind: HardwareKind::NearestNeighbor2D,
            shuttle_depth_cost: 1,
            fanout_depth_cost: 1,
            arithmetic: ArithmeticCostModel::AsBuilt,
            collective_shuttle: true,
        }
    }

    pub fn shuttling() -> Self {
        Self {
            kind: HardwareKind::Shuttling,
            ..Self::nearest_neighbor()
        }
    }

    pub fn shuttling_fanout() -> Self {
        Self {
            kind: HardwareKind::ShuttlingFanout,
            arithmetic: ArithmeticCostModel::Literature,
            ..Self::nearest_neighbor()
        }
    }

    pub fn with_literature_arithmetic(mut self) -> Self {
        self.arithmetic = ArithmeticCostModel::Literature;
        self
    }

    pub fn label(&self) -> String {
        format!(
            "{}{}",
            self.kind.name(),
            match self.arithmetic {
                ArithmeticCostModel::AsBuilt => "",
                ArithmeticCostModel::Literature => "+literature",
            }
        )
    }
}

/// Position on the layout grid, in sub-cells (`cells_per_site` per lattice
/// spacing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub x: i32,
    pub y: i32,
}

/// Deterministic map from qubits to grid positions: system qubits at their
/// lattice sites, ancilla registers ring-packed around their box anchors.
#[derive(Debug, Clone)]
pub struct Layout {
    positions: Vec<GridPos>,
    pub cells_per_site: u32,
}

impl Layout {
    pub fn position(&self, qubit: u32) -> GridPos {
        self.positions[qubit as usize]
    }

    /// Position in lattice units.
    pub fn lattice_coords(&self, qubit: u32) -> (f64, f64) {
        let p = self.position(qubit);
        (
            p.x as f64 / self.cells_per_site as f64,
            p.y as f64 / self.cells_per_site as f64,
        )
    }

    /// Manhattan distance in lattice units.
    pub fn manhattan(&self, a: u32, b: u32) -> f64 {
        let pa = self.position(a);
        let pb = self.position(b);
        ((pa.x - pb.x).abs() + (pa.y - pb.y).abs()) as f64 / self.cells_per_site as f64
    }
}

/// Place every qubit of the circuit: system qubits at their sites, each
/// anchored register at the nearest free sub-cells around its box center
/// (deterministic ring search), unanchored registers around the lattice
/// center.
pub fn layout(h: &BoxHierarchy, c: &Circuit) -> Result<Layout, CostError> {
    let lattice = h.lattice();
    let cps: i32 = 4;
    let system_qubits = lattice.system_qubits();
    let declared: usize = c
        .registers()
        .iter()
        .filter(|r| r.role == RegisterRole::System)
        .map(|r| r.qubits.len())
        .sum();
    if declared != system_qubits {
        return Err(CostError::SystemMismatch {
            got: declared,
            want: system_qubits,
        });
    }

    let mut positions = vec![GridPos { x: 0, y: 0 }; c.n_qubits() as usize];
    let mut occupied: HashMap<GridPos, RegisterRole> = HashMap::new();

    // system qubits first: site (x, y) owns sub-cell (cps x, cps y); the
    // spin partner sits one sub-cell to the right
    let qps = lattice.qubits_per_site() as u32;
    for r in c.registers().iter().filter(|r| r.role == RegisterRole::System) {
        for &q in &r.qubits {
            let site = (q / qps) as usize;
            let spin = (q % qps) as i32;
            let (x, y) = lattice.site_coords(site);
            let pos = GridPos {
                x: x as i32 * cps + spin,
                y: y as i32 * cps,
            };
            positions[q as usize] = pos;
            occupied.insert(pos, RegisterRole::System);
        }
    }

    let center_anchor = GridPos {
        x: (lattice.width() as i32 * cps) / 2,
        y: (lattice.height() as i32 * cps) / 2,
    };
    let max_radius = 2 * lattice.width() as i32 * cps + 8;

    let mut placed = system_qubits;
    for r in c.registers() {
        if r.role == RegisterRole::System {
            continue;
        }
        let anchor = match r.anchor {
            Some(id) => {
                let b = h.box_at(id);
                GridPos {
                    x: (b.center[0] * cps as f64).round() as i32,
                    y: (b.center[1] * cps as f64).round() as i32,
                }
            }
            None => center_anchor,
        };
        for &q in &r.qubits {
            let pos = find_free(anchor, &occupied, max_radius).ok_or_else(|| {
                let mut by_role: BTreeMap<&'static str, usize> = BTreeMap::new();
                for role in occupied.values() {
                    *by_role.entry(role.name()).or_insert(0) += 1;
                }
                CostError::GridCapacity {
                    placed,
                    total: c.n_qubits() as usize,
                    occupancy: format!("{by_role:?}"),
                }
            })?;
            positions[q as usize] = pos;
            occupied.insert(pos, r.role);
            placed += 1;
        }
    }

    Ok(Layout {
        positions,
        cells_per_site: cps as u32,
    })
}

/// Deterministic ring search: expanding Chebyshev rings, each scanned in a
/// fixed order.
fn find_free(
    anchor: GridPos,
    occupied: &HashMap<GridPos, RegisterRole>,
    max_radius: i32,
) -> Option<GridPos> {
    if !occupied.contains_key(&anchor) {
        return Some(anchor);
    }
    for radius in 1..=max_radius {
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx.abs().max(dy.abs()) != radius {
                    continue;
                }
                let pos = GridPos {
                    x: anchor.x + dx,
                    y: anchor.y + dy,
                };
                if !occupied.contains_key(&pos) {
                    return Some(pos);
                }
            }
        }
    }
    None
}

/// Routing cost of bringing two positions together, one way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RouteCost {
    pub depth: u64,
    pub swap_ops: u64,
    pub shuttle_ops: u64,
}

/// One-way routing between two grid positions. Nearest-neighbor hardware
/// pays one SWAP per lattice unit of Manhattan distance; shuttling hardware
/// pays two shuttle moves regardless of distance. Adjacent positions
/// (distance <= 1) cost nothing.
pub fn route_cost(
    model: &HardwareModel,
    from: GridPos,
    to: GridPos,
    cells_per_site: u32,
) -> RouteCost {
    let dist = ((from.x - to.x).abs() + (from.y - to.y).abs()) as f64 / cells_per_site as f64;
    route_for_distance(model, dist)
}

fn route_for_distance(model: &HardwareModel, dist: f64) -> RouteCost {
    let d = dist.round() as u64;
    if d <= 1 {
        return RouteCost::default();
    }
    match model.kind {
        HardwareKind::NearestNeighbor2D => RouteCost {
            depth: d,
            swap_ops: d,
            shuttle_ops: 0,
        },
        HardwareKind::Shuttling | HardwareKind::ShuttlingFanout => RouteCost {
            depth: 2 * model.shuttle_depth_cost,
            swap_ops: 0,
            shuttle_ops: 2,
        },
    }
}

/// Per-level slice of a resource report.
#[derive(Debug, Clone, Default)]
pub struct LevelCost {
    pub gates: u64,
    pub depth_layers: u64,
    pub swap_ops: u64,
    pub shuttle_ops: u64,
    /// Largest one-way routing distance (lattice units) among this level's
    /// evolution gates.
    pub max_route: f64,
}

#[derive(Debug, Clone)]
pub struct ResourceReport {
    pub model: String,
    pub depth: u64,
    pub total_gates: u64,
    pub gate_counts: BTreeMap<String, u64>,
    pub peak_ancillae: u64,
    pub swap_ops: u64,
    pub shuttle_ops: u64,
    pub per_level: BTreeMap<u8, LevelCost>,
    /// Depth contributed by shuttle moves alone.
    pub shuttle_depth: u64,
}

impl ResourceReport {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "model {}", self.model);
        let _ = writeln!(s, "depth {}", self.depth);
        let _ = writeln!(s, "gates {}", self.total_gates);
        for (k, v) in &self.gate_counts {
            let _ = writeln!(s, "gates.{k} {v}");
        }
        let _ = writeln!(s, "peak_ancillae {}", self.peak_ancillae);
        let _ = writeln!(s, "swap_ops {}", self.swap_ops);
        let _ = writeln!(s, "shuttle_ops {}", self.shuttle_ops);
        let _ = writeln!(s, "shuttle_depth {}", self.shuttle_depth);
        for (level, lc) in &self.per_level {
            let _ = writeln!(
                s,
                "level {level} gates={} depth={} swaps={} shuttles={} max_route={}",
                lc.gates, lc.depth_layers, lc.swap_ops, lc.shuttle_ops, lc.max_route
            );
        }
        s
    }
}

/// Greedy as-soon-as-possible layering of a real circuit: gates on disjoint
/// qubits share layers; multi-qubit gates between non-adjacent positions
/// pay the model's routing there and back. Returns the per-gate layer
/// assignment alongside the report.
pub fn schedule_with_layers(
    c: &Circuit,
    model: &HardwareModel,
    layout: &Layout,
) -> (ResourceReport, Vec<u64>) {
    let mut free = vec![0u64; c.n_qubits() as usize];
    let mut layers = Vec::with_capacity(c.len());
    let mut swap_ops = 0u64;
    let mut shuttle_ops = 0u64;
    let mut shuttle_depth = 0u64;
    let mut depth = 0u64;

    let mut per_level: BTreeMap<u8, LevelCost> = BTreeMap::new();
    // segment spans sorted by start for gate attribution
    let mut seg_iter = c.segments().iter().peekable();
    let mut active: Vec<&crate::circuit::Segment> = Vec::new();

    for (i, g) in c.gates().iter().enumerate() {
        while let Some(s) = seg_iter.peek() {
            if s.start <= i {
                active.push(s);
                seg_iter.next();
            } else {
                break;
            }
        }
        active.retain(|s| i < s.end);
        let qs = g.qubits();
        let mut start = 0u64;
        for &q in &qs {
            start = start.max(free[q as usize]);
        }
        let mut route = RouteCost::default();
        let mut max_d = 0.0f64;
        if qs.len() > 1 {
            for (ai, &a) in qs.iter().enumerate() {
                for &b in &qs[ai + 1..] {
                    let d = layout.manhattan(a, b);
                    if d > max_d {
                        max_d = d;
                    }
                }
            }
            route = route_for_distance(model, max_d);
        }
        let gate_dur = match g {
            Gate::Fanout { targets, .. } => match model.kind {
                HardwareKind::ShuttlingFanout => model.fanout_depth_cost,
                _ => targets.len() as u64,
            },
            _ => 1,
        };
        let dur = 2 * route.depth + gate_dur;
        layers.push(start + route.depth);
        for &q in &qs {
            free[q as usize] = start + dur;
        }
        depth = depth.max(start + dur);
        swap_ops += 2 * route.swap_ops;
        shuttle_ops += 2 * route.shuttle_ops;
        shuttle_depth += 2 * route.depth * (route.shuttle_ops > 0) as u64;

        for seg in &active {
            let Some(level) = seg.kind.level() else { continue };
            let lc = per_level.entry(level).or_default();
            lc.gates += 1;
            lc.swap_ops += 2 * route.swap_ops;
            lc.shuttle_ops += 2 * route.shuttle_ops;
            lc.depth_layers = lc.depth_layers.max(start + dur);
            if matches!(seg.kind, SegmentKind::Evo { .. } | SegmentKind::Direct { .. }) {
                lc.max_route = lc.max_route.max(max_d);
            }
        }
    }

    let gate_counts = c
        .gate_counts()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v as u64))
        .collect();
    let report = ResourceReport {
        model: model.label(),
        depth,
        total_gates: c.len() as u64,
        gate_counts,
        peak_ancillae: ancilla_peak(c, true),
        swap_ops,
        shuttle_ops,
        per_level,
        shuttle_depth,
    };
    (report, layers)
}

pub fn schedule(c: &Circuit, model: &HardwareModel, layout: &Layout) -> ResourceReport {
    schedule_with_layers(c, model, layout).0
}

/// Peak concurrent non-system qubits. With recycling, a register is live
/// from the first gate touching it to the last; freed ancillae are
/// reusable.
pub fn ancilla_peak(c: &Circuit, recycle: bool) -> u64 {
    let ancilla_regs: Vec<&crate::circuit::Register> = c
        .registers()
        .iter()
        .filter(|r| r.role != RegisterRole::System)
        .collect();
    let total: u64 = ancilla_regs.iter().map(|r| r.width() as u64).sum();
    if !recycle || c.is_empty() {
        return total;
    }
    let mut reg_of_qubit: HashMap<u32, usize> = HashMap::new();
    for (i, r) in ancilla_regs.iter().enumerate() {
        for &q in &r.qubits {
            reg_of_qubit.insert(q, i);
        }
    }
    let mut birth = vec![usize::MAX; ancilla_regs.len()];
    let mut death = vec![0usize; ancilla_regs.len()];
    for (gi, g) in c.gates().iter().enumerate() {
        for q in g.qubits() {
            if let Some(&ri) = reg_of_qubit.get(&q) {
                birth[ri] = birth[ri].min(gi);
                death[ri] = death[ri].max(gi);
            }
        }
    }
    let mut events: Vec<(usize, i64)> = Vec::new();
    for (ri, r) in ancilla_regs.iter().enumerate() {
        if birth[ri] == usize::MAX {
            continue;
        }
        events.push((birth[ri], r.width() as i64));
        events.push((death[ri] + 1, -(r.width() as i64)));
    }
    events.sort();
    let mut live = 0i64;
    let mut peak = 0i64;
    for (_, delta) in events {
        live += delta;
        peak = peak.max(live);
    }
    peak as u64
}

// ---------------------------------------------------------------------------
// Structural estimation

/// Structural skeleton of a synthesized circuit: representative blocks per
/// level with multiplicities and routing distances, exact as-built gate
/// totals, and register footprints. Feasible at sizes where materializing
/// every gate is not.
pub struct CircuitOutline {
    pub plan: SynthPlan,
    pub(crate) levels: Vec<synth::LevelBlocks>,
    /// (multiplicity, distance, phase gates per pair) of direct pairs.
    pub direct_classes: Vec<(u64, f64, u64)>,
    pub onsite_gates: u64,
    /// Largest number of direct pairs sharing one site.
    pub max_direct_per_site: u64,
    pub direct_pairs_total: u64,
    pub direct_sites_with_pairs: u64,
    pub system_qubits: u64,
}

/// Build the structural outline of `(h, opts)` without materializing the
/// full gate list.
pub fn outline(h: &BoxHierarchy, opts: &SynthesisOptions) -> Result<CircuitOutline, CostError> {
    let plan = synth::plan_only(h, opts)?;
    let levels: Vec<synth::LevelBlocks> = plan
        .levels_for_outline()
        .iter()
        .map(|lv| synth::level_blocks(&plan, lv))
        .collect();

    let phases_per_pair = if opts.spinful { 4u64 } else { 1 };
    let mut direct: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
    let mut per_site: BTreeMap<usize, u64> = BTreeMap::new();
    for (a, b) in plan.direct_pairs_view() {
        let pa = h.lattice().site_position(a);
        let pb = h.lattice().site_position(b);
        let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let e = direct.entry((d * 1e6).round() as u64).or_insert((0, d));
        e.0 += 1;
        *per_site.entry(a).or_insert(0) += 1;
        *per_site.entry(b).or_insert(0) += 1;
    }
    let direct_classes = direct
        .into_values()
        .map(|(count, d)| (count, d, phases_per_pair))
        .collect();

    let direct_pairs_total = plan.direct_pairs_view().len() as u64;
    Ok(CircuitOutline {
        system_qubits: h.lattice().system_qubits() as u64,
        onsite_gates: if opts.spinful {
            h.lattice().sites() as u64
        } else {
            0
        },
        max_direct_per_site: per_site.values().copied().max().unwrap_or(0),
        direct_pairs_total,
        direct_sites_with_pairs: per_site.len() as u64,
        levels,
        direct_classes,
        plan,
    })
}

fn lit_mult_depth(n: u32) -> u64 {
    n.max(1) as u64
}

fn lit_mult_gates(n: u32) -> u64 {
    (n.max(1) as f64).powf(1.3).ceil() as u64
}

fn lit_add_depth(n: u32) -> u64 {
    (n.max(2) as f64).log2().ceil() as u64 + 1
}

/// Arithmetic depth of one block under a model. Fan-out hardware treats
/// fan-out-based arithmetic as one layer per operation (the iterated
/// logarithm counts as a constant).
fn block_arith_depth(profile: &synth::BlockProfile, model: &HardwareModel) -> u64 {
    match (model.arithmetic, model.kind) {
        (ArithmeticCostModel::AsBuilt, _) => profile.depth,
        (ArithmeticCostModel::Literature, HardwareKind::ShuttlingFanout) => {
            (profile.mult_widths.len() + profile.add_widths.len()).max(1) as u64
                * model.fanout_depth_cost
        }
        (ArithmeticCostModel::Literature, _) => {
            let m: u64 = profile.mult_widths.iter().map(|&w| lit_mult_depth(w)).sum();
            let a: u64 = profile.add_widths.iter().map(|&w| lit_add_depth(w)).sum();
            (m + a).max(1)
        }
    }
}

fn block_gates(profile: &synth::BlockProfile, model: &HardwareModel) -> u64 {
    match model.arithmetic {
        ArithmeticCostModel::AsBuilt => profile.gates.values().sum(),
        ArithmeticCostModel::Literature => {
            let m: u64 = profile.mult_widths.iter().map(|&w| lit_mult_gates(w)).sum();
            let a: u64 = profile.add_widths.iter().map(|&w| 2 * w as u64).sum();
            let phases: u64 = *profile.gates.get("PHASE").unwrap_or(&0)
                + *profile.gates.get("CPHASE").unwrap_or(&0);
            (m + a + phases).max(1)
        }
    }
}

/// Resource estimate of an outlined circuit under a hardware model. Gate
/// totals are exact as-built sums over blocks (or the literature formulas
/// under that model); depth composes per-level stage depths with merges
/// parallel across boxes and pair evolutions serialized per box unless
/// COPY is on.
pub fn estimate_outline(outline: &CircuitOutline, model: &HardwareModel) -> ResourceReport {
    let opts = &outline.plan.opts;
    let mut depth = 0u64;
    let mut total_gates = 0u64;
    let mut gate_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut swap_ops = 0u64;
    let mut shuttle_ops = 0u64;
    let mut shuttle_depth = 0u64;
    let mut per_level: BTreeMap<u8, LevelCost> = BTreeMap::new();

    if outline.onsite_gates > 0 {
        total_gates += outline.onsite_gates;
        *gate_counts.entry("CPHASE".to_string()).or_insert(0) += outline.onsite_gates;
        depth += 1;
    }

    // direct stage: without COPY, pairs sharing a site serialize; with
    // COPY, one copy round parallelizes every pair
    {
        let qps = if opts.spinful { 2u64 } else { 1 };
        let mut max_route_depth = 0u64;
        for &(count, dist, phases) in &outline.direct_classes {
            let r = route_for_distance(model, dist);
            total_gates += count * phases;
            *gate_counts.entry("CPHASE".to_string()).or_insert(0) += count * phases;
            swap_ops += 2 * r.swap_ops * count;
            shuttle_ops += 2 * r.shuttle_ops * count;
            max_route_depth = max_route_depth.max(2 * r.depth);
        }
        if opts.use_copy {
            let (kind, copy_gates, copy_depth) = if opts.use_fanout {
                (
                    "FANOUT",
                    2 * qps * outline.direct_sites_with_pairs,
                    if matches!(model.kind, HardwareKind::ShuttlingFanout) {
                        model.fanout_depth_cost
                    } else {
                        outline.max_direct_per_site
                    },
                )
            } else {
                (
                    "CNOT",
                    4 * qps * outline.direct_pairs_total,
                    outline.max_direct_per_site,
                )
            };
            total_gates += copy_gates;
            *gate_counts.entry(kind.to_string()).or_insert(0) += copy_gates;
            depth += 2 * copy_depth + qps * qps + max_route_depth;
        } else {
            depth += outline.max_direct_per_site * (qps * qps + max_route_depth);
        }
    }

    for lv in &outline.levels {
        let mut lvl = LevelCost::default();

        // merges: compute and uncompute, boxes in parallel
        let merge_gates = block_gates(&lv.merge, model) * lv.boxes * 2;
        total_gates += merge_gates;
        lvl.gates += merge_gates;
        for (k, v) in &lv.merge.gates {
            *gate_counts.entry((*k).to_string()).or_insert(0) += v * lv.boxes * 2;
        }
        let side = outline.plan.lattice.width() as f64 / (1u32 << lv.level) as f64;
        let merge_route = route_for_distance(model, side / 2.0);
        let merge_depth = block_arith_depth(&lv.merge, model) + 2 * merge_route.depth;
        depth += 2 * merge_depth;
        lvl.depth_layers += 2 * merge_depth;
        swap_ops += 2 * merge_route.swap_ops * lv.boxes * 2;
        shuttle_ops += 2 * merge_route.shuttle_ops * lv.boxes * 2;
        if merge_route.shuttle_ops > 0 {
            let sets = if model.collective_shuttle { 1 } else { lv.boxes };
            shuttle_depth += 2 * merge_route.depth * sets * 2;
        }

        if lv.pairs > 0 {
            let mut stage_gate_total = 0u64;
            let mut weighted_depth = 0f64;
            for (count, dist, profile) in &lv.evo_classes {
                let g = block_gates(profile, model) * count;
                stage_gate_total += g;
                for (k, v) in &profile.gates {
                    *gate_counts.entry((*k).to_string()).or_insert(0) += v * count;
                }
                let r = route_for_distance(model, *dist);
                swap_ops += 2 * r.swap_ops * count;
                shuttle_ops += 2 * r.shuttle_ops * count;
                let block_depth = block_arith_depth(profile, model) + 2 * r.depth;
                weighted_depth += (*count as f64) * block_depth as f64;
                lvl.max_route = lvl.max_route.max(*dist);
            }
            total_gates += stage_gate_total;
            lvl.gates += stage_gate_total;
            let avg_block_depth = weighted_depth / lv.pairs as f64;

            if opts.use_copy {
                let copy_depth = if opts.use_fanout
                    && matches!(model.kind, HardwareKind::ShuttlingFanout)
                {
                    model.fanout_depth_cost
                } else {
                    lv.max_pairs_per_box
                };
                let copy_gates = lv.copy_qubits_per_pair * lv.pairs;
                total_gates += 2 * copy_gates;
                lvl.gates += 2 * copy_gates;
                let copy_kind = if opts.use_fanout { "FANOUT" } else { "CNOT" };
                *gate_counts.entry(copy_kind.to_string()).or_insert(0) += 2 * copy_gates;
                let stage = 2 * copy_depth + avg_block_depth.ceil() as u64;
                depth += stage;
                lvl.depth_layers += stage;
                if !matches!(model.kind, HardwareKind::NearestNeighbor2D) {
                    let sets = if model.collective_shuttle { 1 } else { lv.pairs };
                    shuttle_depth += 2 * model.shuttle_depth_cost * sets;
                }
            } else {
                let stage = (lv.max_pairs_per_box as f64 * avg_block_depth).ceil() as u64;
                depth += stage;
                lvl.depth_layers += stage;
                if !matches!(model.kind, HardwareKind::NearestNeighbor2D) {
                    let sets = if model.collective_shuttle {
                        lv.max_pairs_per_box
                    } else {
                        lv.pairs
                    };
                    shuttle_depth += 2 * model.shuttle_depth_cost * sets;
                }
            }
        }
        per_level.insert(lv.level, lvl);
    }

    // ancillae: box registers of every level stay live until the deferred
    // uncompute; transients of the busiest stage (including the direct
    // stage's pair copies) add on top
    let box_regs: u64 = outline
        .levels
        .iter()
        .map(|lv| lv.box_reg_qubits * lv.boxes)
        .sum();
    let level_transient: u64 = outline
        .levels
        .iter()
        .map(|lv| {
            let evo: u64 = lv
                .evo_classes
                .iter()
                .map(|(_, _, p)| p.qubits)
                .max()
                .unwrap_or(0);
            if opts.use_copy {
                evo + lv.copy_qubits_per_pair * lv.pairs
            } else {
                evo
            }
        })
        .max()
        .unwrap_or(0);
    let qps_copy = if opts.spinful { 2u64 } else { 1 };
    let direct_transient = if opts.use_copy {
        2 * qps_copy * outline.direct_pairs_total
    } else {
        0
    };
    let peak = (box_regs + level_transient).max(direct_transient);

    ResourceReport {
        model: model.label(),
        depth,
        total_gates,
        gate_counts,
        peak_ancillae: peak,
        swap_ops,
        shuttle_ops,
        per_level,
        shuttle_depth,
    }
}

// ---------------------------------------------------------------------------
// Scaling sweeps and fits

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub sites: u64,
    pub electron_bound: u64,
    pub model: String,
    pub depth: u64,
    pub total_gates: u64,
    pub peak_ancillae: u64,
    pub swap_ops: u64,
    pub shuttle_ops: u64,
    pub shuttle_depth: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitForm {
    SqrtN,
    LogNLogQ,
    LogN,
    Linear,
}

impl FitForm {
    pub fn name(&self) -> &'static str {
        match self {
            FitForm::SqrtN => "sqrt(N)",
            FitForm::LogNLogQ => "log(N)*log(Q)",
            FitForm::LogN => "log(N)",
            FitForm::Linear => "N",
        }
    }

    fn eval(&self, n: f64, q: f64) -> f64 {
        match self {
            FitForm::SqrtN => n.sqrt(),
            FitForm::LogNLogQ => n.log2() * q.log2(),
            FitForm::LogN => n.log2(),
            FitForm::Linear => n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitRow {
    pub model: String,
    pub quantity: &'static str,
    pub form: FitForm,
    pub coefficient: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub best: bool,
}

/// Least-squares fit of `y = c * f(N, Q) + d`; returns `(c, d, R^2)`.
pub fn fit_affine(points: &[(f64, f64, f64)], form: FitForm) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(nn, q, y) in points {
        let x = form.eval(nn, q);
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    let c = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let d = (sy - c * sx) / n;
    let mean_y = sy / n;
    let ss_res: f64 = points
        .iter()
        .map(|&(nn, q, y)| {
            let e = y - (c * form.eval(nn, q) + d);
            e * e
        })
        .sum();
    let ss_tot: f64 = points
        .iter()
        .map(|&(_, _, y)| (y - mean_y) * (y - mean_y))
        .sum();
    (c, d, 1.0 - ss_res / ss_tot)
}

/// Depth and gate-count sweep over lattice sizes under the given models,
/// with electron bound `Q = N/2`, plus least-squares fits of depth against
/// the candidate forms and of the as-built gate count against `N`.
pub fn scaling_sweep(
    widths: &[u32],
    models: &[HardwareModel],
    opts: &SynthesisOptions,
) -> Result<(Vec<SweepPoint>, Vec<FitRow>), CostError> {
    assert!(widths.len() >= 4, "sweep needs at least 4 sizes");
    let mut points = Vec::new();
    let mut gate_pts: Vec<(f64, f64, f64)> = Vec::new();
    for &w in widths {
        let n = w * w;
        let lattice = crate::lattice::LatticeSpec::new(
            w,
            w,
            opts.spinful,
            1.0,
            0.0,
            (n / 2).max(1) * (1 + opts.spinful as u32),
        )
        .expect("sweep lattice");
        let h = BoxHierarchy::build(&lattice);
        let ol = outline(&h, opts)?;
        // the fan-out regime assumes COPY-parallelized stages
        let mut fanout_opts = *opts;
        fanout_opts.use_copy = true;
        fanout_opts.use_fanout = true;
        let ol_fanout = outline(&h, &fanout_opts)?;
        // as-built gate totals are model independent
        let as_built = estimate_outline(&ol, &HardwareModel::nearest_neighbor());
        gate_pts.push((
            n as f64,
            lattice.electron_bound() as f64,
            as_built.total_gates as f64,
        ));
        for model in models {
            let chosen = if matches!(model.kind, HardwareKind::ShuttlingFanout)
                && !opts.use_copy
            {
                &ol_fanout
            } else {
                &ol
            };
            let report = estimate_outline(chosen, model);
            points.push(SweepPoint {
                sites: n as u64,
                electron_bound: lattice.electron_bound() as u64,
                model: model.label(),
                depth: report.depth,
                total_gates: as_built.total_gates,
                peak_ancillae: report.peak_ancillae,
                swap_ops: report.swap_ops,
                shuttle_ops: report.shuttle_ops,
                shuttle_depth: report.shuttle_depth,
            });
        }
    }

    let mut fits = Vec::new();
    for model in models {
        let label = model.label();
        let depth_pts: Vec<(f64, f64, f64)> = points
            .iter()
            .filter(|p| p.model == label)
            .map(|p| (p.sites as f64, p.electron_bound as f64, p.depth as f64))
            .collect();
        let mut rows: Vec<FitRow> = [FitForm::SqrtN, FitForm::LogNLogQ, FitForm::LogN]
            .into_iter()
            .map(|form| {
                let (c, d, r2) = fit_affine(&depth_pts, form);
                FitRow {
                    model: label.clone(),
                    quantity: "depth",
                    form,
                    coefficient: c,
                    intercept: d,
                    r_squared: r2,
                    best: false,
                }
            })
            .collect();
        let best = rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.r_squared.partial_cmp(&b.1.r_squared).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        rows[best].best = true;
        fits.extend(rows);
    }
    let (c, d, r2) = fit_affine(&gate_pts, FitForm::Linear);
    fits.push(FitRow {
        model: "as_built".to_string(),
        quantity: "gates",
        form: FitForm::Linear,
        coefficient: c,
        intercept: d,
        r_squared: r2,
        best: true,
    });
    Ok((points, fits))
}

/// Fit report as structured text.
pub fn render_fit_report(fits: &[FitRow]) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    for f in fits {
        let _ = writeln!(
            s,
            "fit model={} quantity={} form={} coeff={:.6} intercept={:.6} r2={:.6}{}",
            f.model,
            f.quantity,
            f.form.name(),
            f.coefficient,
            f.intercept,
            f.r_squared,
            if f.best { " best" } else { "" }
        );
    }
    s
}

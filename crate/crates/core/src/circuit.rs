//! Reversible gate-level circuit IR.
//!
//! Gates are classical-reversible (NOT/CNOT/TOFFOLI/SWAP/FANOUT) or diagonal
//! (PHASE/CPHASE); Toffoli is a primitive, not decomposed. Registers group
//! qubits LSB-first under a fixed-point format and a role; an optional box
//! anchor ties a register to its geometric home for layout and routing.
//! Segments bracket gate ranges (per level and stage) and are what reports
//! and schedulers use to attribute costs.
//!
//! Circuits are immutable values once built and safe to share across
//! threads. The text serialization round-trips bit-exactly.

use std::fmt::Write as _;

use thiserror::Error;

use crate::fixedpoint::FixedPointFormat;
use crate::hierarchy::BoxId;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("gate {0} references qubit {1} outside the circuit (width {2})")]
    QubitOutOfRange(String, u32, u32),
    #[error("gate {0} uses a qubit twice")]
    DuplicateQubit(String),
    #[error("gate angle must be finite")]
    NonFiniteAngle,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Not(u32),
    Cnot { control: u32, target: u32 },
    Toffoli { controls: [u32; 2], target: u32 },
    Swap(u32, u32),
    Phase { qubit: u32, angle: f64 },
    CPhase { a: u32, b: u32, angle: f64 },
    Fanout { control: u32, targets: Vec<u32> },
}

impl Gate {
    pub fn qubits(&self) -> Vec<u32> {
        match self {
            Gate::Not(q) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Toffoli { controls, target } => vec![controls[0], controls[1], *target],
            Gate::Swap(a, b) => vec![*a, *b],
            Gate::Phase { qubit, .. } => vec![*qubit],
            Gate::CPhase { a, b, .. } => vec![*a, *b],
            Gate::Fanout { control, targets } => {
                let mut v = vec![*control];
                v.extend_from_slice(targets);
                v
            }
        }
    }

    /// All gate kinds here are self-inverse except the phases, whose angles
    /// negate.
    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Phase { qubit, angle } => Gate::Phase {
                qubit: *qubit,
                angle: -angle,
            },
            Gate::CPhase { a, b, angle } => Gate::CPhase {
                a: *a,
                b: *b,
                angle: -angle,
            },
            g => g.clone(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Gate::Not(_) => "NOT",
            Gate::Cnot { .. } => "CNOT",
            Gate::Toffoli { .. } => "TOFFOLI",
            Gate::Swap(..) => "SWAP",
            Gate::Phase { .. } => "PHASE",
            Gate::CPhase { .. } => "CPHASE",
            Gate::Fanout { .. } => "FANOUT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegisterRole {
    System,
    BoxSum,
    Copy,
    Product,
    MomentReal,
    MomentImag,
}

impl RegisterRole {
    pub fn name(&self) -> &'static str {
        match self {
            RegisterRole::System => "system",
            RegisterRole::BoxSum => "box_sum",
            RegisterRole::Copy => "copy",
            RegisterRole::Product => "product",
            RegisterRole::MomentReal => "moment_real",
            RegisterRole::MomentImag => "moment_imag",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "system" => RegisterRole::System,
            "box_sum" => RegisterRole::BoxSum,
            "copy" => RegisterRole::Copy,
            "product" => RegisterRole::Product,
            "moment_real" => RegisterRole::MomentReal,
            "moment_imag" => RegisterRole::MomentImag,
            _ => return None,
        })
    }
}

/// A named group of qubits, LSB first, with a fixed-point interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct Register {
    pub label: String,
    pub role: RegisterRole,
    pub qubits: Vec<u32>,
    pub format: FixedPointFormat,
    /// Geometric home of the register, when it belongs to a box.
    pub anchor: Option<BoxId>,
}

impl Register {
    pub fn width(&self) -> u32 {
        self.qubits.len() as u32
    }
}

/// Index of a register within its circuit.
pub type RegId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Finest-level direct phase evolution.
    Direct { level: u8 },
    /// Adders building box sums or moment registers of one level.
    Merge { level: u8 },
    /// Interaction-pair evolution of one level.
    Evo { level: u8 },
    /// COPY fan-out of box registers before a level's evolution.
    Copy { level: u8 },
    /// Inverse of the COPY stage.
    Uncopy { level: u8 },
    /// Inverse merges restoring ancillae.
    Uncompute { level: u8 },
    /// On-site interaction phases (spinful only).
    Onsite,
}

impl SegmentKind {
    pub fn level(&self) -> Option<u8> {
        match self {
            SegmentKind::Direct { level }
            | SegmentKind::Merge { level }
            | SegmentKind::Evo { level }
            | SegmentKind::Copy { level }
            | SegmentKind::Uncopy { level }
            | SegmentKind::Uncompute { level } => Some(*level),
            SegmentKind::Onsite => None,
        }
    }

    fn name(&self) -> String {
        match self {
            SegmentKind::Direct { level } => format!("direct:{level}"),
            SegmentKind::Merge { level } => format!("merge:{level}"),
            SegmentKind::Evo { level } => format!("evo:{level}"),
            SegmentKind::Copy { level } => format!("copy:{level}"),
            SegmentKind::Uncopy { level } => format!("uncopy:{level}"),
            SegmentKind::Uncompute { level } => format!("uncompute:{level}"),
            SegmentKind::Onsite => "onsite".to_string(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if s == "onsite" {
            return Some(SegmentKind::Onsite);
        }
        let (kind, level) = s.split_once(':')?;
        let level: u8 = level.parse().ok()?;
        Some(match kind {
            "direct" => SegmentKind::Direct { level },
            "merge" => SegmentKind::Merge { level },
            "evo" => SegmentKind::Evo { level },
            "copy" => SegmentKind::Copy { level },
            "uncopy" => SegmentKind::Uncopy { level },
            "uncompute" => SegmentKind::Uncompute { level },
            _ => return None,
        })
    }
}

/// Half-open gate range `[start, end)` attributed to one synthesis stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    n_qubits: u32,
    gates: Vec<Gate>,
    registers: Vec<Register>,
    segments: Vec<Segment>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, id: RegId) -> &Register {
        &self.registers[id]
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Allocate `width` fresh qubits as a new register.
    pub fn add_register(
        &mut self,
        label: impl Into<String>,
        role: RegisterRole,
        format: FixedPointFormat,
        anchor: Option<BoxId>,
    ) -> RegId {
        let width = format.width();
        let qubits: Vec<u32> = (self.n_qubits..self.n_qubits + width).collect();
        self.n_qubits += width;
        self.registers.push(Register {
            label: label.into(),
            role,
            qubits,
            format,
            anchor,
        });
        self.registers.len() - 1
    }

    /// Register an externally numbered qubit group; the circuit width grows
    /// to cover its ids.
    pub fn adopt_register(&mut self, reg: Register) -> RegId {
        for &q in &reg.qubits {
            self.n_qubits = self.n_qubits.max(q + 1);
        }
        self.registers.push(reg);
        self.registers.len() - 1
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        let qs = gate.qubits();
        for &q in &qs {
            if q >= self.n_qubits {
                return Err(CircuitError::QubitOutOfRange(
                    gate.kind_name().to_string(),
                    q,
                    self.n_qubits,
                ));
            }
        }
        let mut sorted = qs.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CircuitError::DuplicateQubit(gate.kind_name().to_string()));
        }
        if let Gate::Phase { angle, .. } | Gate::CPhase { angle, .. } = gate {
            if !angle.is_finite() {
                return Err(CircuitError::NonFiniteAngle);
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Record a segment over an explicit, already-emitted gate range.
    pub fn push_segment(&mut self, kind: SegmentKind, start: usize, end: usize) {
        debug_assert!(start <= end && end <= self.gates.len());
        if end > start {
            self.segments.push(Segment { kind, start, end });
        }
    }

    /// Run `f` and bracket the gates it appends into one segment.
    pub fn with_segment<T>(&mut self, kind: SegmentKind, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = self.gates.len();
        let out = f(self);
        let end = self.gates.len();
        if end > start {
            self.segments.push(Segment { kind, start, end });
        }
        out
    }

    /// The inverse circuit: gates reversed and individually inverted.
    pub fn inverted(&self) -> Circuit {
        let n = self.gates.len();
        let gates = self.gates.iter().rev().map(Gate::inverse).collect();
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment {
                kind: s.kind,
                start: n - s.end,
                end: n - s.start,
            })
            .collect();
        Circuit {
            n_qubits: self.n_qubits,
            gates,
            registers: self.registers.clone(),
            segments,
        }
    }

    /// Append all gates (and shifted segments) of `other`, which must index
    /// the same qubit space.
    pub fn extend_gates(&mut self, other: &Circuit) -> Result<(), CircuitError> {
        let offset = self.gates.len();
        self.n_qubits = self.n_qubits.max(other.n_qubits);
        for g in &other.gates {
            self.push(g.clone())?;
        }
        for s in &other.segments {
            self.segments.push(Segment {
                kind: s.kind,
                start: s.start + offset,
                end: s.end + offset,
            });
        }
        Ok(())
    }

    pub fn gate_counts(&self) -> std::collections::BTreeMap<&'static str, usize> {
        let mut out = std::collections::BTreeMap::new();
        for g in &self.gates {
            *out.entry(g.kind_name()).or_insert(0) += 1;
        }
        out
    }

    /// Line-oriented text form: a register-table header, segment table, then
    /// one gate per line `KIND q0 q1 ... [angle]`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "circuit qubits={}", self.n_qubits);
        for r in &self.registers {
            let anchor = match r.anchor {
                Some(b) => format!(" anchor={},{},{}", b.level, b.ix, b.iy),
                None => String::new(),
            };
            let _ = writeln!(
                s,
                "register {} role={} format={} qubits={}{}",
                r.label,
                r.role.name(),
                r.format,
                r.qubits
                    .iter()
                    .map(|q| q.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                anchor
            );
        }
        for seg in &self.segments {
            let _ = writeln!(s, "segment {} {} {}", seg.kind.name(), seg.start, seg.end);
        }
        for g in &self.gates {
            match g {
                Gate::Not(q) => {
                    let _ = writeln!(s, "NOT {q}");
                }
                Gate::Cnot { control, target } => {
                    let _ = writeln!(s, "CNOT {control} {target}");
                }
                Gate::Toffoli { controls, target } => {
                    let _ = writeln!(s, "TOFFOLI {} {} {target}", controls[0], controls[1]);
                }
                Gate::Swap(a, b) => {
                    let _ = writeln!(s, "SWAP {a} {b}");
                }
                Gate::Phase { qubit, angle } => {
                    let _ = writeln!(s, "PHASE {qubit} {angle}");
                }
                Gate::CPhase { a, b, angle } => {
                    let _ = writeln!(s, "CPHASE {a} {b} {angle}");
                }
                Gate::Fanout { control, targets } => {
                    let t = targets
                        .iter()
                        .map(|q| q.to_string())
                        .collect::<Vec<_>>()
                        .join(" ");
                    let _ = writeln!(s, "FANOUT {control} {t}");
                }
            }
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<Circuit, CircuitError> {
        let mut c = Circuit::new();
        let mut declared_qubits = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| CircuitError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            let rest: Vec<&str> = parts.collect();
            match head {
                "circuit" => {
                    let q = rest
                        .first()
                        .and_then(|s| s.strip_prefix("qubits="))
                        .ok_or_else(|| err("expected qubits=N"))?;
                    declared_qubits = q.parse().map_err(|_| err("bad qubit count"))?;
                    c.n_qubits = declared_qubits;
                }
                "register" => {
                    let label = rest.first().ok_or_else(|| err("missing label"))?.to_string();
                    let mut role = None;
                    let mut format = None;
                    let mut qubits = None;
                    let mut anchor = None;
                    for kv in &rest[1..] {
                        let (k, v) = kv.split_once('=').ok_or_else(|| err("expected key=value"))?;
                        match k {
                            "role" => role = RegisterRole::parse(v),
                            "format" => format = parse_format(v),
                            "qubits" => {
                                qubits = v
                                    .split(',')
                                    .map(|q| q.parse::<u32>().ok())
                                    .collect::<Option<Vec<_>>>();
                            }
                            "anchor" => {
                                let f: Vec<&str> = v.split(',').collect();
                                if f.len() != 3 {
                                    return Err(err("anchor needs level,ix,iy"));
                                }
                                anchor = Some(BoxId {
                                    level: f[0].parse().map_err(|_| err("bad anchor"))?,
                                    ix: f[1].parse().map_err(|_| err("bad anchor"))?,
                                    iy: f[2].parse().map_err(|_| err("bad anchor"))?,
                                });
                            }
                            _ => return Err(err("unknown register field")),
                        }
                    }
                    c.registers.push(Register {
                        label,
                        role: role.ok_or_else(|| err("missing role"))?,
                        qubits: qubits.ok_or_else(|| err("missing qubits"))?,
                        format: format.ok_or_else(|| err("missing format"))?,
                        anchor,
                    });
                }
                "segment" => {
                    if rest.len() != 3 {
                        return Err(err("segment needs kind start end"));
                    }
                    let kind =
                        SegmentKind::parse(rest[0]).ok_or_else(|| err("bad segment kind"))?;
                    c.segments.push(Segment {
                        kind,
                        start: rest[1].parse().map_err(|_| err("bad start"))?,
                        end: rest[2].parse().map_err(|_| err("bad end"))?,
                    });
                }
                kind => {
                    let qs: Vec<&str> = rest;
                    let parse_q = |s: &str| s.parse::<u32>().map_err(|_| err("bad qubit id"));
                    let need = |n: usize| {
                        if qs.len() < n {
                            Err(err("missing gate operands"))
                        } else {
                            Ok(())
                        }
                    };
                    let gate = match kind {
                        "NOT" => {
                            need(1)?;
                            Gate::Not(parse_q(qs[0])?)
                        }
                        "CNOT" => {
                            need(2)?;
                            Gate::Cnot {
                                control: parse_q(qs[0])?,
                                target: parse_q(qs[1])?,
                            }
                        }
                        "TOFFOLI" => {
                            need(3)?;
                            Gate::Toffoli {
                                controls: [parse_q(qs[0])?, parse_q(qs[1])?],
                                target: parse_q(qs[2])?,
                            }
                        }
                        "SWAP" => {
                            need(2)?;
                            Gate::Swap(parse_q(qs[0])?, parse_q(qs[1])?)
                        }
                        "PHASE" => {
                            need(2)?;
                            Gate::Phase {
                                qubit: parse_q(qs[0])?,
                                angle: qs[1].parse().map_err(|_| err("bad angle"))?,
                            }
                        }
                        "CPHASE" => {
                            need(3)?;
                            Gate::CPhase {
                                a: parse_q(qs[0])?,
                                b: parse_q(qs[1])?,
                                angle: qs[2].parse().map_err(|_| err("bad angle"))?,
                            }
                        }
                        "FANOUT" => {
                            need(2)?;
                            Gate::Fanout {
                                control: parse_q(qs[0])?,
                                targets: qs[1..]
                                    .iter()
                                    .map(|s| parse_q(s))
                                    .collect::<Result<_, _>>()?,
                            }
                        }
                        _ => return Err(err("unknown gate kind")),
                    };
                    c.push(gate)?;
                }
            }
        }
        c.n_qubits = c.n_qubits.max(declared_qubits);
        Ok(c)
    }
}

fn parse_format(s: &str) -> Option<FixedPointFormat> {
    let (sign, rest) = s.split_at(1);
    let signed = match sign {
        "s" => true,
        "u" => false,
        _ => return None,
    };
    let (i, f) = rest.split_once('.')?;
    Some(FixedPointFormat {
        integer_bits: i.parse().ok()?,
        fraction_bits: f.parse().ok()?,
        signed,
    })
}

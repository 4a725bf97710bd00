//! Reversible arithmetic building blocks: out-of-place ripple adders,
//! shift-and-add multipliers, in-place accumulation, conditional constant
//! loads, phase ladders, COPY and circuit inversion.
//!
//! Negative values are two's complement throughout; operands narrower than
//! their accumulator are sign- or zero-extended by reusing the top bit, and
//! in-place accumulation is modular in the accumulator width. Under those
//! conventions signed and unsigned operands go through the same gate
//! networks.
//!
//! Everything here is verified against exhaustive classical oracles in the
//! tests; the builders are deliberately simple ripple constructions, with
//! asymptotically better designs entering only as cost formulas in
//! [`crate::cost`].

use thiserror::Error;

use crate::circuit::{Circuit, Gate, Register, RegisterRole};
use crate::fixedpoint::{FixedPointError, FixedPointFormat};

#[derive(Debug, Error, PartialEq)]
pub enum ArithError {
    #[error("{what}: register needs width >= {needed}, got {got}")]
    WidthMismatch {
        what: &'static str,
        needed: u32,
        got: u32,
    },
    #[error("operand fraction bits {a} and {b} do not align with output {out}")]
    FractionMismatch { a: u32, b: u32, out: u32 },
    #[error("output register must be signed when any input is signed")]
    SignednessMismatch,
    #[error("registers overlap or repeat qubits")]
    OverlappingRegisters,
    #[error(transparent)]
    Fixed(#[from] FixedPointError),
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
}

/// A register viewed as an arithmetic operand: bits beyond the physical
/// width read as the sign bit (signed) or as absent (unsigned).
#[derive(Clone, Copy)]
pub(crate) struct Operand<'a> {
    pub qubits: &'a [u32],
    pub signed: bool,
}

impl<'a> Operand<'a> {
    pub fn from_register(r: &'a Register) -> Self {
        Self {
            qubits: &r.qubits,
            signed: r.format.signed,
        }
    }

    fn bit(&self, i: usize) -> Option<u32> {
        if i < self.qubits.len() {
            Some(self.qubits[i])
        } else if self.signed {
            self.qubits.last().copied()
        } else {
            None
        }
    }
}

pub(crate) fn cnot(control: u32, target: u32) -> Gate {
    Gate::Cnot { control, target }
}

pub(crate) fn toffoli(c0: u32, c1: u32, target: u32) -> Gate {
    Gate::Toffoli {
        controls: [c0, c1],
        target,
    }
}

/// `|a, b, 0> -> |a, b, a+b>` into a zero-initialized output, using the
/// output bits themselves as the carry chain (no extra ancillae). Arithmetic
/// is modular in the output width; with the width checks of
/// [`build_adder`] the result is exact.
pub(crate) fn out_of_place_add_gates(a: Operand, b: Operand, out: &[u32]) -> Vec<Gate> {
    let n = out.len();
    let mut g = Vec::new();
    for i in 0..n {
        let ai = a.bit(i);
        let bi = b.bit(i);
        // carry into out[i+1] = maj(a_i, b_i, c_i) with c_i living in out[i]
        if i + 1 < n {
            if let (Some(qa), Some(qb)) = (ai, bi) {
                g.push(toffoli(qa, qb, out[i + 1]));
            }
            if let Some(qa) = ai {
                g.push(toffoli(qa, out[i], out[i + 1]));
            }
            if let Some(qb) = bi {
                g.push(toffoli(qb, out[i], out[i + 1]));
            }
        }
        if let Some(qa) = ai {
            g.push(cnot(qa, out[i]));
        }
        if let Some(qb) = bi {
            g.push(cnot(qb, out[i]));
        }
    }
    g
}

/// In-place `acc += x (mod 2^|acc|)`. Carries are computed into `carry`
/// (at least `|acc| - 1` fresh zero ancillae) and restored to zero.
pub(crate) fn vbe_add_gates(x: Operand, acc: &[u32], carry: &[u32]) -> Vec<Gate> {
    let n = acc.len();
    let mut g = Vec::new();
    if n == 0 {
        return g;
    }
    assert!(carry.len() >= n - 1, "need {} carry ancillae", n - 1);
    if n == 1 {
        if let Some(q) = x.bit(0) {
            g.push(cnot(q, acc[0]));
        }
        return g;
    }
    // forward: compute carries; CARRY(c_i, x_i, acc_i, c_{i+1}) leaves
    // acc_i = x_i ^ acc_i
    for i in 0..n - 1 {
        let xi = x.bit(i);
        let ci = if i > 0 { Some(carry[i - 1]) } else { None };
        if let Some(q) = xi {
            g.push(toffoli(q, acc[i], carry[i]));
            g.push(cnot(q, acc[i]));
        }
        if let Some(c) = ci {
            g.push(toffoli(c, acc[i], carry[i]));
        }
    }
    // top bit: sum only (modular, no carry out)
    if let Some(q) = x.bit(n - 1) {
        g.push(cnot(q, acc[n - 1]));
    }
    g.push(cnot(carry[n - 2], acc[n - 1]));
    // downward: uncompute carries and write sums
    for i in (0..n - 1).rev() {
        let xi = x.bit(i);
        let ci = if i > 0 { Some(carry[i - 1]) } else { None };
        // inverse CARRY
        if let Some(c) = ci {
            g.push(toffoli(c, acc[i], carry[i]));
        }
        if let Some(q) = xi {
            g.push(cnot(q, acc[i]));
            g.push(toffoli(q, acc[i], carry[i]));
        }
        // SUM
        if let Some(q) = xi {
            g.push(cnot(q, acc[i]));
        }
        if let Some(c) = ci {
            g.push(cnot(c, acc[i]));
        }
    }
    g
}

/// In-place `acc -= x (mod 2^|acc|)`: the adder run backwards (all its
/// gates are self-inverse).
pub(crate) fn vbe_sub_gates(x: Operand, acc: &[u32], carry: &[u32]) -> Vec<Gate> {
    let mut g = vbe_add_gates(x, acc, carry);
    g.reverse();
    g
}

/// In-place `acc +/-= x * y (mod 2^|acc|)` by shift-and-add: for each bit
/// `i` of `x`, the (extended) `y` is copied into `row` under that bit's
/// control, added into `acc[i..]`, and uncopied. `row` needs `|acc|` bits
/// and `carry` `|acc| - 1`, all returned to zero.
pub(crate) fn mult_acc_gates(
    x: Operand,
    y: Operand,
    acc: &[u32],
    row: &[u32],
    carry: &[u32],
    subtract: bool,
) -> Vec<Gate> {
    let n = acc.len();
    assert!(row.len() >= n && carry.len() + 1 >= n);
    let mut g = Vec::new();
    for i in 0..n {
        let Some(xi) = x.bit(i) else { continue };
        let m = n - i;
        let mut loaded = Vec::new();
        for j in 0..m {
            if let Some(yj) = y.bit(j) {
                g.push(toffoli(xi, yj, row[j]));
                loaded.push(toffoli(xi, yj, row[j]));
            }
        }
        let row_op = Operand {
            qubits: &row[..m],
            signed: false,
        };
        let add = if subtract {
            vbe_sub_gates(row_op, &acc[i..], carry)
        } else {
            vbe_add_gates(row_op, &acc[i..], carry)
        };
        g.extend(add);
        g.extend(loaded.into_iter().rev());
    }
    g
}

/// Bit pattern (two's complement, `width` bits) of `floor(c_raw * 2^k)`.
/// Negative shifts truncate toward minus infinity; this is the shared
/// definition used by both circuit emission and the classical quantized
/// evaluator, so the two cannot diverge.
pub fn const_row_pattern(c_raw: i64, k: i32, width: u32) -> u64 {
    let v: i128 = if k >= 0 {
        (c_raw as i128) << k
    } else {
        (c_raw as i128) >> (-k).min(127)
    };
    (v & ((1i128 << width) - 1)) as u64
}

/// Signed value of a `width`-bit two's-complement word.
pub fn sign_decode(raw: u64, width: u32) -> i64 {
    let masked = raw & mask(width);
    if width < 64 && (masked >> (width - 1)) & 1 == 1 {
        masked as i64 - (1i64 << width)
    } else {
        masked as i64
    }
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn operand_bit_value(raw: u64, width: u32, signed: bool, i: u32) -> Option<bool> {
    if i < width {
        Some((raw >> i) & 1 == 1)
    } else if signed {
        Some((raw >> (width - 1)) & 1 == 1)
    } else {
        None
    }
}

/// Classical mirror of [`mult_acc_gates`]: `acc +/-= x * y (mod 2^acc_width)`
/// with identical per-row semantics. Raw words are two's complement in their
/// stated widths.
#[allow(clippy::too_many_arguments)]
pub fn mult_acc_apply(
    acc: u64,
    acc_width: u32,
    x_raw: u64,
    x_width: u32,
    x_signed: bool,
    y_raw: u64,
    y_width: u32,
    y_signed: bool,
    subtract: bool,
) -> u64 {
    let mut acc = acc & mask(acc_width);
    let y_val = if y_signed {
        sign_decode(y_raw, y_width) as i128
    } else {
        (y_raw & mask(y_width)) as i128
    };
    for i in 0..acc_width {
        let Some(true) = operand_bit_value(x_raw, x_width, x_signed, i) else {
            continue;
        };
        let m = acc_width - i;
        let row = (y_val & ((1i128 << m) - 1)) as u64;
        let shifted = (row << i) & mask(acc_width);
        acc = if subtract {
            acc.wrapping_sub(shifted)
        } else {
            acc.wrapping_add(shifted)
        } & mask(acc_width);
    }
    acc
}

/// Classical mirror of [`const_mac_gates`]: `acc += x * c (mod 2^acc_width)`
/// with identical per-row shift/truncate semantics.
pub fn const_mac_apply(
    acc: u64,
    acc_width: u32,
    x_raw: u64,
    x_width: u32,
    x_signed: bool,
    c_raw: i64,
    shift_base: i32,
) -> u64 {
    let mut acc = acc & mask(acc_width);
    if c_raw == 0 {
        return acc;
    }
    for i in 0..x_width {
        if (x_raw >> i) & 1 == 0 {
            continue;
        }
        let sign_row = x_signed && i + 1 == x_width;
        let c_row = if sign_row { -c_raw } else { c_raw };
        let pattern = const_row_pattern(c_row, i as i32 + shift_base, acc_width);
        acc = acc.wrapping_add(pattern) & mask(acc_width);
    }
    acc
}

/// Phase accumulated by a ladder on a register holding `raw`, summed in the
/// same bit order as the emitted gates.
pub fn ladder_phase(t_eff: f64, raw: u64, format: FixedPointFormat) -> f64 {
    let mut phase = 0.0;
    accumulate_ladder_phase(&mut phase, t_eff, raw, format);
    phase
}

/// Add a ladder's per-bit angles directly into a running phase accumulator,
/// one term per set bit in LSB-first order — the same additions, in the
/// same order, as gate-by-gate propagation performs, so floating-point
/// results agree bit-for-bit.
pub fn accumulate_ladder_phase(phase: &mut f64, t_eff: f64, raw: u64, format: FixedPointFormat) {
    for b in 0..format.width() {
        if (raw >> b) & 1 == 1 {
            *phase += -t_eff * format.bit_weight(b);
        }
    }
}

/// In-place `acc += x * c (mod 2^|acc|)` for a classical constant `c` given
/// as a raw fixed-point word. `shift_base` aligns the raw lanes:
/// `shift_base = frac(acc) - frac(x) - frac(c)`. One row per physical bit
/// of `x`: bit `i` adds the pattern `floor(c * 2^(i + shift_base))` over the
/// full accumulator width (the sign bit of a signed operand adds the
/// negated constant instead). Rows with a negative net shift truncate
/// toward minus infinity, costing less than one ulp of `acc` each.
pub(crate) fn const_mac_gates(
    x: Operand,
    c_raw: i64,
    shift_base: i32,
    acc: &[u32],
    row: &[u32],
    carry: &[u32],
) -> Vec<Gate> {
    let n = acc.len();
    assert!(row.len() >= n && carry.len() + 1 >= n);
    let mut g = Vec::new();
    if c_raw == 0 {
        return g;
    }
    for (i, &xi) in x.qubits.iter().enumerate() {
        let sign_row = x.signed && i + 1 == x.qubits.len();
        let c_row = if sign_row { -c_raw } else { c_raw };
        let pattern = const_row_pattern(c_row, i as i32 + shift_base, n as u32);
        if pattern == 0 {
            continue;
        }
        let mut loaded = Vec::new();
        for j in 0..n {
            if (pattern >> j) & 1 == 1 {
                g.push(cnot(xi, row[j]));
                loaded.push(cnot(xi, row[j]));
            }
        }
        let row_op = Operand {
            qubits: &row[..n],
            signed: false,
        };
        g.extend(vbe_add_gates(row_op, acc, carry));
        g.extend(loaded.into_iter().rev());
    }
    g
}

/// CNOTs loading `q * pattern` into a zeroed target.
pub(crate) fn const_load_gates(control: u32, pattern: u64, target: &[u32]) -> Vec<Gate> {
    let mut g = Vec::new();
    for (j, &t) in target.iter().enumerate() {
        if (pattern >> j) & 1 == 1 {
            g.push(cnot(control, t));
        }
    }
    g
}

/// One phase gate per bit, angle `-t_eff * weight(bit)`; the net effect on a
/// basis state multiplies it by `exp(-i t_eff value)`. The sign bit of a
/// signed register carries negative weight. All gates commute (one layer).
pub(crate) fn phase_ladder_gates(qubits: &[u32], format: FixedPointFormat, t_eff: f64) -> Vec<Gate> {
    qubits
        .iter()
        .enumerate()
        .map(|(b, &q)| Gate::Phase {
            qubit: q,
            angle: -t_eff * format.bit_weight(b as u32),
        })
        .collect()
}

/// Transversal CNOTs (or bitwise fan-outs) duplicating `src` onto each
/// zero-initialized destination.
pub(crate) fn copy_gates(src: &[u32], dests: &[&[u32]], use_fanout: bool) -> Vec<Gate> {
    let mut g = Vec::new();
    if use_fanout {
        for (b, &s) in src.iter().enumerate() {
            g.push(Gate::Fanout {
                control: s,
                targets: dests.iter().map(|d| d[b]).collect(),
            });
        }
    } else {
        for d in dests {
            for (b, &s) in src.iter().enumerate() {
                g.push(cnot(s, d[b]));
            }
        }
    }
    g
}

fn check_disjoint(regs: &[&Register]) -> Result<(), ArithError> {
    let mut all: Vec<u32> = regs.iter().flat_map(|r| r.qubits.iter().copied()).collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(ArithError::OverlappingRegisters);
    }
    Ok(())
}

fn circuit_with(regs: &[&Register]) -> Circuit {
    let mut c = Circuit::new();
    for r in regs {
        c.adopt_register((*r).clone());
    }
    c
}

/// Effective signed width: an unsigned operand costs one extra bit when the
/// result is signed.
fn effective_width(r: &Register, signed_result: bool) -> u32 {
    r.width() + (signed_result && !r.format.signed) as u32
}

/// Out-of-place adder `|a, b, 0> -> |a, b, a+b>`, NOT/CNOT/TOFFOLI only.
pub fn build_adder(a: &Register, b: &Register, out: &Register) -> Result<Circuit, ArithError> {
    check_disjoint(&[a, b, out])?;
    if a.format.fraction_bits != b.format.fraction_bits
        || out.format.fraction_bits != a.format.fraction_bits
    {
        return Err(ArithError::FractionMismatch {
            a: a.format.fraction_bits,
            b: b.format.fraction_bits,
            out: out.format.fraction_bits,
        });
    }
    let signed = a.format.signed || b.format.signed;
    if signed && !out.format.signed {
        return Err(ArithError::SignednessMismatch);
    }
    let needed = effective_width(a, out.format.signed).max(effective_width(b, out.format.signed)) + 1;
    if out.width() < needed {
        return Err(ArithError::WidthMismatch {
            what: "adder output",
            needed,
            got: out.width(),
        });
    }
    let mut c = circuit_with(&[a, b, out]);
    for g in out_of_place_add_gates(
        Operand::from_register(a),
        Operand::from_register(b),
        &out.qubits,
    ) {
        c.push(g)?;
    }
    Ok(c)
}

/// Out-of-place multiplier `|a, b, 0> -> |a, b, a*b>` by shift-and-add of
/// controlled adders. Output fraction bits are the sum of the input
/// fraction bits. Internal row/carry ancillae are allocated inside the
/// returned circuit and restored to zero.
pub fn build_multiplier(a: &Register, b: &Register, out: &Register) -> Result<Circuit, ArithError> {
    check_disjoint(&[a, b, out])?;
    if out.format.fraction_bits != a.format.fraction_bits + b.format.fraction_bits {
        return Err(ArithError::FractionMismatch {
            a: a.format.fraction_bits,
            b: b.format.fraction_bits,
            out: out.format.fraction_bits,
        });
    }
    let signed = a.format.signed || b.format.signed;
    if signed && !out.format.signed {
        return Err(ArithError::SignednessMismatch);
    }
    let needed = a.width() + b.width();
    if out.width() < needed {
        return Err(ArithError::WidthMismatch {
            what: "multiplier output",
            needed,
            got: out.width(),
        });
    }
    let mut c = circuit_with(&[a, b, out]);
    let n = out.width();
    let row = c.add_register(
        format!("{}*{}_row", a.label, b.label),
        RegisterRole::Product,
        FixedPointFormat::unsigned(n, 0),
        None,
    );
    let carry = c.add_register(
        format!("{}*{}_carry", a.label, b.label),
        RegisterRole::Product,
        FixedPointFormat::unsigned(n.saturating_sub(1).max(1), 0),
        None,
    );
    let row_q = c.register(row).qubits.clone();
    let carry_q = c.register(carry).qubits.clone();
    for g in mult_acc_gates(
        Operand::from_register(a),
        Operand::from_register(b),
        &out.qubits,
        &row_q,
        &carry_q,
        false,
    ) {
        c.push(g)?;
    }
    Ok(c)
}

/// CNOTs from `control` onto each target bit set in the constant's binary
/// representation: `|q, 0> -> |q, q*constant>`.
pub fn build_const_load(
    control: u32,
    constant: f64,
    target: &Register,
) -> Result<Circuit, ArithError> {
    if target.qubits.contains(&control) {
        return Err(ArithError::OverlappingRegisters);
    }
    let raw = target.format.encode(constant)?;
    let pattern = raw as u64 & (u64::MAX >> (64 - target.width()));
    let ctrl_reg = Register {
        label: "ctrl".to_string(),
        role: RegisterRole::System,
        qubits: vec![control],
        format: FixedPointFormat::unsigned(1, 0),
        anchor: None,
    };
    let mut c = circuit_with(&[&ctrl_reg, target]);
    for g in const_load_gates(control, pattern, &target.qubits) {
        c.push(g)?;
    }
    Ok(c)
}

/// Parallel phase ladder realizing `exp(-i t_eff value(reg))`.
pub fn build_phase_ladder(reg: &Register, t_eff: f64) -> Circuit {
    let mut c = circuit_with(&[reg]);
    for g in phase_ladder_gates(&reg.qubits, reg.format, t_eff) {
        c.push(g).expect("ladder gates are valid");
    }
    c
}

/// Duplicate `src` onto each zeroed destination register, transversally or
/// with bitwise fan-out gates.
pub fn build_copy(
    src: &Register,
    dests: &[Register],
    use_fanout: bool,
) -> Result<Circuit, ArithError> {
    let mut regs: Vec<&Register> = vec![src];
    regs.extend(dests.iter());
    check_disjoint(&regs)?;
    for d in dests {
        if d.width() != src.width() {
            return Err(ArithError::WidthMismatch {
                what: "copy destination",
                needed: src.width(),
                got: d.width(),
            });
        }
    }
    let mut c = circuit_with(&regs);
    let dest_slices: Vec<&[u32]> = dests.iter().map(|d| d.qubits.as_slice()).collect();
    for g in copy_gates(&src.qubits, &dest_slices, use_fanout) {
        c.push(g)?;
    }
    Ok(c)
}

/// The inverse circuit (gates reversed, phases negated).
pub fn invert(c: &Circuit) -> Circuit {
    c.inverted()
}

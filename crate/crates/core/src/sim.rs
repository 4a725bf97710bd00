//! Desk-scale verification: basis-state propagation with phase tracking,
//! small statevector simulation, dense exact evolution of the full model,
//! and Trotter-error sweeps.
//!
//! Every gate in the IR is a classical permutation plus a diagonal phase, so
//! basis states propagate as bit vectors with an accumulated phase. The
//! statevector path applies the same permutations amplitude-wise and is
//! cross-checked against `run_basis` in tests.
//!
//! The dense oracle builds the full Hamiltonian (fermionic hopping under a
//! fixed row-major site ordering with explicit parity bookkeeping, on-site
//! and exact Coulomb terms) as a real symmetric matrix and exponentiates it
//! by eigendecomposition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::multipole::coulomb_kernel;

/// Default qubit cap for statevector simulation.
pub const STATEVECTOR_QUBIT_CAP: u32 = 22;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("input has {got} bits, circuit has {want} qubits")]
    InputLength { got: usize, want: u32 },
    #[error("statevector of dimension {dim} does not match {qubits} qubits")]
    StatevectorDimension { dim: usize, qubits: u32 },
    #[error("{qubits} qubits exceed the statevector cap of {cap}")]
    QubitCap { qubits: u32, cap: u32 },
    #[error("statevector norm {norm} is not 1 within 1e-10")]
    NotNormalized { norm: f64 },
    #[error("dense evolution dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
}

/// Output bits and accumulated phase of one basis-state run.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisOutcome {
    pub bits: Vec<bool>,
    /// Raw accumulated phase in radians (not reduced mod 2 pi).
    pub phase: f64,
}

impl BasisOutcome {
    pub fn phase_mod_2pi(&self) -> f64 {
        self.phase.rem_euclid(2.0 * std::f64::consts::PI)
    }
}

/// Propagate a computational-basis bit pattern through the circuit,
/// accumulating diagonal phases gate by gate.
pub fn run_basis(c: &Circuit, input: &[bool]) -> Result<BasisOutcome, SimError> {
    if input.len() != c.n_qubits() as usize {
        return Err(SimError::InputLength {
            got: input.len(),
            want: c.n_qubits(),
        });
    }
    let mut bits = input.to_vec();
    let mut phase = 0.0;
    for g in c.gates() {
        match g {
            Gate::Not(q) => bits[*q as usize] = !bits[*q as usize],
            Gate::Cnot { control, target } => {
                if bits[*control as usize] {
                    bits[*target as usize] = !bits[*target as usize];
                }
            }
            Gate::Toffoli { controls, target } => {
                if bits[controls[0] as usize] && bits[controls[1] as usize] {
                    bits[*target as usize] = !bits[*target as usize];
                }
            }
            Gate::Swap(a, b) => bits.swap(*a as usize, *b as usize),
            Gate::Phase { qubit, angle } => {
                if bits[*qubit as usize] {
                    phase += angle;
                }
            }
            Gate::CPhase { a, b, angle } => {
                if bits[*a as usize] && bits[*b as usize] {
                    phase += angle;
                }
            }
            Gate::Fanout { control, targets } => {
                if bits[*control as usize] {
                    for t in targets {
                        bits[*t as usize] = !bits[*t as usize];
                    }
                }
            }
        }
    }
    Ok(BasisOutcome { bits, phase })
}

/// Dense complex amplitude vector over `2^n` basis states (bit 0 of the
/// index is qubit 0).
#[derive(Debug, Clone)]
pub struct Statevector {
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    pub fn basis(n_qubits: u32, index: usize) -> Self {
        let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
        amps[index] = Complex64::ONE;
        Self { amps }
    }

    pub fn uniform(n_qubits: u32) -> Self {
        let dim = 1usize << n_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self { amps: vec![a; dim] }
    }

    /// Haar-like random state: complex Gaussian entries, normalized.
    pub fn random(n_qubits: u32, rng: &mut impl Rng) -> Self {
        let dim = 1usize << n_qubits;
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        Self { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn n_qubits(&self) -> u32 {
        self.amps.len().trailing_zeros()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Statevector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Apply every gate of the circuit as a unitary to the statevector.
pub fn run_statevector(c: &Circuit, psi: &Statevector) -> Result<Statevector, SimError> {
    run_statevector_with_cap(c, psi, STATEVECTOR_QUBIT_CAP)
}

pub fn run_statevector_with_cap(
    c: &Circuit,
    psi: &Statevector,
    cap: u32,
) -> Result<Statevector, SimError> {
    let n = c.n_qubits();
    if n > cap {
        return Err(SimError::QubitCap { qubits: n, cap });
    }
    if psi.amps.len() != 1usize << n {
        return Err(SimError::StatevectorDimension {
            dim: psi.amps.len(),
            qubits: n,
        });
    }
    let mut amps = psi.amps.clone();
    let dim = amps.len();
    for g in c.gates() {
        match g {
            Gate::Not(q) => {
                let m = 1usize << q;
                for i in 0..dim {
                    if i & m == 0 {
                        amps.swap(i, i | m);
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let (cm, tm) = (1usize << control, 1usize << target);
                for i in 0..dim {
                    if i & cm != 0 && i & tm == 0 {
                        amps.swap(i, i | tm);
                    }
                }
            }
            Gate::Toffoli { controls, target } => {
                let c0 = 1usize << controls[0];
                let c1 = 1usize << controls[1];
                let tm = 1usize << target;
                for i in 0..dim {
                    if i & c0 != 0 && i & c1 != 0 && i & tm == 0 {
                        amps.swap(i, i | tm);
                    }
                }
            }
            Gate::Swap(a, b) => {
                let (am, bm) = (1usize << a, 1usize << b);
                for i in 0..dim {
                    if i & am != 0 && i & bm == 0 {
                        amps.swap(i, i ^ am ^ bm);
                    }
                }
            }
            Gate::Phase { qubit, angle } => {
                let m = 1usize << qubit;
                let ph = Complex64::from_polar(1.0, *angle);
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & m != 0 {
                        *a *= ph;
                    }
                }
            }
            Gate::CPhase { a, b, angle } => {
                let (am, bm) = (1usize << a, 1usize << b);
                let ph = Complex64::from_polar(1.0, *angle);
                for (i, amp) in amps.iter_mut().enumerate() {
                    if i & am != 0 && i & bm != 0 {
                        *amp *= ph;
                    }
                }
            }
            Gate::Fanout { control, targets } => {
                let cm = 1usize << control;
                let mask: usize = targets.iter().map(|t| 1usize << t).sum();
                for i in 0..dim {
                    let j = i ^ mask;
                    if i & cm != 0 && i < j {
                        amps.swap(i, j);
                    }
                }
            }
        }
    }
    Ok(Statevector { amps })
}

/// A small lattice model evolved exactly as a dense matrix. Unlike the
/// hierarchy this accepts any dimensions, so odd sizes (3x3) can serve as
/// Trotter-order references.
#[derive(Debug, Clone, Copy)]
pub struct DenseModel {
    pub width: u32,
    pub height: u32,
    pub spinful: bool,
    pub hopping_t: f64,
    pub onsite_v0: f64,
}

impl DenseModel {
    pub fn sites(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn qubits(&self) -> usize {
        self.sites() * if self.spinful { 2 } else { 1 }
    }

    pub fn dimension(&self) -> usize {
        1usize << self.qubits()
    }

    fn check_cap(&self) -> Result<(), SimError> {
        let cap = 4096;
        if self.dimension() > cap {
            return Err(SimError::DimensionCap {
                dim: self.dimension(),
                cap,
            });
        }
        Ok(())
    }

    fn site_position(&self, site: usize) -> [f64; 3] {
        let x = (site as u32 % self.width) as f64;
        let y = (site as u32 / self.width) as f64;
        [x, y, 0.0]
    }

    /// Exact diagonal Coulomb energies (plus on-site when spinful) for every
    /// basis index.
    pub fn interaction_diagonal(&self) -> Vec<f64> {
        let n_sites = self.sites();
        let qps = if self.spinful { 2 } else { 1 };
        let dim = self.dimension();
        let mut diag = vec![0.0; dim];
        for (idx, d) in diag.iter_mut().enumerate() {
            let occ =
                |site: usize| -> f64 { ((idx >> (site * qps)) & 1) as f64 + if qps == 2 { ((idx >> (site * qps + 1)) & 1) as f64 } else { 0.0 } };
            let mut e = 0.0;
            for a in 0..n_sites {
                let qa = occ(a);
                if qa == 0.0 {
                    continue;
                }
                for b in a + 1..n_sites {
                    let qb = occ(b);
                    if qb > 0.0 {
                        e += qa
                            * qb
                            * coulomb_kernel(self.site_position(a), self.site_position(b))
                                .expect("distinct sites");
                    }
                }
                if self.spinful && ((idx >> (a * 2)) & 3) == 3 {
                    e += self.onsite_v0;
                }
            }
            *d = e;
        }
        diag
    }

    /// Hopping-only Hamiltonian (real symmetric) under row-major
    /// Jordan-Wigner ordering with explicit parity signs.
    pub fn hopping_hamiltonian(&self) -> Result<DMatrix<f64>, SimError> {
        self.check_cap()?;
        let dim = self.dimension();
        let qps = if self.spinful { 2 } else { 1 };
        let mut h = DMatrix::zeros(dim, dim);
        let mut pairs = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let s = (y * self.width + x) as usize;
                if x + 1 < self.width {
                    pairs.push((s, s + 1));
                }
                if y + 1 < self.height {
                    pairs.push((s, s + self.width as usize));
                }
            }
        }
        for idx in 0..dim {
            for &(a, b) in &pairs {
                for sigma in 0..qps {
                    let qa = a * qps + sigma;
                    let qb = b * qps + sigma;
                    // both hops: b -> a and a -> b
                    for (src, dst) in [(qb, qa), (qa, qb)] {
                        if (idx >> src) & 1 == 1 && (idx >> dst) & 1 == 0 {
                            let removed = idx & !(1usize << src);
                            let sign_src = parity_below(idx, src);
                            let sign_dst = parity_below(removed, dst);
                            let out = removed | (1usize << dst);
                            h[(out, idx)] += self.hopping_t * sign_src * sign_dst;
                        }
                    }
                }
            }
        }
        Ok(h)
    }

    /// Full Hamiltonian: hopping plus the interaction diagonal.
    pub fn hamiltonian(&self) -> Result<DMatrix<f64>, SimError> {
        let mut h = self.hopping_hamiltonian()?;
        for (i, e) in self.interaction_diagonal().into_iter().enumerate() {
            h[(i, i)] += e;
        }
        Ok(h)
    }

    /// `exp(-i t H)` as a dense unitary, via eigendecomposition of the real
    /// symmetric Hamiltonian.
    pub fn exact_evolution(&self, t: f64) -> Result<DMatrix<Complex64>, SimError> {
        Ok(expi_symmetric(&self.hamiltonian()?, t))
    }
}

fn parity_below(bits: usize, q: usize) -> f64 {
    if (bits & ((1usize << q) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `exp(-i t S)` for a real symmetric matrix `S`.
pub fn expi_symmetric(s: &DMatrix<f64>, t: f64) -> DMatrix<Complex64> {
    let dim = s.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::new(s.clone());
    let q = &eig.eigenvectors;
    // U = Q diag(e^{-i t lambda}) Q^T
    let mut u = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for k in 0..dim {
        let ph = Complex64::from_polar(1.0, -t * eig.eigenvalues[k]);
        for i in 0..dim {
            let qik = q[(i, k)];
            if qik == 0.0 {
                continue;
            }
            for j in 0..dim {
                u[(i, j)] += ph * qik * q[(j, k)];
            }
        }
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrotterOrder {
    First,
    Second,
}

/// One Trotter step: the hopping propagator as a dense oracle and the
/// interaction part as a diagonal of per-basis energies (exact, or taken
/// from a synthesized circuit's quantized phases).
pub struct TrotterStep {
    u_hop: DMatrix<Complex64>,
    diag_phases: Vec<Complex64>,
    order: TrotterOrder,
}

impl TrotterStep {
    /// `dt` is the step duration; `interaction_diag` must list the diagonal
    /// interaction energy of every basis index.
    pub fn new(
        model: &DenseModel,
        dt: f64,
        order: TrotterOrder,
        interaction_diag: &[f64],
    ) -> Result<Self, SimError> {
        let hop = model.hopping_hamiltonian()?;
        if interaction_diag.len() != model.dimension() {
            return Err(SimError::StatevectorDimension {
                dim: interaction_diag.len(),
                qubits: model.qubits() as u32,
            });
        }
        let half = match order {
            TrotterOrder::Second => dt / 2.0,
            TrotterOrder::First => dt,
        };
        let u_hop = expi_symmetric(&hop, half);
        let diag_phases = interaction_diag
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -dt * e))
            .collect();
        Ok(Self {
            u_hop,
            diag_phases,
            order,
        })
    }

    pub fn apply(&self, psi: &Statevector) -> Statevector {
        let v = DVector::from_column_slice(psi.amplitudes());
        let amps = match self.order {
            TrotterOrder::Second => {
                // e^{-i dt/2 T} e^{-i dt V} e^{-i dt/2 T}
                let mut mid = &self.u_hop * v;
                for (i, a) in mid.iter_mut().enumerate() {
                    *a *= self.diag_phases[i];
                }
                &self.u_hop * mid
            }
            TrotterOrder::First => {
                // e^{-i dt T} e^{-i dt V}
                let mut mid = v;
                for (i, a) in mid.iter_mut().enumerate() {
                    *a *= self.diag_phases[i];
                }
                &self.u_hop * mid
            }
        };
        Statevector {
            amps: amps.iter().copied().collect(),
        }
    }
}

/// One row of a Trotter-error sweep.
#[derive(Debug, Clone)]
pub struct TrotterSweepRow {
    pub steps: u32,
    pub dt: f64,
    /// Max 2-norm error over sampled states, Trotter with the given
    /// approximate diagonal vs exact evolution.
    pub total_error: f64,
    /// Same, with the exact interaction diagonal (pure Trotter error).
    pub trotter_error: f64,
    /// Distance between the two Trotterized evolutions (interaction
    /// approximation part).
    pub approx_error: f64,
}

/// Sweep Trotter step counts at fixed total time, decomposing the error
/// into the product-formula part and the interaction-approximation part.
/// `approx_diag` defaults to the exact diagonal when `None`.
pub fn trotter_error_sweep(
    model: &DenseModel,
    t_total: f64,
    step_counts: &[u32],
    order: TrotterOrder,
    approx_diag: Option<&[f64]>,
    samples: usize,
    seed: u64,
) -> Result<Vec<TrotterSweepRow>, SimError> {
    let exact_diag = model.interaction_diagonal();
    let u_exact = model.exact_evolution(t_total)?;
    let n = model.qubits() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<Statevector> = (0..samples).map(|_| Statevector::random(n, &mut rng)).collect();
    let exact_outs: Vec<DVector<Complex64>> = states
        .iter()
        .map(|s| &u_exact * DVector::from_column_slice(s.amplitudes()))
        .collect();

    let mut rows = Vec::with_capacity(step_counts.len());
    for &d in step_counts {
        let dt = t_total / d as f64;
        let step_exact = TrotterStep::new(model, dt, order, &exact_diag)?;
        let step_approx = match approx_diag {
            Some(diag) => Some(TrotterStep::new(model, dt, order, diag)?),
            None => None,
        };
        let mut total_error: f64 = 0.0;
        let mut trotter_error: f64 = 0.0;
        let mut approx_error: f64 = 0.0;
        for (s, exact_out) in states.iter().zip(&exact_outs) {
            let mut a = s.clone();
            for _ in 0..d {
                a = step_exact.apply(&a);
            }
            let trot = dvec_distance(&a, exact_out);
            trotter_error = trotter_error.max(trot);
            if let Some(step) = &step_approx {
                let mut b = s.clone();
                for _ in 0..d {
                    b = step.apply(&b);
                }
                total_error = total_error.max(dvec_distance(&b, exact_out));
                approx_error = approx_error.max(a.distance(&b));
            } else {
                total_error = total_error.max(trot);
            }
        }
        rows.push(TrotterSweepRow {
            steps: d,
            dt,
            total_error,
            trotter_error,
            approx_error,
        });
    }
    Ok(rows)
}

fn dvec_distance(a: &Statevector, b: &DVector<Complex64>) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::RegisterRole;
    use crate::fixedpoint::FixedPointFormat;

    #[test]
    fn empty_circuit_is_identity() {
        let mut c = Circuit::new();
        c.add_register("r", RegisterRole::System, FixedPointFormat::unsigned(3, 0), None);
        let out = run_basis(&c, &[true, false, true]).unwrap();
        assert_eq!(out.bits, vec![true, false, true]);
        assert_eq!(out.phase, 0.0);
    }

    #[test]
    fn phase_gate_on_set_qubit() {
        let mut c = Circuit::new();
        c.add_register("r", RegisterRole::System, FixedPointFormat::unsigned(1, 0), None);
        c.push(Gate::Phase { qubit: 0, angle: 0.35 }).unwrap();
        assert_eq!(run_basis(&c, &[true]).unwrap().phase, 0.35);
        assert_eq!(run_basis(&c, &[false]).unwrap().phase, 0.0);
    }

    #[test]
    fn classical_gates_permute_bits() {
        let mut c = Circuit::new();
        c.add_register("r", RegisterRole::System, FixedPointFormat::unsigned(4, 0), None);
        c.push(Gate::Not(0)).unwrap();
        c.push(Gate::Cnot { control: 0, target: 1 }).unwrap();
        c.push(Gate::Toffoli { controls: [0, 1], target: 2 }).unwrap();
        c.push(Gate::Fanout { control: 2, targets: vec![3] }).unwrap();
        c.push(Gate::Swap(0, 3)).unwrap();
        let out = run_basis(&c, &[false; 4]).unwrap();
        assert_eq!(out.bits, vec![true, true, true, true]);
    }

    #[test]
    fn statevector_matches_run_basis_on_random_circuit() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = Circuit::new();
        c.add_register("r", RegisterRole::System, FixedPointFormat::unsigned(5, 0), None);
        for _ in 0..60 {
            let q = rng.random_range(0..5u32);
            let mut q2 = rng.random_range(0..5u32);
            if q2 == q {
                q2 = (q2 + 1) % 5;
            }
            let g = match rng.random_range(0..5) {
                0 => Gate::Not(q),
                1 => Gate::Cnot { control: q, target: q2 },
                2 => Gate::Swap(q, q2),
                3 => Gate::Phase { qubit: q, angle: rng.random::<f64>() },
                _ => Gate::CPhase { a: q, b: q2, angle: rng.random::<f64>() },
            };
            c.push(g).unwrap();
        }
        for idx in 0..32usize {
            let bits: Vec<bool> = (0..5).map(|b| (idx >> b) & 1 == 1).collect();
            let basis = run_basis(&c, &bits).unwrap();
            let sv = run_statevector(&c, &Statevector::basis(5, idx)).unwrap();
            let out_idx: usize = basis
                .bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| 1usize << i)
                .sum();
            let amp = sv.amplitudes()[out_idx];
            assert!((amp.norm() - 1.0).abs() < 1e-12);
            let want = Complex64::from_polar(1.0, basis.phase);
            assert!((amp - want).norm() < 1e-10);
            assert!((sv.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qubit_cap_enforced() {
        let mut c = Circuit::new();
        c.add_register("r", RegisterRole::System, FixedPointFormat::unsigned(23, 0), None);
        let psi = Statevector::basis(3, 0);
        assert!(matches!(
            run_statevector(&c, &psi),
            Err(SimError::QubitCap { .. })
        ));
    }

    #[test]
    fn exact_evolution_identity_at_t0() {
        let model = DenseModel {
            width: 2,
            height: 2,
            spinful: false,
            hopping_t: 1.0,
            onsite_v0: 0.0,
        };
        let u = model.exact_evolution(0.0).unwrap();
        for i in 0..u.nrows() {
            for j in 0..u.ncols() {
                let want = if i == j { Complex64::ONE } else { Complex64::ZERO };
                assert!((u[(i, j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn interaction_only_evolution_is_diagonal() {
        let model = DenseModel {
            width: 2,
            height: 2,
            spinful: false,
            hopping_t: 0.0,
            onsite_v0: 0.0,
        };
        let t = 0.37;
        let u = model.exact_evolution(t).unwrap();
        let diag = model.interaction_diagonal();
        for i in 0..u.nrows() {
            for j in 0..u.ncols() {
                if i == j {
                    let want = Complex64::from_polar(1.0, -t * diag[i]);
                    assert!((u[(i, i)] - want).norm() < 1e-10);
                } else {
                    assert!(u[(i, j)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn two_site_hopping_single_particle_rotation() {
        // 2x1 lattice, one particle: cos/-i sin rotation between |01> and |10>
        let model = DenseModel {
            width: 2,
            height: 1,
            spinful: false,
            hopping_t: 1.0,
            onsite_v0: 0.0,
        };
        let t = 0.8;
        let u = model.exact_evolution(t).unwrap();
        assert!((u[(1, 1)] - Complex64::new(t.cos(), 0.0)).norm() < 1e-12);
        assert!((u[(2, 1)] - Complex64::new(0.0, -t.sin())).norm() < 1e-12);
        assert!((u[(1, 2)] - Complex64::new(0.0, -t.sin())).norm() < 1e-12);
    }

    #[test]
    fn evolution_conserves_particle_number() {
        let model = DenseModel {
            width: 2,
            height: 2,
            spinful: false,
            hopping_t: 0.7,
            onsite_v0: 0.0,
        };
        let u = model.exact_evolution(0.9).unwrap();
        for i in 0..u.nrows() {
            for j in 0..u.ncols() {
                if (i.count_ones() != j.count_ones()) && u[(i, j)].norm() > 1e-10 {
                    panic!("sector mixing at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn trotter_identity_at_dt0() {
        let model = DenseModel {
            width: 2,
            height: 2,
            spinful: false,
            hopping_t: 1.0,
            onsite_v0: 0.0,
        };
        let diag = model.interaction_diagonal();
        let step = TrotterStep::new(&model, 0.0, TrotterOrder::Second, &diag).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = Statevector::random(4, &mut rng);
        let out = step.apply(&psi);
        assert!(psi.distance(&out) < 1e-12);
    }

    #[test]
    fn trotter_exact_when_terms_commute() {
        // no hopping: Trotter splitting is exact at any dt
        let model = DenseModel {
            width: 2,
            height: 2,
            spinful: false,
            hopping_t: 0.0,
            onsite_v0: 0.0,
        };
        let rows = trotter_error_sweep(&model, 1.3, &[1, 2], TrotterOrder::Second, None, 5, 3)
            .unwrap();
        for r in rows {
            assert!(r.trotter_error < 1e-10, "{}", r.trotter_error);
        }
    }

    #[test]
    fn trotter_second_order_slope() {
        let model = DenseModel {
            width: 2,
            height: 2,
            spinful: false,
            hopping_t: 1.0,
            onsite_v0: 0.0,
        };
        let rows =
            trotter_error_sweep(&model, 1.0, &[4, 8, 16, 32], TrotterOrder::Second, None, 8, 5)
                .unwrap();
        // log-log slope of error vs steps should be about -2
        let slope = log_slope(&rows);
        assert!((slope + 2.0).abs() < 0.3, "slope {slope}");
        let rows1 =
            trotter_error_sweep(&model, 1.0, &[4, 8, 16, 32], TrotterOrder::First, None, 8, 5)
                .unwrap();
        let slope1 = log_slope(&rows1);
        assert!((slope1 + 1.0).abs() < 0.3, "slope {slope1}");
    }

    fn log_slope(rows: &[TrotterSweepRow]) -> f64 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| ((r.steps as f64).ln(), r.trotter_error.ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }
}

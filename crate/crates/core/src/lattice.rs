//! Lattice geometry and Fock (occupation-number) states.
//!
//! Sites live on a square grid with unit spacing; site `(x, y)` sits at
//! position `(x, y, 0)`. All distances elsewhere in the crate are in these
//! lattice units. In the spinful case each site hosts two qubits (up spin
//! first), so per-site occupation ranges over `0..=2`.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("lattice dimensions must be powers of two >= 2, got {0}x{1}")]
    NonPowerOfTwo(u32, u32),
    #[error("only square lattices are supported, got {0}x{1}")]
    NotSquare(u32, u32),
    #[error("electron count {count} exceeds capacity {max}")]
    TooManyElectrons { count: u32, max: u32 },
    #[error("occupation vector has {got} entries, lattice has {want} sites")]
    OccupationLength { got: usize, want: usize },
    #[error("site {site} has occupation {occ}, maximum here is {max}")]
    Occupation { site: usize, occ: u8, max: u8 },
}

/// Geometry, spin mode and Hamiltonian coefficients of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    width: u32,
    height: u32,
    spinful: bool,
    pub hopping_t: f64,
    pub onsite_v0: f64,
    /// Upper bound on the total electron number, used for register sizing.
    electron_count: u32,
}

impl LatticeSpec {
    pub fn new(
        width: u32,
        height: u32,
        spinful: bool,
        hopping_t: f64,
        onsite_v0: f64,
        electron_count: u32,
    ) -> Result<Self, LatticeError> {
        if width != height {
            return Err(LatticeError::NotSquare(width, height));
        }
        if width < 2 || !width.is_power_of_two() {
            return Err(LatticeError::NonPowerOfTwo(width, height));
        }
        let max = (1 + spinful as u32) * width * height;
        if electron_count > max {
            return Err(LatticeError::TooManyElectrons {
                count: electron_count,
                max,
            });
        }
        Ok(Self {
            width,
            height,
            spinful,
            hopping_t,
            onsite_v0,
            electron_count,
        })
    }

    /// Square spinless lattice with unit hopping and a half-filling bound.
    pub fn square(width: u32) -> Result<Self, LatticeError> {
        let q = (width * width / 2).max(1);
        Self::new(width, width, false, 1.0, 0.0, q)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn spinful(&self) -> bool {
        self.spinful
    }

    /// Total number of lattice sites N.
    pub fn sites(&self) -> usize {
        (self.width * self.height) as usize
    }

    /// Electron-count bound Q.
    pub fn electron_bound(&self) -> u32 {
        self.electron_count
    }

    pub fn qubits_per_site(&self) -> usize {
        if self.spinful {
            2
        } else {
            1
        }
    }

    pub fn system_qubits(&self) -> usize {
        self.sites() * self.qubits_per_site()
    }

    /// Row-major site index of grid coordinates `(x, y)`.
    pub fn site_index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y * self.width + x) as usize
    }

    pub fn site_coords(&self, site: usize) -> (u32, u32) {
        let s = site as u32;
        (s % self.width, s / self.width)
    }

    /// Position of a site in lattice units; the third coordinate is fixed to
    /// zero so 3D solid-harmonic formulas apply unchanged.
    pub fn site_position(&self, site: usize) -> [f64; 3] {
        let (x, y) = self.site_coords(site);
        [x as f64, y as f64, 0.0]
    }

    /// Maximum per-site occupation (1 spinless, 2 spinful).
    pub fn site_capacity(&self) -> u8 {
        1 + self.spinful as u8
    }
}

/// Computational-basis occupation configuration of the lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockState {
    occ: Vec<u8>,
    spinful: bool,
}

impl FockState {
    pub fn empty(lattice: &LatticeSpec) -> Self {
        Self {
            occ: vec![0; lattice.sites()],
            spinful: lattice.spinful(),
        }
    }

    /// Build from per-site occupations, validating site capacity and the
    /// lattice's electron bound.
    pub fn from_occupations(lattice: &LatticeSpec, occ: Vec<u8>) -> Result<Self, LatticeError> {
        if occ.len() != lattice.sites() {
            return Err(LatticeError::OccupationLength {
                got: occ.len(),
                want: lattice.sites(),
            });
        }
        let cap = lattice.site_capacity();
        for (site, &n) in occ.iter().enumerate() {
            if n > cap {
                return Err(LatticeError::Occupation { site, occ: n, max: cap });
            }
        }
        let total: u32 = occ.iter().map(|&n| n as u32).sum();
        if total > lattice.electron_bound() {
            return Err(LatticeError::TooManyElectrons {
                count: total,
                max: lattice.electron_bound(),
            });
        }
        Ok(Self {
            occ,
            spinful: lattice.spinful(),
        })
    }

    /// Place exactly `count` electrons uniformly at random among free slots.
    pub fn random_with_count<R: Rng>(
        lattice: &LatticeSpec,
        count: u32,
        rng: &mut R,
    ) -> Result<Self, LatticeError> {
        let max = lattice.sites() as u32 * lattice.site_capacity() as u32;
        if count > max || count > lattice.electron_bound() {
            return Err(LatticeError::TooManyElectrons { count, max });
        }
        let mut slots: Vec<usize> = (0..lattice.system_qubits()).collect();
        slots.shuffle(rng);
        let mut occ = vec![0u8; lattice.sites()];
        for &slot in slots.iter().take(count as usize) {
            occ[slot / lattice.qubits_per_site()] += 1;
        }
        Ok(Self {
            occ,
            spinful: lattice.spinful(),
        })
    }

    pub fn occupation(&self, site: usize) -> u8 {
        self.occ[site]
    }

    pub fn occupations(&self) -> &[u8] {
        &self.occ
    }

    pub fn electron_count(&self) -> u32 {
        self.occ.iter().map(|&n| n as u32).sum()
    }

    pub fn spinful(&self) -> bool {
        self.spinful
    }

    /// System-qubit bit pattern. Spinless: qubit `i` is site `i`. Spinful:
    /// qubits `2i` (up) and `2i+1` (down); a singly occupied site sets the
    /// up qubit.
    pub fn to_bits(&self) -> Vec<bool> {
        if !self.spinful {
            return self.occ.iter().map(|&n| n != 0).collect();
        }
        let mut bits = Vec::with_capacity(self.occ.len() * 2);
        for &n in &self.occ {
            bits.push(n >= 1);
            bits.push(n == 2);
        }
        bits
    }

    /// Inverse of [`to_bits`](Self::to_bits) (any spin pattern accepted).
    pub fn from_bits(lattice: &LatticeSpec, bits: &[bool]) -> Result<Self, LatticeError> {
        if bits.len() != lattice.system_qubits() {
            return Err(LatticeError::OccupationLength {
                got: bits.len(),
                want: lattice.system_qubits(),
            });
        }
        let occ = if lattice.spinful() {
            bits.chunks(2).map(|c| c[0] as u8 + c[1] as u8).collect()
        } else {
            bits.iter().map(|&b| b as u8).collect()
        };
        Ok(Self {
            occ,
            spinful: lattice.spinful(),
        })
    }
}

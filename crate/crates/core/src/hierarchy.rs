//! Quadtree coarse-graining of the lattice: boxes, near fields and
//! interaction lists.
//!
//! Level `L` tiles the lattice with a `2^L x 2^L` grid of boxes; level 0 is
//! the root and the finest level `L_max = log4(N)` has one site per box.
//! For a box `A`, same-level boxes adjacent to it (including diagonally)
//! form its near field, and children of `A`'s parent's neighbors that are
//! not themselves adjacent to `A` form its interaction list `I(A)`. The
//! geometry caps `|I(A)|` at 27.
//!
//! The hierarchy is immutable after construction and safe to share across
//! threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::lattice::LatticeSpec;

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error("truncation range {xi} is below the nearest-neighbor spacing 1")]
    CutoffTooSmall { xi: f64 },
    #[error("box {0:?} does not exist in this hierarchy")]
    NoSuchBox(BoxId),
}

/// Identifies a box by level and grid coordinates within that level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoxId {
    pub level: u8,
    pub ix: u16,
    pub iy: u16,
}

impl BoxId {
    pub fn parent(&self) -> Option<BoxId> {
        if self.level == 0 {
            return None;
        }
        Some(BoxId {
            level: self.level - 1,
            ix: self.ix / 2,
            iy: self.iy / 2,
        })
    }

    pub fn children(&self) -> [BoxId; 4] {
        let (l, x, y) = (self.level + 1, self.ix * 2, self.iy * 2);
        [
            BoxId { level: l, ix: x, iy: y },
            BoxId { level: l, ix: x + 1, iy: y },
            BoxId { level: l, ix: x, iy: y + 1 },
            BoxId { level: l, ix: x + 1, iy: y + 1 },
        ]
    }

    /// Chebyshev distance in box-index space; 1 means adjacent.
    fn chebyshev(&self, other: &BoxId) -> u16 {
        debug_assert_eq!(self.level, other.level);
        let dx = self.ix.abs_diff(other.ix);
        let dy = self.iy.abs_diff(other.iy);
        dx.max(dy)
    }
}

/// A square region of the lattice at a given level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBox {
    pub id: BoxId,
    /// Center in lattice units; the third coordinate is always 0.
    pub center: [f64; 3],
    /// Half-diagonal of the box in lattice units.
    pub radius: f64,
    /// Sites per box side at this level.
    pub side_sites: u32,
}

struct Level {
    boxes: Vec<LatticeBox>,
    near: Vec<Vec<BoxId>>,
    ilist: Vec<Vec<BoxId>>,
}

/// The quadtree over a lattice, with per-box near fields and interaction
/// lists precomputed at every level.
pub struct BoxHierarchy {
    lattice: LatticeSpec,
    levels: Vec<Level>,
    /// Interaction range cutoff applied via [`level_cutoff`](Self::level_cutoff).
    cutoff: Option<f64>,
}

impl BoxHierarchy {
    /// Build all levels `0..=L_max` with centers, radii and lists.
    pub fn build(lattice: &LatticeSpec) -> Self {
        let width = lattice.width();
        let l_max = width.trailing_zeros() as u8;
        let mut levels = Vec::with_capacity(l_max as usize + 1);
        for level in 0..=l_max {
            let n = 1u32 << level;
            let side = width / n;
            let mut boxes = Vec::with_capacity((n * n) as usize);
            for iy in 0..n {
                for ix in 0..n {
                    let id = BoxId {
                        level,
                        ix: ix as u16,
                        iy: iy as u16,
                    };
                    let half = (side as f64 - 1.0) / 2.0;
                    boxes.push(LatticeBox {
                        id,
                        center: [ix as f64 * side as f64 + half, iy as f64 * side as f64 + half, 0.0],
                        radius: side as f64 * std::f64::consts::SQRT_2 / 2.0,
                        side_sites: side,
                    });
                }
            }
            let near: Vec<Vec<BoxId>> = boxes.iter().map(|b| neighbors(b.id, n)).collect();
            let ilist: Vec<Vec<BoxId>> = boxes
                .iter()
                .map(|b| interaction_candidates(b.id, n))
                .collect();
            levels.push(Level { boxes, near, ilist });
        }
        Self {
            lattice: *lattice,
            levels,
            cutoff: None,
        }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    /// Finest level index, `log4(N)`.
    pub fn max_level(&self) -> u8 {
        (self.levels.len() - 1) as u8
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    fn linear(&self, id: BoxId) -> usize {
        let n = 1usize << id.level;
        id.iy as usize * n + id.ix as usize
    }

    pub fn boxes(&self, level: u8) -> &[LatticeBox] {
        &self.levels[level as usize].boxes
    }

    pub fn box_at(&self, id: BoxId) -> &LatticeBox {
        &self.levels[id.level as usize].boxes[self.linear(id)]
    }

    /// Same-level boxes adjacent to `id`, including diagonally (at most 8).
    pub fn near_field(&self, id: BoxId) -> &[BoxId] {
        &self.levels[id.level as usize].near[self.linear(id)]
    }

    /// Children of the parent's neighbors that are not adjacent to `id`.
    /// Empty for levels 0 and 1 by construction.
    pub fn interaction_list(&self, id: BoxId) -> &[BoxId] {
        &self.levels[id.level as usize].ilist[self.linear(id)]
    }

    /// Row-major site indices contained in a box.
    pub fn sites_in_box(&self, id: BoxId) -> Vec<usize> {
        let side = self.box_at(id).side_sites;
        let (x0, y0) = (id.ix as u32 * side, id.iy as u32 * side);
        let mut out = Vec::with_capacity((side * side) as usize);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                out.push(self.lattice.site_index(x, y));
            }
        }
        out
    }

    /// Unordered interaction-list box pairs of one level, each pair once, in
    /// a canonical (row-major box, then partner) order.
    pub fn interaction_pairs(&self, level: u8) -> Vec<(BoxId, BoxId)> {
        let lv = &self.levels[level as usize];
        let mut pairs = Vec::new();
        for (i, b) in lv.boxes.iter().enumerate() {
            for &p in &lv.ilist[i] {
                if self.linear(p) > i {
                    pairs.push((b.id, p));
                }
            }
        }
        pairs
    }

    /// Unordered adjacent site pairs of the finest level, each once, in
    /// canonical order. These are evaluated directly, never via expansions.
    pub fn finest_near_pairs(&self) -> Vec<(usize, usize)> {
        let l_max = self.max_level();
        let lv = &self.levels[l_max as usize];
        let mut pairs = Vec::new();
        for (i, b) in lv.boxes.iter().enumerate() {
            let site_a = self.sites_in_box(b.id)[0];
            for &p in &lv.near[i] {
                if self.linear(p) > i {
                    pairs.push((site_a, self.sites_in_box(p)[0]));
                }
            }
        }
        pairs
    }

    /// Expand every interaction-list box pair at every level into its
    /// constituent site pairs, plus the finest-level near-field pairs.
    /// For an untruncated hierarchy this covers every unordered site pair
    /// exactly once.
    pub fn covered_pairs(&self) -> BTreeMap<(usize, usize), usize> {
        let mut multiset = BTreeMap::new();
        for level in 2..=self.max_level() {
            for (a, b) in self.interaction_pairs(level) {
                for &sa in &self.sites_in_box(a) {
                    for &sb in &self.sites_in_box(b) {
                        let key = (sa.min(sb), sa.max(sb));
                        *multiset.entry(key).or_insert(0) += 1;
                    }
                }
            }
        }
        for (a, b) in self.finest_near_pairs() {
            *multiset.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
        multiset
    }

    /// Drop interaction-list pairs whose center distance exceeds `xi`;
    /// levels whose lists all empty out are effectively removed. The exact
    /// finest-level near field always survives.
    pub fn level_cutoff(&self, xi: f64) -> Result<BoxHierarchy, HierarchyError> {
        if !(xi >= 1.0) {
            return Err(HierarchyError::CutoffTooSmall { xi });
        }
        let mut out = BoxHierarchy::build(&self.lattice);
        for lv in &mut out.levels {
            for (i, list) in lv.ilist.iter_mut().enumerate() {
                let c = lv.boxes[i].center;
                list.retain(|p| {
                    let n = 1usize << p.level;
                    let pc = lv.boxes[p.iy as usize * n + p.ix as usize].center;
                    dist(c, pc) <= xi
                });
            }
        }
        out.cutoff = Some(xi);
        Ok(out)
    }

    /// Levels (coarse to fine) that still carry at least one interaction pair.
    pub fn active_levels(&self) -> Vec<u8> {
        (2..=self.max_level())
            .filter(|&l| !self.interaction_pairs(l).is_empty())
            .collect()
    }

    /// Structured-text dump: one record per box with level, index, center,
    /// near-field ids and interaction-list ids.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# hierarchy {}x{} levels=0..{}{}",
            self.lattice.width(),
            self.lattice.height(),
            self.max_level(),
            match self.cutoff {
                Some(xi) => format!(" cutoff={xi}"),
                None => String::new(),
            }
        );
        for level in 0..=self.max_level() {
            for b in self.boxes(level) {
                let _ = writeln!(
                    s,
                    "box level={} index={},{} center=({},{}) radius={} near=[{}] ilist=[{}]",
                    b.id.level,
                    b.id.ix,
                    b.id.iy,
                    b.center[0],
                    b.center[1],
                    b.radius,
                    fmt_ids(self.near_field(b.id)),
                    fmt_ids(self.interaction_list(b.id)),
                );
            }
        }
        s
    }
}

fn fmt_ids(ids: &[BoxId]) -> String {
    ids.iter()
        .map(|b| format!("{},{}", b.ix, b.iy))
        .collect::<Vec<_>>()
        .join(" ")
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn neighbors(id: BoxId, n: u32) -> Vec<BoxId> {
    let mut out = Vec::with_capacity(8);
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let x = id.ix as i32 + dx;
            let y = id.iy as i32 + dy;
            if x >= 0 && y >= 0 && (x as u32) < n && (y as u32) < n {
                out.push(BoxId {
                    level: id.level,
                    ix: x as u16,
                    iy: y as u16,
                });
            }
        }
    }
    out
}

fn interaction_candidates(id: BoxId, n: u32) -> Vec<BoxId> {
    let parent = match id.parent() {
        Some(p) if id.level >= 2 => p,
        _ => return Vec::new(),
    };
    let mut out = Vec::new();
    for pn in neighbors(parent, n / 2) {
        for c in pn.children() {
            if c.chebyshev(&id) > 1 {
                out.push(c);
            }
        }
    }
    out.sort();
    out
}

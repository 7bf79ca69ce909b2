//! Square-lattice geometry with row-major, top-row-first site numbering.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub lx: usize,
    pub ly: usize,
    pub boundary: Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
}

impl Site {
    pub fn new(x: usize, y: usize) -> Self {
        Site { x, y }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Trotter group label of an edge. `Extra` only appears on periodic lattices of odd extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityClass {
    Even,
    Odd,
    Extra,
}

/// A nearest-neighbour link traversed from `from` to `to`.
///
/// Every link has a canonical direction along +x or +y. `reversed` is set
/// when the link is traversed against it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: Site,
    pub to: Site,
    pub orientation: Orientation,
    pub parity_class: ParityClass,
    pub wraps: bool,
    pub reversed: bool,
}

impl Edge {
    pub fn reversed(&self) -> Edge {
        Edge {
            from: self.to,
            to: self.from,
            reversed: !self.reversed,
            ..*self
        }
    }

    /// Same link in its canonical direction.
    pub fn canonical(&self) -> Edge {
        if self.reversed {
            self.reversed()
        } else {
            *self
        }
    }

    /// Start of the link in its canonical direction.
    pub fn tail(&self) -> Site {
        self.canonical().from
    }

    /// End of the link in its canonical direction.
    pub fn head(&self) -> Site {
        self.canonical().to
    }

    pub fn sites(&self) -> [Site; 2] {
        [self.from, self.to]
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Elementary plaquette with the cycle r → r+x → r+x+y → r+y → r.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub corner: Site,
    pub sites: [Site; 4],
    /// Edges along the cycle; the last two are traversed against their canonical direction.
    pub edges: [Edge; 4],
}

/// Non-contractible loop winding once around a periodic lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyakovLoop {
    pub orientation: Orientation,
    /// Row index for horizontal loops, column index for vertical loops.
    pub line: usize,
    pub edges: Vec<Edge>,
}

impl PolyakovLoop {
    pub fn sites(&self) -> Vec<Site> {
        self.edges.iter().map(|e| e.from).collect()
    }
}

impl LatticeSpec {
    pub fn new(lx: usize, ly: usize, boundary: Boundary) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::InvalidLattice(format!(
                "extents must be positive, got {lx}×{ly}"
            )));
        }
        if boundary == Boundary::Periodic && (lx < 2 || ly < 2) {
            return Err(Error::InvalidLattice(format!(
                "periodic lattices need lx, ly ≥ 2, got {lx}×{ly}"
            )));
        }
        Ok(LatticeSpec { lx, ly, boundary })
    }

    pub fn open(lx: usize, ly: usize) -> Result<Self> {
        Self::new(lx, ly, Boundary::Open)
    }

    pub fn periodic(lx: usize, ly: usize) -> Result<Self> {
        Self::new(lx, ly, Boundary::Periodic)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.lx, self.ly, self.boundary).map(|_| ())
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn contains(&self, s: Site) -> bool {
        s.x < self.lx && s.y < self.ly
    }

    /// Row-major index with y = 0 the top row.
    pub fn index(&self, s: Site) -> usize {
        s.y * self.lx + s.x
    }

    pub fn site(&self, index: usize) -> Site {
        Site::new(index % self.lx, index / self.lx)
    }

    /// Neighbour along +x or +y and whether the step wraps around the boundary.
    pub fn step(&self, s: Site, orientation: Orientation) -> Option<(Site, bool)> {
        let (coord, extent) = match orientation {
            Orientation::Horizontal => (s.x, self.lx),
            Orientation::Vertical => (s.y, self.ly),
        };
        let (next, wraps) = if coord + 1 < extent {
            (coord + 1, false)
        } else if self.is_periodic() {
            (0, true)
        } else {
            return None;
        };
        Some(match orientation {
            Orientation::Horizontal => (Site::new(next, s.y), wraps),
            Orientation::Vertical => (Site::new(s.x, next), wraps),
        })
    }

    /// Canonical edge leaving `from` along `orientation`, if it exists.
    pub fn edge_from(&self, from: Site, orientation: Orientation) -> Option<Edge> {
        if !self.contains(from) {
            return None;
        }
        let (to, wraps) = self.step(from, orientation)?;
        let coord = match orientation {
            Orientation::Horizontal => from.x,
            Orientation::Vertical => from.y,
        };
        let parity_class = if wraps || coord % 2 == 1 {
            ParityClass::Odd
        } else {
            ParityClass::Even
        };
        let mut edge = Edge {
            from,
            to,
            orientation,
            parity_class,
            wraps,
            reversed: false,
        };
        if wraps && self.wrap_needs_extra_class(orientation) {
            edge.parity_class = ParityClass::Extra;
        }
        Some(edge)
    }

    fn wrap_needs_extra_class(&self, orientation: Orientation) -> bool {
        let extent = match orientation {
            Orientation::Horizontal => self.lx,
            Orientation::Vertical => self.ly,
        };
        // the wrap edge starts at extent−1 and the odd edge at extent−2 shares that site
        // whenever extent−2 is odd, i.e. extent is odd and at least 3
        extent % 2 == 1 && extent >= 3
    }

    /// Edge between two neighbouring sites, oriented from `from` to `to`.
    ///
    /// On a 2-wide periodic direction two links join the same pair; the
    /// non-wrapping one is returned.
    pub fn find_edge(&self, from: Site, to: Site) -> Result<Edge> {
        for orientation in [Orientation::Horizontal, Orientation::Vertical] {
            if let Some(e) = self.edge_from(from, orientation) {
                if e.to == to && !e.wraps {
                    return Ok(e);
                }
            }
            if let Some(e) = self.edge_from(to, orientation) {
                if e.to == from && !e.wraps {
                    return Ok(e.reversed());
                }
            }
        }
        for orientation in [Orientation::Horizontal, Orientation::Vertical] {
            if let Some(e) = self.edge_from(from, orientation) {
                if e.to == to {
                    return Ok(e);
                }
            }
            if let Some(e) = self.edge_from(to, orientation) {
                if e.to == from {
                    return Ok(e.reversed());
                }
            }
        }
        Err(Error::EdgeNotOnLattice(format!("{from}->{to}")))
    }

    /// True if `e` (in either direction) is a link of this lattice.
    pub fn has_edge(&self, e: &Edge) -> bool {
        let c = e.canonical();
        self.edge_from(c.from, c.orientation) == Some(c)
    }
}

/// Sites in row-major order, top row first.
pub fn enumerate_sites(spec: &LatticeSpec) -> Vec<Site> {
    (0..spec.n_sites()).map(|i| spec.site(i)).collect()
}

/// All canonical edges of one orientation, ordered by their start site.
pub fn edges(spec: &LatticeSpec, orientation: Orientation) -> Vec<Edge> {
    enumerate_sites(spec)
        .into_iter()
        .filter_map(|s| spec.edge_from(s, orientation))
        .collect()
}

/// Canonical edges of both orientations, horizontal first.
pub fn all_edges(spec: &LatticeSpec) -> Vec<Edge> {
    let mut out = edges(spec, Orientation::Horizontal);
    out.extend(edges(spec, Orientation::Vertical));
    out
}

/// Edges of one orientation split by parity class; empty classes are omitted.
pub fn edge_classes(spec: &LatticeSpec, orientation: Orientation) -> Vec<(ParityClass, Vec<Edge>)> {
    let all = edges(spec, orientation);
    [ParityClass::Even, ParityClass::Odd, ParityClass::Extra]
        .into_iter()
        .map(|c| {
            (
                c,
                all.iter().copied().filter(|e| e.parity_class == c).collect::<Vec<_>>(),
            )
        })
        .filter(|(_, es)| !es.is_empty())
        .collect()
}

/// True if no two edges share a site.
pub fn site_disjoint(edges: &[Edge]) -> bool {
    let mut seen = HashSet::new();
    edges.iter().all(|e| seen.insert(e.from) && seen.insert(e.to))
}

/// Elementary plaquettes, ordered by corner index.
pub fn plaquettes(spec: &LatticeSpec) -> Vec<Plaquette> {
    enumerate_sites(spec)
        .into_iter()
        .filter_map(|r| {
            let bottom = spec.edge_from(r, Orientation::Horizontal)?;
            let right = spec.edge_from(bottom.to, Orientation::Vertical)?;
            let left = spec.edge_from(r, Orientation::Vertical)?;
            let top = spec.edge_from(left.to, Orientation::Horizontal)?;
            debug_assert_eq!(top.to, right.to);
            Some(Plaquette {
                corner: r,
                sites: [r, bottom.to, right.to, left.to],
                edges: [bottom, right, top.reversed(), left.reversed()],
            })
        })
        .collect()
}

/// One horizontal loop per row and one vertical loop per column; empty for open lattices.
pub fn polyakov_loops(spec: &LatticeSpec) -> Vec<PolyakovLoop> {
    if !spec.is_periodic() {
        return Vec::new();
    }
    let mut loops = Vec::new();
    for y in 0..spec.ly {
        let edges = (0..spec.lx)
            .map(|x| spec.edge_from(Site::new(x, y), Orientation::Horizontal).unwrap())
            .collect();
        loops.push(PolyakovLoop {
            orientation: Orientation::Horizontal,
            line: y,
            edges,
        });
    }
    for x in 0..spec.lx {
        let edges = (0..spec.ly)
            .map(|y| spec.edge_from(Site::new(x, y), Orientation::Vertical).unwrap())
            .collect();
        loops.push(PolyakovLoop {
            orientation: Orientation::Vertical,
            line: x,
            edges,
        });
    }
    loops
}

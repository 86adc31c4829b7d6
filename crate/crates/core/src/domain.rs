//! Bounded computational domains, uniform grids, complement truncation and
//! the interaction-region decomposition.
//!
//! A [`Domain`] is a bounded open set (1D interval or 2D axis-aligned
//! rectilinear geometry) tiled exactly by a uniform lattice, together with a
//! truncated complement collar: the axis-aligned box `[-R, R]^d` (snapped
//! outward to the lattice) minus the domain. Forms over `(Omega^c x Omega^c)^c`
//! are computed over `Omega x Omega` plus twice the `Omega x collar` region;
//! the discarded tail beyond the box is controlled by the kernel's tail bound
//! at the box margin.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Domain geometry; everything is axis-aligned so grid cells tile exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Geometry {
    Interval { a: f64, b: f64 },
    Rect { x: [f64; 2], y: [f64; 2] },
    /// Axis-aligned polygon (even-odd rule); vertices must lie on the grid.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Geometry {
    pub fn dimension(&self) -> usize {
        match self {
            Geometry::Interval { .. } => 1,
            _ => 2,
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Geometry::Interval { a, b } => ([*a, 0.0], [*b, 0.0]),
            Geometry::Rect { x, y } => ([x[0], y[0]], [x[1], y[1]]),
            Geometry::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Point-in-domain test for the open set (even-odd rule for polygons).
    fn contains(&self, p: &[f64]) -> bool {
        match self {
            Geometry::Interval { a, b } => p[0] > *a && p[0] < *b,
            Geometry::Rect { x, y } => p[0] > x[0] && p[0] < x[1] && p[1] > y[0] && p[1] < y[1],
            Geometry::Polygon { vertices } => {
                let (px, py) = (p[0], p[1]);
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let (x1, y1) = (vertices[i][0], vertices[i][1]);
                    let (x2, y2) = (vertices[(i + 1) % n][0], vertices[(i + 1) % n][1]);
                    if (y1 > py) != (y2 > py) {
                        let t = (py - y1) / (y2 - y1);
                        if px < x1 + t * (x2 - x1) {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }
}

/// Build parameters for a [`Domain`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub geometry: Geometry,
    /// Cells per axis across the geometry's extent (first axis for polygons).
    pub n: usize,
    /// Complement truncation radius: the collar is `[-r_trunc, r_trunc]^d \ Omega`.
    pub r_trunc: f64,
    /// Requested bound on the kernel tail discarded beyond the truncation box;
    /// enforced against concrete kernels by the form evaluators.
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    1e-10
}

/// Which region a lattice cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRegion {
    Omega,
    Collar,
}

/// Interaction regions whose cell pairs can be enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Unordered pairs of domain cells (self pairs carry weight 1, distinct
    /// pairs weight 2 so the enumerated measure is `|Omega|^2`).
    OmegaOmega,
    /// Ordered pairs (domain cell, collar cell); the form evaluator applies
    /// the symmetry factor 2 for the mirrored `Omega^c x Omega` region.
    OmegaComplement,
}

/// One enumerated cell pair with quadrature metadata.
#[derive(Debug, Clone, Copy)]
pub struct CellPair {
    pub a: u32,
    pub b: u32,
    /// Multiplicity of the pair in the region sum.
    pub weight: f64,
    /// Cells share at least a boundary point (quadrature must treat the
    /// kernel singularity); otherwise the pair is separated.
    pub singular: bool,
    /// Euclidean distance between the closed cells (0 for singular pairs).
    pub distance: f64,
}

/// A bounded domain with its uniform grid and truncated complement collar.
#[derive(Debug)]
pub struct Domain {
    spec: DomainSpec,
    d: usize,
    /// Cell width (same along every axis).
    w: f64,
    /// Lattice origin (coordinate of node index 0 per axis).
    origin: [f64; 2],
    /// Nodes per axis over the truncation box.
    nodes_per_axis: [usize; 2],
    /// Cells per axis over the truncation box.
    cells_per_axis: [usize; 2],
    node_interior: Vec<bool>,
    cell_region: Vec<CellRegion>,
    omega_cells: Vec<u32>,
    collar_cells: Vec<u32>,
    /// Nodes of the closure of Omega, in lattice order.
    interior_nodes: Vec<u32>,
    collar_nodes: Vec<u32>,
}

impl Domain {
    pub fn build(spec: DomainSpec) -> Result<Arc<Self>> {
        let d = spec.geometry.dimension();
        if spec.n == 0 {
            return Err(Error::Domain("grid resolution n must be positive".into()));
        }
        let (lo, hi) = spec.geometry.bounds();
        let extent = hi[0] - lo[0];
        if !(extent > 0.0) || (d == 2 && !(hi[1] - lo[1] > 0.0)) {
            return Err(Error::Domain("degenerate geometry".into()));
        }
        let w = extent / spec.n as f64;
        let diam = if d == 1 {
            extent
        } else {
            ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
        };
        if !(spec.r_trunc > 0.0) {
            return Err(Error::Domain("r_trunc must be positive".into()));
        }
        if spec.r_trunc <= diam {
            return Err(Error::Domain(format!(
                "r_trunc = {} must exceed diam(Omega) = {diam}",
                spec.r_trunc
            )));
        }
        let enclosing = lo[0]
            .abs()
            .max(hi[0].abs())
            .max(if d == 2 { lo[1].abs().max(hi[1].abs()) } else { 0.0 });
        if spec.r_trunc < enclosing {
            return Err(Error::Domain(
                "truncation box does not contain the domain (geometry must sit inside B_r_trunc)"
                    .into(),
            ));
        }

        // Snap the truncation box outward to the lattice generated by Omega's grid.
        let mut origin = [0.0; 2];
        let mut nodes_per_axis = [1usize; 2];
        for ax in 0..d {
            let base = lo[ax];
            let klo = ((-spec.r_trunc - base) / w).floor() as i64;
            let khi = ((spec.r_trunc - base) / w).ceil() as i64;
            origin[ax] = base + klo as f64 * w;
            nodes_per_axis[ax] = (khi - klo) as usize + 1;
        }
        // lattice alignment check for polygon vertices
        if let Geometry::Polygon { vertices } = &spec.geometry {
            for v in vertices {
                for (ax, c) in v.iter().enumerate().take(d) {
                    let t = (c - origin[ax]) / w;
                    if (t - t.round()).abs() > 1e-9 {
                        return Err(Error::Domain(format!(
                            "polygon vertex coordinate {c} is not aligned to the grid (w = {w})"
                        )));
                    }
                }
            }
        }

        let cells_per_axis = [
            nodes_per_axis[0] - 1,
            if d == 2 { nodes_per_axis[1] - 1 } else { 1 },
        ];
        let n_nodes = nodes_per_axis[0] * if d == 2 { nodes_per_axis[1] } else { 1 };
        let n_cells = cells_per_axis[0] * cells_per_axis[1];

        let mut dom = Domain {
            spec,
            d,
            w,
            origin,
            nodes_per_axis,
            cells_per_axis,
            node_interior: vec![false; n_nodes],
            cell_region: vec![CellRegion::Collar; n_cells],
            omega_cells: vec![],
            collar_cells: vec![],
            interior_nodes: vec![],
            collar_nodes: vec![],
        };

        for c in 0..n_cells as u32 {
            let center = dom.cell_center(c);
            let region = if dom.spec.geometry.contains(&center) {
                CellRegion::Omega
            } else {
                CellRegion::Collar
            };
            dom.cell_region[c as usize] = region;
            match region {
                CellRegion::Omega => dom.omega_cells.push(c),
                CellRegion::Collar => dom.collar_cells.push(c),
            }
        }
        if dom.omega_cells.is_empty() {
            return Err(Error::Domain("no grid cell lies inside the geometry".into()));
        }
        for c in dom.omega_cells.clone() {
            for n in dom.cell_nodes(c) {
                dom.node_interior[n as usize] = true;
            }
        }
        for n in 0..n_nodes as u32 {
            if dom.node_interior[n as usize] {
                dom.interior_nodes.push(n);
            } else {
                dom.collar_nodes.push(n);
            }
        }
        Ok(Arc::new(dom))
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn cell_width(&self) -> f64 {
        self.w
    }

    pub fn tail_tol(&self) -> f64 {
        self.spec.tail_tol
    }

    pub fn n_nodes(&self) -> usize {
        self.node_interior.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_region.len()
    }

    pub fn omega_cells(&self) -> &[u32] {
        &self.omega_cells
    }

    pub fn collar_cells(&self) -> &[u32] {
        &self.collar_cells
    }

    pub fn interior_nodes(&self) -> &[u32] {
        &self.interior_nodes
    }

    pub fn collar_nodes(&self) -> &[u32] {
        &self.collar_nodes
    }

    pub fn is_interior_node(&self, node: u32) -> bool {
        self.node_interior[node as usize]
    }

    pub fn cell_region_of(&self, cell: u32) -> CellRegion {
        self.cell_region[cell as usize]
    }

    /// Lebesgue measure of the gridded domain.
    pub fn omega_measure(&self) -> f64 {
        self.omega_cells.len() as f64 * self.w.powi(self.d as i32)
    }

    /// Radius of the smallest origin-centered ball containing the domain.
    pub fn enclosing_radius(&self) -> f64 {
        let (lo, hi) = self.spec.geometry.bounds();
        match self.d {
            1 => lo[0].abs().max(hi[0].abs()),
            _ => {
                let x = lo[0].abs().max(hi[0].abs());
                let y = lo[1].abs().max(hi[1].abs());
                (x * x + y * y).sqrt()
            }
        }
    }

    /// Distance from the domain to the boundary of the truncation box:
    /// interactions longer than this are discarded by the truncation.
    pub fn truncation_margin(&self) -> f64 {
        let (lo, hi) = self.spec.geometry.bounds();
        let mut margin = f64::INFINITY;
        for ax in 0..self.d {
            let box_lo = self.origin[ax];
            let box_hi = self.origin[ax] + (self.nodes_per_axis[ax] - 1) as f64 * self.w;
            margin = margin.min(lo[ax] - box_lo).min(box_hi - hi[ax]);
        }
        margin
    }

    pub fn node_coord(&self, node: u32) -> [f64; 2] {
        let nx = self.nodes_per_axis[0];
        let (ix, iy) = ((node as usize) % nx, (node as usize) / nx);
        [
            self.origin[0] + ix as f64 * self.w,
            self.origin[1] + iy as f64 * self.w,
        ]
    }

    pub(crate) fn node_id(&self, ix: usize, iy: usize) -> u32 {
        (iy * self.nodes_per_axis[0] + ix) as u32
    }

    pub(crate) fn cell_index(&self, cell: u32) -> (usize, usize) {
        let nx = self.cells_per_axis[0];
        ((cell as usize) % nx, (cell as usize) / nx)
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: u32) -> [f64; 2] {
        let (ix, iy) = self.cell_index(cell);
        [
            self.origin[0] + ix as f64 * self.w,
            self.origin[1] + iy as f64 * self.w,
        ]
    }

    pub fn cell_center(&self, cell: u32) -> [f64; 2] {
        let o = self.cell_origin(cell);
        match self.d {
            1 => [o[0] + 0.5 * self.w, 0.0],
            _ => [o[0] + 0.5 * self.w, o[1] + 0.5 * self.w],
        }
    }

    /// Node ids of a cell: 2 in 1D, 4 (counterclockwise from lower-left) in 2D.
    pub fn cell_nodes(&self, cell: u32) -> Vec<u32> {
        let (ix, iy) = self.cell_index(cell);
        match self.d {
            1 => vec![self.node_id(ix, 0), self.node_id(ix + 1, 0)],
            _ => vec![
                self.node_id(ix, iy),
                self.node_id(ix + 1, iy),
                self.node_id(ix + 1, iy + 1),
                self.node_id(ix, iy + 1),
            ],
        }
    }

    fn pair_meta(&self, a: u32, b: u32, weight: f64) -> CellPair {
        let (ax, ay) = self.cell_index(a);
        let (bx, by) = self.cell_index(b);
        let dx = (ax as i64 - bx as i64).unsigned_abs() as f64;
        let dy = (ay as i64 - by as i64).unsigned_abs() as f64;
        let (gx, gy) = ((dx - 1.0).max(0.0), (dy - 1.0).max(0.0));
        let distance = self.w * (gx * gx + gy * gy).sqrt();
        CellPair {
            a,
            b,
            weight,
            singular: distance == 0.0,
            distance,
        }
    }

    /// Enumerate the cell pairs of an interaction region in deterministic
    /// lattice order. Pairs farther apart than `max_distance` are skipped
    /// (kernel support pruning).
    pub fn region_pairs(&self, region: Region, max_distance: f64) -> Vec<CellPair> {
        let mut out = Vec::new();
        match region {
            Region::OmegaOmega => {
                for (i, &a) in self.omega_cells.iter().enumerate() {
                    for &b in &self.omega_cells[i..] {
                        let weight = if a == b { 1.0 } else { 2.0 };
                        let p = self.pair_meta(a, b, weight);
                        if p.distance <= max_distance {
                            out.push(p);
                        }
                    }
                }
            }
            Region::OmegaComplement => {
                for &a in &self.omega_cells {
                    for &b in &self.collar_cells {
                        let p = self.pair_meta(a, b, 1.0);
                        if p.distance <= max_distance {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Function space a grid function lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    /// Values on the closure of Omega only; forms use the interior region only.
    HNuOnOmega,
    /// Values on all truncation-box nodes, extension by zero beyond the box.
    VNuFull,
    /// Vanishes a.e. on the complement: collar coefficients are exactly zero
    /// and the function is identically zero on collar cells (no interpolation
    /// ramp), so boundary-node values produce a genuine jump across the
    /// boundary.
    VNuZeroComplement,
}

/// Nodal basis of a grid function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Hat functions in 1D, bilinear on squares in 2D.
    PiecewiseLinear,
    /// One value per cell.
    PiecewiseConstant,
}

/// Finite-element coefficient vector over a domain's grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub domain: Arc<Domain>,
    pub space: SpaceTag,
    pub basis: Basis,
    /// Coefficients indexed by global node (piecewise-linear) or cell
    /// (piecewise-constant) id; unused entries stay zero.
    pub coeffs: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: Arc<Domain>, space: SpaceTag, basis: Basis) -> Self {
        let len = match basis {
            Basis::PiecewiseLinear => domain.n_nodes(),
            Basis::PiecewiseConstant => domain.n_cells(),
        };
        GridFunction {
            domain,
            space,
            basis,
            coeffs: vec![0.0; len],
        }
    }

    /// Nodal interpolation (or cell-center sampling) of a closed-form function.
    ///
    /// For `VNuZeroComplement` the collar entries represent the zero extension
    /// and stay zero regardless of `f`.
    pub fn sample(
        domain: Arc<Domain>,
        space: SpaceTag,
        basis: Basis,
        f: impl Fn(&[f64]) -> f64,
    ) -> Self {
        let mut g = GridFunction::zeros(domain.clone(), space, basis);
        match basis {
            Basis::PiecewiseLinear => {
                for node in 0..domain.n_nodes() as u32 {
                    let keep = match space {
                        SpaceTag::HNuOnOmega | SpaceTag::VNuZeroComplement => {
                            domain.is_interior_node(node)
                        }
                        SpaceTag::VNuFull => true,
                    };
                    if keep {
                        let x = domain.node_coord(node);
                        g.coeffs[node as usize] = f(&x[..domain.dimension()]);
                    }
                }
            }
            Basis::PiecewiseConstant => {
                for cell in 0..domain.n_cells() as u32 {
                    let keep = match space {
                        SpaceTag::HNuOnOmega | SpaceTag::VNuZeroComplement => {
                            domain.cell_region_of(cell) == CellRegion::Omega
                        }
                        SpaceTag::VNuFull => true,
                    };
                    if keep {
                        let x = domain.cell_center(cell);
                        g.coeffs[cell as usize] = f(&x[..domain.dimension()]);
                    }
                }
            }
        }
        g
    }

    /// Enforce the space invariant; errors when a zero-complement function
    /// carries nonzero collar coefficients.
    pub fn validate(&self) -> Result<()> {
        if self.space == SpaceTag::VNuZeroComplement {
            let bad = match self.basis {
                Basis::PiecewiseLinear => self
                    .domain
                    .collar_nodes()
                    .iter()
                    .any(|&n| self.coeffs[n as usize] != 0.0),
                Basis::PiecewiseConstant => self
                    .domain
                    .collar_cells()
                    .iter()
                    .any(|&c| self.coeffs[c as usize] != 0.0),
            };
            if bad {
                return Err(Error::Domain(
                    "zero-complement function has a nonzero collar coefficient".into(),
                ));
            }
        }
        Ok(())
    }

    /// Whether the function is identically zero on the given cell by its
    /// space semantics (collar cells of zero-complement functions).
    pub fn vanishes_on_cell(&self, cell: u32) -> bool {
        self.space == SpaceTag::VNuZeroComplement
            && self.domain.cell_region_of(cell) == CellRegion::Collar
    }

    /// Local coefficient values on a cell (order of `cell_nodes`);
    /// piecewise-constant functions replicate the cell value.
    pub fn local_values(&self, cell: u32) -> [f64; 4] {
        let mut vals = [0.0; 4];
        if self.vanishes_on_cell(cell) {
            return vals;
        }
        match self.basis {
            Basis::PiecewiseLinear => {
                for (k, n) in self.domain.cell_nodes(cell).into_iter().enumerate() {
                    vals[k] = self.coeffs[n as usize];
                }
            }
            Basis::PiecewiseConstant => {
                let v = self.coeffs[cell as usize];
                vals = [v, v, v, v];
            }
        }
        vals
    }

    /// Point evaluation (multilinear interpolation; zero outside the box and
    /// on collar cells of zero-complement functions).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dom = &self.domain;
        let d = dom.dimension();
        let w = dom.w;
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for ax in 0..d {
            let t = (x[ax] - dom.origin[ax]) / w;
            if t < 0.0 || t > (dom.nodes_per_axis[ax] - 1) as f64 {
                return 0.0;
            }
            let cells = dom.cells_per_axis[ax].max(1);
            let i = (t.floor() as usize).min(cells - 1);
            idx[ax] = i;
            frac[ax] = t - i as f64;
        }
        let cell = (idx[1] * dom.cells_per_axis[0] + idx[0]) as u32;
        if self.vanishes_on_cell(cell) {
            return 0.0;
        }
        let v = self.local_values(cell);
        match (self.basis, d) {
            (Basis::PiecewiseConstant, _) => v[0],
            (Basis::PiecewiseLinear, 1) => v[0] * (1.0 - frac[0]) + v[1] * frac[0],
            (Basis::PiecewiseLinear, _) => {
                let (s, t) = (frac[0], frac[1]);
                v[0] * (1.0 - s) * (1.0 - t)
                    + v[1] * s * (1.0 - t)
                    + v[2] * s * t
                    + v[3] * (1.0 - s) * t
            }
        }
    }

    /// `L^2(Omega)` norm (exact for the basis).
    pub fn l2_norm_omega(&self) -> f64 {
        crate::forms::l2_inner_omega(self, self).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_interval(n: usize, r: f64) -> Arc<Domain> {
        Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 0.0, b: 1.0 },
            n,
            r_trunc: r,
            tail_tol: 1e-10,
        })
        .unwrap()
    }

    pub(crate) fn unit_square(n: usize, r: f64) -> Arc<Domain> {
        Domain::build(DomainSpec {
            geometry: Geometry::Rect {
                x: [0.0, 1.0],
                y: [0.0, 1.0],
            },
            n,
            r_trunc: r,
            tail_tol: 1e-10,
        })
        .unwrap()
    }

    #[test]
    fn interval_grid_layout_matches_expected_partition() {
        let dom = unit_interval(4, 2.0);
        assert_eq!(dom.cell_width(), 0.25);
        assert_eq!(dom.interior_nodes().len(), 5);
        // collar nodes on [-2, 0) and (1, 2]
        assert_eq!(dom.collar_nodes().len(), 12);
        assert_eq!(dom.omega_cells().len(), 4);
        assert_eq!(dom.collar_cells().len(), 12);
        for &n in dom.collar_nodes() {
            let x = dom.node_coord(n)[0];
            assert!(x < 0.0 || x > 1.0);
            assert!((-2.0..=2.0).contains(&x));
        }
        assert_eq!(
            dom.interior_nodes().len() + dom.collar_nodes().len(),
            dom.n_nodes()
        );
        assert_eq!(dom.truncation_margin(), 1.0);
    }

    #[test]
    fn square_grid_has_nine_interior_nodes() {
        let dom = unit_square(2, 2.0);
        assert_eq!(dom.interior_nodes().len(), 9);
        assert_eq!(dom.omega_cells().len(), 4);
        assert_eq!(dom.omega_measure(), 1.0);
    }

    #[test]
    fn degenerate_geometry_rejected() {
        assert!(Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 1.0, b: 1.0 },
            n: 4,
            r_trunc: 2.0,
            tail_tol: 1e-10,
        })
        .is_err());
        assert!(Domain::build(DomainSpec {
            geometry: Geometry::Interval { a: 0.0, b: 1.0 },
            n: 4,
            r_trunc: 0.5,
            tail_tol: 1e-10,
        })
        .is_err());
    }

    #[test]
    fn omega_omega_pair_measure_is_omega_squared() {
        for dom in [unit_interval(2, 2.0), unit_interval(7, 2.5)] {
            let cm = dom.cell_width();
            let total: f64 = dom
                .region_pairs(Region::OmegaOmega, f64::INFINITY)
                .iter()
                .map(|p| p.weight * cm * cm)
                .sum();
            let expected = dom.omega_measure().powi(2);
            assert!((total - expected).abs() < 1e-12, "{total} vs {expected}");
        }
        let dom = unit_square(3, 2.0);
        let cm = dom.cell_width().powi(2);
        let total: f64 = dom
            .region_pairs(Region::OmegaOmega, f64::INFINITY)
            .iter()
            .map(|p| p.weight * cm * cm)
            .sum();
        assert!((total - dom.omega_measure().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn cross_pair_count_is_product_of_cell_counts() {
        let dom = unit_interval(3, 2.0);
        let pairs = dom.region_pairs(Region::OmegaComplement, f64::INFINITY);
        assert_eq!(
            pairs.len(),
            dom.omega_cells().len() * dom.collar_cells().len()
        );
    }

    #[test]
    fn pair_annotations_distinguish_singular_from_separated() {
        let dom = unit_interval(2, 2.0);
        let pairs = dom.region_pairs(Region::OmegaOmega, f64::INFINITY);
        // unordered: (0,0), (0,1), (1,1); all touch
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.singular));
        let dom = unit_interval(4, 2.0);
        let pairs = dom.region_pairs(Region::OmegaOmega, f64::INFINITY);
        let separated: Vec<_> = pairs.iter().filter(|p| !p.singular).collect();
        assert!(!separated.is_empty());
        for p in separated {
            assert!(p.distance > 0.0);
        }
    }

    #[test]
    fn support_pruning_drops_far_pairs() {
        let dom = unit_interval(8, 3.0);
        let all = dom.region_pairs(Region::OmegaComplement, f64::INFINITY).len();
        let pruned = dom.region_pairs(Region::OmegaComplement, 1.0).len();
        assert!(pruned < all);
    }

    #[test]
    fn deterministic_enumeration() {
        let a = unit_interval(5, 2.0);
        let b = unit_interval(5, 2.0);
        let pa = a.region_pairs(Region::OmegaOmega, f64::INFINITY);
        let pb = b.region_pairs(Region::OmegaOmega, f64::INFINITY);
        assert_eq!(pa.len(), pb.len());
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!((x.a, x.b), (y.a, y.b));
        }
    }

    #[test]
    fn sampling_and_interpolation() {
        let dom = unit_interval(4, 2.0);
        let u = GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |x| {
            x[0]
        });
        for (k, &x) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            let node = dom.interior_nodes()[k];
            assert_eq!(u.coeffs[node as usize], x);
        }
        assert!((u.eval(&[0.3]) - 0.3).abs() < 1e-15);
        let one =
            GridFunction::sample(dom.clone(), SpaceTag::VNuFull, Basis::PiecewiseLinear, |_| 1.0);
        assert!(one.coeffs.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn zero_complement_sampling_zeroes_collar() {
        let dom = unit_interval(4, 2.0);
        let bump = GridFunction::sample(
            dom.clone(),
            SpaceTag::VNuZeroComplement,
            Basis::PiecewiseLinear,
            |x| (x[0] * (1.0 - x[0])).max(0.0),
        );
        bump.validate().unwrap();
        for &n in dom.collar_nodes() {
            assert_eq!(bump.coeffs[n as usize], 0.0);
        }
        // sharp zero on collar cells even when boundary nodes are nonzero
        let mut jump = bump.clone();
        for &n in dom.interior_nodes() {
            jump.coeffs[n as usize] = 1.0;
        }
        assert_eq!(jump.eval(&[-0.01]), 0.0);
        assert_eq!(jump.eval(&[0.01]), 1.0);
    }

    #[test]
    fn polygon_domain_l_shape() {
        // unit square minus its upper-right quarter
        let dom = Domain::build(DomainSpec {
            geometry: Geometry::Polygon {
                vertices: vec![
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [1.0, 0.5],
                    [0.5, 0.5],
                    [0.5, 1.0],
                    [0.0, 1.0],
                ],
            },
            n: 4,
            r_trunc: 2.0,
            tail_tol: 1e-10,
        })
        .unwrap();
        assert_eq!(dom.omega_cells().len(), 12); // 16 - 4
        assert!((dom.omega_measure() - 0.75).abs() < 1e-12);
    }
}

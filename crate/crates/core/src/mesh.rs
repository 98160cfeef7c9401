//! Structured triangulations of rectangles and P1 field transfer between them.

use crate::error::{NirbError, Result};

const LOCATE_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn scale(&self) -> f64 {
        self.width().abs().max(self.height().abs()).max(1.0)
    }

    fn on_boundary(&self, x: f64, y: f64) -> bool {
        let tol = LOCATE_TOL * self.scale();
        (x - self.x0).abs() <= tol
            || (x - self.x1).abs() <= tol
            || (y - self.y0).abs() <= tol
            || (y - self.y1).abs() <= tol
    }
}

/// Conforming P1 triangulation of a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    h: f64,
    domain: Rect,
    /// Cell counts when the mesh came from [`TriMesh::structured`].
    grid: Option<(usize, usize)>,
}

impl TriMesh {
    /// Splits each of the `nx * ny` cells into two counter-clockwise triangles
    /// along the lower-left to upper-right diagonal.
    pub fn structured(nx: usize, ny: usize, domain: Rect) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(NirbError::InvalidArgument(format!(
                "cell counts must be positive, got {nx}x{ny}"
            )));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(NirbError::InvalidArgument(format!(
                "domain must have positive width and height: {domain:?}"
            )));
        }
        let dx = domain.width() / nx as f64;
        let dy = domain.height() / ny as f64;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            // exact end coordinates keep boundary nodes exactly on the rectangle
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * dy };
            for i in 0..=nx {
                let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * dx };
                nodes.push([x, y]);
                boundary.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }
        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
        let h = (dx * dx + dy * dy).sqrt();
        Ok(TriMesh {
            nodes,
            triangles,
            boundary,
            h,
            domain,
            grid: Some((nx, ny)),
        })
    }

    /// Builds a mesh from raw parts, checking every invariant.
    ///
    /// Boundary flags and the mesh size are recomputed from the geometry.
    pub fn from_parts(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, domain: Rect) -> Result<Self> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(NirbError::InvalidArgument("mesh needs nodes and triangles".into()));
        }
        let mut h = 0.0f64;
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nodes.len()) {
                return Err(NirbError::InvalidArgument(format!("triangle {k} has an out-of-range vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(NirbError::InvalidArgument(format!("triangle {k} is degenerate")));
            }
            let [a, b, c] = t.map(|v| nodes[v]);
            if signed_area(a, b, c) <= 0.0 {
                return Err(NirbError::InvalidArgument(format!(
                    "triangle {k} is not counter-clockwise"
                )));
            }
            h = h.max(dist(a, b)).max(dist(b, c)).max(dist(a, c));
        }
        let boundary = nodes.iter().map(|p| domain.on_boundary(p[0], p[1])).collect();
        Ok(TriMesh {
            nodes,
            triangles,
            boundary,
            h,
            domain,
            grid: None,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Cell counts of a structured mesh.
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// Vertex coordinates of triangle `k`.
    pub fn vertices(&self, k: usize) -> [[f64; 2]; 3] {
        self.triangles[k].map(|v| self.nodes[v])
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.vertices(k);
        signed_area(a, b, c)
    }

    /// Nodal values of `f`.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Finds the triangle containing `(x, y)` and its barycentric coordinates.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, [f64; 3])> {
        let d = self.domain;
        let tol = LOCATE_TOL * d.scale();
        if x < d.x0 - tol || x > d.x1 + tol || y < d.y0 - tol || y > d.y1 + tol {
            return Err(NirbError::PointOutsideMesh { x, y });
        }
        let x = x.clamp(d.x0, d.x1);
        let y = y.clamp(d.y0, d.y1);
        match self.grid {
            Some((nx, ny)) => {
                let sx = (x - d.x0) / d.width() * nx as f64;
                let sy = (y - d.y0) / d.height() * ny as f64;
                let i = (sx.floor() as usize).min(nx - 1);
                let j = (sy.floor() as usize).min(ny - 1);
                let xi = sx - i as f64;
                let eta = sy - j as f64;
                let cell = j * nx + i;
                if xi >= eta - LOCATE_TOL {
                    // lower triangle (p00, p10, p11)
                    Ok((2 * cell, [1.0 - xi, xi - eta, eta]))
                } else {
                    // upper triangle (p00, p11, p01)
                    Ok((2 * cell + 1, [1.0 - eta, xi, eta - xi]))
                }
            }
            None => {
                for k in 0..self.triangles.len() {
                    let bary = barycentric(self.vertices(k), [x, y]);
                    if bary.iter().all(|&l| l >= -LOCATE_TOL) {
                        return Ok((k, bary));
                    }
                }
                Err(NirbError::PointOutsideMesh { x, y })
            }
        }
    }

    /// Evaluates the P1 interpolant of `field` at `(x, y)`.
    pub fn evaluate(&self, field: &[f64], x: f64, y: f64) -> Result<f64> {
        let (k, bary) = self.locate(x, y)?;
        let t = self.triangles[k];
        Ok(bary[0] * field[t[0]] + bary[1] * field[t[1]] + bary[2] * field[t[2]])
    }

    /// Constant gradients of the three barycentric hat functions on triangle `k`.
    pub fn hat_gradients(&self, k: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.vertices(k);
        let det = 2.0 * signed_area(a, b, c);
        [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ]
    }
}

/// P1 transfer of `src_field` from `src_mesh` onto the nodes of `dst_mesh`.
pub fn interpolate_field(src_mesh: &TriMesh, src_field: &[f64], dst_mesh: &TriMesh) -> Result<Vec<f64>> {
    if src_field.len() != src_mesh.n_nodes() {
        return Err(NirbError::DimensionMismatch {
            what: "source field",
            expected: src_mesh.n_nodes(),
            got: src_field.len(),
        });
    }
    dst_mesh
        .nodes()
        .iter()
        .map(|p| src_mesh.evaluate(src_field, p[0], p[1]))
        .collect()
}

/// Precomputed point-location data for repeated transfers between one mesh pair.
#[derive(Debug, Clone)]
pub struct Transfer {
    weights: Vec<([usize; 3], [f64; 3])>,
    src_nodes: usize,
}

impl Transfer {
    pub fn new(src_mesh: &TriMesh, dst_mesh: &TriMesh) -> Result<Self> {
        let weights = dst_mesh
            .nodes()
            .iter()
            .map(|p| {
                let (k, bary) = src_mesh.locate(p[0], p[1])?;
                Ok((src_mesh.triangles()[k], bary))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Transfer {
            weights,
            src_nodes: src_mesh.n_nodes(),
        })
    }

    pub fn apply(&self, src_field: &[f64]) -> Result<Vec<f64>> {
        if src_field.len() != self.src_nodes {
            return Err(NirbError::DimensionMismatch {
                what: "source field",
                expected: self.src_nodes,
                got: src_field.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .map(|(t, l)| l[0] * src_field[t[0]] + l[1] * src_field[t[1]] + l[2] * src_field[t[2]])
            .collect())
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn barycentric(v: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let area = signed_area(v[0], v[1], v[2]);
    let l0 = signed_area(p, v[1], v[2]) / area;
    let l1 = signed_area(v[0], p, v[2]) / area;
    [l0, l1, 1.0 - l0 - l1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_counts_and_size() {
        let m = TriMesh::structured(1, 1, Rect::unit_square()).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (4, 2));
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);

        let m = TriMesh::structured(2, 2, Rect::unit_square()).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (9, 8));
        assert!((m.h() - 0.5 * 2f64.sqrt()).abs() < 1e-15);

        let m = TriMesh::structured(4, 2, Rect::new(0.0, 2.0, 0.0, 1.0)).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (15, 16));
        assert!((m.h() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn h_matches_max_diameter_and_formula() {
        for n in 1..12 {
            let m = TriMesh::structured(n, n, Rect::unit_square()).unwrap();
            assert!((m.h() - 2f64.sqrt() / n as f64).abs() < 1e-14);
            let rebuilt = TriMesh::from_parts(m.nodes().to_vec(), m.triangles().to_vec(), m.domain()).unwrap();
            assert!((rebuilt.h() - m.h()).abs() < 1e-14);
            assert_eq!(rebuilt.boundary_mask(), m.boundary_mask());
        }
    }

    #[test]
    fn triangles_are_ccw_and_boundary_flags_exact() {
        let m = TriMesh::structured(5, 3, Rect::new(-1.0, 2.0, 0.5, 1.5)).unwrap();
        for k in 0..m.n_triangles() {
            assert!(m.area(k) > 0.0);
        }
        let d = m.domain();
        for (p, &b) in m.nodes().iter().zip(m.boundary_mask()) {
            let on = p[0] == d.x0 || p[0] == d.x1 || p[1] == d.y0 || p[1] == d.y1;
            assert_eq!(on, b);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TriMesh::structured(0, 3, Rect::unit_square()).is_err());
        assert!(TriMesh::structured(2, 2, Rect::new(0.0, 0.0, 0.0, 1.0)).is_err());
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(TriMesh::from_parts(nodes.clone(), vec![[0, 2, 1]], Rect::unit_square()).is_err());
        assert!(TriMesh::from_parts(nodes.clone(), vec![[0, 0, 1]], Rect::unit_square()).is_err());
        assert!(TriMesh::from_parts(nodes, vec![[0, 1, 3]], Rect::unit_square()).is_err());
    }

    #[test]
    fn interpolation_reproduces_affine_fields() {
        let coarse = TriMesh::structured(2, 2, Rect::unit_square()).unwrap();
        let fine = TriMesh::structured(8, 8, Rect::unit_square()).unwrap();
        let f = coarse.sample(|x, y| x + y);
        let g = interpolate_field(&coarse, &f, &fine).unwrap();
        for (p, v) in fine.nodes().iter().zip(&g) {
            assert!((v - (p[0] + p[1])).abs() <= 1e-14);
        }
        let ones = interpolate_field(&fine, &vec![1.0; fine.n_nodes()], &coarse).unwrap();
        assert!(ones.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn interpolation_of_parabola_gives_chord() {
        let m = TriMesh::structured(2, 2, Rect::unit_square()).unwrap();
        let f = m.sample(|x, _| x * x);
        assert!((m.evaluate(&f, 0.25, 0.0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn non_nested_transfer_and_outside_points() {
        let a = TriMesh::structured(3, 3, Rect::unit_square()).unwrap();
        let b = TriMesh::structured(7, 5, Rect::unit_square()).unwrap();
        let f = a.sample(|x, y| 2.0 - 3.0 * x + 0.5 * y);
        let t = Transfer::new(&a, &b).unwrap();
        let g = t.apply(&f).unwrap();
        for (p, v) in b.nodes().iter().zip(&g) {
            assert!((v - (2.0 - 3.0 * p[0] + 0.5 * p[1])).abs() < 1e-14);
        }
        assert!(matches!(a.locate(1.0 + 1e-6, 0.5), Err(NirbError::PointOutsideMesh { .. })));
        assert!(a.locate(1.0 + 1e-14, 0.5).is_ok());
        let wide = TriMesh::structured(2, 2, Rect::new(0.0, 2.0, 0.0, 1.0)).unwrap();
        assert!(interpolate_field(&a, &f, &wide).is_err());
    }

    #[test]
    fn unstructured_location_fallback() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let m = TriMesh::from_parts(nodes, vec![[0, 1, 2], [1, 3, 2]], Rect::unit_square()).unwrap();
        let f = m.sample(|x, y| 1.0 + x - y);
        assert!((m.evaluate(&f, 0.7, 0.6).unwrap() - 1.1).abs() < 1e-14);
    }
}

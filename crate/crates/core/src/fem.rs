//! P1 finite elements: assembly, loads, norms, and the Ritz projection.

use std::sync::Arc;

use crate::error::{NirbError, Result};
use crate::linalg::{cg_solve, CsrMatrix};
use crate::mesh::TriMesh;

/// Homogeneous boundary condition applied to the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    DirichletZero,
    NeumannNatural,
}

/// Mass and stiffness matrices of one mesh together with the free-dof set.
#[derive(Debug, Clone)]
pub struct AssembledForms {
    mesh: Arc<TriMesh>,
    bc: BoundaryCondition,
    /// `M_ij = ∫ φ_i φ_j` on all nodes.
    pub mass: CsrMatrix,
    /// `K_ij = ∫ ∇φ_i · ∇φ_j` on all nodes.
    pub stiffness: CsrMatrix,
    /// Non-Dirichlet node indices (all nodes for Neumann).
    pub free_dofs: Vec<usize>,
    pub mass_free: Option<CsrMatrix>,
    pub stiffness_free: Option<CsrMatrix>,
    /// Row sums of the mass matrix.
    pub lumped: Vec<f64>,
}

/// Edge-midpoint rule, exact for quadratics: barycentric points and weights
/// relative to the element area.
pub const MIDPOINT_RULE: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Seven-point rule of degree five.
fn degree5_rule() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 40.0),
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}

fn point(v: &[[f64; 2]; 3], l: &[f64; 3]) -> (f64, f64) {
    (
        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
    )
}

pub fn assemble(mesh: Arc<TriMesh>, bc: BoundaryCondition) -> Result<AssembledForms> {
    let nt = mesh.n_triangles();
    let mut mass_t = Vec::with_capacity(9 * nt);
    let mut stiff_t = Vec::with_capacity(9 * nt);
    for k in 0..nt {
        let tri = mesh.triangles()[k];
        let area = mesh.area(k);
        let grads = mesh.hat_gradients(k);
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                let s = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                mass_t.push((tri[a], tri[b], m));
                stiff_t.push((tri[a], tri[b], s));
            }
        }
    }
    let n = mesh.n_nodes();
    let mass = CsrMatrix::from_triplets(n, n, &mass_t)?;
    let mut stiffness = CsrMatrix::from_triplets(n, n, &stiff_t)?;
    // exact storage symmetry, independent of rounding in the element products
    stiffness = symmetrize(&stiffness)?;
    let free_dofs: Vec<usize> = match bc {
        BoundaryCondition::DirichletZero => (0..n).filter(|&i| !mesh.boundary_mask()[i]).collect(),
        BoundaryCondition::NeumannNatural => (0..n).collect(),
    };
    let (mass_free, stiffness_free) = if free_dofs.is_empty() {
        (None, None)
    } else {
        (Some(mass.restrict(&free_dofs)?), Some(stiffness.restrict(&free_dofs)?))
    };
    let lumped = mass.row_sums();
    Ok(AssembledForms {
        mesh,
        bc,
        mass,
        stiffness,
        free_dofs,
        mass_free,
        stiffness_free,
        lumped,
    })
}

fn symmetrize(m: &CsrMatrix) -> Result<CsrMatrix> {
    let mut t = Vec::with_capacity(m.nnz());
    for r in 0..m.nrows() {
        for (c, v) in m.row(r) {
            let w = m.get(c, r).unwrap_or(0.0);
            t.push((r, c, 0.5 * (v + w)));
        }
    }
    CsrMatrix::from_triplets(m.nrows(), m.ncols(), &t)
}

impl AssembledForms {
    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<TriMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Values of `full` on the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&i| full[i]).collect()
    }

    /// Full nodal vector from free-dof values, zero on eliminated nodes.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_nodes()];
        for (&i, &v) in self.free_dofs.iter().zip(free) {
            full[i] = v;
        }
        full
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_nodes() {
            return Err(NirbError::DimensionMismatch {
                what: "nodal vector",
                expected: self.n_nodes(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// L2 inner product `u^T M v`.
    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.bilinear(u, v)
    }

    /// H1 seminorm inner product `u^T K v`.
    pub fn h1_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.bilinear(u, v)
    }
}

/// `b_i ≈ ∫ f(t, x, y) φ_i` with the edge-midpoint rule.
pub fn load_vector<F>(mesh: &TriMesh, f: F, t: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, f64) -> f64,
{
    let mut b = vec![0.0; mesh.n_nodes()];
    for k in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[k];
        let v = mesh.vertices(k);
        let area = mesh.area(k);
        for (l, w) in MIDPOINT_RULE.iter() {
            let (x, y) = point(&v, l);
            let fv = f(t, x, y);
            if !fv.is_finite() {
                return Err(NirbError::NonFinite {
                    what: "source term",
                    location: format!("(t={t}, x={x}, y={y})"),
                });
            }
            for a in 0..3 {
                b[tri[a]] += w * area * l[a] * fv;
            }
        }
    }
    Ok(b)
}

/// `(sqrt(v^T M v), sqrt(v^T K v))`.
pub fn norms(forms: &AssembledForms, v: &[f64]) -> Result<(f64, f64)> {
    forms.check_len(v)?;
    let l2 = forms.l2_inner(v, v).max(0.0).sqrt();
    let h1 = forms.h1_inner(v, v).max(0.0).sqrt();
    Ok((l2, h1))
}

/// Full H1 norm `sqrt(|v|_L2^2 + |∇v|_L2^2)`.
pub fn h1_full_norm(forms: &AssembledForms, v: &[f64]) -> Result<f64> {
    let (l2, h1) = norms(forms, v)?;
    Ok((l2 * l2 + h1 * h1).sqrt())
}

/// Ritz projection onto the Dirichlet P1 space: `K x = (∇u, ∇φ)` on the free dofs.
pub fn ritz_projection<G>(forms: &AssembledForms, grad_u: G) -> Result<Vec<f64>>
where
    G: Fn(f64, f64) -> (f64, f64),
{
    if forms.bc() != BoundaryCondition::DirichletZero {
        return Err(NirbError::InvalidArgument("Ritz projection needs Dirichlet forms".into()));
    }
    let g = ritz_load(forms.mesh(), &grad_u);
    let Some(k) = forms.stiffness_free.as_ref() else {
        return Ok(vec![0.0; forms.n_nodes()]);
    };
    let rhs = forms.restrict(&g);
    let sol = cg_solve(k, &rhs, None, 1e-13, 10 * rhs.len() + 100)?;
    Ok(forms.extend(&sol.x))
}

/// `g_i = ∫ ∇u · ∇φ_i`, integrated with the degree-5 rule.
pub fn ritz_load<G>(mesh: &TriMesh, grad_u: &G) -> Vec<f64>
where
    G: Fn(f64, f64) -> (f64, f64),
{
    let rule = degree5_rule();
    let mut g = vec![0.0; mesh.n_nodes()];
    for k in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[k];
        let v = mesh.vertices(k);
        let area = mesh.area(k);
        let grads = mesh.hat_gradients(k);
        let (mut ix, mut iy) = (0.0, 0.0);
        for (l, w) in rule.iter() {
            let (x, y) = point(&v, l);
            let (gx, gy) = grad_u(x, y);
            ix += w * area * gx;
            iy += w * area * gy;
        }
        for a in 0..3 {
            g[tri[a]] += grads[a][0] * ix + grads[a][1] * iy;
        }
    }
    g
}

/// Exact-reference error integrals `(|u - v_h|_L2, |∇(u - v_h)|_L2)` using the
/// degree-5 rule on every element.
pub fn analytic_errors<U, G>(mesh: &TriMesh, v: &[f64], u: U, grad_u: G) -> Result<(f64, f64)>
where
    U: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> (f64, f64),
{
    if v.len() != mesh.n_nodes() {
        return Err(NirbError::DimensionMismatch {
            what: "nodal vector",
            expected: mesh.n_nodes(),
            got: v.len(),
        });
    }
    let rule = degree5_rule();
    let (mut l2, mut h1) = (0.0, 0.0);
    for k in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[k];
        let vert = mesh.vertices(k);
        let area = mesh.area(k);
        let grads = mesh.hat_gradients(k);
        let gh = [
            (0..3).map(|a| v[tri[a]] * grads[a][0]).sum::<f64>(),
            (0..3).map(|a| v[tri[a]] * grads[a][1]).sum::<f64>(),
        ];
        for (l, w) in rule.iter() {
            let (x, y) = point(&vert, l);
            let vh = l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]];
            let (gx, gy) = grad_u(x, y);
            l2 += w * area * (u(x, y) - vh).powi(2);
            h1 += w * area * ((gx - gh[0]).powi(2) + (gy - gh[1]).powi(2));
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// `(|u|_L2, |∇u|_L2)` of an analytic function with the degree-5 rule.
pub fn analytic_norms<U, G>(mesh: &TriMesh, u: U, grad_u: G) -> (f64, f64)
where
    U: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> (f64, f64),
{
    analytic_errors(mesh, &vec![0.0; mesh.n_nodes()], u, grad_u).expect("length matches")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn unit_triangle() -> Arc<TriMesh> {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        Arc::new(TriMesh::from_parts(nodes, vec![[0, 1, 2]], Rect::unit_square()).unwrap())
    }

    fn square(n: usize) -> Arc<TriMesh> {
        Arc::new(TriMesh::structured(n, n, Rect::unit_square()).unwrap())
    }

    #[test]
    fn element_matrices_of_reference_triangle() {
        let f = assemble(unit_triangle(), BoundaryCondition::NeumannNatural).unwrap();
        let m = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        let k = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.mass.get(i, j).unwrap() - m[i][j] / 24.0).abs() < 1e-16);
                assert!((f.stiffness.get(i, j).unwrap() - 0.5 * k[i][j]).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn mass_total_and_kernel() {
        for n in [1, 3, 8] {
            let f = assemble(square(n), BoundaryCondition::NeumannNatural).unwrap();
            let total: f64 = f.mass.values().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let k1 = f.stiffness.matvec(&vec![1.0; f.n_nodes()]);
            assert!(k1.iter().all(|v| v.abs() < 1e-12));
            assert!(f.mass.is_symmetric() && f.stiffness.is_symmetric());
        }
        let d = assemble(square(4), BoundaryCondition::DirichletZero).unwrap();
        assert_eq!(d.free_dofs.len(), 9);
        assert_eq!(d.stiffness_free.as_ref().unwrap().nrows(), 9);
    }

    #[test]
    fn loads() {
        let mesh = square(5);
        let f = assemble(mesh.clone(), BoundaryCondition::NeumannNatural).unwrap();
        let ones = load_vector(&mesh, |_, _, _| 1.0, 0.0).unwrap();
        for (b, l) in ones.iter().zip(&f.lumped) {
            assert!((b - l).abs() < 1e-15);
        }
        assert!((ones.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let affine = load_vector(&mesh, |t, x, y| 1.0 + 2.0 * x - 3.0 * y + t, 0.5).unwrap();
        let nodal = mesh.sample(|x, y| 1.5 + 2.0 * x - 3.0 * y);
        let mf = f.mass.matvec(&nodal);
        for (a, b) in affine.iter().zip(&mf) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(load_vector(&mesh, |_, _, _| 0.0, 0.0).unwrap().iter().all(|&v| v == 0.0));
        let err = load_vector(&mesh, |_, x, _| 1.0 / (x - x), 0.0).unwrap_err();
        assert!(matches!(err, NirbError::NonFinite { .. }));
    }

    #[test]
    fn norms_examples() {
        let mesh = square(6);
        let f = assemble(mesh.clone(), BoundaryCondition::NeumannNatural).unwrap();
        let (l2, h1) = norms(&f, &vec![1.0; f.n_nodes()]).unwrap();
        assert!((l2 - 1.0).abs() < 1e-12 && h1.abs() < 1e-6);
        assert_eq!(norms(&f, &vec![0.0; f.n_nodes()]).unwrap(), (0.0, 0.0));
        let (_, h1) = norms(&f, &mesh.sample(|x, y| x + y)).unwrap();
        assert!((h1 - 2f64.sqrt()).abs() < 1e-12);
        assert!(norms(&f, &[1.0]).is_err());
    }

    #[test]
    fn ritz_projection_is_identity_on_p1() {
        let mesh = square(6);
        let f = assemble(mesh.clone(), BoundaryCondition::DirichletZero).unwrap();
        let v = mesh.sample(|x, y| x * (1.0 - x) * y * (1.0 - y) * (1.0 + x));
        let grad = |x: f64, y: f64| {
            let (k, _) = mesh.locate(x, y).unwrap();
            let tri = mesh.triangles()[k];
            let g = mesh.hat_gradients(k);
            (
                (0..3).map(|a| v[tri[a]] * g[a][0]).sum(),
                (0..3).map(|a| v[tri[a]] * g[a][1]).sum(),
            )
        };
        let p = ritz_projection(&f, grad).unwrap();
        for (a, b) in p.iter().zip(&v) {
            assert!((a - b).abs() < 1e-10);
        }
        let z = ritz_projection(&f, |_, _| (0.0, 0.0)).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn analytic_error_of_interpolant_is_small_for_affine() {
        let mesh = square(4);
        let v = mesh.sample(|x, y| 2.0 * x - y);
        let (l2, h1) = analytic_errors(&mesh, &v, |x, y| 2.0 * x - y, |_, _| (2.0, -1.0)).unwrap();
        assert!(l2 < 1e-14 && h1 < 1e-14);
        let (l2, h1) = analytic_norms(&mesh, |x, y| x * y, |x, y| (y, x));
        assert!((l2 - 1.0 / 3.0).abs() < 1e-14);
        assert!((h1 - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }
}

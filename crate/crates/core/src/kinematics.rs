//! Linear-triangle meshes, measured snapshots and the continuum kinematics
//! (deformation gradient, invariants, principal stretches) under plane strain.
//!
//! Degrees of freedom are numbered `2 * node + component`.

use serde::{Deserialize, Serialize};

use crate::dual::Real;
use crate::error::{Error, Result};

/// 3×3 tensor stored row-major, `t[i][j]`.
pub type Tensor3<T = f64> = [[T; 3]; 3];

/// Index of a global degree of freedom.
#[inline]
pub fn dof(node: usize, component: usize) -> usize {
    2 * node + component
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionGroup {
    pub label: String,
    pub dofs: Vec<usize>,
}

/// Partition of the nodal degrees of freedom.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DofSets {
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub reaction_groups: Vec<ReactionGroup>,
}

impl DofSets {
    pub fn n_reactions(&self) -> usize {
        self.reaction_groups.len()
    }
}

/// Reference mesh of linear triangles.
#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    shape_gradients: Vec<[[f64; 2]; 3]>,
    areas: Vec<f64>,
    dofs: DofSets,
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    free_dofs: Vec<usize>,
    fixed_dofs: Vec<usize>,
    reaction_groups: Vec<ReactionGroup>,
}

impl Mesh {
    /// Builds a mesh and precomputes shape-function gradients and areas.
    ///
    /// Fails if an element is degenerate or clockwise, if free and fixed
    /// sets do not partition the DOFs, or if reaction groups overlap or
    /// reference non-fixed DOFs.
    pub fn new(nodes: Vec<[f64; 2]>, elements: Vec<[usize; 3]>, dofs: DofSets) -> Result<Self> {
        let n_dof = 2 * nodes.len();
        let mut shape_gradients = Vec::with_capacity(elements.len());
        let mut areas = Vec::with_capacity(elements.len());
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&a| a >= nodes.len()) {
                return Err(Error::Mesh(format!("element {e} references a missing node")));
            }
            let (grads, area) = triangle_gradients(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "element {e} has non-positive signed area {area:e}"
                )));
            }
            shape_gradients.push(grads);
            areas.push(area);
        }

        let mut role = vec![0u8; n_dof];
        for &d in &dofs.free {
            if d >= n_dof || role[d] != 0 {
                return Err(Error::Mesh(format!("free DOF {d} out of range or repeated")));
            }
            role[d] = 1;
        }
        for &d in &dofs.fixed {
            if d >= n_dof || role[d] != 0 {
                return Err(Error::Mesh(format!("fixed DOF {d} out of range or also free")));
            }
            role[d] = 2;
        }
        if role.iter().any(|&r| r == 0) {
            return Err(Error::Mesh("free and fixed DOF sets do not cover every DOF".into()));
        }
        let mut grouped = vec![false; n_dof];
        for g in &dofs.reaction_groups {
            for &d in &g.dofs {
                if d >= n_dof || role[d] != 2 {
                    return Err(Error::Mesh(format!(
                        "reaction group '{}' contains non-fixed DOF {d}",
                        g.label
                    )));
                }
                if grouped[d] {
                    return Err(Error::Mesh(format!("DOF {d} belongs to two reaction groups")));
                }
                grouped[d] = true;
            }
        }

        Ok(Self {
            nodes,
            elements,
            shape_gradients,
            areas,
            dofs,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }
    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }
    /// `∇N^a` of the three element nodes, per element.
    pub fn shape_gradients(&self) -> &[[[f64; 2]; 3]] {
        &self.shape_gradients
    }
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }
    pub fn dofs(&self) -> &DofSets {
        &self.dofs
    }
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }
    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }
    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Replaces the DOF partition, re-running validation.
    pub fn with_dofs(self, dofs: DofSets) -> Result<Self> {
        Mesh::new(self.nodes, self.elements, dofs)
    }

    /// Mean length over all element edges.
    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        for tri in &self.elements {
            for k in 0..3 {
                let p = self.nodes[tri[k]];
                let q = self.nodes[tri[(k + 1) % 3]];
                sum += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            }
        }
        sum / (3 * self.elements.len()) as f64
    }

    /// Lumped nodal masses `m^a = ∫ ρ N^a dV` (one third of each element).
    pub fn lumped_masses(&self, density: f64) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        for (tri, area) in self.elements.iter().zip(&self.areas) {
            for &a in tri {
                m[a] += density * area / 3.0;
            }
        }
        m
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MeshFile {
            nodes: self.nodes.clone(),
            elements: self.elements.clone(),
            free_dofs: self.dofs.free.clone(),
            fixed_dofs: self.dofs.fixed.clone(),
            reaction_groups: self.dofs.reaction_groups.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(s)?;
        Mesh::new(
            f.nodes,
            f.elements,
            DofSets {
                free: f.free_dofs,
                fixed: f.fixed_dofs,
                reaction_groups: f.reaction_groups,
            },
        )
    }
}

/// Shape-function gradients and signed area of a linear triangle.
pub fn triangle_gradients(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> ([[f64; 2]; 3], f64) {
    let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let inv = 1.0 / two_a;
    let grads = [
        [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
        [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
        [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
    ];
    (grads, 0.5 * two_a)
}

/// Nodal measurements at one time instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time_index: usize,
    pub displacements: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accelerations: Option<Vec<[f64; 2]>>,
    pub reactions: Vec<f64>,
}

impl Snapshot {
    pub fn zeros(mesh: &Mesh, time_index: usize) -> Self {
        Self {
            time_index,
            displacements: vec![[0.0; 2]; mesh.n_nodes()],
            accelerations: None,
            reactions: vec![0.0; mesh.dofs().n_reactions()],
        }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.displacements.len() != mesh.n_nodes() {
            return Err(Error::Shape(format!(
                "snapshot {} has {} displacements for {} nodes",
                self.time_index,
                self.displacements.len(),
                mesh.n_nodes()
            )));
        }
        if let Some(acc) = &self.accelerations {
            if acc.len() != mesh.n_nodes() {
                return Err(Error::Shape(format!(
                    "snapshot {} has accelerations for {} of {} nodes",
                    self.time_index,
                    acc.len(),
                    mesh.n_nodes()
                )));
            }
        }
        if self.reactions.len() != mesh.dofs().n_reactions() {
            return Err(Error::Shape(format!(
                "snapshot {} has {} reactions, mesh defines {} groups",
                self.time_index,
                self.reactions.len(),
                mesh.dofs().n_reactions()
            )));
        }
        Ok(())
    }

    /// Displacement at a global DOF index.
    #[inline]
    pub fn u(&self, dof: usize) -> f64 {
        self.displacements[dof / 2][dof % 2]
    }
}

/// Snapshot files are a JSON array ordered by time index.
pub fn snapshots_to_json(snapshots: &[Snapshot]) -> Result<String> {
    Ok(serde_json::to_string(snapshots)?)
}

pub fn snapshots_from_json(s: &str) -> Result<Vec<Snapshot>> {
    let mut snaps: Vec<Snapshot> = serde_json::from_str(s)?;
    snaps.sort_by_key(|s| s.time_index);
    Ok(snaps)
}

/// Two in-plane fiber directions (unit vectors, zero third component).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberPair {
    pub a1: [f64; 3],
    pub a2: [f64; 3],
}

impl FiberPair {
    pub fn new(a1: [f64; 3], a2: [f64; 3]) -> Result<Self> {
        for a in [a1, a2] {
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            if (n - 1.0).abs() > 1e-12 || a[2] != 0.0 {
                return Err(Error::Domain(format!(
                    "fiber {a:?} must be an in-plane unit vector"
                )));
            }
        }
        Ok(Self { a1, a2 })
    }

    /// Fibers at `+angle` and `-angle` degrees from the x₁ axis.
    pub fn symmetric_degrees(angle: f64) -> Self {
        let (s, c) = angle.to_radians().sin_cos();
        Self {
            a1: [c, s, 0.0],
            a2: [c, -s, 0.0],
        }
    }
}

/// Isotropic invariants of `C = FᵀF` and their unimodular counterparts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariants<T = f64> {
    pub i1: T,
    pub i2: T,
    pub i3: T,
    pub j: T,
    pub i1_bar: T,
    pub i2_bar: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberInvariants<T = f64> {
    pub j4: T,
    pub j6: T,
    pub j4_bar: T,
    pub j6_bar: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformationState<T = f64> {
    pub f: Tensor3<T>,
    pub invariants: Invariants<T>,
    pub fiber_invariants: Option<FiberInvariants<T>>,
}

/// Plane-strain embedding of an in-plane 2×2 gradient (`F₃₃ = 1`).
pub fn plane_strain<T: Real>(f11: T, f12: T, f21: T, f22: T) -> Tensor3<T> {
    let z = T::cst(0.0);
    [[f11, f12, z], [f21, f22, z], [z, z, T::cst(1.0)]]
}

pub fn identity() -> Tensor3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn det3<T: Real>(f: &Tensor3<T>) -> T {
    f[0][0] * (f[1][1] * f[2][2] - f[1][2] * f[2][1]) - f[0][1] * (f[1][0] * f[2][2] - f[1][2] * f[2][0])
        + f[0][2] * (f[1][0] * f[2][1] - f[1][1] * f[2][0])
}

/// Right Cauchy-Green tensor `C = FᵀF`.
pub fn right_cauchy_green<T: Real>(f: &Tensor3<T>) -> Tensor3<T> {
    let mut c = [[T::cst(0.0); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let mut s = T::cst(0.0);
            for k in 0..3 {
                s += f[k][i] * f[k][j];
            }
            c[i][j] = s;
            c[j][i] = s;
        }
    }
    c
}

fn fiber_stretch<T: Real>(c: &Tensor3<T>, a: &[f64; 3]) -> T {
    let mut s = T::cst(0.0);
    for i in 0..3 {
        for j in 0..3 {
            if a[i] != 0.0 && a[j] != 0.0 {
                s += c[i][j] * (a[i] * a[j]);
            }
        }
    }
    s
}

/// Invariants without the admissibility check; `det F` must be positive.
pub fn deformation_state<T: Real>(f: &Tensor3<T>, fibers: Option<&FiberPair>) -> DeformationState<T> {
    let c = right_cauchy_green(f);
    let i1 = c[0][0] + c[1][1] + c[2][2];
    let mut tr_c2 = T::cst(0.0);
    for i in 0..3 {
        for j in 0..3 {
            tr_c2 += c[i][j] * c[j][i];
        }
    }
    let i2 = (i1 * i1 - tr_c2) * 0.5;
    let j = det3(f);
    let j_m23 = j.cbrt().powi(2).recip();
    let invariants = Invariants {
        i1,
        i2,
        i3: j * j,
        j,
        i1_bar: j_m23 * i1,
        i2_bar: j_m23 * j_m23 * i2,
    };
    let fiber_invariants = fibers.map(|fp| {
        let j4 = fiber_stretch(&c, &fp.a1);
        let j6 = fiber_stretch(&c, &fp.a2);
        FiberInvariants {
            j4,
            j6,
            j4_bar: j_m23 * j4,
            j6_bar: j_m23 * j6,
        }
    });
    DeformationState {
        f: *f,
        invariants,
        fiber_invariants,
    }
}

/// Strain invariants of `F`; fails unless `det F > 0`.
pub fn invariants(f: &Tensor3, fibers: Option<&FiberPair>) -> Result<DeformationState> {
    let det = det3(f);
    if !(det > 0.0) {
        return Err(Error::Domain(format!("det(F) = {det:e} is not positive")));
    }
    Ok(deformation_state(f, fibers))
}

/// Element deformation gradient `F = I + Σₐ uᵃ ⊗ ∇Nᵃ`, embedded in 3D.
pub fn deformation_gradient(mesh: &Mesh, snapshot: &Snapshot, element: usize) -> Result<Tensor3> {
    let tri = mesh
        .elements()
        .get(element)
        .ok_or_else(|| Error::Mesh(format!("element index {element} out of range")))?;
    let grads = &mesh.shape_gradients()[element];
    let mut h = [[0.0; 2]; 2];
    for (k, &a) in tri.iter().enumerate() {
        let u = snapshot.displacements[a];
        if !(u[0].is_finite() && u[1].is_finite()) {
            return Err(Error::Domain(format!("non-finite displacement at node {a}")));
        }
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] += u[i] * grads[k][j];
            }
        }
    }
    let f = plane_strain(1.0 + h[0][0], h[0][1], h[1][0], 1.0 + h[1][1]);
    let det = det3(&f);
    if !(det > 0.0) {
        return Err(Error::NonPhysicalDeformation { element, det });
    }
    Ok(f)
}

/// Below this value a negative discriminant is treated as round-off and clamped.
pub const DISCRIMINANT_TOLERANCE: f64 = 1e-10;

/// Unimodular principal stretches `(λ̃₁, λ̃₂, λ̃₃)` of a plane-strain state,
/// recovered from `(Ĩ₁, J)` via the characteristic polynomial of `C`.
pub fn principal_stretches(i1_bar: f64, j: f64) -> Result<[f64; 3]> {
    if !(j > 0.0) {
        return Err(Error::Kinematics(format!("J = {j:e} must be positive")));
    }
    let j23 = j.cbrt().powi(2);
    let s = i1_bar - 1.0 / j23;
    let mut disc = s * s - 4.0 * j23;
    if disc < 0.0 {
        if disc < -DISCRIMINANT_TOLERANCE {
            return Err(Error::Kinematics(format!(
                "invariant pair (Ĩ₁ = {i1_bar}, J = {j}) is not a plane-strain state (discriminant {disc:e})"
            )));
        }
        disc = 0.0;
    }
    let root = disc.sqrt();
    let l1 = (0.5 * (s + root)).sqrt();
    let l2 = (0.5 * (s - root)).max(0.0).sqrt();
    Ok([l1, l2, 1.0 / j.cbrt()])
}

/// In-plane displacement gradient `[F₁₁, F₁₂, F₂₁, F₂₂]` of an element from
/// a nodal displacement array; no admissibility check.
#[inline]
pub fn element_inplane_f(grads: &[[f64; 2]; 3], tri: &[usize; 3], displacements: &[[f64; 2]]) -> [f64; 4] {
    let mut f = [1.0, 0.0, 0.0, 1.0];
    for (k, &a) in tri.iter().enumerate() {
        let u = displacements[a];
        f[0] += u[0] * grads[k][0];
        f[1] += u[0] * grads[k][1];
        f[2] += u[1] * grads[k][0];
        f[3] += u[1] * grads[k][1];
    }
    f
}

/// The invariants every energy in this crate depends on, in the order
/// `[Ĩ₁, Ĩ₂, J, J̃₄, J̃₆]`, together with their in-plane derivatives
/// `∂v/∂[F₁₁, F₁₂, F₂₁, F₂₂]`. Fiber entries are zero without fibers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedInvariants {
    pub values: [f64; 5],
    pub gradients: [[f64; 4]; 5],
}

/// Closed-form reduced invariants of a plane-strain state; `J` must be positive.
pub fn reduced_invariants(f: [f64; 4], fibers: Option<&FiberPair>) -> ReducedInvariants {
    let [f11, f12, f21, f22] = f;
    let j = f11 * f22 - f12 * f21;
    // cofactor = J F⁻ᵀ
    let cof = [f22, -f21, -f12, f11];
    let c11 = f11 * f11 + f21 * f21;
    let c12 = f11 * f12 + f21 * f22;
    let c22 = f12 * f12 + f22 * f22;
    let i1 = c11 + c22 + 1.0;
    let tr_c2 = c11 * c11 + 2.0 * c12 * c12 + c22 * c22 + 1.0;
    let i2 = 0.5 * (i1 * i1 - tr_c2);
    let j_m23 = 1.0 / (j.cbrt() * j.cbrt());
    let i1b = j_m23 * i1;
    let i2b = j_m23 * j_m23 * i2;
    // F C, in-plane block
    let fc = [
        f11 * c11 + f12 * c12,
        f11 * c12 + f12 * c22,
        f21 * c11 + f22 * c12,
        f21 * c12 + f22 * c22,
    ];
    let mut gradients = [[0.0; 4]; 5];
    for k in 0..4 {
        let cof_over_j = cof[k] / j;
        gradients[0][k] = j_m23 * 2.0 * f[k] - (2.0 / 3.0) * i1b * cof_over_j;
        gradients[1][k] = j_m23 * j_m23 * 2.0 * (i1 * f[k] - fc[k]) - (4.0 / 3.0) * i2b * cof_over_j;
        gradients[2][k] = cof[k];
    }
    let mut values = [i1b, i2b, j, 0.0, 0.0];
    if let Some(fp) = fibers {
        for (slot, a) in [(3, fp.a1), (4, fp.a2)] {
            let fa = [f11 * a[0] + f12 * a[1], f21 * a[0] + f22 * a[1]];
            let jb = j_m23 * (fa[0] * fa[0] + fa[1] * fa[1]);
            values[slot] = jb;
            for (k, (i, l)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                gradients[slot][k] = j_m23 * 2.0 * fa[i] * a[l] - (2.0 / 3.0) * jb * cof[k] / j;
            }
        }
    }
    ReducedInvariants { values, gradients }
}

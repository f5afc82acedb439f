//! Element-level force and stiffness assembly and the displacement-controlled
//! quasi-static Newton solver.

use rayon::prelude::*;

use super::banded::BandMatrix;
use super::geometry::load_pattern;
use super::material::BenchmarkMaterial;
use super::LoadingProgram;
use crate::error::{Error, Result};
use crate::kinematics::{element_inplane_f, Mesh, Snapshot};

/// Internal nodal forces `f = ∫ P ∇N dV` over all DOFs.
///
/// Fails with the element index if any element is inverted.
pub fn internal_forces(mesh: &Mesh, material: &BenchmarkMaterial, disp: &[[f64; 2]]) -> Result<Vec<f64>> {
    let mut f = vec![0.0; mesh.n_dofs()];
    let mut buf = vec![[0.0; 6]; mesh.n_elements()];
    internal_forces_into(mesh, material, disp, &mut buf, &mut f)?;
    Ok(f)
}

/// Buffered variant of [`internal_forces`] for time stepping.
pub(crate) fn internal_forces_into(
    mesh: &Mesh,
    material: &BenchmarkMaterial,
    disp: &[[f64; 2]],
    buf: &mut [[f64; 6]],
    out: &mut [f64],
) -> Result<()> {
    let elements = mesh.elements();
    let grads = mesh.shape_gradients();
    let areas = mesh.areas();
    buf.par_iter_mut().enumerate().try_for_each(|(e, fe)| -> Result<()> {
        let f2 = element_inplane_f(&grads[e], &elements[e], disp);
        let det = f2[0] * f2[3] - f2[1] * f2[2];
        if !(det > 0.0) {
            return Err(Error::NonPhysicalDeformation { element: e, det });
        }
        let p = material.stress(f2)?;
        let g = &grads[e];
        for a in 0..3 {
            for i in 0..2 {
                fe[2 * a + i] = areas[e] * (p[2 * i] * g[a][0] + p[2 * i + 1] * g[a][1]);
            }
        }
        Ok(())
    })?;
    out.fill(0.0);
    for (tri, fe) in elements.iter().zip(buf.iter()) {
        for a in 0..3 {
            out[2 * tri[a]] += fe[2 * a];
            out[2 * tri[a] + 1] += fe[2 * a + 1];
        }
    }
    Ok(())
}

/// Element stiffness `K[(a,i),(b,k)] = A Σ_jl D[ij][kl] ∇_j Nᵃ ∇_l Nᵇ`.
fn element_stiffness(d: &[[f64; 4]; 4], g: &[[f64; 2]; 3], area: f64) -> [[f64; 6]; 6] {
    let mut ke = [[0.0; 6]; 6];
    for a in 0..3 {
        for i in 0..2 {
            for b in 0..3 {
                for k in 0..2 {
                    let mut s = 0.0;
                    for j in 0..2 {
                        for l in 0..2 {
                            s += d[2 * i + j][2 * k + l] * g[a][j] * g[b][l];
                        }
                    }
                    ke[2 * a + i][2 * b + k] = area * s;
                }
            }
        }
    }
    ke
}

/// Map from global DOF to position in the free-DOF system.
#[derive(Clone, Debug)]
pub struct FreeIndex {
    pub index: Vec<Option<usize>>,
    pub n_free: usize,
    pub bandwidth: usize,
}

impl FreeIndex {
    pub fn new(mesh: &Mesh) -> Self {
        let mut index = vec![None; mesh.n_dofs()];
        for (k, &d) in mesh.dofs().free.iter().enumerate() {
            index[d] = Some(k);
        }
        let mut bandwidth = 0;
        for tri in mesh.elements() {
            let ids: Vec<usize> = tri
                .iter()
                .flat_map(|&a| [2 * a, 2 * a + 1])
                .filter_map(|d| index[d])
                .collect();
            if let (Some(lo), Some(hi)) = (ids.iter().min(), ids.iter().max()) {
                bandwidth = bandwidth.max(hi - lo);
            }
        }
        Self {
            n_free: mesh.dofs().free.len(),
            index,
            bandwidth,
        }
    }
}

struct TangentSystem {
    forces: Vec<f64>,
    k_ff: BandMatrix,
    /// `K_fp Δu_p` for the supplied prescribed increment.
    coupling: Vec<f64>,
}

fn assemble_tangent(
    mesh: &Mesh,
    material: &BenchmarkMaterial,
    disp: &[[f64; 2]],
    free: &FreeIndex,
    prescribed_increment: Option<&[f64]>,
) -> Result<TangentSystem> {
    let elements = mesh.elements();
    let grads = mesh.shape_gradients();
    let areas = mesh.areas();
    let local: Vec<([f64; 6], [[f64; 6]; 6])> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| -> Result<_> {
            let f2 = element_inplane_f(&grads[e], &elements[e], disp);
            let det = f2[0] * f2[3] - f2[1] * f2[2];
            if !(det > 0.0) {
                return Err(Error::NonPhysicalDeformation { element: e, det });
            }
            let (p, d) = material.stress_and_tangent(f2)?;
            let g = &grads[e];
            let mut fe = [0.0; 6];
            for a in 0..3 {
                for i in 0..2 {
                    fe[2 * a + i] = areas[e] * (p[2 * i] * g[a][0] + p[2 * i + 1] * g[a][1]);
                }
            }
            Ok((fe, element_stiffness(&d, g, areas[e])))
        })
        .collect::<Result<_>>()?;

    let mut forces = vec![0.0; mesh.n_dofs()];
    let mut k_ff = BandMatrix::zeros(free.n_free, free.bandwidth);
    let mut coupling = vec![0.0; free.n_free];
    for (tri, (fe, ke)) in elements.iter().zip(&local) {
        let dofs = [2 * tri[0], 2 * tri[0] + 1, 2 * tri[1], 2 * tri[1] + 1, 2 * tri[2], 2 * tri[2] + 1];
        for r in 0..6 {
            forces[dofs[r]] += fe[r];
            let Some(fr) = free.index[dofs[r]] else { continue };
            for c in 0..6 {
                match free.index[dofs[c]] {
                    Some(fc) if fc <= fr => k_ff.add(fr, fc, ke[r][c]),
                    Some(_) => {}
                    None => {
                        if let Some(du) = prescribed_increment {
                            coupling[fr] += ke[r][c] * du[dofs[c]];
                        }
                    }
                }
            }
        }
    }
    Ok(TangentSystem { forces, k_ff, coupling })
}

/// Newton iteration controls.
#[derive(Clone, Debug)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    /// Convergence when `‖r_free‖ ≤ rel_tol · ‖f_int‖`.
    pub rel_tol: f64,
    pub line_search_halvings: usize,
    /// Times a failing load increment may be bisected.
    pub max_bisections: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            rel_tol: 1e-9,
            line_search_halvings: 10,
            max_bisections: 6,
        }
    }
}

fn free_norm(forces: &[f64], mesh: &Mesh) -> f64 {
    mesh.dofs().free.iter().map(|&d| forces[d] * forces[d]).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn to_nodal(u: &[f64]) -> Vec<[f64; 2]> {
    u.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

/// Group sums of the internal force: the measured reactions.
pub fn reactions(mesh: &Mesh, forces: &[f64]) -> Vec<f64> {
    mesh.dofs()
        .reaction_groups
        .iter()
        .map(|g| g.dofs.iter().map(|&d| forces[d]).sum())
        .collect()
}

/// Displacement-controlled quasi-static solver.
pub struct StaticSolver<'a> {
    mesh: &'a Mesh,
    material: &'a BenchmarkMaterial,
    settings: NewtonSettings,
    free: FreeIndex,
    pattern: Vec<f64>,
}

impl<'a> StaticSolver<'a> {
    pub fn new(mesh: &'a Mesh, material: &'a BenchmarkMaterial, settings: NewtonSettings) -> Self {
        Self {
            mesh,
            material,
            settings,
            free: FreeIndex::new(mesh),
            pattern: load_pattern(mesh),
        }
    }

    /// Equilibrium displacement field at each load parameter, in order.
    pub fn solve(&self, phis: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let mut u = vec![0.0; self.mesh.n_dofs()];
        let mut phi = 0.0;
        let mut out = Vec::with_capacity(phis.len());
        for (step, &target) in phis.iter().enumerate() {
            self.advance(&mut u, phi, target, 0).map_err(|e| match e {
                Error::Solver { message, .. } => Error::Solver { step: step + 1, message },
                other => other,
            })?;
            phi = target;
            let forces = internal_forces(self.mesh, self.material, &to_nodal(&u))?;
            out.push((u.clone(), forces));
        }
        Ok(out)
    }

    fn advance(&self, u: &mut Vec<f64>, from: f64, to: f64, depth: usize) -> Result<()> {
        let saved = u.clone();
        match self.increment(u, from, to) {
            Ok(()) => Ok(()),
            Err(e) if depth < self.settings.max_bisections => {
                *u = saved;
                let mid = 0.5 * (from + to);
                self.advance(u, from, mid, depth + 1)
                    .and_then(|_| self.advance(u, mid, to, depth + 1))
                    .map_err(|inner| match inner {
                        Error::Solver { .. } => inner,
                        _ => e,
                    })
            }
            Err(e) => Err(e),
        }
    }

    fn increment(&self, u: &mut [f64], from: f64, to: f64) -> Result<()> {
        let fail = |message: String| Error::Solver { step: 0, message };
        let du_p: Vec<f64> = self.pattern.iter().map(|w| w * (to - from)).collect();

        // linear predictor from the tangent at the converged state
        let sys = assemble_tangent(self.mesh, self.material, &to_nodal(u), &self.free, Some(&du_p))
            .map_err(|e| fail(e.to_string()))?;
        let mut du_f: Vec<f64> = sys.coupling.iter().map(|c| -c).collect();
        let predicted = sys.k_ff.cholesky().map(|ch| ch.solve_in_place(&mut du_f)).is_ok();
        let mut trial = u.to_vec();
        for &d in &self.mesh.dofs().fixed {
            trial[d] += du_p[d];
        }
        let base = trial.clone();
        if predicted {
            for (k, &d) in self.mesh.dofs().free.iter().enumerate() {
                trial[d] += du_f[k];
            }
        }
        if !predicted || internal_forces(self.mesh, self.material, &to_nodal(&trial)).is_err() {
            trial = base;
        }
        u.copy_from_slice(&trial);

        for _ in 0..self.settings.max_iterations {
            let sys = assemble_tangent(self.mesh, self.material, &to_nodal(u), &self.free, None)
                .map_err(|e| fail(e.to_string()))?;
            let res = free_norm(&sys.forces, self.mesh);
            let scale = norm(&sys.forces);
            if res <= self.settings.rel_tol * scale || res == 0.0 {
                return Ok(());
            }
            let mut step: Vec<f64> = self.mesh.dofs().free.iter().map(|&d| -sys.forces[d]).collect();
            let chol = sys
                .k_ff
                .cholesky()
                .map_err(|e| fail(format!("tangent factorization failed: {e}")))?;
            chol.solve_in_place(&mut step);

            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=self.settings.line_search_halvings {
                let mut cand = u.to_vec();
                for (k, &d) in self.mesh.dofs().free.iter().enumerate() {
                    cand[d] += alpha * step[k];
                }
                if let Ok(f) = internal_forces(self.mesh, self.material, &to_nodal(&cand)) {
                    let r = free_norm(&f, self.mesh);
                    if r < res || r <= self.settings.rel_tol * norm(&f) {
                        u.copy_from_slice(&cand);
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(fail(format!("line search failed at residual {res:e}")));
            }
        }
        Err(fail(format!(
            "no convergence in {} iterations",
            self.settings.max_iterations
        )))
    }
}

/// Quasi-static snapshots at every load parameter of the program.
pub fn solve_quasistatic(mesh: &Mesh, material: &BenchmarkMaterial, program: &LoadingProgram) -> Result<Vec<Snapshot>> {
    solve_quasistatic_with(mesh, material, program, NewtonSettings::default())
}

pub fn solve_quasistatic_with(
    mesh: &Mesh,
    material: &BenchmarkMaterial,
    program: &LoadingProgram,
    settings: NewtonSettings,
) -> Result<Vec<Snapshot>> {
    let solver = StaticSolver::new(mesh, material, settings);
    let states = solver.solve(&program.phi_steps)?;
    Ok(states
        .into_iter()
        .enumerate()
        .map(|(l, (u, f))| Snapshot {
            time_index: l + 1,
            displacements: to_nodal(&u),
            accelerations: None,
            reactions: reactions(mesh, &f),
        })
        .collect())
}

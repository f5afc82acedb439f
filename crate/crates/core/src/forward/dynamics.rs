//! Central-difference explicit dynamics with a lumped mass matrix.

use super::banded::BandMatrix;
use super::geometry::load_pattern;
use super::material::BenchmarkMaterial;
use super::statics::{internal_forces_into, reactions};
use super::LoadingProgram;
use crate::error::{Error, Result};
use crate::kinematics::{element_inplane_f, Mesh, Snapshot};

/// Explicit integrator `M ü = -f_int(u)` on the free DOFs.
///
/// Fixed DOFs follow `u = w · rate · t` where `w` is the load pattern; with
/// no fixed DOFs every node moves freely.
pub struct ExplicitIntegrator<'a> {
    mesh: &'a Mesh,
    material: &'a BenchmarkMaterial,
    dt: f64,
    mass: Vec<f64>,
    is_fixed: Vec<bool>,
    pattern: Vec<f64>,
    rate: f64,
    step: usize,
    u_prev: Vec<f64>,
    u: Vec<f64>,
    forces: Vec<f64>,
    buf: Vec<[f64; 6]>,
    nodal: Vec<[f64; 2]>,
}

impl<'a> ExplicitIntegrator<'a> {
    /// Starts at rest in the reference configuration.
    pub fn new(mesh: &'a Mesh, material: &'a BenchmarkMaterial, density: f64, dt: f64, rate: f64) -> Result<Self> {
        if !(dt > 0.0) || !(density > 0.0) {
            return Err(Error::Config(format!("time step {dt} and density {density} must be positive")));
        }
        let nodal_mass = mesh.lumped_masses(density);
        let mass: Vec<f64> = (0..mesh.n_dofs()).map(|d| nodal_mass[d / 2]).collect();
        let mut is_fixed = vec![false; mesh.n_dofs()];
        for &d in &mesh.dofs().fixed {
            is_fixed[d] = true;
        }
        let pattern = load_pattern(mesh);
        let n = mesh.n_dofs();
        let mut it = Self {
            mesh,
            material,
            dt,
            mass,
            is_fixed,
            pattern,
            rate,
            step: 0,
            u_prev: vec![0.0; n],
            u: vec![0.0; n],
            forces: vec![0.0; n],
            buf: vec![[0.0; 6]; mesh.n_elements()],
            nodal: vec![[0.0; 2]; mesh.n_nodes()],
        };
        it.set_velocity(&vec![0.0; n])?;
        Ok(it)
    }

    /// Resets the backward frame so the current state has free-DOF velocity
    /// `v` (central-difference start `u₋₁ = u₀ - δt v₀ + ½δt² a₀`).
    pub fn set_velocity(&mut self, v: &[f64]) -> Result<()> {
        self.refresh_forces()?;
        let dt = self.dt;
        let t_prev = (self.step as f64 - 1.0) * dt;
        for d in 0..self.u.len() {
            self.u_prev[d] = if self.is_fixed[d] {
                self.pattern[d] * self.rate * t_prev
            } else {
                let a = -self.forces[d] / self.mass[d];
                self.u[d] - dt * v[d] + 0.5 * dt * dt * a
            };
        }
        Ok(())
    }

    fn refresh_forces(&mut self) -> Result<()> {
        for (n, c) in self.nodal.iter_mut().zip(self.u.chunks_exact(2)) {
            *n = [c[0], c[1]];
        }
        internal_forces_into(self.mesh, self.material, &self.nodal, &mut self.buf, &mut self.forces)
    }

    pub fn step_index(&self) -> usize {
        self.step
    }
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }
    pub fn displacements(&self) -> &[f64] {
        &self.u
    }
    pub fn previous_displacements(&self) -> &[f64] {
        &self.u_prev
    }
    /// Internal forces at the current displacements.
    pub fn forces(&self) -> &[f64] {
        &self.forces
    }
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Advances one step; forces at the new state are refreshed.
    pub fn advance(&mut self) -> Result<()> {
        let dt2 = self.dt * self.dt;
        let t_next = (self.step as f64 + 1.0) * self.dt;
        for d in 0..self.u.len() {
            let next = if self.is_fixed[d] {
                self.pattern[d] * self.rate * t_next
            } else {
                2.0 * self.u[d] - self.u_prev[d] - dt2 * self.forces[d] / self.mass[d]
            };
            self.u_prev[d] = self.u[d];
            self.u[d] = next;
        }
        self.step += 1;
        let step = self.step;
        if self.u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Instability { step });
        }
        match self.refresh_forces() {
            Ok(()) => Ok(()),
            Err(Error::NonPhysicalDeformation { .. }) => Err(Error::Instability { step }),
            Err(e) => Err(e),
        }
    }

    /// Strain energy `Σ_e A_e W(F_e)` at the current state.
    pub fn strain_energy(&self) -> Result<f64> {
        let mut e = 0.0;
        for (k, tri) in self.mesh.elements().iter().enumerate() {
            let f2 = element_inplane_f(&self.mesh.shape_gradients()[k], tri, &self.nodal);
            e += self.mesh.areas()[k] * self.material.energy(f2)?;
        }
        Ok(e)
    }
}

/// Stable time-step estimate `2/ω_max` from a Gershgorin bound on the
/// reference stiffness scaled by the lumped masses.
pub fn critical_time_step(mesh: &Mesh, material: &BenchmarkMaterial, density: f64) -> Result<f64> {
    let (_, d) = material.stress_and_tangent([1.0, 0.0, 0.0, 1.0])?;
    let mut bw = 0;
    for tri in mesh.elements() {
        let lo = tri.iter().min().unwrap();
        let hi = tri.iter().max().unwrap();
        bw = bw.max(2 * (hi - lo) + 1);
    }
    let mut k = BandMatrix::zeros(mesh.n_dofs(), bw);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let g = &mesh.shape_gradients()[e];
        for a in 0..3 {
            for i in 0..2 {
                for b in 0..3 {
                    for c in 0..2 {
                        let (r, col) = (2 * tri[a] + i, 2 * tri[b] + c);
                        if col > r {
                            continue;
                        }
                        let mut s = 0.0;
                        for j in 0..2 {
                            for l in 0..2 {
                                s += d[2 * i + j][2 * c + l] * g[a][j] * g[b][l];
                            }
                        }
                        k.add(r, col, mesh.areas()[e] * s);
                    }
                }
            }
        }
    }
    let masses = mesh.lumped_masses(density);
    let omega2 = k
        .row_abs_sums()
        .iter()
        .enumerate()
        .map(|(r, s)| s / masses[r / 2])
        .fold(0.0, f64::max);
    Ok(2.0 / omega2.sqrt())
}

/// Second-order central difference `(u₊ - 2u + u₋)/δt²` at frame `index`
/// of a displacement history.
pub fn compute_accelerations(history: &[Vec<[f64; 2]>], index: usize, dt: f64) -> Result<Vec<[f64; 2]>> {
    if index == 0 || index + 1 >= history.len() {
        return Err(Error::Config(format!(
            "frame {index} needs both neighbours in a history of {} frames",
            history.len()
        )));
    }
    let (prev, cur, next) = (&history[index - 1], &history[index], &history[index + 1]);
    if prev.len() != cur.len() || next.len() != cur.len() {
        return Err(Error::Shape("frames differ in node count".into()));
    }
    let inv = 1.0 / (dt * dt);
    Ok((0..cur.len())
        .map(|a| std::array::from_fn(|i| (next[a][i] - 2.0 * cur[a][i] + prev[a][i]) * inv))
        .collect())
}

/// Step indices at which dynamic snapshots are recorded; each keeps one
/// neighbour on either side inside `0..=total_steps`.
pub fn snapshot_steps(total_steps: usize, n_snapshots: usize) -> Vec<usize> {
    (1..=n_snapshots).map(|k| k * total_steps / n_snapshots - 1).collect()
}

fn nodal(u: &[f64]) -> Vec<[f64; 2]> {
    u.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

/// Explicit dynamics under a constant boundary velocity ramp.
///
/// Accelerations are reconstructed by central differences of the stored
/// neighbouring frames; reactions are `Σ_group (f_int + m ü)`.
pub fn solve_dynamic(mesh: &Mesh, material: &BenchmarkMaterial, program: &LoadingProgram) -> Result<Vec<Snapshot>> {
    let dt_crit = critical_time_step(mesh, material, program.density)?;
    if program.dt > dt_crit {
        log::warn!(
            "time step {:e} exceeds the estimated stability limit {:e}",
            program.dt,
            dt_crit
        );
    }
    let steps = snapshot_steps(program.total_steps, program.n_snapshots);
    let mut integ = ExplicitIntegrator::new(mesh, material, program.density, program.dt, program.phi_rate)?;
    let mut snaps = Vec::with_capacity(steps.len());
    for &s in &steps {
        while integ.step_index() < s {
            integ.advance()?;
        }
        let prev = nodal(integ.previous_displacements());
        let cur = nodal(integ.displacements());
        let forces = integ.forces().to_vec();
        integ.advance()?;
        let next = nodal(integ.displacements());
        let acc = compute_accelerations(&[prev, cur.clone(), next], 1, program.dt)?;
        let mut total: Vec<f64> = forces;
        for (d, t) in total.iter_mut().enumerate() {
            *t += integ.masses()[d] * acc[d / 2][d % 2];
        }
        snaps.push(Snapshot {
            time_index: s,
            displacements: cur,
            accelerations: Some(acc),
            reactions: reactions(mesh, &total),
        });
    }
    Ok(snaps)
}

//! The linear system `b = Aθ + ε` from weak-form momentum balance.
//!
//! Column `k` of `A` holds the internal nodal forces produced by feature `k`
//! with unit coefficient. Rows are sampled free DOFs (balance against
//! inertia) followed by reaction groups (balance against measured
//! reactions), snapshot by snapshot.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, N_FEATURES};
use crate::kinematics::{element_inplane_f, Mesh, Snapshot};

/// Per-snapshot subsampling of free-DOF rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsampleSpec {
    /// Rows drawn per snapshot; `None` keeps every free DOF.
    pub n_free: Option<usize>,
    pub rng_seed: u64,
}

impl Default for SubsampleSpec {
    fn default() -> Self {
        Self {
            n_free: Some(100),
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Free { dof: usize },
    Reaction { group: usize },
}

/// Where a row of the system came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowTag {
    /// Position of the snapshot in the input sequence.
    pub snapshot: usize,
    pub kind: RowKind,
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub row_tags: Vec<RowTag>,
}

impl LinearSystem {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }
    pub fn n_features(&self) -> usize {
        self.a.ncols()
    }

    pub fn residual(&self, theta: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(theta) - &self.b
    }

    fn validate(&self) -> Result<()> {
        if self.a.nrows() != self.b.len() || self.row_tags.len() != self.b.len() {
            return Err(Error::Shape(format!(
                "A is {}×{}, b has {} entries, {} row tags",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len(),
                self.row_tags.len()
            )));
        }
        if self.a.iter().chain(self.b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numerical("assembled system contains non-finite entries".into()));
        }
        Ok(())
    }
}

/// Free and reaction rows of one snapshot, before weighting.
#[derive(Clone, Debug)]
pub struct SnapshotRows {
    pub a_free: DMatrix<f64>,
    pub b_free: DVector<f64>,
    pub free_dofs: Vec<usize>,
    pub a_fix: DMatrix<f64>,
    pub b_fix: DVector<f64>,
}

/// Unit-coefficient internal forces of every feature at every DOF,
/// `[dof][k] = Σ_e A_e ∂Q_k/∂F_ij ∇_j Nᵃ`.
pub fn feature_forces(mesh: &Mesh, snapshot: &Snapshot, library: &FeatureLibrary) -> Result<Vec<[f64; N_FEATURES]>> {
    snapshot.validate(mesh)?;
    let elements = mesh.elements();
    let grads = mesh.shape_gradients();
    let areas = mesh.areas();
    let local: Vec<[[f64; N_FEATURES]; 6]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| -> Result<_> {
            let f2 = element_inplane_f(&grads[e], &elements[e], &snapshot.displacements);
            let det = f2[0] * f2[3] - f2[1] * f2[2];
            if !(det > 0.0) {
                return Err(Error::NonPhysicalDeformation { element: e, det });
            }
            let dq = library.inplane_gradient(f2)?;
            let g = &grads[e];
            let mut fe = [[0.0; N_FEATURES]; 6];
            for a in 0..3 {
                for i in 0..2 {
                    for k in 0..N_FEATURES {
                        fe[2 * a + i][k] = areas[e] * (dq[k][2 * i] * g[a][0] + dq[k][2 * i + 1] * g[a][1]);
                    }
                }
            }
            Ok(fe)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![[0.0; N_FEATURES]; mesh.n_dofs()];
    for (tri, fe) in elements.iter().zip(&local) {
        for a in 0..3 {
            for i in 0..2 {
                let row = &mut out[2 * tri[a] + i];
                for k in 0..N_FEATURES {
                    row[k] += fe[2 * a + i][k];
                }
            }
        }
    }
    Ok(out)
}

/// Lumped inertial force `m ü` per DOF, zero without accelerations.
fn inertial_forces(mesh: &Mesh, snapshot: &Snapshot, density: f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_dofs()];
    if let Some(acc) = &snapshot.accelerations {
        let m = mesh.lumped_masses(density);
        for (a, (ma, ua)) in m.iter().zip(acc).enumerate() {
            out[2 * a] = ma * ua[0];
            out[2 * a + 1] = ma * ua[1];
        }
    }
    out
}

/// Free DOFs drawn without replacement for the snapshot at `position`,
/// returned in ascending order.
pub fn select_free_dofs(mesh: &Mesh, spec: &SubsampleSpec, position: usize) -> Result<Vec<usize>> {
    let free = &mesh.dofs().free;
    let Some(n) = spec.n_free else {
        return Ok(free.clone());
    };
    if n > free.len() {
        return Err(Error::Config(format!(
            "cannot sample {n} rows from {} free DOFs",
            free.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.set_stream(position as u64);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, free.len(), n)
        .into_iter()
        .map(|i| free[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Rows `A_free`, `b_free = -m ü` at the given free DOFs.
pub fn assemble_free_rows(
    mesh: &Mesh,
    snapshot: &Snapshot,
    library: &FeatureLibrary,
    dofs: &[usize],
    density: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let forces = feature_forces(mesh, snapshot, library)?;
    free_rows_from(mesh, &forces, &inertial_forces(mesh, snapshot, density), dofs)
}

fn free_rows_from(
    mesh: &Mesh,
    forces: &[[f64; N_FEATURES]],
    inertia: &[f64],
    dofs: &[usize],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut is_free = vec![false; mesh.n_dofs()];
    for &d in &mesh.dofs().free {
        is_free[d] = true;
    }
    if let Some(&d) = dofs.iter().find(|&&d| d >= is_free.len() || !is_free[d]) {
        return Err(Error::Config(format!("DOF {d} is not a free DOF")));
    }
    let a = DMatrix::from_fn(dofs.len(), N_FEATURES, |r, k| forces[dofs[r]][k]);
    let b = DVector::from_fn(dofs.len(), |r, _| -inertia[dofs[r]]);
    Ok((a, b))
}

/// Rows `A_fix`, `b_fix = R - Σ m ü` per reaction group.
pub fn assemble_reaction_rows(
    mesh: &Mesh,
    snapshot: &Snapshot,
    library: &FeatureLibrary,
    density: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let forces = feature_forces(mesh, snapshot, library)?;
    reaction_rows_from(mesh, snapshot, &forces, &inertial_forces(mesh, snapshot, density))
}

fn reaction_rows_from(
    mesh: &Mesh,
    snapshot: &Snapshot,
    forces: &[[f64; N_FEATURES]],
    inertia: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let groups = &mesh.dofs().reaction_groups;
    if let Some(g) = groups.iter().find(|g| g.dofs.is_empty()) {
        return Err(Error::Config(format!("reaction group '{}' is empty", g.label)));
    }
    let mut a = DMatrix::zeros(groups.len(), N_FEATURES);
    let mut b = DVector::zeros(groups.len());
    for (r, g) in groups.iter().enumerate() {
        let mut inertial = 0.0;
        for &d in &g.dofs {
            for k in 0..N_FEATURES {
                a[(r, k)] += forces[d][k];
            }
            inertial += inertia[d];
        }
        b[r] = snapshot.reactions[r] - inertial;
    }
    Ok((a, b))
}

/// Both row blocks of one snapshot with a single pass over the elements.
pub fn snapshot_rows(
    mesh: &Mesh,
    snapshot: &Snapshot,
    library: &FeatureLibrary,
    free_dofs: Vec<usize>,
    density: f64,
) -> Result<SnapshotRows> {
    let forces = feature_forces(mesh, snapshot, library)?;
    let inertia = inertial_forces(mesh, snapshot, density);
    let (a_free, b_free) = free_rows_from(mesh, &forces, &inertia, &free_dofs)?;
    let (a_fix, b_fix) = reaction_rows_from(mesh, snapshot, &forces, &inertia)?;
    Ok(SnapshotRows {
        a_free,
        b_free,
        free_dofs,
        a_fix,
        b_fix,
    })
}

/// Stacks free rows then `λ_r`-scaled reaction rows, snapshot by snapshot.
pub fn concatenate(parts: &[SnapshotRows], lambda_r: f64) -> Result<LinearSystem> {
    let Some(first) = parts.first() else {
        return Err(Error::Shape("no snapshots to concatenate".into()));
    };
    let n_fix = first.a_fix.nrows();
    for (t, p) in parts.iter().enumerate() {
        let consistent = p.a_free.ncols() == N_FEATURES
            && p.a_fix.ncols() == N_FEATURES
            && p.a_free.nrows() == p.b_free.len()
            && p.a_free.nrows() == p.free_dofs.len()
            && p.a_fix.nrows() == n_fix
            && p.b_fix.len() == n_fix;
        if !consistent {
            return Err(Error::Shape(format!("snapshot {t} rows do not match the first snapshot")));
        }
    }
    let n_rows: usize = parts.iter().map(|p| p.a_free.nrows() + n_fix).sum();
    let mut a = DMatrix::zeros(n_rows, N_FEATURES);
    let mut b = DVector::zeros(n_rows);
    let mut row_tags = Vec::with_capacity(n_rows);
    let mut r = 0;
    for (t, p) in parts.iter().enumerate() {
        for (i, &dof) in p.free_dofs.iter().enumerate() {
            a.row_mut(r).copy_from(&p.a_free.row(i));
            b[r] = p.b_free[i];
            row_tags.push(RowTag {
                snapshot: t,
                kind: RowKind::Free { dof },
            });
            r += 1;
        }
        for g in 0..n_fix {
            for k in 0..N_FEATURES {
                a[(r, k)] = lambda_r * p.a_fix[(g, k)];
            }
            b[r] = lambda_r * p.b_fix[g];
            row_tags.push(RowTag {
                snapshot: t,
                kind: RowKind::Reaction { group: g },
            });
            r += 1;
        }
    }
    let sys = LinearSystem { a, b, row_tags };
    sys.validate()?;
    Ok(sys)
}

/// Assembly settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblySpec {
    pub subsample: SubsampleSpec,
    pub lambda_r: f64,
    pub density: f64,
}

impl Default for AssemblySpec {
    fn default() -> Self {
        Self {
            subsample: SubsampleSpec::default(),
            lambda_r: 10.0,
            density: 1.0,
        }
    }
}

/// The full system over all snapshots.
pub fn assemble(mesh: &Mesh, snapshots: &[Snapshot], library: &FeatureLibrary, spec: &AssemblySpec) -> Result<LinearSystem> {
    let parts = snapshots
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let dofs = select_free_dofs(mesh, &spec.subsample, t)?;
            snapshot_rows(mesh, s, library, dofs, spec.density)
        })
        .collect::<Result<Vec<_>>>()?;
    concatenate(&parts, spec.lambda_r)
}

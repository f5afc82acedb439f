//! Property tests for the invariants each module promises.

#[allow(dead_code)]
mod common;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hyperlaw::analysis::{energy_envelope, DeformationPath, PathKind};
use hyperlaw::assembly::{assemble, feature_forces, select_free_dofs, AssemblySpec, SubsampleSpec};
use hyperlaw::cli::{run_case, Case, RunConfig};
use hyperlaw::features::{AbOffset, FeatureLibrary, N_FEATURES};
use hyperlaw::forward::{build_quarter_plate, MaterialName};
use hyperlaw::kinematics::{
    deformation_gradient, det3, invariants, plane_strain, principal_stretches, FiberPair, Mesh, Snapshot, Tensor3,
};
use hyperlaw::sampler::{sample_truncated_mvn, ChainConfig, ChainState, GramSystem, HyperParams, PosteriorSamples, SpikeSlab};

fn matmul(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

fn transpose(a: &Tensor3) -> Tensor3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

fn rotation(angle: f64) -> Tensor3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn rotate(r: &Tensor3, v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| (0..3).map(|k| r[i][k] * v[k]).sum())
}

/// In-plane entries within ±0.3 of the identity, `det F ≥ 0.3`.
fn plane_f() -> impl Strategy<Value = Tensor3> {
    prop::array::uniform4(-0.3..0.3f64)
        .prop_map(|h| plane_strain(1.0 + h[0], h[1], h[2], 1.0 + h[3]))
        .prop_filter("det F >= 0.3", |f| det3(f) >= 0.3)
}

/// Every entry within ±0.3 of the identity, `det F ≥ 0.3`.
fn general_f() -> impl Strategy<Value = Tensor3> {
    prop::array::uniform9(-0.3..0.3f64)
        .prop_map(|h| std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as u8 as f64 + h[3 * i + j])))
        .prop_filter("det F >= 0.3", |f| det3(f) >= 0.3)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn small_mesh() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_quarter_plate(1.0, 0.25, 200).unwrap())
}

/// Displacements from a quadratic polynomial in the reference coordinates.
fn polynomial_snapshot(mesh: &Mesh, c: &[f64; 12]) -> Snapshot {
    let mut s = Snapshot::zeros(mesh, 0);
    for (u, x) in s.displacements.iter_mut().zip(mesh.nodes()) {
        let m = [1.0, x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]];
        *u = [
            (0..6).map(|k| c[k] * m[k]).sum(),
            (0..6).map(|k| c[6 + k] * m[k]).sum(),
        ];
    }
    s
}

// ------------------------------------------------------------- kinematics

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unimodular_invariants_ignore_volumetric_scaling(f in general_f(), scale in 0.5..2.0f64) {
        let scaled: Tensor3 = f.map(|r| r.map(|v| scale * v));
        let a = invariants(&f, None).unwrap().invariants;
        let b = invariants(&scaled, None).unwrap().invariants;
        prop_assert!(close(a.i1_bar, b.i1_bar, 1e-12), "{} vs {}", a.i1_bar, b.i1_bar);
        prop_assert!(close(a.i2_bar, b.i2_bar, 1e-12), "{} vs {}", a.i2_bar, b.i2_bar);
        prop_assert!(close(b.j, scale.powi(3) * a.j, 1e-12));
    }

    #[test]
    fn invariants_are_objective(f in plane_f(), angle in -3.2..3.2f64) {
        let fibers = FiberPair::symmetric_degrees(30.0);
        let a = invariants(&f, Some(&fibers)).unwrap();
        let b = invariants(&matmul(&rotation(angle), &f), Some(&fibers)).unwrap();
        let (p, q) = (a.invariants, b.invariants);
        for (x, y) in [(p.i1, q.i1), (p.i2, q.i2), (p.j, q.j), (p.i1_bar, q.i1_bar), (p.i2_bar, q.i2_bar)] {
            prop_assert!(close(x, y, 1e-12), "{x} vs {y}");
        }
        let (p, q) = (a.fiber_invariants.unwrap(), b.fiber_invariants.unwrap());
        prop_assert!(close(p.j4_bar, q.j4_bar, 1e-12) && close(p.j6_bar, q.j6_bar, 1e-12));
    }

    #[test]
    fn principal_stretches_are_unimodular(f in plane_f()) {
        let s = invariants(&f, None).unwrap().invariants;
        let l = principal_stretches(s.i1_bar, s.j).unwrap();
        prop_assert!((l[0] * l[1] * l[2] - 1.0).abs() < 1e-10, "{l:?}");
    }

    #[test]
    fn affine_fields_are_reproduced(h in prop::array::uniform4(-0.3..0.3f64), shift in prop::array::uniform2(-1.0..1.0f64)) {
        let mesh = small_mesh();
        prop_assume!((1.0 + h[0]) * (1.0 + h[3]) - h[1] * h[2] > 0.1);
        let mut s = Snapshot::zeros(mesh, 0);
        for (u, x) in s.displacements.iter_mut().zip(mesh.nodes()) {
            *u = [shift[0] + h[0] * x[0] + h[1] * x[1], shift[1] + h[2] * x[0] + h[3] * x[1]];
        }
        let expected = plane_strain(1.0 + h[0], h[1], h[2], 1.0 + h[3]);
        for e in 0..mesh.n_elements() {
            let f = deformation_gradient(mesh, &s, e).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((f[i][j] - expected[i][j]).abs() < 1e-12, "element {e}: {f:?}");
                }
            }
        }
    }
}

// ---------------------------------------------------------------- features

/// Log feature, Ogden terms and the odd fiber powers may go below zero.
const SIGNED_FEATURES: [usize; 6] = [16, 18, 19, 20, 22, 25];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn features_are_objective_with_corotated_fibers(f in plane_f(), angle in -3.2..3.2f64) {
        let lib = FeatureLibrary::default();
        let r = rotation(angle);
        let q = lib.evaluate_at(&f).unwrap();
        // spatial rotation
        let spatial = lib.evaluate_at(&matmul(&r, &f)).unwrap();
        // rotated reference frame with the fibers carried along
        let fibers = lib.fibers().unwrap();
        let turned = FiberPair::new(rotate(&r, fibers.a1), rotate(&r, fibers.a2)).unwrap();
        let rotated_lib = FeatureLibrary::new(lib.ogden_alphas(), lib.chain_segments(), AbOffset::Exact, Some(turned)).unwrap();
        let material = rotated_lib.evaluate_at(&matmul(&f, &transpose(&r))).unwrap();
        for k in 0..N_FEATURES {
            prop_assert!(close(q[k], spatial[k], 1e-10), "feature {}: {} vs {}", k + 1, q[k], spatial[k]);
            prop_assert!(close(q[k], material[k], 1e-10), "feature {}: {} vs {}", k + 1, q[k], material[k]);
        }
    }

    #[test]
    fn features_are_nonnegative_unless_signed(f in plane_f()) {
        let q = FeatureLibrary::default().evaluate_at(&f).unwrap();
        for (k, v) in q.iter().enumerate() {
            prop_assert!(v.is_finite());
            if !SIGNED_FEATURES.contains(&(k + 1)) {
                prop_assert!(*v >= -1e-10, "feature {} = {v}", k + 1);
            }
        }
    }
}

#[test]
fn odd_fiber_powers_take_both_signs() {
    let lib = FeatureLibrary::default();
    let stretched = lib.evaluate_at(&plane_strain(1.2, 0.0, 0.0, 1.0)).unwrap();
    let compressed = lib.evaluate_at(&plane_strain(0.8, 0.0, 0.0, 1.0)).unwrap();
    for k in [22, 25] {
        assert!(stretched[k - 1] > 0.0 && compressed[k - 1] < 0.0);
    }
}

// ---------------------------------------------------------------- assembly

/// Internal forces `Σ_e A_e P_ij ∇_j Nᵃ` of `W = θ·Q`, element by element
/// from the full 3×3 feature gradients.
fn element_loop_forces(mesh: &Mesh, snapshot: &Snapshot, lib: &FeatureLibrary, theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_dofs()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let f = deformation_gradient(mesh, snapshot, e).unwrap();
        let dq = lib.gradient(&f).unwrap();
        let g = &mesh.shape_gradients()[e];
        for (a, &node) in tri.iter().enumerate() {
            for i in 0..2 {
                let mut sum = 0.0;
                for k in 0..N_FEATURES {
                    sum += theta[k] * (dq[k][i][0] * g[a][0] + dq[k][i][1] * g[a][1]);
                }
                out[2 * node + i] += mesh.areas()[e] * sum;
            }
        }
    }
    out
}

fn coefficients() -> impl Strategy<Value = [f64; 12]> {
    prop::array::uniform12(-0.1..0.1f64)
}

fn thetas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..2.0f64, N_FEATURES)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembly_is_linear_and_matches_an_element_loop(c in coefficients(), t1 in thetas(), t2 in thetas()) {
        let mesh = small_mesh();
        let lib = FeatureLibrary::default();
        let s = polynomial_snapshot(mesh, &c);
        let forces = feature_forces(mesh, &s, &lib).unwrap();
        let sum: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a + b).collect();
        let (r1, r2) = (element_loop_forces(mesh, &s, &lib, &t1), element_loop_forces(mesh, &s, &lib, &t2));
        let scale = r1.iter().chain(&r2).fold(1.0f64, |m, v| m.max(v.abs()));
        for (d, row) in forces.iter().enumerate() {
            let assembled: f64 = row.iter().zip(&sum).map(|(q, t)| q * t).sum();
            prop_assert!((assembled - r1[d] - r2[d]).abs() < 1e-10 * scale, "dof {d}: {assembled} vs {}", r1[d] + r2[d]);
        }
    }

    #[test]
    fn subsampling_is_deterministic_and_sorted(n in 1usize..200, seed in any::<u64>(), position in 0usize..8) {
        let mesh = small_mesh();
        let spec = SubsampleSpec { n_free: Some(n), rng_seed: seed };
        let rows = select_free_dofs(mesh, &spec, position).unwrap();
        prop_assert_eq!(&rows, &select_free_dofs(mesh, &spec, position).unwrap());
        prop_assert_eq!(rows.len(), n.min(mesh.dofs().free.len()));
        prop_assert!(rows.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(rows.iter().all(|d| mesh.dofs().free.binary_search(d).is_ok()));
    }

    #[test]
    fn suppressed_features_give_zero_columns(c in coefficients(), suppress in prop::collection::btree_set(1usize..=N_FEATURES, 1..6)) {
        let mesh = small_mesh();
        let suppress: Vec<usize> = suppress.into_iter().collect();
        let lib = FeatureLibrary::default().with_suppressed(&suppress).unwrap();
        let s = polynomial_snapshot(mesh, &c);
        let system = assemble(mesh, &[s], &lib, &AssemblySpec::default()).unwrap();
        for &k in &suppress {
            prop_assert!(system.a.column(k - 1).iter().all(|v| *v == 0.0), "column {k}");
        }
    }
}

// ----------------------------------------------------------------- sampler

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sweeps_keep_states_coherent(
        n_f in 2usize..7,
        n_rows in 8usize..16,
        seed in any::<u64>(),
        noise in 0.0..0.5f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n_rows, n_f, |_, _| rng.sample::<f64, _>(StandardNormal));
        let truth = DVector::from_fn(n_f, |i, _| if i % 2 == 0 { rng.random_range(0.5..2.0) } else { 0.0 });
        let b = &a * &truth + DVector::from_fn(n_rows, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
        let model = SpikeSlab::new(GramSystem::new(&a, &b, vec![true; n_f]).unwrap(), HyperParams::default()).unwrap();
        let mut state = model.initial_state(&mut rng);
        for _ in 0..25 {
            model.sweep(&mut state, &mut rng).unwrap();
            for (t, z) in state.theta.iter().zip(&state.z) {
                prop_assert!(*t >= 0.0 && t.is_finite());
                prop_assert!(*z || *t == 0.0, "inactive feature carries {t}");
            }
            prop_assert!(state.sigma2 > 0.0 && state.nu_s > 0.0 && state.p0 > 0.0 && state.p0 < 1.0);
        }
    }
}

/// `(mean z-sum, mean θ-sum)` over the columns in `pair`.
fn pair_statistics(a: &DMatrix<f64>, b: &DVector<f64>, pair: [usize; 2], seed: u64) -> (f64, f64) {
    let model = SpikeSlab::new(GramSystem::new(a, b, vec![true; a.ncols()]).unwrap(), HyperParams::default()).unwrap();
    let config = ChainConfig { n_burn: 500, n_g: 10_000, n_chains: 4, rng_seed: seed };
    let samples = model.run_chains(&config).unwrap();
    let n = samples.len() as f64;
    let (mut z, mut t) = (0.0, 0.0);
    for s in samples.states() {
        z += pair.iter().filter(|&&k| s.z[k]).count() as f64;
        t += pair.iter().map(|&k| s.theta[k]).sum::<f64>();
    }
    (z / n, t / n)
}

#[test]
fn duplicate_columns_are_exchangeable() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 30;
    let dup = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let other = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
    let b = 0.8 * &dup + 0.5 * &other + noise;
    let first = DMatrix::from_columns(&[dup.clone(), dup.clone(), other.clone()]);
    let permuted = DMatrix::from_columns(&[dup.clone(), other, dup]);
    let (z1, t1) = pair_statistics(&first, &b, [0, 1], 1);
    let (z2, t2) = pair_statistics(&permuted, &b, [0, 2], 2);
    assert!((z1 - z2).abs() < 0.03, "pair activity {z1} vs {z2}");
    assert!((t1 - t2).abs() < 0.02 * t1, "pair coefficient {t1} vs {t2}");
    // each member of the pair carries half on average
    let (za, _) = pair_statistics(&first, &b, [0, 0], 3);
    assert!((za - z1).abs() < 0.05, "single-column activity {} vs pair half {}", za / 2.0, z1 / 2.0);
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Compares the orthant-truncated sampler with plain rejection sampling.
fn check_truncated_mvn(mean: DVector<f64>, cov: DMatrix<f64>, seed: u64) {
    let d = mean.len();
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn: Vec<DVector<f64>> = (0..n).map(|_| sample_truncated_mvn(&mean, &cov, &mut rng).unwrap()).collect();
    let chol = cov.clone().cholesky().unwrap().unpack();
    let mut accepted = Vec::with_capacity(n);
    while accepted.len() < n {
        let x = &mean + &chol * DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        if x.iter().all(|v| *v >= 0.0) {
            accepted.push(x);
        }
    }
    for k in 0..d {
        let mut a: Vec<f64> = drawn.iter().map(|x| x[k]).collect();
        let mut b: Vec<f64> = accepted.iter().map(|x| x[k]).collect();
        assert!(a.iter().all(|v| *v >= 0.0));
        let (ma, mb) = (common::mean(&a), common::mean(&b));
        let sd = (b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((ma - mb).abs() < 5.0 * sd * (2.0 / n as f64).sqrt(), "dimension {d}, coordinate {k}: mean {ma} vs {mb}");
        let ks = ks_two_sample(&mut a, &mut b);
        assert!(ks < 0.025, "dimension {d}, coordinate {k}: KS {ks}");
    }
}

#[test]
fn truncated_mvn_matches_rejection_in_two_dimensions() {
    let mean = DVector::from_vec(vec![0.3, -0.2]);
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.5]);
    check_truncated_mvn(mean, cov, 7);
}

#[test]
fn truncated_mvn_matches_rejection_in_twelve_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = 12;
    let mean = DVector::from_fn(d, |_, _| rng.random_range(0.2..1.0));
    let basis = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = &basis * basis.transpose() / (2.0 * d as f64) + DMatrix::identity(d, d) * 0.3;
    check_truncated_mvn(mean, cov, 13);
}

// ---------------------------------------------------------------- analysis

/// Posterior states with light-tailed coefficients around a random centre.
fn random_posterior(seed: u64, n_states: usize) -> PosteriorSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre: Vec<f64> = (0..N_FEATURES).map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..2.0) } else { 0.0 }).collect();
    let states = (0..n_states)
        .map(|_| {
            let theta: Vec<f64> = centre.iter().map(|c| if *c > 0.0 { (c + rng.random_range(-0.2..0.2)).max(0.0) } else { 0.0 }).collect();
            ChainState {
                z: theta.iter().map(|t| *t > 0.0).collect(),
                theta,
                p0: 0.1,
                nu_s: 1.0,
                sigma2: 1.0,
            }
        })
        .collect();
    PosteriorSamples::new(states, 1, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn percentiles_bracket_the_mean(seed in any::<u64>(), n_states in 40usize..200) {
        let samples = random_posterior(seed, n_states);
        let lib = FeatureLibrary::default();
        for kind in PathKind::ALL {
            let env = energy_envelope(&samples, &lib, &DeformationPath::with_points(kind, 21), None).unwrap();
            for i in 0..env.gamma.len() {
                let tol = 1e-12 * env.mean[i].abs().max(1.0);
                prop_assert!(env.p2_5[i] <= env.mean[i] + tol && env.mean[i] <= env.p97_5[i] + tol,
                    "{} at gamma {}: {} {} {}", kind.code(), env.gamma[i], env.p2_5[i], env.mean[i], env.p97_5[i]);
            }
        }
    }
}

/// Nominal neo-Hookean runs at each noise level, sharing every seed.
fn noise_sweep() -> &'static Vec<(f64, Vec<f64>, f64, f64)> {
    static RUNS: OnceLock<Vec<(f64, Vec<f64>, f64, f64)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [0.0, 1e-4, 1e-3]
            .into_iter()
            .map(|sigma_u| {
                let case = Case { material: MaterialName::NeoHookean, sigma_u, dynamic: false, suppress: Vec::new() };
                let result = run_case(&RunConfig::default(), &case, None).unwrap();
                let ut = result.envelope(PathKind::UniaxialTension);
                let ss = result.envelope(PathKind::SimpleShear);
                (sigma_u, ut.widths(), ut.mean_width(), ss.mean_width())
            })
            .collect()
    })
}

#[test]
fn shear_bands_are_wider_than_tension() {
    for (sigma_u, _, ut, ss) in noise_sweep() {
        assert!(ss > ut, "sigma_u {sigma_u}: SS mean width {ss:.4e} vs UT {ut:.4e}");
    }
}

#[test]
fn tension_band_width_grows_with_noise() {
    let ends: Vec<f64> = noise_sweep().iter().map(|(_, w, _, _)| *w.last().unwrap()).collect();
    assert!(ends.windows(2).all(|w| w[0] <= w[1]), "UT widths at gamma = 1: {ends:?}");
}

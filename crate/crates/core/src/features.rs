//! The 26-entry strain-energy feature library and its derivatives.
//!
//! Index (1-based) | feature
//! ----------------|---------------------------------------------
//! 1–14            | generalized Mooney-Rivlin monomials (Ĩ₁−3)ⁱ(Ĩ₂−3)ʲ
//! 15              | (J−1)²
//! 16              | log(Ĩ₂/3)
//! 17              | Arruda-Boyce AB(Ĩ₁)
//! 18–20           | Ogden OGᵢ(Ĩ₁, J), α = (1.3, 5, 2)
//! 21–23           | (J̃₄−1)², (J̃₄−1)³, (J̃₄−1)⁴
//! 24–26           | (J̃₆−1)², (J̃₆−1)³, (J̃₆−1)⁴
//!
//! Derivatives with respect to `F` are obtained by evaluating the same
//! generic code on [`Dual`] numbers.

use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Dual2, Real};
use crate::error::{Error, Result};
use crate::kinematics::{
    deformation_state, det3, plane_strain, reduced_invariants, DeformationState, FiberPair, Tensor3,
};

pub const N_FEATURES: usize = 26;

/// Feature values `Q_k`.
pub type FeatureVector = [f64; N_FEATURES];

/// `∂Q_k/∂F_ij`, indexed `[k][i][j]`.
pub type FeatureGradient = [Tensor3; N_FEATURES];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// `(Ĩ₁−3)^p1 (Ĩ₂−3)^p2`
    MooneyRivlin { p1: i32, p2: i32 },
    /// `(J−1)^power`
    Volumetric { power: i32 },
    LogI2,
    ArrudaBoyce,
    /// Ogden term using `ogden_alphas[term]`.
    Ogden { term: usize },
    /// `(J̃₄−1)^power` for fiber 0, `(J̃₆−1)^power` for fiber 1.
    Fiber { fiber: usize, power: i32 },
}

impl FeatureKind {
    pub fn is_anisotropic(&self) -> bool {
        matches!(self, FeatureKind::Fiber { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    /// 1-based index in the library table.
    pub index: usize,
    pub kind: FeatureKind,
    pub label: String,
}

/// How the Arruda-Boyce reference offset `c_AB` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AbOffset {
    /// Recomputed so that AB vanishes exactly at `F = I`.
    #[default]
    Exact,
    /// The rounded constant 15.16.
    Rounded,
    Value(f64),
}

pub const AB_OFFSET_ROUNDED: f64 = 15.16;

/// Switch point between the two branches of the inverse Langevin approximation.
const LANGEVIN_BRANCH: f64 = 0.841;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLibrary {
    descriptors: Vec<FeatureDescriptor>,
    ogden_alphas: [f64; 3],
    chain_segments: f64,
    ab_offset: f64,
    suppressed: [bool; N_FEATURES],
    fibers: Option<FiberPair>,
}

impl Default for FeatureLibrary {
    fn default() -> Self {
        Self::new([1.3, 5.0, 2.0], 28.0, AbOffset::Exact, Some(FiberPair::symmetric_degrees(30.0)))
            .expect("default library parameters are valid")
    }
}

fn descriptors() -> Vec<FeatureDescriptor> {
    use FeatureKind::*;
    let mut kinds = Vec::with_capacity(N_FEATURES);
    for degree in 1..=4 {
        for p2 in 0..=degree {
            kinds.push(MooneyRivlin { p1: degree - p2, p2 });
        }
    }
    kinds.push(Volumetric { power: 2 });
    kinds.push(LogI2);
    kinds.push(ArrudaBoyce);
    for term in 0..3 {
        kinds.push(Ogden { term });
    }
    for fiber in 0..2 {
        for power in 2..=4 {
            kinds.push(Fiber { fiber, power });
        }
    }
    kinds
        .into_iter()
        .enumerate()
        .map(|(k, kind)| FeatureDescriptor {
            index: k + 1,
            label: label(&kind),
            kind,
        })
        .collect()
}

fn label(kind: &FeatureKind) -> String {
    fn pow(base: &str, p: i32) -> String {
        match p {
            0 => String::new(),
            1 => format!("({base})"),
            _ => format!("({base})^{p}"),
        }
    }
    match *kind {
        FeatureKind::MooneyRivlin { p1, p2 } => format!("{}{}", pow("I1b-3", p1), pow("I2b-3", p2)),
        FeatureKind::Volumetric { power } => pow("J-1", power),
        FeatureKind::LogI2 => "log(I2b/3)".into(),
        FeatureKind::ArrudaBoyce => "AB(I1b)".into(),
        FeatureKind::Ogden { term } => format!("OG{}(I1b,J)", term + 1),
        FeatureKind::Fiber { fiber, power } => pow(if fiber == 0 { "J4b-1" } else { "J6b-1" }, power),
    }
}

impl FeatureLibrary {
    pub fn new(
        ogden_alphas: [f64; 3],
        chain_segments: f64,
        ab_offset: AbOffset,
        fibers: Option<FiberPair>,
    ) -> Result<Self> {
        if ogden_alphas.iter().any(|a| !(*a >= 1.0)) {
            return Err(Error::Config(format!(
                "Ogden exponents must be >= 1, got {ogden_alphas:?}"
            )));
        }
        if !(chain_segments > 1.0) {
            return Err(Error::Config(format!(
                "chain segment count must exceed 1, got {chain_segments}"
            )));
        }
        let ab_offset = match ab_offset {
            AbOffset::Exact => arruda_boyce_exact_offset(chain_segments)?,
            AbOffset::Rounded => AB_OFFSET_ROUNDED,
            AbOffset::Value(v) => v,
        };
        Ok(Self {
            descriptors: descriptors(),
            ogden_alphas,
            chain_segments,
            ab_offset,
            suppressed: [false; N_FEATURES],
            fibers,
        })
    }

    /// Suppresses the given 1-based feature indices.
    pub fn with_suppressed(mut self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i == 0 || i > N_FEATURES {
                return Err(Error::Config(format!("feature index {i} outside 1..={N_FEATURES}")));
            }
            self.suppressed[i - 1] = true;
        }
        Ok(self)
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }
    pub fn ogden_alphas(&self) -> [f64; 3] {
        self.ogden_alphas
    }
    pub fn chain_segments(&self) -> f64 {
        self.chain_segments
    }
    pub fn ab_offset(&self) -> f64 {
        self.ab_offset
    }
    pub fn fibers(&self) -> Option<&FiberPair> {
        self.fibers.as_ref()
    }
    /// Per-feature suppression flags (0-based).
    pub fn suppression_mask(&self) -> [bool; N_FEATURES] {
        self.suppressed
    }
    pub fn is_suppressed(&self, k: usize) -> bool {
        self.suppressed[k]
    }
    /// 1-based indices of suppressed features.
    pub fn suppressed_indices(&self) -> Vec<usize> {
        (0..N_FEATURES).filter(|&k| self.suppressed[k]).map(|k| k + 1).collect()
    }
    pub fn labels(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.label.clone()).collect()
    }

    /// Feature values from an already computed deformation state.
    pub fn evaluate(&self, state: &DeformationState) -> Result<FeatureVector> {
        self.evaluate_generic(state)
    }

    /// Feature values at a deformation gradient.
    pub fn evaluate_at(&self, f: &Tensor3) -> Result<FeatureVector> {
        check_det(f)?;
        self.evaluate_generic(&deformation_state(f, self.fibers.as_ref()))
    }

    /// Strain energy `W = Q(F)ᵀθ`.
    pub fn energy(&self, f: &Tensor3, theta: &[f64]) -> Result<f64> {
        let q = self.evaluate_at(f)?;
        Ok(q.iter().zip(theta).map(|(q, t)| q * t).sum())
    }

    /// `∂Q/∂F` as 26 full 3×3 tensors, using the library's fiber pair.
    pub fn gradient(&self, f: &Tensor3) -> Result<FeatureGradient> {
        gradient(self, f, self.fibers.as_ref())
    }

    /// In-plane derivatives `[∂Q/∂F₁₁, ∂Q/∂F₁₂, ∂Q/∂F₂₁, ∂Q/∂F₂₂]` of a
    /// plane-strain state given by its in-plane components.
    ///
    /// Chains `∂Q/∂v` (dual numbers over the five reduced invariants) with
    /// the closed-form `∂v/∂F`. [`Self::inplane_gradient_direct`] is the
    /// independent reference route.
    pub fn inplane_gradient(&self, f2: [f64; 4]) -> Result<[[f64; 4]; N_FEATURES]> {
        let det = f2[0] * f2[3] - f2[1] * f2[2];
        if !(det > 0.0) {
            return Err(Error::Domain(format!("det(F) = {det:e} is not positive")));
        }
        let ri = reduced_invariants(f2, self.fibers.as_ref());
        let v: [Dual<f64, 5>; 5] = std::array::from_fn(|k| Dual::variable(ri.values[k], k));
        let fiber = self.fibers.as_ref().map(|_| [v[3], v[4]]);
        let q = self.evaluate_reduced(v[0], v[1], v[2], fiber)?;
        Ok(q.map(|qk| {
            let mut g = [0.0; 4];
            for (dv, grad) in qk.eps.iter().zip(&ri.gradients) {
                if *dv != 0.0 {
                    for c in 0..4 {
                        g[c] += dv * grad[c];
                    }
                }
            }
            g
        }))
    }

    /// Same as [`Self::inplane_gradient`], differentiating through the full
    /// kinematics with dual numbers over the four in-plane components of `F`.
    pub fn inplane_gradient_direct(&self, f2: [f64; 4]) -> Result<[[f64; 4]; N_FEATURES]> {
        let vars: [Dual<f64, 4>; 4] = std::array::from_fn(|k| Dual::variable(f2[k], k));
        let f = plane_strain(vars[0], vars[1], vars[2], vars[3]);
        check_det(&f)?;
        let q = self.evaluate_generic(&deformation_state(&f, self.fibers.as_ref()))?;
        Ok(q.map(|d| d.eps))
    }

    /// Values, in-plane gradients and in-plane Hessians of every feature.
    pub fn inplane_hessian(&self, f2: [f64; 4]) -> Result<[[[f64; 4]; 4]; N_FEATURES]> {
        let vars: [Dual2<4>; 4] = std::array::from_fn(|k| Dual {
            re: Dual::variable(f2[k], k),
            eps: std::array::from_fn(|j| Dual::constant(if j == k { 1.0 } else { 0.0 })),
        });
        let f = plane_strain(vars[0], vars[1], vars[2], vars[3]);
        check_det(&f)?;
        let q = self.evaluate_generic(&deformation_state(&f, self.fibers.as_ref()))?;
        Ok(q.map(|d| std::array::from_fn(|i| d.eps[i].eps)))
    }

    /// Generic evaluation used for plain values and for dual numbers alike.
    pub fn evaluate_generic<T: Real>(&self, state: &DeformationState<T>) -> Result<[T; N_FEATURES]> {
        let inv = &state.invariants;
        let fiber = state.fiber_invariants.as_ref().map(|f| [f.j4_bar, f.j6_bar]);
        self.evaluate_reduced(inv.i1_bar, inv.i2_bar, inv.j, fiber)
    }

    /// Evaluation from the reduced invariant set `(Ĩ₁, Ĩ₂, J, [J̃₄, J̃₆])`,
    /// which is all the library depends on.
    pub fn evaluate_reduced<T: Real>(
        &self,
        i1_bar: T,
        i2_bar: T,
        j: T,
        fiber: Option<[T; 2]>,
    ) -> Result<[T; N_FEATURES]> {
        let needs_fibers = self
            .descriptors
            .iter()
            .any(|d| d.kind.is_anisotropic() && !self.suppressed[d.index - 1]);
        if needs_fibers && fiber.is_none() {
            return Err(Error::Config(
                "anisotropic features are active but no fiber invariants were supplied".into(),
            ));
        }
        let a = i1_bar - 3.0;
        let b = i2_bar - 3.0;
        let mut out = [T::cst(0.0); N_FEATURES];
        for (k, d) in self.descriptors.iter().enumerate() {
            if self.suppressed[k] {
                continue;
            }
            out[k] = match d.kind {
                FeatureKind::MooneyRivlin { p1, p2 } => a.powi(p1) * b.powi(p2),
                FeatureKind::Volumetric { power } => (j - 1.0).powi(power),
                FeatureKind::LogI2 => (i2_bar / 3.0).ln(),
                FeatureKind::ArrudaBoyce => arruda_boyce_generic(i1_bar, self.chain_segments, self.ab_offset)?,
                FeatureKind::Ogden { term } => ogden_generic(self.ogden_alphas[term], i1_bar, j),
                FeatureKind::Fiber { fiber: which, power } => {
                    let jb = fiber.expect("checked above")[which];
                    (jb - 1.0).powi(power)
                }
            };
        }
        Ok(out)
    }
}

fn check_det<T: Real>(f: &Tensor3<T>) -> Result<()> {
    let det = det3(f).value();
    if !(det > 0.0) {
        return Err(Error::Domain(format!("det(F) = {det:e} is not positive")));
    }
    Ok(())
}

/// `∂Q_k/∂F_ij` for every feature by forward-mode differentiation.
///
/// The active components are `F₁₁, F₁₂, F₂₁, F₂₂, F₃₃`; out-of-plane shear
/// derivatives vanish identically for plane-strain states and in-plane fibers.
pub fn gradient(library: &FeatureLibrary, f: &Tensor3, fibers: Option<&FiberPair>) -> Result<FeatureGradient> {
    check_det(f)?;
    for (i, j) in [(0, 2), (1, 2), (2, 0), (2, 1)] {
        if f[i][j] != 0.0 {
            return Err(Error::Domain("F must have zero out-of-plane shear".into()));
        }
    }
    const ACTIVE: [(usize, usize); 5] = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)];
    let mut fd = [[Dual::<f64, 5>::constant(0.0); 3]; 3];
    for (k, &(i, j)) in ACTIVE.iter().enumerate() {
        fd[i][j] = Dual::variable(f[i][j], k);
    }
    let q = library.evaluate_generic(&deformation_state(&fd, fibers))?;
    let mut out = [[[0.0; 3]; 3]; N_FEATURES];
    for (k, qk) in q.iter().enumerate() {
        for (a, &(i, j)) in ACTIVE.iter().enumerate() {
            out[k][i][j] = qk.eps[a];
        }
    }
    Ok(out)
}

/// Inverse Langevin function, piecewise rational/tangent approximation.
pub fn inverse_langevin(x: f64) -> Result<f64> {
    inverse_langevin_generic(x)
}

pub fn inverse_langevin_generic<T: Real>(x: T) -> Result<T> {
    let v = x.value();
    if !(v.abs() < 1.0) {
        return Err(Error::Domain(format!("inverse Langevin argument {v} outside (-1, 1)")));
    }
    if v.abs() < LANGEVIN_BRANCH {
        Ok((x * 1.59).tan() * 1.31 + x * 0.91)
    } else {
        Ok((-x + v.signum()).recip())
    }
}

/// Arruda-Boyce feature with the given chain count and offset.
pub fn arruda_boyce_generic<T: Real>(i1_bar: T, chain_segments: f64, offset: f64) -> Result<T> {
    let sn = chain_segments.sqrt();
    let lambda = (i1_bar / 3.0).sqrt();
    if !(lambda.value() < sn) {
        return Err(Error::Domain(format!(
            "chain stretch {} reached the locking limit {sn}",
            lambda.value()
        )));
    }
    let beta = inverse_langevin_generic(lambda / sn)?;
    Ok((beta * lambda + (beta / beta.sinh()).ln() * sn) * (10.0 * sn) - offset)
}

/// Arruda-Boyce feature with `N_c = 28` and the exact reference offset.
pub fn arruda_boyce(i1_bar: f64) -> Result<f64> {
    let offset = arruda_boyce_exact_offset(28.0)?;
    arruda_boyce_generic(i1_bar, 28.0, offset)
}

/// Offset making the Arruda-Boyce feature vanish at `Ĩ₁ = 3`.
pub fn arruda_boyce_exact_offset(chain_segments: f64) -> Result<f64> {
    arruda_boyce_generic(3.0, chain_segments, 0.0)
}

/// Ogden feature `(2/α) Σ λ̃ₖ^α` written in terms of `(Ĩ₁, J)`.
///
/// With `m = (λ̃₁² + λ̃₂²)/2` and `h² = m² − J^{2/3}`, the in-plane part
/// `(m+h)^{α/2} + (m−h)^{α/2}` is even in `h`. Near equal stretches the even
/// binomial series in `h²` is used, which keeps the function (and all of its
/// dual-number derivatives) smooth through the identity where the
/// square-root form is not differentiable.
pub fn ogden_generic<T: Real>(alpha: f64, i1_bar: T, j: T) -> T {
    let j23 = j.cbrt().powi(2);
    let s = i1_bar - j23.recip();
    let m = s * 0.5;
    let q = m * m - j23;
    let beta = 0.5 * alpha;
    let ratio = q.value() / (m.value() * m.value());
    let inplane = if ratio.abs() <= 1e-2 {
        // 2 m^β Σ_k C(β, 2k) (q/m²)^k
        let r = q / (m * m);
        let mut coeff = 1.0;
        let mut rk = T::cst(1.0);
        let mut sum = T::cst(1.0);
        for k in 1..=10 {
            let n = (2 * k) as f64;
            coeff *= (beta - n + 2.0) * (beta - n + 1.0) / ((n - 1.0) * n);
            rk *= r;
            sum += rk * coeff;
        }
        m.powf(beta) * sum * 2.0
    } else {
        let h = if q.value() > 0.0 { q.sqrt() } else { T::cst(0.0) };
        (m + h).powf(beta) + (m - h).powf(beta)
    };
    (inplane + j.powf(-alpha / 3.0)) * (2.0 / alpha)
}

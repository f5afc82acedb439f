//! Benchmark hyperelastic materials used to synthesize data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Dual2, Real};
use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, N_FEATURES};
use crate::kinematics::{deformation_state, plane_strain, reduced_invariants, FiberPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialName {
    NeoHookean,
    Isihara,
    GentThomas,
    HainesWilson,
    ArrudaBoyce,
    Ogden1,
    Ogden3,
    Holzapfel,
}

impl MaterialName {
    pub const ALL: [MaterialName; 8] = [
        MaterialName::NeoHookean,
        MaterialName::Isihara,
        MaterialName::GentThomas,
        MaterialName::HainesWilson,
        MaterialName::ArrudaBoyce,
        MaterialName::Ogden1,
        MaterialName::Ogden3,
        MaterialName::Holzapfel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MaterialName::NeoHookean => "neo-hookean",
            MaterialName::Isihara => "isihara",
            MaterialName::GentThomas => "gent-thomas",
            MaterialName::HainesWilson => "haines-wilson",
            MaterialName::ArrudaBoyce => "arruda-boyce",
            MaterialName::Ogden1 => "ogden1",
            MaterialName::Ogden3 => "ogden3",
            MaterialName::Holzapfel => "holzapfel",
        }
    }
}

impl fmt::Display for MaterialName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaterialName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        MaterialName::ALL
            .into_iter()
            .find(|m| m.as_str().replace('-', "") == key)
            .ok_or_else(|| {
                let names: Vec<_> = MaterialName::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown material '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Fiber stiffness `k₁` and exponent `k₂` of the exponential fiber term.
pub const HOLZAPFEL_K1: f64 = 0.9;
pub const HOLZAPFEL_K2: f64 = 0.8;

/// A benchmark strain-energy density.
///
/// Library-representable materials evaluate `θ_trueᵀQ` through a library
/// restricted to their active features. The Holzapfel material evaluates its
/// exponential fiber terms directly; its `theta_true` holds only the
/// isotropic part.
#[derive(Clone, Debug)]
pub struct BenchmarkMaterial {
    pub name: MaterialName,
    pub theta_true: [f64; N_FEATURES],
    pub closed_form: bool,
    library: FeatureLibrary,
}

impl BenchmarkMaterial {
    pub fn new(name: MaterialName) -> Self {
        let mut theta = [0.0; N_FEATURES];
        let mut set = |i: usize, v: f64| theta[i - 1] = v;
        match name {
            MaterialName::NeoHookean => {
                set(1, 0.5);
                set(15, 1.5);
            }
            MaterialName::Isihara => {
                set(1, 0.5);
                set(2, 1.0);
                set(3, 1.0);
                set(15, 1.5);
            }
            MaterialName::GentThomas => {
                set(1, 0.5);
                set(3, 1.0);
                set(16, 1.0);
                set(15, 1.5);
            }
            MaterialName::HainesWilson => {
                set(1, 0.5);
                set(2, 1.0);
                set(4, 0.7);
                set(3, 0.2);
                set(15, 1.5);
            }
            MaterialName::ArrudaBoyce => {
                set(17, 0.25);
                set(15, 1.5);
            }
            MaterialName::Ogden1 => {
                set(18, 0.65);
                set(15, 1.5);
            }
            MaterialName::Ogden3 => {
                set(18, 0.4);
                set(19, 0.0012);
                set(20, 0.1);
                set(15, 1.5);
            }
            MaterialName::Holzapfel => {
                set(1, 0.5);
                set(15, 1.0);
            }
        }
        let inactive: Vec<usize> = (1..=N_FEATURES).filter(|&i| theta[i - 1] == 0.0).collect();
        let library = FeatureLibrary::default()
            .with_suppressed(&inactive)
            .expect("indices are in range");
        Self {
            name,
            theta_true: theta,
            closed_form: name == MaterialName::Holzapfel,
            library,
        }
    }

    /// Whether `theta_true` reproduces the energy exactly in the library basis.
    pub fn representable(&self) -> bool {
        !self.closed_form
    }

    /// Fiber directions, present only for materials with fiber terms.
    pub fn fibers(&self) -> Option<&FiberPair> {
        if self.closed_form {
            self.library.fibers()
        } else {
            None
        }
    }

    /// Energy as a function of `[Ĩ₁, Ĩ₂, J, J̃₄, J̃₆]`.
    pub fn energy_reduced<T: Real>(&self, v: [T; 5]) -> Result<T> {
        let fiber = if self.closed_form { Some([v[3], v[4]]) } else { None };
        let q = self.library.evaluate_reduced(v[0], v[1], v[2], None)?;
        let mut w = T::cst(0.0);
        for (qk, &t) in q.iter().zip(&self.theta_true) {
            if t != 0.0 {
                w += *qk * t;
            }
        }
        if let Some([j4, j6]) = fiber {
            let c = HOLZAPFEL_K1 / (2.0 * HOLZAPFEL_K2);
            let term = |jb: T| ((jb - 1.0) * (jb - 1.0) * HOLZAPFEL_K2).exp() - 1.0;
            w += (term(j4) + term(j6)) * c;
        }
        Ok(w)
    }

    /// Strain energy at an in-plane deformation gradient.
    pub fn energy(&self, f2: [f64; 4]) -> Result<f64> {
        check_det(f2)?;
        let ri = reduced_invariants(f2, self.fibers());
        self.energy_reduced(ri.values)
    }

    /// In-plane first Piola-Kirchhoff stress `[P₁₁, P₁₂, P₂₁, P₂₂]`.
    pub fn stress(&self, f2: [f64; 4]) -> Result<[f64; 4]> {
        check_det(f2)?;
        let ri = reduced_invariants(f2, self.fibers());
        let v: [Dual<f64, 5>; 5] = std::array::from_fn(|k| Dual::variable(ri.values[k], k));
        let dw = self.energy_reduced(v)?.eps;
        let mut p = [0.0; 4];
        for (d, g) in dw.iter().zip(&ri.gradients) {
            for c in 0..4 {
                p[c] += d * g[c];
            }
        }
        Ok(p)
    }

    /// Stress and material tangent `∂²W/∂F∂F` over the in-plane components,
    /// differentiating the full kinematics with nested dual numbers.
    pub fn stress_and_tangent(&self, f2: [f64; 4]) -> Result<([f64; 4], [[f64; 4]; 4])> {
        check_det(f2)?;
        let vars: [Dual2<4>; 4] = std::array::from_fn(|k| Dual {
            re: Dual::variable(f2[k], k),
            eps: std::array::from_fn(|j| Dual::constant(if j == k { 1.0 } else { 0.0 })),
        });
        let f = plane_strain(vars[0], vars[1], vars[2], vars[3]);
        let s = deformation_state(&f, self.fibers());
        let fi = s.fiber_invariants.map(|x| [x.j4_bar, x.j6_bar]).unwrap_or([Real::cst(1.0); 2]);
        let w = self.energy_reduced([s.invariants.i1_bar, s.invariants.i2_bar, s.invariants.j, fi[0], fi[1]])?;
        let p = w.re.eps;
        let k = std::array::from_fn(|i| w.eps[i].eps);
        Ok((p, k))
    }
}

fn check_det(f2: [f64; 4]) -> Result<()> {
    let det = f2[0] * f2[3] - f2[1] * f2[2];
    if !(det > 0.0) {
        return Err(Error::Domain(format!("det(F) = {det:e} is not positive")));
    }
    Ok(())
}

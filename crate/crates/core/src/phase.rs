//! Finite-dimensional Kähler manifolds with Hamiltonian action: projective
//! spaces, powers of the projective line under diagonal SU(2), and products
//! `Z x Z` under `K x K`.
//!
//! Points are stored as unit homogeneous representatives; the phase gauge is
//! left free. Every point component is acted on by one algebra block, so the
//! action, infinitesimal action and moment map are computed uniformly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::convex::{hess_inner, ConvexInvariantFunction, IdentityDefect, IdentityReport};
use crate::error::{Error, Result};
use crate::lie::{
    c, coadjoint, exponential, exponential_compact, pair, random_lie_element, random_unitary,
    AlgebraDescriptor, Basis, CMatrix, ComplexLieElement, DualElement, GroupElement, LieElement, I,
};
use crate::linalg::{nullspace_complex, nullspace_real, orthonormalize};

pub type CVector = DVector<Complex64>;

const TANGENCY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "space", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    /// `P^n` under `U(n+1)` (or `SU(n+1)` when `special`).
    Projective {
        n: usize,
        #[serde(default)]
        special: bool,
    },
    /// `(P^1)^d` under the diagonal `SU(2)`.
    P1Power { d: usize },
    /// `Z x Z` under `K x K`.
    Product { inner: Box<SpaceSpec> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    components: Vec<CVector>,
}

impl PhasePoint {
    /// Normalizes each component; fails on zero components.
    pub fn new(components: Vec<CVector>) -> Result<Self> {
        let components = components
            .into_iter()
            .map(|v| {
                let n = v.norm();
                if n < 1e-14 || !n.is_finite() {
                    Err(Error::InvalidPoint("zero or non-finite component".into()))
                } else {
                    Ok(v / c(n, 0.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PhasePoint { components })
    }

    pub fn components(&self) -> &[CVector] {
        &self.components
    }

    /// Concatenation, used for product spaces.
    pub fn concat(&self, other: &PhasePoint) -> PhasePoint {
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        PhasePoint { components }
    }

    /// `max_i |w_i - z_i <z_i, w_i>|` (sine of the Fubini-Study angle), zero iff the points agree modulo phase.
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| (b - a * a.dotc(b)).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        self.components.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect()
    }

    pub fn from_pairs(pairs: &[Vec<[f64; 2]>]) -> Result<Self> {
        PhasePoint::new(
            pairs
                .iter()
                .map(|v| CVector::from_iterator(v.len(), v.iter().map(|p| c(p[0], p[1]))))
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    components: Vec<CVector>,
}

impl TangentVector {
    pub fn new(components: Vec<CVector>) -> Self {
        TangentVector { components }
    }

    pub fn components(&self) -> &[CVector] {
        &self.components
    }

    pub fn scale(&self, s: Complex64) -> TangentVector {
        TangentVector { components: self.components.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &TangentVector) -> TangentVector {
        TangentVector {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }

    fn stacked(&self) -> CVector {
        let n: usize = self.components.iter().map(|v| v.len()).sum();
        CVector::from_iterator(n, self.components.iter().flat_map(|v| v.iter().cloned()))
    }
}

/// One concrete Kähler K-manifold.
#[derive(Clone, Debug)]
pub struct PhaseSpace {
    spec: SpaceSpec,
    desc: AlgebraDescriptor,
    basis: Basis,
    /// `(ambient dimension, block index)` for each point component.
    layout: Vec<(usize, usize)>,
}

impl PhaseSpace {
    pub fn new(spec: &SpaceSpec) -> Result<Self> {
        let (desc, layout) = Self::build(spec)?;
        Ok(PhaseSpace { spec: spec.clone(), basis: Basis::new(&desc), desc, layout })
    }

    pub fn projective(n: usize) -> Self {
        Self::new(&SpaceSpec::Projective { n, special: false }).expect("valid projective space")
    }

    pub fn p1_power(d: usize) -> Self {
        Self::new(&SpaceSpec::P1Power { d }).expect("valid (P^1)^d")
    }

    pub fn product(inner: &SpaceSpec) -> Self {
        Self::new(&SpaceSpec::Product { inner: Box::new(inner.clone()) }).expect("valid product")
    }

    fn build(spec: &SpaceSpec) -> Result<(AlgebraDescriptor, Vec<(usize, usize)>)> {
        match spec {
            SpaceSpec::Projective { n, special } => {
                if *n == 0 {
                    return Err(Error::Config("projective space needs n >= 1".into()));
                }
                let desc = if *special {
                    AlgebraDescriptor::special_unitary(n + 1)
                } else {
                    AlgebraDescriptor::unitary(n + 1)
                };
                Ok((desc, vec![(n + 1, 0)]))
            }
            SpaceSpec::P1Power { d } => {
                if *d == 0 {
                    return Err(Error::Config("p1_power needs d >= 1".into()));
                }
                Ok((AlgebraDescriptor::special_unitary(2), vec![(2, 0); *d]))
            }
            SpaceSpec::Product { inner } => {
                let (d, l) = Self::build(inner)?;
                let shift = d.num_blocks();
                let mut layout = l.clone();
                layout.extend(l.iter().map(|&(n, b)| (n, b + shift)));
                Ok((d.direct_sum(&d), layout))
            }
        }
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn algebra(&self) -> &AlgebraDescriptor {
        &self.desc
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn num_components(&self) -> usize {
        self.layout.len()
    }

    /// Ambient dimension of each point component.
    pub fn component_dims(&self) -> Vec<usize> {
        self.layout.iter().map(|l| l.0).collect()
    }

    /// Where an indefinite `|alpha|^2 - |beta|^2` splits the blocks of a product.
    pub fn factor_split(&self) -> usize {
        match &self.spec {
            SpaceSpec::Product { .. } => self.desc.num_blocks() / 2,
            _ => self.desc.num_blocks(),
        }
    }

    /// Complex dimension of the manifold.
    pub fn complex_dim(&self) -> usize {
        self.layout.iter().map(|&(n, _)| n - 1).sum()
    }

    pub fn check_point(&self, z: &PhasePoint) -> Result<()> {
        let ok = z.components.len() == self.layout.len()
            && z.components.iter().zip(&self.layout).all(|(v, &(n, _))| v.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPoint(format!(
                "expected {} components of sizes {:?}",
                self.layout.len(),
                self.layout.iter().map(|l| l.0).collect::<Vec<_>>()
            )))
        }
    }

    pub fn point(&self, components: Vec<CVector>) -> Result<PhasePoint> {
        let z = PhasePoint::new(components)?;
        self.check_point(&z)?;
        Ok(z)
    }

    /// Point from real coordinates per component, e.g. `[[1,0],[0,1]]`.
    pub fn real_point(&self, comps: &[&[f64]]) -> Result<PhasePoint> {
        self.point(
            comps
                .iter()
                .map(|v| CVector::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0))))
                .collect(),
        )
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let comps = self
            .layout
            .iter()
            .map(|&(n, _)| {
                CVector::from_fn(n, |_, _| {
                    c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                })
            })
            .collect();
        PhasePoint::new(comps).expect("gaussian vectors are nonzero")
    }

    /// Random unit tangent vector at `z`.
    pub fn random_tangent<R: Rng + ?Sized>(&self, z: &PhasePoint, rng: &mut R) -> TangentVector {
        let comps = z
            .components
            .iter()
            .map(|zi| {
                let v = CVector::from_fn(zi.len(), |_, _| {
                    c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                });
                let p = zi.dotc(&v);
                v - zi * p
            })
            .collect();
        let t = TangentVector { components: comps };
        let n = t.norm();
        t.scale(c(1.0 / n, 0.0))
    }

    /// `g_i z_i / |g_i z_i|` componentwise.
    pub fn act(&self, g: &GroupElement, z: &PhasePoint) -> Result<PhasePoint> {
        self.check_point(z)?;
        let comps = z
            .components
            .iter()
            .zip(&self.layout)
            .map(|(zi, &(_, b))| &g.blocks()[b] * zi)
            .collect::<Vec<_>>();
        if comps.iter().any(|v| v.norm() < 1e-14) {
            return Err(Error::InvalidPoint("action collapsed a component".into()));
        }
        PhasePoint::new(comps)
    }

    /// `sum_i log |g_i zhat_i|`, growing at rate `-<mu, df>` along the lifted flow.
    pub fn kempf_ness_value(&self, g: &GroupElement, z0: &PhasePoint) -> Result<f64> {
        self.check_point(z0)?;
        Ok(z0
            .components
            .iter()
            .zip(&self.layout)
            .map(|(zi, &(_, b))| (&g.blocks()[b] * zi).norm().ln())
            .sum())
    }

    /// `sigma_z(xi)_i = xi_b z_i - (z_i^* xi_b z_i) z_i`, complex-linear in `xi`.
    pub fn infinitesimal_action(&self, z: &PhasePoint, xi: &ComplexLieElement) -> TangentVector {
        let comps = z
            .components
            .iter()
            .zip(&self.layout)
            .map(|(zi, &(_, b))| {
                let w = &xi.blocks()[b] * zi;
                let p = zi.dotc(&w);
                w - zi * p
            })
            .collect();
        TangentVector { components: comps }
    }

    pub fn sigma(&self, z: &PhasePoint, xi: &LieElement) -> TangentVector {
        self.infinitesimal_action(z, &xi.to_complex())
    }

    /// `sum_components i z_i z_i^*` accumulated per block, trace-projected on `su` blocks.
    pub fn moment(&self, z: &PhasePoint) -> DualElement {
        let mut blocks: Vec<CMatrix> =
            self.desc.blocks.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (zi, &(_, b)) in z.components.iter().zip(&self.layout) {
            blocks[b] += zi * zi.adjoint() * I;
        }
        DualElement::new(&self.desc, blocks).expect("i z z^* is anti-Hermitian")
    }

    fn check_tangent(&self, z: &PhasePoint, v: &TangentVector) -> Result<()> {
        let defect = z
            .components
            .iter()
            .zip(&v.components)
            .map(|(zi, vi)| zi.dotc(vi).norm())
            .fold(0.0, f64::max);
        if v.components.len() != z.components.len() || defect > TANGENCY_TOL * (1.0 + v.norm()) {
            Err(Error::NotTangent { defect })
        } else {
            Ok(())
        }
    }

    /// `omega(u, v) = 2 sum Im <u_i, v_i>`.
    pub fn symplectic_form(&self, z: &PhasePoint, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        self.check_tangent(z, u)?;
        self.check_tangent(z, v)?;
        Ok(2.0 * u.components.iter().zip(&v.components).map(|(a, b)| a.dotc(b).im).sum::<f64>())
    }

    /// `omega(u, J v) = 2 sum Re <u_i, v_i>`.
    pub fn metric(&self, z: &PhasePoint, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        self.check_tangent(z, u)?;
        self.check_tangent(z, v)?;
        Ok(2.0 * u.components.iter().zip(&v.components).map(|(a, b)| a.dotc(b).re).sum::<f64>())
    }

    pub fn metric_norm(&self, v: &TangentVector) -> f64 {
        std::f64::consts::SQRT_2 * v.norm()
    }

    pub fn complex_structure(&self, v: &TangentVector) -> TangentVector {
        v.scale(I)
    }

    /// Columns `sigma_z(e_k)` for the orthonormal basis, stacked over components.
    pub fn action_matrix(&self, z: &PhasePoint) -> CMatrix {
        let cols: Vec<CVector> = self
            .basis
            .elements()
            .iter()
            .map(|e| self.sigma(z, e).stacked())
            .collect();
        crate::linalg::columns_complex(&cols, self.layout.iter().map(|l| l.0).sum())
    }

    /// Orthonormal basis of `k_z`.
    pub fn stabilizer_k(&self, z: &PhasePoint, tol: f64) -> Vec<LieElement> {
        let s = self.action_matrix(z);
        let (r, m) = (s.nrows(), s.ncols());
        let stacked = DMatrix::from_fn(2 * r, m, |j, k| {
            if j < r {
                s[(j, k)].re
            } else {
                s[(j - r, k)].im
            }
        });
        nullspace_real(&stacked, tol).iter().map(|v| self.basis.element(v)).collect()
    }

    /// Basis of `g_z`, orthonormal for the Frobenius Hermitian product.
    pub fn stabilizer_g(&self, z: &PhasePoint, tol: f64) -> Vec<ComplexLieElement> {
        nullspace_complex(&self.action_matrix(z), tol)
            .iter()
            .map(|v| self.basis.complex_element(v))
            .collect()
    }

    /// Coordinates of a `g_z` basis as columns, re-orthonormalized.
    pub fn stabilizer_coords(&self, z: &PhasePoint, tol: f64) -> Vec<CVector> {
        orthonormalize(&nullspace_complex(&self.action_matrix(z), tol), 1e-10)
    }
}

/// Finite-difference derivative of `t -> <mu(normalize(z + t v)), eta>` at 0.
pub fn moment_derivative_fd(
    space: &PhaseSpace,
    z: &PhasePoint,
    v: &TangentVector,
    eta: &LieElement,
    h: f64,
) -> Result<f64> {
    let at = |t: f64| -> Result<f64> {
        let comps = z
            .components
            .iter()
            .zip(&v.components)
            .map(|(a, b)| a + b * c(t, 0.0))
            .collect();
        pair(&space.moment(&PhasePoint::new(comps)?), eta)
    };
    Ok((at(h)? - at(-h)?) / (2.0 * h))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentAxiomReport {
    pub samples: usize,
    pub equivariance_defect: f64,
    pub moment_condition_defect: f64,
    pub infinitesimal_defect: f64,
}

/// Checks `mu(k z) = Ad*_k mu(z)`, `d<mu, eta>(v) = omega(v, sigma(eta))`
/// and `d mu(sigma(xi)) = ad*_xi mu` on random samples.
pub fn verify_moment_axioms<R: Rng + ?Sized>(
    space: &PhaseSpace,
    samples: usize,
    rng: &mut R,
) -> Result<MomentAxiomReport> {
    let basis = space.basis();
    let (mut eq, mut mc, mut inf) = (0.0f64, 0.0f64, 0.0f64);
    let h = 1e-4;
    for _ in 0..samples {
        let z = space.random_point(rng);
        let k = random_unitary(basis, rng);
        let lhs = space.moment(&space.act(&k, &z)?);
        let rhs = coadjoint(&k, &space.moment(&z))?;
        eq = eq.max(lhs.sub(&rhs)?.norm());

        let eta = random_lie_element(basis, rng, 1.0);
        let eta = eta.scale(1.0 / eta.norm());
        let v = space.random_tangent(&z, rng);
        let fd = moment_derivative_fd(space, &z, &v, &eta, h)?;
        let exact = space.symplectic_form(&z, &v, &space.sigma(&z, &eta))?;
        mc = mc.max((fd - exact).abs());

        let xi = random_lie_element(basis, rng, 1.0);
        let plus = space.moment(&space.act(&exponential_compact(&xi.scale(h)), &z)?);
        let minus = space.moment(&space.act(&exponential_compact(&xi.scale(-h)), &z)?);
        let fd = plus.sub(&minus)?.scale(0.5 / h);
        let exact = xi.bracket(&space.moment(&z).sharp())?.flat();
        inf = inf.max(fd.sub(&exact)?.norm());
    }
    Ok(MomentAxiomReport {
        samples,
        equivariance_defect: eq,
        moment_condition_defect: mc,
        infinitesimal_defect: inf,
    })
}

/// Identities of the coadjoint operator `ad*_{df|mu}` at sampled points:
/// its Hermitian self-adjointness (after multiplying by `i`) for the extended
/// Hessian form, and `((ad*_{df} xi*, eta*))_mu = -<J sigma(xi), sigma(eta)>`
/// with `xi = Hess(xi*)`, `eta = Hess(eta*)`.
///
/// `literal_symmetry` is the defect of plain symmetry of the real form, which
/// does not vanish (the real form is antisymmetric); it is reported, not asserted.
pub fn verify_coadjoint_hessian_identities<R: Rng + ?Sized>(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    samples: usize,
    rng: &mut R,
) -> Result<(IdentityReport, f64)> {
    let basis = space.basis();
    let (mut herm, mut sign, mut literal) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let z = space.random_point(rng);
        let mu = space.moment(&z);
        let df = f.gradient(&mu)?;
        let xs = random_lie_element(basis, rng, 1.0).flat();
        let es = random_lie_element(basis, rng, 1.0).flat();
        let ad_x = df.bracket(&xs.sharp())?.flat();
        let ad_e = df.bracket(&es.sharp())?.flat();
        let a = hess_inner(f, &mu, &ad_x, &es)?;
        let b = hess_inner(f, &mu, &xs, &ad_e)?;
        let scale = 1.0 + a.abs().max(b.abs());
        herm = herm.max((a + b).abs() / scale);
        literal = literal.max((a - b).abs() / scale);

        let xi = f.hessian_apply(&mu, &xs)?;
        let eta = f.hessian_apply(&mu, &es)?;
        let sx = space.sigma(&z, &xi);
        let se = space.sigma(&z, &eta);
        let rhs = -space.metric(&z, &space.complex_structure(&sx), &se)?;
        sign = sign.max((a - rhs).abs() / scale);
    }
    let report = IdentityReport {
        function: f.name(),
        trials: samples,
        checks: vec![
            IdentityDefect::new("hermitian_self_adjointness", herm, 1e-6),
            IdentityDefect::new("hessian_metric_sign_identity", sign, 1e-6),
        ],
    };
    Ok((report, literal))
}

/// `exp` of a random element of `g` with norm at most `max_norm`.
pub fn random_group_element<R: Rng + ?Sized>(basis: &Basis, rng: &mut R, max_norm: f64) -> GroupElement {
    let zeta = crate::lie::random_complex_element(basis, rng, 1.0);
    let r = max_norm * rng.gen::<f64>();
    exponential(&zeta.scale(r / zeta.norm()))
}

//! Ad*-invariant convex functions on `k*` with first and second derivatives,
//! the inverse gradient map, and Legendre transforms.
//!
//! Spectral functions act on the eigenvalue parameters `a_j` of `-i alpha_b`
//! (real because `alpha_b` is anti-Hermitian): `f(alpha) = sum_b sum_j phi(a_j)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{
    adjoint, c, coadjoint, pair, random_lie_element, random_unitary, AlgebraDescriptor,
    Basis, CMatrix, ComplexLieElement, DualElement, LieElement, I,
};

/// Scalar profile for spectral functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarFn {
    /// `t^k`
    Power(u32),
    Cosh,
    /// `e^t - t`
    ExpLin,
}

impl ScalarFn {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ScalarFn::Power(k) => t.powi(k as i32),
            ScalarFn::Cosh => t.cosh(),
            ScalarFn::ExpLin => t.exp() - t,
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            ScalarFn::Power(0) => 0.0,
            ScalarFn::Power(k) => k as f64 * t.powi(k as i32 - 1),
            ScalarFn::Cosh => t.sinh(),
            ScalarFn::ExpLin => t.exp() - 1.0,
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            ScalarFn::Power(k) if k < 2 => 0.0,
            ScalarFn::Power(k) => (k * (k - 1)) as f64 * t.powi(k as i32 - 2),
            ScalarFn::Cosh => t.cosh(),
            ScalarFn::ExpLin => t.exp(),
        }
    }

    pub fn is_strictly_convex(&self) -> bool {
        match *self {
            ScalarFn::Power(k) => k >= 2 && k % 2 == 0,
            ScalarFn::Cosh | ScalarFn::ExpLin => true,
        }
    }

    fn label(&self) -> String {
        match self {
            ScalarFn::Power(k) => format!("power:{k}"),
            ScalarFn::Cosh => "cosh".into(),
            ScalarFn::ExpLin => "explin".into(),
        }
    }
}

/// Common interface; `hessian_complex` is the complex-linear extension of the
/// Hessian to `g` and is the primitive the real version is derived from.
pub trait ConvexInvariantFunction: Send + Sync + std::fmt::Debug {
    fn name(&self) -> String;
    fn is_strict(&self) -> bool;
    fn domain(&self) -> String {
        "all of k*".into()
    }
    fn value(&self, alpha: &DualElement) -> Result<f64>;
    fn gradient(&self, alpha: &DualElement) -> Result<LieElement>;
    fn hessian_complex(&self, alpha: &DualElement, beta: &ComplexLieElement)
        -> Result<ComplexLieElement>;

    fn hessian_apply(&self, alpha: &DualElement, beta: &DualElement) -> Result<LieElement> {
        let h = self.hessian_complex(alpha, &beta.to_complex())?;
        Ok(h.split().0)
    }
}

/// `f(alpha) = |alpha|^2 = -sum Tr(alpha_b^2)`.
#[derive(Clone, Debug, Default)]
pub struct Quadratic;

impl ConvexInvariantFunction for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }
    fn is_strict(&self) -> bool {
        true
    }
    fn value(&self, alpha: &DualElement) -> Result<f64> {
        pair(alpha, &alpha.sharp())
    }
    fn gradient(&self, alpha: &DualElement) -> Result<LieElement> {
        Ok(alpha.sharp().scale(2.0))
    }
    fn hessian_complex(
        &self,
        alpha: &DualElement,
        beta: &ComplexLieElement,
    ) -> Result<ComplexLieElement> {
        check_same(alpha.desc(), beta.desc())?;
        Ok(beta.scale(2.0))
    }
}

/// `f(alpha, beta) = |alpha|^2 - |beta|^2` on `k + k`, split after `split` blocks.
/// Not convex.
#[derive(Clone, Debug)]
pub struct IndefiniteSplit {
    pub split: usize,
}

impl IndefiniteSplit {
    fn signs(&self, n: usize) -> Vec<f64> {
        (0..n).map(|b| if b < self.split { 1.0 } else { -1.0 }).collect()
    }

    fn signed(&self, blocks: &[CMatrix], factor: f64) -> Vec<CMatrix> {
        self.signs(blocks.len())
            .iter()
            .zip(blocks)
            .map(|(s, b)| b * c(s * factor, 0.0))
            .collect()
    }
}

impl ConvexInvariantFunction for IndefiniteSplit {
    fn name(&self) -> String {
        "indefinite_split".into()
    }
    fn is_strict(&self) -> bool {
        false
    }
    fn value(&self, alpha: &DualElement) -> Result<f64> {
        Ok(self
            .signs(alpha.blocks().len())
            .iter()
            .zip(alpha.blocks())
            .map(|(s, b)| s * b.norm_squared())
            .sum())
    }
    fn gradient(&self, alpha: &DualElement) -> Result<LieElement> {
        LieElement::new(alpha.desc(), self.signed(alpha.blocks(), 2.0))
    }
    fn hessian_complex(
        &self,
        alpha: &DualElement,
        beta: &ComplexLieElement,
    ) -> Result<ComplexLieElement> {
        check_same(alpha.desc(), beta.desc())?;
        ComplexLieElement::new(beta.desc(), self.signed(beta.blocks(), 2.0))
    }
}

/// `f(alpha) = sum_b sum_j phi(a_j)`, `a_j` the eigenvalues of `-i alpha_b`.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub scalar: ScalarFn,
}

struct BlockEigen {
    values: DVector<f64>,
    vectors: CMatrix,
}

fn block_eigen(alpha_b: &CMatrix) -> BlockEigen {
    let h = alpha_b * (-I);
    let h = (&h + h.adjoint()) * c(0.5, 0.0);
    let eig = h.symmetric_eigen();
    BlockEigen { values: eig.eigenvalues, vectors: eig.eigenvectors }
}

impl Spectral {
    fn divided_differences(&self, a: &DVector<f64>) -> DMatrix<f64> {
        let n = a.len();
        let amax = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let gap = 1e-7 * amax;
        DMatrix::from_fn(n, n, |j, k| {
            let (x, y) = (a[j], a[k]);
            if (x - y).abs() <= gap {
                self.scalar.d2(0.5 * (x + y))
            } else {
                (self.scalar.d1(x) - self.scalar.d1(y)) / (x - y)
            }
        })
    }

    fn check_finite(&self, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DomainViolation(format!("spectral:{} is not finite here", self.scalar.label())))
        }
    }
}

impl ConvexInvariantFunction for Spectral {
    fn name(&self) -> String {
        format!("spectral:{}", self.scalar.label())
    }
    fn is_strict(&self) -> bool {
        self.scalar.is_strictly_convex()
    }
    fn value(&self, alpha: &DualElement) -> Result<f64> {
        let mut total = 0.0;
        for b in alpha.blocks() {
            let eig = block_eigen(b);
            total += eig.values.iter().map(|&a| self.scalar.value(a)).sum::<f64>();
        }
        self.check_finite(total)
    }
    fn gradient(&self, alpha: &DualElement) -> Result<LieElement> {
        let mut blocks = Vec::with_capacity(alpha.blocks().len());
        for b in alpha.blocks() {
            let eig = block_eigen(b);
            let d = DVector::from_iterator(
                eig.values.len(),
                eig.values.iter().map(|&a| c(self.scalar.d1(a), 0.0)),
            );
            let g = &eig.vectors * CMatrix::from_diagonal(&d) * eig.vectors.adjoint() * I;
            self.check_finite(g.norm())?;
            blocks.push(g);
        }
        LieElement::new(alpha.desc(), blocks)
    }
    fn hessian_complex(
        &self,
        alpha: &DualElement,
        beta: &ComplexLieElement,
    ) -> Result<ComplexLieElement> {
        check_same(alpha.desc(), beta.desc())?;
        let mut blocks = Vec::with_capacity(alpha.blocks().len());
        for (a, bb) in alpha.blocks().iter().zip(beta.blocks()) {
            let eig = block_eigen(a);
            let gamma = self.divided_differences(&eig.values);
            let u = &eig.vectors;
            let mut inner = u.adjoint() * bb * u;
            for j in 0..inner.nrows() {
                for k in 0..inner.ncols() {
                    inner[(j, k)] *= gamma[(j, k)];
                }
            }
            let h = u * inner * u.adjoint();
            self.check_finite(h.norm())?;
            blocks.push(h);
        }
        ComplexLieElement::new(alpha.desc(), blocks)
    }
}

fn check_same(a: &AlgebraDescriptor, b: &AlgebraDescriptor) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::SignatureMismatch { expected: format!("{a:?}"), found: format!("{b:?}") })
    }
}

/// Parse a function name as used by the CLI. `split` is only used by `indefinite_split`.
pub fn function_from_name(name: &str, split: usize) -> Result<Box<dyn ConvexInvariantFunction>> {
    let f: Box<dyn ConvexInvariantFunction> = match name {
        "quadratic" => Box::new(Quadratic),
        "indefinite_split" => Box::new(IndefiniteSplit { split }),
        "spectral:cosh" => Box::new(Spectral { scalar: ScalarFn::Cosh }),
        "spectral:explin" => Box::new(Spectral { scalar: ScalarFn::ExpLin }),
        other => match other.strip_prefix("spectral:power:").map(str::parse::<u32>) {
            Some(Ok(k)) => Box::new(Spectral { scalar: ScalarFn::Power(k) }),
            _ => return Err(Error::Config(format!("unknown function `{name}`"))),
        },
    };
    Ok(f)
}

/// `((xi*, eta*))_alpha = <eta*, Hess f|_alpha (xi*)>`.
pub fn hess_inner(
    f: &dyn ConvexInvariantFunction,
    alpha: &DualElement,
    xi: &DualElement,
    eta: &DualElement,
) -> Result<f64> {
    pair(eta, &f.hessian_apply(alpha, xi)?)
}

/// Matrix of the Hessian at `alpha` in the orthonormal basis.
pub fn hessian_matrix(
    f: &dyn ConvexInvariantFunction,
    basis: &Basis,
    alpha: &DualElement,
) -> Result<DMatrix<f64>> {
    let n = basis.dim();
    let mut m = DMatrix::zeros(n, n);
    for (k, e) in basis.elements().iter().enumerate() {
        let col = basis.coords(&f.hessian_apply(alpha, &e.flat())?);
        m.set_column(k, &col);
    }
    Ok((&m + m.transpose()) * 0.5)
}

#[derive(Clone, Copy, Debug)]
pub struct InverseOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions { tol: 1e-12, max_iter: 60 }
    }
}

/// Solve `gradient(alpha) = xi` by damped Newton.
pub fn gradient_inverse(
    f: &dyn ConvexInvariantFunction,
    xi: &LieElement,
    tol: f64,
) -> Result<DualElement> {
    gradient_inverse_with(f, xi, InverseOptions { tol, ..Default::default() })
}

pub fn gradient_inverse_with(
    f: &dyn ConvexInvariantFunction,
    xi: &LieElement,
    opts: InverseOptions,
) -> Result<DualElement> {
    if !f.is_strict() {
        return Err(Error::NotStrictlyConvex(f.name()));
    }
    let basis = Basis::new(xi.desc());
    let target = basis.coords(xi);
    let g0 = f.gradient(&xi.flat())?;
    let scale = if g0.norm() > 0.0 { xi.norm() / g0.norm() } else { 1.0 };
    let mut alpha = basis.coords(&xi.scale(scale));
    let residual_of = |a: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(basis.coords(&f.gradient(&basis.dual_element(a))?) - &target)
    };
    let mut r = residual_of(&alpha)?;
    let mut rnorm = r.norm();
    for _ in 0..opts.max_iter {
        if rnorm <= opts.tol {
            return Ok(basis.dual_element(&alpha));
        }
        let hess = hessian_matrix(f, &basis, &basis.dual_element(&alpha))?;
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&(-&r)),
            None => crate::linalg::lstsq_real(&hess, &(-&r), 1e-14),
        };
        let mut s = 1.0;
        let mut accepted = None;
        while s > 1e-10 {
            let trial = &alpha + &step * s;
            if let Ok(rt) = residual_of(&trial) {
                let n = rt.norm();
                if n.is_finite() && n < (1.0 - 1e-4 * s) * rnorm {
                    accepted = Some((trial, rt, n));
                    break;
                }
            }
            s *= 0.5;
        }
        match accepted {
            Some((a, rt, n)) => {
                alpha = a;
                r = rt;
                rnorm = n;
            }
            None => {
                if rnorm <= opts.tol.max(1e-13 * (1.0 + target.norm())) {
                    return Ok(basis.dual_element(&alpha));
                }
                return Err(Error::OutsideGradientImage { residual: rnorm, norm: alpha.norm() });
            }
        }
        if alpha.norm() > 1e8 {
            return Err(Error::OutsideGradientImage { residual: rnorm, norm: alpha.norm() });
        }
    }
    if rnorm <= opts.tol {
        Ok(basis.dual_element(&alpha))
    } else {
        Err(Error::NonConvergence { iterations: opts.max_iter, residual: rnorm })
    }
}

/// `f^(xi) = <alpha, xi> - f(alpha)` with `alpha = (df)^{-1}(xi)`.
pub fn legendre_value(f: &dyn ConvexInvariantFunction, xi: &LieElement, tol: f64) -> Result<f64> {
    let alpha = gradient_inverse(f, xi, tol)?;
    Ok(pair(&alpha, xi)? - f.value(&alpha)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityDefect {
    pub identity: String,
    pub defect: f64,
    pub tol: f64,
    pub passed: bool,
}

impl IdentityDefect {
    pub fn new(identity: &str, defect: f64, tol: f64) -> Self {
        IdentityDefect { identity: identity.into(), defect, tol, passed: defect <= tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityReport {
    pub function: String,
    pub trials: usize,
    pub checks: Vec<IdentityDefect>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn defect(&self, identity: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.identity == identity).map(|c| c.defect)
    }
}

/// Element commuting with `gamma`: an odd polynomial in it (plus a central
/// term on full unitary blocks).
fn commuting_element<R: Rng + ?Sized>(gamma: &LieElement, rng: &mut R) -> Result<LieElement> {
    let (a, b, t): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let blocks = gamma
        .blocks()
        .iter()
        .zip(&gamma.desc().traceless)
        .map(|(g, &traceless)| {
            let n = g.nrows();
            let mut m = g * c(a, 0.0) + g * g * g * c(b, 0.0);
            if !traceless {
                m += CMatrix::identity(n, n) * c(0.0, t);
            }
            m
        })
        .collect();
    LieElement::new(gamma.desc(), blocks)
}

/// Max defects of the invariance identities for `f` over random samples:
/// invariance, gradient and Hessian equivariance, Hessian-form invariance,
/// `ad_eta(df) = Hess(ad*_eta gamma)`, `[df|gamma, gamma] = 0`, commutation
/// with `ad_eta` when `[eta, gamma] = 0`, and finite-difference cross-checks
/// of gradient and Hessian.
pub fn verify_invariance_identities<R: Rng + ?Sized>(
    f: &dyn ConvexInvariantFunction,
    desc: &AlgebraDescriptor,
    trials: usize,
    rng: &mut R,
) -> Result<IdentityReport> {
    let basis = Basis::new(desc);
    let mut d = [0.0f64; 8];
    for _ in 0..trials {
        let k = random_unitary(&basis, rng);
        let alpha = random_lie_element(&basis, rng, 0.6).flat();
        let beta = random_lie_element(&basis, rng, 0.6).flat();
        let gamma = random_lie_element(&basis, rng, 0.6).flat();
        let eta = random_lie_element(&basis, rng, 0.6);

        let moved = coadjoint(&k, &alpha)?;
        let fa = f.value(&alpha)?;
        d[0] = d[0].max((f.value(&moved)? - fa).abs() / (1.0 + fa.abs()));

        let lhs = adjoint(&k, &f.gradient(&alpha)?.to_complex())?;
        let rhs = f.gradient(&moved)?.to_complex();
        d[1] = d[1].max(lhs.sub(&rhs)?.norm());

        let lhs = f.hessian_apply(&moved, &coadjoint(&k, &beta)?)?.to_complex();
        let rhs = adjoint(&k, &f.hessian_apply(&alpha, &beta)?.to_complex())?;
        d[2] = d[2].max(lhs.sub(&rhs)?.norm());

        let lhs = hess_inner(f, &gamma, &alpha, &beta)?;
        let rhs = hess_inner(f, &coadjoint(&k, &gamma)?, &moved, &coadjoint(&k, &beta)?)?;
        d[3] = d[3].max((lhs - rhs).abs());

        let dfg = f.gradient(&gamma)?;
        let lhs = eta.bracket(&dfg)?;
        let rhs = f.hessian_apply(&gamma, &eta.bracket(&gamma.sharp())?.flat())?;
        d[4] = d[4].max(lhs.sub(&rhs)?.norm());

        d[5] = d[5].max(dfg.bracket(&gamma.sharp())?.norm());

        let comm = commuting_element(&gamma.sharp(), rng)?;
        let lhs = f.hessian_apply(&gamma, &comm.bracket(&beta.sharp())?.flat())?;
        let rhs = comm.bracket(&f.hessian_apply(&gamma, &beta)?)?;
        d[6] = d[6].max(lhs.sub(&rhs)?.norm());

        // finite differences: gradient along beta, Hessian via gradient differences
        let h = 1e-4;
        let plus = alpha.axpy(h, &beta)?;
        let minus = alpha.axpy(-h, &beta)?;
        let fd = (f.value(&plus)? - f.value(&minus)?) / (2.0 * h);
        let exact = pair(&beta, &f.gradient(&alpha)?)?;
        let fd_hess = f.gradient(&plus)?.sub(&f.gradient(&minus)?)?.scale(0.5 / h);
        let hess = f.hessian_apply(&alpha, &beta)?;
        d[7] = d[7].max((fd - exact).abs()).max(fd_hess.sub(&hess)?.norm());
    }
    let closed = 1e-10;
    let names = [
        ("invariance", closed),
        ("gradient_equivariance", closed),
        ("hessian_equivariance", closed),
        ("hessian_form_invariance", closed),
        ("infinitesimal_equivariance", closed),
        ("gradient_commutes_with_base", closed),
        ("hessian_commutes_with_stabilizer", closed),
        ("finite_difference_derivatives", 1e-6),
    ];
    Ok(IdentityReport {
        function: f.name(),
        trials,
        checks: names
            .iter()
            .zip(d.iter())
            .map(|((name, tol), &defect)| IdentityDefect::new(name, defect, *tol))
            .collect(),
    })
}

/// Complex-bilinear extension of the Hessian form, `-Tr(eta Hess(xi))`.
pub fn hess_inner_complex(
    f: &dyn ConvexInvariantFunction,
    alpha: &DualElement,
    xi: &ComplexLieElement,
    eta: &ComplexLieElement,
) -> Result<Complex64> {
    crate::lie::pair_complex(eta, &f.hessian_complex(alpha, xi)?)
}

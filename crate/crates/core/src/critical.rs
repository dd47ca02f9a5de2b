//! Analysis at critical points of `f o mu`: eigen-decomposition of the
//! stabilizer under `i ad_{df|mu}`, mu-invariants and their constancy along
//! orbits, and the extremal vector field.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convex::{gradient_inverse, hessian_matrix, ConvexInvariantFunction, IndefiniteSplit, Quadratic};
use crate::error::{Error, Result};
use crate::lie::{
    adjoint, c, exponential, pair_complex, CMatrix, ComplexLieElement, GroupElement,
    LieElement, I,
};
use crate::linalg::{
    columns_complex, lstsq_real, max_subspace_sine, nullspace_complex, nullspace_real,
    orthonormalize, DEFAULT_RANK_TOL,
};
use crate::phase::{CVector, PhasePoint, PhaseSpace};

/// Grad-norm threshold for entering the decomposition.
pub const CRITICAL_TOL: f64 = 1e-6;
/// Eigenvalues with `|lambda|` below this count as zero.
pub const EIGEN_ZERO_TOL: f64 = 1e-7;
/// Membership defect for `xi in k_z`, `eta in g_z`.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
const INNER_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalCheck {
    pub critical: bool,
    pub residual: f64,
}

/// `residual = |sigma_z(df|mu(z))|`; critical iff `<= tol`.
pub fn critical_check(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
    tol: f64,
) -> Result<CriticalCheck> {
    let df = f.gradient(&space.moment(z))?;
    let residual = space.metric_norm(&space.sigma(z, &df));
    Ok(CriticalCheck { critical: residual <= tol, residual })
}

#[derive(Clone, Debug)]
pub struct CalabiDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<ComplexLieElement>,
    pub zero_block_dim: usize,
    pub hermitian_defect: f64,
    pub gz_dim: usize,
    pub kz_dim: usize,
    /// Sine of the largest angle between the zero eigenspace and `k_z (x) C`
    /// (1 when the dimensions differ).
    pub zero_space_sine: f64,
    /// Largest `|sigma_z(v)|` over the returned eigenvectors.
    pub membership_defect: f64,
    /// `"hessian"` when the inner product comes from the Hessian of `f`, else `"frobenius"`.
    pub inner_product: String,
}

impl CalabiDecomposition {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().cloned().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().cloned().unwrap_or(0.0)
    }

    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < -EIGEN_ZERO_TOL).count()
    }
}

fn stacked_sigma(space: &PhaseSpace, z: &PhasePoint, x: &ComplexLieElement) -> f64 {
    space.metric_norm(&space.infinitesimal_action(z, x))
}

/// Real coordinates (in the orthonormal basis of `k`) of `k_z`, as complex columns.
fn kz_complex_columns(space: &PhaseSpace, z: &PhasePoint) -> Vec<CVector> {
    space
        .stabilizer_k(z, DEFAULT_RANK_TOL)
        .iter()
        .map(|e| space.basis().coords(e).map(|x| c(x, 0.0)))
        .collect()
}

/// Eigen-decomposition of `xi -> i [df|mu(z), xi]` on `g_z`.
pub fn calabi_decomposition(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
) -> Result<CalabiDecomposition> {
    let check = critical_check(space, f, z, CRITICAL_TOL)?;
    if !check.critical {
        return Err(Error::NotCritical { residual: check.residual, tol: CRITICAL_TOL });
    }
    let basis = space.basis();
    let m = basis.dim();
    let mu = space.moment(z);
    let df = f.gradient(&mu)?.to_complex();
    let v_cols = space.stabilizer_coords(z, DEFAULT_RANK_TOL);
    let r = v_cols.len();
    let kz = kz_complex_columns(space, z);
    if r == 0 {
        return Ok(CalabiDecomposition {
            eigenvalues: vec![],
            eigenvectors: vec![],
            zero_block_dim: 0,
            hermitian_defect: 0.0,
            gz_dim: 0,
            kz_dim: kz.len(),
            zero_space_sine: if kz.is_empty() { 0.0 } else { 1.0 },
            membership_defect: 0.0,
            inner_product: "frobenius".into(),
        });
    }
    let v = columns_complex(&v_cols, m);

    // operator matrix in basis coordinates
    let mut op = CMatrix::zeros(m, m);
    for (k, e) in basis.elements().iter().enumerate() {
        let image = crate::lie::bracket(&df, &e.to_complex())?.scale_complex(I);
        op.set_column(k, &basis.complex_coords(&image));
    }
    let rmat = v.adjoint() * &op * &v;

    // Hermitian inner product on g_z
    let (gram, inner_product) = match f.is_strict() {
        true => {
            let h = hessian_matrix(f, basis, &mu)?.map(|x| c(x, 0.0));
            (v.adjoint() * h * &v, "hessian")
        }
        false => (CMatrix::identity(r, r), "frobenius"),
    };
    let gram = (&gram + gram.adjoint()) * c(0.5, 0.0);
    let (chol, inner_product) = match gram.clone().cholesky() {
        Some(ch) => (ch.l(), inner_product),
        None => (CMatrix::identity(r, r), "frobenius"),
    };
    let l_inv_adj = chol
        .adjoint()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("singular Gram matrix on g_z".into()))?;
    // matrix of the operator in a basis orthonormal for the Hermitian form
    let herm = chol.adjoint() * &rmat * &l_inv_adj;
    let hermitian_defect = (&herm - herm.adjoint()).norm() * 0.5;
    let sym = (&herm + herm.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let frame = &v * &l_inv_adj;
    let mut eigenvalues = Vec::with_capacity(r);
    let mut vectors = Vec::with_capacity(r);
    let mut zero_cols = Vec::new();
    for &k in &order {
        let lambda = eig.eigenvalues[k];
        let col: CVector = &frame * eig.eigenvectors.column(k);
        if lambda.abs() <= EIGEN_ZERO_TOL {
            zero_cols.push(col.clone());
        }
        eigenvalues.push(lambda);
        vectors.push(col);
    }
    let eigenvectors: Vec<ComplexLieElement> =
        vectors.iter().map(|col| basis.complex_element(col)).collect();
    let membership_defect =
        eigenvectors.iter().map(|x| stacked_sigma(space, z, x) / (1.0 + x.norm())).fold(0.0, f64::max);

    let zero = orthonormalize(&zero_cols, 1e-10);
    let kzo = orthonormalize(&kz, 1e-10);
    let zero_space_sine = if zero.len() != kzo.len() {
        1.0
    } else {
        max_subspace_sine(&columns_complex(&zero, m), &columns_complex(&kzo, m))
    };
    Ok(CalabiDecomposition {
        zero_block_dim: zero_cols.len(),
        eigenvalues,
        eigenvectors,
        hermitian_defect,
        gz_dim: r,
        kz_dim: kz.len(),
        zero_space_sine,
        membership_defect,
        inner_product: inner_product.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleReport {
    pub eigenvalues: Vec<f64>,
    pub has_positive: bool,
    pub has_negative: bool,
    /// Spectrum for the convex `|alpha|^2 + |beta|^2` at the same point.
    pub control_eigenvalues: Vec<f64>,
}

/// Spectrum of the decomposition at `(z0, z0)` on `Z x Z` for the indefinite
/// `|alpha|^2 - |beta|^2`, with the convex control alongside.
pub fn convexity_counterexample(product: &PhaseSpace, z0: &PhasePoint) -> Result<CounterexampleReport> {
    let split = product.factor_split();
    if split == product.algebra().num_blocks() {
        return Err(Error::Precondition("counterexample needs a product space".into()));
    }
    let z = z0.concat(z0);
    product.check_point(&z)?;
    let indefinite = IndefiniteSplit { split };
    let dec = calabi_decomposition(product, &indefinite, &z)?;
    let control = calabi_decomposition(product, &Quadratic, &z)?;
    let delta = 1e-6;
    Ok(CounterexampleReport {
        has_positive: dec.eigenvalues.iter().any(|&l| l >= delta),
        has_negative: dec.eigenvalues.iter().any(|&l| l <= -delta),
        eigenvalues: dec.eigenvalues,
        control_eigenvalues: control.eigenvalues,
    })
}

fn check_in_kz(space: &PhaseSpace, z: &PhasePoint, xi: &LieElement) -> Result<()> {
    let d = stacked_sigma(space, z, &xi.to_complex());
    if d > MEMBERSHIP_TOL * (1.0 + xi.norm()) {
        return Err(Error::Precondition(format!("xi is not in k_z (defect {d:.3e})")));
    }
    Ok(())
}

fn check_in_gz(space: &PhaseSpace, z: &PhasePoint, eta: &ComplexLieElement) -> Result<()> {
    let d = stacked_sigma(space, z, eta);
    if d > MEMBERSHIP_TOL * (1.0 + eta.norm()) {
        return Err(Error::Precondition(format!("eta is not in g_z (defect {d:.3e})")));
    }
    Ok(())
}

/// `<mu(z) - df^|_xi, eta>`, complex-bilinear in `eta`.
pub fn mu_invariant(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
    xi: &LieElement,
    eta: &ComplexLieElement,
) -> Result<Complex64> {
    check_in_kz(space, z, xi)?;
    check_in_gz(space, z, eta)?;
    let dual = gradient_inverse(f, xi, INNER_TOL)?;
    let diff = space.moment(z).sub(&dual)?;
    pair_complex(&diff.to_complex(), eta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuInvariantReport {
    pub value: [f64; 2],
    pub samples: Vec<[f64; 2]>,
    pub max_deviation: f64,
    pub relative_deviation: f64,
    /// `|sigma_z(eta)|`; large values mean the constancy hypothesis is violated.
    pub eta_membership_defect: f64,
}

/// `chi(g) = <mu(g z), Ad_g eta> - <df^|_xi, eta>` over the samples.
///
/// The second term is invariant under `(xi, eta) -> (Ad_g xi, Ad_g eta)` and is
/// evaluated once at the identity; the samples then test constancy of the first.
/// Hypotheses on `eta` are reported, not enforced, so the control case runs.
pub fn mu_invariant_constancy(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
    xi: &LieElement,
    eta: &ComplexLieElement,
    g_samples: &[GroupElement],
) -> Result<MuInvariantReport> {
    check_in_kz(space, z, xi)?;
    let second = pair_complex(&gradient_inverse(f, xi, INNER_TOL)?.to_complex(), eta)?;
    let chi = |g: &GroupElement| -> Result<Complex64> {
        let gz = space.act(g, z)?;
        Ok(pair_complex(&space.moment(&gz).to_complex(), &adjoint(g, eta)?)? - second)
    };
    let value = chi(&GroupElement::identity(space.algebra()))?;
    let mut samples = Vec::with_capacity(g_samples.len());
    let mut max_deviation: f64 = 0.0;
    for g in g_samples {
        let v = chi(g)?;
        max_deviation = max_deviation.max((v - value).norm());
        samples.push([v.re, v.im]);
    }
    Ok(MuInvariantReport {
        value: [value.re, value.im],
        samples,
        max_deviation,
        relative_deviation: max_deviation / (1.0 + value.norm()),
        eta_membership_defect: stacked_sigma(space, z, eta),
    })
}

/// Orthonormal basis of the center of `k_z`.
pub fn stabilizer_center(space: &PhaseSpace, z: &PhasePoint) -> Result<Vec<LieElement>> {
    let kz = space.stabilizer_k(z, DEFAULT_RANK_TOL);
    let p = kz.len();
    if p == 0 {
        return Ok(vec![]);
    }
    let basis = space.basis();
    let m = basis.dim();
    // columns: coords of [q_i, q_j] stacked over j, for each i
    let mut mat = DMatrix::zeros(m * p, p);
    for (i, qi) in kz.iter().enumerate() {
        for (j, qj) in kz.iter().enumerate() {
            let b = basis.coords(&qi.bracket(qj)?);
            mat.view_mut((j * m, i), (m, 1)).copy_from(&b);
        }
    }
    let null = nullspace_real(&mat, DEFAULT_RANK_TOL);
    Ok(null
        .iter()
        .map(|a| {
            let mut acc = LieElement::zero(space.algebra());
            for (k, q) in kz.iter().enumerate() {
                acc = acc.axpy(a[k], q).expect("same algebra");
            }
            acc
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct ExtremalField {
    pub xi: LieElement,
    /// `|P_{k_z}(df^|_xi - mu)|` at exit.
    pub residual: f64,
    pub kz_dim: usize,
    pub center_dim: usize,
    pub iterations: usize,
}

fn project_coords(cols: &[DVector<f64>], x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(cols.len(), cols.iter().map(|q| q.dot(x)))
}

/// Solves `<mu(z) - df^|_xi, eta> = 0` for all `eta in k_z`, `xi` in the center of `k_z`.
pub fn extremal_field(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
    tol: f64,
    init: Option<&LieElement>,
) -> Result<ExtremalField> {
    if !f.is_strict() {
        return Err(Error::NotStrictlyConvex(f.name()));
    }
    let basis = space.basis();
    let kz = space.stabilizer_k(z, DEFAULT_RANK_TOL);
    if kz.is_empty() {
        return Err(Error::EmptyStabilizer);
    }
    let center = stabilizer_center(space, z)?;
    if center.is_empty() {
        return Err(Error::Precondition("k_z has trivial center".into()));
    }
    let kq: Vec<DVector<f64>> = kz.iter().map(|e| basis.coords(e)).collect();
    let cq: Vec<DVector<f64>> = center.iter().map(|e| basis.coords(e)).collect();
    let cmat = DMatrix::from_columns(&cq);
    let mu = basis.dual_coords(&space.moment(z));

    let xi_of = |a: &DVector<f64>| basis.element(&(&cmat * a));
    let eval = |a: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let alpha = gradient_inverse(f, &xi_of(a), INNER_TOL)?;
        let diff = basis.dual_coords(&alpha) - &mu;
        Ok((diff, basis.dual_coords(&alpha)))
    };

    let start = match init {
        Some(x) => basis.coords(x),
        None => basis.coords(&f.gradient(&space.moment(z))?),
    };
    let mut a = project_coords(&cq, &start);
    let (mut diff, mut alpha) = eval(&a)?;
    let mut r = project_coords(&cq, &diff);
    let mut iterations = 0;
    while r.norm() > tol && iterations < 60 {
        iterations += 1;
        let hess = hessian_matrix(f, basis, &basis.dual_element(&alpha))?;
        let hinv = hess
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient { min_singular: 0.0 })?;
        let jac = cmat.transpose() * hinv * &cmat;
        let sv = crate::linalg::singular_values_real(&jac);
        let smax = sv.max();
        let smin = sv.min();
        if smax == 0.0 || smin <= 1e-12 * smax {
            return Err(Error::RankDeficient { min_singular: smin });
        }
        let step = lstsq_real(&jac, &(-&r), 1e-14);
        let mut s = 1.0;
        loop {
            let trial = &a + &step * s;
            let (d2, a2) = eval(&trial)?;
            let r2 = project_coords(&cq, &d2);
            if r2.norm() < r.norm() || s < 1e-8 {
                a = trial;
                diff = d2;
                alpha = a2;
                r = r2;
                break;
            }
            s *= 0.5;
        }
        if s < 1e-8 {
            break;
        }
    }
    let full = project_coords(&kq, &diff).norm();
    let xi = xi_of(&a);
    if r.norm() > tol || full > tol.max(1e-10) {
        return Err(Error::NonConvergence { iterations, residual: full.max(r.norm()) });
    }
    Ok(ExtremalField { xi, residual: full, kz_dim: kz.len(), center_dim: center.len(), iterations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizerStructure {
    pub kz_dim: usize,
    pub gz_dim: usize,
    /// Dimension of the radical of the trace form on `g_z` (the unipotent part).
    pub nilradical_dim: usize,
    pub reductive_dim: usize,
    pub maximal: bool,
}

/// Dimensions entering the maximal-stabilizer condition
/// `dim k_z = dim_C g_z - dim (g_z)_solv`.
pub fn stabilizer_structure(space: &PhaseSpace, z: &PhasePoint) -> Result<StabilizerStructure> {
    let gz = space.stabilizer_g(z, DEFAULT_RANK_TOL);
    let kz = space.stabilizer_k(z, DEFAULT_RANK_TOL).len();
    let r = gz.len();
    let mut gram = CMatrix::zeros(r, r);
    for (j, x) in gz.iter().enumerate() {
        for (k, y) in gz.iter().enumerate() {
            gram[(j, k)] = pair_complex(x, y)?;
        }
    }
    let nil = if r == 0 { 0 } else { nullspace_complex(&gram, DEFAULT_RANK_TOL).len() };
    let reductive = r - nil;
    Ok(StabilizerStructure { kz_dim: kz, gz_dim: r, nilradical_dim: nil, reductive_dim: reductive, maximal: kz == reductive })
}

#[derive(Clone, Debug)]
pub struct TransportReport {
    pub direct: LieElement,
    pub transported: LieElement,
    pub correction: GroupElement,
    /// Hermitian part left in `Ad_{g'g} xi_f(z)`.
    pub correction_residual: f64,
    pub defect: f64,
    pub iterations: usize,
}

/// Finds `g'` in `G_{gz}` with `Ad_{g'g} xi_f(z)` in `k` and compares it with
/// the field solved directly at `g z`.
pub fn extremal_field_transport(
    space: &PhaseSpace,
    f: &dyn ConvexInvariantFunction,
    z: &PhasePoint,
    g: &GroupElement,
    budget: usize,
) -> Result<TransportReport> {
    let gz = space.act(g, z)?;
    for (label, p) in [("z", z), ("g z", &gz)] {
        let s = stabilizer_structure(space, p)?;
        if !s.maximal {
            return Err(Error::MaximalStabilizer(format!(
                "at {label}: dim k_z = {}, reductive dim = {}",
                s.kz_dim, s.reductive_dim
            )));
        }
    }
    let field = extremal_field(space, f, z, 1e-12, None)?;
    let direct = extremal_field(space, f, &gz, 1e-12, None)?.xi;
    let moved = adjoint(g, &field.xi.to_complex())?;

    let basis = space.basis();
    let gen = space.stabilizer_g(&gz, DEFAULT_RANK_TOL);
    let q = gen.len();
    let build = |p: &DVector<f64>| -> Result<GroupElement> {
        let mut x = ComplexLieElement::zero(space.algebra());
        for (j, n) in gen.iter().enumerate() {
            x = x.add(&n.scale_complex(c(p[2 * j], p[2 * j + 1])))?;
        }
        Ok(exponential(&x))
    };
    let residual = |p: &DVector<f64>| -> Result<DVector<f64>> {
        let y = adjoint(&build(p)?, &moved)?;
        Ok(basis.coords(&y.split().1))
    };
    let mut p = DVector::zeros(2 * q);
    let mut r = residual(&p)?;
    let mut iterations = 0;
    let target = 1e-12 * (1.0 + moved.norm());
    while r.norm() > target && iterations < budget {
        iterations += 1;
        let h = 1e-7;
        let mut jac = DMatrix::zeros(r.len(), 2 * q);
        for k in 0..2 * q {
            let mut pp = p.clone();
            pp[k] += h;
            let mut pm = p.clone();
            pm[k] -= h;
            jac.set_column(k, &((residual(&pp)? - residual(&pm)?) / (2.0 * h)));
        }
        let step = lstsq_real(&jac, &(-&r), 1e-10);
        let mut s = 1.0;
        let mut moved_on = false;
        while s > 1e-6 {
            let trial = &p + &step * s;
            let rt = residual(&trial)?;
            if rt.norm() < r.norm() {
                p = trial;
                r = rt;
                moved_on = true;
                break;
            }
            s *= 0.5;
        }
        if !moved_on {
            break;
        }
    }
    if r.norm() > 1e-9 * (1.0 + moved.norm()) {
        return Err(Error::CorrectionNotFound { budget, residual: r.norm() });
    }
    let correction = build(&p)?;
    let transported = adjoint(&correction, &moved)?.split().0;
    let defect = transported.sub(&direct)?.norm();
    Ok(TransportReport { direct, transported, correction, correction_residual: r.norm(), defect, iterations })
}

/// `z_t(d')`: `d'` copies of `[1, t]` and `d - d'` copies of `[0, 1]` on `(P^1)^d`.
pub fn p1_configuration(space: &PhaseSpace, d_prime: usize, t: f64) -> Result<PhasePoint> {
    let d = space.num_components();
    if d_prime > d {
        return Err(Error::Precondition(format!("d' = {d_prime} exceeds d = {d}")));
    }
    let comps = (0..d)
        .map(|j| {
            if j < d_prime {
                CVector::from_row_slice(&[c(1.0, 0.0), c(t, 0.0)])
            } else {
                CVector::from_row_slice(&[c(0.0, 0.0), c(1.0, 0.0)])
            }
        })
        .collect();
    space.point(comps)
}

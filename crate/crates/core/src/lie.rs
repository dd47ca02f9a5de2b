//! Matrix realizations of compact Lie algebras `u(n_1) + ... + u(n_m)` (with
//! optional trace-free blocks), their complexifications and the actions of the
//! corresponding groups.
//!
//! The dual `k*` shares the matrix data of `k`; the two are identified through
//! the pairing `<alpha, xi> = -sum_b Re Tr(alpha_b xi_b)`, which is positive
//! definite on anti-Hermitian matrices. `DualElement::sharp` and
//! `LieElement::flat` make the identification explicit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance used when checking that user-supplied blocks are anti-Hermitian.
const MEMBERSHIP_TOL: f64 = 1e-8;
/// Condition number above which a group element is treated as singular.
const MAX_CONDITION: f64 = 1e12;
/// `|g* g - I|` bound for the unitary flag.
const UNITARY_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Block sizes and trace-free flags of `k = (s)u(n_1) + ... + (s)u(n_m)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraDescriptor {
    pub blocks: Vec<usize>,
    pub traceless: Vec<bool>,
}

impl AlgebraDescriptor {
    pub fn new(blocks: Vec<usize>, traceless: Vec<bool>) -> Result<Self> {
        let desc = AlgebraDescriptor { blocks, traceless };
        desc.validate()?;
        Ok(desc)
    }

    pub fn unitary(n: usize) -> Self {
        AlgebraDescriptor { blocks: vec![n], traceless: vec![false] }
    }

    pub fn special_unitary(n: usize) -> Self {
        AlgebraDescriptor { blocks: vec![n], traceless: vec![true] }
    }

    /// Direct sum `k + k'` (block lists concatenated).
    pub fn direct_sum(&self, other: &AlgebraDescriptor) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.extend_from_slice(&other.blocks);
        let mut traceless = self.traceless.clone();
        traceless.extend_from_slice(&other.traceless);
        AlgebraDescriptor { blocks, traceless }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidDescriptor("no blocks".into()));
        }
        if self.blocks.len() != self.traceless.len() {
            return Err(Error::InvalidDescriptor(format!(
                "{} blocks but {} traceless flags",
                self.blocks.len(),
                self.traceless.len()
            )));
        }
        if self.blocks.iter().any(|&n| n == 0) {
            return Err(Error::InvalidDescriptor("zero-sized block".into()));
        }
        if self.real_dim() == 0 {
            return Err(Error::InvalidDescriptor("algebra has dimension zero".into()));
        }
        Ok(())
    }

    /// `sum_i (n_i^2 - [traceless_i])`.
    pub fn real_dim(&self) -> usize {
        self.blocks
            .iter()
            .zip(&self.traceless)
            .map(|(&n, &t)| n * n - usize::from(t))
            .sum()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    fn label(&self) -> String {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .zip(&self.traceless)
            .map(|(n, t)| if *t { format!("su({n})") } else { format!("u({n})") })
            .collect();
        parts.join("+")
    }

    fn check_blocks(&self, blocks: &[CMatrix]) -> Result<()> {
        let shapes_ok = blocks.len() == self.blocks.len()
            && blocks.iter().zip(&self.blocks).all(|(b, &n)| b.nrows() == n && b.ncols() == n);
        if shapes_ok {
            Ok(())
        } else {
            let found: Vec<String> =
                blocks.iter().map(|b| format!("{}x{}", b.nrows(), b.ncols())).collect();
            Err(Error::SignatureMismatch { expected: self.label(), found: found.join("+") })
        }
    }

    fn zero_blocks(&self) -> Vec<CMatrix> {
        self.blocks.iter().map(|&n| CMatrix::zeros(n, n)).collect()
    }

    /// Project each trace-free block onto trace-free matrices.
    fn project_traces(&self, blocks: &mut [CMatrix]) {
        for (b, &t) in blocks.iter_mut().zip(&self.traceless) {
            if t {
                let n = b.nrows();
                let shift = b.trace() / n as f64;
                for j in 0..n {
                    b[(j, j)] -= shift;
                }
            }
        }
    }
}

fn anti_hermitian_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * c(0.5, 0.0)
}

fn anti_hermitian_defect(m: &CMatrix) -> f64 {
    (m + m.adjoint()).norm() * 0.5
}

macro_rules! block_element {
    ($name:ident) => {
        impl $name {
            pub fn desc(&self) -> &AlgebraDescriptor {
                &self.desc
            }

            pub fn blocks(&self) -> &[CMatrix] {
                &self.blocks
            }

            pub fn zero(desc: &AlgebraDescriptor) -> Self {
                $name { desc: desc.clone(), blocks: desc.zero_blocks() }
            }

            /// Frobenius norm `sqrt(sum_b |x_b|_F^2)`.
            pub fn norm(&self) -> f64 {
                self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
            }

            pub fn scale(&self, s: f64) -> Self {
                let blocks = self.blocks.iter().map(|b| b * c(s, 0.0)).collect();
                $name { desc: self.desc.clone(), blocks }
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                self.same_signature(&other.desc)?;
                let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
                Ok($name { desc: self.desc.clone(), blocks })
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                self.same_signature(&other.desc)?;
                let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect();
                Ok($name { desc: self.desc.clone(), blocks })
            }

            /// `self + s * other`.
            pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
                self.same_signature(&other.desc)?;
                let blocks = self
                    .blocks
                    .iter()
                    .zip(&other.blocks)
                    .map(|(a, b)| a + b * c(s, 0.0))
                    .collect();
                Ok($name { desc: self.desc.clone(), blocks })
            }

            fn same_signature(&self, other: &AlgebraDescriptor) -> Result<()> {
                if &self.desc == other {
                    Ok(())
                } else {
                    Err(Error::SignatureMismatch {
                        expected: self.desc.label(),
                        found: other.label(),
                    })
                }
            }
        }
    };
}

/// Element of the compact algebra `k`: anti-Hermitian blocks, trace-free where flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct LieElement {
    desc: AlgebraDescriptor,
    blocks: Vec<CMatrix>,
}

/// Element of `k*`, carried by the same anti-Hermitian matrices as `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualElement {
    desc: AlgebraDescriptor,
    blocks: Vec<CMatrix>,
}

/// Element of the complexification `g = k (x) C`: arbitrary blocks (trace-free where flagged).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLieElement {
    desc: AlgebraDescriptor,
    blocks: Vec<CMatrix>,
}

block_element!(LieElement);
block_element!(DualElement);
block_element!(ComplexLieElement);

fn compact_blocks(desc: &AlgebraDescriptor, blocks: Vec<CMatrix>) -> Result<Vec<CMatrix>> {
    desc.check_blocks(&blocks)?;
    let scale = 1.0 + blocks.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let defect = blocks.iter().map(anti_hermitian_defect).fold(0.0, f64::max);
    if defect > MEMBERSHIP_TOL * scale {
        return Err(Error::NotAntiHermitian { defect });
    }
    let mut blocks: Vec<CMatrix> = blocks.iter().map(anti_hermitian_part).collect();
    desc.project_traces(&mut blocks);
    Ok(blocks)
}

impl LieElement {
    /// Validates the blocks (shape, anti-Hermitian), then symmetrizes and
    /// projects traces so the invariants hold to roundoff.
    pub fn new(desc: &AlgebraDescriptor, blocks: Vec<CMatrix>) -> Result<Self> {
        Ok(LieElement { desc: desc.clone(), blocks: compact_blocks(desc, blocks)? })
    }

    /// The same matrices read as an element of `k*`.
    pub fn flat(&self) -> DualElement {
        DualElement { desc: self.desc.clone(), blocks: self.blocks.clone() }
    }

    pub fn to_complex(&self) -> ComplexLieElement {
        ComplexLieElement { desc: self.desc.clone(), blocks: self.blocks.clone() }
    }

    pub fn bracket(&self, other: &LieElement) -> Result<LieElement> {
        let b = bracket(&self.to_complex(), &other.to_complex())?;
        Ok(LieElement { desc: b.desc.clone(), blocks: compact_blocks(&b.desc, b.blocks)? })
    }
}

impl DualElement {
    pub fn new(desc: &AlgebraDescriptor, blocks: Vec<CMatrix>) -> Result<Self> {
        Ok(DualElement { desc: desc.clone(), blocks: compact_blocks(desc, blocks)? })
    }

    /// The same matrices read as an element of `k`.
    pub fn sharp(&self) -> LieElement {
        LieElement { desc: self.desc.clone(), blocks: self.blocks.clone() }
    }

    pub fn to_complex(&self) -> ComplexLieElement {
        ComplexLieElement { desc: self.desc.clone(), blocks: self.blocks.clone() }
    }
}

impl ComplexLieElement {
    pub fn new(desc: &AlgebraDescriptor, blocks: Vec<CMatrix>) -> Result<Self> {
        desc.check_blocks(&blocks)?;
        let mut blocks = blocks;
        desc.project_traces(&mut blocks);
        Ok(ComplexLieElement { desc: desc.clone(), blocks })
    }

    /// `xi_1 + i xi_2`.
    pub fn from_parts(re: &LieElement, im: &LieElement) -> Result<Self> {
        let sum = re.to_complex().add(&ComplexLieElement {
            desc: im.desc.clone(),
            blocks: im.blocks.iter().map(|b| b * I).collect(),
        })?;
        Ok(sum)
    }

    /// Unique decomposition `xi = xi_1 + i xi_2` with `xi_1, xi_2` in `k`.
    pub fn split(&self) -> (LieElement, LieElement) {
        let re = self.blocks.iter().map(anti_hermitian_part).collect();
        let im = self
            .blocks
            .iter()
            .map(|b| {
                let herm = (b + b.adjoint()) * c(0.5, 0.0);
                anti_hermitian_part(&(herm * (-I)))
            })
            .collect();
        (
            LieElement { desc: self.desc.clone(), blocks: re },
            LieElement { desc: self.desc.clone(), blocks: im },
        )
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        let blocks = self.blocks.iter().map(|b| b * s).collect();
        ComplexLieElement { desc: self.desc.clone(), blocks }
    }

    /// Distance from the compact real form `k`.
    pub fn compact_defect(&self) -> f64 {
        self.blocks.iter().map(|b| anti_hermitian_defect(b).powi(2)).sum::<f64>().sqrt()
    }

    /// Interpret as an element of `k`, failing if the Hermitian part is not negligible.
    pub fn to_compact(&self) -> Result<LieElement> {
        LieElement::new(&self.desc, self.blocks.clone())
    }
}

/// `-sum_b Re Tr(alpha_b xi_b)`.
pub fn pair(alpha: &DualElement, xi: &LieElement) -> Result<f64> {
    alpha.same_signature(&xi.desc)?;
    Ok(alpha
        .blocks
        .iter()
        .zip(&xi.blocks)
        .map(|(a, x)| -trace_product(a, x).re)
        .sum())
}

/// Complex-bilinear extension `-sum_b Tr(alpha_b eta_b)` of the pairing to `g`.
pub fn pair_complex(alpha: &ComplexLieElement, eta: &ComplexLieElement) -> Result<Complex64> {
    alpha.same_signature(&eta.desc)?;
    Ok(alpha.blocks.iter().zip(&eta.blocks).map(|(a, x)| -trace_product(a, x)).sum())
}

/// Hermitian (Frobenius) inner product `sum_b Tr(x_b^* y_b)`, conjugate-linear in `x`.
pub fn hermitian_inner(x: &ComplexLieElement, y: &ComplexLieElement) -> Result<Complex64> {
    x.same_signature(&y.desc)?;
    Ok(x.blocks.iter().zip(&y.blocks).map(|(a, b)| a.dotc(b)).sum())
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    // Tr(AB) = sum_jk A_jk B_kj
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

/// Blockwise commutator `xi eta - eta xi`.
pub fn bracket(xi: &ComplexLieElement, eta: &ComplexLieElement) -> Result<ComplexLieElement> {
    xi.same_signature(&eta.desc)?;
    let mut blocks: Vec<CMatrix> =
        xi.blocks.iter().zip(&eta.blocks).map(|(a, b)| a * b - b * a).collect();
    xi.desc.project_traces(&mut blocks);
    Ok(ComplexLieElement { desc: xi.desc.clone(), blocks })
}

/// Invertible block matrix in `G`; caches its inverse and condition number.
#[derive(Clone, Debug)]
pub struct GroupElement {
    desc: AlgebraDescriptor,
    blocks: Vec<CMatrix>,
    inverse: Vec<CMatrix>,
    condition: f64,
    unitary: bool,
}

impl GroupElement {
    pub fn identity(desc: &AlgebraDescriptor) -> Self {
        let blocks: Vec<CMatrix> = desc.blocks.iter().map(|&n| CMatrix::identity(n, n)).collect();
        GroupElement {
            desc: desc.clone(),
            inverse: blocks.clone(),
            blocks,
            condition: 1.0,
            unitary: true,
        }
    }

    pub fn new(desc: &AlgebraDescriptor, blocks: Vec<CMatrix>) -> Result<Self> {
        desc.check_blocks(&blocks)?;
        let condition = blocks.iter().map(condition_number).fold(1.0, f64::max);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::SingularGroupElement { condition });
        }
        let inverse = blocks
            .iter()
            .map(|b| b.clone().try_inverse().ok_or(Error::SingularGroupElement { condition }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(desc, blocks, inverse, condition))
    }

    fn assemble(
        desc: &AlgebraDescriptor,
        blocks: Vec<CMatrix>,
        inverse: Vec<CMatrix>,
        condition: f64,
    ) -> Self {
        let unitary = blocks.iter().all(|b| unitary_defect(b) <= UNITARY_TOL);
        GroupElement { desc: desc.clone(), blocks, inverse, condition, unitary }
    }

    pub fn desc(&self) -> &AlgebraDescriptor {
        &self.desc
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn inverse_blocks(&self) -> &[CMatrix] {
        &self.inverse
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn unitary_defect(&self) -> f64 {
        self.blocks.iter().map(unitary_defect).fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            desc: self.desc.clone(),
            blocks: self.inverse.clone(),
            inverse: self.blocks.clone(),
            condition: self.condition,
            unitary: self.unitary,
        }
    }

    /// `self * other`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.desc != other.desc {
            return Err(Error::SignatureMismatch {
                expected: self.desc.label(),
                found: other.desc.label(),
            });
        }
        let blocks: Vec<CMatrix> =
            self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect();
        let inverse: Vec<CMatrix> =
            self.inverse.iter().zip(&other.inverse).map(|(a, b)| b * a).collect();
        let condition = blocks.iter().map(condition_number).fold(1.0, f64::max);
        Ok(Self::assemble(&self.desc, blocks, inverse, condition))
    }
}

fn unitary_defect(b: &CMatrix) -> f64 {
    let n = b.nrows();
    (b.adjoint() * b - CMatrix::identity(n, n)).norm()
}

fn condition_number(b: &CMatrix) -> f64 {
    let sv = b.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `Ad_g xi = g xi g^{-1}` blockwise.
pub fn adjoint(g: &GroupElement, xi: &ComplexLieElement) -> Result<ComplexLieElement> {
    xi.same_signature(&g.desc)?;
    if g.condition > MAX_CONDITION {
        return Err(Error::SingularGroupElement { condition: g.condition });
    }
    let mut blocks: Vec<CMatrix> = g
        .blocks
        .iter()
        .zip(&g.inverse)
        .zip(&xi.blocks)
        .map(|((a, ainv), x)| a * x * ainv)
        .collect();
    xi.desc.project_traces(&mut blocks);
    Ok(ComplexLieElement { desc: xi.desc.clone(), blocks })
}

/// `Ad*_k alpha` for unitary `k`; with the trace pairing this is `k alpha k^{-1}`.
pub fn coadjoint(k: &GroupElement, alpha: &DualElement) -> Result<DualElement> {
    if !k.unitary {
        return Err(Error::NonUnitary { defect: k.unitary_defect() });
    }
    let image = adjoint(k, &alpha.to_complex())?;
    let mut blocks: Vec<CMatrix> = image.blocks.iter().map(anti_hermitian_part).collect();
    alpha.desc.project_traces(&mut blocks);
    Ok(DualElement { desc: alpha.desc.clone(), blocks })
}

/// Blockwise matrix exponential; the inverse is computed as `exp(-xi)`.
pub fn exponential(xi: &ComplexLieElement) -> GroupElement {
    let blocks: Vec<CMatrix> = xi.blocks.iter().map(|b| b.exp()).collect();
    let inverse: Vec<CMatrix> = xi.blocks.iter().map(|b| (-b).exp()).collect();
    let condition = blocks.iter().map(condition_number).fold(1.0, f64::max);
    GroupElement::assemble(&xi.desc, blocks, inverse, condition)
}

pub fn exponential_compact(xi: &LieElement) -> GroupElement {
    exponential(&xi.to_complex())
}

/// Basis of `k` orthonormal for the pairing, with cached coordinate maps.
///
/// Per block: `i E_jj` (generalized Gell-Mann diagonals for trace-free blocks),
/// then `(E_jk - E_kj)/sqrt2` and `i (E_jk + E_kj)/sqrt2` for `j < k`. Over `C`
/// the same elements form a unitary basis of `g`.
#[derive(Clone, Debug)]
pub struct Basis {
    desc: AlgebraDescriptor,
    elements: Vec<LieElement>,
}

pub fn orthonormal_basis(desc: &AlgebraDescriptor) -> Vec<LieElement> {
    Basis::new(desc).elements
}

impl Basis {
    pub fn new(desc: &AlgebraDescriptor) -> Self {
        let mut elements = Vec::with_capacity(desc.real_dim());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (b, (&n, &traceless)) in desc.blocks.iter().zip(&desc.traceless).enumerate() {
            let single = |m: CMatrix| {
                let mut blocks = desc.zero_blocks();
                blocks[b] = m;
                LieElement { desc: desc.clone(), blocks }
            };
            if traceless {
                for k in 1..n {
                    let norm = ((k * (k + 1)) as f64).sqrt();
                    let mut m = CMatrix::zeros(n, n);
                    for j in 0..k {
                        m[(j, j)] = c(0.0, 1.0 / norm);
                    }
                    m[(k, k)] = c(0.0, -(k as f64) / norm);
                    elements.push(single(m));
                }
            } else {
                for j in 0..n {
                    let mut m = CMatrix::zeros(n, n);
                    m[(j, j)] = I;
                    elements.push(single(m));
                }
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    let mut m = CMatrix::zeros(n, n);
                    m[(j, k)] = c(s, 0.0);
                    m[(k, j)] = c(-s, 0.0);
                    elements.push(single(m));
                    let mut m = CMatrix::zeros(n, n);
                    m[(j, k)] = c(0.0, s);
                    m[(k, j)] = c(0.0, s);
                    elements.push(single(m));
                }
            }
        }
        Basis { desc: desc.clone(), elements }
    }

    pub fn desc(&self) -> &AlgebraDescriptor {
        &self.desc
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[LieElement] {
        &self.elements
    }

    pub fn coords(&self, xi: &LieElement) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.elements.iter().map(|e| pair(&e.flat(), xi).unwrap_or(0.0)),
        )
    }

    pub fn dual_coords(&self, alpha: &DualElement) -> DVector<f64> {
        self.coords(&alpha.sharp())
    }

    pub fn complex_coords(&self, xi: &ComplexLieElement) -> DVector<Complex64> {
        DVector::from_iterator(
            self.dim(),
            self.elements
                .iter()
                .map(|e| pair_complex(&e.to_complex(), xi).unwrap_or_default()),
        )
    }

    pub fn element(&self, coords: &DVector<f64>) -> LieElement {
        let mut blocks = self.desc.zero_blocks();
        for (e, &x) in self.elements.iter().zip(coords.iter()) {
            for (acc, b) in blocks.iter_mut().zip(&e.blocks) {
                *acc += b * c(x, 0.0);
            }
        }
        LieElement { desc: self.desc.clone(), blocks }
    }

    pub fn dual_element(&self, coords: &DVector<f64>) -> DualElement {
        self.element(coords).flat()
    }

    pub fn complex_element(&self, coords: &DVector<Complex64>) -> ComplexLieElement {
        let mut blocks = self.desc.zero_blocks();
        for (e, &x) in self.elements.iter().zip(coords.iter()) {
            for (acc, b) in blocks.iter_mut().zip(&e.blocks) {
                *acc += b * x;
            }
        }
        ComplexLieElement { desc: self.desc.clone(), blocks }
    }
}

/// Gaussian element of `k` in orthonormal coordinates, scaled by `scale`.
pub fn random_lie_element<R: Rng + ?Sized>(
    basis: &Basis,
    rng: &mut R,
    scale: f64,
) -> LieElement {
    let coords = DVector::from_fn(basis.dim(), |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    basis.element(&coords)
}

pub fn random_complex_element<R: Rng + ?Sized>(
    basis: &Basis,
    rng: &mut R,
    scale: f64,
) -> ComplexLieElement {
    let coords = DVector::from_fn(basis.dim(), |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * scale
    });
    basis.complex_element(&coords)
}

/// Element of `K` obtained as `exp` of a random element of `k`.
pub fn random_unitary<R: Rng + ?Sized>(basis: &Basis, rng: &mut R) -> GroupElement {
    exponential_compact(&random_lie_element(basis, rng, 1.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn su2() -> AlgebraDescriptor {
        AlgebraDescriptor::special_unitary(2)
    }

    fn diag(desc: &AlgebraDescriptor, entries: &[Complex64]) -> CMatrix {
        let _ = desc;
        CMatrix::from_diagonal(&DVector::from_row_slice(entries))
    }

    #[test]
    fn pair_examples() {
        let d = su2();
        let h = diag(&d, &[I, -I]);
        let a = DualElement::new(&d, vec![h.clone()]).unwrap();
        let x = LieElement::new(&d, vec![h]).unwrap();
        assert!((pair(&a, &x).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(pair(&a, &LieElement::zero(&d)).unwrap(), 0.0);

        // i e0 e0* - (i/2) I paired with diag(i, -i)
        let alpha = DualElement::new(&d, vec![diag(&d, &[c(0.0, 0.5), c(0.0, -0.5)])]).unwrap();
        let xi = LieElement::new(&d, vec![diag(&d, &[I, -I])]).unwrap();
        assert!((pair(&alpha, &xi).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pair_rejects_mismatched_signature() {
        let a = DualElement::zero(&su2());
        let x = LieElement::zero(&AlgebraDescriptor::unitary(3));
        assert!(matches!(pair(&a, &x), Err(Error::SignatureMismatch { .. })));
    }

    #[test]
    fn sl2_bracket_relation() {
        let d = su2();
        let h = ComplexLieElement::new(&d, vec![diag(&d, &[c(1.0, 0.0), c(-1.0, 0.0)])]).unwrap();
        let mut e12 = CMatrix::zeros(2, 2);
        e12[(0, 1)] = c(1.0, 0.0);
        let e = ComplexLieElement::new(&d, vec![e12.clone()]).unwrap();
        let b = bracket(&h, &e).unwrap();
        assert!((&b.blocks()[0] - e12 * c(2.0, 0.0)).norm() < 1e-15);
        assert!(bracket(&h, &h).unwrap().norm() == 0.0);
    }

    #[test]
    fn jacobi_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = Basis::new(&AlgebraDescriptor::new(vec![3, 2], vec![false, true]).unwrap());
        for _ in 0..20 {
            let x = random_complex_element(&basis, &mut rng, 1.0);
            let y = random_complex_element(&basis, &mut rng, 1.0);
            let z = random_complex_element(&basis, &mut rng, 1.0);
            let t1 = bracket(&x, &bracket(&y, &z).unwrap()).unwrap();
            let t2 = bracket(&y, &bracket(&z, &x).unwrap()).unwrap();
            let t3 = bracket(&z, &bracket(&x, &y).unwrap()).unwrap();
            let sum = t1.add(&t2).unwrap().add(&t3).unwrap();
            assert!(sum.norm() < 1e-12, "jacobi defect {}", sum.norm());
        }
    }

    #[test]
    fn bracket_of_compact_elements_stays_compact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = Basis::new(&AlgebraDescriptor::unitary(3));
        let x = random_lie_element(&basis, &mut rng, 1.0);
        let y = random_lie_element(&basis, &mut rng, 1.0);
        let b = bracket(&x.to_complex(), &y.to_complex()).unwrap();
        assert!(b.compact_defect() < 1e-14);
    }

    #[test]
    fn adjoint_identity_and_unitary_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = Basis::new(&AlgebraDescriptor::unitary(3));
        let xi = random_lie_element(&basis, &mut rng, 1.0).to_complex();
        let id = GroupElement::identity(basis.desc());
        assert!(adjoint(&id, &xi).unwrap().sub(&xi).unwrap().norm() < 1e-15);
        let k = random_unitary(&basis, &mut rng);
        assert!(k.is_unitary());
        assert!(adjoint(&k, &xi).unwrap().compact_defect() < 1e-12);
    }

    #[test]
    fn adjoint_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = Basis::new(&su2());
        let g = exponential(&random_complex_element(&basis, &mut rng, 0.5));
        let h = exponential(&random_complex_element(&basis, &mut rng, 0.5));
        let xi = random_complex_element(&basis, &mut rng, 1.0);
        let lhs = adjoint(&g.compose(&h).unwrap(), &xi).unwrap();
        let rhs = adjoint(&g, &adjoint(&h, &xi).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() < 1e-12);
    }

    #[test]
    fn adjoint_derivative_matches_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = Basis::new(&AlgebraDescriptor::unitary(3));
        let eta = random_complex_element(&basis, &mut rng, 1.0);
        let xi = random_complex_element(&basis, &mut rng, 1.0);
        let h = 1e-4;
        let plus = adjoint(&exponential(&eta.scale(h)), &xi).unwrap();
        let minus = adjoint(&exponential(&eta.scale(-h)), &xi).unwrap();
        let fd = plus.sub(&minus).unwrap().scale(0.5 / h);
        let exact = bracket(&eta, &xi).unwrap();
        assert!(fd.sub(&exact).unwrap().norm() < 1e-6);
    }

    #[test]
    fn singular_group_element_rejected() {
        let d = su2();
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        assert!(matches!(GroupElement::new(&d, vec![m]), Err(Error::SingularGroupElement { .. })));
    }

    #[test]
    fn coadjoint_duality_and_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let basis = Basis::new(&AlgebraDescriptor::new(vec![2, 3], vec![true, false]).unwrap());
        let id = GroupElement::identity(basis.desc());
        let a0 = random_lie_element(&basis, &mut rng, 1.0).flat();
        assert_eq!(coadjoint(&id, &a0).unwrap(), a0);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let k = random_unitary(&basis, &mut rng);
            let alpha = random_lie_element(&basis, &mut rng, 1.0).flat();
            let xi = random_lie_element(&basis, &mut rng, 1.0);
            let lhs = pair(&coadjoint(&k, &alpha).unwrap(), &xi).unwrap();
            let back = adjoint(&k.inverse(), &xi.to_complex()).unwrap().to_compact().unwrap();
            let rhs = pair(&alpha, &back).unwrap();
            worst = worst.max((lhs - rhs).abs());
            // pairing invariance
            let moved = adjoint(&k, &xi.to_complex()).unwrap().to_compact().unwrap();
            let inv = pair(&coadjoint(&k, &alpha).unwrap(), &moved).unwrap();
            worst = worst.max((inv - pair(&alpha, &xi).unwrap()).abs());
        }
        assert!(worst <= 1e-10, "duality defect {worst}");

        let xi = random_lie_element(&basis, &mut rng, 1.0);
        let alpha = random_lie_element(&basis, &mut rng, 1.0).flat();
        let h = 1e-4;
        let plus = coadjoint(&exponential_compact(&xi.scale(h)), &alpha).unwrap();
        let minus = coadjoint(&exponential_compact(&xi.scale(-h)), &alpha).unwrap();
        let fd = plus.sub(&minus).unwrap().scale(0.5 / h);
        let exact = xi.bracket(&alpha.sharp()).unwrap().flat();
        assert!(fd.sub(&exact).unwrap().norm() < 1e-6);
    }

    #[test]
    fn coadjoint_rejects_non_unitary() {
        let d = su2();
        let g = exponential(
            &ComplexLieElement::new(&d, vec![diag(&d, &[c(1.0, 0.0), c(-1.0, 0.0)])]).unwrap(),
        );
        let alpha = DualElement::zero(&d);
        assert!(matches!(coadjoint(&g, &alpha), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn exponential_examples() {
        let d = su2();
        let id = exponential(&ComplexLieElement::zero(&d));
        assert!((&id.blocks()[0] - CMatrix::identity(2, 2)).norm() < 1e-15);

        let pi = std::f64::consts::PI;
        let g = exponential(&ComplexLieElement::new(&d, vec![diag(&d, &[c(0.0, pi), c(0.0, -pi)])]).unwrap());
        assert!((&g.blocks()[0] + CMatrix::identity(2, 2)).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let basis = Basis::new(&AlgebraDescriptor::unitary(3));
        for _ in 0..20 {
            let xi = random_complex_element(&basis, &mut rng, 0.7);
            let prod = exponential(&xi).compose(&exponential(&xi.scale(-1.0))).unwrap();
            assert!((&prod.blocks()[0] - CMatrix::identity(3, 3)).norm() < 1e-10);
            let k = exponential_compact(&random_lie_element(&basis, &mut rng, 2.0));
            assert!(k.unitary_defect() < 1e-10);
        }
    }

    #[test]
    fn exponential_one_parameter_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = Basis::new(&AlgebraDescriptor::unitary(2));
        let xi = random_complex_element(&basis, &mut rng, 1.0);
        let (s, t) = (0.3, 0.8);
        let lhs = exponential(&xi.scale(s + t));
        let rhs = exponential(&xi.scale(s)).compose(&exponential(&xi.scale(t))).unwrap();
        assert!((&lhs.blocks()[0] - &rhs.blocks()[0]).norm() < 1e-9);
    }

    #[test]
    fn basis_examples() {
        let u1 = orthonormal_basis(&AlgebraDescriptor::unitary(1));
        assert_eq!(u1.len(), 1);
        assert_eq!(u1[0].blocks()[0][(0, 0)], I);
        assert!((pair(&u1[0].flat(), &u1[0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(orthonormal_basis(&AlgebraDescriptor::unitary(3)).len(), 9);

        for desc in [su2(), AlgebraDescriptor::special_unitary(4), AlgebraDescriptor::unitary(3)] {
            let b = orthonormal_basis(&desc);
            assert_eq!(b.len(), desc.real_dim());
            for (j, x) in b.iter().enumerate() {
                for (k, y) in b.iter().enumerate() {
                    let g = pair(&x.flat(), y).unwrap();
                    let expected = if j == k { 1.0 } else { 0.0 };
                    assert!((g - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn split_recombines() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let basis = Basis::new(&AlgebraDescriptor::new(vec![2, 3], vec![true, false]).unwrap());
        let x = random_complex_element(&basis, &mut rng, 1.0);
        let (re, im) = x.split();
        let back = ComplexLieElement::from_parts(&re, &im).unwrap();
        assert!(back.sub(&x).unwrap().norm() < 1e-14);
        let (re2, im2) = back.split();
        assert!(re2.sub(&re).unwrap().norm() < 1e-14);
        assert!(im2.sub(&im).unwrap().norm() < 1e-14);
    }

    #[test]
    fn coordinates_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let basis = Basis::new(&AlgebraDescriptor::new(vec![3, 2], vec![true, false]).unwrap());
        let x = random_complex_element(&basis, &mut rng, 1.0);
        let back = basis.complex_element(&basis.complex_coords(&x));
        assert!(back.sub(&x).unwrap().norm() < 1e-13);
    }

    #[test]
    fn descriptor_validation_and_serde() {
        assert!(AlgebraDescriptor::new(vec![], vec![]).is_err());
        assert!(AlgebraDescriptor::new(vec![2], vec![true, false]).is_err());
        assert!(AlgebraDescriptor::new(vec![1], vec![true]).is_err());
        let d: AlgebraDescriptor =
            serde_json::from_str(r#"{ "blocks": [2, 3], "traceless": [true, false] }"#).unwrap();
        assert_eq!(d.real_dim(), 3 + 9);
    }

    #[test]
    fn traceless_blocks_are_projected() {
        let d = su2();
        let x = LieElement::new(&d, vec![diag(&d, &[c(0.0, 1.0), c(0.0, 0.2)])]).unwrap();
        assert!(x.blocks()[0].trace().norm() < 1e-12);
    }
}

//! Functionals over a weighted point set standing in for a volume form:
//! `D_F(u) = sum w F(u)`, its derivatives and conjugate, the soliton scalar
//! pair, normalizations of Hamiltonians, and the Tian-Zhu invariant identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Precondition("empty measure".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Precondition(format!("weight {i} is not positive: {}", weights[i])));
        }
        Ok(DiscreteMeasure { weights })
    }

    pub fn uniform(n: usize, w: f64) -> Result<Self> {
        Self::new(vec![w; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::Precondition(format!(
                "density has length {}, measure has {}",
                u.len(),
                self.len()
            )));
        }
        Ok(())
    }

    pub fn integrate(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(self.weights.iter().zip(u).map(|(w, x)| w * x).sum())
    }

    pub fn mean(&self, u: &[f64]) -> Result<f64> {
        Ok(self.integrate(u)? / self.total())
    }
}

/// Scalar convex function on an open interval.
pub trait ScalarConvex {
    fn name(&self) -> String;
    /// Open interval `(lo, hi)`.
    fn domain(&self) -> (f64, f64);
    fn value_unchecked(&self, t: f64) -> f64;
    fn d1_unchecked(&self, t: f64) -> f64;
    fn d2_unchecked(&self, t: f64) -> f64;

    fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.domain();
        t.is_finite() && t > lo && t < hi
    }

    fn value(&self, t: f64) -> Result<f64> {
        self.guard(t)?;
        Ok(self.value_unchecked(t))
    }

    fn d1(&self, t: f64) -> Result<f64> {
        self.guard(t)?;
        Ok(self.d1_unchecked(t))
    }

    fn d2(&self, t: f64) -> Result<f64> {
        self.guard(t)?;
        Ok(self.d2_unchecked(t))
    }

    fn guard(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            let (lo, hi) = self.domain();
            Err(Error::DomainViolation(format!("{t} outside ({lo}, {hi}) for {}", self.name())))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Square;

impl ScalarConvex for Square {
    fn name(&self) -> String {
        "square".into()
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn value_unchecked(&self, t: f64) -> f64 {
        t * t
    }
    fn d1_unchecked(&self, t: f64) -> f64 {
        2.0 * t
    }
    fn d2_unchecked(&self, _t: f64) -> f64 {
        2.0
    }
}

/// `F(u) = (u + 1/V) log(u + 1/V) - (u + 1/V) + 1` on `(-1/V, inf)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonPotential {
    pub volume: f64,
}

impl ScalarConvex for SolitonPotential {
    fn name(&self) -> String {
        format!("soliton(V={})", self.volume)
    }
    fn domain(&self) -> (f64, f64) {
        (-1.0 / self.volume, f64::INFINITY)
    }
    fn value_unchecked(&self, u: f64) -> f64 {
        let s = u + 1.0 / self.volume;
        s * s.ln() - s + 1.0
    }
    fn d1_unchecked(&self, u: f64) -> f64 {
        (u + 1.0 / self.volume).ln()
    }
    fn d2_unchecked(&self, u: f64) -> f64 {
        1.0 / (u + 1.0 / self.volume)
    }
}

/// Convex conjugate of [`SolitonPotential`]: `e^p - p/V - 1` on the whole line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonConjugate {
    pub volume: f64,
}

impl ScalarConvex for SolitonConjugate {
    fn name(&self) -> String {
        format!("soliton_conjugate(V={})", self.volume)
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn value_unchecked(&self, p: f64) -> f64 {
        p.exp() - p / self.volume - 1.0
    }
    fn d1_unchecked(&self, p: f64) -> f64 {
        p.exp() - 1.0 / self.volume
    }
    fn d2_unchecked(&self, p: f64) -> f64 {
        p.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarPair {
    pub f: SolitonPotential,
    pub f_hat: SolitonConjugate,
}

impl ScalarPair {
    /// Largest of `|F'(F^'(p)) - p|` and `|F^'(F'(u)) - u|` over the given points.
    pub fn inverse_defect(&self, ps: &[f64], us: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &p in ps {
            worst = worst.max((self.f.d1(self.f_hat.d1(p)?)? - p).abs());
        }
        for &u in us {
            worst = worst.max((self.f_hat.d1(self.f.d1(u)?)? - u).abs() / (1.0 + u.abs()));
        }
        Ok(worst)
    }
}

pub fn soliton_pair(volume: f64) -> Result<ScalarPair> {
    if !(volume.is_finite() && volume > 0.0) {
        return Err(Error::Precondition(format!("volume must be positive, got {volume}")));
    }
    Ok(ScalarPair { f: SolitonPotential { volume }, f_hat: SolitonConjugate { volume } })
}

/// `log(V u + 1)`, the same derivative written with the shift `log V` absorbed.
pub fn shifted_soliton_derivative(volume: f64, u: f64) -> Result<f64> {
    let s = volume * u + 1.0;
    if s <= 0.0 {
        return Err(Error::DomainViolation(format!("{u} outside (-1/V, inf)")));
    }
    Ok(s.ln())
}

fn map_checked(f: &dyn ScalarConvex, u: &[f64], g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    u.iter()
        .enumerate()
        .map(|(i, &t)| {
            f.guard(t).map_err(|_| Error::DomainViolation(format!("index {i}: {t} outside the domain of {}", f.name())))?;
            Ok(g(t))
        })
        .collect()
}

pub fn d_functional(f: &dyn ScalarConvex, m: &DiscreteMeasure, u: &[f64]) -> Result<f64> {
    m.check(u)?;
    m.integrate(&map_checked(f, u, |t| f.value_unchecked(t))?)
}

fn center(m: &DiscreteMeasure, v: Vec<f64>) -> Result<Vec<f64>> {
    let mean = m.mean(&v)?;
    Ok(v.into_iter().map(|x| x - mean).collect())
}

/// `F'(u) - (1/V) sum w F'(u)`.
pub fn d_gradient(f: &dyn ScalarConvex, m: &DiscreteMeasure, u: &[f64]) -> Result<Vec<f64>> {
    m.check(u)?;
    center(m, map_checked(f, u, |t| f.d1_unchecked(t))?)
}

/// `F''(u) du - (1/V) sum w F''(u) du`.
pub fn d_hessian(f: &dyn ScalarConvex, m: &DiscreteMeasure, u: &[f64], du: &[f64]) -> Result<Vec<f64>> {
    m.check(u)?;
    m.check(du)?;
    let h = map_checked(f, u, |t| f.d2_unchecked(t))?;
    center(m, h.iter().zip(du).map(|(a, b)| a * b).collect())
}

/// `sum w F^(psi)`.
pub fn legendre_functional(pair: &ScalarPair, m: &DiscreteMeasure, psi: &[f64]) -> Result<f64> {
    d_functional(&pair.f_hat, m, psi)
}

/// `sup_phi (sum w phi psi - D_F(phi))` by golden-section search per point.
pub fn legendre_brute(f: &dyn ScalarConvex, m: &DiscreteMeasure, psi: &[f64], bracket: (f64, f64)) -> Result<f64> {
    m.check(psi)?;
    let (dlo, dhi) = f.domain();
    let lo = bracket.0.max(dlo + 1e-12);
    let hi = bracket.1.min(dhi - 1e-12);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut total = 0.0;
    for (w, &p) in m.weights().iter().zip(psi) {
        let obj = |t: f64| p * t - f.value_unchecked(t);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let (mut f1, mut f2) = (obj(x1), obj(x2));
        for _ in 0..200 {
            if b - a < 1e-13 * (1.0 + a.abs()) {
                break;
            }
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = obj(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = obj(x1);
            }
        }
        total += w * obj(0.5 * (a + b));
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// `sum w theta = 0`
    Plain,
    /// `sum w (e^theta - 1) = 0`
    Hat,
    /// `sum w theta e^phi = 0`
    Tilde,
}

fn log_mean_exp(m: &DiscreteMeasure, v: &[f64]) -> Result<f64> {
    m.check(v)?;
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = m.weights().iter().zip(v).map(|(w, x)| w * (x - top).exp()).sum();
    Ok(top + (s / m.total()).ln())
}

/// Defect of `sum w (e^phi - 1) = 0`.
pub fn phi_normalization_defect(m: &DiscreteMeasure, phi: &[f64]) -> Result<f64> {
    m.check(phi)?;
    Ok(m.weights().iter().zip(phi).map(|(w, p)| w * (p.exp() - 1.0)).sum::<f64>().abs())
}

/// Shifts `raw` by the constant making `sum w (e^phi - 1) = 0`.
pub fn normalize_phi(m: &DiscreteMeasure, raw: &[f64]) -> Result<Vec<f64>> {
    let c = log_mean_exp(m, raw)?;
    Ok(raw.iter().map(|x| x - c).collect())
}

pub fn normalize_theta(m: &DiscreteMeasure, raw: &[f64], mode: ThetaMode, phi: Option<&[f64]>) -> Result<Vec<f64>> {
    m.check(raw)?;
    let shift = match mode {
        ThetaMode::Plain => m.mean(raw)?,
        ThetaMode::Hat => log_mean_exp(m, raw)?,
        ThetaMode::Tilde => {
            let phi = phi.ok_or_else(|| Error::Precondition("tilde normalization needs phi".into()))?;
            let d = phi_normalization_defect(m, phi)?;
            if d > 1e-10 * m.total() {
                return Err(Error::Precondition(format!("phi is not normalized (defect {d:.3e})")));
            }
            let e: Vec<f64> = phi.iter().map(|p| p.exp()).collect();
            let num: f64 = m.weights().iter().zip(raw).zip(&e).map(|((w, r), e)| w * r * e).sum();
            num / m.integrate(&e)?
        }
    };
    Ok(raw.iter().map(|x| x - shift).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TianZhuReport {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    /// `(1/V) sum w e^{tilde theta_xi}`
    pub exp_c_hat: f64,
    /// `(1/V) sum w tilde theta_eta e^{tilde theta_xi}`, the un-normalized chain.
    pub chain_value: f64,
    /// `|chain_value - rhs|`
    pub chain_defect_raw: f64,
    /// `|chain_value - e^c rhs|`
    pub chain_defect_corrected: f64,
}

/// Compares `int tilde theta_eta e^{tilde theta_xi} / int e^{tilde theta_xi}`
/// with `<dD^(hat theta_xi) - mu, theta_eta>`.
pub fn tian_zhu_check(m: &DiscreteMeasure, phi: &[f64], theta_xi_raw: &[f64], theta_eta_raw: &[f64]) -> Result<TianZhuReport> {
    m.check(phi)?;
    let v = m.total();
    let d = phi_normalization_defect(m, phi)?;
    if d > 1e-10 * v {
        return Err(Error::Precondition(format!("phi is not normalized (defect {d:.3e})")));
    }
    let theta_eta = normalize_theta(m, theta_eta_raw, ThetaMode::Plain, None)?;
    let hat_xi = normalize_theta(m, theta_xi_raw, ThetaMode::Hat, None)?;
    let tilde_xi = normalize_theta(m, theta_xi_raw, ThetaMode::Tilde, Some(phi))?;
    let tilde_eta = normalize_theta(m, theta_eta_raw, ThetaMode::Tilde, Some(phi))?;

    let e_xi: Vec<f64> = tilde_xi.iter().map(|t| t.exp()).collect();
    let weighted: Vec<f64> = tilde_eta.iter().zip(&e_xi).map(|(a, b)| a * b).collect();
    let num = m.integrate(&weighted)?;
    let den = m.integrate(&e_xi)?;
    let lhs = num / den;
    let density: Vec<f64> = hat_xi
        .iter()
        .zip(phi)
        .zip(&theta_eta)
        .map(|((h, p), t)| ((h.exp() - 1.0) / v - (p.exp() - 1.0) / v) * t)
        .collect();
    let rhs = m.integrate(&density)?;
    let exp_c_hat = den / v;
    let chain_value = num / v;
    Ok(TianZhuReport {
        lhs,
        rhs,
        defect: (lhs - rhs).abs(),
        exp_c_hat,
        chain_value,
        chain_defect_raw: (chain_value - rhs).abs(),
        chain_defect_corrected: (chain_value - exp_c_hat * rhs).abs(),
    })
}

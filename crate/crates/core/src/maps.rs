//! Hermiticity-preserving maps on `M_{2^N}` written in the normalized Pauli-string basis
//! `F_s = sigma_s / sqrt(2^N)`:
//!
//! ```text
//! Lambda[X] = sum_{k,i} c_{ki} F_k X F_i^dagger
//! ```
//!
//! Every map built by this crate is diagonal in that basis, so the diagonal case has its
//! own storage and fast paths. Full coefficient matrices are accepted for maps read from
//! files and for the generic routes.

use std::fmt::Write as _;

use num_complex::Complex;
use rand::Rng;

use crate::dense::{self, check_dense_cap, CMatrix, PauliString, DEFAULT_DENSE_CAP};
use crate::error::{parse_err, Error, Result};
use crate::lattice::{LatticeShape, MultiIndex};
use crate::scalar::Coefficient;
use crate::states::LatticeState;
use crate::{ComplexMatrix, Rational, StateVector};

/// Agreement tolerance between the analytic and dense routes.
pub const ROUTE_TOL: f64 = 1e-10;
/// Completely-positive threshold on the smallest coefficient eigenvalue.
pub const CP_TOL: f64 = 1e-10;
/// Witness values with `|D|` at or below this are inconclusive.
pub const WITNESS_BAND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Coeffs<S> {
    /// `c_{ki} = lambda_k delta_{ki}`, indexed by lattice site.
    Diagonal(Vec<S>),
    /// Row-major Hermitian `4^N x 4^N` coefficient matrix.
    Full(Vec<Complex<S>>),
}

/// How a map was obtained. Only the first two carry a positivity proof.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance<S> {
    LambdaBeta0 { beta0: MultiIndex },
    TensorSum(TensorSumSpec<S>),
    Unverified,
}

impl<S> Provenance<S> {
    pub fn is_positive_by_construction(&self) -> bool {
        !matches!(self, Provenance::Unverified)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRep<S> {
    shape: LatticeShape,
    coeffs: Coeffs<S>,
    provenance: Provenance<S>,
}

impl<S: Coefficient> MapRep<S> {
    pub fn diagonal(shape: LatticeShape, lambda: Vec<S>) -> Result<Self> {
        if lambda.len() != shape.size() {
            return Err(Error::Dimension(format!(
                "{} diagonal coefficients for a lattice of {} sites",
                lambda.len(),
                shape.size()
            )));
        }
        Ok(MapRep {
            shape,
            coeffs: Coeffs::Diagonal(lambda),
            provenance: Provenance::Unverified,
        })
    }

    pub fn full(shape: LatticeShape, matrix: Vec<Complex<S>>) -> Result<Self> {
        let n = shape.size();
        if matrix.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} coefficient entries, expected {}",
                matrix.len(),
                n * n
            )));
        }
        for k in 0..n {
            for i in 0..=k {
                let a = &matrix[k * n + i];
                let b = &matrix[i * n + k];
                let dev = (a.re.clone() - b.re.clone()).to_f64().abs()
                    + (a.im.clone() + b.im.clone()).to_f64().abs();
                if dev > 1e-12 {
                    return Err(Error::Contract(format!(
                        "coefficient matrix is not Hermitian at ({k}, {i})"
                    )));
                }
            }
        }
        Ok(MapRep {
            shape,
            coeffs: Coeffs::Full(matrix),
            provenance: Provenance::Unverified,
        })
    }

    /// `id`: the single coefficient `d` on the identity string.
    pub fn identity(shape: LatticeShape) -> Self {
        let mut lambda = vec![S::zero(); shape.size()];
        lambda[0] = S::from_int(shape.dim() as i64);
        MapRep::diagonal(shape, lambda).expect("sized by construction")
    }

    /// Transposition in the computational basis: `lambda_s = prod_c epsilon(s_c)`.
    pub fn transposition(shape: LatticeShape) -> Self {
        let lambda = (0..shape.size())
            .map(|s| {
                let ys = shape.coords(s).iter().filter(|&&v| v == 2).count();
                S::from_int(if ys % 2 == 0 { 1 } else { -1 })
            })
            .collect();
        MapRep::diagonal(shape, lambda).expect("sized by construction")
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn coeffs(&self) -> &Coeffs<S> {
        &self.coeffs
    }

    pub fn provenance(&self) -> &Provenance<S> {
        &self.provenance
    }

    pub fn diagonal_coeffs(&self) -> Option<&[S]> {
        match &self.coeffs {
            Coeffs::Diagonal(l) => Some(l),
            Coeffs::Full(_) => None,
        }
    }

    /// `c_{ss}`.
    pub fn diagonal_entry(&self, site: usize) -> S {
        match &self.coeffs {
            Coeffs::Diagonal(l) => l[site].clone(),
            Coeffs::Full(m) => m[site * self.shape.size() + site].re.clone(),
        }
    }

    /// Coefficient matrix as dense doubles.
    pub fn coefficient_matrix(&self) -> ComplexMatrix {
        let n = self.shape.size();
        match &self.coeffs {
            Coeffs::Diagonal(l) => {
                let mut m = ComplexMatrix::zeros(n, n);
                for (s, v) in l.iter().enumerate() {
                    m[(s, s)] = Complex::new(v.to_f64(), 0.0);
                }
                m
            }
            Coeffs::Full(c) => ComplexMatrix::from_fn(n, n, |r, col| to_c64(&c[r * n + col])),
        }
    }

    /// Non-zero coefficient entries `(k, i, c_{ki})`.
    fn terms(&self) -> Vec<(usize, usize, Complex<f64>)> {
        let n = self.shape.size();
        match &self.coeffs {
            Coeffs::Diagonal(l) => l
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(s, v)| (s, s, Complex::new(v.to_f64(), 0.0)))
                .collect(),
            Coeffs::Full(c) => (0..n * n)
                .filter(|&e| !c[e].re.is_zero() || !c[e].im.is_zero())
                .map(|e| (e / n, e % n, to_c64(&c[e])))
                .collect(),
        }
    }
}

fn to_c64<S: Coefficient>(z: &Complex<S>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

/// The orthonormal basis `F_s = sigma_s / sqrt(2^N)` in site order.
pub fn pauli_basis(shape: &LatticeShape) -> Vec<ComplexMatrix> {
    let scale = Complex::new(1.0 / (shape.dim() as f64).sqrt(), 0.0);
    (0..shape.size())
        .map(|s| PauliString::for_site(shape, s).to_dense::<f64>() * scale)
        .collect()
}

fn check_operator(shape: &LatticeShape, x: &ComplexMatrix) -> Result<()> {
    let d = shape.dim();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension(format!(
            "map acts on {d}x{d} matrices, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `Lambda[X] = sum c_{ki} F_k X F_i^dagger`.
pub fn apply_map<S: Coefficient>(rep: &MapRep<S>, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let shape = rep.shape;
    check_operator(&shape, x)?;
    let d = shape.dim();
    let strings: Vec<PauliString> = (0..shape.size()).map(|s| PauliString::for_site(&shape, s)).collect();
    let inv_d = 1.0 / d as f64;
    let mut out = ComplexMatrix::zeros(d, d);
    for (k, i, c) in rep.terms() {
        // F_i^dagger = F_i for Pauli strings
        out += strings[k].sandwich(x, &strings[i]) * (c * inv_d);
    }
    Ok(out)
}

/// `sum c_{ki} G_k X G_i^dagger` in an arbitrary operator basis.
pub fn apply_with_basis(coeffs: &ComplexMatrix, basis: &[ComplexMatrix], x: &ComplexMatrix) -> Result<ComplexMatrix> {
    if coeffs.nrows() != basis.len() || coeffs.ncols() != basis.len() {
        return Err(Error::Dimension("coefficient matrix does not match the basis size".into()));
    }
    let d = x.nrows();
    let mut out = ComplexMatrix::zeros(d, d);
    for (k, gk) in basis.iter().enumerate() {
        let left = gk * x;
        for (i, gi) in basis.iter().enumerate() {
            let c = coeffs[(k, i)];
            if c.norm() != 0.0 {
                out += &left * gi.adjoint() * c;
            }
        }
    }
    Ok(out)
}

/// `(id (x) Lambda)[P_+^{2^N}] = (1/d) sum_{ab} E_ab (x) Lambda[E_ab]`.
///
/// Each `F_k E_ab F_i^dagger` is a single phased matrix unit, so the sum is assembled
/// term by term in `O(terms * d^2)`. For diagonal maps the result is compared against
/// `(1/d) sum_s lambda_s P_s`.
pub fn choi<S: Coefficient>(rep: &MapRep<S>) -> Result<ComplexMatrix> {
    choi_with_cap(rep, DEFAULT_DENSE_CAP)
}

pub fn choi_with_cap<S: Coefficient>(rep: &MapRep<S>, cap: usize) -> Result<ComplexMatrix> {
    let shape = rep.shape;
    check_dense_cap(shape.qubits(), cap)?;
    let d = shape.dim();
    let strings: Vec<PauliString> = (0..shape.size()).map(|s| PauliString::for_site(&shape, s)).collect();
    let scale = 1.0 / (d * d) as f64;
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for (k, i, c) in rep.terms() {
        let (pk, pi) = (&strings[k], &strings[i]);
        let right: Vec<Complex<f64>> = (0..d).map(|b| dense::i_pow::<f64>(pi.phase(b)).conj()).collect();
        for a in 0..d {
            let za = dense::i_pow::<f64>(pk.phase(a)) * c * scale;
            let row = a * d + (a ^ pk.x_mask());
            for (b, rb) in right.iter().enumerate() {
                out[(row, b * d + (b ^ pi.x_mask()))] += za * rb;
            }
        }
    }
    if let Some(analytic) = choi_analytic(rep)? {
        let diff = dense::max_abs_diff(&out, &analytic);
        if diff > ROUTE_TOL {
            return Err(Error::CrossCheck(format!(
                "dense Choi matrix differs from the Bell-projector form by {diff:e}"
            )));
        }
    }
    Ok(out)
}

/// The Choi matrix assembled block by block through [`apply_map`]: `d^2` map applications.
pub fn choi_blocks<S: Coefficient>(rep: &MapRep<S>, cap: usize) -> Result<ComplexMatrix> {
    let shape = rep.shape;
    check_dense_cap(shape.qubits(), cap)?;
    let d = shape.dim();
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    let inv_d = Complex::new(1.0 / d as f64, 0.0);
    for a in 0..d {
        for b in 0..d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(a, b)] = Complex::new(1.0, 0.0);
            let image = apply_map(rep, &e)?;
            for r in 0..d {
                for col in 0..d {
                    out[(a * d + r, b * d + col)] = image[(r, col)] * inv_d;
                }
            }
        }
    }
    Ok(out)
}

/// `(1/2^N) sum_s lambda_s |psi_s><psi_s|` for diagonal maps.
pub fn choi_analytic<S: Coefficient>(rep: &MapRep<S>) -> Result<Option<ComplexMatrix>> {
    let Some(lambda) = rep.diagonal_coeffs() else {
        return Ok(None);
    };
    let shape = rep.shape;
    let d = shape.dim();
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for (s, l) in lambda.iter().enumerate() {
        if l.is_zero() {
            continue;
        }
        let v = dense::bell_vector_index::<f64>(&shape, s);
        out += dense::outer(&v, &v) * Complex::new(l.to_f64() / d as f64, 0.0);
    }
    Ok(Some(out))
}

#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    /// `sum_j K_j X K_j^dagger`.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(x.nrows(), x.ncols());
        for k in &self.operators {
            out += k * x * k.adjoint();
        }
        out
    }

    /// `sum_j K_j^dagger K_j = 1` within `tol`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let Some(first) = self.operators.first() else {
            return false;
        };
        let d = first.ncols();
        let mut acc = ComplexMatrix::zeros(d, d);
        for k in &self.operators {
            acc += k.adjoint() * k;
        }
        dense::max_abs_diff(&acc, &ComplexMatrix::identity(d, d)) <= tol
    }
}

#[derive(Debug, Clone)]
pub struct CpAnalysis<S> {
    pub is_cp: bool,
    /// Smallest eigenvalue of the coefficient matrix.
    pub min_eig: f64,
    /// Exact smallest eigenvalue, available for diagonal maps.
    pub min_eig_exact: Option<S>,
    pub kraus: Option<KrausSet>,
}

/// Eigenpairs of the coefficient matrix as (value, operator `G_j`).
fn diagonal_basis<S: Coefficient>(rep: &MapRep<S>) -> Result<Vec<(f64, ComplexMatrix)>> {
    let basis = pauli_basis(&rep.shape);
    match &rep.coeffs {
        Coeffs::Diagonal(l) => Ok(l.iter().map(|v| v.to_f64()).zip(basis).collect()),
        Coeffs::Full(_) => {
            let (vals, vecs) = dense::hermitian_eigen(&rep.coefficient_matrix())?;
            let d = rep.shape.dim();
            Ok(vals
                .into_iter()
                .enumerate()
                .map(|(j, v)| {
                    let mut g = ComplexMatrix::zeros(d, d);
                    for (k, f) in basis.iter().enumerate() {
                        let u = vecs[(k, j)];
                        if u.norm() != 0.0 {
                            g += f * u;
                        }
                    }
                    (v, g)
                })
                .collect())
        }
    }
}

/// Complete positivity from the coefficient matrix, with a Kraus form when CP.
pub fn cp_analysis<S: Coefficient>(rep: &MapRep<S>) -> Result<CpAnalysis<S>> {
    let min_eig_exact = rep.diagonal_coeffs().map(|l| {
        l.iter()
            .cloned()
            .reduce(|a, b| if b < a { b } else { a })
            .expect("non-empty lattice")
    });
    let pairs = diagonal_basis(rep)?;
    let min_eig = pairs.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let is_cp = match &min_eig_exact {
        Some(v) => v.to_f64() >= -CP_TOL && !(v.is_negative() && v.to_f64() == 0.0),
        None => min_eig >= -CP_TOL,
    };
    let kraus = is_cp.then(|| KrausSet {
        operators: pairs
            .into_iter()
            .filter(|(v, _)| *v > 0.0)
            .map(|(v, g)| g * Complex::new(v.sqrt(), 0.0))
            .collect(),
    });
    Ok(CpAnalysis { is_cp, min_eig, min_eig_exact, kraus })
}

/// Splits `Lambda = Lambda_+ - Lambda_-` into two CP maps along the eigenvalue signs of
/// the coefficient matrix.
pub fn cp_difference<S: Coefficient>(rep: &MapRep<S>) -> Result<(KrausSet, KrausSet)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (v, g) in diagonal_basis(rep)? {
        if v > 0.0 {
            pos.push(g * Complex::new(v.sqrt(), 0.0));
        } else if v < 0.0 {
            neg.push(g * Complex::new((-v).sqrt(), 0.0));
        }
    }
    Ok((KrausSet { operators: pos }, KrausSet { operators: neg }))
}

/// `sum c_{ki} F_i^dagger F_k = 1` within `tol`.
pub fn is_trace_preserving<S: Coefficient>(rep: &MapRep<S>, tol: f64) -> bool {
    let shape = rep.shape;
    let d = shape.dim();
    let strings: Vec<PauliString> = (0..shape.size()).map(|s| PauliString::for_site(&shape, s)).collect();
    let id = ComplexMatrix::identity(d, d);
    let mut acc = ComplexMatrix::zeros(d, d);
    for (k, i, c) in rep.terms() {
        acc += strings[i].sandwich(&id, &strings[k]) * (c / d as f64);
    }
    dense::max_abs_diff(&acc, &id) <= tol
}

/// Factor data of a tensor-sum map `Lambda_1 (x) id + id (x) Lambda_2`, each factor
/// diagonal in its own normalized Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSumSpec<S> {
    /// Coefficients over `L^(m)`.
    pub lambda1: Vec<S>,
    /// Coefficients over `L^(n)`.
    pub lambda2: Vec<S>,
    /// The single negative entry of `lambda2`.
    pub neg_index: usize,
}

fn arity_of(len: usize, name: &str) -> Result<usize> {
    if len < 4 || !len.is_power_of_two() || !len.trailing_zeros().is_multiple_of(2) {
        return Err(Error::Dimension(format!("{name} has {len} entries, expected 4^k with k >= 1")));
    }
    Ok(len.trailing_zeros() as usize / 2)
}

impl<S: Coefficient> TensorSumSpec<S> {
    pub fn shape(&self) -> Result<LatticeShape> {
        LatticeShape::new(arity_of(self.lambda1.len(), "lambda1")?, arity_of(self.lambda2.len(), "lambda2")?)
    }

    /// Checks the positivity hypothesis: every coefficient is strictly positive except
    /// `lambda2[neg_index] < 0`, and every positive one is at least `|lambda2[neg_index]|`.
    pub fn validate(&self) -> Result<()> {
        self.shape()?;
        let k = self.neg_index;
        if k >= self.lambda2.len() {
            return Err(Error::Hypothesis(format!(
                "negative index {k} outside lambda2 (length {})",
                self.lambda2.len()
            )));
        }
        let neg = &self.lambda2[k];
        if !neg.is_negative() {
            return Err(Error::Hypothesis(format!("lambda2[{k}] = {neg} is not negative")));
        }
        let bound = neg.abs();
        let entries = self
            .lambda1
            .iter()
            .enumerate()
            .map(|(i, v)| ("lambda1", i, v))
            .chain(self.lambda2.iter().enumerate().filter(|(i, _)| *i != k).map(|(i, v)| ("lambda2", i, v)));
        for (name, i, v) in entries {
            if v.is_negative() {
                return Err(Error::Hypothesis(format!(
                    "{name}[{i}] = {v} is a second negative coefficient; exactly one is allowed"
                )));
            }
            if v.is_zero() {
                return Err(Error::Hypothesis(format!("{name}[{i}] = 0 is not positive")));
            }
            if *v < bound {
                return Err(Error::Hypothesis(format!(
                    "{name}[{i}] = {v} is smaller than |lambda2[{k}]| = {bound}"
                )));
            }
        }
        Ok(())
    }

    /// Draws factors satisfying the hypothesis, with small rational-valued entries.
    pub fn random_valid<G: Rng + ?Sized>(rng: &mut G, m: usize, n: usize) -> Self
    where
        S: From<Rational>,
    {
        let q = Rational::new(rng.gen_range(1..=8), rng.gen_range(1..=8));
        let draw = |rng: &mut G| S::from(q + Rational::new(rng.gen_range(0..=6), rng.gen_range(1..=4)));
        let lambda1 = (0..1usize << (2 * m)).map(|_| draw(rng)).collect();
        let mut lambda2: Vec<S> = (0..1usize << (2 * n)).map(|_| draw(rng)).collect();
        let neg_index = rng.gen_range(0..lambda2.len());
        lambda2[neg_index] = S::from(-q);
        TensorSumSpec { lambda1, lambda2, neg_index }
    }
}

/// Builds `Lambda_1 (x) id_{2^n} + id_{2^m} (x) Lambda_2` in the lattice basis:
/// `lambda_(a,0) += 2^n lambda1[a]` and `lambda_(0,b) += 2^m lambda2[b]`.
pub fn tensor_sum_map<S: Coefficient>(factors: &TensorSumSpec<S>) -> Result<MapRep<S>> {
    factors.validate()?;
    let shape = factors.shape()?;
    let low = 1usize << (2 * shape.n());
    let mut lambda = vec![S::zero(); shape.size()];
    let scale1 = S::from_int(1 << shape.n());
    let scale2 = S::from_int(1 << shape.m());
    for (a, v) in factors.lambda1.iter().enumerate() {
        lambda[a * low] = lambda[a * low].clone() + scale1.clone() * v.clone();
    }
    for (b, v) in factors.lambda2.iter().enumerate() {
        lambda[b] = lambda[b].clone() + scale2.clone() * v.clone();
    }
    let mut rep = MapRep::diagonal(shape, lambda)?;
    rep.provenance = Provenance::TensorSum(factors.clone());
    Ok(rep)
}

/// Factor vectors of `Lambda_{beta0}`: `lambda1 = 2^-n` everywhere, `lambda2 = 2^-m`
/// with the sign flipped at `beta0`.
pub fn lambda_beta0_spec<S: Coefficient>(shape: LatticeShape, beta0: &MultiIndex) -> Result<TensorSumSpec<S>> {
    if beta0.arity() != shape.n() {
        return Err(Error::Shape(format!("beta0 = {beta0} must have arity n = {}", shape.n())));
    }
    if beta0.is_zero() {
        return Err(Error::Contract("beta0 must differ from the null vector".into()));
    }
    let one = S::one();
    let w1 = one.clone() / S::from_int(1 << shape.n());
    let w2 = one / S::from_int(1 << shape.m());
    let k = beta0.to_index();
    let mut lambda2 = vec![w2.clone(); 1 << (2 * shape.n())];
    lambda2[k] = -w2;
    Ok(TensorSumSpec { lambda1: vec![w1; 1 << (2 * shape.m())], lambda2, neg_index: k })
}

/// The non-decomposable map `Lambda_{beta0}`: coefficient 2 on the identity string, 1 on
/// the remaining zero-axis strings except -1 at `(0_m, beta0)`, 0 elsewhere.
pub fn lambda_beta0<S: Coefficient>(shape: LatticeShape, beta0: &MultiIndex) -> Result<MapRep<S>> {
    if shape.m() < shape.n() {
        return Err(Error::Hypothesis(format!(
            "Lambda_beta0 needs m >= n (got m={}, n={}): 1/2^n < 1/2^m",
            shape.m(),
            shape.n()
        )));
    }
    let factors = lambda_beta0_spec(shape, beta0)?;
    let mut rep = tensor_sum_map(&factors)?;
    rep.provenance = Provenance::LambdaBeta0 { beta0: beta0.clone() };
    Ok(rep)
}

/// The tensor-sum factors behind a map, if it was built from them.
pub fn factor_spec<S: Coefficient>(rep: &MapRep<S>) -> Option<TensorSumSpec<S>> {
    match &rep.provenance {
        Provenance::TensorSum(factors) => Some(factors.clone()),
        Provenance::LambdaBeta0 { beta0 } => lambda_beta0_spec(rep.shape, beta0).ok(),
        Provenance::Unverified => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeValue {
    /// `<psi| Lambda[|phi><phi|] |psi>` through the coefficient matrix.
    pub dense: f64,
    /// The factorized form in the coefficient matrices `Phi`, `Psi`, for tensor-sum maps.
    pub analytic: Option<f64>,
}

/// `D(phi, psi) = <psi| Lambda[|phi><phi|] |psi>`.
pub fn positivity_probe<S: Coefficient>(rep: &MapRep<S>, phi: &StateVector, psi: &StateVector) -> Result<ProbeValue> {
    let shape = rep.shape;
    let d = shape.dim();
    if phi.len() != d || psi.len() != d {
        return Err(Error::Dimension(format!(
            "probe vectors must have dimension {d} (got {} and {})",
            phi.len(),
            psi.len()
        )));
    }
    // v_k = <psi| F_k |phi>; D = sum c_{ki} v_k conj(v_i)
    let scale = 1.0 / (d as f64).sqrt();
    let v: Vec<Complex<f64>> = (0..shape.size())
        .map(|s| psi.dotc(&PauliString::for_site(&shape, s).apply(phi)) * scale)
        .collect();
    let dense = rep
        .terms()
        .into_iter()
        .map(|(k, i, c)| c * v[k] * v[i].conj())
        .sum::<Complex<f64>>()
        .re;
    let analytic = factor_spec(rep).map(|factors| tensor_sum_probe(&shape, &factors, phi, psi));
    if let Some(a) = analytic {
        if (a - dense).abs() > ROUTE_TOL * dense.abs().max(1.0) {
            return Err(Error::CrossCheck(format!(
                "probe routes disagree: coefficient route {dense:e}, factorized route {a:e}"
            )));
        }
    }
    Ok(ProbeValue { dense, analytic })
}

/// `sum_mu l1_mu |Tr(F1_mu Phi Psi^dagger)|^2 + sum_nu l2_nu |Tr(F2_nu (Psi^dagger Phi)^T)|^2`.
fn tensor_sum_probe<S: Coefficient>(
    shape: &LatticeShape,
    factors: &TensorSumSpec<S>,
    phi: &StateVector,
    psi: &StateVector,
) -> f64 {
    let d1 = 1usize << shape.m();
    let d2 = 1usize << shape.n();
    let big_phi = CMatrix::<f64>::from_fn(d1, d2, |i, j| phi[i * d2 + j]);
    let big_psi = CMatrix::<f64>::from_fn(d1, d2, |i, j| psi[i * d2 + j]);
    let left = &big_phi * big_psi.adjoint();
    let right = big_psi.adjoint() * &big_phi;
    let mut total = 0.0;
    for (mu, l) in factors.lambda1.iter().enumerate() {
        let p = PauliString::from_labels(MultiIndex::from_index(mu, shape.m()).values());
        // Tr(sigma A) = sum_c <c xor x| sigma |c> A[c][c xor x]
        let t: Complex<f64> = (0..d1)
            .map(|col| dense::i_pow::<f64>(p.phase(col)) * left[(col, col ^ p.x_mask())])
            .sum();
        total += l.to_f64() * t.norm_sqr() / d1 as f64;
    }
    for (nu, l) in factors.lambda2.iter().enumerate() {
        let p = PauliString::from_labels(MultiIndex::from_index(nu, shape.n()).values());
        // Tr(sigma B^T) = sum_{rc} sigma[r][c] B[r][c]
        let t: Complex<f64> = (0..d2)
            .map(|col| dense::i_pow::<f64>(p.phase(col)) * right[(col ^ p.x_mask(), col)])
            .sum();
        total += l.to_f64() * t.norm_sqr() / d2 as f64;
    }
    total
}

/// `<phi (x) psi| Choi |phi (x) psi> = (1/d) <psi| Lambda[|phi*><phi*|] |psi>`.
pub fn choi_expectation(choi: &ComplexMatrix, phi: &StateVector, psi: &StateVector) -> f64 {
    let d = phi.len();
    let prod = StateVector::from_fn(d * d, |r, _| phi[r / d] * psi[r % d]);
    prod.dotc(&(choi * &prod)).re
}

pub enum DensityInput<'a> {
    Dense(&'a ComplexMatrix),
    Lattice(&'a LatticeState),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessVerdict {
    /// `D < 0`: the state is entangled (for a positive map).
    Detected,
    /// `D` is zero (exactly, or within the float band).
    Inconclusive,
    NotDetected,
}

impl WitnessVerdict {
    pub fn from_float(d: f64) -> Self {
        if d.abs() <= WITNESS_BAND {
            WitnessVerdict::Inconclusive
        } else if d < 0.0 {
            WitnessVerdict::Detected
        } else {
            WitnessVerdict::NotDetected
        }
    }

    pub fn from_exact<S: Coefficient>(d: &S) -> Self {
        if d.is_zero() {
            WitnessVerdict::Inconclusive
        } else if d.is_negative() {
            WitnessVerdict::Detected
        } else {
            WitnessVerdict::NotDetected
        }
    }
}

#[derive(Debug, Clone)]
pub struct WitnessReport<S> {
    /// Lattice fast path; absent for dense inputs.
    pub exact: Option<S>,
    /// `Tr(choi * rho)`; absent when the dense cap forbids it.
    pub dense: Option<f64>,
    pub verdict: WitnessVerdict,
}

/// Checks trace one, Hermiticity and positivity (all to `1e-10`).
pub fn validate_density(rho: &ComplexMatrix) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::Contract(format!("density matrix has trace {tr}")));
    }
    let min = dense::min_eigenvalue(rho)?;
    if min < -1e-10 {
        return Err(Error::Contract(format!("density matrix has eigenvalue {min:e}")));
    }
    Ok(())
}

/// `D = Tr((id (x) Lambda)[P_+] rho)` on a dense state.
pub fn witness_dense<S: Coefficient>(rep: &MapRep<S>, rho: &ComplexMatrix) -> Result<f64> {
    let d = rep.shape.dim();
    if rho.nrows() != d * d || rho.ncols() != d * d {
        return Err(Error::Dimension(format!(
            "state must be {0}x{0}, got {1}x{2}",
            d * d,
            rho.nrows(),
            rho.ncols()
        )));
    }
    validate_density(rho)?;
    let c = choi(rep)?;
    Ok(dense::trace_of_product(&c, rho)?.re)
}

/// `D = (1/2^N) sum_s c_ss pi_s`, exact in the coefficient ring.
pub fn witness_lattice<S: Coefficient>(rep: &MapRep<S>, state: &LatticeState) -> Result<S> {
    if state.shape() != rep.shape {
        return Err(Error::Shape(format!("state shape {} differs from map shape {}", state.shape(), rep.shape)));
    }
    let mut acc = S::zero();
    for (s, &w) in state.weights().iter().enumerate() {
        if w != 0 {
            acc = acc + rep.diagonal_entry(s) * S::from_int(w as i64);
        }
    }
    Ok(acc / (S::from_int(rep.shape.dim() as i64) * S::from_int(state.denom() as i64)))
}

/// Witness value through whichever routes apply, cross-checked when both run.
pub fn witness_value<S: Coefficient>(rep: &MapRep<S>, input: DensityInput<'_>, dense_cap: usize) -> Result<WitnessReport<S>> {
    match input {
        DensityInput::Dense(rho) => {
            check_dense_cap(rep.shape.qubits(), dense_cap)?;
            let d = witness_dense(rep, rho)?;
            Ok(WitnessReport { exact: None, dense: Some(d), verdict: WitnessVerdict::from_float(d) })
        }
        DensityInput::Lattice(state) => {
            let exact = witness_lattice(rep, state)?;
            let dense = if rep.shape.qubits() <= dense_cap {
                let rho = state.materialize_dense_with_cap(dense_cap)?;
                let d = witness_dense(rep, &rho)?;
                if (d - exact.to_f64()).abs() > ROUTE_TOL {
                    return Err(Error::CrossCheck(format!(
                        "lattice witness {exact} differs from dense value {d:e}"
                    )));
                }
                Some(d)
            } else {
                None
            };
            let verdict = WitnessVerdict::from_exact(&exact);
            Ok(WitnessReport { exact: Some(exact), dense, verdict })
        }
    }
}

// ---------------------------------------------------------------------------
// Map files

impl<S: Coefficient> MapRep<S> {
    /// Text form: a header line, a provenance line, then either `4^N` lines
    /// `siteIndex lambda` or the matrix text layout with coefficient tokens.
    pub fn to_text(&self) -> String {
        let kind = match self.coeffs {
            Coeffs::Diagonal(_) => "diagonal",
            Coeffs::Full(_) => "full",
        };
        let mut out = format!("map m={} n={} kind={}\n", self.shape.m(), self.shape.n(), kind);
        match &self.provenance {
            Provenance::LambdaBeta0 { beta0 } => writeln!(out, "provenance lambda-beta0 {beta0}").unwrap(),
            Provenance::TensorSum(factors) => {
                out.push_str("provenance tensor-sum\n");
                let join = |v: &[S]| v.iter().map(|x| x.to_token()).collect::<Vec<_>>().join(" ");
                writeln!(out, "lambda1 {}", join(&factors.lambda1)).unwrap();
                writeln!(out, "lambda2 {}", join(&factors.lambda2)).unwrap();
                writeln!(out, "neg {}", factors.neg_index).unwrap();
            }
            Provenance::Unverified => out.push_str("provenance none\n"),
        }
        match &self.coeffs {
            Coeffs::Diagonal(l) => {
                for (s, v) in l.iter().enumerate() {
                    writeln!(out, "{s} {}", v.to_token()).unwrap();
                }
            }
            Coeffs::Full(c) => {
                let n = self.shape.size();
                writeln!(out, "dims {n} {n}").unwrap();
                for z in c {
                    writeln!(out, "{} {}", z.re.to_token(), z.im.to_token()).unwrap();
                }
            }
        }
        out
    }

    /// Parses [`MapRep::to_text`] output. A declared construction is rebuilt and must
    /// reproduce the listed coefficients.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty map file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "map" {
            return Err(parse_err(ln, "expected `map m=<m> n=<n> kind=<diagonal|full>`"));
        }
        let m = key_value(fields[1], "m", ln)?;
        let n = key_value(fields[2], "n", ln)?;
        let kind = fields[3]
            .strip_prefix("kind=")
            .ok_or_else(|| parse_err(ln, "missing kind="))?;
        let shape = LatticeShape::new(m, n)?;

        let (ln, prov) = lines.next().ok_or_else(|| parse_err(ln + 1, "missing provenance line"))?;
        let prov_fields: Vec<&str> = prov.split_whitespace().collect();
        let declared: Option<MapRep<S>> = match prov_fields.as_slice() {
            ["provenance", "none"] => None,
            ["provenance", "lambda-beta0", b] => {
                let beta0: MultiIndex = b.parse()?;
                Some(lambda_beta0(shape, &beta0)?)
            }
            ["provenance", "tensor-sum"] => {
                let mut vec_line = |name: &str| -> Result<Vec<S>> {
                    let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, format!("missing {name} line")))?;
                    let rest = l
                        .strip_prefix(name)
                        .ok_or_else(|| parse_err(ln, format!("expected {name}")))?;
                    rest.split_whitespace()
                        .map(|t| t.parse::<S>().map_err(|_| parse_err(ln, format!("bad coefficient {t:?}"))))
                        .collect()
                };
                let lambda1 = vec_line("lambda1")?;
                let lambda2 = vec_line("lambda2")?;
                let (nl, neg) = lines.next().ok_or_else(|| parse_err(ln, "missing neg line"))?;
                let neg_index = neg
                    .strip_prefix("neg")
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| parse_err(nl, "expected `neg <index>`"))?;
                Some(tensor_sum_map(&TensorSumSpec { lambda1, lambda2, neg_index })?)
            }
            _ => return Err(parse_err(ln, format!("unknown provenance {prov:?}"))),
        };

        let parse_tok = |t: &str, ln: usize| t.parse::<S>().map_err(|_| parse_err(ln, format!("bad coefficient {t:?}")));
        let rep = match kind {
            "diagonal" => {
                let mut lambda = vec![None; shape.size()];
                for (ln, l) in lines {
                    let mut it = l.split_whitespace();
                    let s: usize = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(ln, "bad site index"))?;
                    let v = parse_tok(it.next().ok_or_else(|| parse_err(ln, "missing coefficient"))?, ln)?;
                    let slot = lambda
                        .get_mut(s)
                        .ok_or_else(|| parse_err(ln, format!("site index {s} out of range")))?;
                    if slot.replace(v).is_some() {
                        return Err(parse_err(ln, format!("site {s} listed twice")));
                    }
                }
                let lambda = lambda
                    .into_iter()
                    .enumerate()
                    .map(|(s, v)| v.ok_or_else(|| parse_err(0, format!("coefficient for site {s} missing"))))
                    .collect::<Result<Vec<_>>>()?;
                MapRep::diagonal(shape, lambda)?
            }
            "full" => {
                let (ln, dims) = lines.next().ok_or_else(|| parse_err(ln, "missing dims line"))?;
                let size = shape.size();
                if dims != format!("dims {size} {size}") {
                    return Err(parse_err(ln, format!("expected `dims {size} {size}`")));
                }
                let mut entries = Vec::with_capacity(size * size);
                for (ln, l) in lines {
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() != 2 {
                        return Err(parse_err(ln, "expected `re im`"));
                    }
                    entries.push(Complex::new(parse_tok(toks[0], ln)?, parse_tok(toks[1], ln)?));
                }
                MapRep::full(shape, entries)?
            }
            other => return Err(parse_err(1, format!("unknown map kind {other:?}"))),
        };
        match declared {
            None => Ok(rep),
            Some(built) => {
                if built.coeffs != rep.coeffs {
                    return Err(Error::Contract(
                        "listed coefficients do not match the declared construction".into(),
                    ));
                }
                Ok(built)
            }
        }
    }
}

fn key_value(field: &str, key: &str, line: usize) -> Result<usize> {
    field
        .strip_prefix(key)
        .and_then(|f| f.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(line, format!("expected {key}=<integer>")))
}

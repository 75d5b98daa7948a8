//! Dense complex linear algebra: Pauli strings, Bell vectors, the flip operator, partial
//! transposition and Hermitian spectra.
//!
//! Everything here is deliberately brute force. It is the oracle the exact lattice
//! machinery is checked against, so it never uses the lattice sign tables.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{parse_err, Error, Result};
use crate::lattice::{LatticeShape, LatticeSite, MultiIndex};
use crate::scalar::Real;

pub type CMatrix<R> = DMatrix<Complex<R>>;
pub type CVector<R> = DVector<Complex<R>>;

/// Largest `N` handled by dense routines unless a caller raises the cap.
pub const DEFAULT_DENSE_CAP: usize = 5;

pub fn check_dense_cap(qubits: usize, cap: usize) -> Result<()> {
    if qubits > cap {
        Err(Error::DenseCap { n: qubits, cap })
    } else {
        Ok(())
    }
}

fn c<R: Real>(re: f64, im: f64) -> Complex<R> {
    Complex::new(<R as Real>::from_f64(re), <R as Real>::from_f64(im))
}

/// `i^e`.
pub fn i_pow<R: Real>(e: u32) -> Complex<R> {
    match e % 4 {
        0 => c(1.0, 0.0),
        1 => c(0.0, 1.0),
        2 => c(-1.0, 0.0),
        _ => c(0.0, -1.0),
    }
}

/// Single-qubit Pauli matrix `sigma_a` (`sigma_0` is the identity).
pub fn pauli_matrix<R: Real>(a: u8) -> CMatrix<R> {
    let z = c::<R>(0.0, 0.0);
    let one = c::<R>(1.0, 0.0);
    let i = c::<R>(0.0, 1.0);
    let entries = match a {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, -i, i, z],
        3 => [one, z, z, -one],
        _ => panic!("Pauli label {a} outside 0..=3"),
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

pub fn kron<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> CMatrix<R> {
    a.kronecker(b)
}

/// `sigma_{w_1} (x) ... (x) sigma_{w_k}` built factor by factor, leftmost factor most
/// significant.
pub fn pauli_string<R: Real>(idx: &MultiIndex) -> CMatrix<R> {
    idx.values()
        .iter()
        .fold(CMatrix::<R>::identity(1, 1), |acc, &a| kron(&acc, &pauli_matrix(a)))
}

/// Bit/phase form of a Pauli string: `sigma |j> = i^{phase(j)} |j xor x_mask>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PauliString {
    qubits: usize,
    x_mask: usize,
    z_mask: usize,
    y_count: u32,
}

impl PauliString {
    pub fn from_labels(labels: &[u8]) -> Self {
        let qubits = labels.len();
        let (mut x_mask, mut z_mask, mut y_count) = (0usize, 0usize, 0u32);
        for (q, &a) in labels.iter().enumerate() {
            let bit = 1 << (qubits - 1 - q);
            match a {
                0 => {}
                1 => x_mask |= bit,
                2 => {
                    x_mask |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
                3 => z_mask |= bit,
                _ => panic!("Pauli label {a} outside 0..=3"),
            }
        }
        PauliString { qubits, x_mask, z_mask, y_count }
    }

    /// Pauli string of lattice site `index` of `shape`.
    pub fn for_site(shape: &LatticeShape, index: usize) -> Self {
        Self::from_labels(&shape.coords(index))
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn x_mask(&self) -> usize {
        self.x_mask
    }

    /// Exponent `e` with `<j xor x| sigma |j> = i^e`.
    #[inline]
    pub fn phase(&self, col: usize) -> u32 {
        self.y_count + 2 * (col & self.z_mask).count_ones()
    }

    /// Dense matrix from index arithmetic (independent of the Kronecker build).
    pub fn to_dense<R: Real>(&self) -> CMatrix<R> {
        let d = self.dim();
        let mut out = CMatrix::<R>::zeros(d, d);
        for col in 0..d {
            out[(col ^ self.x_mask, col)] = i_pow(self.phase(col));
        }
        out
    }

    pub fn apply<R: Real>(&self, v: &CVector<R>) -> CVector<R> {
        let mut out = CVector::<R>::zeros(v.len());
        for col in 0..v.len() {
            out[col ^ self.x_mask] = i_pow::<R>(self.phase(col)) * v[col];
        }
        out
    }

    /// `A X B` for Pauli strings `A = self`, `B = right`, in `O(d^2)`.
    pub fn sandwich<R: Real>(&self, x: &CMatrix<R>, right: &PauliString) -> CMatrix<R> {
        let d = self.dim();
        let mut out = CMatrix::<R>::zeros(d, d);
        for r in 0..d {
            let p = r ^ self.x_mask;
            let left = i_pow::<R>(self.phase(p));
            for col in 0..d {
                let q = col ^ right.x_mask;
                out[(r, col)] = left * x[(p, q)] * i_pow::<R>(right.phase(col));
            }
        }
        out
    }
}

/// `|Psi_+^d> = d^{-1/2} sum_j |j>|j>`.
pub fn psi_plus<R: Real>(d: usize) -> CVector<R> {
    let mut v = CVector::<R>::zeros(d * d);
    let amp = c::<R>(1.0 / (d as f64).sqrt(), 0.0);
    for j in 0..d {
        v[j * d + j] = amp;
    }
    v
}

/// `|psi_s> = (1 (x) sigma_s) |Psi_+^{2^N}>`.
pub fn bell_vector<R: Real>(shape: &LatticeShape, site: &LatticeSite) -> Result<CVector<R>> {
    let index = shape.index_of(site)?;
    Ok(bell_vector_index(shape, index))
}

pub fn bell_vector_index<R: Real>(shape: &LatticeShape, index: usize) -> CVector<R> {
    let d = shape.dim();
    let p = PauliString::for_site(shape, index);
    let scale = <R as Real>::from_f64(1.0 / (d as f64).sqrt());
    let mut v = CVector::<R>::zeros(d * d);
    for j in 0..d {
        v[j * d + (j ^ p.x_mask)] = i_pow::<R>(p.phase(j)) * scale;
    }
    v
}

/// `|v><w|`.
pub fn outer<R: Real>(v: &CVector<R>, w: &CVector<R>) -> CMatrix<R> {
    v * w.adjoint()
}

/// The swap `V |psi (x) phi> = |phi (x) psi>` on `C^d (x) C^d`.
pub fn flip_operator<R: Real>(d: usize) -> CMatrix<R> {
    assert!(d >= 2, "flip operator needs d >= 2");
    let mut v = CMatrix::<R>::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            v[(j * d + i, i * d + j)] = c(1.0, 0.0);
        }
    }
    v
}

/// Transposes the second tensor factor of an operator on `C^{dim_a} (x) C^{dim_b}`.
pub fn partial_transpose<R: Real>(m: &CMatrix<R>, dim_a: usize, dim_b: usize) -> Result<CMatrix<R>> {
    let n = dim_a * dim_b;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "partial transpose of a {}x{} matrix with factors {dim_a}x{dim_b}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMatrix::<R>::zeros(n, n);
    for i1 in 0..dim_a {
        for i2 in 0..dim_b {
            for j1 in 0..dim_a {
                for j2 in 0..dim_b {
                    out[(i1 * dim_b + j2, j1 * dim_b + i2)] = m[(i1 * dim_b + i2, j1 * dim_b + j2)];
                }
            }
        }
    }
    Ok(out)
}

/// Traces out the first factor.
pub fn partial_trace_first<R: Real>(m: &CMatrix<R>, dim_a: usize, dim_b: usize) -> Result<CMatrix<R>> {
    if m.nrows() != dim_a * dim_b || m.ncols() != dim_a * dim_b {
        return Err(Error::Dimension("partial trace: matrix does not match factors".into()));
    }
    let mut out = CMatrix::<R>::zeros(dim_b, dim_b);
    for k in 0..dim_a {
        for i in 0..dim_b {
            for j in 0..dim_b {
                out[(i, j)] += m[(k * dim_b + i, k * dim_b + j)];
            }
        }
    }
    Ok(out)
}

/// `max |M - M^dagger|`.
pub fn hermitian_deviation<R: Real>(m: &CMatrix<R>) -> R {
    let mut worst = R::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let diff = (m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt();
            if diff > worst {
                worst = diff;
            }
        }
    }
    worst
}

fn check_hermitian<R: Real>(m: &CMatrix<R>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let dev = hermitian_deviation(m);
    let scale = R::one().max(m.iter().map(|z| z.norm_sqr().sqrt()).fold(R::zero(), |a, b| a.max(b)));
    if dev > R::hermitian_tol() * scale {
        return Err(Error::Contract(format!("matrix is not Hermitian (deviation {dev})")));
    }
    Ok(())
}

/// Real eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues<R: Real>(m: &CMatrix<R>) -> Result<Vec<R>> {
    check_hermitian(m)?;
    let mut vals: Vec<R> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
    Ok(vals)
}

/// Eigenvalues (ascending) with matching unit eigenvectors as columns.
pub fn hermitian_eigen<R: Real>(m: &CMatrix<R>) -> Result<(Vec<R>, CMatrix<R>)> {
    check_hermitian(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("NaN eigenvalue"));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::<R>::from_fn(m.nrows(), order.len(), |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((vals, vecs))
}

pub fn min_eigenvalue<R: Real>(m: &CMatrix<R>) -> Result<R> {
    Ok(hermitian_eigenvalues(m)?[0])
}

/// Positive semidefinite up to `-tol`.
pub fn is_psd<R: Real>(m: &CMatrix<R>, tol: R) -> Result<bool> {
    Ok(min_eigenvalue(m)? >= -tol)
}

/// Hilbert-Schmidt product `Tr(A^dagger B)`.
pub fn hs_inner<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> Result<Complex<R>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "Hilbert-Schmidt product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).fold(Complex::new(R::zero(), R::zero()), |acc, (x, y)| acc + x.conj() * y))
}

/// `Tr(A B)` without forming the product.
pub fn trace_of_product<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> Result<Complex<R>> {
    if a.ncols() != b.nrows() || a.nrows() != b.ncols() {
        return Err(Error::Dimension("trace of product: incompatible shapes".into()));
    }
    let mut acc = Complex::new(R::zero(), R::zero());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    Ok(acc)
}

/// Writes `dims r c` followed by one `re im` line per entry in row-major order,
/// 17 significant digits.
pub fn matrix_to_text(m: &CMatrix<f64>) -> String {
    let mut out = format!("dims {} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push_str(&format!("{:.16e} {:.16e}\n", z.re, z.im));
        }
    }
    out
}

pub fn matrix_from_text(text: &str) -> Result<CMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty matrix text"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "dims" {
        return Err(parse_err(ln, "expected header `dims r c`"));
    }
    let rows: usize = parts[1].parse().map_err(|_| parse_err(ln, "bad row count"))?;
    let cols: usize = parts[2].parse().map_err(|_| parse_err(ln, "bad column count"))?;
    let mut entries = Vec::with_capacity(rows * cols);
    for (ln, line) in lines {
        let mut it = line.split_whitespace();
        let re: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad real part"))?;
        let im: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad imaginary part"))?;
        if it.next().is_some() {
            return Err(parse_err(ln, "trailing tokens"));
        }
        entries.push(Complex::new(re, im));
    }
    if entries.len() != rows * cols {
        return Err(parse_err(
            0,
            format!("expected {} entries, found {}", rows * cols, entries.len()),
        ));
    }
    Ok(CMatrix::from_row_slice(rows, cols, &entries))
}

/// Haar-random unit vector (normalized complex Gaussian).
pub fn random_state<G: Rng + ?Sized>(rng: &mut G, dim: usize) -> CVector<f64> {
    let v = CVector::<f64>::from_fn(dim, |_, _| {
        Complex::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let norm = v.norm();
    v / Complex::new(norm, 0.0)
}

/// Complex Ginibre matrix.
pub fn random_matrix<G: Rng + ?Sized>(rng: &mut G, rows: usize, cols: usize) -> CMatrix<f64> {
    CMatrix::<f64>::from_fn(rows, cols, |_, _| {
        Complex::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_hermitian<G: Rng + ?Sized>(rng: &mut G, dim: usize) -> CMatrix<f64> {
    let a = random_matrix(rng, dim, dim);
    (&a + a.adjoint()) * Complex::new(0.5, 0.0)
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with the phase fix.
pub fn random_unitary<G: Rng + ?Sized>(rng: &mut G, dim: usize) -> CMatrix<f64> {
    let qr = random_matrix(rng, dim, dim).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

/// Largest absolute entry difference.
pub fn max_abs_diff<R: Real>(a: &CMatrix<R>, b: &CMatrix<R>) -> R {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr().sqrt())
        .fold(R::zero(), |acc, v| acc.max(v))
}

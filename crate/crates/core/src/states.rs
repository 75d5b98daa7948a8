//! Lattice states `rho = sum_s pi_s |psi_s><psi_s|` with rational weights, their exact
//! partial-transpose spectra, and the equidistributed constructions `I_C` and `I_BE`.

use std::fmt::{self, Write as _};

use num_complex::Complex;
use num_traits::Zero;

use crate::dense::{self, check_dense_cap, PauliString, DEFAULT_DENSE_CAP};
use crate::error::{parse_err, Error, Result};
use crate::lattice::{parse_site_text, tilde_site, word_permutation, LatticeShape, MultiIndex, SymmetryOp};
use crate::{ComplexMatrix, Rational};

/// Subset of the lattice `L`, stored as a bitset over site indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SiteSet {
    shape: LatticeShape,
    bits: Vec<u64>,
}

impl SiteSet {
    pub fn empty(shape: LatticeShape) -> Self {
        SiteSet { shape, bits: vec![0; shape.size().div_ceil(64)] }
    }

    pub fn full(shape: LatticeShape) -> Self {
        Self::from_sites(shape, 0..shape.size()).expect("indices in range")
    }

    pub fn from_sites(shape: LatticeShape, sites: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut set = Self::empty(shape);
        for s in sites {
            set.insert(s)?;
        }
        Ok(set)
    }

    /// Bit `s` of `mask` selects site `s`; needs `4^N <= 64`.
    pub fn from_mask(shape: LatticeShape, mask: u64) -> Result<Self> {
        if shape.size() > 64 {
            return Err(Error::Shape(format!("a 64-bit mask cannot address {} sites", shape.size())));
        }
        if shape.size() < 64 && mask >> shape.size() != 0 {
            return Err(Error::Shape(format!("mask {mask:#x} has bits beyond {} sites", shape.size())));
        }
        let mut set = Self::empty(shape);
        set.bits[0] = mask;
        Ok(set)
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn insert(&mut self, site: usize) -> Result<bool> {
        if site >= self.shape.size() {
            return Err(Error::Shape(format!("site index {site} outside the lattice")));
        }
        let (w, b) = (site / 64, site % 64);
        let fresh = self.bits[w] & (1 << b) == 0;
        self.bits[w] |= 1 << b;
        Ok(fresh)
    }

    #[inline]
    pub fn contains(&self, site: usize) -> bool {
        site < self.shape.size() && self.bits[site / 64] & (1 << (site % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Members in increasing site order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.shape.size()).filter(move |&s| self.contains(s))
    }

    /// Sorted `alpha|beta` labels.
    pub fn labels(&self) -> Vec<String> {
        self.iter().map(|s| self.shape.site_label(s)).collect()
    }

    /// Image under a word of symmetries (left to right).
    pub fn apply_symmetry(&self, word: &[SymmetryOp]) -> Result<SiteSet> {
        let perm = word_permutation(&self.shape, word)?;
        SiteSet::from_sites(self.shape, self.iter().map(|s| perm[s]))
    }

    /// Parses a whitespace- or semicolon-separated list of site labels.
    pub fn parse(shape: LatticeShape, text: &str) -> Result<SiteSet> {
        let mut set = SiteSet::empty(shape);
        for tok in text.split(|c: char| c.is_whitespace() || c == ';').filter(|t| !t.is_empty()) {
            let site = shape.parse_site(tok)?;
            set.insert(shape.index_of(&site)?)?;
        }
        Ok(set)
    }
}

impl fmt::Display for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels().join(" "))
    }
}

/// `I_C`: every coordinate non-zero. `3^N` sites.
pub fn build_ic(shape: LatticeShape) -> SiteSet {
    let q = shape.qubits();
    SiteSet::from_sites(shape, (0..shape.size()).filter(|&s| (0..q).all(|c| shape.coord(s, c) != 0)))
        .expect("indices in range")
}

/// `I_BE(beta0) = I_C + {(0_m, beta0)}`.
pub fn build_ibe(shape: LatticeShape, beta0: &MultiIndex) -> Result<SiteSet> {
    if beta0.arity() != shape.n() {
        return Err(Error::Shape(format!("beta0 = {beta0} must have arity n = {}", shape.n())));
    }
    if beta0.is_zero() {
        return Err(Error::Contract("beta0 must differ from the null vector".into()));
    }
    let mut set = build_ic(shape);
    set.insert(shape.zero_alpha_site(beta0)?)?;
    Ok(set)
}

/// `I(c)`: sites differing from `center` in every coordinate.
pub fn build_complement_set(shape: LatticeShape, center: usize) -> Result<SiteSet> {
    if center >= shape.size() {
        return Err(Error::Shape(format!("site index {center} outside the lattice")));
    }
    let q = shape.qubits();
    Ok(SiteSet::from_sites(
        shape,
        (0..shape.size()).filter(|&s| (0..q).all(|c| shape.coord(s, c) != shape.coord(center, c))),
    )
    .expect("indices in range"))
}

/// Bell-diagonal state with `pi_s = weights[s] / denom`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeState {
    shape: LatticeShape,
    weights: Vec<u64>,
    denom: u64,
}

impl LatticeState {
    pub fn from_weights(shape: LatticeShape, weights: Vec<i64>, denom: i64) -> Result<Self> {
        if weights.len() != shape.size() {
            return Err(Error::Dimension(format!(
                "{} weights for a lattice of {} sites",
                weights.len(),
                shape.size()
            )));
        }
        if denom <= 0 {
            return Err(Error::State(format!("denominator {denom} is not positive")));
        }
        if let Some((s, w)) = weights.iter().enumerate().find(|(_, w)| **w < 0) {
            return Err(Error::State(format!("site {} has negative weight {w}", shape.site_label(s))));
        }
        let total: i64 = weights.iter().sum();
        if total != denom {
            return Err(Error::State(format!("weights sum to {total}, not to the denominator {denom}")));
        }
        Ok(LatticeState {
            shape,
            weights: weights.into_iter().map(|w| w as u64).collect(),
            denom: denom as u64,
        })
    }

    /// Equidistributed state `rho_I = (1/N_I) sum_{s in I} P_s`.
    pub fn from_set(set: &SiteSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::State("an equidistributed state needs a non-empty site set".into()));
        }
        let shape = set.shape();
        let weights = (0..shape.size()).map(|s| set.contains(s) as u64).collect();
        Ok(LatticeState { shape, weights, denom: set.len() as u64 })
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn probability(&self, site: usize) -> Rational {
        Rational::new(self.weights[site] as i64, self.denom as i64)
    }

    pub fn support(&self) -> SiteSet {
        SiteSet::from_sites(self.shape, (0..self.shape.size()).filter(|&s| self.weights[s] != 0))
            .expect("indices in range")
    }

    /// Every non-zero weight is 1 and `denom = |support|`.
    pub fn is_els(&self) -> bool {
        self.weights.iter().all(|&w| w <= 1) && self.denom as usize == self.support().len()
    }

    /// Image under a word of symmetries: `pi'_{T s} = pi_s`.
    pub fn apply_symmetry(&self, word: &[SymmetryOp]) -> Result<LatticeState> {
        let perm = word_permutation(&self.shape, word)?;
        let mut weights = vec![0; self.weights.len()];
        for (s, &w) in self.weights.iter().enumerate() {
            weights[perm[s]] = w;
        }
        Ok(LatticeState { shape: self.shape, weights, denom: self.denom })
    }

    pub fn materialize_dense(&self) -> Result<ComplexMatrix> {
        self.materialize_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    /// `sum_s pi_s |psi_s><psi_s|` as a `4^N x 4^N` matrix.
    pub fn materialize_dense_with_cap(&self, cap: usize) -> Result<ComplexMatrix> {
        let shape = self.shape;
        check_dense_cap(shape.qubits(), cap)?;
        let d = shape.dim();
        let mut rho = ComplexMatrix::zeros(d * d, d * d);
        for (s, &w) in self.weights.iter().enumerate() {
            if w == 0 {
                continue;
            }
            // |psi_s> has entries i^phase(j)/sqrt(d) at j*d + (j ^ x)
            let p = PauliString::for_site(&shape, s);
            let scale = w as f64 / self.denom as f64 / d as f64;
            let support: Vec<(usize, Complex<f64>)> =
                (0..d).map(|j| (j * d + (j ^ p.x_mask()), dense::i_pow::<f64>(p.phase(j)))).collect();
            for &(r, a) in &support {
                for &(c, b) in &support {
                    rho[(r, c)] += a * b.conj() * scale;
                }
            }
        }
        Ok(rho)
    }

    /// Text form: `lattice-state m=<m> n=<n> denom=<d>` then `<site> <weight>` for every
    /// non-zero weight.
    pub fn to_text(&self) -> String {
        let mut out = format!("lattice-state m={} n={} denom={}\n", self.shape.m(), self.shape.n(), self.denom);
        for (s, &w) in self.weights.iter().enumerate() {
            if w != 0 {
                writeln!(out, "{} {w}", self.shape.site_label(s)).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty state file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "lattice-state" {
            return Err(parse_err(ln, "expected `lattice-state m=<m> n=<n> denom=<d>`"));
        }
        let value = |f: &str, key: &str| -> Result<i64> {
            f.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(ln, format!("expected {key}=<integer>")))
        };
        let m = value(fields[1], "m")?;
        let n = value(fields[2], "n")?;
        let denom = value(fields[3], "denom")?;
        if m < 1 || n < 1 {
            return Err(parse_err(ln, "m and n must be at least 1"));
        }
        let shape = LatticeShape::new(m as usize, n as usize)?;
        let mut weights = vec![0i64; shape.size()];
        let mut seen = SiteSet::empty(shape);
        for (ln, line) in lines {
            let mut it = line.split_whitespace();
            let (Some(label), Some(w), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err(ln, "expected `<site> <weight>`"));
            };
            let site = parse_site_text(label, ln)?;
            shape.check(&site).map_err(|e| parse_err(ln, e.to_string()))?;
            let idx = shape.index_of(&site)?;
            if !seen.insert(idx)? {
                return Err(parse_err(ln, format!("site {label} listed twice")));
            }
            weights[idx] = w.parse().map_err(|_| parse_err(ln, format!("bad weight {w:?}")))?;
        }
        LatticeState::from_weights(shape, weights, denom)
    }
}

/// `y = S^{(x)N} x` with the per-coordinate sign matrix `S = ones - 2 I`.
///
/// Exact for any ring; cost `O(N 4^N)`.
pub fn sign_transform<T>(shape: &LatticeShape, values: &[T]) -> Result<Vec<T>>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    if values.len() != shape.size() {
        return Err(Error::Dimension(format!(
            "{} values for a lattice of {} sites",
            values.len(),
            shape.size()
        )));
    }
    let mut v = values.to_vec();
    let q = shape.qubits();
    for c in 0..q {
        let stride = 1usize << (2 * (q - 1 - c));
        for base in 0..v.len() {
            if !(base / stride).is_multiple_of(4) {
                continue;
            }
            let x = [v[base], v[base + stride], v[base + 2 * stride], v[base + 3 * stride]];
            let total = x[0] + x[1] + x[2] + x[3];
            for (u, xu) in x.iter().enumerate() {
                v[base + u * stride] = total - *xu - *xu;
            }
        }
    }
    Ok(v)
}

/// `J_s = values[s] / denom` with `sum_s J_s = 2^N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JSpectrum {
    pub shape: LatticeShape,
    pub values: Vec<i64>,
    pub denom: i64,
}

impl JSpectrum {
    pub fn value(&self, site: usize) -> Rational {
        Rational::new(self.values[site], self.denom)
    }

    /// Eigenvalue of the partial transpose on `|psi_t><psi_t|`: `J_{tilde t} / 2^N`.
    pub fn pt_eigenvalue_at(&self, site: usize) -> Rational {
        self.value(tilde_site(&self.shape, site)) / Rational::from_integer(self.shape.dim() as i64)
    }

    /// Multiset of partial-transpose eigenvalues `J_s / 2^N`, ascending.
    pub fn pt_eigenvalues(&self) -> Vec<Rational> {
        let scale = Rational::from_integer(self.shape.dim() as i64);
        let mut v: Vec<Rational> = (0..self.values.len()).map(|s| self.value(s) / scale).collect();
        v.sort();
        v
    }

    pub fn sum(&self) -> Rational {
        Rational::new(self.values.iter().sum(), self.denom)
    }

    /// `(min J, first site attaining it)`.
    pub fn min(&self) -> (Rational, usize) {
        let (argmin, &v) = self
            .values
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .expect("non-empty lattice");
        (Rational::new(v, self.denom), argmin)
    }
}

pub fn j_spectrum(state: &LatticeState) -> JSpectrum {
    let w: Vec<i64> = state.weights.iter().map(|&w| w as i64).collect();
    JSpectrum {
        shape: state.shape,
        values: sign_transform(&state.shape, &w).expect("sized by construction"),
        denom: state.denom as i64,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PptReport {
    pub ppt: bool,
    pub j_min: Rational,
    pub argmin: usize,
}

/// `rho^Gamma >= 0` exactly: every `J_s >= 0`.
pub fn is_ppt(state: &LatticeState) -> PptReport {
    let (j_min, argmin) = j_spectrum(state).min();
    PptReport { ppt: j_min >= Rational::zero(), j_min, argmin }
}

/// Dense oracle: eigenvalues of the partial transpose (on the second factor), ascending.
pub fn dense_pt_eigenvalues(state: &LatticeState, cap: usize) -> Result<Vec<f64>> {
    let rho = state.materialize_dense_with_cap(cap)?;
    let d = state.shape.dim();
    dense::hermitian_eigenvalues(&dense::partial_transpose(&rho, d, d)?)
}

/// Brute-force `J_s = sum_{s'} pi_{s'} (-1)^{#matching coordinates}` in `O(16^N)`.
pub fn j_spectrum_brute_force(state: &LatticeState) -> Vec<Rational> {
    let shape = state.shape;
    (0..shape.size())
        .map(|s| {
            let mut acc = Rational::zero();
            for (t, &w) in state.weights.iter().enumerate() {
                if w != 0 {
                    let sign = if crate::lattice::match_count_index(&shape, s, t).is_multiple_of(2) { 1 } else { -1 };
                    acc += Rational::new(sign * w as i64, state.denom as i64);
                }
            }
            acc
        })
        .collect()
}

/// `card(L^a_s ∩ I)`: members of `set` sharing exactly `a` coordinates with `site`,
/// for `a = 0..=N`.
pub fn match_profile(set: &SiteSet, site: usize) -> Vec<usize> {
    let shape = set.shape();
    let mut counts = vec![0; shape.qubits() + 1];
    for t in set.iter() {
        counts[crate::lattice::match_count_index(&shape, site, t)] += 1;
    }
    counts
}

/// Closed form of [`match_profile`] for `I_C`: a test site with `k` zero coordinates
/// has `C(N-k, a) 2^{N-k-a} 3^k` partners in `L^a`.
pub fn ic_match_count(qubits: usize, zeros: usize, a: usize) -> usize {
    if a > qubits - zeros {
        return 0;
    }
    binomial(qubits - zeros, a) * (1 << (qubits - zeros - a)) * 3usize.pow(zeros as u32)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Symmetry word carrying a set `I(c) + {x}` onto `I_BE(beta0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelabelPlan {
    pub center: usize,
    pub extra: usize,
    pub word: Vec<SymmetryOp>,
    pub beta0: MultiIndex,
}

/// Recognizes `I(c) + {x}` (with `x` outside `I(c)` and `x != c`) and returns relabelings
/// `c_i <-> 0` followed by coordinate swaps that move `m` zero coordinates of the image
/// of `x` into the `alpha` block.
///
/// The image of `x` needs at least `m` zero coordinates; otherwise the set is reported
/// as not reducible.
pub fn relabel_to_ibe(set: &SiteSet) -> Result<RelabelPlan> {
    let shape = set.shape();
    let q = shape.qubits();
    if set.len() != 3usize.pow(q as u32) + 1 {
        return Err(Error::Contract(format!(
            "set has {} sites, an I(c) + {{x}} set has {}",
            set.len(),
            3usize.pow(q as u32) + 1
        )));
    }
    for extra in set.iter() {
        let mut center = Vec::with_capacity(q);
        for c in 0..q {
            let mut seen = [false; 4];
            for s in set.iter().filter(|&s| s != extra) {
                seen[shape.coord(s, c) as usize] = true;
            }
            if seen.iter().filter(|&&b| b).count() == 3 {
                center.push(seen.iter().position(|&b| !b).unwrap() as u8);
            } else {
                break;
            }
        }
        if center.len() != q {
            continue;
        }
        let c_idx = shape.index_from_coords(&center);
        let mut rest = build_complement_set(shape, c_idx)?;
        let outside = rest.insert(extra)?;
        if !outside || extra == c_idx {
            continue;
        }
        if &rest != set {
            continue;
        }
        let mut word: Vec<SymmetryOp> = Vec::new();
        for (coord, &ci) in center.iter().enumerate() {
            if ci != 0 {
                let mut perm = [0u8, 1, 2, 3];
                perm.swap(0, ci as usize);
                word.push(SymmetryOp::Relabel { coord, perm });
            }
        }
        let mut x: Vec<u8> = shape
            .coords(extra)
            .iter()
            .zip(&center)
            .map(|(&v, &ci)| if v == ci { 0 } else if v == 0 { ci } else { v })
            .collect();
        let zeros = x.iter().filter(|&&v| v == 0).count();
        if zeros < shape.m() {
            return Err(Error::Hypothesis(format!(
                "extra site has {zeros} coordinates matching the center; at least m = {} needed",
                shape.m()
            )));
        }
        for p in 0..shape.m() {
            if x[p] != 0 {
                let qpos = (shape.m()..q).find(|&j| x[j] == 0).expect("enough zeros counted");
                word.push(SymmetryOp::Swap { i: p, j: qpos });
                x.swap(p, qpos);
            }
        }
        let beta0 = MultiIndex::new(x[shape.m()..].to_vec())?;
        return Ok(RelabelPlan { center: c_idx, extra, word, beta0 });
    }
    Err(Error::Contract("set is not of the form I(c) + {x}".into()))
}

/// All sets `I(c) + {x}` with `x` outside `I(c)` and `x != c`, in (center, extra) order.
pub fn closing_note_sets(shape: LatticeShape) -> Vec<(usize, usize, SiteSet)> {
    let mut out = Vec::new();
    for c in 0..shape.size() {
        let base = build_complement_set(shape, c).expect("index in range");
        for x in 0..shape.size() {
            if x != c && !base.contains(x) {
                let mut set = base.clone();
                set.insert(x).expect("index in range");
                out.push((c, x, set));
            }
        }
    }
    out
}

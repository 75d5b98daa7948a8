//! The index lattice `L = L^(m) x L^(n)`: multi-indices, site ordering, the sign tables
//! of the Bell-basis spectral decomposition, and the elementary lattice symmetries.
//!
//! Sites are enumerated base-4 big-endian with `alpha_1` the most significant digit and
//! `beta_n` the least significant one. The same order fixes the Kronecker factor order in
//! [`crate::dense`], so site index `s` is the Pauli string `sigma_s` with coordinate 0 as
//! the leftmost tensor factor.

use std::fmt;

use crate::error::{parse_err, Error, Result};

/// A vector of Pauli labels, each in `{0,1,2,3}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("multi-index must have positive arity".into()));
        }
        if let Some(&v) = values.iter().find(|&&v| v > 3) {
            return Err(Error::IndexValue(v));
        }
        Ok(MultiIndex(values))
    }

    pub fn zeros(arity: usize) -> Self {
        MultiIndex(vec![0; arity])
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    /// Base-4 big-endian value.
    pub fn to_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &v| acc * 4 + v as usize)
    }

    pub fn from_index(index: usize, arity: usize) -> Self {
        let mut values = vec![0u8; arity];
        let mut rest = index;
        for slot in values.iter_mut().rev() {
            *slot = (rest % 4) as u8;
            rest /= 4;
        }
        MultiIndex(values)
    }

    /// All multi-indices of the given arity in index order.
    pub fn all(arity: usize) -> impl Iterator<Item = MultiIndex> {
        (0..1usize << (2 * arity)).map(move |i| MultiIndex::from_index(i, arity))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_digits(f, &self.0)
    }
}

impl std::str::FromStr for MultiIndex {
    type Err = Error;

    /// Comma-separated digits, e.g. `1,3`.
    fn from_str(s: &str) -> Result<Self> {
        MultiIndex::new(parse_digits(s, 0)?)
    }
}

fn write_digits(f: &mut fmt::Formatter<'_>, digits: &[u8]) -> fmt::Result {
    for (i, d) in digits.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{d}")?;
    }
    Ok(())
}

fn parse_digits(s: &str, line: usize) -> Result<Vec<u8>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            match tok.parse::<u8>() {
                Ok(v) if v <= 3 => Ok(v),
                Ok(v) => Err(Error::IndexValue(v)),
                Err(_) => Err(parse_err(line, format!("bad lattice digit {tok:?}"))),
            }
        })
        .collect()
}

/// Split `N = m + n` of the qubits; the local dimension is `d = 2^N` and `|L| = 4^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeShape {
    m: usize,
    n: usize,
}

/// Sites are addressed with `usize` and bitsets; this keeps `4^N` well inside that range.
pub const MAX_QUBITS: usize = 12;

impl LatticeShape {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Shape(format!("m and n must be positive (got m={m}, n={n})")));
        }
        if m + n > MAX_QUBITS {
            return Err(Error::Shape(format!(
                "N = {} exceeds the supported maximum {MAX_QUBITS}",
                m + n
            )));
        }
        Ok(LatticeShape { m, n })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of coordinates `N = m + n`.
    pub fn qubits(&self) -> usize {
        self.m + self.n
    }

    /// Local dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.qubits()
    }

    /// `4^N`.
    pub fn size(&self) -> usize {
        1 << (2 * self.qubits())
    }

    pub fn index_of(&self, site: &LatticeSite) -> Result<usize> {
        self.check(site)?;
        Ok(site.alpha.to_index() * (1 << (2 * self.n)) + site.beta.to_index())
    }

    pub fn site_at(&self, index: usize) -> Result<LatticeSite> {
        if index >= self.size() {
            return Err(Error::Shape(format!(
                "site index {index} outside [0, {})",
                self.size()
            )));
        }
        let low = 1 << (2 * self.n);
        Ok(LatticeSite {
            alpha: MultiIndex::from_index(index / low, self.m),
            beta: MultiIndex::from_index(index % low, self.n),
        })
    }

    pub fn check(&self, site: &LatticeSite) -> Result<()> {
        if site.alpha.arity() != self.m || site.beta.arity() != self.n {
            return Err(Error::Shape(format!(
                "site {site} has arities ({}, {}), shape wants ({}, {})",
                site.alpha.arity(),
                site.beta.arity(),
                self.m,
                self.n
            )));
        }
        Ok(())
    }

    /// Digit of site `index` at coordinate `c` (coordinate 0 is `alpha_1`).
    #[inline]
    pub fn coord(&self, index: usize, c: usize) -> u8 {
        ((index >> (2 * (self.qubits() - 1 - c))) & 3) as u8
    }

    /// All coordinates of a site index, most significant first.
    pub fn coords(&self, index: usize) -> Vec<u8> {
        (0..self.qubits()).map(|c| self.coord(index, c)).collect()
    }

    pub fn index_from_coords(&self, coords: &[u8]) -> usize {
        coords.iter().fold(0, |acc, &v| acc * 4 + v as usize)
    }

    /// Site index of `(0_m, beta)`.
    pub fn zero_alpha_site(&self, beta: &MultiIndex) -> Result<usize> {
        self.index_of(&LatticeSite::new(MultiIndex::zeros(self.m), beta.clone()))
    }

    pub fn parse_site(&self, s: &str) -> Result<LatticeSite> {
        let site = parse_site_text(s, 0)?;
        self.check(&site)?;
        Ok(site)
    }

    /// Site index to its text form, e.g. `1,2|3`.
    pub fn site_label(&self, index: usize) -> String {
        self.site_at(index)
            .map(|s| s.to_string())
            .unwrap_or_else(|_| format!("#{index}"))
    }
}

impl fmt::Display for LatticeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={} n={}", self.m, self.n)
    }
}

/// A point `(alpha, beta)` of the lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeSite {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
}

impl LatticeSite {
    pub fn new(alpha: MultiIndex, beta: MultiIndex) -> Self {
        LatticeSite { alpha, beta }
    }

    pub fn coords(&self) -> Vec<u8> {
        let mut out = self.alpha.values().to_vec();
        out.extend_from_slice(self.beta.values());
        out
    }

    /// Rebuilds a site with the arities of `shape` from a flat coordinate list.
    pub fn from_coords(shape: &LatticeShape, coords: &[u8]) -> Result<Self> {
        if coords.len() != shape.qubits() {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                shape.qubits(),
                coords.len()
            )));
        }
        Ok(LatticeSite {
            alpha: MultiIndex::new(coords[..shape.m()].to_vec())?,
            beta: MultiIndex::new(coords[shape.m()..].to_vec())?,
        })
    }
}

impl fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_digits(f, self.alpha.values())?;
        f.write_str("|")?;
        write_digits(f, self.beta.values())
    }
}

pub(crate) fn parse_site_text(s: &str, line: usize) -> Result<LatticeSite> {
    let (a, b) = s
        .trim()
        .split_once('|')
        .ok_or_else(|| parse_err(line, format!("site {s:?} lacks the '|' separator")))?;
    Ok(LatticeSite {
        alpha: MultiIndex::new(parse_digits(a, line)?)?,
        beta: MultiIndex::new(parse_digits(b, line)?)?,
    })
}

fn check_value(v: u8) {
    assert!(v <= 3, "lattice value {v} outside 0..=3");
}

/// `epsilon_a = (-1)^{delta_{a,2}}`: the sign picked up by `sigma_a` under transposition.
pub fn epsilon(a: u8) -> i8 {
    check_value(a);
    if a == 2 {
        -1
    } else {
        1
    }
}

/// `eta_{ag} = -1` exactly when `sigma_a` and `sigma_g` anticommute.
pub fn eta(a: u8, g: u8) -> i8 {
    check_value(a);
    check_value(g);
    if a != 0 && g != 0 && a != g {
        -1
    } else {
        1
    }
}

/// `Xi_{ag} = (-1)^{delta_{|a-g|,2}}`, the eigenvalue sign of `V_a` on `P_g` for one qubit.
///
/// Panics if either argument is outside `0..=3`.
pub fn xi(a: u8, g: u8) -> i8 {
    check_value(a);
    check_value(g);
    if a.abs_diff(g) == 2 {
        -1
    } else {
        1
    }
}

/// `(mu + 2) mod 4`; an involution with `xi(a, g) = (-1)^{delta_{a, tilde(g)}}`.
pub fn tilde(mu: u8) -> u8 {
    check_value(mu);
    (mu + 2) % 4
}

/// Site-wise [`tilde`] on a site index.
pub fn tilde_site(shape: &LatticeShape, index: usize) -> usize {
    let coords: Vec<u8> = shape.coords(index).into_iter().map(tilde).collect();
    shape.index_from_coords(&coords)
}

/// Number of coordinates (out of `N`) on which two sites agree.
pub fn match_count(shape: &LatticeShape, s1: &LatticeSite, s2: &LatticeSite) -> Result<usize> {
    shape.check(s1)?;
    shape.check(s2)?;
    Ok(s1
        .coords()
        .iter()
        .zip(s2.coords())
        .filter(|(a, b)| **a == *b)
        .count())
}

/// [`match_count`] on site indices.
#[inline]
pub fn match_count_index(shape: &LatticeShape, i: usize, j: usize) -> usize {
    (0..shape.qubits())
        .filter(|&c| shape.coord(i, c) == shape.coord(j, c))
        .count()
}

/// Elementary lattice symmetry. Coordinates are 0-based, `0..N`, across the `alpha|beta`
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymmetryOp {
    /// Relabel the values of one coordinate by a permutation of `{0,1,2,3}`
    /// (`perm[v]` is the image of `v`); exchanges parallel hyperplanes.
    Relabel { coord: usize, perm: [u8; 4] },
    /// Exchange two coordinates.
    Swap { i: usize, j: usize },
}

impl SymmetryOp {
    pub fn validate(&self, shape: &LatticeShape) -> Result<()> {
        let n = shape.qubits();
        match *self {
            SymmetryOp::Relabel { coord, perm } => {
                if coord >= n {
                    return Err(Error::Shape(format!("coordinate {coord} out of range 0..{n}")));
                }
                let mut seen = [false; 4];
                for &v in &perm {
                    if v > 3 || seen[v as usize] {
                        return Err(Error::Contract(format!("{perm:?} is not a permutation of 0..=3")));
                    }
                    seen[v as usize] = true;
                }
            }
            SymmetryOp::Swap { i, j } => {
                if i >= n || j >= n {
                    return Err(Error::Shape(format!(
                        "swap ({i}, {j}) has a coordinate out of range 0..{n}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn inverse(&self) -> SymmetryOp {
        match *self {
            SymmetryOp::Relabel { coord, perm } => {
                let mut inv = [0u8; 4];
                for (v, &p) in perm.iter().enumerate() {
                    inv[p as usize] = v as u8;
                }
                SymmetryOp::Relabel { coord, perm: inv }
            }
            swap @ SymmetryOp::Swap { .. } => swap,
        }
    }

    fn apply_coords(&self, coords: &mut [u8]) {
        match *self {
            SymmetryOp::Relabel { coord, perm } => coords[coord] = perm[coords[coord] as usize],
            SymmetryOp::Swap { i, j } => coords.swap(i, j),
        }
    }

    /// The induced permutation of site indices: entry `s` is the image of site `s`.
    pub fn site_permutation(&self, shape: &LatticeShape) -> Result<Vec<usize>> {
        self.validate(shape)?;
        Ok((0..shape.size())
            .map(|s| {
                let mut c = shape.coords(s);
                self.apply_coords(&mut c);
                shape.index_from_coords(&c)
            })
            .collect())
    }
}

pub fn apply_symmetry(
    shape: &LatticeShape,
    op: &SymmetryOp,
    site: &LatticeSite,
) -> Result<LatticeSite> {
    shape.check(site)?;
    op.validate(shape)?;
    let mut coords = site.coords();
    op.apply_coords(&mut coords);
    LatticeSite::from_coords(shape, &coords)
}

/// Composes a word of symmetries (applied left to right) into one site permutation.
pub fn word_permutation(shape: &LatticeShape, word: &[SymmetryOp]) -> Result<Vec<usize>> {
    let mut perm: Vec<usize> = (0..shape.size()).collect();
    for op in word {
        let p = op.site_permutation(shape)?;
        for slot in perm.iter_mut() {
            *slot = p[*slot];
        }
    }
    Ok(perm)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_op(n: usize) -> impl Strategy<Value = SymmetryOp> {
        prop_oneof![
            (0..n, Just([0u8, 1, 2, 3]).prop_shuffle()).prop_map(|(coord, perm)| {
                let mut p = [0u8; 4];
                p.copy_from_slice(&perm);
                SymmetryOp::Relabel { coord, perm: p }
            }),
            (0..n, 0..n).prop_map(|(i, j)| SymmetryOp::Swap { i, j }),
        ]
    }

    proptest! {
        #[test]
        fn symmetries_are_invertible_and_preserve_matches(
            (m, n) in (1usize..=3, 1usize..=2),
            seed_a in any::<u32>(),
            seed_b in any::<u32>(),
            op_seed in 0usize..1000,
        ) {
            let shape = LatticeShape::new(m, n).unwrap();
            let a = seed_a as usize % shape.size();
            let b = seed_b as usize % shape.size();
            let ops: Vec<SymmetryOp> = {
                let nq = shape.qubits();
                let perm_list = [[1u8, 0, 2, 3], [0, 2, 1, 3], [3, 1, 2, 0], [2, 3, 0, 1], [1, 2, 3, 0]];
                vec![
                    SymmetryOp::Relabel { coord: op_seed % nq, perm: perm_list[op_seed % perm_list.len()] },
                    SymmetryOp::Swap { i: op_seed % nq, j: (op_seed / 7) % nq },
                ]
            };
            for op in ops {
                let perm = op.site_permutation(&shape).unwrap();
                let inv = op.inverse().site_permutation(&shape).unwrap();
                prop_assert_eq!(inv[perm[a]], a);
                prop_assert_eq!(match_count_index(&shape, perm[a], perm[b]), match_count_index(&shape, a, b));
            }
        }

        #[test]
        fn random_ops_preserve_match_count(op in arb_op(3), a in 0usize..64, b in 0usize..64) {
            let shape = LatticeShape::new(2, 1).unwrap();
            let sa = shape.site_at(a).unwrap();
            let sb = shape.site_at(b).unwrap();
            let ta = apply_symmetry(&shape, &op, &sa).unwrap();
            let tb = apply_symmetry(&shape, &op, &sb).unwrap();
            prop_assert_eq!(match_count(&shape, &ta, &tb).unwrap(), match_count(&shape, &sa, &sb).unwrap());
            prop_assert_eq!(apply_symmetry(&shape, &op.inverse(), &ta).unwrap(), sa);
        }
    }
}

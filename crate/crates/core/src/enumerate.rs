//! Enumeration of equidistributed lattice states with their exact PPT status and
//! `Lambda_{beta0}` witness.
//!
//! Exhaustive mode walks all non-empty subsets of `L` in Gray-code order, updating the
//! J-spectrum by one signed column per step. It is limited to `4^N <= 16`. Random mode
//! draws subsets from a seeded stream per sample index, so output does not depend on the
//! worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{match_count_index, LatticeShape, MultiIndex, SymmetryOp};
use crate::maps::lambda_beta0;
use crate::states::{sign_transform, SiteSet};
use crate::Rational;

pub const EXHAUSTIVE_MAX_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exhaustive,
    Random { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerateOptions {
    pub mode: Mode,
    /// One record per orbit of the elementary symmetries (exhaustive mode only).
    pub symmetry_reduction: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions { mode: Mode::Exhaustive, symmetry_reduction: false, workers: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumRecord {
    pub set: SiteSet,
    pub ppt: bool,
    pub j_min: Rational,
    /// Smallest `Lambda_{beta0}` witness over `beta0 != 0`; absent when `m < n`.
    pub witness: Option<Rational>,
    /// First `beta0` attaining [`EnumRecord::witness`].
    pub witness_beta0: Option<MultiIndex>,
    pub orbit_size: Option<usize>,
}

/// Integer `Lambda_{beta0}` coefficients for each admissible `beta0`.
fn witness_tables(shape: &LatticeShape) -> Result<Vec<(MultiIndex, Vec<i64>)>> {
    if shape.m() < shape.n() {
        return Ok(Vec::new());
    }
    MultiIndex::all(shape.n())
        .filter(|b| !b.is_zero())
        .map(|b| {
            let rep = lambda_beta0::<Rational>(*shape, &b)?;
            let lam = rep
                .diagonal_coeffs()
                .expect("diagonal by construction")
                .iter()
                .map(|v| v.to_integer())
                .collect();
            Ok((b, lam))
        })
        .collect()
}

struct Evaluator {
    shape: LatticeShape,
    tables: Vec<(MultiIndex, Vec<i64>)>,
}

impl Evaluator {
    fn record(&self, set: SiteSet, j: &[i64], wsums: &[i64]) -> EnumRecord {
        let size = set.len() as i64;
        let j_min = *j.iter().min().expect("non-empty lattice");
        let best = wsums.iter().enumerate().min_by_key(|(_, w)| **w);
        let scale = self.shape.dim() as i64 * size;
        EnumRecord {
            ppt: j_min >= 0,
            j_min: Rational::new(j_min, size),
            witness: best.map(|(_, &w)| Rational::new(w, scale)),
            witness_beta0: best.map(|(k, _)| self.tables[k].0.clone()),
            orbit_size: None,
            set,
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Enumerates equidistributed lattice states. Records come in increasing bitmask order
/// (exhaustive) or sample order (random).
pub fn enumerate_ppt_els(shape: LatticeShape, opts: &EnumerateOptions) -> Result<Vec<EnumRecord>> {
    let eval = Evaluator { shape, tables: witness_tables(&shape)? };
    match opts.mode {
        Mode::Exhaustive => {
            if shape.size() > EXHAUSTIVE_MAX_SITES {
                return Err(Error::Contract(format!(
                    "exhaustive enumeration needs 4^N <= {EXHAUSTIVE_MAX_SITES} (got {} sites); use random sampling",
                    shape.size()
                )));
            }
            let mut records = with_pool(opts.workers, || exhaustive(&eval))?;
            if opts.symmetry_reduction {
                let (rep, sizes) = orbits(&shape)?;
                records.retain_mut(|r| {
                    let mask = mask_of(&r.set);
                    r.orbit_size = Some(sizes[mask as usize]);
                    rep[mask as usize] == mask
                });
            }
            Ok(records)
        }
        Mode::Random { samples, seed } => {
            if opts.symmetry_reduction {
                return Err(Error::Contract("symmetry reduction is only available in exhaustive mode".into()));
            }
            with_pool(opts.workers, || {
                (0..samples)
                    .into_par_iter()
                    .map(|i| random_record(&eval, seed, i as u64))
                    .collect()
            })
        }
    }
}

fn mask_of(set: &SiteSet) -> u64 {
    set.iter().fold(0, |m, s| m | 1 << s)
}

/// Non-empty subset drawn for sample `index`: each site kept with probability 1/2.
pub fn random_subset(shape: LatticeShape, seed: u64, index: u64) -> SiteSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let set = SiteSet::from_sites(shape, (0..shape.size()).filter(|_| rng.gen::<bool>()))
            .expect("indices in range");
        if !set.is_empty() {
            return set;
        }
    }
}

fn random_record(eval: &Evaluator, seed: u64, index: u64) -> EnumRecord {
    let set = random_subset(eval.shape, seed, index);
    let w: Vec<i64> = (0..eval.shape.size()).map(|s| set.contains(s) as i64).collect();
    let j = sign_transform(&eval.shape, &w).expect("sized by construction");
    let wsums: Vec<i64> = eval
        .tables
        .iter()
        .map(|(_, lam)| set.iter().map(|s| lam[s]).sum())
        .collect();
    eval.record(set, &j, &wsums)
}

fn exhaustive(eval: &Evaluator) -> Vec<EnumRecord> {
    let shape = eval.shape;
    let size = shape.size();
    // column s of S^{(x)N}: (-1)^{#matches(u, s)}
    let cols: Vec<Vec<i64>> = (0..size)
        .map(|s| {
            (0..size)
                .map(|u| if match_count_index(&shape, u, s).is_multiple_of(2) { 1 } else { -1 })
                .collect()
        })
        .collect();
    let total: u64 = 1 << size;
    let chunk = (total / 64).max(1);
    let starts: Vec<u64> = (0..total.div_ceil(chunk)).map(|c| c * chunk).collect();
    let mut out: Vec<(u64, EnumRecord)> = starts
        .into_par_iter()
        .flat_map_iter(|start| {
            let end = (start + chunk).min(total);
            let mut recs = Vec::with_capacity((end - start) as usize);
            let gray = |i: u64| i ^ (i >> 1);
            let mut mask = gray(start);
            let mut j = vec![0i64; size];
            let mut wsums = vec![0i64; eval.tables.len()];
            for s in (0..size).filter(|s| mask >> s & 1 == 1) {
                add_site(&mut j, &mut wsums, &cols[s], eval, s, 1);
            }
            for i in start..end {
                if i > start {
                    let s = i.trailing_zeros() as usize;
                    let sign = if mask >> s & 1 == 1 { -1 } else { 1 };
                    mask ^= 1 << s;
                    add_site(&mut j, &mut wsums, &cols[s], eval, s, sign);
                }
                if mask != 0 {
                    let set = SiteSet::from_mask(shape, mask).expect("mask within lattice");
                    recs.push((mask, eval.record(set, &j, &wsums)));
                }
            }
            recs
        })
        .collect();
    out.sort_by_key(|(mask, _)| *mask);
    out.into_iter().map(|(_, r)| r).collect()
}

fn add_site(j: &mut [i64], wsums: &mut [i64], col: &[i64], eval: &Evaluator, s: usize, sign: i64) {
    for (ju, c) in j.iter_mut().zip(col) {
        *ju += sign * c;
    }
    for (w, (_, lam)) in wsums.iter_mut().zip(&eval.tables) {
        *w += sign * lam[s];
    }
}

/// Generators of the symmetry group: adjacent value transpositions at each coordinate
/// and adjacent coordinate swaps.
pub fn generators(shape: &LatticeShape) -> Vec<SymmetryOp> {
    let q = shape.qubits();
    let mut gens = Vec::new();
    for coord in 0..q {
        for v in 0..3 {
            let mut perm = [0u8, 1, 2, 3];
            perm.swap(v, v + 1);
            gens.push(SymmetryOp::Relabel { coord, perm });
        }
    }
    for c in 0..q.saturating_sub(1) {
        gens.push(SymmetryOp::Swap { i: c, j: c + 1 });
    }
    gens
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// For every mask: the smallest mask in its orbit, and the orbit size.
pub fn orbits(shape: &LatticeShape) -> Result<(Vec<u64>, Vec<usize>)> {
    let size = shape.size();
    if size > EXHAUSTIVE_MAX_SITES {
        return Err(Error::Contract("orbit tables need 4^N <= 16".into()));
    }
    let total = 1usize << size;
    let perms = generators(shape)
        .iter()
        .map(|g| g.site_permutation(shape))
        .collect::<Result<Vec<_>>>()?;
    let mut parent: Vec<u32> = (0..total as u32).collect();
    for mask in 0..total {
        for p in &perms {
            let image = (0..size).filter(|s| mask >> s & 1 == 1).fold(0usize, |m, s| m | 1 << p[s]);
            let (a, b) = (find(&mut parent, mask as u32), find(&mut parent, image as u32));
            if a != b {
                // keep the smaller root so every root is its orbit minimum
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi as usize] = lo;
            }
        }
    }
    let mut rep = vec![0u64; total];
    let mut count = vec![0usize; total];
    for mask in 0..total {
        let r = find(&mut parent, mask as u32) as usize;
        rep[mask] = r as u64;
        count[r] += 1;
    }
    let sizes = rep.iter().map(|&r| count[r as usize]).collect();
    Ok((rep, sizes))
}

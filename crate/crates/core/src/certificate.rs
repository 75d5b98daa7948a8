//! Bound-entanglement certificates.
//!
//! A certificate pairs a lattice state with a positive map built from a validated family.
//! If the state is PPT (`min J >= 0`, exact) and the map witness is negative (exact), the
//! state is entangled but PPT and the map is not decomposable. Dense routes re-derive both
//! numbers for `N <= 4`.

use std::fmt::Write as _;

use num_traits::Signed;

use crate::error::{parse_err, Error, Result};
use crate::lattice::{LatticeShape, MultiIndex};
use crate::maps::{self, lambda_beta0, tensor_sum_map, MapRep, Provenance, TensorSumSpec};
use crate::scalar::{fmt_rational, parse_rational};
use crate::states::{dense_pt_eigenvalues, is_ppt, LatticeState, SiteSet};
use crate::{Rational, TOOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// PPT and detected: bound entangled.
    Pptes,
    /// PPT, witness not negative.
    Inconclusive,
    /// Not PPT: free entanglement, no bound-entanglement claim.
    Npt,
    /// The map carries no positivity proof.
    Unsupported,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pptes => "PPTES",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Npt => "NPT",
            Verdict::Unsupported => "unsupported",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Verdict::Pptes => "PPT entangled state; the map is not decomposable",
            Verdict::Inconclusive => "PPT, witness-inconclusive",
            Verdict::Npt => "NPT (free entanglement), no bound-entanglement claim",
            Verdict::Unsupported => "map is not positive by construction; refusing to certify",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Verdict::Pptes, Verdict::Inconclusive, Verdict::Npt, Verdict::Unsupported]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Largest `N` for which dense cross-checks run.
    pub dense_max_qubits: usize,
    /// Agreement required between dense and exact values.
    pub tolerance: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { dense_max_qubits: 4, tolerance: 1e-8 }
    }
}

/// Map as recorded in a certificate.
#[derive(Debug, Clone, PartialEq)]
pub enum MapDescription {
    LambdaBeta0(MultiIndex),
    TensorSum(TensorSumSpec<Rational>),
    /// Diagonal entries `c_ss` only; enough to recompute lattice witnesses.
    Unverified(Vec<Rational>),
}

impl MapDescription {
    pub fn of(rep: &MapRep<Rational>) -> Self {
        match rep.provenance() {
            Provenance::LambdaBeta0 { beta0 } => MapDescription::LambdaBeta0(beta0.clone()),
            Provenance::TensorSum(factors) => MapDescription::TensorSum(factors.clone()),
            Provenance::Unverified => {
                MapDescription::Unverified((0..rep.shape().size()).map(|s| rep.diagonal_entry(s)).collect())
            }
        }
    }

    /// Rebuilds the map; unverified maps come back diagonal.
    pub fn rebuild(&self, shape: LatticeShape) -> Result<MapRep<Rational>> {
        let rep = match self {
            MapDescription::LambdaBeta0(b) => lambda_beta0(shape, b)?,
            MapDescription::TensorSum(factors) => tensor_sum_map(factors)?,
            MapDescription::Unverified(diag) => MapRep::diagonal(shape, diag.clone())?,
        };
        if rep.shape() != shape {
            return Err(Error::Shape(format!("map shape {} differs from state shape {shape}", rep.shape())));
        }
        Ok(rep)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseChecks {
    pub min_pt_eigenvalue: f64,
    pub witness: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub tool_version: String,
    pub state: LatticeState,
    pub map: MapDescription,
    /// Where the map was read from, when it came from a file.
    pub map_source: Option<String>,
    pub j_min: Rational,
    pub argmin: usize,
    pub witness: Rational,
    pub dense: Option<DenseChecks>,
    pub verdict: Verdict,
}

/// Decides `(PPT, D < 0)` exactly and attaches dense cross-checks for small `N`.
pub fn certify_pptes(state: &LatticeState, rep: &MapRep<Rational>, opts: &CertifyOptions) -> Result<Certificate> {
    let shape = state.shape();
    if rep.shape() != shape {
        return Err(Error::Shape(format!("map shape {} differs from state shape {shape}", rep.shape())));
    }
    let ppt = is_ppt(state);
    let witness = maps::witness_lattice(rep, state)?;
    let verdict = if !rep.provenance().is_positive_by_construction() {
        Verdict::Unsupported
    } else if !ppt.ppt {
        Verdict::Npt
    } else if witness.is_negative() {
        Verdict::Pptes
    } else {
        Verdict::Inconclusive
    };
    let dense = if shape.qubits() <= opts.dense_max_qubits {
        Some(dense_checks(state, rep, &ppt.j_min, &witness, opts.tolerance)?)
    } else {
        None
    };
    Ok(Certificate {
        tool_version: TOOL_VERSION.to_string(),
        state: state.clone(),
        map: MapDescription::of(rep),
        map_source: None,
        j_min: ppt.j_min,
        argmin: ppt.argmin,
        witness,
        dense,
        verdict,
    })
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn dense_checks(
    state: &LatticeState,
    rep: &MapRep<Rational>,
    j_min: &Rational,
    witness: &Rational,
    tol: f64,
) -> Result<DenseChecks> {
    let cap = state.shape().qubits();
    let min_pt = dense_pt_eigenvalues(state, cap)?[0];
    let expected_pt = to_f64(j_min) / state.shape().dim() as f64;
    if (min_pt - expected_pt).abs() > tol {
        return Err(Error::CrossCheck(format!(
            "dense minimal PT eigenvalue {min_pt:e} differs from exact {expected_pt:e}"
        )));
    }
    let rho = state.materialize_dense_with_cap(cap)?;
    let dense_w = maps::witness_dense(rep, &rho)?;
    if (dense_w - to_f64(witness)).abs() > tol {
        return Err(Error::CrossCheck(format!(
            "dense witness {dense_w:e} differs from exact {}",
            fmt_rational(witness)
        )));
    }
    Ok(DenseChecks { min_pt_eigenvalue: min_pt, witness: dense_w, tolerance: tol })
}

fn join_rationals(v: &[Rational]) -> String {
    v.iter().map(fmt_rational).collect::<Vec<_>>().join(" ")
}

impl Certificate {
    /// Deterministic text rendering; [`Certificate::from_text`] reads it back.
    pub fn to_text(&self) -> String {
        let shape = self.state.shape();
        let mut out = String::from("pptes-certificate\n");
        writeln!(out, "tool {}", self.tool_version).unwrap();
        writeln!(out, "shape m={} n={}", shape.m(), shape.n()).unwrap();
        if self.state.is_els() {
            let support = self.state.support();
            writeln!(out, "state els {}", support.len()).unwrap();
            writeln!(out, "sites {support}").unwrap();
        } else {
            writeln!(out, "state weights denom={}", self.state.denom()).unwrap();
            for (s, &w) in self.state.weights().iter().enumerate() {
                if w != 0 {
                    writeln!(out, "weight {} {w}", shape.site_label(s)).unwrap();
                }
            }
        }
        match &self.map {
            MapDescription::LambdaBeta0(b) => writeln!(out, "map lambda-beta0 {b}").unwrap(),
            MapDescription::TensorSum(factors) => {
                out.push_str("map tensor-sum\n");
                writeln!(out, "lambda1 {}", join_rationals(&factors.lambda1)).unwrap();
                writeln!(out, "lambda2 {}", join_rationals(&factors.lambda2)).unwrap();
                writeln!(out, "neg {}", factors.neg_index).unwrap();
            }
            MapDescription::Unverified(diag) => {
                out.push_str("map unverified\n");
                writeln!(out, "coefficients {}", join_rationals(diag)).unwrap();
            }
        }
        if let Some(src) = &self.map_source {
            writeln!(out, "map-file {src}").unwrap();
        }
        writeln!(out, "j-min {}", fmt_rational(&self.j_min)).unwrap();
        writeln!(out, "j-argmin {}", shape.site_label(self.argmin)).unwrap();
        writeln!(out, "witness {}", fmt_rational(&self.witness)).unwrap();
        match &self.dense {
            Some(d) => writeln!(
                out,
                "dense min-pt-eigenvalue={:.16e} witness={:.16e} tolerance={:e}",
                d.min_pt_eigenvalue, d.witness, d.tolerance
            )
            .unwrap(),
            None => out.push_str("dense skipped\n"),
        }
        writeln!(out, "verdict {}", self.verdict).unwrap();
        writeln!(out, "# {}", self.verdict.describe()).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cur = Cursor::new(text);
        let rat = |t: &str, ln: usize| parse_rational(t).ok_or_else(|| parse_err(ln, format!("bad rational {t:?}")));
        let rats = |s: &str, ln: usize| s.split_whitespace().map(|t| rat(t, ln)).collect::<Result<Vec<_>>>();

        cur.expect_exact("pptes-certificate")?;
        let (_, tool_version) = cur.field("tool")?;
        let (ln, shape_line) = cur.field("shape")?;
        let dims: Vec<usize> = shape_line
            .split_whitespace()
            .zip(["m=", "n="])
            .map(|(f, k)| f.strip_prefix(k).and_then(|v| v.parse().ok()))
            .collect::<Option<Vec<_>>>()
            .filter(|v| v.len() == 2)
            .ok_or_else(|| parse_err(ln, "expected `shape m=<m> n=<n>`"))?;
        let shape = LatticeShape::new(dims[0], dims[1])?;

        let (ln, state_line) = cur.field("state")?;
        let state = if let Some(count) = state_line.strip_prefix("els ") {
            let (sl, sites) = cur.field("sites")?;
            let set = SiteSet::parse(shape, sites).map_err(|e| parse_err(sl, e.to_string()))?;
            if count.parse::<usize>().ok() != Some(set.len()) {
                return Err(parse_err(ln, "site count does not match the listing"));
            }
            LatticeState::from_set(&set)?
        } else if let Some(d) = state_line.strip_prefix("weights denom=") {
            let denom: i64 = d.parse().map_err(|_| parse_err(ln, "bad denominator"))?;
            let mut weights = vec![0i64; shape.size()];
            while let Some((wl, rest)) = cur.optional("weight") {
                let mut it = rest.split_whitespace();
                let (Some(label), Some(w), None) = (it.next(), it.next(), it.next()) else {
                    return Err(parse_err(wl, "expected `weight <site> <w>`"));
                };
                let site = shape.parse_site(label).map_err(|e| parse_err(wl, e.to_string()))?;
                weights[shape.index_of(&site)?] = w.parse().map_err(|_| parse_err(wl, "bad weight"))?;
            }
            LatticeState::from_weights(shape, weights, denom)?
        } else {
            return Err(parse_err(ln, "expected `state els <k>` or `state weights denom=<d>`"));
        };

        let (ln, map_line) = cur.field("map")?;
        let map = match map_line {
            "tensor-sum" => {
                let (l1, a) = cur.field("lambda1")?;
                let lambda1 = rats(a, l1)?;
                let (l2, b) = cur.field("lambda2")?;
                let lambda2 = rats(b, l2)?;
                let (l3, k) = cur.field("neg")?;
                let neg_index = k.parse().map_err(|_| parse_err(l3, "bad index"))?;
                MapDescription::TensorSum(TensorSumSpec { lambda1, lambda2, neg_index })
            }
            "unverified" => {
                let (l, c) = cur.field("coefficients")?;
                MapDescription::Unverified(rats(c, l)?)
            }
            other => match other.strip_prefix("lambda-beta0 ") {
                Some(b) => MapDescription::LambdaBeta0(b.parse().map_err(|e: Error| parse_err(ln, e.to_string()))?),
                None => return Err(parse_err(ln, format!("unknown map description {other:?}"))),
            },
        };
        let map_source = cur.optional("map-file").map(|(_, s)| s.to_string());

        let (ln, j) = cur.field("j-min")?;
        let j_min = rat(j, ln)?;
        let (ln, a) = cur.field("j-argmin")?;
        let argmin = shape.index_of(&shape.parse_site(a).map_err(|e| parse_err(ln, e.to_string()))?)?;
        let (ln, w) = cur.field("witness")?;
        let witness = rat(w, ln)?;
        let (ln, d) = cur.field("dense")?;
        let dense = if d == "skipped" {
            None
        } else {
            let keys = ["min-pt-eigenvalue=", "witness=", "tolerance="];
            let fields: Vec<&str> = d.split_whitespace().collect();
            if fields.len() != keys.len() {
                return Err(parse_err(ln, "expected three dense fields"));
            }
            let mut vals = [0.0f64; 3];
            for ((slot, f), key) in vals.iter_mut().zip(fields).zip(keys) {
                *slot = f
                    .strip_prefix(key)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err(ln, format!("expected {key}<float>")))?;
            }
            Some(DenseChecks { min_pt_eigenvalue: vals[0], witness: vals[1], tolerance: vals[2] })
        };
        let (ln, v) = cur.field("verdict")?;
        let verdict = Verdict::parse(v).ok_or_else(|| parse_err(ln, format!("unknown verdict {v:?}")))?;
        if let Some((ln, extra)) = cur.lines.get(cur.pos) {
            return Err(parse_err(*ln, format!("unexpected line {extra:?}")));
        }
        Ok(Certificate { tool_version: tool_version.to_string(), state, map, map_source, j_min, argmin, witness, dense, verdict })
    }
}

/// Line cursor over non-empty, non-comment lines.
struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Cursor { lines, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn expect_exact(&mut self, want: &str) -> Result<()> {
        match self.lines.get(self.pos) {
            Some(&(_, l)) if l == want => {
                self.pos += 1;
                Ok(())
            }
            Some(&(ln, _)) => Err(parse_err(ln, format!("expected `{want}`"))),
            None => Err(parse_err(self.last_line(), format!("missing `{want}` line"))),
        }
    }

    /// `<key> <rest>` at the cursor.
    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let line = self.last_line();
        self.optional(key).ok_or_else(|| {
            let ln = self.lines.get(self.pos).map_or(line, |l| l.0);
            parse_err(ln, format!("expected `{key} ...`"))
        })
    }

    fn optional(&mut self, key: &str) -> Option<(usize, &'a str)> {
        let &(ln, l) = self.lines.get(self.pos)?;
        let rest = l.strip_prefix(key)?.strip_prefix(' ')?;
        self.pos += 1;
        Some((ln, rest.trim()))
    }
}

/// Recomputes a certificate from its recorded inputs and checks every recorded value.
pub fn verify_certificate(cert: &Certificate) -> Result<Certificate> {
    let shape = cert.state.shape();
    let mut rep = cert.map.rebuild(shape)?;
    if matches!(cert.map, MapDescription::Unverified(_)) {
        rep = MapRep::diagonal(shape, (0..shape.size()).map(|s| rep.diagonal_entry(s)).collect())?;
    }
    let tol = cert.dense.as_ref().map_or(1e-8, |d| d.tolerance);
    let opts = CertifyOptions {
        dense_max_qubits: if cert.dense.is_some() { shape.qubits() } else { 0 },
        tolerance: tol,
    };
    let fresh = certify_pptes(&cert.state, &rep, &opts)?;
    let mismatch = |what: &str, a: String, b: String| {
        Err(Error::Contract(format!("{what}: certificate says {a}, recomputed {b}")))
    };
    if fresh.j_min != cert.j_min {
        return mismatch("j-min", fmt_rational(&cert.j_min), fmt_rational(&fresh.j_min));
    }
    if fresh.witness != cert.witness {
        return mismatch("witness", fmt_rational(&cert.witness), fmt_rational(&fresh.witness));
    }
    if fresh.verdict != cert.verdict {
        return mismatch("verdict", cert.verdict.to_string(), fresh.verdict.to_string());
    }
    if let (Some(a), Some(b)) = (&cert.dense, &fresh.dense) {
        if (a.min_pt_eigenvalue - b.min_pt_eigenvalue).abs() > tol || (a.witness - b.witness).abs() > tol {
            return mismatch(
                "dense checks",
                format!("({:e}, {:e})", a.min_pt_eigenvalue, a.witness),
                format!("({:e}, {:e})", b.min_pt_eigenvalue, b.witness),
            );
        }
    }
    Ok(fresh)
}

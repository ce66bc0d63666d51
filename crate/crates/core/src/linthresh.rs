//! Linear thresholds over the last `d` bits, sparse variants, and exact LP learning.

use std::collections::{BTreeSet, HashMap};

use num_traits::Signed;
use rayon::prelude::*;

use crate::learning::PrefixDataset;
use crate::rational::{int, zero, Rational};
use crate::seqcore::{Alphabet, NextToken, Token};
use crate::simplex::{find_feasible, Constraint, Relation};
use crate::{Error, Result};

/// `f(x) = 1[Σ_{i=1}^{d∧|x|} w[-i]·x[-i] + b ≥ 0]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LinearThreshold {
    pub weights: Vec<Rational>,
    pub bias: Rational,
}

fn bit(t: Token) -> Result<bool> {
    match t {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::NonBinary(other)),
    }
}

impl LinearThreshold {
    pub fn new(weights: Vec<Rational>, bias: Rational) -> Self {
        LinearThreshold { weights, bias }
    }

    pub fn zero(d: usize) -> Self {
        LinearThreshold { weights: vec![zero(); d], bias: zero() }
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    /// The sum before thresholding.
    pub fn pre_activation(&self, x: &[Token]) -> Result<Rational> {
        let d = self.d();
        let k = d.min(x.len());
        let mut acc = self.bias.clone();
        for i in 1..=k {
            if bit(x[x.len() - i])? {
                acc += &self.weights[d - i];
            }
        }
        Ok(acc)
    }

    pub fn eval(&self, x: &[Token]) -> Result<bool> {
        Ok(!self.pre_activation(x)?.is_negative())
    }

    pub fn scaled(&self, lambda: &Rational) -> Self {
        LinearThreshold {
            weights: self.weights.iter().map(|w| w * lambda).collect(),
            bias: &self.bias * lambda,
        }
    }

    /// `"d b w_1 … w_d"`.
    pub fn to_text(&self) -> String {
        let mut parts = vec![self.d().to_string(), self.bias.to_string()];
        parts.extend(self.weights.iter().map(|w| w.to_string()));
        parts.join(" ")
    }

    pub fn from_text(line: &str) -> Result<Self> {
        let mut it = line.split_whitespace();
        let d: usize = it
            .next()
            .ok_or_else(|| Error::Parse("empty threshold line".into()))?
            .parse()
            .map_err(|_| Error::Parse("threshold dimension is not an integer".into()))?;
        let bias = crate::rational::parse(
            it.next().ok_or_else(|| Error::Parse("missing bias".into()))?,
        )?;
        let weights = it.map(crate::rational::parse).collect::<Result<Vec<_>>>()?;
        if weights.len() != d {
            return Err(Error::Parse(format!("expected {d} weights, found {}", weights.len())));
        }
        Ok(LinearThreshold { weights, bias })
    }
}

impl NextToken for LinearThreshold {
    fn alphabet(&self) -> &Alphabet {
        Alphabet::binary()
    }
    fn next_token(&self, x: &[Token]) -> Result<Token> {
        Ok(self.eval(x)? as Token)
    }
}

/// A threshold whose weights vanish outside `support`.
///
/// Support entries index `w` (0-based, so entry `p` multiplies `x[-(d-p)]`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SparseLinearThreshold {
    pub d: usize,
    pub k: usize,
    pub support: Vec<usize>,
    pub weights: Vec<Rational>,
    pub bias: Rational,
}

impl SparseLinearThreshold {
    pub fn new(d: usize, k: usize, support: Vec<usize>, weights: Vec<Rational>, bias: Rational) -> Result<Self> {
        if support.len() > k || support.len() != weights.len() {
            return Err(Error::Invalid("support size must match weights and be at most k".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support.iter().any(|&p| p >= d) {
            return Err(Error::Invalid("support must be strictly increasing within 0..d".into()));
        }
        Ok(SparseLinearThreshold { d, k, support, weights, bias })
    }

    pub fn to_dense(&self) -> LinearThreshold {
        let mut w = vec![zero(); self.d];
        for (&p, v) in self.support.iter().zip(&self.weights) {
            w[p] = v.clone();
        }
        LinearThreshold::new(w, self.bias.clone())
    }

    pub fn eval(&self, x: &[Token]) -> Result<bool> {
        x.iter().try_for_each(|&t| bit(t).map(|_| ()))?;
        let mut acc = self.bias.clone();
        for (&p, w) in self.support.iter().zip(&self.weights) {
            let back = self.d - p;
            if back <= x.len() && x[x.len() - back] == 1 {
                acc += w;
            }
        }
        Ok(!acc.is_negative())
    }
}

impl NextToken for SparseLinearThreshold {
    fn alphabet(&self) -> &Alphabet {
        Alphabet::binary()
    }
    fn next_token(&self, x: &[Token]) -> Result<Token> {
        Ok(self.eval(x)? as Token)
    }
}

/// Distinct `(window, label)` constraints, where the window is the last `d∧|u|` bits.
fn window_constraints(data: &PrefixDataset, d: usize) -> Result<Vec<(Vec<Token>, bool)>> {
    let mut seen: HashMap<Vec<Token>, bool> = HashMap::new();
    let mut out = Vec::new();
    for (u, v) in data.pairs() {
        let label = bit(*v)?;
        let u = u.as_slice();
        let w: Vec<Token> = u[u.len() - d.min(u.len())..].to_vec();
        for &t in &w {
            bit(t)?;
        }
        match seen.get(&w) {
            Some(&l) if l != label => {
                return Err(Error::NotRealizable(format!(
                    "window {w:?} carries both labels, so no threshold fits"
                )))
            }
            Some(_) => {}
            None => {
                seen.insert(w.clone(), label);
                out.push((w, label));
            }
        }
    }
    Ok(out)
}

/// Margin-1 constraints over the variables `(w_p for p in positions, b)`.
fn lp_rows(windows: &[(Vec<Token>, bool)], d: usize, positions: &[usize]) -> Vec<Constraint> {
    windows
        .iter()
        .map(|(w, label)| {
            let mut coeffs = vec![zero(); positions.len() + 1];
            for (slot, &p) in positions.iter().enumerate() {
                let back = d - p;
                if back <= w.len() && w[w.len() - back] == 1 {
                    coeffs[slot] = int(1);
                }
            }
            coeffs[positions.len()] = int(1);
            if *label {
                Constraint::new(coeffs, Relation::Ge, int(0))
            } else {
                Constraint::new(coeffs, Relation::Le, int(-1))
            }
        })
        .collect()
}

/// Finds a threshold consistent with every prefix pair, or reports infeasibility.
pub fn cons_lp(data: &PrefixDataset, d: usize) -> Result<LinearThreshold> {
    let windows = window_constraints(data, d)?;
    let positions: Vec<usize> = (0..d).collect();
    let rows = lp_rows(&windows, d, &positions);
    let x = find_feasible(d + 1, &rows)
        .ok_or_else(|| Error::NotRealizable(format!("no threshold over d={d} fits the data")))?;
    let f = LinearThreshold::new(x[..d].to_vec(), x[d].clone());
    for (u, v) in data.pairs() {
        if f.next_token(u.as_slice())? != *v {
            return Err(Error::Invariant("LP solution fails a training pair".into()));
        }
    }
    Ok(f)
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

pub const SPARSE_SUPPORT_GUARD: u128 = 100_000;

/// Next k-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Tries supports of size `min(k, d)` in lexicographic order and returns the
/// first restricted LP solution.
pub fn cons_sparse(data: &PrefixDataset, d: usize, k: usize) -> Result<SparseLinearThreshold> {
    let size = k.min(d);
    let count = binomial(d, size);
    if count > SPARSE_SUPPORT_GUARD {
        return Err(Error::Guard(format!("C({d},{size}) = {count} supports exceeds {SPARSE_SUPPORT_GUARD}")));
    }
    let windows = window_constraints(data, d)?;
    let mut support: Vec<usize> = (0..size).collect();
    loop {
        let rows = lp_rows(&windows, d, &support);
        if let Some(x) = find_feasible(size + 1, &rows) {
            let f = SparseLinearThreshold::new(d, k, support.clone(), x[..size].to_vec(), x[size].clone())?;
            for (u, v) in data.pairs() {
                if f.next_token(u.as_slice())? != *v {
                    return Err(Error::Invariant("sparse LP solution fails a training pair".into()));
                }
            }
            return Ok(f);
        }
        if !next_combination(&mut support, d) {
            break;
        }
    }
    Err(Error::NotRealizable(format!("no {k}-sparse threshold over d={d} fits the data")))
}

pub const ENUMERATION_MAX_D: usize = 4;

/// The bits of point `p ∈ 0..2^d`, first coordinate most significant.
pub fn cube_point(p: usize, d: usize) -> Vec<Token> {
    (0..d).map(|i| ((p >> (d - 1 - i)) & 1) as Token).collect()
}

/// Whether the truth table is monotone or antitone in each coordinate, a
/// necessary condition for being a threshold function.
fn is_unate(table: u32, d: usize) -> bool {
    let n = 1usize << d;
    (0..d).all(|i| {
        let mask = 1usize << (d - 1 - i);
        let (mut up, mut down) = (false, false);
        for p in (0..n).filter(|p| p & mask == 0) {
            let lo = table >> p & 1;
            let hi = table >> (p | mask) & 1;
            up |= lo < hi;
            down |= lo > hi;
        }
        !(up && down)
    })
}

fn realizable(table: u32, d: usize) -> bool {
    let positions: Vec<usize> = (0..d).collect();
    let windows: Vec<(Vec<Token>, bool)> =
        (0..1usize << d).map(|p| (cube_point(p, d), table >> p & 1 == 1)).collect();
    find_feasible(d + 1, &lp_rows(&windows, d, &positions)).is_some()
}

/// All dichotomies of `{0,1}^d` realized by a `d`-bit threshold, as truth
/// tables with bit `p` holding `f(cube_point(p, d))`.
pub fn enumerate_threshold_functions(d: usize) -> Result<BTreeSet<u32>> {
    enumerate_threshold_functions_impl(d, true)
}

#[doc(hidden)]
pub fn enumerate_threshold_functions_impl(d: usize, unate_filter: bool) -> Result<BTreeSet<u32>> {
    if d > ENUMERATION_MAX_D {
        return Err(Error::Guard(format!("d = {d} exceeds {ENUMERATION_MAX_D}")));
    }
    let tables: u64 = 1 << (1u64 << d);
    Ok((0..tables)
        .into_par_iter()
        .map(|t| t as u32)
        .filter(|&t| (!unate_filter || is_unate(t, d)) && realizable(t, d))
        .collect())
}

/// `(2e·2^d)^{d+1}`.
pub fn threshold_count_bound(d: usize) -> f64 {
    (2.0 * std::f64::consts::E * 2f64.powi(d as i32)).powi(d as i32 + 1)
}

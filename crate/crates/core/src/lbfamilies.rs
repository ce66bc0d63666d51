//! Explicit lookup families and brute-force shattering / growth estimators.
//!
//! Every family is indexed by a bit vector `b = (b_1, …, b_M)`. Points are
//! `x_i = 1·bits(i−1)` (with a trailing 1 for the collapse family), where
//! `bits` uses `⌈log₂ M⌉` bits, most significant first. Inputs are matched
//! after stripping leading zeros; anything unmatched maps to 0.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::learning::{
    cons_cot, ConsistencyOracle, CoTDataset, E2EDataset, EnumerableFamily, Learner, PrefixDataset,
};
use crate::seqcore::{cot, e2e, Alphabet, NextToken, Token, TokenSeq};
use crate::{Error, Result};

/// Largest index length [`EnumerableFamily`] will list (`2^16` members).
pub const ENUMERATION_MAX_BITS: usize = 16;
/// Largest index length a member can carry.
pub const MAX_INDEX_BITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// Column-revealing family with `M = D·T`.
    E1 { d: usize, t: usize },
    /// Emits `b_1..b_D`, then `b_i` forever, on prompts rooted at `x_i`.
    Ldim { d: usize },
    /// `b_i` on `0*x_i`, 0 elsewhere.
    Collapse { d: usize },
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::E1 { d, t } => write!(f, "e1:D={d},T={t}"),
            FamilyKind::Ldim { d } => write!(f, "ldim:D={d}"),
            FamilyKind::Collapse { d } => write!(f, "collapse:D={d}"),
        }
    }
}

/// Parses `key=value` pairs separated by commas.
pub fn parse_params(s: &str) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
        let v: usize = v.trim().parse().map_err(|_| Error::Parse(format!("bad value in {part:?}")))?;
        if out.insert(k.trim().to_string(), v).is_some() {
            return Err(Error::Parse(format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}

fn take(params: &mut BTreeMap<String, usize>, key: &str, spec: &str) -> Result<usize> {
    params.remove(key).ok_or_else(|| Error::Parse(format!("{spec:?} is missing {key}")))
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut p = parse_params(rest)?;
        let kind = match name {
            "e1" => FamilyKind::E1 { d: take(&mut p, "D", s)?, t: take(&mut p, "T", s)? },
            "ldim" => FamilyKind::Ldim { d: take(&mut p, "D", s)? },
            "collapse" => FamilyKind::Collapse { d: take(&mut p, "D", s)? },
            other => return Err(Error::Parse(format!("unknown lookup family {other:?}"))),
        };
        if let Some(k) = p.keys().next() {
            return Err(Error::Parse(format!("unexpected parameter {k:?} in {s:?}")));
        }
        Ok(kind)
    }
}

fn ceil_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

/// Outcome of evaluating a member under a partial bit assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partial {
    Value(bool),
    /// The 0-based index bit that must be fixed to continue.
    Need(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LookupFamily {
    kind: FamilyKind,
}

impl LookupFamily {
    pub fn new(kind: FamilyKind) -> Result<Self> {
        match kind {
            FamilyKind::E1 { d, t } => {
                if d == 0 || t == 0 {
                    return Err(Error::Invalid("E1 needs D ≥ 1 and T ≥ 1".into()));
                }
                if d * t > MAX_INDEX_BITS {
                    return Err(Error::Guard(format!("D·T = {} exceeds {MAX_INDEX_BITS}", d * t)));
                }
            }
            FamilyKind::Ldim { d } => {
                if d == 0 || d > 8 {
                    return Err(Error::Guard(format!("LDIM needs 1 ≤ D ≤ 8, got {d}")));
                }
            }
            FamilyKind::Collapse { d } => {
                if d == 0 || d > 10 {
                    return Err(Error::Guard(format!("COLLAPSE needs 1 ≤ D ≤ 10, got {d}")));
                }
            }
        }
        Ok(LookupFamily { kind })
    }

    pub fn e1(d: usize, t: usize) -> Result<Self> {
        LookupFamily::new(FamilyKind::E1 { d, t })
    }

    pub fn ldim(d: usize) -> Result<Self> {
        LookupFamily::new(FamilyKind::Ldim { d })
    }

    pub fn collapse(d: usize) -> Result<Self> {
        LookupFamily::new(FamilyKind::Collapse { d })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// `M`, the length of the member selector.
    pub fn index_len(&self) -> usize {
        match self.kind {
            FamilyKind::E1 { d, t } => d * t,
            FamilyKind::Ldim { d } | FamilyKind::Collapse { d } => d,
        }
    }

    fn id_bits(&self) -> usize {
        ceil_log2(self.index_len())
    }

    /// Length of the rooted head `x_i`.
    pub fn point_len(&self) -> usize {
        match self.kind {
            FamilyKind::Collapse { .. } => self.id_bits() + 2,
            _ => self.id_bits() + 1,
        }
    }

    /// `x_i` for `i ∈ 1..=M`.
    pub fn point(&self, i: usize) -> TokenSeq {
        assert!((1..=self.index_len()).contains(&i), "point index out of range");
        let nb = self.id_bits();
        let mut v = vec![1];
        v.extend((0..nb).map(|q| (((i - 1) >> (nb - 1 - q)) & 1) as Token));
        if matches!(self.kind, FamilyKind::Collapse { .. }) {
            v.push(1);
        }
        TokenSeq(v)
    }

    pub fn points(&self) -> Vec<TokenSeq> {
        (1..=self.index_len()).map(|i| self.point(i)).collect()
    }

    pub fn member(&self, bits: Vec<bool>) -> Result<LookupMember> {
        if bits.len() != self.index_len() {
            return Err(Error::Invalid(format!("selector has {} bits, expected {}", bits.len(), self.index_len())));
        }
        Ok(LookupMember { kind: self.kind, bits })
    }

    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> LookupMember {
        let bits = (0..self.index_len()).map(|_| rng.gen()).collect();
        LookupMember { kind: self.kind, bits }
    }

    /// Splits `x` into the root index `i` and the continuation after `x_i`.
    ///
    /// With `pad`, a head cut short by the end of `x` is completed with zeros,
    /// which is where generation from `x` necessarily leads.
    fn root<'a>(&self, x: &'a [Token], pad: bool) -> Option<(usize, &'a [Token])> {
        let p = x.iter().position(|&t| t == 1)?;
        let rest = &x[p..];
        let n = self.point_len();
        let nb = self.id_bits();
        if rest.len() < n && !pad {
            return None;
        }
        let bit = |q: usize| rest.get(q).copied().unwrap_or(0) as usize;
        let idx = (1..=nb).fold(0usize, |acc, q| (acc << 1) | bit(q)) + 1;
        if idx > self.index_len() {
            return None;
        }
        if matches!(self.kind, FamilyKind::Collapse { .. }) && bit(n - 1) != 1 {
            return None;
        }
        Some((idx, &rest[rest.len().min(n)..]))
    }

    /// Evaluates the member whose bit `q` (0-based) is `bits(q)`.
    pub fn eval_partial(&self, x: &[Token], bits: &dyn Fn(usize) -> Option<bool>) -> Partial {
        let Some((i, cont)) = self.root(x, false) else { return Partial::Value(false) };
        let get = |one_based: usize| bits(one_based - 1).ok_or(Partial::Need(one_based - 1));
        let run = || -> std::result::Result<bool, Partial> {
            match self.kind {
                FamilyKind::E1 { d, t } => {
                    let k = (i - 1) % d + 1;
                    let j = cont.len();
                    if j >= t {
                        return Ok(false);
                    }
                    for (q, &c) in cont.iter().enumerate() {
                        if get(q * d + k)? != (c == 1) {
                            return Ok(false);
                        }
                    }
                    if j + 2 <= t {
                        get(j * d + k)
                    } else {
                        get(i)
                    }
                }
                FamilyKind::Ldim { d } => {
                    let j = cont.len();
                    for (q, &c) in cont.iter().take(d).enumerate() {
                        if get(q + 1)? != (c == 1) {
                            return Ok(false);
                        }
                    }
                    if j < d {
                        return get(j + 1);
                    }
                    let bi = get(i)?;
                    if cont[d..].iter().any(|&c| (c == 1) != bi) {
                        return Ok(false);
                    }
                    Ok(bi)
                }
                FamilyKind::Collapse { .. } => {
                    if !cont.is_empty() {
                        return Ok(false);
                    }
                    get(i)
                }
            }
        };
        match run() {
            Ok(v) => Partial::Value(v),
            Err(need) => need,
        }
    }

    /// Bits (0-based) that a member can read on `x` or on anything generated from it.
    pub fn scope(&self, x: &[Token]) -> Vec<usize> {
        let Some((i, _)) = self.root(x, true) else { return Vec::new() };
        match self.kind {
            FamilyKind::E1 { d, t } => {
                let k = (i - 1) % d + 1;
                (0..t).map(|q| q * d + k - 1).collect()
            }
            FamilyKind::Ldim { d } => (0..d).collect(),
            FamilyKind::Collapse { .. } => vec![i - 1],
        }
    }

    /// Points plus the continuations the base class can see.
    ///
    /// E1 appends every bit string of length `< T`, LDIM every bit string of
    /// length `≤ D+1`, and COLLAPSE every string of length `≤ 1`.
    pub fn base_pool(&self) -> PointPool {
        let max_cont = match self.kind {
            FamilyKind::E1 { t, .. } => t - 1,
            FamilyKind::Ldim { d } => d + 1,
            FamilyKind::Collapse { .. } => 1,
        };
        let mut pts = Vec::new();
        for x in self.points() {
            for len in 0..=max_cont {
                for p in 0..1usize << len {
                    let mut v = x.0.clone();
                    v.extend((0..len).map(|q| ((p >> (len - 1 - q)) & 1) as Token));
                    pts.push(TokenSeq(v));
                }
            }
        }
        PointPool::new(pts).expect("distinct by construction")
    }

    /// The canonical points, the prompts of the end-to-end class.
    pub fn e2e_pool(&self) -> PointPool {
        PointPool::new(self.points()).expect("distinct by construction")
    }

    /// Lexicographically first selector satisfying every constraint.
    ///
    /// Constraints are grouped into components whose bit scopes are disjoint.
    /// Within a component, bits are fixed in index order, preferring 0 whenever
    /// a completion still exists; completions are found by depth-first search
    /// over the bits the constraints actually read.
    pub fn first_consistent(&self, constraints: &[LookupConstraint]) -> Result<Option<LookupMember>> {
        let m = self.index_len();
        let mut unique: Vec<&LookupConstraint> = Vec::new();
        let mut seen: HashSet<(&TokenSeq, Option<usize>)> = HashSet::new();
        let mut label: std::collections::HashMap<(&TokenSeq, Option<usize>), bool> = Default::default();
        for c in constraints {
            for &t in c.x.as_slice() {
                if t > 1 {
                    return Err(Error::NonBinary(t));
                }
            }
            let key = (&c.x, c.steps);
            if let Some(&y) = label.get(&key) {
                if y != c.y {
                    return Ok(None);
                }
            } else {
                label.insert(key, c.y);
            }
            if seen.insert(key) {
                unique.push(c);
            }
        }

        // Union-find over bits; each constraint joins its scope.
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut [usize], a: usize) -> usize {
            let mut r = a;
            while p[r] != r {
                r = p[r];
            }
            let mut c = a;
            while p[c] != r {
                let n = p[c];
                p[c] = r;
                c = n;
            }
            r
        }
        let scopes: Vec<Vec<usize>> = unique.iter().map(|c| self.scope(c.x.as_slice())).collect();
        for s in &scopes {
            for w in s.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        let mut groups: BTreeMap<Option<usize>, Vec<&LookupConstraint>> = BTreeMap::new();
        for (c, s) in unique.iter().zip(&scopes) {
            let g = s.first().map(|&b| find(&mut parent, b));
            groups.entry(g).or_default().push(c);
        }

        let mut assign: Vec<Option<bool>> = vec![None; m];
        for (g, cs) in &groups {
            let bits: Vec<usize> = match g {
                None => Vec::new(),
                Some(root) => (0..m).filter(|&b| find(&mut parent, b) == *root).collect(),
            };
            if !self.feasible(cs, &mut assign) {
                return Ok(None);
            }
            for b in bits {
                assign[b] = Some(false);
                if !self.feasible(cs, &mut assign) {
                    assign[b] = Some(true);
                }
            }
        }
        let bits = assign.into_iter().map(|b| b.unwrap_or(false)).collect();
        Ok(Some(LookupMember { kind: self.kind, bits }))
    }

    fn check(&self, c: &LookupConstraint, assign: &[Option<bool>]) -> Partial {
        let get = |q: usize| assign[q];
        match c.steps {
            None => match self.eval_partial(c.x.as_slice(), &get) {
                Partial::Value(v) => Partial::Value(v == c.y),
                need => need,
            },
            Some(steps) => {
                let mut z = c.x.0.clone();
                let mut last = false;
                for _ in 0..steps {
                    match self.eval_partial(&z, &get) {
                        Partial::Value(v) => {
                            last = v;
                            z.push(v as Token);
                        }
                        need => return need,
                    }
                }
                Partial::Value(last == c.y)
            }
        }
    }

    /// Whether some completion of `assign` satisfies all of `cs`; `assign` is restored.
    fn feasible(&self, cs: &[&LookupConstraint], assign: &mut Vec<Option<bool>>) -> bool {
        let mut need = None;
        for c in cs {
            match self.check(c, assign) {
                Partial::Value(false) => return false,
                Partial::Value(true) => {}
                Partial::Need(b) => {
                    need.get_or_insert(b);
                }
            }
        }
        let Some(b) = need else { return true };
        for v in [false, true] {
            assign[b] = Some(v);
            if self.feasible(cs, assign) {
                assign[b] = None;
                return true;
            }
        }
        assign[b] = None;
        false
    }
}

/// `f_b(x) = y` (base) or `e2e(f_b, x, T) = y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LookupConstraint {
    pub x: TokenSeq,
    pub y: bool,
    /// `None` for a next-token constraint, `Some(T)` for an end-to-end one.
    pub steps: Option<usize>,
}

fn label_bit(t: Token) -> Result<bool> {
    match t {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::NonBinary(other)),
    }
}

impl ConsistencyOracle for LookupFamily {
    type Hypothesis = LookupMember;

    fn solve(&self, data: &PrefixDataset) -> Result<LookupMember> {
        let cs = data
            .pairs()
            .iter()
            .map(|(u, v)| Ok(LookupConstraint { x: u.clone(), y: label_bit(*v)?, steps: None }))
            .collect::<Result<Vec<_>>>()?;
        self.first_consistent(&cs)?
            .ok_or_else(|| Error::NotRealizable(format!("no member of {} fits the prefixes", self.kind)))
    }
}

impl EnumerableFamily for LookupFamily {
    type Member = LookupMember;

    fn size(&self) -> Result<u128> {
        let m = self.index_len();
        if m > ENUMERATION_MAX_BITS {
            return Err(Error::Guard(format!("2^{m} members exceeds the enumeration limit 2^{ENUMERATION_MAX_BITS}")));
        }
        Ok(1u128 << m)
    }

    /// Member `index` has `b_1` as its most significant bit, so indices follow
    /// lexicographic order on `(b_1, …, b_M)`.
    fn member(&self, index: u128) -> Result<LookupMember> {
        let m = self.index_len();
        if index >= self.size()? {
            return Err(Error::Invalid(format!("member index {index} out of range")));
        }
        let bits = (0..m).map(|q| (index >> (m - 1 - q)) & 1 == 1).collect();
        Ok(LookupMember { kind: self.kind, bits })
    }
}

impl Learner for LookupFamily {
    type Member = LookupMember;

    fn learn_cot(&self, data: &CoTDataset) -> Result<LookupMember> {
        cons_cot(data, self)
    }

    fn learn_e2e(&self, data: &E2EDataset) -> Result<LookupMember> {
        let cs = data
            .pairs()
            .iter()
            .map(|(x, y)| Ok(LookupConstraint { x: x.clone(), y: label_bit(*y)?, steps: Some(data.steps()) }))
            .collect::<Result<Vec<_>>>()?;
        self.first_consistent(&cs)?
            .ok_or_else(|| Error::NotRealizable(format!("no member of {} fits the final answers", self.kind)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LookupMember {
    kind: FamilyKind,
    bits: Vec<bool>,
}

impl LookupMember {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }
}

impl NextToken for LookupMember {
    fn alphabet(&self) -> &Alphabet {
        Alphabet::binary()
    }

    fn next_token(&self, x: &[Token]) -> Result<Token> {
        if let Some(&t) = x.iter().find(|&&t| t > 1) {
            return Err(Error::NonBinary(t));
        }
        let fam = LookupFamily { kind: self.kind };
        match fam.eval_partial(x, &|q| Some(self.bits[q])) {
            Partial::Value(v) => Ok(v as Token),
            Partial::Need(_) => unreachable!("every bit is assigned"),
        }
    }
}

/// A finite list of distinct candidate points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointPool {
    points: Vec<TokenSeq>,
}

impl PointPool {
    pub fn new(points: Vec<TokenSeq>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(p) = points.iter().find(|p| !seen.insert(*p)) {
            return Err(Error::Invalid(format!("duplicate pool point {p}")));
        }
        Ok(PointPool { points })
    }

    pub fn points(&self) -> &[TokenSeq] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VcMode {
    Base,
    E2e(usize),
}

pub const POOL_MAX: usize = 128;

/// Label of `f` on `x` under `mode`.
pub fn label<G: NextToken + ?Sized>(f: &G, x: &TokenSeq, mode: VcMode) -> Result<Token> {
    match mode {
        VcMode::Base => f.next_token(x.as_slice()),
        VcMode::E2e(t) => e2e(f, x, t),
    }
}

/// Per member, the bit mask of pool points it labels 1.
fn label_masks<F: EnumerableFamily>(family: &F, pool: &PointPool, mode: VcMode) -> Result<Vec<u128>> {
    if pool.len() > POOL_MAX {
        return Err(Error::Guard(format!("pool of {} points exceeds {POOL_MAX}", pool.len())));
    }
    let n = family.size()?;
    if n > 1 << ENUMERATION_MAX_BITS {
        return Err(Error::Guard(format!("{n} members exceeds the enumeration limit")));
    }
    let mut masks = Vec::with_capacity(n as usize);
    for idx in 0..n {
        let f = family.member(idx)?;
        let mut mask = 0u128;
        for (p, x) in pool.points().iter().enumerate() {
            match label(&f, x, mode)? {
                0 => {}
                1 => mask |= 1 << p,
                t => return Err(Error::NonBinary(t)),
            }
        }
        masks.push(mask);
    }
    Ok(masks)
}

fn shatters(masks: &[u128], subset: &[usize]) -> bool {
    let sel: u128 = subset.iter().fold(0, |acc, &p| acc | 1 << p);
    let need = 1usize << subset.len();
    let mut seen = HashSet::with_capacity(need);
    for &m in masks {
        seen.insert(m & sel);
        if seen.len() == need {
            return true;
        }
    }
    false
}

/// Largest subset of `pool` on which the family realizes every labeling.
///
/// Shattered sets are closed under taking subsets, so size `k` candidates are
/// built by extending shattered sets of size `k−1` with later points; the
/// search stops at the first size with no shattered set, or once `2^k`
/// exceeds the number of members.
pub fn vcdim_bruteforce<F: EnumerableFamily>(family: &F, pool: &PointPool, mode: VcMode) -> Result<usize> {
    let masks = label_masks(family, pool, mode)?;
    let mut level: Vec<Vec<usize>> = vec![Vec::new()];
    let mut dim = 0;
    for k in 1..=pool.len() {
        if (1u128 << k.min(127)) > masks.len() as u128 {
            break;
        }
        let next: Vec<Vec<usize>> = level
            .par_iter()
            .flat_map_iter(|s| {
                let start = s.last().map_or(0, |&l| l + 1);
                (start..pool.len()).filter_map(|p| {
                    let mut cand = s.clone();
                    cand.push(p);
                    shatters(&masks, &cand).then_some(cand)
                })
            })
            .collect();
        if next.is_empty() {
            break;
        }
        dim = k;
        level = next;
    }
    Ok(dim)
}

/// Number of distinct label vectors the family induces on `points`.
pub fn growth_count<F: EnumerableFamily>(family: &F, points: &[TokenSeq], mode: VcMode) -> Result<usize> {
    let n = family.size()?;
    let mut seen: HashSet<Vec<Token>> = HashSet::new();
    for idx in 0..n {
        let f = family.member(idx)?;
        let v = points.iter().map(|x| label(&f, x, mode)).collect::<Result<Vec<_>>>()?;
        seen.insert(v);
    }
    Ok(seen.len())
}

/// Number of distinct vectors `(1[cot(f, x_i, T) ≠ z_i])_i` over the family.
pub fn cot_loss_behaviors<F: EnumerableFamily>(family: &F, data: &CoTDataset) -> Result<usize> {
    let n = family.size()?;
    let prompts: Vec<TokenSeq> = (0..data.len()).map(|i| data.prompt(i)).collect();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    for idx in 0..n {
        let f = family.member(idx)?;
        let v = prompts
            .iter()
            .zip(data.seqs())
            .map(|(x, z)| Ok(cot(&f, x, data.steps())? != *z))
            .collect::<Result<Vec<_>>>()?;
        seen.insert(v);
    }
    Ok(seen.len())
}

/// A family given by an explicit member list, in list order.
#[derive(Clone, Debug)]
pub struct ListFamily<G>(pub Vec<G>);

impl<G: NextToken + Clone> EnumerableFamily for ListFamily<G> {
    type Member = G;

    fn size(&self) -> Result<u128> {
        Ok(self.0.len() as u128)
    }

    fn member(&self, index: u128) -> Result<G> {
        self.0.get(index as usize).cloned().ok_or_else(|| Error::Invalid("member index out of range".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{cons_e2e, prefix_expand};
    use crate::seqcore::ConstantGenerator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[Token]) -> TokenSeq {
        TokenSeq(v.to_vec())
    }

    #[test]
    fn spec_strings() {
        assert_eq!("e1:D=2,T=4".parse::<FamilyKind>().unwrap(), FamilyKind::E1 { d: 2, t: 4 });
        assert_eq!("ldim:D=3".parse::<FamilyKind>().unwrap(), FamilyKind::Ldim { d: 3 });
        assert_eq!("collapse:D=4".parse::<FamilyKind>().unwrap(), FamilyKind::Collapse { d: 4 });
        for k in ["e1:D=2", "e1:D=2,T=4,X=1", "foo:D=1", "ldim:D=x"] {
            assert!(k.parse::<FamilyKind>().is_err(), "{k}");
        }
        let k: FamilyKind = "e1:D=3,T=8".parse().unwrap();
        assert_eq!(k.to_string().parse::<FamilyKind>().unwrap(), k);
    }

    #[test]
    fn guards() {
        assert!(LookupFamily::ldim(9).is_err());
        assert!(LookupFamily::collapse(11).is_err());
        assert!(LookupFamily::e1(8, 9).is_err());
        let big = LookupFamily::e1(3, 8).unwrap();
        assert!(matches!(big.size(), Err(Error::Guard(_))));
    }

    #[test]
    fn points_layout() {
        let f = LookupFamily::e1(2, 4).unwrap();
        assert_eq!(f.point_len(), 4);
        assert_eq!(f.point(1), seq(&[1, 0, 0, 0]));
        assert_eq!(f.point(8), seq(&[1, 1, 1, 1]));
        let c = LookupFamily::collapse(3).unwrap();
        assert_eq!(c.point(3), seq(&[1, 1, 0, 1]));
        let one = LookupFamily::e1(1, 1).unwrap();
        assert_eq!(one.point(1), seq(&[1]));
    }

    #[test]
    fn e1_d1_t2_trace() {
        let fam = LookupFamily::e1(1, 2).unwrap();
        let f = fam.member(vec![true, false]).unwrap();
        let x1 = fam.point(1);
        // Step 1 emits the column bit b_1, step 2 sees x_1·b_1 and emits b_1.
        assert_eq!(f.next_token(x1.as_slice()).unwrap(), 1);
        assert_eq!(f.next_token(&[1, 0, 1]).unwrap(), 1);
        assert_eq!(e2e(&f, &x1, 2).unwrap(), 1);
        // x_2 shares the column, then reads b_2 = 0.
        assert_eq!(e2e(&f, &fam.point(2), 2).unwrap(), 0);
        // Wrong continuation and too-long inputs fall to the default.
        assert_eq!(f.next_token(&[1, 0, 0]).unwrap(), 0);
        assert_eq!(f.next_token(&[1, 0, 1, 1]).unwrap(), 0);
        assert_eq!(f.next_token(&[0, 0, 1, 0]).unwrap(), 1);
        assert_eq!(f.next_token(&[0, 0]).unwrap(), 0);
    }

    #[test]
    fn e1_e2e_reads_own_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, t) in [(1, 3), (2, 2), (3, 4), (2, 5)] {
            let fam = LookupFamily::e1(d, t).unwrap();
            for _ in 0..10 {
                let f = fam.random_member(&mut rng);
                for i in 1..=d * t {
                    assert_eq!(e2e(&f, &fam.point(i), t).unwrap() == 1, f.bits()[i - 1]);
                }
            }
        }
    }

    #[test]
    fn ldim_trace() {
        let fam = LookupFamily::ldim(3).unwrap();
        let f = fam.member(vec![true, false, true]).unwrap();
        let z = cot(&f, &fam.point(2), 6).unwrap();
        assert_eq!(&z.as_slice()[3..], &[1, 0, 1, 0, 0, 0]);
        assert_eq!(f.next_token(&[1, 1, 1, 0, 1, 1]).unwrap(), 0);
        assert_eq!(f.next_token(&[0, 1, 1, 0, 1, 0]).unwrap(), 1);
    }

    #[test]
    fn collapse_second_step_is_zero() {
        let fam = LookupFamily::collapse(3).unwrap();
        for idx in 0..8 {
            let f = fam.member(EnumerableFamily::member(&fam, idx).unwrap().bits).unwrap();
            for i in 1..=3 {
                let x = fam.point(i);
                assert_eq!(f.next_token(x.as_slice()).unwrap() == 1, f.bits()[i - 1]);
                assert_eq!(e2e(&f, &x, 2).unwrap(), 0);
            }
        }
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let fam = LookupFamily::e1(1, 2).unwrap();
        let all: Vec<Vec<bool>> = (0..4).map(|i| fam.member_at(i).bits).collect();
        assert_eq!(all, vec![vec![false, false], vec![false, true], vec![true, false], vec![true, true]]);
    }

    impl LookupFamily {
        fn member_at(&self, i: u128) -> LookupMember {
            EnumerableFamily::member(self, i).unwrap()
        }
    }

    #[test]
    fn search_matches_brute_force_e2e() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (d, t) in [(1, 2), (2, 2), (2, 3), (1, 4)] {
            let fam = LookupFamily::e1(d, t).unwrap();
            for _ in 0..15 {
                let f = fam.random_member(&mut rng);
                let m = rng.gen_range(0..6);
                let prompts: Vec<TokenSeq> =
                    (0..m).map(|_| fam.point(rng.gen_range(1..=d * t))).collect();
                let data = E2EDataset::generate(&f, &prompts, t).unwrap();
                let brute = cons_e2e(&data, &fam).unwrap();
                assert_eq!(fam.learn_e2e(&data).unwrap(), brute);
            }
        }
    }

    #[test]
    fn search_matches_brute_force_on_arbitrary_labels() {
        // Random labels, often unrealizable, on short random prompts.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for kind in [FamilyKind::E1 { d: 2, t: 2 }, FamilyKind::Ldim { d: 3 }, FamilyKind::Collapse { d: 4 }] {
            let fam = LookupFamily::new(kind).unwrap();
            for _ in 0..60 {
                let steps = rng.gen_range(1..=3);
                let cs: Vec<LookupConstraint> = (0..rng.gen_range(1..4))
                    .map(|_| {
                        let len = rng.gen_range(0..7);
                        LookupConstraint {
                            x: TokenSeq((0..len).map(|_| rng.gen_range(0..2)).collect()),
                            y: rng.gen(),
                            steps: if rng.gen() { Some(steps) } else { None },
                        }
                    })
                    .collect();
                let mut brute = None;
                for idx in 0..fam.size().unwrap() {
                    let f = fam.member_at(idx);
                    let ok = cs.iter().all(|c| {
                        let got = match c.steps {
                            None => f.next_token(c.x.as_slice()).unwrap(),
                            Some(t) => e2e(&f, &c.x, t).unwrap(),
                        };
                        (got == 1) == c.y
                    });
                    if ok {
                        brute = Some(f);
                        break;
                    }
                }
                assert_eq!(fam.first_consistent(&cs).unwrap(), brute, "{cs:?}");
            }
        }
    }

    #[test]
    fn cons_e2e_examples() {
        let fam = LookupFamily::e1(2, 2).unwrap();
        let empty = E2EDataset::new(vec![], 2).unwrap();
        assert_eq!(cons_e2e(&empty, &fam).unwrap(), fam.member_at(0));
        assert_eq!(fam.learn_e2e(&empty).unwrap(), fam.member_at(0));
        let x = fam.point(1);
        let bad = E2EDataset::new(vec![(x.clone(), 0), (x, 1)], 2).unwrap();
        assert!(matches!(cons_e2e(&bad, &fam), Err(Error::NotRealizable(_))));
        assert!(matches!(fam.learn_e2e(&bad), Err(Error::NotRealizable(_))));
    }

    #[test]
    fn cot_learning_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let fam = LookupFamily::e1(3, 8).unwrap();
        for _ in 0..10 {
            let f = fam.random_member(&mut rng);
            let prompts: Vec<TokenSeq> = (0..20).map(|_| fam.point(rng.gen_range(1..=24))).collect();
            let data = CoTDataset::generate(&f, &prompts, 8).unwrap();
            let h = fam.learn_cot(&data).unwrap();
            for (u, v) in prefix_expand(&data).pairs() {
                assert_eq!(h.next_token(u.as_slice()).unwrap(), *v);
            }
        }
    }

    #[test]
    fn dimension_examples() {
        let e = LookupFamily::e1(2, 2).unwrap();
        assert_eq!(vcdim_bruteforce(&e, &e.base_pool(), VcMode::Base).unwrap(), 2);
        assert_eq!(vcdim_bruteforce(&e, &e.e2e_pool(), VcMode::E2e(2)).unwrap(), 4);
        let c = LookupFamily::collapse(3).unwrap();
        assert_eq!(vcdim_bruteforce(&c, &c.base_pool(), VcMode::Base).unwrap(), 3);
        assert_eq!(vcdim_bruteforce(&c, &c.base_pool(), VcMode::E2e(2)).unwrap(), 0);
        let one = ListFamily(vec![ConstantGenerator::new(Alphabet::binary().clone(), 1).unwrap()]);
        assert_eq!(vcdim_bruteforce(&one, &e.e2e_pool(), VcMode::Base).unwrap(), 0);
    }

    #[test]
    fn growth_examples() {
        let e = LookupFamily::e1(2, 2).unwrap();
        assert!(growth_count(&e, &[e.point(1)], VcMode::Base).unwrap() <= 2);
        let c = ListFamily(vec![ConstantGenerator::new(Alphabet::binary().clone(), 0).unwrap()]);
        assert_eq!(growth_count(&c, &e.points(), VcMode::E2e(3)).unwrap(), 1);
    }

    #[test]
    fn pool_rejects_duplicates() {
        assert!(PointPool::new(vec![seq(&[1]), seq(&[1])]).is_err());
    }
}

//! Datasets, the CoT and end-to-end consistency rules, and the PAC trial harness.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::seqcore::{cot, e2e, Alphabet, NextToken, Token, TokenSeq};
use crate::{Error, Result};

/// Exact error rate.
pub type ErrorRate = Ratio<u64>;

/// Prompt/answer pairs with a declared generation length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct E2EDataset {
    pairs: Vec<(TokenSeq, Token)>,
    steps: usize,
}

impl E2EDataset {
    pub fn new(pairs: Vec<(TokenSeq, Token)>, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(E2EDataset { pairs, steps })
    }

    /// Labels each prompt with `e2e(f, x, T)`.
    pub fn generate<G: NextToken + ?Sized>(f: &G, prompts: &[TokenSeq], steps: usize) -> Result<Self> {
        let pairs = prompts
            .iter()
            .map(|x| Ok((x.clone(), e2e(f, x, steps)?)))
            .collect::<Result<Vec<_>>>()?;
        E2EDataset::new(pairs, steps)
    }

    pub fn pairs(&self) -> &[(TokenSeq, Token)] {
        &self.pairs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn check_alphabet(&self, a: &Alphabet) -> Result<()> {
        for (x, y) in &self.pairs {
            a.check(x.as_slice())?;
            a.check(&[*y])?;
        }
        Ok(())
    }
}

/// Full chains of thought `z_i = x_i ++ (T generated tokens)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoTDataset {
    seqs: Vec<TokenSeq>,
    steps: usize,
}

impl CoTDataset {
    pub fn new(seqs: Vec<TokenSeq>, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroSteps);
        }
        if let Some(z) = seqs.iter().find(|z| z.len() < steps + 1) {
            return Err(Error::SequenceTooShort { len: z.len(), need: steps + 1 });
        }
        Ok(CoTDataset { seqs, steps })
    }

    pub fn generate<G: NextToken + ?Sized>(f: &G, prompts: &[TokenSeq], steps: usize) -> Result<Self> {
        let seqs = prompts.iter().map(|x| cot(f, x, steps)).collect::<Result<Vec<_>>>()?;
        CoTDataset::new(seqs, steps)
    }

    pub fn seqs(&self) -> &[TokenSeq] {
        &self.seqs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    /// `x_i = z_i[:-(T+1)]`.
    pub fn prompt(&self, i: usize) -> TokenSeq {
        let z = &self.seqs[i];
        TokenSeq(z.as_slice()[..z.len() - self.steps].to_vec())
    }

    /// The induced end-to-end dataset `(x_i, z_i[-1])`.
    pub fn to_e2e(&self) -> E2EDataset {
        let pairs = (0..self.len())
            .map(|i| (self.prompt(i), *self.seqs[i].as_slice().last().expect("non-empty")))
            .collect();
        E2EDataset { pairs, steps: self.steps }
    }
}

/// Supervised `(prefix, next token)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixDataset {
    pairs: Vec<(TokenSeq, Token)>,
}

impl PrefixDataset {
    pub fn new(pairs: Vec<(TokenSeq, Token)>) -> Self {
        PrefixDataset { pairs }
    }

    pub fn pairs(&self) -> &[(TokenSeq, Token)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `Σ |u_j|`.
    pub fn total_prefix_len(&self) -> usize {
        self.pairs.iter().map(|(u, _)| u.len()).sum()
    }
}

/// Emits `(z[:-(t+1)], z[-t])` for every sequence and `t = 1..T`.
pub fn prefix_expand(s: &CoTDataset) -> PrefixDataset {
    let t_max = s.steps();
    let mut pairs = Vec::with_capacity(s.len() * t_max);
    for z in s.seqs() {
        let z = z.as_slice();
        for t in 1..=t_max {
            let cut = z.len() - t;
            pairs.push((TokenSeq(z[..cut].to_vec()), z[cut]));
        }
    }
    PrefixDataset { pairs }
}

/// Solves the base-class consistency problem `f(u_j) = v_j ∀j`.
pub trait ConsistencyOracle {
    type Hypothesis: NextToken;

    fn solve(&self, data: &PrefixDataset) -> Result<Self::Hypothesis>;
}

/// A finite family with a canonical enumeration order.
pub trait EnumerableFamily {
    type Member: NextToken;

    /// Number of members, or [`Error::NotEnumerable`].
    fn size(&self) -> Result<u128>;

    fn member(&self, index: u128) -> Result<Self::Member>;
}

/// Largest family [`cons_e2e`] will scan.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 24;

/// Returns a member reproducing every training CoT, via a single oracle call.
pub fn cons_cot<O: ConsistencyOracle>(s: &CoTDataset, oracle: &O) -> Result<O::Hypothesis> {
    let data = prefix_expand(s);
    let f = oracle.solve(&data)?;
    for (i, z) in s.seqs().iter().enumerate() {
        if cot(&f, &s.prompt(i), s.steps())? != *z {
            return Err(Error::Invariant(format!("oracle output does not reproduce CoT {i}")));
        }
    }
    Ok(f)
}

fn e2e_consistent<G: NextToken + ?Sized>(f: &G, s: &E2EDataset) -> Result<bool> {
    for (x, y) in s.pairs() {
        if e2e(f, x, s.steps())? != *y {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Returns the first member, in canonical order, matching every final answer.
pub fn cons_e2e<F: EnumerableFamily>(s: &E2EDataset, family: &F) -> Result<F::Member> {
    let n = family.size()?;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::NotEnumerable(format!("{n} members exceeds the brute-force limit")));
    }
    for idx in 0..n {
        let f = family.member(idx)?;
        if e2e_consistent(&f, s)? {
            return Ok(f);
        }
    }
    Err(Error::NotRealizable("no family member matches every final answer".into()))
}

/// Fraction of pairs where `h(x_i) ≠ y_i`.
pub fn zero_one_error<H>(h: H, eval_set: &E2EDataset) -> Result<ErrorRate>
where
    H: Fn(&TokenSeq) -> Result<Token>,
{
    if eval_set.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut wrong = 0u64;
    for (x, y) in eval_set.pairs() {
        if h(x)? != *y {
            wrong += 1;
        }
    }
    Ok(Ratio::new(wrong, eval_set.len() as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Cot,
    E2e,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cot => "cot",
            Mode::E2e => "e2e",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cot" => Ok(Mode::Cot),
            "e2e" => Ok(Mode::E2e),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

/// A family that can be learned from either kind of supervision.
pub trait Learner: Sync {
    type Member: NextToken + Send + Sync;

    fn learn_cot(&self, data: &CoTDataset) -> Result<Self::Member>;

    fn learn_e2e(&self, data: &E2EDataset) -> Result<Self::Member>;
}

/// Source of prompts.
pub trait InputDistribution: Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> TokenSeq;

    /// Integer-weighted support, if it is small enough to list.
    fn support(&self) -> Option<Vec<(TokenSeq, u64)>>;
}

/// Largest support for which population error is computed exactly.
pub const EXACT_SUPPORT_LIMIT: usize = 4096;

/// Uniform over a fixed list of prompts.
#[derive(Clone, Debug)]
pub struct UniformOver {
    pub points: Vec<TokenSeq>,
}

impl InputDistribution for UniformOver {
    fn sample(&self, rng: &mut dyn RngCore) -> TokenSeq {
        self.points[rng.gen_range(0..self.points.len())].clone()
    }

    fn support(&self) -> Option<Vec<(TokenSeq, u64)>> {
        Some(self.points.iter().map(|p| (p.clone(), 1)).collect())
    }
}

/// Uniform length in `min_len..=max_len`, then uniform bits, passed through `map`.
#[derive(Clone)]
pub struct BitStrings {
    pub min_len: usize,
    pub max_len: usize,
    pub map: fn(&[bool]) -> TokenSeq,
}

impl BitStrings {
    pub fn plain(min_len: usize, max_len: usize) -> Self {
        BitStrings {
            min_len,
            max_len,
            map: |w| TokenSeq(w.iter().map(|&b| b as Token).collect()),
        }
    }
}

impl InputDistribution for BitStrings {
    fn sample(&self, rng: &mut dyn RngCore) -> TokenSeq {
        let len = rng.gen_range(self.min_len..=self.max_len);
        let w: Vec<bool> = (0..len).map(|_| rng.gen()).collect();
        (self.map)(&w)
    }

    fn support(&self) -> Option<Vec<(TokenSeq, u64)>> {
        if self.max_len >= 12 {
            return None;
        }
        let total: usize = (self.min_len..=self.max_len).map(|l| 1usize << l).sum();
        if total > EXACT_SUPPORT_LIMIT {
            return None;
        }
        let mut out = Vec::with_capacity(total);
        for len in self.min_len..=self.max_len {
            let weight = 1u64 << (self.max_len - len);
            for p in 0..1usize << len {
                let w: Vec<bool> = (0..len).map(|i| (p >> (len - 1 - i)) & 1 == 1).collect();
                out.push(((self.map)(&w), weight));
            }
        }
        Some(out)
    }
}

/// Error of `hat` against `star` on the exact support or on `eval_n` fresh samples.
pub fn heldout_error<A: NextToken + ?Sized, B: NextToken + ?Sized>(
    hat: &A,
    star: &B,
    dist: &dyn InputDistribution,
    steps: usize,
    eval_n: usize,
    rng: &mut dyn RngCore,
) -> Result<(ErrorRate, bool)> {
    if let Some(support) = dist.support().filter(|s| s.len() <= EXACT_SUPPORT_LIMIT) {
        let (mut wrong, mut total) = (0u64, 0u64);
        for (x, w) in &support {
            total += w;
            if e2e(hat, x, steps)? != e2e(star, x, steps)? {
                wrong += w;
            }
        }
        if total == 0 {
            return Err(Error::EmptyEvalSet);
        }
        return Ok((Ratio::new(wrong, total), true));
    }
    let prompts: Vec<TokenSeq> = (0..eval_n).map(|_| dist.sample(rng)).collect();
    let eval = E2EDataset::generate(star, &prompts, steps)?;
    let rate = zero_one_error(|x| e2e(hat, x, steps), &eval)?;
    Ok((rate, false))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub error: ErrorRate,
    /// Whether `error` is the exact population error.
    pub exact: bool,
}

/// Draws `m` prompts, supervises them with `f_star` in the given mode, learns,
/// and measures held-out error. Equal seeds give equal outcomes, and the first
/// `m` prompts do not depend on `m`.
#[allow(clippy::too_many_arguments)]
pub fn pac_trial<L: Learner, G: NextToken + ?Sized>(
    family: &L,
    f_star: &G,
    input_dist: &dyn InputDistribution,
    m: usize,
    steps: usize,
    mode: Mode,
    eval_n: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prompts: Vec<TokenSeq> = (0..m).map(|_| input_dist.sample(&mut rng)).collect();
    let (error, exact) = match mode {
        Mode::Cot => {
            let data = CoTDataset::generate(f_star, &prompts, steps)?;
            let h = family.learn_cot(&data)?;
            heldout_error(&h, f_star, input_dist, steps, eval_n, &mut rng)?
        }
        Mode::E2e => {
            let data = E2EDataset::generate(f_star, &prompts, steps)?;
            let h = family.learn_e2e(&data)?;
            heldout_error(&h, f_star, input_dist, steps, eval_n, &mut rng)?
        }
    };
    Ok(TrialOutcome { error, exact })
}

/// Smallest `m ≤ max_m` at which the learner reaches exact population error 0
/// on a nested stream of prompts drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn samples_to_zero_error<L: Learner, G: NextToken + ?Sized>(
    family: &L,
    f_star: &G,
    input_dist: &dyn InputDistribution,
    steps: usize,
    mode: Mode,
    seed: u64,
    max_m: usize,
) -> Result<Option<usize>> {
    let support = input_dist
        .support()
        .filter(|s| s.len() <= EXACT_SUPPORT_LIMIT)
        .ok_or_else(|| Error::Invalid("samples_to_zero_error needs an enumerable support".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prompts = Vec::with_capacity(max_m);
    for m in 0..=max_m {
        if m > 0 {
            prompts.push(input_dist.sample(&mut rng));
        }
        let zero = match mode {
            Mode::Cot => {
                let h = family.learn_cot(&CoTDataset::generate(f_star, &prompts, steps)?)?;
                agrees_on(&h, f_star, &support, steps)?
            }
            Mode::E2e => {
                let h = family.learn_e2e(&E2EDataset::generate(f_star, &prompts, steps)?)?;
                agrees_on(&h, f_star, &support, steps)?
            }
        };
        if zero {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

fn agrees_on<A: NextToken + ?Sized, B: NextToken + ?Sized>(
    a: &A,
    b: &B,
    support: &[(TokenSeq, u64)],
    steps: usize,
) -> Result<bool> {
    for (x, w) in support {
        if *w > 0 && e2e(a, x, steps)? != e2e(b, x, steps)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

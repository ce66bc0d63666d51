//! Alphabets, token sequences, generators and autoregressive iteration.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use crate::lbfamilies::LookupMember;
use crate::linthresh::{LinearThreshold, SparseLinearThreshold};
use crate::turing::TmGenerator;
use crate::{Error, Result};

/// A token is an index into an [`Alphabet`].
pub type Token = u32;

/// Ordered finite set of tokens with canonical text renderings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, Token>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::Invalid("alphabet must be non-empty".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.contains(',') || s.contains(char::is_whitespace) {
                return Err(Error::Invalid(format!("bad token rendering {s:?}")));
            }
            if index.insert(s.clone(), i as Token).is_some() {
                return Err(Error::Invalid(format!("duplicate token {s:?}")));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    /// `{0, 1}` with token 0 rendered "0" and token 1 rendered "1".
    pub fn binary() -> &'static Alphabet {
        static BIN: OnceLock<Alphabet> = OnceLock::new();
        BIN.get_or_init(|| Alphabet::new(["0", "1"]).expect("static alphabet"))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: Token) -> bool {
        (t as usize) < self.symbols.len()
    }

    pub fn render(&self, t: Token) -> Result<&str> {
        self.symbols
            .get(t as usize)
            .map(String::as_str)
            .ok_or(Error::AlphabetMismatch { token: t, size: self.len() })
    }

    pub fn parse_token(&self, s: &str) -> Result<Token> {
        self.index
            .get(s.trim())
            .copied()
            .ok_or_else(|| Error::UnknownToken(s.trim().to_string()))
    }

    pub fn check(&self, seq: &[Token]) -> Result<()> {
        match seq.iter().find(|&&t| !self.contains(t)) {
            Some(&t) => Err(Error::AlphabetMismatch { token: t, size: self.len() }),
            None => Ok(()),
        }
    }

    /// Comma-separated rendering, the sequence text format.
    pub fn render_seq(&self, seq: &[Token]) -> Result<String> {
        let parts = seq.iter().map(|&t| self.render(t)).collect::<Result<Vec<_>>>()?;
        Ok(parts.join(","))
    }

    /// Inverse of [`Alphabet::render_seq`]; an empty line is the empty sequence.
    pub fn parse_seq(&self, line: &str) -> Result<TokenSeq> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(TokenSeq::new());
        }
        line.split(',').map(|p| self.parse_token(p)).collect::<Result<Vec<_>>>().map(TokenSeq)
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> {
        0..self.symbols.len() as Token
    }
}

/// A finite token sequence.
///
/// Indexing follows 1-based positions: `at(1)` is the first token and `at(-1)`
/// the last. Slices are inclusive on both ends.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn new() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Token] {
        &self.0
    }

    /// Maps a non-zero 1-based or negative index to a 0-based offset.
    fn offset(&self, i: isize) -> Option<usize> {
        let n = self.len() as isize;
        let p = if i > 0 { i } else if i < 0 { n + i + 1 } else { return None };
        (1..=n).contains(&p).then(|| (p - 1) as usize)
    }

    /// `s[i]`, with `s[-1]` the last token.
    pub fn at(&self, i: isize) -> Option<Token> {
        self.offset(i).map(|o| self.0[o])
    }

    /// Inclusive slice `s[start:end]`; `None` extends to the beginning or end.
    ///
    /// An end position just before the first token yields the empty slice, so
    /// `s[:-k]` is defined for every `k ≤ |s|+1`.
    pub fn slice(&self, start: Option<isize>, end: Option<isize>) -> Result<TokenSeq> {
        let n = self.len() as isize;
        let resolve = |i: isize| if i < 0 { n + i + 1 } else { i };
        let lo = match start {
            None => 1,
            Some(0) => return Err(Error::SliceOutOfRange(0)),
            Some(i) => resolve(i),
        };
        let hi = match end {
            None => n,
            Some(0) => return Err(Error::SliceOutOfRange(0)),
            Some(j) => resolve(j),
        };
        if lo < 1 || lo > n + 1 {
            return Err(Error::SliceOutOfRange(start.unwrap_or(1)));
        }
        if hi < 0 || hi > n {
            return Err(Error::SliceOutOfRange(end.unwrap_or(n)));
        }
        if hi < lo {
            return Ok(TokenSeq::new());
        }
        Ok(TokenSeq(self.0[(lo - 1) as usize..hi as usize].to_vec()))
    }

    /// Returns a copy with `t` appended.
    pub fn appended(&self, t: Token) -> TokenSeq {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(t);
        TokenSeq(v)
    }

    pub fn push(&mut self, t: Token) {
        self.0.push(t);
    }
}

impl From<Vec<Token>> for TokenSeq {
    fn from(v: Vec<Token>) -> Self {
        TokenSeq(v)
    }
}

impl From<&[Token]> for TokenSeq {
    fn from(v: &[Token]) -> Self {
        TokenSeq(v.to_vec())
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// A next-token generator `f: Σ* → Σ`.
pub trait NextToken {
    fn alphabet(&self) -> &Alphabet;

    /// Evaluates `f(x)`. Implementations may assume `x` is over [`NextToken::alphabet`].
    fn next_token(&self, x: &[Token]) -> Result<Token>;
}

impl<G: NextToken + ?Sized> NextToken for &G {
    fn alphabet(&self) -> &Alphabet {
        (**self).alphabet()
    }
    fn next_token(&self, x: &[Token]) -> Result<Token> {
        (**self).next_token(x)
    }
}

impl<G: NextToken + ?Sized> NextToken for Box<G> {
    fn alphabet(&self) -> &Alphabet {
        (**self).alphabet()
    }
    fn next_token(&self, x: &[Token]) -> Result<Token> {
        (**self).next_token(x)
    }
}

/// The parameterized base classes a generator can come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    LinearThreshold(LinearThreshold),
    SparseLinearThreshold(SparseLinearThreshold),
    TmTransition(TmGenerator),
    LookupMember(LookupMember),
}

impl NextToken for Generator {
    fn alphabet(&self) -> &Alphabet {
        match self {
            Generator::LinearThreshold(g) => g.alphabet(),
            Generator::SparseLinearThreshold(g) => g.alphabet(),
            Generator::TmTransition(g) => g.alphabet(),
            Generator::LookupMember(g) => g.alphabet(),
        }
    }

    fn next_token(&self, x: &[Token]) -> Result<Token> {
        match self {
            Generator::LinearThreshold(g) => g.next_token(x),
            Generator::SparseLinearThreshold(g) => g.next_token(x),
            Generator::TmTransition(g) => g.next_token(x),
            Generator::LookupMember(g) => g.next_token(x),
        }
    }
}

/// Always emits the same token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantGenerator {
    pub alphabet: Alphabet,
    pub token: Token,
}

impl ConstantGenerator {
    pub fn new(alphabet: Alphabet, token: Token) -> Result<Self> {
        if !alphabet.contains(token) {
            return Err(Error::AlphabetMismatch { token, size: alphabet.len() });
        }
        Ok(ConstantGenerator { alphabet, token })
    }
}

impl NextToken for ConstantGenerator {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn next_token(&self, _x: &[Token]) -> Result<Token> {
        Ok(self.token)
    }
}

fn emit<G: NextToken + ?Sized>(f: &G, x: &[Token]) -> Result<Token> {
    let t = f.next_token(x)?;
    let a = f.alphabet();
    if !a.contains(t) {
        return Err(Error::AlphabetMismatch { token: t, size: a.len() });
    }
    Ok(t)
}

/// `x ↦ append(x, f(x))`.
pub fn apply_and_append<G: NextToken + ?Sized>(f: &G, x: &TokenSeq) -> Result<TokenSeq> {
    f.alphabet().check(x.as_slice())?;
    Ok(x.appended(emit(f, x.as_slice())?))
}

/// The `T`-step chain of thought: `x` followed by the `T` generated tokens.
pub fn cot<G: NextToken + ?Sized>(f: &G, x: &TokenSeq, steps: usize) -> Result<TokenSeq> {
    if steps == 0 {
        return Err(Error::ZeroSteps);
    }
    f.alphabet().check(x.as_slice())?;
    let mut z = Vec::with_capacity(x.len() + steps);
    z.extend_from_slice(x.as_slice());
    for _ in 0..steps {
        let t = emit(f, &z)?;
        z.push(t);
    }
    Ok(TokenSeq(z))
}

/// Final token of [`cot`].
pub fn e2e<G: NextToken + ?Sized>(f: &G, x: &TokenSeq, steps: usize) -> Result<Token> {
    let z = cot(f, x, steps)?;
    Ok(*z.0.last().expect("steps >= 1"))
}

/// Applies `fs[0]`, then `fs[1]`, ..., appending each output.
pub fn cot_time_dependent<G: NextToken>(fs: &[G], x: &TokenSeq) -> Result<TokenSeq> {
    let first = fs.first().ok_or(Error::EmptyGeneratorList)?;
    let alphabet = first.alphabet();
    if let Some(g) = fs.iter().find(|g| g.alphabet() != alphabet) {
        return Err(Error::Invalid(format!(
            "generators disagree on alphabet ({} vs {} tokens)",
            alphabet.len(),
            g.alphabet().len()
        )));
    }
    alphabet.check(x.as_slice())?;
    let mut z = x.0.clone();
    for f in fs {
        let t = emit(f, &z)?;
        z.push(t);
    }
    Ok(TokenSeq(z))
}

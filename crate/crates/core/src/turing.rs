//! Runtime-bounded Turing machines and the transition-replaying generator class.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::learning::{
    cons_cot, cons_e2e, ConsistencyOracle, CoTDataset, E2EDataset, EnumerableFamily, Learner, PrefixDataset,
};
use crate::seqcore::{Alphabet, NextToken, Token, TokenSeq};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Zero,
    One,
    Blank,
}

impl Symbol {
    pub const ALL: [Symbol; 3] = [Symbol::Zero, Symbol::One, Symbol::Blank];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_bit(b: bool) -> Symbol {
        if b {
            Symbol::One
        } else {
            Symbol::Zero
        }
    }

    pub fn as_bit(self) -> Option<bool> {
        match self {
            Symbol::Zero => Some(false),
            Symbol::One => Some(true),
            Symbol::Blank => None,
        }
    }

    pub fn render(self) -> &'static str {
        match self {
            Symbol::Zero => "0",
            Symbol::One => "1",
            Symbol::Blank => "_",
        }
    }

    pub fn parse(s: &str) -> Result<Symbol> {
        match s {
            "0" => Ok(Symbol::Zero),
            "1" => Ok(Symbol::One),
            "_" | "⊔" => Ok(Symbol::Blank),
            other => Err(Error::Parse(format!("bad tape symbol {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Left,
    Stay,
    Right,
}

impl Move {
    pub const ALL: [Move; 3] = [Move::Left, Move::Stay, Move::Right];

    pub fn delta(self) -> i64 {
        match self {
            Move::Left => -1,
            Move::Stay => 0,
            Move::Right => 1,
        }
    }

    pub fn render(self) -> &'static str {
        match self {
            Move::Left => "-1",
            Move::Stay => "0",
            Move::Right => "+1",
        }
    }

    pub fn parse(s: &str) -> Result<Move> {
        match s {
            "-1" => Ok(Move::Left),
            "0" => Ok(Move::Stay),
            "+1" | "1" => Ok(Move::Right),
            other => Err(Error::Parse(format!("bad head move {other:?}"))),
        }
    }
}

/// One element of `[S] × {0,1,⊔} × {−1,0,+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TmToken {
    pub state: u32,
    pub symb: Symbol,
    pub mv: Move,
}

impl TmToken {
    pub fn new(state: u32, symb: Symbol, mv: Move) -> Self {
        TmToken { state, symb, mv }
    }

    /// Flat index `((state−1)·3 + symb)·3 + move`.
    pub fn encode(self) -> Token {
        ((self.state - 1) * 3 + self.symb.index() as u32) * 3 + self.mv as u32
    }

    pub fn decode(t: Token, states: u32) -> Result<TmToken> {
        if t >= 9 * states {
            return Err(Error::AlphabetMismatch { token: t, size: 9 * states as usize });
        }
        Ok(TmToken {
            state: t / 9 + 1,
            symb: Symbol::ALL[((t / 3) % 3) as usize],
            mv: Move::ALL[(t % 3) as usize],
        })
    }

    pub fn parse(s: &str) -> Result<TmToken> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [st, sy, mv] = parts[..] else {
            return Err(Error::Parse(format!("TM token {s:?} is not s:a:b")));
        };
        let state: u32 = st.parse().map_err(|_| Error::Parse(format!("bad state in {s:?}")))?;
        if state == 0 {
            return Err(Error::Parse("states are 1-indexed".into()));
        }
        Ok(TmToken { state, symb: Symbol::parse(sy)?, mv: Move::parse(mv)? })
    }
}

impl fmt::Display for TmToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.state, self.symb.render(), self.mv.render())
    }
}

/// The `9S`-token alphabet, index-compatible with [`TmToken::encode`].
pub fn tm_alphabet(states: u32) -> Alphabet {
    let names = (0..9 * states).map(|t| TmToken::decode(t, states).expect("in range").to_string());
    Alphabet::new(names).expect("distinct renderings")
}

pub fn decode_seq(z: &[Token], states: u32) -> Result<Vec<TmToken>> {
    z.iter().map(|&t| TmToken::decode(t, states)).collect()
}

pub fn encode_seq(z: &[TmToken]) -> TokenSeq {
    TokenSeq(z.iter().map(|t| t.encode()).collect())
}

fn table_index(state: u32, read: Symbol) -> usize {
    (state as usize - 1) * 3 + read.index()
}

fn check_table(states: u32, table: &[TmToken]) -> Result<()> {
    if states == 0 {
        return Err(Error::Invalid("a machine needs at least one state".into()));
    }
    if table.len() != 3 * states as usize {
        return Err(Error::Invalid(format!("expected {} transitions, got {}", 3 * states, table.len())));
    }
    for t in table {
        if t.state == 0 || t.state > states {
            return Err(Error::Invalid(format!("transition target state {} outside 1..={states}", t.state)));
        }
        if t.symb == Symbol::Blank {
            return Err(Error::Invalid("transitions must write 0 or 1".into()));
        }
    }
    Ok(())
}

/// `⟨S, T, τ⟩`, with `τ` stored row-major over `(state, read)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TmSpec {
    states: u32,
    steps: usize,
    table: Vec<TmToken>,
}

impl TmSpec {
    pub fn new(states: u32, steps: usize, table: Vec<TmToken>) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroSteps);
        }
        check_table(states, &table)?;
        Ok(TmSpec { states, steps, table })
    }

    /// Every entry maps to the same token.
    pub fn uniform(states: u32, steps: usize, to: TmToken) -> Result<Self> {
        TmSpec::new(states, steps, vec![to; 3 * states as usize])
    }

    pub fn random<R: Rng + ?Sized>(states: u32, steps: usize, rng: &mut R) -> Self {
        let table = (0..3 * states)
            .map(|_| TmToken {
                state: rng.gen_range(1..=states),
                symb: Symbol::from_bit(rng.gen()),
                mv: Move::ALL[rng.gen_range(0..3)],
            })
            .collect();
        TmSpec::new(states, steps, table).expect("valid by construction")
    }

    pub fn states(&self) -> u32 {
        self.states
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn table(&self) -> &[TmToken] {
        &self.table
    }

    pub fn tau(&self, state: u32, read: Symbol) -> TmToken {
        self.table[table_index(state, read)]
    }

    pub fn generator(&self) -> TmGenerator {
        TmGenerator::new(self.states, self.table.clone()).expect("validated table")
    }

    /// Header `"S T"`, then `"s r -> s' a b"` for each entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.states, self.steps);
        for s in 1..=self.states {
            for r in Symbol::ALL {
                let t = self.tau(s, r);
                out.push_str(&format!("{s} {} -> {} {} {}\n", r.render(), t.state, t.symb.render(), t.mv.render()));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("missing \"S T\" header".into()))?;
        let hv: Vec<&str> = header.split_whitespace().collect();
        let [s, t] = hv[..] else {
            return Err(Error::Parse(format!("header {header:?} is not \"S T\"")));
        };
        let states: u32 = s.parse().map_err(|_| Error::Parse(format!("bad state count {s:?}")))?;
        let steps: usize = t.parse().map_err(|_| Error::Parse(format!("bad step count {t:?}")))?;
        if states == 0 {
            return Err(Error::Parse("state count must be positive".into()));
        }
        let mut table: Vec<Option<TmToken>> = vec![None; 3 * states as usize];
        for (no, line) in lines {
            let bad = || Error::Parse(format!("line {}: expected \"s r -> s' a b\", got {line:?}", no + 1));
            let (lhs, rhs) = line.split_once("->").ok_or_else(bad)?;
            let l: Vec<&str> = lhs.split_whitespace().collect();
            let r: Vec<&str> = rhs.split_whitespace().collect();
            let ([ls, lr], [rs, ra, rb]) = (&l[..], &r[..]) else { return Err(bad()) };
            let from: u32 = ls.parse().map_err(|_| bad())?;
            let to: u32 = rs.parse().map_err(|_| bad())?;
            if from == 0 || from > states || to == 0 || to > states {
                return Err(Error::Parse(format!("line {}: state outside 1..={states}", no + 1)));
            }
            let read = Symbol::parse(lr)?;
            let write = Symbol::parse(ra)?;
            if write == Symbol::Blank {
                return Err(Error::Parse(format!("line {}: transitions must write 0 or 1", no + 1)));
            }
            let slot = &mut table[table_index(from, read)];
            if slot.is_some() {
                return Err(Error::Parse(format!("line {}: duplicate entry for ({from}, {lr})", no + 1)));
            }
            *slot = Some(TmToken::new(to, write, Move::parse(rb)?));
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or_else(|| {
                    Error::Parse(format!("missing entry for ({}, {})", i / 3 + 1, Symbol::ALL[i % 3].render()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TmSpec::new(states, steps, table).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub state: u32,
    pub write: Symbol,
    pub mv: Move,
    /// Head position after the move.
    pub pos: i64,
    pub read: Symbol,
}

impl TraceStep {
    pub fn token(&self) -> TmToken {
        TmToken::new(self.state, self.write, self.mv)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TmTrace {
    pub initial_state: u32,
    pub initial_pos: i64,
    pub steps: Vec<TraceStep>,
}

/// Runs the machine for `T` steps with `ω` on cells `1..=|ω|` and the head on `|ω|+1`.
pub fn simulate_tm(spec: &TmSpec, omega: &[bool]) -> (bool, TmTrace) {
    let mut tape: HashMap<i64, Symbol> =
        omega.iter().enumerate().map(|(i, &b)| (i as i64 + 1, Symbol::from_bit(b))).collect();
    let mut state = 1;
    let mut pos = omega.len() as i64 + 1;
    let mut trace = TmTrace { initial_state: state, initial_pos: pos, steps: Vec::with_capacity(spec.steps) };
    for _ in 0..spec.steps {
        let read = tape.get(&pos).copied().unwrap_or(Symbol::Blank);
        let t = spec.tau(state, read);
        tape.insert(pos, t.symb);
        pos += t.mv.delta();
        state = t.state;
        trace.steps.push(TraceStep { state, write: t.symb, mv: t.mv, pos, read });
    }
    let out = trace.steps.last().and_then(|s| s.write.as_bit()).expect("T ≥ 1 and τ writes bits");
    (out, trace)
}

/// `(z[N].state, symbol under the head after z[N]'s move)`, plus the number of
/// token visits made.
pub fn read_tape_counted(z: &[TmToken]) -> Result<((u32, Symbol), usize)> {
    let last = z.last().ok_or(Error::EmptySequence)?;
    let mut visits = 0;
    let mut pos = Vec::with_capacity(z.len());
    let mut acc = 0i64;
    for t in z {
        pos.push(acc);
        acc += t.mv.delta();
        visits += 1;
    }
    let npos = acc;
    let mut read = Symbol::Blank;
    for j in (0..z.len()).rev() {
        visits += 1;
        if pos[j] == npos {
            read = z[j].symb;
            break;
        }
    }
    Ok(((last.state, read), visits))
}

/// Recovers the current state and the symbol under the head from a history.
pub fn read_tape(z: &[TmToken]) -> Result<(u32, Symbol)> {
    read_tape_counted(z).map(|(r, _)| r)
}

/// Same result as [`read_tape`], computed from a last-writer map.
pub fn read_tape_indexed(z: &[TmToken]) -> Result<(u32, Symbol)> {
    let last = z.last().ok_or(Error::EmptySequence)?;
    let mut cells: HashMap<i64, Symbol> = HashMap::new();
    let mut pos = 0i64;
    for t in z {
        cells.insert(pos, t.symb);
        pos += t.mv.delta();
    }
    Ok((last.state, cells.get(&pos).copied().unwrap_or(Symbol::Blank)))
}

/// `f_τ(z) = τ(read_tape(z))` over the `9S`-token alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TmGenerator {
    states: u32,
    table: Vec<TmToken>,
    alphabet: Alphabet,
}

impl TmGenerator {
    pub fn new(states: u32, table: Vec<TmToken>) -> Result<Self> {
        check_table(states, &table)?;
        Ok(TmGenerator { states, table, alphabet: tm_alphabet(states) })
    }

    pub fn states(&self) -> u32 {
        self.states
    }

    pub fn table(&self) -> &[TmToken] {
        &self.table
    }

    pub fn tau(&self, state: u32, read: Symbol) -> TmToken {
        self.table[table_index(state, read)]
    }

    pub fn to_spec(&self, steps: usize) -> Result<TmSpec> {
        TmSpec::new(self.states, steps, self.table.clone())
    }

    pub fn apply(&self, z: &[TmToken]) -> Result<TmToken> {
        let (s, r) = read_tape(z)?;
        if s > self.states {
            return Err(Error::Invalid(format!("state {s} outside 1..={}", self.states)));
        }
        Ok(self.tau(s, r))
    }
}

impl NextToken for TmGenerator {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn next_token(&self, x: &[Token]) -> Result<Token> {
        Ok(self.apply(&decode_seq(x, self.states)?)?.encode())
    }
}

/// `(1,⊔,+1)` followed by `(1, ω_i, +1)` for each input bit.
pub fn pre(omega: &[bool]) -> Vec<TmToken> {
    std::iter::once(TmToken::new(1, Symbol::Blank, Move::Right))
        .chain(omega.iter().map(|&b| TmToken::new(1, Symbol::from_bit(b), Move::Right)))
        .collect()
}

pub fn pre_tokens(omega: &[bool]) -> TokenSeq {
    encode_seq(&pre(omega))
}

pub fn post(x: TmToken) -> Result<bool> {
    x.symb.as_bit().ok_or(Error::BlankOutput)
}

/// Table entry used for `(state, read)` pairs the data never constrains.
pub const DEFAULT_ENTRY: TmToken = TmToken { state: 1, symb: Symbol::Zero, mv: Move::Stay };

/// Fills `τ̂(read_tape(u_i)) = v_i`, failing on conflicting requirements.
pub fn cons_tm(data: &PrefixDataset, states: u32) -> Result<TmGenerator> {
    if states == 0 {
        return Err(Error::Invalid("a machine needs at least one state".into()));
    }
    let n = 3 * states as usize;
    let mut table: Vec<Option<TmToken>> = vec![None; n];
    for (u, v) in data.pairs() {
        let u = u.as_slice();
        let hist = u
            .iter()
            .map(|&t| {
                TmToken::decode(t, states)
                    .map_err(|_| Error::Invalid(format!("token {t} encodes a state beyond S = {states}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = TmToken::decode(*v, states)
            .map_err(|_| Error::Invalid(format!("label {v} encodes a state beyond S = {states}")))?;
        if label.symb == Symbol::Blank {
            return Err(Error::Invalid("labels must write 0 or 1".into()));
        }
        let (s, r) = read_tape(&hist)?;
        let slot = &mut table[table_index(s, r)];
        match slot {
            Some(prev) if *prev != label => {
                return Err(Error::NotRealizable(format!(
                    "τ({s}, {}) is required to be both {prev} and {label}",
                    r.render()
                )))
            }
            _ => *slot = Some(label),
        }
    }
    TmGenerator::new(states, table.into_iter().map(|t| t.unwrap_or(DEFAULT_ENTRY)).collect())
}

/// `F_TM,S`: all `(6S)^{3S}` transition tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TmFamily {
    pub states: u32,
}

impl TmFamily {
    fn options(&self) -> u128 {
        6 * self.states as u128
    }
}

impl ConsistencyOracle for TmFamily {
    type Hypothesis = TmGenerator;

    fn solve(&self, data: &PrefixDataset) -> Result<TmGenerator> {
        cons_tm(data, self.states)
    }
}

impl EnumerableFamily for TmFamily {
    type Member = TmGenerator;

    fn size(&self) -> Result<u128> {
        self.options()
            .checked_pow(3 * self.states)
            .ok_or_else(|| Error::NotEnumerable("transition-table count overflows".into()))
    }

    /// Mixed radix over entries, first entry most significant; each entry
    /// enumerates `(state, write, move)` lexicographically.
    fn member(&self, index: u128) -> Result<TmGenerator> {
        let size = self.size()?;
        if index >= size {
            return Err(Error::Invalid(format!("member index {index} ≥ {size}")));
        }
        let n = 3 * self.states as usize;
        let mut table = vec![DEFAULT_ENTRY; n];
        let mut rest = index;
        for slot in table.iter_mut().rev() {
            let o = (rest % self.options()) as u32;
            rest /= self.options();
            *slot = TmToken::new(o / 6 + 1, Symbol::from_bit((o / 3) % 2 == 1), Move::ALL[(o % 3) as usize]);
        }
        TmGenerator::new(self.states, table)
    }
}

impl Learner for TmFamily {
    type Member = TmGenerator;

    fn learn_cot(&self, data: &CoTDataset) -> Result<TmGenerator> {
        cons_cot(data, self)
    }

    fn learn_e2e(&self, data: &E2EDataset) -> Result<TmGenerator> {
        cons_e2e(data, self)
    }
}

//! Causal average hard attention and an attention-only tape reader.
//!
//! Scores and values are exact rationals over `i64`. Histories are capped at
//! [`MAX_HISTORY`] tokens, which keeps every intermediate (squared positions
//! times position indices) far inside the `i64` range.

use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::seqcore::cot;
use crate::turing::{decode_seq, post, pre, pre_tokens, simulate_tm, Symbol, TmSpec, TmToken};
use crate::{Error, Result};

pub type Q = Ratio<i64>;

pub const MAX_HISTORY: usize = 100_000;

/// Queries, keys and values for one causal attention call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionBatch {
    pub q: Vec<Vec<Q>>,
    pub k: Vec<Vec<Q>>,
    pub v: Vec<Vec<Q>>,
}

impl AttentionBatch {
    pub fn new(q: Vec<Vec<Q>>, k: Vec<Vec<Q>>, v: Vec<Vec<Q>>) -> Result<Self> {
        if q.len() != k.len() || k.len() != v.len() {
            return Err(Error::Invalid("q, k and v must have equal length".into()));
        }
        let uniform = |rows: &[Vec<Q>]| rows.windows(2).all(|w| w[0].len() == w[1].len());
        if !uniform(&q) || !uniform(&k) || !uniform(&v) {
            return Err(Error::Invalid("rows must have uniform width".into()));
        }
        if q.first().zip(k.first()).is_some_and(|(a, b)| a.len() != b.len()) {
            return Err(Error::Invalid("queries and keys must have equal width".into()));
        }
        Ok(AttentionBatch { q, k, v })
    }

    /// Zero queries and keys of width 1 with the given scalar values.
    pub fn uniform(values: Vec<Q>) -> Self {
        let n = values.len();
        AttentionBatch {
            q: vec![vec![Q::zero()]; n],
            k: vec![vec![Q::zero()]; n],
            v: values.into_iter().map(|x| vec![x]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// Result of attending from one query position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attended {
    pub best_score: Q,
    /// 1-based positions achieving the best score.
    pub argmax: Vec<usize>,
    pub output: Vec<Q>,
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

/// Averages `values[j]` over the argmax of `⟨query, keys[j]⟩`.
pub fn attend(query: &[Q], keys: &[Vec<Q>], values: &[Vec<Q>]) -> Attended {
    let mut best: Option<Q> = None;
    let mut argmax = Vec::new();
    for (j, key) in keys.iter().enumerate() {
        let s = dot(query, key);
        match &best {
            Some(b) if s < *b => {}
            Some(b) if s == *b => argmax.push(j + 1),
            _ => {
                best = Some(s);
                argmax.clear();
                argmax.push(j + 1);
            }
        }
    }
    let width = values.first().map_or(0, Vec::len);
    let mut output = vec![Q::zero(); width];
    for &j in &argmax {
        for (o, x) in output.iter_mut().zip(&values[j - 1]) {
            *o += x;
        }
    }
    let m = Q::from_integer(argmax.len().max(1) as i64);
    output.iter_mut().for_each(|o| *o /= m);
    Attended { best_score: best.unwrap_or_else(Q::zero), argmax, output }
}

/// Attention from position `i` (1-based) over positions `1..=i`.
pub fn attend_at(batch: &AttentionBatch, i: usize) -> Attended {
    attend(&batch.q[i - 1], &batch.k[..i], &batch.v[..i])
}

/// `output[i]` for every position.
///
/// A zero query scores every key 0, so the argmax is the whole prefix and the
/// output is a running average; that case skips the score loop.
pub fn aha(batch: &AttentionBatch) -> Vec<Vec<Q>> {
    let width = batch.v.first().map_or(0, Vec::len);
    let mut running = vec![Q::zero(); width];
    let mut out = Vec::with_capacity(batch.len());
    for i in 1..=batch.len() {
        for (r, x) in running.iter_mut().zip(&batch.v[i - 1]) {
            *r += x;
        }
        if batch.q[i - 1].iter().all(Zero::is_zero) {
            let n = Q::from_integer(i as i64);
            out.push(running.iter().map(|r| r / n).collect());
        } else {
            out.push(attend_at(batch, i).output);
        }
    }
    out
}

/// Per-position positions recovered by uniform attention.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TapeView {
    pub moves: Vec<i64>,
    pub pos: Vec<Q>,
    pub npos: Vec<Q>,
    pub idx_inv: Vec<Q>,
}

impl TapeView {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    /// The view of `z[:n]`; causal attention makes this a plain truncation.
    pub fn prefix(&self, n: usize) -> TapeView {
        TapeView {
            moves: self.moves[..n].to_vec(),
            pos: self.pos[..n].to_vec(),
            npos: self.npos[..n].to_vec(),
            idx_inv: self.idx_inv[..n].to_vec(),
        }
    }
}

fn check_history(z: &[TmToken]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::EmptySequence);
    }
    if z.len() > MAX_HISTORY {
        return Err(Error::Guard(format!("history of {} tokens exceeds {MAX_HISTORY}", z.len())));
    }
    if z[0].symb != Symbol::Blank {
        return Err(Error::NotPreRooted("first token must carry the blank symbol".into()));
    }
    if let Some(i) = z.iter().skip(1).position(|t| t.symb == Symbol::Blank) {
        return Err(Error::NotPreRooted(format!("blank symbol at position {}", i + 2)));
    }
    Ok(())
}

/// `idx-inv = aha(0,0,is-first)`, `npos = aha(0,0,move) / idx-inv`, `pos = npos − move`.
pub fn positions_via_attention(z: &[TmToken]) -> Result<TapeView> {
    check_history(z)?;
    let is_first: Vec<Q> = z.iter().map(|t| Q::from_integer((t.symb == Symbol::Blank) as i64)).collect();
    let moves: Vec<i64> = z.iter().map(|t| t.mv.delta()).collect();
    let idx_inv: Vec<Q> = aha(&AttentionBatch::uniform(is_first)).into_iter().map(|r| r[0]).collect();
    let scaled: Vec<Q> =
        aha(&AttentionBatch::uniform(moves.iter().map(|&m| Q::from_integer(m)).collect()))
            .into_iter()
            .map(|r| r[0])
            .collect();
    let npos: Vec<Q> = scaled.iter().zip(&idx_inv).map(|(s, i)| s / i).collect();
    let pos: Vec<Q> = npos.iter().zip(&moves).map(|(n, &m)| n - Q::from_integer(m)).collect();
    for (i, (p, inv)) in pos.iter().zip(&idx_inv).enumerate() {
        if !p.is_integer() || *inv != Q::new(1, i as i64 + 1) {
            return Err(Error::Invariant(format!("position {} is not recovered exactly", i + 1)));
        }
    }
    Ok(TapeView { moves, pos, npos, idx_inv })
}

fn one_hot(s: Symbol) -> Vec<Q> {
    let mut v = vec![Q::zero(); 3];
    v[s.index()] = Q::one();
    v
}

/// Lookup result plus the attention details that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lookup {
    pub read: Symbol,
    pub attended: Attended,
    /// Whether some position `j ≥ 2` wrote the cell under the head.
    pub matched: bool,
}

/// Reads the symbol under the head after `z[N]` with one attention query.
pub fn lookup_via_attention(view: &TapeView, z: &[TmToken]) -> Result<Lookup> {
    let n = z.len();
    if view.len() != n || n == 0 {
        return Err(Error::Invalid("view does not match the history length".into()));
    }
    for (i, tok) in z.iter().enumerate() {
        if view.moves[i] != tok.mv.delta()
            || view.npos[i] - view.pos[i] != Q::from_integer(view.moves[i])
            || view.idx_inv[i] != Q::new(1, i as i64 + 1)
        {
            return Err(Error::Invalid(format!("view is inconsistent at position {}", i + 1)));
        }
    }
    let np = view.npos[n - 1];
    let query = vec![-(np * np), np, -Q::one(), -Q::one()];
    let mut keys = Vec::with_capacity(n);
    keys.push(vec![Q::zero(), Q::zero(), Q::zero(), view.idx_inv[0]]);
    for j in 1..n {
        let p = view.pos[j];
        keys.push(vec![Q::from_integer(2), p * 4, p * p * 2, view.idx_inv[j]]);
    }
    for (j, key) in keys.iter().enumerate() {
        let want = if j == 0 {
            -Q::one()
        } else {
            let d = np - view.pos[j];
            -(d * d * 2) - view.idx_inv[j]
        };
        if dot(&query, key) != want {
            return Err(Error::Invariant(format!("score at position {} deviates from its closed form", j + 1)));
        }
    }
    let values: Vec<Vec<Q>> = z.iter().map(|t| one_hot(t.symb)).collect();
    let attended = attend(&query, &keys, &values);
    let last_match = (1..n).rev().find(|&j| view.pos[j] == np);
    if let Some(j) = last_match {
        if attended.argmax != [j + 1] {
            return Err(Error::Invariant(format!(
                "argmax {:?} is not the singleton {{{}}}",
                attended.argmax,
                j + 1
            )));
        }
    } else if attended.argmax != [1] {
        return Err(Error::Invariant(format!("argmax {:?} should be {{1}} with no match", attended.argmax)));
    }
    let read = Symbol::ALL
        .into_iter()
        .find(|&s| attended.output == one_hot(s))
        .ok_or_else(|| Error::Invariant("attention output is not a single symbol".into()))?;
    Ok(Lookup { read, attended, matched: last_match.is_some() })
}

/// `(z[N].state, read)` computed with attention only.
pub fn read_tape_attention(z: &[TmToken]) -> Result<(u32, Symbol)> {
    let view = positions_via_attention(z)?;
    let lookup = lookup_via_attention(&view, z)?;
    Ok((z[z.len() - 1].state, lookup.read))
}

/// [`read_tape_attention`] for every prefix `z[:N]`, sharing one position pass.
pub fn read_tape_attention_prefixes(z: &[TmToken]) -> Result<Vec<Lookup>> {
    let view = positions_via_attention(z)?;
    (1..=z.len()).map(|n| lookup_via_attention(&view.prefix(n), &z[..n])).collect()
}

/// TSV with one row per prefix: i, move, pos, npos, idx-inv, best-score, argmax-set.
pub fn debug_dump(z: &[TmToken]) -> Result<String> {
    let view = positions_via_attention(z)?;
    let lookups = read_tape_attention_prefixes(z)?;
    let mut out = String::from("i\tmove\tpos\tnpos\tidx_inv\tbest_score\targmax\tread\n");
    for (i, l) in lookups.iter().enumerate() {
        let set: Vec<String> = l.attended.argmax.iter().map(usize::to_string).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{{{}}}\t{}\n",
            i + 1,
            view.moves[i],
            view.pos[i],
            view.npos[i],
            view.idx_inv[i],
            l.attended.best_score,
            set.join(","),
            l.read.render()
        ));
    }
    Ok(out)
}

/// How `simulate_via` produces the output bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Via {
    /// The reference tape machine.
    Direct,
    /// Iterating the transition generator on `Pre(ω)`.
    Autoregressive,
    /// The same loop with the tape read done by attention.
    Attention,
}

impl Via {
    pub const ALL: [Via; 3] = [Via::Direct, Via::Autoregressive, Via::Attention];
}

impl std::fmt::Display for Via {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Via::Direct => "direct",
            Via::Autoregressive => "autoregressive",
            Via::Attention => "attention",
        })
    }
}

impl std::str::FromStr for Via {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Via::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Parse(format!("unknown route {s:?}")))
    }
}

/// `Pre(ω)` followed by `T` generated tokens, reading the tape by attention.
pub fn run_with_attention(spec: &TmSpec, omega: &[bool]) -> Result<Vec<TmToken>> {
    let mut z = pre(omega);
    for _ in 0..spec.steps() {
        let (s, r) = read_tape_attention(&z)?;
        z.push(spec.tau(s, r));
    }
    Ok(z)
}

/// Full token history produced by `via` (the direct route renders its trace).
pub fn history_via(spec: &TmSpec, omega: &[bool], via: Via) -> Result<Vec<TmToken>> {
    match via {
        Via::Direct => {
            let (_, trace) = simulate_tm(spec, omega);
            Ok(pre(omega).into_iter().chain(trace.steps.iter().map(|s| s.token())).collect())
        }
        Via::Autoregressive => {
            let z = cot(&spec.generator(), &pre_tokens(omega), spec.steps())?;
            decode_seq(z.as_slice(), spec.states())
        }
        Via::Attention => run_with_attention(spec, omega),
    }
}

/// Output bit `Post` of the last token along `via`.
pub fn simulate_via(spec: &TmSpec, omega: &[bool], via: Via) -> Result<bool> {
    let z = history_via(spec, omega, via)?;
    post(*z.last().ok_or(Error::EmptySequence)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turing::read_tape;

    fn q(n: i64) -> Q {
        Q::from_integer(n)
    }

    fn tok(s: &str) -> TmToken {
        TmToken::parse(s).unwrap()
    }

    #[test]
    fn aha_examples() {
        let b = AttentionBatch::uniform(vec![q(1), q(0), q(0)]);
        assert_eq!(aha(&b)[2], vec![Q::new(1, 3)]);

        let b = AttentionBatch::new(
            vec![vec![q(0)], vec![q(1)]],
            vec![vec![q(0)], vec![q(1)]],
            vec![vec![q(5)], vec![q(7)]],
        )
        .unwrap();
        assert_eq!(aha(&b)[1], vec![q(7)]);

        let b = AttentionBatch::new(
            vec![vec![q(0)], vec![q(0)]],
            vec![vec![q(1)], vec![q(1)]],
            vec![vec![q(4)], vec![q(8)]],
        )
        .unwrap();
        assert_eq!(aha(&b)[1], vec![q(6)]);
        assert_eq!(attend_at(&b, 2).argmax, vec![1, 2]);
    }

    #[test]
    fn zero_query_fast_path_matches_scores() {
        let vals: Vec<Q> = [3, -1, 4, 1, -5, 9].iter().map(|&x| q(x)).collect();
        let b = AttentionBatch::uniform(vals);
        let fast = aha(&b);
        for i in 1..=b.len() {
            assert_eq!(fast[i - 1], attend_at(&b, i).output);
        }
    }

    #[test]
    fn batch_validation() {
        assert!(AttentionBatch::new(vec![vec![q(0)]], vec![], vec![]).is_err());
        assert!(AttentionBatch::new(vec![vec![q(0)]], vec![vec![q(0), q(1)]], vec![vec![q(0)]]).is_err());
    }

    #[test]
    fn positions_examples() {
        let v = positions_via_attention(&pre(&[false, true])).unwrap();
        assert_eq!(v.npos, vec![q(1), q(2), q(3)]);
        assert_eq!(v.pos, vec![q(0), q(1), q(2)]);
        assert_eq!(v.idx_inv, vec![q(1), Q::new(1, 2), Q::new(1, 3)]);
        assert!(matches!(positions_via_attention(&[tok("1:0:+1")]), Err(Error::NotPreRooted(_))));
        assert!(matches!(
            positions_via_attention(&[tok("1:_:+1"), tok("1:_:0")]),
            Err(Error::NotPreRooted(_))
        ));
    }

    #[test]
    fn lookup_examples() {
        let z = [tok("1:_:+1"), tok("1:0:0")];
        assert_eq!(read_tape_attention(&z).unwrap(), (1, Symbol::Zero));
        assert_eq!(read_tape_attention(&z).unwrap(), read_tape(&z).unwrap());
        assert_eq!(read_tape_attention(&pre(&[true, false])).unwrap(), (1, Symbol::Blank));
        assert_eq!(read_tape_attention(&[tok("2:_:-1")]).unwrap(), (2, Symbol::Blank));
        // Head walks back over two written cells.
        let z = [tok("1:_:+1"), tok("1:1:+1"), tok("1:0:+1"), tok("2:1:-1"), tok("2:0:-1")];
        assert_eq!(read_tape_attention(&z).unwrap(), read_tape(&z).unwrap());
    }

    #[test]
    fn inconsistent_view_rejected() {
        let z = pre(&[true]);
        let mut v = positions_via_attention(&z).unwrap();
        v.pos[1] += q(1);
        assert!(lookup_via_attention(&v, &z).is_err());
        assert!(lookup_via_attention(&v.prefix(1), &z).is_err());
    }

    #[test]
    fn dump_has_one_row_per_position() {
        let d = debug_dump(&pre(&[true, true])).unwrap();
        assert_eq!(d.lines().count(), 4);
        assert!(d.lines().nth(1).unwrap().starts_with("1\t1\t0\t1\t1\t-1\t{1}\t_"));
    }

    #[test]
    fn routes_agree_on_random_machines() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..30 {
            let spec = TmSpec::random(3, 12, &mut rng);
            for omega in [vec![], vec![true], vec![false, true, true]] {
                let direct = history_via(&spec, &omega, Via::Direct).unwrap();
                assert_eq!(history_via(&spec, &omega, Via::Autoregressive).unwrap(), direct);
                assert_eq!(history_via(&spec, &omega, Via::Attention).unwrap(), direct);
            }
        }
        assert_eq!("attention".parse::<Via>().unwrap(), Via::Attention);
        assert!("tape".parse::<Via>().is_err());
    }
}

//! Learning-curve grids: configuration, target families, trial seeding and CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::lbfamilies::{parse_params, FamilyKind, LookupFamily, LookupMember};
use crate::learning::{
    median, pac_trial, BitStrings, CoTDataset, E2EDataset, Learner, Mode, PrefixDataset,
    TrialOutcome, UniformOver,
};
use crate::linthresh::{cons_lp, LinearThreshold};
use crate::rational::int;
use crate::seqcore::{Alphabet, NextToken, Token};
use crate::turing::{pre_tokens, tm_alphabet, TmFamily, TmGenerator, TmSpec};
use crate::{learning, Error, Result};

/// Environment variable holding the worker count for experiment grids.
pub const WORKERS_ENV: &str = "COTLEARN_WORKERS";

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ trial as u64)
}

/// A family the experiment grid knows how to sample targets from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilySpec {
    Lookup(FamilyKind),
    /// `tm:S=…`; prompts are `Pre(ω)` for uniform-length ω of at most `input_len` bits.
    Tm { states: u32 },
    /// `lin:d=…`; prompts are bit strings.
    Lin { d: usize },
}

impl FromStr for FamilySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        match name {
            "tm" | "lin" => {
                let p = parse_params(rest)?;
                let key = if name == "tm" { "S" } else { "d" };
                if p.len() != 1 || !p.contains_key(key) {
                    return Err(Error::Parse(format!("{s:?} needs exactly {key}=…")));
                }
                let v = p[key];
                if v == 0 {
                    return Err(Error::Parse(format!("{key} must be positive")));
                }
                Ok(if name == "tm" {
                    FamilySpec::Tm { states: u32::try_from(v).map_err(|_| Error::Parse("S too large".into()))? }
                } else {
                    FamilySpec::Lin { d: v }
                })
            }
            _ => Ok(FamilySpec::Lookup(s.parse()?)),
        }
    }
}

impl std::fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilySpec::Lookup(k) => write!(f, "{k}"),
            FamilySpec::Tm { states } => write!(f, "tm:S={states}"),
            FamilySpec::Lin { d } => write!(f, "lin:d={d}"),
        }
    }
}

/// Last-`d`-bit thresholds learned by LP; end-to-end learning is not supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinearLearner {
    pub d: usize,
}

impl Learner for LinearLearner {
    type Member = LinearThreshold;

    fn learn_cot(&self, data: &CoTDataset) -> Result<LinearThreshold> {
        learning::cons_cot(data, self)
    }

    fn learn_e2e(&self, _data: &E2EDataset) -> Result<LinearThreshold> {
        Err(Error::NotEnumerable("end-to-end learning of real-weighted thresholds".into()))
    }
}

impl learning::ConsistencyOracle for LinearLearner {
    type Hypothesis = LinearThreshold;

    fn solve(&self, data: &PrefixDataset) -> Result<LinearThreshold> {
        cons_lp(data, self.d)
    }
}

/// Threshold over the last `d` bits with integer weights in `-3..=3`.
pub fn random_linear<R: Rng + ?Sized>(d: usize, rng: &mut R) -> LinearThreshold {
    let w = (0..d).map(|_| int(rng.gen_range(-3..=3))).collect();
    LinearThreshold::new(w, int(rng.gen_range(-3..=3)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub mode: Mode,
    pub steps: usize,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub eval_n: usize,
    pub output: Option<String>,
    /// Longest input string for `tm` and `lin` families.
    pub input_len: usize,
    /// Record wall-clock milliseconds per row (breaks bit-identical reruns).
    pub timing: bool,
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    /// Flat `key = value` lines; `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key {:?}", no + 1, k.trim())));
            }
        }
        let mut get = |k: &str| kv.remove(k);
        let need = |v: Option<String>, k: &str| v.ok_or_else(|| Error::Parse(format!("missing key {k:?}")));
        let num = |v: String, k: &str| -> Result<u64> {
            v.parse().map_err(|_| Error::Parse(format!("{k} must be a non-negative integer, got {v:?}")))
        };

        let family: FamilySpec = need(get("family"), "family")?.parse()?;
        let mode: Mode = need(get("mode"), "mode")?.parse()?;
        let steps = num(need(get("T"), "T")?, "T")? as usize;
        let sizes = need(get("sizes"), "sizes")?
            .split(',')
            .map(|s| num(s.trim().to_string(), "sizes").map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let trials = num(need(get("trials"), "trials")?, "trials")? as usize;
        let seed = num(need(get("seed"), "seed")?, "seed")?;
        let eval_n = get("eval_n").map(|v| num(v, "eval_n")).transpose()?.unwrap_or(1000) as usize;
        let output = get("output");
        let input_len = get("input_len").map(|v| num(v, "input_len")).transpose()?.unwrap_or(4) as usize;
        let timing = match get("timing").as_deref() {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(other) => return Err(Error::Parse(format!("timing must be true/false, got {other:?}"))),
        };
        if let Some(k) = kv.keys().next() {
            return Err(Error::Parse(format!("unknown key {k:?}")));
        }
        let cfg = ExperimentConfig { family, mode, steps, sizes, trials, seed, eval_n, output, input_len, timing };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::ZeroSteps);
        }
        if self.trials == 0 {
            return Err(Error::Parse("trials must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("sizes must be a non-empty strictly increasing list".into()));
        }
        if let FamilySpec::Lookup(k) = self.family {
            LookupFamily::new(k)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultRow {
    pub family: String,
    pub mode: Mode,
    pub steps: usize,
    pub m: usize,
    pub trial: usize,
    pub seed: u64,
    pub error: Option<learning::ErrorRate>,
    pub wall_ms: Option<u128>,
    /// `ok`, or `error:` followed by the failure message.
    pub status: String,
}

pub const CSV_HEADER: &str = "family,mode,T,m,trial,seed,error,error_exact,wall_ms,status";

impl ResultRow {
    /// Fields in [`CSV_HEADER`] order.
    pub fn record(&self) -> [String; 10] {
        let (dec, exact) = match &self.error {
            Some(e) => (format!("{:.6}", ratio_f64(e)), format!("{}/{}", e.numer(), e.denom())),
            None => (String::new(), String::new()),
        };
        [
            self.family.clone(),
            self.mode.to_string(),
            self.steps.to_string(),
            self.m.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            dec,
            exact,
            self.wall_ms.map(|w| w.to_string()).unwrap_or_default(),
            self.status.clone(),
        ]
    }
}

fn ratio_f64(r: &Ratio<u64>) -> f64 {
    r.numer().to_f64().unwrap_or(0.0) / r.denom().to_f64().unwrap_or(1.0)
}

/// Target and input distribution of one trial.
fn run_one(cfg: &ExperimentConfig, m: usize, tseed: u64) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(tseed);
    let learn_seed = splitmix64(tseed);
    match cfg.family {
        FamilySpec::Lookup(kind) => {
            let fam = LookupFamily::new(kind)?;
            let target = fam.random_member(&mut rng);
            let dist = UniformOver { points: fam.points() };
            pac_trial(&fam, &target, &dist, m, cfg.steps, cfg.mode, cfg.eval_n, learn_seed)
        }
        FamilySpec::Tm { states } => {
            let fam = TmFamily { states };
            let target = TmSpec::random(states, cfg.steps, &mut rng).generator();
            let dist = BitStrings { min_len: 0, max_len: cfg.input_len, map: |w| pre_tokens(w) };
            pac_trial(&fam, &target, &dist, m, cfg.steps, cfg.mode, cfg.eval_n, learn_seed)
        }
        FamilySpec::Lin { d } => {
            let learner = LinearLearner { d };
            let target = random_linear(d, &mut rng);
            let dist = BitStrings::plain(cfg.input_len.min(d), cfg.input_len.max(d));
            pac_trial(&learner, &target, &dist, m, cfg.steps, cfg.mode, cfg.eval_n, learn_seed)
        }
    }
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Parse(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Runs every `(m, trial)` cell; rows come back ordered by `(m, trial)`.
///
/// A failing trial is recorded in its row's status and does not stop the grid.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> =
        cfg.sizes.iter().flat_map(|&m| (0..cfg.trials).map(move |t| (m, t))).collect();
    let work = || {
        cells
            .par_iter()
            .map(|&(m, trial)| {
                let seed = trial_seed(cfg.seed, trial);
                let start = Instant::now();
                let out = run_one(cfg, m, seed);
                let wall = cfg.timing.then(|| start.elapsed().as_millis());
                let (error, status) = match out {
                    Ok(o) => (Some(o.error), "ok".to_string()),
                    Err(e) => (None, format!("error:{e}")),
                };
                ResultRow {
                    family: cfg.family.to_string(),
                    mode: cfg.mode,
                    steps: cfg.steps,
                    m,
                    trial,
                    seed,
                    error,
                    wall_ms: wall,
                    status,
                }
            })
            .collect::<Vec<_>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(work))
}

/// Appends rows to `out`, writing the header first when `header` is set.
pub fn write_csv<W: Write>(rows: &[ResultRow], header: bool, out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()
}

/// One line per `m`: median error over successful trials and the failure count.
pub fn summarize(rows: &[ResultRow]) -> String {
    let mut by_m: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let e = by_m.entry(r.m).or_default();
        match &r.error {
            Some(x) => e.0.push(ratio_f64(x)),
            None => e.1 += 1,
        }
    }
    let mut s = String::from("m\tmedian_error\tfailed\n");
    for (m, (errs, failed)) in by_m {
        let med = median(&errs).map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{m}\t{med}\t{failed}");
    }
    s
}

/// A learned or loaded generator from any supported family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    Lookup(LookupMember),
    Tm(TmGenerator),
    Lin(LinearThreshold),
}

impl NextToken for Hypothesis {
    fn alphabet(&self) -> &Alphabet {
        match self {
            Hypothesis::Lookup(h) => h.alphabet(),
            Hypothesis::Tm(h) => h.alphabet(),
            Hypothesis::Lin(h) => h.alphabet(),
        }
    }

    fn next_token(&self, x: &[Token]) -> Result<Token> {
        match self {
            Hypothesis::Lookup(h) => h.next_token(x),
            Hypothesis::Tm(h) => h.next_token(x),
            Hypothesis::Lin(h) => h.next_token(x),
        }
    }
}

impl Hypothesis {
    /// Generator file text: a TM table with header `"S T"`, a threshold line
    /// `"d b w…"`, or a lookup family spec followed by its selector bits.
    pub fn to_text(&self, steps: usize) -> Result<String> {
        Ok(match self {
            Hypothesis::Lookup(h) => {
                let bits: String = h.bits().iter().map(|&b| if b { '1' } else { '0' }).collect();
                format!("{}\n{bits}\n", h.kind())
            }
            Hypothesis::Tm(h) => h.to_spec(steps)?.to_text(),
            Hypothesis::Lin(h) => format!("{}\n", h.to_text()),
        })
    }

    /// Inverse of [`Hypothesis::to_text`]; TM files also yield their step count.
    pub fn from_text(kind: GeneratorKind, text: &str) -> Result<(Hypothesis, Option<usize>)> {
        let mut lines = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty());
        match kind {
            GeneratorKind::Tm => {
                let spec = TmSpec::from_text(text)?;
                Ok((Hypothesis::Tm(spec.generator()), Some(spec.steps())))
            }
            GeneratorKind::Lin => {
                let line = lines.next().ok_or_else(|| Error::Parse("empty threshold file".into()))?;
                if lines.next().is_some() {
                    return Err(Error::Parse("threshold file has trailing lines".into()));
                }
                Ok((Hypothesis::Lin(LinearThreshold::from_text(line)?), None))
            }
            GeneratorKind::Lookup => {
                let kind: FamilyKind = lines.next().ok_or_else(|| Error::Parse("missing family spec".into()))?.parse()?;
                let bits = lines
                    .next()
                    .ok_or_else(|| Error::Parse("missing selector bits".into()))?
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(Error::Parse(format!("selector bit {c:?} is not 0 or 1"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let member = LookupFamily::new(kind)?.member(bits).map_err(|e| Error::Parse(e.to_string()))?;
                Ok((Hypothesis::Lookup(member), None))
            }
        }
    }
}

/// File format of a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    Tm,
    Lin,
    Lookup,
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tm" => Ok(GeneratorKind::Tm),
            "lin" => Ok(GeneratorKind::Lin),
            "lookup" => Ok(GeneratorKind::Lookup),
            other => Err(Error::Parse(format!("unknown generator kind {other:?}"))),
        }
    }
}

impl FamilySpec {
    /// Token alphabet of the family's sequences.
    pub fn alphabet(&self) -> Alphabet {
        match self {
            FamilySpec::Tm { states } => tm_alphabet(*states),
            _ => Alphabet::binary().clone(),
        }
    }

    pub fn learn_cot(&self, data: &CoTDataset) -> Result<Hypothesis> {
        Ok(match *self {
            FamilySpec::Lookup(k) => Hypothesis::Lookup(LookupFamily::new(k)?.learn_cot(data)?),
            FamilySpec::Tm { states } => Hypothesis::Tm(TmFamily { states }.learn_cot(data)?),
            FamilySpec::Lin { d } => Hypothesis::Lin(LinearLearner { d }.learn_cot(data)?),
        })
    }

    pub fn learn_e2e(&self, data: &E2EDataset) -> Result<Hypothesis> {
        Ok(match *self {
            FamilySpec::Lookup(k) => Hypothesis::Lookup(LookupFamily::new(k)?.learn_e2e(data)?),
            FamilySpec::Tm { states } => Hypothesis::Tm(TmFamily { states }.learn_e2e(data)?),
            FamilySpec::Lin { d } => Hypothesis::Lin(LinearLearner { d }.learn_e2e(data)?),
        })
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
}

/// One comma-separated sequence per line.
pub fn parse_cot_dataset(text: &str, alphabet: &Alphabet, steps: usize) -> Result<CoTDataset> {
    let seqs = data_lines(text)
        .map(|(no, l)| alphabet.parse_seq(l).map_err(|e| Error::Parse(format!("line {no}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    CoTDataset::new(seqs, steps)
}

/// `sequence<TAB>label` per line.
pub fn parse_e2e_dataset(text: &str, alphabet: &Alphabet, steps: usize) -> Result<E2EDataset> {
    let pairs = data_lines(text)
        .map(|(no, l)| {
            let (x, y) = l.split_once('\t').ok_or_else(|| Error::Parse(format!("line {no}: expected sequence<TAB>label")))?;
            let x = alphabet.parse_seq(x).map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
            let y = alphabet.parse_token(y).map_err(|e| Error::Parse(format!("line {no}: {e}")))?;
            Ok((x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    E2EDataset::new(pairs, steps)
}

pub fn render_cot_dataset(data: &CoTDataset, alphabet: &Alphabet) -> Result<String> {
    let mut out = String::new();
    for z in data.seqs() {
        out.push_str(&alphabet.render_seq(z.as_slice())?);
        out.push('\n');
    }
    Ok(out)
}

pub fn render_e2e_dataset(data: &E2EDataset, alphabet: &Alphabet) -> Result<String> {
    let mut out = String::new();
    for (x, y) in data.pairs() {
        let _ = writeln!(out, "{}\t{}", alphabet.render_seq(x.as_slice())?, alphabet.render(*y)?);
    }
    Ok(out)
}

/// Parses input bits written as `0110` or `0,1,1,0`.
pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .filter(|c| *c != ',' && !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("input bit {c:?} is not 0 or 1"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = "family = e1:D=2,T=2\nmode = cot\nT = 2\nsizes = 0,2,8\ntrials = 3\nseed = 7\n# comment\neval_n = 50\n";

    #[test]
    fn parse_config() {
        let c: ExperimentConfig = CFG.parse().unwrap();
        assert_eq!(c.family, FamilySpec::Lookup(FamilyKind::E1 { d: 2, t: 2 }));
        assert_eq!(c.sizes, vec![0, 2, 8]);
        assert_eq!(c.eval_n, 50);
        assert!(!c.timing);
        for bad in [
            CFG.replace("sizes = 0,2,8", "sizes = 2,2"),
            CFG.replace("trials = 3", "trials = 0"),
            CFG.replace("mode = cot", "mode = both"),
            format!("{CFG}colour = red\n"),
            CFG.replace("T = 2", "T = 0"),
        ] {
            assert!(bad.parse::<ExperimentConfig>().is_err(), "{bad}");
        }
    }

    #[test]
    fn family_specs() {
        assert_eq!("tm:S=3".parse::<FamilySpec>().unwrap(), FamilySpec::Tm { states: 3 });
        assert_eq!("lin:d=4".parse::<FamilySpec>().unwrap(), FamilySpec::Lin { d: 4 });
        assert!("tm:S=0".parse::<FamilySpec>().is_err());
        assert!("tm:d=3".parse::<FamilySpec>().is_err());
        for s in ["tm:S=3", "lin:d=4", "ldim:D=3"] {
            assert_eq!(s.parse::<FamilySpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn grid_is_ordered_and_reproducible() {
        let c: ExperimentConfig = CFG.parse().unwrap();
        let a = run_experiment(&c, Some(3)).unwrap();
        let b = run_experiment(&c, Some(1)).unwrap();
        assert_eq!(a, b);
        let keys: Vec<(usize, usize)> = a.iter().map(|r| (r.m, r.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(a.len(), 9);
        assert!(a.iter().all(|r| r.status == "ok" && r.wall_ms.is_none()));
        // Eight samples over four points is usually, not always, enough.
        assert!(a.iter().filter(|r| r.m == 8).any(|r| *r.error.as_ref().unwrap().numer() == 0));
    }

    #[test]
    fn failures_are_recorded_per_row() {
        let c: ExperimentConfig = "family = lin:d=2\nmode = e2e\nT = 2\nsizes = 1\ntrials = 1\nseed = 1\n"
            .parse()
            .unwrap();
        let rows = run_experiment(&c, None).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].status.starts_with("error:"));
        assert_eq!(rows[0].record()[6..9], [String::new(), String::new(), String::new()]);
    }

    #[test]
    fn linear_cot_trials_succeed() {
        let c: ExperimentConfig =
            "family = lin:d=3\nmode = cot\nT = 3\nsizes = 0,5\ntrials = 2\nseed = 3\n".parse().unwrap();
        for r in run_experiment(&c, None).unwrap() {
            assert_eq!(r.status, "ok");
        }
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
        assert_eq!(trial_seed(9, 4), trial_seed(9, 4));
    }

    #[test]
    fn csv_format() {
        let r = ResultRow {
            family: "e1:D=2,T=2".into(),
            mode: Mode::Cot,
            steps: 2,
            m: 3,
            trial: 0,
            seed: 5,
            error: Some(Ratio::new(1, 3)),
            wall_ms: None,
            status: "ok".into(),
        };
        let mut buf = Vec::new();
        write_csv(&[r], true, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\n\"e1:D=2,T=2\",cot,2,3,0,5,0.333333,1/3,,ok\n"));
    }

    #[test]
    fn generator_files_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fam = LookupFamily::e1(2, 3).unwrap();
        let hs = [
            (GeneratorKind::Lookup, Hypothesis::Lookup(fam.random_member(&mut rng))),
            (GeneratorKind::Tm, Hypothesis::Tm(TmSpec::random(2, 5, &mut rng).generator())),
            (GeneratorKind::Lin, Hypothesis::Lin(random_linear(3, &mut rng))),
        ];
        for (kind, h) in hs {
            let text = h.to_text(5).unwrap();
            let (back, steps) = Hypothesis::from_text(kind, &text).unwrap();
            assert_eq!(back, h);
            assert_eq!(steps.is_some(), kind == GeneratorKind::Tm);
        }
        assert!(Hypothesis::from_text(GeneratorKind::Lookup, "e1:D=2,T=3\n0102\n").is_err());
        assert!(Hypothesis::from_text(GeneratorKind::Lookup, "e1:D=2,T=3\n01\n").is_err());
    }

    #[test]
    fn dataset_files_round_trip() {
        let spec: FamilySpec = "tm:S=2".parse().unwrap();
        let a = spec.alphabet();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = TmSpec::random(2, 3, &mut rng).generator();
        let prompts = vec![pre_tokens(&[true, false]), pre_tokens(&[])];
        let cot = CoTDataset::generate(&g, &prompts, 3).unwrap();
        let text = render_cot_dataset(&cot, &a).unwrap();
        assert!(text.starts_with("1:_:+1,"));
        let back = parse_cot_dataset(&text, &a, 3).unwrap();
        assert_eq!(back, cot);
        assert_eq!(spec.learn_cot(&back).unwrap().next_token(prompts[0].as_slice()).unwrap(), cot.seqs()[0].as_slice()[3]);
        let e = cot.to_e2e();
        assert_eq!(parse_e2e_dataset(&render_e2e_dataset(&e, &a).unwrap(), &a, 3).unwrap(), e);
        assert!(parse_e2e_dataset("1:_:+1\n", &a, 3).is_err());
    }

    #[test]
    fn bits() {
        assert_eq!(parse_bits("01,1").unwrap(), vec![false, true, true]);
        assert_eq!(parse_bits("").unwrap(), Vec::<bool>::new());
        assert!(parse_bits("012").is_err());
    }
}

//! Acceptance criteria 1–8. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.
//!
//! Pass a criterion number (e.g. `cargo test --test acceptance -- 5`) to run a subset.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cotlearn::attention::read_tape_attention_prefixes;
use cotlearn::circomp::{compile, compile_circuit, size_bounds_hold, verify_compilation, ThresholdCircuit};
use cotlearn::experiment::{random_linear, splitmix64, LinearLearner};
use cotlearn::lbfamilies::{cot_loss_behaviors, growth_count, vcdim_bruteforce, LookupFamily, VcMode};
use cotlearn::learning::{
    heldout_error, median, prefix_expand, samples_to_zero_error, BitStrings, CoTDataset, InputDistribution, Learner,
    Mode, UniformOver,
};
use cotlearn::linthresh::{cons_lp, enumerate_threshold_functions, threshold_count_bound};
use cotlearn::rational::{int, Rational};
use cotlearn::seqcore::{cot, NextToken, TokenSeq};
use cotlearn::turing::{
    decode_seq, post, pre, pre_tokens, read_tape, read_tape_counted, simulate_tm, TmFamily, TmSpec, TmToken,
};
use cotlearn::Error;

// Pinned tolerances and sizes.
const C1_MACHINES: usize = 200;
const C1_MAX_STATES: u32 = 4;
const C1_MAX_STEPS: usize = 30;
const C1_MAX_INPUT: usize = 6;
const C3_CIRCUITS: usize = 100;
const C5_SEEDS: u64 = 51;
const C5_MAX_M: usize = 5000;
const C6_MACHINES: usize = 100;
const C6_M: usize = 60;
const C6_MIN_R2: f64 = 0.95;
const C6_REPS: usize = 25;
const C7_DATASETS: usize = 100;
const C8_TRIALS: u64 = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn all_bits(len: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1usize << len).map(move |p| (0..len).map(|i| (p >> (len - 1 - i)) & 1 == 1).collect())
}

fn inputs_up_to(max_len: usize) -> Vec<Vec<bool>> {
    (0..=max_len).flat_map(all_bits).collect()
}

/// Machines and generated histories shared by criteria 1 and 2.
fn criterion1_machines() -> Vec<TmSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    (0..C1_MACHINES)
        .map(|_| {
            let s = rng.gen_range(1..=C1_MAX_STATES);
            let t = rng.gen_range(1..=C1_MAX_STEPS);
            TmSpec::random(s, t, &mut rng)
        })
        .collect()
}

fn c1_tm_expressivity() -> Outcome {
    let machines = criterion1_machines();
    let inputs = inputs_up_to(C1_MAX_INPUT);
    let (runs, out_bad, trace_bad) = machines
        .par_iter()
        .map(|spec| {
            let g = spec.generator();
            let (mut runs, mut out_bad, mut trace_bad) = (0usize, 0usize, 0usize);
            for omega in &inputs {
                let (want, trace) = simulate_tm(spec, omega);
                let z = cot(&g, &pre_tokens(omega), spec.steps()).expect("generation");
                let toks = decode_seq(z.as_slice(), spec.states()).expect("decode");
                let got = post(*toks.last().unwrap()).expect("τ writes bits");
                out_bad += usize::from(got != want);
                let generated = &toks[omega.len() + 1..];
                let aligned = generated.len() == trace.steps.len()
                    && generated.iter().zip(&trace.steps).all(|(a, b)| *a == b.token());
                trace_bad += usize::from(!aligned);
                runs += 1;
            }
            (runs, out_bad, trace_bad)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    outcome(
        out_bad == 0 && trace_bad == 0 && machines.len() >= 200,
        format!("{} machines, {runs} runs, {out_bad} output mismatches, {trace_bad} trace mismatches", machines.len()),
    )
}

fn c2_attention() -> Outcome {
    let machines = criterion1_machines();
    let inputs = inputs_up_to(C1_MAX_INPUT);
    let (prefixes, bad, non_singleton) = machines
        .par_iter()
        .map(|spec| {
            let (_, _) = (spec.states(), spec.steps());
            let (mut prefixes, mut bad, mut non_singleton) = (0usize, 0usize, 0usize);
            for omega in &inputs {
                let (_, trace) = simulate_tm(spec, omega);
                let z: Vec<TmToken> = pre(omega).into_iter().chain(trace.steps.iter().map(|s| s.token())).collect();
                let lookups = read_tape_attention_prefixes(&z).expect("rooted history");
                for (n, l) in lookups.iter().enumerate() {
                    let want = read_tape(&z[..=n]).expect("non-empty");
                    if (z[n].state, l.read) != want {
                        bad += 1;
                    }
                    if l.matched && l.attended.argmax.len() != 1 {
                        non_singleton += 1;
                    }
                    prefixes += 1;
                }
            }
            (prefixes, bad, non_singleton)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    outcome(
        bad == 0 && non_singleton == 0,
        format!("{prefixes} prefixes, {bad} mismatches, {non_singleton} non-singleton argmax sets on a match"),
    )
}

fn random_weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<Rational> {
    (0..len).map(|_| int(rng.gen_range(-3..=3))).collect()
}

fn random_normalized(rng: &mut ChaCha8Rng) -> ThresholdCircuit {
    let n = rng.gen_range(1..=4);
    let s = rng.gen_range(1..=3);
    let depth = rng.gen_range(1..=2);
    let layers = (0..depth)
        .map(|l| {
            let fan_in = n + l * s;
            let dead = if l == 0 { n - 1 } else { n + l * s - 1 };
            (0..s)
                .map(|_| {
                    let mut w = random_weights(rng, fan_in);
                    w[dead] = int(0);
                    w
                })
                .collect()
        })
        .collect();
    let c = ThresholdCircuit::new(n, layers).unwrap();
    assert!(c.is_normalized());
    c
}

fn random_circuit(rng: &mut ChaCha8Rng) -> ThresholdCircuit {
    let n = rng.gen_range(1..=4);
    let depth = rng.gen_range(1..=2);
    let mut fan_in = n;
    let mut layers = Vec::new();
    for _ in 0..depth {
        let width = rng.gen_range(1..=3);
        layers.push((0..width).map(|_| random_weights(rng, fan_in)).collect::<Vec<_>>());
        fan_in += width;
    }
    ThresholdCircuit::new(n, layers).unwrap()
}

fn c3_circuits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut circuits: Vec<ThresholdCircuit> = (0..C3_CIRCUITS).map(|_| random_normalized(&mut rng)).collect();
    let normalized = circuits.len();
    circuits.extend((0..C3_CIRCUITS / 2).map(|_| random_circuit(&mut rng)));
    let mut failures = Vec::new();
    let mut inputs = 0;
    for (k, c) in circuits.iter().enumerate() {
        let compiled = if c.is_normalized() { compile(c) } else { compile_circuit(c) }.expect("compiles");
        let report = verify_compilation(c, &compiled).expect("within guard");
        inputs += report.inputs_checked;
        let bounds = size_bounds_hold(c.inputs(), c.width(), c.depth(), compiled.steps, compiled.dimension());
        if !report.ok() || !bounds {
            failures.push(format!("circuit {k}: {} violations, bounds {bounds}", report.violations.len()));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{normalized} normalized + {} general circuits, {inputs} inputs checked, {} failures{}",
            circuits.len() - normalized,
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn c4_dimensions() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut check = |label: String, got: usize, want: usize| {
        ok &= got == want;
        rows.push(format!("{label}={got}{}", if got == want { "" } else { "(want)" }));
    };
    for (d, t) in [(1, 2), (2, 2), (2, 3)] {
        let f = LookupFamily::e1(d, t).unwrap();
        check(format!("e1({d},{t}) base"), vcdim_bruteforce(&f, &f.base_pool(), VcMode::Base).unwrap(), d);
        check(format!("e1({d},{t}) e2e"), vcdim_bruteforce(&f, &f.e2e_pool(), VcMode::E2e(t)).unwrap(), d * t);
    }
    for d in [2, 3] {
        let f = LookupFamily::collapse(d).unwrap();
        check(format!("collapse({d}) base"), vcdim_bruteforce(&f, &f.base_pool(), VcMode::Base).unwrap(), d);
        check(format!("collapse({d}) e2e"), vcdim_bruteforce(&f, &f.base_pool(), VcMode::E2e(2)).unwrap(), 0);
    }
    for d in [2, 3] {
        let f = LookupFamily::ldim(d).unwrap();
        check(format!("ldim({d}) base"), vcdim_bruteforce(&f, &f.base_pool(), VcMode::Base).unwrap(), 1);
        check(format!("ldim({d}) e2e"), vcdim_bruteforce(&f, &f.e2e_pool(), VcMode::E2e(d + 1)).unwrap(), d);
    }
    outcome(ok, rows.join(", "))
}

fn samples_needed(t: usize, mode: Mode) -> Vec<f64> {
    let fam = LookupFamily::e1(3, t).unwrap();
    let dist = UniformOver { points: fam.points() };
    (0..C5_SEEDS)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
            let target = fam.random_member(&mut rng);
            let m = samples_to_zero_error(&fam, &target, &dist, t, mode, splitmix64(seed ^ 0x5eed), C5_MAX_M)
                .expect("realizable")
                .expect("reaches zero error within the cap");
            m as f64
        })
        .collect()
}

fn c5_separation() -> Outcome {
    let ts = [2usize, 4, 8];
    let med = |mode| ts.map(|t| median(&samples_needed(t, mode)).unwrap());
    let e2e = med(Mode::E2e);
    let cot = med(Mode::Cot);
    let e2e_ok = e2e.windows(2).all(|w| w[0] <= w[1]) && e2e[2] >= 2.0 * e2e[0];
    let cot_ok = cot[2] <= 2.0 * cot[0];
    outcome(
        e2e_ok && cot_ok,
        format!(
            "{C5_SEEDS} seeds, medians at T=2/4/8: e2e {:?} ({}), cot {:?} ({})",
            e2e,
            if e2e_ok { "grows ≥2×" } else { "does not grow ≥2×" },
            cot,
            if cot_ok { "≤2×" } else { "exceeds 2×" }
        ),
    )
}

fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

/// `(state, read)` pairs met while generating from `prompts`.
fn pairs_visited(data: &CoTDataset, states: u32) -> HashSet<(u32, cotlearn::turing::Symbol)> {
    prefix_expand(data)
        .pairs()
        .iter()
        .map(|(u, _)| read_tape(&decode_seq(u.as_slice(), states).unwrap()).unwrap())
        .collect()
}

fn c6_tm_learning() -> Outcome {
    const S: u32 = 3;
    const T: usize = 12;
    const INPUT_LEN: usize = 4;
    let fam = TmFamily { states: S };
    let dist = BitStrings { min_len: 0, max_len: INPUT_LEN, map: |w| pre_tokens(w) };
    let support: Vec<TokenSeq> = dist.support().unwrap().into_iter().map(|(x, _)| x).collect();

    let (mut covered, mut covered_wrong, mut uncovered_zero) = (0, 0, 0);
    for k in 0..C6_MACHINES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC6 ^ (k << 8));
        let target = TmSpec::random(S, T, &mut rng).generator();
        let prompts: Vec<TokenSeq> = (0..C6_M).map(|_| dist.sample(&mut rng)).collect();
        let train = CoTDataset::generate(&target, &prompts, T).unwrap();
        let h = fam.learn_cot(&train).unwrap();
        let (err, exact) = heldout_error(&h, &target, &dist, T, 0, &mut rng).unwrap();
        assert!(exact);
        let reachable = pairs_visited(&CoTDataset::generate(&target, &support, T).unwrap(), S);
        let seen = pairs_visited(&train, S);
        if reachable.is_subset(&seen) {
            covered += 1;
            covered_wrong += usize::from(*err.numer() != 0);
        } else if *err.numer() == 0 {
            uncovered_zero += 1;
        }
    }

    // Runtime against total prefix length.
    let mut rng = ChaCha8Rng::seed_from_u64(0x6C);
    let target = TmSpec::random(S, 30, &mut rng).generator();
    let long = BitStrings { min_len: 0, max_len: 8, map: |w| pre_tokens(w) };
    let mut datasets = Vec::new();
    let (mut lens, mut visits) = (Vec::new(), Vec::new());
    // Nested datasets: each size extends the previous prompt stream.
    let stream: Vec<TokenSeq> = (0..1500).map(|_| long.sample(&mut rng)).collect();
    for m in (1..=10).map(|i| i * 150) {
        let data = CoTDataset::generate(&target, &stream[..m], 30).unwrap();
        let expanded = prefix_expand(&data);
        let v: usize = expanded
            .pairs()
            .iter()
            .map(|(u, _)| read_tape_counted(&decode_seq(u.as_slice(), S).unwrap()).unwrap().1)
            .sum();
        lens.push(expanded.total_prefix_len() as f64);
        visits.push(v as f64);
        datasets.push(data);
    }
    // Repetitions sweep all sizes in turn so machine-wide slowdowns hit every size alike.
    let mut best = vec![Duration::MAX; datasets.len()];
    for _ in 0..C6_REPS {
        for (b, data) in best.iter_mut().zip(&datasets) {
            let start = Instant::now();
            let h = fam.learn_cot(data).unwrap();
            *b = (*b).min(start.elapsed());
            std::hint::black_box(h);
        }
    }
    let secs: Vec<f64> = best.iter().map(Duration::as_secs_f64).collect();
    let r2_time = linear_fit_r2(&lens, &secs);
    let r2_visits = linear_fit_r2(&lens, &visits);
    outcome(
        covered > 0 && covered_wrong == 0 && r2_time >= C6_MIN_R2,
        format!(
            "{covered}/{C6_MACHINES} runs covered all reachable (state, read) pairs, {covered_wrong} of them with \
             nonzero error ({uncovered_zero} uncovered runs also hit 0); runtime R²={r2_time:.4} \
             (token visits R²={r2_visits:.4}) over total prefix length {:.0}..{:.0}",
            lens[0],
            lens[lens.len() - 1]
        ),
    )
}

fn c7_lp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut inconsistent = 0;
    for _ in 0..C7_DATASETS {
        let d = rng.gen_range(1..=6);
        let t = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=20);
        let target = random_linear(d, &mut rng);
        let prompts: Vec<TokenSeq> =
            (0..m).map(|_| TokenSeq((0..rng.gen_range(1..=8)).map(|_| rng.gen_range(0..2)).collect())).collect();
        let data = CoTDataset::generate(&target, &prompts, t).unwrap();
        let prefixes = prefix_expand(&data);
        match cons_lp(&prefixes, d) {
            Ok(h) => {
                if prefixes.pairs().iter().any(|(u, v)| h.next_token(u.as_slice()).unwrap() != *v) {
                    inconsistent += 1;
                }
            }
            Err(_) => inconsistent += 1,
        }
    }
    // Parity of the last d bits: d=2 is XOR, d=3 three-way parity.
    let mut xor_feasible = 0;
    let mut xor_cases = 0;
    for d in [2usize, 3] {
        let seqs: Vec<TokenSeq> = (0..1usize << d)
            .map(|p| {
                let x: Vec<u32> = (0..d).map(|i| ((p >> i) & 1) as u32).collect();
                let parity = x.iter().sum::<u32>() % 2;
                TokenSeq(x.into_iter().chain([parity]).collect())
            })
            .collect();
        let data = CoTDataset::new(seqs, 1).unwrap();
        xor_cases += 1;
        match (cons_lp(&prefix_expand(&data), d), LinearLearner { d }.learn_cot(&data)) {
            (Err(Error::NotRealizable(_)), Err(Error::NotRealizable(_))) => {}
            _ => xor_feasible += 1,
        }
    }
    outcome(
        inconsistent == 0 && xor_feasible == 0,
        format!(
            "{C7_DATASETS} realizable datasets, {inconsistent} without a consistent hypothesis; \
             {xor_cases} parity instances, {xor_feasible} not reported infeasible"
        ),
    )
}

fn c8_growth() -> Outcome {
    let fam = LookupFamily::e1(2, 2).unwrap();
    let mut violations = 0;
    let mut worst = (0, 0);
    for seed in 0..C8_TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC8 ^ seed);
        let target = fam.random_member(&mut rng);
        let prompts: Vec<TokenSeq> = (0..3).map(|_| fam.point(rng.gen_range(1..=4))).collect();
        let data = CoTDataset::generate(&target, &prompts, 2).unwrap();
        let loss = cot_loss_behaviors(&fam, &data).unwrap();
        let points: Vec<TokenSeq> = prefix_expand(&data).pairs().iter().map(|(u, _)| u.clone()).collect();
        assert_eq!(points.len(), 3 * 2);
        let base = growth_count(&fam, &points, VcMode::Base).unwrap();
        if loss > base {
            violations += 1;
        }
        if loss > worst.0 || (loss == worst.0 && base < worst.1) {
            worst = (loss, base);
        }
    }
    let mut lemma = Vec::new();
    let mut lemma_ok = true;
    for d in 1..=3 {
        let count = enumerate_threshold_functions(d).unwrap().len();
        let bound = threshold_count_bound(d);
        lemma_ok &= (count as f64) <= bound;
        lemma.push(format!("d={d}: {count} ≤ {bound:.0}"));
    }
    outcome(
        violations == 0 && lemma_ok,
        format!(
            "{C8_TRIALS} draws, {violations} with loss behaviors > base behaviors (largest loss count {} vs base {}); {}",
            worst.0,
            worst.1,
            lemma.join(", ")
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 8] = [
        (1, "TM expressivity", c1_tm_expressivity),
        (2, "attention equivalence", c2_attention),
        (3, "circuit compiler", c3_circuits),
        (4, "lookup-family dimensions", c4_dimensions),
        (5, "CoT vs e2e sample complexity", c5_separation),
        (6, "CoT learning of TM class", c6_tm_learning),
        (7, "LP consistency", c7_lp),
        (8, "growth-function sanity", c8_growth),
    ];
    let mut failed = Vec::new();
    for (no, name, run) in criteria {
        if !only.is_empty() && !only.contains(&no) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {no} ({name}): {verdict} [{:.1}s] {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(no);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failing criteria {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass");
}

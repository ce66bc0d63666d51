//! `cotlearn`: command-line front end.
//!
//! Exit codes: 0 success, 1 invariant or verification failure, 2 input error.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cotlearn::attention::{debug_dump, history_via, Via};
use cotlearn::circomp::{compile_circuit, verify_compilation, CompiledThreshold, ThresholdCircuit};
use cotlearn::experiment::{
    parse_bits, parse_cot_dataset, parse_e2e_dataset, render_cot_dataset, render_e2e_dataset, run_experiment,
    summarize, workers_from_env, write_csv, ExperimentConfig, FamilySpec, GeneratorKind, Hypothesis,
};
use cotlearn::lbfamilies::{vcdim_bruteforce, FamilyKind, LookupFamily, VcMode};
use cotlearn::learning::{CoTDataset, E2EDataset};
use cotlearn::seqcore::{cot, e2e, NextToken};
use cotlearn::turing::{encode_seq, pre_tokens, tm_alphabet, TmSpec};
use cotlearn::Error;

#[derive(Parser)]
#[command(name = "cotlearn", version, about = "Chain-of-thought generation and learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tm,
    Lin,
    Lookup,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cot,
    E2e,
}

#[derive(Clone, Copy, ValueEnum)]
enum DimMode {
    Base,
    E2e,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViaArg {
    Direct,
    Autoregressive,
    Attention,
}

#[derive(Subcommand)]
enum Command {
    /// Print the chain of thought of a generator on one prompt or a prompt file.
    Generate {
        /// Generator file.
        generator: PathBuf,
        #[arg(long, value_enum, default_value = "tm")]
        kind: KindArg,
        /// Prompt. For TM generators, input bits passed through Pre unless --raw.
        #[arg(long, conflicts_with = "prompts")]
        prompt: Option<String>,
        /// File with one prompt per line.
        #[arg(long)]
        prompts: Option<PathBuf>,
        /// Number of generated tokens (TM files carry a default).
        #[arg(long)]
        steps: Option<usize>,
        /// Treat TM prompts as token sequences rather than input bits.
        #[arg(long)]
        raw: bool,
        /// Print `prompt<TAB>final token` instead of the full sequence.
        #[arg(long)]
        e2e: bool,
    },
    /// Fit a family member to a dataset file and print it as a generator file.
    Learn {
        /// Family spec, e.g. "e1:D=2,T=4", "tm:S=3" or "lin:d=4".
        #[arg(long)]
        family: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        steps: usize,
        /// CoT file (one sequence per line) or e2e file (sequence<TAB>label).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a threshold circuit into one iterated threshold.
    CompileCircuit {
        circuit: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check every input exhaustively.
        #[arg(long)]
        verify: bool,
        /// Re-verify an existing compiled file instead of compiling.
        #[arg(long)]
        compiled: Option<PathBuf>,
    },
    /// Run a Turing machine directly, autoregressively, or through attention.
    SimulateTm {
        /// Machine file; omit with --random.
        tm: Option<PathBuf>,
        /// Input bits, e.g. 0110.
        #[arg(long, default_value = "")]
        input: String,
        #[arg(long, value_enum, default_value = "direct")]
        via: ViaArg,
        /// Print the token history.
        #[arg(long)]
        trace: bool,
        /// Print the attention tape-reader table.
        #[arg(long)]
        dump: bool,
        /// Run all routes and fail on any disagreement.
        #[arg(long)]
        check: bool,
        /// Check this many random machines on every input up to --max-input-len.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 3)]
        states: u32,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        max_input_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Brute-force VC dimension of a lookup family.
    Vcdim {
        /// Family spec, e.g. "e1:D=2,T=2".
        family: String,
        #[arg(long, value_enum)]
        mode: DimMode,
        /// Steps for e2e mode; defaults to T (e1), D+1 (ldim) or 2 (collapse).
        #[arg(long = "T")]
        steps: Option<usize>,
    },
    /// Run a learning-curve grid from a key=value config file.
    Experiment {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Input problems exit 2; broken invariants and failed checks exit 1.
enum Failure {
    Input(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) => Failure::Check(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { generator, kind, prompt, prompts, steps, raw, e2e } => {
            cmd_generate(&generator, kind, prompt, prompts, steps, raw, e2e)
        }
        Command::Learn { family, mode, steps, data, out } => cmd_learn(&family, mode, steps, &data, out.as_deref()),
        Command::CompileCircuit { circuit, out, verify, compiled } => {
            cmd_compile_circuit(&circuit, out.as_deref(), verify, compiled.as_deref())
        }
        Command::SimulateTm { tm, input, via, trace, dump, check, random, states, steps, max_input_len, seed } => {
            match random {
                Some(n) => cmd_random_check(n, states, steps, max_input_len, seed),
                None => match tm {
                    Some(tm) => cmd_simulate_tm(&tm, &input, via, trace, dump, check),
                    None => Err(Failure::Input("a machine file or --random is required".into())),
                },
            }
        }
        Command::Vcdim { family, mode, steps } => cmd_vcdim(&family, mode, steps),
        Command::Experiment { config, seed, output } => cmd_experiment(&config, seed, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn generator_kind(k: KindArg) -> GeneratorKind {
    match k {
        KindArg::Tm => GeneratorKind::Tm,
        KindArg::Lin => GeneratorKind::Lin,
        KindArg::Lookup => GeneratorKind::Lookup,
    }
}

fn cmd_generate(
    file: &Path,
    kind: KindArg,
    prompt: Option<String>,
    prompts: Option<PathBuf>,
    steps: Option<usize>,
    raw: bool,
    as_e2e: bool,
) -> CliResult<()> {
    let (gen, file_steps) = Hypothesis::from_text(generator_kind(kind), &read(file)?)?;
    let steps = steps.or(file_steps).ok_or_else(|| Failure::Input("--steps is required".into()))?;
    let lines: Vec<String> = match (prompt, prompts) {
        (Some(p), None) => vec![p],
        (None, Some(path)) => read(&path)?.lines().map(str::to_string).collect(),
        _ => return Err(Failure::Input("give --prompt or --prompts".into())),
    };
    let alphabet = gen.alphabet().clone();
    let mut xs = Vec::with_capacity(lines.len());
    for line in &lines {
        let x = if matches!(gen, Hypothesis::Tm(_)) && !raw {
            pre_tokens(&parse_bits(line)?)
        } else {
            alphabet.parse_seq(line)?
        };
        xs.push(x);
    }
    let text = if as_e2e {
        render_e2e_dataset(&E2EDataset::generate(&gen, &xs, steps)?, &alphabet)?
    } else {
        render_cot_dataset(&CoTDataset::generate(&gen, &xs, steps)?, &alphabet)?
    };
    write_out(None, &text)
}

fn cmd_learn(family: &str, mode: ModeArg, steps: usize, data: &Path, out: Option<&Path>) -> CliResult<()> {
    let spec: FamilySpec = family.parse()?;
    let alphabet = spec.alphabet();
    let text = read(data)?;
    let h = match mode {
        ModeArg::Cot => {
            let d = parse_cot_dataset(&text, &alphabet, steps)?;
            let h = spec.learn_cot(&d)?;
            for (i, z) in d.seqs().iter().enumerate() {
                if cot(&h, &d.prompt(i), steps)? != *z {
                    return Err(Failure::Check(format!("hypothesis misses training sequence {}", i + 1)));
                }
            }
            h
        }
        ModeArg::E2e => {
            let d = parse_e2e_dataset(&text, &alphabet, steps)?;
            let h = spec.learn_e2e(&d)?;
            for (i, (x, y)) in d.pairs().iter().enumerate() {
                if e2e(&h, x, steps)? != *y {
                    return Err(Failure::Check(format!("hypothesis misses training pair {}", i + 1)));
                }
            }
            h
        }
    };
    write_out(out, &h.to_text(steps)?)
}

fn cmd_compile_circuit(path: &Path, out: Option<&Path>, verify: bool, compiled: Option<&Path>) -> CliResult<()> {
    let circuit = ThresholdCircuit::from_text(&read(path)?)?;
    let target = match compiled {
        Some(cpath) => {
            let (f, steps) = CompiledThreshold::parse_parts(&read(cpath)?)?;
            CompiledThreshold::from_parts(&circuit.normalize(), f.weights, steps)?
        }
        None => {
            let c = compile_circuit(&circuit)?;
            write_out(out, &c.to_text())?;
            c
        }
    };
    if !verify && compiled.is_none() {
        return Ok(());
    }
    let report = verify_compilation(&circuit, &target)?;
    let bad: std::collections::BTreeSet<&Vec<bool>> = report.violations.iter().map(|v| &v.x).collect();
    if report.ok() {
        println!("OK {0}/{0} inputs", report.inputs_checked);
        Ok(())
    } else {
        for v in report.violations.iter().take(20) {
            let x: String = v.x.iter().map(|&b| if b { '1' } else { '0' }).collect();
            eprintln!("x={x} t={} {:?}", v.t, v.kind);
        }
        println!("FAIL {}/{} inputs", bad.len(), report.inputs_checked);
        Err(Failure::Check(format!("{} violations", report.violations.len())))
    }
}

fn via(v: ViaArg) -> Via {
    match v {
        ViaArg::Direct => Via::Direct,
        ViaArg::Autoregressive => Via::Autoregressive,
        ViaArg::Attention => Via::Attention,
    }
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

fn cmd_simulate_tm(path: &Path, input: &str, route: ViaArg, trace: bool, dump: bool, check: bool) -> CliResult<()> {
    let spec = TmSpec::from_text(&read(path)?)?;
    let omega = parse_bits(input)?;
    let alphabet = tm_alphabet(spec.states());
    let render = |z: &[cotlearn::turing::TmToken]| alphabet.render_seq(encode_seq(z).as_slice());
    if check {
        let mut outs = Vec::new();
        for v in Via::ALL {
            let z = history_via(&spec, &omega, v)?;
            let out = cotlearn::turing::post(*z.last().expect("non-empty history"))?;
            println!("{v}\t{}", bit(out));
            outs.push((v, z, out));
        }
        if outs.iter().any(|(_, z, _)| *z != outs[0].1) {
            for (v, z, _) in &outs {
                eprintln!("{v}: {}", render(z)?);
            }
            return Err(Failure::Check("routes disagree".into()));
        }
        return Ok(());
    }
    let z = history_via(&spec, &omega, via(route))?;
    if trace {
        println!("{}", render(&z)?);
    }
    if dump {
        print!("{}", debug_dump(&z)?);
    }
    println!("{}", bit(cotlearn::turing::post(*z.last().expect("non-empty history"))?));
    Ok(())
}

fn cmd_random_check(machines: usize, states: u32, steps: usize, max_len: usize, seed: u64) -> CliResult<()> {
    if states == 0 || steps == 0 {
        return Err(Failure::Input("--states and --steps must be positive".into()));
    }
    if max_len > 12 {
        return Err(Failure::Input("--max-input-len is limited to 12".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut runs, mut disagreements) = (0usize, 0usize);
    for k in 0..machines {
        let spec = TmSpec::random(states, steps, &mut rng);
        for len in 0..=max_len {
            for p in 0..1usize << len {
                let omega: Vec<bool> = (0..len).map(|i| (p >> (len - 1 - i)) & 1 == 1).collect();
                let direct = history_via(&spec, &omega, Via::Direct)?;
                for v in [Via::Autoregressive, Via::Attention] {
                    if history_via(&spec, &omega, v)? != direct {
                        disagreements += 1;
                        let w: String = omega.iter().map(|&b| bit(b)).collect();
                        eprintln!("machine {k} input {w:?}: {v} disagrees with direct");
                    }
                }
                runs += 1;
            }
        }
    }
    if disagreements == 0 {
        println!("OK {machines} machines, {runs} runs, 0 disagreements");
        Ok(())
    } else {
        println!("FAIL {disagreements} disagreements over {runs} runs");
        Err(Failure::Check("routes disagree".into()))
    }
}

fn cmd_vcdim(family: &str, mode: DimMode, steps: Option<usize>) -> CliResult<()> {
    let kind: FamilyKind = family.parse()?;
    let fam = LookupFamily::new(kind)?;
    let dim = match mode {
        DimMode::Base => vcdim_bruteforce(&fam, &fam.base_pool(), VcMode::Base)?,
        DimMode::E2e => {
            let t = steps.unwrap_or(match kind {
                FamilyKind::E1 { t, .. } => t,
                FamilyKind::Ldim { d } => d + 1,
                FamilyKind::Collapse { .. } => 2,
            });
            if t == 0 {
                return Err(Failure::Input("--T must be positive".into()));
            }
            vcdim_bruteforce(&fam, &fam.e2e_pool(), VcMode::E2e(t))?
        }
    };
    println!("{dim}");
    Ok(())
}

fn cmd_experiment(path: &Path, seed: Option<u64>, output: Option<PathBuf>) -> CliResult<()> {
    let mut cfg: ExperimentConfig = read(path)?.parse()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = output {
        cfg.output = Some(o.display().to_string());
    }
    let rows = run_experiment(&cfg, workers_from_env()?)?;
    let io = |e: std::io::Error| Failure::Input(format!("writing results: {e}"));
    match &cfg.output {
        Some(p) => {
            let fresh = fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true);
            let mut f = OpenOptions::new().create(true).append(true).open(p).map_err(io)?;
            write_csv(&rows, fresh, &mut f).map_err(io)?;
            print!("{}", summarize(&rows));
        }
        None => {
            let mut out = std::io::stdout().lock();
            write_csv(&rows, true, &mut out).map_err(io)?;
            out.flush().map_err(io)?;
            eprint!("{}", summarize(&rows));
        }
    }
    Ok(())
}

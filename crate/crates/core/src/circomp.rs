//! Layered threshold circuits and their compilation into one iterated threshold.
//!
//! A circuit with `n` inputs, depth `L` and width `s` becomes a single bias-free
//! linear threshold `f_w` of dimension `2T+n−1`, with `T = (s+1)^L·n − n`,
//! such that iterating `f_w` for `T` steps on `φ(x) = 1·0^{T−1}·x` ends on
//! `C(x)`. Gate `(l,i)` is emitted at a fixed step `t_li`; every other step is
//! forced to 0 by a large negative weight on the leading 1 of `φ(x)`.

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::linthresh::LinearThreshold;
use crate::rational::{abs_sum, int, one, zero, Rational};
use crate::seqcore::{Token, TokenSeq};
use crate::{Error, Result};

/// Gates in layer `l` (1-based) read the inputs and every gate of layers `< l`,
/// in that order. The output is the last gate of the last layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdCircuit {
    inputs: usize,
    layers: Vec<Vec<Vec<Rational>>>,
}

fn thr(z: &Rational) -> bool {
    !z.is_negative()
}

impl ThresholdCircuit {
    pub fn new(inputs: usize, layers: Vec<Vec<Vec<Rational>>>) -> Result<Self> {
        if inputs == 0 {
            return Err(Error::Invalid("a circuit needs at least one input".into()));
        }
        if layers.is_empty() || layers.iter().any(Vec::is_empty) {
            return Err(Error::Invalid("every layer needs at least one gate".into()));
        }
        let mut fan_in = inputs;
        for (l, layer) in layers.iter().enumerate() {
            for (i, g) in layer.iter().enumerate() {
                if g.len() != fan_in {
                    return Err(Error::Invalid(format!(
                        "gate ({}, {}) has {} weights, expected {fan_in}",
                        l + 1,
                        i + 1,
                        g.len()
                    )));
                }
            }
            fan_in += layer.len();
        }
        Ok(ThresholdCircuit { inputs, layers })
    }

    /// Folds per-gate biases into a constant-1 input appended after `x`.
    ///
    /// `layers[l][i] = (weights over the original predecessors, bias)`; the
    /// resulting circuit has `inputs + 1` inputs and is evaluated on `x·1`.
    pub fn with_biases(inputs: usize, layers: Vec<Vec<(Vec<Rational>, Rational)>>) -> Result<Self> {
        let folded = layers
            .into_iter()
            .map(|layer| {
                layer
                    .into_iter()
                    .map(|(w, b)| {
                        let mut g = Vec::with_capacity(w.len() + 1);
                        g.extend_from_slice(&w[..inputs.min(w.len())]);
                        g.push(b);
                        g.extend_from_slice(&w[inputs.min(w.len())..]);
                        g
                    })
                    .collect()
            })
            .collect();
        ThresholdCircuit::new(inputs + 1, folded)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// The widest layer.
    pub fn width(&self) -> usize {
        self.layers.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn layers(&self) -> &[Vec<Vec<Rational>>] {
        &self.layers
    }

    pub fn gate(&self, l: usize, i: usize) -> &[Rational] {
        &self.layers[l - 1][i - 1]
    }

    /// Values of every gate, layer by layer.
    pub fn eval_all(&self, x: &[bool]) -> Result<Vec<Vec<bool>>> {
        if x.len() != self.inputs {
            return Err(Error::Invalid(format!("expected {} input bits, got {}", self.inputs, x.len())));
        }
        let mut known: Vec<bool> = x.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let vals: Vec<bool> = layer
                .iter()
                .map(|g| {
                    let s = g.iter().zip(&known).filter(|(_, &b)| b).fold(zero(), |acc, (w, _)| acc + w);
                    thr(&s)
                })
                .collect();
            known.extend_from_slice(&vals);
            out.push(vals);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[bool]) -> Result<bool> {
        let all = self.eval_all(x)?;
        Ok(*all.last().and_then(|l| l.last()).expect("non-empty layers"))
    }

    /// Uniform width, and the last gate of each layer (or the last input, for
    /// layer 1) feeds nothing into the next layer.
    pub fn is_normalized(&self) -> bool {
        let s = self.width();
        if self.layers.iter().any(|l| l.len() != s) {
            return false;
        }
        let n = self.inputs;
        self.layers.iter().enumerate().all(|(l, layer)| {
            let dead = if l == 0 { n - 1 } else { n + l * s - 1 };
            layer.iter().all(|g| g[dead].is_zero())
        })
    }

    /// Pads to a normalized circuit computing the same function.
    ///
    /// Already-normalized circuits are returned unchanged. Otherwise a dummy
    /// input is appended (evaluate on `x·0`), every layer below the top is
    /// padded at the end to width `s+1`, and the top layer is padded at the
    /// front so the output stays last. Dummy gates have all-zero weights.
    pub fn normalize(&self) -> ThresholdCircuit {
        if self.is_normalized() {
            return self.clone();
        }
        let n = self.inputs;
        let s1 = self.width() + 1;
        let depth = self.depth();
        let widths: Vec<usize> = self.layers.iter().map(Vec::len).collect();
        let remap = |g: &[Rational], l: usize| -> Vec<Rational> {
            let mut out = vec![zero(); n + 1 + l * s1];
            out[..n].clone_from_slice(&g[..n]);
            let mut src = n;
            for (ell, &w) in widths.iter().enumerate().take(l) {
                for j in 0..w {
                    out[n + 1 + ell * s1 + j] = g[src + j].clone();
                }
                src += w;
            }
            out
        };
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let pad = s1 - layer.len();
                let dummies = std::iter::repeat_n(vec![zero(); n + 1 + l * s1], pad);
                let real = layer.iter().map(|g| remap(g, l));
                if l + 1 == depth {
                    dummies.chain(real).collect()
                } else {
                    real.chain(dummies).collect()
                }
            })
            .collect();
        let c = ThresholdCircuit::new(n + 1, layers).expect("padding preserves shape");
        debug_assert!(c.is_normalized());
        c
    }

    /// Extends an input of the original width to the normalized width with zeros.
    pub fn lift_input(x: &[bool], normalized_inputs: usize) -> Vec<bool> {
        let mut v = x.to_vec();
        v.resize(normalized_inputs, false);
        v
    }

    /// Header `"n s L"`, then `"l i : w_1 … w_k"` per gate.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.inputs, self.width(), self.depth());
        for (l, layer) in self.layers.iter().enumerate() {
            for (i, g) in layer.iter().enumerate() {
                let ws: Vec<String> = g.iter().map(ToString::to_string).collect();
                out.push_str(&format!("{} {} : {}\n", l + 1, i + 1, ws.join(" ")));
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
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("missing \"n s L\" header".into()))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [n, s, depth] = h[..] else {
            return Err(Error::Parse(format!("header {header:?} is not \"n s L\"")));
        };
        let mut layers: Vec<Vec<Vec<Rational>>> = vec![Vec::new(); depth];
        for (no, line) in lines {
            let bad = |m: &str| Error::Parse(format!("line {}: {m}", no + 1));
            let (lhs, rhs) = line.split_once(':').ok_or_else(|| bad("expected \"l i : weights\""))?;
            let idx: Vec<usize> = lhs
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad gate index")))
                .collect::<Result<_>>()?;
            let [l, i] = idx[..] else { return Err(bad("expected two gate indices")) };
            if l == 0 || l > depth {
                return Err(bad("layer index out of range"));
            }
            if i != layers[l - 1].len() + 1 || i > s {
                return Err(bad("gates must be listed in order with index at most s"));
            }
            let w = rhs.split_whitespace().map(crate::rational::parse).collect::<Result<Vec<_>>>()?;
            layers[l - 1].push(w);
        }
        ThresholdCircuit::new(n, layers).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `1 · 0^{T−1} · x`.
pub fn feature_map(x: &[bool], steps: usize) -> TokenSeq {
    let mut z = Vec::with_capacity(steps + x.len());
    if steps > 0 {
        z.push(1);
        z.extend(std::iter::repeat_n(0, steps - 1));
    }
    z.extend(x.iter().map(|&b| b as Token));
    TokenSeq(z)
}

/// The iterated threshold produced by [`compile`], with its schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledThreshold {
    pub weights: Vec<Rational>,
    pub steps: usize,
    pub inputs: usize,
    pub width: usize,
    pub depth: usize,
    /// `p̃_1, …, p̃_{L+1}`.
    pub tilde_p: Vec<usize>,
    /// `t_indices[l-1][i-1] = t_li`.
    pub t_indices: Vec<Vec<usize>>,
    pub gating: Rational,
}

struct Schedule {
    tilde_p: Vec<usize>,
    t_indices: Vec<Vec<usize>>,
    steps: usize,
}

fn schedule(n: usize, s: usize, depth: usize) -> Schedule {
    let mut tilde_p = vec![n];
    for _ in 0..depth {
        tilde_p.push((s + 1) * tilde_p[tilde_p.len() - 1]);
    }
    let mut t_indices: Vec<Vec<usize>> = Vec::with_capacity(depth);
    t_indices.push((1..=s).map(|i| n * i).collect());
    for l in 2..=depth {
        let base = t_indices[l - 2][s - 1];
        t_indices.push((1..=s).map(|i| base + i * tilde_p[l - 1]).collect());
    }
    let steps = tilde_p[depth] - n;
    Schedule { tilde_p, t_indices, steps }
}

impl CompiledThreshold {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// The bias-free threshold `f_w`.
    pub fn threshold(&self) -> LinearThreshold {
        LinearThreshold::new(self.weights.clone(), zero())
    }

    /// Output step of each gate keyed by step, `None` for gated steps.
    pub fn gate_at_step(&self) -> Vec<Option<(usize, usize)>> {
        let mut at = vec![None; self.steps + 1];
        for (l, row) in self.t_indices.iter().enumerate() {
            for (i, &t) in row.iter().enumerate() {
                at[t] = Some((l + 1, i + 1));
            }
        }
        at
    }

    /// Rebuilds the schedule for `circuit` around externally supplied weights.
    pub fn from_parts(circuit: &ThresholdCircuit, weights: Vec<Rational>, steps: usize) -> Result<Self> {
        if !circuit.is_normalized() {
            return Err(Error::NotNormalized("schedule needs the normalized circuit".into()));
        }
        let (n, s, depth) = (circuit.inputs(), circuit.width(), circuit.depth());
        let sch = schedule(n, s, depth);
        if sch.steps != steps {
            return Err(Error::Invalid(format!("step count {steps} does not match the circuit's {}", sch.steps)));
        }
        let gating = one() + abs_sum(circuit.layers.iter().flatten().flatten());
        Ok(CompiledThreshold {
            weights,
            steps,
            inputs: n,
            width: s,
            depth,
            tilde_p: sch.tilde_p,
            t_indices: sch.t_indices,
            gating,
        })
    }

    /// Threshold line followed by `"T=…"`.
    pub fn to_text(&self) -> String {
        format!("{}\nT={}\n", self.threshold().to_text(), self.steps)
    }

    /// Parses the weights and step count written by [`CompiledThreshold::to_text`].
    pub fn parse_parts(text: &str) -> Result<(LinearThreshold, usize)> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let f = LinearThreshold::from_text(lines.next().ok_or_else(|| Error::Parse("empty file".into()))?)?;
        let t_line = lines.next().ok_or_else(|| Error::Parse("missing \"T=…\" line".into()))?;
        let steps = t_line
            .strip_prefix("T=")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad step line {t_line:?}")))?;
        if !f.bias.is_zero() {
            return Err(Error::Parse("compiled thresholds have zero bias".into()));
        }
        Ok((f, steps))
    }
}

/// Compiles a normalized circuit.
pub fn compile(circuit: &ThresholdCircuit) -> Result<CompiledThreshold> {
    if !circuit.is_normalized() {
        return Err(Error::NotNormalized(
            "layers must share one width and the last node of each previous layer must be unused".into(),
        ));
    }
    let (n, s, depth) = (circuit.inputs(), circuit.width(), circuit.depth());
    let sch = schedule(n, s, depth);
    let steps = sch.steps;

    // w̃_li: input weights, then p̃_ℓ − 1 zeros before each weight from layer ℓ.
    let tilde = |l: usize, g: &[Rational]| -> Vec<Rational> {
        let mut out = Vec::with_capacity(sch.tilde_p[l - 1]);
        out.extend_from_slice(&g[..n]);
        for ell in 1..l {
            for j in 0..s {
                out.extend(std::iter::repeat_n(zero(), sch.tilde_p[ell - 1] - 1));
                out.push(g[n + (ell - 1) * s + j].clone());
            }
        }
        debug_assert_eq!(out.len(), sch.tilde_p[l - 1]);
        out
    };

    let gating = one() + abs_sum(circuit.layers.iter().flatten().flatten());
    let mut in_i = vec![false; steps + 1];
    for &t in sch.t_indices.iter().flatten() {
        in_i[t] = true;
    }
    let mut w: Vec<Rational> = (1..=steps).rev().map(|t| if in_i[t] { zero() } else { -gating.clone() }).collect();
    for l in (1..=depth).rev() {
        for i in (1..=s).rev() {
            w.extend(tilde(l, circuit.gate(l, i)));
        }
    }
    w.extend(std::iter::repeat_n(zero(), n - 1));

    Ok(CompiledThreshold {
        weights: w,
        steps,
        inputs: n,
        width: s,
        depth,
        tilde_p: sch.tilde_p,
        t_indices: sch.t_indices,
        gating,
    })
}

/// Normalizes when needed, then compiles.
pub fn compile_circuit(circuit: &ThresholdCircuit) -> Result<CompiledThreshold> {
    compile(&circuit.normalize())
}

/// `T ≤ (s+2)^L(n+1)` and `d ≤ 2(s+2)^L(n+1)` for the pre-normalization `(n, s, L)`.
pub fn size_bounds_hold(n: usize, s: usize, depth: usize, steps: usize, dim: usize) -> bool {
    let bound = (s as u128 + 2).pow(depth as u32) * (n as u128 + 1);
    (steps as u128) <= bound && (dim as u128) <= 2 * bound
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// `e2e(f_w, φ(x), T) ≠ C(x)`.
    FinalAnswer,
    /// The token at `t_li` differs from the value of gate `(l, i)`.
    GateValue { layer: usize, gate: usize },
    /// A step outside the schedule emitted 1.
    NonZeroGap,
    /// A step outside the schedule had pre-activation above −1.
    GatingMargin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub x: Vec<bool>,
    pub t: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub inputs_checked: usize,
    pub steps: usize,
    pub dimension: usize,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const VERIFY_MAX_INPUTS: usize = 12;

/// Runs the compiled threshold on every `x ∈ {0,1}^n` and checks the final
/// answer, every scheduled gate value, and the zero output and −1 margin of
/// every other step.
///
/// `circuit` may be unnormalized; inputs are then lifted with the dummy zero.
pub fn verify_compilation(circuit: &ThresholdCircuit, compiled: &CompiledThreshold) -> Result<VerificationReport> {
    let n = circuit.inputs();
    if n > VERIFY_MAX_INPUTS {
        return Err(Error::Guard(format!("{n} inputs exceeds the exhaustive limit of {VERIFY_MAX_INPUTS}")));
    }
    let norm = circuit.normalize();
    if (norm.inputs(), norm.width(), norm.depth()) != (compiled.inputs, compiled.width, compiled.depth) {
        return Err(Error::Invalid("compiled threshold was built for a different circuit shape".into()));
    }
    let f = compiled.threshold();
    let at = compiled.gate_at_step();
    let minus_one = int(-1);
    let per_input: Vec<Vec<Violation>> = (0..1usize << n)
        .into_par_iter()
        .map(|p| -> Result<Vec<Violation>> {
            let x: Vec<bool> = (0..n).map(|i| (p >> (n - 1 - i)) & 1 == 1).collect();
            let lifted = ThresholdCircuit::lift_input(&x, norm.inputs());
            let gates = norm.eval_all(&lifted)?;
            let want = circuit.eval(&x)?;
            let mut z = feature_map(&lifted, compiled.steps).0;
            let mut bad = Vec::new();
            let mut flag = |t: usize, kind| bad.push(Violation { x: x.clone(), t, kind });
            for (t, slot) in at.iter().enumerate().skip(1) {
                let pre = f.pre_activation(&z)?;
                let tok = thr(&pre);
                match *slot {
                    Some((l, i)) if tok != gates[l - 1][i - 1] => flag(t, ViolationKind::GateValue { layer: l, gate: i }),
                    Some(_) => {}
                    None => {
                        if tok {
                            flag(t, ViolationKind::NonZeroGap);
                        }
                        if pre > minus_one {
                            flag(t, ViolationKind::GatingMargin);
                        }
                    }
                }
                if t == compiled.steps && tok != want {
                    flag(t, ViolationKind::FinalAnswer);
                }
                z.push(tok as Token);
            }
            Ok(bad)
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport {
        inputs_checked: 1 << n,
        steps: compiled.steps,
        dimension: compiled.dimension(),
        violations: per_input.into_iter().flatten().collect(),
    })
}

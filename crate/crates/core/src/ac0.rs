//! Unbounded fan-in AND/OR/NOT circuits and their sensitivity.
//!
//! Size counts AND/OR gates. Depth is the largest number of AND/OR gates on
//! any input-to-output path; NOT gates and constants are free.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{difference, Estimate, Proportion};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Not,
    Const(bool),
}

/// A gate input: either a circuit input or an earlier gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wire {
    Input(usize),
    Gate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub fanin: Vec<Wire>,
}

/// A topologically ordered circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ac0Circuit {
    num_inputs: usize,
    gates: Vec<Gate>,
    output: Wire,
}

impl Ac0Circuit {
    /// Validates ordering, arities and references.
    pub fn new(num_inputs: usize, gates: Vec<Gate>, output: Wire) -> Result<Self> {
        for (id, gate) in gates.iter().enumerate() {
            match gate.kind {
                GateKind::Not if gate.fanin.len() != 1 => {
                    return Err(Error::MalformedCircuit { gate: id, reason: "NOT needs exactly one input" })
                }
                GateKind::Const(_) if !gate.fanin.is_empty() => {
                    return Err(Error::MalformedCircuit { gate: id, reason: "constants take no inputs" })
                }
                _ => {}
            }
            for w in &gate.fanin {
                check_wire(*w, num_inputs, id)?;
            }
        }
        check_wire(output, num_inputs, gates.len())?;
        Ok(Self { num_inputs, gates, output })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> Wire {
        self.output
    }

    pub fn size(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g.kind, GateKind::And | GateKind::Or)).count()
    }

    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.gates.len()];
        let at = |w: Wire, d: &[usize]| match w {
            Wire::Input(_) => 0,
            Wire::Gate(g) => d[g],
        };
        for (i, gate) in self.gates.iter().enumerate() {
            let below = gate.fanin.iter().map(|&w| at(w, &d)).max().unwrap_or(0);
            d[i] = match gate.kind {
                GateKind::And | GateKind::Or => below + 1,
                GateKind::Not => below,
                GateKind::Const(_) => 0,
            };
        }
        at(self.output, &d)
    }

    /// Constant output value, if the output is a constant gate.
    pub fn as_constant(&self) -> Option<bool> {
        match self.output {
            Wire::Gate(g) => match self.gates[g].kind {
                GateKind::Const(b) => Some(b),
                _ => None,
            },
            Wire::Input(_) => None,
        }
    }

    pub fn evaluate(&self, input: &[bool]) -> Result<bool> {
        if input.len() != self.num_inputs {
            return Err(Error::LengthMismatch { expected: self.num_inputs, got: input.len() });
        }
        let mut scratch = Vec::with_capacity(self.gates.len());
        Ok(self.eval_into(input, &mut scratch))
    }

    /// Evaluates without a length check, reusing `scratch`.
    pub(crate) fn eval_into(&self, input: &[bool], scratch: &mut Vec<bool>) -> bool {
        scratch.clear();
        for gate in &self.gates {
            let read = |w: &Wire| match *w {
                Wire::Input(i) => input[i],
                Wire::Gate(g) => scratch[g],
            };
            let v = match gate.kind {
                GateKind::And => gate.fanin.iter().all(read),
                GateKind::Or => gate.fanin.iter().any(read),
                GateKind::Not => !read(&gate.fanin[0]),
                GateKind::Const(b) => b,
            };
            scratch.push(v);
        }
        match self.output {
            Wire::Input(i) => input[i],
            Wire::Gate(g) => scratch[g],
        }
    }

    /// Equivalent circuit with NOT gates only directly above inputs.
    pub fn normalize(&self) -> Ac0Circuit {
        let mut b = CircuitBuilder::new(self.num_inputs);
        // pos[g], neg[g]: wires computing gate g and its negation.
        let mut pos: Vec<Option<Wire>> = vec![None; self.gates.len()];
        let mut neg: Vec<Option<Wire>> = vec![None; self.gates.len()];
        let mut neg_inputs: Vec<Option<Wire>> = vec![None; self.num_inputs];

        fn lit(
            w: Wire,
            negate: bool,
            src: &Ac0Circuit,
            b: &mut CircuitBuilder,
            pos: &mut Vec<Option<Wire>>,
            neg: &mut Vec<Option<Wire>>,
            neg_inputs: &mut Vec<Option<Wire>>,
        ) -> Wire {
            match w {
                Wire::Input(i) if !negate => Wire::Input(i),
                Wire::Input(i) => *neg_inputs[i].get_or_insert_with(|| b.not(Wire::Input(i))),
                Wire::Gate(g) => {
                    let memo = if negate { &neg[g] } else { &pos[g] };
                    if let Some(w) = *memo {
                        return w;
                    }
                    let gate = &src.gates[g];
                    let out = match gate.kind {
                        GateKind::Const(v) => b.constant(v ^ negate),
                        GateKind::Not => lit(gate.fanin[0], !negate, src, b, pos, neg, neg_inputs),
                        GateKind::And | GateKind::Or => {
                            let kids: Vec<Wire> = gate
                                .fanin
                                .iter()
                                .map(|&c| lit(c, negate, src, b, pos, neg, neg_inputs))
                                .collect();
                            let is_and = (gate.kind == GateKind::And) ^ negate;
                            if is_and {
                                b.and(kids)
                            } else {
                                b.or(kids)
                            }
                        }
                    };
                    if negate {
                        neg[g] = Some(out);
                    } else {
                        pos[g] = Some(out);
                    }
                    out
                }
            }
        }

        let out = lit(self.output, false, self, &mut b, &mut pos, &mut neg, &mut neg_inputs);
        b.finish(out).expect("normalisation preserves validity")
    }

    /// Replaces every input by a literal over `new_inputs` fresh inputs, then
    /// propagates constants and drops unreachable gates.
    pub fn substitute(&self, new_inputs: usize, literals: &[Literal]) -> Result<Ac0Circuit> {
        if literals.len() != self.num_inputs {
            return Err(Error::LengthMismatch { expected: self.num_inputs, got: literals.len() });
        }
        let mut b = CircuitBuilder::new(new_inputs);
        let mut negated: Vec<Option<Wire>> = vec![None; new_inputs];
        let mut resolved: Vec<Node> = Vec::with_capacity(self.gates.len());
        let mut input_nodes = Vec::with_capacity(self.num_inputs);
        for l in literals {
            input_nodes.push(match *l {
                Literal::Const(v) => Node::Const(v),
                Literal::Pos(j) | Literal::Neg(j) if j >= new_inputs => {
                    return Err(Error::InvalidParameter("literal references a missing input"))
                }
                Literal::Pos(j) => Node::Wire(Wire::Input(j)),
                Literal::Neg(j) => {
                    Node::Wire(*negated[j].get_or_insert_with(|| b.not(Wire::Input(j))))
                }
            });
        }
        let node = |w: Wire, resolved: &[Node]| match w {
            Wire::Input(i) => input_nodes[i],
            Wire::Gate(g) => resolved[g],
        };
        for gate in &self.gates {
            let n = match gate.kind {
                GateKind::Const(v) => Node::Const(v),
                GateKind::Not => match node(gate.fanin[0], &resolved) {
                    Node::Const(v) => Node::Const(!v),
                    Node::Wire(w) => Node::Wire(b.not(w)),
                },
                GateKind::And | GateKind::Or => {
                    let is_and = gate.kind == GateKind::And;
                    let mut kids = Vec::new();
                    let mut decided = None;
                    for &c in &gate.fanin {
                        match node(c, &resolved) {
                            // AND absorbs 1, is decided by 0; OR the reverse.
                            Node::Const(v) if v == is_and => {}
                            Node::Const(v) => {
                                decided = Some(v);
                                break;
                            }
                            Node::Wire(w) => kids.push(w),
                        }
                    }
                    match decided {
                        Some(v) => Node::Const(v),
                        None if kids.is_empty() => Node::Const(is_and),
                        None if kids.len() == 1 => Node::Wire(kids[0]),
                        None if is_and => Node::Wire(b.and(kids)),
                        None => Node::Wire(b.or(kids)),
                    }
                }
            };
            resolved.push(n);
        }
        let out = match node(self.output, &resolved) {
            Node::Const(v) => b.constant(v),
            Node::Wire(w) => w,
        };
        Ok(b.finish(out)?.prune())
    }

    /// Drops gates the output does not depend on.
    pub fn prune(&self) -> Ac0Circuit {
        let mut live = vec![false; self.gates.len()];
        if let Wire::Gate(g) = self.output {
            live[g] = true;
        }
        for g in (0..self.gates.len()).rev() {
            if live[g] {
                for w in &self.gates[g].fanin {
                    if let Wire::Gate(c) = *w {
                        live[c] = true;
                    }
                }
            }
        }
        let mut remap = vec![usize::MAX; self.gates.len()];
        let mut gates = Vec::new();
        let fix = |w: Wire, remap: &[usize]| match w {
            Wire::Gate(g) => Wire::Gate(remap[g]),
            w => w,
        };
        for (g, gate) in self.gates.iter().enumerate() {
            if live[g] {
                remap[g] = gates.len();
                gates.push(Gate {
                    kind: gate.kind,
                    fanin: gate.fanin.iter().map(|&w| fix(w, &remap)).collect(),
                });
            }
        }
        Ac0Circuit { num_inputs: self.num_inputs, gates, output: fix(self.output, &remap) }
    }

    /// The circuit `x -> C(x[perm[0]], x[perm[1]], ...)`. Feeding it
    /// `x_perm` where `x_perm[perm[i]] = x[i]` reproduces `C(x)`.
    pub fn permute_inputs(&self, perm: &[usize]) -> Result<Ac0Circuit> {
        let lits: Vec<Literal> = perm.iter().map(|&j| Literal::Pos(j)).collect();
        let fix = |w: Wire| match w {
            Wire::Input(i) => Wire::Input(perm[i]),
            w => w,
        };
        if lits.len() != self.num_inputs {
            return Err(Error::LengthMismatch { expected: self.num_inputs, got: perm.len() });
        }
        let gates = self
            .gates
            .iter()
            .map(|g| Gate { kind: g.kind, fanin: g.fanin.iter().map(|&w| fix(w)).collect() })
            .collect();
        Ac0Circuit::new(self.num_inputs, gates, fix(self.output))
    }
}

fn check_wire(w: Wire, num_inputs: usize, before: usize) -> Result<()> {
    match w {
        Wire::Input(i) if i >= num_inputs => {
            Err(Error::MalformedCircuit { gate: before, reason: "input index out of range" })
        }
        Wire::Gate(g) if g >= before => {
            Err(Error::MalformedCircuit { gate: before, reason: "reference to a later gate" })
        }
        _ => Ok(()),
    }
}

#[derive(Clone, Copy)]
enum Node {
    Const(bool),
    Wire(Wire),
}

/// What an input is replaced by in [`Ac0Circuit::substitute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Literal {
    Const(bool),
    Pos(usize),
    Neg(usize),
}

/// Incremental circuit construction.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    num_inputs: usize,
    gates: Vec<Gate>,
}

impl CircuitBuilder {
    pub fn new(num_inputs: usize) -> Self {
        Self { num_inputs, gates: Vec::new() }
    }

    pub fn input(&self, i: usize) -> Wire {
        Wire::Input(i)
    }

    fn push(&mut self, kind: GateKind, fanin: Vec<Wire>) -> Wire {
        self.gates.push(Gate { kind, fanin });
        Wire::Gate(self.gates.len() - 1)
    }

    pub fn and(&mut self, fanin: Vec<Wire>) -> Wire {
        self.push(GateKind::And, fanin)
    }

    pub fn or(&mut self, fanin: Vec<Wire>) -> Wire {
        self.push(GateKind::Or, fanin)
    }

    pub fn not(&mut self, w: Wire) -> Wire {
        self.push(GateKind::Not, vec![w])
    }

    pub fn constant(&mut self, v: bool) -> Wire {
        self.push(GateKind::Const(v), Vec::new())
    }

    /// DNF that is 1 iff at least `k` of `wires` are 1.
    pub fn threshold(&mut self, wires: &[Wire], k: usize) -> Wire {
        if k == 0 {
            return self.constant(true);
        }
        if k > wires.len() {
            return self.constant(false);
        }
        let mut terms = Vec::new();
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            let t = self.and(pick.iter().map(|&i| wires[i]).collect());
            terms.push(t);
            // next k-combination in lexicographic order
            let mut i = k;
            while i > 0 && pick[i - 1] == wires.len() - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            pick[i - 1] += 1;
            for j in i..k {
                pick[j] = pick[j - 1] + 1;
            }
        }
        self.or(terms)
    }

    /// Depth-2 DNF for the parity of `wires` (exponential size).
    pub fn parity_dnf(&mut self, wires: &[Wire]) -> Wire {
        let n = wires.len();
        let negs: Vec<Wire> = wires.iter().map(|&w| self.not(w)).collect();
        let mut terms = Vec::new();
        for mask in 0usize..(1 << n) {
            if mask.count_ones() % 2 == 1 {
                let lits = (0..n).map(|i| if (mask >> i) & 1 == 1 { wires[i] } else { negs[i] }).collect();
                terms.push(self.and(lits));
            }
        }
        self.or(terms)
    }

    pub fn finish(self, output: Wire) -> Result<Ac0Circuit> {
        Ac0Circuit::new(self.num_inputs, self.gates, output)
    }
}

/// Standard circuits used in tests and demos.
pub mod library {
    use super::*;

    pub fn and_n(n: usize) -> Ac0Circuit {
        let mut b = CircuitBuilder::new(n);
        let o = b.and((0..n).map(Wire::Input).collect());
        b.finish(o).unwrap()
    }

    pub fn or_n(n: usize) -> Ac0Circuit {
        let mut b = CircuitBuilder::new(n);
        let o = b.or((0..n).map(Wire::Input).collect());
        b.finish(o).unwrap()
    }

    pub fn parity_n(n: usize) -> Ac0Circuit {
        let mut b = CircuitBuilder::new(n);
        let ws: Vec<Wire> = (0..n).map(Wire::Input).collect();
        let o = b.parity_dnf(&ws);
        b.finish(o).unwrap()
    }

    /// Output equals input `i`.
    pub fn dictator(n: usize, i: usize) -> Ac0Circuit {
        Ac0Circuit::new(n, Vec::new(), Wire::Input(i)).unwrap()
    }

    /// A random layered circuit with `gates` AND/OR gates (plus NOTs) over
    /// `n` inputs. Fan-in is 1 to 4.
    pub fn random<R: RngCore + ?Sized>(n: usize, gates: usize, rng: &mut R) -> Ac0Circuit {
        let mut b = CircuitBuilder::new(n);
        let mut pool: Vec<Wire> = (0..n).map(Wire::Input).collect();
        let mut last = Wire::Input(0);
        for _ in 0..gates {
            let fan = rng.random_range(1..=4usize.min(pool.len()));
            let mut kids = Vec::with_capacity(fan);
            for _ in 0..fan {
                let mut w = pool[rng.random_range(0..pool.len())];
                if rng.random_bool(0.3) {
                    w = b.not(w);
                }
                kids.push(w);
            }
            last = if rng.random_bool(0.5) { b.and(kids) } else { b.or(kids) };
            pool.push(last);
        }
        b.finish(last).unwrap()
    }
}

pub fn evaluate(circuit: &Ac0Circuit, input: &[bool]) -> Result<bool> {
    circuit.evaluate(input)
}

/// Number of single-bit flips of `x` that change the output.
pub fn sensitivity_at(circuit: &Ac0Circuit, x: &[bool]) -> Result<usize> {
    let base = circuit.evaluate(x)?;
    let mut y = x.to_vec();
    let mut scratch = Vec::new();
    let mut s = 0;
    for i in 0..y.len() {
        y[i] = !y[i];
        if circuit.eval_into(&y, &mut scratch) != base {
            s += 1;
        }
        y[i] = !y[i];
    }
    Ok(s)
}

fn bits_of(mut v: u64, n: usize, out: &mut Vec<bool>) {
    out.clear();
    for _ in 0..n {
        out.push(v & 1 == 1);
        v >>= 1;
    }
}

/// Monte-Carlo estimate of `Pr_x[s^x(C) >= t]` over uniform `x`.
pub fn sensitivity_tail_estimate(
    circuit: &Ac0Circuit,
    t: usize,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    Ok(sensitivity_tail_curve(circuit, &[t], trials, seed)?[0])
}

/// Tail estimates at several thresholds from one shared sample, so the
/// curve is nonincreasing in `t`.
pub fn sensitivity_tail_curve(
    circuit: &Ac0Circuit,
    thresholds: &[usize],
    trials: u64,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![Proportion::default(); thresholds.len()];
    let mut x = vec![false; circuit.num_inputs()];
    for _ in 0..trials {
        for b in x.iter_mut() {
            *b = rng.random();
        }
        let s = sensitivity_at(circuit, &x)?;
        for (c, &t) in counts.iter_mut().zip(thresholds) {
            c.record(s >= t);
        }
    }
    Ok(counts.iter().map(Proportion::estimate).collect())
}

/// Exact `Pr_x[s^x(C) >= t]` by enumerating all inputs (at most 2^24).
pub fn sensitivity_tail_exact(circuit: &Ac0Circuit, t: usize) -> Result<f64> {
    let n = circuit.num_inputs();
    if n > 24 {
        return Err(Error::InvalidParameter("exhaustive enumeration limited to 24 inputs"));
    }
    let mut x = Vec::with_capacity(n);
    let mut hits = 0u64;
    for v in 0..(1u64 << n) {
        bits_of(v, n, &mut x);
        if sensitivity_at(circuit, &x)? >= t {
            hits += 1;
        }
    }
    Ok(hits as f64 / (1u64 << n) as f64)
}

/// Input viewed as a `rows x width` matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMatrixShape {
    pub rows: usize,
    pub width: usize,
}

impl BlockMatrixShape {
    pub fn new(rows: usize, width: usize) -> Result<Self> {
        if rows == 0 || width == 0 {
            return Err(Error::InvalidParameter("matrix shape needs at least one row and column"));
        }
        Ok(Self { rows, width })
    }

    pub fn len(&self) -> usize {
        self.rows * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, circuit: &Ac0Circuit) -> Result<()> {
        if circuit.num_inputs() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: circuit.num_inputs() });
        }
        Ok(())
    }
}

/// A distribution over rows of a block matrix.
pub trait RowSampler {
    fn width(&self) -> usize;
    fn sample_row(&self, rng: &mut dyn RngCore, out: &mut [bool]);
}

/// A row distribution given by integer weights over all `2^width` rows,
/// so every probability is an exact rational `weight / total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedRows {
    width: usize,
    weights: Vec<u64>,
    total: u64,
}

impl WeightedRows {
    pub fn new(width: usize, weights: Vec<u64>) -> Result<Self> {
        if width > 16 || weights.len() != 1usize << width {
            return Err(Error::InvalidParameter("weights must cover all 2^width rows, width <= 16"));
        }
        let total = weights.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("row weights sum to zero"));
        }
        Ok(Self { width, weights, total })
    }

    pub fn uniform(width: usize) -> Result<Self> {
        Self::new(width, vec![1; 1usize << width.min(16)])
    }

    /// Independent bits where bit `j` is 1 with probability
    /// `ones[j] / 2^bits`.
    pub fn independent(width: usize, ones: &[u64], bits: u32) -> Result<Self> {
        if ones.len() != width || ones.iter().any(|&o| o > 1 << bits) {
            return Err(Error::InvalidParameter("per-bit weights must be at most 2^bits"));
        }
        let den = 1u64 << bits;
        let weights = (0..1usize << width)
            .map(|row| {
                (0..width)
                    .map(|j| if (row >> j) & 1 == 1 { ones[j] } else { den - ones[j] })
                    .product()
            })
            .collect();
        Self::new(width, weights)
    }

    pub fn weight(&self, row: usize) -> u64 {
        self.weights[row]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, row: usize) -> f64 {
        self.weights[row] as f64 / self.total as f64
    }
}

impl RowSampler for WeightedRows {
    fn width(&self) -> usize {
        self.width
    }

    fn sample_row(&self, rng: &mut dyn RngCore, out: &mut [bool]) {
        let mut u = rng.random_range(0..self.total);
        let mut row = self.weights.len() - 1;
        for (r, &w) in self.weights.iter().enumerate() {
            if u < w {
                row = r;
                break;
            }
            u -= w;
        }
        for (j, b) in out.iter_mut().enumerate() {
            *b = (row >> j) & 1 == 1;
        }
    }
}

/// Monte-Carlo estimate of `Pr_y[C(x) != C(y)]` where `y` replaces a
/// uniformly chosen row of `x` with a fresh draw from `dist`.
pub fn block_resample_flip_prob(
    circuit: &Ac0Circuit,
    shape: BlockMatrixShape,
    dist: &dyn RowSampler,
    x: &[bool],
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    shape.check(circuit)?;
    if dist.width() != shape.width || x.len() != shape.len() {
        return Err(Error::ShapeMismatch);
    }
    let mut rng = rng_from_seed(seed);
    let base = circuit.evaluate(x)?;
    let mut y = x.to_vec();
    let mut scratch = Vec::new();
    let mut p = Proportion::default();
    for _ in 0..trials {
        let row = rng.random_range(0..shape.rows);
        let range = row * shape.width..(row + 1) * shape.width;
        dist.sample_row(&mut rng, &mut y[range.clone()]);
        p.record(circuit.eval_into(&y, &mut scratch) != base);
        y[range.clone()].copy_from_slice(&x[range]);
    }
    Ok(p.estimate())
}

/// Exact `Pr_y[C(x) != C(y)]` for a fixed `x`.
pub fn block_resample_flip_prob_exact(
    circuit: &Ac0Circuit,
    shape: BlockMatrixShape,
    dist: &WeightedRows,
    x: &[bool],
) -> Result<f64> {
    let (num, den) = flip_ratio(circuit, shape, dist, x)?;
    Ok(num as f64 / den as f64)
}

/// `(numerator, denominator)` of the exact flip probability: the numerator
/// is `sum_i sum_r w_r [C(x) != C(x with row i := r)]`, the denominator
/// `K * W`.
fn flip_ratio(
    circuit: &Ac0Circuit,
    shape: BlockMatrixShape,
    dist: &WeightedRows,
    x: &[bool],
) -> Result<(u128, u128)> {
    shape.check(circuit)?;
    if dist.width != shape.width || x.len() != shape.len() {
        return Err(Error::ShapeMismatch);
    }
    let base = circuit.evaluate(x)?;
    let mut y = x.to_vec();
    let mut scratch = Vec::new();
    let mut num = 0u128;
    for i in 0..shape.rows {
        for r in 0..dist.weights.len() {
            let w = dist.weights[r];
            if w == 0 {
                continue;
            }
            for j in 0..shape.width {
                y[i * shape.width + j] = (r >> j) & 1 == 1;
            }
            if circuit.eval_into(&y, &mut scratch) != base {
                num += w as u128;
            }
        }
        y[i * shape.width..(i + 1) * shape.width]
            .copy_from_slice(&x[i * shape.width..(i + 1) * shape.width]);
    }
    Ok((num, shape.rows as u128 * dist.total as u128))
}

/// Exact `E_{x ~ D^K} Pr_y[C(x) != C(y)]`, enumerating all `x` (K*M <= 20).
pub fn expected_block_flip_prob_exact(
    circuit: &Ac0Circuit,
    shape: BlockMatrixShape,
    dist: &WeightedRows,
) -> Result<f64> {
    if shape.len() > 20 {
        return Err(Error::InvalidParameter("exhaustive enumeration limited to 20 input bits"));
    }
    let mut x = Vec::with_capacity(shape.len());
    let mut acc = 0.0;
    for v in 0..(1u64 << shape.len()) {
        bits_of(v, shape.len(), &mut x);
        let px: f64 = (0..shape.rows)
            .map(|i| dist.probability(((v >> (i * shape.width)) & ((1 << shape.width) - 1)) as usize))
            .product();
        if px == 0.0 {
            continue;
        }
        acc += px * block_resample_flip_prob_exact(circuit, shape, dist, &x)?;
    }
    Ok(acc)
}

/// `g_w(z) = C(w_z)` where row `i` of `w_z` is row `i` of `w1` if `z_i = 1`
/// and of `w0` otherwise. Each matrix bit becomes `0`, `1`, `z_i` or
/// `not z_i`, so neither size nor depth grows.
pub fn gw_reduction(
    circuit: &Ac0Circuit,
    shape: BlockMatrixShape,
    w0: &[bool],
    w1: &[bool],
) -> Result<Ac0Circuit> {
    shape.check(circuit)?;
    if w0.len() != shape.len() || w1.len() != shape.len() {
        return Err(Error::ShapeMismatch);
    }
    let lits: Vec<Literal> = (0..shape.len())
        .map(|idx| {
            let i = idx / shape.width;
            match (w0[idx], w1[idx]) {
                (a, b) if a == b => Literal::Const(a),
                (false, true) => Literal::Pos(i),
                _ => Literal::Neg(i),
            }
        })
        .collect();
    circuit.substitute(shape.rows, &lits)
}

/// Both sides of the averaging identity
/// `K Pr_y[C(x) != C(y)] = E_{x' ~ D^K, z}[s^z(g_w)]` (with `w_z = x`,
/// `w_{not z} = x'`) for one `x`, as exact integers over a common
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AveragingIdentity {
    pub lhs: u128,
    pub rhs: u128,
}

impl AveragingIdentity {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// Evaluates both sides for every `x` in the support of `D^K`, building
/// each `g_w` with [`gw_reduction`] and measuring its sensitivity directly.
pub fn averaging_identity_exhaustive(
    circuit: &Ac0Circuit,
    shape: BlockMatrixShape,
    dist: &WeightedRows,
) -> Result<Vec<AveragingIdentity>> {
    shape.check(circuit)?;
    if shape.len() > 12 || shape.rows > 12 {
        return Err(Error::InvalidParameter("exhaustive identity check limited to K*M <= 12"));
    }
    let (k, m) = (shape.rows, shape.width);
    let row_of = |v: u64, i: usize| ((v >> (i * m)) & ((1 << m) - 1)) as usize;
    let weight_of = |v: u64| -> u128 { (0..k).map(|i| dist.weight(row_of(v, i)) as u128).product() };
    let w_total = dist.total() as u128;
    let mut out = Vec::new();
    let (mut x, mut xp) = (Vec::new(), Vec::new());
    for xv in 0..(1u64 << shape.len()) {
        if weight_of(xv) == 0 {
            continue;
        }
        bits_of(xv, shape.len(), &mut x);
        // LHS = K * num / (K * W) = num / W.
        let (num, _) = flip_ratio(circuit, shape, dist, &x)?;
        // RHS = sum_{x'} prod_i w(x'_i) * sum_z s^z(g_w) / (W^K 2^K).
        let mut rhs = 0u128;
        for xpv in 0..(1u64 << shape.len()) {
            let wxp = weight_of(xpv);
            if wxp == 0 {
                continue;
            }
            bits_of(xpv, shape.len(), &mut xp);
            let mut sens = 0u128;
            for z in 0..(1usize << k) {
                let (mut w0, mut w1) = (x.clone(), xp.clone());
                for i in 0..k {
                    if (z >> i) & 1 == 1 {
                        let r = i * m..(i + 1) * m;
                        w1[r.clone()].copy_from_slice(&x[r.clone()]);
                        w0[r.clone()].copy_from_slice(&xp[r]);
                    } else {
                        let r = i * m..(i + 1) * m;
                        w0[r.clone()].copy_from_slice(&x[r.clone()]);
                        w1[r.clone()].copy_from_slice(&xp[r]);
                    }
                }
                let g = gw_reduction(circuit, shape, &w0, &w1)?;
                let zbits: Vec<bool> = (0..k).map(|i| (z >> i) & 1 == 1).collect();
                sens += sensitivity_at(&g, &zbits)? as u128;
            }
            rhs += wxp * sens;
        }
        let two_k = 1u128 << k;
        out.push(AveragingIdentity {
            lhs: num * w_total.pow(k as u32) * two_k,
            rhs: rhs * w_total,
        });
    }
    Ok(out)
}

/// A distribution over full circuit inputs.
pub trait InputSampler {
    fn arity(&self) -> usize;
    fn sample_input(&self, rng: &mut dyn RngCore) -> Vec<bool>;
}

/// Uniform bits.
#[derive(Debug, Clone, Copy)]
pub struct UniformInputs(pub usize);

impl InputSampler for UniformInputs {
    fn arity(&self) -> usize {
        self.0
    }
    fn sample_input(&self, rng: &mut dyn RngCore) -> Vec<bool> {
        (0..self.0).map(|_| rng.random()).collect()
    }
}

/// Estimates `Pr_a[C = 1] - Pr_b[C = 1]` with independent sample streams.
pub fn distinguishing_advantage(
    circuit: &Ac0Circuit,
    dist_a: &dyn InputSampler,
    dist_b: &dyn InputSampler,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    let n = circuit.num_inputs();
    for d in [dist_a, dist_b] {
        if d.arity() != n {
            return Err(Error::LengthMismatch { expected: n, got: d.arity() });
        }
    }
    let mut scratch = Vec::new();
    let mut arm = |dist: &dyn InputSampler, stream: u64| {
        let mut rng = rng_from_seed(derive_seed(seed, stream));
        let mut p = Proportion::default();
        for _ in 0..trials {
            let x = dist.sample_input(&mut rng);
            p.record(circuit.eval_into(&x, &mut scratch));
        }
        p
    };
    let a = arm(dist_a, 0);
    let b = arm(dist_b, 1);
    Ok(difference(a, b))
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;
    use crate::rng::rng_from_seed;

    fn bits(s: &str) -> Vec<bool> {
        s.bytes().map(|c| c == b'1').collect()
    }

    /// Independent interpreter: recursive evaluation straight from the gate
    /// list, no scratch reuse.
    fn naive_eval(c: &Ac0Circuit, x: &[bool]) -> bool {
        fn go(c: &Ac0Circuit, w: Wire, x: &[bool]) -> bool {
            match w {
                Wire::Input(i) => x[i],
                Wire::Gate(g) => {
                    let gate = &c.gates()[g];
                    let vals: Vec<bool> = gate.fanin.iter().map(|&k| go(c, k, x)).collect();
                    match gate.kind {
                        GateKind::And => vals.iter().all(|&v| v),
                        GateKind::Or => vals.iter().any(|&v| v),
                        GateKind::Not => !vals[0],
                        GateKind::Const(b) => b,
                    }
                }
            }
        }
        go(c, c.output(), x)
    }

    #[test]
    fn or_of_zeros() {
        assert!(!evaluate(&or_n(5), &[false; 5]).unwrap());
    }

    #[test]
    fn parity_dnf_on_011() {
        let p = parity_n(3);
        assert!(!p.evaluate(&bits("011")).unwrap());
        assert!(p.evaluate(&bits("111")).unwrap());
        assert_eq!(p.depth(), 2);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(or_n(3).evaluate(&[true]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn random_circuits_match_naive_interpreter() {
        let mut rng = rng_from_seed(17);
        for _ in 0..20 {
            let c = random(8, 50, &mut rng);
            for _ in 0..200 {
                let x: Vec<bool> = (0..8).map(|_| rng.random()).collect();
                assert_eq!(c.evaluate(&x).unwrap(), naive_eval(&c, &x));
            }
        }
    }

    #[test]
    fn malformed_circuits_rejected() {
        let bad = Ac0Circuit::new(2, vec![Gate { kind: GateKind::And, fanin: vec![Wire::Gate(0)] }], Wire::Gate(0));
        assert!(bad.is_err());
        let bad = Ac0Circuit::new(2, vec![Gate { kind: GateKind::Not, fanin: vec![] }], Wire::Gate(0));
        assert!(bad.is_err());
        let bad = Ac0Circuit::new(2, vec![], Wire::Input(2));
        assert!(bad.is_err());
    }

    #[test]
    fn sensitivity_closed_forms() {
        assert_eq!(sensitivity_at(&parity_n(4), &bits("0110")).unwrap(), 4);
        assert_eq!(sensitivity_at(&and_n(4), &bits("1111")).unwrap(), 4);
        assert_eq!(sensitivity_at(&and_n(4), &bits("0101")).unwrap(), 0);
        assert_eq!(sensitivity_at(&and_n(4), &bits("1101")).unwrap(), 1);
        assert_eq!(sensitivity_at(&or_n(4), &bits("0100")).unwrap(), 1);
        assert_eq!(sensitivity_at(&or_n(4), &bits("0000")).unwrap(), 4);
    }

    #[test]
    fn tail_estimates() {
        let e = sensitivity_tail_estimate(&parity_n(5), 5, 200, 1).unwrap();
        assert_eq!(e.value, 1.0);
        // AND_n: s >= 1 iff at most one zero, probability (n+1) 2^{-n}.
        for n in 1..=12 {
            let exact = sensitivity_tail_exact(&and_n(n), 1).unwrap();
            assert!((exact - (n + 1) as f64 / (1u64 << n) as f64).abs() < 1e-15);
        }
        let e = sensitivity_tail_estimate(&and_n(4), 1, 20_000, 2).unwrap();
        assert!(e.contains(5.0 / 16.0) || (e.value - 5.0 / 16.0).abs() < 0.02);
        let curve = sensitivity_tail_curve(&random(10, 30, &mut rng_from_seed(3)), &[0, 1, 2, 3, 4, 6, 8], 2000, 4).unwrap();
        assert!(curve.windows(2).all(|w| w[0].value >= w[1].value));
        assert_eq!(curve[0].value, 1.0);
    }

    #[test]
    fn normalize_preserves_function_and_depth() {
        let mut rng = rng_from_seed(23);
        for _ in 0..30 {
            let c = random(6, 25, &mut rng);
            let n = c.normalize();
            for g in n.gates() {
                if g.kind == GateKind::Not {
                    assert!(matches!(g.fanin[0], Wire::Input(_)));
                }
            }
            assert_eq!(n.depth(), c.depth());
            for v in 0..64u64 {
                let x: Vec<bool> = (0..6).map(|i| (v >> i) & 1 == 1).collect();
                assert_eq!(n.evaluate(&x).unwrap(), c.evaluate(&x).unwrap());
            }
        }
    }

    #[test]
    fn block_flip_zero_for_ignored_rows() {
        let c = Ac0Circuit::new(6, vec![Gate { kind: GateKind::Const(true), fanin: vec![] }], Wire::Gate(0)).unwrap();
        let shape = BlockMatrixShape::new(3, 2).unwrap();
        let d = WeightedRows::uniform(2).unwrap();
        let e = block_resample_flip_prob(&c, shape, &d, &[false; 6], 500, 0).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(block_resample_flip_prob_exact(&c, shape, &d, &[true; 6]).unwrap(), 0.0);
    }

    #[test]
    fn block_flip_single_bit_closed_form() {
        // Dictator on bit (1, 1) of a 4x2 matrix: (1/K) 2p(1-p).
        let shape = BlockMatrixShape::new(4, 2).unwrap();
        let c = dictator(8, 3);
        for (ones, bits) in [(1u64, 1u32), (1, 2), (3, 2)] {
            let d = WeightedRows::independent(2, &[1, ones], bits).unwrap();
            let p = ones as f64 / (1u64 << bits) as f64;
            let exact = expected_block_flip_prob_exact(&c, shape, &d).unwrap();
            assert!((exact - 2.0 * p * (1.0 - p) / 4.0).abs() < 1e-15, "{exact}");
        }
    }

    #[test]
    fn block_flip_shape_errors() {
        let shape = BlockMatrixShape::new(2, 2).unwrap();
        let d = WeightedRows::uniform(3).unwrap();
        assert_eq!(
            block_resample_flip_prob(&and_n(4), shape, &d, &[false; 4], 1, 0).unwrap_err(),
            Error::ShapeMismatch
        );
        assert!(BlockMatrixShape::new(0, 1).is_err());
    }

    #[test]
    fn gw_of_identical_matrices_is_constant() {
        let mut rng = rng_from_seed(5);
        let shape = BlockMatrixShape::new(3, 2).unwrap();
        for _ in 0..20 {
            let c = random(6, 20, &mut rng);
            let w: Vec<bool> = (0..6).map(|_| rng.random()).collect();
            let g = gw_reduction(&c, shape, &w, &w).unwrap();
            assert_eq!(g.as_constant(), Some(c.evaluate(&w).unwrap()));
        }
    }

    #[test]
    fn gw_preserves_function_and_does_not_grow() {
        let mut rng = rng_from_seed(6);
        let shape = BlockMatrixShape::new(4, 3).unwrap();
        for _ in 0..30 {
            let c = random(12, 40, &mut rng);
            let w0: Vec<bool> = (0..12).map(|_| rng.random()).collect();
            let w1: Vec<bool> = (0..12).map(|_| rng.random()).collect();
            let g = gw_reduction(&c, shape, &w0, &w1).unwrap();
            assert!(g.size() <= c.size());
            assert!(g.depth() <= c.depth());
            for z in 0..16usize {
                let wz: Vec<bool> = (0..12)
                    .map(|idx| if (z >> (idx / 3)) & 1 == 1 { w1[idx] } else { w0[idx] })
                    .collect();
                let zb: Vec<bool> = (0..4).map(|i| (z >> i) & 1 == 1).collect();
                assert_eq!(g.evaluate(&zb).unwrap(), c.evaluate(&wz).unwrap());
            }
        }
    }

    #[test]
    fn averaging_identity_small() {
        let shape = BlockMatrixShape::new(2, 2).unwrap();
        let d = WeightedRows::new(2, vec![1, 2, 3, 2]).unwrap();
        let c = random(4, 10, &mut rng_from_seed(8));
        let rows = averaging_identity_exhaustive(&c, shape, &d).unwrap();
        assert_eq!(rows.len(), 16);
        assert!(rows.iter().all(AveragingIdentity::holds));
    }

    #[test]
    fn advantage_of_constant_circuit_is_zero() {
        let c = Ac0Circuit::new(4, vec![Gate { kind: GateKind::Const(true), fanin: vec![] }], Wire::Gate(0)).unwrap();
        let e = distinguishing_advantage(&c, &UniformInputs(4), &UniformInputs(4), 300, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(distinguishing_advantage(&c, &UniformInputs(3), &UniformInputs(4), 1, 1).is_err());
    }

    #[test]
    fn threshold_dnf_counts() {
        let mut b = CircuitBuilder::new(5);
        let ws: Vec<Wire> = (0..5).map(Wire::Input).collect();
        let o = b.threshold(&ws, 3);
        let c = b.finish(o).unwrap();
        for v in 0..32u32 {
            let x: Vec<bool> = (0..5).map(|i| (v >> i) & 1 == 1).collect();
            assert_eq!(c.evaluate(&x).unwrap(), v.count_ones() >= 3);
        }
    }
}

//! The NP-collapsing oracle `B`.
//!
//! A query is a bit string encoding a nondeterministic oracle circuit.
//! `B(q) = 1` iff some assignment to the circuit's witness bits makes it
//! output 1. Oracle gates may ask `A` or `B` on strings of length at most
//! `floor(sqrt(|q|))`; the restriction is checked while parsing, and any
//! string that fails to parse is answered with 0.
//!
//! Encoding, with `gamma(v)` the Elias gamma code of `v >= 1`:
//!
//! ```text
//! query  := gamma(W + 1) gamma(C + 1) node^C padding*
//! node   := 000                    constant 0
//!         | 001                    constant 1
//!         | 010 wit                witness bit
//!         | 011 ref                NOT
//!         | 100 ref ref            AND
//!         | 101 ref ref            OR
//!         | 110 gamma(len+1) sym^len   A on the assembled string
//!         | 111 gamma(len+1) sym^len   B on the assembled string
//! sym    := 00 | 01 | 1 wit        constant 0, constant 1, witness bit
//! ```
//!
//! `wit` has `max(1, ceil(log2 W))` bits, a reference in node `i` has
//! `ceil(log2 i)` bits and must point to an earlier node. The output is the
//! last node. At most [`MAX_WITNESSES`] witness bits are accepted.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use crate::bits::BitString;
use crate::oracle::EncodedOracle;
use crate::{Error, Result};

/// Witness bits beyond this make the query malformed.
pub const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    Zero,
    One,
    Wit(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Const(bool),
    Wit(usize),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    OracleA(Vec<Sym>),
    OracleB(Vec<Sym>),
}

/// A parsed nondeterministic oracle circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NpQuery {
    witnesses: usize,
    nodes: Vec<Node>,
}

fn gamma_len(v: u64) -> usize {
    2 * (64 - v.leading_zeros() as usize) - 1
}

fn push_gamma(out: &mut BitString, v: u64) {
    let bits = 64 - v.leading_zeros() as usize;
    for _ in 1..bits {
        out.push(false);
    }
    out.push_u64(v, bits);
}

fn ceil_log2(v: usize) -> usize {
    if v <= 1 {
        0
    } else {
        (usize::BITS - (v - 1).leading_zeros()) as usize
    }
}

fn wit_width(witnesses: usize) -> usize {
    ceil_log2(witnesses).max(1)
}

struct Reader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, width: usize) -> Option<u64> {
        if width > 64 || self.pos + width > self.bits.len() {
            return None;
        }
        let v = self.bits[self.pos..self.pos + width].iter().fold(0u64, |a, &b| (a << 1) | b as u64);
        self.pos += width;
        Some(v)
    }

    fn gamma(&mut self) -> Option<u64> {
        let mut zeros = 0;
        while !*self.bits.get(self.pos)? {
            zeros += 1;
            self.pos += 1;
            if zeros > 63 {
                return None;
            }
        }
        self.take(zeros + 1)
    }
}

impl NpQuery {
    /// Validates witness indices and references.
    pub fn new(witnesses: usize, nodes: Vec<Node>) -> Result<Self> {
        if witnesses > MAX_WITNESSES {
            return Err(Error::InvalidParameter("too many witness bits"));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("a query needs at least one node"));
        }
        for (i, node) in nodes.iter().enumerate() {
            let ok = match node {
                Node::Const(_) => true,
                Node::Wit(w) => *w < witnesses,
                Node::Not(a) => *a < i,
                Node::And(a, b) | Node::Or(a, b) => *a < i && *b < i,
                Node::OracleA(s) | Node::OracleB(s) => {
                    s.iter().all(|s| !matches!(s, Sym::Wit(w) if *w >= witnesses))
                }
            };
            if !ok {
                return Err(Error::MalformedCircuit { gate: i, reason: "bad reference" });
            }
        }
        Ok(Self { witnesses, nodes })
    }

    pub fn witnesses(&self) -> usize {
        self.witnesses
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Longest oracle string.
    pub fn max_subquery_len(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::OracleA(s) | Node::OracleB(s) => s.len(),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn encoded_len(&self) -> usize {
        let ww = wit_width(self.witnesses);
        let mut len = gamma_len(self.witnesses as u64 + 1) + gamma_len(self.nodes.len() as u64 + 1);
        for (i, node) in self.nodes.iter().enumerate() {
            let rw = ceil_log2(i);
            len += 3 + match node {
                Node::Const(_) => 0,
                Node::Wit(_) => ww,
                Node::Not(_) => rw,
                Node::And(..) | Node::Or(..) => 2 * rw,
                Node::OracleA(s) | Node::OracleB(s) => {
                    gamma_len(s.len() as u64 + 1)
                        + s.iter().map(|s| if let Sym::Wit(_) = s { 1 + ww } else { 2 }).sum::<usize>()
                }
            };
        }
        len
    }

    /// Shortest total length at which every oracle string is allowed.
    pub fn min_valid_len(&self) -> usize {
        let m = self.max_subquery_len();
        self.encoded_len().max(m * m)
    }

    pub fn encode(&self) -> BitString {
        let ww = wit_width(self.witnesses);
        let mut out = BitString::new();
        push_gamma(&mut out, self.witnesses as u64 + 1);
        push_gamma(&mut out, self.nodes.len() as u64 + 1);
        for (i, node) in self.nodes.iter().enumerate() {
            let rw = ceil_log2(i);
            match node {
                Node::Const(b) => out.push_u64(*b as u64, 3),
                Node::Wit(w) => {
                    out.push_u64(2, 3);
                    out.push_u64(*w as u64, ww);
                }
                Node::Not(a) => {
                    out.push_u64(3, 3);
                    out.push_u64(*a as u64, rw);
                }
                Node::And(a, b) | Node::Or(a, b) => {
                    out.push_u64(if matches!(node, Node::And(..)) { 4 } else { 5 }, 3);
                    out.push_u64(*a as u64, rw);
                    out.push_u64(*b as u64, rw);
                }
                Node::OracleA(s) | Node::OracleB(s) => {
                    out.push_u64(if matches!(node, Node::OracleA(_)) { 6 } else { 7 }, 3);
                    push_gamma(&mut out, s.len() as u64 + 1);
                    for sym in s {
                        match sym {
                            Sym::Zero => out.push_u64(0, 2),
                            Sym::One => out.push_u64(1, 2),
                            Sym::Wit(w) => {
                                out.push(true);
                                out.push_u64(*w as u64, ww);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Encodes and pads with zeros to `len` bits.
    pub fn encode_padded(&self, len: usize) -> Result<BitString> {
        let mut out = self.encode();
        if out.len() > len {
            return Err(Error::LengthMismatch { expected: len, got: out.len() });
        }
        while out.len() < len {
            out.push(false);
        }
        Ok(out)
    }

    /// Parses a query; `None` for anything malformed, including oracle
    /// strings longer than `floor(sqrt(len))`.
    pub fn decode(bits: &[bool]) -> Option<Self> {
        let cap = isqrt(bits.len());
        let mut r = Reader { bits, pos: 0 };
        let witnesses = (r.gamma()? - 1) as usize;
        if witnesses > MAX_WITNESSES {
            return None;
        }
        let count = (r.gamma()? - 1) as usize;
        if count == 0 || count > bits.len() {
            return None;
        }
        let ww = wit_width(witnesses);
        let wit = |r: &mut Reader| -> Option<usize> {
            let w = r.take(ww)? as usize;
            (w < witnesses).then_some(w)
        };
        let mut nodes = Vec::with_capacity(count);
        for i in 0..count {
            let rw = ceil_log2(i);
            let reference = |r: &mut Reader| -> Option<usize> {
                if i == 0 {
                    return None;
                }
                let a = r.take(rw)? as usize;
                (a < i).then_some(a)
            };
            let node = match r.take(3)? {
                0 => Node::Const(false),
                1 => Node::Const(true),
                2 => Node::Wit(wit(&mut r)?),
                3 => Node::Not(reference(&mut r)?),
                op @ (4 | 5) => {
                    let a = reference(&mut r)?;
                    let b = reference(&mut r)?;
                    if op == 4 {
                        Node::And(a, b)
                    } else {
                        Node::Or(a, b)
                    }
                }
                op => {
                    let len = (r.gamma()? - 1) as usize;
                    if len > cap {
                        return None;
                    }
                    let mut syms = Vec::with_capacity(len);
                    for _ in 0..len {
                        syms.push(if r.take(1)? == 1 {
                            Sym::Wit(wit(&mut r)?)
                        } else if r.take(1)? == 1 {
                            Sym::One
                        } else {
                            Sym::Zero
                        });
                    }
                    if op == 6 {
                        Node::OracleA(syms)
                    } else {
                        Node::OracleB(syms)
                    }
                }
            };
            nodes.push(node);
        }
        Some(Self { witnesses, nodes })
    }

    /// The query with witness bit `index` fixed to `value`; later witness
    /// bits shift down by one.
    pub fn fix_witness(&self, index: usize, value: bool) -> Result<Self> {
        if index >= self.witnesses {
            return Err(Error::InvalidParameter("witness index out of range"));
        }
        let shift = |w: usize| if w > index { w - 1 } else { w };
        let sym = |s: &Sym| match *s {
            Sym::Wit(w) if w == index => {
                if value {
                    Sym::One
                } else {
                    Sym::Zero
                }
            }
            Sym::Wit(w) => Sym::Wit(shift(w)),
            s => s,
        };
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Wit(w) if *w == index => Node::Const(value),
                Node::Wit(w) => Node::Wit(shift(*w)),
                Node::OracleA(s) => Node::OracleA(s.iter().map(sym).collect()),
                Node::OracleB(s) => Node::OracleB(s.iter().map(sym).collect()),
                n => n.clone(),
            })
            .collect();
        Self::new(self.witnesses - 1, nodes)
    }

    /// Evaluates on one witness assignment with the given oracles.
    pub fn evaluate_with(
        &self,
        witness: &[bool],
        a: &mut dyn FnMut(&[bool]) -> bool,
        b: &mut dyn FnMut(&[bool]) -> bool,
    ) -> bool {
        let mut vals: Vec<bool> = Vec::with_capacity(self.nodes.len());
        let mut buf = Vec::new();
        for node in &self.nodes {
            let v = match node {
                Node::Const(c) => *c,
                Node::Wit(w) => witness[*w],
                Node::Not(x) => !vals[*x],
                Node::And(x, y) => vals[*x] && vals[*y],
                Node::Or(x, y) => vals[*x] || vals[*y],
                Node::OracleA(s) | Node::OracleB(s) => {
                    buf.clear();
                    buf.extend(s.iter().map(|s| match *s {
                        Sym::Zero => false,
                        Sym::One => true,
                        Sym::Wit(w) => witness[w],
                    }));
                    if matches!(node, Node::OracleA(_)) {
                        a(&buf)
                    } else {
                        b(&buf)
                    }
                }
            };
            vals.push(v);
        }
        *vals.last().expect("at least one node")
    }
}

fn isqrt(v: usize) -> usize {
    let mut r = libm::sqrt(v as f64) as usize;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

fn assignment(index: u64, witnesses: usize, out: &mut Vec<bool>) {
    out.clear();
    out.extend((0..witnesses).map(|i| (index >> i) & 1 == 1));
}

/// `B` over a world's `A`, memoised per query string. Not shared between
/// threads; give each trial its own.
pub struct NpOracleB<'w> {
    world: &'w dyn EncodedOracle,
    memo: RefCell<BTreeMap<Vec<bool>, bool>>,
    evaluations: Cell<u64>,
}

impl<'w> NpOracleB<'w> {
    pub fn new(world: &'w dyn EncodedOracle) -> Self {
        Self { world, memo: RefCell::new(BTreeMap::new()), evaluations: Cell::new(0) }
    }

    pub fn world(&self) -> &'w dyn EncodedOracle {
        self.world
    }

    /// Queries evaluated rather than answered from the memo.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.get()
    }

    pub fn memo_len(&self) -> usize {
        self.memo.borrow().len()
    }

    pub fn query(&self, q: &[bool]) -> bool {
        if let Some(&v) = self.memo.borrow().get(q) {
            return v;
        }
        self.evaluations.set(self.evaluations.get() + 1);
        let v = match NpQuery::decode(q) {
            None => false,
            Some(query) => {
                let mut w = Vec::new();
                let world = self.world;
                (0..1u64 << query.witnesses()).any(|i| {
                    assignment(i, query.witnesses(), &mut w);
                    query.evaluate_with(&w, &mut |s| world.read_a(s), &mut |s| self.query(s))
                })
            }
        };
        self.memo.borrow_mut().insert(q.to_vec(), v);
        v
    }
}

/// `B` without memoisation, for cross-checking.
pub fn query_b_reference(world: &dyn EncodedOracle, q: &[bool]) -> bool {
    let Some(query) = NpQuery::decode(q) else {
        return false;
    };
    let mut w = Vec::new();
    for i in 0..1u64 << query.witnesses() {
        assignment(i, query.witnesses(), &mut w);
        if query.evaluate_with(&w, &mut |s| world.read_a(s), &mut |s| query_b_reference(world, s)) {
            return true;
        }
    }
    false
}

/// Finds a satisfying witness with one `B` query per witness bit plus one,
/// fixing bits in order. All queries are padded to the same length so the
/// oracle-string restriction stays as for the original. Returns `None` iff
/// the circuit is unsatisfiable.
pub fn find_witness(b: &NpOracleB<'_>, query: &NpQuery) -> Result<Option<Vec<bool>>> {
    let len = query.min_valid_len();
    let ask = |q: &NpQuery| -> Result<bool> { Ok(b.query(q.encode_padded(len)?.as_slice())) };
    if !ask(query)? {
        return Ok(None);
    }
    let mut current = query.clone();
    let mut witness = Vec::with_capacity(query.witnesses());
    while current.witnesses() > 0 {
        let zero = current.fix_witness(0, false)?;
        if ask(&zero)? {
            witness.push(false);
            current = zero;
        } else {
            witness.push(true);
            current = current.fix_witness(0, true)?;
        }
    }
    Ok(Some(witness))
}

/// Builds queries from n-ary gates.
#[derive(Debug, Clone)]
pub struct NpQueryBuilder {
    witnesses: usize,
    nodes: Vec<Node>,
}

impl NpQueryBuilder {
    pub fn new(witnesses: usize) -> Self {
        Self { witnesses, nodes: Vec::new() }
    }

    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, v: bool) -> usize {
        self.push(Node::Const(v))
    }

    pub fn witness(&mut self, w: usize) -> usize {
        self.push(Node::Wit(w))
    }

    pub fn not(&mut self, a: usize) -> usize {
        self.push(Node::Not(a))
    }

    pub fn and(&mut self, inputs: &[usize]) -> usize {
        self.fold(inputs, true)
    }

    pub fn or(&mut self, inputs: &[usize]) -> usize {
        self.fold(inputs, false)
    }

    fn fold(&mut self, inputs: &[usize], is_and: bool) -> usize {
        let Some((&first, rest)) = inputs.split_first() else {
            return self.constant(is_and);
        };
        rest.iter().fold(first, |acc, &x| {
            self.push(if is_and { Node::And(acc, x) } else { Node::Or(acc, x) })
        })
    }

    pub fn oracle_a(&mut self, syms: Vec<Sym>) -> usize {
        self.push(Node::OracleA(syms))
    }

    pub fn oracle_b(&mut self, syms: Vec<Sym>) -> usize {
        self.push(Node::OracleB(syms))
    }

    /// Finishes with `output` as the last node, copying it if needed.
    pub fn finish(mut self, output: usize) -> Result<NpQuery> {
        if output + 1 != self.nodes.len() {
            let a = self.push(Node::Not(output));
            self.push(Node::Not(a));
        }
        NpQuery::new(self.witnesses, self.nodes)
    }
}

/// Symbols spelling a constant bit string.
pub fn const_syms(bits: &BitString) -> Vec<Sym> {
    bits.iter().map(|b| if b { Sym::One } else { Sym::Zero }).collect()
}

/// Every satisfying witness, by enumeration; `B` nodes go to [`query_b_reference`].
pub fn brute_force_witnesses(world: &dyn EncodedOracle, query: &NpQuery) -> Vec<Vec<bool>> {
    let mut found = Vec::new();
    let mut w = vec![];
    for i in 0..1u64 << query.witnesses() {
        assignment(i, query.witnesses(), &mut w);
        if query.evaluate_with(&w, &mut |s| world.read_a(s), &mut |s| query_b_reference(world, s)) {
            found.push(w.clone());
        }
    }
    found
}

//! Line-oriented netlists.
//!
//! One statement per line, `#` starts a comment. Circuits:
//!
//! ```text
//! inputs 3            # or a window, one `input` line per circuit input
//! g1 AND x0 x1
//! g2 NOT x2
//! g3 OR g1 g2
//! output g3
//! ```
//!
//! Window inputs bind circuit inputs, in order, to adversary-visible bits:
//! `input A <addr>`, `input H <x> <bit>` (challenge oracle) and
//! `input IN <index> <bit>` (challenge string). Gate types are `AND`, `OR`,
//! `NOT`, `CONST0` and `CONST1`.
//!
//! Search queries for `B` start with `witnesses W` and may use `WIT <i>`,
//! `ORACLE_A <sym>...` and `ORACLE_B <sym>...` with symbols `0`, `1` and
//! `w<i>`.

use std::collections::BTreeMap;

use forrelation_core::ac0::{Ac0Circuit, CircuitBuilder, Wire};
use forrelation_core::games::WindowBit;
use forrelation_core::nporacle::{NpQuery, NpQueryBuilder, Sym};
use thiserror::Error;

use crate::formats::parse_bits;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct NetlistError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, NetlistError> {
    Err(NetlistError { line, msg: msg.into() })
}

fn statements(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let toks: Vec<&str> = l.split_whitespace().collect();
        (!toks.is_empty()).then_some((i + 1, toks))
    })
}

fn input_ref(tok: &str) -> Option<usize> {
    tok.strip_prefix('x')?.parse().ok()
}

/// A circuit plus its window, when one was declared.
#[derive(Debug, Clone)]
pub struct ParsedCircuit {
    pub circuit: Ac0Circuit,
    pub window: Option<Vec<WindowBit>>,
}

pub fn parse_circuit(text: &str) -> Result<ParsedCircuit, NetlistError> {
    let mut lines = statements(text).peekable();
    let mut num_inputs = None;
    let mut window = Vec::new();
    while let Some((ln, toks)) = lines.peek() {
        let ln = *ln;
        match toks[..] {
            ["inputs", n] => {
                if num_inputs.is_some() || !window.is_empty() {
                    return err(ln, "inputs declared twice");
                }
                num_inputs = Some(n.parse().or_else(|_| err(ln, "bad input count"))?);
            }
            ["input", "A", addr] => window.push(WindowBit::A(parse_bits(addr).ok_or(bad(ln, "address"))?)),
            ["input", "H", x, bit] => window.push(WindowBit::Challenge {
                x: parse_bits(x).ok_or(bad(ln, "challenge input"))?,
                bit: bit.parse().map_err(|_| bad(ln, "bit index"))?,
            }),
            ["input", "IN", index, bit] => window.push(WindowBit::Input {
                index: index.parse().map_err(|_| bad(ln, "input index"))?,
                bit: bit.parse().map_err(|_| bad(ln, "bit index"))?,
            }),
            ["input", ..] => return err(ln, "malformed input declaration"),
            _ => break,
        }
        lines.next();
    }
    if num_inputs.is_some() && !window.is_empty() {
        return err(1, "use either `inputs` or window declarations");
    }
    let n = num_inputs.unwrap_or(window.len());
    let mut b = CircuitBuilder::new(n);
    let mut ids: BTreeMap<&str, Wire> = BTreeMap::new();
    let mut output = None;
    for (ln, toks) in lines {
        if output.is_some() {
            return err(ln, "statements after output");
        }
        let wire = |t: &str| -> Result<Wire, NetlistError> {
            if let Some(i) = input_ref(t) {
                if i >= n {
                    return err(ln, format!("input {t} out of range"));
                }
                return Ok(Wire::Input(i));
            }
            ids.get(t).copied().ok_or_else(|| bad(ln, "unknown reference"))
        };
        match toks[..] {
            ["output", id] => output = Some(wire(id)?),
            [id, kind, ref fanin @ ..] => {
                if input_ref(id).is_some() || ids.contains_key(id) {
                    return err(ln, format!("cannot define {id}"));
                }
                let fanin: Vec<Wire> = fanin.iter().map(|t| wire(t)).collect::<Result<_, _>>()?;
                let w = match (kind, fanin.len()) {
                    ("AND", _) => b.and(fanin),
                    ("OR", _) => b.or(fanin),
                    ("NOT", 1) => b.not(fanin[0]),
                    ("CONST0", 0) => b.constant(false),
                    ("CONST1", 0) => b.constant(true),
                    _ => return err(ln, format!("bad gate {kind} with {} inputs", fanin.len())),
                };
                ids.insert(id, w);
            }
            _ => return err(ln, "malformed statement"),
        }
    }
    let output = output.ok_or(bad(0, "missing output"))?;
    let circuit = b.finish(output).map_err(|e| bad(0, &e.to_string()))?;
    Ok(ParsedCircuit { circuit, window: (!window.is_empty()).then_some(window) })
}

fn bad(line: usize, what: &str) -> NetlistError {
    NetlistError { line, msg: format!("bad {what}") }
}

fn parse_sym(ln: usize, t: &str) -> Result<Sym, NetlistError> {
    match t {
        "0" => Ok(Sym::Zero),
        "1" => Ok(Sym::One),
        _ => t.strip_prefix('w').and_then(|i| i.parse().ok()).map(Sym::Wit).ok_or_else(|| bad(ln, "symbol")),
    }
}

pub fn parse_np_query(text: &str) -> Result<NpQuery, NetlistError> {
    let mut lines = statements(text);
    let witnesses = match lines.next() {
        Some((_, t)) if t.len() == 2 && t[0] == "witnesses" => t[1].parse().map_err(|_| bad(1, "witness count"))?,
        Some((ln, _)) => return err(ln, "expected `witnesses W`"),
        None => return err(0, "empty netlist"),
    };
    let mut b = NpQueryBuilder::new(witnesses);
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut output = None;
    for (ln, toks) in lines {
        if output.is_some() {
            return err(ln, "statements after output");
        }
        let node = |t: &str| ids.get(t).copied().ok_or_else(|| bad(ln, "reference"));
        match toks[..] {
            ["output", id] => output = Some(node(id)?),
            [id, kind, ref args @ ..] => {
                if ids.contains_key(id) {
                    return err(ln, format!("{id} defined twice"));
                }
                let v = match (kind, args.len()) {
                    ("CONST0", 0) => b.constant(false),
                    ("CONST1", 0) => b.constant(true),
                    ("WIT", 1) => {
                        let w: usize = args[0].parse().map_err(|_| bad(ln, "witness index"))?;
                        if w >= witnesses {
                            return err(ln, "witness index out of range");
                        }
                        b.witness(w)
                    }
                    ("NOT", 1) => {
                        let a = node(args[0])?;
                        b.not(a)
                    }
                    ("AND" | "OR", k) if k >= 1 => {
                        let refs: Vec<usize> = args.iter().map(|t| node(t)).collect::<Result<_, _>>()?;
                        if kind == "AND" {
                            b.and(&refs)
                        } else {
                            b.or(&refs)
                        }
                    }
                    ("ORACLE_A" | "ORACLE_B", _) => {
                        let syms: Vec<Sym> = args.iter().map(|t| parse_sym(ln, t)).collect::<Result<_, _>>()?;
                        if syms.iter().any(|s| matches!(s, Sym::Wit(i) if *i >= witnesses)) {
                            return err(ln, "witness index out of range");
                        }
                        if kind == "ORACLE_A" {
                            b.oracle_a(syms)
                        } else {
                            b.oracle_b(syms)
                        }
                    }
                    _ => return err(ln, format!("bad node {kind}")),
                };
                ids.insert(id, v);
            }
            _ => return err(ln, "malformed statement"),
        }
    }
    let out = output.ok_or(bad(0, "missing output"))?;
    b.finish(out).map_err(|e| bad(0, &e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_xor_of_two() {
        let text = "inputs 2\na AND x0 x1\nb OR x0 x1\nna NOT a\nc AND b na\noutput c\n";
        let c = parse_circuit(text).unwrap().circuit;
        let truth: Vec<bool> = [[false, false], [true, false], [false, true], [true, true]]
            .iter()
            .map(|x| c.evaluate(x).unwrap())
            .collect();
        assert_eq!(truth, [false, true, true, false]);
        assert_eq!((c.size(), c.depth()), (3, 2));
    }

    #[test]
    fn window_declarations() {
        let p = parse_circuit("input A 0101\ninput IN 0 2\ng AND x0 x1\noutput g\n").unwrap();
        assert_eq!(p.window.unwrap().len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_circuit("inputs 1\n\ng AND x0 x5\noutput g").unwrap_err();
        assert_eq!(e.line, 3);
    }

    #[test]
    fn np_query() {
        let q = parse_np_query("witnesses 2\na WIT 0\nb WIT 1\nc ORACLE_A w0 1 0\nd AND a b c\noutput d\n").unwrap();
        assert_eq!(q.witnesses(), 2);
        assert_eq!(q.max_subquery_len(), 3);
    }
}

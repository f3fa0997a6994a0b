//! Adversaries running as subprocesses.
//!
//! One process per run. The harness writes
//!
//! ```text
//! INIT <prf|trapdoor> <n> <ell> <input>...
//! ```
//!
//! with the challenge strings in binary (`-` for an empty one), then
//! answers requests until the program sends `OUT`:
//!
//! ```text
//! QA <addr>   -> 0 | 1      bit of A
//! QB <query>  -> 0 | 1      answer of B
//! QH <x>      -> <bits>     challenge oracle
//! OUT <bits>                final answer
//! ```
//!
//! Arguments are binary or `0x<hex>:<len>`. A failed request is answered
//! with `ERR <reason>` and ends the run.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use forrelation_core::games::{Adversary, Inverter, OracleHandle};
use forrelation_core::oracle::WorldKind;
use forrelation_core::{BitString, Error, Result};
use rand::RngCore;

use crate::formats::parse_bits;

#[derive(Debug, Clone)]
pub struct ExternalProgram {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalProgram {
    /// Splits a command line on whitespace.
    pub fn parse(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        Some(Self { program: parts.next()?, args: parts.collect() })
    }

    fn session(&self, oracle: &mut OracleHandle<'_>, extra: &[&BitString]) -> Result<BitString> {
        let proto = |m: String| Error::Protocol(m);
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| proto(format!("cannot start {}: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped"));
        let show = |b: &BitString| if b.is_empty() { "-".to_string() } else { b.to_string() };
        let p = *oracle.profile();
        let kind = match oracle.kind() {
            WorldKind::Prf => "prf",
            WorldKind::Trapdoor => "trapdoor",
        };
        let mut init = format!("INIT {kind} {} {}", p.n, p.ell);
        for s in oracle.inputs().iter().chain(extra.iter().copied()) {
            init.push(' ');
            init.push_str(&show(s));
        }
        let io = |e: std::io::Error| proto(format!("pipe: {e}"));
        let result = (|| -> Result<BitString> {
            writeln!(stdin, "{init}").map_err(io)?;
            stdin.flush().map_err(io)?;
            let mut line = String::new();
            loop {
                line.clear();
                if stdout.read_line(&mut line).map_err(io)? == 0 {
                    return Err(proto("program exited without OUT".to_string()));
                }
                let mut toks = line.split_whitespace();
                let (cmd, arg) = (toks.next().unwrap_or(""), toks.next().unwrap_or(""));
                let bits = parse_bits(arg).ok_or_else(|| proto(format!("bad argument in {:?}", line.trim())));
                let reply = match cmd {
                    "OUT" => return bits,
                    "QA" => oracle.query_a(bits?.as_slice()).map(|b| (b as u8).to_string()),
                    "QB" => oracle.query_b(bits?.as_slice()).map(|b| (b as u8).to_string()),
                    "QH" => oracle.query_challenge(&bits?).map(|b| b.to_string()),
                    _ => Err(proto(format!("unknown request {:?}", line.trim()))),
                };
                match reply {
                    Ok(r) => writeln!(stdin, "{r}").map_err(io)?,
                    Err(e) => {
                        let _ = writeln!(stdin, "ERR {e}");
                        return Err(e);
                    }
                }
                stdin.flush().map_err(io)?;
            }
        })();
        drop(stdin);
        if result.is_err() {
            let _ = child.kill();
        }
        let _ = child.wait();
        result
    }
}

impl Adversary for ExternalProgram {
    fn name(&self) -> String {
        format!("exec:{}", self.program)
    }

    fn run(&self, oracle: &mut OracleHandle<'_>, _: &mut dyn RngCore) -> Result<bool> {
        let out = self.session(oracle, &[])?;
        match out.as_slice() {
            [b] => Ok(*b),
            _ => Err(Error::Protocol("OUT must carry one bit".to_string())),
        }
    }
}

impl Inverter for ExternalProgram {
    fn name(&self) -> String {
        format!("exec:{}", self.program)
    }

    fn invert(&self, oracle: &mut OracleHandle<'_>, pk: &BitString, y: &BitString, _: &mut dyn RngCore) -> Result<BitString> {
        if oracle.inputs().len() >= 2 {
            self.session(oracle, &[])
        } else {
            self.session(oracle, &[pk, y])
        }
    }
}

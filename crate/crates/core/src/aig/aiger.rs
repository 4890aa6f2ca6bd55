//! ASCII AIGER reading and writing, plus read-only support for the binary format.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{AigNetwork, Literal, Var};

const PROVENANCE: &str = concat!("simals ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AigerError {
    #[error("malformed header: {0}")]
    InvalidHeader(String),
    #[error("latches are not supported ({0} declared)")]
    Latches(usize),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: node {node} has fanin variable {fanin} that does not precede it")]
    FaninOrder { line: usize, node: Var, fanin: Var },
    #[error("line {line}: literal {literal} refers to an undefined variable")]
    Dangling { line: usize, literal: u32 },
    #[error("unexpected end of file")]
    UnexpectedEof,
}

struct Header {
    binary: bool,
    m: usize,
    i: usize,
    l: usize,
    o: usize,
    a: usize,
}

fn parse_header(line: &str) -> Result<Header, AigerError> {
    let bad = || AigerError::InvalidHeader(line.to_string());
    let mut parts = line.split_whitespace();
    let binary = match parts.next() {
        Some("aag") => false,
        Some("aig") => true,
        _ => return Err(bad()),
    };
    let nums: Vec<usize> = parts
        .map(|p| p.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    // optional B C J F fields of AIGER 1.9 must be zero for a combinational design
    if nums.len() < 5 || nums[5..].iter().any(|&x| x != 0) {
        return Err(bad());
    }
    let h = Header {
        binary,
        m: nums[0],
        i: nums[1],
        l: nums[2],
        o: nums[3],
        a: nums[4],
    };
    if h.l != 0 {
        return Err(AigerError::Latches(h.l));
    }
    if h.m < h.i + h.a {
        return Err(bad());
    }
    Ok(h)
}

/// Parses an ASCII AIGER document.
pub fn parse_aiger(text: &str) -> Result<AigNetwork, AigerError> {
    parse_aiger_bytes(text.as_bytes())
}

/// Parses an AIGER document in either the ASCII or the binary encoding.
pub fn parse_aiger_bytes(data: &[u8]) -> Result<AigNetwork, AigerError> {
    let mut cur = Cursor { data, pos: 0, line: 0 };
    let header = parse_header(cur.line_str()?.trim())?;

    let mut inputs: Vec<u32> = Vec::with_capacity(header.i);
    if header.binary {
        inputs.extend((1..=header.i as u32).map(|v| 2 * v));
    } else {
        for _ in 0..header.i {
            let line = cur.line;
            inputs.push(parse_lits::<1>(cur.line_str()?, line + 1)?[0]);
        }
    }
    let mut outputs = Vec::with_capacity(header.o);
    for _ in 0..header.o {
        let line = cur.line;
        outputs.push((parse_lits::<1>(cur.line_str()?, line + 1)?[0], line + 1));
    }
    let mut ands: Vec<(u32, u32, u32, usize)> = Vec::with_capacity(header.a);
    if header.binary {
        for k in 0..header.a {
            let lhs = 2 * (header.i + 1 + k) as u32;
            let d0 = cur.varint()?;
            let d1 = cur.varint()?;
            let r0 = lhs.checked_sub(d0).ok_or(AigerError::UnexpectedEof)?;
            let r1 = r0.checked_sub(d1).ok_or(AigerError::UnexpectedEof)?;
            ands.push((lhs, r0, r1, cur.line + 1));
        }
    } else {
        for _ in 0..header.a {
            let line = cur.line + 1;
            let [lhs, r0, r1] = parse_lits::<3>(cur.line_str()?, line)?;
            ands.push((lhs, r0, r1, line));
        }
    }

    let mut symbols = Vec::new();
    let mut comments = Vec::new();
    let mut in_comments = false;
    while let Some(line) = cur.try_line_str() {
        if in_comments {
            if line != PROVENANCE {
                comments.push(line.to_string());
            }
        } else if line == "c" {
            in_comments = true;
        } else if !line.trim().is_empty() {
            symbols.push(line.trim_end().to_string());
        }
    }

    // Renumber: inputs in listed order, then AND nodes by increasing lhs.
    let mut newvar: HashMap<u32, Var> = HashMap::new();
    newvar.insert(0, 0);
    for (idx, &lit) in inputs.iter().enumerate() {
        if lit & 1 == 1 || lit == 0 || lit / 2 > header.m as u32 {
            return Err(AigerError::Malformed {
                line: idx + 2,
                msg: format!("invalid input literal {lit}"),
            });
        }
        if newvar.insert(lit / 2, 1 + idx as Var).is_some() {
            return Err(AigerError::Malformed {
                line: idx + 2,
                msg: format!("variable {} defined twice", lit / 2),
            });
        }
    }
    let mut order: Vec<usize> = (0..ands.len()).collect();
    order.sort_by_key(|&k| ands[k].0);
    let first = 1 + header.i as Var;
    for (rank, &k) in order.iter().enumerate() {
        let (lhs, _, _, line) = ands[k];
        if lhs & 1 == 1 || lhs / 2 > header.m as u32 {
            return Err(AigerError::Malformed {
                line,
                msg: format!("invalid AND literal {lhs}"),
            });
        }
        if newvar.insert(lhs / 2, first + rank as Var).is_some() {
            return Err(AigerError::Malformed {
                line,
                msg: format!("variable {} defined twice", lhs / 2),
            });
        }
    }
    let map = |lit: u32, line: usize| -> Result<Literal, AigerError> {
        newvar
            .get(&(lit / 2))
            .map(|&v| Literal::new(v, lit & 1 == 1))
            .ok_or(AigerError::Dangling { line, literal: lit })
    };
    let mut new_ands = Vec::with_capacity(ands.len());
    for &k in &order {
        let (lhs, r0, r1, line) = ands[k];
        let node = lhs / 2;
        for r in [r0, r1] {
            if r / 2 >= node {
                return Err(AigerError::FaninOrder { line, node, fanin: r / 2 });
            }
        }
        new_ands.push((map(r0, line)?, map(r1, line)?));
    }
    let pos = outputs
        .iter()
        .map(|&(lit, line)| map(lit, line))
        .collect::<Result<Vec<_>, _>>()?;

    let mut net = AigNetwork::from_parts_unchecked(header.i, new_ands, pos);
    net.set_symbols(symbols);
    net.set_comments(comments);
    Ok(net)
}

/// Writes the network as ASCII AIGER. The comment section starts with a
/// provenance line followed by any preserved comments.
pub fn write_aiger(net: &AigNetwork) -> String {
    let mut out = String::new();
    let i = net.num_pis();
    let a = net.num_ands();
    let _ = writeln!(out, "aag {} {} 0 {} {}", i + a, i, net.num_pos(), a);
    for v in 1..=i {
        let _ = writeln!(out, "{}", 2 * v);
    }
    for po in net.pos() {
        let _ = writeln!(out, "{po}");
    }
    let first = net.first_and_var();
    for (k, (l, r)) in net.and_nodes().iter().enumerate() {
        let _ = writeln!(out, "{} {} {}", 2 * (first + k as Var), l, r);
    }
    for s in net.symbols() {
        let _ = writeln!(out, "{s}");
    }
    out.push_str("c\n");
    out.push_str(PROVENANCE);
    out.push('\n');
    for c in net.comments() {
        let _ = writeln!(out, "{c}");
    }
    out
}

fn parse_lits<const N: usize>(line: &str, lineno: usize) -> Result<[u32; N], AigerError> {
    let mut out = [0u32; N];
    let mut parts = line.split_whitespace();
    for slot in out.iter_mut() {
        let tok = parts.next().ok_or_else(|| AigerError::Malformed {
            line: lineno,
            msg: format!("expected {N} literal(s)"),
        })?;
        *slot = tok.parse().map_err(|_| AigerError::Malformed {
            line: lineno,
            msg: format!("bad literal {tok:?}"),
        })?;
    }
    if parts.next().is_some() {
        return Err(AigerError::Malformed {
            line: lineno,
            msg: "trailing tokens".into(),
        });
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn try_line_str(&mut self) -> Option<&'a str> {
        if self.pos >= self.data.len() {
            return None;
        }
        let rest = &self.data[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        self.pos += (end + 1).min(rest.len());
        self.line += 1;
        let s = std::str::from_utf8(&rest[..end]).unwrap_or("");
        Some(s.strip_suffix('\r').unwrap_or(s))
    }

    fn line_str(&mut self) -> Result<&'a str, AigerError> {
        self.try_line_str().ok_or(AigerError::UnexpectedEof)
    }

    fn varint(&mut self) -> Result<u32, AigerError> {
        let mut x: u32 = 0;
        let mut shift = 0;
        loop {
            let b = *self.data.get(self.pos).ok_or(AigerError::UnexpectedEof)?;
            self.pos += 1;
            x |= ((b & 0x7f) as u32) << shift;
            if b & 0x80 == 0 {
                return Ok(x);
            }
            shift += 7;
            if shift > 28 {
                return Err(AigerError::UnexpectedEof);
            }
        }
    }
}

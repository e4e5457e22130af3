//! DIMACS serialization.
//!
//! Formulas use the CNF convention (`p cnf n m`, zero-terminated clauses) and
//! graphs the edge convention (`p edge n m`, `e u v` lines). A leading
//! comment `c kind=<ksat|knae|kcol> k=<k>` carries what plain DIMACS cannot.
//! Files without that comment parse as k-SAT with the width of the first
//! clause; graph files must state their palette.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Clause, Coloring, Formula, Graph, Instance, Literal, ModelError, ProblemKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("missing `p` header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("duplicate header")]
    DuplicateHeader,
    #[error("data before header")]
    DataBeforeHeader,
    #[error("bad token `{0}`")]
    BadToken(String),
    #[error("comment declares kind {declared} but header is `{header}`")]
    KindMismatch { declared: ProblemKind, header: String },
    #[error("graph files need a palette size (`c kind=kcol k=<k>`)")]
    MissingPalette,
    #[error("clause has {found} literals, expected {expected}")]
    WrongWidth { expected: usize, found: usize },
    #[error("unterminated clause")]
    UnterminatedClause,
    #[error("header declares {declared} constraints, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

pub fn write_dimacs(inst: &Instance) -> String {
    let mut out = String::new();
    match inst {
        Instance::Formula(f) => {
            let _ = writeln!(out, "c kind={} k={}", inst.kind(), f.k());
            let _ = writeln!(out, "p cnf {} {}", f.n(), f.m());
            for clause in f.clauses() {
                for lit in clause.literals() {
                    let _ = write!(out, "{} ", lit.to_dimacs());
                }
                out.push_str("0\n");
            }
        }
        Instance::Coloring(c) => {
            let _ = writeln!(out, "c kind=kcol k={}", c.palette());
            let _ = writeln!(out, "p edge {} {}", c.graph().n(), c.graph().m());
            for (u, v) in c.graph().edges() {
                let _ = writeln!(out, "e {u} {v}");
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Cnf,
    Edge,
}

pub fn parse_dimacs(text: &str) -> Result<Instance, ParseError> {
    let mut declared_kind: Option<ProblemKind> = None;
    let mut declared_k: Option<usize> = None;
    let mut header: Option<(Format, usize, usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    let mut pending_line = 0;
    let mut width: Option<usize> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "%" {
            break;
        }
        let mut tokens = trimmed.split_whitespace();
        let first = tokens.next().unwrap_or_default();
        match first {
            "c" => {
                for tok in tokens {
                    if let Some(v) = tok.strip_prefix("kind=") {
                        if declared_kind.is_none() {
                            declared_kind = Some(v.parse().map_err(|_| err(line, ParseErrorKind::BadToken(tok.into())))?);
                        }
                    } else if let Some(v) = tok.strip_prefix("k=") {
                        if declared_k.is_none() {
                            declared_k = Some(v.parse().map_err(|_| err(line, ParseErrorKind::BadToken(tok.into())))?);
                        }
                    }
                }
            }
            "p" => {
                if header.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateHeader));
                }
                let fields: Vec<&str> = tokens.collect();
                let [format, n, m] = fields[..] else {
                    return Err(err(line, ParseErrorKind::BadHeader(trimmed.into())));
                };
                let format = match format {
                    "cnf" => Format::Cnf,
                    "edge" | "col" => Format::Edge,
                    _ => return Err(err(line, ParseErrorKind::BadHeader(trimmed.into()))),
                };
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err(line, ParseErrorKind::BadHeader(trimmed.into())));
                let (n, m) = (parse(n)?, parse(m)?);
                if let Some(kind) = declared_kind {
                    if kind.is_formula() != (format == Format::Cnf) {
                        return Err(err(line, ParseErrorKind::KindMismatch { declared: kind, header: trimmed.into() }));
                    }
                }
                header = Some((format, n, m, line));
                width = declared_k.filter(|_| format == Format::Cnf);
            }
            "e" => {
                let Some((Format::Edge, n, ..)) = header else {
                    return Err(err(line, ParseErrorKind::DataBeforeHeader));
                };
                let ends: Vec<&str> = tokens.collect();
                let [u, v] = ends[..] else {
                    return Err(err(line, ParseErrorKind::BadToken(trimmed.into())));
                };
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err(line, ParseErrorKind::BadToken(s.into())));
                let (u, v) = (parse(u)?, parse(v)?);
                if let Some(var) = [u, v].into_iter().find(|&x| x > n) {
                    return Err(err(line, ModelError::VariableOutOfRange { var, n }.into()));
                }
                edges.push((u, v));
            }
            _ => {
                let Some((Format::Cnf, n, ..)) = header else {
                    return Err(err(line, ParseErrorKind::DataBeforeHeader));
                };
                for tok in std::iter::once(first).chain(tokens) {
                    let lit: i64 = tok.parse().map_err(|_| err(line, ParseErrorKind::BadToken(tok.into())))?;
                    if pending.is_empty() {
                        pending_line = line;
                    }
                    if lit != 0 {
                        pending.push(lit);
                        continue;
                    }
                    let expected = *width.get_or_insert(pending.len());
                    if pending.len() != expected {
                        return Err(err(line, ParseErrorKind::WrongWidth { expected, found: pending.len() }));
                    }
                    let clause = Clause::new(pending.drain(..).map(|l| Literal::from_dimacs(l).expect("nonzero")).collect())
                        .map_err(|e| err(line, e.into()))?;
                    if let Some(var) = clause.vars().find(|&v| v > n) {
                        return Err(err(line, ModelError::VariableOutOfRange { var, n }.into()));
                    }
                    clauses.push(clause);
                }
            }
        }
    }

    let Some((format, n, m, header_line)) = header else {
        return Err(err(last_line.max(1), ParseErrorKind::MissingHeader));
    };
    if !pending.is_empty() {
        return Err(err(pending_line, ParseErrorKind::UnterminatedClause));
    }
    let found = if format == Format::Cnf { clauses.len() } else { edges.len() };
    if found != m {
        return Err(err(header_line, ParseErrorKind::CountMismatch { declared: m, found }));
    }
    match format {
        Format::Cnf => {
            let semantics = declared_kind.and_then(ProblemKind::semantics).unwrap_or(super::Semantics::Sat);
            let k = width.or(declared_k).unwrap_or(2);
            Formula::new(n, k, clauses, semantics)
                .map(Instance::Formula)
                .map_err(|e| err(header_line, e.into()))
        }
        Format::Edge => {
            let palette = declared_k.ok_or_else(|| err(header_line, ParseErrorKind::MissingPalette))?;
            let graph = Graph::new(n, edges).map_err(|e| err(header_line, e.into()))?;
            Coloring::new(graph, palette).map(Instance::Coloring).map_err(|e| err(header_line, e.into()))
        }
    }
}

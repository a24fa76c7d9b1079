//! Text instance format.
//!
//! ```text
//! n <int>                       # first directive
//! model ic|sir|tsir
//! T <int>                       # tsir only
//! gamma_default <float>
//! gamma <node> <float>
//! edge <src> <dst> <float>      # p (ic) or beta (sir/tsir)
//! ```
//!
//! `#` starts a comment. Edge ids follow the order of `edge` lines.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::{DiffusionParams, DirectedGraph, Instance, Model, NodeId};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: std::str::FromStr>(
    tokens: &[&str],
    idx: usize,
    line: usize,
    what: &str,
) -> Result<T> {
    let tok = tokens
        .get(idx)
        .ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

fn expect_arity(tokens: &[&str], arity: usize, line: usize) -> Result<()> {
    if tokens.len() != arity {
        return Err(parse_err(
            line,
            format!("`{}` takes {} argument(s), found {}", tokens[0], arity - 1, tokens.len() - 1),
        ));
    }
    Ok(())
}

pub fn parse_instance_str(text: &str) -> Result<Instance> {
    parse_instance(text.as_bytes())
}

/// Parses and validates an instance. Errors carry the 1-based line number.
pub fn parse_instance<R: BufRead>(reader: R) -> Result<Instance> {
    #[derive(PartialEq)]
    enum Kind {
        Ic,
        Sir,
        Tsir,
    }

    let mut n: Option<usize> = None;
    let mut kind: Option<(Kind, usize)> = None;
    let mut horizon: Option<(u32, usize)> = None;
    let mut gamma_default: Option<(f64, usize)> = None;
    let mut gamma: Vec<Option<(f64, usize)>> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut edge_lines: Vec<usize> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in reader.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let raw = raw?;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let node = |tokens: &[&str], i: usize, n: usize| -> Result<NodeId> {
            let id: u64 = field(tokens, i, line, "node id")?;
            if id as usize >= n || id > NodeId::MAX as u64 {
                return Err(parse_err(line, format!("node id {id} out of range for n = {n}")));
            }
            Ok(id as NodeId)
        };

        let Some(count) = n else {
            if tokens[0] != "n" {
                return Err(parse_err(line, "the first directive must be `n <count>`"));
            }
            expect_arity(&tokens, 2, line)?;
            let count: usize = field(&tokens, 1, line, "node count")?;
            if count > NodeId::MAX as usize {
                return Err(parse_err(line, format!("node count {count} too large")));
            }
            n = Some(count);
            gamma = vec![None; count];
            continue;
        };

        match tokens[0] {
            "n" => return Err(parse_err(line, "duplicate `n` directive")),
            "model" => {
                expect_arity(&tokens, 2, line)?;
                if kind.is_some() {
                    return Err(parse_err(line, "duplicate `model` directive"));
                }
                let k = match tokens[1] {
                    "ic" => Kind::Ic,
                    "sir" => Kind::Sir,
                    "tsir" => Kind::Tsir,
                    other => return Err(parse_err(line, format!("unknown model {other:?}"))),
                };
                kind = Some((k, line));
            }
            "T" => {
                expect_arity(&tokens, 2, line)?;
                if horizon.is_some() {
                    return Err(parse_err(line, "duplicate `T` directive"));
                }
                horizon = Some((field(&tokens, 1, line, "horizon")?, line));
            }
            "gamma_default" => {
                expect_arity(&tokens, 2, line)?;
                if gamma_default.is_some() {
                    return Err(parse_err(line, "duplicate `gamma_default` directive"));
                }
                gamma_default = Some((field(&tokens, 1, line, "gamma")?, line));
            }
            "gamma" => {
                expect_arity(&tokens, 3, line)?;
                let v = node(&tokens, 1, count)?;
                let g: f64 = field(&tokens, 2, line, "gamma")?;
                if gamma[v as usize].is_some() {
                    return Err(parse_err(line, format!("gamma for node {v} given twice")));
                }
                gamma[v as usize] = Some((g, line));
            }
            "edge" => {
                expect_arity(&tokens, 4, line)?;
                let u = node(&tokens, 1, count)?;
                let v = node(&tokens, 2, count)?;
                if u == v {
                    return Err(parse_err(line, format!("self-loop on node {u}")));
                }
                let p: f64 = field(&tokens, 3, line, "edge probability")?;
                edges.push((u, v));
                probs.push(p);
                edge_lines.push(line);
            }
            other => return Err(parse_err(line, format!("unknown directive {other:?}"))),
        }
    }

    let n = n.ok_or_else(|| parse_err(last_line.max(1), "missing `n` directive"))?;
    let (kind, model_line) = kind.ok_or_else(|| parse_err(last_line.max(1), "missing `model` directive"))?;

    let graph = DirectedGraph::from_edges(n, &edges).map_err(|e| match e {
        Error::DuplicateEdge { src, dst } => {
            let line = edges
                .iter()
                .enumerate()
                .filter(|(_, &pair)| pair == (src, dst))
                .nth(1)
                .map(|(i, _)| edge_lines[i])
                .unwrap_or(last_line);
            parse_err(line, format!("duplicate edge {src} -> {dst}"))
        }
        other => other,
    })?;

    let model = match kind {
        Kind::Ic => {
            if let Some((_, line)) = horizon {
                return Err(parse_err(line, "`T` is only meaningful for model tsir"));
            }
            if let Some((_, line)) = gamma_default {
                return Err(parse_err(line, "IC instances take no recovery probabilities"));
            }
            if let Some((_, line)) = gamma.iter().flatten().next() {
                return Err(parse_err(*line, "IC instances take no recovery probabilities"));
            }
            Model::Ic
        }
        Kind::Sir => {
            if let Some((_, line)) = horizon {
                return Err(parse_err(line, "`T` is only meaningful for model tsir"));
            }
            Model::Sir
        }
        Kind::Tsir => {
            let (t, _) = horizon.ok_or_else(|| parse_err(model_line, "model tsir requires `T`"))?;
            Model::Tsir { horizon: t }
        }
    };

    // Range checks are repeated by Instance::new; doing them here first keeps
    // the offending line in the error.
    let node_recovery = if model.has_recovery() {
        if let Some((g, line)) = gamma_default {
            check_gamma(g, line)?;
        }
        let mut out = Vec::with_capacity(n);
        for (v, entry) in gamma.iter().enumerate() {
            let g = match (entry, gamma_default) {
                (Some((g, line)), _) => {
                    check_gamma(*g, *line)?;
                    *g
                }
                (None, Some((g, _))) => g,
                (None, None) => {
                    return Err(parse_err(
                        last_line.max(1),
                        format!("node {v} has no gamma and no gamma_default is set"),
                    ))
                }
            };
            out.push(g);
        }
        for (&b, &line) in probs.iter().zip(&edge_lines) {
            if !(b > 0.0 && b <= 1.0) {
                return Err(parse_err(line, format!("beta = {b} outside (0, 1]")));
            }
        }
        Some(out)
    } else {
        for (&p, &line) in probs.iter().zip(&edge_lines) {
            if !(0.0..=1.0).contains(&p) {
                return Err(parse_err(line, format!("p = {p} outside [0, 1]")));
            }
        }
        None
    };

    Instance::new(graph, DiffusionParams { model, edge_prob: probs, node_recovery })
}

fn check_gamma(g: f64, line: usize) -> Result<()> {
    if g > 0.0 && g <= 1.0 {
        Ok(())
    } else {
        Err(parse_err(line, format!("gamma = {g} outside (0, 1]")))
    }
}

/// 17 significant digits: enough to round-trip every f64.
fn fmt_prob(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    let g = inst.graph();
    writeln!(out, "n {}", g.node_count()).unwrap();
    writeln!(out, "model {}", inst.model().name()).unwrap();
    if let Some(t) = inst.horizon() {
        writeln!(out, "T {t}").unwrap();
    }
    if let Some(gamma) = &inst.params().node_recovery {
        // most frequent value becomes the default
        let mut sorted: Vec<u64> = gamma.iter().map(|g| g.to_bits()).collect();
        sorted.sort_unstable();
        let mut best = (0usize, 0u64);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&b| b == sorted[i]).count();
            if j > best.0 {
                best = (j, sorted[i]);
            }
            i += j;
        }
        if best.0 > 0 {
            writeln!(out, "gamma_default {}", fmt_prob(f64::from_bits(best.1))).unwrap();
        }
        for (v, g) in gamma.iter().enumerate() {
            if g.to_bits() != best.1 {
                writeln!(out, "gamma {v} {}", fmt_prob(*g)).unwrap();
            }
        }
    }
    for (e, (u, v)) in g.edges().enumerate() {
        writeln!(out, "edge {u} {v} {}", fmt_prob(inst.params().edge_prob[e])).unwrap();
    }
    out
}

pub fn write_instance<W: Write>(inst: &Instance, mut w: W) -> Result<()> {
    w.write_all(serialize_instance(inst).as_bytes())?;
    Ok(())
}

pub fn read_instance_file(path: &std::path::Path) -> Result<Instance> {
    let f = std::fs::File::open(path)?;
    parse_instance(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Instance> {
        parse_instance_str(&s.replace(" / ", "\n"))
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn minimal_ic() {
        let inst = parse("n 2 / model ic / edge 0 1 0.5").unwrap();
        assert_eq!(inst.node_count(), 2);
        assert_eq!(inst.edge_count(), 1);
        assert_eq!(inst.model(), Model::Ic);
        assert_eq!(inst.edge_prob(0), 0.5);
    }

    #[test]
    fn zero_gamma_rejected() {
        let err = parse("n 2 / model sir / gamma_default 0 / edge 0 1 0.5").unwrap_err();
        assert_eq!(line_of(err), 3);
    }

    #[test]
    fn tsir_chain() {
        let inst = parse("n 3 / model tsir / T 2 / gamma_default 0.5 / edge 0 1 1.0 / edge 1 2 1.0").unwrap();
        assert_eq!(inst.model(), Model::Tsir { horizon: 2 });
        assert_eq!(inst.recovery(2), 0.5);
        assert_eq!(inst.graph().out_targets(1), &[2]);
    }

    #[test]
    fn comments_scientific_notation_and_overrides() {
        let text = "# header\n\nn 3 # three nodes\nmodel sir\ngamma_default 5e-1\ngamma 2 1E0\nedge 0 1 2.5e-1\n";
        let inst = parse_instance_str(text).unwrap();
        assert_eq!(inst.recovery(0), 0.5);
        assert_eq!(inst.recovery(2), 1.0);
        assert_eq!(inst.edge_prob(0), 0.25);
    }

    #[test]
    fn error_lines() {
        assert_eq!(line_of(parse("model ic / n 2").unwrap_err()), 1);
        assert_eq!(line_of(parse("n 2 / model ic / edge 0 1").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model ic / edge 0 x 0.5").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model ic / edge 0 2 0.5").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model ic / edge 1 1 0.5").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model ic / edge 0 1 0.5 / edge 0 1 0.2").unwrap_err()), 4);
        assert_eq!(line_of(parse("n 2 / model ic / edge 0 1 1.5").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model sir / gamma_default 0.5 / edge 0 1 0").unwrap_err()), 4);
        assert_eq!(line_of(parse("n 2 / model sir / gamma 1 1.5 / gamma_default 0.5").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model tsir / gamma_default 0.5").unwrap_err()), 2);
        assert_eq!(line_of(parse("n 2 / model ic / T 3").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model sir / edge 0 1 0.5").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2 / model foo").unwrap_err()), 2);
        assert_eq!(line_of(parse("n 2 / model ic / frob 1").unwrap_err()), 3);
        assert!(matches!(parse_instance_str("").unwrap_err(), Error::Parse { .. }));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let text = "n 4\nmodel tsir\nT 3\ngamma_default 0.3\ngamma 1 0.1\nedge 2 0 0.1\nedge 0 1 0.7\nedge 0 3 0.30000000000000004\n";
        let inst = parse_instance_str(text).unwrap();
        let back = parse_instance_str(&serialize_instance(&inst)).unwrap();
        assert_eq!(inst, back);
        assert_eq!(back.graph().out_edge_ids(0), inst.graph().out_edge_ids(0));
        assert_eq!(back.edge_prob(2).to_bits(), 0.30000000000000004f64.to_bits());
    }
}

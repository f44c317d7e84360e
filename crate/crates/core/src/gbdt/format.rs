//! Line-oriented text serialization of [`GbdtModel`].
//!
//! ```text
//! gbdtmodel v1
//! <base_score>
//! features <D>
//! feature <name>
//! edges <e_1> ... <e_m>
//! ...                                   (one feature/edges pair per feature)
//! trees <T>
//! tree <k>
//! node <id> split <feat> <bin> <left> <right> <gain>
//! node <id> leaf <value>
//! ```
//!
//! Reals use 17 significant digits so a reload reproduces every bit.

use std::fmt::Write;

use super::{BinMapper, GbdtModel, Node, Tree};
use crate::error::{Error, Result};

pub const FORMAT_HEADER: &str = "gbdtmodel v1";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_model(model: &GbdtModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_HEADER}");
    let _ = writeln!(out, "{}", real(model.base_score));
    let _ = writeln!(out, "features {}", model.feature_names.len());
    for (j, name) in model.feature_names.iter().enumerate() {
        let _ = writeln!(out, "feature {name}");
        out.push_str("edges");
        for &e in model.bin_mapper.edges(j) {
            out.push(' ');
            out.push_str(&real(e));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "trees {}", model.trees.len());
    for (k, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {k}");
        for (id, node) in tree.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold_bin,
                    left,
                    right,
                    gain,
                } => {
                    let _ = writeln!(
                        out,
                        "node {id} split {feature} {threshold_bin} {left} {right} {}",
                        real(gain)
                    );
                }
                Node::Leaf { value } => {
                    let _ = writeln!(out, "node {id} leaf {}", real(value));
                }
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => {
                self.line += 1;
                Err(self.err("unexpected end of model"))
            }
        }
    }

    /// Next line split on whitespace, which must start with `keyword`.
    fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`")));
        }
        Ok(tokens.collect())
    }

    fn parse<T: std::str::FromStr>(&self, token: Option<&&str>, what: &str) -> Result<T> {
        token
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("bad or missing {what}")))
    }

    fn finite(&self, token: Option<&&str>, what: &str) -> Result<f64> {
        let v: f64 = self.parse(token, what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("{what} is not finite")))
        }
    }
}

pub fn load_model(text: &str) -> Result<GbdtModel> {
    let mut lines = Lines::new(text);
    if lines.next_line()? != FORMAT_HEADER {
        return Err(lines.err(format!("expected header `{FORMAT_HEADER}`")));
    }
    let base = lines.next_line()?.trim();
    let base_score = lines.finite(Some(&base), "base score")?;

    let header = lines.expect("features")?;
    let n_features: usize = lines.parse(header.first(), "feature count")?;
    let mut feature_names = Vec::with_capacity(n_features);
    let mut edges = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let line = lines.next_line()?;
        let name = line
            .strip_prefix("feature ")
            .ok_or_else(|| lines.err("expected `feature <name>`"))?;
        feature_names.push(name.to_string());
        let tokens = lines.expect("edges")?;
        let e = tokens
            .iter()
            .map(|t| lines.finite(Some(t), "edge"))
            .collect::<Result<Vec<f64>>>()?;
        if e.windows(2).any(|w| w[0] >= w[1]) {
            return Err(lines.err("edges must be strictly increasing"));
        }
        edges.push(e);
    }
    let bin_mapper = BinMapper::from_edges(edges);

    let header = lines.expect("trees")?;
    let n_trees: usize = lines.parse(header.first(), "tree count")?;
    let mut trees = Vec::with_capacity(n_trees);
    let mut pending_line: Option<&str> = None;
    for k in 0..n_trees {
        let tree_line = match pending_line.take() {
            Some(l) => l,
            None => lines.next_line()?,
        };
        let tokens: Vec<&str> = tree_line.split_whitespace().collect();
        if tokens.first() != Some(&"tree") || lines.parse::<usize>(tokens.get(1), "tree index")? != k {
            return Err(lines.err(format!("expected `tree {k}`")));
        }
        let mut nodes = Vec::new();
        while let Some((i, l)) = lines.inner.next() {
            lines.line = i + 1;
            let line = l.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.starts_with("tree ") {
                pending_line = Some(line);
                break;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.first() != Some(&"node") {
                return Err(lines.err("expected `node`"));
            }
            let id: usize = lines.parse(t.get(1), "node id")?;
            if id != nodes.len() {
                return Err(lines.err(format!("node id {id} out of sequence")));
            }
            let node = match t.get(2).copied() {
                Some("leaf") => Node::Leaf {
                    value: lines.finite(t.get(3), "leaf value")?,
                },
                Some("split") => {
                    let feature: usize = lines.parse(t.get(3), "split feature")?;
                    if feature >= n_features {
                        return Err(lines.err(format!("feature {feature} out of range")));
                    }
                    let threshold_bin: u32 = lines.parse(t.get(4), "split bin")?;
                    let left: usize = lines.parse(t.get(5), "left child")?;
                    let right: usize = lines.parse(t.get(6), "right child")?;
                    if left <= id || right <= id || left == right {
                        return Err(lines.err("children must follow their parent"));
                    }
                    let gain = match t.get(7) {
                        Some(_) => lines.finite(t.get(7), "split gain")?,
                        None => 0.0,
                    };
                    Node::Split {
                        feature,
                        threshold_bin,
                        left,
                        right,
                        gain,
                    }
                }
                _ => return Err(lines.err("expected `leaf` or `split`")),
            };
            nodes.push(node);
        }
        check_tree(&nodes).map_err(|m| Error::Format {
            line: lines.line,
            message: format!("tree {k}: {m}"),
        })?;
        trees.push(Tree { nodes });
    }
    if let Some(extra) = pending_line {
        return Err(Error::Format {
            line: lines.line,
            message: format!("unexpected `{extra}` after {n_trees} trees"),
        });
    }
    Ok(GbdtModel {
        base_score,
        trees,
        bin_mapper,
        feature_names,
    })
}

/// Every node other than the root must have exactly one parent.
fn check_tree(nodes: &[Node]) -> std::result::Result<(), String> {
    if nodes.is_empty() {
        return Err("no nodes".into());
    }
    let mut parents = vec![0usize; nodes.len()];
    for node in nodes {
        if let Node::Split { left, right, .. } = *node {
            for child in [left, right] {
                if child >= nodes.len() {
                    return Err(format!("child {child} does not exist"));
                }
                parents[child] += 1;
            }
        }
    }
    if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
        return Err("nodes do not form a single rooted tree".into());
    }
    Ok(())
}

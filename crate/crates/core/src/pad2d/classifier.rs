//! The three ensemble member families and the text model format.
//!
//! Model grammar (one token group per line):
//!
//! ```text
//! ENSEMBLE 1 <count>
//! KIND linear-svm <dim>
//! W <dim weights>
//! B <bias>
//! KIND mlp <dim> <hidden>
//! W1 <hidden*dim weights, row-major hidden x dim>
//! B1 <hidden biases>
//! W2 <hidden weights>
//! B2 <bias>
//! KIND random-forest <dim> <trees>
//! TREE <nodes>
//! S <feature> <threshold> <left> <right>     (go left iff x[feature] <= threshold)
//! L <vote>                                   (0 = live, 1 = attack)
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pad3d::Decision;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// One hidden ReLU layer, logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dim: usize,
    pub hidden: usize,
    /// `hidden x dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let mut z = self.b2;
        for h in 0..self.hidden {
            let row = &self.w1[h * self.dim..(h + 1) * self.dim];
            let a = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h];
            z += self.w2[h] * a.max(0.0);
        }
        sigmoid(z)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Decision),
}

/// Arena-allocated binary tree, root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> Decision {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                TreeNode::Leaf(d) => return d,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Every split has in-range children that appear later in the arena, so
    /// traversal always terminates at a leaf.
    fn validate(&self, dim: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidEnsemble("empty tree".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Split {
                feature, left, right, ..
            } = *node
            {
                if feature >= dim || left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len() {
                    return Err(Error::InvalidEnsemble(format!("bad split at node {i}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub dim: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn attack_votes(&self, x: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict(x).is_attack()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    LinearSvm(LinearSvm),
    Mlp(Mlp),
    RandomForest(RandomForest),
}

impl Classifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::LinearSvm(_) => "linear-svm",
            Classifier::Mlp(_) => "mlp",
            Classifier::RandomForest(_) => "random-forest",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::LinearSvm(m) => m.weights.len(),
            Classifier::Mlp(m) => m.dim,
            Classifier::RandomForest(m) => m.dim,
        }
    }

    /// Hard binary vote.
    pub fn vote(&self, x: &[f64]) -> Decision {
        let attack = match self {
            Classifier::LinearSvm(m) => m.margin(x) > 0.0,
            Classifier::Mlp(m) => m.probability(x) >= 0.5,
            Classifier::RandomForest(m) => 2 * m.attack_votes(x) > m.trees.len(),
        };
        if attack {
            Decision::Attack
        } else {
            Decision::Live
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Classifier::LinearSvm(m) if m.weights.is_empty() => {
                Err(Error::InvalidEnsemble("linear model with no weights".into()))
            }
            Classifier::LinearSvm(_) => Ok(()),
            Classifier::Mlp(m) => {
                if m.dim == 0 || m.hidden == 0 || m.w1.len() != m.dim * m.hidden || m.b1.len() != m.hidden || m.w2.len() != m.hidden {
                    Err(Error::InvalidEnsemble("mlp parameter shapes inconsistent".into()))
                } else {
                    Ok(())
                }
            }
            Classifier::RandomForest(m) => {
                if m.trees.is_empty() {
                    return Err(Error::InvalidEnsemble("forest without trees".into()));
                }
                m.trees.iter().try_for_each(|t| t.validate(m.dim))
            }
        }
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        match self {
            Classifier::LinearSvm(m) => {
                writeln!(out, "KIND linear-svm {}", m.weights.len()).unwrap();
                writeln!(out, "W {}", join(&m.weights)).unwrap();
                writeln!(out, "B {}", m.bias).unwrap();
            }
            Classifier::Mlp(m) => {
                writeln!(out, "KIND mlp {} {}", m.dim, m.hidden).unwrap();
                writeln!(out, "W1 {}", join(&m.w1)).unwrap();
                writeln!(out, "B1 {}", join(&m.b1)).unwrap();
                writeln!(out, "W2 {}", join(&m.w2)).unwrap();
                writeln!(out, "B2 {}", m.b2).unwrap();
            }
            Classifier::RandomForest(m) => {
                writeln!(out, "KIND random-forest {} {}", m.dim, m.trees.len()).unwrap();
                for tree in &m.trees {
                    writeln!(out, "TREE {}", tree.nodes.len()).unwrap();
                    for node in &tree.nodes {
                        match *node {
                            TreeNode::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => writeln!(out, "S {feature} {threshold} {left} {right}").unwrap(),
                            TreeNode::Leaf(d) => writeln!(out, "L {}", u8::from(d.is_attack())).unwrap(),
                        }
                    }
                }
            }
        }
    }
}

/// Line cursor for the model grammar.
pub(crate) struct ModelReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

fn malformed(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::MalformedModelFile(format!("line {}: {msg}", line + 1))
}

impl<'a> ModelReader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    /// Next non-empty line split into its tag and remaining tokens.
    /// Next non-empty line, which must start with `tag`; returns its tokens.
    pub(crate) fn expect(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>)> {
        let (no, first, toks) = self.next_line()?;
        if first != tag {
            return Err(malformed(no, format!("expected {tag}, found {first}")));
        }
        Ok((no, toks))
    }

    pub(crate) fn next_line(&mut self) -> Result<(usize, &'a str, Vec<&'a str>)> {
        loop {
            let Some((no, line)) = self.lines.next() else {
                return Err(Error::MalformedModelFile("unexpected end of file".into()));
            };
            let mut tokens = line.split_whitespace();
            let Some(first) = tokens.next() else { continue };
            return Ok((no, first, tokens.collect()));
        }
    }

    pub(crate) fn at_end(&mut self) -> bool {
        while let Some((_, line)) = self.lines.peek() {
            if line.trim().is_empty() {
                self.lines.next();
            } else {
                return false;
            }
        }
        true
    }
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| malformed(line, format!("{tok:?} is not a count")))
}

fn parse_floats(line: usize, toks: &[&str], expected: usize) -> Result<Vec<f64>> {
    if toks.len() != expected {
        return Err(malformed(line, format!("{} values, expected {expected}", toks.len())));
    }
    toks.iter()
        .map(|t| t.parse::<f64>().map_err(|_| malformed(line, format!("{t:?} is not a number"))))
        .collect()
}

pub(crate) fn read_classifier(reader: &mut ModelReader<'_>) -> Result<Classifier> {
    let (no, head) = reader.expect("KIND")?;
    match head.as_slice() {
        ["linear-svm", dim] => {
            let dim = parse_usize(no, dim)?;
            let (l, w) = reader.expect("W")?;
            let weights = parse_floats(l, &w, dim)?;
            let (l, b) = reader.expect("B")?;
            let bias = parse_floats(l, &b, 1)?[0];
            Ok(Classifier::LinearSvm(LinearSvm { weights, bias }))
        }
        ["mlp", dim, hidden] => {
            let dim = parse_usize(no, dim)?;
            let hidden = parse_usize(no, hidden)?;
            let (l, t) = reader.expect("W1")?;
            let w1 = parse_floats(l, &t, dim * hidden)?;
            let (l, t) = reader.expect("B1")?;
            let b1 = parse_floats(l, &t, hidden)?;
            let (l, t) = reader.expect("W2")?;
            let w2 = parse_floats(l, &t, hidden)?;
            let (l, t) = reader.expect("B2")?;
            let b2 = parse_floats(l, &t, 1)?[0];
            Ok(Classifier::Mlp(Mlp {
                dim,
                hidden,
                w1,
                b1,
                w2,
                b2,
            }))
        }
        ["random-forest", dim, count] => {
            let dim = parse_usize(no, dim)?;
            let count = parse_usize(no, count)?;
            let mut trees = Vec::with_capacity(count);
            for _ in 0..count {
                let (l, t) = reader.expect("TREE")?;
                let [n] = t.as_slice() else {
                    return Err(malformed(l, "TREE takes one count"));
                };
                let n = parse_usize(l, n)?;
                let mut nodes = Vec::with_capacity(n);
                for _ in 0..n {
                    nodes.push(read_node(reader)?);
                }
                trees.push(DecisionTree { nodes });
            }
            Ok(Classifier::RandomForest(RandomForest { dim, trees }))
        }
        other => Err(malformed(no, format!("unknown classifier header {other:?}"))),
    }
}

fn read_node(reader: &mut ModelReader<'_>) -> Result<TreeNode> {
    let (no, tag, toks) = reader.next_line()?;
    match (tag, toks.as_slice()) {
        ("S", [f, t, l, r]) => Ok(TreeNode::Split {
            feature: parse_usize(no, f)?,
            threshold: parse_floats(no, &[t], 1)?[0],
            left: parse_usize(no, l)?,
            right: parse_usize(no, r)?,
        }),
        ("L", ["0"]) => Ok(TreeNode::Leaf(Decision::Live)),
        ("L", ["1"]) => Ok(TreeNode::Leaf(Decision::Attack)),
        _ => Err(malformed(no, format!("bad tree node {tag}"))),
    }
}

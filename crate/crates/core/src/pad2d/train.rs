use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::classifier::{sigmoid, Classifier, DecisionTree, LinearSvm, Mlp, RandomForest, TreeNode};
use super::features::LabeledFeatures;
use super::Ensemble;
use crate::error::{Error, Result};
use crate::pad3d::Decision;

/// Hyperparameters of one ensemble member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemberSpec {
    LinearSvm { epochs: usize, lambda: f64 },
    Mlp { hidden: usize, epochs: usize, learning_rate: f64 },
    RandomForest { trees: usize, max_depth: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecipe {
    pub members: Vec<MemberSpec>,
}

impl Default for EnsembleRecipe {
    /// Two linear SVMs, one MLP and two random forests.
    fn default() -> Self {
        let svm = MemberSpec::LinearSvm {
            epochs: 60,
            lambda: 1e-3,
        };
        let forest = MemberSpec::RandomForest {
            trees: 25,
            max_depth: 8,
        };
        Self {
            members: vec![
                svm,
                svm,
                MemberSpec::Mlp {
                    hidden: 32,
                    epochs: 120,
                    learning_rate: 0.05,
                },
                forest,
                forest,
            ],
        }
    }
}

/// Per-feature affine map to zero mean, unit variance. Constant features
/// keep scale 1.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(xs: &[&[f64]]) -> Self {
        let d = xs[0].len();
        let n = xs.len() as f64;
        let mut mean = vec![0.0; d];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(*x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(*x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Self { mean, scale }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Rewrites `w . z + b` over standardized `z` as `w' . x + b'` over raw `x`.
    fn fold(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let w2: Vec<f64> = w.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let b2 = b - w2.iter().zip(&self.mean).map(|(w, m)| w * m).sum::<f64>();
        (w2, b2)
    }
}

fn target(d: Decision) -> f64 {
    if d.is_attack() {
        1.0
    } else {
        -1.0
    }
}

fn train_svm(xs: &[Vec<f64>], ys: &[f64], epochs: usize, lambda: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let d = xs[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let eta0 = 0.1;
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            let eta = eta0 / (1.0 + eta0 * lambda * t as f64);
            t += 1;
            let margin = ys[i] * (w.iter().zip(&xs[i]).map(|(a, b)| a * b).sum::<f64>() + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wv, xv) in w.iter_mut().zip(&xs[i]) {
                    *wv += eta * ys[i] * xv;
                }
                b += eta * ys[i];
            }
        }
    }
    (w, b)
}

fn train_mlp(xs: &[Vec<f64>], ys: &[f64], hidden: usize, epochs: usize, lr: f64, rng: &mut ChaCha8Rng) -> Mlp {
    let d = xs[0].len();
    let he1 = Normal::new(0.0, (2.0 / d as f64).sqrt()).unwrap();
    let he2 = Normal::new(0.0, (2.0 / hidden as f64).sqrt()).unwrap();
    let mut m = Mlp {
        dim: d,
        hidden,
        w1: (0..hidden * d).map(|_| he1.sample(rng)).collect(),
        b1: vec![0.0; hidden],
        w2: (0..hidden).map(|_| he2.sample(rng)).collect(),
        b2: 0.0,
    };
    // momentum buffers
    let mut v1 = vec![0.0; hidden * d];
    let mut vb1 = vec![0.0; hidden];
    let mut v2 = vec![0.0; hidden];
    let mut vb2 = 0.0;
    let mu = 0.9;
    let batch = 16;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut act = vec![0.0; hidden];
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let mut g1 = vec![0.0; hidden * d];
            let mut gb1 = vec![0.0; hidden];
            let mut g2 = vec![0.0; hidden];
            let mut gb2 = 0.0;
            for &i in chunk {
                let x = &xs[i];
                let y = if ys[i] > 0.0 { 1.0 } else { 0.0 };
                let mut z = m.b2;
                for h in 0..hidden {
                    let row = &m.w1[h * d..(h + 1) * d];
                    act[h] = (row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + m.b1[h]).max(0.0);
                    z += m.w2[h] * act[h];
                }
                // logistic loss gradient w.r.t. z
                let dz = sigmoid(z) - y;
                gb2 += dz;
                for h in 0..hidden {
                    g2[h] += dz * act[h];
                    if act[h] > 0.0 {
                        let da = dz * m.w2[h];
                        gb1[h] += da;
                        for (g, xv) in g1[h * d..(h + 1) * d].iter_mut().zip(x) {
                            *g += da * xv;
                        }
                    }
                }
            }
            let scale = lr / chunk.len() as f64;
            for (p, (v, g)) in m.w1.iter_mut().zip(v1.iter_mut().zip(&g1)) {
                *v = mu * *v - scale * g;
                *p += *v;
            }
            for (p, (v, g)) in m.b1.iter_mut().zip(vb1.iter_mut().zip(&gb1)) {
                *v = mu * *v - scale * g;
                *p += *v;
            }
            for (p, (v, g)) in m.w2.iter_mut().zip(v2.iter_mut().zip(&g2)) {
                *v = mu * *v - scale * g;
                *p += *v;
            }
            vb2 = mu * vb2 - scale * gb2;
            m.b2 += vb2;
        }
    }
    m
}

fn gini(attack: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = attack as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn majority(idx: &[usize], ys: &[f64]) -> Decision {
    let attack = idx.iter().filter(|&&i| ys[i] > 0.0).count();
    if 2 * attack > idx.len() {
        Decision::Attack
    } else {
        Decision::Live
    }
}

struct TreeBuilder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    max_depth: usize,
    n_features: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Greedy Gini split on a random feature subset; returns the node index.
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf(majority(idx, self.ys)));
        let attack = idx.iter().filter(|&&i| self.ys[i] > 0.0).count();
        if depth >= self.max_depth || attack == 0 || attack == idx.len() {
            return me;
        }
        let dim = self.xs[0].len();
        let features = rand::seq::index::sample(rng, dim, self.n_features.min(dim));
        let parent = gini(attack, idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        let mut vals: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
        for f in features.iter() {
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.xs[i][f], self.ys[i] > 0.0)));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let n = vals.len();
            let mut left_attack = 0;
            for k in 0..n - 1 {
                left_attack += usize::from(vals[k].1);
                if vals[k].0 == vals[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let impurity = (nl as f64 * gini(left_attack, nl) + nr as f64 * gini(attack - left_attack, nr)) / n as f64;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, 0.5 * (vals[k].0 + vals[k + 1].0)));
                }
            }
        }
        let Some((impurity, feature, threshold)) = best else {
            return me;
        };
        if impurity >= parent {
            return me;
        }
        idx.sort_by_key(|&i| self.xs[i][feature] > threshold);
        let split = idx.partition_point(|&i| self.xs[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[me] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

fn train_forest(xs: &[Vec<f64>], ys: &[f64], trees: usize, max_depth: usize, rng: &mut ChaCha8Rng) -> RandomForest {
    let dim = xs[0].len();
    let n_features = ((dim as f64).sqrt().ceil() as usize).max(1);
    let n = xs.len();
    let trees = (0..trees)
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = TreeBuilder {
                xs,
                ys,
                max_depth,
                n_features,
                nodes: Vec::new(),
            };
            b.grow(&mut idx, 0, rng);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    RandomForest { dim, trees }
}

/// Member `i` draws from its own stream so results do not depend on
/// scheduling.
fn member_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

pub fn train_ensemble(data: &[LabeledFeatures], recipe: &EnsembleRecipe, seed: u64) -> Result<Ensemble> {
    if recipe.members.is_empty() || recipe.members.len() % 2 == 0 {
        return Err(Error::InvalidEnsemble(format!(
            "ensemble size {} must be odd",
            recipe.members.len()
        )));
    }
    let has = |d: Decision| data.iter().any(|r| r.label == d);
    if !has(Decision::Live) || !has(Decision::Attack) {
        return Err(Error::SingleClassTrainingSet);
    }
    let dim = data[0].features.dim();
    if dim == 0 || data.iter().any(|r| r.features.dim() != dim) {
        return Err(Error::MalformedFeatureFile("inconsistent feature dimensions".into()));
    }
    let raw: Vec<&[f64]> = data.iter().map(|r| r.features.values.as_slice()).collect();
    let ys: Vec<f64> = data.iter().map(|r| target(r.label)).collect();
    let std = Standardizer::fit(&raw);
    let zs: Vec<Vec<f64>> = raw.iter().map(|x| std.apply(x)).collect();
    let raw_owned: Vec<Vec<f64>> = raw.iter().map(|x| x.to_vec()).collect();

    let members = recipe
        .members
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut rng = member_rng(seed, i);
            match *spec {
                MemberSpec::LinearSvm { epochs, lambda } => {
                    let (w, b) = train_svm(&zs, &ys, epochs, lambda, &mut rng);
                    let (weights, bias) = std.fold(&w, b);
                    Classifier::LinearSvm(LinearSvm { weights, bias })
                }
                MemberSpec::Mlp {
                    hidden,
                    epochs,
                    learning_rate,
                } => {
                    let mut m = train_mlp(&zs, &ys, hidden, epochs, learning_rate, &mut rng);
                    for h in 0..hidden {
                        let (w, b) = std.fold(&m.w1[h * dim..(h + 1) * dim], m.b1[h]);
                        m.w1[h * dim..(h + 1) * dim].copy_from_slice(&w);
                        m.b1[h] = b;
                    }
                    Classifier::Mlp(m)
                }
                MemberSpec::RandomForest { trees, max_depth } => {
                    Classifier::RandomForest(train_forest(&raw_owned, &ys, trees, max_depth, &mut rng))
                }
            }
        })
        .collect();
    Ensemble::new(members)
}

//! Independent reference implementations used by the oracle tests. None of
//! these touch the library's adjacency index or optimizer; they work from
//! raw triple lists and dense matrices.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use pathsift::kg::GraphBuilder;
use pathsift::labeler::{Mention, Sentence};
use pathsift::{EntityId, KnowledgeGraph, RelationId, RelationPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A graph as a plain list of `(subject, relation, object)` indices.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub nodes: usize,
    pub relations: usize,
    pub triples: BTreeSet<(usize, usize, usize)>,
    adjacency: BTreeMap<(usize, usize, bool), Vec<usize>>,
}

pub fn node_name(i: usize) -> String {
    format!("n{i}")
}

pub fn rel_name(r: usize) -> String {
    format!("r{r}")
}

impl RawGraph {
    pub fn random(seed: u64, max_nodes: usize, max_relations: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = rng.gen_range(2..=max_nodes);
        let relations = rng.gen_range(1..=max_relations);
        let density: f64 = rng.gen_range(0.02..0.25);
        let mut triples = BTreeSet::new();
        for s in 0..nodes {
            for r in 0..relations {
                for o in 0..nodes {
                    if rng.gen_bool(density) {
                        triples.insert((s, r, o));
                    }
                }
            }
        }
        triples.insert((0, 0, 1));
        Self::new(nodes, relations, triples)
    }

    pub fn new(nodes: usize, relations: usize, triples: BTreeSet<(usize, usize, usize)>) -> Self {
        let mut adjacency: BTreeMap<(usize, usize, bool), Vec<usize>> = BTreeMap::new();
        for &(s, r, o) in &triples {
            adjacency.entry((s, r, false)).or_default().push(o);
            adjacency.entry((o, r, true)).or_default().push(s);
        }
        Self { nodes, relations, triples, adjacency }
    }

    /// Library graph with every node and relation interned in index order.
    pub fn build(&self) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        for i in 0..self.nodes {
            b.entity(&node_name(i)).unwrap();
        }
        for &(s, r, o) in &self.triples {
            b.add(&node_name(s), &rel_name(r), &node_name(o)).unwrap();
        }
        b.build()
    }

    /// Neighbors of `n` along relation `r`, against the edge direction when `inv`.
    pub fn step(&self, n: usize, r: usize, inv: bool) -> Vec<usize> {
        self.adjacency.get(&(n, r, inv)).cloned().unwrap_or_default()
    }

    /// Every relation symbol, forward and inverted.
    pub fn symbols(&self) -> Vec<(usize, bool)> {
        (0..self.relations).flat_map(|r| [(r, false), (r, true)]).collect()
    }

    /// All symbol sequences of length 1..=max_len.
    pub fn sequences(&self, max_len: usize) -> Vec<Vec<(usize, bool)>> {
        let syms = self.symbols();
        let mut out = Vec::new();
        let mut layer: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
        for _ in 0..max_len {
            layer = layer
                .iter()
                .flat_map(|p| syms.iter().map(move |&s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                }))
                .collect();
            out.extend(layer.iter().cloned());
        }
        out
    }

    /// Probability mass at each end node, summed over every individual walk.
    pub fn walk_distribution(&self, seq: &[(usize, bool)], source: usize) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        self.walk_rec(seq, source, 1.0, &mut out);
        out
    }

    fn walk_rec(&self, seq: &[(usize, bool)], at: usize, mass: f64, out: &mut BTreeMap<usize, f64>) {
        let Some((&(r, inv), rest)) = seq.split_first() else {
            *out.entry(at).or_insert(0.0) += mass;
            return;
        };
        let next = self.step(at, r, inv);
        let share = mass / next.len() as f64;
        for n in next {
            self.walk_rec(rest, n, share, out);
        }
    }

    /// Walk counts as exact fractions (numerator, denominator) per end node.
    pub fn walk_distribution_exact(&self, seq: &[(usize, bool)], source: usize) -> BTreeMap<usize, (u128, u128)> {
        fn gcd(a: u128, b: u128) -> u128 {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        fn add(x: (u128, u128), y: (u128, u128)) -> (u128, u128) {
            let n = x.0 * y.1 + y.0 * x.1;
            let d = x.1 * y.1;
            let g = gcd(n, d).max(1);
            (n / g, d / g)
        }
        fn rec(g: &RawGraph, seq: &[(usize, bool)], at: usize, mass: (u128, u128), out: &mut BTreeMap<usize, (u128, u128)>) {
            let Some((&(r, inv), rest)) = seq.split_first() else {
                let e = out.entry(at).or_insert((0, 1));
                *e = add(*e, mass);
                return;
            };
            let next = g.step(at, r, inv);
            let share = (mass.0, mass.1 * next.len() as u128);
            for n in next {
                rec(g, rest, n, share, out);
            }
        }
        let mut out = BTreeMap::new();
        rec(self, seq, source, (1, 1), &mut out);
        out
    }

    pub fn reaches(&self, seq: &[(usize, bool)], source: usize, target: usize) -> bool {
        let mut frontier = BTreeSet::from([source]);
        for &(r, inv) in seq {
            frontier = frontier.iter().flat_map(|&n| self.step(n, r, inv)).collect();
        }
        frontier.contains(&target)
    }

    pub fn to_path(&self, seq: &[(usize, bool)]) -> RelationPath {
        let steps = seq
            .iter()
            .map(|&(r, inv)| {
                let id = RelationId::new(rel_name(r)).unwrap();
                if inv { id.inverse() } else { id }
            })
            .collect();
        RelationPath::new(steps).unwrap()
    }

    pub fn entity(&self, g: &KnowledgeGraph, i: usize) -> EntityId {
        g.entity(&node_name(i)).unwrap()
    }
}

/// Dense logistic-regression instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Instance {
    pub fn random(seed: u64, n: usize, d: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let x: Vec<f64> = (0..d).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
            let z: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-1.0..1.0);
            rows.push(x);
            labels.push(if i < 2 { i == 0 } else { z > 0.0 });
        }
        Self { rows, labels }
    }

    /// Mean NLL + (l2/2)‖w‖², bias unregularized, from first principles.
    pub fn objective(&self, l2: f64, w: &[f64], b: f64) -> f64 {
        let n = self.rows.len() as f64;
        let nll: f64 = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| {
                let z: f64 = x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
                let p = 1.0 / (1.0 + (-z).exp());
                if y { -p.ln() } else { -(1.0 - p).ln() }
            })
            .sum();
        nll / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Damped Newton's method on the same objective, run to machine precision.
    pub fn newton(&self, l2: f64) -> (Vec<f64>, f64, f64) {
        let d = self.rows[0].len();
        let n = self.rows.len() as f64;
        let mut theta = vec![0.0; d + 1]; // weights then bias
        for _ in 0..200 {
            let mut grad = vec![0.0; d + 1];
            let mut hess = vec![vec![0.0; d + 1]; d + 1];
            for (x, &y) in self.rows.iter().zip(&self.labels) {
                let mut xa = x.clone();
                xa.push(1.0);
                let z: f64 = xa.iter().zip(&theta).map(|(a, c)| a * c).sum();
                let p = 1.0 / (1.0 + (-z).exp());
                let r = p - if y { 1.0 } else { 0.0 };
                for i in 0..=d {
                    grad[i] += r * xa[i] / n;
                    for j in 0..=d {
                        hess[i][j] += p * (1.0 - p) * xa[i] * xa[j] / n;
                    }
                }
            }
            for i in 0..d {
                grad[i] += l2 * theta[i];
                hess[i][i] += l2;
            }
            if grad.iter().all(|g| g.abs() < 1e-14) {
                break;
            }
            let step = solve(hess, grad);
            let f0 = self.objective(l2, &theta[..d], theta[d]);
            let mut t = 1.0;
            loop {
                let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
                if self.objective(l2, &cand[..d], cand[d]) <= f0 || t < 1e-12 {
                    theta = cand;
                    break;
                }
                t *= 0.5;
            }
        }
        let f = self.objective(l2, &theta[..d], theta[d]);
        let b = theta.pop().unwrap();
        (theta, b, f)
    }
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Sentence of `tokens` placeholder tokens with `(cui, start, end)` mentions.
pub fn sentence(tokens: usize, mentions: &[(&str, usize, usize)]) -> Sentence {
    Sentence {
        doc: "d0".into(),
        tokens: (0..tokens).map(|i| format!("w{i}")).collect(),
        mentions: mentions.iter().map(|&(c, s, e)| Mention { cui: c.into(), start: s, end: e }).collect(),
        stems: None,
        pos: None,
    }
}

/// Small KB over `n0..n{k}` with `t` (target) and `o` (other) edges, plus a
/// corpus of random sentences mentioning those entities and an unknown one.
pub fn random_labeling_case(seed: u64) -> (KnowledgeGraph, Vec<Sentence>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(3..9);
    let mut b = GraphBuilder::new();
    for i in 0..k {
        b.entity(&node_name(i)).unwrap();
    }
    for _ in 0..rng.gen_range(1..3 * k) {
        let (s, o) = (rng.gen_range(0..k), rng.gen_range(0..k));
        let r = if rng.gen_bool(0.7) { "t" } else { "o" };
        b.add(&node_name(s), r, &node_name(o)).unwrap();
    }
    b.add("n0", "t", "n1").unwrap();
    let g = b.build();
    let corpus = (0..rng.gen_range(1..25))
        .map(|_| {
            let len = rng.gen_range(2..16);
            let mentions: Vec<Mention> = (0..rng.gen_range(0..5))
                .map(|_| {
                    let start = rng.gen_range(0..len);
                    let end = rng.gen_range(start..len.min(start + 3));
                    let cui = if rng.gen_bool(0.1) { "unknown".to_owned() } else { node_name(rng.gen_range(0..k)) };
                    Mention { cui, start, end }
                })
                .collect();
            Sentence { doc: "d".into(), tokens: vec!["w".into(); len], mentions, stems: None, pos: None }
        })
        .collect();
    (g, corpus)
}

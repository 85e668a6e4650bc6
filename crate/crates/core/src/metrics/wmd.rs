//! Word mover's similarity between token sequences.
//!
//! Similarities are cosines mapped from `[-1, 1]` to `[0, 1]` by
//! `(s + 1) / 2`; identical ids score exactly 1. Tokens whose embedding row
//! is zero (or outside the matrix) are dropped before matching.

use crate::embedding::EmbeddingMatrix;

/// Largest sequence the exact transport solver accepts.
pub const EXACT_MAX_TOKENS: usize = 12;

fn keep(ids: &[usize], emb: &EmbeddingMatrix) -> Vec<usize> {
    ids.iter()
        .copied()
        .filter(|&i| i < emb.rows() && !emb.is_flagged(i))
        .collect()
}

/// Mapped cosine similarity of two embedded tokens.
pub fn token_similarity(a: usize, b: usize, emb: &EmbeddingMatrix) -> f64 {
    if a == b {
        return 1.0;
    }
    let (x, y) = (emb.row(a), emb.row(b));
    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
    let s = (dot / (emb.norm(a) * emb.norm(b))).clamp(-1.0, 1.0);
    (s + 1.0) / 2.0
}

fn directed(from: &[usize], to: &[usize], emb: &EmbeddingMatrix) -> f64 {
    let total: f64 = from
        .iter()
        .map(|&a| {
            to.iter()
                .map(|&b| token_similarity(a, b, emb))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / from.len() as f64
}

/// Relaxed, symmetrized score: every token moves all its mass to its most
/// similar counterpart, in both directions, and the two directions are
/// averaged. `None` when either side has no embedded token.
pub fn wmd_score(pred: &[usize], target: &[usize], emb: &EmbeddingMatrix) -> Option<f64> {
    let (p, t) = (keep(pred, emb), keep(target, emb));
    if p.is_empty() || t.is_empty() {
        return None;
    }
    Some((directed(&p, &t, emb) + directed(&t, &p, emb)) / 2.0)
}

/// Optimal-transport similarity with uniform token masses: the largest
/// `sum f_ij * sim_ij` over flows with row sums `1/n` and column sums `1/m`.
/// The relaxed score is never below it. Sequences longer than
/// [`EXACT_MAX_TOKENS`] after filtering give `None`.
pub fn wmd_exact(pred: &[usize], target: &[usize], emb: &EmbeddingMatrix) -> Option<f64> {
    let (p, t) = (keep(pred, emb), keep(target, emb));
    if p.is_empty() || t.is_empty() || p.len() > EXACT_MAX_TOKENS || t.len() > EXACT_MAX_TOKENS {
        return None;
    }
    let sim: Vec<Vec<f64>> = p
        .iter()
        .map(|&a| t.iter().map(|&b| token_similarity(a, b, emb)).collect())
        .collect();
    Some(max_transport(&sim))
}

/// Max-similarity transport between `n` sources of mass `m` and `m` sinks of
/// mass `n` (integer units), solved as min-cost flow with successive
/// shortest paths. Returns the similarity per unit of total mass.
#[allow(clippy::needless_range_loop)]
fn max_transport(sim: &[Vec<f64>]) -> f64 {
    let (n, m) = (sim.len(), sim[0].len());
    // nodes: 0 source, 1..=n left, n+1..=n+m right, n+m+1 sink
    let (src, sink) = (0, n + m + 1);
    let nodes = n + m + 2;
    struct Edge {
        to: usize,
        cap: i64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |edges: &mut Vec<Edge>, a: usize, b: usize, cap: i64, cost: f64| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap, cost });
        adj[b].push(edges.len());
        edges.push(Edge {
            to: a,
            cap: 0,
            cost: -cost,
        });
    };
    for i in 0..n {
        add(&mut edges, src, 1 + i, m as i64, 0.0);
        for j in 0..m {
            add(&mut edges, 1 + i, 1 + n + j, i64::MAX / 4, 1.0 - sim[i][j]);
        }
    }
    for j in 0..m {
        add(&mut edges, 1 + n + j, sink, n as i64, 0.0);
    }

    let need = (n * m) as i64;
    let mut sent = 0;
    let mut cost = 0.0;
    while sent < need {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[src] = 0.0;
        // Bellman-Ford; the residual graph has no negative cycles
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let ed = &edges[e];
                    if ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] - 1e-15 {
                        dist[ed.to] = dist[u] + ed.cost;
                        via[ed.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = need - sent;
        let mut v = sink;
        while v != src {
            let e = via[v];
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != src {
            let e = via[v];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        sent += push;
        cost += push as f64 * dist[sink];
    }
    1.0 - cost / need as f64
}

/// Mean pairwise score within a batch; `None` below two scorable sequences.
pub fn self_wmd<S: AsRef<[usize]>>(batch: &[S], emb: &EmbeddingMatrix) -> Option<f64> {
    let mut vals = Vec::new();
    for i in 0..batch.len() {
        for j in i + 1..batch.len() {
            if let Some(v) = wmd_score(batch[i].as_ref(), batch[j].as_ref(), emb) {
                vals.push(v);
            }
        }
    }
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

//! Reference implementations used as oracles by the integration tests.
//! They recompute everything from the raw corpus on every query.

#![allow(dead_code)]

use std::collections::HashSet;

type Tok = u32;

/// Interpolated Kneser–Ney evaluated straight from its definition.
pub struct KneserNeyOracle<'a> {
    pub corpus: &'a [Vec<Tok>],
    pub order: usize,
    pub discount: f64,
    pub vocab_size: usize,
}

impl<'a> KneserNeyOracle<'a> {
    /// Every occurrence of a gram of length `len` in the corpus.
    fn grams(&self, len: usize) -> Vec<&'a [Tok]> {
        self.corpus.iter().flat_map(|s| s.windows(len)).collect()
    }

    /// Count used at level `k` for the gram `h w` (length k): raw
    /// occurrences at the top order, distinct left extensions below it.
    fn level_count(&self, gram: &[Tok]) -> f64 {
        let k = gram.len();
        if k == self.order {
            self.grams(k).into_iter().filter(|g| *g == gram).count() as f64
        } else {
            let lefts: HashSet<Tok> = self.grams(k + 1).into_iter().filter(|g| &g[1..] == gram).map(|g| g[0]).collect();
            lefts.len() as f64
        }
    }

    fn p_level(&self, h: &[Tok], w: Tok) -> f64 {
        let k = h.len() + 1;
        let lower = if k == 1 { 1.0 / self.vocab_size as f64 } else { self.p_level(&h[1..], w) };
        let counts: Vec<f64> = (0..self.vocab_size as Tok)
            .map(|v| {
                let mut g = h.to_vec();
                g.push(v);
                self.level_count(&g)
            })
            .collect();
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            return lower;
        }
        let distinct = counts.iter().filter(|&&c| c > 0.0).count() as f64;
        (counts[w as usize] - self.discount).max(0.0) / total + self.discount * distinct / total * lower
    }

    pub fn prob(&self, context: &[Tok], w: Tok) -> f64 {
        let keep = context.len().min(self.order - 1);
        self.p_level(&context[context.len() - keep..], w)
    }

    pub fn logprob(&self, seq: &[Tok]) -> f64 {
        (0..seq.len()).map(|t| self.prob(&seq[..t], seq[t]).ln()).sum()
    }
}

/// EER by evaluating every threshold independently.
pub fn brute_force_eer(scores: &[f64], is_machine: &[bool]) -> f64 {
    let mut u = scores.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(u.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    thresholds.push(f64::INFINITY);
    let humans = is_machine.iter().filter(|&&m| !m).count() as f64;
    let machines = is_machine.iter().filter(|&&m| m).count() as f64;
    let mut prev: Option<(f64, f64)> = None;
    for t in thresholds {
        let fa = scores.iter().zip(is_machine).filter(|&(&s, &m)| !m && s > t).count() as f64 / humans;
        let fr = scores.iter().zip(is_machine).filter(|&(&s, &m)| m && s <= t).count() as f64 / machines;
        let d = fa - fr;
        if d == 0.0 {
            return fa;
        }
        if d < 0.0 {
            let (pfa, pfr) = prev.expect("first threshold has fa = 1, fr = 0");
            let pd = pfa - pfr;
            let lambda = pd / (pd - d);
            return pfa + lambda * (fa - pfa);
        }
        prev = Some((fa, fr));
    }
    unreachable!()
}

/// Ridge with an unpenalized intercept by solving the dense normal
/// equations `(XᵀX/n + λI') [w; b] = Xᵀy/n` with Gaussian elimination.
pub fn dense_ridge(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let m = d + 1;
    let aug = |r: &Vec<f64>| r.iter().copied().chain([1.0]).collect::<Vec<f64>>();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (r, &t) in rows.iter().zip(y) {
        let x = aug(r);
        for i in 0..m {
            for j in 0..m {
                a[i][j] += x[i] * x[j] / n;
            }
            a[i][m] += x[i] * t / n;
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(d) {
        row[i] += lambda;
    }
    for col in 0..m {
        let p = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot[col];
                for (x, &pv) in row.iter_mut().zip(&pivot).skip(col) {
                    *x -= f * pv;
                }
            }
        }
    }
    let sol: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    (sol[..d].to_vec(), sol[d])
}

//! Reference implementations used only by tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Exhaustive EM for IBM Model 1 with a fixed NULL share.
///
/// Posteriors are obtained by summing over every alignment vector of a
/// sentence pair rather than from the per-position factorization.
pub struct Model1Oracle {
    pub corpus: Vec<(Vec<String>, Vec<String>)>,
    pub p0: f64,
    pub alpha: f64,
    /// t[(source, target)], with source `None` for NULL.
    pub t: BTreeMap<(Option<String>, String), f64>,
}

impl Model1Oracle {
    pub fn new(corpus: &[(Vec<String>, Vec<String>)], p0: f64, alpha: f64) -> Self {
        let mut domain: BTreeMap<Option<String>, Vec<String>> = BTreeMap::new();
        for (src, tgt) in corpus {
            for f in tgt {
                domain.entry(None).or_default().push(f.clone());
                for e in src {
                    domain.entry(Some(e.clone())).or_default().push(f.clone());
                }
            }
        }
        let mut t = BTreeMap::new();
        for (e, mut fs) in domain {
            fs.sort();
            fs.dedup();
            let w = fs.len() as f64;
            for f in fs {
                t.insert((e.clone(), f), 1.0 / w);
            }
        }
        Self { corpus: corpus.to_vec(), p0, alpha, t }
    }

    fn weight(&self, src: &[String], f: &str, a: usize) -> f64 {
        let n = src.len() as f64;
        if a == 0 {
            self.p0 * self.t[&(None, f.to_string())]
        } else {
            (1.0 - self.p0) / n * self.t[&(Some(src[a - 1].clone()), f.to_string())]
        }
    }

    /// All alignment vectors of a sentence with their joint weights; entry 0 is NULL.
    pub fn enumerate(&self, s: usize) -> Vec<(Vec<usize>, f64)> {
        let (src, tgt) = &self.corpus[s];
        let (n, m) = (src.len(), tgt.len());
        let mut out = Vec::new();
        let mut a = vec![0usize; m];
        loop {
            let w: f64 = a.iter().zip(tgt).map(|(&ai, f)| self.weight(src, f, ai)).product();
            out.push((a.clone(), w));
            let mut k = 0;
            loop {
                if k == m {
                    return out;
                }
                a[k] += 1;
                if a[k] <= n {
                    break;
                }
                a[k] = 0;
                k += 1;
            }
        }
    }

    /// Marginal posteriors p(a_j = i) from the joint enumeration.
    pub fn posteriors(&self, s: usize) -> Vec<Vec<f64>> {
        let (src, tgt) = &self.corpus[s];
        let joint = self.enumerate(s);
        let z: f64 = joint.iter().map(|(_, w)| w).sum();
        let mut post = vec![vec![0.0; src.len() + 1]; tgt.len()];
        for (a, w) in &joint {
            for (j, &i) in a.iter().enumerate() {
                post[j][i] += w / z;
            }
        }
        post
    }

    pub fn iterate(&mut self) {
        let mut counts: BTreeMap<(Option<String>, String), f64> = self.t.keys().map(|k| (k.clone(), 0.0)).collect();
        for s in 0..self.corpus.len() {
            let post = self.posteriors(s);
            let (src, tgt) = &self.corpus[s];
            for (j, f) in tgt.iter().enumerate() {
                *counts.get_mut(&(None, f.clone())).unwrap() += post[j][0];
                for (i, e) in src.iter().enumerate() {
                    *counts.get_mut(&(Some(e.clone()), f.clone())).unwrap() += post[j][i + 1];
                }
            }
        }
        let mut totals: BTreeMap<Option<String>, (f64, usize)> = BTreeMap::new();
        for ((e, _), c) in &counts {
            let entry = totals.entry(e.clone()).or_default();
            entry.0 += c;
            entry.1 += 1;
        }
        for (key, c) in counts {
            let (total, width) = totals[&key.0];
            let denom = total + self.alpha * width as f64;
            if denom > 0.0 {
                self.t.insert(key, (c + self.alpha) / denom);
            }
        }
    }

    /// Best alignment vector by exhaustive search, as source positions or
    /// `None` for NULL. Among maximizers the search prefers real positions
    /// to NULL and smaller positions to larger ones, position by position.
    pub fn viterbi(&self, s: usize) -> Vec<Option<usize>> {
        let joint = self.enumerate(s);
        let best = joint.iter().map(|(_, w)| *w).fold(f64::NEG_INFINITY, f64::max);
        let key = |a: &[usize]| a.iter().map(|&i| if i == 0 { usize::MAX } else { i }).collect::<Vec<_>>();
        let (a, _) = joint.iter().filter(|(_, w)| *w >= best * (1.0 - 1e-12)).min_by_key(|(a, _)| key(a)).unwrap();
        a.iter().map(|&i| i.checked_sub(1)).collect()
    }
}

/// Central finite difference of `f` at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

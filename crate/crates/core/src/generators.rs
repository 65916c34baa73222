//! Seeded simulators for truncated enumerations of random dense countable sets.
//!
//! Every generator is a pure function of a [`Seed`]: the unordered sample
//! `S`, local minima of a Gaussian random walk (a discretized Brownian path),
//! the mixture `X = (P ∩ C) ∪ (S ∩ G)` built from a Poisson set on a fat
//! Cantor set `C` and a sample on its complement `G`, and the three-stream
//! construction where the events `A_k` are recoverable from the selectors.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_measure::{BinSet, FatCantor};
use crate::rational::{self, Rational};
use crate::rng::{Component, Seed};

/// Which part of a construction produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointTag {
    Sample,
    Poisson,
    Walk,
}

impl PointTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointTag::Sample => "sample",
            PointTag::Poisson => "poisson",
            PointTag::Walk => "walk",
        }
    }
}

/// A finite prefix `Y_1, …, Y_len` of a measurable enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    points: Vec<f64>,
    tags: Vec<PointTag>,
    depth: usize,
}

impl Enumeration {
    /// Checks that points lie in (0,1) and are pairwise distinct.
    pub fn new(points: Vec<f64>, tags: Vec<PointTag>, depth: usize) -> Result<Self> {
        if points.len() != tags.len() {
            return Err(Error::BadParameter("one tag per point required".into()));
        }
        if let Some(&t) = points.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::OutOfDomain(t));
        }
        let mut seen = HashSet::with_capacity(points.len());
        if let Some(&t) = points.iter().find(|t| !seen.insert(t.to_bits())) {
            return Err(Error::BadParameter(format!("point {t} repeated")));
        }
        Ok(Enumeration { points, tags, depth })
    }

    /// An enumeration with every point tagged `tag`.
    pub fn tagged(points: Vec<f64>, tag: PointTag, depth: usize) -> Result<Self> {
        let tags = vec![tag; points.len()];
        Self::new(points, tags, depth)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn tags(&self) -> &[PointTag] {
        &self.tags
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count_in(&self, pred: impl Fn(f64) -> bool) -> usize {
        self.points.iter().filter(|&&t| pred(t)).count()
    }

    /// CSV with header `index,point,component`; indices start at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,point,component\n");
        for (k, (t, tag)) in self.points.iter().zip(&self.tags).enumerate() {
            let _ = writeln!(out, "{},{:?},{}", k + 1, t, tag.as_str());
        }
        out
    }
}

/// Uniform draw from the open interval (0,1).
pub(crate) fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draws until `accept` holds and the point is new.
fn fresh_point(
    rng: &mut ChaCha8Rng,
    seen: &mut HashSet<u64>,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> f64 {
    loop {
        let t = draw(rng);
        if t > 0.0 && t < 1.0 && seen.insert(t.to_bits()) {
            return t;
        }
    }
}

/// `D` independent uniform points: the prefix `U_1, …, U_D` of `S`.
pub fn sample_uniform(depth: usize, seed: Seed) -> Result<Enumeration> {
    if depth == 0 {
        return Err(Error::BadParameter("depth must be at least 1".into()));
    }
    let mut rng = seed.stream(Component::Sample);
    let mut seen = HashSet::with_capacity(depth);
    let points = (0..depth).map(|_| fresh_point(&mut rng, &mut seen, uniform_open)).collect();
    Enumeration::tagged(points, PointTag::Sample, depth)
}

/// Gaussian random walk on the grid `k/K`, started at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub steps: usize,
    pub values: Vec<f64>,
}

impl WalkPath {
    pub fn simulate(steps: usize, seed: Seed) -> Result<Self> {
        if steps == 0 {
            return Err(Error::BadParameter("walk needs at least one step".into()));
        }
        let normal = Normal::new(0.0, (1.0 / steps as f64).sqrt()).expect("positive variance");
        let mut rng = seed.stream(Component::Walk);
        let mut values = Vec::with_capacity(steps + 1);
        let mut current = 0.0;
        values.push(current);
        for _ in 0..steps {
            current += normal.sample(&mut rng);
            values.push(current);
        }
        Ok(WalkPath { steps, values })
    }

    /// Indices `0 < k < K` with `values[k-1] > values[k] < values[k+1]`.
    pub fn local_minima(&self) -> Vec<usize> {
        local_minima(&self.values)
    }
}

/// Strict interior local minima of a sequence, ascending.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    values
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w[0] > w[1] && w[1] < w[2])
        .map(|(k, _)| k + 1)
        .collect()
}

/// Times `k/K` of the strict local minima of a `K`-step walk.
pub fn brownian_minima(steps: usize, seed: Seed) -> Result<Enumeration> {
    if steps < 3 {
        return Err(Error::BadParameter("walk needs at least 3 steps".into()));
    }
    let path = WalkPath::simulate(steps, seed)?;
    minima_times(&path)
}

pub fn minima_times(path: &WalkPath) -> Result<Enumeration> {
    let k = path.steps as f64;
    let times = path.local_minima().into_iter().map(|i| i as f64 / k).collect();
    Enumeration::tagged(times, PointTag::Walk, path.steps)
}

/// Poisson set of intensity Lebesgue restricted to `C`.
pub fn poisson_on_cantor(cantor: &FatCantor, seed: Seed) -> Vec<f64> {
    let mut rng = seed.stream(Component::Poisson);
    poisson_points(cantor, &mut rng, &mut HashSet::new())
}

fn poisson_points(cantor: &FatCantor, rng: &mut ChaCha8Rng, seen: &mut HashSet<u64>) -> Vec<f64> {
    let mass = rational::to_f64(&cantor.measure());
    let count = Poisson::new(mass).expect("mes C > 0").sample(rng) as usize;
    (0..count)
        .map(|_| fresh_point(rng, seen, |r| cantor.inverse_cdf(uniform_open(r) * mass)))
        .collect()
}

/// `X = (P ∩ C) ∪ (S ∩ G)`: the Poisson points first, then the first `D`
/// sample points that fall in `G`.
pub fn counterexample_x(depth: usize, cantor: &FatCantor, seed: Seed) -> Result<Enumeration> {
    if depth == 0 {
        return Err(Error::BadParameter("depth must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    let mut points = poisson_points(cantor, &mut seed.stream(Component::Poisson), &mut seen);
    let mut tags = vec![PointTag::Poisson; points.len()];
    let mut rng = seed.stream(Component::GapSample);
    while tags.len() - tags.iter().filter(|&&t| t == PointTag::Poisson).count() < depth {
        let t = uniform_open(&mut rng);
        if cantor.in_gap(t) && seen.insert(t.to_bits()) {
            points.push(t);
            tags.push(PointTag::Sample);
        }
    }
    Enumeration::new(points, tags, depth)
}

/// The generators available to ensembles, statistics and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Sample { depth: usize },
    Minima { steps: usize },
    Counterexample { depth: usize, cantor: FatCantor },
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Sample { .. } => "sample",
            Generator::Minima { .. } => "minima",
            Generator::Counterexample { .. } => "counterexample",
        }
    }

    pub fn generate(&self, seed: Seed) -> Result<Enumeration> {
        match self {
            Generator::Sample { depth } => sample_uniform(*depth, seed),
            Generator::Minima { steps } => brownian_minima(*steps, seed),
            Generator::Counterexample { depth, cantor } => counterexample_x(*depth, cantor, seed),
        }
    }

    /// Replicas `0..replicas` of `root`, generated in parallel, in replica order.
    pub fn ensemble(&self, root: u64, replicas: usize) -> Result<Vec<Enumeration>> {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| self.generate(Seed::new(root).replica(r)))
            .collect()
    }
}

/// Monte Carlo estimate of `μ(A) = Σ_{n ≤ D} n^(-2) Pr(Y_n ∈ A)`, computed
/// exactly from the replica counts.
pub fn intensity_estimate(gen: &Generator, set: &BinSet, replicas: usize, root: u64) -> Result<Rational> {
    if replicas == 0 {
        return Err(Error::BadParameter("need at least one replica".into()));
    }
    let ensemble = gen.ensemble(root, replicas)?;
    let horizon = ensemble.iter().map(Enumeration::len).max().unwrap_or(0);
    let mut hits = vec![0i64; horizon];
    for e in &ensemble {
        for (n, &t) in e.points().iter().enumerate() {
            if set.contains_point(t)? {
                hits[n] += 1;
            }
        }
    }
    Ok(hits.iter().enumerate().fold(Rational::zero(), |acc, (n, &h)| {
        let n = (n + 1) as i64;
        acc + rational::ratio(h, replicas as i64 * n * n)
    }))
}

/// Independent `U_k ~ (0,1/4)`, `V_k ~ (1/4,1/2)`, `Z_k ~ (1/2,1)`, events
/// `A_k = {Z_k < 3/4}` and `Y_k = U_k` on `A_k`, `V_k` off it.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample36 {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub events: Vec<bool>,
    pub y: Vec<f64>,
}

pub const EVENT_THRESHOLD: f64 = 0.75;

pub fn counterexample36_build(depth: usize, seed: Seed) -> Result<Counterexample36> {
    if depth == 0 {
        return Err(Error::BadParameter("depth must be at least 1".into()));
    }
    let stream = |component: Component, lo: f64, width: f64| -> Vec<f64> {
        let mut rng = seed.stream(component);
        let mut seen = HashSet::new();
        (0..depth).map(|_| fresh_point(&mut rng, &mut seen, |r| lo + width * uniform_open(r))).collect()
    };
    let u = stream(Component::LowerUniform, 0.0, 0.25);
    let v = stream(Component::MiddleUniform, 0.25, 0.25);
    let z = stream(Component::UpperUniform, 0.5, 0.5);
    let events: Vec<bool> = z.iter().map(|&z| z < EVENT_THRESHOLD).collect();
    let y = events.iter().enumerate().map(|(k, &a)| if a { u[k] } else { v[k] }).collect();
    Ok(Counterexample36 { u, v, z, events, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_measure::UnitGrid;
    use crate::rational::ratio;

    fn cantor_half() -> FatCantor {
        FatCantor::build(&ratio(1, 2), 10).unwrap()
    }

    #[test]
    fn sample_shape_and_determinism() {
        let e = sample_uniform(3, Seed::new(11)).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.points().iter().all(|&t| t > 0.0 && t < 1.0));
        assert_eq!(e, sample_uniform(3, Seed::new(11)).unwrap());
        assert_ne!(e, sample_uniform(3, Seed::new(11).replica(1)).unwrap());
        assert!(sample_uniform(0, Seed::new(11)).is_err());
    }

    #[test]
    fn sample_bin_counts_match_binomial_mean() {
        // E[count in A] = D · mes A; check within 3 standard errors over 1000 replicas.
        let grid = UnitGrid::new(8).unwrap();
        let a = BinSet::new(grid, [0, 3, 4]).unwrap();
        let (d, r) = (50usize, 1000usize);
        let p = 3.0 / 8.0;
        let ensemble = Generator::Sample { depth: d }.ensemble(5, r).unwrap();
        let mean = ensemble
            .iter()
            .map(|e| e.count_in(|t| a.contains_point(t).unwrap()) as f64)
            .sum::<f64>()
            / r as f64;
        let se = (d as f64 * p * (1.0 - p) / r as f64).sqrt();
        assert!((mean - d as f64 * p).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn minima_of_a_fixed_path() {
        let path = WalkPath { steps: 4, values: vec![0.0, -1.0, 0.5, -0.2, 1.0] };
        let e = minima_times(&path).unwrap();
        assert_eq!(e.points(), &[0.25, 0.75]);
        let rising = WalkPath { steps: 4, values: vec![0.0, 1.0, 2.0, 3.0, 4.0] };
        assert!(minima_times(&rising).unwrap().is_empty());
        assert!(brownian_minima(2, Seed::new(1)).is_err());
    }

    #[test]
    fn minima_are_increasing_and_genuine() {
        let seed = Seed::new(3);
        let path = WalkPath::simulate(2000, seed).unwrap();
        let idx = path.local_minima();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for &k in &idx {
            assert!(path.values[k - 1] > path.values[k] && path.values[k] < path.values[k + 1]);
        }
        let e = brownian_minima(2000, seed).unwrap();
        assert_eq!(e.len(), idx.len());
    }

    #[test]
    fn walk_minimum_frequency_is_one_quarter() {
        // A strict local minimum at k needs a down-step then an up-step: two
        // independent symmetric increments, probability 1/4. Expected count
        // (K - 1)/4; the count is a 1-dependent sum with variance ≈ K/16.
        let (steps, replicas) = (10_000usize, 200u64);
        let total: usize = (0..replicas)
            .map(|r| brownian_minima(steps, Seed::new(99).replica(r)).unwrap().len())
            .sum();
        let mean = total as f64 / replicas as f64;
        let expected = (steps - 1) as f64 / 4.0;
        assert!((mean / expected - 1.0).abs() < 0.01, "mean {mean} vs {expected}");
    }

    #[test]
    fn poisson_points_lie_in_cantor() {
        let c = cantor_half();
        let mut total = 0;
        for r in 0..500 {
            let pts = poisson_on_cantor(&c, Seed::new(4).replica(r));
            total += pts.len();
            assert!(pts.iter().all(|&t| c.contains(t).unwrap()));
        }
        assert!(total > 0);
    }

    #[test]
    fn poisson_count_mean_and_zero_probability() {
        // N ~ Poisson(mes C): mean mes C, P(N = 0) = exp(-mes C).
        let c = cantor_half();
        let mass = rational::to_f64(&c.measure());
        let r = 10_000u64;
        let counts: Vec<usize> = (0..r).map(|i| poisson_on_cantor(&c, Seed::new(8).replica(i)).len()).collect();
        let mean = counts.iter().sum::<usize>() as f64 / r as f64;
        assert!((mean - mass).abs() < 3.0 * (mass / r as f64).sqrt(), "mean {mean}");
        let zero = counts.iter().filter(|&&n| n == 0).count() as f64 / r as f64;
        let p0 = (-mass).exp();
        assert!((zero - p0).abs() < 3.0 * (p0 * (1.0 - p0) / r as f64).sqrt(), "P(N=0) {zero}");
        assert!((p0 - 0.6065).abs() < 1e-3);
    }

    #[test]
    fn counterexample_parts_land_where_they_belong() {
        let c = cantor_half();
        for r in 0..50 {
            let e = counterexample_x(40, &c, Seed::new(2).replica(r)).unwrap();
            let mut samples = 0;
            for (&t, &tag) in e.points().iter().zip(e.tags()) {
                match tag {
                    PointTag::Poisson => assert!(c.contains(t).unwrap()),
                    PointTag::Sample => {
                        samples += 1;
                        assert!(c.in_gap(t));
                    }
                    PointTag::Walk => unreachable!(),
                }
            }
            assert_eq!(samples, 40);
        }
    }

    #[test]
    fn count_in_cantor_does_not_grow_with_depth() {
        let c = cantor_half();
        let mass = rational::to_f64(&c.measure());
        for depth in [10, 200] {
            let gen = Generator::Counterexample { depth, cantor: c.clone() };
            let ensemble = gen.ensemble(21, 4000).unwrap();
            let mean = ensemble.iter().map(|e| e.count_in(|t| !c.in_gap(t))).sum::<usize>() as f64 / 4000.0;
            assert!((mean - mass).abs() < 3.0 * (mass / 4000.0).sqrt(), "depth {depth}: {mean}");
        }
    }

    #[test]
    fn intensity_estimates() {
        let grid = UnitGrid::new(4).unwrap();
        let half = BinSet::new(grid, [1, 2]).unwrap();
        let depth = 20;
        let est = intensity_estimate(&Generator::Sample { depth }, &half, 2000, 17).unwrap();
        let exact: f64 = (1..=depth).map(|n| 0.5 / (n * n) as f64).sum();
        // Per-index hit indicators have variance 1/4; Σ n^-4 < 1.09.
        let se = (0.25 * 1.09 / 2000.0f64).sqrt();
        assert!((rational::to_f64(&est) - exact).abs() < 3.0 * se);

        let none = BinSet::empty(grid);
        assert!(intensity_estimate(&Generator::Sample { depth }, &none, 10, 17).unwrap().is_zero());

        // A bin that sits inside C: X still charges it through the Poisson part.
        let c = FatCantor::build(&ratio(1, 2), 6).unwrap();
        let fine = UnitGrid::new(1 << 10).unwrap();
        let inside: Vec<usize> = (0..fine.bins())
            .filter(|&k| {
                let (lo, hi) = fine.bin_bounds(k);
                c.kept_segments().iter().any(|&(a, b)| a <= lo && hi <= b)
            })
            .collect();
        let a = BinSet::new(fine, inside).unwrap();
        assert!(a.measure() > Rational::zero());
        let gen = Generator::Counterexample { depth: 5, cantor: c };
        assert!(intensity_estimate(&gen, &a, 500, 3).unwrap() > Rational::zero());
    }

    #[test]
    fn counterexample36_reconstruction_identity() {
        for r in 0..20 {
            let x = counterexample36_build(100, Seed::new(36).replica(r)).unwrap();
            for k in 0..100 {
                assert_eq!(x.events[k], x.y[k] < 0.25);
                assert!(x.y[k] == x.u[k] || x.y[k] == x.v[k]);
                assert!(x.u[k] < 0.25 && x.v[k] > 0.25 && x.v[k] < 0.5 && x.z[k] > 0.5);
            }
        }
        let x = counterexample36_build(20_000, Seed::new(1)).unwrap();
        let rate = x.events.iter().filter(|&&a| a).count() as f64 / 20_000.0;
        // Z_k is uniform on (1/2,1), so Pr(Z_k < 3/4) = 1/2.
        assert!((rate - 0.5).abs() < 3.0 * (0.25 / 20_000.0f64).sqrt());
    }

    #[test]
    fn enumeration_validation_and_csv() {
        assert!(Enumeration::tagged(vec![0.5, 0.5], PointTag::Sample, 2).is_err());
        assert!(Enumeration::tagged(vec![0.0], PointTag::Sample, 1).is_err());
        let e = Enumeration::new(vec![0.5, 0.25], vec![PointTag::Poisson, PointTag::Sample], 1).unwrap();
        assert_eq!(e.to_csv(), "index,point,component\n1,0.5,poisson\n2,0.25,sample\n");
    }
}

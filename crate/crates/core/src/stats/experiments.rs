//! Experiments: fragment independence, stationarity, the counterexample
//! distinguisher, shift-hit curves, the nonsingularity proxy and the
//! reconstruction check.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chi_square_independence, chi_square_quantile, ks_two_sample, two_sample_mean_test, TestReport};
use crate::error::{Error, Result};
use crate::generators::{
    counterexample_x, local_minima, poisson_on_cantor, sample_uniform, Counterexample36, Enumeration, Generator,
    WalkPath, EVENT_THRESHOLD,
};
use crate::grid_measure::{BinSet, CyclicShift, FatCantor};
use crate::rational;
use crate::rng::{Component, Seed};

/// Partition points `0 = t_0 < t_1 < … < t_k = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cuts(Vec<f64>);

impl Cuts {
    /// Builds the partition from its interior points.
    pub fn from_interior(interior: &[f64]) -> Result<Self> {
        let mut cuts = Vec::with_capacity(interior.len() + 2);
        cuts.push(0.0);
        cuts.extend_from_slice(interior);
        cuts.push(1.0);
        if cuts.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::BadParameter("cuts must be strictly increasing inside (0,1)".into()));
        }
        Ok(Cuts(cuts))
    }

    /// Equal fragments.
    pub fn even(fragments: usize) -> Result<Self> {
        if fragments == 0 {
            return Err(Error::BadParameter("need at least one fragment".into()));
        }
        let interior: Vec<f64> = (1..fragments).map(|k| k as f64 / fragments as f64).collect();
        Self::from_interior(&interior)
    }

    pub fn fragments(&self) -> usize {
        self.0.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    /// Fragment index of `t`, or `None` for a cut point itself.
    pub fn fragment_of(&self, t: f64) -> Option<usize> {
        let k = self.0.partition_point(|&c| c < t);
        (k >= 1 && k < self.0.len() && self.0[k] != t).then(|| k - 1)
    }

    /// Position of `t` inside fragment `k`, rescaled to (0,1).
    fn relative(&self, k: usize, t: f64) -> f64 {
        (t - self.0[k]) / (self.0[k + 1] - self.0[k])
    }
}

/// Per-fragment statistic used by [`fragment_independence_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FragmentObservable {
    /// Relative position, in `bins` classes, of the first enumerated point
    /// inside each fragment. Replicas with an empty fragment are skipped.
    FirstPoint { bins: usize },
    /// Relative position, in `bins` classes, of the lowest local minimum of
    /// the walk inside each fragment. Walk generator only.
    DeepestMinimum { bins: usize },
    /// Number of enumerated points in each fragment, capped at `cap`. For a
    /// fixed-depth sample the counts sum to `D` and are dependent, so this
    /// observable is expected to reject.
    CappedCount { cap: usize },
}

impl FragmentObservable {
    fn classes(self) -> usize {
        match self {
            FragmentObservable::FirstPoint { bins } | FragmentObservable::DeepestMinimum { bins } => bins,
            FragmentObservable::CappedCount { cap } => cap + 1,
        }
    }

    fn observe(self, gen: &Generator, seed: Seed, cuts: &Cuts) -> Result<Option<Vec<usize>>> {
        let classes = self.classes();
        let class_of = |x: f64| ((x * classes as f64) as usize).min(classes - 1);
        let k = cuts.fragments();
        match self {
            FragmentObservable::FirstPoint { .. } => {
                let e = gen.generate(seed)?;
                let mut first = vec![None; k];
                for &t in e.points() {
                    if let Some(f) = cuts.fragment_of(t) {
                        first[f].get_or_insert(class_of(cuts.relative(f, t)));
                    }
                }
                Ok(first.into_iter().collect())
            }
            FragmentObservable::DeepestMinimum { .. } => {
                let Generator::Minima { steps } = gen else {
                    return Err(Error::BadParameter("deepest-minimum observable needs the walk generator".into()));
                };
                let path = WalkPath::simulate(*steps, seed)?;
                let mut deepest: Vec<Option<(f64, f64)>> = vec![None; k];
                for i in local_minima(&path.values) {
                    let t = i as f64 / *steps as f64;
                    if let Some(f) = cuts.fragment_of(t) {
                        let v = path.values[i];
                        if deepest[f].is_none_or(|(best, _)| v < best) {
                            deepest[f] = Some((v, t));
                        }
                    }
                }
                Ok(deepest
                    .into_iter()
                    .enumerate()
                    .map(|(f, d)| d.map(|(_, t)| class_of(cuts.relative(f, t))))
                    .collect())
            }
            FragmentObservable::CappedCount { cap } => {
                let e = gen.generate(seed)?;
                let mut counts = vec![0usize; k];
                for &t in e.points() {
                    if let Some(f) = cuts.fragment_of(t) {
                        counts[f] += 1;
                    }
                }
                Ok(Some(counts.into_iter().map(|c| c.min(cap)).collect()))
            }
        }
    }
}

/// Chi-square independence of the observable across every pair of
/// fragments. The statistic is the largest pairwise chi-square and the
/// threshold is Bonferroni-corrected over the pairs.
pub fn fragment_independence_test(
    gen: &Generator,
    cuts: &Cuts,
    observable: FragmentObservable,
    replicas: usize,
    root: u64,
    level: f64,
) -> Result<TestReport> {
    let k = cuts.fragments();
    if k < 2 {
        return Err(Error::BadParameter("fragment independence needs two or more fragments".into()));
    }
    if observable.classes() < 2 {
        return Err(Error::BadParameter("observable needs at least two classes".into()));
    }
    let rows: Vec<Option<Vec<usize>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| observable.observe(gen, Seed::new(root).replica(r), cuts))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<usize>> = rows.into_iter().flatten().collect();
    let pairs = k * (k - 1) / 2;
    let per_pair = level / pairs as f64;
    let classes = observable.classes();
    let mut statistic = 0.0f64;
    let mut p_min = 1.0f64;
    for a in 0..k {
        for b in a + 1..k {
            let x: Vec<usize> = rows.iter().map(|row| row[a]).collect();
            let y: Vec<usize> = rows.iter().map(|row| row[b]).collect();
            let report = chi_square_independence(&x, &y, classes, classes, per_pair)?;
            statistic = statistic.max(report.statistic);
            p_min = p_min.min(report.p_value.unwrap_or(1.0));
        }
    }
    let df = ((classes - 1) * (classes - 1)) as f64;
    let (_, threshold) = chi_square_quantile(df, per_pair);
    Ok(TestReport::new("fragment_independence", statistic, threshold, level, Some((p_min * pairs as f64).min(1.0)))
        .with_run(rows.len(), Some(root)))
}

/// A measurable set used by counting observables.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Bins(BinSet),
    Cantor(FatCantor),
}

impl Region {
    pub fn contains(&self, t: f64) -> bool {
        match self {
            Region::Bins(set) => set.contains_point(t).unwrap_or(false),
            Region::Cantor(c) => c.contains(t).unwrap_or(false),
        }
    }

    pub fn measure(&self) -> rational::Rational {
        match self {
            Region::Bins(set) => set.measure(),
            Region::Cantor(c) => c.measure(),
        }
    }

    pub fn count(&self, points: &[f64]) -> usize {
        points.iter().filter(|&&t| self.contains(t)).count()
    }
}

/// Distributional functional compared between `X` and `T_s(X)`.
#[derive(Debug, Clone, PartialEq)]
pub enum StationarityObservable {
    CountIn(Region),
    FragmentCounts(Cuts),
}

impl StationarityObservable {
    fn values(&self, points: &[f64]) -> Vec<f64> {
        match self {
            StationarityObservable::CountIn(region) => vec![region.count(points) as f64],
            StationarityObservable::FragmentCounts(cuts) => {
                let mut counts = vec![0.0; cuts.fragments()];
                for &t in points {
                    if let Some(f) = cuts.fragment_of(t) {
                        counts[f] += 1.0;
                    }
                }
                counts
            }
        }
    }
}

/// Two-sample comparison of an observable on `X` (replicas `0..R`) and on
/// `T_s(X)` (replicas `R..2R`, fresh uniform `s` per replica). With
/// `shifted = false` the second arm is left unshifted, a control that must
/// pass. Multi-component observables use a Bonferroni-corrected KS per
/// component and report the largest excess.
pub fn stationarity_test(
    gen: &Generator,
    observable: &StationarityObservable,
    replicas: usize,
    root: u64,
    level: f64,
    shifted: bool,
) -> Result<TestReport> {
    let arm = |range: std::ops::Range<u64>, shift: bool| -> Result<Vec<Vec<f64>>> {
        range
            .into_par_iter()
            .map(|r| {
                let seed = Seed::new(root).replica(r);
                let e = gen.generate(seed)?;
                let points = if shift {
                    let s: f64 = seed.stream(Component::Shift).random();
                    CyclicShift::new(s)?.apply_all(e.points())
                } else {
                    e.points().to_vec()
                };
                Ok(observable.values(&points))
            })
            .collect()
    };
    let r = replicas as u64;
    let x = arm(0..r, false)?;
    let y = arm(r..2 * r, shifted)?;
    let components = x.first().map_or(0, Vec::len);
    let per = level / components.max(1) as f64;
    let mut worst: Option<TestReport> = None;
    for c in 0..components {
        let a: Vec<f64> = x.iter().map(|v| v[c]).collect();
        let b: Vec<f64> = y.iter().map(|v| v[c]).collect();
        let report = ks_two_sample(&a, &b, per)?;
        let excess = report.statistic / report.threshold;
        if worst.as_ref().is_none_or(|w| excess > w.statistic / w.threshold) {
            worst = Some(report);
        }
    }
    let worst = worst.ok_or_else(|| Error::BadParameter("observable has no components".into()))?;
    let p = worst.p_value.map(|p| (p * components as f64).min(1.0));
    Ok(TestReport::new("stationarity", worst.statistic, worst.threshold, level, p).with_run(2 * replicas, Some(root)))
}

/// Outcome of the sample-versus-counterexample comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishReport {
    pub test: TestReport,
    pub depth: usize,
    pub gap_measure: f64,
    pub mean_sample: f64,
    pub mean_counterexample: f64,
}

impl DistinguishReport {
    /// The two arms were told apart.
    pub fn distinguished(&self) -> bool {
        !self.test.pass
    }
}

/// Count of points inside `C` for `S` (depth `D`) against `X`. Replicas of
/// the two arms use disjoint replica indices.
pub fn distinguish_counterexample(
    cantor: &FatCantor,
    depth: usize,
    replicas: usize,
    root: u64,
    level: f64,
) -> Result<DistinguishReport> {
    let r = replicas as u64;
    let in_c = |points: &[f64]| points.iter().filter(|&&t| cantor.contains(t).unwrap_or(false)).count() as f64;
    let sample: Vec<f64> = (0..r)
        .into_par_iter()
        .map(|i| if depth == 0 { Ok(0.0) } else { Ok(in_c(sample_uniform(depth, Seed::new(root).replica(i))?.points())) })
        .collect::<Result<_>>()?;
    let counter: Vec<f64> = (r..2 * r)
        .into_par_iter()
        .map(|i| {
            let seed = Seed::new(root).replica(i);
            if depth == 0 {
                Ok(in_c(&poisson_on_cantor(cantor, seed)))
            } else {
                Ok(in_c(counterexample_x(depth, cantor, seed)?.points()))
            }
        })
        .collect::<Result<_>>()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let test = two_sample_mean_test(&sample, &counter, level)?.with_run(2 * replicas, Some(root));
    Ok(DistinguishReport {
        test: TestReport { name: "distinguish_counterexample".into(), ..test },
        depth,
        gap_measure: rational::to_f64(cantor.gap_measure()),
        mean_sample: mean(&sample),
        mean_counterexample: mean(&counter),
    })
}

/// First `count` dyadic rationals in the order `1/2, 1/4, 3/4, 1/8, 3/8, …`.
pub fn dyadic_prefix(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut level = 1u32;
    while out.len() < count {
        let den = 2f64.powi(level as i32);
        let mut num = 1u64;
        while out.len() < count && (num as f64) < den {
            out.push(num as f64 / den);
            num += 2;
        }
        level += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftHitPoint {
    pub depth: usize,
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
    /// `D · mes A`, the exact average over shifts.
    pub expected_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftHitCurve {
    pub shifts: usize,
    pub seed: u64,
    pub measure: f64,
    pub points: Vec<ShiftHitPoint>,
}

impl ShiftHitCurve {
    /// Means within `tolerance` (relative) of `D · mes A` at every depth.
    pub fn means_within(&self, tolerance: f64) -> bool {
        self.points.iter().all(|p| (p.mean - p.expected_mean).abs() <= tolerance * p.expected_mean.max(f64::MIN_POSITIVE))
    }

    pub fn strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].mean < w[1].mean)
    }

    pub fn median_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].median <= w[1].median)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,mean,median,min,max,expected_mean\n");
        for p in &self.points {
            out.push_str(&format!("{},{:?},{:?},{},{},{:?}\n", p.depth, p.mean, p.median, p.min, p.max, p.expected_mean));
        }
        out
    }
}

/// `|{l ∈ L_D : T_s(l) ∈ A}|` over random shifts `s`, for each depth. The
/// same shifts are used at every depth, so counts are monotone in `D`.
pub fn shift_hit_curve(region: &Region, depths: &[usize], shifts: usize, root: u64) -> Result<ShiftHitCurve> {
    if shifts == 0 || depths.is_empty() {
        return Err(Error::BadParameter("need at least one shift and one depth".into()));
    }
    let max_depth = depths.iter().copied().max().unwrap_or(0);
    let lattice = dyadic_prefix(max_depth);
    let shift_values: Vec<f64> =
        (0..shifts as u64).map(|i| Seed::new(root).replica(i).stream(Component::Shift).random()).collect();
    let measure = rational::to_f64(&region.measure());
    let points = depths
        .iter()
        .map(|&d| {
            let mut counts: Vec<usize> = shift_values
                .par_iter()
                .map(|&s| {
                    let shift = CyclicShift::new(s).expect("s in [0,1)");
                    lattice[..d].iter().filter_map(|&l| shift.apply(l).ok()).filter(|&t| region.contains(t)).count()
                })
                .collect();
            let mean = counts.iter().sum::<usize>() as f64 / shifts as f64;
            counts.sort_unstable();
            let mid = shifts / 2;
            let median =
                if shifts % 2 == 1 { counts[mid] as f64 } else { (counts[mid - 1] + counts[mid]) as f64 / 2.0 };
            ShiftHitPoint {
                depth: d,
                mean,
                median,
                min: counts[0],
                max: counts[shifts - 1],
                expected_mean: d as f64 * measure,
            }
        })
        .collect();
    Ok(ShiftHitCurve { shifts, seed: root, measure, points })
}

/// Default cell floor `ε_cell = 1/(4r²)`.
pub fn default_cell_floor(r: usize) -> f64 {
    1.0 / (4.0 * (r * r) as f64)
}

/// Empirical absolute-continuity proxy for the pair `(Y, Z)` on the event
/// `Y < half_threshold`. `Y` is binned on `(0, half_threshold)` and `Z` on
/// `(0,1)`, `r` bins each. The statistic is the largest ratio of joint
/// frequency to the product of marginal frequencies over occupied cells; a
/// cell is flagged when its product falls below `ε_cell · r²` times its
/// joint frequency, so the threshold is `1/(ε_cell · r²)`. Needs at least
/// `5r²` replicas inside the event.
pub fn nonsingularity_diagnostic(
    y: &[f64],
    z: &[f64],
    half_threshold: f64,
    r: usize,
    cell_floor: f64,
    level: f64,
) -> Result<TestReport> {
    if y.len() != z.len() {
        return Err(Error::BadParameter("Y and Z must come from the same ensemble".into()));
    }
    if r == 0 || !(half_threshold > 0.0 && half_threshold <= 1.0) || cell_floor <= 0.0 {
        return Err(Error::BadParameter("need r ≥ 1, a threshold in (0,1] and a positive floor".into()));
    }
    let bin = |t: f64, width: f64| ((t / width * r as f64) as usize).min(r - 1);
    let pairs: Vec<(usize, usize)> =
        y.iter().zip(z).filter(|(&y, _)| y < half_threshold).map(|(&y, &z)| (bin(y, half_threshold), bin(z, 1.0))).collect();
    let needed = 5 * r * r;
    if pairs.len() < needed {
        return Err(Error::TooFewSamples { needed, got: pairs.len() });
    }
    let n = pairs.len() as f64;
    let mut joint = vec![vec![0usize; r]; r];
    let (mut ry, mut rz) = (vec![0usize; r], vec![0usize; r]);
    for &(a, b) in &pairs {
        joint[a][b] += 1;
        ry[a] += 1;
        rz[b] += 1;
    }
    let mut statistic = 0.0f64;
    for a in 0..r {
        for b in 0..r {
            if joint[a][b] > 0 {
                let ratio = joint[a][b] as f64 * n / (ry[a] as f64 * rz[b] as f64);
                statistic = statistic.max(ratio);
            }
        }
    }
    let threshold = 1.0 / (cell_floor * (r * r) as f64);
    Ok(TestReport::new("nonsingularity", statistic, threshold, level, None).with_run(pairs.len(), None))
}

/// Fraction of `(replica, k)` pairs with `A_k = {Y_k < 1/4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub test: TestReport,
    pub rate: f64,
    pub checked: usize,
}

pub fn reconstruction_rate(events: &[bool], y: &[f64]) -> (usize, usize) {
    let hits = events.iter().zip(y).filter(|(&a, &y)| a == (y < 0.25)).count();
    (hits, events.len().min(y.len()))
}

fn reconstruction_report(name: &str, hits: usize, checked: usize) -> ReconstructionReport {
    let misses = (checked - hits) as f64;
    let rate = if checked == 0 { 1.0 } else { hits as f64 / checked as f64 };
    ReconstructionReport { test: TestReport::new(name, misses, 0.5, 0.0, None), rate, checked }
}

/// Sure check of the identity `A_k = {Y_k < 1/4}`; passes iff no pair fails.
pub fn counterexample36_check(apparatus: &[Counterexample36]) -> ReconstructionReport {
    let (hits, checked) = apparatus
        .iter()
        .map(|a| reconstruction_rate(&a.events, &a.y))
        .fold((0, 0), |(h, c), (h2, c2)| (h + h2, c + c2));
    reconstruction_report("counterexample36", hits, checked).with_replicas(apparatus.len())
}

/// Control: events paired with a seeded permutation of each replica's `Y`.
/// The rate drops to about `P(A)² + P(A^c)² = 1/2`.
pub fn counterexample36_shuffled(apparatus: &[Counterexample36], root: u64) -> ReconstructionReport {
    let (hits, checked) = apparatus
        .iter()
        .enumerate()
        .map(|(r, a)| {
            let mut y = a.y.clone();
            y.shuffle(&mut Seed::new(root).replica(r as u64).stream(Component::Control));
            reconstruction_rate(&a.events, &y)
        })
        .fold((0, 0), |(h, c), (h2, c2)| (h + h2, c + c2));
    reconstruction_report("counterexample36_shuffled", hits, checked).with_replicas(apparatus.len())
}

impl ReconstructionReport {
    fn with_replicas(mut self, replicas: usize) -> Self {
        self.test.replicas = replicas;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Probability of `A_k` under the event rule, `2 · (3/4 − 1/2)`.
pub fn event_probability() -> f64 {
    2.0 * (EVENT_THRESHOLD - 0.5)
}

/// Counts of points in `region` over an ensemble, in replica order.
pub fn region_counts(ensemble: &[Enumeration], region: &Region) -> Vec<usize> {
    ensemble.iter().map(|e| region.count(e.points())).collect()
}

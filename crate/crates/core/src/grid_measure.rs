//! The unit interval at finite resolution.
//!
//! Points are `f64` values in the open interval (0,1). Sets are unions of
//! half-open bins `[k/n, (k+1)/n)` and their measures are exact rationals.
//! [`FatCantor`] is the nowhere dense compact set of positive measure used by
//! the Poisson counterexample, and [`CyclicShift`] is `t ↦ t + s mod 1`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

fn check_open_unit(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(t))
    }
}

/// `n` equal half-open bins covering `[0,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnitGrid {
    n: usize,
}

impl UnitGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParameter("grid needs at least one bin".into()));
        }
        Ok(UnitGrid { n })
    }

    pub fn bins(&self) -> usize {
        self.n
    }

    pub fn bin_measure(&self) -> Rational {
        rational::ratio(1, self.n as i64)
    }

    /// Index `k` with `k/n ≤ t < (k+1)/n`.
    pub fn bin_of(&self, t: f64) -> Result<usize> {
        check_open_unit(t)?;
        Ok(self.bin_of_unchecked(t))
    }

    pub(crate) fn bin_of_unchecked(&self, t: f64) -> usize {
        let n = self.n as f64;
        let mut k = ((t * n).floor() as usize).min(self.n - 1);
        // t * n can round across a bin edge; settle it against the edges directly.
        if k > 0 && t < k as f64 / n {
            k -= 1;
        } else if k + 1 < self.n && t >= (k + 1) as f64 / n {
            k += 1;
        }
        k
    }

    /// Left edge and right edge of bin `k`, as doubles.
    pub fn bin_bounds(&self, k: usize) -> (f64, f64) {
        let n = self.n as f64;
        (k as f64 / n, (k + 1) as f64 / n)
    }
}

/// A finite union of grid bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinSet {
    grid: UnitGrid,
    members: BTreeSet<usize>,
}

impl BinSet {
    pub fn new(grid: UnitGrid, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&bad) = members.iter().find(|&&k| k >= grid.bins()) {
            return Err(Error::BadParameter(format!(
                "bin {bad} out of range for a grid of {} bins",
                grid.bins()
            )));
        }
        Ok(BinSet { grid, members })
    }

    pub fn empty(grid: UnitGrid) -> Self {
        BinSet { grid, members: BTreeSet::new() }
    }

    pub fn full(grid: UnitGrid) -> Self {
        BinSet { grid, members: (0..grid.bins()).collect() }
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains_bin(&self, k: usize) -> bool {
        self.members.contains(&k)
    }

    pub fn contains_point(&self, t: f64) -> Result<bool> {
        Ok(self.members.contains(&self.grid.bin_of(t)?))
    }

    pub fn measure(&self) -> Rational {
        rational::ratio(self.members.len() as i64, self.grid.bins() as i64)
    }

    pub fn union(&self, other: &BinSet) -> Result<BinSet> {
        self.same_grid(other)?;
        Ok(BinSet { grid: self.grid, members: &self.members | &other.members })
    }

    pub fn intersection(&self, other: &BinSet) -> Result<BinSet> {
        self.same_grid(other)?;
        Ok(BinSet { grid: self.grid, members: &self.members & &other.members })
    }

    pub fn complement(&self) -> BinSet {
        BinSet {
            grid: self.grid,
            members: (0..self.grid.bins()).filter(|k| !self.members.contains(k)).collect(),
        }
    }

    pub fn is_subset(&self, other: &BinSet) -> bool {
        self.grid == other.grid && self.members.is_subset(&other.members)
    }

    /// Image under the grid-aligned shift `s = bins/n`: bin `k` goes to `k + bins mod n`.
    pub fn shift_bins(&self, bins: usize) -> BinSet {
        let n = self.grid.bins();
        BinSet { grid: self.grid, members: self.members.iter().map(|k| (k + bins) % n).collect() }
    }

    fn same_grid(&self, other: &BinSet) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::BadParameter("bin sets live on different grids".into()))
        }
    }

    /// Text form: the bin count on the first line, member indices on the second.
    pub fn to_text(&self) -> String {
        let members: Vec<String> = self.members.iter().map(|k| k.to_string()).collect();
        format!("{}\n{}\n", self.grid.bins(), members.join(" "))
    }

    pub fn from_text(text: &str) -> Result<BinSet> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (first, header) =
            lines.next().ok_or(Error::Parse { line: 1, msg: "missing bin count".into() })?;
        let n: usize = header.trim().parse().map_err(|_| Error::Parse {
            line: first + 1,
            msg: format!("bad bin count {:?}", header.trim()),
        })?;
        let grid = UnitGrid::new(n).map_err(|e| Error::Parse { line: first + 1, msg: e.to_string() })?;
        let mut members = Vec::new();
        for (idx, line) in lines {
            for tok in line.split_whitespace() {
                let k: usize = tok.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("bad bin index {tok:?}"),
                })?;
                if k >= n {
                    return Err(Error::Parse { line: idx + 1, msg: format!("bin {k} out of range") });
                }
                members.push(k);
            }
        }
        BinSet::new(grid, members)
    }
}

/// Lebesgue measure of a bin union.
pub fn mes(set: &BinSet) -> Rational {
    set.measure()
}

/// `t ↦ t + s mod 1` on (0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclicShift {
    s: f64,
}

impl CyclicShift {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(CyclicShift { s })
        } else {
            Err(Error::BadParameter(format!("shift {s} not in (0,1)")))
        }
    }

    pub fn from_rational(s: &Rational) -> Result<Self> {
        Self::new(rational::to_f64(s))
    }

    pub fn amount(&self) -> f64 {
        self.s
    }

    /// The shift by `1 - s`.
    pub fn inverse(&self) -> CyclicShift {
        CyclicShift { s: 1.0 - self.s }
    }

    pub fn apply(&self, t: f64) -> Result<f64> {
        check_open_unit(t)?;
        let pivot = 1.0 - self.s;
        let image = if t < pivot {
            t + self.s
        } else if t > pivot {
            t + self.s - 1.0
        } else {
            return Err(Error::UndefinedPoint { shift: self.s, point: t });
        };
        // Rounding can push an image next to the pivot onto an endpoint.
        if image > 0.0 && image < 1.0 {
            Ok(image)
        } else {
            Err(Error::UndefinedPoint { shift: self.s, point: t })
        }
    }

    /// Image of a point list; the undefined point, if present, is dropped.
    pub fn apply_all(&self, points: &[f64]) -> Vec<f64> {
        points.iter().filter_map(|&t| self.apply(t).ok()).collect()
    }
}

pub fn cyclic_shift_point(shift: &CyclicShift, t: f64) -> Result<f64> {
    shift.apply(t)
}

pub fn cyclic_shift_points(shift: &CyclicShift, points: &[f64]) -> Vec<f64> {
    shift.apply_all(points)
}

/// Largest supported construction depth; stage `j` doubles the interval count.
pub const MAX_FAT_CANTOR_DEPTH: u32 = 20;

/// A fat Cantor set `C = (0,1) \ G`, where `G` is a finite union of disjoint
/// open intervals.
///
/// Stage `j` removes a centred open interval of length `2·gap·4^(-j)` from
/// each of the `2^(j-1)` surviving closed segments, so stage `j` removes
/// `gap·2^(-j)` in total and the removed measure after `depth` stages is
/// `gap·(1 - 2^(-depth))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FatCantor {
    depth: u32,
    removed: Vec<(Rational, Rational)>,
    gap_measure: Rational,
    kept: Vec<(f64, f64)>,
    removed_f64: Vec<(f64, f64)>,
}

impl FatCantor {
    pub fn build(target_gap: &Rational, depth: u32) -> Result<Self> {
        if *target_gap <= Rational::zero() || *target_gap >= Rational::one() {
            return Err(Error::BadParameter(format!(
                "target gap {} not in (0,1)",
                rational::to_pq(target_gap)
            )));
        }
        if depth == 0 || depth > MAX_FAT_CANTOR_DEPTH {
            return Err(Error::BadParameter(format!(
                "depth {depth} not in 1..={MAX_FAT_CANTOR_DEPTH}"
            )));
        }
        let mut segments = vec![(Rational::zero(), Rational::one())];
        let mut removed = Vec::with_capacity((1usize << depth) - 1);
        let two = Rational::from_integer(BigInt::from(2));
        for stage in 1..=depth {
            let length = &two * target_gap / Rational::from_integer(BigInt::from(4).pow(stage));
            let half = &length / &two;
            let mut next = Vec::with_capacity(segments.len() * 2);
            for (lo, hi) in segments {
                let mid = (&lo + &hi) / &two;
                let cut_lo = &mid - &half;
                let cut_hi = &mid + &half;
                removed.push((cut_lo.clone(), cut_hi.clone()));
                next.push((lo, cut_lo));
                next.push((cut_hi, hi));
            }
            segments = next;
        }
        removed.sort();
        Self::from_removed(depth, removed)
    }

    /// Rebuilds the set from its removed intervals, validating disjointness.
    pub fn from_removed(depth: u32, mut removed: Vec<(Rational, Rational)>) -> Result<Self> {
        removed.sort();
        let mut previous_hi = Rational::zero();
        for (lo, hi) in &removed {
            if lo >= hi || *lo < previous_hi || *hi > Rational::one() {
                return Err(Error::BadParameter(format!(
                    "removed interval ({}, {}) is empty, overlapping or outside (0,1)",
                    rational::to_pq(lo),
                    rational::to_pq(hi)
                )));
            }
            previous_hi = hi.clone();
        }
        let gap_measure = removed.iter().fold(Rational::zero(), |acc, (lo, hi)| acc + (hi - lo));
        if gap_measure >= Rational::one() {
            return Err(Error::BadParameter("removed measure must stay below 1".into()));
        }
        let removed_f64: Vec<(f64, f64)> =
            removed.iter().map(|(lo, hi)| (rational::to_f64(lo), rational::to_f64(hi))).collect();
        let mut kept = Vec::with_capacity(removed.len() + 1);
        let mut left = 0.0;
        for &(lo, hi) in &removed_f64 {
            if lo > left {
                kept.push((left, lo));
            }
            left = hi;
        }
        if left < 1.0 {
            kept.push((left, 1.0));
        }
        Ok(FatCantor { depth, removed, gap_measure, kept, removed_f64 })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn removed(&self) -> &[(Rational, Rational)] {
        &self.removed
    }

    /// Total length of the removed open set `G`.
    pub fn gap_measure(&self) -> &Rational {
        &self.gap_measure
    }

    /// `mes C = 1 - mes G`.
    pub fn measure(&self) -> Rational {
        Rational::one() - &self.gap_measure
    }

    /// Closed segments making up `C`, as doubles, in increasing order.
    pub fn kept_segments(&self) -> &[(f64, f64)] {
        &self.kept
    }

    /// True iff `t` lies in no removed interval.
    pub fn contains(&self, t: f64) -> Result<bool> {
        check_open_unit(t)?;
        Ok(!self.in_gap(t))
    }

    /// True iff `t` lies in the open set `G`; `t` must be in (0,1).
    pub fn in_gap(&self, t: f64) -> bool {
        let idx = self.removed_f64.partition_point(|&(lo, _)| lo < t);
        idx > 0 && t < self.removed_f64[idx - 1].1
    }

    /// Every dyadic bin at resolution `2^depth` meets a removed interval.
    pub fn density_witness(&self) -> bool {
        let cells = 1u64 << self.depth;
        let width = rational::ratio(1, cells as i64);
        (0..cells).all(|k| {
            let left = &width * Rational::from_integer(BigInt::from(k));
            let right = &left + &width;
            self.removed.iter().any(|(lo, hi)| *lo < right && *hi > left)
        })
    }

    /// Maps `u ∈ [0, mes C)` to the point of `C` at cumulative length `u`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let mut rest = u;
        for &(lo, hi) in &self.kept {
            let len = hi - lo;
            if rest < len {
                return lo + rest;
            }
            rest -= len;
        }
        let (lo, hi) = *self.kept.last().expect("C is nonempty");
        lo.max(hi - f64::EPSILON)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FatCantorJson::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FatCantorJson = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        let removed = raw
            .removed
            .iter()
            .map(|[lo, hi]| match (rational::parse_pq(lo), rational::parse_pq(hi)) {
                (Some(lo), Some(hi)) => Ok((lo, hi)),
                _ => Err(Error::Parse { line: 0, msg: format!("bad interval [{lo}, {hi}]") }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_removed(raw.depth, removed)
    }

    /// Plain-text listing of removed intervals, one `lo hi` pair per line.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (lo, hi) in &self.removed {
            let _ = writeln!(out, "{} {}", rational::to_pq(lo), rational::to_pq(hi));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct FatCantorJson {
    depth: u32,
    removed: Vec<[String; 2]>,
}

impl From<&FatCantor> for FatCantorJson {
    fn from(c: &FatCantor) -> Self {
        FatCantorJson {
            depth: c.depth,
            removed: c.removed.iter().map(|(lo, hi)| [rational::to_pq(lo), rational::to_pq(hi)]).collect(),
        }
    }
}

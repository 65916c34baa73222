//! Selectors on a finite ensemble of replicas.
//!
//! The probability space is a list of `R` seeded replicas with weight `1/R`
//! each. A selector picks one point out of every replica's enumeration. A
//! coupling on the replica × bin mask turns into a selector by drawing a bin
//! per replica from its row of the coupling (inverse CDF on the replica's own
//! uniform variate) and taking the replica's lowest-index point in that bin.
//! A coupling with uniform column marginal therefore yields a selector that
//! is uniform at bin resolution.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{Enumeration, Generator};
use crate::grid_measure::UnitGrid;
use crate::rational;
use crate::rng::{Component, Seed};
use crate::stats::{self, TestReport};
use crate::strassen::{full_coupling, Coupling, MarginalCaps, SupportMask};

/// Replicas of one generator plus the grid used on the value axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    replicas: Vec<Enumeration>,
    grid: UnitGrid,
    root: u64,
    first_in_bin: Vec<Vec<Option<usize>>>,
}

impl Ensemble {
    /// `root` seeds the selector draws; it is normally the generator's seed.
    pub fn new(replicas: Vec<Enumeration>, grid: UnitGrid, root: u64) -> Result<Self> {
        if replicas.is_empty() {
            return Err(Error::BadParameter("ensemble needs at least one replica".into()));
        }
        let first_in_bin = replicas
            .iter()
            .map(|e| {
                let mut first = vec![None; grid.bins()];
                for (idx, &t) in e.points().iter().enumerate() {
                    first[grid.bin_of_unchecked(t)].get_or_insert(idx);
                }
                first
            })
            .collect();
        Ok(Ensemble { replicas, grid, root, first_in_bin })
    }

    pub fn generate(gen: &Generator, root: u64, replicas: usize, grid: UnitGrid) -> Result<Self> {
        Self::new(gen.ensemble(root, replicas)?, grid, root)
    }

    pub fn replicas(&self) -> &[Enumeration] {
        &self.replicas
    }

    pub fn len(&self) -> usize {
        self.replicas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicas.is_empty()
    }

    pub fn grid(&self) -> UnitGrid {
        self.grid
    }

    /// The replica's own uniform variate for selector number `step`.
    fn draw(&self, replica: usize, step: u32) -> f64 {
        Seed::new(self.root).replica(replica as u64).stream_indexed(Component::SelectorDraw, step).random()
    }
}

/// One chosen point per replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorTable {
    pub values: Vec<f64>,
    pub memberships: Vec<usize>,
}

impl SelectorTable {
    /// Every value is exactly the indexed point of its replica.
    pub fn is_sound(&self, ensemble: &Ensemble) -> bool {
        self.values.len() == ensemble.len()
            && self.memberships.len() == ensemble.len()
            && ensemble.replicas.iter().enumerate().all(|(r, e)| {
                e.points().get(self.memberships[r]).is_some_and(|&t| t.to_bits() == self.values[r].to_bits())
            })
    }

    pub fn bins(&self, grid: UnitGrid) -> Vec<usize> {
        self.values.iter().map(|&t| grid.bin_of_unchecked(t)).collect()
    }

    /// Replicas per bin.
    pub fn bin_counts(&self, grid: UnitGrid) -> Vec<usize> {
        let mut counts = vec![0; grid.bins()];
        for b in self.bins(grid) {
            counts[b] += 1;
        }
        counts
    }

    /// CSV with header `replica,value,index`; enumeration indices start at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replica,value,index\n");
        for (r, (v, m)) in self.values.iter().zip(&self.memberships).enumerate() {
            let _ = writeln!(out, "{r},{v:?},{}", m + 1);
        }
        out
    }
}

/// Replica × bin mask: cell `(r, j)` is set iff replica `r` has a point in bin `j`.
pub fn build_support_mask(ensemble: &Ensemble) -> SupportMask {
    let rows: Vec<Vec<bool>> =
        ensemble.first_in_bin.iter().map(|first| first.iter().map(Option::is_some).collect()).collect();
    SupportMask::from_rows(&rows).expect("ensemble and grid are nonempty")
}

/// Draws a selector from a coupling on the replica × bin mask.
pub fn selector_from_coupling(ensemble: &Ensemble, coupling: &Coupling, step: u32) -> Result<SelectorTable> {
    let rows: Vec<usize> = (0..ensemble.len()).collect();
    select_rows(ensemble, &rows, coupling, step)
}

// `coupling` row `k` belongs to replica `rows[k]`.
fn select_rows(ensemble: &Ensemble, rows: &[usize], coupling: &Coupling, step: u32) -> Result<SelectorTable> {
    if coupling.rows() != rows.len() || coupling.cols() != ensemble.grid.bins() {
        return Err(Error::BadParameter("coupling shape does not match the ensemble".into()));
    }
    let mut values = Vec::with_capacity(rows.len());
    let mut memberships = Vec::with_capacity(rows.len());
    for (k, &r) in rows.iter().enumerate() {
        let first = &ensemble.first_in_bin[r];
        let row = &coupling.mass()[k];
        for (j, m) in row.iter().enumerate() {
            if first[j].is_none() && *m > rational::int(0) {
                return Err(Error::UnsupportedCoupling { row: k, col: j });
            }
        }
        let weights: Vec<f64> = row.iter().map(rational::to_f64).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::BadParameter(format!("coupling row {k} carries no mass")));
        }
        let target = ensemble.draw(r, step) * total;
        let mut acc = 0.0;
        let mut bin = None;
        for (j, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                bin = Some(j);
                acc += w;
                if target < acc {
                    break;
                }
            }
        }
        let idx = first[bin.expect("row has mass")].expect("charged bins are occupied");
        values.push(ensemble.replicas[r].points()[idx]);
        memberships.push(idx);
    }
    Ok(SelectorTable { values, memberships })
}

/// Selector whose bin is uniform over the grid, via a full coupling of the mask.
pub fn uniform_selector(ensemble: &Ensemble, step: u32) -> Result<SelectorTable> {
    conditional_uniform_selector(ensemble, &[], ensemble.grid, step)
}

/// Uniform selector independent of the priors' joint coarse bin: replicas
/// are grouped by `(coarse bin of Y_1, …, coarse bin of Y_k)` and each group
/// gets its own full coupling.
pub fn conditional_uniform_selector(
    ensemble: &Ensemble,
    priors: &[SelectorTable],
    coarse: UnitGrid,
    step: u32,
) -> Result<SelectorTable> {
    if priors.iter().any(|p| !p.is_sound(ensemble)) {
        return Err(Error::BadParameter("prior selector does not belong to this ensemble".into()));
    }
    let mut cells: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for r in 0..ensemble.len() {
        let key = priors.iter().map(|p| coarse.bin_of_unchecked(p.values[r])).collect();
        cells.entry(key).or_default().push(r);
    }
    let mask = build_support_mask(ensemble);
    let n = ensemble.grid.bins();
    let mut values = vec![0.0; ensemble.len()];
    let mut memberships = vec![0; ensemble.len()];
    for (key, rows) in cells {
        let sub = mask.select_rows(&rows)?;
        let coupling = full_coupling(&sub, &MarginalCaps::uniform(rows.len(), n)).map_err(|e| match e {
            Error::DeficientSupport(cover) => Error::InsufficientDensity { cell: key.clone(), cover },
            other => other,
        })?;
        let part = select_rows(ensemble, &rows, &coupling, step)?;
        for (k, &r) in rows.iter().enumerate() {
            values[r] = part.values[k];
            memberships[r] = part.memberships[k];
        }
    }
    Ok(SelectorTable { values, memberships })
}

/// `Y_1, …, Y_{2n+1}`: `Y_1 = Z_1`, even steps are conditional uniform
/// selectors given everything before, odd step `2j+1` is the first `Z_k`
/// not yet used.
pub fn interleaved_enumeration(ensemble: &Ensemble, rounds: usize, coarse: UnitGrid) -> Result<Vec<SelectorTable>> {
    let r_count = ensemble.len();
    if let Some(r) = ensemble.replicas.iter().position(|e| e.is_empty()) {
        return Err(Error::DepthExhausted { replica: r });
    }
    let mut used: Vec<HashSet<usize>> = vec![HashSet::new(); r_count];
    let mut pointer = vec![0usize; r_count];
    let mut tables = Vec::with_capacity(2 * rounds + 1);

    let next_unused = |used: &mut Vec<HashSet<usize>>, pointer: &mut Vec<usize>| -> Result<SelectorTable> {
        let mut values = Vec::with_capacity(r_count);
        let mut memberships = Vec::with_capacity(r_count);
        for r in 0..r_count {
            while used[r].contains(&pointer[r]) {
                pointer[r] += 1;
            }
            let points = ensemble.replicas[r].points();
            let idx = pointer[r];
            if idx >= points.len() {
                return Err(Error::DepthExhausted { replica: r });
            }
            used[r].insert(idx);
            values.push(points[idx]);
            memberships.push(idx);
        }
        Ok(SelectorTable { values, memberships })
    };

    tables.push(next_unused(&mut used, &mut pointer)?);
    for round in 1..=rounds {
        let even = conditional_uniform_selector(ensemble, &tables, coarse, round as u32)?;
        for (r, &idx) in even.memberships.iter().enumerate() {
            used[r].insert(idx);
        }
        tables.push(even);
        tables.push(next_unused(&mut used, &mut pointer)?);
    }
    Ok(tables)
}

/// Per replica: `{Z_1, …, Z_{j+1}} ⊆ {Y_1, …, Y_{2j+1}}` for every `j`.
pub fn containment(ensemble: &Ensemble, tables: &[SelectorTable]) -> Vec<bool> {
    let rounds = tables.len().saturating_sub(1) / 2;
    (0..ensemble.len())
        .map(|r| {
            let mut seen = HashSet::new();
            let mut ok = true;
            for j in 0..=rounds {
                let fresh = if j == 0 { &tables[..1] } else { &tables[2 * j - 1..2 * j + 1] };
                for t in fresh {
                    seen.insert(t.memberships[r]);
                }
                ok &= (0..=j).all(|k| seen.contains(&k));
            }
            ok
        })
        .collect()
}

/// Test results for one even step of an interleaved enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub uniformity: TestReport,
    pub independence: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleaveReport {
    pub rounds: usize,
    pub replicas: usize,
    pub containment: Vec<bool>,
    pub steps: Vec<StepReport>,
}

impl InterleaveReport {
    pub fn containment_failures(&self) -> usize {
        self.containment.iter().filter(|&&ok| !ok).count()
    }

    pub fn all_steps_pass(&self) -> bool {
        self.steps.iter().all(|s| s.uniformity.pass && s.independence.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// KS uniformity of every even-index selector and chi-square independence
/// from the preceding `Y` on `coarse × coarse` bins.
pub fn interleave_report(
    ensemble: &Ensemble,
    tables: &[SelectorTable],
    coarse: UnitGrid,
    level: f64,
) -> Result<InterleaveReport> {
    let mut steps = Vec::new();
    for step in (2..tables.len()).step_by(2) {
        let even = &tables[step - 1];
        let before = &tables[step - 2];
        steps.push(StepReport {
            step,
            uniformity: stats::ks_uniform(&even.values, level)?.with_run(ensemble.len(), Some(ensemble.root)),
            independence: stats::chi_square_independence(
                &before.bins(coarse),
                &even.bins(coarse),
                coarse.bins(),
                coarse.bins(),
                level,
            )?
            .with_run(ensemble.len(), Some(ensemble.root)),
        });
    }
    Ok(InterleaveReport {
        rounds: tables.len().saturating_sub(1) / 2,
        replicas: ensemble.len(),
        containment: containment(ensemble, tables),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::PointTag;
    use crate::rational::{int, ratio};
    use crate::stats::DEFAULT_LEVEL;

    fn ensemble_of(points: Vec<Vec<f64>>, bins: usize) -> Ensemble {
        let replicas = points
            .into_iter()
            .map(|p| {
                let len = p.len();
                Enumeration::tagged(p, PointTag::Sample, len).unwrap()
            })
            .collect();
        Ensemble::new(replicas, UnitGrid::new(bins).unwrap(), 1).unwrap()
    }

    #[test]
    fn mask_examples() {
        let e = ensemble_of(vec![vec![0.1, 0.6], vec![]], 2);
        let mask = build_support_mask(&e);
        assert_eq!(mask.to_text(), "2 2\n11\n00\n");
    }

    #[test]
    fn mask_density_matches_occupancy_law() {
        // P(bin occupied) = 1 - (1 - 1/n)^D.
        let (n, d, r) = (8usize, 10usize, 3000usize);
        let grid = UnitGrid::new(n).unwrap();
        let e = Ensemble::generate(&Generator::Sample { depth: d }, 12, r, grid).unwrap();
        let frac = build_support_mask(&e).count() as f64 / (n * r) as f64;
        let p = 1.0 - (1.0 - 1.0 / n as f64).powi(d as i32);
        // Cells within a row are dependent; use a row-level bound on the variance.
        let se = (p * (1.0 - p) / r as f64).sqrt();
        assert!((frac - p).abs() < 3.0 * se, "{frac} vs {p}");
    }

    #[test]
    fn concentrated_coupling_is_deterministic() {
        let e = ensemble_of(vec![vec![0.1, 0.6, 0.7], vec![0.9, 0.2]], 2);
        let m = Coupling::from_mass(vec![vec![int(0), ratio(1, 2)], vec![ratio(1, 2), int(0)]]).unwrap();
        let s = selector_from_coupling(&e, &m, 0).unwrap();
        assert_eq!(s.values, vec![0.6, 0.2]);
        assert_eq!(s.memberships, vec![1, 1]);
        assert!(s.is_sound(&e));
    }

    #[test]
    fn coupling_outside_mask_is_rejected() {
        let e = ensemble_of(vec![vec![0.1], vec![0.9]], 2);
        let m = Coupling::from_mass(vec![vec![int(0), ratio(1, 2)], vec![ratio(1, 2), int(0)]]).unwrap();
        assert_eq!(selector_from_coupling(&e, &m, 0), Err(Error::UnsupportedCoupling { row: 0, col: 1 }));
    }

    #[test]
    fn selector_follows_coupling_marginal() {
        let grid = UnitGrid::new(4).unwrap();
        let e = Ensemble::generate(&Generator::Sample { depth: 40 }, 77, 4000, grid).unwrap();
        let mask = build_support_mask(&e);
        let caps = MarginalCaps::uniform(e.len(), 4);
        let (_, witness) = crate::strassen::alpha(&mask, &caps);
        let s = selector_from_coupling(&e, &witness, 0).unwrap();
        assert!(s.is_sound(&e));
        let target: Vec<f64> = witness.col_sums().iter().map(rational::to_f64).collect();
        let total: f64 = target.iter().sum();
        let counts = s.bin_counts(grid);
        for (c, t) in counts.iter().zip(&target) {
            let p = t / total;
            let se = (p * (1.0 - p) / e.len() as f64).sqrt();
            assert!((*c as f64 / e.len() as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn product_coupling_on_full_mask_has_uniform_column_marginal() {
        let caps = MarginalCaps::uniform(6, 3);
        let m = Coupling::product(caps.row_caps(), caps.col_caps());
        assert_eq!(m.col_sums(), vec![ratio(1, 3); 3]);
        let e = ensemble_of(vec![vec![0.1, 0.5, 0.9]; 6], 3);
        let s = selector_from_coupling(&e, &m, 0).unwrap();
        assert!(s.is_sound(&e));
    }

    #[test]
    fn uniform_selector_on_sample_ensemble() {
        let grid = UnitGrid::new(8).unwrap();
        let e = Ensemble::generate(&Generator::Sample { depth: 64 }, 5, 2000, grid).unwrap();
        let s = uniform_selector(&e, 0).unwrap();
        assert!(s.is_sound(&e));
        assert!(stats::ks_uniform(&s.values, DEFAULT_LEVEL).unwrap().pass);
        let bound = 4.0 * (1.0 / (8.0 * 2000.0f64)).sqrt();
        for c in s.bin_counts(grid) {
            assert!((c as f64 / 2000.0 - 0.125).abs() <= bound);
        }
    }

    #[test]
    fn missing_bin_is_reported_with_cover() {
        let e = ensemble_of(vec![vec![0.3, 0.6, 0.9], vec![0.4, 0.8]], 4);
        match uniform_selector(&e, 0) {
            Err(Error::InsufficientDensity { cell, cover }) => {
                assert!(cell.is_empty());
                // The cover buys every occupied bin; bin 0 is the one left out.
                assert!(!cover.cols.contains(&0));
                assert!(cover.cost <= ratio(3, 4));
                assert!(cover.covers(&build_support_mask(&e)));
            }
            other => panic!("expected InsufficientDensity, got {other:?}"),
        }
    }

    #[test]
    fn single_bin_selector() {
        let e = ensemble_of(vec![vec![0.3, 0.6], vec![0.4]], 1);
        let s = uniform_selector(&e, 0).unwrap();
        assert_eq!(s.memberships, vec![0, 0]);
    }

    #[test]
    fn conditional_with_no_priors_is_uniform_selector() {
        let grid = UnitGrid::new(4).unwrap();
        let e = Ensemble::generate(&Generator::Sample { depth: 30 }, 8, 300, grid).unwrap();
        assert_eq!(
            conditional_uniform_selector(&e, &[], UnitGrid::new(2).unwrap(), 3).unwrap(),
            uniform_selector(&e, 3).unwrap()
        );
    }

    #[test]
    fn conditional_selector_is_independent_of_prior() {
        let grid = UnitGrid::new(8).unwrap();
        let coarse = UnitGrid::new(2).unwrap();
        let e = Ensemble::generate(&Generator::Sample { depth: 64 }, 40, 3000, grid).unwrap();
        let y1 = SelectorTable {
            values: e.replicas().iter().map(|r| r.points()[0]).collect(),
            memberships: vec![0; e.len()],
        };
        let z = conditional_uniform_selector(&e, std::slice::from_ref(&y1), coarse, 1).unwrap();
        assert!(z.is_sound(&e));
        let report = stats::chi_square_independence(&y1.bins(coarse), &z.bins(coarse), 2, 2, DEFAULT_LEVEL).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn thin_conditioning_cell_is_named() {
        // Replica 1 is alone in its cell and misses bin 1.
        let e = ensemble_of(vec![vec![0.1, 0.7], vec![0.9, 0.2], vec![0.3, 0.8]], 2);
        let prior = SelectorTable { values: vec![0.1, 0.9, 0.3], memberships: vec![0, 0, 0] };
        let e2 = ensemble_of(vec![vec![0.1, 0.7], vec![0.9], vec![0.3, 0.8]], 2);
        assert!(conditional_uniform_selector(&e, std::slice::from_ref(&prior), UnitGrid::new(2).unwrap(), 0).is_ok());
        match conditional_uniform_selector(&e2, &[prior], UnitGrid::new(2).unwrap(), 0) {
            Err(Error::InsufficientDensity { cell, .. }) => assert_eq!(cell, vec![1]),
            other => panic!("expected InsufficientDensity, got {other:?}"),
        }
    }

    #[test]
    fn interleaving_basics() {
        let grid = UnitGrid::new(4).unwrap();
        let e = Ensemble::generate(&Generator::Sample { depth: 60 }, 3, 200, grid).unwrap();
        let zero = interleaved_enumeration(&e, 0, UnitGrid::new(2).unwrap()).unwrap();
        assert_eq!(zero.len(), 1);
        assert!(zero[0].memberships.iter().all(|&m| m == 0));

        let tables = interleaved_enumeration(&e, 8, UnitGrid::new(2).unwrap()).unwrap();
        assert_eq!(tables.len(), 17);
        assert!(containment(&e, &tables).iter().all(|&ok| ok));
        for r in 0..e.len() {
            // Y_3 = Z_2 unless Y_2 = Z_2, in which case Y_3 = Z_3.
            let expected = if tables[1].memberships[r] == 1 { 2 } else { 1 };
            assert_eq!(tables[2].memberships[r], expected);
            // Odd steps never repeat an earlier value.
            for odd in (2..tables.len()).step_by(2) {
                let v = tables[odd].memberships[r];
                assert!(tables[..odd].iter().all(|t| t.memberships[r] != v));
            }
        }
        assert!(tables.iter().all(|t| t.is_sound(&e)));
    }

    #[test]
    fn interleaving_runs_out_of_points() {
        let e = ensemble_of(vec![vec![0.1, 0.6], vec![0.2, 0.7, 0.3]], 1);
        assert_eq!(interleaved_enumeration(&e, 3, UnitGrid::new(1).unwrap()), Err(Error::DepthExhausted { replica: 0 }));
    }

    #[test]
    fn selector_csv() {
        let s = SelectorTable { values: vec![0.5, 0.25], memberships: vec![0, 3] };
        assert_eq!(s.to_csv(), "replica,value,index\n0,0.5,1\n1,0.25,4\n");
    }
}

//! The marginal problem on a finite grid.
//!
//! A [`SupportMask`] `W` is a boolean `n × m` matrix. `α(W)` is the largest
//! mass of a nonnegative matrix supported on `W` whose row sums and column
//! sums stay below given caps; `β(W)` is the cheapest way to cover `W` by
//! whole rows and whole columns, each row or column costing its cap. Both
//! are read off a single exact maximum flow:
//!
//! ```text
//! source ──row_caps[i]──▶ row i ──(cell (i,j) ∈ W, unbounded)──▶ col j ──col_caps[j]──▶ sink
//! ```
//!
//! The flow itself is the `α` witness; the residual-reachable side of the
//! minimum cut gives the `β` witness: rows on the sink side form `U`, columns
//! on the source side form `V`. Caps are rationals and are scaled by the
//! least common multiple of their denominators before solving, so the duality
//! gap is certified exactly.
//!
//! ```
//! use dcs::strassen::{alpha, beta, MarginalCaps, SupportMask};
//! use dcs::rational::ratio;
//!
//! let diagonal = SupportMask::from_text("2 2\n10\n01\n").unwrap();
//! let caps = MarginalCaps::uniform(2, 2);
//! let (a, coupling) = alpha(&diagonal, &caps);
//! let (b, cover) = beta(&diagonal, &caps);
//! assert_eq!(a, ratio(1, 1));
//! assert_eq!(b, a);
//! assert_eq!(coupling.mass()[0][0], ratio(1, 2));
//! assert!(cover.covers(&diagonal));
//! ```

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{ArcId, Capacity, FlowNetwork};
use crate::grid_measure::{BinSet, UnitGrid};
use crate::rational::{self, Rational};

/// The discrete `W ⊂ (0,1) × (0,1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportMask {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl SupportMask {
    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::BadParameter("mask dimensions must be at least 1".into()));
        }
        Ok(SupportMask { rows, cols, cells: vec![false; rows * cols] })
    }

    pub fn full(rows: usize, cols: usize) -> Result<Self> {
        let mut mask = Self::empty(rows, cols)?;
        mask.cells.fill(true);
        Ok(mask)
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut mask = Self::empty(rows.len(), cols)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::BadParameter(format!("row {i} has {} cells, expected {cols}", row.len())));
            }
            mask.cells[i * cols..(i + 1) * cols].copy_from_slice(row);
        }
        Ok(mask)
    }

    /// Mask number `bits` in the enumeration of all `2^(rows·cols)` masks;
    /// cell `(i, j)` is bit `i·cols + j`.
    pub fn from_bits(rows: usize, cols: usize, bits: u64) -> Result<Self> {
        let mut mask = Self::empty(rows, cols)?;
        for (idx, cell) in mask.cells.iter_mut().enumerate() {
            *cell = (bits >> idx) & 1 == 1;
        }
        Ok(mask)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn row_is_empty(&self, row: usize) -> bool {
        !self.cells[row * self.cols..(row + 1) * self.cols].iter().any(|&c| c)
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(idx, _)| (idx / self.cols, idx % self.cols))
    }

    pub fn is_subset(&self, other: &SupportMask) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Sub-mask on the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SupportMask> {
        let mut out = SupportMask::empty(rows.len(), self.cols)?;
        for (new, &old) in rows.iter().enumerate() {
            out.cells[new * self.cols..(new + 1) * self.cols]
                .copy_from_slice(&self.cells[old * self.cols..(old + 1) * self.cols]);
        }
        Ok(out)
    }

    /// Text form: `"n m"` then `n` lines of `m` characters `0`/`1`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            out.extend((0..self.cols).map(|j| if self.get(i, j) { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SupportMask> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (idx, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty mask file".into() })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line: idx + 1, msg: format!("bad header {header:?}") })?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse { line: idx + 1, msg: "header must be \"n m\"".into() });
        };
        let mut mask = SupportMask::empty(rows, cols)
            .map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        let mut seen = 0;
        for (idx, line) in lines {
            let line = line.trim();
            if seen == rows {
                return Err(Error::Parse { line: idx + 1, msg: "more rows than declared".into() });
            }
            if line.chars().count() != cols {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {cols} cells, found {}", line.chars().count()),
                });
            }
            for (j, ch) in line.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => mask.set(seen, j, true),
                    other => {
                        return Err(Error::Parse { line: idx + 1, msg: format!("unexpected character {other:?}") })
                    }
                }
            }
            seen += 1;
        }
        if seen != rows {
            return Err(Error::Parse { line: text.lines().count() + 1, msg: format!("expected {rows} rows, found {seen}") });
        }
        Ok(mask)
    }
}

impl fmt::Display for SupportMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Upper bounds on the row and column marginals; each side sums to 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalCaps {
    #[serde(with = "rational::serde_pq_vec")]
    row_caps: Vec<Rational>,
    #[serde(with = "rational::serde_pq_vec")]
    col_caps: Vec<Rational>,
}

impl MarginalCaps {
    pub fn new(row_caps: Vec<Rational>, col_caps: Vec<Rational>) -> Result<Self> {
        for (side, caps) in [("row", &row_caps), ("column", &col_caps)] {
            if caps.is_empty() {
                return Err(Error::BadParameter(format!("no {side} caps")));
            }
            if caps.iter().any(Signed::is_negative) {
                return Err(Error::BadParameter(format!("negative {side} cap")));
            }
            let total = rational::sum(caps.iter());
            if !total.is_one() {
                return Err(Error::BadParameter(format!(
                    "{side} caps sum to {}, expected 1",
                    rational::to_pq(&total)
                )));
            }
        }
        Ok(MarginalCaps { row_caps, col_caps })
    }

    /// Caps `1/n` per row and `1/m` per column (Lebesgue measure on the grid).
    pub fn uniform(rows: usize, cols: usize) -> Self {
        MarginalCaps {
            row_caps: vec![rational::ratio(1, rows as i64); rows],
            col_caps: vec![rational::ratio(1, cols as i64); cols],
        }
    }

    pub fn row_caps(&self) -> &[Rational] {
        &self.row_caps
    }

    pub fn col_caps(&self) -> &[Rational] {
        &self.col_caps
    }

    fn check_shape(&self, mask: &SupportMask) {
        assert_eq!(self.row_caps.len(), mask.rows(), "row caps do not match mask rows");
        assert_eq!(self.col_caps.len(), mask.cols(), "column caps do not match mask columns");
    }
}

/// Parses a caps file: one `index,p/q` line per entry, indices `0..len`.
pub fn parse_caps_csv(text: &str) -> Result<Vec<Rational>> {
    let mut entries: Vec<(usize, Rational)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        let (index, value) = line.split_once(',').ok_or_else(|| err("expected \"index,p/q\"".into()))?;
        let index: usize = match index.trim().parse() {
            Ok(i) => i,
            // A header row such as "index,cap" is allowed on the first line.
            Err(_) if entries.is_empty() && idx == 0 => continue,
            Err(_) => return Err(err(format!("bad index {:?}", index.trim()))),
        };
        let value = rational::parse_pq(value).ok_or_else(|| err(format!("bad rational {:?}", value.trim())))?;
        entries.push((index, value));
    }
    entries.sort_by_key(|(i, _)| *i);
    for (expected, (index, _)) in entries.iter().enumerate() {
        if *index != expected {
            return Err(Error::Parse { line: 0, msg: format!("cap indices must be 0..{}; missing {expected}", entries.len()) });
        }
    }
    Ok(entries.into_iter().map(|(_, v)| v).collect())
}

pub fn caps_to_csv(caps: &[Rational]) -> String {
    caps.iter().enumerate().map(|(i, c)| format!("{i},{}\n", rational::to_pq(c))).collect()
}

/// A nonnegative rational `n × m` matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    #[serde(with = "rational::serde_pq_matrix")]
    mass: Vec<Vec<Rational>>,
}

impl Coupling {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Coupling { mass: vec![vec![Rational::zero(); cols]; rows] }
    }

    pub fn from_mass(mass: Vec<Vec<Rational>>) -> Result<Self> {
        let cols = mass.first().map_or(0, Vec::len);
        if mass.iter().any(|r| r.len() != cols) {
            return Err(Error::BadParameter("ragged coupling matrix".into()));
        }
        if mass.iter().flatten().any(Signed::is_negative) {
            return Err(Error::BadParameter("negative mass in coupling".into()));
        }
        Ok(Coupling { mass })
    }

    /// The product of two marginals.
    pub fn product(rows: &[Rational], cols: &[Rational]) -> Self {
        Coupling { mass: rows.iter().map(|r| cols.iter().map(|c| r * c).collect()).collect() }
    }

    pub fn mass(&self) -> &[Vec<Rational>] {
        &self.mass
    }

    pub fn rows(&self) -> usize {
        self.mass.len()
    }

    pub fn cols(&self) -> usize {
        self.mass.first().map_or(0, Vec::len)
    }

    pub fn total(&self) -> Rational {
        rational::sum(self.mass.iter().flatten())
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        self.mass.iter().map(|r| rational::sum(r.iter())).collect()
    }

    pub fn col_sums(&self) -> Vec<Rational> {
        (0..self.cols()).map(|j| rational::sum(self.mass.iter().map(|r| &r[j]))).collect()
    }

    /// First charged cell outside `mask`, if any.
    pub fn cell_outside(&self, mask: &SupportMask) -> Option<(usize, usize)> {
        for (i, row) in self.mass.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                if !m.is_zero() && !mask.get(i, j) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Nonnegative, supported on `mask`, marginals below `caps`.
    pub fn is_feasible(&self, mask: &SupportMask, caps: &MarginalCaps) -> bool {
        self.rows() == mask.rows()
            && self.cols() == mask.cols()
            && self.mass.iter().flatten().all(|m| !m.is_negative())
            && self.cell_outside(mask).is_none()
            && self.row_sums().iter().zip(caps.row_caps()).all(|(s, c)| s <= c)
            && self.col_sums().iter().zip(caps.col_caps()).all(|(s, c)| s <= c)
    }
}

/// `(U × (0,1)) ∪ ((0,1) × V)` on the grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    #[serde(with = "rational::serde_pq")]
    pub cost: Rational,
}

impl Cover {
    pub fn new(rows: BTreeSet<usize>, cols: BTreeSet<usize>, caps: &MarginalCaps) -> Self {
        let cost = rational::sum(rows.iter().map(|&i| &caps.row_caps()[i]))
            + rational::sum(cols.iter().map(|&j| &caps.col_caps()[j]));
        Cover { rows: rows.into_iter().collect(), cols: cols.into_iter().collect(), cost }
    }

    pub fn covers(&self, mask: &SupportMask) -> bool {
        let rows: BTreeSet<_> = self.rows.iter().collect();
        let cols: BTreeSet<_> = self.cols.iter().collect();
        mask.cells().all(|(i, j)| rows.contains(&i) || cols.contains(&j))
    }

    pub fn cost_under(&self, caps: &MarginalCaps) -> Rational {
        rational::sum(self.rows.iter().map(|&i| &caps.row_caps()[i]))
            + rational::sum(self.cols.iter().map(|&j| &caps.col_caps()[j]))
    }
}

/// Both sides of the duality for one mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrassenSolution {
    #[serde(with = "rational::serde_pq")]
    pub alpha: Rational,
    #[serde(with = "rational::serde_pq")]
    pub beta: Rational,
    pub coupling: Coupling,
    pub cover: Cover,
}

impl StrassenSolution {
    pub fn gap(&self) -> Rational {
        &self.beta - &self.alpha
    }
}

/// Solves the flow network once and extracts both witnesses.
pub fn solve(mask: &SupportMask, caps: &MarginalCaps) -> StrassenSolution {
    caps.check_shape(mask);
    let scale = caps
        .row_caps()
        .iter()
        .chain(caps.col_caps())
        .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let scaled = |c: &Rational| (c * Rational::from_integer(scale.clone())).to_integer();
    let rows: Vec<BigInt> = caps.row_caps().iter().map(scaled).collect();
    let cols: Vec<BigInt> = caps.col_caps().iter().map(scaled).collect();
    // Each side sums to `scale`; a cell arc of `scale + 1` can never be cut.
    let unbounded = &scale + BigInt::one();

    let fits = unbounded.to_i64().is_some_and(|u| u < i64::MAX / 4);
    let (flows, source_side) = if fits {
        let to_i64 = |v: &BigInt| v.to_i64().expect("checked above");
        let (flows, side) = run_network(
            mask,
            &rows.iter().map(to_i64).collect::<Vec<_>>(),
            &cols.iter().map(to_i64).collect::<Vec<_>>(),
            to_i64(&unbounded),
        );
        (flows.into_iter().map(|f| ((f.0, f.1), BigInt::from(f.2))).collect::<Vec<_>>(), side)
    } else {
        let (flows, side) = run_network(mask, &rows, &cols, unbounded);
        (flows.into_iter().map(|f| ((f.0, f.1), f.2)).collect(), side)
    };

    let denominator = Rational::from_integer(scale);
    let mut coupling = Coupling::zero(mask.rows(), mask.cols());
    for ((i, j), f) in flows {
        coupling.mass[i][j] = Rational::from_integer(f) / &denominator;
    }
    let alpha = coupling.total();

    let n = mask.rows();
    let u: BTreeSet<usize> = (0..n).filter(|&i| !source_side[1 + i]).collect();
    let v: BTreeSet<usize> = (0..mask.cols()).filter(|&j| source_side[1 + n + j]).collect();
    let cover = Cover::new(u, v, caps);
    let beta = cover.cost.clone();
    StrassenSolution { alpha, beta, coupling, cover }
}

type CellFlows<C> = Vec<(usize, usize, C)>;

fn run_network<C: Capacity>(
    mask: &SupportMask,
    rows: &[C],
    cols: &[C],
    unbounded: C,
) -> (CellFlows<C>, Vec<bool>) {
    let n = mask.rows();
    let m = mask.cols();
    let source = 0;
    let sink = n + m + 1;
    let mut net = FlowNetwork::new(n + m + 2);
    for (i, cap) in rows.iter().enumerate() {
        net.add_arc(source, 1 + i, cap.clone());
    }
    let cell_arcs: Vec<(usize, usize, ArcId)> = mask
        .cells()
        .map(|(i, j)| (i, j, net.add_arc(1 + i, 1 + n + j, unbounded.clone())))
        .collect();
    for (j, cap) in cols.iter().enumerate() {
        net.add_arc(1 + n + j, sink, cap.clone());
    }
    net.max_flow(source, sink);
    let flows = cell_arcs.into_iter().map(|(i, j, arc)| (i, j, net.flow_on(arc))).collect();
    (flows, net.residual_reachable(source))
}

/// `α(W)` with a coupling attaining it.
pub fn alpha(mask: &SupportMask, caps: &MarginalCaps) -> (Rational, Coupling) {
    let s = solve(mask, caps);
    (s.alpha, s.coupling)
}

/// `β(W)` with a cover attaining it.
pub fn beta(mask: &SupportMask, caps: &MarginalCaps) -> (Rational, Cover) {
    let s = solve(mask, caps);
    (s.beta, s.cover)
}

/// `β(W) − α(W)`, exactly.
pub fn duality_check(mask: &SupportMask, caps: &MarginalCaps) -> Rational {
    solve(mask, caps).gap()
}

/// `α` and `β` along a nested chain of masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    #[serde(with = "rational::serde_pq_vec")]
    pub alpha: Vec<Rational>,
    #[serde(with = "rational::serde_pq_vec")]
    pub beta: Vec<Rational>,
}

impl ChainReport {
    pub fn is_monotone(&self) -> bool {
        self.alpha.windows(2).all(|w| w[0] <= w[1]) && self.beta.windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn monotone_chain_check(chain: &[SupportMask], caps: &MarginalCaps) -> Result<ChainReport> {
    if let Some(pos) = chain.windows(2).position(|w| !w[0].is_subset(&w[1])) {
        return Err(Error::NotNested(pos + 1));
    }
    let (alpha, beta) = chain
        .iter()
        .map(|mask| {
            let s = solve(mask, caps);
            (s.alpha, s.beta)
        })
        .unzip();
    Ok(ChainReport { alpha, beta })
}

/// A coupling supported on `W` whose marginals equal the caps exactly.
///
/// Exists iff `β(W) = 1`; otherwise the minimum cover is returned as the
/// obstruction.
pub fn full_coupling(mask: &SupportMask, caps: &MarginalCaps) -> Result<Coupling> {
    let s = solve(mask, caps);
    if s.beta.is_one() {
        Ok(s.coupling)
    } else {
        Err(Error::DeficientSupport(s.cover))
    }
}

/// Horizon-averaged indicator frequencies of a sequence of rectangles
/// `A_k × B_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyProfile {
    row_grid: UnitGrid,
    col_grid: UnitGrid,
    pub f: Vec<Rational>,
    pub g: Vec<Rational>,
    pub h: Vec<Vec<Rational>>,
}

impl FrequencyProfile {
    pub fn row_grid(&self) -> UnitGrid {
        self.row_grid
    }

    pub fn col_grid(&self) -> UnitGrid {
        self.col_grid
    }

    /// `max |h(i,j) − f(i)·g(j)|`.
    pub fn factorization_residual(&self) -> Rational {
        let mut worst = Rational::zero();
        for (i, row) in self.h.iter().enumerate() {
            for (j, h) in row.iter().enumerate() {
                let diff = (h - &self.f[i] * &self.g[j]).abs();
                if diff > worst {
                    worst = diff;
                }
            }
        }
        worst
    }
}

fn common_grid(seq: &[BinSet], what: &str) -> Result<UnitGrid> {
    let first = seq.first().ok_or_else(|| Error::BadParameter(format!("empty {what} sequence")))?;
    if seq.iter().any(|s| s.grid() != first.grid()) {
        return Err(Error::BadParameter(format!("{what} sets use different grids")));
    }
    Ok(first.grid())
}

/// Frequencies over `k = 0..horizon` with `A_k = a_seq[k mod len]` (same for `B`).
///
/// When `horizon` is a multiple of both sequence lengths these are the exact
/// limits of the periodic sequence; passing `horizon = len` with an explicit
/// prefix gives the empirical frequencies of that prefix.
pub fn frequency_profile(a_seq: &[BinSet], b_seq: &[BinSet], horizon: usize) -> Result<FrequencyProfile> {
    let row_grid = common_grid(a_seq, "row")?;
    let col_grid = common_grid(b_seq, "column")?;
    if horizon == 0 {
        return Err(Error::BadParameter("horizon must be at least 1".into()));
    }
    let (n, m) = (row_grid.bins(), col_grid.bins());
    let mut f = vec![0u64; n];
    let mut g = vec![0u64; m];
    let mut h = vec![vec![0u64; m]; n];
    for k in 0..horizon {
        let a = &a_seq[k % a_seq.len()];
        let b = &b_seq[k % b_seq.len()];
        for i in a.members() {
            f[i] += 1;
            for j in b.members() {
                h[i][j] += 1;
            }
        }
        for j in b.members() {
            g[j] += 1;
        }
    }
    let freq = |c: u64| rational::ratio(c as i64, horizon as i64);
    Ok(FrequencyProfile {
        row_grid,
        col_grid,
        f: f.into_iter().map(freq).collect(),
        g: g.into_iter().map(freq).collect(),
        h: h.into_iter().map(|r| r.into_iter().map(freq).collect()).collect(),
    })
}

/// Cells `(i, j)` lying in `A_k × B_k` for infinitely many `k`, for the
/// periodic sequences `a_seq`, `b_seq`: those hit within one joint period.
pub fn periodic_limsup(a_seq: &[BinSet], b_seq: &[BinSet]) -> Result<SupportMask> {
    let row_grid = common_grid(a_seq, "row")?;
    let col_grid = common_grid(b_seq, "column")?;
    let period = a_seq.len().lcm(&b_seq.len());
    let mut mask = SupportMask::empty(row_grid.bins(), col_grid.bins())?;
    for k in 0..period {
        for i in a_seq[k % a_seq.len()].members() {
            for j in b_seq[k % b_seq.len()].members() {
                mask.set(i, j, true);
            }
        }
    }
    Ok(mask)
}

/// Rectangle `A × B` inside the limsup of `A_k × B_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductWitness {
    pub a: BinSet,
    pub b: BinSet,
    /// `Σ f(i) / n`, a lower bound for `mes A`.
    pub a_target: Rational,
    /// `Σ g(j) / m`, a lower bound for `mes B`.
    pub b_target: Rational,
}

/// `A = {f > 0}`, `B = {g > 0}`, valid when `h = f·g` exactly.
pub fn product_limsup_witness(profile: &FrequencyProfile, limsup: &SupportMask) -> Result<ProductWitness> {
    let residual = profile.factorization_residual();
    if !residual.is_zero() {
        return Err(Error::FactorizationFailure(residual));
    }
    let (n, m) = (profile.row_grid.bins(), profile.col_grid.bins());
    if limsup.rows() != n || limsup.cols() != m {
        return Err(Error::BadParameter("limsup mask does not match the profile grids".into()));
    }
    let a = BinSet::new(profile.row_grid, (0..n).filter(|&i| !profile.f[i].is_zero()))?;
    let b = BinSet::new(profile.col_grid, (0..m).filter(|&j| !profile.g[j].is_zero()))?;
    if let Some((i, j)) = a.members().flat_map(|i| b.members().map(move |j| (i, j))).find(|&(i, j)| !limsup.get(i, j)) {
        return Err(Error::BadParameter(format!(
            "cell ({i}, {j}) of A × B is not in the limsup mask; horizon is not a multiple of the period"
        )));
    }
    let a_target = rational::sum(profile.f.iter()) / rational::int(n as i64);
    let b_target = rational::sum(profile.g.iter()) / rational::int(m as i64);
    Ok(ProductWitness { a, b, a_target, b_target })
}

//! Exhaustive grid search over products of probability simplices.
//!
//! Grid points are integer compositions of `N = 1/step` scaled by `step`, so
//! every candidate sums to one exactly in integer arithmetic. Points of a
//! product space are numbered in mixed radix with the first block most
//! significant; ties are always broken toward the smaller index, which keeps
//! results independent of thread count and chunking.

use std::fmt;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default fine grid step.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default coarse step of a two-stage search.
pub const DEFAULT_COARSE_STEP: f64 = 0.05;
/// Window for counting ties at the final best value.
pub const TIE_WINDOW: f64 = 1e-9;
/// Window below the coarse best for choosing refinement centers. Wide enough
/// to catch basins that a coarse grid misjudges along flat directions.
pub const COARSE_WINDOW: f64 = 5e-3;

const CHUNK: u64 = 1 << 16;
const NEAR_CAP: usize = 4096;

/// Number of grid divisions `N` with `N * step = 1`.
pub fn grid_divisions(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidStep(step));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidStep(step));
    }
    Ok(n as usize)
}

/// All compositions of `n` into `dim` nonnegative parts, in lexicographic order.
pub fn compositions(dim: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if dim == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(dim - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    assert!(dim >= 1, "simplex dimension must be positive");
    let mut out = Vec::new();
    rec(dim, n, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Grid points of the `dim`-cell probability simplex at resolution `step`.
pub fn enumerate_simplex(dim: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::Invalid("simplex dimension must be positive".into()));
    }
    let n = grid_divisions(step)?;
    Ok(compositions(dim, n)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / n as f64).collect())
        .collect())
}

/// One simplex factor of a search space with labels for its cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexBlock {
    pub label: String,
    pub cells: Vec<String>,
}

impl SimplexBlock {
    pub fn new(label: impl Into<String>, cells: Vec<String>) -> Self {
        assert!(!cells.is_empty(), "simplex block needs a cell");
        SimplexBlock {
            label: label.into(),
            cells,
        }
    }

    /// Block with cells labelled `0..dim`.
    pub fn plain(label: impl Into<String>, dim: usize) -> Self {
        SimplexBlock::new(label, (0..dim).map(|i| i.to_string()).collect())
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }
}

/// Product of simplices; a candidate is the concatenation of one point per block.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub blocks: Vec<SimplexBlock>,
}

impl SearchSpace {
    pub fn new(blocks: Vec<SimplexBlock>) -> Self {
        SearchSpace { blocks }
    }

    pub fn free_params(&self) -> usize {
        self.blocks.iter().map(|b| b.dim() - 1).sum()
    }

    pub fn point_len(&self) -> usize {
        self.blocks.iter().map(SimplexBlock::dim).sum()
    }

    /// Splits a concatenated point into its blocks.
    pub fn split<'a>(&self, point: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut at = 0;
        for b in &self.blocks {
            out.push(&point[at..at + b.dim()]);
            at += b.dim();
        }
        out
    }

    /// Grid point with mixed-radix index `idx` at resolution `step`.
    pub fn point_at(&self, step: f64, idx: u64) -> Result<Vec<Vec<f64>>> {
        let grid = Grid::new(self, grid_divisions(step)?)?;
        if idx >= grid.total {
            return Err(Error::Invalid(format!("grid index {idx} out of range")));
        }
        Ok(grid.point(idx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stages {
    Single,
    CoarseThenRefine,
}

impl fmt::Display for Stages {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stages::Single => "single",
            Stages::CoarseThenRefine => "coarse_then_refine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub step: f64,
    pub stages: Stages,
    pub coarse_step: f64,
    pub refine_radius: f64,
    /// Coarse points within this distance of the coarse best seed refinement boxes.
    pub coarse_window: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            step: DEFAULT_STEP,
            stages: Stages::Single,
            coarse_step: DEFAULT_COARSE_STEP,
            refine_radius: DEFAULT_COARSE_STEP,
            coarse_window: COARSE_WINDOW,
        }
    }
}

impl SearchSpec {
    pub fn single(step: f64) -> Self {
        SearchSpec {
            step,
            ..Default::default()
        }
    }

    pub fn two_stage(step: f64, coarse_step: f64) -> Self {
        SearchSpec {
            step,
            stages: Stages::CoarseThenRefine,
            coarse_step,
            refine_radius: coarse_step,
            coarse_window: COARSE_WINDOW,
        }
    }

    /// Single stage up to three free parameters, two-stage beyond.
    pub fn default_for(free_params: usize) -> Self {
        if free_params >= 4 {
            SearchSpec::two_stage(DEFAULT_STEP, DEFAULT_COARSE_STEP)
        } else {
            SearchSpec::single(DEFAULT_STEP)
        }
    }

    fn validate(&self) -> Result<(usize, usize, usize)> {
        let n = grid_divisions(self.step)?;
        if self.stages == Stages::Single {
            return Ok((n, n, 0));
        }
        let nc = grid_divisions(self.coarse_step)?;
        if nc > n || n % nc != 0 {
            return Err(Error::Invalid(format!(
                "coarse step {} must be a multiple of step {}",
                self.coarse_step, self.step
            )));
        }
        if !(self.refine_radius >= 0.0) {
            return Err(Error::Invalid("refine radius must be nonnegative".into()));
        }
        let radius = (self.refine_radius * n as f64 + 1e-9).floor() as usize;
        Ok((n, nc, radius))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_value: f64,
    /// Optimizing point, one vector per block.
    pub argmax: Vec<Vec<f64>>,
    /// Mixed-radix index of the argmax on the fine grid.
    pub argmax_index: u64,
    pub evaluated: u64,
    pub feasible: u64,
    /// Fine-grid points within 1e-9 of the best value among those evaluated.
    pub ties: u64,
    /// Indices of the tied points, ascending (truncated on huge plateaus).
    pub tie_points: Vec<u64>,
    pub step: f64,
    pub stages: Stages,
    pub block_labels: Vec<SimplexBlock>,
}

impl SearchResult {
    pub fn argmax_flat(&self) -> Vec<f64> {
        self.argmax.iter().flatten().copied().collect()
    }
}

impl fmt::Display for SearchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "best={:.6}", self.best_value)?;
        writeln!(f, "step={}", self.step)?;
        writeln!(f, "stages={}", self.stages)?;
        writeln!(f, "evaluated={}", self.evaluated)?;
        writeln!(f, "feasible={}", self.feasible)?;
        writeln!(f, "ties={}", self.ties)?;
        writeln!(f, "argmax_index={}", self.argmax_index)?;
        for (block, point) in self.block_labels.iter().zip(&self.argmax) {
            for (cell, p) in block.cells.iter().zip(point) {
                writeln!(f, "argmax={}[{}] {:.6}", block.label, cell, p)?;
            }
        }
        Ok(())
    }
}

/// How the grid is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Running maximum with a deterministic tie-break and a list of near-best points.
#[derive(Debug, Clone)]
struct Acc {
    best: f64,
    best_idx: u64,
    evaluated: u64,
    feasible: u64,
    window: f64,
    near: Vec<(u64, f64)>,
    overflow: bool,
}

impl Acc {
    fn new(window: f64) -> Self {
        Acc {
            best: f64::NEG_INFINITY,
            best_idx: u64::MAX,
            evaluated: 0,
            feasible: 0,
            window,
            near: Vec::new(),
            overflow: false,
        }
    }

    fn push(&mut self, idx: u64, value: Option<f64>) {
        self.evaluated += 1;
        let Some(v) = value.filter(|v| v.is_finite()) else {
            return;
        };
        self.feasible += 1;
        if v > self.best || (v == self.best && idx < self.best_idx) {
            if v > self.best {
                let floor = v - self.window;
                self.near.retain(|&(_, x)| x >= floor);
            }
            self.best = v;
            self.best_idx = idx;
        }
        if v >= self.best - self.window {
            if self.near.len() < NEAR_CAP {
                self.near.push((idx, v));
            } else {
                self.overflow = true;
            }
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.evaluated += other.evaluated;
        self.feasible += other.feasible;
        self.overflow |= other.overflow;
        if other.best > self.best || (other.best == self.best && other.best_idx < self.best_idx) {
            self.best = other.best;
            self.best_idx = other.best_idx;
        }
        let floor = self.best - self.window;
        self.near.extend(other.near);
        self.near.retain(|&(_, x)| x >= floor);
        if self.near.len() > NEAR_CAP {
            self.overflow = true;
            self.near.sort_unstable_by_key(|&(i, _)| i);
            self.near.truncate(NEAR_CAP);
        }
        self
    }
}

/// Mixed-radix decoder over per-block grid point lists.
struct Grid {
    /// Per block: flattened point coordinates (`count * dim`).
    points: Vec<Vec<f64>>,
    dims: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl Grid {
    fn new(space: &SearchSpace, n: usize) -> Result<Self> {
        if space.blocks.is_empty() {
            return Err(Error::Invalid("search space has no blocks".into()));
        }
        let mut points = Vec::new();
        let mut counts = Vec::new();
        let mut total: u64 = 1;
        for b in &space.blocks {
            let comps = compositions(b.dim(), n);
            counts.push(comps.len() as u64);
            total = total
                .checked_mul(comps.len() as u64)
                .ok_or_else(|| Error::Invalid("search grid too large".into()))?;
            points.push(
                comps
                    .iter()
                    .flat_map(|c| c.iter().map(|&k| k as f64 / n as f64))
                    .collect(),
            );
        }
        Ok(Grid {
            points,
            dims: space.blocks.iter().map(SimplexBlock::dim).collect(),
            counts,
            total,
        })
    }

    fn decode(&self, mut idx: u64) -> Vec<usize> {
        let mut digits = vec![0; self.counts.len()];
        for k in (0..self.counts.len()).rev() {
            digits[k] = (idx % self.counts[k]) as usize;
            idx /= self.counts[k];
        }
        digits
    }

    fn encode(&self, digits: &[usize]) -> u64 {
        digits
            .iter()
            .zip(&self.counts)
            .fold(0u64, |acc, (&d, &c)| acc * c + d as u64)
    }

    fn write_block(&self, buf: &mut [f64], offsets: &[usize], block: usize, digit: usize) {
        let d = self.dims[block];
        buf[offsets[block]..offsets[block] + d]
            .copy_from_slice(&self.points[block][digit * d..(digit + 1) * d]);
    }

    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.dims
            .iter()
            .map(|d| {
                let o = at;
                at += d;
                o
            })
            .collect()
    }

    fn point(&self, idx: u64) -> Vec<Vec<f64>> {
        self.decode(idx)
            .iter()
            .enumerate()
            .map(|(b, &d)| self.points[b][d * self.dims[b]..(d + 1) * self.dims[b]].to_vec())
            .collect()
    }

    /// Evaluates the index range `[start, end)` in order.
    fn scan<F>(&self, start: u64, end: u64, window: f64, f: &F) -> Acc
    where
        F: Fn(&[f64]) -> Option<f64>,
    {
        let mut acc = Acc::new(window);
        if start >= end {
            return acc;
        }
        let offsets = self.offsets();
        let mut buf = vec![0.0; self.dims.iter().sum()];
        let mut digits = self.decode(start);
        for (b, &d) in digits.iter().enumerate() {
            self.write_block(&mut buf, &offsets, b, d);
        }
        let last = self.counts.len() - 1;
        for idx in start..end {
            acc.push(idx, f(&buf));
            // advance the odometer, rewriting only the blocks that changed
            let mut k = last;
            loop {
                digits[k] += 1;
                if (digits[k] as u64) < self.counts[k] {
                    self.write_block(&mut buf, &offsets, k, digits[k]);
                    break;
                }
                digits[k] = 0;
                self.write_block(&mut buf, &offsets, k, 0);
                if k == 0 {
                    break;
                }
                k -= 1;
            }
        }
        acc
    }

    fn scan_all<F>(&self, window: f64, f: &F, exec: Exec) -> Acc
    where
        F: Fn(&[f64]) -> Option<f64> + Sync,
    {
        let chunks = self.total.div_ceil(CHUNK);
        let run = |c: u64| self.scan(c * CHUNK, ((c + 1) * CHUNK).min(self.total), window, f);
        match exec {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..chunks)
                .into_par_iter()
                .map(run)
                .reduce(|| Acc::new(window), Acc::merge),
            _ => (0..chunks).map(run).fold(Acc::new(window), Acc::merge),
        }
    }

    /// Evaluates an explicit ascending list of indices.
    fn scan_list<F>(&self, list: &[u64], window: f64, f: &F, exec: Exec) -> Acc
    where
        F: Fn(&[f64]) -> Option<f64> + Sync,
    {
        let run = |chunk: &[u64]| {
            let mut acc = Acc::new(window);
            for &idx in chunk {
                let p: Vec<f64> = self.point(idx).concat();
                acc.push(idx, f(&p));
            }
            acc
        };
        match exec {
            #[cfg(feature = "parallel")]
            Exec::Parallel => list
                .par_chunks(CHUNK as usize)
                .map(run)
                .reduce(|| Acc::new(window), Acc::merge),
            _ => list
                .chunks(CHUNK as usize)
                .map(run)
                .fold(Acc::new(window), Acc::merge),
        }
    }

    /// Counts and lists (up to the cap) points within `window` of `best`.
    fn recount<F>(&self, list: Option<&[u64]>, best: f64, window: f64, f: &F) -> (u64, Vec<u64>)
    where
        F: Fn(&[f64]) -> Option<f64> + Sync,
    {
        let mut count = 0;
        let mut pts = Vec::new();
        let mut visit = |idx: u64| {
            let p: Vec<f64> = self.point(idx).concat();
            if let Some(v) = f(&p).filter(|v| v.is_finite()) {
                if v >= best - window {
                    count += 1;
                    if pts.len() < NEAR_CAP {
                        pts.push(idx);
                    }
                }
            }
        };
        match list {
            Some(l) => l.iter().copied().for_each(&mut visit),
            None => (0..self.total).for_each(&mut visit),
        }
        (count, pts)
    }
}

/// Maximizes `objective` over the grid of `space`.
pub fn maximize<F>(space: &SearchSpace, spec: &SearchSpec, objective: F) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    maximize_with(space, spec, |p: &[f64]| Some(objective(p)), Exec::default())
}

/// Maximizes `objective` over grid points satisfying `constraint`.
pub fn maximize_constrained<F, C>(
    space: &SearchSpace,
    spec: &SearchSpec,
    objective: F,
    constraint: C,
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
    C: Fn(&[f64]) -> bool + Sync,
{
    maximize_with(
        space,
        spec,
        |p: &[f64]| constraint(p).then(|| objective(p)),
        Exec::default(),
    )
}

/// Core search. `objective` returns `None` for infeasible points.
pub fn maximize_with<F>(
    space: &SearchSpace,
    spec: &SearchSpec,
    objective: F,
    exec: Exec,
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let (n, nc, radius) = spec.validate()?;
    let fine = Grid::new(space, n)?;

    let finish = |acc: Acc, list: Option<&[u64]>, stages: Stages, extra: (u64, u64)| {
        if acc.feasible == 0 {
            return Err(Error::EmptyFeasibleSet);
        }
        let (ties, tie_points) = if acc.overflow {
            fine.recount(list, acc.best, TIE_WINDOW, &objective)
        } else {
            let mut pts: Vec<u64> = acc.near.iter().map(|&(i, _)| i).collect();
            pts.sort_unstable();
            (pts.len() as u64, pts)
        };
        Ok(SearchResult {
            best_value: acc.best,
            argmax: fine.point(acc.best_idx),
            argmax_index: acc.best_idx,
            evaluated: acc.evaluated + extra.0,
            feasible: acc.feasible + extra.1,
            ties,
            tie_points,
            step: spec.step,
            stages,
            block_labels: space.blocks.clone(),
        })
    };

    if spec.stages == Stages::Single {
        let acc = fine.scan_all(TIE_WINDOW, &objective, exec);
        return finish(acc, None, Stages::Single, (0, 0));
    }

    let coarse = Grid::new(space, nc)?;
    let cacc = coarse.scan_all(spec.coarse_window, &objective, exec);
    if cacc.feasible == 0 {
        let acc = fine.scan_all(TIE_WINDOW, &objective, exec);
        return finish(acc, None, Stages::Single, (cacc.evaluated, 0));
    }
    let centers: Vec<u64> = if cacc.overflow {
        coarse
            .recount(None, cacc.best, spec.coarse_window, &objective)
            .1
    } else {
        let mut c: Vec<u64> = cacc.near.iter().map(|&(i, _)| i).collect();
        c.sort_unstable();
        c
    };

    let scale = n / nc;
    let fine_comps: Vec<Vec<Vec<usize>>> = space
        .blocks
        .iter()
        .map(|b| compositions(b.dim(), n))
        .collect();
    let coarse_comps: Vec<Vec<Vec<usize>>> = space
        .blocks
        .iter()
        .map(|b| compositions(b.dim(), nc))
        .collect();
    let mut list: Vec<u64> = Vec::new();
    for &c in &centers {
        let digits = coarse.decode(c);
        // per block: fine digits whose every coordinate lies within the radius
        let near: Vec<Vec<usize>> = digits
            .iter()
            .enumerate()
            .map(|(b, &d)| {
                let center: Vec<usize> = coarse_comps[b][d].iter().map(|k| k * scale).collect();
                fine_comps[b]
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.iter().zip(&center).all(|(a, b)| a.abs_diff(*b) <= radius))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let mut sel = vec![0usize; near.len()];
        'product: loop {
            let d: Vec<usize> = sel.iter().enumerate().map(|(b, &s)| near[b][s]).collect();
            list.push(fine.encode(&d));
            let mut k = near.len();
            loop {
                if k == 0 {
                    break 'product;
                }
                k -= 1;
                sel[k] += 1;
                if sel[k] < near[k].len() {
                    continue 'product;
                }
                sel[k] = 0;
            }
        }
    }
    list.sort_unstable();
    list.dedup();
    let acc = fine.scan_list(&list, TIE_WINDOW, &objective, exec);
    finish(
        acc,
        Some(&list),
        Stages::CoarseThenRefine,
        (cacc.evaluated, cacc.feasible),
    )
}

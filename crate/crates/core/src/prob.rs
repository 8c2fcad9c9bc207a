//! Dense probability tables over named finite alphabets.
//!
//! A [`JointTable`] stores the mass of every symbol tuple in row-major order
//! (last axis fastest). A [`ConditionalKernel`] maps each tuple of its given
//! axes to a distribution over tuples of its output axes. Every information
//! measure here is reported in bits, with `0 log 0 = 0`.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Mass tolerance for normalization and row-stochasticity checks.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance used when comparing information measures.
pub const INFO_TOL: f64 = 1e-9;

/// Symbol used for the single element of a degenerate (empty-variable) alphabet.
pub const NULL_SYMBOL: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    name: String,
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(name: impl Into<String>, symbols: Vec<S>) -> Result<Self> {
        let name = name.into();
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if name.is_empty() {
            return Err(Error::InvalidAlphabet {
                name,
                reason: "empty name".into(),
            });
        }
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet {
                name,
                reason: "no symbols".into(),
            });
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidAlphabet {
                    name,
                    reason: format!("duplicate symbol `{s}`"),
                });
            }
        }
        Ok(Alphabet { name, symbols })
    }

    /// Alphabet with symbols `"0"`, `"1"`, ..., `"n-1"`.
    pub fn range(name: impl Into<String>, n: usize) -> Self {
        assert!(n > 0, "alphabet must have at least one symbol");
        Alphabet {
            name: name.into(),
            symbols: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    /// One-symbol alphabet standing in for an absent variable.
    pub fn singleton(name: impl Into<String>) -> Self {
        Alphabet {
            name: name.into(),
            symbols: vec![NULL_SYMBOL.to_string()],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.symbols.len() == 1
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Alphabet {
            name: name.into(),
            symbols: self.symbols.clone(),
        }
    }
}

fn strides_of(axes: &[Alphabet]) -> Vec<usize> {
    let mut strides = vec![1; axes.len()];
    for k in (0..axes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].len();
    }
    strides
}

fn cell_count(axes: &[Alphabet]) -> usize {
    axes.iter().map(Alphabet::len).product()
}

fn check_unique(axes: &[Alphabet]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in axes {
        if !seen.insert(a.name()) {
            return Err(Error::DuplicateAxis(a.name().to_string()));
        }
    }
    Ok(())
}

/// Shannon entropy in bits of a (possibly unnormalized) mass vector.
pub fn entropy_bits(mass: &[f64]) -> f64 {
    mass.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Iterates every multi-index of a shape in row-major order.
pub(crate) struct Odometer {
    shape: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub(crate) fn new(shape: &[usize]) -> Self {
        Odometer {
            shape: shape.to_vec(),
            current: vec![0; shape.len()],
            done: shape.contains(&0),
        }
    }

    pub(crate) fn next_index(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        Some(&self.current)
    }

    pub(crate) fn advance(&mut self) {
        for k in (0..self.shape.len()).rev() {
            self.current[k] += 1;
            if self.current[k] < self.shape[k] {
                return;
            }
            self.current[k] = 0;
        }
        self.done = true;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

impl JointTable {
    /// Builds a table, validating shape, sign and normalization.
    pub fn new(axes: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        check_unique(&axes)?;
        let expected = cell_count(&axes);
        if mass.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: mass.len(),
            });
        }
        for (cell, &value) in mass.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(Error::NegativeMass { cell, value });
            }
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(JointTable { axes, mass })
    }

    pub fn from_fn(axes: Vec<Alphabet>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let shape: Vec<usize> = axes.iter().map(Alphabet::len).collect();
        let mut mass = Vec::with_capacity(cell_count(&axes));
        let mut odo = Odometer::new(&shape);
        while let Some(idx) = odo.next_index() {
            mass.push(f(idx));
            odo.advance();
        }
        JointTable::new(axes, mass)
    }

    pub fn uniform(axes: Vec<Alphabet>) -> Self {
        let n = cell_count(&axes);
        JointTable::new(axes, vec![1.0 / n as f64; n]).expect("uniform table is valid")
    }

    pub fn point_mass(axes: Vec<Alphabet>, at: &[usize]) -> Result<Self> {
        let at = at.to_vec();
        JointTable::from_fn(
            axes,
            move |idx| if idx == at.as_slice() { 1.0 } else { 0.0 },
        )
    }

    /// Degenerate distribution on a single-symbol alphabet.
    pub fn singleton(name: &str) -> Self {
        JointTable {
            axes: vec![Alphabet::singleton(name)],
            mass: vec![1.0],
        }
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(Alphabet::name).collect()
    }

    pub fn axis(&self, name: &str) -> Option<&Alphabet> {
        self.axes.iter().find(|a| a.name() == name)
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name() == name)
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axis_index(name).is_some()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Alphabet::len).collect()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.axes)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let strides = self.strides();
        let lin: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.mass[lin]
    }

    pub(crate) fn resolve(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                if !seen.insert(*n) {
                    return Err(Error::DuplicateAxis(n.to_string()));
                }
                self.axis_index(n)
                    .ok_or_else(|| Error::UnknownAxis(n.to_string()))
            })
            .collect()
    }

    /// Mass vector of the marginal over `axes` (positions, kept in the given order).
    pub(crate) fn marginal_mass(&self, axes: &[usize]) -> Vec<f64> {
        let sub_shape: Vec<usize> = axes.iter().map(|&k| self.axes[k].len()).collect();
        let mut sub_strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            sub_strides[k] = sub_strides[k + 1] * sub_shape[k + 1];
        }
        let mut out = vec![0.0; sub_shape.iter().product()];
        if axes.is_empty() {
            out[0] = self.mass.iter().sum();
            return out;
        }
        // per-axis contribution of each full index to the marginal index
        let mut contrib = vec![0usize; self.axes.len()];
        for (pos, &k) in axes.iter().enumerate() {
            contrib[k] = sub_strides[pos];
        }
        let shape = self.shape();
        let mut odo = Odometer::new(&shape);
        let mut lin = 0;
        while let Some(idx) = odo.next_index() {
            let m = self.mass[lin];
            if m != 0.0 {
                let t: usize = idx.iter().zip(&contrib).map(|(i, c)| i * c).sum();
                out[t] += m;
            }
            lin += 1;
            odo.advance();
        }
        out
    }

    /// Sums out every axis not in `keep`. Axis order of the input is preserved.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointTable> {
        if keep.is_empty() {
            return Err(Error::Invalid("marginalize needs at least one axis".into()));
        }
        let mut positions = self.resolve(keep)?;
        positions.sort_unstable();
        let mass = self.marginal_mass(&positions);
        let axes = positions.iter().map(|&k| self.axes[k].clone()).collect();
        Ok(JointTable { axes, mass })
    }

    /// Same distribution with axes permuted into `order` (must name every axis).
    pub fn reorder(&self, order: &[&str]) -> Result<JointTable> {
        if order.len() != self.axes.len() {
            return Err(Error::Invalid(format!(
                "reorder needs all {} axes, got {}",
                self.axes.len(),
                order.len()
            )));
        }
        let positions = self.resolve(order)?;
        let mass = self.marginal_mass(&positions);
        let axes = positions.iter().map(|&k| self.axes[k].clone()).collect();
        Ok(JointTable { axes, mass })
    }

    /// Conditional distribution of the remaining axes given `on`.
    ///
    /// Rows whose conditioning tuple has zero mass are left absent.
    pub fn condition(&self, on: &[&str]) -> Result<ConditionalKernel> {
        let given_pos = self.resolve(on)?;
        let out_pos: Vec<usize> = (0..self.axes.len())
            .filter(|k| !given_pos.contains(k))
            .collect();
        if out_pos.is_empty() {
            return Err(Error::Invalid(
                "conditioning set must be a strict subset of the axes".into(),
            ));
        }
        let mut order = given_pos.clone();
        order.extend(&out_pos);
        let arranged = self.marginal_mass(&order);
        let n_out: usize = out_pos.iter().map(|&k| self.axes[k].len()).product();
        let n_given: usize = given_pos.iter().map(|&k| self.axes[k].len()).product();
        let mut rows = Vec::with_capacity(n_given);
        let mut any = false;
        for g in 0..n_given {
            let slice = &arranged[g * n_out..(g + 1) * n_out];
            let total: f64 = slice.iter().sum();
            if total > 0.0 {
                any = true;
                rows.push(Some(slice.iter().map(|m| m / total).collect()));
            } else {
                rows.push(None);
            }
        }
        if !any {
            return Err(Error::ZeroMarginal);
        }
        Ok(ConditionalKernel {
            given: given_pos.iter().map(|&k| self.axes[k].clone()).collect(),
            out: out_pos.iter().map(|&k| self.axes[k].clone()).collect(),
            rows,
        })
    }

    /// Distribution of the other axes conditioned on fixed symbol indices.
    ///
    /// Returns `Ok(None)` when the conditioning event has zero probability.
    pub fn slice(&self, fixed: &[(&str, usize)]) -> Result<Option<JointTable>> {
        let names: Vec<&str> = fixed.iter().map(|(n, _)| *n).collect();
        let pos = self.resolve(&names)?;
        for ((name, sym), &k) in fixed.iter().zip(&pos) {
            if *sym >= self.axes[k].len() {
                return Err(Error::Invalid(format!(
                    "symbol index {sym} out of range for axis `{name}`"
                )));
            }
        }
        let keep: Vec<usize> = (0..self.axes.len()).filter(|k| !pos.contains(k)).collect();
        if keep.is_empty() {
            return Err(Error::Invalid("slice must leave at least one axis".into()));
        }
        let strides = self.strides();
        let shape = self.shape();
        let keep_shape: Vec<usize> = keep.iter().map(|&k| shape[k]).collect();
        let base: usize = fixed
            .iter()
            .zip(&pos)
            .map(|((_, s), &k)| s * strides[k])
            .sum();
        let mut mass = Vec::with_capacity(keep_shape.iter().product());
        let mut odo = Odometer::new(&keep_shape);
        while let Some(idx) = odo.next_index() {
            let lin = base
                + idx
                    .iter()
                    .zip(&keep)
                    .map(|(i, &k)| i * strides[k])
                    .sum::<usize>();
            mass.push(self.mass[lin]);
            odo.advance();
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Ok(None);
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Some(JointTable {
            axes: keep.iter().map(|&k| self.axes[k].clone()).collect(),
            mass,
        }))
    }

    /// Product with an independent table on disjoint axes.
    pub fn product(&self, other: &JointTable) -> Result<JointTable> {
        for a in &other.axes {
            if self.has_axis(a.name()) {
                return Err(Error::DuplicateAxis(a.name().to_string()));
            }
        }
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        let mut mass = Vec::with_capacity(self.mass.len() * other.mass.len());
        for &a in &self.mass {
            for &b in &other.mass {
                mass.push(a * b);
            }
        }
        Ok(JointTable { axes, mass })
    }

    /// Entropy `H(of | given)` in bits.
    pub fn entropy(&self, of: &[&str], given: &[&str]) -> Result<f64> {
        let of_pos = self.resolve(of)?;
        let given_pos = self.resolve(given)?;
        if let Some(k) = of_pos.iter().find(|k| given_pos.contains(k)) {
            return Err(Error::OverlappingSets(self.axes[*k].name().to_string()));
        }
        Ok(self.entropy_at(&of_pos, &given_pos))
    }

    pub(crate) fn entropy_at(&self, of: &[usize], given: &[usize]) -> f64 {
        if of.is_empty() {
            return 0.0;
        }
        let mut joint: Vec<usize> = given.to_vec();
        joint.extend_from_slice(of);
        let h_joint = entropy_bits(&self.marginal_mass(&joint));
        let h_given = if given.is_empty() {
            0.0
        } else {
            entropy_bits(&self.marginal_mass(given))
        };
        h_joint - h_given
    }

    /// Conditional mutual information `I(a; b | given)` in bits.
    pub fn mutual_information(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
        let pa = self.resolve(a)?;
        let pb = self.resolve(b)?;
        let pc = self.resolve(given)?;
        for (x, y) in [(&pa, &pb), (&pa, &pc), (&pb, &pc)] {
            if let Some(k) = x.iter().find(|k| y.contains(k)) {
                return Err(Error::OverlappingSets(self.axes[*k].name().to_string()));
            }
        }
        Ok(self.mi_at(&pa, &pb, &pc))
    }

    pub(crate) fn mi_at(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let h = |set: Vec<usize>| -> f64 {
            if set.is_empty() {
                0.0
            } else {
                entropy_bits(&self.marginal_mass(&set))
            }
        };
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        let bc: Vec<usize> = b.iter().chain(c).copied().collect();
        let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        h(ac) + h(bc) - h(abc) - h(c.to_vec())
    }

    /// Largest absolute cell difference after aligning axis order by name.
    pub fn max_abs_diff(&self, other: &JointTable) -> Result<f64> {
        let names = self.axis_names();
        let aligned = other.reorder(&names)?;
        if aligned.axes != self.axes {
            return Err(Error::Invalid("alphabets differ".into()));
        }
        Ok(self
            .mass
            .iter()
            .zip(&aligned.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl fmt::Display for JointTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.axis_names().join(" "))?;
        let shape = self.shape();
        let mut odo = Odometer::new(&shape);
        let mut lin = 0;
        while let Some(idx) = odo.next_index() {
            let labels: Vec<&str> = idx
                .iter()
                .zip(&self.axes)
                .map(|(&i, a)| a.symbols()[i].as_str())
                .collect();
            writeln!(f, "{} {}", labels.join(" "), self.mass[lin])?;
            lin += 1;
            odo.advance();
        }
        Ok(())
    }
}

/// Stochastic map from tuples of `given` axes to distributions over tuples of `out` axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    given: Vec<Alphabet>,
    out: Vec<Alphabet>,
    rows: Vec<Option<Vec<f64>>>,
}

impl ConditionalKernel {
    pub fn new(given: Vec<Alphabet>, out: Vec<Alphabet>, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_absent(given, out, rows.into_iter().map(Some).collect())
    }

    /// Builds a kernel where `None` rows are explicitly undefined.
    pub fn with_absent(
        given: Vec<Alphabet>,
        out: Vec<Alphabet>,
        rows: Vec<Option<Vec<f64>>>,
    ) -> Result<Self> {
        let mut all = given.clone();
        all.extend(out.iter().cloned());
        check_unique(&all)?;
        if out.is_empty() {
            return Err(Error::Invalid(
                "kernel needs at least one output axis".into(),
            ));
        }
        let n_given = cell_count(&given);
        let n_out = cell_count(&out);
        if rows.len() != n_given {
            return Err(Error::ShapeMismatch {
                expected: n_given,
                got: rows.len(),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            let Some(row) = row else { continue };
            if row.len() != n_out {
                return Err(Error::ShapeMismatch {
                    expected: n_out,
                    got: row.len(),
                });
            }
            for (c, &value) in row.iter().enumerate() {
                if !(value >= 0.0) {
                    return Err(Error::NegativeMass {
                        cell: r * n_out + c,
                        value,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::NotNormalized { sum });
            }
        }
        Ok(ConditionalKernel { given, out, rows })
    }

    pub fn from_fn(
        given: Vec<Alphabet>,
        out: Vec<Alphabet>,
        f: impl Fn(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let gshape: Vec<usize> = given.iter().map(Alphabet::len).collect();
        let oshape: Vec<usize> = out.iter().map(Alphabet::len).collect();
        let mut rows = Vec::new();
        let mut godo = Odometer::new(&gshape);
        while let Some(g) = godo.next_index() {
            let g = g.to_vec();
            let mut row = Vec::new();
            let mut oodo = Odometer::new(&oshape);
            while let Some(o) = oodo.next_index() {
                row.push(f(&g, o));
                oodo.advance();
            }
            rows.push(row);
            godo.advance();
        }
        ConditionalKernel::new(given, out, rows)
    }

    /// Deterministic kernel: every given tuple maps to one output tuple.
    pub fn deterministic(
        given: Vec<Alphabet>,
        out: Vec<Alphabet>,
        f: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<Self> {
        ConditionalKernel::from_fn(given, out, |g, o| if f(g) == o { 1.0 } else { 0.0 })
    }

    /// `out = given` symbol-by-symbol; the output alphabet copies the input symbols.
    pub fn identity(given: &Alphabet, out_name: &str) -> Self {
        ConditionalKernel::deterministic(vec![given.clone()], vec![given.renamed(out_name)], |g| {
            g.to_vec()
        })
        .expect("identity kernel is valid")
    }

    /// Kernel with no inputs, i.e. a plain distribution.
    pub fn unconditional(table: &JointTable) -> Self {
        ConditionalKernel {
            given: Vec::new(),
            out: table.axes().to_vec(),
            rows: vec![Some(table.mass().to_vec())],
        }
    }

    pub fn given(&self) -> &[Alphabet] {
        &self.given
    }

    pub fn out(&self) -> &[Alphabet] {
        &self.out
    }

    pub fn given_names(&self) -> Vec<&str> {
        self.given.iter().map(Alphabet::name).collect()
    }

    pub fn out_names(&self) -> Vec<&str> {
        self.out.iter().map(Alphabet::name).collect()
    }

    pub fn rows(&self) -> &[Option<Vec<f64>>] {
        &self.rows
    }

    pub fn row_index(&self, given_idx: &[usize]) -> usize {
        let strides = strides_of(&self.given);
        given_idx.iter().zip(&strides).map(|(i, s)| i * s).sum()
    }

    pub fn row(&self, given_idx: &[usize]) -> Option<&[f64]> {
        self.rows[self.row_index(given_idx)].as_deref()
    }

    pub fn prob(&self, given_idx: &[usize], out_idx: &[usize]) -> Option<f64> {
        let strides = strides_of(&self.out);
        let o: usize = out_idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.row(given_idx).map(|r| r[o])
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows
            .iter()
            .flatten()
            .all(|r| r.iter().all(|&p| p == 0.0 || p == 1.0))
    }

    /// Number of rows left undefined.
    pub fn absent_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }
}

/// One factor of a product-form joint distribution.
#[derive(Debug, Clone, Copy)]
pub enum Factor<'a> {
    Table(&'a JointTable),
    Kernel(&'a ConditionalKernel),
}

impl<'a> From<&'a JointTable> for Factor<'a> {
    fn from(t: &'a JointTable) -> Self {
        Factor::Table(t)
    }
}

impl<'a> From<&'a ConditionalKernel> for Factor<'a> {
    fn from(k: &'a ConditionalKernel) -> Self {
        Factor::Kernel(k)
    }
}

/// Multiplies an ordered chain of factors into one joint table.
///
/// Each kernel's given axes must have been produced by an earlier factor,
/// and no axis may be produced twice.
pub fn compose(parts: &[Factor<'_>]) -> Result<JointTable> {
    let mut joint = JointTable {
        axes: Vec::new(),
        mass: vec![1.0],
    };
    for part in parts {
        joint = match part {
            Factor::Table(t) => joint.product(t)?,
            Factor::Kernel(k) => extend_by_kernel(&joint, k)?,
        };
    }
    if joint.axes.is_empty() {
        return Err(Error::Invalid("compose needs at least one factor".into()));
    }
    let sum: f64 = joint.mass.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::NotNormalized { sum });
    }
    Ok(joint)
}

fn extend_by_kernel(joint: &JointTable, k: &ConditionalKernel) -> Result<JointTable> {
    let mut given_pos = Vec::with_capacity(k.given.len());
    for g in &k.given {
        let pos = joint
            .axis_index(g.name())
            .ok_or_else(|| Error::DanglingDependency(g.name().to_string()))?;
        if joint.axes[pos] != *g {
            return Err(Error::Invalid(format!(
                "alphabet of `{}` differs between producer and kernel",
                g.name()
            )));
        }
        given_pos.push(pos);
    }
    for o in &k.out {
        if joint.has_axis(o.name()) {
            return Err(Error::DuplicateAxis(o.name().to_string()));
        }
    }
    let n_out = cell_count(&k.out);
    let kstrides = strides_of(&k.given);
    let mut contrib = vec![0usize; joint.axes.len()];
    for (g, &pos) in given_pos.iter().enumerate() {
        contrib[pos] = kstrides[g];
    }
    let shape = joint.shape();
    let mut mass = Vec::with_capacity(joint.mass.len() * n_out);
    let mut odo = Odometer::new(&shape);
    let mut lin = 0;
    while let Some(idx) = odo.next_index() {
        let m = joint.mass[lin];
        let r: usize = idx.iter().zip(&contrib).map(|(i, c)| i * c).sum();
        match (&k.rows[r], m > 0.0) {
            (Some(row), _) => mass.extend(row.iter().map(|p| m * p)),
            (None, false) => mass.resize(mass.len() + n_out, 0.0),
            (None, true) => return Err(Error::AbsentRow { row: r }),
        }
        lin += 1;
        odo.advance();
    }
    let mut axes = joint.axes.clone();
    axes.extend(k.out.iter().cloned());
    Ok(JointTable { axes, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bin(name: &str) -> Alphabet {
        Alphabet::range(name, 2)
    }

    fn table2() -> JointTable {
        JointTable::new(
            vec![bin("S1"), bin("S2")],
            vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0],
        )
        .unwrap()
    }

    fn table6() -> JointTable {
        JointTable::new(vec![bin("S1"), bin("S2")], vec![0.0, 0.04, 0.045, 0.915]).unwrap()
    }

    #[test]
    fn alphabet_rejects_duplicates() {
        assert!(Alphabet::new("A", vec!["x", "x"]).is_err());
        assert!(Alphabet::new("A", Vec::<String>::new()).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(matches!(
            JointTable::new(vec![bin("A")], vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            JointTable::new(vec![bin("A")], vec![1.5, -0.5]),
            Err(Error::NegativeMass { .. })
        ));
        assert!(matches!(
            JointTable::new(vec![bin("A"), bin("A")], vec![0.25; 4]),
            Err(Error::DuplicateAxis(_))
        ));
    }

    #[test]
    fn marginalize_examples() {
        let u = JointTable::uniform(vec![bin("A"), bin("B")]);
        assert_eq!(u.marginalize(&["A"]).unwrap().mass(), &[0.5, 0.5]);

        let m = table2().marginalize(&["S1"]).unwrap();
        assert_abs_diff_eq!(m.mass()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mass()[1], 1.0 / 3.0, epsilon = 1e-15);

        let m = table6().marginalize(&["S2"]).unwrap();
        assert_abs_diff_eq!(m.mass()[0], 0.045, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mass()[1], 0.955, epsilon = 1e-15);

        assert_eq!(
            table2().marginalize(&["Q"]),
            Err(Error::UnknownAxis("Q".into()))
        );
    }

    #[test]
    fn marginalize_keeps_input_order() {
        let t = JointTable::uniform(vec![bin("A"), bin("B"), bin("C")]);
        assert_eq!(
            t.marginalize(&["C", "A"]).unwrap().axis_names(),
            vec!["A", "C"]
        );
    }

    #[test]
    fn condition_examples() {
        // identity kernel recovered from its induced joint
        let s = JointTable::uniform(vec![bin("S")]);
        let id = ConditionalKernel::identity(s.axis("S").unwrap(), "X");
        let joint = compose(&[(&s).into(), (&id).into()]).unwrap();
        let k = joint.condition(&["S"]).unwrap();
        assert_eq!(k.row(&[0]).unwrap(), &[1.0, 0.0]);
        assert_eq!(k.row(&[1]).unwrap(), &[0.0, 1.0]);

        let k = table2().condition(&["S1"]).unwrap();
        assert_eq!(k.row(&[1]).unwrap(), &[0.0, 1.0]);

        // zero-marginal rows stay absent
        let k = table6().condition(&["S1"]).unwrap();
        assert!(k.row(&[0]).is_some());
        let t = JointTable::new(vec![bin("A"), bin("B")], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let k = t.condition(&["A"]).unwrap();
        assert!(k.row(&[1]).is_none());
        assert_eq!(k.absent_rows(), 1);
    }

    #[test]
    fn condition_on_table5_column() {
        let x = vec![bin("X1"), bin("X2")];
        let ys = [0.23, 0.19, 0.65, 0.91];
        let chan = ConditionalKernel::from_fn(x.clone(), vec![bin("Y")], |g, o| {
            let p0 = ys[g[0] * 2 + g[1]];
            if o[0] == 0 {
                p0
            } else {
                1.0 - p0
            }
        })
        .unwrap();
        let px = JointTable::uniform(x);
        let joint = compose(&[(&px).into(), (&chan).into()]).unwrap();
        let k = joint.condition(&["X1", "X2"]).unwrap();
        let row = k.row(&[0, 0]).unwrap();
        assert_abs_diff_eq!(row[0], 0.23, epsilon = 1e-15);
        assert_abs_diff_eq!(row[1], 0.77, epsilon = 1e-15);
    }

    #[test]
    fn compose_errors() {
        let s = JointTable::uniform(vec![bin("S")]);
        let k = ConditionalKernel::identity(&bin("T"), "X");
        assert_eq!(
            compose(&[(&s).into(), (&k).into()]),
            Err(Error::DanglingDependency("T".into()))
        );
        assert!(matches!(
            compose(&[(&s).into(), (&s).into()]),
            Err(Error::DuplicateAxis(_))
        ));
        // a kernel may not re-produce one of its own inputs
        assert!(matches!(
            ConditionalKernel::new(vec![bin("S")], vec![bin("S")], vec![vec![1.0, 0.0]; 2]),
            Err(Error::DuplicateAxis(_))
        ));
        // absent rows reached with positive mass are an error
        let gappy = ConditionalKernel::with_absent(
            vec![bin("S")],
            vec![bin("X")],
            vec![Some(vec![1.0, 0.0]), None],
        )
        .unwrap();
        assert!(matches!(
            compose(&[(&s).into(), (&gappy).into()]),
            Err(Error::AbsentRow { row: 1 })
        ));
    }

    #[test]
    fn compose_independent_chain() {
        let a = JointTable::new(vec![bin("A")], vec![0.3, 0.7]).unwrap();
        let b = JointTable::new(vec![bin("B")], vec![0.9, 0.1]).unwrap();
        let ab = compose(&[(&a).into(), (&b).into()]).unwrap();
        assert_abs_diff_eq!(ab.get(&[1, 0]), 0.63, epsilon = 1e-15);
        assert_abs_diff_eq!(
            ab.mutual_information(&["A"], &["B"], &[]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(
            table2().entropy(&["S1", "S2"], &[]).unwrap(),
            3f64.log2(),
            epsilon = 1e-12
        );
        let h6 = table6().entropy(&["S1", "S2"], &[]).unwrap();
        assert!((h6 - 0.504).abs() < 1e-3, "{h6}");
        let pm = JointTable::point_mass(vec![bin("A"), bin("B")], &[1, 0]).unwrap();
        assert_eq!(pm.entropy(&["A", "B"], &[]).unwrap(), 0.0);
        // H(S1|S2) for table 2: S2=1 w.p. 2/3 with S1 uniform
        assert_abs_diff_eq!(
            table2().entropy(&["S1"], &["S2"]).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mutual_information_overlap_error() {
        assert!(matches!(
            table2().mutual_information(&["S1"], &["S1"], &[]),
            Err(Error::OverlappingSets(_))
        ));
        assert!(matches!(
            table2().mutual_information(&["S1"], &["S2"], &["S2"]),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn slice_returns_none_on_zero_mass() {
        let t = table2();
        assert!(t.slice(&[("S1", 1), ("S2", 0)]).is_err()); // leaves no axis
        let s = t.slice(&[("S1", 1)]).unwrap().unwrap();
        assert_eq!(s.mass(), &[0.0, 1.0]);
        let t = JointTable::new(vec![bin("A"), bin("B")], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(t.slice(&[("A", 1)]).unwrap().is_none());
    }

    fn random_table(weights: Vec<f64>, shape: &[usize]) -> JointTable {
        let names = ["A", "B", "C", "D"];
        let axes: Vec<Alphabet> = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| Alphabet::range(names[k], n))
            .collect();
        let total: f64 = weights.iter().sum();
        JointTable::new(axes, weights.iter().map(|w| w / total).collect()).unwrap()
    }

    fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], n)
            .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-3)
    }

    proptest! {
        #[test]
        fn chain_rule_holds(w in weights(2 * 3 * 2)) {
            let t = random_table(w, &[2, 3, 2]);
            let lhs = t.entropy(&["A", "B"], &["C"]).unwrap();
            let rhs = t.entropy(&["A"], &["C"]).unwrap() + t.entropy(&["B"], &["A", "C"]).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            let s: f64 = t.mass().iter().sum();
            prop_assert!((s - 1.0).abs() <= PROB_TOL);
        }

        #[test]
        fn conditional_mi_nonnegative(w in weights(3 * 2 * 2 * 2)) {
            let t = random_table(w, &[3, 2, 2, 2]);
            let i = t.mutual_information(&["A", "D"], &["B"], &["C"]).unwrap();
            prop_assert!(i >= -1e-10);
        }

        #[test]
        fn mi_vanishes_for_conditionally_independent(
            pc in weights(3),
            pa in weights(3 * 2),
            pb in weights(3 * 2),
        ) {
            let c = random_table(pc, &[3]).reorder(&["A"]).unwrap();
            let c = JointTable::new(vec![Alphabet::range("C", 3)], c.mass().to_vec()).unwrap();
            let row = |w: &[f64], r: usize| {
                let s: f64 = w[r * 2..r * 2 + 2].iter().sum();
                if s > 0.0 { w[r * 2..r * 2 + 2].iter().map(|x| x / s).collect() } else { vec![0.5, 0.5] }
            };
            let ka = ConditionalKernel::new(
                vec![Alphabet::range("C", 3)], vec![Alphabet::range("A", 2)],
                (0..3).map(|r| row(&pa, r)).collect()).unwrap();
            let kb = ConditionalKernel::new(
                vec![Alphabet::range("C", 3)], vec![Alphabet::range("B", 2)],
                (0..3).map(|r| row(&pb, r)).collect()).unwrap();
            let j = compose(&[(&c).into(), (&ka).into(), (&kb).into()]).unwrap();
            let i = j.mutual_information(&["A"], &["B"], &["C"]).unwrap();
            prop_assert!(i.abs() < 1e-10);
        }

        #[test]
        fn compose_then_marginalize_roundtrip(w in weights(2 * 3), k in weights(2 * 3 * 2)) {
            let t = random_table(w, &[2, 3]);
            let rows: Vec<Vec<f64>> = (0..6).map(|r| {
                let s: f64 = k[r * 2..r * 2 + 2].iter().sum();
                if s > 0.0 { k[r * 2..r * 2 + 2].iter().map(|x| x / s).collect() } else { vec![1.0, 0.0] }
            }).collect();
            let kern = ConditionalKernel::new(t.axes().to_vec(), vec![Alphabet::range("Z", 2)], rows).unwrap();
            let j = compose(&[(&t).into(), (&kern).into()]).unwrap();
            let back = j.marginalize(&["A", "B"]).unwrap();
            prop_assert!(back.max_abs_diff(&t).unwrap() <= 1e-12);
        }
    }
}

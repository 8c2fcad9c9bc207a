//! Sufficient conditions for lossless transmission.
//!
//! Each evaluator takes a scenario and an encoder chain, builds the induced
//! joint and reports six inequalities: three at the relay and three at the
//! destination. A scheme certifies transmissibility when every inequality
//! holds strictly.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::*;
use crate::objectives::{PerSymbolInputs, PsomarcFast};
use crate::prob::INFO_TOL;
use crate::search::{maximize, SearchResult, SearchSpace, SearchSpec, SimplexBlock};

/// Outcome of one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Strict inequality holds outside the tolerance band.
    StrictPass,
    /// Margin lies within the tolerance band.
    Boundary,
    /// Non-strict inequality holds.
    Pass,
    Violated,
}

impl Status {
    /// Status of a strict `lhs < rhs` requirement.
    pub fn strict(margin: f64) -> Self {
        if margin > INFO_TOL {
            Status::StrictPass
        } else if margin >= -INFO_TOL {
            Status::Boundary
        } else {
            Status::Violated
        }
    }

    /// Status of a non-strict `lhs <= rhs` requirement.
    pub fn non_strict(margin: f64) -> Self {
        if margin >= -INFO_TOL {
            Status::Pass
        } else {
            Status::Violated
        }
    }

    /// Worst of two statuses.
    pub fn worst(self, other: Status) -> Status {
        let rank = |s: Status| match s {
            Status::StrictPass => 0,
            Status::Pass => 1,
            Status::Boundary => 2,
            Status::Violated => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::StrictPass => "strict_pass",
            Status::Boundary => "boundary",
            Status::Pass => "pass",
            Status::Violated => "violated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityRecord {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub status: Status,
}

impl InequalityRecord {
    pub fn strict(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        InequalityRecord {
            label: label.into(),
            lhs,
            rhs,
            margin,
            status: Status::strict(margin),
        }
    }

    pub fn non_strict(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        InequalityRecord {
            label: label.into(),
            lhs,
            rhs,
            margin,
            status: Status::non_strict(margin),
        }
    }
}

/// Prints `-0` as `0` so golden outputs stay stable.
pub(crate) fn fixed(x: f64) -> String {
    let s = format!("{x:.9}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl fmt::Display for InequalityRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.label,
            fixed(self.lhs),
            fixed(self.rhs),
            fixed(self.margin),
            self.status
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Thm1,
    Thm2,
    Thm3,
    Prop1,
}

impl Scheme {
    pub fn factorization(self) -> Factorization {
        match self {
            Scheme::Thm2 => Factorization::RelayOnSources,
            _ => Factorization::Superposition,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Thm1 => "thm1",
            Scheme::Thm2 => "thm2",
            Scheme::Thm3 => "thm3",
            Scheme::Prop1 => "prop1",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm1" => Ok(Scheme::Thm1),
            "thm2" => Ok(Scheme::Thm2),
            "thm3" => Ok(Scheme::Thm3),
            "prop1" => Ok(Scheme::Prop1),
            _ => Err(Error::Invalid(format!("unknown scheme `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub scheme: Scheme,
    /// Relay records first (`S1`, `S2`, `S1S2`), then destination records.
    pub records: Vec<InequalityRecord>,
    pub feasible: bool,
    pub notes: Vec<String>,
}

impl FeasibilityReport {
    fn new(scheme: Scheme, records: Vec<InequalityRecord>, notes: Vec<String>) -> Self {
        let feasible = records.iter().all(|r| r.status == Status::StrictPass);
        FeasibilityReport {
            scheme,
            records,
            feasible,
            notes,
        }
    }

    pub fn status(&self) -> Status {
        self.records
            .iter()
            .fold(Status::StrictPass, |s, r| s.worst(r.status))
    }

    pub fn record(&self, label: &str) -> Option<&InequalityRecord> {
        self.records.iter().find(|r| r.label == label)
    }

    pub fn relay(&self) -> &[InequalityRecord] {
        &self.records[..3]
    }

    pub fn destination(&self) -> &[InequalityRecord] {
        &self.records[3..]
    }

    /// Relay and destination requirements of each rate merged into one record
    /// carrying the smaller margin. On a primitive channel this is the form in
    /// which the relay link appears as a single per-rate bottleneck.
    pub fn combined(&self) -> Vec<InequalityRecord> {
        ["S1", "S2", "S1S2"]
            .iter()
            .enumerate()
            .map(|(k, tag)| {
                let (r, d) = (&self.records[k], &self.records[k + 3]);
                let pick = if r.margin <= d.margin { r } else { d };
                InequalityRecord {
                    label: format!("{}.merged.{}", self.scheme, tag),
                    ..pick.clone()
                }
            })
            .collect()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scheme={}", self.scheme)?;
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        for n in &self.notes {
            writeln!(f, "note={n}")?;
        }
        writeln!(f, "feasible={}", self.feasible)?;
        writeln!(f, "status={}", self.status())
    }
}

fn view(scenario: &MarcScenario, enc: &EncoderChain, scheme: Scheme) -> Result<InfoView> {
    let joint = induced_joint(scenario, enc, scheme.factorization())?;
    Ok(InfoView::new(scenario, joint))
}

fn relay_superposition(v: &InfoView, scheme: Scheme) -> Result<Vec<InequalityRecord>> {
    let p = scheme.to_string();
    Ok(vec![
        InequalityRecord::strict(
            format!("{p}.rly.S1"),
            v.entropy(&[S1], &[S2, W3])?,
            v.i_relay(&[X1], &[S2, V1, X2, X3, W3])?,
        ),
        InequalityRecord::strict(
            format!("{p}.rly.S2"),
            v.entropy(&[S2], &[S1, W3])?,
            v.i_relay(&[X2], &[S1, V2, X1, X3, W3])?,
        ),
        InequalityRecord::strict(
            format!("{p}.rly.S1S2"),
            v.entropy(&[S1, S2], &[W3])?,
            v.i_relay(&[X1, X2], &[V1, V2, X3, W3])?,
        ),
    ])
}

struct DestLhs {
    s1: f64,
    s2: f64,
    s12: f64,
}

fn dest_lhs(v: &InfoView) -> Result<DestLhs> {
    Ok(DestLhs {
        s1: v.entropy(&[S1], &[S2, W])?,
        s2: v.entropy(&[S2], &[S1, W])?,
        s12: v.entropy(&[S1, S2], &[W])?,
    })
}

/// Regular-encoding scheme with superposition at both transmitters.
pub fn eval_thm1(scenario: &MarcScenario, enc: &EncoderChain) -> Result<FeasibilityReport> {
    let v = view(scenario, enc, Scheme::Thm1)?;
    let mut records = relay_superposition(&v, Scheme::Thm1)?;
    let l = dest_lhs(&v)?;
    records.push(InequalityRecord::strict(
        "thm1.dst.S1",
        l.s1,
        v.i_dest(&[X1, X3], &[S1, V2, X2])?,
    ));
    records.push(InequalityRecord::strict(
        "thm1.dst.S2",
        l.s2,
        v.i_dest(&[X2, X3], &[S2, V1, X1])?,
    ));
    records.push(InequalityRecord::strict(
        "thm1.dst.S1S2",
        l.s12,
        v.i_dest(&[X1, X2, X3], &[S1, S2])?,
    ));
    Ok(FeasibilityReport::new(Scheme::Thm1, records, Vec::new()))
}

/// Scheme where the relay input depends on the sources directly.
pub fn eval_thm2(scenario: &MarcScenario, enc: &EncoderChain) -> Result<FeasibilityReport> {
    let v = view(scenario, enc, Scheme::Thm2)?;
    let l = dest_lhs(&v)?;
    let records = vec![
        InequalityRecord::strict(
            "thm2.rly.S1",
            v.entropy(&[S1], &[S2, W3])?,
            v.i_relay(&[X1], &[S1, X2, X3])?,
        ),
        InequalityRecord::strict(
            "thm2.rly.S2",
            v.entropy(&[S2], &[S1, W3])?,
            v.i_relay(&[X2], &[S2, X1, X3])?,
        ),
        InequalityRecord::strict(
            "thm2.rly.S1S2",
            v.entropy(&[S1, S2], &[W3])?,
            v.i_relay(&[X1, X2], &[S1, S2, X3])?,
        ),
        InequalityRecord::strict("thm2.dst.S1", l.s1, v.i_dest(&[X1, X3], &[S2, X2, W])?),
        InequalityRecord::strict("thm2.dst.S2", l.s2, v.i_dest(&[X2, X3], &[S1, X1, W])?),
        InequalityRecord::strict("thm2.dst.S1S2", l.s12, v.i_dest(&[X1, X2, X3], &[W])?),
    ];
    Ok(FeasibilityReport::new(Scheme::Thm2, records, Vec::new()))
}

/// Destination RHS of the simultaneous-decoding scheme: `(S1, S2, S1S2)`.
fn thm3_dest(v: &InfoView) -> Result<[f64; 3]> {
    let s1 = v
        .i_dest(&[X1, X3], &[S2, V2, X2, W])?
        .min(v.i_dest(&[X1, X3], &[S1, V2, X2])? + v.i_dest(&[X1], &[S2, V1, X2, X3, W])?);
    let s2 = v
        .i_dest(&[X2, X3], &[S1, V1, X1, W])?
        .min(v.i_dest(&[X2, X3], &[S2, V1, X1])? + v.i_dest(&[X2], &[S1, V2, X1, X3, W])?);
    let s12 = v.i_dest(&[X1, X2, X3], &[W])?;
    Ok([s1, s2, s12])
}

/// Simultaneous backward decoding of source and relay information.
pub fn eval_thm3(scenario: &MarcScenario, enc: &EncoderChain) -> Result<FeasibilityReport> {
    let v = view(scenario, enc, Scheme::Thm3)?;
    let mut records = relay_superposition(&v, Scheme::Thm3)?;
    let l = dest_lhs(&v)?;
    let [s1, s2, s12] = thm3_dest(&v)?;
    records.push(InequalityRecord::strict("thm3.dst.S1", l.s1, s1));
    records.push(InequalityRecord::strict("thm3.dst.S2", l.s2, s2));
    records.push(InequalityRecord::strict("thm3.dst.S1S2", l.s12, s12));
    let notes = vec![
        "dst.S1/dst.S2 second branch: the first term carries no W conditioning, evaluated as stated"
            .to_string(),
    ];
    Ok(FeasibilityReport::new(Scheme::Thm3, records, notes))
}

/// Sequential decoding variant with additive destination terms.
pub fn eval_prop1(scenario: &MarcScenario, enc: &EncoderChain) -> Result<FeasibilityReport> {
    let v = view(scenario, enc, Scheme::Prop1)?;
    let mut records = relay_superposition(&v, Scheme::Prop1)?;
    let l = dest_lhs(&v)?;
    records.push(InequalityRecord::strict(
        "prop1.dst.S1",
        l.s1,
        v.i_dest(&[X1], &[S2, V1, X2, X3, W])? + v.i_dest(&[V1, X3], &[V2, W])?,
    ));
    records.push(InequalityRecord::strict(
        "prop1.dst.S2",
        l.s2,
        v.i_dest(&[X2], &[S1, V2, X1, X3, W])? + v.i_dest(&[V2, X3], &[V1, W])?,
    ));
    records.push(InequalityRecord::strict(
        "prop1.dst.S1S2",
        l.s12,
        v.i_dest(&[X1, X2], &[V1, V2, X3, W])? + v.i_dest(&[V1, V2, X3], &[W])?,
    ));
    Ok(FeasibilityReport::new(Scheme::Prop1, records, Vec::new()))
}

pub fn eval(
    scheme: Scheme,
    scenario: &MarcScenario,
    enc: &EncoderChain,
) -> Result<FeasibilityReport> {
    match scheme {
        Scheme::Thm1 => eval_thm1(scenario, enc),
        Scheme::Thm2 => eval_thm2(scenario, enc),
        Scheme::Thm3 => eval_thm3(scenario, enc),
        Scheme::Prop1 => eval_prop1(scenario, enc),
    }
}

/// Search space of per-symbol encoders `p(x1|s1) p(x2|s2)`.
pub fn per_symbol_space(scenario: &MarcScenario, ch: &Psomarc) -> (SearchSpace, PerSymbolInputs) {
    let s1 = scenario.s1_alphabet();
    let s2 = scenario.s2_alphabet();
    let x1 = ch.x1_alphabet();
    let x2 = ch.x2_alphabet();
    let mut blocks = Vec::new();
    for s in s1.symbols() {
        blocks.push(SimplexBlock::new(
            format!("p(x1|s1={s})"),
            x1.symbols().to_vec(),
        ));
    }
    for s in s2.symbols() {
        blocks.push(SimplexBlock::new(
            format!("p(x2|s2={s})"),
            x2.symbols().to_vec(),
        ));
    }
    let inputs = PerSymbolInputs::new(
        scenario.source_pair().mass().to_vec(),
        s1.len(),
        s2.len(),
        x1.len(),
        x2.len(),
    );
    (SearchSpace::new(blocks), inputs)
}

/// Maximizes an objective of the induced `p(x1, x2)` over per-symbol encoders.
pub fn search_per_symbol<F>(
    scenario: &MarcScenario,
    spec: &SearchSpec,
    objective: F,
) -> Result<SearchResult>
where
    F: Fn(&PsomarcFast, &PerSymbolInputs, &[f64]) -> f64 + Sync,
{
    let ch = scenario
        .channel
        .as_psomarc()
        .ok_or_else(|| Error::Invalid("frontier searches need a primitive channel".into()))?;
    let fast = PsomarcFast::new(ch);
    let (space, inputs) = per_symbol_space(scenario, ch);
    maximize(&space, spec, |p| objective(&fast, &inputs, p))
}

/// `max min{I(X1,X2;Y3), I(X1,X2;YS) + c3}` over `p(x1|s1) p(x2|s2)`.
pub fn i_suff_psomarc(scenario: &MarcScenario, spec: &SearchSpec) -> Result<SearchResult> {
    search_per_symbol(scenario, spec, |f, inputs, p| {
        let mut px = [0.0f64; 64];
        let px = &mut px[..f.nx()];
        inputs.input_joint(p, px);
        f.suff(px)
    })
}

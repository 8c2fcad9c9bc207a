//! Necessary conditions and the primitive-channel sum-rate frontiers.
//!
//! The three outer bounds take an explicit joint built from a time-sharing
//! (or broadcast auxiliary) variable and input kernels. Transmitter inputs
//! must keep every maximal correlation at or below that of the sources, for
//! each time-sharing symbol.

use std::fmt;

use crate::error::{Error, Result};
use crate::models::*;
use crate::objectives::PsomarcFast;
use crate::prob::{compose, ConditionalKernel, Factor, JointTable};
use crate::search::{
    maximize, maximize_constrained, SearchResult, SearchSpace, SearchSpec, SimplexBlock,
};
use crate::spectral::{
    correlation_profile, maximal_correlation, maximal_correlation_dense, BPRIME_TOL,
};
use crate::sufficient::{InequalityRecord, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Thm4,
    Prop2Bc,
    Thm5,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Thm4 => "thm4",
            Bound::Prop2Bc => "prop2bc",
            Bound::Thm5 => "thm5",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NecessaryReport {
    pub bound: Bound,
    pub records: Vec<InequalityRecord>,
    pub satisfied: bool,
    /// Joint the records were evaluated on.
    pub joint: JointTable,
}

impl NecessaryReport {
    fn new(bound: Bound, records: Vec<InequalityRecord>, joint: JointTable) -> Self {
        let satisfied = records.iter().all(|r| r.status == Status::Pass);
        NecessaryReport {
            bound,
            records,
            satisfied,
            joint,
        }
    }

    pub fn status(&self) -> Status {
        if self.satisfied {
            Status::Pass
        } else {
            Status::Violated
        }
    }

    pub fn record(&self, label: &str) -> Option<&InequalityRecord> {
        self.records.iter().find(|r| r.label == label)
    }
}

impl fmt::Display for NecessaryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bound={}", self.bound)?;
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        writeln!(f, "satisfied={}", self.satisfied)?;
        writeln!(f, "status={}", self.status())
    }
}

fn check_cardinality(t: &JointTable, axis: &str) -> Result<()> {
    let n = t
        .axis(axis)
        .map(|a| a.len())
        .ok_or_else(|| Error::UnknownAxis(axis.to_string()))?;
    if n > MAX_AUX {
        return Err(Error::Cardinality {
            axis: axis.to_string(),
            size: n,
            max: MAX_AUX,
        });
    }
    Ok(())
}

fn check_kernel(k: &ConditionalKernel, out: &[&str], allowed: &[&str], chain: &str) -> Result<()> {
    if k.out_names() != out {
        return Err(Error::chain(
            chain,
            format!("kernel must output {out:?}, got {:?}", k.out_names()),
        ));
    }
    if let Some(bad) = k.given_names().into_iter().find(|g| !allowed.contains(g)) {
        return Err(Error::chain(
            chain,
            format!("{out:?} may depend only on {allowed:?}, not on {bad}"),
        ));
    }
    Ok(())
}

/// Checks that every `p(x1, x2 | s1, s2, q)` lies in B'.
fn check_bprime(joint: &JointTable, rho_sources: f64) -> Result<()> {
    let nq = joint.axis(Q).map(|a| a.len()).unwrap_or(1);
    for q in 0..nq {
        let Some(slice) = joint.slice(&[(Q, q)])? else {
            continue;
        };
        let profile = correlation_profile(&slice)?;
        if let Some((entry, value)) = profile.first_violation(rho_sources, BPRIME_TOL) {
            return Err(Error::BprimeViolation {
                q: joint.axis(Q).unwrap().symbols()[q].clone(),
                entry,
                value,
                limit: rho_sources,
            });
        }
    }
    Ok(())
}

fn build_joint(
    scenario: &MarcScenario,
    aux: Factor<'_>,
    x12: &ConditionalKernel,
    x3: Option<&ConditionalKernel>,
    chain: &str,
) -> Result<JointTable> {
    let x3_default = JointTable::singleton(X3);
    let outputs;
    let mut parts: Vec<Factor> = vec![(&scenario.sources).into(), aux, x12.into()];
    match &scenario.channel {
        Channel::Primitive(p) => {
            if x3.is_some() {
                return Err(Error::chain(
                    chain,
                    "a primitive channel models the relay link by its capacity; X3 must be absent",
                ));
            }
            outputs = p.joint_output_kernel();
            parts.push((&outputs).into());
        }
        Channel::General(ch) => {
            parts.push(match x3 {
                Some(k) => k.into(),
                None => (&x3_default).into(),
            });
            parts.push(ch.law().into());
        }
    }
    compose(&parts)
}

/// MAC-type outer bound with time sharing `q` and inputs in B' for each `q`.
///
/// `x12` is `p(x1, x2 | s1, s2, q)`; `x3` is `p(x3 | x1, x2, s1, s2, q)`.
pub fn eval_thm4(
    scenario: &MarcScenario,
    q: &JointTable,
    x12: &ConditionalKernel,
    x3: Option<&ConditionalKernel>,
) -> Result<NecessaryReport> {
    const CHAIN: &str = "p(q)p(s1,s2,w)p(x1,x2|s1,s2,q)p(x3|x1,x2,s1,s2,q)";
    if q.axis_names() != [Q] {
        return Err(Error::chain(
            CHAIN,
            "time-sharing table must be over Q alone",
        ));
    }
    check_cardinality(q, Q)?;
    check_kernel(x12, &[X1, X2], &[S1, S2, Q], CHAIN)?;
    if let Some(k) = x3 {
        check_kernel(k, &[X3], &[X1, X2, S1, S2, Q], CHAIN)?;
    }
    let joint = build_joint(scenario, q.into(), x12, x3, CHAIN)?;
    check_bprime(&joint, maximal_correlation(&scenario.source_pair())?)?;
    let v = InfoView::new(scenario, joint);
    let records = vec![
        InequalityRecord::non_strict(
            "thm4.dst.S1",
            v.entropy(&[S1], &[S2, W])?,
            v.i_dest(&[X1, X3], &[S2, X2, W, Q])?,
        ),
        InequalityRecord::non_strict(
            "thm4.dst.S2",
            v.entropy(&[S2], &[S1, W])?,
            v.i_dest(&[X2, X3], &[S1, X1, W, Q])?,
        ),
        InequalityRecord::non_strict(
            "thm4.dst.S1S2",
            v.entropy(&[S1, S2], &[W])?,
            v.i_dest(&[X1, X2, X3], &[W, Q])?,
        ),
    ];
    Ok(NecessaryReport::new(
        Bound::Thm4,
        records,
        v.joint().clone(),
    ))
}

/// Broadcast-type outer bound with auxiliary `v` shared by the relay.
///
/// `v` is `p(v | sources)` (given axes among S1, S2, W, W3, possibly none);
/// `x12` is `p(x1, x2 | s1, s2, v)`; `x3` is `p(x3 | v)`.
pub fn eval_prop2_broadcast(
    scenario: &MarcScenario,
    v: &ConditionalKernel,
    x12: &ConditionalKernel,
    x3: Option<&ConditionalKernel>,
) -> Result<NecessaryReport> {
    const CHAIN: &str = "p(v,s1,s2,w,w3)p(x1,x2|s1,s2,v)p(x3|v)";
    check_kernel(v, &[V], &[S1, S2, W, W3], CHAIN)?;
    if v.out()[0].len() > MAX_AUX {
        return Err(Error::Cardinality {
            axis: V.to_string(),
            size: v.out()[0].len(),
            max: MAX_AUX,
        });
    }
    check_kernel(x12, &[X1, X2], &[S1, S2, V], CHAIN)?;
    if let Some(k) = x3 {
        check_kernel(k, &[X3], &[V], CHAIN)?;
    }
    let joint = build_joint(scenario, v.into(), x12, x3, CHAIN)?;
    let iv = InfoView::new(scenario, joint);
    let records = vec![
        InequalityRecord::non_strict(
            "prop2bc.dst.S1",
            iv.entropy(&[S1], &[S2, W, W3])?,
            iv.i_both(&[X1], &[S2, X2, W, V])?,
        ),
        InequalityRecord::non_strict(
            "prop2bc.dst.S2",
            iv.entropy(&[S2], &[S1, W, W3])?,
            iv.i_both(&[X2], &[S1, X1, W, V])?,
        ),
        InequalityRecord::non_strict(
            "prop2bc.dst.S1S2",
            iv.entropy(&[S1, S2], &[W, W3])?,
            iv.i_both(&[X1, X2], &[W, V])?,
        ),
    ];
    Ok(NecessaryReport::new(
        Bound::Prop2Bc,
        records,
        iv.joint().clone(),
    ))
}

/// Broadcast-type outer bound with time sharing and inputs in B' for each `q`.
///
/// `x12` is `p(x1, x2 | s1, s2, q)`; `x3` is `p(x3 | x1, x2, w3, q)`.
pub fn eval_thm5(
    scenario: &MarcScenario,
    q: &JointTable,
    x12: &ConditionalKernel,
    x3: Option<&ConditionalKernel>,
) -> Result<NecessaryReport> {
    const CHAIN: &str = "p(q)p(s1,s2,w,w3)p(x1,x2|s1,s2,q)p(x3|x1,x2,w3,q)";
    if q.axis_names() != [Q] {
        return Err(Error::chain(
            CHAIN,
            "time-sharing table must be over Q alone",
        ));
    }
    check_cardinality(q, Q)?;
    check_kernel(x12, &[X1, X2], &[S1, S2, Q], CHAIN)?;
    if let Some(k) = x3 {
        check_kernel(k, &[X3], &[X1, X2, W3, Q], CHAIN)?;
    }
    let joint = build_joint(scenario, q.into(), x12, x3, CHAIN)?;
    check_bprime(&joint, maximal_correlation(&scenario.source_pair())?)?;
    let v = InfoView::new(scenario, joint);
    let records = vec![
        InequalityRecord::non_strict(
            "thm5.dst.S1",
            v.entropy(&[S1], &[S2, W, W3])?,
            v.i_both(&[X1], &[S2, X2, X3, W, Q])?,
        ),
        InequalityRecord::non_strict(
            "thm5.dst.S2",
            v.entropy(&[S2], &[S1, W, W3])?,
            v.i_both(&[X2], &[S1, X1, X3, W, Q])?,
        ),
        InequalityRecord::non_strict(
            "thm5.dst.S1S2",
            v.entropy(&[S1, S2], &[W, W3])?,
            v.i_both(&[X1, X2], &[X3, W, Q])?,
        ),
    ];
    Ok(NecessaryReport::new(
        Bound::Thm5,
        records,
        v.joint().clone(),
    ))
}

/// Search space over a joint input distribution `p(x1, x2)`.
pub fn joint_input_space(ch: &Psomarc) -> SearchSpace {
    let mut cells = Vec::new();
    for a in ch.x1_alphabet().symbols() {
        for b in ch.x2_alphabet().symbols() {
            cells.push(format!("{a},{b}"));
        }
    }
    SearchSpace::new(vec![SimplexBlock::new("p(x1,x2)", cells)])
}

/// `max I(X1,X2;YS) + min{c3, I(X1,X2;Y3|YS)}` over unconstrained `p(x1, x2)`.
pub fn cutset_psomarc(ch: &Psomarc, spec: &SearchSpec) -> Result<SearchResult> {
    let fast = PsomarcFast::new(ch);
    maximize(&joint_input_space(ch), spec, |p| fast.cutset(p))
}

/// The cut-set objective restricted to `p(x1, x2)` whose maximal correlation
/// does not exceed that of the sources.
///
/// With `w3_equals_sources` the relay already knows both sources, the
/// broadcast cut is void and the objective reduces to `I(X1,X2;YS) + c3`.
pub fn i_new_psomarc(
    ch: &Psomarc,
    sources: &JointTable,
    spec: &SearchSpec,
    w3_equals_sources: bool,
) -> Result<SearchResult> {
    let pair = sources.marginalize(&[S1, S2])?.reorder(&[S1, S2])?;
    let rho_s = maximal_correlation(&pair)?;
    let fast = PsomarcFast::new(ch);
    let (n1, n2) = (fast.nx1, fast.nx2);
    let constraint =
        |p: &[f64]| maximal_correlation_dense(n1, n2, p).is_ok_and(|r| r <= rho_s + BPRIME_TOL);
    if w3_equals_sources {
        maximize_constrained(
            &joint_input_space(ch),
            spec,
            |p| fast.i_ys(p) + fast.c3,
            constraint,
        )
    } else {
        maximize_constrained(&joint_input_space(ch), spec, |p| fast.cutset(p), constraint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Alphabet;
    use approx::assert_abs_diff_eq;

    fn singleton_q() -> JointTable {
        JointTable::singleton(Q)
    }

    fn product_inputs(p1: f64, p2: f64) -> ConditionalKernel {
        ConditionalKernel::from_fn(
            vec![
                Alphabet::range(S1, 2),
                Alphabet::range(S2, 2),
                Alphabet::singleton(Q),
            ],
            vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)],
            |_, o| {
                let a = if o[0] == 0 { p1 } else { 1.0 - p1 };
                let b = if o[1] == 0 { p2 } else { 1.0 - p2 };
                a * b
            },
        )
        .unwrap()
    }

    #[test]
    fn thm4_at_quoted_inew_argmax() {
        let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, Some(0.1)).unwrap();
        // joint input (0.08, 0.41, 0.07, 0.44), expressed as a source-independent kernel
        let px = [0.08, 0.41, 0.07, 0.44];
        let x12 = ConditionalKernel::from_fn(
            vec![
                Alphabet::range(S1, 2),
                Alphabet::range(S2, 2),
                Alphabet::singleton(Q),
            ],
            vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)],
            |_, o| px[o[0] * 2 + o[1]],
        )
        .unwrap();
        let r = eval_thm4(&sc, &singleton_q(), &x12, None).unwrap();
        let sum = r.record("thm4.dst.S1S2").unwrap();
        let ch = sc.channel.as_psomarc().unwrap();
        let fast = PsomarcFast::new(ch);
        assert_abs_diff_eq!(sum.rhs, fast.i_ys(&px) + 0.1, epsilon = 1e-12);
        assert!((sum.rhs - 0.485).abs() < 0.01);
        // the matching broadcast cut
        let r5 = eval_thm5(&sc, &singleton_q(), &x12, None).unwrap();
        let bc = r5.record("thm5.dst.S1S2").unwrap();
        assert_abs_diff_eq!(
            bc.rhs,
            fast.i_ys(&px) + fast.i_y3_given_ys(&px),
            epsilon = 1e-12
        );
    }

    #[test]
    fn thm4_rejects_correlated_inputs_for_independent_sources() {
        let src = JointTable::uniform(vec![Alphabet::range(S1, 2), Alphabet::range(S2, 2)]);
        let sc =
            MarcScenario::new(src, Channel::Primitive(Psomarc::tables45(0.1).unwrap())).unwrap();
        let x12 = ConditionalKernel::from_fn(
            vec![
                Alphabet::range(S1, 2),
                Alphabet::range(S2, 2),
                Alphabet::singleton(Q),
            ],
            vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)],
            |_, o| if o[0] == o[1] { 0.5 } else { 0.0 },
        )
        .unwrap();
        let err = eval_thm4(&sc, &singleton_q(), &x12, None).unwrap_err();
        assert!(matches!(err, Error::BprimeViolation { .. }), "{err}");
        // product inputs pass the filter
        assert!(eval_thm4(&sc, &singleton_q(), &product_inputs(0.3, 0.6), None).is_ok());
    }

    #[test]
    fn q_cardinality_is_bounded() {
        let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, None).unwrap();
        let q = JointTable::uniform(vec![Alphabet::range(Q, 5)]);
        let x12 = ConditionalKernel::from_fn(
            vec![
                Alphabet::range(S1, 2),
                Alphabet::range(S2, 2),
                Alphabet::range(Q, 5),
            ],
            vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)],
            |_, _| 0.25,
        )
        .unwrap();
        assert!(matches!(
            eval_thm4(&sc, &q, &x12, None),
            Err(Error::Cardinality { .. })
        ));
    }

    #[test]
    fn w3_equal_to_sources_voids_broadcast_sum() {
        let src = sources_named(SourceName::Table6);
        let w3 = ConditionalKernel::deterministic(
            src.axes().to_vec(),
            vec![Alphabet::range(W3, 4)],
            |g| vec![g[0] * 2 + g[1]],
        )
        .unwrap();
        let with_w3 = compose(&[(&src).into(), (&w3).into()]).unwrap();
        let sc = MarcScenario::new(with_w3, Channel::Primitive(Psomarc::tables45(0.5).unwrap()))
            .unwrap();
        let r = eval_thm5(&sc, &singleton_q(), &product_inputs(0.4, 0.5), None).unwrap();
        let rec = r.record("thm5.dst.S1S2").unwrap();
        assert!(rec.lhs.abs() < 1e-12);
        assert_eq!(rec.status, Status::Pass);
    }

    #[test]
    fn prop2_degenerate_v() {
        let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, Some(0.2)).unwrap();
        let v = ConditionalKernel::unconditional(&JointTable::singleton(V));
        let x12 = ConditionalKernel::from_fn(
            vec![
                Alphabet::range(S1, 2),
                Alphabet::range(S2, 2),
                Alphabet::singleton(V),
            ],
            vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)],
            |g, o| {
                if o[0] == g[0] && o[1] == g[1] {
                    1.0
                } else {
                    0.0
                }
            },
        )
        .unwrap();
        let r = eval_prop2_broadcast(&sc, &v, &x12, None).unwrap();
        let direct = r
            .joint
            .mutual_information(&[X1], &[YS, Y3], &[S2, X2, W])
            .unwrap();
        assert_abs_diff_eq!(r.records[0].rhs, direct, epsilon = 1e-12);
    }

    #[test]
    fn cutset_table1_uniform_is_two() {
        let ch = Psomarc::table1();
        let fast = PsomarcFast::new(&ch);
        assert_abs_diff_eq!(fast.cutset(&[0.25; 4]), 2.0, epsilon = 1e-12);
        let r = cutset_psomarc(&ch, &SearchSpec::single(0.05)).unwrap();
        assert!(r.best_value >= 2.0 - 1e-12);
    }

    #[test]
    fn inew_independent_sources_forces_product_inputs() {
        let ch = Psomarc::tables45(0.1).unwrap();
        let src = JointTable::uniform(vec![Alphabet::range(S1, 2), Alphabet::range(S2, 2)]);
        let r = i_new_psomarc(&ch, &src, &SearchSpec::single(0.05), false).unwrap();
        let p = &r.argmax[0];
        assert!((p[0] * p[3] - p[1] * p[2]).abs() < 1e-9);
    }
}

//! Regression checks against the reference numbers of the worked examples.
//!
//! Each criterion returns one [`Outcome`]; tolerances are fixed here so the
//! CLI and the acceptance test report the same verdicts.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::models::*;
use crate::necessary::{cutset_psomarc, i_new_psomarc, joint_input_space};
use crate::objectives::PsomarcFast;
use crate::prob::{Alphabet, JointTable};
use crate::random;
use crate::search::{maximize, SearchResult, SearchSpec};
use crate::sim::{run_scheme, SimReport};
use crate::spectral::{
    correlation_profile, in_bprime, maximal_correlation, maximal_correlation_dense, svd,
    NormalizedJointMatrix, BPRIME_TOL,
};
use crate::sufficient::{
    eval_prop1, eval_thm1, eval_thm3, i_suff_psomarc, search_per_symbol, Status,
};

pub const FRONTIER_TOL: f64 = 0.01;
pub const EXACT_TOL: f64 = 1e-9;
pub const TWO_STAGE_TOL: f64 = 1e-6;
pub const ENTROPY_TOL: f64 = 1e-3;
pub const SPECTRAL_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion={} name={} result={} {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

fn near(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn table6() -> JointTable {
    sources_named(SourceName::Table6)
}

/// Cut-set frontier for the two relay-link capacities of the noisy example.
pub fn cutset_check(at_01: &Psomarc, at_02: &Psomarc) -> Result<Outcome> {
    let spec = SearchSpec::single(0.01);
    let a = cutset_psomarc(at_01, &spec)?.best_value;
    let b = cutset_psomarc(at_02, &spec)?.best_value;
    Ok(Outcome {
        id: 1,
        name: "cutset_frontier",
        pass: near(a, 0.516, FRONTIER_TOL) && near(b, 0.600, FRONTIER_TOL),
        detail: format!(
            "c3=0.1:{a:.6}(0.516+-{FRONTIER_TOL}) c3=0.2:{b:.6}(0.600+-{FRONTIER_TOL})"
        ),
    })
}

pub fn criterion1() -> Result<Outcome> {
    cutset_check(&Psomarc::tables45(0.1)?, &Psomarc::tables45(0.2)?)
}

pub fn criterion2() -> Result<Outcome> {
    let spec = SearchSpec::single(0.01);
    let src = table6();
    let mut parts = Vec::new();
    let mut pass = true;
    for (c3, w3, target) in [
        (0.1, false, 0.485),
        (0.2, false, 0.514),
        (0.5, false, 0.514),
        (0.5, true, 0.919),
    ] {
        let v = i_new_psomarc(&Psomarc::tables45(c3)?, &src, &spec, w3)?.best_value;
        pass &= near(v, target, FRONTIER_TOL);
        let tag = if w3 { ",w3=s1s2" } else { "" };
        parts.push(format!("c3={c3}{tag}:{v:.6}({target}+-{FRONTIER_TOL})"));
    }
    Ok(Outcome {
        id: 2,
        name: "inew_frontier",
        pass,
        detail: parts.join(" "),
    })
}

/// With `quick`, the single-stage comparison is skipped.
pub fn criterion3(quick: bool) -> Result<Outcome> {
    let sc = MarcScenario::new(table6(), Channel::Primitive(Psomarc::tables45(0.1)?))?;
    let two = i_suff_psomarc(&sc, &SearchSpec::default_for(4))?;
    let mut pass = near(two.best_value, 0.274, FRONTIER_TOL);
    let mut detail = format!("two_stage:{:.6}(0.274+-{FRONTIER_TOL})", two.best_value);
    if quick {
        detail.push_str(" single_stage:skipped");
    } else {
        let single = i_suff_psomarc(&sc, &SearchSpec::single(0.01))?;
        let gap = (single.best_value - two.best_value).abs();
        pass &= gap <= TWO_STAGE_TOL;
        detail.push_str(&format!(
            " single_stage:{:.9} gap:{gap:.2e}(<= {TWO_STAGE_TOL:e})",
            single.best_value
        ));
    }
    Ok(Outcome {
        id: 3,
        name: "isuff_frontier",
        pass,
        detail,
    })
}

pub fn criterion4() -> Result<Outcome> {
    let h2 = sources_named(SourceName::Table2).entropy(&[S1, S2], &[])?;
    let h6 = table6().entropy(&[S1, S2], &[])?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_rho: f64 = 0.0;
    for _ in 0..100 {
        let (n1, n2) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let a = random::table(&mut rng, vec![Alphabet::range(S1, n1)]);
        let b = random::table(&mut rng, vec![Alphabet::range(S2, n2)]);
        worst_rho = worst_rho.max(maximal_correlation(&a.product(&b)?)?);
    }
    let pass = near(h2, 3f64.log2(), 1e-12) && near(h6, 0.504, ENTROPY_TOL) && worst_rho <= 1e-10;
    Ok(Outcome {
        id: 4,
        name: "entropy_and_rho",
        pass,
        detail: format!(
            "H(table2)={h2:.12}(log2(3)) H(table6)={h6:.6}(0.504+-{ENTROPY_TOL}) max_rho_product={worst_rho:.2e}(<=1e-10)"
        ),
    })
}

/// With `quick`, the grid is 0.05 instead of 0.01.
pub fn criterion5(quick: bool) -> Result<Outcome> {
    let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None)?;
    let ch = sc.channel.as_psomarc().unwrap().clone();
    let step = if quick { 0.05 } else { 0.01 };
    let spec = SearchSpec::single(step);
    let joint = |f: &PsomarcFast, inputs: &crate::objectives::PerSymbolInputs, p: &[f64]| {
        let mut px = [0.0f64; 4];
        inputs.input_joint(p, &mut px);
        f.i_y3(&px)
    };
    let best = search_per_symbol(&sc, &spec, joint)?;
    let fast = PsomarcFast::new(&ch);
    let (space, inputs) = crate::sufficient::per_symbol_space(&sc, &ch);
    let mut at_ties = Vec::new();
    let mut deterministic = true;
    for &idx in &best.tie_points {
        let p: Vec<f64> = space.point_at(step, idx)?.concat();
        deterministic &= p.iter().all(|&v| v == 0.0 || v == 1.0);
        at_ties.push(inputs.average_given_sources(&p, |px| fast.i_ys(px)) + ch.c3);
    }
    let cond = search_per_symbol(&sc, &spec, |f, inputs, p| {
        inputs.average_given_sources(p, |px| f.i_y3(px))
    })?;
    let log3 = 3f64.log2();
    let pass = near(best.best_value, log3, EXACT_TOL)
        && best.ties == 2
        && deterministic
        && at_ties.iter().all(|&v| near(v, 1.0, EXACT_TOL) && v < log3)
        && near(cond.best_value, 1.5, FRONTIER_TOL);
    Ok(Outcome {
        id: 5,
        name: "relay_bottleneck",
        pass,
        detail: format!(
            "step={step} max_I(X;Y3)={:.12}(log2(3)+-{EXACT_TOL:e}) ties={}(2) deterministic={deterministic} I(X;YS|S)+C3={:?}(1) max_I(X;Y3|S)={:.6}(1.5+-{FRONTIER_TOL})",
            best.best_value, best.ties, at_ties, cond.best_value
        ),
    })
}

/// With `quick`, the simulation uses 1000 blocks per seed.
pub fn criterion6(quick: bool) -> Result<Outcome> {
    let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None)?;
    let blocks = if quick { 1_000 } else { 10_000 };
    let mut pes = Vec::new();
    let mut sim_ok = true;
    for seed in [1, 2, 3] {
        let r = run_scheme(&sc, 100, blocks, seed, Default::default())?;
        sim_ok &= r.relay_errors == 0 && r.destination_errors == 0 && r.empirical_pe() == 0.0;
        pes.push(r.empirical_pe());
    }
    let rep = eval_thm3(&sc, &EncoderChain::identity(&sc))?;
    let relay: Vec<f64> = rep.relay().iter().map(|r| r.margin).collect();
    let literal: Vec<f64> = rep.destination().iter().map(|r| r.margin).collect();
    let merged: Vec<f64> = rep.combined().iter().map(|r| r.margin).collect();
    let margins_ok = relay.iter().chain(&merged).all(|m| m.abs() <= EXACT_TOL);
    let pass = sim_ok && margins_ok && rep.status() == Status::Boundary;
    Ok(Outcome {
        id: 6,
        name: "zero_error_scheme",
        pass,
        detail: format!(
            "n=100 blocks={blocks} seeds=1,2,3 pe={pes:?} relay_margins={} merged_margins={} literal_dst_margins={} status={}",
            fmt_list(&relay),
            fmt_list(&merged),
            fmt_list(&literal),
            rep.status()
        ),
    })
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{:.9}", x + 0.0)).collect();
    format!("[{}]", parts.join(","))
}

/// With `quick`, the grid is 0.1 instead of 0.05.
pub fn criterion7(quick: bool) -> Result<Outcome> {
    let ch = Psomarc::table7();
    let fast = PsomarcFast::new(&ch);
    let src = sources_named(SourceName::Table8);
    let ps = src.mass().to_vec();
    let log6 = 6f64.log2();
    let h = src.entropy(&[S1, S2], &[])?;
    let cut = fast.cutset(&ps);
    let rho_s = maximal_correlation(&src)?;
    let feasible = maximal_correlation_dense(3, 3, &ps)? <= rho_s + BPRIME_TOL;
    let inew = if feasible { cut } else { f64::NAN };
    let step = if quick { 0.1 } else { 0.05 };
    let space = joint_input_space(&ch);
    let spec = SearchSpec::single(step);
    let max_ys = maximize(&space, &spec, |p| fast.i_ys(p))?.best_value;
    let max_h = maximize(&space, &spec, |p| fast.i_y3_given_ys(p))?.best_value;
    let pass = near(cut, log6, EXACT_TOL)
        && near(inew, log6, EXACT_TOL)
        && near(h, log6, 1e-12)
        && max_ys <= 3f64.log2() + EXACT_TOL
        && max_h <= 1.0 + EXACT_TOL;
    Ok(Outcome {
        id: 7,
        name: "ternary_tightness",
        pass,
        detail: format!(
            "cutset={cut:.12} inew={inew:.12} H={h:.12}(log2(6)) grid={step} max_I(X;YS)={max_ys:.12}(<=log2(3)) max_H(Y3|YS)={max_h:.12}(<=1)"
        ),
    })
}

/// Ordering of the sufficient conditions and of the two necessary frontiers.
pub fn criterion8(quick: bool) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cases = 200;
    let mut worst_thm1: f64 = f64::INFINITY;
    let mut worst_prop1: f64 = f64::INFINITY;
    let mut worst_relay: f64 = 0.0;
    for _ in 0..cases {
        let (sc, enc) = random::superposition_case(&mut rng);
        let t1 = eval_thm1(&sc, &enc)?;
        let t3 = eval_thm3(&sc, &enc)?;
        let p1 = eval_prop1(&sc, &enc)?;
        for k in 0..3 {
            let d3 = t3.destination()[k].margin;
            worst_thm1 = worst_thm1.min(d3 - t1.destination()[k].margin);
            worst_prop1 = worst_prop1.min(d3 - p1.destination()[k].margin);
            for other in [&t1, &p1] {
                let (a, b) = (&t3.relay()[k], &other.relay()[k]);
                worst_relay = worst_relay
                    .max((a.lhs - b.lhs).abs())
                    .max((a.rhs - b.rhs).abs());
            }
        }
    }
    let channels = 50;
    let step = if quick { 0.1 } else { 0.05 };
    let spec = SearchSpec::single(step);
    let mut worst_gap: f64 = f64::INFINITY;
    for _ in 0..channels {
        let ch = random::psomarc(&mut rng);
        let src = random::table(
            &mut rng,
            vec![Alphabet::range(S1, 2), Alphabet::range(S2, 2)],
        );
        let cut = cutset_psomarc(&ch, &spec)?.best_value;
        let inew = i_new_psomarc(&ch, &src, &spec, false)?.best_value;
        worst_gap = worst_gap.min(cut - inew);
    }
    let pass = worst_thm1 >= -EXACT_TOL
        && worst_prop1 >= -EXACT_TOL
        && worst_relay <= EXACT_TOL
        && worst_gap >= -EXACT_TOL;
    Ok(Outcome {
        id: 8,
        name: "ordering",
        pass,
        detail: format!(
            "cases={cases} min(thm3-thm1)={worst_thm1:.3e} min(thm3-prop1)={worst_prop1:.3e} max_relay_diff={worst_relay:.1e} channels={channels} grid={step} min(cutset-inew)={worst_gap:.3e}"
        ),
    })
}

/// Second singular value from the characteristic polynomial of `B^T B`.
///
/// `B^T B` has eigenvalue 1 with eigenvector `sqrt(p_y)`; removing that
/// component leaves the squared lower singular values as the spectrum.
pub fn sigma2_oracle(n: usize, mass: &[f64]) -> f64 {
    let m = NormalizedJointMatrix::from_dense(n, n, mass);
    let b = |i: usize, j: usize| m.entries[i * n + j];
    let g = |i: usize, j: usize| {
        (0..n).map(|k| b(k, i) * b(k, j)).sum::<f64>() - m.sqrt_py[i] * m.sqrt_py[j]
    };
    let tr: f64 = (0..n).map(|i| g(i, i)).sum();
    match n {
        2 => tr.max(0.0).sqrt(),
        3 => {
            // eigenvalues 0, a, b with a + b = tr and ab = sum of principal 2x2 minors
            let e2 = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) + g(0, 0) * g(2, 2) - g(0, 2) * g(2, 0)
                + g(1, 1) * g(2, 2)
                - g(1, 2) * g(2, 1);
            let disc = (tr * tr - 4.0 * e2).max(0.0).sqrt();
            ((tr + disc) / 2.0).max(0.0).sqrt()
        }
        _ => panic!("oracle covers 2x2 and 3x3"),
    }
}

fn positive_joint<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn criterion9() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let joints = 500;
    let (mut e_top, mut e_vec, mut e_oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..joints {
        let n = 2 + i % 2;
        let mass = positive_joint(&mut rng, n);
        let m = NormalizedJointMatrix::from_dense(n, n, &mass);
        let s = svd(&m)?;
        e_top = e_top.max((s.values[0] - 1.0).abs());
        let sign = if s.u[0][0] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            e_vec = e_vec
                .max((sign * s.u[0][k] - m.sqrt_px[k]).abs())
                .max((sign * s.v[0][k] - m.sqrt_py[k]).abs());
        }
        e_oracle = e_oracle.max((s.values[1] - sigma2_oracle(n, &mass)).abs());
    }
    // independent sources allow only independent inputs in B'
    let mut bprime_ok = true;
    let src = vec![Alphabet::range(S1, 2), Alphabet::range(S2, 2)];
    for _ in 0..100 {
        let s1 = random::table(&mut rng, vec![src[0].clone()]);
        let s2 = random::table(&mut rng, vec![src[1].clone()]);
        let sources = s1.product(&s2)?;
        let k = random::kernel(
            &mut rng,
            src.clone(),
            vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)],
        );
        let joint = crate::prob::compose(&[(&sources).into(), (&k).into()])?;
        let profile = correlation_profile(&joint)?;
        let big = profile.entries().iter().any(|(_, r)| *r > 1e-6);
        if big && in_bprime(&profile, 0.0, BPRIME_TOL) {
            bprime_ok = false;
        }
    }
    let pass =
        e_top <= SPECTRAL_TOL && e_vec <= SPECTRAL_TOL && e_oracle <= ORACLE_TOL && bprime_ok;
    Ok(Outcome {
        id: 9,
        name: "spectral",
        pass,
        detail: format!(
            "joints={joints} max|s1-1|={e_top:.1e} max|u1-sqrt(p)|={e_vec:.1e} max|s2-oracle|={e_oracle:.1e} independent_sources_reject={bprime_ok}"
        ),
    })
}

/// Results gathered for the thread-count comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminismProbe {
    pub searches: Vec<SearchResult>,
    pub sims: Vec<SimReport>,
}

pub fn determinism_probe(quick: bool) -> Result<DeterminismProbe> {
    let step = if quick { 0.05 } else { 0.01 };
    let spec = SearchSpec::single(step);
    let src = table6();
    let ch = Psomarc::tables45(0.1)?;
    let sc = MarcScenario::new(src.clone(), Channel::Primitive(ch.clone()))?;
    let suff_spec = if quick {
        SearchSpec::two_stage(0.05, 0.25)
    } else {
        SearchSpec::default_for(4)
    };
    let searches = vec![
        cutset_psomarc(&ch, &spec)?,
        i_new_psomarc(&ch, &src, &spec, false)?,
        i_suff_psomarc(&sc, &suff_spec)?,
    ];
    let t1 = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None)?;
    let sims = vec![run_scheme(
        &t1,
        100,
        if quick { 500 } else { 2000 },
        11,
        Default::default(),
    )?];
    Ok(DeterminismProbe { searches, sims })
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_n: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}

pub fn criterion10(quick: bool) -> Result<Outcome> {
    let base = with_threads(1, || determinism_probe(quick))?;
    let mut same = true;
    for n in [4, 8] {
        same &= with_threads(n, || determinism_probe(quick))? == base;
    }
    Ok(Outcome {
        id: 10,
        name: "determinism",
        pass: same,
        detail: format!(
            "threads=1,4,8 searches={} sims={} identical={same}",
            base.searches.len(),
            base.sims.len()
        ),
    })
}

type Check = Box<dyn Fn() -> Result<Outcome>>;

/// Runs every criterion in order; errors become failing outcomes.
pub fn run_all(quick: bool) -> Vec<Outcome> {
    let runs: [(u8, &'static str, Check); 10] = [
        (1, "cutset_frontier", Box::new(criterion1)),
        (2, "inew_frontier", Box::new(criterion2)),
        (3, "isuff_frontier", Box::new(move || criterion3(quick))),
        (4, "entropy_and_rho", Box::new(criterion4)),
        (5, "relay_bottleneck", Box::new(move || criterion5(quick))),
        (6, "zero_error_scheme", Box::new(move || criterion6(quick))),
        (7, "ternary_tightness", Box::new(move || criterion7(quick))),
        (8, "ordering", Box::new(move || criterion8(quick))),
        (9, "spectral", Box::new(criterion9)),
        (10, "determinism", Box::new(move || criterion10(quick))),
    ];
    runs.iter()
        .map(|(id, name, f)| {
            f().unwrap_or_else(|e| Outcome {
                id: *id,
                name,
                pass: false,
                detail: format!("error={e}"),
            })
        })
        .collect()
}

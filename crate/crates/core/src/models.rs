//! Channel and scenario models for the multiple-access relay channel.
//!
//! Two transmitters send `X1`, `X2`; the relay sends `X3` and observes `Y3`;
//! the destination observes `Y`. In the semi-orthogonal variant the
//! destination output splits into `(YS, YR)` with `YR` driven by `X3` alone.
//! The primitive variant replaces the `X3 -> YR` link by a noiseless pipe of
//! `c3` bits per use, so `X3` never appears in a joint table.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::prob::{compose, Alphabet, ConditionalKernel, Factor, JointTable, PROB_TOL};

pub const S1: &str = "S1";
pub const S2: &str = "S2";
pub const W: &str = "W";
pub const W3: &str = "W3";
pub const V1: &str = "V1";
pub const V2: &str = "V2";
pub const X1: &str = "X1";
pub const X2: &str = "X2";
pub const X3: &str = "X3";
pub const Y3: &str = "Y3";
pub const Y: &str = "Y";
pub const YS: &str = "YS";
pub const YR: &str = "YR";
pub const Q: &str = "Q";
pub const V: &str = "V";

/// Largest time-sharing alphabet accepted by the necessary-condition evaluators.
pub const MAX_AUX: usize = 4;

/// General channel law `p(y3, y | x1, x2, x3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarcChannel {
    law: ConditionalKernel,
    relay_outputs: Vec<String>,
    dest_outputs: Vec<String>,
}

impl MarcChannel {
    /// Law given `(X1, X2, X3)` with outputs `Y3` and `Y`.
    pub fn new(law: ConditionalKernel) -> Result<Self> {
        Self::with_outputs(law, &[Y3], &[Y])
    }

    /// Law with explicitly named relay and destination output axes.
    pub fn with_outputs(law: ConditionalKernel, relay: &[&str], dest: &[&str]) -> Result<Self> {
        let mut given = law.given_names();
        given.sort_unstable();
        if given != [X1, X2, X3] {
            return Err(Error::Invalid(format!(
                "channel law must be conditioned on X1, X2, X3, got {:?}",
                law.given_names()
            )));
        }
        let mut outs: Vec<&str> = relay.iter().chain(dest).copied().collect();
        outs.sort_unstable();
        let mut have = law.out_names();
        have.sort_unstable();
        if outs != have {
            return Err(Error::Invalid(format!(
                "channel outputs {:?} do not match relay {:?} + destination {:?}",
                law.out_names(),
                relay,
                dest
            )));
        }
        Ok(MarcChannel {
            law,
            relay_outputs: relay.iter().map(|s| s.to_string()).collect(),
            dest_outputs: dest.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Semi-orthogonal channel `p(yR | x3) p(y3, yS | x1, x2)`.
    pub fn somarc(relay_link: &ConditionalKernel, source_part: &ConditionalKernel) -> Result<Self> {
        if relay_link.given_names() != [X3] || relay_link.out_names() != [YR] {
            return Err(Error::Invalid("relay link must be YR | X3".into()));
        }
        if source_part.given_names() != [X1, X2] {
            return Err(Error::Invalid(
                "source part must be conditioned on (X1, X2)".into(),
            ));
        }
        let mut outs = source_part.out_names();
        outs.sort_unstable();
        if outs != [Y3, YS] {
            return Err(Error::Invalid("source part must output (Y3, YS)".into()));
        }
        let given = vec![
            source_part.given()[0].clone(),
            source_part.given()[1].clone(),
            relay_link.given()[0].clone(),
        ];
        let mut out = source_part.out().to_vec();
        out.push(relay_link.out()[0].clone());
        let law = ConditionalKernel::from_fn(given, out, |g, o| {
            let src = source_part
                .prob(&[g[0], g[1]], &o[..o.len() - 1])
                .unwrap_or(0.0);
            let link = relay_link.prob(&[g[2]], &[o[o.len() - 1]]).unwrap_or(0.0);
            src * link
        })?;
        Self::with_outputs(law, &[Y3], &[YS, YR])
    }

    pub fn law(&self) -> &ConditionalKernel {
        &self.law
    }

    pub fn relay_outputs(&self) -> Vec<&str> {
        self.relay_outputs.iter().map(String::as_str).collect()
    }

    pub fn dest_outputs(&self) -> Vec<&str> {
        self.dest_outputs.iter().map(String::as_str).collect()
    }

    /// Cellwise check of `p(yR, yS, y3 | x) = p(yR | x3) p(yS, y3 | x1, x2)`.
    pub fn check_somarc_factorization(&self) -> Result<()> {
        let names = self.law.out_names();
        let Some(r_pos) = names.iter().position(|n| *n == YR) else {
            return Err(Error::chain("somarc", "no YR output"));
        };
        let gnames = self.law.given_names();
        let pos = |n: &str| gnames.iter().position(|g| *g == n).unwrap();
        let (p1, p2, p3) = (pos(X1), pos(X2), pos(X3));
        let gshape: Vec<usize> = self.law.given().iter().map(Alphabet::len).collect();
        let oshape: Vec<usize> = self.law.out().iter().map(Alphabet::len).collect();
        let n_out: usize = oshape.iter().product();
        let n_r = oshape[r_pos];
        let r_stride: usize = oshape[r_pos + 1..].iter().product();
        let idx_of = |g: &[usize]| self.law.row_index(g);

        let mut g = vec![0usize; 3];
        for a in 0..gshape[p1] {
            for b in 0..gshape[p2] {
                for c in 0..gshape[p3] {
                    g[p1] = a;
                    g[p2] = b;
                    g[p3] = c;
                    let row = self.law.rows()[idx_of(&g)]
                        .as_ref()
                        .ok_or_else(|| Error::chain("somarc", "absent channel row"))?;
                    // marginals of this row
                    let mut pr = vec![0.0; n_r];
                    let mut rest = vec![0.0; n_out / n_r];
                    for (k, &p) in row.iter().enumerate() {
                        let r = (k / r_stride) % n_r;
                        let other = (k / (r_stride * n_r)) * r_stride + k % r_stride;
                        pr[r] += p;
                        rest[other] += p;
                    }
                    for (k, &p) in row.iter().enumerate() {
                        let r = (k / r_stride) % n_r;
                        let other = (k / (r_stride * n_r)) * r_stride + k % r_stride;
                        if (p - pr[r] * rest[other]).abs() > PROB_TOL {
                            return Err(Error::chain(
                                "somarc",
                                format!("YR not independent of the source part at input {g:?}"),
                            ));
                        }
                    }
                    // YR marginal may depend only on x3, the rest only on (x1, x2)
                    let mut g0 = g.clone();
                    g0[p1] = 0;
                    g0[p2] = 0;
                    let ref_row = self.law.rows()[idx_of(&g0)].as_ref().unwrap();
                    let mut pr0 = vec![0.0; n_r];
                    for (k, &p) in ref_row.iter().enumerate() {
                        pr0[(k / r_stride) % n_r] += p;
                    }
                    let mut g1 = g.clone();
                    g1[p3] = 0;
                    let ref_row = self.law.rows()[idx_of(&g1)].as_ref().unwrap();
                    let mut rest0 = vec![0.0; n_out / n_r];
                    for (k, &p) in ref_row.iter().enumerate() {
                        rest0[(k / (r_stride * n_r)) * r_stride + k % r_stride] += p;
                    }
                    let drift = pr
                        .iter()
                        .zip(&pr0)
                        .chain(rest.iter().zip(&rest0))
                        .any(|(x, y)| (x - y).abs() > PROB_TOL);
                    if drift {
                        return Err(Error::chain(
                            "somarc",
                            format!("marginal depends on the wrong inputs at {g:?}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Primitive semi-orthogonal channel: kernels `Y3 | (X1, X2)` and `YS | (X1, X2)`
/// plus a relay-to-destination pipe of `c3` bits per use.
#[derive(Debug, Clone, PartialEq)]
pub struct Psomarc {
    pub y3_map: ConditionalKernel,
    pub ys_map: ConditionalKernel,
    pub c3: f64,
}

fn binary_inputs() -> Vec<Alphabet> {
    vec![Alphabet::range(X1, 2), Alphabet::range(X2, 2)]
}

fn lookup_map(
    inputs: Vec<Alphabet>,
    out: Alphabet,
    f: impl Fn(usize, usize) -> usize,
) -> ConditionalKernel {
    ConditionalKernel::deterministic(inputs, vec![out], |g| vec![f(g[0], g[1])])
        .expect("lookup maps are valid kernels")
}

fn binary_table(out: &str, p0: [f64; 4]) -> ConditionalKernel {
    ConditionalKernel::from_fn(binary_inputs(), vec![Alphabet::range(out, 2)], |g, o| {
        let p = p0[g[0] * 2 + g[1]];
        if o[0] == 0 {
            p
        } else {
            1.0 - p
        }
    })
    .expect("tabulated kernels are valid")
}

impl Psomarc {
    pub fn new(y3_map: ConditionalKernel, ys_map: ConditionalKernel, c3: f64) -> Result<Self> {
        if !(c3 >= 0.0) || !c3.is_finite() {
            return Err(Error::Invalid(format!(
                "relay link capacity must be >= 0, got {c3}"
            )));
        }
        for (k, out) in [(&y3_map, Y3), (&ys_map, YS)] {
            if k.given_names() != [X1, X2] || k.out_names() != [out] {
                return Err(Error::Invalid(format!(
                    "{out} map must be {out} | (X1, X2), got {:?} | {:?}",
                    k.out_names(),
                    k.given_names()
                )));
            }
            if k.absent_rows() > 0 {
                return Err(Error::Invalid(format!("{out} map has undefined rows")));
            }
        }
        if y3_map.given() != ys_map.given() {
            return Err(Error::Invalid(
                "Y3 and YS maps use different input alphabets".into(),
            ));
        }
        Ok(Psomarc { y3_map, ys_map, c3 })
    }

    /// Deterministic binary-adder-like channel with `c3 = 1`.
    pub fn table1() -> Self {
        let y3 = lookup_map(binary_inputs(), Alphabet::range(Y3, 3), |a, b| a + b);
        let ys = lookup_map(binary_inputs(), Alphabet::range(YS, 2), |a, _| a);
        Psomarc::new(y3, ys, 1.0).unwrap()
    }

    /// Noisy binary channel of the correlation-bound example.
    pub fn tables45(c3: f64) -> Result<Self> {
        Psomarc::new(
            binary_table(Y3, [0.87, 0.25, 0.51, 0.24]),
            binary_table(YS, [0.23, 0.19, 0.65, 0.91]),
            c3,
        )
    }

    /// Ternary deterministic channel with `c3 = 1`.
    pub fn table7() -> Self {
        let inputs = || vec![Alphabet::range(X1, 3), Alphabet::range(X2, 3)];
        let pair = |a: usize, b: usize| match (a, b) {
            (0, 0) => (0, 0),
            (1, 1) => (2, 2),
            (1, 2) => (3, 1),
            (2, 0) => (4, 2),
            (2, 2) => (5, 0),
            _ => (1, 1),
        };
        let y3 = lookup_map(inputs(), Alphabet::range(Y3, 6), |a, b| pair(a, b).0);
        let ys = lookup_map(inputs(), Alphabet::range(YS, 3), |a, b| pair(a, b).1);
        Psomarc::new(y3, ys, 1.0).unwrap()
    }

    pub fn with_c3(mut self, c3: f64) -> Result<Self> {
        if !(c3 >= 0.0) || !c3.is_finite() {
            return Err(Error::Invalid(format!(
                "relay link capacity must be >= 0, got {c3}"
            )));
        }
        self.c3 = c3;
        Ok(self)
    }

    pub fn x1_alphabet(&self) -> &Alphabet {
        &self.y3_map.given()[0]
    }

    pub fn x2_alphabet(&self) -> &Alphabet {
        &self.y3_map.given()[1]
    }

    /// `p(y3, yS | x1, x2)`; the two outputs are conditionally independent.
    pub fn joint_output_kernel(&self) -> ConditionalKernel {
        let out = vec![self.y3_map.out()[0].clone(), self.ys_map.out()[0].clone()];
        ConditionalKernel::from_fn(self.y3_map.given().to_vec(), out, |g, o| {
            self.y3_map.prob(g, &o[..1]).unwrap() * self.ys_map.prob(g, &o[1..]).unwrap()
        })
        .expect("product of valid kernels")
    }

    pub fn is_deterministic(&self) -> bool {
        self.y3_map.is_deterministic() && self.ys_map.is_deterministic()
    }

    /// Deterministic output of `map` at `(x1, x2)`.
    fn det_output(map: &ConditionalKernel, x1: usize, x2: usize) -> Result<usize> {
        let row = map.row(&[x1, x2]).expect("rows checked at construction");
        row.iter().position(|&p| p == 1.0).ok_or_else(|| {
            Error::NonDeterministic(format!("{} map at ({x1},{x2})", map.out_names()[0]))
        })
    }

    pub fn y3_of(&self, x1: usize, x2: usize) -> Result<usize> {
        Self::det_output(&self.y3_map, x1, x2)
    }

    pub fn ys_of(&self, x1: usize, x2: usize) -> Result<usize> {
        Self::det_output(&self.ys_map, x1, x2)
    }

    /// Preimage `{(x1, x2) : yS(x1, x2) = ys}` in lexicographic order.
    pub fn theta(&self, ys: usize) -> Result<Vec<(usize, usize)>> {
        if !self.ys_map.is_deterministic() {
            return Err(Error::NonDeterministic("YS map is stochastic".into()));
        }
        if ys >= self.ys_map.out()[0].len() {
            return Err(Error::Invalid(format!("YS symbol {ys} out of range")));
        }
        let mut out = Vec::new();
        for a in 0..self.x1_alphabet().len() {
            for b in 0..self.x2_alphabet().len() {
                if self.ys_of(a, b)? == ys {
                    out.push((a, b));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    General(MarcChannel),
    Primitive(Psomarc),
}

impl Channel {
    pub fn as_psomarc(&self) -> Option<&Psomarc> {
        match self {
            Channel::Primitive(p) => Some(p),
            Channel::General(_) => None,
        }
    }
}

/// Named source tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceName {
    Table2,
    Table6,
    Table8,
}

impl FromStr for SourceName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table2" => Ok(SourceName::Table2),
            "table6" => Ok(SourceName::Table6),
            "table8" => Ok(SourceName::Table8),
            _ => Err(Error::Invalid(format!(
                "unknown source table `{s}` (expected table2, table6 or table8)"
            ))),
        }
    }
}

impl fmt::Display for SourceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceName::Table2 => "table2",
            SourceName::Table6 => "table6",
            SourceName::Table8 => "table8",
        })
    }
}

/// Named channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelName {
    Table1,
    Tables45,
    Table7,
}

impl FromStr for ChannelName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(ChannelName::Table1),
            "tables45" => Ok(ChannelName::Tables45),
            "table7" => Ok(ChannelName::Table7),
            _ => Err(Error::Invalid(format!(
                "unknown channel `{s}` (expected table1, tables45 or table7)"
            ))),
        }
    }
}

impl fmt::Display for ChannelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelName::Table1 => "table1",
            ChannelName::Tables45 => "tables45",
            ChannelName::Table7 => "table7",
        })
    }
}

impl ChannelName {
    /// Builds the channel; `c3` overrides the default link capacity when given.
    pub fn build(self, c3: Option<f64>) -> Result<Psomarc> {
        match self {
            ChannelName::Table1 => Psomarc::table1().with_c3(c3.unwrap_or(1.0)),
            ChannelName::Tables45 => Psomarc::tables45(c3.unwrap_or(0.1)),
            ChannelName::Table7 => Psomarc::table7().with_c3(c3.unwrap_or(1.0)),
        }
    }
}

/// Source joint `p(s1, s2)` of a named table.
pub fn sources_named(name: SourceName) -> JointTable {
    let (n, mass): (usize, Vec<f64>) = match name {
        SourceName::Table2 => (2, vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0]),
        SourceName::Table6 => (2, vec![0.0, 0.04, 0.045, 0.915]),
        SourceName::Table8 => {
            let s = 1.0 / 6.0;
            (3, vec![s, s, 0.0, 0.0, s, s, s, 0.0, s])
        }
    };
    JointTable::new(vec![Alphabet::range(S1, n), Alphabet::range(S2, n)], mass)
        .expect("named source tables are valid")
}

/// Sources, optional side information and the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarcScenario {
    /// Joint over `(S1, S2, W, W3)`; missing side information is a singleton axis.
    pub sources: JointTable,
    pub channel: Channel,
}

impl MarcScenario {
    /// Accepts a source joint over `S1`, `S2` and optionally `W`, `W3`.
    pub fn new(sources: JointTable, channel: Channel) -> Result<Self> {
        for a in sources.axis_names() {
            if ![S1, S2, W, W3].contains(&a) {
                return Err(Error::Invalid(format!("unexpected source axis `{a}`")));
            }
        }
        if !sources.has_axis(S1) || !sources.has_axis(S2) {
            return Err(Error::Invalid("sources must carry S1 and S2".into()));
        }
        let mut full = sources;
        for side in [W, W3] {
            if !full.has_axis(side) {
                full = full.product(&JointTable::singleton(side))?;
            }
        }
        let sources = full.reorder(&[S1, S2, W, W3])?;
        Ok(MarcScenario { sources, channel })
    }

    pub fn named(channel: ChannelName, sources: SourceName, c3: Option<f64>) -> Result<Self> {
        Self::new(
            sources_named(sources),
            Channel::Primitive(channel.build(c3)?),
        )
    }

    pub fn s1_alphabet(&self) -> &Alphabet {
        self.sources.axis(S1).unwrap()
    }

    pub fn s2_alphabet(&self) -> &Alphabet {
        self.sources.axis(S2).unwrap()
    }

    pub fn source_pair(&self) -> JointTable {
        self.sources.marginalize(&[S1, S2]).unwrap()
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self.channel, Channel::Primitive(_))
    }
}

/// Input distribution chain shared by the sufficient-condition evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderChain {
    pub v1: Option<JointTable>,
    pub v2: Option<JointTable>,
    pub x1: ConditionalKernel,
    pub x2: ConditionalKernel,
    /// Relay input; must be `None` for a primitive channel.
    pub x3: Option<ConditionalKernel>,
}

impl EncoderChain {
    /// Per-symbol encoders `p(x1|s1) p(x2|s2)` with no auxiliaries and no relay input.
    pub fn per_symbol(x1: ConditionalKernel, x2: ConditionalKernel) -> Self {
        EncoderChain {
            v1: None,
            v2: None,
            x1,
            x2,
            x3: None,
        }
    }

    /// `x_i = s_i`, with input alphabets copied from the sources.
    pub fn identity(scenario: &MarcScenario) -> Self {
        EncoderChain::per_symbol(
            ConditionalKernel::identity(scenario.s1_alphabet(), X1),
            ConditionalKernel::identity(scenario.s2_alphabet(), X2),
        )
    }

    /// Per-symbol encoders built from `Pr(X_i = 0 | S_i = s)` on binary alphabets.
    pub fn binary(p1: [f64; 2], p2: [f64; 2]) -> Result<Self> {
        let k = |s: &str, x: &str, p: [f64; 2]| {
            ConditionalKernel::new(
                vec![Alphabet::range(s, 2)],
                vec![Alphabet::range(x, 2)],
                vec![vec![p[0], 1.0 - p[0]], vec![p[1], 1.0 - p[1]]],
            )
        };
        Ok(EncoderChain::per_symbol(k(S1, X1, p1)?, k(S2, X2, p2)?))
    }
}

/// Dependence structure an encoder chain must follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    /// `p(v1) p(x1|s1,v1) p(v2) p(x2|s2,v2) p(x3|v1,v2)`.
    Superposition,
    /// `p(x1|s1) p(x2|s2) p(x3|s1,s2)`.
    RelayOnSources,
    /// `p(v1) p(x1|v1) p(v2) p(x2|v2) p(x3|v1,v2)`.
    Separation,
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factorization::Superposition => "p(v1)p(x1|s1,v1)p(v2)p(x2|s2,v2)p(x3|v1,v2)",
            Factorization::RelayOnSources => "p(x1|s1)p(x2|s2)p(x3|s1,s2)",
            Factorization::Separation => "p(v1)p(x1|v1)p(v2)p(x2|v2)p(x3|v1,v2)",
        })
    }
}

fn check_kernel(
    k: &ConditionalKernel,
    out: &str,
    allowed: &[&str],
    fact: Factorization,
) -> Result<()> {
    if k.out_names() != [out] {
        return Err(Error::chain(
            &fact.to_string(),
            format!("encoder for {out} outputs {:?}", k.out_names()),
        ));
    }
    if let Some(bad) = k.given_names().into_iter().find(|g| !allowed.contains(g)) {
        return Err(Error::chain(
            &fact.to_string(),
            format!("{out} may depend only on {allowed:?}, not on {bad}"),
        ));
    }
    Ok(())
}

fn aux_table(t: &Option<JointTable>, name: &str, fact: Factorization) -> Result<JointTable> {
    match t {
        None => Ok(JointTable::singleton(name)),
        Some(t) if t.axis_names() == [name] => Ok(t.clone()),
        Some(t) => Err(Error::chain(
            &fact.to_string(),
            format!(
                "auxiliary table must be over {name} alone, got {:?}",
                t.axis_names()
            ),
        )),
    }
}

/// Validates an encoder chain against a factorization.
pub fn validate_chain(
    scenario: &MarcScenario,
    enc: &EncoderChain,
    fact: Factorization,
) -> Result<()> {
    let (a1, a2, a3): (&[&str], &[&str], &[&str]) = match fact {
        Factorization::Superposition => (&[S1, V1], &[S2, V2], &[V1, V2]),
        Factorization::RelayOnSources => (&[S1], &[S2], &[S1, S2]),
        Factorization::Separation => (&[V1], &[V2], &[V1, V2]),
    };
    check_kernel(&enc.x1, X1, a1, fact)?;
    check_kernel(&enc.x2, X2, a2, fact)?;
    if let Some(k) = &enc.x3 {
        if scenario.is_primitive() {
            return Err(Error::chain(
                &fact.to_string(),
                "a primitive channel models the relay link by its capacity; X3 must be absent",
            ));
        }
        check_kernel(k, X3, a3, fact)?;
    }
    if fact == Factorization::RelayOnSources {
        for (t, name) in [(&enc.v1, V1), (&enc.v2, V2)] {
            if t.as_ref().is_some_and(|t| t.mass().len() > 1) {
                return Err(Error::chain(
                    &fact.to_string(),
                    format!("{name} is not part of this chain"),
                ));
            }
        }
    }
    aux_table(&enc.v1, V1, fact)?;
    aux_table(&enc.v2, V2, fact)?;
    Ok(())
}

/// Full joint of sources, auxiliaries, inputs and channel outputs.
///
/// For a primitive channel the joint ends with `(Y3, YS)` and has no `X3`.
pub fn induced_joint(
    scenario: &MarcScenario,
    enc: &EncoderChain,
    fact: Factorization,
) -> Result<JointTable> {
    validate_chain(scenario, enc, fact)?;
    let v1 = aux_table(&enc.v1, V1, fact)?;
    let v2 = aux_table(&enc.v2, V2, fact)?;
    let x3_default = JointTable::singleton(X3);
    let mut parts: Vec<Factor> = vec![
        (&scenario.sources).into(),
        (&v1).into(),
        (&v2).into(),
        (&enc.x1).into(),
        (&enc.x2).into(),
    ];
    let outputs;
    match &scenario.channel {
        Channel::Primitive(p) => {
            outputs = p.joint_output_kernel();
            parts.push((&outputs).into());
        }
        Channel::General(ch) => {
            match &enc.x3 {
                Some(k) => parts.push(k.into()),
                None => parts.push((&x3_default).into()),
            }
            parts.push(ch.law().into());
        }
    }
    compose(&parts).map_err(|e| match e {
        Error::DanglingDependency(a) => Error::chain(
            &fact.to_string(),
            format!("{a} is not available in this chain"),
        ),
        other => other,
    })
}

/// Information measures on an induced joint, with the relay link of a
/// primitive channel abstracted as `c3`.
///
/// `Y` in every expression means the full destination output. On a primitive
/// channel `Y = (YS, YR)` with `YR` a function of `X3` alone, so
/// `I(A; Y | B) = I(A \ X3; YS | B \ X3) + c3 * [X3 in A]`.
#[derive(Debug, Clone)]
pub struct InfoView {
    joint: JointTable,
    c3: Option<f64>,
    dest: Vec<String>,
    relay: Vec<String>,
}

impl InfoView {
    pub fn new(scenario: &MarcScenario, joint: JointTable) -> Self {
        let (c3, dest, relay) = match &scenario.channel {
            Channel::Primitive(p) => (Some(p.c3), vec![YS.to_string()], vec![Y3.to_string()]),
            Channel::General(ch) => (
                None,
                ch.dest_outputs().iter().map(|s| s.to_string()).collect(),
                ch.relay_outputs().iter().map(|s| s.to_string()).collect(),
            ),
        };
        InfoView {
            joint,
            c3,
            dest,
            relay,
        }
    }

    pub fn joint(&self) -> &JointTable {
        &self.joint
    }

    pub fn is_primitive(&self) -> bool {
        self.c3.is_some()
    }

    pub fn entropy(&self, of: &[&str], given: &[&str]) -> Result<f64> {
        self.joint.entropy(of, given)
    }

    /// `I(a; outputs | given)` where outputs are the destination and/or relay observations.
    pub fn info(&self, a: &[&str], dest: bool, relay: bool, given: &[&str]) -> Result<f64> {
        let mut b: Vec<&str> = Vec::new();
        if relay {
            b.extend(self.relay.iter().map(String::as_str));
        }
        if dest {
            b.extend(self.dest.iter().map(String::as_str));
        }
        match self.c3 {
            None => self.joint.mutual_information(a, &b, given),
            Some(c3) => {
                let has_x3 = a.contains(&X3);
                let a2: Vec<&str> = a.iter().copied().filter(|n| *n != X3).collect();
                let g2: Vec<&str> = given.iter().copied().filter(|n| *n != X3).collect();
                let base = if a2.is_empty() {
                    0.0
                } else {
                    self.joint.mutual_information(&a2, &b, &g2)?
                };
                Ok(base + if has_x3 && dest { c3 } else { 0.0 })
            }
        }
    }

    /// `I(a; Y | given)`.
    pub fn i_dest(&self, a: &[&str], given: &[&str]) -> Result<f64> {
        self.info(a, true, false, given)
    }

    /// `I(a; Y3 | given)`.
    pub fn i_relay(&self, a: &[&str], given: &[&str]) -> Result<f64> {
        self.info(a, false, true, given)
    }

    /// `I(a; Y, Y3 | given)`.
    pub fn i_both(&self, a: &[&str], given: &[&str]) -> Result<f64> {
        self.info(a, true, true, given)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn table1_maps() {
        let c = Psomarc::table1();
        assert_eq!((c.y3_of(1, 1).unwrap(), c.ys_of(1, 1).unwrap()), (2, 1));
        assert_eq!((c.y3_of(0, 0).unwrap(), c.ys_of(0, 0).unwrap()), (0, 0));
        assert_eq!((c.y3_of(0, 1).unwrap(), c.ys_of(0, 1).unwrap()), (1, 0));
        assert_eq!((c.y3_of(1, 0).unwrap(), c.ys_of(1, 0).unwrap()), (1, 1));
        assert_eq!(c.c3, 1.0);
        assert!(c.is_deterministic());
    }

    #[test]
    fn tables45_entries() {
        let c = Psomarc::tables45(0.1).unwrap();
        assert_abs_diff_eq!(c.y3_map.prob(&[0, 1], &[1]).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c.y3_map.prob(&[0, 0], &[0]).unwrap(), 0.87, epsilon = 1e-15);
        assert_abs_diff_eq!(c.ys_map.prob(&[1, 1], &[1]).unwrap(), 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(c.ys_map.prob(&[0, 0], &[0]).unwrap(), 0.23, epsilon = 1e-15);
        for row in c.joint_output_kernel().rows().iter().flatten() {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(!c.is_deterministic());
        assert!(c.theta(0).is_err());
        assert!(Psomarc::tables45(-1.0).is_err());
    }

    #[test]
    fn table7_maps() {
        let c = Psomarc::table7();
        assert_eq!((c.y3_of(1, 2).unwrap(), c.ys_of(1, 2).unwrap()), (3, 1));
        assert_eq!((c.y3_of(2, 2).unwrap(), c.ys_of(2, 2).unwrap()), (5, 0));
        assert_eq!((c.y3_of(0, 1).unwrap(), c.ys_of(0, 1).unwrap()), (1, 1));
        assert_eq!(c.theta(2).unwrap(), vec![(1, 1), (2, 0)]);
    }

    #[test]
    fn theta_examples() {
        let c = Psomarc::table1();
        assert_eq!(c.theta(0).unwrap(), vec![(0, 0), (0, 1)]);
        assert_eq!(c.theta(1).unwrap(), vec![(1, 0), (1, 1)]);
    }

    #[test]
    fn named_sources() {
        let t2 = sources_named(SourceName::Table2);
        assert_eq!(t2.get(&[1, 0]), 0.0);
        assert_eq!(sources_named(SourceName::Table6).get(&[1, 1]), 0.915);
        let t8 = sources_named(SourceName::Table8);
        assert_eq!(t8.get(&[2, 1]), 0.0);
        assert_abs_diff_eq!(t8.get(&[1, 2]), 1.0 / 6.0, epsilon = 1e-15);
        assert!("table9".parse::<SourceName>().is_err());
        assert_eq!(
            "tables45".parse::<ChannelName>().unwrap(),
            ChannelName::Tables45
        );
    }

    #[test]
    fn identity_encoders_on_table1() {
        let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None).unwrap();
        let enc = EncoderChain::identity(&sc);
        let j = induced_joint(&sc, &enc, Factorization::Superposition).unwrap();
        let y3 = j.marginalize(&[Y3]).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(y3.mass()[k], 1.0 / 3.0, epsilon = 1e-15);
        }
        let back = j.marginalize(&[S1, S2, W, W3]).unwrap();
        assert_eq!(back.max_abs_diff(&sc.sources).unwrap(), 0.0);
        assert_abs_diff_eq!(
            j.mutual_information(&[X1, X2], &[Y3], &[]).unwrap(),
            3f64.log2(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn singleton_aux_degenerates() {
        let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, None).unwrap();
        let enc = EncoderChain::binary([0.3, 0.6], [0.8, 0.1]).unwrap();
        let j = induced_joint(&sc, &enc, Factorization::Superposition).unwrap();
        assert_eq!(j.axis(V1).unwrap().len(), 1);
        assert!(j.mutual_information(&[X1], &[S2, X2], &[S1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn separation_chain_decouples_sources() {
        let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, None).unwrap();
        let v = |n: &str| JointTable::new(vec![Alphabet::range(n, 2)], vec![0.4, 0.6]).unwrap();
        let k = |g: &str, o: &str| {
            ConditionalKernel::new(
                vec![Alphabet::range(g, 2)],
                vec![Alphabet::range(o, 2)],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            )
            .unwrap()
        };
        let enc = EncoderChain {
            v1: Some(v(V1)),
            v2: Some(v(V2)),
            x1: k(V1, X1),
            x2: k(V2, X2),
            x3: None,
        };
        let j = induced_joint(&sc, &enc, Factorization::Separation).unwrap();
        assert!(j.mutual_information(&[X1], &[S1], &[V1]).unwrap().abs() < 1e-12);
        // a source-dependent encoder is rejected by the separation chain
        let bad = EncoderChain::binary([0.3, 0.6], [0.8, 0.1]).unwrap();
        assert!(matches!(
            induced_joint(&sc, &bad, Factorization::Separation),
            Err(Error::ChainMismatch { .. })
        ));
    }

    #[test]
    fn primitive_rejects_relay_input() {
        let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None).unwrap();
        let mut enc = EncoderChain::identity(&sc);
        enc.x3 = Some(
            ConditionalKernel::new(vec![], vec![Alphabet::range(X3, 2)], vec![vec![0.5, 0.5]])
                .unwrap(),
        );
        assert!(matches!(
            induced_joint(&sc, &enc, Factorization::Superposition),
            Err(Error::ChainMismatch { .. })
        ));
    }

    #[test]
    fn somarc_factorization_check() {
        let link = ConditionalKernel::new(
            vec![Alphabet::range(X3, 2)],
            vec![Alphabet::range(YR, 2)],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        )
        .unwrap();
        let src = Psomarc::tables45(0.1).unwrap().joint_output_kernel();
        let ch = MarcChannel::somarc(&link, &src).unwrap();
        ch.check_somarc_factorization().unwrap();
        assert_eq!(ch.dest_outputs(), vec![YS, YR]);

        // YR leaking x1 breaks the factorization
        let leaky = ConditionalKernel::from_fn(
            ch.law().given().to_vec(),
            ch.law().out().to_vec(),
            |g, o| if o[2] == g[0] { 0.25 } else { 0.0 },
        )
        .unwrap();
        let bad = MarcChannel::with_outputs(leaky, &[Y3], &[YS, YR]).unwrap();
        assert!(bad.check_somarc_factorization().is_err());
    }

    #[test]
    fn info_view_abstracts_relay_link() {
        let sc = MarcScenario::named(ChannelName::Table1, SourceName::Table2, None).unwrap();
        let j = induced_joint(
            &sc,
            &EncoderChain::identity(&sc),
            Factorization::Superposition,
        )
        .unwrap();
        let v = InfoView::new(&sc, j);
        let with = v.i_dest(&[X1, X2, X3], &[]).unwrap();
        let without = v.i_dest(&[X1, X2], &[]).unwrap();
        assert_abs_diff_eq!(with - without, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            v.i_relay(&[X1, X2], &[X3]).unwrap(),
            3f64.log2(),
            epsilon = 1e-12
        );
    }
}

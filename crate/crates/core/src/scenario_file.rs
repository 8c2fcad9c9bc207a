//! Line-oriented text format for scenarios and encoder chains.
//!
//! ```text
//! # comment
//! alphabet S1 0 1
//! alphabet S2 0 1
//! table S1 S2 : 1/3 1/3 0 1/3
//! channel builtin table1
//! c3 1
//! ```
//!
//! Directives:
//! - `alphabet NAME sym...` declares an axis.
//! - `table AXES... : p...` gives a joint in row-major order.
//! - `kernel OUT... | GIVEN... : row ; row ; ...` gives one row per given tuple;
//!   a row written as `-` is undefined.
//! - `sources builtin NAME` selects a named source table instead of `table`.
//! - `channel builtin NAME`, `channel primitive` (kernels `Y3 | X1 X2` and
//!   `YS | X1 X2`) or `channel general RELAY... | DEST...` (one kernel over `X1 X2 X3`).
//! - `c3 VALUE` sets the relay link capacity of a primitive channel.
//!
//! Lines starting with whitespace continue the previous directive.
//! Probabilities accept decimals and exact fractions `a/b`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::models::*;
use crate::prob::{Alphabet, ConditionalKernel, JointTable};

/// Parsed directives with their source line numbers.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub alphabets: BTreeMap<String, Alphabet>,
    pub tables: Vec<(usize, JointTable)>,
    pub kernels: Vec<(usize, ConditionalKernel)>,
    /// `sources`, `channel` and `c3` directives: key -> (line, words).
    pub settings: BTreeMap<String, (usize, Vec<String>)>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses a decimal or `a/b` fraction.
pub fn parse_prob(word: &str) -> Option<f64> {
    let v = match word.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            if b == 0.0 {
                return None;
            }
            a / b
        }
        None => word.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Joins continuation lines; returns `(line_number, text)` per directive.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            if let Some(last) = out.last_mut() {
                last.1.push(' ');
                last.1.push_str(line.trim());
                continue;
            }
        }
        out.push((i + 1, line.trim().to_string()));
    }
    out
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        for (ln, line) in logical_lines(text) {
            let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((&line, ""));
            let rest = rest.trim();
            match head {
                "alphabet" => {
                    let mut words = rest.split_whitespace();
                    let name = words
                        .next()
                        .ok_or_else(|| perr(ln, "alphabet needs a name"))?;
                    let syms: Vec<&str> = words.collect();
                    let a = Alphabet::new(name, syms).map_err(|e| perr(ln, e.to_string()))?;
                    if doc.alphabets.insert(name.to_string(), a).is_some() {
                        return Err(perr(ln, format!("alphabet {name} declared twice")));
                    }
                }
                "table" => {
                    let (axes, values) = rest
                        .split_once(':')
                        .ok_or_else(|| perr(ln, "table needs `AXES : values`"))?;
                    let axes = doc.lookup(ln, axes)?;
                    let mass = numbers(ln, values)?;
                    let t = JointTable::new(axes, mass).map_err(|e| perr(ln, e.to_string()))?;
                    doc.tables.push((ln, t));
                }
                "kernel" => {
                    let (sig, values) = rest
                        .split_once(':')
                        .ok_or_else(|| perr(ln, "kernel needs `OUT | GIVEN : rows`"))?;
                    let (out, given) = sig.split_once('|').unwrap_or((sig, ""));
                    let out = doc.lookup(ln, out)?;
                    let given = doc.lookup(ln, given)?;
                    let rows = values
                        .split(';')
                        .map(|r| {
                            if r.trim() == NULL_ROW {
                                Ok(None)
                            } else {
                                numbers(ln, r).map(Some)
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let k = ConditionalKernel::with_absent(given, out, rows)
                        .map_err(|e| perr(ln, e.to_string()))?;
                    doc.kernels.push((ln, k));
                }
                "sources" | "channel" | "c3" => {
                    let words = rest.split_whitespace().map(str::to_string).collect();
                    if doc.settings.insert(head.to_string(), (ln, words)).is_some() {
                        return Err(perr(ln, format!("`{head}` given twice")));
                    }
                }
                other => return Err(perr(ln, format!("unknown directive `{other}`"))),
            }
        }
        Ok(doc)
    }

    fn lookup(&self, ln: usize, names: &str) -> Result<Vec<Alphabet>> {
        names
            .split_whitespace()
            .map(|n| {
                self.alphabets
                    .get(n)
                    .cloned()
                    .ok_or_else(|| perr(ln, format!("axis {n} has no alphabet")))
            })
            .collect()
    }

    /// First table whose axes are exactly `axes` in any order.
    pub fn table_over(&self, axes: &[&str]) -> Option<&JointTable> {
        self.tables.iter().map(|(_, t)| t).find(|t| {
            let mut a = t.axis_names();
            let mut b = axes.to_vec();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        })
    }

    /// First kernel with the given outputs.
    pub fn kernel_for(&self, out: &[&str]) -> Option<&ConditionalKernel> {
        self.kernels
            .iter()
            .map(|(_, k)| k)
            .find(|k| k.out_names() == out)
    }

    fn setting(&self, key: &str) -> Option<(usize, Vec<&str>)> {
        self.settings
            .get(key)
            .map(|(ln, w)| (*ln, w.iter().map(String::as_str).collect()))
    }

    /// Builds the scenario described by the document.
    pub fn scenario(&self) -> Result<MarcScenario> {
        let sources = match self.setting("sources") {
            Some((ln, w)) => match w.as_slice() {
                ["builtin", name] => {
                    sources_named(name.parse().map_err(|e: Error| perr(ln, e.to_string()))?)
                }
                _ => return Err(perr(ln, "expected `sources builtin NAME`")),
            },
            None => self
                .tables
                .iter()
                .map(|(_, t)| t)
                .find(|t| t.has_axis(S1) && t.has_axis(S2))
                .cloned()
                .ok_or_else(|| perr(0, "no source table over S1 and S2"))?,
        };
        let c3 = match self.setting("c3") {
            Some((ln, w)) => Some(
                w.first()
                    .and_then(|v| parse_prob(v))
                    .ok_or_else(|| perr(ln, "c3 needs a number"))?,
            ),
            None => None,
        };
        let (ln, words) = self
            .setting("channel")
            .ok_or_else(|| perr(0, "missing `channel` directive"))?;
        let at = |e: Error| perr(ln, e.to_string());
        let channel = match words.as_slice() {
            ["builtin", name] => {
                let name: ChannelName = name.parse().map_err(at)?;
                Channel::Primitive(name.build(c3).map_err(at)?)
            }
            ["primitive"] => {
                let y3 = self
                    .kernel_for(&[Y3])
                    .ok_or_else(|| perr(ln, "missing kernel Y3 | X1 X2"))?;
                let ys = self
                    .kernel_for(&[YS])
                    .ok_or_else(|| perr(ln, "missing kernel YS | X1 X2"))?;
                let c3 = c3.ok_or_else(|| perr(ln, "a primitive channel needs `c3`"))?;
                Channel::Primitive(Psomarc::new(y3.clone(), ys.clone(), c3).map_err(at)?)
            }
            ["general", spec @ ..] => {
                let joined = spec.join(" ");
                let (relay, dest) = joined
                    .split_once('|')
                    .ok_or_else(|| perr(ln, "expected `channel general RELAY... | DEST...`"))?;
                let relay: Vec<&str> = relay.split_whitespace().collect();
                let dest: Vec<&str> = dest.split_whitespace().collect();
                let law = self
                    .kernels
                    .iter()
                    .map(|(_, k)| k)
                    .find(|k| {
                        k.given_names().contains(&X3)
                            && k.out_names()
                                .contains(&relay.first().copied().unwrap_or(Y3))
                    })
                    .ok_or_else(|| perr(ln, "missing channel kernel over X1 X2 X3"))?;
                Channel::General(MarcChannel::with_outputs(law.clone(), &relay, &dest).map_err(at)?)
            }
            _ => {
                return Err(perr(
                    ln,
                    "expected `channel builtin NAME|primitive|general ...`",
                ))
            }
        };
        MarcScenario::new(sources, channel).map_err(|e| perr(0, e.to_string()))
    }

    /// Builds per-scheme encoders; missing encoders default to `x_i = s_i`.
    pub fn encoders(&self, scenario: &MarcScenario) -> EncoderChain {
        let mut enc = EncoderChain::identity(scenario);
        if let Some(k) = self.kernel_for(&[X1]) {
            enc.x1 = k.clone();
        }
        if let Some(k) = self.kernel_for(&[X2]) {
            enc.x2 = k.clone();
        }
        enc.x3 = self.kernel_for(&[X3]).cloned();
        enc.v1 = self.table_over(&[V1]).cloned();
        enc.v2 = self.table_over(&[V2]).cloned();
        enc
    }
}

const NULL_ROW: &str = "-";

fn numbers(ln: usize, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|w| parse_prob(w).ok_or_else(|| perr(ln, format!("bad probability `{w}`"))))
        .collect()
}

fn fmt_num(x: f64) -> String {
    // shortest representation that parses back to the same f64
    format!("{x:?}")
}

fn write_alphabets<'a>(
    out: &mut String,
    seen: &mut Vec<String>,
    axes: impl IntoIterator<Item = &'a Alphabet>,
) {
    for a in axes {
        if !seen.iter().any(|s| s == a.name()) {
            seen.push(a.name().to_string());
            let _ = writeln!(out, "alphabet {} {}", a.name(), a.symbols().join(" "));
        }
    }
}

fn write_kernel(out: &mut String, k: &ConditionalKernel) {
    let rows: Vec<String> = k
        .rows()
        .iter()
        .map(|r| match r {
            Some(r) => r.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(" "),
            None => NULL_ROW.to_string(),
        })
        .collect();
    let _ = writeln!(
        out,
        "kernel {} | {} : {}",
        k.out_names().join(" "),
        k.given_names().join(" "),
        rows.join(" ; ")
    );
}

/// Serializes a scenario with every table written out explicitly.
pub fn to_text(scenario: &MarcScenario) -> String {
    let mut out = String::new();
    let mut seen = Vec::new();
    write_alphabets(&mut out, &mut seen, scenario.sources.axes());
    let law = match &scenario.channel {
        Channel::Primitive(p) => {
            write_alphabets(
                &mut out,
                &mut seen,
                p.y3_map
                    .given()
                    .iter()
                    .chain(p.y3_map.out())
                    .chain(p.ys_map.out()),
            );
            None
        }
        Channel::General(ch) => {
            write_alphabets(
                &mut out,
                &mut seen,
                ch.law().given().iter().chain(ch.law().out()),
            );
            Some(ch)
        }
    };
    let s = &scenario.sources;
    let _ = writeln!(
        out,
        "table {} : {}",
        s.axis_names().join(" "),
        s.mass()
            .iter()
            .map(|&v| fmt_num(v))
            .collect::<Vec<_>>()
            .join(" ")
    );
    match (&scenario.channel, law) {
        (Channel::Primitive(p), _) => {
            let _ = writeln!(out, "channel primitive");
            let _ = writeln!(out, "c3 {}", fmt_num(p.c3));
            write_kernel(&mut out, &p.y3_map);
            write_kernel(&mut out, &p.ys_map);
        }
        (_, Some(ch)) => {
            let _ = writeln!(
                out,
                "channel general {} | {}",
                ch.relay_outputs().join(" "),
                ch.dest_outputs().join(" ")
            );
            write_kernel(&mut out, ch.law());
        }
        _ => unreachable!(),
    }
    out
}

/// Parses a scenario document.
pub fn parse_scenario(text: &str) -> Result<MarcScenario> {
    Document::parse(text)?.scenario()
}

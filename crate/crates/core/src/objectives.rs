//! Flat-array objectives for primitive channels.
//!
//! The frontier searches evaluate up to ~10^8 candidates, so they bypass the
//! named-axis tables and work on plain row-major arrays. Every function here
//! has a table-based counterpart that the tests compare against.

use crate::models::Psomarc;
use crate::prob::entropy_bits;

/// Row-major copies of a primitive channel's kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct PsomarcFast {
    pub nx1: usize,
    pub nx2: usize,
    pub n3: usize,
    pub ns: usize,
    /// `p(y3 | x)` with `x = x1 * nx2 + x2`.
    pub y3: Vec<f64>,
    /// `p(ys | x)`.
    pub ys: Vec<f64>,
    /// `H(Y3 | X = x)`.
    pub h3: Vec<f64>,
    /// `H(YS | X = x)`.
    pub hs: Vec<f64>,
    pub c3: f64,
}

impl PsomarcFast {
    pub fn new(ch: &Psomarc) -> Self {
        let nx1 = ch.x1_alphabet().len();
        let nx2 = ch.x2_alphabet().len();
        let n3 = ch.y3_map.out()[0].len();
        let ns = ch.ys_map.out()[0].len();
        let flat = |k: &crate::prob::ConditionalKernel| -> Vec<f64> {
            k.rows().iter().flat_map(|r| r.clone().unwrap()).collect()
        };
        let y3 = flat(&ch.y3_map);
        let ys = flat(&ch.ys_map);
        let h3 = y3.chunks(n3).map(entropy_bits).collect();
        let hs = ys.chunks(ns).map(entropy_bits).collect();
        PsomarcFast {
            nx1,
            nx2,
            n3,
            ns,
            y3,
            ys,
            h3,
            hs,
            c3: ch.c3,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx1 * self.nx2
    }

    /// `I(X; Y3)` for an input distribution `px` over `(x1, x2)`.
    pub fn i_y3(&self, px: &[f64]) -> f64 {
        mi(px, &self.y3, self.n3, &self.h3)
    }

    /// `I(X; YS)`.
    pub fn i_ys(&self, px: &[f64]) -> f64 {
        mi(px, &self.ys, self.ns, &self.hs)
    }

    /// `I(X; Y3 | YS)`, using conditional independence of the outputs given `X`.
    pub fn i_y3_given_ys(&self, px: &[f64]) -> f64 {
        let mut joint = [0.0f64; 64];
        let mut ps = [0.0f64; 16];
        let big = self.n3 * self.ns > joint.len() || self.ns > ps.len();
        if big {
            return self.i_y3_given_ys_slow(px);
        }
        for (x, &p) in px.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let r3 = &self.y3[x * self.n3..(x + 1) * self.n3];
            let rs = &self.ys[x * self.ns..(x + 1) * self.ns];
            for (b, &q) in rs.iter().enumerate() {
                ps[b] += p * q;
                for (a, &r) in r3.iter().enumerate() {
                    joint[a * self.ns + b] += p * r * q;
                }
            }
        }
        let cond: f64 = px.iter().zip(&self.h3).map(|(p, h)| p * h).sum();
        entropy_bits(&joint[..self.n3 * self.ns]) - entropy_bits(&ps[..self.ns]) - cond
    }

    fn i_y3_given_ys_slow(&self, px: &[f64]) -> f64 {
        let mut joint = vec![0.0; self.n3 * self.ns];
        let mut ps = vec![0.0; self.ns];
        for (x, &p) in px.iter().enumerate() {
            for b in 0..self.ns {
                let q = self.ys[x * self.ns + b];
                ps[b] += p * q;
                for a in 0..self.n3 {
                    joint[a * self.ns + b] += p * self.y3[x * self.n3 + a] * q;
                }
            }
        }
        let cond: f64 = px.iter().zip(&self.h3).map(|(p, h)| p * h).sum();
        entropy_bits(&joint) - entropy_bits(&ps) - cond
    }

    /// `I(X;YS) + min{c3, I(X;Y3|YS)}`.
    pub fn cutset(&self, px: &[f64]) -> f64 {
        self.i_ys(px) + self.c3.min(self.i_y3_given_ys(px))
    }

    /// `min{I(X;Y3), I(X;YS) + c3}`.
    pub fn suff(&self, px: &[f64]) -> f64 {
        self.i_y3(px).min(self.i_ys(px) + self.c3)
    }
}

/// `I(X;Y) = H(Y) - sum_x p(x) H(Y|x)` for a row-major kernel.
fn mi(px: &[f64], kernel: &[f64], ny: usize, hrow: &[f64]) -> f64 {
    let mut py = [0.0f64; 16];
    if ny > py.len() {
        let mut v = vec![0.0; ny];
        for (x, &p) in px.iter().enumerate() {
            for (y, &k) in kernel[x * ny..(x + 1) * ny].iter().enumerate() {
                v[y] += p * k;
            }
        }
        let cond: f64 = px.iter().zip(hrow).map(|(p, h)| p * h).sum();
        return entropy_bits(&v) - cond;
    }
    for (x, &p) in px.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (y, &k) in kernel[x * ny..(x + 1) * ny].iter().enumerate() {
            py[y] += p * k;
        }
    }
    let cond: f64 = px.iter().zip(hrow).map(|(p, h)| p * h).sum();
    entropy_bits(&py[..ny]) - cond
}

/// Source pair and per-symbol encoders flattened for fast evaluation.
///
/// A search point lists `p(x1 | s1)` for every `s1`, then `p(x2 | s2)` for every `s2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSymbolInputs {
    pub ns1: usize,
    pub ns2: usize,
    pub nx1: usize,
    pub nx2: usize,
    /// `p(s1, s2)` row-major.
    pub ps: Vec<f64>,
}

impl PerSymbolInputs {
    pub fn new(ps: Vec<f64>, ns1: usize, ns2: usize, nx1: usize, nx2: usize) -> Self {
        assert_eq!(ps.len(), ns1 * ns2);
        PerSymbolInputs {
            ns1,
            ns2,
            nx1,
            nx2,
            ps,
        }
    }

    pub fn point_len(&self) -> usize {
        self.ns1 * self.nx1 + self.ns2 * self.nx2
    }

    /// `p(x1 | s1)` row for `s1` inside a search point.
    pub fn k1<'a>(&self, point: &'a [f64], s1: usize) -> &'a [f64] {
        &point[s1 * self.nx1..(s1 + 1) * self.nx1]
    }

    /// `p(x2 | s2)` row for `s2` inside a search point.
    pub fn k2<'a>(&self, point: &'a [f64], s2: usize) -> &'a [f64] {
        let base = self.ns1 * self.nx1;
        &point[base + s2 * self.nx2..base + (s2 + 1) * self.nx2]
    }

    /// Induced `p(x1, x2)` written into `out`.
    pub fn input_joint(&self, point: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for s1 in 0..self.ns1 {
            let a = self.k1(point, s1);
            for s2 in 0..self.ns2 {
                let w = self.ps[s1 * self.ns2 + s2];
                if w == 0.0 {
                    continue;
                }
                let b = self.k2(point, s2);
                for (x1, &pa) in a.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for (x2, &pb) in b.iter().enumerate() {
                        out[x1 * self.nx2 + x2] += w * pa * pb;
                    }
                }
            }
        }
    }

    /// `sum_s p(s) f(p(x1, x2 | s))`, where inputs are independent given the sources.
    pub fn average_given_sources(&self, point: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut px = vec![0.0; self.nx1 * self.nx2];
        let mut total = 0.0;
        for s1 in 0..self.ns1 {
            let a = self.k1(point, s1);
            for s2 in 0..self.ns2 {
                let w = self.ps[s1 * self.ns2 + s2];
                if w == 0.0 {
                    continue;
                }
                let b = self.k2(point, s2);
                for (x1, &pa) in a.iter().enumerate() {
                    for (x2, &pb) in b.iter().enumerate() {
                        px[x1 * self.nx2 + x2] = pa * pb;
                    }
                }
                total += w * f(&px);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::*;
    use crate::prob::{compose, JointTable};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn table_route(ch: &Psomarc, px: &[f64]) -> (f64, f64, f64) {
        let x = JointTable::new(
            vec![ch.x1_alphabet().clone(), ch.x2_alphabet().clone()],
            px.to_vec(),
        )
        .unwrap();
        let k = ch.joint_output_kernel();
        let j = compose(&[(&x).into(), (&k).into()]).unwrap();
        (
            j.mutual_information(&[X1, X2], &[Y3], &[]).unwrap(),
            j.mutual_information(&[X1, X2], &[YS], &[]).unwrap(),
            j.mutual_information(&[X1, X2], &[Y3], &[YS]).unwrap(),
        )
    }

    #[test]
    fn uniform_inputs_table1() {
        let f = PsomarcFast::new(&Psomarc::table1());
        let px = [0.25; 4];
        assert_abs_diff_eq!(f.i_ys(&px), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.cutset(&px), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.i_y3(&px), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn table7_joint_sources_hit_log6() {
        let f = PsomarcFast::new(&Psomarc::table7());
        let px: Vec<f64> = sources_named(SourceName::Table8).mass().to_vec();
        assert_abs_diff_eq!(f.i_ys(&px), 3f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.i_y3_given_ys(&px), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.cutset(&px), 6f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.suff(&px), 6f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn input_joint_matches_compose() {
        let sc = MarcScenario::named(ChannelName::Tables45, SourceName::Table6, None).unwrap();
        let enc = EncoderChain::binary([0.3, 0.8], [0.55, 0.1]).unwrap();
        let j = induced_joint(&sc, &enc, Factorization::Superposition).unwrap();
        let want = j.marginalize(&[X1, X2]).unwrap();
        let inputs = PerSymbolInputs::new(sc.source_pair().mass().to_vec(), 2, 2, 2, 2);
        let point = [0.3, 0.7, 0.8, 0.2, 0.55, 0.45, 0.1, 0.9];
        let mut px = [0.0; 4];
        inputs.input_joint(&point, &mut px);
        for (a, b) in px.iter().zip(want.mass()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let f = PsomarcFast::new(sc.channel.as_psomarc().unwrap());
        let cond = inputs.average_given_sources(&point, |p| f.i_y3(p));
        assert_abs_diff_eq!(
            cond,
            j.mutual_information(&[X1, X2], &[Y3], &[S1, S2]).unwrap(),
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn fast_matches_tables(w in prop::collection::vec(0.0..1.0f64, 4), c3 in 0.0..1.0f64) {
            let s: f64 = w.iter().sum();
            prop_assume!(s > 1e-3);
            let px: Vec<f64> = w.iter().map(|x| x / s).collect();
            let ch = Psomarc::tables45(c3).unwrap();
            let f = PsomarcFast::new(&ch);
            let (a, b, c) = table_route(&ch, &px);
            prop_assert!((f.i_y3(&px) - a).abs() < 1e-12);
            prop_assert!((f.i_ys(&px) - b).abs() < 1e-12);
            prop_assert!((f.i_y3_given_ys(&px) - c).abs() < 1e-12);
        }

        #[test]
        fn fast_matches_tables_ternary(w in prop::collection::vec(0.0..1.0f64, 9)) {
            let s: f64 = w.iter().sum();
            prop_assume!(s > 1e-3);
            let px: Vec<f64> = w.iter().map(|x| x / s).collect();
            let ch = Psomarc::table7();
            let f = PsomarcFast::new(&ch);
            let (a, b, c) = table_route(&ch, &px);
            prop_assert!((f.i_y3(&px) - a).abs() < 1e-12);
            prop_assert!((f.i_ys(&px) - b).abs() < 1e-12);
            prop_assert!((f.i_y3_given_ys(&px) - c).abs() < 1e-12);
            prop_assert!(f.i_ys(&px) <= 3f64.log2() + 1e-9);
        }
    }

    #[test]
    fn alphabet_sizes() {
        let f = PsomarcFast::new(&Psomarc::table7());
        assert_eq!((f.nx1, f.nx2, f.n3, f.ns), (3, 3, 6, 3));
    }
}

//! Random scenarios and encoder chains for property checks.

use rand::Rng;

use crate::models::*;
use crate::prob::{Alphabet, ConditionalKernel, JointTable};

/// Random point of the simplex; about a fifth of the cells are zeroed.
pub fn simplex<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    -rng.gen::<f64>().max(1e-300).ln()
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
            // absorb round-off in the largest cell
            let top = (0..dim).fold(0, |b, i| if v[i] > v[b] { i } else { b });
            let others: f64 = (0..dim).filter(|&j| j != top).map(|j| v[j]).sum();
            v[top] = 1.0 - others;
            return v;
        }
    }
}

pub fn table<R: Rng>(rng: &mut R, axes: Vec<Alphabet>) -> JointTable {
    let n = axes.iter().map(Alphabet::len).product();
    JointTable::new(axes, simplex(rng, n)).expect("random table is normalized")
}

pub fn kernel<R: Rng>(rng: &mut R, given: Vec<Alphabet>, out: Vec<Alphabet>) -> ConditionalKernel {
    let rows = given.iter().map(Alphabet::len).product::<usize>();
    let cols = out.iter().map(Alphabet::len).product();
    let rows = (0..rows).map(|_| simplex(rng, cols)).collect();
    ConditionalKernel::new(given, out, rows).expect("random kernel is normalized")
}

fn bin(name: &str) -> Alphabet {
    Alphabet::range(name, 2)
}

/// Binary primitive channel with a random `c3` in `[0, 1]`.
pub fn psomarc<R: Rng>(rng: &mut R) -> Psomarc {
    let y3 = kernel(rng, vec![bin(X1), bin(X2)], vec![bin(Y3)]);
    let ys = kernel(rng, vec![bin(X1), bin(X2)], vec![bin(YS)]);
    Psomarc::new(y3, ys, rng.gen()).expect("random primitive channel is valid")
}

/// Random binary sources with side information, a general channel and a
/// superposition encoder chain over binary auxiliaries.
pub fn superposition_case<R: Rng>(rng: &mut R) -> (MarcScenario, EncoderChain) {
    let sources = table(rng, vec![bin(S1), bin(S2), bin(W), bin(W3)]);
    let law = kernel(
        rng,
        vec![bin(X1), bin(X2), bin(X3)],
        vec![bin(Y3), Alphabet::range(Y, 3)],
    );
    let channel = Channel::General(MarcChannel::new(law).expect("random law is valid"));
    let scenario = MarcScenario::new(sources, channel).expect("random scenario is valid");
    let enc = EncoderChain {
        v1: Some(table(rng, vec![bin(V1)])),
        v2: Some(table(rng, vec![bin(V2)])),
        x1: kernel(rng, vec![bin(S1), bin(V1)], vec![bin(X1)]),
        x2: kernel(rng, vec![bin(S2), bin(V2)], vec![bin(X2)]),
        x3: Some(kernel(rng, vec![bin(V1), bin(V2)], vec![bin(X3)])),
    };
    (scenario, enc)
}

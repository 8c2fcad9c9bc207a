//! Normalized joint matrices, small dense SVD and maximal correlation.
//!
//! For a joint `p(x,y)` the matrix `Q[x][y] = p(x,y) / sqrt(p(x) p(y))`, taken over
//! supported rows and columns, always has top singular value 1 with singular
//! vectors `sqrt(p_X)` and `sqrt(p_Y)`. Its second singular value is the
//! Hirschfeld-Gebelein-Renyi maximal correlation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::{S1, S2, X1, X2};
use crate::prob::JointTable;

/// Sweeps allowed before the Jacobi iteration gives up.
pub const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal threshold for declaring two columns orthogonal.
const ORTHO_TOL: f64 = 1e-14;

/// Upper clamp for singular values after round-off.
const SIGMA_CEIL: f64 = 1.0 + 1e-8;

/// Default slack for exact-distribution membership in B'.
pub const BPRIME_TOL: f64 = 1e-9;

/// `P_X^{-1/2} P_XY P_Y^{-1/2}` restricted to the support of both marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedJointMatrix {
    /// Original row indices kept (positive `p(x)`).
    pub row_support: Vec<usize>,
    /// Original column indices kept (positive `p(y)`).
    pub col_support: Vec<usize>,
    pub sqrt_px: Vec<f64>,
    pub sqrt_py: Vec<f64>,
    /// Row-major, `row_support.len() * col_support.len()` entries.
    pub entries: Vec<f64>,
}

impl NormalizedJointMatrix {
    /// Builds the matrix from a dense row-major `rows x cols` mass array.
    pub fn from_dense(rows: usize, cols: usize, mass: &[f64]) -> Self {
        debug_assert_eq!(mass.len(), rows * cols);
        let mut px = vec![0.0; rows];
        let mut py = vec![0.0; cols];
        for r in 0..rows {
            for c in 0..cols {
                px[r] += mass[r * cols + c];
                py[c] += mass[r * cols + c];
            }
        }
        let row_support: Vec<usize> = (0..rows).filter(|&r| px[r] > 0.0).collect();
        let col_support: Vec<usize> = (0..cols).filter(|&c| py[c] > 0.0).collect();
        let sqrt_px: Vec<f64> = row_support.iter().map(|&r| px[r].sqrt()).collect();
        let sqrt_py: Vec<f64> = col_support.iter().map(|&c| py[c].sqrt()).collect();
        let mut entries = Vec::with_capacity(row_support.len() * col_support.len());
        for (i, &r) in row_support.iter().enumerate() {
            for (j, &c) in col_support.iter().enumerate() {
                entries.push(mass[r * cols + c] / (sqrt_px[i] * sqrt_py[j]));
            }
        }
        NormalizedJointMatrix {
            row_support,
            col_support,
            sqrt_px,
            sqrt_py,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.row_support.len()
    }

    pub fn cols(&self) -> usize {
        self.col_support.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols() + j]
    }
}

/// Normalized matrix of a two-axis joint; the first axis indexes rows.
pub fn normalized_matrix(p_xy: &JointTable) -> Result<NormalizedJointMatrix> {
    let shape = p_xy.shape();
    if shape.len() != 2 {
        return Err(Error::Invalid(format!(
            "normalized matrix needs a two-axis joint, got {} axes",
            shape.len()
        )));
    }
    Ok(NormalizedJointMatrix::from_dense(
        shape[0],
        shape[1],
        p_xy.mass(),
    ))
}

/// Singular values in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn sigma(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }
}

/// Thin SVD `A = U diag(s) V^T`. Column `k` of `u`/`v` is stored as `u[k]`/`v[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub values: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// One-sided Jacobi SVD of a dense row-major matrix.
///
/// Each rotation diagonalizes a 2x2 block of `A^T A` without forming it, so
/// small singular values keep full relative accuracy.
pub fn svd_dense(rows: usize, cols: usize, a: &[f64]) -> Result<Svd> {
    if rows == 0 || cols == 0 {
        return Ok(Svd {
            values: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
        });
    }
    if cols > rows {
        let mut t = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = a[r * cols + c];
            }
        }
        let s = svd_dense(cols, rows, &t)?;
        return Ok(Svd {
            values: s.values,
            u: s.v,
            v: s.u,
        });
    }
    // columns of A and of V, each stored contiguously
    let mut w: Vec<Vec<f64>> = (0..cols)
        .map(|c| (0..rows).map(|r| a[r * cols + c]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|c| (0..cols).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    // columns below this squared norm are round-off and never rotated
    let frob2: f64 = a.iter().map(|x| x * x).sum();
    let negligible = (f64::EPSILON * f64::EPSILON) * frob2;
    let mut converged = cols == 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols - 1 {
            for q in p + 1..cols {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut out = Svd {
        values: Vec::with_capacity(cols),
        u: Vec::with_capacity(cols),
        v: Vec::with_capacity(cols),
    };
    for k in order {
        let sigma = norms[k];
        let u = if sigma > 0.0 {
            w[k].iter().map(|x| x / sigma).collect()
        } else {
            vec![0.0; rows]
        };
        out.values.push(sigma);
        out.u.push(u);
        out.v.push(v[k].clone());
    }
    Ok(out)
}

fn pair_mut(cols: &mut [Vec<f64>], p: usize, q: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    debug_assert!(p < q);
    let (lo, hi) = cols.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let t = *a;
        *a = c * t - s * *b;
        *b = s * t + c * *b;
    }
}

pub fn svd(m: &NormalizedJointMatrix) -> Result<Svd> {
    svd_dense(m.rows(), m.cols(), &m.entries)
}

/// Full spectrum of a normalized matrix, clamped to `[0, 1 + 1e-8]`.
pub fn singular_values(m: &NormalizedJointMatrix) -> Result<SingularSpectrum> {
    let s = svd(m)?;
    Ok(SingularSpectrum {
        values: s
            .values
            .into_iter()
            .map(|x| x.clamp(0.0, SIGMA_CEIL))
            .collect(),
    })
}

/// Maximal correlation of a dense `rows x cols` joint mass array.
///
/// Zero when either marginal is supported on a single symbol.
pub fn maximal_correlation_dense(rows: usize, cols: usize, mass: &[f64]) -> Result<f64> {
    let m = NormalizedJointMatrix::from_dense(rows, cols, mass);
    if m.rows() < 2 || m.cols() < 2 {
        return Ok(0.0);
    }
    Ok(singular_values(&m)?.sigma(1))
}

/// Maximal correlation between the two axes of `p_xy`.
pub fn maximal_correlation(p_xy: &JointTable) -> Result<f64> {
    let m = normalized_matrix(p_xy)?;
    if m.rows() < 2 || m.cols() < 2 {
        return Ok(0.0);
    }
    Ok(singular_values(&m)?.sigma(1))
}

/// Maximal correlations of `(X1, X2)`, unconditionally and given each supported source symbol.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationProfile {
    pub rho_uncond: f64,
    pub rho_given_s1: BTreeMap<usize, f64>,
    pub rho_given_s2: BTreeMap<usize, f64>,
    pub rho_given_both: BTreeMap<(usize, usize), f64>,
}

impl CorrelationProfile {
    /// Every entry with a readable label.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![("rho(X1,X2)".to_string(), self.rho_uncond)];
        out.extend(
            self.rho_given_s1
                .iter()
                .map(|(s, r)| (format!("rho(X1,X2|s1={s})"), *r)),
        );
        out.extend(
            self.rho_given_s2
                .iter()
                .map(|(s, r)| (format!("rho(X1,X2|s2={s})"), *r)),
        );
        out.extend(
            self.rho_given_both
                .iter()
                .map(|((a, b), r)| (format!("rho(X1,X2|s1={a},s2={b})"), *r)),
        );
        out
    }

    /// First entry above `rho_sources + tol`, if any.
    pub fn first_violation(&self, rho_sources: f64, tol: f64) -> Option<(String, f64)> {
        self.entries()
            .into_iter()
            .find(|(_, r)| *r > rho_sources + tol)
    }
}

fn rho_x1x2(t: &JointTable) -> Result<f64> {
    maximal_correlation(&t.marginalize(&[X1, X2])?.reorder(&[X1, X2])?)
}

/// Profile of a joint that carries axes `S1`, `S2`, `X1`, `X2` (extra axes are summed out).
pub fn correlation_profile(p: &JointTable) -> Result<CorrelationProfile> {
    let base = p.marginalize(&[S1, S2, X1, X2])?;
    let n1 = base.axis(S1).map(|a| a.len()).unwrap_or(1);
    let n2 = base.axis(S2).map(|a| a.len()).unwrap_or(1);
    let mut prof = CorrelationProfile {
        rho_uncond: rho_x1x2(&base)?,
        ..Default::default()
    };
    for s1 in 0..n1 {
        if let Some(t) = base.slice(&[(S1, s1)])? {
            prof.rho_given_s1.insert(s1, rho_x1x2(&t)?);
        }
    }
    for s2 in 0..n2 {
        if let Some(t) = base.slice(&[(S2, s2)])? {
            prof.rho_given_s2.insert(s2, rho_x1x2(&t)?);
        }
    }
    for s1 in 0..n1 {
        for s2 in 0..n2 {
            if let Some(t) = base.slice(&[(S1, s1), (S2, s2)])? {
                prof.rho_given_both.insert((s1, s2), rho_x1x2(&t)?);
            }
        }
    }
    Ok(prof)
}

/// Membership test for B': every profile entry is at most `rho_sources + tol`.
pub fn in_bprime(profile: &CorrelationProfile, rho_sources: f64, tol: f64) -> bool {
    profile.first_violation(rho_sources, tol).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Alphabet;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn joint2(rows: usize, cols: usize, mass: Vec<f64>) -> JointTable {
        JointTable::new(
            vec![Alphabet::range("X", rows), Alphabet::range("Y", cols)],
            mass,
        )
        .unwrap()
    }

    #[test]
    fn rank_deficient_converges() {
        let w = [0.0, 0.0, 1.07117e-4, 0.817232, 0.090361, 0.540049, 0.0, 0.0, 0.372312];
        let s: f64 = w.iter().sum();
        let mass: Vec<f64> = w.iter().map(|x| x / s).collect();
        let out = svd(&NormalizedJointMatrix::from_dense(3, 3, &mass)).unwrap();
        assert_abs_diff_eq!(out.values[0], 1.0, epsilon = 1e-12);
        let oracle = crate::regress::sigma2_oracle(3, &mass);
        assert_abs_diff_eq!(out.values[1], oracle, epsilon = 1e-9);
        assert!(out.values[2] < 1e-12);
    }

    /// Closed-form second singular value of a 2x2 normalized matrix.
    fn rho_2x2(m: &[f64; 4]) -> f64 {
        let p0 = m[0] + m[1];
        let p1 = m[2] + m[3];
        let q0 = m[0] + m[2];
        let q1 = m[1] + m[3];
        (m[0] * m[3] - m[1] * m[2]).abs() / (p0 * p1 * q0 * q1).sqrt()
    }

    #[test]
    fn identity_spectrum() {
        let s = svd_dense(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.values, vec![1.0, 1.0]);
        let rho = maximal_correlation(&joint2(2, 2, vec![0.5, 0.0, 0.0, 0.5])).unwrap();
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_is_rank_one() {
        let px = [0.3, 0.7];
        let py = [0.2, 0.5, 0.3];
        let mass: Vec<f64> = px
            .iter()
            .flat_map(|a| py.iter().map(move |b| a * b))
            .collect();
        let t = joint2(2, 3, mass);
        let m = normalized_matrix(&t).unwrap();
        for (i, a) in px.iter().enumerate() {
            for (j, b) in py.iter().enumerate() {
                assert_abs_diff_eq!(m.get(i, j), a.sqrt() * b.sqrt(), epsilon = 1e-15);
            }
        }
        let s = singular_values(&m).unwrap();
        assert_abs_diff_eq!(s.sigma(0), 1.0, epsilon = 1e-12);
        assert!(s.sigma(1) < 1e-10);
        assert!(maximal_correlation(&t).unwrap() < 1e-10);
    }

    #[test]
    fn table2_sources() {
        let mass = [1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0];
        let rho = maximal_correlation(&joint2(2, 2, mass.to_vec())).unwrap();
        assert_abs_diff_eq!(rho, rho_2x2(&mass), epsilon = 1e-12);
        // closed form: (1/9) / sqrt(2/3 * 1/3 * 1/3 * 2/3) = 1/2
        assert_abs_diff_eq!(rho, 0.5, epsilon = 1e-12);
        assert!(rho > 0.0 && rho < 1.0);
    }

    #[test]
    fn table6_sources() {
        let mass = [0.0, 0.04, 0.045, 0.915];
        let rho = maximal_correlation(&joint2(2, 2, mass.to_vec())).unwrap();
        assert_abs_diff_eq!(rho, rho_2x2(&mass), epsilon = 1e-12);
        assert_abs_diff_eq!(rho, 0.0443097, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_support_is_zero() {
        let t = joint2(2, 2, vec![0.4, 0.6, 0.0, 0.0]);
        let m = normalized_matrix(&t).unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 2));
        assert_eq!(maximal_correlation(&t).unwrap(), 0.0);
    }

    #[test]
    fn wide_matrix_transposes() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = svd_dense(2, 3, &a).unwrap();
        // singular values of [[1,2,3],[4,5,6]]: squares are eigenvalues of A A^T
        let (t, d): (f64, f64) = (
            1.0 + 4.0 + 9.0 + 16.0 + 25.0 + 36.0,
            14.0 * 77.0 - 32.0 * 32.0,
        );
        let disc = (t * t / 4.0 - d).sqrt();
        assert_abs_diff_eq!(s.values[0], (t / 2.0 + disc).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.values[1], (t / 2.0 - disc).sqrt(), epsilon = 1e-12);
        assert_eq!(s.u[0].len(), 2);
        assert_eq!(s.v[0].len(), 3);
    }

    #[test]
    fn profile_identity_encoders() {
        // X_i = S_i on Table II sources: conditioning on both sources fixes the inputs
        let t = JointTable::from_fn(
            vec![
                Alphabet::range(S1, 2),
                Alphabet::range(S2, 2),
                Alphabet::range(X1, 2),
                Alphabet::range(X2, 2),
            ],
            |i| {
                let ps = [1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0][i[0] * 2 + i[1]];
                if i[2] == i[0] && i[3] == i[1] {
                    ps
                } else {
                    0.0
                }
            },
        )
        .unwrap();
        let p = correlation_profile(&t).unwrap();
        assert_eq!(p.rho_given_both.len(), 3);
        assert!(p.rho_given_both.values().all(|&r| r == 0.0));
        assert!(!p.rho_given_both.contains_key(&(1, 0)));
        assert_abs_diff_eq!(p.rho_uncond, 0.5, epsilon = 1e-12);
        assert!(in_bprime(&p, 0.5, BPRIME_TOL));
        assert!(!in_bprime(&p, 0.4, BPRIME_TOL));
    }

    #[test]
    fn bprime_examples() {
        assert!(in_bprime(&CorrelationProfile::default(), 0.0, 0.0));
        let p = CorrelationProfile {
            rho_uncond: 1.0,
            ..Default::default()
        };
        assert!(!in_bprime(&p, 0.0, BPRIME_TOL));
        assert_eq!(p.first_violation(0.0, 0.0).unwrap().0, "rho(X1,X2)");
    }

    fn normalize(w: &[f64]) -> Vec<f64> {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }

    fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..1.0f64], n)
            .prop_filter("mass", |w| w.iter().sum::<f64>() > 1e-2)
    }

    proptest! {
        #[test]
        fn top_pair_matches_marginals((r, c, w) in (1usize..5, 1usize..5)
            .prop_flat_map(|(r, c)| (Just(r), Just(c), weights(r * c)))) {
            let mass = normalize(&w);
            let m = NormalizedJointMatrix::from_dense(r, c, &mass);
            let s = svd(&m).unwrap();
            prop_assert!((s.values[0] - 1.0).abs() < 1e-8);
            // sqrt marginals always form a singular pair with value 1
            for i in 0..m.rows() {
                let qv: f64 = (0..m.cols()).map(|j| m.get(i, j) * m.sqrt_py[j]).sum();
                prop_assert!((qv - m.sqrt_px[i]).abs() < 1e-8);
            }
            // the returned top pair is that one whenever the top value is simple
            prop_assume!(s.values.get(1).is_none_or(|x| 1.0 - x > 1e-6));
            let sign = if s.u[0].iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            for (a, b) in s.u[0].iter().zip(&m.sqrt_px) {
                prop_assert!((sign * a - b).abs() < 1e-8);
            }
            for (a, b) in s.v[0].iter().zip(&m.sqrt_py) {
                prop_assert!((sign * a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn sigma2_matches_closed_form(w in weights(4)) {
            let mass = normalize(&w);
            let m: [f64; 4] = [mass[0], mass[1], mass[2], mass[3]];
            let rho = maximal_correlation_dense(2, 2, &mass).unwrap();
            let degenerate = m[0] + m[1] == 0.0 || m[2] + m[3] == 0.0
                || m[0] + m[2] == 0.0 || m[1] + m[3] == 0.0;
            let expect = if degenerate { 0.0 } else { rho_2x2(&m) };
            prop_assert!((rho - expect).abs() < 1e-9, "{} vs {}", rho, expect);
        }

        #[test]
        fn permutation_invariant(w in weights(9), pr in Just([2usize, 0, 1]), pc in Just([1usize, 2, 0])) {
            let mass = normalize(&w);
            let permuted: Vec<f64> = (0..9).map(|k| mass[pr[k / 3] * 3 + pc[k % 3]]).collect();
            let a = maximal_correlation_dense(3, 3, &mass).unwrap();
            let b = maximal_correlation_dense(3, 3, &permuted).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn product_has_zero_rho(a in weights(3), b in weights(4)) {
            let (pa, pb) = (normalize(&a), normalize(&b));
            let mass: Vec<f64> = pa.iter().flat_map(|x| pb.iter().map(move |y| x * y)).collect();
            prop_assert!(maximal_correlation_dense(3, 4, &mass).unwrap() < 1e-10);
        }
    }
}

//! Sign-permutation labeling of structural shocks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::likelihood::ProxySet;

/// Column relabeling: new column `j` is `signs[j] ×` old column `perm[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockLabeling {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
}

impl ShockLabeling {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            signs: vec![1.0; n],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.signs.iter().all(|&s| s > 0.0)
    }

    /// Relabels the columns of a matrix (B, or innovations stacked as rows).
    pub fn apply_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, (&p, &s)) in self.perm.iter().zip(&self.signs).enumerate() {
            out.set_column(j, &(m.column(p) * s));
        }
        out
    }

    /// Relabels per-shock skewness parameters; a sign flip reverses λ.
    pub fn apply_skewness(&self, lambda: &[f64]) -> Vec<f64> {
        self.perm.iter().zip(&self.signs).map(|(&p, &s)| s * lambda[p]).collect()
    }

    pub fn apply_values<T: Clone>(&self, v: &[T]) -> Vec<T> {
        self.perm.iter().map(|&p| v[p].clone()).collect()
    }
}

/// `C = B_ref^{-1} B_prop D` with `D` scaling each column of `C` to unit norm.
pub fn labeling_matrix(b_prop: &DMatrix<f64>, ref_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = ref_inv * b_prop;
    for mut col in c.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    c
}

/// `|c_kk| > |c_kl|` for all `k < l`.
pub fn dominance_holds(c: &DMatrix<f64>) -> bool {
    let n = c.nrows();
    (0..n).all(|k| ((k + 1)..n).all(|l| c[(k, k)].abs() > c[(k, l)].abs()))
}

/// Labeling rule against a first-step estimate: accept `B_prop` when
/// `|c_kk| > |c_kl|` for every `k < l`.
pub fn signperm_accept(b_prop: &DMatrix<f64>, b_ref: &DMatrix<f64>) -> Result<bool> {
    let ref_inv = b_ref
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { det: b_ref.determinant() })?;
    if b_prop.shape() != b_ref.shape() {
        return Err(Error::DimensionMismatch("proposal and reference differ in shape".into()));
    }
    Ok(dominance_holds(&labeling_matrix(b_prop, &ref_inv)))
}

/// Signed permutation of `b`'s columns that satisfies the dominance rule
/// against `b_ref` with a positive diagonal of `C`. Among admissible
/// permutations the one with the largest `Σ log|c_kk|` wins.
pub fn align_to_reference(b: &DMatrix<f64>, b_ref: &DMatrix<f64>) -> Result<Option<ShockLabeling>> {
    let n = b.ncols();
    let ref_inv = b_ref
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { det: b_ref.determinant() })?;
    let c = labeling_matrix(b, &ref_inv);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |perm: &[usize]| {
        let permuted = DMatrix::from_fn(n, n, |r, j| c[(r, perm[j])]);
        if dominance_holds(&permuted) {
            let score: f64 = (0..n).map(|k| permuted[(k, k)].abs().ln()).sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, perm.to_vec()));
            }
        }
    };
    if n <= 7 {
        let mut perm: Vec<usize> = (0..n).collect();
        for_each_permutation(&mut perm, 0, &mut consider);
    } else {
        // Greedy: row by row pick the largest remaining entry.
        let mut left: Vec<usize> = (0..n).collect();
        let mut perm = Vec::with_capacity(n);
        for k in 0..n {
            let (pos, _) = left
                .iter()
                .enumerate()
                .max_by(|a, b| c[(k, *a.1)].abs().total_cmp(&c[(k, *b.1)].abs()))
                .expect("non-empty");
            perm.push(left.remove(pos));
        }
        consider(&perm);
    }
    Ok(best.map(|(_, perm)| {
        let signs = perm
            .iter()
            .enumerate()
            .map(|(k, &p)| if c[(k, p)] >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        ShockLabeling { perm, signs }
    }))
}

fn for_each_permutation(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        f(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        for_each_permutation(perm, k + 1, f);
        perm.swap(k, i);
    }
}

/// Sample Pearson correlation; zero when either input is constant.
pub fn correlation<'a>(a: impl ExactSizeIterator<Item = &'a f64> + Clone, b: impl ExactSizeIterator<Item = &'a f64> + Clone) -> f64 {
    let n = a.len() as f64;
    let ma = a.clone().sum::<f64>() / n;
    let mb = b.clone().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

const TIE_TOL: f64 = 1e-12;

/// Labels shocks by their correlation with the proxies.
///
/// Proxies are taken in priority order (their column order). Each claims,
/// among the shocks not yet assigned, the one with the largest absolute
/// correlation (ties go to the lower index) and places it at its target
/// position with the sign that makes the correlation positive. Unclaimed
/// shocks fill the remaining positions in their original order.
pub fn proxy_label_shocks(innovations: &DMatrix<f64>, proxies: &ProxySet) -> Result<ShockLabeling> {
    let n = innovations.ncols();
    if proxies.nproxies() == 0 {
        return Err(Error::InvalidInput("proxy labeling needs at least one proxy".into()));
    }
    if proxies.nobs() != innovations.nrows() {
        return Err(Error::DimensionMismatch("proxies and innovations differ in length".into()));
    }
    let mut perm = vec![usize::MAX; n];
    let mut signs = vec![1.0; n];
    let mut taken = vec![false; n];
    for (k, &target) in proxies.targets().iter().enumerate() {
        let z = proxies.z().column(k);
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| !taken[j]) {
            let c = correlation(z.iter(), innovations.column(j).iter());
            match best {
                Some((_, bc)) if c.abs() <= bc.abs() + TIE_TOL => {}
                _ => best = Some((j, c)),
            }
        }
        let (j, c) = best.ok_or_else(|| Error::InvalidInput("more proxies than shocks".into()))?;
        taken[j] = true;
        perm[target] = j;
        signs[target] = if c < 0.0 { -1.0 } else { 1.0 };
    }
    let mut rest = (0..n).filter(|&j| !taken[j]);
    for slot in perm.iter_mut().filter(|p| **p == usize::MAX) {
        *slot = rest.next().expect("counts match");
    }
    Ok(ShockLabeling { perm, signs })
}

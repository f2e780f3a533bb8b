//! Reduced-form VAR: data containers, least-squares fitting, structural
//! innovations, companion-form stability and impulse responses.
//!
//! Regressor rows are laid out as `[1, y_{t-1}', ..., y_{t-p}', x_t']`, with
//! the leading one present only when the model carries a free intercept. The
//! stacked coefficient matrix `Π` (k×n) then satisfies `Y = X Π + U`.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default margin below one for the companion eigenvalue moduli.
pub const DEFAULT_STABILITY_TOL: f64 = 1e-8;

/// Threshold on `|det B|` below which a structural matrix counts as singular.
pub const SINGULAR_DET_TOL: f64 = 1e-12;

/// Observations of an n-variable system plus the p rows of presample used as
/// conditioning information for the first lags.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: DMatrix<f64>,
    labels: Vec<String>,
    presample: DMatrix<f64>,
}

impl TimeSeriesPanel {
    pub fn new(values: DMatrix<f64>, labels: Vec<String>, presample: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidInput("panel needs at least one observation".into()));
        }
        if labels.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} variables",
                labels.len(),
                values.ncols()
            )));
        }
        if presample.nrows() > 0 && presample.ncols() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "presample has {} columns, panel has {}",
                presample.ncols(),
                values.ncols()
            )));
        }
        if values.iter().chain(presample.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("panel contains non-finite values".into()));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InvalidInput("panel labels must be unique".into()));
        }
        let presample = if presample.nrows() == 0 {
            DMatrix::zeros(0, values.ncols())
        } else {
            presample
        };
        Ok(Self {
            values,
            labels,
            presample,
        })
    }

    /// Panel without presample rows and with generated labels `y1..yn`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let labels = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        let n = values.ncols();
        Self::new(values, labels, DMatrix::zeros(0, n))
    }

    /// Splits a block of observations so that the first `lags` rows become presample.
    pub fn with_leading_presample(all: &DMatrix<f64>, labels: Vec<String>, lags: usize) -> Result<Self> {
        if all.nrows() <= lags {
            return Err(Error::InsufficientSample {
                observations: all.nrows(),
                regressors: lags,
            });
        }
        let presample = all.rows(0, lags).into_owned();
        let values = all.rows(lags, all.nrows() - lags).into_owned();
        Self::new(values, labels, presample)
    }

    pub fn nobs(&self) -> usize {
        self.values.nrows()
    }

    pub fn nvars(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn presample(&self) -> &DMatrix<f64> {
        &self.presample
    }

    /// Value of variable `var` at time `t - lag`, reaching into the presample.
    fn lagged(&self, t: usize, lag: usize, var: usize) -> Result<f64> {
        let pre = self.presample.nrows();
        let idx = pre + t;
        if lag > idx {
            return Err(Error::InsufficientSample {
                observations: pre,
                regressors: lag,
            });
        }
        let pos = idx - lag;
        Ok(if pos < pre {
            self.presample[(pos, var)]
        } else {
            self.values[(pos - pre, var)]
        })
    }

    /// Reorders the variables; `order[i]` is the old index placed at position i.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.nvars();
        if order.len() != n {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let values = DMatrix::from_fn(self.nobs(), n, |t, i| self.values[(t, order[i])]);
        let presample = DMatrix::from_fn(self.presample.nrows(), n, |t, i| self.presample[(t, order[i])]);
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(values, labels, presample)
    }
}

/// Kind of a deterministic regressor column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Constant,
    LinearTrend,
    QuadraticTrend,
    Dummy,
    Other,
}

/// Deterministic regressors `X_t` (T×d).
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicDesign {
    terms: DMatrix<f64>,
    names: Vec<String>,
    kinds: Vec<TermKind>,
}

impl DeterministicDesign {
    pub fn new(terms: DMatrix<f64>, names: Vec<String>, kinds: Vec<TermKind>) -> Result<Self> {
        if names.len() != terms.ncols() || kinds.len() != terms.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names / {} kinds for {} design columns",
                names.len(),
                kinds.len(),
                terms.ncols()
            )));
        }
        if terms.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design contains non-finite values".into()));
        }
        for (j, kind) in kinds.iter().enumerate() {
            if *kind == TermKind::Dummy && terms.column(j).iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidInput(format!("dummy column `{}` is not 0/1", names[j])));
            }
        }
        Ok(Self { terms, names, kinds })
    }

    /// Design with no columns for `nobs` observations.
    pub fn empty(nobs: usize) -> Self {
        Self {
            terms: DMatrix::zeros(nobs, 0),
            names: Vec::new(),
            kinds: Vec::new(),
        }
    }

    pub fn nterms(&self) -> usize {
        self.terms.ncols()
    }

    pub fn nobs(&self) -> usize {
        self.terms.nrows()
    }

    pub fn terms(&self) -> &DMatrix<f64> {
        &self.terms
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[TermKind] {
        &self.kinds
    }

    /// Copy of the design with one column removed.
    pub fn without(&self, name: &str) -> Self {
        let keep: Vec<usize> = (0..self.nterms()).filter(|&j| self.names[j] != name).collect();
        let terms = DMatrix::from_fn(self.nobs(), keep.len(), |t, j| self.terms[(t, keep[j])]);
        Self {
            terms,
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            kinds: keep.iter().map(|&j| self.kinds[j]).collect(),
        }
    }

    /// Rows `start..start+len`.
    pub fn rows(&self, start: usize, len: usize) -> Self {
        Self {
            terms: self.terms.rows(start, len).into_owned(),
            names: self.names.clone(),
            kinds: self.kinds.clone(),
        }
    }
}

/// Lag order and intercept choice for the reduced form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSpec {
    pub lags: usize,
    pub intercept: bool,
}

impl VarSpec {
    pub fn new(lags: usize, intercept: bool) -> Self {
        Self { lags, intercept }
    }

    /// Number of regressors per equation.
    pub fn nregressors(&self, nvars: usize, nterms: usize) -> usize {
        usize::from(self.intercept) + nvars * self.lags + nterms
    }
}

/// Reduced-form coefficients: intercept ν, lag matrices A_1..A_p and
/// deterministic-term loadings γ (n×d).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFormVar {
    intercept: DVector<f64>,
    lag_coeffs: Vec<DMatrix<f64>>,
    det_coeffs: DMatrix<f64>,
    has_intercept: bool,
}

impl ReducedFormVar {
    pub fn new(
        intercept: Option<DVector<f64>>,
        lag_coeffs: Vec<DMatrix<f64>>,
        det_coeffs: DMatrix<f64>,
    ) -> Result<Self> {
        let n = det_coeffs.nrows();
        if lag_coeffs.iter().any(|a| a.nrows() != n || a.ncols() != n) {
            return Err(Error::DimensionMismatch("lag matrices must be n×n".into()));
        }
        if let Some(nu) = &intercept {
            if nu.len() != n {
                return Err(Error::DimensionMismatch("intercept length".into()));
            }
        }
        let all_finite = lag_coeffs.iter().all(|a| a.iter().all(|v| v.is_finite()))
            && det_coeffs.iter().all(|v| v.is_finite())
            && intercept.as_ref().is_none_or(|nu| nu.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::InvalidInput("VAR coefficients must be finite".into()));
        }
        let has_intercept = intercept.is_some();
        Ok(Self {
            intercept: intercept.unwrap_or_else(|| DVector::zeros(n)),
            lag_coeffs,
            det_coeffs,
            has_intercept,
        })
    }

    /// VAR with all coefficients zero (`u_t = y_t`).
    pub fn zero(nvars: usize, spec: VarSpec, nterms: usize) -> Self {
        Self {
            intercept: DVector::zeros(nvars),
            lag_coeffs: vec![DMatrix::zeros(nvars, nvars); spec.lags],
            det_coeffs: DMatrix::zeros(nvars, nterms),
            has_intercept: spec.intercept,
        }
    }

    /// Rebuilds the coefficients from the stacked k×n matrix `Π`.
    pub fn from_stacked(stacked: &DMatrix<f64>, nvars: usize, spec: VarSpec, nterms: usize) -> Result<Self> {
        let k = spec.nregressors(nvars, nterms);
        if stacked.nrows() != k || stacked.ncols() != nvars {
            return Err(Error::DimensionMismatch(format!(
                "stacked coefficients are {}×{}, expected {k}×{nvars}",
                stacked.nrows(),
                stacked.ncols()
            )));
        }
        let mut row = 0;
        let intercept = if spec.intercept {
            row = 1;
            Some(stacked.row(0).transpose())
        } else {
            None
        };
        let mut lags = Vec::with_capacity(spec.lags);
        for _ in 0..spec.lags {
            lags.push(stacked.rows(row, nvars).transpose());
            row += nvars;
        }
        let det = stacked.rows(row, nterms).transpose();
        Self::new(intercept, lags, det)
    }

    /// Stacked k×n coefficient matrix `Π` with `Y = X Π + U`.
    pub fn to_stacked(&self) -> DMatrix<f64> {
        let n = self.nvars();
        let k = self.spec().nregressors(n, self.nterms());
        let mut out = DMatrix::zeros(k, n);
        let mut row = 0;
        if self.has_intercept {
            out.row_mut(0).copy_from(&self.intercept.transpose());
            row = 1;
        }
        for a in &self.lag_coeffs {
            out.rows_mut(row, n).copy_from(&a.transpose());
            row += n;
        }
        out.rows_mut(row, self.nterms()).copy_from(&self.det_coeffs.transpose());
        out
    }

    pub fn spec(&self) -> VarSpec {
        VarSpec::new(self.lags(), self.has_intercept)
    }

    pub fn nvars(&self) -> usize {
        self.det_coeffs.nrows()
    }

    pub fn lags(&self) -> usize {
        self.lag_coeffs.len()
    }

    pub fn nterms(&self) -> usize {
        self.det_coeffs.ncols()
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.intercept
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn lag_coeffs(&self) -> &[DMatrix<f64>] {
        &self.lag_coeffs
    }

    pub fn det_coeffs(&self) -> &DMatrix<f64> {
        &self.det_coeffs
    }
}

/// Invertible n×n impact matrix B with `u_t = B ε_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatrix(DMatrix<f64>);

impl StructuralMatrix {
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        if !b.is_square() {
            return Err(Error::DimensionMismatch("structural matrix must be square".into()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("structural matrix has non-finite entries".into()));
        }
        let det = b.determinant();
        if det.abs() <= SINGULAR_DET_TOL {
            return Err(Error::SingularMatrix { det });
        }
        Ok(Self(b))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        // Checked non-singular at construction.
        self.0.clone().try_inverse().expect("structural matrix is invertible")
    }

    pub fn log_abs_det(&self) -> f64 {
        self.0.clone().lu().determinant().abs().ln()
    }
}

/// Regressor matrix X (T×k) for the given panel, design and specification.
pub fn regressors(panel: &TimeSeriesPanel, design: &DeterministicDesign, spec: VarSpec) -> Result<DMatrix<f64>> {
    let t_obs = panel.nobs();
    let n = panel.nvars();
    if design.nobs() != t_obs {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows, panel has {t_obs}",
            design.nobs()
        )));
    }
    if panel.presample().nrows() < spec.lags {
        return Err(Error::InsufficientSample {
            observations: panel.presample().nrows(),
            regressors: spec.lags,
        });
    }
    let k = spec.nregressors(n, design.nterms());
    let mut x = DMatrix::zeros(t_obs, k);
    for t in 0..t_obs {
        let mut col = 0;
        if spec.intercept {
            x[(t, 0)] = 1.0;
            col = 1;
        }
        for lag in 1..=spec.lags {
            for i in 0..n {
                x[(t, col)] = panel.lagged(t, lag, i)?;
                col += 1;
            }
        }
        for j in 0..design.nterms() {
            x[(t, col + j)] = design.terms()[(t, j)];
        }
    }
    Ok(x)
}

/// Least-squares coefficients `Π` for `Y = X Π + U`, with a rank check.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (t_obs, k) = x.shape();
    if k == 0 {
        return Ok(DMatrix::zeros(0, y.ncols()));
    }
    if t_obs <= k {
        return Err(Error::InsufficientSample {
            observations: t_obs,
            regressors: k,
        });
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (t_obs.max(k) as f64) * f64::EPSILON * 16.0;
    let rank = svd.rank(tol);
    if rank < k {
        return Err(Error::SingularDesign { rank, cols: k });
    }
    svd.solve(y, tol).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Equation-by-equation least squares. Returns the fitted VAR and the T×n residuals.
pub fn fit_ols(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    spec: VarSpec,
) -> Result<(ReducedFormVar, DMatrix<f64>)> {
    let x = regressors(panel, design, spec)?;
    let k = x.ncols();
    if panel.nobs() <= k {
        return Err(Error::InsufficientSample {
            observations: panel.nobs(),
            regressors: k,
        });
    }
    let coeffs = least_squares(&x, panel.values())?;
    let residuals = panel.values() - &x * &coeffs;
    let var = ReducedFormVar::from_stacked(&coeffs, panel.nvars(), spec, design.nterms())?;
    Ok((var, residuals))
}

/// Reduced-form residuals `u_t = y_t - ν - Σ A_i y_{t-i} - γ x_t`.
pub fn residuals(panel: &TimeSeriesPanel, design: &DeterministicDesign, var: &ReducedFormVar) -> Result<DMatrix<f64>> {
    if var.nvars() != panel.nvars() || var.nterms() != design.nterms() {
        return Err(Error::DimensionMismatch("VAR does not match panel/design".into()));
    }
    let x = regressors(panel, design, var.spec())?;
    Ok(panel.values() - x * var.to_stacked())
}

/// Innovations `e_t = B^{-1} u_t` stacked as rows: `E = U B^{-T}`.
pub fn innovations_from_residuals(residuals: &DMatrix<f64>, b: &StructuralMatrix) -> Result<DMatrix<f64>> {
    if residuals.ncols() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} residual columns for a {}×{} structural matrix",
            residuals.ncols(),
            b.dim(),
            b.dim()
        )));
    }
    Ok(residuals * b.inverse().transpose())
}

/// Structural innovations `e_t(B, π)` for every observation (T×n).
pub fn structural_innovations(
    panel: &TimeSeriesPanel,
    design: &DeterministicDesign,
    var: &ReducedFormVar,
    b: &StructuralMatrix,
) -> Result<DMatrix<f64>> {
    let u = residuals(panel, design, var)?;
    innovations_from_residuals(&u, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub stable: bool,
    pub max_modulus: f64,
}

/// Companion matrix of the lag polynomial (np×np).
pub fn companion_matrix(var: &ReducedFormVar) -> DMatrix<f64> {
    let n = var.nvars();
    let p = var.lags();
    let mut c = DMatrix::zeros(n * p, n * p);
    for (i, a) in var.lag_coeffs().iter().enumerate() {
        c.view_mut((0, i * n), (n, n)).copy_from(a);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    c
}

/// Stable iff every companion eigenvalue has modulus below `1 - tol`.
pub fn is_stable(var: &ReducedFormVar, tol: f64) -> Stability {
    if var.lags() == 0 {
        return Stability {
            stable: true,
            max_modulus: 0.0,
        };
    }
    let max_modulus = companion_matrix(var)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Stability {
        stable: max_modulus < 1.0 - tol,
        max_modulus,
    }
}

/// Structural impulse responses for horizons `0..=horizon`; element `[h][(i, j)]`
/// is the response of variable i to shock j after h periods.
pub fn impulse_responses(var: &ReducedFormVar, b: &StructuralMatrix, horizon: usize) -> Vec<DMatrix<f64>> {
    let n = var.nvars();
    let p = var.lags();
    // Reduced-form MA coefficients Ψ_h = Σ_{i=1}^{min(h,p)} A_i Ψ_{h-i}, the
    // top-left block of the h-th companion power.
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    psi.push(DMatrix::identity(n, n));
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(n, n);
        for i in 1..=p.min(h) {
            acc += &var.lag_coeffs()[i - 1] * &psi[h - i];
        }
        psi.push(acc);
    }
    psi.into_iter().map(|m| m * b.matrix()).collect()
}

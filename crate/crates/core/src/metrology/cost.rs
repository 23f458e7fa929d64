use nalgebra::{DMatrix, SymmetricEigen};

use super::sensitivity::SensitivityMatrix;
use crate::{Error, Result};

pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

/// `(Δθ)² = (Δ_man)² + (Δ_st)²`.
pub fn combine_tolerances(manufacturing: f64, stochastic: f64) -> Result<f64> {
    for x in [manufacturing, stochastic] {
        if x.is_nan() || x < 0.0 {
            return Err(Error::NegativeTolerance(x));
        }
    }
    Ok(manufacturing * manufacturing + stochastic * stochastic)
}

/// Per-component tolerance, in rad.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerance {
    pub manufacturing: f64,
    pub stochastic: f64,
}

/// Real symmetric positive semi-definite cost matrix `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub labels: Vec<String>,
    /// rad².
    pub matrix: DMatrix<f64>,
    pub tolerances: Option<Vec<Tolerance>>,
}

impl CostMatrix {
    pub fn identity(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            matrix: DMatrix::identity(n, n),
            tolerances: None,
        }
    }

    /// Diagonal matrix of combined variances.
    pub fn from_tolerances(labels: Vec<String>, tolerances: Vec<Tolerance>) -> Result<Self> {
        if labels.len() != tolerances.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: tolerances.len(),
            });
        }
        let diag = tolerances
            .iter()
            .map(|t| combine_tolerances(t.manufacturing, t.stochastic))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels,
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
            tolerances: Some(tolerances),
        })
    }

    /// Checks symmetry and positive semi-definiteness.
    pub fn from_matrix(labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: matrix.nrows(),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("cost matrix has non-finite entries".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        if !labels.is_empty() {
            let min = SymmetricEigen::new(matrix.clone()).eigenvalues.min();
            if min < -1e-10 * matrix.amax().max(1.0) {
                return Err(Error::NotPsd(min));
            }
        }
        Ok(Self {
            labels,
            matrix,
            tolerances: None,
        })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(Error::NotPsd(c));
        }
        Ok(Self {
            labels: self.labels.clone(),
            matrix: &self.matrix * c,
            tolerances: None,
        })
    }
}

/// `Tr(R·S)`.
pub fn total_cost(s: &SensitivityMatrix, r: &CostMatrix) -> Result<f64> {
    if s.labels != r.labels {
        return Err(Error::LabelMismatch(format!(
            "sensitivity {:?} vs cost {:?}",
            s.labels, r.labels
        )));
    }
    Ok((&r.matrix * &s.matrix).trace())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    ABetter,
    BBetter,
    Tie,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ABetter => "a-better",
            Verdict::BBetter => "b-better",
            Verdict::Tie => "tie",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub cost_a: f64,
    pub cost_b: f64,
    pub verdict: Verdict,
    pub epsilon: f64,
    pub singular_a: bool,
    pub singular_b: bool,
    /// `Tr(R S⁻¹)`, the single-shot Cramér-Rao figure; `None` when `S` is singular.
    pub cramer_rao_a: Option<f64>,
    pub cramer_rao_b: Option<f64>,
}

fn cramer_rao(s: &SensitivityMatrix, r: &CostMatrix) -> Option<f64> {
    if s.is_singular() {
        return None;
    }
    s.matrix.clone().try_inverse().map(|inv| (&r.matrix * inv).trace())
}

/// The implementation with the smaller `Tr(R·S)` is better; costs within
/// `epsilon` tie.
pub fn compare_implementations(
    a: (&SensitivityMatrix, &CostMatrix),
    b: (&SensitivityMatrix, &CostMatrix),
    epsilon: f64,
) -> Result<Comparison> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::NegativeTolerance(epsilon));
    }
    let cost_a = total_cost(a.0, a.1)?;
    let cost_b = total_cost(b.0, b.1)?;
    let verdict = if (cost_a - cost_b).abs() <= epsilon {
        Verdict::Tie
    } else if cost_a < cost_b {
        Verdict::ABetter
    } else {
        Verdict::BBetter
    };
    Ok(Comparison {
        cost_a,
        cost_b,
        verdict,
        epsilon,
        singular_a: a.0.is_singular(),
        singular_b: b.0.is_singular(),
        cramer_rao_a: cramer_rao(a.0, a.1),
        cramer_rao_b: cramer_rao(b.0, b.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::CONVENTION;

    fn smat(labels: &[&str], m: DMatrix<f64>) -> SensitivityMatrix {
        SensitivityMatrix {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            matrix: m,
            convention: CONVENTION.into(),
            probability: 1.0,
        }
    }

    #[test]
    fn tolerances_combine_in_quadrature() {
        assert_eq!(combine_tolerances(0.0, 0.3).unwrap(), 0.09);
        assert_eq!(combine_tolerances(3.0, 4.0).unwrap(), 25.0);
        assert_eq!(
            combine_tolerances(1.5, 0.2).unwrap(),
            combine_tolerances(0.2, 1.5).unwrap()
        );
        assert!(matches!(
            combine_tolerances(-1.0, 0.0),
            Err(Error::NegativeTolerance(_))
        ));
        assert!(combine_tolerances(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn cost_matrix_validation() {
        let l = vec!["a".to_string(), "b".to_string()];
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CostMatrix::from_matrix(l.clone(), bad), Err(Error::NotPsd(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            CostMatrix::from_matrix(l.clone(), asym),
            Err(Error::NotSymmetric(_))
        ));
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(CostMatrix::from_matrix(l.clone(), ok).is_ok());
        let r = CostMatrix::from_tolerances(
            l,
            vec![
                Tolerance {
                    manufacturing: 3.0,
                    stochastic: 4.0,
                },
                Tolerance {
                    manufacturing: 0.0,
                    stochastic: 1.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(r.matrix[(0, 0)], 25.0);
        assert_eq!(r.matrix[(1, 1)], 1.0);
    }

    #[test]
    fn total_cost_is_trace_and_linear() {
        let s = smat(&["a", "b"], DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 5.0]));
        let r = CostMatrix::identity(s.labels.clone());
        assert_eq!(total_cost(&s, &r).unwrap(), 7.0);
        let r3 = r.scaled(3.0).unwrap();
        assert!((total_cost(&s, &r3).unwrap() - 21.0).abs() < 1e-12);
        let wrong = CostMatrix::identity(vec!["a".into(), "c".into()]);
        assert!(matches!(total_cost(&s, &wrong), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn comparison_verdicts() {
        let s = smat(&["a", "b"], DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 5.0]));
        let r = CostMatrix::identity(s.labels.clone());
        let c = compare_implementations((&s, &r), (&s, &r), DEFAULT_TIE_EPSILON).unwrap();
        assert_eq!(c.verdict, Verdict::Tie);
        assert!(c.cramer_rao_a.is_some());
        let t = smat(&["x"], DMatrix::from_row_slice(1, 1, &[9.0]));
        let rt = CostMatrix::identity(t.labels.clone());
        let c = compare_implementations((&s, &r), (&t, &rt), DEFAULT_TIE_EPSILON).unwrap();
        assert_eq!(c.verdict, Verdict::ABetter);
        let c2 = compare_implementations((&s, &r.scaled(4.0).unwrap()), (&t, &rt.scaled(4.0).unwrap()), 1e-9).unwrap();
        assert_eq!(c2.verdict, Verdict::ABetter);
        let sing = smat(&["a", "b"], DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        let c = compare_implementations((&sing, &r), (&s, &r), 1e-9).unwrap();
        assert!(c.singular_a && c.cramer_rao_a.is_none());
        assert_eq!(c.verdict, Verdict::ABetter);
    }
}

use sha2::{Digest, Sha256};

use super::{AllocGuard, Dictionary};
use crate::error::{Error, Result};
use crate::linalg::{kron, unvec, CMat, CVec};

/// Measurement matrix `Ψ = Θ^T ⊗ P`, kept in factored form.
#[derive(Debug, Clone)]
pub struct Measurement {
    /// `N_I × M_I` (conventional) or `N_I² × M_I` (exact).
    pub theta: CMat,
    /// `M_B × N_U N_B`.
    pub p: CMat,
}

impl Measurement {
    pub fn dense(&self, guard: &AllocGuard) -> Result<CMat> {
        let rows = self.theta.ncols() * self.p.nrows();
        let cols = self.theta.nrows() * self.p.ncols();
        guard.check("measurement matrix", rows, cols)?;
        Ok(kron(&self.theta.transpose(), &self.p))
    }
}

/// Sensing matrix Ξ, either explicit or as `left ⊗ right`.
#[derive(Debug, Clone)]
pub enum SensingOperator {
    Dense(CMat),
    /// `Ξ = left ⊗ right` with `left = Θ^T·(RIS atoms)` and `right = P·Ã_UB`.
    Kron { left: CMat, right: CMat },
}

impl SensingOperator {
    pub fn nrows(&self) -> usize {
        match self {
            SensingOperator::Dense(m) => m.nrows(),
            SensingOperator::Kron { left, right } => left.nrows() * right.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            SensingOperator::Dense(m) => m.ncols(),
            SensingOperator::Kron { left, right } => left.ncols() * right.ncols(),
        }
    }

    pub fn column(&self, j: usize) -> CVec {
        match self {
            SensingOperator::Dense(m) => m.column(j).into_owned(),
            SensingOperator::Kron { left, right } => {
                let nr = right.ncols();
                let a = left.column(j / nr);
                let b = right.column(j % nr);
                CVec::from_iterator(
                    a.len() * b.len(),
                    a.iter().flat_map(|x| b.iter().map(move |y| x * y)),
                )
            }
        }
    }

    /// Columns listed in `cols`, as a dense matrix.
    pub fn columns(&self, cols: &[usize]) -> CMat {
        let mut out = CMat::zeros(self.nrows(), cols.len());
        for (k, &j) in cols.iter().enumerate() {
            out.set_column(k, &self.column(j));
        }
        out
    }

    /// `Ξ^H r`.
    pub fn correlate(&self, r: &CVec) -> CVec {
        match self {
            SensingOperator::Dense(m) => m.ad_mul(r),
            SensingOperator::Kron { left, right } => {
                // (L ⊗ R)^H vec(X) = vec(R^H X conj(L))
                let x = unvec(r, right.nrows(), left.nrows());
                let out = right.adjoint() * x * left.conjugate();
                CVec::from_column_slice(out.as_slice())
            }
        }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        match self {
            SensingOperator::Dense(m) => (0..m.ncols()).map(|j| m.column(j).norm()).collect(),
            SensingOperator::Kron { left, right } => {
                let rn: Vec<f64> = (0..right.ncols()).map(|j| right.column(j).norm()).collect();
                (0..left.ncols())
                    .flat_map(|i| {
                        let ln = left.column(i).norm();
                        rn.iter().map(move |r| ln * r)
                    })
                    .collect()
            }
        }
    }

    /// `Ξ x` for a sparse `x` given by support and values.
    pub fn apply_sparse(&self, support: &[usize], coeffs: &CVec) -> CVec {
        let mut out = CVec::zeros(self.nrows());
        for (&j, &c) in support.iter().zip(coeffs.iter()) {
            out += self.column(j) * c;
        }
        out
    }

    pub fn materialize(&self, guard: &AllocGuard) -> Result<CMat> {
        match self {
            SensingOperator::Dense(m) => Ok(m.clone()),
            SensingOperator::Kron { left, right } => {
                guard.check("sensing matrix", self.nrows(), self.ncols())?;
                Ok(kron(left, right))
            }
        }
    }

    fn hash_into(&self, h: &mut Sha256) {
        let feed = |h: &mut Sha256, tag: u8, m: &CMat| {
            h.update([tag]);
            h.update((m.nrows() as u64).to_le_bytes());
            h.update((m.ncols() as u64).to_le_bytes());
            for z in m.iter() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        };
        match self {
            SensingOperator::Dense(m) => feed(h, 0, m),
            SensingOperator::Kron { left, right } => {
                feed(h, 1, left);
                feed(h, 2, right);
            }
        }
    }

    /// Content hash identifying this operator, hex encoded.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        self.hash_into(&mut h);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Sparse-recovery problem `y = Ξ σ + noise`.
#[derive(Debug, Clone)]
pub struct SensingProblem {
    pub xi: SensingOperator,
    pub y: CVec,
}

impl SensingProblem {
    pub fn new(xi: SensingOperator, y: CVec) -> Result<Self> {
        if xi.nrows() != y.len() {
            return Err(Error::Dim(format!(
                "sensing matrix has {} rows, observation has {}",
                xi.nrows(),
                y.len()
            )));
        }
        Ok(Self { xi, y })
    }

    pub fn with_observation(&self, y: CVec) -> Result<Self> {
        Self::new(self.xi.clone(), y)
    }
}

/// `Ξ = Ψ D̄` for a factored measurement and joint dictionary, using
/// `(Θ^T ⊗ P)(A ⊗ B) = (Θ^T A) ⊗ (P B)`.
pub fn sensing(y: &CVec, psi: &Measurement, d: &Dictionary) -> Result<SensingProblem> {
    if psi.p.ncols() != d.ub.nrows() {
        return Err(Error::Dim(format!(
            "P has {} columns, UE/BS atoms have dimension {}",
            psi.p.ncols(),
            d.ub.nrows()
        )));
    }
    let left = d.ris.project(&psi.theta)?;
    let right = &psi.p * &d.ub;
    SensingProblem::new(SensingOperator::Kron { left, right }, y.clone())
}

/// `Ξ = Ψ D` for explicit matrices.
pub fn sensing_dense(y: &CVec, psi: &CMat, d: &CMat) -> Result<SensingProblem> {
    if psi.ncols() != d.nrows() {
        return Err(Error::Dim(format!(
            "Psi has {} columns, dictionary atoms have dimension {}",
            psi.ncols(),
            d.nrows()
        )));
    }
    SensingProblem::new(SensingOperator::Dense(psi * d), y.clone())
}

//! Quantized angular dictionaries, the conventional (Khatri-Rao) and exact
//! (Kronecker) RIS dictionaries, column deduplication and sensing operators.
//!
//! A joint dictionary is always `RIS part ⊗ Ã_UB`; joint column `j` maps to
//! RIS atom `j / G_UB` and UE/BS atom `j % G_UB`.

mod cache;
mod sensing;

pub use cache::{load_operator, save_operator, SensingCache};
pub use sensing::{sensing, sensing_dense, Measurement, SensingOperator, SensingProblem};

use crate::channel::{spatial_arv, ArrayGeometry};
use crate::error::{Error, Result};
use crate::linalg::{face_split, kron, unvec, CMat, CVec};

/// Columns closer than this (relative to their norm) are the same atom.
pub const DEDUP_TOL: f64 = 1e-9;

/// Default ceiling for dense materialization, 2 GiB.
pub const DEFAULT_ALLOC_LIMIT: usize = 2 << 30;

/// Refuses dense allocations above a byte limit.
#[derive(Debug, Clone, Copy)]
pub struct AllocGuard {
    pub limit_bytes: usize,
}

impl Default for AllocGuard {
    fn default() -> Self {
        Self {
            limit_bytes: DEFAULT_ALLOC_LIMIT,
        }
    }
}

impl AllocGuard {
    pub fn check(&self, what: &'static str, rows: usize, cols: usize) -> Result<()> {
        let bytes = rows
            .saturating_mul(cols)
            .saturating_mul(std::mem::size_of::<crate::linalg::C64>());
        if bytes > self.limit_bytes {
            return Err(Error::Alloc {
                what,
                bytes,
                limit: self.limit_bytes,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub g_h: usize,
    pub g_v: usize,
    pub geometry: ArrayGeometry,
}

impl GridSpec {
    pub fn new(g_h: usize, g_v: usize, geometry: ArrayGeometry) -> Result<Self> {
        if g_h < geometry.n_h || g_v < geometry.n_v {
            return Err(Error::Param(format!(
                "grid {g_h}x{g_v} is coarser than the {}x{} array",
                geometry.n_h, geometry.n_v
            )));
        }
        Ok(Self { g_h, g_v, geometry })
    }

    /// Grid with one point per element in each dimension.
    pub fn matched(geometry: ArrayGeometry) -> Self {
        Self {
            g_h: geometry.n_h,
            g_v: geometry.n_v,
            geometry,
        }
    }

    pub fn g(&self) -> usize {
        self.g_h * self.g_v
    }
}

/// Grid spatial frequency `(2d/(λG))(g − (G+1)/2)` for 1-based `g`.
pub fn grid_angle(spacing: f64, wavelength: f64, g_count: usize, g: usize) -> f64 {
    2.0 * spacing / (wavelength * g_count as f64) * (g as f64 - (g_count as f64 + 1.0) / 2.0)
}

/// `N × G` dictionary; column `g_h + g_v·G_h` (0-based) holds the response
/// at the grid point `(g_h, g_v)`.
pub fn grid_arv_matrix(spec: &GridSpec, wavelength: f64) -> CMat {
    let geom = &spec.geometry;
    let mut m = CMat::zeros(geom.n(), spec.g());
    for gv in 0..spec.g_v {
        let bv = grid_angle(geom.spacing, wavelength, spec.g_v, gv + 1);
        for gh in 0..spec.g_h {
            let bh = grid_angle(geom.spacing, wavelength, spec.g_h, gh + 1);
            m.set_column(gh + gv * spec.g_h, &spatial_arv(geom.n_h, geom.n_v, bh, bv));
        }
    }
    m
}

/// Keeps the first column of every class of columns within `tol` of each
/// other. `index_map[k]` is the retained position representing column `k`.
pub fn dedup_columns(m: &CMat, tol: f64) -> (CMat, Vec<usize>) {
    let tol2 = tol * tol;
    let mut kept: Vec<usize> = Vec::new();
    let mut index_map = Vec::with_capacity(m.ncols());
    for k in 0..m.ncols() {
        let col = m.column(k);
        let found = kept.iter().position(|&r| {
            let other = m.column(r);
            let mut acc = 0.0;
            for i in 0..col.len() {
                acc += (col[i] - other[i]).norm_sqr();
                if acc > tol2 {
                    return false;
                }
            }
            true
        });
        match found {
            Some(pos) => index_map.push(pos),
            None => {
                index_map.push(kept.len());
                kept.push(k);
            }
        }
    }
    let mut out = CMat::zeros(m.nrows(), kept.len());
    for (pos, &k) in kept.iter().enumerate() {
        out.set_column(pos, &m.column(k));
    }
    (out, index_map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictKind {
    /// Conventional joint dictionary with distinct RIS columns.
    Dcv,
    /// Exact joint dictionary `Ã_II ⊗ Ã_UB`.
    Dmc,
    /// Exact dictionary restricted by dictionary reduction.
    DR,
}

/// RIS-side atoms of a joint dictionary.
#[derive(Debug, Clone)]
pub enum RisAtoms {
    /// Explicit columns (`N_I` tall for the conventional model).
    Dense(CMat),
    /// Columns `a_i[:, g1] ⊗ a_i[:, g2]` of `Ã_I ⊗ Ã_I` for the listed
    /// `(g1, g2)`; column `g1·G_I + g2` of the full product. Never materialized.
    Kron { a_i: CMat, cols: Vec<(usize, usize)> },
}

impl RisAtoms {
    pub fn dim(&self) -> usize {
        match self {
            RisAtoms::Dense(m) => m.nrows(),
            RisAtoms::Kron { a_i, .. } => a_i.nrows() * a_i.nrows(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            RisAtoms::Dense(m) => m.ncols(),
            RisAtoms::Kron { cols, .. } => cols.len(),
        }
    }

    pub fn column(&self, k: usize) -> CVec {
        match self {
            RisAtoms::Dense(m) => m.column(k).into_owned(),
            RisAtoms::Kron { a_i, cols } => {
                let (g1, g2) = cols[k];
                let a = a_i.column(g1).into_owned();
                let b = a_i.column(g2).into_owned();
                CVec::from_iterator(
                    a.len() * b.len(),
                    a.iter().flat_map(|x| b.iter().map(move |y| x * y)),
                )
            }
        }
    }

    /// `Θ^T · atoms`, `M_I × count`, where the columns of Θ are vectorized
    /// RIS responses (or plain γ for dense conventional atoms).
    pub fn project(&self, theta: &CMat) -> Result<CMat> {
        if theta.nrows() != self.dim() {
            return Err(Error::Dim(format!(
                "theta has {} rows, atoms have dimension {}",
                theta.nrows(),
                self.dim()
            )));
        }
        match self {
            RisAtoms::Dense(m) => Ok(theta.transpose() * m),
            RisAtoms::Kron { a_i, cols } => {
                let n = a_i.nrows();
                let at = a_i.transpose();
                // only the g1 columns in use need Γ̄ a_g1
                let mut slot = vec![usize::MAX; a_i.ncols()];
                let mut used = Vec::new();
                for &(g1, _) in cols {
                    if slot[g1] == usize::MAX {
                        slot[g1] = used.len();
                        used.push(g1);
                    }
                }
                let a_used = a_i.select_columns(&used);
                let mut out = CMat::zeros(theta.ncols(), cols.len());
                for m in 0..theta.ncols() {
                    let gbar = unvec(&theta.column(m).into_owned(), n, n);
                    // (a ⊗ b)^T vec(Γ̄) = b^T Γ̄ a
                    let right = gbar * &a_used;
                    if used.len() * 2 > a_i.ncols() {
                        let prod = &at * right;
                        for (k, &(g1, g2)) in cols.iter().enumerate() {
                            out[(m, k)] = prod[(g2, slot[g1])];
                        }
                    } else {
                        for (k, &(g1, g2)) in cols.iter().enumerate() {
                            out[(m, k)] = a_i
                                .column(g2)
                                .iter()
                                .zip(right.column(slot[g1]).iter())
                                .map(|(x, y)| x * y)
                                .sum();
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn materialize(&self, guard: &AllocGuard) -> Result<CMat> {
        guard.check("RIS atoms", self.dim(), self.count())?;
        let mut out = CMat::zeros(self.dim(), self.count());
        for k in 0..self.count() {
            out.set_column(k, &self.column(k));
        }
        Ok(out)
    }
}

/// Joint dictionary `ris ⊗ ub`.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub kind: DictKind,
    pub ris: RisAtoms,
    /// `Ã_UB = Ã_U ⊗ Ã_B`, `N_U N_B × G_U G_B`.
    pub ub: CMat,
    /// Originating `(g1, g2)` RIS grid indices of every RIS atom.
    pub ris_meta: Vec<(usize, usize)>,
}

impl Dictionary {
    pub fn ub_count(&self) -> usize {
        self.ub.ncols()
    }

    pub fn n_atoms(&self) -> usize {
        self.ris.count() * self.ub_count()
    }

    pub fn atom_dim(&self) -> usize {
        self.ris.dim() * self.ub.nrows()
    }

    /// Joint column to (RIS atom, UE/BS atom).
    pub fn split(&self, j: usize) -> (usize, usize) {
        (j / self.ub_count(), j % self.ub_count())
    }

    pub fn atom(&self, j: usize) -> CVec {
        let (r, u) = self.split(j);
        let a = self.ris.column(r);
        let b = self.ub.column(u);
        CVec::from_iterator(
            a.len() * b.len(),
            a.iter().flat_map(|x| b.iter().map(move |y| x * y)),
        )
    }

    pub fn materialize(&self, guard: &AllocGuard) -> Result<CMat> {
        guard.check("joint dictionary", self.atom_dim(), self.n_atoms())?;
        let mut out = CMat::zeros(self.atom_dim(), self.n_atoms());
        for j in 0..self.n_atoms() {
            out.set_column(j, &self.atom(j));
        }
        Ok(out)
    }

    /// `G` (`N_UB × ris dim`) with `vec(G) = Σ_j coeffs_j · atom_j`.
    pub fn reconstruct(&self, support: &[usize], coeffs: &CVec) -> CMat {
        let mut g = CMat::zeros(self.ub.nrows(), self.ris.dim());
        for (&j, &c) in support.iter().zip(coeffs.iter()) {
            let (r, u) = self.split(j);
            let ra = self.ris.column(r);
            let ub = self.ub.column(u);
            for col in 0..ra.len() {
                let s = c * ra[col];
                if s.norm_sqr() == 0.0 {
                    continue;
                }
                for row in 0..ub.len() {
                    g[(row, col)] += s * ub[row];
                }
            }
        }
        g
    }
}

/// Grid matrices shared by the estimators.
#[derive(Debug, Clone)]
pub struct Dictionaries {
    /// `Ã_I`, `N_I × G_I`.
    pub a_i: CMat,
    /// `Ã_UB`.
    pub a_ub: CMat,
    /// Distinct conventional RIS columns, `N_I × Ḡ_II`.
    pub cv: Dictionary,
    /// Exact dictionary over all `G_I²` RIS atoms.
    pub mc: Dictionary,
}

impl Dictionaries {
    /// `Ḡ_II`.
    pub fn g_ii_distinct(&self) -> usize {
        self.cv.ris.count()
    }
}

/// Builds `D̄_cv = Ā_II^cv ⊗ Ã_UB` (deduplicated) and `D̃_mc = Ã_II ⊗ Ã_UB`.
pub fn build_dictionaries(
    spec_u: &GridSpec,
    spec_b: &GridSpec,
    spec_i: &GridSpec,
    wavelength: f64,
) -> Result<Dictionaries> {
    let a_u = grid_arv_matrix(spec_u, wavelength);
    let a_b = grid_arv_matrix(spec_b, wavelength);
    let a_i = grid_arv_matrix(spec_i, wavelength);
    let a_ub = kron(&a_u, &a_b);
    let g_i = spec_i.g();
    AllocGuard::default().check("Khatri-Rao RIS dictionary", a_i.nrows(), g_i * g_i)?;
    let kr = face_split(&a_i, &a_i);
    // Khatri-Rao columns have norm 1/√N_I
    let tol = DEDUP_TOL / (a_i.nrows() as f64).sqrt();
    let (distinct, map) = dedup_columns(&kr, tol);
    let mut meta = vec![(usize::MAX, usize::MAX); distinct.ncols()];
    for (k, &pos) in map.iter().enumerate() {
        if meta[pos].0 == usize::MAX {
            meta[pos] = (k / g_i, k % g_i);
        }
    }
    let all: Vec<(usize, usize)> = (0..g_i).flat_map(|a| (0..g_i).map(move |b| (a, b))).collect();
    Ok(Dictionaries {
        cv: Dictionary {
            kind: DictKind::Dcv,
            ris: RisAtoms::Dense(distinct),
            ub: a_ub.clone(),
            ris_meta: meta,
        },
        mc: Dictionary {
            kind: DictKind::Dmc,
            ris: RisAtoms::Kron {
                a_i: a_i.clone(),
                cols: all.clone(),
            },
            ub: a_ub.clone(),
            ris_meta: all,
        },
        a_i,
        a_ub,
    })
}

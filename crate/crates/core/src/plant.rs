//! Linear agent plants `x' = Ax + Bu`, `y = Cx`, their coordinate
//! partition and the output-tracking controller.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue margin for Hurwitz and definiteness checks.
pub const EIG_MARGIN: f64 = 1e-9;

/// `(A, B, C)` in coordinates where the top `n1` rows of `B` vanish.
#[derive(Debug, Clone)]
pub struct Partition {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub n1: usize,
    /// Orthogonal change of basis `x_new = T x_old`, when one was needed.
    pub transform: Option<DMatrix<f64>>,
}

/// Splits `(A, B, C)` so that `B = col{0, Bbar}` with `Bbar` square.
///
/// If `B` already has a zero top block of the right height it is used as
/// is. When `B` has no zero rows at all, an orthogonal `T` aligning the
/// range of `B` with the bottom coordinates is computed and the plant is
/// returned as `(T A T', T B, C T')`.
pub fn partition(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<Partition> {
    let n = a.nrows();
    let p = b.ncols();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    if p == 0 || n == 0 {
        return Err(Error::Dimension("plant needs at least one state and one input".into()));
    }

    let btb = SymmetricEigen::new(b.transpose() * b);
    let scale = btb.eigenvalues.amax().max(1.0);
    let rank = btb.eigenvalues.iter().filter(|&&e| e > 1e-12 * scale).count();
    if rank < p {
        return Err(Error::RankDeficient { rank, inputs: p });
    }

    let zero_rows = (0..n).take_while(|&i| b.row(i).iter().all(|&v| v == 0.0)).count();
    if zero_rows > 0 {
        let n2 = n - zero_rows;
        if n2 != p {
            return Err(Error::NonSquareInput { n2, p });
        }
        return Ok(Partition {
            a: a.clone(),
            b: b.clone(),
            c: c.clone(),
            n1: zero_rows,
            transform: None,
        });
    }
    if n == p {
        return Ok(Partition {
            a: a.clone(),
            b: b.clone(),
            c: c.clone(),
            n1: 0,
            transform: None,
        });
    }

    // Eigenvectors of B B' sorted by eigenvalue: the first n - p span the
    // left null space of B, the rest span its range.
    let eig = SymmetricEigen::new(b * b.transpose());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut t = DMatrix::zeros(n, n);
    for (row, &k) in order.iter().enumerate() {
        t.row_mut(row).copy_from(&eig.eigenvectors.column(k).transpose());
    }
    let n1 = n - p;
    let mut tb = &t * b;
    tb.rows_mut(0, n1).fill(0.0);
    Ok(Partition {
        a: &t * a * t.transpose(),
        b: tb,
        c: c * t.transpose(),
        n1,
        transform: Some(t),
    })
}

/// One agent's plant together with its tracking-controller gains.
#[derive(Debug, Clone)]
pub struct AgentModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub n1: usize,
    pub transform: Option<DMatrix<f64>>,
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    /// `p x n1`
    pub k: DMatrix<f64>,
    pub mu_bar: f64,
    pub f: DMatrix<f64>,
    pub k_bar: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl AgentModel {
    /// Partitions the plant and derives the controller matrices.
    ///
    /// `f` defaults to `mu_bar I + A12' A12`.
    pub fn new(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
        k: DMatrix<f64>,
        mu_bar: f64,
        f: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let part = partition(a, b, c)?;
        Self::from_partition(part, k, mu_bar, f)
    }

    pub fn from_partition(
        part: Partition,
        k: DMatrix<f64>,
        mu_bar: f64,
        f: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if !(mu_bar > 0.0 && mu_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu_bar must be positive, got {mu_bar}")));
        }
        let n = part.a.nrows();
        let n1 = part.n1;
        let p = n - n1;
        if k.nrows() != p || k.ncols() != n1 {
            return Err(Error::Dimension(format!(
                "K must be {p}x{n1}, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        let a11 = part.a.view((0, 0), (n1, n1)).into_owned();
        let a12 = part.a.view((0, n1), (n1, p)).into_owned();
        let a21 = part.a.view((n1, 0), (p, n1)).into_owned();
        let a22 = part.a.view((n1, n1), (p, p)).into_owned();
        let b_bar = part.b.view((n1, 0), (p, p)).into_owned();
        let gram = &b_bar * b_bar.transpose();
        let gram_inv = gram
            .try_inverse()
            .ok_or(Error::RankDeficient { rank: p.saturating_sub(1), inputs: p })?;
        let b_hat = b_bar.transpose() * gram_inv;

        let f = match f {
            Some(f) => {
                if f.nrows() != p || f.ncols() != p {
                    return Err(Error::Dimension(format!(
                        "F must be {p}x{p}, got {}x{}",
                        f.nrows(),
                        f.ncols()
                    )));
                }
                f
            }
            None => DMatrix::identity(p, p) * mu_bar + a12.transpose() * &a12,
        };

        let mut k_bar = DMatrix::zeros(p, n);
        k_bar.view_mut((0, 0), (p, n1)).copy_from(&k);
        k_bar
            .view_mut((0, n1), (p, p))
            .copy_from(&(-DMatrix::<f64>::identity(p, p)));
        let s = &k_bar * &part.a + &f * &k_bar;
        let mut d = DMatrix::zeros(p, 2 * n);
        d.view_mut((0, 0), (p, n)).copy_from(&(&f * &k_bar));
        d.view_mut((0, n), (p, n)).copy_from(&k_bar);

        Ok(AgentModel {
            a: part.a,
            b: part.b,
            c: part.c,
            n1,
            transform: part.transform,
            a11,
            a12,
            a21,
            a22,
            b_bar,
            b_hat,
            k,
            mu_bar,
            f,
            k_bar,
            s,
            d,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Maps a vector given in the original coordinates into the model's.
    pub fn to_model_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.transform {
            Some(t) => t * v,
            None => v.clone(),
        }
    }

    fn check_state(&self, name: &str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "{name} has length {}, expected {}",
                v.len(),
                self.state_dim()
            )));
        }
        Ok(())
    }

    /// `u = -Bhat (D col{delta, delta_dot} - S x)`
    pub fn controller(
        &self,
        x: &DVector<f64>,
        delta: &DVector<f64>,
        delta_dot: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check_state("x", x)?;
        self.check_state("delta", delta)?;
        self.check_state("delta_dot", delta_dot)?;
        let n = self.state_dim();
        let mut upsilon = DVector::zeros(2 * n);
        upsilon.rows_mut(0, n).copy_from(delta);
        upsilon.rows_mut(n, n).copy_from(delta_dot);
        Ok(-&self.b_hat * (&self.d * upsilon - &self.s * x))
    }

    /// The same law written as `Bhat F Kbar (x - delta) + Bhat Kbar (A x - delta_dot)`.
    pub fn controller_tracking_form(
        &self,
        x: &DVector<f64>,
        delta: &DVector<f64>,
        delta_dot: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check_state("x", x)?;
        self.check_state("delta", delta)?;
        self.check_state("delta_dot", delta_dot)?;
        let e = x - delta;
        Ok(&self.b_hat * (&self.f * (&self.k_bar * e) + &self.k_bar * (&self.a * x - delta_dot)))
    }

    pub fn tracking_error(&self, x: &DVector<f64>, delta: &DVector<f64>) -> TrackingError {
        let e = x - delta;
        TrackingError {
            chi1: e.rows(0, self.n1).into_owned(),
            chi2: &self.k_bar * e,
        }
    }

    pub fn steady_state_set(&self) -> SteadyStateSet {
        let n = self.state_dim();
        let mut top = DMatrix::zeros(self.n1, n);
        top.view_mut((0, 0), (self.n1, self.n1)).copy_from(&self.a11);
        top.view_mut((0, self.n1), (self.n1, n - self.n1))
            .copy_from(&self.a12);
        let kernel_basis = null_space(&top);
        let output_basis = &self.c * &kernel_basis;
        SteadyStateSet {
            kernel_basis,
            output_basis,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateSet {
    pub kernel_basis: DMatrix<f64>,
    pub output_basis: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct TrackingError {
    pub chi1: DVector<f64>,
    pub chi2: DVector<f64>,
}

/// Orthonormal basis of `ker(m)` (columns).
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let eig = SymmetricEigen::new(m.transpose() * m);
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<_> = (0..n)
        .filter(|&k| eig.eigenvalues[k].abs() <= 1e-12 * scale)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Theorem2Check {
    pub hurwitz: bool,
    pub lmi_ok: bool,
}

/// Checks that `Lambda = A12 K` is Hurwitz and that
/// `Lambda' P + P Lambda + 2 P^2 - mu_bar I` is negative definite.
pub fn verify_theorem2(
    a12: &DMatrix<f64>,
    k: &DMatrix<f64>,
    p: &DMatrix<f64>,
    mu_bar: f64,
) -> Result<Theorem2Check> {
    let n1 = a12.nrows();
    if k.nrows() != a12.ncols() || k.ncols() != n1 || p.nrows() != n1 || p.ncols() != n1 {
        return Err(Error::Dimension(format!(
            "A12 {}x{}, K {}x{}, P {}x{} are incompatible",
            a12.nrows(),
            a12.ncols(),
            k.nrows(),
            k.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    let asym = (p - p.transpose()).amax();
    if asym > 1e-12 * p.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite);
    }
    if n1 == 0 {
        return Ok(Theorem2Check {
            hurwitz: true,
            lmi_ok: true,
        });
    }
    let p_sym = (p + p.transpose()) * 0.5;
    if SymmetricEigen::new(p_sym.clone()).eigenvalues.min() <= EIG_MARGIN {
        return Err(Error::NotPositiveDefinite);
    }
    let lambda = a12 * k;
    let hurwitz = lambda
        .complex_eigenvalues()
        .iter()
        .all(|z| z.re < -EIG_MARGIN);
    let m = lambda.transpose() * &p_sym + &p_sym * &lambda + &p_sym * &p_sym * 2.0
        - DMatrix::identity(n1, n1) * mu_bar;
    let m = (&m + m.transpose()) * 0.5;
    let lmi_ok = SymmetricEigen::new(m).eigenvalues.max() < -EIG_MARGIN;
    Ok(Theorem2Check { hurwitz, lmi_ok })
}

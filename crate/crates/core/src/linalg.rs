//! Dense linear-algebra kernels used throughout the crate.
//!
//! Everything here works on `DMatrix<f64>` (or its complex counterpart) and
//! is sized for the small state dimensions met in controller synthesis
//! (tens of states at most). The ordered real Schur form is computed by
//! reordering nalgebra's Schur decomposition with direct block swaps.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub(crate) fn zeros(r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::zeros(r, c)
}

pub(crate) fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Assemble a block matrix from rows of blocks. Every block in a row must
/// share the row count; column widths must agree across rows.
pub fn block(rows: &[&[&DMatrix<f64>]]) -> DMatrix<f64> {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let mut out = zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            assert_eq!(b.nrows(), heights[i], "block row {i} height mismatch");
            assert_eq!(b.ncols(), widths[j], "block column {j} width mismatch");
            out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    out
}

pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(n, m);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert!(b.nrows() == 0 || b.ncols() == cols, "vstack width mismatch");
        if b.nrows() > 0 {
            out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        }
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert!(b.ncols() == 0 || b.nrows() == rows, "hstack height mismatch");
        if b.ncols() > 0 {
            out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        }
        c += b.ncols();
    }
    out
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .try_inverse()
        .filter(all_finite)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Solve `M X = B` by LU with partial pivoting.
pub fn solve(m: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(b.clone());
    }
    m.clone()
        .lu()
        .solve(b)
        .filter(all_finite)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve_complex(m: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    if m.nrows() == 0 {
        return Some(b.clone());
    }
    let x = m.clone().lu().solve(b)?;
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(x)
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

pub fn max_singular_value(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn min_singular_value_complex(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Orthonormal basis for the column space of `m`, keeping directions whose
/// singular value exceeds `tol * max(1, sigma_max)`.
pub fn orth(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let s = &svd.singular_values;
    let cutoff = tol * s.max().max(1.0);
    // nalgebra does not guarantee sorted singular values
    let mut idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cutoff).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut out = zeros(m.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Deterministic ordering for eigenvalue lists: real part, then imaginary part.
pub fn sort_eigenvalues(ev: &mut [C64]) {
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn real_schur(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !all_finite(m) {
        return Err(Error::NonFinite("matrix"));
    }
    let n = m.nrows();
    let s = Schur::try_new(m.clone(), f64::EPSILON, 10_000 * n.max(1)).ok_or(Error::EigenFailure)?;
    Ok(s.unpack())
}

/// Eigenvalues of a real square matrix, sorted by (real, imaginary) part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("eigenvalues of a {}x{} matrix", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = real_schur(m)?;
    let blocks = schur_blocks(&t);
    let mut ev = Vec::with_capacity(m.nrows());
    for &(i, sz) in &blocks {
        ev.extend(block_eigenvalues(&t, i, sz));
    }
    sort_eigenvalues(&mut ev);
    Ok(ev)
}

/// Quasi-triangular block structure of a real Schur factor: (start, size).
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

fn block_eigenvalues(t: &DMatrix<f64>, i: usize, size: usize) -> Vec<C64> {
    if size == 1 {
        return vec![C64::new(t[(i, i)], 0.0)];
    }
    let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        vec![C64::new(half_tr - s, 0.0), C64::new(half_tr + s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        vec![C64::new(half_tr, -s), C64::new(half_tr, s)]
    }
}

/// Spectral abscissa: the largest real part over all eigenvalues.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Margin used by [`is_stable`]: spectral abscissa must be below `-STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

pub fn is_stable(m: &DMatrix<f64>) -> Result<bool> {
    if m.nrows() == 0 {
        return Ok(true);
    }
    Ok(spectral_abscissa(m)? < -STABILITY_MARGIN)
}

/// Real Schur form `M = Z T Z'` with the selected eigenvalues leading.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub z: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Number of leading selected eigenvalues (columns of `z` spanning the
    /// selected invariant subspace).
    pub selected: usize,
}

/// Compute an ordered real Schur decomposition. Complex-conjugate pairs are
/// selected together, based on the member with non-negative imaginary part.
pub fn ordered_schur(m: &DMatrix<f64>, select: impl Fn(C64) -> bool) -> Result<OrderedSchur> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension("ordered_schur needs a square matrix".into()));
    }
    let (mut z, mut t) = real_schur(m)?;
    let scale = t.norm().max(f64::MIN_POSITIVE);
    standardize(&mut t, &mut z, scale);

    let blocks = schur_blocks(&t);
    let mut sel: Vec<(usize, bool)> = blocks
        .iter()
        .map(|&(i, sz)| {
            let ev = block_eigenvalues(&t, i, sz);
            (sz, select(ev[ev.len() - 1]))
        })
        .collect();

    // Bubble each selected block up to the first unselected slot.
    let mut placed = 0; // number of leading blocks already in final position
    for k in 0..sel.len() {
        if !sel[k].1 {
            continue;
        }
        let mut cur = k;
        while cur > placed {
            let start: usize = sel[..cur - 1].iter().map(|b| b.0).sum();
            let (p, q) = (sel[cur - 1].0, sel[cur].0);
            swap_adjacent(&mut t, &mut z, start, p, q, scale)?;
            sel.swap(cur - 1, cur);
            cur -= 1;
        }
        placed += 1;
    }
    let selected = sel.iter().take_while(|b| b.1).map(|b| b.0).sum();
    Ok(OrderedSchur { z, t, selected })
}

/// Zero negligible subdiagonals and split 2x2 blocks that carry real eigenvalues.
fn standardize(t: &mut DMatrix<f64>, z: &mut DMatrix<f64>, scale: f64) {
    let n = t.nrows();
    for i in 0..n.saturating_sub(1) {
        if t[(i + 1, i)].abs() <= f64::EPSILON * scale {
            t[(i + 1, i)] = 0.0;
        }
    }
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let ev = block_eigenvalues(t, i, 2);
        if ev[0].im == 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let lam = ev[0].re;
            let v1 = (b, lam - a);
            let v2 = (lam - d, c);
            let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
            let r = x.hypot(y);
            if r > 0.0 {
                let (cs, sn) = (x / r, y / r);
                apply_rotation(t, z, i, cs, sn);
            }
            t[(i + 1, i)] = 0.0;
        }
        // Skip past the (possibly split) block.
        i += if t[(i + 1, i)] == 0.0 { 1 } else { 2 };
    }
}

/// T <- G' T G, Z <- Z G with G acting on coordinates (i, i+1),
/// G = [[cs, -sn], [sn, cs]].
fn apply_rotation(t: &mut DMatrix<f64>, z: &mut DMatrix<f64>, i: usize, cs: f64, sn: f64) {
    let n = t.nrows();
    for j in 0..n {
        let (u, v) = (t[(i, j)], t[(i + 1, j)]);
        t[(i, j)] = cs * u + sn * v;
        t[(i + 1, j)] = -sn * u + cs * v;
    }
    for j in 0..n {
        let (u, v) = (t[(j, i)], t[(j, i + 1)]);
        t[(j, i)] = cs * u + sn * v;
        t[(j, i + 1)] = -sn * u + cs * v;
    }
    for j in 0..z.nrows() {
        let (u, v) = (z[(j, i)], z[(j, i + 1)]);
        z[(j, i)] = cs * u + sn * v;
        z[(j, i + 1)] = -sn * u + cs * v;
    }
}

/// Swap adjacent diagonal blocks T11 (p x p at `j`) and T22 (q x q at `j+p`).
fn swap_adjacent(
    t: &mut DMatrix<f64>,
    z: &mut DMatrix<f64>,
    j: usize,
    p: usize,
    q: usize,
    scale: f64,
) -> Result<()> {
    let n = t.nrows();
    let a = t.view((j, j), (p, p)).clone_owned();
    let b = t.view((j + p, j + p), (q, q)).clone_owned();
    let c = t.view((j, j + p), (p, q)).clone_owned();
    // A X - X B = -C  =>  [X; I] spans the invariant subspace of B's eigenvalues.
    let x = solve_sylvester(&a, &(-&b), &(-&c))?;
    let mut basis = zeros(p + q, q + p + q);
    basis.view_mut((0, 0), (p, q)).copy_from(&x);
    basis.view_mut((p, 0), (q, q)).fill_with_identity();
    basis.view_mut((0, q), (p + q, p + q)).fill_with_identity();
    let g = basis.qr().q();
    let g = g.columns(0, p + q).clone_owned();

    let rows = t.rows(j, p + q).clone_owned();
    t.rows_mut(j, p + q).copy_from(&(g.transpose() * rows));
    let cols = t.columns(j, p + q).clone_owned();
    t.columns_mut(j, p + q).copy_from(&(cols * &g));
    let zc = z.columns(j, p + q).clone_owned();
    z.columns_mut(j, p + q).copy_from(&(zc * &g));

    let resid = t.view((j + q, j), (p, q)).norm();
    if resid > 1e-8 * scale {
        return Err(Error::Conditioning { rcond: resid / scale });
    }
    t.view_mut((j + q, j), (p, q)).fill(0.0);
    // Restore exact zeros below the quasi-triangular structure.
    for r in (j + 1)..(j + p + q).min(n) {
        for cidx in j..r.saturating_sub(1) {
            t[(r, cidx)] = 0.0;
        }
    }
    if q == 1 && j + 1 < n {
        t[(j + 1, j)] = 0.0;
    }
    if p == 1 {
        let k = j + q;
        if k >= 1 && k < n {
            t[(k, k - 1)] = 0.0;
        }
    }
    Ok(())
}

/// Solve `A X + X B = C` through the Kronecker form. Intended for small
/// problems (block swaps, Lyapunov corrections at n <= 20).
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, q) = (a.nrows(), b.nrows());
    if c.shape() != (p, q) {
        return Err(Error::Dimension("sylvester right-hand side".into()));
    }
    if p == 0 || q == 0 {
        return Ok(zeros(p, q));
    }
    // vec(AX) = (I ⊗ A) vec X ; vec(XB) = (B' ⊗ I) vec X
    let k = kron(&eye(q), a) + kron(&b.transpose(), &eye(p));
    let rhs = DMatrix::from_column_slice(p * q, 1, c.as_slice());
    let sol = solve(&k, &rhs, "sylvester operator")?;
    Ok(DMatrix::from_column_slice(p, q, sol.as_slice()))
}

/// Solve the Lyapunov equation `A' X + X A + Q = 0`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = solve_sylvester(&a.transpose(), a, &(-q))?;
    Ok(symmetrize(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn abscissa_of_simple_matrices() {
        assert_eq!(spectral_abscissa(&mat(2, 2, &[0., 1., 0., 0.])).unwrap(), 0.0);
        assert!((spectral_abscissa(&(-eye(2))).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_are_sorted() {
        let m = mat(3, 3, &[-1., 2., 0., -2., -1., 0., 0., 0., 3.]);
        let ev = eigenvalues(&m).unwrap();
        assert!((ev[0] - C64::new(-1., -2.)).norm() < 1e-12);
        assert!((ev[1] - C64::new(-1., 2.)).norm() < 1e-12);
        assert!((ev[2] - C64::new(3., 0.)).norm() < 1e-12);
    }

    #[test]
    fn ordered_schur_moves_stable_blocks_first() {
        // Mix of real and complex eigenvalues on both sides of the axis.
        let m = mat(
            5,
            5,
            &[
                1.0, 2.0, 0.5, -1.0, 0.3, //
                -3.0, 0.5, 1.0, 0.0, 2.0, //
                0.2, -0.4, -2.0, 1.5, 0.0, //
                1.0, 0.0, -1.5, -2.5, 0.7, //
                0.0, 1.0, 0.0, 0.3, 4.0,
            ],
        );
        let os = ordered_schur(&m, |z| z.re < 0.0).unwrap();
        let recon = &os.z * &os.t * os.z.transpose();
        assert!((recon - &m).norm() < 1e-10);
        assert!((os.z.transpose() * &os.z - eye(5)).norm() < 1e-12);
        let n_stable = eigenvalues(&m).unwrap().iter().filter(|z| z.re < 0.0).count();
        assert_eq!(os.selected, n_stable);
        let lead = os.t.view((0, 0), (os.selected, os.selected)).clone_owned();
        for z in eigenvalues(&lead).unwrap() {
            assert!(z.re < 0.0);
        }
        // Selected columns span an invariant subspace.
        let u = os.z.columns(0, os.selected).clone_owned();
        let proj = &u * u.transpose();
        let mu = &m * &u;
        assert!((&proj * &mu - &mu).norm() < 1e-10);
    }

    #[test]
    fn sylvester_and_lyapunov() {
        let a = mat(2, 2, &[-1., 2., 0., -3.]);
        let q = mat(2, 2, &[2., 1., 1., 4.]);
        let x = solve_lyapunov(&a, &q).unwrap();
        let r = a.transpose() * &x + &x * &a + &q;
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn orth_drops_dependent_columns() {
        let m = mat(3, 3, &[1., 2., 3., 2., 4., 6., 0., 0., 1.]);
        let o = orth(&m.transpose(), 1e-12);
        assert_eq!(o.ncols(), 2);
    }
}

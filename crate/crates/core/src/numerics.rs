//! Dense linear algebra kernels on `nalgebra` matrices: solves, the
//! Moore-Penrose pseudoinverse and the rank-1 / block-removal inverse updates
//! used by the fast greedy routine.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Absolute-plus-relative tolerance used for numeric comparisons.
pub const TOL: f64 = 1e-8;

/// Relative singular value cutoff for the pseudoinverse.
pub const PINV_RCOND: f64 = 1e-12;

const PIVOT_RTOL: f64 = 1e-13;

pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn vec_max_abs(v: &DenseVector) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// `|a - b| <= tol * (1 + max(|a|, |b|))`
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn lu_condition_estimate(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let diag = u.diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `a x = b` by partial-pivot LU and checks the residual.
pub fn solve(a: &DenseMatrix, b: &DenseVector) -> Result<DenseVector> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::validation(format!(
            "solve: {}x{} system with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.nrows() == 0 {
        return Ok(DenseVector::zeros(0));
    }
    let lu = a.clone().lu();
    let condition = lu_condition_estimate(&lu);
    if !condition.is_finite() || condition > 1.0 / (PIVOT_RTOL * a.nrows() as f64) {
        return Err(Error::Singular {
            context: "solve",
            condition,
        });
    }
    let x = lu.solve(b).ok_or(Error::Singular {
        context: "solve",
        condition,
    })?;
    let residual = vec_max_abs(&(a * &x - b));
    if !(residual <= TOL * (1.0 + vec_max_abs(b))) {
        return Err(Error::Singular {
            context: "solve residual",
            condition,
        });
    }
    Ok(x)
}

/// Inverse of a nonsingular matrix.
pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::validation("inverse of a non-square matrix"));
    }
    if a.nrows() == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let lu = a.clone().lu();
    let condition = lu_condition_estimate(&lu);
    if !condition.is_finite() || condition > 1.0 / (PIVOT_RTOL * a.nrows() as f64) {
        return Err(Error::Singular {
            context: "inverse",
            condition,
        });
    }
    lu.try_inverse().ok_or(Error::Singular {
        context: "inverse",
        condition,
    })
}

/// Moore-Penrose pseudoinverse from a complete orthogonal decomposition:
/// column-pivoted QR `A P = Q R`, then a QR of the leading rows of `R`.
/// Pivots below `max(rows, cols) * |r_00| * 1e-12` count as zero.
pub fn pinv(a: &DenseMatrix) -> DenseMatrix {
    let (rows, cols) = a.shape();
    if rows < cols {
        return pinv(&a.transpose()).transpose();
    }
    if cols == 0 || max_abs(a) == 0.0 {
        return DenseMatrix::zeros(cols, rows);
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let cutoff = rows as f64 * r[(0, 0)].abs() * PINV_RCOND;
    let rank = (0..cols).take_while(|&i| r[(i, i)].abs() > cutoff).count();
    let q1 = qr.q().columns(0, rank).into_owned();
    // R_top = Tᵀ Zᵀ with T upper triangular and invertible
    let lq = r.rows(0, rank).transpose().qr();
    let (z, t) = (lq.q(), lq.r());
    let tt_inv_q1t = t
        .transpose()
        .solve_lower_triangular(&q1.transpose())
        .expect("leading pivots are nonzero");
    let mut out = z * tt_inv_q1t;
    qr.p().inv_permute_rows(&mut out);
    out
}

/// `(A + u vᵀ)⁻¹` from `A⁻¹` by the Sherman-Morrison formula.
pub fn sherman_morrison_update(
    a_inv: &DenseMatrix,
    u: &DenseVector,
    v: &DenseVector,
) -> Result<DenseMatrix> {
    let a_inv_u = a_inv * u;
    let v_t_a_inv = a_inv.tr_mul(v); // (vᵀ A⁻¹)ᵀ
    let denominator = 1.0 + v.dot(&a_inv_u);
    if denominator.abs() <= 1e-12 {
        return Err(Error::SingularUpdate { denominator });
    }
    let mut out = a_inv.clone();
    out.ger(-1.0 / denominator, &a_inv_u, &v_t_a_inv, 1.0);
    Ok(out)
}

/// Inverse of `L + κ0 e_s e_sᵀ` from the pseudoinverse of the Laplacian `L`
/// of a strongly connected graph, where `q = D⁻¹π` spans `ker(Lᵀ)`:
///
/// `L† − (L† e_s) qᵀ / q_s − 1 (e_sᵀ L†) + (1/κ0 + (L†)_{ss}) 1 qᵀ / q_s`.
///
/// Only this case of the general rank-1 pseudoinverse update is supported.
pub fn laplacian_rank1_pinv_update(
    l_pinv: &DenseMatrix,
    s0: usize,
    kappa0: f64,
    q: &DenseVector,
) -> Result<DenseMatrix> {
    let n = l_pinv.nrows();
    if !l_pinv.is_square() || q.len() != n || s0 >= n {
        return Err(Error::validation("rank-1 update: dimension mismatch"));
    }
    if !(kappa0.is_finite() && kappa0 > 0.0) {
        return Err(Error::validation("rank-1 update needs κ0 > 0"));
    }
    let qs = q[s0];
    if !(qs > 1e-14 * vec_max_abs(q)) || qs <= 0.0 {
        return Err(Error::SingularUpdate { denominator: qs });
    }
    let col = l_pinv.column(s0).into_owned();
    let row = l_pinv.row(s0).transpose();
    let ones = DenseVector::from_element(n, 1.0);
    let scale = (1.0 / kappa0 + l_pinv[(s0, s0)]) / qs;

    let mut out = l_pinv.clone();
    out.ger(-1.0 / qs, &col, q, 1.0);
    out.ger(-1.0, &ones, &row, 1.0);
    out.ger(scale, &ones, q, 1.0);
    Ok(out)
}

/// Given `A⁻¹`, returns the inverse of `A` with row and column `idx` deleted:
/// `(A⁻¹ − A⁻¹ e e ᵀ A⁻¹ / (A⁻¹)_{ii})` restricted to the remaining indices.
pub fn block_remove_inverse(a_inv: &DenseMatrix, idx: usize) -> Result<DenseMatrix> {
    let n = a_inv.nrows();
    if !a_inv.is_square() || idx >= n {
        return Err(Error::validation("block removal: index out of range"));
    }
    let pivot = a_inv[(idx, idx)];
    if !(pivot.abs() > PIVOT_RTOL * max_abs(a_inv)) {
        return Err(Error::ZeroPivot { index: idx, pivot });
    }
    let keep = |i: usize| if i < idx { i } else { i + 1 };
    Ok(DenseMatrix::from_fn(n - 1, n - 1, |r, c| {
        let (r, c) = (keep(r), keep(c));
        a_inv[(r, c)] - a_inv[(r, idx)] * a_inv[(idx, c)] / pivot
    }))
}

/// Submatrix on the given row and column index lists.
pub fn select(m: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn well_conditioned(n: usize, seed: u64) -> DenseMatrix {
        random_matrix(n, seed) + DenseMatrix::identity(n, n) * (n as f64)
    }

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let b = random_matrix(n, seed);
        &b * b.transpose() + DenseMatrix::identity(n, n)
    }

    fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
        let scale = 1.0 + max_abs(a).max(max_abs(b));
        let diff = max_abs(&(a - b));
        assert!(diff <= tol * scale, "max diff {diff:e}");
    }

    fn penrose(a: &DenseMatrix, p: &DenseMatrix) {
        let tol = 1e-8;
        assert_close(&(a * p * a), a, tol);
        assert_close(&(p * a * p), p, tol);
        let ap = a * p;
        assert_close(&ap, &ap.transpose(), tol);
        let pa = p * a;
        assert_close(&pa, &pa.transpose(), tol);
    }

    #[test]
    fn solve_identity() {
        let b = DenseVector::from_vec(vec![1.0, -2.0, 3.5]);
        let x = solve(&DenseMatrix::identity(3, 3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_two_by_two() {
        let a = DenseMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let x = solve(&a, &DenseVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((x[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn solve_random_residual() {
        let a = well_conditioned(8, 3);
        let b = DenseVector::from_fn(8, |i, _| (i as f64).sin());
        let x = solve(&a, &b).unwrap();
        assert!(vec_max_abs(&(&a * &x - &b)) <= 1e-8 * (1.0 + vec_max_abs(&b)));
    }

    #[test]
    fn solve_singular_reports_condition() {
        let l = families::path(3).laplacian();
        match solve(&l, &DenseVector::from_element(3, 1.0)) {
            Err(Error::Singular { condition, .. }) => assert!(condition > 1e12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pinv_identity_and_zero() {
        let i = DenseMatrix::identity(4, 4);
        assert_close(&pinv(&i), &i, 1e-14);
        let z = DenseMatrix::zeros(3, 2);
        assert_eq!(pinv(&z), DenseMatrix::zeros(2, 3));
    }

    #[test]
    fn pinv_path_laplacian() {
        let l = families::path(3).laplacian();
        let p = pinv(&l);
        assert_close(&(&l * &p * &l), &l, 1e-12);
        penrose(&l, &p);
    }

    #[test]
    fn pinv_directed_cycle_penrose() {
        let l = families::directed_cycle(5).laplacian();
        penrose(&l, &pinv(&l));
    }

    #[test]
    fn pinv_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DenseMatrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        penrose(&a, &pinv(&a));
    }

    #[test]
    fn sherman_morrison_zero_update() {
        let a_inv = inverse(&well_conditioned(4, 1)).unwrap();
        let z = DenseVector::zeros(4);
        assert_eq!(sherman_morrison_update(&a_inv, &z, &z).unwrap(), a_inv);
    }

    #[test]
    fn sherman_morrison_identity() {
        let mut e1 = DenseVector::zeros(3);
        e1[0] = 1.0;
        let out = sherman_morrison_update(&DenseMatrix::identity(3, 3), &e1, &e1).unwrap();
        let expected = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![0.5, 1.0, 1.0]));
        assert_close(&out, &expected, 1e-15);
    }

    #[test]
    fn sherman_morrison_random_vs_direct() {
        let a = well_conditioned(6, 7);
        let u = DenseVector::from_fn(6, |i, _| 0.3 * i as f64 - 0.5);
        let v = DenseVector::from_fn(6, |i, _| (i as f64 * 0.7).cos());
        let updated = sherman_morrison_update(&inverse(&a).unwrap(), &u, &v).unwrap();
        let direct = inverse(&(&a + &u * v.transpose())).unwrap();
        assert_close(&updated, &direct, 1e-8);
    }

    #[test]
    fn sherman_morrison_singular_update() {
        let mut e1 = DenseVector::zeros(2);
        e1[0] = 1.0;
        let u = -e1.clone();
        assert!(matches!(
            sherman_morrison_update(&DenseMatrix::identity(2, 2), &u, &e1),
            Err(Error::SingularUpdate { .. })
        ));
    }

    fn q_vector(g: &crate::graph::WeightedDigraph) -> DenseVector {
        let kernel = crate::walks::WalkKernel::new(g).unwrap();
        kernel.degree_scaled_stationary()
    }

    fn check_rank1(g: &crate::graph::WeightedDigraph, s0: usize, kappa: f64) {
        let l = g.laplacian();
        let n = l.nrows();
        let m = laplacian_rank1_pinv_update(&pinv(&l), s0, kappa, &q_vector(g)).unwrap();
        let mut updated = l.clone();
        updated[(s0, s0)] += kappa;
        assert_close(&(&updated * &m), &DenseMatrix::identity(n, n), 1e-8);
        assert_close(&m, &inverse(&updated).unwrap(), 1e-8);
    }

    #[test]
    fn rank1_pinv_update_two_cycle() {
        let g = families::directed_cycle(2);
        let m = laplacian_rank1_pinv_update(&pinv(&g.laplacian()), 0, 1.0, &q_vector(&g)).unwrap();
        // L + e0 e0ᵀ = [[2,-1],[-1,1]]
        let direct = inverse(&DenseMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0])).unwrap();
        assert_close(&m, &direct, 1e-10);
        // the influenced 2-cycle system adds κ at node 1 as well
        let mut e1 = DenseVector::zeros(2);
        e1[1] = 1.0;
        let full = sherman_morrison_update(&m, &e1, &e1).unwrap();
        let target = inverse(&DenseMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])).unwrap();
        assert_close(&full, &target, 1e-10);
    }

    #[test]
    fn rank1_pinv_update_path_and_scaling() {
        let g = families::path(3);
        check_rank1(&g, 0, 1.0);
        check_rank1(&g, 0, 2.0);
        check_rank1(&g, 1, 0.25);
        let d = crate::generate::random_digraph(7, 0.3, 11).unwrap();
        check_rank1(&d, 3, 1.7);
    }

    #[test]
    fn rank1_rejects_zero_q() {
        let l = families::path(3).laplacian();
        let q = DenseVector::from_vec(vec![0.0, 1.0, 1.0]);
        assert!(matches!(
            laplacian_rank1_pinv_update(&pinv(&l), 0, 1.0, &q),
            Err(Error::SingularUpdate { .. })
        ));
    }

    #[test]
    fn block_remove_two_by_two() {
        let a = DenseMatrix::from_row_slice(2, 2, &[4.0, 1.0, 2.0, 3.0]);
        let r = block_remove_inverse(&inverse(&a).unwrap(), 0).unwrap();
        assert!((r[(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn block_remove_path4_middle() {
        // follower block of path-4 with both ends as leaders plus an extra
        // grounding: use the full Laplacian plus identity to stay nonsingular
        let l = families::path(4).laplacian() + DenseMatrix::identity(4, 4) * 0.5;
        let r = block_remove_inverse(&inverse(&l).unwrap(), 1).unwrap();
        let direct = inverse(&select(&l, &[0, 2, 3], &[0, 2, 3])).unwrap();
        assert_close(&r, &direct, 1e-10);
    }

    #[test]
    fn block_remove_repeated_spd() {
        let a = random_spd(8, 21);
        let mut inv = inverse(&a).unwrap();
        let mut alive: Vec<usize> = (0..8).collect();
        for original in [5usize, 0, 3] {
            let pos = alive.iter().position(|&x| x == original).unwrap();
            inv = block_remove_inverse(&inv, pos).unwrap();
            alive.remove(pos);
        }
        let direct = inverse(&select(&a, &alive, &alive)).unwrap();
        assert_close(&inv, &direct, 1e-8);
    }

    #[test]
    fn block_remove_zero_pivot() {
        let m = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            block_remove_inverse(&m, 0),
            Err(Error::ZeroPivot { index: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn pinv_penrose_random(seed in 0u64..1000, rows in 1usize..7, cols in 1usize..7, rank in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = rank.min(rows).min(cols);
            let b = DenseMatrix::from_fn(rows, r, |_, _| rng.gen_range(-1.0..1.0));
            let c = DenseMatrix::from_fn(r, cols, |_, _| rng.gen_range(-1.0..1.0));
            let a = b * c;
            penrose(&a, &pinv(&a));
        }

        #[test]
        fn sherman_morrison_update_then_downdate(seed in 0u64..1000) {
            let a = well_conditioned(5, seed);
            let a_inv = inverse(&a).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let u = DenseVector::from_fn(5, |_, _| rng.gen_range(-0.5..0.5));
            let v = DenseVector::from_fn(5, |_, _| rng.gen_range(-0.5..0.5));
            let up = sherman_morrison_update(&a_inv, &u, &v).unwrap();
            let back = sherman_morrison_update(&up, &(-&u), &v).unwrap();
            prop_assert!(max_abs(&(&back - &a_inv)) <= 1e-8 * (1.0 + max_abs(&a_inv)));
        }
    }
}

//! Thin FFI wrapper around the system LAPACK symmetric eigensolver.
//!
//! Only the one routine the library needs is declared: `dsyevr`, the
//! relatively-robust-representations driver, which can return just the
//! lowest part of the spectrum without paying for a full decomposition.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

extern "C" {
    #[allow(clippy::too_many_arguments)]
    fn dsyevr_(
        jobz: *const u8,
        range: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        vl: *const f64,
        vu: *const f64,
        il: *const i32,
        iu: *const i32,
        abstol: *const f64,
        m: *mut i32,
        w: *mut f64,
        z: *mut f64,
        ldz: *const i32,
        isuppz: *mut i32,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
}

/// Compute the `m_want` smallest eigenpairs of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and eigenvectors as the columns of
/// an `n × m_want` matrix. The input must be symmetric; only the lower
/// triangle is referenced (symmetry makes the row-major buffer a valid
/// column-major one, so no transposition is needed).
pub(crate) fn smallest_eigenpairs(
    a: &Array2<f64>,
    m_want: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    assert!(m_want >= 1 && m_want <= n, "eigenpair count out of range");

    // dsyevr overwrites its input; work on a copy laid out contiguously.
    let mut buf: Vec<f64> = a
        .as_slice()
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| a.iter().copied().collect());

    let jobz = b'V';
    let range = b'I';
    let uplo = b'L';
    let ni = n as i32;
    let (vl, vu) = (0.0_f64, 0.0_f64);
    let il = 1_i32;
    let iu = m_want as i32;
    let abstol = 0.0_f64; // default tolerance: eps * |T| as chosen by LAPACK
    let mut m_found = 0_i32;
    let mut w = vec![0.0_f64; n];
    let mut z = vec![0.0_f64; n * m_want];
    let ldz = ni;
    let mut isuppz = vec![0_i32; 2 * m_want.max(1)];
    let mut info = 0_i32;

    // Workspace query, then the real call.
    let mut work_query = [0.0_f64];
    let mut iwork_query = [0_i32];
    let neg_one = -1_i32;
    unsafe {
        dsyevr_(
            &jobz,
            &range,
            &uplo,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m_found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ldz,
            isuppz.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &neg_one,
            iwork_query.as_mut_ptr(),
            &neg_one,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::numerical(format!(
            "eigensolver workspace query failed (info = {info})"
        )));
    }

    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0_f64; lwork as usize];
    let mut iwork = vec![0_i32; liwork as usize];
    unsafe {
        dsyevr_(
            &jobz,
            &range,
            &uplo,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m_found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ldz,
            isuppz.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::numerical(format!(
            "eigensolver did not converge (info = {info})"
        )));
    }
    if m_found as usize != m_want {
        return Err(Error::numerical(format!(
            "eigensolver returned {m_found} of {m_want} requested eigenpairs"
        )));
    }

    let eigenvalues = Array1::from(w[..m_want].to_vec());
    // z is column-major: eigenvector k occupies z[k*n .. (k+1)*n].
    let mut vectors = Array2::<f64>::zeros((n, m_want));
    for k in 0..m_want {
        for i in 0..n {
            vectors[[i, k]] = z[k * n + i];
        }
    }
    Ok((eigenvalues, vectors))
}

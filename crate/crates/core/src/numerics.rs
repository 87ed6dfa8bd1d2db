//! Dense complex linear algebra and seeded sampling.
//!
//! Matrices are plain `nalgebra` dynamic complex matrices. Everything that
//! depends on spectral ordering (waterfilling, ordered Wishart eigenvalues)
//! relies on the descending order produced here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Symmetry tolerance (relative to the Frobenius norm) for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Negative eigenvalues of PSD matrices above `-PSD_CLAMP_TOL * max(1, |λ|max)` are set to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-12;

/// Builds a matrix from row-major entries, rejecting non-finite values.
pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::contract("matrix dimensions must be positive"));
    }
    if entries.len() != rows * cols {
        return Err(Error::contract(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = ComplexMatrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m, "matrix constructor")?;
    Ok(m)
}

pub fn from_real_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<ComplexMatrix> {
    let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    from_row_major(rows, cols, &c)
}

pub fn real_diagonal(diag: &[f64]) -> ComplexMatrix {
    let n = diag.len();
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(diag[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn ensure_finite(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(A + A^H) / 2`
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    a.is_square() && frobenius(&(a - a.adjoint())) <= tol * frobenius(a).max(1.0)
}

pub fn trace_re(a: &ComplexMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        v * real_diagonal(&self.eigenvalues) * v.adjoint()
    }

    /// Zeroes round-off negatives of a numerically PSD spectrum.
    pub fn clamp_psd(mut self) -> Self {
        let scale = self
            .eigenvalues
            .iter()
            .fold(1.0_f64, |acc, &l| acc.max(l.abs()));
        for l in &mut self.eigenvalues {
            if *l < 0.0 && *l >= -PSD_CLAMP_TOL * scale {
                *l = 0.0;
            }
        }
        self
    }

    /// Applies `f` to the spectrum: `V f(Λ) V^H`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let v = &self.eigenvectors;
        v * real_diagonal(&mapped) * v.adjoint()
    }
}

pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    if !a.is_square() {
        return Err(Error::contract(format!(
            "hermitian_eig needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, "hermitian_eig input")?;
    if !is_hermitian(a, HERMITIAN_TOL) {
        return Err(Error::contract("hermitian_eig input is not Hermitian"));
    }
    let n = a.nrows();
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Hermitian eigen-decomposition of a matrix that is PSD up to round-off.
pub fn psd_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    Ok(hermitian_eig(a)?.clamp_psd())
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x min(rows, cols)`
    pub u: ComplexMatrix,
    /// Descending, length `min(rows, cols)`.
    pub singular_values: Vec<f64>,
    /// Full `cols x cols` unitary; trailing columns span the nullspace.
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singular_values.len();
        let vk = self.v.columns(0, k).into_owned();
        &self.u * real_diagonal(&self.singular_values) * vk.adjoint()
    }

    /// Right singular vectors whose singular value is at most `rel_tol` times the largest.
    pub fn nullspace(&self, rel_tol: f64) -> ComplexMatrix {
        let cols = self.v.ncols();
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        let numerical_rank = self
            .singular_values
            .iter()
            .filter(|&&s| s > rel_tol * smax)
            .count();
        self.v
            .columns(numerical_rank, cols - numerical_rank)
            .into_owned()
    }
}

/// Singular value decomposition with a full right factor.
///
/// Wide inputs are padded with zero rows so the decomposition is square and
/// `V` comes out complete.
pub fn svd(a: &ComplexMatrix) -> Result<Svd> {
    ensure_finite(a, "svd input")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::contract("svd of an empty matrix"));
    }
    let k = m.min(n);
    let work = if m < n {
        let mut padded = ComplexMatrix::zeros(n, n);
        padded.view_mut((0, 0), (m, n)).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let dec = work.svd(true, true);
    let (u_full, v_t) = match (dec.u, dec.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(Error::Numerical(
                "svd did not produce singular vectors".into(),
            ))
        }
    };
    let sv = dec.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));

    let v_cols = v_t.adjoint();
    let v = ComplexMatrix::from_fn(n, n, |r, c| v_cols[(r, order[c])]);
    let u = ComplexMatrix::from_fn(m, k, |r, c| u_full[(r, order[c])]);
    let singular_values = order.iter().take(k).map(|&i| sv[i]).collect();
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

fn ensure_positive_definite(eig: &HermitianEig, what: &str) -> Result<()> {
    let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} needs a positive definite matrix (min eigenvalue {min:e})"
        )))
    }
}

/// `A^{-1/2}` for Hermitian positive definite `A`.
pub fn inv_sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    ensure_positive_definite(&eig, "inv_sqrt_psd")?;
    Ok(hermitian_part(&eig.map_spectrum(|l| 1.0 / l.sqrt())))
}

/// `A^{1/2}` for Hermitian PSD `A`.
pub fn sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = psd_eig(a)?;
    if let Some(&min) = eig.eigenvalues.last() {
        if min < 0.0 {
            return Err(Error::domain(format!(
                "sqrt_psd of an indefinite matrix (min eigenvalue {min:e})"
            )));
        }
    }
    Ok(hermitian_part(&eig.map_spectrum(f64::sqrt)))
}

/// `A^{-1}` for Hermitian positive definite `A`.
pub fn inv_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    ensure_positive_definite(&eig, "inv_psd")?;
    Ok(hermitian_part(&eig.map_spectrum(|l| 1.0 / l)))
}

/// Floor applied to eigenvalues before taking logarithms.
pub const LOGDET_FLOOR: f64 = 1e-15;

/// `log2 det(A)` for a numerically PSD matrix, through its symmetrized spectrum.
pub fn log2det_psd(a: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(&hermitian_part(a))?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(LOGDET_FLOOR).log2())
        .sum())
}

/// A reproducible random stream addressed by `(master_seed, stream_index)`.
///
/// Backed by ChaCha20 with the stream index mapped onto the cipher's stream
/// counter, so every trial's substream can be opened directly without
/// advancing any other stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `rows x cols` matrix of i.i.d. CN(0, 1) entries, drawn in row-major order.
pub fn sample_cn01(rows: usize, cols: usize, rng: &mut RngStream) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries: Vec<Complex64> = (0..rows * cols)
        .map(|_| {
            let re = rng.normal() * scale;
            let im = rng.normal() * scale;
            Complex64::new(re, im)
        })
        .collect();
    ComplexMatrix::from_row_slice(rows, cols, &entries)
}

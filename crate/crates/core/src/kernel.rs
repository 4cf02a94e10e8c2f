//! Dense complex matrix stored as split real/imaginary planes.
//!
//! The matrix-vector product is the hot loop of every propagation run.
//! Rows are independent: each output element is a fixed-order reduction
//! over its own row, so the result does not depend on how rows are
//! distributed across threads.

use num_complex::Complex;
use rayon::prelude::*;

use crate::scalar::Real;

const LANES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseComplex<T> {
    dim: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> DenseComplex<T> {
    /// Fills a `dim × dim` matrix row by row from `entry(i, j)`.
    pub(crate) fn from_fn<F>(dim: usize, entry: F) -> Self
    where
        F: Fn(usize, usize) -> Complex<T> + Sync,
    {
        let mut re = vec![T::zero(); dim * dim];
        let mut im = vec![T::zero(); dim * dim];
        re.par_chunks_mut(dim)
            .zip(im.par_chunks_mut(dim))
            .enumerate()
            .for_each(|(i, (rr, ri))| {
                for j in 0..dim {
                    let z = entry(i, j);
                    rr[j] = z.re;
                    ri[j] = z.im;
                }
            });
        Self { dim, re, im }
    }

    pub(crate) fn get(&self, i: usize, j: usize) -> Complex<T> {
        let k = i * self.dim + j;
        Complex::new(self.re[k], self.im[k])
    }

    /// `out = M · v`, with `v` given as split planes.
    pub(crate) fn matvec_split(&self, v_re: &[T], v_im: &[T], out: &mut [Complex<T>]) {
        let n = self.dim;
        assert!(v_re.len() == n && v_im.len() == n && out.len() == n);
        out.par_iter_mut()
            .with_min_len(16)
            .enumerate()
            .for_each(|(i, o)| {
                let rr = &self.re[i * n..(i + 1) * n];
                let ri = &self.im[i * n..(i + 1) * n];
                *o = row_dot(rr, ri, v_re, v_im);
            });
    }

    pub(crate) fn matvec(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        let (re, im) = split(v);
        self.matvec_split(&re, &im, out);
    }
}

pub(crate) fn split<T: Real>(v: &[Complex<T>]) -> (Vec<T>, Vec<T>) {
    (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())
}

#[inline]
fn row_dot<T: Real>(rr: &[T], ri: &[T], vr: &[T], vi: &[T]) -> Complex<T> {
    let mut acc_re = [T::zero(); LANES];
    let mut acc_im = [T::zero(); LANES];
    let body = rr.len() / LANES * LANES;
    let (rr_b, rr_t) = rr.split_at(body);
    let (ri_b, ri_t) = ri.split_at(body);
    let (vr_b, vr_t) = vr.split_at(body);
    let (vi_b, vi_t) = vi.split_at(body);
    for (((a, b), c), d) in rr_b
        .chunks_exact(LANES)
        .zip(ri_b.chunks_exact(LANES))
        .zip(vr_b.chunks_exact(LANES))
        .zip(vi_b.chunks_exact(LANES))
    {
        for l in 0..LANES {
            acc_re[l] += a[l] * c[l] - b[l] * d[l];
            acc_im[l] += a[l] * d[l] + b[l] * c[l];
        }
    }
    let mut re = (acc_re[0] + acc_re[1]) + (acc_re[2] + acc_re[3]);
    let mut im = (acc_im[0] + acc_im[1]) + (acc_im[2] + acc_im[3]);
    for (((a, b), c), d) in rr_t.iter().zip(ri_t).zip(vr_t).zip(vi_t) {
        re += *a * *c - *b * *d;
        im += *a * *d + *b * *c;
    }
    Complex::new(re, im)
}

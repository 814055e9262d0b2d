//! Strided row-major matrix views and a thin GEMM wrapper over
//! `matrixmultiply`.

#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    pub data: &'a [f32],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

#[derive(Debug)]
pub struct MatMut<'a> {
    pub data: &'a mut [f32],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
}

impl<'a> MatRef<'a> {
    /// Dense `rows × cols` matrix.
    pub fn new(data: &'a [f32], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols)
    }

    pub fn strided(data: &'a [f32], rows: usize, cols: usize, row_stride: usize) -> Self {
        let m = Self {
            data,
            rows,
            cols,
            row_stride,
            col_stride: 1,
        };
        m.check();
        m
    }

    /// Transposed view without copying.
    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }

    fn check(&self) {
        if self.rows > 0 && self.cols > 0 {
            let last = (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride;
            assert!(last < self.data.len(), "matrix view out of bounds");
        }
    }
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f32], rows: usize, cols: usize) -> Self {
        Self::strided(data, rows, cols, cols)
    }

    pub fn strided(data: &'a mut [f32], rows: usize, cols: usize, row_stride: usize) -> Self {
        if rows > 0 && cols > 0 {
            assert!((rows - 1) * row_stride + cols - 1 < data.len(), "matrix view out of bounds");
        }
        Self {
            data,
            rows,
            cols,
            row_stride,
        }
    }
}

/// `c ← alpha·a·b + beta·c`.
pub fn gemm(alpha: f32, a: MatRef<'_>, b: MatRef<'_>, beta: f32, c: MatMut<'_>) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(a.rows, c.rows, "output rows differ");
    assert_eq!(b.cols, c.cols, "output cols differ");
    a.check();
    b.check();
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    if a.cols == 0 {
        for i in 0..c.rows {
            for v in &mut c.data[i * c.row_stride..i * c.row_stride + c.cols] {
                *v *= beta;
            }
        }
        return;
    }
    // SAFETY: every view was bounds-checked above for its full stride
    // pattern, and `c` is an exclusive borrow disjoint from `a` and `b`.
    unsafe {
        matrixmultiply::sgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.data.as_mut_ptr(),
            c.row_stride as isize,
            1,
        );
    }
}

/// Adds `bias` to every row of a `rows × bias.len()` block.
pub fn add_row_bias(out: &mut [f32], row_stride: usize, rows: usize, bias: &[f32]) {
    for r in 0..rows {
        let row = &mut out[r * row_stride..r * row_stride + bias.len()];
        for (o, b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// Accumulates column sums of a `rows × acc.len()` block into `acc`.
pub fn accumulate_column_sums(acc: &mut [f32], data: &[f32], row_stride: usize, rows: usize) {
    for r in 0..rows {
        let row = &data[r * row_stride..r * row_stride + acc.len()];
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
}

/// Flushes subnormal floats to zero on the current thread while alive.
///
/// Late in training many gradients decay into the subnormal range, where
/// x86 arithmetic is an order of magnitude slower. Results stay a pure
/// function of the inputs; only values below `f32::MIN_POSITIVE` change.
pub struct FlushSubnormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

impl FlushSubnormals {
    #[allow(deprecated)]
    pub fn new() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            use std::arch::x86_64::{_mm_getcsr, _mm_setcsr};
            const FTZ: u32 = 1 << 15;
            const DAZ: u32 = 1 << 6;
            // SAFETY: only the denormal-handling bits of MXCSR change.
            let saved = unsafe { _mm_getcsr() };
            unsafe { _mm_setcsr(saved | FTZ | DAZ) };
            Self { saved }
        }
        #[cfg(not(target_arch = "x86_64"))]
        Self {}
    }
}

impl Default for FlushSubnormals {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for FlushSubnormals {
    #[allow(deprecated)]
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: restores the value read in `new`.
        unsafe {
            std::arch::x86_64::_mm_setcsr(self.saved)
        };
    }
}

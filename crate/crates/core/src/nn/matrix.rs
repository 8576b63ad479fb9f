use crate::par::Executor;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Dot product with four interleaved partial sums (fixed order).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        s[0] += x[0] * y[0];
        s[1] += x[1] * y[1];
        s[2] += x[2] * y[2];
        s[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

const UNITS_PER_TASK: usize = 16;

/// `x W^T + b` for `W` stored `out x in`.
pub(crate) fn affine(x: &Matrix, w: &[f64], b: &[f64], exec: &Executor) -> Matrix {
    let (batch, n_in, n_out) = (x.rows, x.cols, b.len());
    let tasks = n_out.div_ceil(UNITS_PER_TASK);
    let parts = exec.map(tasks, |t| {
        let o0 = t * UNITS_PER_TASK;
        let o1 = (o0 + UNITS_PER_TASK).min(n_out);
        let mut buf = Vec::with_capacity((o1 - o0) * batch);
        for o in o0..o1 {
            let wr = &w[o * n_in..(o + 1) * n_in];
            for r in 0..batch {
                buf.push(b[o] + dot(wr, x.row(r)));
            }
        }
        buf
    });
    let mut out = Matrix::zeros(batch, n_out);
    for (t, buf) in parts.into_iter().enumerate() {
        let o0 = t * UNITS_PER_TASK;
        for (k, v) in buf.into_iter().enumerate() {
            let (o, r) = (o0 + k / batch, k % batch);
            out.data[r * n_out + o] = v;
        }
    }
    out
}

/// Weight and bias gradients `dz^T x` and column sums of `dz`.
pub(crate) fn weight_grads(dz: &Matrix, x: &Matrix, exec: &Executor) -> (Vec<f64>, Vec<f64>) {
    let (batch, n_in, n_out) = (x.rows, x.cols, dz.cols);
    let mut dw = vec![0.0; n_out * n_in];
    exec.for_each_chunk_mut(&mut dw, UNITS_PER_TASK * n_in.max(1), |t, chunk| {
        let o0 = t * UNITS_PER_TASK;
        for (k, row) in chunk.chunks_mut(n_in.max(1)).enumerate() {
            let o = o0 + k;
            for r in 0..batch {
                let g = dz.data[r * n_out + o];
                if g != 0.0 {
                    for (d, xv) in row.iter_mut().zip(x.row(r)) {
                        *d += g * xv;
                    }
                }
            }
        }
    });
    let db = (0..n_out).map(|o| (0..batch).map(|r| dz.data[r * n_out + o]).sum()).collect();
    (dw, db)
}

/// Input gradient `dz W`.
pub(crate) fn input_grads(dz: &Matrix, w: &[f64], n_in: usize, exec: &Executor) -> Matrix {
    let (batch, n_out) = (dz.rows, dz.cols);
    let mut dx = Matrix::zeros(batch, n_in);
    exec.for_each_chunk_mut(&mut dx.data, n_in.max(1), |r, row| {
        for o in 0..n_out {
            let g = dz.data[r * n_out + o];
            if g != 0.0 {
                for (d, wv) in row.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *d += g * wv;
                }
            }
        }
    });
    dx
}

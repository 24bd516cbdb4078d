use super::gemm::{gemm, Layout};
use super::{Result, TensorError, Var};

fn matrix_dims(op: &'static str, v: &Var<'_>) -> Result<(usize, usize)> {
    match v.shape().as_slice() {
        &[r, c] => Ok((r, c)),
        other => Err(TensorError::BadRank {
            op,
            expected: "a rank-2 tensor",
            got: other.to_vec(),
        }),
    }
}

impl<'t> Var<'t> {
    /// Matrix product `(n, k) x (k, m) -> (n, m)`.
    pub fn matmul(&self, rhs: &Var<'t>) -> Result<Var<'t>> {
        self.affine(rhs, None, "matmul")
    }

    /// Fully connected layer: `input (N, D_in) . weight (D_in, D_out) + bias (D_out)`.
    pub fn dense(&self, weight: &Var<'t>, bias: &Var<'t>) -> Result<Var<'t>> {
        self.affine(weight, Some(bias), "dense")
    }

    fn affine(&self, weight: &Var<'t>, bias: Option<&Var<'t>>, op: &'static str) -> Result<Var<'t>> {
        let (n, k) = matrix_dims(op, self)?;
        let (k2, m) = matrix_dims(op, weight)?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.shape(),
                right: weight.shape(),
            });
        }
        if let Some(b) = bias {
            if b.shape() != [m] {
                return Err(TensorError::ShapeMismatch {
                    op,
                    left: weight.shape(),
                    right: b.shape(),
                });
            }
        }
        let mut out = vec![0.0; n * m];
        if let Some(b) = bias {
            b.with_value(|bv| {
                for row in out.chunks_exact_mut(m) {
                    row.copy_from_slice(bv);
                }
            });
        }
        let beta = if bias.is_some() { 1.0 } else { 0.0 };
        self.with_value(|x| {
            weight.with_value(|w| gemm(n, k, m, 1.0, x, Layout::Normal, w, Layout::Normal, beta, &mut out))
        });
        let (ix, iw) = (self.id, weight.id);
        let ib = bias.map(|b| b.id);
        let mut parents = vec![*self, *weight];
        parents.extend(bias.copied());
        Ok(self.tape.push(
            vec![n, m],
            out,
            &parents,
            Box::new(move |g, nodes, sink| {
                if sink.wants(ix) {
                    let w = &nodes[iw].value;
                    gemm(
                        n,
                        m,
                        k,
                        1.0,
                        g,
                        Layout::Normal,
                        w,
                        Layout::Transposed,
                        1.0,
                        sink.slot(ix),
                    );
                }
                if sink.wants(iw) {
                    let x = &nodes[ix].value;
                    gemm(
                        k,
                        n,
                        m,
                        1.0,
                        x,
                        Layout::Transposed,
                        g,
                        Layout::Normal,
                        1.0,
                        sink.slot(iw),
                    );
                }
                if let Some(ib) = ib {
                    if sink.wants(ib) {
                        let s = sink.slot(ib);
                        for row in g.chunks_exact(m) {
                            s.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                        }
                    }
                }
            }),
        ))
    }
}

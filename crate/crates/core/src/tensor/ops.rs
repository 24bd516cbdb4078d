//! Elementwise maps, reductions and structural ops.

use super::{Result, TensorError, Var};

/// Pointwise nonlinearities used by the networks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    /// Leaky ReLU with the 0.2 slope used throughout the networks.
    pub const LEAKY: Activation = Activation::LeakyRelu(0.2);

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn same_shape(op: &'static str, a: &Var<'_>, b: &Var<'_>) -> Result<Vec<usize>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return Err(TensorError::ShapeMismatch {
            op,
            left: sa,
            right: sb,
        });
    }
    Ok(sa)
}

fn as_matrix(op: &'static str, v: &Var<'_>) -> Result<(usize, usize)> {
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
    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let shape = same_shape("add", self, other)?;
        let value = self.with_value(|a| other.with_value(|b| a.iter().zip(b).map(|(x, y)| x + y).collect()));
        let (ia, ib) = (self.id, other.id);
        Ok(self.tape.push(
            shape,
            value,
            &[*self, *other],
            Box::new(move |g, _, sink| {
                sink.add(ia, g);
                sink.add(ib, g);
            }),
        ))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let shape = same_shape("sub", self, other)?;
        let value = self.with_value(|a| other.with_value(|b| a.iter().zip(b).map(|(x, y)| x - y).collect()));
        let (ia, ib) = (self.id, other.id);
        Ok(self.tape.push(
            shape,
            value,
            &[*self, *other],
            Box::new(move |g, _, sink| {
                sink.add(ia, g);
                if sink.wants(ib) {
                    sink.slot(ib).iter_mut().zip(g).for_each(|(s, d)| *s -= d);
                }
            }),
        ))
    }

    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let shape = same_shape("mul", self, other)?;
        let value = self.with_value(|a| other.with_value(|b| a.iter().zip(b).map(|(x, y)| x * y).collect()));
        let (ia, ib) = (self.id, other.id);
        Ok(self.tape.push(
            shape,
            value,
            &[*self, *other],
            Box::new(move |g, nodes, sink| {
                if sink.wants(ia) {
                    let b = &nodes[ib].value;
                    let s = sink.slot(ia);
                    for i in 0..g.len() {
                        s[i] += g[i] * b[i];
                    }
                }
                if sink.wants(ib) {
                    let a = &nodes[ia].value;
                    let s = sink.slot(ib);
                    for i in 0..g.len() {
                        s[i] += g[i] * a[i];
                    }
                }
            }),
        ))
    }

    pub fn scale(&self, factor: f64) -> Var<'t> {
        let value = self.with_value(|a| a.iter().map(|x| x * factor).collect());
        let ia = self.id;
        self.tape.push(
            self.shape(),
            value,
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(ia) {
                    sink.slot(ia).iter_mut().zip(g).for_each(|(s, d)| *s += factor * d);
                }
            }),
        )
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&self) -> Var<'t> {
        let total = self.with_value(|a| a.iter().sum());
        let ia = self.id;
        self.tape.push(
            Vec::new(),
            vec![total],
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(ia) {
                    sink.slot(ia).iter_mut().for_each(|s| *s += g[0]);
                }
            }),
        )
    }

    pub fn mean(&self) -> Var<'t> {
        let n = self.len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Elementwise product with a constant array followed by a full sum.
    /// Handy for projecting a tensor onto a fixed random direction in tests.
    pub fn dot_const(&self, weights: &[f64]) -> Result<Var<'t>> {
        if weights.len() != self.len() {
            return Err(TensorError::DataLength {
                expected: self.len(),
                got: weights.len(),
            });
        }
        let w = weights.to_vec();
        let total = self.with_value(|a| a.iter().zip(&w).map(|(x, y)| x * y).sum());
        let ia = self.id;
        Ok(self.tape.push(
            Vec::new(),
            vec![total],
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(ia) {
                    sink.slot(ia).iter_mut().zip(&w).for_each(|(s, y)| *s += g[0] * y);
                }
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let n: usize = shape.iter().product();
        if n != self.len() || shape.contains(&0) {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: self.shape(),
                right: shape.to_vec(),
            });
        }
        let value = self.with_value(|a| a.to_vec());
        let ia = self.id;
        Ok(self.tape.push(
            shape.to_vec(),
            value,
            &[*self],
            Box::new(move |g, _, sink| sink.add(ia, g)),
        ))
    }

    pub fn activation(&self, kind: Activation) -> Var<'t> {
        let value: Vec<f64> = self.with_value(|a| a.iter().map(|&x| kind.apply(x)).collect());
        let ia = self.id;
        let out = self.tape.push(self.shape(), value, &[*self], Box::new(|_, _, _| {}));
        // The rule needs the output id to reuse the stored activations.
        let io = out.id;
        self.tape.replace_backward(
            out,
            Box::new(move |g, nodes, sink| {
                if sink.wants(ia) {
                    let x = &nodes[ia].value;
                    let y = &nodes[io].value;
                    let s = sink.slot(ia);
                    for i in 0..g.len() {
                        s[i] += g[i] * kind.derivative(x[i], y[i]);
                    }
                }
            }),
        );
        out
    }

    pub fn leaky_relu(&self, slope: f64) -> Var<'t> {
        self.activation(Activation::LeakyRelu(slope))
    }

    pub fn tanh(&self) -> Var<'t> {
        self.activation(Activation::Tanh)
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.activation(Activation::Sigmoid)
    }

    /// Concatenate rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Contract("concat_cols: no inputs".into()))?;
        let (rows, _) = as_matrix("concat_cols", first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = as_matrix("concat_cols", p)?;
            if r != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: first.shape(),
                    right: p.shape(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut value = vec![0.0; rows * total];
        let mut offset = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            p.with_value(|src| {
                for r in 0..rows {
                    value[r * total + offset..r * total + offset + w].copy_from_slice(&src[r * w..(r + 1) * w]);
                }
            });
            offset += w;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.push(
            vec![rows, total],
            value,
            parts,
            Box::new(move |g, _, sink| {
                let mut offset = 0;
                for (&id, &w) in ids.iter().zip(&widths) {
                    if sink.wants(id) {
                        let s = sink.slot(id);
                        for r in 0..rows {
                            for c in 0..w {
                                s[r * w + c] += g[r * total + offset + c];
                            }
                        }
                    }
                    offset += w;
                }
            }),
        ))
    }

    /// Columns `start..end` of a rank-2 tensor.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'t>> {
        let (rows, cols) = as_matrix("slice_cols", self)?;
        if start >= end || end > cols {
            return Err(TensorError::Contract(format!(
                "slice_cols: range {start}..{end} invalid for {cols} columns"
            )));
        }
        let w = end - start;
        let value = self.with_value(|a| {
            let mut v = Vec::with_capacity(rows * w);
            for r in 0..rows {
                v.extend_from_slice(&a[r * cols + start..r * cols + end]);
            }
            v
        });
        let ia = self.id;
        Ok(self.tape.push(
            vec![rows, w],
            value,
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(ia) {
                    let s = sink.slot(ia);
                    for r in 0..rows {
                        for c in 0..w {
                            s[r * cols + start + c] += g[r * w + c];
                        }
                    }
                }
            }),
        ))
    }

    /// Concatenate along the leading axis; trailing extents must agree.
    pub fn concat_rows(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Contract("concat_rows: no inputs".into()))?;
        let fs = first.shape();
        if fs.is_empty() {
            return Err(TensorError::BadRank {
                op: "concat_rows",
                expected: "rank >= 1",
                got: fs,
            });
        }
        let mut lead = 0;
        let mut lens = Vec::with_capacity(parts.len());
        for p in parts {
            let s = p.shape();
            if s.len() != fs.len() || s[1..] != fs[1..] {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: fs.clone(),
                    right: s,
                });
            }
            lead += s[0];
            lens.push(p.len());
        }
        let mut value = Vec::with_capacity(lens.iter().sum());
        for p in parts {
            p.with_value(|v| value.extend_from_slice(v));
        }
        let mut shape = fs;
        shape[0] = lead;
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(first.tape.push(
            shape,
            value,
            parts,
            Box::new(move |g, _, sink| {
                let mut offset = 0;
                for (&id, &n) in ids.iter().zip(&lens) {
                    sink.add(id, &g[offset..offset + n]);
                    offset += n;
                }
            }),
        ))
    }

    /// Rows `start..end` along the leading axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.is_empty() || start >= end || end > shape[0] {
            return Err(TensorError::Contract(format!(
                "slice_rows: range {start}..{end} invalid for shape {shape:?}"
            )));
        }
        let inner: usize = shape[1..].iter().product();
        let value = self.with_value(|a| a[start * inner..end * inner].to_vec());
        let mut out_shape = shape;
        out_shape[0] = end - start;
        let ia = self.id;
        Ok(self.tape.push(
            out_shape,
            value,
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(ia) {
                    let s = &mut sink.slot(ia)[start * inner..end * inner];
                    s.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }),
        ))
    }

    /// Select rows of a rank-2 table, e.g. an embedding lookup.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Var<'t>> {
        let (rows, cols) = as_matrix("gather_rows", self)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(TensorError::LabelOutOfRange {
                label: bad,
                classes: rows,
            });
        }
        if indices.is_empty() {
            return Err(TensorError::Contract("gather_rows: no indices".into()));
        }
        let idx = indices.to_vec();
        let value = self.with_value(|a| {
            let mut v = Vec::with_capacity(idx.len() * cols);
            for &i in &idx {
                v.extend_from_slice(&a[i * cols..(i + 1) * cols]);
            }
            v
        });
        let ia = self.id;
        Ok(self.tape.push(
            vec![indices.len(), cols],
            value,
            &[*self],
            Box::new(move |g, _, sink| {
                if sink.wants(ia) {
                    let s = sink.slot(ia);
                    for (k, &i) in idx.iter().enumerate() {
                        for c in 0..cols {
                            s[i * cols + c] += g[k * cols + c];
                        }
                    }
                }
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Param, Tape, Tensor};

    #[test]
    fn activation_values() {
        assert_eq!(Activation::LEAKY.apply(-1.0), -0.2);
        assert_eq!(Activation::LEAKY.apply(1.5), 1.5);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert!(Activation::Sigmoid.apply(-800.0) >= 0.0);
        assert!(Activation::Sigmoid.apply(800.0) <= 1.0);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let tape = Tape::new();
        let a = tape.constant(&Tensor::new([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.constant(&Tensor::new([2, 1], vec![5.0, 6.0]).unwrap());
        let c = Var::concat_cols(&[a, b]).unwrap();
        assert_eq!(c.value().values(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        assert_eq!(c.slice_cols(2, 3).unwrap().value().values(), &[5.0, 6.0]);
        let r = Var::concat_rows(&[a, a]).unwrap();
        assert_eq!(r.shape(), vec![4, 2]);
        assert_eq!(r.slice_rows(1, 2).unwrap().value().values(), &[3.0, 4.0]);
    }

    #[test]
    fn gather_scatters_gradients() {
        let table = Param::new(Tensor::new([3, 2], vec![0.0; 6]).unwrap());
        let tape = Tape::new();
        let rows = tape.param(&table).gather_rows(&[2, 0, 2]).unwrap();
        tape.backward(rows.sum()).unwrap();
        assert_eq!(table.borrow().grad().unwrap(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn mismatched_add_names_both_shapes() {
        let tape = Tape::new();
        let a = tape.zeros(&[2, 3]);
        let b = tape.zeros(&[3, 2]);
        match a.add(&b) {
            Err(TensorError::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![3, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

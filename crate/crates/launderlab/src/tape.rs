//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Forward operations append nodes to the tape (insertion order is
//! topological order by construction), caching their output values.
//! `backward` walks the tape once in reverse, accumulating gradients
//! with the chain rule. Everything is f64; determinism is bitwise for
//! a fixed build order.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    /// Parameter or constant input; `requires_grad` separates the two.
    Leaf {
        requires_grad: bool,
    },
    /// C[m,n] = A[m,k] @ B[k,n]
    Matmul {
        a: NodeId,
        b: NodeId,
        m: usize,
        k: usize,
        n: usize,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Relu {
        x: NodeId,
    },
    Scale {
        x: NodeId,
        c: f64,
    },
    /// x + c, c an untracked constant vector.
    AddConst {
        x: NodeId,
    },
    Square {
        x: NodeId,
    },
    Softmax {
        x: NodeId,
    },
    LogSoftmax {
        x: NodeId,
    },
    /// Single component of a vector.
    Pick {
        x: NodeId,
        index: usize,
    },
    Sum {
        x: NodeId,
    },
    Mean {
        x: NodeId,
    },
    /// Scalar parts assembled into one vector.
    Concat {
        parts: Vec<NodeId>,
    },
    /// Mean of embedding-table rows selected by token ids.
    MeanEmbed {
        table: NodeId,
        ids: Vec<u32>,
        dim: usize,
    },
    /// One pooled row per id list, stacked into a matrix.
    StackMeanEmbed {
        table: NodeId,
        rows: Vec<Vec<u32>>,
        dim: usize,
    },
    /// Broadcast row added to every matrix row.
    AddRow {
        matrix: NodeId,
        row: NodeId,
    },
    /// sum_i w_i * x_i with untracked constant weights.
    DotConst {
        x: NodeId,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    values: Vec<f64>,
    shape: Vec<usize>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Numerically stable softmax (max subtraction) into a fresh vector.
pub(crate) fn softmax_values(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// log softmax via the shifted log-sum-exp.
pub(crate) fn log_softmax_values(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    xs.iter().map(|x| x - lse).collect()
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn values(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].values
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar_value(&self, id: NodeId) -> Result<f64> {
        let v = self.values(id);
        if v.len() != 1 {
            return Err(Error::Contract(format!(
                "expected scalar node, got {} values",
                v.len()
            )));
        }
        Ok(v[0])
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, values: Vec<f64>) -> NodeId {
        debug_assert!(
            values.iter().all(|v| v.is_finite()),
            "non-finite forward value"
        );
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, values, shape });
        id
    }

    pub fn param(&mut self, t: &Tensor) -> NodeId {
        self.push(
            Op::Leaf {
                requires_grad: true,
            },
            t.shape().to_vec(),
            t.values().to_vec(),
        )
    }

    pub fn constant(&mut self, t: &Tensor) -> NodeId {
        self.push(
            Op::Leaf {
                requires_grad: false,
            },
            t.shape().to_vec(),
            t.values().to_vec(),
        )
    }

    pub fn constant_vec(&mut self, values: Vec<f64>) -> NodeId {
        let shape = vec![values.len()];
        self.push(
            Op::Leaf {
                requires_grad: false,
            },
            shape,
            values,
        )
    }

    fn as_matrix(&self, id: NodeId, side: &str) -> Result<(usize, usize)> {
        match *self.shape(id) {
            [r, c] => Ok((r, c)),
            ref s => Err(Error::Dimension(format!(
                "matmul {side} operand must be 2-d, got {s:?}"
            ))),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = self.as_matrix(a, "left")?;
        let (kb, n) = self.as_matrix(b, "right")?;
        if ka != kb {
            return Err(Error::Dimension(format!(
                "matmul inner dimensions disagree: [{m}x{ka}] vs [{kb}x{n}]"
            )));
        }
        let k = ka;
        let av = self.values(a);
        let bv = self.values(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                let ail = av[i * k + l];
                let brow = &bv[l * n..(l + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += ail * brow[j];
                }
            }
        }
        Ok(self.push(Op::Matmul { a, b, m, k, n }, vec![m, n], out))
    }

    fn check_same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension(format!(
                "{what} requires equal shapes: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape(a, b, "add")?;
        let out: Vec<f64> = self
            .values(a)
            .iter()
            .zip(self.values(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Add { a, b }, shape, out))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape(a, b, "mul")?;
        let out: Vec<f64> = self
            .values(a)
            .iter()
            .zip(self.values(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Mul { a, b }, shape, out))
    }

    /// ReLU with subgradient 0 at exactly 0.
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.values(x).iter().map(|v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Relu { x }, shape, out)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let out: Vec<f64> = self.values(x).iter().map(|v| v * c).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Scale { x, c }, shape, out)
    }

    pub fn add_const(&mut self, x: NodeId, c: &[f64]) -> Result<NodeId> {
        if self.values(x).len() != c.len() {
            return Err(Error::Dimension(format!(
                "add_const length mismatch: {} vs {}",
                self.values(x).len(),
                c.len()
            )));
        }
        let out: Vec<f64> = self.values(x).iter().zip(c).map(|(v, k)| v + k).collect();
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::AddConst { x }, shape, out))
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.values(x).iter().map(|v| v * v).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Square { x }, shape, out)
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        if self.values(x).is_empty() {
            return Err(Error::Dimension("softmax over empty input".into()));
        }
        let out = softmax_values(self.values(x));
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::Softmax { x }, shape, out))
    }

    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        if self.values(x).is_empty() {
            return Err(Error::Dimension("log_softmax over empty input".into()));
        }
        let out = log_softmax_values(self.values(x));
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::LogSoftmax { x }, shape, out))
    }

    pub fn pick(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let v = self.values(x);
        if index >= v.len() {
            return Err(Error::Dimension(format!(
                "pick index {index} out of range for length {}",
                v.len()
            )));
        }
        let out = vec![v[index]];
        Ok(self.push(Op::Pick { x, index }, vec![1], out))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let out = vec![self.values(x).iter().sum()];
        self.push(Op::Sum { x }, vec![1], out)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = self.values(x);
        let out = vec![v.iter().sum::<f64>() / v.len() as f64];
        self.push(Op::Mean { x }, vec![1], out)
    }

    /// Assemble scalar nodes into one [n] vector.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Dimension("concat of zero parts".into()));
        }
        let mut out = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.values(p);
            if v.len() != 1 {
                return Err(Error::Dimension(format!(
                    "concat parts must be scalars, got {} values",
                    v.len()
                )));
            }
            out.push(v[0]);
        }
        Ok(self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            vec![out.len()],
            out,
        ))
    }

    /// Mean of the embedding rows for `ids` (ids index rows of `table`).
    pub fn mean_embed(&mut self, table: NodeId, ids: &[u32]) -> Result<NodeId> {
        let (rows, dim) = self.as_matrix(table, "embedding")?;
        if ids.is_empty() {
            return Err(Error::Contract("mean_embed over zero tokens".into()));
        }
        let tv = self.values(table);
        let mut out = vec![0.0; dim];
        for &id in ids {
            let id = id as usize;
            if id >= rows {
                return Err(Error::Contract(format!(
                    "token id {id} out of range for vocab of {rows}"
                )));
            }
            let row = &tv[id * dim..(id + 1) * dim];
            for (o, r) in out.iter_mut().zip(row) {
                *o += r;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        for o in &mut out {
            *o *= inv;
        }
        Ok(self.push(
            Op::MeanEmbed {
                table,
                ids: ids.to_vec(),
                dim,
            },
            vec![1, dim],
            out,
        ))
    }

    /// Stacked pooling: row r is the mean of the embedding rows selected
    /// by `rows[r]`. Scores all choices of one item in a single matrix.
    pub fn stack_mean_embed(&mut self, table: NodeId, rows: &[Vec<u32>]) -> Result<NodeId> {
        let (vocab_rows, dim) = self.as_matrix(table, "embedding")?;
        if rows.is_empty() {
            return Err(Error::Contract("stack_mean_embed over zero rows".into()));
        }
        let tv = self.values(table);
        let mut out = vec![0.0; rows.len() * dim];
        for (r, ids) in rows.iter().enumerate() {
            if ids.is_empty() {
                return Err(Error::Contract(
                    "stack_mean_embed row with zero tokens".into(),
                ));
            }
            let orow = &mut out[r * dim..(r + 1) * dim];
            for &id in ids {
                let id = id as usize;
                if id >= vocab_rows {
                    return Err(Error::Contract(format!(
                        "token id {id} out of range for vocab of {vocab_rows}"
                    )));
                }
                let row = &tv[id * dim..(id + 1) * dim];
                for (o, v) in orow.iter_mut().zip(row) {
                    *o += v;
                }
            }
            let inv = 1.0 / ids.len() as f64;
            for o in orow.iter_mut() {
                *o *= inv;
            }
        }
        let shape = vec![rows.len(), dim];
        Ok(self.push(
            Op::StackMeanEmbed {
                table,
                rows: rows.to_vec(),
                dim,
            },
            shape,
            out,
        ))
    }

    /// matrix[r, c] + row[0, c] for every r.
    pub fn add_row(&mut self, matrix: NodeId, row: NodeId) -> Result<NodeId> {
        let (r, c) = self.as_matrix(matrix, "left")?;
        let (rr, rc) = self.as_matrix(row, "right")?;
        if rr != 1 || rc != c {
            return Err(Error::Dimension(format!(
                "add_row expects a [1x{c}] row for a [{r}x{c}] matrix, got [{rr}x{rc}]"
            )));
        }
        let mv = self.values(matrix);
        let rv = self.values(row);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] = mv[i * c + j] + rv[j];
            }
        }
        Ok(self.push(Op::AddRow { matrix, row }, vec![r, c], out))
    }

    pub fn dot_const(&mut self, x: NodeId, weights: &[f64]) -> Result<NodeId> {
        let v = self.values(x);
        if v.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "dot_const length mismatch: {} vs {}",
                v.len(),
                weights.len()
            )));
        }
        let out = vec![v.iter().zip(weights).map(|(a, w)| a * w).sum()];
        Ok(self.push(
            Op::DotConst {
                x,
                weights: weights.to_vec(),
            },
            vec![1],
            out,
        ))
    }

    /// True per node when a differentiable parameter sits somewhere in
    /// its input cone; constants and constant-only subtrees are skipped
    /// during the reverse pass.
    fn needs_grad_mask(&self) -> Vec<bool> {
        let mut needs = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            needs[i] = match &node.op {
                Op::Leaf { requires_grad } => *requires_grad,
                Op::Matmul { a, b, .. } | Op::Add { a, b } | Op::Mul { a, b } => {
                    needs[a.0] || needs[b.0]
                }
                Op::Relu { x }
                | Op::Scale { x, .. }
                | Op::AddConst { x }
                | Op::Square { x }
                | Op::Softmax { x }
                | Op::LogSoftmax { x }
                | Op::Pick { x, .. }
                | Op::Sum { x }
                | Op::Mean { x }
                | Op::DotConst { x, .. } => needs[x.0],
                Op::Concat { parts } => parts.iter().any(|p| needs[p.0]),
                Op::MeanEmbed { table, .. } | Op::StackMeanEmbed { table, .. } => needs[table.0],
                Op::AddRow { matrix, row } => needs[matrix.0] || needs[row.0],
            };
        }
        needs
    }

    /// Reverse pass from a scalar loss node. Returns one gradient buffer per
    /// node (None where no gradient flowed). Each node is visited exactly
    /// once, in reverse insertion order.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.values(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got {} values",
                self.values(loss).len()
            )));
        }
        let needs = self.needs_grad_mask();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !needs[i] {
                grads[i] = None;
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf { .. } => {
                    // Re-install: leaves keep their accumulated gradient.
                    grads[i] = Some(g);
                    continue;
                }
                Op::Matmul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let av = &self.nodes[a.0].values;
                    let bv = &self.nodes[b.0].values;
                    {
                        // dA[i, l] = <dC row i, B row l>
                        let da = grad_buf(&mut grads, *a, m * k);
                        for i2 in 0..m {
                            let grow = &g[i2 * n..(i2 + 1) * n];
                            let darow = &mut da[i2 * k..(i2 + 1) * k];
                            for (l, dal) in darow.iter_mut().enumerate() {
                                let brow = &bv[l * n..(l + 1) * n];
                                let mut s = 0.0;
                                for (gi, bi) in grow.iter().zip(brow) {
                                    s += gi * bi;
                                }
                                *dal += s;
                            }
                        }
                    }
                    {
                        // dB row l += A[i, l] * dC row i
                        let db = grad_buf(&mut grads, *b, k * n);
                        for i2 in 0..m {
                            let grow = &g[i2 * n..(i2 + 1) * n];
                            let arow = &av[i2 * k..(i2 + 1) * k];
                            for (l, &ail) in arow.iter().enumerate() {
                                let dbrow = &mut db[l * n..(l + 1) * n];
                                for (dbj, gj) in dbrow.iter_mut().zip(grow) {
                                    *dbj += ail * gj;
                                }
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Mul { a, b } => {
                    let bv: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[b.0].values)
                        .map(|(gi, y)| gi * y)
                        .collect();
                    let av: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].values)
                        .map(|(gi, x)| gi * x)
                        .collect();
                    accumulate(&mut grads, *a, &bv);
                    accumulate(&mut grads, *b, &av);
                }
                Op::Relu { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[x.0].values)
                        .map(|(gi, v)| if *v > 0.0 { *gi } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::Scale { x, c } => {
                    let dx: Vec<f64> = g.iter().map(|gi| gi * c).collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::AddConst { x } => {
                    accumulate(&mut grads, *x, &g);
                }
                Op::Square { x } => {
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[x.0].values)
                        .map(|(gi, v)| 2.0 * v * gi)
                        .collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::Softmax { x } => {
                    // dx = y .* (g - <g, y>)
                    let y = &node.values;
                    let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    let dx: Vec<f64> = g.iter().zip(y).map(|(gi, yi)| yi * (gi - dot)).collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::LogSoftmax { x } => {
                    // dx = g - softmax(x) * sum(g); softmax(x) = exp(output).
                    let gsum: f64 = g.iter().sum();
                    let dx: Vec<f64> = g
                        .iter()
                        .zip(&node.values)
                        .map(|(gi, yi)| gi - yi.exp() * gsum)
                        .collect();
                    accumulate(&mut grads, *x, &dx);
                }
                Op::Pick { x, index } => {
                    let len = self.nodes[x.0].values.len();
                    let dx = grad_buf(&mut grads, *x, len);
                    dx[*index] += g[0];
                }
                Op::Sum { x } => {
                    let len = self.nodes[x.0].values.len();
                    let dx = grad_buf(&mut grads, *x, len);
                    for d in dx.iter_mut() {
                        *d += g[0];
                    }
                }
                Op::Mean { x } => {
                    let len = self.nodes[x.0].values.len();
                    let gi = g[0] / len as f64;
                    let dx = grad_buf(&mut grads, *x, len);
                    for d in dx.iter_mut() {
                        *d += gi;
                    }
                }
                Op::Concat { parts } => {
                    for (p, gi) in parts.iter().zip(&g) {
                        accumulate(&mut grads, *p, std::slice::from_ref(gi));
                    }
                }
                Op::MeanEmbed { table, ids, dim } => {
                    let rows = self.nodes[table.0].values.len() / dim;
                    let inv = 1.0 / ids.len() as f64;
                    let dt = grad_buf(&mut grads, *table, rows * dim);
                    for &id in ids {
                        let row = &mut dt[id as usize * dim..(id as usize + 1) * dim];
                        for (r, gi) in row.iter_mut().zip(&g) {
                            *r += gi * inv;
                        }
                    }
                }
                Op::StackMeanEmbed { table, rows, dim } => {
                    let vocab_rows = self.nodes[table.0].values.len() / dim;
                    let dt = grad_buf(&mut grads, *table, vocab_rows * dim);
                    for (r, ids) in rows.iter().enumerate() {
                        let inv = 1.0 / ids.len() as f64;
                        let grow = &g[r * dim..(r + 1) * dim];
                        for &id in ids {
                            let trow = &mut dt[id as usize * dim..(id as usize + 1) * dim];
                            for (t, gi) in trow.iter_mut().zip(grow) {
                                *t += gi * inv;
                            }
                        }
                    }
                }
                Op::AddRow { matrix, row } => {
                    let c = self.nodes[row.0].values.len();
                    let r = g.len() / c;
                    accumulate(&mut grads, *matrix, &g);
                    let dr = grad_buf(&mut grads, *row, c);
                    for i in 0..r {
                        for j in 0..c {
                            dr[j] += g[i * c + j];
                        }
                    }
                }
                Op::DotConst { x, weights } => {
                    let dx: Vec<f64> = weights.iter().map(|w| w * g[0]).collect();
                    accumulate(&mut grads, *x, &dx);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn grad_buf(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, g: &[f64]) {
    let buf = grads[id.0].get_or_insert_with(|| vec![0.0; g.len()]);
    for (b, gi) in buf.iter_mut().zip(g) {
        *b += gi;
    }
}

/// Per-node gradient buffers produced by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient of a node, materializing zeros when nothing flowed.
    pub fn get_or_zeros(&self, id: NodeId, len: usize) -> Vec<f64> {
        match self.get(id) {
            Some(g) => g.to_vec(),
            None => vec![0.0; len],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn fd_grad(f: impl Fn(&[f64]) -> f64, xs: &[f64], eps: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len());
        for i in 0..xs.len() {
            let mut plus = xs.to_vec();
            let mut minus = xs.to_vec();
            plus[i] += eps;
            minus[i] -= eps;
            out.push((f(&plus) - f(&minus)) / (2.0 * eps));
        }
        out
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / f64::max(1e-8, a.abs() + b.abs())
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let i2 = tape.constant(&Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let m = tape.constant(&Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let c = tape.matmul(i2, m).unwrap();
        assert_eq!(tape.values(c), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_annihilating_product() {
        let mut tape = Tape::new();
        let a = tape.constant(&Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        let b = tape.constant(&Tensor::new(vec![2, 2], vec![0.0, 0.0, 0.0, 1.0]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.values(c), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(&Tensor::zeros(vec![3, 4]));
        let b = tape.constant(&Tensor::zeros(vec![5, 2]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("3x4") && err.contains("5x2"), "{err}");
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = RngState::new(17);
        let a = Tensor::uniform_init(vec![3, 4], 4, &mut rng);
        let b = Tensor::uniform_init(vec![4, 2], 4, &mut rng);

        let mut tape = Tape::new();
        let na = tape.param(&a);
        let nb = tape.constant(&b);
        let c = tape.matmul(na, nb).unwrap();
        let loss = tape.sum(c);
        let grads = tape.backward(loss).unwrap();
        let ga = grads.get(na).unwrap();

        // d sum(A@B) / dA[i,l] = sum_j B[l,j] — the column sums of B,
        // broadcast over the rows of A.
        let col_sums: Vec<f64> = (0..4)
            .map(|l| (0..2).map(|j| b.values()[l * 2 + j]).sum())
            .collect();
        for i in 0..3 {
            for l in 0..4 {
                assert!((ga[i * 4 + l] - col_sums[l]).abs() < 1e-12);
            }
        }

        let f = |xs: &[f64]| {
            let mut tape = Tape::new();
            let na = tape.param(&Tensor::new(vec![3, 4], xs.to_vec()).unwrap());
            let nb = tape.constant(&b);
            let c = tape.matmul(na, nb).unwrap();
            let loss = tape.sum(c);
            tape.scalar_value(loss).unwrap()
        };
        let fd = fd_grad(f, a.values(), 1e-5);
        for (g, f) in ga.iter().zip(&fd) {
            assert!(rel_err(*g, *f) < 1e-4);
        }
    }

    #[test]
    fn relu_sign_cases() {
        let mut tape = Tape::new();
        let x = tape.constant_vec(vec![-1.0, 0.0, 2.0]);
        let y = tape.relu(x);
        assert_eq!(tape.values(y), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn add_zeros_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant_vec(vec![1.5, -2.0, 0.25]);
        let z = tape.constant_vec(vec![0.0, 0.0, 0.0]);
        let y = tape.add(x, z).unwrap();
        assert_eq!(tape.values(y), tape.values(x));
    }

    #[test]
    fn elementwise_shape_mismatch_errors() {
        let mut tape = Tape::new();
        let x = tape.constant_vec(vec![1.0, 2.0]);
        let y = tape.constant_vec(vec![1.0, 2.0, 3.0]);
        assert!(tape.add(x, y).is_err());
        assert!(tape.mul(x, y).is_err());
    }

    #[test]
    fn mul_gradient_matches_finite_differences() {
        let mut rng = RngState::new(23);
        let xs: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let ws: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();

        let mut tape = Tape::new();
        let nx = tape.param(&Tensor::new(vec![5], xs.clone()).unwrap());
        let nw = tape.constant_vec(ws.clone());
        let prod = tape.mul(nx, nw).unwrap();
        let loss = tape.sum(prod);
        let grads = tape.backward(loss).unwrap();
        let gx = grads.get(nx).unwrap();

        let f = |v: &[f64]| -> f64 { v.iter().zip(&ws).map(|(a, b)| a * b).sum() };
        let fd = fd_grad(f, &xs, 1e-5);
        let max_rel = gx
            .iter()
            .zip(&fd)
            .map(|(a, b)| rel_err(*a, *b))
            .fold(0.0, f64::max);
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn softmax_symmetry_and_sum() {
        let mut tape = Tape::new();
        let x = tape.constant_vec(vec![0.0, 0.0, 0.0, 0.0]);
        let y = tape.softmax(x).unwrap();
        for v in tape.values(y) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_stability_at_large_magnitude() {
        let mut tape = Tape::new();
        let x = tape.constant_vec(vec![1000.0, 0.0]);
        let y = tape.softmax(x).unwrap();
        let v = tape.values(y);
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
        assert!(v.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_matches_direct_exponential_oracle() {
        // Direct exp/sum, no max subtraction: an independent route.
        let xs = [1.0_f64, 2.0, 3.0];
        let exps: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let sum: f64 = exps.iter().sum();
        let expect: Vec<f64> = exps.iter().map(|e| e / sum).collect();

        let mut tape = Tape::new();
        let x = tape.constant_vec(xs.to_vec());
        let y = tape.softmax(x).unwrap();
        for (a, b) in tape.values(y).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_empty_input_is_dimension_error() {
        let mut tape = Tape::new();
        let x = tape.constant_vec(vec![]);
        assert!(matches!(tape.softmax(x), Err(Error::Dimension(_))));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let w = tape.param(&Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
        let loss = tape.sum(w);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_zero_scaled_loss_is_zeros() {
        let mut tape = Tape::new();
        let w = tape.param(&Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap());
        let s = tape.sum(w);
        let loss = tape.scale(s, 0.0);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let w = tape.param(&Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        assert!(matches!(tape.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_is_bitwise_deterministic() {
        let build = || {
            let mut rng = RngState::new(99);
            let w = Tensor::uniform_init(vec![4, 4], 4, &mut rng);
            let x = Tensor::uniform_init(vec![1, 4], 4, &mut rng);
            let mut tape = Tape::new();
            let nw = tape.param(&w);
            let nx = tape.constant(&x);
            let h = tape.matmul(nx, nw).unwrap();
            let r = tape.relu(h);
            let sm = tape.softmax(r).unwrap();
            let loss = tape.sum(sm);
            let grads = tape.backward(loss).unwrap();
            grads.get(nw).unwrap().to_vec()
        };
        let a = build();
        let b = build();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn mean_embed_pools_selected_rows() {
        let mut tape = Tape::new();
        let table =
            tape.param(&Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let pooled = tape.mean_embed(table, &[0, 2]).unwrap();
        assert_eq!(tape.values(pooled), &[3.0, 4.0]);

        let s = tape.sum(pooled);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(table).unwrap(), &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn log_softmax_gradient_matches_finite_differences() {
        let xs = vec![0.3, -1.2, 0.8, 0.1];
        let mut tape = Tape::new();
        let nx = tape.param(&Tensor::new(vec![4], xs.clone()).unwrap());
        let ls = tape.log_softmax(nx).unwrap();
        let picked = tape.pick(ls, 2).unwrap();
        let loss = tape.scale(picked, -1.0);
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(nx).unwrap();

        let f = |v: &[f64]| -log_softmax_values(v)[2];
        let fd = fd_grad(f, &xs, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!(rel_err(*a, *b) < 1e-6);
        }
    }
}

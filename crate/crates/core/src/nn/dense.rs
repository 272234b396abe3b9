use crate::tensor::{Scalar, ShapeError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn dims<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize), ShapeError> {
    match *weights.shape() {
        [n, m] if input.shape() == [n] => Ok((n, m)),
        [n, _] => Err(ShapeError::mismatch("dense input", &[n], input.shape())),
        _ => Err(ShapeError::mismatch(
            "dense weights",
            &[input.len(), 0],
            weights.shape(),
        )),
    }
}

/// `out = inputᵀ · weights + bias` for an `N`-vector and `N×M` weights.
pub fn dense_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, ShapeError> {
    let (_, m) = dims(input, weights)?;
    if bias.shape() != [m] {
        return Err(ShapeError::mismatch("dense bias", &[m], bias.shape()));
    }
    let mut out = bias.data().to_vec();
    for (row, &x) in weights.data().chunks_exact(m).zip(input.data()) {
        for (o, &wv) in out.iter_mut().zip(row) {
            *o = *o + x * wv;
        }
    }
    Tensor::from_vec(&[m], out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<DenseGrads<T>, ShapeError> {
    let (n, m) = dims(input, weights)?;
    if upstream.shape() != [m] {
        return Err(ShapeError::mismatch("dense upstream", &[m], upstream.shape()));
    }
    let g = upstream.data();
    let mut d_in = Vec::with_capacity(n);
    let mut d_w = Vec::with_capacity(n * m);
    for (row, &x) in weights.data().chunks_exact(m).zip(input.data()) {
        d_in.push(row.iter().zip(g).map(|(&a, &b)| a * b).sum());
        d_w.extend(g.iter().map(|&gv| x * gv));
    }
    Ok(DenseGrads {
        input: Tensor::from_vec(&[n], d_in)?,
        weights: Tensor::from_vec(&[n, m], d_w)?,
        bias: upstream.clone(),
    })
}

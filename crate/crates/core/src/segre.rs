//! The Segre embedding in the standard affine chart.
//!
//! A point is given by one affine vector per factor; the full factor vector
//! is `(1, coords_f)`. The embedding flattens the outer product in mixed
//! radix with the first factor slowest and the last factor fastest, so for
//! shape `(1,1)` and coordinates `(a), (b)` the embedded vector is
//! `(1, b, a, ab)`. Every equation vector uses the same index order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{PrimeField, PrimeFieldMatrix};
use crate::shape::SegreShape;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffinePoint {
    shape: SegreShape,
    field: PrimeField,
    coords: Vec<Vec<u64>>,
}

impl AffinePoint {
    pub fn new(shape: &SegreShape, field: PrimeField, coords: Vec<Vec<u64>>) -> Result<Self> {
        if coords.len() != shape.factors() {
            return Err(Error::InvalidInput(format!(
                "{} coordinate blocks for {} factors",
                coords.len(),
                shape.factors()
            )));
        }
        for (block, &dim) in coords.iter().zip(shape.dims()) {
            if block.len() != dim as usize {
                return Err(Error::InvalidInput(format!(
                    "block of length {} for factor P^{dim}",
                    block.len()
                )));
            }
            if block.iter().any(|&x| x >= field.modulus()) {
                return Err(Error::InvalidInput("coordinate not reduced".into()));
            }
        }
        Ok(Self {
            shape: shape.clone(),
            field,
            coords,
        })
    }

    /// The point `(1,0,...,0)` in every factor.
    pub fn origin(shape: &SegreShape, field: PrimeField) -> Self {
        let coords = shape.dims().iter().map(|&d| vec![0; d as usize]).collect();
        Self {
            shape: shape.clone(),
            field,
            coords,
        }
    }

    /// Uniform chart coordinates.
    pub fn random<R: Rng + ?Sized>(shape: &SegreShape, field: PrimeField, rng: &mut R) -> Self {
        let coords = shape
            .dims()
            .iter()
            .map(|&d| (0..d).map(|_| field.random_element(rng)).collect())
            .collect();
        Self {
            shape: shape.clone(),
            field,
            coords,
        }
    }

    pub fn shape(&self) -> &SegreShape {
        &self.shape
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn coords(&self) -> &[Vec<u64>] {
        &self.coords
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().flatten().all(|&x| x == 0)
    }

    /// The full vector `(1, coords_f)` of factor `f`.
    pub fn factor_vector(&self, f: usize) -> Vec<u64> {
        let mut v = Vec::with_capacity(self.coords[f].len() + 1);
        v.push(1);
        v.extend_from_slice(&self.coords[f]);
        v
    }

    fn factor_vectors(&self) -> Vec<Vec<u64>> {
        (0..self.shape.factors())
            .map(|f| self.factor_vector(f))
            .collect()
    }

    pub fn embed(&self) -> Vec<u64> {
        kronecker_all(self.field, &self.factor_vectors())
    }

    pub fn tangent_frame(&self) -> TangentFrame {
        TangentFrame::at(self)
    }
}

/// `count` points, the first at the chart origin and the rest uniform.
pub fn sample_points<R: Rng + ?Sized>(
    shape: &SegreShape,
    field: PrimeField,
    count: usize,
    rng: &mut R,
) -> Vec<AffinePoint> {
    (0..count)
        .map(|i| {
            if i == 0 {
                AffinePoint::origin(shape, field)
            } else {
                AffinePoint::random(shape, field, rng)
            }
        })
        .collect()
}

fn kronecker(field: PrimeField, left: &[u64], right: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for &a in left {
        if a == 0 {
            out.extend(std::iter::repeat_n(0, right.len()));
        } else {
            out.extend(right.iter().map(|&b| field.mul(a, b)));
        }
    }
    out
}

fn kronecker_all(field: PrimeField, vectors: &[Vec<u64>]) -> Vec<u64> {
    vectors
        .iter()
        .fold(vec![1], |acc, v| kronecker(field, &acc, v))
}

/// Affine-cone tangent space at a point: the embedded point followed by
/// the `n` chart-direction derivatives, factor by factor.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    point: AffinePoint,
    rows: PrimeFieldMatrix,
}

impl TangentFrame {
    fn at(point: &AffinePoint) -> Self {
        let field = point.field;
        let shape = &point.shape;
        let vectors = point.factor_vectors();
        let q = vectors.len();
        let size = shape.size() as usize;

        // prefix[f] = v_1 (x) ... (x) v_{f-1}, suffix[f] = v_{f+1} (x) ... (x) v_q
        let mut prefix = Vec::with_capacity(q + 1);
        prefix.push(vec![1u64]);
        for v in &vectors {
            let next = kronecker(field, prefix.last().unwrap(), v);
            prefix.push(next);
        }
        let mut suffix = vec![vec![1u64]; q + 1];
        for f in (0..q).rev() {
            suffix[f] = kronecker(field, &vectors[f], &suffix[f + 1]);
        }

        let n = shape.variety_dim() as usize;
        let mut rows = PrimeFieldMatrix::zeros(field, n + 1, size);
        rows.row_mut(0).copy_from_slice(&prefix[q]);
        let mut r = 1;
        for f in 0..q {
            let left = &prefix[f];
            let right = &suffix[f + 1];
            let width = vectors[f].len();
            let stride = width * right.len();
            for i in 1..width {
                let row = rows.row_mut(r);
                for (l, &a) in left.iter().enumerate() {
                    if a == 0 {
                        continue;
                    }
                    let base = l * stride + i * right.len();
                    for (j, &b) in right.iter().enumerate() {
                        row[base + j] = field.mul(a, b);
                    }
                }
                r += 1;
            }
        }
        Self {
            point: point.clone(),
            rows,
        }
    }

    pub fn point(&self) -> &AffinePoint {
        &self.point
    }

    pub fn rows(&self) -> &PrimeFieldMatrix {
        &self.rows
    }

    pub fn into_rows(self) -> PrimeFieldMatrix {
        self.rows
    }
}

/// Vertical stack of the tangent frames at `points`: `k (n+1)` rows and
/// `N+1` columns.
pub fn terracini_matrix(points: &[AffinePoint]) -> Result<PrimeFieldMatrix> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidInput("no points".into()))?;
    let shape = first.shape.canonical();
    let field = first.field;
    if points
        .iter()
        .any(|p| p.shape.canonical() != shape || p.field != field)
    {
        return Err(Error::InvalidInput(
            "points do not share one shape and field".into(),
        ));
    }
    let per_point = shape.variety_dim() as usize + 1;
    let mut stacked =
        PrimeFieldMatrix::with_row_capacity(field, shape.size() as usize, points.len() * per_point);
    for p in points {
        stacked.append_rows(p.tangent_frame().rows())?;
    }
    Ok(stacked)
}

/// Contraction of an equation against the mixed second derivatives of the
/// embedding at `point`.
///
/// Rows and columns are indexed by chart directions `(f, i)` in factor
/// order. Entries with both directions in the same factor are zero because
/// the embedding is linear in each factor vector.
pub fn mixed_second_contraction(point: &AffinePoint, equation: &[u64]) -> Result<PrimeFieldMatrix> {
    let shape = &point.shape;
    let field = point.field;
    let size = shape.size() as usize;
    if equation.len() != size {
        return Err(Error::InvalidInput(format!(
            "equation of length {} for ambient size {size}",
            equation.len()
        )));
    }
    let dims: Vec<usize> = shape.dims().iter().map(|&d| d as usize).collect();
    let q = dims.len();
    let n = shape.variety_dim() as usize;
    let mut out = PrimeFieldMatrix::zeros(field, n, n);
    if q < 2 {
        return Ok(out);
    }
    let vectors = point.factor_vectors();
    let mut offset = vec![0usize; q];
    for f in 1..q {
        offset[f] = offset[f - 1] + dims[f - 1];
    }
    for f in 0..q {
        for g in f + 1..q {
            let block = contract_except(field, equation, &vectors, f, g);
            let width_g = dims[g] + 1;
            for i in 1..=dims[f] {
                for j in 1..=dims[g] {
                    let value = block[i * width_g + j];
                    let (r, c) = (offset[f] + i - 1, offset[g] + j - 1);
                    out.set(r, c, value);
                    out.set(c, r, value);
                }
            }
        }
    }
    Ok(out)
}

/// Contracts the tensor `equation` with the factor vectors of every factor
/// except `f` and `g`, returning the `(a_f+1) x (a_g+1)` remainder.
fn contract_except(
    field: PrimeField,
    equation: &[u64],
    vectors: &[Vec<u64>],
    f: usize,
    g: usize,
) -> Vec<u64> {
    let q = vectors.len();
    let width_f = vectors[f].len();
    let width_g = vectors[g].len();
    let mut out = vec![0u64; width_f * width_g];
    let mut digits = vec![0usize; q];
    // weight = product of v_h[digit_h] over h outside {f, g}
    for (idx, &coeff) in equation.iter().enumerate() {
        if idx > 0 {
            // advance the mixed-radix counter, last factor fastest
            let mut h = q - 1;
            loop {
                digits[h] += 1;
                if digits[h] < vectors[h].len() {
                    break;
                }
                digits[h] = 0;
                h -= 1;
            }
        }
        if coeff == 0 {
            continue;
        }
        let mut weight = coeff;
        for h in 0..q {
            if h == f || h == g {
                continue;
            }
            let v = vectors[h][digits[h]];
            if v == 0 {
                weight = 0;
                break;
            }
            if v != 1 {
                weight = field.mul(weight, v);
            }
        }
        if weight == 0 {
            continue;
        }
        let slot = digits[f] * width_g + digits[g];
        out[slot] = field.add(out[slot], weight);
    }
    out
}

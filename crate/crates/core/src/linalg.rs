//! Dense linear algebra over word-size prime fields.
//!
//! Matrices are row-major `u64` residues. Elimination is forward-only with
//! deterministic pivoting (first nonzero row at or below the current rank),
//! so results depend only on the input. When the modulus is below `2^31` the
//! elimination runs on a `u32` copy with Shoup multiplication, which the
//! compiler vectorizes; wider moduli use the same scheme on `u64`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `GF(p)` for an odd prime `2^30 < p < 2^63`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    p: u64,
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;

    fn try_from(p: u64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.p
    }
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p <= 1 << 30 || p >= 1 << 63 {
            return Err(Error::InvalidInput(format!(
                "modulus {p} outside (2^30, 2^63)"
            )));
        }
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("modulus {p} is not prime")));
        }
        Ok(Self { p })
    }

    pub fn modulus(self) -> u64 {
        self.p
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.p)
    }

    pub fn pow(self, base: u64, exp: u64) -> u64 {
        pow_mod(base, exp, self.p)
    }

    /// Multiplicative inverse of a nonzero residue.
    pub fn inv(self, a: u64) -> u64 {
        debug_assert!(!a.is_multiple_of(self.p), "inverse of zero");
        self.pow(a, self.p - 2)
    }

    /// Reduces a signed integer into `[0, p)`.
    pub fn reduce(self, x: i64) -> u64 {
        let r = i128::from(x).rem_euclid(i128::from(self.p));
        r as u64
    }

    pub fn random_element<R: Rng + ?Sized>(self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.p)
    }
}

#[inline]
fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(p)) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Miller-Rabin with the first twelve prime bases, which is exact for every
/// `n < 3.3 * 10^24` and so for all of `u64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n.is_multiple_of(b) {
            return n == b;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Samples a uniformly random prime with exactly `bits` bits.
pub fn random_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<PrimeField> {
    if !(31..=62).contains(&bits) {
        return Err(Error::InvalidInput(format!(
            "prime width {bits} outside 31..=62 bits"
        )));
    }
    let lo = 1u64 << (bits - 1);
    let hi = 1u64 << bits;
    loop {
        let candidate = rng.gen_range(lo..hi) | 1;
        if is_prime(candidate) {
            return PrimeField::new(candidate);
        }
    }
}

/// Dense row-major matrix over a prime field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeFieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl PrimeFieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Empty matrix with storage reserved for `rows` rows.
    pub fn with_row_capacity(field: PrimeField, cols: usize, rows: usize) -> Self {
        Self {
            field,
            rows: 0,
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from residues already in `[0, p)`.
    pub fn from_row_major(
        field: PrimeField,
        rows: usize,
        cols: usize,
        data: Vec<u64>,
    ) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&x| x >= field.p) {
            return Err(Error::InvalidInput(format!(
                "entry {bad} not reduced mod {}",
                field.p
            )));
        }
        Ok(Self {
            field,
            rows,
            cols,
            data,
        })
    }

    /// Reduces a signed integer matrix modulo `p`.
    pub fn from_integers(field: PrimeField, rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged integer matrix".into()));
        }
        let data = rows.iter().flatten().map(|&x| field.reduce(x)).collect();
        Ok(Self {
            field,
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: u64) {
        debug_assert!(value < self.field.p);
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    /// Appends one row of reduced residues.
    pub fn push_row(&mut self, row: &[u64]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Appends all rows of `other` below `self`.
    pub fn append_rows(&mut self, other: &PrimeFieldMatrix) -> Result<()> {
        if other.field != self.field || other.cols != self.cols {
            return Err(Error::InvalidInput(
                "cannot stack matrices of different shape or field".into(),
            ));
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn mul(&self, other: &PrimeFieldMatrix) -> Result<Self> {
        if self.cols != other.rows || self.field != other.field {
            return Err(Error::InvalidInput("incompatible matrix product".into()));
        }
        let f = self.field;
        let mut out = Self::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = f.add(out.data[idx], f.mul(a, other.get(l, j)));
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.cols);
        let f = self.field;
        (0..self.rows).map(|r| dot(f, self.row(r), v)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// Basis of `{x : M x = 0}` as the rows of a `(cols - rank) x cols`
    /// matrix.
    pub fn nullspace(&self) -> PrimeFieldMatrix {
        self.echelon().nullspace()
    }

    /// Forward elimination of a copy of the matrix.
    pub fn echelon(&self) -> EchelonForm {
        self.clone().into_echelon()
    }

    /// Forward elimination in place, consuming the matrix.
    pub fn into_echelon(self) -> EchelonForm {
        let PrimeFieldMatrix {
            field,
            rows,
            cols,
            data,
        } = self;
        let p = field.p;
        if p < 1 << 31 {
            let mut narrow: Vec<u32> = data.into_iter().map(|x| x as u32).collect();
            let pivots = eliminate::<u32>(&mut narrow, rows, cols, p as u32);
            let rank = pivots.len();
            narrow.truncate(rank * cols);
            let data = narrow.into_iter().map(u64::from).collect();
            EchelonForm {
                field,
                cols,
                pivots,
                data,
            }
        } else {
            let mut data = data;
            let pivots = eliminate::<u64>(&mut data, rows, cols, p);
            data.truncate(pivots.len() * cols);
            EchelonForm {
                field,
                cols,
                pivots,
                data,
            }
        }
    }
}

fn dot(f: PrimeField, a: &[u64], b: &[u64]) -> u64 {
    // Products of residues are below 2^126; reducing after every second one
    // keeps the u128 accumulator in range.
    let p = u128::from(f.p);
    let mut acc: u128 = 0;
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        acc += u128::from(x) * u128::from(y);
        if i % 2 == 1 {
            acc %= p;
        }
    }
    (acc % p) as u64
}

/// Row-echelon form: the first `rank` rows of the eliminated matrix, each
/// with a unit pivot, pivot columns strictly increasing.
#[derive(Clone, Debug)]
pub struct EchelonForm {
    field: PrimeField,
    cols: usize,
    pivots: Vec<usize>,
    data: Vec<u64>,
}

impl EchelonForm {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// One basis vector per free column, by back substitution.
    pub fn nullspace(&self) -> PrimeFieldMatrix {
        let f = self.field;
        let cols = self.cols;
        let mut is_pivot = vec![false; cols];
        for &c in &self.pivots {
            is_pivot[c] = true;
        }
        let free: Vec<usize> = (0..cols).filter(|&c| !is_pivot[c]).collect();
        let mut out = PrimeFieldMatrix::zeros(f, free.len(), cols);
        for (slot, &fc) in free.iter().enumerate() {
            let x = out.row_mut(slot);
            x[fc] = 1;
            for (i, &pc) in self.pivots.iter().enumerate().rev() {
                let row = self.row(i);
                let s = dot(f, &row[pc + 1..], &x[pc + 1..]);
                x[pc] = f.neg(s);
            }
        }
        out
    }
}

/// Residue word used by the elimination kernel.
trait Word: Copy + Eq + Default + Send + Sync {
    const ZERO: Self;
    const ONE: Self;
    /// Shoup precomputation for multiplying by `g`: `floor(g * 2^w / p)`.
    fn shoup(g: Self, p: Self) -> Self;
    fn inv(a: Self, p: Self) -> Self;
    fn sub(a: Self, b: Self) -> Self;
    /// `row[j] <- row[j] + g * pivot[j] mod p` over the whole slice.
    fn axpy(row: &mut [Self], pivot: &[Self], g: Self, g_shoup: Self, p: Self);
    /// `row[j] <- s * row[j] mod p`.
    fn scale(row: &mut [Self], s: Self, p: Self);
}

impl Word for u32 {
    const ZERO: Self = 0;
    const ONE: Self = 1;

    fn shoup(g: u32, p: u32) -> u32 {
        ((u64::from(g) << 32) / u64::from(p)) as u32
    }

    fn inv(a: u32, p: u32) -> u32 {
        pow_mod(u64::from(a), u64::from(p) - 2, u64::from(p)) as u32
    }

    fn sub(a: u32, b: u32) -> u32 {
        a - b
    }

    fn axpy(row: &mut [u32], pivot: &[u32], g: u32, g_shoup: u32, p: u32) {
        #[cfg(target_arch = "x86_64")]
        {
            if avx2_available() {
                // SAFETY: the CPU supports AVX2, checked at runtime.
                unsafe { axpy_u32_avx2(row, pivot, g, g_shoup, p) };
                return;
            }
        }
        axpy_u32_generic(row, pivot, g, g_shoup, p);
    }

    fn scale(row: &mut [u32], s: u32, p: u32) {
        for x in row {
            *x = ((u64::from(*x) * u64::from(s)) % u64::from(p)) as u32;
        }
    }
}

#[inline(always)]
fn axpy_u32_generic(row: &mut [u32], pivot: &[u32], g: u32, g_shoup: u32, p: u32) {
    for (x, &y) in row.iter_mut().zip(pivot) {
        let q = ((u64::from(g_shoup) * u64::from(y)) >> 32) as u32;
        // in [0, 2p) since p < 2^31
        let t = g.wrapping_mul(y).wrapping_sub(q.wrapping_mul(p));
        let t = t.min(t.wrapping_sub(p));
        let s = *x + t;
        *x = s.min(s.wrapping_sub(p));
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn axpy_u32_avx2(row: &mut [u32], pivot: &[u32], g: u32, g_shoup: u32, p: u32) {
    axpy_u32_generic(row, pivot, g, g_shoup, p)
}

#[cfg(target_arch = "x86_64")]
fn avx2_available() -> bool {
    use std::sync::OnceLock;
    static AVX2: OnceLock<bool> = OnceLock::new();
    *AVX2.get_or_init(|| std::arch::is_x86_feature_detected!("avx2"))
}

impl Word for u64 {
    const ZERO: Self = 0;
    const ONE: Self = 1;

    fn shoup(g: u64, p: u64) -> u64 {
        ((u128::from(g) << 64) / u128::from(p)) as u64
    }

    fn inv(a: u64, p: u64) -> u64 {
        pow_mod(a, p - 2, p)
    }

    fn sub(a: u64, b: u64) -> u64 {
        a - b
    }

    fn axpy(row: &mut [u64], pivot: &[u64], g: u64, g_shoup: u64, p: u64) {
        for (x, &y) in row.iter_mut().zip(pivot) {
            let q = ((u128::from(g_shoup) * u128::from(y)) >> 64) as u64;
            // in [0, 2p) since p < 2^63
            let t = g.wrapping_mul(y).wrapping_sub(q.wrapping_mul(p));
            let t = if t >= p { t - p } else { t };
            let s = *x + t;
            *x = if s >= p { s - p } else { s };
        }
    }

    fn scale(row: &mut [u64], s: u64, p: u64) {
        for x in row {
            *x = mul_mod(*x, s, p);
        }
    }
}

/// Forward Gaussian elimination in place. Returns the pivot columns; the
/// first `pivots.len()` rows hold the echelon form with unit pivots.
fn eliminate<W: Word>(data: &mut [W], rows: usize, cols: usize, p: W) -> Vec<usize> {
    let mut pivots = Vec::with_capacity(rows.min(cols));
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(found) = (rank..rows).find(|&r| data[r * cols + col] != W::ZERO) else {
            continue;
        };
        if found != rank {
            let (upper, lower) = data.split_at_mut(found * cols);
            upper[rank * cols..(rank + 1) * cols].swap_with_slice(&mut lower[..cols]);
        }
        let (head, tail) = data.split_at_mut((rank + 1) * cols);
        let pivot_row = &mut head[rank * cols..];
        let lead = pivot_row[col];
        if lead != W::ONE {
            W::scale(&mut pivot_row[col..], W::inv(lead, p), p);
        }
        let pivot_tail = &pivot_row[col + 1..];
        for row in tail.chunks_exact_mut(cols) {
            let e = row[col];
            if e == W::ZERO {
                continue;
            }
            // e is nonzero and reduced, so p - e lies in (0, p).
            let g = W::sub(p, e);
            W::axpy(&mut row[col + 1..], pivot_tail, g, W::shoup(g, p), p);
            row[col] = W::ZERO;
        }
        pivots.push(col);
        rank += 1;
    }
    pivots
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field() -> PrimeField {
        PrimeField::new(2_147_483_647).unwrap()
    }

    #[test]
    fn identity_and_zero_ranks() {
        assert_eq!(PrimeFieldMatrix::identity(field(), 5).rank(), 5);
        assert_eq!(PrimeFieldMatrix::zeros(field(), 3, 7).rank(), 0);
        assert_eq!(PrimeFieldMatrix::zeros(field(), 0, 4).rank(), 0);
        assert_eq!(PrimeFieldMatrix::zeros(field(), 4, 0).rank(), 0);
    }

    #[test]
    fn nullspace_of_all_ones_row() {
        // 101 is too small for PrimeField, so check the same shape over a
        // large prime: the kernel of (1, 1) is spanned by (1, -1).
        let f = field();
        let m = PrimeFieldMatrix::from_integers(f, &[vec![1, 1]]).unwrap();
        let ns = m.nullspace();
        assert_eq!(ns.rows(), 1);
        assert_eq!(ns.row(0), &[f.p - 1, 1]);
        assert!(m.mul(&ns.transpose()).unwrap().is_zero());
    }

    #[test]
    fn nullspace_empty_for_full_column_rank() {
        let m = PrimeFieldMatrix::identity(field(), 6);
        assert_eq!(m.nullspace().rows(), 0);
    }

    #[test]
    fn rejects_non_prime_or_small_moduli() {
        assert!(PrimeField::new(101).is_err());
        assert!(PrimeField::new((1 << 31) + 1).is_err());
        assert!(PrimeField::new(2_147_483_647).is_ok());
    }

    #[test]
    fn random_prime_width_and_determinism() {
        for bits in [31, 40, 62] {
            let a = random_prime(bits, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let b = random_prime(bits, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(a, b);
            assert_eq!(64 - a.modulus().leading_zeros(), bits);
        }
        assert!(random_prime(30, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        assert!(random_prime(63, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn wide_and_narrow_kernels_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let narrow = random_prime(31, &mut rng).unwrap();
        let wide = random_prime(62, &mut rng).unwrap();
        for _ in 0..20 {
            let rows: Vec<Vec<i64>> = (0..12)
                .map(|_| (0..15).map(|_| rng.gen_range(-2..=2)).collect())
                .collect();
            let a = PrimeFieldMatrix::from_integers(narrow, &rows).unwrap();
            let b = PrimeFieldMatrix::from_integers(wide, &rows).unwrap();
            assert_eq!(a.echelon().pivots(), b.echelon().pivots());
        }
    }
}

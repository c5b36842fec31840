//! The systematic (k + r, k) MDS base code.
//!
//! Positions are 0-based: `0..k` are the systematic symbols and `k..k + r`
//! the parities, where position `k + i` holds `f_i(a) = <p_i, a>`.
//!
//! The parity generator is the Cauchy matrix `P[i][j] = 1 / (x_i + y_j)` with
//! `x_i = i` for `i < r` and `y_j = r + j` for `j < k`. Every square submatrix
//! of a Cauchy matrix is nonsingular, so `[I_k; P]` is MDS.

use crate::error::{Error, Result};
use crate::gf::{self, Gf256, FIELD_SIZE};

/// Shape of the code: `k` systematic nodes, `r` parity nodes, `r` instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodeParams {
    k: usize,
    r: usize,
}

impl CodeParams {
    pub fn new(k: usize, r: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if r == 0 {
            return Err(Error::InvalidParams("r must be at least 1".into()));
        }
        if k + r > FIELD_SIZE {
            return Err(Error::FieldTooSmall(k + r));
        }
        Ok(CodeParams { k, r })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of instances (columns) per stripe; always `r`.
    pub fn instances(&self) -> usize {
        self.r
    }

    pub fn nodes(&self) -> usize {
        self.k + self.r
    }
}

/// The `r x k` parity generator of the base code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityMatrix {
    k: usize,
    rows: Vec<Vec<Gf256>>,
}

impl ParityMatrix {
    pub fn cauchy(params: CodeParams) -> ParityMatrix {
        let (k, r) = (params.k, params.r);
        let rows = (0..r)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let x = i as u8;
                        let y = (r + j) as u8;
                        // x and y are distinct, so x ^ y is never zero
                        gf::inv(Gf256(x ^ y)).expect("Cauchy points are distinct")
                    })
                    .collect()
            })
            .collect();
        ParityMatrix { k, rows }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.rows.len()
    }

    /// Coefficient vector `p_i`.
    pub fn row(&self, i: usize) -> &[Gf256] {
        &self.rows[i]
    }

    pub fn coef(&self, i: usize, j: usize) -> Gf256 {
        self.rows[i][j]
    }

    /// Generator row for a codeword position: a unit vector for systematic
    /// positions, `p_i` for position `k + i`.
    fn generator_row(&self, position: usize) -> Vec<Gf256> {
        if position < self.k {
            let mut row = vec![Gf256::ZERO; self.k];
            row[position] = Gf256::ONE;
            row
        } else {
            self.rows[position - self.k].clone()
        }
    }

    /// Parity column `(f_1(a), ..., f_r(a))` of a message column.
    pub fn encode(&self, message: &[Gf256]) -> Result<Vec<Gf256>> {
        check_len(self.k, message.len())?;
        Ok(self
            .rows
            .iter()
            .map(|p| {
                p.iter()
                    .zip(message)
                    .fold(Gf256::ZERO, |acc, (&c, &a)| acc + c * a)
            })
            .collect())
    }

    /// Recover a message column from symbols given as `(position, value)`.
    ///
    /// Only the `k` lowest positions are used.
    pub fn decode(&self, symbols: &[(usize, Gf256)]) -> Result<Vec<Gf256>> {
        let blocks: Vec<(usize, [u8; 1])> = symbols.iter().map(|&(p, v)| (p, [v.0])).collect();
        let refs: Vec<(usize, &[u8])> = blocks.iter().map(|(p, b)| (*p, &b[..])).collect();
        Ok(self
            .decode_blocks(&refs)?
            .into_iter()
            .map(|b| Gf256(b[0]))
            .collect())
    }

    /// Lane-wise `f_i` of a column given as `k` blocks, XORed into `out`.
    pub fn parity_block_into(&self, i: usize, column: &[&[u8]], out: &mut [u8]) {
        debug_assert_eq!(column.len(), self.k);
        for (block, &c) in column.iter().zip(&self.rows[i]) {
            gf::mul_acc(out, block, c);
        }
    }

    /// Lane-wise erasure decode of one column.
    ///
    /// Symbols are `(position, block)` pairs with equal block lengths. The
    /// `k` lowest distinct positions are used; the rest are ignored.
    pub fn decode_blocks(&self, symbols: &[(usize, &[u8])]) -> Result<Vec<Vec<u8>>> {
        let k = self.k;
        let n = k + self.r();
        let mut chosen: Vec<(usize, &[u8])> = symbols.to_vec();
        chosen.sort_by_key(|&(p, _)| p);
        if let Some(w) = chosen.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!("duplicate position {}", w[0].0)));
        }
        if let Some(&(p, _)) = chosen.iter().find(|&&(p, _)| p >= n) {
            return Err(Error::InvalidInput(format!("position {p} outside 0..{n}")));
        }
        if chosen.len() < k {
            return Err(Error::TooManyErasures { needed: k, available: chosen.len() });
        }
        chosen.truncate(k);
        let len = chosen[0].1.len();
        if let Some(&(_, b)) = chosen.iter().find(|(_, b)| b.len() != len) {
            return Err(Error::LengthMismatch { expected: len, actual: b.len() });
        }

        // Systematic read: positions 0..k in order.
        if chosen.iter().enumerate().all(|(j, &(p, _))| p == j) {
            return Ok(chosen.iter().map(|(_, b)| b.to_vec()).collect());
        }

        // One systematic erasure covered by one parity: solve directly.
        if chosen[k - 1].0 >= k && (k == 1 || chosen[k - 2].0 < k) {
            return Ok(self.solve_single(&chosen, len));
        }

        let system: Vec<Vec<Gf256>> = chosen.iter().map(|&(p, _)| self.generator_row(p)).collect();
        let inverse = invert(system)?;
        let mut out = vec![vec![0u8; len]; k];
        for (j, block) in out.iter_mut().enumerate() {
            for (s, &(_, sym)) in chosen.iter().enumerate() {
                gf::mul_acc(block, sym, inverse[j][s]);
            }
        }
        Ok(out)
    }
}

impl ParityMatrix {
    /// `chosen` is `k - 1` sorted systematic positions followed by one parity.
    /// The missing symbol is `(y - sum_{j != m} p_j a_j) / p_m`.
    fn solve_single(&self, chosen: &[(usize, &[u8])], len: usize) -> Vec<Vec<u8>> {
        let k = self.k;
        let (parity_pos, parity) = chosen[k - 1];
        let coefs = &self.rows[parity_pos - self.k];
        let missing = (0..k)
            .find(|&j| chosen.get(j).is_none_or(|&(p, _)| p != j))
            .expect("one systematic position is absent");

        let mut out: Vec<Vec<u8>> = Vec::with_capacity(k);
        let mut acc = parity.to_vec();
        for &(p, block) in &chosen[..k - 1] {
            gf::mul_acc(&mut acc, block, coefs[p]);
        }
        gf::scale(&mut acc, gf::inv(coefs[missing]).expect("Cauchy entries are nonzero"));
        for j in 0..k {
            if j == missing {
                out.push(std::mem::take(&mut acc));
            } else {
                let idx = if j < missing { j } else { j - 1 };
                out.push(chosen[idx].1.to_vec());
            }
        }
        debug_assert!(out.iter().all(|b| b.len() == len));
        out
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Gauss-Jordan inversion over GF(256). Pivots are taken from the lowest
/// eligible row index.
pub(crate) fn invert(mut m: Vec<Vec<Gf256>>) -> Result<Vec<Vec<Gf256>>> {
    let n = m.len();
    let mut inv: Vec<Vec<Gf256>> = (0..n)
        .map(|i| {
            let mut row = vec![Gf256::ZERO; n];
            row[i] = Gf256::ONE;
            row
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n)
            .find(|&row| !m[row][col].is_zero())
            .ok_or_else(|| Error::InvalidInput("singular decoding matrix".into()))?;
        m.swap(col, pivot);
        inv.swap(col, pivot);

        let scale = gf::inv(m[col][col])?;
        for v in m[col].iter_mut().chain(inv[col].iter_mut()) {
            *v *= scale;
        }

        for row in 0..n {
            if row == col || m[row][col].is_zero() {
                continue;
            }
            let factor = m[row][col];
            for c in 0..n {
                let (a, b) = (m[col][c], inv[col][c]);
                m[row][c] -= factor * a;
                inv[row][c] -= factor * b;
            }
        }
    }
    Ok(inv)
}

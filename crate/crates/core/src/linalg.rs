//! Exact integer/rational linear algebra on small stoichiometric matrices.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

type Q = Ratio<i128>;

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let n_rows = m.len();
    let n_cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev_pivot: i128 = 1;
    for col in 0..n_cols {
        let Some(p) = (rank..n_rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col];
        for r in rank + 1..n_rows {
            for c in col + 1..n_cols {
                m[r][c] = (pivot * m[r][c] - m[r][col] * m[rank][c]) / prev_pivot;
            }
            m[r][col] = 0;
        }
        prev_pivot = pivot;
        rank += 1;
        if rank == n_rows {
            break;
        }
    }
    rank
}

/// Reduced row echelon form over the rationals; returns the pivot columns.
fn rref(m: &mut [Vec<Q>]) -> Vec<usize> {
    let n_rows = m.len();
    let n_cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n_cols {
        if row == n_rows {
            break;
        }
        let Some(p) = (row..n_rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for v in m[row].iter_mut() {
            *v *= inv;
        }
        for r in 0..n_rows {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col];
                for c in 0..n_cols {
                    let delta = f * m[row][c];
                    m[r][c] -= delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Integer basis of the right null space of `a` (vectors `v` with `a v = 0`),
/// each scaled to coprime integer entries with a positive leading entry.
pub fn integer_null_space(a: &[Vec<i64>], n_cols: usize) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<Q>> = a
        .iter()
        .map(|r| r.iter().map(|&v| Q::from_integer(v as i128)).collect())
        .collect();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..n_cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); n_cols];
            v[f] = Q::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[r][f];
            }
            to_primitive_integers(&v)
        })
        .collect()
}

fn to_primitive_integers(v: &[Q]) -> Vec<i64> {
    let lcm = v.iter().fold(1i128, |acc, q| acc.lcm(q.denom()));
    let ints: Vec<i128> = v.iter().map(|q| (q * lcm).to_integer()).collect();
    let g = ints.iter().fold(0i128, |acc, x| acc.gcd(x));
    let g = if g == 0 { 1 } else { g };
    let sign = match ints.iter().find(|x| **x != 0) {
        Some(x) if x.is_negative() => -1,
        _ => 1,
    };
    ints.iter().map(|x| (sign * x / g) as i64).collect()
}

/// Indices of a maximal set of linearly independent rows, chosen greedily in order.
pub fn independent_rows(rows: &[Vec<i64>]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut current: Vec<Vec<i64>> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        current.push(r.clone());
        if integer_rank(&current) == current.len() {
            chosen.push(i);
        } else {
            current.pop();
        }
    }
    chosen
}

pub fn transpose(m: &[Vec<i64>], n_cols: usize) -> Vec<Vec<i64>> {
    (0..n_cols).map(|c| m.iter().map(|row| row[c]).collect()).collect()
}

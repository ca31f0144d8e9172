//! Dense linear algebra over a prime field `F_p`.

pub(crate) fn inv_mod(a: u32, p: u32) -> u32 {
    // Fermat; p is prime and small.
    pow_mod(a, p - 2, p)
}

fn pow_mod(b: u32, mut e: u32, p: u32) -> u32 {
    let m = p as u64;
    let (mut r, mut b) = (1u64, b as u64 % m);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r as u32
}

pub fn is_prime(p: u32) -> bool {
    p >= 2 && (2..).take_while(|d: &u32| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Row echelon form accumulated one vector at a time.
#[derive(Clone, Debug)]
pub(crate) struct Echelon {
    p: u32,
    /// `(pivot column, row)` with the pivot entry normalised to 1.
    rows: Vec<(usize, Vec<u32>)>,
}

impl Echelon {
    pub fn new(p: u32) -> Self {
        Echelon { p, rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the current rows.
    fn reduce(&self, v: &[u32]) -> Vec<u32> {
        let p = self.p as u64;
        let mut v: Vec<u32> = v.iter().map(|&x| x % self.p).collect();
        for (piv, row) in &self.rows {
            if *piv < v.len() && v[*piv] != 0 {
                let f = v[*piv] as u64;
                if row.len() > v.len() {
                    v.resize(row.len(), 0);
                }
                for (i, &r) in row.iter().enumerate() {
                    v[i] = ((v[i] as u64 + (p - f) * r as u64) % p) as u32;
                }
            }
        }
        v
    }

    /// Adds `v`; returns true if it increased the rank.
    pub fn insert(&mut self, v: &[u32]) -> bool {
        let mut r = self.reduce(v);
        let Some(piv) = r.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = inv_mod(r[piv], self.p) as u64;
        for x in r.iter_mut() {
            *x = (*x as u64 * inv % self.p as u64) as u32;
        }
        self.rows.push((piv, r));
        true
    }
}

pub(crate) fn rank_of(vectors: &[&[u32]], p: u32) -> usize {
    let mut e = Echelon::new(p);
    for v in vectors {
        e.insert(v);
    }
    e.rank()
}

/// Solves `sum c_i basis_i = v`; `basis` must be linearly independent.
pub(crate) fn coordinates(basis: &[Vec<u32>], v: &[u32], p: u32) -> Option<Vec<u32>> {
    let r = basis.len();
    let dim = basis.iter().map(|b| b.len()).chain(std::iter::once(v.len())).max().unwrap_or(0);
    let at = |b: &Vec<u32>, i: usize| b.get(i).copied().unwrap_or(0) % p;
    // Augmented dim x (r + 1) matrix.
    let mut m: Vec<Vec<u64>> = (0..dim)
        .map(|i| {
            let mut row: Vec<u64> = basis.iter().map(|b| at(b, i) as u64).collect();
            row.push(v.get(i).copied().unwrap_or(0) as u64 % p as u64);
            row
        })
        .collect();
    let pp = p as u64;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..r {
        let Some(sel) = (row..dim).find(|&i| m[i][col] != 0) else {
            continue;
        };
        m.swap(row, sel);
        let inv = inv_mod(m[row][col] as u32, p) as u64;
        for x in m[row].iter_mut() {
            *x = *x * inv % pp;
        }
        for i in 0..dim {
            if i != row && m[i][col] != 0 {
                let f = m[i][col];
                for j in 0..=r {
                    m[i][j] = (m[i][j] + (pp - f) * m[row][j]) % pp;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if (row..dim).any(|i| m[i][r] != 0) {
        return None;
    }
    let mut c = vec![0u32; r];
    for (i, &col) in pivots.iter().enumerate() {
        c[col] = m[i][r] as u32;
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_over_f2() {
        let vs: [&[u32]; 3] = [&[1, 0], &[0, 1], &[1, 1]];
        assert_eq!(rank_of(&vs, 2), 2);
        assert_eq!(rank_of(&vs, 3), 2);
        assert_eq!(rank_of(&[&[2, 4]], 2), 0);
    }

    #[test]
    fn coordinates_solve_and_detect_outside_span() {
        let basis = vec![vec![1, 0, 1], vec![0, 1, 1]];
        assert_eq!(coordinates(&basis, &[1, 1, 0], 2), Some(vec![1, 1]));
        assert_eq!(coordinates(&basis, &[0, 0, 1], 2), None);
        assert_eq!(coordinates(&basis, &[2, 1, 0], 3), Some(vec![2, 1]));
    }

    #[test]
    fn primality() {
        assert!(is_prime(2) && is_prime(3) && is_prime(101));
        assert!(!is_prime(1) && !is_prime(9));
    }
}

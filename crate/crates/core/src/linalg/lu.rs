//! Dense complex LU with partial pivoting.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Factorization `P A = L U` stored in place.
#[derive(Clone, Debug)]
pub struct ComplexLu {
    lu: DMatrix<Complex64>,
    perm: Vec<usize>,
}

/// Returned when no nonzero finite pivot exists in a column. Nearly
/// singular systems are still solved; near an exponentially sharp
/// resonance the frequency response needs exactly that.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Singular {
    pub column: usize,
}

impl ComplexLu {
    pub fn factor(mut a: DMatrix<Complex64>) -> Result<Self, Singular> {
        assert!(a.is_square());
        let n = a.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > 0.0 && pmax.is_finite()) {
                return Err(Singular { column: k });
            }
            if p != k {
                a.swap_rows(p, k);
                perm.swap(p, k);
            }
            let pivot = a[(k, k)];
            for i in (k + 1)..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor != Complex64::new(0.0, 0.0) {
                    for j in (k + 1)..n {
                        let u = a[(k, j)];
                        a[(i, j)] -= factor * u;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.nrows();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

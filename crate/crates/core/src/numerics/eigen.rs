//! Eigenvalues of real nonsymmetric matrices, used for spectral radii.
//!
//! Reservoir matrices are sparse, often extremely so (a 300-neuron reservoir
//! at 0.1% connectivity has 90 nonzeros). The matrix is first permuted into
//! block-triangular form via the strongly connected components of its
//! nonzero pattern; eigenvalues of the whole matrix are the union of those of
//! the diagonal blocks. Nodes on no cycle contribute their diagonal entry
//! exactly, and only the (usually small) cyclic blocks go through dense
//! balancing, Hessenberg reduction and the shifted QR iteration.

use nalgebra::Complex;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::Matrix;
use crate::{Error, Result};

// Per-eigenvalue iteration budget; exceptional shifts every 10 iterations.
const MAX_QR_ITERATIONS: usize = 60;

/// All eigenvalues of a square matrix (order unspecified).
pub fn eigenvalues(w: &Matrix) -> Result<Vec<Complex<f64>>> {
    if !w.is_square() {
        return Err(Error::shape("eigenvalues", "square matrix", format!("{}x{}", w.nrows(), w.ncols())));
    }
    let n = w.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && w[(i, j)] != 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }

    let mut out = Vec::with_capacity(n);
    for component in tarjan_scc(&graph) {
        if component.len() == 1 {
            let i = component[0].index();
            out.push(Complex::new(w[(i, i)], 0.0));
            continue;
        }
        let mut idx: Vec<usize> = component.iter().map(|v| v.index()).collect();
        idx.sort_unstable();
        out.extend(dense_eigenvalues(&w.select_rows(&idx).select_columns(&idx))?);
    }
    Ok(out)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(w: &Matrix) -> Result<f64> {
    Ok(eigenvalues(w)?.into_iter().map(|l| l.re.hypot(l.im)).fold(0.0, f64::max))
}

/// Eigenvalues of a dense block: balance, reduce to upper Hessenberg form by
/// stabilised elimination, then run the Francis double-shift QR iteration.
fn dense_eigenvalues(block: &Matrix) -> Result<Vec<Complex<f64>>> {
    let n = block.nrows();
    // 1-based storage keeps the index arithmetic of the classical algorithm.
    let mut a = Dense1::zeros(n);
    for i in 0..n {
        for j in 0..n {
            *a.at(i + 1, j + 1) = block[(i, j)];
        }
    }
    balance(&mut a);
    reduce_to_hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

struct Dense1 {
    n: usize,
    data: Vec<f64>,
}

impl Dense1 {
    fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; (n + 1) * (n + 1)] }
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * (self.n + 1) + j]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.n + 1) + j]
    }
}

fn balance(a: &mut Dense1) {
    const RADIX: f64 = 2.0;
    let n = a.n;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in 1..=n {
                if j != i {
                    c += a.get(j, i).abs();
                    r += a.get(i, j).abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 1..=n {
                    *a.at(i, j) *= g;
                }
                for j in 1..=n {
                    *a.at(j, i) *= f;
                }
            }
        }
    }
}

fn reduce_to_hessenberg(a: &mut Dense1) {
    let n = a.n;
    for m in 2..n {
        let mut x = 0.0_f64;
        let mut pivot = m;
        for j in m..=n {
            if a.get(j, m - 1).abs() > x.abs() {
                x = a.get(j, m - 1);
                pivot = j;
            }
        }
        if pivot != m {
            for j in (m - 1)..=n {
                let (p, q) = (a.get(pivot, j), a.get(m, j));
                *a.at(pivot, j) = q;
                *a.at(m, j) = p;
            }
            for j in 1..=n {
                let (p, q) = (a.get(j, pivot), a.get(j, m));
                *a.at(j, pivot) = q;
                *a.at(j, m) = p;
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a.get(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    *a.at(i, m - 1) = y;
                    for j in m..=n {
                        let v = a.get(m, j);
                        *a.at(i, j) -= y * v;
                    }
                    for j in 1..=n {
                        let v = a.get(j, i);
                        *a.at(j, m) += y * v;
                    }
                }
            }
        }
    }
    // Drop the elimination multipliers stored below the subdiagonal.
    for i in 3..=n {
        for j in 1..(i - 1) {
            *a.at(i, j) = 0.0;
        }
    }
}

#[inline]
fn sign(magnitude: f64, of: f64) -> f64 {
    if of >= 0.0 {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

fn hessenberg_qr(a: &mut Dense1) -> Result<Vec<Complex<f64>>> {
    let size = a.n;
    let n = size as isize;
    let ix = |i: isize, j: isize| (i as usize) * (size + 1) + j as usize;
    let d = &mut a.data;

    let mut wr = vec![0.0; size + 1];
    let mut wi = vec![0.0; size + 1];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += d[ix(i, j)].abs();
        }
    }

    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    let (mut x, mut y, mut z, mut w);
    let mut s;
    while nn >= 1 {
        let mut its = 0;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l >= 2 {
                s = d[ix(l - 1, l - 1)].abs() + d[ix(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if d[ix(l, l - 1)].abs() + s == s {
                    d[ix(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = d[ix(nn, nn)];
            if l == nn {
                // One root found.
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
            } else {
                y = d[ix(nn - 1, nn - 1)];
                w = d[ix(nn, nn - 1)] * d[ix(nn - 1, nn)];
                if l == nn - 1 {
                    // Two roots found.
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    let (hi, lo) = ((nn - 1) as usize, nn as usize);
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[hi] = x + z;
                        wr[lo] = x + z;
                        if z != 0.0 {
                            wr[lo] = x - w / z;
                        }
                        wi[hi] = 0.0;
                        wi[lo] = 0.0;
                    } else {
                        wr[hi] = x + p;
                        wr[lo] = x + p;
                        wi[hi] = -z;
                        wi[lo] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_QR_ITERATIONS {
                        return Err(Error::Numerical(format!(
                            "Hessenberg QR did not converge: {its} iterations on eigenvalue {nn} of {size}"
                        )));
                    }
                    if its > 0 && its % 10 == 0 {
                        // Exceptional shift.
                        t += x;
                        for i in 1..=nn {
                            d[ix(i, i)] -= x;
                        }
                        s = d[ix(nn, nn - 1)].abs() + d[ix(nn - 1, nn - 2)].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;

                    // Look for two consecutive small subdiagonal elements.
                    let mut m = nn - 2;
                    while m >= l {
                        z = d[ix(m, m)];
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / d[ix(m + 1, m)] + d[ix(m, m + 1)];
                        q = d[ix(m + 1, m + 1)] - z - r - s;
                        r = d[ix(m + 2, m + 1)];
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = d[ix(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (d[ix(m - 1, m - 1)].abs() + z.abs() + d[ix(m + 1, m + 1)].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        d[ix(i, i - 2)] = 0.0;
                        if i != m + 2 {
                            d[ix(i, i - 3)] = 0.0;
                        }
                    }

                    // Double QR step on rows l..nn, columns m..nn.
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = d[ix(k, k - 1)];
                            q = d[ix(k + 1, k - 1)];
                            r = 0.0;
                            if k != nn - 1 {
                                r = d[ix(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    d[ix(k, k - 1)] = -d[ix(k, k - 1)];
                                }
                            } else {
                                d[ix(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = d[ix(k, j)] + q * d[ix(k + 1, j)];
                                if k != nn - 1 {
                                    p += r * d[ix(k + 2, j)];
                                    d[ix(k + 2, j)] -= p * z;
                                }
                                d[ix(k + 1, j)] -= p * y;
                                d[ix(k, j)] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * d[ix(i, k)] + y * d[ix(i, k + 1)];
                                if k != nn - 1 {
                                    p += z * d[ix(i, k + 2)];
                                    d[ix(i, k + 2)] -= p * r;
                                }
                                d[ix(i, k + 1)] -= p * q;
                                d[ix(i, k)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }

    Ok((1..=size).map(|i| Complex::new(wr[i], wi[i])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_moduli(mut v: Vec<Complex<f64>>) -> Vec<f64> {
        let mut m: Vec<f64> = v.drain(..).map(|c| c.norm()).collect();
        m.sort_by(|a, b| a.partial_cmp(b).unwrap());
        m
    }

    #[test]
    fn rotation_block_has_complex_pair() {
        // [[0, -2], [2, 0]] has eigenvalues ±2i.
        let w = Matrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let eig = eigenvalues(&w).unwrap();
        assert_eq!(eig.len(), 2);
        for l in eig {
            assert!(l.re.abs() < 1e-14);
            assert!((l.im.abs() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn triangular_matrix_uses_diagonal() {
        let w = Matrix::from_row_slice(3, 3, &[0.5, 3.0, -1.0, 0.0, -0.7, 4.0, 0.0, 0.0, 0.2]);
        let m = sorted_moduli(eigenvalues(&w).unwrap());
        assert_eq!(m, vec![0.2, 0.5, 0.7]);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let w = Matrix::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let m = sorted_moduli(eigenvalues(&w).unwrap());
        for (got, want) in m.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn directed_cycle_plus_tail() {
        // 3-cycle with weights 2, 0.5, 1 (product 1) feeding an acyclic tail:
        // eigenvalues are the cube roots of unity and zeros.
        let mut w = Matrix::zeros(5, 5);
        w[(0, 1)] = 2.0;
        w[(1, 2)] = 0.5;
        w[(2, 0)] = 1.0;
        w[(2, 3)] = 7.0;
        w[(3, 4)] = -3.0;
        let rho = spectral_radius(&w).unwrap();
        assert!((rho - 1.0).abs() < 1e-12, "{rho}");
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(spectral_radius(&Matrix::zeros(2, 3)), Err(Error::Shape { .. })));
    }
}

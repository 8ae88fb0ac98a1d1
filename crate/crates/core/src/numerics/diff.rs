use alloc::vec;
use alloc::vec::Vec;

use super::{Dual2, Matrix, MAX_DIRECTIONS};
use crate::{Error, Result};

/// Default step for central finite-difference cross-checks.
pub const FD_STEP: f64 = 1e-5;

/// Value, gradient and Hessian of a scalar function along a set of directions.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Matrix,
}

pub fn unit_vector(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

pub fn ensure_finite(x: f64, context: &'static str, coords: &[f64]) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NumericalFailure {
            context,
            coords: coords.to_vec(),
        })
    }
}

fn seed(x: &[f64], dirs: &[&[f64]]) -> Vec<Dual2> {
    let mut s = vec![0.0; dirs.len()];
    (0..x.len())
        .map(|c| {
            for (d, dir) in dirs.iter().enumerate() {
                s[d] = dir[c];
            }
            Dual2::seeded(x[c], &s)
        })
        .collect()
}

/// Exact first and second derivatives of `f` at `x` along `dirs`.
///
/// More than [`MAX_DIRECTIONS`] directions are handled blockwise: the directions
/// are split into chunks of half the capacity and `f` is re-evaluated for every
/// pair of chunks.
pub fn directional_derivs<F>(f: F, x: &[f64], dirs: &[Vec<f64>]) -> Result<Derivatives>
where
    F: Fn(&[Dual2]) -> Dual2,
{
    for d in dirs {
        if d.len() != x.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "direction of length {} at a point of dimension {}",
                d.len(),
                x.len()
            )));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "direction",
                coords: x.to_vec(),
            });
        }
    }
    let nd = dirs.len();
    let mut gradient = vec![0.0; nd];
    let mut hessian = Matrix::zeros(nd, nd);
    let value;
    if nd <= MAX_DIRECTIONS {
        let refs: Vec<&[f64]> = dirs.iter().map(Vec::as_slice).collect();
        let out = f(&seed(x, &refs));
        value = out.value();
        for i in 0..nd {
            gradient[i] = out.first(i);
            for j in 0..nd {
                hessian[(i, j)] = out.second(i, j);
            }
        }
        if !out.is_finite() {
            return Err(Error::NumericalFailure {
                context: "directional derivative",
                coords: x.to_vec(),
            });
        }
    } else {
        let chunk = MAX_DIRECTIONS / 2;
        let blocks: Vec<(usize, usize)> = (0..nd)
            .step_by(chunk)
            .map(|s| (s, (s + chunk).min(nd)))
            .collect();
        let mut val = f64::NAN;
        for (bi, &(s0, e0)) in blocks.iter().enumerate() {
            for &(s1, e1) in &blocks[bi..] {
                let mut idx: Vec<usize> = (s0..e0).collect();
                if s1 != s0 {
                    idx.extend(s1..e1);
                }
                let refs: Vec<&[f64]> = idx.iter().map(|&i| dirs[i].as_slice()).collect();
                let out = f(&seed(x, &refs));
                if !out.is_finite() {
                    return Err(Error::NumericalFailure {
                        context: "directional derivative",
                        coords: x.to_vec(),
                    });
                }
                val = out.value();
                for (a, &ia) in idx.iter().enumerate() {
                    gradient[ia] = out.first(a);
                    for (b, &ib) in idx.iter().enumerate() {
                        hessian[(ia, ib)] = out.second(a, b);
                    }
                }
            }
        }
        value = val;
    }
    Ok(Derivatives {
        value,
        gradient,
        hessian,
    })
}

/// [`directional_derivs`] along the coordinate axes listed in `active`.
pub fn coordinate_derivs<F>(f: F, x: &[f64], active: &[usize]) -> Result<Derivatives>
where
    F: Fn(&[Dual2]) -> Dual2,
{
    let dirs: Vec<Vec<f64>> = active.iter().map(|&i| unit_vector(x.len(), i)).collect();
    directional_derivs(f, x, &dirs)
}

/// Values and Jacobian (`out × n`) of a vector function of a point, exact.
pub fn point_jacobian<F>(f: F, x: &[f64]) -> Result<(Vec<f64>, Matrix)>
where
    F: Fn(&[Dual2]) -> Vec<Dual2>,
{
    let n = x.len();
    let mut values = Vec::new();
    let mut jac = Matrix::zeros(0, 0);
    let mut start = 0;
    loop {
        let end = (start + MAX_DIRECTIONS).min(n);
        let len = end - start;
        let xd: Vec<Dual2> = x
            .iter()
            .enumerate()
            .map(|(c, &xc)| {
                if (start..end).contains(&c) {
                    Dual2::variable(xc, c - start, len)
                } else {
                    Dual2::constant(xc)
                }
            })
            .collect();
        let out = f(&xd);
        if start == 0 {
            values = out.iter().map(Dual2::value).collect();
            jac = Matrix::zeros(out.len(), n);
        }
        for (r, o) in out.iter().enumerate() {
            if !o.is_finite() {
                return Err(Error::NumericalFailure {
                    context: "point function",
                    coords: x.to_vec(),
                });
            }
            for c in start..end {
                jac[(r, c)] = o.first(c - start);
            }
        }
        start = end;
        if start >= n {
            break;
        }
    }
    Ok((values, jac))
}

/// Central difference `(f(x+h·d) − f(x−h·d)) / 2h`.
pub fn central_difference<F>(f: F, x: &[f64], dir: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let plus: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
    let minus: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
    (f(&plus) - f(&minus)) / (2.0 * h)
}

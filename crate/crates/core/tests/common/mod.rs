//! Test-side fixtures and brute-force oracles. Nothing here calls the
//! library's optimizers, so agreement with them is evidence, not tautology.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use soboot::derivative::DirectionFn;
use soboot::moments::{QuadMomentModel, SphereVec, Weight};
use soboot::rng::stream_rng;
use soboot::simulate::PanelData;

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 99);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_panel(t: usize, m: usize, k: usize, seed: u64) -> PanelData {
    PanelData::new(normals(t * m, seed), m, normals(t * k, seed ^ 0x5555), k).unwrap()
}

/// Symmetric `Δ_j` with standard normal upper triangles.
pub fn random_model(k: usize, m: usize, seed: u64) -> QuadMomentModel {
    let raw = normals(m * k * k, seed);
    let mut d = vec![0.0; m * k * k];
    for j in 0..m {
        for a in 0..k {
            for b in a..k {
                d[j * k * k + a * k + b] = raw[j * k * k + a * k + b];
                d[j * k * k + b * k + a] = raw[j * k * k + a * k + b];
            }
        }
    }
    QuadMomentModel::from_deltas(k, m, d, 100, Weight::Identity).unwrap()
}

pub fn unit(k: usize, seed: u64) -> SphereVec {
    SphereVec::normalize(normals(k, seed)).unwrap()
}

/// `θ̂_T(γ)` from its definition as the sample covariance of `Z_j` and
/// `(γᵀY)²`.
pub fn theta_by_summation(panel: &PanelData, gamma: &[f64]) -> Vec<f64> {
    let t = panel.rows() as f64;
    let proj: Vec<f64> = (0..panel.rows())
        .map(|r| {
            let s: f64 = panel.y_row(r).iter().zip(gamma).map(|(y, g)| y * g).sum();
            s * s
        })
        .collect();
    let pbar = proj.iter().sum::<f64>() / t;
    (0..panel.m())
        .map(|j| {
            let zbar = (0..panel.rows()).map(|r| panel.z_row(r)[j]).sum::<f64>() / t;
            (0..panel.rows()).map(|r| panel.z_row(r)[j] * proj[r]).sum::<f64>() / t - zbar * pbar
        })
        .collect()
}

/// `Σ_j (γᵀΔ_jγ)²` computed entry by entry.
pub fn criterion(model: &QuadMomentModel, x: &[f64]) -> f64 {
    let k = model.k();
    (0..model.m())
        .map(|j| {
            let d = model.delta(j);
            let mut q = 0.0;
            for a in 0..k {
                for b in 0..k {
                    q += x[a] * d[a * k + b] * x[b];
                }
            }
            q * q
        })
        .sum()
}

fn point(k: usize, angles: &[f64]) -> Vec<f64> {
    if k == 2 {
        vec![angles[0].cos(), angles[0].sin()]
    } else {
        let (st, ct) = angles[0].sin_cos();
        let (sp, cp) = angles[1].sin_cos();
        vec![st * cp, st * sp, ct]
    }
}

/// Compass search over angles from `start`; the step shrinks only when no
/// neighbour improves.
fn compass<F: Fn(&[f64]) -> f64>(f: &F, start: Vec<f64>, step: f64) -> f64 {
    let mut x = start;
    let mut fx = f(&x);
    let mut h = step;
    let mut guard = 0;
    while h > 1e-13 && guard < 200_000 {
        guard += 1;
        let mut moved = false;
        for i in 0..x.len() {
            for sgn in [-1.0, 1.0] {
                let mut y = x.clone();
                y[i] += sgn * h;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    fx
}

/// Minimum of the criterion over the sphere (`k ∈ {2, 3}`): an angular grid
/// with `n` cells per axis, then compass search from the best `starts` grid
/// local minima.
pub fn sphere_oracle(model: &QuadMomentModel, n: usize, starts: usize) -> f64 {
    let k = model.k();
    let f = |a: &[f64]| criterion(model, &point(k, a));
    let pi = std::f64::consts::PI;
    let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
    if k == 2 {
        let vals: Vec<f64> = (0..n).map(|i| f(&[pi * i as f64 / n as f64])).collect();
        for i in 0..n {
            if vals[i] <= vals[(i + n - 1) % n] && vals[i] <= vals[(i + 1) % n] {
                cells.push((vals[i], vec![pi * i as f64 / n as f64]));
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        cells.truncate(starts);
        return cells.into_iter().map(|(_, a)| compass(&f, a, pi / n as f64)).fold(f64::INFINITY, f64::min);
    }
    let (nt, np) = (n / 2, n);
    let grid = |i: usize, j: usize| vec![pi * (i as f64 + 0.5) / nt as f64, 2.0 * pi * j as f64 / np as f64];
    let vals: Vec<Vec<f64>> = (0..nt).map(|i| (0..np).map(|j| f(&grid(i, j))).collect()).collect();
    for i in 0..nt {
        for j in 0..np {
            let v = vals[i][j];
            let mut local = true;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let ii = i as i64 + di;
                if ii < 0 || ii >= nt as i64 {
                    continue;
                }
                let jj = (j as i64 + dj).rem_euclid(np as i64) as usize;
                if vals[ii as usize][jj] < v {
                    local = false;
                }
            }
            if local {
                cells.push((v, grid(i, j)));
            }
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells.truncate(starts);
    cells.into_iter().map(|(_, a)| compass(&f, a, pi / nt as f64)).fold(f64::INFINITY, f64::min)
}

/// `min_{γ ∈ gammas} min_{‖v‖ ≤ radius} ‖h(γ) + Ĝ vec(vvᵀ)‖²` for `k = 2`
/// with `v = √s (cos a, sin a)`: a coarse `(a, s)` grid, then compass
/// search from the best `starts` angular local minima of each `γ`.
pub fn structural_oracle<D: DirectionFn>(
    model: &QuadMomentModel,
    gammas: &[SphereVec],
    radius: f64,
    h: &D,
    n_ang: usize,
    n_rad: usize,
    starts: usize,
) -> f64 {
    assert_eq!(model.k(), 2);
    let m = model.m();
    let s_max = radius * radius;
    let pi = std::f64::consts::PI;
    let mut best = f64::INFINITY;
    for g in gammas {
        let hg = h.eval(g);
        let f = |p: &[f64]| {
            let s = p[1].clamp(0.0, s_max);
            let u = [p[0].cos(), p[0].sin()];
            (0..m)
                .map(|j| {
                    let d = model.delta(j);
                    let q = u[0] * u[0] * d[0] + 2.0 * u[0] * u[1] * d[1] + u[1] * u[1] * d[3];
                    let r = hg[j] + s * q;
                    r * r
                })
                .sum::<f64>()
        };
        let profile: Vec<(f64, f64)> = (0..n_ang)
            .map(|i| {
                let a = pi * i as f64 / n_ang as f64;
                (0..=n_rad)
                    .map(|r| {
                        let s = s_max * r as f64 / n_rad as f64;
                        (f(&[a, s]), s)
                    })
                    .fold((f64::INFINITY, 0.0), |b, c| if c.0 < b.0 { c } else { b })
            })
            .collect();
        let mut local: Vec<(f64, f64, f64)> = (0..n_ang)
            .filter(|&i| profile[i].0 <= profile[(i + n_ang - 1) % n_ang].0 && profile[i].0 <= profile[(i + 1) % n_ang].0)
            .map(|i| (profile[i].0, pi * i as f64 / n_ang as f64, profile[i].1))
            .collect();
        local.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, a, s) in local.into_iter().take(starts) {
            let step = (pi / n_ang as f64).max(s_max / n_rad as f64);
            best = best.min(compass(&f, vec![a, s], step));
        }
    }
    best
}

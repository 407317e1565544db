//! Solver-independent reference answers: vertex enumeration for small LPs and
//! exhaustive enumeration over binary assignments for small MILPs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use railyard_core::solver::{ConstraintSense, Integrality, LinearModel, ObjectiveSense, VarId};

/// A small dense problem `max/min c·x` s.t. rows, `0 ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub maximize: bool,
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<f64>, ConstraintSense, f64)>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
}

impl DenseProblem {
    pub fn to_model(&self) -> (LinearModel, Vec<VarId>) {
        let mut m = LinearModel::new();
        let vars: Vec<VarId> = (0..self.cost.len())
            .map(|j| {
                let kind = if self.binary[j] {
                    Integrality::Binary
                } else {
                    Integrality::Continuous
                };
                m.add_variable(format!("x{j}"), 0.0, self.upper[j], kind).unwrap()
            })
            .collect();
        for (a, sense, b) in &self.rows {
            m.add_constraint(vars.iter().copied().zip(a.iter().copied()), *sense, *b)
                .unwrap();
        }
        let sense = if self.maximize {
            ObjectiveSense::Maximize
        } else {
            ObjectiveSense::Minimize
        };
        m.set_objective(sense, vars.iter().copied().zip(self.cost.iter().copied()))
            .unwrap();
        (m, vars)
    }
}

/// Constraints over the free variables as `a·x ≤ b` (equalities as a
/// pair), bounds included; fixed variables are substituted into the rhs.
fn halfspaces(p: &DenseProblem, fixed: &[Option<f64>], free: &[usize]) -> Vec<(Vec<f64>, f64)> {
    let mut hs = Vec::new();
    for (a, sense, b) in &p.rows {
        let shift: f64 = fixed.iter().zip(a).filter_map(|(f, c)| f.map(|v| v * c)).sum();
        let a: Vec<f64> = free.iter().map(|&j| a[j]).collect();
        let b = b - shift;
        match sense {
            ConstraintSense::Le => hs.push((a, b)),
            ConstraintSense::Ge => hs.push((a.iter().map(|v| -v).collect(), -b)),
            ConstraintSense::Eq => {
                hs.push((a.iter().map(|v| -v).collect(), -b));
                hs.push((a, b));
            }
        }
    }
    for (k, &j) in free.iter().enumerate() {
        let mut e = vec![0.0; free.len()];
        e[k] = 1.0;
        hs.push((e.clone(), p.upper[j]));
        e[k] = -1.0;
        hs.push((e, 0.0));
    }
    hs
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[i][k] -= f * a[col][k];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, start: usize) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        combinations(n, k, out, cur, i + 1);
        cur.pop();
    }
}

/// Optimum over the bounded polytope by enumerating every basic solution.
/// Returns None when the polytope is empty.
pub fn vertex_optimum(p: &DenseProblem, fixed: &[Option<f64>]) -> Option<f64> {
    let free: Vec<usize> = (0..p.cost.len()).filter(|&j| fixed[j].is_none()).collect();
    let n = free.len();
    let constant: f64 = fixed.iter().zip(&p.cost).filter_map(|(f, c)| f.map(|v| v * c)).sum();
    let cost: Vec<f64> = free.iter().map(|&j| p.cost[j]).collect();
    let hs = halfspaces(p, fixed, &free);
    let mut subsets = Vec::new();
    combinations(hs.len(), n, &mut subsets, &mut Vec::new(), 0);
    let mut best: Option<f64> = None;
    for s in subsets {
        let a: Vec<Vec<f64>> = s.iter().map(|&i| hs[i].0.clone()).collect();
        let b: Vec<f64> = s.iter().map(|&i| hs[i].1).collect();
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        let feasible = hs.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(&x).map(|(u, v)| u * v).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        });
        if !feasible {
            continue;
        }
        let val: f64 = constant + cost.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
        best = Some(match best {
            None => val,
            Some(b) if p.maximize => b.max(val),
            Some(b) => b.min(val),
        });
    }
    best
}

/// Exhaustive optimum over binary assignments; continuous variables are
/// optimized per assignment by vertex enumeration.
pub fn brute_force_optimum(p: &DenseProblem) -> Option<f64> {
    let bins: Vec<usize> = (0..p.cost.len()).filter(|&j| p.binary[j]).collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = vec![None; p.cost.len()];
        for (k, &j) in bins.iter().enumerate() {
            fixed[j] = Some(f64::from((mask >> k) & 1));
        }
        if let Some(v) = vertex_optimum(p, &fixed) {
            best = Some(match best {
                None => v,
                Some(b) if p.maximize => b.max(v),
                Some(b) => b.min(v),
            });
        }
    }
    best
}

pub fn random_lp(rng: &mut ChaCha8Rng) -> DenseProblem {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=6);
    let rows = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-5..=5))).collect();
            let sense = match rng.random_range(0..6) {
                0 => ConstraintSense::Ge,
                1 => ConstraintSense::Eq,
                _ => ConstraintSense::Le,
            };
            let b = f64::from(rng.random_range(-4..=20));
            (a, sense, b)
        })
        .collect();
    DenseProblem {
        maximize: rng.random_bool(0.5),
        cost: (0..n).map(|_| f64::from(rng.random_range(-6..=6))).collect(),
        rows,
        upper: (0..n).map(|_| f64::from(rng.random_range(1..=10))).collect(),
        binary: vec![false; n],
    }
}

/// Mixed problems with up to `max_binaries` binaries and up to two bounded
/// continuous variables coupled to them.
pub fn random_milp(rng: &mut ChaCha8Rng, max_binaries: usize) -> DenseProblem {
    let nb = rng.random_range(1..=max_binaries);
    let nc = rng.random_range(0..=2);
    let n = nb + nc;
    let m = rng.random_range(1..=4);
    let mut rows: Vec<(Vec<f64>, ConstraintSense, f64)> = (0..m)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-3..=9))).collect();
            let sense = if rng.random_bool(0.8) {
                ConstraintSense::Le
            } else {
                ConstraintSense::Ge
            };
            let b = f64::from(rng.random_range(0..=(4 * n as i32)));
            (a, sense, b)
        })
        .collect();
    // big-M style links x_c <= M u_b, as in switching constraints
    for c in 0..nc {
        let b = rng.random_range(0..nb);
        let mut a = vec![0.0; n];
        a[nb + c] = 1.0;
        a[b] = -10.0;
        rows.push((a, ConstraintSense::Le, 0.0));
    }
    let mut binary = vec![true; nb];
    binary.extend(std::iter::repeat_n(false, nc));
    DenseProblem {
        maximize: rng.random_bool(0.5),
        cost: (0..n).map(|_| f64::from(rng.random_range(-8..=8))).collect(),
        rows,
        upper: (0..n).map(|j| if j < nb { 1.0 } else { 10.0 }).collect(),
        binary,
    }
}

pub fn random_knapsack(rng: &mut ChaCha8Rng, items: usize) -> DenseProblem {
    let weights: Vec<f64> = (0..items).map(|_| f64::from(rng.random_range(1..=20))).collect();
    let cap = weights.iter().sum::<f64>() * 0.45;
    DenseProblem {
        maximize: true,
        cost: (0..items).map(|_| f64::from(rng.random_range(1..=30))).collect(),
        rows: vec![(weights, ConstraintSense::Le, cap.floor())],
        upper: vec![1.0; items],
        binary: vec![true; items],
    }
}

//! Finitely supported signed measures on an interval with unit mass and
//! uniformly small positive moments.
//!
//! The weights solve the discrete minimax problem
//! `min max_{1<=k<=K} |sum_j c_j s_j^k|` subject to `sum_j c_j = 1` by a
//! Remez exchange carried out in double-double arithmetic. The exponentials
//! `k -> s_j^k` form a Chebyshev system, so the optimum equioscillates.

use crate::error::{Error, Result};
use twofloat::TwoFloat;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

type Dd = TwoFloat;

fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    interval: (f64, f64),
    k_max: usize,
}

impl AtomicMeasure {
    /// Checks positions against the open interval and the unit-mass constraint.
    pub fn new(atoms: Vec<(f64, f64)>, interval: (f64, f64), k_max: usize) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|a| !(a.0 > interval.0 && a.0 < interval.1)) {
            return Err(Error::AtomOutOfRange(a.0));
        }
        let m = Self { atoms, interval, k_max };
        let err = m.mass_error();
        if err.abs() > 1e-10 {
            return Err(Error::Invalid(format!("total mass differs from 1 by {err:e}")));
        }
        Ok(m)
    }

    pub fn dirac(s: f64, interval: (f64, f64)) -> Result<Self> {
        Self::new(vec![(s, 1.0)], interval, 1)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn total_variation(&self) -> f64 {
        f64::from(self.atoms.iter().fold(dd(0.0), |acc, a| acc + a.1.abs()))
    }

    /// `sum_j c_j - 1`, evaluated in double-double.
    pub fn mass_error(&self) -> f64 {
        f64::from(self.atoms.iter().fold(dd(-1.0), |acc, a| acc + a.1))
    }

    /// `sum_j c_j s_j^k` in double-double.
    pub fn moment_dd(&self, k: usize) -> Dd {
        self.atoms.iter().fold(dd(0.0), |acc, &(s, c)| acc + dd(s).powi(k as i32) * c)
    }

    pub fn moment(&self, k: usize) -> f64 {
        f64::from(self.moment_dd(k))
    }

    /// `TV * (sup I)^{K_max + 1}`; bounds every moment beyond `K_max`.
    pub fn tail_bound(&self) -> f64 {
        self.total_variation() * self.interval.1.powi(self.k_max as i32 + 1)
    }

    pub fn max_moment(&self) -> f64 {
        (1..=self.k_max).map(|k| self.moment(k).abs()).fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).fold(f64::INFINITY, f64::min)
    }

    /// Lines `s_j c_j` with 15 significant digits.
    pub fn to_dump(&self) -> String {
        self.atoms.iter().map(|(s, c)| format!("{s:.14e} {c:.14e}\n")).collect()
    }
}

/// Chebyshev nodes of `(a, b)`, ascending.
pub fn chebyshev_nodes(interval: (f64, f64), n: usize) -> Vec<f64> {
    let (a, b) = interval;
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut v: Vec<f64> = (1..=n)
        .map(|j| mid + half * ((2 * j - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Gaussian elimination with partial pivoting.
fn solve_dd(mut a: Vec<Vec<Dd>>, mut b: Vec<Dd>) -> Option<Vec<Dd>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| f64::from(a[i][col].abs()).total_cmp(&f64::from(a[j][col].abs())))?;
        if f64::from(a[piv][col]) == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f64::from(f) == 0.0 {
                continue;
            }
            for k in col..n {
                let t = a[col][k] * f;
                a[row][k] -= t;
            }
            let t = b[col] * f;
            b[row] -= t;
        }
    }
    let mut x = vec![dd(0.0); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

struct Minimax {
    weights: Vec<Dd>,
    level: f64,
}

/// Discrete Remez exchange over `k = 1..=kmax`.
fn remez(nodes: &[f64], kmax: usize) -> Result<Minimax> {
    let n = nodes.len();
    if kmax < n {
        return Err(Error::Invalid(format!("K_max = {kmax} must be at least n_atoms = {n}")));
    }
    // powers[k][j] = s_j^k
    let powers: Vec<Vec<Dd>> = {
        let mut p = vec![vec![dd(1.0); n]];
        for k in 1..=kmax {
            let prev = &p[k - 1];
            p.push((0..n).map(|j| prev[j] * nodes[j]).collect());
        }
        p
    };
    let err_at = |w: &[Dd], k: usize| -> Dd { (0..n).fold(dd(0.0), |acc, j| acc + powers[k][j] * w[j]) };
    let mut reference: Vec<usize> = (1..=n).collect();
    let mut best: Option<Minimax> = None;
    for _ in 0..2000 {
        let mut a = Vec::with_capacity(n + 1);
        let mut b = Vec::with_capacity(n + 1);
        let mut row0 = vec![dd(1.0); n];
        row0.push(dd(0.0));
        a.push(row0);
        b.push(dd(1.0));
        for (i, &k) in reference.iter().enumerate() {
            let mut row = powers[k].clone();
            row.push(dd(if i % 2 == 0 { -1.0 } else { 1.0 }));
            a.push(row);
            b.push(dd(0.0));
        }
        let sol = solve_dd(a, b).ok_or_else(|| Error::Invalid("singular Remez system".into()))?;
        let w = sol[..n].to_vec();
        let h = f64::from(sol[n]).abs();
        let errs: Vec<f64> = (1..=kmax).map(|k| f64::from(err_at(&w, k))).collect();
        let (kstar, emax) = errs
            .iter()
            .enumerate()
            .map(|(i, e)| (i + 1, e.abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if best.as_ref().map_or(true, |b| emax < b.level) {
            best = Some(Minimax { weights: w.clone(), level: emax });
        }
        if emax <= h * (1.0 + 1e-9) + 1e-300 || reference.contains(&kstar) {
            break;
        }
        let sign = |k: usize| errs[k - 1] >= 0.0;
        let sk = sign(kstar);
        let pos = reference.partition_point(|&r| r < kstar);
        if pos == 0 {
            if sign(reference[0]) == sk {
                reference[0] = kstar;
            } else {
                reference.insert(0, kstar);
                reference.pop();
            }
        } else if pos == n {
            if sign(reference[n - 1]) == sk {
                reference[n - 1] = kstar;
            } else {
                reference.push(kstar);
                reference.remove(0);
            }
        } else if sign(reference[pos - 1]) == sk {
            reference[pos - 1] = kstar;
        } else {
            reference[pos] = kstar;
        }
    }
    best.ok_or_else(|| Error::Invalid("Remez exchange produced no iterate".into()))
}

fn smallest_tail_k(tv: f64, sup: f64, target: f64) -> usize {
    // smallest K with tv * sup^{K+1} < target
    let k = ((target / tv).ln() / sup.ln()).floor() as i64;
    let mut k = k.max(1) as usize;
    while tv * sup.powi(k as i32 + 1) >= target {
        k += 1;
    }
    while k > 1 && tv * sup.powi(k as i32) < target {
        k -= 1;
    }
    k
}

/// Signed measure on Chebyshev nodes of `interval` with `|moment_k| < delta`
/// for `1 <= k <= K_max` and `TV * (sup I)^{K_max+1} < delta`. When
/// `k_max` is `None` it is chosen from the realized total variation so the
/// tail bound falls below `delta / 2`.
pub fn build_moment_killer(
    interval: (f64, f64),
    delta: f64,
    n_atoms: usize,
    k_max: Option<usize>,
) -> Result<AtomicMeasure> {
    let (lo, hi) = interval;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::Invalid(format!("interval ({lo}, {hi}) must lie inside (0, 1)")));
    }
    if !(delta > 0.0) || n_atoms == 0 || k_max == Some(0) {
        return Err(Error::Invalid("need delta > 0, n_atoms >= 1, K_max >= 1".into()));
    }
    let nodes = chebyshev_nodes(interval, n_atoms);
    let mut kmax = k_max.unwrap_or(n_atoms.max(32));
    let mut sol = remez(&nodes, kmax)?;
    if k_max.is_none() {
        for _ in 0..20 {
            if sol.level >= delta {
                break;
            }
            let tv: f64 = sol.weights.iter().map(|w| f64::from(w.abs())).sum();
            let need = smallest_tail_k(tv, hi, delta / 2.0).max(n_atoms);
            if need <= kmax {
                break;
            }
            kmax = need;
            sol = remez(&nodes, kmax)?;
        }
    }
    if sol.level >= delta {
        return Err(Error::Infeasible { best: sol.level, target: delta });
    }
    let mut atoms: Vec<(f64, f64)> = nodes.iter().zip(&sol.weights).map(|(&s, &w)| (s, f64::from(w))).collect();
    // Rounding the weights to f64 leaves a mass defect of order ulp(max|c|);
    // park it on one extra atom whose moments are then negligible.
    let defect = -f64::from(atoms.iter().fold(dd(-1.0), |acc, a| acc + a.1));
    if defect.abs() > 1e-13 {
        let pos = lo + (hi - lo) * (std::f64::consts::SQRT_2 - 1.0);
        atoms.push((pos, defect));
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let m = AtomicMeasure::new(atoms, interval, kmax)?;
    let realized = m.max_moment();
    if realized >= delta || m.tail_bound() >= delta {
        return Err(Error::Infeasible { best: realized.max(m.tail_bound()), target: delta });
    }
    Ok(m)
}

/// Raises the atom count until [`build_moment_killer`] succeeds. Results
/// are memoized per process.
pub fn auto_moment_killer(interval: (f64, f64), delta: f64, max_atoms: usize) -> Result<AtomicMeasure> {
    type Key = (u64, u64, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Result<AtomicMeasure>>>> = OnceLock::new();
    let key = (interval.0.to_bits(), interval.1.to_bits(), delta.to_bits(), max_atoms);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return r.clone();
    }
    let mut last = Error::Infeasible { best: f64::INFINITY, target: delta };
    let mut out = None;
    for n in 1..=max_atoms {
        match build_moment_killer(interval, delta, n, None) {
            Ok(m) => {
                out = Some(Ok(m));
                break;
            }
            Err(e @ Error::Infeasible { .. }) => last = e,
            Err(e) => {
                out = Some(Err(e));
                break;
            }
        }
    }
    let r = out.unwrap_or(Err(last));
    cache.lock().unwrap().insert(key, r.clone());
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_moments() {
        let m = AtomicMeasure::dirac(0.85, (0.8, 0.9)).unwrap();
        assert_eq!(m.moment(0), 1.0);
        assert!((m.moment(2) - 0.7225).abs() < 1e-15);
    }

    #[test]
    fn large_delta_single_atom() {
        let m = build_moment_killer((0.8, 0.9), 0.95, 1, None).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!((m.atoms()[0].0 - 0.85).abs() < 1e-15);
        assert!((m.atoms()[0].1 - 1.0).abs() < 1e-15);
        assert!(m.tail_bound() < 0.95);
    }

    #[test]
    fn outside_atom_rejected() {
        assert!(matches!(AtomicMeasure::new(vec![(0.95, 1.0)], (0.8, 0.9), 1), Err(Error::AtomOutOfRange(_))));
    }

    #[test]
    fn minimax_levels_decrease_with_atoms() {
        let mut prev = f64::INFINITY;
        for n in [2, 4, 6, 8] {
            let sol = remez(&chebyshev_nodes((0.8, 0.9), n), 200).unwrap();
            assert!(sol.level < prev);
            prev = sol.level;
        }
    }
}

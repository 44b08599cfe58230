//! Derived constants of the packing construction.
//!
//! Theory mode evaluates the asymptotic formulas verbatim and refuses inputs
//! where they are infeasible. Practice mode evaluates the same formulas but
//! substitutes workable values for `m` and `D` at desk scale and records
//! every departure as a warning; there, soundness rests on the verifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible parameters: {}", .0.join("; "))]
    InfeasibleParameters(Vec<String>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Theory,
    #[default]
    Practice,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theory" => Ok(Mode::Theory),
            "practice" => Ok(Mode::Practice),
            other => Err(format!("unknown mode {other:?} (expected theory or practice)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(rename = "m")]
    pub joined_size: Option<usize>,
    #[serde(rename = "D")]
    pub degree_cap: Option<usize>,
}

/// Bad-event windows for the two resampling stages.
///
/// Stage one flags `(v, c)` when the count `k_c(v)` leaves
/// `[color_low, color_high]` (colors) or `[reservoir_low, reservoir_high]`
/// (reservoir). Stage two flags `(v, c, c')` unless
/// `pair_low < count < pair_high`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventThresholds {
    pub color_low: f64,
    pub color_high: f64,
    pub reservoir_low: f64,
    pub reservoir_high: Option<f64>,
    pub pair_low: f64,
    pub pair_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingParams {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub mode: Mode,
    /// Target count before reconciling with the color grid.
    pub d_star_raw: usize,
    #[serde(rename = "d_star")]
    pub target_count: usize,
    #[serde(rename = "r1")]
    pub color_classes: usize,
    #[serde(rename = "r2")]
    pub subcolor_classes: usize,
    #[serde(rename = "p1")]
    pub color_prob: f64,
    #[serde(rename = "p2")]
    pub subcolor_prob: f64,
    #[serde(rename = "b_prob")]
    pub reservoir_prob: f64,
    #[serde(rename = "m")]
    pub joined_size: usize,
    #[serde(rename = "D")]
    pub degree_cap: usize,
    #[serde(rename = "s")]
    pub forest_budget: usize,
    pub overrides: Overrides,
    pub thresholds: EventThresholds,
    pub warnings: Vec<String>,
}

impl PackingParams {
    /// Arity of the trees grown during connection, `D/2 − 1`.
    pub fn tree_arity(&self) -> usize {
        (self.degree_cap / 2).saturating_sub(1)
    }

    /// Path-length ceiling `2·log_{D/2−1}(x) + 1`.
    pub fn path_length_bound(&self, x: f64) -> f64 {
        let arity = self.tree_arity() as f64;
        2.0 * x.ln() / arity.ln() + 1.0
    }

    /// Index of subcolor `(c, c')` in the lexicographic order of the grid.
    pub fn set_index(&self, color: usize, subcolor: usize) -> usize {
        color * self.subcolor_classes + subcolor
    }
}

/// Smallest practice-mode extendability degree; gives binary trees.
pub const PRACTICE_MIN_DEGREE_CAP: usize = 6;

pub fn derive_params(
    n: usize,
    d: usize,
    lambda: f64,
    epsilon: f64,
    mode: Mode,
    overrides: Overrides,
) -> Result<PackingParams, ParamsError> {
    if d < 3 || n <= d {
        return Err(ParamsError::InvalidInput(format!("need n > d >= 3 (n = {n}, d = {d})")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ParamsError::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ParamsError::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if mode == Mode::Theory && overrides != Overrides::default() {
        return Err(ParamsError::InvalidInput("overrides are only honored in practice mode".into()));
    }

    let (nf, df) = (n as f64, d as f64);
    let ln_d = df.ln();
    let eps2 = epsilon * epsilon;

    let d_star_raw = ((1.0 - epsilon) * df / ln_d).floor() as usize;
    // The grid r1 × r2 may only undershoot the raw target.
    let subcolor_classes = (ln_d.powi(5).round() as usize).min(d_star_raw).max(1);
    let color_classes = (d_star_raw / subcolor_classes).max(1);
    let target_count = color_classes * subcolor_classes;
    let color_prob = (1.0 - eps2) / color_classes as f64;
    let subcolor_prob = 1.0 / subcolor_classes as f64;

    let theory_m = (lambda * nf / df).ceil() as usize + 1;
    let theory_degree_cap = (epsilon.powi(4) * df / (36.0 * lambda)).floor() as usize;

    let mut theory_failures = Vec::new();
    if theory_degree_cap < 3 {
        theory_failures.push(format!("D = {theory_degree_cap} < 3"));
    }
    if color_prob > 1.0 {
        theory_failures.push(format!("p1 = {color_prob} > 1"));
    }
    if d_star_raw < 1 {
        theory_failures.push(format!("d* = {d_star_raw} < 1"));
    }
    let theory_s = n as i128 - (2 * theory_degree_cap as i128 + 3) * theory_m as i128;
    if theory_s <= 0 {
        theory_failures.push(format!("s = n - 2Dm - 3m = {theory_s} <= 0"));
    }

    let mut warnings = Vec::new();
    let (joined_size, degree_cap) = match mode {
        Mode::Theory => {
            if !theory_failures.is_empty() {
                return Err(ParamsError::InfeasibleParameters(theory_failures));
            }
            (theory_m, theory_degree_cap)
        }
        Mode::Practice => {
            warnings.extend(theory_failures.iter().map(|f| format!("theory check failed: {f}")));
            let degree_cap = match overrides.degree_cap {
                Some(cap) => cap,
                None => {
                    let arity = ((eps2 * df / 2.0).floor() as usize).max(2);
                    let cap = theory_degree_cap.max(2 * arity + 2).max(PRACTICE_MIN_DEGREE_CAP);
                    if cap != theory_degree_cap {
                        warnings.push(format!("D = {cap} (practice default, theory value {theory_degree_cap})"));
                    }
                    cap
                }
            };
            let joined_size = match overrides.joined_size {
                Some(m) => m,
                None => {
                    let per_unit = 2 * degree_cap + 3;
                    if per_unit * theory_m <= n / 2 {
                        theory_m
                    } else {
                        let m = (n / (2 * per_unit)).max(1);
                        warnings.push(format!("m = {m} (practice default, theory value {theory_m})"));
                        m
                    }
                }
            };
            if degree_cap < 3 {
                warnings.push(format!("D = {degree_cap} < 3"));
            }
            (joined_size, degree_cap)
        }
    };
    if joined_size == 0 {
        return Err(ParamsError::InvalidInput("m must be at least 1".into()));
    }

    let s = n as i128 - (2 * degree_cap as i128 + 3) * joined_size as i128;
    if s <= 0 {
        return Err(ParamsError::InfeasibleParameters(vec![format!(
            "s = n - 2Dm - 3m = {s} <= 0 (m = {joined_size}, D = {degree_cap})"
        )]));
    }

    let reservoir_mean = eps2 * df;
    let color_mean = color_prob * df;
    let half = epsilon / 2.0;
    let thresholds = EventThresholds {
        color_low: (1.0 - half) * color_mean,
        color_high: (1.0 + half) * color_mean,
        reservoir_low: match mode {
            Mode::Theory => (1.0 - half) * reservoir_mean,
            Mode::Practice => reservoir_mean / 2.0,
        },
        reservoir_high: match mode {
            Mode::Theory => Some((1.0 + half) * reservoir_mean),
            Mode::Practice => None,
        },
        pair_low: eps2 * ln_d,
        pair_high: 20.0 * ln_d,
    };

    Ok(PackingParams {
        n,
        d,
        lambda,
        epsilon,
        mode,
        d_star_raw,
        target_count,
        color_classes,
        subcolor_classes,
        color_prob,
        subcolor_prob,
        reservoir_prob: eps2,
        joined_size,
        degree_cap,
        forest_budget: s as usize,
        overrides,
        thresholds,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_instance_is_feasible_in_theory_mode() {
        let p = derive_params(10_000_000, 300_000, 1100.0, 0.8, Mode::Theory, Overrides::default()).unwrap();
        assert_eq!(p.degree_cap, 3);
        assert_eq!(p.d_star_raw, 4757);
        assert_eq!(p.color_classes * p.subcolor_classes, p.target_count);
        assert!(p.target_count <= p.d_star_raw);
        assert_eq!(p.joined_size, 36_668);
        assert_eq!(p.forest_budget, 10_000_000 - 9 * 36_668);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn small_ratio_is_infeasible_in_theory_mode() {
        let err = derive_params(1_000_000, 10_000, 100.0, 0.1, Mode::Theory, Overrides::default()).unwrap_err();
        match err {
            ParamsError::InfeasibleParameters(reasons) => {
                assert!(reasons.iter().any(|r| r.starts_with("D = 0 < 3")), "{reasons:?}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn practice_mode_honors_overrides_with_warning() {
        let overrides = Overrides { joined_size: Some(200), degree_cap: Some(8) };
        let p = derive_params(1_000_000, 10_000, 100.0, 0.1, Mode::Practice, overrides).unwrap();
        assert_eq!(p.degree_cap, 8);
        assert_eq!(p.joined_size, 200);
        assert_eq!(p.forest_budget, 1_000_000 - 19 * 200);
        assert!(p.warnings.iter().any(|w| w.contains("D = 0 < 3")));
    }

    #[test]
    fn practice_mode_still_rejects_empty_budget() {
        let overrides = Overrides { joined_size: Some(1000), degree_cap: Some(8) };
        assert!(matches!(
            derive_params(5000, 64, 16.0, 0.3, Mode::Practice, overrides),
            Err(ParamsError::InfeasibleParameters(_))
        ));
    }

    #[test]
    fn practice_defaults_at_desk_scale() {
        let p = derive_params(5000, 64, 16.7, 0.3, Mode::Practice, Overrides::default()).unwrap();
        assert_eq!(p.d_star_raw, 10);
        assert_eq!(p.target_count, 10);
        assert_eq!((p.color_classes, p.subcolor_classes), (1, 10));
        assert_eq!(p.degree_cap, 6);
        assert_eq!(p.tree_arity(), 2);
        assert_eq!(p.joined_size, 166);
        assert!(p.forest_budget >= 2500);
        assert!(p.thresholds.reservoir_high.is_none());
        assert!((p.thresholds.reservoir_low - 0.09 * 64.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn theory_mode_rejects_overrides() {
        let overrides = Overrides { joined_size: Some(2), degree_cap: None };
        assert!(matches!(
            derive_params(10_000_000, 300_000, 1100.0, 0.8, Mode::Theory, overrides),
            Err(ParamsError::InvalidInput(_))
        ));
    }

    #[test]
    fn input_validation() {
        for (n, d, l, e) in [(10, 2, 1.0, 0.5), (10, 10, 1.0, 0.5), (100, 10, 0.0, 0.5), (100, 10, 1.0, 1.0)] {
            assert!(matches!(
                derive_params(n, d, l, e, Mode::Practice, Overrides::default()),
                Err(ParamsError::InvalidInput(_))
            ));
        }
    }

    #[test]
    fn grid_reconciles_and_degree_cap_is_monotone_in_lambda() {
        for &n in &[10_000usize, 1_000_000, 100_000_000] {
            for &d in &[50usize, 500, 5_000, 50_000] {
                if d >= n {
                    continue;
                }
                for &eps in &[0.1, 0.5, 0.9] {
                    let mut last_cap = usize::MAX;
                    for k in 1..40 {
                        let lambda = k as f64 * 0.5;
                        let Ok(p) = derive_params(n, d, lambda, eps, Mode::Practice, Overrides::default()) else {
                            continue;
                        };
                        assert_eq!(p.color_classes * p.subcolor_classes, p.target_count);
                        assert!(p.degree_cap <= last_cap);
                        last_cap = p.degree_cap;
                        if let Ok(t) = derive_params(n, d, lambda, eps, Mode::Theory, Overrides::default()) {
                            assert!(t.degree_cap >= 3 && t.joined_size >= 1);
                            assert_eq!(t.degree_cap, (eps.powi(4) * d as f64 / (36.0 * lambda)).floor() as usize);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn params_serialize_with_short_keys() {
        let p = derive_params(5000, 64, 16.7, 0.3, Mode::Practice, Overrides::default()).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        for key in ["epsilon", "d_star", "r1", "r2", "p1", "p2", "b_prob", "m", "D", "s", "mode", "overrides"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["mode"], "practice");
        let back: PackingParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}

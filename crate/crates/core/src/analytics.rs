//! Outlier fencing, descriptive statistics and the two-group / k-group
//! significance tests used to compare modalities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

use crate::harness::{fit_fitts, wrong_selection_rate, FittsFit, TrialRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {min} values, got {got}")]
    TooFewValues { min: usize, got: usize },
    #[error("empty sample set")]
    EmptySet,
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FenceReport {
    pub kept: Vec<f64>,
    pub removed: Vec<f64>,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

/// Quantile by linear interpolation at position `p·(n−1)` of the sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Single pass of the outer fence `[q1 − 3·iqr, q3 + 3·iqr]`. Input order is
/// preserved in both `kept` and `removed`.
pub fn outer_fence_filter(values: &[f64]) -> Result<FenceReport, StatsError> {
    if values.len() < 4 {
        return Err(StatsError::TooFewValues {
            min: 4,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 3.0 * iqr;
    let upper_fence = q3 + 3.0 * iqr;
    let (kept, removed) = values
        .iter()
        .partition(|&&v| v >= lower_fence && v <= upper_fence);
    Ok(FenceReport {
        kept,
        removed,
        q1,
        q3,
        iqr,
        lower_fence,
        upper_fence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1); 0 for a single value.
    pub sd: f64,
    pub count: usize,
    /// Set when `sd` is undefined and reported as 0.
    pub sd_undefined: bool,
}

pub fn summarize(values: &[f64]) -> Result<Summary, StatsError> {
    let n = values.len();
    if n == 0 {
        return Err(StatsError::EmptySet);
    }
    let m = mean(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        mean: m,
        median,
        sd: if n > 1 { variance(values, m).sqrt() } else { 0.0 },
        count: n,
        sd_undefined: n == 1,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance about `m`.
fn variance(v: &[f64], m: f64) -> f64 {
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

fn t_p_value(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

fn two_groups(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64, f64), StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData("each group needs two values"));
    }
    let (ma, mb) = (mean(a), mean(b));
    Ok((ma, mb, variance(a, ma), variance(b, mb)))
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite df.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    let (ma, mb, va, vb) = two_groups(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(TTest {
                t: 0.0,
                df: na + nb - 2.0,
                p_two_sided: 1.0,
            });
        }
        return Err(StatsError::InsufficientData("zero variance with unequal means"));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2.powi(2) / (sa.powi(2) / (na - 1.0) + sb.powi(2) / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p_two_sided: t_p_value(t, df),
    })
}

/// Student's t-test with pooled variance.
pub fn pooled_t(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    let (ma, mb, va, vb) = two_groups(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    let se2 = sp2 * (1.0 / na + 1.0 / nb);
    if se2 == 0.0 {
        if ma == mb {
            return Ok(TTest { t: 0.0, df, p_two_sided: 1.0 });
        }
        return Err(StatsError::InsufficientData("zero variance with unequal means"));
    }
    let t = (ma - mb) / se2.sqrt();
    Ok(TTest {
        t,
        df,
        p_two_sided: t_p_value(t, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p: f64,
}

pub fn anova_oneway(groups: &[&[f64]]) -> Result<Anova, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData("need two groups"));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(StatsError::InsufficientData("each group needs two values"));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n - groups.len()) as f64;
    if ssw == 0.0 {
        if ssb == 0.0 {
            return Ok(Anova {
                f: 0.0,
                df_between,
                df_within,
                p: 1.0,
            });
        }
        return Err(StatsError::InsufficientData("zero within-group variance"));
    }
    let f = (ssb / df_between) / (ssw / df_within);
    let p = if f == 0.0 {
        1.0
    } else {
        FisherSnedecor::new(df_between, df_within)
            .expect("df are positive")
            .sf(f)
    };
    Ok(Anova {
        f,
        df_between,
        df_within,
        p,
    })
}

/// Bonferroni-adjusted p-value for `comparisons` tests, capped at 1.
pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons as f64).min(1.0)
}

/// Extracts trial records from a JSONL log. A line is either a bare
/// record or a wire envelope (`{"kind": ..., "payload": ...}`), in which case
/// only `trial_result` envelopes contribute. Blank lines are skipped.
pub fn load_trial_records(text: &str) -> Result<Vec<TrialRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |e: serde_json::Error| LogError {
            line: i + 1,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(line).map_err(err)?;
        let record = match value.get("kind").and_then(|k| k.as_str()) {
            Some("trial_result") => value.get("payload").cloned().unwrap_or_default(),
            Some(_) => continue,
            None => value,
        };
        out.push(serde_json::from_value(record).map_err(err)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("log line {line}: {message}")]
pub struct LogError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub trials: usize,
    pub correct: usize,
    pub summary: Option<Summary>,
    pub wrong_selection_rate_pct: f64,
    pub fitts: Option<FittsFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub test: TTest,
    pub p_bonferroni: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub groups: Vec<GroupSummary>,
    /// Fit over every correct trial regardless of group.
    pub overall_fitts: Option<FittsFit>,
    /// Fence over correct-trial selection times.
    pub fence: Option<FenceReport>,
    pub pairwise: Vec<PairwiseTest>,
    pub anova: Option<Anova>,
}

/// Group label of a record: the modality, suffixed `+adaptive` for
/// adaptive trials.
pub fn group_label(r: &TrialRecord) -> String {
    if r.adaptive {
        format!("{}+adaptive", r.modality)
    } else {
        r.modality.clone()
    }
}

/// Per-group descriptives and Fitts fits, the fence report, pairwise Welch
/// tests with Bonferroni correction, and a one-way ANOVA across groups.
pub fn analyze_records(records: &[TrialRecord]) -> AnalysisReport {
    let mut grouped: BTreeMap<String, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        grouped.entry(group_label(r)).or_default().push(r.clone());
    }
    let times = |rs: &[TrialRecord]| -> Vec<f64> {
        rs.iter()
            .filter(|r| r.correct)
            .map(TrialRecord::selection_time_ms)
            .collect()
    };
    let groups: Vec<GroupSummary> = grouped
        .iter()
        .map(|(label, rs)| {
            let t = times(rs);
            GroupSummary {
                group: label.clone(),
                trials: rs.len(),
                correct: t.len(),
                summary: summarize(&t).ok(),
                wrong_selection_rate_pct: wrong_selection_rate(rs),
                fitts: fit_fitts(rs).ok(),
            }
        })
        .collect();

    let labelled: Vec<(&String, Vec<f64>)> = grouped
        .iter()
        .map(|(l, rs)| (l, times(rs)))
        .filter(|(_, t)| t.len() >= 2)
        .collect();
    let n_pairs = labelled.len() * labelled.len().saturating_sub(1) / 2;
    let mut pairwise = Vec::new();
    for (i, (la, ta)) in labelled.iter().enumerate() {
        for (lb, tb) in &labelled[i + 1..] {
            if let Ok(test) = welch_t(ta, tb) {
                pairwise.push(PairwiseTest {
                    a: (*la).clone(),
                    b: (*lb).clone(),
                    test,
                    p_bonferroni: bonferroni(test.p_two_sided, n_pairs),
                });
            }
        }
    }
    let slices: Vec<&[f64]> = labelled.iter().map(|(_, t)| t.as_slice()).collect();
    AnalysisReport {
        groups,
        overall_fitts: fit_fitts(records).ok(),
        fence: outer_fence_filter(&times(records)).ok(),
        pairwise,
        anova: anova_oneway(&slices).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn fence_example() {
        let r = outer_fence_filter(&[1000.0, 1100.0, 1200.0, 1300.0, 5000.0]).unwrap();
        assert_eq!((r.q1, r.q3, r.iqr), (1100.0, 1300.0, 200.0));
        assert_eq!(r.upper_fence, 1900.0);
        assert_eq!(r.lower_fence, 500.0);
        assert_eq!(r.removed, vec![5000.0]);
        assert_eq!(r.kept.len(), 4);
    }

    #[test]
    fn fence_degenerate() {
        let r = outer_fence_filter(&[7.0; 10]).unwrap();
        assert!(r.removed.is_empty());
        assert_eq!(
            outer_fence_filter(&[1.0, 2.0, 3.0]),
            Err(StatsError::TooFewValues { min: 4, got: 3 })
        );
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.median, s.sd, s.count), (2.0, 2.0, 1.0, 3));
        let one = summarize(&[5.0]).unwrap();
        assert_eq!(one.sd, 0.0);
        assert!(one.sd_undefined);
        assert_eq!(summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap().median, 2.5);
        assert_eq!(summarize(&[]), Err(StatsError::EmptySet));
    }

    #[test]
    fn welch_reference_values() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_abs_diff_eq!(r.t, -3.674_234_614_174_767_3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.df, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_two_sided, 0.021_311_641_128_756_727, epsilon = 1e-6);

        let r = welch_t(&[1.0, 2.0, 3.0, 4.5], &[2.0, 7.0, 3.0, 9.5]).unwrap();
        assert_abs_diff_eq!(r.t, -1.446_450_490_052_428_4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.df, 4.058_525_130_751_816, epsilon = 1e-9);
        assert_abs_diff_eq!(r.p_two_sided, 0.220_602_470_035_781_6, epsilon = 1e-6);
    }

    #[test]
    fn identical_groups() {
        let g = [1.0, 2.0, 3.0];
        let r = welch_t(&g, &g).unwrap();
        assert_eq!((r.t, r.p_two_sided), (0.0, 1.0));
        let a = anova_oneway(&[&g, &g, &g]).unwrap();
        assert_eq!((a.f, a.p), (0.0, 1.0));
    }

    #[test]
    fn anova_reference_values() {
        let a = anova_oneway(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.f, 13.5);
        assert_eq!((a.df_between, a.df_within), (1.0, 4.0));
        assert_abs_diff_eq!(a.p, 0.021_311_641_128_756_72, epsilon = 1e-6);

        let a = anova_oneway(&[&[1.0, 2.0, 3.0, 4.5], &[2.0, 7.0, 3.0, 9.5], &[0.0, 1.0, 1.5]]).unwrap();
        assert_abs_diff_eq!(a.f, 3.323_071_689_769_538_5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.p, 0.089_015_743_259_838_53, epsilon = 1e-6);
        assert!(anova_oneway(&[&[1.0, 2.0]]).is_err());
    }

    #[test]
    fn bonferroni_caps() {
        assert_abs_diff_eq!(bonferroni(0.01, 3), 0.03, epsilon = 1e-15);
        assert_eq!(bonferroni(0.5, 3), 1.0);
    }

    #[test]
    fn loads_bare_and_wrapped_records() {
        use crate::harness::FittsCondition;
        let rec = TrialRecord {
            condition: FittsCondition::new(160.0, 55.0),
            cue_t_ms: 0.0,
            select_t_ms: 700.0,
            correct: true,
            selected_target_id: Some(3),
            adaptive: false,
            wrong_selections: 0,
            modality: "laser".into(),
            trajectory: Vec::new(),
            scores: Default::default(),
        };
        let bare = serde_json::to_string(&rec).unwrap();
        let wrapped = format!(
            r#"{{"kind":"trial_result","session_id":"s","t_ms":700.0,"payload":{bare}}}"#
        );
        let sample = r#"{"kind":"sample","session_id":"s","t_ms":1.0,"payload":{"x_px":1.0,"y_px":2.0,"source":"laser"}}"#;
        let text = format!("{bare}\n\n{sample}\n{wrapped}\n");
        let got = load_trial_records(&text).unwrap();
        assert_eq!(got, vec![rec.clone(), rec]);
        assert_eq!(load_trial_records("{\"x\":").unwrap_err().line, 1);
    }

    #[test]
    fn report_groups_by_modality() {
        use crate::harness::FittsCondition;
        let mk = |modality: &str, adaptive, d: f64, t: f64| TrialRecord {
            condition: FittsCondition::new(d, 45.0),
            cue_t_ms: 0.0,
            select_t_ms: t,
            correct: true,
            selected_target_id: Some(0),
            adaptive,
            wrong_selections: 0,
            modality: modality.into(),
            trajectory: Vec::new(),
            scores: Default::default(),
        };
        let recs = vec![
            mk("laser", false, 80.0, 500.0),
            mk("laser", false, 325.0, 800.0),
            mk("laser", true, 80.0, 450.0),
            mk("laser", true, 325.0, 700.0),
            mk("imu", false, 80.0, 2000.0),
            mk("imu", false, 325.0, 2300.0),
        ];
        let r = analyze_records(&recs);
        let labels: Vec<_> = r.groups.iter().map(|g| g.group.as_str()).collect();
        assert_eq!(labels, ["imu", "laser", "laser+adaptive"]);
        assert_eq!(r.pairwise.len(), 3);
        assert!(r.anova.is_some());
        assert!(r.overall_fitts.is_some());
        assert_eq!(r.fence.unwrap().kept.len(), 6);
    }

    fn group(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, n)
    }

    proptest! {
        #[test]
        fn f_is_t_squared((a, b) in (2usize..20).prop_flat_map(|n| (group(n), group(n)))) {
            let t = pooled_t(&a, &b).unwrap().t;
            let f = anova_oneway(&[&a, &b]).unwrap().f;
            prop_assert!((f - t * t).abs() <= 1e-9 * (1.0 + f));
        }

        #[test]
        fn shift_invariant(a in group(6), b in group(9), c in -1e3..1e3f64) {
            let sa: Vec<f64> = a.iter().map(|v| v + c).collect();
            let sb: Vec<f64> = b.iter().map(|v| v + c).collect();
            let (w0, w1) = (welch_t(&a, &b).unwrap(), welch_t(&sa, &sb).unwrap());
            prop_assert!((w0.t - w1.t).abs() <= 1e-6 * (1.0 + w0.t.abs()));
            let (f0, f1) = (anova_oneway(&[&a, &b]).unwrap().f, anova_oneway(&[&sa, &sb]).unwrap().f);
            prop_assert!((f0 - f1).abs() <= 1e-6 * (1.0 + f0));
        }

        #[test]
        fn scale_invariant(a in group(5), b in group(5), k in 0.01..100.0f64) {
            let sa: Vec<f64> = a.iter().map(|v| v * k).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * k).collect();
            let (w0, w1) = (welch_t(&a, &b).unwrap(), welch_t(&sa, &sb).unwrap());
            prop_assert!((w0.t - w1.t).abs() <= 1e-9 * (1.0 + w0.t.abs()));
        }

        #[test]
        fn fence_partitions(v in prop::collection::vec(0.0..5000.0f64, 4..100)) {
            let r = outer_fence_filter(&v).unwrap();
            prop_assert_eq!(r.kept.len() + r.removed.len(), v.len());
            for k in &r.kept {
                prop_assert!(*k >= r.lower_fence && *k <= r.upper_fence);
            }
        }
    }
}

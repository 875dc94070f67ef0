//! Verification protocol and error-rate measurement.
//!
//! The protocol enrolls each user's first few genuine signatures as
//! references and scores the rest: remaining genuine signatures measure the
//! false-rejection side, while forgeries (skilled ones, or other users'
//! genuine signatures acting as random forgeries) measure false acceptance.
//! A dissimilarity score is accepted when it falls at or below a threshold,
//! and the equal error rate is read off the convex hull of the resulting
//! trade-off curve.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{Label, ManifestEntry};

/// Where impostor trials come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgeryType {
    /// Forgeries produced while imitating the target user.
    Skilled,
    /// Other users' genuine signatures presented against the target.
    Random,
}

impl ForgeryType {
    pub fn as_str(self) -> &'static str {
        match self {
            ForgeryType::Skilled => "skilled",
            ForgeryType::Random => "random",
        }
    }
}

/// Ground truth of one verification attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    Genuine,
    Impostor,
}

/// A verification attempt that has not been scored yet.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrial {
    pub target_user: String,
    pub question: ManifestEntry,
    pub truth: Truth,
}

/// A scored verification attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub target_user: String,
    pub question_rel_path: String,
    pub truth: Truth,
    pub score: f64,
}

/// The full set of attempts derived from a manifest, plus each eligible
/// user's enrollment signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub references: BTreeMap<String, Vec<ManifestEntry>>,
    pub trials: Vec<PlannedTrial>,
    pub skipped_users: Vec<String>,
}

/// Builds the verification plan. Per user, the first `refs` genuine
/// signatures enroll; users with no genuine signature left over are skipped
/// with a warning. Genuine trials use the remaining genuine signatures.
/// Skilled impostor trials use every forgery aimed at the target; random
/// impostor trials take each other eligible user's first non-reference
/// genuine signature.
pub fn plan_trials(entries: &[ManifestEntry], refs: usize, forgery: ForgeryType) -> Result<TrialPlan> {
    if refs < 2 {
        return Err(Error::Protocol(format!(
            "enrollment needs at least 2 references per user, got {refs}"
        )));
    }
    let mut genuine: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    let mut skilled: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in entries {
        match e.label {
            Label::Genuine => genuine.entry(&e.user_id).or_default().push(e),
            Label::Skilled => skilled.entry(&e.user_id).or_default().push(e),
        }
    }

    let mut references = BTreeMap::new();
    let mut eligible = Vec::new();
    let mut skipped_users = Vec::new();
    for (&user, signatures) in &genuine {
        if signatures.len() <= refs {
            log::warn!(
                "skipping user {user}: {} genuine signatures, need more than {refs}",
                signatures.len()
            );
            skipped_users.push(user.to_string());
            continue;
        }
        references.insert(
            user.to_string(),
            signatures[..refs].iter().map(|&e| e.clone()).collect(),
        );
        eligible.push(user);
    }

    let mut trials = Vec::new();
    for &user in &eligible {
        for &e in &genuine[user][refs..] {
            trials.push(PlannedTrial {
                target_user: user.to_string(),
                question: e.clone(),
                truth: Truth::Genuine,
            });
        }
        match forgery {
            ForgeryType::Skilled => {
                for &e in skilled.get(user).map(Vec::as_slice).unwrap_or(&[]) {
                    trials.push(PlannedTrial {
                        target_user: user.to_string(),
                        question: e.clone(),
                        truth: Truth::Impostor,
                    });
                }
            }
            ForgeryType::Random => {
                for &other in &eligible {
                    if other == user {
                        continue;
                    }
                    trials.push(PlannedTrial {
                        target_user: user.to_string(),
                        question: genuine[other][refs].clone(),
                        truth: Truth::Impostor,
                    });
                }
            }
        }
    }

    Ok(TrialPlan {
        references,
        trials,
        skipped_users,
    })
}

/// Scores every planned trial. The scorer receives the target's enrollment
/// entries and the question entry; trials run in parallel but the output
/// order always matches the plan.
pub fn run_protocol<S>(plan: &TrialPlan, scorer: &S) -> Result<Vec<Trial>>
where
    S: Fn(&[ManifestEntry], &ManifestEntry) -> Result<f64> + Sync,
{
    if plan.trials.is_empty() {
        return Err(Error::Protocol(
            "the plan has no trials; no user had both references and questions".to_string(),
        ));
    }
    plan.trials
        .par_iter()
        .map(|t| {
            let refs = plan
                .references
                .get(&t.target_user)
                .ok_or_else(|| Error::Protocol(format!("no references for user {}", t.target_user)))?;
            let score = scorer(refs, &t.question)?;
            if !(score.is_finite() && score >= 0.0) {
                return Err(Error::contract(format!(
                    "scorer produced {score} for {}",
                    t.question.rel_path
                )));
            }
            Ok(Trial {
                target_user: t.target_user.clone(),
                question_rel_path: t.question.rel_path.clone(),
                truth: t.truth,
                score,
            })
        })
        .collect()
}

/// One operating point of the accept-if-below-threshold rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far_percent: f64,
    pub frr_percent: f64,
}

/// Error-rate summary of a batch of scored trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub eer_percent: f64,
    pub det: Vec<DetPoint>,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

/// Sweeps the threshold over every distinct score (plus a reject-all
/// sentinel) and reads the equal error rate off the convex hull of the
/// trade-off curve. Raising the threshold accepts more attempts, so the
/// false-acceptance rate never decreases and the false-rejection rate never
/// increases along the sweep.
pub fn evaluate(trials: &[Trial]) -> Result<EvalReport> {
    let genuine: Vec<f64> = trials
        .iter()
        .filter(|t| t.truth == Truth::Genuine)
        .map(|t| t.score)
        .collect();
    let impostor: Vec<f64> = trials
        .iter()
        .filter(|t| t.truth == Truth::Impostor)
        .map(|t| t.score)
        .collect();
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Protocol(format!(
            "equal error rate needs both classes: {} genuine and {} impostor trials",
            genuine.len(),
            impostor.len()
        )));
    }

    let mut thresholds: Vec<f64> = trials.iter().map(|t| t.score).collect();
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();

    let mut det = Vec::with_capacity(thresholds.len() + 1);
    det.push(DetPoint {
        threshold: f64::NEG_INFINITY,
        far_percent: 0.0,
        frr_percent: 100.0,
    });
    for &t in &thresholds {
        let fa = impostor.iter().filter(|&&s| s <= t).count();
        let fr = genuine.iter().filter(|&&s| s > t).count();
        det.push(DetPoint {
            threshold: t,
            far_percent: 100.0 * fa as f64 / impostor.len() as f64,
            frr_percent: 100.0 * fr as f64 / genuine.len() as f64,
        });
    }

    Ok(EvalReport {
        eer_percent: eer_from_det(&det),
        det,
        n_genuine: genuine.len(),
        n_impostor: impostor.len(),
    })
}

/// Equal error rate from the lower convex hull of the (FAR, FRR) points:
/// the rate at which the hull crosses the FAR == FRR diagonal. Convexifying
/// first makes the estimate insensitive to the discrete staircase the finite
/// score sample produces.
fn eer_from_det(det: &[DetPoint]) -> f64 {
    // Keep the best (lowest) FRR at each distinct FAR.
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut sorted: Vec<(f64, f64)> = det.iter().map(|p| (p.far_percent, p.frr_percent)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for (far, frr) in sorted {
        match points.last() {
            Some(&(last_far, _)) if last_far == far => continue,
            _ => points.push((far, frr)),
        }
    }

    // Lower convex hull by monotone chain.
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    // Walk the hull to the segment that crosses FAR == FRR.
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let da = a.1 - a.0;
        let db = b.1 - b.0;
        if da >= 0.0 && db <= 0.0 {
            if da == db {
                return a.0;
            }
            let t = da / (da - db);
            return a.0 + t * (b.0 - a.0);
        }
    }
    // A hull that never crosses the diagonal means one class dominates
    // entirely; the nearest endpoint is the answer.
    let last = hull[hull.len() - 1];
    if last.1 > last.0 {
        last.1.min(100.0)
    } else {
        hull[0].0.min(100.0)
    }
}

/// Scores produced under one configuration; the fingerprint identifies that
/// configuration so batches from different runs cannot be mixed by accident.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDataset {
    pub fingerprint: u64,
    pub trials: Vec<Trial>,
}

/// Concatenates score batches that share a configuration fingerprint.
pub fn concatenate_scores(datasets: &[ScoredDataset]) -> Result<Vec<Trial>> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::contract("nothing to concatenate".to_string()))?;
    let mut all = Vec::new();
    for d in datasets {
        if d.fingerprint != first.fingerprint {
            return Err(Error::contract(format!(
                "cannot concatenate scores from different configurations ({:016x} vs {:016x})",
                d.fingerprint, first.fingerprint
            )));
        }
        all.extend(d.trials.iter().cloned());
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn entry(user: &str, label: Label, name: &str) -> ManifestEntry {
        ManifestEntry {
            user_id: user.to_string(),
            label,
            rel_path: format!("{user}/{name}"),
            path: PathBuf::from(format!("/data/{user}/{name}")),
        }
    }

    fn corpus(users: usize, genuine: usize, skilled: usize) -> Vec<ManifestEntry> {
        let mut entries = Vec::new();
        for u in 0..users {
            let user = format!("u{u:02}");
            for g in 0..genuine {
                entries.push(entry(&user, Label::Genuine, &format!("g{g}.svc")));
            }
            for s in 0..skilled {
                entries.push(entry(&user, Label::Skilled, &format!("s{s}.svc")));
            }
        }
        entries
    }

    fn scored(genuine: &[f64], impostor: &[f64]) -> Vec<Trial> {
        let mut trials = Vec::new();
        for (k, &s) in genuine.iter().enumerate() {
            trials.push(Trial {
                target_user: "u".to_string(),
                question_rel_path: format!("g{k}"),
                truth: Truth::Genuine,
                score: s,
            });
        }
        for (k, &s) in impostor.iter().enumerate() {
            trials.push(Trial {
                target_user: "u".to_string(),
                question_rel_path: format!("i{k}"),
                truth: Truth::Impostor,
                score: s,
            });
        }
        trials
    }

    #[test]
    fn random_forgery_plan_counts() {
        let plan = plan_trials(&corpus(10, 10, 0), 5, ForgeryType::Random).unwrap();
        assert_eq!(plan.references.len(), 10);
        assert!(plan.references.values().all(|r| r.len() == 5));
        let genuine = plan.trials.iter().filter(|t| t.truth == Truth::Genuine).count();
        let impostor = plan.trials.iter().filter(|t| t.truth == Truth::Impostor).count();
        assert_eq!(genuine, 50);
        assert_eq!(impostor, 90);
        assert!(plan.skipped_users.is_empty());
    }

    #[test]
    fn skilled_forgery_plan_counts() {
        let plan = plan_trials(&corpus(4, 8, 6), 5, ForgeryType::Skilled).unwrap();
        let genuine = plan.trials.iter().filter(|t| t.truth == Truth::Genuine).count();
        let impostor = plan.trials.iter().filter(|t| t.truth == Truth::Impostor).count();
        assert_eq!(genuine, 4 * 3);
        assert_eq!(impostor, 4 * 6);
    }

    #[test]
    fn random_forgery_takes_first_non_reference_genuine() {
        let plan = plan_trials(&corpus(3, 7, 0), 5, ForgeryType::Random).unwrap();
        let against_u00: Vec<&PlannedTrial> = plan
            .trials
            .iter()
            .filter(|t| t.target_user == "u00" && t.truth == Truth::Impostor)
            .collect();
        assert_eq!(against_u00.len(), 2);
        assert_eq!(against_u00[0].question.rel_path, "u01/g5.svc");
        assert_eq!(against_u00[1].question.rel_path, "u02/g5.svc");
    }

    #[test]
    fn users_without_spare_genuine_are_skipped() {
        let mut entries = corpus(2, 8, 0);
        // A third user with exactly as many genuine signatures as references.
        entries.extend(corpus(1, 5, 0).into_iter().map(|mut e| {
            e.user_id = "short".to_string();
            e
        }));
        let plan = plan_trials(&entries, 5, ForgeryType::Random).unwrap();
        assert_eq!(plan.skipped_users, vec!["short".to_string()]);
        assert_eq!(plan.references.len(), 2);
        // The skipped user neither receives nor contributes trials.
        assert!(plan.trials.iter().all(|t| t.target_user != "short"));
        assert!(plan.trials.iter().all(|t| !t.question.rel_path.starts_with("short/")));
        let impostor = plan.trials.iter().filter(|t| t.truth == Truth::Impostor).count();
        assert_eq!(impostor, 2);
    }

    #[test]
    fn too_few_references_is_a_protocol_error() {
        assert!(matches!(
            plan_trials(&corpus(2, 8, 0), 1, ForgeryType::Random).unwrap_err(),
            Error::Protocol(_)
        ));
    }

    #[test]
    fn protocol_scores_in_plan_order() {
        let plan = plan_trials(&corpus(3, 7, 0), 5, ForgeryType::Random).unwrap();
        let scorer = |refs: &[ManifestEntry], q: &ManifestEntry| -> crate::error::Result<f64> {
            assert_eq!(refs.len(), 5);
            Ok(q.rel_path.len() as f64)
        };
        let trials = run_protocol(&plan, &scorer).unwrap();
        assert_eq!(trials.len(), plan.trials.len());
        for (got, want) in trials.iter().zip(&plan.trials) {
            assert_eq!(got.question_rel_path, want.question.rel_path);
            assert_eq!(got.target_user, want.target_user);
            assert_eq!(got.score, want.question.rel_path.len() as f64);
        }
    }

    #[test]
    fn empty_plan_is_a_protocol_error() {
        let plan = plan_trials(&corpus(1, 3, 0), 5, ForgeryType::Random).unwrap();
        assert!(plan.trials.is_empty());
        let scorer = |_: &[ManifestEntry], _: &ManifestEntry| Ok(1.0);
        assert!(matches!(run_protocol(&plan, &scorer).unwrap_err(), Error::Protocol(_)));
    }

    #[test]
    fn interleaved_scores_give_a_quarter_error_rate() {
        let report = evaluate(&scored(&[1.0, 3.0], &[2.0, 4.0])).unwrap();
        assert_eq!(report.eer_percent, 25.0);
        assert_eq!(report.n_genuine, 2);
        assert_eq!(report.n_impostor, 2);
    }

    #[test]
    fn separable_scores_give_zero_error_rate() {
        let report = evaluate(&scored(&[1.0, 2.0], &[3.0, 4.0])).unwrap();
        assert_eq!(report.eer_percent, 0.0);
    }

    #[test]
    fn identical_score_multisets_give_half_error_rate() {
        let report = evaluate(&scored(&[1.0, 2.0], &[1.0, 2.0])).unwrap();
        assert_eq!(report.eer_percent, 50.0);
    }

    #[test]
    fn single_class_batches_are_rejected() {
        assert!(matches!(
            evaluate(&scored(&[1.0, 2.0], &[])).unwrap_err(),
            Error::Protocol(_)
        ));
        assert!(matches!(
            evaluate(&scored(&[], &[1.0])).unwrap_err(),
            Error::Protocol(_)
        ));
    }

    #[test]
    fn det_curve_sweeps_from_reject_all_to_accept_all() {
        let report = evaluate(&scored(&[1.0, 3.0, 5.0], &[2.0, 4.0, 6.0])).unwrap();
        let first = report.det.first().unwrap();
        assert_eq!((first.far_percent, first.frr_percent), (0.0, 100.0));
        let last = report.det.last().unwrap();
        assert_eq!((last.far_percent, last.frr_percent), (100.0, 0.0));
        for w in report.det.windows(2) {
            assert!(w[0].threshold < w[1].threshold);
            assert!(w[0].far_percent <= w[1].far_percent);
            assert!(w[0].frr_percent >= w[1].frr_percent);
        }
    }

    #[test]
    fn concatenation_requires_matching_fingerprints() {
        let trials = scored(&[1.0], &[2.0]);
        let a = ScoredDataset {
            fingerprint: 7,
            trials: trials.clone(),
        };
        let b = ScoredDataset {
            fingerprint: 8,
            trials,
        };
        assert!(concatenate_scores(&[a.clone(), b]).is_err());
        assert_eq!(concatenate_scores(&[a.clone()]).unwrap(), a.trials);
    }

    #[test]
    fn duplicating_a_dataset_leaves_the_error_rate_unchanged() {
        let trials = scored(&[1.0, 3.0, 3.5], &[2.0, 4.0, 1.5]);
        let single = evaluate(&trials).unwrap().eer_percent;
        let d = ScoredDataset {
            fingerprint: 1,
            trials,
        };
        let doubled = concatenate_scores(&[d.clone(), d]).unwrap();
        assert_eq!(evaluate(&doubled).unwrap().eer_percent, single);
    }

    proptest! {
        #[test]
        fn eer_is_invariant_under_monotone_score_maps(
            genuine in proptest::collection::vec(0.0f64..10.0, 1..20),
            impostor in proptest::collection::vec(0.0f64..10.0, 1..20),
        ) {
            let base = evaluate(&scored(&genuine, &impostor)).unwrap().eer_percent;
            let mapped_g: Vec<f64> = genuine.iter().map(|s| (s * 0.3).exp()).collect();
            let mapped_i: Vec<f64> = impostor.iter().map(|s| (s * 0.3).exp()).collect();
            let mapped = evaluate(&scored(&mapped_g, &mapped_i)).unwrap().eer_percent;
            prop_assert_eq!(base, mapped);
        }

        #[test]
        fn det_is_monotone_for_any_scores(
            genuine in proptest::collection::vec(0.0f64..5.0, 1..15),
            impostor in proptest::collection::vec(0.0f64..5.0, 1..15),
        ) {
            let report = evaluate(&scored(&genuine, &impostor)).unwrap();
            for w in report.det.windows(2) {
                prop_assert!(w[0].far_percent <= w[1].far_percent);
                prop_assert!(w[0].frr_percent >= w[1].frr_percent);
            }
            prop_assert!(report.eer_percent >= 0.0 && report.eer_percent <= 100.0);
        }
    }
}

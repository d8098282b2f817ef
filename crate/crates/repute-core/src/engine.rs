//! Pure reputation arithmetic for one recalculation period: financial
//! normalization, differential endorsing/transactional reputation (full,
//! simplified and fine-grained), blending, max-normalization, logarithmic
//! compression, and the time-blended update with decay.
//!
//! Every function here is a pure function of its inputs. Callers that need a
//! permutation-independent result go through [`compute_period`], which sorts
//! records canonically before accumulating.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    AspectId, CategoryId, ConfigError, EngineConfig, EventId, MemberId, RatingKind, RatingRecord,
    ReputationState, Timestamp,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("empty batch of financial amounts")]
    EmptyBatch,
    #[error("non-positive financial amount {0}")]
    NonPositiveAmount(f64),
    #[error("period end {t_n} does not advance past state time {as_of}")]
    NonMonotonicTime { t_n: Timestamp, as_of: Timestamp },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Floored weight of a rater: its prior reputation, the default for unknown
/// members, never below the configured floor and never negative.
pub fn rater_weight(prior: &ReputationState, config: &EngineConfig, rater: &MemberId) -> f64 {
    let base = prior
        .reputation_of(rater)
        .unwrap_or(config.default_reputation);
    base.max(config.rater_weight_floor).max(0.0)
}

/// Normalize a batch of positive transaction amounts into (0, 1] weights:
/// `log10(1 + amount)` scaled by the batch maximum, so the largest amount
/// maps to exactly 1.
pub fn normalize_financial(amounts: &[f64]) -> Result<Vec<f64>, EngineError> {
    if amounts.is_empty() {
        return Err(EngineError::EmptyBatch);
    }
    let mut logs = Vec::with_capacity(amounts.len());
    let mut max = 0.0f64;
    for &a in amounts {
        if !(a > 0.0) || !a.is_finite() {
            return Err(EngineError::NonPositiveAmount(a));
        }
        let l = (1.0 + a).log10();
        max = max.max(l);
        logs.push(l);
    }
    Ok(logs.into_iter().map(|l| l / max).collect())
}

/// A slice of ratings that produced no usable denominator and was therefore
/// skipped rather than filled with a fabricated neutral value.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedSlice {
    pub member: MemberId,
    pub aspect: Option<AspectId>,
    pub category: Option<CategoryId>,
    pub event: Option<EventId>,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Every contributing weight product was zero.
    ZeroDenominator,
    /// Every aspect slice of the member carries a zero blending weight.
    ZeroAspectMass,
}

/// Per-member differential values plus the slices that had to be skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DifferentialMap {
    pub values: BTreeMap<MemberId, f64>,
    pub skipped: Vec<SkippedSlice>,
}

#[derive(Default)]
struct Accum {
    num: f64,
    den: f64,
}

impl Accum {
    fn add(&mut self, value: f64, weight: f64) {
        self.num += value * weight;
        self.den += weight;
    }
}

/// Weighted-mean kernel shared by both differential channels: group records
/// by (member, aspect), take the stake-and-rater-weighted mean per cell, then
/// blend cells per member with the configured aspect weights.
fn aspect_blended_means<F>(
    records: &[RatingRecord],
    prior: &ReputationState,
    config: &EngineConfig,
    select: F,
) -> DifferentialMap
where
    F: Fn(&RatingRecord) -> bool,
{
    let mut cells: BTreeMap<MemberId, BTreeMap<Option<AspectId>, Accum>> = BTreeMap::new();
    for r in records.iter().filter(|r| select(r)) {
        let w = rater_weight(prior, config, &r.from);
        cells
            .entry(r.to.clone())
            .or_default()
            .entry(r.aspect.clone())
            .or_default()
            .add(r.value, r.weight * w);
    }

    let mut out = DifferentialMap::default();
    for (member, aspects) in cells {
        let mut blend = Accum::default();
        let mut usable = false;
        for (aspect, cell) in aspects {
            if cell.den == 0.0 {
                out.skipped.push(SkippedSlice {
                    member: member.clone(),
                    aspect,
                    category: None,
                    event: None,
                    reason: SkipReason::ZeroDenominator,
                });
                continue;
            }
            usable = true;
            blend.add(cell.num / cell.den, config.aspect_weight(aspect.as_ref()));
        }
        if blend.den > 0.0 {
            out.values.insert(member, blend.num / blend.den);
        } else if usable {
            // ratings existed but every contributing aspect weighs zero
            out.skipped.push(SkippedSlice {
                member,
                aspect: None,
                category: None,
                event: None,
                reason: SkipReason::ZeroAspectMass,
            });
        }
    }
    out
}

/// Differential endorsing reputation over one period: per rated member, the
/// aspect-blended weighted mean of endorsement values, weighted by stake and
/// by the raters' own floored prior reputations. Members with no ratings are
/// absent from the result.
pub fn differential_endorsing(
    records: &[RatingRecord],
    prior: &ReputationState,
    config: &EngineConfig,
) -> DifferentialMap {
    aspect_blended_means(records, prior, config, |r| r.kind == RatingKind::Endorse)
}

/// Differential transactional reputation: the same kernel with vote/payment
/// values weighted by their financial backing. Financial amounts are expected
/// to be already normalized when the config asks for it.
pub fn differential_transactional(
    records: &[RatingRecord],
    prior: &ReputationState,
    config: &EngineConfig,
) -> DifferentialMap {
    aspect_blended_means(records, prior, config, |r| r.kind != RatingKind::Endorse)
}

/// Fine-grained transactional differentials keyed by category, by aspect, and
/// by (aspect, event). Absent keys fall into the default slice.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FineGrained {
    pub by_category: BTreeMap<(MemberId, Option<CategoryId>), f64>,
    pub by_aspect: BTreeMap<(MemberId, Option<AspectId>), f64>,
    pub by_aspect_event: BTreeMap<(MemberId, Option<AspectId>, Option<EventId>), f64>,
    pub skipped: Vec<SkippedSlice>,
}

pub fn differential_fine_grained(
    records: &[RatingRecord],
    prior: &ReputationState,
    config: &EngineConfig,
) -> FineGrained {
    let mut out = FineGrained::default();

    // (member, category) slices blend their per-aspect means with the aspect weights.
    let mut cat_cells: BTreeMap<(MemberId, Option<CategoryId>), BTreeMap<Option<AspectId>, Accum>> =
        BTreeMap::new();
    // (member, aspect) and (member, aspect, event) slices pool directly.
    let mut aspect_cells: BTreeMap<(MemberId, Option<AspectId>), Accum> = BTreeMap::new();
    let mut event_cells: BTreeMap<(MemberId, Option<AspectId>, Option<EventId>), Accum> =
        BTreeMap::new();

    for r in records.iter().filter(|r| r.kind != RatingKind::Endorse) {
        let w = rater_weight(prior, config, &r.from) * r.weight;
        cat_cells
            .entry((r.to.clone(), r.category.clone()))
            .or_default()
            .entry(r.aspect.clone())
            .or_default()
            .add(r.value, w);
        aspect_cells
            .entry((r.to.clone(), r.aspect.clone()))
            .or_default()
            .add(r.value, w);
        event_cells
            .entry((r.to.clone(), r.aspect.clone(), r.event.clone()))
            .or_default()
            .add(r.value, w);
    }

    for ((member, category), aspects) in cat_cells {
        let mut blend = Accum::default();
        for (aspect, cell) in aspects {
            if cell.den == 0.0 {
                out.skipped.push(SkippedSlice {
                    member: member.clone(),
                    aspect,
                    category: category.clone(),
                    event: None,
                    reason: SkipReason::ZeroDenominator,
                });
                continue;
            }
            blend.add(cell.num / cell.den, config.aspect_weight(aspect.as_ref()));
        }
        if blend.den > 0.0 {
            out.by_category
                .insert((member, category), blend.num / blend.den);
        }
    }

    for ((member, aspect), cell) in aspect_cells {
        if cell.den == 0.0 {
            out.skipped.push(SkippedSlice {
                member,
                aspect,
                category: None,
                event: None,
                reason: SkipReason::ZeroDenominator,
            });
            continue;
        }
        out.by_aspect.insert((member, aspect), cell.num / cell.den);
    }
    for ((member, aspect, event), cell) in event_cells {
        if cell.den == 0.0 {
            continue; // already reported once via the aspect slice
        }
        out.by_aspect_event
            .insert((member, aspect, event), cell.num / cell.den);
    }
    out
}

/// Blend the endorsing and transactional differentials per member. A member
/// present in only one channel uses that channel alone; a channel whose blend
/// factor is zero contributes nothing. Members with no effective channel are
/// absent from the result.
pub fn blend_differential(
    endorsing: &BTreeMap<MemberId, f64>,
    transactional: &BTreeMap<MemberId, f64>,
    config: &EngineConfig,
) -> BTreeMap<MemberId, f64> {
    let mut out = BTreeMap::new();
    let members: std::collections::BTreeSet<&MemberId> =
        endorsing.keys().chain(transactional.keys()).collect();
    for m in members {
        let mut num = 0.0;
        let mut den = 0.0;
        if let Some(&ds) = endorsing.get(m) {
            num += config.endorse_blend * ds;
            den += config.endorse_blend;
        }
        if let Some(&df) = transactional.get(m) {
            num += config.transact_blend * df;
            den += config.transact_blend;
        }
        if den > 0.0 {
            out.insert(m.clone(), num / den);
        }
    }
    out
}

/// Scale a differential map by its maximum absolute value so the strongest
/// mover lands on ±1. An all-zero map stays all zero.
pub fn normalize_differential(differential: &BTreeMap<MemberId, f64>) -> BTreeMap<MemberId, f64> {
    let max_abs = differential
        .values()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs == 0.0 {
        return differential.keys().map(|m| (m.clone(), 0.0)).collect();
    }
    differential
        .iter()
        .map(|(m, v)| (m.clone(), v / max_abs))
        .collect()
}

/// Odd logarithmic compression of a differential value:
/// `sign(x) * log10(1 + |x|)`.
pub fn log_compress(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * (1.0 + x.abs()).log10()
    }
}

/// Apply [`log_compress`] to every entry of a differential map.
pub fn log_differential(differential: &BTreeMap<MemberId, f64>) -> BTreeMap<MemberId, f64> {
    differential
        .iter()
        .map(|(m, v)| (m.clone(), log_compress(*v)))
        .collect()
}

/// Blend the prior state with the normalized differential into the state at
/// `t_n`, weighting the two by decay-scaled interval lengths.
///
/// With both decay factors at 1 this is exactly
/// `((t_prev - t_0) * R_prev + (t_n - t_prev) * P) / (t_n - t_0)`.
/// Members appearing only in the differential start from the default
/// reputation; members with no new evidence decay toward the default through
/// the same blend (or hold their value when the config says so). Results are
/// clamped to [-1, 1].
pub fn update_reputation(
    prior: &ReputationState,
    normalized: &BTreeMap<MemberId, f64>,
    t_n: Timestamp,
    config: &EngineConfig,
) -> Result<ReputationState, EngineError> {
    if t_n <= prior.as_of || prior.as_of < prior.origin {
        return Err(EngineError::NonMonotonicTime {
            t_n,
            as_of: prior.as_of,
        });
    }
    let a = config.decay_prev * prior.as_of.since(prior.origin) as f64;
    let b = config.decay_new * t_n.since(prior.as_of) as f64;
    let blend = |prev: f64, new: f64| ((a * prev + b * new) / (a + b)).clamp(-1.0, 1.0);

    let mut entries = BTreeMap::new();
    for (m, &p) in normalized {
        let base = prior
            .reputation_of(m)
            .unwrap_or(config.default_reputation);
        entries.insert(m.clone(), blend(base, p));
    }
    for (m, &prev) in &prior.entries {
        if normalized.contains_key(m) {
            continue;
        }
        let r = if config.no_evidence_hold {
            prev
        } else {
            blend(prev, config.default_reputation)
        };
        entries.insert(m.clone(), r);
    }
    Ok(ReputationState {
        as_of: t_n,
        origin: prior.origin,
        entries,
    })
}

/// Everything a period computation derived on the way to the new state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DifferentialResult {
    /// Blended differential per member (before normalization).
    pub per_member: BTreeMap<MemberId, f64>,
    pub endorsing: BTreeMap<MemberId, f64>,
    pub transactional: BTreeMap<MemberId, f64>,
    pub fine_grained: FineGrained,
    pub skipped: Vec<SkippedSlice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodOutcome {
    pub state: ReputationState,
    pub differential: DifferentialResult,
    /// The normalized differential actually blended into the state.
    pub normalized: BTreeMap<MemberId, f64>,
    /// Records dropped because they fell outside `(prior.as_of, t_n]`.
    pub out_of_window: usize,
}

/// Run one full recalculation period: financial normalization, both
/// differential channels, fine-grained slices, blend, optional logarithmic
/// compression, max-normalization and the time-blended update.
///
/// The output depends only on the record multiset, never on presentation
/// order, and skipped slices are reported instead of aborting the period.
pub fn compute_period(
    records: &[RatingRecord],
    prior: &ReputationState,
    t_n: Timestamp,
    config: &EngineConfig,
) -> Result<PeriodOutcome, EngineError> {
    config.validate()?;
    if t_n <= prior.as_of {
        return Err(EngineError::NonMonotonicTime {
            t_n,
            as_of: prior.as_of,
        });
    }

    let mut batch: Vec<RatingRecord> = Vec::with_capacity(records.len());
    let mut out_of_window = 0usize;
    for r in records {
        if r.time > prior.as_of && r.time <= t_n {
            batch.push(r.clone());
        } else {
            out_of_window += 1;
        }
    }
    batch.sort_by(|a, b| {
        a.sort_key()
            .cmp(&b.sort_key())
            .then_with(|| a.aspect.cmp(&b.aspect))
            .then_with(|| a.category.cmp(&b.category))
            .then_with(|| a.event.cmp(&b.event))
            .then_with(|| a.value.total_cmp(&b.value))
            .then_with(|| a.weight.total_cmp(&b.weight))
    });

    if config.financial_log_normalize {
        let amounts: Vec<f64> = batch
            .iter()
            .filter(|r| r.kind == RatingKind::Finance && r.weight > 0.0)
            .map(|r| r.weight)
            .collect();
        if !amounts.is_empty() {
            let normalized = normalize_financial(&amounts)?;
            let mut it = normalized.into_iter();
            for r in batch
                .iter_mut()
                .filter(|r| r.kind == RatingKind::Finance && r.weight > 0.0)
            {
                r.weight = it.next().expect("one normalized weight per amount");
            }
        }
    }

    let endorsing = differential_endorsing(&batch, prior, config);
    let transactional = differential_transactional(&batch, prior, config);
    let fine_grained = differential_fine_grained(&batch, prior, config);
    let blended = blend_differential(&endorsing.values, &transactional.values, config);
    let pre_normalized = if config.use_log_differential {
        log_differential(&blended)
    } else {
        blended.clone()
    };
    let normalized = normalize_differential(&pre_normalized);
    let state = update_reputation(prior, &normalized, t_n, config)?;

    let mut skipped = endorsing.skipped;
    skipped.extend(transactional.skipped);
    skipped.extend(fine_grained.skipped.iter().cloned());

    Ok(PeriodOutcome {
        state,
        differential: DifferentialResult {
            per_member: blended,
            endorsing: endorsing.values,
            transactional: transactional.values,
            fine_grained,
            skipped,
        },
        normalized,
        out_of_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical_hash, RatingKind};

    const TOL: f64 = 1e-12;

    fn member(s: &str) -> MemberId {
        MemberId::from(s)
    }

    fn endorse(from: &str, to: &str, value: f64, stake: f64) -> RatingRecord {
        RatingRecord {
            kind: RatingKind::Endorse,
            from: member(from),
            to: member(to),
            time: Timestamp(1),
            value,
            weight: stake,
            aspect: None,
            category: None,
            event: None,
        }
    }

    fn vote(from: &str, to: &str, value: f64, backing: f64) -> RatingRecord {
        RatingRecord {
            kind: RatingKind::Vote,
            ..endorse(from, to, value, backing)
        }
    }

    fn prior_with(entries: &[(&str, f64)]) -> ReputationState {
        ReputationState {
            as_of: Timestamp(0),
            origin: Timestamp(0),
            entries: entries.iter().map(|(m, v)| (member(m), *v)).collect(),
        }
    }

    #[test]
    fn financial_normalization_matches_hand_values() {
        let out = normalize_financial(&[9.0, 99.0, 999.0]).unwrap();
        assert!((out[0] - 1.0 / 3.0).abs() < TOL);
        assert!((out[1] - 2.0 / 3.0).abs() < TOL);
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn financial_normalization_edge_cases() {
        assert_eq!(normalize_financial(&[42.0]).unwrap(), vec![1.0]);
        assert_eq!(
            normalize_financial(&[10.0, 10.0, 10.0]).unwrap(),
            vec![1.0, 1.0, 1.0]
        );
        assert_eq!(normalize_financial(&[]), Err(EngineError::EmptyBatch));
        assert_eq!(
            normalize_financial(&[1.0, 0.0]),
            Err(EngineError::NonPositiveAmount(0.0))
        );
    }

    #[test]
    fn single_rater_endorsement_is_identity() {
        let prior = prior_with(&[("j", 0.8)]);
        let out = differential_endorsing(
            &[endorse("j", "i", 1.0, 5.0)],
            &prior,
            &EngineConfig::default(),
        );
        assert!((out.values[&member("i")] - 1.0).abs() < TOL);
        assert!(out.skipped.is_empty());
    }

    #[test]
    fn two_raters_weighted_mean() {
        let prior = prior_with(&[("a", 1.0), ("b", 0.5)]);
        let out = differential_endorsing(
            &[endorse("a", "i", 1.0, 1.0), endorse("b", "i", -1.0, 1.0)],
            &prior,
            &EngineConfig::default(),
        );
        assert!((out.values[&member("i")] - 1.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn aspects_blend_with_equal_weights() {
        let prior = prior_with(&[("j", 1.0)]);
        let mut quality = endorse("j", "i", 0.2, 1.0);
        quality.aspect = Some(AspectId::from("quality"));
        let mut timeliness = endorse("j", "i", 0.8, 1.0);
        timeliness.aspect = Some(AspectId::from("timeliness"));
        let out =
            differential_endorsing(&[quality, timeliness], &prior, &EngineConfig::default());
        assert!((out.values[&member("i")] - 0.5).abs() < TOL);
    }

    #[test]
    fn zero_denominator_cell_is_skipped_not_fabricated() {
        let prior = prior_with(&[("j", 0.0)]); // floored weight 0 with default floor 0
        let out = differential_endorsing(
            &[endorse("j", "i", 1.0, 5.0)],
            &prior,
            &EngineConfig::default(),
        );
        assert!(out.values.is_empty());
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].reason, SkipReason::ZeroDenominator);
        assert_eq!(out.skipped[0].member, member("i"));
    }

    #[test]
    fn unknown_rater_weighs_in_at_default() {
        let prior = prior_with(&[]);
        let config = EngineConfig::default(); // default_reputation 0.5
        let out = differential_endorsing(&[endorse("j", "i", 0.4, 2.0)], &prior, &config);
        assert!((out.values[&member("i")] - 0.4).abs() < TOL);
    }

    #[test]
    fn negative_prior_reputation_never_contributes_negative_weight() {
        let prior = prior_with(&[("bad", -0.9), ("ok", 1.0)]);
        let out = differential_endorsing(
            &[endorse("bad", "i", -1.0, 100.0), endorse("ok", "i", 0.7, 1.0)],
            &prior,
            &EngineConfig::default(),
        );
        // bad's weight floors to 0, so only ok's rating counts
        assert!((out.values[&member("i")] - 0.7).abs() < TOL);
    }

    #[test]
    fn transactional_examples() {
        let prior = prior_with(&[("j", 1.0), ("k", 1.0)]);
        let config = EngineConfig::default();
        let out = differential_transactional(&[vote("j", "i", 0.5, 2.0)], &prior, &config);
        assert!((out.values[&member("i")] - 0.5).abs() < TOL);

        let out = differential_transactional(
            &[vote("j", "i", 1.0, 1.0), vote("k", "i", 0.0, 3.0)],
            &prior,
            &config,
        );
        assert!((out.values[&member("i")] - 0.25).abs() < TOL);

        // a floored-to-zero rater's vote contributes nothing
        let prior = prior_with(&[("j", 0.0), ("k", 1.0)]);
        let out = differential_transactional(
            &[vote("j", "i", -1.0, 10.0), vote("k", "i", 0.7, 1.0)],
            &prior,
            &config,
        );
        assert!((out.values[&member("i")] - 0.7).abs() < TOL);
    }

    #[test]
    fn fine_grained_single_record_defines_every_slice() {
        let prior = prior_with(&[("j", 1.0)]);
        let mut r = vote("j", "i", 0.6, 1.0);
        r.aspect = Some(AspectId::from("quality"));
        r.category = Some(CategoryId::from("pizza"));
        r.event = Some(EventId::from("e1"));
        let out = differential_fine_grained(&[r], &prior, &EngineConfig::default());
        let i = member("i");
        let k = Some(AspectId::from("quality"));
        let c = Some(CategoryId::from("pizza"));
        let e = Some(EventId::from("e1"));
        assert!((out.by_category[&(i.clone(), c)] - 0.6).abs() < TOL);
        assert!((out.by_aspect[&(i.clone(), k.clone())] - 0.6).abs() < TOL);
        assert!((out.by_aspect_event[&(i, k, e)] - 0.6).abs() < TOL);
    }

    #[test]
    fn fine_grained_slice_vs_pooled_means() {
        let prior = prior_with(&[("j", 1.0), ("k", 1.0)]);
        let aspect = Some(AspectId::from("quality"));
        let mut r1 = vote("j", "i", 0.2, 1.0);
        r1.aspect = aspect.clone();
        r1.category = Some(CategoryId::from("c1"));
        let mut r2 = vote("k", "i", 1.0, 1.0);
        r2.aspect = aspect.clone();
        r2.category = Some(CategoryId::from("c2"));
        let out = differential_fine_grained(&[r1, r2], &prior, &EngineConfig::default());
        let i = member("i");
        assert!(
            (out.by_category[&(i.clone(), Some(CategoryId::from("c1")))] - 0.2).abs() < TOL
        );
        assert!(
            (out.by_category[&(i.clone(), Some(CategoryId::from("c2")))] - 1.0).abs() < TOL
        );
        assert!((out.by_aspect[&(i, aspect)] - 0.6).abs() < TOL);
    }

    #[test]
    fn fine_grained_missing_category_uses_default_slice() {
        let prior = prior_with(&[("j", 1.0)]);
        let out = differential_fine_grained(
            &[vote("j", "i", 0.3, 1.0)],
            &prior,
            &EngineConfig::default(),
        );
        assert!((out.by_category[&(member("i"), None)] - 0.3).abs() < TOL);
    }

    #[test]
    fn blend_examples() {
        let config = EngineConfig::default(); // S = F = 1
        let ds: BTreeMap<_, _> = [(member("i"), 0.4)].into_iter().collect();
        let df: BTreeMap<_, _> = [(member("i"), 0.8)].into_iter().collect();
        let dp = blend_differential(&ds, &df, &config);
        assert!((dp[&member("i")] - 0.6).abs() < TOL);

        let zero_f = EngineConfig {
            transact_blend: 0.0,
            ..EngineConfig::default()
        };
        let dp = blend_differential(&ds, &df, &zero_f);
        assert!((dp[&member("i")] - 0.4).abs() < TOL);

        // member present only in the transactional channel
        let only_df: BTreeMap<_, _> = [(member("x"), 0.9)].into_iter().collect();
        let dp = blend_differential(&ds, &only_df, &config);
        assert!((dp[&member("x")] - 0.9).abs() < TOL);
        // ... but a channel blended at zero contributes nothing at all
        let dp = blend_differential(&ds, &only_df, &zero_f);
        assert!(!dp.contains_key(&member("x")));
    }

    #[test]
    fn normalization_examples() {
        let dp: BTreeMap<_, _> = [
            (member("a"), 0.2),
            (member("b"), -0.5),
            (member("c"), 0.1),
        ]
        .into_iter()
        .collect();
        let p = normalize_differential(&dp);
        assert!((p[&member("a")] - 0.4).abs() < TOL);
        assert!((p[&member("b")] + 1.0).abs() < TOL);
        assert!((p[&member("c")] - 0.2).abs() < TOL);

        let zeros: BTreeMap<_, _> = [(member("a"), 0.0)].into_iter().collect();
        assert_eq!(normalize_differential(&zeros)[&member("a")], 0.0);

        let single: BTreeMap<_, _> = [(member("a"), -0.3)].into_iter().collect();
        assert!((normalize_differential(&single)[&member("a")] + 1.0).abs() < TOL);
    }

    #[test]
    fn log_compression_values_and_shape() {
        assert_eq!(log_compress(0.0), 0.0);
        assert!((log_compress(1.0) - 0.3010299956639812).abs() < TOL);
        assert!((log_compress(-1.0) + 0.3010299956639812).abs() < TOL);
        // odd, shrinking, bounded
        for i in 1..=100 {
            let x = i as f64 / 100.0;
            assert!((log_compress(-x) + log_compress(x)).abs() < TOL);
            assert!(log_compress(x) <= x);
            assert!(log_compress(x) > 0.0);
            assert!(log_compress(x) <= 0.3010299956639812);
            assert!(log_compress(x) > log_compress(x - 0.01));
        }
    }

    #[test]
    fn update_examples() {
        let config = EngineConfig::default();
        let prior = ReputationState {
            as_of: Timestamp(1),
            origin: Timestamp(0),
            entries: [(member("i"), 0.4)].into_iter().collect(),
        };
        let p: BTreeMap<_, _> = [(member("i"), 0.8)].into_iter().collect();
        let next = update_reputation(&prior, &p, Timestamp(2), &config).unwrap();
        assert!((next.entries[&member("i")] - 0.6).abs() < TOL);

        // first period: prior interval is empty, so the differential wins outright
        let genesis = ReputationState::genesis(Timestamp(0));
        let next = update_reputation(&genesis, &p, Timestamp(3), &config).unwrap();
        assert!((next.entries[&member("i")] - 0.8).abs() < TOL);

        let prior = ReputationState {
            as_of: Timestamp(9),
            origin: Timestamp(0),
            entries: [(member("i"), 0.5)].into_iter().collect(),
        };
        let p: BTreeMap<_, _> = [(member("i"), 1.0)].into_iter().collect();
        let next = update_reputation(&prior, &p, Timestamp(10), &config).unwrap();
        assert!((next.entries[&member("i")] - 0.55).abs() < TOL);
    }

    #[test]
    fn update_rejects_non_monotonic_time() {
        let prior = ReputationState {
            as_of: Timestamp(5),
            origin: Timestamp(0),
            entries: BTreeMap::new(),
        };
        let p = BTreeMap::new();
        assert!(matches!(
            update_reputation(&prior, &p, Timestamp(5), &EngineConfig::default()),
            Err(EngineError::NonMonotonicTime { .. })
        ));
    }

    #[test]
    fn no_evidence_members_decay_toward_default() {
        let config = EngineConfig::default(); // R_d = 0.5
        let prior = ReputationState {
            as_of: Timestamp(1),
            origin: Timestamp(0),
            entries: [(member("quiet"), 1.0)].into_iter().collect(),
        };
        let next = update_reputation(&prior, &BTreeMap::new(), Timestamp(2), &config).unwrap();
        assert!((next.entries[&member("quiet")] - 0.75).abs() < TOL);

        let hold = EngineConfig {
            no_evidence_hold: true,
            ..config
        };
        let next = update_reputation(&prior, &BTreeMap::new(), Timestamp(2), &hold).unwrap();
        assert!((next.entries[&member("quiet")] - 1.0).abs() < TOL);
    }

    #[test]
    fn period_with_no_ratings_carries_prior_through_decay() {
        let config = EngineConfig::default();
        let prior = ReputationState {
            as_of: Timestamp(1),
            origin: Timestamp(0),
            entries: [(member("a"), 0.9), (member("b"), 0.1)].into_iter().collect(),
        };
        let out = compute_period(&[], &prior, Timestamp(2), &config).unwrap();
        assert_eq!(out.state.entries.len(), 2);
        assert!((out.state.entries[&member("a")] - 0.7).abs() < TOL);
        assert!((out.state.entries[&member("b")] - 0.3).abs() < TOL);
        assert!(out.differential.per_member.is_empty());
    }

    #[test]
    fn single_endorsement_moves_member_toward_rating() {
        let config = EngineConfig::default();
        let genesis = ReputationState::genesis(Timestamp(0));
        let out = compute_period(
            &[endorse("j", "i", 1.0, 3.0)],
            &genesis,
            Timestamp(1),
            &config,
        )
        .unwrap();
        // single rater at default reputation: dS = 1, normalized to 1, first period
        assert!((out.state.entries[&member("i")] - 1.0).abs() < TOL);
    }

    #[test]
    fn period_hash_ignores_record_order() {
        let config = EngineConfig::default();
        let genesis = ReputationState::genesis(Timestamp(0));
        let mut records = vec![
            endorse("a", "i", 0.9, 2.0),
            endorse("b", "i", -0.4, 1.0),
            vote("c", "i", 0.3, 7.0),
            vote("a", "k", 0.8, 1.0),
            RatingRecord {
                kind: RatingKind::Finance,
                ..vote("b", "k", 1.0, 250.0)
            },
        ];
        let forward = compute_period(&records, &genesis, Timestamp(1), &config).unwrap();
        records.reverse();
        records.swap(0, 2);
        let shuffled = compute_period(&records, &genesis, Timestamp(1), &config).unwrap();
        let h1 = canonical_hash(&forward.state, config.hash_precision).unwrap();
        let h2 = canonical_hash(&shuffled.state, config.hash_precision).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(forward.state, shuffled.state);
    }

    #[test]
    fn out_of_window_records_are_reported_not_counted() {
        let config = EngineConfig::default();
        let prior = ReputationState {
            as_of: Timestamp(5),
            origin: Timestamp(0),
            entries: BTreeMap::new(),
        };
        let mut early = endorse("j", "i", 1.0, 1.0);
        early.time = Timestamp(2);
        let mut ok = endorse("j", "i", 0.5, 1.0);
        ok.time = Timestamp(6);
        let out = compute_period(&[early, ok], &prior, Timestamp(10), &config).unwrap();
        assert_eq!(out.out_of_window, 1);
        assert!((out.differential.endorsing[&member("i")] - 0.5).abs() < TOL);
    }
}

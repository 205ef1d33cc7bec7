//! Closed-form communication-overhead models for the two architectures,
//! plus parameter sweeps with CSV emission.
//!
//! Costs cover the name-resolution phase only (scope advertisement and the
//! first-contact request/answer round trips); content transfer itself is
//! identical in both architectures and excluded. All results are exact
//! rationals in units of l.

use num_rational::Ratio;
use thiserror::Error;

use crate::engine::format_ratio;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("path length parameter l must be at least 1")]
    ZeroL,

    #[error("sweep step must be positive")]
    ZeroStep,

    #[error("sweep range is empty")]
    EmptyRange,
}

/// Workload and topology parameters shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisParams {
    pub scopes: u64,
    pub advertisers: u64,
    pub subscribers: u64,
    /// Unit path length: node-to-center paths have l hops, node-to-node 2l.
    pub l: u64,
    /// Whether the advertiser itself receives the group advertisement (one
    /// reflection link at its attachment switch). With it, a scope
    /// advertisement to all N = advertisers + subscribers nodes costs
    /// `1 + l*N` hops; without it, `l*N`.
    pub include_sender_in_tree: bool,
    /// Requests beyond the first per (subscriber, scope) reuse cached
    /// routes in both architectures, so this does not affect the totals.
    pub items_per_scope_per_subscriber: u64,
    /// Cost in l-units of one first-contact resolution round trip.
    pub resolution_round_trip_l_units: u64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            scopes: 0,
            advertisers: 0,
            subscribers: 0,
            l: 1,
            include_sender_in_tree: true,
            items_per_scope_per_subscriber: 1,
            resolution_round_trip_l_units: 2,
        }
    }
}

impl AnalysisParams {
    pub fn new(scopes: u64, advertisers: u64, subscribers: u64, l: u64) -> AnalysisParams {
        AnalysisParams {
            scopes,
            advertisers,
            subscribers,
            l,
            ..AnalysisParams::default()
        }
    }

    fn check(&self) -> Result<(), AnalysisError> {
        if self.l == 0 {
            return Err(AnalysisError::ZeroL);
        }
        Ok(())
    }
}

/// Per-term breakdown of one model evaluation, in l-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadReport {
    pub advertisement: Ratio<u64>,
    pub resolution: Ratio<u64>,
}

impl OverheadReport {
    pub fn total(&self) -> Ratio<u64> {
        self.advertisement + self.resolution
    }
}

/// Centralized rendezvous baseline.
///
/// Each scope is advertised once to the rendezvous point over an l-hop
/// path; each (subscriber, scope) pair pays one request/answer round trip
/// of 2l before its first item. Later requests in the same scope skip the
/// rendezvous entirely.
pub fn point_report(p: &AnalysisParams) -> Result<OverheadReport, AnalysisError> {
    p.check()?;
    Ok(OverheadReport {
        advertisement: Ratio::from_integer(p.scopes),
        resolution: Ratio::from_integer(2 * p.subscribers * p.scopes),
    })
}

pub fn point_model(p: &AnalysisParams) -> Result<Ratio<u64>, AnalysisError> {
    point_report(p).map(|r| r.total())
}

/// Edge architecture.
///
/// Each scope is advertised once over the multicast tree spanning all
/// N = advertisers + subscribers nodes, costing `1 + l*N` hops (`l*N`
/// when the sender is excluded). Each subscriber pays one resolution round
/// trip per provider it ends up contacting; with scopes spread evenly over
/// the advertisers that is `min(scopes, advertisers)` providers.
pub fn edge_report(p: &AnalysisParams) -> Result<OverheadReport, AnalysisError> {
    p.check()?;
    let population = p.advertisers + p.subscribers;
    let tree_hops = if p.include_sender_in_tree {
        1 + p.l * population
    } else {
        p.l * population
    };
    let providers_contacted = p.scopes.min(p.advertisers);
    Ok(OverheadReport {
        advertisement: Ratio::new(p.scopes * tree_hops, p.l),
        resolution: Ratio::from_integer(
            p.subscribers * providers_contacted * p.resolution_round_trip_l_units,
        ),
    })
}

pub fn edge_model(p: &AnalysisParams) -> Result<Ratio<u64>, AnalysisError> {
    edge_report(p).map(|r| r.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptParam {
    Advertisers,
    Subscribers,
    Scopes,
}

impl SweptParam {
    pub fn parse(s: &str) -> Option<SweptParam> {
        match s {
            "advertisers" => Some(SweptParam::Advertisers),
            "subscribers" => Some(SweptParam::Subscribers),
            "scopes" => Some(SweptParam::Scopes),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweptParam::Advertisers => "advertisers",
            SweptParam::Subscribers => "subscribers",
            SweptParam::Scopes => "scopes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub varied: &'static str,
    pub value: u64,
    pub point_l_units: Ratio<u64>,
    pub edge_l_units: Ratio<u64>,
}

/// Evaluates both models while one parameter runs over
/// `from, from+step, ..., <=to`; the others stay fixed at `base`.
pub fn sweep(
    vary: SweptParam,
    from: u64,
    to: u64,
    step: u64,
    base: &AnalysisParams,
) -> Result<Vec<SweepRow>, AnalysisError> {
    if step == 0 {
        return Err(AnalysisError::ZeroStep);
    }
    if from > to {
        return Err(AnalysisError::EmptyRange);
    }
    let mut rows = Vec::new();
    let mut value = from;
    while value <= to {
        let mut p = *base;
        match vary {
            SweptParam::Advertisers => p.advertisers = value,
            SweptParam::Subscribers => p.subscribers = value,
            SweptParam::Scopes => p.scopes = value,
        }
        rows.push(SweepRow {
            varied: vary.name(),
            value,
            point_l_units: point_model(&p)?,
            edge_l_units: edge_model(&p)?,
        });
        value += step;
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "varied,value,point_l_units,edge_l_units";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.varied,
            row.value,
            format_ratio(row.point_l_units),
            format_ratio(row.edge_l_units),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: u64) -> Ratio<u64> {
        Ratio::from_integer(n)
    }

    #[test]
    fn point_zero_scopes_is_zero() {
        let p = AnalysisParams::new(0, 10, 10, 2);
        assert_eq!(point_model(&p).unwrap(), ratio(0));
    }

    #[test]
    fn point_single_flow_is_three_units() {
        for l in [1, 2, 5] {
            let p = AnalysisParams::new(1, 1, 1, l);
            assert_eq!(point_model(&p).unwrap(), ratio(3));
        }
    }

    #[test]
    fn point_large_case() {
        let p = AnalysisParams::new(1000, 100, 100, 1);
        assert_eq!(point_model(&p).unwrap(), ratio(201_000));
    }

    #[test]
    fn edge_zero_workload_is_zero() {
        let p = AnalysisParams::new(0, 0, 0, 3);
        assert_eq!(edge_model(&p).unwrap(), ratio(0));
    }

    #[test]
    fn edge_single_flow_hand_trace() {
        // One advertisement over a 3-hop tree plus one 2-hop resolution.
        let p = AnalysisParams::new(1, 1, 1, 1);
        assert_eq!(edge_model(&p).unwrap(), ratio(5));
    }

    #[test]
    fn edge_large_case_beats_point_with_many_subscribers() {
        let p = AnalysisParams::new(1000, 100, 1000, 1);
        assert_eq!(edge_model(&p).unwrap(), ratio(1_301_000));
        assert_eq!(point_model(&p).unwrap(), ratio(2_001_000));
        assert!(edge_model(&p).unwrap() < point_model(&p).unwrap());
    }

    #[test]
    fn zero_l_is_rejected() {
        let p = AnalysisParams {
            l: 0,
            ..AnalysisParams::default()
        };
        assert_eq!(point_model(&p), Err(AnalysisError::ZeroL));
        assert_eq!(edge_model(&p), Err(AnalysisError::ZeroL));
    }

    #[test]
    fn models_are_linear_in_scopes_and_monotone() {
        let base = AnalysisParams::new(100, 7, 13, 2);
        let double = AnalysisParams::new(200, 7, 13, 2);
        // Resolution terms saturate at min(S, A), so compare the scope-linear
        // advertisement terms directly.
        assert_eq!(
            edge_report(&double).unwrap().advertisement,
            edge_report(&base).unwrap().advertisement * ratio(2)
        );
        assert_eq!(
            point_report(&double).unwrap().advertisement,
            point_report(&base).unwrap().advertisement * ratio(2)
        );

        let mut prev_edge = ratio(0);
        let mut prev_point = ratio(0);
        for s in [0, 1, 5, 50, 500] {
            let p = AnalysisParams::new(s, 7, 13, 2);
            let e = edge_model(&p).unwrap();
            let pt = point_model(&p).unwrap();
            assert!(e >= prev_edge);
            assert!(pt >= prev_point);
            prev_edge = e;
            prev_point = pt;
        }
    }

    #[test]
    fn crossover_direction_follows_the_subscriber_advertiser_ratio() {
        // More subscribers than advertisers: the edge architecture wins.
        let many_subs = AnalysisParams::new(1000, 100, 800, 1);
        assert!(edge_model(&many_subs).unwrap() < point_model(&many_subs).unwrap());
        // More advertisers than subscribers: the rendezvous baseline wins.
        let many_advs = AnalysisParams::new(1000, 800, 100, 1);
        assert!(edge_model(&many_advs).unwrap() > point_model(&many_advs).unwrap());
    }

    #[test]
    fn sweep_produces_one_row_per_value() {
        let base = AnalysisParams::new(1000, 100, 100, 1);
        let rows = sweep(SweptParam::Subscribers, 100, 1000, 100, &base).unwrap();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].value, 100);
        assert_eq!(rows[9].value, 1000);
        assert!(rows.iter().all(|r| r.varied == "subscribers"));

        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("varied,value,point_l_units,edge_l_units\n"));
        assert_eq!(csv.lines().count(), 11);
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        let base = AnalysisParams::new(10, 1, 1, 1);
        assert_eq!(
            sweep(SweptParam::Scopes, 1, 10, 0, &base),
            Err(AnalysisError::ZeroStep)
        );
        assert_eq!(
            sweep(SweptParam::Scopes, 10, 1, 1, &base),
            Err(AnalysisError::EmptyRange)
        );
    }

    #[test]
    fn scope_ratio_approaches_a_constant_when_populations_match() {
        let at = |s: u64| {
            let p = AnalysisParams::new(s, 100, 100, 1);
            (edge_model(&p).unwrap(), point_model(&p).unwrap())
        };
        let (e1, p1) = at(10_000);
        let (e2, p2) = at(1_000_000);
        let r1 = *(e1 / p1).numer() as f64 / *(e1 / p1).denom() as f64;
        let r2 = *(e2 / p2).numer() as f64 / *(e2 / p2).denom() as f64;
        // Both linear in scopes, so the ratio settles near 201/201 = 1.
        assert!((r2 - 1.0).abs() < 0.01);
        assert!((r2 - 1.0).abs() < (r1 - 1.0).abs() + 1e-12);
    }
}

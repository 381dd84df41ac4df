use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::page::{PageCategory, PAGE_COUNT};
use crate::error::{Error, Result};

/// Observable covariates at step `t` of a session.
///
/// Every entry is known before the page at step `t` is drawn: the counters
/// refer to the page the user is leaving, never to the page being predicted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CovariateVector {
    /// Pages visited so far, `t` at step `t` (1-based).
    pub visit_depth: f64,
    /// Seconds spent on the previous page; 0 at the first step.
    pub time_span: f64,
    /// Visits so far to the category of the previous page, including that
    /// visit; 0 at the first step.
    pub cum_same_page: f64,
    /// 1 if the session started on a Saturday or Sunday.
    pub weekend: f64,
    /// Binary customer-type proxy.
    pub customer_type: f64,
}

/// Names a single covariate; models select a subset in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovariateKind {
    VisitDepth,
    TimeSpan,
    CumSamePage,
    Weekend,
    CustomerType,
}

impl CovariateKind {
    pub const ALL: [CovariateKind; 5] = [
        CovariateKind::VisitDepth,
        CovariateKind::TimeSpan,
        CovariateKind::CumSamePage,
        CovariateKind::Weekend,
        CovariateKind::CustomerType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CovariateKind::VisitDepth => "visit_depth",
            CovariateKind::TimeSpan => "time_span",
            CovariateKind::CumSamePage => "cum_same_page",
            CovariateKind::Weekend => "weekend",
            CovariateKind::CustomerType => "customer_type",
        }
    }
}

impl fmt::Display for CovariateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovariateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(alloc::format!("unknown covariate `{s}`")))
    }
}

impl CovariateVector {
    #[inline]
    pub fn get(&self, kind: CovariateKind) -> f64 {
        match kind {
            CovariateKind::VisitDepth => self.visit_depth,
            CovariateKind::TimeSpan => self.time_span,
            CovariateKind::CumSamePage => self.cum_same_page,
            CovariateKind::Weekend => self.weekend,
            CovariateKind::CustomerType => self.customer_type,
        }
    }

    /// Writes the selected covariates, in order, into `out`.
    pub fn project_into(&self, kinds: &[CovariateKind], out: &mut Vec<f64>) {
        out.clear();
        out.extend(kinds.iter().map(|&k| self.get(k)));
    }

    pub fn validate(&self) -> Result<()> {
        let is_count = |x: f64| x.is_finite() && x >= 0.0 && libm::floor(x) == x;
        let is_flag = |x: f64| x == 0.0 || x == 1.0;
        if !is_count(self.visit_depth) || !is_count(self.cum_same_page) {
            return Err(Error::Domain("covariate counts must be non-negative integers".into()));
        }
        if !(self.time_span.is_finite() && self.time_span >= 0.0) {
            return Err(Error::Domain("time_span must be finite and non-negative".into()));
        }
        if !is_flag(self.weekend) || !is_flag(self.customer_type) {
            return Err(Error::Domain("indicator covariates must be 0 or 1".into()));
        }
        Ok(())
    }
}

const DAY_MS: i64 = 86_400_000;

/// Day of week of a Unix time in milliseconds (UTC), 0 = Sunday.
pub fn weekday(ms: i64) -> u8 {
    // 1970-01-01 was a Thursday
    (ms.div_euclid(DAY_MS) + 4).rem_euclid(7) as u8
}

/// Whether a Unix time in milliseconds (UTC) falls on a Saturday or Sunday.
pub fn is_weekend(ms: i64) -> bool {
    matches!(weekday(ms), 0 | 6)
}

/// The earliest time `t >= ms`, shifted by whole days, whose weekend flag
/// equals `weekend`.
pub fn align_to_weekend(ms: i64, weekend: bool) -> i64 {
    let mut t = ms;
    while is_weekend(t) != weekend {
        t += DAY_MS;
    }
    t
}

/// Incremental covariate computation without lookahead.
///
/// Call [`CovariateTracker::next`] to get the covariates for the upcoming
/// step, then [`CovariateTracker::observe`] once its page is known.
#[derive(Debug, Clone)]
pub struct CovariateTracker {
    weekend: bool,
    customer_type: bool,
    step: usize,
    counts: [u32; PAGE_COUNT],
    last: Option<PageCategory>,
}

impl CovariateTracker {
    pub fn new(weekend: bool, customer_type: bool) -> Self {
        Self {
            weekend,
            customer_type,
            step: 0,
            counts: [0; PAGE_COUNT],
            last: None,
        }
    }

    /// Covariates for the next step; `time_span` is the dwell time on the
    /// previous page in seconds and is forced to 0 at the first step.
    pub fn next(&self, time_span: f64) -> CovariateVector {
        let cum_same_page = self.last.map_or(0, |p| self.counts[p.index()]);
        CovariateVector {
            visit_depth: (self.step + 1) as f64,
            time_span: if self.step == 0 { 0.0 } else { time_span },
            cum_same_page: f64::from(cum_same_page),
            weekend: f64::from(u8::from(self.weekend)),
            customer_type: f64::from(u8::from(self.customer_type)),
        }
    }

    pub fn observe(&mut self, page: PageCategory) {
        self.counts[page.index()] += 1;
        self.last = Some(page);
        self.step += 1;
    }
}

/// Covariates for every step of a session from its raw rows.
///
/// `arrivals_ms` are page arrival times in milliseconds; step `t` only reads
/// rows `1..=t`.
pub fn compute_covariates(
    pages: &[PageCategory],
    arrivals_ms: &[i64],
    weekend: bool,
    customer_type: bool,
) -> Result<Vec<CovariateVector>> {
    if pages.len() != arrivals_ms.len() {
        return Err(Error::DimensionMismatch {
            field: "arrivals_ms",
            expected: pages.len(),
            found: arrivals_ms.len(),
        });
    }
    let mut tracker = CovariateTracker::new(weekend, customer_type);
    let mut out = Vec::with_capacity(pages.len());
    for (t, &page) in pages.iter().enumerate() {
        let span = if t == 0 {
            0.0
        } else {
            let delta = arrivals_ms[t] - arrivals_ms[t - 1];
            if delta < 0 {
                return Err(Error::InvalidSession(alloc::format!(
                    "negative time delta at step {}",
                    t + 1
                )));
            }
            delta as f64 / 1000.0
        };
        out.push(tracker.next(span));
        tracker.observe(page);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use PageCategory::*;

    #[test]
    fn first_step_has_zero_counters() {
        let cov = compute_covariates(&[Home, Product], &[0, 4_000], true, false).unwrap();
        assert_eq!(
            cov[0],
            CovariateVector {
                visit_depth: 1.0,
                time_span: 0.0,
                cum_same_page: 0.0,
                weekend: 1.0,
                customer_type: 0.0
            }
        );
        assert_eq!(cov[1].time_span, 4.0);
        assert_eq!(cov[1].visit_depth, 2.0);
    }

    #[test]
    fn repeated_visits_increment_by_one() {
        let pages = [Product, Product, Product, Product];
        let cov = compute_covariates(&pages, &[0, 1, 2, 3], false, true).unwrap();
        let counts: Vec<f64> = cov.iter().map(|c| c.cum_same_page).collect();
        assert_eq!(counts, [0.0, 1.0, 2.0, 3.0]);
        assert!(cov.iter().all(|c| c.customer_type == 1.0));
    }

    #[test]
    fn negative_delta_is_rejected() {
        assert!(compute_covariates(&[Home, Home], &[10, 5], false, false).is_err());
    }

    #[test]
    fn truncation_does_not_change_earlier_covariates() {
        let pages = [Home, Product, Home, Overview, Product, Home];
        let arr = [0, 1500, 4000, 4100, 9000, 12000];
        let full = compute_covariates(&pages, &arr, false, false).unwrap();
        for t in 1..pages.len() {
            let part = compute_covariates(&pages[..t], &arr[..t], false, false).unwrap();
            assert_eq!(&full[..t], &part[..]);
        }
    }

    #[test]
    fn validation_flags_bad_entries() {
        let mut c = CovariateVector { visit_depth: 1.0, ..Default::default() };
        assert!(c.validate().is_ok());
        c.weekend = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn weekday_of_known_dates() {
        // 2020-01-01 (Wednesday), 2020-01-04 (Saturday), 2020-01-05 (Sunday)
        assert_eq!(weekday(1_577_836_800_000), 3);
        assert!(is_weekend(1_578_096_000_000));
        assert!(is_weekend(1_578_182_400_000 + 3_600_000));
        assert!(!is_weekend(1_578_268_800_000));
        assert_eq!(align_to_weekend(1_577_836_800_000, true), 1_578_096_000_000);
        assert_eq!(align_to_weekend(1_578_096_000_000, false), 1_578_268_800_000);
        assert_eq!(align_to_weekend(5, false), 5);
    }
}

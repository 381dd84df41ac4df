use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::covariates::CovariateVector;
use super::page::PageCategory;
use crate::error::{Error, Result};

/// Shortest session kept by ingestion.
pub const MIN_SESSION_LEN: usize = 3;
/// Longest session kept by ingestion and produced by the sampler by default.
pub const MAX_SESSION_LEN: usize = 50;

/// One user's ordered page sequence with per-step covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub pages: Vec<PageCategory>,
    pub covariates: Vec<CovariateVector>,
    /// Demographic vector; entry 0 is the intercept and equals 1.
    pub demographics: Vec<f64>,
    /// Session start as Unix time in milliseconds.
    pub start_time_ms: i64,
}

impl Session {
    /// Builds a session with cold-start demographics `[1]`.
    pub fn new(
        session_id: impl Into<String>,
        pages: Vec<PageCategory>,
        covariates: Vec<CovariateVector>,
        start_time_ms: i64,
    ) -> Result<Self> {
        let session_id = session_id.into();
        let session = Self {
            user_id: session_id.clone(),
            session_id,
            pages,
            covariates,
            demographics: vec![1.0],
            start_time_ms,
        };
        session.validate()?;
        Ok(session)
    }

    /// Checks structural invariants. Length bounds are an ingestion filter
    /// and are not enforced here.
    pub fn validate(&self) -> Result<()> {
        if self.pages.is_empty() {
            return Err(Error::InvalidSession(alloc::format!(
                "session `{}` has no pages",
                self.session_id
            )));
        }
        if self.pages.len() != self.covariates.len() {
            return Err(Error::DimensionMismatch {
                field: "covariates",
                expected: self.pages.len(),
                found: self.covariates.len(),
            });
        }
        if let Some(pos) = self.pages.iter().position(|p| p.is_terminal()) {
            if pos + 1 != self.pages.len() {
                return Err(Error::InvalidSession(alloc::format!(
                    "session `{}` has Exit at step {} of {}",
                    self.session_id,
                    pos + 1,
                    self.pages.len()
                )));
            }
        }
        if self.demographics.first() != Some(&1.0) {
            return Err(Error::InvalidSession(alloc::format!(
                "session `{}` demographics must start with the intercept 1",
                self.session_id
            )));
        }
        for c in &self.covariates {
            c.validate()?;
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pages.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn ends_with_exit(&self) -> bool {
        self.pages.last().is_some_and(|p| p.is_terminal())
    }

    /// A session converts when it reaches a Checkout page.
    pub fn converted(&self) -> bool {
        self.pages.contains(&PageCategory::Checkout)
    }

    /// The first `t` steps of the session.
    pub fn prefix(&self, t: usize) -> Session {
        let t = t.min(self.len());
        Session {
            session_id: self.session_id.clone(),
            user_id: self.user_id.clone(),
            pages: self.pages[..t].to_vec(),
            covariates: self.covariates[..t].to_vec(),
            demographics: self.demographics.clone(),
            start_time_ms: self.start_time_ms,
        }
    }
}

/// Whether a session length survives the 3..=50 ingestion filter.
pub fn within_length_bounds(len: usize) -> bool {
    (MIN_SESSION_LEN..=MAX_SESSION_LEN).contains(&len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::covariates::compute_covariates;
    use PageCategory::*;

    fn session(pages: Vec<PageCategory>) -> Result<Session> {
        let arr: Vec<i64> = (0..pages.len() as i64).map(|i| i * 1000).collect();
        let cov = compute_covariates(&pages, &arr, false, false)?;
        Session::new("s", pages, cov, 0)
    }

    #[test]
    fn exit_only_at_the_end() {
        assert!(session(vec![Home, Product, Exit]).is_ok());
        assert!(session(vec![Home, Exit, Product]).is_err());
        assert!(session(vec![]).is_err());
    }

    #[test]
    fn conversion_means_checkout() {
        assert!(session(vec![Home, Checkout, Order]).unwrap().converted());
        assert!(!session(vec![Home, Order, Exit]).unwrap().converted());
    }

    #[test]
    fn length_filter_bounds() {
        assert!(!within_length_bounds(2));
        assert!(within_length_bounds(3));
        assert!(within_length_bounds(50));
        assert!(!within_length_bounds(51));
    }
}

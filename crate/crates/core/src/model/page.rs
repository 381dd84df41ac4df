use core::fmt;
use core::str::FromStr;

use crate::error::Error;

/// Number of page categories, including the terminal `Exit` symbol.
pub const PAGE_COUNT: usize = 9;

/// Observation alphabet of a session.
///
/// `Exit` is terminal: it may only be the last page of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PageCategory {
    Home,
    Account,
    Overview,
    Product,
    MarketingPage,
    Community,
    Checkout,
    Order,
    Exit,
}

impl PageCategory {
    /// Canonical order; the index of a page is its position here.
    pub const ALL: [PageCategory; PAGE_COUNT] = [
        PageCategory::Home,
        PageCategory::Account,
        PageCategory::Overview,
        PageCategory::Product,
        PageCategory::MarketingPage,
        PageCategory::Community,
        PageCategory::Checkout,
        PageCategory::Order,
        PageCategory::Exit,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PageCategory::Home => "Home",
            PageCategory::Account => "Account",
            PageCategory::Overview => "Overview",
            PageCategory::Product => "Product",
            PageCategory::MarketingPage => "MarketingPage",
            PageCategory::Community => "Community",
            PageCategory::Checkout => "Checkout",
            PageCategory::Order => "Order",
            PageCategory::Exit => "Exit",
        }
    }

    #[inline]
    pub fn is_terminal(self) -> bool {
        self == PageCategory::Exit
    }

    /// Checkout and Order pages mark a purchase.
    #[inline]
    pub fn is_purchase(self) -> bool {
        matches!(self, PageCategory::Checkout | PageCategory::Order)
    }
}

impl fmt::Display for PageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PageCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(alloc::format!("unknown page symbol `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn names_round_trip_bijectively() {
        let mut seen = std::collections::HashSet::new();
        for (i, p) in PageCategory::ALL.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(PageCategory::from_index(i), Some(*p));
            assert_eq!(p.to_string().parse::<PageCategory>().unwrap(), *p);
            assert!(seen.insert(p.name()));
        }
        assert_eq!(seen.len(), PAGE_COUNT);
        assert!(PageCategory::from_index(PAGE_COUNT).is_none());
        assert!("Cart".parse::<PageCategory>().is_err());
    }

    #[test]
    fn only_exit_is_terminal() {
        let terminal: Vec<_> = PageCategory::ALL.iter().filter(|p| p.is_terminal()).collect();
        assert_eq!(terminal, [&PageCategory::Exit]);
    }
}

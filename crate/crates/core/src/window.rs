//! Calendar windows used to bucket segments, shares and estimates.

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Daily,
    Monthly,
    Quarterly,
    Yearly,
    /// Explicit half-open `[start, end)` eras; dates outside every era are
    /// not assigned.
    Eras(Vec<(NaiveDate, NaiveDate)>),
}

impl Window {
    /// Before 2016, 2016 through 2020, and after 2020.
    pub fn election_eras() -> Self {
        let d = |y| NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
        Window::Eras(vec![(d(2000), d(2016)), (d(2016), d(2021)), (d(2021), d(2031))])
    }

    /// Half-open bounds of the window containing `date`.
    pub fn bounds(&self, date: NaiveDate) -> Option<(NaiveDate, NaiveDate)> {
        let first = |y, m| NaiveDate::from_ymd_opt(y, m, 1).unwrap();
        match self {
            Window::Daily => Some((date, date.succ_opt()?)),
            Window::Monthly => {
                let s = first(date.year(), date.month());
                Some((s, s.checked_add_months(Months::new(1))?))
            }
            Window::Quarterly => {
                let s = first(date.year(), (date.month0() / 3) * 3 + 1);
                Some((s, s.checked_add_months(Months::new(3))?))
            }
            Window::Yearly => Some((first(date.year(), 1), first(date.year() + 1, 1))),
            Window::Eras(eras) => eras
                .iter()
                .find(|(s, e)| *s <= date && date < *e)
                .copied(),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "daily" => Some(Window::Daily),
            "monthly" => Some(Window::Monthly),
            "quarterly" => Some(Window::Quarterly),
            "yearly" => Some(Window::Yearly),
            "eras" => Some(Window::election_eras()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn bounds_by_kind() {
        assert_eq!(Window::Monthly.bounds(d(2020, 12, 9)), Some((d(2020, 12, 1), d(2021, 1, 1))));
        assert_eq!(Window::Quarterly.bounds(d(2020, 5, 9)), Some((d(2020, 4, 1), d(2020, 7, 1))));
        assert_eq!(Window::Yearly.bounds(d(2017, 5, 9)), Some((d(2017, 1, 1), d(2018, 1, 1))));
        assert_eq!(Window::Daily.bounds(d(2017, 5, 9)), Some((d(2017, 5, 9), d(2017, 5, 10))));
        let eras = Window::election_eras();
        assert_eq!(eras.bounds(d(2015, 12, 31)).unwrap().1, d(2016, 1, 1));
        assert_eq!(eras.bounds(d(2020, 12, 31)).unwrap().0, d(2016, 1, 1));
        assert_eq!(eras.bounds(d(2021, 1, 1)).unwrap().0, d(2021, 1, 1));
        assert_eq!(eras.bounds(d(1999, 1, 1)), None);
    }
}

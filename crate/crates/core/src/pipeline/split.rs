use chrono::{NaiveDate, NaiveDateTime};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSide {
    Train,
    Test,
}

/// Temporal train/test windows. Recordings before `train_cutoff` train,
/// recordings on or after `test_start` test, anything in between is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSplit {
    train_cutoff: NaiveDate,
    test_start: NaiveDate,
}

impl Default for DatasetSplit {
    fn default() -> Self {
        Self {
            train_cutoff: NaiveDate::from_ymd_opt(2024, 4, 15).unwrap(),
            test_start: NaiveDate::from_ymd_opt(2024, 5, 1).unwrap(),
        }
    }
}

impl DatasetSplit {
    pub fn new(train_cutoff: NaiveDate, test_start: NaiveDate) -> Result<Self, PipelineError> {
        if train_cutoff >= test_start {
            return Err(PipelineError::Precondition(format!(
                "train cutoff {train_cutoff} must be before test start {test_start}"
            )));
        }
        Ok(Self {
            train_cutoff,
            test_start,
        })
    }

    pub fn train_cutoff(&self) -> NaiveDate {
        self.train_cutoff
    }

    pub fn test_start(&self) -> NaiveDate {
        self.test_start
    }

    pub fn assign(&self, recorded_at: NaiveDateTime) -> Option<SplitSide> {
        let day = recorded_at.date();
        if day < self.train_cutoff {
            Some(SplitSide::Train)
        } else if day >= self.test_start {
            Some(SplitSide::Test)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").unwrap()
    }

    #[test]
    fn default_windows() {
        let s = DatasetSplit::default();
        assert_eq!(s.assign(at("2023-12-20 14:12:54")), Some(SplitSide::Train));
        assert_eq!(s.assign(at("2024-04-14 23:59:59")), Some(SplitSide::Train));
        assert_eq!(s.assign(at("2024-04-15 00:00:00")), None);
        assert_eq!(s.assign(at("2024-04-20 10:00:00")), None);
        assert_eq!(s.assign(at("2024-04-30 23:59:59")), None);
        assert_eq!(s.assign(at("2024-05-01 00:00:00")), Some(SplitSide::Test));
        assert_eq!(s.assign(at("2024-05-14 08:51:38")), Some(SplitSide::Test));
    }

    #[test]
    fn cutoff_must_precede_test_start() {
        let d = NaiveDate::from_ymd_opt(2024, 5, 1).unwrap();
        assert!(DatasetSplit::new(d, d).is_err());
    }
}

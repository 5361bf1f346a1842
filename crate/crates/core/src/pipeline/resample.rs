use std::collections::BTreeMap;

use chrono::{DateTime, Duration, NaiveDate, Utc};

use super::table::{Column, Interval, TimeSeriesTable};
use crate::error::{Error, Result};

/// Averages an hourly table into one row per calendar day (UTC).
///
/// A day is kept only when all 24 of its hours are present, so partial days
/// at either end (or around a dropped record) disappear.
pub fn resample_daily_mean(table: &TimeSeriesTable) -> Result<TimeSeriesTable> {
    if table.interval() != Interval::Hourly {
        return Err(Error::Config(format!(
            "daily resampling needs an hourly table, got {:?}",
            table.interval()
        )));
    }
    if table.is_empty() {
        return Err(Error::InsufficientData("empty table".into()));
    }
    let mut days: BTreeMap<NaiveDate, Vec<usize>> = BTreeMap::new();
    for (r, ts) in table.timestamps().iter().enumerate() {
        days.entry(ts.date_naive()).or_default().push(r);
    }
    let full: Vec<(NaiveDate, Vec<usize>)> = days.into_iter().filter(|(_, rows)| rows.len() == 24).collect();
    if full.is_empty() {
        return Err(Error::InsufficientData("no fully covered calendar day".into()));
    }
    let timestamps = full
        .iter()
        .map(|(d, _)| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
        .collect();
    let columns = table
        .columns()
        .iter()
        .map(|c| Column {
            name: c.name.clone(),
            values: full
                .iter()
                .map(|(_, rows)| rows.iter().map(|&r| c.values[r]).sum::<f64>() / rows.len() as f64)
                .collect(),
        })
        .collect();
    TimeSeriesTable::new(timestamps, columns, Interval::Daily)
}

/// Piecewise-linear interpolation of weekly anchors onto a daily grid.
///
/// Output has `7 * (weeks - 1) + 1` rows and hits every anchor exactly.
pub fn interpolate_weekly_to_daily(table: &TimeSeriesTable) -> Result<TimeSeriesTable> {
    if table.interval() != Interval::Weekly {
        return Err(Error::Config(format!(
            "weekly interpolation needs a weekly table, got {:?}",
            table.interval()
        )));
    }
    if table.len() < 2 {
        return Err(Error::InsufficientData(
            "interpolation needs at least 2 weekly points".into(),
        ));
    }
    if !table.is_contiguous() {
        return Err(Error::InsufficientData("weekly series has gaps".into()));
    }
    let weeks = table.len();
    let start = table.timestamps()[0];
    let timestamps: Vec<DateTime<Utc>> = (0..7 * (weeks - 1) + 1)
        .map(|d| start + Duration::days(d as i64))
        .collect();
    let columns = table
        .columns()
        .iter()
        .map(|c| {
            let mut values = Vec::with_capacity(timestamps.len());
            for pair in c.values.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                values.push(a);
                for k in 1..7 {
                    let frac = k as f64 / 7.0;
                    values.push(a + (b - a) * frac);
                }
            }
            values.push(*c.values.last().expect("non-empty"));
            Column {
                name: c.name.clone(),
                values,
            }
        })
        .collect();
    TimeSeriesTable::new(timestamps, columns, Interval::Daily)
}

/// Hourly stem diameter variation: `out[t] = d[t+1] - d[t]`.
pub fn compute_sdv(stem_diameter: &[f64]) -> Result<Vec<f64>> {
    if stem_diameter.len() < 2 {
        return Err(Error::InsufficientData(
            "stem diameter variation needs at least 2 readings".into(),
        ));
    }
    Ok(stem_diameter.windows(2).map(|p| p[1] - p[0]).collect())
}

/// Replaces the diameter column of an hourly table with its variation series
/// named `sdv_name`. The first row, which has no predecessor, is dropped.
pub fn derive_sdv_column(table: &TimeSeriesTable, diameter: &str, sdv_name: &str) -> Result<TimeSeriesTable> {
    if !table.is_contiguous() {
        return Err(Error::InsufficientData(
            "stem diameter variation needs a gap-free hourly series".into(),
        ));
    }
    let sdv = compute_sdv(table.column(diameter)?)?;
    let mut columns: Vec<Column> = table
        .columns()
        .iter()
        .filter(|c| c.name != diameter)
        .map(|c| Column {
            name: c.name.clone(),
            values: c.values[1..].to_vec(),
        })
        .collect();
    columns.push(Column {
        name: sdv_name.to_string(),
        values: sdv,
    });
    TimeSeriesTable::new(table.timestamps()[1..].to_vec(), columns, table.interval())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn hourly(values: Vec<f64>) -> TimeSeriesTable {
        let t0 = Utc.with_ymd_and_hms(2021, 5, 3, 0, 0, 0).unwrap();
        let ts = (0..values.len()).map(|h| t0 + Duration::hours(h as i64)).collect();
        TimeSeriesTable::new(
            ts,
            vec![Column {
                name: "v".into(),
                values,
            }],
            Interval::Hourly,
        )
        .unwrap()
    }

    fn weekly(values: Vec<f64>) -> TimeSeriesTable {
        let t0 = Utc.with_ymd_and_hms(2021, 5, 3, 0, 0, 0).unwrap();
        let ts = (0..values.len()).map(|w| t0 + Duration::weeks(w as i64)).collect();
        TimeSeriesTable::new(
            ts,
            vec![Column {
                name: "yield".into(),
                values,
            }],
            Interval::Weekly,
        )
        .unwrap()
    }

    #[test]
    fn daily_mean_of_hour_index() {
        let d = resample_daily_mean(&hourly((0..24).map(f64::from).collect())).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.column("v").unwrap(), &[11.5]);
        assert_eq!(d.interval(), Interval::Daily);
    }

    #[test]
    fn daily_mean_constant() {
        let d = resample_daily_mean(&hourly(vec![400.0; 48])).unwrap();
        assert_eq!(d.column("v").unwrap(), &[400.0, 400.0]);
    }

    #[test]
    fn partial_trailing_day_dropped() {
        let d = resample_daily_mean(&hourly(vec![1.0; 36])).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn partial_leading_day_dropped() {
        let t0 = Utc.with_ymd_and_hms(2021, 5, 3, 20, 0, 0).unwrap();
        let ts = (0..28).map(|h| t0 + Duration::hours(h)).collect();
        let t = TimeSeriesTable::new(
            ts,
            vec![Column {
                name: "v".into(),
                values: vec![2.0; 28],
            }],
            Interval::Hourly,
        )
        .unwrap();
        let d = resample_daily_mean(&t).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.timestamps()[0], Utc.with_ymd_and_hms(2021, 5, 4, 0, 0, 0).unwrap());
    }

    #[test]
    fn no_full_day_is_insufficient() {
        assert!(matches!(
            resample_daily_mean(&hourly(vec![1.0; 10])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn weekly_linear_ramp() {
        let d = interpolate_weekly_to_daily(&weekly(vec![0.0, 7.0])).unwrap();
        assert_eq!(d.column("yield").unwrap(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn weekly_constant() {
        let d = interpolate_weekly_to_daily(&weekly(vec![5.0; 3])).unwrap();
        assert_eq!(d.len(), 15);
        assert!(d.column("yield").unwrap().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn weekly_tent() {
        let d = interpolate_weekly_to_daily(&weekly(vec![0.0, 7.0, 0.0])).unwrap();
        let v = d.column("yield").unwrap();
        assert_eq!(v.len(), 15);
        for k in 0..=7 {
            assert!((v[k] - k as f64).abs() < 1e-12);
            assert!((v[14 - k] - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn single_week_is_insufficient() {
        assert!(matches!(
            interpolate_weekly_to_daily(&weekly(vec![3.0])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn sdv_first_differences() {
        let s = compute_sdv(&[10.0, 10.2, 10.1]).unwrap();
        assert!((s[0] - 0.2).abs() < 1e-12 && (s[1] + 0.1).abs() < 1e-12);
        assert_eq!(compute_sdv(&[9.5; 5]).unwrap(), vec![0.0; 4]);
        assert!(compute_sdv(&[1.0]).is_err());
    }

    #[test]
    fn sdv_column_replaces_diameter() {
        let t = hourly(vec![1.0, 1.5, 1.25]);
        let s = derive_sdv_column(&t, "v", "sdv").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.column_names(), vec!["sdv"]);
        assert_eq!(s.column("sdv").unwrap(), &[0.5, -0.25]);
    }
}

use std::collections::HashMap;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{parse_date, read_source};

/// Factor column labels in panel order.
pub const FACTOR_NAMES: [&str; 5] = ["Mkt-RF", "SMB", "HML", "RMW", "CMA"];

/// Units of the source file; panels always store decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorUnits {
    Decimal,
    Percent,
}

/// How to interpret factor values when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitsHint {
    /// Percent when any |value| > 1, or some factor column has median |value| > 0.5.
    #[default]
    Auto,
    Percent,
    Decimal,
}

/// Daily factor returns and risk-free rate, in decimals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorPanel {
    pub dates: Vec<NaiveDate>,
    pub mkt_rf: Vec<f64>,
    pub smb: Vec<f64>,
    pub hml: Vec<f64>,
    pub rmw: Vec<f64>,
    pub cma: Vec<f64>,
    pub rf: Vec<f64>,
    /// Units of the source the panel was loaded from.
    pub source_units: FactorUnits,
}

impl FactorPanel {
    /// Validates equal lengths, strictly increasing dates and finite entries.
    pub fn new(dates: Vec<NaiveDate>, factors: [Vec<f64>; 5], rf: Vec<f64>, source_units: FactorUnits) -> Result<Self> {
        const CTX: &str = "factors::FactorPanel";
        let t = dates.len();
        if factors.iter().any(|c| c.len() != t) || rf.len() != t {
            return Err(Error::invalid(CTX, "factor columns and dates differ in length"));
        }
        if dates.windows(2).any(|d| d[1] <= d[0]) {
            return Err(Error::invalid(CTX, "dates must be strictly increasing"));
        }
        if factors.iter().chain([&rf]).flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid(CTX, "non-finite factor value"));
        }
        let [mkt_rf, smb, hml, rmw, cma] = factors;
        Ok(Self {
            dates,
            mkt_rf,
            smb,
            hml,
            rmw,
            cma,
            rf,
            source_units,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Factor column `k` in [`FACTOR_NAMES`] order.
    pub fn factor(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.mkt_rf,
            1 => &self.smb,
            2 => &self.hml,
            3 => &self.rmw,
            4 => &self.cma,
            _ => panic!("factor index {k} out of range"),
        }
    }

    /// T×6 regressor matrix: a column of ones followed by the five factors.
    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), 6, |t, j| if j == 0 { 1.0 } else { self.factor(j - 1)[t] })
    }

    /// Rows at the given positions, in order.
    pub fn rows(&self, idx: &[usize]) -> FactorPanel {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        FactorPanel {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            mkt_rf: pick(&self.mkt_rf),
            smb: pick(&self.smb),
            hml: pick(&self.hml),
            rmw: pick(&self.rmw),
            cma: pick(&self.cma),
            rf: pick(&self.rf),
            source_units: self.source_units,
        }
    }

    pub fn filter_rows(&self, keep: impl Fn(NaiveDate) -> bool) -> FactorPanel {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.dates[i])).collect();
        self.rows(&idx)
    }
}

/// Loads a daily factor CSV from a path or URL.
pub fn load_factors(source: &str, units: UnitsHint) -> Result<FactorPanel> {
    parse_factors(&read_source(source)?, units)
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Parses factor CSV text. Preamble lines before the header (the first line
/// mentioning Mkt-RF) are skipped, and the data block ends at the first blank
/// line or non-date row after it.
pub fn parse_factors(text: &str, units: UnitsHint) -> Result<FactorPanel> {
    const CTX: &str = "factors::load_factors";
    let lines: Vec<&str> = text.lines().collect();
    let header_at = lines
        .iter()
        .position(|l| normalize(l).contains("mktrf"))
        .or_else(|| lines.iter().position(|l| !l.trim().is_empty()))
        .ok_or_else(|| Error::Parse {
            context: CTX,
            line: 1,
            reason: "empty factor file".into(),
        })?;
    let split = |l: &str| -> Vec<String> { l.split(',').map(|f| f.trim().to_string()).collect() };
    let header: Vec<String> = split(lines[header_at]).iter().map(|h| normalize(h)).collect();
    let mut col = HashMap::new();
    for (key, label) in ["mktrf", "smb", "hml", "rmw", "cma", "rf"]
        .iter()
        .zip(["Mkt-RF", "SMB", "HML", "RMW", "CMA", "RF"])
    {
        let j = header
            .iter()
            .skip(1)
            .position(|h| h == key)
            .ok_or_else(|| Error::MissingColumn {
                context: CTX,
                column: label.to_string(),
            })?;
        col.insert(*key, j + 1);
    }

    let mut dates = Vec::new();
    let mut raw: [Vec<f64>; 6] = Default::default();
    for (offset, l) in lines[header_at + 1..].iter().enumerate() {
        let line = header_at + offset + 2;
        if l.trim().is_empty() {
            if dates.is_empty() {
                continue;
            }
            break;
        }
        let fields = split(l);
        let Some(date) = parse_date(&fields[0]) else {
            if dates.is_empty() {
                return Err(Error::Parse {
                    context: CTX,
                    line,
                    reason: format!("unparseable date '{}'", fields[0]),
                });
            }
            break;
        };
        if let Some(&last) = dates.last() {
            if date <= last {
                return Err(Error::Parse {
                    context: CTX,
                    line,
                    reason: format!("date {date} is not after {last}"),
                });
            }
        }
        for (k, key) in ["mktrf", "smb", "hml", "rmw", "cma", "rf"].iter().enumerate() {
            let cell = fields.get(col[key]).map(String::as_str).unwrap_or("");
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    context: CTX,
                    line,
                    reason: format!("unparseable value '{cell}' in column {}", FACTOR_LABELS[k]),
                })?;
            raw[k].push(v);
        }
        dates.push(date);
    }
    if dates.is_empty() {
        return Err(Error::InsufficientData {
            context: CTX,
            what: "factor rows",
            need: 1,
            got: 0,
        });
    }

    let source_units = match units {
        UnitsHint::Percent => FactorUnits::Percent,
        UnitsHint::Decimal => FactorUnits::Decimal,
        UnitsHint::Auto => detect_units(&raw[..5]),
    };
    if source_units == FactorUnits::Percent {
        raw.iter_mut().flatten().for_each(|v| *v /= 100.0);
    }
    let [m, s, h, r, c, rf] = raw;
    FactorPanel::new(dates, [m, s, h, r, c], rf, source_units)
}

const FACTOR_LABELS: [&str; 6] = ["Mkt-RF", "SMB", "HML", "RMW", "CMA", "RF"];

fn detect_units(factors: &[Vec<f64>]) -> FactorUnits {
    let median_abs = |v: &[f64]| {
        let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        a.sort_by(f64::total_cmp);
        let n = a.len();
        if n % 2 == 1 {
            a[n / 2]
        } else {
            0.5 * (a[n / 2 - 1] + a[n / 2])
        }
    };
    let any_large = factors.iter().flatten().any(|x| x.abs() > 1.0);
    let max_median = factors.iter().map(|c| median_abs(c)).fold(0.0, f64::max);
    if any_large || max_median > 0.5 {
        FactorUnits::Percent
    } else {
        FactorUnits::Decimal
    }
}

/// Pearson correlations of the five factors, in [`FACTOR_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: [&'static str; 5],
    pub matrix: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

pub fn factor_correlations(panel: &FactorPanel) -> Result<CorrelationMatrix> {
    let t = panel.len();
    if t < 3 {
        return Err(Error::InsufficientData {
            context: "factors::factor_correlations",
            what: "observations",
            need: 3,
            got: t,
        });
    }
    let centered: Vec<Vec<f64>> = (0..5)
        .map(|k| {
            let c = panel.factor(k);
            let mean = c.iter().sum::<f64>() / t as f64;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if let Some(k) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroVariance {
            context: "factors::factor_correlations",
            name: FACTOR_NAMES[k].to_string(),
        });
    }
    let matrix = DMatrix::from_fn(5, 5, |i, j| {
        if i == j {
            return 1.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
        (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0)
    });
    Ok(CorrelationMatrix {
        names: FACTOR_NAMES,
        matrix,
    })
}

/// Inner-joins portfolio returns with the panel by date and subtracts RF.
pub fn align_excess(dates: &[NaiveDate], returns: &[f64], panel: &FactorPanel) -> Result<(Vec<f64>, FactorPanel)> {
    if dates.len() != returns.len() {
        return Err(Error::invalid(
            "factors::align_excess",
            "dates and returns differ in length",
        ));
    }
    let by_date: HashMap<NaiveDate, f64> = dates.iter().copied().zip(returns.iter().copied()).collect();
    let idx: Vec<usize> = (0..panel.len())
        .filter(|&i| by_date.contains_key(&panel.dates[i]))
        .collect();
    let sub = panel.rows(&idx);
    let excess = sub.dates.iter().zip(&sub.rf).map(|(d, rf)| by_date[d] - rf).collect();
    Ok((excess, sub))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = ",Mkt-RF,SMB,HML,RMW,CMA,RF\n";

    #[test]
    fn percent_row_is_converted() {
        let p = parse_factors(
            &format!("{HEADER}20240102,1.00,0.10,-0.20,0.05,0.00,0.02\n"),
            UnitsHint::Auto,
        )
        .unwrap();
        assert_eq!(p.source_units, FactorUnits::Percent);
        assert_eq!(p.mkt_rf, vec![0.01]);
        assert_eq!(p.hml, vec![-0.002]);
        assert_eq!(p.rf, vec![0.0002]);
    }

    #[test]
    fn decimal_file_is_verbatim() {
        let text = format!(
            "{HEADER}20240102,0.0100,0.0010,-0.0020,0.0005,0.0000,0.0002\n\
             20240103,-0.0050,0.0020,0.0010,-0.0005,0.0010,0.0002\n"
        );
        let p = parse_factors(&text, UnitsHint::Auto).unwrap();
        assert_eq!(p.source_units, FactorUnits::Decimal);
        assert_eq!(p.mkt_rf, vec![0.01, -0.005]);
        assert_eq!(p.cma, vec![0.0, 0.001]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_factors(",Mkt-RF,SMB,HML,RMW,RF\n20240102,1,1,1,1,1\n", UnitsHint::Auto).unwrap_err();
        assert!(
            matches!(&err, Error::MissingColumn { column, .. } if column == "CMA"),
            "{err}"
        );
    }

    #[test]
    fn preamble_and_trailer_are_skipped() {
        let text = format!(
            "This file was created using a research database\n\n{HEADER}\
             20240102,1.00,0.10,-0.20,0.05,0.00,0.02\n\
             20240103,-0.50,0.10,0.20,0.05,0.30,0.02\n\n\
             Copyright notice\n"
        );
        let p = parse_factors(&text, UnitsHint::Auto).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.dates[1], NaiveDate::from_ymd_opt(2024, 1, 3).unwrap());
    }

    #[test]
    fn unparseable_value_reports_line() {
        let err = parse_factors(&format!("{HEADER}20240102,1.0,x,0,0,0,0\n"), UnitsHint::Auto).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn explicit_units_override_detection() {
        let text = format!("{HEADER}20240102,0.2,0.1,0.1,0.1,0.1,0.01\n");
        assert_eq!(parse_factors(&text, UnitsHint::Auto).unwrap().mkt_rf, vec![0.2]);
        assert_eq!(parse_factors(&text, UnitsHint::Percent).unwrap().mkt_rf, vec![0.002]);
    }

    fn day(i: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    #[test]
    fn correlations_of_proportional_columns() {
        let t = 50;
        let x: Vec<f64> = (0..t).map(|i| ((i * 37 % 11) as f64 - 5.0) * 1e-3).collect();
        let y: Vec<f64> = (0..t).map(|i| ((i * 13 % 7) as f64 - 3.0) * 1e-3).collect();
        let z: Vec<f64> = (0..t).map(|i| ((i * i % 17) as f64) * 1e-3).collect();
        let w: Vec<f64> = (0..t).map(|i| ((i % 5) as f64) * 1e-3).collect();
        let p = FactorPanel::new(
            (0..t as u32).map(day).collect(),
            [x.clone(), x.iter().map(|v| 3.0 * v).collect(), y, z, w],
            vec![0.0; t],
            FactorUnits::Decimal,
        )
        .unwrap();
        let c = factor_correlations(&p).unwrap().matrix;
        assert!((c[(0, 1)] - 1.0).abs() <= 1e-12);
        for i in 0..5 {
            assert_eq!(c[(i, i)], 1.0);
            for j in 0..5 {
                assert_eq!(c[(i, j)], c[(j, i)]);
            }
        }
    }

    #[test]
    fn zero_variance_factor_is_named() {
        let t = 5;
        let v: Vec<f64> = (0..t).map(|i| i as f64 * 1e-3).collect();
        let p = FactorPanel::new(
            (0..t as u32).map(day).collect(),
            [v.clone(), v.clone(), vec![0.001; t], v.clone(), v],
            vec![0.0; t],
            FactorUnits::Decimal,
        )
        .unwrap();
        assert!(matches!(factor_correlations(&p), Err(Error::ZeroVariance { name, .. }) if name == "HML"));
    }

    #[test]
    fn excess_alignment_drops_unmatched_dates() {
        let p = FactorPanel::new(
            (0..4).map(day).collect(),
            std::array::from_fn(|_| vec![0.0; 4]),
            vec![0.001; 4],
            FactorUnits::Decimal,
        )
        .unwrap();
        let (y, sub) = align_excess(&[day(1), day(3), day(9)], &[0.01, 0.02, 0.03], &p).unwrap();
        assert_eq!(sub.dates, vec![day(1), day(3)]);
        assert_eq!(y, vec![0.01 - 0.001, 0.02 - 0.001]);
    }
}

//! Descriptive statistics per variable: mean and SD for numeric variables,
//! category counts for binary ones, and the number of missing cells for
//! every variable.

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, RATE_Y1_COLUMN, RATE_Y2_COLUMN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub value: u8,
    pub count: usize,
    /// Percent of the non-missing cells.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub kind: FeatureKind,
    pub n: usize,
    pub missing: usize,
    /// Mean of present values (numeric variables).
    pub mean: Option<f64>,
    /// Sample standard deviation, n - 1 denominator (numeric variables).
    pub sd: Option<f64>,
    /// Counts for 0 and 1 (binary variables).
    pub categories: Option<Vec<CategoryCount>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_units: usize,
    pub variables: Vec<VariableSummary>,
}

fn numeric(name: &str, values: &[Option<f64>]) -> VariableSummary {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let n = present.len();
    let mean = (n > 0).then(|| present.iter().sum::<f64>() / n as f64);
    let sd = match (mean, n) {
        (Some(m), n) if n > 1 => Some((present.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()),
        _ => None,
    };
    VariableSummary {
        name: name.to_owned(),
        kind: FeatureKind::Numeric,
        n,
        missing: values.len() - n,
        mean,
        sd,
        categories: None,
    }
}

fn binary(name: &str, values: &[Option<f64>]) -> VariableSummary {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let n = present.len();
    let ones = present.iter().filter(|&&v| v == 1.0).count();
    let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    VariableSummary {
        name: name.to_owned(),
        kind: FeatureKind::Binary,
        n,
        missing: values.len() - n,
        mean: None,
        sd: None,
        categories: Some(vec![
            CategoryCount {
                value: 0,
                count: n - ones,
                percent: pct(n - ones),
            },
            CategoryCount {
                value: 1,
                count: ones,
                percent: pct(ones),
            },
        ]),
    }
}

/// Summarises both rate columns and every schema feature.
pub fn summarize(dataset: &Dataset) -> Summary {
    let mut variables = vec![
        numeric(RATE_Y1_COLUMN, &dataset.units.iter().map(|u| u.rate_y1).collect::<Vec<_>>()),
        numeric(RATE_Y2_COLUMN, &dataset.units.iter().map(|u| u.rate_y2).collect::<Vec<_>>()),
    ];
    for (j, spec) in dataset.schema.features().iter().enumerate() {
        let col: Vec<Option<f64>> = dataset.units.iter().map(|u| u.features[j]).collect();
        variables.push(match spec.kind {
            FeatureKind::Numeric => numeric(&spec.name, &col),
            FeatureKind::Binary => binary(&spec.name, &col),
        });
    }
    Summary {
        n_units: dataset.len(),
        variables,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_mean_sd_missing() {
        let s = numeric("x", &[Some(1.0), None, Some(3.0), Some(5.0)]);
        assert_eq!(s.n, 3);
        assert_eq!(s.missing, 1);
        assert_eq!(s.mean, Some(3.0));
        assert_eq!(s.sd, Some(2.0));
    }

    #[test]
    fn binary_counts() {
        let s = binary("b", &[Some(1.0), Some(1.0), Some(0.0), None]);
        let c = s.categories.unwrap();
        assert_eq!((c[0].count, c[1].count), (1, 2));
        assert!((c[1].percent - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.missing, 1);
    }

    #[test]
    fn all_missing_column_has_no_mean() {
        let s = numeric("x", &[None, None]);
        assert_eq!((s.mean, s.sd, s.missing), (None, None, 2));
    }
}

//! Metric definition files: a line-based `key = value` format carrying the
//! chart domain, orientation, the upper triangle of the metric, and an
//! optional 2-form.
//!
//! ```text
//! # comment
//! domain = box(-1..1, -1..1, -1..1, -1..1)   # or ball(2)
//! orientation = +1
//! g11 = 1
//! g12 = x1          # mirrored to g21
//! ...
//! w12 = sin(x1)     # optional 2-form components, i < j
//! ```
//!
//! All four diagonal components are required; missing off-diagonals default
//! to zero; unknown keys are errors.

use curv4::expr::{parse, Expression};
use curv4::geometry::{Domain, MetricField, Orientation};
use curv4::hodgeops::TwoFormField;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}, column {column}: {message}")]
    Expr {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Value { line: usize, message: String },
    #[error("missing diagonal component {key}")]
    MissingDiagonal { key: String },
}

#[derive(Debug)]
pub struct MetricConfig {
    pub metric: MetricField,
    pub form: Option<TwoFormField>,
}

fn parse_domain(value: &str, line: usize) -> Result<Domain, ConfigError> {
    let value = value.trim();
    let err = |message: String| ConfigError::Value { line, message };
    if let Some(rest) = value.strip_prefix("ball(") {
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| err("unclosed `ball(`".to_string()))?;
        let radius: f64 = inner
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid ball radius `{inner}`")))?;
        if !(radius > 0.0) {
            return Err(err("ball radius must be positive".to_string()));
        }
        return Ok(Domain::Ball { radius });
    }
    if let Some(rest) = value.strip_prefix("box(") {
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| err("unclosed `box(`".to_string()))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 4 {
            return Err(err(format!(
                "box needs four ranges `lo..hi`, got {}",
                parts.len()
            )));
        }
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for (i, part) in parts.iter().enumerate() {
            let (a, b) = part
                .trim()
                .split_once("..")
                .ok_or_else(|| err(format!("range `{part}` must be `lo..hi`")))?;
            lo[i] = a
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid number `{a}`")))?;
            hi[i] = b
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid number `{b}`")))?;
            if !(lo[i] < hi[i]) {
                return Err(err(format!("empty range `{part}`")));
            }
        }
        return Ok(Domain::Box4 { lo, hi });
    }
    Err(err(format!(
        "domain must be `box(lo..hi, x4)` or `ball(r)`, got `{value}`"
    )))
}

/// Index pair encoded in a `g`/`w` key like `g12`; upper triangle only.
fn parse_pair(key: &str, line: usize, strict_upper: bool) -> Result<(usize, usize), ConfigError> {
    let digits: Vec<u32> = key[1..].chars().filter_map(|c| c.to_digit(10)).collect();
    if digits.len() != 2 || key.len() != 3 {
        return Err(ConfigError::UnknownKey {
            line,
            key: key.to_string(),
        });
    }
    let (i, j) = (digits[0] as usize, digits[1] as usize);
    let upper_ok = if strict_upper { i < j } else { i <= j };
    if !(1..=4).contains(&i) || !(1..=4).contains(&j) || !upper_ok {
        return Err(ConfigError::UnknownKey {
            line,
            key: key.to_string(),
        });
    }
    Ok((i - 1, j - 1))
}

fn parse_component(
    value: &str,
    line: usize,
    value_offset: usize,
) -> Result<Expression, ConfigError> {
    parse(value).map_err(|e| ConfigError::Expr {
        line,
        column: value_offset + e.position(),
        message: e.to_string(),
    })
}

pub fn parse_metric_config(source: &str) -> Result<MetricConfig, ConfigError> {
    let mut domain = Domain::unit_box();
    let mut orientation = Orientation::Positive;
    let mut g: [[Option<Expression>; 4]; 4] = Default::default();
    let mut w: [[Option<Expression>; 4]; 4] = Default::default();
    let mut seen: Vec<String> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if text.trim().is_empty() {
            continue;
        }
        let (key, value) = text.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line,
            text: text.trim().to_string(),
        })?;
        let key = key.trim();
        let value_offset = text.len() - text.split_once('=').unwrap().1.len();
        let value_trim_offset = value_offset + (value.len() - value.trim_start().len());
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        seen.push(key.to_string());

        match key {
            "domain" => domain = parse_domain(value, line)?,
            "orientation" => {
                orientation = match value {
                    "+1" | "1" => Orientation::Positive,
                    "-1" => Orientation::Negative,
                    other => {
                        return Err(ConfigError::Value {
                            line,
                            message: format!("orientation must be +1 or -1, got `{other}`"),
                        })
                    }
                }
            }
            k if k.starts_with('g') => {
                let (i, j) = parse_pair(k, line, false)?;
                g[i][j] = Some(parse_component(value, line, value_trim_offset)?);
            }
            k if k.starts_with('w') => {
                let (i, j) = parse_pair(k, line, true)?;
                w[i][j] = Some(parse_component(value, line, value_trim_offset)?);
            }
            other => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
    }

    for i in 0..4 {
        if g[i][i].is_none() {
            return Err(ConfigError::MissingDiagonal {
                key: format!("g{}{}", i + 1, i + 1),
            });
        }
    }
    let upper: [[Expression; 4]; 4] = std::array::from_fn(|i| {
        std::array::from_fn(|j| g[i][j].clone().unwrap_or_else(Expression::zero))
    });
    let metric = MetricField::new(domain, orientation, &upper);

    let has_form = w.iter().flatten().any(Option::is_some);
    let form = has_form.then(|| {
        let upper: [[Expression; 4]; 4] = std::array::from_fn(|i| {
            std::array::from_fn(|j| w[i][j].clone().unwrap_or_else(Expression::zero))
        });
        TwoFormField::new(&upper)
    });

    Ok(MetricConfig { metric, form })
}

/// Parses only `g` keys into a symmetric expression matrix, without the
/// diagonal requirement; used for perturbation directions, which are not
/// metrics.
pub fn parse_symmetric_matrix(source: &str) -> Result<[[Expression; 4]; 4], ConfigError> {
    let mut g: [[Option<Expression>; 4]; 4] = Default::default();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if text.trim().is_empty() {
            continue;
        }
        let (key, value) = text.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line,
            text: text.trim().to_string(),
        })?;
        let key = key.trim();
        let value_offset = text.len() - text.split_once('=').unwrap().1.len();
        let value_trim_offset = value_offset + (value.len() - value.trim_start().len());
        let value = value.trim();
        if !key.starts_with('g') {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        let (i, j) = parse_pair(key, line, false)?;
        if g[i][j].is_some() {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        g[i][j] = Some(parse_component(value, line, value_trim_offset)?);
    }
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| g[i][j].clone().unwrap_or_else(Expression::zero))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "
# a flat metric
domain = box(-1..1, -1..1, -1..1, -1..1)
orientation = +1
g11 = 1
g22 = 1
g33 = 1
g44 = 1
";

    #[test]
    fn parses_flat_metric() {
        let cfg = parse_metric_config(FLAT).unwrap();
        let p = [0.3, -0.2, 0.5, 0.0];
        let g = cfg.metric.metric_at(&p).unwrap();
        assert_eq!(g, curv4::nalgebra::Matrix4::identity());
        assert!(cfg.form.is_none());
    }

    #[test]
    fn missing_diagonal_is_an_error() {
        let src = "g11 = 1\ng33 = 1\ng44 = 1\n";
        match parse_metric_config(src) {
            Err(ConfigError::MissingDiagonal { key }) => assert_eq!(key, "g22"),
            other => panic!("expected MissingDiagonal, got {other:?}"),
        }
    }

    #[test]
    fn off_diagonal_is_mirrored() {
        let src = "g11 = 1\ng22 = 1\ng33 = 1\ng44 = 1\ng12 = x1\n";
        let cfg = parse_metric_config(src).unwrap();
        let g = cfg.metric.metric_at(&[0.2, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g[(0, 1)], 0.2);
        assert_eq!(g[(1, 0)], 0.2);
    }

    #[test]
    fn unknown_key_rejected() {
        let src = "g55 = 1\n";
        assert!(matches!(
            parse_metric_config(src),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        let src = "foo = 1\n";
        assert!(matches!(
            parse_metric_config(src),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        // lower-triangle keys are not part of the format
        let src = "g21 = 1\n";
        assert!(matches!(
            parse_metric_config(src),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
    }

    #[test]
    fn expression_errors_carry_position() {
        let src = "domain = ball(2)\ng11 = sin(\ng22 = 1\ng33 = 1\ng44 = 1\n";
        match parse_metric_config(src) {
            Err(ConfigError::Expr { line, column, .. }) => {
                assert_eq!(line, 2);
                // `sin(` starts at column 7, so the missing token is at 11
                assert_eq!(column, 11);
            }
            other => panic!("expected Expr error, got {other:?}"),
        }
    }

    #[test]
    fn form_components_parsed() {
        let src = "g11 = 1\ng22 = 1\ng33 = 1\ng44 = 1\nw12 = 1\nw34 = 1\n";
        let cfg = parse_metric_config(src).unwrap();
        let w = cfg.form.unwrap();
        let m = w.value_at(&[0.0; 4]).unwrap();
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(2, 3)], 1.0);
        assert_eq!(m[(1, 0)], -1.0);
    }

    #[test]
    fn duplicate_key_rejected() {
        let src = "g11 = 1\ng11 = 2\n";
        assert!(matches!(
            parse_metric_config(src),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
    }
}

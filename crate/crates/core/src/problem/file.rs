//! Problem definition files.
//!
//! TOML key-value text with sections `[domain]`, `[f]`, `[L]`, `[g]` and
//! `[constants]`. Every function is a closed-form string in the grammar of
//! [`crate::expr`]:
//!
//! ```toml
//! name = "tracking_box_1d"
//!
//! [domain]
//! dim = 1
//! extents = [1.0]
//! horizon = 1.0
//! y0 = "0.0"
//! coefficients = [["1.0"]]   # optional, identity when omitted
//!
//! [f]
//! value = "y^3"
//! dy = "3.0 * y^2"
//! dyy = "6.0 * y"
//! lower_slope = 0.0
//!
//! [L]                        # same six keys for [g]
//! value = "0.5 * (y - 1.0)^2 + 0.05 * u^2"
//! dy = "y - 1.0"
//! du = "0.1 * u"
//! dyy = "1.0"
//! dyu = "0.0"
//! duu = "0.1"
//!
//! [constants]
//! gamma1 = 0.1
//! gamma2 = 1.0
//! y_range = [-3.0, 3.0]
//! u_range = [-5.0, 5.0]
//! ```
//!
//! Writing prints each expression in canonical form, so
//! `parse(write(spec))` reproduces the same expression trees.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Map, Nonlinearity, ProblemSpec, Range, SampleBox, ScalarMap2};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    name: String,
    domain: DomainSection,
    f: NonlinearitySection,
    #[serde(rename = "L")]
    lagrangian: MapSection,
    #[serde(rename = "g")]
    constraint: MapSection,
    constants: ConstantsSection,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    dim: usize,
    extents: Vec<f64>,
    horizon: f64,
    y0: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NonlinearitySection {
    value: String,
    dy: String,
    dyy: String,
    lower_slope: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapSection {
    value: String,
    dy: String,
    du: String,
    dyy: String,
    dyu: String,
    duu: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsSection {
    gamma1: f64,
    gamma2: f64,
    y_range: [f64; 2],
    u_range: [f64; 2],
}

fn parse_expr(src: &str, key: &str) -> Result<Map> {
    Map::parse(src).map_err(|e| Error::ProblemFile(format!("{key}: {e}")))
}

fn parse_space_only(src: &str, key: &str) -> Result<Map> {
    let m = parse_expr(src, key)?;
    if let Some(e) = m.source() {
        if e.uses(Var::T) || e.uses(Var::Y) || e.uses(Var::U) {
            return Err(Error::ProblemFile(format!(
                "{key}: may depend on x1, x2 only"
            )));
        }
    }
    Ok(m)
}

fn parse_section(s: &MapSection, prefix: &str) -> Result<ScalarMap2> {
    Ok(ScalarMap2 {
        value: parse_expr(&s.value, &format!("{prefix}.value"))?,
        dy: parse_expr(&s.dy, &format!("{prefix}.dy"))?,
        du: parse_expr(&s.du, &format!("{prefix}.du"))?,
        dyy: parse_expr(&s.dyy, &format!("{prefix}.dyy"))?,
        dyu: parse_expr(&s.dyu, &format!("{prefix}.dyu"))?,
        duu: parse_expr(&s.duu, &format!("{prefix}.duu"))?,
    })
}

/// Parses problem-file text.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let doc: FileDoc = toml::from_str(text).map_err(|e| Error::ProblemFile(e.to_string()))?;
    let dim = doc.domain.dim;
    let coefficients = match &doc.domain.coefficients {
        None => ProblemSpec::identity_coefficients(dim),
        Some(rows) => rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, s)| parse_space_only(s, &format!("domain.coefficients[{i}][{j}]")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let f = Nonlinearity {
        f: parse_expr(&doc.f.value, "f.value")?,
        df: parse_expr(&doc.f.dy, "f.dy")?,
        ddf: parse_expr(&doc.f.dyy, "f.dyy")?,
        lower_slope: doc.f.lower_slope,
    };
    for (key, m) in [("f.value", &f.f), ("f.dy", &f.df), ("f.dyy", &f.ddf)] {
        if let Some(e) = m.source() {
            if [Var::X1, Var::X2, Var::T, Var::U]
                .iter()
                .any(|&v| e.uses(v))
            {
                return Err(Error::ProblemFile(format!("{key}: may depend on y only")));
            }
        }
    }
    let c = &doc.constants;
    let spec = ProblemSpec {
        name: doc.name.clone(),
        dim,
        extents: doc.domain.extents.clone(),
        horizon: doc.domain.horizon,
        coefficients,
        f,
        lagrangian: parse_section(&doc.lagrangian, "L")?,
        constraint: parse_section(&doc.constraint, "g")?,
        y0: parse_space_only(&doc.domain.y0, "domain.y0")?,
        gamma1: c.gamma1,
        gamma2: c.gamma2,
        sample_box: SampleBox {
            y: Range::new(c.y_range[0], c.y_range[1]),
            u: Range::new(c.u_range[0], c.u_range[1]),
        },
    };
    spec.check_shape()
        .map_err(|e| Error::ProblemFile(e.to_string()))?;
    Ok(spec)
}

pub fn read_problem(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_problem(&text)
}

fn src(m: &Map, key: &str) -> Result<String> {
    m.source().map(Expr::to_string).ok_or_else(|| {
        Error::ProblemFile(format!("{key} is a native closure and cannot be written"))
    })
}

fn section(m: &ScalarMap2, prefix: &str) -> Result<MapSection> {
    Ok(MapSection {
        value: src(&m.value, &format!("{prefix}.value"))?,
        dy: src(&m.dy, &format!("{prefix}.dy"))?,
        du: src(&m.du, &format!("{prefix}.du"))?,
        dyy: src(&m.dyy, &format!("{prefix}.dyy"))?,
        dyu: src(&m.dyu, &format!("{prefix}.dyu"))?,
        duu: src(&m.duu, &format!("{prefix}.duu"))?,
    })
}

/// Serializes a spec whose maps are all closed forms.
pub fn write_problem_string(spec: &ProblemSpec) -> Result<String> {
    let coefficients = spec
        .coefficients
        .iter()
        .map(|row| row.iter().map(|m| src(m, "coefficient")).collect())
        .collect::<Result<Vec<Vec<String>>>>()?;
    let doc = FileDoc {
        name: spec.name.clone(),
        domain: DomainSection {
            dim: spec.dim,
            extents: spec.extents.clone(),
            horizon: spec.horizon,
            y0: src(&spec.y0, "y0")?,
            coefficients: Some(coefficients),
        },
        f: NonlinearitySection {
            value: src(&spec.f.f, "f.value")?,
            dy: src(&spec.f.df, "f.dy")?,
            dyy: src(&spec.f.ddf, "f.dyy")?,
            lower_slope: spec.f.lower_slope,
        },
        lagrangian: section(&spec.lagrangian, "L")?,
        constraint: section(&spec.constraint, "g")?,
        constants: ConstantsSection {
            gamma1: spec.gamma1,
            gamma2: spec.gamma2,
            y_range: [spec.sample_box.y.lo, spec.sample_box.y.hi],
            u_range: [spec.sample_box.u.lo, spec.sample_box.u.hi],
        },
    };
    toml::to_string(&doc).map_err(|e| Error::ProblemFile(e.to_string()))
}

pub fn write_problem(path: &Path, spec: &ProblemSpec) -> Result<()> {
    let text = write_problem_string(spec)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

//! Text format for [`SpaceTimeField`]s.
//!
//! ```text
//! PARAKKT-FIELD v1
//! <dim> <n1> [<n2>] <nt>
//! <l1> [<l2>] <T>
//! <value>            one interior value per line, nt blocks in
//! ...                time order, lexicographic nodes (x1 fastest)
//! ```
//!
//! Node counts include boundary nodes. Reals are printed in scientific
//! notation with 17 significant digits and `\n` line endings, which makes
//! write-then-read bitwise lossless.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, SpaceTimeField, SpatialGrid, TimeGrid};

pub const FIELD_MAGIC: &str = "PARAKKT-FIELD v1";

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_field(field: &SpaceTimeField) -> String {
    let g = field.grid();
    let sp = &g.space;
    let mut s = String::with_capacity(26 * field.as_slice().len() + 64);
    s.push_str(FIELD_MAGIC);
    s.push('\n');
    let _ = write!(s, "{}", sp.dim());
    for n in sp.nodes() {
        let _ = write!(s, " {n}");
    }
    let _ = writeln!(s, " {}", g.levels());
    let mut first = true;
    for l in sp
        .extents()
        .iter()
        .chain(std::iter::once(&g.time.horizon()))
    {
        if !first {
            s.push(' ');
        }
        first = false;
        s.push_str(&fmt17(*l));
    }
    s.push('\n');
    for v in field.as_slice() {
        s.push_str(&fmt17(*v));
        s.push('\n');
    }
    s
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedField(msg.into())
}

/// Parses field text, building the grid from its header.
pub fn parse_field(text: &str) -> Result<SpaceTimeField> {
    let mut lines = text.split('\n');
    if lines.next() != Some(FIELD_MAGIC) {
        return Err(malformed(format!("first line must be '{FIELD_MAGIC}'")));
    }
    let dims_line = lines.next().ok_or_else(|| malformed("missing size line"))?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| malformed(format!("bad size token '{t}'")))
        })
        .collect::<Result<_>>()?;
    let dim = *dims.first().ok_or_else(|| malformed("empty size line"))?;
    if !(dim == 1 || dim == 2) || dims.len() != dim + 2 {
        return Err(malformed(format!(
            "size line '{dims_line}' does not match dim"
        )));
    }
    let ext_line = lines
        .next()
        .ok_or_else(|| malformed("missing extents line"))?;
    let ext: Vec<f64> = ext_line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| malformed(format!("bad extent token '{t}'")))
        })
        .collect::<Result<_>>()?;
    if ext.len() != dim + 1 {
        return Err(malformed("extents line needs one value per axis plus T"));
    }
    let space =
        SpatialGrid::new(&ext[..dim], &dims[1..=dim]).map_err(|e| malformed(e.to_string()))?;
    let time = TimeGrid::new(ext[dim], dims[dim + 1]).map_err(|e| malformed(e.to_string()))?;
    let grid = Grid::new(space, time);
    let want = grid.levels() * grid.n_interior();
    let mut data = Vec::with_capacity(want);
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad value '{line}' at entry {k}")))?;
        if !v.is_finite() {
            let n = grid.n_interior();
            return Err(Error::NonFiniteEntry {
                what: "field file value".into(),
                location: format!("level {}, node {}", k / n, k % n),
            });
        }
        data.push(v);
    }
    if data.len() != want {
        return Err(Error::DimensionMismatch(format!(
            "header promises {want} values, file has {}",
            data.len()
        )));
    }
    SpaceTimeField::from_vec(&grid, data)
}

pub fn write_field(path: &Path, field: &SpaceTimeField) -> Result<()> {
    std::fs::write(path, format_field(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<SpaceTimeField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field(&text)
}

/// Reads a field and re-homes it on `grid`, which the header must match.
pub fn read_field_on(path: &Path, grid: &Arc<Grid>) -> Result<SpaceTimeField> {
    let f = read_field(path)?;
    if **f.grid() != **grid {
        return Err(Error::DimensionMismatch(format!(
            "{} does not match the requested grid",
            path.display()
        )));
    }
    SpaceTimeField::from_vec(grid, f.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid2() -> Arc<Grid> {
        Grid::new(
            SpatialGrid::new(&[1.0, 0.7], &[5, 4]).unwrap(),
            TimeGrid::new(0.3, 3).unwrap(),
        )
    }

    #[test]
    fn header_layout() {
        let f = SpaceTimeField::constant(&grid2(), 0.1);
        let text = format_field(&f);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "PARAKKT-FIELD v1");
        assert_eq!(lines[1], "2 5 4 3");
        assert_eq!(
            lines[2],
            "1.0000000000000000e0 6.9999999999999996e-1 2.9999999999999999e-1"
        );
        assert_eq!(lines.len(), 3 + 3 * 6);
        assert_eq!(lines[3], "1.0000000000000001e-1");
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn wrong_count_is_dimension_mismatch() {
        let f = SpaceTimeField::constant(&grid2(), 1.0);
        let text = format_field(&f).replacen("2 5 4 3", "2 5 5 3", 1);
        assert!(matches!(
            parse_field(&text),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nan_token_is_rejected() {
        let f = SpaceTimeField::constant(&grid2(), 1.0);
        let mut text = format_field(&f);
        text.push_str("nan\n");
        let text = text.replacen("1.0000000000000000e0\n", "nan\n", 1);
        assert!(matches!(
            parse_field(&text),
            Err(Error::NonFiniteEntry { .. })
        ));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(
            parse_field("nope\n"),
            Err(Error::MalformedField(_))
        ));
        assert!(parse_field("PARAKKT-FIELD v1\n3 5 5 5 2\n1 1 1 1\n").is_err());
        assert!(parse_field("PARAKKT-FIELD v1\n1 5 2\n1\n").is_err());
    }

    #[test]
    fn read_on_mismatched_grid_fails() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.field");
        write_field(&p, &SpaceTimeField::zeros(&grid2())).unwrap();
        let other = Grid::new(
            SpatialGrid::new(&[1.0, 0.7], &[5, 4]).unwrap(),
            TimeGrid::new(0.3, 4).unwrap(),
        );
        assert!(read_field_on(&p, &other).is_err());
        assert!(read_field_on(&p, &grid2()).is_ok());
    }

    proptest! {
        #[test]
        fn write_read_is_bitwise(vals in proptest::collection::vec(-1e300f64..1e300, 18)) {
            let g = grid2();
            let f = SpaceTimeField::from_vec(&g, vals).unwrap();
            let back = parse_field(&format_field(&f)).unwrap();
            prop_assert_eq!(back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            f.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(&**back.grid(), &*g);
        }
    }
}

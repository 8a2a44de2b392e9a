use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A structuring element: a set of `(dy, dx)` offsets that always includes
/// the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(isize, isize)>,
    label: String,
}

impl StructuringElement {
    /// Build from explicit `(dy, dx)` offsets. Order is kept; it decides
    /// nothing about results, only iteration order.
    pub fn from_offsets(offsets: Vec<(isize, isize)>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidStructuringElement("no offsets".into()));
        }
        if !offsets.contains(&(0, 0)) {
            return Err(Error::InvalidStructuringElement(
                "offsets must contain the origin".into(),
            ));
        }
        for (i, o) in offsets.iter().enumerate() {
            if offsets[..i].contains(o) {
                return Err(Error::InvalidStructuringElement(format!(
                    "duplicate offset {o:?}"
                )));
            }
        }
        Ok(Self {
            label: format!("custom:{}", offsets.len()),
            offsets,
        })
    }

    /// `n` x `n` square, `n` odd.
    pub fn square(n: usize) -> Result<Self> {
        let r = half_size(n)?;
        let offsets = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
            .collect();
        Ok(Self {
            offsets,
            label: format!("square:{n}"),
        })
    }

    /// Plus-shaped element spanning `n` pixels along each axis, `n` odd.
    pub fn cross(n: usize) -> Result<Self> {
        let r = half_size(n)?;
        let mut offsets = vec![(0, 0)];
        for k in 1..=r {
            offsets.extend([(-k, 0), (0, -k), (0, k), (k, 0)]);
        }
        Ok(Self {
            offsets,
            label: format!("cross:{n}"),
        })
    }

    /// 3x3 square: 8-connectivity.
    pub fn square3() -> Self {
        Self::square(3).expect("3 is odd")
    }

    /// 3x3 cross: 4-connectivity.
    pub fn cross3() -> Self {
        Self::cross(3).expect("3 is odd")
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Point reflection through the origin.
    pub fn reflect(&self) -> Self {
        Self {
            offsets: self.offsets.iter().map(|&(dy, dx)| (-dy, -dx)).collect(),
            label: format!("reflect({})", self.label),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.offsets
            .iter()
            .all(|&(dy, dx)| self.offsets.contains(&(-dy, -dx)))
    }
}

fn half_size(n: usize) -> Result<isize> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::InvalidStructuringElement(format!(
            "size must be odd and >= 1, got {n}"
        )));
    }
    Ok((n / 2) as isize)
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Parses `square:N` or `cross:N`.
impl FromStr for StructuringElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s.trim().split_once(':').ok_or_else(|| {
            Error::InvalidStructuringElement(format!("expected kind:N, got {s:?}"))
        })?;
        let n: usize = size
            .trim()
            .parse()
            .map_err(|_| Error::InvalidStructuringElement(format!("bad size in {s:?}")))?;
        match kind.trim() {
            "square" => Self::square(n),
            "cross" => Self::cross(n),
            other => Err(Error::InvalidStructuringElement(format!(
                "unknown kind {other:?}, expected square or cross"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_cross_sizes() {
        assert_eq!(StructuringElement::square(3).unwrap().len(), 9);
        assert_eq!(StructuringElement::square(5).unwrap().len(), 25);
        assert_eq!(StructuringElement::cross(3).unwrap().len(), 5);
        assert_eq!(StructuringElement::cross(5).unwrap().len(), 9);
        assert_eq!(StructuringElement::square(1).unwrap().offsets(), &[(0, 0)]);
    }

    #[test]
    fn parse_specs() {
        let se: StructuringElement = "square:3".parse().unwrap();
        assert_eq!(se, StructuringElement::square3());
        assert_eq!(se.to_string(), "square:3");
        assert!("cross:4".parse::<StructuringElement>().is_err());
        assert!("disk:3".parse::<StructuringElement>().is_err());
        assert!("square".parse::<StructuringElement>().is_err());
    }

    #[test]
    fn offsets_validated() {
        assert!(StructuringElement::from_offsets(vec![]).is_err());
        assert!(StructuringElement::from_offsets(vec![(0, 1)]).is_err());
        assert!(StructuringElement::from_offsets(vec![(0, 0), (0, 1), (0, 1)]).is_err());
        let se = StructuringElement::from_offsets(vec![(0, 0), (0, 1)]).unwrap();
        assert!(!se.is_symmetric());
        assert_eq!(se.reflect().offsets(), &[(0, 0), (0, -1)]);
        assert!(StructuringElement::square3().is_symmetric());
    }
}

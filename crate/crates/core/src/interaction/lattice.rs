use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A boundary loop given explicitly by its mode coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub site: Vec<i64>,
    pub coeffs: Vec<f64>,
}

/// Where frozen boundary loops come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySource {
    /// Every outside site carries the constant loop `ω ≡ value`.
    Constant { value: f64 },
    /// A JSON file `{"loops": [{"site": [...], "coeffs": [...]}, ...]}`.
    File { path: String },
    Inline { loops: Vec<BoundaryLoop> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryMode {
    /// `ξ ≡ 0` outside the box.
    Zero,
    /// Box wrapped into a torus.
    Periodic,
    Frozen { source: BoundarySource },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoundaryFile {
    loops: Vec<BoundaryLoop>,
}

impl BoundarySource {
    /// Explicit loops, reading the file if needed. `None` for constant sources.
    pub fn load(&self) -> Result<Option<Vec<BoundaryLoop>>> {
        match self {
            Self::Constant { .. } => Ok(None),
            Self::Inline { loops } => Ok(Some(loops.clone())),
            Self::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    crate::Error::Configuration(format!("cannot read boundary file {path}: {e}"))
                })?;
                let f: BoundaryFile = serde_json::from_str(&text)?;
                Ok(Some(f.loops))
            }
        }
    }
}

/// The box `Λ = Π_i [origin_i, origin_i + len_i - 1]` in `ℤ^d` with a boundary mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub d: usize,
    #[serde(rename = "box")]
    pub extent: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<i64>>,
    pub boundary: BoundaryMode,
}

impl LatticeGeometry {
    pub fn new(extent: Vec<usize>, boundary: BoundaryMode) -> Self {
        Self {
            d: extent.len(),
            extent,
            origin: None,
            boundary,
        }
    }

    /// A one-dimensional chain of `len` sites.
    pub fn chain(len: usize, boundary: BoundaryMode) -> Self {
        Self::new(vec![len], boundary)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.d >= 1, InvalidParameter, "lattice dimension must be ≥ 1");
        ensure!(
            self.extent.len() == self.d,
            InvalidParameter,
            "box has {} extents for d = {}",
            self.extent.len(),
            self.d
        );
        ensure!(self.extent.iter().all(|&l| l >= 1), InvalidParameter, "box must be nonempty");
        if let Some(o) = &self.origin {
            ensure!(o.len() == self.d, InvalidParameter, "origin has wrong dimension");
        }
        Ok(())
    }

    pub fn origin(&self) -> Vec<i64> {
        self.origin.clone().unwrap_or_else(|| vec![0; self.d])
    }

    pub fn n_sites(&self) -> usize {
        self.extent.iter().product()
    }

    /// Sites of `Λ` in lexicographic order (last coordinate fastest).
    pub fn sites(&self) -> Vec<Vec<i64>> {
        let o = self.origin();
        (0..self.n_sites())
            .map(|mut idx| {
                let mut s = vec![0i64; self.d];
                for i in (0..self.d).rev() {
                    s[i] = o[i] + (idx % self.extent[i]) as i64;
                    idx /= self.extent[i];
                }
                s
            })
            .collect()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        let o = self.origin();
        site.len() == self.d
            && site
                .iter()
                .zip(&o)
                .zip(&self.extent)
                .all(|((&s, &o), &l)| s >= o && s < o + l as i64)
    }

    /// Lexicographic index of a site of `Λ`.
    pub fn index_of(&self, site: &[i64]) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let o = self.origin();
        let mut idx = 0usize;
        for i in 0..self.d {
            idx = idx * self.extent[i] + (site[i] - o[i]) as usize;
        }
        Some(idx)
    }

    /// Wraps a site into the box (torus arithmetic).
    pub fn wrap(&self, site: &[i64]) -> Vec<i64> {
        let o = self.origin();
        site.iter()
            .zip(&o)
            .zip(&self.extent)
            .map(|((&s, &o), &l)| o + (s - o).rem_euclid(l as i64))
            .collect()
    }

    /// Cyclic shift of the box by `shift`, as a permutation of site indices:
    /// `perm[i]` is the index of the image of site `i`.
    pub fn translation(&self, shift: &[i64]) -> Vec<usize> {
        self.sites()
            .iter()
            .map(|s| {
                let t: Vec<i64> = s.iter().zip(shift).map(|(a, b)| a + b).collect();
                self.index_of(&self.wrap(&t)).expect("wrapped site inside box")
            })
            .collect()
    }
}

/// Endpoint of a bond seen from a site of `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partner {
    Inner(usize),
    Outer(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub partner: Partner,
    pub strength: f64,
}

/// Per-site bond lists plus the outside sites they reach.
#[derive(Debug, Clone, Default)]
pub struct Neighbourhood {
    pub links: Vec<Vec<Link>>,
    pub outer_sites: Vec<Vec<i64>>,
}

impl Neighbourhood {
    /// Builds link lists from translation-invariant bonds `(offset, J)`.
    /// Periodic geometries wrap offsets and drop self-links.
    pub fn build(geom: &LatticeGeometry, bonds: &[(Vec<i64>, f64)]) -> Self {
        let sites = geom.sites();
        let periodic = matches!(geom.boundary, BoundaryMode::Periodic);
        let mut outer_index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut outer_sites = vec![];
        let mut links = Vec::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            let mut row = vec![];
            for (off, j) in bonds {
                let t: Vec<i64> = s.iter().zip(off).map(|(a, b)| a + b).collect();
                let partner = if periodic {
                    let idx = geom.index_of(&geom.wrap(&t)).expect("wrapped site inside box");
                    if idx == i {
                        continue;
                    }
                    Partner::Inner(idx)
                } else if let Some(idx) = geom.index_of(&t) {
                    Partner::Inner(idx)
                } else {
                    let next = outer_sites.len();
                    let idx = *outer_index.entry(t.clone()).or_insert_with(|| {
                        outer_sites.push(t.clone());
                        next
                    });
                    Partner::Outer(idx)
                };
                row.push(Link { partner, strength: *j });
            }
            links.push(row);
        }
        Self { links, outer_sites }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_indexing() {
        let g = LatticeGeometry::new(vec![2, 3], BoundaryMode::Zero);
        let s = g.sites();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], vec![0, 0]);
        assert_eq!(s[1], vec![0, 1]);
        assert_eq!(s[3], vec![1, 0]);
        for (i, site) in s.iter().enumerate() {
            assert_eq!(g.index_of(site), Some(i));
        }
        assert_eq!(g.index_of(&[2, 0]), None);
    }

    #[test]
    fn periodic_links_wrap() {
        let g = LatticeGeometry::chain(4, BoundaryMode::Periodic);
        let nb = Neighbourhood::build(&g, &[(vec![1], 1.0), (vec![-1], 1.0)]);
        assert!(nb.outer_sites.is_empty());
        assert_eq!(nb.links[0][1].partner, Partner::Inner(3));
        let g1 = LatticeGeometry::chain(1, BoundaryMode::Periodic);
        let nb = Neighbourhood::build(&g1, &[(vec![1], 1.0), (vec![-1], 1.0)]);
        assert!(nb.links[0].is_empty());
    }

    #[test]
    fn open_box_collects_outer_sites() {
        let g = LatticeGeometry::chain(3, BoundaryMode::Zero);
        let nb = Neighbourhood::build(&g, &[(vec![1], 1.0), (vec![-1], 1.0)]);
        assert_eq!(nb.outer_sites, vec![vec![-1], vec![3]]);
        assert_eq!(nb.links[1].len(), 2);
    }

    #[test]
    fn translation_is_a_permutation() {
        let g = LatticeGeometry::new(vec![3, 2], BoundaryMode::Periodic);
        let mut p = g.translation(&[1, 1]);
        p.sort();
        assert_eq!(p, (0..6).collect::<Vec<_>>());
    }
}

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::coupling::{CouplingSpec, Envelope};
use super::lattice::{BoundaryLoop, BoundaryMode, BoundarySource, LatticeGeometry, Neighbourhood, Partner};
use super::potential::OneSitePotential;
use crate::error::{ensure, Error, Result};
use crate::spectral::{fill_bridge, OscillatorParams, SpectralBasis, SpectralLoop};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub n_modes: usize,
    /// Synthesis grid size; defaults to `max(4N, 8)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl Discretization {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes, grid: None }
    }

    pub fn n_points(&self) -> usize {
        self.grid.unwrap_or((4 * self.n_modes).max(8))
    }
}

/// Full description of a finite-volume model. Serialized as the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub oscillator: OscillatorParams,
    #[serde(default)]
    pub potential: OneSitePotential,
    #[serde(default = "no_coupling")]
    pub coupling: CouplingSpec,
    pub lattice: LatticeGeometry,
    pub discretization: Discretization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

fn no_coupling() -> CouplingSpec {
    CouplingSpec::None
}

pub const PRESET_NAMES: &[&str] = &[
    "gaussian-1site",
    "quartic-1site",
    "decoupled",
    "model1-quartic-d1-L4",
    "model1-harmonic-ring-L4",
    "model2-sextic-d1-L4",
    "model3-quartic-d1-L4",
    "model1-quartic-d2-L3",
];

impl ModelSpec {
    pub fn single_site(oscillator: OscillatorParams, potential: OneSitePotential, n_modes: usize) -> Self {
        Self {
            oscillator,
            potential,
            coupling: CouplingSpec::None,
            lattice: LatticeGeometry::chain(1, BoundaryMode::Zero),
            discretization: Discretization::new(n_modes),
            preset: None,
        }
    }

    /// Built-in configurations. `model1`, `model2`, `model3` alias the L4 chains.
    pub fn preset(name: &str) -> Result<Self> {
        let unit = OscillatorParams::new(1.0, 1.0, 1.0)?;
        let chain = |len, boundary| LatticeGeometry::chain(len, boundary);
        let mut spec = match name {
            "gaussian-1site" => Self::single_site(unit, OneSitePotential::zero(), 16),
            "quartic-1site" => Self::single_site(unit, OneSitePotential::quartic(1.0), 8),
            "decoupled" => Self {
                lattice: chain(4, BoundaryMode::Zero),
                ..Self::single_site(unit, OneSitePotential::zero(), 8)
            },
            "model1" | "model1-quartic-d1-L4" => Self {
                coupling: CouplingSpec::HarmonicNn { j: 1.0 },
                lattice: chain(4, BoundaryMode::Zero),
                ..Self::single_site(unit, OneSitePotential::quartic(1.0), 8)
            },
            "model1-harmonic-ring-L4" => Self {
                coupling: CouplingSpec::HarmonicNn { j: 1.0 },
                lattice: chain(4, BoundaryMode::Periodic),
                ..Self::single_site(unit, OneSitePotential::zero(), 8)
            },
            "model2" | "model2-sextic-d1-L4" => Self {
                coupling: CouplingSpec::PolyPairNn {
                    coeffs: vec![0.0, 0.5, 0.0, 0.1],
                },
                lattice: chain(4, BoundaryMode::Zero),
                ..Self::single_site(unit, OneSitePotential::polynomial(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), 8)
            },
            "model3" | "model3-quartic-d1-L4" => Self {
                coupling: CouplingSpec::PairMatrix {
                    j0: 0.2,
                    envelope: Envelope::Exponential { delta: 2.0 },
                    cutoff: 3,
                    pair_coeffs: vec![0.0, 1.0],
                },
                lattice: chain(4, BoundaryMode::Zero),
                ..Self::single_site(unit, OneSitePotential::quartic(1.0), 8)
            },
            "model1-quartic-d2-L3" => Self {
                coupling: CouplingSpec::HarmonicNn { j: 0.5 },
                lattice: LatticeGeometry::new(vec![3, 3], BoundaryMode::Zero),
                ..Self::single_site(unit, OneSitePotential::quartic(1.0), 4)
            },
            _ => {
                return Err(Error::Configuration(format!(
                    "unknown preset '{name}'; known presets: {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        spec.preset = Some(name.to_string());
        Ok(spec)
    }

    /// Parses a config document. A `"preset"` key supplies defaults that the
    /// remaining top-level keys override.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(map) = value else {
            return Err(Error::Configuration("model config must be a JSON object".into()));
        };
        let merged = match map.get("preset").and_then(Value::as_str) {
            Some(name) => {
                let Value::Object(mut base) = serde_json::to_value(Self::preset(name)?)? else {
                    unreachable!("specs serialize to objects")
                };
                for (k, v) in map {
                    base.insert(k, v);
                }
                Value::Object(base)
            }
            None => Value::Object(map),
        };
        let spec: Self = serde_json::from_value(merged)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.oscillator.validate()?;
        self.potential.validate()?;
        self.coupling.validate()?;
        self.lattice.validate()?;
        let m = self.discretization.n_points();
        ensure!(
            m >= 2 * self.discretization.n_modes + 2,
            InvalidParameter,
            "grid of {m} points is too coarse for {} modes (need ≥ 2N+2)",
            self.discretization.n_modes
        );
        if let BoundaryMode::Periodic = self.lattice.boundary {
            ensure!(
                !matches!(self.coupling, CouplingSpec::PairMatrix { .. })
                    || self.lattice.extent.iter().all(|&l| l > 2 * self.coupling.range()),
                Configuration,
                "periodic box must be wider than twice the interaction radius"
            );
        }
        Ok(())
    }

    pub fn with_n_modes(mut self, n_modes: usize) -> Self {
        self.discretization = Discretization::new(n_modes);
        self
    }

    pub fn with_lattice(mut self, lattice: LatticeGeometry) -> Self {
        self.lattice = lattice;
        self
    }

    /// Stable content hash (hex SHA-256 of the canonical JSON, first 16 chars).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// A validated model with precomputed basis, bond lists and boundary loops.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    basis: Arc<SpectralBasis>,
    sites: Vec<Vec<i64>>,
    nbhd: Neighbourhood,
    pair: OneSitePotential,
    boundary_coeffs: Vec<Vec<f64>>,
    boundary_values: Vec<Vec<f64>>,
    hash: String,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.discretization;
        let basis = Arc::new(SpectralBasis::new(spec.oscillator, d.n_modes, d.n_points())?);
        Self::with_basis(spec, basis)
    }

    pub fn with_basis(spec: ModelSpec, basis: Arc<SpectralBasis>) -> Result<Self> {
        spec.validate()?;
        let geom = &spec.lattice;
        let bonds: Vec<(Vec<i64>, f64)> = if spec.coupling.is_decoupled() {
            vec![]
        } else {
            spec.coupling
                .bonds(geom.d)
                .into_iter()
                .map(|b| (b.offset, b.strength))
                .collect()
        };
        let nbhd = Neighbourhood::build(geom, &bonds);
        let n = basis.n_modes();
        let boundary_coeffs = match &geom.boundary {
            BoundaryMode::Zero | BoundaryMode::Periodic => vec![vec![0.0; 2 * n + 1]; nbhd.outer_sites.len()],
            BoundaryMode::Frozen { source } => match source.load().map_err(|e| match e {
                Error::Configuration(msg) => Error::Configuration(format!("{msg} (needed for {})", site_span(&nbhd.outer_sites))),
                e => e,
            })? {
                None => {
                    let BoundarySource::Constant { value } = source else {
                        unreachable!()
                    };
                    let c = SpectralLoop::constant(*value, spec.oscillator.beta, n);
                    vec![c.into_coeffs(); nbhd.outer_sites.len()]
                }
                Some(loops) => resolve_boundary(&nbhd.outer_sites, &loops, n)?,
            },
        };
        let boundary_values = boundary_coeffs.iter().map(|c| basis.synthesize(c)).collect();
        let hash = spec.hash();
        Ok(Self {
            sites: geom.sites(),
            pair: OneSitePotential::polynomial(spec.coupling.pair_coeffs()),
            spec,
            basis,
            nbhd,
            boundary_coeffs,
            boundary_values,
            hash,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::new(ModelSpec::preset(name)?)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<SpectralBasis> {
        self.basis.clone()
    }

    pub fn params(&self) -> &OscillatorParams {
        self.basis.params()
    }

    pub fn potential(&self) -> &OneSitePotential {
        &self.spec.potential
    }

    /// Pair potential `w` in `W = J·w(q - q')`.
    pub fn pair_potential(&self) -> &OneSitePotential {
        &self.pair
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.spec.lattice
    }

    pub fn sites(&self) -> &[Vec<i64>] {
        &self.sites
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn n_coeffs(&self) -> usize {
        self.basis.n_coeffs()
    }

    pub fn n_points(&self) -> usize {
        self.basis.n_points()
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn neighbourhood(&self) -> &Neighbourhood {
        &self.nbhd
    }

    pub fn outer_sites(&self) -> &[Vec<i64>] {
        &self.nbhd.outer_sites
    }

    pub fn boundary_coeffs(&self, outer: usize) -> &[f64] {
        &self.boundary_coeffs[outer]
    }

    pub fn boundary_values(&self, outer: usize) -> &[f64] {
        &self.boundary_values[outer]
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        ensure!(
            site < self.n_sites(),
            Domain,
            "site index {site} outside the volume of {} sites",
            self.n_sites()
        );
        Ok(())
    }

    pub fn site_index(&self, site: &[i64]) -> Result<usize> {
        self.geometry()
            .index_of(site)
            .ok_or_else(|| Error::Domain(format!("site {site:?} is not in the volume")))
    }

    /// Grid values of a bond partner.
    #[inline]
    pub fn partner_values<'a>(&'a self, state: &'a LatticeState, p: Partner) -> &'a [f64] {
        match p {
            Partner::Inner(j) => state.site_values(j),
            Partner::Outer(o) => &self.boundary_values[o],
        }
    }

    /// The same interaction restricted to the sub-box `sub` with every other
    /// site frozen at its current value in `state`.
    pub fn restricted(&self, sub_extent: Vec<usize>, sub_origin: Vec<i64>, state: &LatticeState) -> Result<Model> {
        let mut lattice = LatticeGeometry::new(sub_extent, BoundaryMode::Zero);
        lattice.origin = Some(sub_origin);
        lattice.validate()?;
        for s in lattice.sites() {
            ensure!(
                self.geometry().contains(&s),
                Domain,
                "sub-volume site {s:?} is outside the parent volume"
            );
        }
        let periodic = matches!(self.geometry().boundary, BoundaryMode::Periodic);
        let sub_sites = lattice.sites();
        // every site the sub-volume can reach, read from the parent configuration
        let mut loops = vec![];
        let mut seen = std::collections::HashSet::new();
        let range = self.spec.coupling.range() as i64;
        for s in &sub_sites {
            for off in super::coupling::cube_offsets(lattice.d, range) {
                let t: Vec<i64> = s.iter().zip(&off).map(|(a, b)| a + b).collect();
                if lattice.contains(&t) || !seen.insert(t.clone()) {
                    continue;
                }
                let coeffs = if let Some(i) = self.geometry().index_of(&t) {
                    state.site_coeffs(i).to_vec()
                } else if periodic {
                    let i = self.geometry().index_of(&self.geometry().wrap(&t)).expect("wrapped");
                    state.site_coeffs(i).to_vec()
                } else if let Some(o) = self.nbhd.outer_sites.iter().position(|x| *x == t) {
                    self.boundary_coeffs[o].clone()
                } else {
                    vec![0.0; self.n_coeffs()]
                };
                loops.push(BoundaryLoop { site: t, coeffs });
            }
        }
        lattice.boundary = BoundaryMode::Frozen {
            source: BoundarySource::Inline { loops },
        };
        let spec = ModelSpec {
            lattice,
            preset: None,
            ..self.spec.clone()
        };
        if periodic {
            // wrapped partners of the parent torus are not neighbours of the block itself
            ensure!(
                self.geometry().extent.iter().all(|&l| l as i64 > 2 * range),
                Configuration,
                "periodic parent box too small for a frozen sub-volume"
            );
        }
        Model::with_basis(spec, self.basis.clone())
    }
}

fn resolve_boundary(outer: &[Vec<i64>], loops: &[BoundaryLoop], n_modes: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(outer.len());
    let mut missing = vec![];
    for site in outer {
        match loops.iter().find(|l| &l.site == site) {
            Some(l) => {
                let lp = SpectralLoop::from_coeffs(l.coeffs.clone())
                    .map_err(|e| Error::Configuration(format!("boundary loop at {site:?}: {e}")))?;
                out.push(lp.resized(n_modes).into_coeffs());
            }
            None => missing.push(site.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Configuration(format!(
            "frozen boundary is missing loops for {} of {} sites within interaction range, {}",
            missing.len(),
            outer.len(),
            site_span(&missing)
        )));
    }
    Ok(out)
}

/// `"spanning [lo]..=[hi]"` over a nonempty site list.
fn site_span(sites: &[Vec<i64>]) -> String {
    let Some(first) = sites.first() else {
        return "no outer sites".into();
    };
    let d = first.len();
    let lo: Vec<i64> = (0..d).map(|i| sites.iter().map(|s| s[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|i| sites.iter().map(|s| s[i]).max().unwrap()).collect();
    format!("spanning {lo:?}..={hi:?}")
}

/// A finite-volume configuration: mode coefficients per site with cached grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    n_coeffs: usize,
    n_points: usize,
    coeffs: Vec<f64>,
    values: Vec<f64>,
}

impl LatticeState {
    pub fn zeros(model: &Model) -> Self {
        Self {
            n_coeffs: model.n_coeffs(),
            n_points: model.n_points(),
            coeffs: vec![0.0; model.n_sites() * model.n_coeffs()],
            values: vec![0.0; model.n_sites() * model.n_points()],
        }
    }

    pub fn from_coeffs(model: &Model, coeffs: Vec<f64>) -> Result<Self> {
        ensure!(
            coeffs.len() == model.n_sites() * model.n_coeffs(),
            Configuration,
            "state has {} coefficients, model needs {}",
            coeffs.len(),
            model.n_sites() * model.n_coeffs()
        );
        let mut s = Self::zeros(model);
        s.coeffs = coeffs;
        s.refresh(model);
        Ok(s)
    }

    pub fn from_loops(model: &Model, loops: &[SpectralLoop]) -> Result<Self> {
        ensure!(loops.len() == model.n_sites(), Configuration, "need one loop per site");
        let mut c = Vec::with_capacity(model.n_sites() * model.n_coeffs());
        for l in loops {
            c.extend_from_slice(l.resized(model.n_modes()).coeffs());
        }
        Self::from_coeffs(model, c)
    }

    /// Independent bridge draws at every site.
    pub fn bridge<R: Rng + ?Sized>(model: &Model, rng: &mut R) -> Self {
        let mut s = Self::zeros(model);
        for i in 0..model.n_sites() {
            fill_bridge(model.params(), s.site_coeffs_mut_raw(i), rng);
        }
        s.refresh(model);
        s
    }

    pub fn n_sites(&self) -> usize {
        self.coeffs.len() / self.n_coeffs
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn site_coeffs(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.n_coeffs..(i + 1) * self.n_coeffs]
    }

    pub fn site_values(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_points..(i + 1) * self.n_points]
    }

    pub fn site_loop(&self, i: usize) -> SpectralLoop {
        SpectralLoop::from_coeffs(self.site_coeffs(i).to_vec()).expect("odd length")
    }

    fn site_coeffs_mut_raw(&mut self, i: usize) -> &mut [f64] {
        &mut self.coeffs[i * self.n_coeffs..(i + 1) * self.n_coeffs]
    }

    /// Mutable grid values, bypassing the coefficient representation. Only
    /// meaningful for pointwise computations; `refresh` restores consistency.
    pub fn site_values_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_points..(i + 1) * self.n_points]
    }

    pub fn set_site(&mut self, model: &Model, i: usize, coeffs: &[f64]) {
        self.site_coeffs_mut_raw(i).copy_from_slice(coeffs);
        self.refresh_site(model, i);
    }

    /// Replaces site `i` with precomputed coefficients and grid values.
    pub fn set_site_with_values(&mut self, i: usize, coeffs: &[f64], values: &[f64]) {
        self.site_coeffs_mut_raw(i).copy_from_slice(coeffs);
        self.site_values_mut(i).copy_from_slice(values);
    }

    /// Adds `θ` to coefficient `mode` of site `i`.
    pub fn shift(&mut self, model: &Model, site: usize, mode: i64, theta: f64) {
        let nm = model.n_modes() as i64;
        let idx = (mode + nm) as usize;
        self.coeffs[site * self.n_coeffs + idx] += theta;
        let row = model.basis().phi_row(idx);
        let m = self.n_points;
        for (v, f) in self.values[site * m..(site + 1) * m].iter_mut().zip(row) {
            *v += theta * f;
        }
    }

    pub fn refresh_site(&mut self, model: &Model, i: usize) {
        let (n, m) = (self.n_coeffs, self.n_points);
        let (c, v) = (&self.coeffs[i * n..(i + 1) * n], &mut self.values[i * m..(i + 1) * m]);
        model.basis().synthesize_into(c, v);
    }

    pub fn refresh(&mut self, model: &Model) {
        for i in 0..self.n_sites() {
            self.refresh_site(model, i);
        }
    }

    /// Relabels sites: the new site `perm[i]` carries the old loop at `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        let (n, m) = (self.n_coeffs, self.n_points);
        for (i, &j) in perm.iter().enumerate() {
            out.coeffs[j * n..(j + 1) * n].copy_from_slice(self.site_coeffs(i));
            out.values[j * m..(j + 1) * m].copy_from_slice(self.site_values(i));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_hash_is_stable() {
        for name in PRESET_NAMES {
            let m = Model::preset(name).unwrap();
            assert_eq!(m.hash().len(), 16);
            assert_eq!(m.hash(), Model::preset(name).unwrap().hash());
        }
        assert!(ModelSpec::preset("nope").is_err());
        assert_ne!(Model::preset("model1").unwrap().hash(), Model::preset("model2").unwrap().hash());
    }

    #[test]
    fn json_round_trip_and_preset_override() {
        let spec = ModelSpec::preset("model1-quartic-d1-L4").unwrap();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        assert_eq!(ModelSpec::from_json(&text).unwrap(), spec);
        let over = ModelSpec::from_json(
            r#"{"preset": "model1-quartic-d1-L4", "coupling": {"kind": "harmonic_nn", "j": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(over.coupling, CouplingSpec::HarmonicNn { j: 0.5 });
        assert_eq!(over.lattice, spec.lattice);
    }

    #[test]
    fn frozen_boundary_reports_missing_sites() {
        let mut spec = ModelSpec::preset("model1").unwrap();
        spec.lattice.boundary = BoundaryMode::Frozen {
            source: BoundarySource::Inline {
                loops: vec![BoundaryLoop {
                    site: vec![-1],
                    coeffs: vec![0.0],
                }],
            },
        };
        let err = Model::new(spec.clone()).unwrap_err().to_string();
        assert!(err.contains("[4]..=[4]"), "{err}");
        spec.lattice.boundary = BoundaryMode::Frozen {
            source: BoundarySource::File {
                path: "/nonexistent/boundary.json".into(),
            },
        };
        let err = Model::new(spec).unwrap_err().to_string();
        assert!(err.contains("boundary.json") && err.contains("spanning"), "{err}");
    }

    #[test]
    fn boundary_file_is_loaded_and_resized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        std::fs::write(
            &path,
            r#"{"loops": [{"site": [-1], "coeffs": [1.0]}, {"site": [4], "coeffs": [0.0, 2.0, 0.0]}]}"#,
        )
        .unwrap();
        let mut spec = ModelSpec::preset("model1").unwrap();
        spec.lattice.boundary = BoundaryMode::Frozen {
            source: BoundarySource::File {
                path: path.to_string_lossy().into_owned(),
            },
        };
        let m = Model::new(spec).unwrap();
        assert_eq!(m.boundary_coeffs(0).len(), m.n_coeffs());
        assert_eq!(m.boundary_coeffs(0)[m.n_modes()], 1.0);
        assert_eq!(m.boundary_coeffs(1)[m.n_modes()], 2.0);
    }

    #[test]
    fn shift_keeps_values_consistent() {
        use rand::SeedableRng;
        let m = Model::preset("model1").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = LatticeState::bridge(&m, &mut rng);
        s.shift(&m, 2, -3, 0.7);
        let mut t = s.clone();
        t.refresh(&m);
        for (a, b) in s.site_values(2).iter().zip(t.site_values(2)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

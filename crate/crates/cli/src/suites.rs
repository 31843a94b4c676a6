//! The verification suites behind `qcrystal verify`.

use qcrystal::gibbs::{collect_samples, matsubara, ChainConfig, PolyObservable, SampleStore, ShiftDirection};
use qcrystal::interaction::{BoundaryMode, CouplingSpec, LatticeGeometry, Model};
use qcrystal::oracle::{ed_matsubara, HarmonicLattice};
use qcrystal::spectral::{green_continuum, green_series};
use qcrystal::stats::Estimate;
use qcrystal::verify::{
    catalog, condition_constants, dlr_test, flow_test, holder_scaling, ibp_test, log_spaced, moment_suite, wick_check,
    ConditionOptions, MomentQuantity, MomentSpec, PointObservable, RedrawConfig, Sidedness, SubVolume, TestVerdict,
    VerifyContext,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::manifest::{Suite, VerifyOptions};

/// Smallest ratio between the ends of the Hölder fit range.
const HOLDER_DECADES: f64 = 1.5;

pub struct SuiteInput<'a> {
    pub model: &'a Model,
    /// The run's samples, or why there are none.
    pub samples: Result<&'a SampleStore, String>,
    pub chain: &'a ChainConfig,
    pub options: &'a VerifyOptions,
    pub ctx: VerifyContext,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub verdicts: Vec<TestVerdict>,
    pub table: Value,
    /// Set when the suite does not apply to the model.
    pub skipped: Option<String>,
}

enum Run {
    Done(Vec<TestVerdict>, Value),
    Skip(String),
}

type SuiteResult = anyhow::Result<Run>;

pub fn run_suite(suite: Suite, input: &SuiteInput) -> SuiteOutcome {
    let result = match suite {
        Suite::Ibp => with_samples(input, ibp),
        Suite::Flow => with_samples(input, flow),
        Suite::Dlr => with_samples(input, dlr),
        Suite::Holder => with_samples(input, holder),
        Suite::Matsubara => with_samples(input, matsubara_suite),
        Suite::Moments => moments(input),
        Suite::Conditions => conditions(input),
        Suite::All => unreachable!("suite list is expanded before running"),
    };
    let hash = input.model.hash();
    let seed = input.ctx.seed;
    let (verdicts, table, skipped) = match result {
        Ok(Run::Done(v, t)) => (v, t, None),
        Ok(Run::Skip(why)) => (vec![], Value::Null, Some(why)),
        Err(e) => (vec![TestVerdict::error(format!("{}:error", suite.name()), suite.name(), format!("{e:#}"))], Value::Null, None),
    };
    SuiteOutcome {
        suite,
        verdicts: verdicts.into_iter().map(|v| v.with_context(seed, hash)).collect(),
        table,
        skipped,
    }
}

fn with_samples(input: &SuiteInput, f: fn(&SuiteInput, &SampleStore) -> SuiteResult) -> SuiteResult {
    match input.samples {
        Ok(s) => f(input, s),
        Err(ref why) => Err(anyhow::Error::new(qcrystal::Error::Dependency(why.clone()))),
    }
}

fn ibp(input: &SuiteInput, samples: &SampleStore) -> SuiteResult {
    let m = input.model;
    let mut sites = vec![0, m.n_sites() / 2];
    sites.dedup();
    let top = m.n_modes().min(2) as i64;
    let mut modes = vec![0];
    for k in 1..=top {
        modes.extend([k, -k]);
    }
    let dirs: Vec<ShiftDirection> = sites.iter().flat_map(|&s| modes.iter().map(move |&k| ShiftDirection::unit(s, k))).collect();
    let v = ibp_test(m, samples, &dirs, &catalog(), input.ctx)?;
    Ok(Run::Done(v, json!({ "directions": dirs.iter().map(|d| (d.site, d.mode)).collect::<Vec<_>>(), "n_samples": samples.len() })))
}

fn flow(input: &SuiteInput, samples: &SampleStore) -> SuiteResult {
    let dir = ShiftDirection::new(0, 0, input.options.flow_theta);
    let v = flow_test(input.model, samples, dir, &catalog(), input.ctx)?;
    Ok(Run::Done(v, json!({ "site": 0, "mode": 0, "theta": dir.theta, "n_samples": samples.len() })))
}

/// Central box of about a third of the volume in every direction.
fn central_block(geom: &LatticeGeometry) -> SubVolume {
    let origin = geom.origin();
    let extent: Vec<usize> = geom.extent.iter().map(|&l| (l / 3).max(1)).collect();
    let origin = origin.iter().zip(&geom.extent).zip(&extent).map(|((&o, &l), &e)| o + ((l - e) / 2) as i64).collect();
    SubVolume { extent, origin }
}

fn dlr(input: &SuiteInput, samples: &SampleStore) -> SuiteResult {
    let m = input.model;
    let block = central_block(m.geometry());
    let obs: Vec<_> = (0..m.n_sites().min(16)).map(PointObservable::square).collect();
    let redraw = RedrawConfig::default();
    let v = dlr_test(m, &block, samples, &obs, redraw, input.ctx)?;
    Ok(Run::Done(v, json!({ "block": block, "redraw": redraw, "observables": obs.len() })))
}

fn holder(input: &SuiteInput, samples: &SampleStore) -> SuiteResult {
    let m = input.model;
    let beta = m.params().beta;
    let n = m.n_modes() as f64;
    // below a few grid spacings the truncated loop is smooth and the scaling law is out of reach
    let (lo, hi) = (0.32 * beta / n, 0.2 * beta);
    if hi / lo < 10f64.powf(HOLDER_DECADES) {
        return Ok(Run::Skip(format!(
            "{} modes resolve only [{lo:.3}, {hi:.3}]; the scaling fit needs {HOLDER_DECADES} decades (at least 51 modes)",
            m.n_modes()
        )));
    }
    let rhos = log_spaced(lo, hi, 8);
    let shifts = input.options.time_shifts;
    let r = holder_scaling(m, samples, 0, &[1, 2], &rhos, shifts, input.ctx)?;
    let mut verdicts = r.verdicts.clone();
    let gaussian = m.potential().is_zero() && m.spec().coupling.is_decoupled();
    if gaussian {
        verdicts.extend(wick_check(m, samples, 0, &rhos, shifts, input.ctx)?);
    }
    Ok(Run::Done(verdicts, json!({ "report": r, "wick": gaussian })))
}

fn matsubara_suite(input: &SuiteInput, samples: &SampleStore) -> SuiteResult {
    let m = input.model;
    let p = *m.params();
    let beta = p.beta;
    let taus = [0.0, 0.25 * beta, 0.5 * beta];
    let shifts = input.options.time_shifts;
    let q = PolyObservable::q();
    let single = m.n_sites() == 1 && m.spec().coupling.is_decoupled();
    if single && m.potential().polynomial_coeffs().is_some() {
        let mut verdicts = vec![];
        let mut rows = vec![];
        for &t in &taus {
            let e = matsubara(m, samples, &[(0, q.clone()), (0, q.clone())], &[0.0, t], shifts)?;
            // modes beyond the truncation are nearly free
            let tail = green_continuum(t, &p) - green_series(t, &p, m.n_modes());
            let ed = ed_matsubara(m.potential(), p, input.options.ed_dim, &[q.clone(), q.clone()], &[0.0, t])?;
            let diff = (e.mean + tail - ed.value).abs();
            let bound = input.ctx.threshold * e.se + tail.abs();
            verdicts.push(TestVerdict::bounded(format!("matsubara:qq[τ={t}]"), "matsubara-ed", diff, e.se, bound, Sidedness::Upper, samples.len()));
            rows.push(json!({ "tau": t, "mc": e, "tail": tail, "ed": ed }));
        }
        return Ok(Run::Done(verdicts, json!({ "oracle": "ed", "rows": rows })));
    }
    let harmonic = matches!(m.spec().coupling, CouplingSpec::HarmonicNn { .. } | CouplingSpec::None);
    if harmonic {
        if let Ok(h) = HarmonicLattice::new(m, Some(m.n_modes())) {
            let mut verdicts = vec![];
            let mut rows = vec![];
            let origin = &m.sites()[0];
            for entry in h.table(&taus) {
                if &entry.site_a != origin {
                    continue;
                }
                let j = m.sites().iter().position(|s| *s == entry.site_b).expect("oracle sites lie in the box");
                let e = matsubara(m, samples, &[(0, q.clone()), (j, q.clone())], &[0.0, entry.delta_tau], shifts)?;
                let diff = Estimate { mean: e.mean - entry.value, se: e.se };
                verdicts.push(TestVerdict::two_sided(
                    format!("matsubara:cov[{j},τ={}]", entry.delta_tau),
                    "matsubara-harmonic",
                    diff,
                    samples.len(),
                    input.ctx.threshold,
                ));
                rows.push(json!({ "site": j, "tau": entry.delta_tau, "mc": e, "exact": entry.value }));
            }
            return Ok(Run::Done(verdicts, json!({ "oracle": "harmonic", "rows": rows })));
        }
    }
    Ok(Run::Skip("no exact Matsubara oracle for this model (needs a single polynomial site or a harmonic periodic box)".into()))
}

/// Nested boxes used for the volume ladder. Tori shorter than 3 are
/// degenerate (self-bonds, doubled bonds), so periodic ladders start at 3.
fn ladder_geometries(geom: &LatticeGeometry, options: &VerifyOptions) -> Vec<LatticeGeometry> {
    let periodic = matches!(options.ladder_boundary, BoundaryMode::Periodic);
    let lens: &[usize] = match (geom.d, periodic) {
        (1, false) => &[1, 2, 4, 8],
        (1, true) => &[3, 6, 12],
        (_, false) => &[1, 2, 3],
        (_, true) => &[3, 6],
    };
    lens.iter().map(|&l| LatticeGeometry::new(vec![l; geom.d], options.ladder_boundary.clone())).collect()
}

fn moments(input: &SuiteInput) -> SuiteResult {
    let m = input.model;
    let geoms = ladder_geometries(m.geometry(), input.options);
    let models: Vec<Model> = geoms
        .into_iter()
        .map(|g| Model::with_basis(m.spec().clone().with_lattice(g), m.basis_arc()))
        .collect::<Result<_, _>>()?;
    let mut cfg = input.chain.clone();
    if let Some(n) = input.options.ladder_sweeps {
        cfg.n_sweeps = n;
        cfg.burn_in = cfg.burn_in.min(n / 2);
    }
    cfg.checkpoint_every = None;
    let stores: Vec<SampleStore> = models
        .par_iter()
        .enumerate()
        .map(|(i, lm)| {
            let c = ChainConfig { seed: input.ctx.seed.wrapping_add(i as u64 + 1), ..cfg.clone() };
            collect_samples(lm, &c).map(|r| r.0)
        })
        .collect::<Result<_, _>>()?;
    let ladder: Vec<_> = models.iter().zip(&stores).collect();
    let specs = [
        MomentSpec::new(MomentQuantity::Hoelder, 2.0, 0.25),
        MomentSpec::new(MomentQuantity::Sobolev, 2.0, 0.25),
        MomentSpec::new(MomentQuantity::Coercivity, 1.0, 0.0),
        MomentSpec::new(MomentQuantity::DriftL1, 1.0, 0.0),
    ];
    let r = moment_suite(&ladder, &specs, input.ctx)?;
    let volumes: Vec<usize> = models.iter().map(Model::n_sites).collect();
    Ok(Run::Done(r.verdicts.clone(), json!({ "volumes": volumes, "sweeps": cfg.n_sweeps, "boundary": input.options.ladder_boundary, "rows": r.rows })))
}

fn conditions(input: &SuiteInput) -> SuiteResult {
    let m = input.model;
    let opts = ConditionOptions::default();
    let table = (1..=4).map(|q| condition_constants(m, q as f64, opts)).collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = table.iter().map(|c| c.xi_q).collect();
    // Ξ is affine in Q: all second differences vanish
    let curvature = xs.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
    let scale = xs.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let mut verdicts = vec![TestVerdict::bounded("conditions:xi_affine", "xi", curvature, 0.0, 1e-12 * scale, Sidedness::Upper, xs.len())];
    let negative = table
        .iter()
        .flat_map(|c| [c.xi_q, c.xi_0, c.theta0, c.theta0_prime, c.trace_inv, c.k1, c.k2])
        .filter(|x| x.is_nan() || *x < 0.0)
        .count();
    verdicts.push(TestVerdict::bounded("conditions:nonnegative", "xi", negative as f64, 0.0, 0.0, Sidedness::Upper, table.len() * 7));
    let c = &table[0];
    let flags = json!({ "xi_ok": c.xi_ok, "theta0_ok": c.theta0_ok, "theta0_prime_ok": c.theta0_prime_ok, "k3_ok": c.k3_ok });
    Ok(Run::Done(verdicts, json!({ "constants": table, "flags": flags })))
}

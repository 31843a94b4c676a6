use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::density::log_density;
use super::samplers::{langevin_sweep, pcn_sweep, AcceptStats, SiteOrder};
use crate::error::{ensure, Error, Result};
use crate::interaction::{action, LatticeState, Model};
use crate::stats::{batch_means_default, tau_int, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    /// pCN with step `s`; `adapt` tunes `s` during burn-in toward 25–40% acceptance.
    Pcn {
        step: f64,
        #[serde(default = "yes")]
        adapt: bool,
    },
    Langevin { dt: f64 },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub sampler: SamplerKind,
    pub n_sweeps: u64,
    #[serde(default)]
    pub burn_in: u64,
    #[serde(default = "one_u64")]
    pub thin: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
    #[serde(default)]
    pub order: SiteOrder,
}

fn one_u64() -> u64 {
    1
}

/// Sweeps between step-size adjustments during burn-in.
const ADAPT_WINDOW: u64 = 50;

impl ChainConfig {
    pub fn pcn(step: f64, n_sweeps: u64, burn_in: u64, seed: u64) -> Self {
        Self {
            sampler: SamplerKind::Pcn { step, adapt: true },
            n_sweeps,
            burn_in,
            thin: 1,
            seed,
            checkpoint_every: None,
            order: SiteOrder::Lexicographic,
        }
    }

    pub fn langevin(dt: f64, n_sweeps: u64, burn_in: u64, seed: u64) -> Self {
        Self {
            sampler: SamplerKind::Langevin { dt },
            ..Self::pcn(1.0, n_sweeps, burn_in, seed)
        }
    }

    pub fn with_thin(mut self, thin: u64) -> Self {
        self.thin = thin;
        self
    }

    pub fn fixed_step(mut self) -> Self {
        if let SamplerKind::Pcn { adapt, .. } = &mut self.sampler {
            *adapt = false;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.sampler {
            SamplerKind::Pcn { step, .. } => {
                ensure!(step > 0.0 && step <= 1.0, InvalidParameter, "pCN step must lie in (0, 1], got {step}")
            }
            SamplerKind::Langevin { dt } => {
                ensure!(dt > 0.0 && dt.is_finite(), InvalidParameter, "Langevin dt must be positive, got {dt}")
            }
        }
        ensure!(
            self.burn_in < self.n_sweeps,
            InvalidParameter,
            "burn-in {} must be shorter than the run of {} sweeps",
            self.burn_in,
            self.n_sweeps
        );
        ensure!(self.thin >= 1, InvalidParameter, "thinning must be ≥ 1");
        Ok(())
    }

    /// Whether sweep number `sweep` (1-based) is retained.
    pub fn keeps(&self, sweep: u64) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in) % self.thin == 0
    }
}

/// Everything needed to continue a chain bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub sweep: u64,
    pub coeffs: Vec<f64>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub step: f64,
    pub window: AcceptStats,
    pub total: AcceptStats,
}

/// A running Markov chain over one model.
pub struct Chain<'m> {
    model: &'m Model,
    cfg: ChainConfig,
    state: LatticeState,
    rng: ChaCha8Rng,
    sweep: u64,
    step: f64,
    window: AcceptStats,
    total: AcceptStats,
}

impl<'m> Chain<'m> {
    /// Starts from a bridge draw seeded by `cfg.seed`.
    pub fn new(model: &'m Model, cfg: ChainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let state = LatticeState::bridge(model, &mut rng);
        let step = match cfg.sampler {
            SamplerKind::Pcn { step, .. } => step,
            SamplerKind::Langevin { dt } => dt,
        };
        Ok(Self {
            model,
            cfg,
            state,
            rng,
            sweep: 0,
            step,
            window: AcceptStats::default(),
            total: AcceptStats::default(),
        })
    }

    pub fn from_checkpoint(model: &'m Model, cfg: ChainConfig, ck: &Checkpoint) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::from_seed(ck.rng_seed);
        rng.set_stream(ck.rng_stream);
        rng.set_word_pos(ck.rng_word_pos);
        Ok(Self {
            state: LatticeState::from_coeffs(model, ck.coeffs.clone())?,
            model,
            cfg,
            rng,
            sweep: ck.sweep,
            step: ck.step,
            window: ck.window,
            total: ck.total,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            sweep: self.sweep,
            coeffs: self.state.coeffs().to_vec(),
            rng_seed: self.rng.get_seed(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos(),
            step: self.step,
            window: self.window,
            total: self.total,
        }
    }

    pub fn state(&self) -> &LatticeState {
        &self.state
    }

    pub fn sweep(&self) -> u64 {
        self.sweep
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    /// Acceptance after burn-in (pCN only).
    pub fn acceptance(&self) -> AcceptStats {
        self.total
    }

    pub fn is_done(&self) -> bool {
        self.sweep >= self.cfg.n_sweeps
    }

    /// Advances one sweep; returns whether the new state is retained.
    pub fn advance(&mut self) -> Result<bool> {
        self.sweep += 1;
        match self.cfg.sampler {
            SamplerKind::Pcn { adapt, .. } => {
                let st = pcn_sweep(self.model, &mut self.state, self.step, self.cfg.order, &mut self.rng);
                if self.sweep <= self.cfg.burn_in {
                    self.window.add(st);
                    if adapt && self.sweep % ADAPT_WINDOW == 0 {
                        let r = self.window.rate();
                        if r < 0.25 {
                            self.step *= 0.8;
                        } else if r > 0.4 {
                            self.step = (self.step * 1.25).min(1.0);
                        }
                        self.window = AcceptStats::default();
                    }
                } else {
                    self.total.add(st);
                }
            }
            SamplerKind::Langevin { dt } => {
                langevin_sweep(self.model, &mut self.state, dt, true, &mut self.rng)?;
            }
        }
        Ok(self.cfg.keeps(self.sweep))
    }
}

/// Retained samples kept in memory as raw coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleStore {
    n_sites: usize,
    n_coeffs: usize,
    sweeps: Vec<u64>,
    data: Vec<f64>,
}

impl SampleStore {
    pub fn new(n_sites: usize, n_coeffs: usize) -> Self {
        Self {
            n_sites,
            n_coeffs,
            sweeps: vec![],
            data: vec![],
        }
    }

    pub fn for_model(model: &Model) -> Self {
        Self::new(model.n_sites(), model.n_coeffs())
    }

    pub fn push(&mut self, sweep: u64, state: &LatticeState) {
        debug_assert_eq!(state.coeffs().len(), self.record_len());
        self.sweeps.push(sweep);
        self.data.extend_from_slice(state.coeffs());
    }

    pub fn push_raw(&mut self, sweep: u64, coeffs: &[f64]) {
        self.sweeps.push(sweep);
        self.data.extend_from_slice(coeffs);
    }

    pub fn record_len(&self) -> usize {
        self.n_sites * self.n_coeffs
    }

    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    pub fn sweeps(&self) -> &[u64] {
        &self.sweeps
    }

    pub fn coeffs(&self, i: usize) -> &[f64] {
        let r = self.record_len();
        &self.data[i * r..(i + 1) * r]
    }

    pub fn site_coeffs(&self, i: usize, site: usize) -> &[f64] {
        let r = self.record_len();
        &self.data[i * r + site * self.n_coeffs..i * r + (site + 1) * self.n_coeffs]
    }

    pub fn state(&self, model: &Model, i: usize) -> Result<LatticeState> {
        LatticeState::from_coeffs(model, self.coeffs(i).to_vec())
    }

    pub fn states<'a>(&'a self, model: &'a Model) -> impl Iterator<Item = LatticeState> + 'a {
        (0..self.len()).map(move |i| self.state(model, i).expect("store matches model"))
    }

    pub fn write_stream<W: Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.len() {
            write_record(w, self.sweeps[i], self.coeffs(i))?;
        }
        Ok(())
    }

    pub fn read_stream<R: Read>(r: &mut R, n_sites: usize, n_coeffs: usize) -> Result<Self> {
        let mut s = Self::new(n_sites, n_coeffs);
        let mut buf = vec![0.0; s.record_len()];
        while let Some(sweep) = read_record(r, &mut buf)? {
            s.push_raw(sweep, &buf);
        }
        Ok(s)
    }

    /// Drops records past `sweep`.
    pub fn truncate_after(&mut self, sweep: u64) {
        let keep = self.sweeps.iter().take_while(|&&s| s <= sweep).count();
        self.sweeps.truncate(keep);
        self.data.truncate(keep * self.record_len());
    }
}

/// Writes one `(u64 sweep, f64 coeffs…)` little-endian record.
pub fn write_record<W: Write>(w: &mut W, sweep: u64, coeffs: &[f64]) -> Result<()> {
    w.write_all(&sweep.to_le_bytes())?;
    for c in coeffs {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one record into `buf`; `None` at a clean end of stream.
pub fn read_record<R: Read>(r: &mut R, buf: &mut [f64]) -> Result<Option<u64>> {
    let mut head = [0u8; 8];
    match r.read_exact(&mut head) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let mut b = [0u8; 8];
    for x in buf.iter_mut() {
        r.read_exact(&mut b)
            .map_err(|_| Error::Configuration("truncated sample record".into()))?;
        *x = f64::from_le_bytes(b);
    }
    Ok(Some(u64::from_le_bytes(head)))
}

impl Checkpoint {
    /// Sample record, then RNG blob (seed, stream, word position), then the
    /// step size and acceptance counters.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_record(w, self.sweep, &self.coeffs)?;
        w.write_all(&self.rng_seed)?;
        w.write_all(&self.rng_stream.to_le_bytes())?;
        w.write_all(&self.rng_word_pos.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        for v in [self.window.proposed, self.window.accepted, self.total.proposed, self.total.accepted] {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R, record_len: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; record_len];
        let sweep =
            read_record(r, &mut coeffs)?.ok_or_else(|| Error::Configuration("empty checkpoint file".into()))?;
        let mut seed = [0u8; 32];
        r.read_exact(&mut seed)?;
        let mut b8 = [0u8; 8];
        let mut b16 = [0u8; 16];
        r.read_exact(&mut b8)?;
        let stream = u64::from_le_bytes(b8);
        r.read_exact(&mut b16)?;
        let word_pos = u128::from_le_bytes(b16);
        r.read_exact(&mut b8)?;
        let step = f64::from_le_bytes(b8);
        let mut c = [0u64; 4];
        for v in c.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = u64::from_le_bytes(b8);
        }
        Ok(Self {
            sweep,
            coeffs,
            rng_seed: seed,
            rng_stream: stream,
            rng_word_pos: word_pos,
            step,
            window: AcceptStats {
                proposed: c[0],
                accepted: c[1],
            },
            total: AcceptStats {
                proposed: c[2],
                accepted: c[3],
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObservableSummary {
    pub name: String,
    pub mean: f64,
    pub se: f64,
    pub tau_int: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainReport {
    pub model_hash: String,
    pub config: ChainConfig,
    pub n_samples: usize,
    pub final_step: f64,
    pub acceptance_rate: Option<f64>,
    pub observables: Vec<ObservableSummary>,
}

/// Default per-sample observables: `c_0`, `ω(0)²` and the per-site action.
pub fn default_observables(model: &Model, state: &LatticeState) -> [f64; 4] {
    let n = model.n_sites() as f64;
    let mid = model.n_modes();
    let c0 = (0..model.n_sites()).map(|i| state.site_coeffs(i)[mid]).sum::<f64>() / n;
    let w0 = (0..model.n_sites()).map(|i| state.site_values(i)[0].powi(2)).sum::<f64>() / n;
    [c0, w0, action(model, state) / n, log_density(model, state) / n]
}

pub const DEFAULT_OBSERVABLE_NAMES: [&str; 4] = ["mean_c0", "mean_omega0_sq", "action_per_site", "log_density_per_site"];

impl ChainReport {
    /// Summaries from per-sample observable series; fewer than 100 samples
    /// give plain means with infinite errors.
    pub fn from_series(
        model: &Model,
        cfg: &ChainConfig,
        final_step: f64,
        acceptance: Option<AcceptStats>,
        names: &[&str],
        series: &[Vec<f64>],
    ) -> Self {
        let observables = names
            .iter()
            .zip(series)
            .map(|(name, xs)| {
                let e = batch_means_default(xs).unwrap_or(Estimate {
                    mean: if xs.is_empty() { f64::NAN } else { crate::stats::mean(xs) },
                    se: f64::INFINITY,
                });
                ObservableSummary {
                    name: name.to_string(),
                    mean: e.mean,
                    se: e.se,
                    tau_int: tau_int(xs),
                }
            })
            .collect();
        Self {
            model_hash: model.hash().to_string(),
            config: cfg.clone(),
            n_samples: series.first().map_or(0, Vec::len),
            final_step,
            acceptance_rate: acceptance.map(|a| a.rate()),
            observables,
        }
    }

    pub fn from_samples(model: &Model, cfg: &ChainConfig, final_step: f64, acceptance: Option<AcceptStats>, store: &SampleStore) -> Self {
        let mut series: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(store.len())).collect();
        for s in store.states(model) {
            for (v, x) in series.iter_mut().zip(default_observables(model, &s)) {
                v.push(x);
            }
        }
        Self::from_series(model, cfg, final_step, acceptance, &DEFAULT_OBSERVABLE_NAMES, &series)
    }

    pub fn observable(&self, name: &str) -> Option<&ObservableSummary> {
        self.observables.iter().find(|o| o.name == name)
    }
}

/// Runs a chain to completion, handing every retained state to `observer`.
pub fn run_chain<F>(model: &Model, cfg: &ChainConfig, mut observer: F) -> Result<ChainReport>
where
    F: FnMut(u64, &LatticeState),
{
    let mut chain = Chain::new(model, cfg.clone())?;
    let mut series = vec![vec![]; 4];
    while !chain.is_done() {
        if chain.advance()? {
            observer(chain.sweep(), chain.state());
            for (v, x) in series.iter_mut().zip(default_observables(model, chain.state())) {
                v.push(x);
            }
        }
    }
    let acc = matches!(cfg.sampler, SamplerKind::Pcn { .. }).then(|| chain.acceptance());
    Ok(ChainReport::from_series(
        model,
        cfg,
        chain.step(),
        acc,
        &DEFAULT_OBSERVABLE_NAMES,
        &series,
    ))
}

/// Runs a chain and keeps every retained state.
pub fn collect_samples(model: &Model, cfg: &ChainConfig) -> Result<(SampleStore, ChainReport)> {
    let mut store = SampleStore::for_model(model);
    let report = run_chain(model, cfg, |sweep, s| store.push(sweep, s))?;
    Ok((store, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::{ModelSpec, OneSitePotential};
    use crate::spectral::OscillatorParams;

    fn quartic(n: usize) -> Model {
        Model::new(ModelSpec::single_site(
            OscillatorParams::new(1.0, 1.0, 1.0).unwrap(),
            OneSitePotential::quartic(1.0),
            n,
        ))
        .unwrap()
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let m = Model::preset("model1").unwrap();
        let cfg = ChainConfig::pcn(0.5, 300, 100, 7);
        let (a, ra) = collect_samples(&m, &cfg).unwrap();
        let (b, rb) = collect_samples(&m, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let mut bytes = vec![];
        a.write_stream(&mut bytes).unwrap();
        let back = SampleStore::read_stream(&mut bytes.as_slice(), m.n_sites(), m.n_coeffs()).unwrap();
        assert_eq!(back, a);
        assert_eq!(bytes.len(), a.len() * (8 + 8 * a.record_len()));
    }

    #[test]
    fn checkpoint_resume_is_exact() {
        let m = Model::preset("model1").unwrap();
        let cfg = ChainConfig::pcn(0.9, 400, 150, 3);
        let (full, _) = collect_samples(&m, &cfg).unwrap();

        let mut chain = Chain::new(&m, cfg.clone()).unwrap();
        let mut part = SampleStore::for_model(&m);
        for _ in 0..120 {
            if chain.advance().unwrap() {
                part.push(chain.sweep(), chain.state());
            }
        }
        let mut buf = vec![];
        chain.checkpoint().write(&mut buf).unwrap();
        let ck = Checkpoint::read(&mut buf.as_slice(), m.n_sites() * m.n_coeffs()).unwrap();
        assert_eq!(ck, chain.checkpoint());
        let mut resumed = Chain::from_checkpoint(&m, cfg, &ck).unwrap();
        while !resumed.is_done() {
            if resumed.advance().unwrap() {
                part.push(resumed.sweep(), resumed.state());
            }
        }
        assert_eq!(part, full);
    }

    #[test]
    fn thinning_and_burn_in() {
        let cfg = ChainConfig::pcn(0.5, 100, 20, 0).with_thin(10);
        let kept: Vec<u64> = (1..=100).filter(|&s| cfg.keeps(s)).collect();
        assert_eq!(kept, vec![30, 40, 50, 60, 70, 80, 90, 100]);
        assert!(ChainConfig::pcn(1.5, 10, 0, 0).validate().is_err());
        assert!(ChainConfig::pcn(0.5, 10, 10, 0).validate().is_err());
        assert!(ChainConfig::langevin(-1.0, 10, 0, 0).validate().is_err());
    }

    #[test]
    fn adaptation_lands_in_target_band() {
        let m = Model::preset("model1").unwrap();
        let cfg = ChainConfig::pcn(1.0, 6000, 3000, 5);
        let r = run_chain(&m, &cfg, |_, _| {}).unwrap();
        let a = r.acceptance_rate.unwrap();
        assert!((0.15..0.55).contains(&a), "acceptance {a}, step {}", r.final_step);
    }

    #[test]
    fn seeds_agree_and_thinning_keeps_the_mean() {
        let m = quartic(2);
        let r1 = run_chain(&m, &ChainConfig::pcn(0.8, 40_000, 1000, 1), |_, _| {}).unwrap();
        let r2 = run_chain(&m, &ChainConfig::pcn(0.8, 40_000, 1000, 2), |_, _| {}).unwrap();
        let r3 = run_chain(&m, &ChainConfig::pcn(0.8, 200_000, 1000, 3).with_thin(5), |_, _| {}).unwrap();
        let (a, b, c) = (
            r1.observable("mean_omega0_sq").unwrap(),
            r2.observable("mean_omega0_sq").unwrap(),
            r3.observable("mean_omega0_sq").unwrap(),
        );
        assert!((a.mean - b.mean).abs() < 5.0 * a.se.hypot(b.se));
        assert!((a.mean - c.mean).abs() < 5.0 * a.se.hypot(c.se));
        assert!(c.tau_int <= a.tau_int + 0.5);
    }
}

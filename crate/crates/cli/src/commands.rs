use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use qcrystal::gibbs::{read_record, write_record, Chain, ChainConfig, ChainReport, Checkpoint, PolyObservable, SampleStore, SamplerKind};
use qcrystal::interaction::Model;
use qcrystal::oracle::{ed_matsubara, harmonic_lattice_cov, QuadratureOracle, QuadratureSpec};
use qcrystal::verify::{all_pass, write_verdicts_csv_versioned, TestVerdict, VerifyContext};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::manifest::RunManifest;
use crate::output::{event, read_json, write_json, Meta, VERSION};
use crate::suites::{run_suite, SuiteInput, SuiteOutcome};

pub const SAMPLES_FILE: &str = "samples.bin";
pub const SAMPLES_META: &str = "samples.meta.json";
pub const CHAIN_REPORT: &str = "chain_report.json";
pub const VERDICTS_JSON: &str = "verdicts.json";
pub const VERDICTS_CSV: &str = "verdicts.csv";
pub const VERIFY_META: &str = "verify.meta.json";
pub const REPORT_MD: &str = "report.md";

/// Sidecar describing the binary sample stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamInfo {
    pub format: String,
    pub n_sites: usize,
    pub n_coeffs: usize,
    pub n_samples: usize,
    pub checkpoints: Vec<String>,
}

pub fn load_model(manifest: &RunManifest) -> Result<Model> {
    let m = manifest.build_model()?;
    event("model", json!({ "hash": m.hash(), "sites": m.n_sites(), "modes": m.n_modes() }));
    Ok(m)
}

fn kept_up_to(cfg: &ChainConfig, sweep: u64) -> usize {
    if sweep <= cfg.burn_in {
        0
    } else {
        ((sweep - cfg.burn_in) / cfg.thin) as usize
    }
}

/// Samples retained by the interrupted run, read from the start of its stream.
fn resume_store(model: &Model, cfg: &ChainConfig, path: &Path, sweep: u64) -> Result<SampleStore> {
    let want = kept_up_to(cfg, sweep);
    let mut store = SampleStore::for_model(model);
    if want == 0 {
        return Ok(store);
    }
    let f = File::open(path).with_context(|| format!("cannot resume: sample stream {} is missing", path.display()))?;
    let mut r = BufReader::new(f);
    let mut buf = vec![0.0; store.record_len()];
    for _ in 0..want {
        match read_record(&mut r, &mut buf)? {
            Some(s) => store.push_raw(s, &buf),
            None => bail!("cannot resume: {} holds {} of the {want} samples kept up to sweep {sweep}", path.display(), store.len()),
        }
    }
    ensure!(
        store.sweeps().last() <= Some(&sweep),
        "cannot resume: sample stream does not match the checkpoint at sweep {sweep}"
    );
    Ok(store)
}

pub fn cmd_sample(manifest: &RunManifest, resume: Option<&Path>) -> Result<()> {
    let model = load_model(manifest)?;
    let cfg = manifest.chain_config();
    cfg.validate()?;
    let out = &manifest.out;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let meta = Meta::new(model.hash(), manifest.seed);
    let samples_path = out.join(SAMPLES_FILE);

    let (mut chain, mut store) = match resume {
        None => (Chain::new(&model, cfg.clone())?, SampleStore::for_model(&model)),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("cannot open checkpoint {}", p.display()))?;
            let record_len = model.n_sites() * model.n_coeffs();
            let ck = Checkpoint::read(&mut BufReader::new(f), record_len).with_context(|| format!("malformed checkpoint {}", p.display()))?;
            ensure!(ck.sweep <= cfg.n_sweeps, "checkpoint at sweep {} lies past the end of a {}-sweep run", ck.sweep, cfg.n_sweeps);
            let store = resume_store(&model, &cfg, &samples_path, ck.sweep)?;
            event("resume", json!({ "checkpoint": p, "sweep": ck.sweep, "samples": store.len() }));
            (Chain::from_checkpoint(&model, cfg.clone(), &ck)?, store)
        }
    };

    let mut w = BufWriter::new(File::create(&samples_path).with_context(|| format!("cannot create {}", samples_path.display()))?);
    store.write_stream(&mut w)?;
    let progress_every = (cfg.n_sweeps / 10).max(1);
    let write_checkpoint = |chain: &Chain, name: &str| -> Result<()> {
        let path = out.join(name);
        let mut f = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        chain.checkpoint().write(&mut f)?;
        f.flush()?;
        Ok(())
    };
    event("sample_start", json!({ "sweeps": cfg.n_sweeps, "from": chain.sweep(), "seed": cfg.seed }));
    while !chain.is_done() {
        if chain.advance()? {
            store.push(chain.sweep(), chain.state());
            write_record(&mut w, chain.sweep(), chain.state().coeffs())?;
        }
        let s = chain.sweep();
        if cfg.checkpoint_every.is_some_and(|k| k > 0 && s % k == 0) {
            w.flush()?;
            let name = format!("checkpoint-{s}.bin");
            write_checkpoint(&chain, &name)?;
            event("checkpoint", json!({ "sweep": s, "file": name }));
        }
        if s % progress_every == 0 {
            event("progress", json!({ "sweep": s, "of": cfg.n_sweeps, "step": chain.step() }));
        }
    }
    w.flush()?;
    write_checkpoint(&chain, "checkpoint.bin")?;
    // the whole run's list, so a resumed run describes itself like an uninterrupted one
    let mut checkpoints: Vec<String> = match cfg.checkpoint_every {
        Some(k) if k > 0 => (1..=cfg.n_sweeps / k).map(|i| format!("checkpoint-{}.bin", i * k)).collect(),
        _ => vec![],
    };
    checkpoints.push("checkpoint.bin".into());

    let acc = matches!(cfg.sampler, SamplerKind::Pcn { .. }).then(|| chain.acceptance());
    let report = ChainReport::from_samples(&model, &cfg, chain.step(), acc, &store);
    write_json(&out.join(CHAIN_REPORT), &meta, &report)?;
    let info = StreamInfo {
        format: "records of (u64 sweep, f64 coefficients site-major), little-endian".into(),
        n_sites: model.n_sites(),
        n_coeffs: model.n_coeffs(),
        n_samples: store.len(),
        checkpoints,
    };
    write_json(&out.join(SAMPLES_META), &meta, &info)?;
    event("sample_done", json!({ "samples": store.len(), "acceptance": report.acceptance_rate, "out": out }));
    Ok(())
}

/// The run's samples, or the reason there are none.
fn load_samples(manifest: &RunManifest, model: &Model, cfg: &ChainConfig) -> Result<Result<SampleStore, String>> {
    let path = manifest.samples.clone().unwrap_or_else(|| manifest.out.join(SAMPLES_FILE));
    if !path.is_file() {
        if manifest.verify.sample_inline {
            event("sample_inline", json!({ "sweeps": cfg.n_sweeps }));
            return Ok(Ok(qcrystal::gibbs::collect_samples(model, cfg)?.0));
        }
        return Ok(Err(format!(
            "no sample stream at {}; run `qcrystal sample` first or set verify.sample_inline",
            path.display()
        )));
    }
    let sidecar = path.with_file_name(SAMPLES_META);
    if sidecar.is_file() {
        let env = read_json::<StreamInfo>(&sidecar)?;
        if env.meta.model_hash != model.hash() {
            return Ok(Err(format!(
                "sample stream {} was drawn from model {}, not {}",
                path.display(),
                env.meta.model_hash,
                model.hash()
            )));
        }
    }
    let f = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let s = SampleStore::read_stream(&mut BufReader::new(f), model.n_sites(), model.n_coeffs())
        .with_context(|| format!("malformed sample stream {}", path.display()))?;
    event("samples", json!({ "file": path, "count": s.len() }));
    Ok(Ok(s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteCount {
    pub suite: String,
    pub verdicts: usize,
    pub pass: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySummary {
    pub suites: Vec<SuiteCount>,
    pub skipped: Vec<Value>,
    pub n_verdicts: usize,
    pub n_pass: usize,
    pub n_errors: usize,
    pub all_pass: bool,
    pub n_samples: Option<usize>,
    pub threshold: f64,
}

/// Runs the selected suites; returns whether every verdict passed.
pub fn cmd_verify(manifest: &RunManifest) -> Result<bool> {
    let model = load_model(manifest)?;
    let cfg = manifest.chain_config();
    let suites = manifest.suites();
    let out = &manifest.out;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let meta = Meta::new(model.hash(), manifest.seed);
    let samples = if suites.iter().any(|s| s.needs_samples()) {
        load_samples(manifest, &model, &cfg)?
    } else {
        Err("no suite needs samples".into())
    };
    let ctx = VerifyContext { seed: manifest.seed, threshold: manifest.verify.threshold };
    let input = SuiteInput {
        model: &model,
        samples: samples.as_ref().map_err(Clone::clone),
        chain: &cfg,
        options: &manifest.verify,
        ctx,
    };
    let outcomes: Vec<SuiteOutcome> = suites
        .par_iter()
        .map(|&s| {
            event("suite_start", json!({ "suite": s.name() }));
            let t0 = std::time::Instant::now();
            let o = run_suite(s, &input);
            let pass = o.verdicts.iter().filter(|v| v.pass).count();
            event("suite_done", json!({ "suite": s.name(), "verdicts": o.verdicts.len(), "pass": pass, "skipped": o.skipped, "secs": t0.elapsed().as_secs_f64() }));
            o
        })
        .collect();

    let verdicts: Vec<TestVerdict> = outcomes.iter().flat_map(|o| o.verdicts.iter().cloned()).collect();
    write_json(&out.join(VERDICTS_JSON), &meta, &verdicts)?;
    let csv = File::create(out.join(VERDICTS_CSV)).context("cannot create verdicts.csv")?;
    write_verdicts_csv_versioned(&verdicts, VERSION, BufWriter::new(csv))?;
    for o in &outcomes {
        if o.skipped.is_none() && !o.table.is_null() {
            write_json(&out.join(format!("suite-{}.json", o.suite.name())), &meta, &o.table)?;
        }
    }
    let ok = all_pass(&verdicts);
    let summary = VerifySummary {
        suites: outcomes
            .iter()
            .map(|o| SuiteCount {
                suite: o.suite.name().into(),
                verdicts: o.verdicts.len(),
                pass: o.verdicts.iter().filter(|v| v.pass).count(),
                errors: o.verdicts.iter().filter(|v| v.error.is_some()).count(),
            })
            .collect(),
        skipped: outcomes
            .iter()
            .filter_map(|o| o.skipped.as_ref().map(|why| json!({ "suite": o.suite.name(), "reason": why })))
            .collect(),
        n_verdicts: verdicts.len(),
        n_pass: verdicts.iter().filter(|v| v.pass).count(),
        n_errors: verdicts.iter().filter(|v| v.error.is_some()).count(),
        all_pass: ok,
        n_samples: samples.as_ref().ok().map(SampleStore::len),
        threshold: ctx.threshold,
    };
    write_json(&out.join(VERIFY_META), &meta, &summary)?;
    event("verify_done", json!({ "verdicts": summary.n_verdicts, "pass": summary.n_pass, "errors": summary.n_errors, "all_pass": ok }));
    Ok(ok)
}

/// Writes every exact table the model admits to `oracle-<hash>.json`.
pub fn cmd_oracle(manifest: &RunManifest) -> Result<PathBuf> {
    let model = load_model(manifest)?;
    let p = *model.params();
    let beta = p.beta;
    let taus: Vec<f64> = (0..=8).map(|i| i as f64 * beta / 16.0).collect();
    let mut tables = serde_json::Map::new();
    let mut refusals = vec![];

    let single = model.n_sites() == 1 && model.spec().coupling.is_decoupled();
    if single && model.potential().polynomial_coeffs().is_some() {
        let q = PolyObservable::q();
        let rows = taus
            .iter()
            .map(|&t| {
                let r = ed_matsubara(model.potential(), p, manifest.verify.ed_dim, &[q.clone(), q.clone()], &[0.0, t])?;
                Ok(json!({ "tau": t, "qq": r.value, "dim": r.dim, "tail_weight": r.tail_weight, "doubling_change": r.doubling_change, "ground_energy": r.ground_energy }))
            })
            .collect::<qcrystal::Result<Vec<_>>>()?;
        let q4 = ed_matsubara(model.potential(), p, manifest.verify.ed_dim, &[PolyObservable::power(4)], &[0.0])?;
        tables.insert("ed".into(), json!({ "correlator": rows, "q4": q4 }));
    } else {
        refusals.push("exact diagonalization needs a single site with a polynomial potential".to_string());
    }

    let spec = QuadratureSpec::auto(&model);
    match QuadratureOracle::new(&model, spec.clone()) {
        Ok(o) => {
            let m = o.moments();
            tables.insert("quadrature".into(), json!({ "spec": spec, "moments": m }));
        }
        Err(e) => refusals.push(format!("quadrature: {e}")),
    }

    match harmonic_lattice_cov(&model, &taus, Some(model.n_modes())) {
        Ok(t) => {
            tables.insert("harmonic".into(), json!({ "cutoff": model.n_modes(), "covariance": t }));
        }
        Err(e) => refusals.push(format!("harmonic: {e}")),
    }

    if tables.is_empty() {
        return Err(anyhow!(qcrystal::Error::Capacity(format!(
            "no oracle can handle model {}: {}",
            model.hash(),
            refusals.join("; ")
        ))));
    }
    std::fs::create_dir_all(&manifest.out).with_context(|| format!("cannot create output directory {}", manifest.out.display()))?;
    let path = manifest.out.join(format!("oracle-{}.json", model.hash()));
    let kinds: Vec<String> = tables.keys().cloned().collect();
    tables.insert("taus".into(), json!(taus));
    write_json(&path, &Meta::new(model.hash(), manifest.seed), &Value::Object(tables))?;
    event("oracle_done", json!({ "file": path, "tables": kinds }));
    Ok(path)
}

/// Renders `report.md` from the verify outputs; returns whether all verdicts passed.
pub fn cmd_report(manifest: &RunManifest) -> Result<bool> {
    let out = &manifest.out;
    let verdicts = read_json::<Vec<TestVerdict>>(&out.join(VERDICTS_JSON)).context("run `qcrystal verify` first")?;
    let summary = read_json::<VerifySummary>(&out.join(VERIFY_META)).ok();
    let chain = read_json::<Value>(&out.join(CHAIN_REPORT)).ok();
    let meta = &verdicts.meta;
    let v = &verdicts.data;
    let ok = all_pass(v);

    let mut md = String::new();
    writeln!(md, "# Verification report\n")?;
    writeln!(md, "- model: `{}`", meta.model_hash)?;
    writeln!(md, "- seed: {}", meta.seed)?;
    writeln!(md, "- version: {}", meta.version)?;
    writeln!(md, "- result: **{}** ({} of {} verdicts pass)\n", if ok { "PASS" } else { "FAIL" }, v.iter().filter(|v| v.pass).count(), v.len())?;

    writeln!(md, "## Suites\n")?;
    writeln!(md, "| suite | verdicts | pass | errors |")?;
    writeln!(md, "|---|---|---|---|")?;
    let counts: Vec<SuiteCount> = match &summary {
        Some(s) => s.data.suites.clone(),
        None => vec![SuiteCount {
            suite: "all".into(),
            verdicts: v.len(),
            pass: v.iter().filter(|x| x.pass).count(),
            errors: v.iter().filter(|x| x.error.is_some()).count(),
        }],
    };
    for c in &counts {
        writeln!(md, "| {} | {} | {} | {} |", c.suite, c.verdicts, c.pass, c.errors)?;
    }
    if let Some(s) = &summary {
        for sk in &s.data.skipped {
            writeln!(md, "\nSkipped `{}`: {}", sk["suite"].as_str().unwrap_or("?"), sk["reason"].as_str().unwrap_or(""))?;
        }
    }

    let failed: Vec<_> = v.iter().filter(|x| !x.pass).collect();
    if !failed.is_empty() {
        writeln!(md, "\n## Failures\n")?;
        writeln!(md, "| test | statistic | se | z | threshold | error |")?;
        writeln!(md, "|---|---|---|---|---|---|")?;
        for x in failed {
            writeln!(
                md,
                "| {} | {:.6} | {:.3e} | {:.2} | {:.4} | {} |",
                x.test,
                x.statistic,
                x.se,
                x.z,
                x.threshold,
                x.error.as_deref().unwrap_or("")
            )?;
        }
    }

    if let Some(c) = &chain {
        let c = &c.data;
        let num = |v: &Value, digits: usize| v.as_f64().map_or("n/a".to_string(), |x| format!("{x:.digits$}"));
        writeln!(md, "\n## Chain\n")?;
        writeln!(md, "{} samples, final step {}, acceptance {}\n", c["n_samples"], num(&c["final_step"], 4), num(&c["acceptance_rate"], 3))?;
        writeln!(md, "| observable | mean | se | τ_int |")?;
        writeln!(md, "|---|---|---|---|")?;
        for o in c["observables"].as_array().into_iter().flatten() {
            writeln!(md, "| {} | {} | {} | {} |", o["name"].as_str().unwrap_or("?"), num(&o["mean"], 6), num(&o["se"], 6), num(&o["tau_int"], 2))?;
        }
    }
    let path = out.join(REPORT_MD);
    std::fs::write(&path, md).with_context(|| format!("cannot write {}", path.display()))?;
    event("report_done", json!({ "file": path, "all_pass": ok }));
    Ok(ok)
}

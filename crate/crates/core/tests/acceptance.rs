//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use qcrystal::gibbs::{collect_samples, log_rn_cocycle, logderiv_site, matsubara, ChainConfig, PolyObservable, SampleStore, ShiftDirection};
use qcrystal::interaction::{BoundaryMode, CouplingSpec, LatticeGeometry, LatticeState, Model, ModelSpec, OneSitePotential};
use qcrystal::oracle::{ed_matsubara, QuadratureOracle, QuadratureSpec};
use qcrystal::spectral::{green_continuum, green_discrepancy, green_series, trace_power, OscillatorParams};
use qcrystal::stats::{batch_means_default, Estimate};
use qcrystal::verify::{
    all_pass, catalog, condition_constants, dlr_test, flow_test, gaussian_increment_variance, holder_scaling, ibp_test, log_spaced,
    moment_suite, resolve_all, wick_check, ConditionOptions, MomentQuantity, MomentSpec, PointObservable, RedrawConfig, SubVolume,
    VerifyContext,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), qcrystal::Error>;

fn unit() -> OscillatorParams {
    OscillatorParams::new(1.0, 1.0, 1.0).unwrap()
}

fn single(pot: OneSitePotential, n: usize) -> Model {
    Model::new(ModelSpec::single_site(unit(), pot, n)).unwrap()
}

fn chain(len: usize, j: f64, n: usize) -> Model {
    Model::new(ModelSpec {
        coupling: CouplingSpec::HarmonicNn { j },
        lattice: LatticeGeometry::chain(len, BoundaryMode::Zero),
        ..ModelSpec::single_site(unit(), OneSitePotential::quartic(1.0), n)
    })
    .unwrap()
}

/// `Σ_{|n|≤N} λ_n⁻¹ φ_n(0)²` at m = a = β = 1, written out from the spectrum.
fn direct_series(n: usize) -> f64 {
    1.0 + (1..=n).map(|k| 2.0 / ((2.0 * PI * k as f64).powi(2) + 1.0)).sum::<f64>()
}

fn gaussian_samples() -> (Model, SampleStore) {
    let m = single(OneSitePotential::zero(), 64);
    let (s, _) = collect_samples(&m, &ChainConfig::pcn(1.0, 100_000, 0, 101).fixed_step()).unwrap();
    (m, s)
}

fn c1_gaussian(m: &Model, s: &SampleStore) -> Check {
    let xs: Vec<f64> = (0..s.len()).map(|i| s.state(m, i).map(|st| st.site_values(0)[0].powi(2))).collect::<Result<_, _>>()?;
    let mc = batch_means_default(&xs)?;
    let series = green_series(0.0, m.params(), 64);
    let direct = direct_series(64);
    let z = mc.z_against(direct);
    let pass = z.abs() <= 5.0 && (series - direct).abs() < 1e-12 && (series - 1.0820).abs() < 1e-3;
    Ok((pass, format!("MC {:.5} ± {:.5}, series {series:.6}, z = {z:.2}", mc.mean, mc.se)))
}

fn c2_ibp() -> Check {
    let m = single(OneSitePotential::quartic(1.0), 2);
    let dirs: Vec<ShiftDirection> = (-2..=2).map(|n| ShiftDirection::unit(0, n)).collect();
    let fns = catalog();
    let resolved = resolve_all(&m, &fns);
    let oracle = QuadratureOracle::new(&m, QuadratureSpec::auto(&m))?;
    let nf = resolved.len();
    let sums = oracle.expect(4 * dirs.len() * nf, |st, out| {
        let b = logderiv_site(&m, st, 0).unwrap();
        for (di, d) in dirs.iter().enumerate() {
            let bh = d.theta * b[d.coeff_index(&m)];
            for (fi, f) in resolved.iter().enumerate() {
                let (v, dv) = f.value_and_derivative(&m, st.coeffs(), *d);
                let o = &mut out[4 * (di * nf + fi)..];
                o[0] = dv;
                o[1] = v * bh;
                o[2] = dv.abs();
                o[3] = (v * bh).abs();
            }
        }
    });
    let worst = sums
        .chunks(4)
        .map(|c| (c[0] + c[1]).abs() / c[2].max(c[3]).max(1e-300))
        .fold(0.0f64, f64::max);
    let (s, _) = collect_samples(&m, &ChainConfig::pcn(0.8, 100_000, 1_000, 102))?;
    let v = ibp_test(&m, &s, &dirs, &fns, VerifyContext::new(102))?;
    let fails = v.iter().filter(|v| !v.pass).count();
    let zmax = v.iter().map(|v| v.z.abs()).fold(0.0, f64::max);
    Ok((
        worst <= 1e-6 && fails == 0,
        format!(
            "quadrature max relative residual {worst:.2e} over {} pairs ({} points); MC {} verdicts, {fails} fail, max |z| {zmax:.2}",
            dirs.len() * nf,
            oracle.n_points(),
            v.len()
        ),
    ))
}

fn c3_oracle_triangle() -> Check {
    let pot = OneSitePotential::quartic(1.0);
    let p = unit();
    let taus = [0.0, 0.25, 0.5];
    let mut runs = vec![];
    for (n, seed) in [(16usize, 103u64), (32, 104)] {
        let m = single(pot.clone(), n);
        let (s, _) = collect_samples(&m, &ChainConfig::pcn(0.8, 100_000, 1_000, seed))?;
        let mut vals = vec![];
        for &t in &taus {
            let e = matsubara(&m, &s, &[(0, PolyObservable::q()), (0, PolyObservable::q())], &[0.0, t], 8)?;
            // high modes are nearly free: add the Gaussian tail beyond the truncation
            let tail = green_continuum(t, &p) - green_series(t, &p, n);
            vals.push((e, tail));
        }
        runs.push(vals);
    }
    let mut pass = true;
    let mut parts = vec![];
    for (i, &t) in taus.iter().enumerate() {
        let ed = ed_matsubara(&pot, p, 60, &[PolyObservable::q(), PolyObservable::q()], &[0.0, t])?;
        let (e16, t16) = runs[0][i];
        let (e32, t32) = runs[1][i];
        let extrap = e32.mean + t32;
        let gap = t32.abs();
        let ok = (extrap - ed.value).abs() <= 5.0 * e32.se + gap;
        pass &= ok;
        parts.push(format!(
            "τ={t}: MC {extrap:.4}±{:.4} (N=16 {:.4}), ED {:.4} (dim {}), gap {gap:.1e}",
            e32.se,
            e16.mean + t16,
            ed.value,
            ed.dim
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c4_dlr() -> Check {
    let m = chain(6, 0.5, 4);
    let (s, _) = collect_samples(&m, &ChainConfig::pcn(0.8, 20_000, 1_000, 105))?;
    let block = SubVolume { extent: vec![2], origin: vec![2] };
    let obs: Vec<_> = (0..6).map(PointObservable::square).collect();
    let v = dlr_test(&m, &block, &s, &obs, RedrawConfig::default(), VerifyContext::new(105))?;
    let zmax = v.iter().map(|v| v.z.abs()).fold(0.0, f64::max);
    Ok((all_pass(&v), format!("{} observables, max |z| {zmax:.2}", v.len())))
}

fn c5_holder(m: &Model, s: &SampleStore) -> Check {
    let rhos = log_spaced(0.005, 0.2, 8);
    let r = holder_scaling(m, s, 0, &[1, 2], &rhos, 4, VerifyContext::new(106))?;
    let (q1, q2) = (r.fits[0], r.fits[1]);
    let w = wick_check(m, s, 0, &rhos, 4, VerifyContext::new(106))?;
    // the series second moment against a direct sum over the spectrum
    let direct = |rho: f64| 2.0 * (1..=64).map(|k| 2.0 * (1.0 - (2.0 * PI * k as f64 * rho).cos()) / ((2.0 * PI * k as f64).powi(2) + 1.0)).sum::<f64>();
    let series_ok = rhos.iter().all(|&r| (gaussian_increment_variance(m, r) - direct(r)).abs() < 1e-12);
    let pass = (0.9..=1.1).contains(&q1.slope) && (1.8..=2.2).contains(&q2.slope) && all_pass(&r.verdicts) && all_pass(&w) && series_ok;
    let wz = w.iter().map(|v| v.z.abs()).fold(0.0, f64::max);
    for k in &r.constants {
        println!("    {:?} Q={}: C {:.4e}, ΔC {:.4e}", k.convention, k.q, k.c, k.delta_c);
    }
    Ok((
        pass,
        format!(
            "Q=1 slope {:.3}±{:.3}, Q=2 slope {:.3}±{:.3}, Wick max |z| {wz:.2}",
            q1.slope, q1.slope_se, q2.slope, q2.slope_se
        ),
    ))
}

fn moment_ladder(boundary: BoundaryMode) -> Result<qcrystal::verify::MomentSuiteReport, qcrystal::Error> {
    let models: Vec<Model> = [1, 2, 4, 8]
        .iter()
        .map(|&l| chain(l, 1.0, 8).spec().clone().with_lattice(LatticeGeometry::chain(l, boundary.clone())))
        .map(Model::new)
        .collect::<Result<_, _>>()?;
    let stores: Vec<SampleStore> = models
        .iter()
        .enumerate()
        .map(|(i, m)| collect_samples(m, &ChainConfig::pcn(0.8, 20_000, 1_000, 107 + i as u64)).map(|r| r.0))
        .collect::<Result<_, _>>()?;
    let ladder: Vec<_> = models.iter().zip(&stores).collect();
    moment_suite(&ladder, &[MomentSpec::new(MomentQuantity::Hoelder, 2.0, 0.25)], VerifyContext::new(107))
}

fn c6_moments() -> Check {
    // translation-invariant ladder; the zero-boundary ladder is reported alongside
    let r = moment_ladder(BoundaryMode::Periodic)?;
    let z = moment_ladder(BoundaryMode::Zero)?;
    let tops = |r: &qcrystal::verify::MomentSuiteReport| {
        [1usize, 2, 4, 8]
            .iter()
            .map(|&n| format!("{:.3}", r.rows.iter().filter(|row| row.n_sites == n).map(|row| row.mean).fold(0.0, f64::max)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let (v, vz) = (&r.verdicts[0], &z.verdicts[0]);
    Ok((
        v.pass,
        format!(
            "periodic [{}], worst ratio {:.3} ≤ {:.3}; zero boundary [{}], worst ratio {:.3} vs {:.3}",
            tops(&r),
            v.statistic,
            v.threshold,
            tops(&z),
            vz.statistic,
            vz.threshold
        ),
    ))
}

fn c7_flow() -> Check {
    let m = single(OneSitePotential::quartic(1.0), 8);
    let (s, _) = collect_samples(&m, &ChainConfig::pcn(0.8, 50_000, 1_000, 108))?;
    let v = flow_test(&m, &s, ShiftDirection::new(0, 0, 0.1), &catalog(), VerifyContext::new(108))?;
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let st = LatticeState::bridge(&m, &mut rng);
        let d = ShiftDirection::unit(0, rng.random_range(-8..=8));
        let (t1, t2) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let mut moved = st.clone();
        moved.shift(&m, 0, d.mode, t1);
        let lhs = log_rn_cocycle(&m, &st, d.scaled(t1 + t2))?;
        let rhs = log_rn_cocycle(&m, &st, d.scaled(t1))? + log_rn_cocycle(&m, &moved, d.scaled(t2))?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    let zmax = v.iter().map(|v| v.z.abs()).fold(0.0, f64::max);
    Ok((
        all_pass(&v) && worst <= 1e-10,
        format!("{} functions, max |z| {zmax:.2}; cocycle composition max error {worst:.1e}", v.len()),
    ))
}

fn c8_conditions() -> Check {
    let opts = ConditionOptions::default();
    let d = condition_constants(&Model::preset("decoupled")?, 2.0, opts)?;
    let decoupled = d.xi_q == 0.0 && d.theta0 == 0.0 && d.theta0_prime == 0.0 && d.k3_threshold == f64::INFINITY;
    let m1 = Model::preset("model1-quartic-d1-L4")?;
    let c: Vec<_> = (1..=6).map(|q| condition_constants(&m1, q as f64, opts)).collect::<Result<_, _>>()?;
    let k3 = c[0].k3_threshold;
    let step = c[1].xi_q - c[0].xi_q;
    let affine = c.iter().enumerate().all(|(i, x)| {
        let q = (i + 1) as f64;
        let want = x.k1 * (1.0 + (q - 1.0) * x.k2) * x.trace_inv;
        x.xi_q == want && (x.xi_q - c[0].xi_q - (q - 1.0) * step).abs() <= 1e-12
    });
    Ok((
        decoupled && c[0].order_r == 2 && k3 == 0.25 && affine && step >= 0.0,
        format!(
            "decoupled Ξ={} Θ={} K3⁰={}; model I K3⁰={k3}, Ξ_Q = {:.4} + {:.4}(Q-1), Θ_0={:.3} ({}), Θ_0'={:.3} ({})",
            d.xi_q,
            d.theta0,
            d.k3_threshold,
            c[0].xi_q,
            step,
            c[0].theta0,
            if c[0].theta0_ok { "<1" } else { "≥1" },
            c[0].theta0_prime,
            if c[0].theta0_prime_ok { "<1" } else { "≥1" }
        ),
    ))
}

fn c9_langevin() -> Check {
    let m = single(OneSitePotential::quartic(1.0), 2);
    let idx = m.n_modes();
    let second = |s: &SampleStore| batch_means_default(&(0..s.len()).map(|i| s.coeffs(i)[idx].powi(2)).collect::<Vec<_>>());
    let dt = 0.02;
    let (coarse, _) = collect_samples(&m, &ChainConfig::langevin(dt, 400_000, 5_000, 109))?;
    let (fine, _) = collect_samples(&m, &ChainConfig::langevin(dt / 2.0, 800_000, 10_000, 110))?;
    let (ec, ef) = (second(&coarse)?, second(&fine)?);
    let rich = Estimate {
        mean: 2.0 * ef.mean - ec.mean,
        se: (4.0 * ef.se * ef.se + ec.se * ec.se).sqrt(),
    };
    let (ps, _) = collect_samples(&m, &ChainConfig::pcn(0.8, 100_000, 1_000, 111))?;
    let pcn = second(&ps)?;
    let quad = QuadratureOracle::new(&m, QuadratureSpec::auto(&m))?.moments().second(idx, idx);
    let z_lq = rich.z_against(quad);
    let z_pq = pcn.z_against(quad);
    let z_lp = rich.minus(&pcn).z_against(0.0);
    Ok((
        z_lq.abs() <= 5.0 && z_pq.abs() <= 5.0 && z_lp.abs() <= 5.0,
        format!(
            "Langevin dt {:.4}±{:.4}, dt/2 {:.4}±{:.4}, extrapolated {:.4}±{:.4}; pCN {:.4}±{:.4}; quadrature {quad:.5}; z = {z_lq:.2}, {z_pq:.2}, {z_lp:.2}",
            ec.mean, ec.se, ef.mean, ef.se, rich.mean, rich.se, pcn.mean, pcn.se
        ),
    ))
}

fn c10_green() -> Check {
    let p = unit();
    let g = green_discrepancy(0.0, 0.0, &p, 64)?;
    println!("    G(0,0): series {:.6}, closed form {:.6}, ratio {:.4}", g.series, g.closed_form, g.ratio);
    let m = single(OneSitePotential::zero(), 64);
    // downstream consumers agree with the series, not the closed form
    let trace = trace_power(0.0, &p, 64)?.value;
    let downstream = (trace - g.series).abs() < 1e-12
        && (gaussian_increment_variance(&m, 0.5) - 2.0 * (g.series - green_series(0.5, &p, 64))).abs() < 1e-14;
    let converges = (green_series(0.0, &p, 100_000) - green_continuum(0.0, &p)).abs() < 1e-5;
    Ok((
        downstream && converges && (g.series - 1.0820).abs() < 1e-3 && (g.ratio - 2.0).abs() < 0.01,
        format!("series/closed-form ratio {:.4}; series used by trace and structure-function code", g.ratio),
    ))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn main() -> ExitCode {
    let (gm, gs) = gaussian_samples();
    let checks: Vec<Criterion> = vec![
        ("gaussian ground truth", Box::new(|| c1_gaussian(&gm, &gs))),
        ("integration by parts", Box::new(c2_ibp)),
        ("oracle triangle", Box::new(c3_oracle_triangle)),
        ("kernel consistency", Box::new(c4_dlr)),
        ("hölder scaling", Box::new(|| c5_holder(&gm, &gs))),
        ("uniform moments", Box::new(c6_moments)),
        ("quasi-invariance", Box::new(c7_flow)),
        ("condition constants", Box::new(c8_conditions)),
        ("langevin vs pcn", Box::new(c9_langevin)),
        ("green discrepancy", Box::new(c10_green)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t0 = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<22} {} ({:.1}s) {detail}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! One driver per command. Each reads the resolved config, calls the library
//! and emits check records and output files.

use serde_json::{json, Value};
use shgordon::algebra::{CPoly, LaurentLoop, M2};
use shgordon::data::{g1_seed, g2_seed, random_cauchy, random_direction, RandomSpec};
use shgordon::diffpoly::{jacobi_operator, pinkall_sterling};
use shgordon::jets::{CauchyData, Mode};
use shgordon::laxflow::{
    killing_flow, lnmu_expansion, lnmu_sweep, sym_bobenko_export, vacuum_lnmu, y_flow, KillingTrajectory, Monodromy,
};
use shgordon::spectral::{closing_conditions_with, curve_from_xi, CurveFit, CurveOpts, MembershipOpts};
use shgordon::symplectic::{
    involution_matrix, omega_gradient_table, serre_pairing_check, Cocycle, FdOpts, PairingOpts, Tangent,
};
use shgordon::whitham::{whitham_flow, WhithamDirection};
use shgordon::C64;

use crate::config::RunConfig;
use crate::output::{cjson, CliError, CliResult, Run};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Cauchy data from the vacuum, a CSV file, explicit modes or the random
/// generator, in that order of precedence.
pub fn cauchy_data(cfg: &RunConfig) -> CliResult<CauchyData> {
    if cfg.vacuum {
        return Ok(CauchyData::vacuum(cfg.grid, cfg.period)?);
    }
    if let Some(path) = &cfg.input {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::malformed(format!("cannot read {path}: {e}")))?;
        return Ok(CauchyData::from_csv(&text)?);
    }
    if !cfg.fourier_u.is_empty() || !cfg.fourier_uy.is_empty() {
        let modes = |v: &[[f64; 3]]| -> Vec<Mode> {
            v.iter().map(|m| Mode { m: m[0] as usize, cos: m[1], sin: m[2] }).collect()
        };
        return Ok(CauchyData::from_modes(
            cfg.grid,
            cfg.period,
            cfg.mean_u,
            &modes(&cfg.fourier_u),
            cfg.mean_uy,
            &modes(&cfg.fourier_uy),
        )?);
    }
    Ok(random_cauchy(random_spec(cfg, cfg.seed))?)
}

fn random_spec(cfg: &RunConfig, seed: u64) -> RandomSpec {
    RandomSpec { n: cfg.grid, period: cfg.period, modes: cfg.modes, amp: cfg.amp, seed }
}

/// The polynomial Killing field seeded by the config.
pub fn seed_xi(cfg: &RunConfig) -> LaurentLoop {
    match cfg.genus {
        1 => g1_seed(cfg.seed_u0, cfg.seed_uy0),
        _ => g2_seed(cfg.seed_u0, cfg.seed_ux0, cfg.seed_uy0, c(cfg.seed_b0[0], cfg.seed_b0[1])),
    }
}

fn lambdas(cfg: &RunConfig) -> Vec<f64> {
    if !cfg.lambda.is_empty() {
        return cfg.lambda.clone();
    }
    let k = cfg.lambda_count;
    if k == 1 {
        return vec![cfg.lambda_min];
    }
    (0..k).map(|i| cfg.lambda_min + (cfg.lambda_max - cfg.lambda_min) * i as f64 / (k - 1) as f64).collect()
}

fn tol_or(cfg: &RunConfig, default: f64) -> f64 {
    cfg.check_tol.unwrap_or(default)
}

/// Monodromy at each λ, swept in `workers` contiguous chunks.
pub fn monodromy(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let cd = cauchy_data(cfg)?;
    let ls: Vec<C64> = lambdas(cfg).into_iter().map(|l| c(l, 0.0)).collect();
    let chunk = ls.len().div_ceil(cfg.workers);
    let results: Vec<shgordon::Result<Vec<Monodromy>>> = std::thread::scope(|s| {
        let handles: Vec<_> = ls.chunks(chunk).map(|part| s.spawn(|| lnmu_sweep(&cd, part, cfg.tol))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let tol = tol_or(cfg, 1e-8);
    let mut csv = String::from("lambda,lnmu_re,lnmu_im,mu_re,mu_im\n");
    for r in results {
        for m in r? {
            csv.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", m.lambda.re, m.lnmu.re, m.lnmu.im, m.mu.re, m.mu.im));
            let extra = json!({ "lambda": m.lambda.re, "lnmu": cjson(m.lnmu), "mu": cjson(m.mu) });
            if cfg.vacuum {
                let want = vacuum_lnmu(cd.period, m.lambda);
                let res = (m.lnmu - want).norm();
                run.record("monodromy-vacuum", cjson(m.lnmu), cjson(want), Some(res), res < tol, extra);
            } else {
                let det = m.m.determinant();
                let res = (det - 1.0).norm();
                run.record("monodromy-unimodular", cjson(det), json!([1.0, 0.0]), Some(res), res < tol, extra);
            }
        }
    }
    run.write("monodromy.csv", &csv)
}

/// Coefficients of `ln μ = Σ c_m (√λ)^m`, `m = -1..order`.
pub fn expand(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let cd = cauchy_data(cfg)?;
    // `order + 1` coefficients, powers (√λ)^{-1} through (√λ)^{order-1}
    let mut cs = lnmu_expansion(&cd, cfg.order)?;
    cs.truncate(cfg.order + 1);
    let tol = tol_or(cfg, 1e-8);
    let mut csv = String::from("power,re,im\n");
    for (i, v) in cs.iter().enumerate() {
        csv.push_str(&format!("{},{:e},{:e}\n", i as i32 - 1, v.re, v.im));
    }
    run.write("expand.csv", &csv)?;
    let lhs = Value::Array(cs.iter().map(|v| cjson(*v)).collect());
    let extra = json!({ "powers_from": -1, "order": cfg.order });
    if cfg.vacuum {
        let half = c(0.0, cd.period / 2.0);
        let want: Vec<C64> = (0..cs.len()).map(|i| if i == 0 || i == 2 { half } else { c(0.0, 0.0) }).collect();
        let res = cs.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let rhs = Value::Array(want.iter().map(|v| cjson(*v)).collect());
        run.record("expand-vacuum", lhs, rhs, Some(res), res < tol, extra);
    } else {
        // the even powers of √λ vanish identically
        let res = cs.iter().skip(1).step_by(2).map(|v| v.norm()).fold(0.0, f64::max);
        run.record("expand-even-vanish", lhs, json!(0.0), Some(res), res < tol, extra);
    }
    Ok(())
}

/// Pinkall-Sterling iteration with the symbolic Jacobi check.
pub fn ps_iterate(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let levels = pinkall_sterling(cfg.levels)?;
    for l in &levels {
        let j = jacobi_operator(&l.omega);
        let extra = json!({
            "n": l.n,
            "omega": l.omega.to_string(),
            "omega_displayed": l.omega_alternating().to_string(),
            "tau": l.tau.to_string(),
            "sigma": l.sigma.to_string(),
        });
        run.record("ps-jacobi", json!(j.to_string()), json!("0"), Some(j.max_coeff()), j.is_zero(), extra);
    }
    let text = serde_json::to_string_pretty(&levels).expect("levels serialize") + "\n";
    run.write("ps_levels.json", &text)
}

fn flow_nodes(cfg: &RunConfig) -> Vec<f64> {
    let span = cfg.span.unwrap_or(cfg.period);
    (0..=cfg.steps).map(|k| span * k as f64 / cfg.steps as f64).collect()
}

fn flow_record(cfg: &RunConfig, run: &mut Run, t: &KillingTrajectory, name: &str) -> CliResult<()> {
    let drift = t.max_a_drift();
    let last = t.fields.last().expect("nonempty trajectory");
    let extra = json!({ "genus": t.genus, "nodes": t.nodes.len(), "final_u": last.u, "final_uy": last.uy });
    run.record("isospectrality", json!(drift), json!(0.0), Some(drift), drift < tol_or(cfg, 1e-8), extra);
    run.write(name, &t.to_csv())
}

/// Killing-field flow along `x`.
pub fn flow_x(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let t = killing_flow(&seed_xi(cfg), cfg.genus, &flow_nodes(cfg), cfg.tol)?;
    flow_record(cfg, run, &t, "flow_x.csv")
}

/// Killing-field flow along `y`.
pub fn flow_y(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let t = y_flow(&seed_xi(cfg), cfg.genus, &flow_nodes(cfg), cfg.tol)?;
    flow_record(cfg, run, &t, "flow_y.csv")
}

fn fit(cfg: &RunConfig) -> CliResult<CurveFit> {
    let o = CurveOpts { tol: cfg.tol.min(1e-12), ..CurveOpts::default() };
    Ok(curve_from_xi(&seed_xi(cfg), cfg.genus, cfg.period, o)?)
}

/// Spectral curve `(a, b)` recovered from the seed.
pub fn curve(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let f = fit(cfg)?;
    let o = MembershipOpts { tol: tol_or(cfg, 1e-7), root_tol: cfg.root_tol, circle_samples: cfg.circle_samples };
    let m = f.pair.membership_with(o)?;
    let extra = json!({ "membership": m, "fit_residual": f.fit_residual, "periodicity": f.periodicity });
    let inv = f.pair.period_invariant();
    let want = c(0.0, -cfg.period / 4.0);
    run.record("curve-membership", cjson(inv), cjson(want), Some(m.b0_defect), m.member, extra);
    let text = serde_json::to_string_pretty(&f).expect("fit serializes") + "\n";
    run.write("curve.json", &text)
}

/// Closing conditions of the recovered curve.
pub fn closing(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let f = fit(cfg)?;
    let rep = closing_conditions_with(&f.pair, cfg.closing_tol, cfg.panels)?;
    let res = rep.h_lattice_defects.iter().copied().fold(0.0, f64::max);
    let extra = json!({ "report": rep });
    run.record("closing", json!(rep.h_values), json!("pi i Z"), Some(res), rep.pass, extra);
    Ok(())
}

fn cpoly(v: &[[f64; 2]]) -> CPoly {
    CPoly::new(v.iter().map(|z| c(z[0], z[1])).collect())
}

fn direction(cfg: &RunConfig) -> CliResult<WhithamDirection> {
    let poly = match &cfg.c {
        Some(v) => cpoly(v),
        None => WhithamDirection::basis(cfg.genus)[0].scale(c(-0.2, 0.0)),
    };
    Ok(WhithamDirection::new(poly, cfg.genus)?)
}

fn cocycle(cfg: &RunConfig) -> CliResult<Cocycle> {
    match &cfg.cocycle {
        Some(v) => Ok(Cocycle::new(v.iter().map(|z| c(z[0], z[1])).collect())?),
        None => {
            let b = &Cocycle::basis(cfg.genus)[0];
            Ok(Cocycle::new(b.c.iter().map(|v| v * 0.8).collect())?)
        }
    }
}

/// Whitham flow with conservation monitors.
pub fn whitham(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let f = fit(cfg)?;
    let tr = whitham_flow(&f.pair, &direction(cfg)?, cfg.t_end, cfg.steps, cfg.tol)?;
    run.write("whitham.csv", &tr.to_csv())?;
    let tol = tol_or(cfg, 1e-5);
    let halted = json!({ "halted": tr.halted });
    let pd = tr.period_drift();
    run.record("whitham-period", json!(pd), json!(0.0), Some(pd), pd < 1e-8 && tr.halted.is_none(), halted.clone());
    let h = tr.max_h_lattice();
    run.record("whitham-h-lattice", json!(h), json!(0.0), Some(h), h < tol, halted.clone());
    let a = tr.a_cycle_drift();
    run.record("whitham-a-cycles", json!(a), json!(0.0), Some(a), a < tol, halted);
    Ok(())
}

fn tangent(cfg: &RunConfig, cd: &CauchyData, k: u64) -> CliResult<Tangent> {
    let spec = RandomSpec { n: cd.n(), ..random_spec(cfg, cfg.seed.wrapping_add(100 + k)) };
    let (du, duy) = random_direction(spec)?;
    Ok(Tangent::new(du, duy, cd.period)?)
}

/// Gradient theorem `dH_n(δ) = Ω(G_n, δ)` on random directions.
pub fn gradients(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let cd = cauchy_data(cfg)?;
    let dirs: Vec<Tangent> = (0..cfg.dirs as u64).map(|k| tangent(cfg, &cd, k)).collect::<CliResult<_>>()?;
    let o = FdOpts { step: cfg.fd_step, tol: tol_or(cfg, 1e-7) };
    let rows = omega_gradient_table(&cd, cfg.n_max.unwrap_or(6), &dirs, o)?;
    let mut csv = String::from("n,direction,dh,omega,residual,pass\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{:e},{:e},{:e},{}\n", r.n, r.direction, r.dh, r.omega, r.residual, r.pass));
        let extra = json!({ "n": r.n, "direction": r.direction });
        run.record("gradient", json!(r.dh), json!(r.omega), Some(r.residual), r.pass, extra);
    }
    run.write("gradients.csv", &csv)
}

/// Poisson brackets `{H_m, H_n}`.
pub fn involution(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let cd = cauchy_data(cfg)?;
    let m = involution_matrix(&cd, cfg.n_max.unwrap_or(4))?;
    let tol = tol_or(cfg, 1e-6);
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate().skip(i + 1) {
            run.record("involution", json!(v), json!(0.0), Some(v.abs()), v.abs() < tol, json!({ "m": i + 1, "n": j + 1 }));
        }
    }
    let text = serde_json::to_string_pretty(&m).expect("matrix serializes") + "\n";
    run.write("involution.json", &text)
}

/// Pairing equation between an isospectral field and a Whitham tangent.
pub fn pairing(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let o = PairingOpts { n: cfg.pairing_points, tol: cfg.tol.min(1e-12), h: cfg.whitham_step };
    let r = serre_pairing_check(&seed_xi(cfg), cfg.genus, cfg.period, &cocycle(cfg)?, &direction(cfg)?, o)?;
    let extra = json!({ "isotropy": r.isotropy, "skipped": r.skipped });
    run.record("pairing", json!(r.lhs), json!(r.rhs), r.residual, r.pass, extra);
    Ok(())
}

fn su2_defect(f: &M2) -> f64 {
    let u = f * f.adjoint() - M2::identity();
    let d = (f.determinant() - 1.0).norm();
    u.iter().map(|v| v.norm()).fold(d, f64::max)
}

/// Sym-Bobenko immersion as an OBJ mesh.
pub fn surface(cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
    let mesh =
        sym_bobenko_export(&seed_xi(cfg), cfg.genus, cfg.nx, cfg.ny, cfg.hx, cfg.hy, cfg.t0, cfg.t1, cfg.tol)?;
    let res = mesh.su2.iter().map(su2_defect).fold(0.0, f64::max);
    let extra = json!({ "vertices": mesh.vertices.len() });
    run.record("surface-su2", json!(res), json!(0.0), Some(res), res < tol_or(cfg, 1e-8), extra);
    run.write("surface.obj", &mesh.to_obj())
}

//! One function per command; each fills a [`Summary`] and writes its curves.

use std::f64::consts::PI;
use std::fs::File;
use std::sync::Arc;

use num_complex::Complex64;
use resolvent_core::birman_schwinger::{
    assemble_bs, invert_bs, neumann_inverse, neumann_norm_descriptor, resonance_depth_sweep, resonance_scan,
    vr0_squared_norm_scan,
};
use resolvent_core::born::{
    born_dispersive_term, cutoff_ladder, iterated_kato_integral, statphase_sup, BornRow, CutoffSpec, LambdaQuadrature,
};
use resolvent_core::free_resolvent::{assemble_derivative, gaussian_probes, geometric_widths, mapping_norm_probe, BranchSign};
use resolvent_core::potential::read_table;
use resolvent_core::propagator::{
    born_remainder_identity, decay_fit, ibp_check, EvolutionOracle, EvolveSettings, SpectralCache,
};
use resolvent_core::quadrature::power_law_fit;
use resolvent_core::{build_box_grid, build_radial_grid, class_audit, kato_norm, translate, Field, Grid, Potential, Shape};

use crate::config::*;
use crate::error::CliError;
use crate::output::{num, OutputDir, Summary};

type Rows = Vec<Vec<String>>;

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub base_dir: &'a std::path::Path,
    pub seed: u64,
}

pub fn build_grid(g: &GridConfig) -> Result<Arc<Grid>, CliError> {
    let grid = match g.kind {
        GridKindConfig::Radial => build_radial_grid(g.extent, g.n)?,
        GridKindConfig::Box => build_box_grid(g.extent, g.n)?,
    };
    Ok(Arc::new(grid))
}

fn build_potential(ctx: &Context, grid: &Arc<Grid>) -> Result<Potential, CliError> {
    let Some(p) = &ctx.config.potential else { return Ok(Potential::zero(grid)) };
    let need = |x: Option<f64>| x.expect("validated");
    let base = match p.kind {
        PotentialKind::Zero => Potential::zero(grid),
        PotentialKind::Well => Potential::from_shape(grid, Shape::Well { depth: need(p.depth), radius: need(p.radius) }),
        PotentialKind::Power => Potential::from_shape(
            grid,
            Shape::Power { alpha: need(p.alpha), strength: need(p.strength), radius: need(p.radius) },
        ),
        PotentialKind::Gaussian => Potential::from_shape(grid, Shape::Gaussian { depth: need(p.depth), width: need(p.width) }),
        PotentialKind::Table => {
            let path = ctx.base_dir.join(p.path.as_ref().expect("validated"));
            let file = File::open(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            read_table(grid, file)?
        }
    };
    let base = match p.epsilon {
        Some(e) => base.with_epsilon(e)?,
        None => base,
    };
    match p.center {
        Some(c) if c != [0.0; 3] => {
            let moved = translate(&base, c)?;
            if let Some(w) = moved.clipped {
                log::warn!("translated potential clipped at the box edge; lost L¹ fraction {:.3e}", w.lost_l1_fraction);
            }
            Ok(moved.potential)
        }
        _ => Ok(base),
    }
}

fn gaussian(grid: &Arc<Grid>, width: f64) -> Field {
    Field::from_radial_fn(grid, |r| Complex64::new((-(r * r) / (width * width)).exp(), 0.0))
}

fn quadrature(q: &QuadratureConfig) -> LambdaQuadrature {
    let mut out = LambdaQuadrature::new(q.lambda_max, q.panels, q.order);
    out.n_fine = q.fine_panels;
    out
}

fn grid_of(ctx: &Context) -> Result<Arc<Grid>, CliError> {
    build_grid(ctx.config.grid.as_ref().expect("validated"))
}

pub fn run(ctx: &Context, out: &mut OutputDir) -> Result<Summary, CliError> {
    let mut s = Summary::default();
    match ctx.config.command {
        Command::Audit => audit(ctx, out, &mut s)?,
        Command::ResonanceScan => resonance(ctx, out, &mut s)?,
        Command::Decay => decay(ctx, out, &mut s)?,
        Command::Born => born(ctx, out, &mut s)?,
        Command::ResolventNorms => norms(ctx, out, &mut s)?,
        Command::Statphase => statphase(ctx, out, &mut s)?,
        Command::IbpCheck => ibp(ctx, out, &mut s)?,
    }
    Ok(s)
}

fn audit(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.audit.as_ref().expect("validated");
    let grid = grid_of(ctx)?;
    let v = build_potential(ctx, &grid)?;
    let report = class_audit(&v);
    let kato = kato_norm(&v);
    let rows: Rows = [
        ("epsilon", report.epsilon),
        ("lp_upper", report.lp_upper),
        ("lp_lower", report.lp_lower),
        ("kato", report.kato),
        ("combined", report.combined),
        ("kato_over_combined", report.kato_over_combined),
    ]
    .iter()
    .map(|(k, x)| vec![k.to_string(), num(*x)])
    .collect();
    out.csv("audit.csv", &["quantity", "value"], &rows)?;
    let levels = report.upper_ratios.len().max(report.lower_ratios.len());
    let rows: Rows = (0..levels)
        .map(|i| {
            let get = |v: &[f64]| v.get(i).map(|x| num(*x)).unwrap_or_default();
            vec![(i + 1).to_string(), get(&report.upper_ratios), get(&report.lower_ratios)]
        })
        .collect();
    out.csv("refinement.csv", &["level", "upper_ratio", "lower_ratio"], &rows)?;
    s.float("kato_norm", kato);
    s.float("combined_norm", report.combined);
    s.metric("divergence_detected", report.divergence_detected);
    if cfg.require_class {
        s.flag("class_membership", report.pass);
    }
    if let Some(r) = cfg.kato_reference {
        s.at_most("kato_relative_error", (kato - r).abs() / r, cfg.kato_tolerance);
    }
    if let Some(it) = &cfg.iterated {
        let centre = v.offset();
        let mut rows: Rows = Vec::new();
        let mut worst_slack = f64::INFINITY;
        let mut centre_err: Option<f64> = None;
        for k in 0..=it.k_max {
            for (e, [x0, x1]) in it.endpoints.iter().enumerate() {
                let est = iterated_kato_integral(&v, k, *x0, *x1, it.samples, ctx.seed.wrapping_add(e as u64))?;
                let slack = est.bound - (est.mean - 3.0 * est.stderr);
                worst_slack = worst_slack.min(slack / est.bound);
                if k == 1 && *x0 == centre && *x1 == centre {
                    centre_err = Some((est.mean - est.bound).abs() / est.bound);
                }
                rows.push(vec![
                    k.to_string(),
                    e.to_string(),
                    num(est.mean),
                    num(est.stderr),
                    num(est.bound),
                    est.n_samples.to_string(),
                ]);
            }
        }
        out.csv("kato_iterated.csv", &["k", "endpoints", "mean", "stderr", "bound", "samples"], &rows)?;
        s.at_least("iterated_bound_slack", worst_slack, 0.0);
        if let Some(tol) = it.centre_tolerance {
            let err = centre_err.ok_or_else(|| CliError::Config {
                line: None,
                message: "centre_tolerance needs k_max ≥ 1 and an endpoint pair at the potential's centre".into(),
            })?;
            s.at_most("centre_equality_relative_error", err, tol);
        }
    }
    Ok(())
}

fn resonance(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.resonance.as_ref().expect("validated");
    let grid = grid_of(ctx)?;
    if let Some(l) = &cfg.lambdas {
        let v = build_potential(ctx, &grid)?;
        let report = resonance_scan(&grid, &v, &l.values(), cfg.threshold)?;
        let rows: Rows = report
            .lambda_grid
            .iter()
            .zip(&report.sigma_min)
            .zip(&report.det_log)
            .map(|((l, m), d)| vec![num(*l), num(*m), num(*d)])
            .collect();
        out.csv("resonance_scan.csv", &["lambda", "sigma_min", "logdet"], &rows)?;
        out.plot("resonance_scan.csv", "lambda", "sigma_min", false, None)?;
        s.float("resonance_threshold", report.threshold);
        s.metric("zero_energy_flag", format!("{:?}", report.zero_energy_flag));
        if let Some(c) = report.classification {
            s.metric("null_class", format!("{c:?}"));
        }
    }
    if let Some(d) = &cfg.depth_sweep {
        let sweep = resonance_depth_sweep(&grid, d.radius, &d.depths.values())?;
        let rows: Rows = sweep.depths.iter().zip(&sweep.sigma_min).map(|(a, b)| vec![num(*a), num(*b)]).collect();
        out.csv("depth_sweep.csv", &["depth", "sigma_min"], &rows)?;
        out.plot("depth_sweep.csv", "depth", "sigma_min", false, None)?;
        s.float("threshold_depth", sweep.minimizer);
        s.float("threshold_sigma_min", sweep.minimum);
        if let Some(r) = d.reference {
            s.at_most("threshold_depth_relative_error", (sweep.minimizer - r).abs() / r, d.tolerance);
        }
    }
    Ok(())
}

fn sup_within(u: &Field, radius: f64) -> f64 {
    u.values().iter().zip(u.grid().radii()).filter(|(_, r)| **r <= radius).map(|(z, _)| z.norm()).fold(0.0, f64::max)
}

fn decay(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.decay.as_ref().expect("validated");
    let grid = grid_of(ctx)?;
    let v = build_potential(ctx, &grid)?;
    let raw = gaussian(&grid, cfg.probe_width);
    let f = raw.scale(Complex64::new(1.0 / raw.l1(), 0.0));
    let settings = EvolveSettings {
        quadrature: quadrature(&cfg.quadrature),
        cutoff: cfg.cutoff.map(CutoffSpec::new).transpose()?,
    };
    let times = cfg.times.values();
    for &t in &times {
        settings.quadrature.fine_panels(t)?;
    }
    let cache = SpectralCache::new(&grid, &v, &f, settings)?;
    let mut fields = Vec::with_capacity(times.len());
    for &t in &times {
        fields.push(cache.at(t)?);
    }
    let sups: Vec<f64> = fields.iter().map(Field::sup).collect();
    let rows: Rows = times.iter().zip(&sups).map(|(t, u)| vec![num(*t), num(*u), num(f.l1())]).collect();
    out.csv("decay.csv", &["t", "sup_norm", "l1_in"], &rows)?;
    out.plot("decay.csv", "t", "sup_norm", true, Some(-1.5))?;
    s.metric("skipped_lambdas", cache.skipped().len());
    if times.len() >= 6 {
        let curve = decay_fit(&times, &sups, f.l1())?;
        s.float("C", curve.fitted_c);
        s.float("alpha", curve.fitted_alpha);
        s.float("residual", curve.residual);
        if let Some([lo, hi]) = cfg.alpha_band {
            s.within("alpha", curve.fitted_alpha, lo, hi);
        }
    } else if cfg.alpha_band.is_some() {
        return Err(CliError::Config { line: None, message: "alpha_band needs at least 6 times spanning a factor ≥ 8".into() });
    }
    if let Some(tol) = cfg.amplitude_tolerance {
        let point = (4.0 * PI).powf(-1.5);
        let dev = times
            .iter()
            .zip(&sups)
            .map(|(t, u)| (u * t.powf(1.5) / f.l1() / point - 1.0).abs())
            .fold(0.0, f64::max);
        s.at_most("point_mass_amplitude_deviation", dev, tol);
    }
    if let Some(o) = &cfg.oracle {
        let og = build_grid(&o.grid)?;
        let ov = build_potential(ctx, &og)?;
        let oraw = gaussian(&og, cfg.probe_width);
        let of = oraw.scale(Complex64::new(1.0 / oraw.l1(), 0.0));
        let oracle = EvolutionOracle::new(&og, &ov)?;
        s.metric("oracle_bound_states", oracle.n_negative());
        let mut rows: Rows = Vec::new();
        let mut worst = 0.0f64;
        for t in o.times.values() {
            let a = sup_within(&cache.at(t)?, o.compare_radius);
            let b = sup_within(&oracle.evolve(t, &of, true)?, o.compare_radius);
            let rel = (a - b).abs() / b;
            worst = worst.max(rel);
            rows.push(vec![num(t), num(a), num(b), num(rel)]);
        }
        out.csv("oracle.csv", &["t", "evolve_sup", "oracle_sup", "relative_difference"], &rows)?;
        s.at_most("oracle_max_relative_difference", worst, o.tolerance);
    }
    Ok(())
}

fn born(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.born.as_ref().expect("validated");
    let grid = grid_of(ctx)?;
    let v = build_potential(ctx, &grid)?;
    if let Some(d) = &cfg.dispersive {
        let f = gaussian(&grid, d.probe_width);
        let times = d.times.values();
        let quad = quadrature(&d.quadrature);
        let ladder = cutoff_ladder(d.ladder);
        let mut all_rows: Vec<BornRow> = Vec::new();
        let mut fits: Rows = Vec::new();
        for (idx, &k) in d.orders.iter().enumerate() {
            let terms = born_dispersive_term(&v, k, &times, &f, &f, &ladder, &quad)?;
            let sups: Vec<f64> = terms.iter().map(|x| x.value).collect();
            all_rows.extend(terms.into_iter().flat_map(|x| x.rows));
            let (c, alpha, res) = power_law_fit(&times, &sups)?;
            fits.push(vec![k.to_string(), num(c), num(alpha), num(res)]);
            s.float(&format!("alpha_k{k}"), alpha);
            s.float(&format!("C_k{k}"), c);
            if let Some(bands) = &d.exponent_bands {
                s.within(&format!("alpha_k{k}"), alpha, 1.5 - bands[idx], 1.5 + bands[idx]);
            }
        }
        let mut bytes = Vec::new();
        resolvent_core::born::write_born_csv(&all_rows, &mut bytes)?;
        out.write("born.csv", &bytes)?;
        out.csv("born_fit.csv", &["k", "C", "alpha", "residual"], &fits)?;
    }
    if let Some(i) = &cfg.identity {
        let f = gaussian(&grid, i.probe_width);
        let g = Field::from_radial_fn(&grid, |r| Complex64::new(1.0 / (1.0 + r * r), 0.0));
        let mut rows: Rows = Vec::new();
        let mut worst = 0.0f64;
        for l in i.lambdas.values() {
            let id = born_remainder_identity(&grid, &v, l, i.m, &f, &g)?;
            worst = worst.max(id.relerr);
            rows.push(vec![num(l), num(id.full.re), num(id.full.im), num(id.series.re), num(id.series.im), num(id.relerr)]);
        }
        out.csv("born_identity.csv", &["lambda", "full_re", "full_im", "series_re", "series_im", "relerr"], &rows)?;
        s.at_most("identity_max_relerr", worst, i.tolerance);
    }
    Ok(())
}

fn norms(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.norms.as_ref().expect("validated");
    let grid = grid_of(ctx)?;
    let branch = match cfg.branch {
        BranchConfig::Plus => BranchSign::Plus,
        BranchConfig::Minus => BranchSign::Minus,
    };
    if let Some(m) = &cfg.mapping {
        let probes = gaussian_probes(&grid, &geometric_widths(m.widths.min, m.widths.max, m.widths.count));
        let lambdas = m.lambdas.values();
        let values = lambdas.iter().map(|&l| mapping_norm_probe(&grid, l, branch, m.p, &probes)).collect::<Result<Vec<_>, _>>()?;
        let rows: Rows = lambdas.iter().zip(&values).map(|(l, x)| vec![num(*l), num(*x)]).collect();
        out.csv("mapping_norms.csv", &["lambda", "norm_estimate"], &rows)?;
        let (_, alpha, res) = power_law_fit(&lambdas, &values)?;
        out.plot("mapping_norms.csv", "lambda", "norm_estimate", true, Some(-alpha))?;
        s.float("mapping_exponent", -alpha);
        s.float("mapping_fit_residual", res);
        if let Some(e) = m.expected_exponent {
            s.within("mapping_exponent", -alpha, e - m.tolerance, e + m.tolerance);
        }
    }
    if let Some(d) = &cfg.derivative {
        let target = 1.0 / (4.0 * PI);
        let mut rows: Rows = Vec::new();
        let mut worst = 0.0f64;
        for l in d.lambdas.values() {
            for b in [BranchSign::Plus, BranchSign::Minus] {
                let n = assemble_derivative(&grid, l, b)?.norm_1_to_inf();
                worst = worst.max((n - target).abs());
                rows.push(vec![num(l), b.as_str().to_string(), num(n)]);
            }
        }
        out.csv("derivative_norms.csv", &["lambda", "branch", "norm"], &rows)?;
        s.at_most("derivative_norm_deviation", worst, d.tolerance);
    }
    if let Some(n) = &cfg.neumann {
        let v = build_potential(ctx, &grid)?;
        let lambdas = n.lambdas.values();
        let scan = vr0_squared_norm_scan(&grid, &v, &lambdas, &neumann_norm_descriptor())?;
        let mut rows: Rows = Vec::new();
        let mut worst = 0.0f64;
        let mut compared = 0usize;
        for (&l, &sq) in lambdas.iter().zip(&scan.values) {
            let past = scan.crossing.is_some_and(|c| l >= c);
            let mut diff = String::new();
            if past {
                let mut d = 0.0f64;
                for b in [BranchSign::Plus, BranchSign::Minus] {
                    let series = neumann_inverse(&grid, &v, l, b, n.series_tolerance)?;
                    let direct = invert_bs(&assemble_bs(&grid, &v, l, b)?)?;
                    d = d.max((&series.matrix - &direct.matrix).camax());
                }
                worst = worst.max(d);
                compared += 1;
                diff = num(d);
            }
            rows.push(vec![num(l), num(sq), diff]);
        }
        out.csv("neumann.csv", &["lambda", "square_norm", "neumann_vs_direct"], &rows)?;
        out.plot("neumann.csv", "lambda", "square_norm", true, None)?;
        match scan.crossing {
            Some(c) => s.float("crossing", c),
            None => s.metric("crossing", serde_json::Value::Null),
        }
        s.metric("neumann_compared", compared);
        s.flag("neumann_crossing_found", scan.crossing.is_some() && compared > 0);
        s.at_most("neumann_max_difference", worst, n.tolerance);
    }
    Ok(())
}

fn statphase(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.statphase.as_ref().expect("validated");
    let ladder = cutoff_ladder(cfg.ladder);
    let times = cfg.times.values();
    let (mut rows, mut ladder_rows): (Rows, Rows) = (Vec::new(), Vec::new());
    let (mut ts, mut ys, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for &a in &cfg.a {
        for &t in &times {
            let (sup, values) = statphase_sup(t, a, &ladder)?;
            let ratio = sup * t.powf(1.5) / a.abs();
            for (c, x) in ladder.iter().zip(&values) {
                ladder_rows.push(vec![num(a), num(t), num(c.scale), num(*x)]);
            }
            rows.push(vec![num(a), num(t), num(sup), num(ratio)]);
            ts.push(t);
            ys.push(sup / a.abs());
            ratios.push(ratio);
        }
    }
    out.csv("statphase.csv", &["a", "t", "sup_abs", "ratio"], &rows)?;
    out.csv("statphase_ladder.csv", &["a", "t", "L", "abs_value"], &ladder_rows)?;
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    let min_slack = ratios.iter().map(|r| c - r).fold(f64::INFINITY, f64::min);
    let (_, alpha, _) = power_law_fit(&ts, &ys)?;
    s.float("C", c);
    s.float("t_exponent", -alpha);
    s.at_least("min_slack", min_slack, 0.0);
    s.within("t_exponent", -alpha, -1.5 - cfg.exponent_tolerance, -1.5 + cfg.exponent_tolerance);
    Ok(())
}

fn ibp(ctx: &Context, out: &mut OutputDir, s: &mut Summary) -> Result<(), CliError> {
    let cfg = ctx.config.ibp.as_ref().expect("validated");
    let grid = grid_of(ctx)?;
    let v = build_potential(ctx, &grid)?;
    let f = gaussian(&grid, cfg.probe_width);
    let quad = quadrature(&cfg.quadrature);
    let first = ibp_check(&grid, &v, cfg.m, cfg.t, &f, &f, &quad, cfg.fd_step)?;
    let mut reports = vec![first];
    if cfg.refine_gain.is_some() {
        reports.push(ibp_check(&grid, &v, cfg.m, cfg.t, &f, &f, &quad, Some(first.fd_step / 2.0))?);
    }
    let rows: Rows = reports
        .iter()
        .map(|r| {
            vec![num(r.fd_step), num(r.lhs.re), num(r.lhs.im), num(r.rhs.re), num(r.rhs.im), num(r.relerr), num(r.boundary)]
        })
        .collect();
    out.csv("ibp.csv", &["fd_step", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "relerr", "boundary"], &rows)?;
    let verdict = first.to_json();
    out.write("ibp.json", format!("{verdict}\n").as_bytes())?;
    s.metric("verdict", serde_json::from_str::<serde_json::Value>(&verdict)?);
    s.float("relerr", first.relerr);
    s.float("boundary", first.boundary);
    s.at_most("relerr", first.relerr, cfg.tolerance);
    if let (Some(gain), Some(fine)) = (cfg.refine_gain, reports.get(1)) {
        s.float("relerr_half_step", fine.relerr);
        s.at_least("refinement_gain", first.relerr / fine.relerr, gain);
    }
    Ok(())
}

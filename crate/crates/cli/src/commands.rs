use linea::area::{self, AreaMap, ExplicitMap, McOptions};
use linea::dynamics::{self, TreeOptions, DEFAULT_NODE_CAP};
use linea::linearizer::{self, PoincareMap, SchwarzianKind};
use linea::numerics::linear_fit;
use linea::quad_diff::{self, PushforwardMap, PushforwardOptions, PushforwardSample, QDSpec};
use linea::{Complex64, Polynomial};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{complex_cells, num, Diagnostics, Outcome, Table};
use crate::{
    AreaCommand, Command, KindArg, LinArgs, LinearizeCommand, MapArgs, MapKind, OrderArgs, PushforwardKind, QdArgs,
    QdCommand,
};

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

fn tree_opts(cfg: &RunConfig) -> TreeOptions {
    TreeOptions {
        tol: cfg.tol,
        node_cap: DEFAULT_NODE_CAP,
    }
}

fn plain(result: Value, table: Table) -> Outcome {
    Outcome {
        result,
        diagnostics: Diagnostics::default(),
        table,
    }
}

/// Builds the linearizer at the computed fixed point nearest to `hint`.
fn linearizer_at(p: &Polynomial, hint: Complex64, order: usize) -> Result<PoincareMap, CliError> {
    let fixed = dynamics::fixed_points(p)?;
    let nearest = fixed
        .iter()
        .min_by(|a, b| (a.location - hint).norm().total_cmp(&(b.location - hint).norm()))
        .ok_or_else(|| CliError::Usage("polynomial has no fixed points".into()))?;
    if (nearest.location - hint).norm() > 1e-3 * (1.0 + hint.norm()) {
        return Err(CliError::Usage(format!(
            "{hint:.6} is not near a fixed point; nearest is {:.6}",
            nearest.location
        )));
    }
    Ok(linearizer::koenigs_coeffs(p, nearest.location, order)?)
}

fn lin_from(args: &LinArgs) -> Result<PoincareMap, CliError> {
    linearizer_at(&args.poly, args.fixed_point, args.order)
}

enum OwnedMap {
    Explicit(ExplicitMap),
    Linearizer(Box<PoincareMap>),
}

impl OwnedMap {
    fn from_args(args: &MapArgs) -> Result<Self, CliError> {
        match args.map {
            MapKind::Exp => Ok(OwnedMap::Explicit(ExplicitMap::Exp)),
            MapKind::CoshSqrt => Ok(OwnedMap::Explicit(ExplicitMap::CoshSqrt)),
            MapKind::Linearizer => {
                let (Some(p), Some(z)) = (&args.poly, args.fixed_point) else {
                    return Err(CliError::Usage(
                        "--map linearizer needs --poly and --fixed-point".into(),
                    ));
                };
                Ok(OwnedMap::Linearizer(Box::new(linearizer_at(p, z, args.order)?)))
            }
        }
    }

    fn as_area(&self) -> AreaMap<'_> {
        match self {
            OwnedMap::Explicit(m) => AreaMap::Explicit(*m),
            OwnedMap::Linearizer(f) => AreaMap::Linearizer(f),
        }
    }

    fn describe(&self) -> Value {
        match self {
            OwnedMap::Explicit(m) => to_value(m),
            OwnedMap::Linearizer(f) => json!({
                "zeta": to_value(&f.zeta),
                "lambda": to_value(&f.lambda),
                "eta": f.eta,
            }),
        }
    }
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Roots(args) => {
            let roots = args.poly.roots(cfg.tol)?;
            let residuals: Vec<f64> = roots.iter().map(|&r| args.poly.value(r).norm()).collect();
            let mut table = Table::new(&["re", "im", "residual"]);
            for (r, res) in roots.iter().zip(&residuals) {
                let [re, im] = complex_cells(*r);
                table.push(vec![re, im, num(*res)]);
            }
            Ok(Outcome {
                result: json!({ "roots": to_value(&roots) }),
                diagnostics: Diagnostics {
                    residuals: Some(residuals),
                    ..Default::default()
                },
                table,
            })
        }
        Command::FixedPoints(args) => {
            let fixed = dynamics::fixed_points(&args.poly)?;
            let mut table = Table::new(&[
                "re",
                "im",
                "multiplier_re",
                "multiplier_im",
                "abs_multiplier",
                "classification",
            ]);
            for f in &fixed {
                let [re, im] = complex_cells(f.location);
                let [mre, mim] = complex_cells(f.multiplier);
                let class = to_value(&f.classification).as_str().unwrap_or_default().to_string();
                table.push(vec![re, im, mre, mim, num(f.multiplier.norm()), class]);
            }
            Ok(plain(json!({ "fixed_points": to_value(&fixed) }), table))
        }
        Command::CriticalOrbit { poly, n_max } => {
            let orbits = dynamics::critical_orbit_analysis(&poly.poly, *n_max, dynamics::escape_radius(&poly.poly))?;
            let mut table = Table::new(&["kind", "re", "im"]);
            for (kind, pts) in [
                ("critical", &orbits.critical_points),
                ("postcritical", &orbits.postcritical_points),
            ] {
                for &z in pts {
                    let [re, im] = complex_cells(z);
                    table.push(vec![kind.to_string(), re, im]);
                }
            }
            Ok(plain(to_value(&orbits), table))
        }
        Command::Preimages { poly, w } => {
            let tree = dynamics::preimage_tree(&poly.poly, *w, cfg.depth, tree_opts(cfg))?;
            let mut table = Table::new(&["level", "index", "parent", "re", "im", "derivative_re", "derivative_im"]);
            let mut residuals = Vec::new();
            for (level, nodes) in tree.levels.iter().enumerate().skip(1) {
                let prev = &tree.levels[level - 1];
                let worst = nodes
                    .iter()
                    .map(|n| (poly.poly.value(n.z) - prev[n.parent].z).norm())
                    .fold(0.0, f64::max);
                residuals.push(worst);
                for (i, n) in nodes.iter().enumerate() {
                    let [re, im] = complex_cells(n.z);
                    let [dre, dim] = complex_cells(n.cumulative_derivative);
                    table.push(vec![
                        level.to_string(),
                        i.to_string(),
                        n.parent.to_string(),
                        re,
                        im,
                        dre,
                        dim,
                    ]);
                }
            }
            Ok(Outcome {
                result: to_value(&tree),
                diagnostics: Diagnostics {
                    residuals: Some(residuals),
                    ..Default::default()
                },
                table,
            })
        }
        Command::PoincareSeries { poly, w, t, region } => {
            let series = dynamics::poincare_series(&poly.poly, *w, *t, cfg.depth, region.as_ref(), tree_opts(cfg))?;
            Ok(Outcome {
                result: to_value(&series),
                diagnostics: Diagnostics::from_series(&series),
                table: Table::series(&series),
            })
        }
        Command::Linearize(sub) => linearize(sub, cfg),
        Command::Order(args) => order(args),
        Command::Area(sub) => area_command(sub, cfg),
        Command::Qd(sub) => qd_command(sub, cfg),
        Command::SchwarzianOrder { kind, value } => {
            let kind = match kind {
                KindArg::EntireNonlinearity => SchwarzianKind::EntireNonlinearity,
                KindArg::MeromorphicSchwarzian => SchwarzianKind::MeromorphicSchwarzian,
                KindArg::LogSingularityCount => SchwarzianKind::LogSingularityCount,
            };
            let f = linearizer::schwarzian_order(kind, *value);
            let mut table = Table::new(&["numerator", "denominator", "value"]);
            table.push(vec![
                f.numerator.to_string(),
                f.denominator.to_string(),
                num(f.to_f64()),
            ]);
            Ok(plain(
                json!({ "numerator": f.numerator, "denominator": f.denominator, "value": f.to_f64() }),
                table,
            ))
        }
    }
}

fn linearize(sub: &LinearizeCommand, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match sub {
        LinearizeCommand::Coeffs(args) => {
            let f = lin_from(args)?;
            let residual = f.functional_equation_residual();
            let mut table = Table::new(&["n", "re", "im"]);
            for (n, a) in f.series.coeffs().iter().enumerate() {
                let [re, im] = complex_cells(*a);
                table.push(vec![n.to_string(), re, im]);
            }
            Ok(Outcome {
                result: json!({
                    "zeta": to_value(&f.zeta),
                    "lambda": to_value(&f.lambda),
                    "eta": f.eta,
                    "conv_radius_est": f.conv_radius_est,
                    "functional_equation_residual": residual,
                    "coefficients": to_value(&f.series.coeffs()),
                }),
                diagnostics: Diagnostics {
                    residuals: Some(vec![residual]),
                    ..Default::default()
                },
                table,
            })
        }
        LinearizeCommand::Eval { lin, z } => {
            let f = lin_from(lin)?;
            let (value, derivative) = linearizer::lin_eval(&f, *z)?;
            let mut table = Table::new(&["z_re", "z_im", "value_re", "value_im", "derivative_re", "derivative_im"]);
            let mut row = complex_cells(*z).to_vec();
            row.extend(complex_cells(value));
            row.extend(complex_cells(derivative));
            table.push(row);
            Ok(plain(
                json!({ "z": to_value(z), "value": to_value(&value), "derivative": to_value(&derivative) }),
                table,
            ))
        }
        LinearizeCommand::Order(args) => order(args),
        LinearizeCommand::Preimages { lin, w } => {
            let f = lin_from(lin)?;
            let pre = linearizer::preimages_in_annuli(&f, *w, cfg.depth, tree_opts(cfg))?;
            let mut table = Table::new(&[
                "level",
                "z_re",
                "z_im",
                "f_prime_re",
                "f_prime_im",
                "w_tilde_re",
                "w_tilde_im",
                "residual",
            ]);
            for pt in &pre.points {
                let mut row = vec![pt.level.to_string()];
                row.extend(complex_cells(pt.z));
                row.extend(complex_cells(pt.f_prime));
                row.extend(complex_cells(pt.w_tilde));
                row.push(num(pt.residual));
                table.push(row);
            }
            Ok(Outcome {
                result: to_value(&pre),
                diagnostics: Diagnostics {
                    residuals: Some(pre.points.iter().map(|p| p.residual).collect()),
                    ..Default::default()
                },
                table,
            })
        }
    }
}

fn order(args: &OrderArgs) -> Result<Outcome, CliError> {
    let f = lin_from(&args.lin)?;
    let exact = linearizer::order_exact(&f);
    let estimate = if args.empirical {
        linearizer::order_empirical(&f, &args.radii.0, args.samples_per_circle)?
    } else {
        exact.clone()
    };
    let mut table = Table::new(&["method", "value", "fit_residual"]);
    for e in [&estimate, &exact] {
        let method = to_value(&e.method).as_str().unwrap_or_default().to_string();
        let fit = e.fit_residual.map(num).unwrap_or_default();
        table.push(vec![method, num(e.value), fit]);
    }
    if !args.empirical {
        table.rows.truncate(1);
    }
    Ok(Outcome {
        result: json!({
            "value": estimate.value,
            "estimate": to_value(&estimate),
            "exact": exact.value,
        }),
        diagnostics: Diagnostics {
            residuals: estimate.fit_residual.map(|r| vec![r]),
            ..Default::default()
        },
        table,
    })
}

fn area_command(sub: &AreaCommand, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mc = |partitions: usize| McOptions { partitions };
    match sub {
        AreaCommand::Sum { map, w, t, k_max } => {
            let owned = OwnedMap::from_args(map)?;
            let depth = match owned {
                OwnedMap::Explicit(_) => {
                    usize::try_from(*k_max).map_err(|_| CliError::Usage("k_max too large".into()))?
                }
                OwnedMap::Linearizer(_) => cfg.depth,
            };
            let sum = area::area_sum(owned.as_area(), *w, *t, depth, tree_opts(cfg))?;
            Ok(Outcome {
                result: json!({ "map": owned.describe(), "sum": to_value(&sum), "value": sum.series.value() }),
                diagnostics: Diagnostics::from_series(&sum.series),
                table: Table::series(&sum.series),
            })
        }
        AreaCommand::Mc {
            map,
            region,
            r_max,
            partitions,
        } => {
            let owned = OwnedMap::from_args(map)?;
            let est =
                area::cylindrical_area_mc(owned.as_area(), region, *r_max, cfg.samples, cfg.seed, mc(*partitions))?;
            let mut table = Table::new(&["value", "std_error", "samples", "seed", "hits"]);
            table.push(vec![
                num(est.value),
                num(est.std_error),
                est.samples.to_string(),
                est.seed.to_string(),
                est.hits.to_string(),
            ]);
            Ok(plain(
                json!({ "map": owned.describe(), "estimate": to_value(&est) }),
                table,
            ))
        }
        AreaCommand::ElGrowth {
            map,
            region,
            n_max,
            partitions,
        } => {
            let owned = OwnedMap::from_args(map)?;
            let growth = area::el_growth(owned.as_area(), region, *n_max, cfg.samples, cfg.seed, mc(*partitions))?;
            let tail = &growth[2.min(growth.len())..];
            let x: Vec<f64> = tail.iter().map(|g| g.n as f64).collect();
            let y: Vec<f64> = tail.iter().map(|g| g.area).collect();
            let (slope, intercept, r2, _) = linear_fit(&x, &y);
            let mut table = Table::new(&["n", "area", "std_error"]);
            for g in &growth {
                table.push(vec![g.n.to_string(), num(g.area), num(g.std_error)]);
            }
            Ok(plain(
                json!({
                    "map": owned.describe(),
                    "growth": to_value(&growth),
                    "fit_from_n2": { "slope": slope, "intercept": intercept, "r_squared": r2 },
                }),
                table,
            ))
        }
        AreaCommand::Distance { w, region, k_max } => {
            let series = area::distance_form_sum(ExplicitMap::Exp, *w, region, *k_max)?;
            Ok(Outcome {
                result: json!({ "series": to_value(&series), "value": series.value() }),
                diagnostics: Diagnostics::from_series(&series),
                table: Table::series(&series),
            })
        }
        AreaCommand::Siegel { theta, w_in, w_out } => {
            let theta = theta.unwrap_or((5f64.sqrt() - 1.0) / 2.0);
            let cmp = area::siegel_compare(theta, *w_in, *w_out, cfg.depth, tree_opts(cfg))?;
            let mut table = Table::new(&["n", "level_in", "level_out"]);
            for (i, (a, b)) in cmp
                .trace_in
                .level_sums
                .iter()
                .zip(&cmp.trace_out.level_sums)
                .enumerate()
            {
                table.push(vec![(i + 1).to_string(), num(*a), num(*b)]);
            }
            Ok(Outcome {
                result: json!({ "theta": theta, "comparison": to_value(&cmp) }),
                diagnostics: Diagnostics::from_series(&cmp.trace_out),
                table,
            })
        }
    }
}

fn qd_spec(q: &QdArgs) -> Result<QDSpec, CliError> {
    Ok(QDSpec::new(q.q_num.clone(), q.q_den.clone())?)
}

fn sample_table(samples: &[PushforwardSample]) -> Table {
    let mut table = Table::new(&["w_re", "w_im", "sigma_re", "sigma_im", "terms_used", "tail_estimate"]);
    for s in samples {
        let mut row = complex_cells(s.w).to_vec();
        row.extend(complex_cells(s.sigma));
        row.push(s.terms_used.to_string());
        row.push(num(s.tail_estimate));
        table.push(row);
    }
    table
}

fn qd_command(sub: &QdCommand, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match sub {
        QdCommand::Pushforward {
            map,
            poly,
            fixed_point,
            order,
            q,
            w,
            terms,
            skip_below,
        } => {
            let spec = qd_spec(q)?;
            let opts = PushforwardOptions {
                skip_below: *skip_below,
                tree: tree_opts(cfg),
            };
            let sample = match map {
                PushforwardKind::Exp => {
                    let depth = usize::try_from(*terms).map_err(|_| CliError::Usage("terms too large".into()))?;
                    quad_diff::pushforward_eval(PushforwardMap::Exp, &spec, *w, depth, opts)?
                }
                PushforwardKind::Linearizer => {
                    let (Some(p), Some(z)) = (poly, fixed_point) else {
                        return Err(CliError::Usage(
                            "--map linearizer needs --poly and --fixed-point".into(),
                        ));
                    };
                    let f = linearizer_at(p, *z, *order)?;
                    quad_diff::pushforward_eval(PushforwardMap::Linearizer(&f), &spec, *w, cfg.depth, opts)?
                }
            };
            Ok(plain(to_value(&sample), sample_table(std::slice::from_ref(&sample))))
        }
        QdCommand::ExpIdentity { w, terms } => {
            let n = usize::try_from(*terms).map_err(|_| CliError::Usage("terms too large".into()))?;
            let id = quad_diff::exp_identity(*w, n)?;
            let mut table = Table::new(&["lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff"]);
            let mut row = complex_cells(id.lhs).to_vec();
            row.extend(complex_cells(id.rhs));
            row.push(num(id.abs_diff));
            table.push(row);
            Ok(Outcome {
                result: to_value(&id),
                diagnostics: Diagnostics {
                    residuals: Some(vec![id.abs_diff]),
                    ..Default::default()
                },
                table,
            })
        }
        QdCommand::PoleFit {
            q,
            moduli,
            angle,
            terms_per_modulus,
            closed_form,
        } => {
            let samples = if *closed_form {
                moduli
                    .0
                    .iter()
                    .map(|&r| {
                        let w = Complex64::from_polar(r, *angle);
                        PushforwardSample {
                            w,
                            sigma: quad_diff::exp_identity_rhs(w),
                            terms_used: 1,
                            tail_estimate: 0.0,
                        }
                    })
                    .collect()
            } else {
                quad_diff::exp_pushforward_samples(&qd_spec(q)?, &moduli.0, *angle, *terms_per_modulus)?
            };
            let fit = quad_diff::pole_fit(&samples)?;
            Ok(plain(
                json!({ "fit": to_value(&fit), "samples": to_value(&samples) }),
                sample_table(&samples),
            ))
        }
    }
}

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};
use spectra_core::closedform::{
    band_edge_two_value, semicircle_density, two_value_density, ThresholdConstants,
};
use spectra_core::config::{hash_bytes, hash_json, load_model_file, ModelFile, RunMeta};
use spectra_core::empirical::{
    count_above, detect_communities, eigen_spectrum, spectral_histogram, EigenMode, Histogram,
};
use spectra_core::io::{read_graph, write_graph, write_json};
use spectra_core::outliers::{
    detectability_threshold, g_max_detail, outer_edge_guess, outlier_eigenvalues, OutlierReport,
};
use spectra_core::resolvent::{
    default_search_radius, density_at_robust, density_curve, find_band_edges, Band, BandSearch,
    Grid, SolverOptions,
};
use spectra_core::{sample_graph, Exec, ModelSpec};

use crate::output::{write_report, write_table, Table};
use crate::{
    Cli, Command, CompareArgs, EmpiricalCmd, Format, Global, ModelCmd, OracleCmd, OracleKind,
    TheoryCmd,
};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn compute(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

/// Library errors split into invalid input (2) and computational failure (1).
fn core(error: spectra_core::Error) -> Failure {
    let code = if error.is_input_error() { 2 } else { 1 };
    Failure { code, error: error.into() }
}

/// Output plumbing failures count as computational failures.
fn io(error: anyhow::Error) -> Failure {
    compute(error)
}

struct Loaded {
    file: ModelFile,
    model: ModelSpec,
}

fn load(path: &Path, n: Option<usize>) -> Outcome<Loaded> {
    let file = load_model_file(path).map_err(|e| match e {
        spectra_core::Error::Io(err) => usage(anyhow!(err).context(format!("reading {}", path.display()))),
        other => core(other),
    })?;
    let model = file.build_with_n(n.unwrap_or(file.n)).map_err(core)?;
    Ok(Loaded { file, model })
}

fn meta(global: &Global, command: &str, config: Value) -> RunMeta {
    RunMeta::new(hash_json(&config), global.seed, command)
}

/// Hash input: the model file plus the arguments that shape the output.
fn model_config(loaded: &Loaded, args: Value) -> Value {
    json!({ "model": loaded.file, "args": args })
}

pub fn run(cli: &Cli) -> Outcome<u8> {
    let g = &cli.global;
    let out = g.out.as_deref();
    match &cli.command {
        Command::Model(ModelCmd::Describe { model }) => {
            let l = load(model, None)?;
            let rs = l.model.rank_structure();
            let report = json!({
                "n": l.model.n,
                "q": l.model.q,
                "c": l.model.c,
                "two_m": l.model.two_m,
                "alphas": rs.alphas,
                "atoms": l.model.num_atoms(),
                "communities": l.model.num_communities(),
            });
            let m = RunMeta::new(l.file.config_hash(), g.seed, "model describe");
            write_report(&report, out, &m).map_err(io)?;
        }
        Command::Sample { model, n } => {
            let l = load(model, *n)?;
            let m = meta(g, "sample", model_config(&l, json!({ "n": l.model.n })));
            let graph = sample_graph(&l.model, g.seed);
            match out {
                Some(path) => write_graph(&graph, path, Some(m)).map_err(core)?,
                None => {
                    spectra_core::io::write_edges(&graph, std::io::stdout()).map_err(core)?;
                    eprintln!("meta: {}", serde_json::to_string(&m).map_err(compute)?);
                }
            }
        }
        Command::Theory(cmd) => return theory(g, cmd),
        Command::Oracle(cmd) => return oracle(g, cmd),
        Command::Empirical(cmd) => return empirical(g, cmd),
        Command::Compare { args, histogram } => {
            let l = load(&args.model, args.n)?;
            let m = meta(g, "compare", model_config(&l, json!({ "n": l.model.n, "bins": args.bins })));
            let cmp = compare(&l.model, g.seed, args.bins)?;
            if let Some(path) = histogram {
                write_table(&cmp.histogram_table(), Format::Csv, Some(path), &m).map_err(io)?;
            }
            write_report(&cmp.summary, out, &m).map_err(io)?;
        }
        Command::ReproduceFigure { args, out_dir } => return reproduce(g, args, out_dir),
    }
    Ok(0)
}

fn band_of(model: &ModelSpec) -> Outcome<Band> {
    find_band_edges(model, &BandSearch::for_model(model)).map_err(core)
}

fn theory(g: &Global, cmd: &TheoryCmd) -> Outcome<u8> {
    let out = g.out.as_deref();
    match cmd {
        TheoryCmd::Density { model, lo, hi, points, epsilon } => {
            let l = load(model, None)?;
            let r = default_search_radius(&l.model);
            let grid = Grid::new(lo.unwrap_or(-r), hi.unwrap_or(r), *points).map_err(core)?;
            let eps = epsilon.unwrap_or(1e-4 * (grid.hi - grid.lo));
            let m = meta(
                g,
                "theory density",
                model_config(&l, json!({ "lo": grid.lo, "hi": grid.hi, "points": grid.points, "epsilon": eps })),
            );
            let curve = density_curve(&l.model, &grid, eps, Exec::default()).map_err(core)?;
            let mut table = Table::new(&["x", "rho"]);
            table.rows = curve.xs.iter().zip(&curve.rho).map(|(x, r)| vec![*x, *r]).collect();
            write_table(&table, g.format, out, &m).map_err(io)?;
        }
        TheoryCmd::Band { model } => {
            let l = load(model, None)?;
            let band = band_of(&l.model)?;
            let m = meta(g, "theory band", model_config(&l, json!({})));
            write_report(&json!({ "intervals": band.intervals }), out, &m).map_err(io)?;
        }
        TheoryCmd::Outliers { model } => {
            let l = load(model, None)?;
            let report = outlier_eigenvalues(&l.model, &band_of(&l.model)?).map_err(core)?;
            let m = meta(g, "theory outliers", model_config(&l, json!({})));
            write_report(&report, out, &m).map_err(io)?;
        }
        TheoryCmd::Threshold { model, sweep } => {
            let l = load(model, None)?;
            let tc = l
                .file
                .two_community
                .as_ref()
                .ok_or_else(|| usage(anyhow!("threshold needs a two_community model file")))?;
            let kappas: Vec<(f64, f64)> = tc.kappas.iter().map(|a| (a.kappa, a.weight)).collect();
            let threshold = detectability_threshold(&kappas).map_err(core)?;
            match sweep {
                None => {
                    let m = meta(g, "theory threshold", model_config(&l, json!({})));
                    write_report(&threshold, out, &m).map_err(io)?;
                }
                Some(spec) => {
                    let thetas = parse_sweep(spec).map_err(usage)?;
                    let m = meta(g, "theory threshold", model_config(&l, json!({ "sweep": spec })));
                    let mut table = Table::new(&["theta", "alpha2", "visible"]);
                    for theta in thetas {
                        let model = l.file.with_theta(theta).and_then(|f| f.build()).map_err(core)?;
                        let alpha2 = model.rank_structure().alphas.get(1).copied().unwrap_or(0.0);
                        let (visible, _) = spectra_core::outliers::classify(alpha2, threshold.g_max);
                        table.rows.push(vec![theta, alpha2, if visible { 1.0 } else { 0.0 }]);
                    }
                    write_table(&table, g.format, out, &m).map_err(io)?;
                }
            }
        }
    }
    Ok(0)
}

/// `lo:hi:steps` with `steps >= 2` evenly spaced values.
fn parse_sweep(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err(anyhow!("sweep must be lo:hi:steps, got {spec}"));
    };
    let lo: f64 = lo.parse().context("sweep lo")?;
    let hi: f64 = hi.parse().context("sweep hi")?;
    let steps: usize = steps.parse().context("sweep steps")?;
    if steps < 2 || !(lo < hi) {
        return Err(anyhow!("sweep needs lo < hi and at least 2 steps, got {spec}"));
    }
    Ok(Grid { lo, hi, points: steps }.xs())
}

fn oracle(g: &Global, cmd: &OracleCmd) -> Outcome<u8> {
    let out = g.out.as_deref();
    match cmd {
        OracleCmd::Constants => {
            let t = ThresholdConstants::compute();
            let m = meta(g, "oracle constants", json!({}));
            let report = json!({ "x": t.x, "y": t.y, "coefficient": t.coefficient() });
            write_report(&report, out, &m).map_err(io)?;
        }
        OracleCmd::Density { kind, c, kappa, lo, hi, points } => {
            let (edge, args) = match kind {
                OracleKind::Semicircle => {
                    if !(*c > 0.0) {
                        return Err(usage(anyhow!("c must be positive")));
                    }
                    (2.0 * c.sqrt(), json!({ "kind": "semicircle", "c": c }))
                }
                OracleKind::TwoValue => {
                    if !(*kappa > 0.0) {
                        return Err(usage(anyhow!("kappa must be positive")));
                    }
                    (band_edge_two_value(*kappa), json!({ "kind": "two-value", "kappa": kappa }))
                }
            };
            let grid = Grid::new(lo.unwrap_or(-1.1 * edge), hi.unwrap_or(1.1 * edge), *points).map_err(core)?;
            let m = meta(g, "oracle density", json!({ "oracle": args, "lo": grid.lo, "hi": grid.hi, "points": grid.points }));
            let mut table = Table::new(&["x", "rho"]);
            let xs = grid.xs();
            let rho: Vec<f64> = match kind {
                OracleKind::Semicircle => xs.iter().map(|&x| semicircle_density(x, *c)).collect(),
                OracleKind::TwoValue => {
                    Exec::default().map(xs.len(), |i| two_value_density(xs[i], *kappa, 2.0 * kappa))
                }
            };
            table.rows = xs.iter().zip(&rho).map(|(x, r)| vec![*x, *r]).collect();
            write_table(&table, g.format, out, &m).map_err(io)?;
        }
    }
    Ok(0)
}

fn graph_config(path: &Path, args: Value) -> Outcome<Value> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    Ok(json!({ "graph_sha256": hash_bytes(&bytes), "args": args }))
}

fn empirical(g: &Global, cmd: &EmpiricalCmd) -> Outcome<u8> {
    let out = g.out.as_deref();
    match cmd {
        EmpiricalCmd::Eig { graph, mode } => {
            let mode: EigenMode = mode.parse().map_err(core)?;
            let config = graph_config(graph, json!({ "mode": format!("{mode:?}") }))?;
            let graph = read_graph(graph).map_err(core)?;
            let m = RunMeta::new(hash_json(&config), graph.seed, "empirical eig");
            let s = eigen_spectrum(&graph, mode).map_err(core)?;
            let mut table = Table::new(&["index", "eigenvalue"]);
            table.rows = s.eigenvalues.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();
            write_table(&table, g.format, out, &m).map_err(io)?;
        }
        EmpiricalCmd::Detect { graph, q } => {
            let config = graph_config(graph, json!({ "q": q }))?;
            let graph = read_graph(graph).map_err(core)?;
            let m = RunMeta::new(hash_json(&config), graph.seed, "empirical detect");
            let r = detect_communities(&graph, *q).map_err(core)?;
            write_report(&json!({ "accuracy": r.accuracy, "q": q }), out, &m).map_err(io)?;
        }
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct OutlierError {
    r: usize,
    theory: f64,
    empirical: f64,
    relative_error: f64,
}

#[derive(Debug, Serialize)]
struct Counts {
    above_edge: usize,
    visible_theory: usize,
}

#[derive(Debug, Serialize)]
struct Checks {
    l1: bool,
    outliers: bool,
    count: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    n: usize,
    seed: u64,
    bins: usize,
    l1_distance: f64,
    outlier_errors: Vec<OutlierError>,
    counts: Counts,
    band_edge: f64,
    checks: Checks,
    pass: bool,
}

const L1_TOL: f64 = 0.05;
const OUTLIER_TOL: f64 = 0.03;
const EDGE_MARGIN: f64 = 1.02;

struct Comparison {
    summary: Summary,
    histogram: Histogram,
    theory_bins: Vec<f64>,
    eigenvalues: Vec<f64>,
    report: OutlierReport,
    band: Band,
}

impl Comparison {
    fn histogram_table(&self) -> Table {
        let mut t = Table::new(&["lo", "hi", "empirical", "theory"]);
        t.rows = (0..self.histogram.bins())
            .map(|b| {
                vec![
                    self.histogram.edges[b],
                    self.histogram.edges[b + 1],
                    self.histogram.density[b],
                    self.theory_bins[b],
                ]
            })
            .collect();
        t
    }
}

fn compare(model: &ModelSpec, seed: u64, bins: usize) -> Outcome<Comparison> {
    let graph = sample_graph(model, seed);
    let spectrum = eigen_spectrum(&graph, EigenMode::Full).map_err(core)?;
    let band = band_of(model)?;
    let gm = g_max_detail(model, band.upper()).or_else(|_| {
        outer_edge_guess(model).and_then(|guess| g_max_detail(model, guess))
    });
    let gm = gm.map_err(core)?;
    let report = spectra_core::outliers::outliers_with_g_max(model, gm).map_err(core)?;
    let visible = report.visible_positions();
    let histogram = spectral_histogram(&spectrum, bins, visible.len()).map_err(core)?;

    let eps = 1e-8 * model.c.sqrt();
    let opts = SolverOptions::default();
    let density = |x: f64| density_at_robust(x, model, eps, None, &opts).map(|(r, _)| r).unwrap_or(0.0);
    let theory_bins: Vec<f64> =
        Exec::default().map(histogram.bins(), |b| histogram.bin_average(b, density));
    let l1_distance: f64 = (0..histogram.bins())
        .map(|b| (histogram.density[b] - theory_bins[b]).abs() * histogram.width(b))
        .sum();

    let outlier_errors: Vec<OutlierError> = visible
        .iter()
        .zip(&spectrum.eigenvalues)
        .enumerate()
        .map(|(i, (t, e))| OutlierError {
            r: i + 1,
            theory: *t,
            empirical: *e,
            relative_error: (e - t).abs() / t.abs(),
        })
        .collect();
    let counts = Counts {
        above_edge: count_above(&spectrum.eigenvalues, band.upper() * EDGE_MARGIN),
        visible_theory: visible.len(),
    };
    let checks = Checks {
        l1: l1_distance <= L1_TOL,
        outliers: outlier_errors.iter().all(|o| o.relative_error <= OUTLIER_TOL),
        count: counts.above_edge == counts.visible_theory,
    };
    let pass = checks.l1 && checks.outliers && checks.count;
    let summary = Summary {
        n: model.n,
        seed,
        bins,
        l1_distance,
        outlier_errors,
        counts,
        band_edge: band.upper(),
        checks,
        pass,
    };
    Ok(Comparison { summary, histogram, theory_bins, eigenvalues: spectrum.eigenvalues, report, band })
}

fn reproduce(g: &Global, args: &CompareArgs, out_dir: &PathBuf) -> Outcome<u8> {
    let l = load(&args.model, args.n)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(usage)?;
    let m = meta(g, "reproduce-figure", model_config(&l, json!({ "n": l.model.n, "bins": args.bins })));
    let cmp = compare(&l.model, g.seed, args.bins)?;

    let pad = 0.15 * cmp.band.width();
    let grid = Grid::new(cmp.band.lower() - pad, cmp.band.upper() + pad, 2001).map_err(core)?;
    let eps = 1e-4 * (grid.hi - grid.lo);
    let curve = density_curve(&l.model, &grid, eps, Exec::default()).map_err(core)?;
    let mut density = Table::new(&["x", "rho"]);
    density.rows = curve.xs.iter().zip(&curve.rho).map(|(x, r)| vec![*x, *r]).collect();
    let mut eigs = Table::new(&["index", "eigenvalue"]);
    eigs.rows = cmp.eigenvalues.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();

    let path = |name: &str| out_dir.join(name);
    write_table(&density, Format::Csv, Some(&path("theory_density.csv")), &m).map_err(io)?;
    write_report(&cmp.report, Some(&path("outliers.json")), &m).map_err(io)?;
    write_table(&eigs, Format::Csv, Some(&path("eigenvalues.csv")), &m).map_err(io)?;
    write_table(&cmp.histogram_table(), Format::Csv, Some(&path("histogram.csv")), &m).map_err(io)?;
    write_report(&cmp.summary, Some(&path("comparison.json")), &m).map_err(io)?;
    write_json(&m, &path("run.json")).map_err(core)?;

    let s = &cmp.summary;
    if s.pass {
        println!("all checks passed ({})", out_dir.display());
        return Ok(0);
    }
    if !s.checks.l1 {
        eprintln!("FAIL l1: histogram distance {} > {L1_TOL}", s.l1_distance);
    }
    for o in s.outlier_errors.iter().filter(|o| o.relative_error > OUTLIER_TOL) {
        eprintln!(
            "FAIL outlier {}: empirical {} vs theory {} (relative error {})",
            o.r, o.empirical, o.theory, o.relative_error
        );
    }
    if !s.checks.count {
        eprintln!(
            "FAIL count: {} eigenvalues above band edge + 2%, theory has {} outliers",
            s.counts.above_edge, s.counts.visible_theory
        );
    }
    Ok(1)
}

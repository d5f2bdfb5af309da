use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::json;

use super::{AnalyzeArgs, BoundArgs, Cli, ClusterArgs, CmatArgs, Command, FitArgs, MatrixFormat, McArgs, VerifyArgs};
use crate::analysis::{
    activity_scores, canonical_transform, decompose, poincare_bound, ratio_rows, symmetrize, write_ratio_csv,
    AnalysisReport, CoActiveDecomposition,
};
use crate::closedform::{cmat, cmat_modified, expected_gradient, read_matrix_csv, CoActiveMatrix, InputPrior};
use crate::cluster::{
    mds_embed, model_centers, pairwise_concordance, write_centers_csv, write_points_csv, Embedding, GridMode,
};
use crate::error::{Error, Result};
use crate::io::{
    create_output, read_models, read_prior, read_training_csv, write_csv_with_meta, write_json_with_meta, Meta,
    ModelFile,
};
use crate::model::{cross_validate, fit, fit_ensemble, Domain, FitConfig, MarsSurrogate};
use crate::montecarlo::{mc_cmat, Fixture, GradientMode, SampledFunction};
use crate::verify;

/// Execute a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let force = cli.force;
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, &Meta::new(&cli.command, Some(a.seed))?, force),
        Command::Cmat(a) => cmd_cmat(a, &Meta::new(&cli.command, Some(a.seed))?, force),
        Command::Mc(a) => cmd_mc(a, &Meta::new(&cli.command, Some(a.seed))?, force),
        Command::Analyze(a) => cmd_analyze(a, &Meta::new(&cli.command, None)?, force),
        Command::Cluster(a) => cmd_cluster(a, &Meta::new(&cli.command, Some(a.seed))?, force),
        Command::Bound(a) => cmd_bound(a, &Meta::new(&cli.command, None)?, force),
        Command::Verify(a) => cmd_verify(a, &Meta::new(&cli.command, Some(a.seed))?, force),
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

/// First member of a model file, with a warning when there are more.
fn single_model(path: &Path) -> Result<MarsSurrogate> {
    let e = read_models(path)?;
    if e.len() > 1 {
        log::warn!("{} holds {} members; using the first", path.display(), e.len());
    }
    let m = e.members()[0].clone();
    Ok(if m.label().is_empty() { m.with_label(e.label()) } else { m })
}

fn data_domain(x: &DMatrix<f64>) -> Result<Domain> {
    let bounds = (0..x.ncols())
        .map(|c| {
            let col = x.column(c);
            let (lo, hi) = (col.min(), col.max());
            if lo < hi { [lo, hi] } else { [lo - 0.5, hi + 0.5] }
        })
        .collect();
    Domain::new(bounds)
}

/// Input box from the prior's finite support, falling back to the data range.
fn fit_domain(x: &DMatrix<f64>, prior: Option<&InputPrior>) -> Result<Domain> {
    let data = data_domain(x)?;
    let Some(prior) = prior else { return Ok(data) };
    if prior.dim() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: x.ncols() });
    }
    let bounds = prior
        .marginals()
        .iter()
        .enumerate()
        .map(|(c, m)| {
            let (lo, hi) = m.support();
            [if lo.is_finite() { lo } else { data.lo(c) }, if hi.is_finite() { hi } else { data.hi(c) }]
        })
        .collect();
    Domain::new(bounds)
}

fn cmd_fit(a: &FitArgs, meta: &Meta, force: bool) -> Result<i32> {
    let prior = a.prior.as_deref().map(read_prior).transpose()?;
    let (x, y, domain) = match (&a.data, &a.fixture) {
        (Some(path), _) => {
            let data = read_training_csv(&fs::read_to_string(path)?, a.response.as_deref())?;
            let domain = fit_domain(&data.x, prior.as_ref())?;
            (data.x, data.y, domain)
        }
        (None, Some(spec)) => {
            let f: Fixture = spec.parse()?;
            let (x, y) = f.design(a.n, a.seed)?;
            (x, y, f.domain())
        }
        (None, None) => return Err(Error::InvalidArgument("give --data or --fixture".into())),
    };
    let cfg = FitConfig { max_terms: a.max_terms, max_degree: a.max_degree, ..FitConfig::default() };
    let label = a
        .label
        .clone()
        .unwrap_or_else(|| a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let full = fit(&x, &y, &domain, &cfg)?;
    for w in &full.report.warnings {
        log::warn!("{w}");
    }
    let ensemble = if a.members > 1 {
        fit_ensemble(&x, &y, &domain, &cfg, a.members, a.seed, &label)?
    } else {
        crate::model::Ensemble::new(label.clone(), vec![full.model.clone().with_label(format!("{label}#0"))])?
    };
    let cv = a.cv.map(|k| cross_validate(&x, &y, &domain, &cfg, k, a.seed)).transpose()?;
    let file = ModelFile::from_ensemble(&ensemble, Some(meta.clone()));
    let mut w = create_output(&a.out, force)?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    writeln!(w)?;
    w.flush()?;
    print_json(&json!({ "model": a.out, "members": ensemble.len(), "fit": full.report, "cv": cv }))?;
    Ok(0)
}

fn self_matrices(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior, modified: bool)
    -> Result<(CoActiveMatrix, CoActiveMatrix, CoActiveMatrix)> {
    let f = if modified { cmat_modified } else { cmat };
    Ok((f(mk, ml, prior)?, f(mk, mk, prior)?, f(ml, ml, prior)?))
}

fn write_matrix(path: &Path, m: &CoActiveMatrix, format: MatrixFormat, meta: &Meta, force: bool) -> Result<()> {
    match format {
        MatrixFormat::Json => write_json_with_meta(path, m, meta, force),
        MatrixFormat::Csv => write_csv_with_meta(path, meta, force, |w| m.write_csv(w)),
    }
}

fn cmd_cmat(a: &CmatArgs, meta: &Meta, force: bool) -> Result<i32> {
    let mk = single_model(&a.model_k)?;
    let ml = single_model(&a.model_l)?;
    let prior = read_prior(&a.prior)?;
    let (ckl, ck, cl) = self_matrices(&mk, &ml, &prior, a.modified)?;
    let ext = match a.format {
        MatrixFormat::Json => "json",
        MatrixFormat::Csv => "csv",
    };
    write_matrix(&a.out_dir.join(format!("cmat.{ext}")), &ckl, a.format, meta, force)?;
    let dec = CoActiveDecomposition::from_matrix(&ckl, ck.trace(), cl.trace())?;
    let report = AnalysisReport::new(&dec, ckl.labels(), Some(1), None)?;
    write_json_with_meta(&a.out_dir.join("analysis.json"), &report, meta, force)?;
    let mut summary = json!({
        "labels": ckl.labels(),
        "kind": ckl.kind(),
        "trace": ckl.trace(),
        "concordance": dec.concordance,
        "discordance": dec.discordance(),
        "out_dir": a.out_dir,
    });
    if let Some(b) = a.mc {
        let est = mc_cmat(
            &SampledFunction::surrogate(mk.clone()),
            &SampledFunction::surrogate(ml.clone()),
            &prior,
            b,
            a.seed,
            ckl.labels(),
        )?;
        let mut mc = est.matrix.entries().clone();
        if a.modified {
            // compare like with like: add the same rank-one term
            let zk = expected_gradient(&mk, &prior)?;
            let zl = expected_gradient(&ml, &prior)?;
            mc += &zk * zl.transpose();
        }
        let frob = (ckl.entries() - &mc).norm();
        write_json_with_meta(&a.out_dir.join("mc.json"), &est.report(), meta, force)?;
        summary["mc_frobenius_distance"] = json!(frob);
    }
    print_json(&summary)?;
    Ok(0)
}

fn sampled(spec: &str, h: f64) -> Result<SampledFunction> {
    if spec.starts_with("builtin:") {
        let f: Fixture = spec.parse()?;
        Ok(SampledFunction::Fixture(f, GradientMode::CentralDifference { h }))
    } else {
        Ok(SampledFunction::surrogate(single_model(Path::new(spec))?))
    }
}

fn cmd_mc(a: &McArgs, meta: &Meta, force: bool) -> Result<i32> {
    let fk = sampled(&a.f_k, a.h)?;
    let fl = sampled(&a.f_l, a.h)?;
    let prior = match &a.prior {
        Some(p) => read_prior(p)?,
        None => InputPrior::uniform_box(&fk.domain()),
    };
    let est = mc_cmat(&fk, &fl, &prior, a.samples, a.seed, (&a.f_k, &a.f_l))?;
    if est.one_sided > 0 {
        log::warn!("{} gradient coordinates used one-sided differences at the boundary", est.one_sided);
    }
    write_json_with_meta(&a.out, &est.report(), meta, force)?;
    print_json(&json!({ "out": a.out, "trace": est.matrix.trace(), "B": est.samples }))?;
    Ok(0)
}

fn read_matrix_json(path: &Path) -> Result<CoActiveMatrix> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn cmd_analyze(a: &AnalyzeArgs, meta: &Meta, force: bool) -> Result<i32> {
    let (ckl, ck, cl) = match &a.matrix {
        Some(m) => {
            let sk = a.self_k.as_deref().ok_or_else(|| Error::InvalidArgument("--self-k missing".into()))?;
            let sl = a.self_l.as_deref().ok_or_else(|| Error::InvalidArgument("--self-l missing".into()))?;
            (read_matrix_json(m)?, read_matrix_json(sk)?, read_matrix_json(sl)?)
        }
        None => {
            let prior = read_prior(a.prior.as_deref().ok_or_else(|| Error::InvalidArgument("--prior missing".into()))?)?;
            let mk = single_model(&a.models[0])?;
            let ml = single_model(&a.models[1])?;
            self_matrices(&mk, &ml, &prior, false)?
        }
    };
    let q = match a.q.as_str() {
        "auto" => None,
        s => Some(s.parse().map_err(|_| Error::InvalidArgument(format!("--q must be a number or auto, got {s}")))?),
    };
    let dec = CoActiveDecomposition::from_matrix(&ckl, ck.trace(), cl.trace())?;
    let report = AnalysisReport::new(&dec, ckl.labels(), q, a.tau)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    write_json_with_meta(&a.out, &report, meta, force)?;
    if let Some(path) = &a.ratio {
        let dk = decompose(&symmetrize(ck.entries(), None)?, ck.trace(), ck.trace())?;
        let dl = decompose(&symmetrize(cl.entries(), None)?, cl.trace(), cl.trace())?;
        let rows = ratio_rows(
            &activity_scores(&dk, report.q)?.unsigned,
            &activity_scores(&dl, report.q)?.unsigned,
            &report.unsigned_scores,
        )?;
        write_csv_with_meta(path, meta, force, |w| write_ratio_csv(w, &rows))?;
    }
    print_json(&json!({ "out": a.out, "concordance": report.concordance, "q": report.q }))?;
    Ok(0)
}

/// Exact placement for one or two points, where MDS is not needed.
fn trivial_embedding(d: &DMatrix<f64>, seed: u64) -> Embedding {
    let n = d.nrows();
    let mut points = DMatrix::zeros(n, 2);
    if n == 2 {
        points[(1, 0)] = d[(0, 1)];
    }
    Embedding { points, stress: 0.0, stress_history: vec![0.0], seed }
}

fn cmd_cluster(a: &ClusterArgs, meta: &Meta, force: bool) -> Result<i32> {
    let t0 = Instant::now();
    let prior = read_prior(&a.prior)?;
    let ensembles = a.models.iter().map(|p| read_models(p)).collect::<Result<Vec<_>>>()?;
    let mode = if a.trace_only { GridMode::TraceOnly } else { GridMode::Full };
    let grid = pairwise_concordance(&ensembles, &prior, mode)?;
    let (d, membership) = grid.discordance_matrix();
    let emb = if d.nrows() < 3 {
        log::warn!("only {} usable member(s); placing them exactly", d.nrows());
        trivial_embedding(&d, a.seed)
    } else {
        mds_embed(&d, 2, a.seed)?
    };
    let centers = model_centers(&emb.points, &membership, grid.models()).map_err(|e| match e {
        Error::EmptyGroup(g) => Error::InvalidArgument(format!("model {} has no usable members", grid.model_labels[g])),
        e => e,
    })?;
    let dir = &a.out_dir;
    write_csv_with_meta(&dir.join("grid.csv"), meta, force, |w| grid.write_summary_csv(w))?;
    write_csv_with_meta(&dir.join("samples.csv"), meta, force, |w| grid.write_samples_csv(w))?;
    write_csv_with_meta(&dir.join("discordance.csv"), meta, force, |w| {
        crate::closedform::write_matrix_csv(w, &d)
    })?;
    write_csv_with_meta(&dir.join("points.csv"), meta, force, |w| {
        write_points_csv(w, &grid.model_labels, &membership, &emb.points)
    })?;
    write_csv_with_meta(&dir.join("centers.csv"), meta, force, |w| write_centers_csv(w, &grid.model_labels, &centers))?;
    write_json_with_meta(&dir.join("stress.json"), &emb.sidecar(), meta, force)?;
    let secs = t0.elapsed().as_secs_f64();
    log::info!("{} member pairs in {secs:.2} s", grid.pair_count);
    print_json(&json!({
        "out_dir": dir,
        "models": grid.models(),
        "members": grid.member_labels.len(),
        "excluded": grid.excluded.len(),
        "self_pairs": grid.self_pairs,
        "pairs": grid.pair_count,
        "stress": emb.stress,
        "seconds": secs,
    }))?;
    Ok(0)
}

fn cmd_bound(a: &BoundArgs, meta: &Meta, force: bool) -> Result<i32> {
    let m = single_model(&a.model)?;
    let prior = read_prior(&a.prior)?;
    let c = cmat(&m, &m, &prior)?.entries().clone();
    let sigma = prior.covariance();
    let (bound, rank, coords) = match (&a.basis, a.rank) {
        (Some(path), _) => {
            let b = read_matrix_csv(&fs::read_to_string(path)?)?;
            (poincare_bound(&c, &sigma, &b)?, b.ncols(), "native")
        }
        (None, Some(r)) => {
            let p = c.nrows();
            if r > p {
                return Err(Error::InvalidArgument(format!("rank {r} exceeds dimension {p}")));
            }
            let ct = canonical_transform(&c, &sigma)?;
            let eig = SymmetricEigen::new(ct.clone());
            let mut idx: Vec<usize> = (0..p).collect();
            idx.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let cols: Vec<_> = idx[..r].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
            let b = if r == 0 { DMatrix::zeros(p, 0) } else { DMatrix::from_columns(&cols) };
            (poincare_bound(&ct, &DMatrix::identity(p, p), &b)?, r, "whitened")
        }
        (None, None) => return Err(Error::InvalidArgument("give --basis or --rank".into())),
    };
    let out = json!({ "bound": bound, "rank": rank, "coordinates": coords });
    if let Some(path) = &a.out {
        write_json_with_meta(path, &out, meta, force)?;
    }
    print_json(&out)?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, meta: &Meta, force: bool) -> Result<i32> {
    let report = verify::run(&a.fixture, a.seed)?;
    if let Some(path) = &a.out {
        write_json_with_meta(path, &report, meta, force)?;
    }
    print_json(&serde_json::to_value(&report)?)?;
    Ok(if report.pass { 0 } else { 1 })
}

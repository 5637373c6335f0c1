use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use charmax::characteristics::characteristic_strip;
use charmax::domain::BoundaryKind;
use charmax::locus::{default_resolution, write_point_cloud};
use charmax::pipeline::{Pipeline, PipelineError, VERIFY_SAMPLES};
use charmax::{CharacteristicCurve, Interval};
use serde_json::{json, Value};

use crate::{CharArgs, Common, EnvelopeArgs, Failure, Format, QueryArgs};

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Check(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn load(c: &Common) -> Result<Pipeline, Failure> {
    Ok(Pipeline::load(&c.problem)?)
}

fn resolution(c: &Common, p: &Pipeline) -> usize {
    c.resolution.unwrap_or_else(|| default_resolution(p.n()))
}

fn output(c: &Common, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
    fs::create_dir_all(&c.out).map_err(|e| io_failure(&c.out, e))?;
    let path = c.out.join(name);
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_with(
    c: &Common,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let (path, mut w) = output(c, name)?;
    body(&mut w).and_then(|()| w.flush()).map_err(|e| io_failure(&path, e))
}

fn write_json(c: &Common, name: &str, value: &Value) -> Result<(), Failure> {
    write_with(c, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

pub fn verify(c: &Common) -> Result<u8, Failure> {
    let p = load(c)?;
    let report = p.verify(VERIFY_SAMPLES);
    let pass = report.pass();
    match c.format {
        Format::Json => {
            let integrals: Vec<Value> = p
                .integrals
                .rho
                .iter()
                .zip(&report.residuals)
                .map(|(r, res)| {
                    let mut v = res.to_json();
                    v["rho"] = json!(r.to_string());
                    v["domain_violations"] = json!(res.violations.len());
                    v
                })
                .collect();
            let nd = &report.nondegeneracy;
            let out = json!({
                "integrals": integrals,
                "nondegeneracy": {
                    "min_singular_value": nd.min_singular_value,
                    "pass": nd.nondegenerate,
                },
                "initial_set": { "pass": true },
                "F": p.solution.big_f.to_string(),
                "pass": pass,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
        Format::Csv => {
            for (k, (r, res)) in p.integrals.rho.iter().zip(&report.residuals).enumerate() {
                println!(
                    "rho[{k}] = {r}: max |X rho| = {:e}, mean = {:e}, {} ({} domain violations)",
                    res.max_residual,
                    res.mean_residual,
                    verdict(res.pass),
                    res.violations.len()
                );
            }
            let nd = &report.nondegeneracy;
            println!(
                "nondegeneracy: min singular value = {:e}, {}",
                nd.min_singular_value,
                verdict(nd.nondegenerate)
            );
            println!(
                "F = {}: vanishes on the initial set with F_u != 0, pass",
                p.solution.big_f
            );
            println!("result: {}", verdict(pass));
        }
    }
    Ok(if pass { 0 } else { 2 })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn domain(c: &Common) -> Result<u8, Failure> {
    let p = load(c)?;
    let a = p.analyze(resolution(c, &p))?;
    let dom = &a.domain;
    write_json(c, "domain.json", &dom.to_json())?;
    write_json(c, "summary.json", &dom.summary_json())?;
    write_with(c, "boundary.csv", |w| {
        writeln!(w, "{},kind", if p.n() == 0 { "t" } else { "t,x" })?;
        for b in &dom.boundary {
            let coords: Vec<String> = b.point.iter().map(|v| v.to_string()).collect();
            let kind = match b.kind {
                BoundaryKind::Edge => "edge",
                BoundaryKind::Sigma => "sigma",
                BoundaryKind::Box => "box",
            };
            writeln!(w, "{},{kind}", coords.join(","))?;
        }
        Ok(())
    })?;
    println!(
        "masked cells: {} of {} (area {}), boundary points: {}, sigma points: {}",
        dom.masked_count(),
        dom.mask().len(),
        dom.area(),
        dom.summary_json()["boundary_point_count"],
        dom.sigma_points
    );
    Ok(0)
}

pub fn query(q: &QueryArgs) -> Result<u8, Failure> {
    let p = load(&q.common)?;
    let point: Vec<f64> = match (p.n(), q.x) {
        (0, None) => vec![q.t],
        (1, Some(x)) => vec![q.t, x],
        (0, Some(_)) => return Err(Failure::Input("--x is not used when n = 0".into())),
        _ => return Err(Failure::Input("--x is required when n = 1".into())),
    };
    let ctx = p.continuation();
    let verdict = if q.staircase {
        let a = p.analyze(resolution(&q.common, &p))?;
        a.domain.contains(&ctx, &point)
    } else {
        ctx.contains(&point)
    }
    .map_err(|e| Failure::from(PipelineError::from(e)))?;
    println!("{verdict}");
    Ok(0)
}

pub fn characteristics(args: &CharArgs) -> Result<u8, Failure> {
    let c = &args.common;
    let p = load(c)?;
    let window = &p.loaded.problem.window;
    let seeds = p
        .loaded
        .initial
        .initial_set_samples::<f64>(args.seeds)
        .map_err(|e| Failure::Check(e.to_string()))?;
    let span = args.span.unwrap_or(10.0 * window.diagonal());
    let mut failures = 0;
    let forward = characteristic_strip(&p.field, window, &seeds, (0.0, span), args.tol);
    let backward = characteristic_strip(&p.field, window, &seeds, (0.0, -span), args.tol);
    let mut all = Vec::new();
    for (k, (fw, bw)) in forward.into_iter().zip(backward).enumerate() {
        match (fw, bw) {
            (Ok(fw), Ok(bw)) => {
                let mut samples: Vec<(f64, Vec<f64>)> = bw.samples.into_iter().rev().collect();
                samples.pop();
                samples.extend(fw.samples);
                let curve = CharacteristicCurve {
                    seed: fw.seed,
                    samples,
                    termination: fw.termination,
                    tol: fw.tol,
                };
                match c.format {
                    Format::Csv => write_with(c, &format!("characteristic_{k}.csv"), |w| curve.write_csv(w))?,
                    Format::Json => all.push(json!({
                        "seed": curve.seed,
                        "samples": curve.samples.iter().map(|(tau, s)| {
                            let mut row = vec![*tau];
                            row.extend(s);
                            row
                        }).collect::<Vec<_>>(),
                    })),
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                eprintln!("seed {k}: {e}");
                failures += 1;
            }
        }
    }
    if c.format == Format::Json {
        write_json(c, "characteristics.json", &json!(all))?;
    }
    println!("{} characteristics written", seeds.len() - failures);
    Ok(if failures == 0 { 0 } else { 2 })
}

pub fn singular(c: &Common) -> Result<u8, Failure> {
    let p = load(c)?;
    let surface = p.surface(resolution(c, &p))?;
    let sigma = p.singular_locus(&surface);
    match c.format {
        Format::Csv => {
            write_with(c, "singular.csv", |w| write_point_cloud(None, Some(&sigma), w))?;
            write_with(c, "surface.csv", |w| write_point_cloud(Some(&surface), None, w))?;
        }
        Format::Json => {
            let points: Vec<Value> = sigma
                .points
                .iter()
                .map(|s| json!({ "point": s.point, "degenerate": s.degenerate }))
                .collect();
            write_json(
                c,
                "singular.json",
                &json!({
                    "points": points,
                    "polylines": sigma.polylines,
                    "seeds": sigma.seeds,
                    "dropped_seeds": sigma.dropped_seeds,
                }),
            )?;
        }
    }
    println!(
        "sigma points: {} ({} seeds, {} dropped), crossing cells: {}",
        sigma.len(),
        sigma.seeds,
        sigma.dropped_seeds,
        surface.len()
    );
    Ok(0)
}

pub fn envelope(args: &EnvelopeArgs) -> Result<u8, Failure> {
    let c = &args.common;
    let p = load(c)?;
    let law = p.conservation_law()?;
    let range: Interval = p.loaded.initial.s_range[0];
    let points = law
        .envelope::<f64>(range, args.samples.max(1))
        .map_err(|e| Failure::from(PipelineError::from(e)))?;
    match c.format {
        Format::Csv => write_with(c, "envelope.csv", |w| law.write_envelope_csv(&points, w))?,
        Format::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|q| json!({ "s": q.s, "t": q.t, "x": q.x, "speed": law.propagation_speed(q.s).ok() }))
                .collect();
            write_json(c, "envelope.json", &json!(rows))?;
        }
    }
    match law.blowup_time::<f64>(range).time() {
        Some(t) => println!("blow-up time: {t}"),
        None => println!("blow-up time: none (characteristics do not cross)"),
    }
    println!("envelope points: {}", points.len());
    Ok(0)
}

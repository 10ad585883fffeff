use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use omegaz_core::gap_counter::{theorem_center, theorem_variance};
use omegaz_core::model::{
    exact_mean_and_variance, model_mean_and_variance_with, monte_carlo, stein_diagnostics,
    JointLaw, TailPolicy,
};
use omegaz_core::records::{
    ModelRecord, OracleRecord, Record, SieveCheckRecord, SteinRecord, SweepRecord,
};
use omegaz_core::sieve_check::{all_tuples, check_batch, write_csv, JointDeltaQuery};
use omegaz_core::stats::{normalized_moments, write_moment_csv, NormalizedMomentReport};
use omegaz_core::{
    recenter, segmented_sweep, CutoffPolicy, Error, GapParameters, MomentAccumulator, PrimeTable, Result,
    Statistic, SweepConfig,
};

use crate::config::*;

/// Largest table built for the Mertens-extension tail; beyond it the tail
/// is extrapolated.
const EXTENSION_TABLE_CAP: u64 = 100_000_000;

/// A finished artifact, before it is written anywhere.
#[derive(Clone, Debug)]
pub enum Output {
    Record(Box<Record>),
    Moments(Vec<NormalizedMomentReport>),
}

impl Output {
    /// Renders the artifact in `format`. Rendering is a pure function of the
    /// artifact, so equal inputs give byte-identical output.
    pub fn render(&self, format: Format) -> Result<String> {
        match (self, format) {
            (Output::Record(r), Format::Json) => Ok(serde_json::to_string_pretty(r)? + "\n"),
            (Output::Moments(rows), Format::Json) => Ok(serde_json::to_string_pretty(rows)? + "\n"),
            (Output::Moments(rows), Format::Csv) => moment_csv(rows),
            (Output::Record(r), Format::Csv) => record_csv(r),
        }
    }
}

fn moment_csv(rows: &[NormalizedMomentReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_moment_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
}

fn record_csv(record: &Record) -> Result<String> {
    match record {
        Record::Sweep(r) => {
            let params = GapParameters::new(r.z)?;
            moment_csv(&theorem_normalized(r, &params)?)
        }
        Record::ModelExact(r) | Record::ModelMc(r) => {
            let acc = MomentAccumulator::from_parts(r.count, r.shift, &r.power_sums)?;
            moment_csv(&normalized_moments(&acc, r.s2_n, r.cutoff, r.z)?)
        }
        Record::Oracle(r) => {
            let acc = MomentAccumulator::from_parts(r.count, r.shift, &r.power_sums)?;
            let var = r.power_sums.get(2).copied().unwrap_or(f64::NAN);
            moment_csv(&normalized_moments(&acc, var, r.cutoff, r.z)?)
        }
        Record::Stein(r) => {
            let mut out = csv::Writer::from_writer(Vec::new());
            for point in &r.report.grid {
                out.serialize(point)?;
            }
            Ok(String::from_utf8(out.into_inner().map_err(|e| e.into_error())?)
                .expect("csv writer emits utf-8"))
        }
        Record::SieveCheck(r) => {
            let mut buf = Vec::new();
            write_csv(&mut buf, &r.rows)?;
            Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
        }
    }
}

/// Runs the configured command on the current rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<Output> {
    let cache = config.common.prime_cache.as_deref();
    match &config.command {
        Command::Sweep(a) => sweep(a).map(record),
        Command::ModelExact(a) => model_exact(a, cache).map(record),
        Command::ModelMc(a) => model_mc(a, cache).map(record),
        Command::Oracle(a) => oracle(a, cache).map(record),
        Command::Stein(a) => stein(a, cache).map(record),
        Command::SieveCheck(a) => sieve_check(a, cache).map(record),
        Command::Report(a) => report(a, cache).map(Output::Moments),
    }
}

/// Runs the command on a pool of `--threads` workers and writes the result.
pub fn execute(config: &ExperimentConfig) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.common.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::ResourceCap(format!("cannot start thread pool: {e}")))?;
    let text = pool.install(|| run(config))?.render(config.common.format)?;
    match &config.common.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn record(r: Record) -> Output {
    Output::Record(Box::new(r))
}

fn table(limit: u64, cache: Option<&Path>) -> Result<PrimeTable> {
    let limit = limit.max(2);
    match cache {
        Some(path) => PrimeTable::load_or_build(path, limit),
        None => PrimeTable::build(limit),
    }
}

/// Table covering every gap interval that starts at a prime `<= n`.
fn model_table(n: u64, params: &GapParameters, cache: Option<&Path>) -> Result<PrimeTable> {
    table(params.threshold(n.max(2)).max(n), cache)
}

fn sweep(a: &SweepArgs) -> Result<Record> {
    let params = GapParameters::new(a.z)?;
    let default_policy = match a.statistic {
        Statistic::DeltaSum => CutoffPolicy::Corrected,
        Statistic::GapCount => CutoffPolicy::Full,
    };
    let cfg = SweepConfig {
        n: a.n,
        params,
        cutoff: a.cutoff_policy.unwrap_or(default_policy).resolve(a.n)?,
        r_max: a.r_max,
        shift: a.shift,
        segment_size: a.segment_size,
        statistic: a.statistic,
    };
    let result = segmented_sweep(&cfg)?;
    Ok(Record::Sweep(SweepRecord::from(&result)))
}

fn model_exact(a: &ModelArgs, cache: Option<&Path>) -> Result<Record> {
    let start = Instant::now();
    let params = GapParameters::new(a.z)?;
    let tail = TailPolicy::from(a.tail);
    let t = match tail {
        TailPolicy::Exact => model_table(a.big_n, &params, cache)?,
        TailPolicy::MertensExtension => {
            let reach = params.threshold(a.big_n.max(2)).min(EXTENSION_TABLE_CAP);
            table(reach.max(a.big_n), cache)?
        }
    };
    let pred = model_mean_and_variance_with(a.big_n, &params, &t, tail)?;
    Ok(Record::ModelExact(ModelRecord {
        cutoff: pred.cutoff,
        z: pred.z,
        c_n: pred.c_n,
        s2_n: pred.s2_n,
        asym_mean: pred.asym_mean,
        asym_var: pred.asym_var,
        shift: pred.c_n,
        r_max: 2,
        power_sums: vec![1.0, 0.0, pred.s2_n],
        count: 1,
        seed: None,
        sample_mean: None,
        sample_variance: None,
        histogram: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    }))
}

fn model_mc(a: &McArgs, cache: Option<&Path>) -> Result<Record> {
    let start = Instant::now();
    let params = GapParameters::new(a.z)?;
    let t = model_table(a.big_n, &params, cache)?;
    let pred = model_mean_and_variance_with(a.big_n, &params, &t, TailPolicy::Exact)?;
    let mc = monte_carlo(a.big_n, &params, &t, a.seed, a.trials)?;
    let acc = MomentAccumulator::from_histogram(&mc.histogram, pred.c_n, a.r_max);
    Ok(Record::ModelMc(ModelRecord {
        cutoff: pred.cutoff,
        z: pred.z,
        c_n: pred.c_n,
        s2_n: pred.s2_n,
        asym_mean: pred.asym_mean,
        asym_var: pred.asym_var,
        shift: acc.shift(),
        r_max: acc.r_max(),
        power_sums: acc.power_sums(),
        count: acc.count(),
        seed: Some(mc.seed),
        sample_mean: Some(mc.mean()),
        sample_variance: Some(mc.sample_variance()),
        histogram: Some(mc.histogram),
        wall_time_s: start.elapsed().as_secs_f64(),
    }))
}

fn oracle(a: &OracleArgs, cache: Option<&Path>) -> Result<Record> {
    use num::ToPrimitive;
    let start = Instant::now();
    let params = GapParameters::new(a.z)?;
    let reach = params.threshold(a.big_n.max(2)).max(a.big_n);
    let m = a.big_m.unwrap_or(reach);
    let t = table(m.max(reach), cache)?;
    let law = JointLaw::build(m, a.big_n, &params, &t)?;
    let moments = law.moments(a.r_max.max(2));
    let (mean_f, var_f) = exact_mean_and_variance(a.big_n, &params, &t)?;
    let shift = moments.mean.to_f64().unwrap_or(f64::NAN);
    let power_sums: Vec<f64> = moments.central[..=a.r_max]
        .iter()
        .map(|x| x.to_f64().unwrap_or(f64::NAN))
        .collect();
    Ok(Record::Oracle(OracleRecord {
        cutoff: a.big_n,
        enumeration_limit: m,
        z: a.z,
        construction: moments.construction,
        atoms: moments.atoms,
        mean_exact: moments.mean.to_string(),
        central_moments_exact: moments.central[..=a.r_max].iter().map(|x| x.to_string()).collect(),
        formula_variance_exact: var_f.to_string(),
        matches_formula: moments.mean == mean_f && moments.central[2] == var_f,
        shift,
        r_max: a.r_max,
        power_sums,
        count: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
    }))
}

fn stein(a: &SteinArgs, cache: Option<&Path>) -> Result<Record> {
    let start = Instant::now();
    let params = GapParameters::new(a.z)?;
    let t = model_table(a.big_n, &params, cache)?;
    let report = stein_diagnostics(a.big_n, &params, &t)?;
    Ok(Record::Stein(SteinRecord { report, wall_time_s: start.elapsed().as_secs_f64() }))
}

fn sieve_check(a: &SieveCheckArgs, cache: Option<&Path>) -> Result<Record> {
    let start = Instant::now();
    let params = GapParameters::new(a.z)?;
    let tuples = match &a.primes {
        Some(p) => vec![p.clone()],
        None => all_tuples(a.max_p, a.u_max),
    };
    let queries = tuples
        .into_iter()
        .map(|p| JointDeltaQuery::new(p, params, a.n))
        .collect::<Result<Vec<_>>>()?;
    let max_p = queries.iter().flat_map(|q| q.primes()).copied().max().unwrap_or(2);
    let t = model_table(max_p, &params, cache)?;
    let rows = check_batch(&queries, &t)?;
    Ok(Record::SieveCheck(SieveCheckRecord {
        z: a.z,
        n: a.n,
        rows,
        wall_time_s: start.elapsed().as_secs_f64(),
    }))
}

fn theorem_normalized(r: &SweepRecord, params: &GapParameters) -> Result<Vec<NormalizedMomentReport>> {
    let nf = r.n as f64;
    normalized_about(r, theorem_center(nf, params), theorem_variance(nf, params))
}

fn normalized_about(r: &SweepRecord, center: f64, variance: f64) -> Result<Vec<NormalizedMomentReport>> {
    let acc = r.accumulator()?;
    let acc = if acc.shift() == center { acc } else { recenter(&acc, center) };
    normalized_moments(&acc, variance, r.n, r.z)
}

fn report(a: &ReportArgs, cache: Option<&Path>) -> Result<Vec<NormalizedMomentReport>> {
    let text = std::fs::read_to_string(&a.input)?;
    let rec = match serde_json::from_str::<Record>(&text) {
        Ok(Record::Sweep(r)) => r,
        Ok(_) => return Err(Error::Malformed("report expects a sweep record".into())),
        Err(e) => return Err(Error::Malformed(format!("{}: {e}", a.input.display()))),
    };
    if rec.count == 0 || rec.power_sums.len() < 2 {
        return Err(Error::Malformed("sweep record holds no moments".into()));
    }
    let params = GapParameters::new(rec.z)?;
    match a.normalizer {
        Normalizer::Theorem => theorem_normalized(&rec, &params),
        Normalizer::Model => {
            let n = rec.cutoff.unwrap_or(rec.n).min(rec.n);
            let reach = params.threshold(n.max(2)).min(EXTENSION_TABLE_CAP);
            let t = table(reach.max(n), cache)?;
            let pred = model_mean_and_variance_with(n, &params, &t, TailPolicy::MertensExtension)?;
            normalized_about(&rec, pred.c_n, pred.s2_n)
        }
        Normalizer::Empirical => {
            let acc = rec.accumulator()?;
            let mean = acc.moment(1) + acc.shift();
            let centered = recenter(&acc, mean);
            let var = if centered.r_max() >= 2 { centered.moment(2) } else { f64::NAN };
            normalized_moments(&centered, var, rec.n, rec.z)
        }
    }
}

//! Command dispatch for the `quivercap` binary. Every command produces one
//! JSON report; the exit status is derived from the outcome.

use serde_json::{Map, Value};

use crate::bl::{bl_constant, bl_stationarity_residual};
use crate::capacity::{
    capacity_value, extremiser_from_scaling, factorization_check, objective, scaling_for_extremiser, stationarity_residual,
};
use crate::error::{Error, Result};
use crate::io::{self, extended, matrix, nonneg, num, ParsedDatum};
use crate::oracle::{brute_force_capacity, OracleConfig};
use crate::quiver::{DimVector, QuiverDatum};
use crate::scaling::{
    polystable_from, rank_witness_search, run_scaling, semistable_from, Decision, ScalingConfig, ScalingReport,
    ScalingStatus, SubspaceWitness, WitnessOrigin,
};
use crate::selftest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Capacity,
    Bl,
    Scale,
    Semistable,
    Extremisers,
    Factorize,
    Oracle,
    Selftest,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Capacity => "capacity",
            Command::Bl => "bl",
            Command::Scale => "scale",
            Command::Semistable => "semistable",
            Command::Extremisers => "extremisers",
            Command::Factorize => "factorize",
            Command::Oracle => "oracle",
            Command::Selftest => "selftest",
        }
    }

    pub fn needs_datum(self) -> bool {
        self != Command::Selftest
    }
}

#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub scaling: ScalingConfig,
    pub oracle: OracleConfig,
    /// `d₁` for `factorize`.
    pub block_dims: Option<DimVector>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Success,
    /// The computation finished but did not decide; exit status 3.
    Indeterminate,
    /// A self-test criterion failed or the datum is invalid.
    Failure,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Value,
    pub verdict: Verdict,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

struct Report(Map<String, Value>);

impl Report {
    fn new(command: Command) -> Self {
        let mut m = Map::new();
        m.insert("command".into(), command.as_str().into());
        m.insert("version".into(), VERSION.into());
        Self(m)
    }

    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(key.to_owned(), value.into());
    }

    fn finish(mut self, flags: &Flags, n_total: Option<usize>) -> Value {
        self.put("config", config_echo(flags, n_total));
        Value::Object(self.0)
    }
}

fn config_echo(flags: &Flags, n_total: Option<usize>) -> Value {
    let s = &flags.scaling;
    let mut m = Map::new();
    m.insert("tol_ds".into(), num(s.tol_ds));
    m.insert("max_iter".into(), s.max_iter.into());
    let threshold = match (s.positivity_threshold, n_total) {
        (Some(t), _) => num(t),
        (None, Some(n)) if n > 0 => num(s.threshold(n)),
        _ => Value::Null,
    };
    m.insert("positivity_threshold".into(), threshold);
    m.insert("singular_guard".into(), num(s.singular_guard));
    m.insert("cond_cap".into(), num(s.cond_cap));
    m.insert("seed".into(), s.seed.into());
    m.insert("oracle_cap".into(), flags.oracle.cap.into());
    Value::Object(m)
}

fn witness_json(w: &SubspaceWitness) -> Value {
    let mut m = Map::new();
    let origin = match w.origin {
        WitnessOrigin::SourceKernel => "source_kernel",
        WitnessOrigin::SinkCokernel => "sink_cokernel",
        WitnessOrigin::RankSearch => "rank_search",
    };
    m.insert("origin".into(), origin.into());
    if let Some(v) = &w.vertex {
        m.insert("vertex".into(), v.clone().into());
    }
    if let Some(b) = &w.basis {
        m.insert("basis".into(), matrix(b));
    }
    let subspaces: Map<String, Value> = w.subspaces.iter().map(|(v, u)| (v.clone(), matrix(u))).collect();
    m.insert("subspaces".into(), Value::Object(subspaces));
    m.insert("source_side".into(), w.lhs.into());
    m.insert("sink_side".into(), w.rhs.into());
    m.insert("verified".into(), w.verified.into());
    Value::Object(m)
}

fn scaling_fields(out: &mut Report, r: &ScalingReport) {
    out.put("status", r.status.as_str());
    out.put("capacity", r.capacity.map_or(Value::Null, nonneg));
    out.put("capacity_estimate", nonneg(r.capacity_estimate));
    if let Some(x) = r.capacity_extrapolated {
        out.put("capacity_extrapolated", nonneg(x));
    }
    out.put("ds_final", num(r.ds_final));
    out.put("ds_min", num(r.ds_min));
    out.put("iterations", r.iterations);
    out.put("character_log", num(r.logabs_character));
    out.put("max_condition", num(r.max_condition));
    if let Some(w) = &r.witness {
        out.put("witness", witness_json(w));
    }
}

fn verdict_of(status: ScalingStatus) -> Verdict {
    if status == ScalingStatus::Indeterminate {
        Verdict::Indeterminate
    } else {
        Verdict::Success
    }
}

fn group_json(r: &ScalingReport) -> Value {
    Value::Object(r.a.0.iter().map(|(v, a)| (v.clone(), matrix(a))).collect())
}

fn validate(datum: &ParsedDatum, flags: &Flags) -> Result<Outcome> {
    let mut out = Report::new(Command::Validate);
    let report = datum.validate()?;
    let qd = datum.quiver_datum()?;
    out.put("valid", report.is_valid());
    out.put(
        "violations",
        Value::Array(report.violations.iter().cloned().map(Value::from).collect()),
    );
    out.put("mode", if matches!(datum, ParsedDatum::Bl(_)) { "bl" } else { "quiver" });
    if report.is_valid() {
        out.put("n_total", qd.n_total());
    }
    if let ParsedDatum::Bl(b) = datum {
        out.put("omega", b.omega());
        out.put(
            "exponents",
            Value::Array(b.exponents.to_strings().into_iter().map(Value::from).collect()),
        );
    }
    let n = report.is_valid().then(|| qd.n_total());
    let verdict = if report.is_valid() {
        Verdict::Success
    } else {
        Verdict::Failure
    };
    Ok(Outcome {
        report: out.finish(flags, n),
        verdict,
    })
}

fn capacity(d: &QuiverDatum, flags: &Flags) -> Result<Outcome> {
    let r = run_scaling(d, &flags.scaling)?;
    let mut out = Report::new(Command::Capacity);
    scaling_fields(&mut out, &r);
    Ok(Outcome {
        verdict: verdict_of(r.status),
        report: out.finish(flags, Some(d.n_total())),
    })
}

fn bl(datum: &ParsedDatum, flags: &Flags) -> Result<Outcome> {
    let ParsedDatum::Bl(b) = datum else {
        return Err(Error::Config("the bl command needs a datum with \"exponents\"".into()));
    };
    let r = bl_constant(b, &flags.scaling)?;
    let mut out = Report::new(Command::Bl);
    out.put("bl", r.bl.map_or(Value::Null, extended));
    out.put("bl_estimate", extended(r.bl_estimate));
    out.put("feasible", r.feasible.as_str());
    out.put("omega", r.omega);
    out.put("n_total", r.n_total);
    out.put("geometric_bl", r.geometric_bl);
    if let Some(c) = r.character_bl {
        out.put("character_bl", num(c));
    }
    if let Some(g) = r.route_gap {
        out.put("route_gap", num(g));
    }
    if let Some(g) = r.limit_is_geometric_bl {
        out.put("limit_is_geometric_bl", g);
    }
    scaling_fields(&mut out, &r.scaling);
    Ok(Outcome {
        verdict: verdict_of(r.scaling.status),
        report: out.finish(flags, Some(r.n_total)),
    })
}

fn scale(d: &QuiverDatum, flags: &Flags) -> Result<Outcome> {
    let r = run_scaling(d, &flags.scaling)?;
    let mut out = Report::new(Command::Scale);
    scaling_fields(&mut out, &r);
    out.put("max_drift", num(r.max_drift));
    out.put("a", group_json(&r));
    out.put(
        "matrices",
        Value::Object(r.rep.0.iter().map(|(id, m)| (id.clone(), matrix(m))).collect()),
    );
    out.put("ds_trace", Value::Array(r.ds_trace.iter().map(|&x| num(x)).collect()));
    Ok(Outcome {
        verdict: verdict_of(r.status),
        report: out.finish(flags, Some(d.n_total())),
    })
}

fn semistable(d: &QuiverDatum, flags: &Flags) -> Result<Outcome> {
    let r = run_scaling(d, &flags.scaling)?;
    let decision = semistable_from(&r);
    let mut out = Report::new(Command::Semistable);
    out.put("decision", decision.as_str());
    out.put("polystable", polystable_from(&r, &flags.scaling).as_str());
    out.put("polystable_method", "conditioning of A below cond_cap (heuristic)");
    scaling_fields(&mut out, &r);
    if decision == Decision::No && r.witness.is_none() {
        if let Some(w) = rank_witness_search(d, &flags.scaling)? {
            let mut m = Map::new();
            m.insert("x".into(), matrix(&w.x));
            m.insert("rank_x".into(), w.rank_x.into());
            m.insert("rank_image".into(), w.rank_image.into());
            out.put("rank_witness", Value::Object(m));
        }
    }
    let verdict = if decision == Decision::Indeterminate {
        Verdict::Indeterminate
    } else {
        Verdict::Success
    };
    Ok(Outcome {
        verdict,
        report: out.finish(flags, Some(d.n_total())),
    })
}

fn extremisers(datum: &ParsedDatum, flags: &Flags) -> Result<Outcome> {
    let d = datum.quiver_datum()?;
    let r = scaling_for_extremiser(&d, &flags.scaling)?;
    let mut out = Report::new(Command::Extremisers);
    scaling_fields(&mut out, &r);
    if r.status == ScalingStatus::Converged {
        let y = extremiser_from_scaling(&d, &r)?;
        out.put("polystable", polystable_from(&r, &flags.scaling).as_str());
        out.put("polystable_method", "conditioning of A below cond_cap (heuristic)");
        out.put("objective", nonneg(objective(&d, &y)?));
        out.put("stationarity_residual", num(stationarity_residual(&d, &y)?));
        out.put("extremiser", Value::Array(y.0.iter().map(matrix).collect()));
        if let ParsedDatum::Bl(b) = datum {
            // the BL supremum is attained at ω times the capacity extremiser
            let omega = b.omega() as f64;
            let scaled: Vec<_> = y.0.iter().map(|m| m * omega).collect();
            out.put("bl_stationarity_residual", num(bl_stationarity_residual(b, &scaled)?));
            out.put("bl_extremiser", Value::Array(scaled.iter().map(matrix).collect()));
        }
    }
    Ok(Outcome {
        verdict: verdict_of(r.status),
        report: out.finish(flags, Some(d.n_total())),
    })
}

fn factorize(d: &QuiverDatum, flags: &Flags) -> Result<Outcome> {
    let d1 = flags
        .block_dims
        .as_ref()
        .ok_or_else(|| Error::Config("factorize needs --block-dims giving d1".into()))?;
    let f = factorization_check(d, d1, &flags.scaling, flags.oracle.floor)?;
    let mut out = Report::new(Command::Factorize);
    out.put("status", f.full.status.as_str());
    out.put("capacity", nonneg(f.d_full));
    out.put("capacity_first", nonneg(f.d_first));
    out.put("capacity_second", nonneg(f.d_second));
    out.put("product", nonneg(f.d_first * f.d_second));
    out.put("gap", num(f.gap));
    out.put("status_first", f.first.status.as_str());
    out.put("status_second", f.second.status.as_str());
    out.put("ds_final", num(f.full.ds_final));
    out.put("iterations", f.full.iterations);
    out.put("character_log", num(f.full.logabs_character));
    debug_assert_eq!(capacity_value(&f.full), f.d_full);
    Ok(Outcome {
        verdict: verdict_of(f.full.status),
        report: out.finish(flags, Some(d.n_total())),
    })
}

fn oracle(d: &QuiverDatum, flags: &Flags) -> Result<Outcome> {
    let cfg = OracleConfig {
        seed: flags.scaling.seed,
        ..flags.oracle.clone()
    };
    let r = brute_force_capacity(d, &cfg)?;
    let mut out = Report::new(Command::Oracle);
    out.put("capacity", nonneg(r.value));
    out.put("n_total", d.n_total());
    out.put(
        "restart_values",
        Value::Array(r.restart_values.iter().map(|&x| nonneg(x)).collect()),
    );
    Ok(Outcome {
        verdict: Verdict::Success,
        report: out.finish(flags, Some(d.n_total())),
    })
}

fn run_selftest(flags: &Flags) -> Outcome {
    let results = selftest::run(&flags.scaling, &flags.oracle);
    let all = results.iter().all(|c| c.passed);
    let mut out = Report::new(Command::Selftest);
    out.put("passed", all);
    out.put(
        "criteria",
        Value::Array(
            results
                .iter()
                .map(|c| {
                    let mut m = Map::new();
                    m.insert("id".into(), c.id.into());
                    m.insert("name".into(), c.name.into());
                    m.insert("passed".into(), c.passed.into());
                    m.insert("detail".into(), c.detail.clone().into());
                    Value::Object(m)
                })
                .collect(),
        ),
    );
    Outcome {
        verdict: if all { Verdict::Success } else { Verdict::Failure },
        report: out.finish(flags, None),
    }
}

/// Runs `command`. `datum` is validated here for every command except
/// `validate`, which reports the violations instead of failing.
pub fn dispatch(command: Command, datum: Option<&ParsedDatum>, flags: &Flags) -> Result<Outcome> {
    flags.scaling.check(1)?;
    if command == Command::Selftest {
        return Ok(run_selftest(flags));
    }
    let datum = datum.ok_or_else(|| Error::Config(format!("{} needs a datum file", command.as_str())))?;
    if command == Command::Validate {
        return validate(datum, flags);
    }
    let report = datum.validate()?;
    if !report.is_valid() {
        return Err(Error::Invalid(report.violations));
    }
    let d = datum.quiver_datum()?;
    match command {
        Command::Capacity => capacity(&d, flags),
        Command::Bl => bl(datum, flags),
        Command::Scale => scale(&d, flags),
        Command::Semistable => semistable(&d, flags),
        Command::Extremisers => extremisers(datum, flags),
        Command::Factorize => factorize(&d, flags),
        Command::Oracle => oracle(&d, flags),
        Command::Validate | Command::Selftest => unreachable!("handled above"),
    }
}

/// `key: value` lines; nested values as compact JSON.
pub fn render_text(report: &Value) -> String {
    let mut s = String::new();
    if let Value::Object(m) = report {
        for (k, v) in m {
            match v {
                Value::String(t) => s.push_str(&format!("{k}: {t}\n")),
                other => s.push_str(&format!("{k}: {other}\n")),
            }
        }
    }
    s
}

pub fn render_json(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports always serialize");
    s.push('\n');
    s
}

/// Reads a datum file without validating it.
pub fn load(path: &std::path::Path) -> Result<ParsedDatum> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    io::parse_datum_file(&text)
        .and_then(|f| f.into_datum_unchecked())
        .map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
}

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use maxent_core::identities::{
    check_supplied, run_suite, Check, IdentityReport, InstanceReport, SuppliedInstance,
};
use serde::{Deserialize, Serialize};

use super::Context;
use crate::error::{CliError, Outcome};
use crate::io::{read_json, to_json, write_output};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseArgs {
    /// Generate seeded random instances.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<bool>,
    /// Number of random instances [default: 100].
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<u64>,
    /// Instance JSON files: {"prior", "features", "data", "lambda", optional
    /// "variational", "event", "n"}.
    #[arg(long, num_args = 1..)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Vec<PathBuf>>,
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    instances: Vec<InstanceReport>,
    all_pass: bool,
}

/// How far a report sits in its forbidden direction; negative means slack.
fn excess(r: &IdentityReport) -> f64 {
    match r.check {
        Check::Equal => r.residual.abs(),
        Check::AtMost | Check::Between => r.residual,
        Check::AtLeast => -r.residual,
    }
}

fn render_table(instances: &[InstanceReport]) {
    let mut rows: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for inst in instances {
        for r in &inst.reports {
            let row = rows.entry(&r.name).or_insert((0, 0, f64::NEG_INFINITY));
            row.0 += 1;
            row.1 += usize::from(r.pass);
            row.2 = row.2.max(excess(r));
        }
    }
    eprintln!(
        "{:<30} {:>7} {:>7} {:>14}  status",
        "identity", "checks", "passed", "worst excess"
    );
    for (name, (n, ok, worst)) in rows {
        let status = if n == ok { "PASS" } else { "FAIL" };
        eprintln!("{name:<30} {n:>7} {ok:>7} {worst:>14.3e}  {status}");
    }
    for inst in instances {
        for r in inst.reports.iter().filter(|r| !r.pass) {
            eprintln!(
                "FAIL instance {} {}: lhs={} rhs={} residual={:e} tol={:e}",
                inst.instance.index, r.name, r.lhs, r.rhs, r.residual, r.tol
            );
        }
        for e in &inst.errors {
            eprintln!("ERROR instance {}: {e}", inst.instance.index);
        }
    }
}

pub fn run(args: &DiagnoseArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let files = args.instance.clone().unwrap_or_default();
    let random = args.random.unwrap_or(files.is_empty());
    let mut instances = Vec::new();
    for (i, path) in files.iter().enumerate() {
        let inst: SuppliedInstance = read_json(path)?;
        instances.push(check_supplied(&inst, i as u64));
    }
    if random {
        instances.extend(run_suite(ctx.seed, args.instances.unwrap_or(100)).instances);
    }
    let all_pass = instances.iter().all(InstanceReport::all_pass);
    render_table(&instances);
    let report = DiagnoseReport {
        seed: random.then_some(ctx.seed),
        instances,
        all_pass,
    };
    write_output(ctx.output(), &to_json(&report))?;
    Ok(if all_pass {
        Outcome::Ok
    } else {
        Outcome::IdentityFailure
    })
}

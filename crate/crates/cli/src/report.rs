//! Plain-text tables and line-oriented report files.

use std::fmt::Write as _;

use scoregraph::{MmdReport, NoiseSchedule, SdeKind};

pub fn mmd_table(rows: &[(String, MmdReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut s = String::new();
    writeln!(
        s,
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}",
        "method", "degree", "clustering", "orbit", "average"
    )
    .unwrap();
    for (label, r) in rows {
        writeln!(
            s,
            "{:<width$}  {:>10.6}  {:>10.6}  {:>10.6}  {:>10.6}",
            label, r.degree, r.clustering, r.orbit, r.average
        )
        .unwrap();
    }
    s
}

/// Forward endpoint `(u_T, σ_T²)` at `t = 1` for each named schedule.
pub fn max_perturbation_table(rows: &[(&str, NoiseSchedule)]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<8}  {:<4}  {:>8}  {:>8}  {:>8}  {:>10}",
        "channel", "sde", "min", "max", "u_T", "sigma_T^2"
    )
    .unwrap();
    for (name, sched) in rows {
        let kp = sched.max_perturbation();
        let (lo, hi) = sched.bounds();
        let kind = match sched.kind {
            SdeKind::Vp => "VP",
            SdeKind::Ve => "VE",
        };
        writeln!(
            s,
            "{:<8}  {:<4}  {:>8}  {:>8}  {:>8.4}  {:>10.4}",
            name, kind, lo, hi, kp.mean_coef, kp.var
        )
        .unwrap();
    }
    s
}

pub fn two_columns(header: (&str, &str), xs: &[f64], ys: &[f64]) -> String {
    let mut s = format!("# {}\t{}\n", header.0, header.1);
    for (x, y) in xs.iter().zip(ys) {
        writeln!(s, "{x}\t{y}").unwrap();
    }
    s
}

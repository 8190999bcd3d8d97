//! Human-readable tables for reports.

use std::fmt::Write;

use super::{
    DataQuality, FullReport, ImpactReport, ReferenceValue, Rq1Report, Rq2Report, Rq3Report,
    Rq4Report,
};

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:.1}%", v * 100.0))
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

fn references(out: &mut String, refs: &[ReferenceValue]) {
    if refs.is_empty() {
        return;
    }
    let list: Vec<String> = refs
        .iter()
        .map(|r| format!("{} = {} {}", r.metric, r.value, r.unit))
        .collect();
    let _ = writeln!(out, "  reference values: {}", list.join(", "));
}

fn rq1(out: &mut String, r: &Rq1Report) {
    let i = &r.introduction;
    let _ = writeln!(out, "== Introduction ==");
    let _ = writeln!(
        out,
        "  {:<24} {:>10} {:>6} {:>6} {:>9} {:>10} {:>8}",
        "chipset", "released", "total", "new", "inherited", "persistent", "removed"
    );
    for c in &i.chipsets {
        let removed = c
            .next_release
            .as_ref()
            .map_or_else(|| "-".into(), |n| format!("{}/{}", n.removed, n.considered));
        let _ = writeln!(
            out,
            "  {:<24} {:>10} {:>6} {:>6} {:>9} {:>10} {:>8}",
            c.chipset.to_string(),
            c.release_date,
            c.total,
            c.newly_introduced,
            c.inherited,
            c.persistent,
            removed
        );
    }
    let a = &i.aggregate;
    let _ = writeln!(
        out,
        "  chipsets with vulnerabilities: {}, mean total {}, median total {}",
        a.chipsets,
        num(a.mean_total),
        num(a.median_total)
    );
    let _ = writeln!(
        out,
        "  inherited share: pooled {}, mean {}, median {}",
        pct(a.pooled_inherited_share),
        pct(a.mean_inherited_share),
        pct(a.median_inherited_share)
    );
    let _ = writeln!(
        out,
        "  removed before next release: {}",
        pct(a.removed_before_next_share)
    );
    if !i.excluded.is_empty() {
        let _ = writeln!(out, "  excluded (undated chipsets): {}", i.excluded.len());
    }
    references(out, &i.reference_values);
}

fn rq2(out: &mut String, r: &Rq2Report) {
    let d = &r.discovery;
    let _ = writeln!(out, "== Discovery (attribution: {}) ==", d.attribution_mode);
    let _ = writeln!(
        out,
        "  {:<10} {:>5} {:>6} {:>9} {:>9}",
        "cm", "year", "total", "internal", "share"
    );
    for y in &d.years {
        let _ = writeln!(
            out,
            "  {:<10} {:>5} {:>6} {:>9} {:>9}",
            y.manufacturer.as_str(),
            y.year,
            y.total,
            y.internal,
            pct(y.internal_share)
        );
    }
    let _ = writeln!(
        out,
        "  {:<18} {:>6} {:>9}",
        "component", "total", "internal"
    );
    for c in &d.components {
        let name = c.component.map_or("Unknown", |c| c.as_str());
        let _ = writeln!(
            out,
            "  {:<18} {:>6} {:>9}",
            name,
            c.total,
            pct(c.internal_share)
        );
    }
    references(out, &d.reference_values);
}

fn rq3(out: &mut String, r: &Rq3Report) {
    let s = &r.severity;
    let _ = writeln!(out, "== Severity by location ==");
    for g in &s.groups {
        let m = &g.summary;
        let _ = writeln!(
            out,
            "  {:<9} n={:<5} min {:.1} q1 {:.1} median {:.1} q3 {:.1} max {:.1}",
            g.location.as_str(),
            m.n,
            m.min,
            m.q1,
            m.median,
            m.q3,
            m.max
        );
    }
    let _ = writeln!(
        out,
        "  median difference (firmware - driver): {}",
        num(s.median_difference)
    );
    match (&s.kruskal_wallis, &s.notice) {
        (Some(kw), _) => {
            let _ = writeln!(out, "  Kruskal-Wallis H = {:.4}, p = {:.4}", kw.h, kw.p);
        }
        (None, Some(n)) => {
            let _ = writeln!(out, "  {n}");
        }
        _ => {}
    }
    references(out, &s.reference_values);

    let l = &r.patch_latency;
    let _ = writeln!(
        out,
        "== Patch latency (threshold {} days) ==",
        l.threshold_days
    );
    for s in l.overall.iter().chain(&l.per_manufacturer) {
        let _ = writeln!(
            out,
            "  {:<10} n={:<5} within {:>7} median {:>6.1} q95 {:>6.1}",
            s.manufacturer.map_or("all", |m| m.as_str()),
            s.n,
            pct(Some(s.within_threshold_share)),
            s.median_days,
            s.q95_days
        );
    }
    let _ = writeln!(
        out,
        "  without report date: {}, data errors: {}",
        l.without_report_date,
        l.data_errors.len()
    );
    references(out, &l.reference_values);

    let a = &r.availability;
    let _ = writeln!(out, "== Availability (window {} days) ==", a.window_days);
    let _ = writeln!(
        out,
        "  {:<10} {:>6} {:>8} {:>8} {:>8}",
        "cm", "total", "cm site", "nvd", "aosp"
    );
    for row in &a.rows {
        let _ = writeln!(
            out,
            "  {:<10} {:>6} {:>8} {:>8} {:>8}",
            row.manufacturer.as_str(),
            row.total,
            pct(Some(row.cm_website)),
            pct(Some(row.nvd)),
            pct(Some(row.aosp))
        );
    }
    references(out, &a.reference_values);

    let c = &r.consistency;
    let _ = writeln!(out, "== Severity consistency ==");
    let _ = writeln!(
        out,
        "  n={} nist lower {}, equal {}, nist higher {}",
        c.n,
        pct(c.nist_lower),
        pct(c.equal),
        pct(c.nist_higher)
    );
    references(out, &c.reference_values);
}

fn rq4(out: &mut String, r: &Rq4Report) {
    let u = &r.unmitigated;
    let _ = writeln!(
        out,
        "== Unmitigated vulnerabilities (cutoff {}) ==",
        u.cutoff
    );
    let _ = writeln!(
        out,
        "  eligible {}, mitigated {}, unmitigated {} ({})",
        u.eligible,
        u.mitigated.len(),
        u.unmitigated.len(),
        pct(u.unmitigated_share)
    );
    references(out, &u.reference_values);
    let _ = writeln!(out, "  note: {}", u.reference_note);

    let t = &r.update_timeline;
    let _ = writeln!(out, "== Update timeline ==");
    let (median, max) = t
        .latency
        .map_or((None, None), |s| (Some(s.median), Some(s.max)));
    let _ = writeln!(
        out,
        "  pairs {}, median latency {}, q95 {}, max {}, data errors {}",
        t.pairs,
        num(median),
        num(t.latency_q95),
        num(max),
        t.data_errors.len()
    );
    let _ = writeln!(
        out,
        "  vulnerabilities updated {}, median spread {}, median first-to-half {}",
        t.entries.len(),
        num(t.median_spread),
        num(t.median_first_to_half)
    );
    references(out, &t.reference_values);

    let d = &r.affected_distribution;
    let _ = writeln!(out, "== Affected smartphones per vulnerability ==");
    for row in &d.rows {
        let s = &row.summary;
        let _ = writeln!(
            out,
            "  {:<10} n={:<5} min {} q1 {} median {} q3 {} max {}",
            row.manufacturer.as_str(),
            row.vulnerabilities,
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max
        );
    }
    references(out, &d.reference_values);
}

fn quality(out: &mut String, q: &DataQuality) {
    let _ = writeln!(out, "== Data quality ==");
    let _ = writeln!(
        out,
        "  vulnerabilities {} (without patch date {}), unresolved chipset strings {}, link conflicts {}",
        q.vulnerabilities, q.without_patch_date, q.unresolved_chipset_strings, q.link_conflicts
    );
    let _ = writeln!(
        out,
        "  smartphones {} (unlinked {}), orphan updates {}, chipsets without release date {}",
        q.smartphones, q.unlinked_smartphones, q.orphan_updates, q.chipsets_without_release_date
    );
}

pub fn render(report: &FullReport) -> String {
    let mut out = String::new();
    if let Some(r) = &report.rq1 {
        rq1(&mut out, r);
    }
    if let Some(r) = &report.rq2 {
        rq2(&mut out, r);
    }
    if let Some(r) = &report.rq3 {
        rq3(&mut out, r);
    }
    if let Some(r) = &report.rq4 {
        rq4(&mut out, r);
    }
    quality(&mut out, &report.data_quality);
    out
}

pub fn render_impact(r: &ImpactReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", r.cve);
    let chipsets: Vec<String> = r.chipsets.iter().map(ToString::to_string).collect();
    let _ = writeln!(
        out,
        "  chipsets ({}): {}",
        r.chipsets.len(),
        chipsets.join(", ")
    );
    let _ = writeln!(out, "  smartphones: {}", r.smartphone_count);
    for (oem, n) in &r.per_oem {
        let _ = writeln!(out, "    {oem}: {n}");
    }
    if let Some(w) = &r.warning {
        let _ = writeln!(out, "  warning: {w}");
    }
    out
}

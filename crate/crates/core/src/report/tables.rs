//! Markdown and CSV renderings of the comparison and regression tables.

use std::collections::BTreeMap;

use super::payload::{DamrComparison, EngagementComparison, RegressionPayload};
use crate::dimension::Dimension;
use crate::perception::{ModelSet, ModelSpec, BASELINE, REL_SCORE, SUCC_SCORE};

/// A rendered table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub markdown: String,
    pub csv: String,
}

/// Fixed-point with no negative zero.
pub fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// `<.001` below one in a thousand, otherwise three decimals; `*` when `p < 0.05`.
pub fn format_p(p: f64) -> String {
    let mut s = if p < 0.001 { "<.001".to_string() } else { fixed(p, 3) };
    if p < 0.05 {
        s.push('*');
    }
    s
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// `0.420*** (0.127)`.
pub fn coefficient_cell(beta: f64, se: f64, p: f64) -> String {
    format!("{}{} ({})", fixed(beta, 3), stars(p), fixed(se, 3))
}

fn bold(s: String, on: bool) -> String {
    if on {
        format!("**{s}**")
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per dimension; the higher DAMR is bold and ties bold both.
pub fn emit_damr_table(c: &DamrComparison) -> Rendered {
    let (a, b) = (&c.tutors.first, &c.tutors.second);
    let mut md = format!("| Dimension | {a} | {b} | Cohen's h | p |\n|---|---:|---:|---:|---:|\n");
    let mut csv = String::from(
        "dimension,first_tutor,second_tutor,first_matched,first_total,first_damr,second_matched,second_total,second_damr,cohens_h,p_raw,p_holm\n",
    );
    for r in &c.rows {
        let (ra, rb) = (r.first.rate, r.second.rate);
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.dimension,
            bold(fixed(ra * 100.0, 2), ra >= rb),
            bold(fixed(rb * 100.0, 2), rb >= ra),
            fixed(r.cohens_h(), 3),
            format_p(r.test.p_holm)
        ));
        csv.push_str(&format!(
            "{},{a},{b},{},{},{},{},{},{},{},{},{}\n",
            r.dimension,
            r.first.matched,
            r.first.total,
            ra,
            r.second.matched,
            r.second.total,
            rb,
            r.cohens_h(),
            r.test.p_raw,
            r.test.p_holm
        ));
    }
    md.push_str(&format!(
        "\nDAMR in percent. Fisher's exact test, Holm-adjusted across dimensions; * p < 0.05. Cohen's h is {b} relative to {a}.\n"
    ));
    Rendered { markdown: md, csv }
}

/// Mean ± sd in percent per assignment and metric; the strictly higher mean is bold.
pub fn emit_engagement_table(c: &EngagementComparison) -> Rendered {
    let (a, b) = (&c.tutors.first, &c.tutors.second);
    let mut md = format!("| Assignment | Metric | {a} | {b} | p |\n|---|---|---:|---:|---:|\n");
    let mut csv = String::from(
        "assignment,metric,first_tutor,second_tutor,first_mean,first_sd,first_n,first_n_excluded,second_mean,second_sd,second_n,second_n_excluded,u,p_raw,p_holm\n",
    );
    let cell = |mean: Option<f64>, sd: Option<f64>| match (mean, sd) {
        (Some(m), Some(s)) => format!("{} ± {}", fixed(m * 100.0, 1), fixed(s * 100.0, 1)),
        (Some(m), None) => fixed(m * 100.0, 1),
        _ => "--".to_string(),
    };
    for r in &c.rows {
        let (ma, mb) = (r.first.mean, r.second.mean);
        let (hi_a, hi_b) = match (ma, mb) {
            (Some(x), Some(y)) => (x > y, y > x),
            _ => (false, false),
        };
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.assignment_id,
            r.metric.title(),
            bold(cell(ma, r.first.sd), hi_a),
            bold(cell(mb, r.second.sd), hi_b),
            r.test.as_ref().map(|t| format_p(t.p_holm)).unwrap_or_else(|| "--".into())
        ));
        csv.push_str(&format!(
            "{},{},{a},{b},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.assignment_id,
            r.metric.name(),
            opt(ma),
            opt(r.first.sd),
            r.first.n,
            r.first.n_excluded,
            opt(mb),
            opt(r.second.sd),
            r.second.n,
            r.second.n_excluded,
            opt(r.test.as_ref().map(|t| t.statistic)),
            opt(r.test.as_ref().map(|t| t.p_raw)),
            opt(r.test.as_ref().map(|t| t.p_holm)),
        ));
    }
    md.push_str(
        "\nMean ± sd in percent. Mann-Whitney U, Holm-adjusted across assignments within each metric; * p < 0.05. SuccScore excludes feedback with no relevant sentence.\n",
    );
    Rendered { markdown: md, csv }
}

fn row_label(name: &str) -> String {
    match name {
        REL_SCORE => "RelScore".into(),
        SUCC_SCORE => "SuccScore".into(),
        other => other.to_string(),
    }
}

/// Covariate rows in table order: dimensions, engagement scores, baseline.
fn table_covariates() -> Vec<String> {
    let mut names: Vec<String> = Dimension::ALL.iter().map(|d| d.name().to_string()).collect();
    names.push(REL_SCORE.into());
    names.push(SUCC_SCORE.into());
    names.push(BASELINE.into());
    names
}

/// Coefficients with standard errors, one column per model.
pub fn emit_regression_table(models: &ModelSet) -> Rendered {
    let mut md = String::from("| | ");
    md.push_str(&ModelSpec::ALL.map(|s| s.title()).join(" | "));
    md.push_str(" |\n|---|---|---|---|\n");
    let mut csv = String::from("covariate,model,beta,se,z,p,stars,n,pseudo_r2\n");

    // covariate -> models that dropped it
    let mut dropped: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for m in &models.models {
        for d in &m.dropped {
            dropped.entry(d.as_str()).or_default().push(m.spec.name());
        }
    }

    for name in table_covariates() {
        let cells: Vec<Option<String>> = ModelSpec::ALL
            .iter()
            .map(|spec| {
                let fit = models.get(*spec).fit.as_ref()?;
                let i = fit.index_of(&name)?;
                Some(coefficient_cell(fit.coefficients[i], fit.standard_errors[i], fit.p_values[i]))
            })
            .collect();
        let expected = ModelSpec::ALL.iter().any(|s| s.covariates().contains(&name));
        if !expected || (cells.iter().all(Option::is_none) && dropped.contains_key(name.as_str())) {
            continue;
        }
        md.push_str(&format!(
            "| {} | {} |\n",
            row_label(&name),
            cells
                .into_iter()
                .map(|c| c.unwrap_or_else(|| "--".into()))
                .collect::<Vec<_>>()
                .join(" | ")
        ));
    }
    let r2: Vec<String> = ModelSpec::ALL
        .iter()
        .map(|s| match &models.get(*s).fit {
            Some(f) => fixed(f.pseudo_r2, 4),
            None => "failed".into(),
        })
        .collect();
    md.push_str(&format!("| Pseudo R² | {} |\n", r2.join(" | ")));
    let ns: Vec<String> = ModelSpec::ALL.iter().map(|s| models.get(*s).n.to_string()).collect();
    md.push_str(&format!("| n | {} |\n", ns.join(" | ")));

    md.push_str("\nLog-odds coefficients with standard errors in parentheses; * p < 0.05, ** p < 0.01, *** p < 0.001.\n");
    for (name, specs) in &dropped {
        md.push_str(&format!(
            "Omitted for lack of variance: `{name}` ({}).\n",
            specs.join(", ")
        ));
    }
    for m in &models.models {
        if let Some(e) = &m.error {
            md.push_str(&format!("The {} model could not be fitted: {e}.\n", m.spec.name()));
        }
    }

    for m in &models.models {
        let Some(fit) = &m.fit else { continue };
        for (i, name) in fit.covariates.iter().enumerate() {
            csv.push_str(&format!(
                "{name},{},{},{},{},{},{},{},{}\n",
                m.spec.name(),
                fit.coefficients[i],
                fit.standard_errors[i],
                fit.z_values[i],
                fit.p_values[i],
                stars(fit.p_values[i]),
                m.n,
                fit.pseudo_r2
            ));
        }
    }
    Rendered { markdown: md, csv }
}

/// Regression table, or a stub explaining why the models were not fitted.
pub fn emit_regression_section(p: &RegressionPayload) -> Rendered {
    match (&p.skipped, &p.models) {
        (None, Some(models)) => emit_regression_table(models),
        (reason, _) => {
            let reason = reason.clone().unwrap_or_else(|| "skipped".into());
            Rendered {
                markdown: format!("Regression: {reason}\n"),
                csv: "covariate,model,beta,se,z,p,stars,n,pseudo_r2\n".into(),
            }
        }
    }
}

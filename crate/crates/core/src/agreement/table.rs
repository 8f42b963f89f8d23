use std::fmt::Write;

use super::AgreementReport;

/// Plain-text table with one row per metric and one column per scheme:
///
/// ```text
/// Metric                  binary   multi-level
/// Percent agr.             76.8%         84.6%
/// Fleiss' k                 0.54          0.69
/// Randolph's k              0.48          0.58
/// ```
///
/// Missing columns print `absent`; an undefined Fleiss' kappa prints `undefined`.
pub fn render_table(columns: &[(&str, Option<&AgreementReport>)]) -> String {
    let width = columns.iter().map(|(name, _)| name.len()).max().unwrap_or(0).max(12) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<16}", "Metric");
    for (name, _) in columns {
        let _ = write!(out, "{name:>width$}");
    }
    out.push('\n');
    type Cell = fn(&AgreementReport) -> String;
    let rows: [(&str, Cell); 3] = [
        ("Percent agr.", |r| format!("{:.1}%", r.percent * 100.0)),
        ("Fleiss' k", |r| r.fleiss_kappa.map_or_else(|| "undefined".to_string(), |k| format!("{k:.2}"))),
        ("Randolph's k", |r| format!("{:.2}", r.randolph_kappa)),
    ];
    for (label, cell) in rows {
        let _ = write!(out, "{label:<16}");
        for (_, report) in columns {
            let text = report.map_or_else(|| "absent".to_string(), cell);
            let _ = write!(out, "{text:>width$}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(percent: f64, fleiss: Option<f64>, randolph: f64) -> AgreementReport {
        AgreementReport {
            items: 15,
            raters: 12,
            categories: vec!["HateSpeech".into(), "NotHateSpeech".into()],
            percent,
            fleiss_kappa: fleiss,
            randolph_kappa: randolph,
            marginals: vec![0.5, 0.5],
        }
    }

    #[test]
    fn layout() {
        let b = report(0.768, Some(0.54), 0.48);
        let m = report(0.846, Some(0.69), 0.58);
        let t = render_table(&[("binary", Some(&b)), ("multi-level", Some(&m))]);
        let expected = "\
Metric                  binary   multi-level
Percent agr.             76.8%         84.6%
Fleiss' k                 0.54          0.69
Randolph's k              0.48          0.58
";
        assert_eq!(t, expected);
    }

    #[test]
    fn absent_and_undefined() {
        let m = report(1.0, None, 1.0);
        let t = render_table(&[("binary", None), ("multi-level", Some(&m))]);
        assert!(t.contains("absent"));
        assert!(t.contains("undefined"));
    }
}

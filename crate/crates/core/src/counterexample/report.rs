use std::fmt;

/// Outcome of one checked statement. `Info` rows record measurements that
/// are reported but not asserted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Info => "info",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assertion {
    pub lemma: String,
    pub assertion: String,
    pub lhs: String,
    pub rhs: String,
    pub verdict: Verdict,
    pub witness: String,
}

/// Rows of checked statements plus the parameters they were checked at.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LemmaReport {
    lemma: String,
    params: Vec<(String, String)>,
    rows: Vec<Assertion>,
}

impl LemmaReport {
    pub fn new(lemma: impl Into<String>) -> Self {
        LemmaReport {
            lemma: lemma.into(),
            ..Default::default()
        }
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn with_params(mut self, params: Vec<(String, String)>) -> Self {
        self.params = params;
        self
    }

    pub fn param(&mut self, key: impl Into<String>, value: impl ToString) {
        self.params.push((key.into(), value.to_string()));
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn rows(&self) -> &[Assertion] {
        &self.rows
    }

    /// Records an asserted statement; `holds` decides the verdict.
    pub fn check(
        &mut self,
        assertion: impl Into<String>,
        lhs: impl ToString,
        rhs: impl ToString,
        holds: bool,
        witness: impl ToString,
    ) -> bool {
        self.push(
            assertion,
            lhs,
            rhs,
            if holds { Verdict::Pass } else { Verdict::Fail },
            witness,
        );
        holds
    }

    /// Records a certified comparison; an undecided comparison fails.
    pub fn check_certified(
        &mut self,
        assertion: impl Into<String>,
        lhs: impl ToString,
        rhs: impl ToString,
        decided: Option<bool>,
        witness: impl ToString,
    ) -> bool {
        let w = match decided {
            None => format!("undecided at maximal precision; {}", witness.to_string()),
            Some(_) => witness.to_string(),
        };
        self.check(assertion, lhs, rhs, decided == Some(true), w)
    }

    pub fn info(
        &mut self,
        assertion: impl Into<String>,
        lhs: impl ToString,
        rhs: impl ToString,
        witness: impl ToString,
    ) {
        self.push(assertion, lhs, rhs, Verdict::Info, witness);
    }

    fn push(
        &mut self,
        assertion: impl Into<String>,
        lhs: impl ToString,
        rhs: impl ToString,
        verdict: Verdict,
        witness: impl ToString,
    ) {
        self.rows.push(Assertion {
            lemma: self.lemma.clone(),
            assertion: assertion.into(),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            verdict,
            witness: witness.to_string(),
        });
    }

    /// Appends the rows of another report (keeping their lemma ids).
    pub fn extend(&mut self, other: LemmaReport) {
        self.rows.extend(other.rows);
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn first_failure(&self) -> Option<&Assertion> {
        self.failures().next()
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == verdict).count()
    }

    /// CSV with columns `lemma,assertion,lhs_exact,rhs_exact,verdict,witness`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lemma,assertion,lhs_exact,rhs_exact,verdict,witness\n");
        for r in &self.rows {
            let fields = [
                r.lemma.as_str(),
                r.assertion.as_str(),
                r.lhs.as_str(),
                r.rhs.as_str(),
                &r.verdict.to_string(),
                r.witness.as_str(),
            ];
            let line: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = self.lemma.to_string();
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push_str(&format!(" ({})", p.join(", ")));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "  [{}] {}: {} vs {}{}\n",
                r.verdict,
                r.assertion,
                r.lhs,
                r.rhs,
                if r.witness.is_empty() {
                    String::new()
                } else {
                    format!("  @ {}", r.witness)
                }
            ));
        }
        out.push_str(&format!(
            "  {} passed, {} failed, {} informational\n",
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::Info)
        ));
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_and_csv() {
        let mut r = LemmaReport::new("demo");
        r.check("a < b", "1/1", "2/1", true, "");
        r.info("note", "x, y", "", "");
        assert!(r.passed());
        r.check("b < a", "2/1", "1/1", false, "x=1/2^1");
        r.check_certified("undecided", "?", "?", None, "");
        assert!(!r.passed());
        assert_eq!(r.first_failure().unwrap().assertion, "b < a");
        assert_eq!(r.count(Verdict::Fail), 2);
        let csv = r.to_csv();
        assert!(csv.starts_with("lemma,assertion,lhs_exact,rhs_exact,verdict,witness\n"));
        assert!(csv.contains("demo,note,\"x, y\",,info,"));
        assert!(r.summary().contains("1 passed, 2 failed, 1 informational"));
    }
}

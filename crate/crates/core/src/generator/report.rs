use std::fmt;

use crate::testfn::TheoremCase;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    HoldsOnGrid,
    /// Worst violation found, at `(x, y)` (or `(r, 0)` for one-variable checks).
    FailsAt { x: f64, y: f64, margin: f64 },
    Inapplicable(String),
}

/// A grid point with its margin; positive margins are violations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub x: f64,
    pub y: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub id: String,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    /// Derived parameters (β, k₃, C_*, α, κ, l₀, worst margin, ...).
    pub params: Vec<(String, f64)>,
    pub notes: Vec<String>,
    /// Noise case recovered by a noise-condition check.
    pub case: Option<TheoremCase>,
}

/// Number of worst witnesses kept in a report.
const KEEP: usize = 5;

impl ConditionReport {
    pub fn new(id: impl Into<String>) -> Self {
        ConditionReport {
            id: id.into(),
            verdict: Verdict::HoldsOnGrid,
            witnesses: Vec::new(),
            params: Vec::new(),
            notes: Vec::new(),
            case: None,
        }
    }

    pub fn inapplicable(id: impl Into<String>, why: impl Into<String>) -> Self {
        let mut r = Self::new(id);
        r.verdict = Verdict::Inapplicable(why.into());
        r
    }

    /// Builds the verdict from margins at grid points: fails iff some margin
    /// exceeds `tol`; keeps the worst few points as witnesses.
    pub fn from_margins(id: impl Into<String>, margins: &[Witness], tol: f64) -> Self {
        let mut r = Self::new(id);
        let mut sorted: Vec<Witness> = margins.to_vec();
        sorted.sort_by(|a, b| b.margin.total_cmp(&a.margin));
        sorted.truncate(KEEP);
        let worst = sorted.first().copied();
        r.witnesses = sorted;
        if let Some(w) = worst {
            r.params.push(("max_margin".into(), w.margin));
            if !(w.margin <= tol) {
                r.verdict = Verdict::FailsAt { x: w.x, y: w.y, margin: w.margin };
            }
        }
        r
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::HoldsOnGrid
    }

    pub fn is_inapplicable(&self) -> bool {
        matches!(self.verdict, Verdict::Inapplicable(_))
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn with_param(mut self, key: &str, v: f64) -> Self {
        self.params.push((key.to_string(), v));
        self
    }

    pub fn verdict_str(&self) -> String {
        match &self.verdict {
            Verdict::HoldsOnGrid => "holds-on-grid".into(),
            Verdict::FailsAt { x, y, margin } => format!("fails-at(x={x}, y={y}, margin={margin:e})"),
            Verdict::Inapplicable(why) => format!("inapplicable({why})"),
        }
    }

    /// Machine-readable `key = value` lines, keys prefixed by the condition id.
    pub fn to_kv(&self) -> String {
        let mut s = format!("{}.verdict = {}\n", self.id, self.verdict_str());
        for (k, v) in &self.params {
            s.push_str(&format!("{}.{k} = {v:?}\n", self.id));
        }
        for (i, w) in self.witnesses.iter().enumerate() {
            s.push_str(&format!("{}.witness{i} = {} {} {:e}\n", self.id, w.x, w.y, w.margin));
        }
        s
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}] {}", self.id, self.verdict_str())?;
        for (k, v) in &self.params {
            writeln!(f, "  {k}: {v:?}")?;
        }
        for w in &self.witnesses {
            writeln!(f, "  witness x={} y={} margin={:e}", w.x, w.y, w.margin)?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_report_carries_witness() {
        let m = [Witness { x: 1.0, y: 0.0, margin: -1.0 }, Witness { x: 2.0, y: 0.5, margin: 0.3 }];
        let r = ConditionReport::from_margins("Eq3.1", &m, 1e-9);
        assert!(!r.holds());
        assert_eq!(r.witnesses[0].x, 2.0);
        assert!(r.to_kv().contains("Eq3.1.verdict = fails-at"));
        let ok = ConditionReport::from_margins("Eq3.1", &m[..1], 1e-9);
        assert!(ok.holds());
    }
}

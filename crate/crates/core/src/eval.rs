//! Beat matching, detection statistics and the Wilcoxon signed-rank test.

use std::fmt::Write as _;
use std::io;
use std::ops::Add;

use statrs::distribution::{ContinuousCDF, Normal};

/// Default matching window, in ms.
pub const DEFAULT_TOLERANCE_MS: i64 = 150;
/// Largest sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 15;
/// Differences (and rank ties) closer than this are considered equal.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl MatchReport {
    /// Sensitivity `TP / (TP + FN)`.
    pub fn se(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Positive predictivity `TP / (TP + FP)`.
    pub fn ppv(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn f1(&self) -> f64 {
        let (se, ppv) = (self.se(), self.ppv());
        if se + ppv == 0.0 {
            0.0
        } else {
            2.0 * se * ppv / (se + ppv)
        }
    }
}

impl Add for MatchReport {
    type Output = MatchReport;
    fn add(self, o: MatchReport) -> MatchReport {
        MatchReport {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for MatchReport {
    fn sum<I: Iterator<Item = MatchReport>>(iter: I) -> Self {
        iter.fold(MatchReport::default(), Add::add)
    }
}

/// One-to-one matching of sorted beat times within `±tol`. Each test beat,
/// in time order, takes the earliest still unmatched reference beat in its
/// window; on sorted inputs this yields a matching of maximum size.
pub fn match_beats(test: &[i64], reference: &[i64], tol: i64) -> MatchReport {
    debug_assert!(test.is_sorted() && reference.is_sorted());
    let mut tp = 0u64;
    let mut r = 0;
    for &t in test {
        while r < reference.len() && reference[r] < t - tol {
            r += 1;
        }
        if r < reference.len() && reference[r] <= t + tol {
            tp += 1;
            r += 1;
        }
    }
    MatchReport {
        tp,
        fp: test.len() as u64 - tp,
        fn_: reference.len() as u64 - tp,
    }
}

/// Mid-ranks of `values` (1-based), and the sizes of the tie groups.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] - values[order[i]] <= EPS {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided p-value of the Wilcoxon signed-rank test. Zero differences are
/// dropped and tied magnitudes share mid-ranks. Exact for at most
/// `EXACT_LIMIT` non-zero differences, otherwise a normal approximation
/// with tie and continuity corrections.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> f64 {
    let nonzero: Vec<f64> = differences.iter().copied().filter(|d| d.abs() > EPS).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&magnitudes);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    if n <= EXACT_LIMIT {
        exact_p(&ranks, w_plus)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if var <= 0.0 {
            return 1.0;
        }
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    }
}

/// Exact null distribution of `W+` over all sign assignments, built on
/// doubled ranks so mid-ranks stay integral.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w = (2.0 * w_plus).round() as usize;
    let all = (1u64 << ranks.len()) as f64;
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordScore {
    pub record: String,
    pub baseline: Option<MatchReport>,
    pub after: MatchReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub rows: Vec<RecordScore>,
    /// Counts pooled over all records.
    pub gross: RecordScore,
    /// Over per-record F1 differences, when there are baselines and at least
    /// two records.
    pub wilcoxon_p: Option<f64>,
}

pub fn summarize(rows: Vec<RecordScore>) -> EvalSummary {
    let with_baseline = rows.iter().all(|r| r.baseline.is_some());
    let gross = RecordScore {
        record: "Gross".to_string(),
        baseline: with_baseline.then(|| rows.iter().filter_map(|r| r.baseline).sum()),
        after: rows.iter().map(|r| r.after).sum(),
    };
    let wilcoxon_p = (with_baseline && rows.len() >= 2).then(|| {
        let diffs: Vec<f64> = rows
            .iter()
            .map(|r| r.after.f1() - r.baseline.expect("checked").f1())
            .collect();
        wilcoxon_signed_rank(&diffs)
    });
    EvalSummary {
        rows,
        gross,
        wilcoxon_p,
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

impl EvalSummary {
    /// Aligned plain-text table of Se, P+ and F1 in percent.
    pub fn table(&self) -> String {
        let baseline = self.gross.baseline.is_some();
        let mut header = vec!["Record".to_string()];
        if baseline {
            header.extend(["Se base", "P+ base", "F1 base"].map(String::from));
        }
        header.extend(["Se", "P+", "F1"].map(String::from));
        let line = |r: &RecordScore| {
            let mut cells = vec![r.record.clone()];
            if let Some(b) = r.baseline {
                cells.extend([pct(b.se()), pct(b.ppv()), pct(b.f1())]);
            }
            cells.extend([pct(r.after.se()), pct(r.after.ppv()), pct(r.after.f1())]);
            cells
        };
        let mut lines: Vec<Vec<String>> = vec![header];
        lines.extend(self.rows.iter().map(line));
        lines.push(line(&self.gross));
        let cols = lines[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            if i == lines.len() - 1 {
                let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
            let cells: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        if let Some(p) = self.wilcoxon_p {
            let _ = writeln!(out, "Wilcoxon signed-rank p = {p:.6}");
        }
        out
    }

    /// One CSV row per record plus the gross row; fractions, not percent.
    pub fn write_csv(&self, out: impl io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "record", "tp_base", "fp_base", "fn_base", "se_base", "ppv_base", "f1_base", "tp", "fp", "fn", "se",
            "ppv", "f1",
        ])?;
        for r in self.rows.iter().chain(std::iter::once(&self.gross)) {
            let mut rec = vec![r.record.clone()];
            match r.baseline {
                Some(b) => rec.extend([
                    b.tp.to_string(),
                    b.fp.to_string(),
                    b.fn_.to_string(),
                    format!("{:.6}", b.se()),
                    format!("{:.6}", b.ppv()),
                    format!("{:.6}", b.f1()),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
            let a = r.after;
            rec.extend([
                a.tp.to_string(),
                a.fp.to_string(),
                a.fn_.to_string(),
                format!("{:.6}", a.se()),
                format!("{:.6}", a.ppv()),
                format!("{:.6}", a.f1()),
            ]);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

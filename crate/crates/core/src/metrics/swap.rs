use super::{extract_attributes, Result, K};
use crate::data::{Factors, FACTOR_NAMES};

#[derive(Clone, Debug, PartialEq)]
pub struct SwapReport {
    pub intended: usize,
    pub success: bool,
    /// Whether each factor of the swapped image came out as intended.
    pub matches: [bool; K],
    /// Non-intended factors that changed.
    pub leaked: Vec<usize>,
}

/// Judges a swap from already-extracted attributes. A failed extraction of
/// the swapped image counts as every factor leaking.
pub fn swap_fidelity_attrs(
    source: &Factors,
    target: &Factors,
    swapped: Result<Factors>,
    intended: usize,
) -> SwapReport {
    let Ok(swapped) = swapped else {
        return SwapReport {
            intended,
            success: false,
            matches: [false; K],
            leaked: (0..K).filter(|&j| j != intended).collect(),
        };
    };
    let mut matches = [false; K];
    for j in 0..K {
        let reference = if j == intended { target } else { source };
        matches[j] = swapped.0[j] == reference.0[j];
    }
    SwapReport {
        intended,
        success: matches.iter().all(|&m| m),
        matches,
        leaked: (0..K).filter(|&j| j != intended && !matches[j]).collect(),
    }
}

/// Succeeds iff the swapped image carries the target's value for the
/// intended factor and the source's value for every other factor.
pub fn swap_fidelity(source: &[f64], target: &[f64], swapped: &[f64], intended: usize) -> Result<SwapReport> {
    let s = extract_attributes(source)?;
    let t = extract_attributes(target)?;
    Ok(swap_fidelity_attrs(&s, &t, extract_attributes(swapped), intended))
}

/// Aggregate over many swap trials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SwapSummary {
    pub trials: usize,
    pub successes: usize,
    /// Per intended factor: trials and successes.
    pub per_intended: [(usize, usize); K],
    /// `leakage[i][j]`: trials intending `i` in which `j` leaked.
    pub leakage: [[usize; K]; K],
}

impl SwapSummary {
    pub fn add(&mut self, r: &SwapReport) {
        self.trials += 1;
        self.per_intended[r.intended].0 += 1;
        if r.success {
            self.successes += 1;
            self.per_intended[r.intended].1 += 1;
        }
        for &j in &r.leaked {
            self.leakage[r.intended][j] += 1;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "swap_success_rate: {} ({} / {})\n\n[leakage]\nintended,trials,successes,{}\n",
            self.rate(),
            self.successes,
            self.trials,
            FACTOR_NAMES.join(",")
        );
        for i in 0..K {
            let (n, ok) = self.per_intended[i];
            if n == 0 {
                continue;
            }
            let cells: Vec<String> = self.leakage[i].iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{},{n},{ok},{}\n", FACTOR_NAMES[i], cells.join(",")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::render;
    use crate::metrics::MetricsError;

    #[test]
    fn unchanged_source_succeeds_when_intended_already_matches() {
        let src = Factors([0, 1, 2, 3, 4, 1]);
        let tgt = Factors([2, 3, 5, 0, 4, 2]);
        let r = swap_fidelity(&render(&src), &render(&tgt), &render(&src), 4).unwrap();
        assert!(r.success);
        assert!(r.leaked.is_empty());
    }

    #[test]
    fn returning_the_target_leaks_everything_else() {
        let src = Factors([0, 1, 2, 3, 4, 1]);
        let tgt = Factors([2, 3, 5, 0, 1, 2]);
        let r = swap_fidelity(&render(&src), &render(&tgt), &render(&tgt), 2).unwrap();
        assert!(!r.success);
        assert_eq!(r.leaked, vec![0, 1, 3, 4, 5]);
        assert!(r.matches[2]);
    }

    #[test]
    fn failed_extraction_counts_as_leakage() {
        let f = Factors([0; 6]);
        let r = swap_fidelity_attrs(&f, &f, Err(MetricsError::NoObject), 0);
        assert!(!r.success);
        assert_eq!(r.leaked.len(), K - 1);
        let mut s = SwapSummary::default();
        s.add(&r);
        s.add(&swap_fidelity_attrs(&f, &f, Ok(f), 3));
        assert_eq!(s.rate(), 0.5);
        assert!(s.to_text().starts_with("swap_success_rate: 0.5 (1 / 2)"));
    }
}

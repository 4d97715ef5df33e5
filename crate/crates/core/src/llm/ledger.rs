use super::Purpose;
use serde::{Deserialize, Serialize};

/// Approximate token count: one token per four characters, rounded up.
/// Not tokenizer-exact; used for cost trends only.
pub fn count_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// One backend attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// Exploration step during which the query was issued.
    pub step: usize,
    pub purpose: Purpose,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    /// Whether the attempt produced a well-formed answer.
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTotals {
    pub queries: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenTotals {
    pub fn total_tokens(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    records: Vec<QueryRecord>,
    totals: TokenTotals,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, r: QueryRecord) {
        self.totals.queries += 1;
        self.totals.input_tokens += r.input_tokens;
        self.totals.output_tokens += r.output_tokens;
        self.records.push(r);
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn totals(&self) -> TokenTotals {
        self.totals
    }

    pub fn query_count(&self) -> usize {
        self.records.len()
    }

    pub fn count_for(&self, purpose: Purpose) -> usize {
        self.records.iter().filter(|r| r.purpose == purpose).count()
    }

    pub fn tokens_for(&self, purpose: Purpose) -> u64 {
        self.records
            .iter()
            .filter(|r| r.purpose == purpose)
            .map(|r| r.input_tokens + r.output_tokens)
            .sum()
    }

    pub fn from_records(records: Vec<QueryRecord>) -> Self {
        let mut l = TokenLedger::new();
        for r in records {
            l.record(r);
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_formula() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("abcdefgh"), 2);
        assert_eq!(count_tokens("abcdefghi"), 3);
        assert_eq!(count_tokens("é"), 1);
        // a 507-token prompt spans 2025..=2028 characters
        assert_eq!(count_tokens(&"x".repeat(2028)), 507);
        assert_eq!(count_tokens(&"x".repeat(2025)), 507);
        assert_eq!(count_tokens(&"x".repeat(2029)), 508);
    }

    #[test]
    fn totals_track_records() {
        let mut l = TokenLedger::new();
        for (i, p) in [Purpose::Grouping, Purpose::Input, Purpose::Grouping].into_iter().enumerate() {
            l.record(QueryRecord {
                step: i,
                purpose: p,
                input_tokens: 10 * (i as u64 + 1),
                output_tokens: 3,
                latency_ms: 0,
                ok: true,
            });
        }
        let t = l.totals();
        assert_eq!(t.queries, 3);
        assert_eq!(t.queries as usize, l.query_count());
        assert_eq!(t.input_tokens, l.records().iter().map(|r| r.input_tokens).sum::<u64>());
        assert_eq!(t.output_tokens, 9);
        assert_eq!(l.count_for(Purpose::Grouping), 2);
        assert_eq!(l.tokens_for(Purpose::Input), 23);
        assert_eq!(TokenLedger::from_records(l.records().to_vec()), l);
    }
}

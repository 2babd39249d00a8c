//! Translation quality metrics: corpus BLEU-4, ROUGE-L, and an
//! exact-match METEOR variant.
//!
//! The METEOR here matches unigrams exactly (no stemming or synonyms), so
//! its absolute values are not comparable with scores from the full
//! metric; it is named `meteor_exact` throughout to make that visible.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// An ordered list of token strings.
pub type TokenSeq = Vec<String>;

const MAX_NGRAM: usize = 4;
/// ROUGE-L recall weight (the reference implementation's default).
const ROUGE_BETA: f64 = 1.2;

/// Per-pair scores plus the corpus aggregates.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor_exact: f64,
    pub per_sentence: Vec<SentenceScores>,
}

#[derive(Debug, Clone)]
pub struct SentenceScores {
    pub id: String,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor_exact: f64,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU-4: clipped n-gram matches and totals are summed over the
/// whole corpus before the precisions are combined. No smoothing unless
/// `smooth_eps` is set, in which case zero counts are replaced by it.
pub fn bleu4_corpus(
    hypotheses: &[TokenSeq],
    references: &[TokenSeq],
    smooth_eps: Option<f64>,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matches = [0usize; MAX_NGRAM];
    let mut totals = [0usize; MAX_NGRAM];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=MAX_NGRAM {
            let ref_counts = ngram_counts(reference, n);
            for (gram, &count) in &ngram_counts(hyp, n) {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
            }
            totals[n - 1] += hyp.len().saturating_sub(n - 1);
        }
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_NGRAM {
        if totals[n] == 0 {
            return Ok(0.0);
        }
        let m = if matches[n] == 0 {
            match smooth_eps {
                Some(eps) => eps,
                None => return Ok(0.0),
            }
        } else {
            matches[n] as f64
        };
        log_sum += (m / totals[n] as f64).ln();
    }
    let precision_geo_mean = (log_sum / MAX_NGRAM as f64).exp();
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * precision_geo_mean)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Sentence-level ROUGE-L F-measure from the longest common subsequence.
pub fn rouge_l(hypothesis: &[String], reference: &[String]) -> Result<f64> {
    if hypothesis.is_empty() || reference.is_empty() {
        return Err(Error::EmptySequence("rouge_l"));
    }
    let m = lcs_len(hypothesis, reference) as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let p = m / hypothesis.len() as f64;
    let r = m / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    Ok((1.0 + b2) * p * r / (r + b2 * p))
}

/// Exact-match METEOR: greedy left-to-right unigram alignment, preferring
/// the reference position that extends the current chunk, then the
/// earliest unmatched occurrence.
pub fn meteor_exact(hypothesis: &[String], reference: &[String]) -> Result<f64> {
    if hypothesis.is_empty() || reference.is_empty() {
        return Err(Error::EmptySequence("meteor_exact"));
    }
    let mut used = vec![false; reference.len()];
    let mut alignment: Vec<Option<usize>> = Vec::with_capacity(hypothesis.len());
    let mut prev_ref: Option<usize> = None;
    for tok in hypothesis {
        let contiguous = prev_ref
            .map(|p| p + 1)
            .filter(|&j| j < reference.len() && !used[j] && &reference[j] == tok);
        let pick = contiguous.or_else(|| {
            reference
                .iter()
                .enumerate()
                .position(|(j, r)| !used[j] && r == tok)
        });
        if let Some(j) = pick {
            used[j] = true;
            prev_ref = Some(j);
            alignment.push(Some(j));
        } else {
            prev_ref = None;
            alignment.push(None);
        }
    }
    let matched: Vec<usize> = alignment.iter().flatten().copied().collect();
    let m = matched.len() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    // chunks: maximal runs contiguous in both hypothesis and reference
    let mut chunks = 0usize;
    let mut prev: Option<usize> = None;
    for a in &alignment {
        match (a, prev) {
            (Some(j), Some(p)) if *j == p + 1 => {}
            (Some(_), _) => chunks += 1,
            (None, _) => {}
        }
        prev = *a;
    }
    let p = m / hypothesis.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    Ok(f_mean * (1.0 - penalty))
}

/// Score a corpus of aligned (id, hypothesis, reference) triples.
pub fn evaluate_corpus(pairs: &[(String, TokenSeq, TokenSeq)]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let hyps: Vec<TokenSeq> = pairs.iter().map(|(_, h, _)| h.clone()).collect();
    let refs: Vec<TokenSeq> = pairs.iter().map(|(_, _, r)| r.clone()).collect();
    let mut per_sentence = Vec::with_capacity(pairs.len());
    for (id, hyp, reference) in pairs {
        let sent_rouge = if hyp.is_empty() {
            0.0
        } else {
            rouge_l(hyp, reference)?
        };
        let sent_meteor = if hyp.is_empty() {
            0.0
        } else {
            meteor_exact(hyp, reference)?
        };
        let sent_bleu = if hyp.is_empty() {
            0.0
        } else {
            bleu4_corpus(
                std::slice::from_ref(hyp),
                std::slice::from_ref(reference),
                None,
            )?
        };
        per_sentence.push(SentenceScores {
            id: id.clone(),
            bleu4: sent_bleu,
            rouge_l: sent_rouge,
            meteor_exact: sent_meteor,
        });
    }
    // sum sentence scores in sorted order so the corpus means do not
    // depend on pair order
    let ordered_mean = |vals: &mut Vec<f64>| {
        vals.sort_by(|a, b| a.total_cmp(b));
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let mut rouges: Vec<f64> = per_sentence.iter().map(|s| s.rouge_l).collect();
    let mut meteors: Vec<f64> = per_sentence.iter().map(|s| s.meteor_exact).collect();
    Ok(EvalReport {
        bleu4: bleu4_corpus(&hyps, &refs, None)?,
        rouge_l: ordered_mean(&mut rouges),
        meteor_exact: ordered_mean(&mut meteors),
        per_sentence,
    })
}

impl EvalReport {
    /// CSV rendering: one row per sentence plus a final CORPUS row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,bleu4,rouge_l,meteor_exact\n");
        for s in &self.per_sentence {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.id, s.bleu4, s.rouge_l, s.meteor_exact
            ));
        }
        out.push_str(&format!(
            "CORPUS,{},{},{}\n",
            self.bleu4, self.rouge_l, self.meteor_exact
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> TokenSeq {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bleu_perfect_match() {
        let h = vec![toks("a b c d e"), toks("x y z w q")];
        assert!((bleu4_corpus(&h, &h, None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_disjoint_is_zero() {
        let h = vec![toks("a b c d")];
        let r = vec![toks("x y z w")];
        assert_eq!(bleu4_corpus(&h, &r, None).unwrap(), 0.0);
    }

    #[test]
    fn bleu_cat_mat_example() {
        // p1=5/6, p2=3/5, p3=1/4, p4=0 -> zero without smoothing
        let h = vec![toks("the cat sat on the mat")];
        let r = vec![toks("the cat is on the mat")];
        assert_eq!(bleu4_corpus(&h, &r, None).unwrap(), 0.0);
        // with epsilon smoothing the score is the smoothed geometric mean
        let smoothed = bleu4_corpus(&h, &r, Some(1e-9)).unwrap();
        let expected = ((5.0f64 / 6.0).ln() + (3.0f64 / 5.0).ln() + (1.0f64 / 4.0).ln()
            + (1e-9f64 / 3.0).ln())
            / 4.0;
        assert!((smoothed - expected.exp()).abs() < 1e-15);
    }

    #[test]
    fn bleu_brevity_penalty() {
        // hypothesis shorter than reference: all n-grams match, bp < 1
        let h = vec![toks("a b c d e")];
        let r = vec![toks("a b c d e f g h")];
        let got = bleu4_corpus(&h, &r, None).unwrap();
        let p = [5.0 / 5.0, 4.0 / 4.0, 3.0 / 3.0, 2.0 / 2.0];
        let geo = p.iter().map(|x: &f64| x.ln()).sum::<f64>() / 4.0;
        let expected = (1.0f64 - 8.0 / 5.0).exp() * geo.exp();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn bleu_errors() {
        assert!(matches!(
            bleu4_corpus(&[], &[], None),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            bleu4_corpus(&[toks("a")], &[], None),
            Err(Error::LengthMismatch(_))
        ));
    }

    /// Brute-force BLEU oracle: enumerate n-grams explicitly.
    fn bleu_oracle(hyps: &[TokenSeq], refs: &[TokenSeq]) -> f64 {
        let mut log_sum = 0.0;
        for n in 1..=4usize {
            let mut matched = 0usize;
            let mut total = 0usize;
            for (h, r) in hyps.iter().zip(refs) {
                let hgrams: Vec<&[String]> = if h.len() >= n {
                    h.windows(n).collect()
                } else {
                    vec![]
                };
                let rgrams: Vec<&[String]> = if r.len() >= n {
                    r.windows(n).collect()
                } else {
                    vec![]
                };
                total += hgrams.len();
                let mut uniq: Vec<&[String]> = hgrams.clone();
                uniq.dedup();
                let mut seen: Vec<&[String]> = Vec::new();
                for g in hgrams.iter() {
                    if seen.contains(g) {
                        continue;
                    }
                    seen.push(g);
                    let hc = hgrams.iter().filter(|x| x == &g).count();
                    let rc = rgrams.iter().filter(|x| x == &g).count();
                    matched += hc.min(rc);
                }
            }
            if total == 0 || matched == 0 {
                return 0.0;
            }
            log_sum += (matched as f64 / total as f64).ln();
        }
        let hyp_len: usize = hyps.iter().map(Vec::len).sum();
        let ref_len: usize = refs.iter().map(Vec::len).sum();
        let bp = if hyp_len < ref_len {
            (1.0 - ref_len as f64 / hyp_len as f64).exp()
        } else {
            1.0
        };
        bp * (log_sum / 4.0).exp()
    }

    /// Classic full-table LCS oracle.
    fn lcs_oracle(a: &[String], b: &[String]) -> usize {
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                dp[i][j] = if a[i - 1] == b[j - 1] {
                    dp[i - 1][j - 1] + 1
                } else {
                    dp[i - 1][j].max(dp[i][j - 1])
                };
            }
        }
        dp[a.len()][b.len()]
    }

    fn arb_sentence() -> impl Strategy<Value = TokenSeq> {
        proptest::collection::vec(
            proptest::sample::select(vec!["a", "b", "c", "d", "e"]),
            1..12,
        )
        .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn bleu_matches_brute_force_oracle(
            pairs in proptest::collection::vec((arb_sentence(), arb_sentence()), 1..6)
        ) {
            let hyps: Vec<TokenSeq> = pairs.iter().map(|(h, _)| h.clone()).collect();
            let refs: Vec<TokenSeq> = pairs.iter().map(|(_, r)| r.clone()).collect();
            let got = bleu4_corpus(&hyps, &refs, None).unwrap();
            prop_assert_eq!(got, bleu_oracle(&hyps, &refs));
        }

        #[test]
        fn rouge_lcs_matches_dp_oracle(h in arb_sentence(), r in arb_sentence()) {
            prop_assert_eq!(lcs_len(&h, &r), lcs_oracle(&h, &r));
        }

        #[test]
        fn scores_in_unit_interval(h in arb_sentence(), r in arb_sentence()) {
            for v in [
                rouge_l(&h, &r).unwrap(),
                meteor_exact(&h, &r).unwrap(),
                bleu4_corpus(std::slice::from_ref(&h), std::slice::from_ref(&r), None).unwrap(),
            ] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn rouge_identical() {
        let s = toks("a b c d");
        assert!((rouge_l(&s, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_disjoint() {
        assert_eq!(rouge_l(&toks("a b"), &toks("c d")).unwrap(), 0.0);
    }

    #[test]
    fn rouge_worked_example() {
        // LCS("a b c d", "a c b d") = 3, P = R = 0.75 -> F = 0.75
        let f = rouge_l(&toks("a b c d"), &toks("a c b d")).unwrap();
        assert!((f - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rouge_empty_errors() {
        assert!(matches!(
            rouge_l(&[], &toks("a")),
            Err(Error::EmptySequence(_))
        ));
    }

    #[test]
    fn meteor_no_common_tokens() {
        assert_eq!(meteor_exact(&toks("a b"), &toks("c d")).unwrap(), 0.0);
    }

    #[test]
    fn meteor_identical_single_chunk() {
        for m in [1usize, 3, 7] {
            let s: TokenSeq = (0..m).map(|i| format!("t{i}")).collect();
            let got = meteor_exact(&s, &s).unwrap();
            let want = 1.0 - 0.5 / (m as f64).powi(3);
            assert!((got - want).abs() < 1e-12, "m={m}: {got} vs {want}");
        }
    }

    #[test]
    fn meteor_swapped_pair() {
        // m=2, ch=2, F=1 -> 1 - 0.5 = 0.5
        let got = meteor_exact(&toks("a b"), &toks("b a")).unwrap();
        assert!((got - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corpus_report_and_csv_roundtrip() {
        let pairs = vec![
            ("v1".to_string(), toks("a b c d"), toks("a b c d")),
            ("v2".to_string(), toks("x y z w"), toks("x y z w")),
        ];
        let report = evaluate_corpus(&pairs).unwrap();
        assert!((report.bleu4 - 1.0).abs() < 1e-12);
        assert!((report.rouge_l - 1.0).abs() < 1e-12);
        assert!(report.meteor_exact < 1.0); // chunk penalty keeps it below 1

        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("id,"));
        assert!(lines[3].starts_with("CORPUS,"));
        // numeric cells parse back to the same values
        let cells: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(cells[1].parse::<f64>().unwrap(), report.bleu4);
        assert_eq!(cells[2].parse::<f64>().unwrap(), report.rouge_l);
        assert_eq!(cells[3].parse::<f64>().unwrap(), report.meteor_exact);
    }

    #[test]
    fn corpus_order_invariance() {
        let mut pairs = vec![
            ("a".to_string(), toks("a b c"), toks("a b d")),
            ("b".to_string(), toks("x y"), toks("x y z")),
            ("c".to_string(), toks("p q r s"), toks("p r q s")),
        ];
        let r1 = evaluate_corpus(&pairs).unwrap();
        pairs.reverse();
        let r2 = evaluate_corpus(&pairs).unwrap();
        assert_eq!(r1.bleu4, r2.bleu4);
        assert_eq!(r1.rouge_l, r2.rouge_l);
        assert_eq!(r1.meteor_exact, r2.meteor_exact);
    }

    #[test]
    fn corpus_empty_errors() {
        assert!(matches!(evaluate_corpus(&[]), Err(Error::EmptyCorpus)));
    }
}

mod common;

use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;

use common::{brute_force_top_n, first_occurrence, full_scan_dedup, query_vector, random_store, same_ranking};
use quote_core::corpus::{merge_similar_chunks, token_jaccard, Chunk, MergeScope};
use quote_core::eval::{score_multihop, score_single_hop, EvalReport, MultiHopCase, SingleHopCase};
use quote_core::question_gen::{format_qa_lines, parse_qa_lines, GeneratedQA};
use quote_core::retrieval::deduplicate;
use quote_core::store::{DocKind, ScoredHit};

fn hits_strategy() -> impl Strategy<Value = Vec<ScoredHit>> {
    prop::collection::vec((0u8..12, 0u32..1000), 0..100).prop_map(|raw| {
        let mut hits: Vec<ScoredHit> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (chunk, score))| ScoredHit {
                doc_key: format!("k{i:03}"),
                score: f64::from(score) / 1000.0,
                chunk_id: format!("c{chunk}"),
                title: String::new(),
                chunk_text: String::new(),
                kind: DocKind::QuestionOnly,
                question: None,
            })
            .collect();
        hits.sort_by(|a, b| quote_core::store::hit_order(a.score, &a.doc_key, b.score, &b.doc_key));
        hits
    })
}

proptest! {
    #[test]
    fn dedup_matches_first_occurrence(hits in hits_strategy()) {
        let want = first_occurrence(&hits);
        let out = deduplicate(hits.clone());
        let got: Vec<String> = out.iter().map(|h| h.chunk_id.clone()).collect();
        prop_assert_eq!(&got, &want);
        // the kept hit is the first one for its chunk
        for h in &out {
            let first = hits.iter().find(|x| x.chunk_id == h.chunk_id).unwrap();
            prop_assert_eq!(&first.doc_key, &h.doc_key);
        }
        prop_assert!(out.windows(2).all(|w| w[0].score >= w[1].score));
        prop_assert_eq!(deduplicate(out.clone()), out);
    }

    #[test]
    fn top_n_matches_brute_force(seed in 0u64..10_000, n in 1usize..60, dim in 2usize..40) {
        let store = random_store(seed, 150, dim, 40, true);
        let q = query_vector(seed, dim);
        let got = store.query_top_n(&q, n).unwrap();
        prop_assert!(same_ranking(&got, &brute_force_top_n(&store, &q.values, n, |_| true)));
        let bare = store.query_top_n_where(&q, n, |d| d.kind == DocKind::BareChunk).unwrap();
        let want = brute_force_top_n(&store, &q.values, n, |d| d.kind == DocKind::BareChunk);
        prop_assert!(same_ranking(&bare, &want));
    }

    #[test]
    fn over_retrieve_then_dedup_is_prefix_of_full_scan(
        seed in 0u64..10_000, k in 1usize..10, m in 1usize..8,
    ) {
        let store = random_store(seed, 200, 16, 30, false);
        let q = query_vector(seed, 16);
        let mut got: Vec<String> = deduplicate(store.query_top_n(&q, k * m).unwrap())
            .into_iter()
            .map(|h| h.chunk_id)
            .collect();
        got.truncate(k);
        let oracle = full_scan_dedup(&store, &q.values, k);
        prop_assert_eq!(&got[..], &oracle[..got.len()]);
    }

    #[test]
    fn qa_lines_round_trip(
        items in prop::collection::vec(("[A-Za-z][A-Za-z ,']{0,30}", "[A-Za-z0-9 ,.']{0,30}"), 0..12)
    ) {
        let pairs: Vec<GeneratedQA> = items
            .into_iter()
            .map(|(q, a)| GeneratedQA {
                question: format!("{}?", q.trim_end()),
                answer: a.trim().to_string(),
                chunk_id: "c".into(),
            })
            .collect();
        let parsed = parse_qa_lines(&format_qa_lines(&pairs), "c");
        prop_assert_eq!(parsed.malformed, 0);
        prop_assert_eq!(parsed.pairs, pairs);
    }

    #[test]
    fn merge_is_a_partition_and_refines_with_threshold(
        texts in prop::collection::vec(prop::collection::vec(0u8..8, 1..8), 1..14),
        lo in 0.0f64..1.0, gap in 0.0f64..0.5,
    ) {
        let words = ["uk", "united", "kingdom", "trade", "border", "port", "food", "rules"];
        let chunks: Vec<Chunk> = texts
            .iter()
            .enumerate()
            .map(|(i, w)| Chunk {
                chunk_id: format!("c{i:02}"),
                doc_id: "d".into(),
                title: if i % 2 == 0 { "A".into() } else { "B".into() },
                ordinal: i,
                text: w.iter().map(|&x| words[x as usize]).collect::<Vec<_>>().join(" "),
            })
            .collect();
        let hi = (lo + gap).min(1.0);
        let loose = merge_similar_chunks(&chunks, lo, MergeScope::WithinTitle).unwrap();
        let strict = merge_similar_chunks(&chunks, hi, MergeScope::WithinTitle).unwrap();

        for groups in [&loose, &strict] {
            let mut seen = HashSet::new();
            for g in groups.iter() {
                prop_assert!(g.members.contains(&g.group_id));
                let titles: BTreeSet<&str> = g.members.iter()
                    .map(|m| chunks.iter().find(|c| &c.chunk_id == m).unwrap().title.as_str())
                    .collect();
                prop_assert_eq!(titles.len(), 1);
                for m in &g.members {
                    prop_assert!(seen.insert(m.clone()));
                }
            }
            prop_assert_eq!(seen.len(), chunks.len());
        }
        let group_of: HashMap<&String, &String> = loose
            .iter()
            .flat_map(|g| g.members.iter().map(move |m| (m, &g.group_id)))
            .collect();
        for g in &strict {
            let parents: HashSet<&String> = g.members.iter().map(|m| group_of[m]).collect();
            prop_assert_eq!(parents.len(), 1);
        }
        for a in &chunks {
            for b in &chunks {
                if a.title == b.title && token_jaccard(&a.text, &b.text) >= lo {
                    prop_assert_eq!(group_of[&a.chunk_id], group_of[&b.chunk_id]);
                }
            }
        }
    }

    #[test]
    fn metric_invariants_hold_on_random_rankings(
        seed in any::<u64>(), n_queries in 1usize..30,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ks = [1, 3, 5, 10, 20];
        let single: Vec<SingleHopCase> = (0..n_queries)
            .map(|i| {
                let retrieved = (0..rng.random_range(0..25))
                    .map(|_| {
                        let t = rng.random_range(0..4);
                        (format!("t{t}-c{}", rng.random_range(0..5)), format!("t{t}"))
                    })
                    .collect();
                let t = rng.random_range(0..4);
                SingleHopCase {
                    query_id: format!("q{i}"),
                    gt_title: format!("t{t}"),
                    gt_keys: [format!("t{t}-c{}", rng.random_range(0..5))].into(),
                    retrieved,
                }
            })
            .collect();
        let (metrics, per_query) = score_single_hop(&single, &ks).unwrap();
        let report = report_with(metrics, per_query, &ks);
        prop_assert!(report.check_invariants().is_ok(), "{:?}", report.check_invariants());

        let multi: Vec<MultiHopCase> = (0..n_queries)
            .map(|i| MultiHopCase {
                query_id: format!("m{i}"),
                first_match_rank: (0..rng.random_range(1..5))
                    .map(|_| rng.random_bool(0.7).then(|| rng.random_range(0..25)))
                    .collect(),
                retrieved: vec![],
            })
            .collect();
        let (metrics, per_query) = score_multihop(&multi, &ks).unwrap();
        let report = report_with(metrics, per_query, &ks);
        prop_assert!(report.check_invariants().is_ok(), "{:?}", report.check_invariants());
    }
}

fn report_with(
    metrics: Vec<quote_core::eval::KMetrics>,
    per_query: Vec<quote_core::eval::QueryOutcome>,
    ks: &[usize],
) -> EvalReport {
    EvalReport {
        dataset: quote_core::datasets::DatasetKind::Squad,
        mode: quote_core::RetrievalMode::Quote,
        k_values: ks.to_vec(),
        multiplier: 5,
        hyde_target: None,
        metrics,
        query_count: per_query.len(),
        excluded: vec![],
        total_seconds: 0.0,
        ms_per_query: 0.0,
        index_seconds: None,
        per_query,
    }
}

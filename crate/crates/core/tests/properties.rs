use std::collections::BTreeSet;

use proptest::prelude::*;

use credcomm::community::{
    louvain, louvain_observed, modularity, refine, Partition, RefinementConfig,
};
use credcomm::credibility::Bucket;
use credcomm::credibility::{
    bucket, cross_validate_with, fold_assignment, CredibilityConfig, CredibilityScore, TfIdfModel,
};
use credcomm::graph::{build_directed, symmetrize, FollowerGraph};
use credcomm::ingest::{read_tweets, Criteria, FollowerEdge, LabeledPage, Tweet, WebPage};
use credcomm::links::{
    classify_tweet, filter_pages, CategoryCounts, DomainRules, LinkCategory, NullResolver,
};
use credcomm::measures::{
    build_profiles, compute_measures, internal_density, rank_percentiles, Measure, MeasureVector,
    TweetFacts, NUM_MEASURES,
};

fn follower_edges() -> impl Strategy<Value = Vec<FollowerEdge>> {
    prop::collection::vec((0usize..25, 0usize..25), 1..80).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(a, b)| FollowerEdge::new(format!("u{a}"), format!("u{b}")))
            .collect()
    })
}

fn weighted_graph(max_n: usize) -> impl Strategy<Value = FollowerGraph> {
    (2..max_n).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0.1f64..3.0), 0..4 * n).prop_map(move |raw| {
            let pairs: Vec<(usize, usize, f64)> =
                raw.into_iter().filter(|(u, v, _)| u != v).collect();
            FollowerGraph::with_nodes(n, &pairs)
        })
    })
}

fn is_total(p: &Partition, n: usize) -> bool {
    p.len() == n
        && p.assignment().iter().all(|&c| c < p.num_communities())
        && p.sizes().iter().all(|&s| s > 0)
        && p.sizes().iter().sum::<usize>() == n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_is_conserved(edges in follower_edges()) {
        let d = build_directed(&edges);
        let g = symmetrize(&d);
        let followers: BTreeSet<&str> = edges
            .iter()
            .filter(|e| e.from_user != e.to_user)
            .map(|e| e.from_user.as_str())
            .collect();
        let directed: f64 = (0..d.node_count())
            .flat_map(|u| d.out_edges(u).iter().map(|&(_, w)| w))
            .sum();
        prop_assert!((g.total_weight() - followers.len() as f64).abs() < 1e-9);
        prop_assert!((directed - followers.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_order_independent(edges in follower_edges(), rot in 0usize..80) {
        let g = symmetrize(&build_directed(&edges));
        for u in 0..g.node_count() {
            for &(v, w) in g.neighbors(u) {
                prop_assert_eq!(w, g.weight(v, u));
            }
        }
        let mut shuffled = edges.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        prop_assert_eq!(g, symmetrize(&build_directed(&shuffled)));
    }

    #[test]
    fn louvain_improves_on_singletons(g in weighted_graph(30), seed in any::<u64>()) {
        let n = g.node_count();
        let p = louvain(&g, seed);
        prop_assert!(is_total(&p, n));
        if g.total_weight() > 0.0 {
            let q = modularity(&g, &p).unwrap();
            let q0 = modularity(&g, &Partition::singletons(n)).unwrap();
            prop_assert!(q >= q0 - 1e-12);
        }
        prop_assert_eq!(p, louvain(&g, seed));
    }

    #[test]
    fn louvain_passes_are_monotone(g in weighted_graph(30), seed in any::<u64>()) {
        let mut events = Vec::new();
        louvain_observed(&g, seed, &mut |e| events.push(e.clone()));
        for e in &events {
            prop_assert!(e.modularity_after >= e.modularity_before - 1e-12, "{:?}", e);
        }
    }

    #[test]
    fn refine_respects_the_cap(
        g in weighted_graph(40),
        max_size in 2usize..12,
        min_frac in 0usize..100,
        seed in any::<u64>(),
    ) {
        let min_size = 1 + min_frac % max_size;
        let cfg = RefinementConfig { max_size, min_size, max_rounds: 20, seed };
        let out = refine(&g, &cfg);
        prop_assert!(is_total(&out.partition, g.node_count()));
        prop_assert!(out.partition.max_size() <= max_size);
        let again = refine(&g, &cfg);
        prop_assert_eq!(out.partition, again.partition);
    }

    #[test]
    fn tweet_counters_add_up(kinds in prop::collection::vec(0u8..5, 0..60)) {
        let mut text = String::new();
        for (i, k) in kinds.iter().enumerate() {
            let line = match k {
                0 => format!(r#"{{"tweet_id":"t{i}","user_id":"a","lang":"en"}}"#),
                1 => format!(r#"{{"tweet_id":"t{i}","user_id":"a","lang":"fr"}}"#),
                2 => format!(r#"{{"tweet_id":"t{i}","user_id":"a"}}"#),
                3 => "{not json".to_string(),
                _ => r#"{"tweet_id":"dup","user_id":"a","lang":"en"}"#.to_string(),
            };
            text.push_str(&line);
            text.push('\n');
        }
        let load = read_tweets(text.as_bytes()).unwrap();
        let s = &load.stats;
        prop_assert_eq!(s.lines, kinds.len());
        prop_assert_eq!(
            s.loaded + s.duplicates + s.non_english + s.missing_lang + s.malformed,
            s.lines
        );
        prop_assert_eq!(load.tweets.len(), s.loaded);
        let again = read_tweets(text.as_bytes()).unwrap();
        prop_assert_eq!(load.tweets, again.tweets);
    }

    #[test]
    fn categories_are_exhaustive(urls in prop::collection::vec(
        prop::collection::vec(prop::sample::select(vec![
            "https://pubmed.ncbi.nlm.nih.gov/1/",
            "https://www.youtube.com/watch?v=x",
            "https://www.reddit.com/r/a",
            "https://example.com/story",
            "https://instagram.com/p/1",
        ]), 0..4),
        0..40,
    )) {
        let rules = DomainRules::default();
        let mut counts = CategoryCounts::default();
        for (i, u) in urls.iter().enumerate() {
            let t = Tweet {
                tweet_id: format!("t{i}"),
                user_id: "a".into(),
                text: String::new(),
                urls: u.iter().map(|s| s.to_string()).collect(),
                like_count: 0,
                is_retweet: false,
                lang: "en".into(),
            };
            let c = classify_tweet(&t, &NullResolver, &rules).category;
            prop_assert_eq!(c == LinkCategory::NoUrl, t.urls.is_empty());
            prop_assert_eq!(c, classify_tweet(&t, &NullResolver, &rules).category);
            counts.add(c);
        }
        prop_assert_eq!(counts.total(), urls.len());
    }

    #[test]
    fn kept_pages_are_long_enough(sizes in prop::collection::vec((0usize..600, any::<bool>()), 0..20)) {
        let pages: Vec<WebPage> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(words, available))| {
                WebPage::new(format!("https://p{i}.org/"), &"word ".repeat(words), "en", available)
            })
            .collect();
        let f = filter_pages(pages);
        prop_assert!(f.kept.iter().all(|p| p.word_count >= 300));
        prop_assert_eq!(f.kept.len() + f.unavailable + f.non_english + f.too_short, sizes.len());
    }

    #[test]
    fn tfidf_norms_and_idf_order(docs in prop::collection::vec(
        prop::collection::vec(prop::sample::select(vec!["alpha", "beta", "gamma", "delta", "omega"]), 1..8),
        1..12,
    )) {
        let texts: Vec<String> = docs.iter().map(|d| d.join(" ")).collect();
        let m = TfIdfModel::fit(&texts).unwrap();
        for t in &texts {
            let v = m.transform(t);
            let norm = v.norm();
            prop_assert!(v.iter().all(|(_, x)| x.is_finite()));
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
        let df = |term: &str| texts.iter().filter(|t| t.split(' ').any(|w| w == term)).count();
        let terms = ["alpha", "beta", "gamma", "delta", "omega"];
        for a in terms {
            for b in terms {
                if let (Some(ia), Some(ib)) = (m.idf(a), m.idf(b)) {
                    if df(a) <= df(b) {
                        prop_assert!(ia >= ib);
                    }
                }
            }
        }
    }

    #[test]
    fn folds_partition_items(n in 2usize..600, k in 2usize..15, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = fold_assignment(n, k, seed);
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn score_is_the_criterion_sum(bits in prop::array::uniform7(any::<bool>())) {
        let s = CredibilityScore::from_predictions(Criteria(bits));
        prop_assert_eq!(s.score, bits.iter().filter(|&&b| b).count() as u32);
        prop_assert_eq!(s.bucket, bucket(s.score).unwrap());
    }

    #[test]
    fn measures_stay_in_range(
        tweets in prop::collection::vec(
            (0u64..1000, 0u8..4, prop::collection::vec(0u8..3, 0..3)),
            0..60,
        ),
        g in weighted_graph(12),
        followers in prop::collection::vec(0u64..500, 12),
    ) {
        let facts: Vec<TweetFacts> = tweets
            .iter()
            .map(|(likes, c, links)| TweetFacts {
                like_count: *likes,
                category: [
                    LinkCategory::PubMedDirect,
                    LinkCategory::WebPage,
                    LinkCategory::SocialMedia,
                    LinkCategory::NoUrl,
                ][*c as usize],
                scored_links: links.iter().map(|b| [Bucket::Low, Bucket::Medium, Bucket::High][*b as usize]).collect(),
            })
            .collect();
        let members: Vec<usize> = (0..g.node_count()).collect();
        let (m, _) = compute_measures(&g, &members, &facts, &followers[..members.len()]);
        for pm in [
            Measure::VideosPct,
            Measure::LowCredPct,
            Measure::HighCredPct,
            Measure::PubArticlesPct,
            Measure::NoUrlsPct,
        ] {
            if let Some(v) = m.get(pm) {
                prop_assert!((0.0..=100.0).contains(&v), "{:?} = {}", pm, v);
            }
        }
        let d = m.get(Measure::InternalDensity).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));

        let linked = facts.iter().filter(|t| t.category != LinkCategory::NoUrl).count();
        if linked > 0 {
            let cat2 = facts.iter().filter(|t| t.category == LinkCategory::WebPage).count();
            let share = 100.0 * cat2 as f64 / linked as f64;
            let total = m.get(Measure::VideosPct).unwrap() + m.get(Measure::PubArticlesPct).unwrap() + share;
            prop_assert!((total - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn like_scaling_keeps_percentiles(
        communities in prop::collection::vec(prop::collection::vec((0u64..100, 0u8..4), 1..20), 2..8),
        c in 2u64..50,
    ) {
        let g = FollowerGraph::with_nodes(1, &[]);
        let profile = |scale: u64| {
            let rows = communities
                .iter()
                .enumerate()
                .map(|(id, ts)| {
                    let facts: Vec<TweetFacts> = ts
                        .iter()
                        .map(|&(likes, cat)| TweetFacts {
                            like_count: likes * scale,
                            category: [
                                LinkCategory::PubMedDirect,
                                LinkCategory::WebPage,
                                LinkCategory::SocialMedia,
                                LinkCategory::NoUrl,
                            ][cat as usize],
                            scored_links: vec![],
                        })
                        .collect();
                    (id, 1, compute_measures(&g, &[0], &facts, &[3]).0)
                })
                .collect();
            build_profiles(rows)
        };
        let base = profile(1);
        let scaled = profile(c);
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(a.percentiles, b.percentiles);
            for m in [Measure::VideosAvgLikes, Measure::PubArticlesAvgLikes, Measure::NoUrlsAvgLikes, Measure::CommAvgLikes] {
                match (a.measures.get(m), b.measures.get(m)) {
                    (Some(x), Some(y)) => prop_assert!((y - x * c as f64).abs() <= 1e-9 * y.abs().max(1.0)),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
    }

    #[test]
    fn percentiles_preserve_order(values in prop::collection::vec(prop::option::of(0u32..20), 1..30)) {
        let vals: Vec<Option<f64>> = values.iter().map(|v| v.map(f64::from)).collect();
        let p = rank_percentiles(&vals);
        for i in 0..vals.len() {
            prop_assert_eq!(p[i].is_some(), vals[i].is_some());
            for j in 0..vals.len() {
                if let (Some(a), Some(b)) = (vals[i], vals[j]) {
                    if a < b {
                        prop_assert!(p[i].unwrap() < p[j].unwrap());
                    } else if a == b {
                        prop_assert_eq!(p[i], p[j]);
                    }
                }
            }
        }

        let rows = vals
            .iter()
            .enumerate()
            .map(|(id, v)| {
                let mut mv = MeasureVector::default();
                mv.set(Measure::NoUrlsPct, *v);
                (id, 1, mv)
            })
            .collect();
        let profiles = build_profiles(rows);
        let k = Measure::NoUrlsPct.index();
        let devs: Vec<f64> = profiles.iter().filter_map(|p| p.deviations[k]).collect();
        prop_assert!(devs.iter().all(|d| (-0.5..=0.5).contains(d)));
        let distinct: BTreeSet<u32> = values.iter().flatten().copied().collect();
        if distinct.len() == devs.len() && !devs.is_empty() {
            let mean = devs.iter().sum::<f64>() / devs.len() as f64;
            prop_assert!(mean.abs() < 1e-12);
        }
        prop_assert!(profiles.iter().all(|p| p.percentiles.len() == NUM_MEASURES));
    }
}

#[test]
fn density_extremes() {
    let g = FollowerGraph::with_nodes(5, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (3, 4, 0.5)]);
    assert_eq!(internal_density(&g, &[4]).0, 0.0);
    assert_eq!(internal_density(&g, &[0, 1, 2]).0, 1.0);
}

const WORDS: [&str; 8] = [
    "cite", "author", "date", "source", "noise", "filler", "other", "extra",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn held_out_labels_never_reach_the_fold_model(
        docs in prop::collection::vec((prop::collection::vec(0usize..8, 5..15), prop::array::uniform7(any::<bool>())), 24..36),
        fold in 0usize..3,
        seed in any::<u64>(),
    ) {
        let texts: Vec<String> = docs.iter().map(|(w, _)| w.iter().map(|&i| WORDS[i]).collect::<Vec<_>>().join(" ")).collect();
        let labeled: Vec<LabeledPage> = docs
            .iter()
            .enumerate()
            .map(|(i, (_, bits))| LabeledPage { url: format!("https://l{i}.org/"), criteria: Criteria(*bits) })
            .collect();
        let mut cfg = CredibilityConfig { folds: 3, seed, ..CredibilityConfig::default() };
        cfg.svm.epochs = 20;
        cfg.forest.n_trees = 5;

        let base = cross_validate_with(&labeled, &texts, &cfg, true).unwrap();
        let test = base.folds[fold].test.clone();
        let mut permuted = labeled.clone();
        for (j, &i) in test.iter().enumerate() {
            let other = test[(j + 1) % test.len()];
            let mut flipped = labeled[other].criteria;
            flipped.0[j % 7] = !flipped.0[j % 7];
            permuted[i].criteria = flipped;
        }
        let after = cross_validate_with(&permuted, &texts, &cfg, true).unwrap();
        prop_assert_eq!(&base.folds[fold].test, &after.folds[fold].test);
        prop_assert_eq!(&base.folds[fold].models, &after.folds[fold].models);
    }
}

//! Synthetic follower graphs and tweet/page corpora with known ground truth.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::credibility::tfidf::tokenize;
use crate::credibility::{bucket, Bucket};
use crate::error::{Error, Result};
use crate::ingest::{Criteria, FollowerEdge, LabeledPage, Tweet, CRITERION_COLUMNS, NUM_CRITERIA};
use crate::links::{FixtureRecord, LinkCategory, MIN_PAGE_WORDS};
use crate::measures;
use crate::seed;

const PROBABILITY_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Graphs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedPartitionSpec {
    pub n: usize,
    pub k: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Explicit block sizes summing to `n`; overrides the even split.
    pub block_sizes: Option<Vec<usize>>,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for PlantedPartitionSpec {
    fn default() -> Self {
        PlantedPartitionSpec {
            n: 200,
            k: 4,
            p_in: 0.3,
            p_out: 0.005,
            block_sizes: None,
            seed: 0,
        }
    }
}

impl PlantedPartitionSpec {
    pub fn new(n: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        PlantedPartitionSpec {
            n,
            k,
            p_in,
            p_out,
            block_sizes: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::input("graph: need 1 <= k <= n"));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return Err(Error::input("graph: probabilities must lie in [0, 1]"));
        }
        if self.p_out > self.p_in {
            return Err(Error::input("graph: p_out must not exceed p_in"));
        }
        if let Some(sizes) = &self.block_sizes {
            if sizes.len() != self.k || sizes.iter().sum::<usize>() != self.n || sizes.contains(&0)
            {
                return Err(Error::input(
                    "graph: block_sizes must list k positive sizes summing to n",
                ));
            }
        }
        Ok(())
    }

    /// Block sizes: explicit, or `n / k` each with the remainder handed to
    /// the first blocks.
    pub fn sizes(&self) -> Vec<usize> {
        match &self.block_sizes {
            Some(s) => s.clone(),
            None => (0..self.k)
                .map(|b| self.n / self.k + usize::from(b < self.n % self.k))
                .collect(),
        }
    }
}

/// Zero-padded so that lexicographic and numeric order agree.
pub fn user_id(index: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("u{index:0width$}")
}

#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub users: Vec<String>,
    pub edges: Vec<FollowerEdge>,
    /// Block of every user, in `users` order.
    pub truth: Partition,
}

/// Sample each ordered pair independently: `p_in` inside a block, `p_out`
/// across blocks. Blocks are contiguous runs of user indices.
pub fn gen_graph(spec: &PlantedPartitionSpec) -> Result<PlantedGraph> {
    spec.validate()?;
    let blocks: Vec<usize> = spec
        .sizes()
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let users: Vec<String> = (0..spec.n).map(|i| user_id(i, spec.n)).collect();
    let mut rng = seed::rng(seed::derive(spec.seed, "graph"));
    let mut edges = Vec::new();
    for u in 0..spec.n {
        for v in 0..spec.n {
            if u == v {
                continue;
            }
            let p = if blocks[u] == blocks[v] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.gen_bool(p) {
                edges.push(FollowerEdge::new(users[u].clone(), users[v].clone()));
            }
        }
    }
    Ok(PlantedGraph {
        users,
        edges,
        truth: Partition::from_labels(&blocks),
    })
}

// ---------------------------------------------------------------------------
// Corpora

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunityMix {
    /// Shares of categories 1 to 4 (article, web page, social, no URL).
    pub category_mix: [f64; 4],
    /// Shares of low, medium and high credibility among web-page links.
    pub credibility_mix: [f64; 3],
}

const PRESET_MIXES: [([f64; 4], [f64; 3]); 4] = [
    ([0.2, 0.5, 0.2, 0.1], [0.25, 0.5, 0.25]),
    ([0.1, 0.3, 0.4, 0.2], [0.5, 0.3, 0.2]),
    ([0.3, 0.4, 0.1, 0.2], [0.1, 0.4, 0.5]),
    ([0.05, 0.25, 0.2, 0.5], [0.4, 0.2, 0.4]),
];

const DEFAULT_KEYWORDS: [[&str; 6]; NUM_CRITERIA] = [
    [
        "peerreviewed",
        "university",
        "institute",
        "researchers",
        "journal",
        "laboratory",
    ],
    [
        "randomized",
        "cohort",
        "participants",
        "dataset",
        "statistically",
        "trial",
    ],
    [
        "limitations",
        "uncertainty",
        "caveat",
        "drawback",
        "confounding",
        "preliminary",
    ],
    [
        "measured",
        "cautious",
        "proportionate",
        "nuanced",
        "modest",
        "balanced",
    ],
    [
        "vaccination",
        "immunization",
        "dose",
        "antibody",
        "schedule",
        "booster",
    ],
    [
        "simply",
        "plainly",
        "everyday",
        "explained",
        "readers",
        "summary",
    ],
    [
        "funded",
        "sponsor",
        "grant",
        "disclosure",
        "foundation",
        "acknowledge",
    ],
];

const DEFAULT_FILLER: &str = "the of and to in is that for on with as was at by from this \
    be are it an or have has were which their there about after before during people \
    city weather market street morning evening family school story local week year day \
    report news update today new said says will would could should around many some \
    other more most time place public group team community page post share comment \
    read view also again then still just";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCorpusSpec {
    pub tweets_per_user: usize,
    /// One mix per community; empty cycles through built-in presets.
    pub communities: Vec<CommunityMix>,
    /// Seven keyword lists, one per criterion.
    pub keywords: Vec<Vec<String>>,
    pub filler: Vec<String>,
    /// Times each keyword of a satisfied criterion is injected.
    pub keyword_repeats: usize,
    /// Inclusive range of filler words per page.
    pub page_words: [usize; 2],
    pub labeled_pages: usize,
    /// Extra unlinked pages below the word minimum.
    pub short_pages: usize,
    /// Allocate categories and buckets by exact counts instead of sampling.
    pub quota: bool,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        SynthCorpusSpec {
            tweets_per_user: 5,
            communities: Vec::new(),
            keywords: DEFAULT_KEYWORDS
                .iter()
                .map(|l| l.iter().map(|s| s.to_string()).collect())
                .collect(),
            filler: DEFAULT_FILLER
                .split_whitespace()
                .map(str::to_string)
                .collect(),
            keyword_repeats: 3,
            page_words: [320, 400],
            labeled_pages: 500,
            short_pages: 5,
            quota: true,
            seed: 0,
        }
    }
}

fn check_mix(values: &[f64], what: &str) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if values.iter().any(|&p| !(0.0..=1.0).contains(&p))
        || (sum - 1.0).abs() > PROBABILITY_TOLERANCE
    {
        return Err(Error::input(format!(
            "corpus: {what} {values:?} must be probabilities summing to 1"
        )));
    }
    Ok(())
}

impl SynthCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tweets_per_user == 0 {
            return Err(Error::input("corpus: tweets_per_user must be positive"));
        }
        for m in &self.communities {
            check_mix(&m.category_mix, "category_mix")?;
            check_mix(&m.credibility_mix, "credibility_mix")?;
        }
        if self.keywords.len() != NUM_CRITERIA || self.keywords.iter().any(Vec::is_empty) {
            return Err(Error::input(format!(
                "corpus: keywords must hold {NUM_CRITERIA} non-empty lists"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for word in self.keywords.iter().flatten() {
            if tokenize(word) != [word.as_str()] {
                return Err(Error::input(format!(
                    "corpus: keyword {word:?} must be a single lowercase token"
                )));
            }
            if !seen.insert(word.as_str()) {
                return Err(Error::input(format!(
                    "corpus: keyword {word:?} listed twice"
                )));
            }
        }
        if self.filler.is_empty() || self.filler.iter().any(|w| seen.contains(w.as_str())) {
            return Err(Error::input(
                "corpus: filler must be non-empty and disjoint from the keywords",
            ));
        }
        let [lo, hi] = self.page_words;
        if lo < MIN_PAGE_WORDS || lo > hi {
            return Err(Error::input(format!(
                "corpus: page_words must satisfy {MIN_PAGE_WORDS} <= min <= max"
            )));
        }
        if self.labeled_pages < 10 {
            return Err(Error::input("corpus: need at least 10 labeled pages"));
        }
        if self.keyword_repeats == 0 {
            return Err(Error::input("corpus: keyword_repeats must be positive"));
        }
        Ok(())
    }

    pub fn mix(&self, community: usize) -> CommunityMix {
        if self.communities.is_empty() {
            let (category_mix, credibility_mix) = PRESET_MIXES[community % PRESET_MIXES.len()];
            CommunityMix {
                category_mix,
                credibility_mix,
            }
        } else {
            self.communities[community % self.communities.len()].clone()
        }
    }
}

/// Largest-remainder allocation of `total` items over `shares`; leftover
/// units go to the largest fractional parts, ties to the lower index.
pub fn quota_counts(shares: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn sample_index(rng: &mut ChaCha8Rng, shares: &[f64]) -> usize {
    let mut x: f64 = rng.gen();
    for (i, &p) in shares.iter().enumerate() {
        if x < p {
            return i;
        }
        x -= p;
    }
    shares.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draw `total` labels, exactly by quota or independently by share, in a
/// shuffled order.
fn allocate(rng: &mut ChaCha8Rng, shares: &[f64], total: usize, quota: bool) -> Vec<usize> {
    if quota {
        let mut out: Vec<usize> = quota_counts(shares, total)
            .into_iter()
            .enumerate()
            .flat_map(|(i, c)| std::iter::repeat(i).take(c))
            .collect();
        out.shuffle(rng);
        out
    } else {
        (0..total).map(|_| sample_index(rng, shares)).collect()
    }
}

/// A page as written to `pages.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub url: String,
    pub content: String,
    pub lang: String,
    pub available: bool,
}

/// Planted facts about one community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityTruth {
    pub block: usize,
    pub users: Vec<String>,
    pub tweets: usize,
    /// Tweets per category 1 to 4.
    pub category_counts: [usize; 4],
    /// Web-page links per bucket: low, medium, high.
    pub bucket_counts: [usize; 3],
    pub pub_articles_pct: Option<f64>,
    pub videos_pct: Option<f64>,
    pub no_urls_pct: Option<f64>,
    pub low_cred_pct: Option<f64>,
    pub high_cred_pct: Option<f64>,
}

fn pct(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub tweets: Vec<Tweet>,
    pub pages: Vec<PageRecord>,
    pub labels: Vec<LabeledPage>,
    pub fixtures: Vec<FixtureRecord>,
    /// Planted criteria of every linked page, keyed by page URL.
    pub page_criteria: Vec<(String, Criteria)>,
    pub communities: Vec<CommunityTruth>,
}

fn score_range(b: Bucket) -> std::ops::RangeInclusive<usize> {
    match b {
        Bucket::Low => 0..=2,
        Bucket::Medium => 3..=4,
        Bucket::High => 5..=7,
    }
}

const BUCKETS: [Bucket; 3] = [Bucket::Low, Bucket::Medium, Bucket::High];

fn criteria_with_score(rng: &mut ChaCha8Rng, score: usize) -> Criteria {
    let mut idx: Vec<usize> = (0..NUM_CRITERIA).collect();
    idx.shuffle(rng);
    let mut bits = [false; NUM_CRITERIA];
    for &i in &idx[..score] {
        bits[i] = true;
    }
    Criteria(bits)
}

/// Filler text with each keyword of every satisfied criterion injected
/// `keyword_repeats` times at random positions.
pub fn page_text(rng: &mut ChaCha8Rng, criteria: &Criteria, spec: &SynthCorpusSpec) -> String {
    let [lo, hi] = spec.page_words;
    let n = rng.gen_range(lo..=hi);
    let mut words: Vec<&str> = (0..n)
        .map(|_| {
            spec.filler
                .choose(rng)
                .expect("filler is non-empty")
                .as_str()
        })
        .collect();
    for (c, list) in spec.keywords.iter().enumerate() {
        if !criteria.get(c) {
            continue;
        }
        for word in list {
            for _ in 0..spec.keyword_repeats {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, word.as_str());
            }
        }
    }
    words.join(" ")
}

fn short_text(rng: &mut ChaCha8Rng, spec: &SynthCorpusSpec, words: usize) -> String {
    (0..words)
        .map(|_| {
            spec.filler
                .choose(rng)
                .expect("filler is non-empty")
                .as_str()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generate tweets for every user of `truth`, the pages their web links
/// point at, the resolver fixtures for the shortened links, and an
/// independent set of labelled pages.
pub fn gen_corpus(
    spec: &SynthCorpusSpec,
    users: &[String],
    truth: &Partition,
) -> Result<SynthCorpus> {
    spec.validate()?;
    assert_eq!(users.len(), truth.len(), "one block per user");
    let mut rng = seed::rng(seed::derive(spec.seed, "corpus"));
    let mut tweets = Vec::new();
    let mut pages = Vec::new();
    let mut fixtures = Vec::new();
    let mut page_criteria = Vec::new();
    let mut communities = Vec::new();
    let mut link_id = 0usize;

    for (block, members) in truth.members().into_iter().enumerate() {
        let mix = spec.mix(block);
        let total = members.len() * spec.tweets_per_user;
        let categories = allocate(&mut rng, &mix.category_mix, total, spec.quota);
        let web_links = categories.iter().filter(|&&c| c == 1).count();
        let mut buckets =
            allocate(&mut rng, &mix.credibility_mix, web_links, spec.quota).into_iter();

        let mut category_counts = [0usize; 4];
        let mut bucket_counts = [0usize; 3];
        for (slot, &cat) in categories.iter().enumerate() {
            let author = &users[members[slot / spec.tweets_per_user]];
            category_counts[cat] += 1;
            link_id += 1;
            let urls = match LinkCategory::ALL[cat] {
                LinkCategory::PubMedDirect => {
                    vec![format!(
                        "https://pubmed.ncbi.nlm.nih.gov/{}/",
                        30_000_000 + link_id
                    )]
                }
                LinkCategory::SocialMedia => {
                    let url = match rng.gen_range(0..3) {
                        0 => format!("https://www.youtube.com/watch?v=v{link_id}"),
                        1 => format!("https://www.facebook.com/posts/{link_id}"),
                        _ => format!("https://www.instagram.com/p/p{link_id}/"),
                    };
                    vec![url]
                }
                LinkCategory::WebPage => {
                    let b = buckets.next().expect("one bucket per web link");
                    bucket_counts[b] += 1;
                    let score = rng.gen_range(score_range(BUCKETS[b]));
                    let criteria = criteria_with_score(&mut rng, score);
                    let short = format!("https://t.co/s{link_id:07}");
                    let expanded = format!("https://news-{link_id}.example.com/story");
                    pages.push(PageRecord {
                        url: expanded.clone(),
                        content: page_text(&mut rng, &criteria, spec),
                        lang: "en".into(),
                        available: true,
                    });
                    fixtures.push(FixtureRecord {
                        short_url: short.clone(),
                        expanded_url: expanded.clone(),
                        links_to_pubmed: false,
                    });
                    page_criteria.push((expanded, criteria));
                    vec![short]
                }
                LinkCategory::NoUrl => Vec::new(),
            };
            let words = rng.gen_range(6..=14);
            tweets.push(Tweet {
                tweet_id: String::new(),
                user_id: author.clone(),
                text: short_text(&mut rng, spec, words),
                urls,
                like_count: rng.gen_range(0..=200),
                is_retweet: rng.gen_bool(0.2),
                lang: "en".into(),
            });
        }
        let link_bearing = category_counts[..3].iter().sum();
        communities.push(CommunityTruth {
            block,
            users: members.iter().map(|&u| users[u].clone()).collect(),
            tweets: total,
            category_counts,
            bucket_counts,
            pub_articles_pct: pct(category_counts[0], link_bearing),
            videos_pct: pct(category_counts[2], link_bearing),
            no_urls_pct: pct(category_counts[3], total),
            low_cred_pct: pct(bucket_counts[0], web_links),
            high_cred_pct: pct(bucket_counts[2], web_links),
        });
    }
    let width = tweets.len().to_string().len();
    for (i, t) in tweets.iter_mut().enumerate() {
        t.tweet_id = format!("t{i:0width$}");
    }

    let mut labels = Vec::with_capacity(spec.labeled_pages);
    for i in 0..spec.labeled_pages {
        let criteria = Criteria(std::array::from_fn(|_| rng.gen_bool(0.5)));
        let url = format!("https://labeled-{i}.example.org/article");
        pages.push(PageRecord {
            url: url.clone(),
            content: page_text(&mut rng, &criteria, spec),
            lang: "en".into(),
            available: true,
        });
        labels.push(LabeledPage { url, criteria });
    }
    for i in 0..spec.short_pages {
        pages.push(PageRecord {
            url: format!("https://brief-{i}.example.net/"),
            content: short_text(&mut rng, spec, 100),
            lang: "en".into(),
            available: true,
        });
    }

    Ok(SynthCorpus {
        tweets,
        pages,
        labels,
        fixtures,
        page_criteria,
        communities,
    })
}

// ---------------------------------------------------------------------------
// Full datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub graph: PlantedPartitionSpec,
    pub corpus: SynthCorpusSpec,
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::input(format!("invalid synth spec: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.corpus.validate()
    }
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub graph: PlantedGraph,
    pub corpus: SynthCorpus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    /// Planted block of every user.
    pub partition: Vec<(String, usize)>,
    pub communities: Vec<CommunityTruth>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut graph_spec = spec.graph.clone();
    graph_spec.seed = spec.seed;
    let mut corpus_spec = spec.corpus.clone();
    corpus_spec.seed = spec.seed;
    let graph = gen_graph(&graph_spec)?;
    let corpus = gen_corpus(&corpus_spec, &graph.users, &graph.truth)?;
    Ok(SynthDataset { graph, corpus })
}

impl SynthDataset {
    pub fn truth(&self, seed: u64) -> Truth {
        Truth {
            seed,
            partition: self
                .graph
                .users
                .iter()
                .enumerate()
                .map(|(i, u)| (u.clone(), self.graph.truth.community_of(i)))
                .collect(),
            communities: self.corpus.communities.clone(),
        }
    }

    pub fn tweets_jsonl(&self) -> Result<String> {
        jsonl(&self.corpus.tweets)
    }

    pub fn pages_jsonl(&self) -> Result<String> {
        jsonl(&self.corpus.pages)
    }

    pub fn fixtures_jsonl(&self) -> Result<String> {
        jsonl(&self.corpus.fixtures)
    }

    pub fn followers_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["from_user", "to_user"])?;
        for e in &self.graph.edges {
            wtr.write_record([&e.from_user, &e.to_user])?;
        }
        csv_string(wtr)
    }

    pub fn labels_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["url"];
        header.extend(CRITERION_COLUMNS);
        wtr.write_record(&header)?;
        for l in &self.corpus.labels {
            let mut row = vec![l.url.clone()];
            row.extend(l.criteria.0.iter().map(|&b| u8::from(b).to_string()));
            wtr.write_record(&row)?;
        }
        csv_string(wtr)
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn csv_string(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::invariant(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invariant(e.to_string()))
}

/// Bucket implied by a page's planted criteria.
pub fn planted_bucket(criteria: &Criteria) -> Bucket {
    bucket(criteria.sum()).expect("at most seven criteria")
}

/// Planted measures that must come back exactly after the pipeline, as
/// `(measure, value)` pairs.
pub fn expected_measures(t: &CommunityTruth) -> [(measures::Measure, Option<f64>); 5] {
    use measures::Measure::*;
    [
        (PubArticlesPct, t.pub_articles_pct),
        (VideosPct, t.videos_pct),
        (NoUrlsPct, t.no_urls_pct),
        (LowCredPct, t.low_cred_pct),
        (HighCredPct, t.high_cred_pct),
    ]
}

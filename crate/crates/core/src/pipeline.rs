//! The pipeline stages. Each stage reads its inputs from files, writes its
//! outputs atomically under `<out_dir>/<stage>/` and records a manifest.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::community::{refine, Partition, RoundRecord};
use crate::config::RunConfig;
use crate::credibility::{score_page, train_model_set, Algorithm, Bucket};
use crate::error::{Error, Result};
use crate::graph::{
    build_directed_with_users, symmetrize, DirectedGraph, FollowerGraph, WEIGHT_TOLERANCE,
};
use crate::ingest::{self, Tweet, CRITERION_COLUMNS, NUM_CRITERIA};
use crate::links::{
    classify_tweet, filter_pages, CategoryCounts, DomainRules, FixtureResolver, TweetLinks,
};
use crate::measures::{self, build_profiles, build_viz, community_links, Measure, TweetFacts};
use crate::synth::{self, SynthSpec};

pub const DETECT: &str = "detect";
pub const CATEGORIZE: &str = "categorize";
pub const SCORE: &str = "score";
pub const CHARACTERIZE: &str = "characterize";

pub const PARTITION_FILE: &str = "partition.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const MEASURES_FILE: &str = "measures.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, InputDigest>,
    /// Output file (relative to the stage directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub counters: serde_json::Value,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// What a stage wrote plus a human-readable summary for the terminal.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: String,
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects a stage's inputs and outputs for its manifest.
struct StageWriter {
    stage: &'static str,
    dir: PathBuf,
    inputs: BTreeMap<String, InputDigest>,
    outputs: BTreeMap<String, String>,
}

impl StageWriter {
    fn new(stage: &'static str, dir: PathBuf) -> Self {
        StageWriter {
            stage,
            dir,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Record an input under its configured (unresolved) path.
    fn input(&mut self, name: &str, shown: &Path, full: &Path) -> Result<()> {
        self.inputs.insert(
            name.to_string(),
            InputDigest {
                path: shown.to_string_lossy().replace('\\', "/"),
                sha256: sha256_file(full)?,
            },
        );
        Ok(())
    }

    fn config_input(&mut self, cfg: &RunConfig, name: &str) -> Result<()> {
        let shown = match name {
            "followers" => cfg.inputs.followers.as_ref(),
            "tweets" => cfg.inputs.tweets.as_ref(),
            "pages" => cfg.inputs.pages.as_ref(),
            "labels" => cfg.inputs.labels.as_ref(),
            "resolver" => cfg.inputs.resolver.as_ref(),
            "domains" => cfg.inputs.domains.as_ref(),
            _ => None,
        };
        match shown {
            Some(p) => self.input(name, p, &cfg.resolve(p)),
            None => Ok(()),
        }
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(rel), bytes)?;
        self.outputs
            .insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn finish(
        self,
        config_hash: String,
        seed: u64,
        counters: serde_json::Value,
        summary: String,
    ) -> Result<StageReport> {
        let manifest = Manifest {
            stage: self.stage.to_string(),
            config_hash,
            seed,
            inputs: self.inputs,
            outputs: self.outputs,
            counters,
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        write_atomic(&self.dir.join(MANIFEST_FILE), json.as_bytes())?;
        Ok(StageReport {
            dir: self.dir,
            manifest,
            summary,
        })
    }
}

fn to_json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn csv_bytes(wtr: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    wtr.into_inner()
        .map_err(|e| Error::invariant(format!("csv buffer: {e}")))
}

// ---------------------------------------------------------------------------
// Shared loading

struct Network {
    directed: DirectedGraph,
    graph: FollowerGraph,
    edges_loaded: usize,
    /// Tweet authors that appear in no follower edge.
    tweet_only_users: usize,
    counters: serde_json::Value,
}

/// Followers plus, when configured, tweet authors as extra nodes.
fn load_network(cfg: &RunConfig, w: &mut StageWriter, tweets: Option<&[Tweet]>) -> Result<Network> {
    let path = cfg.require("followers")?;
    w.config_input(cfg, "followers")?;
    let load = ingest::load_followers(&path)?;
    if load.edges.is_empty() {
        return Err(Error::input(format!(
            "{}: no edges (rows {}, malformed {}, self-follows {})",
            path.display(),
            load.stats.rows,
            load.stats.malformed,
            load.stats.self_follows
        )));
    }
    let authors = tweets
        .unwrap_or_default()
        .iter()
        .map(|t| t.user_id.as_str());
    let directed = build_directed_with_users(&load.edges, authors);
    let expected = directed.follower_count() as f64;
    let total = directed.total_weight();
    if (total - expected).abs() > WEIGHT_TOLERANCE * expected.max(1.0) {
        return Err(Error::invariant(format!(
            "directed weight {total} differs from follower count {expected}"
        )));
    }
    let graph = symmetrize(&directed);
    if (graph.total_weight() - total).abs() > WEIGHT_TOLERANCE * expected.max(1.0) {
        return Err(Error::invariant(format!(
            "undirected weight {} differs from directed weight {total}",
            graph.total_weight()
        )));
    }
    let in_edges: HashSet<&str> = load
        .edges
        .iter()
        .flat_map(|e| [e.from_user.as_str(), e.to_user.as_str()])
        .collect();
    Ok(Network {
        edges_loaded: load.edges.len(),
        tweet_only_users: graph.node_count() - in_edges.len(),
        counters: serde_json::to_value(&load.stats)?,
        directed,
        graph,
    })
}

fn load_tweets_if_configured(
    cfg: &RunConfig,
    w: &mut StageWriter,
) -> Result<Option<(Vec<Tweet>, serde_json::Value)>> {
    match cfg.optional("tweets") {
        Some(path) => {
            w.config_input(cfg, "tweets")?;
            let load = ingest::load_tweets(&path)?;
            Ok(Some((load.tweets, serde_json::to_value(&load.stats)?)))
        }
        None => Ok(None),
    }
}

fn link_context(cfg: &RunConfig, w: &mut StageWriter) -> Result<(FixtureResolver, DomainRules)> {
    let resolver = match cfg.optional("resolver") {
        Some(p) => {
            w.config_input(cfg, "resolver")?;
            FixtureResolver::load(p)?
        }
        None => FixtureResolver::default(),
    };
    let rules = match cfg.optional("domains") {
        Some(p) => {
            w.config_input(cfg, "domains")?;
            DomainRules::load(p)?
        }
        None => DomainRules::default(),
    };
    Ok((resolver, rules))
}

fn histogram_lines(hist: &BTreeMap<String, usize>) -> String {
    let mut bins: Vec<(usize, &String, usize)> = hist
        .iter()
        .map(|(k, &v)| {
            let lo = k
                .split('-')
                .next()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0);
            (lo, k, v)
        })
        .collect();
    bins.sort();
    let mut out = String::new();
    for (_, k, v) in bins {
        let _ = writeln!(out, "  {k:>11}: {v}");
    }
    out
}

// ---------------------------------------------------------------------------
// detect

/// Build the follower graph, run Louvain with size refinement and write
/// `partition.csv` and `refinement.jsonl`.
pub fn run_detect(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let mut w = StageWriter::new(DETECT, cfg.stage_dir(DETECT));
    let tweets = load_tweets_if_configured(cfg, &mut w)?;
    let net = load_network(cfg, &mut w, tweets.as_ref().map(|t| t.0.as_slice()))?;
    let rcfg = cfg.refinement();
    let outcome = refine(&net.graph, &rcfg);
    let p = &outcome.partition;
    if p.len() != net.graph.node_count() {
        return Err(Error::invariant("partition does not cover every user"));
    }
    if p.max_size() > rcfg.max_size {
        return Err(Error::invariant(format!(
            "community of {} users exceeds max_size {}",
            p.max_size(),
            rcfg.max_size
        )));
    }

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user_id", "community_id"])?;
    for (node, id) in net.graph.users().ids().iter().enumerate() {
        wtr.write_record([id.as_str(), &p.community_of(node).to_string()])?;
    }
    w.write(PARTITION_FILE, &csv_bytes(wtr)?)?;
    let mut log = String::new();
    for r in &outcome.log {
        log.push_str(&serde_json::to_string(r)?);
        log.push('\n');
    }
    w.write("refinement.jsonl", log.as_bytes())?;

    let last: &RoundRecord = outcome.log.last().expect("initial round is logged");
    let counters = json!({
        "followers": net.counters,
        "users": net.graph.node_count(),
        "users_with_followees": net.directed.follower_count(),
        "tweet_only_users": net.tweet_only_users,
        "directed_edges": net.edges_loaded,
        "undirected_edges": net.graph.edge_count(),
        "total_weight": net.graph.total_weight(),
        "communities": p.num_communities(),
        "largest": last.largest,
        "smallest": last.smallest,
        "modularity": last.modularity,
        "rounds": outcome.rounds,
        "fixpoint": outcome.fixpoint,
        "size_histogram": last.size_histogram,
    });
    let summary = format!(
        "{} users, {} edges -> {} communities ({} refinement rounds, {})\ncommunity sizes:\n{}",
        net.graph.node_count(),
        net.graph.edge_count(),
        p.num_communities(),
        outcome.rounds,
        if outcome.fixpoint {
            "fixpoint"
        } else {
            "round cap reached"
        },
        histogram_lines(&last.size_histogram)
    );
    w.finish(cfg.hash(), cfg.seed, counters, summary)
}

// ---------------------------------------------------------------------------
// categorize

struct Categorized {
    tweets: Vec<Tweet>,
    links: Vec<TweetLinks>,
    counts: CategoryCounts,
    tweet_counters: serde_json::Value,
}

fn categorize_tweets(cfg: &RunConfig, w: &mut StageWriter) -> Result<Categorized> {
    cfg.require("tweets")?;
    let (tweets, tweet_counters) = load_tweets_if_configured(cfg, w)?.expect("tweets configured");
    let (resolver, rules) = link_context(cfg, w)?;
    let links: Vec<TweetLinks> = tweets
        .iter()
        .map(|t| classify_tweet(t, &resolver, &rules))
        .collect();
    let mut counts = CategoryCounts::default();
    for l in &links {
        counts.add(l.category);
    }
    let empty = tweets.iter().filter(|t| t.urls.is_empty()).count();
    if counts.total() != tweets.len() || counts.cat4 != empty {
        return Err(Error::invariant(format!(
            "category counts {counts:?} do not partition {} tweets ({empty} without links)",
            tweets.len()
        )));
    }
    Ok(Categorized {
        tweets,
        links,
        counts,
        tweet_counters,
    })
}

/// Assign every tweet its link category and write `categories.csv`.
pub fn run_categorize(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let mut w = StageWriter::new(CATEGORIZE, cfg.stage_dir(CATEGORIZE));
    let c = categorize_tweets(cfg, &mut w)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["tweet_id", "user_id", "category", "links", "web_links"])?;
    for (t, l) in c.tweets.iter().zip(&c.links) {
        wtr.write_record([
            t.tweet_id.as_str(),
            t.user_id.as_str(),
            l.category.as_str(),
            &l.links.len().to_string(),
            &l.web_pages().count().to_string(),
        ])?;
    }
    w.write("categories.csv", &csv_bytes(wtr)?)?;
    let summary = format!(
        "{} tweets: cat1 {}, cat2 {}, cat3 {}, cat4 {}",
        c.tweets.len(),
        c.counts.cat1,
        c.counts.cat2,
        c.counts.cat3,
        c.counts.cat4
    );
    let counters = json!({ "tweets": c.tweet_counters, "categories": c.counts });
    w.finish(cfg.hash(), cfg.seed, counters, summary)
}

// ---------------------------------------------------------------------------
// score

pub const MIN_LABELS: usize = 10;

/// Filter pages, cross-validate and train the credibility models on the
/// labelled pages, then score every page that passed the filter.
pub fn run_score(cfg: &RunConfig) -> Result<StageReport> {
    cfg.validate()?;
    let mut w = StageWriter::new(SCORE, cfg.stage_dir(SCORE));
    let pages_path = cfg.require("pages")?;
    let labels_path = cfg.require("labels")?;
    w.config_input(cfg, "pages")?;
    w.config_input(cfg, "labels")?;
    let page_load = ingest::load_pages(&pages_path)?;
    let labels = ingest::load_labeled_pages(&labels_path)?;

    let content: HashMap<&str, &str> = page_load
        .pages
        .iter()
        .filter(|p| p.available && !p.content.trim().is_empty())
        .map(|p| (p.url.as_str(), p.content.as_str()))
        .collect();
    let (usable, missing): (Vec<_>, Vec<_>) = labels
        .iter()
        .partition(|l| content.contains_key(l.url.as_str()));
    if !missing.is_empty() {
        log::warn!(
            "{} labelled pages have no content in {} and are skipped",
            missing.len(),
            pages_path.display()
        );
    }
    if usable.len() < MIN_LABELS {
        return Err(Error::input(format!(
            "need at least {MIN_LABELS} labelled pages with content, got {} ({} rows in {})",
            usable.len(),
            labels.len(),
            labels_path.display()
        )));
    }
    let labeled: Vec<ingest::LabeledPage> = usable.into_iter().cloned().collect();
    let texts: Vec<&str> = labeled.iter().map(|l| content[l.url.as_str()]).collect();
    let ccfg = cfg.credibility();
    if labeled.len() < ccfg.folds {
        return Err(Error::input(format!(
            "{} labelled pages cannot fill {} folds",
            labeled.len(),
            ccfg.folds
        )));
    }
    let models = train_model_set(&labeled, &texts, &ccfg)?;

    let page_stats = page_load.stats.clone();
    let filtered = filter_pages(page_load.pages);
    let mut kept = filtered.kept;
    kept.sort_by(|a, b| a.url.cmp(&b.url));
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["url", "score", "bucket"];
    header.extend(CRITERION_COLUMNS);
    wtr.write_record(&header)?;
    let mut buckets: BTreeMap<&str, usize> = [("low", 0), ("medium", 0), ("high", 0)].into();
    for page in &kept {
        let s = score_page(page, &models)?;
        *buckets.get_mut(s.bucket.as_str()).expect("known bucket") += 1;
        let mut row = vec![page.url.clone(), s.score.to_string(), s.bucket.to_string()];
        row.extend(s.per_criterion.0.iter().map(|&b| u8::from(b).to_string()));
        wtr.write_record(&row)?;
    }
    w.write(SCORES_FILE, &csv_bytes(wtr)?)?;
    w.write("model.json", serde_json::to_string(&models)?.as_bytes())?;

    let mut accuracy = serde_json::Map::new();
    for alg in Algorithm::ALL {
        accuracy.insert(alg.as_str().into(), json!(models.cv_accuracy[alg.index()]));
    }
    let counters = json!({
        "pages": page_stats,
        "pages_kept": kept.len(),
        "pages_unavailable": filtered.unavailable,
        "pages_non_english": filtered.non_english,
        "pages_too_short": filtered.too_short,
        "labels": labels.len(),
        "labels_used": labeled.len(),
        "labels_without_content": missing.len(),
        "folds": models.fold_sizes,
        "cv_accuracy": accuracy,
        "positive_rate": models.positive_rate,
        "selection": models.selection,
        "vocabulary": models.tfidf.dim(),
        "buckets": buckets,
    });
    let mut summary = format!(
        "{} pages scored ({} filtered out); {} labelled pages, {}-fold CV accuracy:\n  criterion    svm     rf   selected\n",
        kept.len(),
        filtered.unavailable + filtered.non_english + filtered.too_short,
        labeled.len(),
        ccfg.folds
    );
    for c in 0..NUM_CRITERIA {
        let _ = writeln!(
            summary,
            "  {:>9} {:>6.3} {:>6.3}   {}",
            CRITERION_COLUMNS[c],
            models.cv_accuracy[0][c],
            models.cv_accuracy[1][c],
            models.selection[c].as_str()
        );
    }
    let _ = write!(
        summary,
        "buckets: low {}, medium {}, high {}",
        buckets["low"], buckets["medium"], buckets["high"]
    );
    w.finish(cfg.hash(), cfg.seed, counters, summary)
}

// ---------------------------------------------------------------------------
// characterize

fn upstream(cfg: &RunConfig, stage: &str, file: &str) -> Result<PathBuf> {
    let path = cfg.stage_dir(stage).join(file);
    if !path.is_file() {
        return Err(Error::input(format!(
            "missing output of stage `{stage}`: {} (run `credcomm {stage}` first)",
            path.display()
        )));
    }
    Ok(path)
}

fn read_partition(path: &Path, graph: &FollowerGraph) -> Result<Vec<usize>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut labels: Vec<Option<usize>> = vec![None; graph.node_count()];
    for record in rdr.records() {
        let record = record?;
        let user = record.get(0).unwrap_or("");
        let community: usize = record
            .get(1)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::input(format!("{}: bad community for {user}", path.display())))?;
        let node = graph.users().index(user).ok_or_else(|| {
            Error::input(format!(
                "{}: user {user} is not in the follower graph; rerun detect",
                path.display()
            ))
        })?;
        labels[node] = Some(community);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(node, l)| {
            l.ok_or_else(|| {
                Error::input(format!(
                    "{}: user {} has no community; rerun detect",
                    path.display(),
                    graph.users().id(node)
                ))
            })
        })
        .collect()
}

fn read_scores(path: &Path) -> Result<HashMap<String, Bucket>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let url = record.get(0).unwrap_or("").to_string();
        let bucket: Bucket = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::input(format!("{}: bad bucket for {url}", path.display())))?;
        out.insert(url, bucket);
    }
    Ok(out)
}

/// Compute the per-community measures from the detect and score outputs
/// and write `measures.csv`, `report.json` and one visualisation per
/// requested measure (the configured list when `requested` is empty).
pub fn run_characterize(cfg: &RunConfig, requested: &[String]) -> Result<StageReport> {
    cfg.validate()?;
    let names = if requested.is_empty() {
        &cfg.viz.measures
    } else {
        requested
    };
    let viz_measures: Vec<Measure> = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
    let partition_path = upstream(cfg, DETECT, PARTITION_FILE)?;
    let scores_path = upstream(cfg, SCORE, SCORES_FILE)?;

    let mut w = StageWriter::new(CHARACTERIZE, cfg.stage_dir(CHARACTERIZE));
    let cat = categorize_tweets(cfg, &mut w)?;
    let net = load_network(cfg, &mut w, Some(&cat.tweets))?;
    w.input(
        "partition",
        Path::new("detect/partition.csv"),
        &partition_path,
    )?;
    w.input("scores", Path::new("score/scores.csv"), &scores_path)?;
    let labels = read_partition(&partition_path, &net.graph)?;
    let scores = read_scores(&scores_path)?;

    let partition = Partition::from_labels(&labels);
    let members = partition.members();
    let followers = net.directed.in_degrees();
    let mut facts: Vec<Vec<TweetFacts>> = vec![Vec::new(); partition.num_communities()];
    let (mut scored_links, mut unscored_links) = (0usize, 0usize);
    for (t, l) in cat.tweets.iter().zip(&cat.links) {
        let node = net
            .graph
            .users()
            .index(&t.user_id)
            .expect("authors are graph nodes");
        let mut scored = Vec::new();
        for url in l.web_pages() {
            match scores.get(url) {
                Some(&b) => scored.push(b),
                None => unscored_links += 1,
            }
        }
        scored_links += scored.len();
        facts[partition.community_of(node)].push(TweetFacts {
            like_count: t.like_count,
            category: l.category,
            scored_links: scored,
        });
    }

    let mut clamped = 0;
    let mut rows = Vec::with_capacity(members.len());
    for (c, ms) in members.iter().enumerate() {
        let counts: Vec<u64> = ms.iter().map(|&u| followers[u] as u64).collect();
        let (v, k) = measures::compute_measures(&net.graph, ms, &facts[c], &counts);
        clamped += k;
        rows.push((labels[ms[0]], ms.len(), v));
    }
    if clamped > 0 {
        log::info!("internal density: {clamped} pair weights clamped to 1");
    }
    let mut profiles = build_profiles(rows);
    profiles.sort_by_key(|p| p.community_id);

    let mut csv_buf = Vec::new();
    measures::write_measures_csv(&profiles, &mut csv_buf)?;
    w.write(MEASURES_FILE, &csv_buf)?;

    // Inter-community weights keyed by the ids in partition.csv.
    let links: BTreeMap<(usize, usize), f64> = community_links(&net.graph, &partition)
        .into_iter()
        .map(|((a, b), wt)| {
            let (x, y) = (labels[members[a][0]], labels[members[b][0]]);
            ((x.min(y), x.max(y)), wt)
        })
        .collect();
    for m in &viz_measures {
        let doc = build_viz(&profiles, &links, m.name(), cfg.viz.edge_floor)?;
        w.write(&format!("viz/{}.json", m.name()), &to_json_pretty(&doc)?)?;
        w.write(&format!("viz/{}.dot", m.name()), doc.to_dot().as_bytes())?;
    }

    let counters = json!({
        "tweets": cat.tweet_counters,
        "categories": cat.counts,
        "users": net.graph.node_count(),
        "communities": profiles.len(),
        "scored_pages": scores.len(),
        "scored_web_links": scored_links,
        "unscored_web_links": unscored_links,
        "density_clamped_pairs": clamped,
        "follower_counts": "in-degree in the follower graph",
        "viz": viz_measures.iter().map(|m| m.name()).collect::<Vec<_>>(),
    });
    let report = json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "counters": counters,
    });
    w.write("report.json", &to_json_pretty(&report)?)?;
    let summary = format!(
        "{} communities characterised; {} tweets (cat1 {}, cat2 {}, cat3 {}, cat4 {}); {} scored web links",
        profiles.len(),
        cat.tweets.len(),
        cat.counts.cat1,
        cat.counts.cat2,
        cat.counts.cat3,
        cat.counts.cat4,
        scored_links
    );
    w.finish(cfg.hash(), cfg.seed, counters, summary)
}

// ---------------------------------------------------------------------------
// synth

pub const SYNTH_CONFIG_FILE: &str = "pipeline.toml";

/// Generate a dataset into `out`, plus `truth.json` and a `pipeline.toml`
/// that runs every stage on it.
pub fn run_synth(spec: &SynthSpec, out: &Path) -> Result<StageReport> {
    spec.validate()?;
    let data = synth::generate(spec)?;
    let mut w = StageWriter::new("synth", out.to_path_buf());
    w.write("followers.csv", data.followers_csv()?.as_bytes())?;
    w.write("tweets.jsonl", data.tweets_jsonl()?.as_bytes())?;
    w.write("pages.jsonl", data.pages_jsonl()?.as_bytes())?;
    w.write("labels.csv", data.labels_csv()?.as_bytes())?;
    w.write("resolver_fixtures.jsonl", data.fixtures_jsonl()?.as_bytes())?;
    w.write("truth.json", &to_json_pretty(&data.truth(spec.seed))?)?;

    let smallest = spec.graph.sizes().into_iter().min().unwrap_or(1);
    let mut run = RunConfig::from_toml("", out)?;
    run.seed = spec.seed;
    run.inputs.followers = Some("followers.csv".into());
    run.inputs.tweets = Some("tweets.jsonl".into());
    run.inputs.pages = Some("pages.jsonl".into());
    run.inputs.labels = Some("labels.csv".into());
    run.inputs.resolver = Some("resolver_fixtures.jsonl".into());
    run.refinement.min_size = (smallest / 2).max(1);
    run.refinement.max_size = run.refinement.max_size.max(spec.graph.n);
    w.write(SYNTH_CONFIG_FILE, run.to_toml()?.as_bytes())?;

    let spec_json = serde_json::to_string(spec)?;
    let counters = json!({
        "users": data.graph.users.len(),
        "edges": data.graph.edges.len(),
        "tweets": data.corpus.tweets.len(),
        "pages": data.corpus.pages.len(),
        "labels": data.corpus.labels.len(),
        "fixtures": data.corpus.fixtures.len(),
        "communities": data.corpus.communities.len(),
    });
    let summary = format!(
        "{} users, {} follower edges, {} tweets, {} pages ({} labelled) written to {}",
        data.graph.users.len(),
        data.graph.edges.len(),
        data.corpus.tweets.len(),
        data.corpus.pages.len(),
        data.corpus.labels.len(),
        out.display()
    );
    w.finish(
        hex::encode(Sha256::digest(spec_json.as_bytes())),
        spec.seed,
        counters,
        summary,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        std::fs::write(dir.join(name), text).unwrap();
    }

    fn config(dir: &Path, body: &str) -> RunConfig {
        RunConfig::from_toml(body, dir).unwrap()
    }

    #[test]
    fn detect_on_two_cliques() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = String::from("from_user,to_user\n");
        for block in [["a", "b", "c"], ["x", "y", "z"]] {
            for u in block {
                for v in block {
                    if u != v {
                        rows.push_str(&format!("{u},{v}\n"));
                    }
                }
            }
        }
        rows.push_str("c,x\n");
        write(dir.path(), "followers.csv", &rows);
        let cfg = config(
            dir.path(),
            "[inputs]\nfollowers = \"followers.csv\"\n[refinement]\nmin_size = 2\nmax_size = 10\n",
        );
        let report = run_detect(&cfg).unwrap();
        assert_eq!(report.manifest.counters["communities"], 2);
        let csv = std::fs::read_to_string(report.dir.join(PARTITION_FILE)).unwrap();
        assert_eq!(csv, "user_id,community_id\na,0\nb,0\nc,0\nx,1\ny,1\nz,1\n");
        let again = run_detect(&cfg).unwrap();
        assert_eq!(again.manifest, report.manifest);
    }

    #[test]
    fn empty_followers_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "followers.csv", "from_user,to_user\n");
        let cfg = config(dir.path(), "[inputs]\nfollowers = \"followers.csv\"\n");
        let err = run_detect(&cfg).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Input);
        assert!(err.to_string().contains("no edges"));
    }

    #[test]
    fn characterize_names_missing_stage() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "followers.csv", "from_user,to_user\na,b\n");
        write(dir.path(), "tweets.jsonl", "");
        let cfg = config(
            dir.path(),
            "[inputs]\nfollowers = \"followers.csv\"\ntweets = \"tweets.jsonl\"\n",
        );
        let err = run_characterize(&cfg, &[]).unwrap_err();
        assert!(err.to_string().contains("stage `detect`"), "{err}");
        let err = run_characterize(&cfg, &["bogus".into()]).unwrap_err();
        assert!(err.to_string().contains("valid names"), "{err}");
    }

    #[test]
    fn too_few_labels() {
        let dir = tempfile::tempdir().unwrap();
        let mut pages = String::new();
        let mut labels = String::from("url,c1,c2,c3,c4,c5,c6,c7\n");
        for i in 0..9 {
            pages.push_str(&format!(
                "{{\"url\":\"p{i}\",\"content\":\"some words here\",\"lang\":\"en\"}}\n"
            ));
            labels.push_str(&format!("p{i},1,0,1,0,1,0,{}\n", i % 2));
        }
        write(dir.path(), "pages.jsonl", &pages);
        write(dir.path(), "labels.csv", &labels);
        let cfg = config(
            dir.path(),
            "[inputs]\npages = \"pages.jsonl\"\nlabels = \"labels.csv\"\n",
        );
        let err = run_score(&cfg).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Input);
        assert!(err.to_string().contains("at least 10"));
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.txt");
        write_atomic(&path, b"hello").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("out.txt")]);
    }
}

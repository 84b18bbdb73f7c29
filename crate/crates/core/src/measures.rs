//! Per-community measures, rank percentiles and the report/visualisation
//! documents built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::community::Partition;
use crate::credibility::Bucket;
use crate::error::{Error, Result};
use crate::graph::FollowerGraph;
use crate::links::LinkCategory;

pub const NUM_MEASURES: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    VideosPct,
    VideosAvgLikes,
    LowCredPct,
    LowCredAvgLikes,
    HighCredPct,
    HighCredAvgLikes,
    PubArticlesPct,
    PubArticlesAvgLikes,
    NoUrlsPct,
    NoUrlsAvgLikes,
    InternalDensity,
    CommAvgLikes,
    MedianFollowers,
    UsersAvgTweets,
}

impl Measure {
    pub const ALL: [Measure; NUM_MEASURES] = [
        Measure::VideosPct,
        Measure::VideosAvgLikes,
        Measure::LowCredPct,
        Measure::LowCredAvgLikes,
        Measure::HighCredPct,
        Measure::HighCredAvgLikes,
        Measure::PubArticlesPct,
        Measure::PubArticlesAvgLikes,
        Measure::NoUrlsPct,
        Measure::NoUrlsAvgLikes,
        Measure::InternalDensity,
        Measure::CommAvgLikes,
        Measure::MedianFollowers,
        Measure::UsersAvgTweets,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::VideosPct => "videos_pct",
            Measure::VideosAvgLikes => "videos_avg_likes",
            Measure::LowCredPct => "low_cred_pct",
            Measure::LowCredAvgLikes => "low_cred_avg_likes",
            Measure::HighCredPct => "high_cred_pct",
            Measure::HighCredAvgLikes => "high_cred_avg_likes",
            Measure::PubArticlesPct => "pub_articles_pct",
            Measure::PubArticlesAvgLikes => "pub_articles_avg_likes",
            Measure::NoUrlsPct => "no_urls_pct",
            Measure::NoUrlsAvgLikes => "no_urls_avg_likes",
            Measure::InternalDensity => "internal_density",
            Measure::CommAvgLikes => "comm_avg_likes",
            Measure::MedianFollowers => "median_followers",
            Measure::UsersAvgTweets => "users_avg_tweets",
        }
    }

    pub fn names() -> Vec<String> {
        Measure::ALL.iter().map(|m| m.name().to_string()).collect()
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMeasure {
                name: s.to_string(),
                valid: Measure::names(),
            })
    }
}

/// The fourteen measures of one community. `None` means the measure's
/// population was empty; it is never folded into 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasureVector {
    values: [Option<f64>; NUM_MEASURES],
}

impl MeasureVector {
    pub fn get(&self, m: Measure) -> Option<f64> {
        self.values[m.index()]
    }

    pub fn set(&mut self, m: Measure, value: Option<f64>) {
        self.values[m.index()] = value;
    }

    pub fn values(&self) -> &[Option<f64>; NUM_MEASURES] {
        &self.values
    }
}

impl Serialize for MeasureVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(NUM_MEASURES))?;
        for m in Measure::ALL {
            map.serialize_entry(m.name(), &self.get(m))?;
        }
        map.end()
    }
}

/// What the measures need to know about one tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetFacts {
    pub like_count: u64,
    pub category: LinkCategory,
    /// Buckets of the tweet's web-page links that received a score.
    pub scored_links: Vec<Bucket>,
}

fn pct(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

fn mean(sum: u64, count: usize) -> Option<f64> {
    (count > 0).then(|| sum as f64 / count as f64)
}

pub fn median(values: &[u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] as f64 + v[mid] as f64) / 2.0
    })
}

/// `2·W_in / (n·(n−1))` over the members, where each internal pair
/// contributes at most 1. Returns the density and the number of pairs whose
/// weight was clamped.
pub fn internal_density(g: &FollowerGraph, members: &[usize]) -> (f64, usize) {
    let n = members.len();
    if n < 2 {
        return (0.0, 0);
    }
    let mut member = vec![false; g.node_count()];
    for &u in members {
        member[u] = true;
    }
    let mut w_in = 0.0;
    let mut clamped = 0;
    for &u in members {
        for &(v, w) in g.neighbors(u) {
            if u < v && member[v] {
                if w > 1.0 {
                    clamped += 1;
                }
                w_in += w.min(1.0);
            }
        }
    }
    (2.0 * w_in / (n as f64 * (n - 1) as f64), clamped)
}

#[derive(Debug, Default)]
struct Tally {
    count: usize,
    likes: u64,
}

impl Tally {
    fn add(&mut self, likes: u64) {
        self.count += 1;
        self.likes += likes;
    }
}

/// Compute the measures of one community.
///
/// - `videos_pct`, `pub_articles_pct`: share of link-bearing tweets in the
///   social-media and article categories.
/// - `low_cred_pct`, `high_cred_pct`: share of scored web-page links in the
///   low and high buckets.
/// - `no_urls_pct`: share of all tweets without links.
/// - every `*_avg_likes`: mean like count over the same population
///   (per link for the credibility measures).
///
/// `follower_counts` holds one entry per member. Returns the measures and
/// the number of clamped pairs in the density computation.
pub fn compute_measures(
    g: &FollowerGraph,
    members: &[usize],
    tweets: &[TweetFacts],
    follower_counts: &[u64],
) -> (MeasureVector, usize) {
    let mut all = Tally::default();
    let mut pub_articles = Tally::default();
    let mut videos = Tally::default();
    let mut no_urls = Tally::default();
    let mut low = Tally::default();
    let mut high = Tally::default();
    let (mut link_bearing, mut scored) = (0usize, 0usize);
    for t in tweets {
        all.add(t.like_count);
        match t.category {
            LinkCategory::PubMedDirect => pub_articles.add(t.like_count),
            LinkCategory::SocialMedia => videos.add(t.like_count),
            LinkCategory::NoUrl => no_urls.add(t.like_count),
            LinkCategory::WebPage => {}
        }
        if t.category != LinkCategory::NoUrl {
            link_bearing += 1;
        }
        for b in &t.scored_links {
            scored += 1;
            match b {
                Bucket::Low => low.add(t.like_count),
                Bucket::High => high.add(t.like_count),
                Bucket::Medium => {}
            }
        }
    }
    let (density, clamped) = internal_density(g, members);

    let mut v = MeasureVector::default();
    v.set(Measure::VideosPct, pct(videos.count, link_bearing));
    v.set(Measure::VideosAvgLikes, mean(videos.likes, videos.count));
    v.set(Measure::LowCredPct, pct(low.count, scored));
    v.set(Measure::LowCredAvgLikes, mean(low.likes, low.count));
    v.set(Measure::HighCredPct, pct(high.count, scored));
    v.set(Measure::HighCredAvgLikes, mean(high.likes, high.count));
    v.set(
        Measure::PubArticlesPct,
        pct(pub_articles.count, link_bearing),
    );
    v.set(
        Measure::PubArticlesAvgLikes,
        mean(pub_articles.likes, pub_articles.count),
    );
    v.set(Measure::NoUrlsPct, pct(no_urls.count, all.count));
    v.set(Measure::NoUrlsAvgLikes, mean(no_urls.likes, no_urls.count));
    v.set(Measure::InternalDensity, Some(density));
    v.set(Measure::CommAvgLikes, mean(all.likes, all.count));
    v.set(Measure::MedianFollowers, median(follower_counts));
    v.set(
        Measure::UsersAvgTweets,
        (!members.is_empty()).then(|| tweets.len() as f64 / members.len() as f64),
    );
    (v, clamped)
}

/// Percentile of every present value: ascending rank, ties sharing their
/// mean rank, mapped to `(rank − 1)/(k − 1)` over the `k` present values
/// (0.5 when `k = 1`). Missing values stay missing.
pub fn rank_percentiles(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut present: Vec<(f64, usize)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (x, i)))
        .collect();
    let k = present.len();
    let mut out = vec![None; values.len()];
    if k == 0 {
        return out;
    }
    if k == 1 {
        out[present[0].1] = Some(0.5);
        return out;
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && present[end].0 == present[start].0 {
            end += 1;
        }
        // Ranks are 1-based: the group covers ranks start+1 ..= end.
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let percentile = (mean_rank - 1.0) / (k - 1) as f64;
        for &(_, i) in &present[start..end] {
            out[i] = Some(percentile);
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunityProfile {
    pub community_id: usize,
    pub user_count: usize,
    pub measures: MeasureVector,
    pub percentiles: [Option<f64>; NUM_MEASURES],
    /// Percentile minus 0.5.
    pub deviations: [Option<f64>; NUM_MEASURES],
}

/// Attach percentiles and deviations, ranking each measure across all
/// communities.
pub fn build_profiles(rows: Vec<(usize, usize, MeasureVector)>) -> Vec<CommunityProfile> {
    let mut profiles: Vec<CommunityProfile> = rows
        .into_iter()
        .map(|(community_id, user_count, measures)| CommunityProfile {
            community_id,
            user_count,
            measures,
            percentiles: [None; NUM_MEASURES],
            deviations: [None; NUM_MEASURES],
        })
        .collect();
    for m in Measure::ALL {
        let values: Vec<Option<f64>> = profiles.iter().map(|p| p.measures.get(m)).collect();
        for (p, pct) in profiles.iter_mut().zip(rank_percentiles(&values)) {
            p.percentiles[m.index()] = pct;
            p.deviations[m.index()] = pct.map(|x| x - 0.5);
        }
    }
    profiles
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `measures.csv`: one row per community; missing values are empty cells.
pub fn write_measures_csv<W: Write>(profiles: &[CommunityProfile], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["community_id".to_string(), "user_count".to_string()];
    header.extend(Measure::ALL.iter().map(|m| m.name().to_string()));
    header.extend(
        Measure::ALL
            .iter()
            .map(|m| format!("{}_percentile", m.name())),
    );
    header.extend(
        Measure::ALL
            .iter()
            .map(|m| format!("{}_deviation", m.name())),
    );
    wtr.write_record(&header)?;
    for p in profiles {
        let mut row = vec![p.community_id.to_string(), p.user_count.to_string()];
        row.extend(p.measures.values().iter().map(|&v| cell(v)));
        row.extend(p.percentiles.iter().map(|&v| cell(v)));
        row.extend(p.deviations.iter().map(|&v| cell(v)));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("measures.csv", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Visualisation

/// Summed edge weight between every pair of distinct communities, keyed by
/// `(lower id, higher id)`.
pub fn community_links(g: &FollowerGraph, p: &Partition) -> BTreeMap<(usize, usize), f64> {
    let mut links = BTreeMap::new();
    for &(u, v, w) in g.edges() {
        let (a, b) = (p.community_of(u), p.community_of(v));
        if a != b {
            *links.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
    }
    links
}

/// Linear red→green colour for a percentile; white when missing.
pub fn gradient_color(percentile: Option<f64>) -> String {
    match percentile {
        None => "#ffffff".to_string(),
        Some(p) => {
            let p = p.clamp(0.0, 1.0);
            let r = (255.0 * (1.0 - p)).round() as u8;
            let g = (255.0 * p).round() as u8;
            format!("#{r:02x}{g:02x}00")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VizNode {
    pub id: usize,
    pub user_count: usize,
    /// User count relative to the largest community.
    pub size: f64,
    pub value: Option<f64>,
    pub percentile: Option<f64>,
    pub deviation: Option<f64>,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VizEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VizDocument {
    pub measure: String,
    pub edge_floor: f64,
    pub nodes: Vec<VizNode>,
    pub edges: Vec<VizEdge>,
}

/// Node-link document for one measure: one node per community sized by
/// user count and coloured by the measure's percentile, one edge per pair
/// of communities whose shared weight exceeds `edge_floor`.
pub fn build_viz(
    profiles: &[CommunityProfile],
    links: &BTreeMap<(usize, usize), f64>,
    measure: &str,
    edge_floor: f64,
) -> Result<VizDocument> {
    let m: Measure = measure.parse()?;
    let largest = profiles
        .iter()
        .map(|p| p.user_count)
        .max()
        .unwrap_or(1)
        .max(1);
    let nodes = profiles
        .iter()
        .map(|p| {
            let percentile = p.percentiles[m.index()];
            VizNode {
                id: p.community_id,
                user_count: p.user_count,
                size: p.user_count as f64 / largest as f64,
                value: p.measures.get(m),
                percentile,
                deviation: p.deviations[m.index()],
                color: gradient_color(percentile),
            }
        })
        .collect();
    let edges = links
        .iter()
        .filter(|(_, &w)| w > edge_floor)
        .map(|(&(source, target), &weight)| VizEdge {
            source,
            target,
            weight,
        })
        .collect();
    Ok(VizDocument {
        measure: m.name().to_string(),
        edge_floor,
        nodes,
        edges,
    })
}

impl VizDocument {
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph \"{}\" {{", self.measure);
        let _ = writeln!(out, "  node [shape=circle, style=filled, fontsize=10];");
        for n in &self.nodes {
            let label = match n.value {
                Some(v) => format!("{}\\n{:.2}", n.id, v),
                None => format!("{}\\nn/a", n.id),
            };
            let _ = writeln!(
                out,
                "  c{} [label=\"{}\", width={:.3}, fillcolor=\"{}\"];",
                n.id,
                label,
                0.3 + 1.7 * n.size,
                n.color
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  c{} -- c{} [weight={}];",
                e.source, e.target, e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

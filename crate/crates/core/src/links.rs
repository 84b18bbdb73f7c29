//! Tweet link categories and page eligibility.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::ingest::{Tweet, WebPage};

/// Pages shorter than this are not scored.
pub const MIN_PAGE_WORDS: usize = 300;

const DEFAULT_DOMAINS: &str = include_str!("../domains.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkCategory {
    /// Direct link to a PubMed article.
    #[serde(rename = "cat1")]
    PubMedDirect,
    /// Link to an ordinary web page (news, blog, Reddit, Wikipedia, ...).
    #[serde(rename = "cat2")]
    WebPage,
    /// Link to a social-media or multimedia post.
    #[serde(rename = "cat3")]
    SocialMedia,
    /// No link at all.
    #[serde(rename = "cat4")]
    NoUrl,
}

impl LinkCategory {
    pub const ALL: [LinkCategory; 4] = [
        LinkCategory::PubMedDirect,
        LinkCategory::WebPage,
        LinkCategory::SocialMedia,
        LinkCategory::NoUrl,
    ];

    pub fn number(self) -> u8 {
        match self {
            LinkCategory::PubMedDirect => 1,
            LinkCategory::WebPage => 2,
            LinkCategory::SocialMedia => 3,
            LinkCategory::NoUrl => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkCategory::PubMedDirect => "cat1",
            LinkCategory::WebPage => "cat2",
            LinkCategory::SocialMedia => "cat3",
            LinkCategory::NoUrl => "cat4",
        }
    }
}

impl fmt::Display for LinkCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LinkCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown link category {s:?}")))
    }
}

/// What a single URL points at. The derived order is the precedence used to
/// pick a tweet's category when it carries several links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum LinkClass {
    PubMed,
    WebPage,
    Social,
}

impl LinkClass {
    fn category(self) -> LinkCategory {
        match self {
            LinkClass::PubMed => LinkCategory::PubMedDirect,
            LinkClass::WebPage => LinkCategory::WebPage,
            LinkClass::Social => LinkCategory::SocialMedia,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct HostPattern {
    host: String,
    path_prefix: Option<String>,
}

impl HostPattern {
    fn parse(raw: &str) -> Self {
        let raw = raw
            .trim()
            .trim_start_matches("https://")
            .trim_start_matches("http://")
            .to_ascii_lowercase();
        let (host, path) = raw.split_once('/').unwrap_or((raw.as_str(), ""));
        HostPattern {
            host: host.trim_start_matches("www.").to_string(),
            path_prefix: (!path.is_empty()).then(|| format!("/{path}")),
        }
    }

    fn matches(&self, host: &str, path: &str) -> bool {
        let host_ok = host == self.host
            || (host.len() > self.host.len()
                && host.ends_with(&self.host)
                && host.as_bytes()[host.len() - self.host.len() - 1] == b'.');
        host_ok
            && self
                .path_prefix
                .as_deref()
                .is_none_or(|prefix| path.to_ascii_lowercase().starts_with(prefix))
    }
}

/// Host pattern lists deciding which links are direct article links and
/// which are social-media posts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRules {
    pubmed: Vec<HostPattern>,
    social: Vec<HostPattern>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    pubmed_hosts: Vec<String>,
    social_hosts: Vec<String>,
}

impl Default for DomainRules {
    fn default() -> Self {
        DomainRules::from_toml(DEFAULT_DOMAINS).expect("bundled domains.toml parses")
    }
}

impl DomainRules {
    pub fn new<S: AsRef<str>>(pubmed_hosts: &[S], social_hosts: &[S]) -> Self {
        DomainRules {
            pubmed: pubmed_hosts
                .iter()
                .map(|p| HostPattern::parse(p.as_ref()))
                .collect(),
            social: social_hosts
                .iter()
                .map(|p| HostPattern::parse(p.as_ref()))
                .collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: DomainFile =
            toml::from_str(text).map_err(|e| Error::input(format!("domain rules: {e}")))?;
        Ok(DomainRules::new(&file.pubmed_hosts, &file.social_hosts))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Classify one (already expanded) URL.
    pub fn classify(&self, url: &str) -> LinkClass {
        let Some((host, path)) = host_and_path(url) else {
            return LinkClass::WebPage;
        };
        if self.pubmed.iter().any(|p| p.matches(&host, &path)) {
            LinkClass::PubMed
        } else if self.social.iter().any(|p| p.matches(&host, &path)) {
            LinkClass::Social
        } else {
            LinkClass::WebPage
        }
    }
}

fn host_and_path(raw: &str) -> Option<(String, String)> {
    let parsed = Url::parse(raw)
        .ok()
        .filter(|u| u.host_str().is_some())
        .or_else(|| Url::parse(&format!("http://{raw}")).ok())?;
    let host = parsed.host_str()?.to_ascii_lowercase();
    let host = host.strip_prefix("www.").unwrap_or(&host).to_string();
    Some((host, parsed.path().to_string()))
}

// ---------------------------------------------------------------------------
// URL resolution

/// Expansion of a (possibly shortened) URL plus whether the target page
/// links to PubMed articles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedUrl {
    pub expanded_url: String,
    pub links_to_pubmed: bool,
}

/// Source of URL expansions. Implemented by the offline fixture table; a
/// live adapter would implement the same trait.
pub trait UrlResolver {
    fn lookup(&self, url: &str) -> Option<ResolvedUrl>;
}

/// Resolver that knows nothing; every URL resolves to itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullResolver;

impl UrlResolver for NullResolver {
    fn lookup(&self, _url: &str) -> Option<ResolvedUrl> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub short_url: String,
    pub expanded_url: String,
    #[serde(default)]
    pub links_to_pubmed: bool,
}

/// Lookup table loaded from `resolver_fixtures.jsonl`.
#[derive(Debug, Clone, Default)]
pub struct FixtureResolver {
    table: HashMap<String, ResolvedUrl>,
}

impl FixtureResolver {
    pub fn from_records<I: IntoIterator<Item = FixtureRecord>>(records: I) -> Self {
        let table = records
            .into_iter()
            .map(|r| {
                (
                    r.short_url,
                    ResolvedUrl {
                        expanded_url: r.expanded_url,
                        links_to_pubmed: r.links_to_pubmed,
                    },
                )
            })
            .collect();
        FixtureResolver { table }
    }

    pub fn read<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line)
                .map_err(|e| Error::input(format!("{}: line {}: {e}", source.display(), i + 1)))?;
            if record.expanded_url.is_empty() {
                return Err(Error::input(format!(
                    "{}: line {}: empty expanded_url",
                    source.display(),
                    i + 1
                )));
            }
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file, path)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl UrlResolver for FixtureResolver {
    fn lookup(&self, url: &str) -> Option<ResolvedUrl> {
        self.table.get(url).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolverRecord {
    pub short_url: String,
    pub expanded_url: String,
    pub links_to_pubmed: bool,
    /// The resolver had no entry; `expanded_url` is the input unchanged.
    pub unknown: bool,
}

pub fn resolve_url(url: &str, resolver: &dyn UrlResolver) -> ResolverRecord {
    match resolver.lookup(url) {
        Some(r) => ResolverRecord {
            short_url: url.to_string(),
            expanded_url: r.expanded_url,
            links_to_pubmed: r.links_to_pubmed,
            unknown: false,
        },
        None => ResolverRecord {
            short_url: url.to_string(),
            expanded_url: url.to_string(),
            links_to_pubmed: false,
            unknown: true,
        },
    }
}

// ---------------------------------------------------------------------------
// Categorisation

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassifiedLink {
    pub resolved: ResolverRecord,
    pub class: LinkClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TweetLinks {
    pub category: LinkCategory,
    pub links: Vec<ClassifiedLink>,
}

impl TweetLinks {
    /// Expanded URLs of the links that point at ordinary web pages.
    pub fn web_pages(&self) -> impl Iterator<Item = &str> {
        self.links
            .iter()
            .filter(|l| l.class == LinkClass::WebPage)
            .map(|l| l.resolved.expanded_url.as_str())
    }
}

/// Resolve and classify every link of a tweet. The tweet's category is the
/// highest-precedence link class (article > web page > social), or
/// [`LinkCategory::NoUrl`] when it has no links.
pub fn classify_tweet(t: &Tweet, resolver: &dyn UrlResolver, rules: &DomainRules) -> TweetLinks {
    let links: Vec<ClassifiedLink> = t
        .urls
        .iter()
        .map(|u| {
            let resolved = resolve_url(u, resolver);
            let class = rules.classify(&resolved.expanded_url);
            ClassifiedLink { resolved, class }
        })
        .collect();
    let category = links
        .iter()
        .map(|l| l.class)
        .min()
        .map_or(LinkCategory::NoUrl, LinkClass::category);
    TweetLinks { category, links }
}

pub fn categorize_tweet(
    t: &Tweet,
    resolver: &dyn UrlResolver,
    rules: &DomainRules,
) -> LinkCategory {
    classify_tweet(t, resolver, rules).category
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub cat1: usize,
    pub cat2: usize,
    pub cat3: usize,
    pub cat4: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, c: LinkCategory) {
        match c {
            LinkCategory::PubMedDirect => self.cat1 += 1,
            LinkCategory::WebPage => self.cat2 += 1,
            LinkCategory::SocialMedia => self.cat3 += 1,
            LinkCategory::NoUrl => self.cat4 += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.cat1 + self.cat2 + self.cat3 + self.cat4
    }
}

// ---------------------------------------------------------------------------
// Page eligibility

#[derive(Debug, Clone, Default)]
pub struct PageFilter {
    pub kept: Vec<WebPage>,
    pub unavailable: usize,
    pub non_english: usize,
    pub too_short: usize,
}

/// Keep available English pages of at least [`MIN_PAGE_WORDS`] words. Each
/// removed page is counted under the first failing check, in that order.
pub fn filter_pages(pages: Vec<WebPage>) -> PageFilter {
    let mut out = PageFilter::default();
    for page in pages {
        if !page.available {
            out.unavailable += 1;
        } else if page.lang != "en" {
            out.non_english += 1;
        } else if page.word_count < MIN_PAGE_WORDS {
            out.too_short += 1;
        } else {
            out.kept.push(page);
        }
    }
    out
}

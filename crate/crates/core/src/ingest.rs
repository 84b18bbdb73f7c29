//! Loaders for the pipeline's input files.
//!
//! Every loader is tolerant of individual bad records: they are skipped and
//! counted rather than aborting the load. The one exception is the expert
//! label file, where a non-binary cell is a hard validation error.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub const NUM_CRITERIA: usize = 7;
pub const CRITERION_COLUMNS: [&str; NUM_CRITERIA] = ["c1", "c2", "c3", "c4", "c5", "c6", "c7"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub tweet_id: String,
    pub user_id: String,
    pub text: String,
    pub urls: Vec<String>,
    pub like_count: u64,
    pub is_retweet: bool,
    pub lang: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FollowerEdge {
    /// The follower.
    pub from_user: String,
    /// The account being followed.
    pub to_user: String,
}

impl FollowerEdge {
    pub fn new(from_user: impl Into<String>, to_user: impl Into<String>) -> Self {
        FollowerEdge {
            from_user: from_user.into(),
            to_user: to_user.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebPage {
    pub url: String,
    /// Plain text with markup removed. Empty for unavailable pages.
    pub content: String,
    pub word_count: usize,
    pub lang: String,
    pub available: bool,
}

impl WebPage {
    /// Build a page from raw (possibly HTML) content. Unavailable pages drop
    /// their content.
    pub fn new(
        url: impl Into<String>,
        raw_content: &str,
        lang: impl Into<String>,
        available: bool,
    ) -> Self {
        let content = if available {
            strip_html(raw_content)
        } else {
            String::new()
        };
        let word_count = word_count(&content);
        WebPage {
            url: url.into(),
            content,
            word_count,
            lang: lang.into(),
            available,
        }
    }
}

/// Seven binary checklist outcomes for one page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Criteria(pub [bool; NUM_CRITERIA]);

impl Criteria {
    pub fn from_bits(bits: [u8; NUM_CRITERIA]) -> Self {
        Criteria(bits.map(|b| b != 0))
    }

    pub fn sum(&self) -> u32 {
        self.0.iter().filter(|&&b| b).count() as u32
    }

    pub fn get(&self, criterion: usize) -> bool {
        self.0[criterion]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPage {
    pub url: String,
    pub criteria: Criteria,
}

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Remove markup tags and the bodies of `script`/`style` elements, decoding
/// the handful of entities that commonly survive extraction.
pub fn strip_html(raw: &str) -> String {
    if !raw.contains('<') && !raw.contains('&') {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(start) = rest.find('<') {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        let Some(end) = after.find('>') else {
            // Unterminated tag: keep the text as-is.
            out.push_str(after);
            rest = "";
            break;
        };
        let tag = after[1..end].trim_start().to_ascii_lowercase();
        rest = &after[end + 1..];
        for skipped in ["script", "style"] {
            if tag.starts_with(skipped) && !tag.ends_with('/') {
                let close = format!("</{skipped}");
                match rest.to_ascii_lowercase().find(&close) {
                    Some(pos) => {
                        rest = &rest[pos..];
                    }
                    None => rest = "",
                }
            }
        }
        out.push(' ');
    }
    out.push_str(rest);
    decode_entities(&out)
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// tweets.jsonl

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TweetLoadStats {
    /// Non-blank input lines.
    pub lines: usize,
    pub loaded: usize,
    pub non_english: usize,
    pub missing_lang: usize,
    pub malformed: usize,
    /// Records whose tweet_id was seen earlier; the later record replaced it.
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TweetLoad {
    pub tweets: Vec<Tweet>,
    pub stats: TweetLoadStats,
}

#[derive(Deserialize)]
struct RawTweet {
    #[serde(default, deserialize_with = "opt_id")]
    tweet_id: Option<String>,
    #[serde(default, deserialize_with = "opt_id")]
    user_id: Option<String>,
    #[serde(default)]
    text: String,
    #[serde(default)]
    urls: Vec<String>,
    #[serde(default)]
    like_count: u64,
    #[serde(default)]
    is_retweet: bool,
    #[serde(default)]
    lang: Option<String>,
}

/// Identifiers show up both as JSON strings and as bare integers.
fn opt_id<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Str(String),
        Int(u64),
    }
    Ok(match Option::<Id>::deserialize(d)? {
        Some(Id::Str(s)) => Some(s),
        Some(Id::Int(n)) => Some(n.to_string()),
        None => None,
    })
}

enum TweetLine {
    Tweet(Tweet),
    NonEnglish,
    MissingLang,
    Malformed,
}

fn parse_tweet_line(line: &str) -> TweetLine {
    let Ok(raw) = serde_json::from_str::<RawTweet>(line) else {
        return TweetLine::Malformed;
    };
    let (Some(tweet_id), Some(user_id)) = (raw.tweet_id, raw.user_id) else {
        return TweetLine::Malformed;
    };
    if tweet_id.is_empty() || user_id.is_empty() {
        return TweetLine::Malformed;
    }
    let lang = match raw.lang {
        None => return TweetLine::MissingLang,
        Some(l) if l.trim().is_empty() => return TweetLine::MissingLang,
        Some(l) => l.trim().to_ascii_lowercase(),
    };
    if lang != "en" {
        return TweetLine::NonEnglish;
    }
    let urls = raw
        .urls
        .into_iter()
        .map(|u| u.trim().to_string())
        .filter(|u| !u.is_empty())
        .collect();
    TweetLine::Tweet(Tweet {
        tweet_id,
        user_id,
        text: raw.text,
        urls,
        like_count: raw.like_count,
        is_retweet: raw.is_retweet,
        lang,
    })
}

/// Read English tweets from JSON lines. Output order is first appearance of
/// each tweet_id; on duplicates the last record's content wins.
pub fn read_tweets<R: Read>(reader: R) -> std::io::Result<TweetLoad> {
    let mut load = TweetLoad::default();
    let mut position: HashMap<String, usize> = HashMap::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        load.stats.lines += 1;
        match parse_tweet_line(&line) {
            TweetLine::Tweet(t) => match position.get(&t.tweet_id) {
                Some(&i) => {
                    load.stats.duplicates += 1;
                    load.tweets[i] = t;
                }
                None => {
                    position.insert(t.tweet_id.clone(), load.tweets.len());
                    load.tweets.push(t);
                }
            },
            TweetLine::NonEnglish => load.stats.non_english += 1,
            TweetLine::MissingLang => load.stats.missing_lang += 1,
            TweetLine::Malformed => load.stats.malformed += 1,
        }
    }
    load.stats.loaded = load.tweets.len();
    Ok(load)
}

pub fn load_tweets(path: impl AsRef<Path>) -> Result<TweetLoad> {
    let path = path.as_ref();
    read_tweets(open(path)?).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// followers.csv

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FollowerLoadStats {
    pub rows: usize,
    pub loaded: usize,
    pub self_follows: usize,
    pub malformed: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default)]
pub struct FollowerLoad {
    pub edges: Vec<FollowerEdge>,
    pub stats: FollowerLoadStats,
}

/// Read `from_user,to_user` rows, dropping self-follows and collapsing
/// duplicate pairs (first occurrence keeps its position).
pub fn read_followers<R: Read>(reader: R) -> Result<FollowerLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(from_col), Some(to_col)) = (col("from_user"), col("to_user")) else {
        return Err(Error::input(format!(
            "follower file header must contain from_user,to_user (got {:?})",
            headers.iter().collect::<Vec<_>>()
        )));
    };

    let mut load = FollowerLoad::default();
    let mut seen: HashSet<FollowerEdge> = HashSet::new();
    for record in rdr.records() {
        load.stats.rows += 1;
        let Ok(record) = record else {
            load.stats.malformed += 1;
            continue;
        };
        if record.len() != headers.len() {
            load.stats.malformed += 1;
            continue;
        }
        let (from, to) = (&record[from_col], &record[to_col]);
        if from.is_empty() || to.is_empty() {
            load.stats.malformed += 1;
            continue;
        }
        if from == to {
            load.stats.self_follows += 1;
            continue;
        }
        let edge = FollowerEdge::new(from, to);
        if seen.insert(edge.clone()) {
            load.edges.push(edge);
        } else {
            load.stats.duplicates += 1;
        }
    }
    load.stats.loaded = load.edges.len();
    if load.stats.self_follows > 0 {
        log::warn!("dropped {} self-follow rows", load.stats.self_follows);
    }
    Ok(load)
}

pub fn load_followers(path: impl AsRef<Path>) -> Result<FollowerLoad> {
    let path = path.as_ref();
    read_followers(open(path)?)
}

// ---------------------------------------------------------------------------
// pages.jsonl

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PageLoadStats {
    pub lines: usize,
    pub loaded: usize,
    pub malformed: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PageLoad {
    pub pages: Vec<WebPage>,
    pub stats: PageLoadStats,
}

#[derive(Deserialize)]
struct RawPage {
    url: String,
    #[serde(default)]
    content: String,
    #[serde(default)]
    lang: String,
    #[serde(default = "default_true")]
    available: bool,
}

fn default_true() -> bool {
    true
}

pub fn read_pages<R: Read>(reader: R) -> std::io::Result<PageLoad> {
    let mut load = PageLoad::default();
    let mut position: HashMap<String, usize> = HashMap::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        load.stats.lines += 1;
        let raw = match serde_json::from_str::<RawPage>(&line) {
            Ok(raw) if !raw.url.trim().is_empty() => raw,
            _ => {
                load.stats.malformed += 1;
                continue;
            }
        };
        let page = WebPage::new(
            raw.url.trim(),
            &raw.content,
            raw.lang.trim().to_ascii_lowercase(),
            raw.available,
        );
        match position.get(&page.url) {
            Some(&i) => {
                load.stats.duplicates += 1;
                load.pages[i] = page;
            }
            None => {
                position.insert(page.url.clone(), load.pages.len());
                load.pages.push(page);
            }
        }
    }
    load.stats.loaded = load.pages.len();
    Ok(load)
}

pub fn load_pages(path: impl AsRef<Path>) -> Result<PageLoad> {
    let path = path.as_ref();
    read_pages(open(path)?).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// labels.csv

/// Read `url,c1..c7` rows. Any cell other than `0` or `1` fails the whole
/// load, naming the file line and column. Later rows for the same url
/// replace earlier ones.
pub fn read_labeled_pages<R: Read>(reader: R, source: &Path) -> Result<Vec<LabeledPage>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let url_col = col("url").ok_or_else(|| {
        Error::input(format!(
            "{}: label header must contain url",
            source.display()
        ))
    })?;
    let mut criterion_cols = [0usize; NUM_CRITERIA];
    for (slot, name) in criterion_cols.iter_mut().zip(CRITERION_COLUMNS) {
        *slot = col(name).ok_or_else(|| {
            Error::input(format!(
                "{}: label header is missing column {name}",
                source.display()
            ))
        })?;
    }

    let mut pages: Vec<LabeledPage> = Vec::new();
    let mut position: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let url = record.get(url_col).unwrap_or("");
        if url.is_empty() {
            return Err(Error::LabelValue {
                path: source.to_path_buf(),
                row: line,
                column: "url".into(),
                value: String::new(),
            });
        }
        let mut bits = [false; NUM_CRITERIA];
        for (i, &c) in criterion_cols.iter().enumerate() {
            let cell = record.get(c).unwrap_or("");
            bits[i] = match cell {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::LabelValue {
                        path: source.to_path_buf(),
                        row: line,
                        column: CRITERION_COLUMNS[i].into(),
                        value: other.into(),
                    })
                }
            };
        }
        let page = LabeledPage {
            url: url.to_string(),
            criteria: Criteria(bits),
        };
        match position.get(url) {
            Some(&i) => {
                log::warn!("{}: duplicate label row for {url}", source.display());
                pages[i] = page;
            }
            None => {
                position.insert(page.url.clone(), pages.len());
                pages.push(page);
            }
        }
    }
    Ok(pages)
}

pub fn load_labeled_pages(path: impl AsRef<Path>) -> Result<Vec<LabeledPage>> {
    let path = path.as_ref();
    read_labeled_pages(open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweets(input: &str) -> TweetLoad {
        read_tweets(input.as_bytes()).unwrap()
    }

    #[test]
    fn english_tweet_maps_fields() {
        let load = tweets(
            r#"{"tweet_id":"1","user_id":"u","text":"hi","urls":["https://a.org/x","https://b.org/y"],"like_count":3,"is_retweet":false,"lang":"en"}"#,
        );
        assert_eq!(load.tweets.len(), 1);
        let t = &load.tweets[0];
        assert_eq!(t.urls.len(), 2);
        assert_eq!(t.like_count, 3);
        assert_eq!(t.user_id, "u");
    }

    #[test]
    fn non_english_is_skipped_and_counted() {
        let load = tweets(
            r#"{"tweet_id":"1","user_id":"u","text":"salut","urls":[],"like_count":0,"is_retweet":false,"lang":"fr"}"#,
        );
        assert!(load.tweets.is_empty());
        assert_eq!(load.stats.non_english, 1);
    }

    #[test]
    fn missing_urls_defaults_to_empty() {
        let load = tweets(
            r#"{"tweet_id":1,"user_id":2,"text":"x","like_count":0,"is_retweet":true,"lang":"en"}"#,
        );
        assert_eq!(load.tweets[0].urls, Vec::<String>::new());
        assert_eq!(load.tweets[0].tweet_id, "1");
    }

    #[test]
    fn counters_account_for_every_line() {
        let input = [
            r#"{"tweet_id":"1","user_id":"u","lang":"en"}"#,
            r#"{"tweet_id":"2","user_id":"u","lang":"de"}"#,
            r#"{"tweet_id":"3","user_id":"u"}"#,
            r#"not json"#,
            r#"{"tweet_id":"4","user_id":"u","like_count":-2,"lang":"en"}"#,
            "",
            r#"{"tweet_id":"1","user_id":"v","text":"again","lang":"en"}"#,
            r#"{"tweet_id":"5","user_id":"u","urls":["", "https://x.org"],"lang":"EN"}"#,
        ]
        .join("\n");
        let load = tweets(&input);
        let s = &load.stats;
        assert_eq!(s.lines, 7);
        assert_eq!(s.non_english, 1);
        assert_eq!(s.missing_lang, 1);
        assert_eq!(s.malformed, 2);
        assert_eq!(s.duplicates, 1);
        assert_eq!(
            s.loaded + s.non_english + s.missing_lang + s.malformed + s.duplicates,
            s.lines
        );
        // Last record wins, first position kept.
        assert_eq!(load.tweets[0].user_id, "v");
        assert_eq!(load.tweets[1].urls, vec!["https://x.org".to_string()]);
    }

    #[test]
    fn follower_dedup_and_self_follow() {
        let load =
            read_followers("from_user,to_user\na,b\na,b\nb,a\nc,c\nbad\n".as_bytes()).unwrap();
        assert_eq!(
            load.edges,
            vec![FollowerEdge::new("a", "b"), FollowerEdge::new("b", "a")]
        );
        assert_eq!(load.stats.self_follows, 1);
        assert_eq!(load.stats.duplicates, 1);
        assert_eq!(load.stats.malformed, 1);
    }

    #[test]
    fn follower_header_only_is_empty() {
        let load = read_followers("from_user,to_user\n".as_bytes()).unwrap();
        assert!(load.edges.is_empty());
    }

    #[test]
    fn follower_header_is_checked() {
        assert!(read_followers("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn label_rows_and_sums() {
        let csv = "url,c1,c2,c3,c4,c5,c6,c7\nhttp://x,1,1,1,1,0,0,0\nhttp://y,0,0,0,0,0,0,0\n";
        let pages = read_labeled_pages(csv.as_bytes(), Path::new("labels.csv")).unwrap();
        assert_eq!(pages[0].criteria.sum(), 4);
        assert_eq!(pages[1].criteria.sum(), 0);
    }

    #[test]
    fn non_binary_label_names_row_and_column() {
        let csv = "url,c1,c2,c3,c4,c5,c6,c7\nhttp://x,1,1,1,1,0,0,0\nhttp://y,0,0,2,0,0,0,0\n";
        let err = read_labeled_pages(csv.as_bytes(), Path::new("labels.csv")).unwrap_err();
        match err {
            Error::LabelValue {
                row, column, value, ..
            } => {
                assert_eq!(row, 3);
                assert_eq!(column, "c3");
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn page_word_count_after_tag_stripping() {
        let page = WebPage::new(
            "u",
            "<html><style>p {x}</style><p>Vaccines, work.</p><script>var a = 1;</script> ok&amp;done</html>",
            "en",
            true,
        );
        assert_eq!(
            page.content.split_whitespace().collect::<Vec<_>>(),
            ["Vaccines,", "work.", "ok&done"]
        );
        assert_eq!(page.word_count, 3);
    }

    #[test]
    fn unavailable_page_has_no_content() {
        let load = read_pages(
            r#"{"url":"http://x","content":"some words here","lang":"en","available":false}"#
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(load.pages[0].content, "");
        assert_eq!(load.pages[0].word_count, 0);
    }

    #[test]
    fn loading_is_idempotent() {
        let input = "{\"tweet_id\":\"1\",\"user_id\":\"u\",\"lang\":\"en\"}\n{\"tweet_id\":\"2\",\"user_id\":\"w\",\"lang\":\"en\",\"urls\":[\"a\"]}\n";
        assert_eq!(tweets(input).tweets, tweets(input).tweets);
    }
}

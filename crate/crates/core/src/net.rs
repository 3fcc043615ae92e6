//! Web retrieval: GET/POST with query parameters, redirect following, link
//! validation and URL helpers.

use std::time::Duration;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use thiserror::Error;
use url::Url;

/// Redirects followed by `get_page`/`post_page` before giving up.
pub const MAX_REDIRECTS: usize = 5;

/// Default connect/read bound for a single request.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

pub const USER_AGENT: &str = concat!("webshell/", env!("CARGO_PKG_VERSION"));

/// Everything except RFC 3986 unreserved characters is escaped; space becomes `%20`.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

const BODY_LIMIT: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("invalid URL `{url}`: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("invalid header `{0}`")]
    InvalidHeader(String),
    #[error("connection to {url} failed: {reason}")]
    Connection { url: String, reason: String },
    #[error("too many redirects (more than {MAX_REDIRECTS}) starting at {url}")]
    TooManyRedirects { url: String },
    #[error("HTTP {status} {reason} for {url}")]
    Status { status: u16, reason: String, url: String },
}

impl NetError {
    /// HTTP status carried by the error, if the server answered.
    pub fn status(&self) -> Option<u16> {
        match self {
            NetError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

/// Ordered key/value pairs; order is preserved in the encoded form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryParams(Vec<(String, String)>);

impl QueryParams {
    pub fn new() -> Self {
        QueryParams(Vec::new())
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.push((key.into(), value.into()));
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn encode(&self) -> String {
        url_encode(self)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for QueryParams {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        QueryParams(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

/// `k1=v1&k2=v2`, percent-encoding everything outside the unreserved set.
pub fn url_encode(params: &QueryParams) -> String {
    params
        .0
        .iter()
        .map(|(k, v)| format!("{}={}", utf8_percent_encode(k, COMPONENT), utf8_percent_encode(v, COMPONENT)))
        .collect::<Vec<_>>()
        .join("&")
}

/// Inverse of [`url_encode`]; also accepts `+` for space.
pub fn url_decode(encoded: &str) -> QueryParams {
    let decode = |s: &str| percent_decode_str(&s.replace('+', " ")).decode_utf8_lossy().into_owned();
    encoded
        .split('&')
        .filter(|pair| !pair.is_empty())
        .map(|pair| match pair.split_once('=') {
            Some((k, v)) => (decode(k), decode(v)),
            None => (decode(pair), String::new()),
        })
        .collect()
}

/// Appends an encoded query to a URL, joining with `&` when it already has one.
pub fn with_query(url: &str, params: &QueryParams) -> String {
    if params.is_empty() {
        return url.to_string();
    }
    let (base, fragment) = match url.split_once('#') {
        Some((b, f)) => (b, Some(f)),
        None => (url, None),
    };
    let sep = match base.find('?') {
        None => "?",
        Some(_) if base.ends_with('?') || base.ends_with('&') => "",
        Some(_) => "&",
    };
    let mut out = format!("{base}{sep}{}", url_encode(params));
    if let Some(f) = fragment {
        out.push('#');
        out.push_str(f);
    }
    out
}

/// Resolves `href` against an absolute `base`. Returns `None` for non-HTTP schemes,
/// same-document references, and anything unparseable. The fragment is dropped.
pub fn resolve_url(base: &str, href: &str) -> Option<String> {
    let href = href.trim();
    if href.is_empty() || href.starts_with('#') {
        return None;
    }
    let base = Url::parse(base).ok()?;
    let mut resolved = base.join(href).ok()?;
    if !matches!(resolved.scheme(), "http" | "https") {
        return None;
    }
    resolved.set_fragment(None);
    Some(resolved.to_string())
}

fn check_url(url: &str) -> Result<Url, NetError> {
    let invalid = |reason: String| NetError::InvalidUrl { url: url.to_string(), reason };
    let parsed = Url::parse(url).map_err(|e| invalid(e.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(invalid(format!("unsupported scheme `{}`", parsed.scheme())));
    }
    if parsed.host_str().is_none_or(str::is_empty) {
        return Err(invalid("missing host".into()));
    }
    Ok(parsed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub reason: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
    /// URL that produced this response, after any redirects.
    pub url: String,
}

impl HttpResponse {
    /// Case-insensitive header lookup.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    /// `HTTP/1.1 200 OK`
    pub fn status_line(&self) -> String {
        format!("HTTP/1.1 {} {}", self.status, self.reason)
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

/// Blocking HTTP client. Cheap to clone; clones share a connection pool.
#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    timeout: Duration,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient").field("timeout", &self.timeout).finish()
    }
}

impl Default for HttpClient {
    fn default() -> Self {
        HttpClient::new()
    }
}

impl HttpClient {
    pub fn new() -> Self {
        HttpClient::with_timeout(DEFAULT_TIMEOUT)
    }

    /// A client whose connect and read phases are each bounded by `timeout`.
    pub fn with_timeout(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .user_agent(USER_AGENT)
            .timeout_connect(Some(timeout))
            .timeout_send_request(Some(timeout))
            .timeout_recv_response(Some(timeout))
            .timeout_recv_body(Some(timeout))
            .build();
        HttpClient { agent: config.into(), timeout }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// One request, no redirect following. Any status is returned as a response.
    pub fn send_once(
        &self,
        method: Method,
        url: &str,
        headers: &[(String, String)],
        body: Option<&str>,
    ) -> Result<HttpResponse, NetError> {
        check_url(url)?;
        let result = match method {
            Method::Get => {
                let mut req = self.agent.get(url);
                for (name, value) in headers {
                    req = req.header(name.as_str(), value.as_str());
                }
                req.call()
            }
            Method::Post => {
                let mut req = self.agent.post(url).content_type("application/x-www-form-urlencoded");
                for (name, value) in headers {
                    req = req.header(name.as_str(), value.as_str());
                }
                req.send(body.unwrap_or("").as_bytes())
            }
        };
        let mut resp = result.map_err(|e| match e {
            ureq::Error::Http(_) => NetError::InvalidHeader(e.to_string()),
            ureq::Error::BadUri(reason) => NetError::InvalidUrl { url: url.to_string(), reason },
            other => NetError::Connection { url: url.to_string(), reason: other.to_string() },
        })?;
        let status = resp.status();
        let headers = resp
            .headers()
            .iter()
            .map(|(n, v)| (n.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(BODY_LIMIT)
            .read_to_vec()
            .map_err(|e| NetError::Connection { url: url.to_string(), reason: e.to_string() })?;
        Ok(HttpResponse {
            status: status.as_u16(),
            reason: status.canonical_reason().unwrap_or("").to_string(),
            headers,
            body: String::from_utf8_lossy(&bytes).into_owned(),
            url: url.to_string(),
        })
    }

    /// Sends a request and follows up to [`MAX_REDIRECTS`] redirects. A 303, or a
    /// 301/302 answering a POST, continues as a bodiless GET; 307/308 repeat the
    /// original method and body. The final status is not checked.
    pub fn fetch(
        &self,
        method: Method,
        url: &str,
        headers: &[(String, String)],
        body: Option<&str>,
    ) -> Result<HttpResponse, NetError> {
        let mut method = method;
        let mut body = body.map(str::to_string);
        let mut current = url.to_string();
        for _ in 0..=MAX_REDIRECTS {
            let resp = self.send_once(method, &current, headers, body.as_deref())?;
            let location = match resp.status {
                301 | 302 | 303 | 307 | 308 => resp.header("location"),
                _ => None,
            };
            let Some(location) = location else { return Ok(resp) };
            let next = Url::parse(&current)
                .and_then(|base| base.join(location))
                .map_err(|e| NetError::InvalidUrl { url: location.to_string(), reason: e.to_string() })?;
            if resp.status == 303 || (method == Method::Post && matches!(resp.status, 301 | 302)) {
                method = Method::Get;
                body = None;
            }
            current = next.to_string();
        }
        Err(NetError::TooManyRedirects { url: url.to_string() })
    }

    fn fetch_ok(
        &self,
        method: Method,
        url: &str,
        headers: &[(String, String)],
        body: Option<&str>,
    ) -> Result<HttpResponse, NetError> {
        let resp = self.fetch(method, url, headers, body)?;
        if !resp.is_success() {
            return Err(NetError::Status { status: resp.status, reason: resp.reason, url: resp.url });
        }
        Ok(resp)
    }

    /// GET with optional query parameters; the whole response after redirects.
    pub fn get(
        &self,
        url: &str,
        params: Option<&QueryParams>,
        headers: &[(String, String)],
    ) -> Result<HttpResponse, NetError> {
        let target = params.map_or_else(|| url.to_string(), |p| with_query(url, p));
        self.fetch_ok(Method::Get, &target, headers, None)
    }

    /// Body of a successful GET.
    pub fn get_page(
        &self,
        url: &str,
        params: Option<&QueryParams>,
        headers: &[(String, String)],
    ) -> Result<String, NetError> {
        self.get(url, params, headers).map(|r| r.body)
    }

    pub fn post(&self, url: &str, form: &QueryParams, headers: &[(String, String)]) -> Result<HttpResponse, NetError> {
        self.fetch_ok(Method::Post, url, headers, Some(&url_encode(form)))
    }

    /// Body of a successful form POST.
    pub fn post_page(&self, url: &str, form: &QueryParams, headers: &[(String, String)]) -> Result<String, NetError> {
        self.post(url, form, headers).map(|r| r.body)
    }

    /// True iff a single GET (redirects not followed) answers 200. Never errors.
    pub fn validate_link(&self, url: &str) -> bool {
        matches!(self.send_once(Method::Get, url, &[], None), Ok(resp) if resp.status == 200)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        let qp: QueryParams = [("p", "CNRG"), ("b", "3")].into_iter().collect();
        assert_eq!(url_encode(&qp), "p=CNRG&b=3");
        assert_eq!(url_encode(&QueryParams::new()), "");
        let qp: QueryParams = [("q", "a b&c")].into_iter().collect();
        assert_eq!(url_encode(&qp), "q=a%20b%26c");
        let qp: QueryParams = [("k=", "é/?#")].into_iter().collect();
        assert_eq!(url_encode(&qp), "k%3D=%C3%A9%2F%3F%23");
    }

    #[test]
    fn decode_inverts_encode() {
        let qp: QueryParams = [("q", "a b&c"), ("x", ""), ("ü", "100%")].into_iter().collect();
        assert_eq!(url_decode(&url_encode(&qp)), qp);
    }

    #[test]
    fn query_joining() {
        let qp: QueryParams = [("p", "CNRG"), ("b", "3")].into_iter().collect();
        assert_eq!(with_query("http://h/bin/query", &qp), "http://h/bin/query?p=CNRG&b=3");
        assert_eq!(with_query("http://h/q?x=1", &qp), "http://h/q?x=1&p=CNRG&b=3");
        assert_eq!(with_query("http://h/q?", &qp), "http://h/q?p=CNRG&b=3");
        assert_eq!(with_query("http://h/q#f", &qp), "http://h/q?p=CNRG&b=3#f");
        assert_eq!(with_query("http://h/q", &QueryParams::new()), "http://h/q");
    }

    #[test]
    fn resolve_examples() {
        assert_eq!(resolve_url("http://h/a/b.html", "c.html").as_deref(), Some("http://h/a/c.html"));
        assert_eq!(resolve_url("http://h/", "mailto:x@y"), None);
        assert_eq!(resolve_url("http://h/p.html", "#top"), None);
        assert_eq!(resolve_url("http://h/p.html", "javascript:void(0)"), None);
        assert_eq!(resolve_url("http://h/p.html", "ftp://h/f"), None);
        assert_eq!(resolve_url("http://h/a/b.html", "../x.html#s").as_deref(), Some("http://h/x.html"));
        assert_eq!(resolve_url("http://h/a/", "//other/y").as_deref(), Some("http://other/y"));
        assert_eq!(resolve_url("http://h/a/", " /z ").as_deref(), Some("http://h/z"));
    }

    #[test]
    fn invalid_urls() {
        let client = HttpClient::new();
        assert!(matches!(client.get_page("not a url", None, &[]), Err(NetError::InvalidUrl { .. })));
        assert!(matches!(client.get_page("ftp://h/x", None, &[]), Err(NetError::InvalidUrl { .. })));
        assert!(!client.validate_link("nonsense"));
        assert!(!client.validate_link(""));
    }

    #[test]
    fn status_line_format() {
        let resp = HttpResponse {
            status: 404,
            reason: "Not Found".into(),
            headers: vec![("Content-Type".into(), "text/html".into())],
            body: String::new(),
            url: "http://h/".into(),
        };
        assert_eq!(resp.status_line(), "HTTP/1.1 404 Not Found");
        assert_eq!(resp.header("content-type"), Some("text/html"));
    }
}

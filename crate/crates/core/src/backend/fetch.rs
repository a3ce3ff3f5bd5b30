use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Duration;

use scraper::{Html, Node};
use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentKind {
    Html,
    Pdf,
    Text,
}

impl ContentKind {
    /// Classifies a response by content type, falling back to the URL suffix
    /// and then to magic bytes.
    pub fn sniff(content_type: Option<&str>, url: &str, bytes: &[u8]) -> Self {
        let ct = content_type.unwrap_or("").to_ascii_lowercase();
        if ct.contains("pdf") || url.to_ascii_lowercase().ends_with(".pdf") || bytes.starts_with(b"%PDF") {
            ContentKind::Pdf
        } else if ct.contains("html") || ct.contains("xml") || looks_like_html(bytes) {
            ContentKind::Html
        } else {
            ContentKind::Text
        }
    }
}

fn looks_like_html(bytes: &[u8]) -> bool {
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(512)]).to_ascii_lowercase();
    head.contains("<html") || head.contains("<!doctype html") || head.contains("<body")
}

/// A retrieved document reduced to plain text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchedDocument {
    pub url: String,
    pub kind: ContentKind,
    pub text: String,
}

pub trait DocumentFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<FetchedDocument, BackendError>;
}

/// Converts PDF bytes to text.
pub trait PdfTextExtractor: Send + Sync {
    fn extract(&self, pdf: &[u8]) -> Result<String, BackendError>;
}

/// Pipes PDF bytes through an external program (for example
/// `pdftotext - -`) and reads text from its stdout.
#[derive(Debug, Clone)]
pub struct CommandPdfExtractor {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandPdfExtractor {
    pub fn new(program: &str, args: &[&str]) -> Self {
        CommandPdfExtractor { program: program.into(), args: args.iter().map(|a| a.to_string()).collect() }
    }
}

impl PdfTextExtractor for CommandPdfExtractor {
    fn extract(&self, pdf: &[u8]) -> Result<String, BackendError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| BackendError::Unavailable(format!("spawning {}: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let bytes = pdf.to_vec();
        let writer = std::thread::spawn(move || stdin.write_all(&bytes));
        let mut out = Vec::new();
        child.stdout.take().expect("stdout is piped").read_to_end(&mut out).map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = child.wait().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        // A program that exits without reading all input closes the pipe early;
        // its exit status is what matters.
        let _ = writer.join();
        if !status.success() {
            return Err(BackendError::Unavailable(format!("{} exited with {status}", self.program)));
        }
        Ok(String::from_utf8_lossy(&out).into_owned())
    }
}

/// Visible text of an HTML document, one block per line.
pub fn html_to_text(html: &str) -> String {
    let doc = Html::parse_document(html);
    let mut out = String::new();
    for node in doc.tree.root().descendants() {
        match node.value() {
            Node::Text(text) => {
                let hidden = node.ancestors().any(|a| {
                    a.value().as_element().is_some_and(|e| matches!(e.name(), "script" | "style" | "noscript" | "head"))
                });
                if !hidden {
                    out.push_str(text);
                }
            }
            Node::Element(e) if is_block(e.name()) => out.push('\n'),
            _ => {}
        }
    }
    out.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_block(name: &str) -> bool {
    matches!(
        name,
        "p" | "div" | "br" | "li" | "tr" | "h1" | "h2" | "h3" | "h4" | "h5" | "h6" | "section" | "article" | "pre"
            | "blockquote" | "table" | "ul" | "ol"
    )
}

/// Fetches over HTTP(S) with a per-document size cap.
#[derive(Clone)]
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    pub max_bytes: usize,
    pdf: Option<Arc<dyn PdfTextExtractor>>,
}

impl HttpFetcher {
    pub const DEFAULT_MAX_BYTES: usize = 2 * 1024 * 1024;

    pub fn new() -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("focused-feedback/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpFetcher { client, max_bytes: Self::DEFAULT_MAX_BYTES, pdf: None })
    }

    pub fn with_max_bytes(mut self, max_bytes: usize) -> Self {
        self.max_bytes = max_bytes;
        self
    }

    pub fn with_pdf_extractor(mut self, extractor: Arc<dyn PdfTextExtractor>) -> Self {
        self.pdf = Some(extractor);
        self
    }
}

impl std::fmt::Debug for HttpFetcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpFetcher").field("max_bytes", &self.max_bytes).field("pdf", &self.pdf.is_some()).finish()
    }
}

impl DocumentFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedDocument, BackendError> {
        let response = self.client.get(url).send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("GET {url} returned {status}")));
        }
        let content_type =
            response.headers().get(reqwest::header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).map(str::to_string);
        let mut bytes = Vec::new();
        response
            .take(self.max_bytes as u64)
            .read_to_end(&mut bytes)
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        decode(url, content_type.as_deref(), &bytes, self.pdf.as_deref())
    }
}

/// Turns raw bytes into a [`FetchedDocument`].
pub(crate) fn decode(
    url: &str,
    content_type: Option<&str>,
    bytes: &[u8],
    pdf: Option<&dyn PdfTextExtractor>,
) -> Result<FetchedDocument, BackendError> {
    let kind = ContentKind::sniff(content_type, url, bytes);
    let text = match kind {
        ContentKind::Pdf => match pdf {
            Some(extractor) => extractor.extract(bytes)?,
            None => return Err(BackendError::Unavailable(format!("{url} is a PDF and no extractor is configured"))),
        },
        ContentKind::Html => html_to_text(&String::from_utf8_lossy(bytes)),
        ContentKind::Text => String::from_utf8_lossy(bytes).into_owned(),
    };
    Ok(FetchedDocument { url: url.to_string(), kind, text })
}

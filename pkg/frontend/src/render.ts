import type {
  AskResponse,
  ChunkInfo,
  DocumentSummary,
  Exchange,
  HealthInfo,
  Source,
} from "./types";

// Pure templates: every function maps data to an HTML string, so the whole
// visual layer is unit-testable without wiring.

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function chunkOrdinal(chunkId: string): string {
  const suffix = chunkId.split(":").pop() ?? "";
  const parsed = Number.parseInt(suffix, 10);
  return Number.isNaN(parsed) ? chunkId : String(parsed);
}

export function renderHeader(health: HealthInfo | null): string {
  const stubBadge = health?.stub_mode
    ? '<span class="badge badge-stub">STUB MODE</span>'
    : "";
  const version = health ? `v${escapeHtml(health.version)}` : "connecting...";
  return `
    <header class="console-header">
      <h1>Troubleshooting Console</h1>
      <div class="header-meta">${stubBadge}<span class="version">${version}</span></div>
    </header>`;
}

export function renderSource(
  source: Source,
  titles: Map<string, string>,
): string {
  const title = titles.get(source.document_id) ?? source.document_id;
  return `
    <details class="source" data-chunk-id="${escapeHtml(source.chunk_id)}">
      <summary>
        <span class="badge badge-doc">${escapeHtml(source.document_id)}</span>
        <span class="source-title">${escapeHtml(title)}</span>
        <span class="source-ordinal">chunk ${chunkOrdinal(source.chunk_id)}</span>
        <span class="source-score">score ${source.score.toFixed(4)}</span>
      </summary>
      <pre class="source-text">${escapeHtml(source.text)}</pre>
      <button class="deep-link" type="button"
        data-document-id="${escapeHtml(source.document_id)}"
        data-chunk-id="${escapeHtml(source.chunk_id)}">open in manual</button>
    </details>`;
}

export function renderSourcesPanel(
  sources: Source[],
  titles: Map<string, string>,
): string {
  if (sources.length === 0) {
    return `
      <section class="sources sources-empty">
        <span class="ungrounded-flag">UNGROUNDED</span>
        <p>No knowledge-base material supports this answer. Do not act on it
        without consulting the manuals directly.</p>
      </section>`;
  }
  const items = sources.map((s) => renderSource(s, titles)).join("");
  return `<section class="sources"><h3>Sources</h3>${items}</section>`;
}

export function renderAnswer(
  answer: AskResponse,
  titles: Map<string, string>,
): string {
  return `
    <div class="answer">
      <p class="answer-text">${escapeHtml(answer.text)}</p>
      <span class="badge badge-latency">${answer.latency_ms.toFixed(0)} ms</span>
      <span class="badge badge-model">${escapeHtml(answer.model)}</span>
      ${renderSourcesPanel(answer.sources, titles)}
    </div>`;
}

export function renderExchange(
  exchange: Exchange,
  titles: Map<string, string>,
): string {
  const pin = exchange.pinnedDocument
    ? `<span class="badge badge-pin">pinned: ${escapeHtml(exchange.pinnedDocument)}</span>`
    : "";
  let body: string;
  if (exchange.state === "pending") {
    body = '<div class="pending">waiting for answer...</div>';
  } else if (exchange.state === "failed") {
    body = `
      <div class="error-banner">
        <span>service error: ${escapeHtml(exchange.error ?? "unknown")}</span>
        <button class="retry" type="button"
          data-question="${escapeHtml(exchange.question)}">retry</button>
      </div>`;
  } else {
    body = renderAnswer(exchange.answer as AskResponse, titles);
  }
  return `
    <article class="exchange exchange-${exchange.state}">
      <div class="question">${escapeHtml(exchange.question)} ${pin}</div>
      ${body}
    </article>`;
}

export function renderExchangeLog(
  exchanges: Exchange[],
  titles: Map<string, string>,
): string {
  return exchanges.map((e) => renderExchange(e, titles)).join("");
}

export function renderManualView(
  document: DocumentSummary,
  chunks: ChunkInfo[],
  highlightChunkId: string | null,
): string {
  const rows = chunks
    .map((chunk) => {
      const highlighted = chunk.chunk_id === highlightChunkId;
      const text = highlighted
        ? `<mark data-chunk-id="${escapeHtml(chunk.chunk_id)}">${escapeHtml(chunk.text)}</mark>`
        : escapeHtml(chunk.text);
      return `
        <div class="manual-chunk${highlighted ? " manual-chunk-highlight" : ""}"
             id="chunk-${escapeHtml(chunk.chunk_id)}">
          <div class="manual-chunk-meta">chunk ${chunk.ordinal}
            <span class="chunk-span">[${chunk.char_start}..${chunk.char_end}]</span>
          </div>
          <pre>${text}</pre>
        </div>`;
    })
    .join("");
  const empty = chunks.length === 0
    ? '<p class="empty-state">This manual has no indexed chunks.</p>'
    : "";
  return `
    <section class="manual-view" data-document-id="${escapeHtml(document.document_id)}">
      <h2>${escapeHtml(document.title)}</h2>
      <p class="manual-meta">${document.procedures} procedures,
        ${document.chunks} chunks</p>
      <button class="back-to-session" type="button">back to session</button>
      ${empty}${rows}
    </section>`;
}

export function renderDocumentPicker(documents: DocumentSummary[]): string {
  const options = documents
    .map(
      (d) =>
        `<option value="${escapeHtml(d.document_id)}">${escapeHtml(d.title)}</option>`,
    )
    .join("");
  return `<option value="">no pinned manual</option>${options}`;
}

export function renderEmptyKb(): string {
  return `
    <section class="empty-state">
      <h2>Knowledge base is empty</h2>
      <p>Build an index from your manuals before asking questions.</p>
    </section>`;
}

export function renderQueueBadge(queued: number): string {
  return queued > 0
    ? `<span class="badge badge-queue">${queued} queued</span>`
    : "";
}

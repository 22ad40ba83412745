import { ApiClient } from "./api";
import {
  renderDocumentPicker,
  renderEmptyKb,
  renderExchangeLog,
  renderHeader,
  renderManualView,
  renderQueueBadge,
} from "./render";
import type { DocumentSummary, Exchange, HealthInfo } from "./types";

interface PendingAsk {
  question: string;
  pinnedDocument: string | null;
  exchange: Exchange;
}

// One console session: the exchange log, an optional pinned manual, and a
// queue guaranteeing a single in-flight /ask at a time.
export class ConsoleApp {
  private exchanges: Exchange[] = [];
  private queue: PendingAsk[] = [];
  private inFlight = false;
  private health: HealthInfo | null = null;
  private documents: DocumentSummary[] = [];
  private titles = new Map<string, string>();
  private manualView: string | null = null;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    try {
      this.health = await this.api.healthz();
      this.documents = await this.api.documents();
      this.titles = new Map(
        this.documents.map((d) => [d.document_id, d.title]),
      );
    } catch {
      this.health = null;
    }
    this.renderShell();
  }

  pinnedDocument(): string | null {
    const picker = this.root.querySelector<HTMLSelectElement>("#document-pin");
    return picker && picker.value ? picker.value : null;
  }

  submitQuestion(question: string): void {
    const trimmed = question.trim();
    if (!trimmed) {
      return;
    }
    const exchange: Exchange = {
      question: trimmed,
      pinnedDocument: this.pinnedDocument(),
      state: "pending",
    };
    this.exchanges.push(exchange);
    this.queue.push({
      question: trimmed,
      pinnedDocument: exchange.pinnedDocument,
      exchange,
    });
    this.renderSession();
    void this.processQueue();
  }

  private async processQueue(): Promise<void> {
    if (this.inFlight) {
      return; // a later completion will drain the queue
    }
    const next = this.queue.shift();
    if (!next) {
      return;
    }
    this.inFlight = true;
    try {
      const answer = await this.api.ask(next.question, next.pinnedDocument);
      next.exchange.state = "answered";
      next.exchange.answer = answer;
    } catch (error) {
      next.exchange.state = "failed";
      next.exchange.error =
        error instanceof Error ? error.message : String(error);
    } finally {
      this.inFlight = false;
      this.renderSession();
      void this.processQueue();
    }
  }

  async openManual(documentId: string, highlightChunkId: string | null): Promise<void> {
    const summary = this.documents.find((d) => d.document_id === documentId);
    if (!summary) {
      this.manualView = `
        <section class="manual-view manual-missing">
          <h2>Unknown manual</h2>
          <p>No document ${documentId} in the knowledge base.</p>
          <button class="back-to-session" type="button">back to session</button>
        </section>`;
      this.renderSession();
      return;
    }
    try {
      const chunks = await this.api.documentChunks(documentId);
      this.manualView = renderManualView(summary, chunks, highlightChunkId);
    } catch (error) {
      this.manualView = `
        <section class="manual-view manual-missing">
          <h2>Manual unavailable</h2>
          <p>${error instanceof Error ? error.message : String(error)}</p>
          <button class="back-to-session" type="button">back to session</button>
        </section>`;
    }
    this.renderSession();
    const marked = this.root.querySelector("mark[data-chunk-id]");
    marked?.scrollIntoView?.({ block: "center" });
  }

  closeManual(): void {
    this.manualView = null;
    this.renderSession();
  }

  private renderShell(): void {
    this.root.innerHTML = `
      ${renderHeader(this.health)}
      <form id="ask-form">
        <input id="question-input" type="text" autocomplete="off"
          placeholder="What should I do if ..." />
        <select id="document-pin"></select>
        <button type="submit">ask</button>
        <span id="queue-indicator"></span>
      </form>
      <main id="session"></main>`;
    const picker = this.root.querySelector<HTMLSelectElement>("#document-pin");
    if (picker) {
      picker.innerHTML = renderDocumentPicker(this.documents);
    }
    const form = this.root.querySelector<HTMLFormElement>("#ask-form");
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>("#question-input");
      if (input) {
        this.submitQuestion(input.value);
        input.value = "";
      }
    });
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target.classList.contains("deep-link")) {
        void this.openManual(
          target.dataset.documentId ?? "",
          target.dataset.chunkId ?? null,
        );
      } else if (target.classList.contains("back-to-session")) {
        this.closeManual();
      } else if (target.classList.contains("retry")) {
        this.submitQuestion(target.dataset.question ?? "");
      }
    });
    this.renderSession();
  }

  private renderSession(): void {
    const session = this.root.querySelector<HTMLElement>("#session");
    if (!session) {
      return;
    }
    if (this.manualView !== null) {
      session.innerHTML = this.manualView;
    } else if (this.exchanges.length === 0 && this.documents.length === 0) {
      session.innerHTML = renderEmptyKb();
    } else {
      session.innerHTML = renderExchangeLog(this.exchanges, this.titles);
    }
    const indicator = this.root.querySelector<HTMLElement>("#queue-indicator");
    if (indicator) {
      indicator.innerHTML = renderQueueBadge(this.queue.length);
    }
  }
}

export function mountConsole(baseUrl: string, root: HTMLElement): ConsoleApp {
  const app = new ConsoleApp(new ApiClient(baseUrl), root);
  void app.start();
  return app;
}

import type {
  AskResponse,
  ChunkInfo,
  DocumentSummary,
  HealthInfo,
  KbStats,
} from "./types";

// Thin client for the troubleshooting service. The console never computes
// scores or metrics itself; everything shown comes from these endpoints.
export class ApiClient {
  constructor(private baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new Error(`${path} failed: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  async healthz(): Promise<HealthInfo> {
    return this.get<HealthInfo>("/healthz");
  }

  async kbStats(): Promise<KbStats> {
    return this.get<KbStats>("/kb/stats");
  }

  async documents(): Promise<DocumentSummary[]> {
    return this.get<DocumentSummary[]>("/kb/documents");
  }

  async documentChunks(documentId: string): Promise<ChunkInfo[]> {
    return this.get<ChunkInfo[]>(
      `/kb/documents/${encodeURIComponent(documentId)}/chunks`,
    );
  }

  async ask(question: string, documentId: string | null): Promise<AskResponse> {
    const body: Record<string, unknown> = { question };
    if (documentId) {
      body.document_id = documentId;
    }
    const response = await fetch(`${this.baseUrl}/ask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      let message = `HTTP ${response.status}`;
      try {
        const payload = (await response.json()) as { message?: string; error?: string };
        message = payload.message ?? payload.error ?? message;
      } catch {
        // keep the status text
      }
      throw new Error(message);
    }
    return (await response.json()) as AskResponse;
  }
}

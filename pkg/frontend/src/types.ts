// Wire types, mirroring the service API (docs/api.md in the repo root).

export interface Source {
  chunk_id: string;
  document_id: string;
  score: number;
  text: string;
}

export interface AskResponse {
  text: string;
  sources: Source[];
  latency_ms: number;
  model: string;
  prompt: string;
}

export interface HealthInfo {
  status: string;
  version: string;
  stub_mode: boolean;
}

export interface KbStats {
  documents: number;
  chunks: number;
  dim: number | null;
  chunk_size: number;
  index_version: number;
}

export interface DocumentSummary {
  document_id: string;
  title: string;
  procedures: number;
  chunks: number;
}

export interface ChunkInfo {
  chunk_id: string;
  ordinal: number;
  char_start: number;
  char_end: number;
  text: string;
}

export interface Exchange {
  question: string;
  pinnedDocument: string | null;
  state: "pending" | "answered" | "failed";
  answer?: AskResponse;
  error?: string;
}

// Wire contract of the backend /analyze endpoint. The extension renders
// these responses verbatim and performs no analysis of its own.

export interface AnalyzeRequestBody {
  url: string;
  title: string;
  text: string;
}

export interface ViolationEntry {
  attribute: string;
  reason: string; // "false" | "unknown"
  description: string;
}

export interface AnalyzeResponseBody {
  verdict: "COMPLIANT" | "NON_COMPLIANT";
  violations: ViolationEntry[];
  attributes: Record<string, string>;
  cached: boolean;
  engine_version: string;
}

export interface PageCapture {
  url: string;
  title: string;
  text: string;
  truncated: boolean;
}

export type PanelPhase = "idle" | "checking" | "done" | "error";

export interface PanelState {
  phase: PanelPhase;
  verdict?: "COMPLIANT" | "NON_COMPLIANT";
  violations: ViolationEntry[];
  cached: boolean;
  truncated: boolean;
  errorMessage?: string;
}

export const DEFAULT_BACKEND_URL = "http://127.0.0.1:8200";

/**
 * Wire types for the soil copilot HTTP API.
 *
 * These mirror the service's JSON responses field-for-field.  The UI passes
 * the values through verbatim: every number on screen comes straight from a
 * tool result or a /counties response, never from client-side arithmetic.
 */

export interface HealthResponse {
  status: string;
  version: string;
  backend: "mock" | "remote" | "disabled";
}

export interface PersonaInfo {
  role: string;
  system_prompt: string;
}

export interface PersonasResponse {
  personas: PersonaInfo[];
}

// -- county records (GET /counties/{name}) ----------------------------------

export interface DroughtEvent {
  year_start: number;
  year_end: number;
  category: string;
}

export interface WildfireIncident {
  year: number;
  incident_name: string;
  acres: number | null;
}

export interface CropEntry {
  name: string;
  area_fraction: number | null;
}

export interface CropYear {
  year: number;
  crops: CropEntry[];
}

export interface FarmRecord {
  farm_name: string;
  county: string;
  practice: string;
  year_implemented: number;
  funding_status: string;
}

export interface CountyRecord {
  county: string;
  soc_2016_pct: number | null;
  soc_2023_pct: number | null;
  drought_events: DroughtEvent[];
  wildfires: WildfireIncident[];
  crops: CropYear[];
  tillage_scale_2019: number | null;
  farms: FarmRecord[];
}

// -- tool results (POST /tools/{name}) ---------------------------------------

export interface SocPredictionResult {
  county: string;
  soc_2016_pct: number;
  soc_2023_pct: number;
}

export interface DroughtConditionsResult {
  county: string;
  events: DroughtEvent[];
}

export interface WildfireIncidentsResult {
  county: string;
  incidents: WildfireIncident[];
}

export interface TillageScaleResult {
  county: string;
  year: number;
  tillage_scale: number;
  /** Present when the value came from coherence detection, not the store. */
  source?: string;
}

export interface SupportHit {
  doc_id: string;
  chunk_index: number;
  title: string;
  topic: string;
  citation: string;
  score: number;
  text: string;
}

export interface SupportArgumentsResult {
  query: string;
  topic: string | null;
  results: SupportHit[];
}

// -- chat (POST /chat) --------------------------------------------------------

export interface TraceEntry {
  call_id: string;
  name: string;
  arguments: Record<string, unknown>;
  result?: unknown;
  error?: { type: string; message: string };
}

export interface ChatResponse {
  transcript_id: string;
  session_id: string;
  persona: string;
  answer: string;
  tool_trace: TraceEntry[];
  truncated: boolean;
}

/** Wire types for the labeling service JSON API. */

export type Label = "anomaly" | "nominal";
export type SessionStatus = "active" | "exhausted";

export interface PendingQuery {
  instance_id: number;
  features: Record<string, number>;
  score: number;
  iteration: number;
  budget_remaining: number;
}

export interface HistoryEntry {
  instance_id: number;
  label: Label;
}

export interface CurvePoint {
  iteration: number;
  cumulative: number;
}

export interface SessionSnapshot {
  session_id: string;
  dataset_id: string;
  status: SessionStatus;
  iteration: number;
  budget: number;
  anomalies_found: number;
  config: Record<string, number>;
  query_history: HistoryEntry[];
  curve: CurvePoint[];
  weight_norm: number;
  feature_medians: Record<string, number>;
  pending: PendingQuery | null;
}

export interface LabelResult {
  accepted: boolean;
  iteration: number;
  anomalies_found: number;
  curve_point: CurvePoint;
  status: SessionStatus;
  next: PendingQuery | null;
}

export interface SessionCreateRequest {
  dataset_id: string;
  seed?: number;
  budget?: number;
  tau?: number;
  c_a?: number;
  c_xi?: number;
  num_trees?: number;
  subsample_size?: number;
  scheme?: "if" | "if-leaf";
}

export interface DatasetInfo {
  dataset_id: string;
  total: number;
  dims: number;
  anomaly_count: number;
}

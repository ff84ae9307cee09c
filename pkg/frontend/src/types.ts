// Wire types mirroring the server's /v1 JSON schemas.

export interface SceneElement {
  x: number;
  y: number;
  size: number;
  rotation: number;
}

export interface SceneDescription {
  schema_version: string;
  shape_kind: string;
  color_family: string;
  fill: string;
  stroke: string;
  count: number;
  background: string;
  elements: SceneElement[];
}

export interface RoundView {
  round_id: string;
  scenes: [SceneDescription, SceneDescription];
  symbol: number;
  label: string | null;
}

export interface SessionStats {
  session_id: string;
  rounds: number;
  wins: number;
  success_rate: number | null;
  p_value_vs_chance: number;
  online_update: boolean;
}

export interface ChoiceResponse {
  correct: boolean;
  stats: SessionStats;
}

export type Side = "L" | "R";

export interface SessionOptions {
  checkpoint?: string;
  mode?: "instance_level" | "class_level";
  online_update?: boolean;
  seed?: number;
}
